//! Graph surgery: deleting and replacing the values that realize a
//! structural path, and measuring which other path features flip as a side
//! effect.
//!
//! A path may be realized at several places at once (array fan-out, shared
//! objects); mutations edit every realization simultaneously so the feature
//! actually turns off. Side effects are measured by extracting the path set
//! before and after the edit, which also captures features that disappear
//! because their only route ran through the deleted value.

use std::collections::{BTreeMap, BTreeSet};

use crate::features::{extract_paths, StructuralPath};
use crate::pdf::{Dict, ObjectGraph, PdfObject, Provenance};

/// One step inside a holder object's value tree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SiteStep {
    Key(String),
    Elem(usize),
}

/// A concrete realization of a path: the dictionary that holds the final
/// key, addressed as (object number, steps within that object, key).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Site {
    pub holder: u32,
    pub steps: Vec<SiteStep>,
    pub key: String,
}

impl Site {
    /// Human-readable address, e.g. `(1, ["OpenAction"])` or
    /// `(4, ["Names", "[1]", "JS"])`.
    pub fn address(&self) -> (u32, Vec<String>) {
        let mut parts: Vec<String> = self
            .steps
            .iter()
            .map(|s| match s {
                SiteStep::Key(k) => k.clone(),
                SiteStep::Elem(i) => format!("[{i}]"),
            })
            .collect();
        parts.push(self.key.clone());
        (self.holder, parts)
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum MutationError {
    #[error("path {0} is not present in the graph")]
    PathAbsent(StructuralPath),
}

/// The result of a deletion or replacement.
#[derive(Debug, Clone)]
pub struct MutationOutcome {
    pub graph: ObjectGraph,
    /// Addresses that were edited, in canonical order.
    pub edited_sites: Vec<(u32, Vec<String>)>,
    /// Paths present before the edit and absent after it (the target plus
    /// any collateral, e.g. descendants of a removed subtree).
    pub flipped: BTreeSet<StructuralPath>,
}

/// Finds every site whose traversal realizes `path`, in canonical order,
/// deduplicated. Traversal follows the same rules as feature extraction
/// (arrays transparent, references followed, per-chain cycle guard).
pub fn locate_sites(graph: &ObjectGraph, path: &StructuralPath) -> Vec<Site> {
    let mut sites = Vec::new();
    let mut chain = vec![graph.root_number()];
    descend_dict(
        graph,
        graph.root_dict(),
        graph.root_number(),
        &mut Vec::new(),
        path.components(),
        0,
        &mut chain,
        &mut sites,
    );
    sites.sort();
    sites.dedup();
    sites
}

#[allow(clippy::too_many_arguments)]
fn descend_dict(
    graph: &ObjectGraph,
    dict: &Dict,
    holder: u32,
    steps: &mut Vec<SiteStep>,
    comps: &[String],
    matched: usize,
    chain: &mut Vec<u32>,
    sites: &mut Vec<Site>,
) {
    let want = &comps[matched];
    let Some(value) = dict.get(want) else { return };
    if matched + 1 == comps.len() {
        sites.push(Site { holder, steps: steps.clone(), key: want.clone() });
        return;
    }
    steps.push(SiteStep::Key(want.clone()));
    descend_value(graph, value, holder, steps, comps, matched + 1, chain, sites);
    steps.pop();
}

#[allow(clippy::too_many_arguments)]
fn descend_value(
    graph: &ObjectGraph,
    value: &PdfObject,
    holder: u32,
    steps: &mut Vec<SiteStep>,
    comps: &[String],
    matched: usize,
    chain: &mut Vec<u32>,
    sites: &mut Vec<Site>,
) {
    match value {
        PdfObject::Dictionary(d) => {
            descend_dict(graph, d, holder, steps, comps, matched, chain, sites)
        }
        PdfObject::Stream(s) => {
            descend_dict(graph, &s.dict, holder, steps, comps, matched, chain, sites)
        }
        PdfObject::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                steps.push(SiteStep::Elem(i));
                descend_value(graph, item, holder, steps, comps, matched, chain, sites);
                steps.pop();
            }
        }
        PdfObject::Reference(r) => {
            let before = chain.len();
            let mut cur = *r;
            let terminal = loop {
                if chain.contains(&cur.number) {
                    break None;
                }
                chain.push(cur.number);
                match graph.objects().get(&cur.number) {
                    None => break None,
                    Some(PdfObject::Reference(next)) => cur = *next,
                    Some(obj) => break Some((cur.number, obj)),
                }
            };
            if let Some((num, obj)) = terminal {
                // The reference moved us into a new holder; steps restart.
                let mut inner_steps = Vec::new();
                descend_value(graph, obj, num, &mut inner_steps, comps, matched, chain, sites);
            }
            chain.truncate(before);
        }
        _ => {}
    }
}

/// Navigates to the dictionary a site addresses. Returns `None` when an
/// earlier edit on the same path already removed the enclosing subtree.
fn site_dict_mut<'a>(objects: &'a mut BTreeMap<u32, PdfObject>, site: &Site) -> Option<&'a mut Dict> {
    let mut cur = objects.get_mut(&site.holder)?;
    for step in &site.steps {
        cur = match (step, cur) {
            (SiteStep::Key(k), PdfObject::Dictionary(d)) => d.get_mut(k)?,
            (SiteStep::Key(k), PdfObject::Stream(s)) => s.dict.get_mut(k)?,
            (SiteStep::Elem(i), PdfObject::Array(a)) => a.get_mut(*i)?,
            _ => return None,
        };
    }
    match cur {
        PdfObject::Dictionary(d) => Some(d),
        PdfObject::Stream(s) => Some(&mut s.dict),
        _ => None,
    }
}

fn apply_edit(
    graph: &ObjectGraph,
    path: &StructuralPath,
    depth_limit: usize,
    donor: Option<&PdfObject>,
) -> Result<MutationOutcome, MutationError> {
    let sites = locate_sites(graph, path);
    if sites.is_empty() {
        return Err(MutationError::PathAbsent(path.clone()));
    }
    let before = extract_paths(graph, depth_limit);
    let mut objects = graph.objects().clone();
    let mut edited = Vec::new();
    for site in &sites {
        // A site vanishing mid-edit means an enclosing site on the same path
        // already took its subtree out; the net effect is identical.
        let Some(dict) = site_dict_mut(&mut objects, site) else { continue };
        match donor {
            None => {
                if dict.remove(&site.key).is_some() {
                    edited.push(site.address());
                }
            }
            Some(obj) => {
                dict.insert(site.key.clone(), obj.clone());
                edited.push(site.address());
            }
        }
    }
    let mutated = ObjectGraph::new(objects, graph.trailer().clone(), Provenance::Mutated)
        .expect("edits keep the trailer and catalog intact");
    let after = extract_paths(&mutated, depth_limit);
    let flipped = before.difference(&after).cloned().collect();
    Ok(MutationOutcome { graph: mutated, edited_sites: edited, flipped })
}

/// Deletes every realization of `path`. `flipped` lists the target and all
/// collateral features that turned off.
///
/// One class of paths is irremovable: a stream's `Length` entry is derived
/// bookkeeping that graph construction re-normalizes, so deleting such a
/// path edits the dictionary and is then undone by reconstruction — the
/// outcome reports no flips. Probing code therefore classifies these
/// features as obligatory, which is accurate: the file format cannot
/// express a stream without its length.
pub fn delete_path(
    graph: &ObjectGraph,
    path: &StructuralPath,
    depth_limit: usize,
) -> Result<MutationOutcome, MutationError> {
    apply_edit(graph, path, depth_limit, None)
}

/// Replaces the value at every realization of `path` with `donor`. The
/// target path stays present; descendants of the old values may flip off.
pub fn replace_path(
    graph: &ObjectGraph,
    path: &StructuralPath,
    donor: &PdfObject,
    depth_limit: usize,
) -> Result<MutationOutcome, MutationError> {
    apply_edit(graph, path, depth_limit, Some(donor))
}

/// The features that flip off alongside `path` when it is deleted,
/// excluding the path itself.
pub fn probe_dependents(
    graph: &ObjectGraph,
    path: &StructuralPath,
    depth_limit: usize,
) -> Result<BTreeSet<StructuralPath>, MutationError> {
    let outcome = delete_path(graph, path, depth_limit)?;
    let mut deps = outcome.flipped;
    deps.remove(path);
    Ok(deps)
}

/// Picks a replacement value for `path` from a benign document: the value at
/// the first site realizing the same path; failing that, the first value of
/// the donor's catalog; failing that, a plain text scalar. The chosen value
/// is deep-copied with references resolved against the donor, so it is
/// self-contained in the target graph.
pub fn select_donor(donor: &ObjectGraph, path: &StructuralPath) -> PdfObject {
    let sites = locate_sites(donor, path);
    if let Some(site) = sites.first() {
        if let Some(value) = site_value(donor, site) {
            return deep_inline(donor, value, &mut Vec::new());
        }
    }
    if let Some((_, value)) = donor.root_dict().iter().next() {
        return deep_inline(donor, value, &mut Vec::new());
    }
    PdfObject::Text(b"benign".to_vec())
}

/// Reads the value a site addresses, read-only.
pub(crate) fn site_value<'a>(graph: &'a ObjectGraph, site: &Site) -> Option<&'a PdfObject> {
    let mut cur = graph.objects().get(&site.holder)?;
    for step in &site.steps {
        cur = match (step, cur) {
            (SiteStep::Key(k), PdfObject::Dictionary(d)) => d.get(k)?,
            (SiteStep::Key(k), PdfObject::Stream(s)) => s.dict.get(k)?,
            (SiteStep::Elem(i), PdfObject::Array(a)) => a.get(*i)?,
            _ => return None,
        };
    }
    match cur {
        PdfObject::Dictionary(d) => d.get(&site.key),
        PdfObject::Stream(s) => s.dict.get(&site.key),
        _ => None,
    }
}

/// Deep copy with references resolved against the source graph; reference
/// cycles and dangling references become `Null`.
fn deep_inline(graph: &ObjectGraph, value: &PdfObject, visiting: &mut Vec<u32>) -> PdfObject {
    match value {
        PdfObject::Reference(r) => {
            if visiting.contains(&r.number) || !graph.objects().contains_key(&r.number) {
                return PdfObject::Null;
            }
            visiting.push(r.number);
            let out = deep_inline(graph, &graph.objects()[&r.number], visiting);
            visiting.pop();
            out
        }
        PdfObject::Array(items) => {
            PdfObject::Array(items.iter().map(|v| deep_inline(graph, v, visiting)).collect())
        }
        PdfObject::Dictionary(d) => PdfObject::Dictionary(
            d.iter().map(|(k, v)| (k.clone(), deep_inline(graph, v, visiting))).collect(),
        ),
        PdfObject::Stream(s) => PdfObject::Stream(crate::pdf::StreamObject {
            dict: s.dict.iter().map(|(k, v)| (k.clone(), deep_inline(graph, v, visiting))).collect(),
            data: s.data.clone(),
        }),
        other => other.clone(),
    }
}
