//! Corpus loading. A corpus directory holds documents as `.pdf` files or
//! `.json` interchange files; a document's identifier is its file stem,
//! and directories are processed in identifier order.

use std::path::{Path, PathBuf};

use conserva_core::pdf::{load_graph_json, parse_pdf, ObjectGraph};
use conserva_core::pipeline::SeedRecord;

use crate::error::CliError;

pub fn load_document(path: &Path) -> Result<ObjectGraph, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("pdf") => parse_pdf(&bytes)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display()))),
        Some("json") => {
            let text = String::from_utf8(bytes)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            load_graph_json(&text)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
        }
        _ => Err(CliError::data(format!(
            "{}: only .pdf and .json documents are supported",
            path.display()
        ))),
    }
}

/// Loads every document in a directory, sorted by identifier.
pub fn load_dir(dir: &Path) -> Result<Vec<SeedRecord>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("cannot list {}: {e}", dir.display())))?;
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    for entry in entries {
        let entry =
            entry.map_err(|e| CliError::data(format!("cannot list {}: {e}", dir.display())))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        match path.extension().and_then(|e| e.to_str()) {
            Some("pdf") | Some("json") => {}
            _ => continue,
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            return Err(CliError::data(format!(
                "{}: document file names must be valid unicode",
                path.display()
            )));
        };
        files.push((stem.to_string(), path));
    }
    files.sort();
    for pair in files.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(CliError::data(format!(
                "duplicate document id '{}' in {} (both .pdf and .json?)",
                pair[0].0,
                dir.display()
            )));
        }
    }
    let mut docs = Vec::with_capacity(files.len());
    for (id, path) in files {
        docs.push(SeedRecord { id, graph: load_document(&path)? });
    }
    Ok(docs)
}

/// Loads a corpus directory that must contain at least one document.
pub fn load_nonempty_dir(what: &str, dir: &Path) -> Result<Vec<SeedRecord>, CliError> {
    let docs = load_dir(dir)?;
    if docs.is_empty() {
        return Err(CliError::config(format!(
            "{what} directory contains no documents: {}",
            dir.display()
        )));
    }
    Ok(docs)
}
