//! Linear classification over binary feature vectors, feature-space evasion
//! attacks against such classifiers, and iterative adversarial retraining.
//!
//! Everything here is deterministic given the seeds in the parameter
//! structs: stochastic steps draw from ChaCha streams, never from OS
//! entropy.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureKind, FeatureSpace, FeatureVector};

/// Weights smaller than this in absolute value count as "not selected" when
/// reading a feature set off a trained model.
pub const SELECTION_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Malicious,
    Benign,
}

impl Label {
    /// Signed target for hinge loss: malicious is the positive class.
    pub fn sign(self) -> f64 {
        match self {
            Label::Malicious => 1.0,
            Label::Benign => -1.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("feature space mismatch: expected sha256 {expected}, got {got}")]
    SpaceMismatch { expected: String, got: String },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("unknown feature '{0}'")]
    UnknownFeature(String),
    #[error("model file rejected: {0}")]
    ModelFormat(String),
}

/// Penalty on the weight vector. `c` weighs the hinge loss against the
/// penalty; larger `c` fits the data harder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regularizer {
    L1 { c: f64 },
    L2 { c: f64 },
}

impl Regularizer {
    pub fn c(&self) -> f64 {
        match self {
            Regularizer::L1 { c } | Regularizer::L2 { c } => *c,
        }
    }
}

/// Stochastic-subgradient training knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub reg: Regularizer,
    pub epochs: usize,
    /// Initial step size; step `t` uses `eta0 / (1 + decay * t)`.
    pub eta0: f64,
    pub decay: f64,
    pub rng_seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            reg: Regularizer::L2 { c: 1.0 },
            epochs: 40,
            eta0: 0.5,
            decay: 0.02,
            rng_seed: 7,
        }
    }
}

/// Labeled rows aligned with one shared feature space.
#[derive(Debug, Clone)]
pub struct Dataset {
    space: Arc<FeatureSpace>,
    rows: Vec<Vec<bool>>,
    labels: Vec<Label>,
}

impl Dataset {
    pub fn new(space: Arc<FeatureSpace>) -> Self {
        Dataset { space, rows: Vec::new(), labels: Vec::new() }
    }

    pub fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn push(&mut self, x: &FeatureVector, label: Label) -> Result<(), LearnError> {
        check_space(&self.space, x.space())?;
        self.rows.push(x.bits().to_vec());
        self.labels.push(label);
        Ok(())
    }

    pub fn push_bits(&mut self, bits: Vec<bool>, label: Label) -> Result<(), LearnError> {
        if bits.len() != self.space.len() {
            return Err(LearnError::DegenerateData(format!(
                "row has {} bits, space has {}",
                bits.len(),
                self.space.len()
            )));
        }
        self.rows.push(bits);
        self.labels.push(label);
        Ok(())
    }

    /// Exact-duplicate check used when augmenting with attack variants.
    pub fn contains_row(&self, bits: &[bool]) -> bool {
        self.rows.iter().any(|r| r == bits)
    }
}

fn check_space(expected: &Arc<FeatureSpace>, got: &Arc<FeatureSpace>) -> Result<(), LearnError> {
    if Arc::ptr_eq(expected, got) || **expected == **got {
        Ok(())
    } else {
        Err(LearnError::SpaceMismatch {
            expected: expected.sha256_hex(),
            got: got.sha256_hex(),
        })
    }
}

/// A trained linear scorer: `f(x) = w·x + b`, malicious iff `f(x) >= 0`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    space: Arc<FeatureSpace>,
    weights: Vec<f64>,
    bias: f64,
    reg: Regularizer,
}

impl LinearModel {
    pub fn new(
        space: Arc<FeatureSpace>,
        weights: Vec<f64>,
        bias: f64,
        reg: Regularizer,
    ) -> Self {
        assert_eq!(space.len(), weights.len(), "weight length must match the space");
        LinearModel { space, weights, bias, reg }
    }

    pub fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn reg(&self) -> Regularizer {
        self.reg
    }

    pub fn score_bits(&self, bits: &[bool]) -> f64 {
        debug_assert_eq!(bits.len(), self.weights.len());
        let mut f = self.bias;
        for (w, &b) in self.weights.iter().zip(bits) {
            if b {
                f += w;
            }
        }
        f
    }

    pub fn score(&self, x: &FeatureVector) -> Result<f64, LearnError> {
        check_space(&self.space, x.space())?;
        Ok(self.score_bits(x.bits()))
    }

    pub fn classify(&self, x: &FeatureVector) -> Result<Label, LearnError> {
        Ok(if self.score(x)? >= 0.0 { Label::Malicious } else { Label::Benign })
    }

    /// Features with a weight of meaningful magnitude.
    pub fn selected_features(&self) -> BTreeSet<String> {
        self.space
            .names()
            .iter()
            .zip(&self.weights)
            .filter(|&(_n, w)| w.abs() > SELECTION_THRESHOLD).map(|(n, _w)| n.clone())
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            space_sha256: self.space.sha256_hex(),
            space_kind: self.space.kind(),
            weights: self.weights.clone(),
            bias: self.bias,
            reg: self.reg,
        };
        let mut text = serde_json::to_string_pretty(&file).expect("model encodes");
        text.push('\n');
        text
    }

    /// Rebinds a saved model to its feature space; the digest recorded at
    /// save time must match.
    pub fn from_json(text: &str, space: Arc<FeatureSpace>) -> Result<Self, LearnError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| LearnError::ModelFormat(e.to_string()))?;
        let sha = space.sha256_hex();
        if file.space_sha256 != sha {
            return Err(LearnError::SpaceMismatch { expected: file.space_sha256, got: sha });
        }
        if file.weights.len() != space.len() {
            return Err(LearnError::ModelFormat(format!(
                "{} weights for a {}-feature space",
                file.weights.len(),
                space.len()
            )));
        }
        if file.space_kind != space.kind() {
            return Err(LearnError::ModelFormat(format!(
                "model was trained on a {:?} space, given {:?}",
                file.space_kind,
                space.kind()
            )));
        }
        Ok(LinearModel { space, weights: file.weights, bias: file.bias, reg: file.reg })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    space_sha256: String,
    space_kind: FeatureKind,
    weights: Vec<f64>,
    bias: f64,
    reg: Regularizer,
}

/// Trains a linear classifier by per-sample stochastic subgradient descent
/// on `penalty(w) + c · mean hinge(y·f(x))`.
///
/// The L2 penalty shrinks weights multiplicatively each step; the L1
/// penalty is applied as a proximal soft-threshold, so unused weights reach
/// exactly zero. The bias is never penalized. Row order is reshuffled every
/// epoch from a ChaCha stream seeded by `rng_seed`.
pub fn train(data: &Dataset, params: &TrainParams) -> Result<LinearModel, LearnError> {
    if data.is_empty() {
        return Err(LearnError::DegenerateData("empty training set".into()));
    }
    let has_mal = data.labels.contains(&Label::Malicious);
    let has_ben = data.labels.contains(&Label::Benign);
    if !has_mal || !has_ben {
        return Err(LearnError::DegenerateData(
            "training set must contain both classes".into(),
        ));
    }

    let n = data.len();
    let dim = data.space.len();
    let c = params.reg.c();
    let mut w = vec![0.0f64; dim];
    let mut b = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t: u64 = 0;

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = params.eta0 / (1.0 + params.decay * t as f64);
            t += 1;
            let row = &data.rows[i];
            let y = data.labels[i].sign();
            let margin = y * {
                let mut f = b;
                for (wk, &bit) in w.iter().zip(row) {
                    if bit {
                        f += wk;
                    }
                }
                f
            };

            match params.reg {
                Regularizer::L2 { .. } => {
                    let shrink = 1.0 - eta;
                    for wk in &mut w {
                        *wk *= shrink;
                    }
                    if margin < 1.0 {
                        for (wk, &bit) in w.iter_mut().zip(row) {
                            if bit {
                                *wk += eta * c * y;
                            }
                        }
                        b += eta * c * y;
                    }
                }
                Regularizer::L1 { .. } => {
                    if margin < 1.0 {
                        for (wk, &bit) in w.iter_mut().zip(row) {
                            if bit {
                                *wk += eta * c * y;
                            }
                        }
                        b += eta * c * y;
                    }
                    for wk in &mut w {
                        let mag = (wk.abs() - eta).max(0.0);
                        *wk = wk.signum() * mag;
                    }
                }
            }
        }
    }

    Ok(LinearModel { space: data.space.clone(), weights: w, bias: b, reg: params.reg })
}

/// Number of coordinates on which two rows differ.
pub fn hamming(a: &[bool], b: &[bool]) -> usize {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Which evasion attack to run, with its knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackKind {
    /// Iterated steepest-descent single-bit flips on
    /// `Q(x') = f(x') + lambda · hamming(x, x')`, restarted with shuffled
    /// coordinate orders.
    CoordinateGreedy {
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
    /// Random flips at escalating density: draw `t` flips
    /// `ceil(t / max_draws · n)` distinct non-frozen coordinates of the
    /// original vector, stopping at the first evading draw or when the
    /// cumulative flip budget `epsilon` would be exceeded.
    SaltPepper {
        #[serde(default = "default_max_draws")]
        max_draws: usize,
        #[serde(default = "default_epsilon")]
        epsilon: usize,
    },
}

fn default_lambda() -> f64 {
    0.005
}
fn default_restarts() -> usize {
    8
}
fn default_max_draws() -> usize {
    10
}
fn default_epsilon() -> usize {
    1000
}

impl Default for AttackKind {
    fn default() -> Self {
        AttackKind::CoordinateGreedy { lambda: default_lambda(), restarts: default_restarts() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    #[serde(flatten)]
    pub kind: AttackKind,
    /// Feature names the attacker must leave untouched.
    #[serde(default)]
    pub frozen: BTreeSet<String>,
    #[serde(default)]
    pub rng_seed: u64,
}

/// What an attack produced for one input.
#[derive(Debug, Clone)]
pub struct AttackResult {
    pub variant: FeatureVector,
    /// Model score of the variant.
    pub score: f64,
    /// The attack's own objective at the variant (for the greedy attack,
    /// score plus the weighted flip cost; for random flipping, the score).
    pub objective: f64,
    /// Hamming distance from the original input.
    pub flips: usize,
    /// Whether the variant scores below the malicious threshold.
    pub evaded: bool,
}

fn frozen_indices(
    space: &FeatureSpace,
    frozen: &BTreeSet<String>,
) -> Result<Vec<bool>, LearnError> {
    let mut mask = vec![false; space.len()];
    for name in frozen {
        let i = space
            .index_of(name)
            .ok_or_else(|| LearnError::UnknownFeature(name.clone()))?;
        mask[i] = true;
    }
    Ok(mask)
}

/// Coordinate-greedy evasion: from the original point, repeatedly apply the
/// single bit flip that most decreases `Q(x') = f(x') + lambda·hamming`,
/// stopping at a local optimum; the search restarts with freshly shuffled
/// coordinate orders and keeps the best endpoint. The result never scores a
/// higher `Q` than the original input.
pub fn coordinate_greedy(
    model: &LinearModel,
    x: &FeatureVector,
    config: &AttackConfig,
) -> Result<AttackResult, LearnError> {
    let (lambda, restarts) = match config.kind {
        AttackKind::CoordinateGreedy { lambda, restarts } => (lambda, restarts),
        _ => (default_lambda(), default_restarts()),
    };
    check_space(&model.space, x.space())?;
    let mask = frozen_indices(&model.space, &config.frozen)?;
    let free: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
    let origin = x.bits().to_vec();

    let q_of = |bits: &[bool]| model.score_bits(bits) + lambda * hamming(&origin, bits) as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut best = origin.clone();
    let mut best_q = q_of(&origin);

    for _ in 0..restarts.max(1) {
        let mut order = free.clone();
        order.shuffle(&mut rng);
        let mut cur = origin.clone();
        let mut cur_q = q_of(&cur);
        loop {
            let mut chosen: Option<(usize, f64)> = None;
            for &k in &order {
                cur[k] = !cur[k];
                let q = q_of(&cur);
                cur[k] = !cur[k];
                if q < cur_q && chosen.is_none_or(|(_, qb)| q < qb) {
                    chosen = Some((k, q));
                }
            }
            match chosen {
                Some((k, q)) => {
                    cur[k] = !cur[k];
                    cur_q = q;
                }
                None => break,
            }
        }
        if cur_q < best_q {
            best = cur;
            best_q = cur_q;
        }
    }

    let score = model.score_bits(&best);
    let flips = hamming(&origin, &best);
    Ok(AttackResult {
        variant: FeatureVector::new(x.space().clone(), best),
        score,
        objective: best_q,
        flips,
        evaded: score < 0.0,
    })
}

/// Random-flip evasion at escalating density. Each draw flips a fresh set
/// of distinct non-frozen coordinates of the *original* vector; draw `t` of
/// `max_draws` flips `ceil(t/max_draws · n)` of the `n` non-frozen
/// coordinates. The first evading draw wins; otherwise the best-scoring
/// draw within the cumulative flip budget `epsilon` is returned. A zero
/// budget (or a fully frozen space) returns the input unchanged.
pub fn salt_pepper(
    model: &LinearModel,
    x: &FeatureVector,
    config: &AttackConfig,
) -> Result<AttackResult, LearnError> {
    let (max_draws, epsilon) = match config.kind {
        AttackKind::SaltPepper { max_draws, epsilon } => (max_draws, epsilon),
        _ => (default_max_draws(), default_epsilon()),
    };
    check_space(&model.space, x.space())?;
    let mask = frozen_indices(&model.space, &config.frozen)?;
    let free: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
    let origin = x.bits().to_vec();

    let finish = |bits: Vec<bool>| {
        let score = model.score_bits(&bits);
        let flips = hamming(&origin, &bits);
        AttackResult {
            variant: FeatureVector::new(x.space().clone(), bits),
            score,
            objective: score,
            flips,
            evaded: score < 0.0,
        }
    };

    if free.is_empty() || epsilon == 0 || max_draws == 0 {
        return Ok(finish(origin.clone()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let n = free.len();
    let mut spent = 0usize;
    let mut best = origin.clone();
    let mut best_score = model.score_bits(&origin);

    for t in 1..=max_draws {
        let k = (t * n).div_ceil(max_draws).min(n);
        if spent + k > epsilon {
            break;
        }
        spent += k;
        let picks = rand::seq::index::sample(&mut rng, n, k);
        let mut bits = origin.clone();
        for p in picks.iter() {
            let i = free[p];
            bits[i] = !bits[i];
        }
        let score = model.score_bits(&bits);
        if score < 0.0 {
            return Ok(finish(bits));
        }
        if score < best_score {
            best = bits;
            best_score = score;
        }
    }
    Ok(finish(best))
}

/// Dispatches on the configured attack kind.
pub fn run_attack(
    model: &LinearModel,
    x: &FeatureVector,
    config: &AttackConfig,
) -> Result<AttackResult, LearnError> {
    match config.kind {
        AttackKind::CoordinateGreedy { .. } => coordinate_greedy(model, x, config),
        AttackKind::SaltPepper { .. } => salt_pepper(model, x, config),
    }
}

/// Produces one attack variant per attack seed. Implementations must be
/// deterministic in `(model, seed_index, x)`.
pub trait VariantGenerator {
    fn generate(
        &self,
        model: &LinearModel,
        seed_index: usize,
        x: &FeatureVector,
    ) -> Result<AttackResult, LearnError>;
}

/// The standard generator: runs the configured attack, giving each seed its
/// own RNG stream (`rng_seed + seed_index`).
pub struct ConfiguredAttack {
    pub config: AttackConfig,
}

impl VariantGenerator for ConfiguredAttack {
    fn generate(
        &self,
        model: &LinearModel,
        seed_index: usize,
        x: &FeatureVector,
    ) -> Result<AttackResult, LearnError> {
        let mut config = self.config.clone();
        config.rng_seed = self.config.rng_seed.wrapping_add(seed_index as u64);
        run_attack(model, x, &config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrainParams {
    pub max_iterations: usize,
    /// Stop early once an iteration adds no new rows.
    pub stop_when_no_new: bool,
}

impl Default for RetrainParams {
    fn default() -> Self {
        RetrainParams { max_iterations: 10, stop_when_no_new: true }
    }
}

/// One retraining round, in deterministic counters only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// Variants produced this round (one per attack seed).
    pub generated: usize,
    /// How many of them evaded the round's starting model.
    pub evaded: usize,
    /// New (non-duplicate) rows added to the training set.
    pub added: usize,
    pub dataset_size: usize,
}

#[derive(Debug)]
pub struct RetrainOutcome {
    pub model: LinearModel,
    pub iterations: Vec<IterationLog>,
    pub final_dataset_size: usize,
}

/// Iterative adversarial retraining: attack the current model with every
/// seed, add the variants to the training set labeled malicious (exact
/// duplicates filtered), retrain, repeat. `max_iterations == 0` returns the
/// base model untouched.
pub fn retrain_iterative(
    base: &Dataset,
    attack_seeds: &[FeatureVector],
    generator: &dyn VariantGenerator,
    train_params: &TrainParams,
    retrain_params: &RetrainParams,
) -> Result<RetrainOutcome, LearnError> {
    let mut model = train(base, train_params)?;
    let mut iterations = Vec::new();
    if retrain_params.max_iterations == 0 {
        let final_dataset_size = base.len();
        return Ok(RetrainOutcome { model, iterations, final_dataset_size });
    }

    let mut data = base.clone();
    for iteration in 1..=retrain_params.max_iterations {
        let mut evaded = 0usize;
        let mut added = 0usize;
        for (i, seed) in attack_seeds.iter().enumerate() {
            let result = generator.generate(&model, i, seed)?;
            if result.evaded {
                evaded += 1;
            }
            if !data.contains_row(result.variant.bits()) {
                data.push_bits(result.variant.bits().to_vec(), Label::Malicious)?;
                added += 1;
            }
        }
        iterations.push(IterationLog {
            iteration,
            generated: attack_seeds.len(),
            evaded,
            added,
            dataset_size: data.len(),
        });
        if added > 0 {
            model = train(&data, train_params)?;
        }
        if retrain_params.stop_when_no_new && added == 0 {
            break;
        }
    }
    let final_dataset_size = data.len();
    Ok(RetrainOutcome { model, iterations, final_dataset_size })
}

/// How a fixed model holds up against the attack across a set of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub total: usize,
    pub evaded: usize,
    pub evasion_rate: f64,
    /// Mean flip count over the evading variants; absent when none evade.
    pub mean_flips: Option<f64>,
}

pub fn evasion_robustness(
    model: &LinearModel,
    attack_seeds: &[FeatureVector],
    generator: &dyn VariantGenerator,
) -> Result<RobustnessReport, LearnError> {
    let mut evaded = 0usize;
    let mut flips = 0usize;
    for (i, seed) in attack_seeds.iter().enumerate() {
        let result = generator.generate(model, i, seed)?;
        if result.evaded {
            evaded += 1;
            flips += result.flips;
        }
    }
    let total = attack_seeds.len();
    Ok(RobustnessReport {
        total,
        evaded,
        evasion_rate: if total == 0 { 0.0 } else { evaded as f64 / total as f64 },
        mean_flips: (evaded > 0).then(|| flips as f64 / evaded as f64),
    })
}

/// Area under the ROC curve by threshold sweep with trapezoids; ties in
/// score are handled by grouping, which matches the pairwise-concordance
/// definition (ties count one half).
pub fn roc_auc(scored: &[(f64, Label)]) -> Result<f64, LearnError> {
    let pos = scored.iter().filter(|(_, l)| *l == Label::Malicious).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(LearnError::DegenerateData(
            "AUC needs both classes in the scored set".into(),
        ));
    }
    let mut sorted: Vec<&(f64, Label)> = scored.iter().collect();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores must not be NaN"));

    let mut area = 0.0f64;
    let (mut tp, mut fp) = (0u64, 0u64);
    let (mut tp_prev, mut fp_prev) = (0u64, 0u64);
    let mut last_score: Option<f64> = None;
    for (score, label) in sorted {
        if last_score != Some(*score) {
            area += trapezoid(fp_prev, fp, tp_prev, tp);
            last_score = Some(*score);
            tp_prev = tp;
            fp_prev = fp;
        }
        match label {
            Label::Malicious => tp += 1,
            Label::Benign => fp += 1,
        }
    }
    area += trapezoid(fp_prev, fp, tp_prev, tp);
    Ok(area / (pos as f64 * neg as f64))
}

fn trapezoid(x0: u64, x1: u64, y0: u64, y1: u64) -> f64 {
    (x1 - x0) as f64 * (y0 + y1) as f64 / 2.0
}

/// Accuracy, AUC and the confusion counts of a model on labeled data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub auc: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

pub fn evaluate_model(model: &LinearModel, data: &Dataset) -> Result<EvalReport, LearnError> {
    check_space(&model.space, &data.space)?;
    if data.is_empty() {
        return Err(LearnError::DegenerateData("empty evaluation set".into()));
    }
    let mut scored = Vec::with_capacity(data.len());
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (row, label) in data.rows.iter().zip(&data.labels) {
        let score = model.score_bits(row);
        scored.push((score, *label));
        let predicted_malicious = score >= 0.0;
        match (predicted_malicious, label) {
            (true, Label::Malicious) => tp += 1,
            (true, Label::Benign) => fp += 1,
            (false, Label::Benign) => tn += 1,
            (false, Label::Malicious) => fn_ += 1,
        }
    }
    let auc = roc_auc(&scored)?;
    Ok(EvalReport {
        accuracy: (tp + tn) as f64 / data.len() as f64,
        auc,
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
    })
}

/// What an L1 sweep is looking for on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SweepMode {
    /// First grid point selecting exactly this many features.
    MatchCount { target: usize },
    /// First grid point whose selected set covers these names.
    CoverSet { target: BTreeSet<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub c: f64,
    pub selected_count: usize,
    pub selected: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Index into `points` of the first grid point satisfying the mode;
    /// `None` when the whole grid misses the target.
    pub hit: Option<usize>,
}

/// Trains an L1 model at every `c` on the grid (in the order given) and
/// reports each point's selected features. The full grid is always trained,
/// even after a hit.
pub fn l1_sweep(
    data: &Dataset,
    base: &TrainParams,
    grid: &[f64],
    mode: &SweepMode,
) -> Result<SweepResult, LearnError> {
    let mut points = Vec::with_capacity(grid.len());
    let mut hit = None;
    for (i, &c) in grid.iter().enumerate() {
        let params = TrainParams { reg: Regularizer::L1 { c }, ..*base };
        let model = train(data, &params)?;
        let selected = model.selected_features();
        let satisfied = match mode {
            SweepMode::MatchCount { target } => selected.len() == *target,
            SweepMode::CoverSet { target } => target.is_subset(&selected),
        };
        if satisfied && hit.is_none() {
            hit = Some(i);
        }
        points.push(SweepPoint { c, selected_count: selected.len(), selected });
    }
    Ok(SweepResult { points, hit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;

    fn space(names: &[&str]) -> Arc<FeatureSpace> {
        Arc::new(FeatureSpace::new(
            FeatureKind::Sl2013,
            names.iter().map(|s| s.to_string()),
        ))
    }

    fn vector(space: &Arc<FeatureSpace>, bits: &[bool]) -> FeatureVector {
        FeatureVector::new(space.clone(), bits.to_vec())
    }

    /// Independent AUC oracle: pairwise concordance with half-credit ties.
    fn auc_by_pairs(scored: &[(f64, Label)]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (sm, lm) in scored {
            if *lm != Label::Malicious {
                continue;
            }
            for (sb, lb) in scored {
                if *lb != Label::Benign {
                    continue;
                }
                den += 1.0;
                if sm > sb {
                    num += 1.0;
                } else if sm == sb {
                    num += 0.5;
                }
            }
        }
        num / den
    }

    /// Independent attack-objective oracle: exhaustive minimum of Q over
    /// every assignment of the non-frozen coordinates.
    fn exhaustive_min_q(
        model: &LinearModel,
        origin: &[bool],
        frozen: &[usize],
        lambda: f64,
    ) -> f64 {
        let n = origin.len();
        let free: Vec<usize> = (0..n).filter(|i| !frozen.contains(i)).collect();
        let mut best = f64::INFINITY;
        for mask in 0..(1u32 << free.len()) {
            let mut bits = origin.to_vec();
            for (j, &i) in free.iter().enumerate() {
                bits[i] = (mask >> j) & 1 == 1;
            }
            let q = model.score_bits(&bits) + lambda * hamming(origin, &bits) as f64;
            if q < best {
                best = q;
            }
        }
        best
    }

    fn toy_model(space: &Arc<FeatureSpace>, weights: &[f64], bias: f64) -> LinearModel {
        LinearModel::new(
            space.clone(),
            weights.to_vec(),
            bias,
            Regularizer::L2 { c: 1.0 },
        )
    }

    #[test]
    fn greedy_attack_finds_the_exhaustive_optimum_on_a_small_instance() {
        let sp = space(&["/a", "/b", "/c"]);
        let model = toy_model(&sp, &[2.0, -1.0, 0.5], 0.0);
        let x = vector(&sp, &[true, false, true]);
        let config = AttackConfig {
            kind: AttackKind::CoordinateGreedy { lambda: 0.005, restarts: 4 },
            frozen: BTreeSet::new(),
            rng_seed: 11,
        };
        let got = coordinate_greedy(&model, &x, &config).unwrap();
        let want = exhaustive_min_q(&model, x.bits(), &[], 0.005);
        assert!((got.objective - want).abs() < 1e-12, "{} vs {want}", got.objective);
        assert_eq!(got.variant.bits(), &[false, true, false]);
        assert!((got.objective - (-0.985)).abs() < 1e-12);
        assert!(got.evaded);
        assert_eq!(got.flips, 3);
    }

    #[test]
    fn greedy_attack_respects_frozen_features() {
        let sp = space(&["/a", "/b", "/c"]);
        let model = toy_model(&sp, &[2.0, -1.0, 0.5], 0.0);
        let x = vector(&sp, &[true, false, true]);
        let config = AttackConfig {
            kind: AttackKind::CoordinateGreedy { lambda: 0.005, restarts: 4 },
            frozen: ["/a".to_string()].into_iter().collect(),
            rng_seed: 11,
        };
        let got = coordinate_greedy(&model, &x, &config).unwrap();
        let want = exhaustive_min_q(&model, x.bits(), &[0], 0.005);
        assert!((got.objective - want).abs() < 1e-12);
        assert_eq!(got.variant.bits(), &[true, true, false]);
        assert!((got.objective - 1.01).abs() < 1e-12);
        assert!(!got.evaded, "the frozen feature keeps the score positive");

        let bad = AttackConfig {
            frozen: ["/missing".to_string()].into_iter().collect(),
            ..config
        };
        assert!(matches!(
            coordinate_greedy(&model, &x, &bad),
            Err(LearnError::UnknownFeature(n)) if n == "/missing"
        ));
    }

    #[test]
    fn greedy_attack_never_worsens_the_objective_and_ends_locally_optimal() {
        let sp = space(&["/a", "/b", "/c", "/d", "/e", "/f", "/g", "/h"]);
        let weights = [1.5, -2.0, 0.25, 0.75, -0.5, 3.0, -0.125, 0.0625];
        let model = toy_model(&sp, &weights, 0.5);
        let origin = [true, false, true, true, false, true, false, true];
        let x = vector(&sp, &origin);
        let lambda = 0.005;
        for seed in 0..6u64 {
            let config = AttackConfig {
                kind: AttackKind::CoordinateGreedy { lambda, restarts: 3 },
                frozen: BTreeSet::new(),
                rng_seed: seed,
            };
            let got = coordinate_greedy(&model, &x, &config).unwrap();
            let q_origin = model.score_bits(&origin);
            assert!(got.objective <= q_origin + 1e-12);
            // Local optimality: no single flip improves the endpoint.
            let q_of = |bits: &[bool]| {
                model.score_bits(bits) + lambda * hamming(&origin, bits) as f64
            };
            let mut bits = got.variant.bits().to_vec();
            for k in 0..bits.len() {
                bits[k] = !bits[k];
                assert!(q_of(&bits) >= got.objective - 1e-12);
                bits[k] = !bits[k];
            }
        }
    }

    #[test]
    fn random_flip_attack_honors_the_budget_and_freezing() {
        let sp = space(&["/a", "/b", "/c", "/d", "/e", "/f"]);
        // Only flipping everything off evades: each feature carries weight
        // against a positive bias.
        let model = toy_model(&sp, &[-0.5; 6], 1.0);
        let x = vector(&sp, &[false; 6]);

        // Zero budget: unchanged.
        let zero = AttackConfig {
            kind: AttackKind::SaltPepper { max_draws: 4, epsilon: 0 },
            frozen: BTreeSet::new(),
            rng_seed: 1,
        };
        let got = salt_pepper(&model, &x, &zero).unwrap();
        assert_eq!(got.variant.bits(), x.bits());
        assert_eq!(got.flips, 0);
        assert!(!got.evaded);

        // Fully frozen: unchanged.
        let frozen_all = AttackConfig {
            kind: AttackKind::SaltPepper { max_draws: 4, epsilon: 1000 },
            frozen: sp.names().iter().cloned().collect(),
            rng_seed: 1,
        };
        let got = salt_pepper(&model, &x, &frozen_all).unwrap();
        assert_eq!(got.variant.bits(), x.bits());

        // Generous budget: the last draw flips every coordinate, which
        // scores 1.0 - 3.0 < 0, so the attack must evade.
        let full = AttackConfig {
            kind: AttackKind::SaltPepper { max_draws: 4, epsilon: 1000 },
            frozen: BTreeSet::new(),
            rng_seed: 1,
        };
        let got = salt_pepper(&model, &x, &full).unwrap();
        assert!(got.evaded);
        assert!(got.score < 0.0);

        // Tight budget: draw 1 flips ceil(6/4) = 2 coordinates and spends
        // the whole budget, so the result differs in at most 2 places.
        let tight = AttackConfig {
            kind: AttackKind::SaltPepper { max_draws: 4, epsilon: 3 },
            frozen: BTreeSet::new(),
            rng_seed: 1,
        };
        let got = salt_pepper(&model, &x, &tight).unwrap();
        assert!(got.flips <= 2, "spent {} flips on a 3-flip budget", got.flips);
    }

    #[test]
    fn auc_matches_the_pairwise_oracle() {
        let hand = [
            (0.9, Label::Malicious),
            (0.7, Label::Malicious),
            (0.8, Label::Benign),
            (0.1, Label::Benign),
        ];
        assert!((roc_auc(&hand).unwrap() - 0.75).abs() < 1e-12);
        assert!((auc_by_pairs(&hand) - 0.75).abs() < 1e-12);

        // A larger deterministic set with ties on both sides.
        let mut scored = Vec::new();
        for i in 0..40usize {
            let label = if i % 3 == 0 { Label::Benign } else { Label::Malicious };
            let score = ((i * 7919) % 13) as f64 / 13.0;
            scored.push((score, label));
        }
        let got = roc_auc(&scored).unwrap();
        let want = auc_by_pairs(&scored);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");

        assert!(matches!(
            roc_auc(&[(0.5, Label::Malicious)]),
            Err(LearnError::DegenerateData(_))
        ));
    }

    fn separable_dataset(sp: &Arc<FeatureSpace>) -> Dataset {
        // Feature 0 marks malicious rows, feature 1 marks benign rows;
        // features 2.. carry no signal (on for half of each class).
        let mut data = Dataset::new(sp.clone());
        let dim = sp.len();
        for i in 0..8usize {
            let mut bits = vec![false; dim];
            bits[0] = true;
            for (k, b) in bits.iter_mut().enumerate().skip(2) {
                *b = (i + k) % 2 == 0;
            }
            data.push_bits(bits, Label::Malicious).unwrap();
            let mut bits = vec![false; dim];
            bits[1] = true;
            for (k, b) in bits.iter_mut().enumerate().skip(2) {
                *b = (i + k) % 2 == 1;
            }
            data.push_bits(bits, Label::Benign).unwrap();
        }
        data
    }

    #[test]
    fn training_separates_separable_data_and_rejects_degenerate_sets() {
        let sp = space(&["/mal", "/ben", "/n1", "/n2"]);
        let data = separable_dataset(&sp);
        let model = train(&data, &TrainParams::default()).unwrap();
        let report = evaluate_model(&model, &data).unwrap();
        assert_eq!(report.accuracy, 1.0, "separable data must be fit exactly");
        assert_eq!(report.auc, 1.0);

        let empty = Dataset::new(sp.clone());
        assert!(matches!(train(&empty, &TrainParams::default()), Err(LearnError::DegenerateData(_))));

        let mut single = Dataset::new(sp.clone());
        single.push_bits(vec![true, false, false, false], Label::Malicious).unwrap();
        assert!(matches!(train(&single, &TrainParams::default()), Err(LearnError::DegenerateData(_))));
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let sp = space(&["/mal", "/ben", "/n1", "/n2"]);
        let data = separable_dataset(&sp);
        let a = train(&data, &TrainParams::default()).unwrap();
        let b = train(&data, &TrainParams::default()).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.bias(), b.bias());
        let c = train(&data, &TrainParams { rng_seed: 8, ..Default::default() }).unwrap();
        // A different shuffle stream is allowed to land elsewhere; both
        // must still classify perfectly.
        assert_eq!(evaluate_model(&c, &data).unwrap().accuracy, 1.0);
    }

    #[test]
    fn l1_zeroes_noise_features_that_l2_keeps() {
        let sp = space(&["/mal", "/ben", "/n1", "/n2", "/n3", "/n4"]);
        let data = separable_dataset(&sp);
        // The proximal drain removes eta per step while data pushes add
        // eta*c on the rows a feature is active in, so the loss weight must
        // be comfortably above 2 for signal carried by half the rows to
        // survive at all.
        let l2 = train(
            &data,
            &TrainParams { reg: Regularizer::L2 { c: 4.0 }, ..Default::default() },
        )
        .unwrap();
        let l1 = train(
            &data,
            &TrainParams { reg: Regularizer::L1 { c: 4.0 }, ..Default::default() },
        )
        .unwrap();
        let l1_sel = l1.selected_features();
        let l2_sel = l2.selected_features();
        assert!(l1_sel.contains("/mal"), "signal feature survives L1: {l1_sel:?}");
        assert!(l2_sel.contains("/mal"));
        assert!(l1_sel.len() <= l2_sel.len());
        // The proximal step produces exact zeros, not merely small weights.
        assert!(l1.weights().contains(&0.0));
    }

    #[test]
    fn model_files_round_trip_and_pin_their_space() {
        let sp = space(&["/mal", "/ben", "/n1", "/n2"]);
        let data = separable_dataset(&sp);
        let model = train(&data, &TrainParams::default()).unwrap();
        let text = model.to_json();
        let back = LinearModel::from_json(&text, sp.clone()).unwrap();
        assert_eq!(back.weights(), model.weights());
        assert_eq!(back.bias(), model.bias());

        let other = space(&["/different"]);
        assert!(matches!(
            LinearModel::from_json(&text, other),
            Err(LearnError::SpaceMismatch { .. })
        ));
    }

    #[test]
    fn sweep_reports_the_first_satisfying_grid_point() {
        let sp = space(&["/mal", "/ben", "/n1", "/n2"]);
        let data = separable_dataset(&sp);
        let base = TrainParams::default();
        let grid = [0.5, 4.0, 16.0];

        let by_count = l1_sweep(&data, &base, &grid, &SweepMode::MatchCount { target: 2 }).unwrap();
        assert_eq!(by_count.points.len(), 3, "the full grid is always trained");
        let hit = by_count.hit.expect("some grid point selects exactly the two class markers");
        assert_eq!(by_count.points[hit].selected_count, 2);
        assert_eq!(
            by_count.points[hit].selected,
            ["/mal".to_string(), "/ben".to_string()].into_iter().collect(),
        );

        let cover = SweepMode::CoverSet {
            target: ["/mal".to_string()].into_iter().collect(),
        };
        let by_cover = l1_sweep(&data, &base, &grid, &cover).unwrap();
        let hit = by_cover.hit.expect("some grid point selects the signal feature");
        assert!(by_cover.points[hit].selected.contains("/mal"));

        let unreachable = l1_sweep(
            &data,
            &base,
            &grid,
            &SweepMode::MatchCount { target: sp.len() + 1 },
        )
        .unwrap();
        assert_eq!(unreachable.hit, None);
    }

    /// A generator that returns the input unchanged: the degenerate
    /// "attack" that never finds anything new.
    struct IdentityAttack;
    impl VariantGenerator for IdentityAttack {
        fn generate(
            &self,
            model: &LinearModel,
            _seed_index: usize,
            x: &FeatureVector,
        ) -> Result<AttackResult, LearnError> {
            let score = model.score(x)?;
            Ok(AttackResult {
                variant: x.clone(),
                score,
                objective: score,
                flips: 0,
                evaded: score < 0.0,
            })
        }
    }

    #[test]
    fn retraining_degenerate_cases_leave_the_base_model_alone() {
        let sp = space(&["/mal", "/ben", "/n1", "/n2"]);
        let data = separable_dataset(&sp);
        let params = TrainParams::default();
        let base_model = train(&data, &params).unwrap();
        let seeds: Vec<FeatureVector> = data
            .rows()
            .iter()
            .zip(data.labels())
            .filter(|(_, l)| **l == Label::Malicious)
            .map(|(r, _)| FeatureVector::new(sp.clone(), r.clone()))
            .collect();

        // Zero iterations: the base model, verbatim, no logs.
        let out = retrain_iterative(
            &data,
            &seeds,
            &IdentityAttack,
            &params,
            &RetrainParams { max_iterations: 0, stop_when_no_new: true },
        )
        .unwrap();
        assert_eq!(out.model.weights(), base_model.weights());
        assert_eq!(out.model.bias(), base_model.bias());
        assert!(out.iterations.is_empty());
        assert_eq!(out.final_dataset_size, data.len());

        // An attack that produces nothing new: one logged iteration, no
        // additions, model unchanged.
        let out = retrain_iterative(
            &data,
            &seeds,
            &IdentityAttack,
            &params,
            &RetrainParams { max_iterations: 5, stop_when_no_new: true },
        )
        .unwrap();
        assert_eq!(out.iterations.len(), 1);
        assert_eq!(out.iterations[0].added, 0);
        assert_eq!(out.model.weights(), base_model.weights());
        assert_eq!(out.final_dataset_size, data.len());
    }

    #[test]
    fn retraining_absorbs_attack_variants() {
        let sp = space(&["/mal", "/ben", "/n1", "/n2"]);
        let data = separable_dataset(&sp);
        let params = TrainParams::default();
        let seeds: Vec<FeatureVector> = data
            .rows()
            .iter()
            .zip(data.labels())
            .filter(|(_, l)| **l == Label::Malicious)
            .map(|(r, _)| FeatureVector::new(sp.clone(), r.clone()))
            .collect();
        let generator = ConfiguredAttack {
            config: AttackConfig {
                kind: AttackKind::CoordinateGreedy { lambda: 0.005, restarts: 4 },
                frozen: BTreeSet::new(),
                rng_seed: 3,
            },
        };
        let out = retrain_iterative(
            &data,
            &seeds,
            &generator,
            &params,
            &RetrainParams { max_iterations: 6, stop_when_no_new: true },
        )
        .unwrap();
        assert!(!out.iterations.is_empty());
        assert!(out.final_dataset_size > data.len(), "the attack found variants to absorb");
        // Runs are reproducible end to end.
        let again = retrain_iterative(
            &data,
            &seeds,
            &generator,
            &params,
            &RetrainParams { max_iterations: 6, stop_when_no_new: true },
        )
        .unwrap();
        assert_eq!(out.model.weights(), again.model.weights());
        assert_eq!(out.iterations, again.iterations);
    }

    #[test]
    fn robustness_report_counts_evasions() {
        let sp = space(&["/a", "/b", "/c"]);
        let model = toy_model(&sp, &[2.0, -1.0, 0.5], 0.0);
        let seeds = vec![
            vector(&sp, &[true, false, true]),
            vector(&sp, &[true, false, false]),
        ];
        let generator = ConfiguredAttack {
            config: AttackConfig {
                kind: AttackKind::CoordinateGreedy { lambda: 0.005, restarts: 4 },
                frozen: BTreeSet::new(),
                rng_seed: 5,
            },
        };
        let report = evasion_robustness(&model, &seeds, &generator).unwrap();
        assert_eq!(report.total, 2);
        assert_eq!(report.evaded, 2, "nothing is frozen, so both seeds escape");
        assert_eq!(report.evasion_rate, 1.0);
        assert!(report.mean_flips.is_some());

        let frozen: BTreeSet<String> = sp.names().iter().cloned().collect();
        let pinned = ConfiguredAttack {
            config: AttackConfig {
                kind: AttackKind::CoordinateGreedy { lambda: 0.005, restarts: 4 },
                frozen,
                rng_seed: 5,
            },
        };
        let report = evasion_robustness(&model, &seeds, &pinned).unwrap();
        assert_eq!(report.evaded, 0, "freezing every feature pins every seed");
        assert_eq!(report.mean_flips, None);
    }
}
