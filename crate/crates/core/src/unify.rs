//! Cross-language representation metrics and selection heuristics.
//!
//! The central quantity is the unification score: for each fact that has
//! training statements in both languages, the mean cosine between its
//! language-0 and language-1 representations, normalized by a within-language
//! baseline and averaged over facts. The module also fits feature footprints
//! (variance explained by a categorical labeling), trains a linear language
//! probe, correlates metrics with held-out accuracy across runs, and applies
//! the model/checkpoint selection rules built from these signals.

use std::collections::{BTreeMap, HashSet};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Casing, Variant};
use crate::reprlab::{ReprMeta, ReprSet};
use crate::rng::{child_seed_indexed, rng_from};
use crate::stats::pearson;
use crate::{Error, Result};

/// Row indices of one fact's parallel examples, split by language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactGroup {
    pub fact_id: u32,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

/// Denominator convention for the unification score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Within-language similarity of the same fact (singletons fall back to
    /// a baseline of 1).
    SameFact,
    /// Within-language similarity against other facts' rows.
    DistinctFact,
}

/// Group a representation set's rows by fact, keeping facts that carry both
/// languages. An empty result is an error by contract: with no parallel
/// facts (celebrity fraction zero) the score is undefined and callers must
/// branch on it.
pub fn fact_groups(set: &ReprSet) -> Result<Vec<FactGroup>> {
    let mut by_fact: BTreeMap<u32, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, m) in set.meta.iter().enumerate() {
        let entry = by_fact.entry(m.fact_id).or_default();
        if m.lang == 0 {
            entry.0.push(i);
        } else {
            entry.1.push(i);
        }
    }
    let groups: Vec<FactGroup> = by_fact
        .into_iter()
        .filter(|(_, (x, y))| !x.is_empty() && !y.is_empty())
        .map(|(fact_id, (x, y))| FactGroup { fact_id, x, y })
        .collect();
    if groups.is_empty() {
        return Err(Error::Degenerate(
            "no fact has parallel examples in both languages; \
             the unification score is undefined on this set"
                .into(),
        ));
    }
    Ok(groups)
}

fn unit_rows(set: &ReprSet) -> Result<Array2<f64>> {
    let mut unit = set.rows.clone();
    for (i, mut row) in unit.rows_mut().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Degenerate(format!(
                "zero-norm representation for fact {} (row {i})",
                set.meta[i].fact_id
            )));
        }
        row /= norm;
    }
    Ok(unit)
}

fn mean_cos(unit: &Array2<f64>, a: &[usize], b: &[usize]) -> f64 {
    let mut sum = 0.0;
    for &i in a {
        for &j in b {
            sum += unit.row(i).dot(&unit.row(j));
        }
    }
    sum / (a.len() * b.len()) as f64
}

/// Mean cosine over distinct pairs within `ids`; singletons fall back to 1.
fn within_cos(unit: &Array2<f64>, ids: &[usize]) -> f64 {
    if ids.len() < 2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for a in 0..ids.len() {
        for b in a + 1..ids.len() {
            sum += unit.row(ids[a]).dot(&unit.row(ids[b]));
            n += 1;
        }
    }
    sum / n as f64
}

/// The unification score of a parallel representation set.
///
/// Per fact, the numerator is the mean cosine over all cross-language pairs.
/// The denominator is within-language similarity under the chosen baseline,
/// averaged over the two languages so the score is invariant to swapping
/// language labels: same-fact uses the fact's own rows, distinct-fact uses
/// the mean cosine against the same-language rows of all other facts in the
/// set. The score is the mean over facts of numerator / denominator.
pub fn unification_score(set: &ReprSet, baseline: Baseline) -> Result<f64> {
    let groups = fact_groups(set)?;
    let unit = unit_rows(set)?;
    let mut total = 0.0;
    for g in &groups {
        let numerator = mean_cos(&unit, &g.x, &g.y);
        let denominator = match baseline {
            Baseline::SameFact => (within_cos(&unit, &g.x) + within_cos(&unit, &g.y)) / 2.0,
            Baseline::DistinctFact => {
                let mut others = (Vec::new(), Vec::new());
                for o in &groups {
                    if o.fact_id != g.fact_id {
                        others.0.extend(o.x.iter().copied());
                        others.1.extend(o.y.iter().copied());
                    }
                }
                if others.0.is_empty() || others.1.is_empty() {
                    return Err(Error::Degenerate(
                        "distinct-fact baseline needs at least two facts".into(),
                    ));
                }
                (mean_cos(&unit, &g.x, &others.0) + mean_cos(&unit, &g.y, &others.1)) / 2.0
            }
        };
        if denominator == 0.0 {
            return Err(Error::Degenerate(format!(
                "zero baseline similarity for fact {}",
                g.fact_id
            )));
        }
        total += numerator / denominator;
    }
    let score = total / groups.len() as f64;
    if !score.is_finite() {
        return Err(Error::Degenerate("unification score is not finite".into()));
    }
    Ok(score)
}

/// Variance in a representation matrix explained by a categorical labeling:
/// R-squared of the group-means fit, pooled over all dimensions. Zero total
/// variance yields 0 by convention.
pub fn feature_footprint_r2(rows: &Array2<f64>, labels: &[u64]) -> Result<f64> {
    let n = rows.nrows();
    if labels.len() != n {
        return Err(Error::Input(format!(
            "{n} rows but {} labels",
            labels.len()
        )));
    }
    let distinct: HashSet<u64> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::Degenerate(
            "feature footprint needs at least two distinct labels".into(),
        ));
    }
    let global = rows.mean_axis(ndarray::Axis(0)).unwrap();
    let mut sums: BTreeMap<u64, (Array1<f64>, usize)> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        let entry = sums
            .entry(l)
            .or_insert_with(|| (Array1::zeros(rows.ncols()), 0));
        entry.0 += &rows.row(i);
        entry.1 += 1;
    }
    let means: BTreeMap<u64, Array1<f64>> = sums
        .into_iter()
        .map(|(l, (s, c))| (l, s / c as f64))
        .collect();
    let mut ss_tot = 0.0;
    let mut ss_res = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        let row = rows.row(i);
        let dt = &row - &global;
        ss_tot += dt.dot(&dt);
        let dr = &row - &means[&l];
        ss_res += dr.dot(&dr);
    }
    if ss_tot == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - ss_res / ss_tot).clamp(0.0, 1.0))
}

/// Language labels (0/1) for footprint fits.
pub fn language_labels(meta: &[ReprMeta]) -> Vec<u64> {
    meta.iter().map(|m| m.lang as u64).collect()
}

/// Fact-identity labels: the combination of subject entity and fact type.
pub fn fact_labels(meta: &[ReprMeta]) -> Vec<u64> {
    meta.iter()
        .map(|m| {
            let ft = crate::kg::FactType::ALL
                .iter()
                .position(|f| *f == m.fact_type)
                .unwrap() as u64;
            m.entity as u64 * 4 + ft
        })
        .collect()
}

/// Solve (A + lambda I) w = b for symmetric positive definite A in place.
fn solve_ridge(mut a: Array2<f64>, b: Array1<f64>, lambda: f64) -> Result<Array1<f64>> {
    let n = a.nrows();
    for i in 0..n {
        a[[i, i]] += lambda;
    }
    // Cholesky factorization A = L L^T.
    for j in 0..n {
        for k in 0..j {
            let ljk = a[[j, k]];
            for i in j..n {
                a[[i, j]] -= a[[i, k]] * ljk;
            }
        }
        let d = a[[j, j]];
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Run(
                "ridge system is not positive definite".into(),
            ));
        }
        let s = d.sqrt();
        for i in j..n {
            a[[i, j]] /= s;
        }
    }
    // Forward then backward substitution.
    let mut y = b;
    for i in 0..n {
        for k in 0..i {
            let t = y[k] * a[[i, k]];
            y[i] -= t;
        }
        y[i] /= a[[i, i]];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            let t = y[k] * a[[k, i]];
            y[i] -= t;
        }
        y[i] /= a[[i, i]];
    }
    Ok(y)
}

/// Ridge regularization used by the language probe.
pub const PROBE_RIDGE_LAMBDA: f64 = 1e-3;

/// Train a ridge-regularized linear classifier to predict the language of
/// each row and score it on a seeded held-out split. The system is solved in
/// whichever of feature/example space is smaller, which changes nothing
/// mathematically.
pub fn language_probe(
    set: &ReprSet,
    holdout_fraction: f64,
    seed: u64,
) -> Result<f64> {
    let n = set.rows.nrows();
    if !(0.0..1.0).contains(&holdout_fraction) || holdout_fraction == 0.0 {
        return Err(Error::Config(format!(
            "holdout fraction must be in (0, 1), got {holdout_fraction}"
        )));
    }
    let labels: Vec<f64> = set
        .meta
        .iter()
        .map(|m| if m.lang == 0 { -1.0 } else { 1.0 })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from(child_seed_indexed(seed, "probe-split", 0));
    order.shuffle(&mut rng);
    let n_test = ((n as f64 * holdout_fraction).round() as usize).clamp(1, n.saturating_sub(1));
    if n < 2 {
        return Err(Error::Degenerate("probe needs at least two rows".into()));
    }
    let (test_ids, train_ids) = order.split_at(n_test);
    let train_langs: HashSet<i8> = train_ids.iter().map(|&i| labels[i] as i8).collect();
    if train_langs.len() < 2 {
        return Err(Error::Degenerate(
            "probe training split contains a single language".into(),
        ));
    }

    // Design matrix with a trailing bias column.
    let d = set.rows.ncols() + 1;
    let mut x = Array2::<f64>::ones((train_ids.len(), d));
    let mut t = Array1::<f64>::zeros(train_ids.len());
    for (r, &i) in train_ids.iter().enumerate() {
        x.slice_mut(ndarray::s![r, ..d - 1]).assign(&set.rows.row(i));
        t[r] = labels[i];
    }
    let w = if train_ids.len() < d {
        // Dual form: w = X^T (X X^T + lambda I)^-1 t.
        let gram = x.dot(&x.t());
        let alpha = solve_ridge(gram, t, PROBE_RIDGE_LAMBDA)?;
        x.t().dot(&alpha)
    } else {
        let xtx = x.t().dot(&x);
        let xtt = x.t().dot(&t);
        solve_ridge(xtx, xtt, PROBE_RIDGE_LAMBDA)?
    };

    let mut correct = 0usize;
    for &i in test_ids {
        let mut score = w[d - 1];
        for (j, &v) in set.rows.row(i).iter().enumerate() {
            score += w[j] * v;
        }
        let pred = if score >= 0.0 { 1.0 } else { -1.0 };
        if pred == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test_ids.len() as f64)
}

/// Per-checkpoint metrics recorded during a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetrics {
    pub step: usize,
    pub id_accuracy: f64,
    pub ood_accuracy: f64,
    pub id_label_probability: f64,
    pub ood_label_probability: f64,
    #[serde(default)]
    pub unification_activation: Option<f64>,
    #[serde(default)]
    pub unification_gradient: Option<f64>,
    #[serde(default)]
    pub language_r2: Option<f64>,
    #[serde(default)]
    pub fact_r2: Option<f64>,
    #[serde(default)]
    pub checkerboard_contrast: Option<f64>,
    #[serde(default)]
    pub shared_name_error_fraction: Option<f64>,
    #[serde(default)]
    pub train_loss: Option<f64>,
}

/// One training run's identity and metric history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub celebrity_fraction: f64,
    pub language_split: (u32, u32),
    pub variant: Variant,
    pub casing: Casing,
    pub checkpoints: Vec<CheckpointMetrics>,
}

impl RunRecord {
    pub fn validate(&self) -> Result<()> {
        if self.checkpoints.is_empty() {
            return Err(Error::Input(format!(
                "run {} has no checkpoints",
                self.run_id
            )));
        }
        for w in self.checkpoints.windows(2) {
            if w[1].step <= w[0].step {
                return Err(Error::Integrity(format!(
                    "run {} checkpoints are not strictly increasing",
                    self.run_id
                )));
            }
        }
        Ok(())
    }

    pub fn final_checkpoint(&self) -> Result<&CheckpointMetrics> {
        self.checkpoints
            .last()
            .ok_or_else(|| Error::Input(format!("run {} has no checkpoints", self.run_id)))
    }
}

/// A scatter of final-checkpoint unification scores against OOD accuracy
/// across runs, with its Pearson correlation.
#[derive(Debug, Clone)]
pub struct UnificationScatter {
    pub pcc: f64,
    /// (run id, celebrity fraction, unification, ood accuracy)
    pub points: Vec<(String, f64, f64, f64)>,
}

impl UnificationScatter {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("run_id,celebrity_fraction,unification,ood_accuracy\n");
        for (id, frac, uni, ood) in &self.points {
            out.push_str(&format!("{id},{frac},{uni},{ood}\n"));
        }
        out
    }
}

/// Correlate final-checkpoint unification with final OOD accuracy across
/// runs. `gradient` switches to the gradient-based score.
pub fn unification_vs_ood(runs: &[RunRecord], gradient: bool) -> Result<UnificationScatter> {
    if runs.len() < 3 {
        return Err(Error::Input(format!(
            "correlation needs at least 3 runs, got {}",
            runs.len()
        )));
    }
    let mut points = Vec::with_capacity(runs.len());
    for run in runs {
        let last = run.final_checkpoint()?;
        let uni = if gradient {
            last.unification_gradient
        } else {
            last.unification_activation
        };
        let uni = uni.ok_or_else(|| {
            Error::Input(format!(
                "run {} is missing the {} unification score",
                run.run_id,
                if gradient { "gradient" } else { "activation" }
            ))
        })?;
        if !uni.is_finite() || !last.ood_accuracy.is_finite() {
            return Err(Error::Input(format!(
                "run {} has non-finite metrics",
                run.run_id
            )));
        }
        points.push((run.run_id.clone(), run.celebrity_fraction, uni, last.ood_accuracy));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.2).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.3).collect();
    let pcc = pearson(&xs, &ys)?;
    Ok(UnificationScatter { pcc, points })
}

/// Inputs the model-selection rules need for one candidate run.
#[derive(Debug, Clone)]
pub struct SelectionInputs {
    pub run_id: String,
    /// In-distribution test performance at the final checkpoint.
    pub id_performance: f64,
    /// Final-checkpoint per-example OOD correctness flags.
    pub ood_flags: Vec<bool>,
    /// Final-checkpoint activation unification score.
    pub unification: f64,
}

impl SelectionInputs {
    pub fn ood_accuracy(&self) -> f64 {
        if self.ood_flags.is_empty() {
            return f64::NAN;
        }
        self.ood_flags.iter().filter(|&&b| b).count() as f64 / self.ood_flags.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSelection {
    IdTest,
    OodTestK,
    Unification,
    UnificationPlus,
}

impl ModelSelection {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelSelection::IdTest => "id-test",
            ModelSelection::OodTestK => "ood-test-k",
            ModelSelection::Unification => "unification",
            ModelSelection::UnificationPlus => "unification-plus",
        }
    }

    pub fn from_str_name(s: &str) -> Result<ModelSelection> {
        match s {
            "id-test" => Ok(ModelSelection::IdTest),
            "ood-test-k" => Ok(ModelSelection::OodTestK),
            "unification" => Ok(ModelSelection::Unification),
            "unification-plus" => Ok(ModelSelection::UnificationPlus),
            other => Err(Error::Input(format!(
                "unknown selection strategy {other:?}, expected \
                 id-test|ood-test-k|unification|unification-plus"
            ))),
        }
    }
}

fn selection_criterion(
    input: &SelectionInputs,
    strategy: ModelSelection,
    k_fraction: f64,
    seed: u64,
    run_index: usize,
) -> Result<f64> {
    let value = match strategy {
        ModelSelection::IdTest => input.id_performance,
        ModelSelection::Unification => input.unification,
        ModelSelection::UnificationPlus => input.unification * input.id_performance,
        ModelSelection::OodTestK => {
            let n = input.ood_flags.len();
            if n == 0 {
                return Err(Error::Input(format!(
                    "run {} has no OOD examples to subsample",
                    input.run_id
                )));
            }
            let m = ((n as f64 * k_fraction).round() as usize).clamp(1, n);
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = rng_from(child_seed_indexed(seed, "ood-select", run_index as u64));
            order.shuffle(&mut rng);
            order[..m]
                .iter()
                .filter(|&&i| input.ood_flags[i])
                .count() as f64
                / m as f64
        }
    };
    if !value.is_finite() {
        return Err(Error::Input(format!(
            "run {} has a non-finite {} criterion",
            input.run_id,
            strategy.as_str()
        )));
    }
    Ok(value)
}

/// Pick the best run under a selection strategy; returns the index into
/// `inputs`. Ties resolve to the earliest candidate, so the argmax is
/// deterministic and invariant under strictly increasing rescalings of the
/// criterion.
pub fn select_model(
    inputs: &[SelectionInputs],
    strategy: ModelSelection,
    k_fraction: f64,
    seed: u64,
) -> Result<usize> {
    if inputs.is_empty() {
        return Err(Error::Input("no runs to select from".into()));
    }
    let mut best = 0usize;
    let mut best_value = f64::NEG_INFINITY;
    for (i, input) in inputs.iter().enumerate() {
        let value = selection_criterion(input, strategy, k_fraction, seed, i)?;
        if value > best_value {
            best_value = value;
            best = i;
        }
    }
    Ok(best)
}

/// The resampled selection-regret protocol: repeatedly draw a random subset
/// of the run pool, apply the strategy inside the subset, and average the
/// winner's full OOD accuracy over repeats.
pub fn resampled_selection_mean_ood(
    inputs: &[SelectionInputs],
    strategy: ModelSelection,
    k_fraction: f64,
    resample_fraction: f64,
    repeats: usize,
    seed: u64,
) -> Result<f64> {
    if inputs.len() < 2 {
        return Err(Error::Input("selection pool needs at least 2 runs".into()));
    }
    if repeats == 0 {
        return Err(Error::Config("repeats must be positive".into()));
    }
    let m = ((inputs.len() as f64 * resample_fraction).round() as usize).clamp(2, inputs.len());
    let mut total = 0.0;
    for r in 0..repeats {
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let mut rng = rng_from(child_seed_indexed(seed, "selection-resample", r as u64));
        order.shuffle(&mut rng);
        let subset: Vec<SelectionInputs> = order[..m].iter().map(|&i| inputs[i].clone()).collect();
        let winner = select_model(&subset, strategy, k_fraction, child_seed_indexed(seed, "selection-ood", r as u64))?;
        total += subset[winner].ood_accuracy();
    }
    Ok(total / repeats as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckpointSelection {
    /// Highest unification score; ties go to the latest checkpoint.
    Unification,
    /// Latest checkpoint among those with the highest ID accuracy.
    LastBestId,
}

/// Pick a checkpoint step within one run.
pub fn select_checkpoint(run: &RunRecord, strategy: CheckpointSelection) -> Result<usize> {
    run.validate()?;
    match strategy {
        CheckpointSelection::Unification => {
            let mut best: Option<(f64, usize)> = None;
            for c in &run.checkpoints {
                let Some(u) = c.unification_activation else {
                    continue;
                };
                if best.map(|(b, _)| u >= b).unwrap_or(true) {
                    best = Some((u, c.step));
                }
            }
            best.map(|(_, step)| step).ok_or_else(|| {
                Error::Input(format!(
                    "run {} has no checkpoint with a unification score",
                    run.run_id
                ))
            })
        }
        CheckpointSelection::LastBestId => {
            let mut best = (f64::NEG_INFINITY, 0usize);
            for c in &run.checkpoints {
                if c.id_accuracy >= best.0 {
                    best = (c.id_accuracy, c.step);
                }
            }
            Ok(best.1)
        }
    }
}

/// Jaccard similarity of two word sets.
pub fn vocab_jaccard(a: &HashSet<String>, b: &HashSet<String>) -> Result<f64> {
    let union = a.union(b).count();
    if union == 0 {
        return Err(Error::Degenerate(
            "jaccard of two empty vocabularies is undefined".into(),
        ));
    }
    let inter = a.intersection(b).count();
    Ok(inter as f64 / union as f64)
}

/// CSV of per-checkpoint unification scores alongside the accuracies.
pub fn unification_csv(run: &RunRecord) -> String {
    let mut out =
        String::from("step,unification_activation,unification_gradient,id_accuracy,ood_accuracy\n");
    for c in &run.checkpoints {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.step,
            fmt(c.unification_activation),
            fmt(c.unification_gradient),
            c.id_accuracy,
            c.ood_accuracy
        ));
    }
    out
}

/// CSV of per-checkpoint language/fact footprints.
pub fn footprints_csv(run: &RunRecord) -> String {
    let mut out = String::from("step,language_r2,fact_r2\n");
    for c in &run.checkpoints {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{}\n",
            c.step,
            fmt(c.language_r2),
            fmt(c.fact_r2)
        ));
    }
    out
}
