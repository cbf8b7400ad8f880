//! Per-example model representations and their similarity structure.
//!
//! Two families of representation are extracted at the token immediately
//! preceding the answer: the residual stream after each transformer block
//! (concatenated over selected layers), and the gradient of the answer-token
//! loss with respect to a parameter subset, optionally shrunk through a
//! fixed seeded random projection. Pairwise cosine matrices over either
//! family drive the block/checkerboard visualizations and the contrast
//! statistic quantifying language separation.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::corpus::Statement;
use crate::ioutil::write_string_atomic;
use crate::kg::FactType;
use crate::nanoformer::{forward, loss_and_grads, Batch, LossPositions, Model};
use crate::num::Scalar;
use crate::plot::save_heatmap;
use crate::rng::{child_seed, rng_from};
use crate::tok::Vocabulary;
use crate::{Error, Result};

/// Examples per forward pass during activation extraction.
const REPR_BATCH: usize = 64;

/// Default output dimension for projected gradient representations.
pub const DEFAULT_PROJECTION_DIM: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReprKind {
    Activation,
    Gradient,
}

/// Which transformer blocks contribute to an activation representation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerSelect {
    All,
    Single(usize),
    Set(Vec<usize>),
}

impl LayerSelect {
    fn resolve(&self, n_layers: usize) -> Result<Vec<usize>> {
        let layers = match self {
            LayerSelect::All => (0..n_layers).collect(),
            LayerSelect::Single(i) => vec![*i],
            LayerSelect::Set(set) => {
                let mut v = set.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
        };
        if layers.is_empty() {
            return Err(Error::Config("layer selection is empty".into()));
        }
        if let Some(&bad) = layers.iter().find(|&&l| l >= n_layers) {
            return Err(Error::Config(format!(
                "layer {bad} out of range for a {n_layers}-layer model"
            )));
        }
        Ok(layers)
    }
}

/// Which parameters a gradient representation differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamSubset {
    /// Final transformer block plus the unembedding matrix (default).
    FinalBlockAndUnembed,
    /// Every parameter; exact but expensive.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReprSpec {
    pub kind: ReprKind,
    /// Activation representations only.
    pub layers: LayerSelect,
    /// Gradient representations only.
    pub subset: ParamSubset,
    /// Output dimension of the gradient projection; `None` keeps the exact
    /// gradient. A dimension equal to the subset size is also exact.
    pub projection_dim: Option<usize>,
    pub projection_seed: u64,
}

impl ReprSpec {
    pub fn activation() -> ReprSpec {
        ReprSpec {
            kind: ReprKind::Activation,
            layers: LayerSelect::All,
            subset: ParamSubset::FinalBlockAndUnembed,
            projection_dim: None,
            projection_seed: 0,
        }
    }

    pub fn gradient() -> ReprSpec {
        ReprSpec {
            kind: ReprKind::Gradient,
            layers: LayerSelect::All,
            subset: ParamSubset::FinalBlockAndUnembed,
            projection_dim: Some(DEFAULT_PROJECTION_DIM),
            projection_seed: 0,
        }
    }
}

/// Row-aligned example metadata carried with every representation matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReprMeta {
    pub fact_id: u32,
    pub entity: u32,
    pub lang: u8,
    pub fact_type: FactType,
    pub attribute: String,
}

impl ReprMeta {
    pub fn of(s: &Statement) -> ReprMeta {
        ReprMeta {
            fact_id: s.fact_id,
            entity: s.entity,
            lang: s.lang,
            fact_type: s.fact_type,
            attribute: s.attribute.clone(),
        }
    }
}

/// A matrix of per-example representations plus aligned metadata.
#[derive(Debug, Clone)]
pub struct ReprSet {
    pub rows: Array2<f64>,
    pub meta: Vec<ReprMeta>,
    pub step: usize,
    pub spec: ReprSpec,
}

impl ReprSet {
    fn validate(&self) -> Result<()> {
        if self.rows.nrows() != self.meta.len() {
            return Err(Error::Integrity(format!(
                "{} representation rows but {} metadata entries",
                self.rows.nrows(),
                self.meta.len()
            )));
        }
        for (i, row) in self.rows.rows().into_iter().enumerate() {
            if !row.iter().all(|v| v.is_finite()) {
                return Err(Error::Run(format!(
                    "non-finite representation for fact {} (row {i})",
                    self.meta[i].fact_id
                )));
            }
        }
        Ok(())
    }
}

/// Residual-stream representations at the pre-answer token: for each example
/// the post-block residual (after the block's residual addition, not the
/// post-norm value) of every selected layer, concatenated in ascending layer
/// order.
pub fn activation_repr<F: Scalar>(
    model: &Model<F>,
    vocab: &Vocabulary,
    statements: &[Statement],
    spec: &ReprSpec,
    step: usize,
) -> Result<ReprSet> {
    if spec.kind != ReprKind::Activation {
        return Err(Error::Config("spec kind must be activation".into()));
    }
    let layers = spec.layers.resolve(model.config.n_layers)?;
    let d = model.config.d_model;
    let mut rows = Array2::<f64>::zeros((statements.len(), layers.len() * d));
    let mut meta = Vec::with_capacity(statements.len());
    for (chunk_idx, chunk) in statements.chunks(REPR_BATCH).enumerate() {
        let encoded: Vec<_> = chunk
            .iter()
            .map(|s| vocab.encode(s))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<_> = encoded.iter().collect();
        let batch = Batch::new(&refs)?;
        let cache = forward(model, &batch)?;
        for (b, enc) in encoded.iter().enumerate() {
            let global = chunk_idx * REPR_BATCH + b;
            let row_idx = cache.row(b, enc.answer_start - 1);
            for (li, &layer) in layers.iter().enumerate() {
                let resid = cache.residual_after(layer);
                for (j, &v) in resid.row(row_idx).iter().enumerate() {
                    rows[[global, li * d + j]] = v.to_f64();
                }
            }
        }
        meta.extend(chunk.iter().map(ReprMeta::of));
    }
    let set = ReprSet {
        rows,
        meta,
        step,
        spec: spec.clone(),
    };
    set.validate()?;
    Ok(set)
}

/// A fixed sparse sign projection: every input coordinate lands in exactly
/// one output bucket with a random sign, so inner products are preserved in
/// expectation and the map costs one pass over the input.
#[derive(Debug, Clone)]
pub struct SignedBucketProjection {
    pub in_dim: usize,
    pub out_dim: usize,
    buckets: Vec<u32>,
    signs: Vec<i8>,
}

impl SignedBucketProjection {
    pub fn new(in_dim: usize, out_dim: usize, seed: u64) -> Result<SignedBucketProjection> {
        if out_dim == 0 {
            return Err(Error::Config("projection dimension must be >= 1".into()));
        }
        let mut rng = rng_from(child_seed(seed, "grad-projection"));
        use rand::Rng;
        let mut buckets = Vec::with_capacity(in_dim);
        let mut signs = Vec::with_capacity(in_dim);
        for _ in 0..in_dim {
            let r: u64 = rng.gen();
            buckets.push((r % out_dim as u64) as u32);
            signs.push(if r & (1 << 63) != 0 { 1 } else { -1 });
        }
        Ok(SignedBucketProjection {
            in_dim,
            out_dim,
            buckets,
            signs,
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_dim, "projection input dimension mismatch");
        let mut out = vec![0.0; self.out_dim];
        for (i, &v) in x.iter().enumerate() {
            out[self.buckets[i] as usize] += self.signs[i] as f64 * v;
        }
        out
    }
}

/// Gradient representations: per example, the gradient of the answer-token
/// loss with respect to the selected parameter subset, optionally pushed
/// through the seeded sign projection. A projection dimension equal to the
/// subset size (or `None`) keeps the exact gradient.
pub fn gradient_repr<F: Scalar>(
    model: &Model<F>,
    vocab: &Vocabulary,
    statements: &[Statement],
    spec: &ReprSpec,
    step: usize,
) -> Result<ReprSet> {
    if spec.kind != ReprKind::Gradient {
        return Err(Error::Config("spec kind must be gradient".into()));
    }
    let range = match spec.subset {
        ParamSubset::FinalBlockAndUnembed => {
            model.layout.final_block_and_unembed_range(&model.config)
        }
        ParamSubset::All => 0..model.layout.total,
    };
    let in_dim = range.len();
    let projection = match spec.projection_dim {
        Some(k) if k != in_dim => Some(SignedBucketProjection::new(in_dim, k, spec.projection_seed)?),
        _ => None,
    };
    let out_dim = projection.as_ref().map(|p| p.out_dim).unwrap_or(in_dim);
    let mut rows = Array2::<f64>::zeros((statements.len(), out_dim));
    let mut meta = Vec::with_capacity(statements.len());
    for (i, s) in statements.iter().enumerate() {
        let enc = vocab.encode(s)?;
        let batch = Batch::new(&[&enc])?;
        let (_, grads) = loss_and_grads(model, &batch, LossPositions::AnswerOnly)
            .map_err(|e| Error::Run(format!("gradient for fact {}: {e}", s.fact_id)))?;
        let slice: Vec<f64> = grads
            .slice(ndarray::s![range.clone()])
            .iter()
            .map(|&v| v.to_f64())
            .collect();
        let out = match &projection {
            Some(p) => p.apply(&slice),
            None => slice,
        };
        rows.row_mut(i).assign(&Array1::from_vec(out));
        meta.push(ReprMeta::of(s));
    }
    let set = ReprSet {
        rows,
        meta,
        step,
        spec: spec.clone(),
    };
    set.validate()?;
    Ok(set)
}

/// Pairwise cosine similarities: symmetric, unit diagonal, entries in
/// [-1, 1]. Zero-norm rows are degenerate.
pub fn similarity_matrix(set: &ReprSet) -> Result<Array2<f64>> {
    set.validate()?;
    let n = set.rows.nrows();
    if n < 2 {
        return Err(Error::Input(format!(
            "similarity matrix needs at least 2 rows, got {n}"
        )));
    }
    let mut unit = set.rows.clone();
    for (i, mut row) in unit.rows_mut().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            return Err(Error::Degenerate(format!(
                "zero-norm representation for fact {} (row {i})",
                set.meta[i].fact_id
            )));
        }
        row /= norm;
    }
    let mut sim = unit.dot(&unit.t());
    for i in 0..n {
        for j in 0..n {
            sim[[i, j]] = sim[[i, j]].clamp(-1.0, 1.0);
        }
        sim[[i, i]] = 1.0;
    }
    Ok(sim)
}

/// Group rows by (fact type, attribute); value type is per-language row ids.
fn attribute_groups(meta: &[ReprMeta]) -> BTreeMap<(u8, String), [Vec<usize>; 2]> {
    let mut groups: BTreeMap<(u8, String), [Vec<usize>; 2]> = BTreeMap::new();
    for (i, m) in meta.iter().enumerate() {
        let ft = FactType::ALL.iter().position(|f| *f == m.fact_type).unwrap() as u8;
        let entry = groups.entry((ft, m.attribute.clone())).or_default();
        entry[(m.lang != 0) as usize].push(i);
    }
    groups
}

/// Outcome of the checkerboard statistic: the contrast value plus which
/// groups could not contribute.
#[derive(Debug, Clone)]
pub struct ContrastReport {
    pub value: f64,
    pub n_groups_used: usize,
    pub skipped: Vec<String>,
}

/// Mean(within-language similarity) minus mean(cross-language similarity),
/// averaged over (fact type, attribute) groups. Positive values mean the
/// matrix splits by language. Groups missing a language (or any pair kind)
/// are skipped and reported.
pub fn checkerboard_contrast(sim: &Array2<f64>, meta: &[ReprMeta]) -> Result<ContrastReport> {
    if sim.nrows() != meta.len() || sim.ncols() != meta.len() {
        return Err(Error::Input(format!(
            "similarity matrix is {}x{} but metadata has {} rows",
            sim.nrows(),
            sim.ncols(),
            meta.len()
        )));
    }
    let mut total = 0.0;
    let mut used = 0usize;
    let mut skipped = Vec::new();
    for ((ft, attr), langs) in attribute_groups(meta) {
        let name = || format!("{}:{attr}", FactType::ALL[ft as usize]);
        if langs[0].is_empty() || langs[1].is_empty() {
            skipped.push(format!("{} has a single language", name()));
            continue;
        }
        let mut within = (0.0, 0usize);
        for side in &langs {
            for a in 0..side.len() {
                for b in a + 1..side.len() {
                    within.0 += sim[[side[a], side[b]]];
                    within.1 += 1;
                }
            }
        }
        if within.1 == 0 {
            skipped.push(format!("{} has no within-language pairs", name()));
            continue;
        }
        let mut cross = (0.0, 0usize);
        for &a in &langs[0] {
            for &b in &langs[1] {
                cross.0 += sim[[a, b]];
                cross.1 += 1;
            }
        }
        total += within.0 / within.1 as f64 - cross.0 / cross.1 as f64;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Degenerate(
            "no group has both languages and within-language pairs".into(),
        ));
    }
    Ok(ContrastReport {
        value: total / used as f64,
        n_groups_used: used,
        skipped,
    })
}

/// A deterministic pick of rows for one block/checkerboard figure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaidPlan {
    /// Source indices ordered by (fact type, attribute, language).
    pub indices: Vec<usize>,
    /// Positions in `indices` where a (fact type, attribute) group starts.
    pub boundaries: Vec<usize>,
}

/// Select up to `max_examples` rows, split equally over (fact type,
/// attribute) cells that carry both languages, each cell holding the two
/// languages as contiguous equal halves.
pub fn plaid_select(meta: &[ReprMeta], max_examples: usize) -> Result<PlaidPlan> {
    let eligible: Vec<_> = attribute_groups(meta)
        .into_iter()
        .filter(|(_, langs)| !langs[0].is_empty() && !langs[1].is_empty())
        .collect();
    if eligible.is_empty() {
        return Err(Error::Degenerate(
            "no (fact type, attribute) cell carries both languages".into(),
        ));
    }
    let half = ((max_examples / eligible.len()) / 2).max(1);
    let mut indices = Vec::new();
    let mut boundaries = Vec::new();
    for (_, langs) in &eligible {
        if indices.len() + 2 > max_examples {
            break;
        }
        let take = half.min((max_examples - indices.len()) / 2);
        boundaries.push(indices.len());
        for side in langs {
            indices.extend(side.iter().take(take).copied());
        }
    }
    Ok(PlaidPlan { indices, boundaries })
}

/// Write the sorted similarity matrix as a PNG heatmap on the fixed [-1, 1]
/// red-high scale plus a CSV holding the exact numbers in the same order.
/// The CSV column header carries each row's metadata.
pub fn plaid_emit(
    sim: &Array2<f64>,
    meta: &[ReprMeta],
    boundaries: &[usize],
    csv_path: &Path,
    png_path: &Path,
) -> Result<()> {
    let n = sim.nrows();
    if sim.ncols() != n {
        return Err(Error::Input("similarity matrix must be square".into()));
    }
    if meta.len() != n {
        return Err(Error::Input(format!(
            "matrix has {n} rows but metadata covers {}",
            meta.len()
        )));
    }
    let mut csv = String::new();
    let header: Vec<String> = meta
        .iter()
        .map(|m| format!("{}|{}|L{}", m.fact_type, m.attribute, m.lang))
        .collect();
    csv.push_str(&header.join(","));
    csv.push('\n');
    for row in sim.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    write_string_atomic(csv_path, &csv)?;
    save_heatmap(png_path, sim.view(), -1.0, 1.0, boundaries)
}

/// Parse a matrix written by [`plaid_emit`] back into numbers.
pub fn read_plaid_csv(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Integrity("empty matrix file".into()))?;
    let n = header.split(',').count();
    let mut values = Vec::new();
    let mut rows = 0;
    for line in lines {
        let mut count = 0;
        for cell in line.split(',') {
            values.push(
                cell.parse::<f64>()
                    .map_err(|e| Error::Integrity(format!("bad matrix cell {cell:?}: {e}")))?,
            );
            count += 1;
        }
        if count != n {
            return Err(Error::Integrity(format!(
                "matrix row has {count} cells, expected {n}"
            )));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Integrity(format!(
            "matrix has {rows} rows but {n} columns"
        )));
    }
    Array2::from_shape_vec((n, n), values)
        .map_err(|e| Error::Integrity(format!("matrix shape: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nanoformer::ModelConfig;
    use crate::tok::TokenizerMode;

    fn stmt(text: &str, lang: u8, fact_id: u32, fact_type: FactType, entity: u32) -> Statement {
        let tokens: Vec<String> = text.split(' ').map(str::to_string).collect();
        let answer_start = tokens.len() - 1;
        Statement {
            attribute: tokens[answer_start].clone(),
            tokens,
            answer_start,
            lang,
            fact_id,
            fact_type,
            entity,
            is_celebrity: false,
            template_idx: 0,
            subject_start: 1,
        }
    }

    fn micro(n_layers: usize, vocab_size: usize) -> Model<f64> {
        Model::init(&ModelConfig {
            vocab_size,
            n_layers,
            n_heads: 2,
            d_model: 16,
            d_ff: 32,
            max_seq_len: 32,
            init_seed: 7,
            ..ModelConfig::default()
        })
        .unwrap()
    }

    fn corpus_and_vocab() -> (Vec<Statement>, Vocabulary) {
        let statements = vec![
            stmt("the birth year of ada blue is 1902", 0, 0, FactType::BirthYear, 0),
            stmt("the birth year of bo stone is 1902", 0, 2, FactType::BirthYear, 1),
            stmt("zu naro veh ada blue koi 1902", 1, 0, FactType::BirthYear, 0),
            stmt("zu naro veh bo stone koi 1902", 1, 2, FactType::BirthYear, 1),
            stmt("the death city of ada blue is omsk", 0, 1, FactType::DeathCity, 0),
            stmt("zu kel veh bo stone koi omsk", 1, 3, FactType::DeathCity, 1),
        ];
        let vocab = Vocabulary::build(&[&statements], TokenizerMode::Word);
        (statements, vocab)
    }

    #[test]
    fn activation_rows_concatenate_layers_in_order() {
        let (statements, vocab) = corpus_and_vocab();
        let model = micro(3, vocab.len());
        let all = activation_repr(&model, &vocab, &statements, &ReprSpec::activation(), 0).unwrap();
        assert_eq!(all.rows.ncols(), 3 * 16);
        assert_eq!(all.meta.len(), statements.len());

        for layer in 0..3 {
            let spec = ReprSpec {
                layers: LayerSelect::Single(layer),
                ..ReprSpec::activation()
            };
            let single = activation_repr(&model, &vocab, &statements, &spec, 0).unwrap();
            assert_eq!(single.rows.ncols(), 16);
            let slice = all.rows.slice(ndarray::s![.., layer * 16..(layer + 1) * 16]);
            assert_eq!(single.rows, slice.to_owned(), "layer {layer} slice");
        }
    }

    #[test]
    fn identical_statements_share_a_row_and_answer_token_is_invisible() {
        let (mut statements, _) = corpus_and_vocab();
        statements.push(statements[0].clone());
        // Same query, different answer: the pre-answer activation must match.
        let mut other = statements[0].clone();
        let last = other.tokens.len() - 1;
        other.tokens[last] = "1903".into();
        other.attribute = "1903".into();
        statements.push(other);
        let vocab = Vocabulary::build(&[&statements], TokenizerMode::Word);
        let model = micro(2, vocab.len());
        let set = activation_repr(&model, &vocab, &statements, &ReprSpec::activation(), 0).unwrap();
        let n = set.rows.nrows();
        assert_eq!(set.rows.row(0), set.rows.row(n - 2));
        assert_eq!(set.rows.row(0), set.rows.row(n - 1));
    }

    #[test]
    fn bad_layer_selection_is_rejected() {
        let (statements, vocab) = corpus_and_vocab();
        let model = micro(2, vocab.len());
        let spec = ReprSpec {
            layers: LayerSelect::Single(5),
            ..ReprSpec::activation()
        };
        assert!(matches!(
            activation_repr(&model, &vocab, &statements, &spec, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn identity_projection_recovers_the_exact_gradient() {
        let (statements, vocab) = corpus_and_vocab();
        let model = micro(2, vocab.len());
        let exact_spec = ReprSpec {
            projection_dim: None,
            ..ReprSpec::gradient()
        };
        let exact = gradient_repr(&model, &vocab, &statements[..2], &exact_spec, 0).unwrap();
        let subset = model.layout.final_block_and_unembed_range(&model.config);
        assert_eq!(exact.rows.ncols(), subset.len());

        let same_dim_spec = ReprSpec {
            projection_dim: Some(subset.len()),
            ..ReprSpec::gradient()
        };
        let same = gradient_repr(&model, &vocab, &statements[..2], &same_dim_spec, 0).unwrap();
        assert_eq!(exact.rows, same.rows);

        // Cross-check one row against a direct backward pass.
        let enc = vocab.encode(&statements[0]).unwrap();
        let batch = Batch::new(&[&enc]).unwrap();
        let (_, grads) = loss_and_grads(&model, &batch, LossPositions::AnswerOnly).unwrap();
        let direct: Vec<f64> = grads.slice(ndarray::s![subset]).to_vec();
        assert_eq!(exact.rows.row(0).to_vec(), direct);
    }

    #[test]
    fn projected_gradient_cosines_track_exact_cosines() {
        let (statements, vocab) = corpus_and_vocab();
        let model = micro(2, vocab.len());
        let exact = gradient_repr(
            &model,
            &vocab,
            &statements,
            &ReprSpec {
                projection_dim: None,
                ..ReprSpec::gradient()
            },
            0,
        )
        .unwrap();
        let projected = gradient_repr(&model, &vocab, &statements, &ReprSpec::gradient(), 0).unwrap();
        assert_eq!(projected.rows.ncols(), DEFAULT_PROJECTION_DIM);
        let se = similarity_matrix(&exact).unwrap();
        let sp = similarity_matrix(&projected).unwrap();
        let mut worst = 0.0f64;
        for i in 0..se.nrows() {
            for j in 0..se.ncols() {
                worst = worst.max((se[[i, j]] - sp[[i, j]]).abs());
            }
        }
        assert!(worst <= 0.1, "projected cosine deviates by {worst}");
    }

    #[test]
    fn gradient_rows_are_seed_deterministic() {
        let (statements, vocab) = corpus_and_vocab();
        let model = micro(1, vocab.len());
        let a = gradient_repr(&model, &vocab, &statements[..3], &ReprSpec::gradient(), 0).unwrap();
        let b = gradient_repr(&model, &vocab, &statements[..3], &ReprSpec::gradient(), 0).unwrap();
        assert_eq!(a.rows, b.rows);
        let other_seed = ReprSpec {
            projection_seed: 1,
            ..ReprSpec::gradient()
        };
        let c = gradient_repr(&model, &vocab, &statements[..3], &other_seed, 0).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    fn raw_set(rows: Array2<f64>, langs: &[u8]) -> ReprSet {
        let meta = langs
            .iter()
            .enumerate()
            .map(|(i, &lang)| ReprMeta {
                fact_id: i as u32,
                entity: i as u32,
                lang,
                fact_type: FactType::BirthYear,
                attribute: "1902".into(),
            })
            .collect();
        ReprSet {
            rows,
            meta,
            step: 0,
            spec: ReprSpec::activation(),
        }
    }

    #[test]
    fn similarity_matrix_matches_a_double_loop_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from(9);
        let rows = Array2::from_shape_fn((5, 7), |_| rng.gen_range(-1.0..1.0));
        let set = raw_set(rows.clone(), &[0, 0, 0, 1, 1]);
        let sim = similarity_matrix(&set).unwrap();
        for i in 0..5 {
            assert_eq!(sim[[i, i]], 1.0);
            for j in 0..5 {
                let (a, b) = (rows.row(i), rows.row(j));
                let oracle = a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt());
                assert!((sim[[i, j]] - oracle).abs() < 1e-12);
                assert_eq!(sim[[i, j]], sim[[j, i]]);
            }
        }
    }

    #[test]
    fn similarity_matrix_analytic_cases() {
        let set = raw_set(
            ndarray::array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            &[0, 0, 1],
        );
        let sim = similarity_matrix(&set).unwrap();
        assert!((sim[[0, 1]] - 0.0).abs() < 1e-15);
        assert!((sim[[0, 2]] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        let zero = raw_set(ndarray::array![[1.0, 0.0], [0.0, 0.0]], &[0, 1]);
        assert!(matches!(similarity_matrix(&zero), Err(Error::Degenerate(_))));
        let single = raw_set(ndarray::array![[1.0, 0.0]], &[0]);
        assert!(matches!(similarity_matrix(&single), Err(Error::Input(_))));
    }

    #[test]
    fn contrast_is_zero_for_language_invariant_rows() {
        let rows = ndarray::array![
            [1.0, 2.0, 3.0],
            [1.0, 2.0, 3.0],
            [1.0, 2.0, 3.0],
            [1.0, 2.0, 3.0],
        ];
        let set = raw_set(rows, &[0, 0, 1, 1]);
        let sim = similarity_matrix(&set).unwrap();
        let report = checkerboard_contrast(&sim, &set.meta).unwrap();
        assert!(report.value.abs() < 1e-12);
        assert_eq!(report.n_groups_used, 1);
    }

    #[test]
    fn contrast_matches_a_four_vector_hand_oracle() {
        // Within-language pairs are parallel (cos 1); cross-language pairs
        // are orthogonal (cos 0). Contrast = 1 - 0 = 1.
        let rows = ndarray::array![
            [1.0, 0.0],
            [2.0, 0.0],
            [0.0, 1.0],
            [0.0, 3.0],
        ];
        let set = raw_set(rows.clone(), &[0, 0, 1, 1]);
        let sim = similarity_matrix(&set).unwrap();
        let report = checkerboard_contrast(&sim, &set.meta).unwrap();
        assert!((report.value - 1.0).abs() < 1e-12);

        // Scaling every vector leaves cosine and therefore contrast alone.
        let scaled = raw_set(rows.mapv(|v| v * 3.7), &[0, 0, 1, 1]);
        let sim2 = similarity_matrix(&scaled).unwrap();
        assert!((checkerboard_contrast(&sim2, &scaled.meta).unwrap().value - 1.0).abs() < 1e-12);

        // Swapping language labels leaves the value unchanged.
        let swapped = raw_set(rows, &[1, 1, 0, 0]);
        let sim3 = similarity_matrix(&swapped).unwrap();
        assert!((checkerboard_contrast(&sim3, &swapped.meta).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_language_groups_are_skipped_with_warning() {
        let rows = ndarray::array![
            [1.0, 0.0],
            [2.0, 0.0],
            [0.0, 1.0],
            [0.0, 3.0],
            [1.0, 1.0],
        ];
        let mut set = raw_set(rows, &[0, 0, 1, 1, 0]);
        set.meta[4].attribute = "1950".into();
        let sim = similarity_matrix(&set).unwrap();
        let report = checkerboard_contrast(&sim, &set.meta).unwrap();
        assert_eq!(report.n_groups_used, 1);
        assert_eq!(report.skipped.len(), 1);
        assert!(report.skipped[0].contains("single language"));

        // All groups skipped: degenerate.
        let lonely = raw_set(ndarray::array![[1.0, 0.0], [0.0, 1.0]], &[0, 0]);
        let sim = similarity_matrix(&lonely).unwrap();
        assert!(matches!(
            checkerboard_contrast(&sim, &lonely.meta),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn plaid_selection_orders_and_caps() {
        // Two cells; 40 rows each split 30/10 across languages.
        let mut meta = Vec::new();
        for i in 0..80u32 {
            meta.push(ReprMeta {
                fact_id: i,
                entity: i,
                lang: (i % 4 == 3) as u8,
                fact_type: if i < 40 { FactType::BirthYear } else { FactType::BirthCity },
                attribute: if i < 40 { "1902".into() } else { "omsk".into() },
            });
        }
        let plan = plaid_select(&meta, 24).unwrap();
        // 24 / 2 cells / 2 languages = 6 rows per language per cell.
        assert_eq!(plan.indices.len(), 24);
        assert_eq!(plan.boundaries, vec![0, 12]);
        // Cells are grouped with language halves contiguous: fact types in
        // plan order must be sorted, and within a cell langs come 0s then 1s.
        let langs: Vec<u8> = plan.indices.iter().map(|&i| meta[i].lang).collect();
        assert_eq!(&langs[..12], &[0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
        assert_eq!(&langs[12..], &[0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
        // BirthYear sorts before BirthCity in declaration order.
        assert!(plan.indices[..12].iter().all(|&i| meta[i].fact_type == FactType::BirthYear));
        assert!(plan.indices[12..].iter().all(|&i| meta[i].fact_type == FactType::BirthCity));
    }

    #[test]
    fn plaid_emit_round_trips_through_csv() {
        let rows = ndarray::array![
            [1.0, 0.5, 0.25],
            [0.5, 1.0, -0.125],
            [0.25, -0.125, 1.0],
        ];
        let meta = vec![
            ReprMeta { fact_id: 0, entity: 0, lang: 0, fact_type: FactType::BirthYear, attribute: "1902".into() },
            ReprMeta { fact_id: 1, entity: 1, lang: 1, fact_type: FactType::BirthYear, attribute: "1902".into() },
            ReprMeta { fact_id: 2, entity: 2, lang: 0, fact_type: FactType::DeathCity, attribute: "omsk".into() },
        ];
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("plaid_100.csv");
        let png = dir.path().join("plaid_100.png");
        plaid_emit(&rows, &meta, &[0, 2], &csv, &png).unwrap();
        let loaded = read_plaid_csv(&csv).unwrap();
        assert_eq!(loaded, rows);
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("birth-year|1902|L0,birth-year|1902|L1,death-city|omsk|L0\n"));
        assert!(image::open(&png).is_ok());

        // Metadata must cover every row.
        assert!(plaid_emit(&rows, &meta[..2], &[0], &csv, &png).is_err());
    }

    #[test]
    fn block_matrix_from_repeated_vectors_renders_unit_blocks() {
        let rows = ndarray::array![
            [1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [0.0, 2.0, 0.0],
        ];
        let set = raw_set(rows, &[0, 1, 0, 1]);
        let sim = similarity_matrix(&set).unwrap();
        for (a, b) in [(0, 1), (2, 3)] {
            assert_eq!(sim[[a, b]], 1.0);
        }
        assert_eq!(sim[[0, 2]], 0.0);
    }
}
