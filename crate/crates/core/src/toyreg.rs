//! A linear-model micro-environment for studying how a scaled, label-
//! correlated language feature blocks cross-pair generalization.
//!
//! Each example is the concatenation of a scaled one-hot language feature
//! and a scaled one-hot entity feature. The binary label is a deterministic
//! function of the entity, but each entity is only ever observed in one
//! "home" language, and home languages are assigned so that language alone
//! explains a configurable fraction of label variance. A linear model with
//! sigmoid output is fit by full-batch gradient descent; evaluation asks
//! whether it still classifies entities correctly when they appear in the
//! unseen language.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{child_seed, child_seed_indexed, rng_from};
use crate::{Error, Result};

/// Tolerance between the requested language-label variance share and the
/// share actually representable with integer entity counts.
pub const SHARE_ROUNDING_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    /// Total entities; half carry label 0 and half label 1, and each is
    /// homed in exactly one language, so this is also the number of
    /// (entity, language) pairs observed in train and the number held out.
    pub n_entities: usize,
    /// Sampled training examples (entities drawn with replacement from the
    /// home-language pools, so per-entity counts fluctuate).
    pub n_train: usize,
    /// Fraction of label variance explainable by language alone, in [0, 1).
    pub language_label_variance: f64,
    /// Entity appearance rates span this factor log-uniformly (1 = uniform).
    /// The same popularity profile is replicated inside every label-by-home
    /// cell, so frequency stays independent of both label and language.
    pub popularity_log_range: f64,
    pub language_feature_scale: f64,
    pub entity_feature_scale: f64,
    pub learning_rate: f64,
    pub steps: usize,
    /// Train under log loss instead of squared error on the sigmoid output.
    /// Squared error's gradient vanishes on confidently wrong examples, so
    /// rare entities that start out dominated by the language weight can
    /// never recover and the train set never fits exactly; log loss keeps a
    /// full-strength gradient on wrong examples while still freezing correct
    /// ones, which is the regime the default table settings rely on.
    pub log_loss: bool,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            n_entities: 400,
            n_train: 10_000,
            language_label_variance: 0.0,
            popularity_log_range: 384.0,
            language_feature_scale: 2.0,
            entity_feature_scale: 1.0,
            learning_rate: 2.0,
            steps: 12_800,
            log_loss: true,
            seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_entities < 4 || self.n_entities % 2 != 0 {
            return Err(Error::Config(format!(
                "n_entities must be even and at least 4, got {}",
                self.n_entities
            )));
        }
        if self.n_train == 0 {
            return Err(Error::Config("n_train must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.language_label_variance) {
            return Err(Error::Config(format!(
                "language_label_variance must be in [0, 1), got {}",
                self.language_label_variance
            )));
        }
        if self.language_feature_scale <= 0.0 || self.entity_feature_scale <= 0.0 {
            return Err(Error::Config("feature scales must be positive".into()));
        }
        if self.popularity_log_range < 1.0 || !self.popularity_log_range.is_finite() {
            return Err(Error::Config(format!(
                "popularity_log_range must be at least 1, got {}",
                self.popularity_log_range
            )));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        self.majority_count()?;
        Ok(())
    }

    /// Entity label: even ids are 0, odd ids are 1.
    pub fn label_of(entity: usize) -> f64 {
        (entity % 2) as f64
    }

    /// How many label-0 entities are homed in language 0 (equivalently,
    /// label-1 entities in language 1). Errors when integer rounding moves
    /// the implied variance share too far from the requested one.
    fn majority_count(&self) -> Result<usize> {
        let half = self.n_entities / 2;
        let delta = self.language_label_variance.sqrt() / 2.0;
        let c = ((half as f64) * (0.5 + delta)).round() as usize;
        let c = c.min(half);
        // With c majority entities per language, P(lang=1, label=1) = c / E
        // and all marginals are exactly 1/2, so corr = 4c/E - 1.
        let corr = 4.0 * c as f64 / self.n_entities as f64 - 1.0;
        let implied = corr * corr;
        if (implied - self.language_label_variance).abs() > SHARE_ROUNDING_TOLERANCE {
            return Err(Error::Config(format!(
                "variance share {} is not representable with {} entities \
                 (closest achievable is {:.4})",
                self.language_label_variance, self.n_entities, implied
            )));
        }
        Ok(c)
    }
}

/// One (language, entity) observation; the label is redundant with the
/// entity but stored for convenience.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyExample {
    pub lang: u8,
    pub entity: u32,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyData {
    pub config: ToyConfig,
    /// Home language per entity.
    pub home_lang: Vec<u8>,
    pub train: Vec<ToyExample>,
    /// One example per (entity, home language) pair.
    pub id_test: Vec<ToyExample>,
    /// One example per (entity, other language) pair; disjoint from train.
    pub ood_test: Vec<ToyExample>,
}

/// Build the toy dataset. Home languages are assigned by exact counts so
/// the entity-level language-label correlation matches the configured
/// variance share up to integer rounding; training examples then draw
/// entities uniformly from the home pools.
pub fn build_toy_data(config: &ToyConfig) -> Result<ToyData> {
    config.validate()?;
    let e = config.n_entities;
    let half = e / 2;
    let c = config.majority_count()?;

    let mut label0: Vec<usize> = (0..e).filter(|i| i % 2 == 0).collect();
    let mut label1: Vec<usize> = (0..e).filter(|i| i % 2 == 1).collect();
    let mut rng = rng_from(child_seed(config.seed, "toy-assign"));
    label0.shuffle(&mut rng);
    label1.shuffle(&mut rng);

    let mut home_lang = vec![0u8; e];
    // Language 0 homes c label-0 entities and (half - c) label-1 entities;
    // language 1 gets the complements, so both languages home exactly half.
    for &ent in &label0[c..] {
        home_lang[ent] = 1;
    }
    for &ent in &label1[..c] {
        home_lang[ent] = 1;
    }

    // The same log-uniform appearance profile is laid over every
    // label-by-home cell (cell member lists are already seeded shuffles), so
    // popularity carries no information about either label or language.
    let cells: [&[usize]; 4] = [&label0[..c], &label0[c..], &label1[..c], &label1[c..]];
    let mut weight = vec![0.0f64; e];
    for cell in cells {
        let k = cell.len() as f64;
        for (i, &ent) in cell.iter().enumerate() {
            weight[ent] = config.popularity_log_range.powf((i as f64 + 0.5) / k);
        }
    }

    let pools: [Vec<usize>; 2] = [
        (0..e).filter(|&i| home_lang[i] == 0).collect(),
        (0..e).filter(|&i| home_lang[i] == 1).collect(),
    ];
    debug_assert_eq!(pools[0].len(), half);
    debug_assert_eq!(pools[1].len(), half);
    let samplers: Vec<rand::distributions::WeightedIndex<f64>> = pools
        .iter()
        .map(|pool| {
            rand::distributions::WeightedIndex::new(pool.iter().map(|&ent| weight[ent]))
                .map_err(|err| Error::Config(format!("bad popularity weights: {err}")))
        })
        .collect::<Result<_>>()?;

    let mut rng = rng_from(child_seed(config.seed, "toy-train"));
    let mut train = Vec::with_capacity(config.n_train);
    for i in 0..config.n_train {
        let lang = (i % 2) as u8;
        let entity = pools[lang as usize][rng.sample(&samplers[lang as usize])];
        train.push(ToyExample {
            lang,
            entity: entity as u32,
            label: ToyConfig::label_of(entity),
        });
    }

    let id_test: Vec<ToyExample> = (0..e)
        .map(|ent| ToyExample {
            lang: home_lang[ent],
            entity: ent as u32,
            label: ToyConfig::label_of(ent),
        })
        .collect();
    let ood_test: Vec<ToyExample> = (0..e)
        .map(|ent| ToyExample {
            lang: 1 - home_lang[ent],
            entity: ent as u32,
            label: ToyConfig::label_of(ent),
        })
        .collect();

    Ok(ToyData {
        config: config.clone(),
        home_lang,
        train,
        id_test,
        ood_test,
    })
}

/// The fitted linear model: two language weights followed by one weight per
/// entity (the one-hot design makes a separate bias redundant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub weights: Vec<f64>,
    pub config: ToyConfig,
}

impl ToyModel {
    pub fn logit(&self, ex: &ToyExample) -> f64 {
        self.config.language_feature_scale * self.weights[ex.lang as usize]
            + self.config.entity_feature_scale * self.weights[2 + ex.entity as usize]
    }

    pub fn predict(&self, ex: &ToyExample) -> f64 {
        if self.logit(ex) >= 0.0 {
            1.0
        } else {
            0.0
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fit the linear model by full-batch gradient descent from zero weights.
pub fn train_toy(data: &ToyData) -> Result<ToyModel> {
    let config = &data.config;
    config.validate()?;
    if data.train.is_empty() {
        return Err(Error::Input("empty toy training set".into()));
    }
    let mut w = vec![0.0f64; 2 + config.n_entities];
    let mut grad = vec![0.0f64; w.len()];
    let inv_n = 1.0 / data.train.len() as f64;
    for step in 0..config.steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for ex in &data.train {
            let z = config.language_feature_scale * w[ex.lang as usize]
                + config.entity_feature_scale * w[2 + ex.entity as usize];
            let p = sigmoid(z);
            // d loss / d logit: squared error keeps the sigmoid derivative,
            // log loss cancels it.
            let dz = if config.log_loss {
                p - ex.label
            } else {
                2.0 * (p - ex.label) * p * (1.0 - p)
            };
            grad[ex.lang as usize] += dz * config.language_feature_scale;
            grad[2 + ex.entity as usize] += dz * config.entity_feature_scale;
        }
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= config.learning_rate * inv_n * gi;
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Run(format!(
                "toy training diverged at step {step}"
            )));
        }
    }
    Ok(ToyModel {
        weights: w,
        config: config.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyEval {
    pub train_accuracy: f64,
    pub id_accuracy: f64,
    pub ood_accuracy: f64,
}

fn accuracy(model: &ToyModel, set: &[ToyExample]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Input("empty toy evaluation set".into()));
    }
    let correct = set
        .iter()
        .filter(|ex| model.predict(ex) == ex.label)
        .count();
    Ok(correct as f64 / set.len() as f64)
}

pub fn eval_toy(model: &ToyModel, data: &ToyData) -> Result<ToyEval> {
    Ok(ToyEval {
        train_accuracy: accuracy(model, &data.train)?,
        id_accuracy: accuracy(model, &data.id_test)?,
        ood_accuracy: accuracy(model, &data.ood_test)?,
    })
}

/// Build, train, and evaluate one configuration.
pub fn run_toy(config: &ToyConfig) -> Result<(ToyModel, ToyEval)> {
    let data = build_toy_data(config)?;
    let model = train_toy(&data)?;
    let eval = eval_toy(&model, &data)?;
    Ok((model, eval))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyTableRow {
    pub language_label_variance: f64,
    pub train_accuracy: f64,
    pub id_accuracy: f64,
    pub ood_accuracy: f64,
}

/// Seed-averaged accuracy table over variance shares.
pub fn toy_table(base: &ToyConfig, shares: &[f64], n_seeds: usize) -> Result<Vec<ToyTableRow>> {
    if shares.is_empty() || n_seeds == 0 {
        return Err(Error::Config("table needs shares and seeds".into()));
    }
    let mut rows = Vec::with_capacity(shares.len());
    for &share in shares {
        let mut sums = (0.0, 0.0, 0.0);
        for k in 0..n_seeds {
            let config = ToyConfig {
                language_label_variance: share,
                seed: child_seed_indexed(base.seed, "toy-table", k as u64),
                ..base.clone()
            };
            let (_, eval) = run_toy(&config)?;
            sums.0 += eval.train_accuracy;
            sums.1 += eval.id_accuracy;
            sums.2 += eval.ood_accuracy;
        }
        let n = n_seeds as f64;
        rows.push(ToyTableRow {
            language_label_variance: share,
            train_accuracy: sums.0 / n,
            id_accuracy: sums.1 / n,
            ood_accuracy: sums.2 / n,
        });
    }
    Ok(rows)
}

pub fn toy_table_csv(rows: &[ToyTableRow]) -> String {
    let mut out = String::from(
        "language_label_variance,train_accuracy,id_accuracy,ood_accuracy\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.language_label_variance, r.train_accuracy, r.id_accuracy, r.ood_accuracy
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyScaleRow {
    pub language_feature_scale: f64,
    pub train_accuracy: f64,
    pub ood_accuracy: f64,
}

/// Seed-averaged sweep over the language feature scale at a fixed variance
/// share.
pub fn toy_scale_sweep(
    base: &ToyConfig,
    scales: &[f64],
    n_seeds: usize,
) -> Result<Vec<ToyScaleRow>> {
    if scales.is_empty() || n_seeds == 0 {
        return Err(Error::Config("sweep needs scales and seeds".into()));
    }
    let mut rows = Vec::with_capacity(scales.len());
    for &scale in scales {
        let mut sums = (0.0, 0.0);
        for k in 0..n_seeds {
            let config = ToyConfig {
                language_feature_scale: scale,
                seed: child_seed_indexed(base.seed, "toy-scale", k as u64),
                ..base.clone()
            };
            let (_, eval) = run_toy(&config)?;
            sums.0 += eval.train_accuracy;
            sums.1 += eval.ood_accuracy;
        }
        rows.push(ToyScaleRow {
            language_feature_scale: scale,
            train_accuracy: sums.0 / n_seeds as f64,
            ood_accuracy: sums.1 / n_seeds as f64,
        });
    }
    Ok(rows)
}

/// Language-feature scales for the default generalization-restoration
/// sweep, inside the band where the outcome responds to the scale (larger
/// values sit on a saturation plateau).
pub const DEFAULT_SWEEP_SCALES: [f64; 6] = [1.0, 0.71, 0.5, 0.35, 0.25, 0.18];

/// Variance shares of the default accuracy table.
pub const DEFAULT_TABLE_SHARES: [f64; 3] = [0.0, 0.05, 0.10];

pub fn toy_scale_csv(rows: &[ToyScaleRow]) -> String {
    let mut out = String::from("language_feature_scale,train_accuracy,ood_accuracy\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.language_feature_scale, r.train_accuracy, r.ood_accuracy
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_independence;

    /// Chi-square critical value, 1 dof, alpha = 0.01.
    const CHI2_1DF_P01: f64 = 6.635;

    // 100 entities keep the integer-count share grid fine enough for the
    // 5% and 10% settings the tests exercise; uniform popularity and a short
    // budget keep the mechanics tests fast.
    fn quick(share: f64, seed: u64) -> ToyConfig {
        ToyConfig {
            n_entities: 100,
            n_train: 3_000,
            language_label_variance: share,
            popularity_log_range: 1.0,
            steps: 800,
            seed,
            ..ToyConfig::default()
        }
    }

    // A scaled-down variant of the default table settings for tests that
    // need the blocking phenomenon itself rather than the exact table.
    fn small_table(share: f64, seed: u64) -> ToyConfig {
        ToyConfig {
            n_entities: 200,
            n_train: 4_000,
            language_label_variance: share,
            steps: 6_400,
            seed,
            ..ToyConfig::default()
        }
    }

    fn lang_label_table(examples: &[ToyExample]) -> Vec<Vec<u64>> {
        let mut t = vec![vec![0u64; 2]; 2];
        for ex in examples {
            t[ex.lang as usize][ex.label as usize] += 1;
        }
        t
    }

    fn empirical_share(examples: &[ToyExample]) -> f64 {
        let t = lang_label_table(examples);
        let n = examples.len() as f64;
        let p11 = t[1][1] as f64 / n;
        let p_l = (t[1][0] + t[1][1]) as f64 / n;
        let p_y = (t[0][1] + t[1][1]) as f64 / n;
        let cov = p11 - p_l * p_y;
        let corr = cov / (p_l * (1.0 - p_l) * p_y * (1.0 - p_y)).sqrt();
        corr * corr
    }

    #[test]
    fn zero_share_train_set_passes_independence_test() {
        let config = ToyConfig {
            n_entities: 200,
            n_train: 10_000,
            language_label_variance: 0.0,
            seed: 3,
            ..ToyConfig::default()
        };
        let data = build_toy_data(&config).unwrap();
        let stat = chi_square_independence(&lang_label_table(&data.train)).unwrap();
        assert!(stat < CHI2_1DF_P01, "chi-square {stat} should be insignificant");
    }

    #[test]
    fn empirical_share_matches_config_within_one_percent() {
        for &(share, seed) in &[(0.0, 1u64), (0.05, 2), (0.10, 3)] {
            let config = ToyConfig {
                n_entities: 200,
                n_train: 100_000,
                language_label_variance: share,
                seed,
                ..ToyConfig::default()
            };
            let data = build_toy_data(&config).unwrap();
            let emp = empirical_share(&data.train);
            assert!(
                (emp - share).abs() <= 0.01,
                "share {share}: empirical {emp}"
            );
        }
    }

    #[test]
    fn labels_track_entities_and_holdout_pairs_are_unseen() {
        let data = build_toy_data(&quick(0.10, 5)).unwrap();
        let all = data
            .train
            .iter()
            .chain(&data.id_test)
            .chain(&data.ood_test);
        for ex in all {
            assert_eq!(ex.label, ToyConfig::label_of(ex.entity as usize));
        }
        let train_pairs: std::collections::HashSet<(u8, u32)> =
            data.train.iter().map(|e| (e.lang, e.entity)).collect();
        for ex in &data.ood_test {
            assert!(!train_pairs.contains(&(ex.lang, ex.entity)));
        }
        // Every entity is homed somewhere and held out in the other language.
        assert_eq!(data.id_test.len(), data.config.n_entities);
        assert_eq!(data.ood_test.len(), data.config.n_entities);
        for (id, ood) in data.id_test.iter().zip(&data.ood_test) {
            assert_eq!(id.lang, 1 - ood.lang);
            assert_eq!(id.entity, ood.entity);
        }
        // Languages home equal numbers of entities.
        let lang0 = data.home_lang.iter().filter(|&&l| l == 0).count();
        assert_eq!(lang0 * 2, data.config.n_entities);
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let mut c = quick(0.0, 0);
        c.n_entities = 7;
        assert!(matches!(build_toy_data(&c), Err(Error::Config(_))));
        let mut c = quick(1.0, 0);
        c.n_entities = 40;
        assert!(matches!(build_toy_data(&c), Err(Error::Config(_))));
        let mut c = quick(0.0, 0);
        c.language_feature_scale = 0.0;
        assert!(matches!(build_toy_data(&c), Err(Error::Config(_))));
        // A share the entity count cannot represent: with 6 entities the
        // achievable shares are quantized in steps far coarser than 1%.
        let c = ToyConfig {
            n_entities: 6,
            language_label_variance: 0.5,
            ..ToyConfig::default()
        };
        assert!(matches!(build_toy_data(&c), Err(Error::Config(_))));
    }

    #[test]
    fn training_fits_the_train_set_perfectly() {
        for log_loss in [false, true] {
            let config = ToyConfig {
                log_loss,
                ..quick(0.05, 7)
            };
            let (_, eval) = run_toy(&config).unwrap();
            assert_eq!(eval.train_accuracy, 1.0, "log_loss={log_loss}");
            assert_eq!(eval.id_accuracy, 1.0, "log_loss={log_loss}");
        }
    }

    #[test]
    fn zero_share_generalizes_to_unseen_pairs() {
        let (_, eval) = run_toy(&quick(0.0, 11)).unwrap();
        assert_eq!(eval.ood_accuracy, 1.0);
    }

    #[test]
    fn ood_accuracy_declines_as_language_explains_more_variance() {
        let base = small_table(0.0, 0);
        let rows = toy_table(&base, &[0.0, 0.05, 0.10], 3).unwrap();
        assert!(rows[0].ood_accuracy >= rows[1].ood_accuracy);
        assert!(rows[1].ood_accuracy >= rows[2].ood_accuracy);
        assert!(
            rows[0].ood_accuracy > rows[2].ood_accuracy,
            "{} vs {}",
            rows[0].ood_accuracy,
            rows[2].ood_accuracy
        );
        for r in &rows {
            assert_eq!(r.train_accuracy, 1.0, "share {}", r.language_label_variance);
        }
    }

    #[test]
    fn joint_feature_rescaling_preserves_train_predictions() {
        let base = quick(0.10, 13);
        let scaled = ToyConfig {
            language_feature_scale: base.language_feature_scale * 2.0,
            entity_feature_scale: base.entity_feature_scale * 2.0,
            learning_rate: base.learning_rate / 4.0,
            ..base.clone()
        };
        let data_a = build_toy_data(&base).unwrap();
        let data_b = build_toy_data(&scaled).unwrap();
        // Identical draws: the sampling seed does not depend on scales.
        assert_eq!(
            data_a.train.iter().map(|e| (e.lang, e.entity)).collect::<Vec<_>>(),
            data_b.train.iter().map(|e| (e.lang, e.entity)).collect::<Vec<_>>()
        );
        let model_a = train_toy(&data_a).unwrap();
        let model_b = train_toy(&data_b).unwrap();
        for (ex_a, ex_b) in data_a.train.iter().zip(&data_b.train) {
            assert_eq!(model_a.predict(ex_a), model_b.predict(ex_b));
            let (za, zb) = (model_a.logit(ex_a), model_b.logit(ex_b));
            assert!((za - zb).abs() <= 1e-9 * za.abs().max(1.0), "{za} vs {zb}");
        }
    }

    #[test]
    fn weaker_language_feature_restores_generalization() {
        let base = small_table(0.10, 0);
        let rows = toy_scale_sweep(&base, &[1.0, 0.5, 0.18], 3).unwrap();
        assert!(
            rows[2].ood_accuracy > rows[0].ood_accuracy,
            "scale 0.18 -> {}, scale 1 -> {}",
            rows[2].ood_accuracy,
            rows[0].ood_accuracy
        );
    }

    #[test]
    fn same_seed_reruns_are_bitwise_identical() {
        let config = quick(0.05, 21);
        let (model_a, eval_a) = run_toy(&config).unwrap();
        let (model_b, eval_b) = run_toy(&config).unwrap();
        assert_eq!(model_a.weights, model_b.weights);
        assert_eq!(eval_a, eval_b);
    }

    #[test]
    fn csv_emitters_have_headers_and_rows() {
        let rows = vec![ToyTableRow {
            language_label_variance: 0.05,
            train_accuracy: 1.0,
            id_accuracy: 1.0,
            ood_accuracy: 0.8,
        }];
        let csv = toy_table_csv(&rows);
        assert!(csv.starts_with("language_label_variance,"));
        assert!(csv.contains("0.05,1,1,0.8"));
        let sweep = vec![ToyScaleRow {
            language_feature_scale: 0.5,
            train_accuracy: 1.0,
            ood_accuracy: 0.9,
        }];
        let csv = toy_scale_csv(&sweep);
        assert!(csv.contains("0.5,1,0.9"));
    }

    /// Prints the seed-averaged reference table at the default settings.
    #[test]
    #[ignore]
    fn print_reference_table() {
        let base = ToyConfig::default();
        let rows = toy_table(&base, &DEFAULT_TABLE_SHARES, 5).unwrap();
        println!("{}", toy_table_csv(&rows));
        let sweep = toy_scale_sweep(
            &ToyConfig {
                language_label_variance: 0.10,
                ..base
            },
            &DEFAULT_SWEEP_SCALES,
            5,
        )
        .unwrap();
        println!("{}", toy_scale_csv(&sweep));
    }
}
