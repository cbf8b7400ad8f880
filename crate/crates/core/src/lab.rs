//! Experiment orchestration: a single TOML-serialisable config drives the
//! whole pipeline (knowledge graph, languages, corpus, vocabulary, training,
//! per-checkpoint metrics), and a sweep spec expands into a grid of such
//! configs run into content-addressed directories.
//!
//! Layout of a run directory:
//!
//! ```text
//! <out>/runs/<name>-<hash12>/
//!   config.toml        materialised experiment config
//!   status.json        running | complete | failed, with stage and error
//!   kg/                knowledge graph manifest + events
//!   lang/              language pair manifest + templates.tsv
//!   corpus/            train/id_test/ood_test splits + corpus manifest
//!   vocab.txt          tokenizer vocabulary
//!   model.json         model config with vocabulary size resolved
//!   checkpoints/step_NNNNNN/   params, optimiser state, meta
//!   metrics.json       RunRecord: one metrics row per checkpoint
//!   unification.csv    step-by-step unification and accuracy columns
//!   footprints.csv     step-by-step language/fact regression columns
//!   id_eval.json/.csv, ood_eval.json/.csv   final-model evaluation reports
//!   plaid.csv/.png     final-model similarity matrix figure (+ exact values)
//! ```
//!
//! Interrupted runs resume from the latest intact checkpoint; a checkpoint
//! that fails its integrity check aborts the run with an error instead of
//! silently retraining. Completed runs are not repeated unless forced.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{build_splits, Casing, Corpus, Statement, Variant};
use crate::corpus::CorpusConfig;
use crate::error::{Error, Result};
use crate::evalrec::{evaluate, shared_name_error_fraction};
use crate::ioutil;
use crate::kg::{Kg, KgConfig};
use crate::nanoformer::{
    default_checkpoint_schedule, load_checkpoint, save_checkpoint, Model, ModelConfig,
    TrainConfig, Trainer,
};
use crate::plot::{save_line_plot, save_scatter_plot, ScatterPoint, Series};
use crate::reprlab::{
    activation_repr, checkerboard_contrast, gradient_repr, plaid_emit, similarity_matrix,
    ReprSpec,
};
use crate::rng::child_seed;
use crate::synthlang::{LanguageConfig, LanguagePair};
use crate::tok::{TokenizerMode, Vocabulary};
use crate::unify::{self, Baseline, CheckpointMetrics, RunRecord};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "XLPETRI_OUT";
/// Output root used when neither the config nor the environment names one.
pub const DEFAULT_OUT_DIR: &str = "xlpetri-out";
pub const STATUS_FILE: &str = "status.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Which metrics to compute at each checkpoint, and on how many examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricSpec {
    /// Unification score over hidden activations of parallel facts.
    pub activation_unification: bool,
    /// Unification score over projected per-example gradients.
    pub gradient_unification: bool,
    /// Linear language/fact variance shares of the evaluation activations.
    pub footprints: bool,
    /// Within-minus-cross language similarity contrast of the evaluation
    /// activations.
    pub checkerboard: bool,
    /// Fraction of wrong answers that belong to a name-sharing entity.
    pub shared_name: bool,
    /// Denominator convention for the unification score.
    pub unification_baseline: Baseline,
    /// Cap on representation rows per set (parallel set and evaluation set).
    pub max_repr_examples: usize,
    /// Random-projection width for gradient representations; `None` keeps
    /// exact gradients (slow and memory-hungry).
    pub gradient_projection_dim: Option<usize>,
    /// Emit the similarity-matrix figure for the final checkpoint.
    pub plaid_final: bool,
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec {
            activation_unification: true,
            gradient_unification: true,
            footprints: true,
            checkerboard: true,
            shared_name: false,
            unification_baseline: Baseline::SameFact,
            max_repr_examples: 160,
            gradient_projection_dim: Some(2048),
            plaid_final: true,
        }
    }
}

/// Everything one run needs. Stage seeds all derive from `master_seed`, so a
/// single integer reproduces the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Run-directory prefix; keep it to `[a-z0-9_-]`.
    pub name: String,
    pub master_seed: u64,
    /// Output root; `None` falls back to `$XLPETRI_OUT`, then "xlpetri-out".
    pub out_dir: Option<PathBuf>,
    pub tokenizer: TokenizerMode,
    pub kg: KgConfig,
    pub lang: LanguageConfig,
    pub corpus: CorpusConfig,
    /// `vocab_size` and `max_seq_len` here are placeholders; both are
    /// resolved from the built vocabulary and corpus before training and the
    /// resolved config is stored in `model.json`.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub metrics: MetricSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "exp".into(),
            master_seed: 0,
            out_dir: None,
            tokenizer: TokenizerMode::Word,
            kg: KgConfig::default(),
            lang: LanguageConfig::default(),
            corpus: CorpusConfig::default(),
            model: ModelConfig {
                d_model: 48,
                n_layers: 2,
                n_heads: 4,
                d_ff: 192,
                max_seq_len: 40,
                ..ModelConfig::default()
            },
            train: TrainConfig {
                steps: 800,
                batch_size: 32,
                lr: 1e-3,
                warmup_steps: 80,
                ..TrainConfig::default()
            },
            metrics: MetricSpec::default(),
        }
    }
}

impl ExperimentConfig {
    /// Small end-to-end profile: 50 entities, 2 templates per fact, 200
    /// steps. Completes in seconds on one CPU core.
    pub fn smoke() -> ExperimentConfig {
        ExperimentConfig {
            name: "smoke".into(),
            kg: KgConfig {
                population: 50,
                n_first_names: 12,
                n_last_names: 12,
                n_cities: 12,
                ..KgConfig::default()
            },
            lang: LanguageConfig {
                n_templates_per_fact: 2,
                literal_pool_size: 60,
                ..LanguageConfig::default()
            },
            corpus: CorpusConfig::default(),
            model: ModelConfig {
                d_model: 32,
                n_layers: 2,
                n_heads: 4,
                d_ff: 128,
                max_seq_len: 40,
                ..ModelConfig::default()
            },
            train: TrainConfig {
                steps: 200,
                batch_size: 32,
                lr: 1e-3,
                warmup_steps: 20,
                checkpoint_schedule: vec![50, 100, 150, 200],
                ..TrainConfig::default()
            },
            metrics: MetricSpec {
                max_repr_examples: 80,
                gradient_projection_dim: Some(512),
                ..MetricSpec::default()
            },
            ..ExperimentConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
        {
            return Err(Error::Config(format!(
                "experiment name {:?} must be non-empty [a-z0-9_-]",
                self.name
            )));
        }
        if self.metrics.max_repr_examples < 4 {
            return Err(Error::Config(
                "metrics.max_repr_examples must be at least 4".into(),
            ));
        }
        if let Some(d) = self.metrics.gradient_projection_dim {
            if d == 0 {
                return Err(Error::Config(
                    "metrics.gradient_projection_dim must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Copy with every stage seed derived from the master seed and the
    /// checkpoint schedule filled in (always ending at the final step).
    /// The seeds stored in the sub-configs are overwritten, never read.
    /// Derived seeds are masked to 63 bits so the config stays within
    /// TOML's integer range.
    pub fn materialized(&self) -> ExperimentConfig {
        const TOML_SAFE: u64 = i64::MAX as u64;
        let mut cfg = self.clone();
        cfg.kg.seed = child_seed(cfg.master_seed, "kg") & TOML_SAFE;
        cfg.lang.seed = child_seed(cfg.master_seed, "lang") & TOML_SAFE;
        cfg.corpus.seed = child_seed(cfg.master_seed, "corpus") & TOML_SAFE;
        cfg.model.init_seed = child_seed(cfg.master_seed, "model-init") & TOML_SAFE;
        cfg.train.shuffle_seed = child_seed(cfg.master_seed, "train-shuffle") & TOML_SAFE;
        if cfg.train.checkpoint_schedule.is_empty() {
            cfg.train.checkpoint_schedule = default_checkpoint_schedule(cfg.train.steps);
        }
        cfg.train.checkpoint_schedule.push(cfg.train.steps);
        cfg.train.checkpoint_schedule.sort_unstable();
        cfg.train.checkpoint_schedule.dedup();
        cfg
    }

    /// Hash of the materialised config with the output directory blanked, so
    /// the same experiment hashes identically on any machine.
    pub fn config_hash(&self) -> Result<String> {
        let mut cfg = self.materialized();
        cfg.out_dir = None;
        Ok(ioutil::sha256_hex(&serde_json::to_vec(&cfg)?))
    }

    pub fn run_id(&self) -> Result<String> {
        Ok(format!("{}-{}", self.name, &self.config_hash()?[..12]))
    }

    pub fn out_root(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| {
            std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
        })
    }

    pub fn run_dir(&self) -> Result<PathBuf> {
        Ok(self.out_root().join("runs").join(self.run_id()?))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("config to TOML: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        Ok(toml::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Kg,
    Language,
    Corpus,
    Vocabulary,
    Train,
    Report,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunState {
    Running,
    Complete,
    Failed,
}

/// Lifecycle record written to `status.json` at every stage transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub state: RunState,
    pub stage: Stage,
    pub run_id: String,
    pub config_hash: String,
    pub error: Option<String>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_status(path: &Path, status: &RunStatus) -> Result<()> {
    ioutil::write_json_pretty(path, status)
}

/// Run one experiment end to end, or return the stored record if this exact
/// config already completed (unless `force`). Interrupted runs pick up from
/// the latest intact checkpoint; corrupted checkpoints surface as integrity
/// errors rather than silent retraining.
pub fn run_experiment(config: &ExperimentConfig, force: bool) -> Result<RunRecord> {
    run_experiment_inner(config, force, None)
}

fn run_experiment_inner(
    config: &ExperimentConfig,
    force: bool,
    abort_after_step: Option<usize>,
) -> Result<RunRecord> {
    config.validate()?;
    let cfg = config.materialized();
    let hash = cfg.config_hash()?;
    let run_id = cfg.run_id()?;
    let dir = cfg.run_dir()?;
    let status_path = dir.join(STATUS_FILE);

    if status_path.exists() {
        let status: RunStatus = ioutil::read_json(&status_path)?;
        if status.config_hash != hash {
            return Err(Error::Integrity(format!(
                "run directory {} belongs to config {} but this config hashes to {}",
                dir.display(),
                status.config_hash,
                hash
            )));
        }
        if status.state == RunState::Complete && !force {
            return ioutil::read_json(&dir.join(METRICS_FILE));
        }
    }

    std::fs::create_dir_all(&dir)?;
    ioutil::write_string_atomic(&dir.join(CONFIG_FILE), &cfg.to_toml()?)?;
    let mut status = RunStatus {
        state: RunState::Running,
        stage: Stage::Kg,
        run_id: run_id.clone(),
        config_hash: hash,
        error: None,
        started_unix: unix_now(),
        finished_unix: None,
    };
    write_status(&status_path, &status)?;

    match run_stages(&cfg, &dir, &mut status, &status_path, abort_after_step) {
        Ok(record) => {
            status.state = RunState::Complete;
            status.stage = Stage::Done;
            status.finished_unix = Some(unix_now());
            write_status(&status_path, &status)?;
            Ok(record)
        }
        Err(e) => {
            status.state = RunState::Failed;
            status.error = Some(e.to_string());
            status.finished_unix = Some(unix_now());
            let _ = write_status(&status_path, &status);
            Err(e)
        }
    }
}

/// Load a stage artifact if its directory already holds one, otherwise build
/// and save it. Loading a half-written artifact fails loudly, which is the
/// intended behaviour: the error names the file and the run stays failed.
fn load_or_build<T>(
    exists: bool,
    load: impl FnOnce() -> Result<T>,
    build: impl FnOnce() -> Result<T>,
) -> Result<T> {
    if exists {
        load()
    } else {
        build()
    }
}

fn run_stages(
    cfg: &ExperimentConfig,
    dir: &Path,
    status: &mut RunStatus,
    status_path: &Path,
    abort_after_step: Option<usize>,
) -> Result<RunRecord> {
    let stage = |s: Stage, status: &mut RunStatus| -> Result<()> {
        status.stage = s;
        write_status(status_path, status)
    };

    stage(Stage::Kg, status)?;
    let kg_dir = dir.join("kg");
    let kg = load_or_build(
        kg_dir.join("kg.manifest.json").exists(),
        || Kg::load(&kg_dir),
        || {
            let kg = Kg::generate(&cfg.kg)?;
            kg.save(&kg_dir)?;
            Ok(kg)
        },
    )?;

    stage(Stage::Language, status)?;
    let lang_dir = dir.join("lang");
    let langs = load_or_build(
        lang_dir.join("lang.manifest.json").exists(),
        || LanguagePair::load(&lang_dir),
        || {
            let langs = LanguagePair::generate(&cfg.lang)?;
            langs.save(&lang_dir)?;
            Ok(langs)
        },
    )?;

    stage(Stage::Corpus, status)?;
    let corpus_dir = dir.join("corpus");
    let corpus = load_or_build(
        corpus_dir.join("corpus.manifest.json").exists(),
        || Corpus::load(&corpus_dir),
        || {
            let corpus = build_splits(&kg, &langs, &cfg.corpus)?;
            corpus.save(&corpus_dir)?;
            Ok(corpus)
        },
    )?;

    stage(Stage::Vocabulary, status)?;
    let vocab_path = dir.join("vocab.txt");
    let vocab = load_or_build(
        vocab_path.exists(),
        || Vocabulary::load(&vocab_path),
        || {
            let vocab = Vocabulary::build(
                &[&corpus.train, &corpus.id_test, &corpus.ood_test],
                cfg.tokenizer,
            );
            vocab.save(&vocab_path)?;
            Ok(vocab)
        },
    )?;

    let data: Vec<_> = corpus
        .train
        .iter()
        .map(|s| vocab.encode(s))
        .collect::<Result<_>>()?;
    let mut max_len = 0usize;
    for split in [&corpus.train, &corpus.id_test, &corpus.ood_test] {
        for s in split {
            max_len = max_len.max(vocab.encode(s)?.ids.len());
        }
    }
    let mut model_config = cfg.model.clone();
    model_config.vocab_size = vocab.len();
    model_config.max_seq_len = max_len;
    ioutil::write_json_pretty(&dir.join("model.json"), &model_config)?;

    stage(Stage::Train, status)?;
    let ckpt_root = dir.join("checkpoints");
    let metrics_path = dir.join(METRICS_FILE);
    let (mut trainer, resumed_from) = match latest_checkpoint(&ckpt_root)? {
        Some((step, cdir)) => {
            let (model, opt, meta) = load_checkpoint::<f32>(&cdir)?;
            if meta.model_config != model_config {
                return Err(Error::Integrity(format!(
                    "checkpoint at {} was written under a different model config",
                    cdir.display()
                )));
            }
            if meta.train_config != cfg.train {
                return Err(Error::Integrity(format!(
                    "checkpoint at {} was written under a different train config",
                    cdir.display()
                )));
            }
            (
                Trainer::resume(model, opt, step, data, cfg.train.clone())?,
                Some(step),
            )
        }
        None => {
            let model = Model::<f32>::init(&model_config)?;
            (Trainer::new(model, data, cfg.train.clone())?, None)
        }
    };

    let uni_sel = parallel_statements(&corpus.train, cfg.metrics.max_repr_examples);
    let (eval_sel, eval_boundaries) = eval_selection(&corpus, cfg.metrics.max_repr_examples)?;
    let ctx = MetricCtx {
        vocab: &vocab,
        corpus: &corpus,
        kg: &kg,
        spec: &cfg.metrics,
        uni_sel: &uni_sel,
        eval_sel: &eval_sel,
    };

    let mut record = if metrics_path.exists() {
        let record: RunRecord = ioutil::read_json(&metrics_path)?;
        if record.run_id != status.run_id {
            return Err(Error::Integrity(format!(
                "metrics file belongs to run {:?}, expected {:?}",
                record.run_id, status.run_id
            )));
        }
        record
    } else {
        RunRecord {
            run_id: status.run_id.clone(),
            celebrity_fraction: cfg.corpus.celebrity_fraction,
            language_split: cfg.corpus.language_split,
            variant: cfg.corpus.variant,
            casing: cfg.corpus.casing,
            checkpoints: Vec::new(),
        }
    };

    if let Some(step) = resumed_from {
        record.checkpoints.retain(|r| r.step <= step);
        if !record.checkpoints.iter().any(|r| r.step == step) {
            // The previous process died between saving this checkpoint and
            // appending its metrics row; the training loss of that step is
            // gone, everything else is recomputed from the checkpoint.
            let row = checkpoint_row(&trainer.model, step, None, &ctx)?;
            record.checkpoints.push(row);
            record.checkpoints.sort_by_key(|r| r.step);
            ioutil::write_json_pretty(&metrics_path, &record)?;
        }
    }

    {
        let rec = &mut record;
        trainer.run(|tr, step| {
            save_checkpoint(
                &ckpt_root.join(format!("step_{step:06}")),
                &tr.model,
                &tr.opt,
                &tr.config,
                step,
            )?;
            if !rec.checkpoints.iter().any(|r| r.step == step) {
                let loss = tr.history.iter().rev().find(|s| s.step == step).map(|s| s.loss);
                let row = checkpoint_row(&tr.model, step, loss, &ctx)?;
                rec.checkpoints.push(row);
                rec.checkpoints.sort_by_key(|r| r.step);
                ioutil::write_json_pretty(&metrics_path, rec)?;
            }
            if abort_after_step == Some(step) {
                return Err(Error::Run(format!("synthetic interruption at step {step}")));
            }
            Ok(())
        })?;
    }
    record.validate()?;

    stage(Stage::Report, status)?;
    let final_id = evaluate(&trainer.model, &vocab, &corpus.id_test, "id_test")?;
    let final_ood = evaluate(&trainer.model, &vocab, &corpus.ood_test, "ood_test")?;
    final_id.save(dir, "id_eval")?;
    final_ood.save(dir, "ood_eval")?;
    ioutil::write_string_atomic(&dir.join("unification.csv"), &unify::unification_csv(&record))?;
    ioutil::write_string_atomic(&dir.join("footprints.csv"), &unify::footprints_csv(&record))?;
    if cfg.metrics.plaid_final && eval_sel.len() >= 2 {
        let set = activation_repr(
            &trainer.model,
            &vocab,
            &eval_sel,
            &ReprSpec::activation(),
            trainer.steps_done,
        )?;
        let sim = similarity_matrix(&set)?;
        plaid_emit(
            &sim,
            &set.meta,
            &eval_boundaries,
            &dir.join("plaid.csv"),
            &dir.join("plaid.png"),
        )?;
    }
    ioutil::write_json_pretty(&metrics_path, &record)?;
    Ok(record)
}

/// Newest step directory under `checkpoints/`, by step number. Entries that
/// do not parse as `step_NNNNNN` are ignored (for example leftover temp
/// files); a malformed checkpoint inside a well-named directory is NOT
/// ignored, it fails the subsequent load.
fn latest_checkpoint(root: &Path) -> Result<Option<(usize, PathBuf)>> {
    if !root.exists() {
        return Ok(None);
    }
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in std::fs::read_dir(root)? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(step) = name
            .to_str()
            .and_then(|n| n.strip_prefix("step_"))
            .and_then(|n| n.parse::<usize>().ok())
        else {
            continue;
        };
        if best.as_ref().map(|(s, _)| step > *s).unwrap_or(true) {
            best = Some((step, entry.path()));
        }
    }
    Ok(best)
}

/// Training statements of facts that appear in both languages (the parallel
/// "celebrity" block), whole facts at a time, up to `cap` rows. Returns an
/// empty vector when the corpus has no parallel facts.
fn parallel_statements(train: &[Statement], cap: usize) -> Vec<Statement> {
    let mut by_fact: std::collections::BTreeMap<u32, Vec<&Statement>> =
        std::collections::BTreeMap::new();
    for s in train.iter().filter(|s| s.is_celebrity) {
        by_fact.entry(s.fact_id).or_default().push(s);
    }
    let mut out = Vec::new();
    for (_, group) in by_fact {
        let has_both = group.iter().any(|s| s.lang == 0) && group.iter().any(|s| s.lang == 1);
        if !has_both {
            continue;
        }
        if !out.is_empty() && out.len() + group.len() > cap {
            break;
        }
        out.extend(group.into_iter().cloned());
    }
    out
}

/// Balanced evaluation selection for checkerboard/footprint metrics and the
/// similarity figure: held-out statements grouped by (fact type, attribute)
/// with both languages present, in figure order, plus the group boundaries.
/// Cells contribute two rows per language where possible so that
/// within-language pairs exist (the contrast is undefined without them);
/// when no cell is that deep it falls back to one row per language, which
/// still draws the figure.
pub fn eval_selection(corpus: &Corpus, cap: usize) -> Result<(Vec<Statement>, Vec<usize>)> {
    let pool: Vec<&Statement> = corpus.id_test.iter().chain(corpus.ood_test.iter()).collect();
    let mut cells: std::collections::BTreeMap<(u8, &str), [Vec<usize>; 2]> =
        std::collections::BTreeMap::new();
    for (i, s) in pool.iter().enumerate() {
        cells.entry((s.fact_type as u8, s.attribute.as_str())).or_default()[s.lang as usize]
            .push(i);
    }
    let per_lang = if cells.values().any(|l| l[0].len() >= 2 && l[1].len() >= 2) {
        2
    } else {
        1
    };
    let n_cells = (cap / (2 * per_lang)).max(1);
    let mut sel: Vec<Statement> = Vec::new();
    let mut boundaries = Vec::new();
    for langs in cells.values() {
        if langs[0].len() < per_lang || langs[1].len() < per_lang {
            continue;
        }
        if boundaries.len() == n_cells {
            break;
        }
        boundaries.push(sel.len());
        for lang_rows in langs {
            for &i in lang_rows.iter().take(per_lang) {
                sel.push(pool[i].clone());
            }
        }
    }
    if sel.len() < 2 {
        return Ok((Vec::new(), Vec::new()));
    }
    Ok((sel, boundaries))
}

struct MetricCtx<'a> {
    vocab: &'a Vocabulary,
    corpus: &'a Corpus,
    kg: &'a Kg,
    spec: &'a MetricSpec,
    uni_sel: &'a [Statement],
    eval_sel: &'a [Statement],
}

/// Metrics that are undefined on this data (for example unification with no
/// parallel facts) become `None`; real faults propagate.
fn opt_metric(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn checkpoint_row(
    model: &Model<f32>,
    step: usize,
    train_loss: Option<f64>,
    ctx: &MetricCtx,
) -> Result<CheckpointMetrics> {
    let id = evaluate(model, ctx.vocab, &ctx.corpus.id_test, "id_test")?;
    let ood = evaluate(model, ctx.vocab, &ctx.corpus.ood_test, "ood_test")?;
    let mut row = CheckpointMetrics {
        step,
        id_accuracy: id.accuracy,
        ood_accuracy: ood.accuracy,
        id_label_probability: id.mean_label_probability,
        ood_label_probability: ood.mean_label_probability,
        unification_activation: None,
        unification_gradient: None,
        language_r2: None,
        fact_r2: None,
        checkerboard_contrast: None,
        shared_name_error_fraction: None,
        train_loss,
    };
    if !ctx.uni_sel.is_empty() {
        if ctx.spec.activation_unification {
            let set = activation_repr(model, ctx.vocab, ctx.uni_sel, &ReprSpec::activation(), step)?;
            row.unification_activation =
                opt_metric(unify::unification_score(&set, ctx.spec.unification_baseline))?;
        }
        if ctx.spec.gradient_unification {
            let mut spec = ReprSpec::gradient();
            spec.projection_dim = ctx.spec.gradient_projection_dim;
            let set = gradient_repr(model, ctx.vocab, ctx.uni_sel, &spec, step)?;
            row.unification_gradient =
                opt_metric(unify::unification_score(&set, ctx.spec.unification_baseline))?;
        }
    }
    if (ctx.spec.footprints || ctx.spec.checkerboard) && ctx.eval_sel.len() >= 2 {
        let set = activation_repr(model, ctx.vocab, ctx.eval_sel, &ReprSpec::activation(), step)?;
        if ctx.spec.footprints {
            row.language_r2 = opt_metric(unify::feature_footprint_r2(
                &set.rows,
                &unify::language_labels(&set.meta),
            ))?;
            row.fact_r2 = opt_metric(unify::feature_footprint_r2(
                &set.rows,
                &unify::fact_labels(&set.meta),
            ))?;
        }
        if ctx.spec.checkerboard {
            let sim = similarity_matrix(&set)?;
            row.checkerboard_contrast = match checkerboard_contrast(&sim, &set.meta) {
                Ok(report) => Some(report.value),
                Err(Error::Degenerate(_)) => None,
                Err(e) => return Err(e),
            };
        }
    }
    if ctx.spec.shared_name {
        row.shared_name_error_fraction = opt_metric(shared_name_error_fraction(&ood, ctx.kg))?;
    }
    Ok(row)
}

/// Artifacts of a stored run, reopened for evaluation or analysis.
pub struct RunArtifacts {
    pub config: ExperimentConfig,
    pub kg: Kg,
    pub corpus: Corpus,
    pub vocab: Vocabulary,
    pub model: Model<f32>,
    /// Step of the loaded checkpoint.
    pub step: usize,
}

/// Reopen a run directory at the given checkpoint step (default: latest).
pub fn open_run(dir: &Path, step: Option<usize>) -> Result<RunArtifacts> {
    let config = ExperimentConfig::from_toml(&std::fs::read_to_string(dir.join(CONFIG_FILE))?)?;
    let kg = Kg::load(&dir.join("kg"))?;
    let corpus = Corpus::load(&dir.join("corpus"))?;
    let vocab = Vocabulary::load(&dir.join("vocab.txt"))?;
    let cdir = match step {
        Some(s) => {
            let d = dir.join("checkpoints").join(format!("step_{s:06}"));
            if !d.exists() {
                return Err(Error::Input(format!("no checkpoint at step {s} in {}", dir.display())));
            }
            (s, d)
        }
        None => latest_checkpoint(&dir.join("checkpoints"))?.ok_or_else(|| {
            Error::Input(format!("no checkpoints under {}", dir.display()))
        })?,
    };
    let (model, _opt, _meta) = load_checkpoint::<f32>(&cdir.1)?;
    Ok(RunArtifacts { config, kg, corpus, vocab, model, step: cdir.0 })
}

/// Assemble model-selection inputs for a set of completed runs: final ID
/// accuracy and unification from the run records, per-example OOD flags from
/// the stored final evaluation reports under `out_root/runs/<run_id>/`.
pub fn selection_inputs(
    records: &[RunRecord],
    out_root: &Path,
) -> Result<Vec<unify::SelectionInputs>> {
    records
        .iter()
        .map(|r| {
            let last = r.final_checkpoint()?;
            let report: crate::evalrec::EvalReport =
                ioutil::read_json(&out_root.join("runs").join(&r.run_id).join("ood_eval.json"))?;
            Ok(unify::SelectionInputs {
                run_id: r.run_id.clone(),
                id_performance: last.id_accuracy,
                ood_flags: report.records.iter().map(|x| x.correct).collect(),
                unification: last.unification_activation.ok_or_else(|| {
                    Error::Input(format!("run {} carries no unification score", r.run_id))
                })?,
            })
        })
        .collect()
}

/// Grid of experiment configs: each axis is either `None` (inherit the base
/// value) or a non-empty list of values; the product of all axes is run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    #[serde(default = "default_sweep_name")]
    pub name: String,
    #[serde(default)]
    pub celebrity_fractions: Option<Vec<f64>>,
    #[serde(default)]
    pub language_splits: Option<Vec<(u32, u32)>>,
    #[serde(default)]
    pub variants: Option<Vec<Variant>>,
    #[serde(default)]
    pub casings: Option<Vec<Casing>>,
    #[serde(default)]
    pub tokenizers: Option<Vec<TokenizerMode>>,
    #[serde(default)]
    pub template_counts: Option<Vec<usize>>,
    /// Master seeds; each grid cell runs once per seed.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// Worker threads for independent sweep points.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_sweep_name() -> String {
    "sweep".into()
}

fn default_parallelism() -> usize {
    1
}

impl SweepSpec {
    pub fn new(base: ExperimentConfig) -> SweepSpec {
        SweepSpec {
            base,
            name: default_sweep_name(),
            celebrity_fractions: None,
            language_splits: None,
            variants: None,
            casings: None,
            tokenizers: None,
            template_counts: None,
            seeds: None,
            parallelism: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
        {
            return Err(Error::Config(format!(
                "sweep name {:?} must be non-empty [a-z0-9_-]",
                self.name
            )));
        }
        fn check<T>(axis: &Option<Vec<T>>, name: &str) -> Result<()> {
            if let Some(v) = axis {
                if v.is_empty() {
                    return Err(Error::Config(format!("sweep axis {name} is empty")));
                }
            }
            Ok(())
        }
        check(&self.celebrity_fractions, "celebrity_fractions")?;
        check(&self.language_splits, "language_splits")?;
        check(&self.variants, "variants")?;
        check(&self.casings, "casings")?;
        check(&self.tokenizers, "tokenizers")?;
        check(&self.template_counts, "template_counts")?;
        check(&self.seeds, "seeds")?;
        if self.parallelism == 0 {
            return Err(Error::Config("sweep parallelism must be at least 1".into()));
        }
        Ok(())
    }

    /// Expand the grid into concrete configs, one per point, named after
    /// their axis values.
    pub fn expand(&self) -> Result<Vec<ExperimentConfig>> {
        self.validate()?;
        let fractions = self
            .celebrity_fractions
            .clone()
            .unwrap_or_else(|| vec![self.base.corpus.celebrity_fraction]);
        let splits = self
            .language_splits
            .clone()
            .unwrap_or_else(|| vec![self.base.corpus.language_split]);
        let variants = self.variants.clone().unwrap_or_else(|| vec![self.base.corpus.variant]);
        let casings = self.casings.clone().unwrap_or_else(|| vec![self.base.corpus.casing]);
        let tokenizers = self.tokenizers.clone().unwrap_or_else(|| vec![self.base.tokenizer]);
        let templates = self
            .template_counts
            .clone()
            .unwrap_or_else(|| vec![self.base.lang.n_templates_per_fact]);
        let seeds = self.seeds.clone().unwrap_or_else(|| vec![self.base.master_seed]);

        let mut points = Vec::new();
        for &fraction in &fractions {
            for &split in &splits {
                for &variant in &variants {
                    for &casing in &casings {
                        for &tokenizer in &tokenizers {
                            for &n_templates in &templates {
                                for &seed in &seeds {
                                    let mut cfg = self.base.clone();
                                    cfg.corpus.celebrity_fraction = fraction;
                                    cfg.corpus.language_split = split;
                                    cfg.corpus.variant = variant;
                                    cfg.corpus.casing = casing;
                                    cfg.tokenizer = tokenizer;
                                    cfg.lang.n_templates_per_fact = n_templates;
                                    cfg.master_seed = seed;
                                    cfg.name = format!(
                                        "{}-f{:03}-r{}x{}-{}-{}-{}-t{}-s{}",
                                        self.name,
                                        (fraction * 1000.0).round() as u32,
                                        split.0,
                                        split.1,
                                        variant.as_str(),
                                        casing.as_str(),
                                        tokenizer.as_str(),
                                        n_templates,
                                        seed
                                    );
                                    points.push(cfg);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(points)
    }

    /// Hash identifying the sweep grid, independent of output location and
    /// worker count.
    pub fn sweep_hash(&self) -> Result<String> {
        let mut spec = self.clone();
        spec.base.out_dir = None;
        spec.parallelism = 1;
        Ok(ioutil::sha256_hex(&serde_json::to_vec(&spec)?))
    }

    pub fn sweep_dir(&self) -> Result<PathBuf> {
        Ok(self
            .base
            .out_root()
            .join("sweeps")
            .join(format!("{}-{}", self.name, &self.sweep_hash()?[..12])))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("sweep to TOML: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<SweepSpec> {
        Ok(toml::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedPoint {
    pub run_id: String,
    pub name: String,
    pub error: String,
}

/// Result of a sweep: completed run records in grid order, failures
/// quarantined with their error messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    pub completed: Vec<RunRecord>,
    pub failed: Vec<FailedPoint>,
}

/// Run every sweep point (skipping points that already completed, unless
/// `force`), quarantine failures, and write `summary.csv`, `records.json`
/// and `failures.csv` into the sweep directory. A failing point never stops
/// the sweep; it is reported in the outcome and marked in the summary.
pub fn run_sweep(spec: &SweepSpec, force: bool) -> Result<SweepOutcome> {
    let points = spec.expand()?;
    let dir = spec.sweep_dir()?;
    std::fs::create_dir_all(&dir)?;
    ioutil::write_string_atomic(
        &dir.join("sweep.toml"),
        &toml::to_string_pretty(spec).map_err(|e| Error::Config(format!("sweep to TOML: {e}")))?,
    )?;

    let queue: Mutex<VecDeque<usize>> = Mutex::new((0..points.len()).collect());
    let results: Mutex<Vec<Option<Result<RunRecord>>>> =
        Mutex::new((0..points.len()).map(|_| None).collect());
    let workers = spec.parallelism.min(points.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = match queue.lock().expect("queue lock").pop_front() {
                    Some(i) => i,
                    None => break,
                };
                let result = run_experiment(&points[idx], force);
                results.lock().expect("results lock")[idx] = Some(result);
            });
        }
    });
    let results = results.into_inner().expect("results lock");

    let mut completed = Vec::new();
    let mut failed = Vec::new();
    let mut summary = String::from(
        "run_id,status,celebrity_fraction,language_split,variant,casing,tokenizer,n_templates,\
         seed,final_step,id_accuracy,ood_accuracy,id_label_probability,ood_label_probability,\
         unification_activation,unification_gradient,language_r2,fact_r2,checkerboard_contrast,\
         shared_name_error_fraction,train_loss\n",
    );
    let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (cfg, result) in points.iter().zip(results) {
        let run_id = cfg.run_id()?;
        let axes = format!(
            "{},{}:{},{},{},{},{},{}",
            cfg.corpus.celebrity_fraction,
            cfg.corpus.language_split.0,
            cfg.corpus.language_split.1,
            cfg.corpus.variant.as_str(),
            cfg.corpus.casing.as_str(),
            cfg.tokenizer.as_str(),
            cfg.lang.n_templates_per_fact,
            cfg.master_seed
        );
        match result.expect("every sweep point must produce a result") {
            Ok(record) => {
                let last = record.final_checkpoint()?.clone();
                summary.push_str(&format!(
                    "{run_id},complete,{axes},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    last.step,
                    last.id_accuracy,
                    last.ood_accuracy,
                    last.id_label_probability,
                    last.ood_label_probability,
                    fmt_opt(last.unification_activation),
                    fmt_opt(last.unification_gradient),
                    fmt_opt(last.language_r2),
                    fmt_opt(last.fact_r2),
                    fmt_opt(last.checkerboard_contrast),
                    fmt_opt(last.shared_name_error_fraction),
                    fmt_opt(last.train_loss),
                ));
                completed.push(record);
            }
            Err(e) => {
                summary.push_str(&format!("{run_id},failed,{axes},,,,,,,,,,,,\n"));
                failed.push(FailedPoint {
                    run_id,
                    name: cfg.name.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    ioutil::write_string_atomic(&dir.join("summary.csv"), &summary)?;
    ioutil::write_json_pretty(&dir.join("records.json"), &completed)?;
    let mut failures = String::from("run_id,name,error\n");
    for f in &failed {
        failures.push_str(&format!(
            "{},{},{}\n",
            f.run_id,
            f.name,
            f.error.replace(['\n', ','], ";")
        ));
    }
    ioutil::write_string_atomic(&dir.join("failures.csv"), &failures)?;

    Ok(SweepOutcome { dir, completed, failed })
}

const PALETTE: [[u8; 3]; 6] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
];

fn accuracy_figure(
    records: &[RunRecord],
    dir: &Path,
    stem: &str,
    metric_name: &str,
    extract: impl Fn(&CheckpointMetrics) -> f64,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    // label -> fraction (as ordered bits) -> values over seeds
    let mut groups: std::collections::BTreeMap<String, std::collections::BTreeMap<u64, Vec<f64>>> =
        std::collections::BTreeMap::new();
    for r in records {
        let label = format!("{}-{}", r.variant.as_str(), r.casing.as_str());
        let last = r.final_checkpoint()?;
        groups
            .entry(label)
            .or_default()
            .entry(r.celebrity_fraction.to_bits())
            .or_default()
            .push(extract(last));
    }
    let mut series = Vec::new();
    let mut csv = format!("series,celebrity_fraction,{metric_name}\n");
    for (i, (label, by_frac)) in groups.iter().enumerate() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (&bits, values) in by_frac {
            x.push(f64::from_bits(bits));
            y.push(crate::stats::mean(values));
        }
        for (xv, yv) in x.iter().zip(&y) {
            csv.push_str(&format!("{label},{xv},{yv}\n"));
        }
        series.push(Series {
            label: label.clone(),
            x,
            y,
            color: PALETTE[i % PALETTE.len()],
        });
    }
    let csv_path = dir.join(format!("{stem}.csv"));
    ioutil::write_string_atomic(&csv_path, &csv)?;
    written.push(csv_path);
    let png_path = dir.join(format!("{stem}.png"));
    save_line_plot(
        &png_path,
        stem,
        "celebrity fraction",
        metric_name,
        &series,
    )?;
    written.push(png_path);
    Ok(())
}

/// Figures over a set of completed runs, each with a CSV twin carrying
/// exactly the plotted numbers: final accuracy vs celebrity fraction (one
/// series per variant/casing pair) and the unification-vs-transfer scatter.
pub fn report_sweep(records: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::Input("no run records to report".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    accuracy_figure(records, dir, "ood_vs_fraction", "ood_accuracy", |c| c.ood_accuracy, &mut written)?;
    accuracy_figure(records, dir, "id_vs_fraction", "id_accuracy", |c| c.id_accuracy, &mut written)?;
    match unify::unification_vs_ood(records, false) {
        Ok(scatter) => {
            let csv_path = dir.join("unification_vs_ood.csv");
            ioutil::write_string_atomic(&csv_path, &scatter.to_csv())?;
            written.push(csv_path);
            let points: Vec<ScatterPoint> = scatter
                .points
                .iter()
                .map(|(_, _, uni, ood)| ScatterPoint {
                    x: *uni,
                    y: *ood,
                    color: PALETTE[0],
                })
                .collect();
            let png_path = dir.join("unification_vs_ood.png");
            save_scatter_plot(
                &png_path,
                "unification vs transfer",
                "unification (final)",
                "ood accuracy (final)",
                &points,
            )?;
            written.push(png_path);
        }
        // Scatter needs >= 3 runs carrying the metric with some spread;
        // sweeps without it still get the accuracy figures.
        Err(Error::Input(_)) | Err(Error::Degenerate(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(written)
}
