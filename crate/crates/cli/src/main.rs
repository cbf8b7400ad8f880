//! Command line front end: every subcommand is a thin veneer over the
//! library. Exit codes: 0 ok, 2 bad configuration or input, 3 run fault.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use xlpetri::corpus::{build_splits, parse_ratio, Casing, Corpus, Variant};
use xlpetri::evalrec::evaluate;
use xlpetri::kg::{Kg, KgConfig};
use xlpetri::lab::{
    self, run_experiment, run_sweep, ExperimentConfig, SweepSpec, METRICS_FILE,
};
use xlpetri::reprlab::{
    activation_repr, gradient_repr, plaid_emit, similarity_matrix, ReprSpec,
};
use xlpetri::synthlang::{LanguageConfig, LanguagePair};
use xlpetri::toyreg::{
    toy_scale_csv, toy_scale_sweep, toy_table, toy_table_csv, ToyConfig, DEFAULT_SWEEP_SCALES,
    DEFAULT_TABLE_SHARES,
};
use xlpetri::unify::{self, ModelSelection, RunRecord};
use xlpetri::{Error, Result};

#[derive(Parser)]
#[command(
    name = "xlpetri",
    version,
    about = "Laboratory for cross-lingual factual recall in tiny transformers"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic knowledge graph of birth/death events.
    GenKg(GenKgArgs),
    /// Generate a pair of template languages with disjoint vocabularies.
    GenLang(GenLangArgs),
    /// Compile train/id-test/ood-test splits from a graph and languages.
    BuildCorpus(BuildCorpusArgs),
    /// Run one experiment end to end from a TOML config.
    Train(TrainArgs),
    /// Evaluate a stored run's checkpoint on one of its splits.
    Eval(EvalArgs),
    /// Dump representation rows (activations or gradients) for a run.
    Repr(ReprArgs),
    /// Emit the similarity-matrix figure for a stored run.
    Plaid(PlaidArgs),
    /// Print the per-checkpoint metric table of a stored run.
    Metrics(MetricsArgs),
    /// Run the logistic-regression companion environment.
    Toyreg(ToyregArgs),
    /// Run a grid of experiments from a sweep TOML.
    Sweep(SweepArgs),
    /// Model selection over a completed sweep.
    Select(SelectArgs),
    /// Emit aggregate figures (with CSV twins) for a completed sweep.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenKgArgs {
    /// Output directory for the graph files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    first_names: Option<usize>,
    #[arg(long)]
    last_names: Option<usize>,
    #[arg(long)]
    cities: Option<usize>,
    #[arg(long)]
    birth_year_min: Option<u16>,
    #[arg(long)]
    birth_year_max: Option<u16>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenLangArgs {
    /// Output directory for the language files.
    #[arg(long)]
    out: PathBuf,
    /// Templates per (language, fact type).
    #[arg(long)]
    templates: Option<usize>,
    #[arg(long)]
    template_len: Option<usize>,
    #[arg(long)]
    literal_pool: Option<usize>,
    /// Fraction of filler tokens shared between the two languages.
    #[arg(long)]
    shared_tokens: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BuildCorpusArgs {
    /// Directory holding a generated knowledge graph.
    #[arg(long)]
    kg: PathBuf,
    /// Directory holding a generated language pair.
    #[arg(long)]
    lang: PathBuf,
    /// Output directory for the splits.
    #[arg(long)]
    out: PathBuf,
    /// Fraction of entities whose facts appear in both languages.
    #[arg(long, default_value_t = 0.0)]
    fraction: f64,
    /// Non-celebrity language ratio, e.g. 1:1 or 3:1.
    #[arg(long, default_value = "1:1")]
    split: String,
    /// src | balanced | imbalanced
    #[arg(long, default_value = "src")]
    variant: String,
    /// none | all-low | cased-by-language
    #[arg(long, default_value = "none")]
    casing: String,
    #[arg(long)]
    target_train_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment config TOML; omit with --smoke for the built-in profile.
    #[arg(long, required_unless_present = "smoke")]
    config: Option<PathBuf>,
    /// Use the built-in fast smoke profile.
    #[arg(long)]
    smoke: bool,
    /// Re-run even if this config already completed.
    #[arg(long)]
    force: bool,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output root.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory (out/runs/<run id>).
    #[arg(long)]
    run: PathBuf,
    /// id | ood | train
    #[arg(long, default_value = "ood")]
    split: String,
    /// Checkpoint step (default: latest).
    #[arg(long)]
    step: Option<usize>,
}

#[derive(Args)]
struct ReprArgs {
    /// Run directory.
    #[arg(long)]
    run: PathBuf,
    /// activation | gradient
    #[arg(long, default_value = "activation")]
    kind: String,
    /// id | ood | train
    #[arg(long, default_value = "ood")]
    split: String,
    /// Cap on statements.
    #[arg(long, default_value_t = 64)]
    max: usize,
    /// Checkpoint step (default: latest).
    #[arg(long)]
    step: Option<usize>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlaidArgs {
    /// Run directory.
    #[arg(long)]
    run: PathBuf,
    /// Cap on rows in the figure.
    #[arg(long, default_value_t = 120)]
    max: usize,
    /// Checkpoint step (default: latest).
    #[arg(long)]
    step: Option<usize>,
    /// Output stem; writes <stem>.csv and <stem>.png (default: in the run dir).
    #[arg(long)]
    out_stem: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Run directory.
    #[arg(long)]
    run: PathBuf,
}

#[derive(Args)]
struct ToyregArgs {
    /// Comma-separated variance shares for the table.
    #[arg(long)]
    shares: Option<String>,
    /// Comma-separated language feature scales; enables the scale sweep.
    #[arg(long)]
    scales: Option<String>,
    /// Run the scale sweep at the default scales.
    #[arg(long)]
    scale_sweep: bool,
    /// Seeds averaged per cell.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Directory for CSV output (optional; table always prints).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    entities: Option<usize>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Train with squared error instead of the default log loss.
    #[arg(long)]
    squared_loss: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec TOML; omit with --smoke for a one-point smoke sweep.
    #[arg(long, required_unless_present = "smoke")]
    spec: Option<PathBuf>,
    /// Run the built-in smoke profile as a single-point sweep.
    #[arg(long)]
    smoke: bool,
    /// Re-run completed points.
    #[arg(long)]
    force: bool,
    /// Override worker thread count.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Override the output root.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the base master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SelectArgs {
    /// Sweep directory (out/sweeps/<name>-<hash>).
    #[arg(long)]
    sweep: PathBuf,
    /// Output root holding the runs/ directory (default: two levels above
    /// the sweep directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// id-test | ood-test-k | unification | unification-plus
    #[arg(long, default_value = "unification-plus")]
    criterion: String,
    /// Held-out OOD fraction for ood-test-k.
    #[arg(long, default_value_t = 0.1)]
    k: f64,
    /// Resample fraction; when set, reports the mean selected-run OOD over
    /// repeated subsamples instead of a single choice.
    #[arg(long)]
    resample: Option<f64>,
    /// Resampling repeats.
    #[arg(long, default_value_t = 200)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep directory containing records.json.
    #[arg(long)]
    sweep: PathBuf,
    /// Figure directory (default: <sweep>/figures).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenKg(a) => gen_kg(a),
        Cmd::GenLang(a) => gen_lang(a),
        Cmd::BuildCorpus(a) => build_corpus(a),
        Cmd::Train(a) => train(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Repr(a) => repr(a),
        Cmd::Plaid(a) => plaid(a),
        Cmd::Metrics(a) => metrics(a),
        Cmd::Toyreg(a) => toyreg(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::Select(a) => select(a),
        Cmd::Report(a) => report(a),
    }
}

fn gen_kg(a: GenKgArgs) -> Result<()> {
    let d = KgConfig::default();
    let config = KgConfig {
        population: a.population.unwrap_or(d.population),
        n_first_names: a.first_names.unwrap_or(d.n_first_names),
        n_last_names: a.last_names.unwrap_or(d.n_last_names),
        n_cities: a.cities.unwrap_or(d.n_cities),
        birth_year_min: a.birth_year_min.unwrap_or(d.birth_year_min),
        birth_year_max: a.birth_year_max.unwrap_or(d.birth_year_max),
        seed: a.seed,
        ..d
    };
    let kg = Kg::generate(&config)?;
    kg.save(&a.out)?;
    println!(
        "wrote knowledge graph: {} entities, {} events -> {}",
        kg.entities.len(),
        kg.events.len(),
        a.out.display()
    );
    Ok(())
}

fn gen_lang(a: GenLangArgs) -> Result<()> {
    let d = LanguageConfig::default();
    let config = LanguageConfig {
        n_templates_per_fact: a.templates.unwrap_or(d.n_templates_per_fact),
        template_len: a.template_len.unwrap_or(d.template_len),
        literal_pool_size: a.literal_pool.unwrap_or(d.literal_pool_size),
        shared_token_fraction: a.shared_tokens.unwrap_or(d.shared_token_fraction),
        seed: a.seed,
        ..d
    };
    let langs = LanguagePair::generate(&config)?;
    langs.save(&a.out)?;
    println!(
        "wrote language pair: {} templates -> {}",
        langs.templates.len(),
        a.out.display()
    );
    Ok(())
}

fn build_corpus(a: BuildCorpusArgs) -> Result<()> {
    let kg = Kg::load(&a.kg)?;
    let langs = LanguagePair::load(&a.lang)?;
    let config = xlpetri::corpus::CorpusConfig {
        celebrity_fraction: a.fraction,
        language_split: parse_ratio(&a.split)?,
        variant: Variant::from_str_name(&a.variant)?,
        casing: Casing::from_str_name(&a.casing)?,
        target_train_size: a.target_train_size,
        seed: a.seed,
        ..xlpetri::corpus::CorpusConfig::default()
    };
    let corpus = build_splits(&kg, &langs, &config)?;
    corpus.save(&a.out)?;
    println!(
        "wrote corpus: train {} / id-test {} / ood-test {} -> {}",
        corpus.train.len(),
        corpus.id_test.len(),
        corpus.ood_test.len(),
        a.out.display()
    );
    Ok(())
}

fn load_experiment_config(a: &TrainArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&a.config, a.smoke) {
        (Some(path), _) => ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)?,
        (None, true) => ExperimentConfig::smoke(),
        (None, false) => unreachable!("clap enforces --config or --smoke"),
    };
    if let Some(seed) = a.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &a.out {
        cfg.out_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = load_experiment_config(&a)?;
    let dir = cfg.materialized().run_dir()?;
    let record = run_experiment(&cfg, a.force)?;
    let last = record.final_checkpoint()?;
    println!("run {} complete -> {}", record.run_id, dir.display());
    println!(
        "step {}: id accuracy {:.4}, ood accuracy {:.4}",
        last.step, last.id_accuracy, last.ood_accuracy
    );
    if let Some(u) = last.unification_activation {
        println!("unification (activation): {u:.4}");
    }
    Ok(())
}

fn split_of<'c>(corpus: &'c Corpus, name: &str) -> Result<&'c [xlpetri::corpus::Statement]> {
    match name {
        "id" | "id_test" => Ok(&corpus.id_test),
        "ood" | "ood_test" => Ok(&corpus.ood_test),
        "train" => Ok(&corpus.train),
        other => Err(Error::Input(format!(
            "unknown split {other:?}, expected id|ood|train"
        ))),
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    let run = lab::open_run(&a.run, a.step)?;
    let statements = split_of(&run.corpus, &a.split)?;
    let report = evaluate(&run.model, &run.vocab, statements, &a.split)?;
    println!(
        "step {} split {}: accuracy {:.4} ({} / {}), mean label probability {:.4}",
        run.step, a.split, report.accuracy, report.n_correct, report.n, report.mean_label_probability
    );
    print!("{}", report.grid_csv());
    Ok(())
}

fn repr(a: ReprArgs) -> Result<()> {
    let run = lab::open_run(&a.run, a.step)?;
    let statements = split_of(&run.corpus, &a.split)?;
    let take: Vec<_> = statements.iter().take(a.max).cloned().collect();
    if take.is_empty() {
        return Err(Error::Input(format!("split {} is empty", a.split)));
    }
    let set = match a.kind.as_str() {
        "activation" => {
            activation_repr(&run.model, &run.vocab, &take, &ReprSpec::activation(), run.step)?
        }
        "gradient" => {
            let mut spec = ReprSpec::gradient();
            spec.projection_dim = run.config.metrics.gradient_projection_dim;
            gradient_repr(&run.model, &run.vocab, &take, &spec, run.step)?
        }
        other => {
            return Err(Error::Input(format!(
                "unknown representation kind {other:?}, expected activation|gradient"
            )))
        }
    };
    let mut csv = String::from("fact_id,entity,lang,fact_type,attribute");
    for j in 0..set.rows.ncols() {
        csv.push_str(&format!(",d{j}"));
    }
    csv.push('\n');
    for (i, m) in set.meta.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{}",
            m.fact_id,
            m.entity,
            m.lang,
            m.fact_type.as_str(),
            m.attribute
        ));
        for v in set.rows.row(i) {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    xlpetri::ioutil::write_string_atomic(&a.out, &csv)?;
    println!(
        "wrote {} x {} {} rows (step {}) -> {}",
        set.rows.nrows(),
        set.rows.ncols(),
        a.kind,
        run.step,
        a.out.display()
    );
    Ok(())
}

fn plaid(a: PlaidArgs) -> Result<()> {
    let run = lab::open_run(&a.run, a.step)?;
    let (sel, boundaries) = lab::eval_selection(&run.corpus, a.max)?;
    if sel.len() < 2 {
        return Err(Error::Input(
            "no (fact type, attribute) cell carries both languages".into(),
        ));
    }
    let set = activation_repr(&run.model, &run.vocab, &sel, &ReprSpec::activation(), run.step)?;
    let sim = similarity_matrix(&set)?;
    let stem = a
        .out_stem
        .unwrap_or_else(|| a.run.join(format!("plaid_step{:06}", run.step)));
    let csv = stem.with_extension("csv");
    let png = stem.with_extension("png");
    plaid_emit(&sim, &set.meta, &boundaries, &csv, &png)?;
    println!("wrote {} and {}", csv.display(), png.display());
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let record: RunRecord = xlpetri::ioutil::read_json(&a.run.join(METRICS_FILE))?;
    record.validate()?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    println!("run {} (fraction {}, split {}:{}, {}, {})",
        record.run_id,
        record.celebrity_fraction,
        record.language_split.0,
        record.language_split.1,
        record.variant.as_str(),
        record.casing.as_str()
    );
    println!(
        "{:>8} {:>8} {:>8} {:>9} {:>9} {:>8} {:>8} {:>9} {:>8}",
        "step", "id", "ood", "uni_act", "uni_grad", "lang_r2", "fact_r2", "contrast", "loss"
    );
    for c in &record.checkpoints {
        println!(
            "{:>8} {:>8.4} {:>8.4} {:>9} {:>9} {:>8} {:>8} {:>9} {:>8}",
            c.step,
            c.id_accuracy,
            c.ood_accuracy,
            fmt(c.unification_activation),
            fmt(c.unification_gradient),
            fmt(c.language_r2),
            fmt(c.fact_r2),
            fmt(c.checkerboard_contrast),
            fmt(c.train_loss),
        );
    }
    Ok(())
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("bad {what} value {p:?}")))
        })
        .collect()
}

fn toyreg(a: ToyregArgs) -> Result<()> {
    let mut base = ToyConfig { seed: a.seed, ..ToyConfig::default() };
    if let Some(e) = a.entities {
        base.n_entities = e;
    }
    if let Some(n) = a.train_size {
        base.n_train = n;
    }
    if let Some(s) = a.steps {
        base.steps = s;
    }
    if a.squared_loss {
        base.log_loss = false;
    }
    let shares = match &a.shares {
        Some(s) => parse_f64_list(s, "share")?,
        None => DEFAULT_TABLE_SHARES.to_vec(),
    };
    let rows = toy_table(&base, &shares, a.seeds)?;
    println!("{:>10} {:>8} {:>8} {:>8}", "share", "train", "id", "ood");
    for r in &rows {
        println!(
            "{:>10} {:>8.4} {:>8.4} {:>8.4}",
            r.language_label_variance, r.train_accuracy, r.id_accuracy, r.ood_accuracy
        );
    }
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out)?;
        xlpetri::ioutil::write_string_atomic(&out.join("toy_table.csv"), &toy_table_csv(&rows))?;
        println!("wrote {}", out.join("toy_table.csv").display());
    }
    if a.scale_sweep || a.scales.is_some() {
        let scales = match &a.scales {
            Some(s) => parse_f64_list(s, "scale")?,
            None => DEFAULT_SWEEP_SCALES.to_vec(),
        };
        let sweep_base = ToyConfig {
            language_label_variance: *shares.last().expect("nonempty shares"),
            ..base
        };
        let rows = toy_scale_sweep(&sweep_base, &scales, a.seeds)?;
        println!(
            "scale sweep at share {}:",
            sweep_base.language_label_variance
        );
        println!("{:>10} {:>8} {:>8}", "scale", "train", "ood");
        for r in &rows {
            println!(
                "{:>10} {:>8.4} {:>8.4}",
                r.language_feature_scale, r.train_accuracy, r.ood_accuracy
            );
        }
        if let Some(out) = &a.out {
            xlpetri::ioutil::write_string_atomic(
                &out.join("toy_scales.csv"),
                &toy_scale_csv(&rows),
            )?;
            println!("wrote {}", out.join("toy_scales.csv").display());
        }
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut spec = match (&a.spec, a.smoke) {
        (Some(path), _) => SweepSpec::from_toml(&std::fs::read_to_string(path)?)?,
        (None, true) => SweepSpec::new(ExperimentConfig::smoke()),
        (None, false) => unreachable!("clap enforces --spec or --smoke"),
    };
    if let Some(p) = a.parallelism {
        spec.parallelism = p;
    }
    if let Some(out) = &a.out {
        spec.base.out_dir = Some(out.clone());
    }
    if let Some(seed) = a.seed {
        spec.base.master_seed = seed;
    }
    let outcome = run_sweep(&spec, a.force)?;
    println!(
        "sweep complete: {} runs ok, {} failed -> {}",
        outcome.completed.len(),
        outcome.failed.len(),
        outcome.dir.display()
    );
    for f in &outcome.failed {
        println!("  failed {}: {}", f.run_id, f.error);
    }
    Ok(())
}

fn select(a: SelectArgs) -> Result<()> {
    let records: Vec<RunRecord> =
        xlpetri::ioutil::read_json(&a.sweep.join("records.json"))?;
    let out_root = match &a.out {
        Some(p) => p.clone(),
        None => a
            .sweep
            .parent()
            .and_then(|p| p.parent())
            .map(PathBuf::from)
            .ok_or_else(|| {
                Error::Input("cannot infer the output root; pass --out".into())
            })?,
    };
    let inputs = lab::selection_inputs(&records, &out_root)?;
    let strategy = ModelSelection::from_str_name(&a.criterion)?;
    match a.resample {
        Some(fraction) => {
            let mean =
                unify::resampled_selection_mean_ood(&inputs, strategy, a.k, fraction, a.repeats, a.seed)?;
            println!(
                "{}: mean selected OOD accuracy {:.4} over {} resamples of {:.0}%",
                strategy.as_str(),
                mean,
                a.repeats,
                fraction * 100.0
            );
        }
        None => {
            let idx = unify::select_model(&inputs, strategy, a.k, a.seed)?;
            let chosen = &inputs[idx];
            println!(
                "{} selects {} (id {:.4}, unification {:.4}, ood {:.4})",
                strategy.as_str(),
                chosen.run_id,
                chosen.id_performance,
                chosen.unification,
                chosen.ood_accuracy()
            );
        }
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let records: Vec<RunRecord> =
        xlpetri::ioutil::read_json(&a.sweep.join("records.json"))?;
    let dir = a.out.unwrap_or_else(|| a.sweep.join("figures"));
    let written = lab::report_sweep(&records, &dir)?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
