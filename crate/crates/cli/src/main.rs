//! `mlltr`: command-line front end for training, evaluation and experiment grids.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use mlltr::combinators::Preference;
use mlltr::dataset::{write_letor, LabelPromotionSpec};
use mlltr::experiment::{
    build_reference_model, evaluate, explore_from_reference, generate_rays, load_data, reference_preferences,
    run_grid_on, single_objective_baselines, write_grid_report, write_reference_report, DataBundle, ExperimentConfig,
    MethodSpec,
};
use mlltr::synth::{generate_split, to_letor, SynthConfig};
use mlltr::trainer::{train, GBMConfig, TrainOptions, TreeEnsemble};

#[derive(Parser)]
#[command(name = "mlltr", version, about = "Multi-label learning to rank with gradient-boosted trees")]
struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model for one preference.
    Train(TrainArgs),
    /// Costs and NDCG of a saved model.
    Evaluate(EvaluateArgs),
    /// Run a full experiment grid and write its reports.
    Grid(GridArgs),
    /// Print preference rays for given or trained baselines.
    Rays(RaysArgs),
    /// Explore improvements over a reference model.
    ExploreRef(ExploreArgs),
    /// Write the synthetic workload as LETOR files.
    SynthGen(SynthArgs),
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<T>().map_err(|e| anyhow::anyhow!("bad list entry {t:?}: {e}")))
        .collect()
}

/// Flags shared by every command that builds an experiment configuration.
/// Each one overrides the matching field of the config file.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training file (LETOR/SVMlight, or `.bin` cache). Synthetic data when absent.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Feature columns to promote to labels, e.g. `3,7`.
    #[arg(long)]
    promote: Option<String>,
    /// Fraction of training queries to keep.
    #[arg(long)]
    query_fraction: Option<f64>,
    /// One label set, e.g. `0,1`.
    #[arg(long)]
    labels: Option<String>,
    /// Methods, e.g. `ls,wc,wc+ma`.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    n_preferences: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    subsample: Option<f64>,
    /// Concurrent training runs (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.train {
            cfg.data.train = Some(p.clone());
        }
        if let Some(p) = &self.valid {
            cfg.data.valid = Some(p.clone());
        }
        if let Some(p) = &self.test {
            cfg.data.test = Some(p.clone());
        }
        if let Some(s) = &self.promote {
            cfg.data.promote = Some(LabelPromotionSpec::new(parse_list::<usize>(s)?));
        }
        if let Some(f) = self.query_fraction {
            cfg.data.query_fraction = f;
        }
        if let Some(s) = &self.labels {
            cfg.label_sets = vec![parse_list(s)?];
        }
        if let Some(s) = &self.methods {
            cfg.methods = parse_list::<MethodSpec>(s)?;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_list(s)?;
        }
        if let Some(n) = self.n_preferences {
            cfg.n_preferences = n;
        }
        if let Some(n) = self.trees {
            cfg.gbm.n_trees = n;
        }
        if let Some(v) = self.learning_rate {
            cfg.gbm.learning_rate = v;
        }
        if let Some(v) = self.subsample {
            cfg.gbm.subsample = v;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_label_set(cfg: &ExperimentConfig) -> Result<DataBundle> {
    let data = load_data(&cfg.data)?;
    Ok(data.select_labels(&cfg.label_sets[0])?)
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Rule, e.g. `wc+ma`.
    #[arg(long, default_value = "ls")]
    method: MethodSpec,
    /// Priority weights, e.g. `0.3,0.7`.
    #[arg(long, conflicts_with = "bounds")]
    weights: Option<String>,
    /// Upper bounds for the non-primary objectives.
    #[arg(long)]
    bounds: Option<String>,
    /// Reference costs the rule measures against.
    #[arg(long)]
    reference_costs: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "model.json")]
    model: PathBuf,
    /// Iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn cmd_train(args: TrainArgs) -> Result<bool> {
    let cfg = args.common.resolve()?;
    let data = load_label_set(&cfg)?;
    let k = data.train.label_count();
    let mut preference = if let Some(b) = &args.bounds {
        Preference::epsilon_constraint(cfg.epsilon.primary, parse_list::<f64>(b)?, cfg.epsilon.mu)
    } else {
        let weights = match &args.weights {
            Some(w) => parse_list::<f64>(w)?,
            None => vec![1.0 / k as f64; k],
        };
        Preference::priority(weights)
    };
    if let Some(b) = &args.reference_costs {
        preference = preference.with_reference(parse_list(b)?);
    }
    let gbm = GBMConfig { rng_seed: args.seed, ..cfg.gbm.clone() };
    let options = TrainOptions {
        smoothing: args.method.smoothing,
        params: cfg.combinator.clone(),
        validation: data.valid.as_ref(),
    };
    let out = train(&data.train, &preference, args.method.kind, &gbm, std::slice::from_ref(&cfg.loss), &options)?;
    out.ensemble.save(&args.model)?;
    if let Some(t) = &args.trace {
        out.trace.save_csv(t)?;
    }
    let test = evaluate(&out.ensemble, &data.test, &cfg.loss, cfg.metrics.ndcg_k)?;
    let mut w = csv::Writer::from_writer(io::stdout());
    write_metrics(&mut w, data.train.label_names(), "train_cost", &out.trace.final_costs)?;
    write_metrics(&mut w, data.train.label_names(), "test_cost", &test.costs)?;
    write_metrics(&mut w, data.train.label_names(), "test_ndcg", &test.ndcg)?;
    w.flush()?;
    info!(
        "{} trees, stop reason {:?}; model written to {}",
        out.ensemble.len(),
        out.trace.stop_reason,
        args.model.display()
    );
    Ok(true)
}

fn write_metrics<W: Write>(w: &mut csv::Writer<W>, names: &[String], metric: &str, values: &[f64]) -> Result<()> {
    for (name, v) in names.iter().zip(values) {
        w.write_record([metric, name.as_str(), &v.to_string()])?;
    }
    Ok(())
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: ConfigArgs,
    #[arg(long)]
    model: PathBuf,
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<bool> {
    let cfg = args.common.resolve()?;
    let data = load_label_set(&cfg)?;
    let model = TreeEnsemble::load(&args.model)?;
    let mut w = csv::Writer::from_writer(io::stdout());
    w.write_record(["metric", "label", "value"])?;
    for (split, set) in [("train", &data.train), ("test", &data.test)] {
        let e = evaluate(&model, set, &cfg.loss, cfg.metrics.ndcg_k)?;
        write_metrics(&mut w, set.label_names(), &format!("{split}_cost"), &e.costs)?;
        write_metrics(&mut w, set.label_names(), &format!("{split}_ndcg"), &e.ndcg)?;
    }
    w.flush()?;
    Ok(true)
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: ConfigArgs,
}

fn cmd_grid(args: GridArgs) -> Result<bool> {
    let cfg = args.common.resolve()?;
    let data = load_data(&cfg.data)?;
    let report = run_grid_on(&cfg, &data)?;
    write_grid_report(&report, &cfg.output_dir)?;
    let failed = report.failed_runs();
    info!("{} runs, {failed} failed; reports in {}", report.runs.len(), cfg.output_dir.display());
    Ok(failed == 0)
}

#[derive(Args)]
struct RaysArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Baseline cost vectors, rows separated by `;`, e.g. `1,3;3,1`.
    /// Trained from the configured data when absent.
    #[arg(long)]
    baselines: Option<String>,
    #[arg(long, short)]
    n: Option<usize>,
}

fn cmd_rays(args: RaysArgs) -> Result<bool> {
    let cfg = args.common.resolve()?;
    let n = args.n.unwrap_or(cfg.n_preferences);
    let baselines: Vec<Vec<f64>> = match &args.baselines {
        Some(s) => s.split(';').map(parse_list::<f64>).collect::<Result<_>>()?,
        None => {
            let data = load_label_set(&cfg)?;
            let gbm = GBMConfig { rng_seed: cfg.seeds[0], ..cfg.gbm.clone() };
            single_objective_baselines(&data, &gbm, &cfg.loss, cfg.metrics.ndcg_k)?
                .into_iter()
                .map(|b| b.train_costs)
                .collect()
        }
    };
    let rays = generate_rays(&baselines, n)?;
    let mut w = csv::Writer::from_writer(io::stdout());
    for r in rays {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(true)
}

#[derive(Args)]
struct ExploreArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Reference model; an under-trained LS model is built when absent.
    #[arg(long)]
    reference: Option<PathBuf>,
}

fn cmd_explore(args: ExploreArgs) -> Result<bool> {
    let cfg = args.common.resolve()?;
    let data = load_label_set(&cfg)?;
    let reference = match &args.reference {
        Some(p) => TreeEnsemble::load(p)?,
        None => build_reference_model(&cfg, &data)?,
    };
    let b = evaluate(&reference, &data.train, &cfg.loss, cfg.metrics.ndcg_k)?.costs;
    let prefs = reference_preferences(&b, cfg.n_preferences)?;
    let report = explore_from_reference(&cfg, &data, &reference, &prefs)?;
    write_reference_report(&report, &cfg, &cfg.output_dir)?;
    if args.reference.is_none() {
        reference.save(cfg.output_dir.join("reference_model.json"))?;
    }
    for s in &report.summaries {
        info!(
            "{}: {}/{} runs dominate the reference, mean MWL vs reference {}",
            s.method, s.dominating, s.runs, s.mean_mwl_vs_reference
        );
    }
    Ok(report.failed_runs() == 0)
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "synthetic")]
    out_dir: PathBuf,
    /// TOML file with the generator settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    test_queries: Option<usize>,
    #[arg(long)]
    labels: Option<usize>,
    #[arg(long)]
    correlation: Option<f64>,
    #[arg(long, default_value_t = ExperimentConfig::default().data.synthetic_seed)]
    seed: u64,
}

fn cmd_synth(args: SynthArgs) -> Result<bool> {
    let mut cfg = match &args.config {
        Some(p) => toml::from_str::<SynthConfig>(&fs::read_to_string(p)?)?,
        None => SynthConfig::default(),
    };
    if let Some(q) = args.queries {
        cfg.queries = q;
    }
    if let Some(q) = args.test_queries {
        cfg.test_queries = q;
    }
    if let Some(l) = args.labels {
        cfg.labels = l;
    }
    if let Some(c) = args.correlation {
        cfg.correlation = c;
    }
    let (train, test) = generate_split(&cfg, args.seed)?;
    fs::create_dir_all(&args.out_dir)?;
    let (raw_train, spec) = to_letor(&train);
    let (raw_test, _) = to_letor(&test);
    write_letor(&raw_train, io::BufWriter::new(fs::File::create(args.out_dir.join("train.txt"))?))?;
    write_letor(&raw_test, io::BufWriter::new(fs::File::create(args.out_dir.join("test.txt"))?))?;
    fs::write(args.out_dir.join("promote.toml"), toml::to_string_pretty(&spec)?)?;
    info!("wrote {} train and {} test queries to {}", train.num_queries(), test.num_queries(), args.out_dir.display());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Rays(a) => cmd_rays(a),
        Command::ExploreRef(a) => cmd_explore(a),
        Command::SynthGen(a) => cmd_synth(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
