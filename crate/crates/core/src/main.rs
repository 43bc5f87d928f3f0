use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lora_bam::bam::{fit_boxes, EnlargementMode};
use lora_bam::baselines::{fit_cosine, fit_mahalanobis, DEFAULT_EPSILON_SCALE};
use lora_bam::calibration::{
    calibrate_bam, calibrate_cosine, calibrate_mahalanobis, CalibrationResult, DEFAULT_TARGET_TPR,
};
use lora_bam::clustering::{
    default_cluster_count, kmeans_fit, KMeansParams, DEFAULT_MAX_ITER, DEFAULT_REL_TOL,
};
use lora_bam::eval::{
    self, render_plot_csv, CalibrationSource, DatasetEntry, ReportFormat, RunConfig, RunRole,
    SynthConfig,
};
use lora_bam::feature_store::{load_dataset, save_dataset, split_dataset, Dataset};
use lora_bam::monitor::{load_monitor, save_monitor, Monitor};
use lora_bam::{Error, Result};

#[derive(Parser)]
#[command(
    name = "bam",
    version,
    about = "Fit, calibrate and evaluate boxed-abstraction OoD monitors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a monitor from a training feature file.
    Fit(FitArgs),
    /// Set a monitor's threshold from ID-only calibration features.
    Calibrate(CalibrateArgs),
    /// Write per-vector scores and accept decisions as CSV.
    Score(ScoreArgs),
    /// Run the full fit → calibrate → evaluate protocol from a TOML config.
    Eval(EvalArgs),
    /// Generate the two-cluster synthetic datasets and a matching run config.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Kind {
    Bam,
    Mahalanobis,
    Cosine,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Target ID accept rate (TPR) for calibration.
    #[arg(long, conflicts_with = "delta")]
    target_tpr: Option<f64>,
    /// Fixed enlargement factor instead of calibration (box monitors only).
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_enum, default_value = "bam")]
    kind: Kind,
    /// Cluster count; defaults to round(sqrt(n)).
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    tol: f64,
    #[arg(long, default_value = "sigma")]
    enlargement: EnlargementMode,
    #[arg(long, default_value_t = DEFAULT_EPSILON_SCALE)]
    epsilon_scale: f64,
    /// Hold out this fraction of the features and calibrate on it.
    #[arg(long)]
    calib_fraction: Option<f64>,
    #[command(flatten)]
    threshold: ThresholdArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    monitor: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[command(flatten)]
    threshold: ThresholdArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    monitor: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report file; markdown on stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// markdown, csv or json; inferred from --out's extension by default.
    #[arg(long)]
    format: Option<ReportFormat>,
    /// Also write rejection-rate plot data (CSV).
    #[arg(long)]
    plot_out: Option<PathBuf>,
    /// Replace the config's training feature file.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    calib_fraction: Option<f64>,
    #[command(flatten)]
    threshold: ThresholdArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.3)]
    std: f64,
    #[arg(long, default_value_t = 200)]
    n_per_cluster: usize,
    #[arg(long, default_value_t = 200)]
    n_midgap: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Score(a) => score(a),
        Command::Eval(a) => run_eval(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}

fn fit(a: FitArgs) -> Result<()> {
    let all = load_dataset(&a.features, None)?;
    let (train, calib) = match a.calib_fraction {
        Some(f) => {
            let (t, c) = split_dataset(&all, f, a.seed)?;
            (t, Some(c))
        }
        None => (all, None),
    };
    let monitor: Monitor = match a.kind {
        Kind::Bam => {
            let clusters = a
                .clusters
                .unwrap_or_else(|| default_cluster_count(train.len()));
            let params = KMeansParams {
                clusters,
                seed: a.seed,
                max_iter: a.max_iter,
                rel_tol: a.tol,
            };
            let model = kmeans_fit(&train, &params)?;
            fit_boxes(&train, &model)?.with_mode(a.enlargement).into()
        }
        Kind::Mahalanobis => fit_mahalanobis(&train, a.epsilon_scale)?.into(),
        Kind::Cosine => fit_cosine(&train)?.into(),
    };
    let monitor = match calib {
        Some(c) => {
            let (m, result) = apply_threshold(monitor, &c, &a.threshold)?;
            print_result(result.as_ref());
            m
        }
        None if a.threshold.delta.is_some() => apply_threshold(monitor, &train, &a.threshold)?.0,
        None => monitor,
    };
    save_monitor(&monitor, &a.out)
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let monitor = load_monitor(&a.monitor)?;
    let calib = load_dataset(&a.features, Some(monitor.dim()))?;
    let (monitor, result) = apply_threshold(monitor, &calib, &a.threshold)?;
    print_result(result.as_ref());
    save_monitor(&monitor, &a.out)
}

fn apply_threshold(
    monitor: Monitor,
    calib: &Dataset,
    t: &ThresholdArgs,
) -> Result<(Monitor, Option<CalibrationResult>)> {
    let target = t.target_tpr.unwrap_or(DEFAULT_TARGET_TPR);
    match (monitor, t.delta) {
        (Monitor::Bam(m), Some(delta)) => Ok((m.with_delta(delta)?.into(), None)),
        (_, Some(_)) => Err(Error::invalid("--delta applies to box monitors only")),
        (Monitor::Bam(m), None) => {
            let (m, r) = calibrate_bam(&m, calib, target)?;
            Ok((m.into(), Some(r)))
        }
        (Monitor::Mahalanobis(m), None) => {
            let (m, r) = calibrate_mahalanobis(&m, calib, target)?;
            Ok((m.into(), Some(r)))
        }
        (Monitor::Cosine(m), None) => {
            let (m, r) = calibrate_cosine(&m, calib, target)?;
            Ok((m.into(), Some(r)))
        }
    }
}

fn print_result(result: Option<&CalibrationResult>) {
    if let Some(r) = result {
        println!("{}", serde_json::to_string(r).expect("result serializes"));
    }
}

fn score(a: ScoreArgs) -> Result<()> {
    let monitor = load_monitor(&a.monitor)?;
    let data = load_dataset(&a.features, Some(monitor.dim()))?;
    let calibrated = monitor.threshold().is_some();
    let mut out = String::from("id,score,accepted\n");
    for fv in data.vectors() {
        let s = monitor.score(&fv.vector)?;
        let accepted = if calibrated {
            monitor.accepts(&fv.vector)?.to_string()
        } else {
            String::new()
        };
        out.push_str(&format!("{},{},{}\n", csv_field(&fv.id), s, accepted));
    }
    write_output(a.out.as_deref(), &out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(path) = a.features {
        match cfg.datasets.iter_mut().find(|d| d.role == RunRole::Train) {
            Some(entry) => entry.path = path,
            None => cfg.datasets.push(DatasetEntry {
                path,
                name: None,
                role: RunRole::Train,
            }),
        }
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(m) = a.clusters {
        cfg.monitor.clusters = Some(m);
    }
    if let Some(f) = a.calib_fraction {
        cfg.calib_fraction = f;
        cfg.calibration = CalibrationSource::Holdout;
    }
    if let Some(t) = a.threshold.target_tpr {
        cfg.monitor.target_tpr = t;
        cfg.monitor.delta = None;
    }
    if let Some(d) = a.threshold.delta {
        cfg.monitor.delta = Some(d);
    }

    let run = eval::run(&cfg)?;
    let format = a.format.unwrap_or_else(|| {
        a.out
            .as_deref()
            .map_or(ReportFormat::Markdown, ReportFormat::from_path)
    });
    let text = eval::render_report(&run.reports, format)?;
    write_output(a.out.as_deref(), &text)?;
    if let Some(plot) = a.plot_out {
        write_output(Some(&plot), &render_plot_csv(&run.reports)?)?;
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig::two_clusters(
        a.dim,
        a.separation,
        a.std,
        a.n_per_cluster,
        a.n_midgap,
        a.seed,
    );
    let data = eval::generate_synthetic(&cfg)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    for d in [&data.id_train, &data.id_calib, &data.ood_midgap] {
        save_dataset(d, a.out_dir.join(format!("{}.jsonl", d.name())))?;
    }
    let run = RunConfig {
        seed: a.seed,
        calib_fraction: cfg.calib_fraction,
        calibration: CalibrationSource::Holdout,
        monitor: eval::MonitorSection {
            clusters: Some(2),
            ..Default::default()
        },
        datasets: vec![
            entry("id_train.jsonl", RunRole::Train),
            entry("id_calib.jsonl", RunRole::Calibration),
            entry("ood_midgap.jsonl", RunRole::NearOod),
        ],
    };
    write_output(Some(&a.out_dir.join("run.toml")), &run.to_toml())
}

fn entry(path: &str, role: RunRole) -> DatasetEntry {
    DatasetEntry {
        path: path.into(),
        name: None,
        role,
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}
