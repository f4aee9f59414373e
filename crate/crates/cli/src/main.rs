use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use tard_core::data::{ingest_csv, write_csv, Manifest, TIME_COLUMN};
use tard_core::harness::{
    emit_report, fit_method, load_cases, render_table, run_evaluation, trace_metrics, CaseData,
    CaseEntry, CsvData, DataConfig, Detector, FileEntry, MethodId, Metrics, Prepared,
    PretrainCache, RunConfig, StreamingDetector,
};
use tard_core::models::{load_bundle, save_bundle, ModelBundle};

#[derive(Parser, Debug)]
#[command(
    name = "tard",
    version,
    about = "Reconstruction-based fault detection with test-time adaptation"
)]
struct Cli {
    /// Run configuration (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "tard-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the configured synthetic scenario as CSV files, manifests and a
    /// run config that evaluates them.
    Synth,
    /// Pretrain the source autoencoder and write a calibrated source-only bundle.
    Train {
        /// Case used for calibration; defaults to the first.
        #[arg(long)]
        case: Option<String>,
    },
    /// Fit one adaptation method on a case and write its bundle.
    Adapt {
        #[arg(long, default_value = "tard")]
        method: MethodId,
        /// Source-only bundle to start from instead of pretraining again.
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        case: Option<String>,
    },
    /// Score a recorded CSV file with a bundle.
    Detect {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Manifest with fault windows; without one every row is taken as healthy.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Run every configured method on every case and write the report.
    Evaluate,
    /// Score CSV rows as they arrive and print one decision per row.
    Stream {
        #[arg(long)]
        bundle: PathBuf,
        /// CSV file, or `-` for standard input.
        #[arg(long, default_value = "-")]
        input: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    match cli.command {
        Command::Synth => synth(&cfg, &cli.out),
        Command::Train { case } => train(&cfg, case.as_deref(), &cli.out),
        Command::Adapt {
            method,
            bundle,
            case,
        } => adapt(&cfg, method, bundle.as_deref(), case.as_deref(), &cli.out),
        Command::Detect {
            bundle,
            input,
            manifest,
        } => detect(&bundle, &input, manifest.as_deref(), &cli.out),
        Command::Evaluate => evaluate(&cfg, &cli.out),
        Command::Stream { bundle, input } => stream(&bundle, &input),
    }
}

fn create_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let DataConfig::Synthetic(scenario) = &cfg.data else {
        bail!("synth needs a synthetic data section");
    };
    create_out(out)?;
    let data = scenario.build(cfg.seed)?;
    let mut target = Vec::new();
    for (name, series) in [
        ("source", &data.source),
        ("target", &data.target),
        ("clean", &data.clean),
    ] {
        let csv = format!("{name}.csv");
        let manifest = format!("{name}.toml");
        write_csv(&out.join(&csv), series)?;
        let m = Manifest::for_series(series);
        write_text(&out.join(&manifest), &toml::to_string(&m)?)?;
        if name != "clean" {
            target.push(FileEntry {
                csv: csv.into(),
                manifest: manifest.into(),
                rows: None,
            });
        }
    }
    let source = target.remove(0);
    let mut run = cfg.clone();
    run.repeats = 1;
    run.data = DataConfig::Csv(CsvData {
        source: vec![source],
        cases: vec![CaseEntry {
            name: "synthetic".into(),
            files: target,
        }],
        split: scenario.split_plan(),
    });
    write_text(&out.join("run.toml"), &toml::to_string(&run)?)?;
    println!(
        "wrote synthetic data for seed {} to {}",
        cfg.seed,
        out.display()
    );
    Ok(())
}

fn pick_case(cfg: &RunConfig, name: Option<&str>) -> Result<CaseData> {
    let mut cases = load_cases(cfg)?;
    match name {
        None => Ok(cases.swap_remove(0)),
        Some(n) => {
            let i = cases
                .iter()
                .position(|c| c.name == n)
                .ok_or_else(|| anyhow!("no case named `{n}`"))?;
            Ok(cases.swap_remove(i))
        }
    }
}

fn fit_and_save(
    cfg: &RunConfig,
    case: &CaseData,
    method: MethodId,
    mut cache: PretrainCache,
    out: &Path,
) -> Result<()> {
    let prepared = Prepared::new(&case.splits);
    let fitted = fit_method(
        method,
        &prepared,
        &cfg.method_settings(case.seed),
        &mut cache,
    )?;
    create_out(out)?;
    let path = out.join(format!("{method}.bundle.json"));
    save_bundle(&fitted.detector.bundle, &path)?;
    write_text(
        &out.join(format!("{method}.train.json")),
        &(serde_json::to_string_pretty(&fitted.reports)? + "\n"),
    )?;
    for r in &fitted.reports {
        println!(
            "{method}: loss {:.6} -> {:.6}, best validation {:.6} at epoch {}",
            r.initial_loss, r.final_loss, r.best_val_loss, r.best_epoch
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn train(cfg: &RunConfig, case: Option<&str>, out: &Path) -> Result<()> {
    let case = pick_case(cfg, case)?;
    fit_and_save(
        cfg,
        &case,
        MethodId::SourceOnly,
        PretrainCache::default(),
        out,
    )
}

fn adapt(
    cfg: &RunConfig,
    method: MethodId,
    bundle: Option<&Path>,
    case: Option<&str>,
    out: &Path,
) -> Result<()> {
    let case = pick_case(cfg, case)?;
    let cache = match bundle {
        Some(path) => {
            let b = load_bundle(path)?;
            if b.schema() != &case.splits.source.schema {
                bail!("{} was trained on different columns", path.display());
            }
            PretrainCache::with_model(b.ae)
        }
        None => PretrainCache::default(),
    };
    fit_and_save(cfg, &case, method, cache, out)
}

#[derive(Serialize)]
struct DetectSummary {
    input: PathBuf,
    rows: usize,
    scored_rows: usize,
    alarms: usize,
    threshold: f64,
    metrics: Metrics,
}

fn detect(bundle: &Path, input: &Path, manifest: Option<&Path>, out: &Path) -> Result<()> {
    let bundle = load_bundle(bundle)?;
    let manifest = match manifest {
        Some(p) => Manifest::load(p)?,
        None => Manifest::from_schema(bundle.schema()),
    };
    let series = ingest_csv(input, &manifest)?;
    let mut detector = Detector::new(bundle)?;
    let trace = detector.score(&series)?;
    create_out(out)?;
    trace.save(&out.join("trace.csv"))?;
    let summary = DetectSummary {
        input: input.to_path_buf(),
        rows: series.rows(),
        scored_rows: trace.labels.len(),
        alarms: trace.labels.iter().filter(|&&l| l == 1).count(),
        threshold: trace.threshold,
        metrics: trace_metrics(&trace)?,
    };
    write_text(
        &out.join("detect.json"),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    println!(
        "{} of {} scored rows flagged (threshold {:.6})",
        summary.alarms, summary.scored_rows, summary.threshold
    );
    Ok(())
}

fn evaluate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (report, runs) = run_evaluation(cfg)?;
    let traces: Vec<_> = runs.iter().map(|r| &r.trace).collect();
    emit_report(&report, &traces, out)?;
    print!("{}", render_table(&report));
    Ok(())
}

fn stream(bundle: &Path, input: &Path) -> Result<()> {
    let bundle: ModelBundle = load_bundle(bundle)?;
    let schema = bundle.schema().clone();
    let reader: Box<dyn BufRead> = if input == Path::new("-") {
        Box::new(std::io::stdin().lock())
    } else {
        let f =
            std::fs::File::open(input).with_context(|| format!("opening {}", input.display()))?;
        Box::new(std::io::BufReader::new(f))
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if !header.iter().any(|h| h == TIME_COLUMN) {
        bail!("input has no `{TIME_COLUMN}` column");
    }
    let positions = schema
        .names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| anyhow!("input has no column `{n}`"))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut streamer = StreamingDetector::new(Detector::new(bundle)?)?;
    let stdout = std::io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    writeln!(w, "index,s_raw,s_smooth,threshold,label")?;
    let mut row = vec![0.0; positions.len()];
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        for (slot, &p) in row.iter_mut().zip(&positions) {
            let cell = record.get(p).unwrap_or("");
            *slot = cell.parse().map_err(|_| {
                anyhow!(
                    "row {}, column `{}`: non-numeric value `{cell}`",
                    i + 2,
                    &header[p]
                )
            })?;
        }
        for e in streamer.push(&row)? {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.index, e.s_raw, e.s_smooth, e.threshold, e.label
            )?;
        }
        w.flush()?;
    }
    for e in streamer.finish()? {
        writeln!(
            w,
            "{},{},{},{},{}",
            e.index, e.s_raw, e.s_smooth, e.threshold, e.label
        )?;
    }
    w.flush()?;
    Ok(())
}
