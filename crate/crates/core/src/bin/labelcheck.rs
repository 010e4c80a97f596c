use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use labelcheck::io::{read_distance_csv, read_intensity_csv};
use labelcheck::report::{
    read_study_report, summary_table, timestamp, write_ecdf_dump, write_json, write_runs_csv, write_tables,
    ValidationReport, VALIDATION_SCHEMA,
};
use labelcheck::{
    analyze_blocks, build_distance_matrix, build_partitioned_view, run_independent_study, run_study,
    validate_all, zero_variance_instances, ClassLabeling, DistanceMatrix, DistanceMetric, Error,
    IndependentStudyConfig, Result, StudyConfig, StudyReport, TestConfig,
};

#[derive(Parser)]
#[command(name = "labelcheck", version, about = "Flag mislabeled instances with per-class binomial tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Test every class of a labeled data set.
    Validate(ValidateArgs),
    /// Run the correlated-normal Monte-Carlo study.
    Simulate(SimulateArgs),
    /// Run the independent-distances Monte-Carlo study.
    SimulateIndependent(SimulateIndependentArgs),
    /// Merge study reports into result tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Intensity CSV: instance IDs, class labels, then one row per sample.
    #[arg(long, conflicts_with = "distances", required_unless_present = "distances")]
    input: Option<PathBuf>,
    /// Distance CSV: instance IDs, class labels, then the N x N matrix.
    #[arg(long)]
    distances: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha0: f64,
    #[arg(long, default_value = "correlation")]
    metric: DistanceMetric,
    /// Label that marks unassigned instances, besides an empty cell and `NA`.
    #[arg(long)]
    mega_label: Option<String>,
    /// Exclude constant instances instead of failing.
    #[arg(long)]
    drop_zero_variance: bool,
    /// JSON report.
    #[arg(long, alias = "out")]
    output: Option<PathBuf>,
    /// Per-instance verdicts as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Jump points of the pooled ECDFs of every class as CSV.
    #[arg(long)]
    dump_ecdf: Option<PathBuf>,
    /// Omit the timestamp from the report.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct StudyOutput {
    /// JSON report.
    #[arg(long, alias = "output")]
    out: Option<PathBuf>,
    /// Per-run metrics CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured replication count.
    #[arg(long)]
    runs: Option<usize>,
    /// Omit the timestamp from the report.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Study configuration JSON.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    output: StudyOutput,
}

#[derive(Args)]
struct SimulateIndependentArgs {
    /// Study configuration JSON; otherwise defaults with `--n1`.
    #[arg(long, required_unless_present = "n1")]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "config")]
    n1: Option<usize>,
    #[command(flatten)]
    output: StudyOutput,
}

#[derive(Args)]
struct ReportArgs {
    /// Study report JSON files.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Directory for the merged CSVs.
    #[arg(long, alias = "output", default_value = ".")]
    out: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            context: format!("cannot create {}", path.display()),
            source: e,
        })
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        context: format!("cannot read {}", path.display()),
        source: e,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn load(args: &ValidateArgs) -> Result<(DistanceMatrix, Vec<Option<String>>, Vec<String>)> {
    let mega = args.mega_label.as_deref();
    if let Some(path) = &args.distances {
        let d = read_distance_csv(path, mega)?;
        return Ok((d.distances, d.labels, Vec::new()));
    }
    let path = args.input.as_ref().expect("clap requires one input");
    let mut input = read_intensity_csv(path, mega)?;
    let mut excluded = Vec::new();
    if args.metric == DistanceMetric::Correlation && args.drop_zero_variance {
        let zero = zero_variance_instances(&input.data);
        if !zero.is_empty() {
            let keep: Vec<usize> = (0..input.data.instances()).filter(|i| !zero.contains(i)).collect();
            excluded = zero.iter().map(|&i| input.data.ids()[i].clone()).collect();
            log::warn!("excluding zero-variance instances: {}", excluded.join(", "));
            input.labels = keep.iter().map(|&i| input.labels[i].clone()).collect();
            input.data = input.data.select(&keep)?;
        }
    }
    Ok((build_distance_matrix(&input.data, args.metric)?, input.labels, excluded))
}

fn validate(args: ValidateArgs) -> Result<()> {
    let cfg = TestConfig::new(args.alpha0, args.metric)?;
    let (d, labels, excluded) = load(&args)?;
    let labeling = ClassLabeling::from_labels(&labels);
    let v = validate_all(&d, &labeling, &cfg);
    print!("{}", summary_table(&v));

    if let Some(path) = &args.dump_ecdf {
        let mut estimates = Vec::new();
        for k in labeling.class_ids() {
            let blocks = build_partitioned_view(&d, &labeling, k)?;
            if let Ok((_, est)) = analyze_blocks(&blocks, &cfg) {
                estimates.push((blocks.class, est));
            }
        }
        write_ecdf_dump(create(path)?, estimates.iter().map(|(c, e)| (c.as_str(), e)))?;
    }
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["class", "id", "z", "rejected"])?;
        for r in &v.results {
            for i in &r.instances {
                w.write_record([&r.class_id, &i.id, &i.z.to_string(), &i.rejected.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::Io {
            context: format!("writing {}", path.display()),
            source: e,
        })?;
    }
    let source = args.input.as_ref().or(args.distances.as_ref()).expect("clap requires one input");
    let report = ValidationReport {
        schema_version: VALIDATION_SCHEMA.into(),
        input: source.display().to_string(),
        config: cfg,
        instances: d.size(),
        mega_class_size: labeling.mega_members().len(),
        merged_singletons: labeling.merged_singletons().to_vec(),
        excluded,
        classes: v.results,
        failures: v.failures,
        generated_at: (!args.deterministic).then(timestamp),
    };
    if let Some(path) = &args.output {
        write_json(path, &report)?;
    }
    Ok(())
}

fn finish_study(mut report: StudyReport, out: &StudyOutput) -> Result<()> {
    if !out.deterministic {
        report.generated_at = Some(timestamp());
    }
    let m = &report.summary.metrics;
    let show = |s: &labelcheck::MetricSummary| match (s.mean, s.se) {
        (Some(mean), Some(se)) => format!("{mean:.4} ± {se:.4}"),
        (Some(mean), None) => format!("{mean:.4}"),
        _ => "undefined".into(),
    };
    println!("runs         {} ({} excluded)", report.runs.len(), report.excluded());
    println!("FDR          {}", show(&m.fdr));
    println!("FOR          {}", show(&m.for_rate));
    println!("sensitivity  {}", show(&m.sensitivity));
    println!("specificity  {}", show(&m.specificity));
    println!("retained     {}", show(&report.summary.retained));
    println!("tau_hat      {}", show(&report.summary.tau_hat));
    if let Some(path) = &out.csv {
        write_runs_csv(create(path)?, &report)?;
    }
    if let Some(path) = &out.out {
        write_json(path, &report)?;
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg: StudyConfig = read_config(&args.config)?;
    cfg.seed = args.output.seed.unwrap_or(cfg.seed);
    cfg.runs = args.output.runs.unwrap_or(cfg.runs);
    finish_study(run_study(&cfg)?, &args.output)
}

fn simulate_independent(args: SimulateIndependentArgs) -> Result<()> {
    let mut cfg = match (&args.config, args.n1) {
        (Some(path), _) => read_config(path)?,
        (None, Some(n1)) => IndependentStudyConfig::new(n1),
        (None, None) => unreachable!("clap requires --config or --n1"),
    };
    cfg.seed = args.output.seed.unwrap_or(cfg.seed);
    cfg.runs = args.output.runs.unwrap_or(cfg.runs);
    finish_study(run_independent_study(&cfg)?, &args.output)
}

fn report(args: ReportArgs) -> Result<()> {
    let reports = args.reports.iter().map(|p| read_study_report(p)).collect::<Result<Vec<_>>>()?;
    let rows = labelcheck::report::merge_reports(reports)?;
    for path in write_tables(&args.out, &rows)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("cannot size the thread pool: {e}");
        }
    }
    let outcome = match cli.command {
        Command::Validate(a) => validate(a),
        Command::Simulate(a) => simulate(a),
        Command::SimulateIndependent(a) => simulate_independent(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 1 } else { 2 })
        }
    }
}
