use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use isodepth::casestudy::{
    construct_case, iforest_detects, knn_detects, predict_central_single, predict_marginal_clustered,
    predict_marginal_single_iforest, predict_marginal_single_knn, verify_columns, CaseKind, CaseParams, Calibration,
    ConstructedCase, Detector, ThresholdReport,
};
use isodepth::data::{density_metrics, jitter, load_csv, sort_and_validate, Dataset, DensityMetrics, SortedSample1D};
use isodepth::forest::{fit_forest, Forest};
use isodepth::harness::{convergence_experiment, uniform_gap_statistics, ExperimentConfig};
use isodepth::knn::{knn_scores, write_scores_csv, KnnConfig};
use isodepth::oracle::depth_profile;
use isodepth::walk::{absorption_cdf_series, build_chain, expected_steps};
use isodepth::{Error, Result};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "isodepth", version, about = "Isolation Forest depths, exact expected depths and k-NN scores")]
struct Cli {
    /// Seed for every randomized step [default: 42, or the config file's seed]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the main artifact here instead of standard output
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Add seeded uniform noise in [-EPS, EPS] to loaded values (breaks ties)
    #[arg(long, global = true, value_name = "EPS")]
    jitter: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a forest on a CSV file; writes the forest JSON and training scores
    Fit(FitArgs),
    /// Score the rows of a CSV file with a saved forest
    Score(ScoreArgs),
    /// Exact expected depth of every point of one column
    Oracle(ColumnArgs),
    /// Random-walk chain for one point of one column
    Walk(WalkArgs),
    /// k-NN outlier scores
    Knn(KnnArgs),
    /// Build a synthetic anomaly case and report its detection threshold
    Case(CaseArgs),
    /// Check the density assumption on every numeric column
    Verify(InputArgs),
    /// Forest convergence experiment from a JSON config
    Converge(ConvergeArgs),
    /// Gap statistics of uniform samples
    Gapstats(GapArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// Comma-separated column names [default: every numeric column]
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 256)]
    psi: usize,
    /// Where to save the fitted forest
    #[arg(long)]
    forest: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    forest: PathBuf,
}

#[derive(Args, Debug)]
struct ColumnArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long)]
    column: String,
}

#[derive(Args, Debug)]
struct WalkArgs {
    #[command(flatten)]
    column: ColumnArgs,
    /// 1-based index of the point in sorted order
    #[arg(long)]
    target: usize,
}

#[derive(Args, Debug)]
struct KnnArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, short)]
    k: usize,
    /// Keep each row among its own candidate neighbours
    #[arg(long)]
    include_self: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    MarginalSingle,
    CentralSingle,
    MarginalClustered,
    CounterexampleMarginal,
    CounterexampleCentral,
    CounterexampleClustered,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DetectorArg {
    Iforest,
    Knn,
}

#[derive(Args, Debug)]
struct CaseArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, value_enum, default_value_t = DetectorArg::Iforest)]
    detector: DetectorArg,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    n0: usize,
    #[arg(long, default_value_t = 3)]
    n1: usize,
    #[arg(long, default_value_t = 1.0)]
    normal_gap: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Anomaly gap (theta for central and clustered kinds)
    #[arg(long, default_value_t = 5.0)]
    theta: f64,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(short, long)]
    k: Option<usize>,
    /// Threshold constant overriding the shipped calibration
    #[arg(long)]
    constant: Option<f64>,
    /// Also write the threshold report here (it goes to standard error otherwise)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Also write the JSON summary here
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GapArgs {
    #[arg(long, short)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
}

struct Ctx {
    seed: u64,
    output: Option<PathBuf>,
    format: Format,
    jitter: Option<f64>,
}

impl Ctx {
    fn sink(&self) -> Result<Box<dyn Write>> {
        open_sink(self.output.as_deref())
    }

    /// Comment line opening every CSV artifact.
    fn csv_header(&self, command: &str, config: &str) -> String {
        let line = format!("# isodepth {VERSION} {command} seed={} {config}", self.seed);
        format!("{}\n", line.trim_end())
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut out = self.sink()?;
        serde_json::to_writer_pretty(&mut out, value)?;
        writeln!(out).map_err(io_err(self.output.as_deref()))?;
        out.flush().map_err(io_err(self.output.as_deref()))
    }

    fn emit_csv(&self, command: &str, config: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let mut out = self.sink()?;
        out.write_all(self.csv_header(command, config).as_bytes()).map_err(io_err(self.output.as_deref()))?;
        body(&mut out)?;
        out.flush().map_err(io_err(self.output.as_deref()))
    }

    fn load(&self, input: &InputArgs) -> Result<Dataset> {
        let data = load_csv(&input.input, input.columns.as_deref())?;
        self.jittered(data)
    }

    fn load_column(&self, args: &ColumnArgs) -> Result<SortedSample1D> {
        let data = self.jittered(load_csv(&args.input, Some(std::slice::from_ref(&args.column)))?)?;
        sort_and_validate(data.column(0))
    }

    fn jittered(&self, data: Dataset) -> Result<Dataset> {
        match self.jitter {
            None => Ok(data),
            Some(eps) if eps >= 0.0 && eps.is_finite() => {
                let values: Vec<f64> = data.rows().flatten().copied().collect();
                let names = data.column_names().to_vec();
                Dataset::from_flat(jitter(&values, eps, self.seed), data.n(), data.d(), Some(names))
            }
            Some(eps) => Err(Error::InvalidParams(format!("jitter must be non-negative, got {eps}"))),
        }
    }
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("<stdout>")), source }
}

fn open_sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err(Some(p)))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(Some(path)))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(Some(path)))
}

fn write_row_scores(out: &mut dyn Write, data: &Dataset, scores: &[f64]) -> Result<()> {
    let mut w = csv_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend(data.column_names().iter().cloned());
    header.push("score".into());
    w.write_record(&header).map_err(csv_err)?;
    for (r, row) in data.rows().enumerate() {
        let mut rec = vec![(r + 1).to_string()];
        rec.extend(row.iter().map(f64::to_string));
        rec.push(scores[r].to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| csv_err(e.into()))
}

fn csv_writer(out: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::Writer::from_writer(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e)
}

#[derive(Serialize)]
struct ScoreDocument<'a> {
    seed: u64,
    columns: &'a [String],
    scores: &'a [f64],
}

fn cmd_fit(ctx: &Ctx, args: &FitArgs) -> Result<()> {
    let data = ctx.load(&args.input)?;
    let forest = fit_forest(&data, args.trees, args.psi, ctx.seed)?;
    write_file(&args.forest, &forest.to_json()?)?;
    let scores = forest.score_dataset(&data)?;
    emit_scores(ctx, "fit", &format!("trees={} psi={}", args.trees, forest.subsample_size()), &data, &scores)
}

fn emit_scores(ctx: &Ctx, command: &str, config: &str, data: &Dataset, scores: &[f64]) -> Result<()> {
    match ctx.format {
        Format::Csv => ctx.emit_csv(command, config, |out| write_row_scores(out, data, scores)),
        Format::Json => ctx.emit_json(&ScoreDocument { seed: ctx.seed, columns: data.column_names(), scores }),
    }
}

fn cmd_score(ctx: &Ctx, args: &ScoreArgs) -> Result<()> {
    let forest = Forest::from_json(&read_file(&args.forest)?)?;
    let data = ctx.load(&args.input)?;
    let scores = forest.score_dataset(&data)?;
    emit_scores(ctx, "score", &format!("trees={} psi={}", forest.len(), forest.subsample_size()), &data, &scores)
}

fn cmd_oracle(ctx: &Ctx, args: &ColumnArgs) -> Result<()> {
    let profile = depth_profile(&ctx.load_column(args)?)?;
    match ctx.format {
        Format::Csv => ctx.emit_csv("oracle", &format!("column={}", args.column), |out| profile.write_csv(out)),
        Format::Json => ctx.emit_json(&profile),
    }
}

fn cmd_walk(ctx: &Ctx, args: &WalkArgs) -> Result<()> {
    let sample = ctx.load_column(&args.column)?;
    let chain = build_chain(&sample, args.target)?;
    let steps = expected_steps(&chain);
    let cdf = absorption_cdf_series(&chain);
    match ctx.format {
        Format::Json => {
            #[derive(Serialize)]
            struct WalkDocument<'a> {
                expected_steps: f64,
                absorption_cdf: &'a [f64],
                chain: &'a isodepth::WalkChain,
            }
            ctx.emit_json(&WalkDocument { expected_steps: steps, absorption_cdf: &cdf, chain: &chain })
        }
        Format::Csv => {
            let config = format!("column={} target={} expected_steps={steps}", args.column.column, args.target);
            ctx.emit_csv("walk", &config, |out| {
                let mut w = csv_writer(out);
                w.write_record(["xi", "cdf"]).map_err(csv_err)?;
                for (xi, p) in cdf.iter().enumerate() {
                    w.write_record([xi.to_string(), p.to_string()]).map_err(csv_err)?;
                }
                w.flush().map_err(|e| csv_err(e.into()))
            })
        }
    }
}

fn cmd_knn(ctx: &Ctx, args: &KnnArgs) -> Result<()> {
    let data = ctx.load(&args.input)?;
    let cfg = KnnConfig { k: args.k, exclude_self: !args.include_self };
    let scores = knn_scores(&data, &cfg)?;
    match ctx.format {
        Format::Csv => ctx.emit_csv("knn", &format!("k={} exclude_self={}", cfg.k, cfg.exclude_self), |out| {
            write_scores_csv(out, &data, &scores)
        }),
        Format::Json => ctx.emit_json(&ScoreDocument { seed: ctx.seed, columns: data.column_names(), scores: &scores }),
    }
}

fn gap_metrics(gaps: &[f64]) -> Result<DensityMetrics> {
    if gaps.is_empty() {
        return Err(Error::InvalidParams("the case has no normal gaps to measure".into()));
    }
    let hi = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    DensityMetrics::from_bounds(hi, lo)
}

fn case_report(case: &ConstructedCase, args: &CaseArgs, detector: Detector) -> Result<ThresholdReport> {
    let s = &case.sample;
    let gaps = s.gaps();
    let calibration = args.constant.map_or(Calibration::Default, Calibration::Constant);
    match case.kind {
        CaseKind::MarginalSingle | CaseKind::CounterexampleMarginal => {
            let gap = gaps[0];
            if s.len() < 3 {
                return Err(Error::InvalidParams("marginal cases need n >= 3 to measure the normal block".into()));
            }
            let m = density_metrics(s, 2, s.len() - 1)?;
            Ok(match detector {
                Detector::Iforest => predict_marginal_single_iforest(&m, gap),
                Detector::Knn => predict_marginal_single_knn(&m, gap, args.k.unwrap_or(1)),
            })
        }
        CaseKind::CentralSingle | CaseKind::CounterexampleCentral => {
            let a = case.anomalies[0];
            let theta = gaps[a - 2].min(gaps[a - 1]);
            let normal: Vec<f64> = gaps.iter().enumerate().filter(|&(g, _)| g + 2 != a && g + 1 != a).map(|(_, &v)| v).collect();
            predict_central_single(detector, &gap_metrics(&normal)?, theta, s.len() - 1, args.k, calibration)
        }
        CaseKind::MarginalClustered | CaseKind::CounterexampleClustered => {
            let n1 = case.anomalies.len();
            predict_marginal_clustered(detector, &gap_metrics(&gaps[n1..])?, gaps[n1 - 1], n1, args.k, calibration)
        }
    }
}

fn cmd_case(ctx: &Ctx, args: &CaseArgs) -> Result<()> {
    let kind = match args.kind {
        KindArg::MarginalSingle => CaseKind::MarginalSingle,
        KindArg::CentralSingle => CaseKind::CentralSingle,
        KindArg::MarginalClustered => CaseKind::MarginalClustered,
        KindArg::CounterexampleMarginal => CaseKind::CounterexampleMarginal,
        KindArg::CounterexampleCentral => CaseKind::CounterexampleCentral,
        KindArg::CounterexampleClustered => CaseKind::CounterexampleClustered,
    };
    let detector = match args.detector {
        DetectorArg::Iforest => Detector::Iforest,
        DetectorArg::Knn => Detector::Knn,
    };
    let params = CaseParams {
        n: args.n,
        n0: args.n0,
        n1: args.n1,
        normal_gap: args.normal_gap,
        kappa: args.kappa,
        anomaly_gap: args.theta,
        epsilon: args.epsilon,
    };
    let case = construct_case(kind, &params)?;
    let report = case_report(&case, args, detector)?;
    let exact = match detector {
        Detector::Iforest => iforest_detects(&case.sample, &case.anomalies)?,
        Detector::Knn => knn_detects(&case.sample, &case.anomalies, args.k.unwrap_or(1))?,
    };

    #[derive(Serialize)]
    struct CaseDocument<'a> {
        report: &'a ThresholdReport,
        /// Strict separation under the exact detector on this dataset.
        exact_detection: bool,
        anomalies: &'a [usize],
    }
    let doc = CaseDocument { report: &report, exact_detection: exact, anomalies: &case.anomalies };
    let text = serde_json::to_string_pretty(&doc)?;
    match &args.report {
        Some(p) => write_file(p, &format!("{text}\n"))?,
        None if ctx.format == Format::Csv => eprintln!("{text}"),
        None => {}
    }
    match ctx.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Full<'a> {
                #[serde(flatten)]
                doc: CaseDocument<'a>,
                x: &'a [f64],
            }
            ctx.emit_json(&Full { doc, x: case.sample.values() })
        }
        Format::Csv => ctx.emit_csv("case", &format!("kind={}", args.kind.to_possible_value().expect("no skipped variants").get_name()), |out| {
            let mut w = csv_writer(out);
            w.write_record(["index", "x", "anomaly"]).map_err(csv_err)?;
            for (r, x) in case.sample.values().iter().enumerate() {
                let flag = case.anomalies.contains(&(r + 1));
                w.write_record([(r + 1).to_string(), x.to_string(), flag.to_string()]).map_err(csv_err)?;
            }
            w.flush().map_err(|e| csv_err(e.into()))
        }),
    }
}

fn cmd_verify(ctx: &Ctx, args: &InputArgs) -> Result<()> {
    let summary = verify_columns(&ctx.load(args)?);
    eprintln!("{} of {} valid columns pass ({} columns total)", summary.successful, summary.valid, summary.total);
    match ctx.format {
        Format::Csv => ctx.emit_csv("verify", "", |out| summary.write_csv(out)),
        Format::Json => ctx.emit_json(&summary),
    }
}

fn cmd_converge(ctx: &Ctx, args: &ConvergeArgs, seed_flag: Option<u64>) -> Result<()> {
    let mut cfg: ExperimentConfig = serde_json::from_str(&read_file(&args.config)?)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = seed_flag {
        cfg.seed = seed;
    }
    let result = convergence_experiment(&cfg)?;
    if let Some(p) = &args.summary {
        write_file(p, &format!("{}\n", result.summary_json()?))?;
    }
    match ctx.format {
        Format::Csv => {
            let config = format!("n={} psi={} repeats={}", result.n, cfg.psi, cfg.repeats);
            ctx.emit_csv("converge", &config, |out| result.write_csv(out))
        }
        Format::Json => ctx.emit_json(&result),
    }
}

fn cmd_gapstats(ctx: &Ctx, args: &GapArgs) -> Result<()> {
    ctx.emit_json(&uniform_gap_statistics(args.n, args.trials, ctx.seed)?)
}

fn run(cli: Cli) -> Result<()> {
    let seed = match &cli.command {
        Command::Converge(a) => match cli.seed {
            Some(s) => s,
            None => serde_json::from_str::<ExperimentConfig>(&read_file(&a.config)?).map(|c| c.seed).unwrap_or(DEFAULT_SEED),
        },
        _ => cli.seed.unwrap_or(DEFAULT_SEED),
    };
    eprintln!("seed: {seed}");
    let ctx = Ctx { seed, output: cli.output, format: cli.format, jitter: cli.jitter };
    match &cli.command {
        Command::Fit(a) => cmd_fit(&ctx, a),
        Command::Score(a) => cmd_score(&ctx, a),
        Command::Oracle(a) => cmd_oracle(&ctx, a),
        Command::Walk(a) => cmd_walk(&ctx, a),
        Command::Knn(a) => cmd_knn(&ctx, a),
        Command::Case(a) => cmd_case(&ctx, a),
        Command::Verify(a) => cmd_verify(&ctx, a),
        Command::Converge(a) => cmd_converge(&ctx, a, cli.seed),
        Command::Gapstats(a) => cmd_gapstats(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
