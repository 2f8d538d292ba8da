//! `provlearn` — command-line front door for the provenance-graph learning
//! pipeline. Stages communicate only through documented file formats:
//! provenance logs in, compressed binary graphs (`.pgrf`) and JSON
//! summaries out.
//!
//! Exit codes: 0 success, 1 usage, 2 malformed input, 3 I/O failure,
//! 4 numeric failure. Progress and diagnostics go to standard error;
//! machine-readable results to standard output or files, written atomically
//! (temp file + rename).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use provlearn::features::{
    degree_features, degree_features_for_schema, features_to_json, spectral_node_features_with,
    write_graph_with_features, FeatureError, SpectralConfig,
};
use provlearn::gnn::{GnnError, RGCNModel};
use provlearn::graph::{DatasetSchema, GraphError, GraphFormat, HeteroMultigraph};
use provlearn::parse::{
    parse_auto, parse_spade_json, parse_w3c_prov, DanglingPolicy, ParseError, ProvDocument,
};
use provlearn::synth::{
    export_dataset, generate_dataset_with, load_dataset, AttackVector, GenOptions, SynthError,
};
use provlearn::trainer::{
    cross_validate, evaluate, report, CvSummary, ReportFormat, TrainExample, TrainerError,
    TrainingArguments,
};

#[derive(Parser)]
#[command(
    name = "provlearn",
    version,
    about = "Provenance-graph learning pipeline: convert, inspect, generate, featurize, train, evaluate, report"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    /// Sniff the serialization from the payload.
    Auto,
    /// W3C PROV JSON (object keyed by record category).
    W3c,
    /// SPADE JSON (typed record array or one record per line).
    Spade,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DanglingArg {
    /// Declare a placeholder node for each missing endpoint.
    Synthesize,
    /// Drop edges with missing endpoints.
    Skip,
    /// Treat a missing endpoint as a fatal input error.
    Fail,
}

impl From<DanglingArg> for DanglingPolicy {
    fn from(v: DanglingArg) -> Self {
        match v {
            DanglingArg::Synthesize => DanglingPolicy::Synthesize,
            DanglingArg::Skip => DanglingPolicy::Skip,
            DanglingArg::Fail => DanglingPolicy::Fail,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FeatureKind {
    /// Per-relation in/out degree counts.
    Degree,
    /// Spectral embedding of the multilayer Laplacian, plus degrees.
    Spectral,
}

fn parse_vector(s: &str) -> Result<AttackVector, String> {
    s.parse()
}

fn parse_report_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Parse a provenance log into a compressed binary graph.
    ///
    /// Reads W3C PROV JSON or SPADE JSON (`--in -` for standard input),
    /// normalizes it, and writes the graph. Parser warnings are reported on
    /// standard error as `WARN <code> <detail>`; a one-line JSON stats
    /// summary goes to standard output.
    Convert {
        /// Input provenance log, or `-` for standard input.
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
        format: InputFormat,
        /// Output graph file.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// How to resolve edges whose endpoints were never declared.
        #[arg(long, value_enum, default_value_t = DanglingArg::Synthesize)]
        dangling: DanglingArg,
    },
    /// Print the counting summary of a stored graph as one JSON line.
    Stats {
        /// Graph file (binary or JSON), or `-` for standard input.
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
    },
    /// Generate a seeded synthetic labeled dataset.
    ///
    /// Writes `<out>/<vector>/<class>/<index>.pgrf` plus `manifest.json`.
    /// Identical flags produce byte-identical files.
    Generate {
        /// Attack scenario: xss-stored, xss-reflected, xss-dom,
        /// cl-injection, sql-injection, or brute-force.
        #[arg(long, value_parser = parse_vector)]
        vector: AttackVector,
        /// Number of benign graphs.
        #[arg(long, value_name = "N")]
        benign: usize,
        /// Number of attack graphs.
        #[arg(long, value_name = "N")]
        attack: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplier on node/edge size targets, for scaled-down runs.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Relative spread of per-graph size draws, in [0, 0.5].
        #[arg(long, default_value_t = 0.10)]
        jitter: f64,
        /// Output dataset directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Compute node features for a stored graph.
    ///
    /// By default the features are embedded into a copy of the graph file;
    /// `--json` writes the feature matrices as JSON instead.
    Featurize {
        /// Graph file, or `-` for standard input.
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FeatureKind::Degree)]
        features: FeatureKind,
        /// Spectral embedding dimension.
        #[arg(long, default_value_t = 16)]
        k: usize,
        /// Interlayer coupling strength of the spectral block matrix.
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Eigensolver starting-block seed.
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        /// Output file.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Write features as JSON instead of embedding them in the graph.
        #[arg(long)]
        json: bool,
    },
    /// Cross-validate a classifier on a generated dataset.
    ///
    /// Node features are log1p-squashed per-relation degree counts over the
    /// dataset-wide relation schema. Writes `summary.json` and per-fold
    /// checkpoints under the output directory and prints the report table.
    Train {
        /// Dataset directory produced by `generate`.
        #[arg(long, value_name = "DIR")]
        dataset: PathBuf,
        /// JSON run configuration mirroring the training-argument fields;
        /// absent fields take their defaults.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Output directory for summary and checkpoints.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Score a saved checkpoint on a dataset.
    ///
    /// Features are derived exactly as in `train`, using the checkpoint's
    /// own relation schema. Prints metrics as one JSON line.
    Evaluate {
        /// Checkpoint file.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Dataset directory produced by `generate`.
        #[arg(long, value_name = "DIR")]
        dataset: PathBuf,
        /// Also write the metrics JSON here.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Render a cross-validation summary as text, JSON, or CSV.
    Report {
        /// Summary JSON produced by `train`.
        #[arg(long, value_name = "PATH")]
        summary: PathBuf,
        /// text, json, or csv.
        #[arg(long, default_value = "text", value_parser = parse_report_format)]
        format: ReportFormat,
        /// Write here instead of standard output.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

/// A failed command, classified per the exit-code taxonomy.
enum Failure {
    Usage(String),
    Format(String),
    Io(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Format(_) => 2,
            Failure::Io(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Format(m) | Failure::Io(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::Format(e.to_string())
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure::Format(e.to_string())
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io(inner) => Failure::Io(inner.to_string()),
            other => Failure::Format(other.to_string()),
        }
    }
}

impl From<GnnError> for Failure {
    fn from(e: GnnError) -> Self {
        match e {
            GnnError::NonFiniteLoss => Failure::Numeric(e.to_string()),
            GnnError::Io(inner) => Failure::Io(inner.to_string()),
            _ => Failure::Format(e.to_string()),
        }
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Breakdown { .. } | FeatureError::InvalidBlock { .. } => {
                Failure::Numeric(e.to_string())
            }
            other => Failure::Format(other.to_string()),
        }
    }
}

impl From<TrainerError> for Failure {
    fn from(e: TrainerError) -> Self {
        match e {
            TrainerError::Gnn(inner) => inner.into(),
            TrainerError::Io(inner) => Failure::Io(inner.to_string()),
            other => Failure::Format(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            }
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Convert { input, format, out, dangling } => {
            cmd_convert(&input, format, &out, dangling)
        }
        Command::Stats { input } => cmd_stats(&input),
        Command::Generate { vector, benign, attack, seed, scale, jitter, out } => {
            cmd_generate(vector, benign, attack, seed, scale, jitter, &out)
        }
        Command::Featurize { input, features, k, gamma, seed, out, json } => {
            cmd_featurize(&input, features, k, gamma, seed, &out, json)
        }
        Command::Train { dataset, config, folds, out } => {
            cmd_train(&dataset, config.as_deref(), folds, &out)
        }
        Command::Evaluate { model, dataset, out } => {
            cmd_evaluate(&model, &dataset, out.as_deref())
        }
        Command::Report { summary, format, out } => cmd_report(&summary, format, out.as_deref()),
    }
}

/// Read a whole input, with `-` meaning standard input.
fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::stdin().lock().read_to_end(&mut buf)?;
        Ok(buf)
    } else {
        Ok(fs::read(path)?)
    }
}

/// Write via a sibling temp file and rename, so readers never observe a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn stats_json(g: &HeteroMultigraph) -> String {
    let mut value = serde_json::to_value(g.stats()).expect("stats serialize");
    value["label"] = serde_json::to_value(g.label).expect("label serialize");
    value["scenario"] = serde_json::to_value(&g.scenario).expect("scenario serialize");
    value.to_string()
}

fn cmd_convert(
    input: &Path,
    format: InputFormat,
    out: &Path,
    dangling: DanglingArg,
) -> Result<(), Failure> {
    let raw = read_input(input)?;
    let text = String::from_utf8(raw)
        .map_err(|_| Failure::Format("input is not valid UTF-8".into()))?;
    let doc: ProvDocument = match format {
        InputFormat::Auto => parse_auto(&text),
        InputFormat::W3c => parse_w3c_prov(&text),
        InputFormat::Spade => parse_spade_json(&text),
    }?;
    let doc = doc.normalize_with(dangling.into())?;
    for warning in &doc.warnings {
        eprintln!("WARN {warning}");
    }
    let g = HeteroMultigraph::from_document(&doc)?;
    write_atomic(out, &g.serialize(GraphFormat::BinaryCompressed))?;
    println!("{}", stats_json(&g));
    Ok(())
}

fn cmd_stats(input: &Path) -> Result<(), Failure> {
    let raw = read_input(input)?;
    let g = HeteroMultigraph::deserialize(&raw)?;
    println!("{}", stats_json(&g));
    Ok(())
}

fn cmd_generate(
    vector: AttackVector,
    benign: usize,
    attack: usize,
    seed: u64,
    scale: f64,
    jitter: f64,
    out: &Path,
) -> Result<(), Failure> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Failure::Usage(format!("--scale {scale} must be positive")));
    }
    if !(0.0..=0.5).contains(&jitter) {
        return Err(Failure::Usage(format!("--jitter {jitter} outside [0, 0.5]")));
    }
    let ds = generate_dataset_with(vector, benign, attack, seed, GenOptions { jitter, scale });
    export_dataset(&ds, out)?;
    log::info!("wrote {} graphs under {}", ds.graphs.len(), out.display());
    Ok(())
}

fn cmd_featurize(
    input: &Path,
    features: FeatureKind,
    k: usize,
    gamma: f64,
    seed: u64,
    out: &Path,
    json: bool,
) -> Result<(), Failure> {
    if k == 0 {
        return Err(Failure::Usage("--k must be at least 1".into()));
    }
    let raw = read_input(input)?;
    let g = HeteroMultigraph::deserialize(&raw)?;
    let fs = match features {
        FeatureKind::Degree => degree_features(&g),
        FeatureKind::Spectral => spectral_node_features_with(
            &g,
            &SpectralConfig { k, gamma, seed, ..SpectralConfig::default() },
        )?,
    };
    if json {
        write_atomic(out, &features_to_json(&fs))?;
    } else {
        write_atomic(out, &write_graph_with_features(&g, &fs)?)?;
    }
    println!(r#"{{"nodes":{},"feature_dim":{}}}"#, g.num_nodes(), fs.dim());
    Ok(())
}

/// Ready-to-train examples: schema-aligned degree counts, log1p-squashed.
/// Graphs are consumed one at a time to bound peak memory.
fn prepare_examples(
    graphs: Vec<HeteroMultigraph>,
    schema: &DatasetSchema,
    aggregation: provlearn::gnn::Aggregation,
) -> Result<Vec<TrainExample>, Failure> {
    graphs
        .into_iter()
        .map(|g| {
            let mut feats = degree_features_for_schema(&g, schema).map_err(Failure::from)?;
            for m in &mut feats.matrices {
                m.mapv_inplace(f64::ln_1p);
            }
            TrainExample::prepare(&g, &feats, schema, aggregation).map_err(Failure::from)
        })
        .collect()
}

fn cmd_train(
    dataset: &Path,
    config: Option<&Path>,
    folds: usize,
    out: &Path,
) -> Result<(), Failure> {
    if folds < 2 {
        return Err(Failure::Usage(format!("--folds {folds} must be at least 2")));
    }
    let mut args: TrainingArguments = match config {
        Some(path) => {
            let raw = fs::read(path)?;
            serde_json::from_slice(&raw)
                .map_err(|e| Failure::Format(format!("bad run configuration: {e}")))?
        }
        None => TrainingArguments::default(),
    };
    args.validate().map_err(|e| Failure::Format(e.to_string()))?;

    let ds = load_dataset(dataset)?;
    let schema = DatasetSchema::from_graphs(&ds.graphs);
    let examples = prepare_examples(ds.graphs, &schema, args.aggregation)?;
    if args.checkpoint_dir.is_none() {
        args.checkpoint_dir = Some(out.join("checkpoints"));
    }
    let summary = cross_validate(&args, &examples, &schema, folds, args.seed)?;
    write_atomic(&out.join("summary.json"), &report(&summary, ReportFormat::Json))?;
    let table = report(&summary, ReportFormat::TextTable);
    std::io::stdout().write_all(&table)?;
    Ok(())
}

fn cmd_evaluate(model: &Path, dataset: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let model = RGCNModel::load(model)?;
    let ds = load_dataset(dataset)?;
    let examples = prepare_examples(ds.graphs, model.schema(), model.aggregation())?;
    let metrics = evaluate(&model, &examples)?;
    let mut line = serde_json::to_string(&metrics).expect("metrics serialize");
    line.push('\n');
    if let Some(path) = out {
        write_atomic(path, line.as_bytes())?;
    }
    print!("{line}");
    Ok(())
}

fn cmd_report(summary: &Path, format: ReportFormat, out: Option<&Path>) -> Result<(), Failure> {
    let raw = fs::read(summary)?;
    let parsed: CvSummary = serde_json::from_slice(&raw)
        .map_err(|e| Failure::Format(format!("bad summary JSON: {e}")))?;
    let bytes = report(&parsed, format);
    match out {
        Some(path) => write_atomic(path, &bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}
