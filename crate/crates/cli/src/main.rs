//! Command-line interface: the clustering-poisoning pipeline as composable
//! subcommands. Exit codes: 0 success, 1 runtime error (single-line
//! diagnostic naming the stage), 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use poisonclust::attack::{
    run_attack, AttackOptions, BandwidthMode, ClusterCountMode, CutoffMode, StrategyKind,
};
use poisonclust::dataset::{
    load_reports, synth_generate, ReportFormat, ReportSet, SplitMode, SynthConfig,
};
use poisonclust::embedding::{build_feature_space, dump_vectors, embed_set, EmbeddedDataset};
use poisonclust::hac;
use poisonclust::harness::render::{line_chart, parse_aggregate_csv, render_curves, Series};
use poisonclust::harness::{run_experiment, write_results, DataSource, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "poisonclust",
    version,
    about = "Embed behavioral reports, cluster them with single linkage, and evaluate poisoning attacks"
)]
struct Cli {
    /// Cap the worker thread count (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset (JSONL).
    Synth(SynthArgs),
    /// Embed reports as normalized binary q-gram vectors and dump them.
    Embed(EmbedArgs),
    /// Build the single-linkage hierarchy; optionally cut it.
    Cluster(ClusterArgs),
    /// Calibrate the cutoff distance by maximizing the F-measure.
    Calibrate(CalibrateArgs),
    /// Run one poisoning strategy and write its trace.
    Attack(AttackArgs),
    /// Run the full protocol: split, calibrate, attack, repeat, aggregate.
    Experiment(ExperimentArgs),
    /// Re-render SVG curves from an experiment output directory.
    Render(RenderArgs),
}

#[derive(Args)]
struct SynthFlags {
    /// Number of synthetic families.
    #[arg(long = "synth-families", default_value_t = 10)]
    families: usize,
    /// Samples per family, `N` or `LO,HI`.
    #[arg(long = "synth-samples", default_value = "18,22", value_parser = parse_range)]
    samples: (usize, usize),
    /// Token vocabulary size.
    #[arg(long = "synth-vocab", default_value_t = 120)]
    vocab: usize,
    /// Core tokens per family.
    #[arg(long = "synth-core-tokens", default_value_t = 10)]
    core_tokens: usize,
    /// Probability of including each core token in a sample.
    #[arg(long = "synth-core-prob", default_value_t = 0.7)]
    core_prob: f64,
    /// Noise tokens per sample, `N` or `LO,HI`.
    #[arg(long = "synth-noise", default_value = "0,2", value_parser = parse_range)]
    noise: (usize, usize),
}

impl SynthFlags {
    fn config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            family_count: self.families,
            samples_per_family: self.samples,
            vocabulary_size: self.vocab,
            core_tokens_per_family: self.core_tokens,
            core_inclusion_prob: self.core_prob,
            noise_tokens_per_sample: self.noise,
            seed,
        }
    }
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let parse_one = |t: &str| t.trim().parse::<usize>().map_err(|e| e.to_string());
    match s.split_once(',') {
        Some((lo, hi)) => Ok((parse_one(lo)?, parse_one(hi)?)),
        None => {
            let n = parse_one(s)?;
            Ok((n, n))
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    synth: SynthFlags,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSONL file.
    #[arg(long, short, default_value = "reports.jsonl")]
    output: PathBuf,
}

#[derive(Args)]
struct InputFlags {
    /// Input report file.
    #[arg(long, short)]
    input: PathBuf,
    /// Input format.
    #[arg(long, default_value = "token_lines")]
    format: ReportFormat,
    /// Q-gram length.
    #[arg(long, default_value_t = 1)]
    qgram: usize,
}

impl InputFlags {
    fn load(&self) -> Result<ReportSet> {
        load_reports(&self.input, self.format)
            .with_context(|| format!("loading reports from {}", self.input.display()))
    }

    fn embed(&self) -> Result<(ReportSet, EmbeddedDataset)> {
        let set = self.load()?;
        let space =
            Arc::new(build_feature_space(&set, self.qgram).context("building the feature space")?);
        let data = embed_set(&set, &space).context("embedding reports")?;
        Ok((set, data))
    }
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    input: InputFlags,
    /// Unused; accepted for interface uniformity.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output vector dump (`id<TAB>idx1,idx2,...`).
    #[arg(long, short, default_value = "vectors.tsv")]
    output: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputFlags,
    /// Cut the dendrogram at this height.
    #[arg(long, conflicts_with = "calibrate")]
    cutoff: Option<f64>,
    /// Calibrate the cutoff on the input labels, then cut.
    #[arg(long)]
    calibrate: bool,
    /// Unused; accepted for interface uniformity.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, short, default_value = "clustering")]
    output: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    input: InputFlags,
    /// Unused; accepted for interface uniformity.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional file to write the calibrated cutoff to.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    input: InputFlags,
    /// Poisoning strategy.
    #[arg(long)]
    strategy: StrategyKind,
    /// Injection budget as a fraction of the dataset size.
    #[arg(long, default_value_t = 0.05, conflicts_with = "count")]
    max_fraction: f64,
    /// Injection budget as an absolute count.
    #[arg(long)]
    count: Option<usize>,
    /// Cutoff defining the reference clustering; calibrated on the input
    /// labels when omitted.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Cutoff selection under attack: worst-case or fixed.
    #[arg(long, default_value = "worst-case")]
    cutoff_mode: CutoffMode,
    /// KDE bandwidth for bridge-soft: `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    bandwidth: BandwidthMode,
    /// Count all clusters instead of clusters on original samples only.
    #[arg(long)]
    count_all_clusters: bool,
    /// Attack randomness seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for trace.csv and trace.steps.json.
    #[arg(long, short, default_value = "attack")]
    output: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Input report file; omit to generate synthetic data.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Input format.
    #[arg(long, default_value = "token_lines")]
    format: ReportFormat,
    #[command(flatten)]
    synth: SynthFlags,
    /// Q-gram length.
    #[arg(long, default_value_t = 1)]
    qgram: usize,
    /// Strategies to run (repeatable); defaults to all six.
    #[arg(long = "strategy")]
    strategies: Vec<StrategyKind>,
    /// Maximum poison fraction of the evaluation split.
    #[arg(long, default_value_t = 0.05)]
    max_fraction: f64,
    /// Number of repetitions.
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Cutoff selection under attack: worst-case or fixed.
    #[arg(long, default_value = "worst-case")]
    cutoff_mode: CutoffMode,
    /// KDE bandwidth for bridge-soft: `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    bandwidth: BandwidthMode,
    /// Count all clusters instead of clusters on original samples only.
    #[arg(long)]
    count_all_clusters: bool,
    /// Split without family stratification.
    #[arg(long)]
    no_stratify: bool,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, short, default_value = "results")]
    output: PathBuf,
    /// Overwrite an existing output directory.
    #[arg(long)]
    force: bool,
    /// Also render SVG curves.
    #[arg(long)]
    render: bool,
}

#[derive(Args)]
struct RenderArgs {
    /// Experiment output directory holding aggregate_*.csv files.
    #[arg(long, short)]
    input: PathBuf,
    /// Unused; accepted for interface uniformity.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the SVG files; defaults to the input directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .is_err()
        {
            eprintln!("error: worker pool already initialized");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => synth(args),
        Command::Embed(args) => embed(args),
        Command::Cluster(args) => cluster(args),
        Command::Calibrate(args) => calibrate(args),
        Command::Attack(args) => attack(args),
        Command::Experiment(args) => experiment(args),
        Command::Render(args) => render(args),
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let set = synth_generate(&args.synth.config(args.seed)).context("synth stage")?;
    let mut out = String::new();
    for report in set.reports() {
        out.push_str(&serde_json_line(report)?);
        out.push('\n');
    }
    write_file(&args.output, &out)?;
    println!(
        "wrote {} reports ({} families) to {}",
        set.len(),
        args.synth.families,
        args.output.display()
    );
    Ok(())
}

fn serde_json_line(report: &poisonclust::Report) -> Result<String> {
    serde_json::to_string(report).context("serializing report")
}

fn embed(args: EmbedArgs) -> Result<()> {
    let (_, data) = args.input.embed().context("embed stage")?;
    write_file(&args.output, &dump_vectors(&data))?;
    println!(
        "embedded {} reports into {} dimensions -> {}",
        data.len(),
        data.space().dim(),
        args.output.display()
    );
    Ok(())
}

fn cluster(args: ClusterArgs) -> Result<()> {
    let (set, data) = args.input.embed().context("cluster stage")?;
    let dend = hac::single_linkage::<f64>(&data).context("cluster stage")?;
    write_file(&args.output.join("dendrogram.csv"), &dend.to_csv())?;

    let cutoff = if args.calibrate {
        let labels = set
            .labels()
            .ok_or_else(|| anyhow::anyhow!("calibration requires family labels"))
            .context("cluster stage")?;
        Some(hac::calibrate_on(&dend, &labels).context("cluster stage")?)
    } else {
        args.cutoff
    };

    if let Some(cutoff) = cutoff {
        let part = hac::cut(&dend, cutoff);
        let mut csv = String::from("index,id,cluster\n");
        for (i, v) in data.vectors().iter().enumerate() {
            csv.push_str(&format!(
                "{i},{},{}\n",
                v.origin_id().unwrap_or(""),
                part.cluster_of(i)
            ));
        }
        write_file(&args.output.join("clusters.csv"), &csv)?;
        println!(
            "cut at {cutoff}: {} clusters over {} samples -> {}",
            part.k(),
            part.len(),
            args.output.display()
        );
    } else {
        println!(
            "wrote {} merges -> {}",
            dend.merges().len(),
            args.output.display()
        );
    }
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let (_, data) = args.input.embed().context("calibrate stage")?;
    let cutoff = hac::calibrate_cutoff::<f64>(&data).context("calibrate stage")?;
    if let Some(path) = &args.output {
        write_file(path, &format!("{cutoff}\n"))?;
    }
    println!("{cutoff}");
    Ok(())
}

fn attack(args: AttackArgs) -> Result<()> {
    let (_, data) = args.input.embed().context("attack stage")?;
    let cutoff = match args.cutoff {
        Some(c) => c,
        None => hac::calibrate_cutoff::<f64>(&data)
            .context("attack stage (calibrating cutoff on input)")?,
    };
    let m_max = match args.count {
        Some(m) => m,
        None => (args.max_fraction * data.len() as f64).ceil() as usize,
    };
    let opts = AttackOptions {
        cutoff,
        cutoff_mode: args.cutoff_mode,
        bandwidth: args.bandwidth,
        cluster_count: if args.count_all_clusters {
            ClusterCountMode::All
        } else {
            ClusterCountMode::OriginalsOnly
        },
    };
    let trace =
        run_attack(&data, args.strategy, m_max, &opts, args.seed).context("attack stage")?;
    write_file(&args.output.join("trace.csv"), &trace.records_csv())?;
    write_file(
        &args.output.join("trace.steps.json"),
        &(trace.steps_json() + "\n"),
    )?;
    let last = trace.records.last().expect("trace has records");
    println!(
        "{}: injected {} points (cutoff {cutoff}), objective {} with {} clusters -> {}",
        args.strategy,
        trace.injected.len(),
        last.objective_dc,
        last.clusters,
        args.output.display()
    );
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let data = match &args.input {
        Some(path) => DataSource::Files {
            path: path.clone(),
            format: args.format,
        },
        None => DataSource::Synth(args.synth.config(args.seed)),
    };
    let strategies = if args.strategies.is_empty() {
        StrategyKind::ALL.to_vec()
    } else {
        args.strategies.clone()
    };
    let config = ExperimentConfig {
        data,
        q: args.qgram,
        strategies,
        max_fraction: args.max_fraction,
        repetitions: args.reps,
        cutoff_mode: args.cutoff_mode,
        bandwidth: args.bandwidth,
        cluster_count: if args.count_all_clusters {
            ClusterCountMode::All
        } else {
            ClusterCountMode::OriginalsOnly
        },
        split_mode: if args.no_stratify {
            SplitMode::Unstratified
        } else {
            SplitMode::Stratified
        },
        master_seed: args.seed,
    };
    let result = run_experiment(&config).context("experiment stage")?;
    let manifest = write_results(&result, &args.output, args.force).context("writing results")?;
    if args.render {
        render_curves(&result, &args.output).context("rendering curves")?;
    }
    let cutoffs: Vec<String> = result
        .repetitions
        .iter()
        .map(|r| format!("{:.4}", r.calibrated_cutoff))
        .collect();
    println!(
        "{} repetitions x {} strategies -> {} files in {} (calibrated cutoffs: {})",
        result.repetitions.len(),
        result.aggregates.len(),
        manifest.files.len() + 1,
        args.output.display(),
        cutoffs.join(", ")
    );
    Ok(())
}

fn render(args: RenderArgs) -> Result<()> {
    let out_dir = args.output.clone().unwrap_or_else(|| args.input.clone());
    let mut entries: Vec<PathBuf> = fs::read_dir(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("aggregate_") && n.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    entries.sort();
    if entries.is_empty() {
        bail!(
            "render stage: no aggregate_*.csv files in {}",
            args.input.display()
        );
    }

    let mut objective = Vec::new();
    let mut clusters = Vec::new();
    let mut f_measure = Vec::new();
    for path in &entries {
        let name = path
            .file_stem()
            .and_then(|n| n.to_str())
            .unwrap_or("series")
            .trim_start_matches("aggregate_")
            .to_string();
        let content =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let (o, c, f) = parse_aggregate_csv(&name, &content).context("render stage")?;
        objective.push(o);
        clusters.push(c);
        f_measure.push(f);
    }

    let charts: [(&str, &str, &[Series]); 3] = [
        ("objective.svg", "objective d_c", &objective),
        ("clusters.svg", "clusters", &clusters),
        ("f_measure.svg", "F-measure", &f_measure),
    ];
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for (file, label, series) in charts {
        let svg = line_chart(&format!("{label} vs. poison fraction"), label, series);
        write_file(&out_dir.join(file), &svg)?;
    }
    println!(
        "rendered 3 charts for {} strategies -> {}",
        entries.len(),
        out_dir.display()
    );
    Ok(())
}
