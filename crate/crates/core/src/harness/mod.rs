//! The full experimental protocol: split, calibrate, attack with every
//! configured strategy over an injection schedule, repeat, average and
//! serialize.

pub mod render;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{
    run_attack, AttackOptions, AttackTrace, BandwidthMode, ClusterCountMode, CutoffMode,
    StrategyKind,
};
use crate::dataset::{self, ReportFormat, ReportSet, SplitMode, SynthConfig};
use crate::embedding::{build_feature_space, embed_set};
use crate::error::{Error, Result};
use crate::hac;
use crate::metrics::MetricsRecord;

/// Where the experiment data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Files { path: PathBuf, format: ReportFormat },
    Synth(SynthConfig),
}

/// Full experiment configuration. Serialized verbatim as `config.json` next
/// to the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub q: usize,
    pub strategies: Vec<StrategyKind>,
    /// Poison budget as a fraction of the evaluation split size.
    pub max_fraction: f64,
    pub repetitions: usize,
    pub cutoff_mode: CutoffMode,
    pub bandwidth: BandwidthMode,
    pub cluster_count: ClusterCountMode,
    pub split_mode: SplitMode,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::InvalidParameter("strategy list is empty".into()));
        }
        if self.q == 0 {
            return Err(Error::InvalidParameter("q-gram length must be >= 1".into()));
        }
        if !(self.max_fraction > 0.0 && self.max_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "max_fraction {} outside (0, 1)",
                self.max_fraction
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be >= 1".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer, the mixing step behind per-repetition seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed derivation: repetitions (and attacks within them) get
/// decoupled streams from one master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// One repetition: its seed, calibrated cutoff and one trace per strategy.
#[derive(Debug, Clone)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub seed: u64,
    pub calibrated_cutoff: f64,
    pub evaluation_size: usize,
    pub traces: Vec<AttackTrace<f64>>,
}

/// Mean and sample standard deviation of every trace measure at one
/// scheduled injection count.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub poison_count: usize,
    pub poison_fraction: f64,
    pub objective_dc_mean: f64,
    pub objective_dc_std: f64,
    pub clusters_mean: f64,
    pub clusters_std: f64,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub recall_mean: f64,
    pub recall_std: f64,
    pub f_measure_mean: f64,
    pub f_measure_std: f64,
}

pub const AGGREGATE_CSV_HEADER: &str = "poison_count,poison_fraction,objective_dc_mean,objective_dc_std,clusters_mean,clusters_std,precision_mean,precision_std,recall_mean,recall_std,f_measure_mean,f_measure_std";

impl AggregateRow {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.poison_count,
            self.poison_fraction,
            self.objective_dc_mean,
            self.objective_dc_std,
            self.clusters_mean,
            self.clusters_std,
            self.precision_mean,
            self.precision_std,
            self.recall_mean,
            self.recall_std,
            self.f_measure_mean,
            self.f_measure_std
        )
    }
}

/// Aggregated curves for one strategy.
#[derive(Debug, Clone)]
pub struct StrategyAggregate {
    pub strategy: StrategyKind,
    pub rows: Vec<AggregateRow>,
}

/// Everything an experiment produces.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub repetitions: Vec<RepetitionResult>,
    pub aggregates: Vec<StrategyAggregate>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        var.sqrt()
    };
    (mean, std)
}

/// Trace record at a scheduled injection count, carrying the final record
/// when the trace terminated early.
fn record_at(trace: &AttackTrace<f64>, count: usize) -> &MetricsRecord<f64> {
    let idx = count.min(trace.records.len() - 1);
    &trace.records[idx]
}

fn aggregate(
    config: &ExperimentConfig,
    repetitions: &[RepetitionResult],
) -> Vec<StrategyAggregate> {
    let schedule_len = repetitions
        .iter()
        .flat_map(|r| r.traces.iter())
        .map(|t| t.records.len())
        .max()
        .unwrap_or(1)
        .max(
            repetitions
                .iter()
                .map(|r| (config.max_fraction * r.evaluation_size as f64).ceil() as usize + 1)
                .max()
                .unwrap_or(1),
        );

    config
        .strategies
        .iter()
        .enumerate()
        .map(|(si, &strategy)| {
            let rows = (0..schedule_len)
                .map(|count| {
                    let mut fractions = Vec::new();
                    let mut dc = Vec::new();
                    let mut clusters = Vec::new();
                    let mut precision = Vec::new();
                    let mut recall = Vec::new();
                    let mut f = Vec::new();
                    for rep in repetitions {
                        let trace = &rep.traces[si];
                        let record = record_at(trace, count);
                        fractions.push(count as f64 / rep.evaluation_size as f64);
                        dc.push(record.objective_dc);
                        clusters.push(record.clusters as f64);
                        precision.push(record.precision);
                        recall.push(record.recall);
                        f.push(record.f_measure);
                    }
                    let (dc_m, dc_s) = mean_std(&dc);
                    let (cl_m, cl_s) = mean_std(&clusters);
                    let (p_m, p_s) = mean_std(&precision);
                    let (r_m, r_s) = mean_std(&recall);
                    let (f_m, f_s) = mean_std(&f);
                    AggregateRow {
                        poison_count: count,
                        poison_fraction: mean_std(&fractions).0,
                        objective_dc_mean: dc_m,
                        objective_dc_std: dc_s,
                        clusters_mean: cl_m,
                        clusters_std: cl_s,
                        precision_mean: p_m,
                        precision_std: p_s,
                        recall_mean: r_m,
                        recall_std: r_s,
                        f_measure_mean: f_m,
                        f_measure_std: f_s,
                    }
                })
                .collect();
            StrategyAggregate { strategy, rows }
        })
        .collect()
}

fn load_data(source: &DataSource) -> Result<ReportSet> {
    match source {
        DataSource::Files { path, format } => dataset::load_reports(path, *format),
        DataSource::Synth(cfg) => dataset::synth_generate(cfg),
    }
}

/// Run the full protocol: for each repetition derive a seed, split, calibrate
/// the cutoff on T, build the reference clustering of S, run every strategy
/// to the injection budget, then aggregate across repetitions. Deterministic
/// given the master seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let data = load_data(&config.data)?;
    if !data.is_labeled() {
        return Err(Error::UnlabeledInput);
    }
    // Perfect-knowledge setting: one feature space over the full dataset.
    let space = Arc::new(build_feature_space(&data, config.q)?);

    let repetitions: Vec<RepetitionResult> = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| {
            let seed = derive_seed(config.master_seed, rep as u64);
            let (t, s) = dataset::split_with(&data, seed, config.split_mode)?;
            let t_emb = embed_set(&t, &space)?;
            let s_emb = embed_set(&s, &space)?;
            let cutoff = hac::calibrate_cutoff::<f64>(&t_emb)?;
            let m_max = (config.max_fraction * s_emb.len() as f64).ceil() as usize;
            if m_max == 0 {
                return Err(Error::InvalidParameter(format!(
                    "budget of {} x {} samples rounds to zero injections",
                    config.max_fraction,
                    s_emb.len()
                )));
            }
            let opts = AttackOptions {
                cutoff,
                cutoff_mode: config.cutoff_mode,
                bandwidth: config.bandwidth,
                cluster_count: config.cluster_count,
            };
            let traces = config
                .strategies
                .iter()
                .enumerate()
                .map(|(si, &strategy)| {
                    let attack_seed = derive_seed(seed, 1 + si as u64);
                    run_attack(&s_emb, strategy, m_max, &opts, attack_seed)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RepetitionResult {
                repetition: rep,
                seed,
                calibrated_cutoff: cutoff,
                evaluation_size: s_emb.len(),
                traces,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let aggregates = aggregate(config, &repetitions);
    Ok(ExperimentResult {
        config: config.clone(),
        repetitions,
        aggregates,
    })
}

/// Manifest of written files with their SHA-256 content hashes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

fn dir_has_entries(dir: &Path) -> bool {
    fs::read_dir(dir)
        .map(|mut entries| entries.next().is_some())
        .unwrap_or(false)
}

/// Write aggregate CSVs, per-repetition raw CSVs and step sidecars, the
/// config echo and a hash manifest under `dir`. Refuses a non-empty
/// directory unless `force` is set.
pub fn write_results(res: &ExperimentResult, dir: &Path, force: bool) -> Result<Manifest> {
    if res.repetitions.is_empty() || res.aggregates.is_empty() {
        return Err(Error::EmptyResult);
    }
    if dir.exists() && dir_has_entries(dir) && !force {
        return Err(Error::OutputExists(dir.to_path_buf()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut entries: Vec<ManifestEntry> = Vec::new();
    let mut write = |name: String, content: String| -> Result<()> {
        let path = dir.join(&name);
        fs::write(&path, &content).map_err(|e| Error::io(&path, e))?;
        let digest = Sha256::digest(content.as_bytes());
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        entries.push(ManifestEntry { path: name, sha256 });
        Ok(())
    };

    let config_json = serde_json::to_string_pretty(&res.config).expect("config serializes") + "\n";
    write("config.json".to_string(), config_json)?;

    for agg in &res.aggregates {
        let mut csv = String::from(AGGREGATE_CSV_HEADER);
        csv.push('\n');
        for row in &agg.rows {
            csv.push_str(&row.to_csv_row());
            csv.push('\n');
        }
        write(format!("aggregate_{}.csv", agg.strategy.slug()), csv)?;
    }

    for rep in &res.repetitions {
        for trace in &rep.traces {
            let base = format!("raw_{}_rep{}", trace.strategy.slug(), rep.repetition);
            write(format!("{base}.csv"), trace.records_csv())?;
            write(format!("{base}.steps.json"), trace.steps_json() + "\n")?;
        }
    }

    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest { files: entries };
    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let path = dir.join("manifest.json");
    fs::write(&path, manifest_json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
