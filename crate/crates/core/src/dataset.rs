//! Labeled behavioral report ingestion, synthetic family generation and the
//! calibration/evaluation split.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One behavioral report: an ordered sequence of event tokens, optionally
/// tagged with a family label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    pub events: Vec<String>,
}

/// Where a report set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ingested,
    Synthetic,
}

/// An ordered collection of reports with distinct ids. Either all reports
/// carry a family label or none do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportSet {
    reports: Vec<Report>,
    provenance: Provenance,
}

/// On-disk report formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// One report per line, whitespace-separated event tokens, no labels.
    /// Report id is `<filename>:<line>` (1-based).
    TokenLines,
    /// One JSON object per line: `{"id": ..., "family"?: ..., "events": [...]}`.
    Jsonl,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportFormat::TokenLines => write!(f, "token_lines"),
            ReportFormat::Jsonl => write!(f, "jsonl"),
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token_lines" | "token-lines" => Ok(ReportFormat::TokenLines),
            "jsonl" => Ok(ReportFormat::Jsonl),
            other => Err(Error::InvalidParameter(format!(
                "unknown report format `{other}` (expected token_lines or jsonl)"
            ))),
        }
    }
}

impl ReportSet {
    /// Build a set from reports, enforcing id uniqueness, nonempty event
    /// sequences and all-or-none labeling.
    pub fn new(reports: Vec<Report>, provenance: Provenance) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::DatasetTooSmall { need: 1, got: 0 });
        }
        let mut seen = HashSet::with_capacity(reports.len());
        for r in &reports {
            if r.events.is_empty() {
                return Err(Error::MalformedRecord {
                    path: r.id.clone(),
                    index: 0,
                    reason: "empty event sequence".into(),
                });
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        let labeled = reports.iter().filter(|r| r.family.is_some()).count();
        if labeled != 0 && labeled != reports.len() {
            return Err(Error::MixedLabeling);
        }
        Ok(ReportSet {
            reports,
            provenance,
        })
    }

    pub fn reports(&self) -> &[Report] {
        &self.reports
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    /// True when every report carries a family label.
    pub fn is_labeled(&self) -> bool {
        self.reports.iter().all(|r| r.family.is_some())
    }

    /// Family labels aligned with `reports()`, if labeled.
    pub fn labels(&self) -> Option<Vec<&str>> {
        self.reports
            .iter()
            .map(|r| r.family.as_deref())
            .collect::<Option<Vec<_>>>()
    }
}

/// Configuration for the synthetic family generator. Families get disjoint
/// core token ranges; each sample includes each core token independently and
/// draws extra noise tokens from the whole vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub family_count: usize,
    /// Inclusive range for per-family sample counts.
    pub samples_per_family: (usize, usize),
    pub vocabulary_size: usize,
    pub core_tokens_per_family: usize,
    pub core_inclusion_prob: f64,
    /// Inclusive range for per-sample noise token counts.
    pub noise_tokens_per_sample: (usize, usize),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            family_count: 10,
            samples_per_family: (18, 22),
            vocabulary_size: 120,
            core_tokens_per_family: 10,
            core_inclusion_prob: 0.7,
            noise_tokens_per_sample: (0, 2),
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.family_count == 0 {
            return Err(Error::InfeasibleConfig(
                "family_count must be positive".into(),
            ));
        }
        if self.samples_per_family.0 == 0 || self.samples_per_family.0 > self.samples_per_family.1 {
            return Err(Error::InfeasibleConfig(format!(
                "samples_per_family range {:?} invalid",
                self.samples_per_family
            )));
        }
        if self.core_tokens_per_family == 0 {
            return Err(Error::InfeasibleConfig(
                "core_tokens_per_family must be positive".into(),
            ));
        }
        if !(self.core_inclusion_prob > 0.0 && self.core_inclusion_prob <= 1.0) {
            return Err(Error::InfeasibleConfig(format!(
                "core_inclusion_prob {} outside (0, 1]",
                self.core_inclusion_prob
            )));
        }
        if self.noise_tokens_per_sample.0 > self.noise_tokens_per_sample.1 {
            return Err(Error::InfeasibleConfig(format!(
                "noise_tokens_per_sample range {:?} invalid",
                self.noise_tokens_per_sample
            )));
        }
        // Core token ranges are disjoint across families, so they must fit.
        let needed = self
            .core_tokens_per_family
            .checked_mul(self.family_count)
            .ok_or_else(|| Error::InfeasibleConfig("core token count overflow".into()))?;
        if needed > self.vocabulary_size {
            return Err(Error::InfeasibleConfig(format!(
                "vocabulary of {} tokens cannot host {} families x {} disjoint core tokens",
                self.vocabulary_size, self.family_count, self.core_tokens_per_family
            )));
        }
        Ok(())
    }
}

fn token_name(index: usize, width: usize) -> String {
    format!("t{index:0width$}")
}

/// Generate a labeled synthetic report set. Deterministic given the seed;
/// samples that would come out empty are redrawn so configured sizes are
/// exact.
pub fn synth_generate(cfg: &SynthConfig) -> Result<ReportSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width = cfg.vocabulary_size.saturating_sub(1).to_string().len();
    let mut reports = Vec::new();

    for family in 0..cfg.family_count {
        let family_label = format!("fam{family:02}");
        let core_start = family * cfg.core_tokens_per_family;
        let n_samples = rng.random_range(cfg.samples_per_family.0..=cfg.samples_per_family.1);

        for sample in 0..n_samples {
            let events = loop {
                let mut events: Vec<String> = Vec::new();
                for core in 0..cfg.core_tokens_per_family {
                    if rng.random_bool(cfg.core_inclusion_prob) {
                        events.push(token_name(core_start + core, width));
                    }
                }
                let noise =
                    rng.random_range(cfg.noise_tokens_per_sample.0..=cfg.noise_tokens_per_sample.1);
                for _ in 0..noise {
                    events.push(token_name(rng.random_range(0..cfg.vocabulary_size), width));
                }
                if !events.is_empty() {
                    break events;
                }
            };
            reports.push(Report {
                id: format!("{family_label}-{sample:03}"),
                family: Some(family_label.clone()),
                events,
            });
        }
    }
    ReportSet::new(reports, Provenance::Synthetic)
}

/// Load reports from disk in the given format.
pub fn load_reports(path: &Path, format: ReportFormat) -> Result<ReportSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let display = path.display().to_string();
    let filename = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| display.clone());

    let mut reports = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i + 1;
        match format {
            ReportFormat::TokenLines => {
                let events: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
                if events.is_empty() {
                    return Err(Error::MalformedRecord {
                        path: display,
                        index: lineno,
                        reason: "no tokens on line".into(),
                    });
                }
                reports.push(Report {
                    id: format!("{filename}:{lineno}"),
                    family: None,
                    events,
                });
            }
            ReportFormat::Jsonl => {
                if line.trim().is_empty() {
                    return Err(Error::MalformedRecord {
                        path: display,
                        index: lineno,
                        reason: "blank line".into(),
                    });
                }
                let report: Report =
                    serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                        path: display.clone(),
                        index: lineno,
                        reason: e.to_string(),
                    })?;
                if report.events.is_empty() {
                    return Err(Error::MalformedRecord {
                        path: display,
                        index: lineno,
                        reason: "empty events array".into(),
                    });
                }
                reports.push(report);
            }
        }
    }
    ReportSet::new(reports, Provenance::Ingested)
}

/// How `split` distributes reports over the two halves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Each family split as evenly as possible (default when labels exist).
    Stratified,
    /// Plain random split ignoring labels.
    Unstratified,
}

/// Split a report set into two disjoint halves (T, S) whose sizes differ by
/// at most one. Stratified by family when labels are present.
pub fn split(set: &ReportSet, seed: u64) -> Result<(ReportSet, ReportSet)> {
    split_with(set, seed, SplitMode::Stratified)
}

/// `split` with an explicit stratification mode. Unlabeled sets always split
/// unstratified.
pub fn split_with(set: &ReportSet, seed: u64, mode: SplitMode) -> Result<(ReportSet, ReportSet)> {
    if set.len() < 2 {
        return Err(Error::DatasetTooSmall {
            need: 2,
            got: set.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Index groups to split evenly: one per family when stratifying, a
    // single group otherwise.
    let groups: Vec<Vec<usize>> = if mode == SplitMode::Stratified && set.is_labeled() {
        let mut order: Vec<&str> = Vec::new();
        let mut by_family: std::collections::HashMap<&str, Vec<usize>> =
            std::collections::HashMap::new();
        for (i, r) in set.reports().iter().enumerate() {
            let fam = r.family.as_deref().expect("labeled set");
            let entry = by_family.entry(fam).or_default();
            if entry.is_empty() {
                order.push(fam);
            }
            entry.push(i);
        }
        order
            .into_iter()
            .map(|f| by_family.remove(f).unwrap())
            .collect()
    } else {
        vec![(0..set.len()).collect()]
    };

    let mut t_indices = Vec::new();
    let mut s_indices = Vec::new();
    // Odd groups alternate which half receives the extra report so the
    // overall sizes stay within one of each other.
    let mut extra_to_t = true;
    for mut group in groups {
        group.shuffle(&mut rng);
        let half = group.len() / 2;
        let t_take = if group.len() % 2 == 1 {
            let take = if extra_to_t { half + 1 } else { half };
            extra_to_t = !extra_to_t;
            take
        } else {
            half
        };
        t_indices.extend_from_slice(&group[..t_take]);
        s_indices.extend_from_slice(&group[t_take..]);
    }
    t_indices.sort_unstable();
    s_indices.sort_unstable();

    let pick = |indices: &[usize]| -> Vec<Report> {
        indices.iter().map(|&i| set.reports()[i].clone()).collect()
    };
    Ok((
        ReportSet::new(pick(&t_indices), set.provenance())?,
        ReportSet::new(pick(&s_indices), set.provenance())?,
    ))
}
