//! Greedy poisoning strategies against single-linkage clustering under the
//! feature-addition constraint set.
//!
//! Every poisoning point clones an existing sample and only adds features,
//! so the injected vector stays a valid binary unit-norm embedding and the
//! cloned sample's behavior is preserved. Bridge strategies place candidates
//! as close to equidistant as possible between the realizing point pairs of
//! the inter-cluster links cut by the current partition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{self, EmbeddedDataset, SparseBinaryVector};
use crate::error::{Error, Result};
use crate::hac::{self, Dendrogram, Partition};
use crate::metrics::{self, MetricsRecord, SoftAssignment};
use crate::scalar::Float;

/// The six poisoning strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    /// Clone a random sample and add a random number of features.
    Random,
    /// Generate k-1 random candidates, keep the one maximizing the objective.
    RandomBest,
    /// Bridge candidates scored by full re-clustering, maximize objective.
    BridgeBest,
    /// Bridge candidates scored by a hypothetical cluster merge.
    BridgeHard,
    /// Bridge candidates scored by KDE posteriors over the merged clusters.
    BridgeSoft,
    /// Bridge candidates scored by full re-clustering, minimize F-measure.
    FmeasureBest,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Random,
        StrategyKind::RandomBest,
        StrategyKind::BridgeBest,
        StrategyKind::BridgeHard,
        StrategyKind::BridgeSoft,
        StrategyKind::FmeasureBest,
    ];

    pub fn slug(&self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::RandomBest => "random-best",
            StrategyKind::BridgeBest => "bridge-best",
            StrategyKind::BridgeHard => "bridge-hard",
            StrategyKind::BridgeSoft => "bridge-soft",
            StrategyKind::FmeasureBest => "fmeasure-best",
        }
    }

    /// Bridge-family strategies derive their candidates from cut links and
    /// terminate once a single cluster remains.
    pub fn is_bridge(&self) -> bool {
        matches!(
            self,
            StrategyKind::BridgeBest
                | StrategyKind::BridgeHard
                | StrategyKind::BridgeSoft
                | StrategyKind::FmeasureBest
        )
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.slug())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .iter()
            .copied()
            .find(|k| k.slug() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy `{s}`")))
    }
}

/// How the cutoff is chosen when re-clustering poisoned data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffMode {
    /// Scan all cutoffs and take the one minimizing the objective (the
    /// clustering most favorable to the defender).
    WorstCase,
    /// Keep the calibrated cutoff fixed.
    Fixed,
}

impl std::fmt::Display for CutoffMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CutoffMode::WorstCase => f.write_str("worst-case"),
            CutoffMode::Fixed => f.write_str("fixed"),
        }
    }
}

impl std::str::FromStr for CutoffMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst-case" | "worst_case" => Ok(CutoffMode::WorstCase),
            "fixed" => Ok(CutoffMode::Fixed),
            other => Err(Error::InvalidParameter(format!(
                "unknown cutoff mode `{other}` (expected worst-case or fixed)"
            ))),
        }
    }
}

/// KDE bandwidth for the soft-assignment estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMode {
    /// Mean distance over all unordered sample pairs.
    AutoMeanPairwise,
    Fixed(f64),
}

impl std::fmt::Display for BandwidthMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BandwidthMode::AutoMeanPairwise => f.write_str("auto"),
            BandwidthMode::Fixed(h) => write!(f, "{h}"),
        }
    }
}

impl std::str::FromStr for BandwidthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(BandwidthMode::AutoMeanPairwise);
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 => Ok(BandwidthMode::Fixed(h)),
            _ => Err(Error::InvalidParameter(format!(
                "bandwidth must be `auto` or a positive number, got `{s}`"
            ))),
        }
    }
}

/// Which cluster count goes into the trace records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterCountMode {
    /// Count clusters after projecting onto the original samples (poison-only
    /// clusters never counted).
    OriginalsOnly,
    /// Count every cluster of the working partition.
    All,
}

/// Attack configuration shared by all strategies.
#[derive(Debug, Clone)]
pub struct AttackOptions<S> {
    /// Calibrated cutoff defining the reference clustering (and the fixed
    /// cut, when selected).
    pub cutoff: S,
    pub cutoff_mode: CutoffMode,
    pub bandwidth: BandwidthMode,
    pub cluster_count: ClusterCountMode,
}

impl<S: Float> AttackOptions<S> {
    pub fn new(cutoff: S) -> Self {
        AttackOptions {
            cutoff,
            cutoff_mode: CutoffMode::WorstCase,
            bandwidth: BandwidthMode::AutoMeanPairwise,
            cluster_count: ClusterCountMode::OriginalsOnly,
        }
    }
}

/// A constrained poisoning point: a clone of `base_id` with `added` extra
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct PoisonCandidate {
    pub vector: SparseBinaryVector,
    pub base_id: String,
    pub added: Vec<u32>,
}

/// Per-step diagnostics serialized as the JSON sidecar of a trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub strategy: String,
    pub candidate_scores: Vec<f64>,
    pub chosen_candidate: Option<usize>,
    pub chosen_base_id: Option<String>,
    pub added: Vec<u32>,
    /// Clustering invocations spent this step (candidate evaluations plus
    /// the single commit re-clustering).
    pub clusterings: usize,
    pub cutoff: f64,
    pub committed: bool,
}

/// Full outcome of one greedy attack run.
#[derive(Debug, Clone)]
pub struct AttackTrace<S> {
    pub strategy: StrategyKind,
    /// One record per injection, preceded by the zero-poison record.
    pub records: Vec<MetricsRecord<S>>,
    pub steps: Vec<StepLog>,
    pub injected: Vec<PoisonCandidate>,
    /// Working dataset after the last injection.
    pub working: EmbeddedDataset,
    /// Reference clustering of the untainted data.
    pub reference: Partition,
    /// True when a bridge strategy ran out of links or admissible candidates
    /// before reaching the injection budget.
    pub terminated_early: bool,
}

impl<S: Float> AttackTrace<S> {
    pub fn records_csv(&self) -> String {
        let mut out = String::from(MetricsRecord::<S>::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.to_csv_row());
            out.push('\n');
        }
        out
    }

    pub fn steps_json(&self) -> String {
        serde_json::to_string_pretty(&self.steps).expect("step logs serialize")
    }
}

/// The k-1 realizing point pairs of the merges strictly above the current
/// cut: the shortest inter-cluster connections, ordered by merge height.
pub fn candidate_links<S: Float>(dend: &Dendrogram<S>, k: usize) -> Result<Vec<(usize, usize)>> {
    if k < 2 {
        return Err(Error::InvalidParameter(
            "need at least two clusters to derive cut links".into(),
        ));
    }
    if k > dend.n() {
        return Err(Error::InvalidParameter(format!(
            "cluster count {k} exceeds sample count {}",
            dend.n()
        )));
    }
    let merges = dend.merges();
    Ok(merges[merges.len() - (k - 1)..]
        .iter()
        .map(|m| m.pair)
        .collect())
}

/// Build the most equidistant feature-addition bridge between two points:
/// clone the endpoint with fewer active features and add `m*` features from
/// the other endpoint, where `m*` minimizes the distance imbalance.
///
/// Every feature drawn from `other \ base` shifts the two distances
/// identically, so only the count matters; the concrete features are taken
/// in ascending index order.
pub fn bridge_point<S: Float>(
    x1: &SparseBinaryVector,
    x2: &SparseBinaryVector,
) -> Result<PoisonCandidate> {
    if x1.active() == x2.active() {
        return Err(Error::InvalidParameter(
            "bridge endpoints must differ".into(),
        ));
    }
    let (base, other) = match x1.active().len().cmp(&x2.active().len()) {
        std::cmp::Ordering::Less => (x1, x2),
        std::cmp::Ordering::Greater => (x2, x1),
        std::cmp::Ordering::Equal => {
            if x1.active() <= x2.active() {
                (x1, x2)
            } else {
                (x2, x1)
            }
        }
    };
    let addable: Vec<u32> = other
        .active()
        .iter()
        .copied()
        .filter(|i| base.active().binary_search(i).is_err())
        .collect();
    if addable.is_empty() {
        return Err(Error::InvalidParameter(
            "bridge candidate would duplicate its base".into(),
        ));
    }

    let nb = base.active().len();
    let no = other.active().len();
    let shared = no - addable.len();
    let mut best_m = 0usize;
    let mut best_imbalance = S::infinity();
    for m in 0..=addable.len() {
        let na = nb + m;
        let d_base = embedding::distance_from_counts::<S>(na, nb, nb);
        let d_other = embedding::distance_from_counts::<S>(na, no, shared + m);
        let imbalance = (d_base - d_other).abs();
        if imbalance < best_imbalance {
            best_imbalance = imbalance;
            best_m = m;
        }
    }

    let added: Vec<u32> = addable[..best_m].to_vec();
    let mut active: Vec<u32> = base.active().to_vec();
    active.extend_from_slice(&added);
    active.sort_unstable();
    Ok(PoisonCandidate {
        vector: SparseBinaryVector::new(active, None)?,
        base_id: base.origin_id().unwrap_or_default().to_string(),
        added,
    })
}

/// KDE posterior of every sample over the clusters of `part`:
/// `p(c|x) ∝ (1/|C_c|) Σ_{j∈C_c} exp(-d(x, x_j)^2 / (2h^2))`, normalized per
/// row. Rows whose scores all underflow fall back to a hard assignment to
/// the nearest cluster.
///
/// Bandwidth limits follow the usual Gaussian-kernel behavior: as `h -> 0`
/// rows become one-hot on the nearest cluster, as `h -> inf` they approach
/// the uniform `1/k` (the equal cluster priors cancel the size imbalance).
pub fn soft_posteriors<S: Float>(
    points: &EmbeddedDataset,
    part: &Partition,
    h: S,
) -> Result<SoftAssignment<S>> {
    if h <= S::zero() {
        return Err(Error::InvalidParameter(format!(
            "KDE bandwidth must be positive, got {h}"
        )));
    }
    if points.len() != part.len() {
        return Err(Error::SizeMismatch {
            left: points.len(),
            right: part.len(),
        });
    }
    let clusters = part.clusters();
    let vectors = points.vectors();
    let two_h_sq = S::of_f64(2.0) * h * h;

    let mut rows = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        // Exponents per cluster member, shifted by the global max so at
        // least one term survives in floating point.
        let exponents: Vec<Vec<S>> = clusters
            .iter()
            .map(|members| {
                members
                    .iter()
                    .map(|&j| {
                        let d = embedding::distance::<S>(&vectors[i], &vectors[j]);
                        -(d * d) / two_h_sq
                    })
                    .collect()
            })
            .collect();
        let max = exponents
            .iter()
            .flatten()
            .copied()
            .fold(S::neg_infinity(), S::max);
        let scores: Vec<S> = exponents
            .iter()
            .zip(&clusters)
            .map(|(exps, members)| {
                let sum: S = exps.iter().map(|&e| (e - max).exp()).sum();
                sum / S::of_usize(members.len())
            })
            .collect();
        let total: S = scores.iter().copied().sum();
        let row = if total > S::zero() && total.is_finite() {
            scores.iter().map(|&s| s / total).collect()
        } else {
            // Underflow fallback: one-hot on the nearest cluster.
            let nearest = clusters
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    let da = a
                        .iter()
                        .map(|&j| embedding::distance::<S>(&vectors[i], &vectors[j]))
                        .fold(S::infinity(), S::min);
                    let db = b
                        .iter()
                        .map(|&j| embedding::distance::<S>(&vectors[i], &vectors[j]))
                        .fold(S::infinity(), S::min);
                    da.partial_cmp(&db).expect("finite distances")
                })
                .map(|(c, _)| c)
                .expect("at least one cluster");
            let mut row = vec![S::zero(); part.k()];
            row[nearest] = S::one();
            row
        };
        rows.push(row);
    }
    SoftAssignment::new(rows, part.k())
}

/// Rule-of-thumb KDE bandwidth: the mean distance over all unordered sample
/// pairs.
pub fn auto_bandwidth<S: Float>(points: &EmbeddedDataset) -> Result<S> {
    let n = points.len();
    if n < 2 {
        return Err(Error::DatasetTooSmall { need: 2, got: n });
    }
    let vectors = points.vectors();
    let mut sum = S::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            sum = sum + embedding::distance::<S>(&vectors[i], &vectors[j]);
        }
    }
    Ok(sum / S::of_usize(n * (n - 1) / 2))
}

/// Current defender response on the working hierarchy.
#[derive(Debug, Clone)]
struct CurrentCut<S> {
    cutoff: S,
    full: Partition,
    restricted: Partition,
    discordant: u64,
}

fn evaluate_cut<S: Float>(
    dend: &Dendrogram<S>,
    reference: &Partition,
    originals: &[usize],
    opts: &AttackOptions<S>,
) -> Result<CurrentCut<S>> {
    match opts.cutoff_mode {
        CutoffMode::Fixed => {
            let full = hac::cut(dend, opts.cutoff);
            let restricted = metrics::restrict(&full, originals)?;
            let discordant = metrics::discordant_pairs(reference, &restricted)?;
            Ok(CurrentCut {
                cutoff: opts.cutoff,
                full,
                restricted,
                discordant,
            })
        }
        CutoffMode::WorstCase => {
            let wc = hac::worst_case_scan(dend, reference, originals)?;
            Ok(CurrentCut {
                cutoff: wc.cutoff,
                full: wc.full,
                restricted: wc.restricted,
                discordant: wc.discordant,
            })
        }
    }
}

/// Outcome of one greedy step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// A candidate was injected and a trace record appended.
    Committed,
    /// No admissible candidate this step; fresh randomness next step.
    Skipped,
    /// Nothing left to attack (bridge strategy with k = 1 or only duplicate
    /// candidates); the trace ends here.
    Exhausted,
}

/// Mutable state of a greedy attack run (working data, reference clustering,
/// trace so far, and the seeded random stream).
pub struct AttackState<S: Float> {
    kind: StrategyKind,
    opts: AttackOptions<S>,
    working: EmbeddedDataset,
    labels: Vec<String>,
    originals: Vec<usize>,
    reference: Partition,
    reference_scores: metrics::FScores<S>,
    dend: Dendrogram<S>,
    current: CurrentCut<S>,
    bandwidth: S,
    records: Vec<MetricsRecord<S>>,
    steps: Vec<StepLog>,
    injected: Vec<PoisonCandidate>,
    rng: ChaCha8Rng,
    terminated_early: bool,
}

/// Score of one evaluated candidate plus its tie-break key (induced cluster
/// count on the originals).
struct CandidateEval<T> {
    index: usize,
    score: T,
    induced_k: usize,
}

const RANDOM_DRAW_ATTEMPTS: usize = 100;

impl<S: Float> AttackState<S> {
    pub fn new(
        data: &EmbeddedDataset,
        kind: StrategyKind,
        opts: AttackOptions<S>,
        seed: u64,
    ) -> Result<Self> {
        if data.poison_count() != 0 {
            return Err(Error::InvalidParameter(
                "attack input must not already contain poison points".into(),
            ));
        }
        if data.len() < 2 {
            return Err(Error::DatasetTooSmall {
                need: 2,
                got: data.len(),
            });
        }
        let labels: Vec<String> = data
            .original_labels(data.len())
            .ok_or(Error::UnlabeledInput)?
            .into_iter()
            .map(str::to_owned)
            .collect();

        let bandwidth = match opts.bandwidth {
            BandwidthMode::AutoMeanPairwise => auto_bandwidth(data)?,
            BandwidthMode::Fixed(h) => {
                if h <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "fixed KDE bandwidth must be positive, got {h}"
                    )));
                }
                S::of_f64(h)
            }
        };

        let originals: Vec<usize> = (0..data.len()).collect();
        let dend = hac::single_linkage::<S>(data)?;
        let reference = hac::cut(&dend, opts.cutoff);
        let reference_scores = metrics::f_measure::<S, _>(&reference, &labels)?;
        let current = evaluate_cut(&dend, &reference, &originals, &opts)?;

        // With zero poison the full and restricted partitions coincide, so
        // both cluster-count modes report the reference count.
        let records = vec![MetricsRecord {
            poison_count: 0,
            poison_fraction: S::zero(),
            objective_dc: S::zero(),
            clusters: reference.k(),
            precision: reference_scores.precision,
            recall: reference_scores.recall,
            f_measure: reference_scores.f,
        }];

        Ok(AttackState {
            kind,
            opts,
            working: data.clone(),
            labels,
            originals,
            reference,
            reference_scores,
            dend,
            current,
            bandwidth,
            records,
            steps: Vec::new(),
            injected: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            terminated_early: false,
        })
    }

    pub fn reference(&self) -> &Partition {
        &self.reference
    }

    pub fn reference_scores(&self) -> metrics::FScores<S> {
        self.reference_scores
    }

    fn is_duplicate(&self, candidate: &PoisonCandidate) -> bool {
        self.working.contains_active_set(candidate.vector.active())
    }

    /// Draw one random feature-addition candidate: clone a uniform original
    /// and add a uniform number of distinct unset features.
    fn draw_random_candidate(&mut self) -> Option<PoisonCandidate> {
        let dim = self.working.space().dim();
        let n_orig = self.originals.len();
        for _ in 0..RANDOM_DRAW_ATTEMPTS {
            let base_idx = self.rng.random_range(0..n_orig);
            let base = &self.working.vectors()[base_idx];
            let unset: Vec<u32> = (0..dim as u32)
                .filter(|i| base.active().binary_search(i).is_err())
                .collect();
            if unset.is_empty() {
                continue;
            }
            let count = self.rng.random_range(1..=unset.len());
            let picks = rand::seq::index::sample(&mut self.rng, unset.len(), count);
            let mut added: Vec<u32> = picks.iter().map(|i| unset[i]).collect();
            added.sort_unstable();
            let mut active = base.active().to_vec();
            active.extend_from_slice(&added);
            active.sort_unstable();
            let candidate = PoisonCandidate {
                vector: SparseBinaryVector::new(active, None).expect("nonempty active set"),
                base_id: base.origin_id().unwrap_or_default().to_string(),
                added,
            };
            if !self.is_duplicate(&candidate) {
                return Some(candidate);
            }
        }
        None
    }

    /// Non-duplicate bridge candidates for the current cut links.
    fn bridge_candidates(&self, k: usize) -> Result<Vec<PoisonCandidate>> {
        let links = candidate_links(&self.dend, k)?;
        let vectors = self.working.vectors();
        let mut candidates = Vec::with_capacity(links.len());
        for (i, j) in links {
            match bridge_point::<S>(&vectors[i], &vectors[j]) {
                Ok(c) if !self.is_duplicate(&c) => candidates.push(c),
                _ => {}
            }
        }
        Ok(candidates)
    }

    /// Evaluate candidates by full re-clustering; score is the discordant
    /// pair count of the defender response (monotone in the objective).
    fn evaluate_reclustering(
        &self,
        candidates: &[PoisonCandidate],
    ) -> Result<Vec<CandidateEval<u64>>> {
        candidates
            .par_iter()
            .enumerate()
            .map(|(index, candidate)| {
                let mut hypothetical = self.working.clone();
                hypothetical.push_poison(candidate.vector.clone());
                let dend = hac::single_linkage::<S>(&hypothetical)?;
                let cut = evaluate_cut(&dend, &self.reference, &self.originals, &self.opts)?;
                Ok(CandidateEval {
                    index,
                    score: cut.discordant,
                    induced_k: cut.restricted.k(),
                })
            })
            .collect()
    }

    /// Evaluate candidates by full re-clustering, scoring the F-measure of
    /// the defender response (to be minimized).
    fn evaluate_reclustering_f(
        &self,
        candidates: &[PoisonCandidate],
    ) -> Result<Vec<CandidateEval<S>>> {
        candidates
            .par_iter()
            .enumerate()
            .map(|(index, candidate)| {
                let mut hypothetical = self.working.clone();
                hypothetical.push_poison(candidate.vector.clone());
                let dend = hac::single_linkage::<S>(&hypothetical)?;
                let cut = evaluate_cut(&dend, &self.reference, &self.originals, &self.opts)?;
                let scores = metrics::f_measure::<S, _>(&cut.restricted, &self.labels)?;
                Ok(CandidateEval {
                    index,
                    score: scores.f,
                    induced_k: cut.restricted.k(),
                })
            })
            .collect()
    }

    /// Hypothetical partition if the candidate merged the clusters holding
    /// the two bridged endpoints.
    fn merged_partition(&self, link: (usize, usize)) -> Partition {
        let ca = self.current.full.cluster_of(link.0);
        let cb = self.current.full.cluster_of(link.1);
        let raw: Vec<usize> = self
            .current
            .full
            .assignment()
            .iter()
            .map(|&c| if c == cb { ca } else { c })
            .collect();
        Partition::from_assignment(&raw)
    }

    /// Evaluate bridge candidates by the hard merge estimate: rows of both
    /// bridged clusters collapse onto one column, everything else unchanged.
    fn evaluate_hard(
        &self,
        candidates: &[PoisonCandidate],
        links: &[(usize, usize)],
    ) -> Result<Vec<CandidateEval<u64>>> {
        candidates
            .iter()
            .enumerate()
            .map(|(index, _)| {
                let merged = self.merged_partition(links[index]);
                let restricted = metrics::restrict(&merged, &self.originals)?;
                let score = metrics::discordant_pairs(&self.reference, &restricted)?;
                Ok(CandidateEval {
                    index,
                    score,
                    induced_k: restricted.k(),
                })
            })
            .collect()
    }

    /// Evaluate bridge candidates by KDE posteriors over the post-merge
    /// cluster set.
    fn evaluate_soft(
        &self,
        candidates: &[PoisonCandidate],
        links: &[(usize, usize)],
    ) -> Result<Vec<CandidateEval<S>>> {
        candidates
            .iter()
            .enumerate()
            .map(|(index, _)| {
                let merged = self.merged_partition(links[index]);
                let soft = soft_posteriors(&self.working, &merged, self.bandwidth)?;
                let soft_originals = soft.select_rows(&self.originals)?;
                let score = metrics::clustering_distance_soft(&self.reference, &soft_originals)?;
                let restricted = metrics::restrict(&merged, &self.originals)?;
                Ok(CandidateEval {
                    index,
                    score,
                    induced_k: restricted.k(),
                })
            })
            .collect()
    }

    /// Pick the best candidate: extreme score first, then the smaller
    /// induced cluster count, then uniformly at random.
    fn select<T: PartialOrd + Copy>(
        &mut self,
        evals: &[CandidateEval<T>],
        maximize: bool,
    ) -> usize {
        let best_score = evals
            .iter()
            .map(|e| e.score)
            .reduce(|a, b| {
                let a_wins = if maximize { a >= b } else { a <= b };
                if a_wins {
                    a
                } else {
                    b
                }
            })
            .expect("nonempty evaluations");
        let score_tied: Vec<&CandidateEval<T>> =
            evals.iter().filter(|e| e.score == best_score).collect();
        let min_k = score_tied.iter().map(|e| e.induced_k).min().unwrap();
        let tied: Vec<&CandidateEval<T>> = score_tied
            .into_iter()
            .filter(|e| e.induced_k == min_k)
            .collect();
        if tied.len() == 1 {
            tied[0].index
        } else {
            tied[self.rng.random_range(0..tied.len())].index
        }
    }

    /// Commit a candidate: inject it, re-cluster once, evaluate the defender
    /// response and append the trace record.
    fn commit(&mut self, candidate: PoisonCandidate) -> Result<()> {
        let id = format!("poison-{:04}", self.injected.len());
        let vector = SparseBinaryVector::new(candidate.vector.active().to_vec(), Some(id))?;
        self.working.push_poison(vector);
        self.injected.push(candidate);

        self.dend = hac::single_linkage::<S>(&self.working)?;
        self.current = evaluate_cut(&self.dend, &self.reference, &self.originals, &self.opts)?;

        let scores = metrics::f_measure::<S, _>(&self.current.restricted, &self.labels)?;
        let clusters = match self.opts.cluster_count {
            ClusterCountMode::OriginalsOnly => self.current.restricted.k(),
            ClusterCountMode::All => self.current.full.k(),
        };
        self.records.push(MetricsRecord {
            poison_count: self.injected.len(),
            poison_fraction: S::of_usize(self.injected.len()) / S::of_usize(self.originals.len()),
            objective_dc: metrics::distance_from_discordant(self.current.discordant),
            clusters,
            precision: scores.precision,
            recall: scores.recall,
            f_measure: scores.f,
        });
        Ok(())
    }

    /// One greedy iteration: generate candidates, score them per the
    /// strategy, and inject the winner.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let step_index = self.steps.len() + 1;
        let k = self.current.full.k();

        let mut log = StepLog {
            step: step_index,
            strategy: self.kind.slug().to_string(),
            candidate_scores: Vec::new(),
            chosen_candidate: None,
            chosen_base_id: None,
            added: Vec::new(),
            clusterings: 0,
            cutoff: self.current.cutoff.as_f64(),
            committed: false,
        };

        if self.kind.is_bridge() && k < 2 {
            self.terminated_early = true;
            return Ok(StepOutcome::Exhausted);
        }

        let (candidates, chosen): (Vec<PoisonCandidate>, Option<usize>) = match self.kind {
            StrategyKind::Random => match self.draw_random_candidate() {
                Some(c) => (vec![c], Some(0)),
                None => {
                    self.steps.push(log);
                    return Ok(StepOutcome::Skipped);
                }
            },
            StrategyKind::RandomBest => {
                let mut candidates = Vec::new();
                for _ in 1..k {
                    if let Some(c) = self.draw_random_candidate() {
                        candidates.push(c);
                    }
                }
                if candidates.is_empty() {
                    self.steps.push(log);
                    return Ok(StepOutcome::Skipped);
                }
                let evals = self.evaluate_reclustering(&candidates)?;
                log.clusterings += candidates.len();
                log.candidate_scores = evals.iter().map(|e| e.score as f64).collect();
                let chosen = self.select(&evals, true);
                (candidates, Some(chosen))
            }
            StrategyKind::BridgeBest => {
                let candidates = self.bridge_candidates(k)?;
                if candidates.is_empty() {
                    self.terminated_early = true;
                    return Ok(StepOutcome::Exhausted);
                }
                let evals = self.evaluate_reclustering(&candidates)?;
                log.clusterings += candidates.len();
                log.candidate_scores = evals.iter().map(|e| e.score as f64).collect();
                let chosen = self.select(&evals, true);
                (candidates, Some(chosen))
            }
            StrategyKind::FmeasureBest => {
                let candidates = self.bridge_candidates(k)?;
                if candidates.is_empty() {
                    self.terminated_early = true;
                    return Ok(StepOutcome::Exhausted);
                }
                let evals = self.evaluate_reclustering_f(&candidates)?;
                log.clusterings += candidates.len();
                log.candidate_scores = evals.iter().map(|e| e.score.as_f64()).collect();
                let chosen = self.select(&evals, false);
                (candidates, Some(chosen))
            }
            StrategyKind::BridgeHard | StrategyKind::BridgeSoft => {
                let links = candidate_links(&self.dend, k)?;
                let vectors = self.working.vectors();
                let mut kept_links = Vec::new();
                let mut candidates = Vec::new();
                for (i, j) in links {
                    if let Ok(c) = bridge_point::<S>(&vectors[i], &vectors[j]) {
                        if !self.working.contains_active_set(c.vector.active()) {
                            kept_links.push((i, j));
                            candidates.push(c);
                        }
                    }
                }
                if candidates.is_empty() {
                    self.terminated_early = true;
                    return Ok(StepOutcome::Exhausted);
                }
                let chosen = if self.kind == StrategyKind::BridgeHard {
                    let evals = self.evaluate_hard(&candidates, &kept_links)?;
                    log.candidate_scores = evals.iter().map(|e| e.score as f64).collect();
                    self.select(&evals, true)
                } else {
                    let evals = self.evaluate_soft(&candidates, &kept_links)?;
                    log.candidate_scores = evals.iter().map(|e| e.score.as_f64()).collect();
                    self.select(&evals, true)
                };
                (candidates, Some(chosen))
            }
        };

        let chosen = chosen.expect("strategies without a winner returned above");
        let candidate = candidates[chosen].clone();
        log.chosen_candidate = Some(chosen);
        log.chosen_base_id = Some(candidate.base_id.clone());
        log.added = candidate.added.clone();
        self.commit(candidate)?;
        log.clusterings += 1;
        log.committed = true;
        self.steps.push(log);
        Ok(StepOutcome::Committed)
    }

    pub fn into_trace(self) -> AttackTrace<S> {
        AttackTrace {
            strategy: self.kind,
            records: self.records,
            steps: self.steps,
            injected: self.injected,
            working: self.working,
            reference: self.reference,
            terminated_early: self.terminated_early,
        }
    }
}

/// Run one greedy attack: inject up to `m_max` accepted candidates, one per
/// iteration, re-clustering and recording the evaluation measures after each
/// injection. Deterministic given the seed.
pub fn run_attack<S: Float>(
    data: &EmbeddedDataset,
    kind: StrategyKind,
    m_max: usize,
    opts: &AttackOptions<S>,
    seed: u64,
) -> Result<AttackTrace<S>> {
    if m_max == 0 {
        return Err(Error::InvalidParameter(
            "injection budget m_max must be at least 1".into(),
        ));
    }
    let mut state = AttackState::new(data, kind, opts.clone(), seed)?;
    for _ in 0..m_max {
        if state.step()? == StepOutcome::Exhausted {
            break;
        }
    }
    Ok(state.into_trace())
}
