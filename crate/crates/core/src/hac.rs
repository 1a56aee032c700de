//! Single-linkage hierarchical clustering, dendrogram cutting, cutoff
//! calibration and the attack-optimal (worst-case) cutoff scan.
//!
//! The hierarchy is built from a minimum spanning tree over the pairwise
//! distance graph: processing MST edges in ascending weight order replays
//! exactly the single-linkage merge sequence, in O(n^2) distance
//! evaluations instead of the naive O(n^3).

use std::hash::Hash;

use crate::embedding::{self, EmbeddedDataset};
use crate::error::{Error, Result};
use crate::metrics;
use crate::scalar::Float;

/// One agglomerative merge. `left`/`right` are node ids (leaves `0..n`,
/// internal nodes `n..2n-1` in merge order); `pair` is the point pair
/// realizing the minimum inter-cluster distance, with `pair.0` in the left
/// subtree and `pair.1` in the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge<S> {
    pub left: usize,
    pub right: usize,
    pub height: S,
    pub pair: (usize, usize),
}

/// Full single-linkage merge tree over `n` leaves; heights are
/// non-decreasing in merge order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram<S> {
    n: usize,
    merges: Vec<Merge<S>>,
}

impl<S: Float> Dendrogram<S> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn merges(&self) -> &[Merge<S>] {
        &self.merges
    }

    /// Distinct merge heights in ascending order.
    pub fn distinct_heights(&self) -> Vec<S> {
        let mut heights: Vec<S> = self.merges.iter().map(|m| m.height).collect();
        heights.dedup_by(|a, b| a == b);
        heights
    }

    /// CSV dump: `merge_index,left,right,height,pair_i,pair_j`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("merge_index,left,right,height,pair_i,pair_j\n");
        for (i, m) in self.merges.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i, m.left, m.right, m.height, m.pair.0, m.pair.1
            ));
        }
        out
    }
}

/// Hard sample-to-cluster assignment; cluster ids are dense in `[0, k)` and
/// numbered by smallest member index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Canonicalize an arbitrary labeling: cluster ids renumbered by first
    /// occurrence (equivalently, by smallest member index).
    pub fn from_assignment(raw: &[usize]) -> Partition {
        let mut remap: Vec<Option<usize>> = vec![None; raw.len()];
        let mut assignment = Vec::with_capacity(raw.len());
        let mut k = 0;
        for &c in raw {
            let id = *remap[c].get_or_insert_with(|| {
                let id = k;
                k += 1;
                id
            });
            assignment.push(id);
        }
        Partition { assignment, k }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn cluster_of(&self, sample: usize) -> usize {
        self.assignment[sample]
    }

    /// Per-cluster sizes, indexed by cluster id.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Members of each cluster, indexed by cluster id.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            members[c].push(i);
        }
        members
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (big, small) = if self.rank[ra] >= self.rank[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        if self.rank[big] == self.rank[small] {
            self.rank[big] += 1;
        }
        big
    }
}

fn pair_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Single-linkage hierarchy from an arbitrary symmetric distance function.
/// Ties between equal distances are broken toward the lexicographically
/// smaller `(min index, max index)` pair.
pub fn single_linkage_with<S, F>(n: usize, dist: F) -> Result<Dendrogram<S>>
where
    S: Float,
    F: Fn(usize, usize) -> S,
{
    if n < 2 {
        return Err(Error::DatasetTooSmall { need: 2, got: n });
    }

    // Prim's algorithm from vertex 0, tracking for every outside vertex the
    // closest tree vertex (with deterministic tie-breaking on the pair key).
    let mut in_tree = vec![false; n];
    in_tree[0] = true;
    let mut min_dist: Vec<S> = (0..n)
        .map(|x| if x == 0 { S::zero() } else { dist(0, x) })
        .collect();
    let mut closest = vec![0usize; n];
    let mut edges: Vec<(S, usize, usize)> = Vec::with_capacity(n - 1);

    for _ in 1..n {
        let mut best: Option<usize> = None;
        for x in 0..n {
            if in_tree[x] {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    min_dist[x] < min_dist[b]
                        || (min_dist[x] == min_dist[b]
                            && pair_key(closest[x], x) < pair_key(closest[b], b))
                }
            };
            if better {
                best = Some(x);
            }
        }
        let v = best.expect("at least one vertex outside the tree");
        let (i, j) = pair_key(closest[v], v);
        edges.push((min_dist[v], i, j));
        in_tree[v] = true;
        for x in 0..n {
            if in_tree[x] {
                continue;
            }
            let d = dist(v, x);
            if d < min_dist[x] || (d == min_dist[x] && pair_key(v, x) < pair_key(closest[x], x)) {
                min_dist[x] = d;
                closest[x] = v;
            }
        }
    }

    edges.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite distances")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    // Replaying MST edges in ascending order is exactly the single-linkage
    // merge sequence; each edge is the realizing pair of its merge.
    let mut dsu = DisjointSet::new(n);
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for (next_node, &(height, i, j)) in (n..).zip(edges.iter()) {
        let left = node_of[dsu.find(i)];
        let right = node_of[dsu.find(j)];
        let root = dsu.union(i, j);
        node_of[root] = next_node;
        merges.push(Merge {
            left,
            right,
            height,
            pair: (i, j),
        });
    }
    debug_assert!(merges.windows(2).all(|w| w[0].height <= w[1].height));
    Ok(Dendrogram { n, merges })
}

/// Single-linkage hierarchy of an embedded dataset under the unit-sphere
/// Euclidean distance.
pub fn single_linkage<S: Float>(data: &EmbeddedDataset) -> Result<Dendrogram<S>> {
    let vectors = data.vectors();
    single_linkage_with(vectors.len(), |i, j| {
        embedding::distance(&vectors[i], &vectors[j])
    })
}

/// Flat partition at a cutoff: connected components over all merges with
/// height <= cutoff.
pub fn cut<S: Float>(dend: &Dendrogram<S>, cutoff: S) -> Partition {
    let mut dsu = DisjointSet::new(dend.n);
    for merge in &dend.merges {
        if merge.height <= cutoff {
            dsu.union(merge.pair.0, merge.pair.1);
        } else {
            break;
        }
    }
    let raw: Vec<usize> = (0..dend.n).map(|i| dsu.find(i)).collect();
    Partition::from_assignment(&raw)
}

/// Candidate cutoffs covering every achievable partition exactly once:
/// midpoints between consecutive distinct merge heights, plus one candidate
/// below the first height and one above the last.
pub fn candidate_cutoffs<S: Float>(dend: &Dendrogram<S>) -> Vec<S> {
    let heights = dend.distinct_heights();
    let two = S::of_f64(2.0);
    let mut cands = Vec::with_capacity(heights.len() + 1);
    cands.push(heights[0] / two);
    for w in heights.windows(2) {
        cands.push((w[0] + w[1]) / two);
    }
    cands.push(*heights.last().expect("nonempty dendrogram") + S::one());
    cands.dedup_by(|a, b| a == b);
    cands
}

/// Calibrated cutoff: the candidate maximizing the F-measure against family
/// labels; ties broken toward fewer clusters, then the smaller cutoff.
pub fn calibrate_on<S, L>(dend: &Dendrogram<S>, labels: &[L]) -> Result<S>
where
    S: Float,
    L: Eq + Hash,
{
    if labels.len() != dend.n {
        return Err(Error::SizeMismatch {
            left: dend.n,
            right: labels.len(),
        });
    }
    let mut best: Option<(S, usize, S)> = None; // (f, k, cutoff)
    for cutoff in candidate_cutoffs(dend) {
        let part = cut(dend, cutoff);
        let scores = metrics::f_measure::<S, L>(&part, labels)?;
        let replace = match best {
            None => true,
            Some((bf, bk, _)) => scores.f > bf || (scores.f == bf && part.k() < bk),
        };
        if replace {
            best = Some((scores.f, part.k(), cutoff));
        }
    }
    Ok(best.expect("at least one candidate cutoff").2)
}

/// Cluster a labeled dataset and calibrate the cutoff on it.
pub fn calibrate_cutoff<S: Float>(data: &EmbeddedDataset) -> Result<S> {
    let labels = data
        .original_labels(data.len())
        .ok_or(Error::UnlabeledInput)?;
    let dend = single_linkage::<S>(data)?;
    calibrate_on(&dend, &labels)
}

/// Outcome of the worst-case cutoff scan over a (possibly poisoned)
/// hierarchy.
#[derive(Debug, Clone)]
pub struct WorstCase<S> {
    pub cutoff: S,
    /// Partition of the full working data at the chosen cutoff.
    pub full: Partition,
    /// The same partition restricted to the original samples.
    pub restricted: Partition,
    /// Minimized clustering distance against the reference.
    pub objective: S,
    /// Unordered sample pairs co-clustered in exactly one of the two
    /// partitions (`objective = sqrt(2 * discordant)`).
    pub discordant: u64,
}

/// Scan every candidate cutoff of `dend`, project each partition onto
/// `original_indices` and return the one minimizing the clustering distance
/// to `reference`. Ties break toward the cluster count closest to the
/// reference's, then toward the smaller cutoff.
pub fn worst_case_scan<S: Float>(
    dend: &Dendrogram<S>,
    reference: &Partition,
    original_indices: &[usize],
) -> Result<WorstCase<S>> {
    if reference.len() != original_indices.len() {
        return Err(Error::SizeMismatch {
            left: reference.len(),
            right: original_indices.len(),
        });
    }
    let mut best: Option<WorstCase<S>> = None;
    let mut best_key = (u64::MAX, usize::MAX);
    for cutoff in candidate_cutoffs(dend) {
        let full = cut(dend, cutoff);
        let restricted = metrics::restrict(&full, original_indices)?;
        let discordant = metrics::discordant_pairs(reference, &restricted)?;
        let key = (discordant, restricted.k().abs_diff(reference.k()));
        if key < best_key {
            best_key = key;
            best = Some(WorstCase {
                cutoff,
                full,
                restricted,
                objective: metrics::distance_from_discordant::<S>(discordant),
                discordant,
            });
        }
    }
    Ok(best.expect("at least one candidate cutoff"))
}

/// Worst-case partition on the original samples (see [`worst_case_scan`]).
pub fn worst_case_cut<S: Float>(
    dend: &Dendrogram<S>,
    reference: &Partition,
    original_indices: &[usize],
) -> Result<Partition> {
    Ok(worst_case_scan(dend, reference, original_indices)?.restricted)
}
