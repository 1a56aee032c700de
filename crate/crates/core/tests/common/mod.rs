//! Independent oracles shared by the integration and acceptance tests.
//!
//! Everything here is deliberately naive (dense vectors, exhaustive pair
//! loops, O(n^3) agglomeration) and never calls into the fast paths it is
//! used to check.

#![allow(dead_code)]

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use poisonclust::embedding::SparseBinaryVector;

/// Euclidean distance between the materialized dense normalized vectors.
pub fn dense_distance(a: &SparseBinaryVector, b: &SparseBinaryVector, dim: usize) -> f64 {
    let da: Vec<f64> = a.to_dense(dim);
    let db: Vec<f64> = b.to_dense(dim);
    da.iter()
        .zip(&db)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Brute-force count of unordered pairs co-clustered in exactly one of the
/// two labelings.
pub fn brute_discordant_pairs(a: &[usize], b: &[usize]) -> u64 {
    assert_eq!(a.len(), b.len());
    let mut count = 0;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let co_a = a[i] == a[j];
            let co_b = b[i] == b[j];
            if co_a != co_b {
                count += 1;
            }
        }
    }
    count
}

/// Canonical form of a labeling: ids renumbered by first occurrence.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut remap = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = remap.len();
            *remap.entry(l).or_insert(next)
        })
        .collect()
}

/// Naive O(n^3) agglomerative single-linkage: keeps explicit cluster member
/// lists and at every step merges the pair of clusters with minimum
/// pointwise distance (ties toward the smaller realizing pair).
pub struct NaiveHierarchy {
    pub n: usize,
    pub heights: Vec<f64>,
    /// Realizing point pair of each merge.
    pub pairs: Vec<(usize, usize)>,
}

pub fn naive_single_linkage<F>(n: usize, dist: F) -> NaiveHierarchy
where
    F: Fn(usize, usize) -> f64,
{
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut heights = Vec::with_capacity(n - 1);
    let mut pairs = Vec::with_capacity(n - 1);

    while clusters.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                // Minimum cross distance and its realizing pair.
                let mut cross: Option<(f64, (usize, usize))> = None;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        let d = dist(i, j);
                        let pair = (i.min(j), i.max(j));
                        let better = match cross {
                            None => true,
                            Some((cd, cp)) => d < cd || (d == cd && pair < cp),
                        };
                        if better {
                            cross = Some((d, pair));
                        }
                    }
                }
                let (d, pair) = cross.expect("nonempty clusters");
                let better = match best {
                    None => true,
                    Some((bd, bp, _, _)) => d < bd || (d == bd && pair < bp),
                };
                if better {
                    best = Some((d, pair, a, b));
                }
            }
        }
        let (d, pair, a, b) = best.expect("at least two clusters");
        heights.push(d);
        pairs.push(pair);
        let merged = clusters.remove(b);
        clusters[a].extend(merged);
    }
    NaiveHierarchy { n, heights, pairs }
}

impl NaiveHierarchy {
    /// Flat labeling at a cutoff: union-find replay over the realizing
    /// pairs of merges with height <= cutoff.
    pub fn cut(&self, cutoff: f64) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let root = find(parent, parent[x]);
                parent[x] = root;
            }
            parent[x]
        }
        for (h, &(i, j)) in self.heights.iter().zip(&self.pairs) {
            if *h <= cutoff {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
        let roots: Vec<usize> = (0..self.n).map(|i| find(&mut parent, i)).collect();
        canonical(&roots)
    }
}

/// Random nonempty sparse binary vector over `dim` features.
pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> SparseBinaryVector {
    loop {
        let active: Vec<u32> = (0..dim as u32).filter(|_| rng.random_bool(0.3)).collect();
        if !active.is_empty() {
            return SparseBinaryVector::new(active, None).unwrap();
        }
    }
}

/// Random labeling of `n` samples into at most `max_k` clusters (canonical).
pub fn random_labeling(rng: &mut ChaCha8Rng, n: usize, max_k: usize) -> Vec<usize> {
    let k = rng.random_range(1..=max_k.min(n));
    let raw: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    canonical(&raw)
}
