//! Clustering-distance objective, F-measure and the projection onto
//! original samples.
//!
//! The objective is the Frobenius distance between co-association matrices,
//! `||Y Yᵀ - Y' Y'ᵀ||_F`. For hard partitions the diagonal cancels and every
//! discordant unordered pair contributes twice, so the value is
//! `sqrt(2 * discordant_pairs)` and can be counted exactly from the k x k'
//! contingency table without materializing any n x n matrix.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::hac::Partition;
use crate::scalar::Float;

fn pairs_within(count: u64) -> u64 {
    count * (count.saturating_sub(1)) / 2
}

/// Unordered sample pairs co-clustered in exactly one of the two partitions.
pub fn discordant_pairs(a: &Partition, b: &Partition) -> Result<u64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut contingency: HashMap<(usize, usize), u64> = HashMap::new();
    for i in 0..a.len() {
        *contingency
            .entry((a.cluster_of(i), b.cluster_of(i)))
            .or_insert(0) += 1;
    }
    let co_a: u64 = a
        .cluster_sizes()
        .iter()
        .map(|&s| pairs_within(s as u64))
        .sum();
    let co_b: u64 = b
        .cluster_sizes()
        .iter()
        .map(|&s| pairs_within(s as u64))
        .sum();
    let co_both: u64 = contingency.values().map(|&c| pairs_within(c)).sum();
    Ok((co_a - co_both) + (co_b - co_both))
}

/// Objective value from a discordant-pair count: `sqrt(2 * pairs)`.
pub fn distance_from_discordant<S: Float>(pairs: u64) -> S {
    (S::of_f64(2.0) * S::of_usize(pairs as usize)).sqrt()
}

/// Clustering distance between two hard partitions (Frobenius norm of the
/// co-association difference).
pub fn clustering_distance<S: Float>(a: &Partition, b: &Partition) -> Result<S> {
    Ok(distance_from_discordant(discordant_pairs(a, b)?))
}

/// Row-stochastic soft cluster assignment (n x k).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment<S> {
    rows: Vec<Vec<S>>,
    k: usize,
}

impl<S: Float> SoftAssignment<S> {
    /// Validate that every row is non-negative and sums to 1.
    pub fn new(rows: Vec<Vec<S>>, k: usize) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::SizeMismatch {
                    left: row.len(),
                    right: k,
                });
            }
            let sum: S = row.iter().copied().sum();
            if row.iter().any(|&p| p < S::zero()) || (sum - S::one()).abs() > S::row_sum_tol() {
                return Err(Error::RowSumViolation {
                    row: i,
                    sum: sum.as_f64(),
                });
            }
        }
        Ok(SoftAssignment { rows, k })
    }

    /// One-hot assignment from a hard partition.
    pub fn from_partition(part: &Partition) -> Self {
        let rows = part
            .assignment()
            .iter()
            .map(|&c| {
                let mut row = vec![S::zero(); part.k()];
                row[c] = S::one();
                row
            })
            .collect();
        SoftAssignment { rows, k: part.k() }
    }

    pub fn rows(&self) -> &[Vec<S>] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Keep only the given sample rows.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut rows = Vec::with_capacity(indices.len());
        for &i in indices {
            let row = self.rows.get(i).ok_or(Error::UnknownIndex {
                index: i,
                n: self.rows.len(),
            })?;
            rows.push(row.clone());
        }
        Ok(SoftAssignment { rows, k: self.k })
    }
}

/// Clustering distance between a hard partition and a soft assignment
/// estimate: the full Frobenius norm of `Y Yᵀ - Y' Y'ᵀ`, diagonal included.
/// Reduces exactly to [`clustering_distance`] when every row is one-hot.
pub fn clustering_distance_soft<S: Float>(hard: &Partition, soft: &SoftAssignment<S>) -> Result<S> {
    if hard.len() != soft.n() {
        return Err(Error::SizeMismatch {
            left: hard.len(),
            right: soft.n(),
        });
    }
    let n = hard.len();
    let mut total = S::zero();
    for i in 0..n {
        for j in 0..n {
            let co = if hard.cluster_of(i) == hard.cluster_of(j) {
                S::one()
            } else {
                S::zero()
            };
            let co_soft: S = soft.rows[i]
                .iter()
                .zip(&soft.rows[j])
                .map(|(&a, &b)| a * b)
                .sum();
            let diff = co - co_soft;
            total = total + diff * diff;
        }
    }
    Ok(total.sqrt())
}

/// Clustering precision, recall and their harmonic mean against family
/// labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FScores<S> {
    pub precision: S,
    pub recall: S,
    pub f: S,
}

/// F-measure of a partition against family labels: with `c[i][j]` the count
/// of family-`i` samples in cluster `j`, precision is the mean per-cluster
/// majority share and recall the mean per-family best-cluster share.
pub fn f_measure<S, L>(part: &Partition, labels: &[L]) -> Result<FScores<S>>
where
    S: Float,
    L: Eq + Hash,
{
    if labels.len() != part.len() {
        return Err(Error::SizeMismatch {
            left: part.len(),
            right: labels.len(),
        });
    }
    if part.is_empty() {
        return Err(Error::DatasetTooSmall { need: 1, got: 0 });
    }
    let mut family_ids: HashMap<&L, usize> = HashMap::new();
    let mut counts: Vec<Vec<u64>> = Vec::new(); // counts[family][cluster]
    for (sample, label) in labels.iter().enumerate() {
        let next = family_ids.len();
        let fam = *family_ids.entry(label).or_insert(next);
        if fam == counts.len() {
            counts.push(vec![0; part.k()]);
        }
        counts[fam][part.cluster_of(sample)] += 1;
    }

    let n = S::of_usize(part.len());
    let mut precision_sum = 0u64;
    for j in 0..part.k() {
        precision_sum += counts.iter().map(|row| row[j]).max().unwrap_or(0);
    }
    let mut recall_sum = 0u64;
    for row in &counts {
        recall_sum += row.iter().copied().max().unwrap_or(0);
    }
    let precision = S::of_usize(precision_sum as usize) / n;
    let recall = S::of_usize(recall_sum as usize) / n;
    let f = if precision + recall == S::zero() {
        S::zero()
    } else {
        S::of_f64(2.0) * precision * recall / (precision + recall)
    };
    Ok(FScores {
        precision,
        recall,
        f,
    })
}

/// Project a partition onto a subset of its samples: assignments restricted
/// to `original_indices` (in ascending order), empty clusters dropped and
/// ids renumbered by smallest member.
pub fn restrict(part: &Partition, original_indices: &[usize]) -> Result<Partition> {
    let mut raw = Vec::with_capacity(original_indices.len());
    for &i in original_indices {
        if i >= part.len() {
            return Err(Error::UnknownIndex {
                index: i,
                n: part.len(),
            });
        }
        raw.push(part.cluster_of(i));
    }
    Ok(Partition::from_assignment(&raw))
}

/// One row of an attack trace: the evaluation measures after a given number
/// of injections.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord<S> {
    pub poison_count: usize,
    pub poison_fraction: S,
    pub objective_dc: S,
    pub clusters: usize,
    pub precision: S,
    pub recall: S,
    pub f_measure: S,
}

impl<S: Float> MetricsRecord<S> {
    pub const CSV_HEADER: &'static str =
        "poison_count,poison_fraction,objective_dc,clusters,precision,recall,f_measure";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.poison_count,
            self.poison_fraction,
            self.objective_dc,
            self.clusters,
            self.precision,
            self.recall,
            self.f_measure
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn partition(assignment: &[usize]) -> Partition {
        Partition::from_assignment(assignment)
    }

    #[test]
    fn identical_partitions_have_zero_distance() {
        let p = partition(&[0, 0, 1, 2]);
        assert_eq!(discordant_pairs(&p, &p).unwrap(), 0);
        assert_eq!(clustering_distance::<f64>(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn one_discordant_pair() {
        // {1,2},{3} vs all singletons: exactly one pair differs.
        let a = partition(&[0, 0, 1]);
        let b = partition(&[0, 1, 2]);
        assert_eq!(discordant_pairs(&a, &b).unwrap(), 1);
        let d: f64 = clustering_distance(&a, &b).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn distance_is_symmetric() {
        let a = partition(&[0, 0, 1, 1, 2]);
        let b = partition(&[0, 1, 1, 2, 2]);
        assert_eq!(
            discordant_pairs(&a, &b).unwrap(),
            discordant_pairs(&b, &a).unwrap()
        );
    }

    #[test]
    fn size_mismatch_rejected() {
        let a = partition(&[0, 1]);
        let b = partition(&[0, 1, 2]);
        assert!(discordant_pairs(&a, &b).is_err());
    }

    #[test]
    fn soft_reduces_to_hard_on_one_hot() {
        let y = partition(&[0, 0, 1, 2]);
        let yp = partition(&[0, 1, 1, 2]);
        let soft = SoftAssignment::<f64>::from_partition(&yp);
        let via_soft = clustering_distance_soft(&y, &soft).unwrap();
        let via_hard: f64 = clustering_distance(&y, &yp).unwrap();
        assert!((via_soft - via_hard).abs() < 1e-12);

        let self_soft = SoftAssignment::<f64>::from_partition(&y);
        assert_eq!(clustering_distance_soft(&y, &self_soft).unwrap(), 0.0);
    }

    #[test]
    fn soft_two_sample_half_half() {
        // Y co-clusters both samples; Y' rows are (0.5, 0.5) each, so every
        // entry of Y'Y'^T is 0.5 and the Frobenius distance is 1.
        let y = partition(&[0, 0]);
        let soft = SoftAssignment::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]], 2).unwrap();
        let d: f64 = clustering_distance_soft(&y, &soft).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn soft_row_sum_violation_rejected() {
        let bad = SoftAssignment::new(vec![vec![0.5, 0.6]], 2);
        assert!(matches!(bad, Err(Error::RowSumViolation { row: 0, .. })));
        let negative = SoftAssignment::new(vec![vec![1.5, -0.5]], 2);
        assert!(negative.is_err());
    }

    #[test]
    fn f_measure_perfect_clustering() {
        let part = partition(&[0, 0, 1, 1]);
        let labels = ["a", "a", "b", "b"];
        let s = f_measure::<f64, _>(&part, &labels).unwrap();
        assert_eq!((s.precision, s.recall, s.f), (1.0, 1.0, 1.0));
    }

    #[test]
    fn f_measure_merged_cluster_three_one() {
        // One cluster holding families of sizes 3 and 1.
        let part = partition(&[0, 0, 0, 0]);
        let labels = ["a", "a", "a", "b"];
        let s = f_measure::<f64, _>(&part, &labels).unwrap();
        assert!((s.precision - 0.75).abs() < 1e-12);
        assert_eq!(s.recall, 1.0);
        assert!((s.f - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn f_measure_all_singletons_one_family() {
        let part = partition(&[0, 1, 2, 3]);
        let labels = ["x", "x", "x", "x"];
        let s = f_measure::<f64, _>(&part, &labels).unwrap();
        assert_eq!(s.precision, 1.0);
        assert!((s.recall - 0.25).abs() < 1e-12);
    }

    #[test]
    fn refining_perfect_clustering_keeps_precision_drops_recall() {
        let labels = ["a", "a", "a", "b", "b"];
        let perfect = partition(&[0, 0, 0, 1, 1]);
        let singletons = partition(&[0, 1, 2, 3, 4]);
        let p = f_measure::<f64, _>(&perfect, &labels).unwrap();
        let s = f_measure::<f64, _>(&singletons, &labels).unwrap();
        assert_eq!(p.precision, 1.0);
        assert_eq!(s.precision, 1.0);
        assert!(s.recall < p.recall);
        assert!(s.recall > 0.0 && p.recall <= 1.0);
    }

    #[test]
    fn f_measure_missing_labels_rejected() {
        let part = partition(&[0, 1]);
        assert!(f_measure::<f64, _>(&part, &["a"]).is_err());
    }

    #[test]
    fn restrict_identity_without_poison() {
        let p = partition(&[0, 0, 1, 2]);
        let all: Vec<usize> = (0..4).collect();
        assert_eq!(restrict(&p, &all).unwrap(), p);
    }

    #[test]
    fn restrict_drops_poison_only_cluster() {
        // Sample 4 is a poison point alone in its cluster.
        let p = partition(&[0, 0, 1, 1, 2]);
        let originals = [0usize, 1, 2, 3];
        let r = restrict(&p, &originals).unwrap();
        assert_eq!(r.k(), 2);
        assert_eq!(r.assignment(), &[0, 0, 1, 1]);
    }

    #[test]
    fn restrict_keeps_mixed_cluster() {
        // Poison point 4 sits inside the second cluster.
        let p = partition(&[0, 0, 1, 1, 1]);
        let originals = [0usize, 1, 2, 3];
        let r = restrict(&p, &originals).unwrap();
        assert_eq!(r.k(), 2);
        assert_eq!(r.assignment(), &[0, 0, 1, 1]);
    }

    #[test]
    fn restrict_unknown_index_rejected() {
        let p = partition(&[0, 1]);
        assert!(matches!(
            restrict(&p, &[0, 5]),
            Err(Error::UnknownIndex { index: 5, n: 2 })
        ));
    }

    #[test]
    fn metrics_record_csv_shape() {
        let rec = MetricsRecord::<f64> {
            poison_count: 2,
            poison_fraction: 0.02,
            objective_dc: 1.5,
            clusters: 9,
            precision: 0.9,
            recall: 0.8,
            f_measure: 0.8470588235294118,
        };
        assert_eq!(rec.to_csv_row(), "2,0.02,1.5,9,0.9,0.8,0.8470588235294118");
    }
}
