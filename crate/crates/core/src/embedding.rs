//! Binary q-gram embedding with implicit unit ℓ2 normalization.
//!
//! A report maps to the set of feature indices of its distinct q-grams; the
//! implied dense vector has value `1/sqrt(|active|)` on each active
//! coordinate, so every embedded vector lies on the unit hypersphere and
//! distances reduce to intersection counts.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::dataset::{Report, ReportSet};
use crate::error::{Error, Result};
use crate::scalar::Float;

/// Bijection between observed q-grams and feature indices `[0, d)`, assigned
/// in lexicographic q-gram order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpace {
    q: usize,
    index_of: BTreeMap<Vec<String>, u32>,
}

impl FeatureSpace {
    pub fn q(&self) -> usize {
        self.q
    }

    /// Dimensionality: the number of distinct q-grams observed at build time.
    pub fn dim(&self) -> usize {
        self.index_of.len()
    }

    pub fn index_of(&self, gram: &[String]) -> Option<u32> {
        self.index_of.get(gram).copied()
    }

    /// Q-grams in index order.
    pub fn grams(&self) -> impl Iterator<Item = (&[String], u32)> {
        self.index_of.iter().map(|(g, &i)| (g.as_slice(), i))
    }
}

/// Sparse ℓ2-normalized binary vector: the strictly increasing list of active
/// feature indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryVector {
    active: Vec<u32>,
    origin_id: Option<String>,
}

impl SparseBinaryVector {
    /// Build from a sorted, deduplicated, nonempty index list.
    pub fn new(active: Vec<u32>, origin_id: Option<String>) -> Result<Self> {
        if active.is_empty() {
            return Err(Error::EmptyEmbedding {
                id: origin_id.unwrap_or_default(),
            });
        }
        if !active.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "active indices must be strictly increasing".into(),
            ));
        }
        Ok(SparseBinaryVector { active, origin_id })
    }

    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn origin_id(&self) -> Option<&str> {
        self.origin_id.as_deref()
    }

    /// Value every active coordinate takes after normalization.
    pub fn coordinate_value<S: Float>(&self) -> S {
        S::one() / S::of_usize(self.active.len()).sqrt()
    }

    /// Number of shared active indices with `other`.
    pub fn intersection_count(&self, other: &SparseBinaryVector) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.active.len() && j < other.active.len() {
            match self.active[i].cmp(&other.active[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Materialize the implied dense normalized vector.
    pub fn to_dense<S: Float>(&self, dim: usize) -> Vec<S> {
        let mut v = vec![S::zero(); dim];
        let value = self.coordinate_value::<S>();
        for &i in &self.active {
            v[i as usize] = value;
        }
        v
    }
}

/// Euclidean distance between two unit-normalized binary vectors:
/// `sqrt(2 - 2 |a ∩ b| / sqrt(|a| |b|))`. Symmetric, in `[0, sqrt(2)]`.
pub fn distance<S: Float>(a: &SparseBinaryVector, b: &SparseBinaryVector) -> S {
    distance_from_counts(a.active.len(), b.active.len(), a.intersection_count(b))
}

/// [`distance`] expressed over active-set sizes and the intersection count.
pub fn distance_from_counts<S: Float>(a_len: usize, b_len: usize, inter: usize) -> S {
    let norms = (S::of_usize(a_len) * S::of_usize(b_len)).sqrt();
    let two = S::of_f64(2.0);
    (two - two * S::of_usize(inter) / norms)
        .max(S::zero())
        .sqrt()
}

/// Embedded dataset: a shared feature space, one vector per report, optional
/// per-vector family labels, and a poison mask marking injected points.
#[derive(Debug, Clone)]
pub struct EmbeddedDataset {
    space: Arc<FeatureSpace>,
    vectors: Vec<SparseBinaryVector>,
    labels: Vec<Option<String>>,
    poison_mask: Vec<bool>,
}

impl EmbeddedDataset {
    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn shared_space(&self) -> Arc<FeatureSpace> {
        Arc::clone(&self.space)
    }

    pub fn vectors(&self) -> &[SparseBinaryVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels[i].as_deref()
    }

    pub fn is_poison(&self, i: usize) -> bool {
        self.poison_mask[i]
    }

    pub fn poison_count(&self) -> usize {
        self.poison_mask.iter().filter(|&&p| p).count()
    }

    /// Number of non-injected vectors; originals always precede poison.
    pub fn original_count(&self) -> usize {
        self.len() - self.poison_count()
    }

    /// Labels of the first `n` (original) vectors, if all present.
    pub fn original_labels(&self, n: usize) -> Option<Vec<&str>> {
        self.labels[..n]
            .iter()
            .map(|l| l.as_deref())
            .collect::<Option<Vec<_>>>()
    }

    /// True if some working vector has exactly this active set.
    pub fn contains_active_set(&self, active: &[u32]) -> bool {
        self.vectors.iter().any(|v| v.active() == active)
    }

    /// Append an injected poison vector.
    pub fn push_poison(&mut self, vector: SparseBinaryVector) {
        self.vectors.push(vector);
        self.labels.push(None);
        self.poison_mask.push(true);
    }
}

fn distinct_grams(report: &Report, q: usize) -> Result<BTreeSet<Vec<String>>> {
    if report.events.len() < q {
        return Err(Error::ReportShorterThanQ {
            id: report.id.clone(),
            len: report.events.len(),
            q,
        });
    }
    Ok(report.events.windows(q).map(|w| w.to_vec()).collect())
}

/// Build the feature space over all distinct q-grams of a report set.
pub fn build_feature_space(reports: &ReportSet, q: usize) -> Result<FeatureSpace> {
    if q == 0 {
        return Err(Error::InvalidParameter("q-gram length must be >= 1".into()));
    }
    let mut grams: BTreeSet<Vec<String>> = BTreeSet::new();
    for report in reports.reports() {
        grams.extend(distinct_grams(report, q)?);
    }
    let index_of = grams
        .into_iter()
        .enumerate()
        .map(|(i, g)| (g, i as u32))
        .collect();
    Ok(FeatureSpace { q, index_of })
}

/// Embed one report against a fixed (closed) feature space. Q-grams unknown
/// to the space are dropped; an empty result is an error.
pub fn embed(report: &Report, space: &FeatureSpace) -> Result<SparseBinaryVector> {
    let active: Vec<u32> = distinct_grams(report, space.q)?
        .iter()
        .filter_map(|g| space.index_of(g))
        .collect();
    // BTreeSet iteration is lexicographic and the index map is monotone in
    // gram order, so `active` is already strictly increasing.
    SparseBinaryVector::new(active, Some(report.id.clone()))
}

/// Embed a whole report set, carrying labels and a cleared poison mask.
pub fn embed_set(reports: &ReportSet, space: &Arc<FeatureSpace>) -> Result<EmbeddedDataset> {
    let mut vectors = Vec::with_capacity(reports.len());
    let mut labels = Vec::with_capacity(reports.len());
    for report in reports.reports() {
        vectors.push(embed(report, space)?);
        labels.push(report.family.clone());
    }
    let poison_mask = vec![false; vectors.len()];
    Ok(EmbeddedDataset {
        space: Arc::clone(space),
        vectors,
        labels,
        poison_mask,
    })
}

/// Serialize vectors as `id<TAB>idx1,idx2,...` lines.
pub fn dump_vectors(data: &EmbeddedDataset) -> String {
    let mut out = String::new();
    for (i, v) in data.vectors().iter().enumerate() {
        let id = v
            .origin_id()
            .map(str::to_owned)
            .unwrap_or_else(|| i.to_string());
        let indices: Vec<String> = v.active().iter().map(u32::to_string).collect();
        out.push_str(&id);
        out.push('\t');
        out.push_str(&indices.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Provenance;

    fn report(id: &str, events: &[&str]) -> Report {
        Report {
            id: id.into(),
            family: None,
            events: events.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn set(reports: Vec<Report>) -> ReportSet {
        ReportSet::new(reports, Provenance::Ingested).unwrap()
    }

    fn vector(active: &[u32]) -> SparseBinaryVector {
        SparseBinaryVector::new(active.to_vec(), None).unwrap()
    }

    #[test]
    fn unigram_space_enumeration() {
        let s = set(vec![report("r1", &["A", "B"]), report("r2", &["B", "C"])]);
        let space = build_feature_space(&s, 1).unwrap();
        assert_eq!(space.dim(), 3);
        assert_eq!(space.index_of(&["A".into()]), Some(0));
        assert_eq!(space.index_of(&["B".into()]), Some(1));
        assert_eq!(space.index_of(&["C".into()]), Some(2));
    }

    #[test]
    fn bigram_space_enumeration() {
        let s = set(vec![report("r1", &["A", "B", "A"])]);
        let space = build_feature_space(&s, 2).unwrap();
        assert_eq!(space.dim(), 2);
        assert!(space.index_of(&["A".into(), "B".into()]).is_some());
        assert!(space.index_of(&["B".into(), "A".into()]).is_some());
    }

    #[test]
    fn short_report_rejected() {
        let s = set(vec![report("r1", &["A"])]);
        assert!(matches!(
            build_feature_space(&s, 2),
            Err(Error::ReportShorterThanQ { .. })
        ));
    }

    #[test]
    fn embed_presence_semantics() {
        let s = set(vec![report("base", &["A", "B", "C"])]);
        let space = build_feature_space(&s, 1).unwrap();
        let v = embed(&report("r", &["A", "B", "A", "C"]), &space).unwrap();
        assert_eq!(v.active(), &[0, 1, 2]);
        assert_eq!(v.origin_id(), Some("r"));
    }

    #[test]
    fn embed_closed_vocabulary() {
        let s = set(vec![report("base", &["A"])]);
        let space = build_feature_space(&s, 1).unwrap();
        assert!(matches!(
            embed(&report("r", &["Z"]), &space),
            Err(Error::EmptyEmbedding { .. })
        ));
        let v = embed(&report("r2", &["A", "Z"]), &space).unwrap();
        assert_eq!(v.active(), &[0]);
        assert_eq!(v.coordinate_value::<f64>(), 1.0);
    }

    #[test]
    fn distance_hand_values() {
        let orthogonal = distance::<f64>(&vector(&[0]), &vector(&[1]));
        assert!((orthogonal - 2f64.sqrt()).abs() < 1e-12);

        let same = distance::<f64>(&vector(&[2, 5]), &vector(&[2, 5]));
        assert_eq!(same, 0.0);

        // {0,1} vs {0,1,2,3}: sqrt(2 - 2*2/sqrt(8)) = sqrt(2 - sqrt(2)).
        let nested = distance::<f64>(&vector(&[0, 1]), &vector(&[0, 1, 2, 3]));
        assert!((nested - (2f64 - 2f64.sqrt()).sqrt()).abs() < 1e-12);
        assert!((nested - 0.76537).abs() < 1e-5);
    }

    #[test]
    fn dense_norm_is_one() {
        let v = vector(&[1, 4, 9]);
        let dense: Vec<f64> = v.to_dense(12);
        let norm: f64 = dense.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}
