//! Clustering accuracy, hash retrieval metrics and hyper-parameter selection.

mod hungarian;
mod retrieval;
mod select;

use serde::{Deserialize, Serialize};

pub use hungarian::{assignment_accuracy, contingency, hungarian, purity, Accuracy};
pub use retrieval::{
    average_precision, hamming_distance, hamming_ranking, mean_average_precision, precision_at_n,
    precision_at_radius, stratified_split, MapResult, RadiusResult,
};
pub use select::{relative_scores, select_shared_hyperparameter};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeKind {
    Cluster { k: usize },
    Hash { bits: usize },
}

/// Discrete outputs for a set of points.
///
/// Hash codes store bit `d` at position `bits − 1 − d`, so bit 0 is the most
/// significant hex digit when printed.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeBook {
    pub kind: CodeKind,
    pub codes: Vec<u64>,
    /// Per-head probabilities the codes were derived from, if kept.
    pub soft_probs: Vec<Matrix>,
}

impl CodeBook {
    pub fn clusters(ids: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(c) = ids.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidInput(format!("cluster id {c} out of range for K = {k}")));
        }
        Ok(Self {
            kind: CodeKind::Cluster { k },
            codes: ids.into_iter().map(|c| c as u64).collect(),
            soft_probs: Vec::new(),
        })
    }

    pub fn hash(codes: Vec<u64>, bits: usize) -> Result<Self> {
        if bits == 0 || bits > 64 {
            return Err(Error::InvalidInput(format!("code length must be 1..=64, got {bits}")));
        }
        if bits < 64 {
            if let Some(c) = codes.iter().find(|&&c| c >> bits != 0) {
                return Err(Error::InvalidInput(format!("code {c:#x} wider than {bits} bits")));
            }
        }
        Ok(Self {
            kind: CodeKind::Hash { bits },
            codes,
            soft_probs: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn cluster_ids(&self) -> Vec<usize> {
        self.codes.iter().map(|&c| c as usize).collect()
    }

    pub fn select(&self, idx: &[usize]) -> Vec<u64> {
        idx.iter().map(|&i| self.codes[i]).collect()
    }

    /// One line per point: decimal cluster ids, or zero-padded hex codes of
    /// width `ceil(bits / 4)`.
    pub fn to_lines(&self) -> Vec<String> {
        match self.kind {
            CodeKind::Cluster { .. } => self.codes.iter().map(u64::to_string).collect(),
            CodeKind::Hash { bits } => {
                let width = bits.div_ceil(4);
                self.codes.iter().map(|c| format!("{c:0width$x}")).collect()
            }
        }
    }
}

/// Packs per-bit values (index 0 first) into an integer with bit 0 most significant.
pub fn pack_bits(bits: &[bool]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
}

/// Ground-truth class ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl LabelSet {
    /// Class count inferred as `max id + 1`.
    pub fn new(labels: Vec<usize>) -> Self {
        let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        Self { labels, classes }
    }

    pub fn with_classes(labels: Vec<usize>, classes: usize) -> Result<Self> {
        if let Some(l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidInput(format!("label {l} out of range for {classes} classes")));
        }
        Ok(Self { labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }
}

/// Clustering accuracy under the best one-to-one cluster-to-class mapping.
pub fn clustering_accuracy(codes: &CodeBook, labels: &LabelSet) -> Result<Accuracy> {
    let k = match codes.kind {
        CodeKind::Cluster { k } => k,
        CodeKind::Hash { .. } => return Err(Error::InvalidInput("expected cluster assignments".into())),
    };
    if codes.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} assignments but {} labels",
            codes.len(),
            labels.len()
        )));
    }
    assignment_accuracy(&codes.cluster_ids(), &labels.labels, k, labels.classes)
}

/// Retrieval settings for [`retrieval_metrics`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetrievalOptions {
    pub top_n: usize,
    pub radius: u32,
    pub queries_per_class: usize,
    pub seed: u64,
}

impl Default for RetrievalOptions {
    fn default() -> Self {
        Self {
            top_n: 500,
            radius: 2,
            queries_per_class: 100,
            seed: 0,
        }
    }
}

/// Metrics document written by the CLI. Fields that do not apply are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mapping: Option<Vec<Option<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_at_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_at_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empty_retrievals: Option<usize>,
}

impl MetricsReport {
    pub fn from_accuracy(a: &Accuracy) -> Self {
        Self {
            acc: Some(a.acc),
            mapping: Some(a.mapping.clone()),
            ..Self::default()
        }
    }
}

/// Stratified query split followed by mAP, precision@N and precision@r.
pub fn retrieval_metrics(codes: &CodeBook, labels: &LabelSet, opts: &RetrievalOptions) -> Result<MetricsReport> {
    if codes.len() != labels.len() {
        return Err(Error::Shape(format!("{} codes but {} labels", codes.len(), labels.len())));
    }
    let (qi, gi) = stratified_split(&labels.labels, opts.queries_per_class, opts.seed)?;
    let (qc, ql) = (codes.select(&qi), labels.select(&qi));
    let (gc, gl) = (codes.select(&gi), labels.select(&gi));
    let map = mean_average_precision(&qc, &ql, &gc, &gl)?;
    let pn = precision_at_n(&qc, &ql, &gc, &gl, opts.top_n)?;
    let pr = precision_at_radius(&qc, &ql, &gc, &gl, opts.radius)?;
    Ok(MetricsReport {
        map: Some(map.map),
        p_at_n: Some(pn),
        p_at_r: Some(pr.precision),
        empty_retrievals: Some(pr.empty),
        ..MetricsReport::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_lines() {
        let cb = CodeBook::hash(vec![pack_bits(&[true, false, false])], 3).unwrap();
        assert_eq!(cb.to_lines(), vec!["4"]);
        let cb = CodeBook::hash(vec![0xab, 0x1], 16).unwrap();
        assert_eq!(cb.to_lines(), vec!["00ab", "0001"]);
        assert!(CodeBook::hash(vec![8], 3).is_err());
    }

    #[test]
    fn accuracy_through_codebook() {
        let cb = CodeBook::clusters(vec![1, 1, 0], 2).unwrap();
        let a = clustering_accuracy(&cb, &LabelSet::new(vec![0, 0, 1])).unwrap();
        assert_eq!(a.acc, 1.0);
        assert_eq!(a.mapping, vec![Some(1), Some(0)]);
    }

    #[test]
    fn report_json_keys() {
        let r = MetricsReport::from_accuracy(&Accuracy {
            acc: 1.0,
            mapping: vec![Some(0)],
            correct: 1,
        });
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"acc":1.0,"mapping":[0]}"#);
    }
}
