use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of the best one-to-one matching between clusters and classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub acc: f64,
    /// `mapping[c]` is the class assigned to cluster `c`, or `None` when there
    /// are more clusters than classes and `c` was left unmatched.
    pub mapping: Vec<Option<usize>>,
    pub correct: usize,
}

/// `counts[c][l]` = number of points in cluster `c` with label `l`.
pub fn contingency(pred: &[usize], truth: &[usize], k: usize, l: usize) -> Result<Vec<Vec<u64>>> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} assignments but {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut counts = vec![vec![0u64; l]; k];
    for (&c, &t) in pred.iter().zip(truth) {
        if c >= k || t >= l {
            return Err(Error::InvalidInput(format!("id out of range: cluster {c} (< {k}), label {t} (< {l})")));
        }
        counts[c][t] += 1;
    }
    Ok(counts)
}

/// Minimum-cost perfect matching on a square cost matrix. Returns `assign[row] = col`.
pub fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // Potentials formulation with 1-based sentinel column 0.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

/// Best one-to-one relabeling accuracy of `pred` (ids in `0..k`) against
/// `truth` (ids in `0..l`). Rectangular cases are padded with empty rows/columns.
pub fn assignment_accuracy(pred: &[usize], truth: &[usize], k: usize, l: usize) -> Result<Accuracy> {
    if pred.is_empty() {
        return Err(Error::Shape("no points to score".into()));
    }
    let counts = contingency(pred, truth, k, l)?;
    let n = k.max(l);
    let max = counts.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost: Vec<Vec<i64>> = (0..n)
        .map(|c| {
            (0..n)
                .map(|t| max - counts.get(c).and_then(|r| r.get(t)).copied().unwrap_or(0) as i64)
                .collect()
        })
        .collect();
    let assign = hungarian(&cost);
    let mut correct = 0;
    let mut mapping = vec![None; k];
    for (c, m) in mapping.iter_mut().enumerate() {
        let t = assign[c];
        if t < l {
            *m = Some(t);
            correct += counts[c][t];
        }
    }
    Ok(Accuracy {
        acc: correct as f64 / pred.len() as f64,
        mapping,
        correct: correct as usize,
    })
}

/// Fraction of points that share the majority label of their cluster.
pub fn purity(pred: &[usize], truth: &[usize], k: usize, l: usize) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::Shape("no points to score".into()));
    }
    let counts = contingency(pred, truth, k, l)?;
    let hit: u64 = counts.iter().map(|r| r.iter().copied().max().unwrap_or(0)).sum();
    Ok(hit as f64 / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_permutation() {
        let labels = [0, 1, 2, 2, 1, 0, 3];
        assert_eq!(assignment_accuracy(&labels, &labels, 4, 4).unwrap().acc, 1.0);
        let perm = [2, 0, 3, 1];
        let codes: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
        let a = assignment_accuracy(&codes, &labels, 4, 4).unwrap();
        assert_eq!(a.acc, 1.0);
        for (l, &c) in perm.iter().enumerate() {
            assert_eq!(a.mapping[c], Some(l));
        }
    }

    #[test]
    fn five_of_six() {
        let a = assignment_accuracy(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 1, 1], 2, 2).unwrap();
        assert_eq!(a.correct, 5);
        assert!((a.acc - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn rectangular() {
        // three clusters, two classes
        let a = assignment_accuracy(&[0, 1, 2, 2], &[0, 1, 1, 1], 3, 2).unwrap();
        assert_eq!(a.correct, 3);
        assert_eq!(a.mapping.iter().filter(|m| m.is_none()).count(), 1);
    }

    #[test]
    fn purity_counts_majorities() {
        assert_eq!(purity(&[0, 0, 0, 1], &[1, 1, 0, 0], 2, 2).unwrap(), 0.75);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(assignment_accuracy(&[0, 1], &[0], 2, 2), Err(Error::Shape(_))));
    }
}
