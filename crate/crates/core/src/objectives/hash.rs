//! Hash-bit objective: per-bit information minus pairwise redundancy.
//!
//! Under conditional independence of the bits given the input, the joint of
//! two bits is the batch average of the product of their per-point
//! probabilities, and the three-way interaction information with the input
//! is the negated pairwise mutual information.

use serde::{Deserialize, Serialize};

use super::entropy::{xlogx, xlogx_grad};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// 2×2 joint table indexed `[y_d][y_e]`.
pub type Joint2 = [[f64; 2]; 2];

/// How the pairwise redundancy sum runs over bit pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCounting {
    /// Every `d ≠ d'`; each unordered pair counted twice.
    #[default]
    Ordered,
    /// Every `d < d'`.
    Unordered,
}

impl PairCounting {
    fn weight(self) -> f64 {
        match self {
            PairCounting::Ordered => 2.0,
            PairCounting::Unordered => 1.0,
        }
    }
}

fn check_bit_probs(p: &[f64], what: &str) -> Result<()> {
    match p.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
        Some(v) => Err(Error::InvalidInput(format!("{what} probability {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Batch joint of two bits: `joint[a][b] = mean_i P(y_d=a|x_i)·P(y_e=b|x_i)`.
pub fn pairwise_joint(bit_d: &[f64], bit_e: &[f64]) -> Result<Joint2> {
    if bit_d.len() != bit_e.len() || bit_d.is_empty() {
        return Err(Error::Shape(format!("bit columns of length {} and {}", bit_d.len(), bit_e.len())));
    }
    check_bit_probs(bit_d, "bit d")?;
    check_bit_probs(bit_e, "bit e")?;
    Ok(joint_unchecked(bit_d, bit_e))
}

fn joint_unchecked(bit_d: &[f64], bit_e: &[f64]) -> Joint2 {
    let mut j = [[0.0; 2]; 2];
    for (&a, &b) in bit_d.iter().zip(bit_e) {
        j[0][0] += (1.0 - a) * (1.0 - b);
        j[0][1] += (1.0 - a) * b;
        j[1][0] += a * (1.0 - b);
        j[1][1] += a * b;
    }
    let n = bit_d.len() as f64;
    j.iter_mut().flatten().for_each(|v| *v /= n);
    j
}

/// `I = Σ joint · ln(joint / (row · col))`, skipping zero cells.
pub fn mutual_information_from_joint(joint: &Joint2) -> Result<f64> {
    let flat: Vec<f64> = joint.iter().flatten().copied().collect();
    super::entropy::check_distribution(&flat, "joint")?;
    let rows = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
    let cols = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    let mut mi = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let j = joint[a][b];
            if j > 0.0 {
                mi += j * (j / (rows[a] * cols[b])).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Clamped mutual information used inside the loss, with its gradient
/// with respect to the four joint cells.
fn mi_clamped(j: &Joint2) -> (f64, Joint2) {
    let rows = [j[0][0] + j[0][1], j[1][0] + j[1][1]];
    let cols = [j[0][0] + j[1][0], j[0][1] + j[1][1]];
    let mut v = 0.0;
    let mut g = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            v += xlogx(j[a][b]);
            g[a][b] = xlogx_grad(j[a][b]) - xlogx_grad(rows[a]) - xlogx_grad(cols[b]);
        }
    }
    for a in 0..2 {
        v -= xlogx(rows[a]) + xlogx(cols[a]);
    }
    (v, g)
}

/// Binary entropy with clamped logs.
fn h2(p: f64) -> f64 {
    -xlogx(p) - xlogx(1.0 - p)
}

fn h2_grad(p: f64) -> f64 {
    -xlogx_grad(p) + xlogx_grad(1.0 - p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashObjective {
    pub lambda: f64,
    pub bits: usize,
    #[serde(default)]
    pub pairs: PairCounting,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HashTerms {
    pub sat: f64,
    /// `Σ_d H(Y_d)`
    pub marginal_entropy: f64,
    /// `Σ_d H(Y_d|X)`
    pub cond_entropy: f64,
    /// Pair-weighted redundancy `Σ_{d≠d'} I(Y_d; Y_d')`.
    pub redundancy: f64,
    pub total: f64,
}

impl HashObjective {
    pub fn new(lambda: f64, bits: usize) -> Result<Self> {
        if bits == 0 || bits > 64 {
            return Err(Error::InvalidConfig(format!("hash bits must be in 1..=64, got {bits}")));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            lambda,
            bits,
            pairs: PairCounting::Ordered,
        })
    }

    pub fn with_pairs(mut self, pairs: PairCounting) -> Self {
        self.pairs = pairs;
        self
    }

    fn check(&self, p: &Matrix) -> Result<()> {
        if p.cols() != self.bits {
            return Err(Error::Shape(format!("{} bit columns, objective has {} bits", p.cols(), self.bits)));
        }
        if p.rows() == 0 {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        check_bit_probs(p.as_slice(), "bit")
    }

    fn compute(&self, p: &Matrix, sat: f64, want_grad: bool) -> (HashTerms, Option<Matrix>) {
        let n = p.rows();
        let nf = n as f64;
        let d_bits = self.bits;
        let cols: Vec<Vec<f64>> = (0..d_bits).map(|d| p.column(d)).collect();
        let mut grad = want_grad.then(|| Matrix::zeros(n, d_bits));

        let mut marg = 0.0;
        let mut cond = 0.0;
        for (d, col) in cols.iter().enumerate() {
            let m = col.iter().sum::<f64>() / nf;
            marg += h2(m);
            cond += col.iter().map(|&v| h2(v)).sum::<f64>() / nf;
            if let Some(g) = grad.as_mut() {
                // loss contains −λ·(H(Y_d) − H(Y_d|X))
                let gm = h2_grad(m) / nf;
                for (i, &v) in col.iter().enumerate() {
                    let cur = g.get(i, d);
                    g.set(i, d, cur - self.lambda * (gm - h2_grad(v) / nf));
                }
            }
        }

        let w = self.pairs.weight();
        let mut red = 0.0;
        for d in 0..d_bits {
            for e in d + 1..d_bits {
                let j = joint_unchecked(&cols[d], &cols[e]);
                let (mi, gj) = mi_clamped(&j);
                red += w * mi;
                if let Some(g) = grad.as_mut() {
                    // loss contains +λ·w·I(Y_d; Y_e)
                    let s = self.lambda * w / nf;
                    for i in 0..n {
                        let (a, b) = (cols[d][i], cols[e][i]);
                        let ua = [1.0 - a, a];
                        let ub = [1.0 - b, b];
                        let mut dd = 0.0;
                        let mut de = 0.0;
                        for x in 0..2 {
                            let sx = if x == 1 { 1.0 } else { -1.0 };
                            for y in 0..2 {
                                let sy = if y == 1 { 1.0 } else { -1.0 };
                                dd += gj[x][y] * sx * ub[y];
                                de += gj[x][y] * ua[x] * sy;
                            }
                        }
                        let cd = g.get(i, d);
                        g.set(i, d, cd + s * dd);
                        let ce = g.get(i, e);
                        g.set(i, e, ce + s * de);
                    }
                }
            }
        }
        let total = sat - self.lambda * ((marg - cond) - red);
        (
            HashTerms {
                sat,
                marginal_entropy: marg,
                cond_entropy: cond,
                redundancy: red,
                total,
            },
            grad,
        )
    }

    pub fn evaluate(&self, bit_probs: &Matrix, sat: f64) -> Result<HashTerms> {
        self.check(bit_probs)?;
        Ok(self.compute(bit_probs, sat, false).0)
    }

    /// Terms (with `sat = 0`) and the gradient of the information part with
    /// respect to the per-bit probabilities.
    pub fn gradient(&self, bit_probs: &Matrix) -> Result<(HashTerms, Matrix)> {
        self.check(bit_probs)?;
        let (t, g) = self.compute(bit_probs, 0.0, true);
        Ok((t, g.expect("gradient requested")))
    }
}

/// `sat − λ·[Σ_d (H(Y_d) − H(Y_d|X)) − Σ_{d≠d'} I(Y_d; Y_d')]` on one batch.
pub fn hash_loss(per_bit_probs: &Matrix, sat: f64, cfg: &HashObjective) -> Result<f64> {
    Ok(cfg.evaluate(per_bit_probs, sat)?.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn close(a: &Joint2, b: &Joint2) -> bool {
        a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).abs() < 1e-15)
    }

    #[test]
    fn joint_examples() {
        let j = pairwise_joint(&[0.5, 0.5, 0.5], &[0.5, 0.5, 0.5]).unwrap();
        assert!(close(&j, &[[0.25, 0.25], [0.25, 0.25]]));
        let j = pairwise_joint(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(close(&j, &[[0.5, 0.0], [0.0, 0.5]]));
        // Enumerated by hand: point 1 (0.8, 0.6), point 2 (0.2, 0.4)
        // [0][0]: (0.2·0.4 + 0.8·0.6)/2 = 0.28   [0][1]: (0.2·0.6 + 0.8·0.4)/2 = 0.22
        // [1][0]: (0.8·0.4 + 0.2·0.6)/2 = 0.22   [1][1]: (0.8·0.6 + 0.2·0.4)/2 = 0.28
        let j = pairwise_joint(&[0.8, 0.2], &[0.6, 0.4]).unwrap();
        assert!(close(&j, &[[0.28, 0.22], [0.22, 0.28]]), "{j:?}");
        assert!(matches!(pairwise_joint(&[0.5], &[0.5, 0.5]), Err(Error::Shape(_))));
    }

    #[test]
    fn mutual_information_examples() {
        let indep = [[0.12, 0.28], [0.18, 0.42]];
        assert!(mutual_information_from_joint(&indep).unwrap().abs() < 1e-15);
        let corr = [[0.5, 0.0], [0.0, 0.5]];
        assert!((mutual_information_from_joint(&corr).unwrap() - LN_2).abs() < 1e-15);
        assert!(mutual_information_from_joint(&[[0.5, 0.5], [0.5, 0.0]]).is_err());
    }

    #[test]
    fn one_bit_reduces_to_information_only() {
        let cfg = HashObjective::new(1.0, 1).unwrap();
        let p = Matrix::from_rows(&[vec![1.0 - 1e-8], vec![1e-8]]).unwrap();
        let t = cfg.evaluate(&p, 0.0).unwrap();
        assert_eq!(t.redundancy, 0.0);
        assert!((t.total + LN_2).abs() < 1e-6, "{}", t.total);
    }

    #[test]
    fn uninformative_bits_leave_only_sat() {
        let cfg = HashObjective::new(0.1, 4).unwrap();
        let p = Matrix::filled(5, 4, 0.5);
        assert!((hash_loss(&p, 0.37, &cfg).unwrap() - 0.37).abs() < 1e-15);
    }

    #[test]
    fn ordered_pairs_double_redundancy() {
        let p = Matrix::from_rows(&[vec![0.9, 0.8, 0.3], vec![0.1, 0.3, 0.6], vec![0.7, 0.6, 0.5]]).unwrap();
        let o = HashObjective::new(0.5, 3).unwrap().evaluate(&p, 0.0).unwrap();
        let u = HashObjective::new(0.5, 3)
            .unwrap()
            .with_pairs(PairCounting::Unordered)
            .evaluate(&p, 0.0)
            .unwrap();
        assert!((o.redundancy - 2.0 * u.redundancy).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = HashObjective::new(0.8, 3).unwrap();
        let p = Matrix::from_rows(&[
            vec![0.9, 0.8, 0.3],
            vec![0.1, 0.3, 0.6],
            vec![0.7, 0.6, 0.5],
            vec![0.2, 0.45, 0.15],
        ])
        .unwrap();
        let (_, g) = cfg.gradient(&p).unwrap();
        let h = 1e-6;
        for idx in 0..12 {
            let mut up = p.clone();
            up.as_mut_slice()[idx] += h;
            let mut dn = p.clone();
            dn.as_mut_slice()[idx] -= h;
            let fd = (cfg.evaluate(&up, 0.0).unwrap().total - cfg.evaluate(&dn, 0.0).unwrap().total) / (2.0 * h);
            assert!((fd - g.as_slice()[idx]).abs() < 1e-6, "{idx}: {fd} vs {}", g.as_slice()[idx]);
        }
    }
}
