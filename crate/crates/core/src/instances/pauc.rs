//! One-way partial AUC with a TPR lower bound `alpha`, as the `(w, s)` problem
//!
//! ```text
//! min_{w, s}  s + 1/(n_+ (1 - alpha)) sum_{i in S_+} ( (1/n_-) sum_{j in S_-} l(<w, a_j> - <w, a_i>) - s )_+
//! ```
//!
//! with a convex nondecreasing surrogate `l`.

use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::gdro::{sigmoid, softplus};
use crate::outer::{OuterFunction, ScaledPositivePart};
use crate::problem::{BoxDomain, InnerOracle, ProblemInstance, Regularizer};
use crate::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surrogate {
    /// `(1 + u)_+^2`
    SquaredHinge,
    /// `log(1 + e^u)`
    Logistic,
}

impl Surrogate {
    pub fn value(self, u: f64) -> f64 {
        match self {
            Surrogate::SquaredHinge => (1.0 + u).max(0.0).powi(2),
            Surrogate::Logistic => softplus(u),
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Surrogate::SquaredHinge => 2.0 * (1.0 + u).max(0.0),
            Surrogate::Logistic => sigmoid(u),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaucDataset {
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
    pub alpha: f64,
}

impl PaucDataset {
    pub fn new(positives: Vec<Vec<f64>>, negatives: Vec<Vec<f64>>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameters(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if negatives.is_empty() {
            return Err(Error::DegenerateSelection("no negative samples".into()));
        }
        if (positives.len() as f64) * (1.0 - alpha) < 1.0 {
            return Err(Error::DegenerateSelection(format!(
                "n_+ (1 - alpha) = {} < 1",
                positives.len() as f64 * (1.0 - alpha)
            )));
        }
        let d = positives[0].len();
        if let Some(r) = positives.iter().chain(&negatives).find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: r.len(),
            });
        }
        Ok(PaucDataset {
            positives,
            negatives,
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.positives[0].len()
    }

    pub fn scores(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            self.positives.iter().map(|a| dot(w, a)).collect(),
            self.negatives.iter().map(|a| dot(w, a)).collect(),
        )
    }
}

/// `g_i(w, s) = mean_{j in B} l(<w, a_j> - <w, a_i>) - s` over negatives drawn with replacement.
#[derive(Debug, Clone)]
pub struct PairwiseInner {
    data: Arc<PaucDataset>,
    positive: usize,
    surrogate: Surrogate,
}

impl PairwiseInner {
    pub fn new(data: Arc<PaucDataset>, positive: usize, surrogate: Surrogate) -> Self {
        PairwiseInner {
            data,
            positive,
            surrogate,
        }
    }
}

impl InnerOracle for PairwiseInner {
    fn dim(&self) -> usize {
        self.data.dim() + 1
    }

    fn exact_value(&self, x: &[f64]) -> Option<f64> {
        let all: Vec<usize> = (0..self.data.negatives.len()).collect();
        Some(self.value(x, &all))
    }

    fn sample_batch(&self, rng: &mut dyn RngCore, size: usize, out: &mut Vec<usize>) {
        let n_neg = self.data.negatives.len();
        out.clear();
        out.extend((0..size).map(|_| rng.random_range(0..n_neg)));
    }

    fn value(&self, x: &[f64], batch: &[usize]) -> f64 {
        let d = self.data.dim();
        let w = &x[..d];
        let hi = dot(w, &self.data.positives[self.positive]);
        let total: f64 = batch
            .iter()
            .map(|&j| self.surrogate.value(dot(w, &self.data.negatives[j]) - hi))
            .sum();
        total / batch.len() as f64 - x[d]
    }

    fn add_jtvp(&self, x: &[f64], batch: &[usize], scale: f64, out: &mut [f64]) {
        let d = self.data.dim();
        let w = &x[..d];
        let ai = &self.data.positives[self.positive];
        let hi = dot(w, ai);
        let k = scale / batch.len() as f64;
        for &j in batch {
            let aj = &self.data.negatives[j];
            let coef = k * self.surrogate.derivative(dot(w, aj) - hi);
            for ((o, p), q) in out[..d].iter_mut().zip(aj).zip(ai) {
                *o += coef * (p - q);
            }
        }
        out[d] -= scale;
    }

    fn full_batch(&self) -> Option<Vec<usize>> {
        Some((0..self.data.negatives.len()).collect())
    }

    fn is_affine(&self) -> bool {
        false
    }

    fn is_smooth(&self) -> bool {
        true
    }
}

/// One component per positive, outer `(1/(1 - alpha)) (.)_+`, `+ s` as a
/// linear regularizer term and `(wd / 2) ||w||^2` on the model.
pub fn build_pauc(data: Arc<PaucDataset>, surrogate: Surrogate, weight_decay: f64) -> Result<ProblemInstance> {
    if !(weight_decay >= 0.0) {
        return Err(Error::InvalidParameters(format!(
            "weight decay must be nonnegative, got {weight_decay}"
        )));
    }
    let d = data.dim();
    let outer: Arc<dyn OuterFunction> = Arc::new(ScaledPositivePart::new(1.0 - data.alpha)?);
    let n = data.positives.len();
    let inners = (0..n)
        .map(|i| Arc::new(PairwiseInner::new(Arc::clone(&data), i, surrogate)) as Arc<dyn InnerOracle>)
        .collect();
    let mut reg = Regularizer::ridge(d + 1, weight_decay)?;
    reg.set_l2(d, 0.0);
    reg.set_linear(d, 1.0);
    ProblemInstance::new(vec![outer; n], inners, reg, BoxDomain::unbounded(d + 1))
}

/// Positives `N(shift * e, I)`, negatives `N(0, I)` with `e` the all-ones direction normalized.
pub fn build_synthetic_pauc(
    n_pos: usize,
    n_neg: usize,
    d: usize,
    separation: f64,
    alpha: f64,
    rng: &mut dyn RngCore,
) -> Result<PaucDataset> {
    if d == 0 {
        return Err(Error::InvalidParameters("dimension must be positive".into()));
    }
    let shift = separation / (d as f64).sqrt();
    let mut draw = |offset: f64| -> Vec<f64> {
        (0..d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut *rng);
                offset + z
            })
            .collect::<Vec<f64>>()
    };
    let positives = (0..n_pos).map(|_| draw(shift)).collect();
    let negatives = (0..n_neg).map(|_| draw(0.0)).collect();
    PaucDataset::new(positives, negatives, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::evaluate_objective;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separated_data_has_zero_objective() {
        // scores +1 for positives, -1 for negatives under w = (1)
        let data = Arc::new(PaucDataset::new(vec![vec![1.0]; 4], vec![vec![-1.0]; 3], 0.5).unwrap());
        let p = build_pauc(data, Surrogate::SquaredHinge, 0.0).unwrap();
        assert_abs_diff_eq!(evaluate_objective(&p, &[1.0, 0.0]).unwrap(), 0.0, epsilon = 1e-15);
        for s in [-0.5, 0.5] {
            assert!(evaluate_objective(&p, &[1.0, s]).unwrap() > 0.0);
        }
    }

    #[test]
    fn objective_matches_pair_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pos: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let neg: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let data = Arc::new(PaucDataset::new(pos.clone(), neg.clone(), 0.5).unwrap());
        for surrogate in [Surrogate::SquaredHinge, Surrogate::Logistic] {
            let p = build_pauc(Arc::clone(&data), surrogate, 0.0).unwrap();
            let (w, s) = ([0.3, -0.8], 0.4);
            let mut total = 0.0;
            for a in &pos {
                let mut inner = 0.0;
                for b in &neg {
                    let u = w[0] * (b[0] - a[0]) + w[1] * (b[1] - a[1]);
                    inner += surrogate.value(u);
                }
                total += (inner / 3.0 - s).max(0.0);
            }
            let expected = s + total / (4.0 * 0.5);
            assert_abs_diff_eq!(evaluate_objective(&p, &[w[0], w[1], s]).unwrap(), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn inner_is_unbiased_and_differentiable() {
        let data = Arc::new(build_synthetic_pauc(5, 20, 3, 1.0, 0.5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap());
        let g = PairwiseInner::new(Arc::clone(&data), 2, Surrogate::Logistic);
        let x = [0.2, -0.1, 0.5, 0.3];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut batch = Vec::new();
        let mut acc = 0.0;
        let reps = 20_000;
        for _ in 0..reps {
            g.sample_batch(&mut rng, 4, &mut batch);
            acc += g.value(&x, &batch);
        }
        assert!((acc / reps as f64 - g.exact_value(&x).unwrap()).abs() < 5e-3);

        let full = g.full_batch().unwrap();
        let jt = g.jtvp(&x, &full, 1.0);
        for j in 0..4 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (g.exact_value(&xp).unwrap() - g.exact_value(&xm).unwrap()) / (2.0 * h);
            assert!((fd - jt[j]).abs() < 1e-7);
        }
    }

    #[test]
    fn degenerate_selection() {
        assert!(matches!(
            PaucDataset::new(vec![vec![0.0]], vec![vec![0.0]], 0.5),
            Err(Error::DegenerateSelection(_))
        ));
    }

    #[test]
    fn surrogate_derivatives() {
        for s in [Surrogate::SquaredHinge, Surrogate::Logistic] {
            for u in [-2.0, -0.5, 0.0, 1.5] {
                let h = 1e-6;
                let fd = (s.value(u + h) - s.value(u - h)) / (2.0 * h);
                assert!((fd - s.derivative(u)).abs() < 1e-6);
            }
        }
    }
}
