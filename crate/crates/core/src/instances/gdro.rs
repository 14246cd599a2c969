//! Group DRO with a linear logistic model, in its `(w, c)` dual form
//!
//! ```text
//! min_{w, c}  (1/n) sum_i lambda phi^*((R_i(w) - c) / lambda) + c + (wd / 2) ||w||^2
//! ```
//!
//! where `R_i` is the mean logistic loss of group `i`.

use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::outer::{ChiSquareOuter, OuterFunction, ScaledPositivePart};
use crate::problem::{
    BoxDomain, InnerOracle, Interval, ProblemInstance, Regularizer, SampleLossView,
};
use crate::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-b <w, a>))` and its gradient in `w`.
pub fn logistic_loss(w: &[f64], a: &[f64], b: f64) -> (f64, Vec<f64>) {
    let z = -b * dot(w, a);
    let s = -b * sigmoid(z);
    (softplus(z), a.iter().map(|v| s * v).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    pub features: Vec<Vec<f64>>,
    /// `+1` or `-1`.
    pub labels: Vec<f64>,
    pub group_of: Vec<usize>,
    pub n_groups: usize,
    pub group_index: Vec<Vec<usize>>,
}

impl GroupedDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>, group_of: Vec<usize>) -> Result<Self> {
        let n = features.len();
        if labels.len() != n || group_of.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len().min(group_of.len()),
            });
        }
        let d = features.first().map_or(0, Vec::len);
        if let Some(row) = features.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if let Some(b) = labels.iter().find(|&&b| b != 1.0 && b != -1.0) {
            return Err(Error::InvalidParameters(format!("labels must be +-1, got {b}")));
        }
        let n_groups = group_of.iter().max().map_or(0, |g| g + 1);
        let mut group_index = vec![Vec::new(); n_groups];
        for (s, &g) in group_of.iter().enumerate() {
            group_index[g].push(s);
        }
        if let Some(g) = group_index.iter().position(Vec::is_empty) {
            return Err(Error::EmptyGroup(g));
        }
        if n_groups == 0 {
            return Err(Error::InvalidParameters("dataset has no samples".into()));
        }
        Ok(GroupedDataset {
            features,
            labels,
            group_of,
            n_groups,
            group_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn n_samples(&self) -> usize {
        self.features.len()
    }

    pub fn loss(&self, w: &[f64], sample: usize) -> f64 {
        softplus(-self.labels[sample] * dot(w, &self.features[sample]))
    }

    /// Full-group empirical risk `R_g(w)`.
    pub fn group_risk(&self, w: &[f64], group: usize) -> f64 {
        let members = &self.group_index[group];
        members.iter().map(|&s| self.loss(w, s)).sum::<f64>() / members.len() as f64
    }

    pub fn group_risks(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n_groups).map(|g| self.group_risk(w, g)).collect()
    }

    /// Per-group accuracy of `sign(<w, a>)`, ties counted as errors.
    pub fn group_accuracies(&self, w: &[f64]) -> Vec<f64> {
        self.group_index
            .iter()
            .map(|members| {
                let hits = members
                    .iter()
                    .filter(|&&s| self.labels[s] * dot(w, &self.features[s]) > 0.0)
                    .count();
                hits as f64 / members.len() as f64
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Divergence {
    Cvar { alpha: f64 },
    Chi2 { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdroOptions {
    pub weight_decay: f64,
    /// Upper bound `B_R` on group risks; the box for `c` is `[-lambda, B_R]`.
    pub risk_bound: f64,
}

impl GdroOptions {
    pub fn new(weight_decay: f64) -> Self {
        GdroOptions {
            weight_decay,
            risk_bound: 3.0,
        }
    }
}

/// `g_i(w, c) = (R_i(w; B) - c) * scale`, batches drawn with replacement from group `i`.
#[derive(Debug, Clone)]
pub struct GroupRisk {
    data: Arc<GroupedDataset>,
    group: usize,
    scale: f64,
}

impl GroupRisk {
    pub fn new(data: Arc<GroupedDataset>, group: usize, scale: f64) -> Self {
        GroupRisk { data, group, scale }
    }
}

impl InnerOracle for GroupRisk {
    fn dim(&self) -> usize {
        self.data.dim() + 1
    }

    fn exact_value(&self, x: &[f64]) -> Option<f64> {
        let d = self.data.dim();
        Some(self.scale * (self.data.group_risk(&x[..d], self.group) - x[d]))
    }

    fn sample_batch(&self, rng: &mut dyn RngCore, size: usize, out: &mut Vec<usize>) {
        let members = &self.data.group_index[self.group];
        out.clear();
        out.extend((0..size).map(|_| members[rng.random_range(0..members.len())]));
    }

    fn value(&self, x: &[f64], batch: &[usize]) -> f64 {
        let d = self.data.dim();
        let risk = batch.iter().map(|&s| self.data.loss(&x[..d], s)).sum::<f64>() / batch.len() as f64;
        self.scale * (risk - x[d])
    }

    fn add_jtvp(&self, x: &[f64], batch: &[usize], scale: f64, out: &mut [f64]) {
        let d = self.data.dim();
        let w = &x[..d];
        let k = scale * self.scale / batch.len() as f64;
        for &s in batch {
            let a = &self.data.features[s];
            let b = self.data.labels[s];
            let coef = -b * sigmoid(-b * dot(w, a)) * k;
            for (o, v) in out[..d].iter_mut().zip(a) {
                *o += coef * v;
            }
        }
        out[d] -= scale * self.scale;
    }

    fn full_batch(&self) -> Option<Vec<usize>> {
        Some(self.data.group_index[self.group].clone())
    }

    fn is_affine(&self) -> bool {
        false
    }

    fn is_smooth(&self) -> bool {
        true
    }
}

/// Flat per-sample logistic losses acting on the `w` block of `(w, c)`.
#[derive(Debug, Clone)]
pub struct GroupedSamples {
    data: Arc<GroupedDataset>,
}

impl SampleLossView for GroupedSamples {
    fn n_samples(&self) -> usize {
        self.data.n_samples()
    }

    fn groups(&self) -> &[Vec<usize>] {
        &self.data.group_index
    }

    fn add_loss_gradient(&self, x: &[f64], sample: usize, scale: f64, out: &mut [f64]) {
        let d = self.data.dim();
        let a = &self.data.features[sample];
        let b = self.data.labels[sample];
        let coef = -b * sigmoid(-b * dot(&x[..d], a)) * scale;
        for (o, v) in out[..d].iter_mut().zip(a) {
            *o += coef * v;
        }
    }

    fn loss(&self, x: &[f64], sample: usize) -> f64 {
        self.data.loss(&x[..self.data.dim()], sample)
    }
}

/// Builds the `(w, c)` problem. For CVaR, `lambda phi^*((R - c) / lambda)`
/// equals `(1/alpha)(R - c)_+` for every `lambda`, so the inner is `R - c`
/// and the box for `c` is `[-1, B_R]`. For chi-square the inner is
/// `(R - c) / lambda` and the dual domain is capped at the largest slope
/// reachable on that box, `(B_R + 3 lambda) / 2`.
pub fn build_gdro(data: Arc<GroupedDataset>, divergence: Divergence, options: GdroOptions) -> Result<ProblemInstance> {
    if !(options.weight_decay >= 0.0) || !(options.risk_bound > 0.0) {
        return Err(Error::InvalidParameters(
            "weight decay must be nonnegative and the risk bound positive".into(),
        ));
    }
    let d = data.dim();
    let (outer, scale, lambda): (Arc<dyn OuterFunction>, f64, f64) = match divergence {
        Divergence::Cvar { alpha } => {
            if !(alpha > 0.0 && alpha < 1.0) && alpha != 1.0 {
                return Err(Error::InvalidParameters(format!("alpha must lie in (0, 1], got {alpha}")));
            }
            (Arc::new(ScaledPositivePart::new(alpha)?), 1.0, 1.0)
        }
        Divergence::Chi2 { lambda } => {
            if !(lambda > 0.0) {
                return Err(Error::InvalidParameters(format!("lambda must be positive, got {lambda}")));
            }
            let c_f = 0.5 * (options.risk_bound + 3.0 * lambda);
            (Arc::new(ChiSquareOuter::new(lambda, c_f)?), 1.0 / lambda, lambda)
        }
    };
    let n = data.n_groups;
    let outers = vec![outer; n];
    let inners = (0..n)
        .map(|g| Arc::new(GroupRisk::new(Arc::clone(&data), g, scale)) as Arc<dyn InnerOracle>)
        .collect();
    let mut reg = Regularizer::ridge(d + 1, options.weight_decay)?;
    reg.set_l2(d, 0.0);
    reg.set_linear(d, 1.0);
    let domain = BoxDomain::unbounded(d + 1).with_bound(d, Interval::new(-lambda, options.risk_bound)?)?;
    Ok(ProblemInstance::new(outers, inners, reg, domain)?.with_samples(Arc::new(GroupedSamples { data })))
}

/// Gaussian clusters per group with group-specific separating hyperplanes.
///
/// Group `g` has center `m_g ~ N(0, I)` and normal `w_g = cos(phi_g) w_0 +
/// sin(phi_g) v_g`, where `v_g` is a random unit vector orthogonal to `w_0`
/// and `phi_g = heterogeneity * U(0, pi/2)`. Labels are drawn from a sharp
/// logistic model on `<w_g, a>` and flipped with probability 0.05.
pub fn build_synthetic_gdro(
    n_groups: usize,
    d: usize,
    samples_per_group: usize,
    heterogeneity: f64,
    rng: &mut dyn RngCore,
) -> Result<GroupedDataset> {
    if n_groups == 0 || d == 0 || samples_per_group == 0 || !(heterogeneity >= 0.0) {
        return Err(Error::InvalidParameters(
            "synthetic GDRO needs positive sizes and nonnegative heterogeneity".into(),
        ));
    }
    let gauss = |rng: &mut dyn RngCore, k: usize| -> Vec<f64> {
        (0..k).map(|_| StandardNormal.sample(rng)).collect()
    };
    let w0 = unit(gauss(rng, d));
    let mut features = Vec::with_capacity(n_groups * samples_per_group);
    let mut labels = Vec::with_capacity(features.capacity());
    let mut group_of = Vec::with_capacity(features.capacity());
    for g in 0..n_groups {
        let center = gauss(rng, d);
        let mut v = gauss(rng, d);
        let proj = dot(&v, &w0);
        v.iter_mut().zip(&w0).for_each(|(a, b)| *a -= proj * b);
        let v = if d > 1 { unit(v) } else { vec![0.0] };
        let phi = heterogeneity * rng.random::<f64>() * std::f64::consts::FRAC_PI_2;
        let wg: Vec<f64> = w0.iter().zip(&v).map(|(a, b)| phi.cos() * a + phi.sin() * b).collect();
        for _ in 0..samples_per_group {
            let noise = gauss(rng, d);
            let a: Vec<f64> = center.iter().zip(&noise).map(|(c, z)| c + z).collect();
            let mut b = if rng.random::<f64>() < sigmoid(4.0 * dot(&wg, &a)) { 1.0 } else { -1.0 };
            if rng.random::<f64>() < 0.05 {
                b = -b;
            }
            features.push(a);
            labels.push(b);
            group_of.push(g);
        }
    }
    GroupedDataset::new(features, labels, group_of)
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let norm = dot(&v, &v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}
