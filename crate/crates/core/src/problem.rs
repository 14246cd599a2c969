//! Problem abstraction: outer components, stochastic inner oracles, the
//! regularizer and the primal box.

use std::fmt::Debug;
use std::sync::Arc;

use rand::RngCore;

use crate::outer::OuterFunction;
use crate::{Error, Result};

/// Closed interval `[lo, hi]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidParameters(format!(
                "empty interval [{lo}, {hi}]"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    #[inline]
    pub fn clamp(&self, v: f64) -> f64 {
        // f64::clamp panics on lo > hi; the constructor rules that out.
        v.max(self.lo).min(self.hi)
    }

    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }
}

/// Product of per-coordinate closed intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    bounds: Vec<Interval>,
}

impl BoxDomain {
    pub fn unbounded(dim: usize) -> Self {
        BoxDomain {
            bounds: vec![Interval::REAL_LINE; dim],
        }
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Ok(BoxDomain {
            bounds: vec![Interval::new(lo, hi)?; dim],
        })
    }

    pub fn from_bounds(bounds: Vec<Interval>) -> Result<Self> {
        for b in &bounds {
            Interval::new(b.lo, b.hi)?;
        }
        Ok(BoxDomain { bounds })
    }

    pub fn with_bound(mut self, coord: usize, bound: Interval) -> Result<Self> {
        Interval::new(bound.lo, bound.hi)?;
        let dim = self.dim();
        *self.bounds.get_mut(coord).ok_or(Error::DimensionMismatch {
            expected: dim,
            got: coord + 1,
        })? = bound;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.first_violation(x).is_none()
    }

    fn first_violation(&self, x: &[f64]) -> Option<usize> {
        x.iter()
            .zip(&self.bounds)
            .position(|(&v, b)| !b.contains(v))
    }

    pub fn project_in_place(&self, x: &mut [f64]) {
        for (v, b) in x.iter_mut().zip(&self.bounds) {
            *v = b.clamp(*v);
        }
    }
}

/// Coordinate-wise Euclidean projection onto the box.
pub fn project_box(x: &[f64], domain: &BoxDomain) -> Vec<f64> {
    let mut out = x.to_vec();
    domain.project_in_place(&mut out);
    out
}

/// Separable regularizer `r(x) = sum_j (l2_j / 2) x_j^2 + linear_j x_j`.
///
/// Linear terms carry the `+c` / `+s` parts of the GDRO and pAUC duals.
#[derive(Debug, Clone, PartialEq)]
pub struct Regularizer {
    l2: Vec<f64>,
    linear: Vec<f64>,
}

impl Regularizer {
    pub fn zero(dim: usize) -> Self {
        Regularizer {
            l2: vec![0.0; dim],
            linear: vec![0.0; dim],
        }
    }

    /// `(coeff / 2) * ||x||^2`.
    pub fn ridge(dim: usize, coeff: f64) -> Result<Self> {
        if !(coeff >= 0.0) {
            return Err(Error::InvalidParameters(format!(
                "l2 coefficient must be nonnegative, got {coeff}"
            )));
        }
        Ok(Regularizer {
            l2: vec![coeff; dim],
            linear: vec![0.0; dim],
        })
    }

    pub fn set_l2(&mut self, coord: usize, coeff: f64) {
        self.l2[coord] = coeff;
    }

    pub fn set_linear(&mut self, coord: usize, coeff: f64) {
        self.linear[coord] = coeff;
    }

    pub fn dim(&self) -> usize {
        self.l2.len()
    }

    /// Strong-convexity modulus: the smallest per-coordinate l2 weight.
    pub fn mu(&self) -> f64 {
        self.l2.iter().copied().fold(f64::INFINITY, f64::min).max(0.0)
    }

    pub fn l2(&self) -> &[f64] {
        &self.l2
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.l2.iter().zip(&self.linear))
            .map(|(&v, (&a, &c))| 0.5 * a * v * v + c * v)
            .sum()
    }

    /// `argmin_{x in X} <grad, x> + r(x) + (eta/2) ||x - x_t||^2`, written to `out`.
    ///
    /// With `include_linear = false` the linear part of `r` is dropped; the
    /// flat-sample SGD baselines use that to leave auxiliary coordinates alone.
    pub fn prox_step(
        &self,
        x_t: &[f64],
        grad: &[f64],
        eta: f64,
        domain: &BoxDomain,
        include_linear: bool,
        out: &mut [f64],
    ) {
        let bounds = domain.bounds();
        for j in 0..out.len() {
            let lin = if include_linear { self.linear[j] } else { 0.0 };
            let v = (eta * x_t[j] - grad[j] - lin) / (eta + self.l2[j]);
            out[j] = bounds[j].clamp(v);
        }
    }

    /// Proximal map of `scale * r` restricted to the box.
    pub fn prox(&self, v: &[f64], scale: f64, domain: &BoxDomain) -> Vec<f64> {
        let zeros = vec![0.0; v.len()];
        let mut out = vec![0.0; v.len()];
        self.prox_step(v, &zeros, 1.0 / scale, domain, true, &mut out);
        out
    }
}

/// Stochastic oracle for one inner function `g_i(x) = E[g_i(x; zeta)]`.
///
/// A batch is a list of sample identifiers drawn by [`InnerOracle::sample_batch`];
/// what an identifier means (a data row, a noise atom) is up to the oracle.
pub trait InnerOracle: Send + Sync + Debug {
    /// Primal dimension `d`.
    fn dim(&self) -> usize;

    /// `g_i(x)`, when the expectation is available in closed form or by a full pass.
    fn exact_value(&self, x: &[f64]) -> Option<f64>;

    /// Draws `size` i.i.d. sample identifiers into `out` (cleared first).
    fn sample_batch(&self, rng: &mut dyn RngCore, size: usize, out: &mut Vec<usize>);

    /// Mini-batch estimate `g_i(x; B)`.
    fn value(&self, x: &[f64], batch: &[usize]) -> f64;

    /// Accumulates `scale * [g_i'(x; B)]^T` into `out`.
    fn add_jtvp(&self, x: &[f64], batch: &[usize], scale: f64, out: &mut [f64]);

    /// `[g_i'(x; B)]^T y` as a fresh vector.
    fn jtvp(&self, x: &[f64], batch: &[usize], y: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.add_jtvp(x, batch, y, &mut out);
        out
    }

    /// For finite-sum oracles: a batch listing every support point once.
    fn full_batch(&self) -> Option<Vec<usize>> {
        None
    }

    fn is_affine(&self) -> bool;

    fn is_smooth(&self) -> bool;
}

/// Per-sample loss view used by the flat SGD baselines (ERM and up-weighting).
pub trait SampleLossView: Send + Sync + Debug {
    fn n_samples(&self) -> usize;

    /// Sample indices of each group.
    fn groups(&self) -> &[Vec<usize>];

    /// Accumulates `scale * grad_x loss(x; sample)` into `out`.
    fn add_loss_gradient(&self, x: &[f64], sample: usize, scale: f64, out: &mut [f64]);

    fn loss(&self, x: &[f64], sample: usize) -> f64;
}

/// Advisory problem constants. Never enforced while solving.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct ProblemConstants {
    pub c_f: Option<f64>,
    pub c_g: Option<f64>,
    pub l_f: Option<f64>,
    pub l_g: Option<f64>,
    pub sigma0_sq: Option<f64>,
    pub sigma1_sq: Option<f64>,
    pub delta_sq: Option<f64>,
}

/// Known minimizer and optimal value.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x_star: Vec<f64>,
    pub f_star: f64,
}

/// `min_{x in X} (1/n) sum_i f_i(g_i(x)) + r(x)` with scalar inner outputs.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    outers: Vec<Arc<dyn OuterFunction>>,
    inners: Vec<Arc<dyn InnerOracle>>,
    regularizer: Regularizer,
    domain: BoxDomain,
    constants: ProblemConstants,
    samples: Option<Arc<dyn SampleLossView>>,
    reference: Option<Reference>,
}

impl ProblemInstance {
    pub fn new(
        outers: Vec<Arc<dyn OuterFunction>>,
        inners: Vec<Arc<dyn InnerOracle>>,
        regularizer: Regularizer,
        domain: BoxDomain,
    ) -> Result<Self> {
        let n = outers.len();
        if n == 0 {
            return Err(Error::InvalidParameters("n must be at least 1".into()));
        }
        if inners.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: inners.len(),
            });
        }
        let d = domain.dim();
        if regularizer.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: regularizer.dim(),
            });
        }
        for (i, (f, g)) in outers.iter().zip(&inners).enumerate() {
            if g.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: g.dim(),
                });
            }
            // Composition stays convex for nonlinear inners only when f_i is
            // nondecreasing, i.e. its dual domain is nonnegative.
            if !g.is_affine() && (!f.is_monotone_nondecreasing() || f.dual_domain().lo < 0.0) {
                return Err(Error::InvalidParameters(format!(
                    "component {i}: outer `{}` is not nondecreasing but its inner is nonlinear",
                    f.name()
                )));
            }
        }
        Ok(ProblemInstance {
            outers,
            inners,
            regularizer,
            domain,
            constants: ProblemConstants::default(),
            samples: None,
            reference: None,
        })
    }

    pub fn with_constants(mut self, constants: ProblemConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn with_samples(mut self, samples: Arc<dyn SampleLossView>) -> Self {
        self.samples = Some(samples);
        self
    }

    pub fn with_reference(mut self, reference: Reference) -> Result<Self> {
        if reference.x_star.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: reference.x_star.len(),
            });
        }
        self.reference = Some(reference);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.outers.len()
    }

    /// Inner output dimension. Every shipped instance is scalar.
    pub fn m(&self) -> usize {
        1
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn outer(&self, i: usize) -> &dyn OuterFunction {
        self.outers[i].as_ref()
    }

    pub fn inner(&self, i: usize) -> &dyn InnerOracle {
        self.inners[i].as_ref()
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    pub fn samples(&self) -> Option<&dyn SampleLossView> {
        self.samples.as_deref()
    }

    pub fn reference(&self) -> Option<&Reference> {
        self.reference.as_ref()
    }

    /// Diagnostic pass comparing the advisory constants with what the outer
    /// functions report. Returns human-readable findings; empty means consistent.
    pub fn diagnose(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if let Some(c_f) = self.constants.c_f {
            for (i, f) in self.outers.iter().enumerate() {
                if f.lipschitz() > c_f + 1e-12 {
                    notes.push(format!(
                        "component {i}: outer Lipschitz constant {} exceeds C_f = {c_f}",
                        f.lipschitz()
                    ));
                }
            }
        }
        if let Some(l_f) = self.constants.l_f {
            for (i, f) in self.outers.iter().enumerate() {
                match f.smoothness() {
                    Some(l) if l > l_f + 1e-12 => notes.push(format!(
                        "component {i}: outer smoothness {l} exceeds L_f = {l_f}"
                    )),
                    None => notes.push(format!("component {i}: outer is not smooth but L_f is set")),
                    _ => {}
                }
            }
        }
        notes
    }
}

/// Dual-table representation tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualRepresentation {
    ExplicitDual,
    USequence,
}

/// One scalar block per outer component.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDualState {
    pub blocks: Vec<f64>,
    pub representation: DualRepresentation,
}

impl BlockDualState {
    pub fn explicit(blocks: Vec<f64>) -> Self {
        BlockDualState {
            blocks,
            representation: DualRepresentation::ExplicitDual,
        }
    }

    pub fn u_sequence(blocks: Vec<f64>) -> Self {
        BlockDualState {
            blocks,
            representation: DualRepresentation::USequence,
        }
    }

    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn check_point(problem: &ProblemInstance, x: &[f64]) -> Result<()> {
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x.len(),
        });
    }
    if let Some(j) = problem.domain.first_violation(x) {
        return Err(Error::DomainViolation {
            coordinate: j,
            value: x[j],
        });
    }
    Ok(())
}

/// Exact `F(x) = (1/n) sum_i f_i(g_i(x)) + r(x)`.
pub fn evaluate_objective(problem: &ProblemInstance, x: &[f64]) -> Result<f64> {
    check_point(problem, x)?;
    let mut acc = 0.0;
    for (i, (f, g)) in problem.outers.iter().zip(&problem.inners).enumerate() {
        let gv = g
            .exact_value(x)
            .ok_or(Error::UnsupportedExactEvaluation { component: i })?;
        acc += f.value(gv);
    }
    Ok(acc / problem.n() as f64 + problem.regularizer.value(x))
}

/// Exact `L(x, y) = (1/n) sum_i [g_i(x) y_i - f_i^*(y_i)] + r(x)`.
pub fn evaluate_saddle(problem: &ProblemInstance, x: &[f64], y: &BlockDualState) -> Result<f64> {
    if y.representation != DualRepresentation::ExplicitDual {
        return Err(Error::RepresentationMismatch);
    }
    if y.blocks.len() != problem.n() {
        return Err(Error::DimensionMismatch {
            expected: problem.n(),
            got: y.blocks.len(),
        });
    }
    check_point(problem, x)?;
    let mut acc = 0.0;
    for (i, (f, g)) in problem.outers.iter().zip(&problem.inners).enumerate() {
        let gv = g
            .exact_value(x)
            .ok_or(Error::UnsupportedExactEvaluation { component: i })?;
        let yi = y.blocks[i];
        acc += gv * yi - f.conjugate(yi);
    }
    Ok(acc / problem.n() as f64 + problem.regularizer.value(x))
}

/// `S` distinct indices from `0..n`, uniformly without replacement.
pub fn sample_outer_batch(rng: &mut dyn RngCore, n: usize, s: usize) -> Result<Vec<usize>> {
    if s < 1 || s > n {
        return Err(Error::InvalidBatchSize {
            size: s,
            population: n,
        });
    }
    if s == n {
        return Ok((0..n).collect());
    }
    Ok(rand::seq::index::sample(rng, n, s).into_vec())
}
