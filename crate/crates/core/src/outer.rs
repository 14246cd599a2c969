//! Outer functions `f_i` with their Fenchel conjugates and dual proximal maps.
//!
//! Every function here is scalar (`m = 1`). The dual update of ALEXR with
//! quadratic distance-generating function is
//!
//! ```text
//! y+ = argmax_{v in Y} { v * g - f^*(v) - (tau/2) (v - y)^2 }
//! ```
//!
//! and each function implements it in closed form in [`OuterFunction::prox_dual`].
//! [`grid_prox_oracle`] is a brute-force reference for the same map.

use std::fmt::Debug;

use crate::problem::Interval;
use crate::{Error, Result};

pub trait OuterFunction: Send + Sync + Debug {
    fn name(&self) -> &'static str;

    fn value(&self, u: f64) -> f64;

    /// An element of the subdifferential; the midpoint at kinks.
    fn subgradient(&self, u: f64) -> f64;

    /// `f^*(y)`; `f64::INFINITY` outside the dual domain.
    fn conjugate(&self, y: f64) -> f64;

    /// Closed interval on which the conjugate is finite.
    fn dual_domain(&self) -> Interval;

    /// Closed-form dual step under `psi = |.|^2 / 2`.
    fn prox_dual(&self, y_prev: f64, g_tilde: f64, tau: f64) -> f64;

    /// `grad f(u)`; errors for kinked functions.
    fn gradient(&self, u: f64) -> Result<f64>;

    /// An element of `d f^*(y)`, when the conjugate is differentiable on the interior.
    fn conjugate_gradient(&self, _y: f64) -> Option<f64> {
        None
    }

    /// Dual step with the Bregman divergence of `f^*` itself:
    /// `argmax_v { v g - f^*(v) - tau * U_{f^*}(v, y_prev) }`.
    fn prox_dual_bregman(&self, _y_prev: f64, _g_tilde: f64, _tau: f64) -> Option<f64> {
        None
    }

    /// Lipschitz constant `C_f`.
    fn lipschitz(&self) -> f64;

    /// Smoothness constant `L_f`, `None` for kinked functions.
    fn smoothness(&self) -> Option<f64>;

    fn is_monotone_nondecreasing(&self) -> bool;

    fn is_legendre(&self) -> bool;

    fn is_smooth(&self) -> bool {
        self.smoothness().is_some()
    }
}

/// Thin alias of [`OuterFunction::prox_dual`].
pub fn prox_dual_quadratic(f: &dyn OuterFunction, y_prev: f64, g_tilde: f64, tau: f64) -> f64 {
    f.prox_dual(y_prev, g_tilde, tau)
}

/// `grad f(u)`: the dual iterate when the dual table is kept as a u-sequence.
pub fn primal_map(f: &dyn OuterFunction, u: f64) -> Result<f64> {
    f.gradient(u)
}

/// Brute-force maximizer of `v g - f^*(v) - (tau/2)(v - y_prev)^2` over a
/// uniform grid of the dual domain intersected with `window`.
///
/// Unbounded dual domains need a bounded `window`.
pub fn grid_prox_oracle(
    f: &dyn OuterFunction,
    y_prev: f64,
    g_tilde: f64,
    tau: f64,
    grid_size: usize,
    window: Option<Interval>,
) -> Result<f64> {
    if grid_size < 100 {
        return Err(Error::InvalidParameters(format!(
            "grid_size must be at least 100, got {grid_size}"
        )));
    }
    let dom = f.dual_domain();
    let range = match window {
        Some(w) => dom.intersect(&w).ok_or_else(|| {
            Error::InvalidParameters("search window misses the dual domain".into())
        })?,
        None => dom,
    };
    if !range.is_bounded() {
        return Err(Error::Unsupported(format!(
            "grid search over the unbounded dual domain of `{}`",
            f.name()
        )));
    }
    if range.width() == 0.0 {
        return Ok(range.lo);
    }
    let h = range.width() / (grid_size - 1) as f64;
    let mut best = (f64::NEG_INFINITY, range.lo);
    for k in 0..grid_size {
        let v = if k + 1 == grid_size {
            range.hi
        } else {
            range.lo + k as f64 * h
        };
        let obj = v * g_tilde - f.conjugate(v) - 0.5 * tau * (v - y_prev) * (v - y_prev);
        if obj > best.0 {
            best = (obj, v);
        }
    }
    Ok(best.1)
}

fn positive_part_subgradient(u: f64, cap: f64) -> f64 {
    if u > 0.0 {
        cap
    } else if u < 0.0 {
        0.0
    } else {
        0.5 * cap
    }
}

/// `f(u) = (1/alpha) * max(u, 0)`: the CVaR outer function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledPositivePart {
    alpha: f64,
}

impl ScaledPositivePart {
    /// Any `alpha > 0` is accepted; CVaR uses `alpha in (0, 1)`.
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(ScaledPositivePart { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn cap(&self) -> f64 {
        1.0 / self.alpha
    }
}

impl OuterFunction for ScaledPositivePart {
    fn name(&self) -> &'static str {
        "scaled_positive_part"
    }
    fn value(&self, u: f64) -> f64 {
        u.max(0.0) / self.alpha
    }
    fn subgradient(&self, u: f64) -> f64 {
        positive_part_subgradient(u, self.cap())
    }
    fn conjugate(&self, y: f64) -> f64 {
        if self.dual_domain().contains(y) {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn dual_domain(&self) -> Interval {
        Interval {
            lo: 0.0,
            hi: self.cap(),
        }
    }
    fn prox_dual(&self, y_prev: f64, g_tilde: f64, tau: f64) -> f64 {
        self.dual_domain().clamp(y_prev + g_tilde / tau)
    }
    fn gradient(&self, _u: f64) -> Result<f64> {
        Err(Error::NotSmooth(self.name()))
    }
    fn lipschitz(&self) -> f64 {
        self.cap()
    }
    fn smoothness(&self) -> Option<f64> {
        None
    }
    fn is_monotone_nondecreasing(&self) -> bool {
        true
    }
    fn is_legendre(&self) -> bool {
        false
    }
}

/// `f(u) = max(u, 0)`: the pAUC outer function.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PositivePart;

impl OuterFunction for PositivePart {
    fn name(&self) -> &'static str {
        "positive_part"
    }
    fn value(&self, u: f64) -> f64 {
        u.max(0.0)
    }
    fn subgradient(&self, u: f64) -> f64 {
        positive_part_subgradient(u, 1.0)
    }
    fn conjugate(&self, y: f64) -> f64 {
        if (0.0..=1.0).contains(&y) {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn dual_domain(&self) -> Interval {
        Interval { lo: 0.0, hi: 1.0 }
    }
    fn prox_dual(&self, y_prev: f64, g_tilde: f64, tau: f64) -> f64 {
        (y_prev + g_tilde / tau).clamp(0.0, 1.0)
    }
    fn gradient(&self, _u: f64) -> Result<f64> {
        Err(Error::NotSmooth(self.name()))
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
    fn smoothness(&self) -> Option<f64> {
        None
    }
    fn is_monotone_nondecreasing(&self) -> bool {
        true
    }
    fn is_legendre(&self) -> bool {
        false
    }
}

/// `f(u) = lambda * ((u + 2)_+^2 / 4 - 1)`, the chi-square GDRO outer, with
/// its dual domain truncated to `[0, C_f]`.
///
/// The conjugate is `(y - lambda)^2 / lambda` on `[0, C_f]`. Truncating the
/// dual domain turns `f` into its Huber-like envelope: it agrees with the
/// quadratic on `u <= 2 C_f / lambda - 2` and continues linearly with slope
/// `C_f` beyond. [`OuterFunction::value`] returns that envelope so value and
/// conjugate stay a Fenchel pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareOuter {
    lambda: f64,
    c_f: f64,
}

impl ChiSquareOuter {
    pub fn new(lambda: f64, c_f: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if !(c_f > 0.0 && c_f.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "C_f must be positive, got {c_f}"
            )));
        }
        Ok(ChiSquareOuter { lambda, c_f })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Where the quadratic piece reaches slope `C_f`.
    fn knee(&self) -> f64 {
        2.0 * self.c_f / self.lambda - 2.0
    }

    fn quadratic(&self, u: f64) -> f64 {
        let s = (u + 2.0).max(0.0);
        self.lambda * (0.25 * s * s - 1.0)
    }
}

impl OuterFunction for ChiSquareOuter {
    fn name(&self) -> &'static str {
        "chi_square"
    }
    fn value(&self, u: f64) -> f64 {
        let knee = self.knee();
        if u <= knee {
            self.quadratic(u)
        } else {
            self.quadratic(knee) + self.c_f * (u - knee)
        }
    }
    fn subgradient(&self, u: f64) -> f64 {
        (0.5 * self.lambda * (u + 2.0).max(0.0)).min(self.c_f)
    }
    fn conjugate(&self, y: f64) -> f64 {
        if self.dual_domain().contains(y) {
            (y - self.lambda).powi(2) / self.lambda
        } else {
            f64::INFINITY
        }
    }
    fn dual_domain(&self) -> Interval {
        Interval {
            lo: 0.0,
            hi: self.c_f,
        }
    }
    fn prox_dual(&self, y_prev: f64, g_tilde: f64, tau: f64) -> f64 {
        // Stationarity of v g - (v - lambda)^2 / lambda - (tau/2)(v - y)^2.
        let v = (g_tilde + 2.0 + tau * y_prev) / (2.0 / self.lambda + tau);
        self.dual_domain().clamp(v)
    }
    fn gradient(&self, u: f64) -> Result<f64> {
        Ok(self.subgradient(u))
    }
    fn conjugate_gradient(&self, y: f64) -> Option<f64> {
        self.dual_domain()
            .contains(y)
            .then(|| 2.0 * y / self.lambda - 2.0)
    }
    fn prox_dual_bregman(&self, y_prev: f64, g_tilde: f64, tau: f64) -> Option<f64> {
        // (1 + tau) (f^*)'(v) = g + tau (f^*)'(y_prev), with (f^*)'(v) = 2v/lambda - 2.
        let slope = (g_tilde + tau * (2.0 * y_prev / self.lambda - 2.0)) / (1.0 + tau);
        Some(self.dual_domain().clamp(0.5 * self.lambda * (slope + 2.0)))
    }
    fn lipschitz(&self) -> f64 {
        self.c_f
    }
    fn smoothness(&self) -> Option<f64> {
        Some(0.5 * self.lambda)
    }
    fn is_monotone_nondecreasing(&self) -> bool {
        true
    }
    fn is_legendre(&self) -> bool {
        false
    }
}

/// Three-branch Huber-type function with parameter `nu < 1`:
///
/// ```text
/// f(u) = (nu - 1) u + (nu - 1)^2 / 2 + nu - 1 - nu^2 / 2    u < -1
///        (u + nu)^2 / 2 - nu^2 / 2                          -1 <= u <= 1
///        (1 + nu) u + (1 + nu)^2 / 2 - 1 - nu - nu^2 / 2    u > 1
/// ```
///
/// with `f^*(y) = (y - nu)^2 / 2` on `[nu - 1, nu + 1]`. Not monotone, so it
/// only composes with affine inner functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberHard {
    nu: f64,
}

impl HuberHard {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu.abs() < 1.0) {
            return Err(Error::InvalidParameters(format!(
                "nu must satisfy |nu| < 1, got {nu}"
            )));
        }
        Ok(HuberHard { nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

impl OuterFunction for HuberHard {
    fn name(&self) -> &'static str {
        "huber_hard"
    }
    fn value(&self, u: f64) -> f64 {
        let nu = self.nu;
        if u < -1.0 {
            (nu - 1.0) * u + 0.5 * (nu - 1.0).powi(2) + nu - 1.0 - 0.5 * nu * nu
        } else if u > 1.0 {
            (1.0 + nu) * u + 0.5 * (1.0 + nu).powi(2) - 1.0 - nu - 0.5 * nu * nu
        } else {
            0.5 * (u + nu).powi(2) - 0.5 * nu * nu
        }
    }
    fn subgradient(&self, u: f64) -> f64 {
        self.dual_domain().clamp(u + self.nu)
    }
    fn conjugate(&self, y: f64) -> f64 {
        if self.dual_domain().contains(y) {
            0.5 * (y - self.nu).powi(2)
        } else {
            f64::INFINITY
        }
    }
    fn dual_domain(&self) -> Interval {
        Interval {
            lo: self.nu - 1.0,
            hi: self.nu + 1.0,
        }
    }
    fn prox_dual(&self, y_prev: f64, g_tilde: f64, tau: f64) -> f64 {
        self.dual_domain()
            .clamp((g_tilde + self.nu + tau * y_prev) / (1.0 + tau))
    }
    fn gradient(&self, u: f64) -> Result<f64> {
        Ok(self.subgradient(u))
    }
    fn conjugate_gradient(&self, y: f64) -> Option<f64> {
        self.dual_domain().contains(y).then(|| y - self.nu)
    }
    fn prox_dual_bregman(&self, y_prev: f64, g_tilde: f64, tau: f64) -> Option<f64> {
        // f^* has unit curvature, so U_{f^*} is the squared distance.
        Some(self.prox_dual(y_prev, g_tilde, tau))
    }
    fn lipschitz(&self) -> f64 {
        1.0 + self.nu.abs()
    }
    fn smoothness(&self) -> Option<f64> {
        Some(1.0)
    }
    fn is_monotone_nondecreasing(&self) -> bool {
        false
    }
    fn is_legendre(&self) -> bool {
        false
    }
}

/// `f(u) = beta * max(u, -nu) = max_{y in [0, beta]} { y u - nu (beta - y) }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeHard {
    beta: f64,
    nu: f64,
}

impl HingeHard {
    pub fn new(beta: f64, nu: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) || !nu.is_finite() {
            return Err(Error::InvalidParameters(format!(
                "need beta > 0 and finite nu, got beta = {beta}, nu = {nu}"
            )));
        }
        Ok(HingeHard { beta, nu })
    }
}

impl OuterFunction for HingeHard {
    fn name(&self) -> &'static str {
        "hinge_hard"
    }
    fn value(&self, u: f64) -> f64 {
        self.beta * u.max(-self.nu)
    }
    fn subgradient(&self, u: f64) -> f64 {
        positive_part_subgradient(u + self.nu, self.beta)
    }
    fn conjugate(&self, y: f64) -> f64 {
        if self.dual_domain().contains(y) {
            self.nu * (self.beta - y)
        } else {
            f64::INFINITY
        }
    }
    fn dual_domain(&self) -> Interval {
        Interval {
            lo: 0.0,
            hi: self.beta,
        }
    }
    fn prox_dual(&self, y_prev: f64, g_tilde: f64, tau: f64) -> f64 {
        self.dual_domain().clamp(y_prev + (g_tilde + self.nu) / tau)
    }
    fn gradient(&self, _u: f64) -> Result<f64> {
        Err(Error::NotSmooth(self.name()))
    }
    fn lipschitz(&self) -> f64 {
        self.beta
    }
    fn smoothness(&self) -> Option<f64> {
        None
    }
    fn is_monotone_nondecreasing(&self) -> bool {
        true
    }
    fn is_legendre(&self) -> bool {
        false
    }
}

/// `f(u) = u`; dual domain `{1}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Identity;

impl OuterFunction for Identity {
    fn name(&self) -> &'static str {
        "identity"
    }
    fn value(&self, u: f64) -> f64 {
        u
    }
    fn subgradient(&self, _u: f64) -> f64 {
        1.0
    }
    fn conjugate(&self, y: f64) -> f64 {
        if y == 1.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn dual_domain(&self) -> Interval {
        Interval::point(1.0)
    }
    fn prox_dual(&self, _y_prev: f64, _g_tilde: f64, _tau: f64) -> f64 {
        1.0
    }
    fn gradient(&self, _u: f64) -> Result<f64> {
        Ok(1.0)
    }
    fn prox_dual_bregman(&self, _y_prev: f64, _g_tilde: f64, _tau: f64) -> Option<f64> {
        Some(1.0)
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
    fn smoothness(&self) -> Option<f64> {
        Some(0.0)
    }
    fn is_monotone_nondecreasing(&self) -> bool {
        true
    }
    fn is_legendre(&self) -> bool {
        false
    }
}

/// `f(u) = (u + c)^2 / 2`, Legendre type; `f^*(y) = y^2 / 2 - c y` on the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSquareShift {
    c: f64,
}

impl HalfSquareShift {
    pub fn new(c: f64) -> Self {
        HalfSquareShift { c }
    }
}

impl OuterFunction for HalfSquareShift {
    fn name(&self) -> &'static str {
        "half_square_shift"
    }
    fn value(&self, u: f64) -> f64 {
        0.5 * (u + self.c).powi(2)
    }
    fn subgradient(&self, u: f64) -> f64 {
        u + self.c
    }
    fn conjugate(&self, y: f64) -> f64 {
        0.5 * y * y - self.c * y
    }
    fn dual_domain(&self) -> Interval {
        Interval::REAL_LINE
    }
    fn prox_dual(&self, y_prev: f64, g_tilde: f64, tau: f64) -> f64 {
        (g_tilde + self.c + tau * y_prev) / (1.0 + tau)
    }
    fn gradient(&self, u: f64) -> Result<f64> {
        Ok(u + self.c)
    }
    fn conjugate_gradient(&self, y: f64) -> Option<f64> {
        Some(y - self.c)
    }
    fn prox_dual_bregman(&self, y_prev: f64, g_tilde: f64, tau: f64) -> Option<f64> {
        // U_{f^*}(v, y) = (v - y)^2 / 2; stationarity: g - (v - c) - tau (v - y) = 0.
        Some((g_tilde + self.c + tau * y_prev) / (1.0 + tau))
    }
    fn lipschitz(&self) -> f64 {
        f64::INFINITY
    }
    fn smoothness(&self) -> Option<f64> {
        Some(1.0)
    }
    fn is_monotone_nondecreasing(&self) -> bool {
        false
    }
    fn is_legendre(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// `max_v (v u - f^*(v))` over a uniform grid of `range`.
    fn grid_sup(f: &dyn OuterFunction, u: f64, range: Interval, k: usize) -> f64 {
        (0..k)
            .map(|j| range.lo + range.width() * j as f64 / (k - 1) as f64)
            .map(|v| v * u - f.conjugate(v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn values() {
        let f = ScaledPositivePart::new(0.5).unwrap();
        assert_eq!(f.value(-1.0), 0.0);
        assert_eq!(f.value(1.0), 2.0);
        let chi = ChiSquareOuter::new(1.0, 10.0).unwrap();
        assert_abs_diff_eq!(chi.value(0.0), 0.0, epsilon = 1e-15);
        let h = HuberHard::new(0.3).unwrap();
        assert_abs_diff_eq!(h.value(0.0), 0.0, epsilon = 1e-15);
        // branches meet continuously
        for u in [-1.0, 1.0] {
            assert_abs_diff_eq!(h.value(u - 1e-9), h.value(u + 1e-9), epsilon = 1e-8);
        }
    }

    #[test]
    fn subgradients() {
        assert_eq!(PositivePart.subgradient(5.0), 1.0);
        assert_eq!(PositivePart.subgradient(0.0), 0.5);
        assert_eq!(PositivePart.subgradient(-2.0), 0.0);
        let h = HuberHard::new(0.3).unwrap();
        assert_abs_diff_eq!(h.subgradient(0.5), 0.8, epsilon = 1e-15);
        let hinge = HingeHard::new(2.0, 0.5).unwrap();
        assert_eq!(hinge.subgradient(-0.5), 1.0);
    }

    #[test]
    fn conjugates() {
        let f = ScaledPositivePart::new(0.5).unwrap();
        assert_eq!(f.conjugate(1.5), 0.0);
        assert_eq!(f.conjugate(2.5), f64::INFINITY);
        assert_abs_diff_eq!(
            grid_sup(&f, 0.7, Interval { lo: 0.0, hi: 2.0 }, 10_001),
            f.value(0.7),
            epsilon = 1e-12
        );

        let h = HuberHard::new(0.3).unwrap();
        assert_eq!(h.conjugate(0.3), 0.0);

        let hinge = HingeHard::new(1.0, 0.2).unwrap();
        assert_abs_diff_eq!(hinge.conjugate(0.0), 0.2, epsilon = 1e-15);
        // sup_u { 0 * u - f(u) } over u in [-2 nu, 2 nu] is -min f = beta nu.
        let sup = (0..=4000)
            .map(|k| -0.4 + 0.8 * k as f64 / 4000.0)
            .map(|u| -hinge.value(u))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(sup, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn dual_domains() {
        let d = ScaledPositivePart::new(0.1).unwrap().dual_domain();
        assert_abs_diff_eq!(d.lo, 0.0);
        assert_abs_diff_eq!(d.hi, 10.0, epsilon = 1e-12);
        let d = HuberHard::new(0.3).unwrap().dual_domain();
        assert_abs_diff_eq!(d.lo, -0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(d.hi, 1.3, epsilon = 1e-15);
        assert_eq!(Identity.dual_domain(), Interval::point(1.0));
    }

    #[test]
    fn chi_square_conjugate_derivation() {
        // Direct conjugation gives lambda (y/lambda - 1)^2, without a factor 1/2.
        let lambda = 1.7;
        let chi = ChiSquareOuter::new(lambda, 50.0).unwrap();
        for y in [0.0, 0.3, 1.0, 2.5, 4.0] {
            let sup = (0..=200_000)
                .map(|k| -6.0 + 16.0 * k as f64 / 200_000.0)
                .map(|u| y * u - chi.quadratic(u))
                .fold(f64::NEG_INFINITY, f64::max);
            assert_abs_diff_eq!(chi.conjugate(y), sup, epsilon = 1e-6);
            assert_abs_diff_eq!(chi.conjugate(y), lambda * (y / lambda - 1.0).powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn prox_examples() {
        let f = ScaledPositivePart::new(0.5).unwrap();
        assert_abs_diff_eq!(prox_dual_quadratic(&f, 0.2, 0.5, 2.0), 0.45, epsilon = 1e-15);
        assert_eq!(prox_dual_quadratic(&f, 0.0, 0.0, 1.0), 0.0);
        let grid = grid_prox_oracle(&f, 0.2, 0.5, 2.0, 10_000, None).unwrap();
        assert!((grid - 0.45).abs() <= 2.0 / 10_000.0);

        assert_eq!(PositivePart.prox_dual(0.0, -1.0, 1.0), 0.0);
        let hinge = HingeHard::new(1.0, 0.2).unwrap();
        assert_abs_diff_eq!(hinge.prox_dual(0.5, 0.0, 1e6), 0.5, epsilon = 1e-6);
        assert_eq!(grid_prox_oracle(&Identity, 0.3, 2.0, 1.0, 100, None).unwrap(), 1.0);
        assert!(grid_prox_oracle(&Identity, 0.3, 2.0, 1.0, 99, None).is_err());
        assert!(grid_prox_oracle(&HalfSquareShift::new(0.0), 0.0, 0.0, 1.0, 100, None).is_err());
    }

    #[test]
    fn chi_square_prox_against_grid() {
        let chi = ChiSquareOuter::new(1.0, 3.0).unwrap();
        let closed = chi.prox_dual(1.0, 0.0, 1.0);
        let grid = grid_prox_oracle(&chi, 1.0, 0.0, 1.0, 10_000, None).unwrap();
        assert!((closed - grid).abs() <= 1e-3, "{closed} vs {grid}");
        // (0 + 2 + 1) / (2 + 1)
        assert_abs_diff_eq!(closed, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn primal_maps() {
        assert_eq!(primal_map(&HalfSquareShift::new(0.0), 3.0).unwrap(), 3.0);
        assert_abs_diff_eq!(primal_map(&HuberHard::new(0.3).unwrap(), 0.5).unwrap(), 0.8, epsilon = 1e-15);
        let chi = ChiSquareOuter::new(2.0, 10.0).unwrap();
        assert_abs_diff_eq!(primal_map(&chi, 0.0).unwrap(), 2.0, epsilon = 1e-15);
        assert!(matches!(primal_map(&PositivePart, 1.0), Err(Error::NotSmooth(_))));
        assert!(matches!(
            primal_map(&HingeHard::new(1.0, 0.1).unwrap(), 1.0),
            Err(Error::NotSmooth(_))
        ));
    }

    #[test]
    fn conjugate_gradient_inverts_primal_map() {
        let hs = HalfSquareShift::new(0.7);
        let h = HuberHard::new(0.3).unwrap();
        for k in 0..=200 {
            let u = -1.0 + 2.0 * k as f64 / 200.0;
            let y = hs.gradient(u).unwrap();
            assert!((hs.conjugate_gradient(y).unwrap() - u).abs() <= 1e-8);
            let y = h.gradient(u).unwrap();
            assert!((h.conjugate_gradient(y).unwrap() - u).abs() <= 1e-8);
        }
    }

    #[test]
    fn bregman_prox_against_grid() {
        // argmax_v { v g - f^*(v) - tau (f^*(v) - f^*(y) - (f^*)'(y)(v - y)) } by grid search
        let chi = ChiSquareOuter::new(1.5, 4.0).unwrap();
        for &(y, g, tau) in &[(0.5, 0.3, 2.0), (2.0, -1.0, 0.5), (3.5, 2.0, 4.0)] {
            let cg = chi.conjugate_gradient(y).unwrap();
            let obj = |v: f64| {
                v * g - chi.conjugate(v) - tau * (chi.conjugate(v) - chi.conjugate(y) - cg * (v - y))
            };
            let best = (0..=100_000)
                .map(|k| 4.0 * k as f64 / 100_000.0)
                .fold((f64::NEG_INFINITY, 0.0), |acc, v| {
                    let o = obj(v);
                    if o > acc.0 { (o, v) } else { acc }
                })
                .1;
            let closed = chi.prox_dual_bregman(y, g, tau).unwrap();
            assert!((closed - best).abs() <= 1e-4, "{closed} vs {best}");
        }
    }

    fn shipped() -> Vec<Box<dyn OuterFunction>> {
        vec![
            Box::new(ScaledPositivePart::new(0.25).unwrap()),
            Box::new(PositivePart),
            Box::new(ChiSquareOuter::new(0.8, 2.5).unwrap()),
            Box::new(HuberHard::new(0.3).unwrap()),
            Box::new(HingeHard::new(1.5, 0.2).unwrap()),
            Box::new(Identity),
            Box::new(HalfSquareShift::new(-0.4)),
        ]
    }

    #[test]
    fn young_fenchel_on_grid() {
        for f in shipped() {
            let dom = f.dual_domain().intersect(&Interval { lo: -5.0, hi: 5.0 }).unwrap();
            for iu in 0..=60 {
                let u = -3.0 + 6.0 * iu as f64 / 60.0;
                for iy in 0..=40 {
                    let y = dom.lo + dom.width() * iy as f64 / 40.0;
                    assert!(
                        f.value(u) + f.conjugate(y) >= y * u - 1e-9,
                        "{} u={u} y={y}",
                        f.name()
                    );
                }
                let s = f.subgradient(u);
                if dom.contains(s) {
                    assert!(
                        (f.value(u) + f.conjugate(s) - s * u).abs() <= 1e-3,
                        "{} equality at u={u}",
                        f.name()
                    );
                }
            }
        }
    }

    #[test]
    fn monotone_functions_have_nonnegative_subgradients() {
        for f in shipped() {
            if f.is_monotone_nondecreasing() {
                assert!(f.dual_domain().lo >= 0.0);
                assert!(f.dual_domain().hi <= f.lipschitz() + 1e-12);
                for k in 0..=100 {
                    let u = -5.0 + 0.1 * k as f64;
                    assert!(f.subgradient(u) >= 0.0);
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn prox_is_nonexpansive_in_y_prev(
                y1 in -3.0f64..3.0, y2 in -3.0f64..3.0,
                g in -3.0f64..3.0, tau in 0.05f64..20.0,
            ) {
                for f in shipped() {
                    let d = f.dual_domain();
                    let (a, b) = (d.clamp(y1), d.clamp(y2));
                    let (pa, pb) = (f.prox_dual(a, g, tau), f.prox_dual(b, g, tau));
                    prop_assert!((pa - pb).abs() <= (a - b).abs() + 1e-12, "{}", f.name());
                    prop_assert!(d.contains(pa));
                }
            }

            #[test]
            fn values_are_convex_along_chords(
                u in -4.0f64..4.0, v in -4.0f64..4.0, t in 0.0f64..1.0,
            ) {
                for f in shipped() {
                    let mid = f.value(t * u + (1.0 - t) * v);
                    prop_assert!(mid <= t * f.value(u) + (1.0 - t) * f.value(v) + 1e-12, "{}", f.name());
                }
            }
        }
    }
}
