//! Separable instances with two-point noise and a known minimizer.
//!
//! Component `i` only sees coordinate `i`: `g_i(x; zeta) = x_i + zeta` with
//!
//! ```text
//! zeta = -nu               with probability 1 - p
//!        nu (1 - p) / p    with probability p,        p = nu^2 / sigma^2
//! ```
//!
//! so `E zeta = 0` and `Var zeta = sigma^2 (1 - p)`.

use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::outer::{HingeHard, HuberHard, OuterFunction};
use crate::problem::{
    BoxDomain, InnerOracle, ProblemConstants, ProblemInstance, Reference, Regularizer,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardMode {
    Smooth,
    Nonsmooth,
}

#[derive(Debug, Clone)]
pub struct HardInstance {
    pub problem: ProblemInstance,
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub nu: f64,
    pub sigma: f64,
    pub p: f64,
    pub mode: HardMode,
    /// Hinge height, nonsmooth mode only.
    pub beta: Option<f64>,
    pub mu: f64,
}

fn noise_probability(nu: f64, sigma: f64) -> Result<f64> {
    let p = nu * nu / (sigma * sigma);
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameters(format!(
            "p = nu^2 / sigma^2 must lie in (0, 1), got {p}"
        )));
    }
    Ok(p)
}

/// The two atoms `(-nu, nu (1 - p) / p)`.
pub fn hard_noise_support(nu: f64, sigma: f64) -> Result<[f64; 2]> {
    let p = noise_probability(nu, sigma)?;
    Ok([-nu, nu * (1.0 - p) / p])
}

/// One draw of the two-point noise. Panics unless `nu^2 / sigma^2` lies in `(0, 1)`.
pub fn sample_hard_noise(rng: &mut dyn RngCore, nu: f64, sigma: f64) -> f64 {
    let p = noise_probability(nu, sigma).expect("invalid noise parameters");
    if rng.random::<f64>() < p {
        nu * (1.0 - p) / p
    } else {
        -nu
    }
}

/// `g(x; zeta) = x_j + zeta`; batch identifiers index the two atoms.
#[derive(Debug, Clone)]
pub struct NoisyCoordinate {
    dim: usize,
    coord: usize,
    p: f64,
    atoms: [f64; 2],
}

impl NoisyCoordinate {
    pub fn new(dim: usize, coord: usize, nu: f64, sigma: f64) -> Result<Self> {
        Ok(NoisyCoordinate {
            dim,
            coord,
            p: noise_probability(nu, sigma)?,
            atoms: hard_noise_support(nu, sigma)?,
        })
    }
}

impl InnerOracle for NoisyCoordinate {
    fn dim(&self) -> usize {
        self.dim
    }

    fn exact_value(&self, x: &[f64]) -> Option<f64> {
        Some(x[self.coord])
    }

    fn sample_batch(&self, rng: &mut dyn RngCore, size: usize, out: &mut Vec<usize>) {
        out.clear();
        out.extend((0..size).map(|_| usize::from(rng.random::<f64>() < self.p)));
    }

    fn value(&self, x: &[f64], batch: &[usize]) -> f64 {
        let noise: f64 = batch.iter().map(|&z| self.atoms[z]).sum();
        x[self.coord] + noise / batch.len() as f64
    }

    fn add_jtvp(&self, _x: &[f64], _batch: &[usize], scale: f64, out: &mut [f64]) {
        out[self.coord] += scale;
    }

    fn is_affine(&self) -> bool {
        true
    }

    fn is_smooth(&self) -> bool {
        true
    }
}

fn noisy_inners(n: usize, nu: f64, sigma: f64) -> Result<Vec<Arc<dyn InnerOracle>>> {
    (0..n)
        .map(|j| Ok(Arc::new(NoisyCoordinate::new(n, j, nu, sigma)?) as Arc<dyn InnerOracle>))
        .collect()
}

/// Huber-type outers, `r(x) = ||x||^2 / (4n)`, `X = [-1, 1]^n`.
///
/// Per coordinate `F_i(x) = f(x) + x^2 / 4`, minimized at `-2 nu / 3` with value `-nu^2 / 3`.
pub fn build_hard_smooth(n: usize, nu: f64, sigma: f64) -> Result<HardInstance> {
    if n == 0 || !(nu > 0.0 && nu < 1.0) {
        return Err(Error::InvalidParameters(format!(
            "need n >= 1 and nu in (0, 1), got n = {n}, nu = {nu}"
        )));
    }
    let p = noise_probability(nu, sigma)?;
    let f: Arc<dyn OuterFunction> = Arc::new(HuberHard::new(nu)?);
    let mu = 1.0 / (2.0 * n as f64);
    let x_star = vec![-2.0 * nu / 3.0; n];
    let f_star = -nu * nu / 3.0;
    let problem = ProblemInstance::new(
        vec![f; n],
        noisy_inners(n, nu, sigma)?,
        Regularizer::ridge(n, mu)?,
        BoxDomain::uniform(n, -1.0, 1.0)?,
    )?
    .with_constants(ProblemConstants {
        c_f: Some(1.0 + nu),
        c_g: Some(1.0),
        l_f: Some(1.0),
        l_g: Some(0.0),
        sigma0_sq: Some(sigma * sigma * (1.0 - p)),
        sigma1_sq: Some(0.0),
        delta_sq: None,
    })
    .with_reference(Reference {
        x_star: x_star.clone(),
        f_star,
    })?;
    Ok(HardInstance {
        problem,
        x_star,
        f_star,
        nu,
        sigma,
        p,
        mode: HardMode::Smooth,
        beta: None,
        mu,
    })
}

/// Hinge outers `beta max(u, -nu)`, `r(x) = (alpha / 2) ||x||^2 / n`, `X = [-2 nu, 2 nu]^n`.
pub fn build_hard_nonsmooth(n: usize, nu: f64, beta: f64, alpha_reg: f64, sigma: f64) -> Result<HardInstance> {
    if n == 0 || !(nu > 0.0 && nu < 1.0) || !(alpha_reg >= 0.0) {
        return Err(Error::InvalidParameters(format!(
            "need n >= 1, nu in (0, 1), alpha >= 0; got n = {n}, nu = {nu}, alpha = {alpha_reg}"
        )));
    }
    let p = noise_probability(nu, sigma)?;
    let f: Arc<dyn OuterFunction> = Arc::new(HingeHard::new(beta, nu)?);
    let mu = alpha_reg / n as f64;
    let xs = if alpha_reg > beta / nu {
        -beta / alpha_reg
    } else {
        -nu
    };
    let x_star = vec![xs; n];
    let f_star = beta * xs.max(-nu) + 0.5 * alpha_reg * xs * xs;
    let problem = ProblemInstance::new(
        vec![f; n],
        noisy_inners(n, nu, sigma)?,
        Regularizer::ridge(n, mu)?,
        BoxDomain::uniform(n, -2.0 * nu, 2.0 * nu)?,
    )?
    .with_constants(ProblemConstants {
        c_f: Some(beta),
        c_g: Some(1.0),
        l_f: None,
        l_g: Some(0.0),
        sigma0_sq: Some(sigma * sigma * (1.0 - p)),
        sigma1_sq: Some(0.0),
        delta_sq: None,
    })
    .with_reference(Reference {
        x_star: x_star.clone(),
        f_star,
    })?;
    Ok(HardInstance {
        problem,
        x_star,
        f_star,
        nu,
        sigma,
        p,
        mode: HardMode::Nonsmooth,
        beta: Some(beta),
        mu,
    })
}
