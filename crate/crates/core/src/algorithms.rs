//! ALEXR and baseline solvers.
//!
//! Every solver keeps its state in a [`SolverState`] and advances it with a
//! step function. Randomness comes from one ChaCha8 stream per run, consumed
//! in a fixed order: the outer batch `S_t` first, then for each sampled
//! component (in batch order) the batch `B` followed by the batch `B~`. All
//! compositional solvers follow the same order, so two solvers seeded alike
//! see the same samples.
//!
//! The dual step of ALEXR under `psi = f^*` is run as the primal-only
//! u-sequence
//!
//! ```text
//! u+ = (tau * u + g~) / (1 + tau),    y+ = grad f(u+)
//! ```
//!
//! which is the form consistent with the SOX moving average at
//! `gamma = 1 / (1 + tau)`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::outer::OuterFunction;
use crate::problem::{
    evaluate_objective, sample_outer_batch, BlockDualState, BoxDomain, DualRepresentation,
    ProblemInstance, Regularizer,
};
use crate::{Error, Result};

/// Distance-generating function of the dual step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiMode {
    /// `psi = |.|^2 / 2`, explicit dual table.
    Quadratic,
    /// `psi = f^*` run as a u-sequence.
    Conjugate,
    /// `psi = f^*` with the Bregman prox solved explicitly on the dual table.
    ConjugateExplicit,
}

/// Which primal point a run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Last,
    /// `(1/T) sum_{t<T} x_t`.
    Uniform,
}

fn default_x0() -> f64 {
    0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlexrConfig {
    pub eta: f64,
    pub tau: f64,
    pub theta: f64,
    pub outer_batch: usize,
    pub inner_batch: usize,
    pub iterations: u64,
    pub psi_mode: PsiMode,
    pub seed: u64,
    pub averaging: Averaging,
    /// Every primal coordinate starts here (then projected onto the box).
    #[serde(default = "default_x0")]
    pub x0: f64,
}

impl AlexrConfig {
    /// Strongly convex preset: `eta = mu theta / (1 - theta)`, `tau = S / (n (1 - theta))`.
    pub fn strongly_convex(
        mu: f64,
        n: usize,
        outer_batch: usize,
        inner_batch: usize,
        theta: f64,
        iterations: u64,
        seed: u64,
    ) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "strongly convex preset needs mu > 0, got {mu}"
            )));
        }
        if !(0.0..1.0).contains(&theta) {
            return Err(Error::InvalidParameters(format!(
                "strongly convex preset needs theta in [0, 1), got {theta}"
            )));
        }
        Ok(AlexrConfig {
            eta: mu * theta / (1.0 - theta),
            tau: outer_batch as f64 / (n as f64 * (1.0 - theta)),
            theta,
            outer_batch,
            inner_batch,
            iterations,
            psi_mode: PsiMode::Quadratic,
            seed,
            averaging: Averaging::Last,
            x0: 0.0,
        })
    }

    /// Convex preset for a target accuracy `eps`: `eta = c_eta / eps`, `tau = c_tau / (B eps)`.
    #[allow(clippy::too_many_arguments)]
    pub fn convex(
        eps: f64,
        c_eta: f64,
        c_tau: f64,
        theta: f64,
        outer_batch: usize,
        inner_batch: usize,
        iterations: u64,
        seed: u64,
    ) -> Result<Self> {
        if !(eps > 0.0 && c_eta > 0.0 && c_tau > 0.0) {
            return Err(Error::InvalidParameters(
                "convex preset needs positive eps, c_eta and c_tau".into(),
            ));
        }
        Ok(AlexrConfig {
            eta: c_eta / eps,
            tau: c_tau / (inner_batch as f64 * eps),
            theta,
            outer_batch,
            inner_batch,
            iterations,
            psi_mode: PsiMode::Quadratic,
            seed,
            averaging: Averaging::Uniform,
            x0: 0.0,
        })
    }

    pub fn validate(&self, problem: &ProblemInstance) -> Result<()> {
        check_batches(problem, self.outer_batch, self.inner_batch)?;
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameters(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameters(format!("tau must be positive, got {}", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidParameters(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        if self.psi_mode != PsiMode::Quadratic {
            for i in 0..problem.n() {
                let f = problem.outer(i);
                if !f.is_smooth() {
                    return Err(Error::NotSmooth(f.name()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineVariant {
    Bsgd,
    Sox,
    Msvr,
    SgdErm,
    SgdUw,
}

impl BaselineVariant {
    pub fn name(self) -> &'static str {
        match self {
            BaselineVariant::Bsgd => "bsgd",
            BaselineVariant::Sox => "sox",
            BaselineVariant::Msvr => "msvr",
            BaselineVariant::SgdErm => "sgd_erm",
            BaselineVariant::SgdUw => "sgd_uw",
        }
    }
}

fn default_gamma() -> f64 {
    1.0
}

fn default_averaging() -> Averaging {
    Averaging::Last
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub variant: BaselineVariant,
    /// Primal step size; the proximal weight is `1 / step`.
    pub step: f64,
    /// Moving-average weight for SOX and MSVR.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub outer_batch: usize,
    pub inner_batch: usize,
    pub iterations: u64,
    pub seed: u64,
    #[serde(default = "default_averaging")]
    pub averaging: Averaging,
    #[serde(default = "default_x0")]
    pub x0: f64,
}

impl BaselineConfig {
    pub fn validate(&self, problem: &ProblemInstance) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameters(format!("step must be positive, got {}", self.step)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameters(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        match self.variant {
            BaselineVariant::SgdErm | BaselineVariant::SgdUw => {
                if problem.samples().is_none() {
                    return Err(Error::Unsupported(format!(
                        "{} needs a per-sample loss view",
                        self.variant.name()
                    )));
                }
                if self.outer_batch == 0 || self.inner_batch == 0 {
                    return Err(Error::InvalidBatchSize {
                        size: self.outer_batch * self.inner_batch,
                        population: problem.samples().map_or(0, |s| s.n_samples()),
                    });
                }
                Ok(())
            }
            BaselineVariant::Msvr => {
                check_batches(problem, self.outer_batch, self.inner_batch)?;
                if self.outer_batch == problem.n() && self.gamma == 1.0 {
                    return Err(Error::InvalidParameters(
                        "msvr needs S < n or gamma < 1".into(),
                    ));
                }
                if self.gamma == 1.0 {
                    return Err(Error::InvalidParameters(
                        "msvr correction factor is undefined at gamma = 1".into(),
                    ));
                }
                Ok(())
            }
            _ => check_batches(problem, self.outer_batch, self.inner_batch),
        }
    }
}

fn check_batches(problem: &ProblemInstance, s: usize, b: usize) -> Result<()> {
    if s < 1 || s > problem.n() {
        return Err(Error::InvalidBatchSize {
            size: s,
            population: problem.n(),
        });
    }
    if b < 1 {
        return Err(Error::InvalidBatchSize {
            size: b,
            population: 0,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverConfig {
    Alexr(AlexrConfig),
    Baseline(BaselineConfig),
}

impl SolverConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SolverConfig::Alexr(_) => "alexr",
            SolverConfig::Baseline(b) => b.variant.name(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            SolverConfig::Alexr(c) => c.seed,
            SolverConfig::Baseline(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            SolverConfig::Alexr(c) => c.seed = seed,
            SolverConfig::Baseline(c) => c.seed = seed,
        }
    }

    pub fn iterations(&self) -> u64 {
        match self {
            SolverConfig::Alexr(c) => c.iterations,
            SolverConfig::Baseline(c) => c.iterations,
        }
    }

    pub fn set_iterations(&mut self, iterations: u64) {
        match self {
            SolverConfig::Alexr(c) => c.iterations = iterations,
            SolverConfig::Baseline(c) => c.iterations = iterations,
        }
    }

    pub fn averaging(&self) -> Averaging {
        match self {
            SolverConfig::Alexr(c) => c.averaging,
            SolverConfig::Baseline(c) => c.averaging,
        }
    }

    pub fn validate(&self, problem: &ProblemInstance) -> Result<()> {
        match self {
            SolverConfig::Alexr(c) => c.validate(problem),
            SolverConfig::Baseline(c) => c.validate(problem),
        }
    }

    /// Inner samples consumed per iteration.
    pub fn oracle_per_step(&self) -> u64 {
        match self {
            SolverConfig::Alexr(c) => 2 * (c.outer_batch * c.inner_batch) as u64,
            SolverConfig::Baseline(c) => match c.variant {
                BaselineVariant::SgdErm | BaselineVariant::SgdUw => {
                    (c.outer_batch * c.inner_batch) as u64
                }
                _ => 2 * (c.outer_batch * c.inner_batch) as u64,
            },
        }
    }
}

/// Iterates, dual table and random stream of one run.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub dual: BlockDualState,
    pub t: u64,
    pub oracle_count: u64,
    x_sum: Vec<f64>,
    rng: ChaCha8Rng,
    grad: Vec<f64>,
    batch: Vec<usize>,
    batch_tilde: Vec<usize>,
}

/// Starting dual value: 0 when feasible, else the lower end of the domain.
pub fn initial_dual(f: &dyn OuterFunction) -> f64 {
    let dom = f.dual_domain();
    if dom.contains(0.0) {
        0.0
    } else {
        dom.lo
    }
}

/// Starting u-value: a preimage of the initial dual under `grad f` if one is
/// available, else 0.
pub fn initial_u(f: &dyn OuterFunction) -> f64 {
    f.conjugate_gradient(initial_dual(f)).unwrap_or(0.0)
}

impl SolverState {
    pub fn new(problem: &ProblemInstance, x0: f64, representation: DualRepresentation, seed: u64) -> Self {
        let d = problem.dim();
        let mut x = vec![x0; d];
        problem.domain().project_in_place(&mut x);
        let blocks = (0..problem.n())
            .map(|i| match representation {
                DualRepresentation::ExplicitDual => initial_dual(problem.outer(i)),
                DualRepresentation::USequence => initial_u(problem.outer(i)),
            })
            .collect();
        SolverState {
            x_prev: x.clone(),
            x,
            dual: BlockDualState {
                blocks,
                representation,
            },
            t: 0,
            oracle_count: 0,
            x_sum: vec![0.0; d],
            rng: ChaCha8Rng::seed_from_u64(seed),
            grad: vec![0.0; d],
            batch: Vec::new(),
            batch_tilde: Vec::new(),
        }
    }

    /// Last iterate or `(1/t) sum_{s<t} x_s`; `x_0` before the first step.
    pub fn output(&self, averaging: Averaging) -> Vec<f64> {
        match averaging {
            Averaging::Last => self.x.clone(),
            Averaging::Uniform if self.t == 0 => self.x.clone(),
            Averaging::Uniform => {
                let inv = 1.0 / self.t as f64;
                self.x_sum.iter().map(|v| v * inv).collect()
            }
        }
    }

    /// Dual iterate `y` per block; maps u-sequences through `grad f`.
    pub fn dual_values(&self, problem: &ProblemInstance) -> Result<Vec<f64>> {
        match self.dual.representation {
            DualRepresentation::ExplicitDual => Ok(self.dual.blocks.clone()),
            DualRepresentation::USequence => self
                .dual
                .blocks
                .iter()
                .enumerate()
                .map(|(i, &u)| problem.outer(i).subgradient(u))
                .map(Ok)
                .collect(),
        }
    }

    fn begin(&mut self) {
        for (s, v) in self.x_sum.iter_mut().zip(&self.x) {
            *s += v;
        }
        self.grad.fill(0.0);
    }

    /// `x_prev <- x`, `x <- prox(x_prev, grad)`.
    fn finish(&mut self, problem: &ProblemInstance, eta: f64, include_linear: bool, samples: u64) {
        std::mem::swap(&mut self.x, &mut self.x_prev);
        problem.regularizer().prox_step(
            &self.x_prev,
            &self.grad,
            eta,
            problem.domain(),
            include_linear,
            &mut self.x,
        );
        self.t += 1;
        self.oracle_count += samples;
    }
}

pub fn dual_update_quadratic(f: &dyn OuterFunction, y: f64, g_tilde: f64, tau: f64) -> f64 {
    f.prox_dual(y, g_tilde, tau)
}

/// `u' = (tau u + g~) / (1 + tau)` and `y' = grad f(u')`.
pub fn dual_update_conjugate(f: &dyn OuterFunction, u: f64, g_tilde: f64, tau: f64) -> Result<(f64, f64)> {
    let u_next = (tau * u + g_tilde) / (1.0 + tau);
    Ok((u_next, f.gradient(u_next)?))
}

/// `argmin_{x in X} <G, x> + r(x) + (eta/2) ||x - x_t||^2`.
pub fn primal_prox_step(
    x_t: &[f64],
    grad: &[f64],
    eta: f64,
    reg: &Regularizer,
    domain: &BoxDomain,
) -> Vec<f64> {
    let mut out = vec![0.0; x_t.len()];
    reg.prox_step(x_t, grad, eta, domain, true, &mut out);
    out
}

/// Correction factor of the MSVR estimator.
pub fn msvr_beta(n: usize, s: usize, gamma: f64) -> f64 {
    (n - s) as f64 / (s as f64 * (1.0 - gamma)) + 1.0 - gamma
}

/// Per-sample weights of the up-weighted empirical risk: every group gets
/// equal total mass, so a sample in group `g` weighs `1 / (G n_g)`.
pub fn upweighting_weights(group_sizes: &[usize]) -> Result<Vec<f64>> {
    let groups = group_sizes.len() as f64;
    group_sizes
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            if n == 0 {
                Err(Error::EmptyGroup(g))
            } else {
                Ok(1.0 / (groups * n as f64))
            }
        })
        .collect()
}

pub fn alexr_step(state: &mut SolverState, cfg: &AlexrConfig, problem: &ProblemInstance) -> Result<()> {
    state.begin();
    let outer = sample_outer_batch(&mut state.rng, problem.n(), cfg.outer_batch)?;
    let inv_s = 1.0 / cfg.outer_batch as f64;
    for &i in &outer {
        let f = problem.outer(i);
        let g = problem.inner(i);
        g.sample_batch(&mut state.rng, cfg.inner_batch, &mut state.batch);
        g.sample_batch(&mut state.rng, cfg.inner_batch, &mut state.batch_tilde);
        let gx = g.value(&state.x, &state.batch);
        let g_tilde = if cfg.theta == 0.0 {
            gx
        } else {
            gx + cfg.theta * (gx - g.value(&state.x_prev, &state.batch))
        };
        let block = &mut state.dual.blocks[i];
        let y_next = match cfg.psi_mode {
            PsiMode::Quadratic => {
                *block = dual_update_quadratic(f, *block, g_tilde, cfg.tau);
                *block
            }
            PsiMode::Conjugate => {
                let (u, y) = dual_update_conjugate(f, *block, g_tilde, cfg.tau)?;
                *block = u;
                y
            }
            PsiMode::ConjugateExplicit => {
                *block = f
                    .prox_dual_bregman(*block, g_tilde, cfg.tau)
                    .ok_or(Error::NotSmooth(f.name()))?;
                *block
            }
        };
        g.add_jtvp(&state.x, &state.batch_tilde, y_next * inv_s, &mut state.grad);
    }
    let samples = 2 * (cfg.outer_batch * cfg.inner_batch) as u64;
    state.finish(problem, cfg.eta, true, samples);
    Ok(())
}

/// Shared body of SOX and MSVR: `u' = (1 - gamma) u + gamma g(x; B) + corr (g(x; B) - g(x_prev; B))`.
fn tracking_step(
    state: &mut SolverState,
    cfg: &BaselineConfig,
    problem: &ProblemInstance,
    correction: f64,
) -> Result<()> {
    state.begin();
    let outer = sample_outer_batch(&mut state.rng, problem.n(), cfg.outer_batch)?;
    let inv_s = 1.0 / cfg.outer_batch as f64;
    for &i in &outer {
        let f = problem.outer(i);
        let g = problem.inner(i);
        g.sample_batch(&mut state.rng, cfg.inner_batch, &mut state.batch);
        g.sample_batch(&mut state.rng, cfg.inner_batch, &mut state.batch_tilde);
        let gx = g.value(&state.x, &state.batch);
        let u = &mut state.dual.blocks[i];
        *u = (1.0 - cfg.gamma) * *u + cfg.gamma * gx;
        if correction != 0.0 {
            *u += correction * (gx - g.value(&state.x_prev, &state.batch));
        }
        let y = f.subgradient(*u);
        g.add_jtvp(&state.x, &state.batch_tilde, y * inv_s, &mut state.grad);
    }
    let samples = 2 * (cfg.outer_batch * cfg.inner_batch) as u64;
    state.finish(problem, 1.0 / cfg.step, true, samples);
    Ok(())
}

/// Moving-average tracking of `g_i` without gradient momentum.
pub fn sox_step(state: &mut SolverState, cfg: &BaselineConfig, problem: &ProblemInstance) -> Result<()> {
    tracking_step(state, cfg, problem, 0.0)
}

/// SOX tracking plus the variance-reduction correction scaled by [`msvr_beta`].
pub fn msvr_step(state: &mut SolverState, cfg: &BaselineConfig, problem: &ProblemInstance) -> Result<()> {
    let beta = msvr_beta(problem.n(), cfg.outer_batch, cfg.gamma);
    tracking_step(state, cfg, problem, beta)
}

/// Plug-in estimator `[g_i'(x; B~)]^T f_i'(g_i(x; B))`.
pub fn bsgd_step(state: &mut SolverState, cfg: &BaselineConfig, problem: &ProblemInstance) -> Result<()> {
    state.begin();
    let outer = sample_outer_batch(&mut state.rng, problem.n(), cfg.outer_batch)?;
    let inv_s = 1.0 / cfg.outer_batch as f64;
    for &i in &outer {
        let f = problem.outer(i);
        let g = problem.inner(i);
        g.sample_batch(&mut state.rng, cfg.inner_batch, &mut state.batch);
        g.sample_batch(&mut state.rng, cfg.inner_batch, &mut state.batch_tilde);
        let y = f.subgradient(g.value(&state.x, &state.batch));
        state.dual.blocks[i] = y;
        g.add_jtvp(&state.x, &state.batch_tilde, y * inv_s, &mut state.grad);
    }
    let samples = 2 * (cfg.outer_batch * cfg.inner_batch) as u64;
    state.finish(problem, 1.0 / cfg.step, true, samples);
    Ok(())
}

/// Stochastic gradient step on the flat empirical risk, unweighted (ERM) or
/// with every group carrying equal mass (UW). Draws `S * B` samples.
pub fn sgd_step(state: &mut SolverState, cfg: &BaselineConfig, problem: &ProblemInstance) -> Result<()> {
    let view = problem
        .samples()
        .ok_or_else(|| Error::Unsupported("sgd needs a per-sample loss view".into()))?;
    state.begin();
    let draws = cfg.outer_batch * cfg.inner_batch;
    let scale = 1.0 / draws as f64;
    for _ in 0..draws {
        let sample = match cfg.variant {
            BaselineVariant::SgdUw => {
                // Uniform group, then uniform member: sample weight 1 / (G n_g).
                let groups = view.groups();
                let members = &groups[state.rng.random_range(0..groups.len())];
                members[state.rng.random_range(0..members.len())]
            }
            _ => state.rng.random_range(0..view.n_samples()),
        };
        view.add_loss_gradient(&state.x, sample, scale, &mut state.grad);
    }
    state.finish(problem, 1.0 / cfg.step, false, draws as u64);
    Ok(())
}

/// One metrics row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub t: u64,
    pub oracle_count: u64,
    /// `F(x_out)` when exactly evaluable.
    pub objective: Option<f64>,
    /// `F(x_out) - F(x_*)` when the optimum is known.
    pub gap: Option<f64>,
    /// `(mu/2) ||x_out - x_*||^2` when the minimizer is known.
    pub dist_gap: Option<f64>,
    pub dual_norm: f64,
    /// Problem-specific metric of the output point, see [`Probe`].
    pub aux: Option<f64>,
    pub wall_nanos: u64,
}

/// Extra metric evaluated on the output point at every recorded row.
pub type Probe = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: SolverConfig,
    pub rows: Vec<RunRow>,
    pub x_last: Vec<f64>,
    pub x_avg: Vec<f64>,
}

impl RunRecord {
    pub fn solver(&self) -> &'static str {
        self.config.name()
    }

    /// Rows with wall time dropped, for comparing runs.
    pub fn metrics(&self) -> Vec<RunRow> {
        self.rows
            .iter()
            .map(|r| RunRow { wall_nanos: 0, ..*r })
            .collect()
    }
}

/// A solver bound to its problem: state plus configuration.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    problem: &'a ProblemInstance,
    config: SolverConfig,
    state: SolverState,
}

impl<'a> Solver<'a> {
    pub fn new(problem: &'a ProblemInstance, config: SolverConfig) -> Result<Self> {
        config.validate(problem)?;
        let (x0, repr) = match &config {
            SolverConfig::Alexr(c) => (
                c.x0,
                match c.psi_mode {
                    PsiMode::Conjugate => DualRepresentation::USequence,
                    _ => DualRepresentation::ExplicitDual,
                },
            ),
            SolverConfig::Baseline(c) => (
                c.x0,
                match c.variant {
                    BaselineVariant::Sox | BaselineVariant::Msvr => DualRepresentation::USequence,
                    _ => DualRepresentation::ExplicitDual,
                },
            ),
        };
        let state = SolverState::new(problem, x0, repr, config.seed());
        Ok(Solver {
            problem,
            config,
            state,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn step(&mut self) -> Result<()> {
        let p = self.problem;
        match &self.config {
            SolverConfig::Alexr(c) => alexr_step(&mut self.state, c, p),
            SolverConfig::Baseline(c) => match c.variant {
                BaselineVariant::Bsgd => bsgd_step(&mut self.state, c, p),
                BaselineVariant::Sox => sox_step(&mut self.state, c, p),
                BaselineVariant::Msvr => msvr_step(&mut self.state, c, p),
                BaselineVariant::SgdErm | BaselineVariant::SgdUw => sgd_step(&mut self.state, c, p),
            },
        }
    }

    pub fn output(&self) -> Vec<f64> {
        self.state.output(self.config.averaging())
    }

    /// Metrics of the current output point.
    pub fn observe(&self, wall_nanos: u64, probe: Option<&Probe>) -> RunRow {
        let x = self.output();
        let objective = evaluate_objective(self.problem, &x).ok();
        let reference = self.problem.reference();
        let gap = objective.zip(reference).map(|(f, r)| f - r.f_star);
        let dist_gap = reference.map(|r| {
            let mu = self.problem.regularizer().mu();
            0.5 * mu
                * x.iter()
                    .zip(&r.x_star)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
        });
        RunRow {
            t: self.state.t,
            oracle_count: self.state.oracle_count,
            objective,
            gap,
            dist_gap,
            dual_norm: self.state.dual.norm(),
            aux: probe.map(|p| p(&x)),
            wall_nanos,
        }
    }

    pub fn into_record(self, rows: Vec<RunRow>) -> RunRecord {
        RunRecord {
            x_avg: self.state.output(Averaging::Uniform),
            x_last: self.state.x,
            config: self.config,
            rows,
        }
    }
}

/// Runs exactly `iterations` steps, recording every `eval_every` steps and at the end.
pub fn run(problem: &ProblemInstance, config: &SolverConfig, eval_every: u64) -> Result<RunRecord> {
    run_with_probe(problem, config, eval_every, None)
}

/// [`run`] with an extra metric per row.
pub fn run_with_probe(
    problem: &ProblemInstance,
    config: &SolverConfig,
    eval_every: u64,
    probe: Option<&Probe>,
) -> Result<RunRecord> {
    if eval_every == 0 {
        return Err(Error::InvalidParameters("eval_every must be at least 1".into()));
    }
    let start = Instant::now();
    let mut solver = Solver::new(problem, config.clone())?;
    let total = config.iterations();
    let mut rows = vec![solver.observe(0, probe)];
    for t in 1..=total {
        solver.step()?;
        if t % eval_every == 0 || t == total {
            rows.push(solver.observe(start.elapsed().as_nanos() as u64, probe));
        }
    }
    Ok(solver.into_record(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outer::{HalfSquareShift, HingeHard, Identity, PositivePart, ScaledPositivePart};
    use crate::problem::{Interval, InnerOracle, SampleLossView};
    use rand::RngCore;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    /// `g(x; z) = x_j + noise[z]`, z uniform over the noise table.
    #[derive(Debug)]
    struct Shifted {
        d: usize,
        j: usize,
        noise: Vec<f64>,
    }

    impl InnerOracle for Shifted {
        fn dim(&self) -> usize {
            self.d
        }
        fn exact_value(&self, x: &[f64]) -> Option<f64> {
            Some(x[self.j] + self.noise.iter().sum::<f64>() / self.noise.len() as f64)
        }
        fn sample_batch(&self, rng: &mut dyn RngCore, size: usize, out: &mut Vec<usize>) {
            out.clear();
            out.extend((0..size).map(|_| rng.random_range(0..self.noise.len())));
        }
        fn value(&self, x: &[f64], batch: &[usize]) -> f64 {
            x[self.j] + batch.iter().map(|&z| self.noise[z]).sum::<f64>() / batch.len() as f64
        }
        fn add_jtvp(&self, _x: &[f64], _batch: &[usize], scale: f64, out: &mut [f64]) {
            out[self.j] += scale;
        }
        fn full_batch(&self) -> Option<Vec<usize>> {
            Some((0..self.noise.len()).collect())
        }
        fn is_affine(&self) -> bool {
            true
        }
        fn is_smooth(&self) -> bool {
            true
        }
    }

    fn shifted_problem(
        n: usize,
        outer: impl Fn(usize) -> Arc<dyn OuterFunction>,
        noise: &[f64],
        l2: f64,
        domain: BoxDomain,
    ) -> ProblemInstance {
        let outers = (0..n).map(&outer).collect();
        let inners = (0..n)
            .map(|j| {
                Arc::new(Shifted {
                    d: n,
                    j,
                    noise: noise.to_vec(),
                }) as Arc<dyn InnerOracle>
            })
            .collect();
        ProblemInstance::new(outers, inners, Regularizer::ridge(n, l2).unwrap(), domain).unwrap()
    }

    fn alexr(psi_mode: PsiMode, theta: f64, tau: f64, s: usize, iterations: u64, seed: u64) -> AlexrConfig {
        AlexrConfig {
            eta: 2.0,
            tau,
            theta,
            outer_batch: s,
            inner_batch: 2,
            iterations,
            psi_mode,
            seed,
            averaging: Averaging::Last,
            x0: 0.3,
        }
    }

    fn baseline(variant: BaselineVariant, gamma: f64, s: usize, seed: u64) -> BaselineConfig {
        BaselineConfig {
            variant,
            step: 0.5,
            gamma,
            outer_batch: s,
            inner_batch: 2,
            iterations: 50,
            seed,
            averaging: Averaging::Last,
            x0: 0.3,
        }
    }

    #[test]
    fn conjugate_update_examples() {
        let f = HalfSquareShift::new(0.0);
        let (u, y) = dual_update_conjugate(&f, 1.0, 3.0, 1.0).unwrap();
        assert_eq!(u, 2.0);
        assert_eq!(y, 2.0);
        assert_eq!(dual_update_conjugate(&f, 7.0, 3.0, 0.0).unwrap().0, 3.0);
        assert!(dual_update_conjugate(&PositivePart, 1.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn quadratic_update_examples() {
        let f = ScaledPositivePart::new(0.5).unwrap();
        assert_abs_diff_eq!(dual_update_quadratic(&f, 0.2, 0.5, 2.0), 0.45, epsilon = 1e-15);
        assert_eq!(dual_update_quadratic(&PositivePart, 0.0, -1.0, 1.0), 0.0);
        let h = HingeHard::new(1.0, 0.2).unwrap();
        assert!((dual_update_quadratic(&h, 0.5, 0.0, 1e6) - 0.5).abs() <= 1e-6);
    }

    #[test]
    fn primal_prox_examples() {
        let dom = BoxDomain::unbounded(3);
        let x = primal_prox_step(&[0.4, -0.2, 0.0], &[0.0; 3], 1.0, &Regularizer::zero(3), &dom);
        assert_eq!(x, vec![0.4, -0.2, 0.0]);
        let x = primal_prox_step(&[0.0; 3], &[1.0; 3], 1.0, &Regularizer::ridge(3, 1.0).unwrap(), &dom);
        assert_eq!(x, vec![-0.5; 3]);
        let b = BoxDomain::uniform(1, -1.0, 1.0).unwrap();
        assert_eq!(primal_prox_step(&[1.0], &[-10.0], 1.0, &Regularizer::zero(1), &b), vec![1.0]);
    }

    #[test]
    fn primal_prox_is_first_order_optimal() {
        let dom = BoxDomain::unbounded(4);
        let reg = Regularizer::ridge(4, 0.7).unwrap();
        let (xt, g, eta) = ([0.3, -1.0, 2.0, 0.0], [0.1, -0.4, 1.5, -2.0], 3.0);
        let x = primal_prox_step(&xt, &g, eta, &reg, &dom);
        for j in 0..4 {
            let residual = g[j] + 0.7 * x[j] + eta * (x[j] - xt[j]);
            assert!(residual.abs() <= 1e-10);
        }
    }

    #[test]
    fn msvr_beta_examples() {
        assert_abs_diff_eq!(msvr_beta(10, 10, 0.5), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(msvr_beta(100, 10, 0.9), 90.1, epsilon = 1e-9);
    }

    #[test]
    fn upweighting_examples() {
        let w = upweighting_weights(&[90, 10]).unwrap();
        assert_abs_diff_eq!(w[0], 1.0 / 180.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 1.0 / 20.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[0] / w[1], (1.0 / 90.0) / (1.0 / 10.0), epsilon = 1e-12);
        assert_abs_diff_eq!(90.0 * w[0] + 10.0 * w[1], 1.0, epsilon = 1e-15);
        assert_eq!(upweighting_weights(&[7]).unwrap(), vec![1.0 / 7.0]);
        assert!(upweighting_weights(&[3, 0]).is_err());
    }

    #[test]
    fn untouched_blocks_stay_bit_identical() {
        let p = shifted_problem(
            12,
            |_| Arc::new(PositivePart),
            &[-1.0, 0.5, 2.0],
            0.1,
            BoxDomain::uniform(12, -2.0, 2.0).unwrap(),
        );
        let cfg = alexr(PsiMode::Quadratic, 0.5, 1.0, 3, 0, 9);
        let mut state = SolverState::new(&p, cfg.x0, DualRepresentation::ExplicitDual, 9);
        for _ in 0..40 {
            let before = state.dual.blocks.clone();
            // replay the outer batch with a cloned stream
            let mut probe = state.rng.clone();
            let touched = sample_outer_batch(&mut probe, p.n(), cfg.outer_batch).unwrap();
            alexr_step(&mut state, &cfg, &p).unwrap();
            for i in 0..p.n() {
                if !touched.contains(&i) {
                    assert_eq!(before[i].to_bits(), state.dual.blocks[i].to_bits());
                }
                assert!(p.outer(i).dual_domain().contains(state.dual.blocks[i]));
            }
            assert!(p.domain().contains(&state.x));
        }
        assert_eq!(state.oracle_count, 40 * 2 * 3 * 2);
    }

    #[test]
    fn stationary_extrapolation() {
        // with x_t = x_{t-1}, theta = 1 and theta = 0 make the same first step
        let p = shifted_problem(
            5,
            |_| Arc::new(PositivePart),
            &[-1.0, 0.5],
            0.1,
            BoxDomain::uniform(5, -2.0, 2.0).unwrap(),
        );
        let mut a = Solver::new(&p, SolverConfig::Alexr(alexr(PsiMode::Quadratic, 1.0, 1.0, 2, 1, 4))).unwrap();
        let mut b = Solver::new(&p, SolverConfig::Alexr(alexr(PsiMode::Quadratic, 0.0, 1.0, 2, 1, 4))).unwrap();
        a.step().unwrap();
        b.step().unwrap();
        assert_eq!(a.state().x, b.state().x);
        assert_eq!(a.state().dual, b.state().dual);
    }

    #[test]
    fn identity_outers_reduce_to_proximal_gradient() {
        let p = shifted_problem(
            4,
            |_| Arc::new(Identity),
            &[0.0],
            0.5,
            BoxDomain::unbounded(4),
        );
        let mut cfg = alexr(PsiMode::Quadratic, 0.0, 1.0, 4, 1, 1);
        cfg.inner_batch = 1;
        let mut s = Solver::new(&p, SolverConfig::Alexr(cfg.clone())).unwrap();
        s.step().unwrap();
        // grad of (1/4) sum x_j is 1/4 per coordinate
        let expected = primal_prox_step(&[0.3; 4], &[0.25; 4], cfg.eta, p.regularizer(), p.domain());
        for (a, b) in s.state().x.iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn sox_matches_alexr_conjugate_mode() {
        let p = shifted_problem(
            8,
            |i| Arc::new(HalfSquareShift::new(0.1 * i as f64 - 0.3)),
            &[-0.7, 0.2, 0.9],
            0.2,
            BoxDomain::uniform(8, -3.0, 3.0).unwrap(),
        );
        let tau = 0.8;
        let mut a = Solver::new(&p, SolverConfig::Alexr(alexr(PsiMode::Conjugate, 0.0, tau, 3, 0, 11))).unwrap();
        let mut cfg = baseline(BaselineVariant::Sox, 1.0 / (1.0 + tau), 3, 11);
        cfg.step = 0.5;
        let mut b = Solver::new(&p, SolverConfig::Baseline(cfg)).unwrap();
        for _ in 0..200 {
            a.step().unwrap();
            b.step().unwrap();
            for (u, v) in a.state().x.iter().zip(&b.state().x) {
                assert!((u - v).abs() <= 1e-12);
            }
            for (u, v) in a.state().dual.blocks.iter().zip(&b.state().dual.blocks) {
                assert!((u - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn conjugate_modes_agree() {
        let p = shifted_problem(
            6,
            |i| Arc::new(HalfSquareShift::new(0.2 * i as f64 - 0.5)),
            &[-1.0, 0.0, 1.3],
            0.1,
            BoxDomain::uniform(6, -2.0, 2.0).unwrap(),
        );
        let mut a = Solver::new(&p, SolverConfig::Alexr(alexr(PsiMode::Conjugate, 0.7, 1.5, 2, 0, 5))).unwrap();
        let mut b =
            Solver::new(&p, SolverConfig::Alexr(alexr(PsiMode::ConjugateExplicit, 0.7, 1.5, 2, 0, 5))).unwrap();
        for _ in 0..100 {
            a.step().unwrap();
            b.step().unwrap();
            let ya = a.state().dual_values(&p).unwrap();
            for (u, v) in ya.iter().zip(&b.state().dual.blocks) {
                assert!((u - v).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn conjugate_mode_rejects_kinked_outers() {
        let p = shifted_problem(2, |_| Arc::new(PositivePart), &[0.0], 0.0, BoxDomain::unbounded(2));
        let cfg = SolverConfig::Alexr(alexr(PsiMode::Conjugate, 0.0, 1.0, 1, 1, 0));
        assert!(matches!(Solver::new(&p, cfg), Err(Error::NotSmooth(_))));
    }

    #[test]
    fn sox_memoryless_and_msvr_stationary() {
        let p = shifted_problem(
            4,
            |_| Arc::new(HalfSquareShift::new(0.0)),
            &[-1.0, 1.0],
            0.1,
            BoxDomain::unbounded(4),
        );
        let mut st = SolverState::new(&p, 0.3, DualRepresentation::USequence, 2);
        let cfg = baseline(BaselineVariant::Sox, 1.0, 4, 2);
        let mut probe = st.rng.clone();
        sox_step(&mut st, &cfg, &p).unwrap();
        // gamma = 1: u equals the batch estimate at x_0
        let mut batch = Vec::new();
        for i in 0..4 {
            p.inner(i).sample_batch(&mut probe, 2, &mut batch);
            let expected = p.inner(i).value(&[0.3; 4], &batch);
            p.inner(i).sample_batch(&mut probe, 2, &mut batch);
            assert_eq!(st.dual.blocks[i], expected);
        }

        // first step has x_t = x_{t-1}: MSVR and SOX coincide
        let mut a = Solver::new(&p, SolverConfig::Baseline(baseline(BaselineVariant::Sox, 0.5, 2, 8))).unwrap();
        let mut b = Solver::new(&p, SolverConfig::Baseline(baseline(BaselineVariant::Msvr, 0.5, 2, 8))).unwrap();
        a.step().unwrap();
        b.step().unwrap();
        assert_eq!(a.state().dual, b.state().dual);
        assert_eq!(a.state().x, b.state().x);
    }

    #[test]
    fn msvr_uses_beta_on_the_correction() {
        let p = shifted_problem(
            5,
            |_| Arc::new(HalfSquareShift::new(0.0)),
            &[0.0],
            0.0,
            BoxDomain::unbounded(5),
        );
        let cfg = baseline(BaselineVariant::Msvr, 0.5, 2, 3);
        let mut st = SolverState::new(&p, 0.3, DualRepresentation::USequence, 3);
        msvr_step(&mut st, &cfg, &p).unwrap();
        let (x_prev, x, u_prev) = (st.x_prev.clone(), st.x.clone(), st.dual.blocks.clone());
        let mut probe = st.rng.clone();
        msvr_step(&mut st, &cfg, &p).unwrap();
        let touched = sample_outer_batch(&mut probe, 5, 2).unwrap();
        let beta = msvr_beta(5, 2, 0.5);
        for &i in &touched {
            // noiseless: g(x; B) = x_i
            let expected = 0.5 * u_prev[i] + 0.5 * x[i] + beta * (x[i] - x_prev[i]);
            assert_abs_diff_eq!(st.dual.blocks[i], expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn bsgd_is_plain_sgd_under_identity_outers() {
        let p = shifted_problem(3, |_| Arc::new(Identity), &[-5.0, 5.0], 0.0, BoxDomain::unbounded(3));
        let mut cfg = baseline(BaselineVariant::Bsgd, 1.0, 3, 1);
        cfg.inner_batch = 1;
        let mut s = Solver::new(&p, SolverConfig::Baseline(cfg)).unwrap();
        s.step().unwrap();
        for v in &s.state().x {
            assert_abs_diff_eq!(*v, 0.3 - 0.5 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn bsgd_plugin_bias_shrinks_with_batch() {
        // g(x; z) = x + z with z = +-1 at x = 0.2 near the kink of (.)_+: the
        // plug-in E f'(g(x; B)) misses f'(g(x)) = 1, less so for larger B
        let f = PositivePart;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut bias = Vec::new();
        for b in [1usize, 4, 64] {
            let draws = 100_000;
            let mut acc = 0.0;
            for _ in 0..draws {
                let z = (0..b).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).sum::<f64>() / b as f64;
                acc += f.subgradient(0.2 + z);
            }
            bias.push(1.0 - acc / draws as f64);
        }
        assert!((bias[0] - 0.5).abs() < 0.01, "{bias:?}");
        assert!((bias[1] - 5.0 / 16.0).abs() < 0.01, "{bias:?}");
        assert!(bias[2] < 0.1 && bias[2] > 0.0, "{bias:?}");
    }

    #[derive(Debug)]
    struct Quadratic {
        groups: Vec<Vec<usize>>,
        targets: Vec<f64>,
    }

    impl SampleLossView for Quadratic {
        fn n_samples(&self) -> usize {
            self.targets.len()
        }
        fn groups(&self) -> &[Vec<usize>] {
            &self.groups
        }
        fn add_loss_gradient(&self, x: &[f64], sample: usize, scale: f64, out: &mut [f64]) {
            out[0] += scale * (x[0] - self.targets[sample]);
        }
        fn loss(&self, x: &[f64], sample: usize) -> f64 {
            0.5 * (x[0] - self.targets[sample]).powi(2)
        }
    }

    fn sgd_problem(targets: Vec<f64>, groups: Vec<Vec<usize>>) -> ProblemInstance {
        let view = Arc::new(Quadratic { groups, targets });
        shifted_problem(1, |_| Arc::new(Identity), &[0.0], 0.0, BoxDomain::unbounded(1)).with_samples(view)
    }

    #[test]
    fn sgd_fixed_point_and_single_group() {
        let p = sgd_problem(vec![0.3; 5], vec![(0..5).collect()]);
        let mut s = Solver::new(&p, SolverConfig::Baseline(baseline(BaselineVariant::SgdErm, 1.0, 2, 1)))
            .unwrap();
        for _ in 0..10 {
            s.step().unwrap();
        }
        assert_eq!(s.state().x, vec![0.3]);

        let p = sgd_problem(vec![1.0, -2.0, 0.5, 3.0], vec![(0..4).collect()]);
        let mut a = Solver::new(&p, SolverConfig::Baseline(baseline(BaselineVariant::SgdErm, 1.0, 2, 6))).unwrap();
        let mut b = Solver::new(&p, SolverConfig::Baseline(baseline(BaselineVariant::SgdUw, 1.0, 2, 6))).unwrap();
        a.step().unwrap();
        b.step().unwrap();
        assert!(a.state().x[0].is_finite() && b.state().x[0].is_finite());
        assert_eq!(a.state().oracle_count, 4);
    }

    #[test]
    fn sgd_uw_gives_groups_equal_mass() {
        // stationary point of the UW risk is the mean of the group means
        let mut targets = vec![0.0; 90];
        targets.extend(vec![1.0; 10]);
        let p = sgd_problem(targets, vec![(0..90).collect(), (90..100).collect()]);
        let mut cfg = baseline(BaselineVariant::SgdUw, 1.0, 8, 3);
        cfg.step = 0.01;
        cfg.iterations = 4000;
        cfg.averaging = Averaging::Uniform;
        let rec = run(&p, &SolverConfig::Baseline(cfg.clone()), 4000).unwrap();
        assert!((rec.x_avg[0] - 0.5).abs() < 0.05, "{}", rec.x_avg[0]);
        cfg.variant = BaselineVariant::SgdErm;
        let rec = run(&p, &SolverConfig::Baseline(cfg), 4000).unwrap();
        assert!((rec.x_avg[0] - 0.1).abs() < 0.05, "{}", rec.x_avg[0]);
    }

    #[test]
    fn sgd_needs_sample_view() {
        let p = shifted_problem(2, |_| Arc::new(Identity), &[0.0], 0.0, BoxDomain::unbounded(2));
        let cfg = SolverConfig::Baseline(baseline(BaselineVariant::SgdErm, 1.0, 1, 0));
        assert!(matches!(Solver::new(&p, cfg), Err(Error::Unsupported(_))));
    }

    #[test]
    fn run_contract() {
        let p = shifted_problem(
            6,
            |_| Arc::new(ScaledPositivePart::new(0.5).unwrap()),
            &[-0.5, 0.5],
            0.1,
            BoxDomain::uniform(6, -1.0, 1.0).unwrap(),
        );
        let cfg = SolverConfig::Alexr(alexr(PsiMode::Quadratic, 0.5, 1.0, 2, 0, 3));
        let rec = run(&p, &cfg, 5).unwrap();
        assert_eq!(rec.rows.len(), 1);
        assert_eq!(rec.rows[0].t, 0);
        assert!(rec.rows[0].objective.is_some());

        let cfg = SolverConfig::Alexr(alexr(PsiMode::Quadratic, 0.5, 1.0, 2, 23, 3));
        let a = run(&p, &cfg, 5).unwrap();
        let b = run(&p, &cfg, 5).unwrap();
        assert_eq!(a.metrics(), b.metrics());
        assert_eq!(a.x_last, b.x_last);
        let ts: Vec<u64> = a.rows.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 5, 10, 15, 20, 23]);
        assert!(a.rows.windows(2).all(|w| w[0].oracle_count < w[1].oracle_count));
        assert!(run(&p, &cfg, 0).is_err());
    }

    #[test]
    fn initial_state() {
        let p = shifted_problem(
            2,
            |i| -> Arc<dyn OuterFunction> {
                if i == 0 {
                    Arc::new(Identity)
                } else {
                    Arc::new(HalfSquareShift::new(0.4))
                }
            },
            &[0.0],
            0.0,
            BoxDomain::from_bounds(vec![Interval::new(0.5, 1.0).unwrap(), Interval::REAL_LINE]).unwrap(),
        );
        let st = SolverState::new(&p, 0.0, DualRepresentation::ExplicitDual, 0);
        assert_eq!(st.x, vec![0.5, 0.0]);
        assert_eq!(st.dual.blocks, vec![1.0, 0.0]);
        let st = SolverState::new(&p, 0.0, DualRepresentation::USequence, 0);
        assert_eq!(st.dual.blocks, vec![0.0, -0.4]);
        assert_eq!(st.dual_values(&p).unwrap(), vec![1.0, 0.0]);
    }
}
