//! Experiment configuration (TOML) and its resolution into problems and solver configs.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    AlexrConfig, Averaging, BaselineConfig, BaselineVariant, Probe, PsiMode, SolverConfig,
};
use crate::instances::{
    build_gdro, build_hard_nonsmooth, build_hard_smooth, build_pauc, build_synthetic_gdro,
    build_synthetic_pauc, parse_libsvm, read_grouped_csv, CsvOptions, Divergence, GdroOptions,
    GroupedDataset, PaucDataset, Surrogate,
};
use crate::metrics::{pauc_exact, worst_fraction_group_metric, GroupMetricMode};
use crate::problem::ProblemInstance;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    JsonLines,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::JsonLines => "jsonl",
        }
    }
}

fn default_seeds() -> Vec<u64> {
    (1..=5).collect()
}

fn default_eval_every() -> u64 {
    100
}

fn default_risk_bound() -> f64 {
    3.0
}

fn default_min_group() -> usize {
    1
}

fn default_warn_group() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    HardSmooth {
        n: usize,
        nu: f64,
        sigma: f64,
    },
    HardNonsmooth {
        n: usize,
        nu: f64,
        beta: f64,
        alpha_reg: f64,
        sigma: f64,
    },
    GdroSynthetic {
        n_groups: usize,
        d: usize,
        samples_per_group: usize,
        heterogeneity: f64,
        #[serde(default)]
        data_seed: u64,
        divergence: Divergence,
        #[serde(default)]
        weight_decay: f64,
        #[serde(default = "default_risk_bound")]
        risk_bound: f64,
    },
    GdroCsv {
        path: PathBuf,
        group_column: String,
        label_column: String,
        #[serde(default = "default_min_group")]
        min_group_size: usize,
        #[serde(default = "default_warn_group")]
        warn_group_size: usize,
        divergence: Divergence,
        #[serde(default)]
        weight_decay: f64,
        #[serde(default = "default_risk_bound")]
        risk_bound: f64,
    },
    PaucLibsvm {
        path: PathBuf,
        alpha: f64,
        surrogate: Surrogate,
        #[serde(default)]
        weight_decay: f64,
    },
    PaucSynthetic {
        n_pos: usize,
        n_neg: usize,
        d: usize,
        separation: f64,
        alpha: f64,
        surrogate: Surrogate,
        #[serde(default)]
        weight_decay: f64,
        #[serde(default)]
        data_seed: u64,
    },
}

/// A problem together with an optional named metric for the record files.
#[derive(Clone)]
pub struct BuiltProblem {
    pub problem: ProblemInstance,
    pub aux: Option<(String, Arc<Probe>)>,
}

impl std::fmt::Debug for BuiltProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BuiltProblem")
            .field("problem", &self.problem)
            .field("aux", &self.aux.as_ref().map(|a| &a.0))
            .finish()
    }
}

fn gdro_probe(data: Arc<GroupedDataset>, divergence: Divergence) -> (String, Arc<Probe>) {
    let alpha = match divergence {
        Divergence::Cvar { alpha } => alpha,
        Divergence::Chi2 { .. } => 1.0 / data.n_groups as f64,
    };
    let d = data.dim();
    let probe = move |x: &[f64]| {
        worst_fraction_group_metric(&data.group_risks(&x[..d]), alpha, GroupMetricMode::Loss)
            .unwrap_or(f64::NAN)
    };
    ("worst_group_risk".to_string(), Arc::new(probe))
}

fn pauc_probe(data: Arc<PaucDataset>) -> (String, Arc<Probe>) {
    let d = data.dim();
    let probe = move |x: &[f64]| {
        let (pos, neg) = data.scores(&x[..d]);
        pauc_exact(&pos, &neg, data.alpha).unwrap_or(f64::NAN)
    };
    ("pauc".to_string(), Arc::new(probe))
}

impl ProblemSpec {
    pub fn build(&self) -> Result<BuiltProblem> {
        let plain = |problem| BuiltProblem { problem, aux: None };
        Ok(match self {
            ProblemSpec::HardSmooth { n, nu, sigma } => plain(build_hard_smooth(*n, *nu, *sigma)?.problem),
            ProblemSpec::HardNonsmooth {
                n,
                nu,
                beta,
                alpha_reg,
                sigma,
            } => plain(build_hard_nonsmooth(*n, *nu, *beta, *alpha_reg, *sigma)?.problem),
            ProblemSpec::GdroSynthetic {
                n_groups,
                d,
                samples_per_group,
                heterogeneity,
                data_seed,
                divergence,
                weight_decay,
                risk_bound,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*data_seed);
                let data = Arc::new(build_synthetic_gdro(*n_groups, *d, *samples_per_group, *heterogeneity, &mut rng)?);
                let options = GdroOptions {
                    weight_decay: *weight_decay,
                    risk_bound: *risk_bound,
                };
                BuiltProblem {
                    problem: build_gdro(Arc::clone(&data), *divergence, options)?,
                    aux: Some(gdro_probe(data, *divergence)),
                }
            }
            ProblemSpec::GdroCsv {
                path,
                group_column,
                label_column,
                min_group_size,
                warn_group_size,
                divergence,
                weight_decay,
                risk_bound,
            } => {
                let file = File::open(path).map_err(|e| Error::io(path, e))?;
                let options = CsvOptions {
                    group_column: group_column.clone(),
                    label_column: label_column.clone(),
                    min_group_size: *min_group_size,
                    warn_group_size: *warn_group_size,
                };
                let (data, warnings) = read_grouped_csv(BufReader::new(file), &options)?;
                for w in warnings {
                    log::warn!("{}: {w}", path.display());
                }
                let data = Arc::new(data);
                let options = GdroOptions {
                    weight_decay: *weight_decay,
                    risk_bound: *risk_bound,
                };
                BuiltProblem {
                    problem: build_gdro(Arc::clone(&data), *divergence, options)?,
                    aux: Some(gdro_probe(data, *divergence)),
                }
            }
            ProblemSpec::PaucLibsvm {
                path,
                alpha,
                surrogate,
                weight_decay,
            } => {
                let file = File::open(path).map_err(|e| Error::io(path, e))?;
                let data = Arc::new(parse_libsvm(BufReader::new(file))?.to_pauc(*alpha)?);
                BuiltProblem {
                    problem: build_pauc(Arc::clone(&data), *surrogate, *weight_decay)?,
                    aux: Some(pauc_probe(data)),
                }
            }
            ProblemSpec::PaucSynthetic {
                n_pos,
                n_neg,
                d,
                separation,
                alpha,
                surrogate,
                weight_decay,
                data_seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*data_seed);
                let data = Arc::new(build_synthetic_pauc(*n_pos, *n_neg, *d, *separation, *alpha, &mut rng)?);
                BuiltProblem {
                    problem: build_pauc(Arc::clone(&data), *surrogate, *weight_decay)?,
                    aux: Some(pauc_probe(data)),
                }
            }
        })
    }

    /// Makes data paths absolute against `base`.
    fn rebase(&mut self, base: &Path) {
        match self {
            ProblemSpec::GdroCsv { path, .. } | ProblemSpec::PaucLibsvm { path, .. } if path.is_relative() => {
                *path = base.join(&*path);
            }
            _ => {}
        }
    }
}

/// A scalar or a list of candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    One(f64),
    Many(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::One(v) => vec![*v],
            Grid::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `eta = mu theta / (1 - theta)`, `tau = S / (n (1 - theta))`.
    StronglyConvex,
    /// `eta = c_eta / eps`, `tau = c_tau / (B eps)`.
    Convex,
}

pub const SOLVER_KINDS: [&str; 6] = ["alexr", "bsgd", "sox", "msvr", "sgd_erm", "sgd_uw"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub outer_batch: usize,
    pub inner_batch: usize,
    pub iterations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_mode: Option<PsiMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averaging: Option<Averaging>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Grid>,
    /// Strongly convex preset: `theta = 1 - kappa * epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_eta: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_tau: Option<Grid>,
}

impl SolverSpec {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.clone())
    }

    /// Candidate configurations (the Cartesian product of all grids), seed 0.
    /// `epsilon` overrides this solver's own `epsilon` field.
    pub fn resolve(&self, at: &str, problem: &ProblemInstance, epsilon: Option<f64>) -> Result<Vec<SolverConfig>> {
        let field = |name: &str| format!("{at}.{name}");
        let need = |g: &Option<Grid>, name: &str| {
            g.as_ref()
                .map(Grid::values)
                .ok_or_else(|| Error::config(field(name), "missing"))
        };
        let forbid = |g: bool, name: &str| -> Result<()> {
            if g {
                Err(Error::config(field(name), format!("not used by `{}`", self.kind)))
            } else {
                Ok(())
            }
        };
        let eps = epsilon.or(self.epsilon);
        let x0 = self.x0.unwrap_or(0.0);
        let mut out = Vec::new();
        if self.kind == "alexr" {
            forbid(self.step.is_some(), "step")?;
            forbid(self.gamma.is_some(), "gamma")?;
            let psi_mode = self.psi_mode.unwrap_or(PsiMode::Quadratic);
            match self.preset {
                None => {
                    for eta in need(&self.eta, "eta")? {
                        for tau in need(&self.tau, "tau")? {
                            for theta in need(&self.theta, "theta")? {
                                out.push(AlexrConfig {
                                    eta,
                                    tau,
                                    theta,
                                    outer_batch: self.outer_batch,
                                    inner_batch: self.inner_batch,
                                    iterations: self.iterations,
                                    psi_mode,
                                    seed: 0,
                                    averaging: self.averaging.unwrap_or(Averaging::Last),
                                    x0,
                                });
                            }
                        }
                    }
                }
                Some(Preset::StronglyConvex) => {
                    forbid(self.eta.is_some(), "eta")?;
                    forbid(self.tau.is_some(), "tau")?;
                    let thetas = match (self.kappa, eps, &self.theta) {
                        (Some(k), Some(e), None) => vec![1.0 - k * e],
                        (None, _, Some(t)) => t.values(),
                        _ => {
                            return Err(Error::config(
                                field("theta"),
                                "strongly convex preset needs either theta or kappa with epsilon",
                            ))
                        }
                    };
                    let mu = problem.regularizer().mu();
                    for theta in thetas {
                        let mut c = AlexrConfig::strongly_convex(
                            mu,
                            problem.n(),
                            self.outer_batch,
                            self.inner_batch,
                            theta,
                            self.iterations,
                            0,
                        )
                        .map_err(|e| Error::config(field("preset"), e.to_string()))?;
                        c.psi_mode = psi_mode;
                        c.x0 = x0;
                        if let Some(a) = self.averaging {
                            c.averaging = a;
                        }
                        out.push(c);
                    }
                }
                Some(Preset::Convex) => {
                    forbid(self.eta.is_some(), "eta")?;
                    forbid(self.tau.is_some(), "tau")?;
                    let e = eps.ok_or_else(|| Error::config(field("epsilon"), "convex preset needs epsilon"))?;
                    let c_etas = self.c_eta.as_ref().map_or(vec![1.0], Grid::values);
                    let c_taus = self.c_tau.as_ref().map_or(vec![1.0], Grid::values);
                    let thetas = self.theta.as_ref().map_or(vec![0.0], Grid::values);
                    for &c_eta in &c_etas {
                        for &c_tau in &c_taus {
                            for &theta in &thetas {
                                let mut c = AlexrConfig::convex(
                                    e,
                                    c_eta,
                                    c_tau,
                                    theta,
                                    self.outer_batch,
                                    self.inner_batch,
                                    self.iterations,
                                    0,
                                )
                                .map_err(|err| Error::config(field("preset"), err.to_string()))?;
                                c.psi_mode = psi_mode;
                                c.x0 = x0;
                                if let Some(a) = self.averaging {
                                    c.averaging = a;
                                }
                                out.push(c);
                            }
                        }
                    }
                }
            }
            let out: Vec<SolverConfig> = out.into_iter().map(SolverConfig::Alexr).collect();
            for c in &out {
                c.validate(problem).map_err(|e| Error::config(at.to_string(), e.to_string()))?;
            }
            return Ok(out);
        }

        let variant = match self.kind.as_str() {
            "bsgd" => BaselineVariant::Bsgd,
            "sox" => BaselineVariant::Sox,
            "msvr" => BaselineVariant::Msvr,
            "sgd_erm" => BaselineVariant::SgdErm,
            "sgd_uw" => BaselineVariant::SgdUw,
            other => {
                return Err(Error::config(
                    field("kind"),
                    format!("unknown solver `{other}`, expected one of {}", SOLVER_KINDS.join(", ")),
                ))
            }
        };
        for (present, name) in [
            (self.eta.is_some(), "eta"),
            (self.tau.is_some(), "tau"),
            (self.theta.is_some(), "theta"),
            (self.preset.is_some(), "preset"),
            (self.psi_mode.is_some(), "psi_mode"),
            (self.kappa.is_some(), "kappa"),
            (self.c_eta.is_some(), "c_eta"),
            (self.c_tau.is_some(), "c_tau"),
        ] {
            forbid(present, name)?;
        }
        let gammas = match variant {
            BaselineVariant::Sox | BaselineVariant::Msvr => need(&self.gamma, "gamma")?,
            _ => {
                forbid(self.gamma.is_some(), "gamma")?;
                vec![1.0]
            }
        };
        let mut configs = Vec::new();
        for step in need(&self.step, "step")? {
            for &gamma in &gammas {
                configs.push(SolverConfig::Baseline(BaselineConfig {
                    variant,
                    step,
                    gamma,
                    outer_batch: self.outer_batch,
                    inner_batch: self.inner_batch,
                    iterations: self.iterations,
                    seed: 0,
                    averaging: self.averaging.unwrap_or(Averaging::Last),
                    x0,
                }));
            }
        }
        for c in &configs {
            c.validate(problem).map_err(|e| Error::config(at.to_string(), e.to_string()))?;
        }
        Ok(configs)
    }

    /// The solver entry that reproduces exactly `config`, no grids or presets.
    pub fn pinned(&self, config: &SolverConfig) -> SolverSpec {
        let mut s = SolverSpec {
            kind: self.kind.clone(),
            label: self.label.clone(),
            outer_batch: self.outer_batch,
            inner_batch: self.inner_batch,
            iterations: config.iterations(),
            psi_mode: None,
            averaging: Some(config.averaging()),
            x0: None,
            preset: None,
            eta: None,
            tau: None,
            theta: None,
            step: None,
            gamma: None,
            kappa: None,
            epsilon: None,
            c_eta: None,
            c_tau: None,
        };
        match config {
            SolverConfig::Alexr(c) => {
                s.eta = Some(Grid::One(c.eta));
                s.tau = Some(Grid::One(c.tau));
                s.theta = Some(Grid::One(c.theta));
                s.psi_mode = Some(c.psi_mode);
                s.x0 = Some(c.x0);
            }
            SolverConfig::Baseline(c) => {
                s.step = Some(Grid::One(c.step));
                if matches!(c.variant, BaselineVariant::Sox | BaselineVariant::Msvr) {
                    s.gamma = Some(Grid::One(c.gamma));
                }
                s.x0 = Some(c.x0);
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMeasure {
    /// `F(x_out) - F(x_*)`.
    ObjectiveGap,
    /// `(mu/2) ||x_out - x_*||^2`.
    DistanceGap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedLaw {
    pub constant: f64,
    pub exponent: f64,
}

fn default_check_every() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Strictly decreasing target accuracies.
    pub epsilons: Vec<f64>,
    pub measure: SweepMeasure,
    /// Per-epsilon budget.
    pub max_iterations: u64,
    #[serde(default = "default_check_every")]
    pub check_every: u64,
    /// Self-test: skip solving and use `T = constant * eps^(-exponent)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted: Option<PlantedLaw>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    #[serde(default)]
    pub format: OutputFormat,
    /// Record wall time; off keeps record files reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
    pub problem: ProblemSpec,
    pub solvers: Vec<SolverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("<toml>", e.to_string()))
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let base = base.canonicalize().unwrap_or_else(|_| base.to_path_buf());
        cfg.problem.rebase(&base);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<toml>", e.to_string()))
    }

    /// Structural checks plus building the problem and resolving every solver.
    pub fn validate(&self) -> Result<(BuiltProblem, Vec<Vec<SolverConfig>>)> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every", "must be at least 1"));
        }
        if self.solvers.is_empty() {
            return Err(Error::config("solvers", "at least one solver is required"));
        }
        let mut labels = std::collections::HashSet::new();
        for (k, s) in self.solvers.iter().enumerate() {
            if !labels.insert(s.label()) {
                return Err(Error::config(format!("solvers[{k}].label"), format!("duplicate label `{}`", s.label())));
            }
            if !SOLVER_KINDS.contains(&s.kind.as_str()) {
                return Err(Error::config(
                    format!("solvers[{k}].kind"),
                    format!("unknown solver `{}`, expected one of {}", s.kind, SOLVER_KINDS.join(", ")),
                ));
            }
            if !s.label().chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::config(
                    format!("solvers[{k}].label"),
                    "labels may only use ASCII letters, digits, `_` and `-`",
                ));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.epsilons.windows(2).any(|w| w[1] >= w[0]) || sw.epsilons.iter().any(|e| !(*e > 0.0)) {
                return Err(Error::config("sweep.epsilons", "must be positive and strictly decreasing"));
            }
            if sw.check_every == 0 {
                return Err(Error::config("sweep.check_every", "must be at least 1"));
            }
        }
        let built = self.problem.build().map_err(|e| match e {
            e @ Error::Config { .. } => e,
            other => Error::config("problem", other.to_string()),
        })?;
        let eps = self.sweep.as_ref().and_then(|s| s.epsilons.first().copied());
        let mut resolved = Vec::new();
        for (k, s) in self.solvers.iter().enumerate() {
            let at = format!("solvers[{k}]");
            let eps = if s.epsilon.is_none() { eps } else { None };
            resolved.push(s.resolve(&at, &built.problem, eps)?);
        }
        Ok((built, resolved))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
seeds = [1, 2]
eval_every = 10

[problem]
kind = "hard_smooth"
n = 10
nu = 0.3
sigma = 1.0

[[solvers]]
kind = "alexr"
outer_batch = 2
inner_batch = 1
iterations = 50
preset = "strongly_convex"
theta = 0.9

[[solvers]]
kind = "bsgd"
outer_batch = 2
inner_batch = 1
iterations = 50
step = [0.1, 0.5]
"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = ExperimentConfig::from_toml(BASIC).unwrap();
        assert_eq!(cfg.format, OutputFormat::Csv);
        let (built, resolved) = cfg.validate().unwrap();
        assert_eq!(built.problem.n(), 10);
        assert_eq!(resolved[0].len(), 1);
        assert_eq!(resolved[1].len(), 2);
        match &resolved[0][0] {
            SolverConfig::Alexr(c) => {
                assert!((c.eta - 0.05 * 0.9 / 0.1).abs() < 1e-12);
                assert!((c.tau - 2.0).abs() < 1e-12);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn defaults() {
        let text = BASIC.replace("seeds = [1, 2]\n", "");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn unknown_solver_names_the_field() {
        let text = BASIC.replace("kind = \"bsgd\"", "kind = \"adam\"");
        let err = ExperimentConfig::from_toml(&text).unwrap().validate().unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "solvers[1].kind");
                assert!(message.contains("adam"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_and_stray_fields() {
        let text = BASIC.replace("step = [0.1, 0.5]", "");
        match ExperimentConfig::from_toml(&text).unwrap().validate().unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "solvers[1].step"),
            other => panic!("{other:?}"),
        }
        let text = BASIC.replace("step = [0.1, 0.5]", "step = 0.1\ntau = 2.0");
        match ExperimentConfig::from_toml(&text).unwrap().validate().unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "solvers[1].tau"),
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::from_toml(&BASIC.replace("eval_every", "evaluate_every")).is_err());
    }

    #[test]
    fn toml_round_trip_of_pinned_specs() {
        let cfg = ExperimentConfig::from_toml(BASIC).unwrap();
        let (built, resolved) = cfg.validate().unwrap();
        let mut pinned = cfg.clone();
        pinned.solvers = cfg
            .solvers
            .iter()
            .zip(&resolved)
            .map(|(s, r)| s.pinned(&r[0]))
            .collect();
        let back = ExperimentConfig::from_toml(&pinned.to_toml().unwrap()).unwrap();
        assert_eq!(back, pinned);
        let (_, again) = back.validate().unwrap();
        assert_eq!(again[0], vec![resolved[0][0].clone()]);
        assert_eq!(again[1], vec![resolved[1][0].clone()]);
        assert_eq!(built.problem.dim(), 10);
    }
}
