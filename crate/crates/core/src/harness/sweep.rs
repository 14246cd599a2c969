//! Empirical iteration complexity: `T(eps)` for a decreasing list of targets,
//! then a log-log fit.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::emit::format_float;
use super::output::Staging;
use super::{ExperimentConfig, SweepMeasure, SweepSpec};
use crate::algorithms::{Solver, SolverConfig};
use crate::metrics::{fit_rate, RateFit};
use crate::problem::ProblemInstance;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub converged: bool,
    /// First checked iteration at which the seed-mean measure was at most `epsilon`,
    /// or the planted value.
    pub iterations: Option<f64>,
    pub oracle_count: Option<u64>,
    /// Seed-mean measure when the run stopped.
    pub final_measure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSweep {
    pub solver: String,
    pub measure: SweepMeasure,
    pub points: Vec<SweepPoint>,
    /// Fit over the converged points only.
    pub fit: Option<RateFit>,
    pub fit_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub out_dir: PathBuf,
    pub solvers: Vec<SolverSweep>,
}

impl SweepReport {
    /// Every target converged and every fit succeeded.
    pub fn is_complete(&self) -> bool {
        self.solvers
            .iter()
            .all(|s| s.fit.is_some() && s.points.iter().all(|p| p.converged))
    }
}

fn measure_of(solver: &Solver<'_>, measure: SweepMeasure) -> Result<f64> {
    let row = solver.observe(0, None);
    let v = match measure {
        SweepMeasure::ObjectiveGap => row.gap,
        SweepMeasure::DistanceGap => row.dist_gap,
    };
    v.ok_or_else(|| Error::config("sweep.measure", "the problem has no known optimum"))
}

fn hit_time(problem: &ProblemInstance, cfg: &SolverConfig, seeds: &[u64], eps: f64, sweep: &SweepSpec) -> Result<SweepPoint> {
    let mut solvers = seeds
        .iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.set_seed(seed);
            c.set_iterations(sweep.max_iterations);
            Solver::new(problem, c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = |solvers: &[Solver<'_>]| -> Result<f64> {
        let vals = solvers
            .iter()
            .map(|s| measure_of(s, sweep.measure))
            .collect::<Result<Vec<_>>>()?;
        Ok(vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let mut t = 0;
    let mut current = mean(&solvers)?;
    while current > eps && t < sweep.max_iterations {
        let steps = sweep.check_every.min(sweep.max_iterations - t);
        solvers.par_iter_mut().try_for_each(|s| {
            for _ in 0..steps {
                s.step()?;
            }
            Ok::<_, Error>(())
        })?;
        t += steps;
        current = mean(&solvers)?;
    }
    let converged = current <= eps;
    Ok(SweepPoint {
        epsilon: eps,
        converged,
        iterations: converged.then_some(t as f64),
        oracle_count: converged.then(|| solvers[0].state().oracle_count),
        final_measure: Some(current),
    })
}

/// For each solver and each target `eps`, re-derives the solver's preset at
/// `eps`, runs all seeds in lockstep until the seed-mean measure drops to `eps`
/// (checked every `check_every` steps) and fits `ln T` against `ln eps`.
/// Writes `rate_points.csv` and `rate_fit.json` into `out`.
pub fn sweep_rate(config: &ExperimentConfig, out: &Path) -> Result<SweepReport> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "missing [sweep] table"))?;
    let (built, _) = config.validate()?;
    let problem = &built.problem;

    let mut results = Vec::new();
    for (k, spec) in config.solvers.iter().enumerate() {
        let at = format!("solvers[{k}]");
        let configs = sweep
            .epsilons
            .iter()
            .map(|&eps| {
                let mut c = spec.resolve(&at, problem, Some(eps))?;
                if c.len() != 1 {
                    return Err(Error::config(at.clone(), "a sweep needs exactly one candidate per target, not a grid"));
                }
                Ok(c.remove(0))
            })
            .collect::<Result<Vec<_>>>()?;
        let points = match sweep.planted {
            Some(law) => sweep
                .epsilons
                .iter()
                .map(|&eps| SweepPoint {
                    epsilon: eps,
                    converged: true,
                    iterations: Some(law.constant * eps.powf(-law.exponent)),
                    oracle_count: None,
                    final_measure: None,
                })
                .collect(),
            None => sweep
                .epsilons
                .par_iter()
                .zip(configs.par_iter())
                .map(|(&eps, cfg)| hit_time(problem, cfg, &config.seeds, eps, sweep))
                .collect::<Result<Vec<_>>>()?,
        };
        for p in points.iter().filter(|p| !p.converged) {
            log::warn!("{}: eps = {} not reached within {} iterations", spec.label(), p.epsilon, sweep.max_iterations);
        }
        let usable: Vec<(f64, f64)> = points
            .iter()
            .filter_map(|p| p.iterations.map(|t| (p.epsilon, t)))
            .collect();
        let (fit, fit_error) = match fit_rate(&usable) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        results.push(SolverSweep {
            solver: spec.label(),
            measure: sweep.measure,
            points,
            fit,
            fit_error,
        });
    }

    let staging = Staging::new(out)?;
    let mut csv = String::from("solver,epsilon,converged,iterations,oracle_count,final_measure\n");
    for s in &results {
        for p in &s.points {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.solver,
                format_float(p.epsilon),
                p.converged,
                p.iterations.map(format_float).unwrap_or_default(),
                p.oracle_count.map(|o| o.to_string()).unwrap_or_default(),
                p.final_measure.map(format_float).unwrap_or_default(),
            ));
        }
    }
    let points_path = staging.path().join("rate_points.csv");
    fs::write(&points_path, csv).map_err(|e| Error::io(&points_path, e))?;
    let fit_path = staging.path().join("rate_fit.json");
    let json = serde_json::to_string_pretty(&results).map_err(|e| Error::io(&fit_path, e))?;
    fs::write(&fit_path, json + "\n").map_err(|e| Error::io(&fit_path, e))?;
    let out_dir = staging.commit()?;
    Ok(SweepReport {
        out_dir,
        solvers: results,
    })
}
