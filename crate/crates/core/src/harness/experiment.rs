//! Seeded multi-run experiments.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::emit::{format_float, write_records, RecordRow};
use super::output::Staging;
use super::ExperimentConfig;
use crate::algorithms::{run_with_probe, RunRecord, RunRow, SolverConfig};
use crate::metrics::mean_std;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub out_dir: PathBuf,
    pub record_files: Vec<PathBuf>,
    pub aggregate: PathBuf,
    pub manifest: PathBuf,
    /// Per solver label: the configuration kept after grid selection (seed 0)
    /// and its seed-mean final objective.
    pub selected: Vec<(String, SolverConfig, f64)>,
}

fn final_objective(record: &RunRecord) -> f64 {
    record
        .rows
        .last()
        .and_then(|r| r.objective)
        .filter(|v| v.is_finite())
        .unwrap_or(f64::INFINITY)
}

/// Runs every (solver, candidate, seed) cell, keeps the candidate with the lowest
/// seed-mean final objective per solver, and writes records, aggregate and manifest
/// into `out`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<ExperimentSummary> {
    let (built, resolved) = config.validate()?;
    let problem = &built.problem;
    let probe = built.aux.as_ref().map(|(_, p)| p.as_ref());

    let mut cells = Vec::new();
    for (k, candidates) in resolved.iter().enumerate() {
        for (c, cfg) in candidates.iter().enumerate() {
            for &seed in &config.seeds {
                let mut cfg = cfg.clone();
                cfg.set_seed(seed);
                cells.push((k, c, cfg));
            }
        }
    }
    let mut records: Vec<RunRecord> = cells
        .par_iter()
        .map(|(_, _, cfg)| run_with_probe(problem, cfg, config.eval_every, probe))
        .collect::<Result<_>>()?;
    if !config.timing {
        for r in &mut records {
            for row in &mut r.rows {
                row.wall_nanos = 0;
            }
        }
    }

    let seeds = config.seeds.len();
    let mut offset = 0;
    let mut chosen: Vec<(String, SolverConfig, f64, &[RunRecord])> = Vec::new();
    for (k, candidates) in resolved.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..candidates.len() {
            let runs = &records[offset + c * seeds..offset + (c + 1) * seeds];
            let score = runs.iter().map(final_objective).sum::<f64>() / seeds as f64;
            let score = if score.is_nan() { f64::INFINITY } else { score };
            if best.is_none_or(|(_, b)| score < b) {
                best = Some((c, score));
            }
        }
        let (c, score) = best.expect("validated solver has candidates");
        if candidates.len() > 1 {
            log::info!(
                "{}: kept candidate {} of {} (mean final objective {score})",
                config.solvers[k].label(),
                c + 1,
                candidates.len()
            );
        }
        let runs = &records[offset + c * seeds..offset + (c + 1) * seeds];
        chosen.push((config.solvers[k].label(), candidates[c].clone(), score, runs));
        offset += candidates.len() * seeds;
    }

    let staging = Staging::new(out)?;
    let rec_dir = staging.subdir("records")?;
    let aux_name = built.aux.as_ref().map(|(n, _)| n.as_str());
    let ext = config.format.extension();
    let mut record_files = Vec::new();
    for (label, _, _, runs) in &chosen {
        for (seed, run) in config.seeds.iter().zip(runs.iter()) {
            let name = format!("{label}_seed{seed}.{ext}");
            let rows: Vec<RecordRow> = run
                .rows
                .iter()
                .map(|r| RecordRow {
                    solver: label.clone(),
                    seed: *seed,
                    row: *r,
                })
                .collect();
            write_records(&rec_dir.join(&name), &rows, aux_name, config.format)?;
            record_files.push(PathBuf::from("records").join(name));
        }
    }

    let agg_path = staging.path().join("aggregate.csv");
    let groups: Vec<(&str, Vec<&[RunRow]>)> = chosen
        .iter()
        .map(|(label, _, _, runs)| (label.as_str(), runs.iter().map(|r| r.rows.as_slice()).collect()))
        .collect();
    write_aggregate(&agg_path, &groups, aux_name)?;

    let mut manifest = config.clone();
    manifest.sweep = None;
    manifest.solvers = config
        .solvers
        .iter()
        .zip(&chosen)
        .map(|(spec, (_, cfg, _, _))| spec.pinned(cfg))
        .collect();
    let manifest_path = staging.path().join("manifest.toml");
    fs::write(&manifest_path, manifest.to_toml()?).map_err(|e| Error::io(&manifest_path, e))?;

    let out_dir = staging.commit()?;
    Ok(ExperimentSummary {
        record_files: record_files.into_iter().map(|p| out_dir.join(p)).collect(),
        aggregate: out_dir.join("aggregate.csv"),
        manifest: out_dir.join("manifest.toml"),
        selected: chosen.into_iter().map(|(l, c, s, _)| (l, c, s)).collect(),
        out_dir,
    })
}

/// Seed mean and standard deviation per recorded row, keyed by `oracle_count`.
fn write_aggregate(path: &Path, groups: &[(&str, Vec<&[RunRow]>)], aux: Option<&str>) -> Result<()> {
    let mut text = String::from(
        "solver,t,oracle_count,seeds,objective_mean,objective_std,gap_mean,gap_std,dist_gap_mean,dist_gap_std,dual_norm_mean,dual_norm_std",
    );
    if let Some(name) = aux {
        text.push_str(&format!(",{name}_mean,{name}_std"));
    }
    text.push('\n');
    let stat = |vals: Vec<Option<f64>>| -> String {
        let vals: Option<Vec<f64>> = vals.into_iter().collect();
        match vals {
            Some(v) if !v.is_empty() => {
                let (m, s) = mean_std(&v);
                format!("{},{}", format_float(m), format_float(s))
            }
            _ => ",".to_string(),
        }
    };
    for (label, runs) in groups {
        let len = runs.iter().map(|r| r.len()).min().unwrap_or(0);
        for k in 0..len {
            let first = runs[0][k];
            let col = |f: &dyn Fn(&RunRow) -> Option<f64>| stat(runs.iter().map(|r| f(&r[k])).collect());
            text.push_str(&format!(
                "{label},{},{},{},{},{},{},{}",
                first.t,
                first.oracle_count,
                runs.len(),
                col(&|r| r.objective),
                col(&|r| r.gap),
                col(&|r| r.dist_gap),
                col(&|r| Some(r.dual_norm)),
            ));
            if aux.is_some() {
                text.push(',');
                text.push_str(&col(&|r| r.aux));
            }
            text.push('\n');
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
