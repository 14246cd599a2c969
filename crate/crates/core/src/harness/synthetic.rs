//! Synthetic datasets on disk, each with a starter experiment config.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::instances::{build_synthetic_gdro, build_synthetic_pauc, write_grouped_csv, write_libsvm, LibsvmData};
use crate::{Error, Result};

/// Parses `key=value` items; an item may hold several pairs separated by commas.
pub fn parse_params<S: AsRef<str>>(items: &[S]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for item in items {
        for pair in item.as_ref().split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::config("params", format!("expected key=value, got `{pair}`")))?;
            let k = k.trim().to_string();
            if out.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::config(format!("params.{k}"), "given twice"));
            }
        }
    }
    Ok(out)
}

struct Params {
    map: BTreeMap<String, String>,
}

impl Params {
    fn get<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.map.remove(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::config(format!("params.{key}"), format!("cannot parse `{v}`"))),
        }
    }

    fn finish(self, allowed: &str) -> Result<()> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::config(format!("params.{k}"), format!("unknown parameter, expected one of {allowed}"))),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes a synthetic `gdro` (CSV) or `pauc` (LIBSVM) dataset plus an
/// `experiment.toml` that runs ALEXR on it, and returns the written paths.
pub fn emit_synthetic(instance: &str, params: BTreeMap<String, String>, out: &Path) -> Result<Vec<PathBuf>> {
    let mut p = Params { map: params };
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    match instance {
        "gdro" => {
            let n_groups: usize = p.get("n_groups", 20)?;
            let d: usize = p.get("d", 10)?;
            let spg: usize = p.get("samples_per_group", 200)?;
            let het: f64 = p.get("heterogeneity", 0.5)?;
            let seed: u64 = p.get("seed", 0)?;
            let alpha: f64 = p.get("alpha", 0.15)?;
            p.finish("n_groups, d, samples_per_group, heterogeneity, seed, alpha")?;
            let data = build_synthetic_gdro(n_groups, d, spg, het, &mut ChaCha8Rng::seed_from_u64(seed))
                .map_err(|e| Error::config("params", e.to_string()))?;
            let csv_path = out.join("gdro.csv");
            let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
            write_grouped_csv(&data, BufWriter::new(file)).map_err(|e| match e {
                Error::Io { message, .. } => Error::Io {
                    path: csv_path.display().to_string(),
                    message,
                },
                other => other,
            })?;
            let s = n_groups.min(8);
            let cfg = format!(
                r#"seeds = [1, 2, 3, 4, 5]
eval_every = 500

[problem]
kind = "gdro_csv"
path = "gdro.csv"
group_column = "group"
label_column = "label"
weight_decay = 0.05
divergence = {{ kind = "cvar", alpha = {alpha:?} }}

[[solvers]]
kind = "alexr"
outer_batch = {s}
inner_batch = 8
iterations = 20000
averaging = "uniform"
eta = [10.0, 20.0, 50.0]
tau = [0.5, 1.0]
theta = 0.0

[[solvers]]
kind = "bsgd"
outer_batch = {s}
inner_batch = 8
iterations = 20000
averaging = "uniform"
step = [0.02, 0.05, 0.1]
"#
            );
            let cfg_path = out.join("experiment.toml");
            write(&cfg_path, &cfg)?;
            Ok(vec![csv_path, cfg_path])
        }
        "pauc" => {
            let n_pos: usize = p.get("n_pos", 100)?;
            let n_neg: usize = p.get("n_neg", 400)?;
            let d: usize = p.get("d", 10)?;
            let sep: f64 = p.get("separation", 1.5)?;
            let alpha: f64 = p.get("alpha", 0.5)?;
            let seed: u64 = p.get("seed", 0)?;
            p.finish("n_pos, n_neg, d, separation, alpha, seed")?;
            let data = build_synthetic_pauc(n_pos, n_neg, d, sep, alpha, &mut ChaCha8Rng::seed_from_u64(seed))
                .map_err(|e| Error::config("params", e.to_string()))?;
            let mut lib = LibsvmData {
                dim: d,
                ..Default::default()
            };
            for (rows, label) in [(&data.positives, 1.0), (&data.negatives, -1.0)] {
                for r in rows {
                    lib.rows.push(r.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect());
                    lib.labels.push(label);
                }
            }
            let lib_path = out.join("pauc.libsvm");
            let file = fs::File::create(&lib_path).map_err(|e| Error::io(&lib_path, e))?;
            write_libsvm(&lib, BufWriter::new(file)).map_err(|e| Error::io(&lib_path, e))?;
            let cfg = format!(
                r#"seeds = [1, 2, 3, 4, 5]
eval_every = 500

[problem]
kind = "pauc_libsvm"
path = "pauc.libsvm"
alpha = {alpha:?}
surrogate = "squared_hinge"
weight_decay = 0.001

[[solvers]]
kind = "alexr"
outer_batch = 8
inner_batch = 8
iterations = 20000
averaging = "uniform"
eta = [10.0, 50.0]
tau = [0.5, 1.0]
theta = 0.0

[[solvers]]
kind = "sox"
outer_batch = 8
inner_batch = 8
iterations = 20000
averaging = "uniform"
step = [0.02, 0.1]
gamma = [0.5, 0.9]
"#
            );
            let cfg_path = out.join("experiment.toml");
            write(&cfg_path, &cfg)?;
            Ok(vec![lib_path, cfg_path])
        }
        other => Err(Error::config("instance", format!("unknown instance `{other}`, expected gdro or pauc"))),
    }
}
