//! Browser demo: outer-function shapes, the dual proximal step, and a small
//! convergence race on the hard smooth instance.
//!
//! The plain functions are usable natively; the `#[wasm_bindgen]` wrappers
//! return JSON strings for the page in `www/`.

use std::sync::Arc;

use alexr::algorithms::{AlexrConfig, Averaging, BaselineConfig, BaselineVariant, Solver, SolverConfig};
use alexr::instances::build_hard_smooth;
use alexr::outer::{
    prox_dual_quadratic, ChiSquareOuter, HalfSquareShift, HingeHard, HuberHard, Identity, OuterFunction,
    PositivePart, ScaledPositivePart,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const OUTER_KINDS: [&str; 7] = ["cvar", "positive_part", "chi2", "huber", "hinge", "identity", "half_square"];

/// Builds a shipped outer function from its name and one shape parameter.
pub fn make_outer(kind: &str, param: f64) -> Result<Arc<dyn OuterFunction>, String> {
    let f: Arc<dyn OuterFunction> = match kind {
        "cvar" => Arc::new(ScaledPositivePart::new(param).map_err(|e| e.to_string())?),
        "positive_part" => Arc::new(PositivePart),
        "chi2" => Arc::new(ChiSquareOuter::new(param, 0.5 * (3.0 + 3.0 * param)).map_err(|e| e.to_string())?),
        "huber" => Arc::new(HuberHard::new(param).map_err(|e| e.to_string())?),
        "hinge" => Arc::new(HingeHard::new(1.0, param).map_err(|e| e.to_string())?),
        "identity" => Arc::new(Identity),
        "half_square" => Arc::new(HalfSquareShift::new(param)),
        other => return Err(format!("unknown outer function `{other}`")),
    };
    Ok(f)
}

#[derive(Debug, Clone, Serialize)]
pub struct OuterProfile {
    pub name: String,
    pub u: Vec<f64>,
    pub value: Vec<f64>,
    pub subgradient: Vec<f64>,
    pub y: Vec<f64>,
    pub conjugate: Vec<f64>,
}

/// `f` and `f'` on `[lo, hi]`, `f^*` on the dual domain (cut to `[lo, hi]` when unbounded).
pub fn outer_profile(kind: &str, param: f64, lo: f64, hi: f64, points: usize) -> Result<OuterProfile, String> {
    if !(hi > lo) || points < 2 {
        return Err("need lo < hi and at least 2 points".into());
    }
    let f = make_outer(kind, param)?;
    let grid = |a: f64, b: f64| -> Vec<f64> {
        (0..points)
            .map(|k| a + (b - a) * k as f64 / (points - 1) as f64)
            .collect()
    };
    let u = grid(lo, hi);
    let dom = f.dual_domain();
    let (ya, yb) = (dom.lo.max(lo), dom.hi.min(hi));
    let y = if yb > ya { grid(ya, yb) } else { vec![ya] };
    Ok(OuterProfile {
        name: f.name().to_string(),
        value: u.iter().map(|&v| f.value(v)).collect(),
        subgradient: u.iter().map(|&v| f.subgradient(v)).collect(),
        conjugate: y.iter().map(|&v| f.conjugate(v)).collect(),
        u,
        y,
    })
}

/// One dual step `argmax_v { v g - f^*(v) - (tau/2)(v - y_prev)^2 }`.
pub fn dual_step(kind: &str, param: f64, y_prev: f64, g: f64, tau: f64) -> Result<f64, String> {
    if !(tau > 0.0) {
        return Err("tau must be positive".into());
    }
    let f = make_outer(kind, param)?;
    Ok(prox_dual_quadratic(f.as_ref(), y_prev, g, tau))
}

#[derive(Debug, Clone, Serialize)]
pub struct Curve {
    pub solver: String,
    pub oracle_count: Vec<u64>,
    pub gap: Vec<f64>,
}

/// ALEXR (strongly convex preset) against BSGD, SOX and MSVR on the hard
/// smooth instance from the corner `x = 1`, objective gap against oracle calls.
pub fn hard_race(n: usize, nu: f64, sigma: f64, theta: f64, iterations: u64, seed: u64) -> Result<Vec<Curve>, String> {
    let inst = build_hard_smooth(n, nu, sigma).map_err(|e| e.to_string())?;
    let p = &inst.problem;
    let s = (n / 10).max(1);
    let mut alexr = AlexrConfig::strongly_convex(inst.mu, n, s, 1, theta, iterations, seed).map_err(|e| e.to_string())?;
    alexr.averaging = Averaging::Last;
    alexr.x0 = 1.0;
    let step = 1.0 / alexr.eta;
    let baseline = |variant, gamma| {
        SolverConfig::Baseline(BaselineConfig {
            variant,
            step,
            gamma,
            outer_batch: s,
            inner_batch: 1,
            iterations,
            seed,
            averaging: Averaging::Last,
            x0: 1.0,
        })
    };
    let configs = [
        SolverConfig::Alexr(alexr),
        baseline(BaselineVariant::Bsgd, 1.0),
        baseline(BaselineVariant::Sox, 0.5),
        baseline(BaselineVariant::Msvr, 0.5),
    ];
    let every = (iterations / 200).max(1);
    configs
        .into_iter()
        .map(|cfg| {
            let mut solver = Solver::new(p, cfg).map_err(|e| e.to_string())?;
            let mut curve = Curve {
                solver: solver.config().name().to_string(),
                oracle_count: Vec::new(),
                gap: Vec::new(),
            };
            for t in 0..=iterations {
                if t > 0 {
                    solver.step().map_err(|e| e.to_string())?;
                }
                if t % every == 0 || t == iterations {
                    let row = solver.observe(0, None);
                    curve.oracle_count.push(row.oracle_count);
                    curve.gap.push(row.gap.unwrap_or(f64::NAN));
                }
            }
            Ok(curve)
        })
        .collect()
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = outerProfile)]
pub fn outer_profile_js(kind: &str, param: f64, lo: f64, hi: f64, points: usize) -> Result<String, JsValue> {
    to_js(outer_profile(kind, param, lo, hi, points))
}

#[wasm_bindgen(js_name = dualStep)]
pub fn dual_step_js(kind: &str, param: f64, y_prev: f64, g: f64, tau: f64) -> Result<f64, JsValue> {
    dual_step(kind, param, y_prev, g, tau).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = hardRace)]
pub fn hard_race_js(n: usize, nu: f64, sigma: f64, theta: f64, iterations: u32, seed: u32) -> Result<String, JsValue> {
    to_js(hard_race(n, nu, sigma, theta, iterations as u64, seed as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_outer_has_a_profile() {
        for kind in OUTER_KINDS {
            let p = outer_profile(kind, 0.5, -2.0, 2.0, 41).unwrap();
            assert_eq!(p.u.len(), 41);
            assert!(p.value.iter().all(|v| v.is_finite()), "{kind}");
            assert!(p.conjugate.iter().all(|v| v.is_finite()), "{kind}");
        }
        assert!(outer_profile("nope", 0.5, -1.0, 1.0, 10).is_err());
        assert!(outer_profile("cvar", 0.5, 1.0, -1.0, 10).is_err());
    }

    #[test]
    fn dual_step_for_cvar_is_a_clamp() {
        // argmax over [0, 2] of v g - (tau/2)(v - y)^2 = clamp(y + g / tau)
        assert_eq!(dual_step("cvar", 0.5, 0.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(dual_step("cvar", 0.5, 1.5, 3.0, 1.0).unwrap(), 2.0);
        assert_eq!(dual_step("cvar", 0.5, 0.5, -3.0, 1.0).unwrap(), 0.0);
        assert!(dual_step("cvar", 0.5, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn race_is_keyed_by_oracle_count_and_alexr_converges() {
        let curves = hard_race(20, 0.3, 1.0, 0.999, 20_000, 1).unwrap();
        assert_eq!(curves.len(), 4);
        for c in &curves {
            assert_eq!(c.oracle_count.len(), c.gap.len());
            assert!(c.oracle_count.windows(2).all(|w| w[0] < w[1]));
        }
        let alexr = &curves[0];
        assert_eq!(alexr.solver, "alexr");
        assert!(alexr.gap.last().unwrap() < &(0.1 * alexr.gap[0]));
    }

    #[test]
    fn json_wrappers() {
        let s = to_js(outer_profile("chi2", 1.0, -1.0, 1.0, 5)).unwrap();
        assert!(s.starts_with('{') && s.contains("\"conjugate\""));
    }
}
