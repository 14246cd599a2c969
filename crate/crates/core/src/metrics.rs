//! Gaps, exact partial AUC, worst-group statistics, dual radius and rate fits.

use serde::{Deserialize, Serialize};

use crate::algorithms::PsiMode;
use crate::problem::{evaluate_objective, ProblemInstance};
use crate::{Error, Result};

/// `F(x) - f_star`.
pub fn objective_gap(problem: &ProblemInstance, x: &[f64], f_star: f64) -> Result<f64> {
    Ok(evaluate_objective(problem, x)? - f_star)
}

/// `(mu/2) ||x - x_star||^2`.
pub fn distance_sq_gap(x: &[f64], x_star: &[f64], mu: f64) -> f64 {
    0.5 * mu * x.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Exact partial AUC as an integer ratio: the numerator counts
/// half-pairs (a win is 2, a tie 1), the denominator is `2 k n_-`.
pub fn pauc_exact_ratio(pos_scores: &[f64], neg_scores: &[f64], alpha: f64) -> Result<(u64, u64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameters(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let k = (pos_scores.len() as f64 * (1.0 - alpha)).floor() as usize;
    if k == 0 || neg_scores.is_empty() {
        return Err(Error::DegenerateSelection(format!(
            "k = {k} positives and {} negatives selected",
            neg_scores.len()
        )));
    }
    if pos_scores.iter().chain(neg_scores).any(|s| s.is_nan()) {
        return Err(Error::InvalidParameters("scores contain NaN".into()));
    }
    let mut pos = pos_scores.to_vec();
    pos.sort_by(f64::total_cmp);
    let mut neg = neg_scores.to_vec();
    neg.sort_by(f64::total_cmp);
    let mut half_units = 0u64;
    for &s in &pos[..k] {
        let below = neg.partition_point(|&v| v < s);
        let not_above = neg.partition_point(|&v| v <= s);
        half_units += 2 * below as u64 + (not_above - below) as u64;
    }
    Ok((half_units, 2 * (k * neg.len()) as u64))
}

/// Partial AUC over the `floor(n_+ (1 - alpha))` lowest-scoring positives, ties counted as 1/2.
pub fn pauc_exact(pos_scores: &[f64], neg_scores: &[f64], alpha: f64) -> Result<f64> {
    let (num, den) = pauc_exact_ratio(pos_scores, neg_scores, alpha)?;
    Ok(num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupMetricMode {
    /// Higher is worse (losses, risks).
    #[serde(alias = "mean")]
    Loss,
    /// Lower is worse.
    Accuracy,
}

/// Mean of the `ceil(alpha n)` worst per-group values.
pub fn worst_fraction_group_metric(values: &[f64], alpha: f64, mode: GroupMetricMode) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::DegenerateSelection("no groups".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) || alpha * (values.len() as f64) < 1.0 - 1e-12 {
        return Err(Error::DegenerateSelection(format!(
            "alpha = {alpha} selects no group out of {}",
            values.len()
        )));
    }
    let k = ((alpha * values.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut v = values.to_vec();
    match mode {
        GroupMetricMode::Loss => v.sort_by(|a, b| b.total_cmp(a)),
        GroupMetricMode::Accuracy => v.sort_by(f64::total_cmp),
    }
    Ok(v[..k].iter().sum::<f64>() / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualRadiusReport {
    pub omega_y0: f64,
    pub worst_case: f64,
    pub sparsity_fraction: f64,
}

/// Per-block maximizer of `v g_i(x) - f_i^*(v)`, i.e. a subgradient of `f_i` at `g_i(x)`.
pub fn dual_maximizers(problem: &ProblemInstance, x: &[f64]) -> Result<Vec<f64>> {
    (0..problem.n())
        .map(|i| {
            let g = problem
                .inner(i)
                .exact_value(x)
                .ok_or(Error::UnsupportedExactEvaluation { component: i })?;
            Ok(problem.outer(i).subgradient(g))
        })
        .collect()
}

/// `sum_i U_psi(y~_i, y0_i)` against its worst case `n C_f^2 / 2`, plus the share of zero blocks.
pub fn dual_radius(
    problem: &ProblemInstance,
    y_tilde: &[f64],
    y0: &[f64],
    psi_mode: PsiMode,
) -> Result<DualRadiusReport> {
    let n = problem.n();
    if y_tilde.len() != n || y0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y_tilde.len().min(y0.len()),
        });
    }
    let mut omega = 0.0;
    for i in 0..n {
        let (a, b) = (y_tilde[i], y0[i]);
        omega += match psi_mode {
            PsiMode::Quadratic => 0.5 * (a - b) * (a - b),
            PsiMode::Conjugate | PsiMode::ConjugateExplicit => {
                let f = problem.outer(i);
                let slope = f.conjugate_gradient(b).ok_or(Error::NotSmooth(f.name()))?;
                f.conjugate(a) - f.conjugate(b) - slope * (a - b)
            }
        };
    }
    let c_f = (0..n).map(|i| problem.outer(i).lipschitz()).fold(0.0, f64::max);
    let zeros = y_tilde.iter().filter(|v| v.abs() <= 1e-12).count();
    Ok(DualRadiusReport {
        omega_y0: omega,
        worst_case: n as f64 * c_f * c_f / 2.0,
        sparsity_fraction: zeros as f64 / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(ln eps, ln T)`.
    pub points: Vec<(f64, f64)>,
}

/// Least-squares line through `(ln eps, ln T)`.
pub fn fit_rate(targets: &[(f64, f64)]) -> Result<RateFit> {
    if targets.len() < 3 {
        return Err(Error::InsufficientPoints {
            required: 3,
            got: targets.len(),
        });
    }
    if targets.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::InvalidParameters("epsilons must be strictly decreasing".into()));
    }
    if targets.iter().any(|&(e, t)| !(e > 0.0 && t > 0.0)) {
        return Err(Error::InvalidParameters("epsilons and iteration counts must be positive".into()));
    }
    let points: Vec<(f64, f64)> = targets.iter().map(|&(e, t)| (e.ln(), t.ln())).collect();
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points,
    })
}

/// First `t` at which the curve is at or below `eps`.
pub fn hitting_time(curve: &[(u64, f64)], eps: f64) -> Option<u64> {
    curve.iter().find(|&&(_, v)| v <= eps).map(|&(t, _)| t)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}
