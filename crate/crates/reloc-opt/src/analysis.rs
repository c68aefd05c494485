//! Long-horizon analysis: the flat-wage closed form, horizon sweeps, growth
//! rate fits, and the stalled-peak bound.
//!
//! The flat-wage problem (no location dependence, z ≡ 0) is solvable in
//! closed form and serves three roles: an oracle for the solver on constant
//! profiles, the initial multiplier guess for every solve, and a domination
//! bound (a wage ceiling can only raise terminal wealth).

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{ModelParams, PositiveBand, Regime, WageProfile};
use crate::shooting::{solve_extremal, ShootConfig};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("stall bound applies only when ρ ∈ (r(1-θ), r); regime here is {0}")]
    WrongRegime(Regime),
    #[error("stall bound needs a concave wage right of the start: w''({x}) = {curvature:.3e}")]
    NotConcave { x: f64, curvature: f64 },
    #[error("need at least {needed} converged sweep points, have {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("profile has no single interior peak")]
    NoPeak,
}

/// Closed-form solution of the flat-wage problem at wage level `wage`.
///
/// With `k = (ρ-r)/θ` and `s = k + r = (ρ - r(1-θ))/θ`:
///
/// ```text
/// ā(T) = e^{rT}(a₀ + W(1-e^{-rT})/r) / (1 + e^{rT} p^{(θ-1)/θ} Q(T)),
/// Q(T) = e^{kT}(1-e^{-sT})/s,    c(t) = p^{-1/θ} ā e^{k(T-t)}
/// ```
///
/// and the boundary case s = 0 replaces `(1-e^{-sT})/s` by `T` (the code
/// evaluates it through `exp_m1`, which is uniformly accurate near s = 0).
#[derive(Debug, Clone, Copy)]
pub struct ConstantWageSolution {
    /// ā(T), the optimal terminal asset level.
    pub terminal_assets: f64,
    /// λ₁ = e^{(r-ρ)T} ā^{-θ}.
    pub lambda1: f64,
    /// Value of the objective at the optimum.
    pub objective: f64,
    /// Consumption growth exponent: c(t) ∝ e^{-kt}, k = (ρ-r)/θ.
    pub k: f64,
    horizon: f64,
    p_root: f64,
}

impl ConstantWageSolution {
    pub fn consumption(&self, t: f64) -> f64 {
        self.p_root * self.terminal_assets * (self.k * (self.horizon - t)).exp()
    }

    pub fn initial_consumption(&self) -> f64 {
        self.consumption(0.0)
    }
}

/// `(1 - e^{-sT})/s`, continuous through s = 0.
fn annuity_like(s: f64, horizon: f64) -> f64 {
    if s == 0.0 {
        horizon
    } else {
        -(-s * horizon).exp_m1() / s
    }
}

pub fn closed_form_constant_wage(params: &ModelParams, wage: f64) -> ConstantWageSolution {
    let t = params.horizon;
    let k = (params.rho - params.r) / params.theta;
    let s = k + params.r;
    let e_rt = (params.r * t).exp();
    let resources = params.a0 + wage * (1.0 - (-params.r * t).exp()) / params.r;
    let q = (k * t).exp() * annuity_like(s, t);
    let p_pow = params.p.powf((params.theta - 1.0) / params.theta);
    let a_bar = e_rt * resources / (1.0 + e_rt * p_pow * q);

    let p_root = params.p.powf(-1.0 / params.theta);
    let c_start = p_root * a_bar * (k * t).exp();
    let one_minus = 1.0 - params.theta;
    let objective = c_start.powf(one_minus) / one_minus * annuity_like(s, t)
        + (-params.rho * t).exp() * a_bar.powf(one_minus) / one_minus;
    let lambda1 = ((params.r - params.rho) * t).exp() * a_bar.powf(-params.theta);

    ConstantWageSolution { terminal_assets: a_bar, lambda1, objective, k, horizon: t, p_root }
}

/// Terminal wealth of the flat-wage problem at the profile's interior
/// supremum: an upper bound for terminal wealth under the actual profile.
pub fn domination_bound(params: &ModelParams, profile: &WageProfile) -> f64 {
    closed_form_constant_wage(params, profile.interior_sup()).terminal_assets
}

/// One horizon in a sweep.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub horizon: f64,
    pub terminal_assets: f64,
    pub lambda1: f64,
    pub terminal_location: f64,
    pub objective: f64,
    pub regime: Regime,
    pub converged: bool,
    pub error: Option<String>,
}

/// Inclusive horizon grid with `steps` points from `t_min` to `t_max`.
pub fn horizon_grid(t_min: f64, t_max: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![t_min];
    }
    (0..steps)
        .map(|i| t_min + (t_max - t_min) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Solve the model across horizons (in parallel); failures are recorded,
/// not fatal.
pub fn sweep_horizon(
    params: &ModelParams,
    profile: &WageProfile,
    cfg: &ShootConfig,
    horizons: &[f64],
) -> Vec<SweepRecord> {
    horizons
        .par_iter()
        .map(|t| {
            let p = ModelParams { horizon: *t, ..*params };
            match solve_extremal(&p, profile, cfg) {
                Ok(ext) => SweepRecord {
                    horizon: *t,
                    terminal_assets: ext.trajectory.terminal_assets(),
                    lambda1: ext.trajectory.lambda1,
                    terminal_location: ext.trajectory.terminal_location(),
                    objective: ext.objective,
                    regime: ext.regime,
                    converged: true,
                    error: None,
                },
                Err(e) => SweepRecord {
                    horizon: *t,
                    terminal_assets: f64::NAN,
                    lambda1: f64::NAN,
                    terminal_location: f64::NAN,
                    objective: f64::NAN,
                    regime: p.regime(),
                    converged: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Which sweep column a growth fit reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthField {
    TerminalAssets,
    Lambda1,
}

/// Least-squares line through `(T, log field)` on the largest-horizon half
/// of the converged records.
#[derive(Debug, Clone, Copy)]
pub struct GrowthFit {
    pub slope: f64,
    pub intercept: f64,
    /// sup |log field - fitted line| over the fitted points.
    pub residual_sup: f64,
    pub points: usize,
}

/// Fit the asymptotic growth exponent of a sweep column. With
/// `boundary_correction` the fit reads `log field + log(1+T)`, removing the
/// leading polynomial factor of the boundary regime (exact when its exponent
/// γ is 1; the window tolerances in callers absorb larger γ).
pub fn fit_growth_rate(
    records: &[SweepRecord],
    field: GrowthField,
    boundary_correction: bool,
) -> Result<GrowthFit, AnalysisError> {
    let mut pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.converged)
        .map(|r| {
            let v = match field {
                GrowthField::TerminalAssets => r.terminal_assets,
                GrowthField::Lambda1 => r.lambda1,
            };
            let mut y = v.ln();
            if boundary_correction {
                y += (1.0 + r.horizon).ln();
            }
            (r.horizon, y)
        })
        .filter(|(_, y)| y.is_finite())
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = pts.len() / 2;
    let tail = &pts[half..];
    if tail.len() < 3 {
        return Err(AnalysisError::TooFewPoints { needed: 3, got: tail.len() });
    }
    let n = tail.len() as f64;
    let sx: f64 = tail.iter().map(|p| p.0).sum();
    let sy: f64 = tail.iter().map(|p| p.1).sum();
    let sxx: f64 = tail.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = tail.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let residual_sup = tail
        .iter()
        .map(|(t, y)| (y - (intercept + slope * t)).abs())
        .fold(0.0f64, f64::max);
    Ok(GrowthFit { slope, intercept, residual_sup, points: tail.len() })
}

/// max/min ratio of λ₁ over converged records with horizon ≥ `t_min`;
/// a bounded multiplier shows up as a ratio near 1.
pub fn lambda_tail_flatness(records: &[SweepRecord], t_min: f64) -> Result<f64, AnalysisError> {
    let tail: Vec<f64> = records
        .iter()
        .filter(|r| r.converged && r.horizon >= t_min && r.lambda1.is_finite())
        .map(|r| r.lambda1)
        .collect();
    if tail.len() < 2 {
        return Err(AnalysisError::TooFewPoints { needed: 2, got: tail.len() });
    }
    let max = tail.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let min = tail.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    Ok(max / min)
}

/// Upper bound on the terminal location when ρ ∈ (r(1-θ), r) and the wage is
/// concave right of the start:
///
/// ```text
/// X(T) ≤ x₀ + λ₁(T) |w'(x₀)| / (2 ρ (r-ρ) η)
/// ```
///
/// The walker can stall strictly short of the peak when this bound bites.
pub fn stall_bound(
    params: &ModelParams,
    profile: &WageProfile,
    lambda1: f64,
) -> Result<f64, AnalysisError> {
    match params.regime() {
        Regime::Positive(PositiveBand::BelowInterest) => {}
        other => return Err(AnalysisError::WrongRegime(other)),
    }
    // Concavity on [x₀, 1]: the bound's comparison argument needs
    // w'(x) ≤ w'(x₀) to the right of the start.
    let m = 64;
    for i in 0..=m {
        let x = params.x0 + (1.0 - params.x0) * i as f64 / m as f64;
        let s = profile.eval_unchecked(x);
        if s.curvature > 1e-12 {
            return Err(AnalysisError::NotConcave { x, curvature: s.curvature });
        }
    }
    let slope0 = profile.eval_unchecked(params.x0).slope.abs();
    Ok(params.x0
        + lambda1 * slope0 / (2.0 * params.rho * (params.r - params.rho) * params.eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakGapMode {
    /// Below-interest positive regime: compare X(T) against the stall bound.
    StallBound,
    /// Everywhere else: the gap to the peak should shrink with the horizon.
    Trend,
}

#[derive(Debug, Clone, Copy)]
pub struct PeakGapPoint {
    pub horizon: f64,
    pub terminal_location: f64,
    /// x₁ - X(T).
    pub gap: f64,
    /// Stall bound at this horizon's multiplier (StallBound mode only).
    pub bound: Option<f64>,
}

/// How the terminal location approaches (or fails to approach) the peak
/// across a sweep.
#[derive(Debug, Clone)]
pub struct PeakGapReport {
    pub mode: PeakGapMode,
    pub peak_location: f64,
    pub points: Vec<PeakGapPoint>,
    /// Trend mode: gaps never increase with the horizon (tiny slack).
    pub gap_decreasing: bool,
    /// StallBound mode: every X(T) respects its bound.
    pub bound_respected: bool,
}

pub fn peak_gap_report(
    params: &ModelParams,
    profile: &WageProfile,
    records: &[SweepRecord],
) -> Result<PeakGapReport, AnalysisError> {
    let peak = profile.single_peak().ok_or(AnalysisError::NoPeak)?;
    let mode = match params.regime() {
        Regime::Positive(PositiveBand::BelowInterest) => PeakGapMode::StallBound,
        _ => PeakGapMode::Trend,
    };
    let mut converged: Vec<&SweepRecord> = records.iter().filter(|r| r.converged).collect();
    converged.sort_by(|a, b| a.horizon.total_cmp(&b.horizon));
    if converged.len() < 2 {
        return Err(AnalysisError::TooFewPoints { needed: 2, got: converged.len() });
    }
    let mut points = Vec::with_capacity(converged.len());
    let mut bound_respected = true;
    for r in &converged {
        let bound = match mode {
            PeakGapMode::StallBound => {
                let p = ModelParams { horizon: r.horizon, ..*params };
                let b = stall_bound(&p, profile, r.lambda1)?;
                if r.terminal_location > b + 1e-9 {
                    bound_respected = false;
                }
                Some(b)
            }
            PeakGapMode::Trend => None,
        };
        points.push(PeakGapPoint {
            horizon: r.horizon,
            terminal_location: r.terminal_location,
            gap: peak.location - r.terminal_location,
            bound,
        });
    }
    let gap_decreasing = points.windows(2).all(|w| w[1].gap <= w[0].gap + 1e-9);
    Ok(PeakGapReport {
        mode,
        peak_location: peak.location,
        points,
        gap_decreasing,
        bound_respected,
    })
}
