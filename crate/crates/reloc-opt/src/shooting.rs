//! Two-level shooting solver for the extremal system.
//!
//! Inner level: for a fixed wealth multiplier λ₁ the location problem is a
//! two-point boundary value problem in `(x, y)` with `x(0) = x₀` and
//! `y(T) = 0`. The shooting map `g(α) = y(T; α)` satisfies
//! `g(α) = α - M(α)` with `|M| ≤ M₀ = λ₁ sup|w'| (1-e^{-rT})/r`, so
//! `[-(M₀+1), M₀+1]` always brackets a root and Brent does the rest.
//!
//! Outer level: λ₁ must reproduce itself through the terminal wealth map
//! `G(λ₁) = e^{(r-ρ)T} a(T; λ₁)^{-θ}`. `R(λ) = G(λ) - λ` is strictly
//! decreasing (raising λ lowers consumption, raises a(T), lowers G), so a
//! bracketed secant/bisection hybrid is globally convergent. A damped fixed
//! point `λ ← λ + ω R(λ)` is *not* used as the iteration: the map's slope at
//! the root is `-β` with `β = e^{rT}·(present value of spending)/a(T)`,
//! which exceeds 1 by orders of magnitude on long horizons, so that
//! iteration diverges for any fixed ω ∈ (0,1]. The configured damping only
//! shapes the first probe step.
//!
//! Inner route selection: the forward shooting map is exponentially
//! ill-conditioned in the horizon. Its variational modes grow like e^{κt},
//! so one ulp of α becomes e^{κT}·ulp of y(T) and the root stops being
//! resolvable in f64 once that product passes the α tolerance. When the
//! estimated κT exceeds [`FORWARD_LOG_BUDGET`], the inner problem is solved
//! in its second-order two-point form instead (see [`crate::bvp`]), which
//! has no growing mode; the outer level is identical on both routes.

use thiserror::Error;

use crate::bvp;
use crate::dynamics::{
    self, coupling, integrate_assets, integrate_cauchy, integrate_cauchy_with_variation,
    AssetIntegration, CauchyPath, ExpTable, Trajectory,
};
use crate::model::{
    compute_control_caps, ControlCaps, ModelError, ModelParams, Regime, WageProfile,
};
use crate::roots::{self, RootError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootConfig {
    /// Tolerance on the terminal costate |y(T)|.
    pub alpha_tol: f64,
    /// Relative tolerance on the multiplier fixed point |G(λ)-λ|/λ.
    pub lambda_tol: f64,
    /// Scale of the first outer probe step. Must lie in (0, 1].
    pub damping: f64,
    /// Outer evaluation budget.
    pub max_outer: usize,
    /// Sample count for [`alpha_scan`].
    pub grid_points: usize,
    /// Override for the integration step count (`None`: 2048 per time unit).
    pub n_steps: Option<usize>,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig {
            alpha_tol: 1e-10,
            lambda_tol: 1e-10,
            damping: 0.5,
            max_outer: 80,
            grid_points: 64,
            n_steps: None,
        }
    }
}

impl ShootConfig {
    pub fn steps(&self, horizon: f64) -> usize {
        match self.n_steps {
            Some(n) => {
                let n = n.max(2);
                n + (n & 1)
            }
            None => dynamics::default_steps(horizon),
        }
    }
}

#[derive(Debug, Error)]
pub enum ShootError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "shooting bracket failed at lambda1 = {lambda1}: g({lo:.6e}) = {g_lo:.6e} and \
         g({hi:.6e}) = {g_hi:.6e} share a sign"
    )]
    Bracket { lambda1: f64, lo: f64, hi: f64, g_lo: f64, g_hi: f64 },
    #[error("inner root search stopped after {evaluations} evaluations with |g| = {last:.3e}")]
    AlphaIterations { evaluations: usize, last: f64 },
    #[error(
        "multiplier loop used its {evaluations}-evaluation budget \
         (last relative residual {residual:.3e})"
    )]
    OuterIterations { evaluations: usize, residual: f64 },
    #[error("interior path solve failed: {0}")]
    Path(#[from] bvp::BvpError),
    #[error("candidate extremal failed admissibility checks: {}", issues.join("; "))]
    Flagged { issues: Vec<String>, extremal: Box<Extremal> },
}

/// Terminal costate reached from initial costate `alpha`.
pub fn g_alpha(
    params: &ModelParams,
    profile: &WageProfile,
    lambda1: f64,
    alpha: f64,
    table: &ExpTable,
) -> f64 {
    integrate_cauchy(params, profile, lambda1, alpha, table).terminal_y()
}

/// dg/dα by the variation equations (exact derivative of the discrete flow).
pub fn shooting_slope(
    params: &ModelParams,
    profile: &WageProfile,
    lambda1: f64,
    alpha: f64,
    table: &ExpTable,
) -> f64 {
    integrate_cauchy_with_variation(params, profile, lambda1, alpha, table)
        .terminal_sensitivity()
}

/// Half-width of the guaranteed α bracket: `M₀ + 1`.
pub fn bracket_halfwidth(params: &ModelParams, profile: &WageProfile, lambda1: f64) -> f64 {
    let annuity = (1.0 - (-params.r * params.horizon).exp()) / params.r;
    lambda1 * profile.sup_abs_slope() * annuity + 1.0
}

#[derive(Debug, Clone, Copy)]
pub struct AlphaSolve {
    pub alpha: f64,
    /// g(α) at the returned root.
    pub g: f64,
    pub evaluations: usize,
}

/// Find the initial costate closing the boundary value problem at fixed λ₁.
///
/// `g(0)` is probed first: a stationary start (`w'(x₀) = 0`) makes 0 an
/// exact root, and the probe's sign picks the bracket side otherwise.
pub fn solve_alpha(
    params: &ModelParams,
    profile: &WageProfile,
    lambda1: f64,
    table: &ExpTable,
    cfg: &ShootConfig,
) -> Result<AlphaSolve, ShootError> {
    let g0 = g_alpha(params, profile, lambda1, 0.0, table);
    if g0.abs() <= cfg.alpha_tol {
        return Ok(AlphaSolve { alpha: 0.0, g: g0, evaluations: 1 });
    }
    let b = bracket_halfwidth(params, profile, lambda1);
    let (lo, hi) = if g0 < 0.0 { (0.0, b) } else { (-b, 0.0) };
    let xtol = 1e-12 * (1.0 + b);
    let eval = |a: f64| -> Result<f64, std::convert::Infallible> {
        Ok(g_alpha(params, profile, lambda1, a, table))
    };
    match roots::brent(eval, lo, hi, cfg.alpha_tol, xtol, 200) {
        Ok(root) => Ok(AlphaSolve {
            alpha: root.x,
            g: root.f,
            evaluations: root.evaluations + 1,
        }),
        Err(RootError::NoSignChange { f_lo, f_hi }) => Err(ShootError::Bracket {
            lambda1,
            lo,
            hi,
            g_lo: f_lo,
            g_hi: f_hi,
        }),
        Err(RootError::IterationLimit { last_f, .. }) => Err(ShootError::AlphaIterations {
            evaluations: 200,
            last: last_f.abs(),
        }),
        Err(RootError::Objective(never)) => match never {},
    }
}

/// Shooting map sampled over the guaranteed bracket, with every sign change
/// polished into a root. Lists the extremal candidates of the location
/// subproblem at fixed λ₁.
#[derive(Debug, Clone)]
pub struct AlphaScan {
    pub alpha: Vec<f64>,
    pub g: Vec<f64>,
    pub roots: Vec<f64>,
}

pub fn alpha_scan(
    params: &ModelParams,
    profile: &WageProfile,
    lambda1: f64,
    table: &ExpTable,
    grid_points: usize,
) -> Result<AlphaScan, ShootError> {
    let b = bracket_halfwidth(params, profile, lambda1);
    let m = grid_points.max(8);
    let alphas: Vec<f64> = (0..=m).map(|i| -b + 2.0 * b * i as f64 / m as f64).collect();
    let gs: Vec<f64> = alphas
        .iter()
        .map(|a| g_alpha(params, profile, lambda1, *a, table))
        .collect();
    let mut roots_found = Vec::new();
    for i in 0..m {
        let (ga, gb) = (gs[i], gs[i + 1]);
        if ga == 0.0 {
            roots_found.push(alphas[i]);
            continue;
        }
        if ga * gb < 0.0 {
            let eval = |a: f64| -> Result<f64, std::convert::Infallible> {
                Ok(g_alpha(params, profile, lambda1, a, table))
            };
            let root = roots::brent(eval, alphas[i], alphas[i + 1], 1e-12, 1e-13 * (1.0 + b), 200)
                .map_err(|e| match e {
                    RootError::NoSignChange { f_lo, f_hi } => ShootError::Bracket {
                        lambda1,
                        lo: alphas[i],
                        hi: alphas[i + 1],
                        g_lo: f_lo,
                        g_hi: f_hi,
                    },
                    RootError::IterationLimit { last_f, .. } => ShootError::AlphaIterations {
                        evaluations: 200,
                        last: last_f.abs(),
                    },
                    RootError::Objective(never) => match never {},
                })?;
            roots_found.push(root.x);
        }
    }
    if gs[m] == 0.0 {
        roots_found.push(alphas[m]);
    }
    roots_found.dedup_by(|r1, r0| (*r1 - *r0).abs() <= 1e-9 * (1.0 + b));
    Ok(AlphaScan { alpha: alphas, g: gs, roots: roots_found })
}

/// Number of distinct shooting roots found by [`alpha_scan`].
pub fn count_extremals(
    params: &ModelParams,
    profile: &WageProfile,
    lambda1: f64,
    cfg: &ShootConfig,
) -> Result<usize, ShootError> {
    let table = ExpTable::new(params, cfg.steps(params.horizon));
    Ok(alpha_scan(params, profile, lambda1, &table, cfg.grid_points)?.roots.len())
}

/// One outer evaluation: the inner problem solved at a trial multiplier.
#[derive(Debug, Clone, Copy)]
pub struct OuterIteration {
    pub lambda1: f64,
    pub alpha: f64,
    pub terminal_assets: f64,
    /// (G(λ) - λ)/λ; +∞ encodes terminal bankruptcy (λ too small).
    pub relative_residual: f64,
}

/// Trace of the outer loop.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: Vec<OuterIteration>,
    pub converged: bool,
    /// Total inner integrations across the whole solve.
    pub cauchy_evaluations: usize,
}

/// A verified candidate extremal with its audit trail.
#[derive(Debug, Clone)]
pub struct Extremal {
    pub trajectory: Trajectory,
    pub objective: f64,
    pub caps: ControlCaps,
    pub regime: Regime,
    pub residuals: dynamics::ResidualReport,
    pub outer: SolveReport,
}

/// Forward shooting resolves y(T) = 0 only while e^{κT}·ulp stays safely
/// below the α tolerance; e⁹ · 2⁻⁵² ≈ 2e-12 leaves a 50× margin at the
/// default 1e-10.
const FORWARD_LOG_BUDGET: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq)]
enum InnerMethod {
    /// RK4 integration of the Cauchy system plus Brent on α.
    Forward,
    /// Finite-difference Newton on the second-order two-point form.
    TwoPoint,
}

/// Estimated κ·T for the forward variational modes at multiplier `lambda1`:
/// κ² ≈ sup|w''| · λ₁e^{-rt}/F(t) on the unit interval, plus the drift term
/// max(r, ρ)/2 from the non-autonomous coupling.
fn forward_log_sensitivity(params: &ModelParams, profile: &WageProfile, lambda1: f64) -> f64 {
    let curv = profile.interior_curvature_sup();
    let q = |t: f64| {
        let er = (-params.r * t).exp();
        let erho = (-params.rho * t).exp();
        lambda1 * er / coupling(params, lambda1, er, erho)
    };
    let qmax = q(0.0).max(q(params.horizon));
    ((curv * qmax).sqrt() + 0.5 * params.r.max(params.rho)) * params.horizon
}

struct InnerSolve {
    alpha: AlphaSolve,
    path: CauchyPath,
    c: Vec<f64>,
    z: Vec<f64>,
    assets: AssetIntegration,
}

impl InnerSolve {
    fn terminal_assets(&self) -> f64 {
        *self.assets.primal.last().unwrap()
    }
}

fn inner_solve(
    params: &ModelParams,
    profile: &WageProfile,
    lambda1: f64,
    table: &ExpTable,
    cfg: &ShootConfig,
    method: InnerMethod,
    warm: Option<&[f64]>,
) -> Result<InnerSolve, ShootError> {
    let (alpha, path) = match method {
        InnerMethod::Forward => {
            let alpha = solve_alpha(params, profile, lambda1, table, cfg)?;
            let path = integrate_cauchy(params, profile, lambda1, alpha.alpha, table);
            (alpha, path)
        }
        InnerMethod::TwoPoint => {
            let sol = bvp::solve_path(params, profile, lambda1, table, warm)?;
            // y(T) = 0 holds exactly by construction on this route.
            let alpha = AlphaSolve {
                alpha: sol.alpha,
                g: 0.0,
                evaluations: sol.newton_iterations.max(1),
            };
            (alpha, sol.path)
        }
    };
    let times = table.times();
    let c = dynamics::consumption_path(params, lambda1, &times);
    let z = dynamics::relocation_path(params, lambda1, &path.y, table);
    let q = dynamics::net_savings(params, profile, &path.x, &c, &z);
    let assets = integrate_assets(params, &q, table);
    Ok(InnerSolve { alpha, path, c, z, assets })
}

/// Solve both levels and return the verified extremal.
pub fn solve_extremal(
    params: &ModelParams,
    profile: &WageProfile,
    cfg: &ShootConfig,
) -> Result<Extremal, ShootError> {
    params.validate()?;
    let table = ExpTable::new(params, cfg.steps(params.horizon));
    let mut trace: Vec<OuterIteration> = Vec::new();
    let mut cauchy_evaluations = 0usize;

    let lambda_init = initial_multiplier(params, profile);
    let mut best: Option<(f64, InnerSolve)> = None;

    let mut method = if forward_log_sensitivity(params, profile, lambda_init) <= FORWARD_LOG_BUDGET
    {
        InnerMethod::Forward
    } else {
        InnerMethod::TwoPoint
    };
    let mut warm: Option<Vec<f64>> = None;

    // Bracket endpoints: lo has R > 0, hi has R < 0, where
    // R(λ) = G(λ) - λ with terminal bankruptcy mapped to +∞ so it sorts on
    // the "λ too small" side.
    let mut lo: Option<(f64, f64)> = None;
    let mut hi: Option<(f64, f64)> = None;
    let mut lambda = lambda_init;
    let mut prev: Option<(f64, f64)> = None;
    let mut converged = false;

    for _ in 0..cfg.max_outer {
        let inner = match inner_solve(params, profile, lambda, &table, cfg, method, warm.as_deref())
        {
            Ok(inner) => inner,
            Err(ShootError::Bracket { .. } | ShootError::AlphaIterations { .. })
                if method == InnerMethod::Forward =>
            {
                // Forward root resolution gave out (sensitivity estimate was
                // optimistic for this multiplier); finish on the two-point
                // route, which has no such limit.
                method = InnerMethod::TwoPoint;
                inner_solve(params, profile, lambda, &table, cfg, method, warm.as_deref())?
            }
            Err(e) => return Err(e),
        };
        warm = Some(inner.path.x.clone());
        cauchy_evaluations += inner.alpha.evaluations + 1;
        let a_t = inner.terminal_assets();
        let residual = match dynamics::lambda_from_terminal_assets(params, a_t) {
            Some(g) => g - lambda,
            None => f64::INFINITY,
        };
        trace.push(OuterIteration {
            lambda1: lambda,
            alpha: inner.alpha.alpha,
            terminal_assets: a_t,
            relative_residual: residual / lambda,
        });
        let rel = residual / lambda;
        if rel.is_finite() && rel.abs() <= cfg.lambda_tol {
            best = Some((lambda, inner));
            converged = true;
            break;
        }
        if residual > 0.0 {
            if lo.is_none_or(|(l, _)| lambda > l) {
                lo = Some((lambda, residual));
            }
        } else if hi.is_none_or(|(h, _)| lambda < h) {
            hi = Some((lambda, residual));
        }

        let next = match (lo, hi) {
            (Some((ll, rl)), Some((lh, rh))) => {
                // Secant inside the bracket when well-posed, else bisection.
                let candidate = match prev {
                    Some((pl, pr))
                        if pr.is_finite()
                            && residual.is_finite()
                            && (residual - pr).abs() > 0.0 =>
                    {
                        lambda - residual * (lambda - pl) / (residual - pr)
                    }
                    _ => f64::NAN,
                };
                let inside = candidate.is_finite() && candidate > ll && candidate < lh;
                if inside {
                    candidate
                } else if rl.is_finite() && rh.is_finite() {
                    // Secant through the bracket endpoints.
                    let s = ll - rl * (lh - ll) / (rh - rl);
                    if s > ll && s < lh {
                        s
                    } else {
                        0.5 * (ll + lh)
                    }
                } else {
                    0.5 * (ll + lh)
                }
            }
            // Expand geometrically toward the missing side; the very first
            // step honors the configured damping when the residual is tame.
            (Some((ll, _)), None) => {
                if trace.len() == 1 && residual.is_finite() {
                    let probe = lambda + cfg.damping * residual;
                    if probe > ll && probe.is_finite() {
                        probe
                    } else {
                        ll * 4.0
                    }
                } else {
                    ll * 4.0
                }
            }
            (None, Some((lh, _))) => {
                if trace.len() == 1 && residual.is_finite() {
                    let probe = lambda + cfg.damping * residual;
                    if probe > 0.0 && probe < lh {
                        probe
                    } else {
                        lh / 4.0
                    }
                } else {
                    lh / 4.0
                }
            }
            (None, None) => unreachable!("every evaluation lands on one side"),
        };
        prev = Some((lambda, residual));
        lambda = next;
    }

    let (lambda1, inner) = match best {
        Some(pair) => pair,
        None => {
            let residual = trace.last().map(|t| t.relative_residual).unwrap_or(f64::NAN);
            return Err(ShootError::OuterIterations {
                evaluations: trace.len(),
                residual,
            });
        }
    };

    let caps = match compute_control_caps(params, profile) {
        Ok(caps) => caps,
        Err(ModelError::SpeedCapUnavailable) => {
            // ξ = 0: size the speed cap from the solved path itself.
            let zmax = inner.z.iter().fold(0.0f64, |m, z| m.max(z.abs()));
            let speed = (2.0 * zmax).max(1e-6);
            let mu = ((params.r - params.rho).abs() * params.horizon).exp();
            let annuity = (1.0 - (-params.r * params.horizon).exp()) / params.r;
            let threshold = 1.0f64.max(mu.powf(1.0 / params.theta))
                * (params.a0 + params.horizon * profile.sup_abs_wage())
                / (params.p * annuity);
            ControlCaps {
                consumption: crate::model::CAP_SAFETY
                    * threshold.max(threshold.powf(1.0 / params.theta)),
                speed,
                mu,
                speed_is_fallback: true,
            }
        }
        Err(e) => return Err(e.into()),
    };

    let trajectory = Trajectory {
        t: table.times(),
        x: inner.path.x,
        y: inner.path.y,
        c: inner.c,
        z: inner.z,
        assets: inner.assets.primal,
        lambda1,
        alpha: inner.alpha.alpha,
    };
    let objective = dynamics::objective_value(
        params,
        &trajectory.c,
        &trajectory.z,
        trajectory.terminal_assets(),
        &table,
    );
    let residuals = dynamics::verify_necessary_conditions(params, profile, &trajectory, &table);

    let extremal = Extremal {
        trajectory,
        objective,
        caps,
        regime: params.regime(),
        residuals,
        outer: SolveReport { iterations: trace, converged, cauchy_evaluations },
    };

    let issues = admissibility_issues(&extremal, cfg);
    if issues.is_empty() {
        Ok(extremal)
    } else {
        Err(ShootError::Flagged { issues, extremal: Box::new(extremal) })
    }
}

/// Starting multiplier: the flat-wage closed form evaluated at the local
/// wage, falling back to 1 when that solution is degenerate.
fn initial_multiplier(params: &ModelParams, profile: &WageProfile) -> f64 {
    let local_wage = profile.eval_unchecked(params.x0).value.max(0.0);
    let closed = crate::analysis::closed_form_constant_wage(params, local_wage);
    if closed.lambda1.is_finite() && closed.lambda1 > 0.0 {
        closed.lambda1
    } else {
        1.0
    }
}

// Negated comparisons are load-bearing: a NaN anywhere must register as an
// issue, and `!(a < b)` is the form that catches it.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn admissibility_issues(extremal: &Extremal, cfg: &ShootConfig) -> Vec<String> {
    let mut issues = Vec::new();
    let traj = &extremal.trajectory;
    let caps = &extremal.caps;
    let c_max = traj.c.iter().fold(0.0f64, |m, c| m.max(*c));
    let c_min = traj.c.iter().fold(f64::INFINITY, |m, c| m.min(*c));
    if !(c_min > 0.0) {
        issues.push(format!("consumption reaches {c_min:.3e}, not strictly positive"));
    }
    if !(c_max < caps.consumption) {
        issues.push(format!(
            "consumption {c_max:.6e} is not strictly inside its cap {:.6e}",
            caps.consumption
        ));
    }
    // A flat wage degenerates the speed cap to zero; z ≡ 0 then sits on the
    // (collapsed) admissible set rather than violating it.
    let z_max = traj.z.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    if !(z_max < caps.speed) && !(z_max == 0.0 && caps.speed == 0.0) {
        issues.push(format!(
            "speed {z_max:.6e} is not strictly inside its cap {:.6e}",
            caps.speed
        ));
    }
    let (x_lo, x_hi) = traj
        .x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    if x_lo < -1e-9 || x_hi > 1.0 + 1e-9 {
        issues.push(format!("location leaves the unit interval: range [{x_lo:.6e}, {x_hi:.6e}]"));
    }
    let a_t = traj.terminal_assets();
    if !(a_t > 0.0) {
        issues.push(format!("terminal assets {a_t:.6e} not positive"));
    }
    let y_t = traj.y.last().unwrap().abs();
    if y_t > cfg.alpha_tol {
        issues.push(format!("terminal speed costate |y(T)| = {y_t:.3e} above tolerance"));
    }
    if extremal.residuals.asset_route_gap > 1e-8 {
        issues.push(format!(
            "asset integration routes disagree: relative gap {:.3e}",
            extremal.residuals.asset_route_gap
        ));
    }
    issues
}
