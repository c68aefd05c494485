//! Time-grid machinery for the extremal system.
//!
//! Along an extremal the wealth costate is `p₁(t) = λ₁ e^{-rt}`, consumption
//! follows the closed-form rule
//! `c(t) = (pλ₁)^{-1/θ} e^{(r-ρ)t/θ}`, and the location/speed pair solves
//!
//! ```text
//! x' = y / F(t),    y' = -w'(x) λ₁ e^{-rt},    F(t) = 2(ξλ₁e^{-rt} + ηe^{-ρt})
//! ```
//!
//! with `y = p₂` the location costate and `z = y/F` the speed. This module
//! integrates that system (optionally with its variation in the initial
//! speed costate), rebuilds assets along two independent routes, evaluates
//! the objective, and audits a finished trajectory against every first-order
//! condition.

use crate::model::{ModelParams, WageProfile};
use crate::quadrature;

/// Default step count for a horizon: 2048 steps per unit of time, floored at
/// 2048 and capped at 2²⁰, rounded up to even so Simpson applies.
pub fn default_steps(horizon: f64) -> usize {
    let raw = (2048.0 * horizon.max(1.0)).ceil() as usize;
    let clamped = raw.clamp(2048, 1 << 20);
    clamped + (clamped & 1)
}

/// Discount factors `e^{-rt}` and `e^{-ρt}` at the grid nodes and interval
/// midpoints. Built once per (params, step count) and shared across every
/// integration in a solve; the RK4 stages then never call `exp`.
#[derive(Debug, Clone)]
pub struct ExpTable {
    pub h: f64,
    pub horizon: f64,
    /// e^{-r t_i}, length n+1.
    pub r_node: Vec<f64>,
    /// e^{-ρ t_i}, length n+1.
    pub rho_node: Vec<f64>,
    /// e^{-r (t_i + h/2)}, length n.
    pub r_mid: Vec<f64>,
    /// e^{-ρ (t_i + h/2)}, length n.
    pub rho_mid: Vec<f64>,
}

impl ExpTable {
    pub fn new(params: &ModelParams, n: usize) -> ExpTable {
        assert!(n >= 2 && n.is_multiple_of(2), "step count must be even and >= 2");
        let h = params.horizon / n as f64;
        let node = |i: usize| i as f64 * h;
        ExpTable {
            h,
            horizon: params.horizon,
            r_node: (0..=n).map(|i| (-params.r * node(i)).exp()).collect(),
            rho_node: (0..=n).map(|i| (-params.rho * node(i)).exp()).collect(),
            r_mid: (0..n).map(|i| (-params.r * (node(i) + 0.5 * h)).exp()).collect(),
            rho_mid: (0..n).map(|i| (-params.rho * (node(i) + 0.5 * h)).exp()).collect(),
        }
    }

    pub fn steps(&self) -> usize {
        self.r_mid.len()
    }

    pub fn times(&self) -> Vec<f64> {
        quadrature::uniform_grid(self.horizon, self.steps())
    }
}

/// Positivity floor for the speed-cost coupling, guarding against underflow
/// at extreme rate-horizon combinations. The floor is relative to the
/// coupling's own scale so it never distorts a healthy problem.
#[inline]
pub fn coupling_floor(params: &ModelParams, lambda1: f64) -> f64 {
    1e-12 * (params.xi * lambda1).max(params.eta)
}

/// `F(t) = 2(ξ λ₁ e^{-rt} + η e^{-ρt})`, floored away from zero.
#[inline]
pub fn coupling(params: &ModelParams, lambda1: f64, exp_rt: f64, exp_rhot: f64) -> f64 {
    let f = 2.0 * (params.xi * lambda1 * exp_rt + params.eta * exp_rhot);
    f.max(coupling_floor(params, lambda1))
}

/// Location and speed-costate samples from one shooting integration.
#[derive(Debug, Clone)]
pub struct CauchyPath {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl CauchyPath {
    pub fn terminal_y(&self) -> f64 {
        *self.y.last().unwrap()
    }
}

/// RK4 integration of the location/costate system from `(x₀, α)`.
pub fn integrate_cauchy(
    params: &ModelParams,
    profile: &WageProfile,
    lambda1: f64,
    alpha: f64,
    table: &ExpTable,
) -> CauchyPath {
    let n = table.steps();
    let h = table.h;
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    let mut x = params.x0;
    let mut y = alpha;
    xs.push(x);
    ys.push(y);
    for i in 0..n {
        let f0 = coupling(params, lambda1, table.r_node[i], table.rho_node[i]);
        let fm = coupling(params, lambda1, table.r_mid[i], table.rho_mid[i]);
        let f1 = coupling(params, lambda1, table.r_node[i + 1], table.rho_node[i + 1]);
        let g0 = lambda1 * table.r_node[i];
        let gm = lambda1 * table.r_mid[i];
        let g1 = lambda1 * table.r_node[i + 1];

        let k1x = y / f0;
        let k1y = -profile.eval_unchecked(x).slope * g0;
        let k2x = (y + 0.5 * h * k1y) / fm;
        let k2y = -profile.eval_unchecked(x + 0.5 * h * k1x).slope * gm;
        let k3x = (y + 0.5 * h * k2y) / fm;
        let k3y = -profile.eval_unchecked(x + 0.5 * h * k2x).slope * gm;
        let k4x = (y + h * k3y) / f1;
        let k4y = -profile.eval_unchecked(x + h * k3x).slope * g1;

        x += h / 6.0 * (k1x + 2.0 * (k2x + k3x) + k4x);
        y += h / 6.0 * (k1y + 2.0 * (k2y + k3y) + k4y);
        xs.push(x);
        ys.push(y);
    }
    CauchyPath { x: xs, y: ys }
}

/// A [`CauchyPath`] together with its derivative with respect to the initial
/// costate α. The variational pair is integrated jointly with the base pair,
/// sharing RK4 stages, so it is the exact derivative of the discrete flow.
#[derive(Debug, Clone)]
pub struct VariationPath {
    pub base: CauchyPath,
    pub x_alpha: Vec<f64>,
    pub y_alpha: Vec<f64>,
}

impl VariationPath {
    /// dy(T)/dα, the slope of the shooting map at this α.
    pub fn terminal_sensitivity(&self) -> f64 {
        *self.y_alpha.last().unwrap()
    }
}

pub fn integrate_cauchy_with_variation(
    params: &ModelParams,
    profile: &WageProfile,
    lambda1: f64,
    alpha: f64,
    table: &ExpTable,
) -> VariationPath {
    let n = table.steps();
    let h = table.h;
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    let mut xas = Vec::with_capacity(n + 1);
    let mut yas = Vec::with_capacity(n + 1);
    let (mut x, mut y, mut xa, mut ya) = (params.x0, alpha, 0.0, 1.0);
    xs.push(x);
    ys.push(y);
    xas.push(xa);
    yas.push(ya);
    for i in 0..n {
        let f0 = coupling(params, lambda1, table.r_node[i], table.rho_node[i]);
        let fm = coupling(params, lambda1, table.r_mid[i], table.rho_mid[i]);
        let f1 = coupling(params, lambda1, table.r_node[i + 1], table.rho_node[i + 1]);
        let g0 = lambda1 * table.r_node[i];
        let gm = lambda1 * table.r_mid[i];
        let g1 = lambda1 * table.r_node[i + 1];

        let s1 = profile.eval_unchecked(x);
        let k1x = y / f0;
        let k1y = -s1.slope * g0;
        let k1xa = ya / f0;
        let k1ya = -s1.curvature * xa * g0;

        let s2 = profile.eval_unchecked(x + 0.5 * h * k1x);
        let k2x = (y + 0.5 * h * k1y) / fm;
        let k2y = -s2.slope * gm;
        let k2xa = (ya + 0.5 * h * k1ya) / fm;
        let k2ya = -s2.curvature * (xa + 0.5 * h * k1xa) * gm;

        let s3 = profile.eval_unchecked(x + 0.5 * h * k2x);
        let k3x = (y + 0.5 * h * k2y) / fm;
        let k3y = -s3.slope * gm;
        let k3xa = (ya + 0.5 * h * k2ya) / fm;
        let k3ya = -s3.curvature * (xa + 0.5 * h * k2xa) * gm;

        let s4 = profile.eval_unchecked(x + h * k3x);
        let k4x = (y + h * k3y) / f1;
        let k4y = -s4.slope * g1;
        let k4xa = (ya + h * k3ya) / f1;
        let k4ya = -s4.curvature * (xa + h * k3xa) * g1;

        x += h / 6.0 * (k1x + 2.0 * (k2x + k3x) + k4x);
        y += h / 6.0 * (k1y + 2.0 * (k2y + k3y) + k4y);
        xa += h / 6.0 * (k1xa + 2.0 * (k2xa + k3xa) + k4xa);
        ya += h / 6.0 * (k1ya + 2.0 * (k2ya + k3ya) + k4ya);
        xs.push(x);
        ys.push(y);
        xas.push(xa);
        yas.push(ya);
    }
    VariationPath { base: CauchyPath { x: xs, y: ys }, x_alpha: xas, y_alpha: yas }
}

/// Closed-form consumption rule `c(t) = (pλ₁)^{-1/θ} e^{(r-ρ)t/θ}` at the
/// given times.
pub fn consumption_path(params: &ModelParams, lambda1: f64, times: &[f64]) -> Vec<f64> {
    let c0 = (params.p * lambda1).powf(-1.0 / params.theta);
    let rate = (params.r - params.rho) / params.theta;
    times.iter().map(|t| c0 * (rate * t).exp()).collect()
}

/// Speed path `z = y / F(t)` from costate samples at the table's nodes.
pub fn relocation_path(
    params: &ModelParams,
    lambda1: f64,
    y: &[f64],
    table: &ExpTable,
) -> Vec<f64> {
    assert_eq!(y.len(), table.steps() + 1);
    y.iter()
        .enumerate()
        .map(|(i, yi)| yi / coupling(params, lambda1, table.r_node[i], table.rho_node[i]))
        .collect()
}

/// Net savings flow `q = w(x) - p c - ξ z²` at the nodes.
pub fn net_savings(
    params: &ModelParams,
    profile: &WageProfile,
    x: &[f64],
    c: &[f64],
    z: &[f64],
) -> Vec<f64> {
    x.iter()
        .zip(c)
        .zip(z)
        .map(|((xi, ci), zi)| {
            profile.eval_unchecked(*xi).value - params.p * ci - params.xi * zi * zi
        })
        .collect()
}

/// Asset paths rebuilt along two independent routes from the same savings
/// flow: a variation-of-constants quadrature and a direct RK4 pass. Their
/// terminal disagreement is a discretization audit; the quadrature route is
/// the reference.
#[derive(Debug, Clone)]
pub struct AssetIntegration {
    /// `a(t) = e^{rt}(a₀ + ∫₀ᵗ q e^{-rs} ds)` with fourth-order cumulative
    /// quadrature.
    pub primal: Vec<f64>,
    /// RK4 on `a' = ra + q` with cubic midpoint interpolation of q.
    pub rk4: Vec<f64>,
    /// `|primal(T) - rk4(T)| / max(1, |primal(T)|)`.
    pub terminal_gap: f64,
}

pub fn integrate_assets(params: &ModelParams, q: &[f64], table: &ExpTable) -> AssetIntegration {
    let n = table.steps();
    assert_eq!(q.len(), n + 1);
    let discounted: Vec<f64> = q.iter().zip(&table.r_node).map(|(qi, e)| qi * e).collect();
    let cum = quadrature::cumulative(&discounted, table.h);
    let primal: Vec<f64> =
        cum.iter().zip(&table.r_node).map(|(ci, e)| (params.a0 + ci) / e).collect();

    let mid = |i: usize| -> f64 {
        if i == 0 {
            (5.0 * q[0] + 15.0 * q[1] - 5.0 * q[2] + q[3]) / 16.0
        } else if i == n - 1 {
            (5.0 * q[n] + 15.0 * q[n - 1] - 5.0 * q[n - 2] + q[n - 3]) / 16.0
        } else {
            (-q[i - 1] + 9.0 * q[i] + 9.0 * q[i + 1] - q[i + 2]) / 16.0
        }
    };
    let h = table.h;
    let r = params.r;
    let mut rk4 = Vec::with_capacity(n + 1);
    let mut a = params.a0;
    rk4.push(a);
    for i in 0..n {
        let qm = mid(i);
        let k1 = r * a + q[i];
        let k2 = r * (a + 0.5 * h * k1) + qm;
        let k3 = r * (a + 0.5 * h * k2) + qm;
        let k4 = r * (a + h * k3) + q[i + 1];
        a += h / 6.0 * (k1 + 2.0 * (k2 + k3) + k4);
        rk4.push(a);
    }

    let pt = *primal.last().unwrap();
    let terminal_gap = (pt - a).abs() / pt.abs().max(1.0);
    AssetIntegration { primal, rk4, terminal_gap }
}

/// Discounted objective: running utility by Simpson plus the terminal wealth
/// term `e^{-ρT} a(T)^{1-θ}/(1-θ)`.
pub fn objective_value(
    params: &ModelParams,
    c: &[f64],
    z: &[f64],
    terminal_assets: f64,
    table: &ExpTable,
) -> f64 {
    let one_minus = 1.0 - params.theta;
    let util: Vec<f64> = c
        .iter()
        .zip(z)
        .zip(&table.rho_node)
        .map(|((ci, zi), e)| e * (ci.powf(one_minus) / one_minus - params.eta * zi * zi))
        .collect();
    let running = quadrature::simpson(&util, table.h);
    let bequest =
        table.rho_node.last().unwrap() * terminal_assets.powf(one_minus) / one_minus;
    running + bequest
}

/// Transversality map `G(λ₁) = e^{(r-ρ)T} a(T)^{-θ}`; `None` when terminal
/// assets are not positive (the map is undefined there and the outer solver
/// treats it as an overshoot signal).
pub fn lambda_from_terminal_assets(params: &ModelParams, terminal_assets: f64) -> Option<f64> {
    if terminal_assets > 0.0 {
        Some(
            ((params.r - params.rho) * params.horizon).exp()
                * terminal_assets.powf(-params.theta),
        )
    } else {
        None
    }
}

/// A complete candidate extremal on the integration grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    /// Location costate p₂.
    pub y: Vec<f64>,
    pub c: Vec<f64>,
    pub z: Vec<f64>,
    pub assets: Vec<f64>,
    pub lambda1: f64,
    pub alpha: f64,
}

impl Trajectory {
    pub fn terminal_assets(&self) -> f64 {
        *self.assets.last().unwrap()
    }

    pub fn terminal_location(&self) -> f64 {
        *self.x.last().unwrap()
    }
}

/// Sup-norm defects of a trajectory against the first-order conditions.
/// ODE defects compare fourth-order finite differences of the stored samples
/// with the right-hand sides; each is normalized by `max(1, sup |rhs|)`.
#[derive(Debug, Clone, Copy)]
pub struct ResidualReport {
    /// `x' - y/F`.
    pub location_ode: f64,
    /// `y' + w'(x) λ₁ e^{-rt}`.
    pub costate_ode: f64,
    /// `a' - (ra + q)`.
    pub asset_ode: f64,
    /// Consumption first-order condition `e^{-ρt} c^{-θ} - p λ₁ e^{-rt}`.
    pub consumption_foc: f64,
    /// Speed first-order condition `y - F z`.
    pub speed_foc: f64,
    /// `|y(T)|`: the speed costate must vanish at the horizon.
    pub terminal_speed_costate: f64,
    /// `|λ₁ - e^{(r-ρ)T} a(T)^{-θ}| / λ₁`.
    pub terminal_wealth_link: f64,
    /// Terminal gap between the two asset integration routes.
    pub asset_route_gap: f64,
    /// Strengthened Legendre condition along the path: both second-order
    /// control coefficients strictly negative (F > 0 and c > 0).
    pub legendre_ok: bool,
}

impl ResidualReport {
    /// Largest of the differential and algebraic condition defects; the
    /// terminal conditions are reported separately because their scales
    /// belong to the outer solver's tolerances.
    pub fn max_defect(&self) -> f64 {
        self.location_ode
            .max(self.costate_ode)
            .max(self.asset_ode)
            .max(self.consumption_foc)
            .max(self.speed_foc)
    }
}

impl std::fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "location_ode = {:.16e}", self.location_ode)?;
        writeln!(f, "costate_ode = {:.16e}", self.costate_ode)?;
        writeln!(f, "asset_ode = {:.16e}", self.asset_ode)?;
        writeln!(f, "consumption_foc = {:.16e}", self.consumption_foc)?;
        writeln!(f, "speed_foc = {:.16e}", self.speed_foc)?;
        writeln!(f, "terminal_speed_costate = {:.16e}", self.terminal_speed_costate)?;
        writeln!(f, "terminal_wealth_link = {:.16e}", self.terminal_wealth_link)?;
        writeln!(f, "asset_route_gap = {:.16e}", self.asset_route_gap)?;
        writeln!(f, "legendre_ok = {}", self.legendre_ok)
    }
}

/// Audit a finished trajectory against every optimality condition it is
/// supposed to satisfy. Pure measurement: nothing is corrected.
pub fn verify_necessary_conditions(
    params: &ModelParams,
    profile: &WageProfile,
    traj: &Trajectory,
    table: &ExpTable,
) -> ResidualReport {
    let n = table.steps();
    assert_eq!(traj.x.len(), n + 1);
    let h = table.h;
    let lambda1 = traj.lambda1;

    let couplings: Vec<f64> = (0..=n)
        .map(|i| coupling(params, lambda1, table.r_node[i], table.rho_node[i]))
        .collect();

    let sup_normalized = |defect: &[f64], rhs: &[f64]| -> f64 {
        let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        defect.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
    };

    let dx = quadrature::derivative(&traj.x, h);
    let rhs_x: Vec<f64> = traj.y.iter().zip(&couplings).map(|(y, f)| y / f).collect();
    let def_x: Vec<f64> = dx.iter().zip(&rhs_x).map(|(d, r)| d - r).collect();

    let dy = quadrature::derivative(&traj.y, h);
    let rhs_y: Vec<f64> = (0..=n)
        .map(|i| -profile.eval_unchecked(traj.x[i]).slope * lambda1 * table.r_node[i])
        .collect();
    let def_y: Vec<f64> = dy.iter().zip(&rhs_y).map(|(d, r)| d - r).collect();

    let q = net_savings(params, profile, &traj.x, &traj.c, &traj.z);
    let da = quadrature::derivative(&traj.assets, h);
    let rhs_a: Vec<f64> =
        traj.assets.iter().zip(&q).map(|(a, qi)| params.r * a + qi).collect();
    let def_a: Vec<f64> = da.iter().zip(&rhs_a).map(|(d, r)| d - r).collect();

    let rhs_c: Vec<f64> =
        table.r_node.iter().map(|e| params.p * lambda1 * e).collect();
    let def_c: Vec<f64> = (0..=n)
        .map(|i| table.rho_node[i] * traj.c[i].powf(-params.theta) - rhs_c[i])
        .collect();

    let def_z: Vec<f64> = (0..=n)
        .map(|i| traj.y[i] - couplings[i] * traj.z[i])
        .collect();
    let scale_z = traj.y.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    let assets = integrate_assets(params, &q, table);
    let a_t = traj.terminal_assets();
    let wealth_link = match lambda_from_terminal_assets(params, a_t) {
        Some(g) => (g - lambda1).abs() / lambda1,
        None => f64::INFINITY,
    };

    let legendre_ok =
        couplings.iter().all(|f| *f > 0.0) && traj.c.iter().all(|c| *c > 0.0);

    ResidualReport {
        location_ode: sup_normalized(&def_x, &rhs_x),
        costate_ode: sup_normalized(&def_y, &rhs_y),
        asset_ode: sup_normalized(&def_a, &rhs_a),
        consumption_foc: sup_normalized(&def_c, &rhs_c),
        speed_foc: def_z.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale_z,
        terminal_speed_costate: traj.y.last().unwrap().abs(),
        terminal_wealth_link: wealth_link,
        asset_route_gap: assets.terminal_gap,
        legendre_ok,
    }
}
