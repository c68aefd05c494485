//! Solver toolkit for a finite-horizon consumption and relocation plan.
//!
//! An agent holds assets `a(t)` and lives at location `x(t)` on the unit
//! interval, earning a location-dependent wage `w(x)`. It picks a consumption
//! path `c(t)` and a relocation speed `z(t)` to maximize discounted utility
//!
//! ```text
//! J = ∫₀ᵀ e^{-ρt} ( c^{1-θ}/(1-θ) - η z² ) dt + e^{-ρT} a(T)^{1-θ}/(1-θ)
//! ```
//!
//! subject to `ȧ = r a + w(x) - p c - ξ z²`, `ẋ = z`, and `a(T) ≥ 0`.
//!
//! The first-order conditions reduce the problem to a scalar two-point
//! boundary value problem in `(x, y)` (location and its costate) plus a
//! terminal-consistency condition on the marginal value of wealth `λ₁`:
//!
//! * [`dynamics`] integrates the reduced system and reconstructs controls,
//!   assets, and the objective from a candidate `(λ₁, α)`;
//! * [`shooting`] finds the initial costate `α` by bracketed root finding and
//!   closes the outer loop on `λ₁`;
//! * [`bvp`] solves the same interior problem in its self-adjoint two-point
//!   form, which stays well-conditioned at horizons where forward shooting
//!   loses the terminal condition to exponential sensitivity;
//! * [`integral`] re-solves the location path as a fixed point of an
//!   equivalent integral equation (independent cross-check);
//! * [`direct`] is a transcription oracle: projected gradient ascent over
//!   piecewise-constant controls, with no knowledge of the multiplier
//!   structure;
//! * [`analysis`] has the constant-wage closed form, horizon sweeps, growth
//!   rate fits, and the peak-approach report;
//! * [`cli`] wires everything to a plain-text config and CSV outputs.

pub mod analysis;
pub mod bvp;
pub mod cli;
pub mod direct;
pub mod dynamics;
pub mod integral;
pub mod model;
pub mod quadrature;
pub mod roots;
pub mod shooting;
