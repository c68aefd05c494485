//! Bracketed scalar root finding (Brent's method).
//!
//! The objective may fail (e.g. an inner integration diverges), so the
//! callback returns a `Result` and failures abort the search. Convergence is
//! declared on either a small residual (`ftol`) or a collapsed bracket
//! (`xtol`); both are absolute.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RootError<E> {
    #[error("no sign change over bracket: f(lo) = {f_lo:.6e}, f(hi) = {f_hi:.6e}")]
    NoSignChange { f_lo: f64, f_hi: f64 },
    #[error("root finder hit the iteration limit at x = {last_x:.6e}, f = {last_f:.6e}")]
    IterationLimit { last_x: f64, last_f: f64 },
    #[error(transparent)]
    Objective(E),
}

#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub f: f64,
    pub evaluations: usize,
}

/// Brent's method on `[lo, hi]`. Requires a sign change unless an endpoint
/// already satisfies `|f| ≤ ftol`, in which case that endpoint is returned
/// (a root sitting exactly on the bracket edge is a legitimate outcome here).
pub fn brent<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    lo: f64,
    hi: f64,
    ftol: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<Root, RootError<E>> {
    let mut evals = 0usize;
    let mut eval = |x: f64, evals: &mut usize| -> Result<f64, RootError<E>> {
        *evals += 1;
        f(x).map_err(RootError::Objective)
    };

    let mut a = lo;
    let mut b = hi;
    let mut fa = eval(a, &mut evals)?;
    if fa.abs() <= ftol {
        return Ok(Root { x: a, f: fa, evaluations: evals });
    }
    let mut fb = eval(b, &mut evals)?;
    if fb.abs() <= ftol {
        return Ok(Root { x: b, f: fb, evaluations: evals });
    }
    if fa * fb > 0.0 {
        return Err(RootError::NoSignChange { f_lo: fa, f_hi: fb });
    }

    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;

    for _ in 0..max_iter {
        if fb.abs() <= ftol || (b - a).abs() <= xtol {
            return Ok(Root { x: b, f: fb, evaluations: evals });
        }
        let mut s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };

        let lo_guard = (3.0 * a + b) / 4.0;
        let out_of_range = !((s > lo_guard.min(b) && s < lo_guard.max(b))
            || (s > b.min(lo_guard) && s < b.max(lo_guard)));
        let step_too_small = if mflag {
            (s - b).abs() >= (b - c).abs() / 2.0
        } else {
            (s - b).abs() >= (c - d).abs() / 2.0
        };
        let bracket_too_small = if mflag {
            (b - c).abs() < xtol
        } else {
            (c - d).abs() < xtol
        };
        if out_of_range || step_too_small || bracket_too_small {
            s = (a + b) / 2.0;
            mflag = true;
        } else {
            mflag = false;
        }

        let fs = eval(s, &mut evals)?;
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Err(RootError::IterationLimit { last_x: b, last_f: fb })
}
