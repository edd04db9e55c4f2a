//! Proximal operators for the covariance-estimation terms, plus brute-force
//! grid oracles used to test them.
//!
//! The penalty is `φ(t; ω) = |t| / (1 + ω|t|/2)`, which is `ω`-weakly convex.
//! Its scaled prox `prox_{κφ}` is single-valued as long as `κω < 1`.

use crate::error::{Error, Result};
use crate::hilbert::{Point, Shape};
use crate::linalg::{sym_eigen, sym_recompose};

pub fn phi(t: f64, omega: f64) -> f64 {
    let a = t.abs();
    a / (1.0 + 0.5 * omega * a)
}

fn check_phi_params(omega: f64, kappa: f64) -> Result<()> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(Error::invalid(format!("omega must be finite and >= 0, got {omega}")));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::invalid(format!("kappa must be finite and >= 0, got {kappa}")));
    }
    if kappa * omega >= 1.0 {
        return Err(Error::ProxRefused { product: kappa * omega });
    }
    Ok(())
}

/// `argmin_w κ φ(w; ω) + ½ (w - t)²`, defined for `κω < 1`.
pub fn prox_phi_scalar(t: f64, omega: f64, kappa: f64) -> Result<f64> {
    check_phi_params(omega, kappa)?;
    if !t.is_finite() {
        return Err(Error::invalid(format!("prox argument must be finite, got {t}")));
    }
    let a = t.abs();
    if a <= kappa {
        // h(0) = κ - |t| >= 0 and h is increasing, so w = 0 is optimal.
        return Ok(0.0);
    }
    if omega == 0.0 {
        return Ok(t.signum() * (a - kappa));
    }
    let h = |w: f64| {
        let d = 1.0 + 0.5 * omega * w;
        w - a + kappa / (d * d)
    };
    let dh = |w: f64| {
        let d = 1.0 + 0.5 * omega * w;
        1.0 - kappa * omega / (d * d * d)
    };
    // Root lies in [|t| - κ, |t|]; h is convex and increasing there, so Newton
    // from the right endpoint decreases monotonically onto it.
    let (mut lo, mut hi) = (a - kappa, a);
    let mut w = hi;
    for _ in 0..100 {
        let hw = h(w);
        if hw == 0.0 {
            break;
        }
        if hw > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let mut next = w - hw / dh(w);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 1e-16 * a.max(1.0) {
            w = next;
            break;
        }
        w = next;
    }
    let obj = |v: f64| kappa * phi(v, omega) + 0.5 * (v - a) * (v - a);
    let w = if obj(0.0) < obj(w) { 0.0 } else { w };
    Ok(t.signum() * w)
}

/// Entrywise prox of `τ Σ φ(x_j; ω)` with step `γ`.
pub fn prox_phi_elementwise(x: &Point, omega: f64, tau: f64, gamma: f64) -> Result<Point> {
    check_gamma(gamma)?;
    let kappa = gamma * tau;
    check_phi_params(omega, kappa)?;
    let mut out = Vec::with_capacity(x.len());
    for &v in x.as_slice() {
        out.push(prox_phi_scalar(v, omega, kappa)?);
    }
    rebuild(x, out)
}

/// Prox of `τ Σ φ(s_i(x); ω)` over singular values of a symmetric matrix.
///
/// For symmetric `x = Q diag(e) Qᵀ` the singular values are `|e_i|` with
/// singular vectors `q_i` and `sign(e_i) q_i`, so the prox maps each
/// eigenvalue `e` to `sign(e) prox(|e|)`.
pub fn prox_phi_spectral(x: &Point, omega: f64, tau: f64, gamma: f64) -> Result<Point> {
    check_gamma(gamma)?;
    let kappa = gamma * tau;
    check_phi_params(omega, kappa)?;
    let (vals, vecs) = sym_eigen(x)?;
    let shrunk = vals.iter().map(|&e| prox_phi_scalar(e, omega, kappa)).collect::<Result<Vec<_>>>()?;
    sym_recompose(&shrunk, &vecs)
}

/// Projection onto the positive semidefinite cone. The prox of the indicator
/// does not depend on the step.
pub fn prox_psd(x: &Point) -> Result<Point> {
    let (vals, vecs) = sym_eigen(x)?;
    if vals.iter().all(|&v| v >= 0.0) {
        return Ok(x.clone());
    }
    let clamped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    sym_recompose(&clamped, &vecs)
}

/// Prox of `½ ‖· - target‖²`: `(x + γ target) / (1 + γ)`.
pub fn prox_quadratic_tracking(x: &Point, target: &Point, gamma: f64) -> Result<Point> {
    check_gamma(gamma)?;
    Ok(x.lin_comb(1.0, target, gamma)?.scale(1.0 / (1.0 + gamma)))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!("step must be positive and finite, got {gamma}")));
    }
    Ok(())
}

fn rebuild(like: &Point, data: Vec<f64>) -> Result<Point> {
    match like.shape() {
        Shape::Vector(_) => Ok(Point::vector(data)),
        Shape::Matrix(p) => Point::symmetric(p, data),
    }
}

/// Default search radius of [`prox_grid_oracle`] around `t`.
pub fn default_radius(t: f64) -> f64 {
    2.0 * t.abs() + 1.0
}

pub const DEFAULT_GRID_STEP: f64 = 1e-6;

/// Brute-force prox: the minimizer of `f(w) + (w - t)²/(2γ)` over the grid
/// `t - radius + k·step`, ties going to the smaller `|w|`.
pub fn prox_grid_oracle<F: Fn(f64) -> f64>(f: F, t: f64, gamma: f64, radius: f64, step: f64) -> f64 {
    assert!(step > 0.0 && radius > 0.0 && gamma > 0.0);
    let lo = t - radius;
    let n = (2.0 * radius / step).round() as u64;
    let inv = 0.5 / gamma;
    let mut best_w = lo;
    let mut best = f64::INFINITY;
    for k in 0..=n {
        let w = lo + k as f64 * step;
        let d = w - t;
        let v = f(w) + inv * d * d;
        if v < best || (v == best && w.abs() < best_w.abs()) {
            best = v;
            best_w = w;
        }
    }
    best_w
}

/// Checks whether `f(w) + (w - t)²/(2γ)` attains its infimum by scanning
/// windows of doubling radius. Returns `None` when the grid minimizer keeps
/// sitting on the window boundary while the value keeps decreasing, which is
/// what happens when the objective is unbounded below.
pub fn prox_existence_oracle<F: Fn(f64) -> f64>(f: F, t: f64, gamma: f64) -> Option<f64> {
    let obj = |w: f64| f(w) + 0.5 / gamma * (w - t) * (w - t);
    let points = 4000u32;
    let mut radius = default_radius(t);
    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..24 {
        let step = 2.0 * radius / points as f64;
        let (mut best_w, mut best) = (t - radius, f64::INFINITY);
        for k in 0..=points {
            let w = t - radius + k as f64 * step;
            let v = obj(w);
            if v < best {
                best = v;
                best_w = w;
            }
        }
        let interior = (best_w - t).abs() < radius - 1.5 * step;
        if interior {
            if let Some((_, pv)) = prev {
                if (pv - best).abs() <= 1e-9 * best.abs().max(1.0) + step {
                    return Some(best_w);
                }
            }
            prev = Some((best_w, best));
        } else {
            prev = None;
        }
        radius *= 2.0;
    }
    None
}
