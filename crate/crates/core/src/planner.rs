//! Step-size certification.
//!
//! With `I = {i < m : σ_i ≠ 0}` the nonmonotone case asks for auxiliary weights
//! `δ ∈ ℝ^I` with `Σ δ_i = 1` and `σ_i + σ_m δ_i > 0`, and maximizes
//! `min_i f_i(δ_i)` where
//!
//! ```text
//! f_i(δ) = λ_i (σ_i + σ_m δ) / (-σ_i σ_m δ)     (+∞ when σ_i σ_m δ >= 0)
//! ```
//!
//! The admissible steps are `λ < (1 - μ/2) max_δ min_i f_i(δ_i)`.
//!
//! Every `f_i` is monotone in `δ_i` on its feasible interval, in the same
//! direction for all `i` (the direction of `σ_m`). The maximum is therefore
//! reached where all finite `f_i` share a common value `t`. Solving
//! `f_i(δ_i) = t` gives
//!
//! ```text
//! δ_i(t) = -λ_i σ_i / (σ_m (t σ_i + λ_i))
//! ```
//!
//! and `t*` is the root of `g(t) = Σ_i δ_i(t) - 1`. Each `δ_i(t)` moves in
//! the direction of `σ_m` as `t` grows, so `g` is strictly monotone, with
//! `g(0) = -Σσ/σ_m`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::Weights;

#[derive(Clone, Debug)]
pub struct PlannerInput {
    /// `σ_1, ..., σ_m`.
    pub sigmas: Vec<f64>,
    pub weights: Weights,
    pub mu: f64,
    /// `L_1, ..., L_{m-1}` for smooth blocks.
    pub lipschitz: Option<Vec<f64>>,
}

impl PlannerInput {
    pub fn new(sigmas: Vec<f64>, weights: Weights, mu: f64) -> Result<Self> {
        let inp = PlannerInput { sigmas, weights, mu, lipschitz: None };
        inp.validate()?;
        Ok(inp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 moduli, got {}", self.sigmas.len())));
        }
        if self.sigmas.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("moduli must be finite"));
        }
        if self.weights.len() != self.sigmas.len() - 1 {
            return Err(Error::BlockCount { expected: self.sigmas.len() - 1, found: self.weights.len() });
        }
        if !(self.mu > 0.0 && self.mu < 2.0) {
            return Err(Error::invalid(format!("mu must lie in (0, 2), got {}", self.mu)));
        }
        if let Some(l) = &self.lipschitz {
            if l.len() != self.sigmas.len() - 1 {
                return Err(Error::BlockCount { expected: self.sigmas.len() - 1, found: l.len() });
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigma_m(&self) -> f64 {
        self.sigmas[self.m() - 1]
    }

    /// 0-based indices `i < m - 1` with `σ_i ≠ 0`.
    pub fn index_set(&self) -> Vec<usize> {
        (0..self.m() - 1).filter(|&i| self.sigmas[i] != 0.0).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Case {
    MonotoneB,
    NonmonotoneA,
    Unsupported,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub case: Case,
    pub reason: Option<String>,
}

pub fn classify(inp: &PlannerInput) -> Classification {
    let s = &inp.sigmas;
    if s.iter().all(|&v| v >= 0.0) {
        return Classification { case: Case::MonotoneB, reason: None };
    }
    if inp.sigma_m() == 0.0 {
        return Classification {
            case: Case::Unsupported,
            reason: Some(
                "some sigma is negative but sigma_m = 0; reorder so that an operator with nonzero modulus is last"
                    .into(),
            ),
        };
    }
    let total: f64 = s.iter().sum();
    if total <= 0.0 {
        return Classification {
            case: Case::Unsupported,
            reason: Some(format!("some sigma is negative and the sum of moduli is {total} <= 0")),
        };
    }
    Classification { case: Case::NonmonotoneA, reason: None }
}

/// `f_i(δ)` for 0-based block `i`; `+∞` when `σ_i σ_m δ >= 0`, `NaN` when the
/// point violates `σ_i + σ_m δ > 0`.
pub fn f_value(inp: &PlannerInput, i: usize, delta: f64) -> f64 {
    let (si, sm, li) = (inp.sigmas[i], inp.sigma_m(), inp.weights.as_slice()[i]);
    let s = si + sm * delta;
    if s <= 0.0 {
        return f64::NAN;
    }
    let den = -si * sm * delta;
    if den <= 0.0 {
        f64::INFINITY
    } else {
        li * s / den
    }
}

/// The feasible point used to show the program is nonempty:
/// `δ_i = 1/|I| + (Σ_{j≠i} σ_j - (|I| - 1) σ_i) / (σ_m |I|)` over `I`.
pub fn feasible_delta(sigmas: &[f64], index_set: &[usize]) -> Result<Vec<f64>> {
    let m = sigmas.len();
    if m < 2 || index_set.is_empty() {
        return Err(Error::invalid("feasible_delta needs m >= 2 and a nonempty index set"));
    }
    let sm = sigmas[m - 1];
    let total: f64 = sigmas.iter().sum();
    if sm == 0.0 || total <= 0.0 {
        return Err(Error::invalid(format!(
            "feasible_delta needs sigma_m != 0 and positive sum, got sigma_m = {sm}, sum = {total}"
        )));
    }
    let n = index_set.len() as f64;
    let sum_i: f64 = index_set.iter().map(|&i| sigmas[i]).sum();
    Ok(index_set
        .iter()
        .map(|&i| {
            let others = sum_i - sigmas[i];
            1.0 / n + (others - (n - 1.0) * sigmas[i]) / (sm * n)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlannerResult {
    pub case: Case,
    /// 1-based indices of `I`.
    pub index_set: Vec<usize>,
    /// `δ*` over `I`; absent in the monotone case.
    pub delta_star: Option<Vec<f64>>,
    /// `λ̄*`, `+∞` in the monotone case.
    #[serde(serialize_with = "ser_extended")]
    pub lambda_bar_star: f64,
    /// The common value `t* = f_i(δ*_i)`.
    #[serde(serialize_with = "ser_extended")]
    pub t_star: f64,
    /// Slacks `1 + (λ/λ_i) σ_i σ_m δ*_i / (σ_i + σ_m δ*_i) - μ/2` at
    /// `λ = 0.99 λ̄*`, one per element of `I`.
    pub certificate: Vec<f64>,
    /// Whether `g` was strictly monotone on a sample of its bracket.
    pub g_monotone: bool,
}

/// Serializes non-finite values as the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn ser_extended<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Slack of the convergence condition for each `i ∈ I` at step `lambda`.
pub fn certificate_slacks(inp: &PlannerInput, delta: &[f64], lambda: f64) -> Vec<f64> {
    let sm = inp.sigma_m();
    inp.index_set()
        .iter()
        .zip(delta)
        .map(|(&i, &d)| {
            let si = inp.sigmas[i];
            let li = inp.weights.as_slice()[i];
            1.0 + (lambda / li) * si * sm * d / (si + sm * d) - 0.5 * inp.mu
        })
        .collect()
}

pub const CERTIFICATE_FRACTION: f64 = 0.99;

/// `δ_i(t)` for 0-based block `i`.
fn delta_of_t(inp: &PlannerInput, i: usize, t: f64) -> f64 {
    let (si, li) = (inp.sigmas[i], inp.weights.as_slice()[i]);
    -li * si / (inp.sigma_m() * (t * si + li))
}

/// Solves the step-size program. Refuses unsupported inputs.
pub fn optimal_delta(inp: &PlannerInput) -> Result<PlannerResult> {
    inp.validate()?;
    let class = classify(inp);
    let index_set = inp.index_set();
    let one_based: Vec<usize> = index_set.iter().map(|i| i + 1).collect();
    match class.case {
        Case::Unsupported => return Err(Error::Unsupported(class.reason.unwrap_or_default())),
        Case::MonotoneB => {
            return Ok(PlannerResult {
                case: Case::MonotoneB,
                index_set: one_based,
                delta_star: None,
                lambda_bar_star: f64::INFINITY,
                t_star: f64::INFINITY,
                certificate: Vec::new(),
                g_monotone: true,
            })
        }
        Case::NonmonotoneA => {}
    }
    let sm = inp.sigma_m();
    let g = |t: f64| index_set.iter().map(|&i| delta_of_t(inp, i, t)).sum::<f64>() - 1.0;
    // Sign of g just below the right end of the bracket.
    let increasing = sm > 0.0;
    let t_max = index_set
        .iter()
        .filter(|&&i| inp.sigmas[i] < 0.0)
        .map(|&i| inp.weights.as_slice()[i] / -inp.sigmas[i])
        .fold(f64::INFINITY, f64::min);
    let hi = if t_max.is_finite() {
        t_max
    } else {
        let mut hi = 1.0;
        let mut steps = 0;
        while (g(hi) > 0.0) != increasing || g(hi) == 0.0 {
            hi *= 2.0;
            steps += 1;
            if steps > 2000 || !hi.is_finite() {
                return Err(Error::NoRoot { lo: 0.0, hi, g_lo: g(0.0), g_hi: g(hi) });
            }
        }
        hi
    };
    let g0 = g(0.0);
    if g0 == 0.0 || (g0 > 0.0) == increasing {
        return Err(Error::NoRoot { lo: 0.0, hi, g_lo: g0, g_hi: g(hi) });
    }
    // Bisect to full precision; the bracket end `hi` is excluded when it is a
    // pole of some δ_i.
    let (mut lo, mut up) = (0.0f64, hi);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + up);
        if mid <= lo || mid >= up {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            lo = mid;
            up = mid;
            break;
        }
        if (gm > 0.0) == increasing {
            up = mid;
        } else {
            lo = mid;
        }
    }
    let t_star = if up < hi && g(up).abs() < g(lo).abs() { up } else { lo };
    let delta: Vec<f64> = index_set.iter().map(|&i| delta_of_t(inp, i, t_star)).collect();
    let lambda_bar_star = (1.0 - 0.5 * inp.mu) * t_star;
    let certificate = certificate_slacks(inp, &delta, CERTIFICATE_FRACTION * lambda_bar_star);
    let g_monotone = g_is_monotone(&g, hi, increasing);
    Ok(PlannerResult {
        case: Case::NonmonotoneA,
        index_set: one_based,
        delta_star: Some(delta),
        lambda_bar_star,
        t_star,
        certificate,
        g_monotone,
    })
}

fn g_is_monotone(g: &dyn Fn(f64) -> f64, hi: f64, increasing: bool) -> bool {
    let n = 256;
    let mut prev = g(0.0);
    for k in 1..n {
        let v = g(hi * k as f64 / n as f64);
        if (increasing && v <= prev) || (!increasing && v >= prev) {
            return false;
        }
        prev = v;
    }
    true
}

/// Grid search over `{δ : Σ δ_i = 1, σ_i + σ_m δ_i > 0}`.
///
/// The feasible set is a simplex whose edges have length `|Σσ / σ_m|`. The
/// first `|I| - 1` coordinates are gridded at `grid` points per axis (cell
/// centres), and the last follows from the sum. With more than one free
/// coordinate the grid is refined by zooming on the incumbent at a coarser
/// per-axis resolution until cells reach the same size. Ties go to the
/// smaller `‖δ‖∞`.
pub fn brute_force_delta(inp: &PlannerInput, grid: usize) -> Result<(Vec<f64>, f64)> {
    inp.validate()?;
    if classify(inp).case != Case::NonmonotoneA {
        return Err(Error::Unsupported("brute-force search needs a nonmonotone (A) input".into()));
    }
    if grid == 0 {
        return Err(Error::EmptyGrid);
    }
    let idx = inp.index_set();
    let d = idx.len();
    let sm = inp.sigma_m();
    let scale = 1.0 - 0.5 * inp.mu;
    let objective = |delta: &[f64]| -> Option<f64> {
        let mut worst = f64::INFINITY;
        for (&i, &di) in idx.iter().zip(delta) {
            let f = f_value(inp, i, di);
            if f.is_nan() {
                return None;
            }
            worst = worst.min(f);
        }
        (worst.is_finite() && worst > 0.0).then_some(scale * worst)
    };
    if d == 1 {
        return objective(&[1.0]).map(|v| (vec![1.0], v)).ok_or(Error::EmptyGrid);
    }
    // Box of the simplex in each coordinate.
    let bound: Vec<f64> = idx.iter().map(|&i| -inp.sigmas[i] / sm).collect();
    let total_bound: f64 = bound.iter().sum();
    let (lo, hi): (Vec<f64>, Vec<f64>) = if sm > 0.0 {
        (bound.clone(), bound.iter().map(|b| 1.0 - (total_bound - b)).collect())
    } else {
        (bound.iter().map(|b| 1.0 - (total_bound - b)).collect(), bound.clone())
    };
    let free = d - 1;
    let target_cell = (hi[0] - lo[0]) / grid as f64;
    let per_axis = if free == 1 { grid } else { grid.clamp(3, 41) };
    let mut win_lo: Vec<f64> = lo[..free].to_vec();
    let mut win_hi: Vec<f64> = hi[..free].to_vec();
    let mut best: Option<(Vec<f64>, f64)> = None;
    loop {
        let cells: Vec<f64> = (0..free).map(|a| (win_hi[a] - win_lo[a]) / per_axis as f64).collect();
        let mut counter = vec![0usize; free];
        let mut delta = vec![0.0; d];
        let mut level_best: Option<(Vec<f64>, f64)> = None;
        'scan: loop {
            let mut partial = 0.0;
            for a in 0..free {
                delta[a] = win_lo[a] + (counter[a] as f64 + 0.5) * cells[a];
                partial += delta[a];
            }
            delta[free] = 1.0 - partial;
            if let Some(v) = objective(&delta) {
                let better = match &level_best {
                    None => true,
                    Some((bd, bv)) => v > *bv || (v == *bv && inf_norm(&delta) < inf_norm(bd)),
                };
                if better {
                    level_best = Some((delta.clone(), v));
                }
            }
            for a in 0..free {
                counter[a] += 1;
                if counter[a] < per_axis {
                    continue 'scan;
                }
                counter[a] = 0;
            }
            break;
        }
        if let Some((bd, bv)) = level_best {
            let replace = match &best {
                None => true,
                Some((_, v)) => bv >= *v,
            };
            if replace {
                best = Some((bd, bv));
            }
        }
        let Some((centre, _)) = &best else { return Err(Error::EmptyGrid) };
        if free == 1 || cells.iter().all(|&c| c <= target_cell) {
            break;
        }
        for a in 0..free {
            let half = 4.0 * cells[a];
            win_lo[a] = (centre[a] - half).max(lo[a]);
            win_hi[a] = (centre[a] + half).min(hi[a]);
        }
    }
    best.ok_or(Error::EmptyGrid)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Step bound from applying two-operator results to the product space with
/// equal weights. `Err(Unsupported)` when neither condition applies.
pub fn naive_stepsize(sigmas: &[f64], mu: f64) -> Result<f64> {
    let m = sigmas.len();
    if m < 2 {
        return Err(Error::invalid("need at least 2 moduli"));
    }
    let sm = sigmas[m - 1];
    let sh = sigmas[..m - 1].iter().copied().fold(f64::INFINITY, f64::min);
    if sh == 0.0 && sm == 0.0 {
        return Ok(f64::INFINITY);
    }
    let k = (m - 1) as f64;
    if sh + sm / k > 0.0 {
        let den = sh * k + sm;
        let q = sh * sm / den;
        if q < 0.0 {
            return Ok((0.5 * mu - 1.0) * den / (k * sh * sm));
        }
        return Ok(f64::INFINITY);
    }
    Err(Error::Unsupported(format!("naive condition fails: min sigma_i + sigma_m/(m-1) = {} <= 0", sh + sm / k)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothBounds {
    /// `γ̄_i` per smooth block.
    pub gamma_bar: Vec<f64>,
    /// `min_i λ_i γ̄_i`.
    pub lambda_max: f64,
}

fn check_smooth(l: &[f64], sigmas: &[f64], mu: f64) -> Result<()> {
    if l.len() != sigmas.len() {
        return Err(Error::BlockCount { expected: sigmas.len(), found: l.len() });
    }
    if !(mu > 0.0 && mu < 2.0) {
        return Err(Error::invalid(format!("mu must lie in (0, 2), got {mu}")));
    }
    for (i, (&li, &si)) in l.iter().zip(sigmas).enumerate() {
        if !(li.is_finite() && li >= 0.0 && si <= 0.0 && si >= -li) {
            return Err(Error::invalid(format!("block {}: sigma {si} outside [-L, 0] with L = {li}", i + 1)));
        }
    }
    Ok(())
}

/// Step bounds for smooth blocks with `σ_i ∈ [-L_i, 0]`.
pub fn smooth_stepsize(l: &[f64], sigmas: &[f64], weights: &Weights, mu: f64) -> Result<SmoothBounds> {
    check_smooth(l, sigmas, mu)?;
    if weights.len() != l.len() {
        return Err(Error::BlockCount { expected: l.len(), found: weights.len() });
    }
    let gamma_bar: Vec<f64> = l
        .iter()
        .zip(sigmas)
        .map(|(&li, &si)| {
            if -2.0 * si < (2.0 - mu) * li {
                1.0 / li
            } else if si == 0.0 {
                f64::INFINITY
            } else {
                -(1.0 - 0.5 * mu) / si
            }
        })
        .collect();
    let lambda_max = gamma_bar.iter().zip(weights.as_slice()).map(|(g, w)| g * w).fold(f64::INFINITY, f64::min);
    Ok(SmoothBounds { gamma_bar, lambda_max })
}

/// Descent coefficients `c_i(γ_i)` for the merit `V_k`.
pub fn smooth_coefficients(l: &[f64], sigmas: &[f64], gammas: &[f64], mu: f64) -> Result<Vec<f64>> {
    check_smooth(l, sigmas, mu)?;
    if gammas.len() != l.len() {
        return Err(Error::BlockCount { expected: l.len(), found: gammas.len() });
    }
    Ok(l.iter()
        .zip(sigmas)
        .zip(gammas)
        .map(|((&li, &si), &g)| {
            let alpha = if li + si == 0.0 { f64::INFINITY } else { mu / (2.0 * (li + si)) };
            let beta = if si == 0.0 { f64::INFINITY } else { -(1.0 - 0.5 * mu) / si };
            let c = if -2.0 * si < (2.0 - mu) * li && alpha < g && g < beta { li } else { si };
            -(2.0 * g * g * c * c - mu * g * c - (2.0 - mu)) / (2.0 * mu * g)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inp(s: &[f64], w: &[f64], mu: f64) -> PlannerInput {
        PlannerInput::new(s.to_vec(), Weights::new(w.to_vec()).unwrap(), mu).unwrap()
    }

    #[test]
    fn classify_examples() {
        let third = 1.0 / 3.0;
        let w3 = [third, third, 1.0 - 2.0 * third];
        assert_eq!(classify(&inp(&[0.0, 0.0, 0.0], &[0.5, 0.5], 1.0)).case, Case::MonotoneB);
        assert_eq!(classify(&inp(&[0.0, 1.0, -0.1, -0.1], &w3, 1.0)).case, Case::NonmonotoneA);
        assert_eq!(classify(&inp(&[-1.0, 0.5], &[1.0], 1.0)).case, Case::Unsupported);
        let c = classify(&inp(&[-1.0, 3.0, 0.0], &[0.5, 0.5], 1.0));
        assert_eq!(c.case, Case::Unsupported);
        assert!(c.reason.unwrap().contains("reorder"));
    }

    #[test]
    fn two_operator_closed_form() {
        let r = optimal_delta(&inp(&[-1.0, 2.0], &[1.0], 1.0)).unwrap();
        assert_eq!(r.delta_star, Some(vec![1.0]));
        assert!((r.lambda_bar_star - 0.25).abs() < 1e-12);
        let (_, lb) = brute_force_delta(&inp(&[-1.0, 2.0], &[1.0], 1.0), 100).unwrap();
        assert!((lb - 0.25).abs() < 1e-12);
    }

    #[test]
    fn feasible_delta_example() {
        let d = feasible_delta(&[-1.0, 3.0, 2.0], &[0, 1]).unwrap();
        assert!((d[0] - 1.5).abs() < 1e-15 && (d[1] + 0.5).abs() < 1e-15);
        assert_eq!(feasible_delta(&[-1.0, 2.0], &[0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn monotone_gives_infinite_step() {
        let r = optimal_delta(&inp(&[0.0, 1.0, 2.0], &[0.5, 0.5], 1.0)).unwrap();
        assert_eq!(r.case, Case::MonotoneB);
        assert!(r.lambda_bar_star.is_infinite() && r.delta_star.is_none());
    }

    #[test]
    fn naive_examples() {
        assert!((naive_stepsize(&[-1.0, 2.0], 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(naive_stepsize(&[-1.0, 3.0, 0.5], 1.0), Err(Error::Unsupported(_))));
        assert!(naive_stepsize(&[0.0, 0.0, 0.0], 1.0).unwrap().is_infinite());
    }

    #[test]
    fn smooth_branches() {
        let w = Weights::new(vec![1.0]).unwrap();
        assert_eq!(smooth_stepsize(&[1.0], &[-1.0], &w, 1.0).unwrap().gamma_bar, vec![0.5]);
        assert_eq!(smooth_stepsize(&[1.0], &[-0.1], &w, 1.0).unwrap().gamma_bar, vec![1.0]);
        assert_eq!(smooth_stepsize(&[2.0], &[0.0], &w, 1.0).unwrap().gamma_bar, vec![0.5]);
        assert!(smooth_stepsize(&[1.0], &[0.5], &w, 1.0).is_err());
        assert!(smooth_stepsize(&[1.0], &[-2.0], &w, 1.0).is_err());
        let c = smooth_coefficients(&[1.0, 1.0], &[-0.1, -1.0], &[0.9, 0.45], 1.0).unwrap();
        assert!(c.iter().all(|&v| v > 0.0), "{c:?}");
    }
}
