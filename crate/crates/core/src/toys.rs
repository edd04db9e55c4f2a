//! Small seeded problem families shared by the verify suites and tests.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::hilbert::{Point, Shape, Weights};
use crate::operator::{Gradient, OperatorSpec, ProxDefined};
use crate::planner::{classify, Case, PlannerInput};
use crate::reform::InclusionProblem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `A_1(x) = x - 3`, `A_2(x) = x`, `A_3(x) = 2x` on `ℝ`; the zero is `0.75`.
pub fn affine_three() -> InclusionProblem {
    let ops = vec![
        OperatorSpec::scalar_affine(1.0, -3.0),
        OperatorSpec::scalar_affine(1.0, 0.0),
        OperatorSpec::scalar_affine(2.0, 0.0),
    ];
    InclusionProblem::new(ops, Shape::Vector(1)).expect("valid problem")
}

/// Random positive weights summing to one.
pub fn random_weights<R: Rng>(rng: &mut R, count: usize) -> Weights {
    loop {
        let raw: Vec<f64> = (0..count).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let head: f64 = w[..count - 1].iter().sum();
        w[count - 1] = 1.0 - head;
        if let Ok(w) = Weights::new(w) {
            return w;
        }
    }
}

/// Random orthogonal matrix from the QR factorization of a Gaussian-like draw.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

/// Symmetric matrix with smallest eigenvalue exactly `sigma` and the others in
/// `[sigma, sigma + spread]`.
pub fn random_symmetric_with_min<R: Rng>(rng: &mut R, n: usize, sigma: f64, spread: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let mut eig: Vec<f64> = (0..n).map(|_| sigma + rng.random_range(0.0..spread)).collect();
    eig[0] = sigma;
    let d = DMatrix::from_diagonal(&DVector::from_vec(eig));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// A random planner input in the nonmonotone case with `2 <= m <= max_m`.
pub fn random_nonmonotone_input<R: Rng>(rng: &mut R, max_m: usize, mu: f64) -> PlannerInput {
    loop {
        let m = rng.random_range(2..=max_m);
        let mut sigmas: Vec<f64> =
            (0..m - 1).map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random_range(-1.0..2.0) }).collect();
        let mag = rng.random_range(0.2..2.0);
        sigmas.push(if rng.random_bool(0.5) { mag } else { -mag });
        let weights = random_weights(rng, m - 1);
        let inp = PlannerInput { sigmas, weights, mu, lipschitz: None };
        if classify(&inp).case == Case::NonmonotoneA {
            return inp;
        }
    }
}

/// Affine operators `A_i(x) = M_i x + b_i` on `ℝ^dim` with `λ_min(M_i) = σ_i`.
pub fn affine_problem<R: Rng>(rng: &mut R, sigmas: &[f64], dim: usize) -> Result<InclusionProblem> {
    let ops = sigmas
        .iter()
        .map(|&s| {
            let m = random_symmetric_with_min(rng, dim, s, 2.0);
            let b = Point::vector((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
            OperatorSpec::affine(m, b, s)
        })
        .collect::<Result<Vec<_>>>()?;
    InclusionProblem::new(ops, Shape::Vector(dim))
}

/// Smooth nonconvex toy: `m = 3`, quadratics `f_i(x) = ½ xᵀQ_i x + b_iᵀx` with
/// `λ_min(Q_i) = σ_i < 0` and `‖Q_i‖ <= L_i`, and a ridge plus capped-ℓ1 last
/// term `f_3(x) = Σ_j (c/2) x_j² + β min(|x_j|, θ)` with an exact global prox.
pub struct SmoothToy {
    pub problem: InclusionProblem,
    pub sigmas: Vec<f64>,
    pub lipschitz: Vec<f64>,
}

pub const TOY_RIDGE: f64 = 0.5;
pub const TOY_BETA: f64 = 0.4;
pub const TOY_CAP: f64 = 0.3;

pub fn capped_l1_value(x: &Point) -> f64 {
    x.as_slice().iter().map(|&v| 0.5 * TOY_RIDGE * v * v + TOY_BETA * v.abs().min(TOY_CAP)).sum()
}

/// Global minimizer of `(c/2)w² + β min(|w|, θ) + (w - v)²/(2λ)` by comparing
/// the minimizers over `|w| <= θ`, `w >= θ` and `w <= -θ`.
pub fn capped_l1_prox_scalar(v: f64, lambda: f64) -> f64 {
    let (c, beta, theta) = (TOY_RIDGE, TOY_BETA, TOY_CAP);
    let obj = |w: f64| 0.5 * c * w * w + beta * w.abs().min(theta) + (w - v) * (w - v) / (2.0 * lambda);
    let soft = v.signum() * (v.abs() - lambda * beta).max(0.0);
    let inner = (soft / (1.0 + lambda * c)).clamp(-theta, theta);
    let outer = v / (1.0 + lambda * c);
    let candidates = [inner, outer.max(theta), outer.min(-theta)];
    let mut best = candidates[0];
    for &w in &candidates[1..] {
        let (a, b) = (obj(w), obj(best));
        if a < b || (a == b && w.abs() < best.abs()) {
            best = w;
        }
    }
    best
}

pub fn smooth_toy(seed: u64, dim: usize) -> Result<SmoothToy> {
    let mut rng = rng(seed);
    let mut ops = Vec::new();
    let mut sigmas = Vec::new();
    let mut lipschitz = Vec::new();
    for _ in 0..2 {
        let sigma = -rng.random_range(0.05..0.2);
        let l = 1.0;
        let q = random_symmetric_with_min(&mut rng, dim, sigma, l - sigma);
        let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (q1, q2, q3, b1, b2) = (q.clone(), q.clone(), q.clone(), b.clone(), b.clone());
        let g = Gradient {
            value: Arc::new(move |x: &Point| {
                let xv = DVector::from_column_slice(x.as_slice());
                0.5 * xv.dot(&(&q1 * &xv)) + xv.dot(&DVector::from_column_slice(&b1))
            }),
            grad: Arc::new(move |x: &Point| {
                let xv = DVector::from_column_slice(x.as_slice());
                Point::vector((&q2 * xv + DVector::from_column_slice(&b2)).iter().copied().collect())
            }),
            hessian: Some(Arc::new(move |_: &Point| q3.clone())),
        };
        let spec_l = q.symmetric_eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l = l.max(spec_l);
        ops.push(OperatorSpec::gradient(g, sigma, l)?);
        sigmas.push(sigma);
        lipschitz.push(l);
    }
    let last = ProxDefined {
        prox: Arc::new(|x: &Point, lambda: f64| Ok(x.map(|v| capped_l1_prox_scalar(v, lambda)))),
        value: Some(Arc::new(capped_l1_value)),
    };
    // The capped term is not σ-monotone for any σ; its exact prox is all the
    // merit analysis uses. The declared 0 only feeds the well-posedness check.
    ops.push(OperatorSpec::prox_defined(last, 0.0));
    Ok(SmoothToy { problem: InclusionProblem::new(ops, Shape::Vector(dim))?, sigmas, lipschitz })
}
