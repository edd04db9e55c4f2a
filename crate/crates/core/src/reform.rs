//! Product-space reformulation of `0 ∈ A_1(x) + ... + A_m(x)` on `H^{m-1}`.
//!
//! With `Λ = diag(λ_1, ..., λ_{m-1})`, the first `m - 1` operators form the
//! blockwise operator `F`, and `A_m` together with the diagonal subspace forms
//! `G`. Only the warped resolvents of `F` and `G` are needed:
//!
//! * `J_F(x)_i = J_{(λ/λ_i) A_i}(x_i)`
//! * `J_G(x) = (a, ..., a)` with `a = J_{λ A_m}(Σ λ_i x_i)`

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{embed, weighted_average, Point, Shape, Stack, Weights};
use crate::operator::OperatorSpec;

#[derive(Clone, Debug)]
pub struct InclusionProblem {
    operators: Vec<OperatorSpec>,
    shape: Shape,
}

impl InclusionProblem {
    pub fn new(operators: Vec<OperatorSpec>, shape: Shape) -> Result<Self> {
        if operators.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 operators, got {}", operators.len())));
        }
        for (i, op) in operators.iter().enumerate() {
            if let Some(s) = op.fixed_shape() {
                if s != shape {
                    return Err(Error::invalid(format!("operator {} acts on {s}, problem shape is {shape}", i + 1)));
                }
            }
        }
        Ok(InclusionProblem { operators, shape })
    }

    pub fn operators(&self) -> &[OperatorSpec] {
        &self.operators
    }

    pub fn operator(&self, i: usize) -> &OperatorSpec {
        &self.operators[i]
    }

    /// `A_m`.
    pub fn last(&self) -> &OperatorSpec {
        self.operators.last().expect("at least two operators")
    }

    /// The number of operators `m`.
    pub fn m(&self) -> usize {
        self.operators.len()
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.operators.iter().map(OperatorSpec::sigma).collect()
    }
}

/// Weights, step `λ`, and the per-block steps `γ_i = λ/λ_i`, validated to
/// satisfy `1 + γ_i σ_i > 0` and `1 + λ σ_m > 0`.
#[derive(Clone, Debug)]
pub struct ReformulationContext {
    weights: Weights,
    lambda: f64,
    gammas: Vec<f64>,
}

impl ReformulationContext {
    pub fn new(prob: &InclusionProblem, weights: Weights, lambda: f64) -> Result<Self> {
        if weights.len() != prob.m() - 1 {
            return Err(Error::BlockCount { expected: prob.m() - 1, found: weights.len() });
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be positive and finite, got {lambda}")));
        }
        let gammas: Vec<f64> = weights.as_slice().iter().map(|l| lambda / l).collect();
        for (i, (g, op)) in gammas.iter().zip(prob.operators()).enumerate() {
            let margin = 1.0 + g * op.sigma();
            if margin <= 0.0 {
                return Err(Error::IllPosedBlock { block: i + 1, margin });
            }
        }
        let margin = 1.0 + lambda * prob.last().sigma();
        if margin <= 0.0 {
            return Err(Error::IllPosedBlock { block: prob.m(), margin });
        }
        Ok(ReformulationContext { weights, lambda, gammas })
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    fn check_stack(&self, prob: &InclusionProblem, x: &Stack) -> Result<()> {
        if x.block_count() != prob.m() - 1 {
            return Err(Error::BlockCount { expected: prob.m() - 1, found: x.block_count() });
        }
        if x.shape() != prob.shape() {
            return Err(Error::ShapeMismatch { expected: prob.shape(), found: x.shape() });
        }
        Ok(())
    }
}

/// Blockwise `J_{(λ/λ_i) A_i}(x_i)`.
pub fn resolvent_f_warped(ctx: &ReformulationContext, prob: &InclusionProblem, x: &Stack) -> Result<Stack> {
    ctx.check_stack(prob, x)?;
    let blocks = x
        .blocks()
        .iter()
        .zip(&ctx.gammas)
        .zip(prob.operators())
        .map(|((xi, g), op)| op.resolvent(*g, xi))
        .collect::<Result<Vec<_>>>()?;
    Stack::new(blocks)
}

/// `J_{λ A_m}(Σ λ_i x_i)`, the common block of `J_G(x)`.
pub fn resolvent_g_point(ctx: &ReformulationContext, prob: &InclusionProblem, x: &Stack) -> Result<Point> {
    ctx.check_stack(prob, x)?;
    prob.last().resolvent(ctx.lambda, &weighted_average(x, &ctx.weights)?)
}

pub fn resolvent_g_warped(ctx: &ReformulationContext, prob: &InclusionProblem, x: &Stack) -> Result<Stack> {
    embed(&resolvent_g_point(ctx, prob, x)?, prob.m() - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMethod {
    /// `‖Σ A_i(z)‖` by direct evaluation.
    Evaluation,
    /// Subgradients `u_i ∈ A_i(p_i)` read off the last resolvent evaluations.
    ResolventRelations,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroCertificate {
    pub method: CertificateMethod,
    /// `‖Σ_i u_i‖` with `u_i ∈ A_i(·)`.
    pub residual: f64,
    /// For resolvent relations: `max_i ‖p_i - anchor‖`, the spread of the
    /// points at which the subgradients were taken.
    pub point_spread: Option<f64>,
    /// 1-based indices of operators that could not be evaluated.
    pub unverified: Vec<usize>,
    pub tol: f64,
    pub passed: bool,
}

/// Certifies `z` as a zero of `Σ A_i` by evaluating every operator. Operators
/// that are not single-valued are listed in `unverified` and the certificate
/// does not pass.
pub fn zero_certificate(prob: &InclusionProblem, z: &Point, tol: f64) -> Result<ZeroCertificate> {
    if z.shape() != prob.shape() {
        return Err(Error::ShapeMismatch { expected: prob.shape(), found: z.shape() });
    }
    let mut sum = Point::zeros(z.shape());
    let mut unverified = Vec::new();
    for (i, op) in prob.operators().iter().enumerate() {
        if op.is_single_valued() {
            sum = sum.add(&op.evaluate(z)?)?;
        } else {
            unverified.push(i + 1);
        }
    }
    let residual = sum.norm();
    Ok(ZeroCertificate {
        method: CertificateMethod::Evaluation,
        residual,
        point_spread: None,
        passed: unverified.is_empty() && residual <= tol,
        unverified,
        tol,
    })
}

/// Certificate from subgradients `u_i ∈ A_i(p_i)` extracted from resolvent
/// relations: passes when both `‖Σ u_i‖` and the spread of the `p_i` around
/// `anchor` are at most `tol`.
pub fn relation_certificate(
    points: &[Point],
    subgradients: &[Point],
    anchor: &Point,
    tol: f64,
) -> Result<ZeroCertificate> {
    if points.len() != subgradients.len() || points.is_empty() {
        return Err(Error::invalid("relation certificate needs one point per subgradient"));
    }
    let mut sum = Point::zeros(anchor.shape());
    for u in subgradients {
        sum = sum.add(u)?;
    }
    let mut spread = 0.0f64;
    for p in points {
        spread = spread.max(p.dist(anchor)?);
    }
    let residual = sum.norm();
    Ok(ZeroCertificate {
        method: CertificateMethod::ResolventRelations,
        residual,
        point_spread: Some(spread),
        unverified: Vec::new(),
        tol,
        passed: residual <= tol && spread <= tol,
    })
}
