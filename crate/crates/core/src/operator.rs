//! Operators with single-valued resolvents.
//!
//! Every operator carries a monotonicity modulus `σ`: `<x - y, u - v> >= σ‖x - y‖²`
//! on its graph. Its resolvent `J_{γA} = (Id + γA)^{-1}` is single-valued with
//! full domain when `1 + γσ > 0`, and that is the only regime represented here.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::Weights;
use crate::hilbert::{Point, Shape};
use crate::linalg::{mat_vec, min_sym_eigenvalue, solve, sym_eigen};
use crate::prox::{phi, prox_phi_elementwise, prox_phi_spectral, prox_psd, prox_quadratic_tracking};

pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&Point) -> DMatrix<f64> + Send + Sync>;
pub type ProxFn = Arc<dyn Fn(&Point, f64) -> Result<Point> + Send + Sync>;

/// Inner-solve settings for gradient-kind resolvents.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 200;

/// The largest affine dimension for which `σ <= λ_min(M)` is checked.
const AFFINE_CHECK_DIM: usize = 256;

#[derive(Clone)]
pub struct Gradient {
    pub value: ScalarFn,
    pub grad: VectorFn,
    pub hessian: Option<HessianFn>,
}

#[derive(Clone)]
pub struct ProxDefined {
    pub prox: ProxFn,
    pub value: Option<ScalarFn>,
}

#[derive(Clone)]
pub enum OperatorKind {
    /// `A ≡ 0`.
    Zero,
    /// `A(x) = Mx + b` on vectors.
    Affine { matrix: DMatrix<f64>, offset: Point },
    /// `A = ∇f`.
    Gradient(Gradient),
    /// `A = ∂f` known only through `prox_{γf}`.
    ProxDefined(ProxDefined),
    /// Normal cone of the PSD cone.
    PsdIndicator,
    /// `A(x) = x - target`.
    QuadraticTracking { target: Point },
    /// `∂(τ Σ_j φ(x_j; ω))`.
    PhiElementwise { tau: f64, omega: f64 },
    /// `∂(τ Σ_i φ(s_i(x); ω))` on symmetric matrices.
    PhiSpectral { tau: f64, omega: f64 },
}

impl fmt::Debug for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorKind::Zero => write!(f, "Zero"),
            OperatorKind::Affine { matrix, offset } => {
                write!(f, "Affine {{ dim: {}, offset: {:?} }}", matrix.nrows(), offset.as_slice())
            }
            OperatorKind::Gradient(g) => write!(f, "Gradient {{ hessian: {} }}", g.hessian.is_some()),
            OperatorKind::ProxDefined(p) => write!(f, "ProxDefined {{ value: {} }}", p.value.is_some()),
            OperatorKind::PsdIndicator => write!(f, "PsdIndicator"),
            OperatorKind::QuadraticTracking { target } => write!(f, "QuadraticTracking {{ {} }}", target.shape()),
            OperatorKind::PhiElementwise { tau, omega } => write!(f, "PhiElementwise {{ tau: {tau}, omega: {omega} }}"),
            OperatorKind::PhiSpectral { tau, omega } => write!(f, "PhiSpectral {{ tau: {tau}, omega: {omega} }}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusSource {
    Declared,
    Derived,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Modulus {
    pub sigma: f64,
    pub source: ModulusSource,
}

#[derive(Clone, Debug)]
pub struct OperatorSpec {
    kind: OperatorKind,
    modulus: Modulus,
    lipschitz: Option<f64>,
}

impl OperatorSpec {
    pub fn zero() -> Self {
        Self::derived(OperatorKind::Zero, 0.0)
    }

    /// `A(x) = Mx + b` with declared modulus `sigma`, which must not exceed the
    /// smallest eigenvalue of the symmetric part of `M`.
    pub fn affine(matrix: DMatrix<f64>, offset: Point, sigma: f64) -> Result<Self> {
        Self::check_affine(&matrix, &offset)?;
        if matrix.nrows() <= AFFINE_CHECK_DIM {
            let lmin = min_sym_eigenvalue(&matrix)?;
            if sigma > lmin + 1e-12 * lmin.abs().max(1.0) {
                return Err(Error::invalid(format!(
                    "declared sigma {sigma} exceeds the smallest eigenvalue {lmin} of sym(M)"
                )));
            }
        }
        let lipschitz = Some(matrix.norm().max(sigma.abs()));
        Ok(OperatorSpec {
            kind: OperatorKind::Affine { matrix, offset },
            modulus: Modulus { sigma, source: ModulusSource::Declared },
            lipschitz,
        })
    }

    /// Affine operator with `σ = λ_min(sym M)`.
    pub fn affine_auto(matrix: DMatrix<f64>, offset: Point) -> Result<Self> {
        Self::check_affine(&matrix, &offset)?;
        let sigma = min_sym_eigenvalue(&matrix)?;
        let lipschitz = Some(matrix.norm().max(sigma.abs()));
        Ok(OperatorSpec {
            kind: OperatorKind::Affine { matrix, offset },
            modulus: Modulus { sigma, source: ModulusSource::Derived },
            lipschitz,
        })
    }

    /// Scalar `A(x) = a x + b`.
    pub fn scalar_affine(a: f64, b: f64) -> Self {
        Self::affine_auto(DMatrix::from_element(1, 1, a), Point::scalar(b)).expect("1x1 affine operator")
    }

    fn check_affine(matrix: &DMatrix<f64>, offset: &Point) -> Result<()> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid("affine matrix must be square"));
        }
        if offset.shape() != Shape::Vector(matrix.nrows()) {
            return Err(Error::ShapeMismatch { expected: Shape::Vector(matrix.nrows()), found: offset.shape() });
        }
        Ok(())
    }

    /// `A = ∇f` with `σ ∈ [-L, L]`.
    pub fn gradient(g: Gradient, sigma: f64, lipschitz: f64) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(Error::invalid(format!("lipschitz constant must be >= 0, got {lipschitz}")));
        }
        if sigma.abs() > lipschitz {
            return Err(Error::invalid(format!("sigma {sigma} outside [-L, L] with L = {lipschitz}")));
        }
        Ok(OperatorSpec {
            kind: OperatorKind::Gradient(g),
            modulus: Modulus { sigma, source: ModulusSource::Declared },
            lipschitz: Some(lipschitz),
        })
    }

    /// Operator given by its prox, with a user-declared modulus.
    pub fn prox_defined(p: ProxDefined, sigma: f64) -> Self {
        OperatorSpec {
            kind: OperatorKind::ProxDefined(p),
            modulus: Modulus { sigma, source: ModulusSource::Declared },
            lipschitz: None,
        }
    }

    pub fn psd_indicator() -> Self {
        Self::derived(OperatorKind::PsdIndicator, 0.0)
    }

    pub fn quadratic_tracking(target: Point) -> Self {
        let mut op = Self::derived(OperatorKind::QuadraticTracking { target }, 1.0);
        op.lipschitz = Some(1.0);
        op
    }

    pub fn phi_elementwise(tau: f64, omega: f64) -> Result<Self> {
        check_penalty(tau, omega)?;
        Ok(Self::derived(OperatorKind::PhiElementwise { tau, omega }, -tau * omega))
    }

    pub fn phi_spectral(tau: f64, omega: f64) -> Result<Self> {
        check_penalty(tau, omega)?;
        Ok(Self::derived(OperatorKind::PhiSpectral { tau, omega }, -tau * omega))
    }

    fn derived(kind: OperatorKind, sigma: f64) -> Self {
        OperatorSpec { kind, modulus: Modulus { sigma, source: ModulusSource::Derived }, lipschitz: None }
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.modulus.sigma
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    /// The shape the operator is tied to, if any.
    pub fn fixed_shape(&self) -> Option<Shape> {
        match &self.kind {
            OperatorKind::Affine { matrix, .. } => Some(Shape::Vector(matrix.nrows())),
            OperatorKind::QuadraticTracking { target } => Some(target.shape()),
            _ => None,
        }
    }

    /// Whether `A(x)` can be evaluated directly.
    pub fn is_single_valued(&self) -> bool {
        matches!(
            self.kind,
            OperatorKind::Zero
                | OperatorKind::Affine { .. }
                | OperatorKind::Gradient(_)
                | OperatorKind::QuadraticTracking { .. }
        )
    }

    /// `A(x)` for single-valued kinds.
    pub fn evaluate(&self, x: &Point) -> Result<Point> {
        match &self.kind {
            OperatorKind::Zero => Ok(Point::zeros(x.shape())),
            OperatorKind::Affine { matrix, offset } => {
                offset.check_same(x)?;
                Point::vector(mat_vec(matrix, x.as_slice())).add(offset)
            }
            OperatorKind::Gradient(g) => Ok((g.grad)(x)),
            OperatorKind::QuadraticTracking { target } => x.sub(target),
            other => Err(Error::NotEvaluable(format!("{other:?} is not single-valued"))),
        }
    }

    /// The function value `f(x)` for kinds that come from a potential.
    /// Affine kinds use `½ xᵀ sym(M) x + bᵀx`, which is a potential only when
    /// `M` is symmetric.
    pub fn value(&self, x: &Point) -> Result<f64> {
        match &self.kind {
            OperatorKind::Zero => Ok(0.0),
            OperatorKind::Affine { matrix, offset } => {
                offset.check_same(x)?;
                let mx = mat_vec(matrix, x.as_slice());
                let quad: f64 = mx.iter().zip(x.as_slice()).map(|(a, b)| a * b).sum();
                Ok(0.5 * quad + offset.dot(x)?)
            }
            OperatorKind::Gradient(g) => Ok((g.value)(x)),
            OperatorKind::ProxDefined(p) => match &p.value {
                Some(v) => Ok(v(x)),
                None => Err(Error::NotEvaluable("prox-defined operator has no function value".into())),
            },
            OperatorKind::PsdIndicator => {
                let (vals, _) = sym_eigen(x)?;
                let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                Ok(if vals[0] >= -1e-12 * scale { 0.0 } else { f64::INFINITY })
            }
            OperatorKind::QuadraticTracking { target } => Ok(0.5 * x.sub(target)?.norm_sq()),
            OperatorKind::PhiElementwise { tau, omega } => {
                Ok(tau * x.as_slice().iter().map(|&v| phi(v, *omega)).sum::<f64>())
            }
            OperatorKind::PhiSpectral { tau, omega } => {
                let (vals, _) = sym_eigen(x)?;
                Ok(tau * vals.iter().map(|&v| phi(v, *omega)).sum::<f64>())
            }
        }
    }

    /// `J_{γA}(x)`, requiring `γ > 0` and `1 + γσ > 0`.
    pub fn resolvent(&self, gamma: f64, x: &Point) -> Result<Point> {
        check_well_posed(gamma, self.sigma())?;
        self.resolvent_unchecked(gamma, x)
    }

    /// `J_{γA}(x)` without the modulus check. For affine operators this only
    /// needs `I + γM` to be invertible, so it also covers steps where the
    /// resolvent is single-valued although `1 + γσ <= 0`.
    pub fn resolvent_unchecked(&self, gamma: f64, x: &Point) -> Result<Point> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid(format!("resolvent step must be positive, got {gamma}")));
        }
        if let Some(shape) = self.fixed_shape() {
            if shape != x.shape() {
                return Err(Error::ShapeMismatch { expected: shape, found: x.shape() });
            }
        }
        match &self.kind {
            OperatorKind::Zero => Ok(x.clone()),
            OperatorKind::Affine { matrix, offset } => {
                let n = matrix.nrows();
                let a = DMatrix::identity(n, n) + matrix * gamma;
                let rhs = x.lin_comb(1.0, offset, -gamma)?;
                Ok(Point::vector(solve(a, rhs.as_slice())?))
            }
            OperatorKind::Gradient(g) => newton_resolvent(g, gamma, x),
            OperatorKind::ProxDefined(p) => {
                let out = (p.prox)(x, gamma)?;
                x.check_same(&out)?;
                Ok(out)
            }
            OperatorKind::PsdIndicator => prox_psd(x),
            OperatorKind::QuadraticTracking { target } => prox_quadratic_tracking(x, target, gamma),
            OperatorKind::PhiElementwise { tau, omega } => prox_phi_elementwise(x, *omega, *tau, gamma),
            OperatorKind::PhiSpectral { tau, omega } => prox_phi_spectral(x, *omega, *tau, gamma),
        }
    }

    /// `R_{γA}(x) = 2 J_{γA}(x) - x`.
    pub fn reflected_resolvent(&self, gamma: f64, x: &Point) -> Result<Point> {
        self.resolvent(gamma, x)?.lin_comb(2.0, x, -1.0)
    }
}

fn check_penalty(tau: f64, omega: f64) -> Result<()> {
    if !(tau.is_finite() && tau >= 0.0 && omega.is_finite() && omega >= 0.0) {
        return Err(Error::invalid(format!("penalty needs tau >= 0 and omega >= 0, got tau = {tau}, omega = {omega}")));
    }
    Ok(())
}

pub fn check_well_posed(gamma: f64, sigma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!("resolvent step must be positive, got {gamma}")));
    }
    let margin = 1.0 + gamma * sigma;
    if margin <= 0.0 {
        return Err(Error::IllPosed { gamma, sigma, margin });
    }
    Ok(())
}

/// Damped Newton on `h(w) = w + γ∇f(w) - x`, with a backtracking line search on
/// `‖h‖` and a bisection fallback in one dimension (where `h` is increasing).
fn newton_resolvent(g: &Gradient, gamma: f64, x: &Point) -> Result<Point> {
    let h = |w: &Point| -> Result<Point> {
        let gw = (g.grad)(w);
        w.lin_comb(1.0, &gw, gamma)?.sub(x)
    };
    let target = NEWTON_TOL * x.norm().max(1.0);
    let n = x.len();
    let mut w = x.clone();
    let mut hw = h(&w)?;
    let mut res = hw.norm();
    let mut iterations = 0;
    while res > target && iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let hess = match &g.hessian {
            Some(hf) => hf(&w),
            None => fd_jacobian(&g.grad, &w)?,
        };
        let jac = DMatrix::identity(n, n) + hess * gamma;
        let dir = match solve(jac, hw.as_slice()) {
            Ok(d) => Point::vector(d),
            Err(_) => hw.clone(),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = rebuild_like(&w, w.lin_comb(1.0, &dir, -t)?)?;
            let hc = h(&cand)?;
            let rc = hc.norm();
            if rc.is_finite() && rc < res {
                w = cand;
                hw = hc;
                res = rc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res > target && n == 1 {
        if let Some(v) = bisect_scalar(&h, x)? {
            return Ok(v);
        }
    }
    if res > target {
        return Err(Error::InnerSolve { residual: res, iterations });
    }
    Ok(w)
}

fn rebuild_like(like: &Point, p: Point) -> Result<Point> {
    match like.shape() {
        Shape::Vector(_) => Ok(p),
        Shape::Matrix(k) => Point::symmetric(k, p.into_vec()),
    }
}

fn bisect_scalar(h: &dyn Fn(&Point) -> Result<Point>, x: &Point) -> Result<Option<Point>> {
    let hv = |w: f64| -> Result<f64> { Ok(h(&Point::scalar(w))?.as_slice()[0]) };
    let x0 = x.as_slice()[0];
    let mut width = 1.0f64.max(x0.abs());
    let (mut lo, mut hi) = (x0 - width, x0 + width);
    let mut expansions = 0;
    while !(hv(lo)? <= 0.0 && hv(hi)? >= 0.0) {
        width *= 2.0;
        lo = x0 - width;
        hi = x0 + width;
        expansions += 1;
        if expansions > 60 {
            return Ok(None);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hv(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let w = if hv(lo)?.abs() <= hv(hi)?.abs() { lo } else { hi };
    Ok(Some(Point::scalar(w)))
}

fn fd_jacobian(grad: &VectorFn, w: &Point) -> Result<DMatrix<f64>> {
    let n = w.len();
    let mut jac = DMatrix::zeros(n, n);
    let base = w.as_slice().to_vec();
    for j in 0..n {
        let step = 1e-6 * base[j].abs().max(1.0);
        let mut plus = base.clone();
        plus[j] += step;
        let mut minus = base.clone();
        minus[j] -= step;
        let gp = grad(&Point::vector(plus));
        let gm = grad(&Point::vector(minus));
        for i in 0..n {
            jac[(i, j)] = (gp.as_slice()[i] - gm.as_slice()[i]) / (2.0 * step);
        }
    }
    Ok(jac)
}

/// `σ_F = min_i σ_i`.
pub fn modulus_of_f(sigmas: &[f64]) -> Result<Modulus> {
    if sigmas.is_empty() {
        return Err(Error::invalid("modulus_of_f needs at least one sigma"));
    }
    let sigma = sigmas.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Modulus { sigma, source: ModulusSource::Derived })
}

/// `σ_G = σ_m · min_i λ_i`.
pub fn modulus_of_g(sigma_m: f64, w: &Weights) -> Modulus {
    Modulus { sigma: sigma_m * w.min(), source: ModulusSource::Derived }
}
