//! Seeded invariant suites behind `drsplit verify`.
//!
//! Each suite samples problems from a seed, checks a list of properties and
//! reports pass counts per property.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::{fejer_monitor, merit_descent_monitor, rate_monitor, DrParams, Solver, Variant};
use crate::error::{Error, Result};
use crate::hilbert::{embed, lambda_inner, lambda_norm, weighted_average, Point, Shape, Stack, Weights};
use crate::operator::OperatorSpec;
use crate::planner::{
    brute_force_delta, certificate_slacks, f_value, naive_stepsize, optimal_delta, smooth_coefficients,
    smooth_stepsize, PlannerInput,
};
use crate::prox::{
    phi, prox_existence_oracle, prox_grid_oracle, prox_phi_elementwise, prox_phi_scalar, prox_phi_spectral, prox_psd,
};
use crate::reform::{resolvent_f_warped, resolvent_g_warped, InclusionProblem, ReformulationContext};
use crate::toys;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Identities,
    Resolvents,
    Prox,
    Planner,
    Fejer,
    Merit,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = ["identities", "resolvents", "prox", "planner", "fejer", "merit", "all"];

    fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => {
                vec![Suite::Identities, Suite::Resolvents, Suite::Prox, Suite::Planner, Suite::Fejer, Suite::Merit]
            }
            s => vec![s],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i =
            [Suite::Identities, Suite::Resolvents, Suite::Prox, Suite::Planner, Suite::Fejer, Suite::Merit, Suite::All]
                .iter()
                .position(|s| s == self)
                .unwrap_or(0);
        f.write_str(Suite::NAMES[i])
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identities" => Suite::Identities,
            "resolvents" => Suite::Resolvents,
            "prox" => Suite::Prox,
            "planner" => Suite::Planner,
            "fejer" => Suite::Fejer,
            "merit" => Suite::Merit,
            "all" => Suite::All,
            other => {
                return Err(Error::invalid(format!(
                    "unknown suite {other:?}; expected one of {}",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: usize,
    pub total: usize,
    /// Largest measured value; a check passes when every value is within its
    /// limit.
    pub worst: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Accumulates pass counts and the worst violation for one property.
struct Tally {
    name: &'static str,
    passed: usize,
    total: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally { name, passed: 0, total: 0, worst: f64::NEG_INFINITY }
    }

    /// Records `value <= limit` as a pass.
    fn record(&mut self, value: f64, limit: f64) {
        self.total += 1;
        if value <= limit {
            self.passed += 1;
        }
        if value.is_nan() || value > self.worst {
            self.worst = value;
        }
    }

    fn flag(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { 1.0 }, 0.0);
    }

    fn finish(self) -> Check {
        Check {
            name: self.name.into(),
            ok: self.total > 0 && self.passed == self.total,
            passed: self.passed,
            total: self.total,
            worst: self.worst,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn random_point<R: Rng>(rng: &mut R, shape: Shape) -> Point {
    match shape {
        Shape::Vector(n) => Point::vector((0..n).map(|_| rng.random_range(-2.0..2.0)).collect()),
        Shape::Matrix(p) => {
            Point::symmetric(p, (0..p * p).map(|_| rng.random_range(-2.0..2.0)).collect()).expect("square data")
        }
    }
}

fn random_stack<R: Rng>(rng: &mut R, shape: Shape, count: usize) -> Stack {
    Stack::new((0..count).map(|_| random_point(rng, shape)).collect()).expect("nonempty")
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<SuiteReport>> {
    suite
        .expand()
        .into_iter()
        .map(|s| {
            let checks = match s {
                Suite::Identities => identities(seed)?,
                Suite::Resolvents => resolvents(seed)?,
                Suite::Prox => prox(seed)?,
                Suite::Planner => planner(seed)?,
                Suite::Fejer => fejer(seed)?,
                Suite::Merit => merit(seed)?,
                Suite::All => unreachable!(),
            };
            let passed = checks.iter().all(|c| c.ok);
            Ok(SuiteReport { suite: s.to_string(), seed, checks, passed })
        })
        .collect()
}

const SAMPLES: usize = 200;

fn identities(seed: u64) -> Result<Vec<Check>> {
    let mut rng = toys::rng(seed);
    let mut id1 = Tally::new("squared_norm_identity");
    let mut id2 = Tally::new("squared_norm_identity_rearranged");
    let mut sym = Tally::new("lambda_inner_symmetric");
    let mut bil = Tally::new("lambda_inner_bilinear");
    let mut pd = Tally::new("lambda_inner_positive_definite");
    let mut emb = Tally::new("embed_average_roundtrip");
    for _ in 0..SAMPLES {
        let shape = if rng.random_bool(0.5) {
            Shape::Vector(rng.random_range(1..6))
        } else {
            Shape::Matrix(rng.random_range(1..4))
        };
        let (x, y) = (random_point(&mut rng, shape), random_point(&mut rng, shape));
        let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let lhs = x.lin_comb(a, &y, b)?.norm_sq();
        let rhs = a * (a + b) * x.norm_sq() + b * (a + b) * y.norm_sq() - a * b * x.sub(&y)?.norm_sq();
        id1.record(rel(lhs, rhs), 1e-10);
        if (a + b).abs() > 1e-3 {
            let lhs = a * x.norm_sq() + b * y.norm_sq();
            let rhs = a * b / (a + b) * x.sub(&y)?.norm_sq() + x.lin_comb(a, &y, b)?.norm_sq() / (a + b);
            id2.record(rel(lhs, rhs), 1e-10);
        }

        let k = rng.random_range(1..5);
        let w = toys::random_weights(&mut rng, k);
        let (u, v, s) =
            (random_stack(&mut rng, shape, k), random_stack(&mut rng, shape, k), random_stack(&mut rng, shape, k));
        sym.record(rel(lambda_inner(&u, &v, &w)?, lambda_inner(&v, &u, &w)?), 1e-12);
        let c: f64 = rng.random_range(-2.0..2.0);
        let combo = lambda_inner(&u.lin_comb(c, &v, 1.0)?, &s, &w)?;
        bil.record(rel(combo, c * lambda_inner(&u, &s, &w)? + lambda_inner(&v, &s, &w)?), 1e-10);
        let zero = Stack::new(vec![Point::zeros(shape); k])?;
        pd.flag(lambda_inner(&u, &u, &w)? > 0.0 && lambda_inner(&zero, &zero, &w)? == 0.0);
        let e = embed(&x, k)?;
        emb.flag(embed(&weighted_average(&e, &w)?, k)? == e);
    }
    Ok(vec![id1.finish(), id2.finish(), sym.finish(), bil.finish(), pd.finish(), emb.finish()])
}

/// Scalar root of `w + γ a(w) = x` for increasing `w + γ a(w)` by bisection.
fn bisect_resolvent(a: impl Fn(f64) -> f64, gamma: f64, x: f64) -> f64 {
    let h = |w: f64| w + gamma * a(w) - x;
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while h(lo) > 0.0 {
        lo *= 2.0;
    }
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn resolvents(seed: u64) -> Result<Vec<Check>> {
    let mut rng = toys::rng(seed);
    let mut coco = Tally::new("resolvent_cocoercive");
    let mut mono = Tally::new("sigma_monotone");
    let mut refl = Tally::new("reflected_resolvent_bound");
    let mut jf = Tally::new("warped_f_contraction");
    let mut jg = Tally::new("warped_g_contraction");
    let mut rf = Tally::new("reflected_warped_f");
    let mut rg = Tally::new("reflected_warped_g");
    let mut f_scalar = Tally::new("warped_f_scalar_bisection");
    let mut g_scalar = Tally::new("warped_g_scalar_bisection");
    let mut empty = Tally::new("concave_prox_empty_resolvent_defined");

    let ops_at = |rng: &mut ChaCha8Rng| -> Result<(OperatorSpec, Shape)> {
        Ok(match rng.random_range(0..5) {
            0 => {
                let n = rng.random_range(1..5);
                let s = rng.random_range(-1.0..1.0);
                let m = toys::random_symmetric_with_min(rng, n, s, 2.0);
                let b = random_point(rng, Shape::Vector(n));
                (OperatorSpec::affine(m, b, s)?, Shape::Vector(n))
            }
            1 => (
                OperatorSpec::phi_elementwise(rng.random_range(0.05..1.0), rng.random_range(0.0..2.0))?,
                Shape::Vector(3),
            ),
            2 => {
                (OperatorSpec::phi_spectral(rng.random_range(0.05..1.0), rng.random_range(0.0..2.0))?, Shape::Matrix(3))
            }
            3 => (OperatorSpec::psd_indicator(), Shape::Matrix(3)),
            _ => {
                let t = random_point(rng, Shape::Matrix(3));
                (OperatorSpec::quadratic_tracking(t), Shape::Matrix(3))
            }
        })
    };
    for _ in 0..SAMPLES {
        let (op, shape) = ops_at(&mut rng)?;
        let s = op.sigma();
        let gamma = if s < 0.0 { rng.random_range(0.05..0.95) / -s } else { rng.random_range(0.05..3.0) };
        let (x, y) = (random_point(&mut rng, shape), random_point(&mut rng, shape));
        let (jx, jy) = (op.resolvent(gamma, &x)?, op.resolvent(gamma, &y)?);
        let dj = jx.sub(&jy)?;
        let dx = x.sub(&y)?;
        let scale = 1e-9 * (1.0 + dx.norm_sq());
        coco.record((1.0 + gamma * s) * dj.norm_sq() - dx.dot(&dj)?, scale);
        let rx = jx.lin_comb(2.0, &x, -1.0)?;
        let ry = jy.lin_comb(2.0, &y, -1.0)?;
        refl.record(rx.sub(&ry)?.norm_sq() - dx.norm_sq() + 4.0 * gamma * s * dj.norm_sq(), scale);
        if op.is_single_valued() {
            let da = op.evaluate(&x)?.sub(&op.evaluate(&y)?)?;
            mono.record(s * dx.norm_sq() - dx.dot(&da)?, scale);
        }
    }

    // Warped resolvents on random certified affine problems.
    for _ in 0..SAMPLES / 4 {
        let inp = toys::random_nonmonotone_input(&mut rng, 5, 1.0);
        let plan = optimal_delta(&inp)?;
        let lambda = rng.random_range(0.1..0.99) * plan.lambda_bar_star;
        let dim = rng.random_range(1..4);
        let prob = toys::affine_problem(&mut rng, &inp.sigmas, dim)?;
        let ctx = ReformulationContext::new(&prob, inp.weights.clone(), lambda)?;
        let k = inp.m() - 1;
        let w = inp.weights.as_slice();
        let (x, y) = (random_stack(&mut rng, Shape::Vector(dim), k), random_stack(&mut rng, Shape::Vector(dim), k));
        let (a, b) = (resolvent_f_warped(&ctx, &prob, &x)?, resolvent_f_warped(&ctx, &prob, &y)?);
        let dx = x.sub(&y)?;
        let da = a.sub(&b)?;
        let denom = (0..k).map(|i| w[i] + lambda * inp.sigmas[i]).fold(f64::INFINITY, f64::min);
        jf.record(da.norm_sq().sqrt() - inp.weights.max() / denom * dx.norm_sq().sqrt(), 1e-9);
        let ra = a.lin_comb(2.0, &x, -1.0)?.sub(&b.lin_comb(2.0, &y, -1.0)?)?;
        let sig_term: f64 = (0..k).map(|i| inp.sigmas[i] * da.block(i).norm_sq()).sum();
        let lhs = lambda_norm(&ra, &inp.weights)?.powi(2);
        let rhs = lambda_norm(&dx, &inp.weights)?.powi(2) - 4.0 * lambda * sig_term;
        rf.record(lhs - rhs, 1e-9 * (1.0 + rhs.abs()));

        let (ga, gb) = (resolvent_g_warped(&ctx, &prob, &x)?, resolvent_g_warped(&ctx, &prob, &y)?);
        let dg = ga.sub(&gb)?;
        let sm = inp.sigma_m();
        jg.record(lambda_norm(&dg, &inp.weights)? - lambda_norm(&dx, &inp.weights)? / (1.0 + lambda * sm), 1e-9);
        let rga = ga.lin_comb(2.0, &x, -1.0)?.sub(&gb.lin_comb(2.0, &y, -1.0)?)?;
        let lhs = lambda_norm(&rga, &inp.weights)?.powi(2);
        let rhs = lambda_norm(&dx, &inp.weights)?.powi(2) - 4.0 * lambda * sm * lambda_norm(&dg, &inp.weights)?.powi(2);
        rg.record(lhs - rhs, 1e-9 * (1.0 + rhs.abs()));
    }

    // Scalar definitional checks: z_i + γ_i A_i(z_i) = x_i and
    // y + λ A_m(y) = Σ λ_i x_i.
    for _ in 0..SAMPLES {
        let inp = toys::random_nonmonotone_input(&mut rng, 4, 1.0);
        let plan = optimal_delta(&inp)?;
        let lambda = rng.random_range(0.1..0.99) * plan.lambda_bar_star;
        let coef: Vec<(f64, f64)> = inp.sigmas.iter().map(|&s| (s, rng.random_range(-2.0..2.0))).collect();
        let ops = coef.iter().map(|&(a, b)| OperatorSpec::scalar_affine(a, b)).collect();
        let prob = InclusionProblem::new(ops, Shape::Vector(1))?;
        let ctx = ReformulationContext::new(&prob, inp.weights.clone(), lambda)?;
        let k = inp.m() - 1;
        let x = random_stack(&mut rng, Shape::Vector(1), k);
        let z = resolvent_f_warped(&ctx, &prob, &x)?;
        for i in 0..k {
            let (a, b) = coef[i];
            let oracle = bisect_resolvent(|w| a * w + b, ctx.gammas()[i], x.block(i).as_slice()[0]);
            f_scalar.record((z.block(i).as_slice()[0] - oracle).abs(), 1e-8);
        }
        let g = resolvent_g_warped(&ctx, &prob, &x)?;
        let (a, b) = coef[k];
        let xbar: f64 = (0..k).map(|i| inp.weights.as_slice()[i] * x.block(i).as_slice()[0]).sum();
        let oracle = bisect_resolvent(|w| a * w + b, lambda, xbar);
        g_scalar.record((0..k).map(|i| (g.block(i).as_slice()[0] - oracle).abs()).fold(0.0, f64::max), 1e-8);
    }

    // f(t) = -t²/2 with γ > 1: the prox objective is unbounded below, the
    // resolvent of ∇f = -Id is t/(1 - γ).
    let neg = OperatorSpec::scalar_affine(-1.0, 0.0);
    for _ in 0..20 {
        let gamma = rng.random_range(1.05..4.0);
        let t = rng.random_range(-3.0..3.0);
        let none = prox_existence_oracle(|w| -0.5 * w * w, t, gamma).is_none();
        let refused = neg.resolvent(gamma, &Point::scalar(t)).is_err();
        let r = neg.resolvent_unchecked(gamma, &Point::scalar(t))?.as_slice()[0];
        empty.flag(none && refused && rel(r, t / (1.0 - gamma)) <= 1e-12);
    }
    Ok(vec![
        coco.finish(),
        mono.finish(),
        refl.finish(),
        jf.finish(),
        jg.finish(),
        rf.finish(),
        rg.finish(),
        f_scalar.finish(),
        g_scalar.finish(),
        empty.finish(),
    ])
}

fn prox(seed: u64) -> Result<Vec<Check>> {
    let mut rng = toys::rng(seed);
    let mut grid = Tally::new("prox_phi_scalar_grid_oracle");
    let mut firm = Tally::new("prox_phi_shrinks_and_keeps_sign");
    let mut stat = Tally::new("prox_phi_stationarity");
    let mut idem = Tally::new("prox_psd_idempotent");
    let mut psd_best = Tally::new("prox_psd_beats_sampled_candidates");
    let mut spec = Tally::new("spectral_prox_orthogonal_equivariant");
    let mut elem = Tally::new("elementwise_prox_permutation_equivariant");
    for i in 0..SAMPLES {
        let omega: f64 = rng.random_range(0.0..2.0);
        let kappa = (rng.random_range(0.0..0.99) / omega.max(1e-3)).min(2.0);
        let t = rng.random_range(-3.0..3.0);
        let p = prox_phi_scalar(t, omega, kappa)?;
        if i < SAMPLES / 4 {
            let oracle = prox_grid_oracle(|w| kappa * phi(w, omega), t, 1.0, t.abs() + 0.01, 1e-6);
            grid.record((p - oracle).abs(), 1e-5);
        }
        firm.flag(p.abs() <= t.abs() && (p == 0.0 || p.signum() == t.signum()));
        if p != 0.0 {
            // φ'(w) = sign(w) / (1 + ω|w|/2)².
            let d = p.signum() / (1.0 + 0.5 * omega * p.abs()).powi(2);
            stat.record((t - p - kappa * d).abs(), 1e-8);
        }

        let x = random_point(&mut rng, Shape::Matrix(3));
        let px = prox_psd(&x)?;
        idem.record(prox_psd(&px)?.dist(&px)?, 1e-12);
        if i < 10 {
            let d0 = px.dist(&x)?;
            let mut beaten = false;
            for _ in 0..1000 {
                let b = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-2.0..2.0));
                let c = Point::from_matrix(&(&b * b.transpose()))?;
                beaten |= c.dist(&x)? < d0 - 1e-12;
            }
            psd_best.flag(!beaten);
        }

        let q = toys::random_orthogonal(&mut rng, 3);
        let tau: f64 = rng.random_range(0.05..0.5);
        let gamma = (rng.random_range(0.1..0.9) / (tau * omega.max(1e-3))).min(3.0);
        let conj = |m: &Point| Point::from_matrix(&(&q * m.to_matrix() * q.transpose()));
        let lhs = prox_phi_spectral(&conj(&x)?, omega, tau, gamma)?;
        let rhs = conj(&prox_phi_spectral(&x, omega, tau, gamma)?)?;
        spec.record(lhs.dist(&rhs)?, 1e-9);

        let v = random_point(&mut rng, Shape::Vector(6));
        let mut perm: Vec<usize> = (0..6).collect();
        perm.shuffle(&mut rng);
        let permute = |p: &Point| Point::vector(perm.iter().map(|&j| p.as_slice()[j]).collect());
        let lhs = prox_phi_elementwise(&permute(&v), omega, tau, gamma)?;
        let rhs = permute(&prox_phi_elementwise(&v, omega, tau, gamma)?);
        elem.record(lhs.dist(&rhs)?, 0.0);
    }
    Ok(vec![
        grid.finish(),
        firm.finish(),
        stat.finish(),
        idem.finish(),
        psd_best.finish(),
        spec.finish(),
        elem.finish(),
    ])
}

/// One row of the planner oracle comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlannerAgreement {
    pub instance: usize,
    pub m: usize,
    pub sigmas: String,
    pub weights: String,
    pub lambda_bar_star: f64,
    pub brute_force: f64,
    pub relative_gap: f64,
    /// Largest relative spread of the `f_i(δ*_i)` over `I`.
    pub equalization: f64,
    /// `Σ δ*_i - 1`.
    pub sum_error: f64,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";")
}

pub const PLANNER_GRID: usize = 100_000;

/// Compares the closed-form planner with the grid oracle on `count` random
/// nonmonotone inputs with `m <= max_m`.
pub fn planner_agreement(seed: u64, count: usize, max_m: usize) -> Result<Vec<PlannerAgreement>> {
    let mut rng = toys::rng(seed);
    (0..count)
        .map(|instance| {
            let inp = toys::random_nonmonotone_input(&mut rng, max_m, 1.0);
            let plan = optimal_delta(&inp)?;
            let (_, brute) = brute_force_delta(&inp, PLANNER_GRID)?;
            let delta = plan.delta_star.clone().unwrap_or_default();
            let idx = inp.index_set();
            let fs: Vec<f64> = idx.iter().zip(&delta).map(|(&i, &d)| f_value(&inp, i, d)).collect();
            let equalization = fs.iter().map(|f| rel(*f, plan.t_star)).fold(0.0, f64::max);
            Ok(PlannerAgreement {
                instance,
                m: inp.m(),
                sigmas: join(&inp.sigmas),
                weights: join(inp.weights.as_slice()),
                lambda_bar_star: plan.lambda_bar_star,
                brute_force: brute,
                relative_gap: (plan.lambda_bar_star - brute).abs() / plan.lambda_bar_star,
                equalization,
                sum_error: delta.iter().sum::<f64>() - 1.0,
            })
        })
        .collect()
}

fn planner(seed: u64) -> Result<Vec<Check>> {
    let mut agree = Tally::new("oracle_agreement");
    let mut equal = Tally::new("equalization");
    for row in planner_agreement(seed, 100, 5)? {
        agree.record(row.relative_gap, 1e-3);
        equal.record(row.equalization.max(row.sum_error.abs()), 1e-9);
    }
    let mut rng = toys::rng(seed.wrapping_add(1));
    let mut slack = Tally::new("certificate_slacks_sign");
    let mut mono = Tally::new("root_function_monotone");
    let mut dom = Tally::new("dominates_naive");
    for _ in 0..100 {
        let mu = rng.random_range(0.2..1.8);
        let inp = toys::random_nonmonotone_input(&mut rng, 5, mu);
        let plan = optimal_delta(&inp)?;
        let d = plan.delta_star.clone().unwrap_or_default();
        let below = certificate_slacks(&inp, &d, 0.999 * plan.lambda_bar_star);
        let above = certificate_slacks(&inp, &d, 1.001 * plan.lambda_bar_star);
        slack.flag(below.iter().all(|&s| s > 0.0) && above.iter().any(|&s| s <= 0.0));
        mono.flag(plan.g_monotone);

        let eq = PlannerInput::new(inp.sigmas.clone(), Weights::equal(inp.m() - 1)?, inp.mu)?;
        if let (Ok(naive), Ok(p)) = (naive_stepsize(&eq.sigmas, eq.mu), optimal_delta(&eq)) {
            dom.record(naive - p.lambda_bar_star, 1e-12 * naive.abs());
        }
    }
    Ok(vec![agree.finish(), equal.finish(), slack.finish(), mono.finish(), dom.finish()])
}

/// Runs `run` until `iterations` with tolerance 0 and stored iterates.
fn fixed_run(
    prob: &InclusionProblem,
    mut params: DrParams,
    x0: Stack,
    iterations: usize,
) -> Result<crate::engine::RunResult> {
    params.tol = 0.0;
    params.max_iter = iterations;
    params.store_iterates = true;
    Solver::new(prob, params)?.run(x0)
}

fn fejer(seed: u64) -> Result<Vec<Check>> {
    let mut rng = toys::rng(seed);
    let mut exact = Tally::new("affine_three_shadow");
    let mut replay = Tally::new("fejer_replay");
    let mut nonexp = Tally::new("t_nonexpansive");
    let mut reflected = Tally::new("reflected_form");
    let mut variants = Tally::new("fg_gf_shadows_agree");
    let mut rate = Tally::new("rate_tail");

    let prob = toys::affine_three();
    let w = Weights::equal(2)?;
    let plan = optimal_delta(&PlannerInput::new(prob.sigmas(), w.clone(), 1.0)?)?;
    let lambda = if plan.lambda_bar_star.is_finite() { 0.95 * plan.lambda_bar_star } else { 1.0 };
    for variant in [Variant::FG, Variant::GF] {
        let mut params = DrParams::new(w.clone(), lambda, 1.0);
        params.variant = variant;
        let x0 = random_stack(&mut rng, Shape::Vector(1), 2);
        let long = fixed_run(&prob, params.clone(), x0.clone(), 4000)?;
        exact.record((long.shadow.as_slice()[0] - 0.75).abs(), 1e-8);
        let run = fixed_run(&prob, params, x0, 1000)?;
        let rep = fejer_monitor(run.iterates.as_deref().unwrap_or_default(), &long.state.x, &w)?;
        replay.flag(rep.passed);
    }

    for _ in 0..20 {
        let inp = toys::random_nonmonotone_input(&mut rng, 5, 1.0);
        let plan = optimal_delta(&inp)?;
        let lambda = 0.95 * plan.lambda_bar_star;
        let dim = 3;
        let prob = toys::affine_problem(&mut rng, &inp.sigmas, dim)?;
        let k = inp.m() - 1;
        let params = DrParams::new(inp.weights.clone(), lambda, inp.mu);
        let solver = Solver::new(&prob, params.clone())?;
        for _ in 0..5 {
            let (x, y) = (random_stack(&mut rng, Shape::Vector(dim), k), random_stack(&mut rng, Shape::Vector(dim), k));
            let (tx, ty) = (solver.t_map(&x)?, solver.t_map(&y)?);
            let lhs = lambda_norm(&tx.sub(&ty)?, &inp.weights)?.powi(2);
            let rhs = lambda_norm(&x.sub(&y)?, &inp.weights)?.powi(2);
            nonexp.record(lhs - rhs, 1e-9 * (1.0 + rhs));
            reflected
                .record(solver.t_map_reflected(&x)?.sub(&tx)?.norm_sq().sqrt(), 1e-12 * (1.0 + tx.norm_sq().sqrt()));
        }
        let x0 = random_stack(&mut rng, Shape::Vector(dim), k);
        let run = fixed_run(&prob, params.clone(), x0.clone(), 400)?;
        rate.flag(rate_monitor(&run.log).passed);
        let mut gf = params.clone();
        gf.variant = Variant::GF;
        let (mut a, mut b) = (params, gf);
        a.tol = 1e-20;
        b.tol = 1e-20;
        a.max_iter = 20_000;
        b.max_iter = 20_000;
        let sa = Solver::new(&prob, a)?.run(x0.clone())?;
        let sb = Solver::new(&prob, b)?.run(x0)?;
        variants.record(sa.shadow.dist(&sb.shadow)?, 1e-6);
    }
    Ok(vec![exact.finish(), replay.finish(), nonexp.finish(), reflected.finish(), variants.finish(), rate.finish()])
}

/// Weights and step giving `γ_i = fraction · γ̄_i` for the smooth blocks.
pub fn smooth_parameters(
    lipschitz: &[f64],
    sigmas: &[f64],
    mu: f64,
    fraction: f64,
) -> Result<(Weights, f64, Vec<f64>)> {
    let bounds = smooth_stepsize(lipschitz, sigmas, &Weights::equal(sigmas.len())?, mu)?;
    let gammas: Vec<f64> = bounds.gamma_bar.iter().map(|g| fraction * g).collect();
    let total: f64 = gammas.iter().map(|g| 1.0 / g).sum();
    let mut w: Vec<f64> = gammas.iter().map(|g| 1.0 / (g * total)).collect();
    let head: f64 = w[..w.len() - 1].iter().sum();
    let last = w.len() - 1;
    w[last] = 1.0 - head;
    Ok((Weights::new(w)?, 1.0 / total, gammas))
}

fn merit(seed: u64) -> Result<Vec<Check>> {
    let mut descent = Tally::new("merit_descent");
    let mut positive = Tally::new("descent_coefficients_positive");
    for s in 0..3 {
        let toy = toys::smooth_toy(seed.wrapping_add(s), 4)?;
        let mu = 1.0;
        let (weights, lambda, gammas) = smooth_parameters(&toy.lipschitz, &toy.sigmas, mu, 0.9)?;
        let c = smooth_coefficients(&toy.lipschitz, &toy.sigmas, &gammas, mu)?;
        positive.flag(c.iter().all(|&v| v > 0.0));
        let mut params = DrParams::new(weights, lambda, mu);
        params.tol = 0.0;
        params.max_iter = 300;
        params.store_iterates = true;
        let solver = Solver::new(&toy.problem, params)?;
        let mut rng = toys::rng(seed.wrapping_add(100 + s));
        let run = solver.run(random_stack(&mut rng, Shape::Vector(4), 2))?;
        let rep = merit_descent_monitor(&solver, run.iterates.as_deref().unwrap_or_default(), &c)?;
        for m in &rep.margins {
            descent.record(-m, crate::engine::MERIT_SLACK);
        }
    }
    Ok(vec![descent.finish(), positive.finish()])
}

/// Serializes rows with headers.
pub fn write_csv<T: Serialize, W: std::io::Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
