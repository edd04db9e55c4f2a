//! Acceptance run: one line per criterion.
//!
//! Oracles here are written against the definitions (bisection, grids,
//! closed-form fixed points) rather than through the library code paths they
//! check. The process exits nonzero when a criterion fails, except for the
//! documented MSE-versus-raw part of criterion 8.

use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use drsplit::covlab::emit::{emit, SUMMARY_FILE, SWEEP_FILE};
use drsplit::covlab::{sweep, ExperimentConfig, SweepOutput};
use drsplit::engine::{DrParams, Solver, Variant};
use drsplit::hilbert::{Point, Shape, Stack, Weights};
use drsplit::operator::{Gradient, OperatorSpec};
use drsplit::planner::{brute_force_delta, naive_stepsize, optimal_delta, PlannerInput};
use drsplit::prox::{phi, prox_existence_oracle, prox_phi_scalar, prox_psd};
use drsplit::reform::{resolvent_f_warped, resolvent_g_warped, InclusionProblem, ReformulationContext};
use drsplit::toys;
use drsplit::verify::{planner_agreement, smooth_parameters, write_csv};

struct Outcome {
    passed: bool,
    detail: String,
    /// CSV bytes for the determinism replay.
    csv: Vec<u8>,
}

fn line(n: usize, passed: bool, elapsed: Duration, detail: &str) {
    println!("criterion {n:>2}: {} [{:.2}s] {detail}", if passed { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
}

fn scalar(x: f64) -> Point {
    Point::scalar(x)
}

fn stack(v: &[f64]) -> Stack {
    Stack::new(v.iter().map(|&t| scalar(t)).collect()).unwrap()
}

/// Root of the increasing map `w ↦ w + γ a(w) - x`.
fn bisect(a: impl Fn(f64) -> f64, gamma: f64, x: f64) -> f64 {
    let h = |w: f64| w + gamma * a(w) - x;
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while h(lo) > 0.0 {
        lo *= 2.0;
    }
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..300 {
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

fn criterion_1() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_drsplit"))
        .args(["plan", "--sigmas", "-1,2", "--weights", "1", "--mu", "1"])
        .output()
        .expect("run drsplit");
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap_or_default();
    let cli = json["lambda_bar_star"].as_f64().unwrap_or(f64::NAN);
    let inp = PlannerInput::new(vec![-1.0, 2.0], Weights::new(vec![1.0]).unwrap(), 1.0).unwrap();
    let t = Instant::now();
    let lib = optimal_delta(&inp).unwrap().lambda_bar_star;
    let planner_time = t.elapsed();
    // Largest grid step λ = k·h keeping 1 + λσ_1σ_2/(σ_1 + σ_2) - μ/2 positive.
    let h = 1e-6;
    let mut k = 0u64;
    while 1.0 + (k + 1) as f64 * h * (-2.0) / 1.0 - 0.5 > 0.0 {
        k += 1;
    }
    let grid = k as f64 * h;
    let (_, brute) = brute_force_delta(&inp, 10_000).unwrap();
    let passed = out.status.success()
        && (cli - 0.25).abs() <= 1e-10
        && (lib - 0.25).abs() <= 1e-10
        && grid <= lib
        && lib - grid <= h * (1.0 + 1e-9)
        && (lib - brute).abs() <= 1e-10
        && planner_time < Duration::from_millis(1);
    Outcome {
        passed,
        detail: format!("cli {cli}, planner {lib} in {planner_time:?}, step grid {grid}, brute force {brute}"),
        csv: Vec::new(),
    }
}

fn criterion_2() -> Outcome {
    let rows = planner_agreement(2024, 100, 5).unwrap();
    let worst_gap = rows.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
    let worst_eq = rows.iter().map(|r| r.equalization.max(r.sum_error.abs())).fold(0.0, f64::max);
    let max_m = rows.iter().map(|r| r.m).max().unwrap_or(0);
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv).unwrap();
    Outcome {
        passed: rows.len() == 100 && max_m <= 5 && worst_gap <= 1e-3 && worst_eq <= 1e-9,
        detail: format!(
            "100 instances (m <= {max_m}): worst relative gap {worst_gap:.2e}, worst equalization {worst_eq:.2e}"
        ),
        csv,
    }
}

fn criterion_3() -> Outcome {
    let mut rng = toys::rng(3);
    let (mut applicable, mut dominated, mut worst) = (0, 0, f64::INFINITY);
    for _ in 0..500 {
        let mut inp = toys::random_nonmonotone_input(&mut rng, 6, 1.0);
        inp.weights = Weights::equal(inp.m() - 1).unwrap();
        let Ok(plan) = optimal_delta(&inp) else { continue };
        if let Ok(naive) = naive_stepsize(&inp.sigmas, inp.mu) {
            applicable += 1;
            if plan.lambda_bar_star >= naive * (1.0 - 1e-12) {
                dominated += 1;
            }
            worst = worst.min(plan.lambda_bar_star / naive);
        }
    }
    let special = PlannerInput::new(vec![-1.0, 3.0, 0.5], Weights::equal(2).unwrap(), 1.0).unwrap();
    let naive_refused = naive_stepsize(&special.sigmas, 1.0).is_err();
    let lam = optimal_delta(&special).map(|p| p.lambda_bar_star).unwrap_or(f64::NAN);
    Outcome {
        passed: applicable > 0 && dominated == applicable && naive_refused && lam > 0.0 && lam.is_finite(),
        detail: format!(
            "{dominated}/{applicable} equal-weight instances dominate (min ratio {worst:.4}); σ = (-1, 3, 0.5): naive refused = {naive_refused}, λ̄* = {lam:.8}"
        ),
        csv: Vec::new(),
    }
}

fn criterion_4() -> Outcome {
    let prob = toys::affine_three();
    let slopes = [(1.0, -3.0), (1.0, 0.0), (2.0, 0.0)];
    let w = Weights::equal(2).unwrap();
    let zero = 0.75;
    let mut passed = true;
    let mut parts = Vec::new();
    for variant in [Variant::FG, Variant::GF] {
        // Monotone case: any λ > 0 is certified.
        let lambda = 1.0;
        let mut params = DrParams::new(w.clone(), lambda, 1.0);
        params.variant = variant;
        params.tol = 1e-24;
        params.max_iter = 1000;
        params.store_iterates = true;
        let solver = Solver::new(&prob, params).unwrap();
        let run = solver.run(stack(&[5.0, -4.0])).unwrap();
        let err = (run.shadow.as_slice()[0] - zero).abs();
        // Fixed point from the optimality conditions at the zero.
        let gammas = [lambda / 0.5, lambda / 0.5];
        let fixed: Vec<f64> = (0..2)
            .map(|i| {
                let ai = slopes[i].0 * zero + slopes[i].1;
                match variant {
                    Variant::FG => zero + gammas[i] * ai,
                    Variant::GF => zero - gammas[i] * ai,
                }
            })
            .collect();
        let dists: Vec<f64> = run
            .iterates
            .as_ref()
            .unwrap()
            .iter()
            .map(|x| (0..2).map(|i| 0.5 * (x.block(i).as_slice()[0] - fixed[i]).powi(2)).sum::<f64>().sqrt())
            .collect();
        let increases = dists.windows(2).filter(|p| p[1] > p[0] * (1.0 + 1e-12) + 1e-15).count();
        passed &= err <= 1e-8 && run.iterations <= 1000 && increases == 0;
        parts.push(format!(
            "{variant:?}: |shadow - 0.75| = {err:.1e} after {} iterations, {increases} Fejér increases over {} steps",
            run.iterations,
            dists.len() - 1
        ));
    }
    Outcome { passed, detail: parts.join("; "), csv: Vec::new() }
}

#[derive(serde::Serialize)]
struct RateRow {
    instance: usize,
    m: usize,
    lambda: f64,
    head_mean: f64,
    tail_mean: f64,
    total: f64,
    tail_increment: f64,
}

fn criterion_5() -> Outcome {
    let mut rng = toys::rng(5);
    let mut rows = Vec::new();
    let mut ok = 0;
    for instance in 0..20 {
        let inp = loop {
            let i = toys::random_nonmonotone_input(&mut rng, 5, 1.0);
            if i.m() >= 3 {
                break i;
            }
        };
        let plan = optimal_delta(&inp).unwrap();
        let lambda = 0.95 * plan.lambda_bar_star;
        let prob = toys::affine_problem(&mut rng, &inp.sigmas, 3).unwrap();
        let mut params = DrParams::new(inp.weights.clone(), lambda, inp.mu);
        params.tol = 0.0;
        params.max_iter = 400;
        let x0 = Stack::new(
            (0..inp.m() - 1).map(|_| Point::vector((0..3).map(|_| rng.random_range(-5.0..5.0)).collect())).collect(),
        )
        .unwrap();
        let run = Solver::new(&prob, params).unwrap().run(x0).unwrap();
        let res: Vec<f64> = run.log.rows.iter().map(|r| r.res_inf_f_sq).collect();
        let n = res.len();
        let q = n / 4;
        let kres = |k: usize| k as f64 * res[k];
        let head_mean = (0..q).map(kres).sum::<f64>() / q as f64;
        let tail_mean = (n - q..n).map(kres).sum::<f64>() / q as f64;
        let total: f64 = res.iter().sum();
        let tail_increment: f64 = res[n - q..].iter().sum();
        if tail_mean < 0.5 * head_mean && tail_increment < 0.05 * total {
            ok += 1;
        }
        rows.push(RateRow { instance, m: inp.m(), lambda, head_mean, tail_mean, total, tail_increment });
    }
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv).unwrap();
    Outcome { passed: ok == 20, detail: format!("{ok}/20 certified affine instances pass both tail checks"), csv }
}

fn criterion_6() -> Outcome {
    let mut rng = toys::rng(6);
    let h = 1e-6;
    let triples: Vec<(f64, f64, f64)> = (0..1000)
        .map(|_| {
            let t: f64 = rng.random_range(-3.0..3.0);
            let omega: f64 = rng.random_range(0.0..2.0);
            let kappa = (rng.random_range(0.0..0.999) / omega.max(1e-9)).min(2.0);
            (t, omega, kappa)
        })
        .collect();
    let errors: Vec<f64> = triples
        .par_iter()
        .map(|&(t, omega, kappa)| {
            let p = prox_phi_scalar(t, omega, kappa).unwrap();
            // Grid over [-(|t| + 0.05), |t| + 0.05] with step h.
            let r = t.abs() + 0.05;
            let n = (2.0 * r / h) as u64;
            let (mut bw, mut bv) = (0.0, f64::INFINITY);
            for k in 0..=n {
                let w = -r + k as f64 * h;
                let v = kappa * phi(w, omega) + 0.5 * (w - t) * (w - t);
                if v < bv {
                    bv = v;
                    bw = w;
                }
            }
            (p - bw).abs()
        })
        .collect();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let ok = errors.iter().filter(|&&e| e <= 1e-5).count();
    let mut psd_ok = 0;
    let trials = 20;
    for _ in 0..trials {
        let a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-2.0..2.0));
        let x = Point::from_matrix(&((&a + a.transpose()) * 0.5)).unwrap();
        let px = prox_psd(&x).unwrap();
        let d0 = px.dist(&x).unwrap();
        let mut beaten = false;
        for s in 0..10_000 {
            let cand = if s % 2 == 0 {
                let b = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-2.0..2.0));
                &b * b.transpose()
            } else {
                // Small perturbations of the projection that stay PSD.
                let e = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-0.05..0.05));
                let c = px.to_matrix() + (&e + e.transpose()) * 0.5;
                if c.clone().symmetric_eigenvalues().min() < 0.0 {
                    continue;
                }
                c
            };
            let cand = Point::from_matrix(&cand).unwrap();
            beaten |= cand.dist(&x).unwrap() < d0 - 1e-12;
        }
        if !beaten {
            psd_ok += 1;
        }
    }
    Outcome {
        passed: ok == 1000 && psd_ok == trials,
        detail: format!("{ok}/1000 prox triples within 1e-5 (worst {worst:.2e}); PSD projection unbeaten on {psd_ok}/{trials} matrices x 10^4 candidates"),
        csv: Vec::new(),
    }
}

fn criterion_7() -> Outcome {
    let mut rng = toys::rng(7);
    let (mut ok, mut total, mut worst) = (0usize, 0usize, 0.0f64);
    for case in 0..1000 {
        let inp = toys::random_nonmonotone_input(&mut rng, 4, 1.0);
        let plan = optimal_delta(&inp).unwrap();
        let lambda = rng.random_range(0.05..0.99) * plan.lambda_bar_star;
        // A_i(w) = a_i w + b_i sin(w) + c_i, σ_i-monotone with a_i = σ_i + |b_i|.
        let coefs: Vec<(f64, f64, f64)> = inp
            .sigmas
            .iter()
            .map(|&s| {
                let b = if case % 2 == 0 { rng.random_range(-1.0..1.0) } else { 0.0 };
                (s + f64::abs(b), b, rng.random_range(-2.0..2.0))
            })
            .collect();
        let ops = coefs
            .iter()
            .map(|&(a, b, c)| {
                if b == 0.0 {
                    OperatorSpec::scalar_affine(a, c)
                } else {
                    let g = Gradient {
                        value: Arc::new(move |x: &Point| {
                            let w = x.as_slice()[0];
                            0.5 * a * w * w - b * w.cos() + c * w
                        }),
                        grad: Arc::new(move |x: &Point| x.map(|w| a * w + b * w.sin() + c)),
                        hessian: None,
                    };
                    OperatorSpec::gradient(g, a - b.abs(), a.abs() + b.abs()).unwrap()
                }
            })
            .collect();
        let prob = InclusionProblem::new(ops, Shape::Vector(1)).unwrap();
        let ctx = ReformulationContext::new(&prob, inp.weights.clone(), lambda).unwrap();
        let k = inp.m() - 1;
        let x: Vec<f64> = (0..k).map(|_| rng.random_range(-4.0..4.0)).collect();
        let xs = stack(&x);
        let op = |i: usize| {
            let (a, b, c) = coefs[i];
            move |w: f64| a * w + b * w.sin() + c
        };
        let z = resolvent_f_warped(&ctx, &prob, &xs).unwrap();
        for i in 0..k {
            let oracle = bisect(op(i), lambda / inp.weights.as_slice()[i], x[i]);
            let e = (z.block(i).as_slice()[0] - oracle).abs();
            worst = worst.max(e);
            total += 1;
            ok += usize::from(e <= 1e-8);
        }
        let g = resolvent_g_warped(&ctx, &prob, &xs).unwrap();
        let avg: f64 = (0..k).map(|i| inp.weights.as_slice()[i] * x[i]).sum();
        let oracle = bisect(op(k), lambda, avg);
        let e = (0..k).map(|i| (g.block(i).as_slice()[0] - oracle).abs()).fold(0.0, f64::max);
        worst = worst.max(e);
        total += 1;
        ok += usize::from(e <= 1e-8);
    }
    // f(t) = -t²/2: the prox objective -w²/2 + (w - t)²/(2γ) is unbounded below
    // for γ > 1 while (Id + γ∇f)^{-1}(t) = t/(1 - γ).
    let neg = OperatorSpec::scalar_affine(-1.0, 0.0);
    let mut concave_ok = 0;
    for _ in 0..50 {
        let gamma = rng.random_range(1.01..5.0);
        let t = rng.random_range(-3.0..3.0);
        let obj = |w: f64| -0.5 * w * w + (w - t) * (w - t) / (2.0 * gamma);
        let unbounded = obj(1e4) < obj(1e2) && obj(1e6) < obj(1e4) && obj(-1e6) < obj(-1e4);
        let empty = prox_existence_oracle(|w| -0.5 * w * w, t, gamma).is_none();
        let refused = neg.resolvent(gamma, &scalar(t)).is_err();
        let r = neg.resolvent_unchecked(gamma, &scalar(t)).unwrap().as_slice()[0];
        let exact = (r - t / (1.0 - gamma)).abs() <= 1e-12 * (1.0 + r.abs());
        concave_ok += usize::from(unbounded && empty && refused && exact);
    }
    Outcome {
        passed: ok == total && total > 1000 && concave_ok == 50,
        detail: format!("{ok}/{total} warped resolvent blocks within 1e-8 of bisection (worst {worst:.1e}) over 1000 cases; concave prox empty with resolvent t/(1-γ) on {concave_ok}/50"),
        csv: Vec::new(),
    }
}

const EXPERIMENT: &str = r#"{
    "p": 60, "K": 3, "n": 50,
    "tau0": 0.1, "tau1": 0.1, "omega0": 1, "omega1": 1, "mu": 1,
    "orderings": ["1-2-3-4", "1-4-3-2"],
    "weight_grid_step": "1/3",
    "seeds": [1, 2, 3, 4, 5],
    "tol": 1e-6,
    "max_iter": 10000
}"#;

fn experiment_csv(out: &SweepOutput) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    emit(out, dir.path()).unwrap();
    let mut bytes = std::fs::read(dir.path().join(SWEEP_FILE)).unwrap();
    bytes.extend(std::fs::read(dir.path().join(SUMMARY_FILE)).unwrap());
    bytes
}

/// Returns the outcome and whether the only failing part is MSE versus raw.
fn criterion_8() -> (Outcome, bool) {
    let cfg = ExperimentConfig::from_json(EXPERIMENT).unwrap();
    let out = sweep(&cfg, 1).unwrap();
    let recs = &out.records;
    let terminated = recs
        .iter()
        .filter(|r| r.error.is_none() && r.terminated && r.final_residual < 1e-6 && r.iterations <= 10_000)
        .count();
    let all_terminated = terminated == recs.len() && recs.len() == 10;
    let mut mse_parts = Vec::new();
    let mut mse_ok = true;
    let mut mean_iters = Vec::new();
    for o in ["1-2-3-4", "1-4-3-2"] {
        let rs: Vec<_> = recs.iter().filter(|r| r.ordering == o).collect();
        let better = rs.iter().filter(|r| r.mse < r.mse_sample).count();
        mse_ok &= better >= 4;
        mse_parts.push(format!("{o}: MSE below raw on {better}/5 seeds"));
        mean_iters.push(rs.iter().map(|r| r.iterations as f64).sum::<f64>() / rs.len() as f64);
    }
    let trend = if mean_iters[1] <= mean_iters[0] { "pass" } else { "warn" };
    let passed = all_terminated && mse_ok;
    let detail = format!(
        "{terminated}/10 runs terminate below 1e-6; {}; ordering trend {trend} (mean iterations 1-2-3-4 {:.1}, 1-4-3-2 {:.1})",
        mse_parts.join(", "),
        mean_iters[0],
        mean_iters[1]
    );
    (Outcome { passed, detail, csv: experiment_csv(&out) }, all_terminated && !mse_ok)
}

fn criterion_9() -> Outcome {
    let toy = toys::smooth_toy(9, 5).unwrap();
    let mu = 1.0;
    let (weights, lambda, gammas) = smooth_parameters(&toy.lipschitz, &toy.sigmas, mu, 0.9).unwrap();
    // Target γ_i = 0.9 γ̄_i with γ̄_i from the Lipschitz/modulus split.
    let mut targets_ok = true;
    let c: Vec<f64> = (0..2)
        .map(|i| {
            let (l, s) = (toy.lipschitz[i], toy.sigmas[i]);
            let gbar = if -2.0 * s < (2.0 - mu) * l { 1.0 / l } else { -(1.0 - mu / 2.0) / s };
            let g = lambda / weights.as_slice()[i];
            targets_ok &= (g - 0.9 * gbar).abs() <= 1e-12 * gbar && (g - gammas[i]).abs() <= 1e-12 * g;
            let alpha = mu / (2.0 * (l + s));
            let beta = -(1.0 - mu / 2.0) / s;
            let cc = if -2.0 * s < (2.0 - mu) * l && alpha < g && g < beta { l } else { s };
            -(2.0 * g * g * cc * cc - mu * g * cc - (2.0 - mu)) / (2.0 * mu * g)
        })
        .collect();
    let mut params = DrParams::new(weights.clone(), lambda, mu);
    params.tol = 0.0;
    params.max_iter = 1000;
    params.store_iterates = true;
    let solver = Solver::new(&toy.problem, params).unwrap();
    let mut rng = toys::rng(99);
    let x0 = Stack::new((0..2).map(|_| Point::vector((0..5).map(|_| rng.random_range(-3.0..3.0)).collect())).collect())
        .unwrap();
    let run = solver.run(x0).unwrap();
    let ops = toy.problem.operators();
    let merit = |x: &Stack| -> (f64, Stack) {
        let (z, y) = solver.evaluate(x).unwrap();
        let yv = y.block(0);
        let mut v = ops[2].value(yv).unwrap();
        for i in 0..2 {
            let zi = z.block(i);
            let d = yv.sub(zi).unwrap();
            v += ops[i].value(zi).unwrap()
                + ops[i].evaluate(zi).unwrap().dot(&d).unwrap()
                + d.norm_sq() / (2.0 * gammas[i]);
        }
        (v, z)
    };
    let states: Vec<(f64, Stack)> = run.iterates.as_ref().unwrap().iter().map(merit).collect();
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for k in 1..states.len() {
        let (v0, z0) = &states[k - 1];
        let (v1, z1) = &states[k];
        let bound: f64 = (0..2).map(|i| c[i] * z1.block(i).sub(z0.block(i)).unwrap().norm_sq()).sum();
        let margin = v0 - v1 - bound;
        worst = worst.min(margin);
        violations += usize::from(margin < -1e-8);
    }
    let steps = states.len() - 1;
    Outcome {
        passed: targets_ok && c.iter().all(|&v| v > 0.0) && violations == 0 && steps == 1000,
        detail: format!(
            "{violations} descent violations over {steps} steps (smallest margin {worst:.2e}); c = {c:.4?}"
        ),
        csv: Vec::new(),
    }
}

fn main() -> ExitCode {
    let mut unexpected = 0;
    // Time budgets in seconds.
    let budgets = [(1, 1.0), (2, 10.0), (3, 1.0), (4, 1.0), (5, 30.0), (6, 30.0), (7, 10.0), (8, 300.0), (9, 5.0)];
    let mut csvs = Vec::new();
    let mut over = Vec::new();
    for &(n, budget) in &budgets {
        let t = Instant::now();
        let (o, known) = match n {
            1 => (criterion_1(), false),
            2 => (criterion_2(), false),
            3 => (criterion_3(), false),
            4 => (criterion_4(), false),
            5 => (criterion_5(), false),
            6 => (criterion_6(), false),
            7 => (criterion_7(), false),
            8 => criterion_8(),
            _ => (criterion_9(), false),
        };
        let elapsed = t.elapsed();
        line(n, o.passed, elapsed, &o.detail);
        if !o.passed && known {
            println!("              MSE below raw on >= 4/5 seeds is not met at this scale; see README, Known results");
        } else if !o.passed {
            unexpected += 1;
        }
        if elapsed.as_secs_f64() > budget {
            over.push(format!("{n} ({:.1}s > {budget}s)", elapsed.as_secs_f64()));
        }
        csvs.push((n, o.csv));
    }
    if !over.is_empty() {
        println!("time budgets exceeded: {}", over.join(", "));
        unexpected += 1;
    }

    let t = Instant::now();
    let csv_of = |n: usize| csvs.iter().find(|e| e.0 == n).map(|e| e.1.clone()).unwrap_or_default();
    let cfg = ExperimentConfig::from_json(EXPERIMENT).unwrap();
    let same = [
        ("2", csv_of(2) == criterion_2().csv),
        ("5", csv_of(5) == criterion_5().csv),
        ("8", csv_of(8) == criterion_8().0.csv),
        ("8 with 4 threads", csv_of(8) == experiment_csv(&sweep(&cfg, 4).unwrap())),
    ];
    let passed = same.iter().all(|(_, s)| *s) && [2, 5, 8].iter().all(|&n| !csv_of(n).is_empty());
    let detail: Vec<String> =
        same.iter().map(|(n, s)| format!("{n}: {}", if *s { "identical" } else { "differs" })).collect();
    line(10, passed, t.elapsed(), &detail.join(", "));
    if !passed {
        unexpected += 1;
    }

    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    }
}
