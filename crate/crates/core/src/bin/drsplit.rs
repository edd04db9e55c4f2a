//! `drsplit` command-line interface.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 unsupported moduli,
//! 3 iteration limit reached, 4 verification failed or every experiment run
//! failed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use drsplit::covlab::{emit::emit, sweep, ExperimentConfig};
use drsplit::engine::{DrParams, Solver, Variant, DEFAULT_MAX_ITER, DEFAULT_TOL};
use drsplit::hilbert::Weights;
use drsplit::planner::{classify, naive_stepsize, optimal_delta, smooth_stepsize, Case, PlannerInput, PlannerResult};
use drsplit::problem::load_problem;
use drsplit::verify::{run_suite, Suite};
use drsplit::Error;

const SCHEMA_VERSION: u32 = 1;
const EXIT_INVALID: u8 = 1;
const EXIT_UNSUPPORTED: u8 = 2;
const EXIT_MAX_ITER: u8 = 3;
const EXIT_FAILED: u8 = 4;
/// Fraction of `λ̄*` used when no step is given.
const STEP_SAFETY: f64 = 0.95;
const RESULT_FILE: &str = "result.json";
const LOG_FILE: &str = "iterates.csv";

#[derive(Parser)]
#[command(name = "drsplit", version, about = "Weighted product-space Douglas-Rachford splitting")]
#[command(after_help = "Exit codes: 0 ok, 1 invalid input, 2 unsupported, 3 iteration limit, 4 checks failed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Largest certified step size for given moduli and weights.
    Plan {
        /// Moduli σ_1..σ_m, the last one belonging to the operator outside the product space.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        sigmas: Vec<f64>,
        /// Weights λ_1..λ_{m-1}, positive and summing to one.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        weights: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        /// Lipschitz constants of the first m-1 gradients, for the smooth bounds.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lipschitz: Option<Vec<f64>>,
    },
    /// Run the iteration on a problem file.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Covariance-estimation sweep over orderings, weights and seeds.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Seeded invariant suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn print_text(text: &str) {
    // A closed pipe on stdout is not an error worth a panic.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn print_json(v: &impl Serialize) {
    print_text(&serde_json::to_string_pretty(v).expect("serializable output"));
}

fn extended(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn plan_json(res: &PlannerResult) -> Value {
    let mut v = serde_json::to_value(res).expect("serializable plan");
    v["schema_version"] = json!(SCHEMA_VERSION);
    v
}

fn plan(sigmas: Vec<f64>, weights: Vec<f64>, mu: f64, lipschitz: Option<Vec<f64>>) -> ExitCode {
    let w = match Weights::new(weights) {
        Ok(w) => w,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let inp = match PlannerInput::new(sigmas.clone(), w.clone(), mu) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let class = classify(&inp);
    if class.case == Case::Unsupported {
        print_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "case": Case::Unsupported,
            "reason": class.reason,
        }));
        return fail(EXIT_UNSUPPORTED, class.reason.unwrap_or_default());
    }
    let res = match optimal_delta(&inp) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let mut out = plan_json(&res);
    out["naive_lambda"] = match naive_stepsize(&sigmas, mu) {
        Ok(v) => extended(v),
        Err(_) => Value::Null,
    };
    if let Some(l) = lipschitz {
        let k = sigmas.len() - 1;
        if l.len() != k {
            return fail(EXIT_INVALID, format!("--lipschitz needs {k} values, got {}", l.len()));
        }
        match smooth_stepsize(&l, &sigmas[..k], &w, mu) {
            Ok(b) => {
                out["smooth_gamma_bar"] = Value::Array(b.gamma_bar.iter().map(|&g| extended(g)).collect());
                out["smooth_lambda_max"] = extended(b.lambda_max);
            }
            Err(e) => return fail(EXIT_INVALID, e),
        }
    }
    print_json(&out);
    ExitCode::SUCCESS
}

fn solve(
    problem: &Path,
    mu: Option<f64>,
    lambda: Option<f64>,
    tol: f64,
    max_iter: usize,
    variant: Option<Variant>,
    out: &Path,
) -> ExitCode {
    let spec = match load_problem(problem) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let mu = mu.or(spec.mu).unwrap_or(1.0);
    let variant = variant.or(spec.variant).unwrap_or_default();
    let inp = match PlannerInput::new(spec.problem.sigmas(), spec.weights.clone(), mu) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let plan = optimal_delta(&inp);
    let bound = plan.as_ref().map(|p| p.lambda_bar_star).ok();
    let (lambda, source) = match (lambda.or(spec.lambda), &plan) {
        (Some(l), _) => (l, if lambda.is_some() { "flag" } else { "problem_file" }),
        (None, Ok(p)) if p.lambda_bar_star.is_finite() => (STEP_SAFETY * p.lambda_bar_star, "planner"),
        (None, Ok(_)) => (1.0, "monotone_default"),
        (None, Err(Error::Unsupported(reason))) => {
            return fail(EXIT_UNSUPPORTED, format!("{reason}; pass --lambda to run without a certified step"))
        }
        (None, Err(e)) => return fail(EXIT_INVALID, e),
    };
    let certified = bound.is_some_and(|b| lambda > 0.0 && lambda < b);
    if !certified {
        eprintln!("warning: step {lambda} is not covered by the convergence certificate");
    }
    let mut params = DrParams::new(spec.weights.clone(), lambda, mu);
    params.tol = tol;
    params.max_iter = max_iter;
    params.variant = variant;
    let solver = match Solver::new(&spec.problem, params) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let run = match solver.run(spec.x0) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    if let Err(e) = fs::create_dir_all(out) {
        return fail(EXIT_INVALID, format!("{}: {e}", out.display()));
    }
    let result = json!({
        "schema_version": SCHEMA_VERSION,
        "variant": variant,
        "mu": mu,
        "lambda": lambda,
        "lambda_source": source,
        "lambda_bar_star": bound.map(extended).unwrap_or(Value::Null),
        "certified": certified,
        "weights": spec.weights,
        "iterations": run.iterations,
        "converged": run.converged,
        "tol": tol,
        "final_residual": run.final_residual,
        "shadow": run.shadow,
        "certificate": run.certificate,
    });
    let text = serde_json::to_string_pretty(&result).expect("serializable result");
    let path = out.join(RESULT_FILE);
    if let Err(e) = fs::write(&path, format!("{text}\n")) {
        return fail(EXIT_INVALID, format!("{}: {e}", path.display()));
    }
    let path = out.join(LOG_FILE);
    let written = fs::File::create(&path).map_err(|e| Error::io(&path, e)).and_then(|f| run.log.write_csv(f));
    if let Err(e) = written {
        return fail(EXIT_INVALID, e);
    }
    print_text(&text);
    if run.converged {
        ExitCode::SUCCESS
    } else {
        fail(EXIT_MAX_ITER, format!("no convergence within {} iterations", run.iterations))
    }
}

fn experiment(config: &Path, out: &Path, parallel: usize) -> ExitCode {
    let text = match fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_INVALID, format!("{}: {e}", config.display())),
    };
    let cfg = match ExperimentConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_INVALID, format!("{}: {e}", config.display())),
    };
    let output = match sweep(&cfg, parallel.max(1)) {
        Ok(o) => o,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let files = match emit(&output, out) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let runs = output.records.len();
    let failed: Vec<Value> = output
        .records
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| json!({"ordering": r.ordering, "seed": r.seed, "error": e})))
        .collect();
    let terminated = output.records.iter().filter(|r| r.terminated).count();
    print_json(&json!({
        "schema_version": SCHEMA_VERSION,
        "runs": runs,
        "terminated": terminated,
        "failed": failed.len(),
        "failures": failed,
        "files": files,
    }));
    if failed.len() == runs {
        return fail(EXIT_FAILED, "every run failed");
    }
    ExitCode::SUCCESS
}

fn verify(suite: &str, seed: u64) -> ExitCode {
    let suite: Suite = match suite.parse() {
        Ok(s) => s,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let reports = match run_suite(suite, seed) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    for r in &reports {
        for c in &r.checks {
            eprintln!(
                "{} {}/{}: {}/{} (worst {:e})",
                if c.ok { "pass" } else { "FAIL" },
                r.suite,
                c.name,
                c.passed,
                c.total,
                c.worst
            );
        }
    }
    let passed = reports.iter().all(|r| r.passed);
    print_json(&json!({"schema_version": SCHEMA_VERSION, "passed": passed, "suites": reports}));
    if passed {
        ExitCode::SUCCESS
    } else {
        fail(EXIT_FAILED, "some checks failed")
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Plan { sigmas, weights, mu, lipschitz } => plan(sigmas, weights, mu, lipschitz),
        Command::Solve { problem, mu, lambda, tol, max_iter, variant, out } => {
            solve(&problem, mu, lambda, tol, max_iter, variant, &out)
        }
        Command::Experiment { config, out, parallel } => experiment(&config, &out, parallel),
        Command::Verify { suite, seed } => verify(&suite, seed),
    }
}
