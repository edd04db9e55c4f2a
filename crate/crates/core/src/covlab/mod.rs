//! Sparse low-rank PSD covariance estimation:
//!
//! ```text
//! min_x  δ_{S+}(x) + ½‖x - y‖²_F + τ₀ Σ φ(s_i(x); ω₀) + τ₁ Σ φ(x_ij; ω₁)
//! ```
//!
//! run with the four terms in a chosen order, over a grid of weights.

pub mod data;
pub mod emit;
pub mod svg;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::engine::{rate_monitor, DrParams, Solver};
use crate::error::{Error, Result};
use crate::hilbert::{embed, Point, Shape, Weights};
use crate::operator::OperatorSpec;
use crate::planner::{optimal_delta, PlannerInput};
use crate::reform::InclusionProblem;

pub use data::{generate_instance, mse, Instance};

/// A permutation of the four terms `F1..F4`, last entry not `F1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ordering([usize; 4]);

impl Ordering {
    pub fn new(terms: [usize; 4]) -> Result<Self> {
        let mut seen = [false; 4];
        for &t in &terms {
            if !(1..=4).contains(&t) || seen[t - 1] {
                return Err(Error::invalid(format!("ordering {terms:?} is not a permutation of 1..4")));
            }
            seen[t - 1] = true;
        }
        if terms[3] == 1 {
            return Err(Error::invalid(format!("ordering {terms:?} puts F1 last; its modulus is 0")));
        }
        Ok(Ordering(terms))
    }

    pub fn terms(&self) -> [usize; 4] {
        self.0
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "{a}-{b}-{c}-{d}")
    }
}

impl FromStr for Ordering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(['-', ','])
            .map(|p| p.trim().parse::<usize>().map_err(|_| Error::invalid(format!("bad ordering {s:?}"))))
            .collect::<Result<_>>()?;
        let terms: [usize; 4] =
            parts.try_into().map_err(|_| Error::invalid(format!("ordering {s:?} needs 4 terms")))?;
        Ordering::new(terms)
    }
}

impl Serialize for Ordering {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ordering {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Terms([usize; 4]),
        }
        let r = match Repr::deserialize(d)? {
            Repr::Text(s) => s.parse(),
            Repr::Terms(t) => Ordering::new(t),
        };
        r.map_err(serde::de::Error::custom)
    }
}

/// Weight grid step `1/N`, given as a number or as the string `"1/N"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridStep {
    pub denominator: usize,
}

impl Default for GridStep {
    fn default() -> Self {
        GridStep { denominator: 30 }
    }
}

impl GridStep {
    fn from_value(v: f64) -> Result<Self> {
        if !(v > 0.0 && v <= 1.0 / 3.0 + 1e-12) {
            return Err(Error::invalid(format!("weight grid step must lie in (0, 1/3], got {v}")));
        }
        let n = (1.0 / v).round();
        if (n * v - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weight grid step {v} is not of the form 1/N")));
        }
        Ok(GridStep { denominator: n as usize })
    }
}

impl Serialize for GridStep {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(&format_args!("1/{}", self.denominator))
    }
}

impl<'de> Deserialize<'de> for GridStep {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        let r = match Repr::deserialize(d)? {
            Repr::Number(v) => GridStep::from_value(v),
            Repr::Text(s) => match s.split_once('/') {
                Some((a, b)) => match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
                    (Ok(a), Ok(b)) if b != 0.0 => GridStep::from_value(a / b),
                    _ => Err(Error::invalid(format!("bad weight grid step {s:?}"))),
                },
                None => s
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad weight grid step {s:?}")))
                    .and_then(GridStep::from_value),
            },
        };
        r.map_err(serde::de::Error::custom)
    }
}

fn d_tau() -> f64 {
    0.1
}
fn d_one() -> f64 {
    1.0
}
fn d_tol() -> f64 {
    1e-6
}
fn d_max_iter() -> usize {
    10_000
}
fn d_safety() -> f64 {
    0.95
}
fn d_orderings() -> Vec<Ordering> {
    vec![Ordering([1, 2, 3, 4])]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: usize,
    #[serde(rename = "K", alias = "k")]
    pub k: usize,
    pub n: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "d_tau")]
    pub tau0: f64,
    #[serde(default = "d_tau")]
    pub tau1: f64,
    #[serde(default = "d_one")]
    pub omega0: f64,
    #[serde(default = "d_one")]
    pub omega1: f64,
    #[serde(default = "d_one")]
    pub mu: f64,
    #[serde(default = "d_orderings")]
    pub orderings: Vec<Ordering>,
    #[serde(default)]
    pub weight_grid_step: GridStep,
    /// Explicit weight triples; replaces the grid when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<[f64; 3]>>,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    /// `λ = lambda_safety · λ̄*`.
    #[serde(default = "d_safety")]
    pub lambda_safety: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.p < self.k {
            return Err(Error::invalid(format!("need p >= K >= 1, got p = {}, K = {}", self.p, self.k)));
        }
        if self.n < 2 {
            return Err(Error::invalid("need n >= 2"));
        }
        if self.seeds.is_empty() || self.orderings.is_empty() {
            return Err(Error::invalid("need at least one seed and one ordering"));
        }
        for v in [self.tau0, self.tau1, self.omega0, self.omega1] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid("penalty parameters must be finite and >= 0"));
            }
        }
        if !(self.mu > 0.0 && self.mu < 2.0) {
            return Err(Error::invalid(format!("mu must lie in (0, 2), got {}", self.mu)));
        }
        if !(self.lambda_safety > 0.0 && self.lambda_safety < 1.0) {
            return Err(Error::invalid(format!("lambda_safety must lie in (0, 1), got {}", self.lambda_safety)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be >= 1"));
        }
        if let Some(ws) = &self.weights {
            if ws.is_empty() {
                return Err(Error::invalid("explicit weight list is empty"));
            }
            for w in ws {
                Weights::new(w.to_vec())?;
            }
        }
        Ok(())
    }

    /// Weight triples to sweep, in sweep order.
    pub fn weight_points(&self) -> Result<Vec<Weights>> {
        match &self.weights {
            Some(ws) => ws.iter().map(|w| Weights::new(w.to_vec())).collect(),
            None => Ok(simplex_grid(self.weight_grid_step.denominator)),
        }
    }

    /// Moduli of `F1..F4`.
    pub fn term_sigmas(&self) -> [f64; 4] {
        [0.0, 1.0, -self.tau0 * self.omega0, -self.tau1 * self.omega1]
    }
}

/// Points `(i, j, k)/N` with positive integers summing to `N`.
pub fn simplex_grid(n: usize) -> Vec<Weights> {
    let mut out = Vec::new();
    let nf = n as f64;
    for i in 1..n {
        for j in 1..n - i {
            let (a, b) = (i as f64 / nf, j as f64 / nf);
            let c = (n - i - j) as f64 / nf;
            out.push(Weights::new(vec![a, b, c]).expect("grid weights are valid"));
        }
    }
    out
}

pub fn term_operator(term: usize, y: &Point, cfg: &ExperimentConfig) -> Result<OperatorSpec> {
    match term {
        1 => Ok(OperatorSpec::psd_indicator()),
        2 => Ok(OperatorSpec::quadratic_tracking(y.clone())),
        3 => OperatorSpec::phi_spectral(cfg.tau0, cfg.omega0),
        4 => OperatorSpec::phi_elementwise(cfg.tau1, cfg.omega1),
        other => Err(Error::invalid(format!("no term F{other}"))),
    }
}

pub fn build_problem(ordering: Ordering, y: &Point, cfg: &ExperimentConfig) -> Result<InclusionProblem> {
    let ops = ordering.terms().iter().map(|&t| term_operator(t, y, cfg)).collect::<Result<Vec<_>>>()?;
    InclusionProblem::new(ops, y.shape())
}

pub fn ordering_sigmas(ordering: Ordering, cfg: &ExperimentConfig) -> Vec<f64> {
    let s = cfg.term_sigmas();
    ordering.terms().iter().map(|&t| s[t - 1]).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub ordering: String,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub seed: u64,
    /// The DR step `λ` used.
    pub step: f64,
    pub iterations: usize,
    pub mse: f64,
    /// MSE of the sample covariance itself.
    pub mse_sample: f64,
    pub terminated: bool,
    pub final_residual: f64,
    pub certificate_residual: f64,
    pub rate_passed: Option<bool>,
    pub error: Option<String>,
}

/// `k·‖Res‖²` trajectory of one run, kept for plotting.
#[derive(Clone, Debug, PartialEq)]
pub struct RateTrace {
    pub ordering: String,
    pub seed: u64,
    pub points: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    pub records: Vec<RunRecord>,
    pub traces: Vec<RateTrace>,
}

/// Index of the grid point closest to equal weights in max norm, first on ties.
fn central_index(points: &[Weights]) -> usize {
    let dev = |w: &Weights| w.as_slice().iter().fold(0.0f64, |m, v| m.max((v - 1.0 / 3.0).abs()));
    let mut best = 0;
    for (i, w) in points.iter().enumerate() {
        if dev(w) < dev(&points[best]) {
            best = i;
        }
    }
    best
}

struct Task {
    ordering: Ordering,
    weight_index: usize,
    seed_index: usize,
    trace: bool,
}

pub fn run_one(
    cfg: &ExperimentConfig,
    ordering: Ordering,
    weights: &Weights,
    seed: u64,
    inst: &Instance,
    keep_trace: bool,
) -> (RunRecord, Option<RateTrace>) {
    let w = weights.as_slice();
    let mse_sample = mse(&inst.y, &inst.sigma0).unwrap_or(f64::NAN);
    let mut rec = RunRecord {
        ordering: ordering.to_string(),
        lambda1: w[0],
        lambda2: w[1],
        lambda3: w[2],
        seed,
        step: f64::NAN,
        iterations: 0,
        mse: f64::NAN,
        mse_sample,
        terminated: false,
        final_residual: f64::NAN,
        certificate_residual: f64::NAN,
        rate_passed: None,
        error: None,
    };
    let outcome = (|| -> Result<Option<RateTrace>> {
        let plan = optimal_delta(&PlannerInput::new(ordering_sigmas(ordering, cfg), weights.clone(), cfg.mu)?)?;
        let lambda = if plan.lambda_bar_star.is_finite() { cfg.lambda_safety * plan.lambda_bar_star } else { 1.0 };
        rec.step = lambda;
        let prob = build_problem(ordering, &inst.y, cfg)?;
        let mut params = DrParams::new(weights.clone(), lambda, cfg.mu);
        params.tol = cfg.tol;
        params.max_iter = cfg.max_iter;
        let solver = Solver::new(&prob, params)?;
        let run = solver.run(embed(&inst.y, 3)?)?;
        rec.iterations = run.iterations;
        rec.terminated = run.converged;
        rec.final_residual = run.final_residual;
        rec.certificate_residual = run.certificate.residual;
        rec.mse = mse(run.state.y.block(0), &inst.sigma0)?;
        let rate = rate_monitor(&run.log);
        rec.rate_passed = rate.applicable.then_some(rate.passed);
        Ok(keep_trace.then(|| RateTrace {
            ordering: ordering.to_string(),
            seed,
            points: run.log.rows.iter().map(|r| (r.k, r.k_res_inf_f_sq)).collect(),
        }))
    })();
    match outcome {
        Ok(trace) => (rec, trace),
        Err(e) => {
            rec.error = Some(e.to_string());
            (rec, None)
        }
    }
}

/// Runs every ordering × weight point × seed. `threads = 1` runs inline;
/// larger values use a dedicated pool. Output order does not depend on the
/// schedule.
pub fn sweep(cfg: &ExperimentConfig, threads: usize) -> Result<SweepOutput> {
    cfg.validate()?;
    let points = cfg.weight_points()?;
    let centre = central_index(&points);
    let instances = cfg.seeds.iter().map(|&s| generate_instance(cfg.p, cfg.k, cfg.n, s)).collect::<Result<Vec<_>>>()?;
    if instances.iter().any(|i| i.y.shape() != Shape::Matrix(cfg.p)) {
        return Err(Error::invalid("instance shape mismatch"));
    }
    let mut tasks = Vec::new();
    for &ordering in &cfg.orderings {
        for wi in 0..points.len() {
            for si in 0..cfg.seeds.len() {
                tasks.push(Task { ordering, weight_index: wi, seed_index: si, trace: wi == centre });
            }
        }
    }
    let exec = |t: &Task| {
        run_one(cfg, t.ordering, &points[t.weight_index], cfg.seeds[t.seed_index], &instances[t.seed_index], t.trace)
    };
    let results: Vec<(RunRecord, Option<RateTrace>)> = if threads <= 1 {
        tasks.iter().map(exec).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
        pool.install(|| tasks.par_iter().map(exec).collect())
    };
    let mut keyed: Vec<_> = tasks.iter().zip(results).collect();
    keyed.sort_by(|(a, _), (b, _)| {
        (a.ordering, a.weight_index, cfg.seeds[a.seed_index], a.seed_index).cmp(&(
            b.ordering,
            b.weight_index,
            cfg.seeds[b.seed_index],
            b.seed_index,
        ))
    });
    let mut out = SweepOutput::default();
    for (_, (rec, trace)) in keyed {
        out.records.push(rec);
        if let Some(t) = trace {
            out.traces.push(t);
        }
    }
    Ok(out)
}
