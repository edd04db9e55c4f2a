//! Douglas-Rachford iterations on the product space and their monitors.
//!
//! FG variant, with `γ_i = λ/λ_i`:
//!
//! ```text
//! z_i = J_{γ_i A_i}(x_i)
//! y   = J_{λ A_m}(Σ λ_i (2 z_i - x_i))
//! x_i ← x_i + μ (y - z_i)
//! ```
//!
//! GF variant: `z = J_{λ A_m}(Σ λ_i x_i)`, `y_i = J_{γ_i A_i}(2z - x_i)`, same update.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{embed, lambda_norm, weighted_average, Point, Stack, Weights};
use crate::reform::{
    relation_certificate, resolvent_f_warped, resolvent_g_point, zero_certificate, InclusionProblem,
    ReformulationContext, ZeroCertificate,
};

pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_TOL: f64 = 1e-6;
/// Slack allowed by the Fejér monitor.
pub const FEJER_SLACK: f64 = 1e-10;
/// Slack allowed by the merit descent check.
pub const MERIT_SLACK: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    FG,
    GF,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fg" => Ok(Variant::FG),
            "gf" => Ok(Variant::GF),
            other => Err(Error::invalid(format!("unknown variant {other:?}, expected fg or gf"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DrParams {
    pub mu: f64,
    pub lambda: f64,
    pub weights: Weights,
    pub variant: Variant,
    pub max_iter: usize,
    pub tol: f64,
    /// Log every `log_every`-th iteration (the final one is always logged).
    pub log_every: usize,
    /// Keep every `x^k` for post-hoc replay.
    pub store_iterates: bool,
    /// Evaluate the merit `V_k` at logged iterations (FG only).
    pub track_merit: bool,
}

impl DrParams {
    pub fn new(weights: Weights, lambda: f64, mu: f64) -> Self {
        DrParams {
            mu,
            lambda,
            weights,
            variant: Variant::FG,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            log_every: 1,
            store_iterates: false,
            track_merit: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 2.0) {
            return Err(Error::invalid(format!("mu must lie in (0, 2), got {}", self.mu)));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::invalid(format!("tol must be finite and >= 0, got {}", self.tol)));
        }
        if self.log_every == 0 {
            return Err(Error::invalid("log_every must be >= 1"));
        }
        Ok(())
    }
}

/// `x^k` with the resolvent outputs `z^k`, `y^k` computed from it.
///
/// In the FG variant all blocks of `y` coincide; in the GF variant all blocks
/// of `z` coincide.
#[derive(Clone, Debug, PartialEq)]
pub struct DrState {
    pub x: Stack,
    pub z: Stack,
    pub y: Stack,
    pub k: usize,
}

#[derive(Clone, Debug)]
pub struct Solver<'a> {
    prob: &'a InclusionProblem,
    ctx: ReformulationContext,
    params: DrParams,
}

impl<'a> Solver<'a> {
    pub fn new(prob: &'a InclusionProblem, params: DrParams) -> Result<Self> {
        params.validate()?;
        let ctx = ReformulationContext::new(prob, params.weights.clone(), params.lambda)?;
        Ok(Solver { prob, ctx, params })
    }

    pub fn params(&self) -> &DrParams {
        &self.params
    }

    pub fn context(&self) -> &ReformulationContext {
        &self.ctx
    }

    pub fn problem(&self) -> &InclusionProblem {
        self.prob
    }

    fn blocks(&self) -> usize {
        self.prob.m() - 1
    }

    /// Resolvent outputs `(z, y)` at `x`.
    pub fn evaluate(&self, x: &Stack) -> Result<(Stack, Stack)> {
        let w = &self.params.weights;
        match self.params.variant {
            Variant::FG => {
                let z = resolvent_f_warped(&self.ctx, self.prob, x)?;
                let reflected = z.lin_comb(2.0, x, -1.0)?;
                let a = self.prob.last().resolvent(self.params.lambda, &weighted_average(&reflected, w)?)?;
                Ok((z, embed(&a, self.blocks())?))
            }
            Variant::GF => {
                let a = resolvent_g_point(&self.ctx, self.prob, x)?;
                let ys = x
                    .blocks()
                    .iter()
                    .zip(self.ctx.gammas())
                    .zip(self.prob.operators())
                    .map(|((xi, g), op)| op.resolvent(*g, &a.lin_comb(2.0, xi, -1.0)?))
                    .collect::<Result<Vec<_>>>()?;
                Ok((embed(&a, self.blocks())?, Stack::new(ys)?))
            }
        }
    }

    pub fn init(&self, x0: Stack) -> Result<DrState> {
        if x0.block_count() != self.blocks() {
            return Err(Error::BlockCount { expected: self.blocks(), found: x0.block_count() });
        }
        let (z, y) = self.evaluate(&x0)?;
        Ok(DrState { x: x0, z, y, k: 0 })
    }

    /// `x^{k+1} = x^k + μ(y^k - z^k)`, then fresh `z^{k+1}`, `y^{k+1}`.
    pub fn step(&self, s: &DrState) -> Result<DrState> {
        let x = s.x.add(&s.y.sub(&s.z)?.scale(self.params.mu))?;
        let (z, y) = self.evaluate(&x)?;
        Ok(DrState { x, z, y, k: s.k + 1 })
    }

    /// The DR operator `T(x)`.
    pub fn t_map(&self, x: &Stack) -> Result<Stack> {
        let (z, y) = self.evaluate(x)?;
        x.add(&y.sub(&z)?.scale(self.params.mu))
    }

    /// `T(x) = ((2 - μ) x + μ R_2 R_1 x) / 2` with reflected warped resolvents,
    /// `(R_1, R_2) = (R_F, R_G)` for FG and `(R_G, R_F)` for GF.
    pub fn t_map_reflected(&self, x: &Stack) -> Result<Stack> {
        let rf = |v: &Stack| -> Result<Stack> { resolvent_f_warped(&self.ctx, self.prob, v)?.lin_comb(2.0, v, -1.0) };
        let rg = |v: &Stack| -> Result<Stack> {
            embed(&resolvent_g_point(&self.ctx, self.prob, v)?, self.blocks())?.lin_comb(2.0, v, -1.0)
        };
        let rr = match self.params.variant {
            Variant::FG => rg(&rf(x)?)?,
            Variant::GF => rf(&rg(x)?)?,
        };
        x.lin_comb(1.0 - 0.5 * self.params.mu, &rr, 0.5 * self.params.mu)
    }

    pub fn residual(&self, s: &DrState) -> Result<(Stack, f64)> {
        residual_stacks(&s.z, &s.y, self.params.lambda, &self.params.weights)
    }

    /// The point whose limit solves the inclusion.
    pub fn shadow(&self, s: &DrState) -> Result<Point> {
        match self.params.variant {
            Variant::FG => weighted_average(&s.z, &self.params.weights),
            Variant::GF => Ok(s.z.block(0).clone()),
        }
    }

    /// Zero certificate at a state: direct evaluation at the shadow point when
    /// every operator is single-valued, resolvent relations otherwise.
    pub fn certificate(&self, s: &DrState, tol: f64) -> Result<ZeroCertificate> {
        if self.prob.operators().iter().all(|op| op.is_single_valued()) {
            return zero_certificate(self.prob, &self.shadow(s)?, tol);
        }
        let lambda = self.params.lambda;
        let w = &self.params.weights;
        let gammas = self.ctx.gammas();
        let mut points = Vec::with_capacity(self.prob.m());
        let mut subs = Vec::with_capacity(self.prob.m());
        match self.params.variant {
            Variant::FG => {
                for i in 0..self.blocks() {
                    points.push(s.z.block(i).clone());
                    subs.push(s.x.block(i).sub(s.z.block(i))?.scale(1.0 / gammas[i]));
                }
                let v = weighted_average(&s.z.lin_comb(2.0, &s.x, -1.0)?, w)?;
                let y = s.y.block(0);
                points.push(y.clone());
                subs.push(v.sub(y)?.scale(1.0 / lambda));
                relation_certificate(&points, &subs, y, tol)
            }
            Variant::GF => {
                let a = s.z.block(0);
                for i in 0..self.blocks() {
                    points.push(s.y.block(i).clone());
                    let u = a.lin_comb(2.0, s.x.block(i), -1.0)?.sub(s.y.block(i))?;
                    subs.push(u.scale(1.0 / gammas[i]));
                }
                let xbar = weighted_average(&s.x, w)?;
                points.push(a.clone());
                subs.push(xbar.sub(a)?.scale(1.0 / lambda));
                relation_certificate(&points, &subs, a, tol)
            }
        }
    }

    /// `V = Σ_i [f_i(z_i) + <∇f_i(z_i), y - z_i> + ‖y - z_i‖²/(2γ_i)] + f_m(y)`
    /// for the FG variant.
    pub fn merit(&self, s: &DrState) -> Result<f64> {
        if self.params.variant != Variant::FG {
            return Err(Error::NotEvaluable("merit is defined for the FG variant".into()));
        }
        let y = s.y.block(0);
        let mut v = 0.0;
        for (i, g) in self.ctx.gammas().iter().enumerate() {
            let op = self.prob.operator(i);
            let zi = s.z.block(i);
            let d = y.sub(zi)?;
            v += op.value(zi)? + op.evaluate(zi)?.dot(&d)? + d.norm_sq() / (2.0 * g);
        }
        Ok(v + self.prob.last().value(y)?)
    }

    pub fn run(&self, x0: Stack) -> Result<RunResult> {
        let mut state = self.init(x0)?;
        let mut log = IterateLog::default();
        let mut iterates = self.params.store_iterates.then(Vec::new);
        loop {
            let (_, res) = self.residual(&state)?;
            if let Some(it) = iterates.as_mut() {
                it.push(state.x.clone());
            }
            let converged = res < self.params.tol;
            let last = converged || state.k >= self.params.max_iter;
            if last || state.k % self.params.log_every == 0 {
                let merit = if self.params.track_merit { Some(self.merit(&state)?) } else { None };
                log.rows.push(LogRow {
                    k: state.k,
                    res_inf_f_sq: res,
                    k_res_inf_f_sq: state.k as f64 * res,
                    fejer_dist: None,
                    merit_v: merit,
                });
            }
            if last {
                let certificate = self.certificate(&state, 10.0 * self.params.tol)?;
                let shadow = self.shadow(&state)?;
                return Ok(RunResult {
                    iterations: state.k,
                    converged,
                    final_residual: res,
                    shadow,
                    state,
                    log,
                    certificate,
                    iterates,
                });
            }
            state = self.step(&state)?;
        }
    }
}

/// Residual blocks `(λ_i/λ)(z_i - y_i)` and `‖·‖²_{∞,F} = max_i mean(block_i²)`.
pub fn residual_stacks(z: &Stack, y: &Stack, lambda: f64, w: &Weights) -> Result<(Stack, f64)> {
    if z.block_count() != w.len() {
        return Err(Error::BlockCount { expected: w.len(), found: z.block_count() });
    }
    let blocks = z
        .blocks()
        .iter()
        .zip(y.blocks())
        .zip(w.as_slice())
        .map(|((zi, yi), li)| Ok(zi.sub(yi)?.scale(li / lambda)))
        .collect::<Result<Vec<_>>>()?;
    let r = Stack::new(blocks)?;
    let scalar = r.max_block_mean_square();
    Ok((r, scalar))
}

/// [`residual_stacks`] with a single `y` shared by all blocks.
pub fn residual(z: &Stack, y: &Point, lambda: f64, w: &Weights) -> Result<(Stack, f64)> {
    residual_stacks(z, &embed(y, z.block_count())?, lambda, w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub k: usize,
    pub res_inf_f_sq: f64,
    pub k_res_inf_f_sq: f64,
    pub fejer_dist: Option<f64>,
    pub merit_v: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterateLog {
    pub rows: Vec<LogRow>,
}

pub const LOG_HEADER: [&str; 5] = ["k", "res_inf_F_sq", "k_res_inf_F_sq", "fejer_dist", "merit_V"];

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl IterateLog {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LOG_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                r.res_inf_f_sq.to_string(),
                r.k_res_inf_f_sq.to_string(),
                opt_cell(r.fejer_dist),
                opt_cell(r.merit_v),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let parse = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::invalid(format!("bad number {s:?} in iterate log")))
            }
        };
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != LOG_HEADER.len() {
                return Err(Error::invalid("iterate log row has the wrong number of columns"));
            }
            rows.push(LogRow {
                k: rec[0].parse().map_err(|_| Error::invalid("bad k in iterate log"))?,
                res_inf_f_sq: parse(&rec[1])?.unwrap_or(f64::NAN),
                k_res_inf_f_sq: parse(&rec[2])?.unwrap_or(f64::NAN),
                fejer_dist: parse(&rec[3])?,
                merit_v: parse(&rec[4])?,
            });
        }
        Ok(IterateLog { rows })
    }

    /// Fills `fejer_dist` from a replay report.
    pub fn attach_fejer(&mut self, report: &FejerReport) {
        for row in &mut self.rows {
            row.fejer_dist = report.distances.get(row.k).copied();
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub state: DrState,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub shadow: Point,
    pub log: IterateLog,
    pub certificate: ZeroCertificate,
    /// `x^0, ..., x^K` when `store_iterates` was set.
    pub iterates: Option<Vec<Stack>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FejerReport {
    pub distances: Vec<f64>,
    /// First `k` with `d_k > d_{k-1} + slack`.
    pub first_violation: Option<usize>,
    pub passed: bool,
}

/// Λ-norm distances `‖x^k - x̄‖_Λ` and the first increase beyond
/// [`FEJER_SLACK`].
pub fn fejer_monitor(iterates: &[Stack], fixed_point: &Stack, w: &Weights) -> Result<FejerReport> {
    let distances = iterates.iter().map(|x| lambda_norm(&x.sub(fixed_point)?, w)).collect::<Result<Vec<_>>>()?;
    let first_violation = distances.windows(2).position(|p| p[1] > p[0] + FEJER_SLACK).map(|i| i + 1);
    Ok(FejerReport { passed: first_violation.is_none(), distances, first_violation })
}

pub const RATE_MIN_ROWS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub rows: usize,
    pub applicable: bool,
    /// Mean of `k·res` over the first and last quarters of the log.
    pub head_mean: f64,
    pub tail_mean: f64,
    pub decay_passed: bool,
    /// `Σ res` over all rows and over the last quarter.
    pub total_sum: f64,
    pub tail_increment: f64,
    pub plateau_passed: bool,
    pub passed: bool,
    pub diagnostic: String,
}

/// Tail checks on `k·‖Res‖²`: last-quartile mean below half the first-quartile
/// mean, and the partial sums of `‖Res‖²` gaining less than 5% over the last
/// quartile.
pub fn rate_monitor(log: &IterateLog) -> RateReport {
    let n = log.rows.len();
    if n < RATE_MIN_ROWS {
        return RateReport {
            rows: n,
            applicable: false,
            head_mean: f64::NAN,
            tail_mean: f64::NAN,
            decay_passed: false,
            total_sum: f64::NAN,
            tail_increment: f64::NAN,
            plateau_passed: false,
            passed: false,
            diagnostic: format!("log has {n} rows, need at least {RATE_MIN_ROWS}"),
        };
    }
    let q = n / 4;
    let mean = |rows: &[LogRow]| rows.iter().map(|r| r.k_res_inf_f_sq).sum::<f64>() / rows.len() as f64;
    let head_mean = mean(&log.rows[..q]);
    let tail_mean = mean(&log.rows[n - q..]);
    let total_sum: f64 = log.rows.iter().map(|r| r.res_inf_f_sq).sum();
    let tail_increment: f64 = log.rows[n - q..].iter().map(|r| r.res_inf_f_sq).sum();
    let decay_passed = tail_mean < 0.5 * head_mean || (tail_mean == 0.0 && head_mean == 0.0);
    let plateau_passed = tail_increment <= 0.05 * total_sum;
    let diagnostic = if decay_passed && plateau_passed {
        String::new()
    } else {
        format!(
            "k*res tail mean {tail_mean:e} vs head mean {head_mean:e}; tail increment {tail_increment:e} of total {total_sum:e}"
        )
    };
    RateReport {
        rows: n,
        applicable: true,
        head_mean,
        tail_mean,
        decay_passed,
        total_sum,
        tail_increment,
        plateau_passed,
        passed: decay_passed && plateau_passed,
        diagnostic,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeritReport {
    pub values: Vec<f64>,
    /// `V_k - V_{k+1} - Σ c_i ‖z_i^{k+1} - z_i^k‖²` per step.
    pub margins: Vec<f64>,
    pub first_violation: Option<usize>,
    pub passed: bool,
}

/// Replays stored iterates and checks
/// `V_k - V_{k+1} >= Σ_i c_i ‖z_i^{k+1} - z_i^k‖² - MERIT_SLACK`.
pub fn merit_descent_monitor(solver: &Solver<'_>, iterates: &[Stack], c: &[f64]) -> Result<MeritReport> {
    if c.len() != solver.blocks() {
        return Err(Error::BlockCount { expected: solver.blocks(), found: c.len() });
    }
    let states = iterates
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let (z, y) = solver.evaluate(x)?;
            Ok(DrState { x: x.clone(), z, y, k })
        })
        .collect::<Result<Vec<_>>>()?;
    let values = states.iter().map(|s| solver.merit(s)).collect::<Result<Vec<_>>>()?;
    let mut margins = Vec::with_capacity(states.len().saturating_sub(1));
    for k in 1..states.len() {
        let mut bound = 0.0;
        for (i, ci) in c.iter().enumerate() {
            bound += ci * states[k].z.block(i).sub(states[k - 1].z.block(i))?.norm_sq();
        }
        margins.push(values[k - 1] - values[k] - bound);
    }
    let first_violation = margins.iter().position(|&m| m < -MERIT_SLACK).map(|i| i + 1);
    Ok(MeritReport { values, margins, passed: first_violation.is_none(), first_violation })
}
