//! Problem files for `drsplit solve`.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "shape": [1],
//!   "weights": [0.5, 0.5],
//!   "operators": [
//!     {"kind": "affine", "matrix": [[1.0]], "offset": [-3.0]},
//!     {"kind": "affine", "matrix": [[1.0]]},
//!     {"kind": "affine", "matrix": [[2.0]]}
//!   ]
//! }
//! ```
//!
//! Operator kinds: `zero`, `affine` (vectors only; `sigma` defaults to the
//! smallest eigenvalue of the symmetric part), `psd_indicator`,
//! `quadratic_tracking` (`target`), `phi_elementwise` and `phi_spectral`
//! (`tau`, `omega`). `x0` is either one point, embedded into every block, or
//! a list of `m - 1` points; it defaults to zero.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::engine::Variant;
use crate::error::{Error, Result};
use crate::hilbert::{embed, Point, Shape, Stack, Weights};
use crate::operator::OperatorSpec;
use crate::reform::InclusionProblem;

pub const SCHEMA_VERSION: u32 = 1;

fn schema_default() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorEntry {
    Zero,
    Affine {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        offset: Option<Vec<f64>>,
        #[serde(default)]
        sigma: Option<f64>,
    },
    PsdIndicator,
    QuadraticTracking {
        target: Point,
    },
    PhiElementwise {
        tau: f64,
        omega: f64,
    },
    PhiSpectral {
        tau: f64,
        omega: f64,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum InitialPoint {
    Blocks(Vec<Point>),
    Single(Point),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default = "schema_default")]
    pub schema_version: u32,
    pub shape: Vec<usize>,
    pub operators: Vec<OperatorEntry>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub x0: Option<InitialPoint>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub variant: Option<Variant>,
}

/// A validated problem file.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub problem: InclusionProblem,
    pub weights: Weights,
    pub x0: Stack,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub variant: Option<Variant>,
}

fn parse_shape(s: &[usize]) -> Result<Shape> {
    match s {
        [n] if *n > 0 => Ok(Shape::Vector(*n)),
        [p, q] if p == q && *p > 0 => Ok(Shape::Matrix(*p)),
        other => Err(Error::invalid(format!("unsupported shape {other:?}; use [n] or [p, p]"))),
    }
}

fn build_operator(i: usize, e: &OperatorEntry, shape: Shape) -> Result<OperatorSpec> {
    let ctx = |err: Error| Error::invalid(format!("operator {}: {err}", i + 1));
    match e {
        OperatorEntry::Zero => Ok(OperatorSpec::zero()),
        OperatorEntry::Affine { matrix, offset, sigma } => {
            let n = matrix.len();
            if matrix.iter().any(|r| r.len() != n) {
                return Err(ctx(Error::invalid("affine matrix must be square")));
            }
            let m = DMatrix::from_row_slice(n, n, &matrix.concat());
            let b = Point::vector(offset.clone().unwrap_or_else(|| vec![0.0; n]));
            if shape != Shape::Vector(n) {
                return Err(ctx(Error::invalid(format!("affine operator of size {n} on a {shape} problem"))));
            }
            match sigma {
                Some(s) => OperatorSpec::affine(m, b, *s).map_err(ctx),
                None => OperatorSpec::affine_auto(m, b).map_err(ctx),
            }
        }
        OperatorEntry::PsdIndicator => Ok(OperatorSpec::psd_indicator()),
        OperatorEntry::QuadraticTracking { target } => Ok(OperatorSpec::quadratic_tracking(target.clone())),
        OperatorEntry::PhiElementwise { tau, omega } => OperatorSpec::phi_elementwise(*tau, *omega).map_err(ctx),
        OperatorEntry::PhiSpectral { tau, omega } => OperatorSpec::phi_spectral(*tau, *omega).map_err(ctx),
    }
}

impl ProblemFile {
    pub fn into_spec(self) -> Result<ProblemSpec> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!("unsupported schema_version {}", self.schema_version)));
        }
        let shape = parse_shape(&self.shape)?;
        let ops =
            self.operators.iter().enumerate().map(|(i, e)| build_operator(i, e, shape)).collect::<Result<Vec<_>>>()?;
        let problem = InclusionProblem::new(ops, shape)?;
        let blocks = problem.m() - 1;
        let weights = match self.weights {
            Some(w) => Weights::new(w)?,
            None => Weights::equal(blocks)?,
        };
        if weights.len() != blocks {
            return Err(Error::BlockCount { expected: blocks, found: weights.len() });
        }
        let x0 = match self.x0 {
            None => embed(&Point::zeros(shape), blocks)?,
            Some(InitialPoint::Single(p)) => embed(&p, blocks)?,
            Some(InitialPoint::Blocks(ps)) => Stack::new(ps)?,
        };
        if x0.shape() != shape {
            return Err(Error::ShapeMismatch { expected: shape, found: x0.shape() });
        }
        if x0.block_count() != blocks {
            return Err(Error::BlockCount { expected: blocks, found: x0.block_count() });
        }
        Ok(ProblemSpec { problem, weights, x0, mu: self.mu, lambda: self.lambda, variant: self.variant })
    }
}

pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    serde_json::from_str::<ProblemFile>(text)?.into_spec()
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_problem(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_example_parses() {
        let spec = parse_problem(
            r#"{"shape":[1],"operators":[
                {"kind":"affine","matrix":[[1.0]],"offset":[-3.0]},
                {"kind":"affine","matrix":[[1.0]]},
                {"kind":"affine","matrix":[[2.0]]}]}"#,
        )
        .unwrap();
        assert_eq!(spec.problem.sigmas(), vec![1.0, 1.0, 2.0]);
        assert_eq!(spec.weights.as_slice(), [0.5, 0.5]);
        assert_eq!(spec.x0.block_count(), 2);
    }

    #[test]
    fn matrix_problem_parses() {
        let spec = parse_problem(
            r#"{"shape":[2,2],"x0":{"shape":[2,2],"data":[[1,0],[0,1]]},"operators":[
                {"kind":"psd_indicator"},
                {"kind":"quadratic_tracking","target":{"shape":[2,2],"data":[[1,0.5],[0.5,-1]]}},
                {"kind":"phi_spectral","tau":0.1,"omega":1},
                {"kind":"phi_elementwise","tau":0.1,"omega":1}]}"#,
        )
        .unwrap();
        assert_eq!(spec.problem.m(), 4);
        assert!((spec.problem.sigmas()[3] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(parse_problem(r#"{"shape":[1],"operators":[{"kind":"zero"}]}"#).is_err());
        assert!(
            parse_problem(r#"{"shape":[2],"operators":[{"kind":"zero"},{"kind":"affine","matrix":[[1]]}]}"#).is_err()
        );
        assert!(parse_problem(r#"{"shape":[1],"operators":[{"kind":"zero"},{"kind":"bogus"}]}"#).is_err());
        assert!(parse_problem(r#"{"shape":[1],"weights":[1.0, 0.5],"operators":[{"kind":"zero"},{"kind":"zero"}]}"#)
            .is_err());
    }
}
