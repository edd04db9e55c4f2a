//! Points of the base space `H`, stacks in `H^{m-1}`, and the weighted
//! geometry `<x, y>_Λ = Σ λ_i <x_i, y_i>` used by the product-space iteration.
//!
//! A [`Point`] is either a dense vector or a dense symmetric matrix stored
//! row-major. Symmetric matrices are symmetrized on construction, so every
//! matrix point satisfies `x[i][j] == x[j][i]` bit for bit.

use std::fmt;

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance on `Σ λ_i = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Vector(usize),
    /// Symmetric `p × p` matrix.
    Matrix(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Vector(n) => n,
            Shape::Matrix(p) => p * p,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Vector(n) => write!(f, "vector({n})"),
            Shape::Matrix(p) => write!(f, "symmetric-matrix({p}x{p})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    shape: Shape,
    data: Vec<f64>,
}

impl Point {
    pub fn vector(data: Vec<f64>) -> Self {
        Point { shape: Shape::Vector(data.len()), data }
    }

    pub fn scalar(value: f64) -> Self {
        Point::vector(vec![value])
    }

    pub fn zeros(shape: Shape) -> Self {
        Point { shape, data: vec![0.0; shape.len()] }
    }

    /// Builds a symmetric matrix point from row-major entries, replacing the
    /// input by `(X + Xᵀ)/2`.
    pub fn symmetric(p: usize, mut data: Vec<f64>) -> Result<Self> {
        if data.len() != p * p {
            return Err(Error::invalid(format!("matrix of size {p}x{p} needs {} entries, got {}", p * p, data.len())));
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let avg = 0.5 * (data[i * p + j] + data[j * p + i]);
                data[i * p + j] = avg;
                data[j * p + i] = avg;
            }
        }
        Ok(Point { shape: Shape::Matrix(p), data })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid(format!("matrix must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        let p = m.nrows();
        let mut data = Vec::with_capacity(p * p);
        for i in 0..p {
            for j in 0..p {
                data.push(m[(i, j)]);
            }
        }
        Point::symmetric(p, data)
    }

    /// Dense copy; vectors become a column.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self.shape {
            Shape::Vector(n) => DMatrix::from_column_slice(n, 1, &self.data),
            Shape::Matrix(p) => DMatrix::from_row_slice(p, p, &self.data),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Entry `(i, j)` of a matrix point.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self.shape {
            Shape::Matrix(p) => self.data[i * p + j],
            Shape::Vector(_) => panic!("entry(i, j) on a vector point"),
        }
    }

    pub(crate) fn check_same(&self, other: &Point) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch { expected: self.shape, found: other.shape });
        }
        Ok(())
    }

    /// Applies `f` entrywise. For matrix points `f` must preserve symmetry,
    /// which holds for any entrywise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Point {
        Point { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Point, b: f64) -> Result<Point> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Ok(Point { shape: self.shape, data })
    }

    pub fn add(&self, other: &Point) -> Result<Point> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Point) -> Result<Point> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Point {
        self.map(|v| a * v)
    }

    pub fn dot(&self, other: &Point) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(x, y)| x * y).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `(1/N) Σ entries²` with `N` the entry count, i.e. `‖·‖²_{F,p}` for
    /// `p × p` matrices.
    pub fn mean_square(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.norm_sq() / self.data.len() as f64
        }
    }

    pub fn dist(&self, other: &Point) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PointRepr {
    Flat(Vec<f64>),
    Shaped { shape: Vec<usize>, data: serde_json::Value },
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self.shape {
            Shape::Vector(n) => PointRepr::Shaped { shape: vec![n], data: serde_json::json!(self.data) },
            Shape::Matrix(p) => {
                let rows: Vec<&[f64]> = self.data.chunks(p.max(1)).collect();
                PointRepr::Shaped { shape: vec![p, p], data: serde_json::json!(rows) }
            }
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match PointRepr::deserialize(d)? {
            PointRepr::Flat(v) => Ok(Point::vector(v)),
            PointRepr::Shaped { shape, data } => match shape.as_slice() {
                [n] => {
                    let v: Vec<f64> = serde_json::from_value(data).map_err(D::Error::custom)?;
                    if v.len() != *n {
                        return Err(D::Error::custom(format!("vector shape {n} but {} entries", v.len())));
                    }
                    Ok(Point::vector(v))
                }
                [r, c] if r == c => {
                    let rows: Vec<Vec<f64>> = serde_json::from_value(data).map_err(D::Error::custom)?;
                    if rows.len() != *r || rows.iter().any(|row| row.len() != *c) {
                        return Err(D::Error::custom(format!("matrix data does not match shape [{r}, {c}]")));
                    }
                    Point::symmetric(*r, rows.concat()).map_err(D::Error::custom)
                }
                other => Err(D::Error::custom(format!("unsupported point shape {other:?}"))),
            },
        }
    }
}

/// An element of `H^{m-1}`: `m - 1 ≥ 1` blocks of one common shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Stack {
    blocks: Vec<Point>,
}

impl Stack {
    pub fn new(blocks: Vec<Point>) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| Error::invalid("a stack needs at least one block"))?;
        for b in &blocks[1..] {
            first.check_same(b)?;
        }
        Ok(Stack { blocks })
    }

    pub fn blocks(&self) -> &[Point] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Point {
        &self.blocks[i]
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn shape(&self) -> Shape {
        self.blocks[0].shape()
    }

    pub fn into_blocks(self) -> Vec<Point> {
        self.blocks
    }

    fn check_same(&self, other: &Stack) -> Result<()> {
        if self.block_count() != other.block_count() {
            return Err(Error::BlockCount { expected: self.block_count(), found: other.block_count() });
        }
        self.blocks[0].check_same(&other.blocks[0])
    }

    pub fn lin_comb(&self, a: f64, other: &Stack, b: f64) -> Result<Stack> {
        self.check_same(other)?;
        let blocks =
            self.blocks.iter().zip(&other.blocks).map(|(x, y)| x.lin_comb(a, y, b)).collect::<Result<Vec<_>>>()?;
        Ok(Stack { blocks })
    }

    pub fn sub(&self, other: &Stack) -> Result<Stack> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn add(&self, other: &Stack) -> Result<Stack> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn scale(&self, a: f64) -> Stack {
        Stack { blocks: self.blocks.iter().map(|b| b.scale(a)).collect() }
    }

    /// Plain (unweighted) inner product on `H^{m-1}`.
    pub fn dot(&self, other: &Stack) -> Result<f64> {
        self.check_same(other)?;
        self.blocks.iter().zip(&other.blocks).map(|(x, y)| x.dot(y)).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.blocks.iter().map(Point::norm_sq).sum()
    }

    /// `max_i ‖x_i‖²_{F,p}`.
    pub fn max_block_mean_square(&self) -> f64 {
        self.blocks.iter().map(Point::mean_square).fold(0.0, f64::max)
    }
}

/// Positive weights `λ_1, …, λ_{m-1}` summing to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Weights {
    lambdas: Vec<f64>,
}

impl Weights {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::invalid("weights must be nonempty"));
        }
        if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::invalid(format!("weights must be positive, got {bad}")));
        }
        let sum: f64 = lambdas.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("weights must sum to 1, got {sum}")));
        }
        Ok(Weights { lambdas })
    }

    pub fn equal(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("weights must be nonempty"));
        }
        Ok(Weights { lambdas: vec![1.0 / count as f64; count] })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.lambdas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn check(&self, x: &Stack) -> Result<()> {
        if x.block_count() != self.len() {
            return Err(Error::BlockCount { expected: self.len(), found: x.block_count() });
        }
        Ok(())
    }
}

impl<'de> Deserialize<'de> for Weights {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Weights::new(Vec::<f64>::deserialize(d)?).map_err(D::Error::custom)
    }
}

/// `<x, y>_Λ = Σ λ_i <x_i, y_i>`.
pub fn lambda_inner(x: &Stack, y: &Stack, w: &Weights) -> Result<f64> {
    w.check(x)?;
    x.check_same(y)?;
    let mut acc = 0.0;
    for ((xi, yi), li) in x.blocks.iter().zip(&y.blocks).zip(&w.lambdas) {
        acc += li * xi.dot(yi)?;
    }
    Ok(acc)
}

pub fn lambda_norm(x: &Stack, w: &Weights) -> Result<f64> {
    Ok(lambda_inner(x, x, w)?.max(0.0).sqrt())
}

/// The diagonal embedding `x ↦ (x, …, x)`.
pub fn embed(x: &Point, count: usize) -> Result<Stack> {
    if count < 1 {
        return Err(Error::invalid("embed needs count >= 1"));
    }
    Ok(Stack { blocks: vec![x.clone(); count] })
}

/// `Σ λ_i x_i`. A stack of equal blocks maps back to that block exactly.
pub fn weighted_average(x: &Stack, w: &Weights) -> Result<Point> {
    w.check(x)?;
    if x.blocks[1..].iter().all(|b| b.data == x.blocks[0].data) {
        return Ok(x.blocks[0].clone());
    }
    let mut data = vec![0.0; x.blocks[0].len()];
    for (b, l) in x.blocks.iter().zip(&w.lambdas) {
        for (acc, v) in data.iter_mut().zip(b.as_slice()) {
            *acc += l * v;
        }
    }
    Ok(Point { shape: x.shape(), data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> Stack {
        Stack::new(v.iter().map(|&t| Point::scalar(t)).collect()).unwrap()
    }

    #[test]
    fn lambda_inner_unit_stack() {
        let x = s(&[1.0, 1.0]);
        let w = Weights::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(lambda_inner(&x, &x, &w).unwrap(), 1.0);
    }

    #[test]
    fn lambda_inner_orthonormal_blocks() {
        let x = Stack::new(vec![Point::vector(vec![1.0, 0.0]), Point::vector(vec![0.0, 1.0])]).unwrap();
        let w = Weights::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(lambda_inner(&x, &x, &w).unwrap(), 1.0);
    }

    #[test]
    fn embed_and_average() {
        let e = embed(&Point::scalar(3.0), 2).unwrap();
        assert_eq!(e, s(&[3.0, 3.0]));
        let z = embed(&Point::scalar(0.0), 5).unwrap();
        assert_eq!(z.block_count(), 5);
        assert!(z.blocks().iter().all(|b| b.as_slice() == [0.0]));
        assert!(embed(&Point::scalar(1.0), 0).is_err());

        let w = Weights::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(weighted_average(&s(&[2.0, 2.0]), &w).unwrap().as_slice(), [2.0]);
        let w = Weights::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(weighted_average(&s(&[0.0, 4.0]), &w).unwrap().as_slice(), [2.0]);
    }

    #[test]
    fn shape_mixing_is_an_error() {
        let a = Point::vector(vec![1.0, 2.0]);
        let b = Point::vector(vec![1.0]);
        assert!(matches!(a.add(&b), Err(Error::ShapeMismatch { .. })));
        let m = Point::symmetric(1, vec![1.0]).unwrap();
        assert!(a.dot(&m).is_err());
        assert!(Stack::new(vec![a.clone(), b]).is_err());
        let w = Weights::new(vec![1.0]).unwrap();
        assert!(matches!(weighted_average(&s(&[1.0, 2.0]), &w), Err(Error::BlockCount { .. })));
    }

    #[test]
    fn weights_validation() {
        assert!(Weights::new(vec![0.5, 0.6]).is_err());
        assert!(Weights::new(vec![1.5, -0.5]).is_err());
        assert!(Weights::new(vec![]).is_err());
        assert!(Weights::new(vec![0.1, 0.2, 0.7]).is_ok());
    }

    #[test]
    fn symmetrization_on_construction() {
        let p = Point::symmetric(2, vec![1.0, 2.0, 4.0, 3.0]).unwrap();
        assert_eq!(p.entry(0, 1), 3.0);
        assert_eq!(p.entry(1, 0), 3.0);
    }

    #[test]
    fn point_json_forms() {
        let v: Point = serde_json::from_str("[1.0, 2.0]").unwrap();
        assert_eq!(v.shape(), Shape::Vector(2));
        let m: Point = serde_json::from_str(r#"{"shape":[2,2],"data":[[1,2],[2,5]]}"#).unwrap();
        assert_eq!(m.shape(), Shape::Matrix(2));
        let back: Point = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Point>(r#"{"shape":[2,2],"data":[[1,2]]}"#).is_err());
    }
}
