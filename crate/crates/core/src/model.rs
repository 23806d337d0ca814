//! Problem data: the smooth parts `h`, `F`, the catalog term `g`, and the
//! Lagrangian `L(x,u) = h(x) + ⟨u, F(x)⟩` with its derivatives.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::catalog::{CatalogFunction, CatalogKind};
use crate::linalg::{asymmetry, symmetrize};
use crate::{lit, Error, Real, Result};

/// Tolerance on the asymmetry of `Q`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A caller-supplied `C²` objective.
pub trait SmoothFunction<T: Real>: Send + Sync {
    fn value(&self, x: &DVector<T>) -> T;
    fn gradient(&self, x: &DVector<T>) -> DVector<T>;
    fn hessian(&self, x: &DVector<T>) -> DMatrix<T>;
}

/// A caller-supplied `C²` map into `R^m`.
pub trait SmoothMap<T: Real>: Send + Sync {
    fn output_dim(&self) -> usize;
    fn value(&self, x: &DVector<T>) -> DVector<T>;
    fn jacobian(&self, x: &DVector<T>) -> DMatrix<T>;
    /// `Σ uᵢ ∇²Fᵢ(x)`.
    fn weighted_hessian(&self, x: &DVector<T>, u: &DVector<T>) -> DMatrix<T>;
}

/// `h(x) = ½ xᵀQx + cᵀx`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticObjective<T: Real> {
    pub q: DMatrix<T>,
    pub c: DVector<T>,
}

impl<T: Real> SmoothFunction<T> for QuadraticObjective<T> {
    fn value(&self, x: &DVector<T>) -> T {
        (&self.q * x).dot(x) * lit(0.5) + self.c.dot(x)
    }

    fn gradient(&self, x: &DVector<T>) -> DVector<T> {
        &self.q * x + &self.c
    }

    fn hessian(&self, _x: &DVector<T>) -> DMatrix<T> {
        self.q.clone()
    }
}

/// `Fᵢ(x) = aᵢx + f0ᵢ + ½ xᵀGᵢx`; affine when `quad` is empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineMap<T: Real> {
    pub a: DMatrix<T>,
    pub f0: DVector<T>,
    pub quad: Vec<DMatrix<T>>,
}

impl<T: Real> AffineMap<T> {
    pub fn affine(a: DMatrix<T>, f0: DVector<T>) -> Self {
        AffineMap { a, f0, quad: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::affine(DMatrix::identity(n, n), DVector::zeros(n))
    }
}

impl<T: Real> SmoothMap<T> for AffineMap<T> {
    fn output_dim(&self) -> usize {
        self.a.nrows()
    }

    fn value(&self, x: &DVector<T>) -> DVector<T> {
        let mut out = &self.a * x + &self.f0;
        for (i, g) in self.quad.iter().enumerate() {
            out[i] += (g * x).dot(x) * lit(0.5);
        }
        out
    }

    fn jacobian(&self, x: &DVector<T>) -> DMatrix<T> {
        let mut j = self.a.clone();
        for (i, g) in self.quad.iter().enumerate() {
            let row = (g * x).transpose();
            let cur = j.row(i) + row;
            j.set_row(i, &cur);
        }
        j
    }

    fn weighted_hessian(&self, _x: &DVector<T>, u: &DVector<T>) -> DMatrix<T> {
        let n = self.a.ncols();
        self.quad
            .iter()
            .enumerate()
            .fold(DMatrix::zeros(n, n), |acc, (i, g)| acc + g * u[i])
    }
}

#[derive(Clone)]
pub enum Objective<T: Real> {
    Quadratic(QuadraticObjective<T>),
    Custom(Arc<dyn SmoothFunction<T>>),
}

#[derive(Clone)]
pub enum Map<T: Real> {
    Affine(AffineMap<T>),
    Custom(Arc<dyn SmoothMap<T>>),
}

impl<T: Real> fmt::Debug for Objective<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Quadratic(q) => q.fmt(f),
            Objective::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl<T: Real> fmt::Debug for Map<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Map::Affine(a) => a.fmt(f),
            Map::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl<T: Real> Objective<T> {
    fn inner(&self) -> &dyn SmoothFunction<T> {
        match self {
            Objective::Quadratic(q) => q,
            Objective::Custom(c) => c.as_ref(),
        }
    }
}

impl<T: Real> Map<T> {
    fn inner(&self) -> &dyn SmoothMap<T> {
        match self {
            Map::Affine(a) => a,
            Map::Custom(c) => c.as_ref(),
        }
    }
}

/// Raw, unvalidated problem data.
#[derive(Debug, Clone)]
pub struct ProblemSpecInput<T: Real> {
    pub n: usize,
    pub q: DMatrix<T>,
    pub c: DVector<T>,
    pub a: DMatrix<T>,
    pub f0: DVector<T>,
    /// Per-component Hessians of a quadratic `F`; empty for affine `F`.
    pub f_quad: Vec<DMatrix<T>>,
    pub g_kind: String,
    pub g_shape: Vec<usize>,
    pub g_sigma: T,
}

/// A validated composite problem `min h(x) + g(F(x))`.
#[derive(Debug, Clone)]
pub struct ProblemSpec<T: Real> {
    pub n: usize,
    pub m: usize,
    pub h: Objective<T>,
    pub f: Map<T>,
    pub g: CatalogFunction<T>,
}

/// Canonical perturbation `(a, b)`: tilt of the objective and shift of `F`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Perturbation<T: Real> {
    pub a: DVector<T>,
    pub b: DVector<T>,
}

impl<T: Real> Perturbation<T> {
    pub fn zero(n: usize, m: usize) -> Self {
        Perturbation { a: DVector::zeros(n), b: DVector::zeros(m) }
    }

    pub fn norm(&self) -> T {
        (self.a.norm_squared() + self.b.norm_squared()).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimalDualPair<T: Real> {
    pub x: DVector<T>,
    pub u: DVector<T>,
    pub residual_norm: T,
}

impl<T: Real> PrimalDualPair<T> {
    pub fn new(x: DVector<T>, u: DVector<T>) -> Self {
        PrimalDualPair { x, u, residual_norm: T::zero() }
    }

    /// Euclidean distance in the product space.
    pub fn distance(&self, other: &Self) -> T {
        ((&self.x - &other.x).norm_squared() + (&self.u - &other.u).norm_squared()).sqrt()
    }
}

fn mismatch(msg: String) -> Error {
    Error::DimensionMismatch(msg)
}

pub fn assemble_problem<T: Real>(raw: ProblemSpecInput<T>) -> Result<ProblemSpec<T>> {
    let n = raw.n;
    let kind = CatalogKind::parse(&raw.g_kind)?;
    let g = CatalogFunction::new(kind, &raw.g_shape, raw.g_sigma)?;
    if raw.q.shape() != (n, n) {
        return Err(mismatch(format!("Q is {}x{}, expected {n}x{n}", raw.q.nrows(), raw.q.ncols())));
    }
    if raw.c.len() != n {
        return Err(mismatch(format!("c has length {}, expected {n}", raw.c.len())));
    }
    let asym = asymmetry(&raw.q);
    if asym > lit(SYMMETRY_TOL) {
        return Err(Error::AsymmetricQ(crate::to_f64(asym)));
    }
    let m = g.dim();
    if raw.a.shape() != (m, n) {
        return Err(mismatch(format!(
            "A is {}x{}, expected {m}x{n} ({} needs m = {m})",
            raw.a.nrows(),
            raw.a.ncols(),
            g.kind
        )));
    }
    if raw.f0.len() != m {
        return Err(mismatch(format!("f0 has length {}, expected {m}", raw.f0.len())));
    }
    if !raw.f_quad.is_empty() && raw.f_quad.len() != m {
        return Err(mismatch(format!("F has {} component Hessians, expected {m}", raw.f_quad.len())));
    }
    for (i, gi) in raw.f_quad.iter().enumerate() {
        if gi.shape() != (n, n) || asymmetry(gi) > lit(SYMMETRY_TOL) {
            return Err(mismatch(format!("Hessian of F[{i}] must be a symmetric {n}x{n} matrix")));
        }
    }
    Ok(ProblemSpec {
        n,
        m,
        h: Objective::Quadratic(QuadraticObjective { q: raw.q, c: raw.c }),
        f: Map::Affine(AffineMap { a: raw.a, f0: raw.f0, quad: raw.f_quad }),
        g,
    })
}

impl<T: Real> ProblemSpec<T> {
    /// Quadratic `h` and affine `F` given as matrices.
    pub fn quadratic(q: DMatrix<T>, c: DVector<T>, a: DMatrix<T>, f0: DVector<T>, g: CatalogFunction<T>) -> Result<Self> {
        assemble_problem(ProblemSpecInput {
            n: q.nrows(),
            q,
            c,
            a,
            f0,
            f_quad: Vec::new(),
            g_kind: g.kind.name().to_string(),
            g_shape: g.shape.clone(),
            g_sigma: g.sigma,
        })
    }

    /// Problem with caller-supplied evaluators.
    pub fn with_evaluators(
        n: usize,
        h: Arc<dyn SmoothFunction<T>>,
        f: Arc<dyn SmoothMap<T>>,
        g: CatalogFunction<T>,
    ) -> Result<Self> {
        let m = g.dim();
        if f.output_dim() != m {
            return Err(mismatch(format!("F maps into R^{}, g expects R^{m}", f.output_dim())));
        }
        Ok(ProblemSpec { n, m, h: Objective::Custom(h), f: Map::Custom(f), g })
    }

    fn check_x(&self, x: &DVector<T>) {
        assert_eq!(x.len(), self.n, "primal vector has wrong length");
    }

    pub fn h_value(&self, x: &DVector<T>) -> T {
        self.h.inner().value(x)
    }

    pub fn h_gradient(&self, x: &DVector<T>) -> DVector<T> {
        self.h.inner().gradient(x)
    }

    pub fn f_value(&self, x: &DVector<T>) -> DVector<T> {
        self.f.inner().value(x)
    }

    /// `∇F(x)`, an `m×n` matrix.
    pub fn f_jacobian(&self, x: &DVector<T>) -> DMatrix<T> {
        self.f.inner().jacobian(x)
    }

    /// `L(x,u) = h(x) + ⟨u, F(x)⟩`.
    pub fn lagrangian_value(&self, x: &DVector<T>, u: &DVector<T>) -> T {
        self.h_value(x) + u.dot(&self.f_value(x))
    }

    pub fn lagrangian_grad(&self, x: &DVector<T>, u: &DVector<T>) -> DVector<T> {
        self.check_x(x);
        self.h_gradient(x) + self.f_jacobian(x).transpose() * u
    }

    pub fn lagrangian_hessian(&self, x: &DVector<T>, u: &DVector<T>) -> DMatrix<T> {
        self.check_x(x);
        symmetrize(&(self.h.inner().hessian(x) + self.f.inner().weighted_hessian(x, u)))
    }

    /// `h(x) + g(F(x))`, with `None` for `+∞`.
    pub fn objective_value(&self, x: &DVector<T>) -> Result<Option<T>> {
        self.check_x(x);
        Ok(self.g.value(&self.f_value(x))?.map(|gv| self.h_value(x) + gv))
    }

    pub fn is_quadratic_affine(&self) -> bool {
        matches!((&self.h, &self.f), (Objective::Quadratic(_), Map::Affine(a)) if a.quad.is_empty())
    }
}

pub fn lagrangian_grad<T: Real>(spec: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>) -> DVector<T> {
    spec.lagrangian_grad(x, u)
}

pub fn lagrangian_hessian<T: Real>(spec: &ProblemSpec<T>, x: &DVector<T>, u: &DVector<T>) -> DMatrix<T> {
    spec.lagrangian_hessian(x, u)
}

pub fn objective_value<T: Real>(spec: &ProblemSpec<T>, x: &DVector<T>) -> Result<Option<T>> {
    spec.objective_value(x)
}
