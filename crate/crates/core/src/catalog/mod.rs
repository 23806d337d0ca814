//! The six catalog functions `g` with their proximal maps, B-elements of the
//! prox Jacobian, first-order directional derivatives and cone descriptions.
//!
//! A catalog entry is `g = σ·g₀` where `g₀` is the base function named by
//! the kind; for indicators the weight is immaterial. Matrix arguments arrive
//! flattened: symmetric ones by `svec`, rectangular ones column-major.

pub mod l1ball;
mod polyhedral;
mod soc;
mod spectral;
mod svd;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::svec_dim;
use crate::linalg::range_basis;
use crate::{lit, Error, Real, Result};

pub use l1ball::{project_l1_ball, spectral_thresholds, SpectralThresholds};
pub use spectral::TIE_REL;
pub use svd::project_simplex;

use polyhedral::{l1, orthant};
use svd::Norm;

/// Relative tolerance for membership in `dom g`.
pub const DOM_TOL: f64 = 1e-9;
/// Relative tolerance for subgradient membership used by `critical_set`.
pub const SUBGRAD_TOL: f64 = 1e-6;
/// Relative cutoff when reading ranges off Jacobian elements.
pub const RANGE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalogKind {
    Orthant,
    Soc,
    Psd,
    L1,
    Nuclear,
    Spectral,
}

impl CatalogKind {
    pub const ALL: [CatalogKind; 6] = [
        CatalogKind::Orthant,
        CatalogKind::Soc,
        CatalogKind::Psd,
        CatalogKind::L1,
        CatalogKind::Nuclear,
        CatalogKind::Spectral,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "orthant" => Ok(CatalogKind::Orthant),
            "soc" => Ok(CatalogKind::Soc),
            "psd" => Ok(CatalogKind::Psd),
            "l1" => Ok(CatalogKind::L1),
            "nuclear" => Ok(CatalogKind::Nuclear),
            "spectral" => Ok(CatalogKind::Spectral),
            other => Err(Error::UnknownCatalogKind(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CatalogKind::Orthant => "orthant",
            CatalogKind::Soc => "soc",
            CatalogKind::Psd => "psd",
            CatalogKind::L1 => "l1",
            CatalogKind::Nuclear => "nuclear",
            CatalogKind::Spectral => "spectral",
        }
    }

    /// Indicator functions have a proper domain; the norms are finite everywhere.
    pub fn is_indicator(self) -> bool {
        matches!(self, CatalogKind::Orthant | CatalogKind::Soc | CatalogKind::Psd)
    }

    pub fn is_matrix(self) -> bool {
        matches!(self, CatalogKind::Psd | CatalogKind::Nuclear | CatalogKind::Spectral)
    }
}

impl fmt::Display for CatalogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which element of the B-subdifferential to return at a kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Pick {
    /// Maximal range (the element `W̄`).
    Max,
    /// Minimal range.
    Min,
    /// Limit along a random perturbation of the tie structure.
    Random,
}

/// Public selector for Jacobian elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Maximal,
    Minimal,
    Sample(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogFunction<T: Real> {
    pub kind: CatalogKind,
    /// `[m]` for vector kinds, `[p]` for psd, `[p, q]` for the matrix norms.
    pub shape: Vec<usize>,
    pub sigma: T,
}

type Membership<T> = Arc<dyn Fn(&DVector<T>, T) -> bool + Send + Sync>;
type Projector<T> = Arc<dyn Fn(&DVector<T>) -> DVector<T> + Send + Sync>;

/// A closed convex cone through its affine hull, lineality space, a
/// membership oracle and (when available) the Euclidean projector.
#[derive(Clone)]
pub struct ConeDescription<T: Real> {
    pub affine_basis: DMatrix<T>,
    pub lineality_basis: DMatrix<T>,
    membership: Membership<T>,
    projector: Option<Projector<T>>,
}

impl<T: Real> fmt::Debug for ConeDescription<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConeDescription")
            .field("aff_dim", &self.affine_basis.ncols())
            .field("lin_dim", &self.lineality_basis.ncols())
            .field("projector", &self.projector.is_some())
            .finish()
    }
}

impl<T: Real> ConeDescription<T> {
    pub fn contains(&self, d: &DVector<T>, tol: T) -> bool {
        (self.membership)(d, tol)
    }

    pub fn project(&self, d: &DVector<T>) -> Option<DVector<T>> {
        self.projector.as_ref().map(|p| p(d))
    }

    pub fn has_projector(&self) -> bool {
        self.projector.is_some()
    }

    pub fn dim(&self) -> usize {
        self.affine_basis.nrows()
    }
}

fn rel<T: Real>(base: f64, x: &DVector<T>) -> T {
    lit::<T>(base) * (T::one() + x.norm())
}

fn tie_of<T: Real>(z: &DVector<T>) -> T {
    spectral::tie_tol(z.amax())
}

impl<T: Real> CatalogFunction<T> {
    pub fn new(kind: CatalogKind, shape: &[usize], sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", crate::to_f64(sigma))));
        }
        if shape.is_empty() || shape.len() > 2 || shape.contains(&0) {
            return Err(Error::InvalidParameter(format!("invalid shape {shape:?} for {kind}")));
        }
        let shape = match (kind, shape) {
            (CatalogKind::Nuclear | CatalogKind::Spectral, [p]) => vec![*p, *p],
            (CatalogKind::Nuclear | CatalogKind::Spectral, [p, q]) => vec![*p, *q],
            (_, [d]) => vec![*d],
            (_, _) => return Err(Error::InvalidParameter(format!("{kind} takes a single shape parameter"))),
        };
        Ok(CatalogFunction { kind, shape, sigma })
    }

    pub fn orthant(m: usize) -> Self {
        Self::new(CatalogKind::Orthant, &[m], T::one()).expect("valid orthant")
    }

    /// Image dimension `m` of the flattened argument.
    pub fn dim(&self) -> usize {
        match self.kind {
            CatalogKind::Psd => svec_dim(self.shape[0]),
            CatalogKind::Nuclear | CatalogKind::Spectral => self.shape[0] * self.shape[1],
            _ => self.shape[0],
        }
    }

    fn pq(&self) -> (usize, usize) {
        (self.shape[0], *self.shape.get(1).unwrap_or(&self.shape[0]))
    }

    fn norm(&self) -> Option<Norm> {
        match self.kind {
            CatalogKind::Nuclear => Some(Norm::Nuclear),
            CatalogKind::Spectral => Some(Norm::Spectral),
            _ => None,
        }
    }

    fn check_len(&self, v: &DVector<T>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} expects vectors of length {}, got {}",
                self.kind,
                self.dim(),
                v.len()
            )));
        }
        Ok(())
    }

    /// `g(x)`, or `None` when `x ∉ dom g` beyond the relative tolerance.
    pub fn value(&self, x: &DVector<T>) -> Result<Option<T>> {
        self.check_len(x)?;
        let tol = rel(DOM_TOL, x);
        Ok(match self.kind {
            CatalogKind::Orthant => orthant::value(x, tol),
            CatalogKind::Soc => soc::value(x, tol),
            CatalogKind::Psd => spectral::psd::value(x, self.shape[0], tol)?,
            CatalogKind::L1 => Some(l1::value(x, self.sigma)),
            CatalogKind::Nuclear | CatalogKind::Spectral => {
                let (p, q) = self.pq();
                Some(svd::value(x, p, q, self.norm().unwrap(), self.sigma)?)
            }
        })
    }

    /// `Prox_{t g}(z)`.
    pub fn prox(&self, z: &DVector<T>, t: T) -> Result<DVector<T>> {
        self.check_len(z)?;
        let w = self.sigma * t;
        Ok(match self.kind {
            CatalogKind::Orthant => orthant::prox(z),
            CatalogKind::Soc => soc::project(z),
            CatalogKind::Psd => spectral::psd::project(z, self.shape[0])?,
            CatalogKind::L1 => l1::prox(z, w),
            CatalogKind::Nuclear | CatalogKind::Spectral => {
                let (p, q) = self.pq();
                svd::prox(z, p, q, self.norm().unwrap(), w)?
            }
        })
    }

    /// `Prox_{g*}(z)`, computed from the conjugate directly.
    pub fn prox_conj(&self, z: &DVector<T>) -> Result<DVector<T>> {
        self.check_len(z)?;
        Ok(match self.kind {
            CatalogKind::Orthant => orthant::prox_conj(z),
            CatalogKind::Soc => soc::prox_conj(z),
            CatalogKind::Psd => spectral::psd::prox_conj(z, self.shape[0])?,
            CatalogKind::L1 => l1::prox_conj(z, self.sigma),
            CatalogKind::Nuclear | CatalogKind::Spectral => {
                let (p, q) = self.pq();
                svd::prox_conj(z, p, q, self.norm().unwrap(), self.sigma)?
            }
        })
    }

    pub(crate) fn b_element(&self, z: &DVector<T>, pick: Pick, rng: &mut ChaCha8Rng) -> Result<DMatrix<T>> {
        self.check_len(z)?;
        let tie = tie_of(z);
        Ok(match self.kind {
            CatalogKind::Orthant => orthant::b_element(z, tie, pick, rng),
            CatalogKind::Soc => soc::b_element(z, tie, pick, rng),
            CatalogKind::Psd => spectral::psd::b_element(z, self.shape[0], pick, rng)?,
            CatalogKind::L1 => l1::b_element(z, self.sigma, tie, pick, rng),
            CatalogKind::Nuclear | CatalogKind::Spectral => {
                let (p, q) = self.pq();
                svd::b_element(z, p, q, self.norm().unwrap(), self.sigma, pick, rng)?
            }
        })
    }

    /// The maximal-range element `W̄ ∈ ∂_B Prox_g(z)`.
    pub fn prox_jacobian_basic(&self, z: &DVector<T>) -> Result<DMatrix<T>> {
        self.b_element(z, Pick::Max, &mut ChaCha8Rng::seed_from_u64(0))
    }

    /// The minimal-range B-element.
    pub fn prox_jacobian_min(&self, z: &DVector<T>) -> Result<DMatrix<T>> {
        self.b_element(z, Pick::Min, &mut ChaCha8Rng::seed_from_u64(0))
    }

    /// A seeded element of the generalized Jacobian: either a B-element or a
    /// convex combination of two.
    pub fn prox_jacobian_sample(&self, z: &DVector<T>, seed: u64) -> Result<DMatrix<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| match rng.random_range(0..3) {
            0 => Pick::Max,
            1 => Pick::Min,
            _ => Pick::Random,
        };
        if rng.random_bool(0.5) {
            let pick = draw(&mut rng);
            return self.b_element(z, pick, &mut rng);
        }
        let (pa, pb) = (draw(&mut rng), draw(&mut rng));
        let a = self.b_element(z, pa, &mut rng)?;
        let b = self.b_element(z, pb, &mut rng)?;
        let t = lit::<T>(rng.random::<f64>());
        Ok(a * (T::one() - t) + b * t)
    }

    pub fn prox_jacobian(&self, z: &DVector<T>, res: Resolution) -> Result<DMatrix<T>> {
        match res {
            Resolution::Maximal => self.prox_jacobian_basic(z),
            Resolution::Minimal => self.prox_jacobian_min(z),
            Resolution::Sample(seed) => self.prox_jacobian_sample(z, seed),
        }
    }

    /// `u ∈ ∂g(x)` through the fixed point `x = Prox_g(x + u)`.
    pub fn subdifferential_contains(&self, x: &DVector<T>, u: &DVector<T>, tol: T) -> Result<bool> {
        self.check_len(u)?;
        let p = self.prox(&(x + u), T::one())?;
        Ok((x - p).norm() <= tol * (T::one() + x.norm()))
    }

    /// `dg(x)(d)`, with `None` standing for `+∞`.
    pub fn directional_deriv(&self, x: &DVector<T>, d: &DVector<T>) -> Result<Option<T>> {
        self.check_len(x)?;
        self.check_len(d)?;
        let tol = rel(DOM_TOL, x);
        let act = rel(RANGE_TOL, x);
        match self.kind {
            CatalogKind::Orthant => orthant::directional_deriv(x, d, act, tol),
            CatalogKind::Soc => soc::directional_deriv(x, d, act, tol),
            CatalogKind::Psd => spectral::psd::directional_deriv(x, d, self.shape[0], act, tol),
            CatalogKind::L1 => Ok(Some(l1::directional_deriv(x, d, self.sigma, act))),
            CatalogKind::Nuclear | CatalogKind::Spectral => {
                let (p, q) = self.pq();
                Ok(Some(svd::directional_deriv(x, d, p, q, self.norm().unwrap(), self.sigma, act)?))
            }
        }
    }

    /// Projection onto the normal cone of `dom g` at `x`.
    pub fn domain_normal_project(&self, x: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>> {
        self.check_len(x)?;
        self.check_len(v)?;
        let tol = rel(DOM_TOL, x);
        let act = rel(RANGE_TOL, x);
        match self.kind {
            CatalogKind::Orthant => orthant::dom_normal_project(x, v, act, tol),
            CatalogKind::Soc => soc::dom_normal_project(x, v, act, tol),
            CatalogKind::Psd => spectral::psd::dom_normal_project(x, v, self.shape[0], act, tol),
            _ => Ok(DVector::zeros(v.len())),
        }
    }

    /// Projection onto `dom g`.
    pub fn dom_project(&self, z: &DVector<T>) -> Result<DVector<T>> {
        if self.kind.is_indicator() {
            self.prox(z, T::one())
        } else {
            Ok(z.clone())
        }
    }

    /// Projection of `y` onto `∂g(x)`.
    pub fn subgradient_project(&self, x: &DVector<T>, y: &DVector<T>) -> Result<DVector<T>> {
        self.subgradient_project_with(x, y, rel(RANGE_TOL, x))
    }

    /// As [`Self::subgradient_project`], but only entries at roundoff level
    /// count as active, so `∂g` is resolved at points close to a kink.
    pub(crate) fn subgradient_project_sharp(&self, x: &DVector<T>, y: &DVector<T>) -> Result<DVector<T>> {
        let act = T::default_epsilon() * lit(100.0) * (T::one() + x.norm());
        self.subgradient_project_with(x, y, act)
    }

    fn subgradient_project_with(&self, x: &DVector<T>, y: &DVector<T>, act: T) -> Result<DVector<T>> {
        self.check_len(x)?;
        self.check_len(y)?;
        match self.kind {
            CatalogKind::L1 => Ok(l1::subgradient_project(x, y, self.sigma, act)),
            CatalogKind::Nuclear | CatalogKind::Spectral => {
                let (p, q) = self.pq();
                svd::subgradient_project(x, y, p, q, self.norm().unwrap(), self.sigma, act)
            }
            _ => self.domain_normal_project(x, y),
        }
    }

    /// The critical set `K(x,u) = {d : dg(x)(d) = ⟨u,d⟩}` with `aff K = rge W̄`
    /// and `lin K = rge W_min` at `z = x + u`.
    pub fn critical_set(&self, x: &DVector<T>, u: &DVector<T>) -> Result<ConeDescription<T>> {
        if !self.subdifferential_contains(x, u, lit(SUBGRAD_TOL))? {
            return Err(Error::NotASubgradient);
        }
        let z = x + u;
        let rt = lit::<T>(RANGE_TOL);
        let floor = lit::<T>(1e-12);
        let affine_basis = range_basis(&self.prox_jacobian_basic(&z)?, rt, floor);
        let lineality_basis = range_basis(&self.prox_jacobian_min(&z)?, rt, floor);

        let g = self.clone();
        let (xm, um) = (x.clone(), u.clone());
        let membership: Membership<T> = Arc::new(move |d: &DVector<T>, tol: T| {
            match g.directional_deriv(&xm, d) {
                Ok(Some(v)) => (v - um.dot(d)).abs() <= tol * (T::one() + d.norm()),
                _ => false,
            }
        });

        let act = rel(RANGE_TOL, x);
        let tie = tie_of(&z);
        let (xs, us) = (x.clone(), u.clone());
        let sigma = self.sigma;
        let projector: Option<Projector<T>> = match self.kind {
            CatalogKind::Orthant => Some(Arc::new(move |d: &DVector<T>| orthant::critical_project(&xs, &us, act, d))),
            CatalogKind::L1 => Some(Arc::new(move |d: &DVector<T>| l1::critical_project(&xs, &us, sigma, act, d))),
            CatalogKind::Soc => Some(Arc::new(move |d: &DVector<T>| soc::critical_project(&z, tie, d))),
            CatalogKind::Psd => {
                let p = self.shape[0];
                Some(Arc::new(move |d: &DVector<T>| {
                    spectral::psd::critical_project(&z, p, d).unwrap_or_else(|_| d.clone())
                }))
            }
            CatalogKind::Nuclear | CatalogKind::Spectral => None,
        };
        Ok(ConeDescription { affine_basis, lineality_basis, membership, projector })
    }
}
