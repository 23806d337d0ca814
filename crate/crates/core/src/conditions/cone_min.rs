use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::random_gaussian_vector;
use crate::{lit, Real, Result};

const RANDOM_STARTS: usize = 64;
const MAX_STEPS: usize = 200;

/// Projected descent for `min ‖A v‖` over unit `v` in a closed convex cone
/// given by its projector. `None` when every start projects to zero, i.e.
/// the cone is `{0}`.
pub(super) fn min_on_cone_sphere<T: Real>(
    a: &DMatrix<T>,
    proj: &dyn Fn(&DVector<T>) -> Result<DVector<T>>,
    seed: u64,
) -> Result<Option<(T, DVector<T>)>> {
    let m = a.ncols();
    let gram = a.transpose() * a;
    let lip = gram.norm().max(lit(1e-12));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = Vec::with_capacity(2 * m + RANDOM_STARTS);
    for i in 0..m {
        let mut e = DVector::zeros(m);
        e[i] = T::one();
        starts.push(-&e);
        starts.push(e);
    }
    for _ in 0..RANDOM_STARTS {
        starts.push(random_gaussian_vector::<T, _>(m, &mut rng));
    }

    let obj = |v: &DVector<T>| (a * v).norm();
    let unit = |v: DVector<T>| -> Option<DVector<T>> {
        let n = v.norm();
        (n > lit(1e-9)).then(|| v / n)
    };
    let mut best: Option<(T, DVector<T>)> = None;
    for s in starts {
        let Some(mut v) = unit(proj(&s)?) else { continue };
        let mut f = obj(&v);
        for _ in 0..MAX_STEPS {
            let grad = &gram * &v;
            let mut moved = false;
            for step in [4.0, 1.0, 0.25, 0.0625, 0.015625] {
                let trial = &v - &grad * (lit::<T>(step) / lip);
                if let Some(w) = unit(proj(&trial)?) {
                    let fw = obj(&w);
                    if fw < f - lit::<T>(1e-15) * (T::one() + f) {
                        v = w;
                        f = fw;
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| f < *b) {
            best = Some((f, v));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthant_against_a_rank_one_map() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let proj = |v: &DVector<f64>| Ok(v.map(|c| c.max(0.0)));
        let (val, _) = min_on_cone_sphere(&a, &proj, 0).unwrap().unwrap();
        assert!((val - 1.0).abs() < 1e-9);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let (val, _) = min_on_cone_sphere(&a, &proj, 0).unwrap().unwrap();
        assert!(val < 1e-9);
    }

    #[test]
    fn trivial_cone_is_reported() {
        let a = DMatrix::<f64>::identity(2, 2);
        let proj = |v: &DVector<f64>| Ok(DVector::zeros(v.len()));
        assert!(min_on_cone_sphere(&a, &proj, 0).unwrap().is_none());
    }

    #[test]
    fn whole_space_gives_smallest_singular_value() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 1.0, 0.5]);
        let proj = |v: &DVector<f64>| Ok(v.clone());
        let (val, _) = min_on_cone_sphere(&a, &proj, 3).unwrap().unwrap();
        let smin = a.singular_values().min();
        assert!((val - smin).abs() < 1e-6, "{val} vs {smin}");
    }
}
