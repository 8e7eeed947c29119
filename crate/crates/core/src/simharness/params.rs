//! Random model parameters and capital-vector perturbations.

use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::oumodel::OuParams;
use crate::rng::{self, Domain};
use crate::{Mat, Vector};

pub const MAX_PARAM_ATTEMPTS: u64 = 10;

/// Draws `(A, μ, σ)` and `p`:
///
/// * `A` diagonal, entries `N(0.5, 0.1²)` redrawn until positive;
/// * `σ` with off-diagonal entries `U[-0.3, 0.3]` and diagonal `U[0, 0.5]`;
/// * `μ = 0`, `p = 𝟙`.
///
/// A draw with singular `σσ'` is discarded and the next substream tried.
pub fn generate_paper_params(n: usize, seed: u64) -> Result<(OuParams, Vector)> {
    if n == 0 {
        return Err(Error::invalid("need at least one asset"));
    }
    let normal = Normal::new(0.5, 0.1).expect("valid normal");
    let off = Uniform::new_inclusive(-0.3, 0.3).expect("valid range");
    let diag = Uniform::new_inclusive(0.0, 0.5).expect("valid range");
    let mut last_err = None;
    for attempt in 0..MAX_PARAM_ATTEMPTS {
        let mut rng = rng::stream(seed, Domain::Params, attempt);
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = loop {
                let v = normal.sample(&mut rng);
                if v > 0.0 {
                    break v;
                }
            };
        }
        let mut sigma = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                sigma[(i, j)] = if i == j { diag.sample(&mut rng) } else { off.sample(&mut rng) };
            }
        }
        match OuParams::new(a, Vector::zeros(n), sigma) {
            Ok(ou) => return Ok((ou, Vector::from_element(n, 1.0))),
            Err(e) => {
                log::warn!("parameter draw {attempt} rejected: {e}");
                last_err = Some(e);
            }
        }
    }
    Err(last_err
        .expect("at least one attempt")
        .context(format!("no valid parameters after {MAX_PARAM_ATTEMPTS} draws")))
}

/// `p = base + a·u` with `u` i.i.d. `U[-1, 1]`. The same `u` is used for
/// every `a` at a given seed, so runs at different scales are coupled.
pub fn perturb_p(base: &Vector, a: f64, seed: u64) -> Result<Vector> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::invalid(format!("perturbation scale must be >= 0, got {a}")));
    }
    let mut rng = rng::stream(seed, Domain::Perturbation, 0);
    let unit = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    Ok(Vector::from_fn(base.len(), |i, _| {
        let u: f64 = unit.sample(&mut rng);
        base[i] + a * u
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_params_are_deterministic_and_valid() {
        let (a, p) = generate_paper_params(100, 7).unwrap();
        let (b, _) = generate_paper_params(100, 7).unwrap();
        assert_eq!(a.a(), b.a());
        assert_eq!(a.sigma(), b.sigma());
        assert_eq!(p, Vector::from_element(100, 1.0));
        assert_eq!(a.mu(), &Vector::zeros(100));
        let diag: Vec<f64> = (0..100).map(|i| a.a()[(i, i)]).collect();
        assert!(diag.iter().all(|&v| v > 0.0));
        let off_diag_zero = (0..100).all(|i| (0..100).all(|j| i == j || a.a()[(i, j)] == 0.0));
        assert!(off_diag_zero);
        let mean = diag.iter().sum::<f64>() / 100.0;
        assert!((mean - 0.5).abs() < 0.03, "mean {mean}");
        assert!(a.sigma_sq().symmetric_eigenvalues().min() > 0.0);
        for i in 0..100 {
            for j in 0..100 {
                let s = a.sigma()[(i, j)];
                if i == j {
                    assert!((0.0..=0.5).contains(&s));
                } else {
                    assert!((-0.3..=0.3).contains(&s));
                }
            }
        }
        let (c, _) = generate_paper_params(100, 8).unwrap();
        assert_ne!(a.a(), c.a());
    }

    #[test]
    fn perturbation_support_and_coupling() {
        let ones = Vector::from_element(100, 1.0);
        assert_eq!(perturb_p(&ones, 0.0, 3).unwrap(), ones);
        let p1 = perturb_p(&ones, 1.0, 3).unwrap();
        let p8 = perturb_p(&ones, 8.0, 3).unwrap();
        assert!(p8.iter().all(|&v| (-7.0..=9.0).contains(&v)));
        assert!(((&p8 - &ones) - (&p1 - &ones) * 8.0).amax() < 1e-12);
        // mean of 1 + U[-8, 8] over 100 draws: sd 8/√3/10
        let mean = p8.mean();
        assert!((mean - 1.0).abs() < 3.0 * 8.0 / 3f64.sqrt() / 10.0);
        assert!(perturb_p(&ones, -1.0, 0).is_err());
    }
}
