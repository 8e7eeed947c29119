//! The residual process `dX = A(μ - X)dt + σ dB`: parameters, its exact
//! Gaussian transition law, and seeded path sampling.

use nalgebra::DVectorView;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorbasis::MatrixRepr;
use crate::matkernels::{self, SpdSolver};
use crate::par::{self, Execution};
use crate::rng::{self, Domain};
use crate::{Mat, Vector};

/// Required margin on the real parts of the eigenvalues of `A`.
pub const MEAN_REVERSION_TOL: f64 = 1e-10;
/// Required smallest eigenvalue of `σσ'`.
pub const COVARIANCE_TOL: f64 = 1e-12;

/// JSON form of [`OuParams`]; matrices are row-major.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OuParamsDoc {
    #[serde(rename = "A")]
    pub a: MatrixRepr,
    pub mu: Vec<f64>,
    pub sigma: MatrixRepr,
}

#[derive(Debug, Clone)]
pub struct OuParams {
    a: Mat,
    mu: Vector,
    sigma: Mat,
    sigma_sq: Mat,
    solver: SpdSolver,
}

impl OuParams {
    pub fn new(a: Mat, mu: Vector, sigma: Mat) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::invalid("residual dimension must be positive"));
        }
        if a.shape() != (n, n) {
            return Err(Error::invalid(format!("A must be {n}x{n}")));
        }
        if sigma.nrows() != n || sigma.ncols() == 0 {
            return Err(Error::invalid(format!("sigma must have {n} rows")));
        }
        if !a.iter().chain(mu.iter()).chain(sigma.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("OU parameters have non-finite entries"));
        }
        let eigs = matkernels::general_eigenvalues(&a)?;
        let min_re = eigs.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
        if min_re <= MEAN_REVERSION_TOL {
            return Err(Error::invalid(format!(
                "A must have eigenvalues with positive real parts (min real part {min_re:e})"
            )));
        }
        let sigma_sq = matkernels::symmetrize(&(&sigma * sigma.transpose()));
        let min_eig = sigma_sq.symmetric_eigenvalues().min();
        if !(min_eig > COVARIANCE_TOL) {
            return Err(Error::degenerate(format!(
                "sigma*sigma' is singular (min eigenvalue {min_eig:e})"
            )));
        }
        let solver = SpdSolver::new(&sigma_sq, "sigma*sigma'")?;
        Ok(Self {
            a,
            mu,
            sigma,
            sigma_sq,
            solver,
        })
    }

    pub fn from_doc(doc: &OuParamsDoc) -> Result<Self> {
        let n = doc.mu.len();
        let a = doc.a.to_mat(n, n, "A")?;
        let m = match &doc.sigma {
            MatrixRepr::Rows(rows) => rows.first().map(|r| r.len()).unwrap_or(0),
            MatrixRepr::Flat(v) => {
                if n == 0 || v.len() % n != 0 {
                    return Err(Error::invalid("sigma: entry count is not a multiple of N"));
                }
                v.len() / n
            }
        };
        let sigma = doc.sigma.to_mat(n, m, "sigma")?;
        Self::new(a, Vector::from_vec(doc.mu.clone()), sigma)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: OuParamsDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc)
    }

    pub fn to_doc(&self) -> OuParamsDoc {
        OuParamsDoc {
            a: MatrixRepr::from_mat(&self.a),
            mu: self.mu.iter().copied().collect(),
            sigma: MatrixRepr::from_mat(&self.sigma),
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn mu(&self) -> &Vector {
        &self.mu
    }

    pub fn sigma(&self) -> &Mat {
        &self.sigma
    }

    /// `σσ'`.
    pub fn sigma_sq(&self) -> &Mat {
        &self.sigma_sq
    }

    /// Cached factorization of `σσ'`.
    pub fn cov_solver(&self) -> &SpdSolver {
        &self.solver
    }

    /// `X_{t+Δ} | X_t ~ N(e^{-AΔ}X_t + (I - e^{-AΔ})μ, Σ(Δ))`.
    pub fn transition(&self, delta: f64) -> Result<TransitionLaw> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!("transition step must be positive, got {delta}")));
        }
        let n = self.dim();
        let decay = matkernels::mat_exp(&(-&self.a * delta))?;
        let shift = (Mat::identity(n, n) - &decay) * &self.mu;
        let cov = matkernels::ou_cov_integral(&self.a, &self.sigma_sq, delta)?;
        let chol = matkernels::psd_factor(&cov, "transition covariance")?;
        Ok(TransitionLaw {
            delta,
            decay,
            shift,
            cov,
            chol,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TransitionLaw {
    delta: f64,
    decay: Mat,
    shift: Vector,
    cov: Mat,
    chol: Mat,
}

impl TransitionLaw {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `e^{-AΔ}`.
    pub fn decay(&self) -> &Mat {
        &self.decay
    }

    pub fn cov(&self) -> &Mat {
        &self.cov
    }

    /// A factor `L` with `L·L' = Σ(Δ)`.
    pub fn chol(&self) -> &Mat {
        &self.chol
    }

    pub fn mean(&self, x: &Vector) -> Vector {
        let mut out = self.shift.clone();
        out.gemv(1.0, &self.decay, x, 1.0);
        out
    }

    /// Draws `X_{t+Δ}` given `x`, writing into `out`; `z` is scratch space.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        x: &DVectorView<f64>,
        rng: &mut R,
        z: &mut Vector,
        out: &mut Vector,
    ) {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        out.copy_from(&self.shift);
        out.gemv(1.0, &self.decay, x, 1.0);
        out.gemv(1.0, &self.chol, z, 1.0);
    }
}

/// `n_paths` trajectories of the residual on a common grid, stored path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePaths {
    times: Vec<f64>,
    dim: usize,
    n_paths: usize,
    data: Vec<f64>,
}

impl StatePaths {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    /// `X` of `path` at grid index `l`.
    pub fn state(&self, path: usize, l: usize) -> &[f64] {
        let start = (path * self.times.len() + l) * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn path(&self, path: usize) -> &[f64] {
        let len = self.times.len() * self.dim;
        &self.data[path * len..(path + 1) * len]
    }

    pub(crate) fn from_parts(times: Vec<f64>, dim: usize, paths: Vec<Vec<f64>>) -> Self {
        let n_paths = paths.len();
        let data = paths.into_iter().flatten().collect();
        Self {
            times,
            dim,
            n_paths,
            data,
        }
    }
}

/// Per-step transition laws for a fixed grid, shared across paths.
#[derive(Debug, Clone)]
pub struct PathSampler {
    times: Vec<f64>,
    laws: Vec<TransitionLaw>,
    law_of_step: Vec<usize>,
}

impl PathSampler {
    pub fn new(params: &OuParams, grid: &[f64]) -> Result<Self> {
        check_grid(grid)?;
        let mut laws: Vec<TransitionLaw> = Vec::new();
        let mut law_of_step = Vec::with_capacity(grid.len().saturating_sub(1));
        for w in grid.windows(2) {
            let delta = w[1] - w[0];
            let idx = match laws.iter().position(|l| l.delta == delta) {
                Some(i) => i,
                None => {
                    laws.push(params.transition(delta)?);
                    laws.len() - 1
                }
            };
            law_of_step.push(idx);
        }
        Ok(Self {
            times: grid.to_vec(),
            laws,
            law_of_step,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn law(&self, step: usize) -> &TransitionLaw {
        &self.laws[self.law_of_step[step]]
    }

    /// One trajectory, flattened as `[time][dim]`.
    pub fn sample_path<R: Rng + ?Sized>(&self, x0: &Vector, rng: &mut R) -> Vec<f64> {
        let n = x0.len();
        let mut data = Vec::with_capacity(self.times.len() * n);
        data.extend_from_slice(x0.as_slice());
        let mut z = Vector::zeros(n);
        let mut next = Vector::zeros(n);
        for step in 0..self.law_of_step.len() {
            let start = step * n;
            let prev = DVectorView::from_slice(&data[start..start + n], n);
            self.law(step).sample_into(&prev, rng, &mut z, &mut next);
            data.extend_from_slice(next.as_slice());
        }
        data
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    if !grid.iter().all(|t| t.is_finite()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// Exact sampling of `n_paths` trajectories. Path `i` uses the substream
/// `rng::stream(seed, Domain::Paths, i)`.
pub fn sample_paths(
    params: &OuParams,
    x0: &Vector,
    grid: &[f64],
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<StatePaths> {
    if n_paths == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    if x0.len() != params.dim() {
        return Err(Error::invalid("initial state has the wrong dimension"));
    }
    let sampler = PathSampler::new(params, grid)?;
    let paths = par::map_indexed(n_paths, exec, |i| {
        let mut rng = rng::stream(seed, Domain::Paths, i as u64);
        sampler.sample_path(x0, &mut rng)
    });
    Ok(StatePaths::from_parts(grid.to_vec(), params.dim(), paths))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, mu: f64, sigma: f64) -> OuParams {
        OuParams::new(
            Mat::from_element(1, 1, a),
            Vector::from_element(1, mu),
            Mat::from_element(1, 1, sigma),
        )
        .unwrap()
    }

    fn three_dim() -> OuParams {
        let a = Mat::from_row_slice(3, 3, &[0.6, 0.1, 0.0, -0.05, 0.4, 0.1, 0.0, 0.2, 0.5]);
        let sigma = Mat::from_row_slice(3, 3, &[0.3, 0.05, -0.1, 0.0, 0.25, 0.1, 0.1, 0.0, 0.2]);
        OuParams::new(a, Vector::from_vec(vec![0.1, -0.2, 0.0]), sigma).unwrap()
    }

    #[test]
    fn scalar_transition_values() {
        let p = scalar(0.5, 0.0, 0.3);
        let law = p.transition(0.5).unwrap();
        let m = law.mean(&Vector::from_element(1, 1.0))[0];
        assert!((m - (-0.25f64).exp()).abs() < 1e-15);
        assert!((m - 0.778801).abs() < 1e-6);
        let closed = 0.09 * (1.0 - (-0.5f64).exp());
        assert!((law.cov()[(0, 0)] - closed).abs() < 1e-12);
        assert!((law.cov()[(0, 0)] - 0.0354122).abs() < 1e-7);
        assert!(p.transition(0.0).is_err());
        assert!(p.transition(-1.0).is_err());
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let p = three_dim();
        let law = p.transition(0.7).unwrap();
        assert!((law.mean(p.mu()) - p.mu()).amax() < 1e-15);
        assert!((law.chol() * law.chol().transpose() - law.cov()).amax() < 1e-9);
    }

    #[test]
    fn transitions_compose() {
        let p = three_dim();
        let (l1, l2, l12) = (
            p.transition(0.3).unwrap(),
            p.transition(0.45).unwrap(),
            p.transition(0.75).unwrap(),
        );
        let x = Vector::from_vec(vec![1.0, -0.5, 2.0]);
        assert!((l2.mean(&l1.mean(&x)) - l12.mean(&x)).amax() < 1e-13);
        let cov = l2.decay() * l1.cov() * l2.decay().transpose() + l2.cov();
        assert!((cov - l12.cov()).amax() < 1e-9);
    }

    #[test]
    fn validation_errors() {
        assert!(OuParams::new(
            Mat::from_element(1, 1, -0.1),
            Vector::zeros(1),
            Mat::from_element(1, 1, 1.0)
        )
        .is_err());
        let singular = OuParams::new(
            Mat::identity(2, 2),
            Vector::zeros(2),
            Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        );
        let msg = singular.unwrap_err().to_string();
        assert!(msg.contains("sigma*sigma'"), "{msg}");
    }

    #[test]
    fn json_forms() {
        let p = three_dim();
        let text = serde_json::to_string(&p.to_doc()).unwrap();
        let q = OuParams::from_json(&text).unwrap();
        assert_eq!(q.a(), p.a());
        assert_eq!(q.sigma(), p.sigma());
        let flat = r#"{"A":[0.5],"mu":[0.0],"sigma":[0.3]}"#;
        let s = OuParams::from_json(flat).unwrap();
        assert_eq!(s.sigma_sq()[(0, 0)], 0.09);
        // non-square Brownian dimension
        let wide = r#"{"A":[[0.5]],"mu":[0.0],"sigma":[[0.3, 0.4]]}"#;
        assert!((OuParams::from_json(wide).unwrap().sigma_sq()[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_node_grid_returns_initial_state() {
        let p = three_dim();
        let x0 = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let paths = sample_paths(&p, &x0, &[0.0], 3, 1, Execution::Sequential).unwrap();
        for i in 0..3 {
            assert_eq!(paths.state(i, 0), x0.as_slice());
        }
    }

    #[test]
    fn sampling_is_deterministic_across_execution_modes() {
        let p = three_dim();
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let x0 = Vector::zeros(3);
        let a = sample_paths(&p, &x0, &grid, 50, 42, Execution::Parallel).unwrap();
        let b = sample_paths(&p, &x0, &grid, 50, 42, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        let c = sample_paths(&p, &x0, &grid, 50, 43, Execution::Sequential).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bad_grids_rejected() {
        let p = three_dim();
        let x0 = Vector::zeros(3);
        assert!(sample_paths(&p, &x0, &[0.0, 1.0, 1.0], 1, 0, Execution::Sequential).is_err());
        assert!(sample_paths(&p, &x0, &[], 1, 0, Execution::Sequential).is_err());
        assert!(sample_paths(&p, &x0, &[0.0, 1.0], 0, 0, Execution::Sequential).is_err());
    }
}
