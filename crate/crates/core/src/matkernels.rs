//! Dense matrix kernels shared by the strategy modules.
//!
//! Everything here is a pure function of its inputs. Matrices are
//! `nalgebra::DMatrix<f64>`; symmetric inputs are checked against a relative
//! tolerance and PSD inputs tolerate eigenvalues down to `-PSD_TOL`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::{Mat, Vector};

/// Eigenvalues above `-PSD_TOL` are treated as roundoff and clipped to zero.
pub const PSD_TOL: f64 = 1e-10;
/// Relative asymmetry accepted for "symmetric" inputs.
pub const SYM_TOL: f64 = 1e-10;
/// Iterates beyond this magnitude are reported as a blow-up.
const BLOW_UP: f64 = 1e100;

// Padé coefficients and 1-norm thresholds for scaling and squaring.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
];
const THETA13: f64 = 5.371920351148152;

fn check_square(m: &Mat, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::invalid(format!(
            "{what} must be a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has non-finite entries")))
    }
}

fn norm1(m: &Mat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Padé core.
pub fn mat_exp(m: &Mat) -> Result<Mat> {
    check_square(m, "matrix")?;
    check_finite(m, "matrix")?;
    let n = m.nrows();
    let ident = Mat::identity(n, n);
    let nrm = norm1(m);

    for &(order, theta) in THETA.iter() {
        if nrm <= theta {
            let coeffs: &[f64] = match order {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(m, coeffs, &ident);
        }
    }

    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(s);
    let mut r = pade13(&scaled, &ident)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_low(m: &Mat, b: &[f64], ident: &Mat) -> Result<Mat> {
    let m2 = m * m;
    let mut powers = vec![ident.clone()];
    let top = b.len() - 1;
    while 2 * powers.len() <= top {
        let next = powers.last().unwrap() * &m2;
        powers.push(next);
    }
    let mut u_inner = Mat::zeros(m.nrows(), m.ncols());
    let mut v = Mat::zeros(m.nrows(), m.ncols());
    for (k, p) in powers.iter().enumerate() {
        v += p * b[2 * k];
        if 2 * k + 1 <= top {
            u_inner += p * b[2 * k + 1];
        }
    }
    let u = m * u_inner;
    pade_solve(&u, &v)
}

fn pade13(a: &Mat, ident: &Mat) -> Result<Mat> {
    let b = &PADE13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + ident * b[1];
    let u = a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + ident * b[0];
    pade_solve(&u, &v)
}

fn pade_solve(u: &Mat, v: &Mat) -> Result<Mat> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::degenerate("singular Padé denominator in matrix exponential"))
}

/// Largest absolute entry of `m - m'` relative to `max(1, max|m|)`.
pub fn asymmetry(m: &Mat) -> f64 {
    let scale = m.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub(crate) fn check_symmetric(m: &Mat, what: &str) -> Result<()> {
    check_square(m, what)?;
    check_finite(m, what)?;
    let asym = asymmetry(m);
    if asym > SYM_TOL {
        return Err(Error::invalid(format!(
            "{what} is not symmetric (relative asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// Eigendecomposition of the symmetric part of `m`.
pub fn sym_eigen(m: &Mat, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    check_symmetric(m, what)?;
    Ok(SymmetricEigen::new(symmetrize(m)))
}

fn rebuild(eig: &SymmetricEigen<f64, nalgebra::Dyn>, values: &DVector<f64>) -> Mat {
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= values[j];
    }
    symmetrize(&(scaled * q.transpose()))
}

/// Applies `f` to the eigenvalues of a symmetric matrix.
pub fn sym_apply(m: &Mat, what: &str, f: impl Fn(f64) -> f64) -> Result<Mat> {
    let eig = sym_eigen(m, what)?;
    let vals = eig.eigenvalues.map(f);
    Ok(rebuild(&eig, &vals))
}

/// Eigenvalues of a symmetric PSD matrix, clipped at zero.
fn psd_eigen(m: &Mat, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let mut eig = sym_eigen(m, what)?;
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL {
        return Err(Error::NotPsd {
            what: what.to_string(),
            min_eigenvalue: min,
        });
    }
    eig.eigenvalues.apply(|v| *v = v.max(0.0));
    Ok(eig)
}

/// Principal square root of a symmetric PSD matrix.
pub fn sym_sqrt(m: &Mat) -> Result<Mat> {
    let eig = psd_eigen(m, "matrix")?;
    let vals = eig.eigenvalues.map(f64::sqrt);
    Ok(rebuild(&eig, &vals))
}

/// Eigenvalue-wise hyperbolic tangent of a symmetric matrix.
pub fn sym_tanh(m: &Mat) -> Result<Mat> {
    sym_apply(m, "matrix", f64::tanh)
}

/// `Σ(Δ) = ∫₀^Δ e^{-A(Δ-s)} Q e^{-A'(Δ-s)} ds`, the OU covariance over a step.
///
/// Computed from the exponential of the block matrix `[[-A, Q], [0, A']]·Δ`:
/// the upper-right block times the transpose of the upper-left block.
pub fn ou_cov_integral(a: &Mat, sigma_sq: &Mat, delta: f64) -> Result<Mat> {
    check_square(a, "mean-reversion matrix")?;
    if sigma_sq.shape() != a.shape() {
        return Err(Error::invalid("covariance and mean-reversion shapes differ"));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("delta must be finite and >= 0, got {delta}")));
    }
    let n = a.nrows();
    if delta == 0.0 {
        return Ok(Mat::zeros(n, n));
    }
    let mut block = Mat::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-a * delta));
    block.view_mut((0, n), (n, n)).copy_from(&(sigma_sq * delta));
    block
        .view_mut((n, n), (n, n))
        .copy_from(&(a.transpose() * delta));
    let e = mat_exp(&block)?;
    let f11 = e.view((0, 0), (n, n));
    let f12 = e.view((0, n), (n, n));
    Ok(symmetrize(&(f12 * f11.transpose())))
}

/// Time-ordered exponential `:exp(∫_{t0}^{t1} G(s) ds):`.
///
/// Product of midpoint step exponentials with the earliest factor on the
/// left, so the result `Φ` satisfies `∂_{t0} Φ = -G(t0) Φ`. Second order in
/// `step`.
pub fn time_ordered_exp(
    generator: impl Fn(f64) -> Mat,
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<Mat> {
    if !(t0 <= t1) {
        return Err(Error::invalid(format!("time_ordered_exp needs t0 <= t1, got {t0} > {t1}")));
    }
    if !(step > 0.0) {
        return Err(Error::invalid("time_ordered_exp step must be positive"));
    }
    let g0 = generator(t0);
    check_square(&g0, "generator")?;
    let n = g0.nrows();
    if t1 == t0 {
        return Ok(Mat::identity(n, n));
    }
    let pieces = ((t1 - t0) / step).ceil().max(1.0) as usize;
    let h = (t1 - t0) / pieces as f64;
    let mut out = Mat::identity(n, n);
    for k in 0..pieces {
        let mid = t0 + (k as f64 + 0.5) * h;
        out = out * mat_exp(&(generator(mid) * h))?;
    }
    Ok(out)
}

/// Uniform-grid samples of a matrix-valued solution on `[0, T]`.
#[derive(Debug, Clone)]
pub struct MatrixPath {
    pub times: Vec<f64>,
    pub values: Vec<Mat>,
}

impl MatrixPath {
    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Linear interpolation in `t`; `t` must lie on the grid span.
    pub fn at(&self, t: f64) -> Result<Mat> {
        let (k, w) = locate(&self.times, t)?;
        if w == 0.0 {
            return Ok(self.values[k].clone());
        }
        Ok(&self.values[k] * (1.0 - w) + &self.values[k + 1] * w)
    }
}

/// Finds `k` and weight `w` with `t = (1-w) t_k + w t_{k+1}`.
pub(crate) fn locate(times: &[f64], t: f64) -> Result<(usize, f64)> {
    let first = times[0];
    let last = *times.last().unwrap();
    let slack = 1e-12 * (1.0 + last.abs());
    if !(t >= first - slack && t <= last + slack) {
        return Err(Error::invalid(format!(
            "time {t} outside the solution grid [{first}, {last}]"
        )));
    }
    let t = t.clamp(first, last);
    let idx = match times.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
        Ok(i) => return Ok((i.min(times.len() - 1), 0.0)),
        Err(i) => i,
    };
    let k = idx - 1;
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    Ok((k, w))
}

/// Classical RK4 integrated backward from `T` to 0 on a uniform grid of
/// `steps` intervals, symmetrizing each iterate.
///
/// `rhs(t, Y)` returns `dY/dt`.
pub fn riccati_backward(
    terminal: &Mat,
    rhs: impl Fn(f64, &Mat) -> Mat,
    horizon: f64,
    steps: usize,
) -> Result<MatrixPath> {
    check_square(terminal, "terminal value")?;
    if steps == 0 {
        return Err(Error::invalid("riccati_backward needs at least one step"));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("riccati_backward horizon must be positive"));
    }
    let h = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    let mut values = vec![Mat::zeros(0, 0); steps + 1];
    let mut y = symmetrize(terminal);
    values[steps] = y.clone();
    for k in (0..steps).rev() {
        let t = times[k + 1];
        let k1 = rhs(t, &y);
        let k2 = rhs(t - 0.5 * h, &(&y - &k1 * (0.5 * h)));
        let k3 = rhs(t - 0.5 * h, &(&y - &k2 * (0.5 * h)));
        let k4 = rhs(t - h, &(&y - &k3 * h));
        let next = &y - (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !next.iter().all(|v| v.is_finite() && v.abs() < BLOW_UP) {
            return Err(Error::Divergence { time: times[k] });
        }
        y = symmetrize(&next);
        values[k] = y.clone();
    }
    Ok(MatrixPath { times, values })
}

/// Cached Cholesky factorization of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl SpdSolver {
    pub fn new(m: &Mat, what: &str) -> Result<Self> {
        check_symmetric(m, what)?;
        let chol = symmetrize(m)
            .cholesky()
            .ok_or_else(|| Error::degenerate(format!("{what} is not positive definite")))?;
        Ok(Self { chol })
    }

    pub fn solve_vec(&self, b: &Vector) -> Vector {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &Mat) -> Mat {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> Mat {
        self.chol.inverse()
    }
}

/// Returns `L` with `L·L' = m`: Cholesky when possible, otherwise the
/// eigenvalue factor `Q·sqrt(max(Λ, 0))` for near-singular PSD input.
pub fn psd_factor(m: &Mat, what: &str) -> Result<Mat> {
    check_symmetric(m, what)?;
    let sym = symmetrize(m);
    if let Some(chol) = sym.clone().cholesky() {
        return Ok(chol.l());
    }
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    if !min.is_finite() || min < -PSD_TOL {
        return Err(Error::degenerate(format!(
            "cannot factor {what}: min eigenvalue {min:e}"
        )));
    }
    let mut l = eig.eigenvectors.clone();
    for (j, mut col) in l.column_iter_mut().enumerate() {
        let v = eig.eigenvalues[j];
        col *= if v > 1e-12 { v.sqrt() } else { 0.0 };
    }
    Ok(l)
}

/// Eigenvalues (real, imaginary) of a general square matrix.
pub fn general_eigenvalues(m: &Mat) -> Result<Vec<(f64, f64)>> {
    check_square(m, "matrix")?;
    check_finite(m, "matrix")?;
    let eig = m.clone().complex_eigenvalues();
    Ok(eig.iter().map(|c| (c.re, c.im)).collect())
}

pub(crate) fn from_rows(rows: &[Vec<f64>], what: &str) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::invalid(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(n: usize, scale: f64, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, n, |_, _| scale * (rng.random::<f64>() * 2.0 - 1.0))
    }

    fn random_psd(n: usize, seed: u64) -> Mat {
        let b = random_mat(n, 1.0, seed);
        &b * b.transpose()
    }

    // Scaled Taylor series: exp(M) = exp(M/2^s)^(2^s) with 30 terms.
    fn taylor_exp(m: &Mat) -> Mat {
        let n = m.nrows();
        let s = 6;
        let a = m / 2f64.powi(s);
        let mut term = Mat::identity(n, n);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &a / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    fn simpson_cov(a: &Mat, q: &Mat, delta: f64, nodes: usize) -> Mat {
        let n = a.nrows();
        let h = delta / nodes as f64;
        let mut acc = Mat::zeros(n, n);
        for k in 0..=nodes {
            let s = k as f64 * h;
            let e = taylor_exp(&(-a * (delta - s)));
            let w = if k == 0 || k == nodes {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += (&e * q * e.transpose()) * w;
        }
        acc * (h / 3.0)
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = mat_exp(&Mat::zeros(2, 2)).unwrap();
        assert_eq!(e, Mat::identity(2, 2));
    }

    #[test]
    fn exp_of_diagonal() {
        let e = mat_exp(&Mat::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]))).unwrap();
        assert_relative_eq!(e[(0, 0)], std::f64::consts::E, epsilon = 1e-14);
        assert_relative_eq!(e[(1, 1)], 1.0 / std::f64::consts::E, epsilon = 1e-14);
        assert_eq!(e[(0, 1)], 0.0);
        let id = mat_exp(&Mat::identity(3, 3)).unwrap();
        assert_relative_eq!(id, Mat::identity(3, 3) * std::f64::consts::E, epsilon = 1e-13);
    }

    #[test]
    fn exp_matches_taylor_oracle() {
        for (seed, scale) in [(1u64, 0.01), (2, 0.2), (3, 0.6), (4, 1.0), (5, 3.0)] {
            let m = random_mat(5, scale, seed);
            let got = mat_exp(&m).unwrap();
            let want = taylor_exp(&m);
            let err = (&got - &want).abs().max() / want.abs().max().max(1.0);
            assert!(err < 1e-10, "scale {scale}: err {err:e}");
        }
    }

    #[test]
    fn exp_rejects_non_finite() {
        let mut m = Mat::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(mat_exp(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sqrt_examples() {
        assert_relative_eq!(sym_sqrt(&Mat::identity(3, 3)).unwrap(), Mat::identity(3, 3), epsilon = 1e-14);
        let d = Mat::from_diagonal(&Vector::from_vec(vec![4.0, 9.0]));
        let s = sym_sqrt(&d).unwrap();
        assert_relative_eq!(s[(0, 0)], 2.0, epsilon = 1e-13);
        assert_relative_eq!(s[(1, 1)], 3.0, epsilon = 1e-13);
        let m = random_psd(6, 11);
        let s = sym_sqrt(&m).unwrap();
        assert!((&s * &s - &m).abs().max() < 1e-9);
        assert!(asymmetry(&s) < 1e-14);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let d = Mat::from_diagonal(&Vector::from_vec(vec![1.0, -1e-3]));
        assert!(matches!(sym_sqrt(&d), Err(Error::NotPsd { .. })));
        // tiny negative roundoff is clipped
        let d = Mat::from_diagonal(&Vector::from_vec(vec![1.0, -1e-12]));
        assert!(sym_sqrt(&d).is_ok());
    }

    #[test]
    fn tanh_examples() {
        assert_eq!(sym_tanh(&Mat::zeros(2, 2)).unwrap(), Mat::zeros(2, 2));
        let t = sym_tanh(&Mat::from_element(1, 1, -1.0)).unwrap();
        assert_relative_eq!(t[(0, 0)], -0.7615941559557649, epsilon = 1e-15);
        let b = random_mat(4, 2.0, 3);
        let m = symmetrize(&b);
        let got = sym_tanh(&m).unwrap();
        // oracle: per-eigenvalue tanh, reconstructed independently
        let eig = nalgebra::SymmetricEigen::new(m.clone());
        let mut want = Mat::zeros(4, 4);
        for i in 0..4 {
            let v = eig.eigenvectors.column(i);
            want += v * v.transpose() * eig.eigenvalues[i].tanh();
        }
        assert!((&got - &want).abs().max() < 1e-10);
        assert!(got.symmetric_eigenvalues().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn tanh_rejects_asymmetric() {
        let mut m = Mat::zeros(2, 2);
        m[(0, 1)] = 1.0;
        assert!(matches!(sym_tanh(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn cov_integral_examples() {
        let a = Mat::from_element(1, 1, 0.5);
        let q = Mat::from_element(1, 1, 0.09);
        assert_eq!(ou_cov_integral(&a, &q, 0.0).unwrap(), Mat::zeros(1, 1));
        let v = ou_cov_integral(&a, &q, 0.5).unwrap()[(0, 0)];
        let closed = 0.09 * (1.0 - (-0.5f64).exp()) / 1.0;
        assert!((v - closed).abs() < 1e-14);
        assert!((v - 0.0354122).abs() < 5e-8);
        assert!(ou_cov_integral(&a, &q, -1.0).is_err());
    }

    #[test]
    fn cov_integral_matches_quadrature() {
        let a = random_mat(5, 0.3, 21) + Mat::identity(5, 5) * 0.8;
        let q = random_psd(5, 22);
        let got = ou_cov_integral(&a, &q, 0.7).unwrap();
        let want = simpson_cov(&a, &q, 0.7, 10_000);
        assert!((&got - &want).abs().max() < 1e-8);
    }

    #[test]
    fn cov_semigroup() {
        let a = random_mat(4, 0.2, 31) + Mat::identity(4, 4) * 0.6;
        let q = random_psd(4, 32);
        let (d1, d2) = (0.3, 0.45);
        let lhs = ou_cov_integral(&a, &q, d1 + d2).unwrap();
        let e = mat_exp(&(-&a * d2)).unwrap();
        let rhs = &e * ou_cov_integral(&a, &q, d1).unwrap() * e.transpose()
            + ou_cov_integral(&a, &q, d2).unwrap();
        assert!((&lhs - &rhs).abs().max() < 1e-9);
    }

    #[test]
    fn ordered_exp_constant_and_scalar() {
        let m = random_mat(3, 0.5, 41);
        let got = time_ordered_exp(|_| m.clone(), 0.0, 1.0, 0.1).unwrap();
        assert!((&got - mat_exp(&m).unwrap()).abs().max() < 1e-12);
        let g = |s: f64| Mat::from_element(1, 1, s.sin());
        let got = time_ordered_exp(g, 0.0, 2.0, 1e-3).unwrap()[(0, 0)];
        let want = (1.0 - 2f64.cos()).exp();
        assert!((got - want).abs() < 1e-6);
        assert!(time_ordered_exp(|_| m.clone(), 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn ordered_exp_commuting_family() {
        let base = symmetrize(&random_mat(3, 1.0, 42));
        let g = |s: f64| &base * (1.0 + 0.5 * s);
        let got = time_ordered_exp(g, 0.0, 1.0, 1e-3).unwrap();
        let want = mat_exp(&(&base * 1.25)).unwrap();
        assert!((&got - &want).abs().max() < 1e-8, "{:e}", (&got - &want).abs().max());
    }

    #[test]
    fn ordered_exp_ordering_solves_backward_ode() {
        // Φ(t, s) with earliest factor first satisfies ∂_t Φ = -G(t) Φ.
        let g0 = random_mat(2, 1.0, 51);
        let g1 = random_mat(2, 1.0, 52);
        let g = |s: f64| &g0 + &g1 * s;
        let h = 1e-5;
        let phi = |t: f64| time_ordered_exp(g, t, 1.0, 1e-4).unwrap();
        let deriv = (phi(0.3 + h) - phi(0.3 - h)) / (2.0 * h);
        let want = -g(0.3) * phi(0.3);
        assert!((&deriv - &want).abs().max() < 1e-5);
    }

    #[test]
    fn riccati_zero_dynamics() {
        let path = riccati_backward(&Mat::zeros(2, 2), |_, y| y * 0.0, 1.0, 5).unwrap();
        assert!(path.values.iter().all(|v| v.iter().all(|x| *x == 0.0)));
    }

    fn scalar_tanh_problem(steps: usize) -> f64 {
        let gamma = 2.0;
        let path = riccati_backward(
            &Mat::zeros(1, 1),
            |_, a| Mat::from_element(1, 1, gamma) - a * a,
            5.0,
            steps,
        )
        .unwrap();
        path.times
            .iter()
            .zip(&path.values)
            .map(|(t, a)| {
                let exact = gamma.sqrt() * (gamma.sqrt() * (t - 5.0)).tanh();
                (a[(0, 0)] - exact).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn riccati_matches_tanh_and_is_fourth_order() {
        let e1 = scalar_tanh_problem(200);
        let e2 = scalar_tanh_problem(400);
        assert!(e1 < 1e-6, "{e1:e}");
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn riccati_reports_blow_up_time() {
        // dy/dt = y^2 backward from y(T)=1 blows up at t = T - 1.
        let err = riccati_backward(&Mat::from_element(1, 1, 1.0), |_, y| -(y * y), 3.0, 3000)
            .unwrap_err();
        match err {
            Error::Divergence { time } => assert!(time > 1.0 && time < 2.1, "{time}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn psd_factor_handles_singular() {
        let v = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let m = &v * v.transpose();
        let l = psd_factor(&m, "rank one").unwrap();
        assert!((&l * l.transpose() - &m).abs().max() < 1e-9);
        let bad = Mat::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        assert!(psd_factor(&bad, "bad").is_err());
    }

    #[test]
    fn locate_interpolates() {
        let times = vec![0.0, 0.5, 1.0];
        assert_eq!(locate(&times, 0.5).unwrap(), (1, 0.0));
        let (k, w) = locate(&times, 0.75).unwrap();
        assert_eq!(k, 1);
        assert!((w - 0.5).abs() < 1e-15);
        assert!(locate(&times, 1.5).is_err());
    }

    proptest::proptest! {
        #[test]
        fn sqrt_squares_back(seed in 0u64..500, n in 1usize..7) {
            let m = random_psd(n, seed);
            let s = sym_sqrt(&m).unwrap();
            proptest::prop_assert!((&s * &s - &m).abs().max() < 1e-9 * m.abs().max().max(1.0));
        }

        #[test]
        fn tanh_commutes_with_input(seed in 0u64..500, n in 1usize..6) {
            let m = symmetrize(&random_mat(n, 2.0, seed));
            let t = sym_tanh(&m).unwrap();
            proptest::prop_assert!((&t * &m - &m * &t).abs().max() < 1e-9);
        }
    }
}
