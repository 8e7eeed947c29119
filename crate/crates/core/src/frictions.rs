//! Quadratic transaction costs `½ I'CI dt` on the trading intensity `I = dπ/dt`.
//!
//! The optimal intensity is `I = C⁻¹(a(t)π + b(t, x)) = Rate(t)π + Aim(t, x)`
//! where `a` solves `ȧ = γ(t)σσ' - aC⁻¹a`, `a(T) = 0`, and
//!
//! `b(t, x) = ∫_t^T Φ(t,s) e^{r(T-s)} (A e^{-A(s-t)}(μ - x) - rp) ds`
//!
//! with `Φ(t,s)` the time-ordered exponential of `aC⁻¹` over `[t, s]`. We keep
//! `b` in the affine form `b = β₀(t) + β₁(t)(μ - x)`.
//!
//! For constant `γ` everything is diagonal in the basis `P = C^{1/2}Q`, where
//! `Q` diagonalizes `D² = γC^{-1/2}σσ'C^{-1/2}`: `Φ(t,s) = P G(t,s) P⁻¹` with
//! `G` the diagonal of `cosh(λ(s-T))/cosh(λ(t-T))`. Otherwise `P = I` and `G`
//! comes from [`matkernels::time_ordered_exp`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorbasis::MatrixRepr;
use crate::frictionless::{check_capital, check_horizon};
use crate::matkernels::{self, MatrixPath, SpdSolver};
use crate::oumodel::OuParams;
use crate::policy::TimeFn;
use crate::{Mat, Vector};

/// Smallest acceptable eigenvalue of the cost matrix.
pub const COST_PD_TOL: f64 = 1e-12;

/// Cost matrix in a config file: `{"lambda": x}` for `C = λσσ'`, or the
/// matrix itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostSpec {
    Lambda {
        lambda: f64,
    },
    Matrix(MatrixRepr),
}

impl CostSpec {
    pub fn lambda(lambda: f64) -> Self {
        CostSpec::Lambda { lambda }
    }

    /// `λ` for the proportional form.
    pub fn as_lambda(&self) -> Option<f64> {
        match self {
            CostSpec::Lambda { lambda } => Some(*lambda),
            CostSpec::Matrix(_) => None,
        }
    }

    pub fn resolve(&self, ou: &OuParams) -> Result<Mat> {
        let n = ou.dim();
        let c = match self {
            CostSpec::Lambda { lambda } => {
                if !(*lambda > 0.0) || !lambda.is_finite() {
                    return Err(Error::invalid(format!("cost scale lambda must be positive, got {lambda}")));
                }
                ou.sigma_sq() * *lambda
            }
            CostSpec::Matrix(m) => m.to_mat(n, n, "cost matrix")?,
        };
        Ok(c)
    }
}

#[derive(Debug, Clone)]
pub struct CostParams {
    ou: Arc<OuParams>,
    cost: Mat,
    cost_solver: SpdSolver,
    gamma: TimeFn,
    r: f64,
    horizon: f64,
    p: Vector,
}

impl CostParams {
    pub fn new(
        ou: Arc<OuParams>,
        cost: Mat,
        gamma: impl Into<TimeFn>,
        r: f64,
        horizon: f64,
        p: Vector,
    ) -> Result<Self> {
        let gamma = gamma.into();
        let n = ou.dim();
        if cost.shape() != (n, n) {
            return Err(Error::invalid(format!("cost matrix must be {n}x{n}")));
        }
        let min = matkernels::sym_eigen(&cost, "cost matrix")?.eigenvalues.min();
        if !(min > COST_PD_TOL) {
            return Err(Error::invalid(format!(
                "cost matrix must be positive definite (min eigenvalue {min:e})"
            )));
        }
        if let Some(g) = gamma.as_constant() {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::invalid(format!("volatility aversion must be >= 0, got {g}")));
            }
        }
        if !r.is_finite() {
            return Err(Error::invalid("interest rate must be finite"));
        }
        check_horizon(horizon)?;
        check_capital(&p, &ou)?;
        let cost = matkernels::symmetrize(&cost);
        let cost_solver = SpdSolver::new(&cost, "cost matrix")?;
        Ok(Self {
            ou,
            cost,
            cost_solver,
            gamma,
            r,
            horizon,
            p,
        })
    }

    pub fn from_spec(
        ou: Arc<OuParams>,
        spec: &CostSpec,
        gamma: impl Into<TimeFn>,
        r: f64,
        horizon: f64,
        p: Vector,
    ) -> Result<Self> {
        let cost = spec.resolve(&ou)?;
        Self::new(ou, cost, gamma, r, horizon, p)
    }

    pub fn ou(&self) -> &OuParams {
        &self.ou
    }

    pub fn cost(&self) -> &Mat {
        &self.cost
    }

    pub fn gamma_fn(&self) -> &TimeFn {
        &self.gamma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn rate(&self) -> f64 {
        self.r
    }

    pub fn capital(&self) -> &Vector {
        &self.p
    }

    fn gamma_at(&self, t: f64) -> Result<f64> {
        let g = self.gamma.eval(t);
        if !(g >= 0.0) || !g.is_finite() {
            return Err(Error::invalid(format!("volatility aversion γ({t}) = {g} must be >= 0")));
        }
        Ok(g)
    }

    /// `ȧ = γ(t)σσ' - aC⁻¹a`.
    fn a_rhs(&self, t: f64, a: &Mat) -> Mat {
        let g = self.gamma.eval(t);
        self.ou.sigma_sq() * g - a * self.cost_solver.solve_mat(a)
    }

    /// Half-cost debit `½ Δπ'CΔπ / Δt` of moving by `delta_pi` over `dt`.
    pub fn debit(&self, delta_pi: &Vector, dt: f64) -> f64 {
        0.5 * delta_pi.dot(&(&self.cost * delta_pi)) / dt
    }
}

/// Constant-`γ` spectral data: `P = C^{1/2}Q`, its inverse, and the rates `λ`.
#[derive(Debug, Clone)]
struct Spectral {
    p: Mat,
    p_inv: Mat,
    lambda: Vector,
}

impl Spectral {
    fn new(params: &CostParams, gamma: f64) -> Result<Self> {
        let eig = matkernels::sym_eigen(params.cost(), "cost matrix")?;
        let root = eig.eigenvalues.map(f64::sqrt);
        let scale = |pow: &dyn Fn(f64) -> f64| {
            let mut q = eig.eigenvectors.clone();
            for (j, mut col) in q.column_iter_mut().enumerate() {
                col *= pow(root[j]);
            }
            matkernels::symmetrize(&(q * eig.eigenvectors.transpose()))
        };
        let c_half = scale(&|v| v);
        let c_neg_half = scale(&|v| 1.0 / v);
        let d_sq = matkernels::symmetrize(&(&c_neg_half * params.ou().sigma_sq() * &c_neg_half * gamma));
        let de = matkernels::sym_eigen(&d_sq, "scaled covariance")?;
        let lambda = de.eigenvalues.map(|v| v.max(0.0).sqrt());
        let q = de.eigenvectors;
        Ok(Self {
            p: &c_half * &q,
            p_inv: q.transpose() * &c_neg_half,
            lambda,
        })
    }

    /// `a(t) = P diag(λ tanh(λ(t-T))) P'`.
    fn a_at(&self, t: f64, horizon: f64) -> Mat {
        let mut scaled = self.p.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            let l = self.lambda[j];
            col *= l * (l * (t - horizon)).tanh();
        }
        matkernels::symmetrize(&(scaled * self.p.transpose()))
    }

    /// Diagonal of `G(t, s) = cosh(λ(s-T)) / cosh(λ(t-T))` for `t <= s <= T`.
    fn kernel(&self, t: f64, s: f64, horizon: f64) -> Vector {
        self.lambda.map(|l| cosh_ratio(l * (s - horizon), l * (t - horizon)))
    }
}

/// `cosh(x)/cosh(y)` without overflow for large arguments.
pub fn cosh_ratio(x: f64, y: f64) -> f64 {
    let (ax, ay) = (x.abs(), y.abs());
    (ax - ay).exp() * (1.0 + (-2.0 * ax).exp()) / (1.0 + (-2.0 * ay).exp())
}

/// Propagator over a short interval, either diagonal or dense.
#[derive(Debug, Clone)]
enum Prop {
    Diag(Vector),
    Full(Mat),
}

impl Prop {
    fn identity(n: usize, diag: bool) -> Self {
        if diag {
            Prop::Diag(Vector::from_element(n, 1.0))
        } else {
            Prop::Full(Mat::identity(n, n))
        }
    }

    fn mul_mat(&self, m: &Mat) -> Mat {
        match self {
            Prop::Diag(d) => {
                let mut out = m.clone();
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    row *= d[i];
                }
                out
            }
            Prop::Full(g) => g * m,
        }
    }

    fn mul_vec(&self, v: &Vector) -> Vector {
        match self {
            Prop::Diag(d) => d.component_mul(v),
            Prop::Full(g) => g * v,
        }
    }

    fn tr_mul_mat(&self, m: &Mat) -> Mat {
        match self {
            Prop::Diag(_) => self.mul_mat(m),
            Prop::Full(g) => g.tr_mul(m),
        }
    }

    fn tr_mul_vec(&self, v: &Vector) -> Vector {
        match self {
            Prop::Diag(_) => self.mul_vec(v),
            Prop::Full(g) => g.tr_mul(v),
        }
    }

    fn then(&self, other: &Prop) -> Prop {
        match (self, other) {
            (Prop::Diag(a), Prop::Diag(b)) => Prop::Diag(a.component_mul(b)),
            (Prop::Full(a), Prop::Full(b)) => Prop::Full(a * b),
            (Prop::Diag(_), Prop::Full(b)) => Prop::Full(self.mul_mat(b)),
            (Prop::Full(a), Prop::Diag(_)) => Prop::Full(other.tr_mul_mat(&a.transpose()).transpose()),
        }
    }

    fn to_mat(&self) -> Mat {
        match self {
            Prop::Diag(d) => Mat::from_diagonal(d),
            Prop::Full(g) => g.clone(),
        }
    }
}

/// Cubic Hermite interpolation of `a(t)` from a uniform RK4 solution, using
/// the Riccati right-hand side for the node derivatives.
struct AInterp {
    h: f64,
    values: Vec<Mat>,
    slopes: Vec<Mat>,
}

impl AInterp {
    fn new(params: &CostParams, path: MatrixPath) -> Self {
        let h = path.step();
        let slopes = path
            .times
            .iter()
            .zip(&path.values)
            .map(|(&t, a)| params.a_rhs(t, a))
            .collect();
        Self {
            h,
            values: path.values,
            slopes,
        }
    }

    fn eval(&self, t: f64) -> Mat {
        let last = self.values.len() - 2;
        let j = ((t / self.h).floor().max(0.0) as usize).min(last);
        let s = (t - j as f64 * self.h) / self.h;
        let (s2, s3) = (s * s, s * s * s);
        &self.values[j] * (2.0 * s3 - 3.0 * s2 + 1.0)
            + &self.slopes[j] * ((s3 - 2.0 * s2 + s) * self.h)
            + &self.values[j + 1] * (-2.0 * s3 + 3.0 * s2)
            + &self.slopes[j + 1] * ((s3 - s2) * self.h)
    }
}

/// Which representation of `Φ` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Spectral for constant `γ`, numeric otherwise.
    #[default]
    Auto,
    Spectral,
    Numeric,
}

/// How positions move between grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionScheme {
    /// Integrates `dπ = (Rate π + Aim) dt` exactly over each step, with `X`
    /// replaced by its conditional mean given the state at the step start.
    #[default]
    Exact,
    /// `π_{l+1} = π_l + I(t_l, X_l, π_l) Δt`.
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    /// Intervals of the uniform output grid on `[0, T]`.
    pub steps: usize,
    /// Fine quadrature intervals per output interval (even).
    pub refine: usize,
    pub route: Route,
}

impl SolveOptions {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            refine: 10,
            route: Route::Auto,
        }
    }

    pub fn refine(mut self, refine: usize) -> Self {
        self.refine = refine;
        self
    }

    pub fn route(mut self, route: Route) -> Self {
        self.route = route;
        self
    }
}

/// `a(t)` on a uniform grid of `steps` intervals: the tanh closed form for
/// constant `γ`, RK4 otherwise.
pub fn solve_a(params: &CostParams, steps: usize) -> Result<MatrixPath> {
    if steps == 0 {
        return Err(Error::invalid("need at least one step"));
    }
    match params.gamma.as_constant() {
        Some(g) => {
            let spec = Spectral::new(params, g)?;
            let h = params.horizon / steps as f64;
            let times: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
            let mut values: Vec<Mat> = times.iter().map(|&t| spec.a_at(t, params.horizon)).collect();
            values[steps] = Mat::zeros(params.ou.dim(), params.ou.dim());
            Ok(MatrixPath { times, values })
        }
        None => solve_a_numeric(params, steps),
    }
}

/// `a(t)` by backward RK4 regardless of `γ`.
pub fn solve_a_numeric(params: &CostParams, steps: usize) -> Result<MatrixPath> {
    let h = params.horizon / steps.max(1) as f64;
    for k in 0..=2 * steps {
        params.gamma_at(k as f64 * 0.5 * h)?;
    }
    let n = params.ou.dim();
    matkernels::riccati_backward(&Mat::zeros(n, n), |t, a| params.a_rhs(t, a), params.horizon, steps)
        .map_err(|e| e.context("transaction-cost Riccati equation"))
}

/// Everything the cost strategy needs on a uniform grid.
#[derive(Debug, Clone)]
pub struct FrictionSolution {
    times: Vec<f64>,
    mu: Vector,
    cost: Mat,
    a: Vec<Mat>,
    rate: Vec<Mat>,
    beta0: Vec<Vector>,
    beta1: Vec<Mat>,
    /// `C⁻¹β₀`, `C⁻¹β₁`
    aim0: Vec<Vector>,
    aim1: Vec<Mat>,
    /// Exact position map over step `l`: `π ↦ U π + v + Y(μ - x_l)`.
    step_u: Vec<Mat>,
    step_v: Vec<Vector>,
    step_y: Vec<Mat>,
}

impl FrictionSolution {
    pub fn solve(params: &CostParams, opts: SolveOptions) -> Result<Self> {
        let SolveOptions { steps, refine, route } = opts;
        if steps == 0 {
            return Err(Error::invalid("need at least one step"));
        }
        if refine < 2 || refine % 2 == 1 {
            return Err(Error::invalid(format!("refine must be even and >= 2, got {refine}")));
        }
        let constant = params.gamma.as_constant();
        let spectral = match (route, constant) {
            (Route::Numeric, _) | (Route::Auto, None) => None,
            (_, Some(g)) => Some(Spectral::new(params, g)?),
            (Route::Spectral, None) => {
                return Err(Error::invalid("the spectral route needs a constant γ"));
            }
        };
        let n = params.ou.dim();
        let horizon = params.horizon;
        let r = params.r;
        let fine_steps = steps * refine;
        let h = horizon / fine_steps as f64;
        let a_mat = params.ou.a();
        let c_inv = params.cost_solver.inverse();

        let interp = match spectral {
            Some(_) => None,
            None => Some(AInterp::new(params, solve_a_numeric(params, fine_steps)?)),
        };
        let (p, p_inv, weight) = match &spectral {
            Some(s) => (s.p.clone(), s.p_inv.clone(), None),
            None => (Mat::identity(n, n), Mat::identity(n, n), Some(c_inv.clone())),
        };
        let diag = spectral.is_some();
        let generator = |u: f64| -> Mat {
            let a = interp.as_ref().expect("numeric route").eval(u);
            a * &c_inv
        };
        // Propagator G over [t0, t1] in the working basis.
        let kernel = |t0: f64, t1: f64| -> Result<Prop> {
            match &spectral {
                Some(s) => Ok(Prop::Diag(s.kernel(t0, t1, horizon))),
                None => Ok(Prop::Full(matkernels::time_ordered_exp(&generator, t0, t1, h / 4.0)?)),
            }
        };
        // W β̃ with W = P'C⁻¹P (the identity in the spectral basis).
        let weigh_mat = |m: &Mat| match &weight {
            Some(w) => w * m,
            None => m.clone(),
        };
        let weigh_vec = |v: &Vector| match &weight {
            Some(w) => w * v,
            None => v.clone(),
        };

        let e_half = matkernels::mat_exp(&(-a_mat * (0.5 * h)))?;
        let e_full = matkernels::mat_exp(&(-a_mat * h))?;
        let y0 = &p_inv * a_mat;
        let ym = &y0 * &e_half;
        let yh = &y0 * &e_full;
        let p_tilde = &p_inv * &params.p;
        let powers: Vec<Mat> = (0..=refine)
            .map(|k| matkernels::mat_exp(&(-a_mat * (k as f64 * h))))
            .collect::<Result<_>>()?;
        let simpson = |k: usize| -> f64 {
            let w = if k == 0 || k == refine {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        };
        let growth = |s: f64| (r * (horizon - s)).exp();
        let p_inv_t = p_inv.transpose();

        let mut b1 = Mat::zeros(n, n);
        let mut b0 = Vector::zeros(n);
        let mut beta0 = vec![Vector::zeros(n); steps + 1];
        let mut beta1 = vec![Mat::zeros(n, n); steps + 1];
        let mut step_u = vec![Mat::zeros(n, n); steps];
        let mut step_v = vec![Vector::zeros(n); steps];
        let mut step_y = vec![Mat::zeros(n, n); steps];

        for l in (0..steps).rev() {
            let j0 = l * refine;
            let mut gacc = Prop::identity(n, diag);
            let mut acc1 = Mat::zeros(n, n);
            let mut acc0 = Vector::zeros(n);
            let mut accumulate = |k: usize, gacc: &Prop, b0: &Vector, b1: &Mat| {
                let w = simpson(k);
                acc1 += gacc.tr_mul_mat(&weigh_mat(b1)) * &powers[k] * w;
                acc0 += gacc.tr_mul_vec(&weigh_vec(b0)) * w;
            };
            accumulate(refine, &gacc, &b0, &b1);
            for k in (0..refine).rev() {
                let u0 = (j0 + k) as f64 * h;
                let u1 = u0 + h;
                let mid = u0 + 0.5 * h;
                let (g_h, g_m) = match &spectral {
                    Some(_) => (kernel(u0, u1)?, kernel(u0, mid)?),
                    None => {
                        let first = kernel(u0, mid)?;
                        let second = kernel(mid, u1)?;
                        (first.then(&second), first)
                    }
                };
                let (e0, em, e1) = (growth(u0), growth(mid), growth(u1));
                let local1 = &y0 * e0 + g_m.mul_mat(&ym) * (4.0 * em) + g_h.mul_mat(&yh) * e1;
                b1 = local1 * (h / 6.0) + g_h.mul_mat(&(&b1 * &e_full));
                let local0 = &p_tilde * e0 + g_m.mul_vec(&p_tilde) * (4.0 * em) + g_h.mul_vec(&p_tilde) * e1;
                b0 = local0 * (-r * h / 6.0) + g_h.mul_vec(&b0);
                gacc = g_h.then(&gacc);
                accumulate(k, &gacc, &b0, &b1);
            }
            if !b1.iter().chain(b0.iter()).all(|v| v.is_finite()) {
                return Err(Error::Divergence { time: l as f64 * h * refine as f64 });
            }
            beta0[l] = &p * &b0;
            beta1[l] = &p * &b1;
            step_u[l] = &p_inv_t * gacc.to_mat().transpose() * p.transpose();
            step_v[l] = &p_inv_t * acc0;
            step_y[l] = &p_inv_t * acc1;
        }

        let coarse = horizon / steps as f64;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * coarse).collect();
        let a: Vec<Mat> = match &spectral {
            Some(s) => {
                let mut a: Vec<Mat> = times.iter().map(|&t| s.a_at(t, horizon)).collect();
                a[steps] = Mat::zeros(n, n);
                a
            }
            None => {
                let i = interp.as_ref().expect("numeric route");
                (0..=steps).map(|l| i.values[l * refine].clone()).collect()
            }
        };
        let rate = a.iter().map(|m| &c_inv * m).collect();
        let aim0 = beta0.iter().map(|b| &c_inv * b).collect();
        let aim1 = beta1.iter().map(|b| &c_inv * b).collect();
        Ok(Self {
            times,
            mu: params.ou.mu().clone(),
            cost: params.cost.clone(),
            a,
            rate,
            beta0,
            beta1,
            aim0,
            aim1,
            step_u,
            step_v,
            step_y,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn cost(&self) -> &Mat {
        &self.cost
    }

    fn lerp_mat(&self, v: &[Mat], t: f64) -> Result<Mat> {
        let (k, w) = matkernels::locate(&self.times, t)?;
        Ok(if w == 0.0 { v[k].clone() } else { &v[k] * (1.0 - w) + &v[k + 1] * w })
    }

    fn lerp_vec(&self, v: &[Vector], t: f64) -> Result<Vector> {
        let (k, w) = matkernels::locate(&self.times, t)?;
        Ok(if w == 0.0 { v[k].clone() } else { &v[k] * (1.0 - w) + &v[k + 1] * w })
    }

    pub fn a_at(&self, t: f64) -> Result<Mat> {
        self.lerp_mat(&self.a, t)
    }

    /// `Rate(t) = C⁻¹a(t)`.
    pub fn rate_at(&self, t: f64) -> Result<Mat> {
        self.lerp_mat(&self.rate, t)
    }

    /// `(β₀(t), β₁(t))` with `b(t, x) = β₀ + β₁(μ - x)`.
    pub fn beta_at(&self, t: f64) -> Result<(Vector, Mat)> {
        Ok((self.lerp_vec(&self.beta0, t)?, self.lerp_mat(&self.beta1, t)?))
    }

    pub fn b(&self, t: f64, x: &Vector) -> Result<Vector> {
        let (b0, b1) = self.beta_at(t)?;
        Ok(b0 + b1 * (&self.mu - x))
    }

    /// `Aim(t, x) = C⁻¹ b(t, x)`.
    pub fn aim(&self, t: f64, x: &Vector) -> Result<Vector> {
        let a0 = self.lerp_vec(&self.aim0, t)?;
        let a1 = self.lerp_mat(&self.aim1, t)?;
        Ok(a0 + a1 * (&self.mu - x))
    }

    /// `I = C⁻¹(a(t)π + b(t, x))`.
    pub fn intensity(&self, t: f64, x: &Vector, pi: &Vector) -> Result<Vector> {
        if x.len() != self.mu.len() || pi.len() != self.mu.len() {
            return Err(Error::invalid("state or portfolio has the wrong dimension"));
        }
        Ok(self.rate_at(t)? * pi + self.aim(t, x)?)
    }

    /// Moves the position across step `l` given the state `x` at `t_l`.
    pub fn advance(&self, l: usize, scheme: PositionScheme, pi: &Vector, x: &[f64], out: &mut Vector) {
        let dev = &self.mu - Vector::from_column_slice(x);
        match scheme {
            PositionScheme::Exact => {
                out.copy_from(&self.step_v[l]);
                out.gemv(1.0, &self.step_u[l], pi, 1.0);
                out.gemv(1.0, &self.step_y[l], &dev, 1.0);
            }
            PositionScheme::Euler => {
                let dt = self.times[l + 1] - self.times[l];
                out.copy_from(pi);
                out.gemv(dt, &self.rate[l], pi, 1.0);
                out.axpy(dt, &self.aim0[l], 1.0);
                out.gemv(dt, &self.aim1[l], &dev, 1.0);
            }
        }
    }

    /// Position path on the solution grid for states `x_path`, given row by
    /// row as `[time][dim]`.
    pub fn evolve_position(&self, x_path: &[f64], pi0: &Vector, scheme: PositionScheme) -> Result<Vec<Vector>> {
        let n = self.mu.len();
        if pi0.len() != n || x_path.len() != self.times.len() * n {
            return Err(Error::invalid("state path does not match the solution grid"));
        }
        let mut out = Vec::with_capacity(self.times.len());
        out.push(pi0.clone());
        let mut next = Vector::zeros(n);
        for l in 0..self.steps() {
            self.advance(l, scheme, &out[l], &x_path[l * n..(l + 1) * n], &mut next);
            out.push(next.clone());
        }
        Ok(out)
    }
}
