//! Soft dollar neutrality: the wealth is penalized by `α(t)(π·p)²/2 dt`.
//!
//! The mean-variance variant stays in closed form. The exponential variant
//! needs the quadratic and linear coefficients `c(t)`, `b(t)` of the value
//! function, obtained from a matrix Riccati ODE and a linear ODE solved
//! backward from `c(T) = 0`, `b(T) = 0`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frictionless::{check_capital, check_horizon, check_time, signal};
use crate::matkernels::{self, MatrixPath, SpdSolver};
use crate::oumodel::OuParams;
use crate::policy::{AffinePolicy, TimeFn};
use crate::{Mat, Vector};

/// Smallest ODE grid accepted by [`ExpDollarStrategy::solve`].
pub const MIN_ODE_STEPS: usize = 10;

fn alpha_at(alpha: &TimeFn, t: f64) -> Result<f64> {
    let a = alpha.eval(t);
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::invalid(format!("dollar penalty α({t}) = {a} must be >= 0")));
    }
    Ok(a)
}

/// Factorization of `scale·σσ' + α pp'`.
fn penalized_solver(ou: &OuParams, p: &Vector, scale: f64, alpha: f64) -> Result<SpdSolver> {
    let mut m = ou.sigma_sq() * scale;
    m.ger(alpha, p, p, 1.0);
    SpdSolver::new(&m, "penalized covariance")
}

/// `π = (γ(t)σσ' + α(t)pp')⁻¹ (A(μ - x) - pr) e^{r(T-t)}`.
#[derive(Debug, Clone)]
pub struct MvDollarStrategy {
    ou: Arc<OuParams>,
    gamma: TimeFn,
    alpha: TimeFn,
    r: f64,
    horizon: f64,
    p: Vector,
}

impl MvDollarStrategy {
    pub fn new(
        ou: Arc<OuParams>,
        gamma: impl Into<TimeFn>,
        alpha: impl Into<TimeFn>,
        r: f64,
        horizon: f64,
        p: Vector,
    ) -> Result<Self> {
        let (gamma, alpha) = (gamma.into(), alpha.into());
        if let Some(g) = gamma.as_constant() {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::invalid(format!("volatility aversion must be positive, got {g}")));
            }
        }
        if let Some(a) = alpha.as_constant() {
            alpha_at(&TimeFn::Constant(a), 0.0)?;
        }
        if !r.is_finite() {
            return Err(Error::invalid("interest rate must be finite"));
        }
        check_horizon(horizon)?;
        check_capital(&p, &ou)?;
        Ok(Self {
            ou,
            gamma,
            alpha,
            r,
            horizon,
            p,
        })
    }

    pub fn ou(&self) -> &OuParams {
        &self.ou
    }

    pub fn capital(&self) -> &Vector {
        &self.p
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn solver_at(&self, t: f64) -> Result<(f64, SpdSolver)> {
        let tau = check_time(t, self.horizon)?;
        let g = self.gamma.eval(t);
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::invalid(format!("volatility aversion γ({t}) = {g} is not positive")));
        }
        let a = alpha_at(&self.alpha, t)?;
        Ok(((self.r * tau).exp(), penalized_solver(&self.ou, &self.p, g, a)?))
    }

    pub fn portfolio(&self, t: f64, x: &Vector) -> Result<Vector> {
        if x.len() != self.ou.dim() {
            return Err(Error::invalid("state vector has the wrong dimension"));
        }
        let (growth, solver) = self.solver_at(t)?;
        Ok(solver.solve_vec(&signal(&self.ou, &self.p, self.r, x)) * growth)
    }

    pub fn affine_at(&self, t: f64) -> Result<AffinePolicy> {
        let (growth, solver) = self.solver_at(t)?;
        let c0 = self.ou.a() * self.ou.mu() - &self.p * self.r;
        Ok(AffinePolicy {
            offset: solver.solve_vec(&c0) * growth,
            slope: solver.solve_mat(self.ou.a()) * -growth,
        })
    }
}

/// Exponential utility with the dollar penalty:
/// `π = (γe^{r(T-t)}σσ' + α(t)pp')⁻¹ (A(μ-x) - pr - γσσ'(b(t) + c(t)x))`.
#[derive(Debug, Clone)]
pub struct ExpDollarStrategy {
    ou: Arc<OuParams>,
    gamma: f64,
    alpha: TimeFn,
    r: f64,
    horizon: f64,
    p: Vector,
    c: MatrixPath,
    b: Vec<Vector>,
}

impl ExpDollarStrategy {
    /// Integrates the `c` and `b` equations backward with RK4 on `steps`
    /// uniform intervals. `c` is integrated on a grid twice as fine so the
    /// `b` stages can use its midpoint values without interpolation.
    ///
    /// With `K = A + γσσ'c` and `M = (γσσ'e^{r(T-t)} + α pp')⁻¹`:
    ///
    /// `c' = A'c + cA + γcσσ'c - e^{r(T-t)} K'MK`
    /// `b' = A'b - cAμ + e^{r(T-t)} K'M(Aμ - pr - γσσ'b) + γcσσ'b`
    pub fn solve(
        ou: Arc<OuParams>,
        gamma: f64,
        alpha: impl Into<TimeFn>,
        r: f64,
        horizon: f64,
        p: Vector,
        steps: usize,
    ) -> Result<Self> {
        let alpha = alpha.into();
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("risk aversion must be positive, got {gamma}")));
        }
        if steps < MIN_ODE_STEPS {
            return Err(Error::invalid(format!("need at least {MIN_ODE_STEPS} ODE steps")));
        }
        if !r.is_finite() {
            return Err(Error::invalid("interest rate must be finite"));
        }
        check_horizon(horizon)?;
        check_capital(&p, &ou)?;
        let n = ou.dim();
        let sig = ou.sigma_sq();
        let a = ou.a();

        // Both right-hand sides need M(t)K; errors inside the closures are
        // stashed and reported after the integrator returns.
        let failure = std::cell::RefCell::new(None::<Error>);
        let mk = |t: f64, k: &Mat| -> Option<(f64, Mat, SpdSolver)> {
            let growth = (r * (horizon - t)).exp();
            let solver = alpha_at(&alpha, t)
                .and_then(|al| penalized_solver(&ou, &p, gamma * growth, al));
            match solver {
                Ok(s) => Some((growth, s.solve_mat(k), s)),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    None
                }
            }
        };

        let c_rhs = |t: f64, c: &Mat| -> Mat {
            let k = a + sig * c * gamma;
            let Some((growth, mk_, _)) = mk(t, &k) else {
                return Mat::from_element(n, n, f64::NAN);
            };
            let ac = a.transpose() * c;
            &ac + ac.transpose() + c * sig * c * gamma - k.transpose() * mk_ * growth
        };
        let fine = matkernels::riccati_backward(&Mat::zeros(n, n), c_rhs, horizon, 2 * steps);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e.context("dollar-penalty Riccati equation"));
        }
        let fine = fine?;

        let c0 = a * ou.mu() - &p * r;
        let a_mu = a * ou.mu();
        let b_rhs = |t: f64, c: &Mat, b: &Vector| -> Vector {
            let k = a + sig * c * gamma;
            let Some((growth, _, solver)) = mk(t, &Mat::zeros(n, 0)) else {
                return Vector::from_element(n, f64::NAN);
            };
            let sb = sig * b;
            let inner = solver.solve_vec(&(&c0 - &sb * gamma));
            a.transpose() * b - c * &a_mu + k.transpose() * inner * growth + c * sb * gamma
        };
        let h = horizon / steps as f64;
        let mut b = vec![Vector::zeros(n); steps + 1];
        for k in (0..steps).rev() {
            let t = (k + 1) as f64 * h;
            let (c_hi, c_mid, c_lo) = (
                &fine.values[2 * k + 2],
                &fine.values[2 * k + 1],
                &fine.values[2 * k],
            );
            let y = &b[k + 1];
            let k1 = b_rhs(t, c_hi, y);
            let k2 = b_rhs(t - 0.5 * h, c_mid, &(y - &k1 * (0.5 * h)));
            let k3 = b_rhs(t - 0.5 * h, c_mid, &(y - &k2 * (0.5 * h)));
            let k4 = b_rhs(t - h, c_lo, &(y - &k3 * h));
            let next = y - (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if let Some(e) = failure.borrow_mut().take() {
                return Err(e.context("dollar-penalty linear equation"));
            }
            if !next.iter().all(|v| v.is_finite()) {
                return Err(Error::Divergence { time: k as f64 * h });
            }
            b[k] = next;
        }

        let c = MatrixPath {
            times: (0..=steps).map(|k| k as f64 * h).collect(),
            values: fine.values.into_iter().step_by(2).collect(),
        };
        Ok(Self {
            ou,
            gamma,
            alpha,
            r,
            horizon,
            p,
            c,
            b,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.c.times
    }

    pub fn c_at(&self, t: f64) -> Result<Mat> {
        self.c.at(t)
    }

    pub fn b_at(&self, t: f64) -> Result<Vector> {
        let (k, w) = matkernels::locate(&self.c.times, t)?;
        if w == 0.0 {
            return Ok(self.b[k].clone());
        }
        Ok(&self.b[k] * (1.0 - w) + &self.b[k + 1] * w)
    }

    pub fn c_path(&self) -> &MatrixPath {
        &self.c
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn capital(&self) -> &Vector {
        &self.p
    }

    pub fn affine_at(&self, t: f64) -> Result<AffinePolicy> {
        let tau = check_time(t, self.horizon)?;
        let growth = (self.r * tau).exp();
        let solver = penalized_solver(&self.ou, &self.p, self.gamma * growth, alpha_at(&self.alpha, t)?)?;
        let sig = self.ou.sigma_sq();
        let c0 = self.ou.a() * self.ou.mu() - &self.p * self.r;
        let (b, c) = (self.b_at(t)?, self.c_at(t)?);
        Ok(AffinePolicy {
            offset: solver.solve_vec(&(c0 - sig * b * self.gamma)),
            slope: -solver.solve_mat(&(self.ou.a() + sig * c * self.gamma)),
        })
    }

    pub fn portfolio(&self, t: f64, x: &Vector) -> Result<Vector> {
        if x.len() != self.ou.dim() {
            return Err(Error::invalid("state vector has the wrong dimension"));
        }
        Ok(self.affine_at(t)?.apply(x))
    }
}
