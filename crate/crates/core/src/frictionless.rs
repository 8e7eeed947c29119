//! Frictionless optimal portfolios: exponential utility with its value
//! function `h` and verification diagnostic, and mean-variance with a
//! deterministic volatility aversion `γ(t)`.
//!
//! With `g(x) = A(μ - x) - pr`, `S = (σσ')⁻¹` and `τ = T - t`:
//!
//! * exponential: `π = [S g + τ A'S g - (τ²/2) A'S A p r] / (γ e^{rτ})`;
//! * mean-variance: `π = S g e^{rτ} / γ(t)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkernels;
use crate::oumodel::OuParams;
use crate::policy::{AffinePolicy, TimeFn};
use crate::{Mat, Vector};

pub(crate) fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

pub(crate) fn check_time(t: f64, horizon: f64) -> Result<f64> {
    let slack = 1e-12 * (1.0 + horizon);
    if !(t >= -slack && t <= horizon + slack) {
        return Err(Error::invalid(format!("time {t} outside [0, {horizon}]")));
    }
    Ok((horizon - t).clamp(0.0, horizon))
}

pub(crate) fn check_capital(p: &Vector, ou: &OuParams) -> Result<()> {
    if p.len() != ou.dim() {
        return Err(Error::invalid(format!(
            "capital vector has length {}, expected {}",
            p.len(),
            ou.dim()
        )));
    }
    if !p.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("capital vector has non-finite entries"));
    }
    Ok(())
}

/// Quantities shared by every strategy on the same `(ou, p, r)`.
#[derive(Debug, Clone)]
pub(crate) struct SignalCache {
    /// `Aμ - pr`
    pub c0: Vector,
    /// `S A`
    pub sa: Mat,
    /// `S (Aμ - pr)`
    pub sc0: Vector,
}

impl SignalCache {
    pub fn new(ou: &OuParams, p: &Vector, r: f64) -> Self {
        let c0 = ou.a() * ou.mu() - p * r;
        let solver = ou.cov_solver();
        Self {
            sa: solver.solve_mat(ou.a()),
            sc0: solver.solve_vec(&c0),
            c0,
        }
    }
}

/// `A(μ - x) - pr`.
pub fn signal(ou: &OuParams, p: &Vector, r: f64, x: &Vector) -> Vector {
    ou.a() * (ou.mu() - x) - p * r
}

#[derive(Debug, Clone)]
pub struct ExpStrategy {
    ou: Arc<OuParams>,
    gamma: f64,
    r: f64,
    horizon: f64,
    p: Vector,
    cache: SignalCache,
    /// `A'S A`
    q: Mat,
    /// `A'S(Aμ - pr)`
    at_sc0: Vector,
    /// `A'S A p r`
    q_pr: Vector,
}

impl ExpStrategy {
    pub fn new(ou: Arc<OuParams>, gamma: f64, r: f64, horizon: f64, p: Vector) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("risk aversion must be positive, got {gamma}")));
        }
        if !r.is_finite() {
            return Err(Error::invalid("interest rate must be finite"));
        }
        check_horizon(horizon)?;
        check_capital(&p, &ou)?;
        let cache = SignalCache::new(&ou, &p, r);
        let q = matkernels::symmetrize(&(ou.a().transpose() * &cache.sa));
        let at_sc0 = ou.a().transpose() * &cache.sc0;
        let q_pr = &q * &p * r;
        Ok(Self {
            ou,
            gamma,
            r,
            horizon,
            p,
            cache,
            q,
            at_sc0,
            q_pr,
        })
    }

    pub fn ou(&self) -> &OuParams {
        &self.ou
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rate(&self) -> f64 {
        self.r
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn capital(&self) -> &Vector {
        &self.p
    }

    fn check_state(&self, x: &Vector) -> Result<()> {
        if x.len() != self.ou.dim() {
            return Err(Error::invalid("state vector has the wrong dimension"));
        }
        Ok(())
    }

    /// `S g / (γ e^{rτ})`, the myopic part of the portfolio.
    pub fn first_term(&self, t: f64, x: &Vector) -> Result<Vector> {
        let tau = check_time(t, self.horizon)?;
        self.check_state(x)?;
        let g = signal(&self.ou, &self.p, self.r, x);
        let k = 1.0 / (self.gamma * (self.r * tau).exp());
        Ok(self.ou.cov_solver().solve_vec(&g) * k)
    }

    pub fn portfolio(&self, t: f64, x: &Vector) -> Result<Vector> {
        let tau = check_time(t, self.horizon)?;
        self.check_state(x)?;
        let g = signal(&self.ou, &self.p, self.r, x);
        let sg = self.ou.cov_solver().solve_vec(&g);
        let k = 1.0 / (self.gamma * (self.r * tau).exp());
        let mut out = sg.clone();
        out.gemv_tr(tau, self.ou.a(), &sg, 1.0);
        out.axpy(-0.5 * tau * tau, &self.q_pr, 1.0);
        Ok(out * k)
    }

    /// The portfolio at `t` as an affine map of `x`.
    pub fn affine_at(&self, t: f64) -> Result<AffinePolicy> {
        let tau = check_time(t, self.horizon)?;
        let k = 1.0 / (self.gamma * (self.r * tau).exp());
        let slope = -(&self.cache.sa + &self.q * tau) * k;
        let offset = (&self.cache.sc0 + &self.at_sc0 * tau - &self.q_pr * (0.5 * tau * tau)) * k;
        Ok(AffinePolicy { offset, slope })
    }

    /// The explicit solution `h(t, x)` of the reduced linear PDE, with
    /// `H = -exp(-γ(w e^{r(T-t)} + h))`.
    pub fn value_h(&self, t: f64, x: &Vector) -> Result<f64> {
        let tau = check_time(t, self.horizon)?;
        self.check_state(x)?;
        let c0 = &self.cache.c0;
        let rp = &self.p * self.r;
        let qx = &self.q * x;
        let trace = (&self.q * self.ou.sigma_sq()).trace();
        let constant = c0.dot(&self.cache.sc0) * tau;
        // c0'S A E[∫Y] with E[∫Y] = xτ + rp τ²/2
        let linear = self.at_sc0.dot(&(x * tau + &rp * (0.5 * tau * tau)));
        let quadratic = x.dot(&qx) * tau
            + (2.0 * qx.dot(&rp) + trace) * 0.5 * tau * tau
            + rp.dot(&(&self.q * &rp)) * tau.powi(3) / 3.0;
        Ok((constant - 2.0 * linear + quadratic) / (2.0 * self.gamma))
    }
}

#[derive(Debug, Clone)]
pub struct MvStrategy {
    ou: Arc<OuParams>,
    gamma: TimeFn,
    r: f64,
    horizon: f64,
    p: Vector,
    cache: SignalCache,
}

impl MvStrategy {
    pub fn new(
        ou: Arc<OuParams>,
        gamma: impl Into<TimeFn>,
        r: f64,
        horizon: f64,
        p: Vector,
    ) -> Result<Self> {
        let gamma = gamma.into();
        if let Some(g) = gamma.as_constant() {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::invalid(format!("volatility aversion must be positive, got {g}")));
            }
        }
        if !r.is_finite() {
            return Err(Error::invalid("interest rate must be finite"));
        }
        check_horizon(horizon)?;
        check_capital(&p, &ou)?;
        let cache = SignalCache::new(&ou, &p, r);
        Ok(Self {
            ou,
            gamma,
            r,
            horizon,
            p,
            cache,
        })
    }

    /// `γ(t) = γ e^{2r(T-t)}`, under which the portfolio coincides with the
    /// myopic part of the exponential-utility portfolio.
    pub fn matching_exp(ou: Arc<OuParams>, gamma: f64, r: f64, horizon: f64, p: Vector) -> Result<Self> {
        let g = TimeFn::from_fn(move |t| gamma * (2.0 * r * (horizon - t)).exp());
        if !(gamma > 0.0) {
            return Err(Error::invalid(format!("volatility aversion must be positive, got {gamma}")));
        }
        Self::new(ou, g, r, horizon, p)
    }

    pub fn ou(&self) -> &OuParams {
        &self.ou
    }

    pub fn gamma_fn(&self) -> &TimeFn {
        &self.gamma
    }

    pub fn rate(&self) -> f64 {
        self.r
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn capital(&self) -> &Vector {
        &self.p
    }

    pub(crate) fn gamma_at(&self, t: f64) -> Result<f64> {
        let g = self.gamma.eval(t);
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::invalid(format!("volatility aversion γ({t}) = {g} is not positive")));
        }
        Ok(g)
    }

    pub fn portfolio(&self, t: f64, x: &Vector) -> Result<Vector> {
        let tau = check_time(t, self.horizon)?;
        if x.len() != self.ou.dim() {
            return Err(Error::invalid("state vector has the wrong dimension"));
        }
        let g = signal(&self.ou, &self.p, self.r, x);
        let scale = (self.r * tau).exp() / self.gamma_at(t)?;
        Ok(self.ou.cov_solver().solve_vec(&g) * scale)
    }

    pub fn affine_at(&self, t: f64) -> Result<AffinePolicy> {
        let tau = check_time(t, self.horizon)?;
        let scale = (self.r * tau).exp() / self.gamma_at(t)?;
        Ok(AffinePolicy {
            offset: &self.cache.sc0 * scale,
            slope: &self.cache.sa * -scale,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `4 max_s ‖Λ₀(s)‖`
    pub max_4_lambda0: f64,
    /// `32 max_s ‖Λ₁(s)‖`
    pub max_32_lambda1: f64,
    pub lambda0_ok: bool,
    pub lambda1_ok: bool,
    /// Grid time at which each maximum was attained.
    pub argmax_lambda0: f64,
    pub argmax_lambda1: f64,
}

impl VerificationReport {
    pub fn satisfied(&self) -> bool {
        self.lambda0_ok && self.lambda1_ok
    }
}

/// Scans `s ∈ [0, T]` on `steps` uniform intervals for the largest absolute
/// eigenvalues of `Ω^{1/2}(C₀+C₀')Ω^{1/2}` and `Ω^{1/2}C₁C₁'Ω^{1/2}`, where
/// `Ω(s)` is the OU covariance over `[0, s]`,
/// `C₀(s) = A'SA(I + A(T-s))` and `C₁(s) = A'S(I + A(T-s))σ`.
///
/// The norm of the eigenvalue matrices is the spectral norm.
pub fn verification_diagnostic(strategy: &ExpStrategy, steps: usize) -> Result<VerificationReport> {
    if steps < 2 {
        return Err(Error::invalid("verification scan needs at least 2 steps"));
    }
    let ou = strategy.ou();
    let n = ou.dim();
    let horizon = strategy.horizon();
    let h = horizon / steps as f64;
    let ident = Mat::identity(n, n);
    // (S A)' = A'S since S is symmetric
    let at_s = ou.cov_solver().solve_mat(ou.a()).transpose();
    let q = &at_s * ou.a();
    let decay = matkernels::mat_exp(&(-ou.a() * h))?;
    let step_cov = matkernels::ou_cov_integral(ou.a(), ou.sigma_sq(), h)?;

    let mut omega = Mat::zeros(n, n);
    let mut best0 = (0.0f64, 0.0f64);
    let mut best1 = (0.0f64, 0.0f64);
    for k in 0..=steps {
        let s = k as f64 * h;
        if k > 0 {
            omega = matkernels::symmetrize(&(&decay * &omega * decay.transpose() + &step_cov));
            let root = matkernels::sym_sqrt(&omega).map_err(|e| {
                Error::degenerate(format!("Ω({s}) is not positive semidefinite: {e}"))
            })?;
            let shift = &ident + ou.a() * (horizon - s);
            let c0 = &q * &shift;
            let c1 = &at_s * &shift * ou.sigma();
            let m0 = &root * (&c0 + c0.transpose()) * &root;
            let m1 = &root * (&c1 * c1.transpose()) * &root;
            let e0 = spectral_radius_sym(&m0);
            let e1 = spectral_radius_sym(&m1);
            if e0 > best0.0 {
                best0 = (e0, s);
            }
            if e1 > best1.0 {
                best1 = (e1, s);
            }
        }
    }
    let max_4_lambda0 = 4.0 * best0.0;
    let max_32_lambda1 = 32.0 * best1.0;
    Ok(VerificationReport {
        max_4_lambda0,
        max_32_lambda1,
        lambda0_ok: max_4_lambda0 < 1.0,
        lambda1_ok: max_32_lambda1 < 1.0,
        argmax_lambda0: best0.1,
        argmax_lambda1: best1.1,
    })
}

fn spectral_radius_sym(m: &Mat) -> f64 {
    matkernels::symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}
