//! Parameter sanity report: conditioning of `σσ'`, the spectrum of `A`, the
//! capital vector and the optimality conditions of the exponential strategy.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;
use crate::frictionless::{verification_diagnostic, ExpStrategy, VerificationReport};
use crate::matkernels::{general_eigenvalues, sym_eigen};
use crate::oumodel::OuParams;
use crate::Vector;

const LISTED_EIGENVALUES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// `(re, im)` sorted by real part.
    pub eigenvalues: Vec<(f64, f64)>,
    pub min_real_part: f64,
    pub max_real_part: f64,
    pub mean_real_part: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapitalSummary {
    pub all_ones: bool,
    pub min: f64,
    pub max: f64,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub n_assets: usize,
    pub horizon: f64,
    pub verification: VerificationReport,
    pub sigma_sq: Conditioning,
    pub a_spectrum: Spectrum,
    pub capital: CapitalSummary,
}

/// The optimality scan does not involve `γ`, `r` or `p`; it is run with
/// `γ = 1`, `r = 0`.
pub fn verification_for(ou: &Arc<OuParams>, p: &Vector, horizon: f64, steps: usize) -> Result<VerificationReport> {
    let s = ExpStrategy::new(ou.clone(), 1.0, 0.0, horizon, p.clone())?;
    verification_diagnostic(&s, steps)
}

pub fn diagnose(ou: &Arc<OuParams>, p: &Vector, horizon: f64, steps: usize) -> Result<Diagnosis> {
    let verification = verification_for(ou, p, horizon, steps)?;
    let eig = sym_eigen(ou.sigma_sq(), "sigma*sigma'")?.eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let mut a_eigs = general_eigenvalues(ou.a())?;
    a_eigs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let re = a_eigs.iter().map(|e| e.0);
    let a_spectrum = Spectrum {
        min_real_part: re.clone().fold(f64::INFINITY, f64::min),
        max_real_part: re.clone().fold(f64::NEG_INFINITY, f64::max),
        mean_real_part: re.sum::<f64>() / a_eigs.len() as f64,
        eigenvalues: a_eigs,
    };
    Ok(Diagnosis {
        n_assets: ou.dim(),
        horizon,
        verification,
        sigma_sq: Conditioning {
            min_eigenvalue: lo,
            max_eigenvalue: hi,
            condition: hi / lo,
        },
        a_spectrum,
        capital: CapitalSummary {
            all_ones: p.iter().all(|&v| v == 1.0),
            min: p.min(),
            max: p.max(),
            sum: p.sum(),
        },
    })
}

pub fn diagnose_config(cfg: &RunConfig) -> Result<Diagnosis> {
    let r = cfg.resolve()?;
    diagnose(&r.ou, &r.p, cfg.horizon, cfg.diagnostic_steps)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "satisfied"
    } else {
        "VIOLATED"
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.verification;
        writeln!(f, "assets: {}  horizon: {}", self.n_assets, self.horizon)?;
        writeln!(f, "exponential-utility optimality conditions:")?;
        writeln!(
            f,
            "  4·max‖Λ0‖  = {:.6e} (< 1: {}, worst at s = {})",
            v.max_4_lambda0,
            verdict(v.lambda0_ok),
            v.argmax_lambda0
        )?;
        writeln!(
            f,
            "  32·max‖Λ1‖ = {:.6e} (< 1: {}, worst at s = {})",
            v.max_32_lambda1,
            verdict(v.lambda1_ok),
            v.argmax_lambda1
        )?;
        writeln!(f, "  overall: {}", verdict(v.satisfied()))?;
        let c = &self.sigma_sq;
        writeln!(
            f,
            "sigma*sigma': min eigenvalue {:.6e}, max eigenvalue {:.6e}, condition number {:.6e}",
            c.min_eigenvalue, c.max_eigenvalue, c.condition
        )?;
        let s = &self.a_spectrum;
        writeln!(
            f,
            "A spectrum: real parts in [{:.6}, {:.6}], mean {:.6}",
            s.min_real_part, s.max_real_part, s.mean_real_part
        )?;
        if s.eigenvalues.len() <= LISTED_EIGENVALUES {
            for (re, im) in &s.eigenvalues {
                writeln!(f, "  {re:.6} {:+.6}i", im)?;
            }
        }
        let p = &self.capital;
        if p.all_ones {
            write!(f, "capital vector: p = 1 (all ones)")
        } else {
            write!(f, "capital vector: min {:.6}, max {:.6}, sum {:.6}", p.min, p.max, p.sum)
        }
    }
}
