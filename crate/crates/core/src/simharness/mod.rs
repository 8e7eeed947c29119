//! Monte Carlo campaigns: exact residual paths on a uniform grid, strategy
//! execution with positions held constant between nodes, and wealth
//!
//! `W_{l+1} = W_l + π_l·(X_{l+1} - X_l) + (W_l - π_l·p) r Δt - debit_l`
//!
//! where the debit is the transaction cost `½ Δπ'CΔπ/Δt` of the cost
//! strategy (when enabled) and zero otherwise. Every cell of a campaign
//! trades on the same residual paths.

pub mod params;
pub mod stats;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constrained::MvDollarStrategy;
use crate::error::{Error, Result};
use crate::frictionless::{ExpStrategy, MvStrategy};
use crate::frictions::{CostParams, CostSpec, FrictionSolution, PositionScheme, SolveOptions};
use crate::oumodel::{sample_paths, OuParams, StatePaths};
use crate::par::{self, Execution};
use crate::policy::AffinePolicy;
use crate::Vector;

pub use params::{generate_paper_params, perturb_p};
pub use stats::TerminalStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Exp,
    Mv,
    MvDollar,
    MvTcost,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Exp, Family::Mv, Family::MvDollar, Family::MvTcost];

    pub fn name(self) -> &'static str {
        match self {
            Family::Exp => "exp",
            Family::Mv => "mv",
            Family::MvDollar => "mv-dollar",
            Family::MvTcost => "mv-tcost",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Family::ALL.into_iter().find(|f| f.name() == s)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One strategy with fixed hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub family: Family,
    pub gamma: f64,
    /// Dollar penalty; 0 for families without one.
    pub alpha: f64,
    pub rate: f64,
    /// Cost matrix for the transaction-cost family.
    pub cost: Option<CostSpec>,
    /// Position of `cost` in the configured list, used to label explicit matrices.
    pub cost_index: Option<usize>,
    /// Scale of the capital-vector perturbation.
    pub a_perturb: f64,
}

impl CellSpec {
    pub fn new(family: Family, gamma: f64, rate: f64) -> Self {
        Self {
            family,
            gamma,
            alpha: 0.0,
            rate,
            cost: None,
            cost_index: None,
            a_perturb: 0.0,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        self.cost.as_ref().and_then(CostSpec::as_lambda)
    }

    /// Family and rate, e.g. `exp@r=0.02`; explicit cost matrices add `#c<k>`.
    pub fn strategy_id(&self) -> String {
        let mut id = format!("{}@r={}", self.family, self.rate);
        if let (Some(CostSpec::Matrix(_)), Some(k)) = (&self.cost, self.cost_index) {
            id.push_str(&format!("#c{k}"));
        }
        id
    }

    /// File-name friendly label unique within a campaign.
    pub fn slug(&self) -> String {
        let mut s = format!("{}_r{}_g{}", self.family, self.rate, self.gamma);
        if self.family == Family::MvDollar {
            s.push_str(&format!("_alpha{}", self.alpha));
        }
        match (self.lambda(), self.cost_index) {
            (Some(l), _) => s.push_str(&format!("_lambda{l}")),
            (None, Some(k)) => s.push_str(&format!("_c{k}")),
            _ => {}
        }
        if self.a_perturb != 0.0 {
            s.push_str(&format!("_a{}", self.a_perturb));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct SimCampaign {
    pub ou: Arc<OuParams>,
    /// Capital vector before perturbation.
    pub p: Vector,
    pub x0: Vector,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub initial_wealth: f64,
    pub cells: Vec<CellSpec>,
    pub debit_costs: bool,
    pub ode_refine: usize,
    pub position_scheme: PositionScheme,
    pub histogram_bins: Option<usize>,
    pub exec: Execution,
}

impl SimCampaign {
    pub fn new(ou: Arc<OuParams>, p: Vector, horizon: f64, steps: usize, paths: usize, seed: u64) -> Self {
        let x0 = ou.mu().clone();
        Self {
            ou,
            p,
            x0,
            horizon,
            steps,
            paths,
            seed,
            initial_wealth: 0.0,
            cells: Vec::new(),
            debit_costs: true,
            ode_refine: 10,
            position_scheme: PositionScheme::Exact,
            histogram_bins: None,
            exec: Execution::Parallel,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut g: Vec<f64> = (0..=self.steps).map(|l| l as f64 * dt).collect();
        g[self.steps] = self.horizon;
        g
    }

    fn validate(&self) -> Result<()> {
        let n = self.ou.dim();
        if self.steps == 0 || self.paths == 0 {
            return Err(Error::invalid("steps and paths must be positive"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::invalid("horizon must be positive"));
        }
        if self.p.len() != n || self.x0.len() != n {
            return Err(Error::invalid("capital vector and initial state must have length N"));
        }
        if !self.initial_wealth.is_finite() {
            return Err(Error::invalid("initial wealth must be finite"));
        }
        Ok(())
    }
}

/// A strategy reduced to what the path loop needs.
#[derive(Debug, Clone)]
pub enum CompiledPolicy {
    /// Holds no risky position.
    Zero,
    /// `π_l = policy_l(X_l)` for `l >= 1`.
    Affine(Vec<AffinePolicy>),
    /// Positions follow the transaction-cost dynamics.
    Cost {
        solution: FrictionSolution,
        params: CostParams,
        scheme: PositionScheme,
        debit: bool,
    },
}

/// Wealth, first position coordinate and capital deployed along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub wealth: Vec<f64>,
    pub pi1: Vec<f64>,
    pub capital: Vec<f64>,
}

/// Runs one path. `x_path` holds `X` row by row (`[time][dim]`); `π_0 = 0`.
pub fn simulate_path(
    policy: &CompiledPolicy,
    x_path: &[f64],
    times: &[f64],
    rate: f64,
    p: &Vector,
    w0: f64,
) -> PathOutcome {
    let n = p.len();
    let steps = times.len() - 1;
    let mut wealth = Vec::with_capacity(steps + 1);
    let mut pi1 = Vec::with_capacity(steps + 1);
    let mut capital = Vec::with_capacity(steps + 1);
    let mut pi = Vector::zeros(n);
    let mut next = Vector::zeros(n);
    let mut x = Vector::zeros(n);
    let mut w = w0;
    wealth.push(w);
    pi1.push(0.0);
    capital.push(0.0);
    for l in 0..steps {
        let dt = times[l + 1] - times[l];
        let (x0, x1) = (&x_path[l * n..(l + 1) * n], &x_path[(l + 1) * n..(l + 2) * n]);
        let gain: f64 = (0..n).map(|i| pi[i] * (x1[i] - x0[i])).sum();
        let deployed = pi.dot(p);
        let mut debit = 0.0;
        match policy {
            CompiledPolicy::Zero => next.fill(0.0),
            CompiledPolicy::Affine(policies) => {
                x.copy_from_slice(x1);
                policies[l + 1].apply_into(&x, &mut next);
            }
            CompiledPolicy::Cost {
                solution,
                params,
                scheme,
                debit: charge,
            } => {
                solution.advance(l, *scheme, &pi, x0, &mut next);
                if *charge {
                    debit = params.debit(&(&next - &pi), dt);
                }
            }
        }
        w += gain + (w - deployed) * rate * dt - debit;
        std::mem::swap(&mut pi, &mut next);
        wealth.push(w);
        pi1.push(pi[0]);
        capital.push(pi.dot(p));
    }
    PathOutcome { wealth, pi1, capital }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub spec: CellSpec,
    /// Capital vector actually used (after perturbation).
    pub p: Vector,
    pub outcomes: Vec<PathOutcome>,
    pub stats: TerminalStats,
}

impl CellResult {
    pub fn terminal(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| *o.wealth.last().unwrap()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PathBundle {
    pub times: Vec<f64>,
    pub states: StatePaths,
    pub cells: Vec<CellResult>,
}

impl PathBundle {
    pub fn cell(&self, pred: impl Fn(&CellSpec) -> bool) -> Option<&CellResult> {
        self.cells.iter().find(|c| pred(&c.spec))
    }
}

/// Builds the per-node policies (or the cost solution) for a cell.
pub fn compile_cell(c: &SimCampaign, cell: &CellSpec, p: &Vector) -> Result<CompiledPolicy> {
    let ou = c.ou.clone();
    let times = c.grid();
    let affine = |f: &dyn Fn(f64) -> Result<AffinePolicy>| -> Result<CompiledPolicy> {
        Ok(CompiledPolicy::Affine(times.iter().map(|&t| f(t)).collect::<Result<_>>()?))
    };
    match cell.family {
        Family::Exp => {
            let s = ExpStrategy::new(ou, cell.gamma, cell.rate, c.horizon, p.clone())?;
            affine(&|t| s.affine_at(t))
        }
        Family::Mv => {
            let s = MvStrategy::new(ou, cell.gamma, cell.rate, c.horizon, p.clone())?;
            affine(&|t| s.affine_at(t))
        }
        Family::MvDollar => {
            let s = MvDollarStrategy::new(ou, cell.gamma, cell.alpha, cell.rate, c.horizon, p.clone())?;
            affine(&|t| s.affine_at(t))
        }
        Family::MvTcost => {
            let spec = cell
                .cost
                .as_ref()
                .ok_or_else(|| Error::invalid("transaction-cost cell without a cost specification"))?;
            let params = CostParams::from_spec(ou, spec, cell.gamma, cell.rate, c.horizon, p.clone())?;
            let solution =
                FrictionSolution::solve(&params, SolveOptions::new(c.steps).refine(c.ode_refine))?;
            Ok(CompiledPolicy::Cost {
                solution,
                params,
                scheme: c.position_scheme,
                debit: c.debit_costs,
            })
        }
    }
}

/// Samples the residual paths once, then runs every cell on them.
pub fn run_campaign(c: &SimCampaign) -> Result<PathBundle> {
    c.validate()?;
    let times = c.grid();
    let states = sample_paths(&c.ou, &c.x0, &times, c.paths, c.seed, c.exec)
        .map_err(|e| e.context("sampling residual paths"))?;
    let n = c.ou.dim();
    let mut cells = Vec::with_capacity(c.cells.len());
    for cell in &c.cells {
        let label = cell.slug();
        log::info!("running {label}");
        let p = perturb_p(&c.p, cell.a_perturb, c.seed)?;
        let policy = compile_cell(c, cell, &p).map_err(|e| e.context(format!("strategy {label}")))?;
        let outcomes = par::map_indexed(c.paths, c.exec, |i| {
            simulate_path(&policy, states.path(i), &times, cell.rate, &p, c.initial_wealth)
        });
        for (i, o) in outcomes.iter().enumerate() {
            if let Some(l) = o.wealth.iter().position(|w| !w.is_finite()) {
                return Err(Error::degenerate(format!("non-finite wealth at t = {}", times[l]))
                    .context(format!("strategy {label}, path {i}")));
            }
        }
        let terminal: Vec<f64> = outcomes.iter().map(|o| *o.wealth.last().unwrap()).collect();
        let stats = TerminalStats::compute(&terminal, c.histogram_bins)?;
        cells.push(CellResult {
            spec: cell.clone(),
            p,
            outcomes,
            stats,
        });
        debug_assert_eq!(states.dim(), n);
    }
    Ok(PathBundle { times, states, cells })
}
