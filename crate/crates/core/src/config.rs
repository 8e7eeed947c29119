//! JSON run configuration. Unknown keys are rejected at every level.
//!
//! ```json
//! {
//!   "seed": 42,
//!   "n_assets": 100,
//!   "params": "paper",
//!   "horizon": 20.0,
//!   "steps": 40,
//!   "paths": 1000,
//!   "strategies": {
//!     "exp": { "gammas": [1, 2, 3, 4], "rates": [0.0, 0.02] },
//!     "mv_tcost": { "costs": [{ "lambda": 0.1 }, { "lambda": 1.0 }] }
//!   }
//! }
//! ```
//!
//! `params` is `"paper"` (random draw from `param_seed`, default `seed`), an
//! inline `{"A", "mu", "sigma"}` document or `{"file": "<path>"}`. The
//! capital vector comes from `p`, from `factor_model` (inline or file), or
//! defaults to ones. Relative file paths are resolved against the config's
//! directory. When `strategies` is absent every family runs on its default
//! grid; when present only the listed families run.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::factorbasis::{build_basis, FactorModel, FactorModelDoc};
use crate::frictions::{CostSpec, PositionScheme};
use crate::oumodel::{OuParams, OuParamsDoc};
use crate::par::Execution;
use crate::simharness::{generate_paper_params, CellSpec, Family, SimCampaign};
use crate::Vector;

const DEFAULT_GAMMAS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
const DEFAULT_RATE: f64 = 0.02;

/// An inline document or a reference to a JSON file holding it.
#[derive(Debug, Clone, PartialEq)]
pub enum Source<T> {
    Inline(T),
    File(PathBuf),
}

impl<T: DeserializeOwned> Source<T> {
    fn from_value(v: serde_json::Value) -> std::result::Result<Self, serde_json::Error> {
        if let Some(obj) = v.as_object() {
            if obj.len() == 1 {
                if let Some(f) = obj.get("file") {
                    let path: PathBuf = serde_json::from_value(f.clone())?;
                    return Ok(Source::File(path));
                }
            }
        }
        Ok(Source::Inline(serde_json::from_value(v)?))
    }

}

impl<T: DeserializeOwned + Clone> Source<T> {
    fn load(&self, base: &Path, what: &str) -> Result<T> {
        match self {
            Source::Inline(doc) => Ok(doc.clone()),
            Source::File(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::from(e).context(format!("{what}: reading {}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::from(e).context(format!("{what}: {}", path.display())))
            }
        }
    }
}

impl<T: Serialize> Serialize for Source<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Source::Inline(doc) => doc.serialize(s),
            Source::File(p) => {
                #[derive(Serialize)]
                struct F<'a> {
                    file: &'a Path,
                }
                F { file: p }.serialize(s)
            }
        }
    }
}

impl<'de, T: DeserializeOwned> Deserialize<'de> for Source<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        Source::from_value(v).map_err(serde::de::Error::custom)
    }
}

/// Where the residual-process parameters come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamsSource {
    /// Random draw: diagonal `A`, uniform `σ`, `μ = 0`.
    Paper,
    Given(Source<OuParamsDoc>),
}

impl Serialize for ParamsSource {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ParamsSource::Paper => s.serialize_str("paper"),
            ParamsSource::Given(src) => src.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for ParamsSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::String(s) if s == "paper" => Ok(ParamsSource::Paper),
            serde_json::Value::String(s) => Err(serde::de::Error::custom(format!(
                "unknown parameter recipe {s:?}, expected \"paper\""
            ))),
            v => Source::from_value(v).map(ParamsSource::Given).map_err(serde::de::Error::custom),
        }
    }
}

fn default_gammas() -> Vec<f64> {
    DEFAULT_GAMMAS.to_vec()
}

fn default_rate() -> Vec<f64> {
    vec![DEFAULT_RATE]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpGrid {
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "ExpGrid::default_rates")]
    pub rates: Vec<f64>,
}

impl ExpGrid {
    fn default_rates() -> Vec<f64> {
        vec![0.0, DEFAULT_RATE]
    }
}

impl Default for ExpGrid {
    fn default() -> Self {
        Self {
            gammas: default_gammas(),
            rates: Self::default_rates(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MvGrid {
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_rate")]
    pub rates: Vec<f64>,
}

impl Default for MvGrid {
    fn default() -> Self {
        Self {
            gammas: default_gammas(),
            rates: default_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DollarGrid {
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "DollarGrid::default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_rate")]
    pub rates: Vec<f64>,
}

impl DollarGrid {
    fn default_alphas() -> Vec<f64> {
        vec![0.0, 20.0, 50.0]
    }
}

impl Default for DollarGrid {
    fn default() -> Self {
        Self {
            gammas: default_gammas(),
            alphas: Self::default_alphas(),
            rates: default_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostGrid {
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "CostGrid::default_costs")]
    pub costs: Vec<CostSpec>,
    #[serde(default = "default_rate")]
    pub rates: Vec<f64>,
}

impl CostGrid {
    fn default_costs() -> Vec<CostSpec> {
        [0.1, 0.5, 1.0].into_iter().map(CostSpec::lambda).collect()
    }
}

impl Default for CostGrid {
    fn default() -> Self {
        Self {
            gammas: default_gammas(),
            costs: Self::default_costs(),
            rates: default_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp: Option<ExpGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mv: Option<MvGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mv_dollar: Option<DollarGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mv_tcost: Option<CostGrid>,
}

impl Default for StrategyGrid {
    fn default() -> Self {
        Self {
            exp: Some(ExpGrid::default()),
            mv: Some(MvGrid::default()),
            mv_dollar: Some(DollarGrid::default()),
            mv_tcost: Some(CostGrid::default()),
        }
    }
}

/// Reruns a few families with `p = p_base + a·u`, `u ~ U[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationGrid {
    #[serde(default = "PerturbationGrid::default_scales")]
    pub scales: Vec<f64>,
    #[serde(default = "PerturbationGrid::default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "PerturbationGrid::default_cost")]
    pub cost: CostSpec,
    #[serde(default = "PerturbationGrid::default_rate")]
    pub rate: f64,
    #[serde(default = "PerturbationGrid::default_families")]
    pub families: Vec<Family>,
}

impl PerturbationGrid {
    fn default_scales() -> Vec<f64> {
        vec![0.0, 1.0, 2.0, 4.0, 8.0]
    }
    fn default_gamma() -> f64 {
        1.0
    }
    fn default_cost() -> CostSpec {
        CostSpec::lambda(1.0)
    }
    fn default_rate() -> f64 {
        DEFAULT_RATE
    }
    fn default_families() -> Vec<Family> {
        vec![Family::Exp, Family::MvDollar, Family::MvTcost]
    }
}

impl Default for PerturbationGrid {
    fn default() -> Self {
        Self {
            scales: Self::default_scales(),
            gamma: Self::default_gamma(),
            alpha: 0.0,
            cost: Self::default_cost(),
            rate: Self::default_rate(),
            families: Self::default_families(),
        }
    }
}

fn default_horizon() -> f64 {
    20.0
}
fn default_steps() -> usize {
    40
}
fn default_paths() -> usize {
    1000
}
fn default_true() -> bool {
    true
}
fn default_refine() -> usize {
    10
}
fn default_paths_limit() -> usize {
    50
}
fn default_diagnostic_steps() -> usize {
    200
}
fn default_params() -> ParamsSource {
    ParamsSource::Paper
}
fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Seed of the random parameter draw; defaults to `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_seed: Option<u64>,
    /// Number of assets. Required to match explicit parameters when given;
    /// 100 for the random draw otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_assets: Option<usize>,
    #[serde(default = "default_params")]
    pub params: ParamsSource,
    /// Initial residual state; defaults to `μ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_model: Option<Source<FactorModelDoc>>,
    /// Capital vector, mutually exclusive with `factor_model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub initial_wealth: f64,
    #[serde(default)]
    pub strategies: StrategyGrid,
    /// `null` disables the perturbation runs.
    #[serde(default = "default_perturbation")]
    pub p_perturbation: Option<PerturbationGrid>,
    /// Subtract transaction costs from the cost strategy's wealth.
    #[serde(default = "default_true")]
    pub debit_costs: bool,
    /// Fine ODE sub-steps per simulation step for the cost strategy.
    #[serde(default = "default_refine")]
    pub ode_refine: usize,
    #[serde(default)]
    pub position_scheme: PositionScheme,
    /// Fixed histogram bin count; Freedman-Diaconis when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_bins: Option<usize>,
    /// Paths written to each per-strategy path file.
    #[serde(default = "default_paths_limit")]
    pub paths_limit: usize,
    /// Grid intervals of the optimality-condition scan.
    #[serde(default = "default_diagnostic_steps")]
    pub diagnostic_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_perturbation() -> Option<PerturbationGrid> {
    Some(PerturbationGrid::default())
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

/// Everything a campaign needs, with files loaded and defaults applied.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub ou: Arc<OuParams>,
    pub p: Vector,
    pub x0: Vector,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::from(e).context("config"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("reading config {}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn param_seed(&self) -> u64 {
        self.param_seed.unwrap_or(self.seed)
    }

    /// Loads parameters and the capital vector and checks dimensions.
    pub fn resolve(&self) -> Result<Resolved> {
        let ou = match &self.params {
            ParamsSource::Paper => {
                let n = self.n_assets.unwrap_or(100);
                generate_paper_params(n, self.param_seed())?.0
            }
            ParamsSource::Given(src) => {
                let doc: OuParamsDoc = load_source(src, &self.base_dir, "params")?;
                let ou = OuParams::from_doc(&doc).map_err(|e| e.context("params"))?;
                if let Some(n) = self.n_assets {
                    if n != ou.dim() {
                        return Err(Error::invalid(format!(
                            "n_assets = {n} but params have dimension {}",
                            ou.dim()
                        )));
                    }
                }
                ou
            }
        };
        let n = ou.dim();
        let p = match (&self.p, &self.factor_model) {
            (Some(_), Some(_)) => return Err(Error::invalid("give either p or factor_model, not both")),
            (Some(p), None) => {
                if p.len() != n {
                    return Err(Error::invalid(format!("p has length {}, expected {n}", p.len())));
                }
                Vector::from_column_slice(p)
            }
            (None, Some(src)) => {
                let doc: FactorModelDoc = load_source(src, &self.base_dir, "factor_model")?;
                let fm = FactorModel::from_doc(&doc).map_err(|e| e.context("factor_model"))?;
                if fm.n_assets() != n {
                    return Err(Error::invalid(format!(
                        "factor model has {} assets, expected {n}",
                        fm.n_assets()
                    )));
                }
                build_basis(&fm).capital().clone()
            }
            (None, None) => Vector::from_element(n, 1.0),
        };
        let x0 = match &self.x0 {
            Some(x) if x.len() != n => {
                return Err(Error::invalid(format!("x0 has length {}, expected {n}", x.len())));
            }
            Some(x) => Vector::from_column_slice(x),
            None => ou.mu().clone(),
        };
        if p.iter().chain(x0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("p and x0 must be finite"));
        }
        Ok(Resolved {
            ou: Arc::new(ou),
            p,
            x0,
        })
    }

    /// Strategy cells in a fixed order, optionally restricted to one family.
    /// Perturbation cells that duplicate a grid cell are dropped.
    pub fn cells(&self, only: Option<Family>) -> Vec<CellSpec> {
        let mut cells = Vec::new();
        let s = &self.strategies;
        if let Some(g) = &s.exp {
            for &r in &g.rates {
                for &gamma in &g.gammas {
                    cells.push(CellSpec::new(Family::Exp, gamma, r));
                }
            }
        }
        if let Some(g) = &s.mv {
            for &r in &g.rates {
                for &gamma in &g.gammas {
                    cells.push(CellSpec::new(Family::Mv, gamma, r));
                }
            }
        }
        if let Some(g) = &s.mv_dollar {
            for &r in &g.rates {
                for &alpha in &g.alphas {
                    for &gamma in &g.gammas {
                        let mut c = CellSpec::new(Family::MvDollar, gamma, r);
                        c.alpha = alpha;
                        cells.push(c);
                    }
                }
            }
        }
        if let Some(g) = &s.mv_tcost {
            for &r in &g.rates {
                for (k, cost) in g.costs.iter().enumerate() {
                    for &gamma in &g.gammas {
                        cells.push(cost_cell(gamma, r, cost, k));
                    }
                }
            }
        }
        if let Some(pg) = &self.p_perturbation {
            let families: BTreeSet<Family> = pg.families.iter().copied().collect();
            for f in families {
                for &a in &pg.scales {
                    let mut c = match f {
                        Family::MvTcost => cost_cell(pg.gamma, pg.rate, &pg.cost, 0),
                        _ => CellSpec::new(f, pg.gamma, pg.rate),
                    };
                    if f == Family::MvDollar {
                        c.alpha = pg.alpha;
                    }
                    c.a_perturb = a;
                    if !cells.contains(&c) {
                        cells.push(c);
                    }
                }
            }
        }
        cells.retain(|c| only.is_none_or(|f| c.family == f));
        cells
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("steps must be positive"));
        }
        if self.paths == 0 {
            return Err(Error::invalid("paths must be positive"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.ode_refine == 0 {
            return Err(Error::invalid("ode_refine must be positive"));
        }
        if self.diagnostic_steps < 2 {
            return Err(Error::invalid("diagnostic_steps must be at least 2"));
        }
        if let Some(pg) = &self.p_perturbation {
            if let Some(a) = pg.scales.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
                return Err(Error::invalid(format!("perturbation scale must be >= 0, got {a}")));
            }
        }
        Ok(())
    }

    pub fn build_campaign(&self, only: Option<Family>) -> Result<SimCampaign> {
        self.validate()?;
        let r = self.resolve()?;
        let cells = self.cells(only);
        if cells.is_empty() {
            return Err(Error::invalid("no strategies selected"));
        }
        let mut c = SimCampaign::new(r.ou, r.p, self.horizon, self.steps, self.paths, self.seed);
        c.x0 = r.x0;
        c.initial_wealth = self.initial_wealth;
        c.cells = cells;
        c.debit_costs = self.debit_costs;
        c.ode_refine = self.ode_refine;
        c.position_scheme = self.position_scheme;
        c.histogram_bins = self.histogram_bins;
        c.exec = Execution::Parallel.available();
        Ok(c)
    }

    /// Self-contained copy: referenced files are inlined, and the output
    /// directory is dropped so the echo does not depend on where a run went.
    pub fn echo(&self) -> Result<Self> {
        let mut e = self.clone();
        if let ParamsSource::Given(src @ Source::File(_)) = &self.params {
            e.params = ParamsSource::Given(Source::Inline(load_source(src, &self.base_dir, "params")?));
        }
        if let Some(src @ Source::File(_)) = &self.factor_model {
            e.factor_model = Some(Source::Inline(load_source(src, &self.base_dir, "factor_model")?));
        }
        e.output = None;
        e.base_dir = PathBuf::new();
        Ok(e)
    }
}

fn cost_cell(gamma: f64, rate: f64, cost: &CostSpec, k: usize) -> CellSpec {
    let mut c = CellSpec::new(Family::MvTcost, gamma, rate);
    c.cost = Some(cost.clone());
    if matches!(cost, CostSpec::Matrix(_)) {
        c.cost_index = Some(k);
    }
    c
}

fn load_source<T: DeserializeOwned + Clone>(src: &Source<T>, base: &Path, what: &str) -> Result<T> {
    src.load(base, what)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_reference_grids() {
        let cfg = RunConfig::default();
        assert_eq!((cfg.horizon, cfg.steps, cfg.paths), (20.0, 40, 1000));
        assert!(cfg.debit_costs);
        let cells = cfg.cells(None);
        let count = |f| cells.iter().filter(|c| c.family == f).count();
        // 8 + 1·4 exp, 4 mv, 12 + 4 dollar, 12 + 4 cost
        assert_eq!(count(Family::Exp), 8 + 4);
        assert_eq!(count(Family::Mv), 4);
        assert_eq!(count(Family::MvDollar), 12 + 4);
        assert_eq!(count(Family::MvTcost), 12 + 4);
        let perturbed: Vec<_> = cells.iter().filter(|c| c.a_perturb > 0.0).collect();
        assert!(perturbed.iter().all(|c| c.gamma == 1.0 && c.rate == 0.02 && c.alpha == 0.0));
        assert!(perturbed
            .iter()
            .filter(|c| c.family == Family::MvTcost)
            .all(|c| c.lambda() == Some(1.0)));
        let slugs: BTreeSet<String> = cells.iter().map(CellSpec::slug).collect();
        assert_eq!(slugs.len(), cells.len());
        assert!(cfg.cells(Some(Family::Mv)).iter().all(|c| c.family == Family::Mv));
    }

    #[test]
    fn unknown_keys_rejected() {
        for bad in [
            r#"{"sead": 1}"#,
            r#"{"strategies": {"exp": {"gamma": [1]}}}"#,
            r#"{"strategies": {"expo": {}}}"#,
            r#"{"p_perturbation": {"scale": [1]}}"#,
            r#"{"params": {"A": [1], "mu": [0], "sigma": [1], "B": 2}}"#,
            r#"{"params": "papr"}"#,
        ] {
            let err = RunConfig::from_json(bad).unwrap_err().to_string();
            assert!(err.starts_with("config"), "{err}");
        }
    }

    #[test]
    fn listed_families_only() {
        let cfg = RunConfig::from_json(
            r#"{"strategies": {"mv": {"gammas": [2]}}, "p_perturbation": null}"#,
        )
        .unwrap();
        let cells = cfg.cells(None);
        assert_eq!(cells, vec![CellSpec::new(Family::Mv, 2.0, 0.02)]);
    }

    #[test]
    fn inline_and_file_sources() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("ou.json"),
            r#"{"A": [[0.5]], "mu": [0.1], "sigma": [[0.3]]}"#,
        )
        .unwrap();
        std::fs::write(
            dir.path().join("fm.json"),
            r#"{"n_assets": 1, "n_factors": 1, "loadings": [0.5], "regression": [0.4]}"#,
        )
        .unwrap();
        let cfg_path = dir.path().join("run.json");
        std::fs::write(
            &cfg_path,
            r#"{"params": {"file": "ou.json"}, "factor_model": {"file": "fm.json"}, "output": "out"}"#,
        )
        .unwrap();
        let cfg = RunConfig::load(&cfg_path).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.ou.dim(), 1);
        assert!((r.p[0] - 0.8).abs() < 1e-15);
        assert_eq!(r.x0[0], 0.1);

        let echo = cfg.echo().unwrap();
        assert!(matches!(echo.params, ParamsSource::Given(Source::Inline(_))));
        assert!(echo.output.is_none());
        let text = serde_json::to_string(&echo).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, echo);
        let r2 = back.resolve().unwrap();
        assert_eq!(r2.p, r.p);
        assert_eq!(r2.ou.a(), r.ou.a());

        std::fs::remove_file(dir.path().join("ou.json")).unwrap();
        let err = cfg.resolve().unwrap_err().to_string();
        assert!(err.contains("ou.json"), "{err}");
    }

    #[test]
    fn dimension_and_value_checks() {
        let base = r#""params": {"A": [0.5], "mu": [0], "sigma": [0.3]}"#;
        for bad in [
            format!(r#"{{{base}, "n_assets": 2}}"#),
            format!(r#"{{{base}, "p": [1, 1]}}"#),
            format!(r#"{{{base}, "x0": [1, 1]}}"#),
            format!(r#"{{{base}, "p": [1], "factor_model": {{"n_assets": 1, "n_factors": 0, "loadings": [], "regression": []}}}}"#),
        ] {
            assert!(RunConfig::from_json(&bad).unwrap().resolve().is_err(), "{bad}");
        }
        for bad in [
            format!(r#"{{{base}, "steps": 0}}"#),
            format!(r#"{{{base}, "horizon": -1}}"#),
            format!(r#"{{{base}, "p_perturbation": {{"scales": [-1]}}}}"#),
            format!(r#"{{{base}, "strategies": {{}}, "p_perturbation": null}}"#),
        ] {
            let cfg = RunConfig::from_json(&bad).unwrap();
            assert!(cfg.build_campaign(None).is_err(), "{bad}");
        }
        let singular = r#"{"params": {"A": [[1, 0], [0, 1]], "mu": [0, 0], "sigma": [[1, 1], [1, 1]]}}"#;
        let err = RunConfig::from_json(singular).unwrap().resolve().unwrap_err().to_string();
        assert!(err.contains("sigma*sigma'"), "{err}");
    }

    #[test]
    fn recipe_params_follow_param_seed() {
        let a = RunConfig::from_json(r#"{"n_assets": 3, "seed": 1}"#).unwrap().resolve().unwrap();
        let b = RunConfig::from_json(r#"{"n_assets": 3, "seed": 2, "param_seed": 1}"#)
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(a.ou.sigma(), b.ou.sigma());
        assert_eq!(a.p, Vector::from_element(3, 1.0));
    }
}
