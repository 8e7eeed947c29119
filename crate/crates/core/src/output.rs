//! Run artifacts and their loaders.
//!
//! * `terminal_wealth.csv`: `strategy_id,gamma,alpha,lambda,a_perturb,path_id,W_T`,
//!   one row per cell and path (`lambda` is empty when not applicable);
//! * `paths_<slug>.csv`: `path_id,t,W,pi1` for the first paths of a cell;
//! * `stats.json`: cell metadata and terminal-wealth statistics;
//! * `manifest.json`: seed, versions, the effective config and the verification scan.
//!
//! Writers are deterministic (no timestamps, fixed ordering, shortest
//! round-trip float formatting), so identical runs give identical bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::frictionless::VerificationReport;
use crate::simharness::{CellResult, Family, PathBundle, TerminalStats};

pub const TERMINAL_FILE: &str = "terminal_wealth.csv";
pub const STATS_FILE: &str = "stats.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL_NAME: &str = "statarb";

pub fn paths_file_name(slug: &str) -> String {
    format!("paths_{slug}.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalRow {
    pub strategy_id: String,
    pub gamma: f64,
    pub alpha: f64,
    pub lambda: Option<f64>,
    pub a_perturb: f64,
    pub path_id: usize,
    #[serde(rename = "W_T")]
    pub w_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub path_id: usize,
    pub t: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub pi1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellStats {
    pub strategy_id: String,
    pub family: Family,
    pub gamma: f64,
    pub alpha: f64,
    pub lambda: Option<f64>,
    pub rate: f64,
    pub a_perturb: f64,
    pub paths_file: String,
    pub stats: TerminalStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsDoc {
    pub cells: Vec<CellStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    /// Package name to version.
    pub versions: BTreeMap<String, String>,
    pub seed: u64,
    pub param_seed: u64,
    /// Strategy filter applied on the command line, if any.
    pub strategy_filter: Option<Family>,
    /// Effective configuration with overrides applied and files inlined;
    /// running it again reproduces every artifact.
    pub config: RunConfig,
    pub files: Vec<String>,
    pub verification: Option<VerificationReport>,
}

impl Manifest {
    pub fn new(config: RunConfig, strategy_filter: Option<Family>) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert(env!("CARGO_PKG_NAME").to_string(), env!("CARGO_PKG_VERSION").to_string());
        Self {
            tool: TOOL_NAME.to_string(),
            versions,
            seed: config.seed,
            param_seed: config.param_seed(),
            strategy_filter,
            config,
            files: Vec::new(),
            verification: None,
        }
    }
}

fn io_context(e: impl Into<Error>, path: &Path) -> Error {
    e.into().context(path.display().to_string())
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_context(e, path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        w.serialize(row).map_err(|e| io_context(e, path))?;
    }
    w.flush().map_err(|e| io_context(e, path))
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_context(e, path))?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(|e| io_context(e, path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| io_context(e, path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_context(e, path))?;
    w.write_all(b"\n").map_err(|e| io_context(e, path))?;
    w.flush().map_err(|e| io_context(e, path))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_context(e, path))?;
    serde_json::from_str(&text).map_err(|e| io_context(e, path))
}

pub fn terminal_rows(cell: &CellResult) -> impl Iterator<Item = TerminalRow> + '_ {
    let id = cell.spec.strategy_id();
    let lambda = cell.spec.lambda();
    cell.outcomes.iter().enumerate().map(move |(i, o)| TerminalRow {
        strategy_id: id.clone(),
        gamma: cell.spec.gamma,
        alpha: cell.spec.alpha,
        lambda,
        a_perturb: cell.spec.a_perturb,
        path_id: i,
        w_t: *o.wealth.last().expect("non-empty path"),
    })
}

pub fn path_rows<'a>(cell: &'a CellResult, times: &'a [f64], limit: usize) -> impl Iterator<Item = PathRow> + 'a {
    cell.outcomes.iter().take(limit).enumerate().flat_map(move |(i, o)| {
        times.iter().enumerate().map(move |(l, &t)| PathRow {
            path_id: i,
            t,
            w: o.wealth[l],
            pi1: o.pi1[l],
        })
    })
}

pub fn cell_stats(cell: &CellResult) -> CellStats {
    CellStats {
        strategy_id: cell.spec.strategy_id(),
        family: cell.spec.family,
        gamma: cell.spec.gamma,
        alpha: cell.spec.alpha,
        lambda: cell.spec.lambda(),
        rate: cell.spec.rate,
        a_perturb: cell.spec.a_perturb,
        paths_file: paths_file_name(&cell.spec.slug()),
        stats: cell.stats.clone(),
    }
}

/// Writes every artifact of a run into `dir` (created if needed) and
/// returns the file names in writing order; the manifest comes last.
pub fn write_run(dir: &Path, bundle: &PathBundle, paths_limit: usize, mut manifest: Manifest) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| io_context(e, dir))?;
    let mut files = Vec::new();

    write_csv(&dir.join(TERMINAL_FILE), bundle.cells.iter().flat_map(terminal_rows))?;
    files.push(TERMINAL_FILE.to_string());

    for cell in &bundle.cells {
        let name = paths_file_name(&cell.spec.slug());
        write_csv(&dir.join(&name), path_rows(cell, &bundle.times, paths_limit))?;
        files.push(name);
    }

    let stats = StatsDoc {
        cells: bundle.cells.iter().map(cell_stats).collect(),
    };
    write_json(&dir.join(STATS_FILE), &stats)?;
    files.push(STATS_FILE.to_string());

    files.push(MANIFEST_FILE.to_string());
    manifest.files = files.clone();
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(files)
}

pub fn read_terminal(path: &Path) -> Result<Vec<TerminalRow>> {
    read_csv(path)
}

pub fn read_paths(path: &Path) -> Result<Vec<PathRow>> {
    read_csv(path)
}

pub fn read_stats(path: &Path) -> Result<StatsDoc> {
    read_json(path)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    read_json(path)
}

/// Run directory contents, loaded back.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub terminal: Vec<TerminalRow>,
    pub paths: BTreeMap<String, Vec<PathRow>>,
    pub stats: StatsDoc,
    pub manifest: Manifest,
}

pub fn read_run(dir: &Path) -> Result<RunArtifacts> {
    let manifest = read_manifest(&dir.join(MANIFEST_FILE))?;
    let stats = read_stats(&dir.join(STATS_FILE))?;
    let terminal = read_terminal(&dir.join(TERMINAL_FILE))?;
    let mut paths = BTreeMap::new();
    for c in &stats.cells {
        paths.insert(c.paths_file.clone(), read_paths(&dir.join(&c.paths_file))?);
    }
    for f in &manifest.files {
        if !dir.join(f).is_file() {
            return Err(Error::invalid(format!("manifest lists missing file {f}")));
        }
    }
    Ok(RunArtifacts {
        terminal,
        paths,
        stats,
        manifest,
    })
}

/// Output directory from an explicit override or the config.
pub fn output_dir(cli: Option<&Path>, cfg: &RunConfig) -> Result<PathBuf> {
    match (cli, &cfg.output) {
        (Some(p), _) => Ok(p.to_path_buf()),
        (None, Some(p)) => Ok(cfg.base_dir.join(p)),
        (None, None) => Err(Error::invalid("no output directory: pass one or set \"output\" in the config")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frictions::CostSpec;
    use crate::simharness::{run_campaign, CellSpec};

    fn small_run() -> (RunConfig, PathBundle) {
        let cfg = RunConfig::from_json(
            r#"{"seed": 5, "params": {"A": [[0.6, 0.1], [0.0, 0.4]], "mu": [0.1, -0.1], "sigma": [[0.3, 0.05], [0.0, 0.2]]},
                "p": [1.0, 0.5], "horizon": 2.0, "steps": 8, "paths": 12, "paths_limit": 3,
                "strategies": {"exp": {"gammas": [1.5], "rates": [0.02]},
                               "mv_tcost": {"gammas": [2], "costs": [{"lambda": 0.3}, [[0.2, 0.0], [0.0, 0.1]]]}},
                "p_perturbation": null}"#,
        )
        .unwrap();
        let bundle = run_campaign(&cfg.build_campaign(None).unwrap()).unwrap();
        (cfg, bundle)
    }

    #[test]
    fn artifacts_round_trip() {
        let (cfg, bundle) = small_run();
        let dir = tempfile::tempdir().unwrap();
        let files = write_run(dir.path(), &bundle, cfg.paths_limit, Manifest::new(cfg.echo().unwrap(), None)).unwrap();
        assert_eq!(files.len(), 3 + bundle.cells.len());
        let art = read_run(dir.path()).unwrap();

        let expected: Vec<TerminalRow> = bundle.cells.iter().flat_map(terminal_rows).collect();
        assert_eq!(art.terminal, expected);
        assert_eq!(art.terminal.len(), 12 * 3);
        assert_eq!(art.terminal[0].lambda, None);
        assert_eq!(art.terminal[12].lambda, Some(0.3));
        assert_eq!(art.terminal[24].strategy_id, "mv-tcost@r=0.02#c1");

        for cell in &bundle.cells {
            let rows = &art.paths[&paths_file_name(&cell.spec.slug())];
            assert_eq!(rows.len(), 3 * 9);
            let again: Vec<PathRow> = path_rows(cell, &bundle.times, 3).collect();
            assert_eq!(rows, &again);
            assert!(rows.iter().filter(|r| r.t == 0.0).all(|r| r.w == 0.0 && r.pi1 == 0.0));
        }
        assert_eq!(art.stats.cells[1].stats, bundle.cells[1].stats);
        assert_eq!(art.manifest.seed, 5);
        assert_eq!(art.manifest.config, cfg.echo().unwrap());
        assert_eq!(art.manifest.files, files);
    }

    #[test]
    fn rerun_from_manifest_is_byte_identical() {
        let (cfg, bundle) = small_run();
        let a = tempfile::tempdir().unwrap();
        write_run(a.path(), &bundle, cfg.paths_limit, Manifest::new(cfg.echo().unwrap(), None)).unwrap();
        let replay = read_manifest(&a.path().join(MANIFEST_FILE)).unwrap().config;
        let bundle2 = run_campaign(&replay.build_campaign(None).unwrap()).unwrap();
        let b = tempfile::tempdir().unwrap();
        write_run(b.path(), &bundle2, replay.paths_limit, Manifest::new(replay.echo().unwrap(), None)).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for name in names {
            let x = std::fs::read(a.path().join(&name)).unwrap();
            let y = std::fs::read(b.path().join(&name)).unwrap();
            assert!(x == y, "{name:?} differs");
        }
    }

    #[test]
    fn lambda_column_is_blank_when_not_applicable() {
        let mut c = CellSpec::new(Family::MvDollar, 1.0, 0.0);
        c.alpha = 20.0;
        let row = TerminalRow {
            strategy_id: c.strategy_id(),
            gamma: c.gamma,
            alpha: c.alpha,
            lambda: c.lambda(),
            a_perturb: 0.0,
            path_id: 3,
            w_t: -0.125,
        };
        let mut w = csv::Writer::from_writer(vec![]);
        w.serialize(&row).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text, "strategy_id,gamma,alpha,lambda,a_perturb,path_id,W_T\nmv-dollar@r=0,1.0,20.0,,0.0,3,-0.125\n");
        c.cost = Some(CostSpec::lambda(0.5));
        assert_eq!(c.lambda(), Some(0.5));
    }

    #[test]
    fn output_dir_resolution() {
        let mut cfg = RunConfig::default();
        assert!(output_dir(None, &cfg).is_err());
        cfg.base_dir = PathBuf::from("/cfg");
        cfg.output = Some(PathBuf::from("out"));
        assert_eq!(output_dir(None, &cfg).unwrap(), PathBuf::from("/cfg/out"));
        assert_eq!(output_dir(Some(Path::new("x")), &cfg).unwrap(), PathBuf::from("x"));
    }
}
