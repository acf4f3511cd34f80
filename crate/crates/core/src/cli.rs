//! Command-line front end. Every command writes its numerics to files in the
//! output directory and a short summary to standard output.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation failure.

use crate::bound::{self, BoundData, BoundQuery, OptimizeOptions, Preset, Variant, Weight};
use crate::complexity;
use crate::ergostat::{self, Ensemble, Observable};
use crate::error::Error;
use crate::exactgeom::parse_real;
use crate::normlab::{self, DecayOptions, Frame, IndicatorSet, MultiplierSpec, Symbol};
use crate::pamap::{self, Params, PiecewiseAffineMap};
use crate::ulam::{self, UlamMatrix};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

fn real(s: &str) -> Result<f64, String> {
    parse_real(s).map_err(|e| e.to_string())
}

fn key_value(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}

#[derive(Parser, Debug)]
#[command(name = "anisolab", version, about = "Piecewise hyperbolic maps: complexity, spectral bounds, Ulam spectra, anisotropic norms and orbit statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Master seed for randomized steps
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MapSource {
    /// Built-in map name
    #[arg(long, conflicts_with = "file", required_unless_present = "file")]
    pub builtin: Option<String>,
    /// JSON map file
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Built-in parameter, repeatable
    #[arg(long = "param", value_parser = key_value, requires = "builtin")]
    pub params: Vec<(String, String)>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Map files and validation
    Map {
        #[command(subcommand)]
        cmd: MapCmd,
        #[command(flatten)]
        common: Common,
    },
    /// Complexity growth table
    Complexity {
        #[command(flatten)]
        map: MapSource,
        #[arg(long = "n-max", default_value_t = 4)]
        n_max: usize,
        #[arg(long, default_value_t = complexity::DEFAULT_CELL_BUDGET)]
        budget: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Essential-spectral-radius bound sequences
    Bound {
        #[command(subcommand)]
        cmd: BoundCmd,
        #[command(flatten)]
        common: Common,
    },
    /// Ulam discretization
    Ulam {
        #[command(subcommand)]
        cmd: UlamCmd,
        #[command(flatten)]
        common: Common,
    },
    /// Discrete anisotropic norms
    Norm {
        #[command(subcommand)]
        cmd: NormCmd,
        #[command(flatten)]
        common: Common,
    },
    /// Orbit statistics
    Ergostat {
        #[command(subcommand)]
        cmd: ErgoCmd,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand, Debug)]
pub enum MapCmd {
    Validate {
        #[command(flatten)]
        map: MapSource,
    },
    Export {
        #[command(flatten)]
        map: MapSource,
    },
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BoundParams {
    #[arg(long, default_value = "both")]
    pub variant: String,
    #[arg(long, default_value = "transfer")]
    pub weight: String,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
}

#[derive(Subcommand, Debug)]
pub enum BoundCmd {
    Eval {
        #[command(flatten)]
        map: MapSource,
        #[command(flatten)]
        params: BoundParams,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        p: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "0")]
        t: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "0")]
        tminus: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "0")]
        tplus: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "1")]
        alpha: f64,
    },
    Optimize {
        #[command(flatten)]
        map: MapSource,
        #[command(flatten)]
        params: BoundParams,
        #[arg(long, value_parser = real, default_value = "1/1000")]
        margin: f64,
        #[arg(long, default_value_t = 32)]
        points: usize,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, value_parser = real, default_value = "1")]
        alpha: f64,
    },
    Preset {
        /// contracting_pair, expanding_limit or pinching
        name: String,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        p: Option<f64>,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        tminus: Option<f64>,
        #[arg(long, value_parser = real, allow_hyphen_values = true)]
        eps: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum UlamCmd {
    Run {
        #[command(flatten)]
        map: MapSource,
        /// Cells per axis
        #[arg(long = "N", default_value_t = 16)]
        grid: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, value_parser = real, default_value = "1e-10")]
        tol: f64,
        #[arg(long = "max-iter", default_value_t = 5000)]
        max_iter: usize,
        /// Also run the dense solver (at most 4096 cells)
        #[arg(long)]
        dense: bool,
        /// Depth of the bound placed next to |λ_2|; omitted when 0
        #[arg(long = "bound-n", default_value_t = 0)]
        bound_n: usize,
    },
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct NormParams {
    #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "2")]
    pub p: f64,
    #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "0")]
    pub t: f64,
    #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "0")]
    pub tminus: f64,
    #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "0")]
    pub tplus: f64,
    /// standard, unstable or both
    #[arg(long, default_value = "standard")]
    pub symbol: String,
}

#[derive(Subcommand, Debug)]
pub enum NormCmd {
    ProbeIndicator {
        #[command(flatten)]
        norm: NormParams,
        #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "0")]
        lo: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "1/2")]
        hi: f64,
        /// 1: interval [lo,hi); 2: square [lo,hi)²
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Treat the single 1D direction as stable
        #[arg(long)]
        stable: bool,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024,2048,4096")]
        resolutions: Vec<usize>,
    },
    ProbeDirac {
        #[command(flatten)]
        norm: NormParams,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512")]
        resolutions: Vec<usize>,
    },
    VerifyComposition {
        #[arg(long = "mu-u", value_parser = real, default_value = "1/2")]
        mu_u: f64,
        #[arg(long = "mu-s", value_parser = real, default_value = "2")]
        mu_s: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "0.3")]
        t: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "-0.4")]
        tminus: f64,
        #[arg(long, value_parser = real)]
        c1: Option<f64>,
        #[arg(long, value_parser = real, default_value = "100")]
        radius: f64,
        #[arg(long, default_value_t = 1001)]
        points: usize,
    },
    Decay {
        /// Row-major integer entries of the 2x2 matrix
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "2,1,1,1")]
        matrix: Vec<i64>,
        #[arg(long, value_parser = real, default_value = "2")]
        p: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "0.3")]
        t: f64,
        #[arg(long, value_parser = real, allow_hyphen_values = true, default_value = "-0.4")]
        tminus: f64,
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[arg(long, default_value_t = 1)]
        band: i64,
        #[arg(long = "n-max", default_value_t = 8)]
        n_max: usize,
        #[arg(long, value_parser = real, default_value = "1e-3")]
        threshold: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum ErgoCmd {
    Birkhoff {
        #[command(flatten)]
        map: MapSource,
        #[arg(long, default_value = "cos2pix")]
        f: String,
        /// Iterates per start
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        starts: usize,
        #[arg(long = "burn-in", default_value_t = 100)]
        burn_in: usize,
    },
    Corr {
        #[command(flatten)]
        map: MapSource,
        #[arg(long, default_value = "cos2pix")]
        f: String,
        /// Defaults to `f`
        #[arg(long)]
        g: Option<String>,
        /// Largest lag
        #[arg(long, default_value_t = 20)]
        n: usize,
        /// Iterates per start
        #[arg(long, default_value_t = 100_000)]
        length: usize,
        #[arg(long, default_value_t = 100)]
        starts: usize,
        #[arg(long = "burn-in", default_value_t = 100)]
        burn_in: usize,
    },
}

/// Resolved configuration of one run, written next to its outputs.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    pub options: BTreeMap<String, String>,
    pub seed: u64,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Fail {
    Usage(String),
    Invalid(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidMap(_) | Error::Json(_) | Error::SingularMatrix | Error::DimensionMismatch { .. } => {
                Fail::Invalid(e.to_string())
            }
            _ => Fail::Usage(e.to_string()),
        }
    }
}

type CliResult = std::result::Result<(), Fail>;

struct Output<'a> {
    dir: &'a Path,
    summary: String,
}

impl<'a> Output<'a> {
    fn new(common: &'a Common) -> std::result::Result<Self, Fail> {
        std::fs::create_dir_all(&common.out)
            .map_err(|e| Fail::Usage(format!("cannot create {}: {e}", common.out.display())))?;
        Ok(Self {
            dir: &common.out,
            summary: String::new(),
        })
    }

    fn write(&self, name: &str, text: &str) -> CliResult {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| Fail::Usage(format!("cannot write {}: {e}", path.display())))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Fail::Usage(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    fn line(&mut self, s: impl AsRef<str>) {
        let _ = writeln!(self.summary, "{}", s.as_ref());
    }
}

fn load_map(src: &MapSource) -> std::result::Result<PiecewiseAffineMap, Fail> {
    match (&src.builtin, &src.file) {
        (Some(name), None) => {
            let params: Params = src.params.iter().cloned().collect();
            Ok(pamap::builtin(name, &params)?)
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Fail::Usage(format!("cannot read {}: {e}", path.display())))?;
            pamap::from_json(&text).map_err(|e| Fail::Invalid(format!("{}: {e}", path.display())))
        }
        _ => Err(Fail::Usage("give exactly one of --builtin or --file".into())),
    }
}

fn run_config(command: &str, src: Option<&MapSource>, common: &Common, options: &[(&str, String)]) -> RunConfig {
    RunConfig {
        command: command.to_string(),
        builtin: src.and_then(|s| s.builtin.clone()),
        file: src.and_then(|s| s.file.as_ref().map(|p| p.display().to_string())),
        params: src.map(|s| s.params.iter().cloned().collect()).unwrap_or_default(),
        options: options.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        seed: common.seed,
    }
}

fn require_valid(out: &mut Output, map: &PiecewiseAffineMap) -> CliResult {
    let report = map.validate();
    if report.passed {
        return Ok(());
    }
    out.json("validation.json", &report)?;
    let reasons: Vec<String> = report.failures().iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    Err(Fail::Invalid(format!("map `{}` failed validation: {}", map.name(), reasons.join("; "))))
}

fn cmd_map(cmd: &MapCmd, common: &Common) -> CliResult {
    let mut out = Output::new(common)?;
    match cmd {
        MapCmd::Validate { map } => {
            out.json("run.json", &run_config("map validate", Some(map), common, &[]))?;
            let m = load_map(map)?;
            let report = m.validate();
            out.json("validation.json", &report)?;
            if report.passed {
                out.line(format!("map `{}`: PASS ({} branches)", m.name(), m.branches().len()));
                print!("{}", out.summary);
                Ok(())
            } else {
                let reasons: Vec<String> = report.failures().iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
                Err(Fail::Invalid(format!("map `{}`: FAIL\n  {}", m.name(), reasons.join("\n  "))))
            }
        }
        MapCmd::Export { map } => {
            out.json("run.json", &run_config("map export", Some(map), common, &[]))?;
            let m = load_map(map)?;
            let mut text = pamap::to_json(&m);
            text.push('\n');
            out.write("map.json", &text)?;
            out.line(format!("map `{}` written to {}", m.name(), out.dir.join("map.json").display()));
            print!("{}", out.summary);
            Ok(())
        }
    }
}

fn cmd_complexity(map: &MapSource, n_max: usize, budget: usize, common: &Common) -> CliResult {
    let mut out = Output::new(common)?;
    out.json(
        "run.json",
        &run_config("complexity", Some(map), common, &[("n_max", n_max.to_string()), ("budget", budget.to_string())]),
    )?;
    if n_max == 0 {
        return Err(Fail::Usage("--n-max must be at least 1".into()));
    }
    let m = load_map(map)?;
    let g = complexity::growth(&m, n_max, budget)?;
    out.write("complexity.csv", &g.to_csv())?;
    out.json("complexity.json", &g)?;
    out.line(format!("complexity of `{}` (K = {}):", m.name(), g.k));
    for r in &g.rows {
        out.line(format!("  n={} D_b={} D_e={} J={} cells={}", r.n, r.d_b, r.d_e, r.j, r.cells));
    }
    if g.truncated {
        out.line("  truncated: cell budget exceeded");
    }
    print!("{}", out.summary);
    Ok(())
}

fn variant_weight(p: &BoundParams) -> std::result::Result<(Variant, Weight), Fail> {
    Ok((p.variant.parse()?, p.weight.parse()?))
}

fn cmd_bound(cmd: &BoundCmd, common: &Common) -> CliResult {
    let mut out = Output::new(common)?;
    match cmd {
        BoundCmd::Eval { map, params, p, t, tminus, tplus, alpha } => {
            let opts = [
                ("variant", params.variant.clone()),
                ("weight", params.weight.clone()),
                ("n", params.n.to_string()),
                ("p", p.to_string()),
                ("t", t.to_string()),
                ("tminus", tminus.to_string()),
                ("tplus", tplus.to_string()),
                ("alpha", alpha.to_string()),
            ];
            out.json("run.json", &run_config("bound eval", Some(map), common, &opts))?;
            let (variant, weight) = variant_weight(params)?;
            let m = load_map(map)?;
            require_valid(&mut out, &m)?;
            let q = BoundQuery {
                variant,
                p: *p,
                t: *t,
                t_minus: *tminus,
                t_plus: *tplus,
                alpha: *alpha,
                n: params.n,
                weight,
            };
            let data = BoundData::compute(&m, params.n)?;
            let r = data.evaluate(&q)?;
            out.write("bound_eval.csv", &r.to_csv())?;
            out.json("bound_eval.json", &r)?;
            out.line(format!("B_{} = {:.6} (finite-depth bound sequence)", params.n, r.estimate));
            if !r.admissible {
                out.line("WARNING: parameters are not admissible; the value is the formula only");
            }
        }
        BoundCmd::Optimize { map, params, margin, points, levels, alpha } => {
            let opts = [
                ("variant", params.variant.clone()),
                ("weight", params.weight.clone()),
                ("n", params.n.to_string()),
                ("margin", margin.to_string()),
                ("points", points.to_string()),
                ("levels", levels.to_string()),
                ("alpha", alpha.to_string()),
            ];
            out.json("run.json", &run_config("bound optimize", Some(map), common, &opts))?;
            let (variant, weight) = variant_weight(params)?;
            let m = load_map(map)?;
            require_valid(&mut out, &m)?;
            let data = BoundData::compute(&m, params.n)?;
            let o = OptimizeOptions {
                levels: *levels,
                points: *points,
                margin: *margin,
                alpha: *alpha,
            };
            let r = bound::optimize(&data, variant, weight, params.n, &o)?;
            out.json("bound_optimize.json", &r)?;
            out.line(format!(
                "min B_{} = {:.6} at p={:.4} t={:.4} t-={:.4} t+={:.4} (reduced {:.6})",
                params.n, r.value, r.p, r.t, r.t_minus, r.t_plus, r.reduced
            ));
        }
        BoundCmd::Preset { name, p, tminus, eps } => {
            let mut opts = vec![("name", name.clone())];
            for (k, v) in [("p", p), ("tminus", tminus), ("eps", eps)] {
                if let Some(v) = v {
                    opts.push((k, v.to_string()));
                }
            }
            out.json("run.json", &run_config("bound preset", None, common, &opts))?;
            let preset = bound::preset(name)?;
            let missing = |flag: &str| Fail::Usage(format!("preset `{name}` needs --{flag}"));
            let report = match &preset {
                Preset::ContractingPair { .. } => {
                    let (p, tm) = (p.ok_or_else(|| missing("p"))?, tminus.ok_or_else(|| missing("tminus"))?);
                    let v = preset.contracting_pair(p, tm)?;
                    out.line(format!("contracting_pair(p={p}, t-={tm}) = {v:.4}"));
                    serde_json::json!({"preset": name, "data": preset, "p": p, "t_minus": tm, "value": v})
                }
                Preset::ExpandingLimit { .. } => {
                    let e = eps.ok_or_else(|| missing("eps"))?;
                    let (v, p, t) = preset.expanding_limit(e)?;
                    out.line(format!("expanding_limit(eps={e}) = {v:.6} at p={p:.6} t={t:.6}"));
                    serde_json::json!({"preset": name, "data": preset, "eps": e, "p": p, "t": t, "value": v})
                }
                Preset::Pinching { .. } => {
                    let (p, e) = (p.ok_or_else(|| missing("p"))?, eps.ok_or_else(|| missing("eps"))?);
                    let (a, b) = preset.pinching(p, e)?;
                    out.line(format!("pinching(p={p}, eps={e}) factors = {a:.6}, {b:.6}"));
                    serde_json::json!({"preset": name, "data": preset, "p": p, "eps": e, "factors": [a, b]})
                }
            };
            out.json("preset.json", &report)?;
        }
    }
    print!("{}", out.summary);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_ulam(cmd: &UlamCmd, common: &Common) -> CliResult {
    let mut out = Output::new(common)?;
    let UlamCmd::Run { map, grid, k, tol, max_iter, dense, bound_n } = cmd;
    let opts = [
        ("N", grid.to_string()),
        ("k", k.to_string()),
        ("tol", tol.to_string()),
        ("max_iter", max_iter.to_string()),
        ("dense", dense.to_string()),
        ("bound_n", bound_n.to_string()),
    ];
    out.json("run.json", &run_config("ulam run", Some(map), common, &opts))?;
    let m = load_map(map)?;
    let p = UlamMatrix::build(&m, *grid)?;
    out.write("ulam_matrix.txt", &p.to_coordinate_list())?;
    let spec = ulam::leading_spectrum(&p, *k, *tol, *max_iter)?;
    out.write("ulam_spectrum.csv", &spec.to_csv())?;
    let density = ulam::physical_density(&p, Some(&spec), 1e-12, 100_000)?;
    out.write("ulam_density.csv", &density.to_csv(&p))?;
    let bound_value = if *bound_n > 0 && m.validate().passed {
        let data = BoundData::compute(&m, *bound_n)?;
        Some(bound::optimize(&data, Variant::Both, Weight::Transfer, *bound_n, &OptimizeOptions::default())?.value)
    } else {
        None
    };
    let gap = ulam::gap(&spec, bound_value)?;
    let dense_moduli: Option<Vec<f64>> = if *dense {
        Some(ulam::dense_spectrum(&p)?.iter().take(*k).map(|z| z.norm()).collect())
    } else {
        None
    };
    let uniform_residual = p.exact_fixed_point_residual(&ulam::uniform_masses(&p));
    let report = serde_json::json!({
        "map": m.name(),
        "N": grid,
        "cells": p.size(),
        "row_stochastic": p.is_row_stochastic(),
        "deficient_rows": p.deficient_rows,
        "uniform_fixed_point_residual": crate::exactgeom::format_rational(&uniform_residual),
        "spectrum": spec,
        "dense_moduli": dense_moduli,
        "gap": gap,
        "density": {
            "converged": density.converged,
            "residual": density.residual,
            "iterations": density.iterations,
            "peripheral_count": density.peripheral_count,
            "negative_flag": density.negative_flag,
        },
    });
    out.json("ulam.json", &report)?;
    out.line(format!("Ulam matrix of `{}` on {}^{} cells (discretized proxy)", m.name(), grid, m.dim()));
    for (i, e) in spec.pairs.iter().enumerate() {
        out.line(format!("  lambda_{} = {:.12} {:+.12}i  |.|={:.12} residual={:.1e}", i + 1, e.re, e.im, e.modulus, e.residual));
    }
    if !p.is_row_stochastic() {
        out.line(format!("  WARNING: {} rows do not sum to 1", p.deficient_rows.len()));
    }
    print!("{}", out.summary);
    Ok(())
}

fn multiplier(n: &NormParams, frame: Frame) -> std::result::Result<MultiplierSpec, Fail> {
    let symbol: Symbol = n.symbol.parse()?;
    Ok(MultiplierSpec::new(n.t, n.tminus, frame).with_symbol(symbol, n.tplus))
}

fn norm_options(n: &NormParams) -> Vec<(&'static str, String)> {
    vec![
        ("p", n.p.to_string()),
        ("t", n.t.to_string()),
        ("tminus", n.tminus.to_string()),
        ("tplus", n.tplus.to_string()),
        ("symbol", n.symbol.clone()),
    ]
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn cmd_norm(cmd: &NormCmd, common: &Common) -> CliResult {
    let mut out = Output::new(common)?;
    match cmd {
        NormCmd::ProbeIndicator { norm, lo, hi, dim, stable, resolutions } => {
            let mut opts = norm_options(norm);
            opts.extend([
                ("lo", lo.to_string()),
                ("hi", hi.to_string()),
                ("dim", dim.to_string()),
                ("stable", stable.to_string()),
                ("resolutions", join(resolutions)),
            ]);
            out.json("run.json", &run_config("norm probe-indicator", None, common, &opts))?;
            let (set, frame) = match dim {
                1 if *stable => (IndicatorSet::Interval(*lo, *hi), Frame::axis(0, 1)),
                1 => (IndicatorSet::Interval(*lo, *hi), Frame::axis(1, 0)),
                2 => (IndicatorSet::Rectangle([*lo, *lo], [*hi, *hi]), Frame::axis(1, 1)),
                _ => return Err(Fail::Usage("--dim must be 1 or 2".into())),
            };
            let m = multiplier(norm, frame)?;
            let s = normlab::probe_indicator(&set, norm.p, &m, resolutions)?;
            out.write("norm_indicator.csv", &normlab::series_csv(&s))?;
            out.line("indicator norms (discretized, trend only):");
            for r in &s {
                out.line(format!("  N={} norm={:.6}", r.resolution, r.norm));
            }
        }
        NormCmd::ProbeDirac { norm, dim, resolutions } => {
            let mut opts = norm_options(norm);
            opts.extend([("dim", dim.to_string()), ("resolutions", join(resolutions))]);
            out.json("run.json", &run_config("norm probe-dirac", None, common, &opts))?;
            let frame = match dim {
                1 => Frame::axis(1, 0),
                2 => Frame::axis(1, 1),
                _ => return Err(Fail::Usage("--dim must be 1 or 2".into())),
            };
            let m = multiplier(norm, frame)?;
            let s = normlab::probe_dirac(norm.p, &m, resolutions)?;
            out.write("norm_dirac.csv", &normlab::series_csv(&s))?;
            let increasing = s.windows(2).all(|w| w[1].norm > w[0].norm);
            out.line(format!("Dirac norms (discretized), strictly increasing: {increasing}"));
            for r in &s {
                out.line(format!("  N={} norm={:.6}", r.resolution, r.norm));
            }
        }
        NormCmd::VerifyComposition { mu_u, mu_s, t, tminus, c1, radius, points } => {
            let opts = [
                ("mu_u", mu_u.to_string()),
                ("mu_s", mu_s.to_string()),
                ("t", t.to_string()),
                ("tminus", tminus.to_string()),
                ("c1", c1.map(|c| c.to_string()).unwrap_or_else(|| "default".into())),
                ("radius", radius.to_string()),
                ("points", points.to_string()),
            ];
            out.json("run.json", &run_config("norm verify-composition", None, common, &opts))?;
            let r = normlab::verify_composition_inequality(*mu_u, *mu_s, *t, *tminus, *c1, *radius, *points)?;
            out.json("composition.json", &r)?;
            out.line(format!(
                "C1={:.6} C2={:.6e} residual={:.3e} over {} samples",
                r.c1, r.c2, r.residual, r.samples
            ));
        }
        NormCmd::Decay { matrix, p, t, tminus, grid, band, n_max, threshold } => {
            let opts = [
                ("matrix", matrix.iter().map(i64::to_string).collect::<Vec<_>>().join(",")),
                ("p", p.to_string()),
                ("t", t.to_string()),
                ("tminus", tminus.to_string()),
                ("grid", grid.to_string()),
                ("band", band.to_string()),
                ("n_max", n_max.to_string()),
                ("threshold", threshold.to_string()),
            ];
            out.json("run.json", &run_config("norm decay", None, common, &opts))?;
            if matrix.len() != 4 {
                return Err(Fail::Usage("--matrix needs 4 entries".into()));
            }
            let a = vec![vec![matrix[0], matrix[1]], vec![matrix[2], matrix[3]]];
            let o = DecayOptions {
                grid: *grid,
                p: *p,
                t: *t,
                t_minus: *tminus,
                band: *band,
                n_max: *n_max,
                threshold: *threshold,
                seed: common.seed,
            };
            let r = normlab::decay_rate(&a, &o)?;
            out.write("decay.csv", &r.to_csv())?;
            out.json("decay.json", &r)?;
            out.line(format!(
                "fitted rate {:.6} over n={}..{} (predicted {:.6})",
                r.rate, r.fit_start, r.fit_end, r.predicted
            ));
        }
    }
    print!("{}", out.summary);
    Ok(())
}

fn cmd_ergostat(cmd: &ErgoCmd, common: &Common) -> CliResult {
    let mut out = Output::new(common)?;
    match cmd {
        ErgoCmd::Birkhoff { map, f, n, starts, burn_in } => {
            let opts = [
                ("f", f.clone()),
                ("n", n.to_string()),
                ("starts", starts.to_string()),
                ("burn_in", burn_in.to_string()),
            ];
            out.json("run.json", &run_config("ergostat birkhoff", Some(map), common, &opts))?;
            let m = load_map(map)?;
            let obs = Observable::parse(f, m.dim())?;
            let ens = Ensemble {
                seed: common.seed,
                starts: *starts,
                length: *n,
                burn_in: *burn_in,
            };
            let r = ergostat::birkhoff(&m, &obs, &ens)?;
            out.write("birkhoff.csv", &r.to_csv())?;
            out.json("birkhoff.json", &r)?;
            out.line(format!(
                "{} clusters at {:?}; CLT band {:.3e}; boundary ties {}",
                r.clusters.k, r.clusters.centers, r.clt_band, r.boundary_ties
            ));
        }
        ErgoCmd::Corr { map, f, g, n, length, starts, burn_in } => {
            let g = g.clone().unwrap_or_else(|| f.clone());
            let opts = [
                ("f", f.clone()),
                ("g", g.clone()),
                ("n", n.to_string()),
                ("length", length.to_string()),
                ("starts", starts.to_string()),
                ("burn_in", burn_in.to_string()),
            ];
            out.json("run.json", &run_config("ergostat corr", Some(map), common, &opts))?;
            let m = load_map(map)?;
            let (fo, go) = (Observable::parse(f, m.dim())?, Observable::parse(&g, m.dim())?);
            let ens = Ensemble {
                seed: common.seed,
                starts: *starts,
                length: *length,
                burn_in: *burn_in,
            };
            let r = ergostat::correlation(&m, &fo, &go, &ens, *n)?;
            out.write("corr.csv", &r.to_csv())?;
            out.json("corr.json", &r)?;
            out.line(format!("fit: {:?}; first lag below noise floor: {:?}", r.fit, r.below_floor_at));
        }
    }
    print!("{}", out.summary);
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Map { cmd, common } => cmd_map(cmd, common),
        Command::Complexity { map, n_max, budget, common } => cmd_complexity(map, *n_max, *budget, common),
        Command::Bound { cmd, common } => cmd_bound(cmd, common),
        Command::Ulam { cmd, common } => cmd_ulam(cmd, common),
        Command::Norm { cmd, common } => cmd_norm(cmd, common),
        Command::Ergostat { cmd, common } => cmd_ergostat(cmd, common),
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(Fail::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Fail::Invalid(msg)) => {
            eprintln!("{msg}");
            EXIT_INVALID
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_rational_flags() {
        let cli = Cli::try_parse_from(["anisolab", "bound", "preset", "contracting_pair", "--p", "2", "--tminus", "-1/4"]).unwrap();
        match cli.command {
            Command::Bound { cmd: BoundCmd::Preset { tminus, .. }, .. } => assert_eq!(tminus, Some(-0.25)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn run_config_rejects_unknown_keys() {
        let text = r#"{"command": "x", "options": {}, "seed": 0, "colour": 1}"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
        let ok = r#"{"command": "x", "options": {}, "seed": 0}"#;
        assert!(serde_json::from_str::<RunConfig>(ok).is_ok());
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(["anisolab", "map", "validate"]), EXIT_USAGE);
        assert_eq!(run(["anisolab", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["anisolab", "--help"]), EXIT_OK);
    }
}
