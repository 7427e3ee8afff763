//! Run configuration: JSON, unknown keys rejected, every default resolved
//! explicitly so the manifest can echo it.

use std::path::{Path, PathBuf};

use degenspec::potentials::GaussianTerm;
use degenspec::symbols::Growth;
use degenspec::{GridSpec, KineticSymbol, Potential, RadialTable};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub symbol: SymbolConfig,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub grids: GridsConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolKind {
    Bcs,
    Roton,
    CustomRadial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub kind: SymbolKind,
    pub n: usize,
    /// Exponent; fixed to 2 for the roton.
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub p0: Option<f64>,
    #[serde(default)]
    pub mass: Option<f64>,
    /// Offset `Δ` (roton only).
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default)]
    pub tau: Option<f64>,
    /// Growth exponent `s` of `T` at infinity.
    #[serde(default)]
    pub s: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Gaussian,
    GaussianMixture,
    Tabulated,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub terms: Option<Vec<TermConfig>>,
    /// CSV `p_radius,re_vhat[,im_vhat]`, relative to the config file.
    #[serde(default)]
    pub table: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsConfig {
    pub surface_resolution: Option<usize>,
    pub e_min: Option<f64>,
    pub cutoff: Option<f64>,
    pub shells: Option<usize>,
    pub angular: Option<usize>,
    pub ratio: Option<f64>,
    pub nodes_per_shell: Option<usize>,
    pub disk_nodes: Option<usize>,
    pub outer_panel_width: Option<f64>,
    pub outer_nodes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricConfig {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub lambda_list: Option<Vec<f64>>,
    pub geometric: Option<GeometricConfig>,
    pub index: Option<usize>,
    pub eigen_count: Option<usize>,
    /// Largest accepted `|μ_i(e) - 1|` at a root.
    pub bisection_tol: Option<f64>,
    pub e_sequence: Option<Vec<f64>>,
    pub second_order: Option<bool>,
    pub eigenvectors: Option<bool>,
    pub direct_check: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

/// A configuration with every default filled in.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub symbol: KineticSymbol,
    pub potential: Potential,
    pub surface_resolution: usize,
    pub grid: GridSpec,
    pub lambdas: Vec<f64>,
    pub index: usize,
    pub eigen_count: usize,
    pub bisection_tol: f64,
    pub e_sequence: Vec<f64>,
    pub second_order: bool,
    pub eigenvectors: bool,
    pub direct_check: bool,
    pub formats: Vec<Format>,
    pub directory: Option<PathBuf>,
}

impl Resolved {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("line {} column {}: {e}", e.line(), e.column())))
}

pub fn load(path: &Path) -> Result<(RunConfig, Resolved), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let resolved = cfg.resolve(path.parent().unwrap_or(Path::new(".")))?;
    Ok((cfg, resolved))
}

fn need<T: Copy>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing required field {what}")))
}

fn cfg_err(e: degenspec::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn resolve(&self, base: &Path) -> Result<Resolved, CliError> {
        let s = &self.symbol;
        let mut symbol = match s.kind {
            SymbolKind::Bcs => KineticSymbol::bcs(s.n, need(s.mu, "symbol.mu")?, s.r.unwrap_or(1.0)),
            SymbolKind::Roton => {
                if s.r.is_some_and(|r| r != 2.0) {
                    return Err(CliError::Config("the roton symbol has r = 2".into()));
                }
                KineticSymbol::roton(s.n, need(s.p0, "symbol.p0")?, need(s.mass, "symbol.mass")?, need(s.delta, "symbol.delta")?)
            }
            SymbolKind::CustomRadial => KineticSymbol::custom_radial(
                s.n,
                s.coefficients.clone().ok_or_else(|| CliError::Config("missing required field symbol.coefficients".into()))?,
                s.r.unwrap_or(1.0),
            ),
        }
        .map_err(cfg_err)?;
        if s.kind != SymbolKind::Roton && s.delta.is_some_and(|d| d != 0.0) {
            return Err(CliError::Config("symbol.delta applies to the roton only".into()));
        }
        if let Some(tau) = s.tau {
            symbol = symbol.with_tau(tau).map_err(cfg_err)?;
        }
        if let Some(exp) = s.s {
            if !(exp > 0.0) {
                return Err(CliError::Config(format!("symbol.s must be positive, got {exp}")));
            }
            let growth = Growth { s: exp, ..symbol.growth };
            symbol = symbol.with_growth(growth);
        }
        symbol.validate().map_err(cfg_err)?;

        let p = &self.potential;
        let potential = match p.kind {
            PotentialKind::Gaussian => {
                Potential::gaussian(need(p.amplitude, "potential.amplitude")?, need(p.width, "potential.width")?)
                    .map_err(cfg_err)?
            }
            PotentialKind::GaussianMixture => Potential::GaussianMixture {
                terms: p
                    .terms
                    .as_ref()
                    .ok_or_else(|| CliError::Config("missing required field potential.terms".into()))?
                    .iter()
                    .map(|t| GaussianTerm { amplitude: t.amplitude, width: t.width })
                    .collect(),
            },
            PotentialKind::Tabulated => {
                let rel = p.table.as_ref().ok_or_else(|| CliError::Config("missing required field potential.table".into()))?;
                Potential::Tabulated { table: RadialTable::from_csv_path(&base.join(rel)).map_err(cfg_err)? }
            }
            PotentialKind::Zero => Potential::zero(),
        };
        potential.validate().map_err(cfg_err)?;

        let g = &self.grids;
        let d = GridSpec::default();
        let grid = GridSpec {
            e_min: g.e_min.unwrap_or(d.e_min),
            cutoff: g.cutoff.unwrap_or(d.cutoff),
            shells: g.shells.unwrap_or(d.shells),
            angular: g.angular.unwrap_or(d.angular),
            ratio: g.ratio.unwrap_or(d.ratio),
            nodes_per_shell: g.nodes_per_shell.unwrap_or(d.nodes_per_shell),
            disk_nodes: g.disk_nodes.unwrap_or(d.disk_nodes),
            outer_panel_width: g.outer_panel_width.unwrap_or(d.outer_panel_width),
            outer_nodes: g.outer_nodes.unwrap_or(d.outer_nodes),
        };
        if !(grid.e_min > 0.0 && grid.cutoff > 0.0 && grid.outer_panel_width > 0.0) {
            return Err(CliError::Config("grids.e_min, grids.cutoff and grids.outer_panel_width must be positive".into()));
        }

        let sv = &self.solve;
        let lambdas = match (&sv.lambda_list, &sv.geometric) {
            (Some(_), Some(_)) => return Err(CliError::Config("give solve.lambda_list or solve.geometric, not both".into())),
            (Some(l), None) => l.clone(),
            (None, Some(gm)) => {
                if !(gm.ratio > 0.0 && gm.ratio < 1.0) || gm.count == 0 {
                    return Err(CliError::Config("solve.geometric needs 0 < ratio < 1 and count >= 1".into()));
                }
                (0..gm.count).map(|j| gm.start * gm.ratio.powi(j as i32)).collect()
            }
            (None, None) => Vec::new(),
        };
        if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(CliError::Config("couplings must be positive".into()));
        }
        let second_order = sv.second_order.unwrap_or(symbol.r < 2.0);
        if second_order && symbol.r >= 2.0 {
            return Err(CliError::Config(format!("W_S is undefined for r >= 2 (r = {})", symbol.r)));
        }
        let index = sv.index.unwrap_or(1);
        if index == 0 {
            return Err(CliError::Config("solve.index starts at 1".into()));
        }
        let bisection_tol = sv.bisection_tol.unwrap_or(1e-8);
        if !(bisection_tol > 0.0) {
            return Err(CliError::Config("solve.bisection_tol must be positive".into()));
        }
        let e_sequence = sv.e_sequence.clone().unwrap_or_else(degenspec::surface_ops::default_e_sequence);
        Ok(Resolved {
            symbol,
            potential,
            surface_resolution: g.surface_resolution.unwrap_or(grid.angular),
            grid,
            lambdas,
            index,
            eigen_count: sv.eigen_count.unwrap_or(8),
            bisection_tol,
            e_sequence,
            second_order,
            eigenvectors: sv.eigenvectors.unwrap_or(false),
            direct_check: sv.direct_check.unwrap_or(false),
            formats: self.output.formats.clone().unwrap_or_else(|| vec![Format::Csv, Format::Json]),
            directory: self.output.directory.clone(),
        })
    }
}
