//! Degenerate kinetic symbols `T(p) = |P(p)|^r + Δ` and the quadratures
//! built on their zero set `S`, its level sets `S_t` and the surrounding
//! momentum space.
//!
//! Builtin symbols are radial, so every level set is a union of spheres
//! and all quadratures share a ring layout: a list of rings (radius and
//! polar angle) times a uniform azimuthal rule. That layout is what lets
//! [`crate::linalg::ChannelBasis`] block-diagonalise every kernel matrix.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{composite_gauss_legendre, gauss_legendre, gauss_legendre_on};

/// A momentum-space point; the third component is zero when `dim == 2`.
pub type Point = [f64; 3];

/// Radial profile `P(|p|)` whose zero set is the degeneracy sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RadialProfile {
    /// `P(p) = |p|^2 - mu`.
    Bcs { mu: f64 },
    /// `P(p) = (|p| - p0) / sqrt(2 mass)`.
    Roton { p0: f64, mass: f64 },
    /// `P(p) = sum_k c_k |p|^k`, with a single simple positive root.
    CustomRadial { coefficients: Vec<f64> },
}

impl RadialProfile {
    pub fn value(&self, rho: f64) -> f64 {
        match self {
            RadialProfile::Bcs { mu } => rho * rho - mu,
            RadialProfile::Roton { p0, mass } => (rho - p0) / (2.0 * mass).sqrt(),
            RadialProfile::CustomRadial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, &c| acc * rho + c)
            }
        }
    }

    pub fn derivative(&self, rho: f64) -> f64 {
        match self {
            RadialProfile::Bcs { .. } => 2.0 * rho,
            RadialProfile::Roton { mass, .. } => 1.0 / (2.0 * mass).sqrt(),
            RadialProfile::CustomRadial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &c)| acc * rho + k as f64 * c),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            RadialProfile::Bcs { mu } if !(*mu > 0.0 && mu.is_finite()) => {
                Err(Error::param(format!("bcs needs mu > 0, got {mu}")))
            }
            RadialProfile::Roton { p0, mass } if !(*p0 > 0.0 && *mass > 0.0) => Err(Error::param(
                format!("roton needs p0 > 0 and mass > 0, got p0 = {p0}, mass = {mass}"),
            )),
            RadialProfile::CustomRadial { coefficients } => {
                if coefficients.len() < 2 || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::param("custom-radial needs at least two finite coefficients"));
                }
                if coefficients.last() == Some(&0.0) {
                    return Err(Error::param("custom-radial leading coefficient must be non-zero"));
                }
                self.custom_root().map(|_| ())
            }
            _ => Ok(()),
        }
    }

    /// Cauchy bound on the positive roots of the polynomial profile.
    fn custom_scan_limit(coefficients: &[f64]) -> f64 {
        let lead = coefficients.last().copied().unwrap_or(1.0).abs();
        1.0 + coefficients[..coefficients.len() - 1]
            .iter()
            .map(|c| c.abs() / lead)
            .fold(0.0, f64::max)
    }

    fn custom_root(&self) -> Result<f64> {
        let RadialProfile::CustomRadial { coefficients } = self else {
            unreachable!()
        };
        let limit = Self::custom_scan_limit(coefficients);
        let samples = 20_000;
        let mut roots = Vec::new();
        let mut prev = self.value(0.0);
        for k in 1..=samples {
            let rho = limit * k as f64 / samples as f64;
            let cur = self.value(rho);
            if prev == 0.0 && k > 1 {
                roots.push(limit * (k - 1) as f64 / samples as f64);
            } else if prev * cur < 0.0 {
                let lo = limit * (k - 1) as f64 / samples as f64;
                roots.push(bisect(|x| self.value(x), lo, rho));
            }
            prev = cur;
        }
        match roots.as_slice() {
            [root] if *root > 0.0 => Ok(*root),
            [] => Err(Error::param("custom-radial profile has no positive root")),
            _ => Err(Error::param(format!(
                "custom-radial profile has {} positive roots; only a single sphere is supported",
                roots.len()
            ))),
        }
    }

    /// Radius of the degeneracy sphere `P = 0`.
    pub fn surface_radius(&self) -> f64 {
        match self {
            RadialProfile::Bcs { mu } => mu.sqrt(),
            RadialProfile::Roton { p0, .. } => *p0,
            RadialProfile::CustomRadial { .. } => self.custom_root().expect("validated profile"),
        }
    }

    /// Interval around the surface radius on which `P` is strictly monotone.
    fn monotone_interval(&self) -> (f64, f64) {
        match self {
            RadialProfile::Bcs { .. } | RadialProfile::Roton { .. } => (0.0, f64::INFINITY),
            RadialProfile::CustomRadial { coefficients } => {
                let root = self.surface_radius();
                let limit = Self::custom_scan_limit(coefficients).max(2.0 * root);
                let crit = self.critical_points(limit);
                let lo = crit.iter().copied().filter(|&c| c < root).fold(0.0, f64::max);
                let hi = crit.iter().copied().filter(|&c| c > root).fold(f64::INFINITY, f64::min);
                (lo, hi)
            }
        }
    }

    fn critical_points(&self, limit: f64) -> Vec<f64> {
        let samples = 20_000;
        let mut out = Vec::new();
        let mut prev = self.derivative(0.0);
        for k in 1..=samples {
            let rho = limit * k as f64 / samples as f64;
            let cur = self.derivative(rho);
            if prev * cur < 0.0 {
                let lo = limit * (k - 1) as f64 / samples as f64;
                out.push(bisect(|x| self.derivative(x), lo, rho));
            }
            prev = cur;
        }
        out
    }

    /// Smallest `|P|` over the origin and the critical points of the
    /// profile: the level sets `|P| = t` stay regular for `t` below it.
    pub fn singular_gap(&self) -> f64 {
        match self {
            RadialProfile::Bcs { mu } => *mu,
            RadialProfile::Roton { p0, mass } => p0 / (2.0 * mass).sqrt(),
            RadialProfile::CustomRadial { coefficients } => {
                let limit = Self::custom_scan_limit(coefficients).max(2.0 * self.surface_radius());
                self.critical_points(limit)
                    .into_iter()
                    .map(|c| self.value(c).abs())
                    .fold(self.value(0.0).abs(), f64::min)
            }
        }
    }

    /// Radius on the given side of `S` with `|P(rho)| = t`, if it exists.
    pub fn level_radius(&self, side: Side, t: f64) -> Option<f64> {
        if t == 0.0 {
            return Some(self.surface_radius());
        }
        match (self, side) {
            (RadialProfile::Bcs { mu }, Side::Inner) => (mu - t > 0.0).then(|| (mu - t).sqrt()),
            (RadialProfile::Bcs { mu }, Side::Outer) => Some((mu + t).sqrt()),
            (RadialProfile::Roton { p0, mass }, side) => {
                let rho = p0 + side.sign() * t * (2.0 * mass).sqrt();
                (rho > 0.0).then_some(rho)
            }
            (RadialProfile::CustomRadial { .. }, side) => {
                let root = self.surface_radius();
                let (lo, hi) = self.monotone_interval();
                let g = |x: f64| self.value(x).abs() - t;
                match side {
                    Side::Inner => (g(lo) > 0.0).then(|| bisect(g, lo, root)),
                    Side::Outer => {
                        let mut b = (root * 2.0).max(root + 1.0).min(hi);
                        while g(b) < 0.0 && b < hi && b < 1e6 {
                            b = (2.0 * b).min(hi);
                        }
                        (g(b) >= 0.0).then(|| bisect(g, root, b))
                    }
                }
            }
        }
    }
}

/// Bisection for a sign change of `g` on `[a, b]`.
fn bisect<F: Fn(f64) -> f64>(g: F, mut a: f64, mut b: f64) -> f64 {
    let mut ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Inner,
    Outer,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Inner => -1.0,
            Side::Outer => 1.0,
        }
    }
}

/// Growth data of assumption (iii): `T - Δ >= c1 |p|^s + c2` outside `Ω_τ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Growth {
    pub s: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticSymbol {
    pub dim: usize,
    pub profile: RadialProfile,
    pub r: f64,
    /// Minimum `Δ` of `T`; all spectral work uses `T - Δ`.
    pub offset: f64,
    /// Half-width of the level-set neighbourhood `Ω_τ = {|P| < τ}`.
    pub tau: f64,
    pub growth: Growth,
}

impl KineticSymbol {
    pub fn new(dim: usize, profile: RadialProfile, r: f64, offset: f64) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::param(format!("dimension must be 2 or 3, got {dim}")));
        }
        if !(r >= 1.0 && r.is_finite()) {
            return Err(Error::param(format!("exponent r must satisfy 1 <= r < inf, got {r}")));
        }
        if !(offset >= 0.0 && offset.is_finite()) {
            return Err(Error::param(format!("offset must be >= 0, got {offset}")));
        }
        profile.validate()?;
        let tau = default_tau(&profile);
        let mut sym = KineticSymbol {
            dim,
            profile,
            r,
            offset,
            tau,
            growth: Growth { s: 1.0, c1: 0.0, c2: 0.0 },
        };
        sym.growth = sym.default_growth();
        Ok(sym)
    }

    pub fn bcs(dim: usize, mu: f64, r: f64) -> Result<Self> {
        Self::new(dim, RadialProfile::Bcs { mu }, r, 0.0)
    }

    /// Roton symbol `(|p| - p0)^2 / (2 mass) + Δ`, i.e. exponent 2.
    pub fn roton(dim: usize, p0: f64, mass: f64, offset: f64) -> Result<Self> {
        Self::new(dim, RadialProfile::Roton { p0, mass }, 2.0, offset)
    }

    pub fn custom_radial(dim: usize, coefficients: Vec<f64>, r: f64) -> Result<Self> {
        Self::new(dim, RadialProfile::CustomRadial { coefficients }, r, 0.0)
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::param(format!("tau must be positive, got {tau}")));
        }
        self.tau = tau;
        self.growth = self.default_growth();
        Ok(self)
    }

    pub fn with_growth(mut self, growth: Growth) -> Self {
        self.growth = growth;
        self
    }

    pub fn surface_radius(&self) -> f64 {
        self.profile.surface_radius()
    }

    /// `T(p) = |P(p)|^r + Δ`.
    pub fn eval(&self, p: &[f64]) -> f64 {
        let rho = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.excess(rho) + self.offset
    }

    /// `T - Δ` as a function of `|p|`.
    pub fn excess(&self, rho: f64) -> f64 {
        self.profile.value(rho).abs().powf(self.r)
    }

    pub fn gradnorm(&self, rho: f64) -> f64 {
        self.profile.derivative(rho).abs()
    }

    /// Radii bounding the shell `Ω_τ`.
    pub fn omega_radii(&self) -> (f64, f64) {
        let inner = self.profile.level_radius(Side::Inner, self.tau).unwrap_or(0.0);
        let outer = self
            .profile
            .level_radius(Side::Outer, self.tau)
            .expect("outer level sphere always exists below the gap");
        (inner, outer)
    }

    /// Growth exponent of `T` at infinity.
    fn growth_exponent(&self) -> f64 {
        match &self.profile {
            RadialProfile::Bcs { .. } => 2.0 * self.r,
            RadialProfile::Roton { .. } => self.r,
            RadialProfile::CustomRadial { coefficients } => (coefficients.len() - 1) as f64 * self.r,
        }
    }

    fn default_growth(&self) -> Growth {
        let s = self.growth_exponent();
        let c2 = 0.5 * self.tau.powf(self.r);
        let (inner, outer) = self.omega_radii();
        let mut c1 = f64::INFINITY;
        for rho in self.outside_samples(inner, outer) {
            if rho > 0.0 {
                c1 = c1.min((self.excess(rho) - c2) / rho.powf(s));
            }
        }
        Growth { s, c1: c1.max(0.0), c2 }
    }

    fn outside_samples(&self, inner: f64, outer: f64) -> impl Iterator<Item = f64> {
        let inner_pts = (0..200).map(move |k| inner * k as f64 / 200.0);
        let outer_pts = (0..400).map(move |k| outer * (1.0 + 0.05 * k as f64));
        inner_pts.chain(outer_pts)
    }

    /// Checks the symbol invariants by sampling.
    pub fn validate(&self) -> Result<()> {
        let gap = self.profile.singular_gap();
        if self.tau >= gap {
            return Err(Error::param(format!(
                "tau = {} must stay below the profile's singular gap {gap}",
                self.tau
            )));
        }
        let rho0 = self.surface_radius();
        if self.excess(rho0) > 1e-12 {
            return Err(Error::param("T - offset does not vanish on S"));
        }
        let (inner, outer) = self.omega_radii();
        for k in 0..=400 {
            let rho = inner + (outer - inner) * k as f64 / 400.0;
            if self.gradnorm(rho) <= 0.0 {
                return Err(Error::param(format!("|grad P| vanishes at |p| = {rho} inside Omega_tau")));
            }
        }
        let g = self.growth;
        if !(g.s > 0.0 && g.c1 >= 0.0 && g.c2 > 0.0) {
            return Err(Error::param(format!("growth data must have s > 0, c1 >= 0, c2 > 0: {g:?}")));
        }
        for rho in self.outside_samples(inner, outer) {
            if self.excess(rho) + 1e-12 < g.c1 * rho.powf(g.s) + g.c2 {
                return Err(Error::param(format!(
                    "growth bound T - offset >= c1 |p|^s + c2 fails at |p| = {rho}"
                )));
            }
        }
        Ok(())
    }
}

fn default_tau(profile: &RadialProfile) -> f64 {
    (0.5 * profile.singular_gap()).min(1.0)
}

/// One ring of a product quadrature: a fixed radius and polar angle,
/// repeated over the uniform azimuthal rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub radius: f64,
    pub cos_polar: f64,
    pub sin_polar: f64,
    /// Weight carried by each of the ring's nodes.
    pub weight: f64,
    pub gradnorm: f64,
}

impl Ring {
    pub fn point(&self, dim: usize, phi: f64) -> Point {
        let rs = self.radius * self.sin_polar;
        match dim {
            2 => [self.radius * phi.cos(), self.radius * phi.sin(), 0.0],
            _ => [rs * phi.cos(), rs * phi.sin(), self.radius * self.cos_polar],
        }
    }

    /// Squared distance between a node of `self` at azimuth 0 and a node
    /// of `other` at azimuth `phi`.
    pub fn distance_sq(&self, other: &Ring, cos_phi: f64) -> f64 {
        let c = self.sin_polar * other.sin_polar * cos_phi + self.cos_polar * other.cos_polar;
        (self.radius * self.radius + other.radius * other.radius - 2.0 * self.radius * other.radius * c)
            .max(0.0)
    }
}

/// Rings times a uniform azimuthal rule with `azimuths` nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingLayout {
    pub dim: usize,
    pub azimuths: usize,
    pub rings: Vec<Ring>,
}

impl RingLayout {
    pub fn node_count(&self) -> usize {
        self.rings.len() * self.azimuths
    }

    pub fn azimuth(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.azimuths as f64
    }

    /// Nodes in ring-major order: node `ring * azimuths + j`.
    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.node_count());
        for ring in &self.rings {
            for j in 0..self.azimuths {
                out.push(ring.point(self.dim, self.azimuth(j)));
            }
        }
        out
    }

    fn expand<F: Fn(&Ring) -> f64>(&self, f: F) -> Vec<f64> {
        self.rings
            .iter()
            .flat_map(|r| std::iter::repeat(f(r)).take(self.azimuths))
            .collect()
    }
}

/// Angular rule on the unit sphere `S^{dim-1}`: (cos θ, sin θ, weight per
/// node) for every polar ring, plus the azimuth count.
fn angular_rule(dim: usize, resolution: usize) -> (Vec<(f64, f64, f64)>, usize) {
    match dim {
        2 => (vec![(0.0, 1.0, 2.0 * PI / resolution as f64)], resolution),
        _ => {
            let azimuths = 2 * resolution;
            let (x, w) = gauss_legendre(resolution);
            let rings = x
                .iter()
                .zip(&w)
                .map(|(&c, &wt)| (c, (1.0 - c * c).sqrt(), wt * 2.0 * PI / azimuths as f64))
                .collect();
            (rings, azimuths)
        }
    }
}

/// Quadrature on `S` (level 0) or on a level set `S_t`; the discrete
/// carrier of `L^2(S)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceQuadrature {
    pub dim: usize,
    pub level: f64,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub gradnorms: Vec<f64>,
    /// Present for quadratures built from a radial symbol.
    pub layout: Option<RingLayout>,
}

impl SurfaceQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn from_layout(layout: RingLayout, level: f64) -> Self {
        SurfaceQuadrature {
            dim: layout.dim,
            level,
            nodes: layout.points(),
            weights: layout.expand(|r| r.weight),
            gradnorms: layout.expand(|r| r.gradnorm),
            layout: Some(layout),
        }
    }

    /// Builds a quadrature from explicit nodes (e.g. a non-radial surface).
    pub fn from_nodes(
        dim: usize,
        nodes: Vec<Point>,
        weights: Vec<f64>,
        gradnorms: Vec<f64>,
    ) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::param(format!("dimension must be 2 or 3, got {dim}")));
        }
        if nodes.len() != weights.len() || nodes.len() != gradnorms.len() || nodes.is_empty() {
            return Err(Error::param("surface quadrature needs equally many nodes, weights and gradnorms"));
        }
        if let Some(k) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::param(format!("weight of node {k} must be positive")));
        }
        if let Some(k) = gradnorms.iter().position(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::param(format!("gradnorm of node {k} must be positive")));
        }
        Ok(SurfaceQuadrature { dim, level: 0.0, nodes, weights, gradnorms, layout: None })
    }

    /// Reads a CSV with header `px,py[,pz],weight,gradnorm`.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let dim = match headers.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["px", "py", "weight", "gradnorm"] => 2,
            ["px", "py", "pz", "weight", "gradnorm"] => 3,
            other => {
                return Err(Error::param(format!(
                    "surface CSV header must be px,py[,pz],weight,gradnorm; got {}",
                    other.join(",")
                )))
            }
        };
        let (mut nodes, mut weights, mut gradnorms) = (Vec::new(), Vec::new(), Vec::new());
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let vals: Vec<f64> = record
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::param(format!("row {}: cannot parse '{s}' as a number", row + 2)))
                })
                .collect::<Result<_>>()?;
            let mut p = [0.0; 3];
            p[..dim].copy_from_slice(&vals[..dim]);
            nodes.push(p);
            weights.push(vals[dim]);
            gradnorms.push(vals[dim + 1]);
        }
        Self::from_nodes(dim, nodes, weights, gradnorms)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if self.dim == 2 {
            w.write_record(["px", "py", "weight", "gradnorm"])?;
        } else {
            w.write_record(["px", "py", "pz", "weight", "gradnorm"])?;
        }
        for k in 0..self.len() {
            let mut row: Vec<String> = self.nodes[k][..self.dim].iter().map(|x| format!("{x:e}")).collect();
            row.push(format!("{:e}", self.weights[k]));
            row.push(format!("{:e}", self.gradnorms[k]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the product quadrature on `S_t` (`t = 0` gives `S`).
///
/// For `t > 0` the level set is the union of the inner and outer level
/// spheres; the inner one is dropped (with a warning) when it does not
/// exist.
pub fn build_surface_quadrature(
    sym: &KineticSymbol,
    level: f64,
    resolution: usize,
) -> Result<SurfaceQuadrature> {
    if resolution < 4 {
        return Err(Error::param(format!("surface resolution must be >= 4, got {resolution}")));
    }
    if !(level >= 0.0) || level >= sym.tau {
        return Err(Error::LevelOutOfRange { level, tau: sym.tau });
    }
    let (angular, azimuths) = angular_rule(sym.dim, resolution);
    let mut radii = Vec::new();
    if level == 0.0 {
        radii.push(sym.surface_radius());
    } else {
        match sym.profile.level_radius(Side::Inner, level) {
            Some(r) => radii.push(r),
            None => log::warn!("level t = {level}: inner level sphere does not exist, omitted"),
        }
        if let Some(r) = sym.profile.level_radius(Side::Outer, level) {
            radii.push(r);
        }
    }
    let mut rings = Vec::new();
    for &rho in &radii {
        let area = rho.powi(sym.dim as i32 - 1);
        for &(c, s, w) in &angular {
            rings.push(Ring { radius: rho, cos_polar: c, sin_polar: s, weight: area * w, gradnorm: sym.gradnorm(rho) });
        }
    }
    Ok(SurfaceQuadrature::from_layout(RingLayout { dim: sym.dim, azimuths, rings }, level))
}

/// Parameters of the graded momentum grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Smallest `e` the grid must resolve.
    pub e_min: f64,
    /// Outer momentum cutoff `Λ`.
    pub cutoff: f64,
    /// Maximum number of geometric levels per side of `S`.
    pub shells: usize,
    /// Angular resolution, as in [`build_surface_quadrature`].
    pub angular: usize,
    pub ratio: f64,
    pub nodes_per_shell: usize,
    pub disk_nodes: usize,
    pub outer_panel_width: f64,
    pub outer_nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            e_min: 1e-4,
            cutoff: 8.0,
            shells: 120,
            angular: 64,
            ratio: 0.75,
            nodes_per_shell: 4,
            disk_nodes: 16,
            outer_panel_width: 0.75,
            outer_nodes: 8,
        }
    }
}

impl GridSpec {
    /// A strictly finer grid for root certification.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            nodes_per_shell: self.nodes_per_shell + 2,
            disk_nodes: self.disk_nodes * 3 / 2,
            outer_nodes: self.outer_nodes + 4,
            ratio: self.ratio.sqrt(),
            shells: self.shells * 2,
            ..self.clone()
        }
    }

    /// Geometric levels `τ, τ q, τ q^2, ...` down to `t_min <= e_min^{1/r} / 10`.
    pub fn levels(&self, tau: f64, r: f64) -> Result<Vec<f64>> {
        if !(self.e_min > 0.0) {
            return Err(Error::param(format!("e_min must be positive, got {}", self.e_min)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::param(format!("grading ratio must lie in (0, 1), got {}", self.ratio)));
        }
        let target = self.e_min.powf(1.0 / r) / 10.0;
        let mut levels = vec![tau];
        while *levels.last().unwrap() > target {
            let next = levels.last().unwrap() * self.ratio;
            levels.push(next);
            if levels.len() > self.shells {
                return Err(Error::Resolution(format!(
                    "{} shells cannot reach t_min <= {target:e} for e_min = {:e} (ratio {})",
                    self.shells, self.e_min, self.ratio
                )));
            }
        }
        Ok(levels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// `|p|` below the inner boundary of `Ω_τ`.
    Disk,
    Shell { side: Side, t: f64 },
    Outer,
}

/// Momentum-space quadrature graded toward `S` (co-area split on `Ω_τ`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumGrid {
    pub spec: GridSpec,
    pub layout: RingLayout,
    /// `T - Δ` on each ring.
    pub excess: Vec<f64>,
    pub regions: Vec<Region>,
    pub levels: Vec<f64>,
}

impl MomentumGrid {
    pub fn node_count(&self) -> usize {
        self.layout.node_count()
    }

    pub fn ring_count(&self) -> usize {
        self.layout.rings.len()
    }

    pub fn points(&self) -> Vec<Point> {
        self.layout.points()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.layout.expand(|r| r.weight)
    }

    pub fn excess_per_node(&self) -> Vec<f64> {
        self.excess
            .iter()
            .flat_map(|&t| std::iter::repeat(t).take(self.layout.azimuths))
            .collect()
    }

    pub fn t_min(&self) -> f64 {
        *self.levels.last().unwrap()
    }

    /// Whether `e` lies in the range this grid was graded for.
    pub fn resolves(&self, e: f64) -> bool {
        e >= self.spec.e_min * (1.0 - 1e-12)
    }

    /// Integral of a radial function over the whole grid.
    pub fn integrate_radial<F: Fn(f64) -> f64>(&self, h: F) -> f64 {
        self.layout.rings.iter().map(|r| self.layout.azimuths as f64 * r.weight * h(r.radius)).sum()
    }

    /// Integral of a radial function over `Ω_τ` only, using the co-area
    /// shells.
    pub fn integrate_shells<F: Fn(f64) -> f64>(&self, h: F) -> f64 {
        self.layout
            .rings
            .iter()
            .zip(&self.regions)
            .filter(|(_, reg)| matches!(reg, Region::Shell { .. }))
            .map(|(r, _)| self.layout.azimuths as f64 * r.weight * h(r.radius))
            .sum()
    }

    /// Short human-readable description.
    pub fn summary(&self) -> String {
        format!(
            "dim={} rings={} azimuths={} nodes={} levels={} t_min={:.3e} cutoff={}",
            self.layout.dim,
            self.ring_count(),
            self.layout.azimuths,
            self.node_count(),
            self.levels.len(),
            self.t_min(),
            self.spec.cutoff
        )
    }
}

impl fmt::Display for MomentumGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary())
    }
}

/// Builds the graded momentum grid: disk, two families of co-area shells
/// around `S` graded geometrically in `t`, and an outer polar region up to
/// the cutoff.
pub fn build_momentum_grid(sym: &KineticSymbol, spec: &GridSpec) -> Result<MomentumGrid> {
    let levels = spec.levels(sym.tau, sym.r)?;
    if spec.nodes_per_shell == 0 || spec.disk_nodes == 0 || spec.outer_nodes == 0 {
        return Err(Error::param("node counts per panel must be positive"));
    }
    let (rho_in, rho_out) = sym.omega_radii();
    if !(spec.cutoff > rho_out) {
        return Err(Error::param(format!(
            "cutoff {} must exceed the outer radius {rho_out} of Omega_tau",
            spec.cutoff
        )));
    }
    let (angular, azimuths) = angular_rule(sym.dim, spec.angular.max(4));
    if spec.angular < 4 {
        return Err(Error::param("angular resolution must be >= 4"));
    }
    let dim = sym.dim as i32;

    // (radius, radial weight including the Jacobian, region, T - Δ)
    let mut radial: Vec<(f64, f64, Region, f64)> = Vec::new();
    if rho_in > 0.0 {
        let (x, w) = gauss_legendre_on(spec.disk_nodes, 0.0, rho_in);
        for (rho, wt) in x.into_iter().zip(w) {
            radial.push((rho, wt * rho.powi(dim - 1), Region::Disk, sym.excess(rho)));
        }
    }
    let mut breaks: Vec<f64> = levels.iter().rev().copied().collect();
    breaks.insert(0, 0.0);
    let (ts, tw) = composite_gauss_legendre(&breaks, spec.nodes_per_shell);
    for side in [Side::Inner, Side::Outer] {
        for (&t, &wt) in ts.iter().zip(&tw) {
            let rho = sym.profile.level_radius(side, t).ok_or_else(|| {
                Error::param(format!("level sphere t = {t} missing on the {side:?} side; reduce tau"))
            })?;
            let jac = rho.powi(dim - 1) / sym.gradnorm(rho);
            radial.push((rho, wt * jac, Region::Shell { side, t }, t.powf(sym.r)));
        }
    }
    let panels = ((spec.cutoff - rho_out) / spec.outer_panel_width).ceil().max(1.0) as usize;
    let breaks: Vec<f64> = (0..=panels)
        .map(|k| rho_out + (spec.cutoff - rho_out) * k as f64 / panels as f64)
        .collect();
    let (x, w) = composite_gauss_legendre(&breaks, spec.outer_nodes);
    for (rho, wt) in x.into_iter().zip(w) {
        radial.push((rho, wt * rho.powi(dim - 1), Region::Outer, sym.excess(rho)));
    }

    let mut rings = Vec::new();
    let mut excess = Vec::new();
    let mut regions = Vec::new();
    for &(rho, wr, region, tex) in &radial {
        for &(c, s, wa) in &angular {
            rings.push(Ring { radius: rho, cos_polar: c, sin_polar: s, weight: wr * wa, gradnorm: sym.gradnorm(rho) });
            excess.push(tex);
            regions.push(region);
        }
    }
    Ok(MomentumGrid {
        spec: spec.clone(),
        layout: RingLayout { dim: sym.dim, azimuths, rings },
        excess,
        regions,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_t_examples() {
        let bcs = KineticSymbol::bcs(3, 1.0, 1.0).unwrap();
        assert_eq!(bcs.eval(&[1.0, 0.0, 0.0]), 0.0);
        assert_eq!(bcs.eval(&[2.0, 0.0, 0.0]), 3.0);
        let roton = KineticSymbol::roton(3, 1.0, 0.5, 0.2).unwrap();
        assert!((roton.eval(&[0.0, 1.0, 0.0]) - 0.2).abs() < 1e-15);
        assert!((roton.eval(&[0.0, 2.0, 0.0]) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn default_tau_follows_singular_gap() {
        assert_eq!(KineticSymbol::bcs(2, 1.0, 1.0).unwrap().tau, 0.5);
        assert_eq!(KineticSymbol::bcs(2, 4.0, 1.0).unwrap().tau, 1.0);
        assert_eq!(KineticSymbol::roton(2, 1.0, 0.5, 0.2).unwrap().tau, 0.5);
    }

    #[test]
    fn builtin_symbols_validate() {
        for sym in [
            KineticSymbol::bcs(2, 1.0, 1.0).unwrap(),
            KineticSymbol::bcs(3, 2.0, 1.5).unwrap(),
            KineticSymbol::roton(2, 1.0, 0.5, 0.2).unwrap(),
            KineticSymbol::custom_radial(3, vec![-2.0, 0.0, 0.0, 1.0], 1.0).unwrap(),
        ] {
            sym.validate().unwrap();
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(KineticSymbol::bcs(1, 1.0, 1.0).is_err());
        assert!(KineticSymbol::bcs(2, -1.0, 1.0).is_err());
        assert!(KineticSymbol::bcs(2, 1.0, 0.5).is_err());
        assert!(KineticSymbol::custom_radial(2, vec![1.0, 0.0, 1.0], 1.0).is_err());
        let wide = KineticSymbol::bcs(2, 1.0, 1.0).unwrap().with_tau(1.5).unwrap();
        assert!(wide.validate().is_err());
    }

    #[test]
    fn custom_profile_matches_bcs() {
        let custom = KineticSymbol::custom_radial(2, vec![-1.0, 0.0, 1.0], 1.0).unwrap();
        let bcs = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
        assert!((custom.surface_radius() - 1.0).abs() < 1e-12);
        assert!((custom.tau - bcs.tau).abs() < 1e-9);
        for t in [0.1, 0.3] {
            for side in [Side::Inner, Side::Outer] {
                let a = custom.profile.level_radius(side, t).unwrap();
                let b = bcs.profile.level_radius(side, t).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn circle_quadrature_example() {
        let sym = KineticSymbol::bcs(2, 4.0, 1.0).unwrap();
        let q = build_surface_quadrature(&sym, 0.0, 64).unwrap();
        assert_eq!(q.len(), 64);
        assert!((q.total_measure() - 4.0 * PI).abs() < 1e-12);
        assert!(q.gradnorms.iter().all(|&g| (g - 4.0).abs() < 1e-14));
        for p in &q.nodes {
            assert!((p[0].hypot(p[1]) - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn level_set_has_two_spheres() {
        let sym = KineticSymbol::bcs(3, 1.0, 1.0).unwrap().with_tau(0.9).unwrap();
        let q = build_surface_quadrature(&sym, 0.5, 8).unwrap();
        let layout = q.layout.as_ref().unwrap();
        let mut radii: Vec<f64> = layout.rings.iter().map(|r| r.radius).collect();
        radii.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        assert_eq!(radii.len(), 2);
        assert!((radii[0] - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((radii[1] - 1.5f64.sqrt()).abs() < 1e-14);
        let area = 4.0 * PI * (0.5 + 1.5);
        assert!((q.total_measure() - area).abs() < 1e-12);
    }

    #[test]
    fn missing_inner_sphere_is_omitted() {
        let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap().with_tau(3.0).unwrap();
        let q = build_surface_quadrature(&sym, 2.0, 16).unwrap();
        assert_eq!(q.len(), 16);
        assert!((q.total_measure() - 2.0 * PI * 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn surface_quadrature_errors() {
        let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
        assert!(matches!(build_surface_quadrature(&sym, 0.5, 16), Err(Error::LevelOutOfRange { .. })));
        assert!(build_surface_quadrature(&sym, 0.0, 3).is_err());
    }

    #[test]
    fn grid_levels_reach_t_min() {
        let sym = KineticSymbol::bcs(2, 1.0, 1.0).unwrap();
        let spec = GridSpec { e_min: 1e-3, shells: 50, angular: 16, ..GridSpec::default() };
        let g = build_momentum_grid(&sym, &spec).unwrap();
        assert!(g.t_min() <= 1e-4);
        for w in g.levels.windows(2) {
            assert!((w[1] / w[0] - 0.75).abs() < 1e-12);
        }
        let few = GridSpec { shells: 10, ..spec };
        assert!(matches!(build_momentum_grid(&sym, &few), Err(Error::Resolution(_))));
    }

    #[test]
    fn csv_round_trip_keeps_nodes() {
        let sym = KineticSymbol::bcs(3, 1.0, 1.0).unwrap();
        let q = build_surface_quadrature(&sym, 0.0, 6).unwrap();
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        let back = SurfaceQuadrature::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(back.dim, 3);
        assert_eq!(back.len(), q.len());
        assert!(back.layout.is_none());
        assert!((back.total_measure() - q.total_measure()).abs() < 1e-12);
        assert!(SurfaceQuadrature::from_csv_reader("px,weight\n1,2\n".as_bytes()).is_err());
        assert!(SurfaceQuadrature::from_csv_reader("px,py,weight,gradnorm\n1,0,-1,2\n".as_bytes()).is_err());
    }
}
