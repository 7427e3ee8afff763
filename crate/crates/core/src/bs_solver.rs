//! Birman–Schwinger root finding and the operators around it.
//!
//! For attractive `V` the bound-state condition is that the positive
//! matrix `λ (T+e)^{-1/2} |V| (T+e)^{-1/2}` (momentum representation on a
//! [`MomentumGrid`]) has eigenvalue 1. All grid operators are kept as
//! azimuthal channel blocks; see [`crate::linalg::Channels`].

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, kernel_channels, scale_rows_cols, sym_eigenvalues, Channels, ChannelMode, Parity};
use crate::potentials::Potential;
use crate::surface_ops::{surface_eigenvalues, SurfaceMatrix};
use crate::symbols::{build_momentum_grid, build_surface_quadrature, KineticSymbol, MomentumGrid, SurfaceQuadrature};

fn check_r(r: f64) -> Result<()> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::param(format!("exponent r must be >= 1, got {r}")));
    }
    Ok(())
}

fn f_constant(r: f64) -> f64 {
    2.0 * PI / (r * (PI / r).sin())
}

/// `2 ln(1 + 1/e)` for `r = 1`, `2π / (r sin(π/r)) e^{-(r-1)/r}` for `r > 1`.
pub fn f_of_e(e: f64, r: f64) -> Result<f64> {
    check_r(r)?;
    if !(e > 0.0) {
        return Err(Error::param(format!("e must be positive, got {e}")));
    }
    Ok(if r == 1.0 { 2.0 * (1.0 / e).ln_1p() } else { f_constant(r) * e.powf(-(r - 1.0) / r) })
}

/// Inverse of [`f_of_e`] in `e`.
pub fn f_inverse(f: f64, r: f64) -> Result<f64> {
    check_r(r)?;
    if !(f > 0.0) {
        return Err(Error::param(format!("f must be positive, got {f}")));
    }
    Ok(if r == 1.0 { 1.0 / (0.5 * f).exp_m1() } else { (f_constant(r) / f).powf(r / (r - 1.0)) })
}

/// Growth scale of the regularised resolvent remainder.
pub fn g_of_e(e: f64, r: f64) -> Result<f64> {
    check_r(r)?;
    if !(e > 0.0) {
        return Err(Error::param(format!("e must be positive, got {e}")));
    }
    Ok(if r < 2.0 {
        1.0
    } else if r == 2.0 {
        1.0 + (1.0 / e).ln_1p()
    } else {
        1.0 + e.powf(2.0 - r)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignMode {
    Attractive,
    General,
}

struct SurfaceCache {
    quad: SurfaceQuadrature,
    /// `√(w/g)` per surface ring.
    scale: Vec<f64>,
    /// Signed kernel channels, surface × surface and surface × grid.
    ss: Channels,
    sg: Channels,
    vs: SurfaceMatrix,
    eigenvalues: Vec<f64>,
}

/// Everything needed for Birman–Schwinger work at one coupling.
///
/// Cloning (and [`BsContext::with_lambda`]) shares the λ-independent
/// kernel caches.
#[derive(Clone)]
pub struct BsContext {
    pub sym: KineticSymbol,
    pub potential: Potential,
    pub grid: Arc<MomentumGrid>,
    pub lambda: f64,
    pub mode: SignMode,
    kernel: Arc<OnceLock<Channels>>,
    surface: Arc<OnceLock<SurfaceCache>>,
}

impl std::fmt::Debug for BsContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BsContext")
            .field("sym", &self.sym)
            .field("potential", &self.potential)
            .field("grid", &self.grid.summary())
            .field("lambda", &self.lambda)
            .field("mode", &self.mode)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub lambda: f64,
    pub index: usize,
    pub e: f64,
    pub f_of_e: f64,
    /// `|μ_i(e) - 1|` at the returned root.
    pub residual: f64,
    pub bracket: (f64, f64),
    pub channel: usize,
    /// Bound-state energy `Δ - e`.
    pub energy: f64,
    pub grid: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub e: f64,
    pub e_refined: f64,
    pub relative_change: f64,
    pub passes: bool,
}

/// Gaussian wave packet `exp(-|x - c|² / (2 s²)) e^{i k·x}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub center: [f64; 3],
    pub width: f64,
    pub wavevector: [f64; 3],
}

impl Probe {
    /// Centres, widths and wavevectors spread around the potential's
    /// length scale and the surface radius.
    pub fn default_family(width: f64, surface_radius: f64) -> Vec<Probe> {
        let mut out = Vec::new();
        for c in [0.0, 0.5, 1.5] {
            for s in [0.5, 1.0, 2.0] {
                for k in [0.0, 0.5, 1.0, 1.5] {
                    out.push(Probe {
                        center: [c * width, 0.0, 0.0],
                        width: s * width,
                        wavevector: [k * surface_radius, 0.0, 0.0],
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeBound {
    pub e: f64,
    /// Rayleigh quotient of each probe.
    pub quotients: Vec<f64>,
    /// `max |quotient|`, a lower bound on `||M_e||`.
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct ReducedOperator {
    pub e: f64,
    /// `λ f(e) (V_S - λ X)` per channel.
    pub matrix: Channels,
    /// Eigenvalues with multiplicity, ascending.
    pub eigenvalues: Vec<f64>,
    /// `||F_S G(λ, e) F_S*||`.
    pub correction_norm: f64,
    pub neumann_terms: usize,
}

impl ReducedOperator {
    pub fn closest_to_minus_one(&self) -> f64 {
        self.eigenvalues.iter().copied().min_by(|a, b| (a + 1.0).abs().total_cmp(&(b + 1.0).abs())).unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSpectrumReport {
    pub e_probe: f64,
    pub bs_count: usize,
    pub surface_count: usize,
    pub matches: bool,
}

/// Relative threshold below which a surface eigenvalue counts as zero.
pub const RESOLVED_FRACTION: f64 = 1e-12;

impl BsContext {
    pub fn new(sym: KineticSymbol, potential: Potential, grid: MomentumGrid, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::param(format!("coupling must be >= 0, got {lambda}")));
        }
        if grid.layout.dim != sym.dim {
            return Err(Error::param("grid and symbol dimensions differ"));
        }
        potential.validate()?;
        potential.check_kernel_range(2.0 * grid.spec.cutoff)?;
        let mode = if potential.is_attractive(sym.dim) { SignMode::Attractive } else { SignMode::General };
        Ok(BsContext {
            sym,
            potential,
            grid: Arc::new(grid),
            lambda,
            mode,
            kernel: Arc::new(OnceLock::new()),
            surface: Arc::new(OnceLock::new()),
        })
    }

    /// Builds the grid from a spec.
    pub fn build(sym: KineticSymbol, potential: Potential, spec: &crate::symbols::GridSpec, lambda: f64) -> Result<Self> {
        let grid = build_momentum_grid(&sym, spec)?;
        Self::new(sym, potential, grid, lambda)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::param(format!("coupling must be >= 0, got {lambda}")));
        }
        Ok(BsContext { lambda, ..self.clone() })
    }

    fn require_attractive(&self) -> Result<()> {
        match self.mode {
            SignMode::Attractive => Ok(()),
            SignMode::General => Err(Error::Unsupported(
                "the Birman-Schwinger path needs V <= 0; use the direct spectrum for sign-changing V".into(),
            )),
        }
    }

    fn check_e(&self, e: f64) -> Result<()> {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::param(format!("e must be positive, got {e}")));
        }
        if !self.grid.resolves(e) {
            return Err(Error::Resolution(format!(
                "grid graded for e >= {:e} cannot resolve e = {e:e}",
                self.grid.spec.e_min
            )));
        }
        Ok(())
    }

    /// Signed kernel `(2π)^{-n/2} V^(p - q)` between grid rings.
    pub fn grid_kernel(&self) -> &Channels {
        self.kernel.get_or_init(|| {
            kernel_channels(&self.grid.layout, &self.grid.layout, self.potential.kernel(self.sym.dim), true)
                .expect("grid layout is self-consistent")
        })
    }

    fn surface(&self) -> &SurfaceCache {
        self.surface.get_or_init(|| {
            let quad = build_surface_quadrature(&self.sym, 0.0, self.grid.spec.angular)
                .expect("grid construction validated the angular resolution");
            let layout = quad.layout.clone().unwrap();
            let kernel = self.potential.kernel(self.sym.dim);
            let ss = kernel_channels(&layout, &layout, &kernel, true).expect("same layout");
            let sg = kernel_channels(&layout, &self.grid.layout, &kernel, false).expect("shared azimuths");
            let scale: Vec<f64> = layout.rings.iter().map(|r| (r.weight / r.gradnorm).sqrt()).collect();
            let vs = ss.map(|_, b| scale_rows_cols(b, &scale, &scale));
            let eigenvalues = surface_eigenvalues(&SurfaceMatrix { dense: Mat::zeros(0, 0), channels: Some(vs.clone()) })
                .expect("small symmetric eigenproblem");
            SurfaceCache { quad, scale, ss, sg, vs: SurfaceMatrix { dense: vs.to_dense(), channels: Some(vs) }, eigenvalues }
        })
    }

    /// Surface quadrature on `S` matching the grid's angular rule.
    pub fn surface_quadrature(&self) -> &SurfaceQuadrature {
        &self.surface().quad
    }

    pub fn surface_operator(&self) -> &SurfaceMatrix {
        &self.surface().vs
    }

    /// Eigenvalues `a_S^i` of `V_S` with multiplicity, ascending.
    pub fn surface_eigenvalues(&self) -> &[f64] {
        &self.surface().eigenvalues
    }

    /// `a_S^index` (1-based).
    pub fn a_s(&self, index: usize) -> Result<f64> {
        if index == 0 {
            return Err(Error::param("eigen indices start at 1"));
        }
        self.surface_eigenvalues()
            .get(index - 1)
            .copied()
            .ok_or_else(|| Error::param(format!("index {index} exceeds the surface node count")))
    }

    /// Negative surface eigenvalues above the numerical-zero threshold.
    pub fn resolved_surface_count(&self) -> usize {
        let vals = self.surface_eigenvalues();
        let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        vals.iter().filter(|&&a| a < -RESOLVED_FRACTION * scale).count()
    }

    /// `e` predicted by `λ f(e) |a_S^i| = 1`.
    pub fn first_order_prediction(&self, index: usize) -> Result<f64> {
        let a = self.a_s(index)?;
        if !(a < 0.0) || self.lambda == 0.0 {
            return Err(Error::NoBoundState { lambda: self.lambda, index });
        }
        f_inverse(1.0 / (self.lambda * a.abs()), self.sym.r)
    }

    fn grid_weights(&self) -> Vec<f64> {
        self.grid.layout.rings.iter().map(|r| r.weight).collect()
    }

    fn bs_scale(&self, e: f64) -> Vec<f64> {
        self.grid.layout.rings.iter().zip(&self.grid.excess).map(|(r, t)| (r.weight / (t + e)).sqrt()).collect()
    }

    fn bs_block(&self, m: usize, e: f64) -> Mat<f64> {
        let d = self.bs_scale(e);
        let k = &self.grid_kernel().blocks[m];
        Mat::from_fn(k.nrows(), k.ncols(), |i, j| -self.lambda * d[i] * k[(i, j)] * d[j])
    }

    /// `λ (T+e)^{-1/2} |V| (T+e)^{-1/2}` on the grid, per channel.
    pub fn assemble_bs_operator(&self, e: f64) -> Result<Channels> {
        self.require_attractive()?;
        self.check_e(e)?;
        let d = self.bs_scale(e);
        let lambda = self.lambda;
        Ok(self.grid_kernel().map(|_, k| Mat::from_fn(k.nrows(), k.ncols(), |i, j| -lambda * d[i] * k[(i, j)] * d[j])))
    }

    /// The `count` largest Birman–Schwinger eigenvalues (with multiplicity).
    pub fn bs_top_eigenvalues(&self, e: f64, count: usize) -> Result<Vec<f64>> {
        self.require_attractive()?;
        self.check_e(e)?;
        let channels: Vec<usize> = (0..self.grid_kernel().count()).collect();
        self.top_in_channels(e, count, &channels)
    }

    fn top_in_channels(&self, e: f64, count: usize, channels: &[usize]) -> Result<Vec<f64>> {
        let kernel = self.grid_kernel();
        let mut vals = Vec::new();
        for &m in channels {
            let ev = sym_eigenvalues(&self.bs_block(m, e))?;
            for &v in ev.iter().rev().take(count) {
                vals.extend(std::iter::repeat(v).take(kernel.multiplicity(m)));
            }
        }
        vals.sort_by(|a, b| b.total_cmp(a));
        vals.truncate(count);
        Ok(vals)
    }

    fn mu(&self, e: f64, index: usize, channels: &[usize]) -> Result<f64> {
        Ok(self.top_in_channels(e, index, channels)?.get(index - 1).copied().unwrap_or(0.0))
    }

    /// Solves `μ_index(e) = 1` for the `index`-th bound state (1-based).
    ///
    /// Without a bracket one is built around the first-order prediction.
    pub fn solve_e(&self, index: usize, bracket: Option<(f64, f64)>) -> Result<SolveRecord> {
        self.require_attractive()?;
        if index == 0 {
            return Err(Error::param("eigen indices start at 1"));
        }
        if self.lambda == 0.0 || self.potential.is_zero() {
            return Err(Error::NoBoundState { lambda: self.lambda, index });
        }
        let e_min = self.grid.spec.e_min;
        let all: Vec<usize> = (0..self.grid_kernel().count()).collect();
        let (lo, hi) = match bracket {
            Some((lo, hi)) => {
                if !(lo > 0.0 && hi > lo) {
                    return Err(Error::param(format!("bracket must satisfy 0 < e_lo < e_hi, got ({lo}, {hi})")));
                }
                self.check_e(lo)?;
                if self.mu(lo, index, &all)? < 1.0 || self.mu(hi, index, &all)? >= 1.0 {
                    return Err(Error::NoBoundState { lambda: self.lambda, index });
                }
                (lo, hi)
            }
            None => self.auto_bracket(index, &all)?,
        };
        let _ = e_min;
        // channels that cannot reach 1 on the bracket never matter
        let kept: Vec<usize> = all
            .iter()
            .copied()
            .filter(|&m| {
                sym_eigenvalues(&self.bs_block(m, lo)).map(|v| v.last().copied().unwrap_or(0.0) >= 1.0).unwrap_or(true)
            })
            .collect();
        let g = |s: f64| -> Result<f64> { Ok(self.mu(s.exp(), index, &kept)? - 1.0) };
        let (mut a, mut b) = (lo.ln(), hi.ln());
        let (mut ga, mut gb) = (g(a)?, g(b)?);
        while b - a > 0.05 {
            let m = 0.5 * (a + b);
            let gm = g(m)?;
            if gm >= 0.0 {
                a = m;
                ga = gm;
            } else {
                b = m;
                gb = gm;
            }
        }
        // Illinois iteration on ln e
        let mut side = 0i32;
        let mut best = if ga.abs() < gb.abs() { (a, ga) } else { (b, gb) };
        for _ in 0..100 {
            if best.1.abs() <= 1e-11 || b - a <= 1e-15 * b.abs().max(1.0) {
                break;
            }
            let s = (a * gb - b * ga) / (gb - ga);
            let s = if s > a && s < b { s } else { 0.5 * (a + b) };
            let gs = g(s)?;
            if gs.abs() < best.1.abs() {
                best = (s, gs);
            }
            if gs >= 0.0 {
                a = s;
                ga = gs;
                if side == 1 {
                    gb *= 0.5;
                }
                side = 1;
            } else {
                b = s;
                gb = gs;
                if side == -1 {
                    ga *= 0.5;
                }
                side = -1;
            }
        }
        let e = best.0.exp();
        let channel = self.crossing_channel(e, &kept)?;
        Ok(SolveRecord {
            lambda: self.lambda,
            index,
            e,
            f_of_e: f_of_e(e, self.sym.r)?,
            residual: best.1.abs(),
            bracket: (lo, hi),
            channel,
            energy: self.sym.offset - e,
            grid: self.grid.summary(),
        })
    }

    fn auto_bracket(&self, index: usize, all: &[usize]) -> Result<(f64, f64)> {
        let e_min = self.grid.spec.e_min;
        let predicted = self.first_order_prediction(index).ok();
        if self.mu(e_min, index, all)? < 1.0 {
            return Err(match predicted {
                Some(p) if p < e_min => Error::Resolution(format!(
                    "bound state {index} at lambda = {} is predicted near e = {p:.3e}, below the grid floor {e_min:.3e}",
                    self.lambda
                )),
                _ => Error::NoBoundState { lambda: self.lambda, index },
            });
        }
        let guess = predicted.unwrap_or(1.0).max(e_min);
        let mut lo = (guess / 100.0).max(e_min);
        if self.mu(lo, index, all)? < 1.0 {
            lo = e_min;
        }
        let mut hi = (guess * 100.0).max(lo * 2.0);
        while self.mu(hi, index, all)? >= 1.0 {
            hi *= 100.0;
            if hi > 1e12 {
                return Err(Error::Resolution("Birman-Schwinger eigenvalue does not fall below 1".into()));
            }
        }
        Ok((lo, hi))
    }

    /// Channel whose eigenvalue is nearest 1 at `e`.
    fn crossing_channel(&self, e: f64, channels: &[usize]) -> Result<usize> {
        let mut best = (f64::INFINITY, 0);
        for &m in channels {
            for v in sym_eigenvalues(&self.bs_block(m, e))? {
                if (v - 1.0).abs() < best.0 {
                    best = ((v - 1.0).abs(), m);
                }
            }
        }
        Ok(best.1)
    }

    /// Birman–Schwinger eigenvector at a solved root (grid ring vector in
    /// the record's channel, cosine parity).
    pub fn bs_eigenvector(&self, rec: &SolveRecord) -> Result<ChannelMode> {
        self.check_e(rec.e)?;
        let evd = linalg::sym_eigen(&self.bs_block(rec.channel, rec.e))?;
        let k = (0..evd.values.len())
            .min_by(|&a, &b| (evd.values[a] - 1.0).abs().total_cmp(&(evd.values[b] - 1.0).abs()))
            .ok_or(Error::Eigen)?;
        let mut v: Vec<f64> = evd.vectors.col(k).iter().copied().collect();
        if v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0) < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        Ok(ChannelMode { value: evd.values[k], channel: rec.channel, parity: Parity::Cos, ring_vector: v })
    }

    /// Relative residual of `(H + e) z = 0` for `z = (T+e)^{-1/2} y`, the
    /// momentum-space eigenfunction rebuilt from the Birman–Schwinger
    /// eigenvector `y`.
    pub fn eigenvector_identity_residual(&self, rec: &SolveRecord) -> Result<f64> {
        let y = self.bs_eigenvector(rec)?.ring_vector;
        let t: Vec<f64> = self.grid.excess.iter().map(|t| t + rec.e).collect();
        let z: Vec<f64> = y.iter().zip(&t).map(|(y, t)| y / t.sqrt()).collect();
        let w = self.grid_weights();
        let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        let k = &self.grid_kernel().blocks[rec.channel];
        let n = z.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let vz: f64 = (0..n).map(|j| k[(i, j)] * sw[j] * z[j]).sum();
            let hz = t[i] * z[i] + self.lambda * sw[i] * vz;
            num += hz * hz;
            den += (t[i] * z[i]).powi(2);
        }
        Ok((num / den).sqrt())
    }

    /// Re-solves on a once-refined grid; passes when `e` moves by <= 2 %.
    pub fn certify(&self, rec: &SolveRecord) -> Result<Certificate> {
        let refined = BsContext::build(self.sym.clone(), self.potential.clone(), &self.grid.spec.refined(), self.lambda)?;
        let rr = refined
            .solve_e(rec.index, Some(((rec.e / 2.0).max(refined.grid.spec.e_min), rec.e * 2.0)))
            .or_else(|_| refined.solve_e(rec.index, None))?;
        let rel = (rr.e - rec.e).abs() / rec.e;
        Ok(Certificate { e: rec.e, e_refined: rr.e, relative_change: rel, passes: rel <= 0.02 })
    }

    /// Lowest `count` eigenvalues (with multiplicity) of the discretised
    /// `T - Δ + λ V`; valid for either sign of `V`.
    pub fn direct_spectrum(&self, count: usize) -> Result<Vec<f64>> {
        let kernel = self.grid_kernel();
        let sw: Vec<f64> = self.grid_weights().iter().map(|w| w.sqrt()).collect();
        let mut vals = Vec::new();
        for (m, k) in kernel.blocks.iter().enumerate() {
            let h = Mat::from_fn(k.nrows(), k.ncols(), |i, j| {
                let diag = if i == j { self.grid.excess[i] } else { 0.0 };
                diag + self.lambda * sw[i] * k[(i, j)] * sw[j]
            });
            for v in sym_eigenvalues(&h)?.into_iter().take(count) {
                vals.extend(std::iter::repeat(v).take(kernel.multiplicity(m)));
            }
        }
        vals.sort_by(f64::total_cmp);
        vals.truncate(count);
        Ok(vals)
    }

    /// Lower bound on `||M_e||` from Rayleigh quotients of Gaussian probes.
    ///
    /// `|V|^{1/2} ψ` stays Gaussian for a Gaussian `V`, so its transform is
    /// closed-form; other potentials are refused.
    pub fn me_norm_probe(&self, e: f64, probes: &[Probe]) -> Result<ProbeBound> {
        self.check_e(e)?;
        if self.potential.is_zero() {
            return Ok(ProbeBound { e, quotients: vec![0.0; probes.len()], bound: 0.0 });
        }
        self.require_attractive()?;
        let term = self
            .potential
            .single_gaussian()
            .ok_or_else(|| Error::Unsupported("M_e probes need a single Gaussian potential".into()))?;
        let n = self.sym.dim as i32;
        let f = f_of_e(e, self.sym.r)?;
        let pts = self.grid.points();
        let wts = self.grid.weights();
        let tex = self.grid.excess_per_node();
        let quad = self.surface_quadrature();
        let quotients = probes
            .iter()
            .map(|pr| {
                let (a, w, s) = (term.amplitude, term.width, pr.width);
                let alpha = 1.0 / (4.0 * w * w) + 1.0 / (2.0 * s * s);
                let c2 = pr.center.iter().map(|c| c * c).sum::<f64>();
                let x0: Vec<f64> = pr.center.iter().map(|c| c / (2.0 * s * s * alpha)).collect();
                let x02 = x0.iter().map(|x| x * x).sum::<f64>();
                let konst = (-c2 / (2.0 * s * s) + alpha * x02).exp();
                let amp = a * konst * konst * (2.0 * alpha).powi(-n);
                let phi2 = |p: &[f64; 3]| {
                    let d2: f64 = (0..3).map(|i| (p[i] - pr.wavevector[i]).powi(2)).sum();
                    amp * (-d2 / (2.0 * alpha)).exp()
                };
                let bulk: f64 = pts.iter().zip(&wts).zip(&tex).map(|((p, w), t)| w * phi2(p) / (t + e)).sum();
                let surf: f64 =
                    (0..quad.len()).map(|k| quad.weights[k] / quad.gradnorms[k] * phi2(&quad.nodes[k])).sum();
                let norm2 = (PI * s * s).powf(n as f64 / 2.0);
                (bulk - f * surf) / norm2
            })
            .collect::<Vec<f64>>();
        let bound = quotients.iter().fold(0.0f64, |acc, q| acc.max(q.abs()));
        Ok(ProbeBound { e, quotients, bound })
    }

    /// Probe-wise distances between `M_{e_j}` and `M_{e_{j+1}}`.
    pub fn m0_limit_residuals(&self, e_sequence: &[f64], probes: &[Probe]) -> Result<Vec<f64>> {
        if self.sym.r >= 2.0 {
            return Err(Error::Unsupported(format!("M_e has no norm limit for r >= 2 (r = {})", self.sym.r)));
        }
        let bounds = e_sequence.iter().map(|&e| self.me_norm_probe(e, probes)).collect::<Result<Vec<_>>>()?;
        Ok(bounds
            .windows(2)
            .map(|w| w[0].quotients.iter().zip(&w[1].quotients).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .collect())
    }

    /// `λ f(e) (V_S + F_S G(λ,e) F_S*)` on `L²(S)`, with `(1 + λ M_e)^{-1}`
    /// expanded as a Neumann series on the grid ∪ surface nodes. At a
    /// bound state `e` it has eigenvalue −1.
    pub fn reduced_surface_operator(&self, e: f64) -> Result<ReducedOperator> {
        self.require_attractive()?;
        self.check_e(e)?;
        let f = f_of_e(e, self.sym.r)?;
        let lambda = self.lambda;
        let sc = self.surface();
        let gk = self.grid_kernel();
        let sg_scale = self.bs_scale(e);
        let ss_scale: Vec<f64> = sc.scale.iter().map(|s| s * f.sqrt()).collect();
        let (ng, ns) = (sg_scale.len(), ss_scale.len());
        let blocks: Vec<Result<(Mat<f64>, f64, usize)>> = (0..gk.count())
            .map(|m| {
                // positive kernel blocks, scaled
                let pgg = &gk.blocks[m];
                let psg = &sc.sg.blocks[m];
                let pss = &sc.ss.blocks[m];
                let nt = ng + ns;
                let scale: Vec<f64> = sg_scale.iter().chain(&ss_scale).copied().collect();
                let y = Mat::from_fn(nt, nt, |i, j| {
                    let k = match (i < ng, j < ng) {
                        (true, true) => pgg[(i, j)],
                        (true, false) => psg[(j - ng, i)],
                        (false, true) => psg[(i - ng, j)],
                        (false, false) => pss[(i - ng, j - ng)],
                    };
                    -scale[i] * k * scale[j]
                });
                let bt = Mat::from_fn(nt, ns, |i, j| {
                    let k = if i < ng { psg[(j, i)] } else { pss[(i - ng, j)] };
                    -scale[i] * k * sc.scale[j]
                });
                let sign = |i: usize| if i < ng { 1.0 } else { -1.0 };
                let mut v = Mat::from_fn(nt, ns, |i, j| sign(i) * bt[(i, j)]);
                let mut x = bt.transpose() * &v;
                let mut terms = 1;
                let mut prev = x.norm_l2();
                loop {
                    let yv = &y * &v;
                    v = Mat::from_fn(nt, ns, |i, j| lambda * sign(i) * yv[(i, j)]);
                    let term = bt.transpose() * &v;
                    let tn = term.norm_l2();
                    x += &term;
                    terms += 1;
                    if tn < 1e-10 {
                        break;
                    }
                    if (terms > 4 && tn > prev) || terms > 2000 {
                        return Err(Error::NeumannDivergence { ratio: tn / prev });
                    }
                    prev = tn;
                }
                let xnorm = linalg::sym_norm(&sym_part(&x))?;
                let vs = &sc.vs.channels.as_ref().unwrap().blocks[m];
                let r = Mat::from_fn(ns, ns, |i, j| lambda * f * (vs[(i, j)] - lambda * 0.5 * (x[(i, j)] + x[(j, i)])));
                Ok((r, xnorm, terms))
            })
            .collect();
        let mut mats = Vec::new();
        let mut xnorm = 0.0f64;
        let mut terms = 0;
        for b in blocks {
            let (r, xn, t) = b?;
            mats.push(r);
            xnorm = xnorm.max(xn);
            terms = terms.max(t);
        }
        let matrix = Channels { azimuths: gk.azimuths, blocks: mats };
        let eigenvalues = surface_eigenvalues(&SurfaceMatrix { dense: Mat::zeros(0, 0), channels: Some(matrix.clone()) })?;
        Ok(ReducedOperator { e, matrix, eigenvalues, correction_norm: lambda * xnorm, neumann_terms: terms })
    }

    /// Counts Birman–Schwinger eigenvalues above 1 at the `e` where
    /// `λ² f(e) = separation` and compares with the surface eigenvalues
    /// whose first-order bound state lies deeper.
    pub fn residual_spectrum_check(&self, separation: f64) -> Result<ResidualSpectrumReport> {
        self.require_attractive()?;
        if self.lambda == 0.0 || self.potential.is_zero() {
            return Ok(ResidualSpectrumReport { e_probe: f64::NAN, bs_count: 0, surface_count: 0, matches: true });
        }
        let e_probe = f_inverse(separation / (self.lambda * self.lambda), self.sym.r)?.max(self.grid.spec.e_min);
        let kernel = self.grid_kernel();
        let mut bs_count = 0;
        for m in 0..kernel.count() {
            let above = sym_eigenvalues(&self.bs_block(m, e_probe))?.iter().filter(|&&v| v > 1.0).count();
            bs_count += above * kernel.multiplicity(m);
        }
        let vals = self.surface_eigenvalues();
        let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut surface_count = 0;
        for &a in vals {
            if a < -RESOLVED_FRACTION * scale && f_inverse(1.0 / (self.lambda * a.abs()), self.sym.r)? > e_probe {
                surface_count += 1;
            }
        }
        Ok(ResidualSpectrumReport { e_probe, bs_count, surface_count, matches: bs_count == surface_count })
    }
}

fn sym_part(x: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(x.nrows(), x.ncols(), |i, j| 0.5 * (x[(i, j)] + x[(j, i)]))
}
