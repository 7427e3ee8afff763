//! Operators on `L²(S)`: the surface operator `V_S`, the lift `F_S*`,
//! the second-order operator `W_S` and `B_S(λ) = V_S - λ W_S`.
//!
//! Matrices act on weight-symmetrised coefficients `ũ_k = √w_k u(p_k)`,
//! so the discrete `L²(S)` inner product is the Euclidean one.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bs_solver::f_of_e;
use crate::error::{Error, Result};
use crate::fit::extrapolation_weights;
use crate::linalg::{self, kernel_channels, kernel_dense, scale_rows_cols, sym_eigen, Channels};
use crate::potentials::Potential;
use crate::quadrature::gauss_legendre_on;
use crate::symbols::{KineticSymbol, MomentumGrid, Point, SurfaceQuadrature};

/// A symmetric matrix on the surface nodes, with its channel blocks when
/// the quadrature has a ring layout.
#[derive(Clone, Debug)]
pub struct SurfaceMatrix {
    pub dense: Mat<f64>,
    pub channels: Option<Channels>,
}

impl SurfaceMatrix {
    fn from_channels(ch: Channels) -> Self {
        SurfaceMatrix { dense: ch.to_dense(), channels: Some(ch) }
    }

    fn from_dense(dense: Mat<f64>) -> Self {
        SurfaceMatrix { dense, channels: None }
    }

    pub fn size(&self) -> usize {
        self.dense.nrows()
    }

    pub fn symmetry_residual(&self) -> f64 {
        linalg::symmetry_residual(&self.dense)
    }

    pub fn norm(&self) -> Result<f64> {
        match &self.channels {
            Some(ch) => ch.sym_norm(),
            None => linalg::sym_norm(&self.dense),
        }
    }

    /// `Σ c_k M_k`; channel blocks are kept when every term has them.
    pub fn combine(terms: &[(f64, &SurfaceMatrix)]) -> SurfaceMatrix {
        let n = terms[0].1.size();
        let mut dense = Mat::<f64>::zeros(n, n);
        for (c, m) in terms {
            dense += &m.dense * faer::Scale(*c);
        }
        let channels = if terms.iter().all(|(_, m)| m.channels.is_some()) {
            let first = terms[0].1.channels.as_ref().unwrap();
            Some(first.map(|k, _| {
                let mut acc = Mat::<f64>::zeros(first.rows(), first.cols());
                for (c, m) in terms {
                    acc += &m.channels.as_ref().unwrap().blocks[k] * faer::Scale(*c);
                }
                acc
            }))
        } else {
            None
        };
        SurfaceMatrix { dense, channels }
    }

    /// `M²`.
    pub fn squared(&self) -> SurfaceMatrix {
        SurfaceMatrix {
            dense: &self.dense * &self.dense,
            channels: self.channels.as_ref().map(|ch| ch.map(|_, b| b * b)),
        }
    }

    /// `(x, M y)`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.size();
        (0..n).map(|i| x[i] * (0..n).map(|j| self.dense[(i, j)] * y[j]).sum::<f64>()).sum()
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n).map(|i| (0..n).map(|j| self.dense[(i, j)] * y[j]).sum()).collect()
    }
}

/// An eigenpair on `L²(S)`; `vector` holds symmetrised coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub channel: Option<usize>,
}

/// `√(w_k / g_k)`, the symmetrising factor of the surface kernel.
pub fn surface_scale(quad: &SurfaceQuadrature) -> Vec<f64> {
    quad.weights.iter().zip(&quad.gradnorms).map(|(w, g)| (w / g).sqrt()).collect()
}

fn ring_scale(quad: &SurfaceQuadrature) -> Option<Vec<f64>> {
    quad.layout.as_ref().map(|l| l.rings.iter().map(|r| (r.weight / r.gradnorm).sqrt()).collect())
}

fn max_radius(points: &[Point]) -> f64 {
    points.iter().map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()).fold(0.0, f64::max)
}

/// `K_jk = √(w_j w_k) (2π)^{-n/2} V^(p_j - p_k) / √(g_j g_k)`.
pub fn assemble_vs(quad: &SurfaceQuadrature, v: &Potential) -> Result<SurfaceMatrix> {
    if quad.level != 0.0 {
        return Err(Error::param(format!("V_S lives on S; got a level-set quadrature (t = {})", quad.level)));
    }
    v.check_kernel_range(2.0 * max_radius(&quad.nodes))?;
    let kernel = v.kernel(quad.dim);
    match (&quad.layout, ring_scale(quad)) {
        (Some(layout), Some(s)) => {
            let ch = kernel_channels(layout, layout, kernel, true)?;
            Ok(SurfaceMatrix::from_channels(ch.map(|_, b| scale_rows_cols(b, &s, &s))))
        }
        _ => {
            let s = surface_scale(quad);
            let k = kernel_dense(&quad.nodes, &quad.nodes, kernel, true);
            Ok(SurfaceMatrix::from_dense(scale_rows_cols(&k, &s, &s)))
        }
    }
}

/// The `count` lowest eigenpairs (ascending, orthonormal).
pub fn surface_spectrum(m: &SurfaceMatrix, count: usize) -> Result<Vec<EigenPair>> {
    if count > m.size() {
        return Err(Error::param(format!("requested {count} eigenpairs of a {}-node operator", m.size())));
    }
    let mut pairs: Vec<EigenPair> = match &m.channels {
        Some(ch) => ch
            .eigen()?
            .into_iter()
            .take(count)
            .map(|mode| EigenPair { value: mode.value, vector: mode.expand(ch.azimuths), channel: Some(mode.channel) })
            .collect(),
        None => {
            let evd = sym_eigen(&m.dense)?;
            (0..count)
                .map(|k| EigenPair {
                    value: evd.values[k],
                    vector: evd.vectors.col(k).iter().copied().collect(),
                    channel: None,
                })
                .collect()
        }
    };
    // fix the sign so exported vectors are reproducible
    for p in &mut pairs {
        if let Some(big) = p.vector.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())) {
            if big < 0.0 {
                p.vector.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
    Ok(pairs)
}

/// All eigenvalues with multiplicity, ascending.
pub fn surface_eigenvalues(m: &SurfaceMatrix) -> Result<Vec<f64>> {
    match &m.channels {
        Some(ch) => {
            let mut out = Vec::new();
            for (k, b) in ch.blocks.iter().enumerate() {
                for v in linalg::sym_eigenvalues(b)? {
                    out.extend(std::iter::repeat(v).take(ch.multiplicity(k)));
                }
            }
            out.sort_by(f64::total_cmp);
            Ok(out)
        }
        None => linalg::sym_eigenvalues(&m.dense),
    }
}

/// Function values `u(p_k)` from symmetrised coefficients.
pub fn node_values(quad: &SurfaceQuadrature, coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().zip(&quad.weights).map(|(c, w)| c / w.sqrt()).collect()
}

/// Index ranges of eigenvalues equal within `rel_tol` of the spectral scale.
pub fn eigenspace_groups(values: &[f64], rel_tol: f64) -> Vec<std::ops::Range<usize>> {
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || (values[k] - values[k - 1]).abs() > rel_tol * scale {
            out.push(start..k);
            start = k;
        }
    }
    out
}

/// `F_S* u (x) = (2π)^{-n/2} Σ_k w_k e^{i x·p_k} u_k / √g_k` for node values `u`.
pub fn apply_fs_adjoint(quad: &SurfaceQuadrature, u: &[f64], x: &Point) -> Complex64 {
    let norm = (2.0 * PI).powf(-(quad.dim as f64) / 2.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..quad.len() {
        let p = &quad.nodes[k];
        let phase = x[0] * p[0] + x[1] * p[1] + x[2] * p[2];
        acc += Complex64::from_polar(quad.weights[k] * u[k] / quad.gradnorms[k].sqrt(), phase);
    }
    acc * norm
}

pub fn apply_fs_adjoint_many(quad: &SurfaceQuadrature, u: &[f64], xs: &[Point]) -> Vec<Complex64> {
    xs.par_iter().map(|x| apply_fs_adjoint(quad, u, x)).collect()
}

/// Product quadrature on the ball `|x| <= radius` in position space.
#[derive(Clone, Debug)]
pub struct PositionGrid {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

pub fn position_grid(dim: usize, radius: f64, radial: usize, angular: usize) -> PositionGrid {
    let (rs, rw) = gauss_legendre_on(radial, 0.0, radius);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (&r, &wr) in rs.iter().zip(&rw) {
        match dim {
            2 => {
                for j in 0..angular {
                    let phi = 2.0 * PI * (j as f64 + 0.5) / angular as f64;
                    points.push([r * phi.cos(), r * phi.sin(), 0.0]);
                    weights.push(wr * r * 2.0 * PI / angular as f64);
                }
            }
            _ => {
                let (cs, cw) = gauss_legendre_on(angular, -1.0, 1.0);
                for (&c, &wc) in cs.iter().zip(&cw) {
                    let s = (1.0 - c * c).sqrt();
                    for j in 0..2 * angular {
                        let phi = 2.0 * PI * (j as f64 + 0.5) / (2 * angular) as f64;
                        points.push([r * s * phi.cos(), r * s * phi.sin(), r * c]);
                        weights.push(wr * r * r * wc * PI / angular as f64);
                    }
                }
            }
        }
    }
    PositionGrid { points, weights }
}

/// `∫ |F_S* u|² V dx` on a position grid; negative for attractive `V`
/// and non-zero `u`.
pub fn corollary_form(quad: &SurfaceQuadrature, v: &Potential, u: &[f64], pos: &PositionGrid) -> f64 {
    let lifted = apply_fs_adjoint_many(quad, u, &pos.points);
    lifted
        .iter()
        .zip(&pos.points)
        .zip(&pos.weights)
        .map(|((z, x), w)| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            w * z.norm_sqr() * v.value(quad.dim, r)
        })
        .sum()
}

fn grid_ring_factor(grid: &MomentumGrid, e: f64) -> Vec<f64> {
    grid.layout.rings.iter().zip(&grid.excess).map(|(r, t)| r.weight / (t + e)).collect()
}

/// `Q_jk = Σ_m W_m w_j(p_m) w_k(p_m) / (T(p_m) + e)` with
/// `w_k(p) = (2π)^{-n/2} √(w_k / g_k) V^(p - p_k)`.
pub fn assemble_q(
    quad: &SurfaceQuadrature,
    v: &Potential,
    sym: &KineticSymbol,
    e: f64,
    grid: &MomentumGrid,
) -> Result<SurfaceMatrix> {
    if !(e > 0.0) {
        return Err(Error::param(format!("e must be positive, got {e}")));
    }
    if !grid.resolves(e) {
        return Err(Error::Resolution(format!(
            "grid graded for e >= {:e} cannot resolve e = {e:e}",
            grid.spec.e_min
        )));
    }
    if grid.layout.dim != sym.dim || quad.dim != sym.dim {
        return Err(Error::param("grid, surface and symbol dimensions differ"));
    }
    v.check_kernel_range(max_radius(&quad.nodes) + grid.spec.cutoff)?;
    let kernel = v.kernel(sym.dim);
    let same_rule = quad.layout.as_ref().is_some_and(|l| l.azimuths == grid.layout.azimuths);
    if same_rule {
        let layout = quad.layout.as_ref().unwrap();
        let s = ring_scale(quad).unwrap();
        let c = kernel_channels(layout, &grid.layout, kernel, false)?;
        let d = grid_ring_factor(grid, e);
        Ok(SurfaceMatrix::from_channels(c.map(|_, b| {
            let left = scale_rows_cols(b, &s, &d);
            let right = scale_rows_cols(b, &s, &vec![1.0; b.ncols()]);
            let mut q = &left * right.transpose();
            symmetrize(&mut q);
            q
        })))
    } else {
        let s = surface_scale(quad);
        let pts = grid.points();
        let d: Vec<f64> = grid.weights().iter().zip(grid.excess_per_node()).map(|(w, t)| w / (t + e)).collect();
        let c = kernel_dense(&quad.nodes, &pts, kernel, false);
        let left = scale_rows_cols(&c, &s, &d);
        let right = scale_rows_cols(&c, &s, &vec![1.0; c.ncols()]);
        let mut q = &left * right.transpose();
        symmetrize(&mut q);
        Ok(SurfaceMatrix::from_dense(q))
    }
}

fn symmetrize(m: &mut Mat<f64>) {
    for j in 0..m.ncols() {
        for i in 0..j {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

/// Default `e` sequence for the `W_S` extrapolation.
pub fn default_e_sequence() -> Vec<f64> {
    (0..4).map(|j| 1e-2 * 4f64.powi(-j)).collect()
}

/// Extrapolation basis for `W(e)` as `e -> 0`.
pub fn ws_basis(r: f64) -> impl Fn(f64) -> Vec<f64> {
    move |e: f64| {
        if r == 1.0 {
            vec![1.0, e * e.ln(), e]
        } else {
            vec![1.0, e.powf((2.0 - r) / r), e]
        }
    }
}

#[derive(Clone, Debug)]
pub struct WsResult {
    pub matrix: SurfaceMatrix,
    pub e_sequence: Vec<f64>,
    /// `W(e_j) = Q_{e_j} - f(e_j) V_S²` before extrapolation.
    pub samples: Vec<SurfaceMatrix>,
    /// `||W(e_j) - W(e_{j+1})||`.
    pub cauchy_residuals: Vec<f64>,
}

impl WsResult {
    pub fn residuals_decrease(&self) -> bool {
        self.cauchy_residuals.windows(2).all(|w| w[1] < w[0])
    }
}

/// `W(e) = Q_e - f(e) V_S²`, from `F_S V F_S* = V_S`.
pub fn w_at(
    quad: &SurfaceQuadrature,
    v: &Potential,
    sym: &KineticSymbol,
    vs: &SurfaceMatrix,
    e: f64,
    grid: &MomentumGrid,
) -> Result<SurfaceMatrix> {
    let q = assemble_q(quad, v, sym, e, grid)?;
    let vs2 = vs.squared();
    Ok(SurfaceMatrix::combine(&[(1.0, &q), (-f_of_e(e, sym.r)?, &vs2)]))
}

/// Extrapolates `W(e)` to `e = 0` over a decreasing `e` sequence.
pub fn assemble_ws(
    quad: &SurfaceQuadrature,
    v: &Potential,
    sym: &KineticSymbol,
    e_sequence: &[f64],
    grid: &MomentumGrid,
) -> Result<WsResult> {
    if sym.r >= 2.0 {
        return Err(Error::Unsupported(format!("W_S is unbounded for r >= 2 (r = {})", sym.r)));
    }
    if e_sequence.len() < 3 || e_sequence.windows(2).any(|w| !(w[1] < w[0])) || e_sequence[0] <= 0.0 {
        return Err(Error::param("W_S needs a strictly decreasing sequence of at least three positive e values"));
    }
    let vs = assemble_vs(quad, v)?;
    let samples = e_sequence.iter().map(|&e| w_at(quad, v, sym, &vs, e, grid)).collect::<Result<Vec<_>>>()?;
    let alpha = extrapolation_weights(e_sequence, ws_basis(sym.r))?;
    let terms: Vec<(f64, &SurfaceMatrix)> = alpha.iter().copied().zip(samples.iter()).collect();
    let mut matrix = SurfaceMatrix::combine(&terms);
    symmetrize(&mut matrix.dense);
    let cauchy = samples
        .windows(2)
        .map(|w| SurfaceMatrix::combine(&[(1.0, &w[0]), (-1.0, &w[1])]).norm())
        .collect::<Result<Vec<_>>>()?;
    let result = WsResult { matrix, e_sequence: e_sequence.to_vec(), samples, cauchy_residuals: cauchy };
    if !result.residuals_decrease() {
        log::warn!("W(e) Cauchy residuals do not decrease: {:?}", result.cauchy_residuals);
    }
    Ok(result)
}

/// `V_S`, its spectrum and, when assembled, `W_S`.
#[derive(Clone, Debug)]
pub struct SurfaceOperatorSet {
    pub quad: SurfaceQuadrature,
    pub vs: SurfaceMatrix,
    pub eigs_vs: Vec<EigenPair>,
    pub ws: Option<WsResult>,
}

impl SurfaceOperatorSet {
    pub fn new(quad: SurfaceQuadrature, v: &Potential, count: usize) -> Result<Self> {
        let vs = assemble_vs(&quad, v)?;
        let eigs_vs = surface_spectrum(&vs, count.min(vs.size()))?;
        Ok(SurfaceOperatorSet { quad, vs, eigs_vs, ws: None })
    }

    pub fn with_ws(
        mut self,
        v: &Potential,
        sym: &KineticSymbol,
        e_sequence: &[f64],
        grid: &MomentumGrid,
    ) -> Result<Self> {
        self.ws = Some(assemble_ws(&self.quad, v, sym, e_sequence, grid)?);
        Ok(self)
    }

    pub fn ws(&self) -> Result<&SurfaceMatrix> {
        self.ws.as_ref().map(|w| &w.matrix).ok_or_else(|| Error::param("W_S has not been assembled"))
    }

    /// `B_S(λ) = V_S - λ W_S`.
    pub fn bs_matrix(&self, lambda: f64) -> Result<SurfaceMatrix> {
        let ws = self.ws()?;
        Ok(SurfaceMatrix::combine(&[(1.0, &self.vs), (-lambda, ws)]))
    }

    /// Eigenpairs of `B_S(λ)`, reordered so entry `i` matches `eigs_vs[i]`
    /// by maximal eigenspace overlap.
    pub fn assemble_bs_surface(&self, lambda: f64) -> Result<Vec<EigenPair>> {
        let bs = self.bs_matrix(lambda)?;
        let all = surface_spectrum(&bs, bs.size())?;
        let map = match_by_overlap(&self.eigs_vs, &all, 1e-8);
        Ok(map.into_iter().map(|j| all[j].clone()).collect())
    }

    /// `(u_j, W_S u_l)` over the eigenspace containing `eigs_vs[index]`.
    pub fn projected_ws(&self, index: usize) -> Result<(std::ops::Range<usize>, Mat<f64>)> {
        let ws = self.ws()?;
        let values: Vec<f64> = self.eigs_vs.iter().map(|p| p.value).collect();
        let group = eigenspace_groups(&values, 1e-8)
            .into_iter()
            .find(|g| g.contains(&index))
            .ok_or_else(|| Error::param(format!("eigen index {index} out of range")))?;
        let k = group.len();
        let m = Mat::from_fn(k, k, |a, b| {
            ws.form(&self.eigs_vs[group.start + a].vector, &self.eigs_vs[group.start + b].vector)
        });
        Ok((group, m))
    }
}

/// For every reference pair, the index of the candidate with the largest
/// projection onto the reference eigenspace; ties go to the nearest
/// eigenvalue. Each candidate is used at most once.
pub fn match_by_overlap(reference: &[EigenPair], candidates: &[EigenPair], group_tol: f64) -> Vec<usize> {
    let values: Vec<f64> = reference.iter().map(|p| p.value).collect();
    let groups = eigenspace_groups(&values, group_tol);
    let mut used = vec![false; candidates.len()];
    let mut out = vec![0; reference.len()];
    for g in groups {
        let overlap: Vec<f64> = candidates
            .iter()
            .map(|c| g.clone().map(|i| linalg::dot(&reference[i].vector, &c.vector).powi(2)).sum())
            .collect();
        for i in g.clone() {
            let best = (0..candidates.len())
                .filter(|&j| !used[j])
                .max_by(|&a, &b| {
                    let (oa, ob) = ((overlap[a] * 1e6).round(), (overlap[b] * 1e6).round());
                    oa.total_cmp(&ob).then_with(|| {
                        let da = (candidates[a].value - reference[i].value).abs();
                        let db = (candidates[b].value - reference[i].value).abs();
                        db.total_cmp(&da)
                    })
                })
                .expect("at least as many candidates as references");
            used[best] = true;
            out[i] = best;
        }
    }
    out
}
