//! Dense symmetric eigensolves and block-circulant ("channel") operators.
//!
//! Every quadrature built from a radial symbol is a set of rings times a
//! uniform azimuthal rule, so a kernel `k(|p - q|)` sampled on two such
//! layouts is block-circulant in the azimuth index. The discrete Fourier
//! transform in azimuth splits it exactly into one small block per
//! azimuthal channel `m = 0..=M/2`; products of such operators (with
//! ring-constant diagonal factors) stay block-diagonal.

use std::f64::consts::PI;

use faer::{Mat, Side};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::symbols::RingLayout;

/// Runs dense factorizations single-threaded so results are bitwise
/// reproducible; parallelism then comes only from independent channels.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

pub fn sym_eigen(m: &Mat<f64>) -> Result<SymEigen> {
    if m.nrows() == 0 {
        return Ok(SymEigen { values: Vec::new(), vectors: Mat::zeros(0, 0) });
    }
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
    let values = evd.S().column_vector().iter().copied().collect();
    Ok(SymEigen { values, vectors: evd.U().to_owned() })
}

pub fn sym_eigenvalues(m: &Mat<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigen)
}

/// Largest entry of `|M - M^T|`.
pub fn symmetry_residual(m: &Mat<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm(m: &Mat<f64>) -> Result<f64> {
    Ok(sym_eigenvalues(m)?.iter().fold(0.0f64, |a, v| a.max(v.abs())))
}

/// `diag(left) * m * diag(right)`.
pub fn scale_rows_cols(m: &Mat<f64>, left: &[f64], right: &[f64]) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| left[i] * m[(i, j)] * right[j])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Whether the given channel of an `azimuths`-point rule carries a
/// cosine/sine pair.
pub fn channel_multiplicity(azimuths: usize, m: usize) -> usize {
    if m == 0 || 2 * m == azimuths {
        1
    } else {
        2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Parity {
    Cos,
    Sin,
}

/// Block-circulant operator stored as its channel blocks.
#[derive(Clone, Debug)]
pub struct Channels {
    pub azimuths: usize,
    pub blocks: Vec<Mat<f64>>,
}

impl Channels {
    pub fn count(&self) -> usize {
        self.blocks.len()
    }

    pub fn multiplicity(&self, m: usize) -> usize {
        channel_multiplicity(self.azimuths, m)
    }

    pub fn rows(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.blocks[0].ncols()
    }

    pub fn map<F: Fn(usize, &Mat<f64>) -> Mat<f64> + Sync>(&self, f: F) -> Channels {
        let blocks = self.blocks.par_iter().enumerate().map(|(m, b)| f(m, b)).collect();
        Channels { azimuths: self.azimuths, blocks }
    }

    pub fn zip_with<F: Fn(&Mat<f64>, &Mat<f64>) -> Mat<f64> + Sync>(&self, other: &Channels, f: F) -> Channels {
        assert_eq!(self.azimuths, other.azimuths);
        let blocks = self.blocks.par_iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect();
        Channels { azimuths: self.azimuths, blocks }
    }

    pub fn scaled(&self, s: f64) -> Channels {
        self.map(|_, b| b * faer::Scale(s))
    }

    /// Expands to the full matrix on ring-major nodes.
    pub fn to_dense(&self) -> Mat<f64> {
        let mm = self.azimuths;
        let (ra, rb) = (self.rows(), self.cols());
        // coefficient of each azimuth offset k in every channel
        let offsets = mm / 2 + 1;
        let mut coef = vec![0.0; offsets * self.count()];
        for k in 0..offsets {
            for m in 0..self.count() {
                coef[k * self.count() + m] = self.multiplicity(m) as f64
                    * (2.0 * PI * (m * k) as f64 / mm as f64).cos()
                    / mm as f64;
            }
        }
        Mat::from_fn(ra * mm, rb * mm, |i, j| {
            let (a, ja) = (i / mm, i % mm);
            let (b, jb) = (j / mm, j % mm);
            let d = (jb + mm - ja) % mm;
            let k = d.min(mm - d);
            (0..self.count()).map(|m| coef[k * self.count() + m] * self.blocks[m][(a, b)]).sum()
        })
    }

    /// Spectral norm of a symmetric channel operator.
    pub fn sym_norm(&self) -> Result<f64> {
        self.blocks.iter().try_fold(0.0f64, |acc, b| Ok(acc.max(sym_norm(b)?)))
    }

    pub fn symmetry_residual(&self) -> f64 {
        self.blocks.iter().map(symmetry_residual).fold(0.0, f64::max)
    }

    /// All eigenpairs, each channel eigenvalue listed once per parity.
    pub fn eigen(&self) -> Result<Vec<ChannelMode>> {
        let per: Vec<Result<SymEigen>> = self.blocks.par_iter().map(sym_eigen).collect();
        let mut out = Vec::new();
        for (m, evd) in per.into_iter().enumerate() {
            let evd = evd?;
            for (k, &value) in evd.values.iter().enumerate() {
                let v: Vec<f64> = evd.vectors.col(k).iter().copied().collect();
                out.push(ChannelMode { value, channel: m, parity: Parity::Cos, ring_vector: v.clone() });
                if self.multiplicity(m) == 2 {
                    out.push(ChannelMode { value, channel: m, parity: Parity::Sin, ring_vector: v });
                }
            }
        }
        out.sort_by(|a, b| {
            a.value
                .total_cmp(&b.value)
                .then(a.channel.cmp(&b.channel))
                .then(a.parity.cmp(&b.parity))
        });
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct ChannelMode {
    pub value: f64,
    pub channel: usize,
    pub parity: Parity,
    pub ring_vector: Vec<f64>,
}

impl ChannelMode {
    /// Node-space vector (ring-major), unit norm when the ring vector is.
    pub fn expand(&self, azimuths: usize) -> Vec<f64> {
        expand_channel_vector(&self.ring_vector, self.channel, self.parity, azimuths)
    }
}

pub fn expand_channel_vector(ring_vector: &[f64], m: usize, parity: Parity, azimuths: usize) -> Vec<f64> {
    let mm = azimuths as f64;
    let norm = if channel_multiplicity(azimuths, m) == 1 { 1.0 / mm.sqrt() } else { (2.0 / mm).sqrt() };
    let phase: Vec<f64> = (0..azimuths)
        .map(|j| {
            let x = 2.0 * PI * (m * j) as f64 / mm;
            norm * match parity {
                Parity::Cos => x.cos(),
                Parity::Sin => x.sin(),
            }
        })
        .collect();
    ring_vector.iter().flat_map(|&v| phase.iter().map(move |&c| v * c)).collect()
}

/// Channel blocks of `kernel(|p - q|^2)` between two ring layouts sharing
/// the same azimuthal rule. When `symmetric`, `a` and `b` must be the
/// same layout and the blocks are made exactly symmetric.
pub fn kernel_channels<F>(a: &RingLayout, b: &RingLayout, kernel: F, symmetric: bool) -> Result<Channels>
where
    F: Fn(f64) -> f64 + Sync,
{
    if a.azimuths != b.azimuths || a.dim != b.dim {
        return Err(Error::param("ring layouts must share dimension and azimuthal rule"));
    }
    let mm = a.azimuths;
    let half = mm / 2;
    let channels = half + 1;
    let cos_phi: Vec<f64> = (0..=half).map(|j| (2.0 * PI * j as f64 / mm as f64).cos()).collect();
    // weight of azimuth offset j (and its mirror M - j) in channel m
    let mut twiddle = vec![0.0; channels * (half + 1)];
    for m in 0..channels {
        for j in 0..=half {
            let mult = if j == 0 || 2 * j == mm { 1.0 } else { 2.0 };
            twiddle[m * (half + 1) + j] = mult * (2.0 * PI * (m * j) as f64 / mm as f64).cos();
        }
    }
    let (na, nb) = (a.rings.len(), b.rings.len());
    let rows: Vec<Vec<f64>> = (0..na)
        .into_par_iter()
        .map(|ia| {
            let ra = &a.rings[ia];
            let start = if symmetric { ia } else { 0 };
            let mut row = vec![0.0; (nb - start) * channels];
            let mut samples = vec![0.0; half + 1];
            for ib in start..nb {
                let rb = &b.rings[ib];
                for (j, s) in samples.iter_mut().enumerate() {
                    *s = kernel(ra.distance_sq(rb, cos_phi[j]));
                }
                for m in 0..channels {
                    let tw = &twiddle[m * (half + 1)..(m + 1) * (half + 1)];
                    row[(ib - start) * channels + m] = samples.iter().zip(tw).map(|(s, t)| s * t).sum();
                }
            }
            row
        })
        .collect();
    let mut blocks = vec![Mat::<f64>::zeros(na, nb); channels];
    for (ia, row) in rows.iter().enumerate() {
        let start = if symmetric { ia } else { 0 };
        for ib in start..nb {
            for (m, block) in blocks.iter_mut().enumerate() {
                let v = row[(ib - start) * channels + m];
                block[(ia, ib)] = v;
                if symmetric {
                    block[(ib, ia)] = v;
                }
            }
        }
    }
    Ok(Channels { azimuths: mm, blocks })
}

/// Dense kernel matrix `kernel(|p_i - q_j|^2)`.
pub fn kernel_dense<F>(a: &[[f64; 3]], b: &[[f64; 3]], kernel: F, symmetric: bool) -> Mat<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let rows: Vec<Vec<f64>> = a
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let start = if symmetric { i } else { 0 };
            b[start..].iter().map(|q| kernel(dist_sq(p, q))).collect()
        })
        .collect();
    let mut out = Mat::<f64>::zeros(a.len(), b.len());
    for (i, row) in rows.iter().enumerate() {
        let start = if symmetric { i } else { 0 };
        for (k, &v) in row.iter().enumerate() {
            out[(i, start + k)] = v;
            if symmetric {
                out[(start + k, i)] = v;
            }
        }
    }
    out
}

pub fn dist_sq(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::Ring;

    fn layout(dim: usize, azimuths: usize) -> RingLayout {
        let rings = vec![
            Ring { radius: 0.7, cos_polar: 0.3, sin_polar: (1.0f64 - 0.09).sqrt(), weight: 0.2, gradnorm: 1.0 },
            Ring { radius: 1.1, cos_polar: -0.5, sin_polar: 0.75f64.sqrt(), weight: 0.3, gradnorm: 1.0 },
            Ring { radius: 1.6, cos_polar: 0.0, sin_polar: 1.0, weight: 0.1, gradnorm: 1.0 },
        ];
        let mut rings = rings;
        if dim == 2 {
            // planar rings carry no polar angle
            for r in &mut rings {
                (r.cos_polar, r.sin_polar) = (0.0, 1.0);
            }
        }
        RingLayout { dim, azimuths, rings }
    }

    #[test]
    fn channels_reproduce_dense_kernel() {
        for (dim, mm) in [(2, 8), (3, 7), (3, 10)] {
            let l = layout(dim, mm);
            let k = |d2: f64| (-0.7 * d2).exp();
            let ch = kernel_channels(&l, &l, k, true).unwrap();
            let dense = kernel_dense(&l.points(), &l.points(), k, true);
            let back = ch.to_dense();
            for i in 0..dense.nrows() {
                for j in 0..dense.ncols() {
                    assert!((dense[(i, j)] - back[(i, j)]).abs() < 1e-13, "{dim} {mm} {i} {j}");
                }
            }
            assert_eq!(symmetry_residual(&back), 0.0);
        }
    }

    #[test]
    fn channel_spectrum_matches_dense_spectrum() {
        let l = layout(3, 6);
        let ch = kernel_channels(&l, &l, |d2| (-d2).exp(), true).unwrap();
        let modes = ch.eigen().unwrap();
        let dense = sym_eigenvalues(&ch.to_dense()).unwrap();
        assert_eq!(modes.len(), dense.len());
        for (m, d) in modes.iter().zip(&dense) {
            assert!((m.value - d).abs() < 1e-12);
        }
        let full = ch.to_dense();
        for mode in &modes {
            let v = mode.expand(6);
            assert!((norm2(&v) - 1.0).abs() < 1e-12);
            for i in 0..full.nrows() {
                let av: f64 = (0..full.ncols()).map(|j| full[(i, j)] * v[j]).sum();
                assert!((av - mode.value * v[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cross_products_stay_block_diagonal() {
        let a = layout(2, 8);
        let mut b = layout(2, 8);
        b.rings.truncate(2);
        b.rings[0].radius = 2.0;
        let k = |d2: f64| 1.0 / (1.0 + d2);
        let cab = kernel_channels(&a, &b, k, false).unwrap();
        let prod = cab.map(|_, m| m * m.transpose());
        let dense = kernel_dense(&a.points(), &b.points(), k, false);
        let expect = &dense * dense.transpose();
        let got = prod.to_dense();
        for i in 0..expect.nrows() {
            for j in 0..expect.ncols() {
                assert!((expect[(i, j)] - got[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn multiplicities() {
        assert_eq!(channel_multiplicity(8, 0), 1);
        assert_eq!(channel_multiplicity(8, 4), 1);
        assert_eq!(channel_multiplicity(8, 3), 2);
        assert_eq!(channel_multiplicity(7, 3), 2);
    }
}
