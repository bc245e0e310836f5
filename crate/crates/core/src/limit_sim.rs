//! Simulation of the limit law `max_b Z_β(b)²` of `T_{n,β}`.
//!
//! Both methods reduce to a low-rank factor `L` (cover points × latent
//! dimensions) with `Z = L N` for standard normal `N`: either from the
//! eigendecomposition of the kernel matrix on the cover, or from the
//! spherical-harmonic expansion of the process.

use crate::error::{Error, Result};
use crate::geometry::{self, make_cover, DirectionCover};
use crate::legendre::nu;
use crate::rng::{self, tag, Rng};
use crate::special::{quantile_sorted, sort_floats};
use crate::zonal_kernel::ZonalKernel;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Real orthonormal spherical harmonics of one order on `S¹` or `S²`.
///
/// Normalized so that `∫ φ_i φ_j dσ = δ_ij` for the surface measure `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarmonicBasis {
    d: usize,
    order: usize,
}

impl HarmonicBasis {
    pub fn new(d: usize, order: usize) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::Unsupported(format!(
                "harmonic bases are implemented for d ∈ {{2, 3}}, got d = {d}"
            )));
        }
        Ok(HarmonicBasis { d, order })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        nu(self.d, self.order) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All basis functions at the unit vector `u`, written into `out`.
    pub fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        let k = self.order;
        if self.d == 2 {
            if k == 0 {
                out[0] = 1.0 / (2.0 * PI).sqrt();
                return;
            }
            let (re, im) = complex_pow(u[0], u[1], k);
            let s = 1.0 / PI.sqrt();
            out[0] = s * re;
            out[1] = s * im;
            return;
        }
        // Y_k^m ∝ Q_k^m(z) Re/Im (x + iy)^m, with Q the associated Legendre
        // function divided by sin^m.
        let z = u[2];
        out[0] = norm_s2(k, 0) * reduced_assoc_legendre(k, 0, z);
        for m in 1..=k {
            let q = std::f64::consts::SQRT_2 * norm_s2(k, m) * reduced_assoc_legendre(k, m, z);
            let (re, im) = complex_pow(u[0], u[1], m);
            out[2 * m - 1] = q * re;
            out[2 * m] = q * im;
        }
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(u, &mut out);
        out
    }
}

fn complex_pow(x: f64, y: f64, m: usize) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..m {
        (re, im) = (re * x - im * y, re * y + im * x);
    }
    (re, im)
}

/// `√((2k+1)/(4π) · (k−m)!/(k+m)!)`.
fn norm_s2(k: usize, m: usize) -> f64 {
    let mut ratio = 1.0;
    for i in (k - m + 1)..=(k + m) {
        ratio /= i as f64;
    }
    ((2 * k + 1) as f64 / (4.0 * PI) * ratio).sqrt()
}

/// `P_k^m(z) / (1 − z²)^{m/2}` by the upward recurrence in `k`.
fn reduced_assoc_legendre(k: usize, m: usize, z: f64) -> f64 {
    let mut pmm = 1.0;
    for i in 1..=m {
        pmm *= (2 * i - 1) as f64;
    }
    if k == m {
        return pmm;
    }
    let mut prev = pmm;
    let mut cur = z * (2 * m + 1) as f64 * pmm;
    for l in (m + 2)..=k {
        let next = ((2 * l - 1) as f64 * z * cur - (l + m - 1) as f64 * prev) / (l - m) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMethod {
    Kernel,
    Harmonic,
}

impl std::fmt::Display for LimitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LimitMethod::Kernel => "kernel",
            LimitMethod::Harmonic => "harmonic",
        })
    }
}

/// Empirical quantile of the simulated limit law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitQuantile {
    pub beta: usize,
    pub d: usize,
    pub alpha: f64,
    pub method: LimitMethod,
    pub m: usize,
    pub replications: usize,
    pub seed: u64,
    pub value: f64,
    pub mc_stderr: f64,
}

/// Low-rank factor `L` (row-major, `m × rank`) with `Z = L N` on the cover.
#[derive(Debug, Clone)]
pub struct GaussianFactor {
    m: usize,
    rank: usize,
    data: Vec<f64>,
    /// Largest entry of `|Σ − L Lᵀ|` (kernel method only).
    pub residual: f64,
}

impl GaussianFactor {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Covariance `(L Lᵀ)_{ij}`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row(i), self.row(j));
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.rank..(i + 1) * self.rank]
    }

    /// One draw of `Z` on the cover.
    pub fn draw_into(&self, rng: &mut Rng, normals: &mut [f64], z: &mut [f64]) {
        for x in normals.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        for (zi, row) in z.iter_mut().zip(self.data.chunks_exact(self.rank)) {
            *zi = row.iter().zip(normals.iter()).map(|(a, b)| a * b).sum();
        }
    }

    /// `max_i Z_i²` for one draw.
    pub fn max_square(&self, normals: &[f64]) -> f64 {
        let mut best = 0.0f64;
        for row in self.data.chunks_exact(self.rank) {
            let v: f64 = row.iter().zip(normals.iter()).map(|(a, b)| a * b).sum();
            best = best.max(v * v);
        }
        best
    }
}

/// Factor of `[ρ_β(B_i·B_j)]` by symmetric eigendecomposition; negative
/// eigenvalues are clipped at zero and numerically null directions dropped.
pub fn kernel_factor(beta: usize, cover: &DirectionCover) -> Result<GaussianFactor> {
    let kernel = ZonalKernel::new(beta, cover.d())?;
    let pts = cover.points();
    let m = pts.n();
    let sigma = DMatrix::from_fn(m, m, |i, j| {
        kernel.rho_unchecked(geometry::dot(pts.row(i), pts.row(j)).clamp(-1.0, 1.0))
    });
    let eig = SymmetricEigen::try_new(sigma.clone(), 1e-14, 0)
        .ok_or_else(|| Error::numerical("kernel matrix eigendecomposition", f64::NAN))?;
    let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let keep: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > top * 1e-12).collect();
    let rank = keep.len();
    let mut data = vec![0.0; m * rank];
    for (c, &k) in keep.iter().enumerate() {
        let s = eig.eigenvalues[k].sqrt();
        for i in 0..m {
            data[i * rank + c] = eig.eigenvectors[(i, k)] * s;
        }
    }
    let mut f = GaussianFactor {
        m,
        rank,
        data,
        residual: 0.0,
    };
    let mut residual = 0.0f64;
    for i in 0..m {
        for j in 0..=i {
            residual = residual.max((sigma[(i, j)] - f.covariance(i, j)).abs());
        }
    }
    f.residual = residual;
    Ok(f)
}

/// Factor with rows `√|S^{d-1}| · (√λ_k φ_{k,j}(b))_{k,j}` from the harmonic expansion.
pub fn harmonic_factor(beta: usize, cover: &DirectionCover) -> Result<GaussianFactor> {
    let d = cover.d();
    let spectrum = ZonalKernel::new(beta, d)?.spectrum();
    let area = geometry::surface_area(d)?;
    let mut orders = Vec::new();
    for k in 1..=beta {
        let lambda = spectrum.lambda(k);
        if lambda > 0.0 {
            orders.push((HarmonicBasis::new(d, k)?, (area * lambda).sqrt()));
        }
    }
    let rank: usize = orders.iter().map(|(b, _)| b.len()).sum();
    let m = cover.m();
    let mut data = vec![0.0; m * rank];
    for (i, b) in cover.points().rows().enumerate() {
        let row = &mut data[i * rank..(i + 1) * rank];
        let mut off = 0;
        for (basis, scale) in &orders {
            let seg = &mut row[off..off + basis.len()];
            basis.eval_into(b, seg);
            seg.iter_mut().for_each(|x| *x *= scale);
            off += basis.len();
        }
    }
    Ok(GaussianFactor {
        m,
        rank,
        data,
        residual: 0.0,
    })
}

fn simulate_max(factor: &GaussianFactor, replications: usize, seed: u64) -> Vec<f64> {
    (0..replications)
        .into_par_iter()
        .map_init(
            || vec![0.0; factor.rank],
            |normals, r| {
                let mut rng = rng::stream(seed, tag::LIMIT, r as u64);
                for x in normals.iter_mut() {
                    *x = StandardNormal.sample(&mut rng);
                }
                factor.max_square(normals)
            },
        )
        .collect()
}

fn check_counts(m: usize, d: usize, replications: usize) -> Result<()> {
    if m < d {
        return Err(Error::Input(format!("cover size m = {m} must be ≥ d = {d}")));
    }
    if replications == 0 {
        return Err(Error::Input("replications must be ≥ 1".into()));
    }
    Ok(())
}

/// `max_b Z_β(b)²` over a cover of size `m`, by the kernel-matrix method.
pub fn simulate_kernel_max(beta: usize, d: usize, m: usize, replications: usize, seed: u64) -> Result<Vec<f64>> {
    check_counts(m, d, replications)?;
    let cover = make_cover(d, m, seed)?;
    let factor = kernel_factor(beta, &cover)?;
    Ok(simulate_max(&factor, replications, seed))
}

/// `max_b Z_β(b)²` over a cover of size `m`, by the harmonic expansion.
pub fn simulate_harmonic_max(beta: usize, d: usize, m: usize, replications: usize, seed: u64) -> Result<Vec<f64>> {
    if d != 2 && d != 3 {
        return Err(Error::Unsupported(format!(
            "harmonic method needs d ∈ {{2, 3}}, got d = {d}"
        )));
    }
    if beta > 6 {
        return Err(Error::Unsupported(format!(
            "harmonic method needs β ≤ 6, got β = {beta}"
        )));
    }
    check_counts(m, d, replications)?;
    let cover = make_cover(d, m, seed)?;
    let factor = harmonic_factor(beta, &cover)?;
    Ok(simulate_max(&factor, replications, seed))
}

/// Number of bootstrap resamples behind quantile standard errors.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Type-7 `p`-quantile of `values` and its bootstrap standard error.
pub fn quantile_with_se(values: &[f64], p: f64, seed: u64) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sort_floats(&mut sorted);
    let q = quantile_sorted(&sorted, p);
    let n = values.len();
    if n < 2 {
        return (q, f64::NAN);
    }
    let mut rng = rng::stream(seed, tag::BOOTSTRAP, 0);
    let mut buf = vec![0.0; n];
    let mut qs = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for x in buf.iter_mut() {
            *x = sorted[rng.random_range(0..n)];
        }
        qs.push(select_quantile(&mut buf, p));
    }
    let mean = qs.iter().sum::<f64>() / qs.len() as f64;
    let var = qs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (qs.len() - 1) as f64;
    (q, var.sqrt())
}

/// Type-7 quantile by selection; reorders `v`.
fn select_quantile(v: &mut [f64], p: f64) -> f64 {
    let len = v.len();
    let h = (len - 1) as f64 * p;
    let lo = h.floor() as usize;
    let (_, &mut a, rest) = v.select_nth_unstable_by(lo, |x, y| x.total_cmp(y));
    if lo + 1 >= len || h == lo as f64 {
        return a;
    }
    let b = rest.iter().cloned().fold(f64::INFINITY, f64::min);
    a + (h - lo as f64) * (b - a)
}

/// Empirical `alpha`-quantile of the limit law with bootstrap standard error.
pub fn limit_quantile(
    beta: usize,
    d: usize,
    alpha: f64,
    method: LimitMethod,
    m: usize,
    replications: usize,
    seed: u64,
) -> Result<LimitQuantile> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Input(format!("quantile level must lie in (0, 1), got {alpha}")));
    }
    let sims = match method {
        LimitMethod::Kernel => simulate_kernel_max(beta, d, m, replications, seed)?,
        LimitMethod::Harmonic => simulate_harmonic_max(beta, d, m, replications, seed)?,
    };
    let (value, mc_stderr) = quantile_with_se(&sims, alpha, seed);
    Ok(LimitQuantile {
        beta,
        d,
        alpha,
        method,
        m,
        replications,
        seed,
        value,
        mc_stderr,
    })
}

/// Default `(m, replications)` for the kernel method in dimension `d`.
pub fn default_kernel_settings(d: usize) -> (usize, usize) {
    if d <= 3 {
        (1000, 100_000)
    } else {
        (5000, 10_000)
    }
}

/// Default `(m, replications)` for the harmonic method.
pub const DEFAULT_HARMONIC_SETTINGS: (usize, usize) = (2500, 20_000);
