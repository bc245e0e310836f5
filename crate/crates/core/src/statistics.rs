//! The maximal-projection statistics `T_{n,β}` and competing uniformity tests.

use crate::error::{Error, Result};
use crate::geometry::{self, dot, DirectionCover, SphericalSample};
use crate::legendre::psi;
use crate::quadrature;
use crate::rng::Rng;
use crate::special::{beta_reg, kolmogorov_sf};
use nalgebra::SymmetricEigen;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

/// How a statistic or its p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    RandomCover,
    MonteCarloNull,
    Asymptotic,
}

/// Monte Carlo provenance attached to an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McMeta {
    pub cover_m: Option<usize>,
    pub seed: u64,
    pub replications: usize,
}

/// Value of one test statistic, optionally calibrated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    pub name: String,
    pub value: f64,
    pub pvalue: Option<f64>,
    pub method: Method,
    pub metadata: Option<McMeta>,
}

impl TestOutcome {
    fn plain(name: impl Into<String>, value: f64, method: Method) -> Self {
        TestOutcome {
            name: name.into(),
            value,
            pvalue: None,
            method,
            metadata: None,
        }
    }
}

/// `T_{n,β}` for `β = 1..=max_beta` from one pass over the cover.
///
/// Entry `β − 1` is `n · max_k (mean_j (B_k·U_j)^β − ψ_d(β))²`.
pub fn projection_maxima(sample: &SphericalSample, cover: &DirectionCover, max_beta: usize) -> Result<Vec<f64>> {
    let d = sample.d();
    if cover.d() != d {
        return Err(Error::Input(format!(
            "cover dimension {} differs from sample dimension {d}",
            cover.d()
        )));
    }
    if max_beta == 0 {
        return Err(Error::Input("β must be ≥ 1".into()));
    }
    let n = sample.n();
    let cols = sample.columns();
    let psis: Vec<f64> = (1..=max_beta).map(|b| psi(d, b)).collect();
    let mut best = vec![0.0f64; max_beta];
    let mut t = vec![0.0; n];
    let mut sums = vec![0.0; max_beta];
    let inv_n = 1.0 / n as f64;
    for b in cover.points().rows() {
        t.iter_mut().for_each(|x| *x = 0.0);
        for (k, &bk) in b.iter().enumerate() {
            let col = &cols[k * n..(k + 1) * n];
            t.iter_mut().zip(col).for_each(|(x, c)| *x += bk * c);
        }
        if max_beta <= 6 {
            power_sums_6(&t, &mut sums);
        } else {
            power_sums(&t, &mut sums);
        }
        for (i, s) in sums.iter().enumerate() {
            let dev = s * inv_n - psis[i];
            best[i] = best[i].max(dev * dev);
        }
    }
    Ok(best.into_iter().map(|v| v * n as f64).collect())
}

/// Power sums `Σ t^β` for `β = 1..=sums.len() ≤ 6` with four interleaved lanes.
fn power_sums_6(t: &[f64], sums: &mut [f64]) {
    let mut acc = [[0.0f64; 4]; 6];
    let chunks = t.chunks_exact(4);
    let rest = chunks.remainder();
    for c in chunks {
        for lane in 0..4 {
            let x = c[lane];
            let x2 = x * x;
            let x3 = x2 * x;
            let x4 = x2 * x2;
            acc[0][lane] += x;
            acc[1][lane] += x2;
            acc[2][lane] += x3;
            acc[3][lane] += x4;
            acc[4][lane] += x4 * x;
            acc[5][lane] += x4 * x2;
        }
    }
    for &x in rest {
        let x2 = x * x;
        let x4 = x2 * x2;
        acc[0][0] += x;
        acc[1][0] += x2;
        acc[2][0] += x2 * x;
        acc[3][0] += x4;
        acc[4][0] += x4 * x;
        acc[5][0] += x4 * x2;
    }
    for (s, a) in sums.iter_mut().zip(acc.iter()) {
        *s = a[0] + a[1] + a[2] + a[3];
    }
}

fn power_sums(t: &[f64], sums: &mut [f64]) {
    sums.iter_mut().for_each(|s| *s = 0.0);
    for &x in t {
        let mut p = 1.0;
        for s in sums.iter_mut() {
            p *= x;
            *s += p;
        }
    }
}

/// `T_{n,β}` approximated by the maximum over a random cover.
pub fn t_stat(sample: &SphericalSample, beta: usize, cover: &DirectionCover) -> Result<TestOutcome> {
    let v = projection_maxima(sample, cover, beta)?[beta - 1];
    Ok(TestOutcome {
        name: format!("T{beta}"),
        value: v,
        pvalue: None,
        method: Method::RandomCover,
        metadata: Some(McMeta {
            cover_m: Some(cover.m()),
            seed: cover.seed(),
            replications: 0,
        }),
    })
}

/// `T_{n,1} = n ‖Ū‖²`.
pub fn t1_closed(sample: &SphericalSample) -> f64 {
    let m = sample.mean();
    sample.n() as f64 * dot(&m, &m)
}

/// `T_{n,2} = n · max(|λ_min|, |λ_max|)²` for the eigenvalues of `S − I/d`.
pub fn t2_closed(sample: &SphericalSample) -> f64 {
    let d = sample.d();
    let mut s = sample.scatter();
    for i in 0..d {
        s[(i, i)] -= 1.0 / d as f64;
    }
    let ev = SymmetricEigen::new(s).eigenvalues;
    let ext = ev.max().abs().max(ev.min().abs());
    sample.n() as f64 * ext * ext
}

/// Classical circular statistics on `S¹`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircleStatistics {
    pub kuiper: f64,
    pub watson_u2: f64,
    pub ajne: f64,
    pub rayleigh_mod: f64,
}

/// Angles in `[0, 2π)` of a circular sample, in input order.
pub fn angles(sample: &SphericalSample) -> Result<Vec<f64>> {
    if sample.d() != 2 {
        return Err(Error::Input(format!(
            "circular statistics need d = 2, got d = {}",
            sample.d()
        )));
    }
    Ok(sample
        .rows()
        .map(|r| {
            let a = r[1].atan2(r[0]);
            if a < 0.0 {
                (a + 2.0 * PI).min(2.0 * PI - f64::EPSILON * 8.0)
            } else {
                a
            }
        })
        .collect())
}

/// Kuiper `V_n`, Watson `U²_n`, Ajne `A_n` and the modified Rayleigh statistic.
pub fn circle_classical(sample: &SphericalSample) -> Result<CircleStatistics> {
    let theta = angles(sample)?;
    let n = theta.len();
    let nf = n as f64;
    let mut x: Vec<f64> = theta.iter().map(|a| a / (2.0 * PI)).collect();
    // Stable sort keeps tied angles in input order.
    x.sort_by(|a, b| a.total_cmp(b));
    let (mut dp, mut dm) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (i, &xi) in x.iter().enumerate() {
        dp = dp.max((i + 1) as f64 / nf - xi);
        dm = dm.max(xi - i as f64 / nf);
    }
    let kuiper = nf.sqrt() * (dp + dm);
    let xbar = x.iter().sum::<f64>() / nf;
    let watson_u2 = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| ((xi - (i as f64 + 0.5) / nf) - (xbar - 0.5)).powi(2))
        .sum::<f64>()
        + 1.0 / (12.0 * nf);
    let mut dist = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let a = (theta[i] - theta[j]).abs();
            dist += a.min(2.0 * PI - a);
        }
    }
    let ajne = nf / 4.0 - dist / (nf * PI);
    let m = sample.mean();
    let r2 = dot(&m, &m);
    let rayleigh = 2.0 * nf * r2;
    let rayleigh_mod = (1.0 - 1.0 / (2.0 * nf)) * rayleigh + nf * r2 * r2 / 2.0;
    Ok(CircleStatistics {
        kuiper,
        watson_u2,
        ajne,
        rayleigh_mod,
    })
}

/// Sobolev-class statistics on `S^{d-1}`; Giné's is absent for `d = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevStatistics {
    pub ajne: f64,
    pub rayleigh_mod: f64,
    pub bingham: f64,
    pub gine: Option<f64>,
}

/// Angles `arccos⟨U_i, U_j⟩` for `i < j`, row by row.
pub fn pairwise_angles(sample: &SphericalSample) -> Vec<f64> {
    let n = sample.n();
    let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        let ui = sample.row(i);
        for j in i + 1..n {
            out.push(dot(ui, sample.row(j)).clamp(-1.0, 1.0).acos());
        }
    }
    out
}

/// Modified Rayleigh statistic `(1 − 1/(2n))R + R²/(2n(d+2))`, `R = d n ‖Ū‖²`.
pub fn rayleigh_mod(sample: &SphericalSample) -> f64 {
    let (n, d) = (sample.n() as f64, sample.d() as f64);
    let m = sample.mean();
    let r = d * n * dot(&m, &m);
    (1.0 - 1.0 / (2.0 * n)) * r + r * r / (2.0 * n * (d + 2.0))
}

/// Bingham's `n d (d+2)/2 · (tr S² − 1/d)`.
pub fn bingham_stat(sample: &SphericalSample) -> f64 {
    let (n, d) = (sample.n() as f64, sample.d() as f64);
    let s = sample.scatter();
    let tr2: f64 = s.iter().map(|x| x * x).sum();
    n * d * (d + 2.0) / 2.0 * (tr2 - 1.0 / d)
}

/// Ajne's statistic from precomputed pairwise angles.
pub fn ajne_from_angles(n: usize, angles: &[f64]) -> f64 {
    n as f64 / 4.0 - angles.iter().sum::<f64>() / (n as f64 * PI)
}

/// Giné's `G_n` from precomputed pairwise angles; `d ≥ 3`.
///
/// The constant uses `Γ(d/2−1)`, so the null distribution is centred near
/// `n/2 − (n−1)(d−1)Γ(d/2−1)²/(4Γ((d−1)/2)Γ((d+1)/2))`, not near `1/2` as with
/// the textbook `Γ((d−1)/2)` constant. Both are decreasing in `Σ sin ψ_ij`, so
/// calibrated tests agree.
pub fn gine_from_angles(d: usize, n: usize, angles: &[f64]) -> Result<f64> {
    if d < 3 {
        return Err(Error::Unsupported(
            "Giné's statistic is defined here for d ≥ 3 only".into(),
        ));
    }
    // (d−1)Γ(d/2−1)²/(2nΓ(d/2)²) = 2(d−1)/(n(d−2)²)
    let df = d as f64;
    let c = 2.0 * (df - 1.0) / (n as f64 * (df - 2.0).powi(2));
    Ok(n as f64 / 2.0 - c * angles.iter().map(|a| a.sin()).sum::<f64>())
}

pub fn sphere_sobolev(sample: &SphericalSample) -> SobolevStatistics {
    let angles = pairwise_angles(sample);
    let (n, d) = (sample.n(), sample.d());
    SobolevStatistics {
        ajne: ajne_from_angles(n, &angles),
        rayleigh_mod: rayleigh_mod(sample),
        bingham: bingham_stat(sample),
        gine: gine_from_angles(d, n, &angles).ok(),
    }
}

/// CDF `F_{d−1}` of `b·U` for uniform `U` on `S^{d-1}`.
pub fn projection_cdf(d: usize, y: f64) -> f64 {
    if y <= -1.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 1.0;
    }
    match d {
        2 => 1.0 - y.acos() / PI,
        3 => (1.0 + y) / 2.0,
        _ => {
            let b = beta_reg(0.5, (d as f64 - 1.0) / 2.0, y * y);
            0.5 * (1.0 + y.signum() * b)
        }
    }
}

/// One-sample Kolmogorov–Smirnov distance of `values` from `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &mut [f64], cdf: F) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len() as f64;
    let mut d = 0.0f64;
    for (i, &y) in values.iter().enumerate() {
        let f = cdf(y);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// Cuesta-Albertos random-projection statistic: the minimum over `q` random
/// directions of the asymptotic KS p-values. Small values are significant.
pub fn ca_test(sample: &SphericalSample, q: usize, rng: &mut Rng) -> Result<TestOutcome> {
    if q == 0 {
        return Err(Error::Input("number of projections must be ≥ 1".into()));
    }
    let d = sample.d();
    let n = sample.n();
    let mut h = vec![0.0; d];
    let mut proj = vec![0.0; n];
    let mut min_p = 1.0f64;
    for _ in 0..q {
        geometry::uniform_direction_into(rng, &mut h);
        for (p, row) in proj.iter_mut().zip(sample.rows()) {
            *p = dot(row, &h);
        }
        let k = ks_statistic(&mut proj, |y| projection_cdf(d, y));
        min_p = min_p.min(kolmogorov_sf((n as f64).sqrt() * k));
    }
    Ok(TestOutcome::plain(format!("CA{q}"), min_p, Method::Asymptotic))
}

/// Kernel `ζ_{d−1}(θ)` of the projected Cramér–von Mises U-statistic.
///
/// Closed forms for `d ≤ 4`; for `d ≥ 5` a cached table on a fine `θ` grid,
/// filled by adaptive quadrature and read with cubic interpolation.
pub fn cvm_kernel(d: usize, theta: f64) -> Result<f64> {
    let theta = theta.clamp(0.0, PI);
    match d {
        2 => Ok(zeta1(theta)),
        3 => Ok(0.5 - 0.25 * (theta / 2.0).sin()),
        4 => {
            let h = theta / 2.0;
            // (π − θ) tan(θ/2) → 2 as θ → π.
            let prod = if PI - theta < 1e-8 { 2.0 } else { (PI - theta) * h.tan() };
            Ok(zeta1(theta) + (prod - 2.0 * h.sin().powi(2)) / (4.0 * PI * PI))
        }
        _ if d >= 5 => Ok(zeta_table(d)?.eval(theta)),
        _ => Err(Error::Domain(format!("CvM kernel needs d ≥ 2, got {d}"))),
    }
}

fn zeta1(theta: f64) -> f64 {
    let r = theta / (2.0 * PI);
    0.5 + r * (r - 1.0)
}

/// `ζ_{d−1}(θ)` from the defining one-dimensional integral (valid for `d ≥ 3`).
pub fn cvm_kernel_by_quadrature(d: usize, theta: f64) -> Result<f64> {
    if d < 3 {
        return Err(Error::Domain("the integral form needs d ≥ 3".into()));
    }
    let half = theta / 2.0;
    let upper = half.cos();
    let tan = half.tan();
    let norm = crate::special::gamma((d as f64) / 2.0) / (PI.sqrt() * crate::special::gamma((d as f64 - 1.0) / 2.0));
    // dF_{d−1}(y) = norm · (1 − y²)^{(d−3)/2} dy, integrated in the angle y = cos φ.
    let q = quadrature::integrate_weighted(
        |y| {
            let arg = if y >= 1.0 { 0.0 } else { y * tan / (1.0 - y * y).sqrt() };
            projection_cdf(d, y) * projection_cdf(d - 1, arg)
        },
        d,
        0.0,
        upper,
        1e-12,
    );
    if !q.converged && q.error > 1e-10 {
        return Err(Error::numerical("CvM kernel quadrature", q.error));
    }
    let fu = projection_cdf(d, upper);
    Ok(-4.0 * norm * q.value - 0.75 + theta / (2.0 * PI) + 2.0 * fu * fu)
}

struct ZetaTable {
    step: f64,
    values: Vec<f64>,
}

const ZETA_NODES: usize = 4096;

impl ZetaTable {
    fn build(d: usize) -> Result<Self> {
        let step = PI / ZETA_NODES as f64;
        let values = (0..=ZETA_NODES)
            .map(|i| cvm_kernel_by_quadrature(d, i as f64 * step))
            .collect::<Result<Vec<_>>>()?;
        Ok(ZetaTable { step, values })
    }

    /// Four-point Lagrange interpolation on the uniform grid.
    fn eval(&self, theta: f64) -> f64 {
        let last = self.values.len() - 1;
        let x = theta / self.step;
        let i = (x.floor() as usize).clamp(1, last - 2);
        let s = x - i as f64;
        let (p0, p1, p2, p3) = (
            self.values[i - 1],
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
        );
        let w0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
        let w1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
        let w2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
        let w3 = (s + 1.0) * s * (s - 1.0) / 6.0;
        w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
    }
}

fn zeta_table(d: usize) -> Result<Arc<ZetaTable>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<ZetaTable>>>> = OnceLock::new();
    let map = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(t) = map.read().expect("cache poisoned").get(&d) {
        return Ok(Arc::clone(t));
    }
    let table = Arc::new(ZetaTable::build(d)?);
    Ok(map.write().expect("cache poisoned").entry(d).or_insert(table).clone())
}

/// Projected Cramér–von Mises statistic from precomputed pairwise angles.
///
/// With this kernel and offset the value is `n E_H ∫ (F_{n,H} − F)² dF + 5(n−1)/6`.
pub fn cvm_from_angles(d: usize, n: usize, angles: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    if d >= 5 {
        let table = zeta_table(d)?;
        for &a in angles {
            s += table.eval(a);
        }
    } else {
        for &a in angles {
            s += cvm_kernel(d, a)?;
        }
    }
    let nf = n as f64;
    Ok(2.0 / nf * s + (3.0 * nf - 2.0) / 6.0)
}

pub fn cvm_test(sample: &SphericalSample) -> Result<TestOutcome> {
    let v = cvm_from_angles(sample.d(), sample.n(), &pairwise_angles(sample))?;
    Ok(TestOutcome::plain("CvM", v, Method::ClosedForm))
}
