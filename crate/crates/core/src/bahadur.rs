//! Kullback–Leibler numbers, approximate Bahadur slopes of `√T_{n,β}` and
//! their local efficiencies against the likelihood-ratio test.

use crate::error::{Error, Result};
use crate::geometry::{area, area_ratio, DirectionCover};
use crate::legendre::{self, legendre_moment, nu, power_expansion, psi};
use crate::quadrature;
use crate::zonal_kernel::ZonalKernel;
use serde::Serialize;
use std::fmt;

pub use crate::special::{bessel_i, bessel_i_scaled_tail, kummer_m, kummer_m_tail};

const SERIES_CAP: usize = 10_000;

/// Alternative families with a scalar concentration `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Family {
    VonMisesFisher,
    Watson,
    /// Density `(1 + κ P_m^d(θ·x)) / |S^{d-1}|` of order `m`.
    Legendre(usize),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::VonMisesFisher => f.write_str("vMF"),
            Family::Watson => f.write_str("W"),
            Family::Legendre(m) => write!(f, "LP{m}"),
        }
    }
}

impl Family {
    /// Order of the harmonic carrying the local signal.
    pub fn order(&self) -> usize {
        match self {
            Family::VonMisesFisher => 1,
            Family::Watson => 2,
            Family::Legendre(m) => *m,
        }
    }

    fn check(&self, d: usize, kappa: f64) -> Result<()> {
        if d < 2 {
            return Err(Error::Domain(format!("dimension must be ≥ 2, got {d}")));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::Domain(format!("κ must be finite and ≥ 0, got {kappa}")));
        }
        if let Family::Legendre(m) = self {
            if *m == 0 {
                return Err(Error::Domain("Legendre order must be ≥ 1".into()));
            }
            if kappa > 1.0 {
                return Err(Error::Domain(format!("Legendre alternative needs κ ≤ 1, got {kappa}")));
            }
        }
        Ok(())
    }
}

/// `A_d(κ) = I_{d/2}(κ)/I_{d/2−1}(κ)`, the mean resultant length under vMF.
pub fn mean_resultant(d: usize, kappa: f64) -> Result<f64> {
    let p = d as f64 / 2.0;
    let num = bessel_i_scaled_tail(p, kappa)?;
    let den = bessel_i_scaled_tail(p - 1.0, kappa)?;
    Ok(kappa / d as f64 * (1.0 + num) / (1.0 + den))
}

/// `a_d(κ) = ∫ exp(κ θ·x) dσ(x)`, the vMF normalizing integral.
pub fn vmf_normalizer(d: usize, kappa: f64) -> Result<f64> {
    Ok(area(d) * (1.0 + bessel_i_scaled_tail(d as f64 / 2.0 - 1.0, kappa)?))
}

/// `D_d(κ) = E_κ (θ·U)²` under the Watson law.
pub fn watson_second_moment(d: usize, kappa: f64) -> Result<f64> {
    let h = d as f64 / 2.0;
    let num = kummer_m_tail(1.5, h + 1.0, kappa)?;
    let den = kummer_m_tail(0.5, h, kappa)?;
    Ok((1.0 + num) / ((1.0 + den) * d as f64))
}

/// `d_d(κ) = |S^{d-1}| M(1/2, d/2, κ)`, the Watson normalizing integral.
pub fn watson_normalizer(d: usize, kappa: f64) -> Result<f64> {
    Ok(area(d) * kummer_m(0.5, d as f64 / 2.0, kappa)?)
}

/// Kullback–Leibler number `KL(κ, 0)` of the alternative against uniformity.
pub fn kl_divergence(family: Family, d: usize, kappa: f64) -> Result<f64> {
    family.check(d, kappa)?;
    if kappa == 0.0 {
        return Err(Error::Domain("KL number needs κ > 0".into()));
    }
    match family {
        Family::VonMisesFisher => {
            let tail = bessel_i_scaled_tail(d as f64 / 2.0 - 1.0, kappa)?;
            Ok(mean_resultant(d, kappa)? * kappa - tail.ln_1p())
        }
        Family::Watson => {
            let tail = kummer_m_tail(0.5, d as f64 / 2.0, kappa)?;
            Ok(watson_second_moment(d, kappa)? * kappa - tail.ln_1p())
        }
        Family::Legendre(m) => {
            let p = legendre::polynomial(d, m);
            // (1+x)ln(1+x) − x integrates to the same value because ∫P_m = 0,
            // and its series avoids cancellation for small κ.
            let q = quadrature::integrate_weighted(|t| entropy_term(kappa * p.eval(t)), d, -1.0, 1.0, 1e-15);
            if !q.converged && q.error > 1e-13 {
                return Err(Error::numerical("Legendre KL quadrature", q.error));
            }
            Ok(area_ratio(d) * q.value)
        }
    }
}

/// `(1+x)ln(1+x) − x` for `x ≥ −1`.
fn entropy_term(x: f64) -> f64 {
    if x <= -1.0 {
        return 1.0;
    }
    if x.abs() < 0.1 {
        // Σ_{k≥2} (−1)^k x^k / (k(k−1))
        let mut sum = 0.0;
        let mut pow = x * x;
        for k in 2..40 {
            let term = pow / (k * (k - 1)) as f64;
            sum += if k % 2 == 0 { term } else { -term };
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
            pow *= x;
        }
        return sum;
    }
    (1.0 + x) * x.ln_1p() - x
}

/// `E_κ P_j^d(θ·U)` for the vMF (`step = 1`) or Watson (`step = 2`) law,
/// summed as `Σ_l κ^l/l! Δ_j(step·l)` over the normalizing series.
fn zonal_moment_series(d: usize, j: usize, kappa: f64, step: usize) -> Result<f64> {
    if kappa == 0.0 {
        return Ok(if j == 0 { 1.0 } else { 0.0 });
    }
    if step == 2 && j % 2 == 1 {
        return Ok(0.0);
    }
    let ln_k = kappa.ln();
    let mut sum = 0.0;
    let mut started = false;
    for l in 0..SERIES_CAP {
        let delta = legendre_moment(d, j, step * l);
        if delta == 0.0 {
            continue;
        }
        let term = (l as f64 * ln_k - crate::special::ln_gamma(l as f64 + 1.0)).exp() * delta;
        sum += term;
        if started && term <= 1e-17 * sum.abs() && l as f64 > kappa {
            let norm = match step {
                1 => 1.0 + bessel_i_scaled_tail(d as f64 / 2.0 - 1.0, kappa)?,
                _ => kummer_m(0.5, d as f64 / 2.0, kappa)?,
            };
            return Ok(area_ratio(d) * sum / norm);
        }
        started = true;
    }
    Err(Error::numerical("zonal moment series", sum))
}

/// `γ_κ` as a function of `t = θ·b`: `E_κ (b·U)^β − ψ_d(β)`.
pub fn gamma_profile(family: Family, beta: usize, d: usize, kappa: f64, t: f64) -> Result<f64> {
    Ok(GammaProfile::new(family, beta, d, kappa)?.eval(t))
}

/// `γ_κ(t) = Σ_{j≥1} c_{j,d}(β) E_κ P_j(θ·U) P_j(t)`, coefficients precomputed.
struct GammaProfile {
    d: usize,
    weights: Vec<(usize, f64)>,
}

impl GammaProfile {
    fn new(family: Family, beta: usize, d: usize, kappa: f64) -> Result<Self> {
        family.check(d, kappa)?;
        if beta == 0 {
            return Err(Error::Domain("β must be ≥ 1".into()));
        }
        let exp = power_expansion(d, beta);
        let mut weights = Vec::new();
        for j in 1..=beta {
            let c = exp.coeff_f64(j);
            if c == 0.0 {
                continue;
            }
            let mean = match family {
                Family::VonMisesFisher => zonal_moment_series(d, j, kappa, 1)?,
                Family::Watson => zonal_moment_series(d, j, kappa, 2)?,
                Family::Legendre(m) => {
                    if j == m {
                        kappa / nu(d, m) as f64
                    } else {
                        0.0
                    }
                }
            };
            if mean != 0.0 {
                weights.push((j, c * mean));
            }
        }
        Ok(GammaProfile { d, weights })
    }

    fn eval(&self, t: f64) -> f64 {
        self.weights
            .iter()
            .map(|&(j, w)| w * legendre::polynomial(self.d, j).eval(t))
            .sum()
    }
}

/// `max_b γ_κ(b)²`, over the whole sphere when `cover` is `None` (grid plus
/// golden-section refinement in `t = θ·b`), otherwise over the cover with
/// `θ = e₁`.
pub fn gamma_shift(family: Family, beta: usize, d: usize, kappa: f64, cover: Option<&DirectionCover>) -> Result<f64> {
    let g = GammaProfile::new(family, beta, d, kappa)?;
    if let Some(c) = cover {
        if c.d() != d {
            return Err(Error::Input("cover dimension mismatch".into()));
        }
        return Ok(c
            .points()
            .rows()
            .map(|b| g.eval(b[0].clamp(-1.0, 1.0)).powi(2))
            .fold(0.0, f64::max));
    }
    let sq = |t: f64| g.eval(t).powi(2);
    const GRID: usize = 2000;
    let h = 2.0 / GRID as f64;
    let mut best_i = 0;
    let mut best = sq(-1.0);
    for i in 1..=GRID {
        let v = sq(-1.0 + i as f64 * h);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let (mut a, mut b) = (
        (-1.0 + (best_i as f64 - 1.0) * h).max(-1.0),
        (-1.0 + (best_i as f64 + 1.0) * h).min(1.0),
    );
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if sq(x1) < sq(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    Ok(best.max(sq(0.5 * (a + b))))
}

/// Approximate Bahadur slope `max γ² / Σ λ_j ν_d(j)`.
pub fn slope(family: Family, beta: usize, d: usize, kappa: f64, cover: Option<&DirectionCover>) -> Result<f64> {
    let trace = ZonalKernel::new(beta, d)?.spectrum().trace();
    Ok(gamma_shift(family, beta, d, kappa, cover)? / trace)
}

/// `λ_k ν_d(k)` with `k` the signal order of the family: the limit of
/// `max γ² / (2 KL)` as `κ → 0⁺`.
pub fn local_limit(family: Family, beta: usize, d: usize) -> Result<f64> {
    let spectrum = ZonalKernel::new(beta, d)?.spectrum();
    let k = family.order();
    Ok(spectrum.lambda(k) * nu(d, k) as f64)
}

/// Local Bahadur ARE of `√T_{n,β}` relative to the likelihood-ratio test.
pub fn local_are(family: Family, beta: usize, d: usize) -> Result<f64> {
    let trace = ZonalKernel::new(beta, d)?.spectrum().trace();
    Ok(local_limit(family, beta, d)? / trace)
}

/// `max γ²/(2 KL)` at one κ.
pub fn efficiency_ratio(family: Family, beta: usize, d: usize, kappa: f64) -> Result<f64> {
    Ok(gamma_shift(family, beta, d, kappa, None)? / (2.0 * kl_divergence(family, d, kappa)?))
}

/// Richardson extrapolation in `κ²` of [`efficiency_ratio`] from `κ₁ > κ₂`.
pub fn extrapolated_ratio(family: Family, beta: usize, d: usize, k1: f64, k2: f64) -> Result<f64> {
    let (r1, r2) = (
        efficiency_ratio(family, beta, d, k1)?,
        efficiency_ratio(family, beta, d, k2)?,
    );
    let (a, b) = (k1 * k1, k2 * k2);
    Ok((r2 * a - r1 * b) / (a - b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BahadurReport {
    pub beta: usize,
    pub d: usize,
    pub family: Family,
    pub kappas: Vec<f64>,
    pub slopes: Vec<f64>,
    pub kl: Vec<f64>,
    pub local_are: f64,
}

pub fn bahadur_report(family: Family, beta: usize, d: usize, kappas: &[f64]) -> Result<BahadurReport> {
    let mut slopes = Vec::with_capacity(kappas.len());
    let mut kl = Vec::with_capacity(kappas.len());
    for &k in kappas {
        slopes.push(slope(family, beta, d, k, None)?);
        kl.push(kl_divergence(family, d, k)?);
    }
    Ok(BahadurReport {
        beta,
        d,
        family,
        kappas: kappas.to_vec(),
        slopes,
        kl,
        local_are: local_are(family, beta, d)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreEntry {
    pub family: Family,
    pub beta: usize,
    pub d: usize,
    pub value: f64,
}

/// Dimensions tabulated by [`are_table`].
pub const ARE_DIMENSIONS: [usize; 4] = [2, 3, 5, 10];

/// Nontrivial local AREs for β ≤ 6: vMF, Watson and LP₁..LP₆ over the
/// exponents of matching parity.
pub fn are_table() -> Result<Vec<AreEntry>> {
    let mut families = vec![Family::VonMisesFisher, Family::Watson];
    families.extend((1..=6).map(Family::Legendre));
    let mut out = Vec::new();
    for family in families {
        let k = family.order();
        for beta in (k..=6).step_by(2) {
            for d in ARE_DIMENSIONS {
                out.push(AreEntry {
                    family,
                    beta,
                    d,
                    value: local_are(family, beta, d)?,
                });
            }
        }
    }
    Ok(out)
}

/// `E_κ (θ·U)^β − ψ_d(β)` by one-dimensional quadrature of the density profile.
pub fn gamma_by_quadrature(family: Family, beta: usize, d: usize, kappa: f64) -> Result<f64> {
    family.check(d, kappa)?;
    let density = |t: f64| -> f64 {
        match family {
            Family::VonMisesFisher => (kappa * (t - 1.0)).exp(),
            Family::Watson => (kappa * (t * t - 1.0)).exp(),
            Family::Legendre(m) => 1.0 + kappa * legendre::polynomial(d, m).eval(t),
        }
    };
    let tol = 1e-15;
    let num = quadrature::integrate_weighted(|t| t.powi(beta as i32) * density(t), d, -1.0, 1.0, tol);
    let den = quadrature::integrate_weighted(density, d, -1.0, 1.0, tol);
    Ok(num.value / den.value - psi(d, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_cover;

    #[test]
    fn bessel_derivative_recurrence() {
        for &p in &[0.0, 0.5, 1.5, 4.0] {
            for &k in &[0.3, 1.0, 5.0] {
                let h = 1e-5;
                let deriv = (bessel_i(p, k + h).unwrap() - bessel_i(p, k - h).unwrap()) / (2.0 * h);
                let rhs = p * bessel_i(p, k).unwrap() + k * bessel_i(p + 1.0, k).unwrap();
                assert!((k * deriv - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "p={p} κ={k}");
            }
        }
        assert_eq!(kummer_m(0.5, 1.5, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn mean_resultant_forms() {
        for &k in &[0.01f64, 0.5, 1.0, 2.0, 10.0] {
            let closed = 1.0 / k.tanh() - 1.0 / k;
            assert!((mean_resultant(3, k).unwrap() - closed).abs() < 1e-12);
        }
        for d in [2usize, 3, 5, 10] {
            let df = d as f64;
            for i in 0..=20 {
                let k = 1e-3 * 100f64.powf(i as f64 / 20.0);
                let approx = k / df - k.powi(3) / (df * df * (df + 2.0));
                assert!((mean_resultant(d, k).unwrap() - approx).abs() <= 0.1 * k.powi(5));
            }
            assert!((vmf_normalizer(d, 1e-6).unwrap() - area(d)).abs() < 1e-10);
        }
    }

    #[test]
    fn watson_moment_limits() {
        for d in [2usize, 3, 5, 10] {
            let df = d as f64;
            assert!((watson_second_moment(d, 0.0).unwrap() - 1.0 / df).abs() < 1e-15);
            let h = 1e-7;
            let slope = (watson_second_moment(d, h).unwrap() - 1.0 / df) / h;
            assert!((slope - 2.0 * (df - 1.0) / (df * df * (df + 2.0))).abs() < 1e-6);
        }
        // D_d(κ) by quadrature.
        let (d, k) = (3, 2.0);
        let num = quadrature::integrate_weighted(|t| t * t * (k * t * t).exp(), d, -1.0, 1.0, 1e-14).value;
        let den = quadrature::integrate_weighted(|t| (k * t * t).exp(), d, -1.0, 1.0, 1e-14).value;
        assert!((watson_second_moment(d, k).unwrap() - num / den).abs() < 1e-12);
    }

    #[test]
    fn kl_small_kappa() {
        let k = 1e-3;
        assert!((kl_divergence(Family::VonMisesFisher, 3, k).unwrap() - k * k / 6.0).abs() < 1e-9);
        assert!(kl_divergence(Family::Watson, 3, 1e-6).unwrap().abs() < 1e-11);
        assert!(kl_divergence(Family::VonMisesFisher, 3, 0.0).is_err());
        assert!(kl_divergence(Family::Legendre(2), 3, 1.5).is_err());
    }

    #[test]
    fn kl_matches_quadrature_definition() {
        for d in [2usize, 3, 5] {
            for &k in &[0.3, 2.0] {
                let ln_norm = vmf_normalizer(d, k).unwrap().ln() - area(d).ln();
                let f = |t: f64| (k * t - ln_norm).exp();
                let v = quadrature::integrate_weighted(|t| f(t) * (k * t - ln_norm), d, -1.0, 1.0, 1e-14).value
                    * area_ratio(d);
                assert!((kl_divergence(Family::VonMisesFisher, d, k).unwrap() - v).abs() < 1e-10);
                let ln_w = kummer_m(0.5, d as f64 / 2.0, k).unwrap().ln();
                let g = |t: f64| (k * t * t - ln_w).exp();
                let w = quadrature::integrate_weighted(|t| g(t) * (k * t * t - ln_w), d, -1.0, 1.0, 1e-14).value
                    * area_ratio(d);
                assert!((kl_divergence(Family::Watson, d, k).unwrap() - w).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn legendre_kl_monte_carlo() {
        use crate::rng::seeded;
        use crate::samplers::{AlternativeSpec, Sampler};
        let (d, m, k) = (2, 1, 0.5);
        let spec = AlternativeSpec::lp(d, m, k);
        let mut rng = seeded(31);
        let s = Sampler::new(&spec).unwrap().sample(100_000, &mut rng).unwrap();
        let p = legendre::polynomial(d, m);
        let vals: Vec<f64> = s.rows().map(|r| (k * p.eval(r[0])).ln_1p()).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
        let kl = kl_divergence(Family::Legendre(m), d, k).unwrap();
        assert!((kl - mean).abs() < 3.0 * se, "{kl} vs {mean} ± {se}");
    }

    #[test]
    fn gamma_series_matches_quadrature_and_bessel() {
        for family in [Family::VonMisesFisher, Family::Watson, Family::Legendre(3)] {
            for d in [2usize, 3, 5] {
                for beta in 1..=6 {
                    for &k in &[0.01, 0.5, 1.0] {
                        let a = gamma_profile(family, beta, d, k, 1.0).unwrap();
                        let b = gamma_by_quadrature(family, beta, d, k).unwrap();
                        assert!((a - b).abs() < 1e-10, "{family} β={beta} d={d} κ={k}: {a} vs {b}");
                    }
                }
            }
        }
        // E P_j(θ·U) = I_{j+d/2−1}(κ)/I_{d/2−1}(κ) under vMF.
        for d in [2usize, 3, 5] {
            for j in 1..=4 {
                let k = 1.3;
                let p = d as f64 / 2.0 - 1.0;
                let want = bessel_i(p + j as f64, k).unwrap() / bessel_i(p, k).unwrap();
                let got = zonal_moment_series(d, j, k, 1).unwrap();
                assert!((got - want).abs() < 1e-12);
            }
        }
        let g = gamma_profile(Family::VonMisesFisher, 1, 3, 1e-2, 1.0).unwrap();
        assert!((g - mean_resultant(3, 1e-2).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn legendre_shift_peak() {
        for (beta, m, d) in [(3, 1, 3), (5, 3, 2), (4, 2, 5)] {
            let k = 0.7;
            let c = power_expansion(d, beta).coeff_f64(m) / nu(d, m) as f64;
            let g = gamma_shift(Family::Legendre(m), beta, d, k, None).unwrap();
            assert!((g - (k * c).powi(2)).abs() < 1e-14);
        }
        // Cover maximum is below the exact one.
        let cover = make_cover(3, 2000, 1).unwrap();
        let exact = gamma_shift(Family::VonMisesFisher, 3, 3, 0.5, None).unwrap();
        let approx = gamma_shift(Family::VonMisesFisher, 3, 3, 0.5, Some(&cover)).unwrap();
        assert!(approx <= exact * (1.0 + 1e-12) && approx > 0.99 * exact);
    }

    #[test]
    fn local_are_examples() {
        let are = |f, b, d| local_are(f, b, d).unwrap();
        assert!((are(Family::VonMisesFisher, 3, 3) - 0.84).abs() < 0.005);
        assert!((are(Family::Legendre(3), 3, 2) - 0.10).abs() < 0.005);
        for d in [2, 3, 5, 10] {
            assert!((are(Family::VonMisesFisher, 1, d) - 1.0).abs() < 1e-12);
            assert!((are(Family::Watson, 2, d) - 1.0).abs() < 1e-12);
            assert!((are(Family::Legendre(2), 2, d) - 1.0).abs() < 1e-12);
            assert_eq!(are(Family::VonMisesFisher, 2, d), 0.0);
            assert_eq!(are(Family::Watson, 3, d), 0.0);
        }
        for e in are_table().unwrap() {
            assert!((0.0..=1.0 + 1e-12).contains(&e.value));
        }
        // Denominator for β = 1 is 1/d.
        let tr = ZonalKernel::new(1, 3).unwrap().spectrum().trace();
        assert!((tr - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_limits() {
        for d in [2usize, 3] {
            for (family, beta) in [
                (Family::VonMisesFisher, 3),
                (Family::Watson, 4),
                (Family::Legendre(3), 5),
            ] {
                let target = local_limit(family, beta, d).unwrap();
                let r = extrapolated_ratio(family, beta, d, 1e-2, 1e-3).unwrap();
                assert!(
                    (r - target).abs() < 0.01 * target,
                    "{family} β={beta} d={d}: {r} vs {target}"
                );
            }
            let r = efficiency_ratio(Family::VonMisesFisher, 2, d, 1e-3).unwrap();
            assert!(r < 1e-5);
        }
    }
}
