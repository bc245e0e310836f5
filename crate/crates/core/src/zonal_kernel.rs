//! Zonal covariance kernels of the Gaussian limit of `T_{n,β}`, their
//! spectra and the shift functions under Legendre-type local alternatives.

use crate::error::{Error, Result};
use crate::geometry::{self, UnitVector};
use crate::legendre::{self, LegendrePolynomial};
use crate::quadrature;
use serde::Serialize;
use std::sync::Arc;

/// Kernel `ρ_β(b, c) = η_β(b·c) − ψ_d(β)²` with `η_β = Σ_j c_j²/ν_j P_j`.
#[derive(Debug, Clone)]
pub struct ZonalKernel {
    beta: usize,
    d: usize,
    /// `c_{j,d}(β)` for `j = 0..=β`.
    coeffs: Vec<f64>,
    nus: Vec<f64>,
    polys: Vec<Arc<LegendrePolynomial>>,
    psi: f64,
}

impl ZonalKernel {
    pub fn new(beta: usize, d: usize) -> Result<Self> {
        if beta == 0 || d < 2 {
            return Err(Error::Domain(format!(
                "kernel needs β ≥ 1 and d ≥ 2 (got β={beta}, d={d})"
            )));
        }
        let exp = legendre::power_expansion(d, beta);
        Ok(ZonalKernel {
            beta,
            d,
            coeffs: (0..=beta).map(|j| exp.coeff_f64(j)).collect(),
            nus: (0..=beta).map(|j| legendre::nu(d, j) as f64).collect(),
            polys: (0..=beta).map(|j| legendre::polynomial(d, j)).collect(),
            psi: legendre::psi(d, beta),
        })
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `c_{j,d}(β)`.
    pub fn coeff(&self, j: usize) -> f64 {
        self.coeffs.get(j).copied().unwrap_or(0.0)
    }

    fn check(t: f64) -> Result<f64> {
        if t.abs() <= 1.0 + 1e-12 {
            Ok(t.clamp(-1.0, 1.0))
        } else {
            Err(Error::Domain(format!("kernel argument {t} outside [-1, 1]")))
        }
    }

    /// `η_β(t)` without a domain check.
    #[inline]
    pub fn eta_unchecked(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for j in 0..=self.beta {
            let c = self.coeffs[j];
            if c != 0.0 {
                acc += c * c / self.nus[j] * self.polys[j].eval(t);
            }
        }
        acc
    }

    /// `ρ_β(t)` without a domain check.
    #[inline]
    pub fn rho_unchecked(&self, t: f64) -> f64 {
        // The j = 0 term of η_β is exactly ψ², so it is dropped instead of subtracted.
        let mut acc = 0.0;
        for j in 1..=self.beta {
            let c = self.coeffs[j];
            if c != 0.0 {
                acc += c * c / self.nus[j] * self.polys[j].eval(t);
            }
        }
        acc
    }

    pub fn eta(&self, t: f64) -> Result<f64> {
        Ok(self.eta_unchecked(Self::check(t)?))
    }

    pub fn rho(&self, t: f64) -> Result<f64> {
        Ok(self.rho_unchecked(Self::check(t)?))
    }

    /// `ψ_d(β)`.
    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn spectrum(&self) -> Spectrum {
        let entries = (0..=self.beta)
            .map(|k| {
                let lambda = if k == 0 {
                    0.0
                } else {
                    (self.coeffs[k] / self.nus[k]).powi(2)
                };
                SpectrumEntry {
                    k,
                    lambda,
                    nu: legendre::nu(self.d, k),
                }
            })
            .collect();
        Spectrum { entries }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub k: usize,
    pub lambda: f64,
    pub nu: u64,
}

/// Eigenvalues of the integral operator with kernel `ρ_β`, with multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub entries: Vec<SpectrumEntry>,
}

impl Spectrum {
    pub fn lambda(&self, k: usize) -> f64 {
        self.entries.get(k).map_or(0.0, |e| e.lambda)
    }

    /// `Σ_k λ_k ν_d(k)`, which equals `ρ_β(1)`.
    pub fn trace(&self) -> f64 {
        self.entries.iter().map(|e| e.lambda * e.nu as f64).sum()
    }
}

/// `b ↦ c_{m,d}(β)/ν_d(m) · P_m^d(θ·b)`, the mean shift of the limiting
/// process under the alternatives `1 + P_m^d(θ·x)/√n`.
#[derive(Debug, Clone)]
pub struct ShiftFunction {
    beta: usize,
    m: usize,
    theta: UnitVector,
    scale: f64,
    poly: Arc<LegendrePolynomial>,
}

impl ShiftFunction {
    pub fn new(beta: usize, m: usize, theta: UnitVector) -> Self {
        let d = theta.d();
        let scale = if m > beta || (beta + m) % 2 == 1 {
            0.0
        } else {
            legendre::power_expansion(d, beta).coeff_f64(m) / legendre::nu(d, m) as f64
        };
        ShiftFunction {
            beta,
            m,
            theta,
            scale,
            poly: legendre::polynomial(d, m),
        }
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn order(&self) -> usize {
        self.m
    }

    /// Value at `θ` itself.
    pub fn peak(&self) -> f64 {
        self.scale
    }

    pub fn value(&self, b: &[f64]) -> f64 {
        self.scale * self.poly.eval(self.theta.dot(b).clamp(-1.0, 1.0))
    }
}

/// The shift evaluated directly as `|S|⁻¹ ∫ ((b·u)^β − ψ_d(β)) P_m^d(θ·u) dσ(u)`
/// by product quadrature (`d ∈ {2, 3}`).
pub fn shift_by_quadrature(beta: usize, m: usize, theta: &UnitVector, b: &UnitVector) -> Result<f64> {
    let d = theta.d();
    let psi = legendre::psi(d, beta);
    let p = legendre::polynomial(d, m);
    let integral = quadrature::sphere_integral(
        d,
        |u| ((b.dot(u)).powi(beta as i32) - psi) * p.eval(theta.dot(u).clamp(-1.0, 1.0)),
        1e-11,
    )?;
    Ok(integral / geometry::area(d))
}

/// Both sides of the Funk–Hecke identity
/// `∫ Λ(u·x) P_k^d(θ·x) dσ(x) = |S^{d−2}| ⟨P_k^d, Λ⟩ P_k^d(u·θ)` for `d ∈ {2, 3}`.
pub fn funk_hecke_check<F: Fn(f64) -> f64>(
    k: usize,
    profile: F,
    u: &UnitVector,
    theta: &UnitVector,
) -> Result<(f64, f64)> {
    let d = u.d();
    if !(2..=3).contains(&d) || theta.d() != d {
        return Err(Error::Unsupported(format!(
            "Funk–Hecke check needs d ∈ {{2, 3}} and matching dimensions (got d = {d})"
        )));
    }
    if k > 8 {
        return Err(Error::Unsupported(format!("Funk–Hecke check needs k ≤ 8, got {k}")));
    }
    let p = legendre::polynomial(d, k);
    let lhs = quadrature::sphere_integral(
        d,
        |x| profile(u.dot(x).clamp(-1.0, 1.0)) * p.eval(theta.dot(x).clamp(-1.0, 1.0)),
        1e-11,
    )?;
    let inner = legendre::weighted_inner(|t| p.eval(t), &profile, d)?;
    let rhs = geometry::area(d - 1) * inner * p.eval(u.dot(theta.as_slice()).clamp(-1.0, 1.0));
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::Rng as _;

    const DIMS: [usize; 4] = [2, 3, 5, 10];

    fn pochhammer_even(d: f64, k: usize) -> f64 {
        (0..k).map(|j| d + 2.0 * j as f64).product()
    }

    /// Closed-form kernels written out by hand.
    pub(crate) fn rho_oracle(beta: usize, d: f64, t: f64) -> f64 {
        let p = |k| pochhammer_even(d, k);
        match beta {
            1 => t / d,
            2 => (2.0 * t * t + 1.0) / p(2) - 1.0 / (d * d),
            3 => (6.0 * t.powi(3) + 9.0 * t) / p(3),
            4 => (24.0 * t.powi(4) + 72.0 * t * t + 9.0) / p(4) - 9.0 / p(2).powi(2),
            5 => (120.0 * t.powi(5) + 600.0 * t.powi(3) + 225.0 * t) / p(5),
            6 => (720.0 * t.powi(6) + 5400.0 * t.powi(4) + 4050.0 * t * t + 225.0) / p(6) - 225.0 / p(3).powi(2),
            _ => unreachable!(),
        }
    }

    #[test]
    fn kernel_matches_closed_forms() {
        let mut r = rng::seeded(1);
        for beta in 1..=6 {
            for &d in &DIMS {
                let k = ZonalKernel::new(beta, d).unwrap();
                for _ in 0..100 {
                    let t: f64 = r.random_range(-1.0..=1.0);
                    let diff = (k.rho(t).unwrap() - rho_oracle(beta, d as f64, t)).abs();
                    assert!(diff <= 1e-10, "β={beta} d={d} t={t}");
                }
            }
        }
    }

    #[test]
    fn eta_examples() {
        for &d in &DIMS {
            let k1 = ZonalKernel::new(1, d).unwrap();
            assert_abs_diff_eq!(k1.eta(0.3).unwrap(), 0.3 / d as f64, epsilon = 1e-15);
        }
        let k2 = ZonalKernel::new(2, 3).unwrap();
        assert_abs_diff_eq!(k2.eta(0.0).unwrap(), 1.0 / 15.0, epsilon = 1e-15);
        assert!(k2.eta(1.5).is_err());
    }

    #[test]
    fn spectrum_examples_and_trace() {
        for &d in &DIMS {
            let df = d as f64;
            let s1 = ZonalKernel::new(1, d).unwrap().spectrum();
            assert_abs_diff_eq!(s1.lambda(1), 1.0 / (df * df), epsilon = 1e-15);
            let s3 = ZonalKernel::new(3, d).unwrap().spectrum();
            assert_abs_diff_eq!(s3.lambda(1), (3.0 / (df * (df + 2.0))).powi(2), epsilon = 1e-15);
            assert_abs_diff_eq!(s3.lambda(3), (6.0 / pochhammer_even(df, 3)).powi(2), epsilon = 1e-15);
            assert_eq!(s3.lambda(0), 0.0);
            assert_eq!(s3.lambda(2), 0.0);
            for beta in 1..=6 {
                let k = ZonalKernel::new(beta, d).unwrap();
                assert!((k.rho(1.0).unwrap() - k.spectrum().trace()).abs() < 1e-12);
                assert!(k.rho(1.0).unwrap() <= 1.0);
            }
        }
        let s = ZonalKernel::new(2, 3).unwrap().spectrum();
        assert_abs_diff_eq!(s.lambda(2), 0.017_777_777_777_777_78, epsilon = 1e-15);
    }

    #[test]
    fn gram_matrices_are_psd() {
        let mut r = rng::seeded(2);
        for beta in 1..=6 {
            for &d in &[2usize, 3, 5] {
                let k = ZonalKernel::new(beta, d).unwrap();
                for _ in 0..50 {
                    let pts = geometry::sample_uniform(d, 20, &mut r).unwrap();
                    let g = DMatrix::from_fn(20, 20, |i, j| {
                        k.rho_unchecked(geometry::dot(pts.row(i), pts.row(j)).clamp(-1.0, 1.0))
                    });
                    let min = SymmetricEigen::new(g).eigenvalues.min();
                    assert!(min >= -1e-9);
                }
            }
        }
    }

    #[test]
    fn shift_examples() {
        let theta = UnitVector::basis(3, 0);
        let s = ShiftFunction::new(3, 1, theta.clone());
        assert_abs_diff_eq!(s.value(theta.as_slice()), 0.2, epsilon = 1e-15);
        assert_eq!(ShiftFunction::new(3, 4, theta.clone()).value(theta.as_slice()), 0.0);
        assert_eq!(ShiftFunction::new(3, 2, theta.clone()).peak(), 0.0);
    }

    #[test]
    fn shift_quadrature_agrees() {
        let theta = UnitVector::new(vec![0.2, -0.5, 0.7]).unwrap();
        let b = UnitVector::new(vec![0.9, 0.1, 0.3]).unwrap();
        for (beta, m) in [(3, 1), (3, 3), (4, 2), (3, 2), (2, 4)] {
            let q = shift_by_quadrature(beta, m, &theta, &b).unwrap();
            let exact = ShiftFunction::new(beta, m, theta.clone()).value(b.as_slice());
            assert!((q - exact).abs() < 1e-8, "β={beta} m={m}: {q} vs {exact}");
        }
    }

    #[test]
    fn funk_hecke_identities() {
        for d in [2usize, 3] {
            let theta = UnitVector::basis(d, 0);
            for k in 0..=4 {
                let p = legendre::polynomial(d, k);
                let (lhs, rhs) = funk_hecke_check(k, |t| p.eval(t), &theta, &theta).unwrap();
                let expect = geometry::area(d) / legendre::nu(d, k) as f64;
                assert!((lhs - expect).abs() < 1e-8 && (rhs - expect).abs() < 1e-8);
            }
            let (lhs, _) = funk_hecke_check(1, |_| 1.0, &theta, &theta).unwrap();
            assert!(lhs.abs() < 1e-10);
            let mut u = vec![0.3; d];
            u[d - 1] = 0.8;
            let u = UnitVector::new(u).unwrap();
            let (lhs, rhs) = funk_hecke_check(3, |t| t.powi(5), &u, &theta).unwrap();
            assert!((lhs - rhs).abs() < 1e-8);
            // Λ(t) = t^β reproduces the shift times |S|.
            let s = ShiftFunction::new(5, 3, theta.clone()).value(u.as_slice());
            assert!((rhs - s * geometry::area(d)).abs() < 1e-8);
        }
    }
}
