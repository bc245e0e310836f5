//! d-dimensional Legendre polynomials and the monomial ↔ Legendre change of basis.
//!
//! Coefficients are kept as exact rationals and converted to `f64` once per
//! polynomial, so the power-expansion triangular solve carries no rounding.

use crate::error::{Error, Result};
use crate::geometry;
use crate::quadrature;
use crate::special::ln_gamma;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Dimension `ν_d(k)` of the space of spherical harmonics of order `k` on `S^{d-1}`.
pub fn nu(d: usize, k: usize) -> u64 {
    fn binom(n: i64, k: i64) -> u128 {
        if k < 0 || n < 0 || k > n {
            return 0;
        }
        let k = k.min(n - k) as u128;
        let n = n as u128;
        let mut acc: u128 = 1;
        for i in 0..k {
            acc = acc * (n - i) / (i + 1);
        }
        acc
    }
    let (d, k) = (d as i64, k as i64);
    (binom(d + k - 1, k) - binom(d + k - 3, k - 2)) as u64
}

/// `ln ν_d(k)` for arbitrary order, via `(2k+d−2)Γ(k+d−2)/(Γ(k+1)Γ(d−1))`.
pub fn ln_nu(d: usize, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let (df, kf) = (d as f64, k as f64);
    (2.0 * kf + df - 2.0).ln() + ln_gamma(kf + df - 2.0) - ln_gamma(kf + 1.0) - ln_gamma(df - 1.0)
}

/// `P_k^d` with exact monomial coefficients.
#[derive(Debug, Clone)]
pub struct LegendrePolynomial {
    d: usize,
    k: usize,
    /// `monomial[p]` is the coefficient of `t^p`; zero unless `p ≡ k (mod 2)`.
    monomial: Vec<BigRational>,
    /// Coefficients of `t^{k}, t^{k-2}, …` as floats, highest degree first.
    horner: Vec<f64>,
}

impl LegendrePolynomial {
    fn build(d: usize, k: usize) -> Self {
        // P_k(t) = k! Σ_l (−1/4)^l (1−t²)^l t^{k−2l} / (l! (k−2l)! ((d−1)/2)_l)
        let half = rat(d as i64 - 1, 2);
        let mut monomial = vec![BigRational::zero(); k + 1];
        let mut k_fact = BigRational::one();
        for i in 2..=k {
            k_fact *= int(i as i64);
        }
        let mut rising = BigRational::one();
        let mut l_fact = BigRational::one();
        let mut quarter = BigRational::one();
        for l in 0..=k / 2 {
            if l > 0 {
                rising *= &half + int(l as i64 - 1);
                l_fact *= int(l as i64);
                quarter *= rat(-1, 4);
            }
            let mut rest = BigRational::one();
            for i in 2..=(k - 2 * l) {
                rest *= int(i as i64);
            }
            let scale = &k_fact * &quarter / (&l_fact * &rest * &rising);
            // (1 − t²)^l = Σ_i C(l,i) (−1)^i t^{2i}
            let mut binom = BigRational::one();
            for i in 0..=l {
                if i > 0 {
                    binom = binom * int((l - i + 1) as i64) / int(i as i64);
                }
                let sign = if i % 2 == 0 { int(1) } else { int(-1) };
                monomial[k - 2 * l + 2 * i] += &scale * &binom * sign;
            }
        }
        let horner = (0..=k / 2)
            .map(|l| monomial[k - 2 * l].to_f64().unwrap_or(f64::NAN))
            .collect();
        LegendrePolynomial { d, k, monomial, horner }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.k
    }

    /// Exact coefficient of `t^p`.
    pub fn monomial_coeff(&self, p: usize) -> &BigRational {
        &self.monomial[p]
    }

    /// Exact value at a rational point.
    pub fn eval_exact(&self, t: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.monomial.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    /// Floating-point evaluation; no domain check.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let t2 = t * t;
        let mut acc = 0.0;
        for &c in &self.horner {
            acc = acc * t2 + c;
        }
        if self.k % 2 == 1 {
            acc * t
        } else {
            acc
        }
    }
}

type Cache<T> = OnceLock<RwLock<HashMap<(usize, usize), Arc<T>>>>;

fn cached<T, F: FnOnce() -> T>(cache: &'static Cache<T>, key: (usize, usize), make: F) -> Arc<T> {
    let map = cache.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(v) = map.read().expect("cache poisoned").get(&key) {
        return Arc::clone(v);
    }
    let v = Arc::new(make());
    map.write().expect("cache poisoned").entry(key).or_insert(v).clone()
}

/// Shared, memoized `P_k^d`.
pub fn polynomial(d: usize, k: usize) -> Arc<LegendrePolynomial> {
    static CACHE: Cache<LegendrePolynomial> = OnceLock::new();
    cached(&CACHE, (d, k), || LegendrePolynomial::build(d, k))
}

/// `P_k^d(t)` for `t ∈ [−1, 1]`.
pub fn legendre_eval(d: usize, k: usize, t: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("Legendre polynomials need d ≥ 2, got {d}")));
    }
    if !(t.abs() <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!("argument {t} outside [-1, 1]")));
    }
    Ok(polynomial(d, k).eval(t.clamp(-1.0, 1.0)))
}

/// Exact coefficients of `t^m = Σ_j c_j P_j^d(t)`.
#[derive(Debug, Clone)]
pub struct PowerExpansion {
    d: usize,
    m: usize,
    coeffs: Vec<BigRational>,
}

impl PowerExpansion {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coeff(&self, j: usize) -> &BigRational {
        &self.coeffs[j]
    }

    pub fn coeff_f64(&self, j: usize) -> f64 {
        if j > self.m {
            return 0.0;
        }
        self.coeffs[j].to_f64().unwrap_or(f64::NAN)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// `Σ_j c_j P_j^d(t)`.
    pub fn reconstruct(&self, t: f64) -> f64 {
        (0..=self.m)
            .map(|j| self.coeff_f64(j) * polynomial(self.d, j).eval(t))
            .sum()
    }
}

fn solve_power_expansion(d: usize, m: usize) -> PowerExpansion {
    // Peel off the leading Legendre term, highest order first.
    let mut residual = vec![BigRational::zero(); m + 1];
    residual[m] = BigRational::one();
    let mut coeffs = vec![BigRational::zero(); m + 1];
    for j in (0..=m).rev() {
        if residual[j].is_zero() {
            continue;
        }
        let p = polynomial(d, j);
        let c = &residual[j] / p.monomial_coeff(j);
        for (i, r) in residual.iter_mut().enumerate().take(j + 1) {
            *r -= &c * p.monomial_coeff(i);
        }
        coeffs[j] = c;
    }
    PowerExpansion { d, m, coeffs }
}

/// Shared, memoized expansion of `t^m` in the `P_j^d` basis.
pub fn power_expansion(d: usize, m: usize) -> Arc<PowerExpansion> {
    static CACHE: Cache<PowerExpansion> = OnceLock::new();
    cached(&CACHE, (d, m), || solve_power_expansion(d, m))
}

/// Coefficients of `t^k` obtained from the composition-sum recursion over
/// the monomial coefficients; independent of the triangular solve.
pub fn power_expansion_by_compositions(d: usize, k: usize) -> Vec<BigRational> {
    // a(l, k): coefficient of t^{k−2l} in P_k.
    let a = |l: usize, order: usize| polynomial(d, order).monomial_coeff(order - 2 * l).clone();
    let mut out = vec![BigRational::zero(); k + 1];
    for l in 0..=k / 2 {
        let value = if l == 0 {
            BigRational::one() / a(0, k)
        } else {
            let mut total = BigRational::zero();
            compositions(l, &mut Vec::new(), &mut |parts| {
                let mut num = BigRational::one();
                let mut den = a(0, k);
                let mut used = 0;
                for &p in parts {
                    num *= a(p, k - 2 * used);
                    used += p;
                    den *= a(0, k - 2 * used);
                }
                let sign = if parts.len() % 2 == 0 { int(1) } else { int(-1) };
                total += sign * num / den;
            });
            total
        };
        out[k - 2 * l] = value;
    }
    out
}

fn compositions<F: FnMut(&[usize])>(remaining: usize, prefix: &mut Vec<usize>, visit: &mut F) {
    if remaining == 0 {
        visit(prefix);
        return;
    }
    for first in 1..=remaining {
        prefix.push(first);
        compositions(remaining - first, prefix, visit);
        prefix.pop();
    }
}

/// `ψ_d(β)`, the `β`-th moment of `b·U` for uniform `U`.
///
/// For even `β` the Gamma-ratio form telescopes to `Π_{i<β/2} (2i+1)/(d+2i)`.
pub fn psi(d: usize, beta: usize) -> f64 {
    if beta % 2 == 1 {
        return 0.0;
    }
    (0..beta / 2).map(|i| (2 * i + 1) as f64 / (d + 2 * i) as f64).product()
}

/// `Δ_j(l) = c_{j,d}(l)|S^{d−1}| / (ν_d(j)|S^{d−2}|)` in floating point for any `l`.
///
/// Equals `∫ t^l P_j^d(t) (1−t²)^{(d−3)/2} dt`, obtained in closed form from the
/// Rodrigues representation of `P_j^d`.
pub fn legendre_moment(d: usize, j: usize, l: usize) -> f64 {
    if j > l || (l - j) % 2 == 1 {
        return 0.0;
    }
    let a = (d as f64 - 1.0) / 2.0;
    let (jf, lf) = (j as f64, l as f64);
    let bx = (lf - jf + 1.0) / 2.0;
    let by = jf + a;
    let ln = -jf * std::f64::consts::LN_2 + ln_gamma(a) - ln_gamma(jf + a) + ln_gamma(lf + 1.0)
        - ln_gamma(lf - jf + 1.0)
        + ln_gamma(bx)
        + ln_gamma(by)
        - ln_gamma(bx + by);
    ln.exp()
}

/// `c_{j,d}(l)` in floating point for any `l`.
pub fn power_coeff_f64(d: usize, j: usize, l: usize) -> f64 {
    legendre_moment(d, j, l) * ln_nu(d, j).exp() * geometry::area_ratio(d)
}

/// `∫₋₁¹ f(t) g(t) (1 − t²)^{(d−3)/2} dt`.
pub fn weighted_inner<F, G>(f: F, g: G, d: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if d < 2 {
        return Err(Error::Domain(format!("weighted inner product needs d ≥ 2, got {d}")));
    }
    let q = quadrature::integrate_weighted(|t| f(t) * g(t), d, -1.0, 1.0, 1e-12);
    if q.converged {
        Ok(q.value)
    } else {
        Err(Error::numerical("weighted inner product", q.error))
    }
}

/// A coefficient `c_{j,d}(m)` found to be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct SignViolation {
    pub d: usize,
    pub m: usize,
    pub j: usize,
    pub value: f64,
}

/// Scans `c_{j,d}(m)` for all given `d` and `m ≤ max_m` and returns every negative entry.
pub fn nonnegativity_violations(dims: &[usize], max_m: usize) -> Vec<SignViolation> {
    let mut out = Vec::new();
    for &d in dims {
        for m in 0..=max_m {
            let e = power_expansion(d, m);
            for j in 0..=m {
                if e.coeff(j).is_negative() {
                    out.push(SignViolation {
                        d,
                        m,
                        j,
                        value: e.coeff_f64(j),
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const DIMS: [usize; 4] = [2, 3, 5, 10];

    #[test]
    fn nu_values() {
        for d in 2..12 {
            assert_eq!(nu(d, 0), 1);
            assert_eq!(nu(d, 1), d as u64);
        }
        for k in 0..15 {
            assert_eq!(nu(3, k), 2 * k as u64 + 1);
            if k > 0 {
                assert_eq!(nu(2, k), 2);
            }
        }
        assert_eq!(nu(5, 2), 14);
        for d in 2..8 {
            for k in 1..10 {
                assert!((ln_nu(d, k).exp() - nu(d, k) as f64).abs() < 1e-9 * nu(d, k) as f64);
            }
        }
    }

    #[test]
    fn explicit_low_orders() {
        for &d in &DIMS {
            let df = d as f64;
            for i in 0..=20 {
                let t = -1.0 + 0.1 * i as f64;
                let p = |k| legendre_eval(d, k, t).unwrap();
                assert_abs_diff_eq!(p(1), t, epsilon = 1e-14);
                assert_abs_diff_eq!(p(2), (df * t * t - 1.0) / (df - 1.0), epsilon = 1e-13);
                assert_abs_diff_eq!(p(3), ((df + 2.0) * t.powi(3) - 3.0 * t) / (df - 1.0), epsilon = 1e-13);
                assert_abs_diff_eq!(
                    p(4),
                    ((df + 2.0) * (df + 4.0) * t.powi(4) - 6.0 * (df + 2.0) * t * t + 3.0) / ((df - 1.0) * (df + 1.0)),
                    epsilon = 1e-13
                );
                assert_abs_diff_eq!(
                    p(5),
                    ((df + 4.0) * (df + 6.0) * t.powi(5) - 10.0 * (df + 4.0) * t.powi(3) + 15.0 * t)
                        / ((df - 1.0) * (df + 1.0)),
                    epsilon = 1e-13
                );
                assert_abs_diff_eq!(
                    p(6),
                    ((df + 4.0) * (df + 6.0) * (df + 8.0) * t.powi(6) - 15.0 * (df + 4.0) * (df + 6.0) * t.powi(4)
                        + 45.0 * (df + 4.0) * t * t
                        - 15.0)
                        / ((df - 1.0) * (df + 1.0) * (df + 3.0)),
                    epsilon = 1e-12
                );
            }
        }
        assert_abs_diff_eq!(
            legendre_eval(3, 2, 0.3).unwrap(),
            (3.0 * 0.09 - 1.0) / 2.0,
            epsilon = 1e-15
        );
        assert!(legendre_eval(3, 2, 1.1).is_err());
    }

    #[test]
    fn value_at_one_is_exactly_one_and_bounded() {
        for &d in &DIMS {
            for k in 0..=12 {
                let p = polynomial(d, k);
                assert_eq!(p.eval_exact(&BigRational::one()), BigRational::one());
                for i in 0..=1000 {
                    let t = -1.0 + 0.002 * i as f64;
                    assert!(p.eval(t).abs() <= 1.0 + 1e-12, "d={d} k={k} t={t}");
                }
            }
        }
    }

    #[test]
    fn parity_is_exact() {
        for &d in &DIMS {
            for k in 0..=12 {
                let p = polynomial(d, k);
                for (num, den) in [(1, 3), (2, 7), (5, 11)] {
                    let t = rat(num, den);
                    let lhs = p.eval_exact(&-t.clone());
                    let rhs = p.eval_exact(&t);
                    let rhs = if k % 2 == 0 { rhs } else { -rhs };
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn expansion_examples() {
        for &d in &DIMS {
            let di = d as i64;
            let e3 = power_expansion(d, 3);
            assert_eq!(e3.coeff(3), &rat(di - 1, di + 2));
            assert_eq!(e3.coeff(1), &rat(3, di + 2));
            assert!(e3.coeff(0).is_zero() && e3.coeff(2).is_zero());
            let e2 = power_expansion(d, 2);
            assert_eq!(e2.coeff(2), &rat(di - 1, di));
            assert_eq!(e2.coeff(0), &rat(1, di));
            assert_eq!(power_expansion(d, 0).coeff(0), &int(1));
            let e4 = power_expansion(d, 4);
            assert_eq!(e4.coeff(4), &rat((di - 1) * (di + 1), (di + 2) * (di + 4)));
            assert_eq!(e4.coeff(2), &rat(6 * (di - 1), di * (di + 4)));
            assert_eq!(e4.coeff(0), &rat(3, di * (di + 2)));
            let e5 = power_expansion(d, 5);
            assert_eq!(e5.coeff(5), &rat((di - 1) * (di + 1), (di + 4) * (di + 6)));
            assert_eq!(e5.coeff(3), &rat(10 * (di - 1), (di + 2) * (di + 6)));
            assert_eq!(e5.coeff(1), &rat(15, (di + 2) * (di + 4)));
            let e6 = power_expansion(d, 6);
            assert_eq!(
                e6.coeff(6),
                &rat((di - 1) * (di + 1) * (di + 3), (di + 4) * (di + 6) * (di + 8))
            );
            assert_eq!(
                e6.coeff(4),
                &rat(15 * (di - 1) * (di + 1), (di + 2) * (di + 4) * (di + 8))
            );
            assert_eq!(e6.coeff(2), &rat(45 * (di - 1), di * (di + 4) * (di + 6)));
            assert_eq!(e6.coeff(0), &rat(15, di * (di + 2) * (di + 4)));
        }
    }

    #[test]
    fn composition_sum_agrees_with_solve() {
        for &d in &DIMS {
            for m in 0..=8 {
                assert_eq!(
                    power_expansion_by_compositions(d, m),
                    power_expansion(d, m).coeffs().to_vec(),
                    "d={d} m={m}"
                );
            }
        }
    }

    #[test]
    fn reconstruction_identity() {
        for &d in &DIMS {
            for m in 0..=8 {
                let e = power_expansion(d, m);
                for i in 0..=100 {
                    let t = -1.0 + 0.02 * i as f64;
                    assert!((e.reconstruct(t) - t.powi(m as i32)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn psi_matches_constant_term() {
        for &d in &DIMS {
            for beta in 0..=12 {
                let c0 = power_expansion(d, beta).coeff_f64(0);
                assert!((psi(d, beta) - c0).abs() < 1e-14, "d={d} β={beta}");
            }
            let df = d as f64;
            assert_eq!(psi(d, 1), 0.0);
            assert_abs_diff_eq!(psi(d, 2), 1.0 / df, epsilon = 1e-15);
            assert_abs_diff_eq!(psi(d, 4), 3.0 / (df * (df + 2.0)), epsilon = 1e-15);
        }
    }

    #[test]
    fn float_coefficients_match_exact() {
        for &d in &DIMS {
            for m in 0..=12 {
                let e = power_expansion(d, m);
                for j in 0..=m {
                    let exact = e.coeff_f64(j);
                    let approx = power_coeff_f64(d, j, m);
                    assert!(
                        (exact - approx).abs() <= 1e-12 * (1.0 + exact.abs()),
                        "d={d} m={m} j={j}"
                    );
                }
            }
        }
    }

    #[test]
    fn orthogonality() {
        for &d in &DIMS {
            let ratio = geometry::area_ratio(d);
            for k in 0..=6 {
                for l in 0..=6 {
                    let pk = polynomial(d, k);
                    let pl = polynomial(d, l);
                    let v = weighted_inner(|t| pk.eval(t), |t| pl.eval(t), d).unwrap();
                    let expect = if k == l { 1.0 / (nu(d, k) as f64 * ratio) } else { 0.0 };
                    assert!((v - expect).abs() < 1e-10, "d={d} k={k} l={l}: {v} vs {expect}");
                }
            }
        }
        assert_abs_diff_eq!(weighted_inner(|_| 1.0, |_| 1.0, 3).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn conjecture_holds_on_computed_range() {
        assert!(nonnegativity_violations(&[2, 3, 4, 5, 10], 12).is_empty());
    }

    #[test]
    fn psi_matches_gamma_form() {
        for &d in &DIMS {
            for beta in (0..=20).step_by(2) {
                let (b, h) = (beta as f64, d as f64 / 2.0);
                let g = crate::special::gamma;
                let expect = g((b + 1.0) / 2.0) * g(h) / (std::f64::consts::PI.sqrt() * g(h + b / 2.0));
                assert!((psi(d, beta) / expect - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psi_by_monte_carlo() {
        let mut rng = crate::rng::seeded(42);
        let n = 1_000_000;
        let s = geometry::sample_uniform(3, n, &mut rng).unwrap();
        for beta in 1..=6 {
            let xs: Vec<f64> = s.rows().map(|r| r[2].powi(beta as i32)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((mean - psi(3, beta)).abs() <= 4.0 * (var / n as f64).sqrt());
        }
    }

    proptest! {
        #[test]
        fn bounded_on_interval(d in 2usize..12, k in 0usize..13, t in -1.0f64..=1.0) {
            prop_assert!(legendre_eval(d, k, t).unwrap().abs() <= 1.0 + 1e-12);
        }

        #[test]
        fn parity_in_floats(d in 2usize..12, k in 0usize..13, t in -1.0f64..=1.0) {
            let a = legendre_eval(d, k, -t).unwrap();
            let b = legendre_eval(d, k, t).unwrap();
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((a - s * b).abs() < 1e-12);
        }
    }
}
