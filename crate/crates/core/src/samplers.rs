//! Alternative distributions on the sphere: densities and exact samplers.

use crate::error::{Error, Result};
use crate::geometry::{self, dot, SphericalSample, UnitVector};
use crate::legendre::{self, LegendrePolynomial};
use crate::quadrature;
use crate::rng::{self, Rng};
use crate::special::{bessel_i, bessel_i_scaled_tail, chi2_cdf, kummer_m};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::{Beta, Distribution, StandardNormal};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// A distribution on `S^{d-1}` used as an alternative to uniformity.
#[derive(Debug, Clone, PartialEq)]
pub enum AlternativeSpec {
    Uniform {
        d: usize,
    },
    /// Density `∝ exp(κ θ·x)`.
    VonMisesFisher {
        theta: UnitVector,
        kappa: f64,
    },
    /// Density `∝ exp(κ (θ·x)²)`, `κ ≥ 0`.
    Watson {
        theta: UnitVector,
        kappa: f64,
    },
    /// Density `∝ exp(xᵀ A x)` for symmetric `A`.
    Bingham {
        a: DMatrix<f64>,
    },
    /// First center with probability `p`, second otherwise.
    MixVmf2 {
        p: f64,
        thetas: [UnitVector; 2],
        kappas: [f64; 2],
    },
    /// Centers chosen with probabilities `p`, `p`, `1 − 2p`.
    MixVmf3 {
        p: f64,
        thetas: [UnitVector; 3],
        kappas: [f64; 3],
    },
    /// Density `(1 + κ P_m^d(θ·x)) / |S^{d-1}|`, `κ ∈ [0, 1]`.
    Legendre {
        m: usize,
        theta: UnitVector,
        kappa: f64,
    },
}

/// `(1, 0, …, 0)`.
pub fn theta1(d: usize) -> UnitVector {
    UnitVector::basis(d, 0)
}

/// `(−1, …, −1)/√d`.
pub fn theta2(d: usize) -> UnitVector {
    UnitVector::new(vec![-1.0; d]).expect("nonzero")
}

/// `(−1, 1, …, 1)/√d`.
pub fn theta3(d: usize) -> UnitVector {
    let mut v = vec![1.0; d];
    v[0] = -1.0;
    UnitVector::new(v).expect("nonzero")
}

/// `diag(1, 2, …, d)`.
pub fn a1(d: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_fn(d, |i, _| (i + 1) as f64))
}

/// `diag(−d, 0, …, 0, d)`.
pub fn a2(d: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d, d);
    a[(0, 0)] = -(d as f64);
    a[(d - 1, d - 1)] = d as f64;
    a
}

impl AlternativeSpec {
    pub fn vmf1(d: usize, kappa: f64) -> Self {
        AlternativeSpec::VonMisesFisher {
            theta: theta1(d),
            kappa,
        }
    }

    pub fn mix_vmf1(d: usize, p: f64) -> Self {
        AlternativeSpec::MixVmf2 {
            p,
            thetas: [theta1(d).neg(), theta1(d)],
            kappas: [1.0, 1.0],
        }
    }

    pub fn mix_vmf2(d: usize, p: f64) -> Self {
        AlternativeSpec::MixVmf2 {
            p,
            thetas: [theta1(d).neg(), theta1(d)],
            kappas: [1.0, 4.0],
        }
    }

    pub fn mix_vmf3(d: usize, p: f64) -> Self {
        AlternativeSpec::MixVmf3 {
            p,
            thetas: [theta2(d), theta3(d), theta1(d)],
            kappas: [2.0, 3.0, 3.0],
        }
    }

    pub fn mix_vmf4(d: usize, p: f64) -> Self {
        AlternativeSpec::MixVmf3 {
            p,
            thetas: [theta2(d), theta3(d), theta1(d)],
            kappas: [2.0, 3.0, 4.0],
        }
    }

    pub fn bing1(d: usize, kappa: f64) -> Self {
        AlternativeSpec::Bingham { a: a1(d) * kappa }
    }

    pub fn bing2(d: usize, kappa: f64) -> Self {
        AlternativeSpec::Bingham { a: a2(d) * kappa }
    }

    pub fn lp(d: usize, m: usize, kappa: f64) -> Self {
        AlternativeSpec::Legendre {
            m,
            theta: theta1(d),
            kappa,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            AlternativeSpec::Uniform { d } => *d,
            AlternativeSpec::VonMisesFisher { theta, .. }
            | AlternativeSpec::Watson { theta, .. }
            | AlternativeSpec::Legendre { theta, .. } => theta.d(),
            AlternativeSpec::Bingham { a } => a.nrows(),
            AlternativeSpec::MixVmf2 { thetas, .. } => thetas[0].d(),
            AlternativeSpec::MixVmf3 { thetas, .. } => thetas[0].d(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        if d < 2 {
            return Err(Error::Input(format!("dimension must be ≥ 2, got {d}")));
        }
        let finite = |k: f64, what: &str| {
            if k.is_finite() && k >= 0.0 {
                Ok(())
            } else {
                Err(Error::Input(format!("{what} must be finite and ≥ 0, got {k}")))
            }
        };
        match self {
            AlternativeSpec::Uniform { .. } => Ok(()),
            AlternativeSpec::VonMisesFisher { kappa, .. } => finite(*kappa, "vMF concentration"),
            AlternativeSpec::Watson { kappa, .. } => finite(*kappa, "Watson concentration"),
            AlternativeSpec::Bingham { a } => {
                if a.ncols() != d {
                    return Err(Error::Input("Bingham matrix must be square".into()));
                }
                if (a - a.transpose()).amax() > 1e-12 || a.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Input("Bingham matrix must be finite and symmetric".into()));
                }
                Ok(())
            }
            AlternativeSpec::MixVmf2 { p, thetas, kappas } => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::Input(format!("mixture weight p must lie in (0, 1), got {p}")));
                }
                if thetas[1].d() != d {
                    return Err(Error::Input("mixture centers differ in dimension".into()));
                }
                kappas.iter().try_for_each(|&k| finite(k, "mixture concentration"))
            }
            AlternativeSpec::MixVmf3 { p, thetas, kappas } => {
                if !(*p > 0.0 && *p < 0.5) {
                    return Err(Error::Input(format!(
                        "three-center mixture weight p must lie in (0, 1/2), got {p}"
                    )));
                }
                if thetas.iter().any(|t| t.d() != d) {
                    return Err(Error::Input("mixture centers differ in dimension".into()));
                }
                kappas.iter().try_for_each(|&k| finite(k, "mixture concentration"))
            }
            AlternativeSpec::Legendre { m, kappa, .. } => {
                if *m == 0 {
                    return Err(Error::Input("Legendre alternative needs order m ≥ 1".into()));
                }
                if !(0.0..=1.0).contains(kappa) {
                    return Err(Error::Input(format!(
                        "Legendre alternative needs κ ∈ [0, 1] for a non-negative density, got {kappa}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Parses strings such as `vmf:kappa=1`, `mixvmf2:p=0.5,k1=1,k2=4`,
    /// `bing1:kappa=0.25` or `lp:m=3,kappa=1` for dimension `d`.
    pub fn parse(s: &str, d: usize) -> Result<Self> {
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim().to_ascii_lowercase(), a),
            None => (s.trim().to_ascii_lowercase(), ""),
        };
        let mut params = Vec::new();
        for item in args.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Input(format!("expected key=value in '{item}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("'{v}' is not a number in '{s}'")))?;
            params.push((k.trim().to_ascii_lowercase(), v));
        }
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .or(default)
                .ok_or_else(|| Error::Input(format!("'{s}' is missing parameter '{key}'")))
        };
        let known: &[&str] = match name.as_str() {
            "uniform" => &[],
            "vmf" | "watson" | "bing1" | "bing2" => &["kappa"],
            "mixvmf1" => &["p"],
            "mixvmf2" => &["p", "k1", "k2"],
            "mixvmf3" | "mixvmf4" => &["p", "k1", "k2", "k3"],
            "lp" => &["m", "kappa"],
            _ => {
                return Err(Error::Input(format!(
                    "unknown alternative '{name}' (expected uniform, vmf, watson, bing1, bing2, \
                     mixvmf1, mixvmf2, mixvmf3, mixvmf4 or lp)"
                )))
            }
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            return Err(Error::Input(format!("unknown parameter '{k}' for '{name}'")));
        }
        let spec = match name.as_str() {
            "uniform" => AlternativeSpec::Uniform { d },
            "vmf" => AlternativeSpec::vmf1(d, get("kappa", None)?),
            "watson" => AlternativeSpec::Watson {
                theta: theta1(d),
                kappa: get("kappa", None)?,
            },
            "bing1" => AlternativeSpec::bing1(d, get("kappa", None)?),
            "bing2" => AlternativeSpec::bing2(d, get("kappa", None)?),
            "mixvmf1" => AlternativeSpec::mix_vmf1(d, get("p", None)?),
            "mixvmf2" => AlternativeSpec::MixVmf2 {
                p: get("p", None)?,
                thetas: [theta1(d).neg(), theta1(d)],
                kappas: [get("k1", Some(1.0))?, get("k2", Some(4.0))?],
            },
            "mixvmf3" | "mixvmf4" => AlternativeSpec::MixVmf3 {
                p: get("p", None)?,
                thetas: [theta2(d), theta3(d), theta1(d)],
                kappas: [
                    get("k1", Some(2.0))?,
                    get("k2", Some(3.0))?,
                    get("k3", Some(if name == "mixvmf3" { 3.0 } else { 4.0 }))?,
                ],
            },
            "lp" => {
                let m = get("m", None)?;
                if m < 1.0 || m.fract() != 0.0 {
                    return Err(Error::Input(format!("LP order must be a positive integer, got {m}")));
                }
                AlternativeSpec::lp(d, m as usize, get("kappa", None)?)
            }
            _ => unreachable!(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for AlternativeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlternativeSpec::Uniform { .. } => write!(f, "uniform"),
            AlternativeSpec::VonMisesFisher { kappa, .. } => write!(f, "vmf(kappa={kappa})"),
            AlternativeSpec::Watson { kappa, .. } => write!(f, "watson(kappa={kappa})"),
            AlternativeSpec::Bingham { .. } => write!(f, "bingham"),
            AlternativeSpec::MixVmf2 { p, kappas, .. } => {
                write!(f, "mixvmf2(p={p},k1={},k2={})", kappas[0], kappas[1])
            }
            AlternativeSpec::MixVmf3 { p, kappas, .. } => {
                write!(f, "mixvmf3(p={p},k1={},k2={},k3={})", kappas[0], kappas[1], kappas[2])
            }
            AlternativeSpec::Legendre { m, kappa, .. } => write!(f, "lp(m={m},kappa={kappa})"),
        }
    }
}

/// `ln` of the vMF normalizing constant `C_d(κ)` in `f = C_d(κ) e^{κ θ·x}`.
pub fn vmf_ln_normalizer(d: usize, kappa: f64) -> Result<f64> {
    let p = d as f64 / 2.0 - 1.0;
    // C_d(κ) = 1 / (|S^{d-1}| Γ(d/2)(κ/2)^{1−d/2} I_{d/2−1}(κ)) with the Bessel series normalized.
    let tail = bessel_i_scaled_tail(p, kappa)?;
    Ok(-geometry::area(d).ln() - tail.ln_1p())
}

/// Normalizing constant `c(d, A) = ∫ exp(xᵀAx) dσ(x)` with its Monte Carlo standard error
/// (zero when computed by quadrature).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinghamNormalizer {
    pub value: f64,
    pub stderr: f64,
}

/// `c(d, A)`: closed form for `d = 2`, one-dimensional quadrature for `d = 3`,
/// and a seeded Monte Carlo estimate otherwise.
pub fn bingham_normalizer(a: &DMatrix<f64>) -> Result<BinghamNormalizer> {
    let d = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    lam.sort_by(|x, y| x.total_cmp(y));
    match d {
        2 => {
            let v = 2.0 * PI * ((lam[0] + lam[1]) / 2.0).exp() * bessel_i(0.0, (lam[1] - lam[0]) / 2.0)?;
            Ok(BinghamNormalizer { value: v, stderr: 0.0 })
        }
        3 => {
            let mut failure = None;
            let q = quadrature::integrate(
                |t| {
                    let s = 1.0 - t * t;
                    match bessel_i(0.0, s * (lam[1] - lam[0]) / 2.0) {
                        Ok(i0) => 2.0 * PI * (lam[2] * t * t + s * (lam[0] + lam[1]) / 2.0).exp() * i0,
                        Err(e) => {
                            failure = Some(e);
                            f64::NAN
                        }
                    }
                },
                -1.0,
                1.0,
                1e-12,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            if !q.converged {
                return Err(Error::numerical("Bingham normalizing constant", q.error));
            }
            Ok(BinghamNormalizer {
                value: q.value,
                stderr: 0.0,
            })
        }
        _ => {
            let mut rng = rng::stream(0x6269_6e67, rng::tag::COVER, d as u64);
            let n = 400_000;
            let mut x = vec![0.0; d];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                geometry::uniform_direction_into(&mut rng, &mut x);
                let v = quad_form(a, &x).exp();
                s1 += v;
                s2 += v * v;
            }
            let mean = s1 / n as f64;
            let var = (s2 / n as f64 - mean * mean).max(0.0);
            let area = geometry::area(d);
            Ok(BinghamNormalizer {
                value: area * mean,
                stderr: area * (var / n as f64).sqrt(),
            })
        }
    }
}

fn quad_form(a: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = x.len();
    let mut s = 0.0;
    for i in 0..d {
        let mut row = 0.0;
        for j in 0..d {
            row += a[(i, j)] * x[j];
        }
        s += x[i] * row;
    }
    s
}

/// Density of `spec` with respect to the surface measure at `x`.
pub fn density(spec: &AlternativeSpec, x: &UnitVector) -> Result<f64> {
    spec.validate()?;
    if x.d() != spec.d() {
        return Err(Error::Input("point and distribution differ in dimension".into()));
    }
    let d = spec.d();
    let xs = x.as_slice();
    let vmf = |theta: &UnitVector, kappa: f64| -> Result<f64> {
        Ok((vmf_ln_normalizer(d, kappa)? + kappa * theta.dot(xs)).exp())
    };
    match spec {
        AlternativeSpec::Uniform { .. } => Ok(1.0 / geometry::area(d)),
        AlternativeSpec::VonMisesFisher { theta, kappa } => vmf(theta, *kappa),
        AlternativeSpec::Watson { theta, kappa } => {
            let t = theta.dot(xs);
            Ok((kappa * t * t).exp() / (geometry::area(d) * kummer_m(0.5, d as f64 / 2.0, *kappa)?))
        }
        AlternativeSpec::Bingham { a } => {
            let c = bingham_normalizer(a)?;
            Ok(quad_form(a, xs).exp() / c.value)
        }
        AlternativeSpec::MixVmf2 { p, thetas, kappas } => {
            Ok(p * vmf(&thetas[0], kappas[0])? + (1.0 - p) * vmf(&thetas[1], kappas[1])?)
        }
        AlternativeSpec::MixVmf3 { p, thetas, kappas } => Ok(p * vmf(&thetas[0], kappas[0])?
            + p * vmf(&thetas[1], kappas[1])?
            + (1.0 - 2.0 * p) * vmf(&thetas[2], kappas[2])?),
        AlternativeSpec::Legendre { m, theta, kappa } => {
            let t = theta.dot(xs).clamp(-1.0, 1.0);
            Ok((1.0 + kappa * legendre::polynomial(d, *m).eval(t)) / geometry::area(d))
        }
    }
}

/// Rejection statistics of a sampling run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SamplerReport {
    pub proposals: u64,
    pub accepted: u64,
    /// Set when the rejection sampler was replaced by an independence Metropolis chain.
    pub metropolis: bool,
}

impl SamplerReport {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// Rejection window after which acceptance is checked.
const WINDOW: u64 = 10_000;
/// Below this acceptance the quadratic-form sampler switches to Metropolis.
const METROPOLIS_THRESHOLD: f64 = 1e-3;
/// Below this acceptance a rejection sampler gives up.
const FAILURE_THRESHOLD: f64 = 1e-4;
const THINNING: usize = 10;

#[derive(Debug, Clone)]
struct VmfSampler {
    theta: Vec<f64>,
    kappa: f64,
    b: f64,
    x0: f64,
    c: f64,
    beta: Beta<f64>,
}

impl VmfSampler {
    fn new(theta: &UnitVector, kappa: f64) -> Result<Self> {
        let dm1 = theta.d() as f64 - 1.0;
        let b = dm1 / (2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let c = kappa * x0 + dm1 * (1.0 - x0 * x0).ln();
        let beta = Beta::new(dm1 / 2.0, dm1 / 2.0).map_err(|e| Error::Input(format!("vMF sampler: {e}")))?;
        Ok(VmfSampler {
            theta: theta.as_slice().to_vec(),
            kappa,
            b,
            x0,
            c,
            beta,
        })
    }

    /// Wood's rejection sampler for the cosine `w = θ·x`, then a uniform tangent direction.
    fn draw(&self, rng: &mut Rng, out: &mut [f64], report: &mut SamplerReport) -> Result<()> {
        let dm1 = out.len() as f64 - 1.0;
        let w = loop {
            report.proposals += 1;
            let z: f64 = self.beta.sample(rng);
            let w = (1.0 - (1.0 + self.b) * z) / (1.0 - (1.0 - self.b) * z);
            let u: f64 = rng.random();
            if self.kappa * w + dm1 * (1.0 - self.x0 * w).ln() - self.c >= u.ln() {
                report.accepted += 1;
                break w;
            }
            check_window(report)?;
        };
        tangent_point(&self.theta, w, rng, out);
        Ok(())
    }
}

/// `out = w θ + √(1−w²) v` with `v` uniform on the unit sphere orthogonal to `θ`.
fn tangent_point(theta: &[f64], w: f64, rng: &mut Rng, out: &mut [f64]) {
    loop {
        for x in out.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        let proj = dot(out, theta);
        out.iter_mut().zip(theta).for_each(|(x, t)| *x -= proj * t);
        let nrm = dot(out, out).sqrt();
        if nrm > 1e-12 {
            let s = (1.0 - w * w).max(0.0).sqrt() / nrm;
            out.iter_mut().zip(theta).for_each(|(x, t)| *x = *x * s + w * t);
            return;
        }
    }
}

fn check_window(report: &SamplerReport) -> Result<()> {
    if report.proposals >= WINDOW && report.acceptance_rate() < FAILURE_THRESHOLD {
        return Err(Error::numerical(
            "rejection sampler envelope failure (acceptance rate)",
            report.acceptance_rate(),
        ));
    }
    Ok(())
}

/// Rejection sampler for `exp(xᵀAx)` with an angular central Gaussian envelope
/// (Kent, Ganeiber and Mardia), working in the eigenbasis of `A`.
#[derive(Debug, Clone)]
struct QuadraticFormSampler {
    vectors: DMatrix<f64>,
    /// Eigenvalues of `B = λ_max I − A`, all ≥ 0.
    shifted: Vec<f64>,
    /// Diagonal of `Ω = I + 2B/b`.
    omega: Vec<f64>,
    ln_bound: f64,
}

impl QuadraticFormSampler {
    fn new(a: &DMatrix<f64>) -> Self {
        let d = a.nrows();
        let eig = SymmetricEigen::new(a.clone());
        let lmax = eig.eigenvalues.max();
        let shifted: Vec<f64> = eig.eigenvalues.iter().map(|l| (lmax - l).max(0.0)).collect();
        // b solves Σ 1/(b + 2β_i) = 1 on (0, d]; the left side decreases in b.
        let g = |b: f64| shifted.iter().map(|s| 1.0 / (b + 2.0 * s)).sum::<f64>() - 1.0;
        let (mut lo, mut hi) = (1e-12_f64, d as f64);
        if g(hi) >= 0.0 {
            lo = hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b = 0.5 * (lo + hi);
        let df = d as f64;
        let omega = shifted.iter().map(|s| 1.0 + 2.0 * s / b).collect();
        let ln_bound = -(df - b) / 2.0 + df / 2.0 * (df / b).ln();
        QuadraticFormSampler {
            vectors: eig.eigenvectors,
            shifted,
            omega,
            ln_bound,
        }
    }

    /// Envelope proposal in eigen-coordinates and its log acceptance ratio.
    fn propose(&self, rng: &mut Rng, y: &mut [f64]) -> f64 {
        loop {
            let mut ss = 0.0;
            for (yi, om) in y.iter_mut().zip(&self.omega) {
                *yi = StandardNormal.sample(rng);
                *yi /= om.sqrt();
                ss += *yi * *yi;
            }
            if ss > 1e-300 {
                let inv = 1.0 / ss.sqrt();
                y.iter_mut().for_each(|v| *v *= inv);
                break;
            }
        }
        let mut xbx = 0.0;
        let mut xox = 0.0;
        for ((yi, s), om) in y.iter().zip(&self.shifted).zip(&self.omega) {
            xbx += s * yi * yi;
            xox += om * yi * yi;
        }
        -xbx + y.len() as f64 / 2.0 * xox.ln() - self.ln_bound
    }

    fn to_ambient(&self, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(y.len()) {
            *o = y.iter().enumerate().map(|(j, yj)| self.vectors[(i, j)] * yj).sum();
        }
    }

    fn fill(&self, rng: &mut Rng, out: &mut [f64], d: usize, report: &mut SamplerReport) -> Result<()> {
        let mut y = vec![0.0; d];
        let n = out.len() / d;
        let mut i = 0;
        while i < n {
            report.proposals += 1;
            let ln_ratio = self.propose(rng, &mut y);
            let u: f64 = rng.random();
            if u.ln() < ln_ratio {
                report.accepted += 1;
                self.to_ambient(&y, &mut out[i * d..(i + 1) * d]);
                i += 1;
            } else if report.proposals >= WINDOW && report.acceptance_rate() < METROPOLIS_THRESHOLD {
                report.metropolis = true;
                return self.metropolis(rng, &mut out[i * d..], d, report);
            }
        }
        Ok(())
    }

    /// Independence Metropolis chain with the envelope as proposal, thinned.
    fn metropolis(&self, rng: &mut Rng, out: &mut [f64], d: usize, report: &mut SamplerReport) -> Result<()> {
        let mut cur = vec![0.0; d];
        let mut cur_w = self.propose(rng, &mut cur);
        let mut y = vec![0.0; d];
        for _ in 0..100 * THINNING {
            let w = self.propose(rng, &mut y);
            if rng.random::<f64>().ln() < w - cur_w {
                std::mem::swap(&mut cur, &mut y);
                cur_w = w;
            }
        }
        for row in out.chunks_exact_mut(d) {
            for _ in 0..THINNING {
                report.proposals += 1;
                let w = self.propose(rng, &mut y);
                if rng.random::<f64>().ln() < w - cur_w {
                    report.accepted += 1;
                    std::mem::swap(&mut cur, &mut y);
                    cur_w = w;
                }
            }
            self.to_ambient(&cur, row);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Uniform,
    Vmf(VmfSampler),
    Quadratic(QuadraticFormSampler),
    Mixture {
        cuts: Vec<f64>,
        parts: Vec<VmfSampler>,
    },
    Legendre {
        theta: Vec<f64>,
        kappa: f64,
        poly: Arc<LegendrePolynomial>,
    },
}

/// A prepared sampler; construction does all per-distribution setup.
#[derive(Debug, Clone)]
pub struct Sampler {
    d: usize,
    kind: Kind,
}

impl Sampler {
    pub fn new(spec: &AlternativeSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.d();
        let kind = match spec {
            AlternativeSpec::Uniform { .. } => Kind::Uniform,
            AlternativeSpec::VonMisesFisher { theta, kappa } => Kind::Vmf(VmfSampler::new(theta, *kappa)?),
            AlternativeSpec::Watson { theta, kappa } => {
                let t = DVector::from_column_slice(theta.as_slice());
                Kind::Quadratic(QuadraticFormSampler::new(&(&t * t.transpose() * *kappa)))
            }
            AlternativeSpec::Bingham { a } => Kind::Quadratic(QuadraticFormSampler::new(a)),
            AlternativeSpec::MixVmf2 { p, thetas, kappas } => Kind::Mixture {
                cuts: vec![*p],
                parts: vec![
                    VmfSampler::new(&thetas[0], kappas[0])?,
                    VmfSampler::new(&thetas[1], kappas[1])?,
                ],
            },
            AlternativeSpec::MixVmf3 { p, thetas, kappas } => Kind::Mixture {
                cuts: vec![*p, 2.0 * p],
                parts: vec![
                    VmfSampler::new(&thetas[0], kappas[0])?,
                    VmfSampler::new(&thetas[1], kappas[1])?,
                    VmfSampler::new(&thetas[2], kappas[2])?,
                ],
            },
            AlternativeSpec::Legendre { m, theta, kappa } => Kind::Legendre {
                theta: theta.as_slice().to_vec(),
                kappa: *kappa,
                poly: legendre::polynomial(d, *m),
            },
        };
        Ok(Sampler { d, kind })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `n` iid draws plus rejection statistics.
    pub fn sample_with_report(&self, n: usize, rng: &mut Rng) -> Result<(SphericalSample, SamplerReport)> {
        if n == 0 {
            return Err(Error::Input("sample size must be ≥ 1".into()));
        }
        let d = self.d;
        let mut data = vec![0.0; n * d];
        let mut report = SamplerReport::default();
        match &self.kind {
            Kind::Uniform => {
                for row in data.chunks_exact_mut(d) {
                    geometry::uniform_direction_into(rng, row);
                }
            }
            Kind::Vmf(s) => {
                for row in data.chunks_exact_mut(d) {
                    s.draw(rng, row, &mut report)?;
                }
            }
            Kind::Quadratic(s) => s.fill(rng, &mut data, d, &mut report)?,
            Kind::Mixture { cuts, parts } => {
                for row in data.chunks_exact_mut(d) {
                    let u: f64 = rng.random();
                    let idx = cuts.iter().take_while(|&&c| u >= c).count();
                    parts[idx].draw(rng, row, &mut report)?;
                }
            }
            Kind::Legendre { theta, kappa, poly } => {
                for row in data.chunks_exact_mut(d) {
                    loop {
                        report.proposals += 1;
                        geometry::uniform_direction_into(rng, row);
                        let t = dot(theta, row).clamp(-1.0, 1.0);
                        let u: f64 = rng.random();
                        if u * (1.0 + kappa) < 1.0 + kappa * poly.eval(t) {
                            report.accepted += 1;
                            break;
                        }
                        check_window(&report)?;
                    }
                }
            }
        }
        Ok((SphericalSample::from_flat(d, data)?, report))
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<SphericalSample> {
        self.sample_with_report(n, rng).map(|(s, _)| s)
    }
}

/// `n` iid draws from `spec`.
pub fn sample(spec: &AlternativeSpec, n: usize, rng: &mut Rng) -> Result<SphericalSample> {
    Sampler::new(spec)?.sample(n, rng)
}

/// Density of `t = axis·X` with respect to `(1 − t²)^{(d−3)/2} dt`.
///
/// Available when the law of `axis·X` is one-dimensional in closed form:
/// zonal classes about `±axis`, and Bingham laws for `d ≤ 3` with `axis`
/// an eigenvector of `A`.
pub fn projected_profile(spec: &AlternativeSpec, axis: &UnitVector) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
    spec.validate()?;
    let d = spec.d();
    let ratio = geometry::area_ratio(d);
    let sign_along = |theta: &UnitVector| -> Result<f64> {
        let c = theta.dot(axis.as_slice());
        if (c.abs() - 1.0).abs() < 1e-12 {
            Ok(c.signum())
        } else {
            Err(Error::Unsupported(
                "projection axis must be ± the center direction".into(),
            ))
        }
    };
    let vmf_profile = |theta: &UnitVector, kappa: f64| -> Result<(f64, f64)> {
        Ok((
            sign_along(theta)? * kappa,
            ratio * geometry::area(d) * vmf_ln_normalizer(d, kappa)?.exp(),
        ))
    };
    Ok(match spec {
        AlternativeSpec::Uniform { .. } => Box::new(move |_| ratio),
        AlternativeSpec::VonMisesFisher { theta, kappa } => {
            let (k, c) = vmf_profile(theta, *kappa)?;
            Box::new(move |t| c * (k * t).exp())
        }
        AlternativeSpec::MixVmf2 { p, thetas, kappas } => {
            let a = vmf_profile(&thetas[0], kappas[0])?;
            let b = vmf_profile(&thetas[1], kappas[1])?;
            let p = *p;
            Box::new(move |t| p * a.1 * (a.0 * t).exp() + (1.0 - p) * b.1 * (b.0 * t).exp())
        }
        AlternativeSpec::MixVmf3 { .. } => {
            return Err(Error::Unsupported(
                "three-center mixtures have no one-dimensional projected law".into(),
            ))
        }
        AlternativeSpec::Watson { theta, kappa } => {
            sign_along(theta)?;
            let c = ratio / kummer_m(0.5, d as f64 / 2.0, *kappa)?;
            let k = *kappa;
            Box::new(move |t| c * (k * t * t).exp())
        }
        AlternativeSpec::Legendre { m, theta, kappa } => {
            let s = sign_along(theta)?;
            let poly = legendre::polynomial(d, *m);
            let k = *kappa;
            Box::new(move |t| ratio * (1.0 + k * poly.eval(s * t)))
        }
        AlternativeSpec::Bingham { a } => {
            if d > 3 {
                return Err(Error::Unsupported("Bingham projections need d ≤ 3".into()));
            }
            let eig = SymmetricEigen::new(a.clone());
            let idx = (0..d)
                .find(|&i| (dot(eig.eigenvectors.column(i).as_slice(), axis.as_slice()).abs() - 1.0).abs() < 1e-9)
                .ok_or_else(|| Error::Unsupported("projection axis must be an eigenvector of A".into()))?;
            let lk = eig.eigenvalues[idx];
            let others: Vec<f64> = (0..d).filter(|&i| i != idx).map(|i| eig.eigenvalues[i]).collect();
            let c = bingham_normalizer(a)?.value;
            if d == 2 {
                let lo = others[0];
                // Two points of the circle share each t; arc length contributes (1−t²)^{-1/2}.
                Box::new(move |t| 2.0 * (lk * t * t + lo * (1.0 - t * t)).exp() / c)
            } else {
                let (l0, l1) = (others[0], others[1]);
                Box::new(move |t| {
                    let s = 1.0 - t * t;
                    let i0 = bessel_i(0.0, s * (l0 - l1).abs() / 2.0).unwrap_or(f64::NAN);
                    2.0 * PI * (lk * t * t + s * (l0 + l1) / 2.0).exp() * i0 / c
                })
            }
        }
    })
}

/// χ² goodness-of-fit p-value of the projections `axis·U_i` against the
/// analytic projected law, using `bins` equal-width bins in the angle.
pub fn projection_gof(spec: &AlternativeSpec, sample: &SphericalSample, axis: &UnitVector, bins: usize) -> Result<f64> {
    let profile = projected_profile(spec, axis)?;
    let d = spec.d();
    let n = sample.n() as f64;
    // Equal-angle bins keep every cell populated for all classes of interest.
    let edges: Vec<f64> = (0..=bins)
        .map(|i| (PI * (bins - i) as f64 / bins as f64).cos())
        .collect();
    let mut probs = Vec::with_capacity(bins);
    for w in edges.windows(2) {
        let q = quadrature::integrate_weighted(&profile, d, w[0], w[1], 1e-13);
        if !q.converged {
            return Err(Error::numerical("projected bin probability", q.error));
        }
        probs.push(q.value);
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::numerical(
            "projected density does not integrate to one",
            (total - 1.0).abs(),
        ));
    }
    let mut counts = vec![0u64; bins];
    for row in sample.rows() {
        let angle = dot(row, axis.as_slice()).clamp(-1.0, 1.0).acos();
        let idx = ((angle / PI * bins as f64) as usize).min(bins - 1);
        counts[bins - 1 - idx] += 1;
    }
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (c, p) in counts.iter().zip(&probs) {
        let e = n * p;
        if e > 0.0 {
            stat += (*c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    Ok(1.0 - chi2_cdf((cells - 1) as f64, stat))
}
