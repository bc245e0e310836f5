//! Adaptive Gauss–Kronrod quadrature and product rules on S¹ and S².

use crate::error::{Error, Result};
use std::f64::consts::PI;

// Kronrod 15-point abscissae (positive half, descending) and weights,
// with the embedded 7-point Gauss weights on the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.000_000_000_000_000_0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 48;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adapt<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32, out: &mut Quad) {
    let (value, err) = whole;
    if err <= tol || depth >= MAX_DEPTH || (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
        if err > tol {
            out.converged = false;
        }
        out.value += value;
        out.error += err;
        return;
    }
    let mid = 0.5 * (a + b);
    let left = gk15(f, a, mid);
    let right = gk15(f, mid, b);
    adapt(f, a, mid, left, 0.5 * tol, depth + 1, out);
    adapt(f, mid, b, right, 0.5 * tol, depth + 1, out);
}

/// Adaptive Gauss–Kronrod (7/15) integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Quad {
    let mut out = Quad {
        value: 0.0,
        error: 0.0,
        converged: true,
    };
    if a == b {
        return out;
    }
    let whole = gk15(&mut f, a, b);
    adapt(&mut f, a, b, whole, tol, 0, &mut out);
    out
}

/// Like [`integrate`] but fails when the tolerance is not met.
pub fn integrate_checked<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, what: &str) -> Result<f64> {
    let q = integrate(f, a, b, tol);
    if q.converged {
        Ok(q.value)
    } else {
        Err(Error::numerical(what, q.error))
    }
}

/// `∫_a^b g(t) (1 − t²)^{(d−3)/2} dt` for `-1 ≤ a ≤ b ≤ 1`.
///
/// Evaluated in the angle `t = cos φ`, where the weight becomes
/// `sin^{d−2} φ dφ` and the endpoint singularity at `d = 2` disappears.
pub fn integrate_weighted<G: FnMut(f64) -> f64>(mut g: G, d: usize, a: f64, b: f64, tol: f64) -> Quad {
    let lo = b.clamp(-1.0, 1.0).acos();
    let hi = a.clamp(-1.0, 1.0).acos();
    let power = d as i32 - 2;
    integrate(|phi| g(phi.cos()) * phi.sin().powi(power), lo, hi, tol)
}

/// Surface integral `∫_{S^{d-1}} f(x) dσ(x)` for `d ∈ {2, 3}` by nested adaptive quadrature.
pub fn sphere_integral<F: FnMut(&[f64]) -> f64>(d: usize, mut f: F, tol: f64) -> Result<f64> {
    match d {
        2 => {
            let mut x = [0.0; 2];
            let mut total = 0.0;
            let mut converged = true;
            let mut err = 0.0;
            // Four quarter arcs keep the adaptive splitting aligned with the axes.
            for q in 0..4 {
                let a = q as f64 * PI / 2.0;
                let r = integrate(
                    |phi| {
                        x[0] = phi.cos();
                        x[1] = phi.sin();
                        f(&x)
                    },
                    a,
                    a + PI / 2.0,
                    tol / 4.0,
                );
                total += r.value;
                err += r.error;
                converged &= r.converged;
            }
            if converged {
                Ok(total)
            } else {
                Err(Error::numerical("circle quadrature", err))
            }
        }
        3 => {
            let mut x = [0.0; 3];
            let mut inner_ok = true;
            let inner_tol = tol / (4.0 * PI);
            let outer = integrate(
                |theta| {
                    let (st, ct) = theta.sin_cos();
                    let mut sum = 0.0;
                    for q in 0..4 {
                        let a = q as f64 * PI / 2.0;
                        let r = integrate(
                            |phi| {
                                x[0] = st * phi.cos();
                                x[1] = st * phi.sin();
                                x[2] = ct;
                                f(&x)
                            },
                            a,
                            a + PI / 2.0,
                            inner_tol,
                        );
                        inner_ok &= r.converged;
                        sum += r.value;
                    }
                    sum * st
                },
                0.0,
                PI,
                tol,
            );
            if outer.converged && inner_ok {
                Ok(outer.value)
            } else {
                Err(Error::numerical("sphere quadrature", outer.error))
            }
        }
        _ => Err(Error::Unsupported(format!(
            "product quadrature is implemented for d = 2, 3 only (got d = {d})"
        ))),
    }
}
