//! Points on the hypersphere, uniform sampling and direction covers.

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::special::gamma;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::f64::consts::PI;

/// Inputs closer than this to the unit sphere are accepted as they are.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Inputs with a smaller norm cannot be projected onto the sphere.
pub const MIN_NORM: f64 = 1e-8;

/// `|S^{d-1}| = 2π^{d/2} / Γ(d/2)`.
pub fn surface_area(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("surface_area needs d ≥ 1".into()));
    }
    let h = d as f64 / 2.0;
    Ok(2.0 * PI.powf(h) / gamma(h))
}

/// Same as [`surface_area`] for callers that already validated `d ≥ 1`.
pub(crate) fn area(d: usize) -> f64 {
    surface_area(d).expect("d ≥ 1")
}

/// Ratio `|S^{d-2}| / |S^{d-1}|` for `d ≥ 2`.
pub(crate) fn area_ratio(d: usize) -> f64 {
    area(d - 1) / area(d)
}

/// A direction in ℝ^d, stored with unit Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitVector {
    coords: Vec<f64>,
}

impl UnitVector {
    /// Projects `coords` onto the sphere. Fails for `d < 2` or a norm below [`MIN_NORM`].
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::repair(coords).map(|(u, _)| u)
    }

    /// Like [`UnitVector::new`] and also reports whether renormalization changed the input.
    pub fn repair(mut coords: Vec<f64>) -> Result<(Self, bool)> {
        if coords.len() < 2 {
            return Err(Error::Input(format!(
                "a direction needs at least 2 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite coordinate".into()));
        }
        let norm = norm(&coords);
        if norm < MIN_NORM {
            return Err(Error::Input(format!("norm {norm:.3e} too small to normalize")));
        }
        let repaired = (norm - 1.0).abs() > NORM_TOLERANCE;
        for x in &mut coords {
            *x /= norm;
        }
        Ok((UnitVector { coords }, repaired))
    }

    /// The `i`-th standard basis vector of ℝ^d.
    pub fn basis(d: usize, i: usize) -> Self {
        let mut coords = vec![0.0; d];
        coords[i] = 1.0;
        UnitVector { coords }
    }

    pub fn d(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.coords, other)
    }

    pub fn neg(&self) -> Self {
        UnitVector {
            coords: self.coords.iter().map(|x| -x).collect(),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `n` points on `S^{d-1}`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalSample {
    d: usize,
    data: Vec<f64>,
}

impl SphericalSample {
    /// Builds a sample from row-major coordinates, normalizing every row.
    pub fn from_flat(d: usize, mut data: Vec<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::Input(format!("dimension must be ≥ 2, got {d}")));
        }
        if data.is_empty() || !data.len().is_multiple_of(d) {
            return Err(Error::Input(format!(
                "{} coordinates do not form rows of length {d}",
                data.len()
            )));
        }
        for row in data.chunks_exact_mut(d) {
            let nrm = norm(row);
            if !nrm.is_finite() || nrm < MIN_NORM {
                return Err(Error::Input(format!("row norm {nrm:.3e} cannot be normalized")));
            }
            if (nrm - 1.0).abs() > NORM_TOLERANCE {
                row.iter_mut().for_each(|x| *x /= nrm);
            }
        }
        Ok(SphericalSample { d, data })
    }

    pub fn from_rows(rows: &[UnitVector]) -> Result<Self> {
        let d = rows.first().ok_or_else(|| Error::Input("empty sample".into()))?.d();
        if rows.iter().any(|r| r.d() != d) {
            return Err(Error::Input("rows of differing dimension".into()));
        }
        let data = rows.iter().flat_map(|r| r.coords.iter().copied()).collect();
        Ok(SphericalSample { d, data })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Coordinates stored column by column (`d` blocks of length `n`).
    pub fn columns(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n * self.d];
        for (i, row) in self.rows().enumerate() {
            for (k, &x) in row.iter().enumerate() {
                out[k * n + i] = x;
            }
        }
        out
    }

    /// Sample mean vector `Ū`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for row in self.rows() {
            for (acc, x) in m.iter_mut().zip(row) {
                *acc += x;
            }
        }
        let n = self.n() as f64;
        m.iter_mut().for_each(|x| *x /= n);
        m
    }

    /// Scatter matrix `(1/n) Σ U_j U_jᵀ`.
    pub fn scatter(&self) -> DMatrix<f64> {
        let d = self.d;
        let mut s = DMatrix::zeros(d, d);
        for row in self.rows() {
            for a in 0..d {
                for b in a..d {
                    s[(a, b)] += row[a] * row[b];
                }
            }
        }
        let n = self.n() as f64;
        for a in 0..d {
            for b in a..d {
                s[(a, b)] /= n;
                s[(b, a)] = s[(a, b)];
            }
        }
        s
    }

    /// Applies `x ↦ A x` to every row.
    pub fn rotate(&self, a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != self.d || a.ncols() != self.d {
            return Err(Error::Input("rotation has the wrong shape".into()));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.rows() {
            let v = a * DVector::from_column_slice(row);
            data.extend(v.iter());
        }
        SphericalSample::from_flat(self.d, data)
    }
}

/// One uniform direction drawn by normalizing a standard normal vector.
pub fn uniform_direction_into(rng: &mut Rng, out: &mut [f64]) {
    loop {
        let mut ss = 0.0;
        for x in out.iter_mut() {
            *x = StandardNormal.sample(rng);
            ss += *x * *x;
        }
        if ss > 1e-300 {
            let inv = 1.0 / ss.sqrt();
            out.iter_mut().for_each(|x| *x *= inv);
            return;
        }
    }
}

/// `n` iid uniform directions on `S^{d-1}`.
pub fn sample_uniform(d: usize, n: usize, rng: &mut Rng) -> Result<SphericalSample> {
    if d < 2 || n == 0 {
        return Err(Error::Input(format!("need d ≥ 2 and n ≥ 1 (got d={d}, n={n})")));
    }
    let mut data = vec![0.0; n * d];
    for row in data.chunks_exact_mut(d) {
        uniform_direction_into(rng, row);
    }
    Ok(SphericalSample { d, data })
}

/// Converts latitude/longitude in degrees to a point on `S²`.
///
/// Longitudes in `[−180, 180)` and `[0, 360)` are both accepted.
pub fn latlon_to_unit(lat_deg: f64, lon_deg: f64) -> Result<UnitVector> {
    if !(-90.0..=90.0).contains(&lat_deg) || !lat_deg.is_finite() {
        return Err(Error::Input(format!("latitude {lat_deg} outside [-90, 90]")));
    }
    if !(-180.0..360.0).contains(&lon_deg) {
        return Err(Error::Input(format!("longitude {lon_deg} outside [-180, 360)")));
    }
    let lon = if lon_deg >= 180.0 { lon_deg - 360.0 } else { lon_deg };
    let (sl, cl) = lat_deg.to_radians().sin_cos();
    let (so, co) = lon.to_radians().sin_cos();
    // Exact zeros at the poles and on the axes keep the trivial cases exact.
    let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
    UnitVector::new(vec![snap(cl * co), snap(cl * so), snap(sl)])
}

/// Random directions used to approximate a maximum over the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionCover {
    points: SphericalSample,
    seed: u64,
}

impl DirectionCover {
    /// Cover drawn from an explicit stream; the seed is recorded for provenance only.
    pub fn from_rng(d: usize, m: usize, seed: u64, rng: &mut Rng) -> Result<Self> {
        if m == 0 {
            return Err(Error::Input("cover size must be ≥ 1".into()));
        }
        Ok(DirectionCover {
            points: sample_uniform(d, m, rng)?,
            seed,
        })
    }

    pub fn from_points(points: SphericalSample, seed: u64) -> Self {
        DirectionCover { points, seed }
    }

    pub fn d(&self) -> usize {
        self.points.d()
    }

    pub fn m(&self) -> usize {
        self.points.n()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn points(&self) -> &SphericalSample {
        &self.points
    }

    pub fn rotate(&self, a: &DMatrix<f64>) -> Result<Self> {
        Ok(DirectionCover {
            points: self.points.rotate(a)?,
            seed: self.seed,
        })
    }
}

/// `m` uniform directions reproducible from `seed`. Points are drawn in
/// sequence, so a cover of size `m₁ < m₂` is a prefix of the larger one.
pub fn make_cover(d: usize, m: usize, seed: u64) -> Result<DirectionCover> {
    let mut rng = rng::stream(seed, rng::tag::COVER, 0);
    DirectionCover::from_rng(d, m, seed, &mut rng)
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
pub fn random_rotation(d: usize, rng: &mut Rng) -> DMatrix<f64> {
    let g: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn areas() {
        assert_abs_diff_eq!(surface_area(2).unwrap(), 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(surface_area(3).unwrap(), 4.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(surface_area(5).unwrap(), 8.0 * PI * PI / 3.0, epsilon = 1e-11);
        assert!(surface_area(0).is_err());
    }

    #[test]
    fn area_ratio_matches_gamma_form() {
        for d in 3..=12 {
            let h = d as f64 / 2.0;
            let expect = gamma(h) / (PI.sqrt() * gamma(h - 0.5));
            assert!((area_ratio(d) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn latlon_cases() {
        assert_eq!(latlon_to_unit(0.0, 0.0).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(latlon_to_unit(90.0, 33.0).unwrap().as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(latlon_to_unit(0.0, 90.0).unwrap().as_slice(), &[0.0, 1.0, 0.0]);
        let a = latlon_to_unit(10.0, 270.0).unwrap();
        let b = latlon_to_unit(10.0, -90.0).unwrap();
        assert_eq!(a, b);
        assert!(latlon_to_unit(91.0, 0.0).is_err());
    }

    #[test]
    fn repair_policy() {
        let (u, repaired) = UnitVector::repair(vec![0.3, 0.4]).unwrap();
        assert!(repaired);
        assert_abs_diff_eq!(u.as_slice()[0], 0.6, epsilon = 1e-15);
        assert!(UnitVector::new(vec![1e-9, 0.0]).is_err());
    }

    #[test]
    fn covers_are_deterministic_and_nested() {
        let a = make_cover(3, 100, 11).unwrap();
        let b = make_cover(3, 100, 11).unwrap();
        assert_eq!(a, b);
        let big = make_cover(3, 250, 11).unwrap();
        assert_eq!(a.points().as_flat(), &big.points().as_flat()[..300]);
        let wide = make_cover(10, 20000, 3).unwrap();
        for row in wide.points().rows() {
            assert!((norm(row) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_cover_has_small_gaps() {
        let cover = make_cover(2, 5000, 1).unwrap();
        let mut angles: Vec<f64> = cover
            .points()
            .rows()
            .map(|r| r[1].atan2(r[0]).rem_euclid(2.0 * PI))
            .collect();
        angles.sort_by(|a, b| a.total_cmp(b));
        let mut gap = angles[0] + 2.0 * PI - angles[angles.len() - 1];
        for w in angles.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        // Every direction lies within half the widest gap of a cover point.
        assert!(gap / 2.0 <= 0.01, "half-gap {}", gap / 2.0);
    }

    #[test]
    fn uniform_mean_is_small() {
        let mut rng = rng::seeded(5);
        let n = 100_000;
        let mut hits = 0;
        for _ in 0..100 {
            let s = sample_uniform(3, n / 100, &mut rng).unwrap();
            let m = s.mean();
            if norm(&m) <= 4.0 / ((n / 100) as f64 * 3.0).sqrt() {
                hits += 1;
            }
        }
        assert!(hits >= 99);
    }

    #[test]
    fn rotation_is_orthogonal() {
        let mut rng = rng::seeded(9);
        let q = random_rotation(5, &mut rng);
        let id = q.transpose() * &q;
        assert!((id - DMatrix::identity(5, 5)).amax() < 1e-12);
    }
}
