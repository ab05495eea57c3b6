//! Geometry of the unit disk and its influx boundary.
//!
//! A chord is identified by a fan-beam pair `(α, β)`: the entry point is
//! `x = e^{iβ}` on the unit circle and the (inward) direction is
//! `v = e^{i(α+β+π)}`, so that `x·v = -cos α ≤ 0` and the exit time is
//! `τ = -2 x·v = 2 cos α`. The influx boundary carries the normalized
//! measure `λ = dα dβ / (2π²)`, a probability measure.

use crate::error::{Error, Result};
use crate::numerics::gauss_legendre;
use nalgebra::Vector2;
use std::f64::consts::PI;

/// Chords with `x·v` above this are rejected as not inward-pointing;
/// chords with `τ` below ~2×`GLANCING_TOL` are treated as glancing.
pub const INFLUX_TOL: f64 = 1e-12;

/// Exit times below this short-circuit transport solves to the identity.
pub const GLANCING_TOL: f64 = 1e-10;

/// Total mass of the area form `dα dβ` on the influx boundary; converts
/// between the probability measure `λ` and the raw area form.
pub const BOUNDARY_AREA: f64 = 2.0 * PI * PI;

/// Fan-beam coordinates of a point on the influx boundary.
///
/// `alpha` lies in `[-π/2, π/2]`, `beta` is reduced mod `2π` on
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    alpha: f64,
    beta: f64,
}

impl BoundaryPoint {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::invalid("fan-beam angles must be finite"));
        }
        if alpha < -PI / 2.0 - 1e-12 || alpha > PI / 2.0 + 1e-12 {
            return Err(Error::invalid(format!(
                "alpha = {alpha} outside [-pi/2, pi/2]"
            )));
        }
        Ok(BoundaryPoint {
            alpha: alpha.clamp(-PI / 2.0, PI / 2.0),
            beta: beta.rem_euclid(2.0 * PI),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Maps fan-beam coordinates to the phase point `(x, v)`.
pub fn fan_beam_to_phase(p: &BoundaryPoint) -> (Vector2<f64>, Vector2<f64>) {
    let x = Vector2::new(p.beta.cos(), p.beta.sin());
    let t = p.alpha + p.beta + PI;
    let v = Vector2::new(t.cos(), t.sin());
    (x, v)
}

/// Inverse of [`fan_beam_to_phase`]; recovers `(α, β)` mod `2π`.
pub fn phase_to_fan_beam(x: &Vector2<f64>, v: &Vector2<f64>) -> Result<BoundaryPoint> {
    let beta = x.y.atan2(x.x);
    let mut alpha = v.y.atan2(v.x) - beta - PI;
    // wrap into (-pi, pi]
    alpha = alpha - (2.0 * PI) * ((alpha + PI) / (2.0 * PI)).floor();
    BoundaryPoint::new(alpha, beta)
}

/// Exit time `τ(x, v) = -2 x·v` of the chord entering at `x` with
/// direction `v`. Rejects outward directions (`x·v > INFLUX_TOL`).
pub fn exit_time(x: &Vector2<f64>, v: &Vector2<f64>) -> Result<f64> {
    let ip = x.dot(v);
    if ip > INFLUX_TOL {
        return Err(Error::invalid(format!(
            "not an influx point: x.v = {ip} > 0"
        )));
    }
    Ok((-2.0 * ip).max(0.0))
}

/// A chord of the closed disk: entry point, unit direction, exit time.
#[derive(Debug, Clone, PartialEq)]
pub struct Chord {
    pub x: Vector2<f64>,
    pub v: Vector2<f64>,
    pub tau: f64,
}

impl Chord {
    pub fn from_boundary(p: &BoundaryPoint) -> Self {
        let (x, v) = fan_beam_to_phase(p);
        let tau = (-2.0 * x.dot(&v)).max(0.0);
        Chord { x, v, tau }
    }

    pub fn from_phase(x: Vector2<f64>, v: Vector2<f64>) -> Result<Self> {
        let tau = exit_time(&x, &v)?;
        Ok(Chord { x, v, tau })
    }

    /// Point `x + tv`; `t` must lie in `[0, τ]`.
    pub fn point(&self, t: f64) -> Result<Vector2<f64>> {
        if t < -1e-12 || t > self.tau + 1e-12 {
            return Err(Error::invalid(format!(
                "t = {t} outside chord parameter range [0, {}]",
                self.tau
            )));
        }
        Ok(self.x + self.v * t)
    }

    /// Like [`Chord::point`] but unchecked; used by integrators that only
    /// generate parameters inside the range.
    #[inline]
    pub(crate) fn point_unchecked(&self, t: f64) -> Vector2<f64> {
        self.x + self.v * t
    }

    pub fn is_glancing(&self) -> bool {
        self.tau < GLANCING_TOL
    }
}

/// Quadrature rule on the influx boundary for the probability measure `λ`.
///
/// Gauss-Legendre in `α` times the periodic trapezoidal rule in `β`, with
/// the `1/(2π²)` normalization folded into the weights, so they sum to 1.
#[derive(Debug, Clone)]
pub struct BoundaryQuadrature {
    pub nodes: Vec<BoundaryPoint>,
    pub weights: Vec<f64>,
    pub n_alpha: usize,
    pub n_beta: usize,
}

pub fn boundary_quadrature(n_alpha: usize, n_beta: usize) -> BoundaryQuadrature {
    assert!(n_alpha >= 2 && n_beta >= 2);
    let (ax, aw) = gauss_legendre(n_alpha);
    let mut nodes = Vec::with_capacity(n_alpha * n_beta);
    let mut weights = Vec::with_capacity(n_alpha * n_beta);
    for (i, &t) in ax.iter().enumerate() {
        let alpha = 0.5 * PI * t;
        let walpha = 0.5 * PI * aw[i];
        for j in 0..n_beta {
            let beta = 2.0 * PI * j as f64 / n_beta as f64;
            nodes.push(BoundaryPoint { alpha, beta });
            weights.push(walpha * (2.0 * PI / n_beta as f64) / BOUNDARY_AREA);
        }
    }
    BoundaryQuadrature {
        nodes,
        weights,
        n_alpha,
        n_beta,
    }
}

/// Quadrature rule on the unit disk for the Lebesgue measure.
///
/// Written in polar form with the substitution `u = r²`, so the radial
/// Gauss-Legendre rule is exact for polynomials in `(x₁, x₂)`: a polynomial
/// of total degree `d` has radial parts that are polynomials in `u` of
/// degree `≤ d/2` once the angular average is taken. Exactness for total
/// degree `d` therefore needs `n_r > d/2` and `n_phi > 2d` (no angular
/// aliasing).
#[derive(Debug, Clone)]
pub struct DiskQuadrature {
    pub nodes: Vec<Vector2<f64>>,
    pub weights: Vec<f64>,
    pub n_r: usize,
    pub n_phi: usize,
}

pub fn disk_quadrature(n_r: usize, n_phi: usize) -> DiskQuadrature {
    assert!(n_r >= 2 && n_phi >= 2);
    let (ux, uw) = gauss_legendre(n_r);
    let mut nodes = Vec::with_capacity(n_r * n_phi);
    let mut weights = Vec::with_capacity(n_r * n_phi);
    for (i, &t) in ux.iter().enumerate() {
        let u = 0.5 * (t + 1.0); // in (0,1)
        let wu = 0.5 * uw[i];
        let r = u.sqrt();
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            nodes.push(Vector2::new(r * phi.cos(), r * phi.sin()));
            weights.push(0.5 * wu * (2.0 * PI / n_phi as f64));
        }
    }
    DiskQuadrature {
        nodes,
        weights,
        n_r,
        n_phi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fan_beam_map_examples() {
        // (alpha=0, beta=0) -> x=(1,0), v=(-1,0)
        let p = BoundaryPoint::new(0.0, 0.0).unwrap();
        let (x, v) = fan_beam_to_phase(&p);
        assert_abs_diff_eq!(x.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.x, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-12);

        // glancing: (alpha=pi/2, beta=0) -> v=(0,-1), x.v = 0
        let p = BoundaryPoint::new(PI / 2.0, 0.0).unwrap();
        let (x, v) = fan_beam_to_phase(&p);
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.y, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x.dot(&v), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dot_product_is_minus_cos_alpha() {
        let rng = CounterRng::new(11);
        for i in 0..200 {
            let alpha = -PI / 2.0 + PI * rng.uniform(0, i);
            let beta = 2.0 * PI * rng.uniform(1, i);
            let p = BoundaryPoint::new(alpha, beta).unwrap();
            let (x, v) = fan_beam_to_phase(&p);
            assert_abs_diff_eq!(x.dot(&v), -alpha.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn fan_beam_round_trip() {
        let rng = CounterRng::new(5);
        for i in 0..10_000 {
            let alpha = -PI / 2.0 + PI * rng.uniform(0, i);
            let beta = 2.0 * PI * rng.uniform(1, i);
            let p = BoundaryPoint::new(alpha, beta).unwrap();
            let (x, v) = fan_beam_to_phase(&p);
            let q = phase_to_fan_beam(&x, &v).unwrap();
            assert_abs_diff_eq!(q.alpha(), p.alpha(), epsilon = 1e-12);
            let dbeta = (q.beta() - p.beta()).rem_euclid(2.0 * PI);
            assert!(dbeta < 1e-12 || dbeta > 2.0 * PI - 1e-12);
        }
    }

    #[test]
    fn exit_time_examples() {
        // diameter
        let tau = exit_time(&Vector2::new(1.0, 0.0), &Vector2::new(-1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(tau, 2.0, epsilon = 1e-15);
        // glancing
        let tau = exit_time(&Vector2::new(1.0, 0.0), &Vector2::new(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(tau, 0.0, epsilon = 1e-15);
        // outward direction rejected
        assert!(exit_time(&Vector2::new(1.0, 0.0), &Vector2::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn exit_time_in_fan_beam_is_two_cos_alpha() {
        let rng = CounterRng::new(17);
        for i in 0..500 {
            let alpha = -PI / 2.0 + PI * rng.uniform(0, i);
            let beta = 2.0 * PI * rng.uniform(1, i);
            let c = Chord::from_boundary(&BoundaryPoint::new(alpha, beta).unwrap());
            assert_abs_diff_eq!(c.tau, 2.0 * alpha.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn chord_exit_point_on_circle() {
        let rng = CounterRng::new(23);
        for i in 0..10_000 {
            let alpha = -PI / 2.0 + PI * rng.uniform(0, i);
            let beta = 2.0 * PI * rng.uniform(1, i);
            let c = Chord::from_boundary(&BoundaryPoint::new(alpha, beta).unwrap());
            let end = c.point(c.tau).unwrap();
            assert_abs_diff_eq!(end.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn chord_point_examples() {
        let p = BoundaryPoint::new(0.0, 0.0).unwrap();
        let c = Chord::from_boundary(&p);
        // endpoints
        let start = c.point(0.0).unwrap();
        assert_abs_diff_eq!((start - c.x).norm(), 0.0, epsilon = 1e-15);
        // diameter midpoint is the origin
        let mid = c.point(1.0).unwrap();
        assert_abs_diff_eq!(mid.norm(), 0.0, epsilon = 1e-15);
        // outside range rejected
        assert!(c.point(-0.5).is_err());
        assert!(c.point(c.tau + 0.5).is_err());
    }

    #[test]
    fn boundary_rule_is_probability_measure() {
        let rule = boundary_quadrature(16, 16);
        let total: f64 = rule.weights.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        // integral of sin(beta) vanishes
        let s: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p.beta().sin())
            .sum();
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn boundary_rule_integrates_trig_polynomials() {
        let rule = boundary_quadrature(24, 24);
        // cos^2(alpha): exact value 1/2 under lambda
        let s: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p.alpha().cos().powi(2))
            .sum();
        assert_abs_diff_eq!(s, 0.5, epsilon = 1e-10);
        // cos(2 alpha) cos(3 beta): 0
        let s: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * (2.0 * p.alpha()).cos() * (3.0 * p.beta()).cos())
            .sum();
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn disk_rule_mass_and_symmetry() {
        let rule = disk_quadrature(8, 16);
        let total: f64 = rule.weights.iter().sum();
        assert_abs_diff_eq!(total, PI, epsilon = 1e-10);
        let x1: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p.x)
            .sum();
        assert_abs_diff_eq!(x1, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn disk_rule_exact_for_even_moments() {
        // int x1^2 = pi/4; int |x|^4 = pi/3
        let rule = disk_quadrature(6, 12);
        let m2: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p.x * p.x)
            .sum();
        assert_abs_diff_eq!(m2, PI / 4.0, epsilon = 1e-12);
        let m4: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p.norm_squared().powi(2))
            .sum();
        assert_abs_diff_eq!(m4, PI / 3.0, epsilon = 1e-12);
    }
}
