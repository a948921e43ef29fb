//! Synthetic test spaces with known ground truth, and test sets on them.

use crate::density1d::sin_power_integral;
use crate::error::{Error, Result};
use crate::localize::space::{greedy_cap, sphere_distance, DiscreteSpace, Geometry};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Fibonacci lattice on the unit 2-sphere with uniform weights.
pub fn make_sphere2(n: usize) -> Result<DiscreteSpace> {
    if n < 50 {
        return Err(Error::InvalidParameter(format!(
            "sphere needs at least 50 points, got {n}"
        )));
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    let pts: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            [r * th.cos(), r * th.sin(), z]
        })
        .collect();
    let p2 = pts.clone();
    DiscreteSpace::from_metric(Some(pts), vec![1.0; n], Geometry::Sphere, move |i, j| {
        sphere_distance(p2[i], p2[j])
    })
}

/// `n` equally spaced points on the circle of length `2π`, uniform weights.
pub fn make_circle(n: usize) -> Result<DiscreteSpace> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "circle needs at least 3 points, got {n}"
        )));
    }
    let step = 2.0 * PI / n as f64;
    DiscreteSpace::from_metric(None, vec![1.0; n], Geometry::General, move |i, j| {
        let k = i.abs_diff(j).min(n - i.abs_diff(j));
        k as f64 * step
    })
}

/// Uniform grid on `[ξ, ξ + D]`; each point carries the `sin^{N−1}` mass of
/// its cell. Coordinates are measured from `ξ`.
pub fn make_segment(n_dim: f64, d: f64, xi: f64, n: usize) -> Result<DiscreteSpace> {
    if !(n_dim > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "N must exceed 1, got {n_dim}"
        )));
    }
    if !(d > 0.0 && xi >= 0.0 && xi + d <= PI + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "need D > 0, ξ ≥ 0, ξ + D ≤ π; got D={d}, ξ={xi}"
        )));
    }
    if n < 4 {
        return Err(Error::InvalidParameter(format!(
            "segment needs at least 4 points, got {n}"
        )));
    }
    let step = d / (n - 1) as f64;
    let ts: Vec<f64> = (0..n)
        .map(|k| if k == n - 1 { d } else { k as f64 * step })
        .collect();
    let weights: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let a = (t - 0.5 * step).max(0.0) + xi;
            let b = (t + 0.5 * step).min(d) + xi;
            sin_power_integral(n_dim, b.min(PI)) - sin_power_integral(n_dim, a)
        })
        .collect();
    let coords: Vec<[f64; 3]> = ts.iter().map(|t| [*t, 0.0, 0.0]).collect();
    DiscreteSpace::from_metric(Some(coords), weights, Geometry::Line, move |i, j| {
        (ts[i] - ts[j]).abs()
    })
}

/// Largest base space accepted by [`make_suspension`].
pub const MAX_SUSPENSION_BASE: usize = 20;

/// `[0, π] ×_{sin}^{N−1} Y` sampled at `levels` interior heights; distances
/// by the suspension cosine rule with base distances capped at `π`.
pub fn make_suspension(base: &DiscreteSpace, levels: usize, n_dim: f64) -> Result<DiscreteSpace> {
    let m = base.len();
    if m > MAX_SUSPENSION_BASE {
        return Err(Error::InvalidParameter(format!(
            "base space has {m} points, limit {MAX_SUSPENSION_BASE}"
        )));
    }
    if levels < 2 {
        return Err(Error::InvalidParameter("need at least 2 levels".into()));
    }
    let ts: Vec<f64> = (0..levels)
        .map(|k| (k as f64 + 0.5) * PI / levels as f64)
        .collect();
    let weights: Vec<f64> = (0..levels * m)
        .map(|p| ts[p / m].sin().powf(n_dim - 1.0) * base.weight(p % m))
        .collect();
    let dy: Vec<f64> = (0..m * m).map(|k| base.d(k / m, k % m).min(PI)).collect();
    DiscreteSpace::from_metric(None, weights, Geometry::General, move |p, q| {
        let (t, s) = (ts[p / m], ts[q / m]);
        let c = t.cos() * s.cos() + t.sin() * s.sin() * dy[(p % m) * m + q % m].cos();
        c.clamp(-1.0, 1.0).acos()
    })
}

/// A test set together with what was achieved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapSet {
    pub mask: Vec<bool>,
    pub mass: f64,
    /// Largest included distance from the center.
    pub radius: f64,
}

/// Greedy geodesic ball about `center` of mass at least `v`.
pub fn make_cap_set(space: &DiscreteSpace, center: usize, v: f64) -> Result<CapSet> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "volume must lie in (0,1), got {v}"
        )));
    }
    if center >= space.len() {
        return Err(Error::InvalidParameter(format!(
            "center {center} out of range"
        )));
    }
    let (mask, mass, radius) = greedy_cap(space, center, v);
    Ok(CapSet { mask, mass, radius })
}

/// A cap of mass `v − blob` about `center` plus a cap of mass `blob` about
/// `blob_center`.
pub fn make_perturbed_cap(
    space: &DiscreteSpace,
    center: usize,
    v: f64,
    blob: f64,
    blob_center: usize,
) -> Result<CapSet> {
    if !(blob >= 0.0 && blob < v) {
        return Err(Error::InvalidParameter(format!(
            "blob volume must lie in [0, v), got {blob}"
        )));
    }
    if blob == 0.0 {
        return make_cap_set(space, center, v);
    }
    let main = make_cap_set(space, center, v - blob)?;
    let extra = make_cap_set(space, blob_center, blob)?;
    if main.mask.iter().zip(&extra.mask).any(|(a, b)| *a && *b) {
        return Err(Error::Overlap("blob intersects the shrunken cap".into()));
    }
    let mask: Vec<bool> = main
        .mask
        .iter()
        .zip(&extra.mask)
        .map(|(a, b)| *a || *b)
        .collect();
    Ok(CapSet {
        mass: space.mass(&mask),
        mask,
        radius: main.radius,
    })
}

/// Declarative description of a generated space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceSpec {
    Sphere2 {
        n: usize,
    },
    Circle {
        n: usize,
    },
    Segment1d {
        n: usize,
        n_dim: f64,
        d: f64,
        xi: f64,
    },
    /// Suspension over a circle with `base` points.
    Suspension {
        base: usize,
        levels: usize,
        n_dim: f64,
    },
}

impl SpaceSpec {
    pub fn build(&self) -> Result<DiscreteSpace> {
        match *self {
            SpaceSpec::Sphere2 { n } => make_sphere2(n),
            SpaceSpec::Circle { n } => make_circle(n),
            SpaceSpec::Segment1d { n, n_dim, d, xi } => make_segment(n_dim, d, xi, n),
            SpaceSpec::Suspension {
                base,
                levels,
                n_dim,
            } => make_suspension(&make_circle(base)?, levels, n_dim),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_basics() {
        let s = make_sphere2(400).unwrap();
        assert!((PI - s.diameter()) <= 2.0 * s.mesh());
        // Cap of radius r: mass (1 − cos r)/2.
        let r = 1.0;
        let m = s.mass(&s.ball(0, r));
        assert!((m - (1.0 - r.cos()) / 2.0).abs() <= 2.0 * s.mesh(), "{m}");
        assert!(make_sphere2(10).is_err());
    }

    #[test]
    fn segment_basics() {
        let s = make_segment(2.0, PI, 0.0, 201).unwrap();
        assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let imax = (0..s.len())
            .max_by(|&a, &b| s.weight(a).total_cmp(&s.weight(b)))
            .unwrap();
        assert_eq!(imax, 100);
        assert!((s.diameter() - PI).abs() < 1e-12);
        let t = make_segment(3.0, 2.0, 0.5, 50).unwrap();
        assert!((t.diameter() - 2.0).abs() < 1e-12);
        assert!(make_segment(2.0, 3.0, 0.5, 50).is_err());
    }

    #[test]
    fn cap_sets() {
        let s = make_sphere2(800).unwrap();
        let max_w = s.weights().iter().copied().fold(0.0, f64::max);
        for c in [0, 17, 400] {
            let cap = make_cap_set(&s, c, 0.5).unwrap();
            assert!(cap.mass >= 0.5 && cap.mass <= 0.5 + max_w + 1e-15);
        }
        let cap = make_cap_set(&s, 0, 0.3).unwrap();
        assert!((cap.radius - (1.0 - 0.6f64).acos()).abs() <= 2.0 * s.mesh());
        let same = make_perturbed_cap(&s, 0, 0.3, 0.0, 5).unwrap();
        assert_eq!(same, cap);
        assert!(make_perturbed_cap(&s, 0, 0.3, 0.05, 1).is_err());
    }

    #[test]
    fn suspension_is_metric() {
        let s = make_suspension(&make_circle(8).unwrap(), 10, 2.0).unwrap();
        assert_eq!(s.len(), 80);
        assert!(s.diameter() <= PI + 1e-12);
        let big = make_circle(30).unwrap();
        assert!(make_suspension(&big, 5, 2.0).is_err());
    }
}
