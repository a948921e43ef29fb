//! Finite metric measure spaces and their discrete perimeter.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Tolerance on the triangle inequality and symmetry.
pub const METRIC_TOL: f64 = 1e-9;
/// Spaces up to this size get an exhaustive triangle-inequality check;
/// larger ones are checked on random triples.
pub const FULL_TRIANGLE_CHECK: usize = 600;
const SAMPLED_TRIPLES: usize = 1_000_000;

/// How distances were produced; selects the perimeter surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    /// Geodesic distance on the unit 2-sphere.
    Sphere,
    /// Points on a line (first coordinate), Euclidean distance.
    Line,
    /// Anything else, given by an explicit matrix.
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSpace {
    ids: Vec<String>,
    coords: Option<Vec<[f64; 3]>>,
    dist: Vec<f64>,
    weights: Vec<f64>,
    geometry: Geometry,
}

impl DiscreteSpace {
    /// Validates and builds a space; weights are renormalized to sum to one.
    pub fn new(
        ids: Vec<String>,
        coords: Option<Vec<[f64; 3]>>,
        dist: Vec<f64>,
        weights: Vec<f64>,
        geometry: Geometry,
    ) -> Result<Self> {
        let n = weights.len();
        if n < 2 {
            return Err(Error::InvalidSpace(format!(
                "need at least 2 points, got {n}"
            )));
        }
        if ids.len() != n || dist.len() != n * n || coords.as_ref().is_some_and(|c| c.len() != n) {
            return Err(Error::InvalidSpace("inconsistent sizes".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidSpace(format!(
                "weight of point {} must be positive",
                ids[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        let space = DiscreteSpace {
            ids,
            coords,
            dist,
            weights,
            geometry,
        };
        space.check_metric()?;
        Ok(space)
    }

    /// Builds a space with distances `metric(i, j)` on the given points.
    pub fn from_metric<F: Fn(usize, usize) -> f64>(
        coords: Option<Vec<[f64; 3]>>,
        weights: Vec<f64>,
        geometry: Geometry,
        metric: F,
    ) -> Result<Self> {
        let n = weights.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let d = metric(i, j);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        let ids = (0..n).map(|i| i.to_string()).collect();
        Self::new(ids, coords, dist, weights, geometry)
    }

    fn check_metric(&self) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            if self.d(i, i) != 0.0 {
                return Err(Error::InvalidSpace(format!(
                    "nonzero diagonal at {}",
                    self.ids[i]
                )));
            }
            for j in 0..i {
                let (a, b) = (self.d(i, j), self.d(j, i));
                if !(a >= 0.0 && a.is_finite()) || (a - b).abs() > METRIC_TOL {
                    return Err(Error::InvalidSpace(format!(
                        "bad distance between {} and {}",
                        self.ids[i], self.ids[j]
                    )));
                }
            }
        }
        let violated =
            |i: usize, j: usize, k: usize| self.d(i, k) > self.d(i, j) + self.d(j, k) + METRIC_TOL;
        let report = |i: usize, j: usize, k: usize| {
            Err(Error::InvalidSpace(format!(
                "triangle inequality fails for ({}, {}, {})",
                self.ids[i], self.ids[j], self.ids[k]
            )))
        };
        if n <= FULL_TRIANGLE_CHECK {
            for i in 0..n {
                for j in 0..n {
                    let dij = self.d(i, j);
                    let row_j = &self.dist[j * n..(j + 1) * n];
                    let row_i = &self.dist[i * n..(i + 1) * n];
                    if let Some(k) = (0..n).find(|&k| row_i[k] > dij + row_j[k] + METRIC_TOL) {
                        return report(i, j, k);
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            for _ in 0..SAMPLED_TRIPLES {
                let (i, j, k) = (
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                );
                if violated(i, j, k) {
                    return report(i, j, k);
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.weights.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.dist[i * n..(i + 1) * n]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn coords(&self) -> Option<&[[f64; 3]]> {
        self.coords.as_deref()
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Largest nearest-neighbour distance.
    pub fn mesh(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, d)| *d)
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    /// Mass of the points marked in `mask`.
    pub fn mass(&self, mask: &[bool]) -> f64 {
        self.weights
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(w, _)| w)
            .sum()
    }

    /// Closed ball `{d(center, ·) ≤ r}` as a mask.
    pub fn ball(&self, center: usize, r: f64) -> Vec<bool> {
        self.row(center).iter().map(|d| *d <= r).collect()
    }

    /// Mass of the symmetric difference of two masks.
    pub fn sym_diff_mass(&self, a: &[bool], b: &[bool]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .filter(|(_, (x, y))| x != y)
            .map(|(w, _)| w)
            .sum()
    }

    /// Rescales all weights by `factor` (renormalized afterwards, so the space is unchanged
    /// up to rounding).
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        let w = self.weights.iter().map(|w| w * factor).collect();
        Self::new(
            self.ids.clone(),
            self.coords.clone(),
            self.dist.clone(),
            w,
            self.geometry,
        )
    }

    /// Serializes in the point-list text format. Sphere spaces with
    /// coordinates use the `metric sphere-geodesic` shorthand.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.len());
        for i in 0..self.len() {
            match &self.coords {
                Some(c) => {
                    let [x, y, z] = c[i];
                    let _ = writeln!(out, "{} {x} {y} {z} {}", self.ids[i], self.weights[i]);
                }
                None => {
                    let _ = writeln!(out, "{} {}", self.ids[i], self.weights[i]);
                }
            }
        }
        match (self.geometry, &self.coords) {
            (Geometry::Sphere, Some(_)) => out.push_str("metric sphere-geodesic\n"),
            (Geometry::Line, Some(_)) => out.push_str("metric euclidean\n"),
            _ => {
                for i in 1..self.len() {
                    let row: Vec<String> = (0..i).map(|j| self.d(i, j).to_string()).collect();
                    let _ = writeln!(out, "{}", row.join(" "));
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let err = |line: usize, msg: String| Error::Parse { line, msg };
        let (ln, first) = lines.next().ok_or_else(|| err(1, "empty input".into()))?;
        let n: usize = first
            .parse()
            .map_err(|_| err(ln, format!("expected point count, got `{first}`")))?;
        let mut ids = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut coords = Vec::with_capacity(n);
        let mut have_coords = None;
        for _ in 0..n {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| err(ln, "missing point lines".into()))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| err(ln, format!("bad number `{s}`")))
            };
            let with = match f.len() {
                2 => false,
                5 => true,
                k => {
                    return Err(err(
                        ln,
                        format!("point line needs `id w` or `id x y z w`, got {k} fields"),
                    ))
                }
            };
            if *have_coords.get_or_insert(with) != with {
                return Err(err(
                    ln,
                    "points mix lines with and without coordinates".into(),
                ));
            }
            ids.push(f[0].to_string());
            if with {
                coords.push([num(f[1])?, num(f[2])?, num(f[3])?]);
            }
            weights.push(num(f[f.len() - 1])?);
        }
        let coords = if have_coords == Some(true) {
            Some(coords)
        } else {
            None
        };
        let rest: Vec<(usize, &str)> = lines.collect();
        match rest.first() {
            Some((ln, l)) if l.starts_with("metric") => {
                let kind = l["metric".len()..].trim();
                let c = coords
                    .clone()
                    .ok_or_else(|| err(*ln, format!("`metric {kind}` requires coordinates")))?;
                let (geometry, metric): (Geometry, Box<dyn Fn(usize, usize) -> f64>) = match kind {
                    "sphere-geodesic" => {
                        let unit: Vec<[f64; 3]> = c.iter().map(|p| normalize(*p)).collect();
                        (
                            Geometry::Sphere,
                            Box::new(move |i, j| sphere_distance(unit[i], unit[j])),
                        )
                    }
                    "euclidean" => {
                        let line = c.iter().all(|p| p[1] == 0.0 && p[2] == 0.0);
                        let g = if line {
                            Geometry::Line
                        } else {
                            Geometry::General
                        };
                        let c2 = c.clone();
                        (g, Box::new(move |i, j| euclid(c2[i], c2[j])))
                    }
                    other => return Err(err(*ln, format!("unknown metric `{other}`"))),
                };
                let mut dist = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..i {
                        let d = metric(i, j);
                        dist[i * n + j] = d;
                        dist[j * n + i] = d;
                    }
                }
                Self::new(ids, coords, dist, weights, geometry)
            }
            _ => {
                // Lower-triangular block, with or without the zero diagonal.
                let with_diag = rest
                    .first()
                    .is_some_and(|(_, l)| l.split_whitespace().count() == 1)
                    && rest.len() == n;
                let expected_rows = if with_diag { n } else { n - 1 };
                if rest.len() != expected_rows {
                    let line = rest.last().map_or(0, |r| r.0);
                    return Err(err(
                        line,
                        format!("expected {expected_rows} distance rows, got {}", rest.len()),
                    ));
                }
                let mut dist = vec![0.0; n * n];
                for (r, (ln, line)) in rest.iter().enumerate() {
                    let i = if with_diag { r } else { r + 1 };
                    let vals: Vec<f64> = line
                        .split_whitespace()
                        .map(|s| {
                            s.parse::<f64>()
                                .map_err(|_| err(*ln, format!("bad distance `{s}`")))
                        })
                        .collect::<Result<_>>()?;
                    let want = if with_diag { i + 1 } else { i };
                    if vals.len() != want {
                        return Err(err(
                            *ln,
                            format!("row {i} needs {want} entries, got {}", vals.len()),
                        ));
                    }
                    for (j, d) in vals.into_iter().enumerate().take(i) {
                        dist[i * n + j] = d;
                        dist[j * n + i] = d;
                    }
                }
                Self::new(ids, coords, dist, weights, Geometry::General)
            }
        }
    }
}

pub(crate) fn normalize(p: [f64; 3]) -> [f64; 3] {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / r, p[1] / r, p[2] / r]
}

/// Great-circle distance between unit vectors, via `atan2` for accuracy near 0 and π.
pub(crate) fn sphere_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cx = a[1] * b[2] - a[2] * b[1];
    let cy = a[2] * b[0] - a[0] * b[2];
    let cz = a[0] * b[1] - a[1] * b[0];
    (cx * cx + cy * cy + cz * cz).sqrt().atan2(dot)
}

fn euclid(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Discrete perimeter surrogate bound to a space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PerimeterModel {
    /// Sum over adjacent pairs across the boundary of the local density
    /// `(w_a + w_b) / (2 |x_a − x_b|)`; for points on a line.
    Chain,
    /// `scale · Σ w(x) w(y) (1 − d(x,y)/radius)` over pairs `x ∈ E`, `y ∉ E`
    /// with `d(x,y) ≤ radius`.
    Kernel { radius: f64, scale: f64 },
}

/// Kernel radius in units of the mesh.
pub const KERNEL_RADIUS_MESH: f64 = 4.0;
/// Number of reference half-volume caps used for calibration.
const CALIBRATION_CAPS: usize = 16;

/// Greedy cap: points sorted by distance from `center` (ties by index) are
/// added until the mass reaches `v`.
pub fn greedy_cap(space: &DiscreteSpace, center: usize, v: f64) -> (Vec<bool>, f64, f64) {
    let row = space.row(center);
    let mut order: Vec<usize> = (0..space.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
    let mut mask = vec![false; space.len()];
    let (mut mass, mut radius) = (0.0, 0.0);
    for i in order {
        if mass >= v {
            break;
        }
        mask[i] = true;
        mass += space.weight(i);
        radius = row[i];
    }
    (mask, mass, radius)
}

impl PerimeterModel {
    /// The chain model on lines; otherwise a unit kernel whose scale makes
    /// half-volume caps about a few reference centers have, on average,
    /// perimeter `profile(mass)`.
    pub fn calibrate(space: &DiscreteSpace, profile: impl Fn(f64) -> f64) -> Self {
        if space.geometry() == Geometry::Line {
            return PerimeterModel::Chain;
        }
        let radius = KERNEL_RADIUS_MESH * space.mesh();
        let raw = PerimeterModel::Kernel { radius, scale: 1.0 };
        let n = space.len();
        let caps = CALIBRATION_CAPS.min(n);
        let mean: f64 = (0..caps)
            .map(|c| {
                let (mask, mass, _) = greedy_cap(space, c * n / caps, 0.5);
                raw.perimeter(space, &mask, None) / profile(mass.min(1.0))
            })
            .sum::<f64>()
            / caps as f64;
        PerimeterModel::Kernel {
            radius,
            scale: 1.0 / mean,
        }
    }

    /// Perimeter of `mask`, relative to the point set `within` when given
    /// (pairs with both points inside, or adjacent chain pairs inside).
    pub fn perimeter(&self, space: &DiscreteSpace, mask: &[bool], within: Option<&[bool]>) -> f64 {
        let inside = |i: usize| within.is_none_or(|w| w[i]);
        match *self {
            PerimeterModel::Chain => {
                let c = space.coords().expect("chain perimeter needs coordinates");
                let mut order: Vec<usize> = (0..space.len()).collect();
                order.sort_by(|&a, &b| c[a][0].total_cmp(&c[b][0]));
                order
                    .windows(2)
                    .filter(|p| mask[p[0]] != mask[p[1]] && inside(p[0]) && inside(p[1]))
                    .map(|p| {
                        let gap = (c[p[1]][0] - c[p[0]][0]).abs();
                        (space.weight(p[0]) + space.weight(p[1])) / (2.0 * gap)
                    })
                    .sum()
            }
            PerimeterModel::Kernel { radius, scale } => {
                let mut total = 0.0;
                for x in (0..space.len()).filter(|&x| mask[x] && inside(x)) {
                    let row = space.row(x);
                    let s: f64 = (0..space.len())
                        .filter(|&y| !mask[y] && row[y] <= radius && inside(y))
                        .map(|y| space.weight(y) * (1.0 - row[y] / radius))
                        .sum();
                    total += space.weight(x) * s;
                }
                scale * total
            }
        }
    }
}

/// The point farthest from `i` (lowest index on ties).
pub fn farthest_point(space: &DiscreteSpace, i: usize) -> usize {
    let row = space.row(i);
    (0..space.len())
        .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
        .unwrap_or(i)
}

/// `π − diam(X)`.
pub fn diameter_deficit(space: &DiscreteSpace) -> f64 {
    PI - space.diameter()
}
