//! Transport relation, ray extraction from the optimal plan, and per-ray densities.

use super::space::DiscreteSpace;
use super::transport::Potential;
use crate::density1d::{is_cd_density, CurvatureParams, Density1D};
use crate::error::{Error, Result};
use crate::intervals::IntervalSet;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Ordered pairs `(x, y)` with `φ(x) − φ(y) ≥ d(x, y) − tol_gamma`, `x ≠ y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportRelation {
    pub pairs: Vec<(u32, u32)>,
    pub tol_gamma: f64,
}

pub fn transport_relation(
    space: &DiscreteSpace,
    pot: &Potential,
    tol_gamma: f64,
) -> TransportRelation {
    let n = space.len();
    let phi = &pot.phi;
    let mut pairs = Vec::new();
    for x in 0..n {
        let row = space.row(x);
        for y in 0..n {
            if x != y && phi[x] - phi[y] >= row[y] - tol_gamma {
                pairs.push((x as u32, y as u32));
            }
        }
    }
    TransportRelation { pairs, tol_gamma }
}

impl TransportRelation {
    /// Worst excess of `Σ d(xᵢ,yᵢ) − Σ d(xᵢ,y_{i+1})` over random cycles of
    /// `len` pairs drawn from the relation, against the allowance `len·tol_gamma`.
    pub fn cyclic_monotonicity<R: Rng + ?Sized>(
        &self,
        space: &DiscreteSpace,
        samples: usize,
        len: usize,
        rng: &mut R,
    ) -> f64 {
        if self.pairs.is_empty() || len == 0 {
            return f64::NEG_INFINITY;
        }
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            let cyc: Vec<(usize, usize)> = (0..len)
                .map(|_| {
                    let (a, b) = self.pairs[rng.gen_range(0..self.pairs.len())];
                    (a as usize, b as usize)
                })
                .collect();
            let direct: f64 = cyc.iter().map(|&(x, y)| space.d(x, y)).sum();
            let shifted: f64 = (0..len)
                .map(|i| space.d(cyc[i].0, cyc[(i + 1) % len].1))
                .sum();
            worst = worst.max(direct - shifted - len as f64 * self.tol_gamma);
        }
        worst
    }
}

/// One needle: an ordered chain of points with the mass it carries from each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    /// Point ids by decreasing `φ`.
    pub chain: Vec<usize>,
    /// Arc-length position of each chain point in `[0, D_q]`.
    pub positions: Vec<f64>,
    /// Mass apportioned to this ray from each chain point; zero where no
    /// flow on the ray passes.
    pub masses: Vec<f64>,
    pub in_e: Vec<bool>,
    pub d_q: f64,
    pub south: usize,
    pub north: usize,
    /// `Σ masses`.
    pub weight: f64,
}

impl Ray {
    /// `𝔪_q(B)` for the normalized ray measure.
    pub fn measure_of(&self, mask: &[bool]) -> f64 {
        self.chain
            .iter()
            .zip(&self.masses)
            .filter(|(p, _)| mask[**p])
            .map(|(_, m)| m)
            .sum::<f64>()
            / self.weight
    }

    pub fn e_fraction(&self) -> f64 {
        self.in_e
            .iter()
            .zip(&self.masses)
            .filter(|(e, _)| **e)
            .map(|(_, m)| m)
            .sum::<f64>()
            / self.weight
    }

    /// `E_q` as intervals of `[0, D_q]`, cutting halfway between consecutive
    /// chain points of different membership.
    pub fn e_intervals(&self) -> Result<IntervalSet> {
        let d = self.d_q.min(PI);
        let mut raw = Vec::new();
        let mut start: Option<f64> = None;
        let k = self.chain.len();
        for i in 0..k {
            let left = if i == 0 {
                0.0
            } else {
                0.5 * (self.positions[i - 1] + self.positions[i])
            };
            match (self.in_e[i], start) {
                (true, None) => start = Some(left),
                (false, Some(a)) => {
                    raw.push((a, left));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(a) = start {
            raw.push((a, d));
        }
        IntervalSet::new(d, raw.into_iter().map(|(a, b)| (a.min(d), b.min(d))))
    }
}

/// Rays of the optimal plan plus the mass they do not cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedleDecomposition {
    pub rays: Vec<Ray>,
    /// Per-ray `q`-mass (equal to `Ray::weight`).
    pub quotient_weights: Vec<f64>,
    /// Points with `f = 0`, outside the transport set.
    pub zero_set: Vec<usize>,
    /// Mass of plan arcs that formed no admissible ray.
    pub leftover_mass: f64,
    /// Per-point share of `leftover_mass`.
    pub uncovered: Vec<f64>,
    /// Mass of points shared between more than one ray.
    pub shared_mass: f64,
    pub e_mask: Vec<bool>,
    pub tol_gamma: f64,
    pub mesh: f64,
}

/// Least number of chain points of an admissible ray.
pub const MIN_RAY_POINTS: usize = 4;
/// Least ray length in mesh units.
pub const MIN_RAY_MESH: f64 = 1.0;
/// Largest tolerated uncovered share of the transport-set mass.
pub const MAX_LEFTOVER: f64 = 0.05;

impl NeedleDecomposition {
    pub fn total_quotient(&self) -> f64 {
        self.quotient_weights.iter().sum()
    }

    /// `|Σ_q q_q 𝔪_q(B) − 𝔪(B ∩ T)|` where `T` is the transport set
    /// (`f ≠ 0`) less the mass on arcs that formed no ray.
    pub fn disintegration_residual(&self, space: &DiscreteSpace, b: &[bool]) -> f64 {
        let lhs: f64 = self.rays.iter().map(|r| r.weight * r.measure_of(b)).sum();
        let rhs: f64 = (0..space.len())
            .filter(|&i| b[i] && !self.zero_set.contains(&i))
            .map(|i| space.weight(i) - self.uncovered[i])
            .sum();
        (lhs - rhs).abs()
    }
}

/// Covers the optimal plan by maximal Γ-chains.
///
/// Uncovered plan arcs, longest first, seed a chain holding both endpoints;
/// every point Γ-comparable (within `tol_gamma`) with the seed is then tried
/// in order of how far it sits off the seed line, and kept if comparable with
/// all members so far. A point may lie on several chains. Each arc's flow is
/// split equally among the admissible chains containing both its endpoints,
/// and a point's mass on a chain is the flow it carries there over `|f|`.
/// This keeps every chain at zero `f`-mean.
pub fn extract_rays(
    space: &DiscreteSpace,
    pot: &Potential,
    f: &[f64],
    e_mask: &[bool],
    tol_gamma: f64,
) -> Result<NeedleDecomposition> {
    let n = space.len();
    let phi = &pot.phi;
    let mesh = space.mesh();
    let mut arcs: Vec<(usize, usize, f64)> = pot
        .flows
        .iter()
        .map(|fl| (fl.from, fl.to, fl.amount))
        .collect();
    arcs.sort_by(|a, b| {
        space
            .d(b.0, b.1)
            .total_cmp(&space.d(a.0, a.1))
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let excess = |a: usize, b: usize| space.d(a, b) - (phi[a] - phi[b]).abs();

    let mut chains: Vec<Vec<bool>> = Vec::new();
    for &(a, b, _) in &arcs {
        if chains.iter().any(|c| c[a] && c[b]) {
            continue;
        }
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&z| z != a && z != b)
            .map(|z| (excess(a, z).max(excess(b, z)), z))
            .filter(|&(e, _)| e <= tol_gamma)
            .collect();
        cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut members = vec![a, b];
        for (_, z) in cand {
            if members.iter().all(|&m| excess(m, z) <= tol_gamma) {
                members.push(z);
            }
        }
        let mut mask = vec![false; n];
        members.iter().for_each(|&m| mask[m] = true);
        chains.push(mask);
    }

    // Drop chains too small to be rays and share their arcs among the
    // survivors until nothing changes.
    let mut alive = vec![true; chains.len()];
    let mut through: Vec<Vec<f64>>;
    loop {
        through = vec![vec![0.0; n]; chains.len()];
        for &(a, b, amt) in &arcs {
            let holders: Vec<usize> = (0..chains.len())
                .filter(|&c| alive[c] && chains[c][a] && chains[c][b])
                .collect();
            let share = amt / holders.len().max(1) as f64;
            for c in holders {
                through[c][a] += share;
                through[c][b] += share;
            }
        }
        let mut changed = false;
        for c in 0..chains.len() {
            if !alive[c] {
                continue;
            }
            let carrying = through[c].iter().any(|t| *t > 0.0);
            let pts: Vec<usize> = (0..n).filter(|&p| chains[c][p]).collect();
            let hi = pts
                .iter()
                .copied()
                .max_by(|&x, &y| phi[x].total_cmp(&phi[y]));
            let lo = pts
                .iter()
                .copied()
                .min_by(|&x, &y| phi[x].total_cmp(&phi[y]));
            let long =
                matches!((hi, lo), (Some(s), Some(t)) if space.d(s, t) >= MIN_RAY_MESH * mesh);
            if !carrying || pts.len() < MIN_RAY_POINTS || !long {
                alive[c] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut rays = Vec::new();
    let mut owners = vec![0usize; n];
    let mut carried = vec![0.0; n];
    for c in (0..chains.len()).filter(|&c| alive[c]) {
        let mut pts: Vec<(usize, f64)> = (0..n)
            .filter(|&p| chains[c][p])
            .map(|p| {
                (
                    p,
                    if through[c][p] > 0.0 {
                        through[c][p] / f[p].abs()
                    } else {
                        0.0
                    },
                )
            })
            .collect();
        pts.sort_by(|x, y| phi[y.0].total_cmp(&phi[x.0]).then(x.0.cmp(&y.0)));
        for &(p, m) in pts.iter().filter(|p| p.1 > 0.0) {
            owners[p] += 1;
            carried[p] += m;
        }
        let south = pts[0].0;
        let north = pts[pts.len() - 1].0;
        let d_q = space.d(south, north);
        let drop = phi[south] - phi[north];
        rays.push(Ray {
            chain: pts.iter().map(|p| p.0).collect(),
            positions: pts
                .iter()
                .map(|(p, _)| {
                    if drop > 0.0 {
                        (phi[south] - phi[*p]) / drop * d_q
                    } else {
                        0.0
                    }
                })
                .collect(),
            masses: pts.iter().map(|p| p.1).collect(),
            in_e: pts.iter().map(|p| e_mask[p.0]).collect(),
            d_q,
            south,
            north,
            weight: pts.iter().map(|p| p.1).sum(),
        });
    }
    let uncovered: Vec<f64> = (0..n)
        .map(|i| {
            if f[i] == 0.0 {
                0.0
            } else {
                (space.weight(i) - carried[i]).max(0.0)
            }
        })
        .collect();
    let leftover_mass: f64 = uncovered.iter().sum();
    let transport_mass: f64 = (0..n)
        .filter(|&i| f[i] != 0.0)
        .map(|i| space.weight(i))
        .sum();
    if leftover_mass > MAX_LEFTOVER * transport_mass {
        return Err(Error::NonConvergence(format!(
            "{:.3}% of the transport-set mass lies on no admissible ray",
            100.0 * leftover_mass / transport_mass
        )));
    }
    let shared_mass = (0..n)
        .filter(|&i| owners[i] > 1)
        .map(|i| space.weight(i))
        .sum();
    Ok(NeedleDecomposition {
        quotient_weights: rays.iter().map(|r| r.weight).collect(),
        rays,
        zero_set: (0..n).filter(|&i| f[i] == 0.0).collect(),
        leftover_mass,
        uncovered,
        shared_mass,
        e_mask: e_mask.to_vec(),
        tol_gamma,
        mesh,
    })
}

/// Largest bin count of the fitted histogram.
const MAX_BINS: usize = 200;
const EDGE_BARYCENTER: f64 = 13.0 / 24.0;

/// Linearly binned histogram density along the ray (bins of at least two mesh cells and
/// about three chain points), linearly extended to the endpoints and
/// renormalized to mass one; `cd_ok` runs the CD test with tolerance `tol`.
pub fn fit_ray_density(ray: &Ray, n: f64, mesh: f64, tol: f64) -> Result<(Density1D, bool)> {
    if ray.chain.len() < MIN_RAY_POINTS {
        return Err(Error::DegenerateRay(format!("{} points", ray.chain.len())));
    }
    if ray.d_q < MIN_RAY_MESH * mesh {
        return Err(Error::DegenerateRay(format!(
            "length {} below {MIN_RAY_MESH} mesh cells",
            ray.d_q
        )));
    }
    let d = ray.d_q.min(PI);
    let by_mesh = (d / (2.0 * mesh)).floor() as usize;
    let by_count = ray.chain.len() / 3;
    let bins = by_mesh.min(by_count).clamp(MIN_RAY_POINTS, MAX_BINS);
    let width = d / bins as f64;
    let mut mass = vec![0.0; bins];
    // Linear binning between neighboring centers avoids grid aliasing.
    for (t, m) in ray.positions.iter().zip(&ray.masses) {
        let u = (t.min(d) / width - 0.5).clamp(0.0, (bins - 1) as f64);
        let b = (u as usize).min(bins - 2);
        let frac = u - b as f64;
        mass[b] += m * (1.0 - frac);
        mass[b + 1] += m * frac;
    }
    let mut ts = vec![0.0];
    let mut hs = vec![0.0];
    // An endpoint stands for a cell reaching half a spacing past the end.
    let pos = &ray.positions;
    let overhang = |gap: f64| 0.5 * gap.clamp(0.0, width);
    let first = overhang(pos.iter().copied().find(|p| *p > 0.0).unwrap_or(0.0));
    let last = overhang(d - pos.iter().copied().filter(|p| *p < d).fold(0.0, f64::max));
    for (b, m) in mass.iter().enumerate() {
        let extra = if b == 0 {
            first
        } else if b == bins - 1 {
            last
        } else {
            0.0
        };
        ts.push((b as f64 + 0.5) * width);
        hs.push(m / ((width + extra) * ray.weight));
    }
    ts.push(d);
    hs.push(0.0);
    // Edge bins also collect everything beyond their center, so their
    // estimate belongs at the kernel barycenter.
    let k = hs.len();
    ts[1] = EDGE_BARYCENTER * width;
    ts[k - 2] = d - EDGE_BARYCENTER * width;
    let extrapolate =
        |h1: f64, h2: f64, x1: f64, x2: f64| (h1 - (h2 - h1) * x1 / (x2 - x1)).max(0.0);
    hs[0] = extrapolate(hs[1], hs[2], ts[1], ts[2]);
    hs[k - 1] = extrapolate(hs[k - 2], hs[k - 3], d - ts[k - 2], d - ts[k - 3]);
    // Endpoint values already within tolerance of zero are treated as zero.
    for i in [0, k - 1] {
        if hs[i].powf(1.0 / (n - 1.0)) <= tol {
            hs[i] = 0.0;
        }
    }
    let h = Density1D::from_samples(n, ts, hs)?;
    let cd = is_cd_density(&h, &CurvatureParams::model(n)?, tol)?;
    Ok((h, cd.ok))
}
