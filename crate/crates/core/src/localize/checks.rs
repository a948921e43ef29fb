//! Antipodal triples, the Markov-type counting bound, and ball localization.

use super::rays::extract_rays;
use super::report::PipelineConfig;
use super::space::{DiscreteSpace, PerimeterModel};
use super::transport::kantorovich_potential;
use crate::density1d::model_density;
use crate::error::{Error, Result};
use crate::profile::antipodal_constant;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntipodalReport {
    /// `max d(y,z) / (π − D)` over triples with `d(x,y), d(x,z) ≥ D`.
    pub worst_ratio: f64,
    pub c_n_bound: f64,
    pub worst_triple: (usize, usize, usize),
    pub anchors: usize,
    pub holds: bool,
}

/// Sweeps all triples `(x, y, z)` with `y, z` at distance at least
/// `d_threshold` from `x`. `slack` is added to the bound before comparing.
pub fn antipodal_check(
    space: &DiscreteSpace,
    d_threshold: f64,
    n: f64,
    slack: f64,
) -> Result<AntipodalReport> {
    if !(d_threshold > 0.0 && d_threshold <= PI) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in (0, π], got {d_threshold}"
        )));
    }
    let per_anchor: Vec<Option<(f64, usize, usize, usize)>> = (0..space.len())
        .into_par_iter()
        .map(|x| {
            let far: Vec<usize> = (0..space.len())
                .filter(|&y| space.d(x, y) >= d_threshold)
                .collect();
            if far.is_empty() {
                return None;
            }
            let mut best = (0.0, x, far[0], far[0]);
            for (a, &y) in far.iter().enumerate() {
                for &z in &far[a + 1..] {
                    let d = space.d(y, z);
                    if d > best.0 {
                        best = (d, x, y, z);
                    }
                }
            }
            Some(best)
        })
        .collect();
    let anchors = per_anchor.iter().flatten().count();
    let worst = per_anchor
        .into_iter()
        .flatten()
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .ok_or(Error::NoTriples(d_threshold))?;
    let gap = PI - d_threshold;
    let worst_ratio = if gap > 0.0 {
        worst.0 / gap
    } else if worst.0 == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let c_n_bound = antipodal_constant(n)?;
    Ok(AntipodalReport {
        worst_ratio,
        c_n_bound,
        worst_triple: (worst.1, worst.2, worst.3),
        anchors,
        holds: worst_ratio <= c_n_bound + slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    /// Mass of `{values ≥ a}`.
    pub measured: f64,
    /// `(c − aK) / (1 − a)`.
    pub bound: f64,
    pub holds: bool,
}

/// For `f: X → [0,1]` with `c = Σ f w` and `K = Σ w`, `𝔪{f ≥ a} ≥ (c − aK)/(1 − a)`.
pub fn markov_bound(values: &[f64], weights: &[f64], a: f64) -> Result<MarkovReport> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in [0, 1), got {a}"
        )));
    }
    if values.len() != weights.len() {
        return Err(Error::InvalidParameter(
            "values and weights differ in length".into(),
        ));
    }
    if let Some(x) = values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidParameter(format!(
            "values must lie in [0, 1], got {x}"
        )));
    }
    let c: f64 = values.iter().zip(weights).map(|(f, w)| f * w).sum();
    let k: f64 = weights.iter().sum();
    let measured: f64 = values
        .iter()
        .zip(weights)
        .filter(|(f, _)| **f >= a)
        .map(|(_, w)| w)
        .sum();
    let bound = (c - a * k) / (1.0 - a);
    Ok(MarkovReport {
        measured,
        bound,
        holds: measured >= bound - 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallReport {
    /// `Σ_q q_q I_π(𝔪_q(E))` over rays truncated to `B_{3r}`.
    pub perimeter_lower: f64,
    /// Discrete relative perimeter `P(E, B_{3r})`.
    pub measured_perimeter: f64,
    /// `q`-mass of rays with `𝔪_q(E ∩ B_r) ≥ 𝔪(E ∩ B_r)/2`.
    pub q1bar_mass: f64,
    pub e_ball_mass: f64,
    pub ball_mass: f64,
    pub markov: MarkovReport,
    pub rays: usize,
}

/// Localizes `χ_{E∩B_r}/𝔪(E∩B_r) − χ_{B_r∖E}/𝔪(B_r∖E)` and keeps each ray's
/// part inside `B_{3r}(center)`.
pub fn ball_localization(
    space: &DiscreteSpace,
    e_mask: &[bool],
    center: usize,
    r: f64,
    n: f64,
    config: &PipelineConfig,
) -> Result<BallReport> {
    let ball = space.ball(center, r);
    let a: f64 = (0..space.len())
        .filter(|&i| ball[i] && e_mask[i])
        .map(|i| space.weight(i))
        .sum();
    let b: f64 = (0..space.len())
        .filter(|&i| ball[i] && !e_mask[i])
        .map(|i| space.weight(i))
        .sum();
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::DegenerateBall(format!(
            "𝔪(E ∩ B_r) = {a}, 𝔪(B_r ∖ E) = {b}"
        )));
    }
    let f: Vec<f64> = (0..space.len())
        .map(|i| match (ball[i], e_mask[i]) {
            (false, _) => 0.0,
            (true, true) => 1.0 / a,
            (true, false) => -1.0 / b,
        })
        .collect();
    let pot = kantorovich_potential(space, &f)?;
    let mesh = space.mesh();
    let mut dec = extract_rays(space, &pot, &f, e_mask, config.tol_gamma_mesh * mesh)?;
    let big = space.ball(center, 3.0 * r);
    for ray in &mut dec.rays {
        let keep: Vec<usize> = (0..ray.chain.len())
            .filter(|&k| big[ray.chain[k]])
            .collect();
        ray.chain = keep.iter().map(|&k| ray.chain[k]).collect();
        ray.masses = keep.iter().map(|&k| ray.masses[k]).collect();
        ray.in_e = keep.iter().map(|&k| ray.in_e[k]).collect();
        ray.positions = keep.iter().map(|&k| ray.positions[k]).collect();
        ray.weight = ray.masses.iter().sum();
    }
    dec.rays.retain(|r| r.weight > 0.0);
    let model = model_density(n)?;
    let in_eb: Vec<bool> = (0..space.len()).map(|i| ball[i] && e_mask[i]).collect();
    let fractions: Vec<f64> = dec.rays.iter().map(|r| r.measure_of(&in_eb)).collect();
    let perimeter_lower: f64 = dec
        .rays
        .iter()
        .zip(&fractions)
        .map(|(r, fr)| r.weight * model.profile(*fr))
        .sum();
    let total: f64 = dec.rays.iter().map(|r| r.weight).sum();
    let probs: Vec<f64> = dec.rays.iter().map(|r| r.weight / total).collect();
    let markov = markov_bound(&fractions, &probs, a / 2.0)?;
    let q1bar_mass = dec
        .rays
        .iter()
        .zip(&fractions)
        .filter(|(_, fr)| **fr >= a / 2.0)
        .map(|(r, _)| r.weight)
        .sum();
    let perim = PerimeterModel::calibrate(space, |v| model.profile(v));
    Ok(BallReport {
        perimeter_lower,
        measured_perimeter: perim.perimeter(space, e_mask, Some(&big)),
        q1bar_mass,
        e_ball_mass: a,
        ball_mass: a + b,
        markov,
        rays: dec.rays.len(),
    })
}
