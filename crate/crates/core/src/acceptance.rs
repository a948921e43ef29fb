//! The acceptance suite: ten end-to-end criteria, each with its tolerance
//! and time budget. Shared by the test target and the command-line harness.

use crate::density1d::{
    density_ratio_bounds, density_sandwich, log_derivative_bounds, random_cd_density, random_terms,
    Density1D,
};
use crate::error::Result;
use crate::intervals::{brute_force_min, quantitative_ratio, random_admissible_set};
use crate::localize::space::farthest_point;
use crate::localize::{
    antipodal_check, deficit_report, quantify, transport_relation, PipelineConfig,
};
use crate::profile::{
    antipodal_constant, concavity_gap, lambda_of, model_profile, profile_identity_check,
};
use crate::spaces::{make_cap_set, make_perturbed_cap, make_segment, make_sphere2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    /// Measured values behind the verdict.
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {:<34} {}  ({:.1} s of {:.0} s) {}",
            self.id,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.budget_seconds,
            self.detail
        )
    }
}

pub const CRITERIA: [(u8, &str, f64); 10] = [
    (1, "closed-form profile", 1.0),
    (2, "window profile identity", 10.0),
    (3, "concavity gap and scaling", 30.0),
    (4, "one-sided minimality", 120.0),
    (5, "quantitative 1D stability", 300.0),
    (6, "comparison bounds", 60.0),
    (7, "needle decomposition soundness", 300.0),
    (8, "main-theorem pipeline", 600.0),
    (9, "diameter deficit", 10.0),
    (10, "antipodal bound", 120.0),
];

const PROFILE_NS: [f64; 4] = [2.0, 2.5, 3.0, 7.0];
const PROFILE_DS: [f64; 4] = [2.0, 2.5, 3.0, PI];
const PROFILE_VS: [f64; 3] = [0.1, 0.3, 0.5];

/// Runs criterion `id` (1 to 10). Errors inside a criterion count as failure.
pub fn run(id: u8) -> Option<Outcome> {
    let &(_, title, budget) = CRITERIA.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let verdict = match id {
        1 => closed_form_profile(),
        2 => profile_identity(),
        3 => concavity(),
        4 => minimality(),
        5 => quantitative_1d(),
        6 => comparison_bounds(),
        7 => needle_soundness(),
        8 => main_pipeline(),
        9 => diameter_deficit(),
        _ => antipodal(),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (passed, detail) = verdict.unwrap_or_else(|e| (false, format!("error: {e}")));
    Some(Outcome {
        id,
        title: title.to_string(),
        passed: passed && seconds < budget,
        detail,
        seconds,
        budget_seconds: budget,
    })
}

pub fn run_all() -> Vec<Outcome> {
    CRITERIA.iter().filter_map(|c| run(c.0)).collect()
}

type Verdict = Result<(bool, String)>;

fn closed_form_profile() -> Verdict {
    let mut worst: f64 = 0.0;
    for k in 0..512 {
        let v = (k as f64 + 0.5) / 512.0;
        worst = worst.max((model_profile(2.0, PI, v)? - (v * (1.0 - v)).sqrt()).abs());
    }
    Ok((worst <= 1e-8, format!("max error {worst:.2e}")))
}

fn window_grid() -> Vec<(f64, f64, f64, f64)> {
    let mut grid = Vec::new();
    for n in PROFILE_NS {
        for d in PROFILE_DS {
            for xi in [0.0, (PI - d) / 2.0] {
                for v in PROFILE_VS {
                    grid.push((n, d, xi, v));
                }
            }
        }
    }
    grid
}

fn profile_identity() -> Verdict {
    let gaps: Vec<f64> = window_grid()
        .par_iter()
        .map(|&(n, d, xi, v)| profile_identity_check(n, d, xi, v).map(|c| c.gap))
        .collect::<Result<_>>()?;
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    Ok((
        worst <= 1e-7,
        format!("max gap {worst:.2e} over {} cases", gaps.len()),
    ))
}

/// Least-squares slope of `log(I_D(v) − I_π(v))` against `log(π − D)`.
pub fn deficit_slope(n: f64, v: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = (0..12)
        .map(|k| {
            let eps = 0.02 * (0.3f64 / 0.02).powf(k as f64 / 11.0);
            let gap = model_profile(n, PI - eps, v)? - model_profile(n, PI, v)?;
            Ok((eps.ln(), gap.ln()))
        })
        .collect::<Result<_>>()?;
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

fn concavity() -> Verdict {
    let grid = window_grid();
    let gaps: Vec<_> = grid
        .par_iter()
        .map(|&(n, d, xi, v)| concavity_gap(n, d, xi, v))
        .collect::<Result<_>>()?;
    let failures: Vec<String> = grid
        .iter()
        .zip(&gaps)
        .filter(|(_, g)| !g.holds(1e-7))
        .map(|((n, d, xi, v), g)| {
            format!(
                "N={n} D={d:.3} xi={xi:.3} v={v}: {:.4} < {:.4}",
                g.gap, g.bound
            )
        })
        .collect();
    let mut slopes = Vec::new();
    let mut slope_ok = true;
    for n in [2.0, 3.0] {
        for v in PROFILE_VS {
            let s = deficit_slope(n, v)?;
            slope_ok &= (s - n).abs() <= 0.15;
            slopes.push(format!("{s:.3}"));
        }
    }
    let detail = format!(
        "gap bound violated in {}/{} cases{}; slopes [{}]",
        failures.len(),
        grid.len(),
        failures
            .first()
            .map(|f| format!(" (first: {f})"))
            .unwrap_or_default(),
        slopes.join(", ")
    );
    Ok((failures.is_empty() && slope_ok, detail))
}

fn generator_densities(n: f64, count: usize, eps: f64, seed: u64) -> Result<Vec<Density1D>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_cd_density(&mut rng, n, eps))
        .collect()
}

fn minimality() -> Verdict {
    let mut hs = vec![Density1D::model(2.0)?, Density1D::model(3.0)?];
    hs.extend(generator_densities(2.0, 3, 0.1, 11)?);
    let mut worst_deficit = f64::INFINITY;
    let mut bad = Vec::new();
    for (k, h) in hs.iter().enumerate() {
        for v in [0.2, 0.5] {
            let r = brute_force_min(h, v, 3, 300)?;
            worst_deficit = worst_deficit.min(r.min_deficit);
            if !r.is_one_sided(h, v, 2.0, 300) || r.min_deficit < -1e-9 {
                bad.push(format!("density {k} v={v}: {}", r.best.to_text()));
            }
        }
    }
    Ok((
        bad.is_empty(),
        format!(
            "{} non-one-sided optima, min deficit {worst_deficit:.2e} {}",
            bad.len(),
            bad.join("; ")
        ),
    ))
}

/// Smallest finite stability ratio over `samples` random admissible sets.
pub fn stability_sweep(eps: f64, v: f64, samples: usize, seed: u64) -> Result<f64> {
    let h = Density1D::window(2.0, PI - eps, 0.0)?;
    let chunks = 64;
    let mins: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
            let mut low = f64::INFINITY;
            let mut done = 0;
            while done < samples / chunks {
                let Some(e) = random_admissible_set(&h, v, 300, &mut rng) else {
                    continue;
                };
                done += 1;
                if let Some(r) = quantitative_ratio(&h, &e)?.ratio.finite() {
                    low = low.min(r);
                }
            }
            Ok(low)
        })
        .collect::<Result<_>>()?;
    Ok(mins.into_iter().fold(f64::INFINITY, f64::min))
}

fn quantitative_1d() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for eps in [0.05, 0.1] {
        let low = stability_sweep(eps, 0.3, 100_000, 5)?;
        ok &= low >= 0.01;
        parts.push(format!("eps={eps}: min ratio {low:.4}"));
    }
    Ok((ok, parts.join(", ")))
}

fn comparison_bounds() -> Verdict {
    let mut violations = 0usize;
    let mut checks = 0usize;
    for n in [2.0, 3.0] {
        for h in generator_densities(n, 100, 0.1, 23)? {
            let d = h.domain();
            let lambda = lambda_of(n, d, 0.0)?;
            for i in 1..20 {
                let t = d * i as f64 / 20.0;
                let s = density_sandwich(&h, t, lambda)?;
                let l = log_derivative_bounds(&h, t)?;
                let ld = h.log_derivative(t);
                let scale = l.lower.abs().max(l.upper.abs()).max(1.0);
                violations += usize::from(!s.satisfied);
                violations +=
                    usize::from(ld < l.lower - 1e-9 * scale || ld > l.upper + 1e-9 * scale);
                checks += 2;
                for j in 1..(20 - i) {
                    let r = density_ratio_bounds(&h, t, d * j as f64 / 20.0)?;
                    violations += usize::from(!r.satisfied);
                    checks += 1;
                }
            }
        }
    }
    // Same draws at shrinking ε converge to the model density.
    let mut monotone = true;
    let mut sups = Vec::new();
    for seed in 0..5u64 {
        let mut prev = f64::INFINITY;
        for eps in [0.1, 0.05, 0.01] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = Density1D::sine_power(2.0, PI - eps, random_terms(&mut rng, eps))?;
            let m = Density1D::model(2.0)?;
            let sup = (0..=400)
                .map(|k| (PI - eps) * k as f64 / 400.0)
                .map(|t| (h.eval(t) - m.eval(t)).abs())
                .fold(0.0, f64::max);
            monotone &= sup < prev;
            prev = sup;
            sups.push(format!("{sup:.3}"));
        }
    }
    Ok((
        violations == 0 && monotone,
        format!(
            "{violations} violations in {checks} checks; sup|h-h_N| by seed [{}]",
            sups.join(" ")
        ),
    ))
}

fn needle_soundness() -> Verdict {
    let space = make_sphere2(1500)?;
    let cap = make_cap_set(&space, 0, 0.3)?;
    let config = PipelineConfig::default();
    let p = deficit_report(&space, &cap.mask, 2.0, &config)?;
    let dec = &p.decomposition;
    let r = &p.report;
    let transport: f64 = space.weights().iter().sum();
    let assigned = dec.total_quotient() / transport;
    let v = space.mass(&cap.mask);
    let worst_zero_mean = dec
        .rays
        .iter()
        .map(|q| (q.measure_of(&cap.mask) - v).abs())
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut residual: f64 = 0.0;
    for _ in 0..20 {
        let b: Vec<bool> = (0..space.len())
            .map(|_| rand::Rng::gen_bool(&mut rng, 0.5))
            .collect();
        residual = residual.max(dec.disintegration_residual(&space, &b));
    }
    let relation = transport_relation(&space, &p.potential, dec.tol_gamma);
    let cyclic = relation.cyclic_monotonicity(&space, 1000, 3, &mut rng);
    let ok = assigned >= 0.95
        && worst_zero_mean <= 0.02
        && residual <= 1e-9
        && r.potential_duality_gap <= 1e-7
        && cyclic <= 0.0
        && r.endpoint_check.holds;
    Ok((
        ok,
        format!(
            "assigned {:.4}, |m_q(E)-v| {worst_zero_mean:.1e}, residual {residual:.1e}, duality gap {:.1e}, cyclic excess {cyclic:.2e}, endpoint excess {:.2e}, {} rays",
            assigned, r.potential_duality_gap, r.endpoint_worst_excess, r.rays
        ),
    ))
}

/// `(blob volume, δ, asymmetry)` of the perturbed-cap family on a sphere.
pub fn blob_sweep(n: usize, v: f64, blobs: &[f64]) -> Result<Vec<(f64, f64, f64, bool)>> {
    let space = make_sphere2(n)?;
    let far = farthest_point(&space, 0);
    let config = PipelineConfig::default();
    blobs
        .iter()
        .map(|&b| {
            let e = make_perturbed_cap(&space, 0, v, b, far)?;
            let q = quantify(&space, &e.mask, 2.0, &config)?;
            let checks = q.details.pole_cluster.holds && q.details.short_mass.holds;
            Ok((b, q.delta, q.asymmetry, checks))
        })
        .collect()
}

fn main_pipeline() -> Verdict {
    let n = 1500;
    let mesh = make_sphere2(n)?.mesh();
    let rows = blob_sweep(n, 0.3, &[0.0, 0.01, 0.02, 0.04])?;
    let exact = rows[0];
    let sweep = &rows[1..];
    let eta = 2.0 / 7.0;
    let monotone = sweep.windows(2).all(|w| w[1].1 > w[0].1 && w[1].2 > w[0].2)
        && sweep.iter().all(|r| r.1 > 0.0);
    let c_fit = sweep
        .iter()
        .map(|r| r.2 / r.1.powf(eta))
        .fold(0.0, f64::max);
    let bounded = sweep
        .iter()
        .all(|r| r.2 <= c_fit * r.1.powf(eta) * (1.0 + 1e-12));
    let checks = rows.iter().all(|r| r.3);
    let ok = exact.2 <= 3.0 * mesh && monotone && bounded && checks;
    let pairs: Vec<String> = sweep
        .iter()
        .map(|r| format!("({:.4}, {:.4})", r.1, r.2))
        .collect();
    Ok((
        ok,
        format!(
            "exact cap asymmetry {:.4} (3 mesh = {:.3}), delta {:.4}; (delta, asymmetry) {}; C_fit {c_fit:.3}",
            exact.2,
            3.0 * mesh,
            exact.1,
            pairs.join(" ")
        ),
    ))
}

/// `(ε, δ, π − diam)` for one-sided sets on segments `[0, π − ε]`.
pub fn segment_sweep(epsilons: &[f64], v: f64, points: usize) -> Result<Vec<(f64, f64, f64)>> {
    let config = PipelineConfig::default();
    epsilons
        .iter()
        .map(|&eps| {
            let d = PI - eps;
            let space = make_segment(2.0, d, 0.0, points)?;
            let r = Density1D::window(2.0, d, 0.0)?.quantile(v);
            let mask: Vec<bool> = (0..space.len())
                .map(|i| space.coords().unwrap()[i][0] <= r)
                .collect();
            let q = quantify(&space, &mask, 2.0, &config)?;
            Ok((eps, q.delta, q.diam_deficit))
        })
        .collect()
}

fn diameter_deficit() -> Verdict {
    let rows = segment_sweep(&[0.05, 0.1, 0.2], 0.3, 600)?;
    let positive = rows.iter().all(|r| r.1 > 0.0);
    let ratios: Vec<f64> = rows.iter().map(|r| r.2 / r.1.sqrt()).collect();
    let c_fit = ratios.iter().copied().fold(0.0, f64::max);
    let bounded = rows
        .iter()
        .all(|r| r.2 <= c_fit * r.1.sqrt() * (1.0 + 1e-12));
    let text: Vec<String> = rows
        .iter()
        .map(|r| format!("eps={} delta={:.2e}", r.0, r.1))
        .collect();
    Ok((
        positive && bounded,
        format!("{}; C_fit {c_fit:.3}", text.join(", ")),
    ))
}

fn antipodal() -> Verdict {
    let space = make_sphere2(1500)?;
    let r = antipodal_check(&space, PI - 0.3, 2.0, 0.05)?;
    let bound = antipodal_constant(2.0)?;
    Ok((
        r.holds,
        format!(
            "worst ratio {:.3} against C_2 bound {bound:.3}",
            r.worst_ratio
        ),
    ))
}
