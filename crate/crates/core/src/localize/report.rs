//! Ray classification and the quantitative pipeline on a decomposed space.

use super::rays::{extract_rays, fit_ray_density, transport_relation, NeedleDecomposition};
use super::space::{DiscreteSpace, PerimeterModel};
use super::transport::{kantorovich_potential, localization_function, Potential};
use crate::density1d::{model_density, Density1D};
use crate::error::{Error, Result};
use crate::intervals::{perimeter_1d, sym_diff_volume, IntervalSet, Window};
use crate::profile::{model_profile_detail, quantile_radii, ConstantBundle, ExponentChoice};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Tunables of the pipeline, all in mesh units where dimensionful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub exponents: ExponentChoice,
    /// Chain tolerance `tol_gamma` in mesh units.
    pub tol_gamma_mesh: f64,
    /// Slack of the endpoint and pole checks in mesh units.
    pub check_tol_mesh: f64,
    /// Deficits below `delta_floor_mesh · mesh` are floored there in thresholds.
    pub delta_floor_mesh: f64,
    /// Tolerance of the per-ray CD test.
    pub cd_tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            exponents: ExponentChoice::default(),
            tol_gamma_mesh: 2.0,
            check_tol_mesh: 3.0,
            delta_floor_mesh: 1.0,
            cd_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayLabel {
    Short,
    LongBad1,
    LongBad2,
    LongGoodS,
    LongGoodN,
    LongGoodOther,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayClassification {
    pub labels: Vec<RayLabel>,
    pub lambda_q: Vec<f64>,
    /// Index of the longest ray.
    pub q_bar: usize,
    /// `δ` actually used in thresholds.
    pub delta_eff: f64,
    /// `π − δ^{β/N}`.
    pub pole_threshold: f64,
    /// `δ^γ`.
    pub sym_diff_threshold: f64,
    /// Per-ray `𝔪_q(E_q Δ [0, r⁻])` and `𝔪_q(E_q Δ [r⁺, D_q])`.
    pub sym_diffs: Vec<(f64, f64)>,
}

impl RayClassification {
    pub fn mass_of(&self, dec: &NeedleDecomposition, label: RayLabel) -> f64 {
        self.labels
            .iter()
            .zip(&dec.quotient_weights)
            .filter(|(l, _)| **l == label)
            .map(|(_, w)| w)
            .sum()
    }
}

/// Fitted densities of every ray, in order.
pub fn fit_all(dec: &NeedleDecomposition, n: f64, cd_tol: f64) -> Result<Vec<(Density1D, bool)>> {
    dec.rays
        .par_iter()
        .map(|r| fit_ray_density(r, n, dec.mesh, cd_tol))
        .collect()
}

/// Labels each ray; `λ_q` is the window mass of the Case-1 minimizer at `D_q`.
pub fn classify_rays(
    space: &DiscreteSpace,
    dec: &NeedleDecomposition,
    fitted: &[(Density1D, bool)],
    constants: &ConstantBundle,
    delta: f64,
    delta_floor: f64,
) -> Result<RayClassification> {
    if dec.rays.is_empty() {
        return Err(Error::NonConvergence("decomposition has no rays".into()));
    }
    let (n, v) = (constants.n, constants.v);
    let q_bar = (0..dec.rays.len())
        .max_by(|&a, &b| dec.rays[a].d_q.total_cmp(&dec.rays[b].d_q).then(b.cmp(&a)))
        .unwrap_or(0);
    let delta_eff = delta.max(delta_floor);
    let pole_threshold = PI - delta_eff.powf(constants.beta / n);
    let sym_diff_threshold = delta_eff.powf(constants.gamma);
    let bar = &dec.rays[q_bar];
    let per_ray: Vec<(f64, RayLabel, (f64, f64))> = dec
        .rays
        .par_iter()
        .zip(fitted)
        .map(|(r, (h, _))| -> Result<(f64, RayLabel, (f64, f64))> {
            let lambda = model_profile_detail(n, r.d_q.min(PI), v)?.lambda;
            let e_q = r.e_intervals()?;
            let vq = crate::intervals::volume(h, &e_q).clamp(1e-12, 1.0 - 1e-12);
            let radii = quantile_radii(h, vq)?;
            let d = h.domain();
            let south = sym_diff_volume(h, &e_q, &IntervalSet::new(d, [(0.0, radii.r_minus)])?);
            let north = sym_diff_volume(h, &e_q, &IntervalSet::new(d, [(radii.r_plus, d)])?);
            let label = if lambda <= constants.eta_n {
                RayLabel::Short
            } else if space.d(r.south, bar.north) <= pole_threshold {
                RayLabel::LongBad1
            } else if space.d(bar.south, r.north) <= pole_threshold {
                RayLabel::LongBad2
            } else if south <= sym_diff_threshold {
                RayLabel::LongGoodS
            } else if north <= sym_diff_threshold {
                RayLabel::LongGoodN
            } else {
                RayLabel::LongGoodOther
            };
            Ok((lambda, label, (south, north)))
        })
        .collect::<Result<_>>()?;
    Ok(RayClassification {
        labels: per_ray.iter().map(|p| p.1).collect(),
        lambda_q: per_ray.iter().map(|p| p.0).collect(),
        q_bar,
        delta_eff,
        pole_threshold,
        sym_diff_threshold,
        sym_diffs: per_ray.iter().map(|p| p.2).collect(),
    })
}

/// An inequality evaluated on measured data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// The right-hand side is at least `π` (or infinite), so the check says nothing.
    pub vacuous: bool,
}

impl Check {
    fn le(lhs: f64, rhs: f64, slack: f64, vacuous_at: f64) -> Self {
        Check {
            lhs,
            rhs,
            holds: lhs <= rhs + slack,
            vacuous: !(rhs < vacuous_at),
        }
    }
}

/// Everything the pipeline measures on `(space, E)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficitReport {
    pub v: f64,
    pub perimeter: f64,
    pub model_profile: f64,
    pub delta: f64,
    pub mesh: f64,
    pub constants: ConstantBundle,
    pub potential_duality_gap: f64,
    pub lipschitz_slack: f64,
    pub relation_pairs: usize,
    pub rays: usize,
    pub transported_mass: f64,
    pub leftover_mass: f64,
    pub shared_mass: f64,
    pub max_zero_mean_error: f64,
    /// `Σ_q q_q (I_{D_q}(v) − I_π(v))`, a lower bound for `δ`.
    pub ray_deficit_lower: f64,
    /// `Σ_q q_q P_q(E_q)`, at most `P(E)` up to discretization.
    pub ray_perimeter: f64,
    pub cd_ok_fraction: f64,
    pub classification: RayClassification,
    pub short_mass: Check,
    pub diameter_deficit_q_bar: Check,
    /// Worst excess in the endpoint-sum inequality over long rays.
    pub endpoint_worst_excess: f64,
    pub endpoint_check: Check,
    pub pole_cluster: Check,
}

/// Full decomposition state kept alongside the report.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub f: Vec<f64>,
    pub potential: Potential,
    pub decomposition: NeedleDecomposition,
    pub fitted: Vec<(Density1D, bool)>,
    pub report: DeficitReport,
}

/// Runs localization, classification and every report check.
pub fn deficit_report(
    space: &DiscreteSpace,
    e_mask: &[bool],
    n: f64,
    config: &PipelineConfig,
) -> Result<Pipeline> {
    let f = localization_function(space, e_mask)?;
    let v = space.mass(e_mask);
    let potential = kantorovich_potential(space, &f)?;
    let mesh = space.mesh();
    let tol_gamma = config.tol_gamma_mesh * mesh;
    let relation_pairs = transport_relation(space, &potential, tol_gamma).pairs.len();
    let dec = extract_rays(space, &potential, &f, e_mask, tol_gamma)?;
    let fitted = fit_all(&dec, n, config.cd_tol)?;
    let constants = ConstantBundle::new(n, v, config.exponents)?;
    let model = model_density(n)?;
    let i_pi = model.profile(v);
    let perim_model = PerimeterModel::calibrate(space, |v| model.profile(v));
    let perimeter = perim_model.perimeter(space, e_mask, None);
    let delta = perimeter - i_pi;
    let delta_floor = config.delta_floor_mesh * mesh;
    let cls = classify_rays(space, &dec, &fitted, &constants, delta, delta_floor)?;
    let total_q = dec.total_quotient();

    let mut ray_deficit_lower = 0.0;
    let mut ray_perimeter = 0.0;
    let mut zero_mean: f64 = 0.0;
    for (r, (h, _)) in dec.rays.iter().zip(&fitted) {
        let id = model_profile_detail(n, r.d_q.min(PI), v)?.value;
        ray_deficit_lower += r.weight * (id - i_pi);
        ray_perimeter += r.weight * perimeter_1d(h, &r.e_intervals()?, Window::Whole);
        zero_mean = zero_mean.max((r.e_fraction() - v).abs());
    }
    let cd_ok_fraction = fitted.iter().filter(|x| x.1).count() as f64 / fitted.len() as f64;
    let de = cls.delta_eff;
    let slack = config.check_tol_mesh * mesh;

    let short_mass = cls.mass_of(&dec, RayLabel::Short) / total_q;
    let short_bound = constants.eta_n.powf(1.0 / n) / constants.c_nv * de;
    let bar = &dec.rays[cls.q_bar];
    let c2 = constants.c2_at(de);
    let diam = Check::le((PI - bar.d_q).max(0.0).powf(n), c2 * de, 0.0, f64::INFINITY);

    let mut endpoint_worst = f64::NEG_INFINITY;
    let mut pole_worst: f64 = 0.0;
    for (r, l) in dec.rays.iter().zip(&cls.labels) {
        if *l == RayLabel::Short {
            continue;
        }
        let lhs = (PI - space.d(r.south, bar.north)) + (PI - space.d(bar.south, r.north));
        let rhs = (PI - r.d_q) + (PI - bar.d_q);
        endpoint_worst = endpoint_worst.max(lhs - rhs);
        if matches!(
            l,
            RayLabel::LongGoodS | RayLabel::LongGoodN | RayLabel::LongGoodOther
        ) {
            pole_worst = pole_worst
                .max(space.d(r.south, bar.south))
                .max(space.d(r.north, bar.north));
        }
    }
    let endpoint_check = Check::le(endpoint_worst.max(0.0), 0.0, slack, f64::INFINITY);
    let pole_bound =
        constants.c_n_antipodal * de.powf(constants.beta / n).max((c2 * de).powf(1.0 / n));
    let pole_cluster = Check::le(pole_worst, pole_bound, slack, PI);

    let report = DeficitReport {
        v,
        perimeter,
        model_profile: i_pi,
        delta,
        mesh,
        constants,
        potential_duality_gap: potential.duality_gap,
        lipschitz_slack: potential.lipschitz_slack,
        relation_pairs,
        rays: dec.rays.len(),
        transported_mass: total_q,
        leftover_mass: dec.leftover_mass,
        shared_mass: dec.shared_mass,
        max_zero_mean_error: zero_mean,
        ray_deficit_lower,
        ray_perimeter,
        cd_ok_fraction,
        classification: cls,
        short_mass: Check::le(short_mass, short_bound, 0.0, f64::INFINITY),
        diameter_deficit_q_bar: diam,
        endpoint_worst_excess: endpoint_worst,
        endpoint_check,
        pole_cluster,
    };
    Ok(Pipeline {
        f,
        potential,
        decomposition: dec,
        fitted,
        report,
    })
}

/// The headline quantities, with fixed field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainTheoremReport {
    pub delta: f64,
    pub asymmetry: f64,
    pub diam_deficit: f64,
    pub q_short: f64,
    pub q_bad1: f64,
    pub q_bad2: f64,
    #[serde(rename = "q_S")]
    pub q_s: f64,
    #[serde(rename = "q_N")]
    pub q_n: f64,
    pub x_bar: String,
    #[serde(rename = "r_N_v")]
    pub r_n_v: f64,
    pub eta: f64,
    pub side: char,
    pub details: DeficitReport,
}

/// Whole pipeline: picks the side with more good-ray mass, centers the
/// model ball at the corresponding pole of the longest ray and measures
/// `𝔪(E Δ B_{r_N(v)}(x̄))`.
pub fn quantify(
    space: &DiscreteSpace,
    e_mask: &[bool],
    n: f64,
    config: &PipelineConfig,
) -> Result<MainTheoremReport> {
    let p = deficit_report(space, e_mask, n, config)?;
    let rep = p.report;
    let dec = &p.decomposition;
    let total = dec.total_quotient();
    let cls = &rep.classification;
    let mass = |l| cls.mass_of(dec, l) / total;
    let (q_s, q_n) = (mass(RayLabel::LongGoodS), mass(RayLabel::LongGoodN));
    let bar = &dec.rays[cls.q_bar];
    let (side, center) = if q_s >= q_n {
        ('S', bar.south)
    } else {
        ('N', bar.north)
    };
    let r_n_v = model_density(n)?.quantile(rep.v);
    let ball = space.ball(center, r_n_v);
    Ok(MainTheoremReport {
        delta: rep.delta,
        asymmetry: space.sym_diff_mass(e_mask, &ball),
        diam_deficit: PI - space.diameter(),
        q_short: mass(RayLabel::Short),
        q_bad1: mass(RayLabel::LongBad1),
        q_bad2: mass(RayLabel::LongBad2),
        q_s,
        q_n,
        x_bar: space.ids()[center].clone(),
        r_n_v,
        eta: rep.constants.eta,
        side,
        details: rep,
    })
}
