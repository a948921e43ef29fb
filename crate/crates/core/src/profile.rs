//! Model isoperimetric profiles of windowed sine-power densities, the window
//! mass λ_D, and the constants built from them.

use crate::density1d::{model_density, Density1D, ModelDensity};
use crate::error::{Error, Result};
use crate::intervals::{perimeter_1d, volume, IntervalSet, Window};
use crate::quad::{adaptive_simpson, bisect_increasing, golden_min};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

fn check_v(v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "volume must lie in (0,1), got {v}"
        )));
    }
    Ok(())
}

fn check_window(d: f64, xi: f64) -> Result<()> {
    if !(d > 0.0) {
        return Err(Error::DegenerateDomain(format!("domain length {d}")));
    }
    if !(xi >= 0.0) || xi + d > PI + 1e-12 {
        return Err(Error::OutOfDomain(format!(
            "window [{xi}, {}] leaves [0, π]",
            xi + d
        )));
    }
    Ok(())
}

/// Normalized model mass of the window `[ξ, ξ + D]`.
pub fn lambda_of(n: f64, d: f64, xi: f64) -> Result<f64> {
    check_window(d, xi)?;
    let m = model_density(n)?;
    Ok(m.mass(xi, (xi + d).min(PI)))
}

/// Profile of a window computed from the model cumulative function:
/// `(1/λ) min{I_π(λv + F(ξ)), I_π(λ(1−v) + F(ξ))}`.
fn window_profile(m: &ModelDensity, d: f64, xi: f64, v: f64) -> f64 {
    let lambda = m.mass(xi, (xi + d).min(PI));
    let f0 = m.cdf(xi);
    let ip = |w: f64| m.eval(m.quantile(w));
    ip(lambda * v + f0).min(ip(lambda * (1.0 - v) + f0)) / lambda
}

/// Minimizer report for the diameter-constrained profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileValue {
    pub value: f64,
    /// Leftmost window offset attaining the minimum.
    pub xi: f64,
    pub lambda: f64,
    /// Another, non-adjacent offset attains the minimum within tolerance.
    pub tie: bool,
}

/// Number of coarse offsets scanned before golden-section refinement.
pub const XI_GRID: usize = 64;

/// The model profile `I_{N−1,N,D}(v)` together with its minimizing offset.
pub fn model_profile_detail(n: f64, d: f64, v: f64) -> Result<ProfileValue> {
    check_v(v)?;
    if !(d > 0.0) {
        return Err(Error::DegenerateDomain(format!("domain length {d}")));
    }
    let m = model_density(n)?;
    if d >= PI {
        return Ok(ProfileValue {
            value: m.profile(v),
            xi: 0.0,
            lambda: 1.0,
            tie: false,
        });
    }
    let span = PI - d;
    let f = |xi: f64| window_profile(&m, d, xi.clamp(0.0, span), v);
    let xs: Vec<f64> = (0..=XI_GRID)
        .map(|i| span * i as f64 / XI_GRID as f64)
        .collect();
    let vals: Vec<f64> = xs.iter().map(|x| f(*x)).collect();
    let k = (0..vals.len()).fold(0, |b, i| if vals[i] < vals[b] { i } else { b });
    let lo = xs[k.saturating_sub(1)];
    let hi = xs[(k + 1).min(XI_GRID)];
    let (gx, gv) = golden_min(f, lo, hi, 1e-8);
    let (mut xi, mut value) = (xs[k], vals[k]);
    if gv < value {
        xi = gx;
        value = gv;
    }
    let tol = 1e-12 * value.abs().max(1.0);
    let tie = vals.iter().enumerate().any(|(i, val)| {
        (i as isize - k as isize).abs() > 1 && (*val - value).abs() <= tol.max(1e-10)
    });
    let lambda = m.mass(xi, xi + d);
    Ok(ProfileValue {
        value,
        xi,
        lambda,
        tie,
    })
}

/// The model profile `I_{N−1,N,D}(v)`.
pub fn model_profile(n: f64, d: f64, v: f64) -> Result<f64> {
    Ok(model_profile_detail(n, d, v)?.value)
}

/// Radii of the one-sided sets of volume `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileRadii {
    pub r_minus: f64,
    pub r_plus: f64,
    pub v: f64,
}

pub fn quantile_radii(h: &Density1D, v: f64) -> Result<QuantileRadii> {
    check_v(v)?;
    Ok(QuantileRadii {
        r_minus: h.quantile(v),
        r_plus: h.upper_quantile(v),
        v,
    })
}

/// `I_h(v) = min{h(r⁻), h(r⁺)}`.
pub fn profile_of(h: &Density1D, v: f64) -> Result<f64> {
    let r = quantile_radii(h, v)?;
    Ok(h.eval(r.r_minus).min(h.eval(r.r_plus)))
}

/// Mass tolerance for comparing a recorded volume against the measured one.
pub const VOLUME_TOL: f64 = 1e-9;

/// Deficit `P_h(E) − I_h(v)` of a set with recorded volume `v`.
pub fn deficit_1d(h: &Density1D, e: &IntervalSet, v: f64) -> Result<f64> {
    let measured = volume(h, e);
    if (measured - v).abs() > VOLUME_TOL {
        return Err(Error::VolumeMismatch {
            recorded: v,
            measured,
        });
    }
    Ok(perimeter_1d(h, e, Window::Whole) - profile_of(h, v)?)
}

/// Both sides of the window identity for `I_D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Compares the window profile computed by quadrature on the windowed
/// density against the formula through the full model profile.
pub fn profile_identity_check(n: f64, d: f64, xi: f64, v: f64) -> Result<IdentityCheck> {
    check_v(v)?;
    check_window(d, xi)?;
    let h = Density1D::window(n, d.min(PI - xi), xi)?;
    let lhs = profile_of(&h, v)?;
    let m = model_density(n)?;
    let rhs = window_profile(&m, d, xi, v);
    Ok(IdentityCheck {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// Concavity gap of the model profile and the lower bound it must exceed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcavityGap {
    pub gap: f64,
    pub bound: f64,
    pub constant: f64,
    pub lambda: f64,
}

impl ConcavityGap {
    pub fn holds(&self, tol: f64) -> bool {
        self.gap >= self.bound - tol
    }
}

pub fn concavity_gap(n: f64, d: f64, xi: f64, v: f64) -> Result<ConcavityGap> {
    check_v(v)?;
    check_window(d, xi)?;
    let m = model_density(n)?;
    let lambda = m.mass(xi, (xi + d).min(PI));
    let gap = lambda * window_profile(&m, d, xi, v) - lambda * m.profile(v);
    let constant = c_nv(n, v)?;
    let bound = constant * lambda.powf((n - 1.0) / n).min(1.0 - lambda);
    Ok(ConcavityGap {
        gap,
        bound,
        constant,
        lambda,
    })
}

/// `lim_{t↓0} I_π(t)/t^{(N−1)/N} = (Nω_N)^{(N−1)/N}/ω_N`.
pub fn small_volume_limit(n: f64) -> Result<f64> {
    let om = model_density(n)?.omega;
    Ok((n * om).powf((n - 1.0) / n) / om)
}

/// Central-difference derivative of `I_π` with step `1e−5`.
pub fn profile_derivative(n: f64, v: f64) -> Result<f64> {
    let m = model_density(n)?;
    let step = 1e-5;
    Ok((m.profile(v + step) - m.profile(v - step)) / (2.0 * step))
}

/// The constant `C_{N,v}` of the concavity estimate.
pub fn c_nv(n: f64, v: f64) -> Result<f64> {
    check_v(v)?;
    let m = model_density(n)?;
    let i = m.profile(v);
    let di = profile_derivative(n, v)?;
    let p = (n - 1.0) / n;
    let third = small_volume_limit(n)? * v.powf(p).min((1.0 - v).powf(p));
    Ok((i - v * di).min(i + (1.0 - v) * di).min(third))
}

/// Root of `x^{(N−1)/N} = 1 − x` in `(0, 1)`.
pub fn solve_eta_n(n: f64) -> Result<f64> {
    if !(n > 1.0) {
        return Err(Error::InvalidParameter(format!("N must exceed 1, got {n}")));
    }
    let p = (n - 1.0) / n;
    Ok(bisect_increasing(|x| x.powf(p) + x, 1.0, 0.0, 1.0))
}

/// Largest window mass for diameter `D`, attained by the centered window.
pub fn lambda_symmetric(n: f64, d: f64) -> Result<f64> {
    lambda_of(n, d.min(PI), 0.5 * (PI - d.min(PI)))
}

/// Smallest diameter of a long ray: `λ_sym(D_N) = η_N`.
pub fn long_ray_diameter(n: f64) -> Result<f64> {
    let eta = solve_eta_n(n)?;
    let m = model_density(n)?;
    Ok(bisect_increasing(
        |d| m.mass(0.5 * (PI - d), 0.5 * (PI + d)),
        eta,
        0.0,
        PI,
    ))
}

/// `C'_{N,v} = inf_{D ∈ [D_N, π)} (1 − λ_sym(D)) / (π − D)^N`, including the
/// limit `2^{1−N}/(N ω_N)` at `D = π`.
pub fn c1_nv(n: f64) -> Result<f64> {
    let m = model_density(n)?;
    let d_n = long_ray_diameter(n)?;
    let ratio = |d: f64| {
        let e = PI - d;
        // 1 − λ_sym = 2 ∫₀^{e/2} h_N
        2.0 * m.cdf(0.5 * e) / e.powf(n)
    };
    let limit = 2f64.powf(1.0 - n) / (n * m.omega);
    let cells = 512;
    let mut best = limit;
    let mut arg = cells;
    for i in 0..cells {
        let d = d_n + (PI - d_n) * i as f64 / cells as f64;
        let r = ratio(d);
        if r < best {
            best = r;
            arg = i;
        }
    }
    if arg < cells {
        let step = (PI - d_n) / cells as f64;
        let lo = (d_n + step * (arg as f64 - 1.0)).max(d_n);
        let hi = (d_n + step * (arg as f64 + 1.0)).min(PI - 1e-9);
        best = best.min(golden_min(ratio, lo, hi, 1e-10).1);
    }
    Ok(best)
}

/// `inf_{r ∈ (0, π]} r^{−N} ∫₀^r sin^{N−1}`.
pub fn antipodal_infimum(n: f64) -> Result<f64> {
    let m = model_density(n)?;
    let f = |r: f64| m.cdf(r) * m.omega / r.powf(n);
    let cells = 512;
    let (mut best, mut arg) = (f(PI), cells);
    for i in 1..cells {
        let r = PI * i as f64 / cells as f64;
        if f(r) < best {
            best = f(r);
            arg = i;
        }
    }
    if arg < cells {
        let step = PI / cells as f64;
        best = best.min(
            golden_min(
                f,
                step * (arg as f64 - 1.0),
                step * (arg as f64 + 1.0),
                1e-10,
            )
            .1,
        );
    }
    Ok(best)
}

/// The antipodal constant `C_N`: for `d(x,y), d(x,z) ≥ D`,
/// `d(y,z) ≤ C_N (π − D)`. With `r = d(y,z)/2` the comparison argument gives
/// `r ≤ max(1, (2^N−1)/(N m)) (π − D)`, `m` the infimum above.
pub fn antipodal_constant(n: f64) -> Result<f64> {
    let m = antipodal_infimum(n)?;
    Ok(2.0 * 1f64.max((2f64.powf(n) - 1.0) / (n * m)))
}

/// User-selectable exponents; unset values take their defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExponentChoice {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    /// Use the improved interface estimate available on smooth manifolds.
    pub riemannian: bool,
}

/// Constants and exponents of the quantitative estimates at fixed `(N, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantBundle {
    pub n: f64,
    pub v: f64,
    pub eta_n: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub c_nv: f64,
    pub c1_nv: f64,
    /// `C''_{N,v}` in the small-deficit limit, `1/(C' C)`.
    pub c2_nv: f64,
    pub c_n_antipodal: f64,
    pub riemannian: bool,
}

/// Upper limit (exclusive) on `α` for the given `β`, `γ`.
pub fn alpha_limit(n: f64, beta: f64, gamma: f64, riemannian: bool) -> f64 {
    let factor = if riemannian {
        n / (n - 1.0)
    } else {
        n / (2.0 * n - 1.0)
    };
    factor * gamma.min(1.0 - gamma).min(1.0 - beta)
}

impl ConstantBundle {
    pub fn new(n: f64, v: f64, choice: ExponentChoice) -> Result<Self> {
        check_v(v)?;
        if !(n > 1.0) {
            return Err(Error::InvalidParameter(format!("N must exceed 1, got {n}")));
        }
        let n2 = n * n;
        let default_beta = if choice.riemannian {
            n2 / (n2 + n - 1.0)
        } else {
            n2 / (n2 + 2.0 * n - 1.0)
        };
        let beta = choice.beta.unwrap_or(default_beta);
        let gamma = choice.gamma.unwrap_or(0.5);
        for (name, x) in [("beta", beta), ("gamma", gamma)] {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0,1), got {x}"
                )));
            }
        }
        let limit = alpha_limit(n, beta, gamma, choice.riemannian);
        let alpha = choice.alpha.unwrap_or(0.999 * limit);
        if !(alpha > 0.0 && alpha < limit) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} violates 0 < alpha < {limit} required by (beta, gamma) = ({beta}, {gamma})"
            )));
        }
        let eta = limit.min(beta / n);
        let c = c_nv(n, v)?;
        let c1 = c1_nv(n)?;
        Ok(ConstantBundle {
            n,
            v,
            eta_n: solve_eta_n(n)?,
            alpha,
            beta,
            gamma,
            eta,
            c_nv: c,
            c1_nv: c1,
            c2_nv: 1.0 / (c1 * c),
            c_n_antipodal: antipodal_constant(n)?,
            riemannian: choice.riemannian,
        })
    }

    /// `C''` evaluated at deficit `δ`: `1/(C'(C − δ η_N^{1/(N−1)}))`, infinite
    /// once the bracket vanishes.
    pub fn c2_at(&self, delta: f64) -> f64 {
        let denom = self.c1_nv * (self.c_nv - delta * self.eta_n.powf(1.0 / (self.n - 1.0)));
        if denom > 0.0 {
            1.0 / denom
        } else {
            f64::INFINITY
        }
    }
}

/// One row of a profile table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub n: f64,
    pub d: f64,
    pub xi: f64,
    pub v: f64,
    pub i: f64,
    pub lambda: f64,
}

/// Profile table over the given grids, ordered by `(N, D, v)`.
pub fn profile_table(ns: &[f64], ds: &[f64], vs: &[f64]) -> Result<Vec<ProfileRow>> {
    let mut rows = Vec::with_capacity(ns.len() * ds.len() * vs.len());
    for &n in ns {
        for &d in ds {
            for &v in vs {
                let p = model_profile_detail(n, d, v)?;
                rows.push(ProfileRow {
                    n,
                    d,
                    xi: p.xi,
                    v,
                    i: p.value,
                    lambda: p.lambda,
                });
            }
        }
    }
    Ok(rows)
}

/// CSV with header `N,D,xi,v,I,lambda`.
pub fn profile_csv(rows: &[ProfileRow]) -> String {
    let mut out = String::from("N,D,xi,v,I,lambda\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.n, r.d, r.xi, r.v, r.i, r.lambda);
    }
    out
}

/// `ω_N` by direct quadrature, an independent cross-check of the closed form.
pub fn omega_by_quadrature(n: f64) -> f64 {
    adaptive_simpson(&|t: f64| t.sin().powf(n - 1.0), 0.0, PI, 1e-14)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lambda_examples() {
        for d in [0.5, 1.0, 2.0, 3.0] {
            assert_abs_diff_eq!(
                lambda_of(2.0, d, 0.0).unwrap(),
                (1.0 - d.cos()) / 2.0,
                epsilon = 1e-14
            );
        }
        assert_abs_diff_eq!(lambda_of(3.0, PI / 2.0, 0.0).unwrap(), 0.5, epsilon = 1e-14);
        for n in [1.5, 2.0, 7.0] {
            assert_abs_diff_eq!(lambda_of(n, PI, 0.0).unwrap(), 1.0, epsilon = 1e-14);
        }
        assert!(lambda_of(2.0, 3.0, 0.2).is_err());
    }

    #[test]
    fn full_profile_is_sqrt_for_n2() {
        for v in [0.05, 0.3, 0.5, 0.9] {
            assert_abs_diff_eq!(
                model_profile(2.0, PI, v).unwrap(),
                (v * (1.0 - v)).sqrt(),
                epsilon = 1e-13
            );
        }
        assert!(model_profile(2.0, PI, 1.0).is_err());
    }

    #[test]
    fn full_profile_is_symmetric() {
        for n in [1.5, 3.0, 6.0] {
            for v in [0.1, 0.27] {
                assert_abs_diff_eq!(
                    model_profile(n, PI, v).unwrap(),
                    model_profile(n, PI, 1.0 - v).unwrap(),
                    epsilon = 1e-13
                );
            }
        }
    }

    #[test]
    fn quantile_radii_for_model() {
        let h = Density1D::model(2.0).unwrap();
        let r = quantile_radii(&h, 0.5).unwrap();
        assert_abs_diff_eq!(r.r_minus, PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.r_plus, PI / 2.0, epsilon = 1e-12);
        let r = quantile_radii(&h, 0.2).unwrap();
        assert_abs_diff_eq!(r.r_minus, (1.0f64 - 0.4).acos(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.r_plus, PI - r.r_minus, epsilon = 1e-12);
    }

    #[test]
    fn identity_trivial_at_full_diameter() {
        let c = profile_identity_check(2.0, PI, 0.0, 0.3).unwrap();
        assert!(c.gap < 1e-12);
        assert_abs_diff_eq!(c.lhs, (0.21f64).sqrt(), epsilon = 1e-12);
        let c = profile_identity_check(2.0, 2.8, 0.1, 0.4).unwrap();
        assert!(c.gap <= 1e-8, "{c:?}");
    }

    #[test]
    fn small_volume_limit_matches_ratio_at_small_volume() {
        assert_abs_diff_eq!(small_volume_limit(2.0).unwrap(), 1.0, epsilon = 1e-12);
        for n in [2.0, 2.5, 3.0, 7.0] {
            let m = model_density(n).unwrap();
            let p = (n - 1.0) / n;
            let ratio = |t: f64| m.profile(t) / t.powf(p);
            let lim = small_volume_limit(n).unwrap();
            let (e1, e2) = ((ratio(1e-3) - lim).abs(), (ratio(1e-6) - lim).abs());
            assert!(e2 < e1 && e2 < 0.02 * lim, "N={n}: {e1} {e2}");
        }
    }

    #[test]
    fn concavity_gap_vanishes_at_full_diameter() {
        let g = concavity_gap(2.0, PI, 0.0, 0.3).unwrap();
        assert!(g.gap.abs() < 1e-14 && g.bound.abs() < 1e-14);
    }

    #[test]
    fn eta_n_examples() {
        assert_abs_diff_eq!(
            solve_eta_n(2.0).unwrap(),
            (3.0 - 5f64.sqrt()) / 2.0,
            epsilon = 1e-12
        );
        assert!((solve_eta_n(1000.0).unwrap() - 0.5).abs() < 0.01);
        for n in [1.5, 2.0, 4.0] {
            let x = solve_eta_n(n).unwrap();
            assert!((x.powf((n - 1.0) / n) - (1.0 - x)).abs() <= 1e-12);
        }
        assert!(solve_eta_n(2.0).unwrap() < solve_eta_n(3.0).unwrap());
    }

    #[test]
    fn antipodal_infimum_for_n2() {
        // (1 − cos r)/r² decreases on (0, π]
        assert_abs_diff_eq!(
            antipodal_infimum(2.0).unwrap(),
            2.0 / (PI * PI),
            epsilon = 1e-12
        );
    }

    #[test]
    fn bundle_defaults_and_rejection() {
        let b = ConstantBundle::new(2.0, 0.3, ExponentChoice::default()).unwrap();
        assert_abs_diff_eq!(b.beta, 4.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.eta, 2.0 / 7.0, epsilon = 1e-15);
        assert!(b.alpha < 2.0 / 7.0);
        let r = ConstantBundle::new(
            2.0,
            0.3,
            ExponentChoice {
                riemannian: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_abs_diff_eq!(r.eta, 2.0 / 5.0, epsilon = 1e-15);
        let bad = ExponentChoice {
            alpha: Some(0.3),
            ..Default::default()
        };
        assert!(ConstantBundle::new(2.0, 0.3, bad).is_err());
        assert!(b.c2_at(0.0) > 0.0 && b.c2_at(1e3).is_infinite());
    }

    #[test]
    fn c1_limit_for_n2() {
        // limit 2^{1−N}/(N ω_N) = 1/8 at N = 2
        let c1 = c1_nv(2.0).unwrap();
        assert!(c1 <= 0.125 + 1e-12 && c1 > 0.05, "{c1}");
    }

    #[test]
    fn omega_quadrature_agrees() {
        for n in [1.5, 2.0, 2.5, 3.0, 5.0, 10.0] {
            let om = model_density(n).unwrap().omega;
            assert!((omega_by_quadrature(n) / om - 1.0).abs() <= 1e-10);
        }
    }
}
