//! One-dimensional CD(K,N) densities: distortion coefficients, the density
//! condition, and comparison estimates against the model `sin^{N-1}`.

use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::quad::{adaptive_simpson, bisect_increasing, invert_monotone};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta, beta_reg};
use statrs::function::gamma::gamma;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

/// Number of cells in the cumulative table of every density.
pub const TABLE_CELLS: usize = 2048;
/// Default tolerance of the CD check for closed forms.
pub const TOL_CLOSED: f64 = 1e-8;
/// Default tolerance of the CD check for sampled densities.
pub const TOL_GRID: f64 = 1e-6;

/// Curvature lower bound `K` and dimension bound `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureParams {
    pub k: f64,
    pub n: f64,
}

impl CurvatureParams {
    pub fn new(k: f64, n: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "K must be positive, got {k}"
            )));
        }
        if !(n > 1.0) {
            return Err(Error::InvalidParameter(format!("N must exceed 1, got {n}")));
        }
        Ok(CurvatureParams { k, n })
    }

    /// The normalization `K = N − 1` used throughout.
    pub fn model(n: f64) -> Result<Self> {
        Self::new(n - 1.0, n)
    }
}

fn check_coeff_args(t: f64, theta: f64, k: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "t must lie in [0,1], got {t}"
        )));
    }
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "theta must be nonnegative, got {theta}"
        )));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "K must be positive, got {k}"
        )));
    }
    Ok(())
}

/// `sin(tθ√(K/N)) / sin(θ√(K/N))` without argument checks; `dim` plays the
/// role of `N`.
fn sigma_raw(t: f64, theta: f64, k: f64, dim: f64) -> ExtendedReal {
    if theta == 0.0 {
        return ExtendedReal::Finite(t);
    }
    let a = theta * (k / dim).sqrt();
    // Relative slack absorbs rounding in `θ√(K/N)` at the threshold.
    if a >= PI * (1.0 - 1e-14) {
        return ExtendedReal::PosInfinity;
    }
    ExtendedReal::Finite((t * a).sin() / a.sin())
}

/// The distortion coefficient `σ^{(t)}_{K,N}(θ)`.
pub fn sigma_coeff(t: f64, theta: f64, params: &CurvatureParams) -> Result<ExtendedReal> {
    check_coeff_args(t, theta, params.k)?;
    Ok(sigma_raw(t, theta, params.k, params.n))
}

/// The distortion coefficient `τ^{(t)}_{K,N}(θ) = t^{1/N} σ^{(t)}_{K,N−1}(θ)^{1−1/N}`.
pub fn tau_coeff(t: f64, theta: f64, params: &CurvatureParams) -> Result<ExtendedReal> {
    check_coeff_args(t, theta, params.k)?;
    let n = params.n;
    if t == 0.0 {
        return Ok(ExtendedReal::Finite(0.0));
    }
    let s = sigma_raw(t, theta, params.k, n - 1.0);
    Ok(s.powf(1.0 - 1.0 / n).mul_nonneg(t.powf(1.0 / n)))
}

/// Regularized incomplete beta `I_y(a, b)`. The library routine loses
/// relative accuracy for tiny `y`, where the power series converges fast.
fn reg_inc_beta(a: f64, b: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1e-3 {
        return beta_reg(a, b, y);
    }
    let mut p = 1.0;
    let mut sum = 1.0 / a;
    for k in 1..60 {
        let k = k as f64;
        p *= (k - b) / k * y;
        let term = p / (a + k);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    y.powf(a) * sum / beta(a, b)
}

/// `ω_N = ∫₀^π sin^{N−1}`, reduced by `ω_N = ω_{N−2}(N−2)/(N−1)` to a base
/// case in `(1, 3]`.
pub fn omega(n: f64) -> f64 {
    if n > 3.0 {
        return omega(n - 2.0) * (n - 2.0) / (n - 1.0);
    }
    if n == 2.0 {
        2.0
    } else if n == 3.0 {
        FRAC_PI_2
    } else {
        PI.sqrt() * gamma(0.5 * n) / gamma(0.5 * (n + 1.0))
    }
}

/// `sin x` for `x ∈ [0, π]`, reflected so that `sin π = 0` exactly.
fn sin_reflected(x: f64) -> f64 {
    if x > FRAC_PI_2 {
        (PI - x).sin()
    } else {
        x.sin()
    }
}

/// `∫₀^x sin^{N−1}(t) dt` for `x ∈ [0, π]`, through the regularized
/// incomplete beta function.
pub fn sin_power_integral(n: f64, x: f64) -> f64 {
    let a = 0.5 * n;
    let full = omega(n);
    let x = x.clamp(0.0, PI);
    let half = |y: f64| {
        // ∫₀^y for y ∈ [0, π/2]
        let s = y.sin();
        if let Some(k) = integer_power(n) {
            if s > 0.1 {
                return sin_power_recursion(k, y, s);
            }
        }
        if s * s <= 0.5 {
            0.5 * full * reg_inc_beta(a, 0.5, s * s)
        } else {
            let c = (FRAC_PI_2 - y).sin();
            0.5 * full - 0.5 * full * reg_inc_beta(0.5, a, c * c)
        }
    };
    if x <= FRAC_PI_2 {
        half(x)
    } else {
        full - half(PI - x)
    }
}

/// `N − 1` when it is a small nonnegative integer.
fn integer_power(n: f64) -> Option<u32> {
    let k = n - 1.0;
    ((0.0..=64.0).contains(&k) && k.fract() == 0.0).then_some(k as u32)
}

/// `∫₀^y sin^k` by `I_k = −sin^{k−1} cos / k + (k−1)/k · I_{k−2}`.
fn sin_power_recursion(k: u32, y: f64, s: f64) -> f64 {
    let c = y.cos();
    let (mut lo, mut hi) = (y, 1.0 - c);
    if k == 0 {
        return lo;
    }
    // Before step `j`, `lo` and `hi` hold I_{j−2} and I_{j−1}.
    let mut sp = 1.0;
    for j in 2..=k {
        let j = j as f64;
        let next = -sp * s * c / j + (j - 1.0) / j * lo;
        sp *= s;
        lo = hi;
        hi = next;
    }
    hi
}

/// The model density `h_N = sin^{N−1}/ω_N` on `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelDensity {
    pub n: f64,
    pub omega: f64,
}

/// Builds the model density for dimension `n`.
pub fn model_density(n: f64) -> Result<ModelDensity> {
    if !(n > 1.0) {
        return Err(Error::InvalidParameter(format!("N must exceed 1, got {n}")));
    }
    Ok(ModelDensity { n, omega: omega(n) })
}

impl ModelDensity {
    pub fn eval(&self, t: f64) -> f64 {
        if !(0.0..=PI).contains(&t) {
            return 0.0;
        }
        sin_reflected(t).max(0.0).powf(self.n - 1.0) / self.omega
    }

    /// Derivative of `h_N`.
    pub fn derivative(&self, t: f64) -> f64 {
        (self.n - 1.0) * t.sin().max(0.0).powf(self.n - 2.0) * t.cos() / self.omega
    }

    /// `∫₀^x h_N`.
    pub fn cdf(&self, x: f64) -> f64 {
        sin_power_integral(self.n, x) / self.omega
    }

    /// `∫_a^b h_N`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        // Near the right end both values are close to 1; integrate from the
        // mirrored side to avoid cancellation.
        if a > FRAC_PI_2 {
            self.cdf(PI - a) - self.cdf(PI - b)
        } else {
            self.cdf(b) - self.cdf(a)
        }
    }

    /// The `x` with `∫₀^x h_N = v`.
    pub fn quantile(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        if v >= 1.0 {
            return PI;
        }
        if v > 0.5 {
            return PI - self.quantile(1.0 - v);
        }
        invert_monotone(|x| self.cdf(x), |x| self.eval(x), v, 0.0, FRAC_PI_2)
    }

    /// The model profile `I_π(v) = h_N(r_N(v))`.
    pub fn profile(&self, v: f64) -> f64 {
        self.eval(self.quantile(v.min(1.0 - v)))
    }
}

/// One factor `amp · sin(t + phase)` of a sine-power family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub amp: f64,
    pub phase: f64,
}

/// Closed-form descriptor of a density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityForm {
    /// `sin^{N−1}(t + xi)`, the model density seen through a window.
    Model { xi: f64 },
    /// `(min_i amp_i sin(t + phase_i))^{N−1}`.
    SinePower { terms: Vec<SineTerm> },
    /// Piecewise-linear interpolation of samples.
    Grid { ts: Vec<f64>, hs: Vec<f64> },
}

impl DensityForm {
    pub fn label(&self) -> &'static str {
        match self {
            DensityForm::Model { .. } => "model",
            DensityForm::SinePower { .. } => "sine-power",
            DensityForm::Grid { .. } => "grid",
        }
    }
}

/// A probability density on `[0, D]`, normalized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Density1D {
    d: f64,
    n: f64,
    form: DensityForm,
    scale: f64,
    raw_mass: f64,
    cum: Vec<f64>,
}

impl Density1D {
    /// `sin^{N−1}(t + ξ)` on `[0, D]`, normalized.
    pub fn window(n: f64, d: f64, xi: f64) -> Result<Self> {
        check_window(n, d, xi)?;
        Self::build(n, d, DensityForm::Model { xi })
    }

    /// The model density on `[0, π]`.
    pub fn model(n: f64) -> Result<Self> {
        Self::window(n, PI, 0.0)
    }

    /// `(min_i a_i sin(t + φ_i))^{N−1}` on `[0, D]`, normalized. Every phase
    /// must keep `t + φ_i` inside `[0, π]`.
    pub fn sine_power(n: f64, d: f64, terms: Vec<SineTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter(
                "sine-power family needs a term".into(),
            ));
        }
        for term in &terms {
            if !(term.amp > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "amplitude {} not positive",
                    term.amp
                )));
            }
            check_window(n, d, term.phase)?;
        }
        Self::build(n, d, DensityForm::SinePower { terms })
    }

    /// Piecewise-linear density through `(ts[i], hs[i])`, shifted to start at 0.
    pub fn from_samples(n: f64, ts: Vec<f64>, hs: Vec<f64>) -> Result<Self> {
        if !(n > 1.0) {
            return Err(Error::InvalidParameter(format!("N must exceed 1, got {n}")));
        }
        if ts.len() != hs.len() || ts.len() < 3 {
            return Err(Error::InvalidParameter(
                "need at least 3 matching samples".into(),
            ));
        }
        if ts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "sample abscissae must increase".into(),
            ));
        }
        if hs.iter().any(|h| !(*h >= 0.0) || !h.is_finite()) {
            return Err(Error::InvalidParameter(
                "density samples must be finite and nonnegative".into(),
            ));
        }
        let t0 = ts[0];
        let ts: Vec<f64> = ts.iter().map(|t| t - t0).collect();
        let d = *ts.last().unwrap();
        if d > PI + 1e-9 {
            return Err(Error::DegenerateDomain(format!(
                "domain length {d} exceeds π"
            )));
        }
        Self::build(n, d, DensityForm::Grid { ts, hs })
    }

    fn build(n: f64, d: f64, form: DensityForm) -> Result<Self> {
        if !(d > 0.0) {
            return Err(Error::DegenerateDomain(format!("domain length {d}")));
        }
        let mut out = Density1D {
            d,
            n,
            form,
            scale: 1.0,
            raw_mass: 0.0,
            cum: Vec::new(),
        };
        let cells = match &out.form {
            DensityForm::Grid { ts, .. } => ts.len() - 1,
            _ => TABLE_CELLS,
        };
        let mut cum = Vec::with_capacity(cells + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for j in 0..cells {
            let (a, b) = out.cell_bounds(j, cells);
            acc += out.raw_integral(a, b, j);
            cum.push(acc);
        }
        if !(acc > 0.0) || !acc.is_finite() {
            return Err(Error::DegenerateDomain("density has no mass".into()));
        }
        out.raw_mass = acc;
        out.scale = 1.0 / acc;
        out.cum = cum.into_iter().map(|c| c / acc).collect();
        Ok(out)
    }

    fn cell_bounds(&self, j: usize, cells: usize) -> (f64, f64) {
        match &self.form {
            DensityForm::Grid { ts, .. } => (ts[j], ts[j + 1]),
            _ => {
                let dx = self.d / cells as f64;
                (
                    j as f64 * dx,
                    if j + 1 == cells {
                        self.d
                    } else {
                        (j + 1) as f64 * dx
                    },
                )
            }
        }
    }

    fn cells(&self) -> usize {
        self.cum.len() - 1
    }

    /// Unnormalized integral over `[a, b]`, which lies inside cell `j`.
    fn raw_integral(&self, a: f64, b: f64, j: usize) -> f64 {
        match &self.form {
            DensityForm::Grid { ts, hs } => {
                let (t0, t1) = (ts[j], ts[j + 1]);
                let slope = (hs[j + 1] - hs[j]) / (t1 - t0);
                let prim = |x: f64| hs[j] * (x - t0) + 0.5 * slope * (x - t0) * (x - t0);
                prim(b) - prim(a)
            }
            DensityForm::Model { xi } => {
                let (a, b) = (a + xi, (b + xi).min(PI));
                if a > FRAC_PI_2 {
                    sin_power_integral(self.n, PI - a) - sin_power_integral(self.n, PI - b)
                } else {
                    sin_power_integral(self.n, b) - sin_power_integral(self.n, a)
                }
            }
            DensityForm::SinePower { .. } => adaptive_simpson(&|t| self.raw_eval(t), a, b, 1e-16),
        }
    }

    /// The unnormalized density.
    fn raw_eval(&self, t: f64) -> f64 {
        if !(0.0..=self.d).contains(&t) {
            return 0.0;
        }
        match &self.form {
            DensityForm::Grid { ts, hs } => {
                let j = locate(ts, t);
                let w = (t - ts[j]) / (ts[j + 1] - ts[j]);
                hs[j] + w * (hs[j + 1] - hs[j])
            }
            _ => self.root_raw(t).powf(self.n - 1.0),
        }
    }

    /// `min_i a_i sin(t + φ_i)` for closed forms.
    fn root_raw(&self, t: f64) -> f64 {
        match &self.form {
            DensityForm::Model { xi } => sin_reflected(t + xi).max(0.0),
            DensityForm::SinePower { terms } => terms
                .iter()
                .map(|s| s.amp * sin_reflected(t + s.phase))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            DensityForm::Grid { .. } => self.raw_eval(t).powf(1.0 / (self.n - 1.0)),
        }
    }

    pub fn domain(&self) -> f64 {
        self.d
    }

    pub fn dimension(&self) -> f64 {
        self.n
    }

    pub fn form(&self) -> &DensityForm {
        &self.form
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self.form, DensityForm::Grid { .. })
    }

    /// Mass before normalization.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    /// Total mass after normalization (one up to table rounding).
    pub fn total_mass(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Density value; zero outside `[0, D]`.
    pub fn eval(&self, t: f64) -> f64 {
        self.scale * self.raw_eval(t)
    }

    /// `h^{1/(N−1)}`.
    pub fn root(&self, t: f64) -> f64 {
        self.eval(t).powf(1.0 / (self.n - 1.0))
    }

    /// `h'/h` at `t`: exact for closed forms, a central difference for samples.
    pub fn log_derivative(&self, t: f64) -> f64 {
        match &self.form {
            DensityForm::Model { xi } => (self.n - 1.0) / (t + xi).tan(),
            DensityForm::SinePower { terms } => {
                let active = terms
                    .iter()
                    .min_by(|a, b| {
                        (a.amp * (t + a.phase).sin()).total_cmp(&(b.amp * (t + b.phase).sin()))
                    })
                    .unwrap();
                (self.n - 1.0) / (t + active.phase).tan()
            }
            DensityForm::Grid { .. } => {
                let step = 1e-6_f64.min(0.5 * t).min(0.5 * (self.d - t));
                (self.eval(t + step) - self.eval(t - step)) / (2.0 * step * self.eval(t))
            }
        }
    }

    /// `∫₀^x h`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.d {
            return self.total_mass();
        }
        let cells = self.cells();
        let j = match &self.form {
            DensityForm::Grid { ts, .. } => locate(ts, x),
            _ => ((x / self.d * cells as f64) as usize).min(cells - 1),
        };
        let (a, _) = self.cell_bounds(j, cells);
        self.cum[j] + self.scale * self.raw_integral(a, x, j)
    }

    /// `∫_a^b h`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.cdf(b) - self.cdf(a)
    }

    /// The `x` with `∫₀^x h = m`.
    pub fn quantile(&self, m: f64) -> f64 {
        if m <= 0.0 {
            return 0.0;
        }
        let total = self.total_mass();
        if m >= total {
            return self.d;
        }
        let j = self
            .cum
            .partition_point(|c| *c <= m)
            .saturating_sub(1)
            .min(self.cells() - 1);
        let (lo, hi) = self.cell_bounds(j, self.cells());
        invert_monotone(|x| self.cdf(x), |x| self.eval(x), m, lo, hi)
    }

    /// The `x` with `∫_x^D h = m`.
    pub fn upper_quantile(&self, m: f64) -> f64 {
        self.quantile(self.total_mass() - m)
    }

    /// Uniform samples `(t, h(t))` over `cells` cells.
    pub fn samples(&self, cells: usize) -> Vec<(f64, f64)> {
        (0..=cells)
            .map(|i| {
                let t = if i == cells {
                    self.d
                } else {
                    self.d * i as f64 / cells as f64
                };
                (t, self.eval(t))
            })
            .collect()
    }

    /// Plain-text columnar form: header `D N form`, then `t h` rows.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.d, self.n, self.form.label());
        let rows = match &self.form {
            DensityForm::Grid { ts, .. } => ts.iter().map(|t| (*t, self.eval(*t))).collect(),
            _ => self.samples(TABLE_CELLS),
        };
        for (t, h) in rows {
            let _ = writeln!(out, "{t} {h}");
        }
        out
    }

    /// Parses the text form into a sampled density.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hl, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: hl + 1,
                msg: "header must be `D N form`".into(),
            });
        }
        let d: f64 = parse_num(fields[0], hl)?;
        let n: f64 = parse_num(fields[1], hl)?;
        if !matches!(fields[2], "model" | "sine-power" | "grid") {
            return Err(Error::Parse {
                line: hl + 1,
                msg: format!("unknown form `{}`", fields[2]),
            });
        }
        let mut ts = Vec::new();
        let mut hs = Vec::new();
        for (i, line) in lines {
            let mut it = line.split_whitespace();
            let (Some(t), Some(h), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "expected `t h`".into(),
                });
            };
            ts.push(parse_num(t, i)?);
            hs.push(parse_num(h, i)?);
        }
        let out = Self::from_samples(n, ts, hs)?;
        if (out.d - d).abs() > 1e-9 * d.max(1.0) {
            return Err(Error::Parse {
                line: hl + 1,
                msg: format!("header domain {d} disagrees with samples ({})", out.d),
            });
        }
        Ok(out)
    }
}

fn parse_num(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse {
        line: line + 1,
        msg: format!("not a number: `{s}`"),
    })
}

fn check_window(n: f64, d: f64, xi: f64) -> Result<()> {
    if !(n > 1.0) {
        return Err(Error::InvalidParameter(format!("N must exceed 1, got {n}")));
    }
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

/// Index `j` with `ts[j] ≤ t < ts[j+1]`, clamped to the last cell.
fn locate(ts: &[f64], t: f64) -> usize {
    ts.partition_point(|x| *x <= t)
        .saturating_sub(1)
        .min(ts.len() - 2)
}

/// Outcome of the CD(K,N) density test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdReport {
    pub ok: bool,
    /// Largest excess of the right-hand side over the left in the synthetic
    /// inequality, measured on `h^{1/(N−1)}`.
    pub worst_violation: f64,
    /// `(x₀, x₁, t)` attaining `worst_violation`.
    pub worst_at: (f64, f64, f64),
    /// Largest `(h^{1/(N−1)})'' + K/(N−1) h^{1/(N−1)}` for closed forms.
    pub differential_worst: Option<f64>,
}

/// Number of cells on which closed forms are sampled for the pair sweep.
pub const CD_CHECK_CELLS: usize = 512;

/// Tests the synthetic CD(K,N) inequality on all grid pairs with midpoint
/// parameters `1/4, 1/2, 3/4`, plus the differential form for closed forms.
pub fn is_cd_density(h: &Density1D, params: &CurvatureParams, tol: f64) -> Result<CdReport> {
    if !(h.d > 0.0) {
        return Err(Error::DegenerateDomain(format!("domain length {}", h.d)));
    }
    let p = 1.0 / (params.n - 1.0);
    let xs: Vec<f64> = match &h.form {
        DensityForm::Grid { ts, .. } => ts.clone(),
        _ => h
            .samples(CD_CHECK_CELLS)
            .into_iter()
            .map(|(t, _)| t)
            .collect(),
    };
    let gs: Vec<f64> = xs.iter().map(|x| h.eval(*x).powf(p)).collect();
    let dim = params.n - 1.0;
    let mut worst = (f64::NEG_INFINITY, (0.0, 0.0, 0.0));
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            let theta = xs[j] - xs[i];
            for t in [0.25, 0.5, 0.75] {
                let lhs = h.eval((1.0 - t) * xs[i] + t * xs[j]).powf(p);
                let rhs = sigma_raw(t, theta, params.k, dim).mul_nonneg(gs[j]);
                let rhs0 = sigma_raw(1.0 - t, theta, params.k, dim).mul_nonneg(gs[i]);
                let excess = match (rhs, rhs0) {
                    (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a + b - lhs,
                    _ => f64::INFINITY,
                };
                if excess > worst.0 {
                    worst = (excess, (xs[i], xs[j], t));
                }
            }
        }
    }
    let differential_worst = if h.is_closed_form() {
        let step = 1e-3;
        let c = params.k / (params.n - 1.0);
        let g = |t: f64| h.eval(t).powf(p);
        let mut dw = f64::NEG_INFINITY;
        for &t in &xs {
            if t - 2.0 * step <= 0.0 || t + 2.0 * step >= h.d {
                continue;
            }
            let second = (-g(t + 2.0 * step) + 16.0 * g(t + step) - 30.0 * g(t)
                + 16.0 * g(t - step)
                - g(t - 2.0 * step))
                / (12.0 * step * step);
            dw = dw.max(second + c * g(t));
        }
        Some(dw)
    } else {
        None
    };
    let ok = worst.0 <= tol && differential_worst.is_none_or(|w| w <= tol);
    Ok(CdReport {
        ok,
        worst_violation: worst.0,
        worst_at: worst.1,
        differential_worst,
    })
}

/// Tolerance used by the comparison estimates, relative to the compared values.
pub const BOUND_TOL: f64 = 1e-9;

/// A quantity together with the model bounds it must respect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
    pub value: f64,
    pub satisfied: bool,
}

impl Bracket {
    fn new(lower: f64, upper: f64, value: f64) -> Self {
        let mut b = Bracket {
            lower,
            upper,
            value,
            satisfied: true,
        };
        b.satisfied = b.violation() <= BOUND_TOL;
        b
    }

    /// Relative amount by which `value` leaves `[lower, upper]`; nonpositive
    /// when inside.
    pub fn violation(&self) -> f64 {
        let below = (self.lower - self.value) / self.lower.abs().max(1.0);
        let above = (self.value - self.upper) / self.upper.abs().max(1.0);
        below.max(above)
    }
}

fn model_for(h: &Density1D) -> ModelDensity {
    ModelDensity {
        n: h.n,
        omega: omega(h.n),
    }
}

/// Ratio comparison `h_N(t+s+ε)/h_N(t+ε) ≤ h(t+s)/h(t) ≤ h_N(t+s)/h_N(t)`.
pub fn density_ratio_bounds(h: &Density1D, t: f64, s: f64) -> Result<Bracket> {
    if !(t > 0.0 && s > 0.0) {
        return Err(Error::OutOfDomain(format!(
            "need 0 < t and 0 < s, got t={t}, s={s}"
        )));
    }
    if t + s > h.d * (1.0 + 1e-15) {
        return Err(Error::OutOfDomain(format!(
            "t+s = {} exceeds D = {}",
            t + s,
            h.d
        )));
    }
    let m = model_for(h);
    let eps = PI - h.d;
    let lower = m.eval(t + s + eps) / m.eval(t + eps);
    let upper = m.eval(t + s) / m.eval(t);
    Ok(Bracket::new(lower, upper, h.eval(t + s) / h.eval(t)))
}

/// Two-sided estimate of `h(t)` by the model density with prefactors
/// `ω/(ωλ_D + ε)` and `ω/(ω − ε)`.
pub fn density_sandwich(h: &Density1D, t: f64, lambda_d: f64) -> Result<Bracket> {
    if !(t > 0.0 && t < h.d) {
        return Err(Error::OutOfDomain(format!("t = {t} outside (0, {})", h.d)));
    }
    let m = model_for(h);
    let eps = PI - h.d;
    let (a, b) = (m.eval(t), m.eval(t + eps));
    let lower = m.omega / (m.omega * lambda_d + eps) * a.min(b);
    let upper = m.omega / (m.omega - eps) * a.max(b);
    Ok(Bracket::new(lower, upper, h.eval(t)))
}

/// Model bracket for the logarithmic derivative of `h` at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDerivativeBounds {
    pub lower: f64,
    pub upper: f64,
    /// `max(|lower|, |upper|)` times the upper sandwich value.
    pub lipschitz: f64,
}

pub fn log_derivative_bounds(h: &Density1D, t: f64) -> Result<LogDerivativeBounds> {
    if !(t > 0.0 && t < h.d) {
        return Err(Error::OutOfDomain(format!("t = {t} outside (0, {})", h.d)));
    }
    let eps = PI - h.d;
    let lower = (h.n - 1.0) / (t + eps).tan();
    let upper = (h.n - 1.0) / t.tan();
    let m = model_for(h);
    let sandwich_upper = m.omega / (m.omega - eps) * m.eval(t).max(m.eval(t + eps));
    Ok(LogDerivativeBounds {
        lower,
        upper,
        lipschitz: lower.abs().max(upper.abs()) * sandwich_upper,
    })
}

/// Location of the maximum and the monotonicity verdict around it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxReport {
    pub x0: f64,
    pub monotone_ok: bool,
    /// The maximum is attained on more than two adjacent cells.
    pub flat: bool,
}

/// Finds the maximum of `h` and checks strict monotonicity on either side.
pub fn unique_max(h: &Density1D) -> MaxReport {
    let samples = h.samples(TABLE_CELLS);
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let k = values.iter().position(|v| *v == top).unwrap();
    let tie_tol = 1e-14 * top.max(1.0);
    let ties = values
        .iter()
        .filter(|v| (top - **v).abs() <= tie_tol)
        .count();
    let flat = ties > 2;
    let dx = h.d / TABLE_CELLS as f64;
    let x0 = if h.is_closed_form() {
        // The logarithmic derivative of a CD density is decreasing; its sign
        // change locates the maximum to full precision.
        let inner = 1e-12 * h.d;
        if h.log_derivative(inner) <= 0.0 {
            0.0
        } else if h.log_derivative(h.d - inner) >= 0.0 {
            h.d
        } else {
            bisect_increasing(|x| -h.log_derivative(x), 0.0, inner, h.d - inner)
        }
    } else {
        samples[k].0
    };
    let mut monotone_ok = true;
    for i in 0..TABLE_CELLS {
        let (a, b) = (values[i], values[i + 1]);
        let mid = 0.5 * (samples[i].0 + samples[i + 1].0);
        if (mid - x0).abs() <= dx {
            continue;
        }
        let increasing_side = mid < x0;
        if (increasing_side && b < a - tie_tol) || (!increasing_side && b > a + tie_tol) {
            monotone_ok = false;
        }
    }
    MaxReport {
        x0,
        monotone_ok,
        flat,
    }
}

/// Sine-power terms of the random CD family on `[0, π − ε]`: up to three
/// factors with amplitudes in `[0.5, 1.5]` and phases in `[0, ε]`.
pub fn random_terms<R: Rng + ?Sized>(rng: &mut R, eps: f64) -> Vec<SineTerm> {
    let count = rng.gen_range(1..=3);
    (0..count)
        .map(|_| SineTerm {
            amp: rng.gen_range(0.5..=1.5),
            phase: rng.gen::<f64>() * eps,
        })
        .collect()
}

/// A random CD(N−1,N) density on `[0, π − ε]`.
pub fn random_cd_density<R: Rng + ?Sized>(rng: &mut R, n: f64, eps: f64) -> Result<Density1D> {
    if !(eps > 0.0 && eps < PI) {
        return Err(Error::InvalidParameter(format!(
            "ε must lie in (0, π), got {eps}"
        )));
    }
    Density1D::sine_power(n, PI - eps, random_terms(rng, eps))
}
