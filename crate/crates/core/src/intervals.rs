//! Finite unions of closed intervals in `[0, D]`: volume, perimeter,
//! symmetric difference, and exhaustive search for perimeter minimizers.

use crate::density1d::Density1D;
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::profile::{profile_of, quantile_radii};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Canonical disjoint, sorted, non-touching intervals inside `[0, D]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    d: f64,
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    /// Canonicalizes: clips to `[0, D]`, sorts, drops empty pieces and merges
    /// pieces that overlap or touch.
    pub fn new(d: f64, raw: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::with_merge_gap(d, raw, 0.0)
    }

    /// As [`IntervalSet::new`], also merging pieces separated by gaps of at
    /// most `gap` (one grid cell, typically).
    pub fn with_merge_gap(
        d: f64,
        raw: impl IntoIterator<Item = (f64, f64)>,
        gap: f64,
    ) -> Result<Self> {
        if !(d > 0.0) {
            return Err(Error::DegenerateDomain(format!("domain length {d}")));
        }
        let mut pieces: Vec<(f64, f64)> = Vec::new();
        for (a, b) in raw {
            if !(a.is_finite() && b.is_finite()) || b < a {
                return Err(Error::InvalidParameter(format!(
                    "malformed interval ({a}, {b})"
                )));
            }
            let (a, b) = (a.max(0.0), b.min(d));
            if b > a {
                pieces.push((a, b));
            }
        }
        pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
        for (a, b) in pieces {
            match merged.last_mut() {
                Some(last) if a <= last.1 + gap => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(IntervalSet {
            d,
            intervals: merged,
        })
    }

    pub fn empty(d: f64) -> Result<Self> {
        Self::new(d, [])
    }

    pub fn whole(d: f64) -> Result<Self> {
        Self::new(d, [(0.0, d)])
    }

    pub fn domain(&self) -> f64 {
        self.d
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn complement(&self) -> IntervalSet {
        let mut out = Vec::new();
        let mut cursor = 0.0;
        for &(a, b) in &self.intervals {
            if a > cursor {
                out.push((cursor, a));
            }
            cursor = b;
        }
        if cursor < self.d {
            out.push((cursor, self.d));
        }
        IntervalSet {
            d: self.d,
            intervals: out,
        }
    }

    /// Boundary points strictly inside `(0, D)`.
    pub fn interior_boundary(&self) -> Vec<f64> {
        let tol = 1e-12 * self.d;
        self.intervals
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .filter(|x| *x > tol && *x < self.d - tol)
            .collect()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= t && t <= b)
    }

    /// `a₁ b₁; a₂ b₂; …`
    pub fn to_text(&self) -> String {
        let parts: Vec<String> = self
            .intervals
            .iter()
            .map(|(a, b)| format!("{a} {b}"))
            .collect();
        parts.join("; ")
    }

    pub fn from_text(d: f64, text: &str) -> Result<Self> {
        let mut raw = Vec::new();
        for (i, part) in text.split(';').enumerate() {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let nums: Vec<&str> = part.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line: 1,
                    msg: format!("interval {}: bad number `{s}`", i + 1),
                })
            };
            if nums.len() != 2 {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("interval {} needs two endpoints", i + 1),
                });
            }
            raw.push((parse(nums[0])?, parse(nums[1])?));
        }
        Self::new(d, raw)
    }
}

/// Region in which a relative perimeter is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Window {
    Whole,
    /// The open interval `(a, b)`.
    Open(f64, f64),
}

/// Mass of `E` under `h`.
pub fn volume(h: &Density1D, e: &IntervalSet) -> f64 {
    e.intervals.iter().map(|&(a, b)| h.mass(a, b)).sum()
}

/// Sum of `h` over the interior boundary points of `E` in `window`.
pub fn perimeter_1d(h: &Density1D, e: &IntervalSet, window: Window) -> f64 {
    e.interior_boundary()
        .into_iter()
        .filter(|x| match window {
            Window::Whole => true,
            Window::Open(a, b) => *x > a && *x < b,
        })
        .map(|x| h.eval(x))
        .sum()
}

/// Mass of `E Δ F`.
pub fn sym_diff_volume(h: &Density1D, e: &IntervalSet, f: &IntervalSet) -> f64 {
    let mut cuts: Vec<f64> = e
        .intervals
        .iter()
        .chain(f.intervals.iter())
        .flat_map(|&(a, b)| [a, b])
        .collect();
    cuts.push(0.0);
    cuts.push(e.d.max(f.d));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .filter(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            e.contains(mid) != f.contains(mid)
        })
        .map(|w| h.mass(w[0], w[1]))
        .sum()
}

/// Outcome of the exhaustive minimizer search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub best: IntervalSet,
    pub p_min: f64,
    /// `I_h(v)`, the perimeter of the better one-sided interval.
    pub profile: f64,
    /// Smallest deficit `P − I_h(v)` over all configurations; pruned ones
    /// have perimeter at least `p_min`, so evaluating them cannot lower it.
    pub min_deficit: f64,
    /// Configurations evaluated after pruning.
    pub configurations: u64,
}

impl BruteForceResult {
    /// Whether the optimum is `[0, r⁻]` or `[r⁺, D]` up to `cells` grid cells.
    pub fn is_one_sided(&self, h: &Density1D, v: f64, cells: f64, grid: usize) -> bool {
        let tol = cells * h.domain() / grid as f64;
        let iv = self.best.intervals();
        if iv.len() != 1 {
            return false;
        }
        let Ok(r) = quantile_radii(h, v) else {
            return false;
        };
        let (a, b) = iv[0];
        (a <= tol && (b - r.r_minus).abs() <= tol)
            || ((a - r.r_plus).abs() <= tol && b >= h.domain() - tol)
    }
}

/// Configuration budget of [`brute_force_min`].
pub const BRUTE_FORCE_BUDGET: u64 = 100_000_000;

struct Search<'a> {
    h: &'a Density1D,
    v: f64,
    grid: usize,
    ts: Vec<f64>,
    cum: Vec<f64>,
    hv: Vec<f64>,
    profile: f64,
}

#[derive(Clone)]
struct Best {
    p: f64,
    endpoints: Vec<f64>,
    min_deficit: f64,
    count: u64,
}

impl Best {
    fn offer(&mut self, p: f64, endpoints: &[f64], profile: f64) {
        self.count += 1;
        self.min_deficit = self.min_deficit.min(p - profile);
        if p < self.p || (p == self.p && lex_less(endpoints, &self.endpoints)) {
            self.p = p;
            self.endpoints = endpoints.to_vec();
        }
    }

    fn absorb(&mut self, other: Best) {
        self.count += other.count;
        self.min_deficit = self.min_deficit.min(other.min_deficit);
        if other.p < self.p || (other.p == self.p && lex_less(&other.endpoints, &self.endpoints)) {
            self.p = other.p;
            self.endpoints = other.endpoints;
        }
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x < y;
        }
    }
    a.len() < b.len()
}

impl Search<'_> {
    fn perim(&self, x: f64) -> f64 {
        let d = self.h.domain();
        if x <= 1e-12 * d || x >= d * (1.0 - 1e-12) {
            0.0
        } else {
            self.h.eval(x)
        }
    }

    /// Least perimeter at the point where the cumulative mass reaches `m`: a
    /// unimodal density is smallest at an end of the grid cell holding it.
    fn floor_at(&self, m: f64) -> f64 {
        let k = self.cum.partition_point(|c| *c <= m).clamp(1, self.grid) - 1;
        self.hv[k].min(self.hv[k + 1])
    }

    /// Closes the configuration with a final interval `[a, D]`, `a` solved.
    fn leaf_to_end(&self, ends: &mut Vec<f64>, mass: f64, perim: f64, best: &mut Best) {
        if perim + self.floor_at(self.h.total_mass() - (self.v - mass)) >= best.p {
            return;
        }
        let a = self.h.upper_quantile(self.v - mass);
        if ends.last().is_some_and(|&prev| a <= prev) {
            return;
        }
        ends.extend([a, self.h.domain()]);
        best.offer(perim + self.perim(a), ends, self.profile);
        ends.truncate(ends.len() - 2);
    }

    /// Every configuration whose next left endpoint is grid node `j`, with at
    /// most `left` intervals still to place.
    fn open_at(
        &self,
        j: usize,
        left: usize,
        ends: &mut Vec<f64>,
        mass: f64,
        perim: f64,
        best: &mut Best,
    ) {
        let pj = perim + self.hv[j];
        if pj >= best.p || best.count > BRUTE_FORCE_BUDGET {
            return;
        }
        ends.push(self.ts[j]);
        let target = self.cum[j] + self.v - mass;
        if target <= self.h.total_mass() && pj + self.floor_at(target) < best.p {
            let b = self.h.quantile(target);
            if b > self.ts[j] {
                ends.push(b);
                best.offer(pj + self.perim(b), ends, self.profile);
                ends.pop();
            }
        }
        if left > 1 {
            for jr in (j + 1)..self.grid {
                let m = mass + self.cum[jr] - self.cum[j];
                if m >= self.v {
                    break;
                }
                let pr = pj + self.hv[jr];
                if pr >= best.p {
                    continue;
                }
                ends.push(self.ts[jr]);
                self.leaf_to_end(ends, m, pr, best);
                for jn in (jr + 1)..self.grid {
                    self.open_at(jn, left - 1, ends, m, pr, best);
                }
                ends.pop();
            }
        }
        ends.pop();
    }
}

/// Exhaustive search over sets of at most `k_max` intervals with grid
/// endpoints (the last endpoint solved for volume `v`), returning the
/// minimum-perimeter configuration.
pub fn brute_force_min(
    h: &Density1D,
    v: f64,
    k_max: usize,
    grid: usize,
) -> Result<BruteForceResult> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "volume must lie in (0,1), got {v}"
        )));
    }
    if k_max == 0 || k_max > 3 {
        return Err(Error::InvalidParameter(format!(
            "k_max must be 1, 2 or 3, got {k_max}"
        )));
    }
    if !(2..=400).contains(&grid) {
        return Err(Error::InvalidParameter(format!(
            "grid must have 2..=400 cells, got {grid}"
        )));
    }
    let d = h.domain();
    let ts: Vec<f64> = (0..=grid)
        .map(|i| {
            if i == grid {
                d
            } else {
                d * i as f64 / grid as f64
            }
        })
        .collect();
    let cum: Vec<f64> = ts.iter().map(|t| h.cdf(*t)).collect();
    let mut hv: Vec<f64> = ts.iter().map(|t| h.eval(*t)).collect();
    hv[0] = 0.0;
    hv[grid] = 0.0;
    let profile = profile_of(h, v)?;
    let search = Search {
        h,
        v,
        grid,
        ts,
        cum,
        hv,
        profile,
    };

    // Seeding with both one-sided sets makes pruning effective immediately.
    let r = quantile_radii(h, v)?;
    let mut seed = Best {
        p: f64::INFINITY,
        endpoints: Vec::new(),
        min_deficit: f64::INFINITY,
        count: 0,
    };
    seed.offer(search.perim(r.r_minus), &[0.0, r.r_minus], profile);
    search.leaf_to_end(&mut Vec::new(), 0.0, 0.0, &mut seed);

    let parts: Vec<Best> = (0..grid)
        .into_par_iter()
        .map(|j| {
            let mut best = Best {
                count: 0,
                ..seed.clone()
            };
            search.open_at(
                j,
                k_max,
                &mut Vec::with_capacity(2 * k_max),
                0.0,
                0.0,
                &mut best,
            );
            best
        })
        .collect();
    let mut best = seed;
    for part in parts {
        best.absorb(part);
    }
    if best.count > BRUTE_FORCE_BUDGET {
        return Err(Error::BudgetExceeded(best.count));
    }
    let set = IntervalSet::new(d, best.endpoints.chunks(2).map(|c| (c[0], c[1])))?;
    Ok(BruteForceResult {
        best: set,
        p_min: best.p,
        profile,
        min_deficit: best.min_deficit,
        configurations: best.count,
    })
}

/// Stability ratio `(P − I_h(v)) / min{m(E Δ [0,r⁻]), m(E Δ [r⁺,D])}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantRatio {
    pub ratio: ExtendedReal,
    pub numerator: f64,
    pub denominator: f64,
}

/// Denominators below this mass mark optimal sets.
pub const RATIO_SENTINEL_MASS: f64 = 1e-12;

pub fn quantitative_ratio(h: &Density1D, e: &IntervalSet) -> Result<QuantRatio> {
    let v = volume(h, e);
    let r = quantile_radii(h, v)?;
    let d = h.domain();
    let numerator = perimeter_1d(h, e, Window::Whole) - profile_of(h, v)?;
    let south = IntervalSet::new(d, [(0.0, r.r_minus)])?;
    let north = IntervalSet::new(d, [(r.r_plus, d)])?;
    let denominator = sym_diff_volume(h, e, &south).min(sym_diff_volume(h, e, &north));
    let ratio = if denominator < RATIO_SENTINEL_MASS {
        ExtendedReal::PosInfinity
    } else {
        ExtendedReal::Finite(numerator / denominator)
    };
    Ok(QuantRatio {
        ratio,
        numerator,
        denominator,
    })
}

/// A random set of at most three intervals with grid endpoints and volume
/// exactly `v` (last endpoint solved). Returns `None` for infeasible draws.
pub fn random_admissible_set<R: Rng + ?Sized>(
    h: &Density1D,
    v: f64,
    grid: usize,
    rng: &mut R,
) -> Option<IntervalSet> {
    let d = h.domain();
    let k = rng.gen_range(1..=3usize);
    let mut idx: Vec<usize> = Vec::with_capacity(2 * k);
    while idx.len() < 2 * k - 1 {
        let i = rng.gen_range(0..grid);
        if !idx.contains(&i) {
            idx.push(i);
        }
    }
    idx.sort_unstable();
    if rng.gen_bool(0.5) {
        idx[0] = 0;
        idx.dedup();
        if idx.len() < 2 * k - 1 {
            return None;
        }
    }
    let mut ends: Vec<f64> = idx.iter().map(|&i| d * i as f64 / grid as f64).collect();
    let mut mass = 0.0;
    for pair in ends.chunks(2) {
        if pair.len() == 2 {
            mass += h.mass(pair[0], pair[1]);
        }
    }
    let last_left = *ends.last().unwrap();
    let rem = v - mass;
    if rem <= 0.0 {
        return None;
    }
    let target = h.cdf(last_left) + rem;
    if target >= h.total_mass() {
        return None;
    }
    ends.push(h.quantile(target));
    IntervalSet::new(d, ends.chunks(2).map(|c| (c[0], c[1]))).ok()
}

/// Result of evaluating a set of the shape `[0, α] ∪ (β, r⁻ + γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProofFamilyCheck {
    pub ratio: f64,
    /// `h(β)(1 − βC) / (2∫_α^β h)` with `C` a Lipschitz bound of `I_h` near `v`.
    pub bound: f64,
    pub gamma: f64,
}

/// Builds `[0, α] ∪ (β, r⁻ + γ)` with `γ` restoring volume `v`, and compares
/// its stability ratio with the lower bound of the cut-and-shift argument.
pub fn proof_family_check(
    h: &Density1D,
    v: f64,
    alpha: f64,
    beta: f64,
) -> Result<ProofFamilyCheck> {
    if !(0.0 < alpha && alpha < beta) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < α < β, got α={alpha}, β={beta}"
        )));
    }
    let r = quantile_radii(h, v)?;
    if beta >= r.r_minus {
        return Err(Error::InvalidParameter(format!(
            "β = {beta} must lie below r⁻ = {}",
            r.r_minus
        )));
    }
    let removed = h.mass(alpha, beta);
    let end = h.quantile(h.cdf(r.r_minus) + removed);
    let e = IntervalSet::new(h.domain(), [(0.0, alpha), (beta, end)])?;
    let q = quantitative_ratio(h, &e)?;
    let spread = beta * h.eval(beta);
    let mut lip: f64 = 0.0;
    for i in 0..=16 {
        let w = (v - spread + 2.0 * spread * i as f64 / 16.0).clamp(1e-9, 1.0 - 1e-9);
        let rr = quantile_radii(h, w)?;
        for x in [rr.r_minus, rr.r_plus] {
            lip = lip.max(h.log_derivative(x).abs());
        }
    }
    let bound = h.eval(beta) * (1.0 - beta * lip) / (2.0 * removed);
    Ok(ProofFamilyCheck {
        ratio: q.ratio.finite().unwrap_or(f64::INFINITY),
        bound,
        gamma: end - r.r_minus,
    })
}

/// CSV with header `v,eps,ratio_min,argmin_set`.
pub fn sweep_csv(rows: &[(f64, f64, f64, IntervalSet)]) -> String {
    let mut out = String::from("v,eps,ratio_min,argmin_set\n");
    for (v, eps, ratio, set) in rows {
        let _ = writeln!(out, "{v},{eps},{ratio},\"{}\"", set.to_text());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn h2() -> Density1D {
        Density1D::model(2.0).unwrap()
    }

    #[test]
    fn canonicalization_merges_and_clips() {
        let e = IntervalSet::new(3.0, [(2.0, 4.0), (0.5, 1.0), (0.9, 1.5), (-1.0, 0.2)]).unwrap();
        assert_eq!(e.intervals(), &[(0.0, 0.2), (0.5, 1.5), (2.0, 3.0)]);
        let g = IntervalSet::with_merge_gap(3.0, [(0.0, 1.0), (1.05, 2.0)], 0.1).unwrap();
        assert_eq!(g.intervals(), &[(0.0, 2.0)]);
        assert!(IntervalSet::new(3.0, [(2.0, 1.0)]).is_err());
    }

    #[test]
    fn volume_examples() {
        let h = h2();
        assert_abs_diff_eq!(
            volume(&h, &IntervalSet::whole(PI).unwrap()),
            1.0,
            epsilon = 1e-14
        );
        assert_eq!(volume(&h, &IntervalSet::empty(PI).unwrap()), 0.0);
        assert_abs_diff_eq!(
            volume(&h, &IntervalSet::new(PI, [(0.0, PI / 2.0)]).unwrap()),
            0.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn perimeter_examples() {
        let h = h2();
        let r = h.quantile(0.3);
        let e = IntervalSet::new(PI, [(0.0, r)]).unwrap();
        assert_abs_diff_eq!(
            perimeter_1d(&h, &e, Window::Whole),
            (0.21f64).sqrt(),
            epsilon = 1e-12
        );
        let mid = IntervalSet::new(PI, [(0.5, 1.5)]).unwrap();
        assert_abs_diff_eq!(
            perimeter_1d(&h, &mid, Window::Whole),
            h.eval(0.5) + h.eval(1.5),
            epsilon = 1e-15
        );
        assert_eq!(perimeter_1d(&h, &e, Window::Open(r + 0.1, PI)), 0.0);
        assert_abs_diff_eq!(
            perimeter_1d(&h, &mid.complement(), Window::Whole),
            perimeter_1d(&h, &mid, Window::Whole)
        );
    }

    #[test]
    fn sym_diff_examples() {
        let h = h2();
        let e = IntervalSet::new(PI, [(0.0, 1.0), (2.0, 2.5)]).unwrap();
        let f = IntervalSet::new(PI, [(0.5, 2.2)]).unwrap();
        assert_eq!(sym_diff_volume(&h, &e, &e), 0.0);
        let inter = IntervalSet::new(PI, [(0.5, 1.0), (2.0, 2.2)]).unwrap();
        let expect = volume(&h, &e) + volume(&h, &f) - 2.0 * volume(&h, &inter);
        assert_abs_diff_eq!(sym_diff_volume(&h, &e, &f), expect, epsilon = 1e-14);
        assert_abs_diff_eq!(
            sym_diff_volume(&h, &e, &f),
            sym_diff_volume(&h, &f, &e),
            epsilon = 1e-15
        );
    }

    #[test]
    fn brute_force_half_volume() {
        let h = h2();
        let r = brute_force_min(&h, 0.5, 1, 100).unwrap();
        assert!((r.p_min - 0.5).abs() < 1e-3);
        assert!(r.is_one_sided(&h, 0.5, 2.0, 100));
        assert!(r.min_deficit >= -1e-9);
    }

    #[test]
    fn brute_force_collapses_to_one_interval() {
        let h = h2();
        let r = brute_force_min(&h, 0.2, 3, 60).unwrap();
        assert!(r.is_one_sided(&h, 0.2, 2.0, 60), "{r:?}");
        assert!(r.min_deficit >= -1e-9);
    }

    #[test]
    fn brute_force_rejects_large_grids() {
        assert!(brute_force_min(&h2(), 0.2, 3, 401).is_err());
        assert!(brute_force_min(&h2(), 0.2, 4, 100).is_err());
    }

    #[test]
    fn ratio_sentinel_at_optimum() {
        let h = h2();
        let e = IntervalSet::new(PI, [(0.0, h.quantile(0.3))]).unwrap();
        assert!(quantitative_ratio(&h, &e).unwrap().ratio.is_infinite());
    }

    #[test]
    fn text_round_trip() {
        let e = IntervalSet::new(3.0, [(0.0, 0.5), (1.0, 2.25)]).unwrap();
        assert_eq!(IntervalSet::from_text(3.0, &e.to_text()).unwrap(), e);
    }
}
