//! Quadrature and scalar root-finding helpers.

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (b - a) < 1e-13 {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Composite Simpson rule on uniformly spaced samples. An even number of
/// samples gets a trapezoid on the last cell.
pub fn simpson_uniform(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let cells = n - 1;
    let even_cells = cells - cells % 2;
    let mut s = 0.0;
    for k in (0..even_cells).step_by(2) {
        s += values[k] + 4.0 * values[k + 1] + values[k + 2];
    }
    s *= dx / 3.0;
    if cells % 2 == 1 {
        s += 0.5 * dx * (values[n - 2] + values[n - 1]);
    }
    s
}

/// Bisection for an increasing function: the `x` in `[lo, hi]` with
/// `f(x) = target`, iterated until the bracket stops shrinking.
pub fn bisect_increasing<F: Fn(f64) -> f64>(f: F, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Safeguarded Newton iteration for `cdf(x) = target` on `[lo, hi]`, where
/// `cdf` is increasing with derivative `pdf`. Falls back to bisection
/// whenever a Newton step leaves the bracket.
pub fn invert_monotone<F, G>(cdf: F, pdf: G, target: f64, mut lo: f64, mut hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = cdf(x) - target;
        if r == 0.0 {
            return x;
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
        let p = pdf(x);
        let newton = if p > 0.0 { x - r / p } else { f64::NAN };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x {
            break;
        }
        x = next;
    }
    x
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
/// Returns `(argmin, min)`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    let mut best = (x, fx);
    for (xx, ff) in [(c, fc), (d, fd)] {
        if ff < best.1 {
            best = (xx, ff);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn adaptive_simpson_integrates_sine() {
        let v = adaptive_simpson(&|t: f64| t.sin(), 0.0, PI, 1e-13);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn adaptive_simpson_handles_sqrt_endpoint() {
        // ∫₀^π sin^{1/2} = √π Γ(3/4)/Γ(5/4)
        let v = adaptive_simpson(&|t: f64| t.sin().sqrt(), 0.0, PI, 1e-13);
        assert!((v - 2.396_280_469_471_184).abs() < 1e-9, "{v}");
    }

    #[test]
    fn simpson_uniform_is_exact_for_cubics() {
        let n = 11;
        let dx = 0.1;
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 * dx).powi(3)).collect();
        assert!((simpson_uniform(&vals, dx) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn golden_min_finds_parabola_vertex() {
        let (x, fx) = golden_min(|x| (x - 0.3) * (x - 0.3) + 1.0, 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-14);
    }

    #[test]
    fn newton_inverts_cosine_cdf() {
        let x = invert_monotone(|x: f64| 1.0 - x.cos(), |x: f64| x.sin(), 0.5, 0.0, PI);
        assert!((x - PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn bisection_inverts_monotone_map() {
        let x = bisect_increasing(|x| x * x * x, 0.125, 0.0, 1.0);
        assert!((x - 0.5).abs() < 1e-15);
    }
}
