use lgq_core::density1d::Density1D;
use lgq_core::intervals::{perimeter_1d, sym_diff_volume, volume, IntervalSet, Window};
use lgq_core::localize::{markov_bound, PerimeterModel};
use lgq_core::profile::model_profile;
use lgq_core::spaces::make_sphere2;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn interval_set(d: f64) -> impl Strategy<Value = IntervalSet> {
    prop::collection::vec((0.0..1.0f64, 0.0..0.3f64), 0..5).prop_map(move |raw| {
        IntervalSet::new(d, raw.into_iter().map(|(a, l)| (a * d, (a + l) * d))).unwrap()
    })
}

fn density() -> impl Strategy<Value = Density1D> {
    (2.0..6.0f64, 0.5..PI, 0.0..1.0f64)
        .prop_map(|(n, d, s)| Density1D::window(n, d, s * (PI - d)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sym_diff_is_a_pseudometric(
        h in density(),
        seeds in prop::collection::vec(prop::collection::vec((0.0..1.0f64, 0.0..0.3f64), 0..5), 3),
    ) {
        let d = h.domain();
        let sets: Vec<IntervalSet> = seeds
            .into_iter()
            .map(|raw| IntervalSet::new(d, raw.into_iter().map(|(a, l)| (a * d, (a + l) * d))).unwrap())
            .collect();
        let (e, f, g) = (&sets[0], &sets[1], &sets[2]);
        prop_assert!(sym_diff_volume(&h, e, e).abs() <= 1e-12);
        prop_assert!((sym_diff_volume(&h, e, f) - sym_diff_volume(&h, f, e)).abs() <= 1e-12);
        prop_assert!(sym_diff_volume(&h, e, g) <= sym_diff_volume(&h, e, f) + sym_diff_volume(&h, f, g) + 1e-12);
        prop_assert!((sym_diff_volume(&h, e, &e.complement()) - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn complement_keeps_perimeter_and_splits_volume(h in density(), s in 0.0..1.0f64, raw in prop::collection::vec((0.0..1.0f64, 0.0..0.3f64), 0..5)) {
        let d = h.domain();
        let e = IntervalSet::new(d, raw.into_iter().map(|(a, l)| (a * d, (a + l) * d))).unwrap();
        let c = e.complement();
        prop_assert!((perimeter_1d(&h, &e, Window::Whole) - perimeter_1d(&h, &c, Window::Whole)).abs() <= 1e-12);
        let window = Window::Open(s * d * 0.5, d * (0.5 + 0.5 * s));
        prop_assert!((perimeter_1d(&h, &e, window) - perimeter_1d(&h, &c, window)).abs() <= 1e-12);
        prop_assert!((volume(&h, &e) + volume(&h, &c) - 1.0).abs() <= 1e-9);
        prop_assert_eq!(c.complement(), e);
    }

    #[test]
    fn interval_text_round_trip(e in interval_set(2.5)) {
        let back = IntervalSet::from_text(2.5, &e.to_text()).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn quantile_inverts_cdf(h in density(), m in 0.0..1.0f64) {
        let t = h.quantile(m);
        prop_assert!(t >= 0.0 && t <= h.domain());
        prop_assert!((h.cdf(t) - m).abs() <= 1e-8);
        prop_assert!(h.cdf(t * 0.5) <= h.cdf(t) + 1e-15);
    }

    #[test]
    fn markov_inequality_holds(
        data in prop::collection::vec((0.0..=1.0f64, 0.01..1.0f64), 1..40),
        a in 0.0..0.99f64,
    ) {
        let (f, w): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
        let r = markov_bound(&f, &w, a).unwrap();
        prop_assert!(r.holds);
        prop_assert!(r.measured <= w.iter().sum::<f64>() + 1e-12);
    }

    #[test]
    fn shorter_models_have_larger_profiles(n in 2.0..5.0f64, d in 0.5..PI, v in 0.02..0.98f64) {
        let short = model_profile(n, d, v).unwrap();
        let full = model_profile(n, PI, v).unwrap();
        prop_assert!(short >= full - 1e-9, "{} < {}", short, full);
    }
}

fn sphere() -> &'static (lgq_core::localize::DiscreteSpace, PerimeterModel) {
    static SPHERE: OnceLock<(lgq_core::localize::DiscreteSpace, PerimeterModel)> = OnceLock::new();
    SPHERE.get_or_init(|| {
        let s = make_sphere2(300).unwrap();
        let m = PerimeterModel::calibrate(&s, |v| model_profile(2.0, PI, v).unwrap());
        (s, m)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn discrete_perimeter_is_symmetric_and_subadditive(
        a in prop::collection::vec(any::<bool>(), 300),
        b in prop::collection::vec(any::<bool>(), 300),
    ) {
        let (s, m) = sphere();
        let c: Vec<bool> = a.iter().map(|x| !x).collect();
        let pa = m.perimeter(s, &a, None);
        prop_assert!((pa - m.perimeter(s, &c, None)).abs() <= 1e-12 * pa.max(1.0));
        let union: Vec<bool> = a.iter().zip(&b).map(|(x, y)| *x || *y).collect();
        let inter: Vec<bool> = a.iter().zip(&b).map(|(x, y)| *x && *y).collect();
        let lhs = m.perimeter(s, &union, None) + m.perimeter(s, &inter, None);
        prop_assert!(lhs <= pa + m.perimeter(s, &b, None) + 1e-12);
        prop_assert!((s.mass(&union) + s.mass(&inter) - s.mass(&a) - s.mass(&b)).abs() <= 1e-12);
    }
}
