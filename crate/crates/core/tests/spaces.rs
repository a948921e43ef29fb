use lgq_core::density1d::Density1D;
use lgq_core::localize::space::{diameter_deficit, farthest_point, greedy_cap};
use lgq_core::localize::{DiscreteSpace, Geometry, PerimeterModel};
use lgq_core::profile::model_profile;
use lgq_core::spaces::*;
use std::f64::consts::PI;

fn model_i(v: f64) -> f64 {
    model_profile(2.0, PI, v).unwrap()
}

fn cap_perimeter_error(n: usize) -> f64 {
    let space = make_sphere2(n).unwrap();
    let model = PerimeterModel::calibrate(&space, model_i);
    let mut total = 0.0;
    let mut count = 0;
    for v in [0.1, 0.3, 0.5] {
        for c in 0..32 {
            let cap = make_cap_set(&space, (c * 97 + 5) % n, v).unwrap();
            total += (model.perimeter(&space, &cap.mask, None) - model_i(cap.mass)).abs();
            count += 1;
        }
    }
    total / count as f64
}

#[test]
fn cap_perimeters_refine() {
    let errors: Vec<f64> = [400, 800, 1500]
        .iter()
        .map(|&n| cap_perimeter_error(n))
        .collect();
    assert!(errors.iter().all(|e| *e <= 0.01), "{errors:?}");
    assert!(errors[2] < errors[0], "{errors:?}");
}

#[test]
fn sphere_mesh_and_diameter() {
    let s = make_sphere2(1500).unwrap();
    assert!(s.mesh() <= 0.12, "{}", s.mesh());
    assert!(diameter_deficit(&s) <= s.mesh());
    assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let far = farthest_point(&s, 0);
    assert!((s.d(0, far) - PI).abs() <= s.mesh());
}

#[test]
fn caps_approximate_geodesic_balls() {
    let s = make_sphere2(1500).unwrap();
    for (c, v) in [(0, 0.3), (700, 0.1), (1200, 0.5)] {
        let cap = make_cap_set(&s, c, v).unwrap();
        assert!(cap.mass >= v && cap.mass <= v + 1.0 / 1500.0 + 1e-12);
        // The exact cap of volume v on the unit sphere has radius acos(1 − 2v).
        let exact = s.ball(c, (1.0 - 2.0 * v).acos());
        assert!(
            s.sym_diff_mass(&cap.mask, &exact) <= 2.0 * s.mesh() * model_i(v),
            "cap at {c}"
        );
    }
}

#[test]
fn perturbed_caps_are_asymmetric() {
    let s = make_sphere2(1500).unwrap();
    let far = farthest_point(&s, 0);
    for blob in [0.01, 0.02, 0.04] {
        let e = make_perturbed_cap(&s, 0, 0.3, blob, far).unwrap();
        let best = (0..s.len())
            .step_by(7)
            .chain([0])
            .map(|c| s.sym_diff_mass(&e.mask, &greedy_cap(&s, c, e.mass).0))
            .fold(f64::INFINITY, f64::min);
        assert!(best >= 1.5 * blob, "blob {blob}: {best}");
        assert!(best <= 2.0 * blob + 0.01);
    }
    assert!(make_perturbed_cap(&s, 0, 0.3, 0.3, far).is_err());
    let near = (0..s.len())
        .min_by(|&a, &b| s.d(0, a).total_cmp(&s.d(0, b)).then(a.cmp(&b)))
        .unwrap();
    assert!(make_perturbed_cap(&s, 0, 0.3, 0.02, near).is_err());
}

#[test]
fn segment_weights_integrate_the_density() {
    for (xi, d) in [(0.0, PI), (0.3, 2.0)] {
        let s = make_segment(3.0, d, xi, 300).unwrap();
        let h = Density1D::window(3.0, d, xi).unwrap();
        let c = s.coords().unwrap();
        let mut acc = 0.0;
        for i in 0..s.len() {
            acc += s.weight(i);
            let end = if i + 1 < s.len() {
                0.5 * (c[i][0] + c[i + 1][0])
            } else {
                d
            };
            assert!((acc - h.cdf(end)).abs() <= 1e-9, "ξ={xi} at {i}");
        }
        assert!((s.diameter() - d).abs() < 1e-12);
        assert_eq!(
            PerimeterModel::calibrate(&s, model_i),
            PerimeterModel::Chain
        );
    }
}

#[test]
fn chain_perimeter_of_a_prefix_is_the_density() {
    let s = make_segment(2.0, PI, 0.0, 400).unwrap();
    let h = Density1D::model(2.0).unwrap();
    let c = s.coords().unwrap();
    for r in [0.5, 1.2, 2.0] {
        let mask: Vec<bool> = c.iter().map(|p| p[0] <= r).collect();
        let p = PerimeterModel::Chain.perimeter(&s, &mask, None);
        assert!(
            (p - h.eval(r)).abs() <= 2.0 * s.mesh(),
            "r={r}: {p} vs {}",
            h.eval(r)
        );
    }
}

#[test]
fn generators_reject_bad_input() {
    assert!(make_sphere2(10).is_err());
    assert!(make_circle(2).is_err());
    assert!(make_segment(1.0, 1.0, 0.0, 10).is_err());
    assert!(make_segment(2.0, 3.0, 0.5, 10).is_err());
    assert!(make_segment(2.0, 1.0, 0.0, 3).is_err());
    let base = make_circle(30).unwrap();
    assert!(make_suspension(&base, 5, 2.0).is_err());
    let s = make_sphere2(100).unwrap();
    assert!(make_cap_set(&s, 0, 1.0).is_err());
    assert!(make_cap_set(&s, 100, 0.5).is_err());
}

#[test]
fn suspension_of_a_circle() {
    let base = make_circle(12).unwrap();
    let s = make_suspension(&base, 10, 3.0).unwrap();
    assert_eq!(s.len(), 120);
    assert!(s.diameter() <= PI + 1e-12);
    // Antipodal levels over antipodal base points are nearly π apart.
    let (p, q) = (6, 9 * 12);
    assert!(s.d(p, q) >= PI - PI / 10.0 - 1e-9);
    let spec = SpaceSpec::Suspension {
        base: 12,
        levels: 10,
        n_dim: 3.0,
    };
    assert_eq!(spec.build().unwrap(), s);
    let json = serde_json::to_string(&spec).unwrap();
    assert_eq!(serde_json::from_str::<SpaceSpec>(&json).unwrap(), spec);
}

#[test]
fn circle_distances() {
    let c = make_circle(8).unwrap();
    assert!((c.d(0, 4) - PI).abs() < 1e-12);
    assert!((c.d(1, 7) - PI / 2.0).abs() < 1e-12);
    assert_eq!(c.geometry(), Geometry::General);
    let back = DiscreteSpace::from_text(&c.to_text()).unwrap();
    assert!((back.d(2, 5) - c.d(2, 5)).abs() < 1e-12);
}
