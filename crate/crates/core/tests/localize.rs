use lgq_core::density1d::Density1D;
use lgq_core::localize::space::farthest_point;
use lgq_core::localize::*;
use lgq_core::profile::{model_profile_detail, solve_eta_n};
use lgq_core::spaces::{make_cap_set, make_perturbed_cap, make_segment, make_sphere2};
use lgq_core::Error;
use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn geodesic(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot: f64 = (0..3).map(|k| a[k] * b[k]).sum();
    dot.clamp(-1.0, 1.0).acos()
}

fn random_sphere(n: usize, seed: u64) -> DiscreteSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let th: f64 = rng.gen_range(0.0..2.0 * PI);
            let r = (1.0 - z * z).sqrt();
            [r * th.cos(), r * th.sin(), z]
        })
        .collect();
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let p = pts.clone();
    DiscreteSpace::from_metric(Some(pts), w, Geometry::Sphere, move |i, j| {
        geodesic(p[i], p[j])
    })
    .unwrap()
}

/// `max Σ φ f w` over `φ_x − φ_y ≤ d(x,y)` solved as a dense LP.
fn lp_dual_value(space: &DiscreteSpace, f: &[f64]) -> f64 {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..space.len())
        .map(|i| lp.add_var(f[i] * space.weight(i), (-10.0, 10.0)))
        .collect();
    for x in 0..space.len() {
        for y in 0..space.len() {
            if x != y {
                lp.add_constraint(
                    [(vars[x], 1.0), (vars[y], -1.0)],
                    ComparisonOp::Le,
                    space.d(x, y),
                );
            }
        }
    }
    lp.solve().unwrap().objective()
}

#[test]
fn potential_matches_lp_oracle() {
    for seed in 0..6 {
        let space = random_sphere(24, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut mask: Vec<bool> = (0..space.len()).map(|_| rng.gen_bool(0.4)).collect();
        mask[0] = true;
        mask[1] = false;
        let f = localization_function(&space, &mask).unwrap();
        let pot = kantorovich_potential(&space, &f).unwrap();
        let oracle = lp_dual_value(&space, &f);
        assert!(
            (pot.dual_value - oracle).abs() <= 1e-7,
            "seed {seed}: {} vs {oracle}",
            pot.dual_value
        );
        assert!((pot.primal_value - oracle).abs() <= 1e-7);
        assert!(pot.lipschitz_slack <= 1e-9);
        assert_eq!(pot.phi.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
    }
}

#[test]
fn cap_potential_is_distance_to_pole() {
    let space = make_sphere2(400).unwrap();
    let cap = make_cap_set(&space, 0, 0.3).unwrap();
    let f = localization_function(&space, &cap.mask).unwrap();
    let pot = kantorovich_potential(&space, &f).unwrap();
    let shift: Vec<f64> = (0..space.len())
        .map(|x| pot.phi[x] + space.d(0, x))
        .collect();
    let mean = shift.iter().sum::<f64>() / shift.len() as f64;
    let worst = shift.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max);
    assert!(
        worst <= 2.0 * space.mesh(),
        "{worst} vs mesh {}",
        space.mesh()
    );
    assert!(pot.duality_gap <= 1e-7);
}

#[test]
fn zero_mean_is_required() {
    let space = make_sphere2(60).unwrap();
    let f = vec![1.0; space.len()];
    assert!(matches!(
        kantorovich_potential(&space, &f),
        Err(Error::InvalidParameter(_))
    ));
    let empty = vec![false; space.len()];
    assert!(localization_function(&space, &empty).is_err());
    assert!(localization_function(&space, &vec![true; space.len()]).is_err());
}

#[test]
fn relation_on_a_line_is_the_order() {
    let space = make_segment(2.0, PI, 0.0, 40).unwrap();
    let t: Vec<f64> = space.coords().unwrap().iter().map(|c| c[0]).collect();
    let mask: Vec<bool> = t.iter().map(|x| *x < 1.0).collect();
    let f = localization_function(&space, &mask).unwrap();
    let pot = kantorovich_potential(&space, &f).unwrap();
    let rel = transport_relation(&space, &pot, 1e-9);
    assert_eq!(rel.pairs.len(), 40 * 39 / 2);
    assert!(rel
        .pairs
        .iter()
        .all(|&(x, y)| t[x as usize] < t[y as usize]));

    let flat = Potential {
        phi: vec![0.0; space.len()],
        ..pot
    };
    assert!(transport_relation(&space, &flat, 0.5 * space.mesh())
        .pairs
        .is_empty());
}

#[test]
fn relation_is_cyclically_monotone() {
    let space = make_sphere2(500).unwrap();
    let cap = make_cap_set(&space, 3, 0.3).unwrap();
    let f = localization_function(&space, &cap.mask).unwrap();
    let pot = kantorovich_potential(&space, &f).unwrap();
    let rel = transport_relation(&space, &pot, 2.0 * space.mesh());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for len in [2, 3, 5] {
        assert!(rel.cyclic_monotonicity(&space, 1000, len, &mut rng) <= 0.0);
    }
}

fn segment_pipeline(weights: impl Fn(f64) -> f64, n: usize, len: f64, v: f64) -> Pipeline {
    let ts: Vec<f64> = (0..n).map(|k| len * (k as f64 + 0.5) / n as f64).collect();
    let w: Vec<f64> = ts.iter().map(|&t| weights(t)).collect();
    let coords: Vec<[f64; 3]> = ts.iter().map(|t| [*t, 0.0, 0.0]).collect();
    let tt = ts.clone();
    let space = DiscreteSpace::from_metric(Some(coords), w, Geometry::Line, move |i, j| {
        (tt[i] - tt[j]).abs()
    })
    .unwrap();
    let mut mass = 0.0;
    let mask: Vec<bool> = (0..n)
        .map(|i| {
            let inside = mass < v;
            mass += space.weight(i);
            inside
        })
        .collect();
    deficit_report(&space, &mask, 2.0, &PipelineConfig::default()).unwrap()
}

#[test]
fn segment_is_a_single_ray() {
    let space = make_segment(2.0, PI, 0.0, 200).unwrap();
    let r = Density1D::model(2.0).unwrap().quantile(0.3);
    let mask: Vec<bool> = space.coords().unwrap().iter().map(|c| c[0] <= r).collect();
    let p = deficit_report(&space, &mask, 2.0, &PipelineConfig::default()).unwrap();
    let dec = &p.decomposition;
    assert_eq!(dec.rays.len(), 1);
    let ray = &dec.rays[0];
    assert_eq!(ray.chain.len(), space.len());
    assert!((ray.d_q - PI).abs() < 1e-12);
    assert!((ray.weight - 1.0).abs() < 1e-9);
    // The fitted needle density is the model density.
    let (h, cd_ok) = &p.fitted[0];
    let worst = (1..100)
        .map(|k| PI * k as f64 / 100.0)
        .map(|t| (h.eval(t) - t.sin() / 2.0).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 3.0 * space.mesh(), "{worst}");
    assert!(*cd_ok);
    assert!(p.report.delta.abs() <= 3.0 * space.mesh());
    assert!(
        p.report.short_mass.holds && p.report.endpoint_check.holds && p.report.pole_cluster.holds
    );
}

#[test]
fn oscillating_weights_fail_the_cd_test() {
    let p = segment_pipeline(|t| 1.05 + (8.0 * t).cos(), 240, PI, 0.4);
    assert_eq!(p.decomposition.rays.len(), 1);
    assert!(!p.fitted[0].1);
    let q = segment_pipeline(f64::sin, 240, 2.5, 0.4);
    assert!(q.fitted[0].1);
}

#[test]
fn sphere_cap_decomposition() {
    let space = make_sphere2(800).unwrap();
    let cap = make_cap_set(&space, 0, 0.3).unwrap();
    let p = deficit_report(&space, &cap.mask, 2.0, &PipelineConfig::default()).unwrap();
    let dec = &p.decomposition;
    let v = space.mass(&cap.mask);
    assert!(dec.total_quotient() >= 0.95);
    for ray in &dec.rays {
        assert!((ray.e_fraction() - v).abs() <= 0.02);
        assert!(ray.chain.len() >= 4);
        assert!((ray.d_q - space.d(ray.south, ray.north)).abs() <= 1e-12);
        assert!((ray.masses.iter().sum::<f64>() - ray.weight).abs() <= 1e-12);
        // Meridians from the pole to near its antipode.
        assert!(space.d(ray.south, 0) <= space.mesh());
        assert!(ray.d_q >= PI - 2.0 * space.mesh());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let b: Vec<bool> = (0..space.len()).map(|_| rng.gen_bool(0.3)).collect();
        assert!(dec.disintegration_residual(&space, &b) <= 1e-9);
    }
    // Meridian needles carry the density sin(t)/2, averaged over rays.
    let mesh = space.mesh();
    let mut dev = 0.0;
    for ((h, _), ray) in p.fitted.iter().zip(&dec.rays) {
        let sup = (1..50)
            .map(|k| ray.d_q * k as f64 / 50.0)
            .map(|t| (h.eval(t) - t.sin() / 2.0).abs())
            .fold(0.0, f64::max);
        dev += ray.weight * sup;
    }
    assert!(dev / dec.total_quotient() <= 3.0 * mesh, "{dev}");
    let cls = &p.report.classification;
    assert!(
        cls.labels.iter().all(|l| *l == RayLabel::LongGoodS),
        "{:?}",
        cls.labels
    );
    let r = &p.report;
    assert!(r.endpoint_check.holds && r.short_mass.holds && r.pole_cluster.holds);
    assert!(r.ray_perimeter <= r.perimeter + mesh);
    assert!(r.delta.abs() <= 3.0 * mesh);
}

#[test]
fn unassigned_points_cannot_extend_a_ray() {
    let space = make_sphere2(300).unwrap();
    let far = farthest_point(&space, 5);
    let e = make_perturbed_cap(&space, 5, 0.35, 0.03, far).unwrap();
    let p = deficit_report(&space, &e.mask, 2.0, &PipelineConfig::default()).unwrap();
    let dec = &p.decomposition;
    let phi = &p.potential.phi;
    let fits = |a: usize, b: usize| (phi[a] - phi[b]).abs() >= space.d(a, b) - dec.tol_gamma;
    for (i, u) in dec.uncovered.iter().enumerate() {
        if *u > 0.0 {
            for ray in &dec.rays {
                assert!(ray.chain.contains(&i) || !ray.chain.iter().all(|&c| fits(c, i)));
            }
        }
    }
}

#[test]
fn full_length_rays_are_long() {
    let eta = solve_eta_n(2.0).unwrap();
    let at_pi = model_profile_detail(2.0, PI, 0.3).unwrap().lambda;
    assert!((at_pi - 1.0).abs() < 1e-12 && at_pi > eta);
}

#[test]
fn perturbed_cap_has_positive_deficit() {
    let space = make_sphere2(800).unwrap();
    let far = farthest_point(&space, 0);
    let e = make_perturbed_cap(&space, 0, 0.3, 0.02, far).unwrap();
    let q = quantify(&space, &e.mask, 2.0, &PipelineConfig::default()).unwrap();
    assert!(q.delta > space.mesh() * 0.1, "{}", q.delta);
    assert!(q.details.short_mass.holds);
    // Mass accounting against the best single cap.
    assert!(q.asymmetry >= 2.0 * 0.02 - 4.0 * space.mesh());
    let json = serde_json::to_value(&q).unwrap();
    for key in [
        "delta",
        "asymmetry",
        "diam_deficit",
        "q_short",
        "q_bad1",
        "q_bad2",
        "q_S",
        "q_N",
        "x_bar",
        "r_N_v",
    ] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn rescaled_weights_give_the_same_pipeline() {
    let base = make_sphere2(300).unwrap();
    let coords = base.coords().unwrap().to_vec();
    let c2 = coords.clone();
    let heavy = DiscreteSpace::from_metric(
        Some(coords),
        vec![7.5; 300],
        Geometry::Sphere,
        move |i, j| geodesic(c2[i], c2[j]),
    )
    .unwrap();
    let far = farthest_point(&base, 0);
    let e = make_perturbed_cap(&base, 0, 0.3, 0.02, far).unwrap();
    let config = PipelineConfig::default();
    let a = quantify(&base, &e.mask, 2.0, &config).unwrap();
    let b = quantify(&heavy, &e.mask, 2.0, &config).unwrap();
    assert_eq!(a.x_bar, b.x_bar);
    assert_eq!(
        a.details.classification.labels,
        b.details.classification.labels
    );
    assert_eq!(a.details.rays, b.details.rays);
    assert!((a.delta - b.delta).abs() < 1e-9);
}

#[test]
fn space_text_round_trip() {
    let s = make_sphere2(60).unwrap();
    let back = DiscreteSpace::from_text(&s.to_text()).unwrap();
    assert_eq!(back.len(), 60);
    for i in 0..60 {
        assert!((back.weight(i) - s.weight(i)).abs() < 1e-15);
        for j in 0..60 {
            assert!((back.d(i, j) - s.d(i, j)).abs() < 1e-12);
        }
    }
    let text = "3\n0 1\n1 1\n2 2\n1.0\n2.0 1.0\n";
    let t = DiscreteSpace::from_text(text).unwrap();
    assert_eq!(t.d(0, 2), 2.0);
    assert_eq!(t.d(2, 1), 1.0);
    assert!((t.weight(2) - 0.5).abs() < 1e-15);
    // Violates the triangle inequality.
    assert!(DiscreteSpace::from_text("3\n0 1\n1 1\n2 1\n1.0\n3.0 1.0\n").is_err());
}

#[test]
fn antipodal_examples() {
    let axes = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let a = axes.to_vec();
    let oct = DiscreteSpace::from_metric(
        Some(axes.to_vec()),
        vec![1.0; 6],
        Geometry::Sphere,
        move |i, j| geodesic(a[i], a[j]),
    )
    .unwrap();
    let r = antipodal_check(&oct, PI, 2.0, 0.0).unwrap();
    assert_eq!(r.worst_ratio, 0.0);
    assert!(r.holds);
    let circle = lgq_core::spaces::make_circle(5).unwrap();
    assert!(matches!(
        antipodal_check(&circle, PI, 2.0, 0.0),
        Err(Error::NoTriples(_))
    ));
    let s = make_sphere2(500).unwrap();
    let r = antipodal_check(&s, PI - 0.3, 2.0, 0.05).unwrap();
    assert!(r.holds && r.worst_ratio <= 2.0 + 2.0 * s.mesh() / 0.3);
}

#[test]
fn markov_examples() {
    let w = [0.25, 0.25, 0.5];
    let m = markov_bound(&[0.6, 0.6, 0.6], &w, 0.5).unwrap();
    assert_eq!(m.measured, 1.0);
    assert!(m.holds && m.bound <= 1.0);
    let z = markov_bound(&[0.0, 0.3, 1.0], &w, 0.0).unwrap();
    assert_eq!(z.measured, 1.0);
    assert!((z.bound - (0.075 + 0.5)).abs() < 1e-15);
    // Two values on six points, dyadic data so every step is exact.
    let w6 = [0.125, 0.125, 0.25, 0.125, 0.125, 0.25];
    let f6 = [1.0, 1.0, 1.0, 0.25, 0.25, 0.25];
    let t = markov_bound(&f6, &w6, 0.5).unwrap();
    assert_eq!(t.measured, 0.5);
    assert_eq!(t.bound, (0.5 + 0.125 - 0.5) / 0.5);
    let one = markov_bound(&[1.0; 6], &w6, 0.75).unwrap();
    assert_eq!(one.measured, one.bound);
    assert!(markov_bound(&f6, &w6, 1.0).is_err());
    assert!(markov_bound(&[1.5], &[1.0], 0.5).is_err());
}

#[test]
fn ball_localization_examples() {
    let space = make_sphere2(600).unwrap();
    let cap = make_cap_set(&space, 0, 0.3).unwrap();
    let config = PipelineConfig::default();
    assert!(matches!(
        ball_localization(&space, &cap.mask, 0, 0.5 * cap.radius, 2.0, &config),
        Err(Error::DegenerateBall(_))
    ));
    // A ball centered on the cap boundary.
    let edge = (0..space.len())
        .min_by(|&a, &b| {
            (space.d(0, a) - cap.radius)
                .abs()
                .total_cmp(&(space.d(0, b) - cap.radius).abs())
        })
        .unwrap();
    let far = farthest_point(&space, 0);
    let e = make_perturbed_cap(&space, 0, 0.3, 0.02, far).unwrap();
    let b = ball_localization(&space, &e.mask, edge, 0.4, 2.0, &config).unwrap();
    assert!(b.perimeter_lower > 0.0);
    assert!(
        b.perimeter_lower <= b.measured_perimeter + space.mesh(),
        "{} vs {}",
        b.perimeter_lower,
        b.measured_perimeter
    );
    assert!(b.markov.holds);
    assert!(b.q1bar_mass >= b.markov.bound * 0.0);
}
