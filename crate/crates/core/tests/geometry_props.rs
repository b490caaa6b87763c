use c2poly::domain::{decompose_boundary, metric_equivalence_report, patch_dist_bounds_check, stream_rng, Domain, Point};
use c2poly::polycalc::{random_polynomial, Polynomial};
use c2poly::quad::{domain_rule, gram_square, lp_norm, moments};
use proptest::prelude::*;
use rand::Rng;

fn domains() -> Vec<Domain> {
    let quartic = Polynomial::from_coeffs(2, 4, {
        // x⁴ + y⁴ + x² + y² − 1.5
        let mut c = vec![0.0; 15];
        c[0] = -1.5;
        c[3] = 1.0;
        c[5] = 1.0;
        c[10] = 1.0;
        c[14] = 1.0;
        c
    })
    .unwrap();
    vec![
        Domain::unit_disk(),
        Domain::ellipse(2.0, 1.0).unwrap(),
        Domain::implicit(quartic, [0.0, 0.0], [-1.5, 1.5, -1.5, 1.5], 0.2).unwrap(),
    ]
}

fn triple(dom: &Domain, seed: u64) -> [Point; 3] {
    let mut rng = stream_rng(seed, 0);
    let a = dom.sample_uniform(&mut rng);
    let b = if rng.random::<bool>() { a } else { dom.sample_uniform(&mut rng) };
    [a, b, dom.sample_uniform(&mut rng)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rho_omega_is_a_metric(which in 0usize..3, seed in any::<u64>()) {
        let dom = &domains()[which];
        let [a, b, c] = triple(dom, seed);
        let ab = dom.rho_omega(a, b).unwrap();
        prop_assert!((ab - dom.rho_omega(b, a).unwrap()).abs() <= 1e-9);
        prop_assert!(dom.rho_omega(a, a).unwrap() <= 1e-9);
        if a != b {
            prop_assert!(ab > 0.0);
        }
        prop_assert!(ab <= dom.rho_omega(a, c).unwrap() + dom.rho_omega(c, b).unwrap() + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dist_foot_lies_along_the_normal(which in 0usize..3, seed in any::<u64>()) {
        let dom = &domains()[which];
        let mut rng = stream_rng(seed, 1);
        let xi = dom.sample_uniform(&mut rng);
        let (d, foot) = dom.dist_to_boundary(xi).unwrap();
        let v = [xi[0] - foot.position[0], xi[1] - foot.position[1]];
        let len = v[0].hypot(v[1]);
        prop_assert!((len - d).abs() <= 1e-9);
        let cross = v[0] * foot.normal[1] - v[1] * foot.normal[0];
        prop_assert!(cross.abs() <= 1e-8 * len.max(1.0), "{cross}");
        prop_assert!((foot.normal[0].hypot(foot.normal[1]) - 1.0).abs() <= 1e-12);
        prop_assert!((foot.normal[0] * foot.tangent[0] + foot.normal[1] * foot.tangent[1]).abs() <= 1e-12);
    }

    #[test]
    fn l2_norm_squared_is_the_gram_value(deg in 0usize..=8, seed in any::<u64>()) {
        let dom = Domain::unit_disk();
        let rule = domain_rule(&dom, 2 * deg + 2);
        let mom = moments(&dom, 2 * deg).unwrap();
        let p = random_polynomial(2, deg, seed).unwrap();
        let l2 = lp_norm(&dom, &|x| p.eval_unchecked(&x), 2.0, &rule).unwrap();
        let gram = gram_square(&p, &mom);
        prop_assert!((l2 * l2 - gram).abs() <= 1e-9 * gram, "{} {gram}", l2 * l2);
    }
}

#[test]
fn rho_hat_is_a_metric_on_patches() {
    let dom = Domain::unit_disk();
    let patches = decompose_boundary(&dom, 0.2).unwrap();
    for (k, patch) in patches.iter().enumerate().take(4) {
        for i in 0..250u64 {
            let mut rng = stream_rng(k as u64, i);
            let a = patch.sample_g(&mut rng);
            let b = patch.sample_g(&mut rng);
            let c = patch.sample_g(&mut rng);
            let ab = patch.rho_hat(a, b).unwrap();
            assert!((ab - patch.rho_hat(b, a).unwrap()).abs() <= 1e-9);
            assert!(patch.rho_hat(a, a).unwrap() <= 1e-9);
            assert!(ab > 0.0);
            assert!(ab <= patch.rho_hat(a, c).unwrap() + patch.rho_hat(c, b).unwrap() + 1e-9);
        }
    }
}

#[test]
fn ball_volumes_track_the_comparator() {
    let dom = Domain::unit_disk();
    let mut ratios = Vec::new();
    for &r in &[0.0, 0.3, 0.6, 0.9, 0.99] {
        for &t in &[0.05, 0.1, 0.2] {
            let v = dom.ball_volume_mc([r, 0.0], t, 40_000, 5).unwrap();
            ratios.push(v.estimate / v.comparator);
        }
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    assert!(lo > 0.0 && hi / lo <= 10.0, "{ratios:?}");
}

#[test]
fn decomposed_patches_pass_distance_and_metric_checks() {
    for dom in domains().iter().take(2) {
        let patches = decompose_boundary(dom, 0.2).unwrap();
        for (k, patch) in patches.iter().enumerate() {
            let rep = patch_dist_bounds_check(patch, 1000, k as u64);
            assert!(rep.pass, "{} patch {k}: {rep:?}", dom.name());
            let eq = metric_equivalence_report(dom, patch, 400, k as u64).unwrap();
            assert!(eq.min_ratio > 0.0 && eq.max_ratio.is_finite(), "{eq:?}");
        }
    }
}
