use c2poly::domain::{stream_rng, Domain};
use c2poly::nets::{greedy_maximal_net, CandidateStream, Partition};

fn stream() -> CandidateStream {
    CandidateStream {
        interior: 200_000,
        boundary_layers: true,
    }
}

#[test]
fn centers_are_separated() {
    let dom = Domain::unit_disk();
    for &delta in &[0.4, 0.2, 0.1] {
        let net = greedy_maximal_net(&dom, delta, &stream(), 7).unwrap();
        assert!(net.min_separation() >= delta, "{delta}: {}", net.min_separation());
    }
}

#[test]
fn cardinality_scales_like_delta_squared() {
    let dom = Domain::unit_disk();
    let band: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&delta| greedy_maximal_net(&dom, delta, &stream(), 3).unwrap().len() as f64 * delta * delta)
        .collect();
    let lo = band.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = band.iter().copied().fold(0.0, f64::max);
    assert!(hi / lo <= 4.0, "{band:?}");
}

#[test]
fn partition_is_regular_and_total() {
    for dom in [Domain::unit_disk(), Domain::ellipse(1.5, 1.0).unwrap()] {
        let part = Partition::build(&dom, 0.3, &stream(), 200_000, 11).unwrap();
        let reg = part.regularity_check(&dom, 1000 / part.len() + 1, 12).unwrap();
        assert!(reg.pass(), "{reg:?}");
        assert!(reg.inner_checked >= 1000, "{reg:?}");

        let mut rng = stream_rng(13, 0);
        for _ in 0..100_000 {
            let p = dom.sample_uniform(&mut rng);
            let j = part.assign_cell(&dom, p).unwrap();
            assert_eq!(part.assign_cell(&dom, p).unwrap(), j);
        }

        let total: f64 = part.measures().iter().sum();
        let err = part.stderr().iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!((total - dom.area()).abs() <= 4.0 * err + 1e-12, "{total} {} {err}", dom.area());
    }
}
