use c2poly::cubature::{lp_maxmin_weights, nnls_weights, OrthonormalBasis};
use c2poly::discretize::mz_partition;
use c2poly::domain::Domain;
use c2poly::nets::CandidateStream;

fn stream() -> CandidateStream {
    CandidateStream {
        interior: 200_000,
        boundary_layers: true,
    }
}

#[test]
fn basis_is_orthonormal() {
    for dom in [Domain::unit_disk(), Domain::ellipse(2.0, 1.0).unwrap()] {
        for n in [1, 3, 6] {
            let basis = OrthonormalBasis::new(&dom, n).unwrap();
            assert!(basis.gram_error(&dom) <= 1e-10, "{} {n}: {}", dom.name(), basis.gram_error(&dom));
        }
    }
}

#[test]
fn weights_are_positive_and_exact_on_the_basis() {
    let dom = Domain::unit_disk();
    for n in [2, 4] {
        let part = mz_partition(&dom, n, 0.8, &stream(), 400_000, 31).unwrap();
        let basis = OrthonormalBasis::new(&dom, n).unwrap();
        let lp = lp_maxmin_weights(&basis, part.nodes(), part.measures()).unwrap();
        let nn = nnls_weights(&basis, part.nodes()).unwrap();
        for rule in [&lp, &nn] {
            assert!(rule.weights.iter().all(|&w| w >= 0.0));
            let v = basis.matrix(&rule.nodes);
            for (k, exact) in basis.integrals().iter().enumerate() {
                let approx: f64 = (0..rule.nodes.len()).map(|j| v[(k, j)] * rule.weights[j]).sum();
                assert!((approx - exact).abs() <= 1e-9 * exact.abs().max(1.0), "n = {n}, k = {k}: {approx} {exact}");
            }
        }
        for (w, m) in lp.weights.iter().zip(part.measures()) {
            assert!(*w >= lp.t_star.unwrap() * m * (1.0 - 1e-9));
        }
    }
}
