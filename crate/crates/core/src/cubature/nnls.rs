//! Lawson–Hanson active-set nonnegative least squares.

use nalgebra::{DMatrix, DVector};

/// `argmin ‖Ax − b‖₂` over `x ≥ 0`, with its residual norm.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> (DVector<f64>, f64) {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-13 * a.amax().max(1.0) * b.amax().max(1.0) * (n as f64);
    for _ in 0..max_iter {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]).then(j.cmp(&i)));
        let Some(t) = cand else {
            break;
        };
        passive[t] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |i, k| a[(i, idx[k])]);
            let z = least_squares(&sub, b);
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            // step back to the boundary of the feasible set
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    let r = x[j] / (x[j] - z[k]);
                    alpha = alpha.min(r);
                }
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
                if x[j] <= 1e-15 * x.amax().max(1.0) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    let r = (b - a * &x).norm();
    (x, r)
}

fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-14 * svd.singular_values.max()).expect("U and V were computed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_instances() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let (x, r) = nnls(&a, &DVector::from_vec(vec![1.0, -2.0]), 50);
        assert_eq!(x.as_slice(), &[1.0, 0.0]);
        assert!((r - 2.0).abs() < 1e-14);
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![3.0, 5.0, 7.0]);
        let (x, r) = nnls(&a, &b, 50);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12 && r < 1e-12);
    }
}
