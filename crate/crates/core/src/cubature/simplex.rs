//! Dense bounded-variable simplex: maximize `cᵀx` subject to `Ax = b`,
//! `0 ≤ x ≤ u`. Pricing is by largest reduced cost; after a run of
//! degenerate pivots it switches to Bland's rule until the objective moves.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64, iterations: usize },
    /// Phase 1 stopped with this sum of infeasibilities.
    Infeasible { residual: f64 },
    Unbounded,
    IterationCap,
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Upper bounds; `f64::INFINITY` for none.
    pub upper: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-12;
const RATIO_TOL: f64 = 1e-12;
const BLAND_AFTER: usize = 30;

struct State<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    upper: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Cap,
}

impl State<'_> {
    fn basic_values(&self, lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> DVector<f64> {
        let mut rhs = self.b.clone();
        for (j, s) in self.status.iter().enumerate() {
            if *s == Status::Upper {
                rhs.axpy(-self.upper[j], &self.a.column(j), 1.0);
            }
        }
        lu.solve(&rhs).unwrap_or_else(|| DVector::from_element(self.b.len(), f64::NAN))
    }

    fn run(&mut self, cost: &[f64], cap: usize) -> Step {
        let m = self.b.len();
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= cap {
                return Step::Cap;
            }
            let bmat = DMatrix::from_fn(m, m, |i, k| self.a[(i, self.basis[k])]);
            let lu = bmat.clone().lu();
            let xb = self.basic_values(&lu);
            let cb = DVector::from_fn(m, |k, _| cost[self.basis[k]]);
            let y = bmat.transpose().lu().solve(&cb).unwrap_or_else(|| DVector::zeros(m));
            let bland = degenerate >= BLAND_AFTER;
            let mut entering: Option<(usize, f64)> = None;
            let mut best_gain = 0.0;
            for j in 0..self.status.len() {
                let st = self.status[j];
                if st == Status::Basic {
                    continue;
                }
                let d = cost[j] - y.dot(&self.a.column(j));
                let dir = if st == Status::Lower && d > COST_TOL && self.upper[j] > 0.0 {
                    1.0
                } else if st == Status::Upper && d < -COST_TOL {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    // Bland: the smallest improving index enters
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best_gain {
                    best_gain = d.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((j, dir)) = entering else {
                return Step::Optimal;
            };
            let alpha = lu.solve(&self.a.column(j).into_owned()).unwrap_or_else(|| DVector::zeros(m));
            let mut theta = self.upper[j];
            let mut leave: Option<(usize, Status)> = None;
            for i in 0..m {
                let rate = -dir * alpha[i];
                let var = self.basis[i];
                let (limit, to) = if rate < -PIVOT_TOL {
                    (xb[i].max(0.0) / -rate, Status::Lower)
                } else if rate > PIVOT_TOL && self.upper[var].is_finite() {
                    ((self.upper[var] - xb[i]).max(0.0) / rate, Status::Upper)
                } else {
                    continue;
                };
                // near-ties count as ties so Bland's rule stays effective
                let tie = (limit - theta).abs() <= RATIO_TOL * (1.0 + limit.abs());
                let better = match leave {
                    None => limit < theta || tie,
                    Some((li, _)) => (limit < theta && !tie) || (tie && var < self.basis[li]),
                };
                if better {
                    theta = limit;
                    leave = Some((i, to));
                }
            }
            if !theta.is_finite() {
                return Step::Unbounded;
            }
            self.iterations += 1;
            if theta <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            match leave {
                None => {
                    self.status[j] = if dir > 0.0 { Status::Upper } else { Status::Lower };
                }
                Some((i, to)) => {
                    let out = self.basis[i];
                    self.status[out] = to;
                    self.basis[i] = j;
                    self.status[j] = Status::Basic;
                }
            }
        }
    }

    fn solution(&self, n: usize) -> Vec<f64> {
        let m = self.b.len();
        let bmat = DMatrix::from_fn(m, m, |i, k| self.a[(i, self.basis[k])]);
        let xb = self.basic_values(&bmat.lu());
        let mut x: Vec<f64> = (0..self.status.len())
            .map(|j| match self.status[j] {
                Status::Upper => self.upper[j],
                _ => 0.0,
            })
            .collect();
        for (k, &v) in self.basis.iter().enumerate() {
            x[v] = xb[k].clamp(0.0, self.upper[v]);
        }
        x.truncate(n);
        x
    }
}

/// Two-phase solve; `feas_tol` bounds the phase-1 infeasibility after each
/// row is scaled to unit maximum norm.
pub fn solve(problem: &LpProblem, feas_tol: f64, cap: usize) -> LpOutcome {
    let (m, n) = problem.a.shape();
    let mut a = DMatrix::zeros(m, n + m);
    let mut b = DVector::zeros(m);
    for i in 0..m {
        let scale = problem.a.row(i).amax().max(problem.b[i].abs()).max(f64::MIN_POSITIVE);
        let sign = if problem.b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            a[(i, j)] = sign * problem.a[(i, j)] / scale;
        }
        a[(i, n + i)] = 1.0;
        b[i] = sign * problem.b[i] / scale;
    }
    let mut upper = problem.upper.clone();
    upper.extend(std::iter::repeat_n(f64::INFINITY, m));
    let mut status = vec![Status::Lower; n + m];
    for s in status.iter_mut().skip(n) {
        *s = Status::Basic;
    }
    let mut st = State {
        a: &a,
        b: &b,
        upper,
        basis: (n..n + m).collect(),
        status,
        iterations: 0,
    };
    let phase1: Vec<f64> = (0..n + m).map(|j| if j >= n { -1.0 } else { 0.0 }).collect();
    match st.run(&phase1, cap) {
        Step::Optimal => {}
        Step::Cap => return LpOutcome::IterationCap,
        Step::Unbounded => unreachable!("phase 1 is bounded"),
    }
    let full = st.solution(n + m);
    let residual: f64 = full[n..].iter().sum();
    if residual > feas_tol {
        return LpOutcome::Infeasible { residual };
    }
    // artificials stay pinned at zero from here on
    for j in n..n + m {
        st.upper[j] = 0.0;
        if st.status[j] == Status::Upper {
            st.status[j] = Status::Lower;
        }
    }
    let mut phase2 = problem.c.clone();
    phase2.extend(std::iter::repeat_n(0.0, m));
    match st.run(&phase2, cap) {
        Step::Optimal => {}
        Step::Cap => return LpOutcome::IterationCap,
        Step::Unbounded => return LpOutcome::Unbounded,
    }
    let x = st.solution(n);
    let objective = x.iter().zip(&problem.c).map(|(x, c)| x * c).sum();
    LpOutcome::Optimal {
        x,
        objective,
        iterations: st.iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y; x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 (slacks s1..s3)
        let a = DMatrix::from_row_slice(3, 5, &[1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 1.0, 0.0, 3.0, 2.0, 0.0, 0.0, 1.0]);
        let p = LpProblem {
            a,
            b: vec![4.0, 12.0, 18.0],
            c: vec![3.0, 5.0, 0.0, 0.0, 0.0],
            upper: vec![f64::INFINITY; 5],
        };
        match solve(&p, 1e-10, 1000) {
            LpOutcome::Optimal { x, objective, .. } => {
                assert!((objective - 36.0).abs() < 1e-10);
                assert!((x[0] - 2.0).abs() < 1e-10 && (x[1] - 6.0).abs() < 1e-10);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn bounds_infeasibility_and_unboundedness() {
        // max x + y, x + y + s = 3, x ≤ 1, y ≤ 1.5
        let p = LpProblem {
            a: DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
            b: vec![3.0],
            c: vec![1.0, 1.0, 0.0],
            upper: vec![1.0, 1.5, f64::INFINITY],
        };
        match solve(&p, 1e-10, 100) {
            LpOutcome::Optimal { objective, .. } => assert!((objective - 2.5).abs() < 1e-12),
            o => panic!("{o:?}"),
        }
        // x + y = -1 with x, y ≥ 0
        let p = LpProblem {
            a: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            b: vec![-1.0],
            c: vec![0.0, 0.0],
            upper: vec![f64::INFINITY; 2],
        };
        assert!(matches!(solve(&p, 1e-10, 100), LpOutcome::Infeasible { .. }));
        let p = LpProblem {
            a: DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            b: vec![0.0],
            c: vec![1.0, 0.0],
            upper: vec![f64::INFINITY; 2],
        };
        assert_eq!(solve(&p, 1e-10, 100), LpOutcome::Unbounded);
    }
}
