//! Positive cubature on partition representatives: moment matching in an
//! orthonormal basis, nonnegative least squares, and a max-min linear program
//! certifying `λ_j ≥ t·|R_j|`.

pub mod nnls;
pub mod simplex;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::discretize::trial_seed;
use crate::domain::{Domain, GeometryError, Point};
use crate::polycalc::{exponents, monomial_index, random_polynomial, Exponent, PolyError};
use crate::quad::{compensated_sum, domain_rule, integrate_polynomial, moments, QuadError};
use simplex::{LpOutcome, LpProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CubatureError {
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("Gram matrix of degree {0} is not positive definite")]
    Basis(usize),
    #[error("moment residual {residual:e} exceeds tolerance")]
    Residual { residual: f64 },
    #[error("no exact rule on these nodes (phase-1 residual {residual:e})")]
    Infeasible { residual: f64 },
    #[error("simplex iteration cap reached")]
    IterationCap,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("invalid input: {0}")]
    Input(String),
}

pub const RESIDUAL_TOL: f64 = 1e-9;
const FEASIBILITY_TOL: f64 = 1e-10;
const SIMPLEX_CAP: usize = 200_000;

/// Basis of `Π_n^2` orthonormal in `L²(Ω)`, as `q = T m` for the monomial
/// vector `m`.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    degree: usize,
    exps: Vec<Exponent>,
    transform: DMatrix<f64>,
    integrals: Vec<f64>,
}

fn inverse_cholesky(g: &DMatrix<f64>, degree: usize) -> Result<DMatrix<f64>, CubatureError> {
    let chol = g.clone().cholesky().ok_or(CubatureError::Basis(degree))?;
    let l = chol.l();
    let k = g.nrows();
    l.solve_lower_triangular(&DMatrix::identity(k, k)).ok_or(CubatureError::Basis(degree))
}

impl OrthonormalBasis {
    pub fn new(dom: &Domain, degree: usize) -> Result<Self, CubatureError> {
        let mom = moments(dom, 2 * degree)?;
        let exps = exponents(2, degree);
        let k = exps.len();
        let gram = DMatrix::from_fn(k, k, |a, b| {
            let e = [exps[a][0] + exps[b][0], exps[a][1] + exps[b][1], 0];
            mom[monomial_index(2, &e)]
        });
        // two Cholesky passes: the second removes the loss of orthogonality
        let t1 = inverse_cholesky(&gram, degree)?;
        let g1 = &t1 * &gram * t1.transpose();
        let g1 = (&g1 + g1.transpose()) * 0.5;
        let transform = inverse_cholesky(&g1, degree)? * t1;
        let m0 = DVector::from_iterator(k, mom[..k].iter().copied());
        let integrals = (&transform * m0).iter().copied().collect();
        Ok(Self {
            degree,
            exps,
            transform,
            integrals,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    /// `∫_Ω q_k`.
    pub fn integrals(&self) -> &[f64] {
        &self.integrals
    }

    pub fn eval(&self, x: Point) -> DVector<f64> {
        let m = DVector::from_iterator(
            self.exps.len(),
            self.exps.iter().map(|e| x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32)),
        );
        &self.transform * m
    }

    /// `K × N` matrix of basis values at the nodes.
    pub fn matrix(&self, nodes: &[Point]) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = nodes.par_iter().map(|&x| self.eval(x)).collect();
        DMatrix::from_columns(&cols)
    }

    /// `max |⟨q_a, q_b⟩ − δ_ab|` by an exact quadrature rule of degree `2n`.
    pub fn gram_error(&self, dom: &Domain) -> f64 {
        let rule = domain_rule(dom, 2 * self.degree);
        let k = self.len();
        let mut g = DMatrix::<f64>::zeros(k, k);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let q = self.eval(*x);
            g += &q * q.transpose() * *w;
        }
        (g - DMatrix::identity(k, k)).amax()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubatureRule {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub degree: usize,
    /// `max_k |Σ λ_j q_k(ξ_j) − ∫ q_k| / max(1, |∫ q_k|)`.
    pub residual: f64,
    /// Optimal value of the max-min program, when produced by it.
    pub t_star: Option<f64>,
}

impl CubatureRule {
    pub fn integrate(&self, f: &(dyn Fn(Point) -> f64 + Sync)) -> f64 {
        compensated_sum(self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)))
    }

    /// `min_j λ_j / |R_j|`.
    pub fn min_ratio(&self, measures: &[f64]) -> f64 {
        self.weights.iter().zip(measures).map(|(l, m)| l / m).fold(f64::INFINITY, f64::min)
    }
}

pub fn moment_residual(basis: &OrthonormalBasis, nodes: &[Point], weights: &[f64]) -> f64 {
    let q = basis.matrix(nodes);
    let w = DVector::from_column_slice(weights);
    let s = q * w;
    s.iter()
        .zip(basis.integrals())
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Nonnegative weights matching all moments of degree `≤ n`.
pub fn nnls_weights(basis: &OrthonormalBasis, nodes: &[Point]) -> Result<CubatureRule, CubatureError> {
    if nodes.is_empty() {
        return Err(CubatureError::Input("no nodes".into()));
    }
    let a = basis.matrix(nodes);
    let b = DVector::from_column_slice(basis.integrals());
    let (x, _) = nnls::nnls(&a, &b, 20 * basis.len() + 100);
    let weights: Vec<f64> = x.iter().copied().collect();
    let residual = moment_residual(basis, nodes, &weights);
    if residual > RESIDUAL_TOL {
        return Err(CubatureError::Residual { residual });
    }
    Ok(CubatureRule {
        nodes: nodes.to_vec(),
        weights,
        degree: basis.degree(),
        residual,
        t_star: None,
    })
}

fn lp_result(outcome: LpOutcome) -> Result<(Vec<f64>, f64), CubatureError> {
    match outcome {
        LpOutcome::Optimal { x, objective, .. } => Ok((x, objective)),
        LpOutcome::Infeasible { residual } => Err(CubatureError::Infeasible { residual }),
        LpOutcome::Unbounded => Err(CubatureError::Unbounded),
        LpOutcome::IterationCap => Err(CubatureError::IterationCap),
    }
}

/// Feasible `w` with `Σ_j w_j A_{kj} = b_k` and `lo ≤ w_j ≤ hi`, if any.
fn boxed_weights(a: &DMatrix<f64>, b: &DVector<f64>, lo: f64, hi: f64) -> Result<Option<Vec<f64>>, CubatureError> {
    let n = a.ncols();
    let rowsum: DVector<f64> = a.column_sum();
    let rhs = b - rowsum * lo;
    let problem = LpProblem {
        a: a.clone(),
        b: rhs.iter().copied().collect(),
        c: vec![0.0; n],
        upper: vec![hi - lo; n],
    };
    match simplex::solve(&problem, FEASIBILITY_TOL, SIMPLEX_CAP) {
        LpOutcome::Optimal { x, .. } => Ok(Some(x.iter().map(|v| v + lo).collect())),
        LpOutcome::Infeasible { .. } => Ok(None),
        LpOutcome::Unbounded => Err(CubatureError::Unbounded),
        LpOutcome::IterationCap => Err(CubatureError::IterationCap),
    }
}

/// Maximizes `t` subject to exact moments and `λ_j ≥ t |R_j|`.
///
/// The returned weights are then re-balanced: among rules keeping
/// `λ_j ≥ t* |R_j|`, the one minimizing `e` with
/// `λ_j / |R_j| ∈ [1 − e, 1 + e]` (bisection on `e`).
pub fn lp_maxmin_weights(basis: &OrthonormalBasis, nodes: &[Point], measures: &[f64]) -> Result<CubatureRule, CubatureError> {
    if nodes.len() != measures.len() || nodes.is_empty() {
        return Err(CubatureError::Input("nodes and measures must be nonempty and of equal length".into()));
    }
    if measures.iter().any(|&m| !(m > 0.0)) {
        return Err(CubatureError::Input("cell measures must be positive".into()));
    }
    let q = basis.matrix(nodes);
    let n = nodes.len();
    let k = basis.len();
    // columns scaled by |R_j| so the unknowns are w_j = λ_j / |R_j|
    let a = DMatrix::from_fn(k, n, |r, j| q[(r, j)] * measures[j]);
    let b = DVector::from_column_slice(basis.integrals());
    let rowsum = a.column_sum();
    let mut full = DMatrix::zeros(k, n + 1);
    full.view_mut((0, 0), (k, n)).copy_from(&a);
    full.set_column(n, &rowsum);
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let problem = LpProblem {
        a: full,
        b: b.iter().copied().collect(),
        c,
        upper: vec![f64::INFINITY; n + 1],
    };
    let (x, t_star) = lp_result(simplex::solve(&problem, FEASIBILITY_TOL, SIMPLEX_CAP))?;
    let mut best: Vec<f64> = (0..n).map(|j| x[j] + t_star).collect();
    let floor = t_star;
    let w_max = best.iter().copied().fold(0.0, f64::max);
    let w_min = best.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo_e, mut hi_e) = (0.0, (w_max - 1.0).max(1.0 - w_min).max(0.0));
    for _ in 0..30 {
        let e = 0.5 * (lo_e + hi_e);
        match boxed_weights(&a, &b, (1.0 - e).max(floor), 1.0 + e)? {
            Some(w) => {
                best = w;
                hi_e = e;
            }
            None => lo_e = e,
        }
    }
    let weights: Vec<f64> = best.iter().zip(measures).map(|(w, m)| w * m).collect();
    let residual = moment_residual(basis, nodes, &weights);
    if residual > RESIDUAL_TOL {
        return Err(CubatureError::Residual { residual });
    }
    Ok(CubatureRule {
        nodes: nodes.to_vec(),
        weights,
        degree: basis.degree(),
        residual,
        t_star: Some(t_star),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    /// Worst relative error on random polynomials of the design degree.
    pub exact_error: f64,
    /// Worst relative error one degree above.
    pub next_degree_error: f64,
    pub upper_ratio_min: f64,
    pub upper_ratio_max: f64,
    /// Number of `j` with `λ_j < |R_j|/4`.
    pub lower_bound_failures: Option<usize>,
}

impl VerifyReport {
    pub fn upper_spread(&self) -> f64 {
        self.upper_ratio_max / self.upper_ratio_min
    }
}

/// Integration errors, `λ_j / |U(ξ_j, 1/n)|` and the `|R_j|/4` lower bound.
pub fn verify_rule(rule: &CubatureRule, dom: &Domain, measures: Option<&[f64]>, trials: usize, seed: u64) -> Result<VerifyReport, CubatureError> {
    let n = rule.degree;
    let mom = moments(dom, n + 1)?;
    let err_at = |deg: usize| -> Result<f64, CubatureError> {
        let errs: Vec<Result<f64, CubatureError>> = (0..trials)
            .into_par_iter()
            .map(|i| {
                let f = random_polynomial(2, deg, trial_seed(seed, i as u64))?;
                let exact = integrate_polynomial(&f, &mom);
                let approx = rule.integrate(&|x| f.eval_unchecked(&x));
                let scale = rule.integrate(&|x| f.eval_unchecked(&x).abs()).max(exact.abs());
                Ok((approx - exact).abs() / scale)
            })
            .collect();
        Ok(errs.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().fold(0.0, f64::max))
    };
    let exact_error = err_at(n)?;
    let next_degree_error = err_at(n + 1)?;
    let radius = 1.0 / n.max(1) as f64;
    let ratios: Vec<Result<f64, GeometryError>> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .enumerate()
        .map(|(j, (&x, &w))| Ok(w / dom.ball_volume_mc(x, radius, 4000, trial_seed(seed ^ 0x5555, j as u64))?.estimate))
        .collect();
    let ratios = ratios.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(VerifyReport {
        exact_error,
        next_degree_error,
        upper_ratio_min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        upper_ratio_max: ratios.iter().copied().fold(0.0, f64::max),
        lower_bound_failures: measures.map(|m| rule.weights.iter().zip(m).filter(|(l, r)| **l < 0.25 * **r).count()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TFunctionalReport {
    /// `c_j = (4/3) λ_j/|Ω| − (1/3) |R_j|/|Ω|`, so that `T = Σ c_j δ_{ξ_j}`.
    pub coeff_min: f64,
    pub coeff_sum: f64,
    /// Worst `|T f − Σ c_j f(ξ_j)|` over random `f ∈ Π_n`.
    pub identity_error: f64,
}

impl TFunctionalReport {
    pub fn convex(&self) -> bool {
        self.coeff_min >= 0.0 && (self.coeff_sum - 1.0).abs() <= 1e-8 && self.identity_error <= 1e-8
    }
}

/// Writes `Tf = (4/3)|Ω|⁻¹∫f − (1/3)|Ω|⁻¹ Σ f(ξ_j)|R_j|` through the rule's weights.
pub fn t_functional_report(rule: &CubatureRule, measures: &[f64], dom: &Domain, trials: usize, seed: u64) -> Result<TFunctionalReport, CubatureError> {
    let area = dom.area();
    let coeffs: Vec<f64> = rule
        .weights
        .iter()
        .zip(measures)
        .map(|(l, r)| (4.0 / 3.0) * l / area - r / (3.0 * area))
        .collect();
    let mom = moments(dom, rule.degree)?;
    let errs: Vec<Result<f64, CubatureError>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let f = random_polynomial(2, rule.degree, trial_seed(seed, i as u64))?;
            let vals: Vec<f64> = rule.nodes.iter().map(|x| f.eval_unchecked(x)).collect();
            let t = (4.0 / 3.0) * integrate_polynomial(&f, &mom) / area
                - compensated_sum(vals.iter().zip(measures).map(|(v, r)| v * r)) / (3.0 * area);
            let comb = compensated_sum(vals.iter().zip(&coeffs).map(|(v, c)| v * c));
            let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            Ok((t - comb).abs() / scale)
        })
        .collect();
    let identity_error = errs.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().fold(0.0, f64::max);
    Ok(TFunctionalReport {
        coeff_min: coeffs.iter().copied().fold(f64::INFINITY, f64::min),
        coeff_sum: compensated_sum(coeffs.iter().copied()),
        identity_error,
    })
}
