//! The parabola family `Φ_A(z, t) = (z + t, Q_A(z, t))` on a graph patch and
//! the recovery of weighted tangential derivatives from it.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{stream_rng, GraphPatch, Point};
use crate::polycalc::{binomial, composite_derivative, PolyError, Polynomial, Quadratic};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParabolaError {
    #[error("A = {a} must exceed M = {m}")]
    BelowCurvature { a: f64, m: f64 },
    #[error("A = {a} is below the threshold {a_bar}")]
    BelowThreshold { a: f64, a_bar: f64 },
    #[error("patch Hessian bound {hess} exceeds M = {m}")]
    CurvatureBound { hess: f64, m: f64 },
    #[error("({z}, {t}) is outside E_A")]
    OutsideDomain { z: f64, t: f64 },
    #[error("image ({}, {}) is outside G(lambda)", .point[0], .point[1])]
    ImageOutside { point: Point },
    #[error("({}, {}) is outside G", .point[0], .point[1])]
    OutsidePatch { point: Point },
    #[error("root not bracketed on [0, a1]: h(a1) = {h_end} < depth {depth}")]
    NotBracketed { h_end: f64, depth: f64 },
    #[error("u_A = {u} violates [{lo}, {hi}]")]
    BoundViolation { u: f64, lo: f64, hi: f64 },
    #[error("Vandermonde system has condition number {cond:e}")]
    IllConditioned { cond: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// `Q_A` and `Φ_A` for one parameter `A` on a patch of base `a`.
#[derive(Debug, Clone)]
pub struct ParabolaFamily {
    patch: GraphPatch,
    a_param: f64,
    lambda: f64,
    a0: f64,
    a1: f64,
    a_bar: f64,
}

/// `Ā = (2 + 16L/a) M² + M`.
pub fn threshold(patch: &GraphPatch) -> f64 {
    let (a, l, m) = (patch.base(), patch.l(), patch.m());
    (2.0 + 16.0 * l / a) * m * m + m
}

impl ParabolaFamily {
    /// Family with `λ = 1 + 1/M`.
    pub fn new(patch: GraphPatch, a_param: f64) -> Result<Self, ParabolaError> {
        let lambda = 1.0 + 1.0 / patch.m();
        Self::with_lambda(patch, a_param, lambda)
    }

    pub fn with_lambda(patch: GraphPatch, a_param: f64, lambda: f64) -> Result<Self, ParabolaError> {
        let m = patch.m();
        if !(a_param > m) {
            return Err(ParabolaError::BelowCurvature { a: a_param, m });
        }
        let a_bar = threshold(&patch);
        if a_param < a_bar {
            return Err(ParabolaError::BelowThreshold { a: a_param, a_bar });
        }
        if patch.hess_max() > m || patch.dg(0.0).abs() > m {
            return Err(ParabolaError::CurvatureBound {
                hess: patch.hess_max().max(patch.dg(0.0).abs()),
                m,
            });
        }
        if !(lambda > 1.0) {
            return Err(ParabolaError::Invalid(format!("lambda = {lambda} must exceed 1")));
        }
        let (a, l) = (patch.base(), patch.l());
        let a0 = (2.0 * l * a * lambda / (a_param + m)).sqrt();
        let a1 = (2.0 * l * a / (a_param - m)).sqrt();
        Ok(Self {
            patch,
            a_param,
            lambda,
            a0,
            a1,
            a_bar,
        })
    }

    pub fn patch(&self) -> &GraphPatch {
        &self.patch
    }

    pub fn a(&self) -> f64 {
        self.a_param
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a_bar(&self) -> f64 {
        self.a_bar
    }

    /// `Q_A(z, t)` as a quadratic in `t`.
    pub fn quadratic(&self, z: f64) -> Quadratic {
        let [g, g1, _] = self.patch.jet(z);
        Quadratic {
            q0: g,
            q1: g1,
            q2: -self.a_param,
        }
    }

    pub fn q(&self, z: f64, t: f64) -> f64 {
        self.quadratic(z).value(t)
    }

    pub fn in_e_a(&self, z: f64, t: f64) -> bool {
        let r = self.lambda * self.patch.base() * (1.0 + 1e-12);
        z.abs() <= r && (z + t).abs() <= r && t.abs() <= self.a0 * (1.0 + 1e-12)
    }

    pub fn phi_map(&self, z: f64, t: f64) -> Result<Point, ParabolaError> {
        if !self.in_e_a(z, t) {
            return Err(ParabolaError::OutsideDomain { z, t });
        }
        let p = [z + t, self.q(z, t)];
        let depth = self.patch.depth(p);
        let lb = self.lambda * self.patch.l() * self.patch.base();
        let tol = 1e-12 * (1.0 + self.patch.max_g().abs());
        if depth < -tol || depth > lb + tol {
            return Err(ParabolaError::ImageOutside { point: p });
        }
        Ok(p)
    }

    /// `h(s) = g(x) − Q_A(x − s, s)`.
    fn h(&self, x: f64, s: f64) -> f64 {
        self.patch.g(x) - self.q(x - s, s)
    }

    /// `(z, t)` with `Φ_A(z, t) = (x, y)` and `0 ≤ t ≤ a1`.
    pub fn phi_inverse(&self, x: f64, y: f64) -> Result<(f64, f64), ParabolaError> {
        let (a, l) = (self.patch.base(), self.patch.l());
        let depth = self.patch.depth([x, y]);
        let tol = 1e-12 * (1.0 + self.patch.max_g().abs());
        if x.abs() > a * (1.0 + 1e-12) || depth < -tol || depth > l * a + tol {
            return Err(ParabolaError::OutsidePatch { point: [x, y] });
        }
        let depth = depth.max(0.0);
        if depth == 0.0 {
            return Ok((x, 0.0));
        }
        let h_end = self.h(x, self.a1);
        if h_end < depth {
            return Err(ParabolaError::NotBracketed { h_end, depth });
        }
        let (mut lo, mut hi) = (0.0, self.a1);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.h(x, mid) < depth {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..4 {
            // h′(s) = (A + g″(x − s)) s
            let d = (self.a_param + self.patch.d2g(x - s)) * s;
            if d <= 0.0 {
                break;
            }
            let next = s - (self.h(x, s) - depth) / d;
            if !(next >= 0.0 && next <= self.a1) {
                break;
            }
            s = next;
        }
        Ok((x - s, s))
    }

    /// Every sign change of `h − δ` on a grid of `[0, a1]`, refined by bisection.
    pub fn inverse_roots(&self, x: f64, y: f64, grid: usize) -> Vec<f64> {
        let depth = self.patch.depth([x, y]);
        let f = |s: f64| self.h(x, s) - depth;
        let mut roots = Vec::new();
        let mut prev = (0.0, f(0.0));
        if prev.1 == 0.0 {
            roots.push(0.0);
        }
        for k in 1..=grid {
            let s = self.a1 * k as f64 / grid as f64;
            let v = f(s);
            if v == 0.0 {
                roots.push(s);
            } else if prev.1 != 0.0 && (prev.1 < 0.0) != (v < 0.0) {
                let (mut lo, mut hi) = (prev.0, s);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if (f(mid) < 0.0) == (prev.1 < 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev = (s, v);
        }
        roots
    }

    /// `|det J_{Φ_A}(z, t)| = (A + g″(z)) |t|`.
    pub fn jacobian_det(&self, z: f64, t: f64) -> f64 {
        (self.a_param + self.patch.d2g(z)) * t.abs()
    }

    /// Central finite-difference `|det J_{Φ_A}|` with step `h`.
    pub fn jacobian_fd(&self, z: f64, t: f64, h: f64) -> f64 {
        let m = |z: f64, t: f64| [z + t, self.q(z, t)];
        let (zp, zm) = (m(z + h, t), m(z - h, t));
        let (tp, tm) = (m(z, t + h), m(z, t - h));
        let dz = [(zp[0] - zm[0]) / (2.0 * h), (zp[1] - zm[1]) / (2.0 * h)];
        let dt = [(tp[0] - tm[0]) / (2.0 * h), (tp[1] - tm[1]) / (2.0 * h)];
        (dz[0] * dt[1] - dz[1] * dt[0]).abs()
    }

    /// `w_A(z, t) = g′(z + t) − g′(z) + A t`.
    pub fn w_a(&self, z: f64, t: f64) -> f64 {
        self.patch.dg(z + t) - self.patch.dg(z) + self.a_param * t
    }

    /// Two-sided bound on `u_A` at depth `δ`.
    pub fn u_bounds(&self, depth: f64) -> (f64, f64) {
        let (a, m) = (self.a_param, self.patch.m());
        let s = (2.0 * depth.max(0.0)).sqrt();
        ((a - m) / (a + m).sqrt() * s, (a + m) / (a - m).sqrt() * s)
    }

    /// `u_A(x, y)`, checked against its two-sided bound in `√δ`.
    pub fn u_a(&self, x: f64, y: f64) -> Result<f64, ParabolaError> {
        let (z, t) = self.phi_inverse(x, y)?;
        let u = self.w_a(z, t);
        let (lo, hi) = self.u_bounds(self.patch.depth([x, y]));
        let slack = 1e-10 * (1.0 + hi);
        if u < lo - slack || u > hi + slack {
            return Err(ParabolaError::BoundViolation { u, lo, hi });
        }
        Ok(u)
    }

    /// `D^{(ℓ)} ∂_2^j f` with `D = ∂_1 + g′(x0) ∂_2` frozen at `x0`.
    fn tangential(&self, f: &Polynomial, x0: f64, ell: usize, j: usize) -> Result<Polynomial, ParabolaError> {
        let dir = [1.0, self.patch.dg(x0)];
        Ok(f.partial_multi(&[0, j]).directional_power(&dir, ell)?)
    }

    /// `S_1 = Σ_j C(r, j) (−u_A)^j D^{(r−j)} ∂_2^j f` at `(x0, y0)`.
    pub fn s1_term(&self, f: &Polynomial, r: usize, x0: f64, y0: f64) -> Result<f64, ParabolaError> {
        let u = self.u_a(x0, y0)?;
        self.s1_with_u(f, r, x0, y0, u)
    }

    fn s1_with_u(&self, f: &Polynomial, r: usize, x0: f64, y0: f64, u: f64) -> Result<f64, ParabolaError> {
        check_plane(f)?;
        let mut total = 0.0;
        for j in 0..=r {
            let d = self.tangential(f, x0, r - j, j)?;
            total += binomial(r, j) as f64 * (-u).powi(j as i32) * d.eval_unchecked(&[x0, y0]);
        }
        Ok(total)
    }

    /// `F^{(r)}(t0)` for `F(t) = f(Φ_A(z0, t))`, split into `S_1` and the rest.
    pub fn decomposition_check(&self, f: &Polynomial, r: usize, x0: f64, y0: f64) -> Result<DerivativeDecomposition, ParabolaError> {
        check_plane(f)?;
        let (z0, t0) = self.phi_inverse(x0, y0)?;
        let u = self.w_a(z0, t0);
        let full = composite_derivative(f, z0, self.quadratic(z0), r, t0)?;
        let s1 = self.s1_with_u(f, r, x0, y0, u)?;
        // terms with at least one factor of Q″ = −A:
        // Σ_{i+j+2k=r, k≥1} r!/(i! j! k! 2^k) (−u)^j (−A)^k D^{(i)} ∂_2^{j+k} f
        let rf = factorial(r);
        let mut curvature_block = 0.0;
        let mut table = Vec::new();
        for k in 1..=r / 2 {
            for j in 0..=(r - 2 * k) {
                let i = r - 2 * k - j;
                let w = rf / (factorial(i) * factorial(j) * factorial(k) * 2f64.powi(k as i32));
                let d = self.tangential(f, x0, i, j + k)?.eval_unchecked(&[x0, y0]);
                let term = w * (-u).powi(j as i32) * (-self.a_param).powi(k as i32) * d;
                curvature_block += term;
                table.push(OperatorTerm { i, j, k, weight: w, value: d });
            }
        }
        Ok(DerivativeDecomposition {
            r,
            point: [x0, y0],
            param: (z0, t0),
            u,
            s1,
            residual: full - s1,
            full,
            curvature_block,
            table,
        })
    }
}

fn check_plane(f: &Polynomial) -> Result<(), ParabolaError> {
    if f.dim() != 2 {
        return Err(PolyError::DimensionMismatch {
            expected: 2,
            found: f.dim(),
        }
        .into());
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// One term `D^{(i)} ∂_2^{j+k} f` of the curvature block.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTerm {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub weight: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeDecomposition {
    pub r: usize,
    pub point: Point,
    pub param: (f64, f64),
    pub u: f64,
    pub s1: f64,
    /// `full − S_1`.
    pub residual: f64,
    pub full: f64,
    /// Closed-form sum of the terms carrying a factor of `A`.
    pub curvature_block: f64,
    pub table: Vec<OperatorTerm>,
}

impl DerivativeDecomposition {
    /// `|residual − curvature block|` relative to the size of the terms.
    pub fn identity_error(&self) -> f64 {
        let scale = 1.0 + self.full.abs().max(self.s1.abs()).max(self.curvature_block.abs());
        (self.residual - self.curvature_block).abs() / scale
    }
}

/// Parameters `A_0 = Ā < A_1 < … < A_r` with
/// `(A_{i+1} − M)/√(A_{i+1} + M) ≥ 2 (A_i + M)/√(A_i − M)`, so that
/// consecutive values of `u_{A_i}` differ at least by a factor 2.
pub fn separated_parameters(patch: &GraphPatch, r: usize) -> Vec<f64> {
    let m = patch.m();
    let lower = |a: f64| (a - m) / (a + m).sqrt();
    let upper = |a: f64| (a + m) / (a - m).sqrt();
    let mut out = vec![threshold(patch).max(m * (1.0 + 1e-9))];
    while out.len() <= r {
        let prev = *out.last().expect("nonempty");
        let target = 2.0 * upper(prev);
        let mut hi = prev * 2.0;
        while lower(hi) < target {
            hi *= 2.0;
        }
        let mut lo = prev;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if lower(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(hi);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    /// Solved values `C(r, j) δ^{j/2} D^{(r−j)} ∂_2^j f`.
    pub values: Vec<f64>,
    /// The same quantities evaluated directly.
    pub direct: Vec<f64>,
    pub cond: f64,
    pub s1: Vec<f64>,
}

impl Recovery {
    /// Largest deviation relative to the largest direct value.
    pub fn relative_error(&self) -> f64 {
        let scale = self.direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = self.values.iter().zip(&self.direct).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if scale == 0.0 {
            err
        } else {
            err / scale
        }
    }
}

/// Recovers the weighted tangential derivatives at `(x0, y0)` from the
/// values of `S_1` for `r + 1` families.
pub fn vandermonde_recover(fams: &[ParabolaFamily], f: &Polynomial, r: usize, x0: f64, y0: f64) -> Result<Recovery, ParabolaError> {
    if fams.len() != r + 1 {
        return Err(ParabolaError::Invalid(format!("need {} families, got {}", r + 1, fams.len())));
    }
    let patch = fams[0].patch();
    let depth = patch.depth([x0, y0]);
    if !(depth > 0.0) {
        return Err(ParabolaError::Invalid("recovery needs positive depth".into()));
    }
    let sd = depth.sqrt();
    let n = r + 1;
    let mut v = DMatrix::<f64>::zeros(n, n);
    let mut s1 = Vec::with_capacity(n);
    for (i, fam) in fams.iter().enumerate() {
        let u = fam.u_a(x0, y0)?;
        let b = -u / sd;
        for j in 0..n {
            v[(i, j)] = b.powi(j as i32);
        }
        s1.push(fam.s1_with_u(f, r, x0, y0, u)?);
    }
    // equilibrate columns before solving and measuring conditioning
    let scales: Vec<f64> = (0..n).map(|j| v.column(j).amax().max(f64::MIN_POSITIVE)).collect();
    for j in 0..n {
        let s = scales[j];
        v.column_mut(j).scale_mut(1.0 / s);
    }
    let sv = v.clone().svd(false, false).singular_values;
    let cond = sv.max() / sv.min();
    if !(cond <= 1e10) {
        return Err(ParabolaError::IllConditioned { cond });
    }
    let rhs = DVector::from_vec(s1.clone());
    let sol = v
        .lu()
        .solve(&rhs)
        .ok_or(ParabolaError::IllConditioned { cond: f64::INFINITY })?;
    let values = (0..n).map(|j| sol[j] / scales[j]).collect();
    let fam = &fams[0];
    let mut direct = Vec::with_capacity(n);
    for j in 0..n {
        let d = fam.tangential(f, x0, r - j, j)?.eval_unchecked(&[x0, y0]);
        direct.push(binomial(r, j) as f64 * sd.powi(j as i32) * d);
    }
    Ok(Recovery { values, direct, cond, s1 })
}

/// Worst-case figures of the Jacobian, `u_A`-bound and inverse checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParabolaSuite {
    pub jacobian_points: usize,
    /// `max |det_fd − (A + g″)|t|| / ((A + g″)|t|)` over the grid.
    pub jacobian_max_rel: f64,
    pub bound_points: usize,
    pub bound_violations: usize,
    pub roundtrip_points: usize,
    /// `max ‖Φ_A(Φ_A^{-1}(x, y)) − (x, y)‖_∞`.
    pub roundtrip_max: f64,
}

/// Compares the Jacobian formula with central differences on a
/// `grid × grid` lattice of `(z, t) ∈ [−b, b] × [−a0, a0]` with `|t| ≥ 10⁻³`,
/// checks the `u_A` bounds at `probes` uniform points of `G`, and the round
/// trip `Φ_A ∘ Φ_A^{-1}` at `inverse_points` more.
pub fn parabola_suite(fam: &ParabolaFamily, grid: usize, probes: usize, inverse_points: usize, seed: u64) -> Result<ParabolaSuite, ParabolaError> {
    let b = fam.patch().base();
    let h = 1e-5 * b.min(fam.a0());
    let cells: Vec<(f64, f64)> = (0..grid * grid)
        .map(|k| {
            let (i, j) = (k / grid, k % grid);
            let z = -b + 2.0 * b * (i as f64 + 0.5) / grid as f64;
            let t = -fam.a0() + 2.0 * fam.a0() * (j as f64 + 0.5) / grid as f64;
            (z, t)
        })
        .filter(|&(_, t)| t.abs() >= 1e-3)
        .collect();
    let jac: Vec<f64> = cells
        .par_iter()
        .map(|&(z, t)| {
            let exact = fam.jacobian_det(z, t);
            (fam.jacobian_fd(z, t, h) - exact).abs() / exact
        })
        .collect();
    let mut rng = stream_rng(seed, 0);
    let pts: Vec<Point> = (0..probes + inverse_points).map(|_| fam.patch().sample_g(&mut rng)).collect();
    let bound_violations = pts[..probes]
        .par_iter()
        .map(|p| match fam.u_a(p[0], p[1]) {
            Ok(_) => Ok(0),
            Err(ParabolaError::BoundViolation { .. }) => Ok(1),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<usize>, _>>()?
        .iter()
        .sum();
    let trips = pts[probes..]
        .par_iter()
        .map(|p| {
            let (z, t) = fam.phi_inverse(p[0], p[1])?;
            let q = fam.phi_map(z, t)?;
            Ok((q[0] - p[0]).abs().max((q[1] - p[1]).abs()))
        })
        .collect::<Result<Vec<f64>, ParabolaError>>()?;
    Ok(ParabolaSuite {
        jacobian_points: cells.len(),
        jacobian_max_rel: jac.iter().fold(0.0, |m: f64, &v| m.max(v)),
        bound_points: probes,
        bound_violations,
        roundtrip_points: inverse_points,
        roundtrip_max: trips.iter().fold(0.0, |m: f64, &v| m.max(v)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectivityReport {
    pub points: usize,
    pub step: f64,
    pub tolerance: f64,
    pub violation_count: usize,
    /// Up to 16 offending parameter pairs.
    pub violations: Vec<((f64, f64), (f64, f64))>,
}

impl InjectivityReport {
    pub fn pass(&self) -> bool {
        self.violation_count == 0
    }
}

/// Looks for distinct grid points of `E_A^+` whose images nearly coincide.
pub fn injectivity_probe(fam: &ParabolaFamily, h: f64) -> Result<InjectivityReport, ParabolaError> {
    if !(h > 0.0) {
        return Err(ParabolaError::Invalid("grid step must be positive".into()));
    }
    let r = fam.lambda() * fam.patch().base();
    let nz = (2.0 * r / h).floor() as i64;
    let nt = (fam.a0() / h).floor() as i64;
    let params: Vec<(f64, f64)> = (0..=nz)
        .flat_map(|i| (0..=nt).map(move |k| (-r + i as f64 * h, k as f64 * h)))
        .filter(|&(z, t)| fam.in_e_a(z, t))
        .collect();
    let images: Vec<Point> = params.par_iter().map(|&(z, t)| [z + t, fam.q(z, t)]).collect();
    let eps = h * h * (fam.a() + fam.patch().m());
    let key = |p: Point| ((p[0] / eps).floor() as i64, (p[1] / eps).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in images.iter().enumerate() {
        buckets.entry(key(*p)).or_default().push(i);
    }
    let found: Vec<Vec<(usize, usize)>> = (0..images.len())
        .into_par_iter()
        .map(|i| {
            let (kx, ky) = key(images[i]);
            let mut out = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for &j in buckets.get(&(kx + dx, ky + dy)).into_iter().flatten() {
                        if j <= i {
                            continue;
                        }
                        let (pi, pj) = (images[i], images[j]);
                        let (qi, qj) = (params[i], params[j]);
                        let close = (pi[0] - pj[0]).hypot(pi[1] - pj[1]) <= eps;
                        let apart = (qi.0 - qj.0).hypot(qi.1 - qj.1) > 10.0 * h;
                        if close && apart {
                            out.push((i, j));
                        }
                    }
                }
            }
            out
        })
        .collect();
    let all: Vec<(usize, usize)> = found.into_iter().flatten().collect();
    Ok(InjectivityReport {
        points: params.len(),
        step: h,
        tolerance: eps,
        violation_count: all.len(),
        violations: all.iter().take(16).map(|&(i, j)| (params[i], params[j])).collect(),
    })
}
