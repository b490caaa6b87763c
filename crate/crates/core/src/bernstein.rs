//! Maximal tangential/normal derivative functionals, their growth in the
//! degree, the patch-level inequality with the `D^{(r)}` operators, and the
//! three-dimensional tangential frame reduction.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::discretize::{reference_norm, trial_seed, DiscretizeError};
use crate::domain::{stream_rng, BoundaryPoint, Domain, GeometryError, GraphPatch, Point};
use crate::polycalc::{apply_kemperman, binomial, kemperman_expand, PolyError, Polynomial};
use crate::quad::{compensated_sum, patch_rule, patch_rule_lambda, refined_rule, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BernsteinError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("the polynomial vanishes identically")]
    ZeroPolynomial,
}

/// Minimum number of boundary samples in the table.
pub const BOUNDARY_FLOOR: usize = 32;

/// Orders `(r, j, l)` of `φ^j D_{n,μ}^{r, j+l}` with the window parameter `μ`
/// and the boundary sampling density (samples per window radius `μ/n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaximalDerivativeSpec {
    pub r: usize,
    pub j: usize,
    pub l: usize,
    pub mu: f64,
    pub density: usize,
}

impl MaximalDerivativeSpec {
    /// Spec with the smallest admissible `μ = √diam + 1` and density 64.
    pub fn new(dom: &Domain, r: usize, j: usize, l: usize) -> Self {
        Self {
            r,
            j,
            l,
            mu: dom.diameter().sqrt() + 1.0,
            density: 64,
        }
    }

    pub fn validate(&self, dom: &Domain) -> Result<(), BernsteinError> {
        let min_mu = dom.diameter().sqrt() + 1.0;
        if !(self.mu >= min_mu - 1e-12) {
            return Err(BernsteinError::InvalidParameter(format!("mu = {} is below sqrt(diam) + 1 = {min_mu}", self.mu)));
        }
        if self.density == 0 {
            return Err(BernsteinError::InvalidParameter("density must be positive".into()));
        }
        Ok(())
    }

    /// Number of derivatives along `τ`.
    pub fn tangential(&self) -> usize {
        self.r
    }

    /// Number of derivatives along `n_η`.
    pub fn normal(&self) -> usize {
        self.j + self.l
    }

    /// Total derivative order.
    pub fn order(&self) -> usize {
        self.r + self.j + self.l
    }

    /// The exponent `r + j + 2l`.
    pub fn rate(&self) -> usize {
        self.r + self.j + 2 * self.l
    }

    /// Size of the uniform boundary table used at degree parameter `n`: the
    /// next power of two above `density · perimeter · n / μ`, at least
    /// [`BOUNDARY_FLOOR`]. Doubling the density doubles the table, and the
    /// larger table contains the smaller one.
    pub fn table_size(&self, dom: &Domain, n: usize) -> usize {
        let want = (self.density as f64 * dom.perimeter() * n.max(1) as f64 / self.mu).ceil() as usize;
        want.max(BOUNDARY_FLOOR).next_power_of_two()
    }
}

/// Coefficients of `(a₁X + a₂Y)^p (b₁X + b₂Y)^q` indexed by the power of `X`.
fn direction_coefficients(a: Point, p: usize, b: Point, q: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    let times = |d: Point, c: &mut Vec<f64>| {
        let mut next = vec![0.0; c.len() + 1];
        for (k, v) in c.iter().enumerate() {
            next[k] += v * d[1];
            next[k + 1] += v * d[0];
        }
        *c = next;
    };
    for _ in 0..p {
        times(a, &mut c);
    }
    for _ in 0..q {
        times(b, &mut c);
    }
    c
}

/// `ξ ↦ D_{n,μ}^{r, j+l} f(ξ)` with the partial derivatives of order
/// `r + j + l` and the boundary table precomputed.
#[derive(Debug, Clone)]
pub struct MaximalOperator<'a> {
    dom: &'a Domain,
    spec: MaximalDerivativeSpec,
    n: usize,
    /// `∂₁^a ∂₂^{k−a} f` for `a = 0..=k`.
    partials: Vec<Polynomial>,
    table: Vec<BoundaryPoint>,
    /// Coefficients of `∂_τ^r ∂_{n_η}^{j+l}` in the partials, per table entry.
    coeffs: Vec<Vec<f64>>,
}

impl<'a> MaximalOperator<'a> {
    pub fn new(dom: &'a Domain, spec: MaximalDerivativeSpec, f: &Polynomial, n: usize) -> Result<Self, BernsteinError> {
        let size = spec.table_size(dom, n);
        Self::with_table_size(dom, spec, f, n, size)
    }

    pub fn with_table_size(
        dom: &'a Domain,
        spec: MaximalDerivativeSpec,
        f: &Polynomial,
        n: usize,
        size: usize,
    ) -> Result<Self, BernsteinError> {
        spec.validate(dom)?;
        if f.dim() != 2 {
            return Err(PolyError::DimensionMismatch { expected: 2, found: f.dim() }.into());
        }
        if n == 0 || size == 0 {
            return Err(BernsteinError::InvalidParameter("n and the table size must be positive".into()));
        }
        let k = spec.order();
        let partials = (0..=k).map(|a| f.partial_multi(&[a, k - a])).collect();
        let table: Vec<BoundaryPoint> = (0..size)
            .into_par_iter()
            .map(|i| dom.boundary_point(i as f64 / size as f64))
            .collect();
        let coeffs = table
            .iter()
            .map(|eta| direction_coefficients(eta.tangent, spec.tangential(), eta.normal, spec.normal()))
            .collect();
        Ok(Self {
            dom,
            spec,
            n,
            partials,
            table,
            coeffs,
        })
    }

    pub fn table_len(&self) -> usize {
        self.table.len()
    }

    /// `D_η^{r, j+l} f(ξ)`; the tangent is unique up to sign in the plane.
    fn at_eta(values: &[f64], coeffs: &[f64]) -> f64 {
        coeffs.iter().zip(values).map(|(c, v)| c * v).sum::<f64>().abs()
    }

    /// `D_{n,μ}^{r, j+l} f(ξ)` together with `φ_{n,Γ}(ξ)`.
    pub fn eval_with_phi(&self, xi: Point) -> Result<(f64, f64), BernsteinError> {
        let (dist, foot) = self.dom.dist_to_boundary(xi)?;
        let phi = dist.sqrt() + 1.0 / self.n as f64;
        let radius = self.spec.mu * phi;
        let values: Vec<f64> = self.partials.iter().map(|p| p.eval_unchecked(&xi)).collect();
        let own = direction_coefficients(foot.tangent, self.spec.tangential(), foot.normal, self.spec.normal());
        let mut best = Self::at_eta(&values, &own);
        for (eta, c) in self.table.iter().zip(&self.coeffs) {
            let d = (eta.position[0] - xi[0]).hypot(eta.position[1] - xi[1]);
            if d <= radius {
                best = best.max(Self::at_eta(&values, c));
            }
        }
        Ok((best, phi))
    }

    pub fn eval(&self, xi: Point) -> Result<f64, BernsteinError> {
        Ok(self.eval_with_phi(xi)?.0)
    }

    /// `φ_{n,Γ}(ξ)^j · D_{n,μ}^{r, j+l} f(ξ)`.
    pub fn weighted(&self, xi: Point) -> Result<f64, BernsteinError> {
        let (d, phi) = self.eval_with_phi(xi)?;
        Ok(phi.powi(self.spec.j as i32) * d)
    }
}

/// `D_{n,μ}^{r, j+l} f(ξ)` with a boundary table built for this call.
pub fn maximal_derivative(
    dom: &Domain,
    spec: &MaximalDerivativeSpec,
    f: &Polynomial,
    xi: Point,
    n: usize,
) -> Result<f64, BernsteinError> {
    MaximalOperator::new(dom, *spec, f, n)?.eval(xi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub n: usize,
    pub p: f64,
    /// `‖φ^j D_{n,μ}^{r, j+l} f‖_p`.
    pub value: f64,
    /// `‖f‖_p`.
    pub norm: f64,
    pub ratio: f64,
    pub table_size: usize,
    pub nodes: usize,
}

/// `‖φ_{n,Γ}^j D_{n,μ}^{r, j+l} f‖_p / ‖f‖_p` on the refined reference rule;
/// for `p = ∞` the maximum over the rule nodes and the boundary table.
pub fn bernstein_functional(
    dom: &Domain,
    spec: &MaximalDerivativeSpec,
    f: &Polynomial,
    n: usize,
    p: f64,
) -> Result<FunctionalReport, BernsteinError> {
    if !(p > 0.0) {
        return Err(BernsteinError::InvalidParameter(format!("p = {p} must be positive")));
    }
    let op = MaximalOperator::new(dom, *spec, f, n)?;
    // the maximal function is only piecewise smooth, even squared
    let deg = f.degree().max(n);
    let rule = refined_rule(dom, 2 * deg + 6, 2, 2);
    let vals: Vec<f64> = rule
        .nodes
        .par_iter()
        .map(|&x| op.weighted(x))
        .collect::<Result<_, _>>()?;
    let fv = |x: Point| f.eval_unchecked(&x);
    let norm = reference_norm(dom, &fv, p, &rule)?;
    if norm == 0.0 {
        return Err(BernsteinError::ZeroPolynomial);
    }
    let value = if p.is_infinite() {
        let edge: Vec<f64> = op
            .table
            .par_iter()
            .map(|eta| op.weighted(eta.position))
            .collect::<Result<_, _>>()?;
        vals.iter().chain(&edge).fold(0.0f64, |m, &v| m.max(v))
    } else {
        compensated_sum(vals.iter().zip(&rule.weights).map(|(v, w)| v.powf(p) * w)).powf(1.0 / p)
    };
    Ok(FunctionalReport {
        n,
        p,
        value,
        norm,
        ratio: value / norm,
        table_size: op.table_len(),
        nodes: rule.len(),
    })
}

/// Least-squares slope of `log ratio` against `log n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub ns: Vec<usize>,
    pub ratios: Vec<f64>,
    /// Degrees left out because the derivative order exceeds them.
    pub excluded: Vec<usize>,
    /// `None` when the family is degenerate (a vanishing ratio, or fewer
    /// than two usable degrees).
    pub slope: Option<f64>,
}

impl GrowthFit {
    pub fn degenerate(&self) -> bool {
        self.slope.is_none()
    }
}

pub fn log_log_slope(ns: &[usize], ys: &[f64]) -> Option<f64> {
    if ns.len() < 2 || ys.iter().any(|&y| !(y > 0.0) || !y.is_finite()) {
        return None;
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ls.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Fits the growth of [`bernstein_functional`] over `n_grid` for the family
/// `n ↦ family(n)`.
pub fn growth_exponent(
    dom: &Domain,
    spec: &MaximalDerivativeSpec,
    family: &dyn Fn(usize) -> Result<Polynomial, BernsteinError>,
    p: f64,
    n_grid: &[usize],
) -> Result<GrowthFit, BernsteinError> {
    let ratio = |n: usize| match bernstein_functional(dom, spec, &family(n)?, n, p) {
        Ok(rep) => Ok(rep.ratio),
        Err(BernsteinError::ZeroPolynomial) => Ok(0.0),
        Err(e) => Err(e),
    };
    fit_growth(n_grid, spec.order(), &ratio)
}

/// Growth of the largest ratio over `samples` members of the seeded random
/// family at each degree; the maximum tracks the supremum over `f` that the
/// inequality bounds better than a single draw does.
pub fn sampled_growth(
    dom: &Domain,
    spec: &MaximalDerivativeSpec,
    p: f64,
    n_grid: &[usize],
    samples: usize,
    seed: u64,
) -> Result<GrowthFit, BernsteinError> {
    let ratio = |n: usize| -> Result<f64, BernsteinError> {
        let mut best = 0.0f64;
        for s in 0..samples {
            let f = random_family(dom, n, trial_seed(seed, s as u64))?;
            best = best.max(bernstein_functional(dom, spec, &f, n, p)?.ratio);
        }
        Ok(best)
    };
    fit_growth(n_grid, spec.order(), &ratio)
}

/// [`sampled_growth`] for the patch functional of [`patch_bernstein_check`].
#[allow(clippy::too_many_arguments)]
pub fn patch_growth(
    patch: &GraphPatch,
    r: usize,
    i: usize,
    j: usize,
    p: f64,
    lambda: f64,
    n_grid: &[usize],
    samples: usize,
    seed: u64,
) -> Result<GrowthFit, BernsteinError> {
    let ratio = |n: usize| -> Result<f64, BernsteinError> {
        let mut best = 0.0f64;
        for s in 0..samples {
            let f = random_patch_family(patch, lambda, n, trial_seed(seed, s as u64))?;
            best = best.max(patch_bernstein_check(patch, &f, r, i, j, p, lambda, 2 * n + 8)?.ratio);
        }
        Ok(best)
    };
    fit_growth(n_grid, r + i + j, &ratio)
}

fn fit_growth(n_grid: &[usize], order: usize, ratio: &dyn Fn(usize) -> Result<f64, BernsteinError>) -> Result<GrowthFit, BernsteinError> {
    if n_grid.len() < 4 {
        return Err(BernsteinError::InvalidParameter("the degree grid needs at least four values".into()));
    }
    let mut fit = GrowthFit {
        ns: Vec::new(),
        ratios: Vec::new(),
        excluded: Vec::new(),
        slope: None,
    };
    for &n in n_grid {
        if n < order {
            fit.excluded.push(n);
            continue;
        }
        fit.ns.push(n);
        fit.ratios.push(ratio(n)?);
    }
    fit.slope = log_log_slope(&fit.ns, &fit.ratios);
    Ok(fit)
}

/// Legendre polynomials `P_0..=P_n` of the coordinate `var` rescaled from
/// `[lo, hi]` to `[−1, 1]`.
fn legendre_in(var: usize, lo: f64, hi: f64, n: usize) -> Result<Vec<Polynomial>, PolyError> {
    let one = Polynomial::constant(2, 1.0)?;
    let mut t = Polynomial::coordinate(2, var)?.scaled(2.0 / (hi - lo));
    t.axpy(-(hi + lo) / (hi - lo), &one);
    let mut out = vec![one, t.clone()];
    for k in 1..n {
        let mut next = t.mul(&out[k]).scaled((2 * k + 1) as f64 / (k + 1) as f64);
        next.axpy(-(k as f64) / (k + 1) as f64, &out[k - 1]);
        out.push(next);
    }
    out.truncate(n + 1);
    Ok(out)
}

/// A bivariate polynomial stored in the box coordinates `u = (x − c)/h`.
/// Monomials in `x` lose all precision at moderate degree when the box is
/// small or far from the origin, as patch boxes are.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxPolynomial {
    pub poly: Polynomial,
    pub center: Point,
    pub half: Point,
}

impl BoxPolynomial {
    /// `f` itself, with the identity change of coordinates.
    pub fn plain(f: Polynomial) -> Self {
        Self {
            poly: f,
            center: [0.0, 0.0],
            half: [1.0, 1.0],
        }
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.poly
            .eval_unchecked(&[(x[0] - self.center[0]) / self.half[0], (x[1] - self.center[1]) / self.half[1]])
    }

    /// `∂₁^a ∂₂^b` in the original coordinates.
    pub fn partial(&self, a: usize, b: usize) -> Self {
        let s = self.half[0].powi(-(a as i32)) * self.half[1].powi(-(b as i32));
        Self {
            poly: self.poly.partial_multi(&[a, b]).scaled(s),
            center: self.center,
            half: self.half,
        }
    }

    /// The same polynomial in monomials of the original coordinates.
    pub fn to_plain(&self) -> Result<Polynomial, PolyError> {
        let m = vec![vec![1.0 / self.half[0], 0.0], vec![0.0, 1.0 / self.half[1]]];
        let c = [-self.center[0] / self.half[0], -self.center[1] / self.half[1]];
        self.poly.compose_affine(&m, &c)
    }
}

/// Degree-`n` polynomial `Σ_{a+b≤n} z_{ab} P_a(x̃) P_b(ỹ)` with standard
/// normal `z` and Legendre factors in bounding-box coordinates, seeded per
/// `(seed, n)`.
pub fn random_family(dom: &Domain, n: usize, seed: u64) -> Result<Polynomial, BernsteinError> {
    Ok(random_box_family(dom.bbox(), n, seed)?.to_plain()?.with_degree(n))
}

/// [`random_family`] on the box spanned by `G(λ)` in patch-local coordinates.
pub fn random_patch_family(patch: &GraphPatch, lambda: f64, n: usize, seed: u64) -> Result<BoxPolynomial, BernsteinError> {
    let b = lambda * patch.base();
    let bb = [-b, b, patch.min_g() - lambda * patch.l() * patch.base(), patch.max_g()];
    random_box_family(bb, n, seed)
}

/// Random Legendre combination of degree `n` on the box `[x0, x1] × [y0, y1]`.
pub fn random_box_family(bb: [f64; 4], n: usize, seed: u64) -> Result<BoxPolynomial, BernsteinError> {
    use rand_distr::{Distribution, StandardNormal};
    let px = legendre_in(0, -1.0, 1.0, n)?;
    let py = legendre_in(1, -1.0, 1.0, n)?;
    let mut rng = stream_rng(trial_seed(seed, n as u64), 0);
    let mut f = Polynomial::zeros(2, n)?;
    for total in 0..=n {
        for a in 0..=total {
            let z: f64 = StandardNormal.sample(&mut rng);
            f.axpy(z, &px[a].mul(&py[total - a]));
        }
    }
    Ok(BoxPolynomial {
        poly: f.with_degree(n),
        center: [0.5 * (bb[0] + bb[1]), 0.5 * (bb[2] + bb[3])],
        half: [0.5 * (bb[1] - bb[0]), 0.5 * (bb[3] - bb[2])],
    })
}

/// `T_n` of the first coordinate rescaled from the bounding box; its
/// oscillation concentrates at the two boundary points where the boundary
/// is vertical.
pub fn chebyshev_family(dom: &Domain, n: usize) -> Result<Polynomial, BernsteinError> {
    let bb = dom.bbox();
    let one = Polynomial::constant(2, 1.0)?;
    let mut t = Polynomial::coordinate(2, 0)?.scaled(2.0 / (bb[1] - bb[0]));
    t.axpy(-(bb[1] + bb[0]) / (bb[1] - bb[0]), &one);
    let (mut prev, mut cur) = (one, t.clone());
    if n == 0 {
        return Ok(prev);
    }
    for _ in 1..n {
        let mut next = t.mul(&cur).scaled(2.0);
        next.axpy(-1.0, &prev);
        prev = cur;
        cur = next;
    }
    Ok(cur.with_degree(n))
}

/// `D^{(r)} f(x, y) = Σ_a C(r, a) g'(x)^a ∂₁^{r−a} ∂₂^a f(x, y)`.
pub fn tangential_operator(patch: &GraphPatch, f: &Polynomial, r: usize, p: Point) -> f64 {
    let gp = patch.dg(p[0]);
    (0..=r)
        .map(|a| binomial(r, a) as f64 * gp.powi(a as i32) * f.partial_multi(&[r - a, a]).eval_unchecked(&p))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatchCheck {
    pub r: usize,
    pub i: usize,
    pub j: usize,
    pub n: usize,
    pub p: f64,
    pub lambda: f64,
    /// `‖φ_n^i D^{(r)} ∂₂^{i+j} f‖_{L^p(G)}`.
    pub value: f64,
    /// `‖f‖_{L^p(G(λ))}`.
    pub norm: f64,
    pub ratio: f64,
}

/// `‖φ_n^i D^{(r)} ∂₂^{i+j} f‖_{L^p(G)} / ‖f‖_{L^p(G(λ))}` with `f` in
/// patch-local coordinates and `n = deg f`; `r = 0` is the vertical-segment
/// baseline. `order` is the Gauss order per direction of the tensor rules.
#[allow(clippy::too_many_arguments)]
pub fn patch_bernstein_check(
    patch: &GraphPatch,
    f: &BoxPolynomial,
    r: usize,
    i: usize,
    j: usize,
    p: f64,
    lambda: f64,
    order: usize,
) -> Result<PatchCheck, BernsteinError> {
    if !(p > 0.0) || !(lambda >= 1.0) || f.poly.dim() != 2 {
        return Err(BernsteinError::InvalidParameter(format!("p = {p}, lambda = {lambda}, dim = {}", f.poly.dim())));
    }
    let n = f.degree().max(1);
    let partials: Vec<BoxPolynomial> = (0..=r).map(|a| f.partial(r - a, a + i + j)).collect();
    let left = |x: Point| {
        let gp = patch.dg(x[0]);
        let d: f64 = partials
            .iter()
            .enumerate()
            .map(|(a, q)| binomial(r, a) as f64 * gp.powi(a as i32) * q.eval(x))
            .sum();
        patch.phi_n(x, n as f64).powi(i as i32) * d.abs()
    };
    let inner = patch_rule(patch, order, order);
    let outer = patch_rule_lambda(patch, lambda, order, order);
    let lv: Vec<f64> = inner.nodes.par_iter().map(|&x| left(x)).collect();
    let fo: Vec<f64> = outer.nodes.par_iter().map(|&x| f.eval(x).abs()).collect();
    let (value, norm) = if p.is_infinite() {
        // G's nodes lie in G(λ) too, so they join the max on the right
        let fi = inner.nodes.iter().map(|&x| f.eval(x).abs());
        (
            lv.iter().fold(0.0f64, |m, &v| m.max(v)),
            fo.iter().copied().chain(fi).fold(0.0f64, f64::max),
        )
    } else {
        (
            compensated_sum(lv.iter().zip(&inner.weights).map(|(v, w)| v.powf(p) * w)).powf(1.0 / p),
            compensated_sum(fo.iter().zip(&outer.weights).map(|(v, w)| v.powf(p) * w)).powf(1.0 / p),
        )
    };
    if norm == 0.0 {
        return Err(BernsteinError::ZeroPolynomial);
    }
    Ok(PatchCheck {
        r,
        i,
        j,
        n,
        p,
        lambda,
        value,
        norm,
        ratio: value / norm,
    })
}

/// A point where `D^{(1)}(D^{(1)} f) ≠ D^{(2)} f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub point: Point,
    pub composed: f64,
    pub direct: f64,
}

/// Probes random points of `G` for a witness that the operators `D^{(ℓ)}`
/// do not compose like powers. The outer `∂₁` of the composition is a
/// central difference in `x`.
pub fn noncommutativity_witness(
    patch: &GraphPatch,
    f: &Polynomial,
    probes: usize,
    seed: u64,
) -> Result<Option<Witness>, BernsteinError> {
    let d1 = |x: Point, h: &Polynomial| tangential_operator(patch, h, 1, x);
    let fy = f.partial(1);
    let mut rng = stream_rng(seed, 0);
    for _ in 0..probes {
        let x = patch.sample_g(&mut rng);
        let step = 1e-4 * patch.base();
        let dx = (d1([x[0] + step, x[1]], f) - d1([x[0] - step, x[1]], f)) / (2.0 * step);
        // ∂₂ commutes with D^{(1)} because g' does not depend on y
        let dy = d1(x, &fy);
        let composed = dx + patch.dg(x[0]) * dy;
        let direct = tangential_operator(patch, f, 2, x);
        let scale = composed.abs().max(direct.abs()).max(f.max_abs_coeff());
        if (composed - direct).abs() > 1e-5 * scale {
            return Ok(Some(Witness { point: x, composed, direct }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameCheck {
    pub direct: f64,
    pub expanded: f64,
    pub terms: usize,
}

impl FrameCheck {
    pub fn error(&self) -> f64 {
        (self.direct - self.expanded).abs()
    }

    pub fn agrees(&self, tol: f64) -> bool {
        self.error() <= tol * self.direct.abs().max(1.0)
    }
}

/// `∂_{ξ₁}^{α₁} ∂_{ξ₂}^{α₂} f(ξ)` with the tangent frame
/// `ξ_k = e_k + ∂_k g(x₀) e₃` of the graph `x₃ = g(x₁, x₂)` at
/// `x₀ = (ξ₁, ξ₂)`, evaluated by nested directional derivatives and by the
/// Kemperman expansion into pure powers.
pub fn tangential_frame_check(g: &Polynomial, f: &Polynomial, alpha: [usize; 2], xi: [f64; 3]) -> Result<FrameCheck, BernsteinError> {
    if g.dim() != 2 || f.dim() != 3 {
        return Err(BernsteinError::InvalidParameter("g must be bivariate and f trivariate".into()));
    }
    if alpha[0] + alpha[1] > 4 {
        return Err(BernsteinError::InvalidParameter(format!("|alpha| = {} exceeds 4", alpha[0] + alpha[1])));
    }
    let x0 = [xi[0], xi[1]];
    let frame = [
        vec![1.0, 0.0, g.partial(0).eval(&x0)?],
        vec![0.0, 1.0, g.partial(1).eval(&x0)?],
    ];
    let dirs: Vec<Vec<f64>> = (0..2).flat_map(|k| std::iter::repeat(frame[k].clone()).take(alpha[k])).collect();
    let mut direct = f.clone();
    for d in &dirs {
        direct = direct.directional(d)?;
    }
    let terms = kemperman_expand(&dirs);
    let expanded = if dirs.is_empty() { f.clone() } else { apply_kemperman(&terms, f)? };
    Ok(FrameCheck {
        direct: direct.eval(&xi)?,
        expanded: expanded.eval(&xi)?,
        terms: terms.len(),
    })
}
