//! Graph patches ("domains of special type") in the plane.
//!
//! A patch is stored in its own local coordinates `(x, y)` where the domain
//! lies below the graph `y = g(x)`. The world position is recovered by
//! `world = shift + x·e_other + s·y·e_axis` with `s = +1` for an upward and
//! `s = −1` for a downward patch.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeometryError, Point};

/// Value, first and second derivative of the graph function.
pub trait GraphOracle: Send + Sync + fmt::Debug {
    fn jet(&self, x: f64) -> [f64; 3];
}

/// Univariate polynomial graph, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyGraph {
    coeffs: Vec<f64>,
}

impl PolyGraph {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }
}

impl GraphOracle for PolyGraph {
    fn jet(&self, x: f64) -> [f64; 3] {
        let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            d2 = d2 * x + 2.0 * d1;
            d1 = d1 * x + v;
            v = v * x + c;
        }
        [v, d1, d2]
    }
}

type JetFn = dyn Fn(f64) -> [f64; 3] + Send + Sync;

/// Graph given by a closure returning `(g, g′, g″)`.
#[derive(Clone)]
pub struct FnGraph {
    name: String,
    f: Arc<JetFn>,
}

impl FnGraph {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnGraph({})", self.name)
    }
}

impl GraphOracle for FnGraph {
    fn jet(&self, x: f64) -> [f64; 3] {
        (self.f)(x)
    }
}

const SURVEY_POINTS: usize = 2001;

#[derive(Debug, Clone)]
pub struct GraphPatch {
    axis: usize,
    upward: bool,
    shift: Point,
    base: f64,
    l: f64,
    m: f64,
    graph: Arc<dyn GraphOracle>,
    grad_max: f64,
    hess_max: f64,
    min_g: f64,
    max_g: f64,
}

impl GraphPatch {
    /// Upward `x_2`-patch at the origin with the given graph.
    pub fn new(graph: Arc<dyn GraphOracle>, base: f64, l: f64, m: f64) -> Result<Self, GeometryError> {
        if !(base > 0.0) || !(l >= 1.0) || !(m > 0.0) {
            return Err(GeometryError::InvalidPatch(format!(
                "need base > 0, L >= 1, M > 0 (got b = {base}, L = {l}, M = {m})"
            )));
        }
        let mut patch = Self {
            axis: 1,
            upward: true,
            shift: [0.0, 0.0],
            base,
            l,
            m,
            graph,
            grad_max: 0.0,
            hess_max: 0.0,
            min_g: 0.0,
            max_g: 0.0,
        };
        patch.survey();
        Ok(patch)
    }

    /// Places the patch in the world frame.
    pub fn with_frame(mut self, axis: usize, upward: bool, shift: Point) -> Self {
        self.axis = axis.min(1);
        self.upward = upward;
        self.shift = shift;
        self
    }

    fn survey(&mut self) {
        let b2 = 2.0 * self.base;
        let (mut gm, mut hm, mut lo, mut hi) = (0.0f64, 0.0f64, f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..SURVEY_POINTS {
            let x = -b2 + 2.0 * b2 * k as f64 / (SURVEY_POINTS - 1) as f64;
            let [v, d1, d2] = self.graph.jet(x);
            gm = gm.max(d1.abs());
            hm = hm.max(d2.abs());
            lo = lo.min(v);
            hi = hi.max(v);
        }
        self.grad_max = gm;
        self.hess_max = hm;
        self.min_g = lo;
        self.max_g = hi;
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn upward(&self) -> bool {
        self.upward
    }

    pub fn shift(&self) -> Point {
        self.shift
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn graph(&self) -> &Arc<dyn GraphOracle> {
        &self.graph
    }

    /// `max |g′|` over `[−2b, 2b]` (dense survey).
    pub fn grad_max(&self) -> f64 {
        self.grad_max
    }

    /// `max |g″|` over `[−2b, 2b]` (dense survey).
    pub fn hess_max(&self) -> f64 {
        self.hess_max
    }

    /// `min g` over `[−2b, 2b]` (dense survey).
    pub fn min_g(&self) -> f64 {
        self.min_g
    }

    pub fn max_g(&self) -> f64 {
        self.max_g
    }

    pub fn g(&self, x: f64) -> f64 {
        self.graph.jet(x)[0]
    }

    pub fn dg(&self, x: f64) -> f64 {
        self.graph.jet(x)[1]
    }

    pub fn d2g(&self, x: f64) -> f64 {
        self.graph.jet(x)[2]
    }

    pub fn jet(&self, x: f64) -> [f64; 3] {
        self.graph.jet(x)
    }

    /// `δ(x, y) = g(x) − y`.
    pub fn depth(&self, p: Point) -> f64 {
        self.g(p[0]) - p[1]
    }

    /// `φ_n(x, y) = √δ(x, y) + 1/n`.
    pub fn phi_n(&self, p: Point, n: f64) -> f64 {
        self.depth(p).max(0.0).sqrt() + 1.0 / n
    }

    /// Membership in `G(λ)`; `G = G(1)`.
    pub fn contains_lambda(&self, lambda: f64, p: Point) -> bool {
        let g = self.g(p[0]);
        p[0].abs() < lambda * self.base && p[1] <= g && p[1] > g - lambda * self.l * self.base
    }

    pub fn contains_g(&self, p: Point) -> bool {
        self.contains_lambda(1.0, p)
    }

    pub fn contains_g_star(&self, p: Point) -> bool {
        p[0].abs() < 2.0 * self.base
            && p[1] <= self.g(p[0])
            && p[1] > self.min_g - 4.0 * self.l * self.base
    }

    fn in_closed_g_star(&self, p: Point, tol: f64) -> bool {
        p[0].abs() <= 2.0 * self.base + tol
            && p[1] <= self.g(p[0]) + tol
            && p[1] >= self.min_g - 4.0 * self.l * self.base - tol
    }

    /// Whether `p` lies on the essential boundary `∂′G(λ)` within `tol`.
    pub fn on_essential_boundary(&self, lambda: f64, p: Point, tol: f64) -> bool {
        p[0].abs() < lambda * self.base && (p[1] - self.g(p[0])).abs() <= tol
    }

    pub fn to_world(&self, p: Point) -> Point {
        let s = if self.upward { 1.0 } else { -1.0 };
        let mut w = self.shift;
        w[1 - self.axis] += p[0];
        w[self.axis] += s * p[1];
        w
    }

    pub fn to_local(&self, w: Point) -> Point {
        let s = if self.upward { 1.0 } else { -1.0 };
        [
            w[1 - self.axis] - self.shift[1 - self.axis],
            s * (w[self.axis] - self.shift[self.axis]),
        ]
    }

    /// `ρ̂_G(ξ, η) = max{|ξ_x − η_x|, |√δ(ξ) − √δ(η)|}` in local coordinates.
    pub fn rho_hat(&self, xi: Point, eta: Point) -> Result<f64, GeometryError> {
        let tol = 1e-12 * (1.0 + self.max_g.abs());
        for p in [xi, eta] {
            if !self.in_closed_g_star(p, tol) {
                return Err(GeometryError::OutsidePatch { point: p });
            }
        }
        let a = self.depth(xi).max(0.0).sqrt();
        let b = self.depth(eta).max(0.0).sqrt();
        Ok((xi[0] - eta[0]).abs().max((a - b).abs()))
    }

    /// `c∗ = 1/(3√(1 + ‖g′‖²_∞))` with the sup over `[−2b, 2b]`.
    pub fn c_star(&self) -> f64 {
        1.0 / (3.0 * (1.0 + self.grad_max * self.grad_max).sqrt())
    }

    /// Distance from `p` to the graph of `g` over `[−2b, 2b]`.
    pub fn dist_to_graph(&self, p: Point) -> f64 {
        let b2 = 2.0 * self.base;
        let samples = 400;
        let d2 = |u: f64| {
            let g = self.g(u);
            (u - p[0]).powi(2) + (g - p[1]).powi(2)
        };
        let mut best_u = -b2;
        let mut best = d2(-b2);
        for k in 1..=samples {
            let u = -b2 + 2.0 * b2 * k as f64 / samples as f64;
            let v = d2(u);
            if v < best {
                best = v;
                best_u = u;
            }
        }
        // Newton polish of ½ d/du |(u, g(u)) − p|²
        let mut u = best_u;
        for _ in 0..30 {
            let [g, g1, g2] = self.jet(u);
            let f1 = (u - p[0]) + (g - p[1]) * g1;
            let f2 = 1.0 + g1 * g1 + (g - p[1]) * g2;
            if f2 <= 0.0 {
                break;
            }
            let next = (u - f1 / f2).clamp(-b2, b2);
            let done = (next - u).abs() < 1e-15;
            u = next;
            if done {
                break;
            }
        }
        best.min(d2(u)).sqrt()
    }

    /// Uniform sample of `G` (local coordinates).
    pub fn sample_g(&self, rng: &mut impl Rng) -> Point {
        let x = self.base * (2.0 * rng.random::<f64>() - 1.0);
        let depth = self.l * self.base * (1.0 - rng.random::<f64>());
        [x, self.g(x) - depth]
    }
}

/// Outcome of the two-sided distance-to-graph test.
#[derive(Debug, Clone, PartialEq)]
pub struct DistBoundsReport {
    pub pass: bool,
    pub samples: usize,
    pub c_star: f64,
    /// Smallest observed `dist / δ`.
    pub min_ratio: f64,
    /// Largest observed `dist / δ`.
    pub max_ratio: f64,
}

/// Checks `c∗ δ(ξ) ≤ dist(ξ, Γ′) ≤ δ(ξ)` at random points of `G`.
pub fn patch_dist_bounds_check(patch: &GraphPatch, samples: usize, seed: u64) -> DistBoundsReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c_star = patch.c_star();
    let mut pass = true;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..samples {
        let p = patch.sample_g(&mut rng);
        let delta = patch.depth(p);
        let dist = patch.dist_to_graph(p);
        let tol = 1e-12 * (1.0 + patch.max_g().abs());
        if dist > delta + tol || dist < c_star * delta - tol {
            pass = false;
        }
        if delta > 0.0 {
            lo = lo.min(dist / delta);
            hi = hi.max(dist / delta);
        }
    }
    DistBoundsReport {
        pass,
        samples,
        c_star,
        min_ratio: lo,
        max_ratio: hi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const_patch(b: f64, l: f64) -> GraphPatch {
        GraphPatch::new(Arc::new(PolyGraph::constant(4.0 * l * b)), b, l, 1.0).unwrap()
    }

    #[test]
    fn poly_graph_jet() {
        let g = PolyGraph::new(vec![1.0, -2.0, 3.0]);
        assert_eq!(g.jet(2.0), [9.0, 10.0, 6.0]);
    }

    #[test]
    fn rho_hat_examples() {
        let b = 0.25;
        let l = 1.0;
        let p = const_patch(b, l);
        let top = 4.0 * l * b;
        assert_eq!(p.rho_hat([0.0, top], [0.0, top]).unwrap(), 0.0);
        assert!((p.rho_hat([0.0, top], [0.0, top - 0.25]).unwrap() - 0.5).abs() < 1e-15);
        assert!((p.rho_hat([0.1, top - 0.1], [-0.2, top - 0.1]).unwrap() - 0.3).abs() < 1e-15);
        assert!(p.rho_hat([0.0, top + 1.0], [0.0, top]).is_err());
    }

    #[test]
    fn membership_predicates() {
        let p = const_patch(0.5, 2.0);
        let top = 4.0;
        assert!(p.contains_g([0.2, top - 0.5]));
        assert!(!p.contains_g([0.2, top - 1.0]));
        assert!(p.contains_lambda(2.0, [0.9, top - 1.5]));
        assert!(p.contains_g_star([0.9, 0.1]));
        assert!(!p.contains_g_star([0.9, 0.0]));
        assert!(p.on_essential_boundary(0.5, [0.2, top], 1e-12));
        assert!(!p.on_essential_boundary(0.5, [0.3, top], 1e-12));
    }

    #[test]
    fn frame_roundtrip() {
        let p = const_patch(0.1, 1.0).with_frame(0, false, [0.3, -0.2]);
        let w = p.to_world([0.05, 0.2]);
        assert_eq!(w, [0.3 - 0.2, -0.2 + 0.05]);
        let back = p.to_local(w);
        assert!((back[0] - 0.05).abs() < 1e-15 && (back[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn dist_bounds_constant_graph() {
        let p = const_patch(0.2, 1.0);
        let q = [0.05, 0.8 - 0.13];
        assert!((p.dist_to_graph(q) - 0.13).abs() < 1e-14);
        let r = patch_dist_bounds_check(&p, 200, 1);
        assert!(r.pass);
        assert!((r.max_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dist_bounds_steep_graph() {
        // g = 2x + c has ‖g′‖ = 2, so c∗ = 1/(3√5)
        let b = 0.1;
        let l = 4.0 * 2.0f64.sqrt() * 2.0 + 1.0;
        let c = 4.0 * l * b + 4.0 * b;
        let p = GraphPatch::new(Arc::new(PolyGraph::new(vec![c, 2.0])), b, l, 1.0).unwrap();
        assert!((p.c_star() - 1.0 / (3.0 * 5f64.sqrt())).abs() < 1e-12);
        assert!(patch_dist_bounds_check(&p, 500, 2).pass);
    }
}
