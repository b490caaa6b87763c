//! Cover of the boundary by graph patches attached to it.

use std::sync::Arc;

use rayon::prelude::*;

use super::patch::{GraphOracle, GraphPatch};
use super::{Domain, GeometryError, Point};

/// Patches cover the boundary by the essential boundaries of `G(λ0)`.
pub const DECOMPOSITION_LAMBDA: f64 = 0.5;

const CACHE_POINTS: usize = 513;
const SURVEY_POINTS: usize = 2001;

/// `g` defined implicitly by the domain's level function in a patch frame.
#[derive(Debug, Clone)]
struct LevelGraph {
    domain: Domain,
    origin: Point,
    axis: usize,
    sign: f64,
    offset: f64,
    half_width: f64,
    /// `(g0, g0′)` at equispaced nodes on `[−half_width, half_width]`.
    cache: Vec<[f64; 2]>,
}

impl LevelGraph {
    fn new(domain: Domain, origin: Point, axis: usize, sign: f64, half_width: f64) -> Result<Self, GeometryError> {
        let mut lg = Self {
            domain,
            origin,
            axis,
            sign,
            offset: 0.0,
            half_width,
            cache: vec![[0.0; 2]; CACHE_POINTS],
        };
        let mid = CACHE_POINTS / 2;
        let h = 2.0 * half_width / (CACHE_POINTS - 1) as f64;
        let [_, d1, _] = lg.solve(0.0, 0.0)?;
        lg.cache[mid] = [0.0, d1];
        for dir in [1isize, -1] {
            let mut prev = lg.cache[mid];
            let mut k = mid as isize + dir;
            while k >= 0 && (k as usize) < CACHE_POINTS {
                let x = (k - mid as isize) as f64 * h;
                let guess = prev[0] + prev[1] * dir as f64 * h;
                let [v, d1, _] = lg.solve(x, guess)?;
                lg.cache[k as usize] = [v, d1];
                prev = [v, d1];
                k += dir;
            }
        }
        Ok(lg)
    }

    fn world(&self, x: f64, y: f64) -> Point {
        let mut w = self.origin;
        w[1 - self.axis] += x;
        w[self.axis] += self.sign * y;
        w
    }

    /// Newton in `y` on `F(x, y) = 0`, returning `(g0, g0′, g0″)`.
    fn solve(&self, x: f64, guess: f64) -> Result<[f64; 3], GeometryError> {
        let (o, j, s) = (1 - self.axis, self.axis, self.sign);
        let mut y = guess;
        for _ in 0..60 {
            let (f, grad, _) = self.domain.level(self.world(x, y));
            let fy = s * grad[j];
            if fy == 0.0 {
                break;
            }
            let step = f / fy;
            y -= step;
            if step.abs() <= 1e-15 * (1.0 + y.abs()) {
                break;
            }
        }
        let (f, grad, hess) = self.domain.level(self.world(x, y));
        let fx = grad[o];
        let fy = s * grad[j];
        if !(f.abs() <= 1e-11 * (1.0 + grad[0].hypot(grad[1]))) || fy.abs() < 1e-12 {
            return Err(GeometryError::NoConvergence(format!("graph solve at local x = {x}")));
        }
        // local Hessian: Fxx = H_oo, Fxy = s·H_oj, Fyy = H_jj
        let h = |a: usize, b: usize| match (a, b) {
            (0, 0) => hess[0],
            (1, 1) => hess[2],
            _ => hess[1],
        };
        let (fxx, fxy, fyy) = (h(o, o), s * h(o, j), h(j, j));
        let d1 = -fx / fy;
        let d2 = -(fxx + 2.0 * fxy * d1 + fyy * d1 * d1) / fy;
        Ok([y, d1, d2])
    }
}

impl GraphOracle for LevelGraph {
    fn jet(&self, x: f64) -> [f64; 3] {
        let h = 2.0 * self.half_width / (CACHE_POINTS - 1) as f64;
        let k = ((x + self.half_width) / h).round().clamp(0.0, (CACHE_POINTS - 1) as f64) as usize;
        let x0 = -self.half_width + k as f64 * h;
        let [v, d1] = self.cache[k];
        let guess = v + d1 * (x - x0);
        let [g, g1, g2] = self
            .solve(x, guess)
            .unwrap_or([f64::NAN, f64::NAN, f64::NAN]);
        [g + self.offset, g1, g2]
    }
}

fn build_patch(dom: &Domain, s: f64, b: f64) -> Result<GraphPatch, GeometryError> {
    let eta = dom.boundary_position(s);
    let n = dom.normal(eta);
    let axis = if n[0].abs() > n[1].abs() { 0 } else { 1 };
    let sign = if n[axis] > 0.0 { 1.0 } else { -1.0 };
    let mut lg = LevelGraph::new(dom.clone(), eta, axis, sign, 2.5 * b)?;
    let (mut gm, mut hm, mut lo) = (0.0f64, 0.0f64, f64::INFINITY);
    for k in 0..SURVEY_POINTS {
        let x = -2.0 * b + 4.0 * b * k as f64 / (SURVEY_POINTS - 1) as f64;
        let [v, d1, d2] = lg.jet(x);
        if !v.is_finite() {
            return Err(GeometryError::NoConvergence(format!("graph survey at x = {x}")));
        }
        gm = gm.max(d1.abs());
        hm = hm.max(d2.abs());
        lo = lo.min(v);
    }
    let l = 4.0 * 2f64.sqrt() * gm + 1.0;
    lg.offset = 4.0 * l * b - lo;
    let m = 1.25 * hm.max(lg.jet(0.0)[1].abs()).max(1.0);
    let mut shift = eta;
    shift[axis] -= sign * lg.offset;
    Ok(GraphPatch::new(Arc::new(lg), b, l, m)?.with_frame(axis, sign > 0.0, shift))
}

/// `G* ⊂ Ω` and the part of the enclosing box above the graph lies outside `Ω`.
fn attached(dom: &Domain, p: &GraphPatch) -> bool {
    let b = p.base();
    let floor = p.min_g() - 4.0 * p.l() * b;
    let top = p.max_g() + p.l() * b;
    let xs = 41;
    for k in 0..xs {
        let x = -2.0 * b + 4.0 * b * (k as f64 + 0.5) / xs as f64;
        let g = p.g(x);
        for q in 0..=20 {
            let f = (q as f64 / 20.0).clamp(1e-9, 1.0 - 1e-9);
            let below = floor + (g - floor) * f;
            if !dom.contains(p.to_world([x, below])) {
                return false;
            }
            let above = g + (top - g) * (q as f64 / 20.0).max(0.01);
            if dom.contains(p.to_world([x, above])) {
                return false;
            }
        }
    }
    true
}

fn patch_at(dom: &Domain, s: f64, base: f64) -> Result<GraphPatch, GeometryError> {
    let mut b = base;
    let mut last = None;
    for _ in 0..40 {
        match build_patch(dom, s, b) {
            Ok(p) if attached(dom, &p) => return Ok(p),
            Ok(_) => {}
            Err(e) => last = Some(e),
        }
        b *= 0.5;
    }
    Err(last.unwrap_or_else(|| GeometryError::NoConvergence(format!("no attached patch at parameter {s}"))))
}

/// Covers the boundary by patches whose `∂′G(λ0)` interiors overlap.
///
/// `requested_base` is an upper bound: the base is halved at any boundary
/// point where the patch would not be attached to the boundary.
pub fn decompose_boundary(dom: &Domain, requested_base: f64) -> Result<Vec<GraphPatch>, GeometryError> {
    if !(requested_base > 0.0) || requested_base > dom.kappa0() {
        return Err(GeometryError::BaseTooLarge {
            base: requested_base,
            kappa0: dom.kappa0(),
        });
    }
    let mut patches = Vec::new();
    let mut s = 0.0;
    loop {
        let patch = patch_at(dom, s, requested_base)?;
        let reach = 0.8 * DECOMPOSITION_LAMBDA * patch.base();
        let local_x = |t: f64| patch.to_local(dom.boundary_position(t))[0].abs();
        let eps = 1e-7;
        let p0 = dom.boundary_position(s);
        let p1 = dom.boundary_position(s + eps);
        let speed = (p1[0] - p0[0]).hypot(p1[1] - p0[1]) / eps;
        let mut lo = 0.0;
        let mut hi = 0.5 * reach / speed;
        let mut grow = 0;
        while local_x(s + hi) < reach {
            lo = hi;
            hi *= 1.5;
            grow += 1;
            if grow > 200 || hi > 1.0 {
                return Err(GeometryError::NoConvergence("boundary march stalled".into()));
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if local_x(s + mid) < reach {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        patches.push(patch);
        s += lo;
        if s >= 1.0 {
            break;
        }
        if patches.len() > 100_000 {
            return Err(GeometryError::NoConvergence("too many patches".into()));
        }
    }
    let report = boundary_cover_check(dom, &patches, DECOMPOSITION_LAMBDA, 2048);
    if !report.pass {
        return Err(GeometryError::NoConvergence(format!(
            "{} of {} boundary samples uncovered",
            report.uncovered, report.samples
        )));
    }
    Ok(patches)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverReport {
    pub pass: bool,
    pub samples: usize,
    pub uncovered: usize,
}

/// Counts boundary samples that lie in no `∂′G_j(λ)`.
pub fn boundary_cover_check(dom: &Domain, patches: &[GraphPatch], lambda: f64, samples: usize) -> CoverReport {
    let uncovered = (0..samples)
        .into_par_iter()
        .filter(|&i| {
            let w = dom.boundary_position(i as f64 / samples as f64);
            !patches.iter().any(|p| {
                let q = p.to_local(w);
                q[0].abs() < lambda * p.base() && p.on_essential_boundary(lambda, q, 1e-9 * (1.0 + p.max_g().abs()))
            })
        })
        .count();
    CoverReport {
        pass: uncovered == 0,
        samples,
        uncovered,
    }
}
