//! Planar C2 domains: boundary distance, the metric `ρ_Ω`, Monte Carlo ball
//! volumes, rolling-ball checks and the decomposition of the boundary into
//! graph patches.

mod decompose;
pub mod patch;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::polycalc::Polynomial;

pub use decompose::{boundary_cover_check, decompose_boundary, CoverReport, DECOMPOSITION_LAMBDA};
pub use patch::{patch_dist_bounds_check, DistBoundsReport, FnGraph, GraphOracle, GraphPatch, PolyGraph};

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point ({}, {}) lies outside the domain", .point[0], .point[1])]
    Outside { point: Point },
    #[error("point ({}, {}) lies outside the closed patch G*", .point[0], .point[1])]
    OutsidePatch { point: Point },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("requested base {base} exceeds the rolling radius {kappa0}")]
    BaseTooLarge { base: f64, kappa0: f64 },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid patch: {0}")]
    InvalidPatch(String),
}

fn norm(v: Point) -> f64 {
    v[0].hypot(v[1])
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

/// A boundary point with its outward normal and unit tangent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub position: Point,
    pub normal: Point,
    pub tangent: Point,
    /// Boundary parameter in `[0, 1)`.
    pub parameter: f64,
}

impl BoundaryPoint {
    fn new(position: Point, grad: Point, parameter: f64) -> Self {
        let g = norm(grad);
        let normal = [grad[0] / g, grad[1] / g];
        Self {
            position,
            normal,
            tangent: [-normal[1], normal[0]],
            parameter,
        }
    }
}

const TABLE_SIZE: usize = 2048;

/// Domain `{Φ ≤ 0}` for a polynomial `Φ`, star-shaped with respect to `center`.
#[derive(Debug, Clone)]
pub struct ImplicitDomain {
    field: Polynomial,
    grad: [Polynomial; 2],
    hess: [Polynomial; 3],
    center: Point,
    bbox: [f64; 4],
    kappa0: f64,
    /// `(parameter, boundary point)` samples from ray casting.
    table: Vec<(f64, Point)>,
    area: f64,
    perimeter: f64,
}

impl ImplicitDomain {
    pub fn new(field: Polynomial, center: Point, bbox: [f64; 4], kappa0: f64) -> Result<Self, GeometryError> {
        if field.dim() != 2 {
            return Err(GeometryError::InvalidDomain("implicit field must be bivariate".into()));
        }
        if !(kappa0 > 0.0) || !(bbox[0] < bbox[1]) || !(bbox[2] < bbox[3]) {
            return Err(GeometryError::InvalidDomain("need kappa0 > 0 and a non-empty bounding box".into()));
        }
        let gx = field.partial(0);
        let gy = field.partial(1);
        let hess = [gx.partial(0), gx.partial(1), gy.partial(1)];
        let mut dom = Self {
            field,
            grad: [gx, gy],
            hess,
            center,
            bbox,
            kappa0,
            table: Vec::new(),
            area: 0.0,
            perimeter: 0.0,
        };
        if !(dom.phi(center) < 0.0) {
            return Err(GeometryError::InvalidDomain("star center must satisfy Φ < 0".into()));
        }
        let mut table = Vec::with_capacity(TABLE_SIZE);
        let mut area = 0.0;
        for k in 0..TABLE_SIZE {
            let s = k as f64 / TABLE_SIZE as f64;
            let r = dom.ray_radius(s)?;
            area += 0.5 * r * r;
            let th = std::f64::consts::TAU * s;
            table.push((s, [center[0] + r * th.cos(), center[1] + r * th.sin()]));
        }
        dom.area = area * std::f64::consts::TAU / TABLE_SIZE as f64;
        dom.perimeter = (0..TABLE_SIZE)
            .map(|k| norm(sub(table[(k + 1) % TABLE_SIZE].1, table[k].1)))
            .sum();
        dom.table = table;
        Ok(dom)
    }

    pub fn field(&self) -> &Polynomial {
        &self.field
    }

    pub fn center(&self) -> Point {
        self.center
    }

    fn phi(&self, p: Point) -> f64 {
        self.field.eval_unchecked(&p)
    }

    fn grad_at(&self, p: Point) -> Point {
        [self.grad[0].eval_unchecked(&p), self.grad[1].eval_unchecked(&p)]
    }

    fn hess_at(&self, p: Point) -> [f64; 3] {
        [
            self.hess[0].eval_unchecked(&p),
            self.hess[1].eval_unchecked(&p),
            self.hess[2].eval_unchecked(&p),
        ]
    }

    /// Radius of the boundary along the ray at angle `2πs` from the star center.
    fn ray_radius(&self, s: f64) -> Result<f64, GeometryError> {
        let th = std::f64::consts::TAU * s;
        let e = [th.cos(), th.sin()];
        let c = self.center;
        let diag = (self.bbox[1] - self.bbox[0]).hypot(self.bbox[3] - self.bbox[2]);
        let at = |r: f64| self.phi([c[0] + r * e[0], c[1] + r * e[1]]);
        let steps = 512;
        let h = diag / steps as f64;
        let mut lo = 0.0;
        let mut hi = f64::NAN;
        for k in 1..=steps {
            let r = k as f64 * h;
            if at(r) > 0.0 {
                hi = r;
                break;
            }
            lo = r;
        }
        if hi.is_nan() {
            return Err(GeometryError::InvalidDomain(format!(
                "ray at parameter {s} does not leave the domain inside the bounding box"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[derive(Debug, Clone)]
pub enum Domain {
    Disk { center: Point, radius: f64 },
    /// Axis-aligned ellipse centered at the origin with semi-axes `a ≥ b`.
    Ellipse { a: f64, b: f64 },
    Implicit(Arc<ImplicitDomain>),
}

impl Domain {
    pub fn disk(center: Point, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::InvalidDomain("radius must be positive".into()));
        }
        Ok(Domain::Disk { center, radius })
    }

    pub fn unit_disk() -> Self {
        Domain::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self, GeometryError> {
        if !(a >= b && b > 0.0) {
            return Err(GeometryError::InvalidDomain("ellipse needs a >= b > 0".into()));
        }
        Ok(Domain::Ellipse { a, b })
    }

    pub fn implicit(field: Polynomial, center: Point, bbox: [f64; 4], kappa0: f64) -> Result<Self, GeometryError> {
        Ok(Domain::Implicit(Arc::new(ImplicitDomain::new(field, center, bbox, kappa0)?)))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Domain::Disk { .. } => "disk",
            Domain::Ellipse { .. } => "ellipse",
            Domain::Implicit(_) => "implicit",
        }
    }

    /// Rolling-ball radius `κ0`.
    pub fn kappa0(&self) -> f64 {
        match self {
            Domain::Disk { radius, .. } => *radius,
            Domain::Ellipse { a, b } => b * b / a,
            Domain::Implicit(d) => d.kappa0,
        }
    }

    /// `[xmin, xmax, ymin, ymax]`.
    pub fn bbox(&self) -> [f64; 4] {
        match self {
            Domain::Disk { center: c, radius: r } => [c[0] - r, c[0] + r, c[1] - r, c[1] + r],
            Domain::Ellipse { a, b } => [-a, *a, -b, *b],
            Domain::Implicit(d) => d.bbox,
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Domain::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Domain::Ellipse { a, b } => std::f64::consts::PI * a * b,
            Domain::Implicit(d) => d.area,
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            Domain::Disk { radius, .. } => std::f64::consts::TAU * radius,
            Domain::Ellipse { .. } => {
                let k = 4096;
                (0..k)
                    .map(|i| {
                        norm(sub(
                            self.boundary_position((i + 1) as f64 / k as f64),
                            self.boundary_position(i as f64 / k as f64),
                        ))
                    })
                    .sum()
            }
            Domain::Implicit(d) => d.perimeter,
        }
    }

    /// Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Disk { radius, .. } => 2.0 * radius,
            Domain::Ellipse { a, .. } => 2.0 * a,
            Domain::Implicit(d) => {
                let pts: Vec<Point> = d.table.iter().step_by(8).map(|e| e.1).collect();
                let mut best = 0.0f64;
                for (i, p) in pts.iter().enumerate() {
                    for q in &pts[i + 1..] {
                        best = best.max(norm(sub(*p, *q)));
                    }
                }
                best
            }
        }
    }

    /// Defining function `F` (negative inside) with gradient and Hessian `[Fxx, Fxy, Fyy]`.
    pub fn level(&self, p: Point) -> (f64, Point, [f64; 3]) {
        match self {
            Domain::Disk { center: c, radius: r } => {
                let d = sub(p, *c);
                ((d[0] * d[0] + d[1] * d[1] - r * r) / (2.0 * r), [d[0] / r, d[1] / r], [1.0 / r, 0.0, 1.0 / r])
            }
            Domain::Ellipse { a, b } => {
                let (a2, b2) = (a * a, b * b);
                (
                    0.5 * (p[0] * p[0] / a2 + p[1] * p[1] / b2 - 1.0),
                    [p[0] / a2, p[1] / b2],
                    [1.0 / a2, 0.0, 1.0 / b2],
                )
            }
            Domain::Implicit(d) => (d.phi(p), d.grad_at(p), d.hess_at(p)),
        }
    }

    /// Closed membership with a relative tolerance of `1e−12` on the boundary.
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Domain::Disk { center: c, radius: r } => norm(sub(p, *c)) <= r * (1.0 + 1e-12),
            Domain::Ellipse { a, b } => (p[0] / a).powi(2) + (p[1] / b).powi(2) <= 1.0 + 2e-12,
            Domain::Implicit(d) => {
                let bb = d.bbox;
                p[0] >= bb[0] && p[0] <= bb[1] && p[1] >= bb[2] && p[1] <= bb[3] && {
                    let v = d.phi(p);
                    v <= 1e-12 * (1.0 + norm(d.grad_at(p)))
                }
            }
        }
    }

    /// Boundary point at parameter `s ∈ [0, 1)`.
    pub fn boundary_position(&self, s: f64) -> Point {
        let th = std::f64::consts::TAU * s;
        match self {
            Domain::Disk { center: c, radius: r } => [c[0] + r * th.cos(), c[1] + r * th.sin()],
            Domain::Ellipse { a, b } => [a * th.cos(), b * th.sin()],
            Domain::Implicit(d) => {
                let r = d.ray_radius(s.rem_euclid(1.0)).expect("ray cast succeeded at construction");
                [d.center[0] + r * th.cos(), d.center[1] + r * th.sin()]
            }
        }
    }

    pub fn boundary_point(&self, s: f64) -> BoundaryPoint {
        let p = self.boundary_position(s);
        BoundaryPoint::new(p, self.level(p).1, s.rem_euclid(1.0))
    }

    /// Outward unit normal at a boundary point.
    pub fn normal(&self, eta: Point) -> Point {
        let g = self.level(eta).1;
        let n = norm(g);
        [g[0] / n, g[1] / n]
    }

    /// Distance to the boundary and the foot point.
    pub fn dist_to_boundary(&self, xi: Point) -> Result<(f64, BoundaryPoint), GeometryError> {
        if !self.contains(xi) {
            return Err(GeometryError::Outside { point: xi });
        }
        match self {
            Domain::Disk { center: c, radius: r } => {
                let d = sub(xi, *c);
                let len = norm(d);
                let dir = if len == 0.0 { [1.0, 0.0] } else { [d[0] / len, d[1] / len] };
                let foot = [c[0] + r * dir[0], c[1] + r * dir[1]];
                let s = (dir[1].atan2(dir[0]) / std::f64::consts::TAU).rem_euclid(1.0);
                Ok(((r - len).max(0.0), BoundaryPoint::new(foot, dir, s)))
            }
            Domain::Ellipse { a, b } => Ok(ellipse_foot(*a, *b, xi)),
            Domain::Implicit(d) => implicit_foot(d, xi),
        }
    }

    /// `√dist(ξ, Γ)`.
    pub fn sqrt_dist(&self, xi: Point) -> Result<f64, GeometryError> {
        Ok(self.dist_to_boundary(xi)?.0.sqrt())
    }

    /// `ρ_Ω(ξ, η) = ‖ξ − η‖ + |√dist(ξ, Γ) − √dist(η, Γ)|`.
    pub fn rho_omega(&self, xi: Point, eta: Point) -> Result<f64, GeometryError> {
        Ok(rho_with_sqrt(xi, self.sqrt_dist(xi)?, eta, self.sqrt_dist(eta)?))
    }

    /// `φ_{n,Γ}(ξ) = √dist(ξ, Γ) + 1/n`.
    pub fn phi_n_gamma(&self, xi: Point, n: f64) -> Result<f64, GeometryError> {
        Ok(self.sqrt_dist(xi)? + 1.0 / n)
    }

    /// Uniform point of the bounding box.
    pub fn sample_bbox(&self, rng: &mut impl Rng) -> Point {
        let bb = self.bbox();
        [
            bb[0] + (bb[1] - bb[0]) * rng.random::<f64>(),
            bb[2] + (bb[3] - bb[2]) * rng.random::<f64>(),
        ]
    }

    /// Uniform point of the domain by rejection from the bounding box.
    pub fn sample_uniform(&self, rng: &mut impl Rng) -> Point {
        loop {
            let p = self.sample_bbox(rng);
            if self.contains(p) {
                return p;
            }
        }
    }

    /// Monte Carlo measure of `U(ξ, t) = {η ∈ Ω : ρ_Ω(ξ, η) ≤ t}`.
    pub fn ball_volume_mc(&self, xi: Point, t: f64, samples: usize, seed: u64) -> Result<BallVolume, GeometryError> {
        let sxi = self.sqrt_dist(xi)?;
        let bb = self.bbox();
        // U(ξ, t) lies inside the Euclidean t-ball around ξ
        let win = [
            (xi[0] - t).max(bb[0]),
            (xi[0] + t).min(bb[1]),
            (xi[1] - t).max(bb[2]),
            (xi[1] + t).min(bb[3]),
        ];
        let box_area = (win[1] - win[0]) * (win[3] - win[2]);
        let hits = par_count(samples, seed, |rng| {
            let p = [
                win[0] + (win[1] - win[0]) * rng.random::<f64>(),
                win[2] + (win[3] - win[2]) * rng.random::<f64>(),
            ];
            self.contains(p) && self.sqrt_dist(p).map(|s| rho_with_sqrt(xi, sxi, p, s) <= t).unwrap_or(false)
        });
        let frac = hits as f64 / samples as f64;
        Ok(BallVolume {
            estimate: box_area * frac,
            stderr: box_area * (frac * (1.0 - frac) / samples as f64).sqrt(),
            comparator: t * t * (sxi + t),
        })
    }

    /// Tests `B_κ(η − κn) ⊂ Ω` and `B_κ(η + κn) ⊂ Ω^c` at sampled boundary points.
    pub fn rolling_ball_check(&self, kappa: f64, boundary_samples: usize, ball_samples: usize, seed: u64) -> RollingBallReport {
        let witnesses: Vec<Option<Point>> = (0..boundary_samples)
            .into_par_iter()
            .map(|i| {
                let eta = self.boundary_point(i as f64 / boundary_samples as f64);
                let mut rng = stream_rng(seed, i as u64);
                let inner = [eta.position[0] - kappa * eta.normal[0], eta.position[1] - kappa * eta.normal[1]];
                let outer = [eta.position[0] + kappa * eta.normal[0], eta.position[1] + kappa * eta.normal[1]];
                for _ in 0..ball_samples {
                    // strictly inside the ball, away from the tangency point
                    let r = kappa * (1.0 - 1e-6) * rng.random::<f64>().sqrt();
                    let th = std::f64::consts::TAU * rng.random::<f64>();
                    let (c, s) = (th.cos(), th.sin());
                    let pin = [inner[0] + r * c, inner[1] + r * s];
                    if !self.contains(pin) {
                        return Some(pin);
                    }
                    let pout = [outer[0] + r * c, outer[1] + r * s];
                    if self.contains(pout) {
                        return Some(pout);
                    }
                }
                None
            })
            .collect();
        let witness = witnesses.into_iter().flatten().next();
        RollingBallReport {
            pass: witness.is_none(),
            witness,
            boundary_samples,
            ball_samples,
        }
    }
}

/// `ρ_Ω` from precomputed square-root distances.
pub fn rho_with_sqrt(xi: Point, sxi: f64, eta: Point, seta: f64) -> f64 {
    norm(sub(xi, eta)) + (sxi - seta).abs()
}

/// ChaCha stream `index` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub(crate) const CHUNK: usize = 4096;

/// Counts successes of `trial` over `samples` draws, chunked into fixed
/// streams so the result does not depend on the thread count.
pub(crate) fn par_count<F>(samples: usize, seed: u64, trial: F) -> usize
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len).filter(|_| trial(&mut rng)).count()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallVolume {
    pub estimate: f64,
    pub stderr: f64,
    /// `t^d (√dist(ξ, Γ) + t)`.
    pub comparator: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingBallReport {
    pub pass: bool,
    pub witness: Option<Point>,
    pub boundary_samples: usize,
    pub ball_samples: usize,
}

/// Extremes of `ρ̂_G / ρ_Ω` over random pairs in a patch `G` of `dom`.
///
/// Half of the pairs are independent, half are local perturbations at
/// log-uniform scales so that short distances are represented.
pub fn metric_equivalence_report(dom: &Domain, patch: &GraphPatch, pairs: usize, seed: u64) -> Result<MetricEquivalence, GeometryError> {
    let ratios: Vec<Result<Option<f64>, GeometryError>> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let xi = patch.sample_g(&mut rng);
            let eta = if i % 2 == 0 {
                patch.sample_g(&mut rng)
            } else {
                let scale = patch.base() * 10f64.powf(-3.0 * rng.random::<f64>());
                let x = (xi[0] + scale * (2.0 * rng.random::<f64>() - 1.0)).clamp(-patch.base(), patch.base());
                let depth = (patch.depth(xi) + scale * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, patch.l() * patch.base() * (1.0 - 1e-12));
                [x, patch.g(x) - depth]
            };
            let hat = patch.rho_hat(xi, eta)?;
            let omega = dom.rho_omega(patch.to_world(xi), patch.to_world(eta))?;
            Ok((omega > 1e-12).then(|| hat / omega))
        })
        .collect();
    let (mut lo, mut hi, mut used) = (f64::INFINITY, 0.0f64, 0usize);
    for r in ratios {
        if let Some(q) = r? {
            lo = lo.min(q);
            hi = hi.max(q);
            used += 1;
        }
    }
    Ok(MetricEquivalence {
        min_ratio: lo,
        max_ratio: hi,
        pairs: used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricEquivalence {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pairs: usize,
}

fn ellipse_foot(a: f64, b: f64, xi: Point) -> (f64, BoundaryPoint) {
    let tau = std::f64::consts::TAU;
    let gamma = |th: f64| [a * th.cos(), b * th.sin()];
    let f = |th: f64| {
        let p = gamma(th);
        (p[0] - xi[0]).powi(2) + (p[1] - xi[1]).powi(2)
    };
    let seeds = 64;
    let mut coarse: Vec<(f64, f64)> = (0..seeds)
        .map(|k| {
            let th = tau * k as f64 / seeds as f64;
            (f(th), th)
        })
        .collect();
    coarse.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut best: Option<(f64, f64)> = None;
    for &(_, th0) in coarse.iter().take(8) {
        let mut th = th0;
        for _ in 0..60 {
            let (c, s) = (th.cos(), th.sin());
            let d = [a * c - xi[0], b * s - xi[1]];
            let g1 = [-a * s, b * c];
            let g2 = [-a * c, -b * s];
            let f1 = d[0] * g1[0] + d[1] * g1[1];
            let f2 = g1[0] * g1[0] + g1[1] * g1[1] + d[0] * g2[0] + d[1] * g2[1];
            let step = if f2 > 0.0 { f1 / f2 } else { f1.signum() * 1e-3 };
            let step = step.clamp(-0.2, 0.2);
            th -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let th = th.rem_euclid(tau);
        let v = f(th);
        best = match best {
            None => Some((v, th)),
            Some((bv, bth)) => {
                let tie = (v - bv).abs() <= 1e-13 * (1.0 + bv);
                if (tie && th < bth) || (!tie && v < bv) {
                    Some((v, th))
                } else {
                    Some((bv, bth))
                }
            }
        };
    }
    let (v, th) = best.expect("at least one seed");
    let p = gamma(th);
    let grad = [p[0] / (a * a), p[1] / (b * b)];
    (v.sqrt(), BoundaryPoint::new(p, grad, th / tau))
}

fn implicit_foot(d: &ImplicitDomain, xi: Point) -> Result<(f64, BoundaryPoint), GeometryError> {
    let mut order: Vec<(f64, usize)> = d
        .table
        .iter()
        .enumerate()
        .map(|(i, (_, p))| (norm(sub(*p, xi)), i))
        .collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut best: Option<(f64, Point, f64)> = None;
    for &(_, idx) in order.iter().take(8) {
        let (s0, mut eta) = d.table[idx];
        let g0 = d.grad_at(eta);
        let mut lam = (sub(xi, eta)[0] * g0[0] + sub(xi, eta)[1] * g0[1]) / (g0[0] * g0[0] + g0[1] * g0[1]);
        let mut converged = false;
        // Newton on η − ξ + λ∇Φ(η) = 0, Φ(η) = 0
        for _ in 0..20 {
            let g = d.grad_at(eta);
            let h = d.hess_at(eta);
            let phi = d.phi(eta);
            let r = [eta[0] - xi[0] + lam * g[0], eta[1] - xi[1] + lam * g[1], phi];
            let j = nalgebra::Matrix3::new(
                1.0 + lam * h[0], lam * h[1], g[0],
                lam * h[1], 1.0 + lam * h[2], g[1],
                g[0], g[1], 0.0,
            );
            let Some(step) = j.lu().solve(&nalgebra::Vector3::new(r[0], r[1], r[2])) else {
                break;
            };
            eta = [eta[0] - step[0], eta[1] - step[1]];
            lam -= step[2];
            let scale = 1.0 + norm(eta);
            if step[0].abs().max(step[1].abs()) < 1e-14 * scale && d.phi(eta).abs() < 1e-12 {
                converged = true;
                break;
            }
        }
        if !converged {
            continue;
        }
        let dist = norm(sub(eta, xi));
        let c = d.center;
        let s = ((eta[1] - c[1]).atan2(eta[0] - c[0]) / std::f64::consts::TAU).rem_euclid(1.0);
        let _ = s0;
        best = match best {
            None => Some((dist, eta, s)),
            Some(b) => {
                let tie = (dist - b.0).abs() <= 1e-12 * (1.0 + b.0);
                if (tie && s < b.2) || (!tie && dist < b.0) {
                    Some((dist, eta, s))
                } else {
                    Some(b)
                }
            }
        };
    }
    let (dist, eta, s) = best.ok_or_else(|| {
        GeometryError::NoConvergence(format!("boundary projection from ({}, {})", xi[0], xi[1]))
    })?;
    Ok((dist, BoundaryPoint::new(eta, d.grad_at(eta), s)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_equivalence_on_disk_patches() {
        let d = Domain::unit_disk();
        let patches = decompose_boundary(&d, 0.2).unwrap();
        for p in patches.iter().take(4) {
            let rep = metric_equivalence_report(&d, p, 2000, 3).unwrap();
            assert!(rep.min_ratio > 0.0 && rep.max_ratio.is_finite());
            assert!(rep.max_ratio / rep.min_ratio <= 25.0, "{rep:?}");
        }
    }

    pub(crate) fn implicit_unit_disk() -> Domain {
        let field = Polynomial::from_coeffs(2, 2, vec![-1.0, 0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        Domain::implicit(field, [0.0, 0.0], [-1.5, 1.5, -1.5, 1.5], 1.0).unwrap()
    }

    #[test]
    fn disk_distance_examples() {
        let d = Domain::unit_disk();
        let (dist, foot) = d.dist_to_boundary([0.5, 0.0]).unwrap();
        assert!((dist - 0.5).abs() < 1e-15);
        assert_eq!(foot.position, [1.0, 0.0]);
        assert_eq!(foot.normal, [1.0, 0.0]);
        let (dist, foot) = d.dist_to_boundary([0.0, 0.0]).unwrap();
        assert_eq!(dist, 1.0);
        assert_eq!(foot.parameter, 0.0);
        assert!(matches!(d.dist_to_boundary([2.0, 0.0]), Err(GeometryError::Outside { .. })));
    }

    #[test]
    fn implicit_disk_matches_analytic() {
        let imp = implicit_unit_disk();
        let disk = Domain::unit_disk();
        assert!((imp.area() - std::f64::consts::PI).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = disk.sample_uniform(&mut rng);
            let a = disk.dist_to_boundary(p).unwrap().0;
            let b = imp.dist_to_boundary(p).unwrap().0;
            assert!((a - b).abs() < 1e-10, "{p:?}: {a} vs {b}");
        }
    }

    #[test]
    fn ellipse_distance() {
        let e = Domain::ellipse(2.0, 1.0).unwrap();
        let (d, foot) = e.dist_to_boundary([0.0, 0.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert!((foot.position[1] - 1.0).abs() < 1e-12);
        let (d, _) = e.dist_to_boundary([1.5, 0.0]).unwrap();
        assert!(d <= 0.5 + 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = e.sample_uniform(&mut rng);
            let (d, foot) = e.dist_to_boundary(p).unwrap();
            // brute-force oracle
            let brute = (0..200_000)
                .map(|k| {
                    let th = std::f64::consts::TAU * k as f64 / 200_000.0;
                    (2.0 * th.cos() - p[0]).hypot(th.sin() - p[1])
                })
                .fold(f64::INFINITY, f64::min);
            assert!(d <= brute + 1e-12 && brute - d < 1e-7);
            let v = sub(p, foot.position);
            let cross = v[0] * foot.normal[1] - v[1] * foot.normal[0];
            assert!(cross.abs() < 1e-8);
        }
    }

    #[test]
    fn rho_examples() {
        let d = Domain::unit_disk();
        assert_eq!(d.rho_omega([0.3, 0.2], [0.3, 0.2]).unwrap(), 0.0);
        let v = d.rho_omega([0.5, 0.0], [0.9, 0.0]).unwrap();
        assert!((v - (0.4 + (0.5f64.sqrt() - 0.1f64.sqrt()).abs())).abs() < 1e-14);
        assert!((v - 0.79088).abs() < 1e-5);
        let v = d.rho_omega([0.0, 0.0], [0.5, 0.0]).unwrap();
        assert!((v - 0.79289).abs() < 1e-5);
    }

    #[test]
    fn phi_examples() {
        let d = Domain::unit_disk();
        assert_eq!(d.phi_n_gamma([0.0, 0.0], 4.0).unwrap(), 1.25);
        assert!((d.phi_n_gamma([1.0, 0.0], 10.0).unwrap() - 0.1).abs() < 1e-15);
        let p = [0.3, -0.4];
        assert!(d.phi_n_gamma(p, 2.0).unwrap() > d.phi_n_gamma(p, 8.0).unwrap());
    }

    #[test]
    fn ball_volume_examples() {
        let d = Domain::unit_disk();
        let v = d.ball_volume_mc([0.1, 0.2], 10.0, 20_000, 1).unwrap();
        assert!((v.estimate - std::f64::consts::PI).abs() < 1e-12 + 3.0 * v.stderr.max(1e-3));
        let a = d.ball_volume_mc([0.3, 0.0], 0.1, 20_000, 2).unwrap();
        let b = d.ball_volume_mc([0.3, 0.0], 0.2, 20_000, 2).unwrap();
        assert!(b.estimate / a.estimate <= 8.0 * 1.5);
        assert_eq!(a, d.ball_volume_mc([0.3, 0.0], 0.1, 20_000, 2).unwrap());
    }

    #[test]
    fn rolling_ball_examples() {
        let d = Domain::unit_disk();
        assert!(d.rolling_ball_check(0.5, 64, 64, 1).pass);
        let r = d.rolling_ball_check(1.2, 64, 64, 1);
        assert!(!r.pass && r.witness.is_some());
        let e = Domain::ellipse(2.0, 1.0).unwrap();
        assert!(e.rolling_ball_check(0.4, 128, 128, 1).pass);
    }
}
