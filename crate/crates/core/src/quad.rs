//! Reference integration on domains and graph patches.

use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{Domain, GraphPatch, Point};
use crate::polycalc::{exponents, monomial_count, Polynomial};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("rule for region `{rule}` used on region `{region}`")]
    RegionMismatch { rule: String, region: String },
    #[error("refinement exhausted with relative change {estimate:e}")]
    Exhausted { estimate: f64 },
    #[error("exponent p must be positive (got {0})")]
    BadExponent(f64),
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_interval(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    x.iter().zip(&w).map(|(&xi, &wi)| (a + h * (xi + 1.0), h * wi)).collect()
}

/// Neumaier-compensated sum in the given order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    /// Total degree integrated exactly, when known.
    pub exactness: Option<usize>,
    pub region: String,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    /// `Σ w_i f(x_i)`; evaluation is parallel, the sum sequential.
    pub fn integrate(&self, f: &(dyn Fn(Point) -> f64 + Sync)) -> f64 {
        let vals: Vec<f64> = self.nodes.par_iter().map(|&p| f(p)).collect();
        compensated_sum(vals.iter().zip(&self.weights).map(|(v, w)| v * w))
    }
}

/// Polar rule `Σ_θ Σ_r` around `center` with boundary radius `radius(θ)`:
/// `radial` Gauss points per panel, `panels` equal radial panels, `angular`
/// trapezoid points.
fn polar_rule(
    center: Point,
    radius: &(dyn Fn(f64) -> f64 + Sync),
    radial: usize,
    panels: usize,
    angular: usize,
    exactness: Option<usize>,
    region: &str,
) -> QuadratureRule {
    let tau = std::f64::consts::TAU;
    let rows: Vec<Vec<(Point, f64)>> = (0..angular)
        .into_par_iter()
        .map(|k| {
            let th = tau * k as f64 / angular as f64;
            let r_max = radius(th);
            let (c, s) = (th.cos(), th.sin());
            let mut row = Vec::with_capacity(radial * panels);
            for pnl in 0..panels {
                let a = r_max * pnl as f64 / panels as f64;
                let b = r_max * (pnl + 1) as f64 / panels as f64;
                for (r, w) in gauss_interval(radial, a, b) {
                    row.push(([center[0] + r * c, center[1] + r * s], w * r * tau / angular as f64));
                }
            }
            row
        })
        .collect();
    let (nodes, weights) = rows.into_iter().flatten().unzip();
    QuadratureRule {
        nodes,
        weights,
        exactness,
        region: region.to_string(),
    }
}

/// Rule exact for polynomials of total degree `degree` on a disk or ellipse;
/// on implicit domains a polar rule whose angular resolution grows with the
/// degree.
pub fn domain_rule(dom: &Domain, degree: usize) -> QuadratureRule {
    refined_rule(dom, degree, 1, 1)
}

/// Like [`domain_rule`] with `panels` radial panels and an angular
/// resolution multiplied by `angular_factor`; used for non-smooth integrands.
pub fn refined_rule(dom: &Domain, degree: usize, panels: usize, angular_factor: usize) -> QuadratureRule {
    let radial = degree / 2 + 2;
    let angular = (degree + 2) * angular_factor.max(1);
    match dom {
        Domain::Disk { center, radius } => {
            let r = *radius;
            polar_rule(*center, &move |_| r, radial, panels, angular, Some(degree), dom.name())
        }
        Domain::Ellipse { a, b } => {
            let mut rule = polar_rule([0.0, 0.0], &|_| 1.0, radial, panels, angular, Some(degree), dom.name());
            for p in rule.nodes.iter_mut() {
                p[0] *= a;
                p[1] *= b;
            }
            for w in rule.weights.iter_mut() {
                *w *= a * b;
            }
            rule
        }
        Domain::Implicit(d) => {
            let c = d.center();
            let radius = |th: f64| {
                let p = dom.boundary_position(th / std::f64::consts::TAU);
                (p[0] - c[0]).hypot(p[1] - c[1])
            };
            polar_rule(c, &radius, radial, panels, (64 + 4 * degree) * angular_factor.max(1), None, dom.name())
        }
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `∫_{unit disk} u^i v^j`.
fn unit_disk_moment(i: u32, j: u32) -> f64 {
    if i % 2 == 1 || j % 2 == 1 {
        return 0.0;
    }
    let (p, q) = (i / 2, j / 2);
    std::f64::consts::PI * factorial(2 * p) * factorial(2 * q)
        / (4f64.powi((p + q) as i32) * factorial(p) * factorial(q) * factorial(p + q))
        * 2.0
        / (2 * p + 2 * q + 2) as f64
}

fn binom(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Monomial moments `∫_Ω x^α`, `|α| ≤ n`, in graded-lex order.
pub fn moments(dom: &Domain, n: usize) -> Result<Vec<f64>, QuadError> {
    let exps = exponents(2, n);
    match dom {
        Domain::Disk { center: c, radius: r } => Ok(exps
            .iter()
            .map(|e| {
                // (c0 + r u)^a (c1 + r v)^b expanded binomially
                let mut acc = 0.0;
                for i in 0..=e[0] {
                    for j in 0..=e[1] {
                        let m = unit_disk_moment(i, j);
                        if m == 0.0 {
                            continue;
                        }
                        acc += binom(e[0], i)
                            * binom(e[1], j)
                            * c[0].powi((e[0] - i) as i32)
                            * c[1].powi((e[1] - j) as i32)
                            * r.powi((i + j + 2) as i32)
                            * m;
                    }
                }
                acc
            })
            .collect()),
        Domain::Ellipse { a, b } => Ok(exps
            .iter()
            .map(|e| a.powi(e[0] as i32 + 1) * b.powi(e[1] as i32 + 1) * unit_disk_moment(e[0], e[1]))
            .collect()),
        Domain::Implicit(_) => {
            let mut prev: Option<Vec<f64>> = None;
            for factor in [1usize, 2, 4, 8, 16, 32, 64] {
                let rule = refined_rule(dom, n, 1, factor);
                let cur: Vec<f64> = exps
                    .iter()
                    .map(|e| rule.integrate(&|p| p[0].powi(e[0] as i32) * p[1].powi(e[1] as i32)))
                    .collect();
                if let Some(old) = &prev {
                    let scale = cur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let change = cur.iter().zip(old).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale;
                    if change < 1e-13 {
                        return Ok(cur);
                    }
                    if factor == 64 {
                        return Err(QuadError::Exhausted { estimate: change });
                    }
                }
                prev = Some(cur);
            }
            unreachable!()
        }
    }
}

/// `∫_Ω p` from the moment vector.
pub fn integrate_polynomial(p: &Polynomial, moments: &[f64]) -> f64 {
    compensated_sum(p.coeffs().iter().zip(moments).map(|(c, m)| c * m))
}

/// `‖f‖_{L^p}` by the rule; `p = ∞` takes the maximum over the nodes and,
/// when a domain is given, over a polished boundary search.
pub fn lp_norm(dom: &Domain, f: &(dyn Fn(Point) -> f64 + Sync), p: f64, rule: &QuadratureRule) -> Result<f64, QuadError> {
    if rule.region != dom.name() {
        return Err(QuadError::RegionMismatch {
            rule: rule.region.clone(),
            region: dom.name().to_string(),
        });
    }
    if p.is_infinite() {
        let nodes = rule.nodes.par_iter().map(|&x| f(x).abs()).reduce(|| 0.0, f64::max);
        return Ok(nodes.max(boundary_max(dom, f, 4096)));
    }
    lp_norm_rule(f, p, rule)
}

/// `(Σ w |f|^p)^{1/p}`, or the node maximum for `p = ∞`.
pub fn lp_norm_rule(f: &(dyn Fn(Point) -> f64 + Sync), p: f64, rule: &QuadratureRule) -> Result<f64, QuadError> {
    if !(p > 0.0) {
        return Err(QuadError::BadExponent(p));
    }
    if p.is_infinite() {
        return Ok(rule.nodes.par_iter().map(|&x| f(x).abs()).reduce(|| 0.0, f64::max));
    }
    Ok(rule.integrate(&|x| f(x).abs().powf(p)).powf(1.0 / p))
}

/// Maximum of `|f|` on the boundary: dense parameter scan, then golden-section
/// polish around the best few samples.
pub fn boundary_max(dom: &Domain, f: &(dyn Fn(Point) -> f64 + Sync), samples: usize) -> f64 {
    let h = 1.0 / samples as f64;
    let vals: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| f(dom.boundary_position(k as f64 * h)).abs())
        .collect();
    let mut order: Vec<usize> = (0..samples).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let mut best = vals[order[0]];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for &k in order.iter().take(4) {
        let (mut a, mut b) = ((k as f64 - 1.0) * h, (k as f64 + 1.0) * h);
        let g = |s: f64| f(dom.boundary_position(s)).abs();
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (g(c), g(d));
        for _ in 0..60 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = g(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = g(d);
            }
        }
        best = best.max(fc).max(fd);
    }
    best
}

/// Tensor rule on `G(λ)` in patch-local coordinates under
/// `(x, s) ↦ (x, g(x) − s·λLb)`.
pub fn patch_rule_lambda(patch: &GraphPatch, lambda: f64, base_order: usize, depth_order: usize) -> QuadratureRule {
    let b = lambda * patch.base();
    let h = lambda * patch.l() * patch.base();
    let xs = gauss_interval(base_order.max(1), -b, b);
    let ss = gauss_interval(depth_order.max(1), 0.0, 1.0);
    let mut nodes = Vec::with_capacity(xs.len() * ss.len());
    let mut weights = Vec::with_capacity(xs.len() * ss.len());
    for &(x, wx) in &xs {
        let g = patch.g(x);
        for &(s, ws) in &ss {
            nodes.push([x, g - s * h]);
            weights.push(wx * ws * h);
        }
    }
    QuadratureRule {
        nodes,
        weights,
        exactness: None,
        region: format!("patch(lambda={lambda})"),
    }
}

/// Tensor rule on `G`.
pub fn patch_rule(patch: &GraphPatch, base_order: usize, depth_order: usize) -> QuadratureRule {
    patch_rule_lambda(patch, 1.0, base_order, depth_order)
}

/// Gram value `Σ c_α c_β m_{α+β} = ∫ p²` from moments of degree `2·deg p`.
pub fn gram_square(p: &Polynomial, moments: &[f64]) -> f64 {
    let exps = exponents(2, p.degree());
    let big = 2 * p.degree();
    assert!(moments.len() >= monomial_count(2, big), "moments of degree 2n required");
    let mut terms = Vec::with_capacity(exps.len() * exps.len());
    for (ea, ca) in exps.iter().zip(p.coeffs()) {
        for (eb, cb) in exps.iter().zip(p.coeffs()) {
            let e = [ea[0] + eb[0], ea[1] + eb[1], 0];
            terms.push(ca * cb * moments[crate::polycalc::monomial_index(2, &e)]);
        }
    }
    compensated_sum(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PolyGraph;
    use crate::polycalc::random_polynomial;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(a, b)| a.powi(k as i32) * b).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k + 1) as f64 };
                assert!((got - exact).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn disk_moment_examples() {
        let m = moments(&Domain::unit_disk(), 4).unwrap();
        let idx = |e: [u32; 3]| crate::polycalc::monomial_index(2, &e);
        assert!((m[0] - PI).abs() < 1e-15);
        assert_eq!(m[idx([1, 0, 0])], 0.0);
        assert!((m[idx([2, 0, 0])] - PI / 4.0).abs() < 1e-15);
        assert!((m[idx([2, 2, 0])] - PI / 24.0).abs() < 1e-15);
        let e = moments(&Domain::ellipse(2.0, 0.5).unwrap(), 0).unwrap();
        assert!((e[0] - PI).abs() < 1e-15);
    }

    #[test]
    fn rules_reproduce_moments() {
        for dom in [
            Domain::unit_disk(),
            Domain::disk([0.3, -0.2], 0.7).unwrap(),
            Domain::ellipse(2.0, 1.0).unwrap(),
        ] {
            let n = 8;
            let m = moments(&dom, n).unwrap();
            let rule = domain_rule(&dom, n);
            for (e, mv) in exponents(2, n).iter().zip(&m) {
                let got = rule.integrate(&|p| p[0].powi(e[0] as i32) * p[1].powi(e[1] as i32));
                assert!((got - mv).abs() < 1e-13 * (1.0 + mv.abs()), "{e:?} {got} {mv}");
            }
        }
    }

    #[test]
    fn implicit_moments_match_closed_form() {
        // x²/4 + y² − 1 ≤ 0
        let field = Polynomial::from_coeffs(2, 2, vec![-1.0, 0.0, 0.0, 0.25, 0.0, 1.0]).unwrap();
        let imp = Domain::implicit(field, [0.0, 0.0], [-2.5, 2.5, -1.5, 1.5], 0.5).unwrap();
        let ell = Domain::ellipse(2.0, 1.0).unwrap();
        let a = moments(&imp, 6).unwrap();
        let b = moments(&ell, 6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-11 * (1.0 + y.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn lp_norm_examples() {
        let d = Domain::unit_disk();
        let rule = domain_rule(&d, 4);
        let c = -1.7;
        assert!((lp_norm(&d, &|_| c, 2.0, &rule).unwrap() - c.abs() * PI.sqrt()).abs() < 1e-13);
        assert!((lp_norm(&d, &|p| p[0], 2.0, &rule).unwrap() - PI.sqrt() / 2.0).abs() < 1e-13);
        assert!((lp_norm(&d, &|p| p[0], f64::INFINITY, &rule).unwrap() - 1.0).abs() < 1e-12);
        let other = domain_rule(&Domain::ellipse(2.0, 1.0).unwrap(), 4);
        assert!(matches!(lp_norm(&d, &|p| p[0], 2.0, &other), Err(QuadError::RegionMismatch { .. })));
    }

    #[test]
    fn l2_norm_matches_gram() {
        let d = Domain::unit_disk();
        for deg in 0..=8 {
            let p = random_polynomial(2, deg, 100 + deg as u64).unwrap();
            let m = moments(&d, 2 * deg).unwrap();
            let rule = domain_rule(&d, 2 * deg);
            let l2 = lp_norm(&d, &|x| p.eval_unchecked(&x), 2.0, &rule).unwrap();
            let gram = gram_square(&p, &m);
            assert!((l2 * l2 - gram).abs() < 1e-9 * gram, "deg {deg}");
        }
    }

    #[test]
    fn patch_rule_examples() {
        let b = 0.2;
        let l = 1.5;
        let c = 4.0 * l * b;
        let patch = GraphPatch::new(Arc::new(PolyGraph::constant(c)), b, l, 1.0).unwrap();
        let rule = patch_rule(&patch, 3, 3);
        assert!((rule.total_weight() - 2.0 * b * l * b).abs() < 1e-15);

        // g linear: ∫_G y = ∫_{-b}^{b} [g y − y²/2 evaluated between g − Lb and g] dx
        let (c0, c1) = (c + 0.3, 0.4);
        let patch = GraphPatch::new(Arc::new(PolyGraph::new(vec![c0, c1])), b, l, 1.0).unwrap();
        let rule = patch_rule(&patch, 4, 4);
        let h = l * b;
        // ∫_{g−h}^{g} y dy = g h − h²/2, integrated in x: 2b c0 h − b h²
        let exact = 2.0 * b * c0 * h - b * h * h;
        assert!((rule.integrate(&|p| p[1]) - exact).abs() < 1e-14);
    }

    #[test]
    fn patch_rule_converges_on_transcendental_graph() {
        let b = 0.5;
        let g = crate::domain::FnGraph::new("cos", |x: f64| [3.0 + x.cos(), -x.sin(), -x.cos()]);
        let patch = GraphPatch::new(Arc::new(g), b, 1.0, 1.0).unwrap();
        // area of G is 2b·Lb for any g; integrate y instead
        let exact = {
            // ∫_{-b}^{b} (g h − h²/2) dx with ∫ cos = 2 sin b
            let h = b;
            h * (3.0 * 2.0 * b + 2.0 * b.sin()) - b * h * h
        };
        let mut prev = f64::INFINITY;
        for order in [1, 2, 3, 4, 6] {
            let err = (patch_rule(&patch, order, 2).integrate(&|p| p[1]) - exact).abs();
            assert!(err <= prev);
            prev = err;
        }
        assert!(prev < 1e-10);
    }
}
