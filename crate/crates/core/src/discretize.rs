//! Marcinkiewicz-type comparisons of `L^p` norms with weighted sample sums,
//! the oscillation functional over separated nets, and the univariate
//! Chebyshev-node inequality.

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{stream_rng, Domain, GeometryError, Point};
use crate::nets::{halton, CandidateStream, Net, NetError, Partition};
use crate::polycalc::{random_polynomial, PolyError, Polynomial};
use crate::quad::{boundary_max, compensated_sum, gauss_interval, lp_norm, refined_rule, QuadError, QuadratureRule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizeError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("nodes {0} and {1} are closer than 1/n")]
    GapViolation(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Seed of trial `i` derived from the run seed.
pub fn trial_seed(seed: u64, i: u64) -> u64 {
    stream_rng(seed, i).next_u64()
}

/// `(Σ_j |f(ξ_j)|^p |R_j|)^{1/p}`, or `max_j |f(ξ_j)|` for `p = ∞`.
pub fn discrete_norm(part: &Partition, f: &(dyn Fn(Point) -> f64 + Sync), p: f64) -> f64 {
    let vals: Vec<f64> = part.nodes().par_iter().map(|&x| f(x).abs()).collect();
    if p.is_infinite() {
        return vals.iter().fold(0.0, |m, &v| m.max(v));
    }
    compensated_sum(vals.iter().zip(part.measures()).map(|(v, m)| v.powf(p) * m)).powf(1.0 / p)
}

/// Reference rule for `L^p` norms of degree-`n` polynomials.
pub fn reference_rule(dom: &Domain, n: usize, p: f64) -> QuadratureRule {
    if p == 2.0 {
        refined_rule(dom, 2 * n + 2, 1, 1)
    } else {
        // |f|^p is only piecewise smooth: refine radially and angularly
        refined_rule(dom, 2 * n + 6, 6, 4)
    }
}

/// `‖f‖_p` on the domain; for `p = ∞` the rule nodes, the boundary and a
/// local polish around the best node.
pub fn reference_norm(dom: &Domain, f: &(dyn Fn(Point) -> f64 + Sync), p: f64, rule: &QuadratureRule) -> Result<f64, DiscretizeError> {
    if !p.is_infinite() {
        return Ok(lp_norm(dom, f, p, rule)?);
    }
    let (best, at) = rule
        .nodes
        .iter()
        .map(|&x| (f(x).abs(), x))
        .fold((0.0, [0.0, 0.0]), |a, b| if b.0 > a.0 { b } else { a });
    let mut m = best.max(boundary_max(dom, f, 4096));
    // compass search from the best node
    let mut x = at;
    let mut step = 0.05 * dom.diameter();
    let mut fx = best;
    while step > 1e-10 {
        let mut moved = false;
        for d in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]] {
            let y = [x[0] + step * d[0], x[1] + step * d[1]];
            if dom.contains(y) {
                let fy = f(y).abs();
                if fy > fx {
                    x = y;
                    fx = fy;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    m = m.max(fx);
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MzReport {
    pub domain: String,
    pub n: usize,
    pub delta: f64,
    pub p: f64,
    pub trials: usize,
    pub samples: usize,
    pub centers: usize,
    pub repairs: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
}

impl MzReport {
    /// All ratios inside `[1/2, 3/2]`.
    pub fn in_band(&self) -> bool {
        self.min_ratio >= 0.5 && self.max_ratio <= 1.5
    }
}

/// Partition of norm `δ/n` (`δ` itself when `n = 0`).
pub fn mz_partition(dom: &Domain, n: usize, delta: f64, stream: &CandidateStream, samples: usize, seed: u64) -> Result<Partition, DiscretizeError> {
    let t = if n == 0 { delta } else { delta / n as f64 };
    Ok(Partition::build(dom, t, stream, samples, seed)?)
}

/// Ratios `discrete_norm / ‖f‖_p` over seeded random degree-`n` polynomials.
pub fn mz_ratios(dom: &Domain, part: &Partition, n: usize, delta: f64, p: f64, trials: usize, seed: u64) -> Result<MzReport, DiscretizeError> {
    let rule = reference_rule(dom, n, p);
    let ratios: Vec<Result<f64, DiscretizeError>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let f = random_polynomial(2, n, trial_seed(seed, i as u64))?;
            let eval = |x: Point| f.eval_unchecked(&x);
            let norm = reference_norm(dom, &eval, p, &rule)?;
            Ok(discrete_norm(part, &eval, p) / norm)
        })
        .collect();
    let ratios = ratios.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(MzReport {
        domain: dom.name().to_string(),
        n,
        delta,
        p,
        trials,
        samples: part.samples(),
        centers: part.len(),
        repairs: part.net().resolution().repairs,
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        ratios,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MzSweep {
    pub reports: Vec<MzReport>,
    /// Largest swept `δ` whose ratios all lie in `[1/2, 3/2]`.
    pub empirical_delta0: Option<f64>,
}

/// Sweeps `δ` over `deltas` (largest first); with `stop_at_first` the sweep
/// ends at the first `δ` inside the band.
#[allow(clippy::too_many_arguments)]
pub fn mz_ratio_sweep(
    dom: &Domain,
    n: usize,
    p: f64,
    deltas: &[f64],
    trials: usize,
    samples: usize,
    stop_at_first: bool,
    seed: u64,
) -> Result<MzSweep, DiscretizeError> {
    if trials < 1 {
        return Err(DiscretizeError::InvalidParameter("need at least one trial".into()));
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut reports = Vec::new();
    let mut delta0 = None;
    for (k, &delta) in sorted.iter().enumerate() {
        let part = mz_partition(dom, n, delta, &CandidateStream::default(), samples, trial_seed(seed, 1_000_000 + k as u64))?;
        let rep = mz_ratios(dom, &part, n, delta, p, trials, seed)?;
        let ok = rep.in_band();
        reports.push(rep);
        if ok && delta0.is_none() {
            delta0 = Some(delta);
            if stop_at_first {
                break;
            }
        }
    }
    Ok(MzSweep {
        reports,
        empirical_delta0: delta0,
    })
}

/// Points of `U(ξ, ℓε/n)` used to estimate oscillations, and the volumes
/// `|U(ξ, ε/n)|`, for every center of an `ε/n`-separated net.
#[derive(Debug, Clone)]
pub struct OscillationSampler {
    pub ell: f64,
    pub eps: f64,
    pub n: usize,
    pub volumes: Vec<f64>,
    pub points: Vec<Vec<Point>>,
    /// Fewest points found in any ball (the sampling resolution).
    pub min_points: usize,
}

impl OscillationSampler {
    pub fn new(dom: &Domain, net: &Net, ell: f64, eps: f64, n: usize, per_ball: usize, seed: u64) -> Result<Self, DiscretizeError> {
        if n == 0 || !(eps > 0.0) || !(ell >= 1.0) {
            return Err(DiscretizeError::InvalidParameter("need n >= 1, eps > 0, ell >= 1".into()));
        }
        let t = eps / n as f64;
        if net.delta() < t * (1.0 - 1e-12) {
            return Err(DiscretizeError::InvalidParameter(format!(
                "net separation {} is below eps/n = {t}",
                net.delta()
            )));
        }
        let radius = ell * t;
        let bb = dom.bbox();
        let per: Vec<Result<(f64, Vec<Point>), DiscretizeError>> = net
            .centers()
            .par_iter()
            .zip(net.roots().par_iter())
            .enumerate()
            .map(|(j, (&c, &rc))| {
                let vol = dom.ball_volume_mc(c, t, 4000, trial_seed(seed, j as u64))?.estimate;
                let mut pts = vec![c];
                let (_, foot) = dom.dist_to_boundary(c)?;
                if (c[0] - foot.position[0]).hypot(c[1] - foot.position[1]) + rc <= radius {
                    pts.push(foot.position);
                }
                let win = [
                    (c[0] - radius).max(bb[0]),
                    (c[0] + radius).min(bb[1]),
                    (c[1] - radius).max(bb[2]),
                    (c[1] + radius).min(bb[3]),
                ];
                let mut accepted = 0;
                let mut k = 1u64;
                while accepted < per_ball && k <= 100 * per_ball as u64 {
                    let h = halton(k);
                    k += 1;
                    let p = [win[0] + (win[1] - win[0]) * h[0], win[2] + (win[3] - win[2]) * h[1]];
                    if !dom.contains(p) {
                        continue;
                    }
                    let rp = dom.sqrt_dist(p)?;
                    if (p[0] - c[0]).hypot(p[1] - c[1]) + (rp - rc).abs() <= radius {
                        pts.push(p);
                        accepted += 1;
                    }
                }
                Ok((vol, pts))
            })
            .collect();
        let mut volumes = Vec::with_capacity(per.len());
        let mut points = Vec::with_capacity(per.len());
        for r in per {
            let (v, p) = r?;
            volumes.push(v);
            points.push(p);
        }
        let min_points = points.iter().map(Vec::len).min().unwrap_or(0);
        Ok(Self {
            ell,
            eps,
            n,
            volumes,
            points,
            min_points,
        })
    }

    /// `(Σ_ξ |U(ξ, ε/n)| osc(f; U(ξ, ℓε/n))^p)^{1/p}`.
    pub fn functional(&self, f: &(dyn Fn(Point) -> f64 + Sync), p: f64) -> f64 {
        let osc: Vec<f64> = self
            .points
            .par_iter()
            .map(|pts| {
                let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                    let v = f(x);
                    (lo.min(v), hi.max(v))
                });
                hi - lo
            })
            .collect();
        if p.is_infinite() {
            return osc.iter().fold(0.0, |m, &v| m.max(v));
        }
        compensated_sum(osc.iter().zip(&self.volumes).map(|(o, v)| v * o.powf(p))).powf(1.0 / p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationReport {
    pub value: f64,
    pub norm: f64,
    /// `value / (ε ‖f‖_p)`.
    pub ratio: f64,
    pub min_points: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn oscillation_sum(
    dom: &Domain,
    net: &Net,
    f: &(dyn Fn(Point) -> f64 + Sync),
    ell: f64,
    eps: f64,
    n: usize,
    p: f64,
    seed: u64,
) -> Result<OscillationReport, DiscretizeError> {
    let sampler = OscillationSampler::new(dom, net, ell, eps, n, 200, seed)?;
    let rule = reference_rule(dom, n, p);
    let norm = reference_norm(dom, f, p, &rule)?;
    let value = sampler.functional(f, p);
    Ok(OscillationReport {
        value,
        norm,
        ratio: value / (eps * norm),
        min_points: sampler.min_points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeInequality {
    pub lhs: f64,
    pub rhs_core: f64,
    pub ratio: f64,
}

/// Both sides of the weighted Chebyshev-node inequality for a univariate `f`
/// of (storage) degree `k`.
pub fn univariate_node_inequality(f: &Polynomial, thetas: &[f64], n: usize, p: f64, ell: f64) -> Result<NodeInequality, DiscretizeError> {
    if f.dim() != 1 {
        return Err(PolyError::DimensionMismatch {
            expected: 1,
            found: f.dim(),
        }
        .into());
    }
    if n == 0 || !(p >= 1.0) || !(ell > 0.0) {
        return Err(DiscretizeError::InvalidParameter("need n >= 1, p >= 1, ell > 0".into()));
    }
    let nf = n as f64;
    for (i, w) in thetas.windows(2).enumerate() {
        if (w[1] - w[0]).abs() < 1.0 / nf {
            return Err(DiscretizeError::GapViolation(i, i + 1));
        }
    }
    let val = |theta: f64| f.eval_unchecked(&[theta.cos()]).abs();
    const GRID: usize = 400;
    let maxima: Vec<f64> = thetas
        .iter()
        .map(|&th| {
            (0..=GRID)
                .map(|s| val(th + ell / nf * (2.0 * s as f64 / GRID as f64 - 1.0)))
                .fold(0.0, f64::max)
        })
        .collect();
    let k = f.degree() as f64;
    let (lhs, integral) = if p.is_infinite() {
        let sup = (0..=20 * GRID).map(|s| val(std::f64::consts::PI * s as f64 / (20 * GRID) as f64)).fold(0.0, f64::max);
        (maxima.iter().copied().fold(0.0, f64::max), sup)
    } else {
        let lhs = compensated_sum(thetas.iter().zip(&maxima).map(|(th, m)| (th.sin() / nf + 1.0 / (nf * nf)) * m.powf(p)));
        let panels = 64;
        let int = compensated_sum((0..panels).flat_map(|q| {
            let a = -1.0 + 2.0 * q as f64 / panels as f64;
            gauss_interval(24, a, a + 2.0 / panels as f64)
                .into_iter()
                .map(|(x, w)| w * f.eval_unchecked(&[x]).abs().powf(p))
        }));
        (lhs.powf(1.0 / p), int.powf(1.0 / p))
    };
    let rhs_core = (1.0 + k / nf) * integral;
    Ok(NodeInequality {
        lhs,
        rhs_core,
        ratio: lhs / rhs_core,
    })
}

/// Chebyshev polynomial `T_k` in the monomial basis.
pub fn chebyshev_t(k: usize) -> Polynomial {
    let mut prev = vec![1.0];
    let mut cur = vec![0.0, 1.0];
    if k == 0 {
        return Polynomial::from_coeffs(1, 0, prev).expect("valid");
    }
    for _ in 1..k {
        let mut next = vec![0.0; cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= c;
        }
        prev = cur;
        cur = next;
    }
    // univariate graded order is ascending powers
    Polynomial::from_coeffs(1, k, cur).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_stream() -> CandidateStream {
        CandidateStream {
            interior: 40_000,
            boundary_layers: true,
        }
    }

    #[test]
    fn constant_discrete_norm() {
        let d = Domain::unit_disk();
        let part = Partition::build(&d, 0.3, &small_stream(), 100_000, 1).unwrap();
        let c = -1.7;
        for p in [1.0, 2.0, 3.5] {
            let v = discrete_norm(&part, &|_| c, p);
            assert!((v - c.abs() * std::f64::consts::PI.powf(1.0 / p)).abs() < 1e-9);
        }
        assert_eq!(discrete_norm(&part, &|_| c, f64::INFINITY), c.abs());
        let single = Partition::single_cell(&d, [0.2, 0.1], 20_000, 2).unwrap();
        assert!((discrete_norm(&single, &|x| x[0] - 3.0 * x[1], f64::INFINITY) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn fine_partition_approaches_l2_norm() {
        let d = Domain::unit_disk();
        let part = Partition::build(&d, 0.08, &small_stream(), 400_000, 3).unwrap();
        let v = discrete_norm(&part, &|x| x[0], 2.0);
        assert!((v - std::f64::consts::PI.sqrt() / 2.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn degree_zero_ratios_are_one() {
        let d = Domain::unit_disk();
        let part = mz_partition(&d, 0, 0.4, &small_stream(), 100_000, 4).unwrap();
        let rep = mz_ratios(&d, &part, 0, 0.4, 2.0, 20, 5).unwrap();
        assert!(rep.ratios.iter().all(|r| (r - 1.0).abs() < 1e-2), "{rep:?}");
    }

    #[test]
    fn node_inequality_example() {
        let one = Polynomial::from_coeffs(1, 2, vec![1.0, 0.0, 0.0]).unwrap();
        let r = univariate_node_inequality(&one, &[std::f64::consts::FRAC_PI_2], 2, 1.0, 1.0).unwrap();
        assert!((r.lhs - 0.75).abs() < 1e-14);
        assert!((r.rhs_core - 4.0).abs() < 1e-12);
        assert!((r.ratio - 0.1875).abs() < 1e-12);
        assert!(matches!(
            univariate_node_inequality(&one, &[0.0, 0.1], 2, 1.0, 1.0),
            Err(DiscretizeError::GapViolation(0, 1))
        ));
    }

    #[test]
    fn chebyshev_polynomials() {
        let t5 = chebyshev_t(5);
        for x in [-0.9, -0.2, 0.4, 1.0] {
            let th: f64 = f64::acos(x);
            assert!((t5.eval(&[x]).unwrap() - (5.0 * th).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn oscillation_basics() {
        let d = Domain::unit_disk();
        let (eps, n) = (0.8, 2);
        let net = crate::nets::greedy_maximal_net(&d, eps / n as f64, &small_stream(), 6).unwrap();
        let s = OscillationSampler::new(&d, &net, 1.0, eps, n, 60, 7).unwrap();
        assert_eq!(s.functional(&|_| 2.0, 2.0), 0.0);
        let f = |x: Point| x[0] * x[0] - x[1];
        let a = s.functional(&f, 2.0);
        let b = s.functional(&|x| -3.0 * f(x), 2.0);
        assert!((b - 3.0 * a).abs() <= 1e-12 * b);
        assert!(a > 0.0);
    }
}
