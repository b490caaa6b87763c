//! Separated nets, regular partitions and the Chebyshev partition of a patch.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{stream_rng, Domain, GeometryError, GraphPatch, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("point ({}, {}) is farther than delta from every center", .point[0], .point[1])]
    Unassigned { point: Point },
    #[error("centers {0} and {1} are closer than delta")]
    NotSeparated(usize, usize),
    #[error("n1 = {n1} must exceed 5L + n = {bound}")]
    ResolutionTooSmall { n1: usize, bound: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Which metric a net is separated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricTag {
    RhoOmega,
    RhoHat,
}

/// Quasi-random point `index` of the 2D Halton sequence (bases 2, 3).
pub fn halton(index: u64) -> [f64; 2] {
    fn radical(mut i: u64, base: u64) -> f64 {
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    }
    [radical(index, 2), radical(index, 3)]
}

/// Candidate points offered to the greedy net construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateStream {
    /// Shifted Halton points drawn from the bounding box.
    pub interior: usize,
    /// Whether boundary-parallel layers at depths `(kδ/4)²` come first.
    pub boundary_layers: bool,
}

impl Default for CandidateStream {
    fn default() -> Self {
        Self {
            interior: 1_000_000,
            boundary_layers: true,
        }
    }
}

/// What the finite candidate stream can certify about maximality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamResolution {
    pub candidates: usize,
    /// Typical spacing of the interior quasi-random points.
    pub interior_spacing: f64,
    /// Number of centers added by the partition repair pass.
    pub repairs: usize,
}

/// Uniform bucket grid over metric key coordinates.
#[derive(Debug, Clone, Default)]
struct Buckets {
    cell: f64,
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl Buckets {
    fn new(cell: f64) -> Self {
        Self {
            cell,
            map: HashMap::new(),
        }
    }

    fn key(&self, k: Point) -> (i64, i64) {
        ((k[0] / self.cell).floor() as i64, (k[1] / self.cell).floor() as i64)
    }

    fn insert(&mut self, k: Point, idx: usize) {
        let key = self.key(k);
        self.map.entry(key).or_default().push(idx);
    }

    fn near(&self, k: Point) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.key(k);
        (-1..=1).flat_map(move |di| {
            (-1..=1).flat_map(move |dj| self.map.get(&(i + di, j + dj)).into_iter().flatten().copied())
        })
    }
}

/// A `δ`-separated set of centers.
#[derive(Debug, Clone)]
pub struct Net {
    centers: Vec<Point>,
    /// `√dist(ξ, Γ)` for `ρ_Ω`, `√δ(ξ)` for `ρ̂_G`.
    roots: Vec<f64>,
    delta: f64,
    metric: MetricTag,
    resolution: StreamResolution,
    buckets: Buckets,
}

fn rho_tagged(metric: MetricTag, a: Point, ra: f64, b: Point, rb: f64) -> f64 {
    match metric {
        MetricTag::RhoOmega => (a[0] - b[0]).hypot(a[1] - b[1]) + (ra - rb).abs(),
        MetricTag::RhoHat => (a[0] - b[0]).abs().max((ra - rb).abs()),
    }
}

fn metric_key(metric: MetricTag, p: Point, root: f64) -> Point {
    match metric {
        MetricTag::RhoOmega => p,
        MetricTag::RhoHat => [p[0], root],
    }
}

impl Net {
    fn empty(delta: f64, metric: MetricTag) -> Self {
        Self {
            centers: Vec::new(),
            roots: Vec::new(),
            delta,
            metric,
            resolution: StreamResolution {
                candidates: 0,
                interior_spacing: f64::NAN,
                repairs: 0,
            },
            buckets: Buckets::new(delta),
        }
    }

    /// Net with the given centers in `ρ_Ω`; separation is verified.
    pub fn from_centers(dom: &Domain, centers: Vec<Point>, delta: f64) -> Result<Self, NetError> {
        let mut net = Self::empty(delta, MetricTag::RhoOmega);
        for c in centers {
            let r = dom.sqrt_dist(c)?;
            if let Some(j) = net.within(c, r, delta, true) {
                return Err(NetError::NotSeparated(j, net.len()));
            }
            net.push(c, r);
        }
        Ok(net)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn roots(&self) -> &[f64] {
        &self.roots
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn metric(&self) -> MetricTag {
        self.metric
    }

    pub fn resolution(&self) -> StreamResolution {
        self.resolution
    }

    fn push(&mut self, p: Point, root: f64) {
        let idx = self.centers.len();
        self.buckets.insert(metric_key(self.metric, p, root), idx);
        self.centers.push(p);
        self.roots.push(root);
    }

    /// Some center with `ρ < r` (strict) or `ρ ≤ r`; `r ≤ δ` required.
    fn within(&self, p: Point, root: f64, r: f64, strict: bool) -> Option<usize> {
        self.buckets.near(metric_key(self.metric, p, root)).find(|&i| {
            let d = rho_tagged(self.metric, p, root, self.centers[i], self.roots[i]);
            if strict {
                d < r
            } else {
                d <= r
            }
        })
    }

    /// Distance from `p` (with root `root`) to center `i`.
    pub fn rho_to(&self, i: usize, p: Point, root: f64) -> f64 {
        rho_tagged(self.metric, p, root, self.centers[i], self.roots[i])
    }

    /// The partition rule: the unique center with `ρ < δ/2` if any, else the
    /// smallest index with `ρ ≤ δ`.
    pub fn assign(&self, p: Point, root: f64) -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in self.buckets.near(metric_key(self.metric, p, root)) {
            let d = self.rho_to(i, p, root);
            if d < 0.5 * self.delta {
                return Some(i);
            }
            if d <= self.delta && best.is_none_or(|b| i < b) {
                best = Some(i);
            }
        }
        best
    }

    /// Offers a candidate; accepted when no center is within `δ`.
    fn offer(&mut self, p: Point, root: f64) -> bool {
        if self.within(p, root, self.delta, true).is_some() {
            return false;
        }
        self.push(p, root);
        true
    }

    /// Smallest pairwise distance over all center pairs.
    pub fn min_separation(&self) -> f64 {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut m = f64::INFINITY;
                for j in i + 1..n {
                    m = m.min(rho_tagged(self.metric, self.centers[i], self.roots[i], self.centers[j], self.roots[j]));
                }
                m
            })
            .reduce(|| f64::INFINITY, f64::min)
    }
}

fn shift_for(seed: u64) -> [f64; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    [rng.random(), rng.random()]
}

fn shifted_halton(index: u64, shift: [f64; 2]) -> [f64; 2] {
    let h = halton(index + 1);
    [(h[0] + shift[0]).fract(), (h[1] + shift[1]).fract()]
}

/// Greedy maximal `δ`-separated set in `ρ_Ω` over the candidate stream.
pub fn greedy_maximal_net(dom: &Domain, delta: f64, stream: &CandidateStream, seed: u64) -> Result<Net, NetError> {
    if !(delta > 0.0) {
        return Err(NetError::InvalidParameter("delta must be positive".into()));
    }
    let mut net = Net::empty(delta, MetricTag::RhoOmega);
    let mut offered = 0usize;
    let bb = dom.bbox();
    let area = (bb[1] - bb[0]) * (bb[3] - bb[2]);
    let spacing = (area / stream.interior.max(1) as f64).sqrt();
    if stream.boundary_layers {
        let step = delta / 4.0;
        let count = (dom.perimeter() / step).ceil() as usize;
        let feet: Vec<_> = (0..count).map(|k| dom.boundary_point(k as f64 / count as f64)).collect();
        // layers stop once their spacing matches the interior resolution
        let max_root = (2.0 * spacing / delta).max(2.0 * delta).min((0.5 * dom.kappa0()).sqrt());
        let layers = (max_root / step).ceil() as usize;
        for k in 0..=layers {
            let root = k as f64 * step;
            let depth = root * root;
            for foot in &feet {
                let p = [foot.position[0] - depth * foot.normal[0], foot.position[1] - depth * foot.normal[1]];
                if dom.contains(p) {
                    offered += 1;
                    net.offer(p, root);
                }
            }
        }
    }
    let shift = shift_for(seed);
    const BATCH: usize = 65_536;
    let mut start = 0;
    while start < stream.interior {
        let end = (start + BATCH).min(stream.interior);
        let batch: Vec<Option<(Point, f64)>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let h = shifted_halton(i as u64, shift);
                let p = [bb[0] + (bb[1] - bb[0]) * h[0], bb[2] + (bb[3] - bb[2]) * h[1]];
                if dom.contains(p) {
                    dom.sqrt_dist(p).ok().map(|r| (p, r))
                } else {
                    None
                }
            })
            .collect();
        for (p, r) in batch.into_iter().flatten() {
            offered += 1;
            net.offer(p, r);
        }
        start = end;
    }
    if net.is_empty() {
        return Err(NetError::InvalidParameter("candidate stream produced no interior point".into()));
    }
    net.resolution = StreamResolution {
        candidates: offered,
        interior_spacing: spacing,
        repairs: 0,
    };
    Ok(net)
}

/// Greedy `δ`-separated set in `ρ̂_G` on `G`, in patch-local coordinates.
pub fn greedy_patch_net(patch: &GraphPatch, delta: f64, candidates: usize, seed: u64) -> Result<Net, NetError> {
    if !(delta > 0.0) {
        return Err(NetError::InvalidParameter("delta must be positive".into()));
    }
    let mut net = Net::empty(delta, MetricTag::RhoHat);
    let shift = shift_for(seed);
    let b = patch.base();
    let h = patch.l() * b;
    for i in 0..candidates {
        let q = shifted_halton(i as u64, shift);
        // uniform in (x, √depth) so the net resolves the boundary layer
        let x = -b + 2.0 * b * q[0];
        let root = h.sqrt() * q[1];
        let p = [x, patch.g(x) - root * root];
        net.offer(p, root);
    }
    net.resolution = StreamResolution {
        candidates,
        interior_spacing: (2.0 * b * h.sqrt() / candidates.max(1) as f64).sqrt(),
        repairs: 0,
    };
    Ok(net)
}

/// Cells `R_j` of a net with Monte Carlo measures.
#[derive(Debug, Clone)]
pub struct Partition {
    net: Net,
    measures: Vec<f64>,
    stderr: Vec<f64>,
    samples: usize,
    sample_seed: u64,
}

/// Draws `samples` bounding-box points in fixed streams, returning those in
/// the domain with their root distances, in a thread-count independent order.
fn domain_samples(dom: &Domain, samples: usize, seed: u64) -> Result<Vec<(Point, f64)>, NetError> {
    const CHUNK: usize = 8192;
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<(Point, f64)>, GeometryError>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let p = dom.sample_bbox(&mut rng);
                if dom.contains(p) {
                    out.push((p, dom.sqrt_dist(p)?));
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for part in parts {
        all.extend(part?);
    }
    Ok(all)
}

impl Partition {
    /// Net of separation `delta`, repaired so every Monte Carlo sample is
    /// assigned, with cell measures from the same samples.
    pub fn build(dom: &Domain, delta: f64, stream: &CandidateStream, samples: usize, seed: u64) -> Result<Self, NetError> {
        let net = greedy_maximal_net(dom, delta, stream, seed)?;
        Self::from_net(dom, net, samples, seed ^ 0x9e37_79b9_7f4a_7c15)
    }

    pub fn from_net(dom: &Domain, mut net: Net, samples: usize, seed: u64) -> Result<Self, NetError> {
        let pts = domain_samples(dom, samples, seed)?;
        let missing: Vec<usize> = pts
            .par_iter()
            .enumerate()
            .filter(|(_, (p, r))| net.assign(*p, *r).is_none())
            .map(|(i, _)| i)
            .collect();
        let mut repairs = 0;
        for i in missing {
            let (p, r) = pts[i];
            if net.offer(p, r) {
                repairs += 1;
            }
        }
        net.resolution.repairs += repairs;
        let assigned: Vec<Option<usize>> = pts.par_iter().map(|(p, r)| net.assign(*p, *r)).collect();
        let mut counts = vec![0usize; net.len()];
        for (a, (p, _)) in assigned.iter().zip(&pts) {
            match a {
                Some(j) => counts[*j] += 1,
                None => return Err(NetError::Unassigned { point: *p }),
            }
        }
        let inside = pts.len().max(1) as f64;
        let area = dom.area();
        let measures = counts.iter().map(|&c| area * c as f64 / inside).collect();
        let stderr = counts
            .iter()
            .map(|&c| {
                let q = c as f64 / inside;
                area * (q * (1.0 - q) / inside).sqrt()
            })
            .collect();
        Ok(Self {
            net,
            measures,
            stderr,
            samples,
            sample_seed: seed,
        })
    }

    /// One cell containing the whole domain.
    pub fn single_cell(dom: &Domain, center: Point, samples: usize, seed: u64) -> Result<Self, NetError> {
        let net = Net::from_centers(dom, vec![center], 4.0 * (dom.diameter() + 1.0))?;
        Self::from_net(dom, net, samples, seed)
    }

    pub fn net(&self) -> &Net {
        &self.net
    }

    pub fn len(&self) -> usize {
        self.net.len()
    }

    pub fn is_empty(&self) -> bool {
        self.net.is_empty()
    }

    /// Representatives `ξ_j` (the net centers).
    pub fn nodes(&self) -> &[Point] {
        self.net.centers()
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn stderr(&self) -> &[f64] {
        &self.stderr
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Cell index of `η` under the partition rule.
    pub fn assign_cell(&self, dom: &Domain, eta: Point) -> Result<usize, NetError> {
        let r = dom.sqrt_dist(eta)?;
        self.net.assign(eta, r).ok_or(NetError::Unassigned { point: eta })
    }

    /// Checks `U°(ξ_j, δ/2) ⊂ R_j ⊂ U(ξ_j, δ)` by sampling.
    pub fn regularity_check(&self, dom: &Domain, per_cell: usize, seed: u64) -> Result<RegularityReport, NetError> {
        let delta = self.net.delta();
        let half = 0.5 * delta;
        let results: Vec<Result<(usize, usize), NetError>> = (0..self.len())
            .into_par_iter()
            .map(|j| {
                let mut rng = stream_rng(seed, j as u64);
                let c = self.net.centers[j];
                let rc = self.net.roots[j];
                let (mut checked, mut bad) = (0, 0);
                let mut tries = 0;
                while checked < per_cell && tries < 200 * per_cell {
                    tries += 1;
                    let p = [c[0] + half * (2.0 * rng.random::<f64>() - 1.0), c[1] + half * (2.0 * rng.random::<f64>() - 1.0)];
                    if !dom.contains(p) {
                        continue;
                    }
                    let r = dom.sqrt_dist(p)?;
                    let d = rho_tagged(MetricTag::RhoOmega, p, r, c, rc);
                    if d >= half {
                        continue;
                    }
                    checked += 1;
                    if self.net.assign(p, r) != Some(j) {
                        bad += 1;
                    }
                }
                Ok((checked, bad))
            })
            .collect();
        let mut inner_checked = 0;
        let mut inner_violations = 0;
        for r in results {
            let (c, b) = r?;
            inner_checked += c;
            inner_violations += b;
        }
        // outer inclusion on the samples defining the cells
        let pts = domain_samples(dom, self.samples, self.sample_seed)?;
        let outer_violations = pts
            .par_iter()
            .filter(|(p, r)| match self.net.assign(*p, *r) {
                Some(j) => self.net.rho_to(j, *p, *r) > delta,
                None => true,
            })
            .count();
        // fresh points exposing the finite resolution of the candidate stream
        let fresh = domain_samples(dom, self.samples, seed.wrapping_add(1))?;
        let fresh_unassigned = fresh.par_iter().filter(|(p, r)| self.net.assign(*p, *r).is_none()).count();
        Ok(RegularityReport {
            inner_checked,
            inner_violations,
            outer_checked: pts.len(),
            outer_violations,
            fresh_checked: fresh.len(),
            fresh_unassigned,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub inner_checked: usize,
    pub inner_violations: usize,
    pub outer_checked: usize,
    pub outer_violations: usize,
    /// Independent samples farther than `δ` from every center.
    pub fresh_checked: usize,
    pub fresh_unassigned: usize,
}

impl RegularityReport {
    pub fn pass(&self) -> bool {
        self.inner_violations == 0 && self.outer_violations == 0
    }
}

/// Size of a greedy `δ`-net of `U(ξ, Lδ)` and the `L^d` comparator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverCount {
    pub count: usize,
    pub comparator: f64,
}

pub fn cover_count(dom: &Domain, xi: Point, l: f64, delta: f64, seed: u64) -> Result<CoverCount, NetError> {
    if !(l >= 1.0) || !(delta > 0.0) {
        return Err(NetError::InvalidParameter("need L >= 1 and delta > 0".into()));
    }
    let radius = l * delta;
    let rx = dom.sqrt_dist(xi)?;
    let mut net = Net::empty(delta, MetricTag::RhoOmega);
    net.push(xi, rx);
    let bb = dom.bbox();
    let win = [
        (xi[0] - radius).max(bb[0]),
        (xi[0] + radius).min(bb[1]),
        (xi[1] - radius).max(bb[2]),
        (xi[1] + radius).min(bb[3]),
    ];
    let shift = shift_for(seed);
    for i in 0..20_000u64 {
        let h = shifted_halton(i, shift);
        let p = [win[0] + (win[1] - win[0]) * h[0], win[2] + (win[3] - win[2]) * h[1]];
        if !dom.contains(p) {
            continue;
        }
        let r = dom.sqrt_dist(p)?;
        if rho_tagged(MetricTag::RhoOmega, p, r, xi, rx) <= radius {
            net.offer(p, r);
        }
    }
    Ok(CoverCount {
        count: net.len(),
        comparator: l * l,
    })
}

/// `β_j = L − L cos(jπ/n1)`, `j = 0..=n1`.
pub fn chebyshev_nodes(l: f64, n1: usize) -> Vec<f64> {
    (0..=n1)
        .map(|j| 2.0 * l * (j as f64 * std::f64::consts::PI / (2.0 * n1 as f64)).sin().powi(2))
        .collect()
}

/// Partition of a patch into cells `I_{i,j}`: uniform in `x`, Chebyshev in
/// normalized depth `(g(x) − y)/(Lb)`.
#[derive(Debug, Clone)]
pub struct ChebyshevPartition {
    pub n1: usize,
    pub m: usize,
    /// Constant `max |g|/(Lb) + 10` of the construction.
    pub l_const: f64,
    pub beta: Vec<f64>,
    /// Normalized depth nodes `α_0 = 0 < … < α_m = 1`.
    pub alpha: Vec<f64>,
    /// `x_i = −b + 2ib/n1`.
    pub xs: Vec<f64>,
    depth_scale: f64,
    base: f64,
}

pub fn chebyshev_partition(patch: &GraphPatch, n1: usize, n: usize) -> Result<ChebyshevPartition, NetError> {
    let depth_scale = patch.l() * patch.base();
    let gmax = patch.min_g().abs().max(patch.max_g().abs()) / depth_scale;
    let l_const = gmax + 10.0;
    let bound = 5.0 * l_const + n as f64;
    if (n1 as f64) <= bound {
        return Err(NetError::ResolutionTooSmall { n1, bound });
    }
    let beta = chebyshev_nodes(l_const, n1);
    let m = (0..n1).find(|&j| beta[j] < 1.0 && 1.0 <= beta[j + 1]).expect("β crosses 1 below 2L");
    let mut alpha: Vec<f64> = beta[..m].to_vec();
    alpha.push(1.0);
    let b = patch.base();
    let xs = (0..=n1).map(|i| -b + 2.0 * i as f64 * b / n1 as f64).collect();
    Ok(ChebyshevPartition {
        n1,
        m,
        l_const,
        beta,
        alpha,
        xs,
        depth_scale,
        base: b,
    })
}

impl ChebyshevPartition {
    /// Cell `(i, j)`, 1-based as in the construction, of a local point of `G`.
    pub fn cell_of(&self, patch: &GraphPatch, p: Point) -> Option<(usize, usize)> {
        if p[0] < -self.base || p[0] > self.base {
            return None;
        }
        let depth = patch.depth(p) / self.depth_scale;
        if !(0.0..=1.0).contains(&depth) {
            return None;
        }
        let i = self.xs.windows(2).position(|w| p[0] >= w[0] && p[0] <= w[1])? + 1;
        let j = self.alpha.windows(2).position(|w| depth >= w[0] && depth <= w[1])? + 1;
        Some((i, j))
    }

    /// Extremes over `j` of `(α_j − α_{j−1}) / ((√α_j + 1/n1)/n1)`.
    pub fn spacing_ratios(&self) -> (f64, f64) {
        let n1 = self.n1 as f64;
        self.alpha.windows(2).fold((f64::INFINITY, 0.0f64), |(lo, hi), w| {
            let r = (w[1] - w[0]) / ((w[1].sqrt() + 1.0 / n1) / n1);
            (lo.min(r), hi.max(r))
        })
    }

    /// Depth nodes in patch units.
    pub fn depth_nodes(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a * self.depth_scale).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PolyGraph;
    use std::sync::Arc;

    fn small_stream() -> CandidateStream {
        CandidateStream {
            interior: 20_000,
            boundary_layers: true,
        }
    }

    #[test]
    fn huge_delta_gives_one_center() {
        let d = Domain::unit_disk();
        let net = greedy_maximal_net(&d, 10.0, &small_stream(), 1).unwrap();
        assert_eq!(net.len(), 1);
    }

    #[test]
    fn net_is_separated_and_deterministic() {
        let d = Domain::unit_disk();
        let a = greedy_maximal_net(&d, 0.2, &small_stream(), 7).unwrap();
        let b = greedy_maximal_net(&d, 0.2, &small_stream(), 7).unwrap();
        assert_eq!(a.centers(), b.centers());
        assert!(a.min_separation() >= 0.2);
    }

    #[test]
    fn assignment_rule_traces() {
        let d = Domain::unit_disk();
        // three centers on the x-axis, all at depth known in closed form
        let delta = 0.7;
        let net = Net::from_centers(&d, vec![[0.0, 0.0], [-0.6, 0.0], [0.7, 0.0]], delta).unwrap();
        for (j, c) in net.centers().iter().enumerate() {
            assert_eq!(net.assign(*c, d.sqrt_dist(*c).unwrap()), Some(j));
        }
        // η within δ of centers 0 and 1 but not within δ/2 of either: index 0 wins
        let eta = [-0.25, 0.0];
        let r = d.sqrt_dist(eta).unwrap();
        let d0 = net.rho_to(0, eta, r);
        let d1 = net.rho_to(1, eta, r);
        assert!(d0 >= 0.5 * delta && d0 <= delta && d1 <= delta && d1 >= 0.5 * delta);
        assert_eq!(net.assign(eta, r), Some(0));
        // strictly inside δ/2 of center 2 only
        let eta = [0.72, 0.01];
        let r = d.sqrt_dist(eta).unwrap();
        assert!(net.rho_to(2, eta, r) < 0.5 * delta);
        assert_eq!(net.assign(eta, r), Some(2));
        assert!(Net::from_centers(&d, vec![[0.0, 0.0], [0.1, 0.0]], delta).is_err());
    }

    #[test]
    fn single_cell_measure() {
        let d = Domain::unit_disk();
        let part = Partition::single_cell(&d, [0.0, 0.0], 20_000, 3).unwrap();
        assert_eq!(part.len(), 1);
        assert!((part.measures()[0] - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn partition_measures_sum_and_regularity() {
        let d = Domain::unit_disk();
        let part = Partition::build(&d, 0.3, &small_stream(), 200_000, 5).unwrap();
        let total: f64 = part.measures().iter().sum();
        assert!((total - std::f64::consts::PI).abs() < 1e-9);
        assert!(part.measures().iter().all(|&m| m > 0.0));
        let rep = part.regularity_check(&d, 20, 9).unwrap();
        assert!(rep.pass(), "{rep:?}");
    }

    #[test]
    fn cover_count_examples() {
        let d = Domain::unit_disk();
        let one = cover_count(&d, [0.2, 0.1], 1.0, 0.1, 1).unwrap();
        assert!(one.count >= 1 && one.count <= 12);
        let big = cover_count(&d, [0.0, 0.0], 1.0, 10.0, 1).unwrap();
        assert_eq!(big.count, 1);
        let a = cover_count(&d, [0.3, 0.0], 2.0, 0.05, 1).unwrap();
        let b = cover_count(&d, [0.3, 0.0], 4.0, 0.05, 1).unwrap();
        assert!(b.count as f64 <= 4.0 * 2.0 * a.count as f64);
    }

    #[test]
    fn chebyshev_node_example() {
        let beta = chebyshev_nodes(1.0, 4);
        let expected = [0.0, 1.0 - 0.5f64.sqrt(), 1.0, 1.0 + 0.5f64.sqrt(), 2.0];
        for (a, b) in beta.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn chebyshev_partition_cells() {
        let b = 0.1;
        let l = 1.0;
        let patch = GraphPatch::new(Arc::new(PolyGraph::new(vec![4.0 * l * b + 0.01, 0.05])), b, l, 1.0).unwrap();
        assert!(matches!(chebyshev_partition(&patch, 20, 4), Err(NetError::ResolutionTooSmall { .. })));
        let cp = chebyshev_partition(&patch, 120, 4).unwrap();
        assert_eq!(*cp.alpha.last().unwrap(), 1.0);
        assert_eq!(cp.alpha.len(), cp.m + 1);
        let (lo, hi) = cp.spacing_ratios();
        assert!(lo > 0.0 && hi / lo < 20.0, "{lo} {hi}");
        let p = [0.013, patch.g(0.013) - 0.5 * l * b];
        let (i, j) = cp.cell_of(&patch, p).unwrap();
        assert!(p[0] >= cp.xs[i - 1] && p[0] <= cp.xs[i]);
        let dn = cp.depth_nodes();
        assert!(patch.depth(p) >= dn[j - 1] && patch.depth(p) <= dn[j]);
    }

    #[test]
    fn patch_net_separation() {
        let patch = GraphPatch::new(Arc::new(PolyGraph::new(vec![1.0, 0.1, -0.5])), 0.2, 1.2, 1.0).unwrap();
        let net = greedy_patch_net(&patch, 0.05, 5000, 2).unwrap();
        assert_eq!(net.metric(), MetricTag::RhoHat);
        assert!(net.min_separation() >= 0.05);
        assert!(net.len() > 1);
    }
}
