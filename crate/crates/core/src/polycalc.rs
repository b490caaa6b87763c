//! Dense multivariate polynomials and the directional-derivative calculus.
//!
//! Coefficients of a polynomial of total degree at most `n` in `d ≤ 3`
//! variables are stored densely in graded-lexicographic order: all monomials
//! of degree 0, then degree 1, and so on; inside one degree the exponent of
//! the first variable decreases, then the second. For `d = 2` and degree 2 the
//! order is `1, x, y, x², xy, y²`.
//!
//! Every derivative operator here acts on coefficients. Nothing is
//! approximated by finite differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Largest supported number of variables.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported dimension {0} (must be 1, 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("coefficient count {found} does not match binomial(n+d, d) = {expected}")]
    CoefficientCount { expected: usize, found: usize },
}

pub type Exponent = [u32; MAX_DIM];

/// `binomial(n, k)` as f64-safe usize for the small arguments used here.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of monomials of total degree at most `degree` in `dim` variables.
pub fn monomial_count(dim: usize, degree: usize) -> usize {
    binomial(degree + dim, dim)
}

/// Exponents of all monomials of total degree at most `degree`, in storage order.
pub fn exponents(dim: usize, degree: usize) -> Vec<Exponent> {
    let mut out = Vec::with_capacity(monomial_count(dim, degree));
    for k in 0..=degree as u32 {
        match dim {
            1 => out.push([k, 0, 0]),
            2 => {
                for j in 0..=k {
                    out.push([k - j, j, 0]);
                }
            }
            3 => {
                for a in (0..=k).rev() {
                    for b in (0..=(k - a)).rev() {
                        out.push([a, b, k - a - b]);
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Storage index of a monomial exponent.
pub fn monomial_index(dim: usize, exp: &Exponent) -> usize {
    let k = (exp[0] + exp[1] + exp[2]) as usize;
    let offset = if k == 0 { 0 } else { monomial_count(dim, k - 1) };
    match dim {
        1 => offset,
        2 => offset + exp[1] as usize,
        _ => {
            let s = k - exp[0] as usize;
            offset + s * (s + 1) / 2 + exp[2] as usize
        }
    }
}

fn check_dim(dim: usize) -> Result<(), PolyError> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(PolyError::UnsupportedDimension(dim))
    }
}

/// A real polynomial of total degree at most `degree` in `dim` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn zeros(dim: usize, degree: usize) -> Result<Self, PolyError> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            degree,
            coeffs: vec![0.0; monomial_count(dim, degree)],
        })
    }

    pub fn from_coeffs(dim: usize, degree: usize, coeffs: Vec<f64>) -> Result<Self, PolyError> {
        check_dim(dim)?;
        let expected = monomial_count(dim, degree);
        if coeffs.len() != expected {
            return Err(PolyError::CoefficientCount {
                expected,
                found: coeffs.len(),
            });
        }
        Ok(Self { dim, degree, coeffs })
    }

    pub fn constant(dim: usize, value: f64) -> Result<Self, PolyError> {
        Self::from_coeffs(dim, 0, vec![value])
    }

    /// `value · x^exp`, stored with degree `|exp|`.
    pub fn monomial(dim: usize, exp: Exponent, value: f64) -> Result<Self, PolyError> {
        check_dim(dim)?;
        if exp[dim..].iter().any(|&e| e != 0) {
            return Err(PolyError::DimensionMismatch {
                expected: dim,
                found: MAX_DIM,
            });
        }
        let degree = (exp[0] + exp[1] + exp[2]) as usize;
        let mut p = Self::zeros(dim, degree)?;
        p.coeffs[monomial_index(dim, &exp)] = value;
        Ok(p)
    }

    /// The coordinate function `x_i`.
    pub fn coordinate(dim: usize, i: usize) -> Result<Self, PolyError> {
        let mut exp = [0; MAX_DIM];
        if i >= dim {
            return Err(PolyError::DimensionMismatch {
                expected: dim,
                found: i + 1,
            });
        }
        exp[i] = 1;
        Self::monomial(dim, exp, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, exp: &Exponent) -> f64 {
        let k = (exp[0] + exp[1] + exp[2]) as usize;
        if k > self.degree {
            0.0
        } else {
            self.coeffs[monomial_index(self.dim, exp)]
        }
    }

    /// Copy with storage widened to `degree` (no-op if already that large).
    pub fn with_degree(&self, degree: usize) -> Self {
        if degree <= self.degree {
            return self.clone();
        }
        let mut out = Self::zeros(self.dim, degree).expect("valid dim");
        out.coeffs[..self.coeffs.len()].copy_from_slice(&self.coeffs);
        out
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, PolyError> {
        if x.len() != self.dim {
            return Err(PolyError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluation without the length check; `x` must hold at least `dim` entries.
    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let n = self.degree;
        let mut pows = [[1.0f64; 32]; MAX_DIM];
        let mut heap: Vec<Vec<f64>>;
        let table: &[[f64; 32]] = if n < 32 {
            for v in 0..self.dim {
                for k in 1..=n {
                    pows[v][k] = pows[v][k - 1] * x[v];
                }
            }
            &pows
        } else {
            heap = vec![vec![1.0; n + 1]; self.dim];
            for v in 0..self.dim {
                for k in 1..=n {
                    heap[v][k] = heap[v][k - 1] * x[v];
                }
            }
            return self.eval_with(|v, k| heap[v][k]);
        };
        self.eval_with(|v, k| table[v][k])
    }

    fn eval_with(&self, pow: impl Fn(usize, usize) -> f64) -> f64 {
        let mut acc = 0.0;
        let mut idx = 0;
        for k in 0..=self.degree as u32 {
            match self.dim {
                1 => {
                    acc += self.coeffs[idx] * pow(0, k as usize);
                    idx += 1;
                }
                2 => {
                    for j in 0..=k {
                        acc += self.coeffs[idx] * pow(0, (k - j) as usize) * pow(1, j as usize);
                        idx += 1;
                    }
                }
                _ => {
                    for a in (0..=k).rev() {
                        for b in (0..=(k - a)).rev() {
                            let c = k - a - b;
                            acc += self.coeffs[idx]
                                * pow(0, a as usize)
                                * pow(1, b as usize)
                                * pow(2, c as usize);
                            idx += 1;
                        }
                    }
                }
            }
        }
        acc
    }

    /// Partial derivative with respect to variable `var`.
    pub fn partial(&self, var: usize) -> Self {
        let out_degree = self.degree.saturating_sub(1);
        let mut out = Self::zeros(self.dim, out_degree).expect("valid dim");
        if self.degree == 0 || var >= self.dim {
            return out;
        }
        for (exp, &c) in exponents(self.dim, self.degree).iter().zip(&self.coeffs) {
            if exp[var] == 0 || c == 0.0 {
                continue;
            }
            let mut e = *exp;
            e[var] -= 1;
            out.coeffs[monomial_index(self.dim, &e)] += c * exp[var] as f64;
        }
        out
    }

    /// `∂^{orders[0]}_1 ∂^{orders[1]}_2 …` applied to `self`.
    pub fn partial_multi(&self, orders: &[usize]) -> Self {
        let mut out = self.clone();
        for (var, &k) in orders.iter().enumerate() {
            for _ in 0..k {
                out = out.partial(var);
            }
        }
        out
    }

    /// First-order directional derivative `(ξ·∇) p`.
    pub fn directional(&self, xi: &[f64]) -> Result<Self, PolyError> {
        if xi.len() != self.dim {
            return Err(PolyError::DimensionMismatch {
                expected: self.dim,
                found: xi.len(),
            });
        }
        let mut out = Self::zeros(self.dim, self.degree.saturating_sub(1))?;
        for (v, &w) in xi.iter().enumerate() {
            if w != 0.0 {
                out.axpy(w, &self.partial(v));
            }
        }
        Ok(out)
    }

    /// `(ξ·∇)^ℓ p`; `ℓ = 0` returns `p` unchanged.
    pub fn directional_power(&self, xi: &[f64], ell: usize) -> Result<Self, PolyError> {
        let mut out = self.clone();
        if ell == 0 && xi.len() != self.dim {
            return Err(PolyError::DimensionMismatch {
                expected: self.dim,
                found: xi.len(),
            });
        }
        for _ in 0..ell {
            out = out.directional(xi)?;
        }
        Ok(out)
    }

    /// `∂_{ξ_1} ∂_{ξ_2} … ∂_{ξ_r} p`.
    pub fn mixed_directional(&self, dirs: &[Vec<f64>]) -> Result<Self, PolyError> {
        let mut out = self.clone();
        for d in dirs {
            out = out.directional(d)?;
        }
        Ok(out)
    }

    /// `self += a · other`, widening storage when `other` has higher degree.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert_eq!(self.dim, other.dim, "dimension mismatch in axpy");
        if other.degree > self.degree {
            *self = self.with_degree(other.degree);
        }
        for (s, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            dim: self.dim,
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in mul");
        let degree = self.degree + other.degree;
        let mut out = Self::zeros(self.dim, degree).expect("valid dim");
        let ea = exponents(self.dim, self.degree);
        let eb = exponents(other.dim, other.degree);
        for (xa, &ca) in ea.iter().zip(&self.coeffs) {
            if ca == 0.0 {
                continue;
            }
            for (xb, &cb) in eb.iter().zip(&other.coeffs) {
                if cb == 0.0 {
                    continue;
                }
                let e = [xa[0] + xb[0], xa[1] + xb[1], xa[2] + xb[2]];
                out.coeffs[monomial_index(self.dim, &e)] += ca * cb;
            }
        }
        out
    }

    /// The polynomial `u ↦ p(M u + c)` where `M` is `dim × dim` (row-major rows).
    pub fn compose_affine(&self, m: &[Vec<f64>], c: &[f64]) -> Result<Self, PolyError> {
        let d = self.dim;
        if m.len() != d || c.len() != d || m.iter().any(|row| row.len() != d) {
            return Err(PolyError::DimensionMismatch {
                expected: d,
                found: m.len(),
            });
        }
        // powers[v][k] = (Σ_j m[v][j] u_j + c_v)^k
        let mut powers: Vec<Vec<Self>> = Vec::with_capacity(d);
        for v in 0..d {
            let mut lin = Self::zeros(d, 1)?;
            lin.coeffs[0] = c[v];
            for j in 0..d {
                let mut e = [0; MAX_DIM];
                e[j] = 1;
                lin.coeffs[monomial_index(d, &e)] = m[v][j];
            }
            let mut row = vec![Self::constant(d, 1.0)?];
            for k in 1..=self.degree {
                let next = row[k - 1].mul(&lin);
                row.push(next);
            }
            powers.push(row);
        }
        let mut out = Self::zeros(d, self.degree)?;
        for (exp, &coef) in exponents(d, self.degree).iter().zip(&self.coeffs) {
            if coef == 0.0 {
                continue;
            }
            let mut term = powers[0][exp[0] as usize].clone();
            for v in 1..d {
                term = term.mul(&powers[v][exp[v] as usize]);
            }
            out.axpy(coef, &term);
        }
        out.degree = self.degree;
        out.coeffs.truncate(monomial_count(d, self.degree));
        Ok(out)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// A product of directional powers `∂_{ξ_1}^{k_1} ⋯ ∂_{ξ_m}^{k_m}`, applied right to left.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalOperator {
    directions: Vec<Vec<f64>>,
    powers: Vec<usize>,
}

impl DirectionalOperator {
    pub fn new(directions: Vec<Vec<f64>>, powers: Vec<usize>) -> Result<Self, PolyError> {
        if directions.len() != powers.len() {
            return Err(PolyError::DimensionMismatch {
                expected: directions.len(),
                found: powers.len(),
            });
        }
        Ok(Self { directions, powers })
    }

    pub fn order(&self) -> usize {
        self.powers.iter().sum()
    }

    pub fn apply(&self, p: &Polynomial) -> Result<Polynomial, PolyError> {
        let mut out = p.clone();
        for (d, &k) in self.directions.iter().zip(&self.powers).rev() {
            out = out.directional_power(d, k)?;
        }
        Ok(out)
    }
}

/// Seeded random polynomial with i.i.d. standard normal coefficients.
pub fn random_polynomial(dim: usize, degree: usize, seed: u64) -> Result<Polynomial, PolyError> {
    check_dim(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..monomial_count(dim, degree))
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Polynomial::from_coeffs(dim, degree, coeffs)
}

/// One term `sign · ∂_{direction}^{power}` of the Kemperman expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct KempermanTerm {
    pub sign: f64,
    pub direction: Vec<f64>,
    pub power: usize,
}

/// Expands `∂_{ξ_1} ⋯ ∂_{ξ_r}` into `Σ_{S ⊂ {1..r}} (−1)^{#S} ∂_{ξ_S}^r`,
/// with `ξ_S = −Σ_{j∈S} ξ_j / j`. Returns all `2^r` terms (the empty set
/// contributes the zero direction).
pub fn kemperman_expand(dirs: &[Vec<f64>]) -> Vec<KempermanTerm> {
    let r = dirs.len();
    let dim = dirs.first().map_or(0, Vec::len);
    (0..1usize << r)
        .map(|mask| {
            let mut direction = vec![0.0; dim];
            for (j, d) in dirs.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    for (acc, v) in direction.iter_mut().zip(d) {
                        *acc -= v / (j + 1) as f64;
                    }
                }
            }
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            KempermanTerm {
                sign,
                direction,
                power: r,
            }
        })
        .collect()
}

/// Applies a Kemperman expansion to `p` term by term and sums.
pub fn apply_kemperman(terms: &[KempermanTerm], p: &Polynomial) -> Result<Polynomial, PolyError> {
    let mut out = Polynomial::zeros(p.dim(), p.degree().saturating_sub(terms.first().map_or(0, |t| t.power)))?;
    for t in terms {
        out.axpy(t.sign, &p.directional_power(&t.direction, t.power)?);
    }
    Ok(out)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Parabolic arc `Q(t) = q0 + q1 t + (q2/2) t²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
}

impl Quadratic {
    pub fn value(&self, t: f64) -> f64 {
        self.q0 + self.q1 * t + 0.5 * self.q2 * t * t
    }

    pub fn slope(&self, t: f64) -> f64 {
        self.q1 + self.q2 * t
    }
}

/// `d^r/dt^r p(z + t, Q(t))` at `t`, by the closed form
/// `Σ_{i+a+2b=r} r!/(i! a! b! 2^b) (Q')^a (Q'')^b ∂_1^i ∂_2^{a+b} p`.
pub fn composite_derivative(p: &Polynomial, z: f64, q: Quadratic, r: usize, t: f64) -> Result<f64, PolyError> {
    if p.dim() != 2 {
        return Err(PolyError::DimensionMismatch {
            expected: 2,
            found: p.dim(),
        });
    }
    let point = [z + t, q.value(t)];
    let q1 = q.slope(t);
    let q2 = q.q2;
    let rf = factorial(r);
    let mut total = 0.0;
    for b in 0..=r / 2 {
        for a in 0..=(r - 2 * b) {
            let i = r - 2 * b - a;
            let w = rf / (factorial(i) * factorial(a) * factorial(b) * 2f64.powi(b as i32));
            let factor = q1.powi(a as i32) * q2.powi(b as i32);
            if factor == 0.0 {
                continue;
            }
            let d = p.partial_multi(&[i, a + b]);
            total += w * factor * d.eval_unchecked(&point);
        }
    }
    Ok(total)
}
