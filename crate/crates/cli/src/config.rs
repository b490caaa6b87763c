//! Experiment configuration: a versioned JSON document, validated in full
//! before any computation starts.

use std::path::PathBuf;

use c2poly::domain::{Domain, GraphPatch, PolyGraph};
use c2poly::polycalc::Polynomial;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub domain: DomainConfig,
    pub experiment: Experiment,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File stem of the CSV and JSON reports; defaults to the experiment kind.
    #[serde(default)]
    pub prefix: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            prefix: None,
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainConfig {
    Disk {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// `{F < 0}` for a bivariate polynomial `F` given by graded-lex coefficients.
    Implicit {
        degree: usize,
        coeffs: Vec<f64>,
        center: [f64; 2],
        bbox: [f64; 4],
        kappa0: f64,
    },
}

impl DomainConfig {
    pub fn build(&self) -> Result<Domain, String> {
        let dom = match self {
            DomainConfig::Disk { center, radius } => Domain::disk(*center, *radius),
            DomainConfig::Ellipse { a, b } => Domain::ellipse(*a, *b),
            DomainConfig::Implicit {
                degree,
                coeffs,
                center,
                bbox,
                kappa0,
            } => {
                let field = Polynomial::from_coeffs(2, *degree, coeffs.clone()).map_err(|e| e.to_string())?;
                Domain::implicit(field, *center, *bbox, *kappa0)
            }
        };
        dom.map_err(|e| format!("domain: {e}"))
    }
}

/// An exponent `p`: a positive number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PValue {
    Finite(f64),
    Named(Infinity),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Infinity {
    #[serde(rename = "inf")]
    Inf,
}

impl PValue {
    pub fn value(self) -> f64 {
        match self {
            PValue::Finite(p) => p,
            PValue::Named(Infinity::Inf) => f64::INFINITY,
        }
    }

    pub fn label(self) -> String {
        match self {
            PValue::Finite(p) => format!("{p}"),
            PValue::Named(_) => "inf".into(),
        }
    }
}

/// A graph patch in its local frame: `y = g(x)` with `g` given by its
/// power-series coefficients, base `b`, depth parameter `L` and bound `M`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    pub coeffs: Vec<f64>,
    pub base: f64,
    pub l: f64,
    pub m: f64,
}

impl PatchConfig {
    pub fn build(&self) -> Result<GraphPatch, String> {
        GraphPatch::new(std::sync::Arc::new(PolyGraph::new(self.coeffs.clone())), self.base, self.l, self.m)
            .map_err(|e| format!("patch: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BernsteinTarget {
    /// The maximal-operator functional on the whole domain.
    Domain,
    /// The `D^{(r)}` functional on the first patch of the boundary decomposition.
    Patch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Net {
        delta: f64,
        #[serde(default = "default_interior")]
        interior: usize,
        #[serde(default = "default_true")]
        boundary_layers: bool,
    },
    Partition {
        delta: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_per_cell")]
        per_cell: usize,
    },
    Mz {
        n: usize,
        p: Vec<PValue>,
        deltas: Vec<f64>,
        trials: usize,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_true")]
        stop_at_first: bool,
    },
    Cubature {
        n: usize,
        delta: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_verify")]
        verify_trials: usize,
    },
    Bernstein {
        #[serde(default = "default_target")]
        target: BernsteinTarget,
        r: usize,
        j: usize,
        l: usize,
        p: PValue,
        n_grid: Vec<usize>,
        #[serde(default = "default_family")]
        samples: usize,
        #[serde(default)]
        mu: Option<f64>,
        #[serde(default)]
        density: Option<usize>,
        #[serde(default = "default_base")]
        base: f64,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    ParabolaCheck {
        patch: PatchConfig,
        #[serde(default)]
        a: Option<f64>,
        #[serde(default = "default_grid")]
        grid: usize,
        #[serde(default = "default_probes")]
        probes: usize,
        #[serde(default = "default_inverse")]
        inverse_points: usize,
    },
    Decompose {
        base: f64,
        #[serde(default = "default_cover")]
        cover_samples: usize,
    },
}

fn default_interior() -> usize {
    1_000_000
}
fn default_true() -> bool {
    true
}
fn default_samples() -> usize {
    1_000_000
}
fn default_per_cell() -> usize {
    64
}
fn default_verify() -> usize {
    20
}
fn default_target() -> BernsteinTarget {
    BernsteinTarget::Domain
}
fn default_family() -> usize {
    8
}
fn default_base() -> f64 {
    0.2
}
fn default_lambda() -> f64 {
    1.5
}
fn default_grid() -> usize {
    200
}
fn default_probes() -> usize {
    10_000
}
fn default_inverse() -> usize {
    1_000
}
fn default_cover() -> usize {
    4096
}

pub const EXPERIMENTS: [(&str, &str); 7] = [
    ("net", "greedy maximal delta-net for the boundary-adapted metric"),
    ("partition", "regular partition with Monte Carlo cell measures"),
    ("mz", "Marcinkiewicz ratio sweep over delta"),
    ("cubature", "positive cubature weights by the max-min program"),
    ("bernstein", "growth exponent of the Bernstein functional"),
    ("parabola-check", "Jacobian, u-bounds and inverse round trip of a parabola family"),
    ("decompose", "boundary decomposition into graph patches"),
];

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Net { .. } => "net",
            Experiment::Partition { .. } => "partition",
            Experiment::Mz { .. } => "mz",
            Experiment::Cubature { .. } => "cubature",
            Experiment::Bernstein { .. } => "bernstein",
            Experiment::ParabolaCheck { .. } => "parabola-check",
            Experiment::Decompose { .. } => "decompose",
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite, got {v}"))
    }
}

fn nonzero(name: &str, v: usize) -> Result<(), String> {
    if v > 0 {
        Ok(())
    } else {
        Err(format!("{name} must be at least 1"))
    }
}

fn check_p(p: PValue) -> Result<(), String> {
    match p {
        PValue::Finite(v) if !(v >= 1.0 && v.is_finite()) => Err(format!("p must be >= 1 or \"inf\", got {v}")),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.domain.build()?;
        match &self.experiment {
            Experiment::Net { delta, interior, .. } => {
                positive("delta", *delta)?;
                nonzero("interior", *interior)
            }
            Experiment::Partition { delta, samples, per_cell } => {
                positive("delta", *delta)?;
                nonzero("samples", *samples)?;
                nonzero("per_cell", *per_cell)
            }
            Experiment::Mz {
                n,
                p,
                deltas,
                trials,
                samples,
                ..
            } => {
                nonzero("n", *n)?;
                nonzero("trials", *trials)?;
                nonzero("samples", *samples)?;
                if p.is_empty() || deltas.is_empty() {
                    return Err("p and deltas must be non-empty".into());
                }
                p.iter().try_for_each(|&v| check_p(v))?;
                deltas.iter().try_for_each(|&d| positive("delta", d))
            }
            Experiment::Cubature {
                n,
                delta,
                samples,
                verify_trials,
            } => {
                nonzero("n", *n)?;
                positive("delta", *delta)?;
                nonzero("samples", *samples)?;
                nonzero("verify_trials", *verify_trials)
            }
            Experiment::Bernstein {
                r,
                j,
                l,
                p,
                n_grid,
                samples,
                mu,
                density,
                base,
                lambda,
                ..
            } => {
                check_p(*p)?;
                if r + j + l == 0 {
                    return Err("r + j + l must be at least 1".into());
                }
                if n_grid.len() < 4 || n_grid.contains(&0) {
                    return Err("n_grid needs at least four positive degrees".into());
                }
                nonzero("samples", *samples)?;
                if let Some(m) = mu {
                    positive("mu", *m)?;
                }
                if let Some(d) = density {
                    nonzero("density", *d)?;
                }
                positive("base", *base)?;
                if !(*lambda >= 1.0) {
                    return Err(format!("lambda must be >= 1, got {lambda}"));
                }
                Ok(())
            }
            Experiment::ParabolaCheck {
                patch,
                a,
                grid,
                probes,
                inverse_points,
            } => {
                patch.build()?;
                if let Some(a) = a {
                    positive("a", *a)?;
                }
                nonzero("grid", *grid)?;
                nonzero("probes", *probes)?;
                nonzero("inverse_points", *inverse_points)
            }
            Experiment::Decompose { base, cover_samples } => {
                positive("base", *base)?;
                nonzero("cover_samples", *cover_samples)
            }
        }
    }

    pub fn prefix(&self) -> String {
        self.output.prefix.clone().unwrap_or_else(|| self.experiment.kind().to_string())
    }
}
