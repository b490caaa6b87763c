//! Experiment dispatch: each experiment yields CSV rows and a JSON summary.

use c2poly::bernstein::{patch_growth, sampled_growth, MaximalDerivativeSpec};
use c2poly::cubature::{lp_maxmin_weights, moment_residual, verify_rule, OrthonormalBasis};
use c2poly::discretize::{mz_partition, mz_ratio_sweep};
use c2poly::domain::{boundary_cover_check, decompose_boundary, Domain, DECOMPOSITION_LAMBDA};
use c2poly::nets::{greedy_maximal_net, CandidateStream, Partition};
use c2poly::parabola::{parabola_suite, threshold, ParabolaFamily};
use serde_json::{json, Value};

use crate::config::{BernsteinTarget, Experiment, ExperimentConfig};

pub struct Report {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub summary: Value,
}

/// A numerical failure inside an experiment, with the step that failed.
#[derive(Debug)]
pub struct RunError(pub String);

fn ctx<E: std::fmt::Display>(step: &str) -> impl Fn(E) -> RunError + '_ {
    move |e| RunError(format!("{step}: {e}"))
}

/// 17 significant digits, so every value round-trips.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let dom = cfg.domain.build().map_err(RunError)?;
    let seed = cfg.seed;
    match &cfg.experiment {
        Experiment::Net {
            delta,
            interior,
            boundary_layers,
        } => {
            let stream = CandidateStream {
                interior: *interior,
                boundary_layers: *boundary_layers,
            };
            let net = greedy_maximal_net(&dom, *delta, &stream, seed).map_err(ctx("net"))?;
            let rows = net
                .centers()
                .iter()
                .enumerate()
                .map(|(i, c)| vec![i.to_string(), num(c[0]), num(c[1])])
                .collect();
            let res = net.resolution();
            Ok(Report {
                header: vec!["index", "x", "y"],
                rows,
                summary: json!({
                    "centers": net.len(),
                    "min_separation": net.min_separation(),
                    "cardinality_times_delta_sq": net.len() as f64 * delta * delta,
                    "candidates": res.candidates,
                    "interior_spacing": res.interior_spacing,
                }),
            })
        }
        Experiment::Partition { delta, samples, per_cell } => {
            let part = Partition::build(&dom, *delta, &CandidateStream::default(), *samples, seed).map_err(ctx("partition"))?;
            let reg = part.regularity_check(&dom, *per_cell, seed ^ 1).map_err(ctx("regularity check"))?;
            let rows = (0..part.len())
                .map(|i| {
                    let c = part.nodes()[i];
                    vec![i.to_string(), num(c[0]), num(c[1]), num(part.measures()[i]), num(part.stderr()[i])]
                })
                .collect();
            Ok(Report {
                header: vec!["index", "x", "y", "measure", "stderr"],
                rows,
                summary: json!({
                    "cells": part.len(),
                    "measure_total": part.measures().iter().sum::<f64>(),
                    "area": dom.area(),
                    "repairs": part.net().resolution().repairs,
                    "regular": reg.pass(),
                    "inner_checked": reg.inner_checked,
                    "inner_violations": reg.inner_violations,
                    "outer_checked": reg.outer_checked,
                    "outer_violations": reg.outer_violations,
                    "fresh_checked": reg.fresh_checked,
                    "fresh_unassigned": reg.fresh_unassigned,
                }),
            })
        }
        Experiment::Mz {
            n,
            p,
            deltas,
            trials,
            samples,
            stop_at_first,
        } => {
            let mut rows = Vec::new();
            let mut per_p = Vec::new();
            for pv in p {
                let sweep = mz_ratio_sweep(&dom, *n, pv.value(), deltas, *trials, *samples, *stop_at_first, seed)
                    .map_err(ctx("mz sweep"))?;
                for rep in &sweep.reports {
                    for (t, r) in rep.ratios.iter().enumerate() {
                        rows.push(vec![pv.label(), num(rep.delta), t.to_string(), num(*r)]);
                    }
                }
                per_p.push(json!({
                    "p": pv.label(),
                    "empirical_delta0": sweep.empirical_delta0,
                    "sweep": sweep.reports.iter().map(|r| json!({
                        "delta": r.delta,
                        "centers": r.centers,
                        "repairs": r.repairs,
                        "min_ratio": r.min_ratio,
                        "max_ratio": r.max_ratio,
                        "in_band": r.in_band(),
                    })).collect::<Vec<_>>(),
                }));
            }
            Ok(Report {
                header: vec!["p", "delta", "trial", "ratio"],
                rows,
                summary: json!({ "results": per_p }),
            })
        }
        Experiment::Cubature {
            n,
            delta,
            samples,
            verify_trials,
        } => {
            let part = mz_partition(&dom, *n, *delta, &CandidateStream::default(), *samples, seed).map_err(ctx("partition"))?;
            let basis = OrthonormalBasis::new(&dom, *n).map_err(ctx("basis"))?;
            let rule = lp_maxmin_weights(&basis, part.nodes(), part.measures()).map_err(ctx("max-min program"))?;
            let check = verify_rule(&rule, &dom, Some(part.measures()), *verify_trials, seed ^ 2).map_err(ctx("verification"))?;
            let rows = (0..rule.nodes.len())
                .map(|i| {
                    vec![
                        i.to_string(),
                        num(rule.nodes[i][0]),
                        num(rule.nodes[i][1]),
                        num(rule.weights[i]),
                        num(part.measures()[i]),
                    ]
                })
                .collect();
            Ok(Report {
                header: vec!["index", "x", "y", "weight", "cell_measure"],
                rows,
                summary: json!({
                    "nodes": rule.nodes.len(),
                    "t_star": rule.t_star,
                    "min_weight_ratio": rule.min_ratio(part.measures()),
                    "residual": moment_residual(&basis, &rule.nodes, &rule.weights),
                    "exact_error": check.exact_error,
                    "next_degree_error": check.next_degree_error,
                    "upper_ratio_min": check.upper_ratio_min,
                    "upper_ratio_max": check.upper_ratio_max,
                    "upper_spread": check.upper_spread(),
                    "lower_bound_failures": check.lower_bound_failures,
                }),
            })
        }
        Experiment::Bernstein {
            target,
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
        } => {
            let fit = match target {
                BernsteinTarget::Domain => {
                    let mut spec = MaximalDerivativeSpec::new(&dom, *r, *j, *l);
                    if let Some(m) = mu {
                        spec.mu = *m;
                    }
                    if let Some(d) = density {
                        spec.density = *d;
                    }
                    sampled_growth(&dom, &spec, p.value(), n_grid, *samples, seed).map_err(ctx("growth"))?
                }
                BernsteinTarget::Patch => {
                    let patches = decompose_boundary(&dom, *base).map_err(ctx("decomposition"))?;
                    patch_growth(&patches[0], *r, *j, *l, p.value(), *lambda, n_grid, *samples, seed).map_err(ctx("growth"))?
                }
            };
            let rows = fit
                .ns
                .iter()
                .zip(&fit.ratios)
                .map(|(n, v)| vec![n.to_string(), num(*v)])
                .collect();
            Ok(Report {
                header: vec!["n", "ratio"],
                rows,
                summary: json!({
                    "p": p_label(p.value()),
                    "rate": r + j + 2 * l,
                    "slope": fit.slope,
                    "degenerate": fit.degenerate(),
                    "excluded": fit.excluded,
                }),
            })
        }
        Experiment::ParabolaCheck {
            patch,
            a,
            grid,
            probes,
            inverse_points,
        } => {
            let patch = patch.build().map_err(RunError)?;
            let a = a.unwrap_or_else(|| threshold(&patch));
            let fam = ParabolaFamily::new(patch, a).map_err(ctx("parabola family"))?;
            let s = parabola_suite(&fam, *grid, *probes, *inverse_points, seed).map_err(ctx("parabola checks"))?;
            Ok(Report {
                header: vec!["check", "points", "value"],
                rows: vec![
                    vec!["jacobian_max_rel".into(), s.jacobian_points.to_string(), num(s.jacobian_max_rel)],
                    vec!["bound_violations".into(), s.bound_points.to_string(), s.bound_violations.to_string()],
                    vec!["roundtrip_max".into(), s.roundtrip_points.to_string(), num(s.roundtrip_max)],
                ],
                summary: json!({
                    "a": fam.a(),
                    "a_bar": fam.a_bar(),
                    "a0": fam.a0(),
                    "a1": fam.a1(),
                    "checks": s,
                }),
            })
        }
        Experiment::Decompose { base, cover_samples } => decompose(&dom, *base, *cover_samples),
    }
}

fn decompose(dom: &Domain, base: f64, cover_samples: usize) -> Result<Report, RunError> {
    let patches = decompose_boundary(dom, base).map_err(ctx("decomposition"))?;
    let cover = boundary_cover_check(dom, &patches, DECOMPOSITION_LAMBDA, cover_samples);
    let rows = patches
        .iter()
        .enumerate()
        .map(|(i, p)| {
            vec![
                i.to_string(),
                p.axis().to_string(),
                p.upward().to_string(),
                num(p.shift()[0]),
                num(p.shift()[1]),
                num(p.base()),
                num(p.l()),
                num(p.m()),
            ]
        })
        .collect();
    Ok(Report {
        header: vec!["index", "axis", "upward", "shift_x", "shift_y", "base", "l", "m"],
        rows,
        summary: json!({
            "patches": patches.len(),
            "cover_lambda": DECOMPOSITION_LAMBDA,
            "cover_samples": cover.samples,
            "uncovered": cover.uncovered,
            "covered": cover.pass,
        }),
    })
}
