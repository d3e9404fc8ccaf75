use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, to_value};

use super::params::Params;
use super::{base_constants, EmbeddedConstants, ExperimentKind, Outcome, EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_OK};
use crate::criteria::{
    classify_l1_with, classify_lq_with, classify_whole_space_with, random_equivalence_suite, ClassifyOptions,
};
use crate::databuilder::{build_t1_data, predicted_bounds};
use crate::error::{Error, Result};
use crate::heatkernel::{kernel_constants, verify_lower_bounds, BallIndicator, CertifyOptions, Variant, HEAT_TOLERANCE};
use crate::nonlinearity::{builtin_by_name, NonlinearityExpr};
use crate::par::{self, Mode};
use crate::report::write_csv_rows;
use crate::solver::{
    build_propagator, duhamel_iterate, duhamel_lower_bound, find_existence_horizon, horizon_integral, lq_norm,
    simulate_forward, standard_supersolution, supersolution_check, IterateOptions, LowerBoundMode,
    LowerBoundOptions, RadialField, RadialGrid, SimulateOptions,
};

const FAMILY_KEYS: [&str; 5] = ["p", "beta", "p_low", "p_high", "knee"];

fn nonlinearity(params: &Params, d: Option<usize>) -> Result<NonlinearityExpr> {
    let mut family = BTreeMap::new();
    for key in FAMILY_KEYS {
        if let Some(v) = params.f64_opt(key)? {
            family.insert(key.to_string(), v);
        }
    }
    match (params.str("f"), params.str("builtin")) {
        (Some(_), Some(_)) => Err(Error::config("f", "give either f or builtin, not both")),
        (Some(text), None) => {
            if !family.is_empty() {
                return Err(Error::config("builtin", "family parameters need a builtin"));
            }
            NonlinearityExpr::parse(text)
        }
        (None, Some(name)) => {
            if let Some(d) = d {
                family.insert("d".into(), d as f64);
            }
            builtin_by_name(name, &family)
        }
        (None, None) => Err(Error::config("f", "required (or builtin)")),
    }
}

fn variant(params: &Params, default: Variant) -> Result<Variant> {
    match params.str("variant") {
        None => Ok(default),
        Some(v) => Variant::parse(v).map_err(|_| Error::config("variant", format!("unknown variant `{v}`"))),
    }
}

fn kernel_for(d: usize) -> Result<Vec<crate::heatkernel::KernelConstants>> {
    Ok(vec![
        kernel_constants(d, Variant::WholeSpace)?,
        kernel_constants(d, Variant::Dirichlet)?,
    ])
}

fn with_tolerances(mut c: EmbeddedConstants, items: &[(&str, f64)]) -> EmbeddedConstants {
    for (k, v) in items {
        c.tolerances.insert(k.to_string(), *v);
    }
    c
}

pub(crate) fn classify(params: &Params, csv: Option<&str>) -> Result<Outcome> {
    let d = params.dimension(None)?;
    let q = params.f64_or("q", 1.0)?;
    if q < 1.0 {
        return Err(Error::config("q", "must be at least 1"));
    }
    let domain = params.str("domain").unwrap_or("bounded").to_string();
    let opts = ClassifyOptions {
        dead_band: params.positive("dead_band", ClassifyOptions::default().dead_band)?,
        ..ClassifyOptions::default()
    };
    let f = nonlinearity(params, Some(d))?;
    params.finish()?;

    let df = d as f64;
    let verdict = match domain.as_str() {
        "bounded" if q == 1.0 => classify_l1_with(&f, df, &opts)?,
        "bounded" => classify_lq_with(&f, q, df, &opts)?,
        "whole_space" | "whole-space" => classify_whole_space_with(&f, q, df, &opts)?,
        other => return Err(Error::config("domain", format!("unknown domain `{other}`"))),
    };
    if let Some(path) = csv {
        verdict.evidence.write_csv(Path::new(path))?;
    }
    let decided = verdict.outcome.clone().is_decided();
    let mut constants = base_constants(kernel_for(d)?);
    constants.classify = opts;
    constants.dead_band = opts.dead_band;
    Ok(Outcome {
        status: if decided { "decided" } else { "inconclusive" },
        exit_code: if decided { EXIT_OK } else { EXIT_INCONCLUSIVE },
        constants,
        result: json!({ "f": f, "d": d, "q": q, "domain": domain, "verdict": verdict }),
    })
}

fn default_times(radii: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = radii
        .iter()
        .flat_map(|r| [0.01, 0.1, 0.5, 1.0, 2.0].map(|m| m * r * r))
        .collect();
    t.sort_by(f64::total_cmp);
    t.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs());
    t
}

pub(crate) fn verify_kernel(params: &Params, csv: Option<&str>) -> Result<Outcome> {
    let d = params.dimension(Some(1))?;
    let variant = variant(params, Variant::WholeSpace)?;
    let radii = params.list_or("r_grid", &[0.25, 1.0, 4.0])?;
    let times = params.list_or("t_grid", &default_times(&radii))?;
    let opts = CertifyOptions {
        mesh: params.usize_or("mesh", CertifyOptions::default().mesh)?,
        delta: params.f64_opt("delta")?,
        constant_scale: params.positive("inflate", 1.0)?,
        ..CertifyOptions::default()
    };
    params.finish()?;

    let report = verify_lower_bounds(d, &radii, &times, variant, &opts)?;
    if let Some(path) = csv {
        let rows: Vec<Vec<f64>> = report
            .bounds
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.worst.map(|w| vec![i as f64, w.r, w.t, w.x, w.margin]))
            .collect();
        write_csv_rows(Path::new(path), &["bound", "r", "t", "x", "margin"], &rows)?;
    }
    let passed = report.passed;
    Ok(Outcome {
        status: if passed { "passed" } else { "failed" },
        exit_code: if passed { EXIT_OK } else { EXIT_ERROR },
        constants: with_tolerances(base_constants(vec![report.constants]), &[("heat", HEAT_TOLERANCE)]),
        result: to_value(&report)?,
    })
}

pub(crate) fn experiment(kind: ExperimentKind, params: &Params, csv: Option<&str>) -> Result<Outcome> {
    match kind {
        ExperimentKind::Iterate => iterate(params, csv),
        ExperimentKind::Simulate => simulate(params, csv),
        ExperimentKind::LowerBound => lower_bound(params, csv),
        ExperimentKind::Horizon => horizon(params),
        ExperimentKind::BlowupTrend => blowup_trend(params, csv),
        ExperimentKind::EquivalenceSuite => equivalence_suite(params),
    }
}

fn uniform_grid(params: &Params, d: usize) -> Result<Arc<RadialGrid>> {
    let radius = params.positive("radius", 1.0)?;
    let cells = params.usize_or("cells", 256)?;
    Ok(Arc::new(RadialGrid::uniform(d, radius, cells)?))
}

fn simulate_options(params: &Params) -> Result<SimulateOptions> {
    let base = SimulateOptions::default();
    Ok(SimulateOptions {
        dt0: params.positive("dt0", base.dt0)?,
        dt_max: params.positive("dt_max", base.dt_max)?,
        adaptive: params.bool_or("adaptive", base.adaptive)?,
        blowup_norm: params.positive("blowup_norm", base.blowup_norm)?,
        q: params.f64_or("q", base.q)?,
        ..base
    })
}

fn field_rows(field: &RadialField) -> Vec<Vec<f64>> {
    field
        .grid
        .nodes
        .iter()
        .zip(&field.values)
        .map(|(r, v)| vec![*r, *v])
        .collect()
}

fn iterate(params: &Params, csv: Option<&str>) -> Result<Outcome> {
    let d = params.dimension(Some(1))?;
    let f = nonlinearity(params, Some(d))?;
    let grid = uniform_grid(params, d)?;
    let steps = params.usize_or("steps", 64)?;
    let a = params.f64_or("A", 2.0)?;
    let u0_radius = params.positive("u0_radius", 0.5)?;
    let u0_amp = params.f64_or("u0_amp", 0.1)?;
    let given_t = params.f64_opt("T")?;
    let opts = IterateOptions {
        max_iter: params.usize_or("max_iter", 50)?,
        tolerance: params.positive("tol", 1e-8)?,
        keep_iterates: false,
        ..IterateOptions::default()
    };
    params.finish()?;
    if !(a > 1.0) {
        return Err(Error::config("A", "must exceed 1"));
    }
    if steps == 0 {
        return Err(Error::config("steps", "must be positive"));
    }

    let u0 = RadialField::ball(grid.clone(), u0_radius, u0_amp);
    let l1 = lq_norm(&u0, 1.0)?;
    let (t, horizon) = match given_t {
        Some(t) if t > 0.0 => (t, None),
        Some(_) => return Err(Error::config("T", "must be positive")),
        None => {
            let h = find_existence_horizon(&f, l1, d, a)?;
            (h.horizon, Some(h))
        }
    };
    let prop = build_propagator(grid)?;
    let v = standard_supersolution(&prop, &u0, a, t, steps)?;
    let check = supersolution_check(&prop, &u0, &f, &v)?;
    let trace = duhamel_iterate(&prop, &u0, &f, &v, &opts)?;
    let above_init = trace
        .limit
        .values
        .iter()
        .zip(&v.values)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y))
        .fold(f64::NEG_INFINITY, f64::max);
    if let Some(path) = csv {
        let last = trace.limit.at(trace.limit.steps());
        write_csv_rows(Path::new(path), &["r", "limit"], &field_rows(&last))?;
    }
    let ok = trace.converged && check.passed();
    Ok(Outcome {
        status: if ok { "converged" } else { "not_converged" },
        exit_code: if ok { EXIT_OK } else { EXIT_INCONCLUSIVE },
        constants: with_tolerances(base_constants(kernel_for(d)?), &[("iteration", opts.tolerance)]),
        result: json!({
            "T": t,
            "u0_l1": l1,
            "horizon": horizon,
            "supersolution": { "min_margin": check.min_margin, "worst_time": check.worst_time,
                               "worst_radius": check.worst_radius, "passed": check.passed() },
            "iterations": trace.iterations,
            "converged": trace.converged,
            "residual": trace.residual,
            "deltas": trace.deltas,
            "max_increase": trace.max_increase,
            "min_excess": trace.min_excess,
            "limit_minus_init_max": above_init,
            "clamps": trace.clamps,
        }),
    })
}

fn simulate(params: &Params, csv: Option<&str>) -> Result<Outcome> {
    let d = params.dimension(Some(1))?;
    let f = nonlinearity(params, Some(d))?;
    let t = params.positive("T", 1.0)?;
    let opts = simulate_options(params)?;
    let (u0, data) = if params.has("N") {
        let (n, _) = params.range_or("N", (1, 1))?;
        let eps = params.positive("epsilon", 0.25)?;
        let radius = params.positive("radius", 1.0)?;
        params.finish()?;
        let (spec, field) = build_t1_data(&f, d, 1.0, n, eps, radius)?;
        (field, Some(spec))
    } else {
        let grid = uniform_grid(params, d)?;
        let r = params.positive("u0_radius", 0.5)?;
        let amp = params.f64_or("u0_amp", 1.0)?;
        params.finish()?;
        (RadialField::ball(grid, r, amp), None)
    };
    let prop = build_propagator(u0.grid.clone())?;
    let traj = simulate_forward(&prop, &u0, &f, t, &opts)?;
    if let Some(path) = csv {
        traj.write_csv(Path::new(path))?;
    }
    Ok(Outcome {
        status: if traj.blowup.is_some() { "numeric_blowup" } else { "completed" },
        exit_code: EXIT_OK,
        constants: with_tolerances(base_constants(kernel_for(d)?), &[("blowup_norm", opts.blowup_norm)]),
        result: json!({
            "data": data,
            "options": opts,
            "cells": u0.grid.len(),
            "steps": traj.steps,
            "rejected": traj.rejected,
            "final_time": traj.final_time(),
            "peak_l1": traj.peak_l1(),
            "blowup": traj.blowup,
            "samples": traj.samples.len(),
        }),
    })
}

fn lower_bound(params: &Params, csv: Option<&str>) -> Result<Outcome> {
    let d = params.dimension(Some(1))?;
    let f = nonlinearity(params, Some(d))?;
    let variant = variant(params, Variant::WholeSpace)?;
    let mode = match params.str("mode").unwrap_or("certified") {
        "certified" => LowerBoundMode::Certified,
        "quadrature" => LowerBoundMode::Quadrature,
        other => return Err(Error::config("mode", format!("unknown mode `{other}`"))),
    };
    let opts = LowerBoundOptions {
        mode,
        mesh: params.usize_or("mesh", 128)?,
        q: params.f64_or("q", 1.0)?,
        delta: params.f64_opt("delta")?,
        ..LowerBoundOptions::default()
    };
    let r = params.positive("ball_radius", 0.5)?;
    let amp = params.positive("amplitude", 1.0)?;
    let t = params.positive("t", 0.1)?;
    params.finish()?;

    let chi = BallIndicator::centered(r, amp, d)?;
    let report = duhamel_lower_bound(&chi, &f, t, d, variant, &opts)?;
    if let Some(path) = csv {
        let rows: Vec<Vec<f64>> = report.field.grid.faces[1..]
            .iter()
            .zip(&report.field.values)
            .map(|(x, v)| vec![*x, *v])
            .collect();
        write_csv_rows(Path::new(path), &["r", "bound"], &rows)?;
    }
    Ok(Outcome {
        status: "completed",
        exit_code: EXIT_OK,
        constants: with_tolerances(base_constants(vec![report.constants]), &[("rel_tol", opts.rel_tol)]),
        result: to_value(&report)?,
    })
}

fn horizon(params: &Params) -> Result<Outcome> {
    let d = params.dimension(None)?;
    let f = nonlinearity(params, Some(d))?;
    let l1 = params
        .f64_opt("u0_l1")?
        .ok_or_else(|| Error::config("u0_l1", "required"))?;
    let a = params.f64_or("A", 2.0)?;
    params.finish()?;
    if l1 < 0.0 {
        return Err(Error::config("u0_l1", "must be non-negative"));
    }
    let report = find_existence_horizon(&f, l1, d, a)?;
    let recheck = horizon_integral(&f, l1, d, a, report.horizon)?;
    let holds = recheck <= report.bound;
    Ok(Outcome {
        status: if holds { "decided" } else { "failed" },
        exit_code: if holds { EXIT_OK } else { EXIT_ERROR },
        constants: with_tolerances(base_constants(kernel_for(d)?), &[("bisection_rel", 1e-13)]),
        result: json!({ "f": f, "report": report, "recheck_integral": recheck, "recheck_holds": holds }),
    })
}

#[derive(Debug, Serialize)]
struct TrendRow {
    n: usize,
    cells: usize,
    initial_l1: f64,
    peak_l1: f64,
    final_time: f64,
    blowup: Option<crate::solver::NumericBlowup>,
    predicted: Vec<f64>,
}

fn blowup_trend(params: &Params, csv: Option<&str>) -> Result<Outcome> {
    let d = params.dimension(Some(1))?;
    let f = nonlinearity(params, Some(d))?;
    let (lo, hi) = params.range_or("N", (3, 8))?;
    let q = params.f64_or("q", 1.0)?;
    let eps = params.positive("epsilon", 0.25)?;
    let radius = params.positive("radius", 1.0)?;
    let t = params.positive("T", 0.1)?;
    let opts = SimulateOptions {
        q,
        ..simulate_options(params)?
    };
    params.finish()?;

    let levels: Vec<usize> = (lo..=hi).collect();
    let rows = par::map(&levels, |&n| -> Result<TrendRow> {
        let (spec, u0) = build_t1_data(&f, d, q, n, eps, radius)?;
        let prop = build_propagator(u0.grid.clone())?;
        let traj = simulate_forward(&prop, &u0, &f, t, &opts)?;
        Ok(TrendRow {
            n,
            cells: u0.grid.len(),
            initial_l1: lq_norm(&u0, 1.0)?,
            peak_l1: traj.peak_l1(),
            final_time: traj.final_time(),
            blowup: traj.blowup,
            predicted: predicted_bounds(&spec)?.values(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let increasing = rows.windows(2).all(|w| w[1].peak_l1 > w[0].peak_l1);
    if let Some(path) = csv {
        let data: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r.n as f64, r.initial_l1, r.peak_l1, r.final_time])
            .collect();
        write_csv_rows(Path::new(path), &["N", "initial_l1", "peak_l1", "final_time"], &data)?;
    }
    Ok(Outcome {
        status: if increasing { "increasing" } else { "not_increasing" },
        exit_code: EXIT_OK,
        constants: with_tolerances(base_constants(kernel_for(d)?), &[("blowup_norm", opts.blowup_norm)]),
        result: json!({ "f": f, "q": q, "epsilon": eps, "T": t, "rows": rows, "strictly_increasing": increasing }),
    })
}

fn equivalence_suite(params: &Params) -> Result<Outcome> {
    let seed = params.u64_or("seed", 7)?;
    let count = params.usize_or("count", 20)?;
    params.finish()?;
    let report = random_equivalence_suite(seed, count, Mode::Parallel)?;
    let agree = report.all_decided_agree();
    Ok(Outcome {
        status: if agree { "agree" } else { "disagree" },
        exit_code: if agree { EXIT_OK } else { EXIT_ERROR },
        constants: base_constants(Vec::new()),
        result: to_value(&report)?,
    })
}
