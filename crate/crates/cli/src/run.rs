//! Dispatch of a validated scenario to the library.

use std::time::Instant;

use serde_json::{Map, Value};

use secscat::commutation::{
    deviation_axiom_residuals, intertwining_residual, scattering_commutation_residuals, Residual,
};
use secscat::evolution::{dyson_sum, propagate};
use secscat::operator::{operator_norm, unitary_defect, ComplexMatrix};
use secscat::regularization::{
    assemble_v, divergence_witness, regularized_propagator, regularized_unitarity_defect,
    secondary_operator_with, LadderOptions, PerturbationFamily, DEFAULT_LADDER_CAP,
    DEFAULT_LADDER_START,
};
use secscat::uv::uv_secondary;

use crate::config::{Kind, ScenarioConfig};
use crate::report::{Cell, Outcome, RunReport, Table, Toolkit};
use crate::scenario::{build_commute, build_family, build_uv, default_commute, uv_grid, validate};
use crate::CliError;

fn matrix_rows(table: &mut Table, label: &str, m: &ComplexMatrix) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            table.push(vec![label.into(), i.into(), j.into(), z.re.into(), z.im.into()]);
        }
    }
}

fn matrix_table() -> Table {
    Table::new(&["operator", "row", "col", "re", "im"])
}

fn family(cfg: &ScenarioConfig) -> Result<PerturbationFamily, CliError> {
    let f = cfg.family.as_ref().ok_or_else(|| {
        CliError::Validation(vec![crate::config::Finding::new("family", "missing")])
    })?;
    build_family(f).map_err(CliError::Validation)
}

fn interval(cfg: &ScenarioConfig) -> (f64, f64) {
    let iv = cfg.interval.expect("validated");
    (iv.tau, iv.t)
}

fn run_propagate(cfg: &ScenarioConfig, tol: f64) -> Result<Outcome, CliError> {
    let f = family(cfg)?;
    let (tau, t) = interval(cfg);
    let s = propagate(&assemble_v(&f), tau, t, cfg.epsilon, tol)?;
    let r = regularized_propagator(&f, tau, t, cfg.epsilon, tol)?;
    let mut table = matrix_table();
    matrix_rows(&mut table, "S", s.value.matrix());
    matrix_rows(&mut table, "S_R", r.value.matrix());
    let mut out = Outcome::new(table);
    out.certify("steps_used", s.steps_used);
    out.certify("error_estimate", s.error_estimate);
    out.certify("unitarity_defect", s.unitarity_defect);
    out.certify("regularized_unitarity_defect", regularized_unitarity_defect(&r));
    out.certify("regularized_discrepancy", r.discrepancy);
    Ok(out)
}

fn run_dyson(cfg: &ScenarioConfig, tol: f64) -> Result<Outcome, CliError> {
    let f = family(cfg)?;
    let (tau, t) = interval(cfg);
    let v = assemble_v(&f);
    let d = dyson_sum(&v, tau, t, cfg.epsilon, cfg.order)?;
    let s = propagate(&v, tau, t, cfg.epsilon, tol)?;
    let mut table = matrix_table();
    matrix_rows(&mut table, "dyson", &d.value);
    matrix_rows(&mut table, "propagate", s.value.matrix());
    let mut out = Outcome::new(table);
    out.certify("order", cfg.order);
    out.certify("remainder_bound", d.remainder_bound);
    out.certify("radius_estimate", d.expansion.radius_estimate);
    out.certify("sup_norm", d.expansion.sup_norm);
    out.certify("quadrature_error", d.expansion.quadrature_error);
    out.certify("sided_discrepancy", d.expansion.sided_discrepancy);
    out.certify("propagate_error_estimate", s.error_estimate);
    for (p, term) in d.expansion.terms.iter().enumerate() {
        out.curves.point("term_norm", p as f64, operator_norm(term));
    }
    Ok(out)
}

fn run_secondary(cfg: &ScenarioConfig, tol: f64) -> Result<Outcome, CliError> {
    let f = family(cfg)?;
    let opts = cfg
        .ladder
        .map(|l| LadderOptions { start: l.start, cap: l.cap })
        .unwrap_or(LadderOptions { start: DEFAULT_LADDER_START, cap: DEFAULT_LADDER_CAP });
    let s = secondary_operator_with(&f, cfg.epsilon, tol, opts)?;
    let mut table = matrix_table();
    matrix_rows(&mut table, "S_R", s.value.matrix());
    let mut out = Outcome::new(table);
    out.certify("truncation", s.truncation);
    out.certify("tail_bound", s.tail_bound);
    out.certify("deviation_mode", s.deviation_mode.as_str());
    out.certify("contraction_violations", s.contraction_violations());
    out.certify("unitarity_defect", unitary_defect(s.value.matrix()));
    for rung in &s.ladder {
        out.curves.point("step_difference", rung.truncation, rung.step_difference);
        out.curves.point("tail_bound", rung.truncation, rung.tail_bound);
        out.curves.point("discrepancy", rung.truncation, rung.discrepancy);
    }
    Ok(out)
}

fn run_witness(cfg: &ScenarioConfig, tol: f64) -> Result<Outcome, CliError> {
    let f = family(cfg)?;
    let truncations = cfg
        .truncations
        .clone()
        .unwrap_or_else(|| (1..=12).map(|k| (1u64 << k) as f64).collect());
    let rows = divergence_witness(&f, cfg.epsilon, &truncations, tol)?;
    let mut table = Table::new(&["truncation", "unregularized", "regularized", "tail_bound"]);
    let mut curves = Table::curves();
    for r in &rows {
        table.push(vec![r.truncation.into(), r.unregularized.into(), r.regularized.into(), r.tail_bound.into()]);
        curves.point("unregularized", r.truncation, r.unregularized);
        curves.point("regularized", r.truncation, r.regularized);
    }
    let mut out = Outcome::new(table);
    out.curves = curves;
    if let Some(last) = rows.last() {
        out.certify("final_regularized_difference", last.regularized);
        out.certify("final_tail_bound", last.tail_bound);
    }
    Ok(out)
}

fn run_uv(cfg: &ScenarioConfig, tol: f64) -> Result<Outcome, CliError> {
    let uv = cfg.uv.clone().unwrap_or_default();
    let sc = build_uv(&uv, cfg.epsilon).map_err(CliError::Validation)?;
    let grid = uv_grid(&uv, cfg.seed);
    let res = uv_secondary(&grid, &sc, tol)?;
    let mut table = Table::new(&[
        "q1", "q2", "q3", "q4", "c_plus", "b_plus", "decay_slope", "cutoff", "re", "im", "tail_bound",
    ]);
    let mut out_curves = Table::curves();
    for (k, row) in res.rows.iter().enumerate() {
        let mut cells: Vec<Cell> = row.q.0.iter().map(|&x| x.into()).collect();
        cells.extend([
            row.c_plus.into(),
            row.b_plus.into(),
            row.decay_slope.map_or(Cell::Text("none".into()), Cell::Num),
            row.cutoff.into(),
            row.value.re.into(),
            row.value.im.into(),
            row.tail_bound.into(),
        ]);
        table.push(cells);
        let series = format!("q{k}");
        for rung in &row.ladder {
            out_curves.point(&series, rung.cutoff, rung.step_difference);
        }
    }
    let mut out = Outcome::new(table);
    out.curves = out_curves;
    out.certify("grid_points", res.rows.len());
    out.certify("sup_tail_bound", res.sup_tail_bound);
    Ok(out)
}

fn residual_cell(r: Residual) -> Cell {
    match r {
        Residual::Value(v) => Cell::Num(v),
        Residual::Inapplicable => Cell::Text("inapplicable".into()),
    }
}

fn run_commute(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let c = cfg.commute.clone().unwrap_or_else(default_commute);
    let sc = build_commute(&c, cfg.seed).map_err(CliError::Validation)?;
    let report = deviation_axiom_residuals(&sc, &c.t_grid, &c.tau_grid)?;
    let mut table = Table::new(&["residual", "value"]);
    table.push(vec!["deviation_limit".into(), report.limit_max.into()]);
    table.push(vec!["a0_commutation".into(), report.a0_commutation.into()]);
    table.push(vec!["self_commutation".into(), report.self_commutation.into()]);
    table.push(vec!["tail_commutation".into(), report.tail_commutation.into()]);
    let unavailable = || Cell::Text("unavailable".into());
    match intertwining_residual(&sc, c.tau) {
        Ok((plus, minus)) => {
            table.push(vec!["intertwining_plus".into(), plus.into()]);
            table.push(vec!["intertwining_minus".into(), minus.into()]);
        }
        Err(_) => {
            table.push(vec!["intertwining_plus".into(), unavailable()]);
            table.push(vec!["intertwining_minus".into(), unavailable()]);
        }
    }
    let names = ["conjugation", "exp_commutation", "generator_commutation", "shifted_generators"];
    match scattering_commutation_residuals(&sc, c.tau) {
        Ok(s) => {
            let cells = [
                Cell::Num(s.conjugation),
                residual_cell(s.exp_commutation),
                residual_cell(s.generator_commutation),
                Cell::Num(s.shifted_generators),
            ];
            for (name, cell) in names.into_iter().zip(cells) {
                table.push(vec![name.into(), cell]);
            }
        }
        Err(_) => {
            for name in names {
                table.push(vec![name.into(), unavailable()]);
            }
        }
    }
    let mut out = Outcome::new(table);
    out.certify("dim", sc.dim());
    out.certify("max_axiom_residual", report.max_residual());
    for &tau in &c.tau_grid {
        let series = format!("limit_tau_{tau:e}");
        for (t, r) in report.limit_curve(tau) {
            out.curves.point(&series, t, r);
        }
    }
    Ok(out)
}

/// Validates and runs `cfg`, returning the report and the plot data.
pub fn run(cfg: &ScenarioConfig) -> Result<(RunReport, Table), CliError> {
    let findings = validate(cfg);
    if !findings.is_empty() {
        return Err(CliError::Validation(findings));
    }
    let tol = cfg.tol_or_default();
    let start = Instant::now();
    let out = match cfg.kind {
        Kind::Propagate => run_propagate(cfg, tol)?,
        Kind::Dyson => run_dyson(cfg, tol)?,
        Kind::Secondary => run_secondary(cfg, tol)?,
        Kind::Witness => run_witness(cfg, tol)?,
        Kind::Uv => run_uv(cfg, tol)?,
        Kind::Commute => run_commute(cfg)?,
    };
    let mut timings = Map::new();
    timings.insert("total_seconds".into(), Value::from(start.elapsed().as_secs_f64()));
    let mut inputs = serde_json::to_value(cfg).map_err(|e| CliError::Io(e.to_string()))?;
    if let Value::Object(m) = &mut inputs {
        m.insert("tol".into(), Value::from(tol));
    }
    let report = RunReport {
        toolkit: Toolkit {
            name: "secscat",
            version: env!("CARGO_PKG_VERSION"),
        },
        kind: cfg.kind.as_str().to_string(),
        inputs,
        results: out.results,
        certificates: out.certificates,
        curves_rows: out.curves.rows.len(),
        timings,
    };
    Ok((report, out.curves))
}
