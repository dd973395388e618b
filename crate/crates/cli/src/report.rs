//! Printed tables (4 decimals) and JSON documents (10 significant digits).

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use pulse_core::experiments::{format_value, ExperimentReport};
use pulse_core::{
    estimate, pulse_estimate, test_statistic, DesignView, EstimatorSpec, LambdaStar, PulseConfig, PulseMessage,
    TestConfig, TestResult, WeakInstrumentReport,
};
use serde_json::{json, Value};

pub struct Row {
    pub label: String,
    pub alpha: DVector<f64>,
    pub kappa: Option<f64>,
    /// `Some(inf)` when the penalty is unbounded.
    pub lambda: Option<f64>,
    pub test: Option<TestResult>,
    pub message: PulseMessage,
    pub fallback: Option<EstimatorSpec>,
    pub warnings: Vec<String>,
}

impl Row {
    pub fn standard(view: &DesignView, spec: &EstimatorSpec, test: &TestConfig) -> pulse_core::Result<Row> {
        let est = estimate(view, spec)?;
        Ok(Row {
            label: spec.to_string(),
            test: test_statistic(view, &est.alpha, test).ok(),
            alpha: est.alpha,
            kappa: est.kappa_used,
            lambda: est.lambda_used,
            message: PulseMessage::None,
            fallback: None,
            warnings: est.diagnostics.warnings,
        })
    }

    pub fn pulse(view: &DesignView, cfg: &PulseConfig) -> pulse_core::Result<Row> {
        let fit = pulse_estimate(view, cfg)?;
        Ok(Row {
            label: "pulse".into(),
            alpha: fit.alpha,
            kappa: fit.kappa_star,
            lambda: Some(match fit.lambda_star {
                LambdaStar::Finite(l) => l,
                LambdaStar::Infinite => f64::INFINITY,
            }),
            test: Some(fit.test_at_solution),
            message: fit.message,
            fallback: fit.fallback_used,
            warnings: Vec::new(),
        })
    }
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => "inf".into(),
        Some(x) => format!("{x:.4}"),
        None => "-".into(),
    }
}

/// Rounded to ten significant digits; non-finite values become null.
pub fn sig10(v: f64) -> Value {
    if !v.is_finite() {
        return Value::Null;
    }
    format_value(v).parse::<f64>().map(Value::from).unwrap_or(Value::Null)
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}");
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
    };
    line(header, &mut out);
    for r in rows {
        line(r, &mut out);
    }
    out
}

fn weak_line(weak: &WeakInstrumentReport) -> String {
    format!(
        "instrument strength: min eigenvalue of G_n {:.4} ({} the rule of thumb of 10)\n",
        weak.min_eigenvalue,
        if weak.passes_rule_of_thumb { "above" } else { "below" }
    )
}

pub fn estimate_text(view: &DesignView, rows: &[Row], weak: Option<&WeakInstrumentReport>) -> String {
    let mut out = format!("n = {}, q = {}, {}\n\n", view.n(), view.q(), view.identification());
    let mut header: Vec<String> = ["estimator", "kappa", "lambda", "test", "threshold"].iter().map(|s| s.to_string()).collect();
    header.extend(view.regressor_names().iter().cloned());
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut c = vec![r.label.clone(), cell(r.kappa), cell(r.lambda)];
            c.push(cell(r.test.map(|t| t.statistic)));
            c.push(cell(r.test.map(|t| t.threshold)));
            c.extend(r.alpha.iter().map(|v| format!("{v:.4}")));
            c
        })
        .collect();
    out.push_str(&table(&header, &body));
    for r in rows {
        for w in &r.warnings {
            let _ = writeln!(out, "{}: {w}", r.label);
        }
        if let Some(text) = r.message.text() {
            out.push_str(text);
            out.push('\n');
        }
        if let Some(fb) = r.fallback {
            let _ = writeln!(out, "{}: reporting {fb} instead", r.label);
        }
    }
    if let Some(w) = weak {
        out.push_str(&weak_line(w));
    }
    out
}

pub fn estimate_json(data: &Path, preprocessing: &str, view: &DesignView, rows: &[Row], weak: Option<&WeakInstrumentReport>) -> Value {
    let names = view.regressor_names();
    let estimates: Vec<Value> = rows
        .iter()
        .map(|r| {
            let coef: serde_json::Map<String, Value> =
                names.iter().cloned().zip(r.alpha.iter().map(|v| sig10(*v))).collect();
            json!({
                "estimator": r.label,
                "coefficients": coef,
                "kappa": r.kappa.map(sig10),
                "lambda": r.lambda.map(|l| if l.is_infinite() { Value::from("inf") } else { sig10(l) }),
                "test": r.test.map(|t| json!({
                    "statistic": sig10(t.statistic),
                    "threshold": sig10(t.threshold),
                    "accepted": t.accepted,
                    "p_value_bound": sig10(t.p_value_bound),
                })),
                "message": r.message.text(),
                "fallback": r.fallback.map(|f| f.to_string()),
                "warnings": r.warnings,
            })
        })
        .collect();
    json!({
        "data": data.display().to_string(),
        "preprocessing": preprocessing,
        "n": view.n(),
        "q": view.q(),
        "identification": view.identification().to_string(),
        "regressors": names,
        "estimates": estimates,
        "instrument_strength": weak.map(|w| json!({
            "min_eigenvalue": sig10(w.min_eigenvalue),
            "passes_rule_of_thumb": w.passes_rule_of_thumb,
        })),
    })
}

pub fn diagnose_text(view: &DesignView, weak: &WeakInstrumentReport) -> String {
    let mut out = format!(
        "n = {}, p = {}, q = {}, {} (degree {})\n",
        view.n(),
        view.p(),
        view.q(),
        view.identification(),
        view.partition().degree(view.q())
    );
    let _ = writeln!(out, "rcond(Z'Z) = {:.4e}, rcond(A'A) = {:.4e}", view.rcond_ztz(), view.rcond_ata());
    out.push_str("G_n:\n");
    let g = &weak.g_matrix;
    let rows: Vec<Vec<String>> = (0..g.nrows()).map(|i| (0..g.ncols()).map(|j| format!("{:.4}", g[(i, j)])).collect()).collect();
    for r in rows {
        let _ = writeln!(out, "  {}", r.join("  "));
    }
    out.push_str(&weak_line(weak));
    out
}

/// Per-cell table for small designs; a one-line summary otherwise.
pub fn experiment_text(report: &ExperimentReport) -> String {
    if report.cells.len() > 40 {
        return format!("{} cells x {} repetitions\n", report.cells.len(), report.reps);
    }
    let mut header = vec!["cell".to_string()];
    header.extend(report.parameter_names.iter().cloned());
    header.extend(["estimator", "used", "mse_trace", "rmse", "bias_norm", "median_error"].iter().map(|s| s.to_string()));
    let mut body = Vec::new();
    for c in &report.cells {
        for p in &c.performance {
            let mut r = vec![c.cell.to_string()];
            r.extend(c.params.iter().map(|v| format_value(*v)));
            r.push(p.estimator.clone());
            r.push(p.reps_used.to_string());
            r.extend([p.mse_trace, p.rmse, p.bias_norm, p.median_error_norm].iter().map(|v| format!("{v:.4}")));
            body.push(r);
        }
    }
    let mut out = table(&header, &body);
    if let Some(rob) = &report.robustness {
        for (k, g) in &rob.population {
            let _ = writeln!(out, "population k-class {k}: {g:.4}");
        }
        if let (Some((lo, hi)), Some((rlo, rhi))) = (rob.superiority_interval, rob.superiority_interval_rounded) {
            let _ = writeln!(out, "superiority interval [{lo:.4}, {hi:.4}], reported [{rlo:.2}, {rhi:.2}]");
        }
    }
    out
}
