//! CSV and JSON emission. CSV floats carry 6 significant digits; the JSON
//! companions keep full precision. Column meanings are listed in
//! `docs/csv_schema.md`.

use crate::evaluation::EvaluationReport;
use crate::trainer::CurvePoint;
use crate::variance::VarianceReport;

/// `%g`-style formatting with 6 significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding can carry into the next decade
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    let exp = if rounded.abs() >= 10f64.powi(exp + 1) {
        exp + 1
    } else {
        exp
    };
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{rounded:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

pub const CURVE_HEADER: &str = "iteration,batch_regret,grad_norm,wall_ms";

pub fn learning_curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.iteration,
            sig6(p.batch_regret),
            sig6(p.grad_norm),
            sig6(p.wall_ms)
        ));
    }
    out
}

pub const REPORT_HEADER: &str = "policy,mean_regret,std_error,instances";

pub fn report_csv(reports: &[EvaluationReport]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.policy,
            sig6(r.mean_regret),
            sig6(r.std_error),
            r.instances
        ));
    }
    out
}

pub fn report_json(reports: &[EvaluationReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

pub const PULLS_HEADER: &str = "arm_rank,mean_pulls";

pub fn pulls_csv(histogram: &[f64]) -> String {
    let mut out = format!("{PULLS_HEADER}\n");
    for (rank, p) in histogram.iter().enumerate() {
        out.push_str(&format!("{},{}\n", rank + 1, sig6(*p)));
    }
    out
}

pub const VARIANCE_HEADER: &str = "kind,metric,baseline,lower_metric,value,ci_low,ci_high,samples";

/// Trace rows (`kind = trace`) followed by gap rows (`kind = gap`).
pub fn variance_csv(report: &VarianceReport) -> String {
    let mut out = format!("{VARIANCE_HEADER}\n");
    for r in &report.traces {
        out.push_str(&format!(
            "trace,{},{},,{},{},{},{}\n",
            r.metric,
            r.baseline,
            sig6(r.trace),
            sig6(r.ci_low),
            sig6(r.ci_high),
            report.samples
        ));
    }
    for g in &report.gaps {
        out.push_str(&format!(
            "gap,{},{},{},{},{},{},{}\n",
            g.higher,
            g.baseline,
            g.lower,
            sig6(g.gap),
            sig6(g.ci_low),
            sig6(g.ci_high),
            report.samples
        ));
    }
    out
}
