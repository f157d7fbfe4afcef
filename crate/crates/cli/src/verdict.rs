//! Pass/fail judgements assembled from diagnostics rows.

use hyperwave_core::diagnostics::{
    check_theorem_decay, decay_fit, inequality_monitors, spread, summarize_monitors,
};
use hyperwave_core::evolve::mms::{observed_orders, MmsLevel};
use hyperwave_core::evolve::{RunOutput, Termination};
use hyperwave_core::vfcalc::IdentityReport;
use hyperwave_core::{DiagnosticsRow, Preset, RunConfig};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Verdict {
    pub checks: Vec<Check>,
    /// Values reported without a threshold.
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn render(&self, title: &str) -> String {
        let mut out = format!("{title}: {}\n", if self.pass() { "PASS" } else { "FAIL" });
        for c in &self.checks {
            out.push_str(&format!(
                "  [{}] {}: {}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        if !self.notes.is_empty() {
            out.push_str("notes:\n");
            for n in &self.notes {
                out.push_str(&format!("  {n}\n"));
            }
        }
        out
    }
}

fn window(rows: &[DiagnosticsRow], start: f64) -> Vec<&DiagnosticsRow> {
    rows.iter().filter(|r| r.s >= start).collect()
}

fn column(rows: &[&DiagnosticsRow], f: impl Fn(&DiagnosticsRow) -> f64) -> Vec<f64> {
    rows.iter().map(|r| f(r)).collect()
}

/// Every checked energy inequality holds within `slack` at every slice.
pub fn monitor_checks(rows: &[DiagnosticsRow], slack: f64) -> Vec<Check> {
    let recs = inequality_monitors(rows);
    summarize_monitors(&recs, slack)
        .into_iter()
        .map(|(name, worst, ok)| {
            Check::new(
                format!("monitor {name}"),
                ok,
                format!("worst lhs/rhs {worst:.5} (allowed {:.2})", 1.0 + slack),
            )
        })
        .collect()
}

/// Empirical constants reported alongside the monitors.
pub fn monitor_notes(rows: &[DiagnosticsRow]) -> Vec<String> {
    let mut notes = Vec::new();
    let worst = |f: fn(&DiagnosticsRow) -> f64| rows.iter().map(f).fold(0.0f64, f64::max);
    notes.push(format!(
        "weighted L2 growth constants (lhs/rhs, max over s): w {:.4}, W1 {:.4}, W2 {:.4}",
        worst(|r| r.weighted_l2_growth_w),
        worst(|r| r.weighted_l2_growth_w1),
        worst(|r| r.weighted_l2_growth_w2)
    ));
    notes.push(format!(
        "scaling-field constant |(s/t)L0 w| / (|(s/t)w| + Econ^1/2): max {:.4}",
        worst(|r| r.scaling_ratio_w)
    ));
    notes.push(format!(
        "Sobolev ratios sup t|phi| / sum |L^J phi|: w {:.4}, v {:.4}",
        worst(|r| r.ks_w_ratio),
        worst(|r| r.ks_v_ratio)
    ));
    notes.push(format!(
        "largest Katayama residual on a slice {:.3e}, largest cone-relation excess {:.1e}",
        worst(|r| r.katayama),
        worst(|r| r.cone_excess)
    ));
    notes
}

/// Variation of the second-derivative constant over the window.
pub fn hessian_check(rows: &[DiagnosticsRow], start: f64, allowed: f64) -> Check {
    let w = window(rows, start);
    if w.is_empty() {
        return Check::new("second-derivative constant", false, "no slices in window");
    }
    let vals = column(&w, |r| r.hessian_w);
    let (mm, _) = spread(&vals);
    let max = vals.iter().fold(0.0f64, |a, b| a.max(*b));
    Check::new(
        "second-derivative constant",
        mm <= allowed,
        format!("max {max:.4}, max/min {mm:.3} (allowed {allowed})"),
    )
}

pub fn theorem_verdict(config: &RunConfig, out: &RunOutput) -> Verdict {
    let mut v = Verdict::default();
    let d = &config.diagnostics;
    v.push(completion_check(out));
    match check_theorem_decay(&out.rows, d) {
        Ok(t) => {
            for it in &t.items {
                let fit = it
                    .fit
                    .map(|f| format!(", fitted exponent {:+.4} ± {:.4}", f.exponent, f.std_error))
                    .unwrap_or_default();
                v.push(Check::new(
                    it.label.clone(),
                    it.pass,
                    format!(
                        "max/min {:.4} (allowed {}), last/first {:.4}{fit}",
                        it.max_over_min, it.threshold, it.last_over_first
                    ),
                ));
            }
        }
        Err(e) => v.push(Check::new("decay window", false, e.to_string())),
    }
    v.checks.extend(monitor_checks(&out.rows, d.monitor_slack));
    v.push(hessian_check(&out.rows, d.window_start, 10.0));
    v.notes.push(format!("Katayama residual at the last level {:.3e}", out.meta.katayama_final));
    v.notes.extend(monitor_notes(&out.rows));
    v
}

pub fn linear_verdict(config: &RunConfig, out: &RunOutput) -> Verdict {
    let mut v = Verdict::default();
    let d = &config.diagnostics;
    v.push(completion_check(out));
    let w = window(&out.rows, d.window_start);
    if w.len() < 2 {
        v.push(Check::new("window", false, format!("{} slices with s >= {}", w.len(), d.window_start)));
        return v;
    }
    let (mm, _) = spread(&column(&w, |r| r.energy_w));
    v.push(Check::new("E(s, w) conserved", mm <= 1.01, format!("max/min {mm:.6} (allowed 1.01)")));
    let (mm, _) = spread(&column(&w, |r| r.energy1_v));
    v.push(Check::new("E1(s, v) conserved", mm <= 1.01, format!("max/min {mm:.6} (allowed 1.01)")));
    let series: Vec<(f64, f64)> = w.iter().map(|r| (r.s, r.v_sup_t)).collect();
    match decay_fit(&series, (d.window_start, f64::INFINITY)) {
        Ok(f) => v.push(Check::new(
            "sup t|v| exponent",
            f.exponent.abs() <= 0.15,
            format!("{:+.4} ± {:.4} over s in [{}, {}] (allowed ±0.15)", f.exponent, f.std_error, f.s_lo, f.s_hi),
        )),
        Err(e) => v.push(Check::new("sup t|v| exponent", false, e.to_string())),
    }
    v.checks.extend(monitor_checks(&out.rows, d.monitor_slack));
    v.push(hessian_check(&out.rows, d.window_start, 2.0));
    v.notes.extend(monitor_notes(&out.rows));
    v
}

/// Growth of `sup s|∂w|` over the window, or blow-up.
pub fn contrast_verdict(config: &RunConfig, out: &RunOutput) -> Verdict {
    let mut v = Verdict::default();
    let w = window(&out.rows, config.diagnostics.window_start);
    let growth = contrast_growth(&out.rows, config.diagnostics.window_start);
    let detail = match &out.meta.termination {
        Termination::Blowup { t, location, field } => format!(
            "blow-up in {field} at t = {t:.4}, x = ({:.3}, {:.3}); growth before it {growth:.3}x over {} slices",
            location[0],
            location[1],
            w.len()
        ),
        Termination::Completed => format!("no blow-up; growth {growth:.3}x over {} slices", w.len()),
    };
    v.push(Check::new(
        "sup s|dw| grows >= 10x or blows up",
        out.blew_up() || growth >= 10.0,
        detail,
    ));
    v
}

/// `max / first` of `sup s|∂w|` over slices with `s ≥ start`.
pub fn contrast_growth(rows: &[DiagnosticsRow], start: f64) -> f64 {
    let w = window(rows, start);
    let Some(first) = w.first() else {
        return 0.0;
    };
    let max = w.iter().fold(0.0f64, |m, r| m.max(r.w_sup_s_dphi));
    if first.w_sup_s_dphi > 0.0 {
        max / first.w_sup_s_dphi
    } else {
        0.0
    }
}

fn completion_check(out: &RunOutput) -> Check {
    match &out.meta.termination {
        Termination::Completed if out.meta.partial_slices.is_empty() => {
            Check::new("run completed", true, format!("{} slices", out.rows.len()))
        }
        Termination::Completed => Check::new(
            "run completed",
            false,
            format!("partial slices {:?}", out.meta.partial_slices),
        ),
        Termination::Blowup { t, field, .. } => {
            Check::new("run completed", false, format!("blow-up in {field} at t = {t:.4}"))
        }
    }
}

pub fn evolution_verdict(config: &RunConfig, out: &RunOutput) -> Verdict {
    match config.preset {
        Preset::Linear | Preset::LinearQuick => linear_verdict(config, out),
        Preset::ContrastBlowup => contrast_verdict(config, out),
        _ => theorem_verdict(config, out),
    }
}

pub fn identity_verdict(r: &IdentityReport) -> Verdict {
    let mut v = Verdict::default();
    for c in &r.checks {
        v.push(Check::new(
            c.name.clone(),
            c.residual <= r.tolerance,
            format!("residual {:.3e} (allowed {:.0e})", c.residual, r.tolerance),
        ));
    }
    v.notes.push(format!("{} events, degree-{} polynomial fields", r.points, r.degree));
    v
}

pub fn mms_verdict(levels: &[MmsLevel], min_order: f64) -> Verdict {
    let mut v = Verdict::default();
    let orders = observed_orders(levels);
    for (k, l) in levels.iter().enumerate() {
        v.notes.push(format!("h = {}, dt = {:.5}, steps {}, max error {:.4e}", l.h, l.dt, l.steps, l.error));
        if k > 0 {
            let o = orders[k - 1];
            v.push(Check::new(
                format!("order h = {} -> {}", levels[k - 1].h, l.h),
                o >= min_order,
                format!("{o:.3} (required {min_order})"),
            ));
        }
    }
    if levels.len() < 2 {
        v.push(Check::new("order", false, "need at least two levels"));
    }
    v
}
