//! Comparison of a study summary against reference values of the
//! harvested predator-prey study.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::summary::Summary;
use crate::io::{fmt_num, Table};

pub const E1: [f64; 2] = [6.061458241811056, 3.254242134274988];
pub const E2: [f64; 2] = [87.432881, 0.002456];
pub const ALPHA: f64 = -2.031311;
pub const BETA: f64 = 0.972753;
pub const VERTEX: [f64; 2] = [1.015655, -0.058803];
pub const U: [f64; 2] = [0.773162, 1.258149];
pub const OMEGA: [f64; 2] = [0.879297, 1.121672];
pub const TAU_MINUS: [f64; 5] = [-1.752556, 5.393140, 12.538836, 19.684531, 26.830227];
pub const TAU_PLUS: [f64; 5] = [1.3794139, 6.9810371, 12.582660, 18.184284, 23.785907];
pub const HOPF: [f64; 5] = [
    1.379413927096384,
    5.393140023781609,
    6.981037144585396,
    12.538835708751554,
    12.582660362074412,
];
pub const INITIAL_PERIOD: f64 = 5.601625;
pub const PERIOD_DOUBLING: [f64; 2] = [8.464201107682122, 8.757752002502176];
/// Peak multiplicities of the attractor at the listed delays.
pub const MULTIPLICITY: [(f64, usize); 3] = [(7.10, 1), (8.60, 2), (8.78, 4)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub reference: f64,
    pub computed: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

impl ReportRow {
    pub fn difference(&self) -> Option<f64> {
        self.computed.map(|c| (c - self.reference).abs())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["quantity", "reference", "computed", "difference", "tolerance", "status"]);
        for r in &self.rows {
            t.push(vec![
                r.name.clone(),
                fmt_num(r.reference),
                r.computed.map_or("missing".into(), fmt_num),
                r.difference().map_or("missing".into(), fmt_num),
                fmt_num(r.tolerance),
                if r.pass { "PASS" } else { "FAIL" }.into(),
            ]);
        }
        t
    }

    /// Aligned pass/fail matrix.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(8).max(8);
        let mut s = format!(
            "{:<width$}  {:>22}  {:>22}  {:>10}  {:>8}  status\n",
            "quantity", "reference", "computed", "difference", "tol"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<width$}  {:>22}  {:>22}  {:>10}  {:>8.0e}  {}",
                r.name,
                format!("{}", r.reference),
                r.computed.map_or("missing".into(), |c| format!("{c}")),
                r.difference().map_or("-".into(), |d| format!("{d:.2e}")),
                r.tolerance,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        let failed = self.failures().count();
        let _ = writeln!(s, "{} of {} rows pass", self.rows.len() - failed, self.rows.len());
        s
    }
}

fn nearest(summary: &Summary, target: [f64; 2]) -> Option<Vec<f64>> {
    let eqs = summary.equilibria.as_ref()?;
    eqs.iter()
        .map(|e| &e.x)
        .min_by(|a, b| {
            let d = |x: &Vec<f64>| (x[0] - target[0]).hypot(x[1] - target[1]);
            d(a).total_cmp(&d(b))
        })
        .cloned()
}

/// Builds the pass/fail matrix. Quantities absent from the summary fail.
pub fn compare(summary: &Summary) -> Report {
    let mut rows = Vec::new();
    let mut add = |name: String, reference: f64, tolerance: f64, computed: Option<f64>| {
        let pass = computed.is_some_and(|c| (c - reference).abs() <= tolerance);
        rows.push(ReportRow {
            name,
            reference,
            computed,
            tolerance,
            pass,
        });
    };

    for (label, target, tol) in [("E1", E1, 1e-9), ("E2", E2, 1e-5)] {
        let x = nearest(summary, target);
        for (i, comp) in ["x", "y"].iter().enumerate() {
            add(format!("{label}.{comp}"), target[i], tol, x.as_ref().map(|x| x[i]));
        }
    }

    let a = summary.critical_delays.as_ref();
    add("alpha".into(), ALPHA, 1e-5, a.map(|a| a.alpha));
    add("beta".into(), BETA, 1e-5, a.map(|a| a.beta));
    add("vertex.u".into(), VERTEX[0], 1e-5, a.map(|a| a.vertex[0]));
    add("vertex.h".into(), VERTEX[1], 1e-5, a.map(|a| a.vertex[1]));
    add("u_minus".into(), U[0], 1e-5, a.and_then(|a| a.u_minus));
    add("u_plus".into(), U[1], 1e-5, a.and_then(|a| a.u_plus));
    add("omega_minus".into(), OMEGA[0], 1e-5, a.and_then(|a| a.omega_minus));
    add("omega_plus".into(), OMEGA[1], 1e-5, a.and_then(|a| a.omega_plus));
    add("sign_minus".into(), -1.0, 0.0, a.and_then(|a| a.sign_minus).map(f64::from));
    add("sign_plus".into(), 1.0, 0.0, a.and_then(|a| a.sign_plus).map(f64::from));
    for k in 0..5 {
        add(format!("tau_minus[{k}]"), TAU_MINUS[k], 1e-5, a.and_then(|a| a.tau_minus.get(k).copied()));
        add(format!("tau_plus[{k}]"), TAU_PLUS[k], 1e-5, a.and_then(|a| a.tau_plus.get(k).copied()));
    }

    let hopf = summary.hopf.as_ref();
    for (i, h) in HOPF.iter().enumerate() {
        add(format!("hopf[{}]", i + 1), *h, 1e-8, hopf.and_then(|v| v.get(i)).map(|h| h.parameter));
    }

    add(
        "psol.initial_period".into(),
        INITIAL_PERIOD,
        1e-3,
        summary.psol.as_ref().map(|p| p.initial_period),
    );
    let pd = |i: usize| summary.doubling.as_ref().and_then(|d| d.points.get(i)).map(|p| p.parameter);
    add("period_doubling[1]".into(), PERIOD_DOUBLING[0], 1e-3, pd(0));
    add("period_doubling[1].localized".into(), PERIOD_DOUBLING[0], 1e-6, pd(0));
    add("period_doubling[2]".into(), PERIOD_DOUBLING[1], 1e-3, pd(1));

    for (tau, m) in MULTIPLICITY {
        let computed = summary
            .simulations
            .as_ref()
            .and_then(|v| v.iter().find(|s| (s.tau - tau).abs() < 1e-9))
            .map(|s| s.multiplicity as f64);
        add(format!("multiplicity@{tau:.2}"), m as f64, 0.0, computed);
    }
    Report { rows }
}
