//! Machine-readable record of a study run.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    /// Stages that finished, in execution order.
    pub completed: Vec<String>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub equilibria: Option<Vec<EquilibriumSummary>>,
    pub continuation: Option<ContinuationSummary>,
    pub spectrum: Option<Vec<FrameSummary>>,
    pub critical_delays: Option<AnalyticSummary>,
    pub hopf: Option<Vec<HopfSummary>>,
    pub psol: Option<PsolSummary>,
    pub doubling: Option<DoublingSummary>,
    pub simulations: Option<Vec<SimulationSummary>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub x: Vec<f64>,
    pub nunst: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSummary {
    pub parameter: String,
    pub points: usize,
    pub first: f64,
    pub last: f64,
    pub stop: Option<String>,
    /// Parameter intervals of unstable-count changes by two.
    pub switches: Vec<[f64; 2]>,
    /// Parameter intervals of changes by one.
    pub anomalies: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub tau: f64,
    pub roots: usize,
    pub nunst: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSummary {
    pub a: [f64; 4],
    pub alpha: f64,
    pub beta: f64,
    pub vertex: [f64; 2],
    pub stable_at_zero_delay: bool,
    pub absolutely_stable: bool,
    pub u_minus: Option<f64>,
    pub u_plus: Option<f64>,
    pub omega_minus: Option<f64>,
    pub omega_plus: Option<f64>,
    pub sign_minus: Option<i32>,
    pub sign_plus: Option<i32>,
    pub tau_minus: Vec<f64>,
    pub tau_plus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfSummary {
    pub parameter: f64,
    pub omega: f64,
    pub period: f64,
    pub x: Vec<f64>,
    /// Distance to the nearest analytic critical delay, when available.
    pub analytic_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsolSummary {
    pub hopf_index: usize,
    pub points: usize,
    pub initial_period: f64,
    pub first: f64,
    pub last: f64,
    pub stop: Option<String>,
    pub max_trivial_error: f64,
    pub nunst: Vec<usize>,
    /// Interval where a period doubling was detected.
    pub doubling_bracket: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingPoint {
    pub parameter: f64,
    pub multiplier: f64,
    pub period: f64,
    pub bracket: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingSummary {
    /// First entry on the base branch, second (if found) on the doubled one.
    pub points: Vec<DoublingPoint>,
    pub doubled_branch_points: usize,
    pub doubled_first: f64,
    pub doubled_last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub tau: f64,
    pub dt: f64,
    pub multiplicity: usize,
    pub period: Option<f64>,
    pub levels: Vec<f64>,
}
