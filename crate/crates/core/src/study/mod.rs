//! Config-driven studies: runs the analysis stages in dependency order and
//! writes tables, intermediate state, a JSON summary and plot descriptions.
//!
//! Layout of the output directory:
//!
//! ```text
//! config.resolved.toml   the effective configuration
//! summary.json           results of every finished stage
//! *.csv, *.txt           tables and attractor summaries
//! state/*.json           stage results consumed by later stages
//! plots/*.json           figure descriptions
//! ```

pub mod config;
pub mod plots;
pub mod report;
pub mod summary;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use config::StudyConfig;
pub use report::{compare, Report};
pub use summary::Summary;

use crate::charpoly::{
    absolutely_stable, critical_delay_table, critical_delays, reduce, stable_at_zero_delay, transversality_sign,
    Crossing, QuarticReduction,
};
use crate::error::{Error, Result};
use crate::hopf::{hopf_agreement_report, refine_all, HopfPoint};
use crate::integrator::{attractor_summary, default_step, integrate};
use crate::io::{fmt_num, write_text, Table};
use crate::model::{lookup_model, steady_jacobians, DdeSystem, ParameterSet};
use crate::psol::{
    annotate_floquet, continue_psol, detect_period_doubling, double_psol, locate_period_doubling, orbit_at,
    setup_psol_branch, PeriodicOrbit,
};
use crate::spectrum::{detect_stability_switches, equilibrium_roots, spectrum_sweep};
use crate::steady::{annotate_stability, continue_equilibria, setup_equilibrium_branch, solve_equilibrium, Branch, EquilibriumPoint};
use plots::{stability_series, Figure, Panel, Series, Style};
use summary::*;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Equilibria,
    Continue,
    Spectrum,
    CriticalDelays,
    Hopf,
    Psol,
    Double,
    Simulate,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Equilibria,
        Stage::Continue,
        Stage::Spectrum,
        Stage::CriticalDelays,
        Stage::Hopf,
        Stage::Psol,
        Stage::Double,
        Stage::Simulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Equilibria => "equilibria",
            Stage::Continue => "continue",
            Stage::Spectrum => "spectrum",
            Stage::CriticalDelays => "critical-delays",
            Stage::Hopf => "hopf",
            Stage::Psol => "psol",
            Stage::Double => "double",
            Stage::Simulate => "simulate",
        }
    }

    fn enabled(self, c: &StudyConfig) -> bool {
        match self {
            Stage::Equilibria => c.equilibria.enabled,
            Stage::Continue => c.continuation.enabled,
            Stage::Spectrum => c.spectrum.enabled,
            Stage::CriticalDelays => c.critical_delays.enabled,
            Stage::Hopf => c.hopf.enabled,
            Stage::Psol => c.psol.enabled,
            Stage::Double => c.doubling.enabled,
            Stage::Simulate => c.simulate.enabled,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config {
                path: "stage".into(),
                message: format!("unknown stage `{s}`"),
            })
    }
}

/// A failed stage and its cause.
#[derive(Debug)]
pub struct StageFailure {
    pub stage: Stage,
    pub error: Error,
}

impl fmt::Display for StageFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageFailure {}

/// Process exit status for an error: 2 for invalid input, 3 for numerical failures.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config { .. }
        | Error::UnknownModel(_)
        | Error::UnknownParameter(_)
        | Error::InvalidParameters(_)
        | Error::MissingArtifact(_)
        | Error::DimensionMismatch { .. } => 2,
        _ => 3,
    }
}

fn tau_label(v: f64) -> String {
    format!("{v}")
}

/// A study bound to an output directory. Stage results are kept in memory and
/// mirrored to `state/` so that single stages can run in later invocations.
pub struct Study {
    config: StudyConfig,
    out: PathBuf,
    sys: Arc<dyn DdeSystem>,
    summary: Summary,
    branch: Option<Branch<EquilibriumPoint>>,
    switches: Option<Vec<usize>>,
    hopf: Option<Vec<HopfPoint>>,
    psol: Option<Branch<PeriodicOrbit>>,
}

impl Study {
    /// Validates the config, creates `out` and writes the resolved config.
    /// An existing summary in `out` is extended rather than replaced.
    pub fn open(config: StudyConfig, out: &Path) -> Result<Self> {
        config.validate()?;
        let sys = lookup_model(&config.model)?;
        std::fs::create_dir_all(out)?;
        write_text(&out.join("config.resolved.toml"), &config.to_toml())?;
        let summary = match std::fs::read_to_string(out.join("summary.json")) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
            Err(_) => Summary::default(),
        };
        Ok(Study {
            summary: Summary {
                model: config.model.clone(),
                ..summary
            },
            config,
            out: out.to_path_buf(),
            sys,
            branch: None,
            switches: None,
            hopf: None,
            psol: None,
        })
    }

    pub fn summary(&self) -> &Summary {
        &self.summary
    }

    pub fn config(&self) -> &StudyConfig {
        &self.config
    }

    /// Runs every enabled stage in order, stopping after `until` if given.
    /// The summary starts empty and is written after each stage.
    pub fn run_enabled(&mut self, until: Option<Stage>) -> std::result::Result<(), StageFailure> {
        self.summary = Summary {
            model: self.config.model.clone(),
            ..Summary::default()
        };
        for stage in Stage::ALL {
            if stage.enabled(&self.config) {
                self.run_stage(stage)?;
            }
            if until == Some(stage) {
                break;
            }
        }
        Ok(())
    }

    /// Runs one stage, loading prior results from `state/` when needed.
    pub fn run_stage(&mut self, stage: Stage) -> std::result::Result<(), StageFailure> {
        let result = match stage {
            Stage::Equilibria => self.equilibria(),
            Stage::Continue => self.continuation(),
            Stage::Spectrum => self.spectrum(),
            Stage::CriticalDelays => self.critical_delays(),
            Stage::Hopf => self.hopf(),
            Stage::Psol => self.psol(),
            Stage::Double => self.double(),
            Stage::Simulate => self.simulate(None),
        };
        self.finish(stage, result)
    }

    /// Runs the simulation stage at a single delay.
    pub fn simulate_at(&mut self, tau: f64) -> std::result::Result<(), StageFailure> {
        let result = self.simulate(Some(tau));
        self.finish(Stage::Simulate, result)
    }

    fn finish(&mut self, stage: Stage, result: Result<()>) -> std::result::Result<(), StageFailure> {
        match result {
            Ok(()) => {
                self.summary.completed.retain(|s| s != stage.name());
                self.summary.completed.push(stage.name().to_string());
                self.summary.failed_stage = None;
                self.summary.error = None;
                self.write_summary().map_err(|error| StageFailure { stage, error })
            }
            Err(error) => {
                self.summary.failed_stage = Some(stage.name().to_string());
                self.summary.error = Some(error.to_string());
                // the partial record matters more than a secondary write error
                let _ = self.write_summary();
                Err(StageFailure { stage, error })
            }
        }
    }

    fn write_summary(&self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        text.push('\n');
        write_text(&self.out.join("summary.json"), &text)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn save_state<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string(value).expect("state serializes");
        write_text(&self.path(&format!("state/{name}.json")), &text)
    }

    fn load_state<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        let path = self.path(&format!("state/{name}.json"));
        let text = std::fs::read_to_string(&path).map_err(|_| Error::MissingArtifact(path.display().to_string()))?;
        serde_json::from_str(&text).map_err(|e| Error::MissingArtifact(format!("{}: {e}", path.display())))
    }

    fn figure(&self, name: &str, figure: &Figure) -> Result<()> {
        write_text(&self.path(&format!("plots/{name}.json")), &figure.to_json())
    }

    fn params(&self) -> ParameterSet {
        self.config.parameters
    }

    fn parameter_name(&self) -> Result<&'static str> {
        Ok(ParameterSet::NAMES[self.config.parameter_index()?])
    }

    /// Steady state used by the spectrum and analytic stages.
    fn reference_equilibrium(&self) -> Result<EquilibriumPoint> {
        solve_equilibrium(
            self.sys.as_ref(),
            &self.params(),
            &self.config.continuation.initial_state,
            self.config.equilibria.tol,
        )
    }

    fn equilibria(&mut self) -> Result<()> {
        let sys = self.sys.as_ref();
        let p = self.params();
        let settings = self.config.spectrum_settings();
        let n = sys.dimension();
        let mut header = vec!["index".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.push("nunst".into());
        let mut table = Table::new(header);
        table.annotate(ParameterSet::NAMES[ParameterSet::TAU], p.tau);
        let mut found = Vec::new();
        for (i, guess) in self.config.equilibria.guesses.iter().enumerate() {
            let point = solve_equilibrium(sys, &p, guess, self.config.equilibria.tol)?;
            let roots = equilibrium_roots(sys, &point.x, &p, &settings)?;
            let mut row = vec![i.to_string()];
            row.extend(point.x.iter().map(|v| fmt_num(*v)));
            row.push(roots.nunst.to_string());
            table.push(row);
            found.push(EquilibriumSummary {
                x: point.x,
                nunst: roots.nunst,
            });
        }
        table.write(&self.path("equilibria.csv"))?;
        self.summary.equilibria = Some(found);
        Ok(())
    }

    fn continuation(&mut self) -> Result<()> {
        let sys = self.sys.as_ref();
        let c = &self.config.continuation;
        let settings = self.config.branch_settings()?;
        let seed = setup_equilibrium_branch(sys, &self.params(), &c.initial_state, settings)?;
        let mut branch = continue_equilibria(sys, seed, c.points)?;
        let name = self.parameter_name()?;
        let values = branch.parameter_values();
        let bracket = |i: usize| [values[i], values[i + 1]];
        let mut summary = ContinuationSummary {
            parameter: name.to_string(),
            points: branch.len(),
            first: values[0],
            last: *values.last().expect("seeded branch"),
            stop: branch.stop.map(|s| format!("{s:?}")),
            switches: Vec::new(),
            anomalies: Vec::new(),
        };
        if c.annotate {
            annotate_stability(sys, &mut branch, &self.config.spectrum_settings())?;
            let scan = detect_stability_switches(&branch.nunst().expect("annotated"));
            let nunst = branch.nunst().expect("annotated");
            let mut table = Table::new(["index", &format!("{name}_left"), &format!("{name}_right"), "nunst_left", "nunst_right"]);
            for &i in &scan.hopf_candidates {
                table.push(vec![
                    i.to_string(),
                    fmt_num(values[i]),
                    fmt_num(values[i + 1]),
                    nunst[i].to_string(),
                    nunst[i + 1].to_string(),
                ]);
            }
            table.write(&self.path("switches.csv"))?;
            summary.switches = scan.hopf_candidates.iter().map(|&i| bracket(i)).collect();
            summary.anomalies = scan.anomalies.iter().map(|&i| bracket(i)).collect();
            self.switches = Some(scan.hopf_candidates);
        }
        branch.to_table().write(&self.path("branch.csv"))?;
        self.save_state("branch", &branch)?;

        let plain = Panel::new(
            "equilibrium branch",
            name,
            "x1",
            vec![Series::new("branch", "branch.csv", name, "x1", Style::Line)],
        );
        self.figure("branch", &Figure::new("equilibrium branch", vec![plain]))?;
        if c.annotate {
            let series = stability_series("branch", "branch.csv", name, "x1");
            let panel = Panel::new("equilibrium branch with stability", name, "x1", series);
            self.figure("branch_stability", &Figure::new("equilibrium branch with stability", vec![panel]))?;
        }
        self.summary.continuation = Some(summary);
        self.branch = Some(branch);
        Ok(())
    }

    fn spectrum(&mut self) -> Result<()> {
        let eq = self.reference_equilibrium()?;
        let frames = spectrum_sweep(
            self.sys.as_ref(),
            &eq.x,
            &self.params(),
            &self.config.spectrum.frames,
            &self.config.spectrum_settings(),
        )?;
        let mut all = Table::new(["frame", "tau", "re", "im"]);
        let mut panels = Vec::new();
        let mut summary = Vec::new();
        for (i, (tau, set)) in frames.iter().enumerate() {
            let mut frame = Table::new(["re", "im"]);
            frame.annotate("tau", *tau);
            for z in &set.roots {
                frame.push(vec![fmt_num(z.re), fmt_num(z.im)]);
                all.push(vec![i.to_string(), fmt_num(*tau), fmt_num(z.re), fmt_num(z.im)]);
            }
            let file = format!("spectrum/frame_{i:03}.csv");
            frame.write(&self.path(&file))?;
            panels.push(Panel::new(
                &format!("tau = {}", tau_label(*tau)),
                "Re",
                "Im",
                vec![Series::new("roots", &file, "re", "im", Style::Points)],
            ));
            summary.push(FrameSummary {
                tau: *tau,
                roots: set.roots.len(),
                nunst: set.nunst,
            });
        }
        all.write(&self.path("spectrum.csv"))?;
        let mut figure = Figure::new("characteristic roots along the delay", panels);
        figure.animation = true;
        self.figure("spectrum", &figure)?;
        self.summary.spectrum = Some(summary);
        Ok(())
    }

    fn critical_delays(&mut self) -> Result<()> {
        let eq = self.reference_equilibrium()?;
        let red = reduce(&steady_jacobians(self.sys.as_ref(), &eq.x, &self.params())?)?;
        let k_max = self.config.critical_delays.k_max;
        let two_roots = red.positive_roots.len() == 2;
        let table = if two_roots {
            critical_delay_table(&red, k_max)?
        } else {
            Table::new(["k", "tau_minus", "tau_plus"])
        };
        table.write(&self.path("critical_delays.csv"))?;

        let opt = |which| red.u(which).ok();
        let seq = |which| critical_delays(&red, which, k_max).map(|c| c.all).unwrap_or_default();
        let summary = AnalyticSummary {
            a: [red.a1, red.a2, red.a3, red.a4],
            alpha: red.alpha,
            beta: red.beta,
            vertex: [red.vertex.0, red.vertex.1],
            stable_at_zero_delay: stable_at_zero_delay(&red),
            absolutely_stable: absolutely_stable(&red),
            u_minus: opt(Crossing::Minus),
            u_plus: opt(Crossing::Plus),
            omega_minus: red.omega(Crossing::Minus).ok(),
            omega_plus: red.omega(Crossing::Plus).ok(),
            sign_minus: transversality_sign(&red, Crossing::Minus).ok(),
            sign_plus: transversality_sign(&red, Crossing::Plus).ok(),
            tau_minus: seq(Crossing::Minus),
            tau_plus: seq(Crossing::Plus),
        };
        let mut quartic = Table::new(["quantity", "value"]);
        let mut put = |k: &str, v: Option<f64>| {
            if let Some(v) = v {
                quartic.push(vec![k.to_string(), fmt_num(v)]);
            }
        };
        for (k, v) in ["a1", "a2", "a3", "a4"].iter().zip(summary.a) {
            put(k, Some(v));
        }
        put("alpha", Some(summary.alpha));
        put("beta", Some(summary.beta));
        put("vertex_u", Some(summary.vertex[0]));
        put("vertex_h", Some(summary.vertex[1]));
        put("u_minus", summary.u_minus);
        put("u_plus", summary.u_plus);
        put("omega_minus", summary.omega_minus);
        put("omega_plus", summary.omega_plus);
        put("sign_minus", summary.sign_minus.map(f64::from));
        put("sign_plus", summary.sign_plus.map(f64::from));
        quartic.write(&self.path("quartic.csv"))?;
        self.summary.critical_delays = Some(summary);
        Ok(())
    }

    fn branch_state(&mut self) -> Result<Branch<EquilibriumPoint>> {
        match &self.branch {
            Some(b) => Ok(b.clone()),
            None => {
                let b: Branch<EquilibriumPoint> = self.load_state("branch")?;
                self.branch = Some(b.clone());
                Ok(b)
            }
        }
    }

    fn reduction_for(&self, branch: &Branch<EquilibriumPoint>) -> Option<QuarticReduction> {
        if branch.settings.parameter != ParameterSet::TAU {
            return None;
        }
        let pt = branch.points.first()?;
        reduce(&steady_jacobians(self.sys.as_ref(), &pt.x, &pt.params).ok()?).ok()
    }

    fn hopf(&mut self) -> Result<()> {
        let branch = self.branch_state()?;
        let switches = match &self.switches {
            Some(s) => s.clone(),
            None => {
                let nunst = branch
                    .nunst()
                    .ok_or_else(|| Error::MissingArtifact("stability annotation of the equilibrium branch".into()))?;
                detect_stability_switches(&nunst).hopf_candidates
            }
        };
        let hopf = refine_all(
            self.sys.as_ref(),
            &branch,
            &switches,
            &self.config.hopf_settings(),
            self.config.hopf.duplicate_tol,
        )?;
        let pairs: Vec<(f64, f64)> = hopf.iter().map(|h| (h.parameter_value(), h.omega)).collect();
        let agreement = self
            .reduction_for(&branch)
            .map(|red| hopf_agreement_report(&pairs, &red, self.config.hopf.agreement_tol));
        let name = ParameterSet::NAMES[branch.settings.parameter];
        let n = self.sys.dimension();
        let mut header = vec!["index".to_string(), name.to_string(), "omega".into(), "period".into()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend(["analytic_tau".to_string(), "error".to_string()]);
        let mut table = Table::new(header);
        let mut summary = Vec::new();
        for (i, h) in hopf.iter().enumerate() {
            let row_agreement = agreement.as_ref().and_then(|a| a.rows.get(i));
            let mut row = vec![(i + 1).to_string(), fmt_num(h.parameter_value()), fmt_num(h.omega), fmt_num(h.period())];
            row.extend(h.x.iter().map(|v| fmt_num(*v)));
            row.push(row_agreement.map_or("nan".into(), |r| fmt_num(r.nearest)));
            row.push(row_agreement.map_or("nan".into(), |r| fmt_num(r.difference)));
            table.push(row);
            summary.push(HopfSummary {
                parameter: h.parameter_value(),
                omega: h.omega,
                period: h.period(),
                x: h.x.clone(),
                analytic_error: row_agreement.map(|r| r.difference),
            });
        }
        table.write(&self.path("hopf.csv"))?;
        self.save_state("hopf", &hopf)?;
        self.summary.hopf = Some(summary);
        self.hopf = Some(hopf);
        Ok(())
    }

    fn write_orbits(&self, branch: &Branch<PeriodicOrbit>, values: &[f64], prefix: &str) -> Result<Vec<String>> {
        let settings = self.config.psol_settings();
        let mut files = Vec::new();
        for &v in values {
            let orbit = orbit_at(self.sys.as_ref(), branch, v, &settings)?;
            let file = format!("{prefix}_{}.csv", tau_label(v));
            orbit.to_table().write(&self.path(&file))?;
            files.push(file);
        }
        Ok(files)
    }

    fn psol(&mut self) -> Result<()> {
        let hopf = match &self.hopf {
            Some(h) => h.clone(),
            None => self.load_state::<Vec<HopfPoint>>("hopf")?,
        };
        let index = self.config.psol.hopf_index;
        let start = hopf.get(index - 1).ok_or_else(|| Error::Config {
            path: "psol.hopf_index".into(),
            message: format!("only {} Hopf points are available", hopf.len()),
        })?;
        let sys = self.sys.as_ref();
        let settings = self.config.psol_settings();
        let seed = setup_psol_branch(sys, start, &settings, self.config.psol_branch_settings()?)?;
        let mut branch = continue_psol(sys, seed, self.config.psol.points, &settings)?;
        annotate_floquet(sys, &mut branch, &settings)?;
        branch.to_table().write(&self.path("psol_branch.csv"))?;
        self.write_orbits(&branch, &self.config.psol.orbits, "psol_orbit")?;
        self.save_state("psol", &branch)?;

        let name = ParameterSet::NAMES[branch.settings.parameter];
        let values = branch.parameter_values();
        let doubling = detect_period_doubling(&branch);
        let mut series = Vec::new();
        if self.path("branch.csv").exists() {
            series.extend(stability_series("equilibria", "branch.csv", name, "x1"));
        }
        series.extend(stability_series("periodic orbits", "psol_branch.csv", name, "max_x1"));
        let panel = Panel::new("periodic orbits from a Hopf point", name, "max x1", series);
        self.figure("psol_branch", &Figure::new("periodic-orbit branch", vec![panel]))?;

        self.summary.psol = Some(PsolSummary {
            hopf_index: index,
            points: branch.len(),
            initial_period: branch.points[0].period,
            first: values[0],
            last: *values.last().expect("seeded branch"),
            stop: branch.stop.map(|s| format!("{s:?}")),
            max_trivial_error: branch
                .points
                .iter()
                .filter_map(|o| o.stability.as_ref())
                .map(|f| f.trivial_error())
                .fold(0.0, f64::max),
            nunst: branch.nunst().unwrap_or_default(),
            doubling_bracket: doubling.map(|i| [values[i], values[i + 1]]),
        });
        self.psol = Some(branch);
        Ok(())
    }

    fn double(&mut self) -> Result<()> {
        let base = match &self.psol {
            Some(b) => b.clone(),
            None => self.load_state::<Branch<PeriodicOrbit>>("psol")?,
        };
        let sys = self.sys.as_ref();
        let settings = self.config.psol_settings();
        let index = detect_period_doubling(&base)
            .ok_or_else(|| Error::NoCandidate("no period doubling on the orbit branch".into()))?;
        let values = base.parameter_values();
        let (first, seed) = double_psol(sys, &base, index, self.config.doubling.amplitude, &settings)?;
        let mut doubled = continue_psol(sys, seed, self.config.doubling.points, &settings)?;
        annotate_floquet(sys, &mut doubled, &settings)?;
        let idx = base.settings.parameter;
        let mut points = vec![DoublingPoint {
            parameter: first.parameter_value(idx),
            multiplier: first.multiplier,
            period: first.orbit.period,
            bracket: [values[index], values[index + 1]],
        }];
        let mut located = vec![first];
        if let Some(j) = detect_period_doubling(&doubled) {
            let second = locate_period_doubling(sys, &doubled, j, &settings)?;
            let dv = doubled.parameter_values();
            points.push(DoublingPoint {
                parameter: second.parameter_value(idx),
                multiplier: second.multiplier,
                period: second.orbit.period,
                bracket: [dv[j], dv[j + 1]],
            });
            located.push(second);
        }
        let name = ParameterSet::NAMES[idx];
        let mut table = Table::new(["index", name, "multiplier", "period", "max_x1"]);
        for (i, (p, pd)) in points.iter().zip(&located).enumerate() {
            table.push(vec![
                (i + 1).to_string(),
                fmt_num(p.parameter),
                fmt_num(p.multiplier),
                fmt_num(p.period),
                fmt_num(pd.orbit.max_component(0)),
            ]);
            pd.orbit.to_table().write(&self.path(&format!("doubling_orbit_{}.csv", i + 1)))?;
        }
        table.write(&self.path("period_doubling.csv"))?;
        doubled.to_table().write(&self.path("psol2_branch.csv"))?;
        self.write_orbits(&doubled, &self.config.doubling.orbits, "psol2_orbit")?;
        self.save_state("psol2", &doubled)?;

        let mut series = stability_series("period 1", "psol_branch.csv", name, "max_x1");
        series.extend(stability_series("period 2", "psol2_branch.csv", name, "max_x1"));
        series.push(Series::new("period doubling", "period_doubling.csv", name, "max_x1", Style::Marker));
        let panel = Panel::new("period-doubled orbits", name, "max x1", series);
        self.figure("period_doubling", &Figure::new("period-2 branch", vec![panel]))?;

        let dv = doubled.parameter_values();
        self.summary.doubling = Some(DoublingSummary {
            points,
            doubled_branch_points: doubled.len(),
            doubled_first: dv[0],
            doubled_last: *dv.last().expect("seeded branch"),
        });
        Ok(())
    }

    fn simulate(&mut self, single: Option<f64>) -> Result<()> {
        let s = &self.config.simulate;
        let taus = single.map_or_else(|| s.taus.clone(), |t| vec![t]);
        let sys = self.sys.as_ref();
        let p = self.params();
        let runs: Result<Vec<_>> = taus
            .par_iter()
            .map(|&tau| {
                let q = p.with_tau(tau);
                let dt = s.dt.unwrap_or_else(|| default_step(&sys.delays(&q)));
                let traj = integrate(sys, &q, &s.history, s.t_end, dt)?;
                let att = attractor_summary(&traj, s.transient_cut, s.cluster_tol);
                Ok((tau, dt, traj, att))
            })
            .collect();
        let mut panels = Vec::new();
        let mut summary = Vec::new();
        for (tau, dt, traj, att) in runs? {
            let label = tau_label(tau);
            let file = format!("timeseries_tau_{label}.csv");
            let mut table = traj.to_table(s.stride);
            table.annotate("tau", tau);
            table.write(&self.path(&file))?;
            write_text(
                &self.path(&format!("attractor_tau_{label}.txt")),
                &format!("tau {}\n{}", fmt_num(tau), att.to_text()),
            )?;
            let series = (1..=sys.dimension())
                .map(|i| Series::new(&format!("x{i}"), &file, "t", &format!("x{i}"), Style::Line))
                .collect();
            panels.push(Panel::new(&format!("tau = {label}"), "t", "state", series));
            summary.push(SimulationSummary {
                tau,
                dt,
                multiplicity: att.multiplicity,
                period: att.period,
                levels: att.levels,
            });
        }
        self.figure("timeseries", &Figure::new("time series", panels))?;
        match (&mut self.summary.simulations, single) {
            (Some(existing), Some(_)) => {
                for run in summary {
                    existing.retain(|r| r.tau != run.tau);
                    existing.push(run);
                }
            }
            (slot, _) => *slot = Some(summary),
        }
        Ok(())
    }
}

/// Error of a whole run: invalid input before any stage, or a failed stage.
#[derive(Debug)]
pub enum RunError {
    Invalid(Error),
    Stage(StageFailure),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(e) => exit_code(e),
            RunError::Stage(f) => exit_code(&f.error),
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Invalid(e) => write!(f, "{e}"),
            RunError::Stage(s) => write!(f, "{s}"),
        }
    }
}

impl std::error::Error for RunError {}

/// Runs every enabled stage of `config`, writing into `out`.
pub fn run(config: &StudyConfig, out: &Path) -> std::result::Result<Summary, RunError> {
    let mut study = Study::open(config.clone(), out).map_err(RunError::Invalid)?;
    study.run_enabled(None).map_err(RunError::Stage)?;
    Ok(study.summary().clone())
}
