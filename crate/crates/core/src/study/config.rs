//! Declarative study configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continuation::BranchSettings;
use crate::error::{Error, Result};
use crate::hopf::HopfSettings;
use crate::model::{lookup_model, ParameterSet, MODEL_NAMES};
use crate::psol::PsolSettings;
use crate::spectrum::SpectrumSettings;

/// Configs shipped with the library, by name.
pub const BUNDLED: &[(&str, &str)] = &[("reference-study", include_str!("../../configs/reference-study.toml"))];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub model: String,
    /// Artifact directory, relative to the working directory.
    pub output: PathBuf,
    pub parameters: ParameterSet,
    pub equilibria: EquilibriaConfig,
    pub continuation: ContinuationConfig,
    pub spectrum: SpectrumConfig,
    pub critical_delays: CriticalDelaysConfig,
    pub hopf: HopfConfig,
    pub psol: PsolConfig,
    pub doubling: DoublingConfig,
    pub simulate: SimulateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriaConfig {
    pub enabled: bool,
    /// Newton starting states, one equilibrium per entry.
    pub guesses: Vec<Vec<f64>>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    pub enabled: bool,
    /// Name of the free parameter.
    pub parameter: String,
    /// Newton guess for the first branch point.
    pub initial_state: Vec<f64>,
    pub min_bound: f64,
    pub max_bound: f64,
    pub max_step: f64,
    pub step: f64,
    pub points: usize,
    /// Attach characteristic roots and locate stability switches.
    pub annotate: bool,
}

/// Spectrum discretization, shared by every stage that computes roots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Toggles the delay sweep; the settings below apply regardless.
    pub enabled: bool,
    pub nodes: usize,
    pub minimal_real_part: f64,
    /// Delays of the sweep frames.
    pub frames: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticalDelaysConfig {
    pub enabled: bool,
    pub k_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopfConfig {
    pub enabled: bool,
    pub tol: f64,
    pub exclude_tol: f64,
    /// Refined points closer than this in the parameter are the same point.
    pub duplicate_tol: f64,
    /// Tolerance of the comparison with the analytic critical delays.
    pub agreement_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsolConfig {
    pub enabled: bool,
    /// 1-based index of the Hopf point to start from.
    pub hopf_index: usize,
    pub intervals: usize,
    pub degree: usize,
    pub amplitude: f64,
    pub step: f64,
    pub max_step: f64,
    pub points: usize,
    pub tol: f64,
    /// Parameter values at which corrected orbit profiles are written.
    pub orbits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoublingConfig {
    pub enabled: bool,
    pub amplitude: f64,
    pub points: usize,
    /// Parameter values at which doubled-orbit profiles are written.
    pub orbits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub enabled: bool,
    pub taus: Vec<f64>,
    /// Constant initial history.
    pub history: Vec<f64>,
    pub t_end: f64,
    /// Fixed step; the default rule applies when absent.
    pub dt: Option<f64>,
    pub transient_cut: f64,
    pub cluster_tol: f64,
    /// Every `stride`-th sample goes to the trajectory files.
    pub stride: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            model: crate::model::HarvestedPredatorPrey::NAME.to_string(),
            output: PathBuf::from("study-output"),
            parameters: ParameterSet::reference(),
            equilibria: EquilibriaConfig::default(),
            continuation: ContinuationConfig::default(),
            spectrum: SpectrumConfig::default(),
            critical_delays: CriticalDelaysConfig::default(),
            hopf: HopfConfig::default(),
            psol: PsolConfig::default(),
            doubling: DoublingConfig::default(),
            simulate: SimulateConfig::default(),
        }
    }
}

impl Default for EquilibriaConfig {
    fn default() -> Self {
        EquilibriaConfig {
            enabled: true,
            guesses: vec![vec![6.0, 3.0], vec![87.0, 0.0025]],
            tol: 1e-12,
        }
    }
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            enabled: true,
            parameter: "tau".to_string(),
            initial_state: vec![6.0, 3.0],
            min_bound: 0.0,
            max_bound: 15.0,
            max_step: 0.05,
            step: 0.02,
            points: 300,
            annotate: true,
        }
    }
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        let defaults = SpectrumSettings::default();
        SpectrumConfig {
            enabled: true,
            nodes: defaults.nodes,
            minimal_real_part: defaults.minimal_real_part,
            frames: (0..=60).map(|i| i as f64 * 0.25).collect(),
        }
    }
}

impl Default for CriticalDelaysConfig {
    fn default() -> Self {
        CriticalDelaysConfig { enabled: true, k_max: 4 }
    }
}

impl Default for HopfConfig {
    fn default() -> Self {
        let defaults = HopfSettings::default();
        HopfConfig {
            enabled: true,
            tol: defaults.tol,
            exclude_tol: defaults.exclude_tol,
            duplicate_tol: 1e-6,
            agreement_tol: 1e-6,
        }
    }
}

impl Default for PsolConfig {
    fn default() -> Self {
        let defaults = PsolSettings::default();
        PsolConfig {
            enabled: true,
            hopf_index: 3,
            intervals: defaults.intervals,
            degree: defaults.degree,
            amplitude: defaults.hopf_amplitude,
            step: 0.01,
            max_step: 0.05,
            points: 60,
            tol: defaults.tol,
            orbits: vec![7.1, 8.6],
        }
    }
}

impl Default for DoublingConfig {
    fn default() -> Self {
        DoublingConfig {
            enabled: true,
            amplitude: 1e-2,
            points: 45,
            orbits: vec![8.6],
        }
    }
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            enabled: true,
            taus: vec![7.1, 8.6, 8.78],
            history: vec![6.16, 3.35],
            t_end: 1000.0,
            dt: None,
            transient_cut: 0.8,
            cluster_tol: 1e-3,
            stride: 10,
        }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, format!("must be positive, got {v}")))
    }
}

fn state_len(path: &str, state: &[f64], n: usize) -> Result<()> {
    if state.len() != n {
        return Err(invalid(path, format!("expected {n} components, got {}", state.len())));
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(invalid(path, "components must be finite"));
    }
    Ok(())
}

impl StudyConfig {
    /// Parses TOML text; unknown keys and type errors report their key path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::de::Deserializer::parse(text).map_err(|e| invalid("", e.message().to_string()))?;
        let config: StudyConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "" } else { &path }, e.into_inner().message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file, or a bundled config when `source` names one and
    /// no such file exists.
    pub fn load(source: &Path) -> Result<Self> {
        if !source.exists() {
            if let Some(text) = source.to_str().and_then(bundled) {
                return Self::from_toml(text);
            }
        }
        let text = std::fs::read_to_string(source)
            .map_err(|e| invalid("", format!("cannot read {}: {e}", source.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Index of the continuation parameter.
    pub fn parameter_index(&self) -> Result<usize> {
        ParameterSet::index_of(&self.continuation.parameter)
            .map_err(|_| invalid("continuation.parameter", format!("unknown parameter `{}`", self.continuation.parameter)))
    }

    pub fn branch_settings(&self) -> Result<BranchSettings> {
        let c = &self.continuation;
        Ok(BranchSettings::new(self.parameter_index()?, c.min_bound, c.max_bound, c.max_step, c.step))
    }

    pub fn psol_branch_settings(&self) -> Result<BranchSettings> {
        let mut s = self.branch_settings()?;
        s.max_step = self.psol.max_step;
        s.step = self.psol.step;
        Ok(s)
    }

    pub fn spectrum_settings(&self) -> SpectrumSettings {
        SpectrumSettings {
            nodes: self.spectrum.nodes,
            minimal_real_part: self.spectrum.minimal_real_part,
            ..SpectrumSettings::default()
        }
    }

    pub fn hopf_settings(&self) -> HopfSettings {
        HopfSettings {
            exclude_tol: self.hopf.exclude_tol,
            tol: self.hopf.tol,
            spectrum: self.spectrum_settings(),
            ..HopfSettings::default()
        }
    }

    pub fn psol_settings(&self) -> PsolSettings {
        PsolSettings {
            intervals: self.psol.intervals,
            degree: self.psol.degree,
            hopf_amplitude: self.psol.amplitude,
            tol: self.psol.tol,
            ..PsolSettings::default()
        }
    }

    /// True when no stage is enabled.
    pub fn nothing_enabled(&self) -> bool {
        ![
            self.equilibria.enabled,
            self.continuation.enabled,
            self.spectrum.enabled,
            self.critical_delays.enabled,
            self.hopf.enabled,
            self.psol.enabled,
            self.doubling.enabled,
            self.simulate.enabled,
        ]
        .contains(&true)
    }

    /// Checks value ranges and stage dependencies.
    pub fn validate(&self) -> Result<()> {
        let sys = lookup_model(&self.model)
            .map_err(|_| invalid("model", format!("unknown model `{}`, known: {MODEL_NAMES:?}", self.model)))?;
        let n = sys.dimension();
        self.parameters
            .validate()
            .map_err(|e| invalid("parameters", e.to_string()))?;

        for (i, g) in self.equilibria.guesses.iter().enumerate() {
            state_len(&format!("equilibria.guesses[{i}]"), g, n)?;
        }
        positive("equilibria.tol", self.equilibria.tol)?;

        let c = &self.continuation;
        self.parameter_index()?;
        state_len("continuation.initial_state", &c.initial_state, n)?;
        if !(c.min_bound.is_finite() && c.max_bound.is_finite()) {
            return Err(invalid("continuation.min_bound", "bounds must be finite"));
        }
        if c.max_bound < c.min_bound {
            return Err(invalid(
                "continuation.max_bound",
                format!("max_bound {} is smaller than min_bound {}", c.max_bound, c.min_bound),
            ));
        }
        positive("continuation.max_step", c.max_step)?;
        positive("continuation.step", c.step)?;

        if self.spectrum.nodes < 2 {
            return Err(invalid("spectrum.nodes", "need at least 2 nodes"));
        }
        if !self.spectrum.minimal_real_part.is_finite() {
            return Err(invalid("spectrum.minimal_real_part", "must be finite"));
        }
        if let Some(t) = self.spectrum.frames.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(invalid("spectrum.frames", format!("delays must be non-negative, got {t}")));
        }

        positive("hopf.tol", self.hopf.tol)?;
        positive("hopf.exclude_tol", self.hopf.exclude_tol)?;
        positive("hopf.duplicate_tol", self.hopf.duplicate_tol)?;
        positive("hopf.agreement_tol", self.hopf.agreement_tol)?;

        let p = &self.psol;
        if p.hopf_index == 0 {
            return Err(invalid("psol.hopf_index", "indices start at 1"));
        }
        if p.intervals == 0 {
            return Err(invalid("psol.intervals", "need at least one interval"));
        }
        if p.degree == 0 {
            return Err(invalid("psol.degree", "need degree at least 1"));
        }
        positive("psol.amplitude", p.amplitude)?;
        positive("psol.step", p.step)?;
        positive("psol.max_step", p.max_step)?;
        positive("psol.tol", p.tol)?;
        positive("doubling.amplitude", self.doubling.amplitude)?;

        let s = &self.simulate;
        state_len("simulate.history", &s.history, n)?;
        positive("simulate.t_end", s.t_end)?;
        if let Some(dt) = s.dt {
            positive("simulate.dt", dt)?;
        }
        if let Some(t) = s.taus.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(invalid("simulate.taus", format!("delays must be non-negative, got {t}")));
        }
        if !(0.0..1.0).contains(&s.transient_cut) {
            return Err(invalid("simulate.transient_cut", "must lie in [0, 1)"));
        }
        positive("simulate.cluster_tol", s.cluster_tol)?;
        if s.stride == 0 {
            return Err(invalid("simulate.stride", "must be at least 1"));
        }

        let needs = [
            (self.hopf.enabled, "hopf.enabled", self.continuation.enabled && c.annotate, "continuation with annotate = true"),
            (self.psol.enabled, "psol.enabled", self.hopf.enabled, "hopf"),
            (self.doubling.enabled, "doubling.enabled", self.psol.enabled, "psol"),
        ];
        for (on, path, dep, what) in needs {
            if on && !dep {
                return Err(invalid(path, format!("requires the {what} stage")));
            }
        }
        Ok(())
    }
}

/// Text of a bundled config.
pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_of(r: Result<StudyConfig>) -> String {
        match r {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn bundled_config_is_the_default() {
        let c = StudyConfig::from_toml(bundled("reference-study").unwrap()).unwrap();
        assert_eq!(c, StudyConfig::default());
    }

    #[test]
    fn round_trip() {
        let c = StudyConfig::default();
        assert_eq!(StudyConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let c = StudyConfig::from_toml("[parameters]\ntau = 2.0\n[simulate]\ntaus = [1.0]\n").unwrap();
        assert_eq!(c.parameters.tau, 2.0);
        assert_eq!(c.parameters.r, 3.5);
        assert_eq!(c.simulate.taus, vec![1.0]);
        assert_eq!(c.simulate.t_end, 1000.0);
    }

    #[test]
    fn errors_name_the_field() {
        let bounds = "[continuation]\nmin_bound = 5.0\nmax_bound = 1.0\n";
        assert_eq!(path_of(StudyConfig::from_toml(bounds)), "continuation.max_bound");
        assert_eq!(path_of(StudyConfig::from_toml("[psol]\nintervalz = 3\n")), "psol.intervalz");
        assert_eq!(path_of(StudyConfig::from_toml("[continuation]\nstep = \"x\"\n")), "continuation.step");
        assert_eq!(path_of(StudyConfig::from_toml("[continuation]\nparameter = \"q\"\n")), "continuation.parameter");
        assert_eq!(path_of(StudyConfig::from_toml("model = \"lorenz\"\n")), "model");
        assert_eq!(path_of(StudyConfig::from_toml("[simulate]\nhistory = [1.0]\n")), "simulate.history");
        assert_eq!(path_of(StudyConfig::from_toml("[hopf]\nenabled = true\n[continuation]\nenabled = false\n")), "hopf.enabled");
    }
}
