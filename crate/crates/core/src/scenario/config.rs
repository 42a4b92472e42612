use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::DecayModel;
use crate::measurement::{default_phi_grid, phi_grid, PmtRates};
use crate::noise::NoiseParams;
use crate::register::{BranchPairState, MAX_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    GhzCharacterize,
    GhzDecay,
    ScalingStudy,
    DfsContrast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    #[default]
    Camera,
    Pmt,
}

/// Which register a decay run starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Ghz,
    Dfs,
}

fn default_shots() -> usize {
    100
}
fn default_population_shots() -> usize {
    1000
}
fn default_bootstrap() -> usize {
    1000
}
fn default_wait_points() -> usize {
    8
}
fn default_wait_min() -> f64 {
    0.1
}
fn default_wait_max() -> f64 {
    2.0
}
fn default_lambda_ion() -> f64 {
    PmtRates::default().lambda_ion
}
fn default_lambda_bg() -> f64 {
    PmtRates::default().lambda_bg
}

/// Flat experiment description, read from TOML. Every physical quantity
/// carries its unit in the key name.
///
/// Dephasing is given either as `sigma2_rad2_per_s2` or as the single-qubit
/// Markovian coherence time `t2_single_s`, together with `gamma_per_s`.
/// Leaving all three out disables dephasing; leaving out `t1_s` disables
/// spontaneous decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_rad2_per_s2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_single_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_s: Option<f64>,
    /// Explicit waiting times. When absent, `wait_points` log-spaced times
    /// between `wait_min_coherence_times` and `wait_max_coherence_times`
    /// multiples of the state's 1/e coherence time are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wait_times_s: Option<Vec<f64>>,
    #[serde(default = "default_wait_points")]
    pub wait_points: usize,
    #[serde(default = "default_wait_min")]
    pub wait_min_coherence_times: f64,
    #[serde(default = "default_wait_max")]
    pub wait_max_coherence_times: f64,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default = "default_shots")]
    pub shots_per_setting: usize,
    /// Number of analysis phases over one parity period; 3n + 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_settings: Option<usize>,
    /// Shots of the unrotated population measurement.
    #[serde(default = "default_population_shots")]
    pub population_shots: usize,
    #[serde(default)]
    pub detection: Detection,
    #[serde(default = "default_lambda_ion")]
    pub pmt_lambda_ion: f64,
    #[serde(default = "default_lambda_bg")]
    pub pmt_lambda_bg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Skip sampling and report exact model values.
    #[serde(default)]
    pub analytic: bool,
    /// Cross-check the preparation with a statevector MS gate (n ≤ 14).
    #[serde(default)]
    pub prepare_via_ms: bool,
    /// Replace the ideal GHZ state by one with these populations P and
    /// coherence C.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrade_populations: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrade_coherence: Option<f64>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_resamples: usize,
    #[serde(default = "default_decay_model")]
    pub decay_model: DecayModel,
}

fn default_decay_model() -> DecayModel {
    DecayModel::Exponential
}

impl ExperimentConfig {
    /// Minimal config for `scenario` with every optional key at its default.
    pub fn new(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            n: None,
            n_list: None,
            sigma2_rad2_per_s2: None,
            t2_single_s: None,
            gamma_per_s: None,
            t1_s: None,
            wait_times_s: None,
            wait_points: default_wait_points(),
            wait_min_coherence_times: default_wait_min(),
            wait_max_coherence_times: default_wait_max(),
            initial_state: InitialState::default(),
            shots_per_setting: default_shots(),
            phi_settings: None,
            population_shots: default_population_shots(),
            detection: Detection::default(),
            pmt_lambda_ion: default_lambda_ion(),
            pmt_lambda_bg: default_lambda_bg(),
            seed: None,
            output_dir: None,
            analytic: false,
            prepare_via_ms: false,
            degrade_populations: None,
            degrade_coherence: None,
            bootstrap_resamples: default_bootstrap(),
            decay_model: default_decay_model(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .unwrap_or("<config>")
                .to_string();
            Error::config(field, e.to_string().trim_end())
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(e.to_string()))
    }

    /// Field-level checks for the configured scenario.
    pub fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            return Err(Error::config("seed", "a seed is required"));
        }
        match self.scenario {
            ScenarioKind::ScalingStudy => {
                let list = self
                    .n_list
                    .as_ref()
                    .ok_or_else(|| Error::config("n_list", "required for scaling_study"))?;
                if !list.contains(&1) {
                    return Err(Error::config("n_list", "must include 1"));
                }
                let mut sorted = list.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != list.len() {
                    return Err(Error::config("n_list", "entries must be distinct"));
                }
                for &n in list {
                    check_n("n_list", n)?;
                }
                if self.noise()?.is_none() {
                    return Err(Error::config("sigma2_rad2_per_s2", "scaling_study needs dephasing parameters"));
                }
            }
            _ => {
                let n = self.n.ok_or_else(|| Error::config("n", "required"))?;
                check_n("n", n)?;
            }
        }
        if self.scenario == ScenarioKind::DfsContrast
            && self.n.is_some_and(|n| n % 2 != 0) {
                return Err(Error::config("n", "dfs_contrast needs an even register size"));
            }
        if self.initial_state == InitialState::Dfs && self.n.is_some_and(|n| n % 2 != 0) {
            return Err(Error::config("n", "a DFS initial state needs an even register size"));
        }
        self.noise()?;
        if let Some(t1) = self.t1_s {
            if !(t1 > 0.0) {
                return Err(Error::config("t1_s", format!("must be > 0, got {t1}")));
            }
        }
        if let Some(times) = &self.wait_times_s {
            if times.is_empty() {
                return Err(Error::config("wait_times_s", "must not be empty"));
            }
            if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                return Err(Error::config("wait_times_s", "times must be finite and >= 0"));
            }
            if times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::config("wait_times_s", "times must be strictly increasing"));
            }
        }
        if self.wait_points < 3 {
            return Err(Error::config("wait_points", "need at least 3 waiting times"));
        }
        if !(self.wait_min_coherence_times > 0.0 && self.wait_max_coherence_times > self.wait_min_coherence_times) {
            return Err(Error::config(
                "wait_max_coherence_times",
                "need 0 < wait_min_coherence_times < wait_max_coherence_times",
            ));
        }
        if self.shots_per_setting == 0 {
            return Err(Error::config("shots_per_setting", "must be >= 1"));
        }
        if self.population_shots == 0 {
            return Err(Error::config("population_shots", "must be >= 1"));
        }
        if let Some(m) = self.phi_settings {
            if m < 3 {
                return Err(Error::config("phi_settings", "need at least 3 settings"));
            }
        }
        if !(self.pmt_lambda_ion > 0.0) {
            return Err(Error::config("pmt_lambda_ion", "must be > 0"));
        }
        if !(self.pmt_lambda_bg >= 0.0) {
            return Err(Error::config("pmt_lambda_bg", "must be >= 0"));
        }
        if self.bootstrap_resamples < 2 {
            return Err(Error::config("bootstrap_resamples", "must be >= 2"));
        }
        match (self.degrade_populations, self.degrade_coherence) {
            (None, None) => {}
            (Some(p), Some(c)) => {
                let n = self.n.unwrap_or(1);
                BranchPairState::ghz_with(n, p, c)
                    .map_err(|e| Error::config("degrade_coherence", e.to_string()))?;
            }
            _ => {
                return Err(Error::config(
                    "degrade_populations",
                    "degrade_populations and degrade_coherence must be given together",
                ))
            }
        }
        if self.prepare_via_ms && self.n.is_some_and(|n| n > crate::oracle::MAX_ORACLE_QUBITS) {
            return Err(Error::config(
                "prepare_via_ms",
                format!("statevector preparation supports n <= {}", crate::oracle::MAX_ORACLE_QUBITS),
            ));
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::config("seed", "a seed is required"))
    }

    /// Dephasing parameters, or `None` when no dephasing is configured.
    pub fn noise(&self) -> Result<Option<NoiseParams>> {
        let wrap = |field: &str, r: Result<NoiseParams>| r.map_err(|e| Error::config(field, e.to_string()));
        match (self.sigma2_rad2_per_s2, self.t2_single_s, self.gamma_per_s) {
            (None, None, None) => Ok(None),
            (Some(_), Some(_), _) => Err(Error::config(
                "t2_single_s",
                "give either sigma2_rad2_per_s2 or t2_single_s, not both",
            )),
            (_, _, None) => Err(Error::config("gamma_per_s", "required with dephasing parameters")),
            (Some(s2), None, Some(g)) => wrap("sigma2_rad2_per_s2", NoiseParams::new(s2, g)).map(Some),
            (None, Some(t2), Some(g)) => wrap("t2_single_s", NoiseParams::from_single_qubit_t2(t2, g)).map(Some),
            (None, None, Some(_)) => Err(Error::config(
                "sigma2_rad2_per_s2",
                "gamma_per_s given without sigma2_rad2_per_s2 or t2_single_s",
            )),
        }
    }

    pub fn pmt_rates(&self) -> PmtRates {
        PmtRates {
            lambda_ion: self.pmt_lambda_ion,
            lambda_bg: self.pmt_lambda_bg,
        }
    }

    pub fn phis(&self, n: usize) -> Vec<f64> {
        match self.phi_settings {
            Some(m) => phi_grid(n, m),
            None => default_phi_grid(n),
        }
    }
}

fn check_n(field: &str, n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::config(field, format!("register size must be in 1..={MAX_QUBITS}, got {n}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHARACTERIZE: &str = r#"
scenario = "ghz_characterize"
n = 8
seed = 7
degrade_populations = 0.847
degrade_coherence = 0.787
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(CHARACTERIZE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.shots_per_setting, 100);
        assert_eq!(cfg.phis(8).len(), 25);
        assert_eq!(cfg.detection, Detection::Camera);
        assert!(cfg.noise().unwrap().is_none());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::from_toml_str(CHARACTERIZE).unwrap();
        cfg.t2_single_s = Some(0.095);
        cfg.gamma_per_s = Some(100.0);
        cfg.wait_times_s = Some(vec![0.0, 0.01]);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_names_the_field() {
        let err = ExperimentConfig::from_toml_str("scenario = \"ghz_decay\"\nt1 = 1.0\n").unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "t1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn field_level_validation() {
        let field_of = |text: &str| match ExperimentConfig::from_toml_str(text).unwrap().validate() {
            Err(Error::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field_of("scenario = \"ghz_decay\"\nn = 2\n"), "seed");
        assert_eq!(field_of("scenario = \"ghz_decay\"\nseed = 1\n"), "n");
        assert_eq!(
            field_of("scenario = \"ghz_decay\"\nseed = 1\nn = 2\nwait_times_s = [0.2, 0.1]\n"),
            "wait_times_s"
        );
        assert_eq!(
            field_of("scenario = \"ghz_decay\"\nseed = 1\nn = 2\nsigma2_rad2_per_s2 = 1.0\n"),
            "gamma_per_s"
        );
        assert_eq!(
            field_of("scenario = \"scaling_study\"\nseed = 1\nn_list = [2, 3]\n"),
            "n_list"
        );
        assert_eq!(
            field_of("scenario = \"dfs_contrast\"\nseed = 1\nn = 7\nt1_s = 1.17\n"),
            "n"
        );
        assert_eq!(
            field_of("scenario = \"ghz_characterize\"\nseed = 1\nn = 2\nshots_per_setting = 0\n"),
            "shots_per_setting"
        );
    }

    #[test]
    fn noise_from_single_qubit_t2() {
        let mut cfg = ExperimentConfig::new(ScenarioKind::GhzDecay);
        cfg.t2_single_s = Some(0.095);
        cfg.gamma_per_s = Some(1000.0);
        let p = cfg.noise().unwrap().unwrap();
        let t2 = crate::noise::t2_markovian(1, &p).unwrap().seconds();
        assert!((t2 - 0.095).abs() < 1e-15);
    }
}
