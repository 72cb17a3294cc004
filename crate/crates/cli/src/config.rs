//! Run configuration: one TOML file with a section per pipeline stage.

use std::path::Path;

use anyhow::{bail, Context};
use ioncascade::bell::BellSettings;
use ioncascade::chain::{BeamProfile, TrapConfig};
use ioncascade::compiler::{CompilerConfig, Direction, MsSettings};
use ioncascade::decompose::Decomposer;
use ioncascade::program::Timing;
use ioncascade::pulses::Scheme;
use ioncascade::qpt::{Estimator, QptSettings};
use ioncascade::rb::{RbFitKind, RbMode, RbSettings};
use ioncascade::sim::NoiseModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const PAPER_DEFAULTS: &str = include_str!("../configs/paper.defaults");

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub trap: TrapConfig,
    pub beam: BeamProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    pub scheme: Scheme,
    pub decomposer: Decomposer,
    pub timing: Timing,
}

impl Default for PulseSection {
    fn default() -> Self {
        let c = CompilerConfig::default();
        Self { scheme: c.scheme, decomposer: c.decomposer, timing: c.timing }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompilerSection {
    pub crosstalk_depth: usize,
    pub direction: Direction,
    pub assume_ground_state: bool,
    pub optimize_cnot: bool,
    pub ms_axis_freedom: bool,
    pub grid: usize,
}

impl Default for CompilerSection {
    fn default() -> Self {
        let c = CompilerConfig::default();
        Self {
            crosstalk_depth: c.crosstalk_depth,
            direction: c.direction,
            assume_ground_state: c.assume_ground_state,
            optimize_cnot: c.optimize_cnot,
            ms_axis_freedom: c.ms_axis_freedom,
            grid: c.grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub shots: u64,
    pub seed: u64,
    pub noise: NoiseModel,
}

impl Default for SimSection {
    fn default() -> Self {
        Self { shots: 1000, seed: 1, noise: NoiseModel::paper() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RbKind {
    #[default]
    Compiled,
    Depolarizing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbSection {
    pub mode: RbKind,
    pub n_ions: usize,
    pub lengths: Vec<usize>,
    pub sequences: usize,
    pub shots: u64,
    pub fit: RbFitKind,
    /// Depolarizing mode only.
    pub error: f64,
    pub spam: f64,
    pub noisy_inverse: bool,
}

impl Default for RbSection {
    fn default() -> Self {
        let s = RbSettings::default();
        Self {
            mode: RbKind::Compiled,
            n_ions: 2,
            lengths: s.lengths,
            sequences: s.sequences,
            shots: s.shots,
            fit: s.fit,
            error: 0.03,
            spam: 0.025,
            noisy_inverse: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QptSection {
    /// Process under test, in the circuit language.
    pub circuit: String,
    pub shots: u64,
    pub bootstrap: usize,
    pub estimator: Estimator,
    pub bootstrap_estimator: Estimator,
}

impl Default for QptSection {
    fn default() -> Self {
        let s = QptSettings::default();
        Self {
            circuit: "CNOT 1 0".into(),
            shots: s.shots,
            bootstrap: s.bootstrap,
            estimator: s.estimator,
            bootstrap_estimator: s.bootstrap_estimator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharacterizationSection {
    pub rb: RbSection,
    pub bell: BellSettings,
    pub qpt: QptSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for reports and CSV traces; standard output when empty.
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub chain: ChainSection,
    pub pulses: PulseSection,
    pub compiler: CompilerSection,
    pub ms: MsSettings,
    pub sim: SimSection,
    pub characterization: CharacterizationSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn paper() -> Self {
        Self::parse(PAPER_DEFAULTS).expect("shipped defaults parse")
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).context("config schema")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.chain.trap.validate()?;
        self.chain.beam.validate()?;
        self.sim.noise.validate()?;
        let rb = &self.characterization.rb;
        if rb.n_ions == 0 || rb.lengths.is_empty() || rb.sequences == 0 || rb.shots == 0 {
            bail!("characterization.rb needs ions, lengths, sequences and shots");
        }
        if self.characterization.bell.shots == 0 || self.characterization.qpt.shots == 0 || self.sim.shots == 0 {
            bail!("shot counts must be positive");
        }
        Ok(())
    }

    pub fn compiler_config(&self) -> CompilerConfig {
        self.compiler_config_for(self.chain.trap.n_ions)
    }

    pub fn compiler_config_for(&self, n_ions: usize) -> CompilerConfig {
        let mut trap = self.chain.trap.clone();
        trap.n_ions = n_ions;
        CompilerConfig {
            trap,
            beam: self.chain.beam.clone(),
            scheme: self.pulses.scheme,
            decomposer: self.pulses.decomposer.clone(),
            crosstalk_depth: self.compiler.crosstalk_depth,
            direction: self.compiler.direction,
            ms: self.ms.clone(),
            timing: self.pulses.timing,
            assume_ground_state: self.compiler.assume_ground_state,
            optimize_cnot: self.compiler.optimize_cnot,
            ms_axis_freedom: self.compiler.ms_axis_freedom,
            grid: self.compiler.grid,
        }
    }

    pub fn rb_settings(&self) -> RbSettings {
        let rb = &self.characterization.rb;
        RbSettings {
            lengths: rb.lengths.clone(),
            sequences: rb.sequences,
            shots: rb.shots,
            seed: self.sim.seed,
            fit: rb.fit,
        }
    }

    pub fn qpt_settings(&self) -> QptSettings {
        let q = &self.characterization.qpt;
        QptSettings {
            shots: q.shots,
            seed: self.sim.seed,
            bootstrap: q.bootstrap,
            estimator: q.estimator,
            bootstrap_estimator: q.bootstrap_estimator,
        }
    }

    pub fn rb_mode(&self) -> RbMode {
        let rb = &self.characterization.rb;
        match rb.mode {
            RbKind::Compiled => {
                RbMode::Compiled { config: Box::new(self.compiler_config_for(rb.n_ions)), noise: self.sim.noise }
            }
            RbKind::Depolarizing => {
                RbMode::Depolarizing { error: rb.error, spam: rb.spam, noisy_inverse: rb.noisy_inverse }
            }
        }
    }

    /// Applies `--seed` to every seeded stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.sim.seed = seed;
        self.characterization.bell.seed = seed;
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_defaults_match_library_defaults() {
        let cfg = RunConfig::paper();
        assert_eq!(cfg.compiler_config(), CompilerConfig::with_ions(2));
        assert_eq!(cfg.sim.noise, NoiseModel::paper());
        assert_eq!(cfg.qpt_settings(), QptSettings::default());
        assert_eq!(cfg.characterization.bell, BellSettings::default());
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::paper();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.hash(), RunConfig::parse(&cfg.to_toml()).unwrap().hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("[sim]\nshots = 10\nbogus = 1\n").is_err());
        assert!(RunConfig::parse("[sim.noise]\ndetection_fidelity = 1.5\n").is_err());
    }

    #[test]
    fn seed_override_reaches_every_stage() {
        let mut cfg = RunConfig::default();
        cfg.set_seed(42);
        assert_eq!(cfg.rb_settings().seed, 42);
        assert_eq!(cfg.characterization.bell.seed, 42);
        assert_eq!(cfg.qpt_settings().seed, 42);
    }
}
