//! Run configuration: one strict JSON document per invocation, with a
//! section per subcommand. Unknown keys are rejected everywhere so typos
//! cannot silently change a scientific run.

use serde::Deserialize;
use topdown::circuit::MixerKind;
use topdown::gates::GateKind;
use topdown::linalg::RngSeed;
use topdown::recovery::RecoveryConfig;
use topdown::sweep::{PortPolicy, SweepSpec};
use topdown::wfm::WfmConfig;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed for every derived random quantity; overridable with --seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub synthesize: Option<SynthesizeConfig>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default, rename = "quantum-demo")]
    pub quantum_demo: Option<QuantumDemoConfig>,
    #[serde(default, rename = "tm-recover")]
    pub tm_recover: Option<TmRecoverConfig>,
}

pub const DEFAULT_BASE_SEED: u64 = 0x70D0_17;

impl RunConfig {
    pub fn base_seed(&self, override_seed: Option<u64>) -> RngSeed {
        RngSeed(override_seed.or(self.seed).unwrap_or(DEFAULT_BASE_SEED))
    }
}

fn default_trailing() -> bool {
    true
}

fn default_depth() -> usize {
    2
}

/// Parameters for one circuit synthesis.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeConfig {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "L", default = "default_depth")]
    pub depth: usize,
    /// `identity|z|x|fourier|random[:<seed>]`; a bare `random` derives its
    /// seed from the base seed.
    pub gate: String,
    #[serde(default = "default_mixer")]
    pub mixer_kind: MixerKind,
    #[serde(default = "default_trailing")]
    pub trailing_mixer: bool,
    #[serde(default)]
    pub port_policy: PortPolicy,
    #[serde(default)]
    pub input_ports: Option<Vec<usize>>,
    #[serde(default)]
    pub output_ports: Option<Vec<usize>>,
    #[serde(default)]
    pub wfm: WfmConfig,
}

fn default_mixer() -> MixerKind {
    MixerKind::HaarShared
}

/// Resolve a gate string, deriving a seed for a bare `random`.
pub fn resolve_gate(gate: &str, base: RngSeed) -> Result<GateKind, CliError> {
    if gate == "random" {
        return Ok(GateKind::RandomUnitary(base.mix(&[4])));
    }
    gate.parse::<GateKind>()
        .map_err(|e| CliError::config(format!("bad gate: {e}")))
}

fn default_rate() -> f64 {
    1e4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InputState {
    #[default]
    PhiPlus,
    MaximallyMixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BasesMode {
    /// All d+1 MUBs on both sides, followed by full tomography.
    #[default]
    Full,
    /// Only μ ∈ {0, 1}, measured through reprogrammed identity/Fourier
    /// circuits; reports the two-basis witness fidelity bound.
    TwoBases,
}

/// Parameters for the entangled-state manipulation demo.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumDemoConfig {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "L", default = "default_depth")]
    pub depth: usize,
    /// Gate applied to Bob's photon (ignored in two-bases mode, which
    /// programs identity and Fourier circuits itself).
    #[serde(default = "default_gate_string")]
    pub gate: String,
    #[serde(default = "default_mixer")]
    pub mixer_kind: MixerKind,
    #[serde(default)]
    pub port_policy: PortPolicy,
    #[serde(default)]
    pub wfm: WfmConfig,
    /// Expected counts per basis pair.
    #[serde(default = "default_rate")]
    pub rate: f64,
    /// Poisson-sample counts when set; exact expectations otherwise.
    #[serde(default)]
    pub poisson_seed: Option<u64>,
    #[serde(default)]
    pub input_state: InputState,
    #[serde(default)]
    pub bases_mode: BasesMode,
}

fn default_gate_string() -> String {
    "identity".into()
}

/// Parameters for transfer-matrix recovery on synthetic data.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmRecoverConfig {
    /// Generator size; required unless `dataset_path` is given.
    #[serde(default)]
    pub n: Option<usize>,
    /// (basis, random-θ1, random-both) record counts; defaults to
    /// (n², n², 2n²).
    #[serde(default)]
    pub counts: Option<(usize, usize, usize)>,
    #[serde(default)]
    pub noise: Option<f64>,
    /// `dft` or `haar` second mixer for the generator.
    #[serde(default = "default_u2_kind")]
    pub u2_kind: String,
    /// Load an existing dataset directory instead of generating one.
    #[serde(default)]
    pub dataset_path: Option<String>,
    #[serde(default)]
    pub save_dataset: bool,
    #[serde(default)]
    pub recovery: RecoveryConfig,
}

fn default_u2_kind() -> String {
    "dft".into()
}
