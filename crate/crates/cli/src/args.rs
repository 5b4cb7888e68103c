use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use spinsampler::bosonsampling::SweepProfile;
use spinsampler::darkstates::ChannelAggregation;
use spinsampler::dynamics::Integrator;

#[derive(Debug, Parser)]
#[command(
    name = "spinsampler",
    version,
    about = "Qubits coupled through multiport interferometers: circuit compilation, effective models, dark-state decay and boson-sampling preparation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a Haar-random unitary or orthogonal matrix
    Haar {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: HaarArgs,
    },
    /// Decompose a unitary into a two-port cell mesh
    Decompose {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: DecomposeArgs,
    },
    /// Evaluate a mesh at a momentum ratio
    MeshEval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: MeshEvalArgs,
    },
    /// Synthesize a unitary and mesh from a symmetric coupling matrix
    CompileCouplings {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: CompileArgs,
    },
    /// Derive the effective spin Hamiltonian or Lindbladian of a circuit
    Effective {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: EffectiveArgs,
    },
    /// Integrate coherent or dissipative dynamics and write a trajectory
    Evolve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: EvolveArgs,
    },
    /// Monte Carlo decay rates of crowded dark states
    DarkDecay {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: DarkDecayArgs,
    },
    /// Adiabatic boson-sampling preparation in the spin and boson models
    AdiabaticBs {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: AdiabaticArgs,
    },
    /// Compare spin and boson output statistics after a fixed-time evolution
    SpinSampling {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: SpinSamplingArgs,
    },
    /// Run the experiment named in a configuration file
    Run {
        /// TOML configuration file
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Worker threads
        #[arg(long, env = "SPINSAMPLER_THREADS")]
        threads: Option<usize>,
    },
    /// Check a configuration file and list every violation
    Validate {
        /// TOML configuration file
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
    },
    /// Bundled recipes for published figures
    Repro {
        #[command(subcommand)]
        figure: Figure,
    },
}

#[derive(Debug, Subcommand)]
pub enum Figure {
    /// Dark-state decay rate grid against the closed form
    Fig2 {
        #[command(flatten)]
        common: Common,
        /// Samples per grid point
        #[arg(long)]
        samples: Option<i64>,
        /// Extend the grid to M = 50
        #[arg(long)]
        large: bool,
        /// How channel norms are combined per sample
        #[arg(long, value_enum)]
        channel_agg: Option<Aggregation>,
    },
}

/// Options shared by every experiment.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML configuration file; flags override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Random seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads
    #[arg(long, env = "SPINSAMPLER_THREADS")]
    pub threads: Option<usize>,
    /// Output file; stdout when omitted
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Haar,
    Decompose,
    MeshEval,
    CompileCouplings,
    Effective,
    Evolve,
    DarkDecay,
    AdiabaticBs,
    SpinSampling,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Haar => "haar",
            Kind::Decompose => "decompose",
            Kind::MeshEval => "mesh-eval",
            Kind::CompileCouplings => "compile-couplings",
            Kind::Effective => "effective",
            Kind::Evolve => "evolve",
            Kind::DarkDecay => "dark-decay",
            Kind::AdiabaticBs => "adiabatic-bs",
            Kind::SpinSampling => "spin-sampling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    Unitary,
    Orthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    Mean,
    Sum,
}

impl From<Aggregation> for ChannelAggregation {
    fn from(a: Aggregation) -> Self {
        match a {
            Aggregation::Mean => ChannelAggregation::Mean,
            Aggregation::Sum => ChannelAggregation::Sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    Smoothstep,
}

impl From<Schedule> for SweepProfile {
    fn from(_: Schedule) -> Self {
        SweepProfile::Smoothstep
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Resonator-mediated XY couplings
    Resonator,
    /// Open-waveguide collective dissipation
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dynamics {
    /// Schrödinger evolution under the XY Hamiltonian
    Coherent,
    /// Lindblad evolution with collective decay
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorArg {
    Rk4,
    Magnus4,
}

impl From<IntegratorArg> for Integrator {
    fn from(i: IntegratorArg) -> Self {
        match i {
            IntegratorArg::Rk4 => Integrator::Rk4,
            IntegratorArg::Magnus4 => Integrator::Magnus4,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct HaarArgs {
    /// Matrix dimension
    #[arg(long)]
    pub dim: Option<i64>,
    /// Matrix group
    #[arg(long, value_enum)]
    pub kind: Option<MatrixKind>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DecomposeArgs {
    /// Unitary in matrix JSON
    #[arg(long = "in", value_name = "FILE")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MeshEvalArgs {
    /// Mesh JSON
    #[arg(long, value_name = "FILE")]
    pub mesh: Option<PathBuf>,
    /// Momentum ratio; negative values select the backward wave
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CompileArgs {
    /// Real symmetric coupling matrix in matrix JSON
    #[arg(long = "in", value_name = "FILE")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub omega: f64,
    pub g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EffectiveArgs {
    /// Coupling mechanism
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Circuit unitary in matrix JSON
    #[arg(long, value_name = "FILE")]
    pub circuit: Option<PathBuf>,
    /// Circuit as a mesh JSON
    #[arg(long, value_name = "FILE")]
    pub mesh: Option<PathBuf>,
    /// Port count of a Haar-random orthogonal circuit drawn from the seed
    #[arg(long)]
    pub ports: Option<i64>,
    /// Decay rate Γ of the open model
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Qubit splitting Δ of the resonator model
    #[arg(long)]
    pub delta: Option<f64>,
    /// Resonator modes; configuration file only
    #[arg(skip)]
    pub modes: Option<Vec<ModeSpec>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvolveArgs {
    /// Coherent or dissipative dynamics
    #[arg(long, value_enum)]
    pub dynamics: Option<Dynamics>,
    /// Circuit unitary in matrix JSON
    #[arg(long, value_name = "FILE")]
    pub circuit: Option<PathBuf>,
    /// Circuit as a mesh JSON
    #[arg(long, value_name = "FILE")]
    pub mesh: Option<PathBuf>,
    /// Port count of a Haar-random orthogonal circuit drawn from the seed
    #[arg(long)]
    pub ports: Option<i64>,
    /// Input ports excited at t = 0
    #[arg(long, value_delimiter = ',')]
    pub initial: Option<Vec<i64>>,
    /// Final time
    #[arg(long)]
    pub time: Option<f64>,
    /// Integration step
    #[arg(long)]
    pub dt: Option<f64>,
    /// Coherent integrator
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorArg>,
    /// Coupling scale δ of the coherent model (J = δ·Re U)
    #[arg(long)]
    pub coupling: Option<f64>,
    /// Qubit splitting Δ̃ of the coherent model
    #[arg(long)]
    pub delta_tilde: Option<f64>,
    /// Decay rate Γ of the open model
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Also write the final state next to the output
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub dump_state: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DarkDecayArgs {
    /// Port counts
    #[arg(long, value_delimiter = ',')]
    pub m_list: Option<Vec<i64>>,
    /// Excitation counts
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<i64>>,
    /// Samples per grid point
    #[arg(long, allow_negative_numbers = true)]
    pub samples: Option<i64>,
    /// Raise the port budget to M ≤ 64
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub large: Option<bool>,
    /// How channel norms are combined per sample
    #[arg(long, value_enum)]
    pub channel_agg: Option<Aggregation>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AdiabaticArgs {
    /// Port count
    #[arg(long)]
    pub m: Option<i64>,
    /// Excitation count
    #[arg(long)]
    pub n: Option<i64>,
    /// Sweep duration in units of 1/δ
    #[arg(long)]
    pub time: Option<f64>,
    /// Detuning amplitude in units of δ
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    /// Switching profile
    #[arg(long, value_enum)]
    pub schedule: Option<Schedule>,
    /// Integration step in units of 1/δ
    #[arg(long)]
    pub dt: Option<f64>,
    /// Circuit unitary in matrix JSON; Haar orthogonal from the seed otherwise
    #[arg(long, value_name = "FILE")]
    pub circuit: Option<PathBuf>,
    /// Include the final spin state in the result
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub dump_state: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SpinSamplingArgs {
    /// Port count
    #[arg(long)]
    pub m: Option<i64>,
    /// Excitation count
    #[arg(long)]
    pub n: Option<i64>,
    /// Probe time in units of 1/δ; π when omitted
    #[arg(long)]
    pub time: Option<f64>,
    /// Coupling scale δ
    #[arg(long)]
    pub coupling: Option<f64>,
    /// Integration step in units of 1/δ
    #[arg(long)]
    pub dt: Option<f64>,
    /// Circuit unitary in matrix JSON; Haar unitary from the seed otherwise
    #[arg(long, value_name = "FILE")]
    pub circuit: Option<PathBuf>,
}
