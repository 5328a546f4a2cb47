//! Run settings. The TOML file and the command-line flags fill the same
//! structure; flags win.

use std::path::{Path, PathBuf};

use clap::Args;
use gp_pump_core::contraction::ContractionConfig;
use gp_pump_core::evolve::PositionStep;
use gp_pump_core::groundstate::FlowConfig;
use gp_pump_core::pumpbalance::{BalanceConfig, PumpProfile};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Stages run by `gp-pump run`, in order.
    pub stages: Vec<Stage>,
    pub out: PathBuf,
    /// Worker threads; GP_PUMP_THREADS caps it further.
    pub threads: Option<usize>,
    pub grid: GridSettings,
    pub model: ModelSettings,
    pub groundstate: GroundSettings,
    pub balance: BalanceSettings,
    pub linear: LinearSettings,
    pub contraction: ContractionSettings,
    pub sweep: SweepSettings,
    pub evolve: EvolveSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    LinearCheck,
    Groundstate,
    Balance,
    Spectrum,
    Expand,
    Solitary,
    Sweep,
    Evolve,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::LinearCheck => "linear-check",
            Stage::Groundstate => "groundstate",
            Stage::Balance => "balance",
            Stage::Spectrum => "spectrum",
            Stage::Expand => "expand",
            Stage::Solitary => "solitary",
            Stage::Sweep => "sweep",
            Stage::Evolve => "evolve",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    pub n: usize,
    pub extent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub pump: PumpProfile,
    pub alpha: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundSettings {
    pub mass: f64,
    /// Masses of the μ_M table; empty skips it.
    pub masses: Vec<f64>,
    pub tau: f64,
    pub max_iters: usize,
    pub energy_tol: f64,
    pub polish_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceSettings {
    pub bracket: [f64; 2],
    pub tol: f64,
    pub max_steps: usize,
    /// Masses of the K(M) table.
    pub scan: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSettings {
    /// Hermite modes per axis for dense cross-checks; absent means grid only.
    pub hermite_order: Option<usize>,
    pub eigenpairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractionSettings {
    pub fp_tol: f64,
    pub max_iter: usize,
    pub eps_max: f64,
    pub ball_guard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitialData {
    /// φ₁ scaled to `mass` and shifted to `center`.
    Gaussian,
    /// The solitary wave at the model ε.
    Solitary,
    /// A GPF1 file given by `snapshot`.
    Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSettings {
    pub dt: f64,
    pub t_final: f64,
    pub init: InitialData,
    pub mass: f64,
    pub center: [f64; 2],
    pub snapshot: Option<PathBuf>,
    pub position: PositionStep,
    pub snapshot_stride: usize,
    pub self_convergence: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            stages: vec![Stage::Balance, Stage::Expand, Stage::Solitary, Stage::Evolve, Stage::Report],
            out: PathBuf::from("run"),
            threads: None,
            grid: GridSettings::default(),
            model: ModelSettings::default(),
            groundstate: GroundSettings::default(),
            balance: BalanceSettings::default(),
            linear: LinearSettings::default(),
            contraction: ContractionSettings::default(),
            sweep: SweepSettings::default(),
            evolve: EvolveSettings::default(),
        }
    }
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            n: gp_pump_core::discretization::DEFAULT_N,
            extent: gp_pump_core::discretization::DEFAULT_EXTENT,
        }
    }
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            pump: PumpProfile::disk(1.0, 1.0),
            alpha: 1.0,
            eps: 0.05,
        }
    }
}

impl Default for GroundSettings {
    fn default() -> Self {
        let f = FlowConfig::default();
        Self {
            mass: 1.0,
            masses: Vec::new(),
            tau: f.tau,
            max_iters: f.max_iters,
            energy_tol: f.energy_tol,
            polish_tol: f.polish_tol,
        }
    }
}

impl Default for BalanceSettings {
    fn default() -> Self {
        let b = BalanceConfig::default();
        Self {
            bracket: [0.01, 100.0],
            tol: b.tol,
            max_steps: b.max_steps,
            scan: vec![0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 100.0],
        }
    }
}

impl Default for LinearSettings {
    fn default() -> Self {
        Self {
            hermite_order: None,
            eigenpairs: 6,
        }
    }
}

impl Default for ContractionSettings {
    fn default() -> Self {
        let c = ContractionConfig::default();
        Self {
            fp_tol: c.fp_tol,
            max_iter: c.max_iter,
            eps_max: c.eps_max,
            ball_guard: c.ball_guard,
        }
    }
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            eps: vec![0.0125, 0.025, 0.05, 0.1],
        }
    }
}

impl Default for EvolveSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 1.0,
            init: InitialData::Gaussian,
            mass: 1.0,
            center: [0.0, 0.0],
            snapshot: None,
            position: PositionStep::Closed,
            snapshot_stride: 0,
            self_convergence: false,
        }
    }
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn flow(&self) -> FlowConfig {
        let g = &self.groundstate;
        FlowConfig {
            tau: g.tau,
            max_iters: g.max_iters,
            energy_tol: g.energy_tol,
            polish_tol: g.polish_tol,
        }
    }

    pub fn balance_config(&self) -> BalanceConfig {
        BalanceConfig {
            tol: self.balance.tol,
            max_steps: self.balance.max_steps,
            flow: self.flow(),
        }
    }

    pub fn contraction_config(&self) -> ContractionConfig {
        let c = &self.contraction;
        ContractionConfig {
            fp_tol: c.fp_tol,
            max_iter: c.max_iter,
            eps_max: c.eps_max,
            ball_guard: c.ball_guard,
        }
    }
}

/// Flags shared by every subcommand. Each one overrides the config key
/// named in its help text.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML settings file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Run directory [out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads [threads]
    #[arg(long)]
    pub threads: Option<usize>,
    /// Grid points per axis [grid.n]
    #[arg(long)]
    pub n: Option<usize>,
    /// Box half-width [grid.extent]
    #[arg(long)]
    pub extent: Option<f64>,
    /// Pump profile, e.g. kind=disk,s0=1,r=1 [model.pump]
    #[arg(long)]
    pub pump: Option<PumpProfile>,
    /// Damping coefficient [model.alpha]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Perturbation size [model.eps]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Ground-state mass [groundstate.mass]
    #[arg(long)]
    pub mass: Option<f64>,
    /// Masses of the μ_M table [groundstate.masses]
    #[arg(long, value_delimiter = ',')]
    pub masses: Option<Vec<f64>>,
    /// Balance bracket lo,hi [balance.bracket]
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub bracket: Option<Vec<f64>>,
    /// Hermite modes for dense checks [linear.hermite_order]
    #[arg(long)]
    pub hermite_order: Option<usize>,
    /// Fixed-point step tolerance [contraction.fp_tol]
    #[arg(long)]
    pub fp_tol: Option<f64>,
    /// ε values of the sweep [sweep.eps]
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// Time step [evolve.dt]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time [evolve.t_final]
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Initial data [evolve.init]
    #[arg(long, value_enum)]
    pub init: Option<InitialData>,
    /// Initial data file [evolve.snapshot]
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<Settings, CliError> {
        let mut s = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        macro_rules! set {
            ($flag:ident => $($dst:tt)+) => {
                if let Some(v) = self.$flag.clone() {
                    s.$($dst)+ = v;
                }
            };
        }
        set!(out => out);
        set!(n => grid.n);
        set!(extent => grid.extent);
        set!(pump => model.pump);
        set!(alpha => model.alpha);
        set!(eps => model.eps);
        set!(mass => groundstate.mass);
        set!(masses => groundstate.masses);
        set!(fp_tol => contraction.fp_tol);
        set!(eps_list => sweep.eps);
        set!(dt => evolve.dt);
        set!(t_final => evolve.t_final);
        set!(init => evolve.init);
        if self.threads.is_some() {
            s.threads = self.threads;
        }
        if self.hermite_order.is_some() {
            s.linear.hermite_order = self.hermite_order;
        }
        if self.snapshot.is_some() {
            s.evolve.snapshot = self.snapshot.clone();
        }
        if let Some(b) = &self.bracket {
            s.balance.bracket = [b[0], b[1]];
        }
        Ok(s)
    }
}
