//! JSON configuration schemas. Files use ordinary frequencies (GHz, kHz) and
//! rates per microsecond; loaders convert to rad/ns and 1/ns.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dd::{DDSequence, Pulse, SequenceKind};
use crate::device::{Coupling, DeviceSpec, FrameTag};
use crate::error::{Error, Result};
use crate::experiment::{DdConfig, Engine, ExperimentConfig, FitFrame, MainState, NoiseModel};
use crate::lindblad::{JumpOperator, LindbladOp, LindbladSpec};
use crate::magnus::parse_axis;
use crate::operator::{Pauli, QubitState};
use crate::redfield::{beta_from_millikelvin, BathCoupling, OhmicBathSpec, RedfieldOptions};

pub fn ghz_to_rad_per_ns(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn khz_to_rad_per_ns(f: f64) -> f64 {
    2.0 * PI * f * 1e-6
}

pub fn rad_per_ns_to_ghz(w: f64) -> f64 {
    w / (2.0 * PI)
}

pub fn rad_per_ns_to_khz(w: f64) -> f64 {
    w / (2.0 * PI) * 1e6
}

pub fn per_us_to_per_ns(g: f64) -> f64 {
    g / 1000.0
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

// ------------------------------------------------------------------ device

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingJson {
    pub i: usize,
    pub j: usize,
    pub j_khz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceJson {
    #[serde(default)]
    pub n: Option<usize>,
    pub omega_q_ghz: Vec<f64>,
    #[serde(default)]
    pub couplings: Vec<CouplingJson>,
    /// Explicit drive frequency; otherwise derived from `frame`.
    #[serde(default)]
    pub omega_d_ghz: Option<f64>,
    #[serde(default)]
    pub frame: Option<FrameTag>,
    #[serde(default)]
    pub allow_signed_j: bool,
}

impl DeviceJson {
    /// Build the device; `main` anchors the drive when it comes from `frame`.
    pub fn into_spec(&self, main: usize) -> Result<DeviceSpec> {
        if let Some(n) = self.n {
            if n != self.omega_q_ghz.len() {
                return Err(Error::Config(format!(
                    "n = {n} but {} qubit frequencies given",
                    self.omega_q_ghz.len()
                )));
            }
        }
        let omega_q: Vec<f64> = self.omega_q_ghz.iter().map(|&f| ghz_to_rad_per_ns(f)).collect();
        let couplings: Vec<Coupling> = self
            .couplings
            .iter()
            .map(|c| Coupling {
                i: c.i.min(c.j),
                j: c.i.max(c.j),
                j_zz: khz_to_rad_per_ns(c.j_khz),
            })
            .collect();
        let frame = self.frame.unwrap_or(if self.omega_d_ghz.is_some() {
            FrameTag::Custom
        } else {
            FrameTag::Plus
        });
        // Placeholder drive; replaced below when derived from the frame.
        let mut spec = DeviceSpec::with_sign_policy(
            omega_q,
            couplings,
            self.omega_d_ghz.map_or(0.0, ghz_to_rad_per_ns),
            frame,
            self.allow_signed_j,
        )?;
        if self.omega_d_ghz.is_none() {
            spec.omega_d = spec.drive_for_frame(frame, main)?;
        }
        Ok(spec)
    }
}

// ----------------------------------------------------------------- lindblad

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LindbladOpJson {
    Pauli { label: String, gamma_per_us: f64 },
    Lower { qubit: usize, gamma_per_us: f64 },
    LowerJoint { qubits: [usize; 2], gamma_per_us: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LindbladJson {
    pub ops: Vec<LindbladOpJson>,
}

impl LindbladJson {
    pub fn into_spec(&self) -> Result<LindbladSpec> {
        let ops = self
            .ops
            .iter()
            .map(|o| {
                Ok(match o {
                    LindbladOpJson::Pauli { label, gamma_per_us } => LindbladOp {
                        op: JumpOperator::Pauli(label.parse()?),
                        rate: per_us_to_per_ns(*gamma_per_us),
                    },
                    LindbladOpJson::Lower { qubit, gamma_per_us } => LindbladOp {
                        op: JumpOperator::Lower(*qubit),
                        rate: per_us_to_per_ns(*gamma_per_us),
                    },
                    LindbladOpJson::LowerJoint { qubits, gamma_per_us } => LindbladOp {
                        op: JumpOperator::LowerJoint(qubits[0], qubits[1]),
                        rate: per_us_to_per_ns(*gamma_per_us),
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LindbladSpec::new(ops)
    }
}

// -------------------------------------------------------------------- bath

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathCouplingJson {
    pub qubit: usize,
    pub axis: String,
    /// Read as rad/ns without a 2 pi factor.
    pub g_ghz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathJson {
    /// Ohmic constant; numerically equal to ns^2.
    #[serde(rename = "eta_ohmic_ghz^-2")]
    pub eta_ohmic: f64,
    pub cutoff_ghz: f64,
    pub temp_mk: f64,
    pub couplings: Vec<BathCouplingJson>,
}

impl BathJson {
    pub fn into_spec(&self) -> Result<OhmicBathSpec> {
        let couplings = self
            .couplings
            .iter()
            .map(|c| {
                let axis = parse_axis(&c.axis)?;
                if axis == Pauli::I {
                    return Err(Error::Config("bath coupling axis must be x, y or z".into()));
                }
                Ok(BathCoupling {
                    qubit: c.qubit,
                    axis,
                    g: c.g_ghz,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        OhmicBathSpec::new(
            self.eta_ohmic,
            ghz_to_rad_per_ns(self.cutoff_ghz),
            beta_from_millikelvin(self.temp_mk)?,
            couplings,
        )
    }
}

// ---------------------------------------------------------------- sequence

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseJson {
    pub t_ns: f64,
    pub qubit: usize,
    pub axis: String,
    /// Rotation angle in rad, pi when absent.
    #[serde(default)]
    pub angle: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SequenceJson {
    Named {
        name: String,
        /// Pulse interval; total cycle length for UDD.
        tau_ns: f64,
        #[serde(default)]
        qubit: Option<usize>,
        #[serde(default)]
        qubits: Option<Vec<usize>>,
        #[serde(default)]
        repeats: Option<usize>,
    },
    Explicit {
        pulses: Vec<PulseJson>,
        cycle_ns: f64,
        #[serde(default)]
        repeats: Option<usize>,
    },
}

impl SequenceJson {
    /// Single cycle as written; named sequences target qubit 0 until placed.
    pub fn cycle(&self) -> Result<DDSequence> {
        match self {
            SequenceJson::Named { name, tau_ns, .. } => name.parse::<SequenceKind>()?.build(*tau_ns, 0),
            SequenceJson::Explicit { pulses, cycle_ns, .. } => {
                let pulses = pulses
                    .iter()
                    .map(|p| {
                        let axis = Pauli::from_char(
                            p.axis.trim().chars().next().unwrap_or('?').to_ascii_uppercase(),
                        )?;
                        Ok(Pulse {
                            time: p.t_ns,
                            qubit: p.qubit,
                            axis,
                            angle: p.angle.unwrap_or(PI),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                DDSequence::custom(pulses, *cycle_ns)
            }
        }
    }

    pub fn repeats(&self) -> Option<usize> {
        match self {
            SequenceJson::Named { repeats, .. } | SequenceJson::Explicit { repeats, .. } => *repeats,
        }
    }

    /// Decoupling placement. Named sequences go on `qubits`/`qubit` or, when
    /// neither is given, on `default_qubits`. Explicit pulses keep their own
    /// qubit indices.
    pub fn into_dd(&self, default_qubits: &[usize]) -> Result<DdConfig> {
        let cycle = self.cycle()?;
        match self {
            SequenceJson::Named { qubit, qubits, .. } => {
                let targets = match (qubits, qubit) {
                    (Some(qs), _) => qs.clone(),
                    (None, Some(q)) => vec![*q],
                    (None, None) => default_qubits.to_vec(),
                };
                Ok(DdConfig {
                    sequence: cycle,
                    qubits: targets,
                    repeats: self.repeats(),
                })
            }
            SequenceJson::Explicit { .. } => Ok(DdConfig {
                sequence: cycle,
                qubits: Vec::new(),
                repeats: self.repeats(),
            }),
        }
    }
}

// -------------------------------------------------------------- experiment

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseJson {
    Lindblad(LindbladJson),
    Bath(BathJson),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedfieldOptionsJson {
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub omega_max_factor: Option<f64>,
    #[serde(default)]
    pub support_factor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentJson {
    pub device: DeviceJson,
    #[serde(default)]
    pub noise: Option<NoiseJson>,
    #[serde(default)]
    pub engine: Option<Engine>,
    #[serde(default)]
    pub main_qubit: usize,
    #[serde(default)]
    pub spectator_states: Option<Vec<QubitState>>,
    #[serde(default)]
    pub main_state: Option<MainState>,
    #[serde(default)]
    pub dd: Option<SequenceJson>,
    pub t_max_us: f64,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub bootstrap_resamples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub over_rotation: Option<f64>,
    /// Frame used when fitting J from the free-evolution curves.
    #[serde(default)]
    pub fit_frame: Option<FitFrame>,
    #[serde(default)]
    pub redfield: Option<RedfieldOptionsJson>,
}

impl ExperimentJson {
    pub fn into_config(&self) -> Result<ExperimentConfig> {
        let device = self.device.into_spec(self.main_qubit)?;
        let noise = match &self.noise {
            None => NoiseModel::None,
            Some(NoiseJson::Lindblad(l)) => NoiseModel::Lindblad(l.into_spec()?),
            Some(NoiseJson::Bath(b)) => NoiseModel::Redfield(b.into_spec()?),
        };
        let mut cfg = ExperimentConfig::new(device, noise, self.main_qubit, self.t_max_us * 1000.0);
        if let Some(e) = self.engine {
            cfg.engine = e;
        }
        if let Some(s) = &self.spectator_states {
            cfg.spectator_states = s.clone();
        }
        if let Some(m) = self.main_state {
            cfg.main_state = m;
        }
        if let Some(dd) = &self.dd {
            cfg.dd = Some(dd.into_dd(&cfg.spectators())?);
        }
        if let Some(p) = self.points {
            cfg.points = p;
        }
        cfg.shots = self.shots;
        if let Some(r) = self.bootstrap_resamples {
            cfg.bootstrap_resamples = r;
        }
        cfg.seed = self.seed.unwrap_or(0);
        cfg.over_rotation = self.over_rotation.unwrap_or(0.0);
        if let Some(r) = &self.redfield {
            if let Some(s) = r.samples {
                cfg.redfield.samples = s;
            }
            if let Some(f) = r.omega_max_factor {
                cfg.redfield.omega_max_factor = f;
            }
            if let Some(f) = r.support_factor {
                cfg.redfield.support_factor = f;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fit_frame(&self) -> FitFrame {
        self.fit_frame.unwrap_or(match self.device.frame {
            Some(FrameTag::Zero) => FitFrame::Zero,
            _ => FitFrame::Plus,
        })
    }
}

pub fn load_experiment(path: &Path) -> Result<(ExperimentJson, ExperimentConfig)> {
    let raw: ExperimentJson = read_json(path)?;
    let cfg = raw.into_config()?;
    Ok((raw, cfg))
}

// ------------------------------------------------------------ cancellation

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CancellationJson {
    pub sequence: String,
    /// Drive frequency; 0 selects the lab frame.
    pub omega_d_ghz: f64,
    /// Pulse intervals to test. When absent, one generic interval and its
    /// fine-tuned neighbour are derived from `tau_ns`.
    #[serde(default)]
    pub tau_list_ns: Option<Vec<f64>>,
    #[serde(default = "default_tau")]
    pub tau_ns: f64,
    /// 0 pulses the main qubit, 1 the spectator.
    #[serde(default = "default_pulse_qubit")]
    pub pulse_qubit: usize,
}

fn default_tau() -> f64 {
    71.1
}

fn default_pulse_qubit() -> usize {
    1
}

impl CancellationJson {
    pub fn kind(&self) -> Result<SequenceKind> {
        self.sequence.parse()
    }

    pub fn omega_d(&self) -> f64 {
        ghz_to_rad_per_ns(self.omega_d_ghz)
    }

    pub fn taus(&self) -> Result<Vec<f64>> {
        if let Some(t) = &self.tau_list_ns {
            return Ok(t.clone());
        }
        let w = self.omega_d();
        if w == 0.0 {
            return Ok(vec![self.tau_ns]);
        }
        let tuned = crate::magnus::fine_tuned_tau(self.tau_ns, w)?;
        let generic = if crate::magnus::is_fine_tuned(self.tau_ns, w) {
            self.tau_ns * (1.0 + 0.137 / (self.tau_ns * w).max(1.0))
        } else {
            self.tau_ns
        };
        Ok(vec![generic, tuned])
    }
}

// -------------------------------------------------------------------- sweep

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "tau")]
    Tau,
    #[serde(rename = "omega_d")]
    OmegaD,
    #[serde(rename = "g")]
    G,
    #[serde(rename = "J")]
    J,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MainHamiltonianJson {
    /// Coefficient of Z on the main qubit, GHz.
    #[serde(default)]
    pub z_ghz: f64,
    /// Coefficient of X on the main qubit, GHz.
    #[serde(default)]
    pub x_ghz: f64,
}

/// A one-dimensional parameter sweep.
///
/// * `tau` (ns) and `J` (kHz) evaluate the two-qubit crosstalk error of one
///   cycle, with the sequence on the spectator.
/// * `omega_d` (GHz) and `g` (GHz, no 2 pi) evaluate the first-order residual
///   of the coupling `alpha (x) beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepJson {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub sequence: String,
    #[serde(default = "default_tau")]
    pub tau_ns: f64,
    #[serde(default)]
    pub omega_d_ghz: f64,
    #[serde(default)]
    pub j_khz: f64,
    #[serde(default = "default_g")]
    pub g_ghz: f64,
    #[serde(default)]
    pub alpha: Option<String>,
    #[serde(default)]
    pub beta: Option<String>,
    #[serde(default)]
    pub h_main: Option<MainHamiltonianJson>,
    #[serde(default = "default_pulse_qubit")]
    pub pulse_qubit: usize,
}

fn default_g() -> f64 {
    1.0
}

impl SweepJson {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep ladder is empty".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep ladder has non-finite values".into()));
        }
        self.sequence.parse::<SequenceKind>()?;
        if matches!(self.axis, SweepAxis::OmegaD | SweepAxis::G) {
            self.term_axes()?;
        }
        Ok(())
    }

    pub fn term_axes(&self) -> Result<(Pauli, Pauli)> {
        let a = self.alpha.as_deref().ok_or_else(|| Error::Config("sweep needs 'alpha'".into()))?;
        let b = self.beta.as_deref().ok_or_else(|| Error::Config("sweep needs 'beta'".into()))?;
        Ok((parse_axis(a)?, parse_axis(b)?))
    }
}

pub fn redfield_defaults() -> RedfieldOptions {
    RedfieldOptions::default()
}
