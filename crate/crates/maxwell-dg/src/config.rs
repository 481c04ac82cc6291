//! Run manifests: strict TOML configuration with per-experiment defaults.
//!
//! Unknown keys are rejected so that typos fail loudly, and every run echoes
//! the fully resolved manifest next to its outputs for provenance.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::flux::FluxKind;
use crate::kink::{kink_default_cfl, kink_speed, KINK_PERIOD};
use crate::model::ModelParams;
use crate::scheme::SchemeKind;
use crate::soliton::soliton_default_cfl;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    KinkConvergence,
    Soliton,
    SingleRun,
    EnergyAudit,
    KinkProfile,
}

/// Time-step rule: `accuracy` scales as `cfl * h^((k+1)/2)` to balance the
/// temporal and spatial orders; `fixed` is plain `cfl * h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtRule {
    Accuracy,
    Fixed,
}

/// Optional overrides of the per-experiment material preset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    pub eps_inf: Option<f64>,
    pub eps_s: Option<f64>,
    pub a: Option<f64>,
    pub theta: Option<f64>,
    pub omega0: Option<f64>,
    pub omega_v: Option<f64>,
    pub inv_tau: Option<f64>,
    pub inv_tau_v: Option<f64>,
}

impl ModelOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn apply(&self, base: &ModelParams) -> Result<ModelParams> {
        ModelParams::new(
            self.eps_inf.unwrap_or(base.eps_inf),
            self.eps_s.unwrap_or(base.eps_s),
            self.a.unwrap_or(base.a),
            self.theta.unwrap_or(base.theta),
            self.omega0.unwrap_or(base.omega0),
            self.omega_v.unwrap_or(base.omega_v),
            self.inv_tau.unwrap_or(base.inv_tau),
            self.inv_tau_v.unwrap_or(base.inv_tau_v),
        )
    }
}

fn default_degree() -> usize {
    2
}

fn default_elements() -> usize {
    100
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    0x5eed
}

fn default_audit_states() -> usize {
    100
}

fn default_scheme() -> SchemeKind {
    SchemeKind::LeapFrog
}

fn default_flux() -> FluxKind {
    FluxKind::Upwind
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub experiment: Experiment,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeKind,
    #[serde(default = "default_flux")]
    pub flux: FluxKind,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_elements")]
    pub elements: usize,
    /// Mesh ladder for convergence experiments; empty means {100, 200, 400}.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub element_list: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_rule: Option<DtRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    /// Envelope amplitude M of the injected soliton pulse.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Use the full-scale soliton mesh (6400 elements) instead of 1600.
    #[serde(default)]
    pub full_scale: bool,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Number of random states exercised by the energy audit.
    #[serde(default = "default_audit_states")]
    pub audit_states: usize,
    #[serde(default, skip_serializing_if = "ModelOverrides::is_empty")]
    pub model: ModelOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_interval: Option<f64>,
}

impl RunManifest {
    pub fn minimal(experiment: Experiment) -> Self {
        Self {
            experiment,
            scheme: default_scheme(),
            flux: default_flux(),
            degree: default_degree(),
            elements: default_elements(),
            element_list: Vec::new(),
            cfl: None,
            dt_rule: None,
            t_final: None,
            amplitude: default_amplitude(),
            full_scale: false,
            seed: default_seed(),
            audit_states: default_audit_states(),
            model: ModelOverrides::default(),
            out_dir: None,
            snapshot_times: None,
            trace_interval: None,
        }
    }

    /// Experiment-appropriate default time-step multiplier when none is given.
    pub fn resolved_cfl(&self) -> f64 {
        self.cfl.unwrap_or(match self.experiment {
            Experiment::Soliton => soliton_default_cfl(self.scheme, self.flux),
            _ => kink_default_cfl(self.scheme, self.degree),
        })
    }

    pub fn resolved_dt_rule(&self) -> DtRule {
        self.dt_rule.unwrap_or(match self.experiment {
            Experiment::Soliton => DtRule::Fixed,
            _ => DtRule::Accuracy,
        })
    }

    pub fn resolved_t_final(&self) -> f64 {
        self.t_final.unwrap_or(match self.experiment {
            Experiment::Soliton => 80.0,
            _ => KINK_PERIOD / kink_speed(),
        })
    }

    pub fn resolved_elements(&self) -> usize {
        if self.experiment == Experiment::Soliton && self.full_scale {
            6400
        } else {
            self.elements
        }
    }

    pub fn convergence_elements(&self) -> Vec<usize> {
        if self.element_list.is_empty() {
            vec![100, 200, 400]
        } else {
            self.element_list.clone()
        }
    }

    /// Material constants: experiment preset with overrides applied.
    pub fn resolved_params(&self) -> Result<ModelParams> {
        let base = match self.experiment {
            Experiment::Soliton => ModelParams::soliton(),
            _ => ModelParams::kink(),
        };
        self.model.apply(&base)
    }

    /// Non-fatal conditions worth surfacing before a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Ok(p) = self.resolved_params() {
            if !p.energy_positivity_guard() {
                out.push(format!(
                    "theta = {} is outside [0, 3/4]; the discrete energy is not \
                     guaranteed to stay non-negative",
                    p.theta
                ));
            }
        }
        if self.degree > 3 {
            out.push(format!(
                "degree {} is above the validated range 1..=3",
                self.degree
            ));
        }
        out
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))
    }
}

pub fn parse_config(text: &str) -> Result<RunManifest> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}
