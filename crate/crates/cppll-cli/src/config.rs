//! Run-configuration schema: JSON with SI-unit-suffixed field names, one
//! parameter block (physical or normalized), an optional initial state, and
//! per-command options. A previous output envelope is also accepted — its
//! echoed `config` block is extracted — so any output can be re-run.

use serde::{Deserialize, Serialize};

use cppll::{DiscreteState64, NormalizedParameters64, PhysicalParameters64};

/// Validation failure (maps to exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Config format version; must be 1.
    pub schema: u32,
    pub parameters: ParameterBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    #[serde(default, skip_serializing_if = "Options::is_empty")]
    pub options: Options,
}

/// Exactly one of the two representations must be present.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ParameterBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<NormalizedConfig>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    pub resistance_ohms: f64,
    pub capacitance_farads: f64,
    pub vco_gain_hz_per_volt: f64,
    pub pump_current_amps: f64,
    pub ref_period_seconds: f64,
    #[serde(default)]
    pub vco_free_hz: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NormalizedConfig {
    pub alpha: f64,
    pub beta: f64,
}

/// Initial state, in whichever coordinates the config speaks.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, untagged)]
pub enum InitialState {
    /// Normalized pulse width and frequency offset.
    Normalized { p: f64, u: f64 },
    /// Signed width of pulse 0 and the filter voltage on the zero interval
    /// that follows it — the classic `(τ(0), v(0))` initial data. Requires
    /// a physical parameter block for the units.
    Physical { tau_seconds: f64, v_c_volts: f64 },
}

/// Command-specific knobs. Every field is optional; commands read the ones
/// they understand and fall back to their documented defaults.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lock_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lock_window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon_events: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_box: Option<StateBoxConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Resolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_scan: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_lo_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_hi_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_bisections: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_axis: Option<AxisConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_axis: Option<AxisConfig>,
}

impl Options {
    pub fn is_empty(&self) -> bool {
        self == &Options::default()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StateBoxConfig {
    pub p_min: f64,
    pub p_max: f64,
    pub u_min: f64,
    pub u_max: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub x: usize,
    pub y: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl RunConfig {
    /// Parses a config file. A bare `RunConfig` and a previous output
    /// envelope (any JSON object with a `config` field holding a
    /// `RunConfig`) are both accepted.
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("{} is not valid JSON: {e}", path.display())))?;
        let config_value = match value.get("config") {
            Some(inner) => inner.clone(),
            None => value,
        };
        let config: RunConfig = serde_json::from_value(config_value)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != 1 {
            return err(format!("unsupported schema version {}", self.schema));
        }
        match (&self.parameters.physical, &self.parameters.normalized) {
            (Some(_), Some(_)) => {
                err("config has both physical and normalized parameter blocks; keep exactly one")
            }
            (None, None) => err("config has neither a physical nor a normalized parameter block"),
            _ => Ok(()),
        }
    }

    /// The physical parameters, required as given (range estimates need real
    /// units; the canonical embedding would silently fake them).
    pub fn physical(&self) -> Result<PhysicalParameters64, ConfigError> {
        match &self.parameters.physical {
            Some(p) => PhysicalParameters64::new(
                p.resistance_ohms,
                p.capacitance_farads,
                p.vco_gain_hz_per_volt,
                p.pump_current_amps,
                p.ref_period_seconds,
                p.vco_free_hz,
            )
            .map_err(|e| ConfigError(e.to_string())),
            None => err("this command needs a physical parameter block (real units)"),
        }
    }

    /// Physical parameters as given, or the canonical unit embedding of the
    /// normalized pair (for commands whose results are reported back in
    /// normalized coordinates).
    pub fn any_physical(&self) -> Result<PhysicalParameters64, ConfigError> {
        match &self.parameters.physical {
            Some(_) => self.physical(),
            None => Ok(self.normalized()?.canonical_physical()),
        }
    }

    pub fn normalized(&self) -> Result<NormalizedParameters64, ConfigError> {
        if let Some(p) = &self.parameters.physical {
            return Ok(PhysicalParameters64::new(
                p.resistance_ohms,
                p.capacitance_farads,
                p.vco_gain_hz_per_volt,
                p.pump_current_amps,
                p.ref_period_seconds,
                p.vco_free_hz,
            )
            .map_err(|e| ConfigError(e.to_string()))?
            .normalize());
        }
        let n = self.parameters.normalized.as_ref().expect("validated");
        NormalizedParameters64::new(n.alpha, n.beta).map_err(|e| ConfigError(e.to_string()))
    }

    /// The initial state in discrete coordinates, if one was configured.
    /// A physical initial state needs the physical block for its units:
    /// `p = τ₀/T_ref`, and `u = T_ref·(ω_free + K_vco·v₀) − 1` because `v₀`
    /// is by definition the (constant) filter voltage after pulse 0 — the
    /// same post-pulse sampling the discrete map uses.
    pub fn initial_discrete(&self) -> Result<Option<DiscreteState64>, ConfigError> {
        match self.initial {
            None => Ok(None),
            Some(InitialState::Normalized { p, u }) => Ok(Some(DiscreteState64::new(p, u))),
            Some(InitialState::Physical {
                tau_seconds,
                v_c_volts,
            }) => {
                let phys = match &self.parameters.physical {
                    Some(_) => self.physical()?,
                    None => {
                        return err(
                            "a physical initial state (tau_seconds, v_c_volts) needs a \
                             physical parameter block; with normalized parameters give \
                             the initial state as {\"p\": …, \"u\": …}",
                        )
                    }
                };
                let t = phys.ref_period_seconds;
                let u = t * (phys.vco_free_hz + phys.vco_gain_hz_per_volt * v_c_volts) - 1.0;
                Ok(Some(DiscreteState64::new(tau_seconds / t, u)))
            }
        }
    }

    /// The initial state, or a stated validation error for commands that
    /// cannot run without one.
    pub fn required_initial(&self) -> Result<DiscreteState64, ConfigError> {
        self.initial_discrete()?.ok_or_else(|| {
            ConfigError(
                "this command needs an initial state: add \"initial\": {\"p\": …, \"u\": …} \
                 (or tau_seconds / v_c_volts with physical parameters)"
                    .into(),
            )
        })
    }
}
