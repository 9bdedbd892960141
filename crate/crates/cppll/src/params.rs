//! Loop parameters: physical component values and their dimensionless form.
//!
//! A charge-pump PLL is described physically by the filter resistance `R`,
//! filter capacitance `C`, VCO gain `K_vco`, pump current `I_p`, reference
//! period `T_ref`, and VCO free-running frequency. Exactly two dimensionless
//! combinations govern the discrete phase dynamics:
//!
//! ```text
//! alpha = K_vco · I_p · T_ref · R
//! beta  = K_vco · I_p · T_ref² / (2 C)
//! ```
//!
//! This module owns both parameter types, conversion between them, and the
//! closed-form reference-period thresholds at which the VCO input is driven
//! to a nonpositive frequency (overload) either near lock or at worst-case
//! startup.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lit, Scalar};

/// Validation failure when constructing parameter sets.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParameterError {
    #[error("parameter `{name}` must be strictly positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("parameter `{name}` must be finite and nonnegative, got {value}")]
    Negative { name: &'static str, value: f64 },
}

fn require_positive<F: Scalar>(name: &'static str, value: F) -> Result<(), ParameterError> {
    if value.is_finite() && value > F::zero() {
        Ok(())
    } else {
        Err(ParameterError::NotPositive {
            name,
            value: value.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Physical loop parameters in SI units.
///
/// `vco_free_hz` may be zero: that reproduces the classic model variant whose
/// VCO law is `omega = K_vco · v` with no free-running term. All other fields
/// must be strictly positive. The dimensionless parameters and the
/// reference-period thresholds never involve `vco_free_hz`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParameters<F> {
    /// Filter resistance `R` in ohms.
    pub resistance_ohms: F,
    /// Filter capacitance `C` in farads.
    pub capacitance_farads: F,
    /// VCO gain `K_vco` in Hz per volt.
    pub vco_gain_hz_per_volt: F,
    /// Charge-pump current `I_p` in amperes.
    pub pump_current_amps: F,
    /// Reference period `T_ref` in seconds.
    pub ref_period_seconds: F,
    /// VCO free-running frequency in Hz (cycles per second); may be zero.
    pub vco_free_hz: F,
}

impl<F: Scalar> PhysicalParameters<F> {
    /// Validating constructor.
    ///
    /// # Errors
    /// [`ParameterError`] if any of `R`, `C`, `K_vco`, `I_p`, `T_ref` is not
    /// strictly positive, or if `vco_free_hz` is negative or non-finite.
    pub fn new(
        resistance_ohms: F,
        capacitance_farads: F,
        vco_gain_hz_per_volt: F,
        pump_current_amps: F,
        ref_period_seconds: F,
        vco_free_hz: F,
    ) -> Result<Self, ParameterError> {
        require_positive("resistance_ohms", resistance_ohms)?;
        require_positive("capacitance_farads", capacitance_farads)?;
        require_positive("vco_gain_hz_per_volt", vco_gain_hz_per_volt)?;
        require_positive("pump_current_amps", pump_current_amps)?;
        require_positive("ref_period_seconds", ref_period_seconds)?;
        if !(vco_free_hz.is_finite() && vco_free_hz >= F::zero()) {
            return Err(ParameterError::Negative {
                name: "vco_free_hz",
                value: vco_free_hz.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            resistance_ohms,
            capacitance_farads,
            vco_gain_hz_per_volt,
            pump_current_amps,
            ref_period_seconds,
            vco_free_hz,
        })
    }

    /// Converts to the dimensionless parameter pair.
    ///
    /// Postcondition: `alpha = K_vco·I_p·T_ref·R` and
    /// `beta = K_vco·I_p·T_ref²/(2C)`, both strictly positive.
    ///
    /// # Examples
    /// ```
    /// use cppll::params::PhysicalParameters;
    /// let phys = PhysicalParameters::new(0.2, 0.01, 20.0, 0.1, 0.125, 0.0).unwrap();
    /// let np = phys.normalize();
    /// assert_eq!(np.alpha, 0.05);
    /// assert_eq!(np.beta, 1.5625);
    /// ```
    pub fn normalize(&self) -> NormalizedParameters<F> {
        let gain = self.vco_gain_hz_per_volt * self.pump_current_amps * self.ref_period_seconds;
        NormalizedParameters {
            alpha: gain * self.resistance_ohms,
            beta: gain * self.ref_period_seconds / (lit::<F>(2.0) * self.capacitance_farads),
        }
    }

    /// Same component values with a different reference period.
    pub fn with_ref_period(&self, t_ref_seconds: F) -> Self {
        Self {
            ref_period_seconds: t_ref_seconds,
            ..*self
        }
    }

    /// Largest reference period free of VCO overload *near lock*:
    /// `1 / (K_vco · I_p · R)`, i.e. the period at which `alpha` reaches 1.
    pub fn local_overload_threshold(&self) -> F {
        (self.vco_gain_hz_per_volt * self.pump_current_amps * self.resistance_ohms).recip()
    }

    /// Largest reference period free of VCO overload from the worst-case
    /// startup pulse (full-width negative pulse from zero frequency offset):
    /// the positive root of `alpha(T) + 2·beta(T) = 1`,
    ///
    /// ```text
    /// T = (−RC + sqrt((RC)² + 4C/(K_vco·I_p))) / 2
    /// ```
    ///
    /// evaluated in the cancellation-safe conjugate form. Equivalently,
    /// startup overload is possible iff `1 − 2·beta − alpha ≤ 0`.
    pub fn startup_overload_threshold(&self) -> F {
        let rc = self.resistance_ohms * self.capacitance_farads;
        let q = lit::<F>(4.0) * self.capacitance_farads
            / (self.vco_gain_hz_per_volt * self.pump_current_amps);
        // (−rc + sqrt(rc² + q)) / 2  ==  q / (2 (rc + sqrt(rc² + q)))
        q / (lit::<F>(2.0) * (rc + (rc * rc + q).sqrt()))
    }

    /// Normalized frequency offset `u` for a filter output voltage `v`:
    /// `u = T_ref·(omega_free + K_vco·v) − 1`.
    pub fn offset_from_voltage(&self, v_volts: F) -> F {
        self.ref_period_seconds * (self.vco_free_hz + self.vco_gain_hz_per_volt * v_volts)
            - F::one()
    }

    /// Filter output voltage producing normalized frequency offset `u`
    /// (inverse of [`Self::offset_from_voltage`]).
    pub fn voltage_from_offset(&self, u: F) -> F {
        ((u + F::one()) / self.ref_period_seconds - self.vco_free_hz) / self.vco_gain_hz_per_volt
    }
}

/// Dimensionless loop parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedParameters<F> {
    /// `alpha = K_vco·I_p·T_ref·R`, the proportional-path strength.
    pub alpha: F,
    /// `beta = K_vco·I_p·T_ref²/(2C)`, the integral-path strength.
    pub beta: F,
}

impl<F: Scalar> NormalizedParameters<F> {
    /// Validating constructor; both parameters must be strictly positive.
    pub fn new(alpha: F, beta: F) -> Result<Self, ParameterError> {
        require_positive("alpha", alpha)?;
        require_positive("beta", beta)?;
        Ok(Self { alpha, beta })
    }

    /// A canonical physical realization of this dimensionless pair:
    /// `T_ref = 1 s`, `omega_free = 1 Hz`, `K_vco = 1 Hz/V`, `I_p = 1 A`,
    /// `R = alpha`, `C = 1/(2·beta)`.
    ///
    /// With this embedding the normalized frequency offset `u` equals the
    /// filter voltage numerically, which makes it convenient for driving the
    /// continuous-time simulator from dimensionless configurations.
    pub fn canonical_physical(&self) -> PhysicalParameters<F> {
        PhysicalParameters {
            resistance_ohms: self.alpha,
            capacitance_farads: (lit::<F>(2.0) * self.beta).recip(),
            vco_gain_hz_per_volt: F::one(),
            pump_current_amps: F::one(),
            ref_period_seconds: F::one(),
            vco_free_hz: F::one(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_loop() -> PhysicalParameters<f64> {
        // 400 ohm, 0.156 nF, 1e5 Hz/V, 5 mA, 1 us reference.
        PhysicalParameters::new(400.0, 0.156e-9, 1.0e5, 5.0e-3, 1.0e-6, 0.0).unwrap()
    }

    #[test]
    fn normalize_reference_sets() {
        let np = example_loop().normalize();
        assert!((np.alpha - 0.2).abs() < 1e-15);
        assert!((np.beta - 1.6025641025641026).abs() < 1e-13);

        let classic = PhysicalParameters::new(0.2, 0.01, 20.0, 0.1, 0.125, 0.0)
            .unwrap()
            .normalize();
        assert_eq!(classic.alpha, 0.05);
        assert_eq!(classic.beta, 1.5625);
    }

    #[test]
    fn normalize_homogeneity_in_ref_period() {
        let base = example_loop();
        let np = base.normalize();
        let doubled = base.with_ref_period(2.0e-6).normalize();
        assert!((doubled.alpha / np.alpha - 2.0).abs() < 1e-12);
        assert!((doubled.beta / np.beta - 4.0).abs() < 1e-12);
    }

    #[test]
    fn local_overload_threshold_values() {
        assert!((example_loop().local_overload_threshold() - 5.0e-6).abs() < 1e-18);
        let classic = PhysicalParameters::<f64>::new(0.2, 0.01, 20.0, 0.1, 0.125, 0.0).unwrap();
        assert!((classic.local_overload_threshold() - 2.5).abs() < 1e-12);
        // Doubling R halves the threshold.
        let mut r2 = example_loop();
        r2.resistance_ohms *= 2.0;
        assert!((r2.local_overload_threshold() * 2.0 - example_loop().local_overload_threshold())
            .abs()
            < 1e-18);
    }

    #[test]
    fn startup_threshold_closed_form_properties() {
        // Wide-band set where startup overload occurs at T_ref = 1 us.
        let p = PhysicalParameters::<f64>::new(600.0, 0.417e-9, 1.0e5, 5.0e-3, 1.0e-6, 0.0).unwrap();
        let t = p.startup_overload_threshold();
        assert!((t - 7.9666461745935984e-7).abs() < 1e-19);
        assert!(t < p.ref_period_seconds);

        // At the threshold, alpha + 2*beta = 1 exactly (root definition).
        let at = p.with_ref_period(t).normalize();
        assert!((at.alpha + 2.0 * at.beta - 1.0).abs() < 1e-12);

        // Vanishing-R limit: threshold tends to sqrt(C/(K_vco*I_p)).
        let small_r = PhysicalParameters::new(1e-12, 0.417e-9, 1.0e5, 5.0e-3, 1.0e-6, 0.0).unwrap();
        let limit = (0.417e-9f64 / (1.0e5 * 5.0e-3)).sqrt();
        assert!((small_r.startup_overload_threshold() - limit).abs() / limit < 1e-6);
    }

    #[test]
    fn voltage_offset_round_trip() {
        let p = example_loop();
        for &u in &[-0.5, 0.0, 0.25, 2.0] {
            let v = p.voltage_from_offset(u);
            assert!((p.offset_from_voltage(v) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn canonical_embedding_matches_normalized() {
        let np = NormalizedParameters::<f64>::new(0.35, 1.2).unwrap();
        let back = np.canonical_physical().normalize();
        assert!((back.alpha - np.alpha).abs() < 1e-15);
        assert!((back.beta - np.beta).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        assert!(PhysicalParameters::new(0.0, 1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(PhysicalParameters::new(1.0, 1.0, 1.0, 1.0, -2.0, 0.0).is_err());
        assert!(PhysicalParameters::new(1.0, 1.0, 1.0, 1.0, 1.0, -0.5).is_err());
        assert!(PhysicalParameters::new(1.0, 1.0, 1.0, 1.0, 1.0, 0.0).is_ok());
        assert!(NormalizedParameters::new(0.0, 1.0).is_err());
        assert!(NormalizedParameters::new(0.5, f64::NAN).is_err());
    }
}
