//! Complex permittivity of biological tissue in the sub-THz band.
//!
//! Two relaxation families are supported: the double Debye model used for
//! blood and the Havriliak–Negami model (with optional static ionic
//! conductivity) used for the skin layers. From the permittivity we derive
//! the complex refractive index, the effective in-medium wavelength and the
//! molecular absorption coefficient that drive every link budget.
//!
//! Sign convention: relaxation terms use `1 / (1 + jωτ)`, so loss shows up as
//! a non-positive imaginary part of `ε_r`. Downstream quantities (`n_imag`,
//! `mu_abs`) are reported as non-negative magnitudes regardless.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consts::{SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};

const DEFAULT_TISSUES_JSON: &str = include_str!("../assets/tissues/default.json");

#[derive(Debug, Error, PartialEq)]
pub enum DielectricError {
    #[error("frequency must be positive and finite, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("tissue `{tissue}`: {reason}")]
    InvalidParameters { tissue: String, reason: String },
    #[error("unknown tissue `{0}`")]
    UnknownTissue(String),
    #[error("malformed tissue file: {0}")]
    Parse(String),
}

/// Two-pole Debye relaxation. Relaxation times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleDebyeParams {
    pub eps_inf: f64,
    pub eps_1: f64,
    pub eps_2: f64,
    pub tau_1: f64,
    pub tau_2: f64,
}

/// One Havriliak–Negami relaxation term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationTerm {
    pub eps: f64,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HavriliakNegamiParams {
    pub eps_inf: f64,
    pub terms: Vec<RelaxationTerm>,
    /// Static ionic conductivity in S/m. A blank table cell is zero.
    #[serde(default)]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_kind", content = "parameters", rename_all = "snake_case")]
pub enum Relaxation {
    DoubleDebye(DoubleDebyeParams),
    HavriliakNegami(HavriliakNegamiParams),
}

/// A named tissue together with its relaxation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DielectricModel {
    #[serde(rename = "name")]
    pub tissue_name: String,
    #[serde(flatten)]
    pub model: Relaxation,
}

/// Which wavelength divides `4π n″` when forming the absorption coefficient.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsorptionWavelength {
    /// In-medium wavelength `λ₀ / n′`.
    #[default]
    Effective,
    /// Free-space wavelength `λ₀`.
    Vacuum,
}

impl fmt::Display for AbsorptionWavelength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Effective => "effective",
            Self::Vacuum => "vacuum",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalProperties {
    pub frequency: f64,
    pub eps_r: Complex64,
    pub n_real: f64,
    pub n_imag: f64,
    /// Effective wavelength in the medium, m.
    pub lambda_g: f64,
    /// Molecular absorption coefficient, 1/m.
    pub mu_abs: f64,
}

impl OpticalProperties {
    /// Derives the refractive index chain from a permittivity value.
    ///
    /// The principal square root is taken, so `n_real >= 0` always; `n_imag`
    /// is the magnitude of the imaginary part.
    pub fn from_permittivity(eps_r: Complex64, frequency: f64, wavelength: AbsorptionWavelength) -> Self {
        let n = eps_r.sqrt();
        let n_real = n.re;
        let n_imag = n.im.abs();
        let lambda_0 = SPEED_OF_LIGHT / frequency;
        let lambda_g = lambda_0 / n_real;
        let mu_abs = match wavelength {
            AbsorptionWavelength::Effective => 4.0 * PI * n_imag / lambda_g,
            AbsorptionWavelength::Vacuum => 4.0 * PI * n_imag / lambda_0,
        };
        Self {
            frequency,
            eps_r,
            n_real,
            n_imag,
            lambda_g,
            mu_abs,
        }
    }
}

fn check_frequency(frequency: f64) -> Result<(), DielectricError> {
    if frequency.is_finite() && frequency > 0.0 {
        Ok(())
    } else {
        Err(DielectricError::NonPositiveFrequency(frequency))
    }
}

impl DoubleDebyeParams {
    pub fn permittivity(&self, omega: f64) -> Complex64 {
        let j = Complex64::i();
        let pole1 = (self.eps_1 - self.eps_2) / (1.0 + j * omega * self.tau_1);
        let pole2 = (self.eps_2 - self.eps_inf) / (1.0 + j * omega * self.tau_2);
        self.eps_inf + pole1 + pole2
    }

    fn validate(&self) -> Result<(), String> {
        let all = [self.eps_inf, self.eps_1, self.eps_2, self.tau_1, self.tau_2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("non-finite parameter".into());
        }
        if self.eps_inf <= 0.0 {
            return Err(format!("eps_inf must be positive, got {}", self.eps_inf));
        }
        if self.tau_1 <= 0.0 || self.tau_2 <= 0.0 {
            return Err("relaxation times must be positive".into());
        }
        Ok(())
    }
}

impl HavriliakNegamiParams {
    pub fn permittivity(&self, omega: f64) -> Complex64 {
        let mut eps = Complex64::new(self.eps_inf, 0.0);
        for term in &self.terms {
            // (jωτ)^α on the principal branch: |ωτ|^α · e^{jπα/2}
            let jwt_alpha = Complex64::from_polar((omega * term.tau).powf(term.alpha), 0.5 * PI * term.alpha);
            let denom = (1.0 + jwt_alpha).powf(term.beta);
            eps += term.eps / denom;
        }
        if self.sigma != 0.0 {
            eps -= Complex64::new(0.0, self.sigma / (omega * VACUUM_PERMITTIVITY));
        }
        eps
    }

    fn validate(&self) -> Result<(), String> {
        if !self.eps_inf.is_finite() || self.eps_inf <= 0.0 {
            return Err(format!("eps_inf must be positive, got {}", self.eps_inf));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(format!("sigma must be non-negative, got {}", self.sigma));
        }
        for (i, t) in self.terms.iter().enumerate() {
            if !(t.eps.is_finite() && t.tau.is_finite() && t.tau > 0.0) {
                return Err(format!("term {}: tau must be positive and eps finite", i + 1));
            }
            if !(t.alpha > 0.0 && t.alpha <= 1.0) || !(t.beta > 0.0 && t.beta <= 1.0) {
                return Err(format!("term {}: alpha and beta must lie in (0, 1]", i + 1));
            }
        }
        Ok(())
    }
}

impl DielectricModel {
    pub fn new(tissue_name: impl Into<String>, model: Relaxation) -> Result<Self, DielectricError> {
        let m = Self {
            tissue_name: tissue_name.into(),
            model,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), DielectricError> {
        let res = match &self.model {
            Relaxation::DoubleDebye(p) => p.validate(),
            Relaxation::HavriliakNegami(p) => p.validate(),
        };
        res.map_err(|reason| DielectricError::InvalidParameters {
            tissue: self.tissue_name.clone(),
            reason,
        })
    }

    pub fn permittivity(&self, frequency: f64) -> Result<Complex64, DielectricError> {
        eval_permittivity(self, frequency)
    }

    pub fn optical(
        &self,
        frequency: f64,
        wavelength: AbsorptionWavelength,
    ) -> Result<OpticalProperties, DielectricError> {
        optical_properties(self, frequency, wavelength)
    }
}

/// Complex relative permittivity at `frequency` (Hz).
pub fn eval_permittivity(model: &DielectricModel, frequency: f64) -> Result<Complex64, DielectricError> {
    check_frequency(frequency)?;
    let omega = 2.0 * PI * frequency;
    Ok(match &model.model {
        Relaxation::DoubleDebye(p) => p.permittivity(omega),
        Relaxation::HavriliakNegami(p) => p.permittivity(omega),
    })
}

pub fn optical_properties(
    model: &DielectricModel,
    frequency: f64,
    wavelength: AbsorptionWavelength,
) -> Result<OpticalProperties, DielectricError> {
    let eps = eval_permittivity(model, frequency)?;
    Ok(OpticalProperties::from_permittivity(eps, frequency, wavelength))
}

/// The set of tissues available to stack definitions, keyed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TissueLibrary {
    tissues: Vec<DielectricModel>,
}

impl TissueLibrary {
    pub fn new(tissues: Vec<DielectricModel>) -> Result<Self, DielectricError> {
        for t in &tissues {
            t.validate()?;
        }
        Ok(Self { tissues })
    }

    pub fn from_json_str(s: &str) -> Result<Self, DielectricError> {
        let tissues: Vec<DielectricModel> =
            serde_json::from_str(s).map_err(|e| DielectricError::Parse(e.to_string()))?;
        Self::new(tissues)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("tissue library serializes")
    }

    /// Blood, dermis and epidermis as shipped in `assets/tissues/default.json`.
    pub fn builtin() -> Self {
        Self::from_json_str(DEFAULT_TISSUES_JSON).expect("bundled tissue file is valid")
    }

    pub fn get(&self, name: &str) -> Result<&DielectricModel, DielectricError> {
        self.tissues
            .iter()
            .find(|t| t.tissue_name == name)
            .ok_or_else(|| DielectricError::UnknownTissue(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &DielectricModel> {
        self.tissues.iter()
    }

    pub fn len(&self) -> usize {
        self.tissues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tissues.is_empty()
    }
}
