//! Gaussian plume dispersion from point sources.
//!
//! Wind blows along +x. A source only affects receptors strictly downwind of
//! it, and receptors sit at ground level. Emission rates enter in g/h and are
//! converted to µg/s in exactly one place ([`G_PER_H_TO_UG_PER_S`]) so that
//! concentrations come out in µg/m³.
//!
//! Dispersion coefficients follow the Briggs open-country curves for
//! Pasquill–Gifford stability class C.

use std::f64::consts::PI;

use thiserror::Error;

use crate::species::{PerSpecies, Species};

/// g/h → µg/s.
pub const G_PER_H_TO_UG_PER_S: f64 = 1.0e6 / 3600.0;

/// Receptors closer than this to a source (along the wind) are not affected by it.
pub const MIN_DOWNWIND_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error("downwind distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("wind speed must be positive, got {0} m/s")]
    NonPositiveWind(f64),
    #[error("invalid plume query: {0}")]
    InvalidQuery(&'static str),
    #[error("receptor set is empty")]
    NoReceptors,
}

/// Crosswind and vertical standard deviations of the plume, in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaPair {
    pub sigma_y: f64,
    pub sigma_z: f64,
}

/// Class-C dispersion coefficients at downwind distance `x` (m).
pub fn sigma_for_distance(x: f64) -> Result<SigmaPair, DispersionError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(DispersionError::NonPositiveDistance(x));
    }
    Ok(SigmaPair {
        sigma_y: 0.11 * x / (1.0 + 0.0001 * x).sqrt(),
        sigma_z: 0.08 * x / (1.0 + 0.0002 * x).sqrt(),
    })
}

/// Receptor location and source geometry for a single plume evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlumeQuery {
    /// Downwind distance from the source, m.
    pub x: f64,
    /// Crosswind offset, m.
    pub y: f64,
    /// Receptor height, m.
    pub z: f64,
    /// Effective stack height, m.
    pub stack_height: f64,
    /// Source strength, g/h.
    pub emission_rate: f64,
    /// Wind speed, m/s.
    pub wind_speed: f64,
}

impl PlumeQuery {
    fn validate(&self) -> Result<(), DispersionError> {
        if !(self.wind_speed > 0.0) || !self.wind_speed.is_finite() {
            return Err(DispersionError::NonPositiveWind(self.wind_speed));
        }
        if !(self.x > 0.0) || !self.x.is_finite() {
            return Err(DispersionError::NonPositiveDistance(self.x));
        }
        if !self.y.is_finite() {
            return Err(DispersionError::InvalidQuery("crosswind offset is not finite"));
        }
        if !(self.z >= 0.0) || !self.z.is_finite() {
            return Err(DispersionError::InvalidQuery("receptor height must be >= 0"));
        }
        if !(self.stack_height >= 0.0) || !self.stack_height.is_finite() {
            return Err(DispersionError::InvalidQuery("stack height must be >= 0"));
        }
        if !(self.emission_rate >= 0.0) || !self.emission_rate.is_finite() {
            return Err(DispersionError::InvalidQuery("emission rate must be >= 0"));
        }
        Ok(())
    }
}

/// Whether the ground acts as a perfect reflector (image source at −H).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reflection {
    Ground,
    None,
}

/// Concentration (µg/m³) at the query point, with ground reflection.
pub fn plume_concentration(q: &PlumeQuery) -> Result<f64, DispersionError> {
    plume_concentration_with(q, Reflection::Ground)
}

pub fn plume_concentration_with(q: &PlumeQuery, reflection: Reflection) -> Result<f64, DispersionError> {
    q.validate()?;
    let SigmaPair { sigma_y, sigma_z } = sigma_for_distance(q.x)?;
    let source = q.emission_rate * G_PER_H_TO_UG_PER_S;
    let base = source / (2.0 * PI * q.wind_speed * sigma_y * sigma_z);
    let crosswind = (-(q.y * q.y) / (2.0 * sigma_y * sigma_y)).exp();
    let two_var_z = 2.0 * sigma_z * sigma_z;
    let direct = (-(q.z - q.stack_height).powi(2) / two_var_z).exp();
    let vertical = match reflection {
        Reflection::Ground => direct + (-(q.z + q.stack_height).powi(2) / two_var_z).exp(),
        Reflection::None => direct,
    };
    Ok(base * crosswind * vertical)
}

/// A point source of one pollutant species.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionSource {
    pub id: usize,
    pub species: Species,
    /// `false` for leaks and natural sources that no agent can actuate.
    pub controlled: bool,
    /// (x, y) in metres; x runs along the wind.
    pub position: (f64, f64),
    pub height: f64,
    /// g/h
    pub max_rate: f64,
    /// g/h, always within `[0, max_rate]`.
    pub current_rate: f64,
}

/// Ground-level receptor at the centre of a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Receptor {
    pub x: f64,
    pub y: f64,
}

/// Per-box, per-species concentrations for one step plus their domain mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationField {
    pub boxes: Vec<PerSpecies<f64>>,
    pub aggregate: PerSpecies<f64>,
}

impl ConcentrationField {
    /// Builds a field whose aggregate is the arithmetic mean of `boxes`.
    pub fn from_boxes(boxes: Vec<PerSpecies<f64>>) -> Self {
        let n = boxes.len().max(1) as f64;
        let aggregate = PerSpecies::from_fn(|s| boxes.iter().map(|b| b[s]).sum::<f64>() / n);
        ConcentrationField { boxes, aggregate }
    }

    pub fn uniform(boxes: usize, value: PerSpecies<f64>) -> Self {
        Self::from_boxes(vec![value; boxes])
    }
}

/// Sums every source's plume at every receptor on top of `background`.
///
/// Sources whose downwind distance to a receptor is at most
/// [`MIN_DOWNWIND_DISTANCE_M`] contribute nothing to it.
pub fn superpose(
    sources: &[EmissionSource],
    receptors: &[Receptor],
    wind_speed: f64,
    background: PerSpecies<f64>,
) -> Result<ConcentrationField, DispersionError> {
    if receptors.is_empty() {
        return Err(DispersionError::NoReceptors);
    }
    if !(wind_speed > 0.0) || !wind_speed.is_finite() {
        return Err(DispersionError::NonPositiveWind(wind_speed));
    }
    let mut boxes = Vec::with_capacity(receptors.len());
    for r in receptors {
        let mut value = background;
        for src in sources {
            let x = r.x - src.position.0;
            if x <= MIN_DOWNWIND_DISTANCE_M || src.current_rate == 0.0 {
                continue;
            }
            value[src.species] += plume_concentration(&PlumeQuery {
                x,
                y: r.y - src.position.1,
                z: 0.0,
                stack_height: src.height,
                emission_rate: src.current_rate,
                wind_speed,
            })?;
        }
        boxes.push(value);
    }
    Ok(ConcentrationField::from_boxes(boxes))
}
