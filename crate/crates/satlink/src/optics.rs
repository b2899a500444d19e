use serde::{Deserialize, Serialize};

use crate::SatError;

/// Telescope and atmosphere parameters of a downlink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsParams {
    /// Ground telescope diameter, m.
    pub d_r: f64,
    /// Onboard telescope diameter, m.
    pub d_t: f64,
    /// Wavelength, m.
    pub lambda: f64,
    /// Fried parameter, m.
    pub r0: f64,
    /// Minimum usable elevation, degrees.
    pub elevation_mask: f64,
}

impl Default for OpticsParams {
    fn default() -> Self {
        Self {
            d_r: 1.0,
            d_t: 0.3,
            lambda: 1550e-9,
            r0: 0.1,
            elevation_mask: 20.0,
        }
    }
}

impl OpticsParams {
    pub fn validate(&self) -> Result<(), SatError> {
        let all = [self.d_r, self.d_t, self.lambda, self.r0, self.elevation_mask];
        if all.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(SatError::Config("optics parameters must be positive and finite".into()));
        }
        Ok(())
    }

    /// Diffraction-limited divergence, rad.
    pub fn theta_diff(&self) -> f64 {
        1.27 * self.lambda / self.d_t
    }

    /// Turbulence-induced divergence, rad.
    pub fn theta_atm(&self) -> f64 {
        2.1 * self.lambda / self.r0
    }
}

/// Channel transmittance at distance `l` (m) with atmospheric attenuation
/// `atm_db`; zero below the elevation mask.
pub fn freespace_transmittance(l: f64, atm_db: f64, elevation_deg: f64, optics: &OpticsParams) -> Result<f64, SatError> {
    if !(l.is_finite() && l > 0.0) {
        return Err(SatError::Domain(format!("distance must be positive, got {l}")));
    }
    if elevation_deg < optics.elevation_mask {
        return Ok(0.0);
    }
    let spread = optics.theta_diff().powi(2) + optics.theta_atm().powi(2);
    let geometric = (optics.d_r * optics.d_r / (l * l * spread)).min(1.0);
    Ok(geometric * 10f64.powf(-atm_db / 10.0))
}
