use serde::{Deserialize, Serialize};

use crate::optics::{freespace_transmittance, OpticsParams};
use crate::trace::TracePoint;
use crate::{SatError, SPEED_OF_LIGHT};

/// Memory and detector parameters of a satellite downlink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkHardware {
    /// Satellite memory slots.
    pub m_s: u64,
    /// Ground memory slots.
    pub m_g: u64,
    /// Latching BSM success probability.
    pub p_bsm: f64,
    /// Acceptance window, s.
    pub w_i: f64,
    /// Emission period, s.
    pub t_em: f64,
    /// Speed of light, m/s.
    pub c: f64,
}

impl Default for LinkHardware {
    fn default() -> Self {
        Self {
            m_s: 100,
            m_g: 100,
            p_bsm: 0.5,
            w_i: 1.5e-9,
            t_em: 1e-6,
            c: SPEED_OF_LIGHT,
        }
    }
}

impl LinkHardware {
    pub fn validate(&self) -> Result<(), SatError> {
        if self.m_s > self.m_g {
            return Err(SatError::Config(format!(
                "satellite memory ({}) exceeds ground memory ({})",
                self.m_s, self.m_g
            )));
        }
        if !(self.p_bsm > 0.0 && self.p_bsm <= 1.0) {
            return Err(SatError::Config(format!("p_bsm must lie in (0, 1], got {}", self.p_bsm)));
        }
        if [self.w_i, self.t_em, self.c].iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(SatError::Config("w_i, t_em and c must be positive".into()));
        }
        Ok(())
    }
}

/// Rates of one downlink at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRate {
    pub eta: f64,
    /// Round-trip time, s.
    pub t_rt: f64,
    /// Pairs per second without the differential-latency correction.
    pub rate: f64,
    /// Pairs per second with the correction.
    pub corrected: f64,
}

/// Time shift between consecutive emissions caused by radial motion.
pub fn differential_latency_shift(v_r: f64, t_em: f64, c: f64) -> f64 {
    v_r * t_em / c
}

/// Longest photon train that stays inside the acceptance window, or `None`
/// when the satellite has no radial motion.
pub fn train_bound(v_r: f64, hw: &LinkHardware) -> Option<u64> {
    if v_r == 0.0 {
        return None;
    }
    Some((hw.w_i * hw.c / (v_r.abs() * hw.t_em)).floor() as u64)
}

/// Rates of a downlink using `m` memory slots.
pub fn leg_rate(point: &TracePoint, v_r: f64, m: u64, optics: &OpticsParams, hw: &LinkHardware) -> Result<LinkRate, SatError> {
    let eta = freespace_transmittance(point.distance_m, point.atm_attenuation_db, point.elevation_deg, optics)?;
    let t_rt = 2.0 * point.distance_m / hw.c;
    let rate = hw.p_bsm * eta / t_rt * m as f64;
    let corrected = match train_bound(v_r, hw) {
        Some(n) => hw.p_bsm * eta / t_rt * m.min(n) as f64,
        None => rate,
    };
    Ok(LinkRate {
        eta,
        t_rt,
        rate,
        corrected,
    })
}

/// Rates of a downlink using all `m_s` satellite slots.
pub fn single_link_rate(point: &TracePoint, v_r: f64, optics: &OpticsParams, hw: &LinkHardware) -> Result<LinkRate, SatError> {
    leg_rate(point, v_r, hw.m_s, optics, hw)
}

/// Corrected rate of a two-station link: the slower leg limits.
pub fn dual_link_rate(
    a: (&TracePoint, f64),
    b: (&TracePoint, f64),
    m_a: u64,
    m_b: u64,
    optics: &OpticsParams,
    hw: &LinkHardware,
) -> Result<f64, SatError> {
    if m_a + m_b != hw.m_s {
        return Err(SatError::Config(format!(
            "split ({m_a}, {m_b}) does not use the {} satellite slots",
            hw.m_s
        )));
    }
    let ra = leg_rate(a.0, a.1, m_a, optics, hw)?;
    let rb = leg_rate(b.0, b.1, m_b, optics, hw)?;
    Ok(ra.corrected.min(rb.corrected))
}
