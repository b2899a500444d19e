use tracing::debug;

use crate::optics::OpticsParams;
use crate::rates::{dual_link_rate, leg_rate, LinkHardware};
use crate::trace::{LinkTrace, TracePoint};
use crate::SatError;

/// Memory splits between legs A and B at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegerSplit {
    /// Split equalizing the uncorrected leg rates.
    pub real: (f64, f64),
    /// Ceiling formula applied to the real split; may not sum to `m_s`.
    pub formula: (u64, u64),
    /// Feasible split with the highest corrected dual rate.
    pub exhaustive: (u64, u64),
}

type Leg<'a> = (&'a TracePoint, f64);

fn fractions(a: Leg<'_>, b: Leg<'_>, optics: &OpticsParams, hw: &LinkHardware) -> Result<(f64, f64), SatError> {
    let ra = leg_rate(a.0, a.1, 1, optics, hw)?;
    let rb = leg_rate(b.0, b.1, 1, optics, hw)?;
    if ra.eta <= 0.0 || rb.eta <= 0.0 {
        return Err(SatError::Domain("both legs must be visible to split memory".into()));
    }
    let (wa, wb) = (ra.t_rt / ra.eta, rb.t_rt / rb.eta);
    let xa = wa / (wa + wb);
    Ok((xa, 1.0 - xa))
}

/// Real split giving both legs the same uncorrected rate.
pub fn optimal_split_real(a: Leg<'_>, b: Leg<'_>, optics: &OpticsParams, hw: &LinkHardware) -> Result<(f64, f64), SatError> {
    let (xa, _) = fractions(a, b, optics, hw)?;
    let ma = hw.m_s as f64 * xa;
    Ok((ma, hw.m_s as f64 - ma))
}

/// Best feasible split `m_a ∈ 1..m_s`. Ties go to the split closest to the
/// real optimum, then to the smaller `m_a`.
pub fn exhaustive_split(a: Leg<'_>, b: Leg<'_>, optics: &OpticsParams, hw: &LinkHardware) -> Result<(u64, u64), SatError> {
    if hw.m_s < 2 {
        return Err(SatError::Domain(format!("need at least 2 satellite slots, got {}", hw.m_s)));
    }
    let (real_a, _) = optimal_split_real(a, b, optics, hw)?;
    let mut best: Option<(f64, f64, u64)> = None;
    for ma in 1..hw.m_s {
        let rate = dual_link_rate(a, b, ma, hw.m_s - ma, optics, hw)?;
        let dist = (ma as f64 - real_a).abs();
        let better = match best {
            None => true,
            Some((r, d, _)) => rate > r || (rate == r && dist < d),
        };
        if better {
            best = Some((rate, dist, ma));
        }
    }
    let ma = best.expect("m_s >= 2").2;
    Ok((ma, hw.m_s - ma))
}

/// Real split, its ceiling-formula rounding and the exhaustive optimum.
pub fn optimal_split_integer(a: Leg<'_>, b: Leg<'_>, optics: &OpticsParams, hw: &LinkHardware) -> Result<IntegerSplit, SatError> {
    if hw.m_s < 2 {
        return Err(SatError::Domain(format!("need at least 2 satellite slots, got {}", hw.m_s)));
    }
    let (xa, xb) = fractions(a, b, optics, hw)?;
    let k = (hw.m_s - 1) as f64;
    let formula = ((k * xa).ceil() as u64, (k * xb + 1.0).ceil() as u64);
    if formula.0 + formula.1 != hw.m_s {
        debug!(
            m_a = formula.0,
            m_b = formula.1,
            m_s = hw.m_s,
            "ceiling split does not add up to the satellite memory"
        );
    }
    Ok(IntegerSplit {
        real: optimal_split_real(a, b, optics, hw)?,
        formula,
        exhaustive: exhaustive_split(a, b, optics, hw)?,
    })
}

/// Sample times of both traces inside their common time range where both
/// legs are visible.
pub fn joint_window(ta: &LinkTrace, tb: &LinkTrace, optics: &OpticsParams) -> Vec<f64> {
    let (lo, hi) = (ta.start().max(tb.start()), ta.end().min(tb.end()));
    let mut times: Vec<f64> = ta
        .samples()
        .iter()
        .chain(tb.samples())
        .map(|s| s.t_s)
        .filter(|&t| t >= lo && t <= hi)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times.retain(|&t| {
        let (pa, pb) = (ta.at(t).unwrap().0, tb.at(t).unwrap().0);
        pa.elevation_deg >= optics.elevation_mask && pb.elevation_deg >= optics.elevation_mask
    });
    times
}

/// Fixed split for a whole pass: the instantaneous optimum at the instant
/// where the dual rate peaks.
pub fn best_fixed_split(ta: &LinkTrace, tb: &LinkTrace, optics: &OpticsParams, hw: &LinkHardware) -> Result<(u64, u64), SatError> {
    let mut best: Option<(f64, (u64, u64))> = None;
    for t in joint_window(ta, tb, optics) {
        let (pa, va) = ta.at(t).unwrap();
        let (pb, vb) = tb.at(t).unwrap();
        let split = exhaustive_split((&pa, va), (&pb, vb), optics, hw)?;
        let rate = dual_link_rate((&pa, va), (&pb, vb), split.0, split.1, optics, hw)?;
        if best.is_none_or(|(r, _)| rate > r) {
            best = Some((rate, split));
        }
    }
    best.map(|(_, s)| s).ok_or(SatError::EmptyWindow)
}
