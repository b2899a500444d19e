use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::optics::OpticsParams;
use crate::rates::{leg_rate, LinkHardware};
use crate::split::{exhaustive_split, joint_window};
use crate::trace::LinkTrace;
use crate::SatError;

/// How the satellite memory is divided between two ground stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Allocation {
    /// The same `(m_a, m_b)` for the whole pass.
    Static(u64, u64),
    /// The exhaustive optimum recomputed at every instant.
    Dynamic,
}

/// Rates sampled at increasing times; linear in between.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateSeries {
    pub t: Vec<f64>,
    pub rate: Vec<f64>,
    pub corrected: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerSecond {
    pub t_s: f64,
    pub rate_hz: f64,
    pub rate_corrected_hz: f64,
    /// Poisson 1σ of the corrected pair count in this second.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accumulation {
    /// Pairs over the pass without the differential-latency correction.
    pub total: f64,
    /// Pairs over the pass with the correction.
    pub total_corrected: f64,
    pub per_second: Vec<PerSecond>,
}

impl Accumulation {
    /// 1σ band of the corrected total.
    pub fn sigma(&self) -> f64 {
        self.total_corrected.sqrt()
    }
}

/// Rates of one downlink at every trace sample using all satellite slots.
pub fn single_rate_series(trace: &LinkTrace, optics: &OpticsParams, hw: &LinkHardware) -> Result<RateSeries, SatError> {
    let mut s = RateSeries::default();
    for (p, &v) in trace.samples().iter().zip(trace.radial_velocity()) {
        let r = leg_rate(p, v, hw.m_s, optics, hw)?;
        s.t.push(p.t_s);
        s.rate.push(r.rate);
        s.corrected.push(r.corrected);
    }
    Ok(s)
}

/// Dual-link rates over the joint visibility window of two traces.
pub fn dual_rate_series(
    ta: &LinkTrace,
    tb: &LinkTrace,
    allocation: Allocation,
    optics: &OpticsParams,
    hw: &LinkHardware,
) -> Result<RateSeries, SatError> {
    if let Allocation::Static(ma, mb) = allocation {
        if ma + mb != hw.m_s {
            return Err(SatError::Config(format!("split ({ma}, {mb}) does not use {} slots", hw.m_s)));
        }
    }
    let mut s = RateSeries::default();
    for t in joint_window(ta, tb, optics) {
        let (pa, va) = ta.at(t).expect("inside window");
        let (pb, vb) = tb.at(t).expect("inside window");
        let (ma, mb) = match allocation {
            Allocation::Static(ma, mb) => (ma, mb),
            Allocation::Dynamic => exhaustive_split((&pa, va), (&pb, vb), optics, hw)?,
        };
        let ra = leg_rate(&pa, va, ma, optics, hw)?;
        let rb = leg_rate(&pb, vb, mb, optics, hw)?;
        s.t.push(t);
        s.rate.push(ra.rate.min(rb.rate));
        s.corrected.push(ra.corrected.min(rb.corrected));
    }
    Ok(s)
}

/// Integral of the piecewise-linear interpolant of `(t, y)` over `[a, b]`.
fn integrate(t: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..t.len() {
        let (t0, t1) = (t[k - 1], t[k]);
        let (lo, hi) = (t0.max(a), t1.min(b));
        if hi <= lo {
            continue;
        }
        let at = |x: f64| y[k - 1] + (y[k] - y[k - 1]) * (x - t0) / (t1 - t0);
        total += 0.5 * (at(lo) + at(hi)) * (hi - lo);
    }
    total
}

/// Trapezoid totals over the series plus per-second rates.
pub fn accumulate_pairs(series: &RateSeries) -> Accumulation {
    let (t, n) = (&series.t, series.t.len());
    if n < 2 {
        return Accumulation {
            total: 0.0,
            total_corrected: 0.0,
            per_second: Vec::new(),
        };
    }
    let (start, end) = (t[0], t[n - 1]);
    let per_second = (start.floor() as i64..end.ceil() as i64)
        .map(|k| {
            let (a, b) = (k as f64, k as f64 + 1.0);
            let corrected = integrate(t, &series.corrected, a, b);
            PerSecond {
                t_s: a,
                rate_hz: integrate(t, &series.rate, a, b),
                rate_corrected_hz: corrected,
                sigma: corrected.max(0.0).sqrt(),
            }
        })
        .collect();
    Accumulation {
        total: integrate(t, &series.rate, start, end),
        total_corrected: integrate(t, &series.corrected, start, end),
        per_second,
    }
}

pub fn write_rate_csv<W: Write>(out: W, rows: &[PerSecond]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-step Poisson means `corrected_rate(t0 + k dt) · dt`, zero outside the
/// trace or below the elevation mask.
pub fn rate_source_adapter(
    trace: &LinkTrace,
    optics: &OpticsParams,
    hw: &LinkHardware,
    t0: f64,
    dt: f64,
    steps: usize,
) -> Result<Vec<f64>, SatError> {
    (0..steps)
        .map(|k| match trace.at(t0 + k as f64 * dt) {
            Some((p, v)) => Ok(leg_rate(&p, v, hw.m_s, optics, hw)?.corrected * dt),
            None => Ok(0.0),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::rates::single_link_rate;

    #[test]
    fn constant_rate_integrates_exactly() {
        let o = OpticsParams::default();
        let hw = LinkHardware::default();
        let tr = LinkTrace::constant(30.0, 0.5, 6e5, 45.0, 2.0).unwrap();
        let s = single_rate_series(&tr, &o, &hw).unwrap();
        let acc = accumulate_pairs(&s);
        let r = single_link_rate(&tr.samples()[0], 0.0, &o, &hw).unwrap().corrected;
        assert_relative_eq!(acc.total_corrected, 30.0 * r, max_relative = 1e-12);
        assert_eq!(acc.per_second.len(), 30);
        for row in &acc.per_second {
            assert_relative_eq!(row.rate_corrected_hz, r, max_relative = 1e-12);
            assert_relative_eq!(row.sigma, r.sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn invisible_trace_gives_nothing() {
        let o = OpticsParams::default();
        let hw = LinkHardware::default();
        let tr = LinkTrace::constant(30.0, 1.0, 6e5, 10.0, 0.0).unwrap();
        let acc = accumulate_pairs(&single_rate_series(&tr, &o, &hw).unwrap());
        assert_eq!(acc.total_corrected, 0.0);
        let alpha = rate_source_adapter(&tr, &o, &hw, 0.0, 1e-3, 100).unwrap();
        assert!(alpha.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn adapter_matches_single_rate() {
        let o = OpticsParams::default();
        let hw = LinkHardware::default();
        let tr = LinkTrace::constant(2.0, 1.0, 6e5, 45.0, 2.0).unwrap();
        let r = single_link_rate(&tr.samples()[0], 0.0, &o, &hw).unwrap().corrected;
        let alpha = rate_source_adapter(&tr, &o, &hw, 1.0, 1e-3, 2000).unwrap();
        assert_relative_eq!(alpha[0], r * 1e-3, max_relative = 1e-12);
        assert_eq!(alpha[1999], 0.0);
    }

    #[test]
    fn csv_output() {
        let rows = [PerSecond {
            t_s: 0.0,
            rate_hz: 1.5,
            rate_corrected_hz: 1.25,
            sigma: 1.25f64.sqrt(),
        }];
        let mut buf = Vec::new();
        write_rate_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_s,rate_hz,rate_corrected_hz,sigma\n"));
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let back: Vec<PerSecond> = rdr.deserialize().collect::<Result<_, _>>().unwrap();
        assert_eq!(back, rows);
    }
}
