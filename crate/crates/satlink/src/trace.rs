use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::SatError;

pub const TRACE_HEADER: &str = "t_s,distance_m,elevation_deg,atm_attenuation_db";

/// One sample of a downlink's geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t_s: f64,
    pub distance_m: f64,
    pub elevation_deg: f64,
    pub atm_attenuation_db: f64,
}

/// Time series of a satellite pass as seen from one ground station, with
/// radial velocities from finite differences of the distance.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTrace {
    samples: Vec<TracePoint>,
    v_r: Vec<f64>,
}

impl LinkTrace {
    pub fn new(samples: Vec<TracePoint>) -> Result<Self, SatError> {
        if samples.is_empty() {
            return Err(SatError::Domain("trace has no samples".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if !(s.distance_m.is_finite() && s.distance_m > 0.0) {
                return Err(SatError::Domain(format!("sample {i}: distance must be positive")));
            }
            if i > 0 && !(s.t_s > samples[i - 1].t_s) {
                return Err(SatError::Domain(format!("sample {i}: time must increase strictly")));
            }
        }
        let n = samples.len();
        let v_r = (0..n)
            .map(|i| {
                if n == 1 {
                    return 0.0;
                }
                let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
                (samples[hi].distance_m - samples[lo].distance_m) / (samples[hi].t_s - samples[lo].t_s)
            })
            .collect();
        Ok(Self { samples, v_r })
    }

    /// Samples every `step` seconds over `[0, duration]` with fixed geometry.
    pub fn constant(duration: f64, step: f64, distance_m: f64, elevation_deg: f64, atm_db: f64) -> Result<Self, SatError> {
        let n = (duration / step).round() as usize;
        Self::new(
            (0..=n)
                .map(|k| TracePoint {
                    t_s: k as f64 * step,
                    distance_m,
                    elevation_deg,
                    atm_attenuation_db: atm_db,
                })
                .collect(),
        )
    }

    pub fn from_csv_str(text: &str, path: &Path) -> Result<Self, SatError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| SatError::Trace {
            path: path.into(),
            line: 1,
            msg: e.to_string(),
        })?;
        let got: Vec<&str> = headers.iter().collect();
        if got.join(",") != TRACE_HEADER {
            return Err(SatError::Trace {
                path: path.into(),
                line: 1,
                msg: format!("expected header `{TRACE_HEADER}`"),
            });
        }
        let mut samples = Vec::new();
        for (i, row) in rdr.deserialize::<TracePoint>().enumerate() {
            let p = row.map_err(|e| SatError::Trace {
                path: path.into(),
                line: i + 2,
                msg: e.to_string(),
            })?;
            samples.push(p);
        }
        Self::new(samples).map_err(|e| SatError::Trace {
            path: path.into(),
            line: 0,
            msg: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, SatError> {
        let text = std::fs::read_to_string(path).map_err(|e| SatError::Io {
            path: path.into(),
            msg: e.to_string(),
        })?;
        Self::from_csv_str(&text, path)
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.samples {
            w.serialize(s).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
    }

    pub fn samples(&self) -> &[TracePoint] {
        &self.samples
    }

    /// Radial velocity per sample, m/s.
    pub fn radial_velocity(&self) -> &[f64] {
        &self.v_r
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t_s
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t_s
    }

    /// Linearly interpolated sample and radial velocity at time `t`, `None`
    /// outside the trace.
    pub fn at(&self, t: f64) -> Option<(TracePoint, f64)> {
        if t < self.start() || t > self.end() {
            return None;
        }
        let k = self.samples.partition_point(|s| s.t_s <= t);
        if k == 0 || k == self.samples.len() {
            let i = k.saturating_sub(1);
            return Some((TracePoint { t_s: t, ..self.samples[i] }, self.v_r[i]));
        }
        let (a, b) = (&self.samples[k - 1], &self.samples[k]);
        let w = (t - a.t_s) / (b.t_s - a.t_s);
        let lerp = |x: f64, y: f64| x + (y - x) * w;
        Some((
            TracePoint {
                t_s: t,
                distance_m: lerp(a.distance_m, b.distance_m),
                elevation_deg: lerp(a.elevation_deg, b.elevation_deg),
                atm_attenuation_db: lerp(a.atm_attenuation_db, b.atm_attenuation_db),
            },
            lerp(self.v_r[k - 1], self.v_r[k]),
        ))
    }
}
