use std::io::{Read, Write};

use thiserror::Error;

/// Nominal gyro sampling rate.
pub const GYRO_RATE_HZ: f64 = 200.0;

/// Uniformly sampled angular-velocity trace (deg/s).
#[derive(Debug, Clone, PartialEq)]
pub struct GyroTrace {
    pub t0_us: u64,
    pub rate_hz: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

impl GyroTrace {
    pub fn new(t0_us: u64, rate_hz: f64, samples: Vec<f64>) -> Self {
        GyroTrace {
            t0_us,
            rate_hz,
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn period_us(&self) -> f64 {
        1e6 / self.rate_hz
    }

    pub fn time_us(&self, i: usize) -> u64 {
        self.t0_us + (i as f64 * self.period_us()).round() as u64
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }

    /// Writes `ts_us,omega_z` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "ts_us,omega_z")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(w, "{},{:.6}", self.time_us(i), v)?;
        }
        w.flush()
    }

    /// Reads a `ts_us,omega_z` CSV. Timestamps must be strictly increasing and
    /// uniformly spaced (to within 1 µs); the rate is inferred from the spacing.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, TraceError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "ts_us" || &headers[1] != "omega_z" {
            return Err(TraceError::Malformed {
                line: 1,
                msg: "expected header `ts_us,omega_z`".into(),
            });
        }
        let mut ts = Vec::new();
        let mut samples = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |msg: String| TraceError::Malformed { line, msg };
            if rec.len() != 2 {
                return Err(bad(format!("expected 2 fields, got {}", rec.len())));
            }
            let t: u64 = rec[0]
                .parse()
                .map_err(|_| bad(format!("bad timestamp `{}`", &rec[0])))?;
            let v: f64 = rec[1]
                .parse()
                .map_err(|_| bad(format!("bad angular velocity `{}`", &rec[1])))?;
            if !v.is_finite() {
                return Err(bad("angular velocity is not finite".into()));
            }
            ts.push(t);
            samples.push(v);
        }
        if ts.len() < 2 {
            return Err(TraceError::Malformed {
                line: ts.len() + 1,
                msg: "a trace needs at least two samples".into(),
            });
        }
        let span = ts[ts.len() - 1] as f64 - ts[0] as f64;
        if span <= 0.0 {
            return Err(TraceError::Malformed {
                line: 2,
                msg: "timestamps do not increase".into(),
            });
        }
        let period = span / (ts.len() - 1) as f64;
        for (i, &t) in ts.iter().enumerate() {
            let expected = ts[0] as f64 + i as f64 * period;
            if (t as f64 - expected).abs() > 1.0 {
                return Err(TraceError::Malformed {
                    line: i + 2,
                    msg: format!("sample at {t} µs breaks uniform spacing of {period:.3} µs"),
                });
            }
        }
        Ok(GyroTrace {
            t0_us: ts[0],
            rate_hz: 1e6 / period,
            samples,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip() {
        let t = GyroTrace::new(1_000, 200.0, vec![0.5, -1.25, 3.0]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "ts_us,omega_z\n1000,0.500000\n6000,-1.250000\n11000,3.000000\n"
        );
        let back = GyroTrace::read_csv(&buf[..]).unwrap();
        assert_eq!(back.t0_us, 1_000);
        assert!((back.rate_hz - 200.0).abs() < 1e-9);
        assert_eq!(back.samples, t.samples);
    }

    #[test]
    fn rejects_irregular_spacing() {
        let csv = "ts_us,omega_z\n0,1\n5000,2\n12000,3\n";
        assert!(matches!(
            GyroTrace::read_csv(csv.as_bytes()),
            Err(TraceError::Malformed { .. })
        ));
    }

    #[test]
    fn rejects_bad_header_and_values() {
        assert!(GyroTrace::read_csv("t,w\n0,1\n5000,2\n".as_bytes()).is_err());
        assert!(GyroTrace::read_csv("ts_us,omega_z\n0,abc\n5000,2\n".as_bytes()).is_err());
        assert!(GyroTrace::read_csv("ts_us,omega_z\n0,1\n".as_bytes()).is_err());
    }
}
