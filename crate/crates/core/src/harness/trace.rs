//! Trace CSV files.
//!
//! One row per recorded iteration with the fixed header
//!
//! ```text
//! epoch,iteration,true_risk,est_risk,cv_raw,cv_smoothed,alpha,beta,accuracy,theta_norm
//! ```
//!
//! `epoch` is the zero-based epoch the iteration belongs to. `est_risk` and
//! `cv_raw` describe the minibatch drawn at the pre-step parameters;
//! `true_risk` and `theta_norm` describe the post-step parameters. On the
//! last iteration of an epoch, problems with a test set report the test-set
//! mean cost in `est_risk` and the test accuracy in `accuracy`. `alpha` is 0
//! for secant steps. Unavailable values are empty strings. Floats are
//! written with 17 significant digits so reading a trace back reproduces
//! every value bit for bit.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 10] = [
    "epoch",
    "iteration",
    "true_risk",
    "est_risk",
    "cv_raw",
    "cv_smoothed",
    "alpha",
    "beta",
    "accuracy",
    "theta_norm",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub epoch: u64,
    pub iteration: u64,
    pub true_risk: Option<f64>,
    pub est_risk: f64,
    pub cv_raw: Option<f64>,
    pub cv_smoothed: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub accuracy: Option<f64>,
    pub theta_norm: f64,
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl TraceRecord {
    fn fields(&self) -> [String; 10] {
        [
            self.epoch.to_string(),
            self.iteration.to_string(),
            fmt_opt(self.true_risk),
            fmt_f64(self.est_risk),
            fmt_opt(self.cv_raw),
            fmt_opt(self.cv_smoothed),
            fmt_f64(self.alpha),
            fmt_f64(self.beta),
            fmt_opt(self.accuracy),
            fmt_f64(self.theta_norm),
        ]
    }
}

pub fn write_trace_to<W: Write>(records: &[TraceRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

/// The exact bytes [`write_trace`] would produce.
pub fn trace_to_bytes(records: &[TraceRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace_to(records, &mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn write_trace(records: &[TraceRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, trace_to_bytes(records)).map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace(file, path)
}

pub(crate) fn parse_trace<R: std::io::Read>(input: R, path: &Path) -> Result<Vec<TraceRecord>> {
    let malformed = |message: String| Error::MalformedTrace {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(|e| malformed(e.to_string()))?.clone();
    let mut index = [0usize; 10];
    for (slot, name) in index.iter_mut().zip(TRACE_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
                path: path.to_path_buf(),
            })?;
    }
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| malformed(e.to_string()))?;
        let field = |i: usize| row.get(index[i]).unwrap_or("");
        let int = |i: usize| {
            field(i).parse::<u64>().map_err(|_| {
                malformed(format!("row {}: bad {} `{}`", line + 1, TRACE_HEADER[i], field(i)))
            })
        };
        let float = |i: usize| {
            field(i).parse::<f64>().map_err(|_| {
                malformed(format!("row {}: bad {} `{}`", line + 1, TRACE_HEADER[i], field(i)))
            })
        };
        let opt = |i: usize| {
            if field(i).is_empty() {
                Ok(None)
            } else {
                float(i).map(Some)
            }
        };
        out.push(TraceRecord {
            epoch: int(0)?,
            iteration: int(1)?,
            true_risk: opt(2)?,
            est_risk: float(3)?,
            cv_raw: opt(4)?,
            cv_smoothed: opt(5)?,
            alpha: float(6)?,
            beta: float(7)?,
            accuracy: opt(8)?,
            theta_norm: float(9)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_trace_is_header_only() {
        let bytes = trace_to_bytes(&[]);
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "epoch,iteration,true_risk,est_risk,cv_raw,cv_smoothed,alpha,beta,accuracy,theta_norm\n"
        );
    }

    #[test]
    fn optionals_are_empty_strings() {
        let r = TraceRecord {
            epoch: 0,
            iteration: 1,
            true_risk: None,
            est_risk: 0.5,
            cv_raw: None,
            cv_smoothed: None,
            alpha: 0.1,
            beta: 0.0,
            accuracy: None,
            theta_norm: 2.0,
        };
        let text = String::from_utf8(trace_to_bytes(&[r])).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert_eq!(
            row,
            "0,1,,5.0000000000000000e-1,,,1.0000000000000001e-1,0.0000000000000000e0,,2.0000000000000000e0"
        );
    }

    #[test]
    fn missing_column_is_named() {
        let text = "epoch,iteration,true_risk,est_risk,cv_raw,cv_smoothed,alpha,beta,theta_norm\n";
        let err = parse_trace(text.as_bytes(), Path::new("t.csv")).unwrap_err();
        match err {
            Error::MissingColumn { column, .. } => assert_eq!(column, "accuracy"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bad_value_reported() {
        let mut text = TRACE_HEADER.join(",");
        text.push_str("\n0,1,,abc,,,0.1,0,,1\n");
        assert!(matches!(
            parse_trace(text.as_bytes(), Path::new("t.csv")),
            Err(Error::MalformedTrace { .. })
        ));
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e3..1e3f64]
    }

    fn record() -> impl Strategy<Value = TraceRecord> {
        (
            (any::<u32>(), any::<u32>()),
            (prop::option::of(finite()), finite(), prop::option::of(finite())),
            (prop::option::of(finite()), finite(), finite()),
            (prop::option::of(0.0..=1.0f64), finite()),
        )
            .prop_map(|((e, i), (tr, er, cr), (cs, a, b), (acc, n))| TraceRecord {
                epoch: e as u64,
                iteration: i as u64,
                true_risk: tr,
                est_risk: er,
                cv_raw: cr,
                cv_smoothed: cs,
                alpha: a,
                beta: b,
                accuracy: acc,
                theta_norm: n,
            })
    }

    proptest! {
        #[test]
        fn write_read_round_trip_is_exact(records in prop::collection::vec(record(), 0..20)) {
            let bytes = trace_to_bytes(&records);
            let back = parse_trace(bytes.as_slice(), Path::new("mem")).unwrap();
            prop_assert_eq!(back.len(), records.len());
            for (a, b) in back.iter().zip(&records) {
                prop_assert_eq!(trace_to_bytes(std::slice::from_ref(a)), trace_to_bytes(std::slice::from_ref(b)));
                prop_assert_eq!(a.est_risk.to_bits(), b.est_risk.to_bits());
                prop_assert_eq!(a.true_risk.map(f64::to_bits), b.true_risk.map(f64::to_bits));
            }
        }
    }
}
