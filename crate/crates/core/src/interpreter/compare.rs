use num_traits::ToPrimitive;
use serde::Serialize;
use thiserror::Error;

use super::{format_time, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("signal {0} is missing from one trace")]
    MissingSignal(String),
    #[error("signal {signal}: {left} samples against {right}")]
    Length {
        signal: String,
        left: usize,
        right: usize,
    },
    #[error("signal {signal} at {time}: width {left} against {right}")]
    Width {
        signal: String,
        time: String,
        left: usize,
        right: usize,
    },
    #[error("signal {signal}: sample {index} at time {left} against {right}")]
    Time {
        signal: String,
        index: usize,
        left: String,
        right: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub signal: String,
    pub time: String,
    pub element: usize,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub pass: bool,
    pub samples: usize,
    /// Earliest mismatch by time, then signal name.
    pub first_divergence: Option<Divergence>,
}

/// `a` and `b` agree within relative tolerance `tol`, scaled by the larger
/// magnitude and never below `tol` in absolute terms. NaN matches NaN.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn same_time(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Sample-by-sample comparison of two traces with identical shape. Integer
/// and boolean signals of the left trace are compared exactly.
pub fn compare_traces(left: &Trace, right: &Trace, tol: f64) -> Result<CompareReport, ShapeError> {
    for name in right.signals.keys() {
        if !left.signals.contains_key(name) {
            return Err(ShapeError::MissingSignal(name.clone()));
        }
    }
    let mut samples = 0;
    let mut first: Option<(f64, Divergence)> = None;
    for (name, l) in &left.signals {
        let r = right
            .signals
            .get(name)
            .ok_or_else(|| ShapeError::MissingSignal(name.clone()))?;
        if l.samples.len() != r.samples.len() {
            return Err(ShapeError::Length {
                signal: name.clone(),
                left: l.samples.len(),
                right: r.samples.len(),
            });
        }
        let tol = if l.dtype.is_exact() { 0.0 } else { tol };
        for (i, ((tl, vl), (tr, vr))) in l.samples.iter().zip(&r.samples).enumerate() {
            let (fl, fr) = (tl.to_f64().unwrap_or(f64::NAN), tr.to_f64().unwrap_or(f64::NAN));
            if !same_time(fl, fr) {
                return Err(ShapeError::Time {
                    signal: name.clone(),
                    index: i,
                    left: format_time(*tl),
                    right: format_time(*tr),
                });
            }
            if vl.len() != vr.len() {
                return Err(ShapeError::Width {
                    signal: name.clone(),
                    time: format_time(*tl),
                    left: vl.len(),
                    right: vr.len(),
                });
            }
            samples += 1;
            let bad = vl.iter().zip(vr).position(|(&a, &b)| !close(a, b, tol));
            if let Some(e) = bad {
                if first.as_ref().map_or(true, |(t, _)| fl < *t) {
                    first = Some((
                        fl,
                        Divergence {
                            signal: name.clone(),
                            time: format_time(*tl),
                            element: e,
                            left: vl[e],
                            right: vr[e],
                        },
                    ));
                }
                break;
            }
        }
    }
    Ok(CompareReport {
        pass: first.is_none(),
        samples,
        first_divergence: first.map(|(_, d)| d),
    })
}
