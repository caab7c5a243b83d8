use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::model::{DType, Rational, Token};

/// Samples of one output signal in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub dtype: DType,
    pub width: usize,
    pub samples: Vec<(Rational, Token)>,
}

impl Signal {
    pub fn new(dtype: DType, width: usize) -> Self {
        Signal {
            dtype,
            width,
            samples: Vec::new(),
        }
    }
}

/// Named output signals recorded by a simulation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub signals: BTreeMap<String, Signal>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceParseError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {0}: {1}")]
    Field(u64, String),
}

impl Trace {
    pub fn is_empty(&self) -> bool {
        self.signals.values().all(|s| s.samples.is_empty())
    }

    pub fn sample_count(&self) -> usize {
        self.signals.values().map(|s| s.samples.len()).sum()
    }

    /// Drops every sample at or after `end`.
    pub fn truncate(&mut self, end: Rational) {
        for s in self.signals.values_mut() {
            s.samples.retain(|(t, _)| *t < end);
        }
    }

    /// CSV with header `time,signal,value`, rows ordered by time then signal.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(Rational, &str, String)> = Vec::new();
        for (name, s) in &self.signals {
            for (t, v) in &s.samples {
                rows.push((*t, name, format_token(s.dtype, v)));
            }
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(["time", "signal", "value"]).expect("in-memory write");
        for (t, name, v) in rows {
            w.write_record([format_time(t).as_str(), name, v.as_str()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// Parses CSV written by [`Trace::to_csv`] or a generated harness.
    /// Signals come back as `f64`; times are recovered exactly when written
    /// as terminating decimals.
    pub fn from_csv(text: &str) -> Result<Trace, TraceParseError> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let mut trace = Trace::default();
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |m: &str| TraceParseError::Field(line, m.to_string());
            if rec.len() != 3 {
                return Err(bad("expected three fields"));
            }
            let t = parse_time(&rec[0]).ok_or_else(|| bad("bad time"))?;
            let v: Token = rec[2]
                .split_whitespace()
                .map(parse_value)
                .collect::<Option<_>>()
                .ok_or_else(|| bad("bad value"))?;
            let s = trace
                .signals
                .entry(rec[1].to_string())
                .or_insert_with(|| Signal::new(DType::F64, v.len()));
            s.samples.push((t, v));
        }
        for s in trace.signals.values_mut() {
            s.samples.sort_by(|a, b| a.0.cmp(&b.0));
        }
        Ok(trace)
    }

    pub fn to_json(&self) -> Value {
        let signals: serde_json::Map<String, Value> = self
            .signals
            .iter()
            .map(|(name, s)| {
                let samples: Vec<Value> = s
                    .samples
                    .iter()
                    .map(|(t, v)| json!([format_time(*t), v]))
                    .collect();
                (
                    name.clone(),
                    json!({"dtype": s.dtype.to_string(), "width": s.width, "samples": samples}),
                )
            })
            .collect();
        json!({ "signals": signals })
    }
}

fn format_token(dtype: DType, v: &[f64]) -> String {
    v.iter()
        .map(|&x| format_value(dtype, x))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn format_value(dtype: DType, x: f64) -> String {
    if dtype.is_exact() {
        return format!("{}", x as i64);
    }
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:?}")
    }
}

fn parse_value(s: &str) -> Option<f64> {
    match s.to_ascii_lowercase().as_str() {
        "nan" | "-nan" => Some(f64::NAN),
        "inf" | "infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        other => other.parse().ok(),
    }
}

/// Exact decimal when the denominator divides a power of ten, otherwise
/// seventeen significant digits.
pub fn format_time(t: Rational) -> String {
    let mut den = *t.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return format_g17(t.to_f64().unwrap_or(f64::NAN));
    }
    let digits = twos.max(fives);
    let scale = 10i128.pow(digits);
    let scaled = *t.numer() as i128 * scale / *t.denom() as i128;
    let sign = if scaled < 0 { "-" } else { "" };
    let scaled = scaled.abs();
    let int = scaled / scale;
    if digits == 0 {
        return format!("{sign}{int}");
    }
    let frac = format!("{:0width$}", scaled % scale, width = digits as usize);
    format!("{sign}{int}.{}", frac.trim_end_matches('0'))
}

/// `%.17g` formatting.
pub fn format_g17(x: f64) -> String {
    if !x.is_finite() {
        return format_value(DType::F64, x);
    }
    if x == 0.0 {
        return "0".into();
    }
    let e = format!("{x:.16e}");
    let (mant, exp) = e.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    }
}

fn parse_time(s: &str) -> Option<Rational> {
    let s = s.trim();
    let exact = !s.contains(['e', 'E']) && s.chars().filter(|c| c.is_ascii_digit()).count() <= 17;
    if exact {
        let (neg, body) = match s.strip_prefix('-') {
            Some(b) => (true, b),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if !int.is_empty() && int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            let den = 10i64.checked_pow(frac.len() as u32)?;
            let num: i64 = format!("{int}{frac}").parse().ok()?;
            let r = Ratio::new(if neg { -num } else { num }, den);
            return Some(r);
        }
    }
    let x: f64 = s.parse().ok()?;
    let r = Ratio::<i64>::approximate_float(x)?;
    if r.is_zero() && x != 0.0 {
        return None;
    }
    Some(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_decimal_times() {
        assert_eq!(format_time(Ratio::new(5, 2)), "2.5");
        assert_eq!(format_time(Ratio::new(3, 1)), "3");
        assert_eq!(format_time(Ratio::new(1, 8)), "0.125");
        assert_eq!(format_time(Ratio::new(7, 10)), "0.7");
    }

    #[test]
    fn non_terminating_times_use_17_digits() {
        assert_eq!(format_time(Ratio::new(1, 3)), "0.33333333333333331");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(2.0), "2");
    }

    #[test]
    fn csv_round_trip() {
        let mut t = Trace::default();
        let mut s = Signal::new(DType::F64, 2);
        s.samples.push((Ratio::new(0, 1), vec![0.1, -2.0]));
        s.samples.push((Ratio::new(1, 2), vec![f64::INFINITY, 3.5]));
        t.signals.insert("Out1".into(), s);
        let csv = t.to_csv();
        assert!(csv.starts_with("time,signal,value\n0,Out1,0.1 -2.0\n"));
        let back = Trace::from_csv(&csv).unwrap();
        assert_eq!(back.signals["Out1"].samples, t.signals["Out1"].samples);
    }

    #[test]
    fn empty_trace_is_header_only() {
        assert_eq!(Trace::default().to_csv(), "time,signal,value\n");
    }
}
