//! Number formatting and CSV emission.

use std::io::Write;

use crate::CliError;

/// Significant digits in every emitted number.
pub const SIG_DIGITS: usize = 12;

/// `%.12g`-style formatting: fixed notation for exponents in `[-5, 12)`,
/// scientific otherwise, trailing zeros trimmed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG_DIGITS as i32).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.to_string()
    }
}

/// CSV writer with `\n` line endings.
pub struct Table<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> Table<W> {
    pub fn new<S: AsRef<str>>(out: W, header: &[S]) -> Result<Self, CliError> {
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        inner.write_record(header.iter().map(|h| h.as_ref()))?;
        Ok(Self { inner })
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) -> Result<(), CliError> {
        self.inner.write_record(cells.iter().map(|c| c.as_ref()))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush()?;
        Ok(())
    }
}

/// `prefix_1, ..., prefix_n`.
pub fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

pub fn nums(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| fmt_num(x)).collect()
}
