//! Dense CSV persistence: one matrix row per line, entries printed like C's
//! `%.17g` so that every value survives a write/read cycle bit for bit.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::DenseMatrix;

#[derive(Debug, Error)]
pub enum TextError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Formats `x` as `printf("%.17g", x)` would.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let mut out = String::with_capacity(26);
    if negative {
        out.push('-');
    }
    if !(-4..17).contains(&exp) {
        let frac = digits[1..].trim_end_matches('0');
        out.push_str(&digits[..1]);
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
        out.push('e');
        out.push(if exp < 0 { '-' } else { '+' });
        out.push_str(&format!("{:02}", exp.abs()));
    } else if exp >= 0 {
        let split = exp as usize + 1;
        out.push_str(&digits[..split]);
        let frac = digits[split..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    } else {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(digits.trim_end_matches('0'));
    }
    out
}

pub fn write_dense_csv<W: Write>(m: &DenseMatrix, mut w: W) -> io::Result<()> {
    let mut line = String::new();
    for r in 0..m.rows() {
        line.clear();
        for (j, &v) in m.row(r).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format_g17(v));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()
}

pub fn read_dense_csv<R: BufRead>(r: R) -> Result<DenseMatrix, TextError> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| TextError::Parse {
                line: idx + 1,
                msg: format!("not a number: {field:?}"),
            })?;
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(TextError::Parse {
                    line: idx + 1,
                    msg: format!("expected {c} fields, found {width}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Ok(DenseMatrix::from_row_major(rows, cols, data).expect("row widths checked"))
}
