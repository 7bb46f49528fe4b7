//! Byte-stable CSV formatting.

use std::io::{self, Write};

/// 12 significant digits in scientific notation.
pub fn real(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn optional_real(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

pub fn optional_count(v: Option<u64>) -> String {
    v.map(|n| n.to_string()).unwrap_or_default()
}

/// Writes one record terminated by `'\n'`. Fields never contain commas.
pub fn record<W: Write + ?Sized>(out: &mut W, fields: &[String]) -> io::Result<()> {
    out.write_all(fields.join(",").as_bytes())?;
    out.write_all(b"\n")
}

pub fn header<W: Write + ?Sized>(out: &mut W, names: &[&str]) -> io::Result<()> {
    out.write_all(names.join(",").as_bytes())?;
    out.write_all(b"\n")
}
