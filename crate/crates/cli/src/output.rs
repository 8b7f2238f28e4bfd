//! Deterministic artifact writers.
//!
//! Every float goes through [`fmt17`], so identical results give identical
//! bytes. Files are written to a sibling temporary and renamed into place.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};

use crate::error::CliError;

/// 17 significant digits, positional between `1e-5` and `1e17`, scientific
/// outside. Non-finite values print as `inf`, `-inf`, `nan`.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..17).contains(&exp) {
        return sci;
    }
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let body = if exp < 0 {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    } else {
        let point = exp as usize + 1;
        if point >= digits.len() {
            digits
        } else {
            format!("{}.{}", &digits[..point], &digits[point..])
        }
    };
    format!("{sign}{body}")
}

/// Compact JSON with every float printed by [`fmt17`].
struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        // serde_json routes non-finite floats to null before reaching here
        writer.write_all(fmt17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn write_null<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        CompactFormatter.write_null(writer)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    buf
}

/// CSV text with a header row, `,` separators and LF line endings.
pub fn to_csv(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let err = |source| CliError::Output {
        path: path.clone(),
        source,
    };
    fs::create_dir_all(dir).map_err(err)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(err)?;
    fs::rename(&tmp, &path).map_err(err)?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt17(0.9103125), "0.91031249999999997");
        assert_eq!(fmt17(0.5), "0.50000000000000000");
        assert_eq!(fmt17(-0.1), "-0.10000000000000001");
        assert_eq!(fmt17(1.0), "1.0000000000000000");
        assert_eq!(fmt17(12.5), "12.500000000000000");
        assert_eq!(fmt17(2e-3), "0.0020000000000000000");
        assert_eq!(fmt17(2f64.powi(-24)), "5.9604644775390625e-8");
        assert_eq!(fmt17(1e20), "1.0000000000000000e20");
        assert_eq!(fmt17(0.0), "0");
        assert_eq!(fmt17(f64::INFINITY), "inf");
    }

    #[test]
    fn fmt17_round_trips() {
        for x in [
            0.1,
            1.0 / 3.0,
            2.0f64.sqrt(),
            1e-5,
            123456.789,
            f64::MIN_POSITIVE,
            9.999e16,
        ] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_uses_fixed_digits() {
        let text =
            String::from_utf8(to_json(&serde_json::json!({"a": [0.5, 1], "b": f64::NAN}))).unwrap();
        assert_eq!(text, "{\"a\":[0.50000000000000000,1],\"b\":null}\n");
    }

    #[test]
    fn csv_has_header_and_lf() {
        let bytes = to_csv(&["x", "y"], &[vec!["1".into(), "2".into()]]);
        assert_eq!(bytes, b"x,y\n1,2\n");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.txt", b"one").unwrap();
        write_atomic(dir.path(), "a.txt", b"two").unwrap();
        assert_eq!(fs::read(dir.path().join("a.txt")).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
