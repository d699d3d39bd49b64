//! JSON output with fixed 17-significant-digit floats.
//!
//! `serde_json` prints the shortest round-trip representation of a float; the
//! formatter here prints every `f64` as `d.dddddddddddddddde±x`, giving
//! byte-stable reports and exact decimal round-trips.

use std::io::{self, Write};

use serde::{de::DeserializeOwned, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};

struct FixedFloats<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with fixed 17-digit floats.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = FixedFloats {
        inner: PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn from_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(Error::from)
}

pub fn write_file<T: Serialize + ?Sized>(path: &std::path::Path, value: &T) -> Result<()> {
    let text = to_string(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_file<T: DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn floats_use_seventeen_digits() {
        let s = to_string(&vec![0.1f64, -2.5, 0.0]).unwrap();
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("-2.5000000000000000e0"));
        assert!(s.contains("0.0000000000000000e0"));
    }

    #[test]
    fn non_finite_becomes_null() {
        let s = to_string(&vec![f64::NAN]).unwrap();
        assert!(s.contains("null"));
    }

    proptest! {
        #[test]
        fn decimal_round_trip_is_exact(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = to_string(&x).unwrap();
            let back: f64 = from_str(&s).unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
