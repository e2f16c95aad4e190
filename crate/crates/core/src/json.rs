//! Float formatting shared by the JSON schemas.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// Serializes an `f64` with 17 significant digits so that every value
/// round-trips bit-exactly and output bytes are platform independent.
pub(crate) struct Sig17(pub f64);

pub(crate) fn format_sig17(x: f64) -> String {
    format!("{x:.16e}")
}

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom("non-finite float"));
        }
        let raw = RawValue::from_string(format_sig17(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

pub(crate) fn serialize_f64_slice<S: Serializer>(values: &[f64], serializer: S) -> Result<S::Ok, S::Error> {
    serializer.collect_seq(values.iter().map(|&v| Sig17(v)))
}

pub(crate) fn serialize_f64<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    Sig17(*value).serialize(serializer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig17_round_trips() {
        for x in [0.0, 1.0, 0.1, 1.0 / 3.0, 2f64.sqrt() / 2.0, 1e-300, -0.25] {
            let s = format_sig17(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let v: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(v.to_bits(), x.to_bits());
        }
    }
}
