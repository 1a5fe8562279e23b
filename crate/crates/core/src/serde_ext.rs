//! JSON helpers for values that may be infinite.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Scalar;

/// `f64` that serializes infinities as the strings `"inf"` / `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtFloat(pub f64);

impl Serialize for ExtFloat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for ExtFloat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Self(v)),
            Raw::Text(s) => match s.as_str() {
                "inf" | "+inf" | "Infinity" => Ok(Self(f64::INFINITY)),
                "-inf" | "-Infinity" => Ok(Self(f64::NEG_INFINITY)),
                "nan" | "NaN" => Ok(Self(f64::NAN)),
                other => Err(serde::de::Error::custom(format!(
                    "expected number or infinity, got '{other}'"
                ))),
            },
        }
    }
}

/// `serialize_with` / `deserialize_with` adapter for scalar fields.
pub mod ext_scalar {
    use super::*;

    pub fn serialize<T: Scalar, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        ExtFloat(v.to_f64_lossy()).serialize(s)
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        let ExtFloat(v) = ExtFloat::deserialize(d)?;
        T::from_f64(v).ok_or_else(|| serde::de::Error::custom("value not representable"))
    }
}
