//! Serde helpers writing `f64` as JSON numbers with 17 significant digits.
//!
//! Seventeen digits identify every finite double uniquely, so a value read back
//! from an artifact is bit-identical to the one that was written.

use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub(crate) fn to_number(x: f64) -> Option<serde_json::Number> {
    if !x.is_finite() {
        return None;
    }
    format!("{x:.16e}").parse().ok()
}

pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    to_number(*x)
        .ok_or_else(|| S::Error::custom(format!("non-finite value {x}")))?
        .serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let x = f64::deserialize(d)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(D::Error::custom("non-finite value"))
    }
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let nums = xs
            .iter()
            .map(|&x| to_number(x).ok_or_else(|| S::Error::custom(format!("non-finite value {x}"))))
            .collect::<Result<Vec<_>, _>>()?;
        nums.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let xs = Vec::<f64>::deserialize(d)?;
        if xs.iter().all(|x| x.is_finite()) {
            Ok(xs)
        } else {
            Err(D::Error::custom("non-finite value"))
        }
    }
}
