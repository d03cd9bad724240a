use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::{Error, Result};

/// `x` rounded to nine significant digits; `-0` becomes `0`.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let r: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Shortest decimal form of the nine-digit rounding of `x`, as it appears
/// in emitted JSON and CSV.
pub fn format_float(x: f64) -> String {
    match Number::from_f64(round_significant(x)) {
        Some(n) => Value::Number(n).to_string(),
        None => "null".into(),
    }
}

/// Rounds every float in `v` in place. Integers are left untouched.
pub fn canonicalize(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            if let Some(r) = Number::from_f64(round_significant(x)) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

/// Pretty-printed JSON with sorted keys, floats at nine significant digits
/// and a trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::InvalidInput(format!("serialize: {e}")))?;
    canonicalize(&mut v);
    let mut text = serde_json::to_string_pretty(&v).expect("value serializes");
    text.push('\n');
    Ok(text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    #[test]
    fn nine_digits() {
        assert_eq!(format_float(0.1 + 0.2), "0.3");
        assert_eq!(format_float(1.0), "1.0");
        assert_eq!(format_float(2.0 / 3.0), "0.666666667");
        assert_eq!(format_float(-0.0), "0.0");
        assert_eq!(format_float(123456789.4), "123456789.0");
        assert_eq!(format_float(1.23456789012e-7), "1.23456789e-7");
    }

    #[test]
    fn keys_sorted_and_integers_kept() {
        let v = json!({"b": 1, "a": [2.5, 3], "c": {"z": 1.0, "y": -0.0}});
        let text = canonical_json(&v).unwrap();
        assert_eq!(
            text,
            "{\n  \"a\": [\n    2.5,\n    3\n  ],\n  \"b\": 1,\n  \"c\": {\n    \"y\": 0.0,\n    \"z\": 1.0\n  }\n}\n"
        );
    }

    proptest! {
        #[test]
        fn rounding_is_idempotent(x in -1e12f64..1e12) {
            let r = round_significant(x);
            prop_assert_eq!(round_significant(r).to_bits(), r.to_bits());
            prop_assert!((r - x).abs() <= 5e-9 * x.abs().max(f64::MIN_POSITIVE));
            let reparsed: f64 = format_float(x).parse().unwrap();
            prop_assert_eq!(reparsed.to_bits(), r.to_bits());
        }
    }
}
