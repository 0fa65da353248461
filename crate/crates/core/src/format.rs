//! Stable number formatting shared by every exporter.

/// Scientific notation with 15 significant digits.
pub fn fmt15(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if x == 0.0 {
        // collapse -0 so output does not depend on the sign of zero
        format!("{:.14e}", 0.0)
    } else {
        format!("{:.14e}", x)
    }
}

/// Round to 15 significant digits (for JSON output).
pub fn round15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    fmt15(x).parse().unwrap_or(x)
}

/// Joins a row of numbers with commas.
pub fn csv_row(values: &[f64]) -> String {
    values.iter().map(|&v| fmt15(v)).collect::<Vec<_>>().join(",")
}

/// Rounds every number in a JSON document to 15 significant digits.
pub fn round_json(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(x) = n.as_f64().filter(|_| !n.is_i64() && !n.is_u64()) {
                if let Some(r) = serde_json::Number::from_f64(round15(x)) {
                    *n = r;
                }
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_json),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}
