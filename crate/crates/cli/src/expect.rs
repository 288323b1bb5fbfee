//! Assertions on report fields, addressed by JSON pointer.

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Conditions on one field. All given conditions must hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    /// `[target, tolerance]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near: Option<[f64; 2]>,
    /// Compare the absolute value in the numeric conditions.
    #[serde(default)]
    pub abs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub field: String,
    pub expect: Expect,
    pub actual: Value,
    pub pass: bool,
}

impl Expect {
    fn holds(&self, actual: &Value) -> bool {
        if let Some(eq) = &self.eq {
            if actual != eq {
                return false;
            }
        }
        if self.min.is_none() && self.max.is_none() && self.near.is_none() {
            return true;
        }
        // numeric conditions apply to every number in the field, so arrays can be bounded at once
        let numbers = numbers(actual);
        if numbers.is_empty() {
            return false;
        }
        numbers.into_iter().all(|v| {
            let v = if self.abs { v.abs() } else { v };
            self.min.map_or(true, |m| v >= m) && self.max.map_or(true, |m| v <= m) && self.near.map_or(true, |[t, tol]| (v - t).abs() <= tol)
        })
    }
}

fn numbers(v: &Value) -> Vec<f64> {
    match v {
        Value::Number(n) => n.as_f64().into_iter().collect(),
        Value::Array(items) => items.iter().flat_map(numbers).collect(),
        _ => vec![],
    }
}

/// Evaluates every expectation against `result`; missing fields fail.
pub fn evaluate<'a>(result: &Value, expect: impl IntoIterator<Item = (&'a String, &'a Expect)>) -> Vec<CheckOutcome> {
    expect
        .into_iter()
        .map(|(field, e)| {
            let actual = result.pointer(field).cloned().unwrap_or(Value::Null);
            CheckOutcome { field: field.clone(), expect: e.clone(), pass: actual != Value::Null && e.holds(&actual), actual }
        })
        .collect()
}
