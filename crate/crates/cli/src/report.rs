//! Report serialization: JSON with floats fixed at 12 significant digits,
//! and a plain text table of residuals.

use serde_json::{json, Map, Value};

use fellkms::conv::AlgebraModel;
use fellkms::groupoid::{FiniteGroupoid, UnitMeasure};
use fellkms::linalg::{CMat, C64};
use fellkms::report::{Check, ValidationReport};
use fellkms::states::{State, StateField};

/// Rounds to 12 significant digits; non-finite values become `null`.
pub fn round12(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    if x == 0.0 {
        return json!(0.0);
    }
    let r: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    json!(r)
}

/// Applies [`round12`] to every number in `v`.
pub fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if !(n.is_i64() || n.is_u64()) => round12(x),
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(normalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_json_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&normalize(v.clone())).expect("values serialize");
    s.push('\n');
    s
}

pub fn complex(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn matrix(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn check(c: &Check) -> Value {
    json!({
        "holds": c.holds,
        "max_residual": c.max_residual,
        "witness": c.witness,
    })
}

pub fn violations(r: &ValidationReport) -> Value {
    Value::Array(
        r.violations
            .iter()
            .map(|v| {
                json!({
                    "axiom": v.axiom.name(),
                    "witness": v.witness,
                    "detail": v.detail,
                })
            })
            .collect(),
    )
}

pub fn measure(g: &FiniteGroupoid, mu: &UnitMeasure) -> Value {
    Value::Object(
        g.units()
            .map(|x| (g.unit_name(x).to_string(), json!(mu.at(x))))
            .collect(),
    )
}

/// Densities keyed by arrow name; `names` maps the state's arrows to the
/// ambient groupoid.
pub fn state(g: &FiniteGroupoid, phi: &State, names: &dyn Fn(usize) -> usize) -> Value {
    Value::Object(
        phi.densities()
            .map(|(a, w)| (g.arrow_name(names(a)).to_string(), matrix(w)))
            .collect(),
    )
}

pub fn field(model: &AlgebraModel, field: &StateField) -> Value {
    let g = model.bundle().groupoid();
    let mut out = Map::new();
    for (x, phi) in field.iter() {
        let iso = model.isotropy(x);
        out.insert(
            g.unit_name(x).to_string(),
            state(g, phi, &|a| iso.parent[a]),
        );
    }
    Value::Object(out)
}

/// One row of the text table.
pub struct Row {
    pub label: String,
    pub holds: bool,
    pub residual: f64,
    pub note: String,
}

impl Row {
    pub fn new(
        label: impl Into<String>,
        holds: bool,
        residual: f64,
        note: impl Into<String>,
    ) -> Self {
        Self {
            label: label.into(),
            holds,
            residual,
            note: note.into(),
        }
    }

    pub fn from_check(label: impl Into<String>, c: &Check) -> Self {
        let note = c.witness.as_ref().map(|w| w.join(" ")).unwrap_or_default();
        Self::new(label, c.holds, c.max_residual, note)
    }
}

pub fn table(title: &str, rows: &[Row]) -> String {
    let width = rows
        .iter()
        .map(|r| r.label.chars().count())
        .max()
        .unwrap_or(0)
        .max(5);
    let mut s = format!("{title}\n");
    for r in rows {
        let mark = if r.holds { "ok  " } else { "FAIL" };
        let residual = if r.residual.is_nan() {
            "-".to_string()
        } else {
            format!("{:.3e}", r.residual)
        };
        s.push_str(&format!("  {mark} {:<width$}  {residual:>12}", r.label));
        if !r.note.is_empty() {
            s.push_str(&format!("  {}", r.note));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round12(2.0 / 3.0), json!(0.666666666667));
        assert_eq!(round12(1e-20 / 3.0), json!(3.33333333333e-21));
        assert_eq!(round12(f64::NAN), Value::Null);
    }

    #[test]
    fn integers_untouched_and_keys_sorted() {
        let v = json!({"b": 1, "a": 0.1 + 0.2});
        assert_eq!(to_json_string(&v), "{\n  \"a\": 0.3,\n  \"b\": 1\n}\n");
    }
}
