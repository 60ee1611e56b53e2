//! Attribute values and their canonical textual form.
//!
//! Rationals are kept normalized by `num_rational::BigRational` (gcd 1,
//! positive denominator) and maps are ordered by key, so derived equality
//! is canonical equality.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// The value sorts an attribute may be declared with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    Int,
    Rational,
    Bool,
    String,
    List,
    Map,
}

impl Sort {
    pub fn from_name(name: &str) -> Option<Sort> {
        Some(match name {
            "int" => Sort::Int,
            "rational" => Sort::Rational,
            "bool" => Sort::Bool,
            "string" => Sort::String,
            "list" => Sort::List,
            "map" => Sort::Map,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Sort::Int => "int",
            Sort::Rational => "rational",
            Sort::Bool => "bool",
            Sort::String => "string",
            Sort::List => "list",
            Sort::Map => "map",
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Value {
    Int(BigInt),
    Rational(BigRational),
    Bool(bool),
    Str(String),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Int(BigInt::from(n))
    }

    pub fn ratio(num: i64, den: i64) -> Value {
        Value::Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn sort(&self) -> Sort {
        match self {
            Value::Int(_) => Sort::Int,
            Value::Rational(_) => Sort::Rational,
            Value::Bool(_) => Sort::Bool,
            Value::Str(_) => Sort::String,
            Value::List(_) => Sort::List,
            Value::Map(_) => Sort::Map,
        }
    }

    /// Converts to the representation used for an attribute of `sort`.
    /// Integers widen to rationals; every other mismatch is refused.
    pub fn coerce(self, sort: Sort) -> Result<Value, Value> {
        match (self, sort) {
            (Value::Int(n), Sort::Rational) => Ok(Value::Rational(BigRational::from_integer(n))),
            (v, s) if v.sort() == s => Ok(v),
            (v, _) => Err(v),
        }
    }

    /// Numeric view, if the value is an int or a rational.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self {
            Value::Int(n) => Some(BigRational::from_integer(n.clone())),
            Value::Rational(r) => Some(r.clone()),
            _ => None,
        }
    }

    /// Length of the canonical rendering; used as a rough "how much does the
    /// user have to read" measure.
    pub fn rendered_len(&self) -> usize {
        self.to_string().chars().count()
    }

    /// JSON encoding used on the wire: numbers as canonical strings
    /// (`"3/8"`, `"-2"`), strings and booleans natively, lists as arrays and
    /// maps as objects.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::Value as J;
        match self {
            Value::Int(_) | Value::Rational(_) => J::String(self.to_string()),
            Value::Bool(b) => J::Bool(*b),
            Value::Str(s) => J::String(s.clone()),
            Value::List(items) => J::Array(items.iter().map(Value::to_json).collect()),
            Value::Map(m) => J::Object(m.iter().map(|(k, v)| (k.clone(), v.to_json())).collect()),
        }
    }
}

impl serde::Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// Renders `p/q`, or `p` when the denominator is 1.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses the canonical rational form (`p/q` or `p`).
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    match text.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(BigRational::new(n, d))
            }
        }
        None => Some(BigRational::from_integer(text.parse().ok()?)),
    }
}

/// `2^exp` as an exact rational; `None` when the exponent is absurdly large.
pub fn pow2(exp: &BigInt) -> Option<BigRational> {
    let e = exp.to_i64()?;
    if e.unsigned_abs() > 1 << 16 {
        return None;
    }
    let mag = BigInt::one() << (e.unsigned_abs() as usize);
    Some(if e >= 0 {
        BigRational::from_integer(mag)
    } else {
        BigRational::new(BigInt::one(), mag)
    })
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Rational(r) => f.write_str(&format_rational(r)),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Map(m) => {
                f.write_str("{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k:?}: {v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Added,
    Removed,
    Changed,
}

/// One edit at a path. Paths use `.key` for map entries and `[i]` for list
/// positions; the empty path is the value itself.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Change {
    pub path: String,
    pub kind: ChangeKind,
    pub old: Option<String>,
    pub new: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffReport {
    pub changes: Vec<Change>,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }
}

impl fmt::Display for DiffReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.changes.is_empty() {
            return f.write_str("no differences");
        }
        for (i, c) in self.changes.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            let path = if c.path.is_empty() { "(root)" } else { &c.path };
            match c.kind {
                ChangeKind::Added => write!(f, "+ {path}: {}", c.new.as_deref().unwrap_or(""))?,
                ChangeKind::Removed => write!(f, "- {path}: {}", c.old.as_deref().unwrap_or(""))?,
                ChangeKind::Changed => write!(
                    f,
                    "~ {path}: {} -> {}",
                    c.old.as_deref().unwrap_or(""),
                    c.new.as_deref().unwrap_or("")
                )?,
            }
        }
        Ok(())
    }
}

/// Structural difference between two values. Maps are compared key by key
/// and lists position by position; anything else that differs is reported
/// as a single change at its path.
pub fn diff_values(a: &Value, b: &Value) -> DiffReport {
    let mut report = DiffReport::default();
    diff_into(a, b, String::new(), &mut report.changes);
    report
}

fn diff_into(a: &Value, b: &Value, path: String, out: &mut Vec<Change>) {
    match (a, b) {
        (Value::Map(ma), Value::Map(mb)) => {
            let keys: std::collections::BTreeSet<&String> = ma.keys().chain(mb.keys()).collect();
            for k in keys {
                let p = format!("{path}.{k}");
                match (ma.get(k), mb.get(k)) {
                    (Some(x), Some(y)) => diff_into(x, y, p, out),
                    (Some(x), None) => out.push(Change {
                        path: p,
                        kind: ChangeKind::Removed,
                        old: Some(x.to_string()),
                        new: None,
                    }),
                    (None, Some(y)) => out.push(Change {
                        path: p,
                        kind: ChangeKind::Added,
                        old: None,
                        new: Some(y.to_string()),
                    }),
                    (None, None) => unreachable!(),
                }
            }
        }
        (Value::List(la), Value::List(lb)) => {
            for i in 0..la.len().max(lb.len()) {
                let p = format!("{path}[{i}]");
                match (la.get(i), lb.get(i)) {
                    (Some(x), Some(y)) => diff_into(x, y, p, out),
                    (Some(x), None) => out.push(Change {
                        path: p,
                        kind: ChangeKind::Removed,
                        old: Some(x.to_string()),
                        new: None,
                    }),
                    (None, Some(y)) => out.push(Change {
                        path: p,
                        kind: ChangeKind::Added,
                        old: None,
                        new: Some(y.to_string()),
                    }),
                    (None, None) => unreachable!(),
                }
            }
        }
        _ if a == b => {}
        _ => out.push(Change {
            path,
            kind: ChangeKind::Changed,
            old: Some(a.to_string()),
            new: Some(b.to_string()),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(entries: &[(&str, i64)]) -> Value {
        Value::Map(entries.iter().map(|(k, v)| (k.to_string(), Value::int(*v))).collect())
    }

    #[test]
    fn rationals_render_normalized() {
        assert_eq!(Value::ratio(6, 16).to_string(), "3/8");
        assert_eq!(Value::ratio(4, -8).to_string(), "-1/2");
        assert_eq!(Value::ratio(0, 5).to_string(), "0");
        assert_eq!(Value::ratio(10, 5).to_string(), "2");
    }

    #[test]
    fn rational_text_round_trips() {
        for (n, d) in [(3, 8), (-5, 3), (0, 1), (7, 1)] {
            let v = Value::ratio(n, d);
            let Value::Rational(r) = &v else { unreachable!() };
            assert_eq!(parse_rational(&v.to_string()).as_ref(), Some(r));
        }
        assert_eq!(parse_rational("1/0"), None);
    }

    #[test]
    fn pow2_negative_exponent() {
        assert_eq!(pow2(&BigInt::from(-3)), Some(BigRational::new(1.into(), 8.into())));
        assert_eq!(pow2(&BigInt::from(0)), Some(BigRational::one()));
        assert_eq!(pow2(&BigInt::from(1_000_000)), None);
    }

    #[test]
    fn int_widens_to_rational_only() {
        assert_eq!(Value::int(2).coerce(Sort::Rational), Ok(Value::ratio(2, 1)));
        assert!(Value::Bool(true).coerce(Sort::Int).is_err());
    }

    #[test]
    fn diff_added_map_key() {
        let d = diff_values(&map(&[("x", 1)]), &map(&[("x", 1), ("y", 2)]));
        assert_eq!(
            d.changes,
            vec![Change { path: ".y".into(), kind: ChangeKind::Added, old: None, new: Some("2".into()) }]
        );
    }

    #[test]
    fn diff_scalar_changes_root() {
        let d = diff_values(&Value::ratio(3, 8), &Value::ratio(5, 8));
        assert_eq!(d.changes.len(), 1);
        assert_eq!(d.changes[0].path, "");
        assert_eq!(d.changes[0].old.as_deref(), Some("3/8"));
        assert_eq!(d.changes[0].new.as_deref(), Some("5/8"));
    }

    #[test]
    fn diff_identity_is_empty() {
        let v = Value::List(vec![map(&[("a", 1)]), Value::Str("s".into())]);
        assert!(diff_values(&v, &v).is_empty());
        assert_eq!(diff_values(&v, &v).to_string(), "no differences");
    }

    #[test]
    fn diff_nested_paths() {
        let a = Value::Map([("t".to_string(), Value::List(vec![Value::int(1), Value::int(2)]))].into());
        let b = Value::Map([("t".to_string(), Value::List(vec![Value::int(1)]))].into());
        let d = diff_values(&a, &b);
        assert_eq!(d.changes[0].path, ".t[1]");
        assert_eq!(d.changes[0].kind, ChangeKind::Removed);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn rational_text_round_trips(n in any::<i64>(), d in any::<i64>().prop_filter("nonzero", |d| *d != 0)) {
            let r = BigRational::new(n.into(), d.into());
            prop_assert_eq!(parse_rational(&format_rational(&r)), Some(r));
        }

        #[test]
        fn pow2_inverts(e in -200i64..200) {
            let a = pow2(&BigInt::from(e)).unwrap();
            let b = pow2(&BigInt::from(-e)).unwrap();
            prop_assert_eq!(a * b, BigRational::from_integer(1.into()));
        }

        #[test]
        fn diff_of_equal_values_is_empty(entries in proptest::collection::btree_map("[a-z]{1,3}", any::<i32>(), 0..6)) {
            let v = Value::Map(entries.into_iter().map(|(k, x)| (k, Value::int(x.into()))).collect());
            prop_assert!(diff_values(&v, &v).is_empty());
        }
    }
}
