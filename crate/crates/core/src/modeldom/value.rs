use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use super::schema::{AttrKind, AttrSpec, Namespace};

/// Identity of a `ModelRoot`, stable across attachment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelId(pub(crate) u64);

impl ModelId {
    pub(crate) fn fresh() -> ModelId {
        static NEXT: AtomicU64 = AtomicU64::new(1);
        ModelId(NEXT.fetch_add(1, Ordering::Relaxed))
    }
}

/// Handle to an element. Remains valid (and refers to the same element) when
/// the owning model is attached into another one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementRef {
    pub(crate) model: ModelId,
    pub(crate) index: u32,
}

impl ElementRef {
    pub fn model(self) -> ModelId {
        self.model
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RefTarget {
    Element(ElementRef),
    /// Name relative to the owning model's namespace, resolved on flattening.
    Name(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum AttrValue {
    Str(String),
    Bool(bool),
    Int(i64),
    Number(f64),
    Array(Vec<f64>),
    Ref(RefTarget),
}

impl AttrValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Number(v) => Some(*v),
            AttrValue::Int(v) => Some(*v as f64),
            AttrValue::Array(v) if v.len() == 1 => Some(v[0]),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<Vec<f64>> {
        match self {
            AttrValue::Array(v) => Some(v.clone()),
            AttrValue::Number(v) => Some(vec![*v]),
            AttrValue::Int(v) => Some(vec![*v as f64]),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            AttrValue::Str(s) => Some(s),
            AttrValue::Ref(RefTarget::Name(s)) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            AttrValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_element(&self) -> Option<ElementRef> {
        match self {
            AttrValue::Ref(RefTarget::Element(e)) => Some(*e),
            _ => None,
        }
    }
}

impl From<&str> for AttrValue {
    fn from(v: &str) -> Self {
        AttrValue::Str(v.to_string())
    }
}

impl From<String> for AttrValue {
    fn from(v: String) -> Self {
        AttrValue::Str(v)
    }
}

impl From<f64> for AttrValue {
    fn from(v: f64) -> Self {
        AttrValue::Number(v)
    }
}

impl From<i32> for AttrValue {
    fn from(v: i32) -> Self {
        AttrValue::Int(v as i64)
    }
}

impl From<bool> for AttrValue {
    fn from(v: bool) -> Self {
        AttrValue::Bool(v)
    }
}

impl<const N: usize> From<[f64; N]> for AttrValue {
    fn from(v: [f64; N]) -> Self {
        AttrValue::Array(v.to_vec())
    }
}

impl From<Vec<f64>> for AttrValue {
    fn from(v: Vec<f64>) -> Self {
        AttrValue::Array(v)
    }
}

impl From<&[f64]> for AttrValue {
    fn from(v: &[f64]) -> Self {
        AttrValue::Array(v.to_vec())
    }
}

impl From<ElementRef> for AttrValue {
    fn from(v: ElementRef) -> Self {
        AttrValue::Ref(RefTarget::Element(v))
    }
}

/// Ordered attribute list passed to `ModelRoot::add`.
#[derive(Clone, Debug, Default)]
pub struct Attrs(pub(crate) Vec<(String, AttrValue)>);

impl Attrs {
    pub fn new() -> Attrs {
        Attrs::default()
    }

    pub fn set(mut self, name: &str, value: impl Into<AttrValue>) -> Attrs {
        self.0.push((name.to_string(), value.into()));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn format_number(v: f64) -> String {
    format!("{v}")
}

pub fn format_array(v: &[f64]) -> String {
    v.iter()
        .map(|x| format_number(*x))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format!("'{t}' is not a number"))
        })
        .collect()
}

pub(crate) fn valid_raw_name(name: &str) -> bool {
    !name.is_empty() && !name.contains('/') && !name.chars().any(char::is_whitespace)
}

/// Normalizes a value to the representation the schema prescribes.
/// `allow_slash` admits namespaced identifiers read back from flattened documents.
pub(crate) fn coerce(spec: &AttrSpec, value: AttrValue, allow_slash: bool) -> Result<AttrValue, String> {
    let bad = |v: &AttrValue| format!("value {v:?} does not fit attribute '{}'", spec.name);
    match spec.kind {
        AttrKind::Name | AttrKind::ClassRef => match value {
            AttrValue::Str(s) => {
                let ok = if allow_slash {
                    !s.is_empty() && !s.chars().any(char::is_whitespace)
                } else {
                    valid_raw_name(&s)
                };
                if ok {
                    Ok(AttrValue::Str(s))
                } else {
                    Err(format!("invalid identifier '{s}' for '{}'", spec.name))
                }
            }
            v => Err(bad(&v)),
        },
        AttrKind::Text => match value {
            AttrValue::Str(s) => Ok(AttrValue::Str(s)),
            v => Err(bad(&v)),
        },
        AttrKind::Keyword(options) => match value {
            AttrValue::Str(s) if options.contains(&s.as_str()) => Ok(AttrValue::Str(s)),
            AttrValue::Str(s) => Err(format!(
                "'{s}' is not one of {options:?} for '{}'",
                spec.name
            )),
            v => Err(bad(&v)),
        },
        AttrKind::Bool => match value {
            AttrValue::Bool(b) => Ok(AttrValue::Bool(b)),
            AttrValue::Str(s) if s == "true" => Ok(AttrValue::Bool(true)),
            AttrValue::Str(s) if s == "false" => Ok(AttrValue::Bool(false)),
            v => Err(bad(&v)),
        },
        AttrKind::Int => match value {
            AttrValue::Int(i) => Ok(AttrValue::Int(i)),
            AttrValue::Number(x) if x.fract() == 0.0 && x.is_finite() => Ok(AttrValue::Int(x as i64)),
            AttrValue::Str(s) => s
                .trim()
                .parse::<i64>()
                .map(AttrValue::Int)
                .map_err(|_| format!("'{s}' is not an integer")),
            v => Err(bad(&v)),
        },
        AttrKind::Number => match value {
            AttrValue::Number(x) => Ok(AttrValue::Number(x)),
            AttrValue::Int(i) => Ok(AttrValue::Number(i as f64)),
            AttrValue::Array(v) if v.len() == 1 => Ok(AttrValue::Number(v[0])),
            AttrValue::Str(s) => match parse_numbers(&s)?.as_slice() {
                [x] => Ok(AttrValue::Number(*x)),
                _ => Err(format!("'{}' expects one number, got '{s}'", spec.name)),
            },
            v => Err(bad(&v)),
        },
        AttrKind::Array(len) | AttrKind::VarArray(_, len) => {
            let min = match spec.kind {
                AttrKind::VarArray(min, _) => min,
                _ => len,
            };
            let values = match value {
                AttrValue::Array(v) => v,
                AttrValue::Number(x) => vec![x],
                AttrValue::Int(i) => vec![i as f64],
                AttrValue::Str(s) => parse_numbers(&s)?,
                v => return Err(bad(&v)),
            };
            if values.len() < min || values.len() > len {
                Err(format!(
                    "'{}' expects {} numbers, got {}",
                    spec.name,
                    if min == len {
                        len.to_string()
                    } else {
                        format!("{min} to {len}")
                    },
                    values.len()
                ))
            } else {
                Ok(AttrValue::Array(values))
            }
        }
        AttrKind::Ref(_) => match value {
            AttrValue::Ref(r) => Ok(AttrValue::Ref(r)),
            AttrValue::Str(s) if !s.is_empty() => Ok(AttrValue::Ref(RefTarget::Name(s))),
            v => Err(bad(&v)),
        },
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Str(s) => f.write_str(s),
            AttrValue::Bool(b) => write!(f, "{b}"),
            AttrValue::Int(i) => write!(f, "{i}"),
            AttrValue::Number(x) => f.write_str(&format_number(*x)),
            AttrValue::Array(v) => f.write_str(&format_array(v)),
            AttrValue::Ref(RefTarget::Name(s)) => f.write_str(s),
            AttrValue::Ref(RefTarget::Element(e)) => write!(f, "<element {}:{}>", e.model.0, e.index),
        }
    }
}

pub(crate) fn namespace_of_ref(spec: &AttrSpec) -> Option<Namespace> {
    match spec.kind {
        AttrKind::Ref(ns) => Some(ns),
        _ => None,
    }
}
