//! Seeded value generators for domain randomisation.
//!
//! A [`Variation`] maps `(initial_value, current_value, random_state)` to a
//! new value. Values are flat `f64` vectors; a scalar is a vector of length 1
//! and broadcasts against longer operands.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use indexmap::IndexMap;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use thiserror::Error;

use super::RandomState;
use crate::rlcore::EnvError;

#[derive(Debug, Error, PartialEq)]
pub enum VariationError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("cannot broadcast lengths {0} and {1}")]
    Broadcast(usize, usize),
}

impl From<VariationError> for EnvError {
    fn from(e: VariationError) -> Self {
        EnvError::Other(Box::new(e))
    }
}

pub type Result<T> = std::result::Result<T, VariationError>;

type CustomFn = dyn Fn(&[f64], &[f64], &mut RandomState) -> Vec<f64> + Send + Sync;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone)]
pub enum Variation {
    Constant(Vec<f64>),
    /// The value before the first variation was applied.
    Initial,
    /// The most recently applied value.
    Current,
    Uniform { low: Box<Variation>, high: Box<Variation> },
    Normal { loc: Box<Variation>, scale: Box<Variation> },
    LogNormal { mean: Box<Variation>, sigma: Box<Variation> },
    UniformChoice(Vec<Vec<f64>>),
    /// A point `(x, y, 0)` at the sampled distance from the origin, in a
    /// uniformly random direction.
    UniformCircle { distance: Box<Variation> },
    /// Base plus a sample; the base is the current value when cumulative.
    Additive { dist: Box<Variation>, cumulative: bool },
    Multiplicative { dist: Box<Variation>, cumulative: bool },
    Binary(Op, Box<Variation>, Box<Variation>),
    Custom(Arc<CustomFn>),
}

impl fmt::Debug for Variation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variation::Constant(v) => write!(f, "Constant({v:?})"),
            Variation::Initial => write!(f, "Initial"),
            Variation::Current => write!(f, "Current"),
            Variation::Uniform { low, high } => write!(f, "Uniform({low:?}, {high:?})"),
            Variation::Normal { loc, scale } => write!(f, "Normal({loc:?}, {scale:?})"),
            Variation::LogNormal { mean, sigma } => write!(f, "LogNormal({mean:?}, {sigma:?})"),
            Variation::UniformChoice(c) => write!(f, "UniformChoice({c:?})"),
            Variation::UniformCircle { distance } => write!(f, "UniformCircle({distance:?})"),
            Variation::Additive { dist, cumulative } => write!(f, "Additive({dist:?}, cumulative={cumulative})"),
            Variation::Multiplicative { dist, cumulative } => {
                write!(f, "Multiplicative({dist:?}, cumulative={cumulative})")
            }
            Variation::Binary(op, a, b) => write!(f, "{op:?}({a:?}, {b:?})"),
            Variation::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl From<f64> for Variation {
    fn from(v: f64) -> Self {
        Variation::Constant(vec![v])
    }
}

impl From<Vec<f64>> for Variation {
    fn from(v: Vec<f64>) -> Self {
        Variation::Constant(v)
    }
}

fn boxed(v: impl Into<Variation>) -> Box<Variation> {
    Box::new(v.into())
}

pub fn uniform(low: impl Into<Variation>, high: impl Into<Variation>) -> Variation {
    Variation::Uniform {
        low: boxed(low),
        high: boxed(high),
    }
}

pub fn normal(loc: impl Into<Variation>, scale: impl Into<Variation>) -> Variation {
    Variation::Normal {
        loc: boxed(loc),
        scale: boxed(scale),
    }
}

/// Zero-mean normal distribution.
pub fn normal_scale(scale: impl Into<Variation>) -> Variation {
    normal(0.0, scale)
}

/// Log-normal distribution with log-mean 0.
pub fn log_normal(sigma: impl Into<Variation>) -> Variation {
    Variation::LogNormal {
        mean: boxed(0.0),
        sigma: boxed(sigma),
    }
}

pub fn uniform_choice(options: Vec<Vec<f64>>) -> Variation {
    Variation::UniformChoice(options)
}

pub fn uniform_circle(distance: impl Into<Variation>) -> Variation {
    Variation::UniformCircle {
        distance: boxed(distance),
    }
}

pub fn additive(dist: impl Into<Variation>) -> Variation {
    Variation::Additive {
        dist: boxed(dist),
        cumulative: false,
    }
}

pub fn multiplicative(dist: impl Into<Variation>) -> Variation {
    Variation::Multiplicative {
        dist: boxed(dist),
        cumulative: false,
    }
}

pub fn custom(f: impl Fn(&[f64], &[f64], &mut RandomState) -> Vec<f64> + Send + Sync + 'static) -> Variation {
    Variation::Custom(Arc::new(f))
}

fn broadcast(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    match (a.len(), b.len()) {
        (n, m) if n == m => Ok(a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()),
        (1, _) => Ok(b.iter().map(|&y| f(a[0], y)).collect()),
        (_, 1) => Ok(a.iter().map(|&x| f(x, b[0])).collect()),
        (n, m) => Err(VariationError::Broadcast(n, m)),
    }
}

/// Output length for a distribution: the longest parameter, or the length
/// of the value being varied when every parameter is scalar.
fn sample_len(params: &[&[f64]], hint: usize) -> Result<usize> {
    let n = params.iter().map(|p| p.len()).max().unwrap_or(1);
    for p in params {
        if p.len() != 1 && p.len() != n {
            return Err(VariationError::Broadcast(p.len(), n));
        }
    }
    Ok(if n == 1 { hint.max(1) } else { n })
}

fn check_scale(what: &str, sd: f64) -> Result<()> {
    if sd >= 0.0 && sd.is_finite() {
        Ok(())
    } else {
        Err(VariationError::Parameter(format!("{what} scale must be non-negative, got {sd}")))
    }
}

fn at(p: &[f64], i: usize) -> f64 {
    if p.len() == 1 {
        p[0]
    } else {
        p[i]
    }
}

impl Variation {
    /// Evaluates with a fresh context: no initial or current value.
    pub fn sample(&self, rng: &mut RandomState) -> Result<Vec<f64>> {
        self.evaluate(&[], &[], rng)
    }

    /// Operands and parameters are evaluated left to right from `rng`.
    pub fn evaluate(&self, initial: &[f64], current: &[f64], rng: &mut RandomState) -> Result<Vec<f64>> {
        let hint = initial.len().max(current.len());
        match self {
            Variation::Constant(v) => Ok(v.clone()),
            Variation::Initial => Ok(initial.to_vec()),
            Variation::Current => Ok(current.to_vec()),
            Variation::Uniform { low, high } => {
                let lo = low.evaluate(initial, current, rng)?;
                let hi = high.evaluate(initial, current, rng)?;
                let n = sample_len(&[&lo, &hi], hint)?;
                (0..n)
                    .map(|i| {
                        let (l, h) = (at(&lo, i), at(&hi, i));
                        if !(h >= l) {
                            return Err(VariationError::Parameter(format!("uniform low {l} exceeds high {h}")));
                        }
                        Ok(if h == l { l } else { rng.gen_range(l..h) })
                    })
                    .collect()
            }
            Variation::Normal { loc, scale } => {
                let mu = loc.evaluate(initial, current, rng)?;
                let sd = scale.evaluate(initial, current, rng)?;
                let n = sample_len(&[&mu, &sd], hint)?;
                (0..n)
                    .map(|i| {
                        check_scale("normal", at(&sd, i))?;
                        let d = Normal::new(at(&mu, i), at(&sd, i))
                            .map_err(|e| VariationError::Parameter(format!("normal: {e}")))?;
                        Ok(d.sample(rng))
                    })
                    .collect()
            }
            Variation::LogNormal { mean, sigma } => {
                let mu = mean.evaluate(initial, current, rng)?;
                let sd = sigma.evaluate(initial, current, rng)?;
                let n = sample_len(&[&mu, &sd], hint)?;
                (0..n)
                    .map(|i| {
                        check_scale("log-normal", at(&sd, i))?;
                        let d = LogNormal::new(at(&mu, i), at(&sd, i))
                            .map_err(|e| VariationError::Parameter(format!("log-normal: {e}")))?;
                        Ok(d.sample(rng))
                    })
                    .collect()
            }
            Variation::UniformChoice(options) => {
                if options.is_empty() {
                    return Err(VariationError::Parameter("no options to choose from".into()));
                }
                Ok(options[rng.gen_range(0..options.len())].clone())
            }
            Variation::UniformCircle { distance } => {
                let d = distance.evaluate(&[], &[], rng)?;
                if d.len() != 1 {
                    return Err(VariationError::Parameter("circle distance must be a scalar".into()));
                }
                let angle = rng.gen_range(0.0..2.0 * PI);
                Ok(vec![d[0] * angle.cos(), d[0] * angle.sin(), 0.0])
            }
            Variation::Additive { dist, cumulative } | Variation::Multiplicative { dist, cumulative } => {
                let base = if *cumulative { current } else { initial };
                let noise = dist.evaluate(base, base, rng)?;
                match self {
                    Variation::Additive { .. } => broadcast(base, &noise, |a, b| a + b),
                    _ => broadcast(base, &noise, |a, b| a * b),
                }
            }
            Variation::Binary(op, a, b) => {
                let x = a.evaluate(initial, current, rng)?;
                let y = b.evaluate(initial, current, rng)?;
                match op {
                    Op::Add => broadcast(&x, &y, |a, b| a + b),
                    Op::Sub => broadcast(&x, &y, |a, b| a - b),
                    Op::Mul => broadcast(&x, &y, |a, b| a * b),
                    Op::Div => broadcast(&x, &y, |a, b| a / b),
                }
            }
            Variation::Custom(f) => Ok(f(initial, current, rng)),
        }
    }

    pub fn cumulative(self) -> Variation {
        match self {
            Variation::Additive { dist, .. } => Variation::Additive { dist, cumulative: true },
            Variation::Multiplicative { dist, .. } => Variation::Multiplicative { dist, cumulative: true },
            other => other,
        }
    }
}

macro_rules! arith {
    ($tr:ident, $m:ident, $op:expr) => {
        impl<R: Into<Variation>> $tr<R> for Variation {
            type Output = Variation;
            fn $m(self, rhs: R) -> Variation {
                Variation::Binary($op, Box::new(self), boxed(rhs))
            }
        }
        impl $tr<Variation> for f64 {
            type Output = Variation;
            fn $m(self, rhs: Variation) -> Variation {
                Variation::Binary($op, boxed(self), Box::new(rhs))
            }
        }
    };
}

arith!(Add, add, Op::Add);
arith!(Sub, sub, Op::Sub);
arith!(Mul, mul, Op::Mul);
arith!(Div, div, Op::Div);

impl Neg for Variation {
    type Output = Variation;
    fn neg(self) -> Variation {
        0.0 - self
    }
}

/// A nested structure of constants and variations.
#[derive(Clone, Debug)]
pub enum Structure {
    Value(Vec<f64>),
    Variation(Variation),
    List(Vec<Structure>),
    Map(IndexMap<String, Structure>),
}

impl From<f64> for Structure {
    fn from(v: f64) -> Self {
        Structure::Value(vec![v])
    }
}

impl From<Variation> for Structure {
    fn from(v: Variation) -> Self {
        Structure::Variation(v)
    }
}

/// Replaces every variation in `s` by a sample, depth first, sharing `rng`.
pub fn evaluate(s: &Structure, rng: &mut RandomState) -> Result<Structure> {
    Ok(match s {
        Structure::Value(v) => Structure::Value(v.clone()),
        Structure::Variation(v) => Structure::Value(v.sample(rng)?),
        Structure::List(items) => Structure::List(items.iter().map(|i| evaluate(i, rng)).collect::<Result<_>>()?),
        Structure::Map(m) => Structure::Map(
            m.iter()
                .map(|(k, v)| Ok((k.clone(), evaluate(v, rng)?)))
                .collect::<Result<_>>()?,
        ),
    })
}
