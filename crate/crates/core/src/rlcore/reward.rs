//! Smooth interval indicators for reward shaping.
//!
//! `tolerance(x)` is 1 inside `[lower, upper]` and falls off with the
//! distance `d` to the interval. The fall-off is a sigmoid of `d / margin`
//! scaled so that it equals `value_at_margin` at `d == margin`:
//!
//! | kind          | f(x), x = d / margin, s chosen so f(1) = v |
//! |---------------|--------------------------------------------|
//! | gaussian      | exp(-(x s)^2 / 2)                          |
//! | hyperbolic    | 1 / cosh(x s)                              |
//! | long_tail     | 1 / ((x s)^2 + 1)                          |
//! | tanh_squared  | 1 - tanh(x s)^2                            |
//! | cosine        | (1 + cos(pi x s)) / 2 for x s < 1, else 0  |
//! | linear        | 1 - x s for x s < 1, else 0                |
//! | quadratic     | 1 - (x s)^2 for x s < 1, else 0            |

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sigmoid {
    Gaussian,
    Hyperbolic,
    LongTail,
    Cosine,
    Linear,
    Quadratic,
    TanhSquared,
}

impl Sigmoid {
    pub const ALL: [Sigmoid; 7] = [
        Sigmoid::Gaussian,
        Sigmoid::Hyperbolic,
        Sigmoid::LongTail,
        Sigmoid::Cosine,
        Sigmoid::Linear,
        Sigmoid::Quadratic,
        Sigmoid::TanhSquared,
    ];

    /// Whether the function reaches exactly zero at a finite distance.
    pub fn finite_support(self) -> bool {
        matches!(self, Sigmoid::Cosine | Sigmoid::Linear | Sigmoid::Quadratic)
    }

    pub fn parse(s: &str) -> Option<Sigmoid> {
        Sigmoid::ALL.into_iter().find(|k| k.to_string() == s)
    }
}

impl fmt::Display for Sigmoid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sigmoid::Gaussian => "gaussian",
            Sigmoid::Hyperbolic => "hyperbolic",
            Sigmoid::LongTail => "long_tail",
            Sigmoid::Cosine => "cosine",
            Sigmoid::Linear => "linear",
            Sigmoid::Quadratic => "quadratic",
            Sigmoid::TanhSquared => "tanh_squared",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ToleranceError {
    #[error("lower bound {lower} exceeds upper bound {upper}")]
    Bounds { lower: f64, upper: f64 },
    #[error("margin must be non-negative, got {0}")]
    Margin(f64),
    #[error("value_at_margin {value} is invalid for {sigmoid}: must be in {range}")]
    ValueAtMargin { sigmoid: Sigmoid, value: f64, range: &'static str },
    #[error("distance must be non-negative, got {0}")]
    Distance(f64),
}

fn check_value_at_margin(kind: Sigmoid, v: f64) -> Result<(), ToleranceError> {
    let (ok, range) = if kind.finite_support() {
        ((0.0..1.0).contains(&v), "[0, 1)")
    } else {
        (v > 0.0 && v < 1.0, "(0, 1)")
    };
    if ok {
        Ok(())
    } else {
        Err(ToleranceError::ValueAtMargin {
            sigmoid: kind,
            value: v,
            range,
        })
    }
}

/// Sigmoid evaluated at a normalized distance `x = d / margin >= 0`.
pub fn sigmoid(kind: Sigmoid, x: f64, value_at_margin: f64) -> Result<f64, ToleranceError> {
    if !(x >= 0.0) {
        return Err(ToleranceError::Distance(x));
    }
    check_value_at_margin(kind, value_at_margin)?;
    let v = value_at_margin;
    Ok(match kind {
        Sigmoid::Gaussian => {
            let s = (-2.0 * v.ln()).sqrt();
            (-0.5 * (x * s).powi(2)).exp()
        }
        Sigmoid::Hyperbolic => {
            let s = (1.0 / v).acosh();
            1.0 / (x * s).cosh()
        }
        Sigmoid::LongTail => {
            let s = (1.0 / v - 1.0).sqrt();
            1.0 / ((x * s).powi(2) + 1.0)
        }
        Sigmoid::TanhSquared => {
            let s = (1.0 - v).sqrt().atanh();
            1.0 - (x * s).tanh().powi(2)
        }
        Sigmoid::Cosine => {
            let sx = x * (2.0 * v - 1.0).acos() / PI;
            if sx < 1.0 {
                (1.0 + (PI * sx).cos()) / 2.0
            } else {
                0.0
            }
        }
        Sigmoid::Linear => {
            let sx = x * (1.0 - v);
            if sx < 1.0 {
                1.0 - sx
            } else {
                0.0
            }
        }
        Sigmoid::Quadratic => {
            let sx = x * (1.0 - v).sqrt();
            if sx < 1.0 {
                1.0 - sx * sx
            } else {
                0.0
            }
        }
    })
}

/// Parameters of a tolerance function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub lower: f64,
    pub upper: f64,
    pub margin: f64,
    pub sigmoid: Sigmoid,
    pub value_at_margin: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            lower: 0.0,
            upper: 0.0,
            margin: 0.0,
            sigmoid: Sigmoid::Gaussian,
            value_at_margin: 0.1,
        }
    }
}

impl Tolerance {
    pub fn new(lower: f64, upper: f64) -> Tolerance {
        Tolerance {
            lower,
            upper,
            ..Tolerance::default()
        }
    }

    pub fn margin(mut self, margin: f64) -> Tolerance {
        self.margin = margin;
        self
    }

    pub fn sigmoid(mut self, sigmoid: Sigmoid) -> Tolerance {
        self.sigmoid = sigmoid;
        self
    }

    pub fn value_at_margin(mut self, v: f64) -> Tolerance {
        self.value_at_margin = v;
        self
    }

    pub fn eval(&self, x: f64) -> Result<f64, ToleranceError> {
        if self.lower > self.upper {
            return Err(ToleranceError::Bounds {
                lower: self.lower,
                upper: self.upper,
            });
        }
        if !(self.margin >= 0.0) {
            return Err(ToleranceError::Margin(self.margin));
        }
        let inside = self.lower <= x && x <= self.upper;
        if self.margin == 0.0 {
            return Ok(if inside { 1.0 } else { 0.0 });
        }
        check_value_at_margin(self.sigmoid, self.value_at_margin)?;
        if inside {
            return Ok(1.0);
        }
        let d = if x < self.lower { self.lower - x } else { x - self.upper };
        sigmoid(self.sigmoid, d / self.margin, self.value_at_margin)
    }

    pub fn eval_all(&self, xs: &[f64]) -> Result<Vec<f64>, ToleranceError> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Shorthand for `Tolerance { .. }.eval(x)`.
pub fn tolerance(
    x: f64,
    bounds: (f64, f64),
    margin: f64,
    sigmoid: Sigmoid,
    value_at_margin: f64,
) -> Result<f64, ToleranceError> {
    Tolerance {
        lower: bounds.0,
        upper: bounds.1,
        margin,
        sigmoid,
        value_at_margin,
    }
    .eval(x)
}
