//! Observables and the buffered, delayed sampling pipeline.
//!
//! Time is counted in physics substeps since the last reset. An observable
//! is sampled at substep 0 and then every `update_interval` substeps. A
//! sample taken at substep `s` becomes visible at `s + delay`. Visible
//! samples enter a FIFO of `buffer_size` entries ordered by the time they
//! became visible. At every control step the buffer is emitted, either
//! stacked or reduced by the aggregator.

use std::collections::VecDeque;

use ndarray::{ArrayD, IxDyn};

use super::variation::Variation;
use super::RandomState;
use crate::modeldom::ElementRef;
use crate::physics::{Physics, PhysicsError};
use crate::rlcore::{Array, ArraySpec, EnvError};

type SourceFn = dyn FnMut(&Physics) -> Result<Vec<f64>, PhysicsError> + Send;
type CorruptFn = dyn FnMut(Vec<f64>, &mut RandomState) -> Vec<f64> + Send;
type DrawFn = dyn FnMut(&mut RandomState) -> usize + Send;
type ReduceFn = dyn Fn(&[Vec<f64>]) -> Vec<f64> + Send;

/// A count that is either fixed or drawn per use from the environment RNG.
pub enum Schedule {
    Fixed(usize),
    Random(Box<DrawFn>),
}

impl Schedule {
    fn draw(&mut self, rng: &mut RandomState) -> usize {
        match self {
            Schedule::Fixed(n) => *n,
            Schedule::Random(f) => f(rng),
        }
    }
}

pub enum Aggregator {
    Mean,
    Min,
    Max,
    Median,
    Sum,
    Custom(Box<ReduceFn>),
}

impl Aggregator {
    fn reduce(&self, items: &[Vec<f64>]) -> Vec<f64> {
        let n = items.first().map_or(0, Vec::len);
        let column = |i: usize| items.iter().map(move |v| v[i]);
        match self {
            Aggregator::Custom(f) => f(items),
            Aggregator::Mean => (0..n).map(|i| column(i).sum::<f64>() / items.len() as f64).collect(),
            Aggregator::Sum => (0..n).map(|i| column(i).sum()).collect(),
            Aggregator::Min => (0..n).map(|i| column(i).fold(f64::INFINITY, f64::min)).collect(),
            Aggregator::Max => (0..n).map(|i| column(i).fold(f64::NEG_INFINITY, f64::max)).collect(),
            Aggregator::Median => (0..n)
                .map(|i| {
                    let mut c: Vec<f64> = column(i).collect();
                    c.sort_by(f64::total_cmp);
                    let m = c.len() / 2;
                    if c.len() % 2 == 1 {
                        c[m]
                    } else {
                        (c[m - 1] + c[m]) / 2.0
                    }
                })
                .collect(),
        }
    }
}

/// A named quantity read from the simulation. Disabled by default.
pub struct Observable {
    source: Box<SourceFn>,
    pub enabled: bool,
    pub update_interval: Schedule,
    pub buffer_size: usize,
    pub delay: Schedule,
    pub corruptor: Option<Box<CorruptFn>>,
    pub aggregator: Option<Aggregator>,
    /// Shape of one sample; inferred from the first sample when unset.
    pub shape: Option<Vec<usize>>,
}

impl Observable {
    pub fn new(source: impl FnMut(&Physics) -> Result<Vec<f64>, PhysicsError> + Send + 'static) -> Observable {
        Observable {
            source: Box::new(source),
            enabled: false,
            update_interval: Schedule::Fixed(1),
            buffer_size: 1,
            delay: Schedule::Fixed(0),
            corruptor: None,
            aggregator: None,
            shape: None,
        }
    }

    /// A bound field of model elements, concatenated in element order.
    pub fn field(elements: Vec<ElementRef>, field: &str) -> Observable {
        let field = field.to_string();
        Observable::new(move |p| {
            let b = p.bind(&elements)?;
            Ok(b.get(p, &field)?.into_iter().flatten().collect())
        })
    }

    pub fn enabled(mut self, on: bool) -> Self {
        self.enabled = on;
        self
    }

    pub fn update_interval(mut self, n: usize) -> Self {
        self.update_interval = Schedule::Fixed(n);
        self
    }

    pub fn buffer_size(mut self, n: usize) -> Self {
        self.buffer_size = n;
        self
    }

    pub fn delay(mut self, n: usize) -> Self {
        self.delay = Schedule::Fixed(n);
        self
    }

    pub fn random_delay(mut self, f: impl FnMut(&mut RandomState) -> usize + Send + 'static) -> Self {
        self.delay = Schedule::Random(Box::new(f));
        self
    }

    pub fn random_update_interval(mut self, f: impl FnMut(&mut RandomState) -> usize + Send + 'static) -> Self {
        self.update_interval = Schedule::Random(Box::new(f));
        self
    }

    pub fn aggregator(mut self, a: Aggregator) -> Self {
        self.aggregator = Some(a);
        self
    }

    pub fn corruptor(mut self, f: impl FnMut(Vec<f64>, &mut RandomState) -> Vec<f64> + Send + 'static) -> Self {
        self.corruptor = Some(Box::new(f));
        self
    }

    /// Corrupts samples with a variation, e.g. additive noise. The clean
    /// sample is passed as both initial and current value.
    pub fn noise(self, v: Variation) -> Self {
        self.corruptor(move |x, rng| v.evaluate(&x, &x, rng).unwrap_or(x))
    }

    pub fn shape(mut self, shape: Vec<usize>) -> Self {
        self.shape = Some(shape);
        self
    }

    /// Raw value from the simulation.
    pub fn observe(&mut self, physics: &Physics) -> Result<Vec<f64>, PhysicsError> {
        (self.source)(physics)
    }
}

#[derive(Clone, Debug)]
struct Sample {
    time: u64,
    arrival: u64,
    value: Vec<f64>,
}

struct Planned {
    time: u64,
    arrival: u64,
}

/// Pipeline state of one enabled observable.
pub(crate) struct Channel {
    pub key: String,
    obs: Observable,
    shape: Vec<usize>,
    strip: bool,
    buffer: VecDeque<Sample>,
    pending: Vec<Sample>,
    plan: Vec<Planned>,
    next_sample: u64,
}

impl Channel {
    pub fn new(key: String, mut obs: Observable, physics: &Physics, strip: bool) -> Result<Channel, EnvError> {
        if obs.buffer_size == 0 {
            return Err(EnvError::Invalid(format!("{key}: buffer_size must be positive")));
        }
        if let Schedule::Fixed(0) = obs.update_interval {
            return Err(EnvError::Invalid(format!("{key}: update_interval must be positive")));
        }
        let shape = match obs.shape.clone() {
            Some(s) => s,
            None => vec![obs.observe(physics)?.len()],
        };
        Ok(Channel {
            key,
            obs,
            shape,
            strip,
            buffer: VecDeque::new(),
            pending: Vec::new(),
            plan: Vec::new(),
            next_sample: 0,
        })
    }

    fn sample_len(&self) -> usize {
        self.shape.iter().product()
    }

    fn take(&mut self, time: u64, arrival: u64, physics: &Physics, rng: &mut RandomState) -> Result<(), EnvError> {
        let mut value = self.obs.observe(physics)?;
        if let Some(c) = &mut self.obs.corruptor {
            value = c(value, rng);
        }
        if value.len() != self.sample_len() {
            return Err(EnvError::Invalid(format!(
                "{}: sample has {} values, expected shape {:?}",
                self.key,
                value.len(),
                self.shape
            )));
        }
        self.pending.push(Sample { time, arrival, value });
        Ok(())
    }

    fn draw_interval(&mut self, rng: &mut RandomState) -> u64 {
        self.obs.update_interval.draw(rng).max(1) as u64
    }

    /// Clears all state and takes the initial sample, visible immediately.
    pub fn reset(&mut self, physics: &Physics, rng: &mut RandomState) -> Result<(), EnvError> {
        self.buffer.clear();
        self.pending.clear();
        self.plan.clear();
        self.take(0, 0, physics, rng)?;
        self.next_sample = self.draw_interval(rng);
        Ok(())
    }

    /// Schedules samples for substeps `(start, end]`, keeping only those
    /// whose values can still be observed.
    pub fn prepare(&mut self, end: u64, rng: &mut RandomState) {
        let mut scheduled = Vec::new();
        while self.next_sample <= end {
            let t = self.next_sample;
            let arrival = t + self.obs.delay.draw(rng) as u64;
            scheduled.push(Planned { time: t, arrival });
            self.next_sample += self.draw_interval(rng);
        }
        // arrivals visible by `end`, newest last
        let mut visible: Vec<(u64, u64)> = self
            .buffer
            .iter()
            .chain(&self.pending)
            .filter(|s| s.arrival <= end)
            .map(|s| (s.arrival, s.time))
            .chain(scheduled.iter().filter(|p| p.arrival <= end).map(|p| (p.arrival, p.time)))
            .collect();
        visible.sort_unstable();
        let keep_from = visible.len().saturating_sub(self.obs.buffer_size);
        let kept = &visible[keep_from..];
        self.plan = scheduled
            .into_iter()
            .filter(|p| p.arrival > end || kept.contains(&(p.arrival, p.time)))
            .collect();
    }

    /// Takes the samples planned for substep `s`.
    pub fn observe(&mut self, s: u64, physics: &Physics, rng: &mut RandomState) -> Result<(), EnvError> {
        while let Some(i) = self.plan.iter().position(|p| p.time == s) {
            let p = self.plan.remove(i);
            self.take(p.time, p.arrival, physics, rng)?;
        }
        Ok(())
    }

    /// Moves samples visible at `now` into the buffer and emits it.
    pub fn output(&mut self, now: u64) -> Array {
        let (mut ready, waiting): (Vec<Sample>, Vec<Sample>) =
            self.pending.drain(..).partition(|s| s.arrival <= now);
        self.pending = waiting;
        ready.sort_by_key(|s| (s.arrival, s.time));
        for s in ready {
            self.buffer.push_back(s);
            if self.buffer.len() > self.obs.buffer_size {
                self.buffer.pop_front();
            }
        }
        let items: Vec<Vec<f64>> = self.buffer.iter().map(|s| s.value.clone()).collect();
        self.emit(&items)
    }

    fn emit(&self, items: &[Vec<f64>]) -> Array {
        if let Some(a) = &self.obs.aggregator {
            let v = if items.is_empty() {
                vec![0.0; self.sample_len()]
            } else {
                a.reduce(items)
            };
            let shape = if v.len() == self.sample_len() {
                self.shape.clone()
            } else {
                vec![v.len()]
            };
            return Array::F64(ArrayD::from_shape_vec(IxDyn(&shape), v).unwrap());
        }
        let n = self.obs.buffer_size;
        if n == 1 && self.strip {
            let v = items.last().cloned().unwrap_or_else(|| vec![0.0; self.sample_len()]);
            return Array::F64(ArrayD::from_shape_vec(IxDyn(&self.shape), v).unwrap());
        }
        // zero padding in front of the oldest sample
        let mut flat = vec![0.0; (n - items.len()) * self.sample_len()];
        for v in items {
            flat.extend_from_slice(v);
        }
        let mut shape = vec![n];
        shape.extend(&self.shape);
        Array::F64(ArrayD::from_shape_vec(IxDyn(&shape), flat).unwrap())
    }

    pub fn spec(&self) -> ArraySpec {
        let empty: Vec<Vec<f64>> = vec![vec![0.0; self.sample_len()]];
        let shape = if self.obs.aggregator.is_some() {
            self.emit(&empty).shape().to_vec()
        } else if self.obs.buffer_size == 1 && self.strip {
            self.shape.clone()
        } else {
            let mut s = vec![self.obs.buffer_size];
            s.extend(&self.shape);
            s
        };
        ArraySpec::new(&self.key, &shape)
    }
}
