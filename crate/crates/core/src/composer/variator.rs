use super::variation::Variation;
use super::RandomState;
use crate::modeldom::{AttrValue, ElementRef, ModelRoot};
use crate::physics::Physics;
use crate::rlcore::EnvError;

struct Entry {
    element: ElementRef,
    attr: String,
    variation: Variation,
    initial: Option<Vec<f64>>,
    current: Option<Vec<f64>>,
}

impl Entry {
    fn new(element: ElementRef, attr: &str, variation: Variation) -> Entry {
        Entry {
            element,
            attr: attr.to_string(),
            variation,
            initial: None,
            current: None,
        }
    }

    fn next(&mut self, observed: Vec<f64>, rng: &mut RandomState) -> Result<Vec<f64>, EnvError> {
        let initial = self.initial.get_or_insert_with(|| observed.clone());
        let current = self.current.get_or_insert(observed);
        let value = self.variation.evaluate(initial, current, rng)?;
        *current = value.clone();
        Ok(value)
    }
}

/// Varies model attributes before compilation. Apply it from
/// `initialize_episode_mjcf`.
#[derive(Default)]
pub struct MjcfVariator {
    entries: Vec<Entry>,
}

impl MjcfVariator {
    pub fn new() -> MjcfVariator {
        MjcfVariator::default()
    }

    pub fn bind_attribute(&mut self, element: ElementRef, attr: &str, variation: Variation) {
        self.entries.push(Entry::new(element, attr, variation));
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn apply(&mut self, model: &mut ModelRoot, rng: &mut RandomState) -> Result<(), EnvError> {
        for e in &mut self.entries {
            let observed = model
                .resolved(e.element, &e.attr)?
                .and_then(|v| v.as_array())
                .unwrap_or_default();
            let value = e.next(observed, rng)?;
            let v: AttrValue = if value.len() == 1 {
                value[0].into()
            } else {
                value.into()
            };
            model.set(e.element, &e.attr, v)?;
        }
        Ok(())
    }
}

/// Varies compiled quantities (model parameters or state) after
/// compilation. Apply it from `initialize_episode`.
#[derive(Default)]
pub struct PhysicsVariator {
    entries: Vec<Entry>,
}

impl PhysicsVariator {
    pub fn new() -> PhysicsVariator {
        PhysicsVariator::default()
    }

    pub fn bind_attribute(&mut self, element: ElementRef, field: &str, variation: Variation) {
        self.entries.push(Entry::new(element, field, variation));
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn apply(&mut self, physics: &mut Physics, rng: &mut RandomState) -> Result<(), EnvError> {
        for e in &mut self.entries {
            let b = physics.bind(&[e.element])?;
            let observed = b.get(physics, &e.attr)?.remove(0);
            let value = e.next(observed, rng)?;
            b.set(physics, &e.attr, &[value])?;
        }
        Ok(())
    }
}
