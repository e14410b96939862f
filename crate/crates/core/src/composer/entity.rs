use std::any::Any;

use super::observable::Observable;
use super::RandomState;
use crate::modeldom::{ElementRef, ModelError, ModelRoot};
use crate::physics::Physics;
use crate::rlcore::EnvError;

pub trait AsAny: Any {
    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

impl<T: Any> AsAny for T {
    fn as_any(&self) -> &dyn Any {
        self
    }
    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// A reusable building block: a model fragment plus behaviour.
///
/// [`EntityTree`] calls [`Entity::build`] and then
/// [`Entity::build_observables`], once each, when the entity is added.
pub trait Entity: AsAny + Send {
    fn build(&mut self) -> Result<ModelRoot, ModelError>;

    fn build_observables(&mut self) -> Vec<(String, Observable)> {
        Vec::new()
    }

    /// Runs before the model is compiled for a new episode.
    fn initialize_episode_mjcf(&mut self, _model: &mut ModelRoot, _rng: &mut RandomState) -> Result<(), EnvError> {
        Ok(())
    }

    fn initialize_episode(&mut self, _physics: &mut Physics, _rng: &mut RandomState) -> Result<(), EnvError> {
        Ok(())
    }

    fn before_step(&mut self, _physics: &mut Physics, _rng: &mut RandomState) -> Result<(), EnvError> {
        Ok(())
    }

    fn before_substep(&mut self, _physics: &mut Physics, _rng: &mut RandomState) -> Result<(), EnvError> {
        Ok(())
    }

    fn after_substep(&mut self, _physics: &mut Physics, _rng: &mut RandomState) -> Result<(), EnvError> {
        Ok(())
    }

    fn after_step(&mut self, _physics: &mut Physics, _rng: &mut RandomState) -> Result<(), EnvError> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EntityId(usize);

impl EntityId {
    pub const ROOT: EntityId = EntityId(0);
}

struct Node {
    entity: Box<dyn Entity>,
    parent: Option<EntityId>,
    children: Vec<EntityId>,
    worldbody: ElementRef,
    prefix: String,
    observables: Vec<(String, Observable)>,
}

/// Entities arranged like their models: attaching an entity attaches its
/// model into the root model at the same time.
pub struct EntityTree {
    model: ModelRoot,
    nodes: Vec<Node>,
}

impl EntityTree {
    pub fn new(mut root: impl Entity) -> Result<EntityTree, ModelError> {
        let model = root.build()?;
        let observables = root.build_observables();
        Ok(EntityTree {
            nodes: vec![Node {
                entity: Box::new(root),
                parent: None,
                children: Vec::new(),
                worldbody: model.worldbody(),
                prefix: format!("{}/", model.name()),
                observables,
            }],
            model,
        })
    }

    /// Builds `child` and attaches it to `parent`, at `site` if given or
    /// else at the parent's worldbody.
    pub fn attach(
        &mut self,
        parent: EntityId,
        site: Option<ElementRef>,
        mut child: impl Entity,
    ) -> Result<EntityId, ModelError> {
        let host = site.unwrap_or(self.nodes[parent.0].worldbody);
        let model = child.build()?;
        let worldbody = model.worldbody();
        let observables = child.build_observables();
        let frame = self.model.attach(host, model)?;
        let prefix = self.model.full_identifier(frame).unwrap_or_default();
        let id = EntityId(self.nodes.len());
        self.nodes.push(Node {
            entity: Box::new(child),
            parent: Some(parent),
            children: Vec::new(),
            worldbody,
            prefix,
            observables,
        });
        self.nodes[parent.0].children.push(id);
        Ok(id)
    }

    pub fn model(&self) -> &ModelRoot {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut ModelRoot {
        &mut self.model
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parent(&self, id: EntityId) -> Option<EntityId> {
        self.nodes[id.0].parent
    }

    pub fn children(&self, id: EntityId) -> &[EntityId] {
        &self.nodes[id.0].children
    }

    /// Identifier prefix shared by the entity's elements and observables.
    pub fn prefix(&self, id: EntityId) -> &str {
        &self.nodes[id.0].prefix
    }

    pub fn get<E: Entity>(&self, id: EntityId) -> Option<&E> {
        self.nodes.get(id.0)?.entity.as_ref().as_any().downcast_ref()
    }

    pub fn get_mut<E: Entity>(&mut self, id: EntityId) -> Option<&mut E> {
        self.nodes.get_mut(id.0)?.entity.as_mut().as_any_mut().downcast_mut()
    }

    /// Entities in depth-first order from the root, children in attachment order.
    pub fn depth_first(&self) -> Vec<EntityId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![EntityId::ROOT];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.nodes[id.0].children.iter().rev());
        }
        out
    }

    pub(crate) fn take_observables(&mut self) -> Vec<(String, Observable)> {
        let mut out = Vec::new();
        for id in self.depth_first() {
            let node = &mut self.nodes[id.0];
            for (name, obs) in node.observables.drain(..) {
                out.push((format!("{}{name}", node.prefix), obs));
            }
        }
        out
    }

    /// Runs `f` on every entity in depth-first order, annotating failures.
    pub(crate) fn each(
        &mut self,
        callback: &'static str,
        mut f: impl FnMut(&mut dyn Entity) -> Result<(), EnvError>,
    ) -> Result<(), EnvError> {
        for id in self.depth_first() {
            let node = &mut self.nodes[id.0];
            f(node.entity.as_mut()).map_err(|e| EnvError::Callback {
                callback,
                owner: format!("entity '{}'", node.prefix.trim_end_matches('/')),
                source: Box::new(e),
            })?;
        }
        Ok(())
    }

    pub(crate) fn each_mjcf(&mut self, rng: &mut RandomState) -> Result<(), EnvError> {
        for id in self.depth_first() {
            let node = &mut self.nodes[id.0];
            node.entity
                .initialize_episode_mjcf(&mut self.model, rng)
                .map_err(|e| EnvError::Callback {
                    callback: "initialize_episode_mjcf",
                    owner: format!("entity '{}'", node.prefix.trim_end_matches('/')),
                    source: Box::new(e),
                })?;
        }
        Ok(())
    }
}
