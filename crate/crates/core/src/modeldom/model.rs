use std::panic::Location;

use super::debug::{debug_enabled, Provenance, SourceSite};
use super::error::{ModelError, Result};
use super::schema::{self, AttrSpec, Namespace, TagSpec};
use super::value::{coerce, namespace_of_ref, AttrValue, Attrs, ElementRef, ModelId, RefTarget};

pub(crate) const MUJOCO: usize = 0;
pub(crate) const COMPILER: usize = 1;
pub(crate) const OPTION: usize = 2;
pub(crate) const DEFAULT: usize = 3;
pub(crate) const ASSET: usize = 4;
pub(crate) const WORLDBODY: usize = 5;
pub(crate) const ACTUATOR: usize = 6;
pub(crate) const SENSOR: usize = 7;

pub(crate) const SECTIONS: [&str; 7] = [
    "compiler",
    "option",
    "default",
    "asset",
    "worldbody",
    "actuator",
    "sensor",
];

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub spec: &'static TagSpec,
    /// Child of a `<default>` element: an attribute template, not a real element.
    pub in_default: bool,
    pub attrs: Vec<(&'static str, AttrValue)>,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
    pub history: Vec<Provenance>,
    /// Index into `attachments` when this body is an attachment frame.
    pub frame: Option<usize>,
}

impl Node {
    fn new(spec: &'static TagSpec, parent: Option<usize>, in_default: bool) -> Node {
        Node {
            spec,
            in_default,
            attrs: Vec::new(),
            children: Vec::new(),
            parent,
            history: Vec::new(),
            frame: None,
        }
    }

    pub fn tag(&self) -> &'static str {
        self.spec.tag
    }

    pub fn namespace(&self) -> Option<Namespace> {
        if self.in_default {
            None
        } else {
            self.spec.namespace
        }
    }

    pub fn attr(&self, name: &str) -> Option<&AttrValue> {
        self.attrs.iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    pub fn name(&self) -> Option<&str> {
        let key = if self.spec.tag == "default" { "class" } else { "name" };
        self.attr(key).and_then(AttrValue::as_str)
    }

    fn put(&mut self, name: &'static str, value: AttrValue) {
        match self.attrs.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = value,
            None => self.attrs.push((name, value)),
        }
    }
}

#[derive(Debug)]
pub(crate) struct Attachment {
    pub prefix: String,
    pub model: ModelRoot,
}

/// A mutable model document. Attached child models stay separate roots so
/// that element handles and child-scoped queries keep working after
/// composition.
#[derive(Debug)]
pub struct ModelRoot {
    pub(crate) id: ModelId,
    pub(crate) name: String,
    pub(crate) nodes: Vec<Node>,
    pub(crate) attachments: Vec<Attachment>,
    pub(crate) debug: bool,
    revision: u64,
}

impl ModelRoot {
    /// Creates an empty model. Debug tracking follows the global flag at
    /// this moment.
    #[track_caller]
    pub fn new(name: &str) -> ModelRoot {
        ModelRoot::with_debug(name, debug_enabled())
    }

    #[track_caller]
    pub fn with_debug(name: &str, debug: bool) -> ModelRoot {
        let mut nodes = vec![Node::new(schema::tag_spec("mujoco").unwrap(), None, false)];
        for section in SECTIONS {
            nodes.push(Node::new(schema::tag_spec(section).unwrap(), Some(MUJOCO), false));
        }
        nodes[MUJOCO].children = (1..=SECTIONS.len()).collect();
        let mut model = ModelRoot {
            id: ModelId::fresh(),
            name: if name.is_empty() { "model".into() } else { name.into() },
            nodes,
            attachments: Vec::new(),
            debug,
            revision: 0,
        };
        if debug {
            let site = SourceSite::caller(Location::caller());
            for node in &mut model.nodes {
                node.history.push(Provenance {
                    site: site.clone(),
                    attribute: None,
                    action: "create",
                });
            }
        }
        model
    }

    pub fn id(&self) -> ModelId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn debug(&self) -> bool {
        self.debug
    }

    /// Monotone counter that changes whenever this model or any attached
    /// model is mutated.
    pub fn revision(&self) -> u64 {
        self.revision
            + self
                .attachments
                .iter()
                .map(|a| a.model.revision())
                .sum::<u64>()
    }

    fn handle(&self, index: usize) -> ElementRef {
        ElementRef {
            model: self.id,
            index: index as u32,
        }
    }

    pub fn root(&self) -> ElementRef {
        self.handle(MUJOCO)
    }
    pub fn compiler(&self) -> ElementRef {
        self.handle(COMPILER)
    }
    pub fn option(&self) -> ElementRef {
        self.handle(OPTION)
    }
    pub fn default(&self) -> ElementRef {
        self.handle(DEFAULT)
    }
    pub fn asset(&self) -> ElementRef {
        self.handle(ASSET)
    }
    pub fn worldbody(&self) -> ElementRef {
        self.handle(WORLDBODY)
    }
    pub fn actuator(&self) -> ElementRef {
        self.handle(ACTUATOR)
    }
    pub fn sensor(&self) -> ElementRef {
        self.handle(SENSOR)
    }

    /// The model (this one or an attached descendant) with the given id.
    pub fn submodel(&self, id: ModelId) -> Option<&ModelRoot> {
        if self.id == id {
            return Some(self);
        }
        self.attachments.iter().find_map(|a| a.model.submodel(id))
    }

    fn submodel_mut(&mut self, id: ModelId) -> Option<&mut ModelRoot> {
        if self.id == id {
            return Some(self);
        }
        self.attachments
            .iter_mut()
            .find_map(|a| a.model.submodel_mut(id))
    }

    pub fn contains(&self, el: ElementRef) -> bool {
        self.locate(el).is_ok()
    }

    pub(crate) fn locate(&self, el: ElementRef) -> Result<(&ModelRoot, usize)> {
        let model = self.submodel(el.model).ok_or(ModelError::UnknownElement)?;
        let index = el.index as usize;
        if index < model.nodes.len() {
            Ok((model, index))
        } else {
            Err(ModelError::UnknownElement)
        }
    }

    fn locate_mut(&mut self, el: ElementRef) -> Result<(&mut ModelRoot, usize)> {
        let model = self.submodel_mut(el.model).ok_or(ModelError::UnknownElement)?;
        let index = el.index as usize;
        if index < model.nodes.len() {
            Ok((model, index))
        } else {
            Err(ModelError::UnknownElement)
        }
    }

    pub(crate) fn node(&self, el: ElementRef) -> Result<&Node> {
        let (m, i) = self.locate(el)?;
        Ok(&m.nodes[i])
    }

    pub fn tag(&self, el: ElementRef) -> Result<&'static str> {
        Ok(self.node(el)?.tag())
    }

    pub fn namespace_of(&self, el: ElementRef) -> Result<Option<Namespace>> {
        Ok(self.node(el)?.namespace())
    }

    pub fn parent(&self, el: ElementRef) -> Result<Option<ElementRef>> {
        let (m, i) = self.locate(el)?;
        Ok(m.nodes[i].parent.map(|p| m.handle(p)))
    }

    pub fn children(&self, el: ElementRef) -> Result<Vec<ElementRef>> {
        let (m, i) = self.locate(el)?;
        Ok(m.nodes[i].children.iter().map(|&c| m.handle(c)).collect())
    }

    /// Explicitly set attribute value.
    pub fn get(&self, el: ElementRef, attr: &str) -> Result<Option<AttrValue>> {
        let attr = api_attr_name(attr);
        Ok(self.node(el)?.attr(attr).cloned())
    }

    /// Attribute value after default-class resolution within the owning model.
    pub fn resolved(&self, el: ElementRef, attr: &str) -> Result<Option<AttrValue>> {
        let attr = api_attr_name(attr);
        let (m, i) = self.locate(el)?;
        if let Some(v) = m.nodes[i].attr(attr) {
            return Ok(Some(v.clone()));
        }
        if m.nodes[i].in_default {
            // Template elements inherit from the enclosing class chain.
            let tag = m.nodes[i].tag();
            let mut class = m.nodes[i]
                .parent
                .and_then(|p| m.nodes[p].parent)
                .filter(|&p| m.nodes[p].tag() == "default");
            while let Some(c) = class {
                if let Some(v) = m.default_child_attr(c, tag, attr) {
                    return Ok(Some(v));
                }
                class = m.nodes[c].parent.filter(|&p| m.nodes[p].tag() == "default");
            }
            return Ok(None);
        }
        let Some(class_node) = m.class_of(i) else {
            return Ok(None);
        };
        let tag = m.nodes[i].tag();
        let mut class = Some(class_node);
        while let Some(c) = class {
            if let Some(v) = m.default_child_attr(c, tag, attr) {
                return Ok(Some(v));
            }
            class = m.nodes[c].parent.filter(|&p| m.nodes[p].tag() == "default");
        }
        Ok(None)
    }

    fn default_child_attr(&self, class_node: usize, tag: &str, attr: &str) -> Option<AttrValue> {
        self.nodes[class_node]
            .children
            .iter()
            .map(|&c| &self.nodes[c])
            .find(|n| n.tag() == tag)
            .and_then(|n| n.attr(attr).cloned())
    }

    /// Default class node governing element `i`.
    fn class_of(&self, i: usize) -> Option<usize> {
        let node = &self.nodes[i];
        if node.spec.attr("class").is_none() {
            return None;
        }
        if let Some(cls) = node.attr("class").and_then(AttrValue::as_str) {
            return self.find_class(cls);
        }
        let mut cur = node.parent;
        while let Some(p) = cur {
            if let Some(cls) = self.nodes[p].attr("childclass").and_then(AttrValue::as_str) {
                return self.find_class(cls);
            }
            cur = self.nodes[p].parent;
        }
        Some(DEFAULT)
    }

    fn find_class(&self, class: &str) -> Option<usize> {
        if class == "main" {
            return Some(DEFAULT);
        }
        (0..self.nodes.len()).find(|&i| {
            let n = &self.nodes[i];
            n.tag() == "default" && n.attr("class").and_then(AttrValue::as_str) == Some(class)
        })
    }

    fn record(&mut self, index: usize, attribute: Option<&str>, action: &'static str, loc: &'static Location<'static>) {
        if self.debug {
            self.nodes[index].history.push(Provenance {
                site: SourceSite::caller(loc),
                attribute: attribute.map(str::to_string),
                action,
            });
        }
    }

    fn check_ref(&self, spec: &AttrSpec, value: &AttrValue, tag: &str) -> Result<()> {
        if let (Some(ns), AttrValue::Ref(RefTarget::Element(target))) = (namespace_of_ref(spec), value) {
            let found = self.namespace_of(*target).map_err(|_| ModelError::Schema {
                tag: tag.into(),
                attribute: Some(spec.name.into()),
                location: "reference".into(),
                message: "referenced element is not part of this model tree".into(),
            })?;
            if found != Some(ns) {
                return Err(ModelError::Schema {
                    tag: tag.into(),
                    attribute: Some(spec.name.into()),
                    location: "reference".into(),
                    message: format!(
                        "expected a reference to a {ns}, got a {}",
                        found.map(|n| n.as_str()).unwrap_or("non-identifiable element")
                    ),
                });
            }
        }
        Ok(())
    }

    /// Adds a child element. Attribute names follow the XML, except that
    /// `dclass` may be used for `class`.
    #[track_caller]
    pub fn add(&mut self, parent: ElementRef, tag: &str, attrs: Attrs) -> Result<ElementRef> {
        let loc = Location::caller();
        let (parent_tag, parent_in_default) = {
            let node = self.node(parent)?;
            (node.tag(), node.in_default)
        };
        let spec = schema::tag_spec(tag).ok_or_else(|| ModelError::Schema {
            tag: tag.into(),
            attribute: None,
            location: format!("child of <{parent_tag}>"),
            message: "unsupported element kind".into(),
        })?;
        let parent_spec = schema::tag_spec(parent_tag).unwrap();
        if parent_in_default || !parent_spec.allows_child(tag) || parent_tag == "mujoco" {
            return Err(ModelError::IllegalChild {
                parent: parent_tag.into(),
                child: tag.into(),
            });
        }
        let in_default = parent_tag == "default" && tag != "default";
        let mut values = Vec::with_capacity(attrs.0.len());
        for (name, value) in attrs.0 {
            let (attr_spec, value) = validate_attr(spec, in_default, &name, value, false)?;
            self.check_ref(attr_spec, &value, tag)?;
            values.push((attr_spec.name, value));
        }
        let (model, pidx) = self.locate_mut(parent)?;
        let mut node = Node::new(spec, Some(pidx), in_default);
        if let Some(ns) = node_namespace(spec, in_default) {
            let key = if tag == "default" { "class" } else { "name" };
            if let Some((_, v)) = values.iter().find(|(n, _)| *n == key) {
                let name = v.as_str().unwrap_or_default();
                if model.own_name_taken(ns, name) {
                    return Err(ModelError::DuplicateName {
                        namespace: ns,
                        name: name.into(),
                    });
                }
            }
        }
        let attr_names: Vec<&'static str> = values.iter().map(|(n, _)| *n).collect();
        for (n, v) in values {
            node.put(n, v);
        }
        let index = model.nodes.len();
        model.nodes.push(node);
        model.nodes[pidx].children.push(index);
        model.record(index, None, "add", loc);
        for n in attr_names {
            model.record(index, Some(n), "add", loc);
        }
        model.revision += 1;
        Ok(model.handle(index))
    }

    #[track_caller]
    pub fn set(&mut self, el: ElementRef, attr: &str, value: impl Into<AttrValue>) -> Result<()> {
        let loc = Location::caller();
        let (spec, in_default, is_frame) = {
            let n = self.node(el)?;
            (n.spec, n.in_default, n.frame.is_some())
        };
        let (attr_spec, value) = validate_attr(spec, in_default, attr, value.into(), false)?;
        if is_frame && attr_spec.name == "name" {
            return Err(ModelError::Schema {
                tag: spec.tag.into(),
                attribute: Some("name".into()),
                location: "attachment frame".into(),
                message: "attachment frames are named by their prefix".into(),
            });
        }
        self.check_ref(attr_spec, &value, spec.tag)?;
        let (model, i) = self.locate_mut(el)?;
        if attr_spec.name == "name" || (spec.tag == "default" && attr_spec.name == "class") {
            if let (Some(ns), Some(name)) = (model.nodes[i].namespace(), value.as_str()) {
                if model.nodes[i].name() != Some(name) && model.own_name_taken(ns, name) {
                    return Err(ModelError::DuplicateName {
                        namespace: ns,
                        name: name.into(),
                    });
                }
            }
        }
        model.nodes[i].put(attr_spec.name, value);
        model.record(i, Some(attr_spec.name), "set", loc);
        model.revision += 1;
        Ok(())
    }

    #[track_caller]
    pub fn remove_attr(&mut self, el: ElementRef, attr: &str) -> Result<Option<AttrValue>> {
        let loc = Location::caller();
        let attr = api_attr_name(attr);
        let (model, i) = self.locate_mut(el)?;
        let pos = model.nodes[i].attrs.iter().position(|(n, _)| *n == attr);
        let removed = pos.map(|p| model.nodes[i].attrs.remove(p).1);
        if let Some(name) = schema::tag_spec(model.nodes[i].tag()).and_then(|s| s.attr(attr)) {
            model.record(i, Some(name.name), "remove", loc);
        }
        model.revision += 1;
        Ok(removed)
    }

    /// The `<tag>` template in the root default class, created on demand.
    #[track_caller]
    pub fn defaults_for(&mut self, tag: &str) -> Result<ElementRef> {
        let existing = self.nodes[DEFAULT]
            .children
            .iter()
            .copied()
            .find(|&c| self.nodes[c].tag() == tag);
        match existing {
            Some(i) => Ok(self.handle(i)),
            None => self.add(self.default(), tag, Attrs::new()),
        }
    }

    pub(crate) fn own_name_taken(&self, ns: Namespace, name: &str) -> bool {
        if ns == Namespace::Default && name == "main" {
            return true;
        }
        if self.nodes.iter().any(|n| n.namespace() == Some(ns) && n.name() == Some(name)) {
            return true;
        }
        // identifiers owned by attachments
        name.split_once('/')
            .map(|(p, _)| self.attachments.iter().any(|a| a.prefix == p))
            .unwrap_or(false)
    }

    /// Explicitly named or attachment-frame identifier of an element relative
    /// to this model.
    pub fn full_identifier(&self, el: ElementRef) -> Option<String> {
        let mut found = None;
        self.walk(&mut |visit| {
            if visit.el == el {
                found = visit.identifier();
            }
        });
        found
    }

    pub fn find(&self, ns: Namespace, identifier: &str) -> Option<ElementRef> {
        let mut found = None;
        self.walk(&mut |visit| {
            if found.is_none() && visit.namespace() == Some(ns) && visit.identifier().as_deref() == Some(identifier) {
                found = Some(visit.el);
            }
        });
        found
    }

    /// All elements of a namespace in document order, including attached models.
    pub fn find_all(&self, ns: Namespace) -> Vec<ElementRef> {
        let mut out = Vec::new();
        self.walk(&mut |visit| {
            if visit.namespace() == Some(ns) {
                out.push(visit.el);
            }
        });
        out
    }

    /// Attaches `child` at a site, body or the worldbody. Returns the new
    /// attachment frame, which can itself receive children.
    #[track_caller]
    pub fn attach(&mut self, host: ElementRef, child: ModelRoot) -> Result<ElementRef> {
        let loc = Location::caller();
        let host_tag = self.tag(host)?;
        if !matches!(host_tag, "site" | "body" | "worldbody") || self.node(host)?.in_default {
            return Err(ModelError::InvalidAttachmentHost(host_tag.into()));
        }
        self.merge_option(&child)?;
        if host.model != self.id {
            self.submodel_mut(host.model).unwrap().merge_option(&child)?;
        }
        let (model, hidx) = self.locate_mut(host)?;
        let mut prefix = child.name.clone();
        let mut k = 0;
        while model.prefix_taken(&prefix) {
            k += 1;
            prefix = format!("{}_{k}", child.name);
        }
        let (frame_parent, pose) = if host_tag == "site" {
            let site = &model.nodes[hidx];
            let pose: Vec<(&'static str, AttrValue)> = site
                .attrs
                .iter()
                .filter(|(n, _)| matches!(*n, "pos" | "quat" | "euler"))
                .cloned()
                .collect();
            (site.parent.expect("site has a parent"), pose)
        } else {
            (hidx, Vec::new())
        };
        let mut frame = Node::new(schema::tag_spec("body").unwrap(), Some(frame_parent), false);
        frame.attrs = pose;
        frame.frame = Some(model.attachments.len());
        let index = model.nodes.len();
        model.nodes.push(frame);
        model.nodes[frame_parent].children.push(index);
        model.record(index, None, "attach", loc);
        model.attachments.push(Attachment {
            prefix,
            model: child,
        });
        model.revision += 1;
        Ok(model.handle(index))
    }

    fn prefix_taken(&self, prefix: &str) -> bool {
        let lead = format!("{prefix}/");
        self.attachments.iter().any(|a| a.prefix == prefix)
            || self
                .nodes
                .iter()
                .any(|n| n.name().map(|s| s.starts_with(&lead)).unwrap_or(false))
    }

    /// Options set by the child are adopted; options set on both sides must agree.
    fn merge_option(&mut self, child: &ModelRoot) -> Result<()> {
        let child_opts = child.collect_options();
        for (name, value) in child_opts {
            match self.nodes[OPTION].attr(name) {
                Some(existing) if *existing != value => {
                    return Err(ModelError::OptionConflict {
                        attribute: name.into(),
                        parent: existing.to_string(),
                        child: value.to_string(),
                    })
                }
                Some(_) => {}
                None => {
                    self.nodes[OPTION].put(name, value);
                    self.revision += 1;
                }
            }
        }
        Ok(())
    }

    fn collect_options(&self) -> Vec<(&'static str, AttrValue)> {
        self.nodes[OPTION].attrs.clone()
    }

    /// Provenance of the last modification of an element.
    pub fn provenance(&self, el: ElementRef) -> Result<&Provenance> {
        let (m, i) = self.locate(el)?;
        if !m.debug {
            return Err(ModelError::ProvenanceUnavailable);
        }
        m.nodes[i].history.last().ok_or(ModelError::ProvenanceUnavailable)
    }

    /// Provenance of the last modification of one attribute.
    pub fn attr_provenance(&self, el: ElementRef, attr: &str) -> Result<Option<&Provenance>> {
        let attr = api_attr_name(attr);
        let (m, i) = self.locate(el)?;
        if !m.debug {
            return Err(ModelError::ProvenanceUnavailable);
        }
        Ok(m.nodes[i]
            .history
            .iter()
            .rev()
            .find(|p| p.attribute.as_deref() == Some(attr)))
    }

    pub fn history(&self, el: ElementRef) -> Result<&[Provenance]> {
        let (m, i) = self.locate(el)?;
        if !m.debug {
            return Err(ModelError::ProvenanceUnavailable);
        }
        Ok(&m.nodes[i].history)
    }

    /// Writes one log file per element with its full modification history.
    /// Returns the number of files written.
    pub fn dump_provenance(&self, dir: &std::path::Path) -> Result<usize> {
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        self.walk(&mut |visit| {
            let node = &visit.model.nodes[visit.index];
            if !visit.model.debug {
                return;
            }
            let id = visit.identifier().unwrap_or_else(|| "unnamed".into());
            let lines: Vec<String> = node.history.iter().map(|p| p.to_string()).collect();
            entries.push((node.tag(), id, lines));
        });
        for (seq, (tag, id, lines)) in entries.iter().enumerate() {
            let file = dir.join(format!("{seq:04}_{tag}_{}.log", id.replace('/', "__")));
            let mut body = format!("<{tag}> {id}\n");
            for line in lines {
                body.push_str(line);
                body.push('\n');
            }
            std::fs::write(file, body)?;
        }
        Ok(entries.len())
    }

    /// Compiler angle unit is radians.
    pub(crate) fn uses_radians(&self) -> bool {
        self.nodes[COMPILER].attr("angle").and_then(AttrValue::as_str) == Some("radian")
    }

    /// Resolved joint type of a joint (or joint template) node.
    pub(crate) fn joint_type(&self, index: usize) -> String {
        self.resolved(self.handle(index), "type")
            .ok()
            .flatten()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_else(|| "hinge".into())
    }

    pub(crate) fn push_parsed(&mut self, node: Node) -> usize {
        let index = self.nodes.len();
        if let Some(p) = node.parent {
            self.nodes[p].children.push(index);
        }
        self.nodes.push(node);
        index
    }

    pub(crate) fn set_name(&mut self, name: String) {
        self.name = name;
    }

    pub(crate) fn handle_of(&self, index: usize) -> ElementRef {
        self.handle(index)
    }
}

pub(crate) fn api_attr_name(attr: &str) -> &str {
    if attr == "dclass" {
        "class"
    } else {
        attr
    }
}

pub(crate) fn node_namespace(spec: &TagSpec, in_default: bool) -> Option<Namespace> {
    if in_default {
        None
    } else {
        spec.namespace
    }
}

pub(crate) fn new_node(spec: &'static TagSpec, parent: Option<usize>, in_default: bool) -> Node {
    Node::new(spec, parent, in_default)
}

pub(crate) fn validate_attr(
    spec: &'static TagSpec,
    in_default: bool,
    name: &str,
    value: AttrValue,
    allow_slash: bool,
) -> Result<(&'static AttrSpec, AttrValue)> {
    let name = api_attr_name(name);
    let attr_spec = if in_default {
        schema::default_attr(spec.tag, name)
    } else {
        spec.attr(name)
    };
    let attr_spec = attr_spec.ok_or_else(|| ModelError::Schema {
        tag: spec.tag.into(),
        attribute: Some(name.into()),
        location: if in_default { "default class".into() } else { "element".into() },
        message: "attribute is not allowed for this element".into(),
    })?;
    let value = coerce(attr_spec, value, allow_slash).map_err(|message| ModelError::Schema {
        tag: spec.tag.into(),
        attribute: Some(name.into()),
        location: "element".into(),
        message,
    })?;
    Ok((attr_spec, value))
}
