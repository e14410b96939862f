//! Flattening of a model tree into a single self-contained document, and its
//! XML serialization.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use super::error::{ModelError, Result};
use super::model::{ModelRoot, ASSET, ACTUATOR, COMPILER, DEFAULT, MUJOCO, OPTION, SENSOR, WORLDBODY};
use super::schema::{AngleAttr, AttrKind, Namespace};
use super::value::{AttrValue, ElementRef, ModelId, RefTarget};

/// One visited element during a document-order traversal.
pub(crate) struct Visit<'a> {
    pub model: &'a ModelRoot,
    pub index: usize,
    pub el: ElementRef,
    /// Identifier prefix of the owning model, e.g. `""` or `"leg/"`.
    pub prefix: &'a str,
}

impl Visit<'_> {
    pub fn namespace(&self) -> Option<Namespace> {
        self.model.nodes[self.index].namespace()
    }

    pub fn identifier(&self) -> Option<String> {
        let node = &self.model.nodes[self.index];
        if let Some(k) = node.frame {
            return Some(format!("{}{}/", self.prefix, self.model.attachments[k].prefix));
        }
        if self.index == DEFAULT {
            return Some(if self.prefix.is_empty() {
                "main".into()
            } else {
                self.prefix.to_string()
            });
        }
        node.namespace()?;
        node.name().map(|n| format!("{}{n}", self.prefix))
    }
}

impl ModelRoot {
    /// Visits every element in flattened document order.
    pub(crate) fn walk(&self, f: &mut dyn FnMut(&Visit)) {
        for index in [MUJOCO, COMPILER, OPTION] {
            f(&self.visit(index, ""));
        }
        for section in [DEFAULT, ASSET, WORLDBODY, ACTUATOR, SENSOR] {
            f(&self.visit(section, ""));
            self.walk_section(section, "", f);
        }
    }

    fn visit<'a>(&'a self, index: usize, prefix: &'a str) -> Visit<'a> {
        Visit {
            model: self,
            index,
            el: self.handle_of(index),
            prefix,
        }
    }

    fn walk_section(&self, section: usize, prefix: &str, f: &mut dyn FnMut(&Visit)) {
        for &c in &self.nodes[section].children {
            self.walk_subtree(c, prefix, f);
        }
        if section == WORLDBODY {
            return;
        }
        for att in &self.attachments {
            let p = format!("{prefix}{}/", att.prefix);
            if section == DEFAULT {
                f(&att.model.visit(DEFAULT, &p));
            }
            att.model.walk_section(section, &p, f);
        }
    }

    fn walk_subtree(&self, index: usize, prefix: &str, f: &mut dyn FnMut(&Visit)) {
        f(&self.visit(index, prefix));
        for &c in &self.nodes[index].children {
            self.walk_subtree(c, prefix, f);
        }
        if let Some(k) = self.nodes[index].frame {
            let att = &self.attachments[k];
            let p = format!("{prefix}{}/", att.prefix);
            att.model.walk_section(WORLDBODY, &p, f);
        }
    }

    /// Produces the canonical single-document form of this model and
    /// everything attached to it.
    pub fn flatten(&self) -> Result<FlatElement> {
        Flattener::new(self)?.run()
    }

    /// Serializes the flattened document.
    pub fn to_xml(&self) -> Result<String> {
        Ok(self.flatten()?.to_xml())
    }
}

/// Element of a flattened document. Attribute values are normalized and all
/// references are replaced by full identifiers. Equality ignores `origin`.
#[derive(Clone, Debug)]
pub struct FlatElement {
    pub tag: &'static str,
    pub attrs: Vec<(&'static str, AttrValue)>,
    pub children: Vec<FlatElement>,
    /// Source element in the model tree, when there is one.
    pub origin: Option<ElementRef>,
}

impl PartialEq for FlatElement {
    fn eq(&self, other: &Self) -> bool {
        self.tag == other.tag && self.attrs == other.attrs && self.children == other.children
    }
}

impl FlatElement {
    pub fn attr(&self, name: &str) -> Option<&AttrValue> {
        self.attrs.iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    pub fn str_attr(&self, name: &str) -> Option<&str> {
        self.attr(name).and_then(AttrValue::as_str)
    }

    pub fn child(&self, tag: &str) -> Option<&FlatElement> {
        self.children.iter().find(|c| c.tag == tag)
    }

    /// Pre-order iteration over this element and its descendants.
    pub fn descendants(&self) -> Vec<&FlatElement> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            let e = out[i];
            out.splice(i + 1..i + 1, e.children.iter());
            i += 1;
        }
        out
    }

    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        write_element(&mut out, self, 0);
        out
    }
}

fn write_element(out: &mut String, e: &FlatElement, depth: usize) {
    let indent = "  ".repeat(depth);
    let _ = write!(out, "{indent}<{}", e.tag);
    for (name, value) in &e.attrs {
        let text = value.to_string();
        let _ = write!(out, " {name}=\"{}\"", quick_xml::escape::escape(text.as_str()));
    }
    let children: Vec<&FlatElement> = e
        .children
        .iter()
        .filter(|c| !(depth == 0 && c.tag != "worldbody" && c.attrs.is_empty() && c.children.is_empty()))
        .collect();
    if children.is_empty() {
        out.push_str("/>\n");
        return;
    }
    out.push_str(">\n");
    for c in children {
        write_element(out, c, depth + 1);
    }
    let _ = writeln!(out, "{indent}</{}>", e.tag);
}

struct Flattener<'a> {
    top: &'a ModelRoot,
    ids: HashMap<ElementRef, String>,
    prefixes: HashMap<ModelId, String>,
    top_radian: bool,
}

impl<'a> Flattener<'a> {
    fn new(top: &'a ModelRoot) -> Result<Flattener<'a>> {
        let mut ids = HashMap::new();
        let mut prefixes = HashMap::new();
        let mut order = Vec::new();
        top.walk(&mut |v| {
            prefixes.entry(v.model.id).or_insert_with(|| v.prefix.to_string());
            if let Some(id) = v.identifier() {
                ids.insert(v.el, id);
            }
            order.push(v.el);
        });
        let mut flattener = Flattener {
            top,
            ids,
            prefixes,
            top_radian: top.uses_radians(),
        };
        flattener.name_referenced(&order)?;
        Ok(flattener)
    }

    /// Gives generated names to unnamed elements that are referenced.
    fn name_referenced(&mut self, order: &[ElementRef]) -> Result<()> {
        let mut targets = Vec::new();
        for &el in order {
            let (model, i) = self.top.locate(el)?;
            let node = &model.nodes[i];
            for (name, value) in &node.attrs {
                if let AttrValue::Ref(target) = value {
                    let spec = node.spec.attr(name).unwrap();
                    let AttrKind::Ref(ns) = spec.kind else { continue };
                    targets.push(self.resolve_ref(model, i, ns, target)?);
                }
            }
        }
        let mut used: HashSet<(ModelId, &'static str, String)> = HashSet::new();
        for target in targets {
            if self.ids.contains_key(&target) {
                continue;
            }
            let (model, i) = self.top.locate(target)?;
            let node = &model.nodes[i];
            let ns = node.namespace().expect("reference targets are identifiable");
            let mut k = 0;
            let name = loop {
                let candidate = format!("unnamed_{}_{k}", node.tag());
                if !model.own_name_taken(ns, &candidate) && !used.contains(&(model.id, ns.as_str(), candidate.clone())) {
                    break candidate;
                }
                k += 1;
            };
            used.insert((model.id, ns.as_str(), name.clone()));
            let prefix = &self.prefixes[&model.id];
            self.ids.insert(target, format!("{prefix}{name}"));
        }
        Ok(())
    }

    fn resolve_ref(&self, model: &ModelRoot, i: usize, ns: Namespace, target: &RefTarget) -> Result<ElementRef> {
        let location = describe(model, i);
        match target {
            RefTarget::Element(e) => {
                if self.top.contains(*e) {
                    Ok(*e)
                } else {
                    Err(ModelError::DanglingReference {
                        namespace: ns,
                        name: "<element outside this model>".into(),
                        location,
                    })
                }
            }
            RefTarget::Name(name) => model.find(ns, name).ok_or_else(|| ModelError::DanglingReference {
                namespace: ns,
                name: name.clone(),
                location,
            }),
        }
    }

    fn run(&self) -> Result<FlatElement> {
        let top = self.top;
        let mut root = FlatElement {
            tag: "mujoco",
            attrs: vec![("model", AttrValue::Str(top.name.clone()))],
            children: Vec::new(),
            origin: Some(top.root()),
        };
        for index in [COMPILER, OPTION] {
            root.children.push(self.node(top, index, "", false)?);
        }
        for section in [DEFAULT, ASSET, WORLDBODY, ACTUATOR, SENSOR] {
            let mut e = self.node_shallow(top, section, "", false)?;
            e.children = self.section(top, section, "")?;
            root.children.push(e);
        }
        Ok(root)
    }

    fn section(&self, model: &ModelRoot, section: usize, prefix: &str) -> Result<Vec<FlatElement>> {
        let mut out = Vec::new();
        for &c in &model.nodes[section].children {
            out.push(self.node(model, c, prefix, false)?);
        }
        if section == WORLDBODY {
            return Ok(out);
        }
        for att in &model.attachments {
            let p = format!("{prefix}{}/", att.prefix);
            if section == DEFAULT {
                let mut class = self.node_shallow(&att.model, DEFAULT, &p, false)?;
                class.children = self.section(&att.model, DEFAULT, &p)?;
                out.push(class);
            } else {
                out.extend(self.section(&att.model, section, &p)?);
            }
        }
        Ok(out)
    }

    fn node(&self, model: &ModelRoot, i: usize, prefix: &str, under_frame: bool) -> Result<FlatElement> {
        let mut e = self.node_shallow(model, i, prefix, under_frame)?;
        let node = &model.nodes[i];
        let under_frame = under_frame || node.frame.is_some();
        for &c in &node.children {
            e.children.push(self.node(model, c, prefix, under_frame)?);
        }
        if let Some(k) = node.frame {
            let att = &model.attachments[k];
            let p = format!("{prefix}{}/", att.prefix);
            e.children.extend(self.section(&att.model, WORLDBODY, &p)?);
        }
        Ok(e)
    }

    fn class_name(&self, prefix: &str, class: &str) -> String {
        match (prefix.is_empty(), class) {
            (true, c) => c.to_string(),
            (false, "main") => prefix.to_string(),
            (false, c) => format!("{prefix}{c}"),
        }
    }

    fn angle_factor(&self, model: &ModelRoot) -> f64 {
        match (model.uses_radians(), self.top_radian) {
            (true, false) => 180.0 / std::f64::consts::PI,
            (false, true) => std::f64::consts::PI / 180.0,
            _ => 1.0,
        }
    }

    /// Element with converted attributes but without children.
    fn node_shallow(&self, model: &ModelRoot, i: usize, prefix: &str, under_frame: bool) -> Result<FlatElement> {
        let node = &model.nodes[i];
        let el = model.handle_of(i);
        let tag = node.tag();
        let mut attrs: Vec<(&'static str, AttrValue)> = Vec::new();

        if let Some(k) = node.frame {
            let id = format!("{prefix}{}/", model.attachments[k].prefix);
            attrs.push(("name", AttrValue::Str(id.clone())));
            attrs.push(("childclass", AttrValue::Str(id)));
        } else if tag == "default" {
            if i == DEFAULT {
                if !prefix.is_empty() {
                    attrs.push(("class", AttrValue::Str(prefix.to_string())));
                }
            } else if let Some(name) = node.name() {
                attrs.push(("class", AttrValue::Str(self.class_name(prefix, name))));
            }
        } else if node.namespace().is_some() {
            if let Some(id) = self.ids.get(&el) {
                attrs.push(("name", AttrValue::Str(id.clone())));
            }
        }

        let factor = self.angle_factor(model);
        let hinge = tag == "joint" && model.joint_type(i) == "hinge";
        for spec in node.spec.attrs {
            if matches!(spec.name, "name" | "childclass") && node.frame.is_some() {
                continue;
            }
            if spec.name == "name" || (tag == "default" && spec.name == "class") {
                continue;
            }
            let Some(value) = node.attr(spec.name) else {
                if spec.name == "class" && under_frame && !node.in_default {
                    // Parent-side elements inside an attachment frame keep their own class.
                    if let Some(cls) = own_class(model, i) {
                        attrs.push(("class", AttrValue::Str(self.class_name(prefix, &cls))));
                    }
                }
                continue;
            };
            let value = match (spec.kind, value) {
                (AttrKind::ClassRef, AttrValue::Str(c)) => AttrValue::Str(self.class_name(prefix, c)),
                (AttrKind::Ref(ns), AttrValue::Ref(target)) => {
                    let target = self.resolve_ref(model, i, ns, target)?;
                    AttrValue::Str(self.ids[&target].clone())
                }
                (_, v) if factor != 1.0 && (spec.angle == AngleAttr::Always || (spec.angle == AngleAttr::HingeAngle && hinge)) => {
                    scale(v, factor)
                }
                (_, v) => v.clone(),
            };
            attrs.push((spec.name, value));
        }
        if tag == "mujoco" {
            attrs = vec![("model", AttrValue::Str(model.name.clone()))];
        }
        Ok(FlatElement {
            tag,
            attrs,
            children: Vec::new(),
            origin: Some(el),
        })
    }
}

/// Default class an element resolves to within its own model, when it has
/// to be made explicit.
fn own_class(model: &ModelRoot, i: usize) -> Option<String> {
    let mut cur = model.nodes[i].parent;
    while let Some(p) = cur {
        let n = &model.nodes[p];
        if n.frame.is_some() {
            return Some("main".into());
        }
        if let Some(c) = n.attr("childclass").and_then(AttrValue::as_str) {
            return Some(c.to_string());
        }
        cur = n.parent;
    }
    None
}

fn scale(v: &AttrValue, factor: f64) -> AttrValue {
    match v {
        AttrValue::Number(x) => AttrValue::Number(x * factor),
        AttrValue::Array(a) => AttrValue::Array(a.iter().map(|x| x * factor).collect()),
        other => other.clone(),
    }
}

pub(crate) fn describe(model: &ModelRoot, i: usize) -> String {
    let node = &model.nodes[i];
    let name = node.name().map(|n| format!(" '{n}'")).unwrap_or_default();
    format!("<{}>{name} in model '{}'", node.tag(), model.name)
}
