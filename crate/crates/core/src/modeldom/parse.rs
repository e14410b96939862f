use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::debug::{Provenance, SourceSite};
use super::error::{ModelError, Result};
use super::model::{new_node, validate_attr, ModelRoot, MUJOCO, SECTIONS};
use super::schema::{self, AttrKind};
use super::value::{AttrValue, RefTarget};

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = offset - before.rfind('\n').map(|p| p + 1).unwrap_or(0) + 1;
    (line, column)
}

impl ModelRoot {
    /// Parses an XML document. Attachment frames of serialized composite
    /// models come back as ordinary bodies, so the result is structurally
    /// equal to the original but no longer composed.
    pub fn from_xml(text: &str) -> Result<ModelRoot> {
        Parser::new(text).run()
    }

    pub fn from_file(path: &std::path::Path) -> Result<ModelRoot> {
        let text = std::fs::read_to_string(path)?;
        ModelRoot::from_xml(&text)
    }
}

struct Parser<'a> {
    text: &'a str,
    model: ModelRoot,
    lines: Vec<usize>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Parser<'a> {
        let model = ModelRoot::new("");
        let lines = vec![0; model.nodes.len()];
        Parser { text, model, lines }
    }

    fn xml_error(&self, offset: usize, message: String) -> ModelError {
        let (line, column) = line_col(self.text, offset);
        ModelError::Xml { line, column, message }
    }

    fn schema_error(&self, offset: usize, tag: &str, attribute: Option<String>, message: String) -> ModelError {
        let (line, column) = line_col(self.text, offset);
        ModelError::Schema {
            tag: tag.into(),
            attribute,
            location: format!("line {line}, column {column}"),
            message,
        }
    }

    fn run(mut self) -> Result<ModelRoot> {
        let mut reader = Reader::from_str(self.text);
        reader.config_mut().trim_text(true);
        let mut stack: Vec<usize> = Vec::new();
        let mut seen_root = false;
        loop {
            let before = reader.buffer_position() as usize;
            let event = match reader.read_event() {
                Ok(e) => e,
                Err(err) => {
                    let pos = reader.error_position() as usize;
                    return Err(self.xml_error(pos, err.to_string()));
                }
            };
            let start = before + self.text[before..].find('<').unwrap_or(0);
            match event {
                Event::Start(e) => {
                    let index = self.open(&e, &stack, &mut seen_root, start)?;
                    stack.push(index);
                }
                Event::Empty(e) => {
                    self.open(&e, &stack, &mut seen_root, start)?;
                }
                Event::End(_) => {
                    stack.pop();
                }
                Event::Text(t) => {
                    let content = t.unescape().map_err(|e| self.xml_error(start, e.to_string()))?;
                    if !content.trim().is_empty() {
                        return Err(self.xml_error(before, format!("unexpected text '{}'", content.trim())));
                    }
                }
                Event::CData(_) => return Err(self.xml_error(start, "unexpected CDATA section".into())),
                Event::Eof => break,
                _ => {}
            }
        }
        if !stack.is_empty() {
            return Err(self.xml_error(self.text.len(), "unexpected end of document: unclosed element".into()));
        }
        if !seen_root {
            return Err(self.xml_error(0, "document has no <mujoco> root element".into()));
        }
        self.resolve_refs()?;
        Ok(self.model)
    }

    fn open(&mut self, e: &BytesStart, stack: &[usize], seen_root: &mut bool, offset: usize) -> Result<usize> {
        let raw = e.name();
        let tag = std::str::from_utf8(raw.as_ref()).map_err(|err| self.xml_error(offset, err.to_string()))?;
        let spec = schema::tag_spec(tag)
            .ok_or_else(|| self.schema_error(offset, tag, None, "unsupported element kind".into()))?;
        let mut attrs = Vec::new();
        for attr in e.attributes() {
            let attr = attr.map_err(|err| self.xml_error(offset, err.to_string()))?;
            let key = std::str::from_utf8(attr.key.as_ref())
                .map_err(|err| self.xml_error(offset, err.to_string()))?
                .to_string();
            let value = attr
                .unescape_value()
                .map_err(|err| self.xml_error(offset, err.to_string()))?
                .into_owned();
            attrs.push((key, value));
        }

        let Some(&parent) = stack.last() else {
            if tag != "mujoco" || *seen_root {
                return Err(self.schema_error(offset, tag, None, "root element must be a single <mujoco>".into()));
            }
            *seen_root = true;
            for (k, v) in attrs {
                if k == "model" {
                    self.model.set_name(v);
                } else {
                    return Err(self.schema_error(offset, tag, Some(k), "attribute is not allowed for this element".into()));
                }
            }
            return Ok(MUJOCO);
        };

        let parent_node = &self.model.nodes[parent];
        let parent_tag = parent_node.tag();
        if parent_node.in_default || !parent_node.spec.allows_child(tag) {
            let (line, column) = line_col(self.text, offset);
            return Err(ModelError::Schema {
                tag: tag.into(),
                attribute: None,
                location: format!("line {line}, column {column}"),
                message: format!("<{tag}> is not allowed inside <{parent_tag}>"),
            });
        }
        let in_default = parent_tag == "default" && tag != "default";

        // Repeated top-level sections merge into the existing one.
        let index = if parent == MUJOCO {
            SECTIONS.iter().position(|s| *s == tag).unwrap() + 1
        } else {
            let index = self.model.push_parsed(new_node(spec, Some(parent), in_default));
            self.lines.push(offset);
            index
        };

        for (key, value) in attrs {
            if index != MUJOCO && parent == MUJOCO && tag == "default" && key == "class" && value == "main" {
                continue;
            }
            let (attr_spec, value) = validate_attr(spec, in_default, &key, AttrValue::Str(value), true)
                .map_err(|err| match err {
                    ModelError::Schema { message, .. } => self.schema_error(offset, tag, Some(key.clone()), message),
                    other => other,
                })?;
            let is_identity = attr_spec.name == "name" || (tag == "default" && attr_spec.name == "class");
            if is_identity {
                if let (Some(ns), Some(name)) = (self.model.nodes[index].namespace(), value.as_str()) {
                    if self.model.own_name_taken(ns, name) {
                        return Err(ModelError::DuplicateName {
                            namespace: ns,
                            name: name.into(),
                        });
                    }
                }
            }
            let node = &mut self.model.nodes[index];
            match node.attrs.iter_mut().find(|(n, _)| *n == attr_spec.name) {
                Some(slot) => slot.1 = value,
                None => node.attrs.push((attr_spec.name, value)),
            }
        }
        if self.model.debug {
            let (line, column) = line_col(self.text, offset);
            self.model.nodes[index].history.push(Provenance {
                site: SourceSite {
                    file: "<xml>".into(),
                    line: line as u32,
                    column: column as u32,
                },
                attribute: None,
                action: "parse",
            });
        }
        Ok(index)
    }

    /// Turns name references into element handles so that later renames
    /// and attachment keep them valid.
    fn resolve_refs(&mut self) -> Result<()> {
        for i in 0..self.model.nodes.len() {
            for a in 0..self.model.nodes[i].attrs.len() {
                let (name, value) = &self.model.nodes[i].attrs[a];
                let AttrValue::Ref(RefTarget::Name(target)) = value else { continue };
                let spec = self.model.nodes[i].spec.attr(name).unwrap();
                let AttrKind::Ref(ns) = spec.kind else { continue };
                let Some(el) = self.model.find(ns, target) else {
                    let (line, column) = line_col(self.text, self.lines[i]);
                    return Err(ModelError::DanglingReference {
                        namespace: ns,
                        name: target.clone(),
                        location: format!("line {line}, column {column}"),
                    });
                };
                self.model.nodes[i].attrs[a].1 = AttrValue::Ref(RefTarget::Element(el));
            }
        }
        Ok(())
    }
}
