//! Mutable, composable model documents.
//!
//! A [`ModelRoot`] holds one model. Models are combined with
//! [`ModelRoot::attach`], which moves the child into the parent and places it
//! under a new attachment frame. Identifiers of attached elements are prefixed
//! with the child's name and a `/`. [`ModelRoot::flatten`] produces the
//! canonical single-document form, which is what gets compiled, serialized
//! and compared.

mod debug;
mod error;
mod flat;
mod model;
mod parse;
pub mod schema;
mod value;

pub use debug::{debug_enabled, dump_dir, set_debug, set_dump_dir, Provenance, SourceSite, DEBUG_ENV, DUMP_DIR_ENV};
pub use error::{ModelError, Result};
pub use flat::FlatElement;
pub use model::ModelRoot;
pub use schema::Namespace;
pub use value::{format_array, format_number, AttrValue, Attrs, ElementRef, ModelId, RefTarget};
