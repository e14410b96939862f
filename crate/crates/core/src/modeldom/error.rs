use thiserror::Error;

use super::debug::DEBUG_ENV;
use super::schema::Namespace;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("XML syntax error at line {line}, column {column}: {message}")]
    Xml {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation in <{tag}>{} at {location}: {message}", attribute.as_ref().map(|a| format!(" attribute '{a}'")).unwrap_or_default())]
    Schema {
        tag: String,
        attribute: Option<String>,
        location: String,
        message: String,
    },
    #[error("dangling reference at {location}: no {namespace} named '{name}'")]
    DanglingReference {
        namespace: Namespace,
        name: String,
        location: String,
    },
    #[error("<{child}> is not allowed inside <{parent}>")]
    IllegalChild { parent: String, child: String },
    #[error("duplicate {namespace} identifier '{name}'")]
    DuplicateName { namespace: Namespace, name: String },
    #[error("element does not belong to this model")]
    UnknownElement,
    #[error("attachment host must be a site, body or worldbody, got <{0}>")]
    InvalidAttachmentHost(String),
    #[error("conflicting option '{attribute}' between models: parent has {parent}, child has {child}")]
    OptionConflict {
        attribute: String,
        parent: String,
        child: String,
    },
    #[error("provenance unavailable: the model was built without debug tracking; re-run with {DEBUG_ENV}=1")]
    ProvenanceUnavailable,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
