use std::path::Path;

use anyhow::{Context, Result};

use ctrlforge::engine::{self, CompiledModel};
use ctrlforge::modeldom::ModelRoot;
use ctrlforge::suite::{self, LoadOptions};

/// Calls `f` on a model read from a file, or on the model tree of a suite
/// task as constructed for seed 0.
pub fn with_model<T>(file: Option<&Path>, task: Option<&str>, f: impl FnOnce(&ModelRoot) -> Result<T>) -> Result<T> {
    match (file, task) {
        (Some(path), None) => {
            let root = ModelRoot::from_file(path).with_context(|| format!("reading {}", path.display()))?;
            f(&root)
        }
        (None, Some(id)) => {
            let env = suite::load_id(id, &LoadOptions::default())?;
            f(env.entities().model())
        }
        _ => anyhow::bail!("give exactly one of a model file or --task"),
    }
}

/// Parses and compiles, returning a one-line summary.
pub fn validate(root: &ModelRoot) -> Result<String> {
    let m: CompiledModel = engine::compile(root)?;
    Ok(format!(
        "ok: model '{}' with {} bodies, {} joints, {} geoms, {} actuators, {} sensors, mass {:.4}",
        m.name,
        m.nbody() - 1,
        m.joints.len(),
        m.geoms.len(),
        m.nu(),
        m.sensors.len(),
        m.total_mass()
    ))
}

/// Canonical flattened XML.
pub fn print(root: &ModelRoot) -> Result<String> {
    Ok(root.to_xml()?)
}
