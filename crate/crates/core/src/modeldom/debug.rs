//! Mutation-site tracking for composed models.
//!
//! Tracking is off by default. It is switched on for models constructed
//! while the global flag is set, either through [`set_debug`] or the
//! `CTRLFORGE_DEBUG=1` environment variable. `CTRLFORGE_DEBUG_DUMP_DIR`
//! names a directory that receives the full per-element logs whenever
//! compilation fails.

use std::fmt;
use std::panic::Location;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::{Mutex, OnceLock};

pub const DEBUG_ENV: &str = "CTRLFORGE_DEBUG";
pub const DUMP_DIR_ENV: &str = "CTRLFORGE_DEBUG_DUMP_DIR";

// 0 = follow environment, 1 = forced off, 2 = forced on
static DEBUG_OVERRIDE: AtomicU8 = AtomicU8::new(0);
static DUMP_DIR_OVERRIDE: Mutex<Option<PathBuf>> = Mutex::new(None);

fn env_debug() -> bool {
    static FLAG: OnceLock<bool> = OnceLock::new();
    *FLAG.get_or_init(|| {
        std::env::var(DEBUG_ENV)
            .map(|v| v == "1" || v.eq_ignore_ascii_case("true"))
            .unwrap_or(false)
    })
}

/// Forces debug tracking on or off for models constructed afterwards.
pub fn set_debug(enabled: bool) {
    DEBUG_OVERRIDE.store(if enabled { 2 } else { 1 }, Ordering::SeqCst);
}

pub fn debug_enabled() -> bool {
    match DEBUG_OVERRIDE.load(Ordering::SeqCst) {
        1 => false,
        2 => true,
        _ => env_debug(),
    }
}

pub fn set_dump_dir(dir: Option<PathBuf>) {
    *DUMP_DIR_OVERRIDE.lock().unwrap() = dir;
}

pub fn dump_dir() -> Option<PathBuf> {
    if let Some(dir) = DUMP_DIR_OVERRIDE.lock().unwrap().clone() {
        return Some(dir);
    }
    std::env::var_os(DUMP_DIR_ENV).map(PathBuf::from)
}

/// Where a mutation happened.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceSite {
    pub file: String,
    pub line: u32,
    pub column: u32,
}

impl SourceSite {
    pub(crate) fn caller(loc: &'static Location<'static>) -> SourceSite {
        SourceSite {
            file: loc.file().to_string(),
            line: loc.line(),
            column: loc.column(),
        }
    }
}

impl fmt::Display for SourceSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

/// One recorded modification of an element or one of its attributes.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub site: SourceSite,
    /// `None` for element creation, otherwise the attribute touched.
    pub attribute: Option<String>,
    pub action: &'static str,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.attribute {
            Some(attr) => write!(f, "{} '{}' at {}", self.action, attr, self.site),
            None => write!(f, "{} at {}", self.action, self.site),
        }
    }
}
