use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::CliConfig;
use crate::error::CliError;

pub const TOOL: &str = "factoid";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header embedded in every artifact. Two runs with equal headers produce
/// equal bytes.
pub fn meta(command: &str, cfg: &CliConfig) -> Value {
    json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "config_hash": cfg.hash(),
        "rng_seed": cfg.forge.rng_seed,
        "config": cfg.recorded(),
    })
}

/// One comment line for text outputs.
pub fn text_header(command: &str, cfg: &CliConfig) -> String {
    format!(
        "# {TOOL} {VERSION} {command} config={} seed={}\n",
        &cfg.hash()[..16],
        cfg.forge.rng_seed
    )
}

pub fn json_doc(meta: Value, key: &str, body: Value) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert("meta".into(), meta);
    doc.insert(key.into(), body);
    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("json serializes");
    s.push('\n');
    s
}

/// Write `bytes` to `path` through a sibling temp file, or to `stdout`.
pub fn emit(path: Option<&Path>, stdout: &mut dyn Write, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        None => stdout
            .write_all(bytes)
            .and_then(|_| stdout.flush())
            .map_err(|e| CliError::Internal(format!("stdout: {e}"))),
        Some(p) => atomic_write(p, bytes),
    }
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::input(path.display(), e);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}
