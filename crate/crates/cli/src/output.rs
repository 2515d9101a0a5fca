use std::io::Write;
use std::path::Path;

use crate::error::{CliError, Result};

/// Prints `content` and, with an output directory, also writes it there.
pub fn emit(out: Option<&Path>, name: &str, content: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    let newline = if content.ends_with('\n') { "" } else { "\n" };
    let _ = write!(stdout, "{content}{newline}").and_then(|()| stdout.flush());
    if let Some(dir) = out {
        write(&dir.join(name), content)?;
    }
    Ok(())
}

pub fn write(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn json(value: &serde_json::Value) -> String {
    serde_json::to_string_pretty(value).expect("json renders")
}
