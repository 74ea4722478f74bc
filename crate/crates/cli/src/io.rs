//! Output helpers: LF-terminated JSONL and atomic file replacement.

use anyhow::{Context, Result};
use serde::Serialize;
use std::path::Path;

/// Write `content` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

/// One line per item, each ending in `\n`.
pub fn jsonl<I, S>(lines: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = String::new();
    for line in lines {
        out.push_str(line.as_ref());
        out.push('\n');
    }
    out
}

pub fn jsonl_of<T: Serialize>(items: &[T]) -> Result<String> {
    let lines: Vec<String> = items
        .iter()
        .map(serde_json::to_string)
        .collect::<Result<_, _>>()?;
    Ok(jsonl(lines))
}

/// Pretty JSON with a trailing newline.
pub fn pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(format!("{}\n", serde_json::to_string_pretty(value)?))
}

/// Rough token count used for cost accounting.
pub fn approx_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}
