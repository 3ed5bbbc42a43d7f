use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use graphrel::data::{read_conllu, read_json_triples, DataFormat, Document};
use graphrel::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Format implied by a file extension: `.conllu` or JSON triples.
pub fn format_of(path: &Path) -> DataFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("conllu") | Some("conll") => DataFormat::Conllu,
        _ => DataFormat::JsonTriples,
    }
}

pub fn read_documents(path: &Path, format: Option<DataFormat>) -> Result<Vec<Document>> {
    if !path.exists() {
        return Err(Error::Usage(format!("{} does not exist", path.display())));
    }
    match format.unwrap_or_else(|| format_of(path)) {
        DataFormat::Conllu => read_conllu(path),
        DataFormat::JsonTriples => read_json_triples(path, None),
    }
}

/// Parses one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::Usage(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("{}: {e}", path.display()),
        })?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p)?;
    }
    Ok(())
}

/// Writes `<path>.meta.json` next to an artifact, recording how it was made.
pub fn write_meta(path: &Path, meta: &serde_json::Value) -> Result<()> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    let target = path.with_file_name(name);
    fs::write(target, serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(())
}

/// Refuses to write over one of the inputs.
pub fn check_distinct(output: &Path, inputs: &[&Path]) -> Result<()> {
    let canon = |p: &Path| fs::canonicalize(p).ok();
    let out = canon(output);
    if out.is_some() && inputs.iter().any(|i| canon(i) == out) {
        return Err(Error::Usage(format!("{} is also an input", output.display())));
    }
    Ok(())
}

/// Writes to stdout; a closed pipe surfaces as an I/O error the caller can
/// treat as a clean stop.
pub fn print_out(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}
