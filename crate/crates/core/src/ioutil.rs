//! File helpers: line-delimited records, atomic writes, content hashing.

use crate::error::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub fn write_jsonl<T: Serialize>(path: &Path, header: Option<&str>, records: &[T]) -> Result<()> {
    let tmp = tmp_path(path);
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        if let Some(h) = header {
            writeln!(w, "{h}")?;
        }
        for r in records {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path, expect_header: Option<&str>) -> Result<Vec<T>> {
    let r = BufReader::new(fs::File::open(path)?);
    let mut lines = r.lines();
    if let Some(expected) = expect_header {
        let got = lines
            .next()
            .ok_or_else(|| Error::Integrity(format!("{}: empty file", path.display())))??;
        if got != expected {
            return Err(Error::Integrity(format!(
                "{}: bad header {got:?}, expected {expected:?}",
                path.display()
            )));
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| {
            Error::Integrity(format!("{}: corrupt record at line {}: {e}", path.display(), i + 2))
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, serde_json::to_string_pretty(value)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_string_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn tmp_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn sha256_file_hex(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}
