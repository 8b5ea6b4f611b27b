//! Plain-text `key=value` sidecar files and little-endian f32 blobs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sidecar {
    path: PathBuf,
    entries: BTreeMap<String, String>,
}

impl Sidecar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Metadata {
                path: path.to_path_buf(),
                what: format!("line {} is not key=value", n + 1),
            })?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Sidecar {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Metadata {
                path: path.to_path_buf(),
                what: "sidecar file not found".into(),
            },
            _ => Error::io(path, e),
        })?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text: String = self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.entries.get(key).ok_or_else(|| Error::Metadata {
            path: self.path.clone(),
            what: format!("missing key `{key}`"),
        })?;
        raw.parse().map_err(|_| Error::Metadata {
            path: self.path.clone(),
            what: format!("unparsable value `{raw}` for `{key}`"),
        })
    }
}

pub fn write_f32_le(path: &Path, values: impl IntoIterator<Item = f32>) -> Result<()> {
    let bytes: Vec<u8> = values.into_iter().flat_map(f32::to_le_bytes).collect();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_f32_le(path: &Path) -> Result<Vec<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Truncated(format!(
            "{}: {} bytes is not a whole number of f32 values",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// `utt007.ult` -> `utt007.meta`; `utt007.feat` -> `utt007.feat.meta`.
pub fn meta_path(data: &Path, replace_extension: bool) -> PathBuf {
    if replace_extension {
        data.with_extension("meta")
    } else {
        let mut s = data.as_os_str().to_owned();
        s.push(".meta");
        PathBuf::from(s)
    }
}
