//! Dataset manifests: UTF-8, one `relative/path<TAB>label` record per line,
//! each line terminated by `\n`. Paths are relative to the manifest's
//! directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRecord {
    pub path: String,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleManifest {
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.tsv";

fn check_label(label: &str) -> std::result::Result<(), String> {
    if label.is_empty() {
        return Err("empty label".into());
    }
    if let Some(c) = label.chars().find(|c| !c.is_ascii_digit()) {
        return Err(format!("label '{label}' contains non-digit '{c}'"));
    }
    Ok(())
}

impl SampleManifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn image_path(&self, index: usize) -> PathBuf {
        self.root.join(&self.records[index].path)
    }

    pub fn to_text(&self) -> String {
        self.records
            .iter()
            .map(|r| format!("{}\t{}\n", r.path, r.label))
            .collect()
    }

    /// Parses manifest text. `root` is where relative paths resolve; file
    /// existence is not checked here.
    pub fn parse(text: &str, root: &Path, source: &str) -> Result<Self> {
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let parse_err = |message: String| Error::Parse {
                file: source.to_string(),
                line: line_no,
                message,
            };
            let (path, label) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected '<path>\\t<label>'".into()))?;
            if label.contains('\t') {
                return Err(parse_err("more than one tab".into()));
            }
            if path.is_empty() {
                return Err(parse_err("empty path".into()));
            }
            check_label(label).map_err(|m| Error::Label(format!("{source}:{line_no}: {m}")))?;
            if !seen.insert(path.to_string()) {
                return Err(parse_err(format!("duplicate path '{path}'")));
            }
            records.push(ManifestRecord {
                path: path.to_string(),
                label: label.to_string(),
            });
        }
        Ok(SampleManifest {
            root: root.to_path_buf(),
            records,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Reads a manifest and checks that every referenced image exists.
pub fn load_manifest(path: &Path) -> Result<SampleManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = SampleManifest::parse(&text, &root, &path.display().to_string())?;
    for i in 0..manifest.len() {
        let p = manifest.image_path(i);
        if !p.is_file() {
            return Err(Error::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "image listed in manifest not found"),
            ));
        }
    }
    Ok(manifest)
}
