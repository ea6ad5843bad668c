//! Dataset manifests: CSV with a `path,label,origin` header.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use segfire::dataset::Sample;
use segfire::imaging::load_image;
use segfire::Label;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Original,
    Augmented,
    Segmented,
    Synthetic,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Original => "original",
            Origin::Augmented => "augmented",
            Origin::Segmented => "segmented",
            Origin::Synthetic => "synthetic",
        })
    }
}

impl FromStr for Origin {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "original" => Origin::Original,
            "augmented" => Origin::Augmented,
            "segmented" => Origin::Segmented,
            "synthetic" => Origin::Synthetic,
            other => bail!("unknown origin `{other}`"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// As written in the manifest; relative paths are relative to the
    /// manifest's directory.
    pub path: PathBuf,
    pub label: Label,
    pub origin: Origin,
}

/// What to do with entries whose image file does not exist.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    #[default]
    Fail,
    WarnSkip,
}

#[derive(Serialize, Deserialize)]
struct Record {
    path: String,
    label: String,
    origin: String,
}

const HEADER: [&str; 3] = ["path", "label", "origin"];

pub fn resolve(manifest: &Path, entry: &Path) -> PathBuf {
    if entry.is_absolute() {
        entry.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new("")).join(entry)
    }
}

pub fn load_manifest(path: &Path, missing: MissingPolicy) -> Result<Vec<ManifestEntry>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("cannot open manifest {}", path.display()))?;
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        bail!("{}: header must be `path,label,origin`, found `{}`", path.display(), header.iter().collect::<Vec<_>>().join(","));
    }
    let mut entries = Vec::new();
    for (i, rec) in reader.deserialize::<Record>().enumerate() {
        let line = i + 2;
        let rec = rec.with_context(|| format!("{}:{line}: malformed record", path.display()))?;
        let label: Label = rec.label.parse().with_context(|| format!("{}:{line}", path.display()))?;
        let origin: Origin = rec.origin.parse().with_context(|| format!("{}:{line}", path.display()))?;
        let entry = ManifestEntry { path: PathBuf::from(rec.path), label, origin };
        let file = resolve(path, &entry.path);
        if !file.is_file() {
            match missing {
                MissingPolicy::Fail => bail!("{}:{line}: image {} does not exist", path.display(), file.display()),
                MissingPolicy::WarnSkip => {
                    log::warn!("{}:{line}: skipping missing image {}", path.display(), file.display());
                    continue;
                }
            }
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(HEADER)?;
    for e in entries {
        let p = e.path.to_str().with_context(|| format!("non-UTF-8 path {}", e.path.display()))?;
        w.write_record([p, e.label.as_str(), &e.origin.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Loads every image of a manifest into memory.
pub fn load_samples(manifest: &Path, entries: &[ManifestEntry]) -> Result<Vec<Sample>> {
    entries
        .iter()
        .map(|e| {
            let file = resolve(manifest, &e.path);
            let image = load_image(&file).with_context(|| format!("loading {}", file.display()))?;
            Ok(Sample { image, label: e.label })
        })
        .collect()
}
