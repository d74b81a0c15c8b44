//! Dataset manifests over the on-disk layout:
//!
//! ```text
//! <root>/clips/<name>/<frame>.png + <frame>.mask.png     (video)
//! <root>/stills/<name>.png + <name>.mask.png             (image)
//! ```
//!
//! Serialized as JSON-lines, one entry per line.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Modality;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Image paths; one per frame for clips, a single element for stills.
    /// Mask paths are derived (`foo.png` -> `foo.mask.png`).
    pub paths: Vec<PathBuf>,
    pub instance_id: String,
    pub frames: Vec<usize>,
    pub modality: Modality,
    pub quality: String,
}

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Writes one JSON object per line.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for entry in &self.entries {
            let line = serde_json::to_string(entry)
                .map_err(|e| Error::Manifest(format!("serialize entry: {e}")))?;
            writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    /// Reads a JSON-lines manifest and verifies every referenced image and
    /// derived mask file exists.
    pub fn load_jsonl(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| {
                Error::Manifest(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            for img in &entry.paths {
                if !img.exists() {
                    return Err(Error::Manifest(format!(
                        "referenced file missing: {}",
                        img.display()
                    )));
                }
                let mask = mask_path_for(img);
                if !mask.exists() {
                    return Err(Error::Manifest(format!(
                        "missing mask for {}: expected {}",
                        img.display(),
                        mask.display()
                    )));
                }
            }
            entries.push(entry);
        }
        Ok(Manifest { entries })
    }
}

/// `foo/bar.png` -> `foo/bar.mask.png`.
pub fn mask_path_for(image: &Path) -> PathBuf {
    let stem = image.file_stem().unwrap_or_default().to_string_lossy();
    image.with_file_name(format!("{stem}.mask.png"))
}

/// Scans dataset roots and produces a deterministic, path-sorted manifest.
///
/// Clips with fewer than two frames and images without a mask sibling are
/// rejected with an error naming the offender.
pub fn build_manifest(roots: &[PathBuf]) -> Result<Manifest> {
    let mut entries = Vec::new();
    for root in roots {
        if !root.is_dir() {
            return Err(Error::Manifest(format!(
                "data root not found: {}",
                root.display()
            )));
        }
        let clips = root.join("clips");
        if clips.is_dir() {
            for clip_dir in sorted_dirs(&clips)? {
                let frames = sorted_images(&clip_dir)?;
                if frames.len() < 2 {
                    return Err(Error::Manifest(format!(
                        "clip {} has {} frame(s); need at least 2",
                        clip_dir.display(),
                        frames.len()
                    )));
                }
                check_masks(&frames)?;
                let name = clip_dir
                    .file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                entries.push(ManifestEntry {
                    frames: (0..frames.len()).collect(),
                    paths: frames,
                    instance_id: name,
                    modality: Modality::Video,
                    quality: "unrated".to_string(),
                });
            }
        }
        let stills = root.join("stills");
        if stills.is_dir() {
            for img in sorted_images(&stills)? {
                check_masks(std::slice::from_ref(&img))?;
                let name = img
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                entries.push(ManifestEntry {
                    paths: vec![img],
                    instance_id: name,
                    frames: vec![0],
                    modality: Modality::Image,
                    quality: "unrated".to_string(),
                });
            }
        }
    }
    entries.sort_by(|a, b| a.paths[0].cmp(&b.paths[0]));
    Ok(Manifest { entries })
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

/// PNG files in a directory, excluding `*.mask.png`, sorted by name.
fn sorted_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        if path.is_file() && name.ends_with(".png") && !name.ends_with(".mask.png") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn check_masks(images: &[PathBuf]) -> Result<()> {
    for img in images {
        let mask = mask_path_for(img);
        if !mask.exists() {
            return Err(Error::Manifest(format!(
                "missing mask for {}: expected {}",
                img.display(),
                mask.display()
            )));
        }
    }
    Ok(())
}
