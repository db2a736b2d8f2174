//! Image/truth collections and their on-disk layout.
//!
//! A dataset directory holds `manifest.json` plus, per entry, `<name>.xig`,
//! `<name>.geom.json` and `<name>.truth.xmk`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagegrid::{
    read_image, read_mask, sidecar_path, write_image, write_mask, Image, MaskMap,
};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct Entry {
    pub name: String,
    /// Carries its detector geometry.
    pub image: Image,
    pub truth: MaskMap,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub image: String,
    pub geometry: String,
    pub truth: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub entries: Vec<ManifestEntry>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.entries {
            e.truth.check_same_dims(e.image.dims())?;
            e.image.require_geometry()?;
        }
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
        }
    }

    /// Writes every entry and the manifest into `dir` (created if missing).
    pub fn save(&self, dir: &Path, profile: Option<&str>, seed: Option<u64>) -> Result<Manifest> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let image = format!("{}.xig", e.name);
            let truth = format!("{}.truth.xmk", e.name);
            let image_path = dir.join(&image);
            write_image(&image_path, &e.image)?;
            write_mask(&dir.join(&truth), &e.truth)?;
            let geometry = sidecar_path(Path::new(&image))
                .to_string_lossy()
                .into_owned();
            entries.push(ManifestEntry {
                name: e.name.clone(),
                image,
                geometry,
                truth,
            });
        }
        let manifest = Manifest {
            name: self.name.clone(),
            profile: profile.map(str::to_string),
            seed,
            entries,
        };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        let mut entries = Vec::with_capacity(manifest.entries.len());
        for m in &manifest.entries {
            let image = read_image(&dir.join(&m.image))?;
            let sidecar = dir.join(&m.geometry);
            let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
            let image = image.with_geometry(crate::geometry::geometry_from_sidecar(&text)?);
            let truth = read_mask(&dir.join(&m.truth))?;
            entries.push(Entry {
                name: m.name.clone(),
                image,
                truth,
            });
        }
        let ds = Dataset {
            name: manifest.name,
            entries,
        };
        ds.validate()?;
        Ok(ds)
    }
}
