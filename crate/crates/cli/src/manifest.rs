//! On-disk dataset layout: `<dir>/manifest.json` plus one XYZ file per cloud.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hitadv_core::classifier::{Dataset, Split};
use hitadv_core::cloud::{load_cloud, save_cloud, CloudFormat};
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Entry {
    pub file: String,
    pub label: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub class_names: Vec<String>,
    pub points_per_cloud: usize,
    pub train: Vec<Entry>,
    pub test: Vec<Entry>,
}

fn write_split(dir: &Path, name: &str, data: &Dataset) -> Result<Vec<Entry>> {
    let sub = dir.join(name);
    fs::create_dir_all(&sub).with_context(|| format!("creating {}", sub.display()))?;
    let mut counters = vec![0usize; data.num_classes()];
    let mut entries = Vec::with_capacity(data.len());
    for (i, cloud) in data.examples().iter().enumerate() {
        let label = data.label(i);
        let file = format!("{name}/{}_{:03}.xyz", data.class_names()[label], counters[label]);
        counters[label] += 1;
        save_cloud(cloud, dir.join(&file), CloudFormat::Xyz)?;
        entries.push(Entry { file, label });
    }
    Ok(entries)
}

pub fn write_dataset(dir: &Path, train: &Dataset, test: &Dataset) -> Result<Manifest> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        class_names: train.class_names().to_vec(),
        points_per_cloud: train.examples().first().map_or(0, |c| c.len()),
        train: write_split(dir, "train", train)?,
        test: write_split(dir, "test", test)?,
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let m: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if m.format_version != MANIFEST_VERSION {
        bail!("{}: manifest version {} is not supported", path.display(), m.format_version);
    }
    Ok(m)
}

pub fn load_split(dir: &Path, split: Split) -> Result<Dataset> {
    let m = read_manifest(dir)?;
    let entries = match split {
        Split::Train => &m.train,
        Split::Test => &m.test,
    };
    let mut clouds = Vec::with_capacity(entries.len());
    for e in entries {
        let path: PathBuf = dir.join(&e.file);
        clouds.push(load_cloud(&path, CloudFormat::Xyz)?.with_label(e.label));
    }
    Ok(Dataset::new(clouds, m.class_names, split)?)
}
