//! Dataset directories: `manifest.json`, `config.json` and one directory per
//! sample under `samples/` holding the radar image, targets, visibility mask
//! and raw detections.

use std::fs;
use std::path::{Path, PathBuf};

use radar_ism_core::grid::GridSpec;
use radar_ism_core::sim::{derive_seed, generate_sample, SimConfig, TargetPatch, VisibilityMask};
use serde::{Deserialize, Serialize};

use crate::detections::{read_detections, write_detections, DetectionRecord};
use crate::error::{Error, Result};
use crate::gridfile::GridFile;
use crate::parallel::par_map;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RADAR_FILE: &str = "radar.grid";
pub const TARGET_FILE: &str = "target.grid";
pub const MASK_FILE: &str = "mask.grid";
pub const DETECTIONS_FILE: &str = "detections.jsonl";
const FORMAT: &str = "radar-ism-dataset";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splits {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub master_seed: u64,
    pub grid: GridSpec,
    pub samples: Vec<SampleEntry>,
    pub splits: Splits,
    pub sim: SimConfig,
}

/// Which samples a command works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitSel {
    All,
    Train,
    Val,
    Test,
}

pub fn sample_id(index: usize) -> String {
    format!("{index:06}")
}

/// Contiguous split sizes: `floor(n f_train)`, `floor(n f_val)`, remainder.
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let train = ((n as f64 * fractions[0]).floor() as usize).min(n);
    let val = ((n as f64 * fractions[1]).floor() as usize).min(n - train);
    [train, val, n - train - val]
}

/// Generates `n` samples from `master_seed` and writes them below `dir`.
/// Sample `i` uses `derive_seed(master_seed, i)`, so the output does not
/// depend on the number of threads.
pub fn write_dataset(
    dir: &Path,
    n: usize,
    master_seed: u64,
    sim: &SimConfig,
    fractions: [f64; 3],
    threads: usize,
) -> Result<Manifest> {
    sim.validate()?;
    let samples_dir = dir.join("samples");
    fs::create_dir_all(&samples_dir).map_err(Error::io(&samples_dir))?;
    let samples = par_map(n, threads, |i| {
        let seed = derive_seed(master_seed, i as u64);
        let s = generate_sample(seed, sim)?;
        let id = sample_id(i);
        let d = samples_dir.join(&id);
        fs::create_dir_all(&d).map_err(Error::io(&d))?;
        GridFile::from_radar(&s.radar).write(&d.join(RADAR_FILE))?;
        GridFile::from_target(&s.target).write(&d.join(TARGET_FILE))?;
        GridFile::from_mask(&s.mask).write(&d.join(MASK_FILE))?;
        let recs: Vec<_> = s.detections.iter().map(|d| DetectionRecord::new(0.0, &d.detection)).collect();
        write_detections(&d.join(DETECTIONS_FILE), &recs)?;
        Ok(SampleEntry { id, seed })
    })?;
    let [a, b, _] = split_sizes(n, fractions);
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let manifest = Manifest {
        format: FORMAT.into(),
        master_seed,
        grid: sim.grid,
        samples,
        splits: Splits { train: ids[..a].to_vec(), val: ids[a..a + b].to_vec(), test: ids[a + b..].to_vec() },
        sim: sim.clone(),
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(Error::io(&path))?;
    Ok(manifest)
}

/// Everything stored for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub radar: GridFile,
    pub target: TargetPatch,
    pub mask: VisibilityMask,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    dir: PathBuf,
    manifest: Manifest,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        if manifest.format != FORMAT {
            return Err(Error::format(&path, format!("unknown dataset format {}", manifest.format)));
        }
        Ok(Self { dir: dir.to_path_buf(), manifest })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn sample_dir(&self, id: &str) -> PathBuf {
        self.dir.join("samples").join(id)
    }

    pub fn ids(&self, split: SplitSel) -> Vec<String> {
        let s = &self.manifest.splits;
        match split {
            SplitSel::All => self.manifest.samples.iter().map(|e| e.id.clone()).collect(),
            SplitSel::Train => s.train.clone(),
            SplitSel::Val => s.val.clone(),
            SplitSel::Test => s.test.clone(),
        }
    }

    pub fn seed(&self, id: &str) -> Option<u64> {
        self.manifest.samples.iter().find(|e| e.id == id).map(|e| e.seed)
    }

    pub fn radar(&self, id: &str) -> Result<GridFile> {
        GridFile::read(&self.sample_dir(id).join(RADAR_FILE))
    }

    pub fn target(&self, id: &str) -> Result<TargetPatch> {
        let path = self.sample_dir(id).join(TARGET_FILE);
        GridFile::read(&path)?.to_target().map_err(|m| Error::format(&path, m))
    }

    pub fn mask(&self, id: &str) -> Result<VisibilityMask> {
        let path = self.sample_dir(id).join(MASK_FILE);
        GridFile::read(&path)?.to_mask().map_err(|m| Error::format(&path, m))
    }

    pub fn detections(&self, id: &str) -> Result<Vec<DetectionRecord>> {
        read_detections(&self.sample_dir(id).join(DETECTIONS_FILE))
    }

    pub fn load(&self, id: &str) -> Result<SampleRecord> {
        Ok(SampleRecord { radar: self.radar(id)?, target: self.target(id)?, mask: self.mask(id)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_cover_everything() {
        assert_eq!(split_sizes(500, [0.8, 0.1, 0.1]), [400, 50, 50]);
        assert_eq!(split_sizes(20, [0.8, 0.1, 0.1]), [16, 2, 2]);
        assert_eq!(split_sizes(0, [0.8, 0.1, 0.1]), [0, 0, 0]);
        for n in 0..50 {
            assert_eq!(split_sizes(n, [0.7, 0.2, 0.1]).iter().sum::<usize>(), n);
        }
    }
}
