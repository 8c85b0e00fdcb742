use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use radar_ism::dataset::{write_dataset, Dataset, SplitSel};
use radar_ism::gridfile::GridFile;
use radar_ism_core::sim::{generate_sample, SimConfig};

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("dataset").join(name);
    let _ = fs::remove_dir_all(&dir);
    dir
}

#[test]
fn stored_samples_match_the_generator() {
    let dir = scratch("match");
    let sim = SimConfig::default();
    let m = write_dataset(&dir, 6, 99, &sim, [0.5, 0.25, 0.25], 1).unwrap();
    assert_eq!(m.splits.train.len() + m.splits.val.len() + m.splits.test.len(), 6);
    let ds = Dataset::open(&dir).unwrap();
    for e in &ds.manifest().samples {
        let s = generate_sample(e.seed, &sim).unwrap();
        let rec = ds.load(&e.id).unwrap();
        assert_eq!(rec.target, s.target);
        assert_eq!(rec.mask, s.mask);
        assert_eq!(rec.radar, GridFile::from_radar(&s.radar));
        let dets = ds.detections(&e.id).unwrap();
        assert_eq!(dets.len(), s.detections.len());
        for (a, b) in dets.iter().zip(&s.detections) {
            assert_eq!(a.detection(), b.detection);
        }
    }
    assert_eq!(ds.ids(SplitSel::All).len(), 6);
}

#[test]
fn output_is_independent_of_thread_count() {
    let sim = SimConfig::default();
    let a = scratch("t1");
    let b = scratch("t3");
    write_dataset(&a, 15, 5, &sim, [0.8, 0.1, 0.1], 1).unwrap();
    write_dataset(&b, 15, 5, &sim, [0.8, 0.1, 0.1], 3).unwrap();
    let ds = Dataset::open(&a).unwrap();
    for id in ds.ids(SplitSel::All) {
        for f in ["radar.grid", "target.grid", "mask.grid", "detections.jsonl"] {
            let rel = Path::new("samples").join(&id).join(f);
            assert_eq!(fs::read(a.join(&rel)).unwrap(), fs::read(b.join(&rel)).unwrap());
        }
    }
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
}

#[test]
fn five_hundred_scenes_within_a_minute_single_threaded() {
    let dir = scratch("budget");
    let start = Instant::now();
    write_dataset(&dir, 500, 1, &SimConfig::default(), [0.8, 0.1, 0.1], 1).unwrap();
    let t = start.elapsed();
    assert!(t < Duration::from_secs(60), "{t:?}");
}

#[test]
fn corrupt_files_are_reported_with_their_path() {
    let dir = scratch("corrupt");
    write_dataset(&dir, 2, 1, &SimConfig::default(), [0.5, 0.5, 0.0], 1).unwrap();
    let ds = Dataset::open(&dir).unwrap();
    let path = ds.sample_dir("000001").join("target.grid");
    let mut bytes = fs::read(&path).unwrap();
    let n = bytes.len();
    bytes[n - 2] = 0x7f;
    fs::write(&path, bytes).unwrap();
    let err = ds.target("000001").unwrap_err().to_string();
    assert!(err.contains("target.grid"), "{err}");
    fs::write(&path, b"not a grid").unwrap();
    assert!(ds.load("000001").is_err());
}
