//! Raw radar detections as JSON lines `{t, sensor_id, r, phi, v_r}`.

use std::fs;
use std::path::Path;

use radar_ism_core::ray_ism::Detection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    /// Frame time in seconds.
    pub t: f64,
    pub sensor_id: u32,
    pub r: f64,
    pub phi: f64,
    pub v_r: f64,
}

impl DetectionRecord {
    pub fn new(t: f64, d: &Detection) -> Self {
        Self { t, sensor_id: d.sensor_id, r: d.range, phi: d.azimuth, v_r: d.radial_velocity }
    }

    pub fn detection(&self) -> Detection {
        Detection { range: self.r, azimuth: self.phi, radial_velocity: self.v_r, sensor_id: self.sensor_id }
    }
}

pub fn to_jsonl(records: &[DetectionRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

pub fn write_detections(path: &Path, records: &[DetectionRecord]) -> Result<()> {
    fs::write(path, to_jsonl(records)).map_err(Error::io(path))
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: DetectionRecord =
                serde_json::from_str(l).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
            r.detection().validate().map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn exact_round_trip(v in prop::collection::vec((0.0..30.0f64, -3.2..3.2f64, -20.0..20.0f64, 0u32..4), 0..20)) {
            let recs: Vec<_> = v.iter().map(|&(r, phi, v_r, id)| {
                DetectionRecord::new(0.0, &Detection { range: r, azimuth: phi, radial_velocity: v_r, sensor_id: id })
            }).collect();
            let text = to_jsonl(&recs);
            let back: Vec<DetectionRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
            prop_assert_eq!(back, recs);
        }
    }

    #[test]
    fn field_names() {
        let r = DetectionRecord { t: 0.0, sensor_id: 2, r: 1.5, phi: -0.25, v_r: 3.0 };
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"t":0.0,"sensor_id":2,"r":1.5,"phi":-0.25,"v_r":3.0}"#);
        assert!(serde_json::from_str::<DetectionRecord>(r#"{"t":0,"sensor_id":2,"r":1,"phi":0,"v_r":0,"x":1}"#).is_err());
    }
}
