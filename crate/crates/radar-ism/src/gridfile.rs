//! Binary grid files: one JSON header line, a newline, then little-endian
//! `f32` values in row-major order with channels interleaved per cell.

use std::fs;
use std::path::Path;

use radar_ism_core::evidential::EvidentialState;
use radar_ism_core::grid::{Grid2D, GridSpec, Pose2D};
use radar_ism_core::sim::{RadarImage, TargetClass, TargetPatch, Visibility, VisibilityMask};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RADAR_CHANNELS: [&str; 2] = ["static", "dynamic"];
pub const BELIEF_CHANNELS: [&str; 3] = ["b_f", "b_o", "u"];
pub const MASK_CHANNELS: [&str; 1] = ["visible"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub side_cells: usize,
    pub cell_size: f64,
    pub origin: Pose2D,
    pub channels: Vec<String>,
    pub dtype: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub header: GridHeader,
    data: Vec<f32>,
}

impl GridFile {
    pub fn new(spec: GridSpec, origin: Pose2D, channels: &[&str], data: Vec<f32>) -> Result<Self> {
        spec.validate()?;
        if channels.is_empty() || data.len() != spec.len() * channels.len() {
            return Err(Error::Config(format!(
                "{} values for a {}x{} grid with {} channels",
                data.len(),
                spec.side_cells,
                spec.side_cells,
                channels.len()
            )));
        }
        let header = GridHeader {
            side_cells: spec.side_cells,
            cell_size: spec.cell_size,
            origin,
            channels: channels.iter().map(|c| c.to_string()).collect(),
            dtype: "f32".into(),
        };
        Ok(Self { header, data })
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { side_cells: self.header.side_cells, cell_size: self.header.cell_size }
    }

    pub fn channels(&self) -> usize {
        self.header.channels.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Channel values of cell `i` in row-major order.
    pub fn cell(&self, i: usize) -> &[f32] {
        let c = self.channels();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn plane(&self, channel: usize) -> Vec<f32> {
        self.data.iter().skip(channel).step_by(self.channels()).copied().collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.header).expect("header serializes");
        out.push(b'\n');
        out.reserve(4 * self.data.len());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or("missing header line")?;
        let header: GridHeader = serde_json::from_slice(&bytes[..nl]).map_err(|e| format!("bad header: {e}"))?;
        if header.dtype != "f32" {
            return Err(format!("unsupported element type {}", header.dtype));
        }
        let spec = GridSpec { side_cells: header.side_cells, cell_size: header.cell_size };
        spec.validate().map_err(|e| e.to_string())?;
        let payload = &bytes[nl + 1..];
        let want = 4 * spec.len() * header.channels.len();
        if payload.len() != want || header.channels.is_empty() {
            return Err(format!("payload has {} bytes, header implies {want}", payload.len()));
        }
        let data = payload.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        Ok(Self { header, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(Error::io(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(Error::io(path))?;
        Self::from_bytes(&bytes).map_err(|m| Error::format(path, m))
    }

    fn expect_channels(&self, n: usize) -> std::result::Result<(), String> {
        if self.channels() == n {
            Ok(())
        } else {
            Err(format!("expected {n} channels, found {}", self.channels()))
        }
    }

    pub fn from_radar(img: &RadarImage) -> Self {
        let g = img.grid();
        let data = g.cells().iter().flat_map(|c| [c[0] as f32, c[1] as f32]).collect();
        Self::new(*g.spec(), *g.origin(), &RADAR_CHANNELS, data).expect("radar grid is consistent")
    }

    pub fn from_target(t: &TargetPatch) -> Self {
        let g = t.grid();
        let data = g.cells().iter().flat_map(|c| c.vector().map(|v| v as f32)).collect();
        Self::new(*g.spec(), *g.origin(), &BELIEF_CHANNELS, data).expect("target grid is consistent")
    }

    pub fn from_mask(m: &VisibilityMask) -> Self {
        let g = m.grid();
        let data = g.cells().iter().map(|v| if *v == Visibility::Visible { 1.0 } else { 0.0 }).collect();
        Self::new(*g.spec(), *g.origin(), &MASK_CHANNELS, data).expect("mask grid is consistent")
    }

    pub fn from_states(g: &Grid2D<EvidentialState>) -> Self {
        let data = g.cells().iter().flat_map(|s| s.as_array().map(|v| v as f32)).collect();
        Self::new(*g.spec(), *g.origin(), &BELIEF_CHANNELS, data).expect("state grid is consistent")
    }

    fn to_grid<T>(&self, f: impl Fn(&[f32]) -> std::result::Result<T, String>) -> std::result::Result<Grid2D<T>, String> {
        let cells = (0..self.spec().len()).map(|i| f(self.cell(i))).collect::<std::result::Result<Vec<_>, _>>()?;
        Grid2D::from_vec(self.spec(), self.header.origin, cells).map_err(|e| e.to_string())
    }

    pub fn to_target(&self) -> std::result::Result<TargetPatch, String> {
        self.expect_channels(3)?;
        self.to_grid(|c| {
            TargetClass::from_vector([c[0] as f64, c[1] as f64, c[2] as f64])
                .ok_or_else(|| format!("inadmissible target vector {c:?}"))
        })
        .map(TargetPatch)
    }

    pub fn to_mask(&self) -> std::result::Result<VisibilityMask, String> {
        self.expect_channels(1)?;
        self.to_grid(|c| match c[0] {
            1.0 => Ok(Visibility::Visible),
            0.0 => Ok(Visibility::Hidden),
            v => Err(format!("mask value {v} is neither 0 nor 1")),
        })
        .map(VisibilityMask)
    }

    /// Belief masses, renormalised to undo `f32` rounding.
    pub fn to_states(&self) -> std::result::Result<Grid2D<EvidentialState>, String> {
        self.expect_channels(3)?;
        self.to_grid(|c| {
            let m = [c[0] as f64, c[1] as f64, c[2] as f64];
            let s = m[0] + m[1] + m[2];
            if !s.is_finite() || s <= 0.0 || m.iter().any(|v| *v < 0.0) {
                return Err(format!("invalid belief masses {c:?}"));
            }
            EvidentialState::new(m[0] / s, m[1] / s, m[2] / s).map_err(|e| e.to_string())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec() -> GridSpec {
        GridSpec::new(8, 0.25).unwrap()
    }

    #[test]
    fn header_is_one_json_line() {
        let g = GridFile::new(spec(), Pose2D::new(1.0, -2.0, 0.5), &MASK_CHANNELS, vec![0.0; 64]).unwrap();
        let bytes = g.to_bytes();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let v: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        assert_eq!(v["dtype"], "f32");
        assert_eq!(v["channels"][0], "visible");
        assert_eq!(bytes.len(), nl + 1 + 4 * 64);
    }

    #[test]
    fn rejects_truncated_payload() {
        let g = GridFile::new(spec(), Pose2D::default(), &RADAR_CHANNELS, vec![1.0; 128]).unwrap();
        let mut bytes = g.to_bytes();
        bytes.pop();
        assert!(GridFile::from_bytes(&bytes).is_err());
        assert!(GridFile::from_bytes(b"{}").is_err());
        assert!(GridFile::new(spec(), Pose2D::default(), &RADAR_CHANNELS, vec![1.0; 64]).is_err());
    }

    #[test]
    fn target_and_mask_round_trip() {
        let t = TargetPatch(Grid2D::from_fn(spec(), Pose2D::default(), |c| TargetClass::ALL[(c.row + 3 * c.col) % 4]));
        assert_eq!(GridFile::from_target(&t).to_target().unwrap(), t);
        let m = VisibilityMask(Grid2D::from_fn(spec(), Pose2D::default(), |c| {
            if c.row > c.col { Visibility::Visible } else { Visibility::Hidden }
        }));
        assert_eq!(GridFile::from_mask(&m).to_mask().unwrap(), m);
        assert!(GridFile::from_mask(&m).to_target().is_err());
    }

    proptest! {
        #[test]
        fn bytes_round_trip(values in prop::collection::vec(-1e6f32..1e6, 128), x in -50.0..50.0f64, h in -3.0..3.0f64) {
            let g = GridFile::new(spec(), Pose2D::new(x, 0.0, h), &RADAR_CHANNELS, values).unwrap();
            prop_assert_eq!(GridFile::from_bytes(&g.to_bytes()).unwrap(), g);
        }

        #[test]
        fn states_survive_f32(raw in prop::collection::vec((0.0..50.0f64, 0.0..50.0f64), 64)) {
            let cells: Vec<_> = raw.iter().map(|&(a, b)| EvidentialState::from_binary_evidence(a, b)).collect();
            let g = Grid2D::from_vec(spec(), Pose2D::default(), cells).unwrap();
            let back = GridFile::from_states(&g).to_states().unwrap();
            for (a, b) in g.cells().iter().zip(back.cells()) {
                prop_assert!((a.b_f - b.b_f).abs() < 1e-6 && (a.b_o - b.b_o).abs() < 1e-6 && (a.u - b.u).abs() < 1e-6);
            }
        }
    }
}
