//! Conditional frequency scores split by visibility.

use alloc::format;
use alloc::string::String;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::evidential::EvidentialState;
use crate::grid::Grid2D;
use crate::sim::{TargetClass, TargetPatch, Visibility, VisibilityMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Visible,
    Hidden,
}

impl Region {
    pub const ALL: [Region; 2] = [Region::Visible, Region::Hidden];

    pub fn name(self) -> &'static str {
        match self {
            Region::Visible => "visible",
            Region::Hidden => "hidden",
        }
    }
}

/// Known targets that are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Known {
    Free,
    Occupied,
}

impl Known {
    pub const ALL: [Known; 2] = [Known::Free, Known::Occupied];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Free,
    Occupied,
    Unknown,
}

/// Largest of `(b_f, b_o, u)`; any exact tie goes to unknown.
pub fn predicted_label(s: &EvidentialState) -> Label {
    if s.b_f > s.b_o && s.b_f > s.u {
        Label::Free
    } else if s.b_o > s.b_f && s.b_o > s.u {
        Label::Occupied
    } else {
        Label::Unknown
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ConflictMode {
    /// Also require `u ≤ unknown_guard`, so vacuous cells are not conflicts.
    #[default]
    Guarded,
    /// `|b_f − b_o| ≤ threshold` alone.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct ScoreConfig {
    pub conflict_threshold: f64,
    pub unknown_guard: f64,
    pub conflict_mode: ConflictMode,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { conflict_threshold: 0.2, unknown_guard: 0.5, conflict_mode: ConflictMode::Guarded }
    }
}

pub fn is_conflict(s: &EvidentialState, cfg: &ScoreConfig) -> bool {
    let close = (s.b_f - s.b_o).abs() <= cfg.conflict_threshold;
    match cfg.conflict_mode {
        ConflictMode::Literal => close,
        ConflictMode::Guarded => close && s.u <= cfg.unknown_guard,
    }
}

/// Cell counts for one (region, target) condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub cells: u64,
    pub free: u64,
    pub occupied: u64,
    pub unknown: u64,
    pub conflict: u64,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.cells += o.cells;
        self.free += o.free;
        self.occupied += o.occupied;
        self.unknown += o.unknown;
        self.conflict += o.conflict;
    }

    /// `[p_f, p_o, p_u, p_c]` in percent; `None` without cells.
    pub fn percentages(&self) -> Option<[f64; 4]> {
        if self.cells == 0 {
            return None;
        }
        let n = self.cells as f64;
        Some([self.free, self.occupied, self.unknown, self.conflict].map(|c| 100.0 * c as f64 / n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScoreTable {
    counts: [[Counts; 2]; 2],
}

fn ri(r: Region) -> usize {
    match r {
        Region::Visible => 0,
        Region::Hidden => 1,
    }
}

fn ki(k: Known) -> usize {
    match k {
        Known::Free => 0,
        Known::Occupied => 1,
    }
}

impl ScoreTable {
    pub fn counts(&self, region: Region, target: Known) -> &Counts {
        &self.counts[ri(region)][ki(target)]
    }

    pub fn percentages(&self, region: Region, target: Known) -> Option<[f64; 4]> {
        self.counts(region, target).percentages()
    }

    /// Adds one cell.
    pub fn record(&mut self, pred: &EvidentialState, target: TargetClass, vis: Visibility, cfg: &ScoreConfig) {
        let k = match target {
            TargetClass::Free => Known::Free,
            TargetClass::Occupied => Known::Occupied,
            _ => return,
        };
        let r = match vis {
            Visibility::Visible => Region::Visible,
            Visibility::Hidden => Region::Hidden,
        };
        let c = &mut self.counts[ri(r)][ki(k)];
        c.cells += 1;
        match predicted_label(pred) {
            Label::Free => c.free += 1,
            Label::Occupied => c.occupied += 1,
            Label::Unknown => c.unknown += 1,
        }
        if is_conflict(pred, cfg) {
            c.conflict += 1;
        }
    }

    /// Sums the counts of two tables.
    pub fn merge(&mut self, other: &ScoreTable) {
        for r in 0..2 {
            for k in 0..2 {
                self.counts[r][k].add(&other.counts[r][k]);
            }
        }
    }
}

/// Scores one predicted grid against its targets.
pub fn compute_scores(
    pred: &Grid2D<EvidentialState>,
    target: &TargetPatch,
    mask: &VisibilityMask,
    cfg: &ScoreConfig,
) -> Result<ScoreTable> {
    let n = pred.cells().len();
    if target.grid().cells().len() != n || mask.grid().cells().len() != n {
        return Err(Error::Shape(format!(
            "prediction has {n} cells, target {}, mask {}",
            target.grid().cells().len(),
            mask.grid().cells().len()
        )));
    }
    let mut table = ScoreTable::default();
    for ((p, t), v) in pred.cells().iter().zip(target.grid().cells()).zip(mask.grid().cells()) {
        table.record(p, *t, *v, cfg);
    }
    Ok(table)
}

const COLUMNS: [&str; 8] = [
    "p(f^|f~)", "p(o^|f~)", "p(u^|f~)", "p(c^|f~)", "p(f^|o~)", "p(o^|o~)", "p(u^|o~)", "p(c^|o~)",
];
const CSV_COLUMNS: [&str; 8] = ["pf_f", "po_f", "pu_f", "pc_f", "pf_o", "po_o", "pu_o", "pc_o"];

fn row_values(t: &ScoreTable, region: Region) -> [Option<f64>; 8] {
    let mut out = [None; 8];
    for (j, k) in Known::ALL.into_iter().enumerate() {
        if let Some(p) = t.percentages(region, k) {
            for i in 0..4 {
                out[4 * j + i] = Some(p[i]);
            }
        }
    }
    out
}

/// Text report and CSV for named score tables, in the given row order.
pub fn render_table(rows: &[(String, ScoreTable)]) -> (String, String) {
    let width = rows.iter().map(|(m, _)| m.len()).max().unwrap_or(0).max(8);
    let mut text = String::new();
    for region in Region::ALL {
        let _ = writeln!(text, "scores for {} area", region.name());
        let _ = write!(text, "{:<width$}", "model");
        for c in COLUMNS {
            let _ = write!(text, " {c:>9}");
        }
        text.push('\n');
        for (model, table) in rows {
            let _ = write!(text, "{model:<width$}");
            for v in row_values(table, region) {
                match v {
                    Some(v) => {
                        let _ = write!(text, " {v:>9.1}");
                    }
                    None => {
                        let _ = write!(text, " {:>9}", "-");
                    }
                }
            }
            text.push('\n');
        }
        if region == Region::Visible {
            text.push('\n');
        }
    }

    let mut csv = String::from("model,region");
    for c in CSV_COLUMNS {
        csv.push(',');
        csv.push_str(c);
    }
    csv.push_str(",n_free,n_occupied\n");
    for (model, table) in rows {
        for region in Region::ALL {
            let _ = write!(csv, "{model},{}", region.name());
            for v in row_values(table, region) {
                match v {
                    Some(v) => {
                        let _ = write!(csv, ",{v:.4}");
                    }
                    None => csv.push(','),
                }
            }
            let _ = writeln!(
                csv,
                ",{},{}",
                table.counts(region, Known::Free).cells,
                table.counts(region, Known::Occupied).cells
            );
        }
    }
    (text, csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Pose2D};
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn s(b_f: f64, b_o: f64, u: f64) -> EvidentialState {
        EvidentialState::new(b_f, b_o, u).unwrap()
    }

    fn score(pred: &[EvidentialState], target: &[TargetClass], vis: &[Visibility], cfg: &ScoreConfig) -> ScoreTable {
        let mut t = ScoreTable::default();
        for i in 0..pred.len() {
            t.record(&pred[i], target[i], vis[i], cfg);
        }
        t
    }

    #[test]
    fn hand_counted_case() {
        let pred = [s(0.8, 0.1, 0.1), s(0.0, 0.0, 1.0), s(0.45, 0.5, 0.05)];
        let target = [TargetClass::Free, TargetClass::Free, TargetClass::Occupied];
        let t = score(&pred, &target, &[Visibility::Visible; 3], &ScoreConfig::default());
        let f = t.percentages(Region::Visible, Known::Free).unwrap();
        let o = t.percentages(Region::Visible, Known::Occupied).unwrap();
        assert_eq!(f, [50.0, 0.0, 50.0, 0.0]);
        assert_eq!(o, [0.0, 100.0, 0.0, 100.0]);
        assert_eq!(t.percentages(Region::Hidden, Known::Free), None);
    }

    #[test]
    fn perfect_and_vacuous_predictors() {
        let target = [TargetClass::Free, TargetClass::Occupied, TargetClass::Unknown, TargetClass::Conflict];
        let vis = [Visibility::Visible, Visibility::Hidden, Visibility::Hidden, Visibility::Visible];
        let perfect: Vec<_> = target.iter().map(|c| c.state()).collect();
        let t = score(&perfect, &target, &vis, &ScoreConfig::default());
        assert_eq!(t.percentages(Region::Visible, Known::Free).unwrap(), [100.0, 0.0, 0.0, 0.0]);
        assert_eq!(t.percentages(Region::Hidden, Known::Occupied).unwrap(), [0.0, 100.0, 0.0, 0.0]);

        let vacuous = vec![EvidentialState::VACUOUS; 4];
        let t = score(&vacuous, &target, &vis, &ScoreConfig::default());
        assert_eq!(t.percentages(Region::Visible, Known::Free).unwrap()[2], 100.0);
        assert_eq!(t.percentages(Region::Hidden, Known::Occupied).unwrap()[2], 100.0);
        assert_eq!(t.percentages(Region::Visible, Known::Free).unwrap()[3], 0.0);

        let literal = ScoreConfig { conflict_mode: ConflictMode::Literal, ..ScoreConfig::default() };
        let t = score(&vacuous, &target, &vis, &literal);
        assert_eq!(t.percentages(Region::Visible, Known::Free).unwrap()[3], 100.0);
    }

    #[test]
    fn ties_go_to_unknown() {
        assert_eq!(predicted_label(&s(0.4, 0.4, 0.2)), Label::Unknown);
        assert_eq!(predicted_label(&s(0.4, 0.2, 0.4)), Label::Unknown);
        assert_eq!(predicted_label(&s(0.5, 0.2, 0.3)), Label::Free);
    }

    #[test]
    fn grid_shapes_must_match() {
        let spec = GridSpec::new(8, 0.5).unwrap();
        let pred = Grid2D::filled(spec, Pose2D::default(), EvidentialState::VACUOUS);
        let target = TargetPatch(Grid2D::filled(GridSpec::new(16, 0.5).unwrap(), Pose2D::default(), TargetClass::Free));
        let mask = VisibilityMask(Grid2D::filled(spec, Pose2D::default(), Visibility::Visible));
        assert!(compute_scores(&pred, &target, &mask, &ScoreConfig::default()).is_err());
    }

    #[test]
    fn rendering() {
        let (text, csv) = render_table(&[]);
        assert_eq!(csv, "model,region,pf_f,po_f,pu_f,pc_f,pf_o,po_o,pu_o,pc_o,n_free,n_occupied\n");
        assert!(text.contains("p(f^|f~)  p(o^|f~)  p(u^|f~)  p(c^|f~)  p(f^|o~)  p(o^|o~)  p(u^|o~)  p(c^|o~)"));
        let t = score(&[s(0.8, 0.1, 0.1)], &[TargetClass::Free], &[Visibility::Visible], &ScoreConfig::default());
        let (_, csv) = render_table(&[("Ev-Net".into(), t)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "Ev-Net,visible,100.0000,0.0000,0.0000,0.0000,,,,,1,0");
        assert_eq!(lines[2], "Ev-Net,hidden,,,,,,,,,0,0");
    }

    fn state() -> impl Strategy<Value = EvidentialState> {
        (0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b)| {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            EvidentialState::new(lo, hi - lo, 1.0 - hi).unwrap_or(EvidentialState::VACUOUS)
        })
    }

    fn cell() -> impl Strategy<Value = (EvidentialState, TargetClass, Visibility)> {
        (state(), 0usize..4, any::<bool>()).prop_map(|(s, t, v)| {
            (s, TargetClass::ALL[t], if v { Visibility::Visible } else { Visibility::Hidden })
        })
    }

    proptest! {
        #[test]
        fn partition_and_permutation(cells in proptest::collection::vec(cell(), 1..200), seed in any::<u64>()) {
            let cfg = ScoreConfig::default();
            let mut t = ScoreTable::default();
            for (p, c, v) in &cells {
                t.record(p, *c, *v, &cfg);
            }
            for r in Region::ALL {
                for k in Known::ALL {
                    if let Some(p) = t.percentages(r, k) {
                        prop_assert!((p[0] + p[1] + p[2] - 100.0).abs() < 1e-9);
                    }
                }
            }
            let mut shuffled = cells.clone();
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut rng);
            let mut u = ScoreTable::default();
            for (p, c, v) in &shuffled {
                u.record(p, *c, *v, &cfg);
            }
            prop_assert_eq!(t, u);

            // Merging halves equals scoring the whole.
            let (a, b) = cells.split_at(cells.len() / 2);
            let mut ta = ScoreTable::default();
            let mut tb = ScoreTable::default();
            for (p, c, v) in a { ta.record(p, *c, *v, &cfg); }
            for (p, c, v) in b { tb.record(p, *c, *v, &cfg); }
            ta.merge(&tb);
            prop_assert_eq!(ta, t);
        }
    }
}
