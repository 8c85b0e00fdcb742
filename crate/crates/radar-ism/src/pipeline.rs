//! The batch commands behind the command line. Each writes its effective
//! configuration into its output directory.

use std::fs;
use std::path::{Path, PathBuf};

use radar_ism_core::diffnet::train::TrainOutcome;
use radar_ism_core::diffnet::{mc_predict, train, Example, Head, MetricRow, NetworkParams, Reduction, Tensor};
use radar_ism_core::eval::{compute_scores, render_table, ScoreTable};
use radar_ism_core::evidential::SubjectiveLogicConfig;
use radar_ism_core::ray_ism::{ray_ism_scene, sensor_world_poses, Detection};
use radar_ism_core::sim::derive_seed;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::config::RunConfig;
use crate::dataset::{write_dataset, Dataset, Manifest, SplitSel};
use crate::error::{Error, Result};
use crate::gridfile::GridFile;
use crate::parallel::par_map;
use crate::render::{render_pgm, render_ppm};

pub const PREDICTION_FILE: &str = "prediction.json";
pub const MODEL_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SCORES_CSV: &str = "scores.csv";
pub const SCORES_TXT: &str = "scores.txt";

/// Index of a prediction directory: model name and the samples it covers.
/// Grids are stored as `<sample id>.grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionInfo {
    pub model: String,
    pub samples: Vec<String>,
}

impl PredictionInfo {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(PREDICTION_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("info serializes");
        text.push('\n');
        fs::write(&path, text).map_err(Error::io(&path))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(PREDICTION_FILE);
        let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
    }
}

pub fn prediction_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.grid"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InferMode {
    /// Softmax head, mean logits over dropout samples.
    Soft,
    /// Evidence head, mean evidence over dropout samples.
    Ev,
    /// Evidence head, low percentile of the evidence samples.
    #[value(name = "ev-s")]
    EvS,
}

impl InferMode {
    pub fn model_name(self) -> &'static str {
        match self {
            InferMode::Soft => "Soft-Net",
            InferMode::Ev => "Ev-Net",
            InferMode::EvS => "Ev-Net-S",
        }
    }

    pub fn head(self) -> Head {
        match self {
            InferMode::Soft => Head::Softmax3,
            InferMode::Ev | InferMode::EvS => Head::Evidence2,
        }
    }
}

fn prepare(out: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(out).map_err(Error::io(out))?;
    cfg.write_to(out)
}

pub fn cmd_gen(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    prepare(out, cfg)?;
    write_dataset(out, cfg.io.scenes, cfg.seed, &cfg.sim, cfg.io.split, cfg.io.threads)
}

/// Ray-ISM belief grid for every selected sample.
pub fn cmd_rayism(cfg: &RunConfig, dataset: &Path, out: &Path, split: SplitSel) -> Result<PredictionInfo> {
    let ds = Dataset::open(dataset)?;
    prepare(out, cfg)?;
    let ids = ds.ids(split);
    let mounts = &ds.manifest().sim.radar.mounts;
    let spec = ds.manifest().grid;
    par_map(ids.len(), cfg.io.threads, |k| {
        let id = &ids[k];
        let origin = ds.radar(id)?.header.origin;
        let dets: Vec<Detection> = ds.detections(id)?.iter().map(|r| r.detection()).collect();
        let poses = sensor_world_poses(&origin, mounts);
        let grid = ray_ism_scene(&dets, &poses, spec, origin, &cfg.ray_ism)?;
        GridFile::from_states(&grid).write(&prediction_path(out, id))
    })?;
    let info = PredictionInfo { model: "Ray-ISM".into(), samples: ids };
    info.write(out)?;
    Ok(info)
}

/// Network input `[1, 2, H, W]` from a radar grid file.
pub fn radar_input(radar: &GridFile) -> Result<Tensor<f32>> {
    let n = radar.header.side_cells;
    let c = radar.channels();
    let data = (0..c).flat_map(|ch| radar.plane(ch)).collect();
    Ok(Tensor::new([1, c, n, n], data)?)
}

pub fn load_examples(ds: &Dataset, ids: &[String], threads: usize) -> Result<Vec<Example<f32>>> {
    par_map(ids.len(), threads, |k| {
        let s = ds.load(&ids[k])?;
        let target = s.target.grid().cells().iter().map(|t| t.vector()).collect();
        Ok(Example::new(radar_input(&s.radar)?, target)?)
    })
}

/// Trains one network on the train split, validating on the val split.
/// Writes `model.ckpt`, `metrics.csv` and periodic `epoch_NNN.ckpt` files.
/// The training seed is derived from the master seed and `train.seed`.
pub fn cmd_train(
    cfg: &RunConfig,
    dataset: &Path,
    out: &Path,
    head: Option<Head>,
    mut progress: impl FnMut(usize, &[MetricRow]),
) -> Result<TrainOutcome<f32>> {
    let ds = Dataset::open(dataset)?;
    let mut cfg = cfg.clone();
    if let Some(h) = head {
        cfg.net.head = h;
    }
    cfg.validate()?;
    prepare(out, &cfg)?;
    let train_set = load_examples(&ds, &ds.ids(SplitSel::Train), cfg.io.threads)?;
    let val_set = load_examples(&ds, &ds.ids(SplitSel::Val), cfg.io.threads)?;
    let mut tc = cfg.train.clone();
    tc.seed = derive_seed(cfg.seed, cfg.train.seed);
    let sl = SubjectiveLogicConfig::default();
    let every = cfg.io.checkpoint_every;
    let mut io_err = None;
    let outcome = train(cfg.net.clone(), &train_set, &val_set, &tc, &sl, |epoch, params, metrics| {
        progress(epoch, metrics);
        if every > 0 && epoch % every == 0 {
            if let Err(e) = write_checkpoint(&out.join(format!("epoch_{epoch:03}.ckpt")), params, tc.seed, epoch) {
                io_err = Some(e);
                return Err(radar_ism_core::Error::Config("checkpoint write failed".into()));
            }
        }
        Ok(())
    });
    if let Some(e) = io_err {
        return Err(e);
    }
    let outcome = outcome?;
    write_checkpoint(&out.join(MODEL_FILE), &outcome.params, tc.seed, tc.epochs)?;
    let mut csv = String::from("epoch,split,loss\n");
    for m in &outcome.metrics {
        csv.push_str(&format!("{},{},{:.8}\n", m.epoch, m.split.name(), m.loss));
    }
    let path = out.join(METRICS_FILE);
    fs::write(&path, csv).map_err(Error::io(&path))?;
    Ok(outcome)
}

/// Monte-Carlo dropout predictions of a trained network for the selected
/// samples.
pub fn cmd_infer(
    cfg: &RunConfig,
    checkpoint: &Path,
    dataset: &Path,
    out: &Path,
    mode: InferMode,
    split: SplitSel,
) -> Result<PredictionInfo> {
    let (_, params) = read_checkpoint(checkpoint)?;
    let head = params.architecture().head;
    if head != mode.head() {
        return Err(Error::Config(format!("mode {} needs a {:?} network, checkpoint has {head:?}", mode.model_name(), mode.head())));
    }
    let ds = Dataset::open(dataset)?;
    prepare(out, cfg)?;
    let ids = ds.ids(split);
    let reduction = match mode {
        InferMode::EvS => Reduction::Percentile(cfg.train.percentile),
        InferMode::Soft | InferMode::Ev => Reduction::Mean,
    };
    let sl = SubjectiveLogicConfig::default();
    par_map(ids.len(), cfg.io.threads, |k| predict_one(cfg, &params, &ds, &ids[k], reduction, &sl, out))?;
    let info = PredictionInfo { model: mode.model_name().into(), samples: ids };
    info.write(out)?;
    Ok(info)
}

fn predict_one(
    cfg: &RunConfig,
    params: &NetworkParams<f32>,
    ds: &Dataset,
    id: &str,
    reduction: Reduction,
    sl: &SubjectiveLogicConfig,
    out: &Path,
) -> Result<()> {
    let radar = ds.radar(id)?;
    let x = radar_input(&radar)?;
    let seed = derive_seed(cfg.seed, ds.seed(id).unwrap_or_default());
    let grid = mc_predict(params, &x, cfg.train.mc_samples, reduction, sl, seed, radar.spec(), radar.header.origin)?;
    GridFile::from_states(&grid).write(&prediction_path(out, id))
}

/// Scores every prediction directory on the selected samples it covers and
/// writes `scores.txt` and `scores.csv`.
pub fn cmd_eval(
    cfg: &RunConfig,
    pred_dirs: &[PathBuf],
    dataset: &Path,
    out: &Path,
    split: SplitSel,
) -> Result<Vec<(String, ScoreTable)>> {
    if pred_dirs.is_empty() {
        return Err(Error::Usage("eval needs at least one prediction directory".into()));
    }
    let ds = Dataset::open(dataset)?;
    let selected = ds.ids(split);
    let mut rows = Vec::new();
    for dir in pred_dirs {
        let info = PredictionInfo::read(dir)?;
        let ids: Vec<&String> = selected.iter().filter(|id| info.samples.contains(id)).collect();
        if ids.is_empty() {
            return Err(Error::format(dir, "no predictions for the selected samples"));
        }
        let tables = par_map(ids.len(), cfg.io.threads, |k| {
            let path = prediction_path(dir, ids[k]);
            let pred = GridFile::read(&path)?.to_states().map_err(|m| Error::format(&path, m))?;
            let target = ds.target(ids[k])?;
            let mask = ds.mask(ids[k])?;
            compute_scores(&pred, &target, &mask, &cfg.eval).map_err(|e| Error::format(&path, e.to_string()))
        })?;
        let mut table = ScoreTable::default();
        for t in &tables {
            table.merge(t);
        }
        rows.push((info.model, table));
    }
    prepare(out, cfg)?;
    let (text, csv) = render_table(&rows);
    for (name, body) in [(SCORES_TXT, text), (SCORES_CSV, csv)] {
        let path = out.join(name);
        fs::write(&path, body).map_err(Error::io(&path))?;
    }
    Ok(rows)
}

/// PPM for belief grids, PGM for one channel (or the chosen one).
pub fn cmd_render(grid: &Path, out: &Path, channel: Option<usize>, scale: usize) -> Result<()> {
    let g = GridFile::read(grid)?;
    let img = match (channel, g.channels()) {
        (Some(c), n) if c < n => render_pgm(&g, c, scale),
        (None, 3) => render_ppm(&g, scale),
        (None, 1) => render_pgm(&g, 0, scale),
        (None, n) => return Err(Error::Usage(format!("grid has {n} channels; choose one with --channel"))),
        (Some(c), n) => return Err(Error::Usage(format!("channel {c} out of range for {n} channels"))),
    }
    .ok_or_else(|| Error::Usage("scale must be at least 1".into()))?;
    fs::write(out, img).map_err(Error::io(out))
}
