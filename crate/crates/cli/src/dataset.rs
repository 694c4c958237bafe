//! On-disk grasp-episode format, force-to-image conversion, windowing, and
//! object-disjoint splits.
//!
//! A dataset root holds one directory per episode plus `manifest.json`:
//!
//! ```text
//! root/
//!   manifest.json            episode dir list + object split assignment
//!   o000_e000/
//!     meta.json              id, object, label, grasp width, sample rate
//!     tactile.csv            one row per frame: 48 comma-separated floats
//!     visual.emb + visual.hdr   f32 embeddings (passthrough mode)
//!     visual/frame_000.png …    or PNG frames (image mode)
//! ```
//!
//! Tactile rows are taxel-major with x, y, z per taxel: the 16 taxels of
//! the 4x4 array in row-major order, three values each.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use slipnet_core::{StateLabel, Tensor, VisualFrame, VisualMode, TACTILE_FRAME_SHAPE};

use crate::embeddings;
use crate::error::{io_at, Error, Result};
use crate::images;

/// Taxels in the 4x4 array.
pub const TAXELS: usize = 16;
/// Force axes per taxel (x, y shear; z normal).
pub const AXES: usize = 3;
/// Values per tactile CSV row.
pub const ROW_VALUES: usize = TAXELS * AXES;
/// Shortest episode the format accepts; matches the longest default window.
pub const MIN_EPISODE_FRAMES: usize = 13;

/// One tactile sample: 16 taxels x 3 force axes, in newtons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TactileFrame {
    /// `forces[taxel][axis]`, taxels row-major over the 4x4 grid.
    pub forces: [[f64; AXES]; TAXELS],
}

impl TactileFrame {
    pub fn zero() -> TactileFrame {
        TactileFrame { forces: [[0.0; AXES]; TAXELS] }
    }

    pub fn from_row(row: &[f64]) -> Result<TactileFrame> {
        if row.len() != ROW_VALUES {
            return Err(Error::Data(format!(
                "tactile row has {} values, expected {ROW_VALUES}",
                row.len()
            )));
        }
        let mut forces = [[0.0; AXES]; TAXELS];
        for (i, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Data(format!("tactile value {i} is not finite: {v}")));
            }
            forces[i / AXES][i % AXES] = *v;
        }
        Ok(TactileFrame { forces })
    }

    pub fn to_row(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(ROW_VALUES);
        for taxel in &self.forces {
            out.extend_from_slice(taxel);
        }
        out
    }
}

/// Force-to-unit-interval mapping ranges for the image conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceCalibration {
    pub shear_min: f64,
    pub shear_max: f64,
    pub normal_min: f64,
    pub normal_max: f64,
    /// Subtract the episode's first frame before scaling.
    pub tare: bool,
}

impl Default for ForceCalibration {
    fn default() -> ForceCalibration {
        ForceCalibration {
            shear_min: -5.0,
            shear_max: 5.0,
            normal_min: 0.0,
            normal_max: 15.0,
            tare: true,
        }
    }
}

impl ForceCalibration {
    pub fn validate(&self) -> Result<()> {
        if self.shear_max <= self.shear_min {
            return Err(Error::Config(format!(
                "shear range [{}, {}] is empty",
                self.shear_min, self.shear_max
            )));
        }
        if self.normal_max <= self.normal_min {
            return Err(Error::Config(format!(
                "normal range [{}, {}] is empty",
                self.normal_min, self.normal_max
            )));
        }
        Ok(())
    }
}

/// Converts one force frame to a [3, 4, 4] tactile image.
///
/// Without a baseline each axis maps affinely from its calibration range to
/// [0, 1]. With a baseline (tare), the baseline reading is subtracted first
/// and the zero point lands at 0.5 for the shear axes and 0.0 for the
/// normal axis, so symmetric shear deviations stay symmetric around mid
/// gray. Results clamp to [0, 1].
pub fn forces_to_image(
    frame: &TactileFrame,
    cal: &ForceCalibration,
    baseline: Option<&TactileFrame>,
) -> Result<Tensor> {
    cal.validate()?;
    let mut data = vec![0.0; AXES * TAXELS];
    for axis in 0..AXES {
        let (lo, hi) = if axis < 2 {
            (cal.shear_min, cal.shear_max)
        } else {
            (cal.normal_min, cal.normal_max)
        };
        let span = hi - lo;
        for taxel in 0..TAXELS {
            let raw = frame.forces[taxel][axis];
            let value = match baseline {
                None => (raw - lo) / span,
                Some(base) => {
                    let delta = raw - base.forces[taxel][axis];
                    if axis < 2 {
                        0.5 + delta / span
                    } else {
                        delta / span
                    }
                }
            };
            data[axis * TAXELS + taxel] = value.clamp(0.0, 1.0);
        }
    }
    Ok(Tensor::new(data, &TACTILE_FRAME_SHAPE)?)
}

/// The visual stream of an episode.
#[derive(Debug, Clone, PartialEq)]
pub enum VisualData {
    /// Precomputed backbone embeddings, one vector per frame.
    Embeddings { dim: usize, frames: Vec<Vec<f32>> },
    /// Raw 32x32 RGB frames as [0, 1] channel-major pixel data.
    Images { frames: Vec<Vec<f64>> },
}

impl VisualData {
    pub fn len(&self) -> usize {
        match self {
            VisualData::Embeddings { frames, .. } => frames.len(),
            VisualData::Images { frames } => frames.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The visual mode this stream feeds.
    pub fn mode(&self) -> VisualMode {
        match self {
            VisualData::Embeddings { dim, .. } => VisualMode::Passthrough { dim: *dim },
            VisualData::Images { .. } => VisualMode::SmallCnn,
        }
    }
}

/// One grasp-and-lift recording with a single slip/stable label.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspEpisode {
    pub id: String,
    pub object_id: String,
    pub label: StateLabel,
    pub grasp_width_mm: f64,
    pub rate_hz: f64,
    pub tactile: Vec<TactileFrame>,
    pub visual: VisualData,
}

impl GraspEpisode {
    pub fn frames(&self) -> usize {
        self.tactile.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.object_id.is_empty() {
            return Err(Error::Data(format!(
                "episode needs nonempty id and object id (id {:?}, object {:?})",
                self.id, self.object_id
            )));
        }
        if self.tactile.len() < MIN_EPISODE_FRAMES {
            return Err(Error::Data(format!(
                "episode {} has {} frames, minimum is {MIN_EPISODE_FRAMES}",
                self.id,
                self.tactile.len()
            )));
        }
        if self.tactile.len() != self.visual.len() {
            return Err(Error::Data(format!(
                "episode {} has {} tactile frames but {} visual frames",
                self.id,
                self.tactile.len(),
                self.visual.len()
            )));
        }
        if !(self.grasp_width_mm.is_finite() && self.grasp_width_mm > 0.0) {
            return Err(Error::Data(format!(
                "episode {} grasp width must be positive, got {}",
                self.id, self.grasp_width_mm
            )));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::Data(format!(
                "episode {} sample rate must be positive, got {}",
                self.id, self.rate_hz
            )));
        }
        match &self.visual {
            VisualData::Embeddings { dim, frames } => {
                if *dim == 0 {
                    return Err(Error::Data(format!(
                        "episode {} has zero-dimensional embeddings",
                        self.id
                    )));
                }
                for (i, f) in frames.iter().enumerate() {
                    if f.len() != *dim {
                        return Err(Error::Data(format!(
                            "episode {} embedding {i} has {} values, expected {dim}",
                            self.id,
                            f.len()
                        )));
                    }
                    if let Some(bad) = f.iter().find(|v| !v.is_finite()) {
                        return Err(Error::Data(format!(
                            "episode {} embedding {i} contains non-finite value {bad}",
                            self.id
                        )));
                    }
                }
            }
            VisualData::Images { frames } => {
                let expect = 3 * 32 * 32;
                for (i, f) in frames.iter().enumerate() {
                    if f.len() != expect {
                        return Err(Error::Data(format!(
                            "episode {} image {i} has {} values, expected {expect}",
                            self.id,
                            f.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EpisodeMeta {
    id: String,
    object: String,
    label: String,
    grasp_width_mm: f64,
    rate_hz: f64,
}

/// Which objects belong to which split. Objects are listed by id; the lists
/// are kept sorted and duplicate-free on write.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl SplitAssignment {
    pub fn normalize(&mut self) {
        self.train.sort();
        self.train.dedup();
        self.test.sort();
        self.test.dedup();
    }
}

/// Dataset root index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Episode directory names relative to the root, in canonical order.
    pub episodes: Vec<String>,
    pub splits: SplitAssignment,
}

/// A per-episode load failure; loading continues past these.
#[derive(Debug)]
pub struct EpisodeError {
    pub dir: String,
    pub error: Error,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_at(path))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_at(path))
}

/// Serializes one episode into `dir` (created if needed).
pub fn write_episode(dir: &Path, episode: &GraspEpisode) -> Result<()> {
    episode.validate()?;
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let meta = EpisodeMeta {
        id: episode.id.clone(),
        object: episode.object_id.clone(),
        label: episode.label.name().to_string(),
        grasp_width_mm: episode.grasp_width_mm,
        rate_hz: episode.rate_hz,
    };
    let meta_json = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Data(format!("meta encode: {e}")))?;
    write_text(&dir.join("meta.json"), &meta_json)?;

    let mut csv = String::new();
    for frame in &episode.tactile {
        let row: Vec<String> = frame.to_row().iter().map(|v| v.to_string()).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    write_text(&dir.join("tactile.csv"), &csv)?;

    match &episode.visual {
        VisualData::Embeddings { dim, frames } => embeddings::write(dir, *dim, frames)?,
        VisualData::Images { frames } => {
            let vis_dir = dir.join("visual");
            fs::create_dir_all(&vis_dir).map_err(io_at(&vis_dir))?;
            for (i, frame) in frames.iter().enumerate() {
                images::write_png(&vis_dir.join(format!("frame_{i:03}.png")), frame)?;
            }
        }
    }
    Ok(())
}

fn parse_tactile_csv(path: &Path) -> Result<Vec<TactileFrame>> {
    let text = read_text(path)?;
    let mut frames = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(ROW_VALUES);
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "{}:{}: unparseable value {field:?}",
                    path.display(),
                    line_no + 1
                ))
            })?;
            row.push(v);
        }
        let frame = TactileFrame::from_row(&row).map_err(|e| {
            Error::Data(format!("{}:{}: {e}", path.display(), line_no + 1))
        })?;
        frames.push(frame);
    }
    Ok(frames)
}

/// Loads one episode directory.
pub fn load_episode(dir: &Path) -> Result<GraspEpisode> {
    let meta_text = read_text(&dir.join("meta.json"))?;
    let meta: EpisodeMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::Data(format!("{}: {e}", dir.join("meta.json").display())))?;
    let label = match meta.label.as_str() {
        "slip" => StateLabel::Slip,
        "stable" => StateLabel::Stable,
        other => {
            return Err(Error::Data(format!(
                "{}: unknown label {other:?} (expected \"slip\" or \"stable\")",
                dir.display()
            )))
        }
    };
    let tactile = parse_tactile_csv(&dir.join("tactile.csv"))?;
    let visual = if dir.join("visual.emb").exists() {
        let (dim, frames) = embeddings::read(dir)?;
        VisualData::Embeddings { dim, frames }
    } else if dir.join("visual").is_dir() {
        let vis_dir = dir.join("visual");
        let mut names: Vec<String> = fs::read_dir(&vis_dir)
            .map_err(io_at(&vis_dir))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".png"))
            .collect();
        names.sort();
        let mut frames = Vec::with_capacity(names.len());
        for name in names {
            frames.push(images::read_png(&vis_dir.join(name))?);
        }
        VisualData::Images { frames }
    } else {
        return Err(Error::Data(format!(
            "{}: no visual stream (expected visual.emb or visual/)",
            dir.display()
        )));
    };
    let episode = GraspEpisode {
        id: meta.id,
        object_id: meta.object,
        label,
        grasp_width_mm: meta.grasp_width_mm,
        rate_hz: meta.rate_hz,
        tactile,
        visual,
    };
    episode.validate()?;
    Ok(episode)
}

/// Writes a full dataset: every episode plus the manifest. Episode
/// directories are named by episode id.
pub fn write_dataset(
    root: &Path,
    episodes: &[GraspEpisode],
    splits: &SplitAssignment,
) -> Result<DatasetManifest> {
    fs::create_dir_all(root).map_err(io_at(root))?;
    let mut manifest = DatasetManifest {
        episodes: Vec::with_capacity(episodes.len()),
        splits: splits.clone(),
    };
    manifest.splits.normalize();
    for episode in episodes {
        write_episode(&root.join(&episode.id), episode)?;
        manifest.episodes.push(episode.id.clone());
    }
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Data(format!("manifest encode: {e}")))?;
    write_text(&root.join("manifest.json"), &json)?;
    Ok(manifest)
}

pub fn load_manifest(root: &Path) -> Result<DatasetManifest> {
    let path = root.join("manifest.json");
    let text = read_text(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Loads every episode the manifest lists. Episodes that fail to parse are
/// reported as error records; the rest of the dataset still loads.
pub fn load_dataset(root: &Path) -> Result<(Vec<GraspEpisode>, Vec<EpisodeError>)> {
    let manifest = load_manifest(root)?;
    let mut episodes = Vec::new();
    let mut errors = Vec::new();
    for dir in &manifest.episodes {
        match load_episode(&root.join(dir)) {
            Ok(ep) => episodes.push(ep),
            Err(error) => errors.push(EpisodeError { dir: dir.clone(), error }),
        }
    }
    Ok((episodes, errors))
}

/// One training/evaluation sample: a fixed-length slice of an episode with
/// the episode's label and tare baseline attached.
#[derive(Debug, Clone)]
pub struct SampleWindow {
    pub episode_id: String,
    pub object_id: String,
    /// Frame index of the window's first element within its episode.
    pub start: usize,
    pub label: StateLabel,
    pub tactile: Vec<TactileFrame>,
    pub visual: WindowVisual,
    /// First frame of the episode; subtracted when calibration tares.
    pub tare_base: TactileFrame,
}

#[derive(Debug, Clone)]
pub enum WindowVisual {
    Embeddings(Vec<Vec<f32>>),
    Images(Vec<Vec<f64>>),
}

impl SampleWindow {
    pub fn len(&self) -> usize {
        self.tactile.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tactile.is_empty()
    }

    /// Converts the window to model input tensors.
    pub fn to_input(&self, cal: &ForceCalibration) -> Result<slipnet_core::WindowInput> {
        let baseline = cal.tare.then_some(&self.tare_base);
        let tactile = self
            .tactile
            .iter()
            .map(|f| forces_to_image(f, cal, baseline))
            .collect::<Result<Vec<_>>>()?;
        let visual = match &self.visual {
            WindowVisual::Embeddings(frames) => frames
                .iter()
                .map(|f| {
                    let data: Vec<f64> = f.iter().map(|&v| v as f64).collect();
                    Ok(VisualFrame::Embedding(Tensor::new(data, &[f.len()])?))
                })
                .collect::<Result<Vec<_>>>()?,
            WindowVisual::Images(frames) => frames
                .iter()
                .map(|f| {
                    Ok(VisualFrame::Image(Tensor::new(
                        f.clone(),
                        &slipnet_core::VISUAL_IMAGE_SHAPE,
                    )?))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(slipnet_core::WindowInput { tactile, visual })
    }
}

/// Slices an episode into overlapping windows of `t_len` frames.
pub fn make_windows(episode: &GraspEpisode, t_len: usize, stride: usize) -> Result<Vec<SampleWindow>> {
    if t_len == 0 {
        return Err(Error::Config(String::from("window length must be >= 1")));
    }
    if stride == 0 {
        return Err(Error::Config(String::from("stride must be >= 1")));
    }
    let frames = episode.frames();
    if t_len > frames {
        return Err(Error::Data(format!(
            "episode {} has {frames} frames, cannot cut windows of {t_len}",
            episode.id
        )));
    }
    let tare_base = episode.tactile[0];
    let mut out = Vec::new();
    let mut start = 0;
    while start + t_len <= frames {
        let visual = match &episode.visual {
            VisualData::Embeddings { frames, .. } => {
                WindowVisual::Embeddings(frames[start..start + t_len].to_vec())
            }
            VisualData::Images { frames } => {
                WindowVisual::Images(frames[start..start + t_len].to_vec())
            }
        };
        out.push(SampleWindow {
            episode_id: episode.id.clone(),
            object_id: episode.object_id.clone(),
            start,
            label: episode.label,
            tactile: episode.tactile[start..start + t_len].to_vec(),
            visual,
            tare_base,
        });
        start += stride;
    }
    Ok(out)
}

/// Windows grouped by split, plus non-fatal warnings (e.g. an empty test
/// set).
#[derive(Debug)]
pub struct SplitWindows {
    pub train: Vec<SampleWindow>,
    pub test: Vec<SampleWindow>,
    pub warnings: Vec<String>,
}

/// Cuts windows and routes them by object split. The two object sets must
/// be disjoint and jointly cover every episode's object.
pub fn split_by_object(
    episodes: &[GraspEpisode],
    splits: &SplitAssignment,
    t_len: usize,
    stride: usize,
) -> Result<SplitWindows> {
    let train: BTreeSet<&str> = splits.train.iter().map(String::as_str).collect();
    let test: BTreeSet<&str> = splits.test.iter().map(String::as_str).collect();
    let overlap: Vec<&&str> = train.intersection(&test).collect();
    if !overlap.is_empty() {
        return Err(Error::Config(format!(
            "objects assigned to both splits: {overlap:?}"
        )));
    }
    let mut out = SplitWindows { train: Vec::new(), test: Vec::new(), warnings: Vec::new() };
    for episode in episodes {
        let windows = make_windows(episode, t_len, stride)?;
        if train.contains(episode.object_id.as_str()) {
            out.train.extend(windows);
        } else if test.contains(episode.object_id.as_str()) {
            out.test.extend(windows);
        } else {
            return Err(Error::Config(format!(
                "object {} (episode {}) is in neither split",
                episode.object_id, episode.id
            )));
        }
    }
    if out.test.is_empty() {
        out.warnings.push(String::from("test split is empty; all objects are in train"));
    }
    Ok(out)
}
