//! Preset experiment runner: trains a family of model variants on one
//! dataset under identical seeds and splits, then writes comparable
//! results as CSV.
//!
//! Presets:
//! * `seq_len_sweep` — fused multi-scale model at window lengths 8..=13.
//! * `modality_ablation` — tactile-only, visual-only, and fused at T = 13.
//! * `arch_comparison` — fused multi-scale vs single-scale stacks at T = 13.
//!
//! Every variant trains from the same master seed on the same
//! object-disjoint split; split hygiene is checked before any training
//! starts. Outputs in `out_dir`: `metrics.csv` (one row per variant),
//! `confusion.csv`, `history.csv`, and `checkpoints/<variant>.slipckpt`.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::Deserialize;
use slipnet_core::{Modality, SlipModelConfig, TemporalArch};

use crate::checkpoint;
use crate::dataset::{load_dataset, load_manifest, split_by_object, ForceCalibration};
use crate::error::{io_at, Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::train::{infer_visual_mode, train, EpochRecord, TrainConfig, SYNTH_LR};

pub const PRESETS: [&str; 3] = ["seq_len_sweep", "modality_ablation", "arch_comparison"];

fn default_lr() -> f64 {
    SYNTH_LR
}
fn default_batch() -> usize {
    8
}
fn default_stride() -> usize {
    1
}

/// An experiment spec, normally parsed from a TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub preset: String,
    /// Dataset root (as written by the generator or recorder).
    pub data: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<ExperimentSpec> {
        toml::from_str(text).map_err(|e| Error::Config(format!("experiment spec: {e}")))
    }
}

/// One model variant a preset trains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    pub name: String,
    pub modality: Modality,
    pub temporal: TemporalArch,
    pub seq_len: usize,
}

/// The variants a preset expands to; unknown names are a usage error that
/// lists what exists.
pub fn preset_variants(preset: &str) -> Result<Vec<Variant>> {
    let v = |name: &str, modality, temporal, seq_len| Variant {
        name: name.to_string(),
        modality,
        temporal,
        seq_len,
    };
    match preset {
        "seq_len_sweep" => Ok((8..=13)
            .map(|t| v(&format!("t{t:02}"), Modality::Fused, TemporalArch::MsTcn, t))
            .collect()),
        "modality_ablation" => Ok(vec![
            v("tactile_only", Modality::TactileOnly, TemporalArch::MsTcn, 13),
            v("visual_only", Modality::VisualOnly, TemporalArch::MsTcn, 13),
            v("fused", Modality::Fused, TemporalArch::MsTcn, 13),
        ]),
        "arch_comparison" => Ok(vec![
            v("mstcn", Modality::Fused, TemporalArch::MsTcn, 13),
            v("tcn", Modality::Fused, TemporalArch::Tcn, 13),
        ]),
        other => Err(Error::Usage(format!(
            "unknown preset {other:?}; available presets: {}",
            PRESETS.join(", ")
        ))),
    }
}

/// Results for one trained variant.
#[derive(Debug)]
pub struct VariantRow {
    pub variant: Variant,
    pub report: EvalReport,
    pub history: Vec<EpochRecord>,
    pub checkpoint: PathBuf,
}

/// Full experiment result.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub rows: Vec<VariantRow>,
    /// Episodes that failed to load, as `dir: message` strings.
    pub load_errors: Vec<String>,
    pub warnings: Vec<String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_csv(rows: &[VariantRow]) -> String {
    let mut s = String::from(
        "variant,modality,temporal,seq_len,test_windows,precision,recall,f1,accuracy,degenerate\n",
    );
    for row in rows {
        let m = &row.report.metrics;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            row.variant.name,
            row.variant.modality.name(),
            match row.variant.temporal {
                TemporalArch::MsTcn => "mstcn",
                TemporalArch::Tcn => "tcn",
            },
            row.variant.seq_len,
            row.report.windows,
            m.precision,
            m.recall,
            m.f1,
            m.accuracy,
            m.degenerate
        );
    }
    s
}

pub fn confusion_csv(rows: &[VariantRow]) -> String {
    let mut s = String::from("variant,actual,predicted,count\n");
    let names = ["slip", "stable"];
    for row in rows {
        for (a, name_a) in names.iter().enumerate() {
            for (p, name_p) in names.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{name_a},{name_p},{}",
                    row.variant.name, row.report.confusion.counts[a][p]
                );
            }
        }
    }
    s
}

pub fn history_csv(rows: &[VariantRow]) -> String {
    let mut s = String::from("variant,epoch,train_loss,train_accuracy,val_loss,val_accuracy\n");
    for row in rows {
        for r in &row.history {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                row.variant.name,
                r.epoch,
                r.train_loss,
                r.train_accuracy,
                fmt_opt(r.val_loss),
                fmt_opt(r.val_accuracy)
            );
        }
    }
    s
}

/// Runs every variant of the spec's preset and writes the result files.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let variants = preset_variants(&spec.preset)?;
    if spec.epochs == 0 {
        return Err(Error::Config(String::from("experiments need at least one epoch")));
    }
    if spec.stride == 0 {
        return Err(Error::Config(String::from("stride must be >= 1")));
    }

    let manifest = load_manifest(&spec.data)?;
    let (episodes, episode_errors) = load_dataset(&spec.data)?;
    if episodes.is_empty() {
        return Err(Error::Data(format!(
            "{}: no loadable episodes",
            spec.data.display()
        )));
    }
    let load_errors: Vec<String> =
        episode_errors.iter().map(|e| format!("{}: {}", e.dir, e.error)).collect();

    // Split hygiene before any training: disjointness and coverage hold for
    // every variant's window length, checked on the cheapest one first.
    let min_t = variants.iter().map(|v| v.seq_len).min().unwrap();
    let probe = split_by_object(&episodes, &manifest.splits, min_t, spec.stride)?;
    let mut warnings = probe.warnings;

    let cal = ForceCalibration::default();
    let checkpoints_dir = spec.out_dir.join("checkpoints");
    fs::create_dir_all(&checkpoints_dir).map_err(io_at(&checkpoints_dir))?;

    let mut rows = Vec::with_capacity(variants.len());
    for variant in variants {
        let split = split_by_object(&episodes, &manifest.splits, variant.seq_len, spec.stride)?;
        warnings.extend(split.warnings.iter().map(|w| format!("{}: {w}", variant.name)));
        if split.test.is_empty() {
            return Err(Error::Data(String::from(
                "experiment needs a nonempty test split to report metrics",
            )));
        }
        let mut model_cfg =
            SlipModelConfig::preset(variant.modality, variant.seq_len, variant.temporal);
        if let Some(mode) = infer_visual_mode(&split.train) {
            model_cfg.visual_mode = mode;
        }
        let train_cfg = TrainConfig {
            lr: spec.lr,
            batch_size: spec.batch,
            epochs: spec.epochs,
            seed: spec.seed,
            ..TrainConfig::default()
        };
        let outcome = train(&model_cfg, &train_cfg, &cal, &split.train, &[], |_, _| Ok(()))?;
        let report = evaluate(&model_cfg, &outcome.params, &split.test, &cal)?;
        let ckpt = checkpoints_dir.join(format!("{}.slipckpt", variant.name));
        checkpoint::save(&ckpt, &model_cfg, &outcome.params)?;
        rows.push(VariantRow { variant, report, history: outcome.history, checkpoint: ckpt });
    }

    let metrics_path = spec.out_dir.join("metrics.csv");
    fs::write(&metrics_path, metrics_csv(&rows)).map_err(io_at(&metrics_path))?;
    let confusion_path = spec.out_dir.join("confusion.csv");
    fs::write(&confusion_path, confusion_csv(&rows)).map_err(io_at(&confusion_path))?;
    let history_path = spec.out_dir.join("history.csv");
    fs::write(&history_path, history_csv(&rows)).map_err(io_at(&history_path))?;

    Ok(ExperimentOutcome { rows, load_errors, warnings })
}
