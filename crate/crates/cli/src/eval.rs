//! Confusion matrices, precision/recall/F1, and dataset-level evaluation.
//!
//! The positive class is `stable`: precision answers "when the model says
//! the grasp is stable, how often is it?", recall answers "how many truly
//! stable windows does it recognise?". A missed slip is a false positive
//! here — the costly direction for a gripper.

use std::collections::BTreeMap;

use serde::Serialize;
use slipnet_core::{predict, SlipModelConfig, SlipModelParams, StateLabel};

use crate::dataset::{ForceCalibration, SampleWindow};
use crate::error::{Error, Result};

/// 2x2 confusion matrix, `counts[actual][predicted]` with label indices
/// slip = 0, stable = 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub counts: [[u64; 2]; 2],
}

impl Confusion {
    pub fn record(&mut self, actual: StateLabel, predicted: StateLabel) {
        self.counts[actual.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Merges another matrix into this one (for per-object aggregation).
    pub fn absorb(&mut self, other: &Confusion) {
        for a in 0..2 {
            for p in 0..2 {
                self.counts[a][p] += other.counts[a][p];
            }
        }
    }

    pub fn true_positives(&self) -> u64 {
        self.counts[1][1]
    }
    pub fn false_positives(&self) -> u64 {
        self.counts[0][1]
    }
    pub fn false_negatives(&self) -> u64 {
        self.counts[1][0]
    }
    pub fn true_negatives(&self) -> u64 {
        self.counts[0][0]
    }
}

/// Builds a large confusion matrix whose precision and recall approximate
/// the requested rates to within ~1/tp. Useful for checking F1 arithmetic
/// against externally reported (precision, recall) pairs.
pub fn confusion_from_rates(precision: f64, recall: f64, tp: u64) -> Result<Confusion> {
    for (name, v) in [("precision", precision), ("recall", recall)] {
        if !(v.is_finite() && v > 0.0 && v <= 1.0) {
            return Err(Error::Config(format!("{name} must be in (0, 1], got {v}")));
        }
    }
    if tp == 0 {
        return Err(Error::Config(String::from("tp must be positive")));
    }
    let fp = (tp as f64 * (1.0 - precision) / precision).round() as u64;
    let fn_ = (tp as f64 * (1.0 - recall) / recall).round() as u64;
    // true negatives do not enter precision/recall/F1; any filler works
    let tn = tp;
    Ok(Confusion { counts: [[tn, fp], [fn_, tp]] })
}

/// Scalar summary of a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// True when any ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

/// Computes precision/recall/F1/accuracy with `stable` as the positive
/// class. Zero-denominator ratios come back as 0.0 with the `degenerate`
/// flag set; an all-zero matrix is rejected outright.
pub fn compute_metrics(confusion: &Confusion) -> Result<Metrics> {
    let total = confusion.total();
    if total == 0 {
        return Err(Error::Data(String::from(
            "cannot compute metrics from an empty confusion matrix",
        )));
    }
    let tp = confusion.true_positives() as f64;
    let fp = confusion.false_positives() as f64;
    let fn_ = confusion.false_negatives() as f64;
    let tn = confusion.true_negatives() as f64;
    let mut degenerate = false;
    let mut ratio = |num: f64, den: f64| {
        if den == 0.0 {
            degenerate = true;
            0.0
        } else {
            num / den
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    let accuracy = (tp + tn) / total as f64;
    Ok(Metrics { precision, recall, f1, accuracy, degenerate })
}

/// Per-object slice of an evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct ObjectReport {
    pub confusion: Confusion,
    pub metrics: Metrics,
}

/// Full evaluation result. `metrics` is always recomputable from
/// `confusion` alone, and each per-object entry from its own matrix.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub confusion: Confusion,
    pub metrics: Metrics,
    pub per_object: BTreeMap<String, ObjectReport>,
    pub windows: usize,
}

/// Runs the model over every window and tallies results.
pub fn evaluate(
    config: &SlipModelConfig,
    params: &SlipModelParams,
    windows: &[SampleWindow],
    cal: &ForceCalibration,
) -> Result<EvalReport> {
    if windows.is_empty() {
        return Err(Error::Data(String::from("no windows to evaluate")));
    }
    let mut confusion = Confusion::default();
    let mut per_object: BTreeMap<String, Confusion> = BTreeMap::new();
    for window in windows {
        let input = window.to_input(cal)?;
        let pred = predict(config, params, &input)?;
        confusion.record(window.label, pred.label);
        per_object.entry(window.object_id.clone()).or_default().record(window.label, pred.label);
    }
    let per_object = per_object
        .into_iter()
        .map(|(id, c)| {
            let metrics = compute_metrics(&c)?;
            Ok((id, ObjectReport { confusion: c, metrics }))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(EvalReport {
        confusion,
        metrics: compute_metrics(&confusion)?,
        per_object,
        windows: windows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_episode, SynthEpisodeParams, SynthObjectSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use slipnet_core::{Modality, TemporalArch};

    /// Externally reported (precision, recall, f1) triples, as fractions.
    const REPORTED: [(f64, f64, f64); 11] = [
        (0.9288, 0.9856, 0.9563),
        (0.9519, 0.9900, 0.9706),
        (0.9165, 0.9633, 0.9393),
        (0.8925, 0.9867, 0.9372),
        (0.8643, 0.9622, 0.9106),
        (1.0, 0.5167, 0.6813),
        (0.9269, 1.0, 0.9621),
        (0.9012, 0.9833, 0.9405),
        (0.9322, 0.9922, 0.9612),
        (0.7754, 0.8286, 0.8011),
        (0.7638, 0.6743, 0.7162),
    ];

    #[test]
    fn f1_reproduces_reported_values_from_precision_and_recall() {
        for &(p, r, f1) in &REPORTED {
            let confusion = confusion_from_rates(p, r, 10_000_000).unwrap();
            let m = compute_metrics(&confusion).unwrap();
            assert!(
                (m.precision - p).abs() < 1e-6 && (m.recall - r).abs() < 1e-6,
                "matrix realizes the rates: got ({}, {}), want ({p}, {r})",
                m.precision,
                m.recall
            );
            assert!(
                (m.f1 - f1).abs() <= 1e-4,
                "f1 from (p={p}, r={r}): computed {}, reported {f1}",
                m.f1
            );
            assert!(!m.degenerate);
        }
    }

    #[test]
    fn f1_is_the_harmonic_mean_of_precision_and_recall() {
        let confusion = Confusion { counts: [[37, 11], [5, 83]] };
        let m = compute_metrics(&confusion).unwrap();
        let harmonic = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        assert!((m.f1 - harmonic).abs() < 1e-12);
        assert_eq!(m.precision, 83.0 / 94.0);
        assert_eq!(m.recall, 83.0 / 88.0);
        assert_eq!(m.accuracy, 120.0 / 136.0);
    }

    #[test]
    fn zero_denominators_flag_degenerate_instead_of_failing() {
        // model never says "stable": precision undefined -> 0 + flag
        let never_stable = Confusion { counts: [[50, 0], [50, 0]] };
        let m = compute_metrics(&never_stable).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(m.accuracy, 0.5);
        assert!(m.degenerate);

        // no stable windows at all: recall undefined
        let no_positives = Confusion { counts: [[80, 20], [0, 0]] };
        let m = compute_metrics(&no_positives).unwrap();
        assert_eq!(m.recall, 0.0);
        assert!(m.degenerate);

        // perfect classifier: nothing degenerate
        let perfect = Confusion { counts: [[40, 0], [0, 60]] };
        let m = compute_metrics(&perfect).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (1.0, 1.0, 1.0, 1.0));
        assert!(!m.degenerate);
    }

    #[test]
    fn empty_matrix_is_rejected() {
        assert!(compute_metrics(&Confusion::default()).is_err());
    }

    #[test]
    fn absorb_adds_cells_and_totals() {
        let mut a = Confusion { counts: [[1, 2], [3, 4]] };
        let b = Confusion { counts: [[10, 20], [30, 40]] };
        a.absorb(&b);
        assert_eq!(a.counts, [[11, 22], [33, 44]]);
        assert_eq!(a.total(), 110);
    }

    #[test]
    fn record_uses_actual_then_predicted_indexing() {
        let mut c = Confusion::default();
        c.record(StateLabel::Stable, StateLabel::Slip); // missed stable
        c.record(StateLabel::Slip, StateLabel::Stable); // missed slip
        c.record(StateLabel::Stable, StateLabel::Stable);
        assert_eq!(c.counts, [[0, 1], [1, 1]]);
        assert_eq!(c.false_negatives(), 1);
        assert_eq!(c.false_positives(), 1);
        assert_eq!(c.true_positives(), 1);
        assert_eq!(c.true_negatives(), 0);
    }

    #[test]
    fn evaluate_tallies_every_window_and_groups_by_object() {
        let mut config = SlipModelConfig::preset(Modality::Fused, 13, TemporalArch::MsTcn);
        config.visual_mode = slipnet_core::VisualMode::Passthrough { dim: crate::synth::EMBED_DIM };
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let params = SlipModelParams::init(&config, &mut rng).unwrap();
        let cal = ForceCalibration::default();

        let mut windows = Vec::new();
        for (oi, slip) in [(0, false), (1, true)] {
            let obj = SynthObjectSpec {
                object_id: format!("obj{oi:03}"),
                stiffness: 0.8,
                friction_mu: 0.7,
                weight_n: 2.0,
                grasp_width_mm: 40.0,
                seed: oi as u64,
            };
            let params_ep = SynthEpisodeParams { slip, ..SynthEpisodeParams::default() };
            let ep = generate_episode(&obj, &params_ep, 0).unwrap();
            windows.extend(crate::dataset::make_windows(&ep, 13, 4).unwrap());
        }
        assert_eq!(windows.len(), 6, "two episodes, three strided windows each");

        let report = evaluate(&config, &params, &windows, &cal).unwrap();
        assert_eq!(report.windows, 6);
        assert_eq!(report.confusion.total(), 6);
        assert_eq!(report.per_object.len(), 2);
        let mut merged = Confusion::default();
        for obj in report.per_object.values() {
            merged.absorb(&obj.confusion);
            assert_eq!(obj.metrics, compute_metrics(&obj.confusion).unwrap());
        }
        assert_eq!(merged, report.confusion, "per-object matrices partition the total");
        assert_eq!(report.metrics, compute_metrics(&report.confusion).unwrap());

        assert!(evaluate(&config, &params, &[], &cal).is_err(), "empty evaluation");
    }

    #[test]
    fn rate_helper_rejects_out_of_range_inputs() {
        assert!(confusion_from_rates(0.0, 0.5, 100).is_err());
        assert!(confusion_from_rates(0.5, 1.2, 100).is_err());
        assert!(confusion_from_rates(0.5, 0.5, 0).is_err());
        let c = confusion_from_rates(1.0, 1.0, 100).unwrap();
        assert_eq!(c.counts, [[100, 0], [0, 100]]);
    }
}
