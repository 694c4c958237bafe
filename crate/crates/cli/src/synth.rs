//! Deterministic synthetic grasp-episode generator.
//!
//! Episodes model a parallel-jaw gripper squeezing an object (grip phase)
//! and lifting it (lift phase) as seen by one finger's 4x4 force-sensing
//! array plus an 8-dimensional visual embedding stream:
//!
//! * Normal force ramps up to `grip_force * stiffness`, spread over the
//!   taxels by a per-object contact profile.
//! * A stable lift loads each finger with half the object's weight; the
//!   tangential load is constant after lift onset and stays inside the
//!   friction cone.
//! * A slipping lift produces a stick-slip sawtooth: tangential load
//!   repeatedly builds to the friction limit and releases, while the
//!   normal force sags as the object works loose. The object's visual
//!   track lags the gripper instead of following it.
//!
//! All randomness (object parameters, contact profile, sensor noise) is
//! drawn from counter-mixed ChaCha streams, so a spec with the same seed
//! regenerates the corpus byte for byte.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use slipnet_core::StateLabel;

use crate::dataset::{
    GraspEpisode, SplitAssignment, TactileFrame, VisualData, MIN_EPISODE_FRAMES, TAXELS,
};
use crate::error::{Error, Result};

/// Embedding width of the generated visual stream.
pub const EMBED_DIM: usize = 8;
/// Frames spent closing the gripper before the lift begins.
pub const GRIP_FRAMES: usize = 5;
/// Vertical travel of the gripper over the lift phase, millimetres.
pub const LIFT_MM: f64 = 30.0;
/// Stick-slip cycle length in frames.
const SAW_PERIOD: usize = 3;
/// Fraction of the friction limit left after each slip release.
const SAW_FLOOR: f64 = 0.35;
/// Fraction of the initial normal force lost by the end of a slipping lift.
const NORMAL_SAG: f64 = 0.4;
/// How much of the gripper's travel a slipping object actually follows.
const SLIP_TRACK: f64 = 0.6;
/// Noise level used by the standard corpus presets.
pub const MODERATE_NOISE: f64 = 0.02;

/// Physical description of one graspable object.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthObjectSpec {
    pub object_id: String,
    /// Contact compliance in (0, 1]: fraction of grip force the sensor sees.
    pub stiffness: f64,
    /// Finger-object friction coefficient.
    pub friction_mu: f64,
    /// Object weight in newtons.
    pub weight_n: f64,
    pub grasp_width_mm: f64,
    /// Seeds the object's contact profile and its episodes' noise.
    pub seed: u64,
}

impl SynthObjectSpec {
    pub fn validate(&self) -> Result<()> {
        if self.object_id.is_empty() {
            return Err(Error::Config(String::from("object id must be nonempty")));
        }
        let positive = [
            ("stiffness", self.stiffness),
            ("friction_mu", self.friction_mu),
            ("weight_n", self.weight_n),
            ("grasp_width_mm", self.grasp_width_mm),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Per-episode generation knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthEpisodeParams {
    /// Episode length; at least [`MIN_EPISODE_FRAMES`].
    pub frames: usize,
    pub rate_hz: f64,
    /// Commanded grip force in newtons.
    pub grip_force_n: f64,
    /// Whether this episode slips; this flag is the label source.
    pub slip: bool,
    /// Standard deviation of Gaussian noise added to every channel.
    pub noise_sigma: f64,
}

impl Default for SynthEpisodeParams {
    fn default() -> SynthEpisodeParams {
        SynthEpisodeParams {
            frames: 21,
            rate_hz: 30.0,
            grip_force_n: 4.0,
            slip: false,
            noise_sigma: 0.0,
        }
    }
}

impl SynthEpisodeParams {
    pub fn validate(&self) -> Result<()> {
        if self.frames < MIN_EPISODE_FRAMES {
            return Err(Error::Config(format!(
                "episode needs at least {MIN_EPISODE_FRAMES} frames, got {}",
                self.frames
            )));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::Config(format!("rate_hz must be positive, got {}", self.rate_hz)));
        }
        if !(self.grip_force_n.is_finite() && self.grip_force_n > 0.0) {
            return Err(Error::Config(format!(
                "grip_force_n must be positive, got {}",
                self.grip_force_n
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// splitmix64 over a salted seed; decorrelates derived RNG streams.
fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The object's fixed contact profile: how strongly each taxel couples to
/// the applied force. Deterministic in the object seed, shared by all of
/// the object's episodes.
pub fn contact_weights(obj: &SynthObjectSpec) -> [f64; TAXELS] {
    let mut rng = ChaCha12Rng::seed_from_u64(mix(obj.seed, 0x10));
    let mut w = [0.0; TAXELS];
    for v in &mut w {
        *v = rng.random_range(0.6..=1.0);
    }
    w
}

/// A grip force that holds the object with a 1.5x friction margin.
pub fn stable_grip_force(obj: &SynthObjectSpec) -> f64 {
    let sum_w: f64 = contact_weights(obj).iter().sum();
    let required = obj.weight_n / (2.0 * obj.friction_mu * obj.stiffness * sum_w);
    (1.5 * required).max(4.0)
}

/// Generates one episode. `ep_idx` distinguishes episodes of the same
/// object; the same (object, params, index) always yields identical data.
pub fn generate_episode(
    obj: &SynthObjectSpec,
    params: &SynthEpisodeParams,
    ep_idx: usize,
) -> Result<GraspEpisode> {
    obj.validate()?;
    params.validate()?;
    let l = params.frames;
    let g = GRIP_FRAMES;
    let w = contact_weights(obj);
    let sum_w: f64 = w.iter().sum();
    let mut rng = ChaCha12Rng::seed_from_u64(mix(obj.seed, 0x2000 + ep_idx as u64));
    let noise = if params.noise_sigma > 0.0 {
        Some(Normal::new(0.0, params.noise_sigma).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };
    let sample = |rng: &mut ChaCha12Rng| noise.map_or(0.0, |n| n.sample(rng));

    let full_normal = params.grip_force_n * obj.stiffness;
    let lift_span = (l - 1 - g) as f64;
    let mut tactile = Vec::with_capacity(l);
    let mut embeds: Vec<Vec<f32>> = Vec::with_capacity(l);
    let mut prev_g_pos = 0.0;
    let mut prev_obj_pos = 0.0;

    for t in 0..l {
        let ramp = (((t + 1) as f64) / g as f64).min(1.0);
        // progress through the lift, 0 at onset and 1 at the final frame
        let p = if t < g { 0.0 } else { (t - g) as f64 / lift_span };
        let sag = if params.slip && t >= g { 1.0 - NORMAL_SAG * p } else { 1.0 };
        // per-taxel normal force is normal_level * w[i]
        let normal_level = full_normal * ramp * sag;

        // per-taxel tangential force is shear_level * w[i]
        let shear_level = if t < g {
            0.0
        } else if params.slip {
            // stick phase rebuilds toward the friction limit, then releases
            let c = (t - g) % SAW_PERIOD;
            let saw = SAW_FLOOR + (1.0 - SAW_FLOOR) * c as f64 / (SAW_PERIOD - 1) as f64;
            saw * obj.friction_mu * normal_level
        } else {
            // the finger carries half the object's weight, spread by contact
            obj.weight_n / 2.0 / sum_w
        };

        let mut frame = TactileFrame::zero();
        for (i, taxel) in frame.forces.iter_mut().enumerate() {
            taxel[0] = sample(&mut rng);
            taxel[1] = shear_level * w[i] + sample(&mut rng);
            taxel[2] = normal_level * w[i] + sample(&mut rng);
        }
        tactile.push(frame);

        let g_pos = LIFT_MM * p;
        let obj_pos = if params.slip { SLIP_TRACK * g_pos } else { g_pos };
        let vel_scale = params.rate_hz / (LIFT_MM * 10.0);
        let e0 = obj_pos / LIFT_MM;
        let e1 = (obj_pos - prev_obj_pos) * vel_scale;
        let e2 = g_pos / LIFT_MM;
        let e3 = (g_pos - obj_pos) / LIFT_MM;
        let e4 = ((g_pos - prev_g_pos) - (obj_pos - prev_obj_pos)) * vel_scale;
        let e5 = normal_level / full_normal.max(f64::MIN_POSITIVE);
        let e6 = 0.5 * e0 + 0.3 * e3 + 0.1;
        let e7 = 0.6 * e2 - 0.4 * e4;
        let clean = [e0, e1, e2, e3, e4, e5, e6, e7];
        embeds.push(clean.iter().map(|v| (v + sample(&mut rng)) as f32).collect());
        prev_g_pos = g_pos;
        prev_obj_pos = obj_pos;
    }

    let episode = GraspEpisode {
        id: format!("{}_e{ep_idx:03}", obj.object_id),
        object_id: obj.object_id.clone(),
        label: if params.slip { StateLabel::Slip } else { StateLabel::Stable },
        grasp_width_mm: obj.grasp_width_mm,
        rate_hz: params.rate_hz,
        tactile,
        visual: VisualData::Embeddings { dim: EMBED_DIM, frames: embeds },
    };
    episode.validate()?;
    Ok(episode)
}

/// Total decrease in aggregate tangential load across the episode. Zero
/// for a clean stable lift; large for stick-slip. At zero noise a single
/// threshold on this statistic separates the classes perfectly.
pub fn shear_drop_magnitude(episode: &GraspEpisode) -> f64 {
    let totals: Vec<f64> = episode
        .tactile
        .iter()
        .map(|f| f.forces.iter().map(|taxel| taxel[1].abs()).sum())
        .collect();
    totals.windows(2).map(|pair| (pair[0] - pair[1]).max(0.0)).sum()
}

/// Whole-corpus generation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub objects: usize,
    pub episodes_per_object: usize,
    /// First `train_objects` objects form the train split, the rest test.
    pub train_objects: usize,
    /// Fraction of each object's episodes that slip (rounded to a count).
    pub slip_fraction: f64,
    pub noise_sigma: f64,
    pub frames: usize,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.objects == 0 || self.episodes_per_object == 0 {
            return Err(Error::Config(String::from(
                "corpus needs at least one object and one episode per object",
            )));
        }
        if self.train_objects > self.objects {
            return Err(Error::Config(format!(
                "train_objects {} exceeds object count {}",
                self.train_objects, self.objects
            )));
        }
        if !(0.0..=1.0).contains(&self.slip_fraction) {
            return Err(Error::Config(format!(
                "slip_fraction must be in [0, 1], got {}",
                self.slip_fraction
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.frames < MIN_EPISODE_FRAMES {
            return Err(Error::Config(format!(
                "episodes need at least {MIN_EPISODE_FRAMES} frames, got {}",
                self.frames
            )));
        }
        Ok(())
    }
}

/// The object roster a corpus spec implies: ids, physics, and seeds are
/// all derived from the corpus seed.
pub fn corpus_objects(spec: &CorpusSpec) -> Vec<SynthObjectSpec> {
    (0..spec.objects)
        .map(|i| {
            let seed = mix(spec.seed, 0x0B1E_C700 + i as u64);
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            SynthObjectSpec {
                object_id: format!("obj{i:03}"),
                stiffness: rng.random_range(0.2..=1.0),
                friction_mu: rng.random_range(0.3..=1.2),
                weight_n: rng.random_range(0.5..=3.0),
                grasp_width_mm: rng.random_range(20.0..=80.0),
                seed,
            }
        })
        .collect()
}

/// Generates every episode of the corpus plus its object-disjoint split
/// assignment. Identical specs produce identical corpora.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<(Vec<GraspEpisode>, SplitAssignment)> {
    spec.validate()?;
    let objects = corpus_objects(spec);
    let slip_count = ((spec.slip_fraction * spec.episodes_per_object as f64).round() as usize)
        .min(spec.episodes_per_object);
    let mut episodes = Vec::with_capacity(spec.objects * spec.episodes_per_object);
    for obj in &objects {
        let hold = stable_grip_force(obj);
        for ep_idx in 0..spec.episodes_per_object {
            let slip = ep_idx < slip_count;
            let params = SynthEpisodeParams {
                frames: spec.frames,
                rate_hz: 30.0,
                grip_force_n: if slip { 0.6 * hold } else { hold },
                slip,
                noise_sigma: spec.noise_sigma,
            };
            episodes.push(generate_episode(obj, &params, ep_idx)?);
        }
    }
    let splits = SplitAssignment {
        train: objects[..spec.train_objects].iter().map(|o| o.object_id.clone()).collect(),
        test: objects[spec.train_objects..].iter().map(|o| o.object_id.clone()).collect(),
    };
    Ok((episodes, splits))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_object() -> SynthObjectSpec {
        SynthObjectSpec {
            object_id: String::from("objT"),
            stiffness: 0.8,
            friction_mu: 0.7,
            weight_n: 2.0,
            grasp_width_mm: 45.0,
            seed: 99,
        }
    }

    fn noiseless(slip: bool) -> SynthEpisodeParams {
        SynthEpisodeParams { slip, ..SynthEpisodeParams::default() }
    }

    #[test]
    fn stable_shear_is_constant_after_lift_onset_and_inside_friction_cone() {
        let obj = test_object();
        let ep = generate_episode(&obj, &noiseless(false), 0).unwrap();
        let g = GRIP_FRAMES;
        let first = &ep.tactile[g];
        for t in g..ep.frames() {
            for i in 0..TAXELS {
                assert_eq!(
                    ep.tactile[t].forces[i][1], first.forces[i][1],
                    "shear bit-identical across lift at zero noise (t={t}, taxel {i})"
                );
                let shear = ep.tactile[t].forces[i][1].abs();
                let limit = obj.friction_mu * ep.tactile[t].forces[i][2];
                assert!(shear < limit, "taxel {i} at t={t}: shear {shear} vs limit {limit}");
            }
        }
        // frame-level check: the finger carries half the weight
        let total: f64 = first.forces.iter().map(|t| t[1]).sum();
        assert!((total - obj.weight_n / 2.0).abs() < 1e-9, "total shear {total}");
        // grip phase carries no tangential load
        assert!(ep.tactile[..g].iter().all(|f| f.forces.iter().all(|t| t[1] == 0.0)));
    }

    #[test]
    fn normal_force_reaches_grip_times_stiffness_and_sags_when_slipping() {
        let obj = test_object();
        let params = noiseless(false);
        let ep = generate_episode(&obj, &params, 0).unwrap();
        let w = contact_weights(&obj);
        let sum_w: f64 = w.iter().sum();
        let total_z = |f: &TactileFrame| -> f64 { f.forces.iter().map(|t| t[2]).sum() };
        let full = params.grip_force_n * obj.stiffness * sum_w;
        let at_onset = total_z(&ep.tactile[GRIP_FRAMES]);
        assert!((at_onset - full).abs() < 1e-9, "ramp tops out at grip*stiffness");
        assert_eq!(total_z(ep.tactile.last().unwrap()), at_onset, "stable normal holds");

        let slip_ep = generate_episode(&obj, &noiseless(true), 0).unwrap();
        let onset = total_z(&slip_ep.tactile[GRIP_FRAMES]);
        let last = total_z(slip_ep.tactile.last().unwrap());
        assert!(
            (last - onset * (1.0 - NORMAL_SAG)).abs() < 1e-9,
            "slipping normal sags by the full factor: onset {onset}, last {last}"
        );
    }

    #[test]
    fn slip_shear_shows_sawtooth_with_large_drops() {
        for frames in [MIN_EPISODE_FRAMES, 21] {
            let params = SynthEpisodeParams { frames, slip: true, ..SynthEpisodeParams::default() };
            let ep = generate_episode(&test_object(), &params, 0).unwrap();
            let totals: Vec<f64> = ep
                .tactile
                .iter()
                .map(|f| f.forces.iter().map(|t| t[1]).sum())
                .collect();
            let peak = totals.iter().cloned().fold(0.0, f64::max);
            let mut big_drops = 0;
            for t in 1..totals.len() - 1 {
                let is_max = totals[t] > totals[t - 1] && totals[t] > totals[t + 1];
                if is_max && totals[t] - totals[t + 1] > 0.2 * peak {
                    big_drops += 1;
                }
            }
            assert!(
                big_drops >= 2,
                "{frames}-frame episode has {big_drops} release events, need >= 2"
            );
        }
    }

    #[test]
    fn drop_statistic_separates_classes_at_zero_noise() {
        let spec = CorpusSpec {
            objects: 10,
            episodes_per_object: 4,
            train_objects: 8,
            slip_fraction: 0.5,
            noise_sigma: 0.0,
            frames: 21,
            seed: 7,
        };
        let (episodes, _) = generate_corpus(&spec).unwrap();
        let mut max_stable = f64::MIN;
        let mut min_slip = f64::MAX;
        for ep in &episodes {
            let d = shear_drop_magnitude(ep);
            match ep.label {
                StateLabel::Stable => max_stable = max_stable.max(d),
                StateLabel::Slip => min_slip = min_slip.min(d),
            }
        }
        assert!(
            max_stable < min_slip,
            "classes overlap: max stable drop {max_stable}, min slip drop {min_slip}"
        );
        let threshold = 0.5 * (max_stable + min_slip);
        for ep in &episodes {
            let predicted_slip = shear_drop_magnitude(ep) > threshold;
            assert_eq!(predicted_slip, ep.label == StateLabel::Slip, "episode {}", ep.id);
        }
    }

    #[test]
    fn softer_objects_produce_strictly_weaker_peak_readings() {
        let params = noiseless(false);
        let mut prev = f64::MAX;
        for stiffness in [1.0, 0.7, 0.4, 0.2] {
            let obj = SynthObjectSpec { stiffness, ..test_object() };
            let ep = generate_episode(&obj, &params, 0).unwrap();
            let peak = ep
                .tactile
                .iter()
                .flat_map(|f| f.forces.iter().map(|t| t[2]))
                .fold(0.0, f64::max);
            assert!(peak < prev, "stiffness {stiffness}: peak {peak} not below {prev}");
            prev = peak;
        }
    }

    #[test]
    fn visual_track_follows_gripper_when_stable_and_lags_when_slipping() {
        let stable = generate_episode(&test_object(), &noiseless(false), 0).unwrap();
        let slip = generate_episode(&test_object(), &noiseless(true), 0).unwrap();
        let rel = |ep: &GraspEpisode, t: usize| match &ep.visual {
            VisualData::Embeddings { frames, .. } => frames[t][3] as f64,
            VisualData::Images { .. } => unreachable!(),
        };
        for t in 0..stable.frames() {
            assert_eq!(rel(&stable, t), 0.0, "stable object tracks the gripper exactly");
        }
        let last = slip.frames() - 1;
        assert!(rel(&slip, last) > 0.1, "slip leaves a visible relative displacement");
        for t in GRIP_FRAMES..last {
            assert!(rel(&slip, t + 1) >= rel(&slip, t), "slip displacement grows");
        }
    }

    #[test]
    fn same_inputs_regenerate_identical_episodes() {
        let obj = test_object();
        let params = SynthEpisodeParams {
            slip: true,
            noise_sigma: 0.05,
            ..SynthEpisodeParams::default()
        };
        let a = generate_episode(&obj, &params, 3).unwrap();
        let b = generate_episode(&obj, &params, 3).unwrap();
        assert_eq!(a, b);
        let c = generate_episode(&obj, &params, 4).unwrap();
        assert_ne!(a.tactile, c.tactile, "episode index changes the noise stream");
    }

    #[test]
    fn corpus_respects_slip_quota_exactly() {
        let spec = CorpusSpec {
            objects: 3,
            episodes_per_object: 20,
            train_objects: 2,
            slip_fraction: 0.5,
            noise_sigma: MODERATE_NOISE,
            frames: 21,
            seed: 11,
        };
        let (episodes, _) = generate_corpus(&spec).unwrap();
        assert_eq!(episodes.len(), 60);
        for obj in 0..3 {
            let slips = episodes
                .iter()
                .filter(|e| e.object_id == format!("obj{obj:03}"))
                .filter(|e| e.label == StateLabel::Slip)
                .count();
            assert_eq!(slips, 10, "object {obj}");
        }
        let quarter = CorpusSpec { slip_fraction: 0.25, ..spec };
        let (episodes, _) = generate_corpus(&quarter).unwrap();
        let slips = episodes.iter().filter(|e| e.label == StateLabel::Slip).count();
        assert_eq!(slips, 15, "3 objects x round(0.25 * 20)");
    }

    #[test]
    fn corpus_split_lists_every_object_once() {
        let spec = CorpusSpec {
            objects: 5,
            episodes_per_object: 2,
            train_objects: 3,
            slip_fraction: 0.5,
            noise_sigma: 0.0,
            frames: 13,
            seed: 21,
        };
        let (episodes, splits) = generate_corpus(&spec).unwrap();
        assert_eq!(splits.train, vec!["obj000", "obj001", "obj002"]);
        assert_eq!(splits.test, vec!["obj003", "obj004"]);
        for ep in &episodes {
            ep.validate().unwrap();
        }
    }

    #[test]
    fn corpus_generation_is_deterministic() {
        let spec = CorpusSpec {
            objects: 4,
            episodes_per_object: 3,
            train_objects: 3,
            slip_fraction: 0.5,
            noise_sigma: MODERATE_NOISE,
            frames: 21,
            seed: 0xDEAD_BEEF,
        };
        let (a, sa) = generate_corpus(&spec).unwrap();
        let (b, sb) = generate_corpus(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        let other = CorpusSpec { seed: 1, ..spec };
        let (c, _) = generate_corpus(&other).unwrap();
        assert_ne!(a, c, "different seeds give different data");
    }

    #[test]
    fn invalid_params_are_rejected() {
        let obj = test_object();
        let short = SynthEpisodeParams { frames: 12, ..SynthEpisodeParams::default() };
        assert!(generate_episode(&obj, &short, 0).is_err());
        let weak = SynthEpisodeParams { grip_force_n: 0.0, ..SynthEpisodeParams::default() };
        assert!(generate_episode(&obj, &weak, 0).is_err());
        let neg = SynthEpisodeParams { noise_sigma: -0.1, ..SynthEpisodeParams::default() };
        assert!(generate_episode(&obj, &neg, 0).is_err());
        let bad_obj = SynthObjectSpec { stiffness: 0.0, ..test_object() };
        assert!(generate_episode(&bad_obj, &SynthEpisodeParams::default(), 0).is_err());
        let bad_corpus = CorpusSpec {
            objects: 2,
            episodes_per_object: 2,
            train_objects: 3,
            slip_fraction: 0.5,
            noise_sigma: 0.0,
            frames: 21,
            seed: 0,
        };
        assert!(generate_corpus(&bad_corpus).is_err());
        let bad_fraction = CorpusSpec { train_objects: 1, slip_fraction: 1.5, ..bad_corpus };
        assert!(generate_corpus(&bad_fraction).is_err());
    }

    #[test]
    fn stable_grip_always_exceeds_the_friction_requirement() {
        for seed in 0..20 {
            let spec = CorpusSpec {
                objects: 1,
                episodes_per_object: 1,
                train_objects: 1,
                slip_fraction: 0.0,
                noise_sigma: 0.0,
                frames: 13,
                seed,
            };
            let obj = &corpus_objects(&spec)[0];
            let sum_w: f64 = contact_weights(obj).iter().sum();
            let required = obj.weight_n / (2.0 * obj.friction_mu * obj.stiffness * sum_w);
            assert!(stable_grip_force(obj) >= 1.5 * required);
            assert!(stable_grip_force(obj) >= 4.0);
        }
    }
}
