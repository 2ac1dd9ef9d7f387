//! Synthetic laparoscopic workflows for desk-scale experiments.
//!
//! Phases follow the canonical order with randomly jittered durations. On
//! entering a phase each instrument is drawn present with its usage
//! probability `p` for that phase; within the phase presence follows a
//! two-state chain with switch-on rate `p / dwell` and switch-off rate
//! `(1 − p) / dwell`, whose stationary occupancy is `p`. Boxes drift as
//! mean-reverting random walks around a per-video anchor for each phase.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::anticipation::{Interval, OccurrenceTrack};
use crate::error::{Error, Result};
use crate::graph::Detection;
use crate::pipeline::task::{INSTRUMENTS, PHASES};
use crate::pipeline::VideoRecord;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub videos: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    /// Relative mean duration of each phase, in [`PHASES`] order.
    pub phase_weights: Vec<f64>,
    /// `usage[phase][instrument]`, instruments in [`INSTRUMENTS`] order.
    pub usage: Vec<Vec<f64>>,
    /// Mean frames between presence switches inside a phase.
    pub dwell: f64,
    /// Standard deviation of the per-frame box displacement.
    pub noise: f64,
    pub seed: u64,
    pub id_prefix: String,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        // Grasper, Bipolar, Hook, Scissors, Clipper, Irrigator, SpecimenBag
        let usage = vec![
            vec![0.9, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0],
            vec![0.95, 0.05, 0.9, 0.0, 0.0, 0.0, 0.0],
            vec![0.9, 0.0, 0.0, 0.4, 0.7, 0.0, 0.0],
            vec![0.95, 0.1, 0.85, 0.0, 0.0, 0.0, 0.0],
            vec![0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.9],
            vec![0.6, 0.6, 0.0, 0.0, 0.0, 0.7, 0.0],
            vec![0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.8],
        ];
        SyntheticSpec {
            videos: 5,
            min_frames: 250,
            max_frames: 350,
            phase_weights: vec![0.05, 0.3, 0.1, 0.25, 0.08, 0.12, 0.1],
            usage,
            dwell: 20.0,
            noise: 0.02,
            seed: 0,
            id_prefix: "synth".into(),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.min_frames == 0 || self.max_frames == 0 {
            return Err(Error::config("synthetic videos need at least one frame"));
        }
        if self.min_frames < PHASES.len() {
            return Err(Error::config(format!(
                "min_frames must be at least {} to hold every phase",
                PHASES.len()
            )));
        }
        if self.min_frames > self.max_frames {
            return Err(Error::config("min_frames exceeds max_frames"));
        }
        if self.phase_weights.len() != PHASES.len() || self.phase_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::config(format!("need {} positive phase weights", PHASES.len())));
        }
        if self.usage.len() != PHASES.len() || self.usage.iter().any(|r| r.len() != INSTRUMENTS.len()) {
            return Err(Error::config(format!(
                "usage table must be {} phases × {} instruments",
                PHASES.len(),
                INSTRUMENTS.len()
            )));
        }
        if self.usage.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config("usage probabilities must lie in [0, 1]"));
        }
        if !(self.dwell.is_finite() && self.dwell >= 1.0 && self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::config("dwell must be ≥ 1 and noise nonnegative"));
        }
        Ok(())
    }
}

/// Splits `frames` into one positive duration per phase.
fn phase_durations(rng: &mut ChaCha8Rng, weights: &[f64], frames: usize) -> Vec<usize> {
    let jittered: Vec<f64> = weights.iter().map(|w| w * rng.gen_range(0.6..1.4)).collect();
    let total: f64 = jittered.iter().sum();
    let spare = frames - weights.len();
    let mut out: Vec<usize> = jittered
        .iter()
        .map(|w| 1 + (w / total * spare as f64).floor() as usize)
        .collect();
    let used: usize = out.iter().sum();
    *out.last_mut().expect("at least one phase") += frames - used;
    out
}

struct Walker {
    pos: [f64; 4],
}

impl Walker {
    fn step(&mut self, rng: &mut ChaCha8Rng, anchor: [f64; 2], noise: &Normal<f64>) {
        let target = [anchor[0], anchor[1], 0.15, 0.2];
        for (k, p) in self.pos.iter_mut().enumerate() {
            let scale = if k < 2 { 1.0 } else { 0.5 };
            *p += 0.1 * (target[k] - *p) + scale * noise.sample(rng);
        }
        for p in &mut self.pos[..2] {
            *p = p.clamp(0.0, 1.0);
        }
        for p in &mut self.pos[2..] {
            *p = p.clamp(0.02, 0.5);
        }
    }
}

fn generate_video(spec: &SyntheticSpec, rng: &mut ChaCha8Rng, index: usize) -> VideoRecord {
    let frames = rng.gen_range(spec.min_frames..=spec.max_frames);
    let durations = phase_durations(rng, &spec.phase_weights, frames);
    let noise = Normal::new(0.0, spec.noise).expect("validated noise");
    let anchors: Vec<Vec<[f64; 2]>> = (0..INSTRUMENTS.len())
        .map(|_| {
            (0..PHASES.len())
                .map(|_| [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)])
                .collect()
        })
        .collect();

    let mut record = VideoRecord::empty(format!("{}{:03}", spec.id_prefix, index + 1), frames);
    let mut flags = vec![vec![false; frames]; INSTRUMENTS.len()];
    let mut walkers: Vec<Walker> = anchors
        .iter()
        .map(|a| Walker {
            pos: [a[0][0], a[0][1], 0.15, 0.2],
        })
        .collect();

    let mut start = 1;
    for (phase, &len) in durations.iter().enumerate() {
        record.phase_track.push(phase, Interval::new(start, start + len - 1));
        for (inst, inst_flags) in flags.iter_mut().enumerate() {
            let p = spec.usage[phase][inst];
            let mut on = rng.gen_bool(p);
            for t in start..start + len {
                if t > start {
                    let switch = if on { (1.0 - p) / spec.dwell } else { p / spec.dwell };
                    if rng.gen_bool(switch) {
                        on = !on;
                    }
                }
                inst_flags[t - 1] = on;
            }
        }
        for t in start..start + len {
            for (inst, w) in walkers.iter_mut().enumerate() {
                if !flags[inst][t - 1] {
                    continue;
                }
                w.step(rng, anchors[inst][phase], &noise);
                record.detections.push(Detection {
                    frame: t,
                    class_id: inst + 1,
                    cx: w.pos[0],
                    cy: w.pos[1],
                    w: w.pos[2],
                    h: w.pos[3],
                    confidence: rng.gen_range(0.5..1.0),
                });
            }
        }
        start += len;
    }
    for (inst, f) in flags.iter().enumerate() {
        for iv in OccurrenceTrack::runs(f) {
            record.instrument_track.push(inst, iv);
        }
    }
    record
}

/// Generates `spec.videos` records, deterministic in `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<VideoRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.videos).map(|i| generate_video(spec, &mut rng, i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeRoster;
    use crate::pipeline::TaskSpec;

    #[test]
    fn records_are_valid_and_seeded() {
        let spec = SyntheticSpec::default();
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        for r in &a {
            r.validate(&NodeRoster::cholec80()).unwrap();
            assert!((250..=350).contains(&r.frames));
        }
        let c = generate_synthetic(&SyntheticSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn forced_usage_fills_the_phase() {
        let mut spec = SyntheticSpec::default();
        spec.usage[1][1] = 1.0;
        spec.usage.iter_mut().for_each(|row| row[4] = 0.0);
        for r in generate_synthetic(&spec).unwrap() {
            let calot = r.phase_track.intervals(1)[0];
            for t in calot.start..=calot.end {
                assert!(r.instrument_track.is_present(1, t));
            }
            assert!(r.instrument_track.intervals(4).is_empty());
            let tgt = TaskSpec::instrument().targets(&r, &[2.0, 3.0, 5.0]).unwrap();
            // Clipper is target class 2.
            for (hi, h) in [2.0, 3.0, 5.0].iter().enumerate() {
                assert!(tgt.series(hi, 2).iter().all(|v| v == h));
            }
        }
    }

    #[test]
    fn zero_length_is_a_config_error() {
        let spec = SyntheticSpec {
            min_frames: 0,
            max_frames: 0,
            ..SyntheticSpec::default()
        };
        assert!(matches!(generate_synthetic(&spec), Err(Error::Config(_))));
        let bad = SyntheticSpec {
            usage: vec![vec![1.5; 7]; 7],
            ..SyntheticSpec::default()
        };
        assert!(matches!(generate_synthetic(&bad), Err(Error::Config(_))));
    }
}
