use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Frames per minute at the 1 fps working rate.
pub const FRAMES_PER_MINUTE: f64 = 60.0;

/// Inclusive 1-based frame interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        Interval { start, end }
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.start <= frame && frame <= self.end
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

/// Presence intervals per label.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OccurrenceTrack {
    labels: Vec<String>,
    intervals: Vec<Vec<Interval>>,
}

impl OccurrenceTrack {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let intervals = vec![Vec::new(); labels.len()];
        OccurrenceTrack { labels, intervals }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn intervals(&self, class: usize) -> &[Interval] {
        &self.intervals[class]
    }

    pub fn intervals_of(&self, label: &str) -> Option<&[Interval]> {
        self.index_of(label).map(|i| self.intervals(i))
    }

    /// Adds an interval, keeping the class's list sorted.
    pub fn push(&mut self, class: usize, interval: Interval) {
        let list = &mut self.intervals[class];
        let pos = list.partition_point(|i| i < &interval);
        list.insert(pos, interval);
    }

    pub fn push_label(&mut self, label: &str, interval: Interval) -> Result<()> {
        let class = self
            .index_of(label)
            .ok_or_else(|| Error::data(format!("unknown label {label:?}")))?;
        self.push(class, interval);
        Ok(())
    }

    pub fn is_present(&self, class: usize, frame: usize) -> bool {
        self.intervals[class].iter().any(|i| i.contains(frame))
    }

    /// Checks ordering, non-overlap and the `[1, frames]` range.
    pub fn validate(&self, frames: usize) -> Result<()> {
        for (label, list) in self.labels.iter().zip(&self.intervals) {
            check_intervals(list, frames).map_err(|e| Error::data(format!("{label}: {e}")))?;
        }
        Ok(())
    }

    /// Restricts to the given labels, in that order.
    pub fn select(&self, labels: &[String]) -> Result<OccurrenceTrack> {
        let mut out = OccurrenceTrack::new(labels.iter().cloned());
        for (i, l) in labels.iter().enumerate() {
            let src = self
                .index_of(l)
                .ok_or_else(|| Error::data(format!("track has no label {l:?}")))?;
            out.intervals[i] = self.intervals[src].clone();
        }
        Ok(out)
    }

    /// Presence intervals from per-frame flags (`flags[t]` is frame `t + 1`).
    pub fn runs(flags: &[bool]) -> Vec<Interval> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, &on) in flags.iter().enumerate() {
            match (on, start) {
                (true, None) => start = Some(i + 1),
                (false, Some(s)) => {
                    out.push(Interval::new(s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push(Interval::new(s, flags.len()));
        }
        out
    }
}

fn check_intervals(list: &[Interval], frames: usize) -> std::result::Result<(), String> {
    for iv in list {
        if iv.start == 0 || iv.is_empty() || iv.end > frames {
            return Err(format!("interval [{}, {}] outside 1..={frames}", iv.start, iv.end));
        }
    }
    for w in list.windows(2) {
        if w[1].start <= w[0].end {
            return Err(format!(
                "intervals [{}, {}] and [{}, {}] overlap",
                w[0].start, w[0].end, w[1].start, w[1].end
            ));
        }
    }
    Ok(())
}

/// Minutes until the next presence of one class, clipped to `horizon`.
/// Zero inside an interval, `horizon` when nothing starts within it.
pub fn remaining_time(intervals: &[Interval], frames: usize, horizon: f64) -> Result<Vec<f64>> {
    check_intervals(intervals, frames).map_err(Error::data)?;
    let mut out = Vec::with_capacity(frames);
    let mut next = 0;
    for t in 1..=frames {
        while next < intervals.len() && intervals[next].end < t {
            next += 1;
        }
        let r = match intervals.get(next) {
            Some(iv) if iv.start <= t => 0.0,
            Some(iv) => ((iv.start - t) as f64 / FRAMES_PER_MINUTE).min(horizon),
            None => horizon,
        };
        out.push(r);
    }
    Ok(out)
}

/// Ground truth for every horizon: one `T × C` tensor each.
#[derive(Clone, Debug, PartialEq)]
pub struct AnticipationTarget {
    pub horizons: Vec<f64>,
    pub values: Vec<Tensor>,
}

impl AnticipationTarget {
    pub fn frames(&self) -> usize {
        self.values.first().map_or(0, |v| v.shape()[0])
    }

    pub fn classes(&self) -> usize {
        self.values.first().map_or(0, |v| v.shape()[1])
    }

    pub fn get(&self, horizon: usize, frame_index: usize, class: usize) -> f64 {
        self.values[horizon].at(&[frame_index, class])
    }

    /// Column of one class at one horizon, one value per frame.
    pub fn series(&self, horizon: usize, class: usize) -> Vec<f64> {
        let t = &self.values[horizon];
        let c = t.shape()[1];
        t.data().iter().skip(class).step_by(c).copied().collect()
    }

    /// Layout of the model output: `T × H × C`.
    pub fn to_prediction_layout(&self) -> Tensor {
        let (t, c, h) = (self.frames(), self.classes(), self.horizons.len());
        let mut out = Tensor::zeros(&[t, h, c]);
        for (hi, v) in self.values.iter().enumerate() {
            for f in 0..t {
                for ci in 0..c {
                    out.set(&[f, hi, ci], v.at(&[f, ci]));
                }
            }
        }
        out
    }
}

pub fn make_targets(track: &OccurrenceTrack, frames: usize, horizons: &[f64]) -> Result<AnticipationTarget> {
    let classes = track.labels().len();
    let mut values = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let mut t = Tensor::zeros(&[frames, classes]);
        for c in 0..classes {
            let series = remaining_time(track.intervals(c), frames, h)
                .map_err(|e| Error::data(format!("{}: {e}", track.labels()[c])))?;
            for (f, v) in series.into_iter().enumerate() {
                t.set(&[f, c], v);
            }
        }
        values.push(t);
    }
    Ok(AnticipationTarget {
        horizons: horizons.to_vec(),
        values,
    })
}
