use std::fmt;
use std::str::FromStr;

use crate::anticipation::{make_targets, AnticipationTarget, OccurrenceTrack};
use crate::error::{Error, Result};
use crate::pipeline::VideoRecord;

/// Instrument labels of the annotation track, in roster order (node 1..).
pub const INSTRUMENTS: [&str; 7] = [
    "Grasper",
    "Bipolar",
    "Hook",
    "Scissors",
    "Clipper",
    "Irrigator",
    "SpecimenBag",
];

/// Cholec80 surgical phases in their canonical order.
pub const PHASES: [&str; 7] = [
    "Preparation",
    "CalotTriangleDissection",
    "ClippingCutting",
    "GallbladderDissection",
    "GallbladderPackaging",
    "CleaningCoagulation",
    "GallbladderRetraction",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Instrument,
    Phase,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Instrument => "instrument",
            TaskKind::Phase => "phase",
        })
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "instrument" => Ok(TaskKind::Instrument),
            "phase" => Ok(TaskKind::Phase),
            other => Err(Error::config(format!("unknown task {other:?}, expected instrument or phase"))),
        }
    }
}

/// What is anticipated. Graspers and hooks are nearly always present and
/// the preparation phase always comes first, so neither is a target.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub classes: Vec<String>,
}

impl TaskSpec {
    pub fn new(kind: TaskKind) -> Self {
        let classes: Vec<&str> = match kind {
            TaskKind::Instrument => vec!["Bipolar", "Scissors", "Clipper", "Irrigator", "SpecimenBag"],
            TaskKind::Phase => PHASES[1..].to_vec(),
        };
        TaskSpec {
            kind,
            classes: classes.into_iter().map(String::from).collect(),
        }
    }

    pub fn instrument() -> Self {
        Self::new(TaskKind::Instrument)
    }

    pub fn phase() -> Self {
        Self::new(TaskKind::Phase)
    }

    pub fn track<'a>(&self, record: &'a VideoRecord) -> &'a OccurrenceTrack {
        match self.kind {
            TaskKind::Instrument => &record.instrument_track,
            TaskKind::Phase => &record.phase_track,
        }
    }

    pub fn targets(&self, record: &VideoRecord, horizons: &[f64]) -> Result<AnticipationTarget> {
        let track = self
            .track(record)
            .select(&self.classes)
            .map_err(|e| Error::data(format!("video {}: {e}", record.video_id)))?;
        make_targets(&track, record.frames, horizons)
    }
}
