//! Detection and annotation files.
//!
//! Detections: `video_id,frame,class_id,cx,cy,w,h,confidence`, one box per
//! line, frames 1-based at 1 fps, coordinates normalized to `[0, 1]`.
//!
//! Annotations: `video_id,track,label,start_frame,end_frame`, one inclusive
//! interval per line, `track` being `phase` or `instrument`. Phase intervals
//! must tile `[1, T]`; their last frame defines the video length `T`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::anticipation::{Interval, OccurrenceTrack};
use crate::error::{Error, Result};
use crate::graph::{frames_to_sequence, Detection, GraphSequence, NodeRoster};
use crate::pipeline::task::{INSTRUMENTS, PHASES};
use crate::pipeline::write_atomic;

pub const DETECTION_HEADER: [&str; 8] = ["video_id", "frame", "class_id", "cx", "cy", "w", "h", "confidence"];
pub const ANNOTATION_HEADER: [&str; 5] = ["video_id", "track", "label", "start_frame", "end_frame"];

/// One video resampled to 1 fps.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    pub frames: usize,
    pub detections: Vec<Detection>,
    /// Over [`INSTRUMENTS`].
    pub instrument_track: OccurrenceTrack,
    /// Over [`PHASES`].
    pub phase_track: OccurrenceTrack,
}

impl VideoRecord {
    /// A record with empty tracks and no detections.
    pub fn empty(video_id: impl Into<String>, frames: usize) -> Self {
        VideoRecord {
            video_id: video_id.into(),
            frames,
            detections: Vec::new(),
            instrument_track: OccurrenceTrack::new(INSTRUMENTS),
            phase_track: OccurrenceTrack::new(PHASES),
        }
    }

    pub fn validate(&self, roster: &NodeRoster) -> Result<()> {
        let ctx = |e: Error| Error::data(format!("video {}: {e}", self.video_id));
        check_phase_partition(&self.phase_track, self.frames).map_err(ctx)?;
        self.instrument_track.validate(self.frames).map_err(ctx)?;
        for d in &self.detections {
            d.validate(roster).map_err(ctx)?;
            if d.frame == 0 || d.frame > self.frames {
                return Err(ctx(Error::data(format!(
                    "detection frame {} beyond annotated range 1..={}",
                    d.frame, self.frames
                ))));
            }
        }
        Ok(())
    }

    pub fn sequence(&self, roster: &NodeRoster) -> Result<GraphSequence> {
        frames_to_sequence(&self.detections, self.frames, roster)
    }

    /// Detections grouped per frame; entry `t` holds frame `t + 1`.
    pub fn detections_by_frame(&self) -> Vec<Vec<Detection>> {
        let mut out = vec![Vec::new(); self.frames];
        for d in &self.detections {
            if (1..=self.frames).contains(&d.frame) {
                out[d.frame - 1].push(d.clone());
            }
        }
        out
    }
}

/// Phase intervals, across all labels, must cover `[1, frames]` without
/// gaps or overlaps.
pub fn check_phase_partition(track: &OccurrenceTrack, frames: usize) -> Result<()> {
    let mut all: Vec<Interval> = (0..track.labels().len())
        .flat_map(|c| track.intervals(c).iter().copied())
        .collect();
    all.sort();
    let mut next = 1;
    for iv in &all {
        if iv.start > next {
            return Err(Error::data(format!("phase gap: frames {next}..{} unannotated", iv.start - 1)));
        }
        if iv.start < next {
            return Err(Error::data(format!("phase intervals overlap at frame {}", iv.start)));
        }
        next = iv.end + 1;
    }
    if next != frames + 1 {
        return Err(Error::data(format!(
            "phases cover frames 1..{} of {frames}",
            next.saturating_sub(1)
        )));
    }
    Ok(())
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_error(path, line, e.to_string())
}

/// Yields `(line, record)` pairs after checking the header. An empty input
/// yields nothing.
fn records<R: Read>(input: R, path: &Path, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let found = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.is_empty() {
        return Ok(Vec::new());
    }
    if found.iter().ne(header.iter().copied()) {
        return Err(parse_error(
            path,
            1,
            format!("expected header {:?}, found {:?}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, path: &Path, line: usize) -> Result<T> {
    rec[i]
        .parse()
        .map_err(|_| parse_error(path, line, format!("{name}: cannot parse {:?}", &rec[i])))
}

/// Parses a detection file into `(line, video_id, detection)` triples.
pub fn read_detections<R: Read>(input: R, path: &Path) -> Result<Vec<(usize, String, Detection)>> {
    let mut out = Vec::new();
    for (line, rec) in records(input, path, &DETECTION_HEADER)? {
        let d = Detection {
            frame: field(&rec, 1, "frame", path, line)?,
            class_id: field(&rec, 2, "class_id", path, line)?,
            cx: field(&rec, 3, "cx", path, line)?,
            cy: field(&rec, 4, "cy", path, line)?,
            w: field(&rec, 5, "w", path, line)?,
            h: field(&rec, 6, "h", path, line)?,
            confidence: field(&rec, 7, "confidence", path, line)?,
        };
        out.push((line, rec[0].to_string(), d));
    }
    Ok(out)
}

struct Annotations {
    phase: OccurrenceTrack,
    instrument: OccurrenceTrack,
}

fn read_annotations<R: Read>(input: R, path: &Path) -> Result<BTreeMap<String, Annotations>> {
    let mut videos: BTreeMap<String, Annotations> = BTreeMap::new();
    for (line, rec) in records(input, path, &ANNOTATION_HEADER)? {
        let start: usize = field(&rec, 3, "start_frame", path, line)?;
        let end: usize = field(&rec, 4, "end_frame", path, line)?;
        if start == 0 || end < start {
            return Err(parse_error(path, line, format!("invalid interval [{start}, {end}]")));
        }
        let entry = videos.entry(rec[0].to_string()).or_insert_with(|| Annotations {
            phase: OccurrenceTrack::new(PHASES),
            instrument: OccurrenceTrack::new(INSTRUMENTS),
        });
        let track = match &rec[1] {
            "phase" => &mut entry.phase,
            "instrument" => &mut entry.instrument,
            other => return Err(parse_error(path, line, format!("unknown track {other:?}"))),
        };
        track
            .push_label(&rec[2], Interval::new(start, end))
            .map_err(|e| parse_error(path, line, e.to_string()))?;
    }
    Ok(videos)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Loads and validates every annotated video, ordered by video id.
pub fn load_dataset(detections: &Path, annotations: &Path, roster: &NodeRoster) -> Result<Vec<VideoRecord>> {
    let ann = read_annotations(open(annotations)?, annotations)?;
    let mut records: BTreeMap<String, VideoRecord> = BTreeMap::new();
    for (id, a) in ann {
        let frames = (0..a.phase.labels().len())
            .flat_map(|c| a.phase.intervals(c).iter().map(|iv| iv.end))
            .max()
            .ok_or_else(|| Error::data(format!("video {id}: no phase annotation")))?;
        let record = VideoRecord {
            video_id: id.clone(),
            frames,
            detections: Vec::new(),
            instrument_track: a.instrument,
            phase_track: a.phase,
        };
        records.insert(id, record);
    }
    let det_path: PathBuf = detections.to_path_buf();
    for (line, id, d) in read_detections(open(detections)?, detections)? {
        let rec = records
            .get_mut(&id)
            .ok_or_else(|| parse_error(&det_path, line, format!("video {id:?} has no annotations")))?;
        d.validate(roster).map_err(|e| parse_error(&det_path, line, e.to_string()))?;
        if d.frame == 0 || d.frame > rec.frames {
            return Err(parse_error(
                &det_path,
                line,
                format!("frame {} beyond annotated range 1..={}", d.frame, rec.frames),
            ));
        }
        rec.detections.push(d);
    }
    let records: Vec<VideoRecord> = records.into_values().collect();
    for r in &records {
        r.validate(roster)?;
    }
    Ok(records)
}

pub fn write_detections(records: &[VideoRecord], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{}", DETECTION_HEADER.join(","))?;
    for r in records {
        for d in &r.detections {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.video_id, d.frame, d.class_id, d.cx, d.cy, d.w, d.h, d.confidence
            )?;
        }
    }
    Ok(())
}

pub fn write_annotations(records: &[VideoRecord], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{}", ANNOTATION_HEADER.join(","))?;
    for r in records {
        for (name, track) in [("phase", &r.phase_track), ("instrument", &r.instrument_track)] {
            for (c, label) in track.labels().iter().enumerate() {
                for iv in track.intervals(c) {
                    writeln!(out, "{},{name},{label},{},{}", r.video_id, iv.start, iv.end)?;
                }
            }
        }
    }
    Ok(())
}

pub fn save_dataset(records: &[VideoRecord], detections: &Path, annotations: &Path) -> Result<()> {
    write_atomic(detections, |w| write_detections(records, w))?;
    write_atomic(annotations, |w| write_annotations(records, w))
}
