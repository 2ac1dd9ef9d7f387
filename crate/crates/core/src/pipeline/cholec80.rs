//! Import of the native Cholec80 annotations.
//!
//! Phase files (`videoNN-phase.txt`) label every frame of the 25 fps video:
//! a `Frame<TAB>Phase` header, then `index<TAB>name`. Tool files
//! (`videoNN-tool.txt`) give one row per second: `Frame` followed by seven
//! 0/1 columns in [`INSTRUMENTS`] order. Frame `25·k` of the original video
//! becomes frame `k + 1` at 1 fps.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::anticipation::OccurrenceTrack;
use crate::error::{Error, Result};
use crate::pipeline::task::{INSTRUMENTS, PHASES};
use crate::pipeline::VideoRecord;

pub const CHOLEC80_FPS: usize = 25;

fn bad(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Data rows as `(line, whitespace-separated fields)`, header skipped.
fn rows(input: impl BufRead, path: &Path, header_first: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<String> = line.split_whitespace().map(String::from).collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 {
            if fields[0] != header_first {
                return Err(bad(path, 1, format!("expected a header starting with {header_first:?}")));
            }
            continue;
        }
        out.push((i + 1, fields));
    }
    Ok(out)
}

/// Phase index per 1 fps frame.
pub fn parse_phase_file(input: impl BufRead, path: &Path) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (line, f) in rows(input, path, "Frame")? {
        if f.len() != 2 {
            return Err(bad(path, line, "expected `frame phase`"));
        }
        let frame: usize = f[0].parse().map_err(|_| bad(path, line, "bad frame index"))?;
        if !frame.is_multiple_of(CHOLEC80_FPS) {
            continue;
        }
        let phase = PHASES
            .iter()
            .position(|p| *p == f[1])
            .ok_or_else(|| bad(path, line, format!("unknown phase {:?}", f[1])))?;
        if frame / CHOLEC80_FPS != out.len() {
            return Err(bad(path, line, "frames are not consecutive"));
        }
        out.push(phase);
    }
    Ok(out)
}

/// Presence flags per 1 fps frame, one array per row.
pub fn parse_tool_file(input: impl BufRead, path: &Path) -> Result<Vec<(usize, [bool; 7])>> {
    let mut out = Vec::new();
    for (line, f) in rows(input, path, "Frame")? {
        if f.len() != 1 + INSTRUMENTS.len() {
            return Err(bad(path, line, format!("expected {} columns", 1 + INSTRUMENTS.len())));
        }
        let frame: usize = f[0].parse().map_err(|_| bad(path, line, "bad frame index"))?;
        let mut flags = [false; 7];
        for (k, v) in f[1..].iter().enumerate() {
            flags[k] = match v.as_str() {
                "0" => false,
                "1" => true,
                other => return Err(bad(path, line, format!("expected 0 or 1, got {other:?}"))),
            };
        }
        out.push((frame / CHOLEC80_FPS, flags));
    }
    Ok(out)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Builds annotation-only records (no detections) for every
/// `videoNN-phase.txt` in `phase_dir` with its tool file in `tool_dir`.
pub fn import_cholec80(phase_dir: &Path, tool_dir: &Path) -> Result<Vec<VideoRecord>> {
    let mut ids: Vec<String> = std::fs::read_dir(phase_dir)
        .map_err(|e| Error::io(phase_dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str()?.strip_suffix("-phase.txt").map(String::from))
        .collect();
    ids.sort();
    if ids.is_empty() {
        return Err(Error::data(format!("no *-phase.txt files in {}", phase_dir.display())));
    }
    let mut records = Vec::with_capacity(ids.len());
    for id in ids {
        let phase_path = phase_dir.join(format!("{id}-phase.txt"));
        let tool_path = tool_dir.join(format!("{id}-tool.txt"));
        let phases = parse_phase_file(open(&phase_path)?, &phase_path)?;
        let tools = parse_tool_file(open(&tool_path)?, &tool_path)?;
        let frames = phases.len();
        if frames == 0 {
            return Err(Error::data(format!("{id}: empty phase file")));
        }
        let mut record = VideoRecord::empty(id, frames);
        for (p, _) in PHASES.iter().enumerate() {
            let flags: Vec<bool> = phases.iter().map(|&x| x == p).collect();
            for iv in OccurrenceTrack::runs(&flags) {
                record.phase_track.push(p, iv);
            }
        }
        let mut present = vec![vec![false; frames]; INSTRUMENTS.len()];
        for (t, flags) in tools {
            if t < frames {
                for (k, &on) in flags.iter().enumerate() {
                    present[k][t] = on;
                }
            }
        }
        for (k, f) in present.iter().enumerate() {
            for iv in OccurrenceTrack::runs(f) {
                record.instrument_track.push(k, iv);
            }
        }
        records.push(record);
    }
    Ok(records)
}
