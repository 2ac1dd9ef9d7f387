//! Converts Cholec80-style phase and tool annotation files into the
//! annotation table used for training.
//!
//! ```text
//! cargo run --example import_cholec80 -- PHASE_DIR TOOL_DIR
//! ```
//!
//! Without arguments a two-minute toy video is written to a temporary
//! directory and imported.

use std::path::PathBuf;

use workflow_anticipation::pipeline::{import_cholec80, write_annotations, PHASES};

fn toy(dir: &std::path::Path) -> std::io::Result<()> {
    let mut phases = String::from("Frame\tPhase\n");
    for f in 0..120 * 25 {
        phases.push_str(&format!("{f}\t{}\n", PHASES[f / (25 * 40)]));
    }
    std::fs::write(dir.join("video01-phase.txt"), phases)?;
    let mut tools = String::from("Frame\tGrasper\tBipolar\tHook\tScissors\tClipper\tIrrigator\tSpecimenBag\n");
    for s in 0..120 {
        let hook = (50..90).contains(&s) as u8;
        let clipper = (95..105).contains(&s) as u8;
        tools.push_str(&format!("{}\t1\t0\t{hook}\t0\t{clipper}\t0\t0\n", s * 25));
    }
    std::fs::write(dir.join("video01-tool.txt"), tools)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let scratch = tempfile::tempdir()?;
    let (phase_dir, tool_dir) = match args.as_slice() {
        [p, t] => (p.clone(), t.clone()),
        _ => {
            toy(scratch.path())?;
            (scratch.path().to_path_buf(), scratch.path().to_path_buf())
        }
    };
    let records = import_cholec80(&phase_dir, &tool_dir)?;
    let mut out = Vec::new();
    write_annotations(&records, &mut out).expect("write to memory");
    print!("{}", String::from_utf8_lossy(&out));
    Ok(())
}
