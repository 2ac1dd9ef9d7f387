//! Everything around the model: file formats, synthetic workflows, the
//! training loop, online evaluation, the ablation grid and checkpoints.
//!
//! All outputs are written atomically: a temporary file in the destination
//! directory is renamed over the target once complete.

mod ablation;
mod checkpoint;
mod cholec80;
mod data;
mod evaluate;
mod settings;
mod synthetic;
mod task;
mod train;

pub use ablation::{run_ablation, standard_rows, AblationResult, AblationRow, AblationTable};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use cholec80::{import_cholec80, parse_phase_file, parse_tool_file, CHOLEC80_FPS};
pub use data::{
    check_phase_partition, load_dataset, read_detections, save_dataset, write_annotations, write_detections,
    VideoRecord, ANNOTATION_HEADER, DETECTION_HEADER,
};
pub use evaluate::{
    evaluate, predict_video, readout, write_plot_data, Evaluation, VideoPrediction,
};
pub use settings::{Settings, SETTING_KEYS};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use task::{TaskKind, TaskSpec, INSTRUMENTS, PHASES};
pub use train::{split_records, train, EpochStats, Splits, TrainConfig, TrainOutcome};

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes `path` through a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        body(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
