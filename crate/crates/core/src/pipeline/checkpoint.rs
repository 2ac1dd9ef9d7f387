//! Checkpoint file.
//!
//! ```text
//! WFANTICIPATE-CHECKPOINT
//! version 1
//! task instrument
//! config 15
//! nodes=8
//! ...                         (one model key per line)
//! tensors 64
//! tensor gc.0.weight 4x64
//! <4·64 little-endian f64 bytes>
//! tensor gc.0.bias 64
//! ...
//! ```
//!
//! Header lines are UTF-8 text ending in `\n`; each tensor line is followed
//! immediately by its raw values.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{ModelConfig, ModelParams};
use crate::numerics::Tensor;
use crate::pipeline::settings::{get_model, set_model, MODEL_BLOCK_KEYS};
use crate::pipeline::{write_atomic, TaskKind};

pub const CHECKPOINT_MAGIC: &str = "WFANTICIPATE-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub task: TaskKind,
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn write_to(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "{CHECKPOINT_MAGIC}")?;
        writeln!(out, "version {CHECKPOINT_VERSION}")?;
        writeln!(out, "task {}", self.task)?;
        writeln!(out, "config {}", MODEL_BLOCK_KEYS.len())?;
        for k in MODEL_BLOCK_KEYS {
            writeln!(out, "{k}={}", get_model(&self.config, k).expect("model block key"))?;
        }
        writeln!(out, "tensors {}", self.params.names().len())?;
        for (name, t) in self.params.iter() {
            let dims: Vec<String> = t.shape().iter().map(ToString::to_string).collect();
            writeln!(out, "tensor {name} {}", dims.join("x"))?;
            for v in t.data() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(input: impl Read, path: &Path) -> Result<Checkpoint> {
        let mut r = BufReader::new(input);
        let mut line_no = 0usize;
        let mut next_line = |r: &mut BufReader<_>| -> Result<(usize, String)> {
            let mut s = String::new();
            let n = r.read_line(&mut s).map_err(|e| Error::io(path, e))?;
            line_no += 1;
            if n == 0 {
                return Err(bad(path, line_no, "unexpected end of file"));
            }
            Ok((line_no, s.trim_end_matches('\n').to_string()))
        };
        let (l, magic) = next_line(&mut r)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(bad(path, l, "not a checkpoint file"));
        }
        let (l, version) = next_line(&mut r)?;
        if version != format!("version {CHECKPOINT_VERSION}") {
            return Err(bad(path, l, format!("unsupported {version:?}")));
        }
        let (l, task) = next_line(&mut r)?;
        let task: TaskKind = task
            .strip_prefix("task ")
            .ok_or_else(|| bad(path, l, "expected task line"))?
            .parse()
            .map_err(|e: Error| bad(path, l, e.to_string()))?;
        let (l, count) = next_line(&mut r)?;
        let count = counted(&count, "config", path, l)?;
        let mut config = ModelConfig::default();
        for _ in 0..count {
            let (l, kv) = next_line(&mut r)?;
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(path, l, "expected key=value"))?;
            set_model(&mut config, k, v).map_err(|e| bad(path, l, e.to_string()))?;
        }
        config.validate().map_err(|e| bad(path, l, e.to_string()))?;
        let (l, count) = next_line(&mut r)?;
        let count = counted(&count, "tensors", path, l)?;
        let mut named = Vec::with_capacity(count);
        for _ in 0..count {
            let (l, head) = next_line(&mut r)?;
            let mut parts = head.split(' ');
            let (Some("tensor"), Some(name), Some(dims), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad(path, l, "expected `tensor NAME DIMS`"));
            };
            let shape: Vec<usize> = dims
                .split('x')
                .map(|d| d.parse().map_err(|_| bad(path, l, format!("bad dimension {d:?}"))))
                .collect::<Result<_>>()?;
            let len: usize = shape.iter().product();
            let mut bytes = vec![0u8; len * 8];
            r.read_exact(&mut bytes)
                .map_err(|_| bad(path, l, format!("tensor {name} is truncated")))?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            named.push((name.to_string(), Tensor::new(shape, data)?));
        }
        let params = ModelParams::from_named(&config, named)?;
        Ok(Checkpoint { task, config, params })
    }
}

fn bad(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn counted(line: &str, keyword: &str, path: &Path, l: usize) -> Result<usize> {
    line.strip_prefix(keyword)
        .and_then(|rest| rest.trim().parse().ok())
        .ok_or_else(|| bad(path, l, format!("expected `{keyword} COUNT`")))
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    write_atomic(path, |w| checkpoint.write_to(w))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::read_from(f, path)
}
