//! The `anticipate` command line.
//!
//! Run configuration comes from built-in defaults, then an optional
//! `--config` file of `key = value` lines, then `--set key=value`
//! overrides, then `--seed`. The resolved configuration is logged at the
//! start of every run. Exit status: 0 on success, 1 for invalid input or
//! configuration, 2 for failures while running.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::graph::{frame_features, Detection, GraphTopology, NodeRoster};
use crate::network::{ModelConfig, ModelParams, StreamingPredictor};
use crate::pipeline::{
    evaluate, generate_synthetic, import_cholec80, load_checkpoint, load_dataset, read_detections, readout,
    run_ablation, save_checkpoint, save_dataset, split_records, standard_rows, train, write_atomic,
    write_plot_data, Checkpoint, Settings, TaskSpec, VideoRecord, DETECTION_HEADER, SETTING_KEYS,
};

#[derive(Parser, Debug)]
#[command(name = "anticipate", version, about = "Surgical instrument and phase anticipation from bounding-box graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Sets both train.seed and synth.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Detection file (video_id,frame,class_id,cx,cy,w,h,confidence).
    #[arg(long, value_name = "PATH")]
    detections: PathBuf,
    /// Annotation file (video_id,track,label,start_frame,end_frame).
    #[arg(long, value_name = "PATH")]
    annotations: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Split {
    All,
    Train,
    Val,
    Test,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic videos with annotations and detections.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_name = "PATH")]
        out_detections: PathBuf,
        #[arg(long, value_name = "PATH")]
        out_annotations: PathBuf,
    },
    /// Convert Cholec80 phase and tool annotations to the annotation format.
    #[command(name = "import-cholec80")]
    ImportCholec80 {
        /// Directory holding videoNN-phase.txt files.
        #[arg(long, value_name = "DIR")]
        phase_dir: PathBuf,
        /// Directory holding videoNN-tool.txt files.
        #[arg(long, value_name = "DIR")]
        tool_dir: PathBuf,
        #[arg(long, value_name = "PATH")]
        out_annotations: PathBuf,
    },
    /// Train on the training split and write a checkpoint.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Output checkpoint.
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Output loss trace CSV.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },
    /// Online evaluation of a checkpoint; writes the metric report.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Report CSV; standard output when absent.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        /// Worker threads for per-video evaluation.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Per-frame predictions from detections, one line per frame.
    Infer {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Read detection lines from standard input and answer each frame
        /// as soon as the next one starts.
        #[arg(long, conflicts_with = "detections")]
        stream: bool,
        #[arg(long, value_name = "PATH", required_unless_present = "stream")]
        detections: Option<PathBuf>,
        /// Output CSV; standard output when absent.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Train and evaluate the nine-row component ablation grid.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Per-frame ground truth and prediction curves for plotting.
    #[command(name = "plot-data")]
    PlotData {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
    },
}

/// Config key reference appended to the help text.
pub fn config_help() -> String {
    let defaults = Settings::default();
    let mut s = String::from("Config keys (default in brackets):\n");
    for (key, about) in SETTING_KEYS {
        let value = defaults.get(key).unwrap_or_default();
        s.push_str(&format!("  {key:<24} {about} [{value}]\n"));
    }
    s
}

fn resolve(args: &ConfigArgs) -> Result<Settings> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("train.seed={seed}"));
        overrides.push(format!("synth.seed={seed}"));
    }
    let s = Settings::resolve(args.config.as_deref(), &overrides)?;
    log::info!("resolved configuration:\n{}", s.to_config_string().trim_end());
    Ok(s)
}

fn load(data: &DataArgs) -> Result<Vec<VideoRecord>> {
    load_dataset(&data.detections, &data.annotations, &NodeRoster::cholec80())
}

fn select(records: &[VideoRecord], settings: &Settings, split: Split) -> Result<Vec<VideoRecord>> {
    let (train, val, test) = split_records(records, &settings.train.splits)?;
    let (name, chosen) = match split {
        Split::All => return Ok(records.to_vec()),
        Split::Train => ("train", train),
        Split::Val => ("val", val),
        Split::Test => ("test", test),
    };
    if chosen.is_empty() {
        return Err(Error::config(format!(
            "split.{name} names no videos; set it or pass --split all"
        )));
    }
    Ok(chosen)
}

/// Loads a checkpoint and checks it against the configured task.
fn checkpoint_for(path: &Path, settings: &Settings) -> Result<Checkpoint> {
    let ck = load_checkpoint(path)?;
    if ck.task != settings.task {
        return Err(Error::config(format!(
            "checkpoint was trained for the {} task, configuration says {}",
            ck.task, settings.task
        )));
    }
    Ok(ck)
}

fn write_out(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, body),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// Per-frame online inference over detection lines grouped by video.
struct Inference<'a> {
    config: &'a ModelConfig,
    topology: &'a GraphTopology,
    params: &'a ModelParams,
    stream: Option<StreamingPredictor<'a>>,
    video: Option<String>,
    emitted: usize,
    pending: Vec<Detection>,
    total_seconds: f64,
    frames: usize,
}

impl<'a> Inference<'a> {
    fn header(&self, task: &TaskSpec) -> String {
        let mut cols = vec!["video_id".to_string(), "frame".into(), "latency_s".into()];
        for h in &self.config.horizons {
            for c in &task.classes {
                cols.push(format!("h{h}_{c}"));
            }
        }
        cols.join(",")
    }

    /// Emits every frame up to and including `last`. Frames without
    /// detections get an empty graph.
    fn flush_to(&mut self, last: usize, out: &mut dyn Write) -> Result<()> {
        let video = self.video.clone().unwrap_or_default();
        while self.emitted < last {
            let frame = self.emitted + 1;
            let dets = if self.pending.first().is_some_and(|d| d.frame == frame) {
                std::mem::take(&mut self.pending)
            } else {
                Vec::new()
            };
            let start = Instant::now();
            let features = frame_features(&dets, &self.topology.roster)?;
            let stream = self.stream.as_mut().expect("stream exists while a video is open");
            let mut row = stream.step(&features)?.pop().expect("at least one stage");
            readout(self.config, &mut row);
            let seconds = start.elapsed().as_secs_f64();
            self.total_seconds += seconds;
            self.frames += 1;
            let values: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(out, "{video},{frame},{seconds:.6},{}", values.join(",")).map_err(|e| Error::io("<output>", e))?;
            out.flush().map_err(|e| Error::io("<output>", e))?;
            self.emitted = frame;
        }
        Ok(())
    }

    fn push(&mut self, video: &str, d: Detection, out: &mut dyn Write) -> Result<()> {
        if self.video.as_deref() != Some(video) {
            self.finish(out)?;
            self.video = Some(video.to_string());
            self.stream = Some(StreamingPredictor::new(self.params, self.config, self.topology)?);
            self.emitted = 0;
        }
        let open = self.pending.first().map_or(self.emitted + 1, |p| p.frame);
        if d.frame < open {
            return Err(Error::data(format!(
                "video {video}: frame {} arrived after frame {open}; frames must not decrease",
                d.frame
            )));
        }
        self.flush_to(d.frame - 1, out)?;
        d.validate(&self.topology.roster)?;
        self.pending.push(d);
        Ok(())
    }

    fn finish(&mut self, out: &mut dyn Write) -> Result<()> {
        if let Some(last) = self.pending.first().map(|d| d.frame) {
            self.flush_to(last, out)?;
        }
        Ok(())
    }
}

fn infer(
    settings: &Settings,
    checkpoint: &Path,
    stream: bool,
    detections: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let ck = checkpoint_for(checkpoint, settings)?;
    let topology = GraphTopology::build(NodeRoster::cholec80(), ck.config.topology, &ck.config.hubs)?;
    let task = TaskSpec::new(ck.task);
    let mut engine = Inference {
        config: &ck.config,
        topology: &topology,
        params: &ck.params,
        stream: None,
        video: None,
        emitted: 0,
        pending: Vec::new(),
        total_seconds: 0.0,
        frames: 0,
    };
    if stream {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        writeln!(lock, "{}", engine.header(&task)).map_err(|e| Error::io("<stdout>", e))?;
        let stdin = std::io::stdin();
        let header = DETECTION_HEADER.join(",");
        for (i, line) in stdin.lock().lines().enumerate() {
            let line = line.map_err(|e| Error::io("<stdin>", e))?;
            let line = line.trim();
            if line.is_empty() || line == header {
                continue;
            }
            let text = format!("{header}\n{line}\n");
            let parsed = read_detections(text.as_bytes(), Path::new("<stdin>")).map_err(|e| match e {
                Error::Parse { message, .. } => Error::Parse {
                    path: "<stdin>".into(),
                    line: i + 1,
                    message,
                },
                other => other,
            })?;
            for (_, video, d) in parsed {
                engine.push(&video, d, &mut lock)?;
            }
        }
        engine.finish(&mut lock)?;
    } else {
        let path = detections.ok_or_else(|| Error::config("infer needs --detections or --stream"))?;
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut parsed = read_detections(file, path)?;
        // Group by video, keeping first-appearance order, then by frame.
        let mut order: Vec<String> = Vec::new();
        for (_, v, _) in &parsed {
            if !order.contains(v) {
                order.push(v.clone());
            }
        }
        parsed.sort_by_key(|(line, v, d)| (order.iter().position(|o| o == v), d.frame, *line));
        let mut buffer = Vec::new();
        writeln!(buffer, "{}", engine.header(&task)).map_err(|e| Error::io(path, e))?;
        for (_, video, d) in parsed {
            engine.push(&video, d, &mut buffer)?;
        }
        engine.finish(&mut buffer)?;
        write_out(out, |w| w.write_all(&buffer))?;
    }
    if engine.frames > 0 {
        log::info!(
            "{} frames, mean latency {:.6} s per frame",
            engine.frames,
            engine.total_seconds / engine.frames as f64
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            config,
            out_detections,
            out_annotations,
        } => {
            let s = resolve(&config)?;
            let records = generate_synthetic(&s.synth)?;
            save_dataset(&records, &out_detections, &out_annotations)?;
            log::info!("wrote {} synthetic videos", records.len());
        }
        Command::ImportCholec80 {
            phase_dir,
            tool_dir,
            out_annotations,
        } => {
            let records = import_cholec80(&phase_dir, &tool_dir)?;
            write_atomic(&out_annotations, |w| crate::pipeline::write_annotations(&records, w))?;
            log::info!("imported {} videos", records.len());
        }
        Command::Train {
            config,
            data,
            checkpoint,
            trace,
        } => {
            let s = resolve(&config)?;
            let records = load(&data)?;
            let (tr, val, _) = split_records(&records, &s.train.splits)?;
            let outcome = train(&tr, &val, &s.task_spec(), &s.train)?;
            log::info!(
                "loss {:.5} → {:.5}; selected epoch {}",
                outcome.initial_loss(),
                outcome.final_loss(),
                outcome.best_epoch
            );
            save_checkpoint(
                &checkpoint,
                &Checkpoint {
                    task: s.task,
                    config: s.train.model.clone(),
                    params: outcome.params.clone(),
                },
            )?;
            if let Some(p) = trace {
                write_atomic(&p, |w| outcome.write_trace(w))?;
            }
        }
        Command::Evaluate {
            config,
            data,
            checkpoint,
            report,
            split,
            jobs,
        } => {
            let s = resolve(&config)?;
            let ck = checkpoint_for(&checkpoint, &s)?;
            let records = select(&load(&data)?, &s, split)?;
            let eval = evaluate(&records, &ck.params, &ck.config, &TaskSpec::new(ck.task), jobs)?;
            write_out(report.as_deref(), |w| eval.report.write_csv(w))?;
        }
        Command::Infer {
            config,
            checkpoint,
            stream,
            detections,
            out,
        } => {
            let s = resolve(&config)?;
            infer(&s, &checkpoint, stream, detections.as_deref(), out.as_deref())?;
        }
        Command::Ablate {
            config,
            data,
            out,
            jobs,
        } => {
            let s = resolve(&config)?;
            let records = load(&data)?;
            let (tr, val, test) = split_records(&records, &s.train.splits)?;
            let eval_set = if test.is_empty() {
                log::warn!("split.test is empty; ablation rows are evaluated on the training videos");
                tr.clone()
            } else {
                test
            };
            let rows = standard_rows(s.train.model.horizons.len());
            let table = run_ablation(&tr, &val, &eval_set, &s.task_spec(), &s.train, &rows, jobs)?;
            write_atomic(&out, |w| table.write_csv(w))?;
        }
        Command::PlotData {
            config,
            data,
            checkpoint,
            out,
            split,
        } => {
            let s = resolve(&config)?;
            let ck = checkpoint_for(&checkpoint, &s)?;
            let records = select(&load(&data)?, &s, split)?;
            let task = TaskSpec::new(ck.task);
            let eval = evaluate(&records, &ck.params, &ck.config, &task, 1)?;
            write_atomic(&out, |w| write_plot_data(&eval.videos, &task.classes, &ck.config.horizons, w))?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and returns
/// the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let help = config_help();
    let mut command = Cli::command().after_help(help.clone());
    for name in ["synth", "train", "evaluate", "infer", "ablate", "plot-data"] {
        command = command.mut_subcommand(name, |c| c.after_help(help.clone()));
    }
    let matches = match command.try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
