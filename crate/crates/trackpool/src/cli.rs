//! Command-line front end.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use trackpool_core::classifier::Profile;
use trackpool_core::record::MotRecord;
use trackpool_core::sim::{generate, ScenarioSpec};
use trackpool_core::training::{LogCollector, TrainingSequence};

use crate::checkpoint;
use crate::config::{load_config, RunConfig};
use crate::dataset::{write_scenario, Sequence};
use crate::error::{write, Error, Result};
use crate::mot::{read_mot, MotWriter};
use crate::report;
use crate::run::{self, AblationOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Paper,
    Desk,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Paper => Profile::Paper,
            ProfileArg::Desk => Profile::Desk,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "trackpool", version, about = "Online multi-object tracking with multi-track pooling")]
pub struct Cli {
    /// JSON run configuration; absent keys take the profile defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seeds model initialisation, training and simulation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = ProfileArg::Desk)]
    pub profile: ProfileArg,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write simulated sequences in the MOT layout.
    Simulate(SimulateArgs),
    /// Train a classifier and write a checkpoint plus the loss log.
    Train(TrainArgs),
    /// Track sequences and write one result file per sequence.
    Track(TrackArgs),
    /// Score result files against ground truth.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(GradcheckArgs),
    /// Track with pooling on and with pooling zeroed, and compare.
    BenchAblation(AblationArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of sequences; sequence k uses seed `sim.seed + k`.
    #[arg(long, default_value_t = 1)]
    pub sequences: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Sequence directories with ground truth. Without any, `--scenes`
    /// scenes are simulated from the `sim` section.
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub scenes: usize,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub data: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub data: Vec<PathBuf>,
    /// Directory holding `<sequence name>.txt` result files.
    #[arg(long)]
    pub results: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Coordinates sampled per parameter tensor and trial.
    #[arg(long, default_value_t = 4)]
    pub coords: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct AblationArgs {
    /// Number of scenes; scene k uses seed `sim.seed + k`.
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    /// Training scenes per seed when a model is trained. Few scenes let the
    /// model memorize identities instead of learning to compare them.
    #[arg(long, default_value_t = 30)]
    pub train_scenes: usize,
    /// Use these weights instead of training one pooled model per scene.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Also train and track a model without the pooled input.
    #[arg(long)]
    pub retrained: bool,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let profile = cli.profile.into();
    let mut cfg = match &cli.config {
        Some(path) => load_config(path, profile)?.config,
        None => RunConfig::defaults(profile),
    };
    if let Some(seed) = cli.seed {
        cfg.reseed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one parsed command, printing a short summary to `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let cfg = resolve_config(cli)?;
    create_dir(&cli.out)?;
    let out = cli.out.as_path();
    let say = |stdout: &mut dyn Write, text: String| stdout.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")));
    match &cli.command {
        Command::Simulate(a) => {
            for k in 0..a.sequences {
                let spec = ScenarioSpec {
                    seed: cfg.sim.seed.wrapping_add(k as u64),
                    ..cfg.sim.clone()
                };
                let name = format!("sim-{k:03}");
                let sc = generate(&spec)?;
                write_scenario(&out.join(&name), &name, &sc)?;
                say(stdout, format!("{name}: {} frames, {} detections\n", spec.frames, sc.detections.len()))?;
            }
            write(&out.join("config.json"), cfg.to_json())?;
        }
        Command::Train(a) => {
            let seqs: Vec<TrainingSequence> = if a.data.is_empty() {
                run::training_scenes(&cfg.sim, cfg.sim.seed, a.scenes)?
            } else {
                a.data
                    .iter()
                    .map(|d| Sequence::load(d)?.training_sequence())
                    .collect::<Result<_>>()?
            };
            let mut log = LogCollector::default();
            let model = run::train_model(&cfg.model, &cfg.train, &seqs, &mut log)?;
            let mut csv = String::from("iter,phase,loss,lr,dropout\n");
            for row in &log.rows {
                csv.push_str(&format!("{row}\n"));
            }
            write(&out.join("train_log.csv"), csv)?;
            checkpoint::save(&out.join("model.ckpt"), &model)?;
            write(&out.join("config.json"), cfg.to_json())?;
            let last = log.rows.last().map_or(f64::NAN, |r| r.loss);
            say(
                stdout,
                format!(
                    "trained {} iterations on {} sequences, last loss {last:.6}, fingerprint {}\n",
                    log.rows.len(),
                    seqs.len(),
                    checkpoint::fingerprint(&model)?
                ),
            )?;
        }
        Command::Track(a) => {
            let model = checkpoint::load(&a.model)?;
            let mut timings = Vec::new();
            for dir in &a.data {
                let seq = Sequence::load(dir)?;
                let path = out.join(format!("{}.txt", seq.name));
                let file = File::create(&path).map_err(io_err(&path))?;
                let mut writer = MotWriter::new(BufWriter::new(file));
                let mut embedder = seq.embedder(cfg.sim.seed)?;
                let timing = run::track_sequence(
                    &model,
                    &cfg.tracker,
                    &seq,
                    embedder.as_mut().map(|e| e as &mut dyn trackpool_core::tracker::BoxEmbedder),
                    &mut |r| writer.write(&r.to_record()).map_err(io_err(&path)),
                )?;
                writer.into_inner().flush().map_err(io_err(&path))?;
                say(
                    stdout,
                    format!(
                        "{}: {} frames in {:.3}s ({:.1} frames/s, {:.3} ms per frame step)\n",
                        seq.name, timing.frames, timing.seconds, timing.frames_per_second, timing.mean_step_ms
                    ),
                )?;
                timings.push((seq.name, timing));
            }
            let json: Vec<serde_json::Value> = timings
                .iter()
                .map(|(name, t)| serde_json::json!({ "sequence": name, "timing": t }))
                .collect();
            write(&out.join("timing.json"), serde_json::to_string_pretty(&json)?)?;
        }
        Command::Eval(a) => {
            let mut pairs: Vec<(String, Vec<MotRecord>, Vec<MotRecord>)> = Vec::new();
            for dir in &a.data {
                let seq = Sequence::load(dir)?;
                let gt = seq
                    .gt
                    .ok_or_else(|| Error::Integrity(format!("sequence `{}` has no ground truth", seq.name)))?;
                let pred = read_mot(&a.results.join(format!("{}.txt", seq.name)))?;
                pairs.push((seq.name, gt, pred));
            }
            let report = run::evaluate_sequences(&pairs)?;
            let rows = report::rows(&report);
            write(&out.join("eval.csv"), report::to_csv(&rows))?;
            say(stdout, report::to_table(&rows))?;
        }
        Command::Gradcheck(a) => {
            let r = run::gradcheck(&cfg.model, cfg.train.focal(), a.trials, cfg.model.init_seed, a.coords)?;
            let mut text = String::new();
            for (name, e) in &r.per_param {
                text.push_str(&format!("{name:<24} {e:.3e}\n"));
            }
            text.push_str(&format!(
                "max relative error {:.3e} over {} trials ({} coordinates, {} skipped at kinks)\n",
                r.max_rel_error, r.trials, r.checked, r.skipped_kinks
            ));
            say(stdout, text)?;
            write(&out.join("gradcheck.json"), serde_json::to_string_pretty(&r)?)?;
            if !(r.max_rel_error < a.tolerance) {
                return Err(Error::Integrity(format!(
                    "gradient check failed: {:.3e} >= {:.1e}",
                    r.max_rel_error, a.tolerance
                )));
            }
        }
        Command::BenchAblation(a) => {
            let model = a.model.as_deref().map(checkpoint::load).transpose()?;
            let opts = AblationOptions {
                seeds: (0..a.seeds as u64).map(|k| cfg.sim.seed.wrapping_add(k)).collect(),
                train_scenes: a.train_scenes,
                retrained: a.retrained,
                model,
            };
            let results = run::ablation(&cfg, &opts, &mut LogCollector::default())?;
            let rows: Vec<report::Row> = results
                .iter()
                .map(|r| report::Row::overall(r.arm.label(), &r.report))
                .collect();
            write(&out.join("ablation.csv"), report::to_csv(&rows))?;
            let mut text = report::to_table(&rows);
            for r in &results {
                text.push_str(&format!(
                    "{}: mean IDF1 {:.4}, mean IDS {:.1} over {} scenes\n",
                    r.arm.label(),
                    r.mean_idf1,
                    r.mean_idsw,
                    opts.seeds.len()
                ));
            }
            say(stdout, text)?;
        }
    }
    Ok(())
}
