//! Command-line entry points. Exit codes: 0 success, 2 bad input,
//! 3 backend failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use safedrive::agent::{AgentError, LlmClient, ReplayClient, ScriptedClient, WireClient};
use safedrive::config::{BackendKind, ConfigError};
use safedrive::eval::{parse_conditions, qpr_sweep, write_sweep_csv, Condition, EvalError, Evaluator, MetricsRow, SweepKind};
use safedrive::memory::MemoryError;
use safedrive::risk_assessor::{calibrate_thresholds, risk_notification, sample_qpr_distribution, RiskNotification};
use safedrive::risk_field::{cost_map, drf_evaluate, QprReport};
use safedrive::scene::suite::builtin_suite;
use safedrive::scene::synth::SynthSpec;
use safedrive::scene::{
    labeled_scenes, load_labels, parse_tracks_from, synth_scenario, write_tracks, DatasetTag, LabeledScene,
    ParseOptions, Scene, TrajectoryTable,
};
use safedrive::{AppConfig, VehicleState};

#[derive(Parser)]
#[command(name = "safedrive", version, about = "Driver-risk-field QPR and LLM driving-decision evaluation")]
struct Cli {
    /// JSON configuration document; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a trajectory CSV and write it in the normalized column layout.
    Ingest {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 25.0)]
        frame_rate: f64,
    },
    /// QPR report and risk notification of one scene.
    Qpr {
        /// Scene JSON: an extracted scene, or {"ego": {...}, "others": [...]}.
        #[arg(long)]
        scene: PathBuf,
        /// 16-bit PGM of the ego field times the others' cost map.
        #[arg(long)]
        heatmap: Option<PathBuf>,
        /// The same map as x,y,value CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Calibrate risk thresholds from sampled per-vehicle QPR.
    Calibrate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(short = 'n', long, default_value_t = 100_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 25.0)]
        frame_rate: f64,
    },
    /// QPR as one scene parameter varies.
    Sweep {
        #[arg(long)]
        kind: SweepKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the IDM baseline and agent ablations.
    Run {
        /// `builtin`, `builtin:<highway|intersection|roundabout>` or a
        /// trajectory CSV.
        #[arg(long, default_value = "builtin")]
        dataset: String,
        #[arg(long, default_value = "idm,plain,memory,risk,both")]
        conditions: String,
        /// Overrides the configured backend.
        #[arg(long)]
        backend: Option<BackendKind>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
        /// Keep at most this many scenes, drawn with `--seed`.
        #[arg(long)]
        max_scenes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scenario family of a CSV dataset.
        #[arg(long, default_value = "highway")]
        tag: DatasetTag,
        /// Label CSV (ego_id,frame,action) overriding the heuristic labeler.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Frames between scenes of one track in a CSV dataset.
        #[arg(long, default_value_t = 25)]
        stride: u32,
        #[arg(long, default_value_t = 25.0)]
        frame_rate: f64,
    },
    /// Write a synthetic scenario as a trajectory CSV.
    Synth {
        #[arg(long)]
        kind: String,
        /// JSON parameters for the scenario; defaults when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Seed of the randomized kinds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Input(String),
    Backend(String),
}

impl Failure {
    fn input(e: impl ToString) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Memory(m) => m.into(),
            e => Failure::input(e),
        }
    }
}

impl From<MemoryError> for Failure {
    fn from(e: MemoryError) -> Self {
        match e {
            MemoryError::BackendUnavailable(_) => Failure::Backend(e.to_string()),
            e => Failure::input(e),
        }
    }
}

impl From<AgentError> for Failure {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Transport(_) => Failure::Backend(e.to_string()),
            AgentError::Memory(m) => m.into(),
            e => Failure::input(e),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Agent(a) => a.into(),
            EvalError::Memory(m) => m.into(),
            e => Failure::input(e),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_table(path: &Path, frame_rate: f64) -> Result<TrajectoryTable, Failure> {
    let file = File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    parse_tracks_from(file, ParseOptions { frame_rate }).map_err(Failure::input)
}

#[derive(Deserialize)]
struct Vehicles {
    ego: VehicleState,
    #[serde(default)]
    others: Vec<VehicleState>,
}

#[derive(Serialize)]
struct QprOutput<'a> {
    report: &'a QprReport,
    notification: &'a RiskNotification,
    text: String,
}

#[derive(Serialize)]
struct MetricsDocument<'a> {
    backend: BackendKind,
    dataset: &'a str,
    seed: u64,
    scene_count: usize,
    rows: &'a [MetricsRow],
}

fn load_dataset(
    config: &AppConfig,
    dataset: &str,
    tag: DatasetTag,
    labels: Option<&Path>,
    stride: u32,
    frame_rate: f64,
) -> Result<Vec<LabeledScene>, Failure> {
    if dataset == "builtin" {
        let mut out = Vec::new();
        for tag in DatasetTag::ALL {
            out.extend(builtin_suite(tag, &config.labeler).map_err(Failure::input)?);
        }
        return Ok(out);
    }
    if let Some(name) = dataset.strip_prefix("builtin:") {
        let tag: DatasetTag = name.parse().map_err(Failure::input)?;
        return builtin_suite(tag, &config.labeler).map_err(Failure::input);
    }
    let table = read_table(Path::new(dataset), frame_rate)?;
    let overrides = labels.map(load_labels).transpose().map_err(Failure::input)?;
    let extract = safedrive::scene::ExtractOptions {
        dataset_tag: tag,
        ..config.extraction.clone()
    };
    labeled_scenes(&table, &extract, &config.labeler, overrides.as_ref(), stride).map_err(Failure::input)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    match cli.command {
        Command::Ingest { csv, out, frame_rate } => {
            let table = read_table(&csv, frame_rate)?;
            let mut w = create(&out)?;
            write_tracks(&table, &mut w).map_err(Failure::input)?;
            w.flush().map_err(Failure::input)?;
            eprintln!(
                "{} rows, {} tracks, {} frames",
                table.len(),
                table.track_ids().count(),
                table.frames().count()
            );
        }
        Command::Qpr { scene, heatmap, csv } => {
            let value: serde_json::Value = serde_json::from_str(&read_file(&scene)?).map_err(Failure::input)?;
            let (ego, others) = if value.get("neighbors").is_some() {
                let s: Scene = serde_json::from_value(value).map_err(Failure::input)?;
                s.validate().map_err(Failure::input)?;
                let others = s.neighbor_states();
                (s.ego, others)
            } else {
                let v: Vehicles = serde_json::from_value(value).map_err(Failure::input)?;
                (v.ego, v.others)
            };
            for v in std::iter::once(&ego).chain(&others) {
                v.validate().map_err(Failure::input)?;
            }
            let thresholds = config.resolve_thresholds()?;
            let grid = config.grid.around(&ego);
            let report = config.risk.qpr_total(&ego, &others, &grid);
            let notification =
                risk_notification(&report, &thresholds, &config.notifications).map_err(Failure::input)?;
            let output = QprOutput {
                report: &report,
                text: notification.to_text(),
                notification: &notification,
            };
            println!("{}", serde_json::to_string_pretty(&output).map_err(Failure::input)?);
            if heatmap.is_some() || csv.is_some() {
                let field = drf_evaluate(&ego, &config.risk.drf, &grid)
                    .product(&cost_map(&others, &config.risk.costs, &grid, Some(ego.id)));
                if let Some(p) = heatmap {
                    let mut w = create(&p)?;
                    field.write_pgm(&mut w).map_err(Failure::input)?;
                    w.flush().map_err(Failure::input)?;
                }
                if let Some(p) = csv {
                    let mut w = create(&p)?;
                    field.write_csv(&mut w).map_err(Failure::input)?;
                    w.flush().map_err(Failure::input)?;
                }
            }
        }
        Command::Calibrate {
            dataset,
            count,
            seed,
            out,
            frame_rate,
        } => {
            let table = read_table(&dataset, frame_rate)?;
            let samples = sample_qpr_distribution(&table, count, seed, &config.risk, &config.grid, &config.sampling)
                .map_err(Failure::input)?;
            let mut t = calibrate_thresholds(&samples, config.risk.convention).map_err(Failure::input)?;
            t.seed = Some(seed);
            t.source_tag = dataset.display().to_string();
            t.save(&out).map_err(Failure::input)?;
            eprintln!("t_low {} t_high {} from {} samples", t.t_low, t.t_high, t.sample_count);
        }
        Command::Sweep { kind, out } => {
            let rows = qpr_sweep(kind, &config.sweep, &config.risk)?;
            write_sweep_csv(&rows, create(&out)?).map_err(Failure::input)?;
        }
        Command::Run {
            dataset,
            conditions,
            backend,
            out,
            log,
            max_scenes,
            seed,
            tag,
            labels,
            stride,
            frame_rate,
        } => {
            let conditions = parse_conditions(&conditions)?;
            let mut scenes = load_dataset(&config, &dataset, tag, labels.as_deref(), stride, frame_rate)?;
            if let Some(n) = max_scenes.filter(|&n| n < scenes.len()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut keep = sample(&mut rng, scenes.len(), n).into_vec();
                keep.sort_unstable();
                scenes = keep.into_iter().map(|i| scenes[i].clone()).collect();
            }
            if scenes.is_empty() {
                return Err(Failure::Input("dataset yields no labeled scenes".into()));
            }
            let thresholds = config.resolve_thresholds()?;
            let embedder = config.embedding.build()?;
            let backend = backend.unwrap_or(config.backend.kind);
            let scripted = match config.read_rules()? {
                Some(text) => ScriptedClient::from_json(&text)?,
                None => ScriptedClient::bundled(),
            };
            let replay = config.read_replay()?;
            let wire = match backend {
                BackendKind::Wire => Some(Arc::new(WireClient::new(config.backend.wire.clone())?)),
                _ => None,
            };
            let mut recorded: Vec<(Condition, Arc<ReplayClient>)> = Vec::new();
            let mut client_for = |condition: Condition, tag: DatasetTag| -> Result<Arc<dyn LlmClient>, EvalError> {
                Ok(match backend {
                    BackendKind::Scripted => Arc::new(scripted.clone()),
                    BackendKind::Wire => wire.clone().expect("wire client built above"),
                    BackendKind::Replay => match &replay {
                        None => Arc::new(ReplayClient::truth(
                            scenes
                                .iter()
                                .filter(|s| s.scene.dataset_tag == tag)
                                .map(|s| s.true_label),
                        )),
                        // one cursor per condition, continued across families
                        Some(text) => match recorded.iter().find(|(c, _)| *c == condition) {
                            Some((_, client)) => client.clone(),
                            None => {
                                let client = Arc::new(ReplayClient::from_jsonl(text)?);
                                recorded.push((condition, client.clone()));
                                client
                            }
                        },
                    },
                })
            };
            let evaluator = Evaluator {
                agent: &config.agent,
                model: &config.risk,
                grid: &config.grid,
                thresholds: &thresholds,
                templates: &config.notifications,
                embedder: embedder.as_ref(),
                oracle: &config.oracle,
                idm: &config.idm,
                seed_exemplars: config.seed_exemplars,
            };
            let evaluation = evaluator.evaluate(&scenes, &conditions, &mut client_for)?;
            let doc = MetricsDocument {
                backend,
                dataset: &dataset,
                seed,
                scene_count: scenes.len(),
                rows: &evaluation.table.rows,
            };
            write_file(&out, &(serde_json::to_string_pretty(&doc).map_err(Failure::input)? + "\n"))?;
            if let Some(p) = log {
                write_file(&p, &evaluation.to_jsonl())?;
            }
            for r in &evaluation.table.rows {
                eprintln!(
                    "{:<12} {:<6} safety {:.3} alignment {:.3} ({} scenes)",
                    r.scenario_tag.as_str(),
                    r.condition.as_str(),
                    r.safety_rate,
                    r.decision_alignment,
                    r.scenes
                );
            }
        }
        Command::Synth {
            kind,
            params,
            seed,
            out,
        } => {
            let mut spec = match params {
                Some(p) => {
                    let mut value: serde_json::Value =
                        serde_json::from_str(&read_file(&p)?).map_err(Failure::input)?;
                    value["kind"] = serde_json::Value::String(kind.clone());
                    serde_json::from_value(value).map_err(Failure::input)?
                }
                None => SynthSpec::default_for(&kind).map_err(Failure::input)?,
            };
            if let (SynthSpec::HighwayTraffic(p), Some(seed)) = (&mut spec, seed) {
                p.seed = seed;
            }
            let table = synth_scenario(&spec).map_err(Failure::input)?;
            let mut w = create(&out)?;
            write_tracks(&table, &mut w).map_err(Failure::input)?;
            w.flush().map_err(Failure::input)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Backend(msg)) => {
            eprintln!("backend error: {msg}");
            ExitCode::from(3)
        }
    }
}
