//! End-to-end runs: rounds, per-round metrics, and the summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use bitfold_core::Seed;
use bitfold_protocol::{
    Federation, IdentityTrainer, MemoryTransport, Model, PlaintextControl, RoundOutcome, SocketTransport, StageTimings,
    TrafficLedger, TrainerHook, Transport, STAGE_NAMES,
};

use crate::config::{ExperimentConfig, TrainerKind, TransportKind};
use crate::error::HarnessError;
use crate::toy::ToyTask;
use crate::traffic::{predict_traffic, TrafficPrediction};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";

const STREAM_TASK: u64 = 0x7461736b;

/// Column order of `metrics.csv`.
pub fn metrics_header() -> Vec<String> {
    let mut h = vec!["round".to_string()];
    h.extend(STAGE_NAMES.iter().map(|s| format!("{s}_us")));
    h.extend(["upload_bytes", "download_bytes", "loss", "accuracy"].map(String::from));
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub round: u64,
    pub timings: StageTimings,
    /// Mean over the clients that uploaded this round.
    pub upload_bytes: f64,
    /// Mean over all clients.
    pub download_bytes: f64,
    pub loss: Option<f64>,
    pub accuracy: Option<f64>,
}

impl MetricsRecord {
    fn csv_row(&self) -> Vec<String> {
        let mut row = vec![self.round.to_string()];
        row.extend(self.timings.as_array().iter().map(|d| format!("{:.3}", d.as_secs_f64() * 1e6)));
        row.push(self.upload_bytes.to_string());
        row.push(self.download_bytes.to_string());
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        row.push(opt(self.loss));
        row.push(opt(self.accuracy));
        row
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub rounds: u64,
    pub plaintext_control: bool,
    pub transport: TransportKind,
    pub weights: usize,
    pub slots: u32,
    pub ciphertexts_per_update: u64,
    pub predicted: TrafficPrediction,
    pub setup_download_bytes: u64,
    pub total_upload_bytes: u64,
    pub total_download_bytes: u64,
    /// Mean upload plus download of one client per round.
    pub mean_client_bytes_per_round: f64,
    pub mean_stage_percent: BTreeMap<String, f64>,
    pub initial_loss: Option<f64>,
    pub initial_accuracy: Option<f64>,
    pub final_loss: Option<f64>,
    pub final_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub records: Vec<MetricsRecord>,
    /// Global model after each round.
    pub round_models: Vec<Model>,
    pub final_model: Model,
    pub ledger: TrafficLedger,
    pub summary: Summary,
    pub metrics_path: PathBuf,
    pub summary_path: PathBuf,
}

enum Runner {
    Encrypted(Box<Federation>),
    Control(PlaintextControl),
}

impl Runner {
    fn run_round(&mut self, trainer: &dyn TrainerHook) -> Result<RoundOutcome, bitfold_protocol::ProtocolError> {
        match self {
            Runner::Encrypted(f) => f.run_round(trainer),
            Runner::Control(c) => c.run_round(trainer),
        }
    }
}

/// Runs `config.rounds` rounds and writes `metrics.csv` and `summary.json` into `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let ctx = config.ring()?;
    let schema = config.schema()?;
    let fed_config = config.federation();
    let prediction = predict_traffic(&schema, &ctx);
    let initial = Model::zeros(&schema);

    let task = match config.trainer {
        TrainerKind::Logistic => Some(ToyTask::generate(
            config.layers[0],
            config.clients,
            &Seed::from_u64(config.seed).derive(STREAM_TASK, 0),
            &config.toy,
        )),
        TrainerKind::Identity => None,
    };
    let trainer: &dyn TrainerHook = match &task {
        Some(t) => t,
        None => &IdentityTrainer,
    };
    let evaluate = |m: &Model| task.as_ref().map(|t| t.evaluate(m));

    let mut runner = if config.plaintext_control {
        Runner::Control(PlaintextControl::new(schema.clone(), initial.clone(), fed_config)?)
    } else {
        let transport: Box<dyn Transport> = match config.transport {
            TransportKind::Mem => Box::new(MemoryTransport::new(0..config.clients as u64)),
            TransportKind::Socket => Box::new(SocketTransport::connect(0..config.clients as u64)?),
        };
        Runner::Encrypted(Box::new(Federation::new(
            ctx.clone(),
            schema.clone(),
            initial.clone(),
            fed_config,
            transport,
        )?))
    };

    let mut records = Vec::with_capacity(config.rounds as usize);
    let mut round_models = Vec::with_capacity(config.rounds as usize);
    for round in 1..=config.rounds {
        let out = runner.run_round(trainer).map_err(|source| HarnessError::Round { round, source })?;
        let eval = evaluate(&out.model);
        let up = out.traffic.total_upload() as f64 / out.selected.len() as f64;
        let down = out.traffic.total_download() as f64 / config.clients as f64;
        records.push(MetricsRecord {
            round,
            timings: out.timings,
            upload_bytes: if config.plaintext_control { 0.0 } else { up },
            download_bytes: if config.plaintext_control { 0.0 } else { down },
            loss: eval.map(|e| e.0),
            accuracy: eval.map(|e| e.1),
        });
        round_models.push(out.model);
    }

    let ledger = match &runner {
        Runner::Encrypted(f) => f.ledger().clone(),
        Runner::Control(_) => TrafficLedger::default(),
    };
    let final_model = round_models.last().cloned().unwrap_or(initial.clone());
    let mut stage_percent = [0.0; 8];
    for r in &records {
        for (acc, p) in stage_percent.iter_mut().zip(r.timings.percentages()) {
            *acc += p / records.len() as f64;
        }
    }
    let (total_upload, total_download) =
        ledger.rounds.values().fold((0, 0), |(u, d), r| (u + r.total_upload(), d + r.total_download()));
    let client_bytes: f64 =
        records.iter().map(|r| r.upload_bytes * config.sample as f64 / config.clients as f64 + r.download_bytes).sum();
    let initial_eval = evaluate(&initial);
    let final_eval = evaluate(&final_model);
    let layout = config.layout()?;
    let summary = Summary {
        rounds: config.rounds,
        plaintext_control: config.plaintext_control,
        transport: config.transport,
        weights: schema.layers().iter().map(|l| l.weight_count).sum(),
        slots: layout.slots,
        ciphertexts_per_update: prediction.ciphertexts,
        predicted: prediction,
        setup_download_bytes: ledger.setup.total_download(),
        total_upload_bytes: total_upload,
        total_download_bytes: total_download,
        mean_client_bytes_per_round: if records.is_empty() { 0.0 } else { client_bytes / records.len() as f64 },
        mean_stage_percent: STAGE_NAMES.iter().map(|s| s.to_string()).zip(stage_percent).collect(),
        initial_loss: initial_eval.map(|e| e.0),
        initial_accuracy: initial_eval.map(|e| e.1),
        final_loss: final_eval.map(|e| e.0),
        final_accuracy: final_eval.map(|e| e.1),
    };

    let (metrics_path, summary_path) = write_outputs(&config.out, &records, &summary)?;
    Ok(ExperimentReport { records, round_models, final_model, ledger, summary, metrics_path, summary_path })
}

fn write_outputs(dir: &Path, records: &[MetricsRecord], summary: &Summary) -> Result<(PathBuf, PathBuf), HarnessError> {
    fs::create_dir_all(dir).map_err(HarnessError::io(dir.to_path_buf()))?;
    let metrics_path = dir.join(METRICS_FILE);
    let mut w = csv::Writer::from_path(&metrics_path)?;
    w.write_record(metrics_header())?;
    for r in records {
        w.write_record(r.csv_row())?;
    }
    w.flush().map_err(HarnessError::io(metrics_path.clone()))?;

    let summary_path = dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(summary)?;
    fs::write(&summary_path, json + "\n").map_err(HarnessError::io(summary_path.clone()))?;
    Ok((metrics_path, summary_path))
}
