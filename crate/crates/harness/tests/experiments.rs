use std::process::Command;

use bitfold_harness::{
    metrics_header, predict_traffic, run_experiment, ExperimentConfig, HarnessError, ToyConfig, TrainerKind,
    TransportKind,
};
use bitfold_protocol::Model;

fn config(dir: &tempfile::TempDir, name: &str) -> ExperimentConfig {
    ExperimentConfig { out: dir.path().join(name), ..Default::default() }
}

/// Drops the eight timing columns from every row.
fn without_timings(csv_text: &str) -> Vec<String> {
    csv_text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            [&f[..1], &f[9..]].concat().join(",")
        })
        .collect()
}

#[test]
fn zero_rounds_keep_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&ExperimentConfig { rounds: 0, ..config(&dir, "zero") }).unwrap();
    assert!(report.records.is_empty());
    assert!(report.final_model.bits_eq(&Model::new(vec![vec![0.0; 16], vec![0.0]])));
    let text = std::fs::read_to_string(&report.metrics_path).unwrap();
    assert_eq!(text.trim_end(), metrics_header().join(","));
    assert!(report.summary_path.exists());
}

#[test]
fn same_seed_gives_identical_metrics_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_experiment(&ExperimentConfig { rounds: 4, ..config(&dir, "a") }).unwrap();
    let b = run_experiment(&ExperimentConfig { rounds: 4, ..config(&dir, "b") }).unwrap();
    let read = |p: &std::path::Path| without_timings(&std::fs::read_to_string(p).unwrap());
    assert_eq!(read(&a.metrics_path), read(&b.metrics_path));
    assert!(a.final_model.bits_eq(&b.final_model));

    let c = run_experiment(&ExperimentConfig { rounds: 4, seed: 2, ..config(&dir, "c") }).unwrap();
    assert!(!a.final_model.bits_eq(&c.final_model));
}

#[test]
fn fifty_rounds_match_control_and_predicted_traffic() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig { rounds: 50, ..config(&dir, "enc") };
    let enc = run_experiment(&base).unwrap();
    let ctl =
        run_experiment(&ExperimentConfig { plaintext_control: true, out: dir.path().join("ctl"), ..base.clone() })
            .unwrap();

    let (acc_enc, acc_ctl) = (enc.summary.final_accuracy.unwrap(), ctl.summary.final_accuracy.unwrap());
    assert!(acc_ctl > 0.95, "control accuracy {acc_ctl}");
    assert!((acc_enc - acc_ctl).abs() <= 0.01);
    for (x, y) in enc.records.iter().zip(&ctl.records) {
        assert_eq!(x.accuracy, y.accuracy, "round {}", x.round);
        assert_eq!(x.loss, y.loss, "round {}", x.round);
    }

    let p = predict_traffic(&base.schema().unwrap(), &base.ring().unwrap());
    let up: f64 = enc.records.iter().map(|r| r.upload_bytes).sum();
    let down: f64 = enc.records.iter().map(|r| r.download_bytes).sum();
    assert_eq!(up, (p.upload * 50) as f64);
    assert_eq!(down, (p.download * 50) as f64);
    assert_eq!(enc.summary.total_upload_bytes, p.upload * 50 * 5);
    assert_eq!(enc.summary.total_download_bytes, p.download * 50 * 10);
    assert!(ctl.records.iter().all(|r| r.upload_bytes == 0.0 && r.download_bytes == 0.0));
}

#[test]
fn loss_decreases_over_training() {
    let dir = tempfile::tempdir().unwrap();
    let report =
        run_experiment(&ExperimentConfig { rounds: 30, plaintext_control: true, ..config(&dir, "loss") }).unwrap();
    let losses: Vec<f64> = report.records.iter().map(|r| r.loss.unwrap()).collect();
    assert!(losses[29] < 0.5 * report.summary.initial_loss.unwrap());
    // Quantization jitter only: no round worsens loss by more than a few percent.
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] * 1.05, "{losses:?}");
    }
}

#[test]
fn non_iid_shards_still_train() {
    let dir = tempfile::tempdir().unwrap();
    let toy = ToyConfig { non_iid_skew: 0.8, ..Default::default() };
    let report = run_experiment(&ExperimentConfig { rounds: 20, toy, ..config(&dir, "skew") }).unwrap();
    assert!(report.summary.final_accuracy.unwrap() > 0.9);
}

#[test]
fn socket_transport_matches_memory_transport() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig { rounds: 3, clients: 4, sample: 2, ..config(&dir, "mem") };
    let mem = run_experiment(&base).unwrap();
    let sock =
        run_experiment(&ExperimentConfig { transport: TransportKind::Socket, out: dir.path().join("sock"), ..base })
            .unwrap();
    assert!(mem.final_model.bits_eq(&sock.final_model));
    assert_eq!(mem.ledger, sock.ledger);
}

#[test]
fn infeasible_layout_is_reported_before_any_round() {
    let dir = tempfile::tempdir().unwrap();
    let c = ExperimentConfig { beta: 12, delta: 1, ..config(&dir, "bad") };
    match run_experiment(&c) {
        Err(HarnessError::Packing(e)) => assert!(e.to_string().contains("carry"), "{e}"),
        other => panic!("{other:?}"),
    }
    assert!(!dir.path().join("bad").exists());
}

#[test]
fn identity_trainer_holds_the_model_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let c = ExperimentConfig { rounds: 3, layers: vec![100, 7], trainer: TrainerKind::Identity, ..config(&dir, "id") };
    let report = run_experiment(&c).unwrap();
    let control =
        run_experiment(&ExperimentConfig { plaintext_control: true, out: dir.path().join("id-control"), ..c.clone() })
            .unwrap();
    assert!(report.final_model.bits_eq(&control.final_model));
    // Only quantization error moves the weights: at most half a level per round.
    let step = 0.1 / ((1u64 << c.beta) - 1) as f64;
    let drift = report.final_model.layers.iter().flatten().fold(0.0f64, |m, w| m.max(w.abs()));
    assert!(drift <= c.rounds as f64 * step / 2.0 + 1e-12, "drift {drift}");
    assert!(report.records.iter().all(|r| r.loss.is_none()));
}

fn bitfold(args: &[&str]) -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bitfold")).args(args).output().unwrap();
    (out.status.success(), String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr))
}

#[test]
fn cli_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"rounds": 2, "clients": 4, "sample": 2, "layers": [8, 1]}"#).unwrap();
    let out = dir.path().join("run");
    let (ok, text) =
        bitfold(&["run", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", out.to_str().unwrap()]);
    assert!(ok, "{text}");
    assert_eq!(std::fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count(), 3);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rounds"], 2);

    let (ok, text) = bitfold(&["capacity", "--sample", "10"]);
    assert!(ok && text.contains("INFEASIBLE"), "{text}");
    let (ok, text) = bitfold(&["predict-traffic", "--beta", "6"]);
    assert!(ok && text.contains("\"upload\""), "{text}");
    let (ok, text) = bitfold(&["run", "--beta", "12", "--delta", "0", "--out", out.to_str().unwrap()]);
    assert!(!ok && text.contains("infeasible layout"), "{text}");
}
