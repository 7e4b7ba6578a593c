//! The whole loop at toy scale: simulate a small ensemble, train the
//! MLP, evaluate the OSNR chain and estimate one saved capture.
//! Artifacts land in a temp directory. Takes a couple of minutes.
//!
//! Run with: cargo run --release --example end_to_end

use osnrsim::config::Config;
use osnrsim::estimator::CalibrationFactors;
use osnrsim::nn;
use osnrsim::pipeline::{generate_dataset, load_dataset, run_estimate, run_eval, run_train};

fn main() {
    let dir = std::env::temp_dir().join("osnrsim-end-to-end");
    std::fs::create_dir_all(&dir).unwrap();

    let mut cfg = Config::default();
    cfg.channel_plan.count = 5;
    cfg.channel_plan.symbols_per_channel = 1 << 12;
    cfg.scenario.min_spans = 1;
    cfg.scenario.max_spans = 6;
    cfg.emulator.segments = 20;
    cfg.emulator.patterns = 4;
    cfg.rxdsp.eq_train_symbols = 4096;
    cfg.route.restrict_to = Some(vec!["NDSF".to_string(), "TWc".to_string()]);
    cfg.nn.max_epochs = 800;
    cfg.nn.patience = 100;

    let data = dir.join("demo.jsonl");
    let frames = dir.join("frames");
    println!("generating 60 scenarios into {} ...", data.display());
    let summary = generate_dataset(&cfg, 11, 60, &data, None, Some(&frames)).unwrap();
    println!(
        "  {} computed, {} reused, {} failed",
        summary.computed, summary.reused, summary.failed
    );

    let model_path = dir.join("model.json");
    println!("training ...");
    let train = run_train(&data, &cfg, 1, &model_path).unwrap();
    println!(
        "  {} train / {} test records; NN accuracy ({:+.2} ± {:.2}) dB",
        train.n_train, train.n_test, train.offset_db, train.sigma_db
    );

    let report_csv = dir.join("report.csv");
    let model = nn::load(&model_path).unwrap();
    let report = run_eval(&data, Some(&model), &cfg, Some(&report_csv)).unwrap();
    println!(
        "full-chain OSNR accuracy: ({:+.2} ± {:.2}) dB over {} records, invalid rate {:.1}%",
        report.overall.osnr_offset_db,
        report.overall.osnr_sigma_db,
        report.overall.count,
        100.0 * report.overall.invalid_rate
    );

    // estimate the first saved capture and compare with the truth
    let records = load_dataset(&data).unwrap();
    let rec = &records[0];
    let est = run_estimate(
        frames.join("frame_000000.bin"),
        &rec.link,
        &CalibrationFactors::default(),
        &model,
        &cfg,
    )
    .unwrap();
    let osnr_true = rec.snr_ase_db + cfg.bandwidth_pair().unwrap().osnr_offset_db();
    println!(
        "capture 0: estimated OSNR {:.2} dB (truth {:.2} dB), valid={} ({:?})",
        est.osnr_db, osnr_true, est.valid, est.reason
    );
    println!("artifacts in {}", dir.display());
}
