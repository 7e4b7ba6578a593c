//! Batch orchestration: dataset generation (simulate → receive →
//! featurize → ground truth), NN training with a held-out test split,
//! evaluation reports (bias ± σ, CCDFs, validity rate) and single-
//! capture estimation.
//!
//! Every artifact is a plain text format: JSONL datasets, JSON models,
//! CSV reports, optional SVG plots. A (config, master_seed) pair fully
//! determines every output byte, independent of the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::emulator;
use crate::error::{Error, Result};
use crate::estimator::{self, CalibrationFactors, OsnrEstimate};
use crate::features::{self, default_c_indices, FeatureVector, FEATURE_LAYOUT_ID};
use crate::metrics::{Constellation, SnrValue};
use crate::nn;
use crate::rxdsp::{self, LinkMetadata, SymbolFrame};
use crate::scenario::{build_scenario, Scenario};
use crate::ssfprop;
use crate::txmodel::{self, TxChannel};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

/// One line of a dataset file: the scenario, the extracted features
/// and the ground truths the NN trains and evaluates against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub schema_version: u32,
    pub index: u64,
    pub feature_layout: String,
    pub features: Vec<f64>,
    pub esnr_db: f64,
    pub ber: f64,
    pub esnr_from_variance: bool,
    /// Ground-truth nonlinear SNR from the γ=0 twin propagation, dB.
    pub snr_nl_db: f64,
    /// Ground-truth ASE SNR (the injected emulator target), dB.
    pub snr_ase_db: f64,
    pub link: LinkMetadata,
    pub scenario: Scenario,
}

/// Simulates one scenario end to end. Returns the record plus the
/// measured symbol frame (for optional capture export).
pub fn run_scenario(scenario: &Scenario, config: &Config) -> Result<(DatasetRecord, SymbolFrame)> {
    let constellation = Constellation::new(scenario.format);
    let baud = scenario.baud_hz;
    let sps = txmodel::sim_samples_per_symbol(
        scenario.channel_count,
        scenario.spacing_hz,
        baud,
        scenario.rolloff,
    );
    let fs = baud * sps as f64;
    let grid_len = scenario.symbols_per_channel * sps;

    // per-channel seeds spread from the scenario symbol seed
    let chan_seed =
        |ch: usize| scenario.seeds.symbols ^ (ch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut channels = Vec::with_capacity(scenario.channel_count);
    for ch in 0..scenario.channel_count {
        let nominal =
            (ch as f64 - (scenario.channel_count as f64 - 1.0) / 2.0) * scenario.spacing_hz;
        let offset = txmodel::snap_to_grid(nominal, fs, grid_len);
        channels.push(TxChannel::new(
            chan_seed(ch),
            scenario.symbols_per_channel,
            constellation.clone(),
            baud,
            offset,
            10f64.powf(scenario.launch_powers_dbm[ch] / 10.0) * 1e-3,
        )?);
    }
    let muxed = txmodel::mux_wdm(&channels, scenario.rolloff, fs)?;

    let ssf = config.ssf_config();
    let wave_nl =
        ssfprop::propagate_route(&muxed, &scenario.route, &scenario.amp_scales_db, &ssf, true)?;
    let wave_lin =
        ssfprop::propagate_route(&muxed, &scenario.route, &scenario.amp_scales_db, &ssf, false)?;

    let probe = &channels[scenario.probe_index];
    let ext_nl = ssfprop::extract_channel(
        &wave_nl,
        probe.center_offset_hz,
        baud,
        2,
        scenario.spacing_hz,
    )?;
    let ext_lin = ssfprop::extract_channel(
        &wave_lin,
        probe.center_offset_hz,
        baud,
        2,
        scenario.spacing_hz,
    )?;

    let cum_disp = scenario.route.cumulative_dispersion_ps_nm();
    let dsp = config.dsp_config();
    let snr_nl = rxdsp::ground_truth_snr_nl(
        &ext_nl,
        &ext_lin,
        &probe.symbols_x,
        &probe.symbols_y,
        cum_disp,
        baud,
        &constellation,
        &dsp,
    )?;

    let chain = emulator::build_emulator(
        scenario.seeds.emulator,
        scenario.emulator_segments,
        scenario.dgd_mean_ps,
        scenario.pdl_mean_db,
    )?;
    let emulated = emulator::apply_emulator(
        &ext_nl,
        &chain,
        SnrValue::from_db(scenario.target_snr_ase_db),
        scenario.pattern_count,
        baud,
        scenario.seeds.emulator_noise,
    )?;

    let mut tiled_x = Vec::with_capacity(probe.symbols_x.len() * scenario.pattern_count);
    let mut tiled_y = Vec::with_capacity(tiled_x.capacity());
    for _ in 0..scenario.pattern_count {
        tiled_x.extend_from_slice(&probe.symbols_x);
        tiled_y.extend_from_slice(&probe.symbols_y);
    }
    let frame = rxdsp::process_capture(
        &emulated,
        &tiled_x,
        &tiled_y,
        cum_disp,
        baud,
        &constellation,
        &dsp,
    )?;

    let link = LinkMetadata {
        length_km: scenario.route.total_length_km(),
        cumulative_dispersion_ps_nm: cum_disp,
        baud_hz: baud,
        mode: scenario.mode.name().to_string(),
    };
    let cc = features::c_coefficients(&frame, &default_c_indices())?;
    let dbl = features::doublets(&frame, 8)?;
    let fv = features::assemble_features(&cc, &dbl, &link, frame.esnr)?;

    let record = DatasetRecord {
        schema_version: DATASET_SCHEMA_VERSION,
        index: scenario.index,
        feature_layout: FEATURE_LAYOUT_ID.to_string(),
        features: fv.0.clone(),
        esnr_db: frame.esnr.db(),
        ber: frame.ber,
        esnr_from_variance: frame.esnr_from_variance,
        snr_nl_db: snr_nl.db(),
        snr_ase_db: scenario.target_snr_ase_db,
        link,
        scenario: scenario.clone(),
    };
    Ok((record, frame))
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerateSummary {
    pub requested: u64,
    pub reused: usize,
    pub computed: usize,
    pub failed: usize,
    pub failures: Vec<(u64, String)>,
    pub out_path: PathBuf,
}

impl GenerateSummary {
    /// Partial-failure threshold from the CLI contract: more than 5%
    /// failed scenarios is an error condition (exit code 3).
    pub fn failure_rate_exceeded(&self) -> bool {
        (self.failed as f64) > 0.05 * self.requested as f64
    }
}

/// Generates (or resumes) a JSONL dataset of `count` scenarios.
/// Existing records for the same master seed are reused; missing
/// indices are computed in parallel and the file is rewritten in index
/// order, so an interrupted run resumes to a byte-identical file.
pub fn generate_dataset(
    config: &Config,
    master_seed: u64,
    count: u64,
    out_path: impl AsRef<Path>,
    threads: Option<usize>,
    frames_dir: Option<&Path>,
) -> Result<GenerateSummary> {
    let out_path = out_path.as_ref().to_path_buf();
    let scenario_cfg = config.scenario_config()?;

    // reuse completed lines from a previous (interrupted) run
    let mut existing: std::collections::BTreeMap<u64, String> = std::collections::BTreeMap::new();
    if out_path.exists() {
        let text = std::fs::read_to_string(&out_path)?;
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            if let Ok(rec) = serde_json::from_str::<DatasetRecord>(line) {
                if rec.scenario.master_seed == master_seed
                    && rec.index < count
                    && rec.feature_layout == FEATURE_LAYOUT_ID
                {
                    existing.insert(rec.index, line.to_string());
                }
            }
        }
    }
    let todo: Vec<u64> = (0..count).filter(|i| !existing.contains_key(i)).collect();
    let reused = existing.len();

    let worker = |index: u64| -> (u64, std::result::Result<(String, Option<Vec<u8>>), String>) {
        let result = build_scenario(master_seed, index, &scenario_cfg)
            .and_then(|sc| run_scenario(&sc, config))
            .and_then(|(record, frame)| {
                let line = serde_json::to_string(&record)?;
                let frame_bytes = if frames_dir.is_some() {
                    let mut buf = Vec::new();
                    rxdsp::write_frame(&frame, &mut buf)?;
                    Some(buf)
                } else {
                    None
                };
                Ok((line, frame_bytes))
            });
        (index, result.map_err(|e| e.to_string()))
    };

    let results: Vec<_> = match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::config(format!("thread pool: {e}")))?;
            pool.install(|| todo.par_iter().map(|&i| worker(i)).collect())
        }
        None => todo.par_iter().map(|&i| worker(i)).collect(),
    };

    let mut failures = Vec::new();
    let mut computed = 0usize;
    for (index, result) in results {
        match result {
            Ok((line, frame_bytes)) => {
                existing.insert(index, line);
                computed += 1;
                if let (Some(dir), Some(bytes)) = (frames_dir, frame_bytes) {
                    std::fs::create_dir_all(dir)?;
                    std::fs::write(dir.join(format!("frame_{index:06}.bin")), bytes)?;
                }
            }
            Err(msg) => {
                eprintln!("scenario {index} failed: {msg}");
                failures.push((index, msg));
            }
        }
    }

    // rewrite the whole file in index order
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = out_path.with_extension("jsonl.tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        for line in existing.values() {
            writeln!(f, "{line}")?;
        }
    }
    std::fs::rename(&tmp, &out_path)?;

    Ok(GenerateSummary {
        requested: count,
        reused,
        computed,
        failed: failures.len(),
        failures,
        out_path,
    })
}

/// Loads a JSONL dataset, enforcing schema and feature-layout
/// consistency.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::data(format!("{}: {e}", path.as_ref().display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(line)
            .map_err(|e| Error::data(format!("line {}: {e}", lineno + 1)))?;
        if rec.schema_version != DATASET_SCHEMA_VERSION {
            return Err(Error::data(format!(
                "line {}: unsupported dataset schema {}",
                lineno + 1,
                rec.schema_version
            )));
        }
        if rec.feature_layout != FEATURE_LAYOUT_ID {
            return Err(Error::data(format!(
                "line {}: feature layout '{}' does not match this build ('{}')",
                lineno + 1,
                rec.feature_layout,
                FEATURE_LAYOUT_ID
            )));
        }
        if rec.features.len() != features::FEATURE_LEN {
            return Err(Error::data(format!(
                "line {}: feature vector has length {}",
                lineno + 1,
                rec.features.len()
            )));
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::data("dataset is empty".to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub n_train: usize,
    pub n_test: usize,
    /// NN-level systematic offset on the test split, dB.
    pub offset_db: f64,
    /// NN-level standard deviation on the test split, dB.
    pub sigma_db: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub model_path: PathBuf,
    pub history_path: PathBuf,
    pub split_path: PathBuf,
    pub warnings: Vec<String>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Splits the dataset (seeded shuffle, `test_fraction` held out),
/// trains the MLP on the rest and writes the model, a per-epoch
/// history CSV and the split index lists.
pub fn run_train(
    dataset_path: impl AsRef<Path>,
    config: &Config,
    seed: u64,
    model_out: impl AsRef<Path>,
) -> Result<TrainSummary> {
    let records = load_dataset(&dataset_path)?;
    let n = records.len();
    let mut idx: Vec<usize> = (0..n).collect();
    {
        use rand::Rng;
        let mut rng = crate::derive_rng(seed, 0, 14);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
    }
    let n_test = ((n as f64 * config.nn.test_fraction).round() as usize).clamp(1, n - 1);
    let test_idx: Vec<usize> = idx[..n_test].to_vec();
    let train_idx: Vec<usize> = idx[n_test..].to_vec();

    let pairs = |ids: &[usize]| -> Vec<(FeatureVector, f64)> {
        ids.iter()
            .map(|&i| {
                (
                    FeatureVector(records[i].features.clone()),
                    records[i].snr_nl_db,
                )
            })
            .collect()
    };
    let train_set = pairs(&train_idx);
    let (model, history) = nn::train(&train_set, &config.train_config(seed))?;

    let model_out = model_out.as_ref().to_path_buf();
    nn::save(&model, &model_out)?;
    let history_path = model_out.with_extension("history.csv");
    {
        let mut f = std::fs::File::create(&history_path)?;
        writeln!(f, "epoch,train_mse,val_mse")?;
        for e in &history.epochs {
            writeln!(f, "{},{},{}", e.epoch, e.train_mse, e.val_mse)?;
        }
    }
    let split_path = model_out.with_extension("split.json");
    {
        // dataset-level split audit: record indices, not positions
        let train_records: Vec<u64> = train_idx.iter().map(|&i| records[i].index).collect();
        let test_records: Vec<u64> = test_idx.iter().map(|&i| records[i].index).collect();
        let json = serde_json::json!({
            "train": train_records,
            "test": test_records,
        });
        std::fs::write(&split_path, serde_json::to_string_pretty(&json)?)?;
    }

    let errors = |ids: &[usize]| -> Result<Vec<f64>> {
        ids.iter()
            .map(|&i| {
                Ok(nn::forward(&model, &FeatureVector(records[i].features.clone()))?
                    - records[i].snr_nl_db)
            })
            .collect()
    };
    let test_errors = errors(&test_idx)?;
    let train_errors = errors(&train_idx)?;
    let (offset, sigma) = mean_std(&test_errors);
    let mut warnings = history.warnings.clone();
    let rmse = |errs: &[f64]| (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    let (train_rmse, test_rmse) = (rmse(&train_errors), rmse(&test_errors));
    if test_rmse > 3.0 * train_rmse {
        warnings.push(format!(
            "overfit tripwire: test RMSE {test_rmse:.3} dB exceeds 3x train RMSE {train_rmse:.3} dB"
        ));
    }

    Ok(TrainSummary {
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        offset_db: offset,
        sigma_db: sigma,
        best_epoch: history.best_epoch,
        epochs_run: history.epochs.len(),
        model_path: model_out,
        history_path,
        split_path,
        warnings,
    })
}

/// CCDF grid: |error| thresholds 0..3 dB in 0.05 dB steps.
pub fn ccdf_grid() -> Vec<f64> {
    (0..=60).map(|i| i as f64 * 0.05).collect()
}

fn ccdf_of(errors: &[f64]) -> Vec<(f64, f64)> {
    let n = errors.len().max(1) as f64;
    ccdf_grid()
        .into_iter()
        .map(|t| {
            let c = errors.iter().filter(|e| e.abs() >= t).count() as f64 / n;
            (t, c)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeStats {
    pub mode: String,
    pub count: usize,
    pub valid_count: usize,
    pub invalid_rate: f64,
    /// OSNR estimate vs ground truth over valid estimates, dB.
    pub osnr_offset_db: f64,
    pub osnr_sigma_db: f64,
    /// NN prediction vs ground-truth SNR_NL over all records, dB.
    pub nl_offset_db: f64,
    pub nl_sigma_db: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub overall: ModeStats,
    pub per_mode: Vec<ModeStats>,
    /// CCDF of |OSNR error| over valid estimates.
    pub ccdf_osnr: Vec<(f64, f64)>,
    /// CCDF of |SNR_NL error| over all records.
    pub ccdf_nl: Vec<(f64, f64)>,
}

fn stats_for(records: &[(&DatasetRecord, f64, Option<f64>)], mode: &str) -> ModeStats {
    let nl_errors: Vec<f64> = records.iter().map(|(r, nl_hat, _)| nl_hat - r.snr_nl_db).collect();
    let osnr_errors: Vec<f64> = records.iter().filter_map(|(_, _, e)| *e).collect();
    let (nl_offset, nl_sigma) = mean_std(&nl_errors);
    let (o_offset, o_sigma) = if osnr_errors.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        mean_std(&osnr_errors)
    };
    ModeStats {
        mode: mode.to_string(),
        count: records.len(),
        valid_count: osnr_errors.len(),
        invalid_rate: 1.0 - osnr_errors.len() as f64 / records.len().max(1) as f64,
        osnr_offset_db: o_offset,
        osnr_sigma_db: o_sigma,
        nl_offset_db: nl_offset,
        nl_sigma_db: nl_sigma,
    }
}

/// Evaluates the full OSNR chain on a dataset: NN prediction (or the
/// recorded ground truth when `oracle` is set), Eq. (1)/(2), validity
/// gate, OSNR conversion, compared against the injected SNR_ASE.
pub fn run_eval(
    dataset_path: impl AsRef<Path>,
    model: Option<&nn::ModelWeights>,
    config: &Config,
    out_csv: Option<&Path>,
) -> Result<EvalReport> {
    let records = load_dataset(&dataset_path)?;
    let bw = config.bandwidth_pair()?;
    let gate = config.validity_config();
    let cal = CalibrationFactors::default();

    // (record, nl_hat_db, valid OSNR error)
    let mut rows: Vec<(&DatasetRecord, f64, Option<f64>)> = Vec::with_capacity(records.len());
    for rec in &records {
        let nl_hat_db = match model {
            Some(m) => nn::forward(m, &FeatureVector(rec.features.clone()))?,
            None => rec.snr_nl_db,
        };
        let esnr = SnrValue::from_db(rec.esnr_db);
        let ext = estimator::snr_ext_from_esnr(esnr, &cal)?;
        let (valid, _) = estimator::validity_gate(nl_hat_db, ext.db(), &gate);
        let ase = estimator::snr_ase_from_ext(ext, SnrValue::from_db(nl_hat_db)).unwrap_or(ext);
        let osnr_est_db = crate::metrics::osnr_from_snr_ase(ase, &bw).db();
        let osnr_true_db = rec.snr_ase_db + bw.osnr_offset_db();
        let err = valid.then_some(osnr_est_db - osnr_true_db);
        rows.push((rec, nl_hat_db, err));
    }

    let overall = stats_for(&rows, "all");
    let mut modes: Vec<String> = rows
        .iter()
        .map(|(r, _, _)| r.link.mode.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    modes.sort();
    let per_mode: Vec<ModeStats> = modes
        .iter()
        .map(|m| {
            let subset: Vec<_> = rows
                .iter()
                .filter(|(r, _, _)| &r.link.mode == m)
                .cloned()
                .collect();
            stats_for(&subset, m)
        })
        .collect();
    let osnr_errors: Vec<f64> = rows.iter().filter_map(|(_, _, e)| *e).collect();
    let nl_errors: Vec<f64> = rows
        .iter()
        .map(|(r, nl_hat, _)| nl_hat - r.snr_nl_db)
        .collect();
    let report = EvalReport {
        overall,
        per_mode,
        ccdf_osnr: ccdf_of(&osnr_errors),
        ccdf_nl: ccdf_of(&nl_errors),
    };
    if let Some(path) = out_csv {
        write_report_csv(&report, path)?;
    }
    Ok(report)
}

/// Writes the report as `metric,key,value` rows followed by the CCDF
/// tables (`ccdf_osnr,<abs_err_db>,<fraction>` and `ccdf_nl,...`).
pub fn write_report_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "metric,key,value")?;
    let block = |s: &ModeStats, f: &mut std::fs::File| -> Result<()> {
        writeln!(f, "count,{},{}", s.mode, s.count)?;
        writeln!(f, "valid_count,{},{}", s.mode, s.valid_count)?;
        writeln!(f, "invalid_rate,{},{}", s.mode, s.invalid_rate)?;
        writeln!(f, "osnr_offset_db,{},{}", s.mode, s.osnr_offset_db)?;
        writeln!(f, "osnr_sigma_db,{},{}", s.mode, s.osnr_sigma_db)?;
        writeln!(f, "nl_offset_db,{},{}", s.mode, s.nl_offset_db)?;
        writeln!(f, "nl_sigma_db,{},{}", s.mode, s.nl_sigma_db)?;
        Ok(())
    };
    block(&report.overall, &mut f)?;
    for s in &report.per_mode {
        block(s, &mut f)?;
    }
    for (t, c) in &report.ccdf_osnr {
        writeln!(f, "ccdf_osnr,{t:.2},{c}")?;
    }
    for (t, c) in &report.ccdf_nl {
        writeln!(f, "ccdf_nl,{t:.2},{c}")?;
    }
    Ok(())
}

/// Renders the two CCDF curves as a simple SVG line plot.
pub fn write_report_svg(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let (w, h, ml, mb) = (640.0, 420.0, 60.0, 50.0);
    let plot_w = w - ml - 20.0;
    let plot_h = h - mb - 20.0;
    let x_of = |t: f64| ml + t / 3.0 * plot_w;
    // log scale down to 1e-3 with a floor
    let y_of = |c: f64| {
        let v = c.max(5e-4).log10(); // [-3.3, 0]
        20.0 + (-v / 3.31) * plot_h
    };
    let path_of = |pts: &[(f64, f64)]| {
        pts.iter()
            .map(|&(t, c)| format!("{:.1},{:.1}", x_of(t), y_of(c)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    s.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    for g in 0..=3 {
        let x = x_of(g as f64);
        s.push_str(&format!(
            "<line x1=\"{x}\" y1=\"20\" x2=\"{x}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            20.0 + plot_h
        ));
        s.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{g}</text>\n",
            h - mb + 20.0
        ));
    }
    for e in 0..=3 {
        let y = y_of(10f64.powi(-e));
        s.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/>\n",
            ml + plot_w
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">1e-{e}</text>\n",
            ml - 6.0,
            y + 4.0
        ));
    }
    s.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{}\"/>\n",
        path_of(&report.ccdf_osnr)
    ));
    s.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" points=\"{}\"/>\n",
        path_of(&report.ccdf_nl)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">|error| (dB)</text>\n",
        ml + plot_w / 2.0,
        h - 8.0
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"36\" font-size=\"13\" fill=\"#1f77b4\">OSNR error CCDF</text>\n",
        ml + 10.0
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"52\" font-size=\"13\" fill=\"#d62728\">SNR_NL error CCDF</text>\n",
        ml + 10.0
    ));
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

/// Runs the estimator on one saved capture.
pub fn run_estimate(
    frame_path: impl AsRef<Path>,
    meta: &LinkMetadata,
    cal: &CalibrationFactors,
    model: &nn::ModelWeights,
    config: &Config,
) -> Result<OsnrEstimate> {
    let file = std::fs::File::open(&frame_path)
        .map_err(|e| Error::data(format!("{}: {e}", frame_path.as_ref().display())))?;
    let frame = rxdsp::read_frame(std::io::BufReader::new(file), config.dsp_config().reference)?;
    estimator::estimate_osnr(
        &frame,
        meta,
        cal,
        model,
        &config.bandwidth_pair()?,
        &config.validity_config(),
    )
}

/// Tiny deterministic synthetic dataset used by tests and examples
/// when full propagation would be wasteful: AWGN-like frames with
/// known ESNR and a closed-form SNR_NL relation to the features.
pub fn synthetic_record(index: u64, seed: u64) -> DatasetRecord {
    use rand::Rng;
    let mut rng = crate::derive_rng(seed, index, 77);
    let esnr_db = rng.random_range(8.0..20.0);
    let length_km = rng.random_range(80.0..1200.0);
    let cum = length_km * 17.0;
    let mut features = vec![0.0; features::FEATURE_LEN];
    features[0] = esnr_db;
    features[1] = length_km / 1e3;
    features[2] = cum / 1e4;
    for v in features.iter_mut().skip(3) {
        *v = rng.random_range(0.0..0.05);
    }
    let snr_nl_db = 20.0 + 8.0 * features[3] - 2.0 * features[1] + 0.3 * esnr_db;
    let inv_ase = 10f64.powf(-esnr_db / 10.0) - 10f64.powf(-snr_nl_db / 10.0);
    let snr_ase_db = -10.0 * inv_ase.log10();
    DatasetRecord {
        schema_version: DATASET_SCHEMA_VERSION,
        index,
        feature_layout: FEATURE_LAYOUT_ID.to_string(),
        features,
        esnr_db,
        ber: 1e-3,
        esnr_from_variance: false,
        snr_nl_db,
        snr_ase_db,
        link: LinkMetadata {
            length_km,
            cumulative_dispersion_ps_nm: cum,
            baud_hz: 56e9,
            mode: "56-200G".to_string(),
        },
        scenario: {
            let cfg = crate::scenario::ScenarioConfig {
                route_model: crate::routegen::FiberMarkovModel::default(),
                min_spans: 1,
                max_spans: 3,
                channel_count: 13,
                spacing_hz: 62.5e9,
                baud_hz: 56e9,
                rolloff: 0.1,
                symbols_per_channel: 1 << 14,
                case_mix: crate::scenario::CaseMix::default(),
                modes: vec![(
                    crate::scenario::ModeParams::nominal(
                        crate::scenario::TransmissionMode::Mode200G,
                    ),
                    1.0,
                )],
                power_offset_db: 2.0,
                power_sigma_db: 2.0,
                fec_ber: 0.032,
                pattern_count: 20,
                emulator_segments: 50,
                max_retries: 16,
            };
            build_scenario(seed, index, &cfg).expect("synthetic scenario")
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small but real end-to-end config: 3 channels, short frames.
    fn tiny_config() -> Config {
        let mut cfg = Config::default();
        cfg.channel_plan.count = 3;
        cfg.channel_plan.symbols_per_channel = 1 << 12;
        cfg.scenario.min_spans = 1;
        cfg.scenario.max_spans = 2;
        cfg.emulator.segments = 10;
        cfg.emulator.patterns = 2;
        cfg.rxdsp.eq_train_symbols = 4096;
        cfg.route.restrict_to = Some(vec!["NDSF".to_string(), "TWc".to_string()]);
        cfg
    }

    #[test]
    fn scenario_runs_end_to_end_with_sane_outputs() {
        let cfg = tiny_config();
        let sc = build_scenario(11, 0, &cfg.scenario_config().unwrap()).unwrap();
        let (record, frame) = run_scenario(&sc, &cfg).unwrap();
        assert_eq!(record.features.len(), features::FEATURE_LEN);
        assert_eq!(frame.len(), sc.symbols_per_channel * sc.pattern_count);
        // measured ESNR close to the combined injected noise target
        let inv = 10f64.powf(-sc.target_snr_ase_db / 10.0) + 10f64.powf(-record.snr_nl_db / 10.0);
        let expected_esnr = -10.0 * inv.log10();
        assert!(
            (record.esnr_db - expected_esnr).abs() < 0.5,
            "esnr {:.2} vs ase+nl {:.2} (ase {:.2}, nl {:.2})",
            record.esnr_db,
            expected_esnr,
            sc.target_snr_ase_db,
            record.snr_nl_db
        );
        assert!(record.snr_nl_db > sc.target_snr_ase_db);
    }

    #[test]
    fn generate_is_deterministic_and_resumable() {
        let cfg = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("data.jsonl");
        let s1 = generate_dataset(&cfg, 5, 4, &out, Some(2), None).unwrap();
        assert_eq!(s1.computed, 4);
        assert!(!s1.failure_rate_exceeded());
        let bytes1 = std::fs::read(&out).unwrap();

        // full rerun reuses everything and leaves the file identical
        let s2 = generate_dataset(&cfg, 5, 4, &out, Some(1), None).unwrap();
        assert_eq!(s2.reused, 4);
        assert_eq!(s2.computed, 0);
        assert_eq!(std::fs::read(&out).unwrap(), bytes1);

        // truncate to simulate an interrupted run, then resume
        let text = String::from_utf8(bytes1.clone()).unwrap();
        let partial: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        std::fs::write(&out, partial).unwrap();
        let s3 = generate_dataset(&cfg, 5, 4, &out, None, None).unwrap();
        assert_eq!(s3.reused, 2);
        assert_eq!(s3.computed, 2);
        assert_eq!(std::fs::read(&out).unwrap(), bytes1);

        // a different seed ignores the stale records
        let s4 = generate_dataset(&cfg, 6, 4, &out, None, None).unwrap();
        assert_eq!(s4.reused, 0);
        assert_ne!(std::fs::read(&out).unwrap(), bytes1);
    }

    #[test]
    fn dataset_loading_validates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        std::fs::write(&p, "{\"not\": \"a record\"}\n").unwrap();
        assert!(load_dataset(&p).is_err());
        let rec = synthetic_record(0, 1);
        let mut line = serde_json::to_string(&rec).unwrap();
        line = line.replace(FEATURE_LAYOUT_ID, "other-layout");
        std::fs::write(&p, line).unwrap();
        assert!(load_dataset(&p).is_err());
    }

    #[test]
    fn train_eval_cycle_on_synthetic_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let data_path = dir.path().join("synth.jsonl");
        {
            let mut f = std::fs::File::create(&data_path).unwrap();
            for i in 0..200 {
                writeln!(f, "{}", serde_json::to_string(&synthetic_record(i, 3)).unwrap())
                    .unwrap();
            }
        }
        let mut cfg = Config::default();
        cfg.nn.max_epochs = 400;
        cfg.nn.patience = 400;
        let model_path = dir.path().join("model.json");
        let summary = run_train(&data_path, &cfg, 1, &model_path).unwrap();
        assert_eq!(summary.n_train + summary.n_test, 200);
        assert_eq!(summary.n_test, 44); // 0.22 of 200
        assert!(summary.sigma_db < 1.0, "NN sigma {}", summary.sigma_db);
        assert!(model_path.exists());
        assert!(summary.history_path.exists());
        // split audit: no overlap
        let split: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&summary.split_path).unwrap()).unwrap();
        let train: Vec<u64> = split["train"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect();
        let test: Vec<u64> = split["test"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect();
        for t in &test {
            assert!(!train.contains(t));
        }
        // history CSV rows = epochs run
        let hist = std::fs::read_to_string(&summary.history_path).unwrap();
        assert_eq!(hist.lines().count() - 1, summary.epochs_run);

        // eval with the trained model
        let model = nn::load(&model_path).unwrap();
        let csv_path = dir.path().join("report.csv");
        let report = run_eval(&data_path, Some(&model), &cfg, Some(&csv_path)).unwrap();
        assert_eq!(report.overall.count, 200);
        assert_eq!(report.ccdf_osnr[0].1, 1.0);
        for w in report.ccdf_osnr.windows(2) {
            assert!(w[1].1 <= w[0].1, "CCDF must be non-increasing");
        }
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("metric,key,value"));
        assert!(text.contains("osnr_sigma_db,all,"));

        // oracle mode: bias from the recorded ESNR/ASE/NL identity only
        let oracle = run_eval(&data_path, None, &cfg, None).unwrap();
        assert!(
            oracle.overall.osnr_offset_db.abs() < 1e-9,
            "oracle offset {}",
            oracle.overall.osnr_offset_db
        );
        assert!(oracle.overall.osnr_sigma_db < 1e-9);
        assert_eq!(oracle.overall.valid_count, 200);

        // sigma definition: sample std of signed errors
        let errors: Vec<f64> = {
            let records = load_dataset(&data_path).unwrap();
            records
                .iter()
                .map(|r| {
                    let nl = nn::forward(&model, &FeatureVector(r.features.clone())).unwrap();
                    nl - r.snr_nl_db
                })
                .collect()
        };
        let (_, sd) = mean_std(&errors);
        assert!((sd - report.overall.nl_sigma_db).abs() < 1e-9);

        // SVG plot renders
        let svg_path = dir.path().join("report.svg");
        write_report_svg(&report, &svg_path).unwrap();
        let svg = std::fs::read_to_string(&svg_path).unwrap();
        assert!(svg.contains("<svg") && svg.contains("polyline"));
    }

    #[test]
    fn estimate_round_trip_from_generated_frame() {
        let cfg = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("data.jsonl");
        let frames = dir.path().join("frames");
        generate_dataset(&cfg, 9, 2, &out, None, Some(&frames)).unwrap();
        let records = load_dataset(&out).unwrap();
        let rec = &records[0];

        // model that predicts the recorded ground truth for everything
        let mut model = nn::init(1, &nn::standard_layout()).unwrap();
        for w in model.weights.iter_mut() {
            w.fill(0.0);
        }
        model.biases[2][0] = rec.snr_nl_db;

        let est = run_estimate(
            frames.join("frame_000000.bin"),
            &rec.link,
            &CalibrationFactors::default(),
            &model,
            &cfg,
        )
        .unwrap();
        // f32 storage keeps the ESNR within a few millidB
        assert!(
            (est.esnr_db - rec.esnr_db).abs() < 0.01,
            "esnr {} vs {}",
            est.esnr_db,
            rec.esnr_db
        );
        let bw = cfg.bandwidth_pair().unwrap();
        let osnr_true = rec.snr_ase_db + bw.osnr_offset_db();
        assert!(
            (est.osnr_db - osnr_true).abs() < 1.0,
            "osnr {} vs true {}",
            est.osnr_db,
            osnr_true
        );
        // corrupted frame file is a data error
        let bad = dir.path().join("bad.bin");
        std::fs::write(&bad, b"garbage").unwrap();
        assert!(run_estimate(
            &bad,
            &rec.link,
            &CalibrationFactors::default(),
            &model,
            &cfg
        )
        .is_err());
    }
}
