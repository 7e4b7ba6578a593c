//! Batch pipeline front end. The library carries all functionality;
//! this binary only parses arguments, wires configuration and maps
//! errors to exit codes (0 ok, 1 usage, 2 data/config error, 3 partial
//! failure threshold exceeded).

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use osnrsim::config::Config;
use osnrsim::error::Error;
use osnrsim::estimator::CalibrationFactors;
use osnrsim::metrics::SnrValue;
use osnrsim::pipeline;
use osnrsim::rxdsp::LinkMetadata;

#[derive(Parser)]
#[command(
    name = "osnrsim",
    about = "WDM link simulation and neural-network OSNR estimation pipeline",
    version
)]
struct Cli {
    /// Config file (TOML). Defaults to OSNRSIM_CONFIG or built-ins.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (wall time only; results are independent).
    /// Defaults to OSNRSIM_THREADS or all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate scenarios into a JSONL dataset (resumable).
    Generate {
        /// Master seed; with the config it determines every byte.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of scenarios.
        #[arg(long)]
        count: u64,
        /// Output dataset path (.jsonl).
        #[arg(long)]
        out: PathBuf,
        /// Also write per-scenario symbol captures here.
        #[arg(long)]
        frames_dir: Option<PathBuf>,
    },
    /// Train the MLP on a dataset with a held-out test split.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Model output path (.json); history/split sidecars derive
        /// from it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the full OSNR chain on a dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Trained model; omit to feed ground-truth SNR_NL back
        /// (oracle ablation).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Report CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional CCDF plot.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Estimate OSNR from one saved symbol capture.
    Estimate {
        /// Capture file written by `generate --frames-dir`.
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        meta: MetaArgs,
        /// Eye-closure calibration factor.
        #[arg(long, default_value_t = 1.0)]
        ec: f64,
        /// Implementation-noise SNR in dB (omit for an ideal modem).
        #[arg(long)]
        snr_imp_db: Option<f64>,
    },
    /// Re-render an eval CSV as an SVG plot plus a summary line.
    Report {
        /// Report CSV produced by `eval`.
        #[arg(long)]
        report: PathBuf,
        /// SVG output path.
        #[arg(long)]
        svg: PathBuf,
    },
}

#[derive(Args)]
struct MetaArgs {
    #[arg(long)]
    length_km: f64,
    #[arg(long)]
    cum_dispersion_ps_nm: f64,
    #[arg(long, default_value = "56-200G")]
    mode: String,
    #[arg(long, default_value_t = 56.0)]
    baud_gbd: f64,
}

fn load_config(path: &Option<PathBuf>) -> Result<Config, Error> {
    let from_env = std::env::var_os("OSNRSIM_CONFIG").map(PathBuf::from);
    match path.clone().or(from_env) {
        Some(p) => Config::from_file(p),
        None => Ok(Config::default()),
    }
}

fn threads_from(cli: &Option<usize>) -> Option<usize> {
    cli.or_else(|| {
        std::env::var("OSNRSIM_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn sign_fmt(x: f64) -> String {
    if x >= 0.0 {
        format!("+{x:.2}")
    } else {
        format!("{x:.2}")
    }
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    let usage = |e: Error| (2u8, e.to_string());
    let config = load_config(&cli.config).map_err(usage)?;
    let threads = threads_from(&cli.threads);
    match cli.command {
        Command::Generate {
            seed,
            count,
            out,
            frames_dir,
        } => {
            let summary =
                pipeline::generate_dataset(&config, seed, count, &out, threads, frames_dir.as_deref())
                    .map_err(usage)?;
            println!(
                "generated {} records ({} reused, {} computed, {} failed) -> {}",
                summary.requested - summary.failed as u64,
                summary.reused,
                summary.computed,
                summary.failed,
                summary.out_path.display()
            );
            if summary.failure_rate_exceeded() {
                return Err((
                    3,
                    format!(
                        "{} of {} scenarios failed (threshold 5%)",
                        summary.failed, summary.requested
                    ),
                ));
            }
            Ok(())
        }
        Command::Train { dataset, seed, out } => {
            let summary = pipeline::run_train(&dataset, &config, seed, &out).map_err(usage)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "trained on {} records, tested on {} (best epoch {}, {} run)",
                summary.n_train, summary.n_test, summary.best_epoch, summary.epochs_run
            );
            println!(
                "test-set SNR_NL accuracy: ({} ± {:.2}) dB  [offset={} sigma={:.4}]",
                sign_fmt(summary.offset_db),
                summary.sigma_db,
                sign_fmt(summary.offset_db),
                summary.sigma_db
            );
            println!(
                "model -> {}\nhistory -> {}\nsplit -> {}",
                summary.model_path.display(),
                summary.history_path.display(),
                summary.split_path.display()
            );
            Ok(())
        }
        Command::Eval {
            dataset,
            model,
            out,
            svg,
        } => {
            let weights = match &model {
                Some(p) => Some(osnrsim::nn::load(p).map_err(usage)?),
                None => None,
            };
            let report =
                pipeline::run_eval(&dataset, weights.as_ref(), &config, Some(&out)).map_err(usage)?;
            if let Some(svg_path) = svg {
                pipeline::write_report_svg(&report, &svg_path).map_err(usage)?;
            }
            let o = &report.overall;
            println!(
                "OSNR accuracy over {} records ({} valid, invalid rate {:.1}%):",
                o.count,
                o.valid_count,
                100.0 * o.invalid_rate
            );
            println!(
                "  OSNR:   ({} ± {:.2}) dB",
                sign_fmt(o.osnr_offset_db),
                o.osnr_sigma_db
            );
            println!(
                "  SNR_NL: ({} ± {:.2}) dB",
                sign_fmt(o.nl_offset_db),
                o.nl_sigma_db
            );
            for m in &report.per_mode {
                println!(
                    "  [{}] ({} ± {:.2}) dB over {} records",
                    m.mode,
                    sign_fmt(m.osnr_offset_db),
                    m.osnr_sigma_db,
                    m.count
                );
            }
            println!("report -> {}", out.display());
            Ok(())
        }
        Command::Estimate {
            frame,
            model,
            meta,
            ec,
            snr_imp_db,
        } => {
            let weights = osnrsim::nn::load(&model).map_err(usage)?;
            let cal = CalibrationFactors {
                eye_closure: ec,
                snr_imp: snr_imp_db
                    .map(SnrValue::from_db)
                    .unwrap_or_else(SnrValue::infinite),
            };
            let link = LinkMetadata {
                length_km: meta.length_km,
                cumulative_dispersion_ps_nm: meta.cum_dispersion_ps_nm,
                baud_hz: meta.baud_gbd * 1e9,
                mode: meta.mode,
            };
            let est =
                pipeline::run_estimate(&frame, &link, &cal, &weights, &config).map_err(usage)?;
            println!("{}", serde_json::to_string_pretty(&est).expect("serializes"));
            Ok(())
        }
        Command::Report { report, svg } => {
            let text = std::fs::read_to_string(&report)
                .map_err(|e| (2, format!("{}: {e}", report.display())))?;
            let parsed = parse_report_csv(&text).map_err(usage)?;
            pipeline::write_report_svg(&parsed, &svg).map_err(usage)?;
            let o = &parsed.overall;
            println!(
                "({} ± {:.2}) dB over {} records, invalid rate {:.1}% -> {}",
                sign_fmt(o.osnr_offset_db),
                o.osnr_sigma_db,
                o.count,
                100.0 * o.invalid_rate,
                svg.display()
            );
            Ok(())
        }
    }
}

/// Reads back the `metric,key,value` CSV written by `eval`.
fn parse_report_csv(text: &str) -> Result<pipeline::EvalReport, Error> {
    let mut fields: std::collections::BTreeMap<(String, String), f64> =
        std::collections::BTreeMap::new();
    let mut ccdf_osnr = Vec::new();
    let mut ccdf_nl = Vec::new();
    for line in text.lines().skip(1) {
        let parts: Vec<&str> = line.splitn(3, ',').collect();
        if parts.len() != 3 {
            continue;
        }
        let value: f64 = parts[2]
            .parse()
            .map_err(|_| Error::data(format!("bad report value in '{line}'")))?;
        match parts[0] {
            "ccdf_osnr" => ccdf_osnr.push((parts[1].parse().unwrap_or(0.0), value)),
            "ccdf_nl" => ccdf_nl.push((parts[1].parse().unwrap_or(0.0), value)),
            metric => {
                fields.insert((metric.to_string(), parts[1].to_string()), value);
            }
        }
    }
    let get = |metric: &str| -> Result<f64, Error> {
        fields
            .get(&(metric.to_string(), "all".to_string()))
            .copied()
            .ok_or_else(|| Error::data(format!("report is missing '{metric},all'")))
    };
    if ccdf_osnr.is_empty() {
        return Err(Error::data("report has no CCDF rows".to_string()));
    }
    Ok(pipeline::EvalReport {
        overall: pipeline::ModeStats {
            mode: "all".to_string(),
            count: get("count")? as usize,
            valid_count: get("valid_count")? as usize,
            invalid_rate: get("invalid_rate")?,
            osnr_offset_db: get("osnr_offset_db")?,
            osnr_sigma_db: get("osnr_sigma_db")?,
            nl_offset_db: get("nl_offset_db")?,
            nl_sigma_db: get("nl_sigma_db")?,
        },
        per_mode: Vec::new(),
        ccdf_osnr,
        ccdf_nl,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path too
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
