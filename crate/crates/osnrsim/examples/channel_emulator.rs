//! The linear channel emulator: Maxwellian impairment draws, aggregate
//! DGD of the segment chain and analytic ASE calibration.
//!
//! Run with: cargo run --release --example channel_emulator

use osnrsim::emulator::{
    apply_emulator, build_emulator, measure_chain_dgd, sample_maxwellian,
};
use osnrsim::metrics::{Constellation, ModulationFormat, SnrValue};
use osnrsim::txmodel::{shape_waveform, TxChannel};

fn main() {
    println!("== Maxwellian DGD draws (mean 25 ps) ==");
    let draws: Vec<f64> = (0..50_000).map(|s| sample_maxwellian(s, 25.0)).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / draws.len() as f64;
    println!(
        "sample mean {mean:.2} ps, var/mean² = {:.4} (Maxwellian: 3π/8−1 = 0.1781)",
        var / (mean * mean)
    );

    println!("\n== 50-segment chain: drawn total vs measured aggregate DGD ==");
    for seed in 0..5 {
        let chain = build_emulator(seed, 50, 25.0, 0.0).unwrap();
        println!(
            "seed {seed}: drawn total {:>6.2} ps -> measured {:>6.2} ps",
            chain.total_dgd_ps,
            measure_chain_dgd(&chain) * 1e12
        );
    }
    let n = 2000;
    let sum: f64 = (0..n)
        .map(|s| measure_chain_dgd(&build_emulator(s, 50, 25.0, 0.0).unwrap()) * 1e12)
        .sum();
    println!("mean over {n} realizations: {:.2} ps (configured 25)", sum / n as f64);

    println!("\n== ASE loading to a target SNR ==");
    let ch = TxChannel::new(
        9,
        1 << 12,
        Constellation::new(ModulationFormat::Qpsk),
        56e9,
        0.0,
        1e-3,
    )
    .unwrap();
    let wave = shape_waveform(&ch, 2, 0.1).unwrap();
    let chain = build_emulator(11, 50, 0.0, 0.0).unwrap();
    let clean = apply_emulator(&wave, &chain, SnrValue::infinite(), 4, 56e9, 1).unwrap();
    for target_db in [12.0, 16.0, 20.0] {
        let noisy =
            apply_emulator(&wave, &chain, SnrValue::from_db(target_db), 4, 56e9, 1).unwrap();
        let p_noise: f64 = clean
            .x
            .iter()
            .zip(&noisy.x)
            .chain(clean.y.iter().zip(&noisy.y))
            .map(|(c, m)| (m - c).norm_sqr())
            .sum::<f64>()
            / clean.len() as f64;
        let snr = clean.mean_power() / (p_noise * 56e9 / wave.sample_rate);
        println!(
            "target {target_db:>5.1} dB -> delivered Es/N0 {:>7.3} dB",
            10.0 * snr.log10()
        );
    }
}
