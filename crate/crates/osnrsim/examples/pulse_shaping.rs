//! Transmitter model: root-raised-cosine shaping, matched-filter
//! loopback and WDM multiplexing.
//!
//! Run with: cargo run --release --example pulse_shaping

use osnrsim::field;
use osnrsim::metrics::{Constellation, ModulationFormat};
use osnrsim::txmodel::{
    evm_db, matched_filter_symbols, mux_wdm, shape_waveform, sim_samples_per_symbol, snap_to_grid,
    TxChannel,
};

fn main() {
    let baud = 56e9;
    let rolloff = 0.1;
    let count = 1 << 12;

    println!("== single-channel shaping ==");
    let ch = TxChannel::new(
        1,
        count,
        Constellation::new(ModulationFormat::Qpsk),
        baud,
        0.0,
        1e-3,
    )
    .unwrap();
    let wave = shape_waveform(&ch, 4, rolloff).unwrap();
    println!(
        "mean power {:.6} mW (target 1.000000), {} samples at {:.0} GS/s",
        wave.mean_power() * 1e3,
        wave.len(),
        wave.sample_rate / 1e9
    );
    let (est_x, _) = matched_filter_symbols(&wave, baud, rolloff).unwrap();
    println!(
        "matched-filter loopback EVM: {:.1} dB (zero-ISI on the periodic grid)",
        evm_db(&est_x, &ch.symbols_x)
    );

    println!("\n== 13-channel WDM mux ==");
    let n_ch = 13;
    let spacing = 62.5e9;
    let sps = sim_samples_per_symbol(n_ch, spacing, baud, rolloff);
    let fs = sps as f64 * baud;
    println!("grid: {sps} samples/symbol -> {:.0} GHz for a {:.1} GHz band", fs / 1e9, (n_ch - 1) as f64 * spacing / 1e9 + 61.6);
    let channels: Vec<TxChannel> = (0..n_ch)
        .map(|i| {
            let nominal = (i as f64 - (n_ch as f64 - 1.0) / 2.0) * spacing;
            TxChannel::new(
                10 + i as u64,
                count,
                Constellation::new(ModulationFormat::Qpsk),
                baud,
                snap_to_grid(nominal, fs, count * sps),
                1e-3,
            )
            .unwrap()
        })
        .collect();
    let muxed = mux_wdm(&channels, rolloff, fs).unwrap();
    println!(
        "total power {:.4} mW = {} x 1 mW (channels are spectrally disjoint)",
        muxed.mean_power() * 1e3,
        n_ch
    );

    // coarse spectrum sketch over the band
    let spec = field::power_spectrum(&muxed);
    let n = muxed.len();
    let band = 450e9;
    let bins = 90usize;
    let mut hist = vec![0.0f64; bins];
    for k in 0..n {
        let f = field::bin_frequency(k, n, fs);
        if f.abs() < band {
            let b = ((f + band) / (2.0 * band) * bins as f64) as usize;
            hist[b.min(bins - 1)] += spec[k];
        }
    }
    let peak = hist.iter().cloned().fold(0.0, f64::max);
    println!("\npower spectrum, −450..450 GHz:");
    for row in (0..8).rev() {
        let level = (row as f64 + 0.5) / 8.0;
        let line: String = hist
            .iter()
            .map(|&p| if p / peak > level { '#' } else { ' ' })
            .collect();
        println!("|{line}|");
    }
    println!("+{}+", "-".repeat(bins));
}
