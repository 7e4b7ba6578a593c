//! Back-to-back receiver self-test: AWGN loaded at known SNRs must
//! come back out of the full DSP chain as the measured ESNR.
//!
//! Run with: cargo run --release --example receiver_chain

use osnrsim::emulator::{apply_emulator, build_emulator};
use osnrsim::metrics::{Constellation, ModulationFormat, SnrValue};
use osnrsim::rxdsp::{process_capture, DspConfig};
use osnrsim::txmodel::{shape_waveform, TxChannel};

fn main() {
    println!("back-to-back: shape -> ASE load -> EDC/MF/MIMO/CPR -> decide\n");
    for format in [
        ModulationFormat::Qpsk,
        ModulationFormat::Qam8,
        ModulationFormat::Qam16,
    ] {
        let cst = Constellation::new(format);
        let ch = TxChannel::new(5, 1 << 15, cst.clone(), 56e9, 0.0, 1e-3).unwrap();
        let wave = shape_waveform(&ch, 2, 0.1).unwrap();
        println!("{}:", format.name());
        for target in [10.0, 15.0, 20.0] {
            let chain = build_emulator(100 + target as u64, 1, 0.0, 0.0).unwrap();
            let noisy =
                apply_emulator(&wave, &chain, SnrValue::from_db(target), 1, 56e9, 7).unwrap();
            let frame = process_capture(
                &noisy,
                &ch.symbols_x,
                &ch.symbols_y,
                0.0,
                56e9,
                &cst,
                &DspConfig::default(),
            )
            .unwrap();
            println!(
                "  injected {target:>5.1} dB -> ESNR {:>7.3} dB (BER {:.3e}{})",
                frame.esnr.db(),
                frame.ber,
                if frame.esnr_from_variance {
                    ", error-free frame: variance path"
                } else {
                    ""
                }
            );
        }
    }
}
