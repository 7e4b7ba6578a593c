//! The scalar SNR algebra behind the OSNR estimate: dB conversions,
//! AWGN BER curves and their inversion, the external/ASE SNR
//! decomposition and the validity gate.
//!
//! Run with: cargo run --release --example snr_algebra

use osnrsim::estimator::{snr_ase_from_ext, snr_ext_from_esnr, validity_gate, CalibrationFactors, ValidityConfig};
use osnrsim::metrics::{
    ber_from_snr, esnr_from_ber, osnr_from_snr_ase, BandwidthPair, Constellation,
    ModulationFormat, SnrValue,
};

fn main() {
    println!("== BER curves (Gray-coded AWGN) ==");
    for format in [
        ModulationFormat::Qpsk,
        ModulationFormat::Qam8,
        ModulationFormat::Qam16,
    ] {
        let cst = Constellation::new(format);
        print!("{:>6}:", format.name());
        for snr_db in [6.0, 10.0, 14.0, 18.0] {
            print!("  {snr_db:>4.0} dB -> {:9.3e}", ber_from_snr(SnrValue::from_db(snr_db), &cst));
        }
        println!();
    }

    let qpsk = Constellation::new(ModulationFormat::Qpsk);
    let fec = esnr_from_ber(0.032, &qpsk).unwrap();
    println!("\nFEC-threshold ESNR for 3.2% pre-FEC BER (QPSK): {:.3} dB", fec.db());

    println!("\n== SNR decomposition ==");
    let esnr = SnrValue::from_db(14.0);
    let cal = CalibrationFactors {
        eye_closure: 0.95,
        snr_imp: SnrValue::from_db(28.0),
    };
    let ext = snr_ext_from_esnr(esnr, &cal).unwrap();
    println!("ESNR {:.2} dB, EC {:.2}, SNR_imp {:.1} dB -> SNR_ext {:.3} dB",
        esnr.db(), cal.eye_closure, cal.snr_imp.db(), ext.db());
    let snr_nl = SnrValue::from_db(22.0);
    let ase = snr_ase_from_ext(ext, snr_nl).unwrap();
    println!("removing SNR_NL {:.1} dB -> SNR_ASE {:.3} dB", snr_nl.db(), ase.db());

    let bw = BandwidthPair::new(56e9, 12.5e9).unwrap();
    let osnr = osnr_from_snr_ase(ase, &bw);
    println!(
        "OSNR = SNR_ASE + 10·log10(B_e/B_o) = {:.3} dB  (offset {:.3} dB for 56 GBd / 12.5 GHz)",
        osnr.db(),
        bw.osnr_offset_db()
    );

    println!("\n== validity gate ==");
    let gate = ValidityConfig::default();
    for gap in [-1.0, 3.0, 30.0] {
        let (valid, reason) = validity_gate(ext.db() + gap, ext.db(), &gate);
        println!("gap {gap:>5.1} dB -> valid={valid} ({reason:?})");
    }
}
