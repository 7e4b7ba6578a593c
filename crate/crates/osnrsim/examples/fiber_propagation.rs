//! Split-step Manakov propagation: energy conservation, the analytic
//! self-phase-modulation check, dispersion compensation round trip
//! and step-size convergence.
//!
//! Run with: cargo run --release --example fiber_propagation

use num_complex::Complex64;
use osnrsim::field::FieldGrid;
use osnrsim::metrics::{Constellation, ModulationFormat};
use osnrsim::routegen::{default_catalog, FiberKind, FiberType, Span};
use osnrsim::rxdsp::compensate_cd;
use osnrsim::ssfprop::{propagate_span, SsfConfig};
use osnrsim::txmodel::{shape_waveform, TxChannel};

fn field_diff_db(a: &FieldGrid, b: &FieldGrid) -> f64 {
    let err: f64 = a
        .x
        .iter()
        .zip(&b.x)
        .chain(a.y.iter().zip(&b.y))
        .map(|(u, v)| (u - v).norm_sqr())
        .sum();
    10.0 * (err / b.energy()).log10()
}

fn main() {
    let ndsf = default_catalog()[FiberKind::NDSF.index()];
    let ch = TxChannel::new(
        1,
        1 << 12,
        Constellation::new(ModulationFormat::Qpsk),
        56e9,
        0.0,
        5e-3,
    )
    .unwrap();
    let wave = shape_waveform(&ch, 4, 0.1).unwrap();

    println!("== lossless energy conservation ==");
    let lossless = FiberType {
        loss_db_km: 1e-12,
        ..ndsf
    };
    let span = Span::new(lossless, 80.0, 5.0).unwrap();
    let out = propagate_span(&wave, &span, &SsfConfig::default(), true).unwrap();
    println!(
        "80 km, alpha=0, full nonlinearity: relative energy drift {:.2e}",
        (out.energy() - wave.energy()).abs() / wave.energy()
    );

    println!("\n== continuous-wave self-phase modulation ==");
    let p: f64 = 2e-3;
    let mut cw = FieldGrid::zeros(1 << 10, 224e9).unwrap();
    for v in cw.x.iter_mut() {
        *v = Complex64::new(p.sqrt(), 0.0);
    }
    let span = Span::new(lossless, 80.0, 5.0).unwrap();
    let out = propagate_span(&cw, &span, &SsfConfig::default(), true).unwrap();
    let analytic = 8.0 / 9.0 * (ndsf.gamma_per_w_km / 1e3) * p * 80.0e3;
    println!(
        "phase shift: solver {:.9} rad, analytic (8/9)γPL = {:.9} rad, |Δ| = {:.1e} rad",
        out.x[0].arg(),
        analytic,
        (out.x[0].arg() - analytic).abs()
    );

    println!("\n== dispersion compensation round trip ==");
    let span = Span::new(ndsf, 120.0, 5.0).unwrap();
    let mut lin = propagate_span(&wave, &span, &SsfConfig::default(), false).unwrap();
    let g = 10f64.powf(span.amp_gain_db / 20.0);
    for v in lin.x.iter_mut().chain(lin.y.iter_mut()) {
        *v *= g;
    }
    let restored = compensate_cd(&lin, ndsf.dispersion_ps_nm_km * 120.0, 1550.0);
    println!(
        "120 km NDSF, γ=0, EDC with −(β₂L/2)ω²: residual {:.1} dB",
        field_diff_db(&restored, &wave)
    );

    println!("\n== adaptive step convergence ==");
    let span = Span::new(ndsf, 80.0, 5.0).unwrap();
    let reference = propagate_span(&wave, &span, &SsfConfig::max_phase(3.75e-4), true).unwrap();
    for cap in [6e-3, 3e-3, 1.5e-3] {
        let run = propagate_span(&wave, &span, &SsfConfig::max_phase(cap), true).unwrap();
        println!(
            "max NL phase/step {cap:>7.4} rad: deviation from fine reference {:.1} dB",
            field_diff_db(&run, &reference)
        );
    }
}
