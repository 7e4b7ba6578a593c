//! Floating-point receiver chain: electronic dispersion compensation,
//! data-aided 2×2 MIMO equalization, carrier-phase recovery, symbol
//! decisions and the derived noise field, plus the simulation-only
//! nonlinear ground truth.
//!
//! Timing is ideal (the simulation is sample-synchronous), and the
//! equalizer is solved by regularized least squares against the known
//! transmit symbols instead of running a blind adaptive loop; a
//! decision-directed noise reference is available for in-service
//! emulation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::field::{self, FieldGrid};
use crate::metrics::{self, Constellation, ModulationFormat, SnrValue};
use crate::routegen::beta2_from_dispersion;

/// Which transmit-symbol estimate the noise field Δ = rx − ref uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseReference {
    /// Known transmit symbols (simulation default).
    TransmitKnown,
    /// Hard decisions (in-service behavior).
    DecisionDirected,
}

/// Receiver configuration. Defaults mirror the product-like chain used
/// for dataset generation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DspConfig {
    /// FIR taps per equalizer branch (fractionally spaced).
    pub eq_taps: usize,
    /// Ridge regularization relative to the trace-normalized Gram matrix.
    pub eq_ridge: f64,
    /// Symbols used to solve the equalizer (clamped to the frame).
    pub eq_train_symbols: usize,
    /// Sliding window length for data-aided phase recovery, symbols.
    pub phase_window: usize,
    /// Root-raised-cosine rolloff of the receive matched filter (must
    /// match the transmitter shaping).
    pub rolloff: f64,
    pub reference: NoiseReference,
}

impl Default for DspConfig {
    fn default() -> Self {
        DspConfig {
            eq_taps: 15,
            eq_ridge: 1e-6,
            eq_train_symbols: 16384,
            phase_window: 64,
            rolloff: 0.1,
            reference: NoiseReference::TransmitKnown,
        }
    }
}

/// Receive-side root-raised-cosine matched filter at the wave's sample
/// rate (no decimation). Completes the Nyquist response ahead of the
/// short MIMO equalizer.
pub fn matched_filter(wave: &FieldGrid, baud_hz: f64, rolloff: f64) -> FieldGrid {
    let n = wave.len();
    let mut fx = wave.x.clone();
    let mut fy = wave.y.clone();
    field::fft_in_place(&mut fx);
    field::fft_in_place(&mut fy);
    for k in 0..n {
        let f = field::bin_frequency(k, n, wave.sample_rate);
        let h = crate::txmodel::rrc_response(f, baud_hz, rolloff);
        fx[k] *= h;
        fy[k] *= h;
    }
    field::ifft_in_place(&mut fx);
    field::ifft_in_place(&mut fy);
    FieldGrid::new(fx, fy, wave.sample_rate, wave.center_freq_offset)
        .expect("same shape as input")
}

/// Aligned transmit/receive symbols with the derived noise field and
/// per-frame measurements.
#[derive(Debug, Clone)]
pub struct SymbolFrame {
    pub tx_x: Vec<Complex64>,
    pub tx_y: Vec<Complex64>,
    pub rx_x: Vec<Complex64>,
    pub rx_y: Vec<Complex64>,
    /// Δ = rx − reference, per polarization.
    pub noise_x: Vec<Complex64>,
    pub noise_y: Vec<Complex64>,
    pub format: ModulationFormat,
    pub ber: f64,
    pub esnr: SnrValue,
    /// True when BER was zero and the ESNR fell back to the
    /// noise-variance estimate.
    pub esnr_from_variance: bool,
    pub reference: NoiseReference,
}

impl SymbolFrame {
    pub fn len(&self) -> usize {
        self.tx_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tx_x.is_empty()
    }
}

/// Link parameters the modem reports alongside a capture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkMetadata {
    pub length_km: f64,
    pub cumulative_dispersion_ps_nm: f64,
    pub baud_hz: f64,
    pub mode: String,
}

/// Frequency-domain all-pass removing the accumulated chromatic
/// dispersion: phase −(β₂L/2)ω², the exact inverse of the propagation
/// operator.
pub fn compensate_cd(wave: &FieldGrid, total_dispersion_ps_nm: f64, lambda_nm: f64) -> FieldGrid {
    if total_dispersion_ps_nm == 0.0 {
        return wave.clone();
    }
    // β₂·L in s²: reuse the per-km conversion with D·L in place of D.
    let b2l = beta2_from_dispersion(total_dispersion_ps_nm, lambda_nm) * 1e-24;
    let n = wave.len();
    let mut fx = wave.x.clone();
    let mut fy = wave.y.clone();
    field::fft_in_place(&mut fx);
    field::fft_in_place(&mut fy);
    for (k, w) in field::angular_frequencies(n, wave.sample_rate)
        .into_iter()
        .enumerate()
    {
        let rot = Complex64::from_polar(1.0, -0.5 * b2l * w * w);
        fx[k] *= rot;
        fy[k] *= rot;
    }
    field::ifft_in_place(&mut fx);
    field::ifft_in_place(&mut fy);
    FieldGrid::new(fx, fy, wave.sample_rate, wave.center_freq_offset)
        .expect("same shape as input")
}

/// Cholesky solve for a Hermitian positive-definite system with
/// multiple right-hand sides. `a` is row-major n×n and is destroyed.
fn cholesky_solve(n: usize, a: &mut [Complex64], rhs: &mut [Vec<Complex64>]) -> Result<()> {
    // in-place LL^H factorization
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::domain(
                "equalizer normal equations are singular (degenerate input)".to_string(),
            ));
        }
        let d = d.sqrt();
        a[j * n + j] = Complex64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / d;
        }
    }
    for b in rhs.iter_mut() {
        // forward: L z = b
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= a[i * n + k] * b[k];
            }
            b[i] = s / a[i * n + i].re;
        }
        // backward: L^H x = z
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= a[k * n + i].conj() * b[k];
            }
            b[i] = s / a[i * n + i].re;
        }
    }
    Ok(())
}

/// Data-aided fractionally-spaced 2×2 MIMO equalizer. Solves one
/// regularized least-squares fit per output polarization against the
/// transmit reference over a training prefix, then filters the whole
/// frame. Input must be at an integer number of samples per symbol
/// (≥ 2); output is symbol spaced. Indexing is circular, matching the
/// periodic construction of the simulated waveforms.
pub fn equalize(
    wave: &FieldGrid,
    tx_x: &[Complex64],
    tx_y: &[Complex64],
    baud_hz: f64,
    cfg: &DspConfig,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let sps_f = wave.sample_rate / baud_hz;
    if (sps_f - sps_f.round()).abs() > 1e-9 || sps_f < 2.0 - 1e-9 {
        return Err(Error::domain(format!(
            "equalizer needs an integer >= 2 samples/symbol, got {sps_f}"
        )));
    }
    let sps = sps_f.round() as usize;
    let n_sym = tx_x.len();
    if tx_y.len() != n_sym || n_sym * sps != wave.len() {
        return Err(Error::domain(format!(
            "reference length {} x {sps} samples/symbol does not match wave length {}",
            n_sym,
            wave.len()
        )));
    }
    let taps = cfg.eq_taps;
    let dim = 2 * taps;
    let center = (taps / 2) as i64;
    let n_samp = wave.len() as i64;
    let train = cfg.eq_train_symbols.clamp(1, n_sym);

    // regressor u(n): taps of x then taps of y around sample sps·n
    let mut u = vec![Complex64::ZERO; dim];
    let fill_u = |n: usize, u: &mut [Complex64]| {
        let base = (n * sps) as i64;
        for t in 0..taps {
            let idx = (base + t as i64 - center).rem_euclid(n_samp) as usize;
            u[t] = wave.x[idx];
            u[taps + t] = wave.y[idx];
        }
    };

    // normal equations A w = b with A = Σ conj(u)·uᵀ (Hermitian PD)
    let mut a = vec![Complex64::ZERO; dim * dim];
    let mut bx = vec![Complex64::ZERO; dim];
    let mut by = vec![Complex64::ZERO; dim];
    let stride = (n_sym / train).max(1);
    for s in 0..train {
        let n = s * stride;
        fill_u(n, &mut u);
        for i in 0..dim {
            let ui = u[i].conj();
            for j in i..dim {
                a[i * dim + j] += ui * u[j];
            }
            bx[i] += ui * tx_x[n];
            by[i] += ui * tx_y[n];
        }
    }
    for i in 0..dim {
        for j in 0..i {
            a[i * dim + j] = a[j * dim + i].conj();
        }
    }
    let trace: f64 = (0..dim).map(|i| a[i * dim + i].re).sum();
    let ridge = cfg.eq_ridge * trace / dim as f64;
    for i in 0..dim {
        a[i * dim + i] += Complex64::new(ridge, 0.0);
    }
    let mut rhs = vec![bx, by];
    cholesky_solve(dim, &mut a, &mut rhs)?;
    let wy = rhs.pop().expect("two rhs");
    let wx = rhs.pop().expect("two rhs");

    let mut out_x = Vec::with_capacity(n_sym);
    let mut out_y = Vec::with_capacity(n_sym);
    for n in 0..n_sym {
        fill_u(n, &mut u);
        let mut ex = Complex64::ZERO;
        let mut ey = Complex64::ZERO;
        for i in 0..dim {
            ex += u[i] * wx[i];
            ey += u[i] * wy[i];
        }
        out_x.push(ex);
        out_y.push(ey);
    }
    Ok((out_x, out_y))
}

/// Sliding-window data-aided phase recovery: θ(n) = arg Σ_w rx·conj(ref)
/// over a centered window, applied as rx·e^{−iθ(n)}. Circular at the
/// frame edges.
pub fn recover_phase(
    rx: &[Complex64],
    tx_ref: &[Complex64],
    window: usize,
) -> Result<Vec<Complex64>> {
    let n = rx.len();
    if tx_ref.len() != n || n == 0 {
        return Err(Error::domain("rx/reference length mismatch".to_string()));
    }
    let w = window.clamp(1, n);
    let c: Vec<Complex64> = rx.iter().zip(tx_ref).map(|(r, t)| r * t.conj()).collect();
    let half = (w / 2) as i64;
    let mut sum = Complex64::ZERO;
    for k in -half..(w as i64 - half) {
        sum += c[k.rem_euclid(n as i64) as usize];
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if sum.norm_sqr() == 0.0 {
            return Err(Error::domain(format!(
                "zero-energy phase window at symbol {i}"
            )));
        }
        let theta = sum.arg();
        out.push(rx[i] * Complex64::from_polar(1.0, -theta));
        // slide the window one symbol to the right
        let drop = (i as i64 - half).rem_euclid(n as i64) as usize;
        let add = (i as i64 + w as i64 - half).rem_euclid(n as i64) as usize;
        sum += c[add] - c[drop];
    }
    Ok(out)
}

/// Hard decisions, BER against the transmit bit labels, ESNR from the
/// inverted BER (variance fallback when the frame is error free) and
/// the noise field Δ = rx − reference.
///
/// A data-aided per-polarization gain stage (receiver AGC) scales rx
/// onto the constellation before slicing; this undoes the deliberate
/// shrinkage of the least-squares equalizer so that both the decisions
/// and the variance-based ESNR are unbiased.
pub fn decide_and_measure(
    rx_x: &[Complex64],
    rx_y: &[Complex64],
    tx_x: &[Complex64],
    tx_y: &[Complex64],
    constellation: &Constellation,
    reference: NoiseReference,
) -> Result<SymbolFrame> {
    let n = tx_x.len();
    if rx_x.len() != n || rx_y.len() != n || tx_y.len() != n || n == 0 {
        return Err(Error::domain("sequence length mismatch".to_string()));
    }
    let agc = |rx: &[Complex64], tx: &[Complex64]| -> Result<Vec<Complex64>> {
        let num: Complex64 = rx.iter().zip(tx).map(|(r, t)| r * t.conj()).sum();
        let den: f64 = tx.iter().map(|t| t.norm_sqr()).sum();
        let a = num / den;
        if a.norm_sqr() == 0.0 || !a.is_finite() {
            return Err(Error::domain("AGC gain fit degenerate".to_string()));
        }
        Ok(rx.iter().map(|r| r / a).collect())
    };
    let rx_x = agc(rx_x, tx_x)?;
    let rx_y = agc(rx_y, tx_y)?;
    let (rx_x, rx_y) = (&rx_x[..], &rx_y[..]);
    let bits = constellation.bits_per_symbol() as u64;
    let mut bit_errors = 0u64;
    let mut noise_x = Vec::with_capacity(n);
    let mut noise_y = Vec::with_capacity(n);
    {
        let mut count_errs = |rx: &[Complex64], tx: &[Complex64], noise: &mut Vec<Complex64>| {
            for (r, t) in rx.iter().zip(tx) {
                let dec = constellation.decide(*r);
                let sent = constellation.decide(*t);
                bit_errors +=
                    (constellation.labels[dec] ^ constellation.labels[sent]).count_ones() as u64;
                let reference_point = match reference {
                    NoiseReference::TransmitKnown => *t,
                    NoiseReference::DecisionDirected => constellation.points[dec],
                };
                noise.push(r - reference_point);
            }
        };
        count_errs(rx_x, tx_x, &mut noise_x);
        count_errs(rx_y, tx_y, &mut noise_y);
    }

    let total_bits = 2 * n as u64 * bits;
    let ber = bit_errors as f64 / total_bits as f64;
    let (esnr, esnr_from_variance) = if bit_errors > 0 {
        (metrics::esnr_from_ber(ber, constellation)?, false)
    } else {
        let sig: f64 = tx_x
            .iter()
            .chain(tx_y.iter())
            .map(|v| v.norm_sqr())
            .sum::<f64>();
        let noise: f64 = noise_x
            .iter()
            .chain(noise_y.iter())
            .map(|v| v.norm_sqr())
            .sum::<f64>();
        let snr = if noise > 0.0 { sig / noise } else { f64::INFINITY };
        (
            SnrValue::from_linear(snr).unwrap_or_else(|_| SnrValue::infinite()),
            true,
        )
    };
    Ok(SymbolFrame {
        tx_x: tx_x.to_vec(),
        tx_y: tx_y.to_vec(),
        rx_x: rx_x.to_vec(),
        rx_y: rx_y.to_vec(),
        noise_x,
        noise_y,
        format: constellation.format,
        ber,
        esnr,
        esnr_from_variance,
        reference,
    })
}

/// Runs the full receive chain on an extracted baseband channel:
/// dispersion compensation, equalization, phase recovery, decisions.
/// `tx_x`/`tx_y` are the aligned transmit symbols (tiled if the wave
/// was patterned).
pub fn process_capture(
    wave: &FieldGrid,
    tx_x: &[Complex64],
    tx_y: &[Complex64],
    cumulative_dispersion_ps_nm: f64,
    baud_hz: f64,
    constellation: &Constellation,
    cfg: &DspConfig,
) -> Result<SymbolFrame> {
    let compensated = compensate_cd(
        wave,
        cumulative_dispersion_ps_nm,
        crate::phys::REFERENCE_WAVELENGTH_NM,
    );
    let filtered = matched_filter(&compensated, baud_hz, cfg.rolloff);
    let (eq_x, eq_y) = equalize(&filtered, tx_x, tx_y, baud_hz, cfg)?;
    let rx_x = recover_phase(&eq_x, tx_x, cfg.phase_window)?;
    let rx_y = recover_phase(&eq_y, tx_y, cfg.phase_window)?;
    decide_and_measure(&rx_x, &rx_y, tx_x, tx_y, constellation, cfg.reference)
}

/// Simulation-only nonlinear SNR ground truth: the full Manakov output
/// and its γ=0 twin pass the identical noiseless DSP chain; the
/// nonlinear noise field is the difference of the recovered symbols.
pub fn ground_truth_snr_nl(
    wave_nonlinear: &FieldGrid,
    wave_linear: &FieldGrid,
    tx_x: &[Complex64],
    tx_y: &[Complex64],
    cumulative_dispersion_ps_nm: f64,
    baud_hz: f64,
    constellation: &Constellation,
    cfg: &DspConfig,
) -> Result<SnrValue> {
    let mut clean_cfg = *cfg;
    clean_cfg.reference = NoiseReference::TransmitKnown;
    let nl = process_capture(
        wave_nonlinear,
        tx_x,
        tx_y,
        cumulative_dispersion_ps_nm,
        baud_hz,
        constellation,
        &clean_cfg,
    )?;
    let lin = process_capture(
        wave_linear,
        tx_x,
        tx_y,
        cumulative_dispersion_ps_nm,
        baud_hz,
        constellation,
        &clean_cfg,
    )?;
    let sig: f64 = tx_x
        .iter()
        .chain(tx_y.iter())
        .map(|v| v.norm_sqr())
        .sum::<f64>();
    let nl_noise: f64 = nl
        .rx_x
        .iter()
        .zip(&lin.rx_x)
        .chain(nl.rx_y.iter().zip(&lin.rx_y))
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>();
    if nl_noise <= 0.0 {
        return Ok(SnrValue::infinite());
    }
    SnrValue::from_linear(sig / nl_noise)
}

const FRAME_MAGIC: &[u8; 4] = b"SYMF";
const FRAME_VERSION: u16 = 1;

fn format_code(f: ModulationFormat) -> u8 {
    match f {
        ModulationFormat::Qpsk => 0,
        ModulationFormat::Qam8 => 1,
        ModulationFormat::Qam16 => 2,
    }
}

fn format_from_code(c: u8) -> Result<ModulationFormat> {
    match c {
        0 => Ok(ModulationFormat::Qpsk),
        1 => Ok(ModulationFormat::Qam8),
        2 => Ok(ModulationFormat::Qam16),
        other => Err(Error::data(format!("unknown constellation code {other}"))),
    }
}

/// Writes a capture as the documented binary layout: magic `SYMF`,
/// u16 version, u8 constellation code, u8 reserved, u32 symbol count,
/// then tx_x, tx_y, rx_x, rx_y as interleaved little-endian f32 pairs.
pub fn write_frame(frame: &SymbolFrame, mut w: impl Write) -> Result<()> {
    w.write_all(FRAME_MAGIC)?;
    w.write_all(&FRAME_VERSION.to_le_bytes())?;
    w.write_all(&[format_code(frame.format), 0])?;
    w.write_all(&(frame.len() as u32).to_le_bytes())?;
    for seq in [&frame.tx_x, &frame.tx_y, &frame.rx_x, &frame.rx_y] {
        for v in seq.iter() {
            w.write_all(&(v.re as f32).to_le_bytes())?;
            w.write_all(&(v.im as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a capture written by [`write_frame`] and re-derives the noise
/// field and measurements with [`decide_and_measure`].
pub fn read_frame(mut r: impl Read, reference: NoiseReference) -> Result<SymbolFrame> {
    let mut head = [0u8; 12];
    r.read_exact(&mut head)
        .map_err(|e| Error::data(format!("frame header: {e}")))?;
    if &head[0..4] != FRAME_MAGIC {
        return Err(Error::data("not a symbol-frame file".to_string()));
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != FRAME_VERSION {
        return Err(Error::data(format!("unsupported frame version {version}")));
    }
    let format = format_from_code(head[6])?;
    let n = u32::from_le_bytes([head[8], head[9], head[10], head[11]]) as usize;
    if n == 0 {
        return Err(Error::data("empty frame".to_string()));
    }
    let mut read_seq = |out: &mut Vec<Complex64>| -> Result<()> {
        let mut buf = vec![0u8; 8 * n];
        r.read_exact(&mut buf)
            .map_err(|e| Error::data(format!("truncated frame payload: {e}")))?;
        for c in buf.chunks_exact(8) {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64;
            out.push(Complex64::new(re, im));
        }
        Ok(())
    };
    let mut tx_x = Vec::with_capacity(n);
    let mut tx_y = Vec::with_capacity(n);
    let mut rx_x = Vec::with_capacity(n);
    let mut rx_y = Vec::with_capacity(n);
    read_seq(&mut tx_x)?;
    read_seq(&mut tx_y)?;
    read_seq(&mut rx_x)?;
    read_seq(&mut rx_y)?;
    decide_and_measure(
        &rx_x,
        &rx_y,
        &tx_x,
        &tx_y,
        &Constellation::new(format),
        reference,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routegen::{default_catalog, FiberKind, Span};
    use crate::ssfprop::{self, SsfConfig};
    use crate::txmodel::{self, TxChannel};
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn qpsk() -> Constellation {
        Constellation::new(ModulationFormat::Qpsk)
    }

    fn tx_and_wave(seed: u64, count: usize, sps: usize) -> (TxChannel, FieldGrid) {
        let ch = TxChannel::new(seed, count, qpsk(), 56e9, 0.0, 1e-3).unwrap();
        let wave = txmodel::shape_waveform(&ch, sps, 0.1).unwrap();
        (ch, wave)
    }

    fn add_awgn(symbols: &mut [Complex64], snr_db: f64, rng: &mut impl Rng) {
        let sigma = (0.5 * 10f64.powf(-snr_db / 10.0)).sqrt();
        let n = Normal::new(0.0, sigma).unwrap();
        for s in symbols.iter_mut() {
            *s += Complex64::new(n.sample(rng), n.sample(rng));
        }
    }

    #[test]
    fn cd_compensation_inverts_linear_propagation() {
        let (_, wave) = tx_and_wave(1, 1 << 10, 4);
        let ndsf = default_catalog()[FiberKind::NDSF.index()];
        let span = Span::new(ndsf, 120.0, 5.0).unwrap();
        let mut propagated =
            ssfprop::propagate_span(&wave, &span, &SsfConfig::default(), false).unwrap();
        // undo the span loss so only the phase remains
        let g = 10f64.powf(span.amp_gain_db / 20.0);
        for v in propagated.x.iter_mut().chain(propagated.y.iter_mut()) {
            *v *= g;
        }
        let restored = compensate_cd(&propagated, 17.0 * 120.0, 1550.0);
        let err: f64 = restored
            .x
            .iter()
            .zip(&wave.x)
            .chain(restored.y.iter().zip(&wave.y))
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let rel_db = 10.0 * (err / wave.energy()).log10();
        assert!(rel_db < -50.0, "CD round trip residual {rel_db:.1} dB");
        // identity and all-pass checks
        let same = compensate_cd(&wave, 0.0, 1550.0);
        assert_eq!(same.x, wave.x);
        let rel = (restored.energy() - propagated.energy()).abs() / propagated.energy();
        assert!(rel < 1e-9);
    }

    #[test]
    fn equalizer_passthrough_and_rotation() {
        let (ch, wave) = tx_and_wave(2, 1 << 10, 2);
        let cfg = DspConfig::default();
        let (ex, ey) = equalize(&wave, &ch.symbols_x, &ch.symbols_y, 56e9, &cfg).unwrap();
        assert!(txmodel::evm_db(&ex, &ch.symbols_x) < -35.0);
        assert!(txmodel::evm_db(&ey, &ch.symbols_y) < -35.0);

        // 90° polarization rotation: x' = y, y' = -x
        let rotated = FieldGrid::new(
            wave.y.clone(),
            wave.x.iter().map(|v| -v).collect(),
            wave.sample_rate,
            0.0,
        )
        .unwrap();
        let (rx, ry) = equalize(&rotated, &ch.symbols_x, &ch.symbols_y, 56e9, &cfg).unwrap();
        assert!(txmodel::evm_db(&rx, &ch.symbols_x) < -35.0);
        assert!(txmodel::evm_db(&ry, &ch.symbols_y) < -35.0);
    }

    #[test]
    fn equalizer_recovers_quarter_symbol_dgd() {
        let (ch, wave) = tx_and_wave(3, 1 << 11, 2);
        // apply DGD = 0.25 symbol periods via the emulator machinery
        let tau = 0.25 / 56e9;
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let seg = crate::emulator::EmulatorSegment {
            rotation: crate::emulator::Jones::IDENTITY,
            dgd_s: tau,
            // 45° basis so both polarizations see the split delay
            dgd_basis: crate::emulator::Jones([[s, s], [-s, s]]),
            pdl_db: 0.0,
            pdl_basis: crate::emulator::Jones::IDENTITY,
        };
        let chain = crate::emulator::EmulatorChain {
            segments: vec![seg],
            total_dgd_ps: tau * 1e12,
            total_pdl_db: 0.0,
            seed: 0,
        };
        let impaired =
            crate::emulator::apply_emulator(&wave, &chain, SnrValue::infinite(), 1, 56e9, 0)
                .unwrap();
        let cfg = DspConfig::default();
        let (ex, ey) = equalize(&impaired, &ch.symbols_x, &ch.symbols_y, 56e9, &cfg).unwrap();
        let evm_x = txmodel::evm_db(&ex, &ch.symbols_x);
        let evm_y = txmodel::evm_db(&ey, &ch.symbols_y);
        assert!(evm_x < -30.0 && evm_y < -30.0, "EVM {evm_x:.1}/{evm_y:.1}");
        // sanity: without equalization the DGD hurts
        let (mx, _) = txmodel::matched_filter_symbols(&impaired, 56e9, 0.1).unwrap();
        assert!(txmodel::evm_db(&mx, &ch.symbols_x) > -25.0);
    }

    #[test]
    fn equalizer_rejects_degenerate_input() {
        let n = 1 << 8;
        let wave = FieldGrid::zeros(n * 2, 2.0 * 56e9).unwrap();
        let tx = vec![Complex64::new(1.0, 0.0); n];
        let cfg = DspConfig {
            eq_ridge: 0.0,
            ..DspConfig::default()
        };
        assert!(equalize(&wave, &tx, &tx, 56e9, &cfg).is_err());
    }

    #[test]
    fn phase_recovery_constant_and_ramp() {
        let (ch, _) = tx_and_wave(4, 1 << 12, 2);
        let phi = 0.7;
        let rx: Vec<Complex64> = ch
            .symbols_x
            .iter()
            .map(|s| s * Complex64::from_polar(1.0, phi))
            .collect();
        let fixed = recover_phase(&rx, &ch.symbols_x, 64).unwrap();
        for (f, t) in fixed.iter().zip(&ch.symbols_x) {
            assert!((f - t).norm() < 1e-6);
        }
        // identity when no offset
        let same = recover_phase(&ch.symbols_x, &ch.symbols_x, 64).unwrap();
        for (f, t) in same.iter().zip(&ch.symbols_x) {
            assert!((f - t).norm() < 1e-12);
        }
        // slow ramp: 1e-4 rad/symbol tracked to below -40 dB EVM away
        // from the circular wrap point
        let n = ch.symbols_x.len();
        let ramp: Vec<Complex64> = ch
            .symbols_x
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let centered = k as f64 - n as f64 / 2.0;
                s * Complex64::from_polar(1.0, 1e-4 * centered)
            })
            .collect();
        let tracked = recover_phase(&ramp, &ch.symbols_x, 64).unwrap();
        let err: f64 = tracked
            .iter()
            .zip(&ch.symbols_x)
            .skip(64)
            .take(n - 128)
            .map(|(f, t)| (f - t).norm_sqr())
            .sum();
        let evm = 10.0 * (err / (n - 128) as f64).log10();
        assert!(evm < -40.0, "ramp residual {evm:.1} dB");
        // zero-energy window
        let zeros = vec![Complex64::ZERO; 256];
        assert!(recover_phase(&zeros, &zeros, 64).is_err());
    }

    #[test]
    fn decide_and_measure_clean_frame() {
        let (ch, _) = tx_and_wave(5, 1 << 12, 2);
        let frame = decide_and_measure(
            &ch.symbols_x,
            &ch.symbols_y,
            &ch.symbols_x,
            &ch.symbols_y,
            &qpsk(),
            NoiseReference::TransmitKnown,
        )
        .unwrap();
        assert_eq!(frame.ber, 0.0);
        assert!(frame.esnr_from_variance);
        assert!(!frame.esnr.is_finite());
        assert!(frame.noise_x.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn awgn_ber_matches_theory_and_esnr_inverts() {
        let (ch, _) = tx_and_wave(6, 1 << 15, 2);
        let mut rng = crate::derive_rng(100, 0, 50);
        let mut rx_x = ch.symbols_x.clone();
        let mut rx_y = ch.symbols_y.clone();
        add_awgn(&mut rx_x, 10.0, &mut rng);
        add_awgn(&mut rx_y, 10.0, &mut rng);
        let frame = decide_and_measure(
            &rx_x,
            &rx_y,
            &ch.symbols_x,
            &ch.symbols_y,
            &qpsk(),
            NoiseReference::TransmitKnown,
        )
        .unwrap();
        // theory: Q(sqrt(10)) = 7.827e-4 over 2·2·32768 bits, ±3σ binomial
        let bits = (2 * 2 * (1 << 15)) as f64;
        let p = 7.82701129001e-4;
        let sigma = (p * (1.0 - p) / bits).sqrt();
        assert!(
            (frame.ber - p).abs() < 3.0 * sigma,
            "ber {} vs {p}",
            frame.ber
        );
        assert!(
            (frame.esnr.db() - 10.0).abs() < 0.15,
            "esnr {}",
            frame.esnr.db()
        );
        assert!(!frame.esnr_from_variance);

        // decision-directed Δ equals transmit-known Δ where decisions are right
        let dd = decide_and_measure(
            &rx_x,
            &rx_y,
            &ch.symbols_x,
            &ch.symbols_y,
            &qpsk(),
            NoiseReference::DecisionDirected,
        )
        .unwrap();
        // replicate the AGC so decisions match the frame's internal ones
        let num: Complex64 = rx_x
            .iter()
            .zip(&ch.symbols_x)
            .map(|(r, t)| r * t.conj())
            .sum();
        let den: f64 = ch.symbols_x.iter().map(|t| t.norm_sqr()).sum();
        let a = num / den;
        let mut agree = 0usize;
        for k in 0..frame.len() {
            let correct = qpsk().decide(rx_x[k] / a) == qpsk().decide(ch.symbols_x[k]);
            if correct {
                assert!((dd.noise_x[k] - frame.noise_x[k]).norm() < 1e-15);
                agree += 1;
            }
        }
        assert!(agree > frame.len() * 9 / 10);
    }

    #[test]
    fn back_to_back_chain_self_test() {
        // Waveform-level AWGN through the full DSP chain; ESNR ±0.1 dB.
        let (ch, wave) = tx_and_wave(7, 1 << 16, 2);
        for target_db in [10.0, 15.0, 20.0] {
            let chain =
                crate::emulator::build_emulator(40 + target_db as u64, 1, 0.0, 0.0).unwrap();
            let noisy = crate::emulator::apply_emulator(
                &wave,
                &chain,
                SnrValue::from_db(target_db),
                1,
                56e9,
                41,
            )
            .unwrap();
            let frame = process_capture(
                &noisy,
                &ch.symbols_x,
                &ch.symbols_y,
                0.0,
                56e9,
                &qpsk(),
                &DspConfig::default(),
            )
            .unwrap();
            assert!(
                (frame.esnr.db() - target_db).abs() < 0.1,
                "target {target_db}: measured {:.3} dB (variance path: {})",
                frame.esnr.db(),
                frame.esnr_from_variance
            );
        }
    }

    #[test]
    fn ground_truth_is_huge_without_nonlinearity() {
        let (ch, wave) = tx_and_wave(8, 1 << 10, 4);
        let ndsf = default_catalog()[FiberKind::NDSF.index()];
        let route = crate::routegen::Route {
            spans: vec![Span::new(ndsf, 80.0, 5.0).unwrap()],
        };
        let lin =
            ssfprop::propagate_route(&wave, &route, &[], &SsfConfig::default(), false).unwrap();
        let ext = ssfprop::extract_channel(&lin, 0.0, 56e9, 2, 62.5e9).unwrap();
        let snr = ground_truth_snr_nl(
            &ext,
            &ext,
            &ch.symbols_x,
            &ch.symbols_y,
            route.cumulative_dispersion_ps_nm(),
            56e9,
            &qpsk(),
            &DspConfig::default(),
        )
        .unwrap();
        assert!(snr.db() > 60.0, "null-case SNR_NL {:.1} dB", snr.db());
    }

    #[test]
    fn frame_file_round_trip() {
        let (ch, _) = tx_and_wave(9, 1 << 12, 2);
        let mut rng = crate::derive_rng(101, 0, 51);
        let mut rx_x = ch.symbols_x.clone();
        let mut rx_y = ch.symbols_y.clone();
        add_awgn(&mut rx_x, 12.0, &mut rng);
        add_awgn(&mut rx_y, 12.0, &mut rng);
        let frame = decide_and_measure(
            &rx_x,
            &rx_y,
            &ch.symbols_x,
            &ch.symbols_y,
            &qpsk(),
            NoiseReference::TransmitKnown,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_frame(&frame, &mut buf).unwrap();
        let loaded = read_frame(&buf[..], NoiseReference::TransmitKnown).unwrap();
        assert_eq!(loaded.len(), frame.len());
        assert_eq!(loaded.format, frame.format);
        // f32 quantization keeps BER and ESNR essentially unchanged
        assert_eq!(loaded.ber, frame.ber);
        assert!((loaded.esnr.db() - frame.esnr.db()).abs() < 1e-3);
        // corrupted header and truncated payload are data errors
        assert!(read_frame(&buf[..8], NoiseReference::TransmitKnown).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_frame(&bad[..], NoiseReference::TransmitKnown).is_err());
        let mut short = buf.clone();
        short.truncate(buf.len() - 9);
        assert!(read_frame(&short[..], NoiseReference::TransmitKnown).is_err());
    }
}
