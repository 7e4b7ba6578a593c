//! Transmitter model: per-channel symbol generation, root-raised-cosine
//! pulse shaping and WDM multiplexing onto a common field grid.
//!
//! Shaping runs in the frequency domain on the periodic grid, so the
//! matched-filter/zero-ISI property holds exactly and channels that do
//! not overlap spectrally are exactly orthogonal.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{self, FieldGrid};
use crate::metrics::Constellation;

/// One modulated WDM carrier before multiplexing.
#[derive(Debug, Clone)]
pub struct TxChannel {
    pub symbols_x: Vec<Complex64>,
    pub symbols_y: Vec<Complex64>,
    pub constellation: Constellation,
    /// Symbol rate, Hz.
    pub baud_hz: f64,
    /// Carrier offset from the WDM plan center, Hz.
    pub center_offset_hz: f64,
    /// Launch power (both polarizations combined), W.
    pub launch_power_w: f64,
    pub seed: u64,
}

impl TxChannel {
    pub fn new(
        seed: u64,
        symbol_count: usize,
        constellation: Constellation,
        baud_hz: f64,
        center_offset_hz: f64,
        launch_power_w: f64,
    ) -> Result<Self> {
        let (symbols_x, symbols_y) = gen_symbols(seed, symbol_count, &constellation)?;
        Ok(TxChannel {
            symbols_x,
            symbols_y,
            constellation,
            baud_hz,
            center_offset_hz,
            launch_power_w,
            seed,
        })
    }
}

/// Draws `count` i.i.d. uniform constellation symbols per polarization,
/// deterministically in `seed`.
pub fn gen_symbols(
    seed: u64,
    count: usize,
    constellation: &Constellation,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if count == 0 {
        return Err(Error::domain("symbol count must be >= 1".to_string()));
    }
    let mut rng = crate::derive_rng(seed, 0, crate::streams::SYMBOLS);
    let m = constellation.points.len();
    let mut draw = |n: usize| -> Vec<Complex64> {
        (0..n)
            .map(|_| constellation.points[rng.random_range(0..m)])
            .collect()
    };
    let x = draw(count);
    let y = draw(count);
    Ok((x, y))
}

/// Root-raised-cosine amplitude response at frequency `f` for symbol
/// rate `baud` and `rolloff` β ∈ [0, 1].
pub fn rrc_response(f: f64, baud: f64, rolloff: f64) -> f64 {
    let af = f.abs();
    let flat_edge = (1.0 - rolloff) * baud / 2.0;
    let outer_edge = (1.0 + rolloff) * baud / 2.0;
    if af <= flat_edge {
        1.0
    } else if af < outer_edge && rolloff > 0.0 {
        let arg = std::f64::consts::PI / (rolloff * baud) * (af - flat_edge);
        (0.5 * (1.0 + arg.cos())).sqrt()
    } else {
        0.0
    }
}

/// Builds the unnormalized frequency-domain spectrum of one shaped
/// polarization: the symbol DFT replicated across the grid times the
/// RRC response. `n = symbols.len() * sps` bins.
fn shaped_spectrum(
    symbols: &[Complex64],
    sps: usize,
    baud: f64,
    rolloff: f64,
) -> Vec<Complex64> {
    let count = symbols.len();
    let n = count * sps;
    let fs = baud * sps as f64;
    let mut sym_fft = symbols.to_vec();
    field::fft_in_place(&mut sym_fft);
    let mut spec = vec![Complex64::ZERO; n];
    for (k, s) in spec.iter_mut().enumerate() {
        let f = field::bin_frequency(k, n, fs);
        let h = rrc_response(f, baud, rolloff);
        if h != 0.0 {
            *s = sym_fft[k % count] * h;
        }
    }
    spec
}

/// Shapes one channel to a baseband waveform at `samples_per_symbol`
/// with root-raised-cosine rolloff. The output mean power equals the
/// channel launch power.
pub fn shape_waveform(
    ch: &TxChannel,
    samples_per_symbol: usize,
    rolloff: f64,
) -> Result<FieldGrid> {
    if samples_per_symbol < 2 {
        return Err(Error::domain(
            "samples_per_symbol must be >= 2".to_string(),
        ));
    }
    if !(0.0..=1.0).contains(&rolloff) {
        return Err(Error::domain(format!("rolloff {rolloff} outside [0, 1]")));
    }
    let n = ch.symbols_x.len() * samples_per_symbol;
    if !n.is_power_of_two() {
        return Err(Error::domain(format!(
            "grid length {n} is not a power of two"
        )));
    }
    let mut sx = shaped_spectrum(&ch.symbols_x, samples_per_symbol, ch.baud_hz, rolloff);
    let mut sy = shaped_spectrum(&ch.symbols_y, samples_per_symbol, ch.baud_hz, rolloff);
    normalize_power(&mut sx, &mut sy, n, ch.launch_power_w);
    field::ifft_in_place(&mut sx);
    field::ifft_in_place(&mut sy);
    FieldGrid::new(sx, sy, ch.baud_hz * samples_per_symbol as f64, 0.0)
}

/// Scales both polarization spectra jointly so the time-domain mean
/// power (Parseval) equals `power_w`.
fn normalize_power(sx: &mut [Complex64], sy: &mut [Complex64], n: usize, power_w: f64) {
    let nf = n as f64;
    let total: f64 = sx
        .iter()
        .chain(sy.iter())
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        / (nf * nf);
    let g = (power_w / total).sqrt();
    for v in sx.iter_mut().chain(sy.iter_mut()) {
        *v *= g;
    }
}

/// Snaps a frequency to the nearest FFT bin of an `n`-point grid.
pub fn snap_to_grid(freq_hz: f64, sample_rate: f64, n: usize) -> f64 {
    let df = sample_rate / n as f64;
    (freq_hz / df).round() * df
}

/// Multiplexes channels onto one grid at `sim_sample_rate`. Channel
/// offsets must fall on FFT bins (snap them with [`snap_to_grid`]);
/// the band must fit inside Nyquist.
pub fn mux_wdm(
    channels: &[TxChannel],
    rolloff: f64,
    sim_sample_rate: f64,
) -> Result<FieldGrid> {
    if channels.is_empty() {
        return Err(Error::domain("no channels to multiplex".to_string()));
    }
    let count = channels[0].symbols_x.len();
    let baud = channels[0].baud_hz;
    let sps = sim_sample_rate / baud;
    if (sps - sps.round()).abs() > 1e-9 || (sps.round() as usize) < 2 {
        return Err(Error::domain(format!(
            "sim sample rate must be an integer multiple (>= 2) of the baud, got ratio {sps}"
        )));
    }
    let sps = sps.round() as usize;
    let n = count * sps;
    if !n.is_power_of_two() {
        return Err(Error::domain(format!(
            "grid length {n} is not a power of two"
        )));
    }
    let df = sim_sample_rate / n as f64;
    let mut acc_x = vec![Complex64::ZERO; n];
    let mut acc_y = vec![Complex64::ZERO; n];
    for ch in channels {
        if ch.symbols_x.len() != count || ch.baud_hz != baud {
            return Err(Error::domain(
                "channels must share symbol count and baud".to_string(),
            ));
        }
        let edge = ch.center_offset_hz.abs() + (1.0 + rolloff) * baud / 2.0;
        if edge > sim_sample_rate / 2.0 {
            return Err(Error::domain(format!(
                "channel at {:.3} GHz exceeds Nyquist ({:.3} GHz)",
                ch.center_offset_hz / 1e9,
                sim_sample_rate / 2e9
            )));
        }
        let bins = ch.center_offset_hz / df;
        if (bins - bins.round()).abs() > 1e-6 {
            return Err(Error::domain(format!(
                "channel offset {:.6} GHz is not on the frequency grid (bin spacing {:.6} MHz)",
                ch.center_offset_hz / 1e9,
                df / 1e6
            )));
        }
        let shift = bins.round() as i64;
        let mut sx = shaped_spectrum(&ch.symbols_x, sps, baud, rolloff);
        let mut sy = shaped_spectrum(&ch.symbols_y, sps, baud, rolloff);
        normalize_power(&mut sx, &mut sy, n, ch.launch_power_w);
        for k in 0..n {
            let src = (k as i64 - shift).rem_euclid(n as i64) as usize;
            acc_x[k] += sx[src];
            acc_y[k] += sy[src];
        }
    }
    field::ifft_in_place(&mut acc_x);
    field::ifft_in_place(&mut acc_y);
    FieldGrid::new(acc_x, acc_y, sim_sample_rate, 0.0)
}

/// Smallest power-of-two samples-per-symbol whose rate covers the WDM
/// band plus shaping skirts and one baud of nonlinear-broadening guard.
pub fn sim_samples_per_symbol(
    n_channels: usize,
    spacing_hz: f64,
    baud_hz: f64,
    rolloff: f64,
) -> usize {
    let band = (n_channels.saturating_sub(1)) as f64 * spacing_hz
        + (1.0 + rolloff) * baud_hz
        + baud_hz;
    let mut sps = 4usize;
    while (sps as f64) * baud_hz < band {
        sps *= 2;
    }
    sps
}

/// Matched-filter demodulation of a baseband channel back to
/// symbol-spaced estimates (RRC matched filter + decimation). Used by
/// loopback tests and the emulator noise-calibration oracle.
pub fn matched_filter_symbols(
    wave: &FieldGrid,
    baud: f64,
    rolloff: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let sps = wave.sample_rate / baud;
    if (sps - sps.round()).abs() > 1e-9 || sps < 1.0 {
        return Err(Error::domain(
            "sample rate must be an integer multiple of baud".to_string(),
        ));
    }
    let sps = sps.round() as usize;
    let n = wave.len();
    let mut fx = wave.x.clone();
    let mut fy = wave.y.clone();
    field::fft_in_place(&mut fx);
    field::fft_in_place(&mut fy);
    for k in 0..n {
        let f = field::bin_frequency(k, n, wave.sample_rate);
        let h = rrc_response(f, baud, rolloff);
        fx[k] *= h;
        fy[k] *= h;
    }
    field::ifft_in_place(&mut fx);
    field::ifft_in_place(&mut fy);
    let take = |v: &[Complex64]| -> Vec<Complex64> { v.iter().step_by(sps).copied().collect() };
    Ok((take(&fx), take(&fy)))
}

/// Error vector magnitude (dB) between`est` and `reference` after a
/// single complex least-squares gain fit.
pub fn evm_db(est: &[Complex64], reference: &[Complex64]) -> f64 {
    assert_eq!(est.len(), reference.len());
    let num: Complex64 = est
        .iter()
        .zip(reference)
        .map(|(e, r)| e * r.conj())
        .sum();
    let den: f64 = reference.iter().map(|r| r.norm_sqr()).sum();
    let a = num / den;
    let err: f64 = est
        .iter()
        .zip(reference)
        .map(|(e, r)| (e - a * r).norm_sqr())
        .sum();
    10.0 * (err / (a.norm_sqr() * den)).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ModulationFormat;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn qpsk() -> Constellation {
        Constellation::new(ModulationFormat::Qpsk)
    }

    #[test]
    fn symbols_deterministic_and_unit_energy() {
        let (x1, y1) = gen_symbols(5, 1 << 16, &qpsk()).unwrap();
        let (x2, y2) = gen_symbols(5, 1 << 16, &qpsk()).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(y1, y2);
        let e: f64 = x1.iter().map(|s| s.norm_sqr()).sum::<f64>() / x1.len() as f64;
        assert!((e - 1.0).abs() < 0.02);
    }

    #[test]
    fn symbol_histogram_uniform_chi_square() {
        for format in [
            ModulationFormat::Qpsk,
            ModulationFormat::Qam8,
            ModulationFormat::Qam16,
        ] {
            let cst = Constellation::new(format);
            let (x, _) = gen_symbols(11, 1 << 16, &cst).unwrap();
            let m = cst.points.len();
            let mut counts = vec![0usize; m];
            for s in &x {
                counts[cst.decide(*s)] += 1;
            }
            let expected = x.len() as f64 / m as f64;
            let stat: f64 = counts
                .iter()
                .map(|&c| (c as f64 - expected).powi(2) / expected)
                .sum();
            let chi = ChiSquared::new((m - 1) as f64).unwrap();
            let p = 1.0 - chi.cdf(stat);
            assert!(p > 0.001, "{}: chi2={stat:.2} p={p:.5}", format.name());
        }
    }

    #[test]
    fn shaped_spectrum_confined_to_rolloff_band() {
        let ch = TxChannel::new(1, 1 << 12, qpsk(), 56e9, 0.0, 1e-3).unwrap();
        let wave = shape_waveform(&ch, 8, 0.1).unwrap();
        let spec = field::power_spectrum(&wave);
        let n = wave.len();
        let edge = (1.0 + 0.1) * 56e9 / 2.0;
        let in_band_peak = spec
            .iter()
            .enumerate()
            .filter(|(k, _)| field::bin_frequency(*k, n, wave.sample_rate).abs() <= edge)
            .map(|(_, &p)| p)
            .fold(0.0f64, f64::max);
        let out_of_band: f64 = spec
            .iter()
            .enumerate()
            .filter(|(k, _)| field::bin_frequency(*k, n, wave.sample_rate).abs() > edge)
            .map(|(_, &p)| p)
            .sum();
        assert!(out_of_band < in_band_peak * 1e-4, "out of band {out_of_band}");
    }

    #[test]
    fn shaping_hits_launch_power_and_scales_linearly() {
        let ch = TxChannel::new(2, 1 << 12, qpsk(), 56e9, 0.0, 1e-3).unwrap();
        let wave = shape_waveform(&ch, 4, 0.1).unwrap();
        assert!((wave.mean_power() - 1e-3).abs() / 1e-3 < 1e-3);
        let mut ch2 = ch.clone();
        ch2.launch_power_w = 2e-3;
        let wave2 = shape_waveform(&ch2, 4, 0.1).unwrap();
        assert!((wave2.mean_power() - 2.0 * wave.mean_power()).abs() / wave2.mean_power() < 1e-12);
    }

    #[test]
    fn loopback_evm_below_minus_35_db() {
        for format in [
            ModulationFormat::Qpsk,
            ModulationFormat::Qam8,
            ModulationFormat::Qam16,
        ] {
            let cst = Constellation::new(format);
            let ch = TxChannel::new(3, 1 << 12, cst, 56e9, 0.0, 1e-3).unwrap();
            let wave = shape_waveform(&ch, 4, 0.1).unwrap();
            let (ex, ey) = matched_filter_symbols(&wave, 56e9, 0.1).unwrap();
            let evm_x = evm_db(&ex, &ch.symbols_x);
            let evm_y = evm_db(&ey, &ch.symbols_y);
            assert!(evm_x < -35.0 && evm_y < -35.0, "EVM {evm_x:.1}/{evm_y:.1} dB");
        }
    }

    #[test]
    fn rolloff_out_of_range_rejected() {
        let ch = TxChannel::new(4, 1 << 10, qpsk(), 56e9, 0.0, 1e-3).unwrap();
        assert!(shape_waveform(&ch, 4, 1.5).is_err());
        assert!(shape_waveform(&ch, 4, -0.1).is_err());
        assert!(shape_waveform(&ch, 1, 0.1).is_err());
    }

    fn make_channels(n: usize, spacing: f64, count: usize, fs: f64) -> Vec<TxChannel> {
        (0..n)
            .map(|i| {
                let nominal = (i as f64 - (n as f64 - 1.0) / 2.0) * spacing;
                let offset = snap_to_grid(nominal, fs, count * (fs / 56e9) as usize);
                TxChannel::new(100 + i as u64, count, qpsk(), 56e9, offset, 1e-3).unwrap()
            })
            .collect()
    }

    #[test]
    fn single_channel_mux_matches_baseband() {
        let count = 1 << 12;
        let fs = 4.0 * 56e9;
        let chs = make_channels(1, 62.5e9, count, fs);
        let muxed = mux_wdm(&chs, 0.1, fs).unwrap();
        let direct = shape_waveform(&chs[0], 4, 0.1).unwrap();
        let err: f64 = muxed
            .x
            .iter()
            .zip(&direct.x)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        assert!(err / direct.energy() < 1e-20);
    }

    #[test]
    fn wdm_power_additivity_and_peaks() {
        let n_ch = 13;
        let count = 1 << 10;
        let sps = sim_samples_per_symbol(n_ch, 62.5e9, 56e9, 0.1);
        assert_eq!(sps, 16);
        let fs = sps as f64 * 56e9;
        let chs = make_channels(n_ch, 62.5e9, count, fs);
        let muxed = mux_wdm(&chs, 0.1, fs).unwrap();
        let total: f64 = chs.iter().map(|c| c.launch_power_w).sum();
        assert!(
            (muxed.mean_power() - total).abs() / total < 5e-3,
            "power {} vs {}",
            muxed.mean_power(),
            total
        );
        // 13 spectral peaks at multiples of the (snapped) spacing
        let spec = field::power_spectrum(&muxed);
        let n = muxed.len();
        for ch in &chs {
            let k_center = ((ch.center_offset_hz / muxed.bin_spacing()).round() as i64)
                .rem_euclid(n as i64) as usize;
            let mean_in_channel: f64 = (0..n)
                .filter(|&k| {
                    let f = field::bin_frequency(k, n, fs) - ch.center_offset_hz;
                    f.abs() < 20e9
                })
                .map(|k| spec[k])
                .sum();
            assert!(
                spec[k_center] > 0.0 && mean_in_channel > 0.0,
                "no energy at channel {k_center}"
            );
        }
        // energy beyond the outermost channel edge is nil
        let band_edge = 6.0 * 62.5e9 + 61.6e9 / 2.0 + 1e9;
        let outside: f64 = (0..n)
            .filter(|&k| field::bin_frequency(k, n, fs).abs() > band_edge)
            .map(|k| spec[k])
            .sum();
        assert!(outside < total * 1e-9);
    }

    #[test]
    fn aliasing_and_off_grid_offsets_rejected() {
        let count = 1 << 10;
        let fs = 4.0 * 56e9;
        let mut ch = TxChannel::new(9, count, qpsk(), 56e9, 0.0, 1e-3).unwrap();
        ch.center_offset_hz = snap_to_grid(100e9, fs, count * 4);
        assert!(mux_wdm(&[ch.clone()], 0.1, fs).is_err()); // beyond Nyquist
        ch.center_offset_hz = 13.7e6; // off the bin grid
        assert!(mux_wdm(&[ch], 0.1, fs).is_err());
    }

    #[test]
    fn parseval_energy_identity() {
        let ch = TxChannel::new(6, 1 << 10, qpsk(), 56e9, 0.0, 2e-3).unwrap();
        let wave = shape_waveform(&ch, 4, 0.1).unwrap();
        let time_energy = wave.energy();
        let spec = field::power_spectrum(&wave);
        let freq_energy: f64 = spec.iter().sum::<f64>() * wave.len() as f64;
        assert!((time_energy - freq_energy).abs() / time_energy < 1e-9);
    }
}
