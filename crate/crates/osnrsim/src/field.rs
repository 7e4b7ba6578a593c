//! Dual-polarization sampled optical field and FFT helpers.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Complex dual-polarization field sampled on a uniform time grid.
///
/// `|x|² + |y|²` is instantaneous optical power in watts. The grid is
/// treated as periodic by every frequency-domain operation. The
/// split-step solver additionally requires power-of-two lengths (the
/// transmitter produces them by construction); emulator patterning may
/// yield mixed-radix lengths, which every other operation accepts.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    /// Sample rate, Hz.
    pub sample_rate: f64,
    /// Offset of this field's center relative to the WDM plan center, Hz.
    pub center_freq_offset: f64,
}

impl FieldGrid {
    pub fn new(
        x: Vec<Complex64>,
        y: Vec<Complex64>,
        sample_rate: f64,
        center_freq_offset: f64,
    ) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::domain("polarization lengths differ".to_string()));
        }
        if x.is_empty() {
            return Err(Error::domain("field must not be empty".to_string()));
        }
        if sample_rate <= 0.0 {
            return Err(Error::domain("sample rate must be positive".to_string()));
        }
        Ok(FieldGrid {
            x,
            y,
            sample_rate,
            center_freq_offset,
        })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self> {
        FieldGrid::new(
            vec![Complex64::ZERO; len],
            vec![Complex64::ZERO; len],
            sample_rate,
            0.0,
        )
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Mean optical power over both polarizations, W.
    pub fn mean_power(&self) -> f64 {
        let sum: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .sum();
        sum / self.len() as f64
    }

    /// Total energy Σ(|x|²+|y|²) in sample units.
    pub fn energy(&self) -> f64 {
        self.mean_power() * self.len() as f64
    }

    /// Scales both polarizations so the mean power equals `power_w`.
    pub fn set_mean_power(&mut self, power_w: f64) -> Result<()> {
        let current = self.mean_power();
        if current <= 0.0 {
            return Err(Error::domain("cannot scale an all-zero field".to_string()));
        }
        let g = (power_w / current).sqrt();
        for v in self.x.iter_mut().chain(self.y.iter_mut()) {
            *v *= g;
        }
        Ok(())
    }

    /// FFT bin spacing, Hz.
    pub fn bin_spacing(&self) -> f64 {
        self.sample_rate / self.len() as f64
    }
}

/// Baseband FFT frequency for bin `k` of an `n`-point grid, Hz.
pub fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    let k = k as i64;
    let n_i = n as i64;
    let signed = if k <= (n_i - 1) / 2 { k } else { k - n_i };
    signed as f64 * sample_rate / n as f64
}

/// Angular frequency grid ω_k = 2π f_k for an `n`-point FFT, rad/s.
pub fn angular_frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    (0..n)
        .map(|k| 2.0 * std::f64::consts::PI * bin_frequency(k, n, sample_rate))
        .collect()
}

thread_local! {
    static FWD_PLANS: std::cell::RefCell<HashMap<usize, Arc<dyn Fft<f64>>>> =
        std::cell::RefCell::new(HashMap::new());
    static INV_PLANS: std::cell::RefCell<HashMap<usize, Arc<dyn Fft<f64>>>> =
        std::cell::RefCell::new(HashMap::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let cache = if inverse { &INV_PLANS } else { &FWD_PLANS };
    cache.with(|c| {
        c.borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

/// In-place forward FFT (unnormalized).
pub fn fft_in_place(data: &mut [Complex64]) {
    plan(data.len(), false).process(data);
}

/// In-place inverse FFT, normalized by 1/N so `ifft(fft(x)) == x`.
pub fn ifft_in_place(data: &mut [Complex64]) {
    plan(data.len(), true).process(data);
    let scale = 1.0 / data.len() as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Power spectral density estimate |FFT|²/N per bin (periodogram),
/// both polarizations summed.
pub fn power_spectrum(field: &FieldGrid) -> Vec<f64> {
    let mut fx = field.x.clone();
    let mut fy = field.y.clone();
    fft_in_place(&mut fx);
    fft_in_place(&mut fy);
    let n = field.len() as f64;
    fx.iter()
        .zip(&fy)
        .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()) / (n * n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn fft_round_trip_and_parseval() {
        let mut rng = crate::derive_rng(7, 0, 99);
        let n = 4096;
        let x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut f = x.clone();
        fft_in_place(&mut f);
        let time_energy: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let freq_energy: f64 = f.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        assert!((time_energy - freq_energy).abs() / time_energy < 1e-9);
        ifft_in_place(&mut f);
        let err: f64 = x.iter().zip(&f).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert!(err / time_energy < 1e-24);
    }

    #[test]
    fn bin_frequencies_are_centered() {
        let n = 8;
        let fs = 8.0;
        let freqs: Vec<f64> = (0..n).map(|k| bin_frequency(k, n, fs)).collect();
        assert_eq!(freqs, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn power_bookkeeping() {
        let mut g = FieldGrid::zeros(8, 1.0).unwrap();
        g.x[0] = Complex64::new(2.0, 0.0);
        assert!((g.mean_power() - 0.5).abs() < 1e-15);
        g.set_mean_power(2.0).unwrap();
        assert!((g.mean_power() - 2.0).abs() < 1e-12);
        assert!(FieldGrid::zeros(0, 1.0).is_err());
    }
}
