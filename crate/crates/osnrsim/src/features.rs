//! Nonlinear-noise correlation features: C-coefficients (intra-channel
//! perturbation projections), co-/cross-polarization correlation
//! doublets, and the 35-element NN input vector.
//!
//! Both estimators are normalized to be dimensionless, power-scale
//! invariant and exactly invariant to a joint global phase rotation of
//! the symbols and the noise field.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::SnrValue;
use crate::rxdsp::{LinkMetadata, SymbolFrame};

/// Identifier of the feature layout below; embedded in dataset records
/// and model files, and checked on load.
pub const FEATURE_LAYOUT_ID: &str = "esnr-len-cd.c16(-1..2)sq.rco1-8.rcross0-7.v1";

/// Number of NN inputs.
pub const FEATURE_LEN: usize = 35;

/// Minimum symbols for a statistically meaningful estimate.
pub const MIN_SYMBOLS: usize = 4096;

/// The (m, n) grid used for the feature vector: {−1,0,1,2}² row major.
pub fn default_c_indices() -> Vec<(i32, i32)> {
    let vals = [-1i32, 0, 1, 2];
    let mut out = Vec::with_capacity(16);
    for &m in &vals {
        for &n in &vals {
            out.push((m, n));
        }
    }
    out
}

/// First-order intra-channel perturbation coefficients estimated from
/// the noise field.
#[derive(Debug, Clone)]
pub struct CCoefficients {
    pub index_set: Vec<(i32, i32)>,
    /// Ĉ(m, n) for each index, averaged over both polarization
    /// estimates.
    pub values: Vec<Complex64>,
    /// Standard-error estimate per index (uncorrelated-noise model).
    pub std_errors: Vec<f64>,
    /// Mean noise power used in the error model (normalization record).
    pub mean_noise_power: f64,
}

/// Least-squares projection of the noise field onto the triplet kernel
/// T_k(m,n) = (x_{k+m}·x̄_{k+m+n} + y_{k+m}·ȳ_{k+m+n})·x_{k+n} (and the
/// x↔y mirrored kernel for the y estimate), one index at a time.
pub fn c_coefficients(frame: &SymbolFrame, index_set: &[(i32, i32)]) -> Result<CCoefficients> {
    let len = frame.len();
    if len < MIN_SYMBOLS {
        return Err(Error::domain(format!(
            "need at least {MIN_SYMBOLS} symbols for C-coefficients, got {len}"
        )));
    }
    for &(m, n) in index_set {
        if m.abs() > 32 || n.abs() > 32 {
            return Err(Error::domain(format!(
                "C index ({m},{n}) outside the supported ±32 range"
            )));
        }
    }
    let x = &frame.tx_x;
    let y = &frame.tx_y;
    let dx = &frame.noise_x;
    let dy = &frame.noise_y;
    let mean_noise: f64 = dx
        .iter()
        .chain(dy.iter())
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        / (2 * len) as f64;

    let mut values = Vec::with_capacity(index_set.len());
    let mut std_errors = Vec::with_capacity(index_set.len());
    for &(m, n) in index_set {
        let lo = (-[0, m, m + n, n].iter().min().unwrap()).max(0) as usize;
        let hi = len as i32 - 1 - [0, m, m + n, n].iter().max().unwrap().max(&0);
        let hi = hi as usize;
        let mut num_x = Complex64::ZERO;
        let mut den_x = 0.0f64;
        let mut num_y = Complex64::ZERO;
        let mut den_y = 0.0f64;
        for k in lo..=hi {
            let ka = (k as i32 + m) as usize;
            let kb = (k as i32 + m + n) as usize;
            let kc = (k as i32 + n) as usize;
            // shared pair sum of the Manakov-style kernel
            let s = x[ka] * x[kb].conj() + y[ka] * y[kb].conj();
            let tx = s * x[kc];
            let ty = s * y[kc];
            num_x += dx[k] * tx.conj();
            den_x += tx.norm_sqr();
            num_y += dy[k] * ty.conj();
            den_y += ty.norm_sqr();
        }
        if den_x <= 0.0 || den_y <= 0.0 {
            return Err(Error::domain("degenerate kernel energy".to_string()));
        }
        let c = (num_x / den_x + num_y / den_y) / 2.0;
        // var of each single-pol estimate under uncorrelated noise is
        // mean|Δ|²/den; the two estimates average.
        let se = 0.5 * (mean_noise / den_x + mean_noise / den_y).sqrt();
        values.push(c);
        std_errors.push(se);
    }
    Ok(CCoefficients {
        index_set: index_set.to_vec(),
        values,
        std_errors,
        mean_noise_power: mean_noise,
    })
}

/// Lagged noise-field correlations between co- and cross-polarized
/// symbol pairs.
#[derive(Debug, Clone)]
pub struct Doublets {
    pub max_lag: usize,
    /// R_co(m) for m = 0..=max_lag; R_co(0) = 1 by normalization.
    pub co: Vec<Complex64>,
    /// R_cross(m) for m = −max_lag..=max_lag (index m + max_lag).
    pub cross: Vec<Complex64>,
    /// Denominators kept for audit: E[|Δx|²+|Δy|²] and its half.
    pub norm_co: f64,
    pub norm_cross: f64,
}

impl Doublets {
    pub fn cross_at(&self, m: i32) -> Complex64 {
        self.cross[(m + self.max_lag as i32) as usize]
    }
}

/// R_co(m) = E[Δx_k·Δ̄x_{k+m} + Δy_k·Δ̄y_{k+m}] / E[|Δx|²+|Δy|²],
/// R_cross(m) = E[Δx_k·Δ̄y_{k+m}] / (E[|Δx|²+|Δy|²]/2),
/// each lag averaged over its own valid range.
pub fn doublets(frame: &SymbolFrame, max_lag: usize) -> Result<Doublets> {
    let len = frame.len();
    if len < MIN_SYMBOLS {
        return Err(Error::domain(format!(
            "need at least {MIN_SYMBOLS} symbols for doublets, got {len}"
        )));
    }
    if max_lag > 64 || max_lag == 0 {
        return Err(Error::domain("doublet lags must lie in 1..=64".to_string()));
    }
    let dx = &frame.noise_x;
    let dy = &frame.noise_y;
    let norm_co: f64 = dx
        .iter()
        .chain(dy.iter())
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        / len as f64;
    if norm_co <= 0.0 {
        return Err(Error::domain("noise field is identically zero".to_string()));
    }
    let norm_cross = norm_co / 2.0;

    let mut co = Vec::with_capacity(max_lag + 1);
    for m in 0..=max_lag {
        let count = len - m;
        let mut acc = Complex64::ZERO;
        for k in 0..count {
            acc += dx[k] * dx[k + m].conj() + dy[k] * dy[k + m].conj();
        }
        co.push(acc / count as f64 / norm_co);
    }
    let mut cross = Vec::with_capacity(2 * max_lag + 1);
    for m in -(max_lag as i32)..=(max_lag as i32) {
        let lo = (-m).max(0) as usize;
        let hi = (len as i32 - 1 - m.max(0)) as usize;
        let count = hi - lo + 1;
        let mut acc = Complex64::ZERO;
        for k in lo..=hi {
            acc += dx[k] * dy[(k as i32 + m) as usize].conj();
        }
        cross.push(acc / count as f64 / norm_cross);
    }
    Ok(Doublets {
        max_lag,
        co,
        cross,
        norm_co,
        norm_cross,
    })
}

/// The NN input vector in its fixed documented order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Assembles the 35-element vector:
/// `[0]` ESNR dB, `[1]` length/1000 km, `[2]` cumulative dispersion/10⁴
/// ps/nm, `[3..19]` |Ĉ(m,n)| over {−1,0,1,2}² row-major, `[19..27]`
/// |R_co(m)| m=1..8, `[27..35]` |R_cross(m)| m=0..7.
pub fn assemble_features(
    cc: &CCoefficients,
    dbl: &Doublets,
    meta: &LinkMetadata,
    esnr: SnrValue,
) -> Result<FeatureVector> {
    if cc.index_set != default_c_indices() {
        return Err(Error::domain(
            "C-coefficient index set does not match the feature layout".to_string(),
        ));
    }
    if dbl.max_lag < 8 {
        return Err(Error::domain(
            "doublets must cover lags up to 8".to_string(),
        ));
    }
    let mut v = Vec::with_capacity(FEATURE_LEN);
    v.push(esnr.db());
    v.push(meta.length_km / 1e3);
    v.push(meta.cumulative_dispersion_ps_nm / 1e4);
    for c in &cc.values {
        v.push(c.norm());
    }
    for m in 1..=8 {
        v.push(dbl.co[m].norm());
    }
    for m in 0..8 {
        v.push(dbl.cross_at(m).norm());
    }
    debug_assert_eq!(v.len(), FEATURE_LEN);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("non-finite feature value".to_string()));
    }
    Ok(FeatureVector(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{Constellation, ModulationFormat};
    use crate::rxdsp::NoiseReference;
    use crate::txmodel;
    use rand_distr::{Distribution, Normal};

    /// Builds a frame with the given noise field over fresh QPSK symbols.
    fn frame_with_noise(
        seed: u64,
        count: usize,
        make_noise: impl Fn(&[Complex64], &[Complex64], &mut rand_chacha::ChaCha8Rng) -> (Vec<Complex64>, Vec<Complex64>),
    ) -> SymbolFrame {
        let cst = Constellation::new(ModulationFormat::Qpsk);
        let (tx_x, tx_y) = txmodel::gen_symbols(seed, count, &cst).unwrap();
        let mut rng = crate::derive_rng(seed, 1, 90);
        let (nx, ny) = make_noise(&tx_x, &tx_y, &mut rng);
        let rx_x: Vec<Complex64> = tx_x.iter().zip(&nx).map(|(t, n)| t + n).collect();
        let rx_y: Vec<Complex64> = tx_y.iter().zip(&ny).map(|(t, n)| t + n).collect();
        crate::rxdsp::decide_and_measure(&rx_x, &rx_y, &tx_x, &tx_y, &cst, NoiseReference::TransmitKnown)
            .unwrap()
    }

    fn awgn_noise(
        count: usize,
        sigma: f64,
    ) -> impl Fn(&[Complex64], &[Complex64], &mut rand_chacha::ChaCha8Rng) -> (Vec<Complex64>, Vec<Complex64>)
    {
        move |_tx_x, _tx_y, rng| {
            let n = Normal::new(0.0, sigma / 2f64.sqrt()).unwrap();
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Complex64> {
                (0..count)
                    .map(|_| Complex64::new(n.sample(rng), n.sample(rng)))
                    .collect()
            };
            (draw(rng), draw(rng))
        }
    }

    #[test]
    fn awgn_c_coefficients_sit_at_noise_floor() {
        let frame = frame_with_noise(1, 1 << 16, awgn_noise(1 << 16, 0.1));
        let cc = c_coefficients(&frame, &default_c_indices()).unwrap();
        for ((idx, c), se) in cc
            .index_set
            .iter()
            .zip(&cc.values)
            .zip(&cc.std_errors)
        {
            assert!(
                c.norm() < 3.0 * se,
                "index {idx:?}: |C| {} exceeds 3 SE {}",
                c.norm(),
                se
            );
        }
    }

    #[test]
    fn planted_kernel_is_recovered() {
        let count = 1 << 15;
        let c0 = Complex64::new(3e-3, -1e-3);
        let frame = frame_with_noise(2, count, move |tx_x, tx_y, _rng| {
            let mut nx = vec![Complex64::ZERO; count];
            let mut ny = vec![Complex64::ZERO; count];
            // plant Δ = c0·T(1,1) on both polarization kernels
            for k in 0..count - 2 {
                let s = tx_x[k + 1] * tx_x[k + 2].conj() + tx_y[k + 1] * tx_y[k + 2].conj();
                nx[k] = c0 * s * tx_x[k + 1];
                ny[k] = c0 * s * tx_y[k + 1];
            }
            (nx, ny)
        });
        let cc = c_coefficients(&frame, &default_c_indices()).unwrap();
        let pos = cc.index_set.iter().position(|&i| i == (1, 1)).unwrap();
        let got = cc.values[pos];
        let se = cc.std_errors[pos];
        assert!(
            (got - c0).norm() < 3.0 * se.max(1e-4 * c0.norm()),
            "planted {c0} recovered {got}, se {se}"
        );
        for (i, (&idx, c)) in cc.index_set.iter().zip(&cc.values).enumerate() {
            if idx != (1, 1) {
                assert!(
                    c.norm() < c0.norm() / 3.0,
                    "index {idx:?} ({i}): leak {}",
                    c.norm()
                );
            }
        }
    }

    #[test]
    fn c_estimator_is_linear_in_noise() {
        let count = 1 << 13;
        let frame = frame_with_noise(3, count, awgn_noise(count, 0.05));
        let cc1 = c_coefficients(&frame, &default_c_indices()).unwrap();
        let mut scaled = frame.clone();
        for v in scaled.noise_x.iter_mut().chain(scaled.noise_y.iter_mut()) {
            *v *= 2.5;
        }
        let cc2 = c_coefficients(&scaled, &default_c_indices()).unwrap();
        for (a, b) in cc1.values.iter().zip(&cc2.values) {
            assert!((b - a * 2.5).norm() < 1e-12 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn awgn_doublets_white() {
        let count = 1 << 16;
        let frame = frame_with_noise(4, count, awgn_noise(count, 0.1));
        let dbl = doublets(&frame, 8).unwrap();
        assert!((dbl.co[0].re - 1.0).abs() < 1e-12);
        assert_eq!(dbl.co[0].im, 0.0);
        let floor = 4.0 / (count as f64).sqrt();
        for m in 1..=8 {
            assert!(dbl.co[m].norm() < floor, "co({m}) = {}", dbl.co[m].norm());
        }
        for m in -8..=8 {
            assert!(
                dbl.cross_at(m).norm() < 2.0 * floor,
                "cross({m}) = {}",
                dbl.cross_at(m).norm()
            );
        }
    }

    #[test]
    fn lowpass_common_phase_noise_shows_in_co_doublets() {
        // Δ on both pols = i·φ_k with φ a moving average of white noise
        // over 4 symbols: analytic ρ(1) = 3/4.
        let count = 1 << 14;
        let frame = frame_with_noise(5, count, move |_tx_x, _tx_y, rng| {
            let n = Normal::new(0.0, 0.05).unwrap();
            let white: Vec<f64> = (0..count + 4).map(|_| n.sample(rng)).collect();
            let phi: Vec<f64> = (0..count)
                .map(|k| (white[k] + white[k + 1] + white[k + 2] + white[k + 3]) / 4.0)
                .collect();
            let d: Vec<Complex64> = phi.iter().map(|&p| Complex64::new(0.0, p)).collect();
            (d.clone(), d)
        });
        let dbl = doublets(&frame, 8).unwrap();
        assert!(
            dbl.co[1].norm() > 0.3,
            "co(1) = {} for correlated phase noise",
            dbl.co[1].norm()
        );
        // smooth decay over the averaging window
        assert!(dbl.co[1].norm() > dbl.co[2].norm());
        assert!(dbl.co[2].norm() > dbl.co[3].norm());
        assert!(dbl.co[3].norm() > dbl.co[5].norm());
    }

    #[test]
    fn polarization_swap_symmetry() {
        let count = 1 << 13;
        let frame = frame_with_noise(6, count, awgn_noise(count, 0.1));
        let mut swapped = frame.clone();
        std::mem::swap(&mut swapped.tx_x, &mut swapped.tx_y);
        std::mem::swap(&mut swapped.rx_x, &mut swapped.rx_y);
        std::mem::swap(&mut swapped.noise_x, &mut swapped.noise_y);
        let a = doublets(&frame, 8).unwrap();
        let b = doublets(&swapped, 8).unwrap();
        for m in 0..=8 {
            assert!((a.co[m] - b.co[m]).norm() < 1e-12);
        }
        for m in -8..=8 {
            let expect = a.cross_at(-m).conj();
            assert!(
                (b.cross_at(m) - expect).norm() < 1e-12,
                "cross symmetry at {m}"
            );
        }
    }

    #[test]
    fn global_phase_rotation_invariance() {
        let count = 1 << 13;
        let frame = frame_with_noise(7, count, awgn_noise(count, 0.1));
        for &phi in &[0.3f64, -1.2, 2.9] {
            let rot = Complex64::from_polar(1.0, phi);
            let mut rotated = frame.clone();
            for seq in [
                &mut rotated.tx_x,
                &mut rotated.tx_y,
                &mut rotated.rx_x,
                &mut rotated.rx_y,
                &mut rotated.noise_x,
                &mut rotated.noise_y,
            ] {
                for v in seq.iter_mut() {
                    *v *= rot;
                }
            }
            let cc_a = c_coefficients(&frame, &default_c_indices()).unwrap();
            let cc_b = c_coefficients(&rotated, &default_c_indices()).unwrap();
            for (a, b) in cc_a.values.iter().zip(&cc_b.values) {
                assert!((a - b).norm() < 1e-12);
            }
            let d_a = doublets(&frame, 8).unwrap();
            let d_b = doublets(&rotated, 8).unwrap();
            for (a, b) in d_a.co.iter().zip(&d_b.co) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn standard_error_scales_as_inverse_sqrt_count() {
        let trials = 24;
        let rms = |count: usize, base_seed: u64| -> f64 {
            let mut acc = 0.0;
            let mut n = 0usize;
            for t in 0..trials {
                let frame = frame_with_noise(base_seed + t, count, awgn_noise(count, 0.1));
                let cc = c_coefficients(&frame, &default_c_indices()).unwrap();
                for c in &cc.values {
                    acc += c.norm_sqr();
                    n += 2;
                }
            }
            (acc / n as f64).sqrt()
        };
        let small = rms(1 << 12, 100);
        let big = rms(1 << 16, 200);
        let ratio = small / big;
        assert!(
            (3.0..=5.0).contains(&ratio),
            "SE ratio {ratio:.2}, expected 4 ± 25%"
        );
    }

    #[test]
    fn feature_vector_layout() {
        let count = 1 << 13;
        let frame = frame_with_noise(8, count, awgn_noise(count, 0.1));
        let cc = c_coefficients(&frame, &default_c_indices()).unwrap();
        let dbl = doublets(&frame, 8).unwrap();
        let meta = LinkMetadata {
            length_km: 640.0,
            cumulative_dispersion_ps_nm: 10880.0,
            baud_hz: 56e9,
            mode: "56-200G".to_string(),
        };
        let f = assemble_features(&cc, &dbl, &meta, SnrValue::from_db(14.5)).unwrap();
        assert_eq!(f.values().len(), FEATURE_LEN);
        assert!((f.values()[0] - 14.5).abs() < 1e-12);
        assert!((f.values()[1] - 0.64).abs() < 1e-12);
        assert!((f.values()[2] - 1.088).abs() < 1e-12);
        // AWGN frame: correlation features at the statistical floor
        for (i, &v) in f.values().iter().enumerate().skip(3) {
            assert!(v < 0.05, "feature {i} = {v}");
        }
        // wrong component sizes are rejected
        let short = doublets(&frame, 4).unwrap();
        assert!(assemble_features(&cc, &short, &meta, SnrValue::from_db(14.5)).is_err());
        let wrong_idx = c_coefficients(&frame, &[(0, 0)]).unwrap();
        assert!(assemble_features(&wrong_idx, &dbl, &meta, SnrValue::from_db(14.5)).is_err());
    }

    #[test]
    fn insufficient_symbols_rejected() {
        let frame = frame_with_noise(9, 1 << 10, awgn_noise(1 << 10, 0.1));
        assert!(c_coefficients(&frame, &default_c_indices()).is_err());
        assert!(doublets(&frame, 8).is_err());
    }
}
