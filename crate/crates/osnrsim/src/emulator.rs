//! Linear channel emulator: waveform patterning, per-segment random
//! polarization rotation, DGD, PDL and distributed ASE loading.
//!
//! Totals for DGD and PDL are drawn from Maxwellian distributions and
//! split across the segments: DGD as `total·√(3π/8)/√n` with random
//! birefringence axes (random-axis segments add like a 3-D walk whose
//! mean length is `√(8/3π)` of its rms, so the factor makes the
//! expected aggregate equal the drawn total), PDL as `total/n` dB with
//! random orientations (aggregate PDL is not additive; accepted and
//! measurable). ASE is white over the sampling bandwidth, injected in
//! equal per-segment shares, its variance computed analytically from
//! the target SNR over the symbol-rate bandwidth.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::field::{self, FieldGrid};
use crate::metrics::SnrValue;

/// A 2×2 complex Jones matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jones(pub [[Complex64; 2]; 2]);

impl Jones {
    pub const IDENTITY: Jones = Jones([
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    ]);

    pub fn mul(&self, rhs: &Jones) -> Jones {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[Complex64::ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Jones(out)
    }

    pub fn dagger(&self) -> Jones {
        Jones([
            [self.0[0][0].conj(), self.0[1][0].conj()],
            [self.0[0][1].conj(), self.0[1][1].conj()],
        ])
    }

    pub fn apply(&self, x: Complex64, y: Complex64) -> (Complex64, Complex64) {
        (
            self.0[0][0] * x + self.0[0][1] * y,
            self.0[1][0] * x + self.0[1][1] * y,
        )
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn inverse(&self) -> Jones {
        let d = self.det();
        Jones([
            [self.0[1][1] / d, -self.0[0][1] / d],
            [-self.0[1][0] / d, self.0[0][0] / d],
        ])
    }

    /// Frobenius distance to another matrix.
    pub fn distance(&self, rhs: &Jones) -> f64 {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += (self.0[i][j] - rhs.0[i][j]).norm_sqr();
            }
        }
        s.sqrt()
    }
}

/// Haar-random SU(2) element via a normalized Gaussian quaternion.
pub fn haar_unitary(rng: &mut impl Rng) -> Jones {
    let g: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let norm = (g.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let q0 = Complex64::new(g[0] / norm, g[1] / norm);
    let q1 = Complex64::new(g[2] / norm, g[3] / norm);
    Jones([[q0, -q1.conj()], [q1, q0.conj()]])
}

/// One emulator segment: a fixed rotation, a DGD element in its own
/// birefringence basis and a PDL element in its own orientation.
#[derive(Debug, Clone)]
pub struct EmulatorSegment {
    pub rotation: Jones,
    /// Differential group delay of this segment, seconds.
    pub dgd_s: f64,
    /// Birefringence basis for the DGD element.
    pub dgd_basis: Jones,
    /// Polarization-dependent loss of this segment, dB.
    pub pdl_db: f64,
    /// Orientation basis for the PDL element.
    pub pdl_basis: Jones,
}

impl EmulatorSegment {
    /// Jones matrix of the segment at baseband angular frequency ω.
    pub fn matrix(&self, omega: f64) -> Jones {
        let half = omega * self.dgd_s / 2.0;
        let d = Jones([
            [Complex64::from_polar(1.0, half), Complex64::ZERO],
            [Complex64::ZERO, Complex64::from_polar(1.0, -half)],
        ]);
        let dgd = self.dgd_basis.dagger().mul(&d).mul(&self.dgd_basis);
        let gp = 10f64.powf(self.pdl_db / 40.0);
        let p = Jones([
            [Complex64::new(gp, 0.0), Complex64::ZERO],
            [Complex64::ZERO, Complex64::new(1.0 / gp, 0.0)],
        ]);
        let pdl = self.pdl_basis.dagger().mul(&p).mul(&self.pdl_basis);
        pdl.mul(&dgd).mul(&self.rotation)
    }
}

/// The full segment chain plus the impairment totals that generated it.
#[derive(Debug, Clone)]
pub struct EmulatorChain {
    pub segments: Vec<EmulatorSegment>,
    /// Drawn total DGD, ps.
    pub total_dgd_ps: f64,
    /// Drawn total PDL, dB.
    pub total_pdl_db: f64,
    pub seed: u64,
}

impl EmulatorChain {
    /// Jones matrix of the whole chain at ω (segment 1 applied first).
    pub fn matrix(&self, omega: f64) -> Jones {
        let mut j = Jones::IDENTITY;
        for seg in &self.segments {
            j = seg.matrix(omega).mul(&j);
        }
        j
    }
}

/// One Maxwell–Boltzmann draw with the given mean: the norm of a
/// 3-vector of i.i.d. Normal(0, a) with a = mean/(2√(2/π)).
pub fn sample_maxwellian(seed: u64, mean: f64) -> f64 {
    let mut rng = crate::derive_rng(seed, 0, crate::streams::EMULATOR);
    maxwellian(&mut rng, mean)
}

fn maxwellian(rng: &mut impl Rng, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let a = mean / (2.0 * (2.0 / std::f64::consts::PI).sqrt());
    let n = Normal::new(0.0, a).expect("positive scale");
    let (x, y, z) = (n.sample(rng), n.sample(rng), n.sample(rng));
    (x * x + y * y + z * z).sqrt()
}

/// Mean-compensation factor for random-axis DGD accumulation: the
/// expected length of an n-step 3-D random walk is √(8/3π) of its rms
/// length, so per-segment DGD carries the inverse factor.
const DGD_WALK_CORRECTION: f64 = 1.085_401_881_84; // sqrt(3*pi/8)

/// Builds an emulator chain: totals drawn from Maxwellians, split over
/// `n_segments` with Haar-random rotations, axes and orientations.
pub fn build_emulator(
    seed: u64,
    n_segments: usize,
    dgd_mean_ps: f64,
    pdl_mean_db: f64,
) -> Result<EmulatorChain> {
    if n_segments == 0 {
        return Err(Error::domain("need at least one segment".to_string()));
    }
    let mut rng = crate::derive_rng(seed, 0, crate::streams::EMULATOR);
    let total_dgd_ps = maxwellian(&mut rng, dgd_mean_ps);
    let total_pdl_db = maxwellian(&mut rng, pdl_mean_db);
    let dgd_seg_s = total_dgd_ps * 1e-12 * DGD_WALK_CORRECTION / (n_segments as f64).sqrt();
    let pdl_seg_db = total_pdl_db / n_segments as f64;
    let segments = (0..n_segments)
        .map(|_| EmulatorSegment {
            rotation: haar_unitary(&mut rng),
            dgd_s: dgd_seg_s,
            dgd_basis: haar_unitary(&mut rng),
            pdl_db: pdl_seg_db,
            pdl_basis: haar_unitary(&mut rng),
        })
        .collect();
    Ok(EmulatorChain {
        segments,
        total_dgd_ps,
        total_pdl_db,
        seed,
    })
}

/// Repeats the waveform `pattern_count` times, passes it through the
/// segment chain in the frequency domain and loads ASE so the
/// delivered SNR over the symbol-rate bandwidth `baud_hz` equals
/// `target_snr_ase`. Noise is injected after each segment's transform
/// in equal variance shares; `SnrValue::infinite()` disables it.
pub fn apply_emulator(
    wave: &FieldGrid,
    chain: &EmulatorChain,
    target_snr_ase: SnrValue,
    pattern_count: usize,
    baud_hz: f64,
    noise_seed: u64,
) -> Result<FieldGrid> {
    if pattern_count == 0 {
        return Err(Error::domain("pattern count must be >= 1".to_string()));
    }
    let sps = wave.sample_rate / baud_hz;
    if sps < 2.0 - 1e-9 {
        return Err(Error::domain(
            "emulator input must carry >= 2 samples/symbol".to_string(),
        ));
    }
    let n = wave.len() * pattern_count;
    let mut sx = Vec::with_capacity(n);
    let mut sy = Vec::with_capacity(n);
    for _ in 0..pattern_count {
        sx.extend_from_slice(&wave.x);
        sy.extend_from_slice(&wave.y);
    }
    field::fft_in_place(&mut sx);
    field::fft_in_place(&mut sy);

    let omega = field::angular_frequencies(n, wave.sample_rate);
    let with_noise = target_snr_ase.is_finite();
    // Unit-variance noise accumulator, scaled once the signal power
    // delivered through the chain is known.
    let mut wx = vec![Complex64::ZERO; n];
    let mut wy = vec![Complex64::ZERO; n];
    let mut rng = crate::derive_rng(noise_seed, 0, crate::streams::EMULATOR_NOISE);
    let normal = Normal::new(0.0f64, (0.5f64).sqrt()).expect("valid");

    for seg in &chain.segments {
        for k in 0..n {
            let m = seg.matrix(omega[k]);
            let (ax, ay) = m.apply(sx[k], sy[k]);
            sx[k] = ax;
            sy[k] = ay;
            if with_noise {
                let (bx, by) = m.apply(wx[k], wy[k]);
                wx[k] = bx + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
                wy[k] = by + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
            }
        }
    }

    if with_noise {
        // Delivered signal power from the chained spectrum (Parseval).
        let nf = n as f64;
        let p_sig: f64 = sx
            .iter()
            .chain(sy.iter())
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            / (nf * nf);
        // Per-polarization per-sample time-domain variance for the whole
        // chain; frequency-domain draws need variance N·σ²_seg.
        let sigma_tot_sq = p_sig * wave.sample_rate / (2.0 * baud_hz * target_snr_ase.linear());
        let sigma_seg_sq = sigma_tot_sq / chain.segments.len() as f64;
        if !(sigma_seg_sq > 0.0 && sigma_seg_sq.is_finite()) {
            return Err(Error::domain(format!(
                "unreachable target SNR: per-segment noise variance {sigma_seg_sq}"
            )));
        }
        let scale = (nf * sigma_seg_sq).sqrt();
        for k in 0..n {
            sx[k] += wx[k] * scale;
            sy[k] += wy[k] * scale;
        }
    }

    field::ifft_in_place(&mut sx);
    field::ifft_in_place(&mut sy);
    FieldGrid::new(sx, sy, wave.sample_rate, wave.center_freq_offset)
}

/// Aggregate chain DGD measured from the eigenphase splitting of
/// J(ω₀+δ)·J(ω₀)⁻¹, seconds.
pub fn measure_chain_dgd(chain: &EmulatorChain) -> f64 {
    let delta = 2.0 * std::f64::consts::PI * 50e6; // rad/s; small vs 1/DGD
    let j0 = chain.matrix(0.0);
    let j1 = chain.matrix(delta);
    let m = j1.mul(&j0.inverse());
    let tr = m.0[0][0] + m.0[1][1];
    let disc = (tr * tr - 4.0 * m.det()).sqrt();
    let l1 = (tr + disc) / 2.0;
    let l2 = (tr - disc) / 2.0;
    let mut dphi = (l1.arg() - l2.arg()).abs();
    if dphi > std::f64::consts::PI {
        dphi = 2.0 * std::f64::consts::PI - dphi;
    }
    dphi / delta
}
