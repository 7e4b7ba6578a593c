//! Scalar SNR/BER/OSNR algebra and the constellation catalog.
//!
//! All SNR quantities are carried in linear units by [`SnrValue`];
//! conversions to/from dB are exact inverse pairs. BER curves are the
//! standard Gray-coded AWGN approximations built on the Gaussian tail
//! function, and `esnr_from_ber` inverts them numerically so the pair
//! is self-consistent by construction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// A signal-to-noise ratio stored in linear units.
///
/// The value is strictly positive and may be `+inf` (no noise of the
/// given kind, e.g. an ideal modem's implementation SNR).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SnrValue {
    linear: f64,
}

impl SnrValue {
    pub fn from_linear(linear: f64) -> Result<Self> {
        if linear.is_nan() || linear <= 0.0 {
            return Err(Error::domain(format!(
                "SNR must be positive, got {linear}"
            )));
        }
        Ok(SnrValue { linear })
    }

    pub fn from_db(db: f64) -> Self {
        SnrValue {
            linear: linear_from_db(db),
        }
    }

    /// SNR corresponding to no noise at all.
    pub fn infinite() -> Self {
        SnrValue {
            linear: f64::INFINITY,
        }
    }

    pub fn linear(self) -> f64 {
        self.linear
    }

    pub fn db(self) -> f64 {
        db_from_linear(self.linear).expect("SnrValue is positive by construction")
    }

    pub fn is_finite(self) -> bool {
        self.linear.is_finite()
    }
}

/// `10·log10(x)`; errors on non-positive input.
pub fn db_from_linear(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::domain(format!(
            "dB conversion needs a positive ratio, got {x}"
        )));
    }
    Ok(10.0 * x.log10())
}

/// `10^(x/10)`, the exact inverse of [`db_from_linear`].
pub fn linear_from_db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// Modulation format names used by the transmission-mode table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModulationFormat {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "8QAM")]
    Qam8,
    #[serde(rename = "16QAM")]
    Qam16,
}

impl ModulationFormat {
    pub fn bits_per_symbol(self) -> u32 {
        match self {
            ModulationFormat::Qpsk => 2,
            ModulationFormat::Qam8 => 3,
            ModulationFormat::Qam16 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationFormat::Qpsk => "QPSK",
            ModulationFormat::Qam8 => "8QAM",
            ModulationFormat::Qam16 => "16QAM",
        }
    }
}

impl std::str::FromStr for ModulationFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "QPSK" | "qpsk" => Ok(ModulationFormat::Qpsk),
            "8QAM" | "8qam" => Ok(ModulationFormat::Qam8),
            "16QAM" | "16qam" => Ok(ModulationFormat::Qam16),
            other => Err(Error::domain(format!("unknown constellation '{other}'"))),
        }
    }
}

/// A unit-average-energy constellation with Gray bit labels.
///
/// `points[i]` carries the bit pattern `labels[i]` (low
/// `bits_per_symbol` bits). Labels are unique and Gray-coded so that
/// nearest neighbours differ in one bit.
#[derive(Debug, Clone)]
pub struct Constellation {
    pub format: ModulationFormat,
    pub points: Vec<Complex64>,
    pub labels: Vec<u32>,
}

impl Constellation {
    pub fn new(format: ModulationFormat) -> Self {
        let (points, labels) = match format {
            ModulationFormat::Qpsk => qpsk_points(),
            ModulationFormat::Qam8 => qam8_points(),
            ModulationFormat::Qam16 => qam16_points(),
        };
        Constellation {
            format,
            points,
            labels,
        }
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.format.bits_per_symbol()
    }

    /// Index of the minimum-distance point for a received sample.
    pub fn decide(&self, sample: Complex64) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (sample - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// QPSK: (±1 ± i)/√2 with the two bits selecting the I and Q signs.
fn qpsk_points() -> (Vec<Complex64>, Vec<u32>) {
    let s = 1.0 / 2f64.sqrt();
    let mut points = Vec::with_capacity(4);
    let mut labels = Vec::with_capacity(4);
    for b in 0..4u32 {
        let i = if b & 0b01 == 0 { s } else { -s };
        let q = if b & 0b10 == 0 { s } else { -s };
        points.push(Complex64::new(i, q));
        labels.push(b);
    }
    (points, labels)
}

/// Gray code over a 4-level axis: 00, 01, 11, 10 for −3, −1, +1, +3.
const GRAY4: [u32; 4] = [0b00, 0b01, 0b11, 0b10];
const LEVELS4: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];

/// Rectangular 8QAM: a 4×2 grid, I ∈ {±1, ±3}, Q ∈ {±1}, normalized to
/// unit mean energy. Gray-codable exactly: two bits on I, one on Q.
fn qam8_points() -> (Vec<Complex64>, Vec<u32>) {
    let norm = 1.0 / 6f64.sqrt(); // E = mean(I²) + mean(Q²) = 5 + 1
    let mut points = Vec::with_capacity(8);
    let mut labels = Vec::with_capacity(8);
    for (ii, &i_lvl) in LEVELS4.iter().enumerate() {
        for (qi, &q_lvl) in [-1.0f64, 1.0].iter().enumerate() {
            points.push(Complex64::new(i_lvl * norm, q_lvl * norm));
            labels.push(GRAY4[ii] | ((qi as u32) << 2));
        }
    }
    (points, labels)
}

/// Square 16QAM with per-axis Gray coding, unit mean energy.
fn qam16_points() -> (Vec<Complex64>, Vec<u32>) {
    let norm = 1.0 / 10f64.sqrt(); // E = 2·mean{1,9}
    let mut points = Vec::with_capacity(16);
    let mut labels = Vec::with_capacity(16);
    for (ii, &i_lvl) in LEVELS4.iter().enumerate() {
        for (qi, &q_lvl) in LEVELS4.iter().enumerate() {
            points.push(Complex64::new(i_lvl * norm, q_lvl * norm));
            labels.push(GRAY4[ii] | (GRAY4[qi] << 2));
        }
    }
    (points, labels)
}

/// Gaussian tail function Q(x) = P(N(0,1) > x).
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Pre-FEC BER for a Gray-coded constellation on the AWGN channel at
/// symbol SNR `snr` (Es/N0). Nearest-neighbour approximations, exact
/// for QPSK; monotone decreasing in SNR for all formats.
pub fn ber_from_snr(snr: SnrValue, c: &Constellation) -> f64 {
    let g = snr.linear();
    match c.format {
        // Two orthogonal BPSK tributaries: exact.
        ModulationFormat::Qpsk => q_function(g.sqrt()),
        // 4×2 grid: d_min²·γ/4 = γ/6, mean nearest-neighbour count 2.5
        // over 3 bits.
        ModulationFormat::Qam8 => (2.5 / 3.0) * q_function((g / 3.0).sqrt()),
        // Standard square-QAM first term: (4/log2 M)(1−1/√M)·Q(√(3γ/15)).
        ModulationFormat::Qam16 => 0.75 * q_function((g / 5.0).sqrt()),
    }
}

/// Inverts [`ber_from_snr`]: the effective SNR whose model BER equals
/// the measured pre-FEC BER. Bisection over [−5, 40] dB, which
/// converges unconditionally because the curve is strictly monotone.
pub fn esnr_from_ber(ber: f64, c: &Constellation) -> Result<SnrValue> {
    if !(ber > 0.0 && ber < 0.5) {
        return Err(Error::domain(format!(
            "BER must lie in (0, 0.5), got {ber}"
        )));
    }
    let (mut lo_db, mut hi_db) = (-5.0f64, 40.0f64);
    let ber_lo = ber_from_snr(SnrValue::from_db(lo_db), c);
    if ber > ber_lo {
        return Err(Error::domain(format!(
            "BER {ber} exceeds the model value {ber_lo:.4} at the -5 dB search bound"
        )));
    }
    // ber(hi) underflows to 0 for every format, so a root is bracketed.
    while hi_db - lo_db > 1e-10 {
        let mid = 0.5 * (lo_db + hi_db);
        if ber_from_snr(SnrValue::from_db(mid), c) > ber {
            lo_db = mid;
        } else {
            hi_db = mid;
        }
    }
    Ok(SnrValue::from_db(0.5 * (lo_db + hi_db)))
}

/// Symbol rate and OSNR reference bandwidth used for the
/// SNR_ASE → OSNR conversion.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BandwidthPair {
    /// Symbol rate B_e, Hz.
    pub baud_hz: f64,
    /// OSNR reference bandwidth B_o, Hz (0.1 nm ≈ 12.5 GHz at 1550 nm).
    pub reference_hz: f64,
}

impl BandwidthPair {
    pub fn new(baud_hz: f64, reference_hz: f64) -> Result<Self> {
        if baud_hz <= 0.0 || reference_hz <= 0.0 {
            return Err(Error::domain("bandwidths must be positive".to_string()));
        }
        Ok(BandwidthPair {
            baud_hz,
            reference_hz,
        })
    }

    /// dB shift applied when converting SNR_ASE to OSNR.
    pub fn osnr_offset_db(&self) -> f64 {
        10.0 * (self.baud_hz / self.reference_hz).log10()
    }
}

/// OSNR = SNR_ASE · (B_e/B_o).
pub fn osnr_from_snr_ase(snr_ase: SnrValue, bw: &BandwidthPair) -> SnrValue {
    SnrValue {
        linear: snr_ase.linear() * (bw.baud_hz / bw.reference_hz),
    }
}

/// Inverse of [`osnr_from_snr_ase`].
pub fn snr_ase_from_osnr(osnr: SnrValue, bw: &BandwidthPair) -> SnrValue {
    SnrValue {
        linear: osnr.linear() * (bw.reference_hz / bw.baud_hz),
    }
}
