//! Simulation, training and estimation toolkit for in-service OSNR
//! monitoring on coherent WDM links.
//!
//! The crate covers the full loop:
//!
//! * synthesize randomized multi-span fiber scenarios ([`routegen`],
//!   [`scenario`]),
//! * generate and propagate dual-polarization WDM waveforms with a
//!   split-step Manakov solver ([`txmodel`], [`ssfprop`]),
//! * emulate polarization impairments and amplifier noise on the
//!   received channel ([`emulator`]),
//! * recover symbols with a floating-point receiver chain and extract
//!   nonlinear-noise correlation features ([`rxdsp`], [`features`]),
//! * train a small MLP to predict the nonlinear SNR ([`nn`]),
//! * combine everything into an in-service OSNR estimate via the SNR
//!   decomposition ([`estimator`], [`metrics`]).
//!
//! Every capability has a runnable demo under `examples/`; the
//! `osnrsim` binary exposes the batch pipeline (`generate`, `train`,
//! `eval`, `estimate`, `report`).

pub mod config;
pub mod emulator;
pub mod error;
pub mod estimator;
pub mod features;
pub mod field;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod routegen;
pub mod rxdsp;
pub mod scenario;
pub mod ssfprop;
pub mod txmodel;

pub use error::{Error, Result};

/// Physical constants shared across modules (SI units).
pub mod phys {
    /// Speed of light in vacuum, m/s.
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    /// Planck constant, J·s.
    pub const PLANCK: f64 = 6.626_070_15e-34;
    /// Reference carrier wavelength, nm (C-band center).
    pub const REFERENCE_WAVELENGTH_NM: f64 = 1550.0;

    /// Optical carrier frequency for the reference wavelength, Hz.
    pub fn carrier_frequency_hz() -> f64 {
        SPEED_OF_LIGHT / (REFERENCE_WAVELENGTH_NM * 1e-9)
    }
}

/// Derives an independent, reproducible RNG stream from a master seed,
/// a record index and a stream tag. Streams with different tags are
/// statistically independent; the mapping is fixed for all time so
/// datasets regenerate byte-identically.
pub fn derive_rng(master_seed: u64, index: u64, stream: u32) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&index.to_le_bytes());
    seed[16..20].copy_from_slice(&stream.to_le_bytes());
    seed[20..28].copy_from_slice(&0x9e37_79b9_7f4a_7c15u64.to_le_bytes());
    rand_chacha::ChaCha8Rng::from_seed(seed)
}

/// Stream tags for [`derive_rng`]. Kept in one place so no two
/// subsystems ever collide on a stream.
pub mod streams {
    pub const ROUTE: u32 = 1;
    pub const SYMBOLS: u32 = 2;
    pub const EMULATOR: u32 = 3;
    pub const POWERS: u32 = 4;
    pub const TARGET_SNR: u32 = 5;
    pub const CASE: u32 = 6;
    pub const EMULATOR_NOISE: u32 = 7;
}
