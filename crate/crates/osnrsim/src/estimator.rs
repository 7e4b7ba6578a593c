//! The in-service OSNR estimate: external SNR extraction from the
//! measured ESNR, removal of the NN-predicted nonlinear SNR, the
//! validity gate and the OSNR conversion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{self, default_c_indices};
use crate::metrics::{osnr_from_snr_ase, BandwidthPair, SnrValue};
use crate::nn::{self, ModelWeights};
use crate::rxdsp::{LinkMetadata, SymbolFrame};

/// Modem calibration factors: eye closure (multiplicative on the
/// ESNR) and the signal-to-implementation-noise ratio. Simulated
/// captures default to EC = 1 and infinite SNR_imp; nonunity values
/// emulate hardware calibration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalibrationFactors {
    pub eye_closure: f64,
    pub snr_imp: SnrValue,
}

impl Default for CalibrationFactors {
    fn default() -> Self {
        CalibrationFactors {
            eye_closure: 1.0,
            snr_imp: SnrValue::infinite(),
        }
    }
}

impl CalibrationFactors {
    pub fn validate(&self) -> Result<()> {
        if !(self.eye_closure > 0.0 && self.eye_closure.is_finite()) {
            return Err(Error::domain("eye closure must be positive".to_string()));
        }
        Ok(())
    }
}

/// External SNR from the effective SNR and modem calibration:
/// 1/SNR_ext = 1/(EC·ESNR) − 1/SNR_imp.
pub fn snr_ext_from_esnr(esnr: SnrValue, cal: &CalibrationFactors) -> Result<SnrValue> {
    cal.validate()?;
    // calibration-free path is an exact identity
    if cal.eye_closure == 1.0 && !cal.snr_imp.is_finite() {
        return Ok(esnr);
    }
    let inv_total = 1.0 / (cal.eye_closure * esnr.linear());
    let inv_imp = 1.0 / cal.snr_imp.linear();
    let inv_ext = inv_total - inv_imp;
    if inv_ext <= 0.0 {
        return Err(Error::ImplementationNoiseExceedsTotal {
            ec_esnr: cal.eye_closure * esnr.linear(),
            snr_imp: cal.snr_imp.linear(),
        });
    }
    // inv_ext == 0 only when both terms are infinite-SNR; 1/0 -> inf
    SnrValue::from_linear(1.0 / inv_ext).or_else(|_| Ok(SnrValue::infinite()))
}

/// ASE-only SNR after removing the nonlinear noise:
/// 1/SNR_ASE = 1/SNR_ext − 1/SNR_NL.
pub fn snr_ase_from_ext(snr_ext: SnrValue, snr_nl: SnrValue) -> Result<SnrValue> {
    if snr_nl.linear() <= snr_ext.linear() {
        return Err(Error::NonPhysicalNonlinearSnr {
            snr_nl: snr_nl.linear(),
            snr_ext: snr_ext.linear(),
        });
    }
    let inv = 1.0 / snr_ext.linear() - 1.0 / snr_nl.linear();
    if inv <= 0.0 {
        // both SNRs infinite: no noise at all
        return Ok(SnrValue::infinite());
    }
    SnrValue::from_linear(1.0 / inv)
}

/// Why an estimate was flagged invalid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityReason {
    Valid,
    /// Gap below the minimum: the predicted nonlinear SNR sits at or
    /// under the external SNR, which no physical link produces.
    NlBelowExt,
    /// Gap above the maximum: the predicted nonlinear noise is
    /// implausibly small for the observed external SNR.
    NlImplausiblySmall,
}

/// Bounds on the dB gap (SNR_NL − SNR_ext) a real link can exhibit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ValidityConfig {
    pub min_gap_db: f64,
    pub max_gap_db: f64,
}

impl Default for ValidityConfig {
    fn default() -> Self {
        ValidityConfig {
            min_gap_db: 0.2,
            max_gap_db: 25.0,
        }
    }
}

impl ValidityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_gap_db < self.max_gap_db) {
            return Err(Error::domain(
                "validity gate needs min_gap_db < max_gap_db".to_string(),
            ));
        }
        Ok(())
    }
}

/// Flags estimates whose NN-predicted nonlinear SNR is outside the
/// range expected from the external SNR.
pub fn validity_gate(snr_nl_db: f64, snr_ext_db: f64, cfg: &ValidityConfig) -> (bool, ValidityReason) {
    let gap = snr_nl_db - snr_ext_db;
    if gap < cfg.min_gap_db {
        (false, ValidityReason::NlBelowExt)
    } else if gap > cfg.max_gap_db {
        (false, ValidityReason::NlImplausiblySmall)
    } else {
        (true, ValidityReason::Valid)
    }
}

/// A complete OSNR estimate with every intermediate SNR retained.
/// Invalid estimates keep their fields populated (flagging, not
/// suppression); when Eq. (2) has no physical solution the ASE terms
/// fall back to the external SNR.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OsnrEstimate {
    pub esnr_db: f64,
    pub snr_ext_db: f64,
    pub snr_nl_db: f64,
    pub snr_ase_db: f64,
    pub osnr_db: f64,
    pub valid: bool,
    pub reason: ValidityReason,
}

/// Chains the full estimate from a processed capture: measured ESNR →
/// Eq. (1) → feature extraction → NN prediction of SNR_NL → validity
/// gate → Eq. (2) → OSNR conversion.
pub fn estimate_osnr(
    frame: &SymbolFrame,
    meta: &LinkMetadata,
    cal: &CalibrationFactors,
    model: &ModelWeights,
    bw: &BandwidthPair,
    gate: &ValidityConfig,
) -> Result<OsnrEstimate> {
    gate.validate()?;
    if frame.len() < features::MIN_SYMBOLS {
        return Err(Error::domain(format!(
            "capture carries {} symbols; need at least {}",
            frame.len(),
            features::MIN_SYMBOLS
        )));
    }
    let esnr = frame.esnr;
    let snr_ext = snr_ext_from_esnr(esnr, cal)?;
    let cc = features::c_coefficients(frame, &default_c_indices())?;
    let dbl = features::doublets(frame, 8)?;
    let fv = features::assemble_features(&cc, &dbl, meta, esnr)?;
    let snr_nl_db = nn::forward(model, &fv)?;
    let snr_nl = SnrValue::from_db(snr_nl_db);
    let (valid, reason) = validity_gate(snr_nl_db, snr_ext.db(), gate);
    let snr_ase = snr_ase_from_ext(snr_ext, snr_nl).unwrap_or(snr_ext);
    let osnr = osnr_from_snr_ase(snr_ase, bw);
    Ok(OsnrEstimate {
        esnr_db: esnr.db(),
        snr_ext_db: snr_ext.db(),
        snr_nl_db,
        snr_ase_db: snr_ase.db(),
        osnr_db: osnr.db(),
        valid,
        reason,
    })
}
