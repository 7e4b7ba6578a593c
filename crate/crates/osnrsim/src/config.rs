//! Run configuration: one TOML file with sections for the fiber
//! catalog, Markov route model, channel plan, mode table, emulator,
//! split-step solver, receiver, NN training and the validity gate.
//! Every field has a default; a `schema_version` field is required
//! when loading from a file.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimator::ValidityConfig;
use crate::metrics::BandwidthPair;
use crate::nn::TrainConfig;
use crate::routegen::{default_catalog, FiberKind, FiberMarkovModel, FiberType, SpanLengthDist};
use crate::rxdsp::{DspConfig, NoiseReference};
use crate::scenario::{CaseMix, ModeParams, ScenarioConfig, TransmissionMode};
use crate::ssfprop::SsfConfig;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelPlanSection {
    pub count: usize,
    pub spacing_ghz: f64,
    pub baud_gbd: f64,
    pub rolloff: f64,
    pub symbols_per_channel: usize,
}

impl Default for ChannelPlanSection {
    fn default() -> Self {
        ChannelPlanSection {
            count: 13,
            spacing_ghz: 62.5,
            baud_gbd: 56.0,
            rolloff: 0.1,
            symbols_per_channel: 1 << 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSection {
    pub min_spans: usize,
    pub max_spans: usize,
    pub case_mix: CaseMix,
    pub power_offset_db: f64,
    pub power_sigma_db: f64,
    pub fec_ber: f64,
    pub max_retries: u32,
    /// Draw weights per mode name; modes absent from the map get 0.
    pub mode_weights: std::collections::BTreeMap<String, f64>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let mut mode_weights = std::collections::BTreeMap::new();
        mode_weights.insert("56-200G".to_string(), 1.0);
        ScenarioSection {
            min_spans: 1,
            max_spans: 15,
            case_mix: CaseMix::default(),
            power_offset_db: 2.0,
            power_sigma_db: 2.0,
            fec_ber: 0.032,
            max_retries: 16,
            mode_weights,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RouteSection {
    pub amp_nf_db: f64,
    pub fibers: Vec<FiberType>,
    pub initial: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub lengths: Vec<SpanLengthDist>,
    /// Convenience restriction: when set, initial/transition are
    /// replaced by a chain over just these types.
    pub restrict_to: Option<Vec<String>>,
    pub stay_probability: f64,
}

impl Default for RouteSection {
    fn default() -> Self {
        let model = FiberMarkovModel::default();
        RouteSection {
            amp_nf_db: model.amp_nf_db,
            fibers: default_catalog(),
            initial: model.initial,
            transition: model.transition,
            lengths: model.lengths,
            restrict_to: None,
            stay_probability: 0.9,
        }
    }
}

impl RouteSection {
    pub fn to_model(&self) -> Result<FiberMarkovModel> {
        let mut model = FiberMarkovModel {
            catalog: self.fibers.clone(),
            initial: self.initial.clone(),
            transition: self.transition.clone(),
            lengths: self.lengths.clone(),
            amp_nf_db: self.amp_nf_db,
        };
        if let Some(names) = &self.restrict_to {
            let kinds: Vec<FiberKind> = names
                .iter()
                .map(|n| {
                    FiberKind::ALL
                        .iter()
                        .copied()
                        .find(|k| k.name().eq_ignore_ascii_case(n))
                        .ok_or_else(|| Error::config(format!("unknown fiber type '{n}'")))
                })
                .collect::<Result<_>>()?;
            if kinds.is_empty() {
                return Err(Error::config("restrict_to must not be empty".to_string()));
            }
            let restricted =
                FiberMarkovModel::restricted(&kinds, self.stay_probability, self.amp_nf_db);
            model.initial = restricted.initial;
            model.transition = restricted.transition;
        }
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModeSection {
    pub mode: String,
    pub format: String,
    pub dgd_mean_ps: f64,
    pub pdl_mean_db: f64,
}

impl Default for ModeSection {
    fn default() -> Self {
        ModeSection {
            mode: "56-200G".to_string(),
            format: "QPSK".to_string(),
            dgd_mean_ps: 25.0,
            pdl_mean_db: 2.0,
        }
    }
}

fn default_mode_table() -> Vec<ModeSection> {
    TransmissionMode::ALL
        .iter()
        .map(|&m| {
            let p = ModeParams::nominal(m);
            ModeSection {
                mode: m.name().to_string(),
                format: p.format.name().to_string(),
                dgd_mean_ps: p.dgd_mean_ps,
                pdl_mean_db: p.pdl_mean_db,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EmulatorSection {
    pub segments: usize,
    pub patterns: usize,
}

impl Default for EmulatorSection {
    fn default() -> Self {
        EmulatorSection {
            segments: 50,
            patterns: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SsfSection {
    /// Adaptive cap on the nonlinear phase per step, rad.
    pub max_phase_rad: f64,
    /// Fixed step in km; overrides the adaptive policy when set.
    pub fixed_step_km: Option<f64>,
}

impl Default for SsfSection {
    fn default() -> Self {
        SsfSection {
            max_phase_rad: 3e-3,
            fixed_step_km: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RxDspSection {
    pub eq_taps: usize,
    pub eq_ridge: f64,
    pub eq_train_symbols: usize,
    pub phase_window: usize,
    pub decision_directed: bool,
}

impl Default for RxDspSection {
    fn default() -> Self {
        let d = DspConfig::default();
        RxDspSection {
            eq_taps: d.eq_taps,
            eq_ridge: d.eq_ridge,
            eq_train_symbols: d.eq_train_symbols,
            phase_window: d.phase_window,
            decision_directed: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NnSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub weight_decay: f64,
    /// Fraction of the dataset reserved for testing by `train`.
    pub test_fraction: f64,
}

impl Default for NnSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        NnSection {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            validation_fraction: t.validation_fraction,
            weight_decay: t.weight_decay,
            test_fraction: 0.22,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ValiditySection {
    pub min_gap_db: f64,
    pub max_gap_db: f64,
}

impl Default for ValiditySection {
    fn default() -> Self {
        let v = ValidityConfig::default();
        ValiditySection {
            min_gap_db: v.min_gap_db,
            max_gap_db: v.max_gap_db,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OsnrSection {
    pub reference_bandwidth_ghz: f64,
}

impl Default for OsnrSection {
    fn default() -> Self {
        OsnrSection {
            reference_bandwidth_ghz: 12.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub channel_plan: ChannelPlanSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub route: RouteSection,
    #[serde(default = "default_mode_table")]
    pub modes: Vec<ModeSection>,
    #[serde(default)]
    pub emulator: EmulatorSection,
    #[serde(default)]
    pub ssf: SsfSection,
    #[serde(default)]
    pub rxdsp: RxDspSection,
    #[serde(default)]
    pub nn: NnSection,
    #[serde(default)]
    pub validity: ValiditySection,
    #[serde(default)]
    pub osnr: OsnrSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            schema_version: CONFIG_SCHEMA_VERSION,
            channel_plan: ChannelPlanSection::default(),
            scenario: ScenarioSection::default(),
            route: RouteSection::default(),
            modes: default_mode_table(),
            emulator: EmulatorSection::default(),
            ssf: SsfSection::default(),
            rxdsp: RxDspSection::default(),
            nn: NnSection::default(),
            validity: ValiditySection::default(),
            osnr: OsnrSection::default(),
        }
    }
}

impl Config {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Config> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::config(format!("{}: {e}", path.as_ref().display())))?;
        let cfg: Config =
            toml::from_str(&text).map_err(|e| Error::config(format!("parse: {e}")))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported config schema_version {} (this build expects {})",
                cfg.schema_version, CONFIG_SCHEMA_VERSION
            )));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn baud_hz(&self) -> f64 {
        self.channel_plan.baud_gbd * 1e9
    }

    pub fn bandwidth_pair(&self) -> Result<BandwidthPair> {
        BandwidthPair::new(self.baud_hz(), self.osnr.reference_bandwidth_ghz * 1e9)
    }

    pub fn mode_table(&self) -> Result<Vec<(ModeParams, f64)>> {
        let mut out = Vec::new();
        for entry in &self.modes {
            let mode: TransmissionMode = entry.mode.parse()?;
            let format = entry.format.parse()?;
            let weight = self
                .scenario
                .mode_weights
                .get(&entry.mode)
                .copied()
                .unwrap_or(0.0);
            out.push((
                ModeParams {
                    mode,
                    format,
                    dgd_mean_ps: entry.dgd_mean_ps,
                    pdl_mean_db: entry.pdl_mean_db,
                },
                weight,
            ));
        }
        if out.iter().all(|(_, w)| *w <= 0.0) {
            return Err(Error::config(
                "scenario.mode_weights assigns no positive weight to any mode".to_string(),
            ));
        }
        Ok(out)
    }

    pub fn scenario_config(&self) -> Result<ScenarioConfig> {
        Ok(ScenarioConfig {
            route_model: self.route.to_model()?,
            min_spans: self.scenario.min_spans,
            max_spans: self.scenario.max_spans,
            channel_count: self.channel_plan.count,
            spacing_hz: self.channel_plan.spacing_ghz * 1e9,
            baud_hz: self.baud_hz(),
            rolloff: self.channel_plan.rolloff,
            symbols_per_channel: self.channel_plan.symbols_per_channel,
            case_mix: self.scenario.case_mix,
            modes: self.mode_table()?,
            power_offset_db: self.scenario.power_offset_db,
            power_sigma_db: self.scenario.power_sigma_db,
            fec_ber: self.scenario.fec_ber,
            pattern_count: self.emulator.patterns,
            emulator_segments: self.emulator.segments,
            max_retries: self.scenario.max_retries,
        })
    }

    pub fn ssf_config(&self) -> SsfConfig {
        match self.ssf.fixed_step_km {
            Some(step) => SsfConfig::fixed_km(step),
            None => SsfConfig::max_phase(self.ssf.max_phase_rad),
        }
    }

    pub fn dsp_config(&self) -> DspConfig {
        DspConfig {
            eq_taps: self.rxdsp.eq_taps,
            eq_ridge: self.rxdsp.eq_ridge,
            eq_train_symbols: self.rxdsp.eq_train_symbols,
            phase_window: self.rxdsp.phase_window,
            rolloff: self.channel_plan.rolloff,
            reference: if self.rxdsp.decision_directed {
                NoiseReference::DecisionDirected
            } else {
                NoiseReference::TransmitKnown
            },
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.nn.learning_rate,
            batch_size: self.nn.batch_size,
            max_epochs: self.nn.max_epochs,
            patience: self.nn.patience,
            validation_fraction: self.nn.validation_fraction,
            weight_decay: self.nn.weight_decay,
            seed,
        }
    }

    pub fn validity_config(&self) -> ValidityConfig {
        ValidityConfig {
            min_gap_db: self.validity.min_gap_db,
            max_gap_db: self.validity.max_gap_db,
        }
    }
}
