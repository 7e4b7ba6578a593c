//! Randomized training/evaluation case construction: GN-model launch
//! powers, the steps model for WDM power profiles, link-delivered SNR,
//! ASE targets and the fully seeded [`Scenario`] record.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, Constellation, ModulationFormat, SnrValue};
use crate::phys;
use crate::routegen::{sample_route, FiberMarkovModel, FiberType, Route};

/// Transceiver operating modes (56 GS/s line rates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransmissionMode {
    #[serde(rename = "56-200G")]
    Mode200G,
    #[serde(rename = "56-300G")]
    Mode300G,
    #[serde(rename = "56-400G")]
    Mode400G,
}

impl TransmissionMode {
    pub const ALL: [TransmissionMode; 3] = [
        TransmissionMode::Mode200G,
        TransmissionMode::Mode300G,
        TransmissionMode::Mode400G,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransmissionMode::Mode200G => "56-200G",
            TransmissionMode::Mode300G => "56-300G",
            TransmissionMode::Mode400G => "56-400G",
        }
    }

    /// Modulation format per mode (information-rate consistent at
    /// 56 GBd dual polarization; overridable via the mode table).
    pub fn default_format(self) -> ModulationFormat {
        match self {
            TransmissionMode::Mode200G => ModulationFormat::Qpsk,
            TransmissionMode::Mode300G => ModulationFormat::Qam8,
            TransmissionMode::Mode400G => ModulationFormat::Qam16,
        }
    }

    /// Nominal (DGD ps, PDL dB) emulator means per mode.
    pub fn default_impairments(self) -> (f64, f64) {
        match self {
            TransmissionMode::Mode200G => (25.0, 2.0),
            TransmissionMode::Mode300G => (16.0, 1.3),
            TransmissionMode::Mode400G => (5.0, 0.67),
        }
    }
}

impl std::str::FromStr for TransmissionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "56-200G" | "200G" => Ok(TransmissionMode::Mode200G),
            "56-300G" | "300G" => Ok(TransmissionMode::Mode300G),
            "56-400G" | "400G" => Ok(TransmissionMode::Mode400G),
            other => Err(Error::domain(format!("unknown mode '{other}'"))),
        }
    }
}

/// One row of the mode table: format plus emulator impairment means.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModeParams {
    pub mode: TransmissionMode,
    pub format: ModulationFormat,
    pub dgd_mean_ps: f64,
    pub pdl_mean_db: f64,
}

impl ModeParams {
    pub fn nominal(mode: TransmissionMode) -> Self {
        let (dgd, pdl) = mode.default_impairments();
        ModeParams {
            mode,
            format: mode.default_format(),
            dgd_mean_ps: dgd,
            pdl_mean_db: pdl,
        }
    }
}

/// Per-span NLI efficiency η (1/W²) from the closed-form incoherent
/// GN expression for near-Nyquist WDM.
pub fn gn_eta(
    fiber: &FiberType,
    span_length_km: f64,
    baud_hz: f64,
    n_channels: usize,
    spacing_hz: f64,
) -> Result<f64> {
    fiber.validate()?;
    if span_length_km <= 0.0 || baud_hz <= 0.0 || n_channels == 0 || spacing_hz <= 0.0 {
        return Err(Error::domain("invalid GN-model arguments".to_string()));
    }
    let alpha = fiber.alpha_per_km() / 1e3; // 1/m
    let length = span_length_km * 1e3;
    let l_eff = (1.0 - (-alpha * length).exp()) / alpha;
    let l_eff_a = 1.0 / alpha;
    let beta2 = (crate::routegen::beta2_from_dispersion(
        fiber.dispersion_ps_nm_km,
        phys::REFERENCE_WAVELENGTH_NM,
    ) * 1e-27)
        .abs();
    let gamma = fiber.gamma_per_w_km / 1e3;
    let b_wdm = n_channels as f64 * spacing_hz;
    let arg = (std::f64::consts::PI * std::f64::consts::PI / 2.0) * beta2 * l_eff_a * b_wdm * b_wdm;
    let eta = (8.0 / 27.0) * gamma * gamma * l_eff * l_eff * arg.asinh()
        / (std::f64::consts::PI * beta2 * l_eff_a * baud_hz * baud_hz);
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::domain(format!("non-positive NLI efficiency {eta}")));
    }
    Ok(eta)
}

/// Per-span ASE power over the symbol-rate bandwidth, W:
/// (G−1)·h·ν·NF·B_e with the gain exactly offsetting the span loss.
pub fn span_ase_power_w(fiber: &FiberType, span_length_km: f64, baud_hz: f64, nf_db: f64) -> f64 {
    let gain = 10f64.powf(fiber.loss_db_km * span_length_km / 10.0);
    let nf = 10f64.powf(nf_db / 10.0);
    (gain - 1.0) * phys::PLANCK * phys::carrier_frequency_hz() * nf * baud_hz
}

/// GN-model optimal per-channel launch power, dBm: the power where the
/// cubic NLI equals half the per-span ASE, P_opt = (P_ASE/2η)^(1/3).
pub fn gn_optimal_power_dbm(
    fiber: &FiberType,
    span_length_km: f64,
    baud_hz: f64,
    n_channels: usize,
    spacing_hz: f64,
    nf_db: f64,
) -> Result<f64> {
    let eta = gn_eta(fiber, span_length_km, baud_hz, n_channels, spacing_hz)?;
    let p_ase = span_ase_power_w(fiber, span_length_km, baud_hz, nf_db);
    let p_opt_w = (p_ase / (2.0 * eta)).powf(1.0 / 3.0);
    Ok(10.0 * (p_opt_w * 1e3).log10())
}

/// Record of one steps-model draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepsModelDraw {
    pub n_channels: usize,
    /// Drawn group count M ~ U{1, N}; the realized partition may have
    /// fewer groups when an early draw consumes the remaining channels.
    pub m_groups: usize,
    pub group_sizes: Vec<usize>,
    pub group_powers_dbm: Vec<f64>,
}

/// The steps model: N channels split into M ~ U{1,N} adjacent groups
/// (sizes drawn sequentially from U{1, remaining}, final group takes
/// the remainder), each group's power drawn once from
/// Normal(base − offset, σ) dB and shared by its channels.
pub fn steps_model_powers(
    seed: u64,
    n_channels: usize,
    base_power_dbm: impl Fn(usize) -> f64,
    offset_db: f64,
    sigma_db: f64,
) -> Result<(Vec<f64>, StepsModelDraw)> {
    if n_channels == 0 {
        return Err(Error::domain("steps model needs >= 1 channel".to_string()));
    }
    if sigma_db < 0.0 {
        return Err(Error::domain("sigma must be >= 0".to_string()));
    }
    let mut rng = crate::derive_rng(seed, 0, crate::streams::POWERS);
    let m = rng.random_range(1..=n_channels);
    let mut sizes = Vec::new();
    let mut remaining = n_channels;
    for g in 0..m {
        if remaining == 0 {
            break;
        }
        let size = if g == m - 1 {
            remaining
        } else {
            rng.random_range(1..=remaining)
        };
        sizes.push(size);
        remaining -= size;
    }
    let normal = Normal::new(0.0, sigma_db).map_err(|e| Error::domain(e.to_string()))?;
    let mut powers = Vec::with_capacity(n_channels);
    let mut group_powers = Vec::with_capacity(sizes.len());
    let mut channel = 0usize;
    for &size in &sizes {
        let p = base_power_dbm(channel) - offset_db + normal.sample(&mut rng);
        group_powers.push(p);
        for _ in 0..size {
            powers.push(p);
            channel += 1;
        }
    }
    Ok((
        powers,
        StepsModelDraw {
            n_channels,
            m_groups: m,
            group_sizes: sizes,
            group_powers_dbm: group_powers,
        },
    ))
}

/// ASE-only delivered SNR over the symbol-rate bandwidth for a uniform
/// launch power and nominal amplifiers (no nonlinearity).
pub fn link_delivered_snr(route: &Route, launch_power_dbm: f64, baud_hz: f64) -> Result<SnrValue> {
    link_delivered_snr_scaled(route, launch_power_dbm, baud_hz, &[])
}

/// Delivered SNR accounting for per-amplifier WDM power scale factors
/// (empty slice means a flat power map, the plain formula).
pub fn link_delivered_snr_scaled(
    route: &Route,
    launch_power_dbm: f64,
    baud_hz: f64,
    amp_scales_db: &[f64],
) -> Result<SnrValue> {
    if route.spans.is_empty() {
        return Err(Error::domain("route has no spans".to_string()));
    }
    if !amp_scales_db.is_empty() && amp_scales_db.len() != route.spans.len() - 1 {
        return Err(Error::domain("amp scale factor count mismatch".to_string()));
    }
    let p_launch = 10f64.powf(launch_power_dbm / 10.0) * 1e-3;
    // Work in receiver-referred units: divide each amplifier's ASE by
    // the cumulative scaling applied before it.
    let mut cum_scale = 1.0f64;
    let mut noise = 0.0f64;
    for (i, span) in route.spans.iter().enumerate() {
        let ase = span_ase_power_w(&span.fiber, span.length_km, baud_hz, span.amp_nf_db);
        noise += ase / cum_scale;
        if !amp_scales_db.is_empty() && i + 1 < route.spans.len() {
            cum_scale *= 10f64.powf(amp_scales_db[i] / 10.0);
        }
    }
    SnrValue::from_linear(p_launch / noise)
}

/// Uniform dB draw in [FEC threshold, delivered SNR]; a delivered SNR
/// at or below threshold rejects the scenario.
pub fn sample_target_snr_ase(
    seed: u64,
    delivered: SnrValue,
    fec_threshold: SnrValue,
) -> Result<SnrValue> {
    let lo = fec_threshold.db();
    let hi = delivered.db();
    if !(hi > lo) {
        return Err(Error::ScenarioRejected(format!(
            "delivered SNR {hi:.2} dB does not exceed the FEC threshold {lo:.2} dB"
        )));
    }
    let mut rng = crate::derive_rng(seed, 0, crate::streams::TARGET_SNR);
    Ok(SnrValue::from_db(rng.random_range(lo..hi)))
}

/// Per-amplifier WDM power scaling for mixed-fiber routes: the dB
/// ratio of the GN-optimal launch powers of the following and
/// preceding spans (0 dB everywhere on uniform routes).
pub fn amp_scale_factors_db(
    route: &Route,
    baud_hz: f64,
    n_channels: usize,
    spacing_hz: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(route.spans.len().saturating_sub(1));
    for pair in route.spans.windows(2) {
        let prev = gn_optimal_power_dbm(
            &pair[0].fiber,
            pair[0].length_km,
            baud_hz,
            n_channels,
            spacing_hz,
            pair[0].amp_nf_db,
        )?;
        let next = gn_optimal_power_dbm(
            &pair[1].fiber,
            pair[1].length_km,
            baud_hz,
            n_channels,
            spacing_hz,
            pair[1].amp_nf_db,
        )?;
        out.push(next - prev);
    }
    Ok(out)
}

/// How the per-channel launch powers of a case were drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseType {
    SingleChannel,
    EqualPowerWdm,
    StepsModelWdm,
}

/// Relative frequencies of the three case types.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CaseMix {
    pub single_channel: f64,
    pub equal_power: f64,
    pub steps_model: f64,
}

impl Default for CaseMix {
    fn default() -> Self {
        CaseMix {
            single_channel: 0.2,
            equal_power: 0.3,
            steps_model: 0.5,
        }
    }
}

/// Everything scenario construction needs; assembled from the config
/// file by the pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub route_model: FiberMarkovModel,
    pub min_spans: usize,
    pub max_spans: usize,
    pub channel_count: usize,
    pub spacing_hz: f64,
    pub baud_hz: f64,
    pub rolloff: f64,
    pub symbols_per_channel: usize,
    pub case_mix: CaseMix,
    /// Mode table with draw weights.
    pub modes: Vec<(ModeParams, f64)>,
    /// Offset below the GN optimum for the power mean, dB.
    pub power_offset_db: f64,
    /// Std of the group/common power draw, dB.
    pub power_sigma_db: f64,
    /// Pre-FEC BER defining the threshold SNR.
    pub fec_ber: f64,
    pub pattern_count: usize,
    pub emulator_segments: usize,
    /// Retries for rejected draws before giving up.
    pub max_retries: u32,
}

impl ScenarioConfig {
    fn validate(&self) -> Result<()> {
        self.route_model.validate()?;
        if self.min_spans == 0 || self.max_spans < self.min_spans {
            return Err(Error::domain("invalid span count range".to_string()));
        }
        if self.channel_count == 0 || self.channel_count % 2 == 0 {
            return Err(Error::domain(
                "channel count must be odd so the probe sits at band center".to_string(),
            ));
        }
        if !(self.fec_ber > 0.0 && self.fec_ber < 0.5) {
            return Err(Error::domain("FEC BER must lie in (0, 0.5)".to_string()));
        }
        if self.modes.is_empty() || self.modes.iter().all(|(_, w)| *w <= 0.0) {
            return Err(Error::domain("mode table must have positive weight".to_string()));
        }
        let mix = self.case_mix;
        if mix.single_channel < 0.0
            || mix.equal_power < 0.0
            || mix.steps_model < 0.0
            || mix.single_channel + mix.equal_power + mix.steps_model <= 0.0
        {
            return Err(Error::domain("case mix must be non-negative".to_string()));
        }
        Ok(())
    }
}

/// Sub-seeds bound to one scenario; every stochastic stage owns one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSeeds {
    pub route: u64,
    pub symbols: u64,
    pub powers: u64,
    pub emulator: u64,
    pub emulator_noise: u64,
    pub target: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn subseed(master: u64, index: u64, tag: u32) -> u64 {
    splitmix64(master ^ splitmix64(index ^ splitmix64(tag as u64)))
}

/// One complete training/evaluation case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub index: u64,
    pub master_seed: u64,
    pub case: CaseType,
    pub mode: TransmissionMode,
    pub format: ModulationFormat,
    pub route: Route,
    pub channel_count: usize,
    pub spacing_hz: f64,
    pub baud_hz: f64,
    pub rolloff: f64,
    pub probe_index: usize,
    pub symbols_per_channel: usize,
    pub launch_powers_dbm: Vec<f64>,
    pub steps_draw: Option<StepsModelDraw>,
    pub amp_scales_db: Vec<f64>,
    pub delivered_snr_db: f64,
    pub fec_threshold_db: f64,
    pub target_snr_ase_db: f64,
    pub dgd_mean_ps: f64,
    pub pdl_mean_db: f64,
    pub pattern_count: usize,
    pub emulator_segments: usize,
    pub seeds: ScenarioSeeds,
}

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

fn weighted_draw<T: Copy>(rng: &mut impl Rng, items: &[(T, f64)]) -> T {
    let total: f64 = items.iter().map(|(_, w)| w.max(0.0)).sum();
    let mut u: f64 = rng.random_range(0.0..total);
    for (item, w) in items {
        let w = w.max(0.0);
        if u < w {
            return *item;
        }
        u -= w;
    }
    items.last().expect("non-empty").0
}

/// Builds a scenario deterministically from (master_seed, index,
/// config). Rejected draws (delivered SNR below the FEC threshold)
/// retry with derived seeds up to `cfg.max_retries` times.
pub fn build_scenario(master_seed: u64, index: u64, cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut last_err = None;
    for attempt in 0..=cfg.max_retries {
        match try_build(master_seed, index, attempt, cfg) {
            Ok(s) => return Ok(s),
            Err(e @ Error::ScenarioRejected(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn try_build(master_seed: u64, index: u64, attempt: u32, cfg: &ScenarioConfig) -> Result<Scenario> {
    let tag = |stream: u32| stream + (attempt << 16);
    let seeds = ScenarioSeeds {
        route: subseed(master_seed, index, tag(crate::streams::ROUTE)),
        symbols: subseed(master_seed, index, tag(crate::streams::SYMBOLS)),
        powers: subseed(master_seed, index, tag(crate::streams::POWERS)),
        emulator: subseed(master_seed, index, tag(crate::streams::EMULATOR)),
        emulator_noise: subseed(master_seed, index, tag(crate::streams::EMULATOR_NOISE)),
        target: subseed(master_seed, index, tag(crate::streams::TARGET_SNR)),
    };
    let mut case_rng = crate::derive_rng(
        subseed(master_seed, index, tag(crate::streams::CASE)),
        0,
        crate::streams::CASE,
    );
    let mix = cfg.case_mix;
    let case = weighted_draw(
        &mut case_rng,
        &[
            (CaseType::SingleChannel, mix.single_channel),
            (CaseType::EqualPowerWdm, mix.equal_power),
            (CaseType::StepsModelWdm, mix.steps_model),
        ],
    );
    let mode_params = weighted_draw(
        &mut case_rng,
        &cfg.modes
            .iter()
            .map(|(m, w)| (*m, *w))
            .collect::<Vec<_>>(),
    );
    let n_spans = case_rng.random_range(cfg.min_spans..=cfg.max_spans);
    let route = sample_route(seeds.route, &cfg.route_model, n_spans)?;

    let channel_count = match case {
        CaseType::SingleChannel => 1,
        _ => cfg.channel_count,
    };
    let probe_index = channel_count / 2;

    let first = &route.spans[0];
    let base_dbm = gn_optimal_power_dbm(
        &first.fiber,
        first.length_km,
        cfg.baud_hz,
        channel_count,
        cfg.spacing_hz,
        first.amp_nf_db,
    )?;

    let (launch_powers_dbm, steps_draw) = match case {
        CaseType::StepsModelWdm => {
            let (powers, draw) = steps_model_powers(
                seeds.powers,
                channel_count,
                |_| base_dbm,
                cfg.power_offset_db,
                cfg.power_sigma_db,
            )?;
            (powers, Some(draw))
        }
        _ => {
            let mut rng = crate::derive_rng(seeds.powers, 0, crate::streams::POWERS);
            let normal =
                Normal::new(0.0, cfg.power_sigma_db).map_err(|e| Error::domain(e.to_string()))?;
            let common = base_dbm - cfg.power_offset_db + normal.sample(&mut rng);
            (vec![common; channel_count], None)
        }
    };

    let amp_scales_db = if route_is_uniform(&route) {
        vec![0.0; route.spans.len() - 1]
    } else {
        amp_scale_factors_db(&route, cfg.baud_hz, channel_count, cfg.spacing_hz)?
    };

    let delivered = link_delivered_snr_scaled(
        &route,
        launch_powers_dbm[probe_index],
        cfg.baud_hz,
        &amp_scales_db,
    )?;
    let constellation = Constellation::new(mode_params.format);
    let threshold = metrics::esnr_from_ber(cfg.fec_ber, &constellation)?;
    let target = sample_target_snr_ase(seeds.target, delivered, threshold)?;

    Ok(Scenario {
        schema_version: SCENARIO_SCHEMA_VERSION,
        index,
        master_seed,
        case,
        mode: mode_params.mode,
        format: mode_params.format,
        route,
        channel_count,
        spacing_hz: cfg.spacing_hz,
        baud_hz: cfg.baud_hz,
        rolloff: cfg.rolloff,
        probe_index,
        symbols_per_channel: cfg.symbols_per_channel,
        launch_powers_dbm,
        steps_draw,
        amp_scales_db,
        delivered_snr_db: delivered.db(),
        fec_threshold_db: threshold.db(),
        target_snr_ase_db: target.db(),
        dgd_mean_ps: mode_params.dgd_mean_ps,
        pdl_mean_db: mode_params.pdl_mean_db,
        pattern_count: cfg.pattern_count,
        emulator_segments: cfg.emulator_segments,
        seeds,
    })
}

fn route_is_uniform(route: &Route) -> bool {
    route.spans.windows(2).all(|p| {
        p[0].fiber.kind == p[1].fiber.kind
            && p[0].length_km == p[1].length_km
            && p[0].amp_nf_db == p[1].amp_nf_db
    })
}
