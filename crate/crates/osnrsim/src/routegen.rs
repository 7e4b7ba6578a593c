//! Randomized multi-span fiber routes from a Markov fiber-type model.
//!
//! The transition probabilities and span-length distributions shipped
//! here are nominal placeholders (real carrier statistics are
//! proprietary); everything is overridable through the config file.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phys;

/// The seven deployed fiber families modeled by the route generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum FiberKind {
    ELEAF,
    LEAF,
    NDSF,
    TERALIGHT,
    TWc,
    TWP,
    TWRS,
}

impl FiberKind {
    pub const ALL: [FiberKind; 7] = [
        FiberKind::ELEAF,
        FiberKind::LEAF,
        FiberKind::NDSF,
        FiberKind::TERALIGHT,
        FiberKind::TWc,
        FiberKind::TWP,
        FiberKind::TWRS,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            FiberKind::ELEAF => "ELEAF",
            FiberKind::LEAF => "LEAF",
            FiberKind::NDSF => "NDSF",
            FiberKind::TERALIGHT => "TERALIGHT",
            FiberKind::TWc => "TWc",
            FiberKind::TWP => "TWP",
            FiberKind::TWRS => "TWRS",
        }
    }
}

/// Physical parameters of one fiber family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FiberType {
    pub kind: FiberKind,
    /// Chromatic dispersion D, ps/nm/km.
    pub dispersion_ps_nm_km: f64,
    /// Attenuation, dB/km.
    pub loss_db_km: f64,
    /// Kerr nonlinear coefficient γ, 1/(W·km).
    pub gamma_per_w_km: f64,
}

impl FiberType {
    pub fn validate(&self) -> Result<()> {
        if self.loss_db_km <= 0.0 {
            return Err(Error::domain("fiber loss must be positive".to_string()));
        }
        if self.gamma_per_w_km <= 0.0 {
            return Err(Error::domain("fiber gamma must be positive".to_string()));
        }
        if self.dispersion_ps_nm_km == 0.0 {
            return Err(Error::domain("fiber dispersion must be nonzero".to_string()));
        }
        Ok(())
    }

    /// Power attenuation coefficient, 1/km.
    pub fn alpha_per_km(&self) -> f64 {
        self.loss_db_km * std::f64::consts::LN_10 / 10.0
    }
}

/// Nominal catalog values (textbook figures, not measured data).
pub fn default_catalog() -> Vec<FiberType> {
    let entry = |kind, d, loss, gamma| FiberType {
        kind,
        dispersion_ps_nm_km: d,
        loss_db_km: loss,
        gamma_per_w_km: gamma,
    };
    vec![
        entry(FiberKind::ELEAF, 4.2, 0.20, 1.5),
        entry(FiberKind::LEAF, 4.2, 0.20, 1.5),
        entry(FiberKind::NDSF, 17.0, 0.20, 1.3),
        entry(FiberKind::TERALIGHT, 8.0, 0.20, 1.4),
        entry(FiberKind::TWc, 3.0, 0.25, 2.0),
        entry(FiberKind::TWP, 2.8, 0.21, 1.9),
        entry(FiberKind::TWRS, 4.5, 0.20, 1.7),
    ]
}

/// One amplified fiber span. The amplifier exactly offsets the span
/// loss and adds ASE according to its noise figure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Span {
    pub fiber: FiberType,
    pub length_km: f64,
    /// Amplifier gain, dB (equals span loss).
    pub amp_gain_db: f64,
    /// Amplifier noise figure, dB.
    pub amp_nf_db: f64,
}

impl Span {
    pub fn new(fiber: FiberType, length_km: f64, amp_nf_db: f64) -> Result<Self> {
        if length_km <= 0.0 {
            return Err(Error::domain("span length must be positive".to_string()));
        }
        Ok(Span {
            fiber,
            length_km,
            amp_gain_db: fiber.loss_db_km * length_km,
            amp_nf_db,
        })
    }
}

/// An ordered list of amplified spans.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Route {
    pub spans: Vec<Span>,
}

impl Route {
    pub fn total_length_km(&self) -> f64 {
        self.spans.iter().map(|s| s.length_km).sum()
    }

    /// Σ D_i · L_i, ps/nm.
    pub fn cumulative_dispersion_ps_nm(&self) -> f64 {
        self.spans
            .iter()
            .map(|s| s.fiber.dispersion_ps_nm_km * s.length_km)
            .sum()
    }
}

/// Σ D_i · L_i over a route, ps/nm.
pub fn cumulative_dispersion(route: &Route) -> f64 {
    route.cumulative_dispersion_ps_nm()
}

/// Converts dispersion D (ps/nm/km) at wavelength λ (nm) to the group
/// velocity dispersion β₂ in ps²/km: β₂ = −D·λ²/(2πc).
pub fn beta2_from_dispersion(d_ps_nm_km: f64, lambda_nm: f64) -> f64 {
    // D in SI is d·1e-6 s/m²; λ² in m² is λ_nm²·1e-18; the result in
    // s²/m times 1e27 gives ps²/km.
    -d_ps_nm_km * lambda_nm * lambda_nm / (2.0 * std::f64::consts::PI * phys::SPEED_OF_LIGHT)
        * 1e3
}

/// Truncated-normal span length distribution for one fiber type, km.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpanLengthDist {
    pub mean_km: f64,
    pub std_km: f64,
    pub min_km: f64,
    pub max_km: f64,
}

impl Default for SpanLengthDist {
    fn default() -> Self {
        SpanLengthDist {
            mean_km: 80.0,
            std_km: 20.0,
            min_km: 20.0,
            max_km: 120.0,
        }
    }
}

impl SpanLengthDist {
    fn validate(&self) -> Result<()> {
        if !(self.min_km > 0.0 && self.min_km < self.max_km) {
            return Err(Error::domain(
                "span length bounds must satisfy 0 < min < max".to_string(),
            ));
        }
        if self.std_km < 0.0 {
            return Err(Error::domain("span length std must be >= 0".to_string()));
        }
        if self.mean_km < self.min_km || self.mean_km > self.max_km {
            return Err(Error::domain(
                "span length mean must lie within [min, max]".to_string(),
            ));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.std_km == 0.0 {
            return self.mean_km;
        }
        let normal = Normal::new(self.mean_km, self.std_km).expect("validated");
        for _ in 0..1000 {
            let v = normal.sample(rng);
            if v >= self.min_km && v <= self.max_km {
                return v;
            }
        }
        // Pathological configs (bounds far in the tail) fall back to
        // the nearest bound after bounded rejection.
        self.mean_km.clamp(self.min_km, self.max_km)
    }
}

/// Markov model over fiber types plus per-type span-length
/// distributions and the amplifier noise figure applied to every span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiberMarkovModel {
    pub catalog: Vec<FiberType>,
    /// Initial distribution over `FiberKind::ALL` order.
    pub initial: Vec<f64>,
    /// Row-stochastic transition matrix in `FiberKind::ALL` order.
    pub transition: Vec<Vec<f64>>,
    /// Span-length distribution per type, `FiberKind::ALL` order.
    pub lengths: Vec<SpanLengthDist>,
    pub amp_nf_db: f64,
}

impl Default for FiberMarkovModel {
    fn default() -> Self {
        let n = FiberKind::ALL.len();
        let mut transition = vec![vec![0.1 / (n - 1) as f64; n]; n];
        for (i, row) in transition.iter_mut().enumerate() {
            row[i] = 0.9;
        }
        FiberMarkovModel {
            catalog: default_catalog(),
            initial: vec![1.0 / n as f64; n],
            transition,
            lengths: vec![SpanLengthDist::default(); n],
            amp_nf_db: 5.0,
        }
    }
}

impl FiberMarkovModel {
    /// A degenerate model that always draws `kind` spans; handy for
    /// controlled studies (e.g. an all-NDSF link).
    pub fn uniform(kind: FiberKind, lengths: SpanLengthDist, amp_nf_db: f64) -> Self {
        let n = FiberKind::ALL.len();
        let mut initial = vec![0.0; n];
        initial[kind.index()] = 1.0;
        let mut transition = vec![vec![0.0; n]; n];
        for row in transition.iter_mut() {
            row[kind.index()] = 1.0;
        }
        FiberMarkovModel {
            catalog: default_catalog(),
            initial,
            transition,
            lengths: vec![lengths; n],
            amp_nf_db,
        }
    }

    /// Restricts the default model to a subset of fiber types with a
    /// given self-transition probability; other types get zero mass.
    pub fn restricted(kinds: &[FiberKind], stay_prob: f64, amp_nf_db: f64) -> Self {
        let n = FiberKind::ALL.len();
        let mut initial = vec![0.0; n];
        let mut transition = vec![vec![0.0; n]; n];
        let share = 1.0 / kinds.len() as f64;
        for &k in kinds {
            initial[k.index()] = share;
        }
        for i in 0..n {
            if kinds.iter().any(|k| k.index() == i) {
                for &k in kinds {
                    transition[i][k.index()] = if k.index() == i {
                        if kinds.len() == 1 {
                            1.0
                        } else {
                            stay_prob
                        }
                    } else {
                        (1.0 - stay_prob) / (kinds.len() - 1) as f64
                    };
                }
            } else {
                // Unreachable rows still need to be stochastic.
                transition[i][i] = 1.0;
            }
        }
        FiberMarkovModel {
            catalog: default_catalog(),
            initial,
            transition,
            lengths: vec![SpanLengthDist::default(); n],
            amp_nf_db,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = FiberKind::ALL.len();
        if self.catalog.len() != n || self.initial.len() != n || self.lengths.len() != n {
            return Err(Error::domain(
                "model vectors must cover all 7 fiber types".to_string(),
            ));
        }
        for f in &self.catalog {
            f.validate()?;
        }
        let sum: f64 = self.initial.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || self.initial.iter().any(|&p| p < 0.0) {
            return Err(Error::domain(format!(
                "initial distribution must sum to 1, sums to {sum}"
            )));
        }
        if self.transition.len() != n {
            return Err(Error::domain("transition matrix must be 7x7".to_string()));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != n {
                return Err(Error::domain("transition matrix must be 7x7".to_string()));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::domain(format!(
                    "transition row {i} must sum to 1, sums to {s}"
                )));
            }
        }
        for l in &self.lengths {
            l.validate()?;
        }
        Ok(())
    }

    pub fn fiber(&self, kind: FiberKind) -> FiberType {
        self.catalog[kind.index()]
    }
}

fn draw_categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Samples a route of `n_spans` spans: the first type from the initial
/// distribution, each next type from the transition row of the current
/// one, lengths i.i.d. from the per-type distribution.
pub fn sample_route(seed: u64, model: &FiberMarkovModel, n_spans: usize) -> Result<Route> {
    if n_spans == 0 {
        return Err(Error::domain("route needs at least one span".to_string()));
    }
    model.validate()?;
    let mut rng = crate::derive_rng(seed, 0, crate::streams::ROUTE);
    let mut spans = Vec::with_capacity(n_spans);
    let mut kind_idx = draw_categorical(&mut rng, &model.initial);
    for _ in 0..n_spans {
        let kind = FiberKind::ALL[kind_idx];
        let length = model.lengths[kind_idx].sample(&mut rng);
        spans.push(Span::new(model.fiber(kind), length, model.amp_nf_db)?);
        kind_idx = draw_categorical(&mut rng, &model.transition[kind_idx]);
    }
    Ok(Route { spans })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta2_oracle_values() {
        // -17·(1550e-9)²/(2π·c) in SI, converted: mpmath oracle.
        assert!((beta2_from_dispersion(17.0, 1550.0) - (-21.6826193914)).abs() < 1e-6);
        assert_eq!(beta2_from_dispersion(0.0, 1550.0), 0.0);
        assert!(beta2_from_dispersion(17.0, 1550.0) < 0.0);
        assert!(beta2_from_dispersion(-2.0, 1550.0) > 0.0);
    }

    #[test]
    fn cumulative_dispersion_arithmetic() {
        let model = FiberMarkovModel::default();
        let ndsf = model.fiber(FiberKind::NDSF);
        let spans: Vec<Span> = (0..10)
            .map(|_| Span::new(ndsf, 80.0, 5.0).unwrap())
            .collect();
        let route = Route { spans };
        assert!((route.cumulative_dispersion_ps_nm() - 13600.0).abs() < 1e-9);
        assert!((route.total_length_km() - 800.0).abs() < 1e-12);

        let twc = model.fiber(FiberKind::TWc);
        let single = Route {
            spans: vec![Span::new(twc, 100.0, 5.0).unwrap()],
        };
        assert!((single.cumulative_dispersion_ps_nm() - 300.0).abs() < 1e-9);

        // additivity over concatenation
        let mut joined = route.spans.clone();
        joined.extend(single.spans.clone());
        let joined = Route { spans: joined };
        assert!(
            (joined.cumulative_dispersion_ps_nm()
                - (route.cumulative_dispersion_ps_nm() + single.cumulative_dispersion_ps_nm()))
            .abs()
                < 1e-9
        );
    }

    #[test]
    fn degenerate_model_gives_fixed_spans() {
        let lengths = SpanLengthDist {
            mean_km: 80.0,
            std_km: 0.0,
            min_km: 20.0,
            max_km: 120.0,
        };
        let model = FiberMarkovModel::uniform(FiberKind::NDSF, lengths, 5.0);
        let route = sample_route(3, &model, 6).unwrap();
        assert_eq!(route.spans.len(), 6);
        for s in &route.spans {
            assert_eq!(s.fiber.kind, FiberKind::NDSF);
            assert_eq!(s.length_km, 80.0);
            assert!((s.amp_gain_db - 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn route_sampling_is_deterministic() {
        let model = FiberMarkovModel::default();
        let a = sample_route(42, &model, 12).unwrap();
        let b = sample_route(42, &model, 12).unwrap();
        for (sa, sb) in a.spans.iter().zip(&b.spans) {
            assert_eq!(sa.fiber.kind, sb.fiber.kind);
            assert_eq!(sa.length_km, sb.length_km);
        }
        let c = sample_route(43, &model, 12).unwrap();
        let same = a
            .spans
            .iter()
            .zip(&c.spans)
            .all(|(sa, sc)| sa.length_km == sc.length_km);
        assert!(!same);
    }

    #[test]
    fn initial_distribution_frequencies() {
        let model = FiberMarkovModel::default();
        let n = 100_000usize;
        let mut counts = [0usize; 7];
        for i in 0..n {
            let route = sample_route(1000 + i as u64, &model, 1).unwrap();
            counts[route.spans[0].fiber.kind.index()] += 1;
        }
        // 3σ multinomial bounds around p = 1/7.
        let p = 1.0 / 7.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            let dev = (c as f64 - n as f64 * p).abs();
            assert!(dev < 3.0 * sigma, "type {i}: count {c}, dev {dev:.1}");
        }
    }

    #[test]
    fn two_state_chain_matches_analytic_stationary_distribution() {
        // Toy chain on {NDSF, TWc}: p(N->T)=0.2, p(T->N)=0.4.
        // Stationary: pi_N = 0.4/0.6 = 2/3, pi_T = 1/3.
        let mut model = FiberMarkovModel::default();
        let n_idx = FiberKind::NDSF.index();
        let t_idx = FiberKind::TWc.index();
        model.initial = vec![0.0; 7];
        model.initial[n_idx] = 1.0;
        model.transition = vec![vec![0.0; 7]; 7];
        for i in 0..7 {
            model.transition[i][i] = 1.0;
        }
        model.transition[n_idx] = vec![0.0; 7];
        model.transition[n_idx][n_idx] = 0.8;
        model.transition[n_idx][t_idx] = 0.2;
        model.transition[t_idx] = vec![0.0; 7];
        model.transition[t_idx][n_idx] = 0.4;
        model.transition[t_idx][t_idx] = 0.6;

        let spans = 200_000;
        let route = sample_route(7, &model, spans).unwrap();
        let n_count = route
            .spans
            .iter()
            .filter(|s| s.fiber.kind == FiberKind::NDSF)
            .count();
        let freq = n_count as f64 / spans as f64;
        assert!((freq - 2.0 / 3.0).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn malformed_models_are_rejected() {
        let mut model = FiberMarkovModel::default();
        model.transition[2][3] += 0.5;
        assert!(sample_route(1, &model, 3).is_err());
        let mut model2 = FiberMarkovModel::default();
        model2.initial[0] += 0.1;
        assert!(sample_route(1, &model2, 3).is_err());
        assert!(sample_route(1, &FiberMarkovModel::default(), 0).is_err());
    }

    #[test]
    fn span_lengths_respect_bounds() {
        let model = FiberMarkovModel::default();
        for i in 0..200 {
            let route = sample_route(i, &model, 8).unwrap();
            for s in &route.spans {
                assert!(s.length_km >= 20.0 && s.length_km <= 120.0);
            }
        }
    }
}
