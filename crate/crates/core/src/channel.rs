//! Layered-tissue THz channel: path loss, backscattered power, molecular
//! absorption noise and Shannon capacity over sub-bands.
//!
//! Losses are positive decibels (the negated log of the path gain
//! `e^{-μd}·(λ_g / 4πd)²`). Absolute powers are dB relative to 1 W.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consts::{from_db, to_db, BODY_TEMPERATURE, BOLTZMANN, SPEED_OF_LIGHT};
use crate::dielectric::{AbsorptionWavelength, DielectricError, DielectricModel, OpticalProperties, TissueLibrary};

/// Frequencies accepted by the loss model, Hz.
pub const MODEL_BAND: (f64, f64) = (0.01e12, 10e12);

const DEFAULT_STACK_JSON: &str = include_str!("../assets/stacks/default.json");

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error(transparent)]
    Dielectric(#[from] DielectricError),
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("frequency {0} Hz outside the modelled 0.01-10 THz range")]
    FrequencyOutOfRange(f64),
    #[error("layer stack is empty")]
    EmptyStack,
    #[error("layer `{0}` has non-positive thickness")]
    BadThickness(String),
    #[error("invalid link parameters: {0}")]
    InvalidLink(String),
    #[error("malformed stack file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadingMode {
    /// Friis segment per layer, each with its own λ_g, summed in dB.
    #[default]
    PerLayer,
    /// One Friis term over the total thickness using the electrical-length
    /// weighted wavelength `D / Σ(dᵢ/λ_g,ᵢ)`.
    TotalDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub spreading: SpreadingMode,
    pub absorption_wavelength: AbsorptionWavelength,
    /// Extra gain (normally ≤ 0) applied once to the backscattered power.
    pub backscatter_efficiency_db: f64,
    /// SNR used for sub-bands with zero noise.
    pub max_snr_db: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            spreading: SpreadingMode::PerLayer,
            absorption_wavelength: AbsorptionWavelength::Effective,
            backscatter_efficiency_db: 0.0,
            max_snr_db: 300.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TissueLayer {
    pub dielectric: DielectricModel,
    pub thickness: f64,
}

impl TissueLayer {
    pub fn new(dielectric: DielectricModel, thickness: f64) -> Result<Self, ChannelError> {
        if !(thickness.is_finite() && thickness > 0.0) {
            return Err(ChannelError::BadThickness(dielectric.tissue_name));
        }
        Ok(Self { dielectric, thickness })
    }

    fn optical(&self, frequency: f64, cfg: &ChannelConfig) -> Result<OpticalProperties, ChannelError> {
        Ok(self.dielectric.optical(frequency, cfg.absorption_wavelength)?)
    }
}

/// Tissue layers ordered from the skin surface inward.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<TissueLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackLayerRef {
    pub tissue: String,
    pub thickness_m: f64,
}

/// On-disk stack definition referencing tissues by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackFile {
    #[serde(default)]
    pub name: String,
    pub layers: Vec<StackLayerRef>,
}

impl StackFile {
    pub fn from_json_str(s: &str) -> Result<Self, ChannelError> {
        serde_json::from_str(s).map_err(|e| ChannelError::Parse(e.to_string()))
    }

    pub fn resolve(&self, tissues: &TissueLibrary) -> Result<LayerStack, ChannelError> {
        let layers = self
            .layers
            .iter()
            .map(|l| TissueLayer::new(tissues.get(&l.tissue)?.clone(), l.thickness_m))
            .collect::<Result<Vec<_>, _>>()?;
        LayerStack::new(layers)
    }
}

impl LayerStack {
    pub fn new(layers: Vec<TissueLayer>) -> Result<Self, ChannelError> {
        if layers.is_empty() {
            return Err(ChannelError::EmptyStack);
        }
        Ok(Self { layers })
    }

    /// 200 µm epidermis, 1800 µm dermis, 500 µm blood.
    pub fn default_skin() -> Self {
        StackFile::from_json_str(DEFAULT_STACK_JSON)
            .and_then(|f| f.resolve(&TissueLibrary::builtin()))
            .expect("bundled stack is valid")
    }

    pub fn layers(&self) -> &[TissueLayer] {
        &self.layers
    }

    pub fn total_thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }

    /// The stack cut off at `depth` metres below the surface.
    pub fn truncated(&self, depth: f64) -> Result<Self, ChannelError> {
        if !(depth > 0.0) {
            return Err(ChannelError::NonPositiveDistance(depth));
        }
        let mut out = Vec::new();
        let mut remaining = depth;
        for l in &self.layers {
            if remaining <= 0.0 {
                break;
            }
            let t = l.thickness.min(remaining);
            out.push(TissueLayer {
                dielectric: l.dielectric.clone(),
                thickness: t,
            });
            remaining -= t;
        }
        Self::new(out)
    }

    /// Every layer thickness multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ChannelError> {
        let layers = self
            .layers
            .iter()
            .map(|l| TissueLayer::new(l.dielectric.clone(), l.thickness * factor))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(layers)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkParams {
    /// Transmit peak power, W.
    pub p_t: f64,
    /// Linear antenna gains.
    pub g_t: f64,
    pub g_r: f64,
    pub band: (f64, f64),
    pub delta_f: f64,
    /// Noise reference temperature, K.
    pub t0: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        // 500 pJ over 100 fs; gains of 5.09 each side.
        Self {
            p_t: 5_000.0,
            g_t: 5.09,
            g_r: 5.09,
            band: (0.1e12, 1.0e12),
            delta_f: 1e9,
            t0: BODY_TEMPERATURE,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let (lo, hi) = self.band;
        let bad = |m: &str| Err(ChannelError::InvalidLink(m.to_string()));
        if !(lo > 0.0 && lo < hi) {
            return bad("band must satisfy 0 < f_min < f_max");
        }
        if !(self.delta_f > 0.0 && self.delta_f <= hi - lo) {
            return bad("delta_f must be positive and no wider than the band");
        }
        if !(self.t0 > 0.0) {
            return bad("t0 must be positive");
        }
        if !(self.p_t >= 0.0 && self.g_t > 0.0 && self.g_r > 0.0) {
            return bad("power must be non-negative and gains positive");
        }
        Ok(())
    }

    pub fn bandwidth(&self) -> f64 {
        self.band.1 - self.band.0
    }

    /// Centre frequencies of the `Δf` sub-bands covering the band.
    pub fn subband_centers(&self) -> Vec<f64> {
        let n = (self.bandwidth() / self.delta_f).round().max(1.0) as usize;
        (0..n).map(|k| self.band.0 + (k as f64 + 0.5) * self.delta_f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerLoss {
    pub spread_db: f64,
    pub abs_db: f64,
}

impl LayerLoss {
    pub fn total_db(&self) -> f64 {
        self.spread_db + self.abs_db
    }
}

fn check_band(frequency: f64) -> Result<(), ChannelError> {
    if frequency >= MODEL_BAND.0 && frequency <= MODEL_BAND.1 {
        Ok(())
    } else {
        Err(ChannelError::FrequencyOutOfRange(frequency))
    }
}

fn friis_db(distance: f64, lambda_g: f64) -> f64 {
    20.0 * (4.0 * PI * distance / lambda_g).log10()
}

fn absorption_db(mu_abs: f64, distance: f64) -> f64 {
    10.0 * std::f64::consts::LOG10_E * mu_abs * distance
}

/// Spreading and absorption loss over `distance` metres of one tissue.
pub fn path_loss_layer(
    layer: &TissueLayer,
    frequency: f64,
    distance: f64,
    cfg: &ChannelConfig,
) -> Result<LayerLoss, ChannelError> {
    if !(distance > 0.0) {
        return Err(ChannelError::NonPositiveDistance(distance));
    }
    check_band(frequency)?;
    let op = layer.optical(frequency, cfg)?;
    Ok(LayerLoss {
        spread_db: friis_db(distance, op.lambda_g),
        abs_db: absorption_db(op.mu_abs, distance),
    })
}

/// One-way loss through every layer at full thickness.
pub fn path_loss_stack(stack: &LayerStack, frequency: f64, cfg: &ChannelConfig) -> Result<LayerLoss, ChannelError> {
    check_band(frequency)?;
    match cfg.spreading {
        SpreadingMode::PerLayer => {
            let mut acc = LayerLoss {
                spread_db: 0.0,
                abs_db: 0.0,
            };
            for l in stack.layers() {
                let ll = path_loss_layer(l, frequency, l.thickness, cfg)?;
                acc.spread_db += ll.spread_db;
                acc.abs_db += ll.abs_db;
            }
            Ok(acc)
        }
        SpreadingMode::TotalDistance => {
            let mut abs_db = 0.0;
            let mut wavelengths = 0.0;
            for l in stack.layers() {
                let op = l.optical(frequency, cfg)?;
                abs_db += absorption_db(op.mu_abs, l.thickness);
                wavelengths += l.thickness / op.lambda_g;
            }
            let total = stack.total_thickness();
            Ok(LayerLoss {
                spread_db: friis_db(total, total / wavelengths),
                abs_db,
            })
        }
    }
}

/// Power received back at the reader after two traversals of the stack, dBW.
pub fn backscatter_power(
    stack: &LayerStack,
    params: &LinkParams,
    frequency: f64,
    cfg: &ChannelConfig,
) -> Result<f64, ChannelError> {
    let loss = path_loss_stack(stack, frequency, cfg)?.total_db();
    Ok(received_backscatter_db(params, loss, cfg))
}

fn received_backscatter_db(params: &LinkParams, one_way_loss_db: f64, cfg: &ChannelConfig) -> f64 {
    to_db(params.p_t) + to_db(params.g_t) - 2.0 * one_way_loss_db + to_db(params.g_r) + cfg.backscatter_efficiency_db
}

fn noise_exponent(stack: &LayerStack, frequency: f64, cfg: &ChannelConfig) -> Result<f64, ChannelError> {
    let mut exponent = 0.0;
    for l in stack.layers() {
        let op = l.optical(frequency, cfg)?;
        exponent += 4.0 * PI * frequency * l.thickness * op.n_imag / SPEED_OF_LIGHT;
    }
    Ok(exponent)
}

/// Molecular-absorption noise PSD accumulated over the stack, W/Hz.
pub fn noise_psd(stack: &LayerStack, params: &LinkParams, frequency: f64) -> Result<f64, ChannelError> {
    noise_psd_with(stack, params, frequency, &ChannelConfig::default())
}

pub fn noise_psd_with(
    stack: &LayerStack,
    params: &LinkParams,
    frequency: f64,
    cfg: &ChannelConfig,
) -> Result<f64, ChannelError> {
    check_band(frequency)?;
    let exponent = noise_exponent(stack, frequency, cfg)?;
    Ok(BOLTZMANN * params.t0 * -(-exponent).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Reader to tag; signal PSD from the transmit power.
    Forward,
    /// Tag back to reader; signal PSD from the power reaching the tag.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacity {
    pub bits_per_second: f64,
    pub subbands: usize,
    /// Sub-bands whose noise PSD was zero and used `max_snr_db` instead.
    pub capped_subbands: usize,
}

/// Per-frequency SNR of a link direction, dB. `None` when the noise is zero.
fn snr_db(params: &LinkParams, direction: Direction, loss_db: f64, noise: f64) -> Option<f64> {
    if noise <= 0.0 {
        return None;
    }
    let psd_db = match direction {
        Direction::Forward => to_db(params.p_t),
        Direction::Backward => to_db(params.p_t) + to_db(params.g_t) - loss_db,
    } - to_db(params.bandwidth());
    Some(psd_db - loss_db - to_db(noise))
}

fn subband_bits(delta_f: f64, snr_db: Option<f64>, max_snr_db: f64) -> f64 {
    let snr = from_db(snr_db.unwrap_or(max_snr_db).min(max_snr_db));
    delta_f * snr.ln_1p() / LN_2
}

/// Shannon capacity summed over `Δf` sub-bands with a flat signal PSD.
pub fn channel_capacity(
    stack: &LayerStack,
    params: &LinkParams,
    direction: Direction,
    cfg: &ChannelConfig,
) -> Result<Capacity, ChannelError> {
    params.validate()?;
    let centers = params.subband_centers();
    let mut bits = 0.0;
    let mut capped = 0;
    for &f in &centers {
        let loss = path_loss_stack(stack, f, cfg)?.total_db();
        let noise = noise_psd_with(stack, params, f, cfg)?;
        let snr = snr_db(params, direction, loss, noise);
        if snr.is_none() {
            capped += 1;
        }
        bits += subband_bits(params.delta_f, snr, cfg.max_snr_db);
    }
    Ok(Capacity {
        bits_per_second: bits,
        subbands: centers.len(),
        capped_subbands: capped,
    })
}

/// Received-power threshold expressed as a noise-equivalent sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sensitivity {
    pub w_per_sqrt_hz: f64,
    pub detection_bandwidth_hz: f64,
}

impl Default for Sensitivity {
    fn default() -> Self {
        Self {
            w_per_sqrt_hz: 0.25e-15,
            detection_bandwidth_hz: 1.0,
        }
    }
}

impl Sensitivity {
    /// Minimum detectable power, dBW.
    pub fn threshold_dbw(&self) -> f64 {
        to_db(self.w_per_sqrt_hz * self.detection_bandwidth_hz.sqrt())
    }

    pub fn detects(&self, received_dbw: f64) -> bool {
        received_dbw >= self.threshold_dbw()
    }
}

/// Everything the sweep reports for one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub frequency: f64,
    pub loss_spread_db: f64,
    pub loss_abs_db: f64,
    pub loss_total_db: f64,
    pub p_received_backscatter_db: f64,
    pub noise_psd: f64,
    /// `Δf·log2(1 + SNR)` of the sub-band centred here.
    pub capacity_fwd_bps: f64,
    pub capacity_back_bps: f64,
}

pub fn link_budget(
    stack: &LayerStack,
    params: &LinkParams,
    frequency: f64,
    cfg: &ChannelConfig,
) -> Result<LinkBudget, ChannelError> {
    let loss = path_loss_stack(stack, frequency, cfg)?;
    let total = loss.total_db();
    let noise = noise_psd_with(stack, params, frequency, cfg)?;
    Ok(LinkBudget {
        frequency,
        loss_spread_db: loss.spread_db,
        loss_abs_db: loss.abs_db,
        loss_total_db: total,
        p_received_backscatter_db: received_backscatter_db(params, total, cfg),
        noise_psd: noise,
        capacity_fwd_bps: subband_bits(
            params.delta_f,
            snr_db(params, Direction::Forward, total, noise),
            cfg.max_snr_db,
        ),
        capacity_back_bps: subband_bits(
            params.delta_f,
            snr_db(params, Direction::Backward, total, noise),
            cfg.max_snr_db,
        ),
    })
}

/// Inclusive frequency grid `[lo, hi]` at `step` spacing.
pub fn frequency_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

pub fn sweep(
    stack: &LayerStack,
    params: &LinkParams,
    frequencies: &[f64],
    cfg: &ChannelConfig,
) -> Result<Vec<LinkBudget>, ChannelError> {
    frequencies
        .iter()
        .map(|&f| link_budget(stack, params, f, cfg))
        .collect()
}

#[cfg(test)]
// Golden values keep every digit the oracle printed.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::dielectric::{HavriliakNegamiParams, Relaxation};
    use approx::assert_relative_eq;

    fn blood_layer(d: f64) -> TissueLayer {
        TissueLayer::new(TissueLibrary::builtin().get("blood").unwrap().clone(), d).unwrap()
    }

    fn lossless(eps: f64, d: f64) -> TissueLayer {
        let m = DielectricModel::new(
            "lossless",
            Relaxation::HavriliakNegami(HavriliakNegamiParams {
                eps_inf: eps,
                terms: vec![],
                sigma: 0.0,
            }),
        )
        .unwrap();
        TissueLayer::new(m, d).unwrap()
    }

    #[test]
    fn spreading_vanishes_at_unit_argument() {
        let cfg = ChannelConfig::default();
        let f = 0.5e12;
        let layer = blood_layer(1e-3);
        let lg = layer.optical(f, &cfg).unwrap().lambda_g;
        let ll = path_loss_layer(&layer, f, lg / (4.0 * PI), &cfg).unwrap();
        assert!(ll.spread_db.abs() < 1e-12);
    }

    #[test]
    fn lossless_layer_has_no_absorption_loss() {
        let cfg = ChannelConfig::default();
        for d in [1e-4, 1e-3, 5e-2] {
            assert_eq!(
                path_loss_layer(&lossless(4.0, 1e-3), 0.3e12, d, &cfg).unwrap().abs_db,
                0.0
            );
        }
    }

    // 50-digit mpmath evaluation of the blood chain at 0.5 THz.
    #[test]
    fn blood_layer_losses_match_golden() {
        let cfg = ChannelConfig::default();
        let layer = blood_layer(1e-3);
        let golden = [
            (0.5e-3, 26.769_659_070_885_625, 74.509_319_037_249_862),
            (1.0e-3, 32.790_258_984_165_249, 149.018_638_074_499_72),
            (2.0e-3, 38.810_858_897_444_873, 298.037_276_148_999_45),
        ];
        for (d, spread, abs) in golden {
            let ll = path_loss_layer(&layer, 0.5e12, d, &cfg).unwrap();
            assert_relative_eq!(ll.spread_db, spread, max_relative = 1e-11);
            assert_relative_eq!(ll.abs_db, abs, max_relative = 1e-11);
        }
    }

    #[test]
    fn default_stack_golden_at_half_thz() {
        let cfg = ChannelConfig::default();
        let stack = LayerStack::default_skin();
        assert_relative_eq!(stack.total_thickness(), 2.5e-3, max_relative = 1e-15);
        let loss = path_loss_stack(&stack, 0.5e12, &cfg).unwrap();
        assert_relative_eq!(loss.spread_db, 83.612_990_796_920_514, max_relative = 1e-11);
        assert_relative_eq!(loss.abs_db, 216.504_970_455_581_54, max_relative = 1e-11);
        let n = noise_psd(&stack, &LinkParams::default(), 0.5e12).unwrap();
        assert_relative_eq!(n, 4.280_011_899_611_532_4e-21, max_relative = 1e-11);
    }

    #[test]
    fn single_layer_stack_reduces_to_layer() {
        let cfg = ChannelConfig::default();
        let layer = blood_layer(7e-4);
        let stack = LayerStack::new(vec![layer.clone()]).unwrap();
        for mode in [SpreadingMode::PerLayer, SpreadingMode::TotalDistance] {
            let cfg = ChannelConfig { spreading: mode, ..cfg };
            let a = path_loss_stack(&stack, 0.4e12, &cfg).unwrap();
            let b = path_loss_layer(&layer, 0.4e12, 7e-4, &cfg).unwrap();
            assert_relative_eq!(a.total_db(), b.total_db(), max_relative = 1e-13);
        }
    }

    #[test]
    fn doubling_thickness_doubles_absorption() {
        let cfg = ChannelConfig::default();
        let stack = LayerStack::default_skin();
        let doubled = stack.scaled(2.0).unwrap();
        let a = path_loss_stack(&stack, 0.6e12, &cfg).unwrap();
        let b = path_loss_stack(&doubled, 0.6e12, &cfg).unwrap();
        assert_relative_eq!(b.abs_db, 2.0 * a.abs_db, max_relative = 1e-13);
        let per_layer = 20.0 * 2f64.log10();
        assert_relative_eq!(b.spread_db - a.spread_db, 3.0 * per_layer, max_relative = 1e-11);
    }

    #[test]
    fn lossless_limit_recovers_link_gains() {
        let cfg = ChannelConfig::default();
        let f = 0.5e12;
        let lg = SPEED_OF_LIGHT / f / 2.0;
        let stack = LayerStack::new(vec![lossless(4.0, lg / (4.0 * PI))]).unwrap();
        let p = LinkParams::default();
        let prb = backscatter_power(&stack, &p, f, &cfg).unwrap();
        assert_relative_eq!(prb, to_db(p.p_t) + to_db(p.g_t) + to_db(p.g_r), epsilon = 1e-9);
    }

    #[test]
    fn noise_is_zero_without_absorption_and_saturates() {
        let p = LinkParams::default();
        let clear = LayerStack::new(vec![lossless(2.0, 1e-3)]).unwrap();
        assert_eq!(noise_psd(&clear, &p, 0.5e12).unwrap(), 0.0);
        let thick = LayerStack::new(vec![blood_layer(0.05)]).unwrap();
        let n = noise_psd(&thick, &p, 0.9e12).unwrap();
        assert_relative_eq!(n, BOLTZMANN * 310.0, max_relative = 1e-12);
        assert_relative_eq!(n, 4.28e-21, max_relative = 1e-3);
    }

    #[test]
    fn zero_noise_subbands_are_capped_and_flagged() {
        let clear = LayerStack::new(vec![lossless(2.0, 1e-3)]).unwrap();
        let p = LinkParams {
            band: (0.1e12, 0.11e12),
            ..LinkParams::default()
        };
        let c = channel_capacity(&clear, &p, Direction::Forward, &ChannelConfig::default()).unwrap();
        assert_eq!(c.subbands, 10);
        assert_eq!(c.capped_subbands, 10);
        assert_relative_eq!(c.bits_per_second, 10.0 * 1e9 * 30.0 * 10f64.log2(), max_relative = 1e-9);
    }

    #[test]
    fn zero_signal_has_zero_capacity() {
        let p = LinkParams {
            p_t: 0.0,
            ..LinkParams::default()
        };
        let stack = LayerStack::default_skin();
        for dir in [Direction::Forward, Direction::Backward] {
            let c = channel_capacity(&stack, &p, dir, &ChannelConfig::default()).unwrap();
            assert_eq!(c.bits_per_second, 0.0);
        }
    }

    #[test]
    fn domain_errors() {
        let cfg = ChannelConfig::default();
        let l = blood_layer(1e-3);
        assert_eq!(
            path_loss_layer(&l, 0.5e12, 0.0, &cfg),
            Err(ChannelError::NonPositiveDistance(0.0))
        );
        assert_eq!(
            path_loss_layer(&l, 20e12, 1e-3, &cfg),
            Err(ChannelError::FrequencyOutOfRange(20e12))
        );
        assert_eq!(
            path_loss_layer(&l, 1e9, 1e-3, &cfg),
            Err(ChannelError::FrequencyOutOfRange(1e9))
        );
        assert_eq!(LayerStack::new(vec![]), Err(ChannelError::EmptyStack));
        let bad = LinkParams {
            delta_f: 2e12,
            ..LinkParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn truncation_keeps_layer_order() {
        let stack = LayerStack::default_skin();
        let t = stack.truncated(1e-3).unwrap();
        assert_eq!(t.layers().len(), 2);
        assert_eq!(t.layers()[0].dielectric.tissue_name, "epidermis");
        assert_relative_eq!(t.total_thickness(), 1e-3, max_relative = 1e-12);
        let full = stack.truncated(1.0).unwrap();
        assert_eq!(full, stack);
    }

    #[test]
    fn sensitivity_default_is_minus_156_dbw() {
        let s = Sensitivity::default();
        assert_relative_eq!(s.threshold_dbw(), -156.02, epsilon = 0.01);
        assert!(s.detects(-150.0));
        assert!(!s.detects(-160.0));
    }

    #[test]
    fn subband_centers_cover_band() {
        let p = LinkParams::default();
        let c = p.subband_centers();
        assert_eq!(c.len(), 900);
        assert_relative_eq!(c[0], 0.1005e12);
        assert_relative_eq!(*c.last().unwrap(), 0.9995e12);
    }
}
