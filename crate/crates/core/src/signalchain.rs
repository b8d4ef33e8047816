//! Broadcast-and-delay dot product, simulated sample by sample.
//!
//! The input vector is written by the AWG as a stepwise intensity waveform,
//! one symbol per element. The same waveform modulates every shaped comb line;
//! the dispersive fibre delays line `k` by `(N - k)` symbols so that in the
//! detector slot `N - 1` all copies overlap and the photocurrent is
//! `sum_k p_k * x(k)`. The trigger, reference and bias symbols that close each
//! frame ride on an unweighted pilot line and are detected right after the
//! `2N - 1` slot correlation window.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::model::{decide, PerceptronModel};
use crate::photonics::{program_comb, CombSpec, ShapedComb, ShaperConfig};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const PAD_SYMBOLS: usize = 3;
pub const TRIGGER_LEVEL: f64 = 1.0;
pub const REFERENCE_LEVEL: f64 = 1.0;

const CALIBRATION_STREAM: u64 = 0x5eed_ca11;
const JITTER_STREAM: u64 = 0x5eed_d1e7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveformSpec {
    pub sample_rate_hz: f64,
    pub samples_per_symbol: usize,
    pub awg_bits: u32,
    pub analog_bandwidth_hz: f64,
}

impl Default for WaveformSpec {
    fn default() -> Self {
        Self {
            sample_rate_hz: 59.421642e9,
            samples_per_symbol: 5,
            awg_bits: 8,
            analog_bandwidth_hz: 25e9,
        }
    }
}

impl WaveformSpec {
    pub fn symbol_duration_s(&self) -> f64 {
        self.samples_per_symbol as f64 / self.sample_rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_symbol == 0 || self.awg_bits == 0 || self.awg_bits > 52 {
            return Err(Error::Domain(
                "samples_per_symbol must be >= 1 and awg_bits in 1..=52".into(),
            ));
        }
        if !(self.sample_rate_hz > 0.0 && self.analog_bandwidth_hz > 0.0) {
            return Err(Error::Domain("sample rate and bandwidth must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayMode {
    /// Line `k` is delayed by exactly `(N - k)` symbol durations.
    #[default]
    NominalTau,
    /// Per-line step from group-velocity dispersion across one comb spacing.
    DispersionDerived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberSpec {
    pub length_km: f64,
    pub dispersion_ps_per_nm_km: f64,
    pub delay_mode: DelayMode,
    pub delay_jitter_ps_sigma: f64,
}

impl Default for FiberSpec {
    fn default() -> Self {
        Self {
            length_km: 13.0,
            dispersion_ps_per_nm_km: 17.0,
            delay_mode: DelayMode::NominalTau,
            delay_jitter_ps_sigma: 0.0,
        }
    }
}

impl FiberSpec {
    /// Differential group delay between adjacent comb lines, ps.
    pub fn dispersion_step_ps(&self, fsr_hz: f64, center_wavelength_nm: f64) -> f64 {
        let lambda_m = center_wavelength_nm * 1e-9;
        let spacing_nm = fsr_hz * lambda_m * lambda_m / SPEED_OF_LIGHT * 1e9;
        self.dispersion_ps_per_nm_km * self.length_km * spacing_nm
    }

    /// Propagation time through the spool for a given group index.
    pub fn time_of_flight_s(&self, group_index: f64) -> f64 {
        self.length_km * 1e3 * group_index / SPEED_OF_LIGHT
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_km >= 0.0) || !self.dispersion_ps_per_nm_km.is_finite() || !(self.delay_jitter_ps_sigma >= 0.0) {
            return Err(Error::Domain(
                "fibre length and jitter must be >= 0 and dispersion finite".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpairmentConfig {
    /// Electrical SNR at the photodetector; `None` is noiseless.
    pub electrical_snr_db: Option<f64>,
    pub awg_quantize: bool,
    pub bandwidth_filter: bool,
    pub seed: u64,
}

impl Default for ImpairmentConfig {
    fn default() -> Self {
        Self {
            electrical_snr_db: None,
            awg_quantize: true,
            bandwidth_filter: false,
            seed: 0,
        }
    }
}

impl ImpairmentConfig {
    pub fn ideal() -> Self {
        Self {
            awg_quantize: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.electrical_snr_db {
            Some(snr) if !(snr > 0.0 && snr.is_finite()) => Err(Error::Domain(format!(
                "electrical_snr_db must be > 0 when set, got {snr}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Waveform, fibre and impairment settings for one analog chain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub waveform: WaveformSpec,
    pub fiber: FiberSpec,
    pub impairments: ImpairmentConfig,
}

impl ChainConfig {
    pub fn ideal() -> Self {
        Self {
            impairments: ImpairmentConfig::ideal(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.waveform.validate()?;
        self.fiber.validate()?;
        self.impairments.validate()
    }
}

/// Affine map between bias values and AWG levels in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasMap {
    pub min: f64,
    pub max: f64,
}

impl BiasMap {
    /// Symmetric range wide enough for the bias and for any achievable dot
    /// product `sum w(k) x(k)` with `x` in `[0, 1]`.
    pub fn for_model(model: &PerceptronModel) -> Self {
        let span = model
            .bias()
            .abs()
            .max(model.weights().iter().map(|w| w.abs()).sum())
            .max(f64::MIN_POSITIVE);
        Self { min: -span, max: span }
    }

    pub fn level(&self, bias: f64) -> f64 {
        ((bias - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }

    pub fn value(&self, level: f64) -> f64 {
        self.min + level * (self.max - self.min)
    }
}

/// Frame layout carried alongside a waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub n_data_symbols: usize,
    /// Encoded `[trigger, reference, bias]` levels.
    pub pad_symbols: [f64; PAD_SYMBOLS],
    /// Symbol slot at which the trigger appears in this waveform.
    pub pad_start_slot: usize,
    pub bias_map: BiasMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectricalWaveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub samples_per_symbol: usize,
    pub frame: Option<Frame>,
}

impl ElectricalWaveform {
    pub fn n_slots(&self) -> usize {
        self.samples.len() / self.samples_per_symbol
    }

    /// Value at the temporal midpoint of symbol slot `slot`.
    pub fn slot_centre(&self, slot: usize) -> Option<f64> {
        self.samples
            .get(slot * self.samples_per_symbol + self.samples_per_symbol / 2)
            .copied()
    }

    pub fn time_s(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate_hz
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,value\n");
        for (i, v) in self.samples.iter().enumerate() {
            out.push_str(&format!("{:e},{:e}\n", self.time_s(i), v));
        }
        out
    }
}

fn quantize_level(v: f64, bits: u32) -> f64 {
    let top = 2f64.powi(bits as i32) - 1.0;
    (v * top).round() / top
}

/// Single-pole low-pass, `y[n] = y[n-1] + a (x[n] - y[n-1])`.
fn low_pass(samples: &mut [f64], cutoff_hz: f64, sample_rate_hz: f64) {
    let a = 1.0 - (-2.0 * std::f64::consts::PI * cutoff_hz / sample_rate_hz).exp();
    let mut y = 0.0;
    for s in samples.iter_mut() {
        y += a * (*s - y);
        *s = y;
    }
}

/// Writes `x(1)..x(N)` followed by the trigger, reference and bias symbols
/// as a stepwise AWG waveform.
pub fn encode_waveform(
    x: &[f64],
    bias: f64,
    bias_map: BiasMap,
    spec: &WaveformSpec,
    imp: &ImpairmentConfig,
) -> Result<ElectricalWaveform> {
    spec.validate()?;
    if let Some(k) = x.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain(format!("feature {k} = {} is outside [0, 1]", x[k])));
    }
    let mut pads = [TRIGGER_LEVEL, REFERENCE_LEVEL, bias_map.level(bias)];
    let mut levels: Vec<f64> = x.to_vec();
    if imp.awg_quantize {
        levels.iter_mut().for_each(|v| *v = quantize_level(*v, spec.awg_bits));
        pads.iter_mut().for_each(|v| *v = quantize_level(*v, spec.awg_bits));
    }
    levels.extend_from_slice(&pads);

    let sps = spec.samples_per_symbol;
    let mut samples: Vec<f64> = levels
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, sps))
        .collect();
    if imp.bandwidth_filter {
        low_pass(&mut samples, spec.analog_bandwidth_hz, spec.sample_rate_hz);
    }
    Ok(ElectricalWaveform {
        samples,
        sample_rate_hz: spec.sample_rate_hz,
        samples_per_symbol: sps,
        frame: Some(Frame {
            n_data_symbols: x.len(),
            pad_symbols: pads,
            pad_start_slot: x.len(),
            bias_map,
        }),
    })
}

/// Per-line optical envelopes: line `k` carries `p_k` times the data part of
/// the waveform; the pilot carries the pad symbols at unit power.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBank {
    pub channels: Vec<Vec<f64>>,
    pub pilot: Vec<f64>,
    pub sample_rate_hz: f64,
    pub samples_per_symbol: usize,
    pub frame: Frame,
}

pub fn broadcast_modulate(waveform: &ElectricalWaveform, comb: &ShapedComb) -> Result<ChannelBank> {
    let frame = waveform
        .frame
        .ok_or_else(|| Error::Shape("waveform carries no frame metadata".into()))?;
    if frame.n_data_symbols != comb.n_lines {
        return Err(Error::Shape(format!(
            "{} data symbols but {} comb lines",
            frame.n_data_symbols, comb.n_lines
        )));
    }
    let split = frame.pad_start_slot * waveform.samples_per_symbol;
    let (data, pads) = waveform.samples.split_at(split);
    let channels = comb
        .line_powers_linear
        .iter()
        .map(|&p| data.iter().map(|&v| p * v).collect())
        .collect();
    Ok(ChannelBank {
        channels,
        pilot: pads.to_vec(),
        sample_rate_hz: waveform.sample_rate_hz,
        samples_per_symbol: waveform.samples_per_symbol,
        frame,
    })
}

/// Delay of line `k` (1-based) relative to line `N`, without jitter.
pub fn channel_delay_ps(k: usize, n: usize, spec: &WaveformSpec, fiber: &FiberSpec, comb: &CombSpec) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::Index { index: k, max: n });
    }
    let steps = (n - k) as f64;
    Ok(match fiber.delay_mode {
        DelayMode::NominalTau => steps * spec.symbol_duration_s() * 1e12,
        DelayMode::DispersionDerived => {
            steps * fiber.dispersion_step_ps(comb.fsr_hz, comb.center_wavelength_nm)
        }
    })
}

/// All `N` line delays, with independent Gaussian jitter drawn from `seed`.
pub fn channel_delays_ps(n: usize, spec: &WaveformSpec, fiber: &FiberSpec, comb: &CombSpec, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..=n)
        .map(|k| {
            let nominal = channel_delay_ps(k, n, spec, fiber, comb)?;
            let z: f64 = StandardNormal.sample(&mut rng);
            Ok(nominal + fiber.delay_jitter_ps_sigma * z)
        })
        .collect()
}

/// Delay expressed in samples. Values within 1e-9 of an integer snap to it.
fn shift_samples(delay_ps: f64, sample_rate_hz: f64) -> f64 {
    let s = delay_ps * 1e-12 * sample_rate_hz;
    if (s - s.round()).abs() < 1e-9 {
        s.round()
    } else {
        s
    }
}

/// Zero-order-hold read of `env` at fractional sample position `pos`.
fn hold(env: &[f64], pos: f64) -> f64 {
    if pos < 0.0 {
        return 0.0;
    }
    env.get(pos.floor() as usize).copied().unwrap_or(0.0)
}

/// Sums the delayed lines (and the pilot) on a common sample grid, adds
/// white Gaussian noise at the configured SNR and clips at zero.
pub fn photodetect(
    bank: &ChannelBank,
    delays_ps: &[f64],
    imp: &ImpairmentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ElectricalWaveform> {
    if delays_ps.len() != bank.channels.len() {
        return Err(Error::Shape(format!(
            "{} delays for {} channels",
            delays_ps.len(),
            bank.channels.len()
        )));
    }
    let sps = bank.samples_per_symbol;
    let n = bank.channels.len();
    let data_len = bank.channels.first().map_or(0, Vec::len);
    let shifts: Vec<f64> = delays_ps
        .iter()
        .map(|&d| shift_samples(d, bank.sample_rate_hz))
        .collect();

    // The pilot lands after every delayed copy has cleared, and never before
    // the end of the nominal 2N - 1 slot window.
    let latest_end = shifts
        .iter()
        .map(|s| s + data_len as f64)
        .fold((2 * n).saturating_sub(1) as f64 * sps as f64, f64::max);
    let pad_start_slot = (latest_end / sps as f64 - 1e-9).ceil().max(0.0) as usize;
    let pad_offset = pad_start_slot * sps;
    let total = pad_offset + bank.pilot.len();

    let mut out = vec![0.0; total];
    for (env, &shift) in bank.channels.iter().zip(&shifts) {
        for (j, y) in out.iter_mut().enumerate() {
            *y += hold(env, j as f64 - shift);
        }
    }
    for (j, &v) in bank.pilot.iter().enumerate() {
        out[pad_offset + j] += v;
    }

    if let Some(snr_db) = imp.electrical_snr_db {
        let power = out.iter().map(|v| v * v).sum::<f64>() / out.len().max(1) as f64;
        let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
        for y in out.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *y = (*y + sigma * z).max(0.0);
        }
    }

    Ok(ElectricalWaveform {
        samples: out,
        sample_rate_hz: bank.sample_rate_hz,
        samples_per_symbol: sps,
        frame: Some(Frame {
            pad_start_slot,
            ..bank.frame
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonicPrediction {
    pub dot_product_estimate: f64,
    pub score: f64,
    pub class: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_trace: Option<ElectricalWaveform>,
}

/// Reads the full-overlap slot and the pad symbols from a detected frame.
///
/// `weight_scale` is the largest weight before line powers were normalized;
/// `centre / reference * weight_scale` returns the dot product in model units.
pub fn sample_and_recover(detected: &ElectricalWaveform, weight_scale: f64) -> Result<PhotonicPrediction> {
    let frame = detected
        .frame
        .ok_or_else(|| Error::Recovery("detected waveform has no frame metadata".into()))?;
    let n = frame.n_data_symbols;
    if n == 0 {
        return Err(Error::Recovery("frame has no data symbols".into()));
    }
    let read = |slot: usize, what: &str| {
        detected
            .slot_centre(slot)
            .ok_or_else(|| Error::Recovery(format!("{what} slot {slot} is outside the trace")))
    };
    let centre = read(n - 1, "centre")?;
    let reference = read(frame.pad_start_slot + 1, "reference")?;
    let bias_sample = read(frame.pad_start_slot + 2, "bias")?;
    if !(reference > 0.0) {
        return Err(Error::Recovery(format!(
            "reference sample {reference} is not positive; cannot rescale"
        )));
    }
    let dot = centre / reference * REFERENCE_LEVEL * weight_scale;
    let bias = frame.bias_map.value(bias_sample / reference * REFERENCE_LEVEL);
    let score = dot + bias;
    Ok(PhotonicPrediction {
        dot_product_estimate: dot,
        score,
        class: decide(score),
        raw_trace: None,
    })
}

/// Electrical SNR needed to resolve `bits` bits of amplitude, dB.
pub fn snr_required_for_bits(bits: u32) -> f64 {
    20.0 * 2f64.powi(bits as i32).log10()
}

/// Mixes a master seed with a stream tag.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Comb source and shaper settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotonicsConfig {
    pub comb: CombSpec,
    pub shaper: ShaperConfig,
}

impl PhotonicsConfig {
    pub fn ideal(n_lines: usize) -> Self {
        Self {
            comb: CombSpec::flat(n_lines),
            shaper: ShaperConfig::ideal(),
        }
    }
}

/// A perceptron deployed on the photonic chain: comb programmed, delays set.
///
/// Sample `i` draws its detector noise from the stream seeded with
/// `impairments.seed ^ i`, so results do not depend on evaluation order.
#[derive(Debug, Clone)]
pub struct PhotonicPerceptron {
    model: PerceptronModel,
    shaped: ShapedComb,
    delays_ps: Vec<f64>,
    bias_map: BiasMap,
    chain: ChainConfig,
}

impl PhotonicPerceptron {
    pub fn new(model: &PerceptronModel, photonics: &PhotonicsConfig, chain: &ChainConfig) -> Result<Self> {
        chain.validate()?;
        photonics.comb.validate()?;
        photonics.shaper.validate()?;
        let seed = chain.impairments.seed;
        let shaped = program_comb(
            &photonics.comb,
            model.weights(),
            &photonics.shaper,
            derive_seed(seed, CALIBRATION_STREAM),
        )?;
        let delays_ps = channel_delays_ps(
            model.n(),
            &chain.waveform,
            &chain.fiber,
            &photonics.comb,
            derive_seed(seed, JITTER_STREAM),
        )?;
        Ok(Self {
            model: model.clone(),
            shaped,
            delays_ps,
            bias_map: BiasMap::for_model(model),
            chain: chain.clone(),
        })
    }

    pub fn shaped_comb(&self) -> &ShapedComb {
        &self.shaped
    }

    pub fn delays_ps(&self) -> &[f64] {
        &self.delays_ps
    }

    pub fn bias_map(&self) -> BiasMap {
        self.bias_map
    }

    pub fn encode(&self, sample: &Sample) -> Result<ElectricalWaveform> {
        if sample.features.len() != self.model.n() {
            return Err(Error::Shape(format!(
                "sample {} has {} features, model expects {}",
                sample.id,
                sample.features.len(),
                self.model.n()
            )));
        }
        encode_waveform(
            &sample.features,
            self.model.bias(),
            self.bias_map,
            &self.chain.waveform,
            &self.chain.impairments,
        )
    }

    /// Encoded input, per-line envelopes and detected trace for one sample.
    pub fn traces(&self, sample: &Sample, index: usize) -> Result<(ElectricalWaveform, ChannelBank, ElectricalWaveform)> {
        let input = self.encode(sample)?;
        let bank = broadcast_modulate(&input, &self.shaped)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.chain.impairments.seed ^ index as u64);
        let detected = photodetect(&bank, &self.delays_ps, &self.chain.impairments, &mut rng)?;
        Ok((input, bank, detected))
    }

    pub fn predict(&self, sample: &Sample, index: usize) -> Result<PhotonicPrediction> {
        let (_, _, detected) = self.traces(sample, index)?;
        sample_and_recover(&detected, self.shaped.weight_scale)
    }

    pub fn predict_with_trace(&self, sample: &Sample, index: usize) -> Result<PhotonicPrediction> {
        let (_, _, detected) = self.traces(sample, index)?;
        let mut p = sample_and_recover(&detected, self.shaped.weight_scale)?;
        p.raw_trace = Some(detected);
        Ok(p)
    }

    /// Predicts every sample in parallel; element `i` uses noise stream `i`.
    pub fn predict_batch(&self, samples: &[Sample]) -> Result<Vec<PhotonicPrediction>> {
        samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| self.predict(s, i))
            .collect()
    }

    /// Like [`predict_batch`](Self::predict_batch) but keeps going past
    /// samples that cannot be recovered (a clipped reference at low SNR, say).
    pub fn predict_each(&self, samples: &[Sample]) -> Vec<Result<PhotonicPrediction>> {
        samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| self.predict(s, i))
            .collect()
    }
}

/// Runs one sample end to end: program, encode, broadcast, delay, detect,
/// recover.
pub fn run_perceptron(
    sample: &Sample,
    model: &PerceptronModel,
    photonics: &PhotonicsConfig,
    chain: &ChainConfig,
) -> Result<PhotonicPrediction> {
    PhotonicPerceptron::new(model, photonics, chain)?.predict(sample, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WeightMode;
    use crate::photonics::shape_weights;
    use approx::assert_relative_eq;

    fn spec() -> WaveformSpec {
        WaveformSpec::default()
    }

    fn unit_map() -> BiasMap {
        BiasMap { min: -1.0, max: 1.0 }
    }

    #[test]
    fn symbol_duration_matches_tau() {
        assert_relative_eq!(spec().symbol_duration_s() * 1e12, 84.144, epsilon = 1e-3);
    }

    #[test]
    fn zero_input_frame_layout() {
        let w = encode_waveform(&[0.0; 49], 0.5, unit_map(), &spec(), &ImpairmentConfig::default()).unwrap();
        assert_eq!(w.samples.len(), 260);
        assert!(w.samples[..245].iter().all(|&v| v == 0.0));
        assert_eq!(w.slot_centre(49), Some(1.0));
        assert_eq!(w.slot_centre(50), Some(1.0));
        let bias_level = w.slot_centre(51).unwrap();
        assert_relative_eq!(bias_level, (0.75f64 * 255.0).round() / 255.0);
    }

    #[test]
    fn awg_quantization_rounds_to_grid() {
        let imp = ImpairmentConfig::default();
        let w = encode_waveform(&[1.0 / 512.0, 0.5], 0.0, unit_map(), &spec(), &imp).unwrap();
        assert_eq!(w.slot_centre(0), Some(0.0));
        assert_eq!(w.slot_centre(1), Some(128.0 / 255.0));
        let raw = encode_waveform(&[1.0 / 512.0], 0.0, unit_map(), &spec(), &ImpairmentConfig::ideal()).unwrap();
        assert_eq!(raw.slot_centre(0), Some(1.0 / 512.0));
    }

    #[test]
    fn out_of_range_feature_is_domain_error() {
        let r = encode_waveform(&[0.2, 1.5], 0.0, unit_map(), &spec(), &ImpairmentConfig::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn bandwidth_filter_smooths_edges_and_stays_nonnegative() {
        let imp = ImpairmentConfig {
            bandwidth_filter: true,
            ..ImpairmentConfig::ideal()
        };
        let w = encode_waveform(&[0.0, 1.0, 0.0], 0.0, unit_map(), &spec(), &imp).unwrap();
        assert!(w.samples[5] < 1.0 && w.samples[5] > 0.0);
        assert!(w.samples[10] > 0.0);
        assert!(w.samples.iter().all(|&v| v >= 0.0));
    }

    fn comb_with(powers: Vec<f64>) -> ShapedComb {
        let n = powers.len();
        let mut c = shape_weights(&vec![1.0; n], &vec![1.0; n], &ShaperConfig::ideal()).unwrap();
        c.line_powers_linear = powers;
        c
    }

    #[test]
    fn broadcast_scales_each_line() {
        let w = encode_waveform(&[0.2, 0.7, 1.0], 0.0, unit_map(), &spec(), &ImpairmentConfig::ideal()).unwrap();
        let bank = broadcast_modulate(&w, &comb_with(vec![1.0; 3])).unwrap();
        for ch in &bank.channels {
            assert_eq!(ch.as_slice(), &w.samples[..15]);
        }
        assert_eq!(bank.pilot.as_slice(), &w.samples[15..]);

        let bank = broadcast_modulate(&w, &comb_with(vec![0.5, 0.0, 0.25])).unwrap();
        assert!(bank.channels[1].iter().all(|&v| v == 0.0));
        let peak = bank.channels[0].iter().copied().fold(0.0, f64::max);
        assert_relative_eq!(peak, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn nominal_and_dispersion_delays() {
        let comb = CombSpec::default();
        let fiber = FiberSpec::default();
        assert_eq!(channel_delay_ps(49, 49, &spec(), &fiber, &comb).unwrap(), 0.0);
        let d1 = channel_delay_ps(1, 49, &spec(), &fiber, &comb).unwrap();
        assert_relative_eq!(d1, 48.0 * 84.144, epsilon = 0.1);

        let step = fiber.dispersion_step_ps(comb.fsr_hz, comb.center_wavelength_nm);
        assert_relative_eq!(step, 86.6, epsilon = 0.05);
        let dfib = FiberSpec {
            delay_mode: DelayMode::DispersionDerived,
            ..fiber.clone()
        };
        assert_relative_eq!(channel_delay_ps(48, 49, &spec(), &dfib, &comb).unwrap(), step);

        assert!(matches!(
            channel_delay_ps(0, 49, &spec(), &fiber, &comb),
            Err(Error::Index { index: 0, max: 49 })
        ));
        assert!(matches!(
            channel_delay_ps(50, 49, &spec(), &fiber, &comb),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn jitter_is_seeded() {
        let fiber = FiberSpec {
            delay_jitter_ps_sigma: 2.0,
            ..FiberSpec::default()
        };
        let comb = CombSpec::default();
        let a = channel_delays_ps(49, &spec(), &fiber, &comb, 5).unwrap();
        assert_eq!(a, channel_delays_ps(49, &spec(), &fiber, &comb, 5).unwrap());
        assert_ne!(a, channel_delays_ps(49, &spec(), &fiber, &comb, 6).unwrap());
    }

    #[test]
    fn fibre_time_of_flight() {
        let t = FiberSpec::default().time_of_flight_s(1.468);
        assert_relative_eq!(t * 1e6, 63.66, epsilon = 0.01);
    }

    fn detect(x: &[f64], powers: Vec<f64>) -> ElectricalWaveform {
        let n = x.len();
        let w = encode_waveform(x, 0.0, unit_map(), &spec(), &ImpairmentConfig::ideal()).unwrap();
        let bank = broadcast_modulate(&w, &comb_with(powers)).unwrap();
        let delays: Vec<f64> = (1..=n)
            .map(|k| channel_delay_ps(k, n, &spec(), &FiberSpec::default(), &CombSpec::flat(n)).unwrap())
            .collect();
        photodetect(&bank, &delays, &ImpairmentConfig::ideal(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn single_undelayed_channel_passes_through() {
        let d = detect(&[0.3], vec![1.0]);
        assert_eq!(d.samples[..5], [0.3; 5]);
        assert_eq!(d.n_slots(), 4);
    }

    #[test]
    fn two_identical_channels_double() {
        let mut bank = broadcast_modulate(
            &encode_waveform(&[0.4], 0.0, unit_map(), &spec(), &ImpairmentConfig::ideal()).unwrap(),
            &comb_with(vec![1.0]),
        )
        .unwrap();
        bank.channels.push(bank.channels[0].clone());
        bank.frame.n_data_symbols = 1;
        let d = photodetect(&bank, &[0.0, 0.0], &ImpairmentConfig::ideal(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(d.samples[..5], [0.8; 5]);
    }

    #[test]
    fn three_tap_hand_convolution() {
        // x = [1,0,0], w = [0,0,1]: line 3 is undelayed, so x(1) shows up in
        // slot 0 only and the full-overlap slot 2 sees w(3) * x(3) = 0.
        let d = detect(&[1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]);
        let slots: Vec<f64> = (0..5).map(|s| d.slot_centre(s).unwrap()).collect();
        assert_eq!(slots, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let r = sample_and_recover(&d, 1.0).unwrap();
        assert_eq!(r.dot_product_estimate, 0.0);
    }

    #[test]
    fn recovery_one_hot_selects_element() {
        let x = [0.1, 0.8, 0.35, 0.6];
        for j in 0..4 {
            let mut p = vec![0.0; 4];
            p[j] = 1.0;
            let r = sample_and_recover(&detect(&x, p), 2.5).unwrap();
            assert_relative_eq!(r.dot_product_estimate, x[j] * 2.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn nonpositive_reference_is_recovery_error() {
        let mut d = detect(&[0.5, 0.5], vec![1.0, 1.0]);
        let f = d.frame.unwrap();
        let at = (f.pad_start_slot + 1) * d.samples_per_symbol + d.samples_per_symbol / 2;
        d.samples[at] = 0.0;
        assert!(matches!(sample_and_recover(&d, 1.0), Err(Error::Recovery(_))));
    }

    #[test]
    fn noise_is_seeded_and_clipped() {
        let w = encode_waveform(&[0.2, 0.9, 0.0, 0.4], 0.0, unit_map(), &spec(), &ImpairmentConfig::ideal()).unwrap();
        let bank = broadcast_modulate(&w, &comb_with(vec![1.0, 0.2, 0.6, 0.9])).unwrap();
        let delays: Vec<f64> = (1..=4).map(|k| (4 - k) as f64 * spec().symbol_duration_s() * 1e12).collect();
        let imp = ImpairmentConfig {
            electrical_snr_db: Some(6.0),
            ..ImpairmentConfig::ideal()
        };
        let a = photodetect(&bank, &delays, &imp, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = photodetect(&bank, &delays, &imp, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.iter().all(|&v| v >= 0.0));
        let clean = photodetect(&bank, &delays, &ImpairmentConfig::ideal(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_ne!(a.samples, clean.samples);
    }

    #[test]
    fn snr_for_bits() {
        assert_relative_eq!(snr_required_for_bits(8), 48.16, epsilon = 0.005);
        assert_eq!(snr_required_for_bits(8).round(), 48.0);
        assert_relative_eq!(snr_required_for_bits(1), 6.02, epsilon = 0.005);
        assert_relative_eq!(snr_required_for_bits(11), 66.23, epsilon = 0.005);
    }

    #[test]
    fn zero_weights_score_is_bias() {
        let chain = ChainConfig::default();
        let photonics = PhotonicsConfig::default();
        for b in [0.7, -0.4] {
            let model = PerceptronModel::new(vec![0.0; 49], b, WeightMode::Nonnegative).unwrap();
            let s = Sample {
                id: 0,
                features: vec![0.5; 49],
                label: 0,
            };
            let p = run_perceptron(&s, &model, &photonics, &chain).unwrap();
            assert_eq!(p.dot_product_estimate, 0.0);
            assert_relative_eq!(p.score, b, epsilon = 2.0 * b.abs() / 255.0);
            assert_eq!(p.class, u8::from(b > 0.0));
        }
    }

    #[test]
    fn zero_input_recovers_bias() {
        let model = PerceptronModel::new(vec![0.3; 49], -0.2, WeightMode::Nonnegative).unwrap();
        let s = Sample {
            id: 0,
            features: vec![0.0; 49],
            label: 0,
        };
        let p = run_perceptron(&s, &model, &PhotonicsConfig::ideal(49), &ChainConfig::ideal()).unwrap();
        assert_eq!(p.dot_product_estimate, 0.0);
        assert_relative_eq!(p.score, -0.2, epsilon = 1e-12);
    }
}
