//! Comb source and programmable spectral shaping.
//!
//! The comb is a set of CW lines with a power profile. A first shaper stage
//! flattens the lines, a second imprints the (nonnegative) synaptic weights
//! as relative line powers, and a feedback loop against an optical spectrum
//! measurement trims the residual per-line loss error.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LINES: usize = 49;
pub const DEFAULT_FSR_HZ: f64 = 48.9e9;
pub const DEFAULT_CENTER_WAVELENGTH_NM: f64 = 1550.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombSpec {
    pub n_lines: usize,
    pub fsr_hz: f64,
    pub center_wavelength_nm: f64,
    pub raw_line_powers_dbm: Vec<f64>,
}

impl Default for CombSpec {
    fn default() -> Self {
        Self::flat(DEFAULT_LINES)
    }
}

impl CombSpec {
    /// Every line at 0 dBm.
    pub fn flat(n_lines: usize) -> Self {
        Self {
            n_lines,
            fsr_hz: DEFAULT_FSR_HZ,
            center_wavelength_nm: DEFAULT_CENTER_WAVELENGTH_NM,
            raw_line_powers_dbm: vec![0.0; n_lines],
        }
    }

    /// Lines following a sech² envelope centred on the middle line, peaking
    /// at `peak_dbm`. `width_lines` is the envelope half-width parameter in
    /// units of line spacing.
    pub fn sech2(n_lines: usize, peak_dbm: f64, width_lines: f64) -> Self {
        let centre = (n_lines as f64 - 1.0) / 2.0;
        let raw = (0..n_lines)
            .map(|k| {
                let sech = 1.0 / ((k as f64 - centre) / width_lines).cosh();
                peak_dbm + linear_to_db(sech * sech)
            })
            .collect();
        Self {
            raw_line_powers_dbm: raw,
            ..Self::flat(n_lines)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_lines == 0 {
            return Err(Error::Domain("comb needs at least one line".into()));
        }
        if !(self.fsr_hz > 0.0 && self.fsr_hz.is_finite()) {
            return Err(Error::Domain(format!("fsr_hz must be > 0, got {}", self.fsr_hz)));
        }
        if self.raw_line_powers_dbm.len() != self.n_lines {
            return Err(Error::Shape(format!(
                "comb declares {} lines but lists {} powers",
                self.n_lines,
                self.raw_line_powers_dbm.len()
            )));
        }
        if self.raw_line_powers_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("raw line powers must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShaperConfig {
    pub attenuation_range_db: f64,
    /// Per-sweep spectrum-analyser noise, Gaussian in dB.
    pub measurement_noise_sigma_db: f64,
    /// Static per-line error of the shaper's loss characteristic, Gaussian in dB.
    pub loss_error_sigma_db: f64,
    pub tolerance_db: f64,
    pub max_iterations: usize,
    /// Spectrum-analyser sweeps averaged per feedback measurement.
    pub osa_averages: usize,
    /// Snap line powers to the finite attenuation grid.
    pub quantize: bool,
}

impl Default for ShaperConfig {
    fn default() -> Self {
        Self {
            attenuation_range_db: 35.0,
            measurement_noise_sigma_db: 0.05,
            loss_error_sigma_db: 0.2,
            tolerance_db: 0.1,
            max_iterations: 8,
            osa_averages: 16,
            quantize: true,
        }
    }
}

impl ShaperConfig {
    /// Unbounded range, no quantization, no loss or measurement error.
    pub fn ideal() -> Self {
        Self {
            attenuation_range_db: f64::INFINITY,
            measurement_noise_sigma_db: 0.0,
            loss_error_sigma_db: 0.0,
            quantize: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.attenuation_range_db > 0.0) {
            return Err(Error::Domain(format!(
                "attenuation_range_db must be > 0, got {}",
                self.attenuation_range_db
            )));
        }
        if !(self.measurement_noise_sigma_db >= 0.0 && self.loss_error_sigma_db >= 0.0) {
            return Err(Error::Domain("shaper noise sigmas must be >= 0".into()));
        }
        if !(self.tolerance_db >= 0.0) {
            return Err(Error::Domain(format!(
                "tolerance_db must be >= 0, got {}",
                self.tolerance_db
            )));
        }
        if self.max_iterations == 0 || self.osa_averages == 0 {
            return Err(Error::Domain(
                "max_iterations and osa_averages must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Lowest nonzero relative power the shaper can produce.
    pub fn floor_linear(&self) -> f64 {
        db_to_linear(-self.attenuation_range_db)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationInfo {
    pub iterations: usize,
    pub converged: bool,
}

/// Weighted comb line powers, normalized so the strongest line is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapedComb {
    pub n_lines: usize,
    pub fsr_hz: f64,
    pub line_powers_linear: Vec<f64>,
    pub target_weights: Vec<f64>,
    /// Largest target weight; multiplying a normalized power by it returns
    /// model units.
    pub weight_scale: f64,
    pub calibration: CalibrationInfo,
}

impl ShapedComb {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comb serialization is infallible")
    }
}

/// Equalizes all lines to the weakest one. Fails if that would need more
/// attenuation than the shaper offers on any line, naming the lines that
/// sit more than the range below the strongest.
pub fn flatten_comb(comb: &CombSpec, shaper: &ShaperConfig) -> Result<Vec<f64>> {
    comb.validate()?;
    let raw = &comb.raw_line_powers_dbm;
    let peak = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weakest = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let too_weak: Vec<usize> = raw
        .iter()
        .enumerate()
        .filter(|(_, &p)| peak - p > shaper.attenuation_range_db)
        .map(|(k, _)| k)
        .collect();
    if !too_weak.is_empty() {
        return Err(Error::Unflattenable { lines: too_weak });
    }
    Ok(vec![db_to_linear(weakest); comb.n_lines])
}

/// Number of binary orders of magnitude that fit in the attenuation range.
pub fn effective_weight_bits(attenuation_range_db: f64) -> u32 {
    (attenuation_range_db / (10.0 * 2f64.log10())).floor() as u32
}

/// Snaps a relative power in `[0, 1]` to the shaper grid: zero below
/// `floor`, otherwise the nearest of `2^bits` uniform levels over
/// `[floor, 1]`.
pub fn quantize_line_power(p: f64, floor: f64, bits: u32) -> f64 {
    if p < floor {
        return 0.0;
    }
    let top = (2f64.powi(bits as i32) - 1.0).max(1.0);
    let step = (1.0 - floor) / top;
    let j = ((p - floor) / step).round().min(top);
    if j == top {
        1.0
    } else {
        floor + j * step
    }
}

/// Imprints `weights` onto flattened lines: relative power `w / max(w)`,
/// clamped to zero below the attenuation floor and optionally quantized.
pub fn shape_weights(flat_powers: &[f64], weights: &[f64], shaper: &ShaperConfig) -> Result<ShapedComb> {
    if flat_powers.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} comb lines but {} weights",
            flat_powers.len(),
            weights.len()
        )));
    }
    if let Some(k) = weights.iter().position(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::Domain(format!(
            "weight {k} = {} cannot be carried as optical power",
            weights[k]
        )));
    }
    let scale = weights.iter().copied().fold(0.0, f64::max);
    let floor = shaper.floor_linear();
    let bits = effective_weight_bits(shaper.attenuation_range_db);
    let powers = weights
        .iter()
        .map(|&w| {
            if scale == 0.0 {
                return 0.0;
            }
            let p = w / scale;
            if p < floor {
                0.0
            } else if shaper.quantize {
                quantize_line_power(p, floor, bits)
            } else {
                p
            }
        })
        .collect();
    Ok(ShapedComb {
        n_lines: weights.len(),
        fsr_hz: DEFAULT_FSR_HZ,
        line_powers_linear: powers,
        target_weights: weights.to_vec(),
        weight_scale: scale,
        calibration: CalibrationInfo::default(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutcome {
    pub achieved_powers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Feedback loop state for one shaper programming run.
struct Loop<'a> {
    targets: &'a [f64],
    loss_gain: Vec<f64>,
    setpoints: Vec<f64>,
    estimate_db_sum: Vec<f64>,
    noise: Normal<f64>,
    rng: ChaCha8Rng,
    rounds: usize,
}

impl<'a> Loop<'a> {
    fn new(targets: &'a [f64], shaper: &ShaperConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let loss = Normal::new(0.0, shaper.loss_error_sigma_db).expect("sigma validated");
        let loss_gain = targets
            .iter()
            .map(|_| db_to_linear(loss.sample(&mut rng)))
            .collect();
        let sigma = shaper.measurement_noise_sigma_db / (shaper.osa_averages as f64).sqrt();
        Self {
            targets,
            loss_gain,
            setpoints: targets.to_vec(),
            estimate_db_sum: vec![0.0; targets.len()],
            noise: Normal::new(0.0, sigma).expect("sigma validated"),
            rng,
            rounds: 0,
        }
    }

    fn achieved(&self) -> Vec<f64> {
        self.setpoints
            .iter()
            .zip(&self.loss_gain)
            .map(|(s, g)| s * g)
            .collect()
    }

    /// True per-line error of the current shaper state, dB.
    fn true_error_db(&self) -> Vec<f64> {
        self.achieved()
            .iter()
            .zip(self.targets)
            .filter(|(_, &t)| t > 0.0)
            .map(|(a, t)| linear_to_db(a / t))
            .collect()
    }

    /// Measures the shaped lines, folds the readings into the running loss
    /// estimate and returns the worst measured error, dB.
    fn step(&mut self) -> f64 {
        self.rounds += 1;
        let achieved = self.achieved();
        let mut worst: f64 = 0.0;
        for (k, a) in achieved.iter().enumerate() {
            let measured = a * db_to_linear(self.noise.sample(&mut self.rng));
            if self.targets[k] <= 0.0 {
                continue;
            }
            worst = worst.max(linear_to_db(measured / self.targets[k]).abs());
            self.estimate_db_sum[k] += linear_to_db(measured / self.setpoints[k]);
        }
        worst
    }

    fn correct(&mut self) {
        for k in 0..self.targets.len() {
            if self.targets[k] > 0.0 {
                let loss_db = self.estimate_db_sum[k] / self.rounds as f64;
                self.setpoints[k] = self.targets[k] * db_to_linear(-loss_db);
            }
        }
    }
}

fn check_targets(targets: &[f64]) -> Result<()> {
    if let Some(k) = targets.iter().position(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::Domain(format!("target power {k} = {} is not >= 0", targets[k])));
    }
    Ok(())
}

/// Iteratively programs the shaper toward `target_powers`.
///
/// Each round measures every line (spectrum-analyser noise averaged over
/// `osa_averages` sweeps) and stops once the worst measured error is within
/// `tolerance_db`. Otherwise the per-line loss characteristic is re-estimated
/// as the running mean of all measured/programmed ratios and the setpoints
/// are corrected. Zero-power lines are blocked and never measured.
pub fn calibrate(target_powers: &[f64], shaper: &ShaperConfig, rng_seed: u64) -> Result<CalibrationOutcome> {
    shaper.validate()?;
    check_targets(target_powers)?;
    let mut lp = Loop::new(target_powers, shaper, rng_seed);
    for round in 1..=shaper.max_iterations {
        let achieved = lp.achieved();
        if lp.step() <= shaper.tolerance_db {
            return Ok(CalibrationOutcome {
                achieved_powers: achieved,
                iterations: round,
                converged: true,
            });
        }
        if round < shaper.max_iterations {
            lp.correct();
        }
    }
    Ok(CalibrationOutcome {
        achieved_powers: lp.achieved(),
        iterations: shaper.max_iterations,
        converged: false,
    })
}

/// Mean absolute true line error (dB) at the start of each of the
/// `max_iterations` rounds, running the loop without early stopping.
pub fn calibration_error_history(target_powers: &[f64], shaper: &ShaperConfig, rng_seed: u64) -> Result<Vec<f64>> {
    shaper.validate()?;
    check_targets(target_powers)?;
    let mut lp = Loop::new(target_powers, shaper, rng_seed);
    let mut history = Vec::with_capacity(shaper.max_iterations);
    for _ in 0..shaper.max_iterations {
        let err = lp.true_error_db();
        history.push(if err.is_empty() {
            0.0
        } else {
            err.iter().map(|e| e.abs()).sum::<f64>() / err.len() as f64
        });
        lp.step();
        lp.correct();
    }
    Ok(history)
}

/// Both shaper stages plus feedback calibration: flatten the comb, imprint
/// the weights, then trim the result against the measured spectrum.
pub fn program_comb(comb: &CombSpec, weights: &[f64], shaper: &ShaperConfig, rng_seed: u64) -> Result<ShapedComb> {
    if weights.len() != comb.n_lines {
        return Err(Error::Shape(format!(
            "model has {} weights but the comb has {} lines",
            weights.len(),
            comb.n_lines
        )));
    }
    let flat = flatten_comb(comb, shaper)?;
    let mut shaped = shape_weights(&flat, weights, shaper)?;
    shaped.fsr_hz = comb.fsr_hz;
    let cal = calibrate(&shaped.line_powers_linear, shaper, rng_seed)?;
    shaped.line_powers_linear = cal.achieved_powers;
    shaped.calibration = CalibrationInfo {
        iterations: cal.iterations,
        converged: cal.converged,
    };
    Ok(shaped)
}
