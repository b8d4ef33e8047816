use std::fs;
use std::path::{Path, PathBuf};

use onn_core::capacity::{
    comparison_table, comparison_table_csv, network_throughput, perceptron_throughput, wavelengths_required,
    FrameConvention, LayerSpec, NetworkPlan,
};
use onn_core::dataset::{DatasetSplit, Sample};
use onn_core::model::{evaluate, predict_digital, train, Evaluation, PerceptronModel};
use onn_core::signalchain::{ElectricalWaveform, PhotonicPerceptron, PhotonicPrediction};
use onn_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{from_value, load_model, parse_json, RunConfig};
use crate::error::{CliError, Result};

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn model_path(dir: &Path, flag: Option<&Path>) -> PathBuf {
    flag.map_or_else(|| dir.join("model.json"), Path::to_path_buf)
}

fn nonempty_test(split: &DatasetSplit) -> Result<()> {
    if split.test.is_empty() {
        return Err(Error::EmptyInput("test set is empty".into()).into());
    }
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let split = cfg.load_split()?;
    let model = train(&split, &cfg.train)?;
    write(out, "model.json", &format!("{}\n", model.to_json()))?;
    let train_eval = evaluate(&model, &split.train)?;
    let test_eval = if split.test.is_empty() {
        None
    } else {
        Some(evaluate(&model, &split.test)?)
    };
    let report = json!({
        "command": "train",
        "config_echo": cfg.echo(),
        "n_train": split.train.len(),
        "n_test": split.test.len(),
        "final_loss": model.train_meta().map(|m| m.final_loss),
        "train_accuracy": train_eval.accuracy,
        "digital_accuracy": test_eval.as_ref().map(|e| e.accuracy),
        "confusion": test_eval.as_ref().map(|e| e.confusion),
    });
    write(out, "report.json", &pretty(&report))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SampleRecord {
    index: usize,
    id: usize,
    label: u8,
    digital_score: f64,
    digital_class: u8,
    dot_estimate: Option<f64>,
    score: Option<f64>,
    class: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Splits per-sample outcomes into predictions and recovery failures; any
/// other error aborts.
fn recovered(results: Vec<onn_core::Result<PhotonicPrediction>>) -> Result<Vec<Option<PhotonicPrediction>>> {
    results
        .into_iter()
        .map(|r| match r {
            Ok(p) => Ok(Some(p)),
            Err(Error::Recovery(_)) => Ok(None),
            Err(e) => Err(e.into()),
        })
        .collect()
}

fn photonic_accuracy(preds: &[Option<PhotonicPrediction>], samples: &[Sample]) -> f64 {
    let correct = preds
        .iter()
        .zip(samples)
        .filter(|(p, s)| p.as_ref().is_some_and(|p| p.class == s.label))
        .count();
    correct as f64 / samples.len() as f64
}

fn throughput_summary(cfg: &RunConfig, n: usize) -> Value {
    let tau = cfg.chain.waveform.symbol_duration_s();
    let bits = cfg.chain.waveform.awg_bits;
    json!({
        "symbol_duration_s": tau,
        "frame_2N": perceptron_throughput(n, tau, bits, FrameConvention::Frame2N),
        "frame_2N_minus_1": perceptron_throughput(n, tau, bits, FrameConvention::Frame2NMinus1),
    })
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path, model_file: Option<&Path>) -> Result<()> {
    let model = load_model(&model_path(out, model_file), cfg.task)?;
    let split = cfg.load_split()?;
    nonempty_test(&split)?;
    let engine = PhotonicPerceptron::new(&model, &cfg.photonics(), &cfg.chain)?;
    let preds = recovered(engine.predict_each(&split.test))?;

    let mut records = Vec::with_capacity(split.test.len());
    let mut lines = String::new();
    for (i, (p, s)) in preds.iter().zip(&split.test).enumerate() {
        let d = predict_digital(&model, s)?;
        let rec = SampleRecord {
            index: i,
            id: s.id,
            label: s.label,
            digital_score: d.score,
            digital_class: d.class,
            dot_estimate: p.as_ref().map(|p| p.dot_product_estimate),
            score: p.as_ref().map(|p| p.score),
            class: p.as_ref().map(|p| p.class),
            error: p.is_none().then(|| "reference symbol not recoverable".to_string()),
        };
        lines.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        lines.push('\n');
        records.push(rec);
    }
    write(out, "predictions.jsonl", &lines)?;

    let digital = evaluate(&model, &split.test)?;
    let photonic_confusion = Evaluation::from_pairs(
        preds
            .iter()
            .zip(&split.test)
            .filter_map(|(p, s)| p.as_ref().map(|p| (s.label, p.class))),
    )
    .ok()
    .map(|e| e.confusion);
    let agreement = records
        .iter()
        .filter(|r| r.class == Some(r.digital_class))
        .count() as f64
        / records.len() as f64;
    let report = json!({
        "command": "simulate",
        "config_echo": cfg.echo(),
        "model": { "n": model.n(), "bias": model.bias(), "weight_mode": model.weight_mode(), "train_meta": model.train_meta() },
        "n_test": split.test.len(),
        "digital_accuracy": digital.accuracy,
        "photonic_accuracy": photonic_accuracy(&preds, &split.test),
        "class_agreement": agreement,
        "unrecovered": preds.iter().filter(|p| p.is_none()).count(),
        "digital_confusion": digital.confusion,
        "photonic_confusion": photonic_confusion,
        "calibration": engine.shaped_comb().calibration,
        "weight_scale": engine.shaped_comb().weight_scale,
        "throughput": throughput_summary(cfg, model.n()),
        "per_sample": records,
    });
    write(out, "report.json", &pretty(&report))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    AwgBits,
    ShaperRangeDb,
}

impl SweepAxis {
    fn name(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::AwgBits => "awg_bits",
            SweepAxis::ShaperRangeDb => "shaper_range_db",
        }
    }

    fn apply(self, cfg: &mut RunConfig, value: f64) -> Result<()> {
        match self {
            SweepAxis::SnrDb => cfg.chain.impairments.electrical_snr_db = Some(value),
            SweepAxis::AwgBits => {
                if value.fract() != 0.0 || !(1.0..=52.0).contains(&value) {
                    return Err(CliError::Usage(format!("awg_bits value {value} is not an integer in 1..=52")));
                }
                cfg.chain.waveform.awg_bits = value as u32;
            }
            SweepAxis::ShaperRangeDb => cfg.photonics.shaper.attenuation_range_db = value,
        }
        Ok(())
    }
}

pub struct SweepRow {
    pub value: f64,
    pub mean_accuracy: f64,
    pub std: f64,
}

/// Accuracy at each axis value, over `seeds` impairment seeds starting at
/// the configured one.
pub fn sweep(cfg: &RunConfig, model: &PerceptronModel, axis: SweepAxis, values: &[f64], seeds: u64) -> Result<Vec<SweepRow>> {
    if values.is_empty() || seeds == 0 {
        return Err(CliError::Usage("sweep needs at least one value and one seed".into()));
    }
    let split = cfg.load_split()?;
    nonempty_test(&split)?;
    let base_seed = cfg.chain.impairments.seed;
    values
        .iter()
        .map(|&value| {
            let mut c = cfg.clone();
            axis.apply(&mut c, value)?;
            let accs = (0..seeds)
                .map(|s| {
                    c.chain.impairments.seed = base_seed.wrapping_add(s);
                    let engine = PhotonicPerceptron::new(model, &c.photonics(), &c.chain)?;
                    let preds = recovered(engine.predict_each(&split.test))?;
                    Ok(photonic_accuracy(&preds, &split.test))
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let var = if accs.len() > 1 {
                accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (accs.len() - 1) as f64
            } else {
                0.0
            };
            Ok(SweepRow {
                value,
                mean_accuracy: mean,
                std: var.sqrt(),
            })
        })
        .collect()
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path, model_file: Option<&Path>, axis: SweepAxis, values: &[f64], seeds: u64) -> Result<()> {
    let model = load_model(&model_path(out, model_file), cfg.task)?;
    let rows = sweep(cfg, &model, axis, values, seeds)?;
    let mut csv = String::from("value,mean_accuracy,std\n");
    for r in rows {
        csv.push_str(&format!("{},{},{}\n", r.value, r.mean_accuracy, r.std));
    }
    write(out, &format!("sweep_{}.csv", axis.name()), &csv)?;
    print!("{csv}");
    Ok(())
}

/// Network plan as written by hand: times in picoseconds.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub layers: Vec<LayerSpec>,
    pub tau_ps: f64,
    pub bit_depth: u32,
    #[serde(default = "default_buffer_latency_ps")]
    pub buffer_latency_ps: f64,
    #[serde(default = "default_buffer_count")]
    pub buffer_count: usize,
    #[serde(default)]
    pub convention: FrameConvention,
}

fn default_buffer_latency_ps() -> f64 {
    200.0
}

fn default_buffer_count() -> usize {
    1
}

impl PlanFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        from_value(parse_json(&text, path)?, path)
    }

    pub fn to_plan(&self) -> NetworkPlan {
        NetworkPlan {
            layers: self.layers.clone(),
            symbol_duration_s: self.tau_ps * 1e-12,
            bit_depth: self.bit_depth,
            buffer_latency_s: self.buffer_latency_ps * 1e-12,
            buffer_count: self.buffer_count,
            convention: self.convention,
        }
    }
}

pub fn plan_report(plan: &NetworkPlan) -> Result<Value> {
    let report = network_throughput(plan)?;
    let mut v = serde_json::to_value(&report).expect("report serializes");
    v["network_macs_s"] = json!(report.network_total_ops_s / 2.0);
    v["wavelengths"] = json!(wavelengths_required(plan)?);
    Ok(v)
}

pub fn cmd_plan(plan_file: &Path, output: Option<&Path>) -> Result<()> {
    let plan = PlanFile::load(plan_file)?.to_plan();
    let text = pretty(&plan_report(&plan)?);
    if let Some(path) = output {
        fs::write(path, &text).map_err(|e| CliError::io(path, e))?;
    }
    print!("{text}");
    Ok(())
}

fn channel_waveform(samples: &[f64], like: &ElectricalWaveform) -> ElectricalWaveform {
    ElectricalWaveform {
        samples: samples.to_vec(),
        sample_rate_hz: like.sample_rate_hz,
        samples_per_symbol: like.samples_per_symbol,
        frame: None,
    }
}

pub fn cmd_export_trace(cfg: &RunConfig, out: &Path, model_file: Option<&Path>, index: usize, per_channel: bool) -> Result<()> {
    let model = load_model(&model_path(out, model_file), cfg.task)?;
    let split = cfg.load_split()?;
    let sample = split.test.get(index).ok_or(CliError::SampleIndex {
        index,
        len: split.test.len(),
    })?;
    let engine = PhotonicPerceptron::new(&model, &cfg.photonics(), &cfg.chain)?;
    let (input, bank, detected) = engine.traces(sample, index)?;
    let dir = out.join(format!("trace_{index}"));
    write(&dir, "input.csv", &input.to_csv())?;
    write(&dir, "detected.csv", &detected.to_csv())?;
    if per_channel {
        let channels = dir.join("channels");
        for (k, ch) in bank.channels.iter().enumerate() {
            write(&channels, &format!("line_{:02}.csv", k + 1), &channel_waveform(ch, &input).to_csv())?;
        }
        write(&channels, "pilot.csv", &channel_waveform(&bank.pilot, &input).to_csv())?;
    }
    let frame = detected.frame.expect("detector keeps the frame");
    let centre_slot = frame.n_data_symbols - 1;
    let prediction = onn_core::signalchain::sample_and_recover(&detected, engine.shaped_comb().weight_scale);
    let meta = json!({
        "index": index,
        "id": sample.id,
        "label": sample.label,
        "samples_per_symbol": detected.samples_per_symbol,
        "sample_rate_hz": detected.sample_rate_hz,
        "frame": frame,
        "centre_slot": centre_slot,
        "centre_value": detected.slot_centre(centre_slot),
        "reference_value": detected.slot_centre(frame.pad_start_slot + 1),
        "bias_value": detected.slot_centre(frame.pad_start_slot + 2),
        "weight_scale": engine.shaped_comb().weight_scale,
        "dot_estimate": prediction.as_ref().ok().map(|p| p.dot_product_estimate),
        "score": prediction.as_ref().ok().map(|p| p.score),
        "class": prediction.as_ref().ok().map(|p| p.class),
    });
    write(&dir, "trace_meta.json", &pretty(&meta))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

pub fn cmd_table1(format: TableFormat) -> Result<()> {
    match format {
        TableFormat::Csv => print!("{}", comparison_table_csv()),
        TableFormat::Json => print!("{}", pretty(&comparison_table())),
    }
    Ok(())
}
