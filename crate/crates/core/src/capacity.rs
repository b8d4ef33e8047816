//! Throughput, bit-rate, latency and wavelength-count arithmetic for the
//! single perceptron and for layered broadcast-and-delay networks.
//!
//! A neuron with `n` inputs produces a detector waveform `2n - 1` symbols
//! long (or `2n` when a guard slot is counted) that holds one useful
//! result: `n` MACs, i.e. `2n` operations. OPS and FLOPS are the same rate
//! here; reports use ops/s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameConvention {
    /// `2N` symbol slots per dot product.
    #[serde(rename = "frame_2N")]
    Frame2N,
    /// `2N - 1` symbol slots per dot product.
    #[default]
    #[serde(rename = "frame_2N_minus_1")]
    Frame2NMinus1,
}

impl FrameConvention {
    pub fn slots(self, n: usize) -> f64 {
        match self {
            FrameConvention::Frame2N => (2 * n) as f64,
            FrameConvention::Frame2NMinus1 => (2 * n - 1) as f64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrameConvention::Frame2N => "frame_2N",
            FrameConvention::Frame2NMinus1 => "frame_2N_minus_1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptronThroughput {
    pub convention: FrameConvention,
    pub macs_s: f64,
    pub ops_s: f64,
    pub bits_s: f64,
}

pub fn perceptron_throughput(n: usize, tau_s: f64, bits: u32, convention: FrameConvention) -> PerceptronThroughput {
    let macs_s = n as f64 / (convention.slots(n) * tau_s);
    let ops_s = 2.0 * macs_s;
    PerceptronThroughput {
        convention,
        macs_s,
        ops_s,
        bits_s: ops_s * f64::from(bits),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub n_neurons: usize,
}

impl LayerSpec {
    pub fn new(input_dim: usize, n_neurons: usize) -> Self {
        Self { input_dim, n_neurons }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerThroughput {
    pub input_dim: usize,
    pub n_neurons: usize,
    pub duration_s: f64,
    pub per_neuron_ops_s: f64,
    pub total_ops_s: f64,
    pub wavelengths: usize,
}

fn layer_with(layer: &LayerSpec, tau_s: f64, convention: FrameConvention) -> LayerThroughput {
    let duration_s = convention.slots(layer.input_dim) * tau_s;
    let per_neuron_ops_s = 2.0 * layer.input_dim as f64 / duration_s;
    LayerThroughput {
        input_dim: layer.input_dim,
        n_neurons: layer.n_neurons,
        duration_s,
        per_neuron_ops_s,
        total_ops_s: per_neuron_ops_s * layer.n_neurons as f64,
        wavelengths: layer.input_dim * layer.n_neurons,
    }
}

/// One layer under the `2N - 1` slot convention.
pub fn layer_throughput(layer: &LayerSpec, tau_s: f64) -> LayerThroughput {
    layer_with(layer, tau_s, FrameConvention::Frame2NMinus1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkPlan {
    pub layers: Vec<LayerSpec>,
    pub symbol_duration_s: f64,
    pub bit_depth: u32,
    pub buffer_latency_s: f64,
    pub buffer_count: usize,
    pub convention: FrameConvention,
}

impl NetworkPlan {
    pub fn new(layers: Vec<LayerSpec>, symbol_duration_s: f64, bit_depth: u32) -> Self {
        Self {
            layers,
            symbol_duration_s,
            bit_depth,
            buffer_latency_s: 200e-12,
            buffer_count: 1,
            convention: FrameConvention::Frame2NMinus1,
        }
    }

    /// One integrated buffer per layer instead of one for the whole network.
    pub fn with_per_layer_buffers(mut self) -> Self {
        self.buffer_count = self.layers.len();
        self
    }

    /// The two-layer digit classifier: 49 inputs, 7 hidden, 10 outputs at
    /// 84 ps per symbol and 8 bits.
    pub fn deep_onn_example() -> Self {
        Self::new(vec![LayerSpec::new(49, 7), LayerSpec::new(7, 10)], 84e-12, 8)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Plan("plan has no layers".into()));
        }
        self.validate_layers()?;
        self.validate_timing()
    }

    fn validate_layers(&self) -> Result<()> {
        if let Some(i) = self.layers.iter().position(|l| l.input_dim == 0 || l.n_neurons == 0) {
            return Err(Error::Plan(format!("layer {i} has a zero dimension")));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[1].input_dim != pair[0].n_neurons {
                return Err(Error::Plan(format!(
                    "layer {} has {} neurons but layer {} expects {} inputs",
                    i,
                    pair[0].n_neurons,
                    i + 1,
                    pair[1].input_dim
                )));
            }
        }
        Ok(())
    }

    fn validate_timing(&self) -> Result<()> {
        if !(self.symbol_duration_s > 0.0) || !(self.buffer_latency_s >= 0.0) || self.bit_depth == 0 {
            return Err(Error::Plan(
                "symbol duration and bit depth must be positive, buffer latency >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub convention: FrameConvention,
    pub per_layer: Vec<LayerThroughput>,
    pub network_total_ops_s: f64,
    pub network_bits_s: f64,
    pub latency_s: f64,
}

pub fn network_throughput(plan: &NetworkPlan) -> Result<ThroughputReport> {
    plan.validate()?;
    let per_layer: Vec<LayerThroughput> = plan
        .layers
        .iter()
        .map(|l| layer_with(l, plan.symbol_duration_s, plan.convention))
        .collect();
    let total: f64 = per_layer.iter().map(|l| l.total_ops_s).sum();
    Ok(ThroughputReport {
        convention: plan.convention,
        per_layer,
        network_total_ops_s: total,
        network_bits_s: total * f64::from(plan.bit_depth),
        latency_s: network_latency(plan)?,
    })
}

/// Buffer latency plus a re-sampling stage of twice each layer's waveform
/// duration. An empty layer list is allowed and costs only the buffers.
pub fn network_latency(plan: &NetworkPlan) -> Result<f64> {
    plan.validate_layers()?;
    plan.validate_timing()?;
    let resampling: f64 = plan
        .layers
        .iter()
        .map(|l| 2.0 * plan.convention.slots(l.input_dim) * plan.symbol_duration_s)
        .sum();
    Ok(plan.buffer_count as f64 * plan.buffer_latency_s + resampling)
}

pub fn wavelengths_required(plan: &NetworkPlan) -> Result<Vec<usize>> {
    plan.validate_layers()?;
    Ok(plan.layers.iter().map(|l| l.input_dim * l.n_neurons).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub ops_s: f64,
    pub bits_s: f64,
}

/// Back-of-envelope ceiling: every neuron in every layer delivers one
/// operation per symbol.
pub fn rough_potential(n_layers: usize, neurons_per_layer: usize, baud_hz: f64, bits: u32) -> Potential {
    let ops_s = n_layers as f64 * neurons_per_layer as f64 * baud_hz;
    Potential {
        ops_s,
        bits_s: ops_s * f64::from(bits),
    }
}

/// One row of the ONN comparison table. `None` marks an empty cell
/// (written as "—" in CSV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub approach: String,
    pub reference: Option<String>,
    pub compatibility: Option<String>,
    pub latency: Option<String>,
    pub ops: Option<String>,
    pub bits_s: Option<String>,
}

pub fn comparison_table() -> Vec<ComparisonRow> {
    let row = |approach: &str, reference: &str, compat: &str, latency: &str, ops: &str, bits: &str| {
        let opt = |s: &str| (s != "—").then(|| s.to_string());
        ComparisonRow {
            approach: approach.into(),
            reference: opt(reference),
            compatibility: opt(compat),
            latency: opt(latency),
            ops: opt(ops),
            bits_s: opt(bits),
        }
    };
    vec![
        row("Diffraction devices", "[17]", "—", "< 10 ns", "—", "—"),
        row("Integrated couplers", "[3]", "—", "< 0.1 ns", "—", "—"),
        row("Reservoir computing", "[20]", "Yes", "< 1 μs", "17.6 G", "—"),
        row("Spike computing", "[23]", "Yes", "< 1 μs", "8 G", "8 G"),
        row("Spike computing", "[24]", "—", "< 0.1 μs", "—", "—"),
        row("Single Perceptron", "[11]", "Yes", "64 μs", "11.9 G", "95.2 G"),
        row("Deep ONN", "[12]", "Yes", ">18.68 ns", ">10 T", ">80 T"),
    ]
}

pub fn comparison_table_csv() -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["approach", "reference", "compatibility", "latency", "ops", "bits_s"])
        .expect("in-memory write");
    for r in comparison_table() {
        let cell = |v: &Option<String>| v.clone().unwrap_or_else(|| "—".into());
        w.write_record([
            r.approach.clone(),
            cell(&r.reference),
            cell(&r.compatibility),
            cell(&r.latency),
            cell(&r.ops),
            cell(&r.bits_s),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TAU: f64 = 84e-12;

    #[test]
    fn single_perceptron_closed_form() {
        let p = perceptron_throughput(1, TAU, 8, FrameConvention::Frame2N);
        assert_relative_eq!(p.macs_s, 1.0 / (2.0 * TAU), max_relative = 1e-15);
        let p = perceptron_throughput(49, TAU, 8, FrameConvention::Frame2NMinus1);
        assert_relative_eq!(p.ops_s / 1e9, 98.0 / 8.148, max_relative = 1e-12);
    }

    #[test]
    fn unit_layer() {
        let l = layer_throughput(&LayerSpec::new(1, 1), TAU);
        assert_relative_eq!(l.per_neuron_ops_s, 2.0 / TAU, max_relative = 1e-15);
    }

    #[test]
    fn empty_and_broken_plans_are_plan_errors() {
        let mut plan = NetworkPlan::new(vec![], TAU, 8);
        assert!(matches!(network_throughput(&plan), Err(Error::Plan(_))));
        assert_relative_eq!(network_latency(&plan).unwrap(), 200e-12);
        plan.layers = vec![LayerSpec::new(49, 7), LayerSpec::new(8, 10)];
        match network_throughput(&plan) {
            Err(Error::Plan(msg)) => assert!(msg.contains("layer 0") && msg.contains("layer 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn per_layer_buffers() {
        let plan = NetworkPlan::deep_onn_example().with_per_layer_buffers();
        assert_relative_eq!(network_latency(&plan).unwrap() * 1e9, 18.88, epsilon = 1e-9);
    }

    #[test]
    fn potential_products() {
        let p = rough_potential(1, 1, 1.0, 1);
        assert_eq!((p.ops_s, p.bits_s), (1.0, 1.0));
        let p = rough_potential(2, 3, 10e9, 8);
        assert_relative_eq!(p.ops_s, 60e9);
        assert_relative_eq!(p.bits_s, 480e9);
    }

    #[test]
    fn table_rows_and_absent_markers() {
        let t = comparison_table();
        assert_eq!(t.len(), 7);
        let reservoir = t.iter().find(|r| r.approach == "Reservoir computing").unwrap();
        assert_eq!(reservoir.ops.as_deref(), Some("17.6 G"));
        assert_eq!(reservoir.bits_s, None);
        let csv = comparison_table_csv();
        assert!(csv.lines().next().unwrap().starts_with("approach,"));
        assert!(csv.contains("Diffraction devices,[17],—,< 10 ns,—,—"));
    }

    #[test]
    fn convention_names_round_trip_through_json() {
        let s = serde_json::to_string(&FrameConvention::Frame2N).unwrap();
        assert_eq!(s, "\"frame_2N\"");
        let c: FrameConvention = serde_json::from_str("\"frame_2N_minus_1\"").unwrap();
        assert_eq!(c, FrameConvention::Frame2NMinus1);
    }
}
