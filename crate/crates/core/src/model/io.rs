//! JSON network and instance files.
//!
//! Network file:
//!
//! ```json
//! {
//!   "input_dim": 2,
//!   "domain": [{"interval": [0, 1]}, {"interval": [0, 1]}],
//!   "layers": [
//!     {"weights": [[1, 1]], "bias": [-1.5], "activation": {"kind": "relu"}}
//!   ]
//! }
//! ```
//!
//! `activation` is either one object shared by the whole layer or a list with
//! one object per neuron. Kinds are `linear`, `relu`, `leaky` (needs `alpha`),
//! `clipped` (needs `cap`) and `max` (needs `pieces`). A `max` neuron with
//! `pieces = d` consumes `d` consecutive weight rows and bias entries.
//!
//! Instance file: `{"center": [...], "epsilon": 0.1, "source_label": 0,
//! "target_label": 1}`. `source_label` may be `null` to maximize the target
//! output alone; an optional `id` names the run in reports.

use serde::{Deserialize, Serialize};

use super::{AffineFunc, Activation, Block, Domain, Interval, Layer, Network, Neuron, VerificationInstance};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockSpec {
    Interval([f64; 2]),
    Simplex(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActivationSpecs {
    Shared(ActivationSpec),
    PerNeuron(Vec<ActivationSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: ActivationSpecs,
}

/// On-disk network representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub input_dim: usize,
    pub domain: Vec<BlockSpec>,
    pub layers: Vec<LayerSpec>,
}

/// On-disk instance representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub center: Vec<f64>,
    pub epsilon: f64,
    #[serde(default)]
    pub source_label: Option<usize>,
    pub target_label: usize,
}

pub fn load_network<T: Scalar>(text: &str) -> Result<Network<T>> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    file.into_network()
}

pub fn load_instance<T: Scalar>(text: &str) -> Result<VerificationInstance<T>> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| Error::Instance(e.to_string()))?;
    Ok(file.into_instance())
}

fn activation_of<T: Scalar>(spec: &ActivationSpec, layer: usize, neuron: usize) -> Result<(Activation<T>, usize)> {
    let bad = |reason: &str| Error::Activation {
        layer,
        neuron,
        reason: reason.to_string(),
    };
    let extra = |name: &str, present: bool| {
        if present {
            Err(bad(&format!("field `{name}` does not apply to kind `{}`", spec.kind)))
        } else {
            Ok(())
        }
    };
    let act = match spec.kind.as_str() {
        "linear" | "relu" => {
            extra("alpha", spec.alpha.is_some())?;
            extra("cap", spec.cap.is_some())?;
            extra("pieces", spec.pieces.is_some())?;
            if spec.kind == "linear" {
                (Activation::Linear, 1)
            } else {
                (Activation::Relu, 1)
            }
        }
        "leaky" => {
            extra("cap", spec.cap.is_some())?;
            extra("pieces", spec.pieces.is_some())?;
            let a = spec.alpha.ok_or_else(|| bad("leaky activation needs `alpha`"))?;
            (Activation::Leaky { alpha: T::lit(a) }, 1)
        }
        "clipped" => {
            extra("alpha", spec.alpha.is_some())?;
            extra("pieces", spec.pieces.is_some())?;
            let c = spec.cap.ok_or_else(|| bad("clipped activation needs `cap`"))?;
            (Activation::Clipped { cap: T::lit(c) }, 1)
        }
        "max" => {
            extra("alpha", spec.alpha.is_some())?;
            extra("cap", spec.cap.is_some())?;
            let d = spec.pieces.ok_or_else(|| bad("max activation needs `pieces`"))?;
            if d < 2 {
                return Err(bad("max activation needs at least two pieces"));
            }
            (Activation::Max, d)
        }
        other => return Err(bad(&format!("unknown activation kind `{other}`"))),
    };
    Ok(act)
}

impl NetworkFile {
    pub fn into_network<T: Scalar>(&self) -> Result<Network<T>> {
        if self.layers.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        let blocks = self
            .domain
            .iter()
            .map(|b| match *b {
                BlockSpec::Interval([lo, hi]) => Block::Interval(Interval::new(T::lit(lo), T::lit(hi))),
                BlockSpec::Simplex(p) => Block::Simplex(p),
            })
            .collect();
        let domain = Domain::new(blocks)?;

        let mut width = self.input_dim;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (l, spec) in self.layers.iter().enumerate() {
            let layer_no = l + 1;
            if spec.bias.len() != spec.weights.len() {
                return Err(Error::Schema(format!(
                    "layer {layer_no}: bias has {} entries but weights have {} rows",
                    spec.bias.len(),
                    spec.weights.len()
                )));
            }
            for row in &spec.weights {
                if row.len() != width {
                    return Err(Error::DimensionMismatch {
                        layer: layer_no,
                        expected: width,
                        found: row.len(),
                    });
                }
            }
            let mut neurons = Vec::new();
            let mut row = 0;
            let rows = spec.weights.len();
            while row < rows {
                let j = neurons.len();
                let act_spec = match &spec.activation {
                    ActivationSpecs::Shared(a) => a,
                    ActivationSpecs::PerNeuron(v) => v.get(j).ok_or_else(|| {
                        Error::Schema(format!("layer {layer_no}: no activation listed for neuron {j}"))
                    })?,
                };
                let (act, d) = activation_of::<T>(act_spec, layer_no, j)?;
                if row + d > rows {
                    return Err(Error::Schema(format!(
                        "layer {layer_no}: neuron {j} needs {d} weight rows, only {} remain",
                        rows - row
                    )));
                }
                let mut pieces = Vec::with_capacity(d);
                for r in row..row + d {
                    let w: Vec<T> = spec.weights[r].iter().map(|&v| T::lit(v)).collect();
                    let f = AffineFunc::new(w, T::lit(spec.bias[r]));
                    if !f.is_finite() {
                        return Err(Error::NonFinite { layer: layer_no, neuron: j });
                    }
                    pieces.push(f);
                }
                neurons.push(Neuron::new(pieces, act));
                row += d;
            }
            if let ActivationSpecs::PerNeuron(v) = &spec.activation {
                if v.len() != neurons.len() {
                    return Err(Error::Schema(format!(
                        "layer {layer_no}: {} activations listed for {} neurons",
                        v.len(),
                        neurons.len()
                    )));
                }
            }
            width = neurons.len();
            layers.push(Layer { neurons });
        }
        Network::new(self.input_dim, domain, layers)
    }

    pub fn from_network<T: Scalar>(net: &Network<T>) -> Self {
        let domain = net
            .domain
            .blocks
            .iter()
            .map(|b| match b {
                Block::Interval(iv) => BlockSpec::Interval([iv.lo.as_f64(), iv.hi.as_f64()]),
                Block::Simplex(p) => BlockSpec::Simplex(*p),
            })
            .collect();
        let layers = net
            .layers
            .iter()
            .map(|layer| {
                let mut weights = Vec::new();
                let mut bias = Vec::new();
                let mut acts = Vec::new();
                for n in &layer.neurons {
                    for p in &n.pieces {
                        weights.push(p.weights.iter().map(|w| w.as_f64()).collect());
                        bias.push(p.bias.as_f64());
                    }
                    let mut spec = ActivationSpec {
                        kind: n.activation.name().to_string(),
                        alpha: None,
                        cap: None,
                        pieces: None,
                    };
                    match n.activation {
                        Activation::Leaky { alpha } => spec.alpha = Some(alpha.as_f64()),
                        Activation::Clipped { cap } => spec.cap = Some(cap.as_f64()),
                        Activation::Max => spec.pieces = Some(n.pieces.len()),
                        _ => {}
                    }
                    acts.push(spec);
                }
                let activation = if acts.windows(2).all(|w| w[0] == w[1]) {
                    ActivationSpecs::Shared(acts.swap_remove(0))
                } else {
                    ActivationSpecs::PerNeuron(acts)
                };
                LayerSpec {
                    weights,
                    bias,
                    activation,
                }
            })
            .collect();
        Self {
            input_dim: net.input_dim,
            domain,
            layers,
        }
    }
}

impl InstanceFile {
    pub fn into_instance<T: Scalar>(&self) -> VerificationInstance<T> {
        VerificationInstance {
            id: self.id.clone(),
            center: self.center.iter().map(|&v| T::lit(v)).collect(),
            epsilon: T::lit(self.epsilon),
            source_label: self.source_label,
            target_label: self.target_label,
        }
    }

    pub fn from_instance<T: Scalar>(inst: &VerificationInstance<T>) -> Self {
        Self {
            id: inst.id.clone(),
            center: inst.center.iter().map(|v| v.as_f64()).collect(),
            epsilon: inst.epsilon.as_f64(),
            source_label: inst.source_label,
            target_label: inst.target_label,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE_RELU: &str = r#"{
        "input_dim": 2,
        "domain": [{"interval": [0, 1]}, {"interval": [0, 1]}],
        "layers": [{"weights": [[1, 1]], "bias": [-1.5], "activation": {"kind": "relu"}}]
    }"#;

    #[test]
    fn loads_single_relu() {
        let net: Network<f64> = load_network(SINGLE_RELU).unwrap();
        assert_eq!(net.input_dim, 2);
        assert_eq!(net.layers.len(), 1);
        assert_eq!(net.layers[0].neurons[0].activation, Activation::Relu);
        assert_eq!(net.forward(&[1.0, 1.0]), vec![0.5]);
    }

    #[test]
    fn empty_network_rejected() {
        let text = r#"{"input_dim": 1, "domain": [{"interval": [0, 1]}], "layers": []}"#;
        let err = load_network::<f64>(text).unwrap_err();
        assert!(err.to_string().contains("at least one layer"));
    }

    #[test]
    fn chaining_violation_names_the_layer() {
        let text = r#"{"input_dim": 2, "domain": [{"interval": [0, 1]}, {"interval": [0, 1]}],
            "layers": [
              {"weights": [[1, 0], [0, 1], [1, 1]], "bias": [0, 0, 0], "activation": {"kind": "relu"}},
              {"weights": [[1, 1, 1, 1]], "bias": [0], "activation": {"kind": "linear"}}
            ]}"#;
        let err = load_network::<f64>(text).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch at layer 2"), "{err}");
    }

    #[test]
    fn max_neurons_consume_several_rows() {
        let text = r#"{"input_dim": 1, "domain": [{"interval": [-1, 1]}],
            "layers": [{"weights": [[1], [-1], [2], [0]], "bias": [0, 0, 0, 0],
                        "activation": {"kind": "max", "pieces": 2}}]}"#;
        let net: Network<f64> = load_network(text).unwrap();
        assert_eq!(net.layers[0].neurons.len(), 2);
        assert_eq!(net.forward(&[-0.5]), vec![0.5, 0.0]);
    }

    #[test]
    fn per_neuron_activations_and_round_trip() {
        let text = r#"{"input_dim": 3, "domain": [{"simplex": 2}, {"interval": [-1, 1]}],
            "layers": [{"weights": [[1, 0, 1], [0, 1, -1]], "bias": [0.5, 0],
                        "activation": [{"kind": "leaky", "alpha": 0.1}, {"kind": "clipped", "cap": 1}]}]}"#;
        let net: Network<f64> = load_network(text).unwrap();
        let file = NetworkFile::from_network(&net);
        let again: Network<f64> = file.into_network().unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn missing_alpha_is_an_activation_error() {
        let text = r#"{"input_dim": 1, "domain": [{"interval": [0, 1]}],
            "layers": [{"weights": [[1]], "bias": [0], "activation": {"kind": "leaky"}}]}"#;
        assert!(matches!(
            load_network::<f64>(text),
            Err(Error::Activation { layer: 1, neuron: 0, .. })
        ));
    }

    #[test]
    fn non_finite_weight_reported_with_coordinates() {
        let text = r#"{"input_dim": 1, "domain": [{"interval": [0, 1]}],
            "layers": [{"weights": [[1e39]], "bias": [0], "activation": {"kind": "relu"}}]}"#;
        assert!(matches!(
            load_network::<f32>(text),
            Err(Error::NonFinite { layer: 1, neuron: 0 })
        ));
    }

    #[test]
    fn instance_with_null_source() {
        let inst: VerificationInstance<f64> =
            load_instance(r#"{"center": [0.5, 0.5], "epsilon": 0.5, "source_label": null, "target_label": 0}"#)
                .unwrap();
        assert_eq!(inst.source_label, None);
    }
}
