//! On-disk model format.
//!
//! A model file is a JSON document
//! `{input_dim, layers: [{rows, cols, activation, alpha?, weights, biases}]}`
//! with weights row-major and floats written in the shortest form that
//! parses back to identical bits, so a round trip reproduces forward
//! outputs exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Activation, Layer, Mlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub rows: usize,
    pub cols: usize,
    pub activation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub input_dim: usize,
    pub layers: Vec<LayerFile>,
}

impl ModelFile {
    pub fn from_net(net: &Mlp) -> Self {
        ModelFile {
            input_dim: net.input_dim(),
            layers: net
                .layers()
                .iter()
                .map(|l| {
                    let (activation, alpha) = match l.activation {
                        Activation::Identity => ("identity", None),
                        Activation::Relu => ("relu", None),
                        Activation::LeakyRelu { alpha } => ("leaky_relu", Some(alpha)),
                    };
                    LayerFile {
                        rows: l.output_dim,
                        cols: l.input_dim,
                        activation: activation.to_string(),
                        alpha,
                        weights: l.weights.clone(),
                        biases: l.biases.clone(),
                    }
                })
                .collect(),
        }
    }

    pub fn into_net(self) -> Result<Mlp> {
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut expect_in = self.input_dim;
        for (i, lf) in self.layers.into_iter().enumerate() {
            if lf.cols != expect_in {
                return Err(Error::Format(format!(
                    "layer {i} expects {} inputs but the chain provides {expect_in}",
                    lf.cols
                )));
            }
            let activation = match lf.activation.as_str() {
                "identity" => Activation::Identity,
                "relu" => Activation::Relu,
                "leaky_relu" => Activation::LeakyRelu {
                    alpha: lf.alpha.unwrap_or(0.01),
                },
                other => return Err(Error::Format(format!("unknown activation `{other}`"))),
            };
            expect_in = lf.rows;
            layers.push(Layer::new(lf.cols, lf.rows, lf.weights, lf.biases, activation)?);
        }
        Mlp::new(layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("model serialization: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("model parse: {e}")))
    }
}

/// Convenience wrappers.
pub fn save_net(net: &Mlp, path: &Path) -> Result<()> {
    ModelFile::from_net(net).save(path)
}

pub fn load_net(path: &Path) -> Result<Mlp> {
    ModelFile::load(path)?.into_net()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn json_round_trip_preserves_forward_bitwise() {
        let net = Mlp::from_dims(
            &[3, 7, 2],
            &[Activation::LeakyRelu { alpha: 0.01 }, Activation::Identity],
            &mut seeded(42),
        )
        .unwrap();
        let json = serde_json::to_string(&ModelFile::from_net(&net)).unwrap();
        let back: ModelFile = serde_json::from_str(&json).unwrap();
        let net2 = back.into_net().unwrap();
        for k in 0..50 {
            let x: Vec<f64> = (0..3).map(|j| ((k * 3 + j) as f64 * 0.77).sin() * 2.0).collect();
            let a = net.forward(&x).unwrap();
            let b = net2.forward(&x).unwrap();
            assert_eq!(a, b, "outputs must match bitwise");
        }
    }

    #[test]
    fn chain_mismatch_detected() {
        let mut mf = ModelFile::from_net(
            &Mlp::from_dims(&[2, 3, 1], &[Activation::Relu, Activation::Identity], &mut seeded(1)).unwrap(),
        );
        mf.layers[1].cols = 4;
        assert!(mf.into_net().is_err());
    }
}
