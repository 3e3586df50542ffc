//! Model checkpoints in the shared tensor container.
//!
//! Tensor names: `heads` (`[kind, sizes...]`, kind 0 = softmax, 1 = sigmoid),
//! then per layer `layer{i}.weight`, `layer{i}.bias` and, for hidden layers,
//! `layer{i}.bn.{gamma,beta,running_mean,running_var,config}` where `config`
//! is `[momentum, eps]`.

use std::path::Path;

use super::layer::{BatchNorm, DenseLayer};
use super::model::{HeadLayout, MlpClassifier};
use crate::container::{self, find, Tensor};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MODEL_MAGIC: &[u8; 12] = b"IMSAT-MODEL\0";

pub fn to_tensors(model: &MlpClassifier) -> Vec<Tensor> {
    let mut out = Vec::new();
    let heads = match model.heads() {
        HeadLayout::Softmax(sizes) => std::iter::once(0.0).chain(sizes.iter().map(|&s| s as f64)).collect(),
        HeadLayout::Sigmoid(bits) => vec![1.0, *bits as f64],
    };
    out.push(Tensor::vector("heads", heads));
    for (i, l) in model.layers().iter().enumerate() {
        out.push(Tensor::new(
            format!("layer{i}.weight"),
            vec![l.fan_in() as u64, l.fan_out() as u64],
            l.weight.as_slice().to_vec(),
        ));
        out.push(Tensor::vector(format!("layer{i}.bias"), l.bias.clone()));
        if let Some(bn) = &l.bn {
            out.push(Tensor::vector(format!("layer{i}.bn.gamma"), bn.gamma.clone()));
            out.push(Tensor::vector(format!("layer{i}.bn.beta"), bn.beta.clone()));
            out.push(Tensor::vector(format!("layer{i}.bn.running_mean"), bn.running_mean.clone()));
            out.push(Tensor::vector(format!("layer{i}.bn.running_var"), bn.running_var.clone()));
            out.push(Tensor::vector(format!("layer{i}.bn.config"), vec![bn.momentum, bn.eps]));
        }
    }
    out
}

pub fn from_tensors(tensors: &[Tensor], origin: &str) -> Result<MlpClassifier> {
    let bad = |msg: String| Error::format(origin, "tensor table", msg);
    let heads_t = find(tensors, "heads", origin)?;
    let as_count = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 && v < 1e12 {
            Ok(v as usize)
        } else {
            Err(bad(format!("invalid count {v} in heads")))
        }
    };
    let heads = match heads_t.data.split_first() {
        Some((&k, rest)) if k == 0.0 => HeadLayout::Softmax(rest.iter().map(|&v| as_count(v)).collect::<Result<_>>()?),
        Some((&k, [bits])) if k == 1.0 => HeadLayout::Sigmoid(as_count(*bits)?),
        _ => return Err(bad("unrecognized head layout".into())),
    };

    let mut layers = Vec::new();
    for i in 0.. {
        let Some(w) = tensors.iter().find(|t| t.name == format!("layer{i}.weight")) else {
            break;
        };
        if w.dims.len() != 2 {
            return Err(bad(format!("layer{i}.weight must be rank 2")));
        }
        let (fan_in, fan_out) = (w.dims[0] as usize, w.dims[1] as usize);
        let vec_of = |name: String| -> Result<Vec<f64>> {
            let t = find(tensors, &name, origin)?;
            if t.data.len() != fan_out {
                return Err(bad(format!("{name} has {} entries, expected {fan_out}", t.data.len())));
            }
            Ok(t.data.clone())
        };
        let bias = vec_of(format!("layer{i}.bias"))?;
        let bn = if tensors.iter().any(|t| t.name == format!("layer{i}.bn.gamma")) {
            let cfg = find(tensors, &format!("layer{i}.bn.config"), origin)?;
            let [momentum, eps] = cfg.data[..] else {
                return Err(bad(format!("layer{i}.bn.config must hold [momentum, eps]")));
            };
            Some(BatchNorm {
                gamma: vec_of(format!("layer{i}.bn.gamma"))?,
                beta: vec_of(format!("layer{i}.bn.beta"))?,
                running_mean: vec_of(format!("layer{i}.bn.running_mean"))?,
                running_var: vec_of(format!("layer{i}.bn.running_var"))?,
                momentum,
                eps,
            })
        } else {
            None
        };
        let weight = Matrix::from_vec(fan_in, fan_out, w.data.clone()).map_err(|e| bad(e.to_string()))?;
        layers.push(DenseLayer { weight, bias, bn });
    }
    MlpClassifier::from_parts(layers, heads).map_err(|e| bad(e.to_string()))
}

pub fn save(model: &MlpClassifier, path: &Path) -> Result<()> {
    container::write_file(path, MODEL_MAGIC, &to_tensors(model))
}

pub fn load(path: &Path) -> Result<MlpClassifier> {
    let tensors = container::read_file(path, MODEL_MAGIC)?;
    from_tensors(&tensors, &path.display().to_string())
}

pub fn to_bytes(model: &MlpClassifier) -> Vec<u8> {
    container::encode(MODEL_MAGIC, &to_tensors(model))
}

pub fn from_bytes(bytes: &[u8]) -> Result<MlpClassifier> {
    from_tensors(&container::decode(bytes, MODEL_MAGIC, "<memory>")?, "<memory>")
}
