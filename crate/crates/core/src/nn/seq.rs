//! Sequential stacks of conv/norm/activation ops with explicit caches.
//!
//! The generator, discriminator and feature extractor are all plain
//! sequences; only the segmenter wires ops by hand (skip connections).

use ndarray::{Array1, Array4};
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::conv::{Conv2d, ConvGrad, ConvTranspose2d};
use super::norm::{BatchNorm2d, BnCache, BnGrad};
use crate::num::Real;

#[derive(Debug, Clone)]
pub enum Op<T: Real> {
    Conv(Conv2d<T>),
    ConvT(ConvTranspose2d<T>),
    Bn(BatchNorm2d<T>),
    Relu,
    LeakyRelu(T),
    Tanh,
    Sigmoid,
}

pub enum OpCache<T: Real> {
    Input(Array4<T>),
    Bn(BnCache<T>),
    Output(Array4<T>),
}

pub enum OpGrad<T: Real> {
    None,
    Conv(ConvGrad<T>),
    Bn(BnGrad<T>),
}

/// Serializable tensor snapshot used by the checkpoint container.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Default)]
pub struct Seq<T: Real> {
    pub ops: Vec<Op<T>>,
}

impl<T: Real> Seq<T> {
    pub fn new(ops: Vec<Op<T>>) -> Self {
        Self { ops }
    }

    pub fn forward_eval(&self, x: &Array4<T>) -> Array4<T> {
        let mut cur = x.clone();
        for op in &self.ops {
            cur = match op {
                Op::Conv(c) => c.forward(&cur),
                Op::ConvT(c) => c.forward(&cur),
                Op::Bn(bn) => bn.forward_eval(&cur),
                Op::Relu => cur.mapv(|v| v.max(T::zero())),
                Op::LeakyRelu(a) => {
                    let a = *a;
                    cur.mapv(|v| if v > T::zero() { v } else { a * v })
                }
                Op::Tanh => cur.mapv(|v| v.tanh()),
                Op::Sigmoid => cur.mapv(|v| T::one() / (T::one() + (-v).exp())),
            };
        }
        cur
    }

    /// Eval forward that also returns the activations after the listed op
    /// indices (feature-pyramid taps).
    pub fn forward_eval_taps(&self, x: &Array4<T>, taps: &[usize]) -> (Array4<T>, Vec<Array4<T>>) {
        let mut cur = x.clone();
        let mut out = Vec::with_capacity(taps.len());
        for (i, op) in self.ops.iter().enumerate() {
            cur = match op {
                Op::Conv(c) => c.forward(&cur),
                Op::ConvT(c) => c.forward(&cur),
                Op::Bn(bn) => bn.forward_eval(&cur),
                Op::Relu => cur.mapv(|v| v.max(T::zero())),
                Op::LeakyRelu(a) => {
                    let a = *a;
                    cur.mapv(|v| if v > T::zero() { v } else { a * v })
                }
                Op::Tanh => cur.mapv(|v| v.tanh()),
                Op::Sigmoid => cur.mapv(|v| T::one() / (T::one() + (-v).exp())),
            };
            if taps.contains(&i) {
                out.push(cur.clone());
            }
        }
        (cur, out)
    }

    /// Forward pass that records per-op caches for a later backward call.
    /// `Mode::Train` uses batch statistics in BN and updates running stats;
    /// `Mode::Eval` freezes them (the rewrite path differentiates through a
    /// frozen generator).
    pub fn forward_cached(&mut self, x: &Array4<T>, mode: Mode) -> (Array4<T>, Vec<OpCache<T>>) {
        let mut cur = x.clone();
        let mut caches = Vec::with_capacity(self.ops.len());
        for op in &mut self.ops {
            match op {
                Op::Conv(c) => {
                    caches.push(OpCache::Input(cur.clone()));
                    cur = c.forward(&cur);
                }
                Op::ConvT(c) => {
                    caches.push(OpCache::Input(cur.clone()));
                    cur = c.forward(&cur);
                }
                Op::Bn(bn) => {
                    let (y, cache) = match mode {
                        Mode::Train => bn.forward_train(&cur),
                        Mode::Eval => bn.forward_eval_cached(&cur),
                    };
                    caches.push(OpCache::Bn(cache));
                    cur = y;
                }
                Op::Relu => {
                    cur = cur.mapv(|v| v.max(T::zero()));
                    caches.push(OpCache::Output(cur.clone()));
                }
                Op::LeakyRelu(a) => {
                    let a = *a;
                    cur = cur.mapv(|v| if v > T::zero() { v } else { a * v });
                    caches.push(OpCache::Output(cur.clone()));
                }
                Op::Tanh => {
                    cur = cur.mapv(|v| v.tanh());
                    caches.push(OpCache::Output(cur.clone()));
                }
                Op::Sigmoid => {
                    cur = cur.mapv(|v| T::one() / (T::one() + (-v).exp()));
                    caches.push(OpCache::Output(cur.clone()));
                }
            }
        }
        (cur, caches)
    }

    fn backward_one(
        &self,
        idx: usize,
        cache: &OpCache<T>,
        gout: &Array4<T>,
        input_grad: bool,
        param_grads: bool,
    ) -> (Option<Array4<T>>, OpGrad<T>) {
        match (&self.ops[idx], cache) {
            (Op::Conv(c), OpCache::Input(x)) => {
                let (dx, g) = c.backward(x, gout, input_grad, param_grads);
                (dx, g.map(OpGrad::Conv).unwrap_or(OpGrad::None))
            }
            (Op::ConvT(c), OpCache::Input(x)) => {
                let (dx, g) = c.backward(x, gout, input_grad, param_grads);
                (dx, g.map(OpGrad::Conv).unwrap_or(OpGrad::None))
            }
            (Op::Bn(bn), OpCache::Bn(cache)) => {
                let (dx, g) = bn.backward(cache, gout, param_grads);
                (Some(dx), g.map(OpGrad::Bn).unwrap_or(OpGrad::None))
            }
            (Op::Relu, OpCache::Output(y)) => {
                let mut dx = gout.clone();
                dx.zip_mut_with(y, |g, &v| {
                    if v <= T::zero() {
                        *g = T::zero();
                    }
                });
                (Some(dx), OpGrad::None)
            }
            (Op::LeakyRelu(a), OpCache::Output(y)) => {
                let a = *a;
                let mut dx = gout.clone();
                dx.zip_mut_with(y, |g, &v| {
                    if v <= T::zero() {
                        *g = *g * a;
                    }
                });
                (Some(dx), OpGrad::None)
            }
            (Op::Tanh, OpCache::Output(y)) => {
                let mut dx = gout.clone();
                dx.zip_mut_with(y, |g, &v| *g = *g * (T::one() - v * v));
                (Some(dx), OpGrad::None)
            }
            (Op::Sigmoid, OpCache::Output(y)) => {
                let mut dx = gout.clone();
                dx.zip_mut_with(y, |g, &v| *g = *g * v * (T::one() - v));
                (Some(dx), OpGrad::None)
            }
            _ => unreachable!("cache kind mismatches op kind"),
        }
    }

    /// Full backward pass. Returns the input gradient (when requested) and
    /// one grad slot per op, aligned with `ops`.
    pub fn backward(
        &self,
        caches: &[OpCache<T>],
        gout: &Array4<T>,
        input_grad: bool,
    ) -> (Option<Array4<T>>, Vec<OpGrad<T>>) {
        let mut grads: Vec<OpGrad<T>> = (0..self.ops.len()).map(|_| OpGrad::None).collect();
        let mut g = gout.clone();
        for idx in (0..self.ops.len()).rev() {
            let need_input = idx > 0 || input_grad;
            let (dx, og) = self.backward_one(idx, &caches[idx], &g, need_input, true);
            grads[idx] = og;
            match dx {
                Some(dx) => g = dx,
                None => return (None, grads),
            }
        }
        (Some(g), grads)
    }

    /// Backprop to the input only, skipping every parameter gradient
    /// (discriminator during a generator step, extractor inside the
    /// perceptual distance).
    pub fn backward_input(&self, caches: &[OpCache<T>], gout: &Array4<T>) -> Array4<T> {
        let mut g = gout.clone();
        for idx in (0..self.ops.len()).rev() {
            let (dx, _) = self.backward_one(idx, &caches[idx], &g, true, false);
            g = dx.expect("input grad requested");
        }
        g
    }

    /// Backprop from the output down to op `target`, returning only that
    /// op's parameter gradient. Used to differentiate the rewrite objective
    /// with respect to a single layer's weights.
    pub fn backward_to_op(
        &self,
        caches: &[OpCache<T>],
        gout: &Array4<T>,
        target: usize,
    ) -> OpGrad<T> {
        let mut g = gout.clone();
        for idx in (target..self.ops.len()).rev() {
            if idx == target {
                let (_, og) = self.backward_one(idx, &caches[idx], &g, false, true);
                return og;
            }
            let (dx, _) = self.backward_one(idx, &caches[idx], &g, true, false);
            g = dx.expect("input grad requested");
        }
        unreachable!("target op index out of range")
    }

    /// Applies one Adam step over every trainable tensor, pairing `grads`
    /// with ops positionally.
    pub fn apply_grads(&mut self, grads: &[OpGrad<T>], adam: &mut Adam<T>) {
        let mut pairs: Vec<(&mut [T], &[T])> = Vec::new();
        for (op, grad) in self.ops.iter_mut().zip(grads.iter()) {
            match (op, grad) {
                (Op::Conv(c), OpGrad::Conv(g)) => {
                    pairs.push((c.weight.as_slice_mut().unwrap(), g.weight.as_slice().unwrap()));
                    pairs.push((c.bias.as_slice_mut().unwrap(), g.bias.as_slice().unwrap()));
                }
                (Op::ConvT(c), OpGrad::Conv(g)) => {
                    pairs.push((c.weight.as_slice_mut().unwrap(), g.weight.as_slice().unwrap()));
                    pairs.push((c.bias.as_slice_mut().unwrap(), g.bias.as_slice().unwrap()));
                }
                (Op::Bn(bn), OpGrad::Bn(g)) => {
                    pairs.push((bn.gamma.as_slice_mut().unwrap(), g.gamma.as_slice().unwrap()));
                    pairs.push((bn.beta.as_slice_mut().unwrap(), g.beta.as_slice().unwrap()));
                }
                (_, OpGrad::None) => {}
                _ => panic!("grad kind mismatches op kind"),
            }
        }
        adam.step(&mut pairs);
    }

    /// Indices of the ConvT ops, in order; "layer k" in a rewrite spec means
    /// the k-th entry here (1-based).
    pub fn conv_t_indices(&self) -> Vec<usize> {
        self.ops
            .iter()
            .enumerate()
            .filter_map(|(i, op)| matches!(op, Op::ConvT(_)).then_some(i))
            .collect()
    }

    pub fn export_tensors(&self) -> Vec<(String, Vec<usize>, Vec<f32>)> {
        let mut out = Vec::new();
        let mut push4 = |name: String, a: &Array4<T>, out: &mut Vec<(String, Vec<usize>, Vec<f32>)>| {
            out.push((
                name,
                a.shape().to_vec(),
                a.iter().map(|v| v.f32()).collect(),
            ));
        };
        for (i, op) in self.ops.iter().enumerate() {
            match op {
                Op::Conv(c) => {
                    push4(format!("op{i}.weight"), &c.weight, &mut out);
                    out.push((
                        format!("op{i}.bias"),
                        vec![c.bias.len()],
                        c.bias.iter().map(|v| v.f32()).collect(),
                    ));
                }
                Op::ConvT(c) => {
                    push4(format!("op{i}.weight"), &c.weight, &mut out);
                    out.push((
                        format!("op{i}.bias"),
                        vec![c.bias.len()],
                        c.bias.iter().map(|v| v.f32()).collect(),
                    ));
                }
                Op::Bn(bn) => {
                    for (suffix, arr) in [
                        ("gamma", &bn.gamma),
                        ("beta", &bn.beta),
                        ("running_mean", &bn.running_mean),
                        ("running_var", &bn.running_var),
                    ] {
                        out.push((
                            format!("op{i}.{suffix}"),
                            vec![arr.len()],
                            arr.iter().map(|v| v.f32()).collect(),
                        ));
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Loads tensors exported by [`Seq::export_tensors`]; shapes must match
    /// the current architecture.
    pub fn import_tensors(
        &mut self,
        tensors: &std::collections::HashMap<String, (Vec<usize>, Vec<f32>)>,
    ) -> Result<(), String> {
        let take = |name: &str, expect: &[usize]| -> Result<Vec<T>, String> {
            let (shape, data) = tensors
                .get(name)
                .ok_or_else(|| format!("missing tensor {name}"))?;
            if shape != expect {
                return Err(format!(
                    "tensor {name} has shape {shape:?}, expected {expect:?}"
                ));
            }
            Ok(data.iter().map(|&v| T::of_f32(v)).collect())
        };
        for (i, op) in self.ops.iter_mut().enumerate() {
            match op {
                Op::Conv(c) => {
                    let w = take(&format!("op{i}.weight"), c.weight.shape())?;
                    c.weight = Array4::from_shape_vec(c.weight.raw_dim(), w).unwrap();
                    let b = take(&format!("op{i}.bias"), &[c.bias.len()])?;
                    c.bias = Array1::from_vec(b);
                }
                Op::ConvT(c) => {
                    let w = take(&format!("op{i}.weight"), c.weight.shape())?;
                    c.weight = Array4::from_shape_vec(c.weight.raw_dim(), w).unwrap();
                    let b = take(&format!("op{i}.bias"), &[c.bias.len()])?;
                    c.bias = Array1::from_vec(b);
                }
                Op::Bn(bn) => {
                    let n = bn.gamma.len();
                    bn.gamma = Array1::from_vec(take(&format!("op{i}.gamma"), &[n])?);
                    bn.beta = Array1::from_vec(take(&format!("op{i}.beta"), &[n])?);
                    bn.running_mean =
                        Array1::from_vec(take(&format!("op{i}.running_mean"), &[n])?);
                    bn.running_var = Array1::from_vec(take(&format!("op{i}.running_var"), &[n])?);
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;

    #[test]
    fn eval_and_cached_eval_agree() {
        let mut seq = Seq::new(vec![
            Op::Conv(Conv2d::new(
                Array4::from_shape_fn((2, 1, 3, 3), |(a, b, c, d)| {
                    ((a * 9 + b + c * 3 + d) % 7) as f64 * 0.1 - 0.3
                }),
                ndarray::array![0.1, -0.2],
                1,
                1,
            )),
            Op::LeakyRelu(0.2),
            Op::Tanh,
        ]);
        let x = Array4::from_shape_fn((2, 1, 5, 5), |(a, _, c, d)| {
            ((a + c * 5 + d) % 11) as f64 * 0.2 - 1.0
        });
        let y1 = seq.forward_eval(&x);
        let (y2, _) = seq.forward_cached(&x, Mode::Eval);
        assert_eq!(y1, y2);
    }

    #[test]
    fn conv_t_indices_are_ordered() {
        let seq = Seq::<f32>::new(vec![
            Op::Relu,
            Op::ConvT(ConvTranspose2d::new(
                Array4::zeros((1, 1, 4, 4)),
                Array1::zeros(1),
                2,
                1,
            )),
            Op::Relu,
            Op::ConvT(ConvTranspose2d::new(
                Array4::zeros((1, 1, 4, 4)),
                Array1::zeros(1),
                2,
                1,
            )),
        ]);
        assert_eq!(seq.conv_t_indices(), vec![1, 3]);
    }
}
