//! Wengert tape: records the forward pass, replays it in reverse for
//! vector-Jacobian products.
//!
//! Tensor-valued intermediates live in `nodes`; learned buffers (conv
//! weights and biases) are snapshotted into `params` under their canonical
//! names. [`Tape::vjp`] seeds the cotangent of one output node and walks the
//! records in exact reverse forward order, accumulating gradients for every
//! node and parameter.

use crate::error::{Error, Result};
use crate::ops;
use crate::ops::ConvParams;
use crate::tensor::{self, Scalar, Tensor};

/// Index of a tensor-valued node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

/// Index of a parameter buffer registered on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(usize);

#[derive(Clone, Debug)]
struct ConvSpec {
    out_channels: usize,
    in_channels: usize,
    kernel: usize,
}

#[derive(Clone, Debug)]
enum Record {
    Leaf,
    Conv2d {
        x: NodeId,
        w: ParamId,
        b: ParamId,
        spec: ConvSpec,
    },
    SobelH {
        x: NodeId,
    },
    SobelW {
        x: NodeId,
    },
    LeakyRelu {
        x: NodeId,
    },
    SoftmaxSpatial {
        x: NodeId,
    },
    AdaptiveAvgPool {
        x: NodeId,
    },
    BilinearResize {
        x: NodeId,
    },
    GaussianDown {
        x: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Sub {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Scale {
        x: NodeId,
        factor: f64,
    },
    ChannelSlice {
        x: NodeId,
        start: usize,
    },
    ChannelConcat {
        parts: Vec<NodeId>,
    },
}

struct Node<T> {
    value: Tensor<T>,
    record: Record,
}

struct Param<T> {
    name: String,
    data: Vec<T>,
}

/// Gradients produced by [`Tape::vjp`].
#[derive(Debug)]
pub struct Gradients<T> {
    nodes: Vec<Option<Tensor<T>>>,
    params: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    /// Cotangent of a node; `None` when the node does not influence the
    /// seeded output.
    pub fn node(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.nodes[id.0].as_ref()
    }

    /// Flat gradient of a registered parameter buffer.
    pub fn param(&self, id: ParamId) -> &[T] {
        &self.params[id.0]
    }
}

/// Forward-pass recorder.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: Vec<Param<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor<T>, record: Record) -> NodeId {
        self.nodes.push(Node { value, record });
        NodeId(self.nodes.len() - 1)
    }

    /// Registers an externally supplied input tensor.
    pub fn leaf(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Record::Leaf)
    }

    /// Value computed for a node during the forward pass.
    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Registered parameters in registration order.
    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn param_name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn param_len(&self, id: ParamId) -> usize {
        self.params[id.0].data.len()
    }

    /// Snapshotted values of a registered parameter buffer.
    pub fn param_data(&self, id: ParamId) -> &[T] {
        &self.params[id.0].data
    }

    /// Records a convolution; the weights and bias are snapshotted as
    /// parameters named `{name}.weight` and `{name}.bias`.
    pub fn conv2d(&mut self, x: NodeId, p: &ConvParams<T>, name: &str) -> Result<NodeId> {
        let value = ops::conv2d(self.value(x), p)?;
        let w = ParamId(self.params.len());
        self.params.push(Param {
            name: format!("{name}.weight"),
            data: p.weights().to_vec(),
        });
        let b = ParamId(self.params.len());
        self.params.push(Param {
            name: format!("{name}.bias"),
            data: p.bias().to_vec(),
        });
        Ok(self.push(
            value,
            Record::Conv2d {
                x,
                w,
                b,
                spec: ConvSpec {
                    out_channels: p.out_channels(),
                    in_channels: p.in_channels(),
                    kernel: p.kernel(),
                },
            },
        ))
    }

    pub fn sobel_h(&mut self, x: NodeId) -> NodeId {
        let value = ops::sobel_h(self.value(x));
        self.push(value, Record::SobelH { x })
    }

    pub fn sobel_w(&mut self, x: NodeId) -> NodeId {
        let value = ops::sobel_w(self.value(x));
        self.push(value, Record::SobelW { x })
    }

    pub fn leaky_relu(&mut self, x: NodeId) -> NodeId {
        let value = ops::leaky_relu(self.value(x));
        self.push(value, Record::LeakyRelu { x })
    }

    pub fn softmax_spatial(&mut self, x: NodeId) -> NodeId {
        let value = ops::softmax_spatial(self.value(x));
        self.push(value, Record::SoftmaxSpatial { x })
    }

    pub fn adaptive_avg_pool(&mut self, x: NodeId, size: usize) -> Result<NodeId> {
        let value = ops::adaptive_avg_pool(self.value(x), size)?;
        Ok(self.push(value, Record::AdaptiveAvgPool { x }))
    }

    pub fn bilinear_resize(&mut self, x: NodeId, out_h: usize, out_w: usize) -> Result<NodeId> {
        let value = ops::bilinear_resize(self.value(x), out_h, out_w)?;
        Ok(self.push(value, Record::BilinearResize { x }))
    }

    pub fn gaussian_downsample(&mut self, x: NodeId) -> Result<NodeId> {
        let value = ops::gaussian_downsample(self.value(x))?;
        Ok(self.push(value, Record::GaussianDown { x }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = tensor::add(self.value(a), self.value(b))?;
        Ok(self.push(value, Record::Add { a, b }))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = tensor::sub(self.value(a), self.value(b))?;
        Ok(self.push(value, Record::Sub { a, b }))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = tensor::mul(self.value(a), self.value(b))?;
        Ok(self.push(value, Record::Mul { a, b }))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let value = tensor::scale(self.value(x), T::from_f64(factor));
        self.push(value, Record::Scale { x, factor })
    }

    /// Splits a node along the channel axis into one node per group.
    pub fn channel_split(&mut self, x: NodeId, group_sizes: &[usize]) -> Result<Vec<NodeId>> {
        let parts = tensor::channel_split(self.value(x), group_sizes)?;
        let mut ids = Vec::with_capacity(parts.len());
        let mut start = 0;
        for part in parts {
            let g = part.channels();
            ids.push(self.push(part, Record::ChannelSlice { x, start }));
            start += g;
        }
        Ok(ids)
    }

    pub fn channel_concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let tensors: Vec<Tensor<T>> = parts.iter().map(|&p| self.value(p).clone()).collect();
        let value = tensor::channel_concat(&tensors)?;
        Ok(self.push(
            value,
            Record::ChannelConcat {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Reverse pass: computes the gradient of `L = <seed, output>` with
    /// respect to every node and every registered parameter. The records are
    /// visited in exact reverse forward order.
    pub fn vjp(&self, output: NodeId, seed: &Tensor<T>) -> Result<Gradients<T>> {
        let out_dims = self.value(output).dims();
        if seed.dims() != out_dims {
            return Err(Error::SeedShape {
                expected: out_dims,
                got: seed.dims(),
            });
        }

        let mut grads = Gradients {
            nodes: (0..self.nodes.len()).map(|_| None).collect(),
            params: self
                .params
                .iter()
                .map(|p| vec![T::zero(); p.data.len()])
                .collect(),
        };
        grads.nodes[output.0] = Some(seed.clone());

        for idx in (0..self.nodes.len()).rev() {
            let g = match &grads.nodes[idx] {
                Some(g) => g.clone(),
                None => continue,
            };
            match &self.nodes[idx].record {
                Record::Leaf => {}
                Record::Conv2d { x, w, b, spec } => {
                    let p = ConvParams::new(
                        spec.out_channels,
                        spec.in_channels,
                        spec.kernel,
                        self.params[w.0].data.clone(),
                        self.params[b.0].data.clone(),
                    )?;
                    let (gx, gw, gb) = ops::conv2d_vjp(self.value(*x), &p, &g)?;
                    self.accumulate(&mut grads, *x, gx)?;
                    for (dst, src) in grads.params[w.0].iter_mut().zip(gw) {
                        *dst += src;
                    }
                    for (dst, src) in grads.params[b.0].iter_mut().zip(gb) {
                        *dst += src;
                    }
                }
                Record::SobelH { x } => {
                    let gx = ops::sobel_h_vjp(&g);
                    self.accumulate(&mut grads, *x, gx)?;
                }
                Record::SobelW { x } => {
                    let gx = ops::sobel_w_vjp(&g);
                    self.accumulate(&mut grads, *x, gx)?;
                }
                Record::LeakyRelu { x } => {
                    let gx = ops::leaky_relu_vjp(self.value(*x), &g);
                    self.accumulate(&mut grads, *x, gx)?;
                }
                Record::SoftmaxSpatial { x } => {
                    let gx = ops::softmax_spatial_vjp(&self.nodes[idx].value, &g);
                    self.accumulate(&mut grads, *x, gx)?;
                }
                Record::AdaptiveAvgPool { x } => {
                    let gx = ops::adaptive_avg_pool_vjp(self.value(*x).dims(), &g);
                    self.accumulate(&mut grads, *x, gx)?;
                }
                Record::BilinearResize { x } => {
                    let gx = ops::bilinear_resize_vjp(self.value(*x).dims(), &g);
                    self.accumulate(&mut grads, *x, gx)?;
                }
                Record::GaussianDown { x } => {
                    let gx = ops::gaussian_downsample_vjp(self.value(*x).dims(), &g);
                    self.accumulate(&mut grads, *x, gx)?;
                }
                Record::Add { a, b } => {
                    self.accumulate(&mut grads, *a, g.clone())?;
                    self.accumulate(&mut grads, *b, g)?;
                }
                Record::Sub { a, b } => {
                    self.accumulate(&mut grads, *a, g.clone())?;
                    self.accumulate(&mut grads, *b, tensor::scale(&g, -T::one()))?;
                }
                Record::Mul { a, b } => {
                    let ga = tensor::mul(&g, self.value(*b))?;
                    let gb = tensor::mul(&g, self.value(*a))?;
                    self.accumulate(&mut grads, *a, ga)?;
                    self.accumulate(&mut grads, *b, gb)?;
                }
                Record::Scale { x, factor } => {
                    let gx = tensor::scale(&g, T::from_f64(*factor));
                    self.accumulate(&mut grads, *x, gx)?;
                }
                Record::ChannelSlice { x, start } => {
                    let src = self.value(*x);
                    let mut gx = Tensor::zeros(src.channels(), src.height(), src.width());
                    let plane = src.height() * src.width();
                    let off = start * plane;
                    gx.data_mut()[off..off + g.len()].copy_from_slice(g.data());
                    self.accumulate(&mut grads, *x, gx)?;
                }
                Record::ChannelConcat { parts } => {
                    let sizes: Vec<usize> =
                        parts.iter().map(|&p| self.value(p).channels()).collect();
                    let slices = tensor::channel_split(&g, &sizes)?;
                    for (&p, gp) in parts.iter().zip(slices) {
                        self.accumulate(&mut grads, p, gp)?;
                    }
                }
            }
        }
        Ok(grads)
    }

    fn accumulate(&self, grads: &mut Gradients<T>, id: NodeId, g: Tensor<T>) -> Result<()> {
        match &mut grads.nodes[id.0] {
            Some(existing) => {
                existing.check_same_shape(&g)?;
                for (dst, src) in existing.data_mut().iter_mut().zip(g.data()) {
                    *dst += *src;
                }
            }
            slot @ None => *slot = Some(g),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_gradient_is_linear() {
        // L = sum(3 * x) has gradient 3 everywhere.
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_fn(1, 2, 2, |_, y, xx| (y * 2 + xx) as f64));
        let y = tape.scale(x, 3.0);
        let seed = Tensor::filled(1, 2, 2, 1.0f64);
        let grads = tape.vjp(y, &seed).unwrap();
        let gx = grads.node(x).unwrap();
        assert!(gx.data().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn leaky_relu_gradient_masks_by_sign() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(1, 1, 2, vec![-2.0f64, 5.0]).unwrap());
        let y = tape.leaky_relu(x);
        let seed = Tensor::filled(1, 1, 2, 1.0f64);
        let grads = tape.vjp(y, &seed).unwrap();
        assert_eq!(grads.node(x).unwrap().data(), &[0.01, 1.0]);
    }

    #[test]
    fn fanout_accumulates_gradients() {
        // y = x + x*x: dy/dx = 1 + 2x, summed over elements by an all-ones seed.
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(1, 1, 2, vec![2.0f64, -3.0]).unwrap());
        let sq = tape.mul(x, x).unwrap();
        let y = tape.add(x, sq).unwrap();
        let seed = Tensor::filled(1, 1, 2, 1.0f64);
        let grads = tape.vjp(y, &seed).unwrap();
        assert_eq!(grads.node(x).unwrap().data(), &[5.0, -5.0]);
    }

    #[test]
    fn split_concat_roundtrip_passes_gradient_through() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_fn(4, 2, 2, |c, y, xx| {
            (c * 4 + y * 2 + xx) as f64 * 0.1
        }));
        let parts = tape.channel_split(x, &[1, 3]).unwrap();
        let back = tape.channel_concat(&parts).unwrap();
        let seed = Tensor::from_fn(4, 2, 2, |c, _, _| (c + 1) as f64);
        let grads = tape.vjp(back, &seed).unwrap();
        assert_eq!(grads.node(x).unwrap(), &seed);
    }

    #[test]
    fn vjp_rejects_seed_shape_mismatch() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::<f64>::zeros(1, 2, 2));
        let y = tape.scale(x, 1.0);
        let seed = Tensor::<f64>::zeros(1, 2, 3);
        assert!(matches!(
            tape.vjp(y, &seed).unwrap_err(),
            Error::SeedShape { .. }
        ));
    }

    #[test]
    fn conv_params_are_registered_by_name() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::<f64>::zeros(3, 4, 4));
        let p = ConvParams::zeros(8, 3, 3).unwrap();
        tape.conv2d(x, &p, "stem").unwrap();
        let names: Vec<&str> = tape.param_ids().map(|id| tape.param_name(id)).collect();
        assert_eq!(names, ["stem.weight", "stem.bias"]);
    }
}
