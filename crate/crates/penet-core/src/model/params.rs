//! Learned parameter sets for the enhancement network.
//!
//! Every tensor has a canonical name, `level{i}.{cb|eb|lef}.{layer}.{weight|bias}`,
//! and a canonical position: tensors are listed level 0 to 3 in forward
//! execution order. The weight container, the trainer and the gradient
//! suite all rely on this single ordering.

use crate::error::{Error, Result};
use crate::ops::ConvParams;
use crate::tensor::Scalar;

/// Width of the feature stage inside the context branch and the filter.
pub const FEATURE_CHANNELS: usize = 32;

/// Channel group sizes for the low-frequency filter split.
pub const LEF_GROUPS: [usize; 4] = [8, 8, 8, 8];

/// Pool size applied to each group, in group order.
pub const LEF_POOL_SIZES: [usize; 4] = [1, 2, 3, 6];

/// Number of per-component parameter sets.
pub const NUM_LEVELS: usize = crate::pyramid::PYRAMID_LEVELS;

/// Two 3x3 convolutions plus a 1x1 projection shortcut when the channel
/// count changes; the output activation is applied after the residual sum.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBlockParams<T> {
    pub conv_a: ConvParams<T>,
    pub conv_b: ConvParams<T>,
    /// Present exactly when `in_channels != out_channels`.
    pub proj: Option<ConvParams<T>>,
}

impl<T: Scalar> ResidualBlockParams<T> {
    pub fn new(
        conv_a: ConvParams<T>,
        conv_b: ConvParams<T>,
        proj: Option<ConvParams<T>>,
    ) -> Result<Self> {
        let (c_in, c_out) = (conv_a.in_channels(), conv_a.out_channels());
        if conv_b.in_channels() != c_out || conv_b.out_channels() != c_out {
            return Err(Error::ChannelMismatch {
                expected: c_out,
                got: conv_b.in_channels(),
            });
        }
        match &proj {
            Some(p) if c_in != c_out => {
                if p.in_channels() != c_in || p.out_channels() != c_out || p.kernel() != 1 {
                    return Err(Error::ChannelMismatch {
                        expected: c_out,
                        got: p.out_channels(),
                    });
                }
            }
            None if c_in == c_out => {}
            _ => {
                return Err(Error::ChannelMismatch {
                    expected: c_out,
                    got: c_in,
                });
            }
        }
        Ok(Self {
            conv_a,
            conv_b,
            proj,
        })
    }

    pub fn zeros(c_in: usize, c_out: usize) -> Result<Self> {
        let proj = if c_in != c_out {
            Some(ConvParams::zeros(c_out, c_in, 1)?)
        } else {
            None
        };
        Self::new(
            ConvParams::zeros(c_out, c_in, 3)?,
            ConvParams::zeros(c_out, c_out, 3)?,
            proj,
        )
    }

    pub fn in_channels(&self) -> usize {
        self.conv_a.in_channels()
    }

    pub fn out_channels(&self) -> usize {
        self.conv_a.out_channels()
    }
}

/// Context branch: residual block 3->32, spatial-softmax attention with the
/// two 3x3 feature convolutions, residual block 32->3.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextBranchParams<T> {
    pub rb1: ResidualBlockParams<T>,
    pub f1: ConvParams<T>,
    pub f2: ConvParams<T>,
    pub rb2: ResidualBlockParams<T>,
}

impl<T: Scalar> ContextBranchParams<T> {
    pub fn zeros() -> Result<Self> {
        Ok(Self {
            rb1: ResidualBlockParams::zeros(3, FEATURE_CHANNELS)?,
            f1: ConvParams::zeros(FEATURE_CHANNELS, FEATURE_CHANNELS, 3)?,
            f2: ConvParams::zeros(FEATURE_CHANNELS, FEATURE_CHANNELS, 3)?,
            rb2: ResidualBlockParams::zeros(FEATURE_CHANNELS, 3)?,
        })
    }
}

/// Edge branch: one learned 3x3 convolution over the summed Sobel responses.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeBranchParams<T> {
    pub f3: ConvParams<T>,
}

impl<T: Scalar> EdgeBranchParams<T> {
    pub fn zeros() -> Result<Self> {
        Ok(Self {
            f3: ConvParams::zeros(3, 3, 3)?,
        })
    }
}

/// Low-frequency enhancement filter: expand to 32 channels, pool the four
/// groups at sizes 1/2/3/6, upsample, restore to 3 channels.
#[derive(Clone, Debug, PartialEq)]
pub struct LefParams<T> {
    pub conv_in: ConvParams<T>,
    pub conv_out: ConvParams<T>,
}

impl<T: Scalar> LefParams<T> {
    pub fn zeros() -> Result<Self> {
        Ok(Self {
            conv_in: ConvParams::zeros(FEATURE_CHANNELS, 3, 3)?,
            conv_out: ConvParams::zeros(3, FEATURE_CHANNELS, 3)?,
        })
    }
}

/// Parameters enhancing one pyramid component.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelParams<T> {
    pub cb: ContextBranchParams<T>,
    pub eb: EdgeBranchParams<T>,
    pub lef: LefParams<T>,
}

impl<T: Scalar> LevelParams<T> {
    pub fn zeros() -> Result<Self> {
        Ok(Self {
            cb: ContextBranchParams::zeros()?,
            eb: EdgeBranchParams::zeros()?,
            lef: LefParams::zeros()?,
        })
    }
}

/// The full parameter set: one independent [`LevelParams`] per pyramid
/// component, finest first.
#[derive(Clone, Debug, PartialEq)]
pub struct PENetParams<T> {
    pub levels: Vec<LevelParams<T>>,
}

impl<T: Scalar> PENetParams<T> {
    pub fn zeros() -> Result<Self> {
        let mut levels = Vec::with_capacity(NUM_LEVELS);
        for _ in 0..NUM_LEVELS {
            levels.push(LevelParams::zeros()?);
        }
        Ok(Self { levels })
    }

    /// Canonical `(name, conv)` walk in forward execution order.
    pub fn visit_convs<'a>(&'a self, mut f: impl FnMut(String, &'a ConvParams<T>)) {
        for (i, level) in self.levels.iter().enumerate() {
            let cb = format!("level{i}.cb");
            f(format!("{cb}.rb1.conv_a"), &level.cb.rb1.conv_a);
            f(format!("{cb}.rb1.conv_b"), &level.cb.rb1.conv_b);
            if let Some(p) = &level.cb.rb1.proj {
                f(format!("{cb}.rb1.proj"), p);
            }
            f(format!("{cb}.f2"), &level.cb.f2);
            f(format!("{cb}.f1"), &level.cb.f1);
            f(format!("{cb}.rb2.conv_a"), &level.cb.rb2.conv_a);
            f(format!("{cb}.rb2.conv_b"), &level.cb.rb2.conv_b);
            if let Some(p) = &level.cb.rb2.proj {
                f(format!("{cb}.rb2.proj"), p);
            }
            f(format!("level{i}.eb.f3"), &level.eb.f3);
            f(format!("level{i}.lef.conv_in"), &level.lef.conv_in);
            f(format!("level{i}.lef.conv_out"), &level.lef.conv_out);
        }
    }

    /// Mutable twin of [`Self::visit_convs`], same order.
    pub fn visit_convs_mut(&mut self, mut f: impl FnMut(String, &mut ConvParams<T>)) {
        for (i, level) in self.levels.iter_mut().enumerate() {
            let cb = format!("level{i}.cb");
            f(format!("{cb}.rb1.conv_a"), &mut level.cb.rb1.conv_a);
            f(format!("{cb}.rb1.conv_b"), &mut level.cb.rb1.conv_b);
            if let Some(p) = &mut level.cb.rb1.proj {
                f(format!("{cb}.rb1.proj"), p);
            }
            f(format!("{cb}.f2"), &mut level.cb.f2);
            f(format!("{cb}.f1"), &mut level.cb.f1);
            f(format!("{cb}.rb2.conv_a"), &mut level.cb.rb2.conv_a);
            f(format!("{cb}.rb2.conv_b"), &mut level.cb.rb2.conv_b);
            if let Some(p) = &mut level.cb.rb2.proj {
                f(format!("{cb}.rb2.proj"), p);
            }
            f(format!("level{i}.eb.f3"), &mut level.eb.f3);
            f(format!("level{i}.lef.conv_in"), &mut level.lef.conv_in);
            f(format!("level{i}.lef.conv_out"), &mut level.lef.conv_out);
        }
    }

    /// Canonical tensor names and shapes: each conv contributes
    /// `{name}.weight` then `{name}.bias`.
    pub fn schema() -> Vec<(String, Vec<usize>)> {
        let zero = Self::zeros().expect("static shapes are valid");
        let mut out = Vec::new();
        zero.visit_convs(|name, conv| {
            out.push((format!("{name}.weight"), conv.weight_shape()));
            out.push((format!("{name}.bias"), vec![conv.out_channels()]));
        });
        out
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        let mut n = 0;
        self.visit_convs(|_, conv| n += conv.weights().len() + conv.bias().len());
        n
    }

    /// Flattens every tensor into one vector, canonical order, weights
    /// before bias per conv.
    pub fn flatten_f64(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_scalars());
        self.visit_convs(|_, conv| {
            out.extend(conv.weights().iter().map(|v| v.as_f64()));
            out.extend(conv.bias().iter().map(|v| v.as_f64()));
        });
        out
    }

    /// Inverse of [`Self::flatten_f64`].
    pub fn assign_flat_f64(&mut self, flat: &[f64]) {
        let mut cursor = 0;
        self.visit_convs_mut(|_, conv| {
            for w in conv.weights_mut() {
                *w = T::from_f64(flat[cursor]);
                cursor += 1;
            }
            for b in conv.bias_mut() {
                *b = T::from_f64(flat[cursor]);
                cursor += 1;
            }
        });
        assert_eq!(cursor, flat.len(), "flat parameter vector length mismatch");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_has_88_tensors_and_canonical_names() {
        let schema = PENetParams::<f32>::schema();
        assert_eq!(schema.len(), 88);
        assert_eq!(schema[0].0, "level0.cb.rb1.conv_a.weight");
        assert_eq!(schema[0].1, vec![32, 3, 3, 3]);
        assert_eq!(schema[1].0, "level0.cb.rb1.conv_a.bias");
        assert!(schema.iter().any(|(n, _)| n == "level0.eb.f3.weight"));
        assert!(schema.iter().any(|(n, _)| n == "level3.lef.conv_out.bias"));
        // Names are unique.
        let mut names: Vec<&String> = schema.iter().map(|(n, _)| n).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 88);
    }

    #[test]
    fn scalar_count_matches_shapes() {
        let p = PENetParams::<f32>::zeros().unwrap();
        let by_schema: usize = PENetParams::<f32>::schema()
            .iter()
            .map(|(_, shape)| shape.iter().product::<usize>())
            .sum();
        assert_eq!(p.num_scalars(), by_schema);
        assert_eq!(p.num_scalars(), 126_660);
    }

    #[test]
    fn flatten_assign_roundtrip() {
        let mut p = PENetParams::<f64>::zeros().unwrap();
        let flat: Vec<f64> = (0..p.num_scalars()).map(|i| i as f64 * 0.001).collect();
        p.assign_flat_f64(&flat);
        assert_eq!(p.flatten_f64(), flat);
    }

    #[test]
    fn residual_block_rejects_inconsistent_channels() {
        let conv_a = ConvParams::<f32>::zeros(32, 3, 3).unwrap();
        let conv_b = ConvParams::<f32>::zeros(32, 16, 3).unwrap();
        assert!(ResidualBlockParams::new(conv_a.clone(), conv_b, None).is_err());
        // Missing projection across a channel change.
        let conv_b = ConvParams::<f32>::zeros(32, 32, 3).unwrap();
        assert!(ResidualBlockParams::new(conv_a, conv_b, None).is_err());
    }
}
