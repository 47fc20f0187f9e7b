//! Convolutional encoder/decoder pair with power normalization.
//!
//! Encoder: affine input normalization `[0,1] -> [-1,1]`, then five 5x5
//! convolutions with strides (2, 2, 1, 1, 1), each followed by PReLU. The
//! last convolution has `ceil(2k / (H/4 * W/4))` channels; its flattened
//! output is truncated to exactly `2k` values with `k = round(rho * H * W)`.
//!
//! Decoder: zero-pads the `2k` received values back to the latent grid and
//! mirrors the encoder with five transposed convolutions (strides
//! 1, 1, 1, 2, 2), PReLU after all but the last, then a sigmoid.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::substream;

pub const KERNEL: usize = 5;
pub const PAD: usize = 2;
pub const HIDDEN: [usize; 4] = [16, 32, 32, 32];
pub const ENCODER_STRIDES: [usize; 5] = [2, 2, 1, 1, 1];
pub const DECODER_STRIDES: [usize; 5] = [1, 1, 1, 2, 2];
pub const INITIAL_SLOPE: f64 = 0.25;

/// Geometry of a model: image size, bandwidth ratio and latent layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelShape {
    pub height: usize,
    pub width: usize,
    /// Requested bandwidth ratio.
    pub rho: f64,
    /// Number of complex channel symbols.
    pub k: usize,
    /// Channels of the last encoder convolution.
    pub latent_channels: usize,
    pub power: f64,
}

impl ModelShape {
    pub fn new(height: usize, width: usize, rho: f64, power: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::invalid(format!("bandwidth ratio must lie in (0, 1), got {rho}")));
        }
        if height == 0 || width == 0 || height % 4 != 0 || width % 4 != 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be positive multiples of 4, got {height}x{width}"
            )));
        }
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::invalid(format!("power must be positive, got {power}")));
        }
        let n = height * width;
        let k = ((rho * n as f64).round() as usize).max(1);
        let grid = (height / 4) * (width / 4);
        let latent_channels = (2 * k).div_ceil(grid);
        Ok(ModelShape {
            height,
            width,
            rho,
            k,
            latent_channels,
            power,
        })
    }

    /// Source dimension `n = H * W` (single channel).
    pub fn n(&self) -> usize {
        self.height * self.width
    }

    /// Realized ratio `k / n`.
    pub fn realized_rho(&self) -> f64 {
        self.k as f64 / self.n() as f64
    }

    fn latent_grid(&self) -> (usize, usize) {
        (self.height / 4, self.width / 4)
    }

    fn encoder_channels(&self) -> [(usize, usize); 5] {
        [
            (1, HIDDEN[0]),
            (HIDDEN[0], HIDDEN[1]),
            (HIDDEN[1], HIDDEN[2]),
            (HIDDEN[2], HIDDEN[3]),
            (HIDDEN[3], self.latent_channels),
        ]
    }

    fn decoder_channels(&self) -> [(usize, usize); 5] {
        [
            (self.latent_channels, HIDDEN[3]),
            (HIDDEN[3], HIDDEN[2]),
            (HIDDEN[2], HIDDEN[1]),
            (HIDDEN[1], HIDDEN[0]),
            (HIDDEN[0], 1),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    /// Shared PReLU slope; `None` for a layer without activation.
    pub slope: Option<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub layers: Vec<ConvLayer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub layers: Vec<ConvLayer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsccModel {
    pub shape: ModelShape,
    pub seed: u64,
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
}

/// Kaiming-uniform bound for a PReLU network with slope `INITIAL_SLOPE`.
pub fn kaiming_bound(fan_in: usize) -> f64 {
    (6.0 / ((1.0 + INITIAL_SLOPE * INITIAL_SLOPE) * fan_in as f64)).sqrt()
}

fn init_layer(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize, bias_len: usize, activated: bool) -> ConvLayer {
    let bound = kaiming_bound(fan_in);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    ConvLayer {
        weight: Tensor::new(shape, data).expect("consistent init shape"),
        bias: Tensor::zeros(vec![bias_len]),
        slope: activated.then(|| Tensor::scalar(INITIAL_SLOPE)),
    }
}

/// Fresh parameters, reproducible from `seed`.
pub fn init_params(seed: u64, rho: f64, height: usize, width: usize) -> Result<JsccModel> {
    let shape = ModelShape::new(height, width, rho, 1.0)?;
    init_model(seed, shape)
}

pub fn init_model(seed: u64, shape: ModelShape) -> Result<JsccModel> {
    let mut rng = substream(seed, &[0x696e_6974]);
    let encoder = EncoderParams {
        layers: shape
            .encoder_channels()
            .iter()
            .map(|&(ci, co)| init_layer(&mut rng, vec![co, ci, KERNEL, KERNEL], ci * KERNEL * KERNEL, co, true))
            .collect(),
    };
    let decoder = DecoderParams {
        layers: shape
            .decoder_channels()
            .iter()
            .zip(DECODER_STRIDES)
            .enumerate()
            .map(|(i, (&(ci, co), stride))| {
                let fan_in = (ci * KERNEL * KERNEL).div_ceil(stride * stride);
                init_layer(&mut rng, vec![ci, co, KERNEL, KERNEL], fan_in, co, i + 1 < 5)
            })
            .collect(),
    };
    Ok(JsccModel {
        shape,
        seed,
        encoder,
        decoder,
    })
}

/// Graph leaves bound to one layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LayerNodes {
    pub weight: NodeId,
    pub bias: NodeId,
    pub slope: Option<NodeId>,
}

/// Graph leaves for every parameter, in [`JsccModel::params`] order.
#[derive(Debug, Clone)]
pub struct ParamNodes {
    pub encoder: Vec<LayerNodes>,
    pub decoder: Vec<LayerNodes>,
}

impl ParamNodes {
    pub fn all(&self) -> Vec<NodeId> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|l| [Some(l.weight), Some(l.bias), l.slope].into_iter().flatten())
            .collect()
    }
}

fn bind_layers(g: &mut Graph, layers: &[ConvLayer]) -> Vec<LayerNodes> {
    layers
        .iter()
        .map(|l| LayerNodes {
            weight: g.leaf(l.weight.clone()),
            bias: g.leaf(l.bias.clone()),
            slope: l.slope.as_ref().map(|s| g.leaf(s.clone())),
        })
        .collect()
}

impl JsccModel {
    /// All parameter tensors with stable names, encoder first.
    pub fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (prefix, layers) in [("enc", &self.encoder.layers), ("dec", &self.decoder.layers)] {
            for (i, l) in layers.iter().enumerate() {
                out.push((format!("{prefix}.{i}.weight"), &l.weight));
                out.push((format!("{prefix}.{i}.bias"), &l.bias));
                if let Some(s) = &l.slope {
                    out.push((format!("{prefix}.{i}.slope"), s));
                }
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layers in [&mut self.encoder.layers, &mut self.decoder.layers] {
            for l in layers.iter_mut() {
                out.push(&mut l.weight);
                out.push(&mut l.bias);
                if let Some(s) = &mut l.slope {
                    out.push(s);
                }
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn bind(&self, g: &mut Graph) -> ParamNodes {
        ParamNodes {
            encoder: bind_layers(g, &self.encoder.layers),
            decoder: bind_layers(g, &self.decoder.layers),
        }
    }

    /// Encoder graph from images `(N, 1, H, W)` to latents `(N, 2k)`.
    pub fn encode(&self, g: &mut Graph, p: &ParamNodes, x: NodeId) -> Result<NodeId> {
        let s = g.shape(x).to_vec();
        if s.len() != 4 || s[1] != 1 || s[2] != self.shape.height || s[3] != self.shape.width {
            return Err(Error::invalid(format!(
                "encoder expects (N, 1, {}, {}) input, got {s:?}",
                self.shape.height, self.shape.width
            )));
        }
        let batch = s[0];
        let mut h = g.affine(x, 2.0, -1.0)?;
        for (layer, stride) in p.encoder.iter().zip(ENCODER_STRIDES) {
            h = g.conv2d(h, layer.weight, layer.bias, stride, PAD)?;
            if let Some(a) = layer.slope {
                h = g.prelu(h, a)?;
            }
        }
        let flat_len = g.value(h).len() / batch;
        let flat = g.reshape(h, vec![batch, flat_len])?;
        g.truncate(flat, 2 * self.shape.k)
    }

    /// Decoder graph from received values `(N, 2k)` to images `(N, 1, H, W)`.
    pub fn decode(&self, g: &mut Graph, p: &ParamNodes, y: NodeId) -> Result<NodeId> {
        let s = g.shape(y).to_vec();
        if s.len() != 2 || s[1] != 2 * self.shape.k {
            return Err(Error::invalid(format!(
                "decoder expects (N, {}) input, got {s:?}",
                2 * self.shape.k
            )));
        }
        let batch = s[0];
        let (gh, gw) = self.shape.latent_grid();
        let c = self.shape.latent_channels;
        let padded = g.zero_pad(y, c * gh * gw)?;
        let mut h = g.reshape(padded, vec![batch, c, gh, gw])?;
        for (layer, stride) in p.decoder.iter().zip(DECODER_STRIDES) {
            h = g.conv_transpose2d(h, layer.weight, layer.bias, stride, PAD, stride - 1)?;
            if let Some(a) = layer.slope {
                h = g.prelu(h, a)?;
            }
        }
        g.sigmoid(h)
    }

    /// Stacks images into an `(N, 1, H, W)` tensor.
    pub fn batch_tensor(&self, images: &[&Image]) -> Result<Tensor> {
        let (h, w) = (self.shape.height, self.shape.width);
        let mut data = Vec::with_capacity(images.len() * h * w);
        for im in images {
            if (im.height(), im.width()) != (h, w) {
                return Err(Error::invalid(format!(
                    "model expects {h}x{w} images, got {}x{}",
                    im.height(),
                    im.width()
                )));
            }
            data.extend_from_slice(im.data());
        }
        Tensor::new(vec![images.len(), 1, h, w], data)
    }

    /// Inference-only encoder: one latent row per image.
    pub fn encode_images(&self, images: &[&Image]) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new();
        let p = self.bind(&mut g);
        let x = g.leaf(self.batch_tensor(images)?);
        let s = self.encode(&mut g, &p, x)?;
        Ok(g.value(s).data().chunks(2 * self.shape.k).map(<[f64]>::to_vec).collect())
    }

    /// Inference-only decoder.
    pub fn decode_latents(&self, rows: &[Vec<f64>]) -> Result<Vec<Image>> {
        let width = 2 * self.shape.k;
        let data: Vec<f64> = rows.concat();
        let mut g = Graph::new();
        let p = self.bind(&mut g);
        let y = g.leaf(Tensor::new(vec![rows.len(), width], data)?);
        let out = self.decode(&mut g, &p, y)?;
        let (h, w) = (self.shape.height, self.shape.width);
        g.value(out)
            .data()
            .chunks(h * w)
            .map(|c| Image::new(h, w, c.to_vec()))
            .collect()
    }
}

/// Per-row power normalization as a graph node: rows of `(N, 2k)` are
/// scaled so that `(1/k) Σ|z_l|² = power`. Errors on an all-zero row.
pub fn power_normalize(g: &mut Graph, s: NodeId, power: f64) -> Result<NodeId> {
    g.power_normalize(s, power)
}

/// Plain-vector version of [`power_normalize`] for one latent.
pub fn power_normalize_vec(s: &[f64], power: f64) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::new(vec![1, s.len()], s.to_vec())?);
    let z = g.power_normalize(x, power)?;
    Ok(g.value(z).data().to_vec())
}
