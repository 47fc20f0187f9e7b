use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::kernels::{self, ConvGeom};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Index of a node inside a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

/// Scalar function evaluated outside the graph.
///
/// Receives the values of its inputs and returns the scalar value together
/// with the gradient of that value with respect to every input.
pub type CustomFn = Arc<dyn Fn(&[&Tensor]) -> Result<(f64, Vec<Vec<f64>>)> + Send + Sync>;

#[derive(Clone)]
enum Op {
    Leaf,
    Conv2d { stride: usize, pad: usize },
    ConvTranspose2d { stride: usize, pad: usize, output_pad: usize },
    Prelu,
    Sigmoid,
    Add,
    Affine { scale: f64, shift: f64 },
    Reshape,
    Truncate,
    ZeroPad,
    Mse,
    PowerNormalize { power: f64 },
    ComplexGain { gains: Vec<[f64; 2]> },
    Custom { name: &'static str, func: CustomFn },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv2d { .. } => "conv2d",
            Op::ConvTranspose2d { .. } => "conv_transpose2d",
            Op::Prelu => "prelu",
            Op::Sigmoid => "sigmoid",
            Op::Add => "add",
            Op::Affine { .. } => "affine",
            Op::Reshape => "reshape",
            Op::Truncate => "truncate",
            Op::ZeroPad => "zero_pad",
            Op::Mse => "mse",
            Op::PowerNormalize { .. } => "power_normalize",
            Op::ComplexGain { .. } => "complex_gain",
            Op::Custom { name, .. } => name,
        }
    }
}

impl fmt::Debug for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    shape: Vec<usize>,
    value: Tensor,
    /// Input gradients cached by custom nodes during forward.
    custom_grads: Option<Vec<Vec<f64>>>,
}

/// Define-by-run computation graph.
///
/// Every builder method evaluates its node immediately, so values are
/// available while the graph is being assembled. [`Graph::forward`]
/// re-evaluates the whole graph after leaf values change.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    injected: HashMap<NodeId, Vec<f64>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    /// Gradient accumulated in a leaf by previous backward passes.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].value.grad()
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.value.zero_grad();
        }
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op: Op::Leaf,
            inputs: Vec::new(),
            shape: value.shape().to_vec(),
            value,
            custom_grads: None,
        });
        id
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, shape: Vec<usize>) -> Result<NodeId> {
        let id = self.nodes.len();
        for input in &inputs {
            if input.0 >= id {
                return Err(Error::invalid(format!(
                    "node {id} references node {} which does not precede it",
                    input.0
                )));
            }
        }
        let (value, custom_grads) = self.eval(id, &op, &inputs, &shape)?;
        self.nodes.push(Node {
            op,
            inputs,
            shape,
            value,
            custom_grads,
        });
        Ok(NodeId(id))
    }

    fn shape_err(node: usize, op: &'static str, detail: impl Into<String>) -> Error {
        Error::Shape {
            node,
            op,
            detail: detail.into(),
        }
    }

    /// 2-D convolution with square kernel and zero padding.
    /// `x`: (N, C_in, H, W); `w`: (C_out, C_in, K, K); `b`: (C_out).
    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize, pad: usize) -> Result<NodeId> {
        let id = self.nodes.len();
        let geom = self.conv_geom(id, x, w, b, stride, pad)?;
        let c_out = self.shape(w)[0];
        let shape = vec![geom.batch, c_out, geom.out_h, geom.out_w];
        self.push(Op::Conv2d { stride, pad }, vec![x, w, b], shape)
    }

    fn conv_geom(&self, id: usize, x: NodeId, w: NodeId, b: NodeId, stride: usize, pad: usize) -> Result<ConvGeom> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 4 || ws.len() != 4 || ws[2] != ws[3] {
            return Err(Self::shape_err(id, "conv2d", format!("input {xs:?}, weight {ws:?}")));
        }
        if xs[1] != ws[1] || bs != [ws[0]] {
            return Err(Self::shape_err(
                id,
                "conv2d",
                format!("input {xs:?}, weight {ws:?}, bias {bs:?}"),
            ));
        }
        let k = ws[2];
        let out_h = kernels::conv_out_len(xs[2], k, stride, pad)
            .ok_or_else(|| Self::shape_err(id, "conv2d", "kernel larger than padded input"))?;
        let out_w = kernels::conv_out_len(xs[3], k, stride, pad)
            .ok_or_else(|| Self::shape_err(id, "conv2d", "kernel larger than padded input"))?;
        Ok(ConvGeom {
            batch: xs[0],
            channels: xs[1],
            height: xs[2],
            width: xs[3],
            kernel: k,
            stride,
            pad,
            out_h,
            out_w,
        })
    }

    /// Transposed convolution. `w`: (C_in, C_out, K, K); `b`: (C_out).
    pub fn conv_transpose2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
        output_pad: usize,
    ) -> Result<NodeId> {
        let id = self.nodes.len();
        let geom = self.convt_geom(id, x, w, b, stride, pad, output_pad)?;
        let shape = vec![geom.batch, geom.channels, geom.height, geom.width];
        self.push(Op::ConvTranspose2d { stride, pad, output_pad }, vec![x, w, b], shape)
    }

    #[allow(clippy::too_many_arguments)]
    fn convt_geom(
        &self,
        id: usize,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
        output_pad: usize,
    ) -> Result<ConvGeom> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 4 || ws.len() != 4 || ws[2] != ws[3] || xs[1] != ws[0] || bs != [ws[1]] {
            return Err(Self::shape_err(
                id,
                "conv_transpose2d",
                format!("input {xs:?}, weight {ws:?}, bias {bs:?}"),
            ));
        }
        if output_pad >= stride.max(1) && output_pad > 0 {
            return Err(Self::shape_err(id, "conv_transpose2d", "output padding must be < stride"));
        }
        let k = ws[2];
        let bad = || Self::shape_err(id, "conv_transpose2d", "padding exceeds output extent");
        let height = kernels::conv_transpose_out_len(xs[2], k, stride, pad, output_pad).ok_or_else(bad)?;
        let width = kernels::conv_transpose_out_len(xs[3], k, stride, pad, output_pad).ok_or_else(bad)?;
        Ok(ConvGeom {
            batch: xs[0],
            channels: ws[1],
            height,
            width,
            kernel: k,
            stride,
            pad,
            out_h: xs[2],
            out_w: xs[3],
        })
    }

    /// PReLU with a single shared slope (`slope` has one element).
    pub fn prelu(&mut self, x: NodeId, slope: NodeId) -> Result<NodeId> {
        if self.nodes[slope.0].value.len() != 1 {
            return Err(Self::shape_err(self.len(), "prelu", "slope must hold one element"));
        }
        let shape = self.shape(x).to_vec();
        self.push(Op::Prelu, vec![x, slope], shape)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        self.push(Op::Sigmoid, vec![x], shape)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(Self::shape_err(
                self.len(),
                "add",
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let shape = self.shape(a).to_vec();
        self.push(Op::Add, vec![a, b], shape)
    }

    /// Elementwise `scale * x + shift`.
    pub fn affine(&mut self, x: NodeId, scale: f64, shift: f64) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        self.push(Op::Affine { scale, shift }, vec![x], shape)
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> Result<NodeId> {
        self.affine(x, factor, 0.0)
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let n: usize = shape.iter().product();
        if n != self.nodes[x.0].value.len() {
            return Err(Self::shape_err(
                self.len(),
                "reshape",
                format!("{:?} -> {shape:?}", self.shape(x)),
            ));
        }
        self.push(Op::Reshape, vec![x], shape)
    }

    /// Keeps the first `len` features of each row of a (N, F) tensor.
    pub fn truncate(&mut self, x: NodeId, len: usize) -> Result<NodeId> {
        let s = self.shape(x);
        if s.len() != 2 || len > s[1] {
            return Err(Self::shape_err(self.len(), "truncate", format!("{s:?} to width {len}")));
        }
        let shape = vec![s[0], len];
        self.push(Op::Truncate, vec![x], shape)
    }

    /// Appends zeros to each row of a (N, F) tensor up to width `len`.
    pub fn zero_pad(&mut self, x: NodeId, len: usize) -> Result<NodeId> {
        let s = self.shape(x);
        if s.len() != 2 || len < s[1] {
            return Err(Self::shape_err(self.len(), "zero_pad", format!("{s:?} to width {len}")));
        }
        let shape = vec![s[0], len];
        self.push(Op::ZeroPad, vec![x], shape)
    }

    /// Mean squared error over all elements.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(Self::shape_err(
                self.len(),
                "mse",
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        self.push(Op::Mse, vec![a, b], vec![1])
    }

    /// Scales each row `s` of a (N, 2k) tensor to `s * sqrt(k P) / ||s||`.
    pub fn power_normalize(&mut self, s: NodeId, power: f64) -> Result<NodeId> {
        let shape = self.shape(s).to_vec();
        if shape.len() != 2 || shape[1] == 0 || shape[1] % 2 != 0 {
            return Err(Self::shape_err(self.len(), "power_normalize", format!("{shape:?}")));
        }
        self.push(Op::PowerNormalize { power }, vec![s], shape)
    }

    /// Per-row complex gain plus additive term.
    ///
    /// `z` holds interleaved (re, im) symbols; the output and `noise` use the
    /// concatenated layout `[re_1..re_k, im_1..im_k]`.
    pub fn complex_gain(&mut self, z: NodeId, noise: NodeId, gains: Vec<[f64; 2]>) -> Result<NodeId> {
        let shape = self.shape(z).to_vec();
        if shape.len() != 2 || shape[1] % 2 != 0 || self.shape(noise) != shape.as_slice() || gains.len() != shape[0] {
            return Err(Self::shape_err(
                self.len(),
                "complex_gain",
                format!("z {shape:?}, noise {:?}, {} gains", self.shape(noise), gains.len()),
            ));
        }
        self.push(Op::ComplexGain { gains }, vec![z, noise], shape)
    }

    /// Scalar node whose value and input gradients come from `func`.
    pub fn custom(&mut self, name: &'static str, inputs: &[NodeId], func: CustomFn) -> Result<NodeId> {
        self.push(Op::Custom { name, func }, inputs.to_vec(), vec![1])
    }

    /// Registers an extra cotangent for `node`; the next backward pass
    /// treats it as if the loss contained a term with this gradient.
    pub fn inject_gradient(&mut self, node: NodeId, cotangent: Tensor) -> Result<()> {
        if cotangent.shape() != self.shape(node) {
            return Err(Self::shape_err(
                node.0,
                "inject_gradient",
                format!("cotangent {:?} vs node {:?}", cotangent.shape(), self.shape(node)),
            ));
        }
        let entry = self
            .injected
            .entry(node)
            .or_insert_with(|| vec![0.0; cotangent.len()]);
        entry.iter_mut().zip(cotangent.data()).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn clear_injected(&mut self) {
        self.injected.clear();
    }

    /// Replaces leaf values from `feeds` and recomputes every node in order.
    pub fn forward(&mut self, feeds: &HashMap<NodeId, Tensor>) -> Result<()> {
        for (id, t) in feeds {
            let node = self
                .nodes
                .get_mut(id.0)
                .ok_or_else(|| Error::invalid(format!("unknown node {}", id.0)))?;
            if !matches!(node.op, Op::Leaf) {
                return Err(Error::invalid(format!("node {} is not a leaf", id.0)));
            }
            if t.shape() != node.shape.as_slice() {
                return Err(Self::shape_err(
                    id.0,
                    "leaf",
                    format!("feed {:?} vs declared {:?}", t.shape(), node.shape),
                ));
            }
            node.value = t.clone();
        }
        for id in 0..self.nodes.len() {
            if matches!(self.nodes[id].op, Op::Leaf) {
                continue;
            }
            let node = &self.nodes[id];
            let (value, custom) = self.eval(id, &node.op, &node.inputs, &node.shape)?;
            let node = &mut self.nodes[id];
            node.value = value;
            node.custom_grads = custom;
        }
        Ok(())
    }

    fn eval(
        &self,
        id: usize,
        op: &Op,
        inputs: &[NodeId],
        shape: &[usize],
    ) -> Result<(Tensor, Option<Vec<Vec<f64>>>)> {
        let val = |i: usize| self.nodes[inputs[i].0].value.data();
        let out = match op {
            Op::Leaf => unreachable!("leaves are not evaluated"),
            Op::Conv2d { stride, pad } => {
                let geom = self.conv_geom(id, inputs[0], inputs[1], inputs[2], *stride, *pad)?;
                kernels::conv2d_forward(val(0), val(1), val(2), shape[1], &geom)
            }
            Op::ConvTranspose2d { stride, pad, output_pad } => {
                let geom = self.convt_geom(id, inputs[0], inputs[1], inputs[2], *stride, *pad, *output_pad)?;
                kernels::conv_transpose2d_forward(val(0), val(1), val(2), self.shape(inputs[0])[1], &geom)
            }
            Op::Prelu => {
                let a = val(1)[0];
                val(0).iter().map(|&x| if x > 0.0 { x } else { a * x }).collect()
            }
            Op::Sigmoid => val(0).iter().map(|&x| sigmoid(x)).collect(),
            Op::Add => val(0).iter().zip(val(1)).map(|(a, b)| a + b).collect(),
            Op::Affine { scale, shift } => val(0).iter().map(|x| scale * x + shift).collect(),
            Op::Reshape => val(0).to_vec(),
            Op::Truncate => {
                let in_w = self.shape(inputs[0])[1];
                val(0).chunks(in_w).flat_map(|row| row[..shape[1]].iter().copied()).collect()
            }
            Op::ZeroPad => {
                let in_w = self.shape(inputs[0])[1];
                let mut out = vec![0.0; shape[0] * shape[1]];
                for (dst, src) in out.chunks_mut(shape[1]).zip(val(0).chunks(in_w)) {
                    dst[..in_w].copy_from_slice(src);
                }
                out
            }
            Op::Mse => {
                let (a, b) = (val(0), val(1));
                let n = a.len().max(1) as f64;
                vec![a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n]
            }
            Op::PowerNormalize { power } => {
                let width = shape[1];
                let k = (width / 2) as f64;
                let mut out = Vec::with_capacity(val(0).len());
                for (row_idx, row) in val(0).chunks(width).enumerate() {
                    let norm_sq: f64 = row.iter().map(|v| v * v).sum();
                    if norm_sq <= 0.0 || !norm_sq.is_finite() {
                        return Err(Error::Degenerate(format!(
                            "power_normalize at node {id}: row {row_idx} has norm {norm_sq}"
                        )));
                    }
                    let alpha = (k * power / norm_sq).sqrt();
                    out.extend(row.iter().map(|v| v * alpha));
                }
                out
            }
            Op::ComplexGain { gains } => {
                let width = shape[1];
                let k = width / 2;
                let mut out = vec![0.0; val(0).len()];
                for (r, (zrow, nrow)) in val(0).chunks(width).zip(val(1).chunks(width)).enumerate() {
                    let [gr, gi] = gains[r];
                    let orow = &mut out[r * width..(r + 1) * width];
                    for l in 0..k {
                        let (zr, zi) = (zrow[2 * l], zrow[2 * l + 1]);
                        orow[l] = gr * zr - gi * zi + nrow[l];
                        orow[k + l] = gr * zi + gi * zr + nrow[k + l];
                    }
                }
                out
            }
            Op::Custom { func, .. } => {
                let vals: Vec<&Tensor> = inputs.iter().map(|i| &self.nodes[i.0].value).collect();
                let (v, grads) = func(&vals)?;
                if grads.len() != inputs.len() || grads.iter().zip(&vals).any(|(g, t)| g.len() != t.len()) {
                    return Err(Self::shape_err(id, op.name(), "custom gradient shapes do not match inputs"));
                }
                return Ok((Tensor::scalar(v), Some(grads)));
            }
        };
        Ok((Tensor::new(shape.to_vec(), out)?, None))
    }

    /// Reverse pass from a scalar `loss`, also consuming injected cotangents.
    /// Leaf gradients are accumulated into the leaves' grad slots.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let shape = self.shape(loss).to_vec();
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::NotScalar { node: loss.0, shape });
        }
        self.backward_impl(Some(loss))
    }

    /// Reverse pass driven only by injected cotangents.
    pub fn backward_injected(&mut self) -> Result<()> {
        self.backward_impl(None)
    }

    fn backward_impl(&mut self, loss: Option<NodeId>) -> Result<()> {
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        if let Some(l) = loss {
            grads[l.0] = Some(vec![1.0]);
        }
        for (node, cot) in &self.injected {
            accumulate(&mut grads[node.0], cot);
        }
        for id in (0..n).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if matches!(node.op, Op::Leaf) {
                grads[id] = Some(g);
                continue;
            }
            let input_grads = self.vjp(id, &g)?;
            for (input, ig) in node.inputs.iter().zip(input_grads) {
                if let Some(ig) = ig {
                    accumulate(&mut grads[input.0], &ig);
                }
            }
        }
        for (id, g) in grads.into_iter().enumerate() {
            if let Some(g) = g {
                self.nodes[id].value.accumulate_grad(&g);
            }
        }
        Ok(())
    }

    /// Vector-Jacobian product of node `id` for upstream gradient `g`.
    fn vjp(&self, id: usize, g: &[f64]) -> Result<Vec<Option<Vec<f64>>>> {
        let node = &self.nodes[id];
        let inputs = &node.inputs;
        let val = |i: usize| self.nodes[inputs[i].0].value.data();
        let out = node.value.data();
        let grads = match &node.op {
            Op::Leaf => Vec::new(),
            Op::Conv2d { stride, pad } => {
                let geom = self.conv_geom(id, inputs[0], inputs[1], inputs[2], *stride, *pad)?;
                let cg = kernels::conv2d_backward(val(0), val(1), g, node.shape[1], &geom);
                vec![Some(cg.input), Some(cg.weight), Some(cg.bias)]
            }
            Op::ConvTranspose2d { stride, pad, output_pad } => {
                let geom = self.convt_geom(id, inputs[0], inputs[1], inputs[2], *stride, *pad, *output_pad)?;
                let c_in = self.shape(inputs[0])[1];
                let cg = kernels::conv_transpose2d_backward(val(0), val(1), g, c_in, &geom);
                vec![Some(cg.input), Some(cg.weight), Some(cg.bias)]
            }
            Op::Prelu => {
                let a = val(1)[0];
                let x = val(0);
                let dx = x.iter().zip(g).map(|(&x, &g)| if x > 0.0 { g } else { a * g }).collect();
                let da = x.iter().zip(g).filter(|(&x, _)| x <= 0.0).map(|(x, g)| x * g).sum();
                vec![Some(dx), Some(vec![da])]
            }
            Op::Sigmoid => vec![Some(out.iter().zip(g).map(|(y, g)| g * y * (1.0 - y)).collect())],
            Op::Add => vec![Some(g.to_vec()), Some(g.to_vec())],
            Op::Affine { scale, .. } => vec![Some(g.iter().map(|g| g * scale).collect())],
            Op::Reshape => vec![Some(g.to_vec())],
            Op::Truncate => {
                let in_w = self.shape(inputs[0])[1];
                let w = node.shape[1];
                let mut dx = vec![0.0; val(0).len()];
                for (dst, src) in dx.chunks_mut(in_w).zip(g.chunks(w)) {
                    dst[..w].copy_from_slice(src);
                }
                vec![Some(dx)]
            }
            Op::ZeroPad => {
                let in_w = self.shape(inputs[0])[1];
                let w = node.shape[1];
                let dx = g.chunks(w).flat_map(|row| row[..in_w].iter().copied()).collect();
                vec![Some(dx)]
            }
            Op::Mse => {
                let (a, b) = (val(0), val(1));
                let scale = 2.0 * g[0] / a.len().max(1) as f64;
                let da: Vec<f64> = a.iter().zip(b).map(|(x, y)| scale * (x - y)).collect();
                let db = da.iter().map(|v| -v).collect();
                vec![Some(da), Some(db)]
            }
            Op::PowerNormalize { power } => {
                let width = node.shape[1];
                let k = (width / 2) as f64;
                let mut ds = Vec::with_capacity(g.len());
                for (row, grow) in val(0).chunks(width).zip(g.chunks(width)) {
                    let norm_sq: f64 = row.iter().map(|v| v * v).sum();
                    let alpha = (k * power / norm_sq).sqrt();
                    let dot: f64 = row.iter().zip(grow).map(|(s, g)| s * g).sum();
                    ds.extend(row.iter().zip(grow).map(|(s, g)| alpha * (g - s * dot / norm_sq)));
                }
                vec![Some(ds)]
            }
            Op::ComplexGain { gains } => {
                let width = node.shape[1];
                let k = width / 2;
                let mut dz = vec![0.0; g.len()];
                for (r, grow) in g.chunks(width).enumerate() {
                    let [gr, gi] = gains[r];
                    let drow = &mut dz[r * width..(r + 1) * width];
                    for l in 0..k {
                        let (yr, yi) = (grow[l], grow[k + l]);
                        drow[2 * l] = gr * yr + gi * yi;
                        drow[2 * l + 1] = -gi * yr + gr * yi;
                    }
                }
                vec![Some(dz), Some(g.to_vec())]
            }
            Op::Custom { .. } => {
                let cached = node.custom_grads.as_ref().expect("custom node evaluated");
                cached
                    .iter()
                    .map(|cg| Some(cg.iter().map(|v| v * g[0]).collect()))
                    .collect()
            }
        };
        Ok(grads)
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: &[f64]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g.to_vec()),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
