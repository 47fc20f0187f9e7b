//! Central finite-difference checks of every differentiable piece.
//!
//! The relative error of a check is `|a - n| / max(|a|, |n|)` over the
//! whole gradient vector (Euclidean norms), with `a` the analytic and `n`
//! the numeric gradient.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::channel::{transmit_node, ChannelKind, ChannelRealization};
use crate::diagram::PersistenceDiagram;
use crate::error::Result;
use crate::image::Image;
use crate::net::{init_params, JsccModel};
use crate::rips::PointCloud;
use crate::rng::substream;
use crate::topo_loss::{image_topo_loss, latent_topo_loss};
use crate::train::{batch_loss, reference_diagrams, LossWeights};

/// Tolerance for smooth operations.
pub const SMOOTH_TOL: f64 = 1e-6;
/// Tolerance for persistence-based losses away from ties.
pub const PH_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub rel_err: f64,
    pub tolerance: f64,
    /// Number of coordinates compared.
    pub coords: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.rel_err < self.tolerance
    }
}

pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of `f` at `x` along the listed coordinates.
pub fn numeric_grad(f: &mut dyn FnMut(&[f64]) -> Result<f64>, x: &[f64], coords: &[usize], h: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(coords.len());
    let mut probe = x.to_vec();
    for &i in coords {
        probe[i] = x[i] + h;
        let up = f(&probe)?;
        probe[i] = x[i] - h;
        let down = f(&probe)?;
        probe[i] = x[i];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Values in `[lo, hi)` bounded away from zero, so PReLU kinks are avoided.
fn off_zero(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(lo..hi);
            if v.abs() < 0.1 {
                v.signum() * 0.1 + v
            } else {
                v
            }
        })
        .collect()
}

type Builder = dyn Fn(&mut Graph, &[NodeId]) -> Result<NodeId>;

/// Checks `Σ c ⊙ build(leaves)` against finite differences in every leaf.
fn check_graph(name: &str, leaves: Vec<Tensor>, build: &Builder, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let eval = |vals: &[Tensor]| -> Result<(Graph, Vec<NodeId>, NodeId)> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = vals.iter().map(|t| g.leaf(t.clone())).collect();
        let out = build(&mut g, &ids)?;
        Ok((g, ids, out))
    };
    let (mut g, ids, out) = eval(&leaves)?;
    let out_shape = g.shape(out).to_vec();
    let cot = uniform(rng, g.value(out).len(), -1.0, 1.0);
    g.inject_gradient(out, Tensor::new(out_shape, cot.clone())?)?;
    g.backward_injected()?;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (li, id) in ids.iter().enumerate() {
        let n = leaves[li].len();
        analytic.extend(g.grad(*id).map_or_else(|| vec![0.0; n], <[f64]>::to_vec));
        let mut f = |x: &[f64]| -> Result<f64> {
            let mut vals = leaves.clone();
            vals[li] = Tensor::new(leaves[li].shape().to_vec(), x.to_vec())?;
            let (g, _, out) = eval(&vals)?;
            Ok(g.value(out).data().iter().zip(&cot).map(|(a, b)| a * b).sum())
        };
        let coords: Vec<usize> = (0..n).collect();
        numeric.extend(numeric_grad(&mut f, leaves[li].data(), &coords, 1e-6)?);
    }
    Ok(CheckResult {
        name: name.to_string(),
        rel_err: rel_err(&analytic, &numeric),
        tolerance: SMOOTH_TOL,
        coords: analytic.len(),
    })
}

fn t(shape: &[usize], data: Vec<f64>) -> Tensor {
    Tensor::new(shape.to_vec(), data).expect("consistent check shapes")
}

/// Every autodiff operation, each checked in isolation.
pub fn op_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = substream(seed, &[0x6f70]);
    let r = &mut rng;
    let mut out = Vec::new();

    let x = t(&[2, 2, 5, 5], uniform(r, 100, -1.0, 1.0));
    let w = t(&[3, 2, 3, 3], uniform(r, 54, -0.5, 0.5));
    let b = t(&[3], uniform(r, 3, -0.5, 0.5));
    out.push(check_graph("conv2d", vec![x, w, b], &|g, i| g.conv2d(i[0], i[1], i[2], 2, 1), r)?);

    let x = t(&[2, 2, 3, 3], uniform(r, 36, -1.0, 1.0));
    let w = t(&[2, 3, 5, 5], uniform(r, 150, -0.5, 0.5));
    let b = t(&[3], uniform(r, 3, -0.5, 0.5));
    out.push(check_graph(
        "conv_transpose2d",
        vec![x, w, b],
        &|g, i| g.conv_transpose2d(i[0], i[1], i[2], 2, 2, 1),
        r,
    )?);

    let x = t(&[2, 3], off_zero(r, 6, -2.0, 2.0));
    out.push(check_graph("prelu", vec![x, Tensor::scalar(0.25)], &|g, i| g.prelu(i[0], i[1]), r)?);

    let x = t(&[7], uniform(r, 7, -3.0, 3.0));
    out.push(check_graph("sigmoid", vec![x], &|g, i| g.sigmoid(i[0]), r)?);

    let a = t(&[2, 3], uniform(r, 6, -1.0, 1.0));
    let c = t(&[2, 3], uniform(r, 6, -1.0, 1.0));
    out.push(check_graph("add", vec![a.clone(), c.clone()], &|g, i| g.add(i[0], i[1]), r)?);
    out.push(check_graph("affine", vec![a.clone()], &|g, i| g.affine(i[0], 2.0, -1.0), r)?);
    out.push(check_graph("scale", vec![a.clone()], &|g, i| g.scale(i[0], -0.3), r)?);
    out.push(check_graph("reshape", vec![a.clone()], &|g, i| g.reshape(i[0], vec![3, 2]), r)?);
    out.push(check_graph("truncate", vec![a.clone()], &|g, i| g.truncate(i[0], 2), r)?);
    out.push(check_graph("zero_pad", vec![a.clone()], &|g, i| g.zero_pad(i[0], 5), r)?);
    out.push(check_graph("mse", vec![a.clone(), c], &|g, i| g.mse(i[0], i[1]), r)?);

    let s = t(&[3, 8], uniform(r, 24, -1.0, 1.0));
    out.push(check_graph("power_normalize", vec![s], &|g, i| g.power_normalize(i[0], 1.0), r)?);

    let z = t(&[2, 6], uniform(r, 12, -1.0, 1.0));
    let noise = t(&[2, 6], uniform(r, 12, -0.3, 0.3));
    let gains = vec![[0.4, -1.1], [1.0, 0.0]];
    out.push(check_graph(
        "complex_gain",
        vec![z, noise],
        &move |g, i| g.complex_gain(i[0], i[1], gains.clone()),
        r,
    )?);

    let a = t(&[4], uniform(r, 4, -1.0, 1.0));
    out.push(check_graph(
        "custom",
        vec![a],
        &|g, i| {
            g.custom(
                "cube_sum",
                &[i[0]],
                std::sync::Arc::new(|v: &[&Tensor]| {
                    let d = v[0].data();
                    Ok((d.iter().map(|x| x * x * x).sum(), vec![d.iter().map(|x| 3.0 * x * x).collect()]))
                }),
            )
        },
        r,
    )?);
    Ok(out)
}

/// Random image whose sorted values are at least `1e-4` apart, so small
/// probes never reorder the filtration or flip a matching tie.
pub fn generic_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
    loop {
        let levels = uniform(rng, h * w, 0.05, 0.95);
        let mut sorted = levels.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).all(|p| p[1] - p[0] > 1e-4) {
            return Image::new(h, w, levels).expect("values in range");
        }
    }
}

/// Image topological loss, latent topological loss, power normalization,
/// the channel layer, and the assembled batch objective.
pub fn loss_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = substream(seed, &[0x6c6f]);
    let mut out = Vec::new();

    let x = generic_image(&mut rng, 6, 6);
    let xhat = generic_image(&mut rng, 6, 6);
    let analytic = image_topo_loss(&x, &xhat)?.grad;
    let mut f = |v: &[f64]| -> Result<f64> { Ok(image_topo_loss(&x, &Image::new(6, 6, v.to_vec())?)?.value) };
    let coords: Vec<usize> = (0..36).collect();
    let numeric = numeric_grad(&mut f, xhat.data(), &coords, 1e-7)?;
    out.push(CheckResult {
        name: "image_topo_loss".into(),
        rel_err: rel_err(&analytic, &numeric),
        tolerance: PH_TOL,
        coords: 36,
    });

    let (npts, dim) = (6, 4);
    let clean = uniform(&mut rng, npts * dim, -1.0, 1.0);
    let noisy: Vec<f64> = clean.iter().map(|v| v + rng.random_range(-0.4..0.4)).collect();
    let res = latent_topo_loss(&PointCloud::new(dim, clean.clone())?, &PointCloud::new(dim, noisy.clone())?)?;
    let coords: Vec<usize> = (0..npts * dim).collect();
    let mut fc = |v: &[f64]| -> Result<f64> {
        Ok(latent_topo_loss(&PointCloud::new(dim, v.to_vec())?, &PointCloud::new(dim, noisy.clone())?)?.value)
    };
    let mut numeric = numeric_grad(&mut fc, &clean, &coords, 1e-7)?;
    let mut fnz = |v: &[f64]| -> Result<f64> {
        Ok(latent_topo_loss(&PointCloud::new(dim, clean.clone())?, &PointCloud::new(dim, v.to_vec())?)?.value)
    };
    numeric.extend(numeric_grad(&mut fnz, &noisy, &coords, 1e-7)?);
    let analytic: Vec<f64> = res.grad_clean.iter().chain(&res.grad_noisy).copied().collect();
    out.push(CheckResult {
        name: "latent_topo_loss".into(),
        rel_err: rel_err(&analytic, &numeric),
        tolerance: PH_TOL,
        coords: analytic.len(),
    });

    let s = t(&[2, 10], uniform(&mut rng, 20, -2.0, 2.0));
    let mut r = substream(seed, &[0x706e]);
    out.push(check_graph("power_normalize", vec![s], &|g, i| g.power_normalize(i[0], 2.0), &mut r)?);

    let mut crng = substream(seed, &[0x6368]);
    let reals = vec![
        ChannelRealization::draw(ChannelKind::Rayleigh, 4, 3.0, 1.0, &mut crng)?,
        ChannelRealization::draw(ChannelKind::Awgn, 4, 3.0, 1.0, &mut crng)?,
    ];
    let z = t(&[2, 8], uniform(&mut rng, 16, -1.0, 1.0));
    let reals2 = reals.clone();
    out.push(check_graph(
        "channel",
        vec![z.clone()],
        &move |g, i| transmit_node(g, i[0], &reals2, false),
        &mut r,
    )?);
    out.push(check_graph(
        "channel_csi",
        vec![z],
        &move |g, i| transmit_node(g, i[0], &reals, true),
        &mut r,
    )?);

    out.push(batch_objective_check(seed)?);
    Ok(out)
}

/// End-to-end objective on a 2-image 8x8 batch, probed along a random
/// subset of parameters.
pub fn batch_objective_check(seed: u64) -> Result<CheckResult> {
    let mut rng = substream(seed, &[0x6261]);
    let images: Vec<Image> = (0..2).map(|_| generic_image(&mut rng, 8, 8)).collect();
    let diagrams: Vec<PersistenceDiagram> = reference_diagrams(&images)?;
    let model = init_params(seed, 0.25, 8, 8)?;
    let mut crng = substream(seed, &[0x6263]);
    let reals: Vec<ChannelRealization> = (0..2)
        .map(|_| ChannelRealization::draw(ChannelKind::Awgn, model.shape.k, 10.0, 1.0, &mut crng))
        .collect::<Result<_>>()?;
    let weights = LossWeights { img: 0.05, lat: 0.01 };
    let ims: Vec<&Image> = images.iter().collect();
    let ds: Vec<&PersistenceDiagram> = diagrams.iter().collect();
    let base = batch_loss(&model, &ims, &ds, &reals, false, weights, true)?;
    let grads = base.grads.expect("requested");

    let sizes: Vec<usize> = model.params().iter().map(|(_, t)| t.len()).collect();
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for _ in 0..24 {
        let pi = rng.random_range(0..sizes.len());
        let ci = rng.random_range(0..sizes[pi]);
        analytic.push(grads[pi][ci]);
        let probe = |delta: f64| -> Result<f64> {
            let mut m: JsccModel = model.clone();
            m.params_mut()[pi].data_mut()[ci] += delta;
            Ok(batch_loss(&m, &ims, &ds, &reals, false, weights, false)?.total)
        };
        let h = 1e-6;
        numeric.push((probe(h)? - probe(-h)?) / (2.0 * h));
    }
    Ok(CheckResult {
        name: "batch_loss".into(),
        rel_err: rel_err(&analytic, &numeric),
        tolerance: PH_TOL,
        coords: analytic.len(),
    })
}

pub fn run_all(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = op_suite(seed)?;
    out.extend(loss_suite(seed)?);
    Ok(out)
}
