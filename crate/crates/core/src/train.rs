//! Batch objective, Adam, the training loop, and evaluation sweeps.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::autodiff::{CustomFn, Graph, Tensor};
use crate::channel::{sample_training_snr, transmit_node, ChannelKind, ChannelRealization};
use crate::cubical::{cubical_diagram, snap_to_grid};
use crate::diagram::PersistenceDiagram;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::net::{init_model, power_normalize, JsccModel, ModelShape};
use crate::rips::PointCloud;
use crate::rng::substream;
use crate::topo_loss::{image_topo_loss_against, latent_topo_loss};
use crate::wasserstein::wasserstein;

const TAG_SPLIT: u64 = 1;
const TAG_SHUFFLE: u64 = 2;
const TAG_SNR: u64 = 3;
const TAG_CHANNEL: u64 = 4;
const TAG_VAL: u64 = 5;
const TAG_EVAL: u64 = 6;
const TAG_CALIBRATE: u64 = 7;

/// Intensity levels of the threshold grid used by evaluation metrics.
pub const EVAL_GRID_LEVELS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub rho: f64,
    pub channel: ChannelKind,
    /// Receiver divides by the fading gain.
    pub csi: bool,
    pub lambda_img: f64,
    pub lambda_lat: f64,
    pub anneal_t: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub power: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            rho: 0.4,
            channel: ChannelKind::Awgn,
            csi: false,
            lambda_img: 1e-4,
            lambda_lat: 1e-5,
            anneal_t: 10.0,
            batch_size: 32,
            learning_rate: 1e-4,
            max_epochs: 100,
            patience: 10,
            val_fraction: 0.1,
            power: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if !(self.lambda_img >= 0.0 && self.lambda_lat >= 0.0) {
            return bad("topological weights must be non-negative".into());
        }
        if self.batch_size < 2 {
            return bad(format!("batch size must be at least 2, got {}", self.batch_size));
        }
        if !(self.anneal_t > 0.0) {
            return bad(format!("anneal time constant must be positive, got {}", self.anneal_t));
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad(format!("validation fraction must lie in [0, 1), got {}", self.val_fraction));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        if !(self.power > 0.0) {
            return bad("power must be positive".into());
        }
        Ok(())
    }
}

/// `λ (1 - e^{-t/T})`.
pub fn anneal(lambda: f64, t: usize, big_t: f64) -> Result<f64> {
    if !(big_t > 0.0) {
        return Err(Error::invalid(format!("anneal time constant must be positive, got {big_t}")));
    }
    Ok(lambda * (1.0 - (-(t as f64) / big_t).exp()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub img: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub total: f64,
    pub mse: f64,
    /// Mean image topological loss over the batch (0 when not computed).
    pub topo_img: f64,
    /// Batch-level latent topological loss (0 when not computed).
    pub topo_lat: f64,
    /// Per-parameter gradients in [`JsccModel::params`] order.
    pub grads: Option<Vec<Vec<f64>>>,
}

/// Cubical diagrams of the clean images, reused across epochs.
pub fn reference_diagrams(images: &[Image]) -> Result<Vec<PersistenceDiagram>> {
    images.par_iter().map(|im| cubical_diagram(im, 1)).collect()
}

/// `mean MSE + w.img * mean image topo + w.lat * latent topo` for one batch.
///
/// `diagrams[i]` must be the cubical diagram of `images[i]`. A term whose
/// weight is zero is skipped. With `want_grad` the gradient of the total
/// with respect to every parameter is returned.
pub fn batch_loss(
    model: &JsccModel,
    images: &[&Image],
    diagrams: &[&PersistenceDiagram],
    channel: &[ChannelRealization],
    csi: bool,
    weights: LossWeights,
    want_grad: bool,
) -> Result<BatchLoss> {
    let b = images.len();
    if b == 0 || diagrams.len() != b || channel.len() != b {
        return Err(Error::invalid(format!(
            "batch of {b} images with {} diagrams and {} realizations",
            diagrams.len(),
            channel.len()
        )));
    }
    if weights.lat > 0.0 && b < 2 {
        return Err(Error::invalid("latent topological loss needs a batch of at least 2".to_string()));
    }
    let (h, w) = (model.shape.height, model.shape.width);
    let mut g = Graph::new();
    let p = model.bind(&mut g);
    let x = g.leaf(model.batch_tensor(images)?);
    let s = model.encode(&mut g, &p, x)?;
    let z = power_normalize(&mut g, s, model.shape.power)?;
    let y = transmit_node(&mut g, z, channel, csi)?;
    let xhat = model.decode(&mut g, &p, y)?;
    let mse = g.mse(xhat, x)?;
    let mut total = mse;
    let mut topo_img_node = None;
    let mut topo_lat_node = None;

    if weights.img > 0.0 {
        let refs: Arc<Vec<PersistenceDiagram>> = Arc::new(diagrams.iter().map(|d| (*d).clone()).collect());
        let func: CustomFn = Arc::new(move |inputs: &[&Tensor]| {
            let data = inputs[0].data();
            let n = refs.len();
            let per: Vec<_> = data
                .par_chunks(h * w)
                .zip(refs.par_iter())
                .map(|(chunk, d)| {
                    let im = Image::new(h, w, chunk.to_vec())?;
                    image_topo_loss_against(d, h, w, &im)
                })
                .collect::<Result<_>>()?;
            let mut grad = Vec::with_capacity(data.len());
            let mut value = 0.0;
            for r in per {
                value += r.value;
                grad.extend(r.grad.iter().map(|g| g / n as f64));
            }
            Ok((value / n as f64, vec![grad]))
        });
        let node = g.custom("image_topo", &[xhat], func)?;
        topo_img_node = Some(node);
        let scaled = g.scale(node, weights.img)?;
        total = g.add(total, scaled)?;
    }

    if weights.lat > 0.0 {
        let func: CustomFn = Arc::new(|inputs: &[&Tensor]| {
            let dim = inputs[0].shape()[1];
            let clean = PointCloud::new(dim, inputs[0].data().to_vec())?;
            let noisy = PointCloud::new(dim, inputs[1].data().to_vec())?;
            let r = latent_topo_loss(&clean, &noisy)?;
            Ok((r.value, vec![r.grad_clean, r.grad_noisy]))
        });
        let node = g.custom("latent_topo", &[z, y], func)?;
        topo_lat_node = Some(node);
        let scaled = g.scale(node, weights.lat)?;
        total = g.add(total, scaled)?;
    }

    let scalar = |g: &Graph, n| g.value(n).data()[0];
    let out_total = scalar(&g, total);
    let grads = if want_grad {
        g.backward(total)?;
        Some(
            p.all()
                .into_iter()
                .zip(model.params())
                .map(|(node, (_, t))| g.grad(node).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec))
                .collect(),
        )
    } else {
        None
    };
    Ok(BatchLoss {
        total: out_total,
        mse: scalar(&g, mse),
        topo_img: topo_img_node.map_or(0.0, |n| scalar(&g, n)),
        topo_lat: topo_lat_node.map_or(0.0, |n| scalar(&g, n)),
        grads,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        AdamState {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn for_model(model: &JsccModel) -> Self {
        let sizes: Vec<usize> = model.params().iter().map(|(_, t)| t.len()).collect();
        Self::new(&sizes)
    }
}

/// One bias-corrected Adam update. Non-finite gradients abort before any
/// parameter is touched.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[Vec<f64>], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid(format!(
            "{} parameter tensors, {} gradients, {} optimizer slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[i].len() {
            return Err(Error::invalid(format!("gradient {i} has length {} for {} values", g.len(), p.len())));
        }
        if let Some(j) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                param: format!("#{i}"),
                index: j,
            });
        }
    }
    state.step += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..p.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let mh = m[j] / c1;
            let vh = v[j] / c2;
            p[j] -= lr * mh / (vh.sqrt() + eps);
        }
    }
    Ok(())
}

fn apply_adam(model: &mut JsccModel, grads: &[Vec<f64>], state: &mut AdamState, lr: f64) -> Result<()> {
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    let mut tensors = model.params_mut();
    let mut slices: Vec<&mut [f64]> = tensors.iter_mut().map(|t| t.data_mut()).collect();
    adam_step(&mut slices, grads, state, lr).map_err(|e| match e {
        Error::NonFiniteGradient { param, index } => {
            let i: usize = param.trim_start_matches('#').parse().unwrap_or(0);
            Error::NonFiniteGradient {
                param: names.get(i).cloned().unwrap_or(param),
                index,
            }
        }
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lambda_img: f64,
    pub lambda_lat: f64,
    pub mse: f64,
    pub topo_img: f64,
    pub topo_lat: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

pub const LOG_HEADER: &str = "epoch,lambda_img,lambda_lat,mse,topo_img,topo_lat,train_loss,val_loss";

pub fn log_to_csv(log: &[EpochLog]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for e in log {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            e.epoch, e.lambda_img, e.lambda_lat, e.mse, e.topo_img, e.topo_lat, e.train_loss, e.val_loss
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss seen.
    pub model: JsccModel,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub log: Vec<EpochLog>,
    pub stopped_early: bool,
}

/// Seeded train/validation split. Returns (train, validation) indices.
/// Fewer than two validation images means no validation set: early
/// stopping then watches the training loss.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut substream(seed, &[TAG_SPLIT]));
    let n_val = (n as f64 * val_fraction).round() as usize;
    if n_val < 2 || n_val >= n {
        return ((0..n).collect(), Vec::new());
    }
    let val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    train.sort_unstable();
    (train, val)
}

fn draw_channel(
    kind: ChannelKind,
    k: usize,
    snr_db: f64,
    power: f64,
    seed: u64,
    parts: &[u64],
    count: usize,
) -> Result<Vec<ChannelRealization>> {
    (0..count)
        .map(|i| {
            let mut tag = parts.to_vec();
            tag.push(i as u64);
            ChannelRealization::draw(kind, k, snr_db, power, &mut substream(seed, &tag))
        })
        .collect()
}

/// Batches of at most `size`; a trailing singleton is folded into the
/// previous batch so every batch has at least two images.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|c| c.len() < 2) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().expect("non-empty") = &order[start..];
    }
    out
}

fn validation_loss(
    model: &JsccModel,
    images: &[Image],
    diagrams: &[PersistenceDiagram],
    val: &[usize],
    cfg: &TrainConfig,
) -> Result<f64> {
    let weights = LossWeights {
        img: cfg.lambda_img,
        lat: cfg.lambda_lat,
    };
    let mut sum = 0.0;
    let groups = batches(val, cfg.batch_size);
    for (bi, group) in groups.iter().enumerate() {
        let snr = sample_training_snr(&mut substream(cfg.seed, &[TAG_VAL, bi as u64]));
        let reals = draw_channel(
            cfg.channel,
            model.shape.k,
            snr,
            cfg.power,
            cfg.seed,
            &[TAG_VAL, bi as u64],
            group.len(),
        )?;
        let ims: Vec<&Image> = group.iter().map(|&i| &images[i]).collect();
        let ds: Vec<&PersistenceDiagram> = group.iter().map(|&i| &diagrams[i]).collect();
        sum += batch_loss(model, &ims, &ds, &reals, cfg.csi, weights, false)?.total;
    }
    Ok(sum / groups.len() as f64)
}

/// Trains a fresh model; `on_epoch` sees each log row as it is produced.
pub fn train(cfg: &TrainConfig, images: &[Image], mut on_epoch: impl FnMut(&EpochLog)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let first = images.first().ok_or_else(|| Error::invalid("dataset is empty".to_string()))?;
    if images.iter().any(|im| (im.height(), im.width()) != (first.height(), first.width())) {
        return Err(Error::invalid("dataset images differ in size".to_string()));
    }
    let shape = ModelShape::new(first.height(), first.width(), cfg.rho, cfg.power)?;
    let mut model = init_model(cfg.seed, shape)?;
    let diagrams = reference_diagrams(images)?;
    let (train_idx, val_idx) = split_indices(images.len(), cfg.val_fraction, cfg.seed);
    if cfg.lambda_lat > 0.0 && train_idx.len() < 2 {
        return Err(Error::invalid("latent topological loss needs at least 2 training images".to_string()));
    }
    let mut adam = AdamState::for_model(&model);
    let mut log = Vec::new();
    let mut best = (f64::INFINITY, 0usize, model.clone());
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        let weights = LossWeights {
            img: anneal(cfg.lambda_img, epoch, cfg.anneal_t)?,
            lat: anneal(cfg.lambda_lat, epoch, cfg.anneal_t)?,
        };
        let mut order = train_idx.clone();
        order.shuffle(&mut substream(cfg.seed, &[TAG_SHUFFLE, epoch as u64]));
        let groups = batches(&order, cfg.batch_size);
        let mut acc = [0.0; 4];
        for (bi, group) in groups.iter().enumerate() {
            let tag = [TAG_CHANNEL, epoch as u64, bi as u64];
            let snr = sample_training_snr(&mut substream(cfg.seed, &[TAG_SNR, epoch as u64, bi as u64]));
            let reals = draw_channel(cfg.channel, model.shape.k, snr, cfg.power, cfg.seed, &tag, group.len())?;
            let ims: Vec<&Image> = group.iter().map(|&i| &images[i]).collect();
            let ds: Vec<&PersistenceDiagram> = group.iter().map(|&i| &diagrams[i]).collect();
            let w = if group.len() < 2 { LossWeights { lat: 0.0, ..weights } } else { weights };
            let loss = batch_loss(&model, &ims, &ds, &reals, cfg.csi, w, true)?;
            if !loss.total.is_finite() {
                return Err(Error::Degenerate(format!("non-finite loss at epoch {epoch}, batch {bi}")));
            }
            apply_adam(&mut model, loss.grads.as_deref().expect("gradients requested"), &mut adam, cfg.learning_rate)?;
            for (a, v) in acc.iter_mut().zip([loss.mse, loss.topo_img, loss.topo_lat, loss.total]) {
                *a += v;
            }
        }
        let nb = groups.len() as f64;
        let train_loss = acc[3] / nb;
        let val_loss = if val_idx.is_empty() {
            train_loss
        } else {
            validation_loss(&model, images, &diagrams, &val_idx, cfg)?
        };
        let row = EpochLog {
            epoch,
            lambda_img: weights.img,
            lambda_lat: weights.lat,
            mse: acc[0] / nb,
            topo_img: acc[1] / nb,
            topo_lat: acc[2] / nb,
            train_loss,
            val_loss,
        };
        log::info!(
            "epoch {epoch}: mse {:.6} topo_img {:.4} topo_lat {:.4} val {:.6}",
            row.mse,
            row.topo_img,
            row.topo_lat,
            val_loss
        );
        on_epoch(&row);
        log.push(row);
        if val_loss < best.0 {
            best = (val_loss, epoch, model.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (best_val_loss, best_epoch, model) = best;
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_val_loss,
        log,
        stopped_early,
    })
}

/// `10 log10(1 / MSE)` for peak 1; `+inf` when the images are equal.
pub fn psnr(x: &Image, xhat: &Image) -> Result<f64> {
    if (x.height(), x.width()) != (xhat.height(), xhat.width()) {
        return Err(Error::invalid("psnr: image shapes differ".to_string()));
    }
    let mse = x.data().iter().zip(xhat.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Snr,
    Bandwidth,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr",
            SweepAxis::Bandwidth => "bw",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr" => Ok(SweepAxis::Snr),
            "bw" | "bandwidth" | "rho" => Ok(SweepAxis::Bandwidth),
            other => Err(Error::invalid(format!("unknown sweep axis '{other}' (expected snr or bw)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub channel: ChannelKind,
    pub csi: bool,
    pub runs: usize,
    pub seed: u64,
    /// SNR used along the bandwidth axis.
    pub fixed_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub axis: SweepAxis,
    pub value: f64,
    pub psnr_db: f64,
    pub wdist0: f64,
    pub wdist1: f64,
    pub wdist_total: f64,
    pub seed: u64,
}

pub const SWEEP_HEADER: &str = "axis,value,psnr_db,wdist0,wdist1,wdist_total,seed";

pub fn sweep_to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.axis.name(),
            r.value,
            r.psnr_db,
            r.wdist0,
            r.wdist1,
            r.wdist_total,
            r.seed
        ));
    }
    out
}

/// Per-image metrics of one model at one channel setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageMetrics {
    pub psnr_db: f64,
    pub wdist: [f64; 2],
}

/// 2-Wasserstein distance per dimension between grid-snapped images.
pub fn topo_distance(x: &Image, xhat: &Image) -> Result<[f64; 2]> {
    let dx = cubical_diagram(&snap_to_grid(x, EVAL_GRID_LEVELS)?, 1)?;
    let dy = cubical_diagram(&snap_to_grid(xhat, EVAL_GRID_LEVELS)?, 1)?;
    let mut out = [0.0; 2];
    for (dim, o) in out.iter_mut().enumerate() {
        *o = wasserstein(&dx.of_dim(dim), &dy.of_dim(dim), 2.0)?.cost;
    }
    Ok(out)
}

/// Reconstructions of `images` through the channel, one realization per
/// image drawn from `(seed, parts.., i)`.
pub fn reconstruct(
    model: &JsccModel,
    images: &[Image],
    kind: ChannelKind,
    csi: bool,
    snr_db: f64,
    seed: u64,
    parts: &[u64],
) -> Result<Vec<Image>> {
    let mut out = Vec::with_capacity(images.len());
    for (ci, chunk) in images.chunks(64).enumerate() {
        let refs: Vec<&Image> = chunk.iter().collect();
        let latents = model.encode_images(&refs)?;
        let mut received = Vec::with_capacity(chunk.len());
        for (j, s) in latents.iter().enumerate() {
            let z = crate::net::power_normalize_vec(s, model.shape.power)?;
            let mut tag = parts.to_vec();
            tag.push((ci * 64 + j) as u64);
            let real = ChannelRealization::draw(kind, model.shape.k, snr_db, model.shape.power, &mut substream(seed, &tag))?;
            received.push(real.apply(&z, csi)?);
        }
        out.extend(model.decode_latents(&received)?);
    }
    Ok(out)
}

pub fn evaluate_images(
    model: &JsccModel,
    images: &[Image],
    kind: ChannelKind,
    csi: bool,
    snr_db: f64,
    seed: u64,
    parts: &[u64],
) -> Result<Vec<ImageMetrics>> {
    let recon = reconstruct(model, images, kind, csi, snr_db, seed, parts)?;
    images
        .par_iter()
        .zip(recon.par_iter())
        .map(|(x, xh)| {
            Ok(ImageMetrics {
                psnr_db: psnr(x, xh)?,
                wdist: topo_distance(x, xh)?,
            })
        })
        .collect()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// One record per (run, value), runs outermost. Run `r` uses seed
/// `spec.seed + r`. Along the bandwidth axis each value needs a model with
/// that `rho`.
pub fn evaluate_sweep(models: &[JsccModel], spec: &SweepSpec, images: &[Image]) -> Result<Vec<SweepRecord>> {
    if images.is_empty() {
        return Err(Error::invalid("evaluation set is empty".to_string()));
    }
    if spec.runs == 0 || spec.values.is_empty() {
        return Err(Error::invalid("sweep needs at least one run and one value".to_string()));
    }
    let mut jobs = Vec::new();
    for run in 0..spec.runs {
        for &value in &spec.values {
            let (model, snr) = match spec.axis {
                SweepAxis::Snr => {
                    let m = models.first().ok_or_else(|| Error::invalid("no checkpoint given".to_string()))?;
                    (m, value)
                }
                SweepAxis::Bandwidth => {
                    let m = models
                        .iter()
                        .find(|m| (m.shape.rho - value).abs() < 1e-9)
                        .ok_or_else(|| Error::invalid(format!("no checkpoint for rho = {value}")))?;
                    (m, spec.fixed_snr_db)
                }
            };
            jobs.push((run, value, model, snr));
        }
    }
    jobs.par_iter()
        .map(|&(run, value, model, snr)| {
            let seed = spec.seed.wrapping_add(run as u64);
            let metrics = evaluate_images(model, images, spec.channel, spec.csi, snr, seed, &[TAG_EVAL, value.to_bits()])?;
            let w0 = mean(metrics.iter().map(|m| m.wdist[0]));
            let w1 = mean(metrics.iter().map(|m| m.wdist[1]));
            Ok(SweepRecord {
                axis: spec.axis,
                value,
                psnr_db: mean(metrics.iter().map(|m| m.psnr_db)),
                wdist0: w0,
                wdist1: w1,
                wdist_total: w0 + w1,
                seed,
            })
        })
        .collect()
}

/// Mean and standard error over runs for each sweep value, in value order
/// of first appearance: `(value, mean psnr, se psnr, mean wdist, se wdist)`.
pub fn aggregate(records: &[SweepRecord]) -> Vec<(f64, f64, f64, f64, f64)> {
    let mut values: Vec<f64> = Vec::new();
    for r in records {
        if !values.contains(&r.value) {
            values.push(r.value);
        }
    }
    let stats = |xs: &[f64]| {
        let m = mean(xs.iter().copied());
        if xs.len() < 2 {
            return (m, 0.0);
        }
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
        (m, (var / xs.len() as f64).sqrt())
    };
    values
        .into_iter()
        .map(|v| {
            let sel: Vec<&SweepRecord> = records.iter().filter(|r| r.value == v).collect();
            let p: Vec<f64> = sel.iter().map(|r| r.psnr_db).collect();
            let w: Vec<f64> = sel.iter().map(|r| r.wdist_total).collect();
            let (pm, ps) = stats(&p);
            let (wm, ws) = stats(&w);
            (v, pm, ps, wm, ws)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub mse: f64,
    pub topo_img: f64,
    pub topo_lat: f64,
    /// Weights that make each topological term a tenth of the MSE term.
    pub lambda_img: f64,
    pub lambda_lat: f64,
}

/// Loss magnitudes of `model` on one batch, and weights scaling each
/// topological term to `0.1 x` the MSE.
pub fn calibrate(model: &JsccModel, images: &[Image], kind: ChannelKind, snr_db: f64, seed: u64) -> Result<Calibration> {
    if images.len() < 2 {
        return Err(Error::invalid("calibration needs at least 2 images".to_string()));
    }
    let diagrams = reference_diagrams(images)?;
    let ims: Vec<&Image> = images.iter().collect();
    let ds: Vec<&PersistenceDiagram> = diagrams.iter().collect();
    let reals = draw_channel(kind, model.shape.k, snr_db, model.shape.power, seed, &[TAG_CALIBRATE], images.len())?;
    let w = LossWeights { img: 1.0, lat: 1.0 };
    let l = batch_loss(model, &ims, &ds, &reals, false, w, false)?;
    let ratio = |t: f64| if t > 0.0 { 0.1 * l.mse / t } else { 0.0 };
    Ok(Calibration {
        mse: l.mse,
        topo_img: l.topo_img,
        topo_lat: l.topo_lat,
        lambda_img: ratio(l.topo_img),
        lambda_lat: ratio(l.topo_lat),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub lambda_img: f64,
    pub lambda_lat: f64,
    pub psnr_db: f64,
    pub wdist_total: f64,
}

/// Trains one model per weight pair and evaluates it at `snr_db`.
pub fn grid_search(
    base: &TrainConfig,
    train_images: &[Image],
    eval_images: &[Image],
    candidates: &[(f64, f64)],
    snr_db: f64,
) -> Result<Vec<GridPoint>> {
    candidates
        .iter()
        .map(|&(li, ll)| {
            let cfg = TrainConfig {
                lambda_img: li,
                lambda_lat: ll,
                ..base.clone()
            };
            let out = train(&cfg, train_images, |_| {})?;
            let m = evaluate_images(&out.model, eval_images, cfg.channel, cfg.csi, snr_db, cfg.seed, &[TAG_EVAL])?;
            Ok(GridPoint {
                lambda_img: li,
                lambda_lat: ll,
                psnr_db: mean(m.iter().map(|x| x.psnr_db)),
                wdist_total: mean(m.iter().map(|x| x.wdist[0] + x.wdist[1])),
            })
        })
        .collect()
}

/// Lowest Wdist among points within `psnr_tolerance_db` of the best PSNR.
pub fn select_weights(points: &[GridPoint], psnr_tolerance_db: f64) -> Option<&GridPoint> {
    let best = points.iter().map(|p| p.psnr_db).fold(f64::NEG_INFINITY, f64::max);
    points
        .iter()
        .filter(|p| p.psnr_db >= best - psnr_tolerance_db)
        .min_by(|a, b| a.wdist_total.total_cmp(&b.wdist_total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anneal_closed_forms() {
        assert_eq!(anneal(2.0, 0, 10.0).unwrap(), 0.0);
        assert!((anneal(1.0, 10, 10.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((anneal(3.0, 140, 10.0).unwrap() - 3.0).abs() < 1e-6 * 3.0);
        assert!(anneal(1.0, 1, 0.0).is_err());
    }

    #[test]
    fn adam_first_step_and_zero_gradient() {
        let mut theta = vec![0.0];
        let mut st = AdamState::new(&[1]);
        adam_step(&mut [theta.as_mut_slice()], &[vec![1.0]], &mut st, 1e-3).unwrap();
        assert!((theta[0] + 1e-3).abs() < 1e-8);

        let mut theta = vec![0.7, -0.2];
        let mut st = AdamState::new(&[2]);
        for _ in 0..20 {
            adam_step(&mut [theta.as_mut_slice()], &[vec![0.0, 0.0]], &mut st, 1e-2).unwrap();
        }
        assert_eq!(theta, vec![0.7, -0.2]);
        let err = adam_step(&mut [theta.as_mut_slice()], &[vec![0.0, f64::NAN]], &mut st, 1e-2);
        assert!(matches!(err, Err(Error::NonFiniteGradient { index: 1, .. })));
        assert_eq!(theta, vec![0.7, -0.2]);
    }

    #[test]
    fn psnr_examples() {
        let x = Image::filled(4, 4, 0.5);
        assert!((psnr(&x, &Image::filled(4, 4, 0.6)).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
        let z = Image::filled(2, 2, 0.0);
        assert!(psnr(&z, &Image::filled(2, 2, 1.0)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn batching_never_leaves_a_singleton() {
        let order: Vec<usize> = (0..9).collect();
        let b = batches(&order, 4);
        assert_eq!(b.iter().map(|c| c.len()).collect::<Vec<_>>(), vec![4, 5]);
        let b = batches(&order, 3);
        assert_eq!(b.len(), 3);
        assert_eq!(batches(&order[..1], 4).len(), 1);
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let (t, v) = split_indices(50, 0.1, 3);
        assert_eq!(v.len(), 5);
        assert_eq!(t.len(), 45);
        assert!(v.iter().all(|i| !t.contains(i)));
        assert_eq!(split_indices(50, 0.1, 3), (t, v));
        assert!(split_indices(5, 0.1, 3).1.is_empty());
    }

    #[test]
    fn select_prefers_topology_within_tolerance() {
        let pts = vec![
            GridPoint { lambda_img: 0.0, lambda_lat: 0.0, psnr_db: 20.0, wdist_total: 3.0 },
            GridPoint { lambda_img: 1.0, lambda_lat: 0.0, psnr_db: 19.7, wdist_total: 1.0 },
            GridPoint { lambda_img: 3.0, lambda_lat: 0.0, psnr_db: 18.0, wdist_total: 0.5 },
        ];
        assert_eq!(select_weights(&pts, 0.5).unwrap().lambda_img, 1.0);
    }
}
