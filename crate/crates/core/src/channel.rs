//! Complex-baseband AWGN and slow Rayleigh fading.
//!
//! Inputs are `2k` reals holding `k` interleaved (re, im) symbols. Outputs
//! and stored noise use the concatenated layout `[re_1..re_k, im_1..im_k]`,
//! which is what the decoder consumes.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::rng::gaussian_pair;

/// SNR grid sampled once per training mini-batch.
pub const TRAINING_SNRS_DB: [f64; 5] = [0.0, 5.0, 10.0, 15.0, 20.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Rayleigh => "rayleigh",
        })
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "awgn" => Ok(ChannelKind::Awgn),
            "rayleigh" => Ok(ChannelKind::Rayleigh),
            other => Err(Error::invalid(format!("unknown channel kind '{other}'"))),
        }
    }
}

/// Everything needed to replay one transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub kind: ChannelKind,
    /// Complex gain (re, im); exactly 1 for AWGN.
    pub h: [f64; 2],
    /// Noise power per complex symbol.
    pub n0: f64,
    /// Concatenated-layout noise, length `2k`.
    pub noise: Vec<f64>,
    pub snr_db: f64,
}

/// `P / 10^(snr/10)`; zero for the `+inf` (noiseless) sentinel.
pub fn noise_power(snr_db: f64, power: f64) -> Result<f64> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid(format!("invalid SNR {snr_db} dB")));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(power / 10f64.powf(snr_db / 10.0))
}

impl ChannelRealization {
    /// Draws the gain and `k` noise samples.
    pub fn draw<R: Rng + ?Sized>(kind: ChannelKind, k: usize, snr_db: f64, power: f64, rng: &mut R) -> Result<Self> {
        let n0 = noise_power(snr_db, power)?;
        let h = match kind {
            ChannelKind::Awgn => [1.0, 0.0],
            ChannelKind::Rayleigh => {
                let (a, b) = gaussian_pair(rng);
                let s = std::f64::consts::FRAC_1_SQRT_2;
                [a * s, b * s]
            }
        };
        let mut noise = vec![0.0; 2 * k];
        if n0 > 0.0 {
            let sigma = (n0 / 2.0).sqrt();
            for l in 0..k {
                let (a, b) = gaussian_pair(rng);
                noise[l] = a * sigma;
                noise[k + l] = b * sigma;
            }
        }
        Ok(ChannelRealization {
            kind,
            h,
            n0,
            noise,
            snr_db,
        })
    }

    pub fn k(&self) -> usize {
        self.noise.len() / 2
    }

    /// Gain and noise seen by the decoder. With `csi` the receiver divides
    /// by `h`, which is the same as gain 1 and noise `n / h`.
    pub fn effective(&self, csi: bool) -> ([f64; 2], Vec<f64>) {
        if !csi || self.kind == ChannelKind::Awgn {
            return (self.h, self.noise.clone());
        }
        let k = self.k();
        let [hr, hi] = self.h;
        let m = hr * hr + hi * hi;
        let mut noise = vec![0.0; 2 * k];
        for l in 0..k {
            let (nr, ni) = (self.noise[l], self.noise[k + l]);
            noise[l] = (nr * hr + ni * hi) / m;
            noise[k + l] = (ni * hr - nr * hi) / m;
        }
        ([1.0, 0.0], noise)
    }

    /// Replays the transmission on `z` (interleaved, length `2k`).
    pub fn apply(&self, z: &[f64], csi: bool) -> Result<Vec<f64>> {
        if z.len() != self.noise.len() {
            return Err(Error::invalid(format!(
                "symbol length {} does not match realization length {}",
                z.len(),
                self.noise.len()
            )));
        }
        let (gain, noise) = self.effective(csi);
        Ok(mix(z, gain, &noise))
    }
}

fn mix(z: &[f64], [gr, gi]: [f64; 2], noise: &[f64]) -> Vec<f64> {
    let k = z.len() / 2;
    let mut out = vec![0.0; z.len()];
    for l in 0..k {
        let (zr, zi) = (z[2 * l], z[2 * l + 1]);
        out[l] = gr * zr - gi * zi + noise[l];
        out[k + l] = gr * zi + gi * zr + noise[k + l];
    }
    out
}

/// One transmission of `z` (interleaved re/im, length `2k`).
pub fn transmit<R: Rng + ?Sized>(
    z: &[f64],
    kind: ChannelKind,
    snr_db: f64,
    power: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, ChannelRealization)> {
    if z.len() % 2 != 0 {
        return Err(Error::invalid(format!("odd symbol vector length {}", z.len())));
    }
    let real = ChannelRealization::draw(kind, z.len() / 2, snr_db, power, rng)?;
    let y = real.apply(z, false)?;
    Ok((y, real))
}

/// Graph node applying per-row realizations to `z` of shape `(N, 2k)`;
/// differentiable in `z` with noise and gains held fixed.
pub fn transmit_node(g: &mut Graph, z: NodeId, realizations: &[ChannelRealization], csi: bool) -> Result<NodeId> {
    let shape = g.shape(z).to_vec();
    if shape.len() != 2 || shape[0] != realizations.len() || realizations.iter().any(|r| r.noise.len() != shape[1]) {
        return Err(Error::invalid(format!(
            "{} realizations do not fit symbols of shape {shape:?}",
            realizations.len()
        )));
    }
    let mut gains = Vec::with_capacity(realizations.len());
    let mut noise = Vec::with_capacity(shape[0] * shape[1]);
    for r in realizations {
        let (gain, n) = r.effective(csi);
        gains.push(gain);
        noise.extend(n);
    }
    let n = g.leaf(Tensor::new(shape, noise)?);
    g.complex_gain(z, n, gains)
}

/// Uniform draw from [`TRAINING_SNRS_DB`].
pub fn sample_training_snr<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    TRAINING_SNRS_DB[rng.random_range(0..TRAINING_SNRS_DB.len())]
}
