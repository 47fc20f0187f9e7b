//! Versioned model checkpoint container.
//!
//! Layout: an ASCII header of `key=value` lines, then the tensors.
//!
//! ```text
//! TOPOJSCC-CKPT
//! version=1
//! height=32
//! width=32
//! rho=0.4
//! k=410
//! power=1
//! seed=7
//! hidden=16,32,32,32
//! latent_channels=13
//! tensors=28
//! end
//! tensor enc.0.weight 16,1,5,5
//! <16*1*5*5 little-endian f64>
//! ...
//! ```
//!
//! Each `tensor` line is followed by exactly `8 * prod(dims)` bytes and a
//! newline. Tensors appear in the model's parameter order. Floats in the
//! header use Rust's shortest round-trip formatting.

use std::fs;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::net::{init_model, JsccModel, ModelShape, HIDDEN};

pub const MAGIC: &str = "TOPOJSCC-CKPT";
pub const VERSION: u32 = 1;

pub fn to_bytes(model: &JsccModel) -> Vec<u8> {
    let s = &model.shape;
    let params = model.params();
    let hidden: Vec<String> = HIDDEN.iter().map(usize::to_string).collect();
    let mut out = format!(
        "{MAGIC}\nversion={VERSION}\nheight={}\nwidth={}\nrho={}\nk={}\npower={}\nseed={}\nhidden={}\nlatent_channels={}\ntensors={}\nend\n",
        s.height,
        s.width,
        s.rho,
        s.k,
        s.power,
        model.seed,
        hidden.join(","),
        s.latent_channels,
        params.len()
    )
    .into_bytes();
    for (name, t) in params {
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        out.extend(format!("tensor {name} {}\n", dims.join(",")).bytes());
        for v in t.data() {
            out.extend(v.to_le_bytes());
        }
        out.push(b'\n');
    }
    out
}

pub fn save(model: &JsccModel, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<JsccModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Option<&'a str> {
        let rest = &self.bytes[self.pos..];
        let end = rest.iter().position(|&b| b == b'\n')?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).ok()
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let out = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(out)
    }
}

pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<JsccModel> {
    let bad = |msg: String| Error::format(origin, msg);
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.line() != Some(MAGIC) {
        return Err(bad("not a checkpoint (missing magic line)".into()));
    }
    let mut header = std::collections::BTreeMap::new();
    loop {
        let line = cur.line().ok_or_else(|| bad("truncated header".into()))?;
        if line == "end" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("bad header line '{line}'")))?;
        header.insert(k.to_string(), v.to_string());
    }
    let get = |key: &str| header.get(key).ok_or_else(|| bad(format!("missing header key '{key}'")));
    let num = |key: &str| -> Result<f64> { get(key)?.parse().map_err(|_| bad(format!("bad value for '{key}'"))) };
    let int = |key: &str| -> Result<usize> { get(key)?.parse().map_err(|_| bad(format!("bad value for '{key}'"))) };

    let version = int("version")?;
    if version != VERSION as usize {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let hidden: Vec<String> = HIDDEN.iter().map(usize::to_string).collect();
    if get("hidden")? != &hidden.join(",") {
        return Err(bad(format!("unsupported hidden widths {}", get("hidden")?)));
    }
    let shape = ModelShape::new(int("height")?, int("width")?, num("rho")?, num("power")?)
        .map_err(|e| bad(e.to_string()))?;
    if shape.k != int("k")? || shape.latent_channels != int("latent_channels")? {
        return Err(bad("header k/latent_channels inconsistent with rho".into()));
    }
    let seed: u64 = get("seed")?.parse().map_err(|_| bad("bad seed".into()))?;
    let mut model = init_model(seed, shape)?;
    let expected: Vec<(String, Vec<usize>)> =
        model.params().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
    if int("tensors")? != expected.len() {
        return Err(bad(format!("expected {} tensors", expected.len())));
    }
    for ((name, dims), slot) in expected.into_iter().zip(model.params_mut()) {
        let line = cur.line().ok_or_else(|| bad(format!("missing tensor {name}")))?;
        let want = format!(
            "tensor {name} {}",
            dims.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
        );
        if line != want {
            return Err(bad(format!("expected '{want}', found '{line}'")));
        }
        let n: usize = dims.iter().product();
        let raw = cur.take(8 * n).ok_or_else(|| bad(format!("truncated tensor {name}")))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if cur.take(1) != Some(b"\n") {
            return Err(bad(format!("missing terminator after tensor {name}")));
        }
        *slot = Tensor::new(dims, data)?;
    }
    if cur.pos != bytes.len() {
        return Err(bad("trailing bytes after last tensor".into()));
    }
    Ok(model)
}
