//! Flat `key = value` run configuration.
//!
//! Blank lines and text after `#` are ignored. Unknown keys are errors.
//! [`RunConfig::dump`] writes every key, and parsing a dump gives back the
//! same configuration.

use std::path::{Path, PathBuf};

use crate::channel::ChannelKind;
use crate::error::{Error, Result};
use crate::synth::{SynthKind, SyntheticSpec};
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    /// A PGM file or a directory of them.
    Pgm(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub dataset: DatasetSpec,
    /// Size of the held-out synthetic evaluation set.
    pub eval_count: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            dataset: DatasetSpec::Synthetic(SyntheticSpec::new(SynthKind::RingsRoads, 200, 32, 32, 0)),
            eval_count: 100,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{v}' for '{key}'"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut synth = match &cfg.dataset {
            DatasetSpec::Synthetic(s) => s.clone(),
            DatasetSpec::Pgm(_) => unreachable!("default dataset is synthetic"),
        };
        let mut data_path: Option<PathBuf> = None;
        let mut dataset_kind: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let t = &mut cfg.train;
            match k {
                "rho" => t.rho = parse_value(k, v)?,
                "channel" => t.channel = v.parse::<ChannelKind>().map_err(|e| Error::Config(e.to_string()))?,
                "csi" => t.csi = parse_bool(k, v)?,
                "lambda_img" => t.lambda_img = parse_value(k, v)?,
                "lambda_lat" => t.lambda_lat = parse_value(k, v)?,
                "anneal_t" => t.anneal_t = parse_value(k, v)?,
                "batch_size" => t.batch_size = parse_value(k, v)?,
                "learning_rate" => t.learning_rate = parse_value(k, v)?,
                "max_epochs" => t.max_epochs = parse_value(k, v)?,
                "patience" => t.patience = parse_value(k, v)?,
                "val_fraction" => t.val_fraction = parse_value(k, v)?,
                "power" => t.power = parse_value(k, v)?,
                "seed" => t.seed = parse_value(k, v)?,
                "dataset" => dataset_kind = Some(v.to_string()),
                "data_path" => data_path = Some(PathBuf::from(v)),
                "synth_kind" => synth.kind = v.parse::<SynthKind>().map_err(|e| Error::Config(e.to_string()))?,
                "synth_count" => synth.count = parse_value(k, v)?,
                "synth_height" => synth.height = parse_value(k, v)?,
                "synth_width" => synth.width = parse_value(k, v)?,
                "synth_seed" => synth.seed = parse_value(k, v)?,
                "synth_features" => synth.features = parse_value(k, v)?,
                "synth_exact" => synth.exact = parse_bool(k, v)?,
                "eval_count" => cfg.eval_count = parse_value(k, v)?,
                other => return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1))),
            }
        }
        cfg.dataset = match dataset_kind.as_deref() {
            None | Some("synthetic") => DatasetSpec::Synthetic(synth),
            Some("pgm") => DatasetSpec::Pgm(
                data_path.ok_or_else(|| Error::Config("dataset = pgm needs data_path".into()))?,
            ),
            Some(other) => return Err(Error::Config(format!("unknown dataset '{other}'"))),
        };
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn dump(&self) -> String {
        let t = &self.train;
        let mut out = format!(
            "rho = {}\nchannel = {}\ncsi = {}\nlambda_img = {}\nlambda_lat = {}\nanneal_t = {}\nbatch_size = {}\n\
             learning_rate = {}\nmax_epochs = {}\npatience = {}\nval_fraction = {}\npower = {}\nseed = {}\n",
            t.rho,
            t.channel,
            t.csi,
            t.lambda_img,
            t.lambda_lat,
            t.anneal_t,
            t.batch_size,
            t.learning_rate,
            t.max_epochs,
            t.patience,
            t.val_fraction,
            t.power,
            t.seed
        );
        match &self.dataset {
            DatasetSpec::Pgm(p) => out.push_str(&format!("dataset = pgm\ndata_path = {}\n", p.display())),
            DatasetSpec::Synthetic(s) => out.push_str(&format!(
                "dataset = synthetic\nsynth_kind = {}\nsynth_count = {}\nsynth_height = {}\nsynth_width = {}\n\
                 synth_seed = {}\nsynth_features = {}\nsynth_exact = {}\n",
                s.kind, s.count, s.height, s.width, s.seed, s.features, s.exact
            )),
        }
        out.push_str(&format!("eval_count = {}\n", self.eval_count));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let mut c = RunConfig::default();
        c.train.lambda_img = 3.7e-5;
        c.train.rho = 0.1 + 0.2;
        c.train.channel = ChannelKind::Rayleigh;
        assert_eq!(RunConfig::parse(&c.dump()).unwrap(), c);
        c.dataset = DatasetSpec::Pgm(PathBuf::from("imgs/train"));
        assert_eq!(RunConfig::parse(&c.dump()).unwrap(), c);
    }

    #[test]
    fn comments_and_errors() {
        let c = RunConfig::parse("# header\nrho = 0.25 # inline\n\nseed=9\n").unwrap();
        assert_eq!(c.train.rho, 0.25);
        assert_eq!(c.train.seed, 9);
        assert!(RunConfig::parse("bogus = 1").is_err());
        assert!(RunConfig::parse("rho = abc").is_err());
        assert!(RunConfig::parse("rho = 1.5").is_err());
        assert!(RunConfig::parse("batch_size = 1").is_err());
        assert!(RunConfig::parse("dataset = pgm").is_err());
        assert!(RunConfig::parse("just a line").is_err());
    }
}
