use std::path::Path;

use crate::config_file::{ConfigDoc, ConfigError, Pair};
use crate::nn::ActivationKind;

use super::ModelError;

/// conv -> batchnorm -> activation -> max pool. Convolutions use "same" padding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LflbConfig {
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub pool_window: (usize, usize),
    pub pool_stride: (usize, usize),
}

impl LflbConfig {
    pub fn new(out_channels: usize) -> Self {
        Self {
            out_channels,
            kernel: (3, 3),
            stride: (1, 1),
            pool_window: (2, 2),
            pool_stride: (2, 2),
        }
    }

    pub fn with_pool(mut self, window: (usize, usize)) -> Self {
        self.pool_window = window;
        self.pool_stride = window;
        self
    }

    pub fn padding(&self) -> (usize, usize) {
        ((self.kernel.0 - 1) / 2, (self.kernel.1 - 1) / 2)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let pos = |p: (usize, usize)| p.0 >= 1 && p.1 >= 1;
        if self.out_channels == 0 {
            return Err(ModelError::BadConfig("LFLB out_channels must be >= 1".into()));
        }
        if !pos(self.kernel) || !pos(self.stride) || !pos(self.pool_window) || !pos(self.pool_stride)
        {
            return Err(ModelError::BadConfig(
                "LFLB kernel, stride and pool sizes must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// LFLB preprocessor followed by a NAC bottleneck branch and a skip sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResLflbConfig {
    pub preproc: LflbConfig,
    pub deep_out_channels: usize,
    pub bottleneck_channels: usize,
    pub n_mid_layers: usize,
    pub mid_kernel: (usize, usize),
}

impl ResLflbConfig {
    /// Bottleneck of a quarter of the block width, two 3x3 middle layers.
    pub fn new(out_channels: usize) -> Self {
        Self {
            preproc: LflbConfig::new(out_channels),
            deep_out_channels: out_channels,
            bottleneck_channels: (out_channels / 4).max(1),
            n_mid_layers: 2,
            mid_kernel: (3, 3),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.preproc.validate()?;
        if self.deep_out_channels != self.preproc.out_channels {
            return Err(ModelError::BadConfig(format!(
                "ResLFLB deep_out_channels {} must equal preprocessor out_channels {}",
                self.deep_out_channels, self.preproc.out_channels
            )));
        }
        if self.bottleneck_channels == 0 || self.bottleneck_channels >= self.deep_out_channels {
            return Err(ModelError::BadConfig(format!(
                "ResLFLB bottleneck {} must be in 1..{}",
                self.bottleneck_channels, self.deep_out_channels
            )));
        }
        if self.mid_kernel.0 == 0 || self.mid_kernel.1 == 0 {
            return Err(ModelError::BadConfig("ResLFLB mid_kernel must be >= 1".into()));
        }
        Ok(())
    }

    /// Channel trace of the residual branch, e.g. `32 -> 8 -> 8 -> 8 -> 32`.
    pub fn branch_channels(&self) -> Vec<usize> {
        let mut v = vec![self.deep_out_channels, self.bottleneck_channels];
        v.extend(std::iter::repeat_n(self.bottleneck_channels, self.n_mid_layers));
        v.push(self.deep_out_channels);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErfdConfig {
    pub dropout: f64,
    /// Optional hidden dense width before the classifier.
    pub hidden: Option<usize>,
    pub n_classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Architecture {
    #[default]
    DeepResLflb,
    Baseline,
}

impl std::str::FromStr for Architecture {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "deepreslflb" => Ok(Architecture::DeepResLflb),
            "baseline" | "2dlflb" | "lflb" => Ok(Architecture::Baseline),
            other => Err(format!("unknown architecture '{other}'")),
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Architecture::DeepResLflb => "deepreslflb",
            Architecture::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// `(channels, height, frames)` of one input sample.
    pub input: (usize, usize, usize),
    pub mfl: Vec<LflbConfig>,
    pub sfl: Vec<ResLflbConfig>,
    pub erfd: ErfdConfig,
    /// Activation inside LFLB and NAC layers; the head always uses ReLU.
    pub activation: ActivationKind,
    pub architecture: Architecture,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::for_input(1, 40, 300, 7)
    }
}

impl ModelConfig {
    /// Default architecture for a given input shape and class count.
    pub fn for_input(channels: usize, height: usize, frames: usize, n_classes: usize) -> Self {
        Self {
            input: (channels, height, frames),
            mfl: vec![LflbConfig::new(32), LflbConfig::new(64)],
            sfl: vec![ResLflbConfig::new(64), ResLflbConfig::new(128)],
            erfd: ErfdConfig {
                dropout: 0.3,
                hidden: None,
                n_classes,
            },
            activation: ActivationKind::Elu { alpha: 1.0 },
            architecture: Architecture::DeepResLflb,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let (c, h, w) = self.input;
        if c == 0 || h == 0 || w == 0 {
            return Err(ModelError::BadConfig(format!(
                "input shape {c}x{h}x{w} has an empty dimension"
            )));
        }
        for l in &self.mfl {
            l.validate()?;
        }
        for r in &self.sfl {
            r.validate()?;
        }
        if self.erfd.n_classes < 2 {
            return Err(ModelError::BadConfig("n_classes must be >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.erfd.dropout) {
            return Err(ModelError::BadConfig(format!(
                "dropout {} not in [0, 1)",
                self.erfd.dropout
            )));
        }
        if self.erfd.hidden == Some(0) {
            return Err(ModelError::BadConfig("hidden width must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_doc(doc: &ConfigDoc) -> Result<Self, ConfigError> {
        doc.check_sections(|s| {
            matches!(s, "" | "model" | "input" | "erfd")
                || s.strip_prefix("mfl.").is_some_and(|i| i.parse::<usize>().is_ok())
                || s.strip_prefix("sfl.").is_some_and(|i| i.parse::<usize>().is_ok())
        })?;
        let mut cfg = ModelConfig::default();
        doc.check_keys("", &[])?;
        doc.check_keys("model", &["activation", "architecture", "seed"])?;
        cfg.activation = doc.get_or("model", "activation", cfg.activation)?;
        cfg.architecture = doc.get_or("model", "architecture", cfg.architecture)?;
        cfg.seed = doc.get_or("model", "seed", cfg.seed)?;

        doc.check_keys("input", &["channels", "height", "frames"])?;
        cfg.input = (
            doc.get_or("input", "channels", cfg.input.0)?,
            doc.get_or("input", "height", cfg.input.1)?,
            doc.get_or("input", "frames", cfg.input.2)?,
        );

        doc.check_keys("erfd", &["dropout", "hidden", "n_classes"])?;
        cfg.erfd.dropout = doc.get_or("erfd", "dropout", cfg.erfd.dropout)?;
        cfg.erfd.n_classes = doc.get_or("erfd", "n_classes", cfg.erfd.n_classes)?;
        if let Some(h) = doc.get::<String>("erfd", "hidden")? {
            cfg.erfd.hidden = match h.as_str() {
                "none" | "" => None,
                v => Some(v.parse().map_err(|_| doc.bad_value("erfd", "hidden", "expected integer or none"))?),
            };
        }

        const LFLB_KEYS: [&str; 5] = ["out_channels", "kernel", "stride", "pool_window", "pool_stride"];
        let read_lflb = |name: &str, base: LflbConfig| -> Result<LflbConfig, ConfigError> {
            let pool_window =
                doc.get_or(name, "pool_window", Pair(base.pool_window.0, base.pool_window.1))?;
            let pool_stride = doc.get_or(name, "pool_stride", pool_window)?;
            let kernel = doc.get_or(name, "kernel", Pair(base.kernel.0, base.kernel.1))?;
            let stride = doc.get_or(name, "stride", Pair(base.stride.0, base.stride.1))?;
            Ok(LflbConfig {
                out_channels: doc.require(name, "out_channels")?,
                kernel: (kernel.0, kernel.1),
                stride: (stride.0, stride.1),
                pool_window: (pool_window.0, pool_window.1),
                pool_stride: (pool_stride.0, pool_stride.1),
            })
        };
        let indexed = |prefix: &str| -> Vec<String> {
            let mut names: Vec<(usize, String)> = doc
                .sections
                .iter()
                .filter_map(|s| {
                    let i = s.name.strip_prefix(prefix)?.parse::<usize>().ok()?;
                    Some((i, s.name.clone()))
                })
                .collect();
            names.sort();
            names.into_iter().map(|(_, n)| n).collect()
        };
        let mfl_names = indexed("mfl.");
        if !mfl_names.is_empty() {
            cfg.mfl.clear();
            for name in &mfl_names {
                doc.check_keys(name, &LFLB_KEYS)?;
                cfg.mfl.push(read_lflb(name, LflbConfig::new(1))?);
            }
        }
        let sfl_names = indexed("sfl.");
        if !sfl_names.is_empty() {
            cfg.sfl.clear();
            for name in &sfl_names {
                let mut keys = LFLB_KEYS.to_vec();
                keys.extend(["deep_out_channels", "bottleneck", "n_mid", "mid_kernel"]);
                doc.check_keys(name, &keys)?;
                let preproc = read_lflb(name, LflbConfig::new(1))?;
                let base = ResLflbConfig::new(preproc.out_channels);
                let mid = doc.get_or(name, "mid_kernel", Pair(base.mid_kernel.0, base.mid_kernel.1))?;
                cfg.sfl.push(ResLflbConfig {
                    preproc,
                    deep_out_channels: doc.get_or(name, "deep_out_channels", preproc.out_channels)?,
                    bottleneck_channels: doc.get_or(name, "bottleneck", base.bottleneck_channels)?,
                    n_mid_layers: doc.get_or(name, "n_mid", base.n_mid_layers)?,
                    mid_kernel: (mid.0, mid.1),
                });
            }
        }
        cfg.validate()
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", doc.origin)))?;
        Ok(cfg)
    }

    pub fn to_doc(&self) -> ConfigDoc {
        let mut doc = ConfigDoc {
            origin: "<model>".into(),
            sections: Vec::new(),
        };
        doc.set("model", "architecture", &self.architecture.to_string());
        doc.set("model", "activation", &self.activation.to_string());
        doc.set("model", "seed", &self.seed.to_string());
        doc.set("input", "channels", &self.input.0.to_string());
        doc.set("input", "height", &self.input.1.to_string());
        doc.set("input", "frames", &self.input.2.to_string());
        let put_lflb = |doc: &mut ConfigDoc, name: &str, l: &LflbConfig| {
            doc.set(name, "out_channels", &l.out_channels.to_string());
            doc.set(name, "kernel", &Pair(l.kernel.0, l.kernel.1).to_string());
            doc.set(name, "stride", &Pair(l.stride.0, l.stride.1).to_string());
            doc.set(name, "pool_window", &Pair(l.pool_window.0, l.pool_window.1).to_string());
            doc.set(name, "pool_stride", &Pair(l.pool_stride.0, l.pool_stride.1).to_string());
        };
        for (i, l) in self.mfl.iter().enumerate() {
            put_lflb(&mut doc, &format!("mfl.{i}"), l);
        }
        for (i, r) in self.sfl.iter().enumerate() {
            let name = format!("sfl.{i}");
            put_lflb(&mut doc, &name, &r.preproc);
            doc.set(&name, "deep_out_channels", &r.deep_out_channels.to_string());
            doc.set(&name, "bottleneck", &r.bottleneck_channels.to_string());
            doc.set(&name, "n_mid", &r.n_mid_layers.to_string());
            doc.set(&name, "mid_kernel", &Pair(r.mid_kernel.0, r.mid_kernel.1).to_string());
        }
        doc.set("erfd", "dropout", &self.erfd.dropout.to_string());
        doc.set(
            "erfd",
            "hidden",
            &self.erfd.hidden.map_or("none".to_string(), |h| h.to_string()),
        );
        doc.set("erfd", "n_classes", &self.erfd.n_classes.to_string());
        doc
    }

    pub fn render(&self) -> String {
        self.to_doc().render()
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc = ConfigDoc::from_file(path)?;
        for o in overrides {
            doc.apply_override(o)?;
        }
        Self::from_doc(&doc)
    }
}

/// Plain LFLB stack used as the comparison baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub input: (usize, usize, usize),
    pub blocks: Vec<LflbConfig>,
    pub erfd: ErfdConfig,
    pub activation: ActivationKind,
    pub seed: u64,
}

impl BaselineConfig {
    /// One plain LFLB per DeepResLFLB block, starting at the first MFL width
    /// and doubling per block up to the last SFL width.
    pub fn matched(cfg: &ModelConfig) -> Self {
        let n = cfg.mfl.len() + cfg.sfl.len();
        let pools: Vec<LflbConfig> = cfg
            .mfl
            .iter()
            .copied()
            .chain(cfg.sfl.iter().map(|r| r.preproc))
            .collect();
        let first = pools.first().map_or(1, |l| l.out_channels);
        let last = pools.last().map_or(first, |l| l.out_channels);
        let blocks = (0..n)
            .map(|i| {
                let width = first
                    .checked_shl(i as u32)
                    .unwrap_or(usize::MAX)
                    .min(last.max(first));
                LflbConfig {
                    out_channels: width,
                    ..pools[i]
                }
            })
            .collect();
        Self {
            input: cfg.input,
            blocks,
            erfd: cfg.erfd,
            activation: cfg.activation,
            seed: cfg.seed,
        }
    }
}
