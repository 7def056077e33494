use std::fmt;
use std::str::FromStr;

use super::LayerSpec;
use crate::error::Error;

/// conv32-relu ×2, pool, conv64-relu ×2, pool, conv128-relu ×2, pool,
/// flatten, dense10; every conv is 3×3 with padding 1.
pub fn vgg_mini_specs() -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    for width in [32, 64, 128] {
        specs.extend([
            LayerSpec::conv3(width),
            LayerSpec::Relu,
            LayerSpec::conv3(width),
            LayerSpec::Relu,
            LayerSpec::MaxPool2,
        ]);
    }
    specs.extend([LayerSpec::Flatten, LayerSpec::dense(10)]);
    specs
}

/// conv-relu-pool-conv-relu-pool-flatten-dense, used by the fast tests.
pub fn toy_model_specs(width: usize, classes: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::conv3(width),
        LayerSpec::Relu,
        LayerSpec::MaxPool2,
        LayerSpec::conv3(width),
        LayerSpec::Relu,
        LayerSpec::MaxPool2,
        LayerSpec::Flatten,
        LayerSpec::dense(classes),
    ]
}

/// Named architectures selectable from configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    VggMini,
    /// Two-conv toy network with the given conv width.
    Toy(usize),
}

impl Architecture {
    pub fn specs(&self, classes: usize) -> Vec<LayerSpec> {
        match *self {
            Architecture::VggMini => {
                let mut s = vgg_mini_specs();
                *s.last_mut().unwrap() = LayerSpec::dense(classes);
                s
            }
            Architecture::Toy(width) => toy_model_specs(width, classes),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::VggMini => f.write_str("vgg-mini"),
            Architecture::Toy(w) => write!(f, "toy{w}"),
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if s == "vgg-mini" {
            return Ok(Architecture::VggMini);
        }
        s.strip_prefix("toy")
            .and_then(|w| w.parse().ok())
            .filter(|&w: &usize| w > 0)
            .map(Architecture::Toy)
            .ok_or_else(|| Error::Config(format!("unknown architecture {s:?} (expected vgg-mini or toyN)")))
    }
}
