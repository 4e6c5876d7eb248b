use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use poselift::net::InputMode;

/// One row family of the experiment matrix.
///
/// Written as `clean`, `clean+tagn(σ,p,k)`, `corrupt`, `corrupt+caconv(γ)`,
/// `corrupt+concat` or `corrupt+medianfilter(kernel)`; the parenthesised
/// arguments may be left out to get the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Preset {
    Clean,
    CleanTagn { sigma: f64, p: f64, k: f64 },
    Corrupt,
    CorruptCaConv { gamma: f64 },
    CorruptConcat,
    CorruptMedianFilter { kernel: usize },
}

pub const DEFAULT_TAGN: (f64, f64, f64) = (0.3, 0.5, 0.5);
pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_MEDIAN_KERNEL: usize = 5;

impl Preset {
    /// Whether training reads the corrupted train split.
    pub fn trains_on_corrupt(&self) -> bool {
        !matches!(self, Self::Clean | Self::CleanTagn { .. })
    }

    pub fn input_mode(&self) -> InputMode {
        match self {
            Self::CorruptCaConv { .. } => InputMode::ConfidenceAware,
            Self::CorruptConcat => InputMode::ConfConcat,
            _ => InputMode::PoseOnly,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            Self::CorruptCaConv { gamma } => Some(*gamma),
            _ => None,
        }
    }

    /// `(σ, p, k)`.
    pub fn tagn(&self) -> Option<(f64, f64, f64)> {
        match self {
            Self::CleanTagn { sigma, p, k } => Some((*sigma, *p, *k)),
            _ => None,
        }
    }

    pub fn median_kernel(&self) -> Option<usize> {
        match self {
            Self::CorruptMedianFilter { kernel } => Some(*kernel),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Self::CleanTagn { sigma, p, k } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(format!("tagn sigma must be non-negative, got {sigma}"));
                }
                for (name, v) in [("p", p), ("k", k)] {
                    if !(0.0..=1.0).contains(v) {
                        return Err(format!("tagn {name} must lie in [0, 1], got {v}"));
                    }
                }
            }
            Self::CorruptCaConv { gamma } if !(*gamma >= 0.0 && gamma.is_finite()) => {
                return Err(format!("caconv gamma must be non-negative, got {gamma}"));
            }
            Self::CorruptMedianFilter { kernel } if kernel % 2 == 0 => {
                return Err(format!("median filter kernel must be odd, got {kernel}"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Human-readable description for log headers.
    pub fn describe(&self) -> String {
        match self {
            Self::Clean => "clean-trained baseline".into(),
            Self::CleanTagn { sigma, p, k } => {
                format!("clean-trained with TAGN sigma={sigma} p={p} k={k}")
            }
            Self::Corrupt => "corrupt-trained baseline".into(),
            Self::CorruptCaConv { gamma } => format!("corrupt-trained CA-Conv gamma={gamma}"),
            Self::CorruptConcat => "corrupt-trained confidence concatenation".into(),
            Self::CorruptMedianFilter { kernel } => format!("corrupt-trained with median filter kernel={kernel}"),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Clean => write!(f, "clean"),
            Self::CleanTagn { sigma, p, k } => write!(f, "clean+tagn({sigma},{p},{k})"),
            Self::Corrupt => write!(f, "corrupt"),
            Self::CorruptCaConv { gamma } => write!(f, "corrupt+caconv({gamma})"),
            Self::CorruptConcat => write!(f, "corrupt+concat"),
            Self::CorruptMedianFilter { kernel } => write!(f, "corrupt+medianfilter({kernel})"),
        }
    }
}

fn split_args(s: &str) -> Result<(&str, Vec<&str>), String> {
    match s.find('(') {
        None => Ok((s, Vec::new())),
        Some(i) => {
            let inner = s[i + 1..]
                .strip_suffix(')')
                .ok_or_else(|| format!("unclosed argument list in preset `{s}`"))?;
            Ok((&s[..i], inner.split(',').map(str::trim).collect()))
        }
    }
}

fn num<T: FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("bad {what} `{s}`"))
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (name, args) = split_args(&compact)?;
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("preset `{name}` takes {n} argument(s), got {}", args.len()))
            }
        };
        let preset = match (name, args.is_empty()) {
            ("clean", true) => Self::Clean,
            ("corrupt", true) => Self::Corrupt,
            ("corrupt+concat", true) => Self::CorruptConcat,
            ("clean+tagn", true) => {
                let (sigma, p, k) = DEFAULT_TAGN;
                Self::CleanTagn { sigma, p, k }
            }
            ("clean+tagn", false) => {
                arity(3)?;
                Self::CleanTagn { sigma: num(args[0], "sigma")?, p: num(args[1], "p")?, k: num(args[2], "k")? }
            }
            ("corrupt+caconv", true) => Self::CorruptCaConv { gamma: DEFAULT_GAMMA },
            ("corrupt+caconv", false) => {
                arity(1)?;
                Self::CorruptCaConv { gamma: num(args[0], "gamma")? }
            }
            ("corrupt+medianfilter", true) => Self::CorruptMedianFilter { kernel: DEFAULT_MEDIAN_KERNEL },
            ("corrupt+medianfilter", false) => {
                arity(1)?;
                Self::CorruptMedianFilter { kernel: num(args[0], "kernel")? }
            }
            _ => {
                return Err(format!(
                    "unknown preset `{s}`; expected clean, clean+tagn(σ,p,k), corrupt, corrupt+caconv(γ), corrupt+concat or corrupt+medianfilter(kernel)"
                ))
            }
        };
        preset.validate()?;
        Ok(preset)
    }
}

impl TryFrom<String> for Preset {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Preset> for String {
    fn from(p: Preset) -> String {
        p.to_string()
    }
}
