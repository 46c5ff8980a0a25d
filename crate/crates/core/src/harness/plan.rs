//! Study plans and the rules mapping a fine level to a coarse level and a
//! time step.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::mms::case_by_name;
use crate::spaces::ElementFamily;
use crate::stepper::{Algorithm, TimeScheme};

/// How the coarse mesh size follows the fine one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// `H = 2^k h`.
    FixedRatio(u32),
    /// `H = h^(1/2)`.
    HHalf,
    /// `H = h^(2/3)`.
    HTwoThirds,
    /// `H = h^(3/4)`.
    HThreeQuarters,
}

impl Coupling {
    /// Exponent `alpha` in `H = h^alpha`, if this is a power law.
    pub fn exponent(self) -> Option<f64> {
        match self {
            Coupling::FixedRatio(_) => None,
            Coupling::HHalf => Some(0.5),
            Coupling::HTwoThirds => Some(2.0 / 3.0),
            Coupling::HThreeQuarters => Some(0.75),
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coupling::FixedRatio(k) => write!(f, "fixed_ratio({k})"),
            Coupling::HHalf => f.write_str("h_half"),
            Coupling::HTwoThirds => f.write_str("h_two_thirds"),
            Coupling::HThreeQuarters => f.write_str("h_three_quarters"),
        }
    }
}

/// Parses `name(arg)` into `(name, Some(arg))`.
fn call_syntax(s: &str) -> (&str, Option<&str>) {
    match (s.find('('), s.strip_suffix(')')) {
        (Some(i), Some(body)) => (&s[..i], Some(&body[i + 1..])),
        _ => (s, None),
    }
}

impl FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match call_syntax(s) {
            ("fixed_ratio", Some(k)) => k
                .trim()
                .parse()
                .map(Coupling::FixedRatio)
                .map_err(|_| Error::Config(format!("bad fixed_ratio level count in `{s}`"))),
            ("h_half", None) => Ok(Coupling::HHalf),
            ("h_two_thirds", None) => Ok(Coupling::HTwoThirds),
            ("h_three_quarters", None) => Ok(Coupling::HThreeQuarters),
            _ => Err(Error::Config(format!("unknown coupling `{s}`"))),
        }
    }
}

/// Coarse subdivision count for fine subdivision count `fine_n`.
///
/// Meshes exist at `fine_n / 2^k`. For power-law couplings the result is
/// the coarsest of these with `1/n <= (1/fine_n)^alpha`.
pub fn couple_h(fine_n: usize, rule: Coupling) -> Result<usize> {
    if fine_n == 0 {
        return Err(Error::Config("fine level must have n >= 1".into()));
    }
    match rule {
        Coupling::FixedRatio(k) => {
            let d = 1usize.checked_shl(k).filter(|d| *d <= fine_n && fine_n.is_multiple_of(*d));
            d.map(|d| fine_n / d).ok_or_else(|| {
                Error::ChainTooShort(format!("n = {fine_n} cannot be coarsened {k} times"))
            })
        }
        _ => {
            let alpha = rule.exponent().expect("power law");
            let target = (1.0 / fine_n as f64).powf(alpha);
            let mut best = fine_n;
            let mut n = fine_n;
            while n.is_multiple_of(2) {
                n /= 2;
                if 1.0 / n as f64 <= target * (1.0 + 1e-12) {
                    best = n;
                } else {
                    break;
                }
            }
            Ok(best)
        }
    }
}

/// Number of time steps for a fine level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    /// Always `N` steps.
    Fixed(usize),
    /// `dt = T h`, that is `N = n`.
    ProportionalToH,
    /// `dt = T h^(3/2)`, that is `N = ceil(n^(3/2))`.
    ProportionalToHThreeHalves,
}

impl DtRule {
    pub fn steps(self, n: usize) -> usize {
        match self {
            DtRule::Fixed(s) => s,
            DtRule::ProportionalToH => n,
            DtRule::ProportionalToHThreeHalves => {
                let v = (n as f64).powf(1.5);
                // guard against n^1.5 landing a rounding error above an integer
                let r = v.round();
                if (v - r).abs() < 1e-9 {
                    r as usize
                } else {
                    v.ceil() as usize
                }
            }
        }
    }
}

impl fmt::Display for DtRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DtRule::Fixed(s) => write!(f, "fixed({s})"),
            DtRule::ProportionalToH => f.write_str("proportional_to_h"),
            DtRule::ProportionalToHThreeHalves => f.write_str("proportional_to_h_three_halves"),
        }
    }
}

impl FromStr for DtRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match call_syntax(s) {
            ("fixed", Some(k)) => match k.trim().parse::<usize>() {
                Ok(k) if k > 0 => Ok(DtRule::Fixed(k)),
                _ => Err(Error::Config(format!("bad step count in `{s}`"))),
            },
            ("proportional_to_h", None) => Ok(DtRule::ProportionalToH),
            ("proportional_to_h_three_halves", None) => Ok(DtRule::ProportionalToHThreeHalves),
            _ => Err(Error::Config(format!("unknown dt rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyPlan {
    pub algorithm: Algorithm,
    pub family: ElementFamily,
    pub case: String,
    /// Fine subdivision counts, strictly increasing.
    pub levels: Vec<usize>,
    pub coupling: Coupling,
    pub scheme: TimeScheme,
    pub dt_rule: DtRule,
    pub final_time: f64,
    pub out_csv: Option<PathBuf>,
    pub out_svg: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    algorithm: String,
    family: String,
    case: String,
    levels: Vec<usize>,
    coupling: String,
    scheme: String,
    dt_rule: String,
    #[serde(rename = "T")]
    t: f64,
    out_csv: Option<PathBuf>,
    out_svg: Option<PathBuf>,
}

impl StudyPlan {
    /// Parses a TOML plan. Relative output paths are kept as written.
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawPlan = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let plan = StudyPlan {
            algorithm: raw.algorithm.parse()?,
            family: raw.family.parse()?,
            case: raw.case,
            levels: raw.levels,
            coupling: raw.coupling.parse()?,
            scheme: raw.scheme.parse()?,
            dt_rule: raw.dt_rule.parse()?,
            final_time: raw.t,
            out_csv: raw.out_csv,
            out_svg: raw.out_svg,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == ElementFamily::EqualOrderP1 {
            return Err(Error::Config("p1p1 is not a stable pair and cannot be used in studies".into()));
        }
        case_by_name(&self.case).map_err(|e| Error::Config(e.to_string()))?;
        if self.levels.is_empty() {
            return Err(Error::Config("levels must not be empty".into()));
        }
        if self.levels.contains(&0) {
            return Err(Error::Config("levels must be positive".into()));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("levels must be strictly increasing".into()));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(Error::Config("T must be positive".into()));
        }
        for &n in &self.levels {
            if self.algorithm != Algorithm::GalerkinOnly {
                couple_h(n, self.coupling)?;
            }
            if self.scheme == TimeScheme::Bdf2 && self.dt_rule.steps(n) < 2 {
                return Err(Error::Config(format!("bdf2 needs at least two steps at n = {n}")));
            }
        }
        Ok(())
    }

    /// TOML text that parses back to this plan.
    pub fn to_toml(&self) -> String {
        let mut s = format!(
            "algorithm = \"{}\"\nfamily = \"{}\"\ncase = \"{}\"\nlevels = {:?}\ncoupling = \"{}\"\nscheme = \"{}\"\ndt_rule = \"{}\"\nT = {:?}\n",
            self.algorithm, self.family, self.case, self.levels, self.coupling, self.scheme, self.dt_rule, self.final_time
        );
        if let Some(p) = &self.out_csv {
            s += &format!("out_csv = {:?}\n", p.display().to_string());
        }
        if let Some(p) = &self.out_svg {
            s += &format!("out_svg = {:?}\n", p.display().to_string());
        }
        s
    }
}
