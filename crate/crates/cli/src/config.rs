use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};
use confgeo::Constants;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Main1,
    Neck,
    BrezisMerle,
    Collapse,
    Bubble,
    SpherePinch,
    GhConverge,
    #[serde(rename = "k-ge-1")]
    KGe1,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Main1,
        Experiment::Neck,
        Experiment::BrezisMerle,
        Experiment::Collapse,
        Experiment::Bubble,
        Experiment::SpherePinch,
        Experiment::GhConverge,
        Experiment::KGe1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Main1 => "main1",
            Experiment::Neck => "neck",
            Experiment::BrezisMerle => "brezis-merle",
            Experiment::Collapse => "collapse",
            Experiment::Bubble => "bubble",
            Experiment::SpherePinch => "sphere-pinch",
            Experiment::GhConverge => "gh-converge",
            Experiment::KGe1 => "k-ge-1",
        }
    }

    /// Cells across the domain when neither the config nor `--res` sets one.
    pub fn default_res(self) -> usize {
        match self {
            Experiment::Main1 | Experiment::BrezisMerle | Experiment::Collapse => 256,
            Experiment::Neck => 320,
            Experiment::Bubble => 512,
            Experiment::SpherePinch => 640,
            Experiment::GhConverge => 128,
            Experiment::KGe1 => 160,
        }
    }

    pub fn default_kmax(self) -> u32 {
        match self {
            Experiment::Main1 | Experiment::Neck => 10,
            Experiment::Collapse => 20,
            Experiment::Bubble | Experiment::SpherePinch => 4,
            Experiment::GhConverge => 32,
            Experiment::BrezisMerle | Experiment::KGe1 => 5,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match Experiment::ALL.iter().find(|e| e.name() == s) {
            Some(&e) => Ok(e),
            None => {
                let known: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                bail!("unknown experiment {s:?}; expected one of {}", known.join(", "))
            }
        }
    }
}

macro_rules! tolerances {
    ($($(#[$doc:meta])* $name:ident: $default:expr,)*) => {
        /// Slack on the checks, relative unless noted.
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct Tolerances {
            $($(#[$doc])* pub $name: f64,)*
        }

        impl Default for Tolerances {
            fn default() -> Self {
                Tolerances { $($name: $default,)* }
            }
        }

        impl Tolerances {
            fn validate(&self) -> anyhow::Result<()> {
                $(if !(self.$name > 0.0) {
                    bail!("tolerance {} must be positive, got {}", stringify!($name), self.$name);
                })*
                if self.scale_factor < 1.0 {
                    bail!("tolerance scale_factor must be at least 1");
                }
                Ok(())
            }
        }
    };
}

tolerances! {
    /// Unit area of the collapse family.
    area: 0.005,
    /// Flat neck ratios inside `[1, 3]` widened by this much.
    neck_band: 0.02,
    /// Flat neck area ratio against `3π`.
    neck_area: 0.01,
    /// John-Nirenberg floor against `3πλ/(4k)`.
    jn_floor: 0.05,
    /// Absolute error of `K ≡ 1` for the round factor.
    curvature: 0.01,
    /// Round-sphere area against `4π`.
    sphere_area: 0.01,
    /// Unit-ball volume ratio on the round sphere above 1.
    volume_ratio: 0.02,
    /// Diameter and area slack of the `K ≥ 1` family.
    sphere: 0.03,
    /// Center error, in cells.
    center_cells: 2.0,
    /// Multiplicative scale error.
    scale_factor: 2.0,
    /// Absolute `L¹(D_2)` error of a rescaled bubble profile.
    profile_l1: 0.1,
    /// Atom mass against `4π`.
    atom_mass: 0.05,
    /// Absolute `L²` error of the renormalized factor.
    mobius_l2: 0.05,
    /// Möbius invariance of the curvature defect.
    invariance: 0.02,
    /// Absolute GH upper bound at the last member.
    gh_upper: 0.05,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Cells across the domain; `null` picks the experiment's own default.
    pub res: Option<usize>,
    /// Largest family index; `null` picks the experiment's own default.
    pub kmax: Option<u32>,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Also write an SVG heatmap next to every CONFGRID field.
    pub svg: bool,
    /// Fill the runtime_ms column. Off by default so reports are reproducible byte for byte.
    pub timing: bool,
    pub constants: Constants,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Main1,
            res: None,
            kmax: None,
            trials: 20,
            seed: 20_240_601,
            out: PathBuf::from("out"),
            svg: false,
            timing: false,
            constants: Constants::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn defaults_json() -> String {
        serde_json::to_string_pretty(&ExperimentConfig::default()).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if let Some(res) = self.res {
            if res < 32 {
                bail!("res must be at least 32, got {res}");
            }
        }
        if self.kmax == Some(0) {
            bail!("kmax must be at least 1");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if !(self.constants.lambda > 0.0) {
            bail!("constants.lambda must be positive");
        }
        self.tolerances.validate()
    }

    pub fn res(&self) -> usize {
        self.res.unwrap_or_else(|| self.experiment.default_res())
    }

    pub fn kmax(&self) -> u32 {
        self.kmax.unwrap_or_else(|| self.experiment.default_kmax())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
            assert_eq!(serde_json::to_string(&e).unwrap(), format!("\"{}\"", e.name()));
        }
        assert!("main2".parse::<Experiment>().is_err());
    }

    #[test]
    fn defaults_parse_back() {
        let cfg = ExperimentConfig::from_json(&ExperimentConfig::defaults_json()).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let partial = ExperimentConfig::from_json(r#"{"experiment": "neck", "res": 64}"#).unwrap();
        assert_eq!(partial.res(), 64);
        assert_eq!(partial.trials, 20);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_json(r#"{"res": 8}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"tolerances": {"area": 0}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "nope"}"#).is_err());
    }

    #[test]
    fn every_constant_appears_once() {
        let text = ExperimentConfig::defaults_json();
        for key in ["eps0", "eps0_prime", "eps2", "lambda1", "lambda2", "lambda3", "tau"] {
            assert_eq!(text.matches(&format!("\"{key}\"")).count(), 1, "{key}");
        }
    }
}
