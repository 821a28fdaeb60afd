//! Scenario files.
//!
//! A scenario is a TOML file of flat keys. The network comes from exactly
//! one of `bundle` (path to a `manifest.json`, relative to the scenario
//! file) or a `[synthetic]` table. Command-line flags override file values.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use interbank::abm::{AbmParams, NodeParam, PriceMode};
use interbank::debtrank::DistressTrigger;
use interbank::ingest::SyntheticConfig;
use interbank::topology::DistanceMode;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Topology,
    Debtrank,
    Superpose,
    Abm,
}

impl Analysis {
    pub const ALL: [Analysis; 4] = [
        Analysis::Topology,
        Analysis::Debtrank,
        Analysis::Superpose,
        Analysis::Abm,
    ];
}

/// Overrides for the synthetic generator; unset keys keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub core_fraction: Option<f64>,
    pub activity_sigma: Option<f64>,
    pub holdings_density: Option<f64>,
    pub equity_ratio: Option<f64>,
    pub seed: Option<u64>,
}

impl SyntheticSection {
    pub fn to_config(&self, seed: Option<u64>) -> SyntheticConfig {
        let d = SyntheticConfig::default();
        SyntheticConfig {
            n: self.n.unwrap_or(d.n),
            m: self.m.unwrap_or(d.m),
            core_fraction: self.core_fraction.unwrap_or(d.core_fraction),
            activity_sigma: self.activity_sigma.unwrap_or(d.activity_sigma),
            holdings_density: self.holdings_density.unwrap_or(d.holdings_density),
            equity_ratio: self.equity_ratio.unwrap_or(d.equity_ratio),
            seed: seed.or(self.seed).unwrap_or(d.seed),
            ..d
        }
    }
}

/// Raw file contents.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    bundle: Option<PathBuf>,
    synthetic: Option<SyntheticSection>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    analyses: Option<Vec<Analysis>>,
    betas: Option<Vec<f64>>,
    gamma_bar: Option<f64>,
    w_b: Option<f64>,
    w_s: Option<f64>,
    alpha: Option<f64>,
    c_te: Option<f64>,
    price_mode: Option<String>,
    debtrank_mode: Option<String>,
    distance_mode: Option<String>,
    damping: Option<f64>,
    strict_paper_formulas: Option<bool>,
    credit_pair: Option<[String; 2]>,
    liquidity_pair: Option<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Bundle(PathBuf),
    Synthetic(SyntheticConfig),
}

/// Validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub source: Source,
    pub output_dir: PathBuf,
    pub analyses: Vec<Analysis>,
    pub betas: Vec<f64>,
    pub gamma_bar: f64,
    pub w_b: f64,
    pub w_s: f64,
    pub alpha: f64,
    pub c_te: f64,
    pub price_mode: PriceMode,
    pub debtrank_mode: DistressTrigger,
    pub distance_mode: DistanceMode,
    pub damping: f64,
    pub strict_paper_formulas: bool,
    pub credit_pair: [String; 2],
    pub liquidity_pair: [String; 2],
}

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub bundle: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub betas: Option<Vec<f64>>,
    pub gamma_bar: Option<f64>,
    pub price_mode: Option<PriceMode>,
    pub debtrank_mode: Option<DistressTrigger>,
    pub strict_paper_formulas: bool,
}

fn parse_enum<T: FromStr<Err = String>>(key: &str, value: Option<String>, default: T) -> Result<T> {
    match value {
        None => Ok(default),
        Some(s) => T::from_str(&s).map_err(|e| anyhow::anyhow!("`{key}`: {e}")),
    }
}

impl ScenarioConfig {
    pub fn load(path: Option<&Path>, ov: Overrides) -> Result<Self> {
        let (file, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading scenario {}", p.display()))?;
                let file: ScenarioFile = toml::from_str(&text)
                    .with_context(|| format!("parsing scenario {}", p.display()))?;
                (file, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (ScenarioFile::default(), PathBuf::new()),
        };
        let source = match (ov.bundle, file.bundle, file.synthetic) {
            (Some(b), _, _) => Source::Bundle(b),
            (None, Some(_), Some(_)) => {
                bail!("the scenario sets both `bundle` and `[synthetic]`; choose one")
            }
            (None, Some(b), None) => Source::Bundle(base.join(b)),
            (None, None, s) => Source::Synthetic(s.unwrap_or_default().to_config(ov.seed.or(file.seed))),
        };
        let output_dir = ov
            .out
            .or_else(|| file.output_dir.map(|d| base.join(d)))
            .unwrap_or_else(|| PathBuf::from("out"));
        let d = AbmParams::default();
        let cfg = Self {
            source,
            output_dir,
            analyses: file.analyses.unwrap_or_else(|| Analysis::ALL.to_vec()),
            betas: ov.betas.or(file.betas).unwrap_or_else(|| vec![0.05, 0.1, 0.2]),
            gamma_bar: ov.gamma_bar.or(file.gamma_bar).unwrap_or(d.gamma_bar),
            w_b: file.w_b.unwrap_or(0.2),
            w_s: file.w_s.unwrap_or(interbank::holdings::DEFAULT_SECURITY_RISK_WEIGHT),
            alpha: file.alpha.unwrap_or(interbank::holdings::DEFAULT_ALPHA),
            c_te: file.c_te.unwrap_or(0.0),
            price_mode: match ov.price_mode {
                Some(m) => m,
                None => parse_enum("price_mode", file.price_mode, d.price_mode)?,
            },
            debtrank_mode: match ov.debtrank_mode {
                Some(m) => m,
                None => parse_enum("debtrank_mode", file.debtrank_mode, DistressTrigger::AnyDistress)?,
            },
            distance_mode: parse_enum("distance_mode", file.distance_mode, DistanceMode::InverseWeight)?,
            damping: file.damping.unwrap_or(0.85),
            strict_paper_formulas: ov.strict_paper_formulas || file.strict_paper_formulas.unwrap_or(false),
            credit_pair: file.credit_pair.unwrap_or_else(|| ["ltc".into(), "cs".into()]),
            liquidity_pair: file.liquidity_pair.unwrap_or_else(|| ["stc".into(), "stf".into()]),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.analyses.is_empty() {
            bail!("`analyses` must not be empty");
        }
        if self.betas.is_empty() {
            bail!("`betas` must not be empty");
        }
        if let Some(b) = self.betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            bail!("beta {b} outside [0, 1]");
        }
        if !(0.0..1.0).contains(&self.gamma_bar) {
            bail!("`gamma_bar` {} outside [0, 1)", self.gamma_bar);
        }
        for (key, v) in [("w_b", self.w_b), ("w_s", self.w_s), ("alpha", self.alpha), ("c_te", self.c_te)] {
            if !(v.is_finite() && v >= 0.0) {
                bail!("`{key}` must be finite and non-negative, got {v}");
            }
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            bail!("`damping` {} outside (0, 1)", self.damping);
        }
        if let Source::Synthetic(s) = &self.source {
            s.validate()?;
        }
        Ok(())
    }

    pub fn abm_params(&self) -> AbmParams {
        AbmParams {
            w_b: NodeParam::Uniform(self.w_b),
            gamma_bar: self.gamma_bar,
            c_te: NodeParam::Uniform(self.c_te),
            price_mode: self.price_mode,
            strict_paper_formulas: self.strict_paper_formulas,
            ..AbmParams::default()
        }
    }
}
