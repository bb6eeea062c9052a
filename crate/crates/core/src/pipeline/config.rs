use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backbone::BackboneParams;
use crate::error::{Error, Result};
use crate::export::Format;
use crate::extrapolate::{DrawSharing, FirmCoefficient, SamplingMode};
use crate::firms::MatchRule;
use crate::regression::{Covariance, Regressor};
use crate::topics::{LdaOptions, SelectionOptions};
use crate::trade::{TimeWindow, TradeSchema, SCRAP_HS_PREFIX};

/// EU member states (alpha-3), the default pool for firm distributions.
pub const EU27: [&str; 27] = [
    "AUT", "BEL", "BGR", "HRV", "CYP", "CZE", "DNK", "EST", "FIN", "FRA", "DEU", "GRC", "HUN",
    "IRL", "ITA", "LVA", "LTU", "LUX", "MLT", "NLD", "POL", "PRT", "ROU", "SVK", "SVN", "ESP",
    "SWE",
];

/// Whole-run configuration, read from one TOML file.
///
/// Relative input paths and the output directory are resolved against the
/// directory containing the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed for every stochastic stage.
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    /// Table formats to write; networks are additionally written as DOT.
    pub formats: Vec<String>,
    pub inputs: Inputs,
    pub trade: TradeConfig,
    pub backbone: BackboneConfig,
    pub firms: FirmConfig,
    pub topics: TopicConfig,
    pub regression: RegressionConfig,
    pub extrapolation: ExtrapolationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: None,
            output_dir: PathBuf::from("out"),
            formats: vec!["csv".into(), "json".into()],
            inputs: Inputs::default(),
            trade: TradeConfig::default(),
            backbone: BackboneConfig::default(),
            firms: FirmConfig::default(),
            topics: TopicConfig::default(),
            regression: RegressionConfig::default(),
            extrapolation: ExtrapolationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Bilateral trade records.
    pub trade: Option<PathBuf>,
    /// Company registry export.
    pub registry: Option<PathBuf>,
    /// `country,eaf_capacity_kt,bof_capacity_kt` per country.
    pub capacity: Option<PathBuf>,
    /// `country,planned_eaf_kt` per country.
    pub plan: Option<PathBuf>,
    /// Ready-made regression table; replaces the capacity/trade/firm join.
    pub observations: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradeConfig {
    pub commodity_prefix: String,
    pub windows: Vec<TimeWindow>,
    pub schema: TradeSchema,
    /// Countries for the per-year import/export series.
    pub series_countries: Vec<String>,
}

impl Default for TradeConfig {
    fn default() -> Self {
        TradeConfig {
            commodity_prefix: SCRAP_HS_PREFIX.into(),
            windows: TimeWindow::defaults(),
            schema: TradeSchema::default(),
            series_countries: [
                "USA", "TUR", "DEU", "FRA", "NLD", "GBR", "CHN", "ITA", "ESP",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackboneConfig {
    pub alpha: f64,
    pub keep_degree_one: bool,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        let p = BackboneParams::default();
        BackboneConfig {
            alpha: p.alpha,
            keep_degree_one: p.keep_degree_one,
        }
    }
}

impl BackboneConfig {
    pub fn params(&self) -> BackboneParams {
        BackboneParams {
            alpha: self.alpha,
            keep_degree_one: self.keep_degree_one,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FirmConfig {
    pub keyword: String,
    pub exclusions: Vec<String>,
    pub delimiter: char,
    /// Label recorded with the population.
    pub provenance: String,
}

impl Default for FirmConfig {
    fn default() -> Self {
        let rule = MatchRule::default();
        FirmConfig {
            keyword: rule.keyword,
            exclusions: rule.exclusions,
            delimiter: ',',
            provenance: "registry snapshot".into(),
        }
    }
}

impl FirmConfig {
    pub fn rule(&self) -> MatchRule {
        MatchRule {
            keyword: self.keyword.clone(),
            exclusions: self.exclusions.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicConfig {
    pub grid: Vec<usize>,
    pub holdout_fraction: f64,
    pub iterations: usize,
    pub fold_in_iterations: usize,
    /// Document-topic prior; 50 / K when absent.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub top_terms: usize,
    /// Replaces the bundled stopword list when set (one word per line).
    pub stopwords_file: Option<PathBuf>,
    pub extra_stopwords: Vec<String>,
}

impl Default for TopicConfig {
    fn default() -> Self {
        let sel = SelectionOptions::default();
        TopicConfig {
            grid: sel.grid,
            holdout_fraction: sel.holdout_fraction,
            iterations: sel.lda.iterations,
            fold_in_iterations: sel.lda.fold_in_iterations,
            alpha: sel.lda.alpha,
            beta: sel.lda.beta,
            top_terms: 20,
            stopwords_file: None,
            extra_stopwords: Vec::new(),
        }
    }
}

impl TopicConfig {
    pub fn selection(&self) -> SelectionOptions {
        SelectionOptions {
            grid: self.grid.clone(),
            holdout_fraction: self.holdout_fraction,
            lda: LdaOptions {
                iterations: self.iterations,
                alpha: self.alpha,
                beta: self.beta,
                fold_in_iterations: self.fold_in_iterations,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    pub regressors: Vec<Regressor>,
    pub covariance: Covariance,
    /// Window whose average flows enter the regression.
    pub trade_window: TimeWindow,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            regressors: Regressor::ALL.to_vec(),
            covariance: Covariance::Classical,
            trade_window: TimeWindow::new(2017, 2021).unwrap(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSource {
    /// Firm coefficient and its SE from this run's regression.
    Fit,
    /// 79 kt/yr per firm, SD 11.
    Published,
    /// `coefficient_estimate` and `coefficient_sd` from the config.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtrapolationConfig {
    pub coefficient_source: CoefficientSource,
    pub coefficient_estimate: Option<f64>,
    pub coefficient_sd: Option<f64>,
    pub coefficient_draws: usize,
    pub population_iterations: usize,
    /// Countries with at least this many complete firms get their own CDFs.
    pub min_country_firms: usize,
    pub pool_countries: Vec<String>,
    pub sampling: SamplingMode,
    pub sharing: DrawSharing,
}

impl Default for ExtrapolationConfig {
    fn default() -> Self {
        ExtrapolationConfig {
            coefficient_source: CoefficientSource::Fit,
            coefficient_estimate: None,
            coefficient_sd: None,
            coefficient_draws: 1000,
            population_iterations: 1000,
            min_country_firms: 30,
            pool_countries: EU27.map(String::from).to_vec(),
            sampling: SamplingMode::Independent,
            sharing: DrawSharing::Shared,
        }
    }
}

impl ExtrapolationConfig {
    /// The configured coefficient, unless it comes from the fit.
    pub fn fixed_coefficient(&self) -> Result<Option<FirmCoefficient>> {
        match self.coefficient_source {
            CoefficientSource::Fit => Ok(None),
            CoefficientSource::Published => Ok(Some(FirmCoefficient::PUBLISHED)),
            CoefficientSource::Explicit => match (self.coefficient_estimate, self.coefficient_sd) {
                (Some(estimate), Some(sd)) => Ok(Some(FirmCoefficient { estimate, sd })),
                _ => Err(Error::Config(
                    "explicit coefficient source needs coefficient_estimate and coefficient_sd"
                        .into(),
                )),
            },
        }
    }
}

impl PipelineConfig {
    /// Read a TOML config and resolve its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_relative_to(base);
        Ok(cfg)
    }

    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        let i = &mut self.inputs;
        for p in [
            &mut i.trade,
            &mut i.registry,
            &mut i.capacity,
            &mut i.plan,
            &mut i.observations,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(p) = &mut self.topics.stopwords_file {
            fix(p);
        }
    }

    pub fn table_formats(&self) -> Result<Vec<Format>> {
        let formats = self
            .formats
            .iter()
            .map(|f| f.parse::<Format>())
            .collect::<Result<Vec<_>>>()?;
        if formats.is_empty() || formats.contains(&Format::Dot) {
            return Err(Error::Config(
                "formats must list table formats (csv, json); DOT is written for networks automatically"
                    .into(),
            ));
        }
        Ok(formats)
    }

    /// Static checks that do not touch the file system.
    pub fn validate(&self) -> Result<()> {
        self.table_formats()?;
        if self.trade.commodity_prefix.is_empty() {
            return Err(Error::Config("commodity_prefix must not be empty".into()));
        }
        if self.trade.windows.is_empty() {
            return Err(Error::Config("at least one time window is required".into()));
        }
        self.backbone.params().validate()?;
        if !self.firms.delimiter.is_ascii() {
            return Err(Error::Config("registry delimiter must be ASCII".into()));
        }
        if self.topics.grid.is_empty() || self.topics.grid.contains(&0) {
            return Err(Error::Config(
                "topic grid must list positive topic counts".into(),
            ));
        }
        if self.regression.regressors.is_empty() {
            return Err(Error::Config("no regressors selected".into()));
        }
        self.extrapolation.fixed_coefficient()?;
        if self.extrapolation.coefficient_source == CoefficientSource::Fit
            && !self.regression.regressors.contains(&Regressor::Firms)
        {
            return Err(Error::Config(
                "coefficient_source = \"fit\" needs the firms regressor".into(),
            ));
        }
        if self.extrapolation.coefficient_draws == 0
            || self.extrapolation.population_iterations == 0
        {
            return Err(Error::Config("Monte Carlo counts must be positive".into()));
        }
        Ok(())
    }

    /// Every configured input path must exist.
    pub fn check_paths(&self) -> Result<()> {
        let i = &self.inputs;
        let named = [
            ("trade", &i.trade),
            ("registry", &i.registry),
            ("capacity", &i.capacity),
            ("plan", &i.plan),
            ("observations", &i.observations),
            ("stopwords_file", &self.topics.stopwords_file),
        ];
        for (name, p) in named {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(Error::Config(format!(
                        "input {name} = {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }
}
