use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use super::config::PipelineConfig;
use super::manifest::{ArtifactWriter, Manifest};
use crate::backbone::{edge_significance, extract_backbone};
use crate::error::{Error, Result};
use crate::export::{self, Artifact, Format, Table};
use crate::extrapolate::{
    aggregate_totals, extrapolate, parse_capacity_plan, ExtrapolationOptions, FirmCoefficient,
    FirmDistributions,
};
use crate::firms::{
    country_aggregates, match_scrap_firms, naics_distribution, parse_registry,
    revenue_employee_correlation, FirmPopulation,
};
use crate::regression::{
    fit_no_intercept, parse_observations, CountryObservation, RegressionFit, Regressor,
};
use crate::seed;
use crate::topics::{default_stopwords, fit_lda, select_topic_count, Corpus, Preprocessor};
use crate::trade::{
    build_network, country_time_series, country_totals, filter_commodity, parse_trade_records,
    SkipReason, TimeWindow, TradeNetwork, TradeRecord,
};

/// Pipeline stages in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Backbone,
    Firms,
    Topics,
    Regress,
    Extrapolate,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Backbone,
        Stage::Firms,
        Stage::Topics,
        Stage::Regress,
        Stage::Extrapolate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Backbone => "backbone",
            Stage::Firms => "firms",
            Stage::Topics => "topics",
            Stage::Regress => "regress",
            Stage::Extrapolate => "extrapolate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum StageStatus {
    #[serde(rename = "completed")]
    Completed,
    #[serde(rename = "not run")]
    NotRun,
    #[serde(rename = "failed")]
    Failed,
}

impl StageStatus {
    pub fn is_failure(&self) -> bool {
        matches!(self, StageStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageReport {
    pub stage: Stage,
    pub status: StageStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub manifest: Manifest,
}

impl RunReport {
    pub fn succeeded(&self) -> bool {
        self.manifest.complete
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageReport> {
        self.manifest.stages.iter().find(|s| s.stage == stage)
    }
}

/// Intermediate results handed from stage to stage.
#[derive(Default)]
struct State {
    records: Option<Vec<TradeRecord>>,
    networks: Vec<TradeNetwork>,
    population: Option<FirmPopulation>,
    fit: Option<RegressionFit>,
}

struct Runner<'a> {
    cfg: &'a PipelineConfig,
    formats: Vec<Format>,
    out: ArtifactWriter,
    state: State,
}

/// Run `targets` (and whatever they depend on) as configured.
///
/// Returns `Err` only for configuration problems detected before any stage
/// starts; stage failures are recorded in the report and the manifest.
pub fn run(cfg: &PipelineConfig, targets: &[Stage]) -> Result<RunReport> {
    cfg.validate()?;
    cfg.check_paths()?;
    let formats = cfg.table_formats()?;
    let plan = plan_stages(cfg, targets)?;
    let master = cfg.seed;
    if plan
        .iter()
        .any(|(s, runnable)| runnable.is_ok() && is_stochastic(*s))
        && master.is_none()
    {
        return Err(Error::Config(
            "a seed is required for the topic and extrapolation stages".into(),
        ));
    }

    let out = ArtifactWriter::new(&cfg.output_dir);
    out.clear_previous()?;
    let mut runner = Runner {
        cfg,
        formats,
        out,
        state: State::default(),
    };
    let mut reports = Vec::new();
    let mut failed: Option<Stage> = None;
    for (stage, runnable) in plan {
        let report = if let Some(f) = failed {
            StageReport {
                stage,
                status: StageStatus::NotRun,
                detail: format!("aborted after {f} failed"),
            }
        } else if let Err(reason) = runnable {
            log::info!("stage {stage}: not run ({reason})");
            StageReport {
                stage,
                status: StageStatus::NotRun,
                detail: reason,
            }
        } else {
            let started = Instant::now();
            log::info!("stage {stage}: started");
            match runner.run_stage(stage, master.unwrap_or_default()) {
                Ok(detail) => {
                    log::info!("stage {stage}: finished in {:.2?}", started.elapsed());
                    StageReport {
                        stage,
                        status: StageStatus::Completed,
                        detail,
                    }
                }
                Err(e) => {
                    log::error!("stage {stage}: failed after {:.2?}: {e}", started.elapsed());
                    failed = Some(stage);
                    StageReport {
                        stage,
                        status: StageStatus::Failed,
                        detail: e.to_string(),
                    }
                }
            }
        };
        reports.push(report);
    }
    let manifest = runner.out.finish(master, reports)?;
    Ok(RunReport { manifest })
}

fn is_stochastic(stage: Stage) -> bool {
    matches!(stage, Stage::Topics | Stage::Extrapolate)
}

fn prerequisites(cfg: &PipelineConfig, stage: Stage) -> Vec<Stage> {
    match stage {
        Stage::Ingest | Stage::Firms => vec![],
        Stage::Backbone => vec![Stage::Ingest],
        Stage::Topics => vec![Stage::Firms],
        Stage::Regress if cfg.inputs.observations.is_some() => vec![],
        Stage::Regress => vec![Stage::Ingest, Stage::Firms],
        Stage::Extrapolate => {
            let mut v = vec![Stage::Firms];
            if matches!(cfg.extrapolation.fixed_coefficient(), Ok(None)) {
                v.push(Stage::Regress);
            }
            v
        }
    }
}

fn missing_inputs(cfg: &PipelineConfig, stage: Stage) -> Option<&'static str> {
    let i = &cfg.inputs;
    match stage {
        Stage::Ingest | Stage::Backbone if i.trade.is_none() => Some("no trade input configured"),
        Stage::Firms | Stage::Topics if i.registry.is_none() => {
            Some("no registry input configured")
        }
        Stage::Regress if i.observations.is_none() && i.capacity.is_none() => {
            Some("neither observations nor capacity input configured")
        }
        Stage::Extrapolate if i.plan.is_none() => Some("no capacity plan input configured"),
        _ => None,
    }
}

/// Stages to attempt, each either runnable or carrying the reason it is not.
///
/// A stage the caller asked for explicitly must be runnable; stages pulled in
/// by a full run are skipped when their inputs are absent.
fn plan_stages(
    cfg: &PipelineConfig,
    targets: &[Stage],
) -> Result<Vec<(Stage, std::result::Result<(), String>)>> {
    let full_run = Stage::ALL.iter().all(|s| targets.contains(s));
    let mut wanted: Vec<Stage> = Vec::new();
    let mut stack: Vec<Stage> = targets.to_vec();
    while let Some(s) = stack.pop() {
        if !wanted.contains(&s) {
            wanted.push(s);
            stack.extend(prerequisites(cfg, s));
        }
    }
    wanted.sort();

    let mut runnable: BTreeMap<Stage, std::result::Result<(), String>> = BTreeMap::new();
    for &s in &wanted {
        let verdict = match missing_inputs(cfg, s) {
            Some(reason) => Err(reason.to_string()),
            None => prerequisites(cfg, s)
                .into_iter()
                .find(|p| runnable.get(p).map_or(true, |r| r.is_err()))
                .map_or(Ok(()), |p| {
                    Err(format!("requires stage {p}, which cannot run"))
                }),
        };
        if let Err(reason) = &verdict {
            if !full_run && targets.contains(&s) {
                return Err(Error::Config(format!("stage {s} cannot run: {reason}")));
            }
        }
        runnable.insert(s, verdict);
    }
    Ok(runnable.into_iter().collect())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

impl Runner<'_> {
    fn run_stage(&mut self, stage: Stage, master: u64) -> Result<String> {
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Backbone => self.backbone(),
            Stage::Firms => self.firms(),
            Stage::Topics => self.topics(seed::derive(master, &[seed::tag("topics")])),
            Stage::Regress => self.regress(),
            Stage::Extrapolate => {
                self.extrapolate(seed::derive(master, &[seed::tag("extrapolate")]))
            }
        }
    }

    fn write_table(&mut self, stem: &str, table: &Table) -> Result<()> {
        for f in self.formats.clone() {
            let text = export::export(Artifact::Table(table), f)?;
            self.out
                .write(&format!("{stem}.{}", f.extension()), &text)?;
        }
        Ok(())
    }

    fn write_json(&mut self, path: &str, value: &serde_json::Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).expect("JSON value serialises");
        s.push('\n');
        self.out.write(path, &s)
    }

    fn ingest(&mut self) -> Result<String> {
        let cfg = &self.cfg.trade;
        let path = self.cfg.inputs.trade.as_ref().expect("checked by planner");
        let (records, report) = parse_trade_records(open(path)?, &cfg.schema)?;
        let records = filter_commodity(&records, &cfg.commodity_prefix);
        log::info!(
            "{} trade rows read, {} kept for prefix {}, {} skipped",
            report.rows_read,
            records.len(),
            cfg.commodity_prefix,
            report.skipped_count()
        );
        let skipped: serde_json::Map<String, serde_json::Value> = [
            ("missing_quantity", SkipReason::MissingQuantity),
            ("negative_quantity", SkipReason::NegativeQuantity),
            ("malformed", SkipReason::Malformed),
            ("self_loop", SkipReason::SelfLoop),
            ("year_out_of_range", SkipReason::YearOutOfRange),
        ]
        .into_iter()
        .map(|(k, r)| (k.to_string(), json!(report.count(r))))
        .collect();
        self.write_json(
            "trade/parse_report.json",
            &json!({
                "rows_read": report.rows_read,
                "records_parsed": report.records,
                "records_in_commodity": records.len(),
                "commodity_prefix": cfg.commodity_prefix,
                "skipped": skipped,
                "unknown_country_codes": report.unknown_codes,
            }),
        )?;

        let mut networks = Vec::new();
        for &w in &cfg.windows {
            let net = build_network(&records, w);
            let totals = country_totals(&net);
            let imports: f64 = totals.iter().map(|t| t.imports).sum();
            let exports: f64 = totals.iter().map(|t| t.exports).sum();
            let scale = net.total_weight().max(1.0);
            if (imports - exports).abs() > 1e-9 * scale
                || (imports - net.total_weight()).abs() > 1e-9 * scale
            {
                return Err(Error::Domain(format!(
                    "flow conservation violated in window {w}: imports {imports}, exports {exports}"
                )));
            }
            self.write_network(&format!("trade/network_{w}"), &net, false)?;
            self.write_table(
                &format!("trade/country_totals_{w}"),
                &export::country_stats_table(&totals),
            )?;
            networks.push(net);
        }

        let years = TimeWindow::new(cfg.schema.first_year, cfg.schema.last_year)?;
        let series: Vec<_> = cfg
            .series_countries
            .iter()
            .map(|c| (c.clone(), country_time_series(&records, c, years)))
            .collect();
        self.write_table("trade/time_series", &export::time_series_table(&series))?;

        let detail = format!(
            "{} records, {} networks ({} edges in the latest window)",
            records.len(),
            networks.len(),
            networks.last().map_or(0, TradeNetwork::edge_count)
        );
        self.state.records = Some(records);
        self.state.networks = networks;
        Ok(detail)
    }

    fn write_network(&mut self, stem: &str, net: &TradeNetwork, with_alpha: bool) -> Result<()> {
        let sig = with_alpha.then(|| edge_significance(net));
        for f in self.formats.clone().into_iter().chain([Format::Dot]) {
            let text = export::export(
                Artifact::Network {
                    network: net,
                    significance: sig.as_deref(),
                },
                f,
            )?;
            self.out
                .write(&format!("{stem}.{}", f.extension()), &text)?;
        }
        Ok(())
    }

    fn backbone(&mut self) -> Result<String> {
        let params = self.cfg.backbone.params();
        let mut kept = Vec::new();
        for net in self.state.networks.clone() {
            let sig = edge_significance(&net);
            let bb = extract_backbone(&net, &params)?;
            let w = net.window;
            self.write_table(
                &format!("backbone/significance_{w}"),
                &export::significance_table(&sig),
            )?;
            // Backbone DOT edges carry the alpha values from the full network.
            let bb_sig: Vec<_> = sig
                .into_iter()
                .filter(|e| bb.contains_edge(&e.exporter, &e.importer))
                .collect();
            for f in self.formats.clone().into_iter().chain([Format::Dot]) {
                let text = export::export(
                    Artifact::Network {
                        network: &bb,
                        significance: Some(&bb_sig),
                    },
                    f,
                )?;
                self.out
                    .write(&format!("backbone/backbone_{w}.{}", f.extension()), &text)?;
            }
            kept.push(format!(
                "{w}: {}/{} edges",
                bb.edge_count(),
                net.edge_count()
            ));
        }
        Ok(format!("alpha {}; {}", params.alpha, kept.join(", ")))
    }

    fn firms(&mut self) -> Result<String> {
        let cfg = &self.cfg.firms;
        let path = self
            .cfg
            .inputs
            .registry
            .as_ref()
            .expect("checked by planner");
        let (records, report) = parse_registry(open(path)?, cfg.delimiter as u8)?;
        let pop = match_scrap_firms(&records, &cfg.rule(), &cfg.provenance)?;
        log::info!(
            "{} of {} registry firms match keyword {:?}",
            pop.len(),
            records.len(),
            cfg.keyword
        );
        self.write_table("firms/population", &export::population_table(&pop))?;
        self.write_table(
            "firms/country_aggregates",
            &export::country_aggregate_table(&country_aggregates(&pop)),
        )?;
        let naics = naics_distribution(&pop);
        self.write_table("firms/naics_shares", &export::naics_table(&naics))?;
        let corr = revenue_employee_correlation(&pop).ok();
        let employees: f64 = pop.records().filter_map(|f| f.employees).sum();
        let revenue: f64 = pop.records().filter_map(|f| f.revenue).sum();
        self.write_json(
            "firms/summary.json",
            &json!({
                "provenance": pop.provenance,
                "registry_rows": report.rows,
                "malformed_rows": report.malformed_rows.len(),
                "invalid_numbers": report.invalid_numbers,
                "matched_firms": pop.len(),
                "total_employees_persons": employees,
                "total_revenue_usd": revenue,
                "revenue_employee_correlation": corr,
            }),
        )?;
        let detail = format!("{} firms matched", pop.len());
        self.state.population = Some(pop);
        Ok(detail)
    }

    fn topics(&mut self, seed: u64) -> Result<String> {
        let cfg = &self.cfg.topics;
        let pop = self.state.population.as_ref().expect("firms stage ran");
        let mut stopwords = match &cfg.stopwords_file {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::io(p, e))?
                .lines()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect(),
            None => default_stopwords(),
        };
        stopwords.extend(cfg.extra_stopwords.iter().cloned());
        let pre = Preprocessor::new(stopwords);
        let corpus = Corpus::from_texts(
            pop.records()
                .map(|f| (f.id.clone(), f.descriptions.concatenated())),
            &pre,
        );
        let selection_opts = cfg.selection();
        let selection = select_topic_count(&corpus, &selection_opts, seed)?;
        let model = fit_lda(
            &corpus,
            selection.selected,
            &selection_opts.lda,
            seed::derive(seed, &[selection.selected as u64, 1]),
        )?;
        self.write_table("topics/perplexity", &export::perplexity_table(&selection))?;
        self.write_table("topics/topic_word", &export::topic_word_table(&model))?;
        self.write_table(
            "topics/doc_topic",
            &export::doc_topic_table(&model, &corpus.doc_ids),
        )?;
        self.write_table(
            "topics/top_terms",
            &export::top_terms_table(&model, cfg.top_terms)?,
        )?;
        self.write_json(
            "topics/summary.json",
            &json!({
                "documents": corpus.len(),
                "dropped_empty_documents": corpus.dropped_empty,
                "vocabulary_size": corpus.vocabulary.len(),
                "tokens": corpus.token_count(),
                "selected_topics": selection.selected,
                "holdout_documents": selection.holdout.len(),
                "topic_contributions": model.topic_contributions(),
            }),
        )?;
        Ok(format!(
            "{} documents, K = {} selected from {:?}",
            corpus.len(),
            selection.selected,
            cfg.grid
        ))
    }

    fn observations(&self) -> Result<Vec<CountryObservation>> {
        if let Some(p) = &self.cfg.inputs.observations {
            return parse_observations(open(p)?);
        }
        let cap = self
            .cfg
            .inputs
            .capacity
            .as_ref()
            .expect("checked by planner");
        let mut obs = parse_observations(open(cap)?)?;
        let window = self.cfg.regression.trade_window;
        let net = match self.state.networks.iter().find(|n| n.window == window) {
            Some(n) => n.clone(),
            None => build_network(self.state.records.as_deref().unwrap_or_default(), window),
        };
        let trade: BTreeMap<String, (f64, f64)> = country_totals(&net)
            .into_iter()
            .map(|s| (s.country, (s.exports, s.imports)))
            .collect();
        let pop = self.state.population.as_ref().expect("firms stage ran");
        let firms: BTreeMap<String, (f64, f64, f64)> = country_aggregates(pop)
            .into_iter()
            .map(|a| (a.country, (a.firms as f64, a.employees, a.revenue)))
            .collect();
        for o in &mut obs {
            if !trade.contains_key(&o.country) {
                log::warn!(
                    "{}: no trade in {window}; trade regressors set to 0",
                    o.country
                );
            }
            if !firms.contains_key(&o.country) {
                log::warn!("{}: no matched firms; firm regressors set to 0", o.country);
            }
            let (exports, imports) = trade.get(&o.country).copied().unwrap_or_default();
            let (n, emp, rev) = firms.get(&o.country).copied().unwrap_or_default();
            o.exports = Some(exports);
            o.imports = Some(imports);
            o.n_firms = Some(n);
            o.employees = Some(emp);
            o.revenue = Some(rev);
        }
        Ok(obs)
    }

    fn regress(&mut self) -> Result<String> {
        let cfg = &self.cfg.regression;
        let obs = self.observations()?;
        let mut table = Table::new([
            "country",
            "eaf_capacity_kt",
            "exports_t",
            "imports_t",
            "n_firms",
            "employees",
            "revenue_usd",
            "bof_capacity_kt",
        ]);
        for o in &obs {
            let mut row = vec![o.country.as_str().into(), o.eaf_capacity.into()];
            row.extend(Regressor::ALL.iter().map(|&r| o.value(r).into()));
            table.push(row);
        }
        self.write_table("regression/observations", &table)?;

        let fit = fit_no_intercept(&obs, &cfg.regressors, cfg.covariance)?;
        self.write_table("regression/coefficients", &export::coefficient_table(&fit))?;
        self.write_table(
            "regression/diagnostics",
            &export::fit_diagnostics_table(&fit),
        )?;
        self.write_table("regression/predicted", &export::predicted_table(&fit, &obs))?;
        let detail = format!(
            "{} observations, {} regressors, adjusted R2 {:.4}",
            fit.n_observations, fit.n_regressors, fit.adjusted_r2
        );
        self.state.fit = Some(fit);
        Ok(detail)
    }

    fn extrapolate(&mut self, seed: u64) -> Result<String> {
        let cfg = &self.cfg.extrapolation;
        let coef = match cfg.fixed_coefficient()? {
            Some(c) => c,
            None => {
                let fit = self.state.fit.as_ref().expect("regress stage ran");
                let c = fit
                    .coefficient(&Regressor::Firms.to_string())
                    .expect("validated: firms regressor selected");
                FirmCoefficient {
                    estimate: c.estimate,
                    sd: c.std_error,
                }
            }
        };
        let path = self.cfg.inputs.plan.as_ref().expect("checked by planner");
        let plans = parse_capacity_plan(open(path)?)?;
        let pop = self.state.population.as_ref().expect("firms stage ran");
        let mut pool = pop.restricted_to(&cfg.pool_countries);
        if pool.is_empty() {
            log::warn!("no firms in the pool countries; using the whole population");
            pool = pop.clone();
        }
        let dists = FirmDistributions::from_population(&pool, cfg.min_country_firms)?;
        let opts = ExtrapolationOptions {
            coefficient_draws: cfg.coefficient_draws,
            population_iterations: cfg.population_iterations,
            sampling: cfg.sampling,
            sharing: cfg.sharing,
        };
        let results = extrapolate(&plans, coef, &dists, &opts, seed)?;
        let totals = aggregate_totals(&results)?;
        self.write_table(
            "extrapolation/table",
            &export::extrapolation_table(&results, &totals),
        )?;
        self.write_json(
            "extrapolation/coefficient.json",
            &json!({
                "estimate_kt_per_year_per_firm": coef.estimate,
                "sd": coef.sd,
                "source": cfg.coefficient_source,
            }),
        )?;
        Ok(format!(
            "{} countries, {} additional companies (SD {:.1})",
            results.len(),
            totals.companies.rounded,
            totals.companies.sd
        ))
    }
}
