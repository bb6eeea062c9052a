//! Output tables and their serialisations.
//!
//! Every artifact is first turned into a [`Table`] (fixed column names, units
//! in the header) and then written as delimited text or as a JSON array with
//! one object per row. Networks can also be written as Graphviz DOT.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde_json::{Map, Value};

use crate::backbone::EdgeSignificance;
use crate::error::{Error, Result};
use crate::extrapolate::{ExtrapolationResult, ExtrapolationTotals};
use crate::firms::{CountryAggregate, FirmPopulation, NaicsShares};
use crate::regression::{CountryObservation, RegressionFit};
use crate::topics::{top_terms, LdaModel, TopicSelection};
use crate::trade::{CountryTradeStats, TradeNetwork, YearFlows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Json,
    Dot,
}

impl Format {
    pub const SUPPORTED: &'static str = "csv, json, dot";

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Dot => "dot",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "dot" => Ok(Format::Dot),
            _ => Err(Error::UnknownFormat {
                requested: s.to_string(),
                supported: Format::SUPPORTED.to_string(),
            }),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
    Empty,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::Int(i64::from(v))
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) if v.is_nan() => "NaN".into(),
            Cell::Num(v) => v.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Int(i) => Value::from(*i),
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Empty => Value::Null,
        }
    }
}

/// Named columns and rows of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, delimiter: u8) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("cells are UTF-8"))
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .cloned()
                    .zip(row.iter().map(Cell::json))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&rows).expect("values serialise");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(b','),
            Format::Json => Ok(self.to_json()),
            Format::Dot => Err(Error::UnknownFormat {
                requested: "dot".into(),
                supported: "csv, json (dot applies to networks only)".into(),
            }),
        }
    }
}

/// Something the pipeline can write to disk.
#[derive(Debug, Clone, Copy)]
pub enum Artifact<'a> {
    Table(&'a Table),
    Network {
        network: &'a TradeNetwork,
        significance: Option<&'a [EdgeSignificance]>,
    },
}

/// Render `artifact` in `format`.
pub fn export(artifact: Artifact<'_>, format: Format) -> Result<String> {
    match artifact {
        Artifact::Table(t) => t.render(format),
        Artifact::Network {
            network,
            significance,
        } => match format {
            Format::Dot => Ok(network_dot(network, significance)),
            _ => network_table(network).render(format),
        },
    }
}

pub fn network_table(network: &TradeNetwork) -> Table {
    let mut t = Table::new(["exporter", "importer", "tonnes_per_year"]);
    for (a, b, w) in network.edges() {
        t.push(vec![a.into(), b.into(), w.into()]);
    }
    t
}

/// DOT digraph, one edge per line with its weight and, when known, the
/// smaller of its two endpoint significance values.
pub fn network_dot(network: &TradeNetwork, significance: Option<&[EdgeSignificance]>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"scrap_trade_{}\" {{", network.window);
    for node in network.nodes() {
        let _ = writeln!(out, "  \"{node}\";");
    }
    let alpha_of = |a: &str, b: &str| {
        significance.and_then(|s| {
            s.iter()
                .find(|e| e.exporter == a && e.importer == b)
                .map(EdgeSignificance::min_alpha)
        })
    };
    for (a, b, w) in network.edges() {
        match alpha_of(a, b) {
            Some(alpha) => {
                let _ = writeln!(
                    out,
                    "  \"{a}\" -> \"{b}\" [weight={w}, tonnes_per_year={w}, alpha={alpha:e}];"
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "  \"{a}\" -> \"{b}\" [weight={w}, tonnes_per_year={w}];"
                );
            }
        }
    }
    out.push_str("}\n");
    out
}

pub fn significance_table(sig: &[EdgeSignificance]) -> Table {
    let mut t = Table::new([
        "exporter",
        "importer",
        "tonnes_per_year",
        "alpha_exporter",
        "alpha_importer",
        "alpha_min",
    ]);
    for e in sig {
        t.push(vec![
            e.exporter.as_str().into(),
            e.importer.as_str().into(),
            e.weight.into(),
            e.alpha_out.into(),
            e.alpha_in.into(),
            e.min_alpha().into(),
        ]);
    }
    t
}

pub fn country_stats_table(stats: &[CountryTradeStats]) -> Table {
    let mut t = Table::new([
        "country",
        "imports_t_per_year",
        "exports_t_per_year",
        "net_exports_t_per_year",
    ]);
    for s in stats {
        t.push(vec![
            s.country.as_str().into(),
            s.imports.into(),
            s.exports.into(),
            s.net.into(),
        ]);
    }
    t
}

pub fn time_series_table(series: &[(String, Vec<YearFlows>)]) -> Table {
    let mut t = Table::new(["country", "year", "imports_t", "exports_t"]);
    for (country, points) in series {
        for p in points {
            t.push(vec![
                country.as_str().into(),
                p.year.into(),
                p.imports.into(),
                p.exports.into(),
            ]);
        }
    }
    t
}

/// Registry columns plus the description fields the keyword matched in.
pub fn population_table(pop: &FirmPopulation) -> Table {
    let mut t = Table::new([
        "id",
        "name",
        "country",
        "naics4",
        "revenue_usd",
        "employees",
        "full_overview",
        "main_products_and_services",
        "main_activity",
        "primary_business_line",
        "matched_fields",
    ]);
    for m in &pop.firms {
        let f = &m.firm;
        let matched: Vec<&str> = m.matched_fields.iter().map(|d| d.column()).collect();
        t.push(vec![
            f.id.as_str().into(),
            f.name.as_str().into(),
            f.country.as_str().into(),
            f.naics4.clone().into(),
            f.revenue.into(),
            f.employees.into(),
            f.descriptions.full_overview.as_str().into(),
            f.descriptions.main_products_and_services.as_str().into(),
            f.descriptions.main_activity.as_str().into(),
            f.descriptions.primary_business_line.as_str().into(),
            matched.join(";").into(),
        ]);
    }
    t
}

pub fn country_aggregate_table(aggs: &[CountryAggregate]) -> Table {
    let mut t = Table::new([
        "country",
        "firms",
        "employees_persons",
        "revenue_usd",
        "firms_reporting_employees",
        "firms_reporting_revenue",
    ]);
    for a in aggs {
        t.push(vec![
            a.country.as_str().into(),
            a.firms.into(),
            a.employees.into(),
            a.revenue.into(),
            a.firms_with_employees.into(),
            a.firms_with_revenue.into(),
        ]);
    }
    t
}

/// Shares among coded firms, then a `missing` row with the share of all
/// firms lacking a code.
pub fn naics_table(shares: &NaicsShares) -> Table {
    let mut t = Table::new(["naics4", "share"]);
    for (code, s) in &shares.shares {
        t.push(vec![code.as_str().into(), (*s).into()]);
    }
    t.push(vec!["missing".into(), shares.missing_share.into()]);
    t
}

pub fn topic_word_table(model: &LdaModel) -> Table {
    let mut t = Table::new(["token", "topic", "probability"]);
    for k in 0..model.num_topics() {
        for (token, p) in model.vocabulary().iter().zip(model.topic_word_row(k)) {
            t.push(vec![token.as_str().into(), k.into(), (*p).into()]);
        }
    }
    t
}

pub fn doc_topic_table(model: &LdaModel, doc_ids: &[String]) -> Table {
    let mut cols = vec!["document".to_string()];
    cols.extend((0..model.num_topics()).map(|k| format!("topic_{k}")));
    let mut t = Table::new(cols);
    for (d, id) in doc_ids.iter().enumerate().take(model.num_docs()) {
        let mut row: Vec<Cell> = vec![id.as_str().into()];
        row.extend(model.doc_topic_row(d).iter().map(|&p| Cell::Num(p)));
        t.push(row);
    }
    t
}

/// Term/weight lists per topic, ready for word clouds, with each topic's
/// share of corpus tokens.
pub fn top_terms_table(model: &LdaModel, n: usize) -> Result<Table> {
    let contributions = model.topic_contributions();
    let mut t = Table::new(["topic", "topic_share", "rank", "term", "weight"]);
    for (k, &share) in contributions.iter().enumerate() {
        for (rank, (term, w)) in top_terms(model, k, n)?.into_iter().enumerate() {
            t.push(vec![
                k.into(),
                share.into(),
                (rank + 1).into(),
                term.into(),
                w.into(),
            ]);
        }
    }
    Ok(t)
}

pub fn perplexity_table(sel: &TopicSelection) -> Table {
    let mut t = Table::new(["topics", "held_out_perplexity", "selected"]);
    for &(k, p) in &sel.curve {
        t.push(vec![
            k.into(),
            p.into(),
            Cell::Int(i64::from(k == sel.selected)),
        ]);
    }
    t
}

/// Variable, estimate, SD, p-value; the label is the regressor name.
pub fn coefficient_table(fit: &RegressionFit) -> Table {
    let mut t = Table::new(["variable", "estimate", "sd", "p_value"]);
    for c in &fit.coefficients {
        t.push(vec![
            c.name.as_str().into(),
            c.estimate.into(),
            c.std_error.into(),
            c.p_value.into(),
        ]);
    }
    t
}

pub fn fit_diagnostics_table(fit: &RegressionFit) -> Table {
    let mut t = Table::new(["statistic", "value"]);
    t.push(vec!["n_observations".into(), fit.n_observations.into()]);
    t.push(vec!["n_regressors".into(), fit.n_regressors.into()]);
    t.push(vec!["r2_uncentered".into(), fit.r2.into()]);
    t.push(vec!["adjusted_r2".into(), fit.adjusted_r2.into()]);
    t.push(vec!["residual_sd_kt_per_year".into(), fit.sigma.into()]);
    t.push(vec![
        "covariance".into(),
        format!("{:?}", fit.covariance).to_lowercase().into(),
    ]);
    t
}

pub fn predicted_table(fit: &RegressionFit, observations: &[CountryObservation]) -> Table {
    let mut t = Table::new([
        "country",
        "actual_eaf_kt_per_year",
        "predicted_eaf_kt_per_year",
        "residual_kt_per_year",
    ]);
    for ((o, f), r) in observations.iter().zip(&fit.fitted).zip(&fit.residuals) {
        t.push(vec![
            o.country.as_str().into(),
            o.eaf_capacity.into(),
            (*f).into(),
            (*r).into(),
        ]);
    }
    t
}

/// Per-country rows followed by a `TOTAL` row.
pub fn extrapolation_table(results: &[ExtrapolationResult], totals: &ExtrapolationTotals) -> Table {
    let mut t = Table::new([
        "country",
        "planned_eaf_kt_per_year",
        "additional_companies",
        "additional_companies_sd",
        "additional_companies_point",
        "additional_companies_mc_mean",
        "revenue_median_usd",
        "revenue_q25_usd",
        "revenue_q75_usd",
        "employees_median_persons",
        "employees_q25_persons",
        "employees_q75_persons",
    ]);
    let row = |country: &str,
               planned: f64,
               c: &crate::extrapolate::CompanyEstimate,
               rev: &crate::extrapolate::Quartiles,
               emp: &crate::extrapolate::Quartiles| {
        vec![
            country.into(),
            planned.into(),
            c.rounded.into(),
            c.sd.into(),
            c.point.into(),
            c.mean.into(),
            rev.median.into(),
            rev.q25.into(),
            rev.q75.into(),
            emp.median.into(),
            emp.q25.into(),
            emp.q75.into(),
        ]
    };
    for r in results {
        t.push(row(
            &r.country,
            r.planned_eaf,
            &r.companies,
            &r.revenue,
            &r.employees,
        ));
    }
    t.push(row(
        "TOTAL",
        totals.planned_eaf,
        &totals.companies,
        &totals.revenue,
        &totals.employees,
    ));
    t
}
