//! Bilateral trade ingestion and time-windowed network aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::countries;
use crate::error::{Error, Result};

/// HS heading for ferrous waste and scrap.
pub const SCRAP_HS_PREFIX: &str = "7204";

/// One row of a bilateral trade file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub year: i32,
    pub exporter: String,
    pub importer: String,
    pub hs_code: String,
    /// Metric tonnes.
    pub quantity: f64,
    /// Thousand USD. Carried for completeness, never aggregated.
    pub value: Option<f64>,
}

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TimeWindow {
    start_year: i32,
    end_year: i32,
}

impl TimeWindow {
    pub fn new(start_year: i32, end_year: i32) -> Result<Self> {
        if start_year > end_year {
            return Err(Error::Domain(format!(
                "time window start {start_year} is after end {end_year}"
            )));
        }
        Ok(TimeWindow {
            start_year,
            end_year,
        })
    }

    /// 2007-2011, 2012-2016 and 2017-2021.
    pub fn defaults() -> Vec<TimeWindow> {
        vec![
            TimeWindow::new(2007, 2011).unwrap(),
            TimeWindow::new(2012, 2016).unwrap(),
            TimeWindow::new(2017, 2021).unwrap(),
        ]
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    pub fn end_year(&self) -> i32 {
        self.end_year
    }

    /// Number of calendar years covered; the averaging divisor.
    pub fn len(&self) -> u32 {
        (self.end_year - self.start_year + 1) as u32
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start_year..=self.end_year).contains(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.start_year..=self.end_year
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start_year, self.end_year)
    }
}

impl FromStr for TimeWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("time window {s:?} is not of the form YYYY-YYYY"));
        let (a, b) = s.trim().split_once('-').ok_or_else(bad)?;
        let a = a.trim().parse().map_err(|_| bad())?;
        let b = b.trim().parse().map_err(|_| bad())?;
        TimeWindow::new(a, b)
    }
}

impl TryFrom<String> for TimeWindow {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TimeWindow> for String {
    fn from(w: TimeWindow) -> String {
        w.to_string()
    }
}

/// Column mapping and parse options for delimited trade files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TradeSchema {
    pub year: String,
    pub exporter: String,
    pub importer: String,
    pub product: String,
    pub value: String,
    pub quantity: String,
    pub delimiter: char,
    /// Rows outside this inclusive year range are skipped.
    pub first_year: i32,
    pub last_year: i32,
}

impl Default for TradeSchema {
    fn default() -> Self {
        TradeSchema {
            year: "t".into(),
            exporter: "i".into(),
            importer: "j".into(),
            product: "k".into(),
            value: "v".into(),
            quantity: "q".into(),
            delimiter: ',',
            first_year: 2007,
            last_year: 2021,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    MissingQuantity,
    NegativeQuantity,
    Malformed,
    SelfLoop,
    YearOutOfRange,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedRow {
    /// 1-based line number in the source, header included.
    pub line: u64,
    pub reason: SkipReason,
}

/// What the parser dropped and why.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ParseReport {
    pub rows_read: u64,
    pub records: u64,
    pub skipped: Vec<SkippedRow>,
    pub unknown_codes: BTreeSet<String>,
}

impl ParseReport {
    pub fn skipped_count(&self) -> usize {
        self.skipped.len()
    }

    pub fn count(&self, reason: SkipReason) -> usize {
        self.skipped.iter().filter(|s| s.reason == reason).count()
    }
}

/// Parse a delimited trade file with a header row.
///
/// Unparseable rows are recorded in the report and skipped; only a missing
/// required column is fatal.
pub fn parse_trade_records<R: Read>(
    source: R,
    schema: &TradeSchema,
) -> Result<(Vec<TradeRecord>, ParseReport)> {
    if !schema.delimiter.is_ascii() {
        return Err(Error::Schema(format!(
            "delimiter {:?} is not a single ASCII character",
            schema.delimiter
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("required column {name:?} not found in header")))
    };
    let cols = [
        column(&schema.year)?,
        column(&schema.exporter)?,
        column(&schema.importer)?,
        column(&schema.product)?,
        column(&schema.value)?,
        column(&schema.quantity)?,
    ];

    let mut report = ParseReport::default();
    let mut records = Vec::new();
    let mut row = csv::StringRecord::new();
    loop {
        let more = match reader.read_record(&mut row) {
            Ok(more) => more,
            Err(err) => {
                // Invalid UTF-8 and similar per-row faults are not fatal.
                let line = err.position().map_or(0, |p| p.line());
                if matches!(err.kind(), csv::ErrorKind::Io(_)) {
                    return Err(err.into());
                }
                report.rows_read += 1;
                report.skipped.push(SkippedRow {
                    line,
                    reason: SkipReason::Malformed,
                });
                continue;
            }
        };
        if !more {
            break;
        }
        report.rows_read += 1;
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, cols, schema, &mut report.unknown_codes) {
            Ok(rec) => records.push(rec),
            Err(reason) => report.skipped.push(SkippedRow { line, reason }),
        }
    }
    report.records = records.len() as u64;
    for code in &report.unknown_codes {
        log::warn!("country code {code:?} not in the bundled table; kept verbatim");
    }
    Ok((records, report))
}

fn parse_row(
    row: &csv::StringRecord,
    [year, exp, imp, prod, val, qty]: [usize; 6],
    schema: &TradeSchema,
    unknown: &mut BTreeSet<String>,
) -> std::result::Result<TradeRecord, SkipReason> {
    let field = |i: usize| row.get(i).ok_or(SkipReason::Malformed);

    let quantity = field(qty)?;
    let quantity: f64 = match quantity.parse() {
        Ok(q) if f64::is_finite(q) => q,
        _ => return Err(SkipReason::MissingQuantity),
    };
    if quantity < 0.0 {
        return Err(SkipReason::NegativeQuantity);
    }
    let year: i32 = field(year)?.parse().map_err(|_| SkipReason::Malformed)?;
    if year < schema.first_year || year > schema.last_year {
        return Err(SkipReason::YearOutOfRange);
    }
    let mut code = |raw: &str| {
        if raw.is_empty() {
            return Err(SkipReason::Malformed);
        }
        let n = countries::normalize(raw);
        if !n.is_known() {
            unknown.insert(n.code().to_string());
        }
        Ok(n.into_code())
    };
    let exporter = code(field(exp)?)?;
    let importer = code(field(imp)?)?;
    if exporter == importer {
        return Err(SkipReason::SelfLoop);
    }
    let hs_code = normalize_hs(field(prod)?).ok_or(SkipReason::Malformed)?;
    let value = field(val)?
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && *v >= 0.0);

    Ok(TradeRecord {
        year,
        exporter,
        importer,
        hs_code,
        quantity,
        value,
    })
}

/// Numeric 5-digit product codes lost their leading zero on export; restore it.
fn normalize_hs(raw: &str) -> Option<String> {
    if raw.is_empty() {
        return None;
    }
    if raw.len() == 5 && raw.bytes().all(|b| b.is_ascii_digit()) {
        Some(format!("0{raw}"))
    } else {
        Some(raw.to_string())
    }
}

/// Records whose product code starts with `prefix`.
pub fn filter_commodity(records: &[TradeRecord], prefix: &str) -> Vec<TradeRecord> {
    records
        .iter()
        .filter(|r| r.hs_code.starts_with(prefix))
        .cloned()
        .collect()
}

/// Directed, weighted country graph of average annual flows in t/yr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeNetwork {
    pub window: TimeWindow,
    edges: BTreeMap<(String, String), f64>,
}

impl TradeNetwork {
    pub fn empty(window: TimeWindow) -> Self {
        TradeNetwork {
            window,
            edges: BTreeMap::new(),
        }
    }

    /// Build from explicit edges. Self-loops and non-positive weights are
    /// dropped; repeated pairs are summed.
    pub fn from_edges<I, S>(window: TimeWindow, edges: I) -> Self
    where
        I: IntoIterator<Item = (S, S, f64)>,
        S: Into<String>,
    {
        let mut map: BTreeMap<(String, String), f64> = BTreeMap::new();
        for (a, b, w) in edges {
            let (a, b) = (a.into(), b.into());
            if a == b {
                continue;
            }
            *map.entry((a, b)).or_insert(0.0) += w;
        }
        map.retain(|_, w| *w > 0.0 && w.is_finite());
        TradeNetwork { window, edges: map }
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.edges
            .iter()
            .map(|((a, b), w)| (a.as_str(), b.as_str(), *w))
    }

    pub fn weight(&self, exporter: &str, importer: &str) -> Option<f64> {
        self.edges
            .get(&(exporter.to_string(), importer.to_string()))
            .copied()
    }

    pub fn contains_edge(&self, exporter: &str, importer: &str) -> bool {
        self.weight(exporter, importer).is_some()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Every country appearing on an edge, sorted.
    pub fn nodes(&self) -> BTreeSet<&str> {
        self.edges
            .keys()
            .flat_map(|(a, b)| [a.as_str(), b.as_str()])
            .collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.values().sum()
    }

    /// Keep only the edges for which `keep` returns true.
    pub fn retain(&mut self, mut keep: impl FnMut(&str, &str, f64) -> bool) {
        self.edges.retain(|(a, b), w| keep(a, b, *w));
    }

    /// Out-strength and out-degree per exporter.
    pub fn out_strengths(&self) -> BTreeMap<&str, (f64, usize)> {
        let mut out: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for (a, _, w) in self.edges() {
            let e = out.entry(a).or_default();
            e.0 += w;
            e.1 += 1;
        }
        out
    }

    /// In-strength and in-degree per importer.
    pub fn in_strengths(&self) -> BTreeMap<&str, (f64, usize)> {
        let mut inn: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for (_, b, w) in self.edges() {
            let e = inn.entry(b).or_default();
            e.0 += w;
            e.1 += 1;
        }
        inn
    }
}

/// Average annual flow per exporter-importer pair over `window`.
///
/// Years without a record count as zero; the divisor is always the window
/// length. Records sharing (year, exporter, importer, product) are summed.
pub fn build_network(records: &[TradeRecord], window: TimeWindow) -> TradeNetwork {
    let mut totals: BTreeMap<(String, String), f64> = BTreeMap::new();
    for r in records.iter().filter(|r| window.contains(r.year)) {
        if r.exporter == r.importer {
            continue;
        }
        *totals
            .entry((r.exporter.clone(), r.importer.clone()))
            .or_insert(0.0) += r.quantity;
    }
    let years = f64::from(window.len());
    totals.retain(|_, total| *total > 0.0);
    for total in totals.values_mut() {
        *total /= years;
    }
    TradeNetwork {
        window,
        edges: totals,
    }
}

/// Imports, exports and net position of one country in t/yr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryTradeStats {
    pub country: String,
    pub imports: f64,
    pub exports: f64,
    /// exports - imports; positive for net exporters.
    pub net: f64,
}

/// Per-node in/out strength, sorted by country code.
pub fn country_totals(network: &TradeNetwork) -> Vec<CountryTradeStats> {
    let mut acc: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for (a, b, w) in network.edges() {
        acc.entry(a).or_default().1 += w;
        acc.entry(b).or_default().0 += w;
    }
    acc.into_iter()
        .map(|(country, (imports, exports))| CountryTradeStats {
            country: country.to_string(),
            imports,
            exports,
            net: exports - imports,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearFlows {
    pub year: i32,
    pub imports: f64,
    pub exports: f64,
}

/// Total inbound and outbound tonnes for `country` in each year of `years`.
///
/// Unknown countries produce an all-zero series.
pub fn country_time_series(
    records: &[TradeRecord],
    country: &str,
    years: TimeWindow,
) -> Vec<YearFlows> {
    let country = countries::normalize(country).into_code();
    let mut series: Vec<YearFlows> = years
        .years()
        .map(|year| YearFlows {
            year,
            imports: 0.0,
            exports: 0.0,
        })
        .collect();
    for r in records.iter().filter(|r| years.contains(r.year)) {
        if r.exporter == r.importer {
            continue;
        }
        let slot = &mut series[(r.year - years.start_year()) as usize];
        if r.importer == country {
            slot.imports += r.quantity;
        }
        if r.exporter == country {
            slot.exports += r.quantity;
        }
    }
    series
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "t,i,j,k,v,q\n";

    fn rec(year: i32, a: &str, b: &str, code: &str, q: f64) -> TradeRecord {
        TradeRecord {
            year,
            exporter: a.into(),
            importer: b.into(),
            hs_code: code.into(),
            quantity: q,
            value: None,
        }
    }

    fn parse(text: &str) -> (Vec<TradeRecord>, ParseReport) {
        parse_trade_records(text.as_bytes(), &TradeSchema::default()).unwrap()
    }

    #[test]
    fn header_only_is_empty() {
        let (recs, report) = parse(HEADER);
        assert!(recs.is_empty());
        assert_eq!(report.skipped_count(), 0);
    }

    #[test]
    fn maps_fields_and_normalises_codes() {
        let (recs, _) = parse(&format!("{HEADER}2008,040,380,720410,12.5,100.0\n"));
        assert_eq!(
            recs,
            vec![TradeRecord {
                year: 2008,
                exporter: "AUT".into(),
                importer: "ITA".into(),
                hs_code: "720410".into(),
                quantity: 100.0,
                value: Some(12.5),
            }]
        );
    }

    #[test]
    fn na_quantity_is_skipped() {
        let (recs, report) = parse(&format!("{HEADER}2008,040,380,720410,12.5,NA\n"));
        assert!(recs.is_empty());
        assert_eq!(report.skipped_count(), 1);
        assert_eq!(report.count(SkipReason::MissingQuantity), 1);
        assert_eq!(report.skipped[0].line, 2);
    }

    #[test]
    fn self_loops_short_rows_and_out_of_range_years_are_skipped() {
        let text = format!(
            "{HEADER}2008,040,040,720410,1,5\n2008,040\n2030,040,380,720410,1,5\n2009,040,380,720410,,7\n"
        );
        let (recs, report) = parse(&text);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].value, None);
        assert_eq!(report.count(SkipReason::SelfLoop), 1);
        assert_eq!(report.count(SkipReason::Malformed), 1);
        assert_eq!(report.count(SkipReason::YearOutOfRange), 1);
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let err = parse_trade_records("t,i,j,k,v\n".as_bytes(), &TradeSchema::default());
        assert!(matches!(err, Err(Error::Schema(_))));
    }

    #[test]
    fn remapped_columns_and_delimiter() {
        let schema = TradeSchema {
            year: "year".into(),
            exporter: "from".into(),
            importer: "to".into(),
            product: "hs".into(),
            value: "usd".into(),
            quantity: "tonnes".into(),
            delimiter: ';',
            ..TradeSchema::default()
        };
        let text = "tonnes;hs;to;from;year;usd\n3;72042;DEU;AUT;2010;1\n";
        let (recs, _) = parse_trade_records(text.as_bytes(), &schema).unwrap();
        assert_eq!(recs[0].exporter, "AUT");
        assert_eq!(recs[0].importer, "DEU");
        assert_eq!(recs[0].hs_code, "072042");
        assert_eq!(recs[0].quantity, 3.0);
    }

    #[test]
    fn unknown_codes_are_reported() {
        let (recs, report) = parse(&format!("{HEADER}2010,040,999,720410,1,1\n"));
        assert_eq!(recs[0].importer, "999");
        assert!(report.unknown_codes.contains("999"));
    }

    #[test]
    fn commodity_prefix_filter() {
        let recs = vec![
            rec(2010, "A", "B", "720410", 1.0),
            rec(2010, "A", "B", "720421", 1.0),
            rec(2010, "A", "B", "710000", 1.0),
        ];
        assert_eq!(filter_commodity(&recs, "7204"), recs[..2].to_vec());
        assert_eq!(filter_commodity(&recs, "72"), recs[..2].to_vec());
        assert!(filter_commodity(&recs[2..], "7204").is_empty());
    }

    #[test]
    fn window_average_divides_by_full_length() {
        let w = TimeWindow::new(2007, 2011).unwrap();
        let recs = vec![
            rec(2007, "AUT", "ITA", "7204", 100.0),
            rec(2009, "AUT", "ITA", "7204", 50.0),
        ];
        let net = build_network(&recs, w);
        assert_eq!(net.weight("AUT", "ITA"), Some(30.0));
    }

    #[test]
    fn records_outside_window_are_ignored() {
        let w = TimeWindow::new(2007, 2011).unwrap();
        let net = build_network(&[rec(2015, "AUT", "ITA", "7204", 500.0)], w);
        assert!(net.is_empty());
    }

    #[test]
    fn duplicates_sum_before_averaging() {
        let w = TimeWindow::new(2010, 2010).unwrap();
        let recs = vec![
            rec(2010, "A", "B", "720410", 10.0),
            rec(2010, "A", "B", "720410", 20.0),
        ];
        let net = build_network(&recs, w);
        assert_eq!(net.edge_count(), 1);
        assert_eq!(net.weight("A", "B"), Some(30.0));
    }

    #[test]
    fn zero_flows_leave_no_edge() {
        let w = TimeWindow::new(2010, 2010).unwrap();
        let net = build_network(&[rec(2010, "A", "B", "7204", 0.0)], w);
        assert!(net.is_empty());
    }

    #[test]
    fn totals_one_edge() {
        let w = TimeWindow::new(2010, 2010).unwrap();
        let net = TradeNetwork::from_edges(w, [("A", "B", 10.0)]);
        let t = country_totals(&net);
        assert_eq!(t[0].country, "A");
        assert_eq!((t[0].imports, t[0].exports), (0.0, 10.0));
        assert_eq!((t[1].imports, t[1].exports), (10.0, 0.0));
    }

    #[test]
    fn totals_net_position() {
        let w = TimeWindow::new(2010, 2010).unwrap();
        let net = TradeNetwork::from_edges(w, [("A", "B", 10.0), ("B", "A", 4.0)]);
        let t = country_totals(&net);
        assert_eq!(t[0].net, 6.0);
        assert_eq!(t[1].net, -6.0);
    }

    #[test]
    fn time_series_single_flow() {
        let years = TimeWindow::new(2007, 2021).unwrap();
        let s = country_time_series(&[rec(2010, "A", "B", "7204", 100.0)], "B", years);
        assert_eq!(s.len(), 15);
        for p in &s {
            assert_eq!(p.exports, 0.0);
            assert_eq!(p.imports, if p.year == 2010 { 100.0 } else { 0.0 });
        }
    }

    #[test]
    fn time_series_unknown_country_is_zero() {
        let years = TimeWindow::new(2007, 2009).unwrap();
        let s = country_time_series(&[rec(2008, "A", "B", "7204", 1.0)], "ZZZ", years);
        assert!(s.iter().all(|p| p.imports == 0.0 && p.exports == 0.0));
    }

    #[test]
    fn time_window_parsing() {
        assert_eq!(
            "2007-2011".parse::<TimeWindow>().unwrap(),
            TimeWindow::new(2007, 2011).unwrap()
        );
        assert!("2011-2007".parse::<TimeWindow>().is_err());
        assert!("2011".parse::<TimeWindow>().is_err());
        assert_eq!(TimeWindow::defaults()[2].len(), 5);
    }
}
