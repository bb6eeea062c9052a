//! Company registry filtering and firm population summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::countries;
use crate::error::{Error, Result};

pub use crate::stats::{pearson, Correlation};

/// The four free-text columns of a registry export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptionField {
    FullOverview,
    MainProductsAndServices,
    MainActivity,
    PrimaryBusinessLine,
}

impl DescriptionField {
    pub const ALL: [DescriptionField; 4] = [
        DescriptionField::FullOverview,
        DescriptionField::MainProductsAndServices,
        DescriptionField::MainActivity,
        DescriptionField::PrimaryBusinessLine,
    ];

    /// Column name in registry files.
    pub fn column(self) -> &'static str {
        match self {
            DescriptionField::FullOverview => "full_overview",
            DescriptionField::MainProductsAndServices => "main_products_and_services",
            DescriptionField::MainActivity => "main_activity",
            DescriptionField::PrimaryBusinessLine => "primary_business_line",
        }
    }
}

impl fmt::Display for DescriptionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Descriptions {
    pub full_overview: String,
    pub main_products_and_services: String,
    pub main_activity: String,
    pub primary_business_line: String,
}

impl Descriptions {
    pub fn get(&self, field: DescriptionField) -> &str {
        match field {
            DescriptionField::FullOverview => &self.full_overview,
            DescriptionField::MainProductsAndServices => &self.main_products_and_services,
            DescriptionField::MainActivity => &self.main_activity,
            DescriptionField::PrimaryBusinessLine => &self.primary_business_line,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (DescriptionField, &str)> {
        DescriptionField::ALL.into_iter().map(|f| (f, self.get(f)))
    }

    pub fn is_empty(&self) -> bool {
        self.iter().all(|(_, t)| t.trim().is_empty())
    }

    /// Non-empty fields joined by a blank, in column order.
    pub fn concatenated(&self) -> String {
        self.iter()
            .map(|(_, t)| t.trim())
            .filter(|t| !t.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmRecord {
    pub id: String,
    pub name: String,
    /// Alpha-3.
    pub country: String,
    pub naics4: Option<String>,
    /// USD per year.
    pub revenue: Option<f64>,
    pub employees: Option<f64>,
    pub descriptions: Descriptions,
}

#[derive(Debug, Deserialize)]
struct RegistryRow {
    id: String,
    #[serde(default)]
    name: String,
    country: String,
    #[serde(default)]
    naics4: String,
    #[serde(default)]
    revenue_usd: String,
    #[serde(default)]
    employees: String,
    #[serde(default)]
    full_overview: String,
    #[serde(default)]
    main_products_and_services: String,
    #[serde(default)]
    main_activity: String,
    #[serde(default)]
    primary_business_line: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RegistryReport {
    pub rows: u64,
    pub malformed_rows: Vec<u64>,
    /// Revenue or headcount fields that were present but unusable (negative
    /// or not a number); treated as missing.
    pub invalid_numbers: u64,
}

/// Parse a registry export (one firm per row, header required).
pub fn parse_registry<R: Read>(
    source: R,
    delimiter: u8,
) -> Result<(Vec<FirmRecord>, RegistryReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    for required in ["id", "country"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Schema(format!(
                "registry column {required:?} not found in header"
            )));
        }
    }
    let mut report = RegistryReport::default();
    let mut firms = Vec::new();
    for row in reader.deserialize::<RegistryRow>() {
        report.rows += 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                report
                    .malformed_rows
                    .push(e.position().map_or(0, |p| p.line()));
                continue;
            }
        };
        let mut number = |s: &str| -> Option<f64> {
            if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("n.a.") {
                return None;
            }
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Some(v),
                _ => {
                    report.invalid_numbers += 1;
                    None
                }
            }
        };
        let revenue = number(&row.revenue_usd);
        let employees = number(&row.employees);
        firms.push(FirmRecord {
            id: row.id,
            name: row.name,
            country: countries::normalize(&row.country).into_code(),
            naics4: Some(row.naics4).filter(|c| !c.is_empty()),
            revenue,
            employees,
            descriptions: Descriptions {
                full_overview: row.full_overview,
                main_products_and_services: row.main_products_and_services,
                main_activity: row.main_activity,
                primary_business_line: row.primary_business_line,
            },
        });
    }
    Ok((firms, report))
}

/// Keyword rule for admitting a firm to the scrap population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchRule {
    /// Lowercase token prefix.
    pub keyword: String,
    /// Whole tokens that start with the keyword but do not count.
    pub exclusions: Vec<String>,
}

impl Default for MatchRule {
    fn default() -> Self {
        MatchRule {
            keyword: "scrap".into(),
            exclusions: vec!["scraper".into(), "scrapers".into()],
        }
    }
}

impl MatchRule {
    fn validate(&self) -> Result<()> {
        if self.keyword.is_empty() || self.keyword.chars().any(char::is_uppercase) {
            return Err(Error::Config(format!(
                "keyword {:?} must be non-empty and lowercase",
                self.keyword
            )));
        }
        Ok(())
    }

    /// Does any letter-run token of `text` qualify?
    pub fn matches(&self, text: &str) -> bool {
        letter_tokens(text).any(|t| t.starts_with(&self.keyword) && !self.exclusions.contains(&t))
    }
}

/// Lowercased maximal runs of letters.
fn letter_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedFirm {
    pub firm: FirmRecord,
    /// Description fields in which the keyword rule fired.
    pub matched_fields: Vec<DescriptionField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmPopulation {
    /// Sorted by firm id.
    pub firms: Vec<MatchedFirm>,
    pub provenance: String,
}

impl FirmPopulation {
    pub fn len(&self) -> usize {
        self.firms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.firms.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &FirmRecord> {
        self.firms.iter().map(|m| &m.firm)
    }

    /// Restrict to firms located in `countries`.
    pub fn restricted_to(&self, countries: &[String]) -> FirmPopulation {
        FirmPopulation {
            firms: self
                .firms
                .iter()
                .filter(|m| countries.contains(&m.firm.country))
                .cloned()
                .collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Firms with at least one description field satisfying `rule`.
pub fn match_scrap_firms(
    records: &[FirmRecord],
    rule: &MatchRule,
    provenance: &str,
) -> Result<FirmPopulation> {
    rule.validate()?;
    let mut firms: Vec<MatchedFirm> = records
        .iter()
        .filter_map(|firm| {
            let matched: Vec<DescriptionField> = firm
                .descriptions
                .iter()
                .filter(|(_, text)| rule.matches(text))
                .map(|(f, _)| f)
                .collect();
            (!matched.is_empty()).then(|| MatchedFirm {
                firm: firm.clone(),
                matched_fields: matched,
            })
        })
        .collect();
    firms.sort_by(|a, b| a.firm.id.cmp(&b.firm.id));
    Ok(FirmPopulation {
        firms,
        provenance: provenance.to_string(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NaicsShares {
    /// Share of each code among firms that report one.
    pub shares: BTreeMap<String, f64>,
    /// Fraction of all firms without a code.
    pub missing_share: f64,
    pub coded_firms: usize,
}

pub fn naics_distribution(population: &FirmPopulation) -> NaicsShares {
    if population.is_empty() {
        return NaicsShares::default();
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for code in population.records().filter_map(|f| f.naics4.as_ref()) {
        *counts.entry(code.clone()).or_default() += 1;
    }
    let coded: usize = counts.values().sum();
    let shares = counts
        .into_iter()
        .map(|(code, n)| (code, n as f64 / coded as f64))
        .collect();
    NaicsShares {
        shares,
        missing_share: (population.len() - coded) as f64 / population.len() as f64,
        coded_firms: coded,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryAggregate {
    pub country: String,
    pub firms: usize,
    /// Sum over firms reporting a headcount.
    pub employees: f64,
    /// Sum over firms reporting revenue, USD.
    pub revenue: f64,
    pub firms_with_employees: usize,
    pub firms_with_revenue: usize,
}

/// Per-country firm counts and totals, sorted by country.
pub fn country_aggregates(population: &FirmPopulation) -> Vec<CountryAggregate> {
    let mut acc: BTreeMap<&str, CountryAggregate> = BTreeMap::new();
    for f in population.records() {
        let a = acc.entry(&f.country).or_insert_with(|| CountryAggregate {
            country: f.country.clone(),
            firms: 0,
            employees: 0.0,
            revenue: 0.0,
            firms_with_employees: 0,
            firms_with_revenue: 0,
        });
        a.firms += 1;
        if let Some(e) = f.employees {
            a.employees += e;
            a.firms_with_employees += 1;
        }
        if let Some(r) = f.revenue {
            a.revenue += r;
            a.firms_with_revenue += 1;
        }
    }
    acc.into_values().collect()
}

/// Revenue-employee correlation over firms reporting both.
pub fn revenue_employee_correlation(population: &FirmPopulation) -> Result<Correlation> {
    let (rev, emp): (Vec<f64>, Vec<f64>) = population
        .records()
        .map(|f| {
            (
                f.revenue.unwrap_or(f64::NAN),
                f.employees.unwrap_or(f64::NAN),
            )
        })
        .unzip();
    pearson(&rev, &emp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn firm(id: &str, country: &str, text: &str) -> FirmRecord {
        FirmRecord {
            id: id.into(),
            name: String::new(),
            country: country.into(),
            naics4: None,
            revenue: None,
            employees: None,
            descriptions: Descriptions {
                main_activity: text.into(),
                ..Default::default()
            },
        }
    }

    fn matched(text: &str) -> bool {
        let pop = match_scrap_firms(&[firm("1", "AUT", text)], &MatchRule::default(), "t").unwrap();
        !pop.is_empty()
    }

    #[test]
    fn keyword_rule() {
        assert!(matched("Wholesale of SCRAP metal"));
        assert!(!matched("skyscraper construction"));
        assert!(matched("operates a scrapyard"));
        assert!(!matched("paint scrapers and scraper blades"));
        assert!(matched("scrap-metal recycling"));
        assert!(!matched(""));
    }

    #[test]
    fn matched_fields_are_annotated() {
        let mut f = firm("1", "AUT", "scrap");
        f.descriptions.primary_business_line = "Scrap metal".into();
        f.descriptions.full_overview = "steel".into();
        let pop = match_scrap_firms(&[f], &MatchRule::default(), "t").unwrap();
        assert_eq!(
            pop.firms[0].matched_fields,
            vec![
                DescriptionField::MainActivity,
                DescriptionField::PrimaryBusinessLine
            ]
        );
    }

    #[test]
    fn uppercase_keyword_rejected() {
        let rule = MatchRule {
            keyword: "Scrap".into(),
            exclusions: vec![],
        };
        assert!(match_scrap_firms(&[], &rule, "t").is_err());
    }

    #[test]
    fn naics_shares() {
        let codes = ["4239", "4239", "4235", "5629"];
        let firms: Vec<MatchedFirm> = codes
            .iter()
            .enumerate()
            .map(|(i, c)| MatchedFirm {
                firm: FirmRecord {
                    naics4: Some(c.to_string()),
                    ..firm(&i.to_string(), "AUT", "scrap")
                },
                matched_fields: vec![DescriptionField::MainActivity],
            })
            .collect();
        let pop = FirmPopulation {
            firms,
            provenance: "t".into(),
        };
        let d = naics_distribution(&pop);
        assert_eq!(d.shares["4239"], 0.5);
        assert_eq!(d.shares["4235"], 0.25);
        assert_eq!(d.shares["5629"], 0.25);
        assert_eq!(d.missing_share, 0.0);

        let empty = FirmPopulation {
            firms: vec![],
            provenance: "t".into(),
        };
        assert!(naics_distribution(&empty).shares.is_empty());
    }

    #[test]
    fn aggregates_skip_missing_values() {
        let mut a = firm("a", "AUT", "scrap");
        a.employees = Some(10.0);
        a.revenue = Some(1e6);
        let mut b = firm("b", "AUT", "scrap");
        b.revenue = Some(2e6);
        let pop = match_scrap_firms(&[b, a], &MatchRule::default(), "t").unwrap();
        let agg = country_aggregates(&pop);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].firms, 2);
        assert_eq!(agg[0].employees, 10.0);
        assert_eq!(agg[0].revenue, 3e6);
        assert_eq!(agg[0].firms_with_employees, 1);
    }

    #[test]
    fn registry_parsing() {
        let text = "id,name,country,naics4,revenue_usd,employees,full_overview,main_products_and_services,main_activity,primary_business_line\n\
                    1,Acme,040,4239,1000000,12,Scrap dealer,,,\n\
                    2,Beta,DEU,,-5,n.a.,,,steel,\n";
        let (firms, report) = parse_registry(text.as_bytes(), b',').unwrap();
        assert_eq!(firms.len(), 2);
        assert_eq!(firms[0].country, "AUT");
        assert_eq!(firms[0].employees, Some(12.0));
        assert_eq!(firms[1].naics4, None);
        assert_eq!(firms[1].revenue, None);
        assert_eq!(report.invalid_numbers, 1);
        assert!(parse_registry("name\nx\n".as_bytes(), b',').is_err());
    }
}
