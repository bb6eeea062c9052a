mod common;

use std::collections::BTreeMap;
use std::fs::File;

use proptest::prelude::*;

use scrapflow::firms::{
    country_aggregates, match_scrap_firms, naics_distribution, parse_registry, MatchRule,
};

/// Scrap-matching rows of the fixture registry read with a plain CSV reader:
/// (country, revenue, employees).
fn oracle_rows() -> Vec<(String, Option<f64>, Option<f64>)> {
    let mut reader = csv::Reader::from_path(common::fixtures_dir().join("firms.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (country, revenue, employees) = (col("country"), col("revenue_usd"), col("employees"));
    let text_cols: Vec<usize> = [
        "full_overview",
        "main_products_and_services",
        "main_activity",
        "primary_business_line",
    ]
    .iter()
    .map(|c| col(c))
    .collect();
    reader
        .records()
        .map(Result::unwrap)
        .filter(|row| {
            text_cols.iter().any(|&c| {
                row[c]
                    .to_lowercase()
                    .split(|ch: char| !ch.is_alphabetic())
                    .any(|w| w.starts_with("scrap") && w != "scraper" && w != "scrapers")
            })
        })
        .map(|row| {
            (
                row[country].to_string(),
                row[revenue].parse().ok(),
                row[employees].parse().ok(),
            )
        })
        .collect()
}

#[test]
fn country_totals_equal_independent_column_sums() {
    let (records, report) = parse_registry(
        File::open(common::fixtures_dir().join("firms.csv")).unwrap(),
        b',',
    )
    .unwrap();
    assert!(report.malformed_rows.is_empty());
    let pop = match_scrap_firms(&records, &MatchRule::default(), "fixture").unwrap();
    let rows = oracle_rows();
    assert_eq!(pop.len(), rows.len());
    assert!(pop.len() >= 100);

    let mut expected: BTreeMap<String, (usize, f64, f64)> = BTreeMap::new();
    for (c, rev, emp) in &rows {
        let e = expected.entry(c.clone()).or_default();
        e.0 += 1;
        e.1 += rev.unwrap_or(0.0);
        e.2 += emp.unwrap_or(0.0);
    }
    let aggregates = country_aggregates(&pop);
    assert_eq!(aggregates.len(), expected.len());
    for a in aggregates {
        let (n, rev, emp) = expected[&a.country];
        assert_eq!(a.firms, n, "{}", a.country);
        assert!(
            (a.revenue - rev).abs() <= 1e-9 * rev.max(1.0),
            "{}",
            a.country
        );
        assert!(
            (a.employees - emp).abs() <= 1e-9 * emp.max(1.0),
            "{}",
            a.country
        );
    }
}

#[test]
fn naics_shares_sum_to_one() {
    let (records, _) = parse_registry(
        File::open(common::fixtures_dir().join("firms.csv")).unwrap(),
        b',',
    )
    .unwrap();
    let pop = match_scrap_firms(&records, &MatchRule::default(), "fixture").unwrap();
    let shares = naics_distribution(&pop);
    let total: f64 = shares.shares.values().sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(shares.missing_share > 0.0 && shares.missing_share < 1.0);
    // The generator gives 4239 the largest share.
    let top = shares
        .shares
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    assert_eq!(top.0, "4239");
}

proptest! {
    #[test]
    fn matching_ignores_case_and_surrounding_punctuation(
        prefix in "[a-z ]{0,10}",
        suffix in "[a-z ]{0,10}",
        tail in "(|s|ped|yard|metal)",
        upper in any::<bool>(),
    ) {
        let word = format!("scrap{tail}");
        let word = if upper { word.to_uppercase() } else { word };
        let text = format!("{prefix} ({word}), {suffix}");
        prop_assert!(MatchRule::default().matches(&text));
    }

    #[test]
    fn text_without_the_keyword_never_matches(text in "[a-z ,.]{0,60}") {
        prop_assume!(!text.contains("scrap"));
        prop_assert!(!MatchRule::default().matches(&text));
    }
}

#[test]
fn exclusions_are_whole_words() {
    let rule = MatchRule::default();
    assert!(!rule.matches("paint scrapers and scraper blades"));
    assert!(rule.matches("scraper blades and scrap steel"));
    assert!(!rule.matches("skyscraper construction"));
}
