mod common;

use std::fs::File;

use proptest::prelude::*;

use scrapflow::trade::{
    build_network, country_time_series, country_totals, filter_commodity, parse_trade_records,
    TimeWindow, TradeRecord, TradeSchema,
};

const COUNTRIES: [&str; 5] = ["AUT", "DEU", "FRA", "ITA", "TUR"];

fn record() -> impl Strategy<Value = TradeRecord> {
    (
        2007..=2021i32,
        0..COUNTRIES.len(),
        0..COUNTRIES.len(),
        prop::sample::select(vec!["720410", "720449", "720610", "740400"]),
        0.0..1e6f64,
    )
        .prop_map(|(year, e, i, code, q)| TradeRecord {
            year,
            exporter: COUNTRIES[e].into(),
            importer: COUNTRIES[i].into(),
            hs_code: code.into(),
            quantity: q,
            value: None,
        })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn imports_equal_exports(records in prop::collection::vec(record(), 0..200)) {
        let net = build_network(&records, TimeWindow::new(2007, 2021).unwrap());
        let totals = country_totals(&net);
        let imports: f64 = totals.iter().map(|t| t.imports).sum();
        let exports: f64 = totals.iter().map(|t| t.exports).sum();
        prop_assert!(close(imports, exports));
        prop_assert!(close(imports, net.total_weight()));
        let net_sum: f64 = totals.iter().map(|t| t.net).sum();
        prop_assert!(net_sum.abs() <= 1e-9 * net.total_weight().max(1.0));
    }

    #[test]
    fn adjacent_windows_combine_by_length(records in prop::collection::vec(record(), 0..200)) {
        let a = TimeWindow::new(2007, 2011).unwrap();
        let b = TimeWindow::new(2012, 2021).unwrap();
        let whole = TimeWindow::new(2007, 2021).unwrap();
        let (na, nb, nw) = (build_network(&records, a), build_network(&records, b), build_network(&records, whole));
        for (x, y, w) in nw.edges() {
            let combined = na.weight(x, y).unwrap_or(0.0) * a.len() as f64
                + nb.weight(x, y).unwrap_or(0.0) * b.len() as f64;
            prop_assert!(close(w * whole.len() as f64, combined));
        }
        prop_assert!(na.edge_count() <= nw.edge_count() && nb.edge_count() <= nw.edge_count());
    }

    #[test]
    fn weights_are_linear_in_quantities(
        records in prop::collection::vec(record(), 1..100),
        factor in 0.001..1000.0f64,
    ) {
        let w = TimeWindow::new(2012, 2016).unwrap();
        let scaled: Vec<TradeRecord> = records
            .iter()
            .map(|r| TradeRecord { quantity: r.quantity * factor, ..r.clone() })
            .collect();
        let (n1, n2) = (build_network(&records, w), build_network(&scaled, w));
        prop_assert_eq!(n1.edge_count(), n2.edge_count());
        for (x, y, v) in n1.edges() {
            prop_assert!(close(n2.weight(x, y).unwrap(), v * factor));
        }
    }

    #[test]
    fn commodity_filter_is_idempotent(records in prop::collection::vec(record(), 0..200)) {
        let once = filter_commodity(&records, "7204");
        prop_assert_eq!(filter_commodity(&once, "7204"), once.clone());
        prop_assert!(once.iter().all(|r| r.hs_code.starts_with("7204")));
        let expected = records.iter().filter(|r| r.hs_code.starts_with("7204")).count();
        prop_assert_eq!(once.len(), expected);
    }

    #[test]
    fn series_sum_is_window_total(records in prop::collection::vec(record(), 0..200)) {
        let w = TimeWindow::new(2017, 2021).unwrap();
        let net = build_network(&records, w);
        let totals = country_totals(&net);
        for t in &totals {
            let series = country_time_series(&records, &t.country, w);
            let imports: f64 = series.iter().map(|y| y.imports).sum();
            let exports: f64 = series.iter().map(|y| y.exports).sum();
            prop_assert!(close(imports, t.imports * w.len() as f64));
            prop_assert!(close(exports, t.exports * w.len() as f64));
        }
    }
}

#[test]
fn three_year_fixture_series_cross_check() {
    let csv = "t,i,j,k,v,q\n\
               2017,276,251,720410,1,100\n\
               2018,276,251,720410,1,200\n\
               2019,251,276,720449,1,50\n\
               2019,276,380,720449,1,25\n";
    let (records, _) = parse_trade_records(csv.as_bytes(), &TradeSchema::default()).unwrap();
    let w = TimeWindow::new(2017, 2021).unwrap();
    let net = build_network(&records, w);
    assert_eq!(net.weight("DEU", "FRA"), Some(60.0));
    let series = country_time_series(&records, "DEU", w);
    let exports: f64 = series.iter().map(|y| y.exports).sum();
    let stats = country_totals(&net)
        .into_iter()
        .find(|t| t.country == "DEU")
        .unwrap();
    assert_eq!(exports, stats.exports * 5.0);
    assert_eq!(exports, 325.0);
}

#[test]
fn fixture_networks_conserve_flow() {
    let file = File::open(common::fixtures_dir().join("trade.csv")).unwrap();
    let (records, report) = parse_trade_records(file, &TradeSchema::default()).unwrap();
    assert_eq!(report.skipped_count(), 4);
    let records = filter_commodity(&records, "7204");
    for w in TimeWindow::defaults() {
        let net = build_network(&records, w);
        assert!(net.edge_count() > 100);
        let totals = country_totals(&net);
        let imports: f64 = totals.iter().map(|t| t.imports).sum();
        let exports: f64 = totals.iter().map(|t| t.exports).sum();
        assert!(close(imports, exports), "{w}: {imports} vs {exports}");
    }
}
