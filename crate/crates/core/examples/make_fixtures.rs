//! Regenerates the synthetic fixtures shipped in `fixtures/`.
//!
//! Every table is drawn from a seeded generator, so rerunning this example
//! reproduces the committed files byte for byte:
//!
//! ```text
//! cargo run -p scrapflow --example make_fixtures -- fixtures
//! ```
//!
//! The capacity table is built from the generated trade and registry data
//! through a known linear relation plus 5% noise, so the regression stage
//! has a signal to recover.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use scrapflow::firms::{country_aggregates, match_scrap_firms, parse_registry, MatchRule};
use scrapflow::seed;
use scrapflow::trade::{build_network, country_totals, filter_commodity, parse_trade_records};
use scrapflow::trade::{TimeWindow, TradeSchema};

const SEED: u64 = 20_240_917;

/// (alpha-3, numeric trade code, relative size, registry firms)
const COUNTRIES: [(&str, u16, f64, usize); 20] = [
    ("AUT", 40, 0.8, 14),
    ("BEL", 56, 1.3, 18),
    ("HRV", 191, 0.2, 4),
    ("CZE", 203, 0.9, 16),
    ("FIN", 246, 0.6, 12),
    ("FRA", 251, 2.2, 42),
    ("DEU", 276, 3.0, 64),
    ("ITA", 380, 2.0, 50),
    ("LUX", 442, 0.15, 3),
    ("POL", 616, 1.1, 22),
    ("ROU", 642, 0.5, 10),
    ("ESP", 724, 1.6, 36),
    ("SWE", 752, 0.7, 15),
    ("GBR", 826, 1.8, 28),
    ("NLD", 528, 1.9, 20),
    ("USA", 842, 3.5, 0),
    ("TUR", 792, 2.8, 0),
    ("CHN", 156, 3.2, 0),
    ("IND", 699, 1.5, 0),
    ("JPN", 392, 1.7, 0),
];

/// Countries with installed EAF capacity in the capacity table.
const CAPACITY_COUNTRIES: [&str; 14] = [
    "AUT", "BEL", "HRV", "CZE", "FIN", "FRA", "DEU", "ITA", "LUX", "POL", "ROU", "ESP", "SWE",
    "GBR",
];

const PLANNED: [(&str, u32); 14] = [
    ("AUT", 2450),
    ("BEL", 2500),
    ("HRV", 200),
    ("CZE", 3500),
    ("FIN", 5100),
    ("FRA", 6500),
    ("DEU", 17600),
    ("ITA", 2500),
    ("LUX", 250),
    ("POL", 1000),
    ("ROU", 4100),
    ("ESP", 1700),
    ("SWE", 9200),
    ("GBR", 780),
];

const SCRAP_CODES: [&str; 5] = ["720410", "720421", "720429", "720441", "720449"];

const TOPIC_WORDS: [&[&str]; 3] = [
    &[
        "ferrous",
        "metals",
        "recycling",
        "collection",
        "sorting",
        "shredding",
        "dismantling",
        "demolition",
        "copper",
        "aluminium",
        "yard",
        "wholesale",
        "buyers",
        "sellers",
        "iron",
        "cables",
        "batteries",
        "vehicles",
        "recovery",
        "merchants",
    ],
    &[
        "steel",
        "fabrication",
        "welding",
        "machining",
        "structural",
        "components",
        "castings",
        "foundry",
        "sheet",
        "profiles",
        "pipes",
        "rolling",
        "forging",
        "alloys",
        "coils",
        "billets",
        "construction",
        "beams",
        "tubes",
        "plates",
    ],
    &[
        "waste",
        "disposal",
        "transport",
        "containers",
        "logistics",
        "hauling",
        "landfill",
        "environmental",
        "hazardous",
        "municipal",
        "skips",
        "clearance",
        "freight",
        "industrial",
        "cleaning",
        "sewage",
        "residues",
        "treatment",
        "permits",
        "fleet",
    ],
];

fn main() -> Result<()> {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fixtures"));
    fs::create_dir_all(&out)?;

    let trade = trade_csv();
    let firms = firms_csv();
    let capacity = capacity_csv(&trade, &firms)?;
    write(&out, "trade.csv", &trade)?;
    write(&out, "firms.csv", &firms)?;
    write(&out, "capacity.csv", &capacity)?;
    write(&out, "planned_eaf.csv", &planned_csv())?;
    Ok(())
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    println!("wrote {}", dir.join(name).display());
    Ok(())
}

fn trade_csv() -> String {
    let mut rng = seed::rng(SEED, &[seed::tag("trade")]);
    let noise = LogNormal::new(0.0, 0.8).unwrap();
    let mut s = String::from("t,i,j,k,v,q\n");
    for year in 2007..=2021 {
        // A slow common trend, so windows differ.
        let trend = 1.0 + 0.03 * (year - 2007) as f64;
        for &(_, ei, es, _) in &COUNTRIES {
            for &(_, ii, is, _) in &COUNTRIES {
                if ei == ii || !rng.gen_bool(0.45) {
                    continue;
                }
                let tonnes = 40_000.0 * es * is * trend * noise.sample(&mut rng);
                let n_codes = rng.gen_range(1..=2);
                for code in SCRAP_CODES.choose_multiple(&mut rng, n_codes) {
                    let q = (tonnes / n_codes as f64).round();
                    let v = (q * rng.gen_range(0.25..0.45)).round();
                    writeln!(s, "{year},{ei},{ii},{code},{v},{q}").unwrap();
                }
                if rng.gen_bool(0.1) {
                    // Semi-finished steel, outside the scrap prefix.
                    let q = (tonnes * 0.3).round();
                    writeln!(s, "{year},{ei},{ii},720610,{},{q}", (q * 0.6).round()).unwrap();
                }
            }
        }
    }
    // Rows the parser must skip.
    s.push_str("2015,276,251,720410,120,\n");
    s.push_str("2015,276,276,720410,120,300\n");
    s.push_str("2015,380,724,720449,120,-5\n");
    s.push_str("2006,380,724,720449,120,500\n");
    s.push_str("2016,xx,724,720449,120,500\n");
    s
}

fn description(rng: &mut impl Rng, weights: [f64; 3], words: usize) -> String {
    let mut out = Vec::with_capacity(words);
    for _ in 0..words {
        let u: f64 = rng.gen();
        let topic = if u < weights[0] {
            0
        } else if u < weights[0] + weights[1] {
            1
        } else {
            2
        };
        out.push(*TOPIC_WORDS[topic].choose(rng).unwrap());
    }
    out.join(" ")
}

fn firms_csv() -> String {
    let mut rng = seed::rng(SEED, &[seed::tag("firms")]);
    let z = Normal::new(0.0f64, 1.0).unwrap();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
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
    ])
    .unwrap();
    let naics = [
        ("4239", 0.47),
        ("4235", 0.19),
        ("5629", 0.08),
        ("4246", 0.03),
        ("3311", 0.05),
    ];
    let mut id = 0;
    for &(country, _, _, n) in &COUNTRIES {
        // Roughly a third of registry rows do not mention scrap at all.
        for _ in 0..n + n / 2 {
            id += 1;
            let dominant = rng.gen_range(0..3);
            let mut weights = [0.1; 3];
            weights[dominant] = 0.8;
            let kind: f64 = rng.gen();
            let activity = if kind < 0.66 {
                [
                    "scrap metal trading",
                    "purchase of scrap",
                    "scrap processing",
                ]
                .choose(&mut rng)
                .unwrap()
                .to_string()
            } else if kind < 0.72 {
                "manufacture of scrapers and blades".to_string()
            } else {
                "general trading".to_string()
            };
            let code = {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                naics
                    .iter()
                    .find(|(_, p)| {
                        acc += p;
                        u < acc
                    })
                    .map_or("", |(c, _)| c)
            };
            let shared: f64 = z.sample(&mut rng);
            let revenue = (17.5 + 1.0 * shared).exp();
            let employees = (3.7 + 0.8 * (0.8 * shared + 0.6 * z.sample(&mut rng))).exp();
            let revenue = if rng.gen_bool(0.05) {
                String::new()
            } else {
                format!("{:.0}", revenue)
            };
            let employees = if rng.gen_bool(0.05) {
                String::new()
            } else {
                format!("{:.0}", employees.max(1.0))
            };
            w.write_record([
                format!("F{id:05}"),
                format!("Firm {id} {country}"),
                country.to_string(),
                code.to_string(),
                revenue,
                employees,
                description(&mut rng, weights, 25),
                description(&mut rng, weights, 10),
                activity,
                description(&mut rng, weights, 5),
            ])
            .unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

fn capacity_csv(trade: &str, firms: &str) -> Result<String> {
    let (records, _) = parse_trade_records(trade.as_bytes(), &TradeSchema::default())?;
    let records = filter_commodity(&records, "7204");
    let net = build_network(&records, TimeWindow::new(2017, 2021)?);
    let trade: BTreeMap<String, (f64, f64)> = country_totals(&net)
        .into_iter()
        .map(|t| (t.country, (t.exports, t.imports)))
        .collect();
    let (registry, _) = parse_registry(firms.as_bytes(), b',')?;
    let pop = match_scrap_firms(&registry, &MatchRule::default(), "synthetic")?;
    let agg: BTreeMap<String, (f64, f64, f64)> = country_aggregates(&pop)
        .into_iter()
        .map(|a| (a.country, (a.firms as f64, a.employees, a.revenue)))
        .collect();

    let mut rng = seed::rng(SEED, &[seed::tag("capacity")]);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut s = String::from("country,eaf_capacity_kt,bof_capacity_kt\n");
    for c in CAPACITY_COUNTRIES {
        let (exports, imports) = trade.get(c).copied().unwrap_or_default();
        let (n, emp, rev) = agg.get(c).copied().unwrap_or_default();
        let size = COUNTRIES.iter().find(|e| e.0 == c).map_or(1.0, |e| e.2);
        let bof = (size * rng.gen_range(300.0..1500.0f64)).round();
        let eaf = -0.00096 * exports + 0.0018 * imports + 79.0 * n + 0.13 * emp
            - 2.4e-7 * rev
            - 0.12 * bof;
        let eaf = (eaf * (1.0 + noise.sample(&mut rng))).max(0.0);
        writeln!(s, "{c},{eaf:.1},{bof}").unwrap();
    }
    Ok(s)
}

fn planned_csv() -> String {
    let mut s = String::from("country,planned_eaf_kt\n");
    for (c, kt) in PLANNED {
        writeln!(s, "{c},{kt}").unwrap();
    }
    s
}
