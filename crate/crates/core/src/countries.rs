//! Country code normalisation.
//!
//! Trade files carry ISO 3166 numeric codes (plus a handful of BACI-specific
//! numerics such as 251 for France), while capacity tables and firm registries
//! use alpha-3. Everything downstream keys on alpha-3.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

const TABLE: &str = include_str!("../data/country_codes.csv");

struct CodeTable {
    numeric: HashMap<u16, &'static str>,
    alpha3: HashSet<&'static str>,
    names: HashMap<&'static str, &'static str>,
}

fn table() -> &'static CodeTable {
    static TABLE_CELL: OnceLock<CodeTable> = OnceLock::new();
    TABLE_CELL.get_or_init(|| {
        let mut numeric = HashMap::new();
        let mut alpha3 = HashSet::new();
        let mut names = HashMap::new();
        for line in TABLE.lines().skip(1) {
            let mut parts = line.splitn(3, ',');
            let (Some(num), Some(a3), Some(name)) = (parts.next(), parts.next(), parts.next())
            else {
                continue;
            };
            let num: u16 = num.parse().expect("bundled country table is well formed");
            numeric.entry(num).or_insert(a3);
            alpha3.insert(a3);
            names.entry(a3).or_insert(name.trim_matches('"'));
        }
        CodeTable {
            numeric,
            alpha3,
            names,
        }
    })
}

/// Result of normalising one raw code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Normalized {
    Known(String),
    /// Not in the bundled table; carried through verbatim.
    Unknown(String),
}

impl Normalized {
    pub fn code(&self) -> &str {
        match self {
            Normalized::Known(c) | Normalized::Unknown(c) => c,
        }
    }

    pub fn into_code(self) -> String {
        match self {
            Normalized::Known(c) | Normalized::Unknown(c) => c,
        }
    }

    pub fn is_known(&self) -> bool {
        matches!(self, Normalized::Known(_))
    }
}

/// Map a numeric or alpha-3 code onto alpha-3.
pub fn normalize(raw: &str) -> Normalized {
    let raw = raw.trim();
    let t = table();
    if !raw.is_empty() && raw.bytes().all(|b| b.is_ascii_digit()) {
        if let Some(a3) = raw.parse::<u16>().ok().and_then(|n| t.numeric.get(&n)) {
            return Normalized::Known((*a3).to_string());
        }
        return Normalized::Unknown(raw.to_string());
    }
    let upper = raw.to_ascii_uppercase();
    if t.alpha3.contains(upper.as_str()) {
        Normalized::Known(upper)
    } else {
        Normalized::Unknown(raw.to_string())
    }
}

/// English short name for an alpha-3 code, if bundled.
pub fn name(alpha3: &str) -> Option<&'static str> {
    table().names.get(alpha3).copied()
}
