//! Independent oracles and generators shared by the integration tests.
//!
//! Nothing here calls into the code under test except to construct its input
//! types.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use scrapflow::topics::Corpus;
use scrapflow::trade::{TimeWindow, TradeNetwork};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1],
/// found by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * pn - p0) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

/// Integral of `f` over [a, b] with an `n`-point Gauss-Legendre rule
/// (exact for polynomials of degree below 2n).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    gauss_legendre_rule(n)
        .into_iter()
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Ordinary least squares through the origin by the normal equations,
/// solved with Gauss-Jordan elimination with partial pivoting.
pub struct NormalEquations {
    pub beta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Uncentered.
    pub r2: f64,
}

#[allow(clippy::needless_range_loop)]
pub fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> NormalEquations {
    let n = rows.len();
    let k = rows[0].len();
    // Augmented [X'X | X'y | I].
    let width = 2 * k + 1;
    let mut m = vec![vec![0.0; width]; k];
    for (i, row_i) in m.iter_mut().enumerate() {
        for j in 0..k {
            row_i[j] = (0..n).map(|r| rows[r][i] * rows[r][j]).sum();
        }
        row_i[k] = (0..n).map(|r| rows[r][i] * y[r]).sum();
        row_i[k + 1 + i] = 1.0;
    }
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "oracle: singular normal equations");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..k {
            if r != col {
                let factor = m[r][col];
                if factor != 0.0 {
                    for c in 0..width {
                        m[r][c] -= factor * m[col][c];
                    }
                }
            }
        }
    }
    let beta: Vec<f64> = (0..k).map(|i| m[i][k]).collect();
    let residuals: Vec<f64> = (0..n)
        .map(|r| y[r] - (0..k).map(|j| rows[r][j] * beta[j]).sum::<f64>())
        .collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let sigma2 = ssr / (n - k) as f64;
    let std_errors = (0..k).map(|i| (sigma2 * m[i][k + 1 + i]).sqrt()).collect();
    NormalEquations {
        beta,
        std_errors,
        residuals,
        r2: 1.0 - ssr / yy,
    }
}

/// Three-standard-deviation band for a Binomial(n, p) count.
pub fn binomial_band(n: u64, p: f64) -> (f64, f64) {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (mean - 3.0 * sd, mean + 3.0 * sd)
}

/// A random directed graph on `nodes` nodes with edge probability `density`
/// and log-normal-ish positive weights.
pub fn random_network(rng: &mut impl Rng, nodes: usize, density: f64) -> TradeNetwork {
    let mut edges = Vec::new();
    for a in 0..nodes {
        for b in 0..nodes {
            if a != b && rng.gen_bool(density) {
                let w = (rng.gen_range(-2.0..4.0f64)).exp();
                edges.push((format!("N{a:02}"), format!("N{b:02}"), w));
            }
        }
    }
    TradeNetwork::from_edges(window(), edges)
}

pub fn window() -> TimeWindow {
    TimeWindow::new(2017, 2021).unwrap()
}

/// A corpus drawn from a known LDA model.
pub struct PlantedCorpus {
    pub corpus: Corpus,
    /// Topic-word distributions over token strings, `topics[t][w]` for the
    /// token `word(w)`.
    pub topics: Vec<Vec<f64>>,
}

pub fn word(w: usize) -> String {
    format!("w{w:03}")
}

fn dirichlet(rng: &mut impl Rng, alpha: &[f64]) -> Vec<f64> {
    let draws: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).unwrap().sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

fn categorical(rng: &mut impl Rng, p: &[f64]) -> usize {
    let mut u: f64 = rng.gen();
    for (i, &pi) in p.iter().enumerate() {
        u -= pi;
        if u < 0.0 {
            return i;
        }
    }
    p.len() - 1
}

/// `k` topics over `v` words, each concentrated on its own block of the
/// vocabulary; `d` documents of `len` tokens with sparse topic mixtures.
pub fn planted_corpus(seed: u64, d: usize, v: usize, k: usize, len: usize) -> PlantedCorpus {
    let mut rng = rng(seed);
    let block = v / k;
    let topics: Vec<Vec<f64>> = (0..k)
        .map(|t| {
            let alpha: Vec<f64> = (0..v)
                .map(|w| if w / block == t { 1.0 } else { 0.01 })
                .collect();
            dirichlet(&mut rng, &alpha)
        })
        .collect();
    let docs: Vec<(String, Vec<String>)> = (0..d)
        .map(|i| {
            let theta = dirichlet(&mut rng, &vec![0.2; k]);
            let tokens = (0..len)
                .map(|_| {
                    let topic = categorical(&mut rng, &theta);
                    word(categorical(&mut rng, &topics[topic]))
                })
                .collect();
            (format!("doc{i:04}"), tokens)
        })
        .collect();
    PlantedCorpus {
        corpus: Corpus::from_token_docs(docs),
        topics,
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Best mean cosine over all matchings of fitted to planted topics (brute
/// force over permutations; fine for small K). Returns the per-topic cosines
/// of the best matching.
pub fn matched_cosines(planted: &[Vec<f64>], fitted: &[Vec<f64>]) -> Vec<f64> {
    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }
    permutations(fitted.len())
        .into_iter()
        .map(|perm| {
            planted
                .iter()
                .zip(&perm)
                .map(|(p, &j)| cosine(p, &fitted[j]))
                .collect::<Vec<f64>>()
        })
        .max_by(|a, b| {
            let sa: f64 = a.iter().sum();
            let sb: f64 = b.iter().sum();
            sa.total_cmp(&sb)
        })
        .unwrap()
}

/// Planned capacities (kt/yr) and published company counts per country.
pub const REFERENCE_PLANS: [(&str, f64, u64); 14] = [
    ("AUT", 2450.0, 31),
    ("BEL", 2500.0, 32),
    ("HRV", 200.0, 3),
    ("CZE", 3500.0, 44),
    ("FIN", 5100.0, 65),
    ("FRA", 6500.0, 82),
    ("DEU", 17600.0, 223),
    ("ITA", 2500.0, 32),
    ("LUX", 250.0, 3),
    ("POL", 1000.0, 13),
    ("ROU", 4100.0, 52),
    ("ESP", 1700.0, 22),
    ("SWE", 9200.0, 117),
    ("GBR", 780.0, 10),
];

pub fn fixtures_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Reference coefficients for exports, imports, firms, employees, revenue and
/// BOF capacity, in `Regressor::ALL` order.
pub const REFERENCE_COEFFICIENTS: [f64; 6] = [-0.00096, 0.0018, 79.0, 0.13, -2.4e-7, -0.12];

/// Fourteen synthetic countries whose EAF capacity follows
/// `REFERENCE_COEFFICIENTS` with multiplicative noise of relative size
/// `noise`.
pub fn synthetic_panel(seed: u64, noise: f64) -> Vec<scrapflow::regression::CountryObservation> {
    use rand_distr::Normal;
    let mut rng = rng(seed);
    let eps = Normal::new(0.0, noise).unwrap();
    (0..14)
        .map(|i| {
            let firms = rng.gen_range(5.0..150.0f64).round();
            let employees = firms * rng.gen_range(20.0..70.0);
            let revenue = firms * rng.gen_range(1.5e7..6e7);
            let x = [
                rng.gen_range(2e5..6e6),
                rng.gen_range(2e5..5e6),
                firms,
                employees,
                revenue,
                rng.gen_range(0.0..12_000.0),
            ];
            let mean: f64 = x
                .iter()
                .zip(REFERENCE_COEFFICIENTS)
                .map(|(a, b)| a * b)
                .sum();
            scrapflow::regression::CountryObservation {
                country: format!("C{i:02}"),
                eaf_capacity: mean * (1.0 + eps.sample(&mut rng)),
                exports: Some(x[0]),
                imports: Some(x[1]),
                n_firms: Some(x[2]),
                employees: Some(x[3]),
                revenue: Some(x[4]),
                bof_capacity: Some(x[5]),
            }
        })
        .collect()
}

/// A random full-rank design with `n` rows and `k` columns and a response.
pub fn random_design(rng: &mut impl Rng, n: usize, k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| rng.gen_range(-10.0..10.0)).collect())
        .collect();
    let y = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
    (rows, y)
}
