//! Least squares through the origin with classical inference, used to relate
//! EAF capacity to scrap trade and the scrap-firm ecosystem.
//!
//! Units: capacity in kt/yr, trade in t/yr, revenue in USD, employees in
//! persons. With these units the firm coefficient reads directly as kt/yr of
//! EAF capacity per additional firm.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::countries;
use crate::error::{Error, Result};
use crate::stats::two_sided_t_p;

/// Candidate explanatory variables, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressor {
    Exports,
    Imports,
    Firms,
    Employees,
    Revenue,
    BofCapacity,
}

impl Regressor {
    pub const ALL: [Regressor; 6] = [
        Regressor::Exports,
        Regressor::Imports,
        Regressor::Firms,
        Regressor::Employees,
        Regressor::Revenue,
        Regressor::BofCapacity,
    ];

    /// Column name in observation tables.
    pub fn column(self) -> &'static str {
        match self {
            Regressor::Exports => "exports_t",
            Regressor::Imports => "imports_t",
            Regressor::Firms => "n_firms",
            Regressor::Employees => "employees",
            Regressor::Revenue => "revenue_usd",
            Regressor::BofCapacity => "bof_capacity_kt",
        }
    }

    /// Human-readable label for coefficient tables.
    pub fn label(self) -> &'static str {
        match self {
            Regressor::Exports => "Exports 2017-2021",
            Regressor::Imports => "Imports 2017-2021",
            Regressor::Firms => "Number of companies",
            Regressor::Employees => "Number of employees",
            Regressor::Revenue => "Operating revenue",
            Regressor::BofCapacity => "BOF capacity",
        }
    }
}

impl fmt::Display for Regressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

impl FromStr for Regressor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regressor::ALL
            .into_iter()
            .find(|r| r.to_string() == s || r.column() == s)
            .ok_or_else(|| Error::Config(format!("unknown regressor {s:?}")))
    }
}

/// One country's row of the regression table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryObservation {
    pub country: String,
    /// Dependent variable, kt/yr.
    pub eaf_capacity: f64,
    /// t/yr, window average.
    pub exports: Option<f64>,
    pub imports: Option<f64>,
    pub n_firms: Option<f64>,
    pub employees: Option<f64>,
    /// USD.
    pub revenue: Option<f64>,
    /// kt/yr.
    pub bof_capacity: Option<f64>,
}

impl CountryObservation {
    pub fn value(&self, r: Regressor) -> Option<f64> {
        match r {
            Regressor::Exports => self.exports,
            Regressor::Imports => self.imports,
            Regressor::Firms => self.n_firms,
            Regressor::Employees => self.employees,
            Regressor::Revenue => self.revenue,
            Regressor::BofCapacity => self.bof_capacity,
        }
    }
}

/// Read an observation table. Columns: `country`, `eaf_capacity_kt` and any
/// of the regressor columns; blank cells are missing values.
pub fn parse_observations<R: Read>(source: R) -> Result<Vec<CountryObservation>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let country_col = col("country")
        .ok_or_else(|| Error::Schema("observation column \"country\" missing".into()))?;
    let eaf_col = col("eaf_capacity_kt")
        .ok_or_else(|| Error::Schema("observation column \"eaf_capacity_kt\" missing".into()))?;
    let reg_cols: Vec<Option<usize>> = Regressor::ALL.iter().map(|r| col(r.column())).collect();

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let number = |idx: Option<usize>, what: &str| -> Result<Option<f64>> {
            let Some(cell) = idx.and_then(|i| row.get(i)).filter(|c| !c.is_empty()) else {
                return Ok(None);
            };
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(Some(v)),
                _ => Err(Error::Schema(format!(
                    "row {}: {what} value {cell:?} is not a non-negative number",
                    i + 2
                ))),
            }
        };
        let eaf = number(Some(eaf_col), "eaf_capacity_kt")?
            .ok_or_else(|| Error::Schema(format!("row {}: eaf_capacity_kt is required", i + 2)))?;
        let v: Vec<Option<f64>> = Regressor::ALL
            .iter()
            .zip(&reg_cols)
            .map(|(r, &c)| number(c, r.column()))
            .collect::<Result<_>>()?;
        out.push(CountryObservation {
            country: countries::normalize(row.get(country_col).unwrap_or_default()).into_code(),
            eaf_capacity: eaf,
            exports: v[0],
            imports: v[1],
            n_firms: v[2],
            employees: v[3],
            revenue: v[4],
            bof_capacity: v[5],
        });
    }
    Ok(out)
}

/// Coefficient covariance estimator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    /// sigma^2 (X'X)^-1 with n - k degrees of freedom.
    #[default]
    Classical,
    /// Heteroskedasticity-robust sandwich with the n / (n - k) correction (HC1).
    Robust,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub coefficients: Vec<Coefficient>,
    /// Uncentred: 1 - SSR / sum(y^2).
    pub r2: f64,
    /// 1 - (1 - R^2) n / (n - k).
    pub adjusted_r2: f64,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub n_observations: usize,
    pub n_regressors: usize,
    /// Residual standard error.
    pub sigma: f64,
    pub covariance: Covariance,
}

impl RegressionFit {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Inner product of the coefficients with `values`, given in coefficient
    /// order.
    pub fn predict_values(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.coefficients.len() {
            return Err(Error::Domain(format!(
                "{} regressor values supplied, model has {}",
                values.len(),
                self.coefficients.len()
            )));
        }
        Ok(self
            .coefficients
            .iter()
            .zip(values)
            .map(|(c, x)| c.estimate * x)
            .sum())
    }

    /// Predict from a lookup by regressor name.
    pub fn predict_with(&self, lookup: impl Fn(&str) -> Option<f64>) -> Result<f64> {
        let values = self
            .coefficients
            .iter()
            .map(|c| lookup(&c.name).ok_or_else(|| Error::MissingRegressor(c.name.clone())))
            .collect::<Result<Vec<_>>>()?;
        self.predict_values(&values)
    }
}

/// Predicted EAF capacity (kt/yr) for one observation. No intercept.
pub fn predict(fit: &RegressionFit, observation: &CountryObservation) -> Result<f64> {
    fit.predict_with(|name| {
        name.parse::<Regressor>()
            .ok()
            .and_then(|r| observation.value(r))
    })
}

/// Fit EAF capacity on the selected regressors, through the origin.
pub fn fit_no_intercept(
    observations: &[CountryObservation],
    regressors: &[Regressor],
    covariance: Covariance,
) -> Result<RegressionFit> {
    let mut rows = Vec::with_capacity(observations.len());
    for obs in observations {
        let row = regressors
            .iter()
            .map(|&r| {
                obs.value(r).ok_or_else(|| {
                    Error::MissingRegressor(format!("{r} (country {})", obs.country))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let y: Vec<f64> = observations.iter().map(|o| o.eaf_capacity).collect();
    let names: Vec<String> = regressors.iter().map(Regressor::to_string).collect();
    ols_through_origin(&rows, &y, &names, covariance)
}

/// Ordinary least squares without intercept on a row-major design.
///
/// Solved by Householder QR; a column whose component orthogonal to the
/// preceding columns vanishes is reported as collinear.
pub fn ols_through_origin(
    rows: &[Vec<f64>],
    y: &[f64],
    names: &[String],
    covariance: Covariance,
) -> Result<RegressionFit> {
    let n = rows.len();
    let k = names.len();
    if y.len() != n || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Domain(
            "design matrix and response disagree in shape".into(),
        ));
    }
    if k == 0 || n <= k {
        return Err(Error::InsufficientData {
            observations: n,
            regressors: k,
        });
    }
    if rows.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value in regression data".into()));
    }

    let qr = Qr::factor(rows, names)?;
    let mut qty = y.to_vec();
    qr.apply_qt(&mut qty);
    let beta = qr.solve_r(&qty[..k]);

    let fitted: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().zip(&beta).map(|(x, b)| x * b).sum())
        .collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let yty: f64 = y.iter().map(|v| v * v).sum();
    let mut ssr: f64 = residuals.iter().map(|e| e * e).sum();
    // Treat rounding-level residuals as an exact fit.
    if ssr <= 1e-24 * yty {
        ssr = 0.0;
    }
    let df = (n - k) as f64;
    let sigma2 = ssr / df;

    let xtx_inv = qr.xtx_inverse();
    let variances: Vec<f64> = match covariance {
        Covariance::Classical => (0..k).map(|j| sigma2 * xtx_inv[j][j]).collect(),
        Covariance::Robust => {
            // (X'X)^-1 X' diag(e^2) X (X'X)^-1, scaled by n / (n - k).
            let mut meat = vec![vec![0.0; k]; k];
            if ssr > 0.0 {
                for (row, e) in rows.iter().zip(&residuals) {
                    let e2 = e * e;
                    for a in 0..k {
                        for b in 0..k {
                            meat[a][b] += e2 * row[a] * row[b];
                        }
                    }
                }
            }
            let scale = n as f64 / df;
            (0..k)
                .map(|j| {
                    let mut v = 0.0;
                    for a in 0..k {
                        for b in 0..k {
                            v += xtx_inv[j][a] * meat[a][b] * xtx_inv[b][j];
                        }
                    }
                    scale * v
                })
                .collect()
        }
    };

    let coefficients = names
        .iter()
        .zip(&beta)
        .zip(&variances)
        .map(|((name, &estimate), &var)| {
            let std_error = var.max(0.0).sqrt();
            let t_stat = estimate / std_error;
            Coefficient {
                name: name.clone(),
                estimate,
                std_error,
                t_stat,
                p_value: two_sided_t_p(t_stat, df),
            }
        })
        .collect();

    let r2 = if yty > 0.0 { 1.0 - ssr / yty } else { 1.0 };
    Ok(RegressionFit {
        coefficients,
        r2,
        adjusted_r2: 1.0 - (1.0 - r2) * n as f64 / df,
        residuals,
        fitted,
        n_observations: n,
        n_regressors: k,
        sigma: sigma2.sqrt(),
        covariance,
    })
}

/// Householder QR of an n x k matrix (n > k), stored column-major.
struct Qr {
    n: usize,
    k: usize,
    /// Householder vectors below the diagonal, R on and above it.
    a: Vec<Vec<f64>>,
    /// Leading entry of each Householder vector.
    v0: Vec<f64>,
    beta: Vec<f64>,
}

// Householder updates index several arrays with the same row index.
#[allow(clippy::needless_range_loop)]
impl Qr {
    fn factor(rows: &[Vec<f64>], names: &[String]) -> Result<Qr> {
        let n = rows.len();
        let k = names.len();
        let mut a: Vec<Vec<f64>> = (0..k)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        let norms: Vec<f64> = a
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let scale = norms.iter().cloned().fold(0.0, f64::max);
        let tol = 1e-10 * (n.max(k) as f64);
        let mut v0 = vec![0.0; k];
        let mut betas = vec![0.0; k];

        for j in 0..k {
            let tail_norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norms[j] == 0.0 || tail_norm <= tol * norms[j] || tail_norm <= f64::EPSILON * scale {
                return Err(Error::SingularDesign {
                    columns: collinear_set(&a, j, names, norms[j]),
                });
            }
            let alpha = if a[j][j] > 0.0 { -tail_norm } else { tail_norm };
            let lead = a[j][j] - alpha;
            // v = (lead, a[j][j+1..]); H = I - beta v v'
            let vnorm2 = lead * lead + a[j][j + 1..].iter().map(|v| v * v).sum::<f64>();
            let beta = 2.0 / vnorm2;
            for c in j + 1..k {
                let mut dot = lead * a[c][j];
                for i in j + 1..n {
                    dot += a[j][i] * a[c][i];
                }
                let f = beta * dot;
                a[c][j] -= f * lead;
                for i in j + 1..n {
                    let vi = a[j][i];
                    a[c][i] -= f * vi;
                }
            }
            a[j][j] = alpha;
            v0[j] = lead;
            betas[j] = beta;
        }
        Ok(Qr {
            n,
            k,
            a,
            v0,
            beta: betas,
        })
    }

    fn apply_qt(&self, y: &mut [f64]) {
        for j in 0..self.k {
            let mut dot = self.v0[j] * y[j];
            for i in j + 1..self.n {
                dot += self.a[j][i] * y[i];
            }
            let f = self.beta[j] * dot;
            y[j] -= f * self.v0[j];
            for i in j + 1..self.n {
                y[i] -= f * self.a[j][i];
            }
        }
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        self.a[j][i]
    }

    fn solve_r(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for i in (0..self.k).rev() {
            for j in i + 1..self.k {
                x[i] -= self.r(i, j) * x[j];
            }
            x[i] /= self.r(i, i);
        }
        x
    }

    /// (X'X)^-1 = R^-1 R^-T.
    fn xtx_inverse(&self) -> Vec<Vec<f64>> {
        let k = self.k;
        // Columns of R^-1 by back substitution on unit vectors.
        let rinv: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                let mut e = vec![0.0; k];
                e[c] = 1.0;
                self.solve_r(&e)
            })
            .collect();
        let mut out = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in 0..k {
                out[a][b] = (0..k).map(|c| rinv[c][a] * rinv[c][b]).sum();
            }
        }
        out
    }
}

/// Column `j` together with the earlier columns it is a combination of.
fn collinear_set(a: &[Vec<f64>], j: usize, names: &[String], norm: f64) -> Vec<String> {
    if norm == 0.0 || j == 0 {
        return vec![names[j].clone()];
    }
    // a[j][..j] holds Q'x_j on the span of the preceding columns, so the
    // combination weights solve R c = a[j][..j].
    let mut c: Vec<f64> = a[j][..j].to_vec();
    for i in (0..j).rev() {
        for m in i + 1..j {
            c[i] -= a[m][i] * c[m];
        }
        c[i] /= a[i][i];
    }
    let mut out: Vec<String> = (0..j)
        .filter(|&i| {
            let col_norm = a[i][..=i].iter().map(|v| v * v).sum::<f64>().sqrt();
            (c[i] * col_norm).abs() > 1e-8 * norm
        })
        .map(|i| names[i].clone())
        .collect();
    out.push(names[j].clone());
    out
}
