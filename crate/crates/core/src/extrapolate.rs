//! Firm-ecosystem extrapolation from planned EAF capacity.
//!
//! Additional firms per country are planned capacity divided by the firm
//! coefficient of the capacity regression. Coefficient uncertainty is carried
//! by Monte Carlo: one normal draw of the coefficient per iteration, shared by
//! all countries. Revenue and headcount of the additional firms are drawn by
//! inverse-transform sampling from empirical distributions of existing firms
//! and summed per iteration.

use std::collections::BTreeMap;
use std::io::Read;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::countries;
use crate::error::{Error, Result};
use crate::firms::FirmPopulation;
use crate::seed;
use crate::stats::{mean, percentile_sorted, sample_sd};

const COEFFICIENT_STREAM: u64 = 0xC0EF;
const POPULATION_STREAM: u64 = 0x909;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityPlan {
    pub country: String,
    /// kt/yr.
    pub planned_eaf: f64,
}

impl CapacityPlan {
    pub fn new(country: impl Into<String>, planned_eaf: f64) -> Result<Self> {
        if !(planned_eaf >= 0.0 && planned_eaf.is_finite()) {
            return Err(Error::Domain(format!(
                "planned EAF capacity {planned_eaf} must be a non-negative number"
            )));
        }
        Ok(CapacityPlan {
            country: country.into(),
            planned_eaf,
        })
    }
}

/// Read `country,planned_eaf_kt` rows.
pub fn parse_capacity_plan<R: Read>(source: R) -> Result<Vec<CapacityPlan>> {
    #[derive(Deserialize)]
    struct Row {
        country: String,
        planned_eaf_kt: f64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    reader
        .deserialize::<Row>()
        .map(|row| {
            let row = row?;
            CapacityPlan::new(
                countries::normalize(&row.country).into_code(),
                row.planned_eaf_kt,
            )
        })
        .collect()
}

/// Right-continuous step CDF of a finite sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return Err(Error::Empty(
                "empirical CDF needs at least one value".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("empirical CDF values must be finite".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sorted sample.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fraction of the sample at or below `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.values.partition_point(|v| *v <= x) as f64 / self.values.len() as f64
    }

    /// Smallest sample value `v` with `cdf(v) >= u`, for `u` in [0, 1).
    pub fn inverse(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::Domain(format!("uniform variate {u} outside [0, 1)")));
        }
        Ok(self.inverse_unchecked(u))
    }

    fn inverse_unchecked(&self, u: f64) -> f64 {
        let n = self.values.len();
        // index i qualifies iff (i + 1) / n >= u
        let mut i = ((u * n as f64).ceil() as usize)
            .saturating_sub(1)
            .min(n - 1);
        while i > 0 && (i as f64) / (n as f64) >= u {
            i -= 1;
        }
        while ((i + 1) as f64) / (n as f64) < u {
            i += 1;
        }
        self.values[i]
    }
}

/// Generalised inverse of `cdf` at `u`.
pub fn inverse_sample(cdf: &EmpiricalCdf, u: f64) -> Result<f64> {
    cdf.inverse(u)
}

/// Firm coefficient (kt/yr of EAF capacity per firm) and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirmCoefficient {
    pub estimate: f64,
    pub sd: f64,
}

impl FirmCoefficient {
    /// Reference coefficient: 79 kt/yr of EAF capacity per firm, SD 11.
    pub const PUBLISHED: FirmCoefficient = FirmCoefficient {
        estimate: 79.0,
        sd: 11.0,
    };

    fn validate(&self) -> Result<()> {
        if !(self.estimate > 0.0 && self.estimate.is_finite()) {
            return Err(Error::Domain(format!(
                "firm coefficient {} must be positive",
                self.estimate
            )));
        }
        if !(self.sd >= 0.0 && self.sd.is_finite()) {
            return Err(Error::Domain(format!(
                "coefficient SD {} must be non-negative",
                self.sd
            )));
        }
        Ok(())
    }
}

/// `n_draws` normal draws of the coefficient; non-positive draws are redrawn.
pub fn coefficient_draws(coef: FirmCoefficient, n_draws: usize, seed: u64) -> Result<Vec<f64>> {
    coef.validate()?;
    if n_draws == 0 {
        return Err(Error::Domain(
            "at least one coefficient draw is required".into(),
        ));
    }
    let normal = Normal::new(coef.estimate, coef.sd).expect("validated parameters");
    let mut rng = seed::rng(seed, &[COEFFICIENT_STREAM]);
    Ok((0..n_draws)
        .map(|_| loop {
            let b = normal.sample(&mut rng);
            if b > 0.0 {
                break b;
            }
        })
        .collect())
}

/// Additional firms implied by one plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompanyEstimate {
    /// planned / coefficient.
    pub point: f64,
    /// `point` rounded half up.
    pub rounded: u64,
    /// Mean of planned / draw over the coefficient draws.
    pub mean: f64,
    pub sd: f64,
    #[serde(skip)]
    pub draws: Vec<f64>,
}

pub fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor() as u64
}

/// Company estimate for `planned_eaf` given pre-drawn coefficients.
pub fn companies_from_draws(planned_eaf: f64, estimate: f64, draws: &[f64]) -> CompanyEstimate {
    let per_draw: Vec<f64> = draws.iter().map(|b| planned_eaf / b).collect();
    let point = planned_eaf / estimate;
    CompanyEstimate {
        point,
        rounded: round_half_up(point),
        mean: mean(&per_draw),
        sd: sample_sd(&per_draw),
        draws: per_draw,
    }
}

/// Additional firms for one plan with its own coefficient draws.
pub fn additional_companies(
    plan: &CapacityPlan,
    coef: FirmCoefficient,
    n_draws: usize,
    seed: u64,
) -> Result<CompanyEstimate> {
    CapacityPlan::new(plan.country.clone(), plan.planned_eaf)?;
    let draws = coefficient_draws(coef, n_draws, seed)?;
    Ok(companies_from_draws(
        plan.planned_eaf,
        coef.estimate,
        &draws,
    ))
}

/// Median and quartiles of a simulated total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Quartiles {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Quartiles {
            median: percentile_sorted(&sorted, 50.0),
            q25: percentile_sorted(&sorted, 25.0),
            q75: percentile_sorted(&sorted, 75.0),
        }
    }

    const ZERO: Quartiles = Quartiles {
        median: 0.0,
        q25: 0.0,
        q75: 0.0,
    };
}

/// How revenue and headcount of one simulated firm relate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Separate uniform variates per variable.
    #[default]
    Independent,
    /// One uniform variate drives both, i.e. comonotone by rank.
    RankCoupled,
}

/// Per-iteration revenue and headcount totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationSimulation {
    pub revenue_sums: Vec<f64>,
    pub employee_sums: Vec<f64>,
}

impl PopulationSimulation {
    pub fn revenue(&self) -> Quartiles {
        Quartiles::of(&self.revenue_sums)
    }

    pub fn employees(&self) -> Quartiles {
        Quartiles::of(&self.employee_sums)
    }
}

/// Draw `iterations` populations of `n_companies` firms and total them.
///
/// Iteration `i` uses its own substream of `seed`, so the output does not
/// depend on how iterations are scheduled across threads.
pub fn simulate_population(
    n_companies: u64,
    revenue: &EmpiricalCdf,
    employees: &EmpiricalCdf,
    iterations: usize,
    seed: u64,
    mode: SamplingMode,
) -> PopulationSimulation {
    let (revenue_sums, employee_sums) = (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng(seed, &[POPULATION_STREAM, i as u64]);
            let (mut rev, mut emp) = (0.0, 0.0);
            for _ in 0..n_companies {
                let u: f64 = rng.gen();
                let v = match mode {
                    SamplingMode::Independent => rng.gen(),
                    SamplingMode::RankCoupled => u,
                };
                rev += revenue.inverse_unchecked(u);
                emp += employees.inverse_unchecked(v);
            }
            (rev, emp)
        })
        .unzip();
    PopulationSimulation {
        revenue_sums,
        employee_sums,
    }
}

/// Revenue and headcount CDFs per country with a pooled fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmDistributions {
    pooled_revenue: EmpiricalCdf,
    pooled_employees: EmpiricalCdf,
    by_country: BTreeMap<String, (EmpiricalCdf, EmpiricalCdf)>,
}

impl FirmDistributions {
    /// Countries with at least `min_country_firms` firms reporting both
    /// variables get their own CDFs (set the threshold to `usize::MAX` to
    /// always pool). Missing values are skipped, never imputed.
    pub fn from_population(population: &FirmPopulation, min_country_firms: usize) -> Result<Self> {
        let rev: Vec<f64> = population.records().filter_map(|f| f.revenue).collect();
        let emp: Vec<f64> = population.records().filter_map(|f| f.employees).collect();
        let pooled_revenue =
            EmpiricalCdf::new(rev).map_err(|_| Error::Empty("no firm reports revenue".into()))?;
        let pooled_employees =
            EmpiricalCdf::new(emp).map_err(|_| Error::Empty("no firm reports employees".into()))?;

        let mut grouped: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for f in population.records() {
            let g = grouped.entry(&f.country).or_default();
            g.0.extend(f.revenue);
            g.1.extend(f.employees);
        }
        let by_country = grouped
            .into_iter()
            .filter(|(_, (r, e))| r.len().min(e.len()) >= min_country_firms)
            .map(|(c, (r, e))| {
                Ok((
                    c.to_string(),
                    (EmpiricalCdf::new(r)?, EmpiricalCdf::new(e)?),
                ))
            })
            .collect::<Result<_>>()?;
        Ok(FirmDistributions {
            pooled_revenue,
            pooled_employees,
            by_country,
        })
    }

    pub fn pooled(revenue: EmpiricalCdf, employees: EmpiricalCdf) -> Self {
        FirmDistributions {
            pooled_revenue: revenue,
            pooled_employees: employees,
            by_country: BTreeMap::new(),
        }
    }

    /// (revenue, employees, country-specific?)
    pub fn for_country(&self, country: &str) -> (&EmpiricalCdf, &EmpiricalCdf, bool) {
        match self.by_country.get(country) {
            Some((r, e)) => (r, e, true),
            None => (&self.pooled_revenue, &self.pooled_employees, false),
        }
    }
}

/// Whether countries share one coefficient draw per iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawSharing {
    #[default]
    Shared,
    /// Each country draws its own coefficients; for comparison only.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtrapolationOptions {
    pub coefficient_draws: usize,
    pub population_iterations: usize,
    pub sampling: SamplingMode,
    pub sharing: DrawSharing,
}

impl Default for ExtrapolationOptions {
    fn default() -> Self {
        ExtrapolationOptions {
            coefficient_draws: 1000,
            population_iterations: 1000,
            sampling: SamplingMode::Independent,
            sharing: DrawSharing::Shared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtrapolationResult {
    pub country: String,
    pub planned_eaf: f64,
    pub companies: CompanyEstimate,
    /// USD.
    pub revenue: Quartiles,
    /// Persons.
    pub employees: Quartiles,
    pub country_specific_cdf: bool,
    #[serde(skip)]
    pub simulation: PopulationSimulation,
}

/// Per-country extrapolation for every plan, in input order.
///
/// The number of simulated firms is the rounded point estimate.
pub fn extrapolate(
    plans: &[CapacityPlan],
    coef: FirmCoefficient,
    distributions: &FirmDistributions,
    options: &ExtrapolationOptions,
    seed: u64,
) -> Result<Vec<ExtrapolationResult>> {
    let shared = coefficient_draws(coef, options.coefficient_draws, seed)?;
    plans
        .iter()
        .map(|plan| {
            CapacityPlan::new(plan.country.clone(), plan.planned_eaf)?;
            let country_seed = seed::derive(seed, &[seed::tag(&plan.country)]);
            let companies = match options.sharing {
                DrawSharing::Shared => {
                    companies_from_draws(plan.planned_eaf, coef.estimate, &shared)
                }
                DrawSharing::Independent => {
                    additional_companies(plan, coef, options.coefficient_draws, country_seed)?
                }
            };
            let (rev, emp, specific) = distributions.for_country(&plan.country);
            let simulation = simulate_population(
                companies.rounded,
                rev,
                emp,
                options.population_iterations,
                country_seed,
                options.sampling,
            );
            let (revenue, employees) = if companies.rounded == 0 {
                (Quartiles::ZERO, Quartiles::ZERO)
            } else {
                (simulation.revenue(), simulation.employees())
            };
            Ok(ExtrapolationResult {
                country: plan.country.clone(),
                planned_eaf: plan.planned_eaf,
                companies,
                revenue,
                employees,
                country_specific_cdf: specific,
                simulation,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtrapolationTotals {
    pub planned_eaf: f64,
    pub companies: CompanyEstimate,
    pub revenue: Quartiles,
    pub employees: Quartiles,
}

/// Totals across countries: company counts are summed per coefficient draw
/// before taking mean and SD, revenue and headcount per iteration before
/// taking quartiles.
pub fn aggregate_totals(results: &[ExtrapolationResult]) -> Result<ExtrapolationTotals> {
    let first = results
        .first()
        .ok_or_else(|| Error::Empty("no per-country results to aggregate".into()))?;
    let n_draws = first.companies.draws.len();
    let n_iter = first.simulation.revenue_sums.len();
    if results
        .iter()
        .any(|r| r.companies.draws.len() != n_draws || r.simulation.revenue_sums.len() != n_iter)
    {
        return Err(Error::Domain(
            "per-country results were produced with different draw counts".into(),
        ));
    }
    let mut company_draws = vec![0.0; n_draws];
    let mut revenue = vec![0.0; n_iter];
    let mut employees = vec![0.0; n_iter];
    let mut point = 0.0;
    let mut planned = 0.0;
    for r in results {
        planned += r.planned_eaf;
        point += r.companies.point;
        for (acc, d) in company_draws.iter_mut().zip(&r.companies.draws) {
            *acc += d;
        }
        for (acc, v) in revenue.iter_mut().zip(&r.simulation.revenue_sums) {
            *acc += v;
        }
        for (acc, v) in employees.iter_mut().zip(&r.simulation.employee_sums) {
            *acc += v;
        }
    }
    Ok(ExtrapolationTotals {
        planned_eaf: planned,
        companies: CompanyEstimate {
            point,
            rounded: round_half_up(point),
            mean: mean(&company_draws),
            sd: sample_sd(&company_draws),
            draws: company_draws,
        },
        revenue: if n_iter == 0 {
            Quartiles::ZERO
        } else {
            Quartiles::of(&revenue)
        },
        employees: if n_iter == 0 {
            Quartiles::ZERO
        } else {
            Quartiles::of(&employees)
        },
    })
}
