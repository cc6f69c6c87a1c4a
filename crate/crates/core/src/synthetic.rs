//! Seeded synthetic data: logistic random-time-effects panels for recovery
//! experiments, and a research input/output panel shaped like a 28-country,
//! 8-year study for the bundled demo.
//!
//! All draws use ChaCha8 with one stream per unit, so a larger panel built
//! from the same seed shares its first units and its time effects with a
//! smaller one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{load_csv, PanelDataset, VariableRegistry};
use crate::secondstage::{inverse_logistic, Observation};
use crate::Result;

/// Seed of the bundled `synthetic_panel.csv`.
pub const DEFAULT_SEED: u64 = 20180425;

pub const FIRST_YEAR: i32 = 2008;

/// Generating parameters of `r = s / (1 + exp(alpha - beta z + u_t + v))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticTruth {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub omega: f64,
    pub ceiling: f64,
}

impl LogisticTruth {
    /// Published estimates for general research.
    pub fn research_general() -> Self {
        Self {
            alpha: 1.348,
            beta: 37.734,
            sigma: 0.042,
            omega: 0.316,
            ceiling: 2.0,
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Regressor path of one unit: a level in `[0.012, 0.065)` growing about
/// 1.5% a year with 1% noise. Read as GDP per capita in millions of euros
/// this puts `alpha / beta` of the published fit inside the range.
fn regressor_path(rng: &mut ChaCha8Rng, n_times: usize) -> Vec<f64> {
    let level = rng.random_range(0.012..0.065);
    let mid = (n_times as f64 - 1.0) / 2.0;
    (0..n_times)
        .map(|t| level * (1.0 + 0.015 * (t as f64 - mid)) * (1.0 + 0.01 * normal(rng)))
        .collect()
}

/// Simulates `n_units * n_times` observations, years starting at [`FIRST_YEAR`].
pub fn simulate_logistic_panel(
    truth: &LogisticTruth,
    n_units: usize,
    n_times: usize,
    seed: u64,
) -> Vec<Observation> {
    let mut time_rng = ChaCha8Rng::seed_from_u64(seed);
    let time_effects: Vec<f64> = (0..n_times)
        .map(|_| truth.sigma * normal(&mut time_rng))
        .collect();
    let mut obs = Vec::with_capacity(n_units * n_times);
    for c in 0..n_units {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64 + 1);
        let z = regressor_path(&mut rng, n_times);
        for t in 0..n_times {
            let v = truth.omega * normal(&mut rng);
            let w = truth.alpha - truth.beta * z[t] + time_effects[t] + v;
            obs.push(Observation {
                unit: format!("u{c:03}"),
                year: FIRST_YEAR + t as i32,
                score: inverse_logistic(w, truth.ceiling),
                regressors: vec![z[t]],
            });
        }
    }
    obs
}

pub const RESEARCH_UNITS: [&str; 28] = [
    "AT", "BE", "BG", "HR", "CY", "CZ", "DK", "EE", "FI", "FR", "DE", "EL", "HU", "IE", "IT",
    "LV", "LT", "LU", "MT", "NL", "PL", "PT", "RO", "SK", "SI", "ES", "SE", "UK",
];

/// CSV text of a synthetic research panel: 28 units, 2007 to 2014, columns
/// TERD, SAE, CIT, EPO, GDP. Outputs depend on previous-year inputs (the
/// first year reuses its own) and on a unit efficiency that rises with GDP
/// per capita.
pub fn research_panel_csv(seed: u64) -> String {
    const YEARS: usize = 8;
    const START: i32 = 2007;
    let mut out = String::from("unit,year,TERD,SAE,CIT,EPO,GDP\n");
    for (c, unit) in RESEARCH_UNITS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1000 + c as u64);
        let mut gdp = regressor_path(&mut rng, YEARS);
        if *unit == "LU" {
            gdp.iter_mut().for_each(|g| *g *= 2.2);
        }
        let population = rng.random_range(0.4f64.ln()..82.0f64.ln()).exp();
        let rd_share = rng.random_range(0.005..0.032);
        let labour_cost = rng.random_range(0.8..1.6);
        let efficiency = (18.0 * (gdp[YEARS / 2].min(0.08) - 0.035) + 0.25 * normal(&mut rng)).exp();
        let basic_tilt = (0.5 * normal(&mut rng)).exp();
        let applied_tilt = (0.5 * normal(&mut rng) + 25.0 * (gdp[YEARS / 2].min(0.08) - 0.035)).exp();

        let mut terd = Vec::with_capacity(YEARS);
        let mut sae = Vec::with_capacity(YEARS);
        for g in &gdp {
            let t = population * g * 1e6 * rd_share * (1.0 + 0.03 * normal(&mut rng));
            terd.push(t);
            sae.push(t / (g * 3000.0 * labour_cost) * (1.0 + 0.03 * normal(&mut rng)));
        }
        for k in 0..YEARS {
            let prev = k.saturating_sub(1);
            let base = (terd[prev] * sae[prev]).sqrt() * efficiency;
            let cit = 40.0 * base * basic_tilt * (0.06 * normal(&mut rng)).exp();
            let epo = 0.15 * base * applied_tilt * (0.08 * normal(&mut rng)).exp();
            out.push_str(&format!(
                "{unit},{},{:.3},{:.3},{cit:.1},{epo:.3},{:.6}\n",
                START + k as i32,
                terd[k],
                sae[k],
                gdp[k]
            ));
        }
    }
    out
}

pub fn research_panel(seed: u64) -> Result<PanelDataset> {
    load_csv(research_panel_csv(seed).as_bytes(), &VariableRegistry::research_default())
}
