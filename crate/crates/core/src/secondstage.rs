//! Second-stage regression of bounded efficiency scores.
//!
//! Scores `r` in `(0, s)` follow `r = s / (1 + exp(alpha - z'beta + u_t + v))`
//! with random time effects `u_t ~ N(0, sigma^2)` and idiosyncratic errors
//! `v ~ N(0, omega^2)`. Taking `w = ln(s / r - 1)` gives the linear
//! random-effects model `w = alpha - z'beta + u_t + v`, estimated here by
//! feasible GLS with moment estimates of the variance components where the
//! grouping dimension is the year.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::PanelDataset;
use crate::dea::ScoreRecord;
use crate::{Error, Result};

/// `ln(s / r - 1)`, defined for `0 < r < s`.
pub fn logit_transform(r: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) || !(r > 0.0 && r < s) {
        return Err(Error::Domain(format!("score {r} is outside (0, {s})")));
    }
    Ok((s / r - 1.0).ln())
}

/// `s / (1 + e^w)`, the inverse of [`logit_transform`].
pub fn inverse_logistic(w: f64, s: f64) -> f64 {
    if w > 0.0 {
        let e = (-w).exp();
        s * e / (1.0 + e)
    } else {
        s / (1.0 + w.exp())
    }
}

pub fn t_statistic(estimate: f64, se: f64) -> f64 {
    estimate / se
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    /// Upper bound `s` of the score range.
    #[serde(default = "default_ceiling")]
    pub ceiling: f64,
    pub regressors: Vec<String>,
    #[serde(default)]
    pub excluded: BTreeSet<String>,
}

fn default_ceiling() -> f64 {
    2.0
}

impl RegressionSpec {
    pub fn new(ceiling: f64, regressors: &[&str]) -> Self {
        Self {
            ceiling,
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            excluded: BTreeSet::new(),
        }
    }

    pub fn excluding(mut self, units: &[&str]) -> Self {
        self.excluded.extend(units.iter().map(|s| s.to_string()));
        self
    }
}

/// One (unit, year) row entering the regression.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub unit: String,
    pub year: i32,
    pub score: f64,
    pub regressors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub model: String,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub se_alpha: f64,
    pub se_beta: Vec<f64>,
    pub t_alpha: f64,
    pub t_beta: Vec<f64>,
    pub sigma: f64,
    pub omega: f64,
    pub n_obs: usize,
    pub n_units: usize,
    pub n_times: usize,
    pub excluded: Vec<String>,
    pub warnings: Vec<String>,
}

impl RegressionFit {
    /// Mean score curve `s / (1 + exp(alpha - beta_1 z))` with the time effect
    /// at zero. Only the first regressor varies; any others are held at zero.
    pub fn fitted_curve(&self, ceiling: f64, grid: &[f64]) -> Vec<(f64, f64)> {
        let b = self.beta.first().copied().unwrap_or(0.0);
        grid.iter()
            .map(|&z| (z, inverse_logistic(self.alpha - b * z, ceiling)))
            .collect()
    }
}

/// Free-function form of [`RegressionFit::fitted_curve`].
pub fn fitted_curve(fit: &RegressionFit, ceiling: f64, grid: &[f64]) -> Vec<(f64, f64)> {
    fit.fitted_curve(ceiling, grid)
}

/// Linear-model estimates on the transformed scale: coefficients on `[1, z]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEstimate {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residual_variance: f64,
}

fn ols(x: &DMatrix<f64>, y: &DVector<f64>, df: usize) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let xtx = x.transpose() * x;
    let chol = xtx.clone().cholesky().ok_or_else(|| {
        Error::Rank("regressor matrix is rank deficient".to_string())
    })?;
    let coef = chol.solve(&(x.transpose() * y));
    let resid = y - x * &coef;
    let ssr = resid.dot(&resid);
    let s2 = if df > 0 { ssr / df as f64 } else { f64::NAN };
    Ok((coef, chol.inverse(), s2))
}

fn design(obs: &[Observation], k: usize, s: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = obs.len();
    let mut x = DMatrix::zeros(n, k + 1);
    let mut w = DVector::zeros(n);
    for (i, o) in obs.iter().enumerate() {
        if o.regressors.len() != k {
            return Err(Error::Input(format!(
                "({}, {}) has {} regressors, expected {k}",
                o.unit,
                o.year,
                o.regressors.len()
            )));
        }
        w[i] = logit_transform(o.score, s).map_err(|_| {
            Error::Domain(format!(
                "score {} of ({}, {}) is outside (0, {s})",
                o.score, o.unit, o.year
            ))
        })?;
        x[(i, 0)] = 1.0;
        for (j, v) in o.regressors.iter().enumerate() {
            x[(i, j + 1)] = *v;
        }
    }
    Ok((x, w))
}

/// Pooled least squares of `ln(s/r - 1)` on `[1, z]`.
pub fn pooled_ols(obs: &[Observation], ceiling: f64) -> Result<LinearEstimate> {
    let k = obs.first().map_or(0, |o| o.regressors.len());
    if obs.len() < k + 2 {
        return Err(Error::Rank(format!(
            "{} observations for {} coefficients",
            obs.len(),
            k + 1
        )));
    }
    let (x, w) = design(obs, k, ceiling)?;
    let (coef, inv, s2) = ols(&x, &w, obs.len() - k - 1)?;
    Ok(LinearEstimate {
        coefficients: coef.iter().copied().collect(),
        std_errors: (0..=k).map(|j| (s2 * inv[(j, j)]).sqrt()).collect(),
        residual_variance: s2,
    })
}

/// Variance components and GLS estimates on the transformed scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FglsEstimate {
    pub linear: LinearEstimate,
    pub sigma2: f64,
    pub omega2: f64,
    pub n_times: usize,
    pub warnings: Vec<String>,
}

/// Random-time-effects FGLS on pre-assembled observations.
///
/// `omega^2` comes from the within-year regression, `sigma^2` from the
/// between-year regression minus `omega^2 / n_bar` (harmonic mean of year
/// sizes), truncated at zero. The GLS step quasi-demeans each year with
/// `theta_t = 1 - sqrt(omega^2 / (omega^2 + n_t sigma^2))`; standard errors
/// use the residual variance with `N - K - 1` degrees of freedom.
pub fn fgls(obs: &[Observation], ceiling: f64) -> Result<FglsEstimate> {
    let n = obs.len();
    let k = obs.first().map_or(0, |o| o.regressors.len());
    if n < k + 2 {
        return Err(Error::Rank(format!("{n} observations for {} coefficients", k + 1)));
    }
    let (x, w) = design(obs, k, ceiling)?;

    let mut groups: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, o) in obs.iter().enumerate() {
        groups.entry(o.year).or_default().push(i);
    }
    let t = groups.len();
    let mut warnings = Vec::new();

    // Year means of w and of every design column.
    let mut w_bar = DVector::zeros(t);
    let mut x_bar = DMatrix::zeros(t, k + 1);
    let mut sizes = Vec::with_capacity(t);
    for (g, idx) in groups.values().enumerate() {
        let m = idx.len() as f64;
        sizes.push(idx.len());
        w_bar[g] = idx.iter().map(|&i| w[i]).sum::<f64>() / m;
        for j in 0..=k {
            x_bar[(g, j)] = idx.iter().map(|&i| x[(i, j)]).sum::<f64>() / m;
        }
    }
    let group_of: Vec<usize> = {
        let mut v = vec![0; n];
        for (g, idx) in groups.values().enumerate() {
            for &i in idx {
                v[i] = g;
            }
        }
        v
    };

    // Within-year regression.
    let omega2 = if k == 0 {
        let ssr: f64 = (0..n).map(|i| (w[i] - w_bar[group_of[i]]).powi(2)).sum();
        let df = n.checked_sub(t).filter(|d| *d > 0).ok_or_else(|| {
            Error::Rank("no within-year degrees of freedom".to_string())
        })?;
        ssr / df as f64
    } else {
        let df = n
            .checked_sub(t + k)
            .filter(|d| *d > 0)
            .ok_or_else(|| Error::Rank(format!("{n} observations in {t} years leave no within-year degrees of freedom for {k} regressors")))?;
        let mut xw = DMatrix::zeros(n, k);
        let mut ww = DVector::zeros(n);
        for i in 0..n {
            let g = group_of[i];
            ww[i] = w[i] - w_bar[g];
            for j in 0..k {
                xw[(i, j)] = x[(i, j + 1)] - x_bar[(g, j + 1)];
            }
        }
        ols(&xw, &ww, df)
            .map_err(|_| Error::Rank("regressors have no within-year variation".to_string()))?
            .2
    };
    if !(omega2 > 0.0) {
        return Err(Error::Numerical(format!(
            "idiosyncratic variance estimate {omega2} is not positive"
        )));
    }

    // Between-year regression.
    let sigma2 = if t > k + 1 {
        let (_, _, between) = ols(&x_bar, &w_bar, t - k - 1)?;
        let n_bar = t as f64 / sizes.iter().map(|&m| 1.0 / m as f64).sum::<f64>();
        let est = between - omega2 / n_bar;
        if est < 0.0 {
            warnings.push(format!(
                "time-effect variance estimate {est:.6e} was negative and truncated to 0"
            ));
            0.0
        } else {
            est
        }
    } else {
        warnings.push(format!(
            "{t} years cannot identify the time-effect variance with {k} regressors; set to 0"
        ));
        0.0
    };
    for msg in &warnings {
        warn!("{msg}");
    }

    // Quasi-demeaned GLS.
    let theta: Vec<f64> = sizes
        .iter()
        .map(|&m| 1.0 - (omega2 / (omega2 + m as f64 * sigma2)).sqrt())
        .collect();
    let mut xs = x.clone();
    let mut ws = w.clone();
    for i in 0..n {
        let g = group_of[i];
        ws[i] -= theta[g] * w_bar[g];
        for j in 0..=k {
            xs[(i, j)] -= theta[g] * x_bar[(g, j)];
        }
    }
    let (coef, inv, s2) = ols(&xs, &ws, n - k - 1)?;
    Ok(FglsEstimate {
        linear: LinearEstimate {
            coefficients: coef.iter().copied().collect(),
            std_errors: (0..=k).map(|j| (s2 * inv[(j, j)]).sqrt()).collect(),
            residual_variance: s2,
        },
        sigma2,
        omega2,
        n_times: t,
        warnings,
    })
}

/// Fits the random-time-effects logistic model on assembled observations
/// and reports coefficients on the score-equation sign convention, where a
/// positive `beta` means the score rises with the regressor.
pub fn fit_observations(model: &str, obs: &[Observation], ceiling: f64) -> Result<RegressionFit> {
    let est = fgls(obs, ceiling)?;
    let coef = &est.linear.coefficients;
    let se = &est.linear.std_errors;
    let alpha = coef[0];
    let beta: Vec<f64> = coef[1..].iter().map(|b| -b).collect();
    let se_beta = se[1..].to_vec();
    let t_beta = beta.iter().zip(&se_beta).map(|(b, s)| t_statistic(*b, *s)).collect();
    let units: BTreeSet<&str> = obs.iter().map(|o| o.unit.as_str()).collect();
    Ok(RegressionFit {
        model: model.to_string(),
        alpha,
        beta,
        se_alpha: se[0],
        se_beta,
        t_alpha: t_statistic(alpha, se[0]),
        t_beta,
        sigma: est.sigma2.sqrt(),
        omega: est.omega2.sqrt(),
        n_obs: obs.len(),
        n_units: units.len(),
        n_times: est.n_times,
        excluded: Vec::new(),
        warnings: est.warnings,
    })
}

/// Joins a score table with regressors from `data` and fits the model.
/// Excluded units listed in `spec` but absent from the scores produce a
/// warning on the fit.
pub fn fit_random_time_effects(
    model: &str,
    scores: &[ScoreRecord],
    data: &PanelDataset,
    spec: &RegressionSpec,
) -> Result<RegressionFit> {
    if !(spec.ceiling > 0.0) {
        return Err(Error::Config(format!("score ceiling {} must be positive", spec.ceiling)));
    }
    for name in &spec.regressors {
        if data.registry().get(name).is_none() {
            return Err(Error::Config(format!("regressor `{name}` is not a registered variable")));
        }
    }
    let mut obs = Vec::with_capacity(scores.len());
    for ps in scores {
        let unit = &ps.unit;
        if spec.excluded.contains(unit) {
            continue;
        }
        let regressors = spec
            .regressors
            .iter()
            .map(|name| {
                data.value(unit, ps.year, name).ok_or_else(|| {
                    Error::Input(format!("regressor {name} missing for ({unit}, {})", ps.year))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        obs.push(Observation {
            unit: unit.clone(),
            year: ps.year,
            score: ps.r,
            regressors,
        });
    }
    let mut bad = obs
        .iter()
        .filter(|o| !(o.score > 0.0 && o.score < spec.ceiling))
        .peekable();
    if bad.peek().is_some() {
        let list: Vec<String> = bad
            .map(|o| format!("({}, {}) r = {}", o.unit, o.year, o.score))
            .collect();
        return Err(Error::Domain(format!(
            "scores outside (0, {}): {}",
            spec.ceiling,
            list.join("; ")
        )));
    }

    let mut fit = fit_observations(model, &obs, spec.ceiling)?;
    fit.excluded = spec.excluded.iter().cloned().collect();
    for unit in &spec.excluded {
        if !scores.iter().any(|s| &s.unit == unit) {
            let msg = format!("excluded unit `{unit}` does not appear in the scores");
            warn!("{msg}");
            fit.warnings.push(msg);
        }
    }
    Ok(fit)
}
