//! Chebyshev-distance DEA with super-efficiency, and the classical CCR
//! multiplier model.
//!
//! For unit `c` of a frontier the score solves
//!
//! ```text
//! maximize   delta
//! subject to y_c' mu >= 1 + 2 delta
//!            x_c' nu <= 1 - 2 delta
//!            Y_{-c} mu - X_{-c} nu <= 0
//!            mu, nu >= 0,  delta free
//! ```
//!
//! and reports `r = 1 + 2 delta*`. Units with `r >= 1` are efficient. The
//! evaluated unit never enters its own envelopment block, so efficient units
//! are ranked as well.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{slice_for_frontier, DeaConfig, DroppedUnit, FrontierSlice, PanelDataset};
use crate::exec::Execution;
use crate::linprog::{self, LpProblem, LpStatus, RowSense};
use crate::{Error, Result};

/// Strictly positive input and output matrices for one comparison set.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierInstance {
    units: Vec<String>,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    input_scale: Vec<f64>,
    output_scale: Vec<f64>,
}

impl FrontierInstance {
    pub fn new(units: Vec<String>, inputs: Vec<Vec<f64>>, outputs: Vec<Vec<f64>>) -> Result<Self> {
        let c = units.len();
        if c < 2 {
            return Err(Error::Model(format!(
                "frontier has {c} unit(s); at least 2 are required"
            )));
        }
        if inputs.len() != c || outputs.len() != c {
            return Err(Error::Model(format!(
                "{c} units but {} input rows and {} output rows",
                inputs.len(),
                outputs.len()
            )));
        }
        let n_in = inputs[0].len();
        let n_out = outputs[0].len();
        if n_in == 0 || n_out == 0 {
            return Err(Error::Model("frontier needs at least one input and one output".into()));
        }
        for (k, (x, y)) in inputs.iter().zip(&outputs).enumerate() {
            if x.len() != n_in || y.len() != n_out {
                return Err(Error::Model(format!("row {k} has inconsistent width")));
            }
            if let Some(v) = x.iter().chain(y).find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::Model(format!(
                    "unit `{}` has non-positive or non-finite value {v}",
                    units[k]
                )));
            }
        }
        let col_max = |m: &[Vec<f64>], j: usize| m.iter().map(|r| r[j]).fold(0.0, f64::max);
        let input_scale = (0..n_in).map(|j| col_max(&inputs, j)).collect();
        let output_scale = (0..n_out).map(|j| col_max(&outputs, j)).collect();
        Ok(Self {
            units,
            inputs,
            outputs,
            input_scale,
            output_scale,
        })
    }

    /// Builds an instance with generated labels `u0, u1, ...`.
    pub fn unlabeled(inputs: Vec<Vec<f64>>, outputs: Vec<Vec<f64>>) -> Result<Self> {
        let units = (0..inputs.len()).map(|k| format!("u{k}")).collect();
        Self::new(units, inputs, outputs)
    }

    pub fn from_slice(slice: &FrontierSlice) -> Result<Self> {
        Self::new(slice.units.clone(), slice.inputs.clone(), slice.outputs.clone())
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.outputs
    }

    pub fn n_inputs(&self) -> usize {
        self.input_scale.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_scale.len()
    }

    fn scaled_input(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.inputs[k].iter().zip(&self.input_scale).map(|(v, s)| v / s)
    }

    fn scaled_output(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.outputs[k].iter().zip(&self.output_scale).map(|(v, s)| v / s)
    }

    fn check_unit(&self, c: usize) -> Result<()> {
        if c >= self.len() {
            return Err(Error::Model(format!(
                "unit index {c} out of range for frontier of {}",
                self.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Efficient,
    Inefficient,
}

impl Classification {
    pub fn from_score(r: f64) -> Self {
        if r >= 1.0 {
            Classification::Efficient
        } else {
            Classification::Inefficient
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Efficient => "efficient",
            Classification::Inefficient => "inefficient",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeaScore {
    pub unit: String,
    pub delta: f64,
    /// `1 + 2 * delta`.
    pub r: f64,
    /// Output weights on the original data scale.
    pub output_weights: Vec<f64>,
    /// Input weights on the original data scale.
    pub input_weights: Vec<f64>,
    pub classification: Classification,
    pub status: LpStatus,
    pub iterations: usize,
}

/// Builds the Chebyshev-distance LP for unit `c` on column-normalized data.
/// Variable layout: `[mu (J), nu (I), delta+, delta-]`.
pub fn chebyshev_problem(instance: &FrontierInstance, c: usize) -> Result<LpProblem> {
    instance.check_unit(c)?;
    let (j_out, i_in) = (instance.n_outputs(), instance.n_inputs());
    let n = j_out + i_in + 2;
    let (dp, dm) = (j_out + i_in, j_out + i_in + 1);

    let mut objective = vec![0.0; n];
    objective[dp] = 1.0;
    objective[dm] = -1.0;
    let mut lp = LpProblem::maximize(objective);

    let mut row = vec![0.0; n];
    for (slot, v) in row.iter_mut().zip(instance.scaled_output(c)) {
        *slot = v;
    }
    row[dp] = -2.0;
    row[dm] = 2.0;
    lp.add_constraint(row, RowSense::Ge, 1.0);

    let mut row = vec![0.0; n];
    for (slot, v) in row[j_out..].iter_mut().zip(instance.scaled_input(c)) {
        *slot = v;
    }
    row[dp] = 2.0;
    row[dm] = -2.0;
    lp.add_constraint(row, RowSense::Le, 1.0);

    for k in (0..instance.len()).filter(|&k| k != c) {
        lp.add_constraint(envelopment_row(instance, k, n), RowSense::Le, 0.0);
    }
    Ok(lp)
}

fn envelopment_row(instance: &FrontierInstance, k: usize, width: usize) -> Vec<f64> {
    let j_out = instance.n_outputs();
    let mut row = vec![0.0; width];
    for (slot, v) in row.iter_mut().zip(instance.scaled_output(k)) {
        *slot = v;
    }
    for (slot, v) in row[j_out..].iter_mut().zip(instance.scaled_input(k)) {
        *slot = -v;
    }
    row
}

/// Chebyshev-distance super-efficiency score of unit `c`.
pub fn chebyshev_score(instance: &FrontierInstance, c: usize) -> Result<DeaScore> {
    let lp = chebyshev_problem(instance, c)?;
    let sol = linprog::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::UnexpectedLp {
            context: format!("Chebyshev score of unit `{}`", instance.units[c]),
            status: sol.status,
            problem: Box::new(lp),
        });
    }
    let (j_out, i_in) = (instance.n_outputs(), instance.n_inputs());
    let delta = sol.x[j_out + i_in] - sol.x[j_out + i_in + 1];
    let r = 1.0 + 2.0 * delta;
    let output_weights = sol.x[..j_out]
        .iter()
        .zip(&instance.output_scale)
        .map(|(w, s)| w / s)
        .collect();
    let input_weights = sol.x[j_out..j_out + i_in]
        .iter()
        .zip(&instance.input_scale)
        .map(|(w, s)| w / s)
        .collect();
    Ok(DeaScore {
        unit: instance.units[c].clone(),
        delta,
        r,
        output_weights,
        input_weights,
        classification: Classification::from_score(r),
        status: sol.status,
        iterations: sol.iterations,
    })
}

/// Input-oriented CRS multiplier-form efficiency of unit `c`:
/// maximize `y_c' mu` subject to `x_c' nu = 1`, `Y mu - X nu <= 0`. With
/// `super_efficiency` the evaluated unit is left out of the envelopment rows.
pub fn ccr_score(instance: &FrontierInstance, c: usize, super_efficiency: bool) -> Result<f64> {
    instance.check_unit(c)?;
    let (j_out, i_in) = (instance.n_outputs(), instance.n_inputs());
    let n = j_out + i_in;
    let mut objective = vec![0.0; n];
    for (slot, v) in objective.iter_mut().zip(instance.scaled_output(c)) {
        *slot = v;
    }
    let mut lp = LpProblem::maximize(objective);
    let mut row = vec![0.0; n];
    for (slot, v) in row[j_out..].iter_mut().zip(instance.scaled_input(c)) {
        *slot = v;
    }
    lp.add_constraint(row, RowSense::Eq, 1.0);
    for k in (0..instance.len()).filter(|&k| !(super_efficiency && k == c)) {
        lp.add_constraint(envelopment_row(instance, k, n), RowSense::Le, 0.0);
    }
    let sol = linprog::solve(&lp)?;
    match (sol.status, sol.objective) {
        (LpStatus::Optimal, Some(v)) => Ok(v),
        (status, _) => Err(Error::UnexpectedLp {
            context: format!("CCR score of unit `{}`", instance.units[c]),
            status,
            problem: Box::new(lp),
        }),
    }
}

/// Scores every unit of one frontier.
pub fn score_frontier(instance: &FrontierInstance, exec: Execution) -> Result<Vec<DeaScore>> {
    let idx: Vec<usize> = (0..instance.len()).collect();
    exec.map(&idx, |&c| chebyshev_score(instance, c))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelScore {
    pub year: i32,
    pub score: DeaScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropRecord {
    pub year: i32,
    pub dropped: DroppedUnit,
}

/// Flat row of a score table, as written to and read from score files.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub unit: String,
    pub year: i32,
    pub delta: f64,
    pub r: f64,
    pub classification: Classification,
}

/// Scores of one model over every frontier year, ordered by (year, unit).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub label: String,
    pub scores: Vec<PanelScore>,
    pub dropped: Vec<DropRecord>,
}

impl ScoreTable {
    pub fn years(&self) -> Vec<i32> {
        let mut ys: Vec<i32> = self.scores.iter().map(|s| s.year).collect();
        ys.dedup();
        ys
    }

    pub fn records(&self) -> Vec<ScoreRecord> {
        self.scores
            .iter()
            .map(|s| ScoreRecord {
                unit: s.score.unit.clone(),
                year: s.year,
                delta: s.score.delta,
                r: s.score.r,
                classification: s.score.classification,
            })
            .collect()
    }

    pub fn for_year(&self, year: i32) -> impl Iterator<Item = &PanelScore> {
        self.scores.iter().filter(move |s| s.year == year)
    }

    pub fn get(&self, unit: &str, year: i32) -> Option<&DeaScore> {
        self.for_year(year)
            .find(|s| s.score.unit == unit)
            .map(|s| &s.score)
    }
}

/// Scores every unit in every year from `first_year + lag` to `last_year`,
/// each year against its own frontier.
pub fn score_panel(data: &PanelDataset, config: &DeaConfig, exec: Execution) -> Result<ScoreTable> {
    config.validate(data.registry(), data.n_years())?;
    let first = data.first_year() + config.lag as i32;
    let mut frontiers = Vec::new();
    let mut dropped = Vec::new();
    for year in first..=data.last_year() {
        let slice = slice_for_frontier(data, config, year)?;
        dropped.extend(slice.dropped.iter().cloned().map(|d| DropRecord { year, dropped: d }));
        frontiers.push((year, FrontierInstance::from_slice(&slice)?));
    }
    let tasks: Vec<(usize, usize)> = frontiers
        .iter()
        .enumerate()
        .flat_map(|(f, (_, inst))| (0..inst.len()).map(move |c| (f, c)))
        .collect();
    let results = exec.map(&tasks, |&(f, c)| chebyshev_score(&frontiers[f].1, c));
    let mut scores = Vec::with_capacity(tasks.len());
    for (&(f, _), res) in tasks.iter().zip(results) {
        scores.push(PanelScore {
            year: frontiers[f].0,
            score: res?,
        });
    }
    Ok(ScoreTable {
        label: config.label.clone(),
        scores,
        dropped,
    })
}
