//! Long-format panel data: one row per (unit, year), one column per variable.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Input,
    Output,
    Regressor,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Input => "input",
            Role::Output => "output",
            Role::Regressor => "regressor",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub role: Role,
    #[serde(default)]
    pub description: String,
}

/// Ordered map from variable name to its role. Column order in written CSV
/// files follows registration order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VariableRegistry(IndexMap<String, VariableSpec>);

impl VariableRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, role: Role, description: &str) -> Self {
        self.0.insert(
            name.to_string(),
            VariableSpec {
                role,
                description: description.to_string(),
            },
        );
        self
    }

    /// Research inputs TERD and SAE, outputs CIT and EPO, regressor GDP.
    pub fn research_default() -> Self {
        Self::new()
            .with("TERD", Role::Input, "total R&D expenditures")
            .with("SAE", Role::Input, "number of scientists and engineers")
            .with("CIT", Role::Output, "citations of scientific publications")
            .with("EPO", Role::Output, "patent applications granted by the EPO")
            .with("GDP", Role::Regressor, "gross domestic product per capita")
    }

    pub fn get(&self, name: &str) -> Option<&VariableSpec> {
        self.0.get(name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.get_index_of(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Immutable validated panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    units: Vec<String>,
    first_year: i32,
    n_years: usize,
    registry: VariableRegistry,
    /// Indexed `[(var * units + unit) * years + year]`.
    values: Vec<Option<f64>>,
    /// Which (unit, year) rows appeared in the source.
    rows_present: Vec<bool>,
}

impl PanelDataset {
    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn years(&self) -> impl DoubleEndedIterator<Item = i32> + Clone + '_ {
        (0..self.n_years).map(move |k| self.first_year + k as i32)
    }

    pub fn first_year(&self) -> i32 {
        self.first_year
    }

    pub fn last_year(&self) -> i32 {
        self.first_year + self.n_years as i32 - 1
    }

    pub fn n_years(&self) -> usize {
        self.n_years
    }

    pub fn registry(&self) -> &VariableRegistry {
        &self.registry
    }

    pub fn unit_index(&self, unit: &str) -> Option<usize> {
        self.units.iter().position(|u| u == unit)
    }

    fn year_index(&self, year: i32) -> Option<usize> {
        let k = year.checked_sub(self.first_year)?;
        (k >= 0 && (k as usize) < self.n_years).then_some(k as usize)
    }

    fn offset(&self, var: usize, unit: usize, year: usize) -> usize {
        (var * self.units.len() + unit) * self.n_years + year
    }

    /// Value of `var` for `unit` in `year`; `None` when missing or unknown.
    pub fn value(&self, unit: &str, year: i32, var: &str) -> Option<f64> {
        let u = self.unit_index(unit)?;
        self.value_at(u, year, var)
    }

    pub fn value_at(&self, unit: usize, year: i32, var: &str) -> Option<f64> {
        let v = self.registry.index_of(var)?;
        let y = self.year_index(year)?;
        self.values[self.offset(v, unit, y)]
    }

    pub fn has_row(&self, unit: &str, year: i32) -> bool {
        match (self.unit_index(unit), self.year_index(year)) {
            (Some(u), Some(y)) => self.rows_present[u * self.n_years + y],
            _ => false,
        }
    }

    /// Number of (unit, year, variable) cells in rows present in the source.
    pub fn n_cells(&self) -> usize {
        self.rows_present.iter().filter(|p| **p).count() * self.registry.len()
    }

    /// Cells that were flagged missing, in (unit, year, variable) order.
    pub fn missing_cells(&self) -> Vec<(String, i32, String)> {
        let mut out = Vec::new();
        for (u, unit) in self.units.iter().enumerate() {
            for year in self.years() {
                let y = self.year_index(year).unwrap();
                for (v, var) in self.registry.names().enumerate() {
                    if self.values[self.offset(v, u, y)].is_none() {
                        out.push((unit.clone(), year, var.to_string()));
                    }
                }
            }
        }
        out
    }

    /// Writes the dataset back in the `unit,year,<vars...>` layout.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(writer);
        let mut header = vec!["unit".to_string(), "year".to_string()];
        header.extend(self.registry.names().map(str::to_string));
        w.write_record(&header).map_err(csv_err)?;
        for (u, unit) in self.units.iter().enumerate() {
            for year in self.years() {
                let y = self.year_index(year).unwrap();
                if !self.rows_present[u * self.n_years + y] {
                    continue;
                }
                let mut rec = vec![unit.clone(), year.to_string()];
                for v in 0..self.registry.len() {
                    rec.push(match self.values[self.offset(v, u, y)] {
                        Some(x) => x.to_string(),
                        None => String::new(),
                    });
                }
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::Input(e.to_string()))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Input(format!("csv: {e}"))
}

/// Parses a panel from CSV with header `unit,year,<var...>`. Every header
/// variable must be registered and every registered variable must appear.
/// Empty fields are recorded as missing.
pub fn load_csv<R: Read>(source: R, registry: &VariableRegistry) -> Result<PanelDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.len() < 2 || &header[0] != "unit" || &header[1] != "year" {
        return Err(Error::Input(
            "header must start with `unit,year`".to_string(),
        ));
    }
    let mut column_var = Vec::with_capacity(header.len() - 2);
    for name in header.iter().skip(2) {
        let idx = registry
            .index_of(name)
            .ok_or_else(|| Error::Input(format!("column `{name}` is not a registered variable")))?;
        if column_var.contains(&idx) {
            return Err(Error::Input(format!("column `{name}` appears twice")));
        }
        column_var.push(idx);
    }
    if let Some(missing) = registry
        .names()
        .find(|n| !header.iter().skip(2).any(|h| h == *n))
    {
        return Err(Error::Input(format!("registered variable `{missing}` has no column")));
    }

    let mut units: Vec<String> = Vec::new();
    let mut unit_ids: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<(usize, i32, Vec<Option<f64>>)> = Vec::new();
    let mut seen: BTreeSet<(usize, i32)> = BTreeSet::new();

    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(csv_err)?;
        if record.len() != header.len() {
            return Err(Error::Input(format!(
                "row {line}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        let unit = record[0].to_string();
        if unit.is_empty() {
            return Err(Error::Input(format!("row {line}: empty unit identifier")));
        }
        let year: i32 = record[1].parse().map_err(|_| {
            Error::Input(format!("row {line}, column year: `{}` is not an integer", &record[1]))
        })?;
        let u = *unit_ids.entry(unit.clone()).or_insert_with(|| {
            units.push(unit.clone());
            units.len() - 1
        });
        if !seen.insert((u, year)) {
            return Err(Error::Input(format!("duplicate row for ({unit}, {year})")));
        }
        let mut cells = vec![None; registry.len()];
        for (c, field) in record.iter().skip(2).enumerate() {
            if field.is_empty() {
                continue;
            }
            let v: f64 = field.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                Error::Input(format!(
                    "row {line}, column {}: `{field}` is not a finite number",
                    &header[c + 2]
                ))
            })?;
            cells[column_var[c]] = Some(v);
        }
        rows.push((u, year, cells));
    }

    if rows.is_empty() {
        return Err(Error::Input("dataset has no rows".to_string()));
    }
    let years: BTreeSet<i32> = rows.iter().map(|r| r.1).collect();
    let first_year = *years.first().unwrap();
    let last_year = *years.last().unwrap();
    let n_years = (last_year - first_year + 1) as usize;
    if years.len() != n_years {
        let gap = (first_year..=last_year).find(|y| !years.contains(y)).unwrap();
        return Err(Error::Input(format!(
            "years are not contiguous: {gap} is missing between {first_year} and {last_year}"
        )));
    }

    let n_units = units.len();
    let mut values = vec![None; registry.len() * n_units * n_years];
    let mut rows_present = vec![false; n_units * n_years];
    for (u, year, cells) in rows {
        let y = (year - first_year) as usize;
        rows_present[u * n_years + y] = true;
        for (v, cell) in cells.into_iter().enumerate() {
            values[(v * n_units + u) * n_years + y] = cell;
        }
    }

    Ok(PanelDataset {
        units,
        first_year,
        n_years,
        registry: registry.clone(),
        values,
        rows_present,
    })
}

/// Variable selection for one DEA model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeaConfig {
    pub label: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Inputs are read from `year - lag`.
    #[serde(default = "default_lag")]
    pub lag: usize,
    #[serde(default)]
    pub excluded: BTreeSet<String>,
}

fn default_lag() -> usize {
    1
}

impl DeaConfig {
    pub fn new(label: &str, inputs: &[&str], outputs: &[&str], lag: usize) -> Self {
        Self {
            label: label.to_string(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            lag,
            excluded: BTreeSet::new(),
        }
    }

    pub fn excluding(mut self, units: &[&str]) -> Self {
        self.excluded.extend(units.iter().map(|s| s.to_string()));
        self
    }

    pub fn validate(&self, registry: &VariableRegistry, n_years: usize) -> Result<()> {
        let label = &self.label;
        if self.inputs.is_empty() || self.outputs.is_empty() {
            return Err(Error::Config(format!(
                "model `{label}` needs at least one input and one output"
            )));
        }
        for (names, role) in [(&self.inputs, Role::Input), (&self.outputs, Role::Output)] {
            for name in names {
                match registry.get(name) {
                    None => {
                        return Err(Error::Config(format!(
                            "model `{label}` references unregistered variable `{name}`"
                        )))
                    }
                    Some(spec) if spec.role != role => {
                        return Err(Error::Config(format!(
                            "model `{label}` uses `{name}` as {role} but it is registered as {}",
                            spec.role
                        )))
                    }
                    _ => {}
                }
            }
        }
        if let Some(dup) = self.inputs.iter().find(|n| self.outputs.contains(n)) {
            return Err(Error::Config(format!(
                "model `{label}` uses `{dup}` as both input and output"
            )));
        }
        if self.lag >= n_years {
            return Err(Error::Config(format!(
                "model `{label}` has lag {} but the panel spans only {n_years} years",
                self.lag
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    Excluded,
    Missing { variable: String, year: i32 },
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::Excluded => f.write_str("excluded"),
            DropReason::Missing { variable, year } => write!(f, "missing {variable} in {year}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedUnit {
    pub unit: String,
    pub reason: DropReason,
}

/// Inputs (from `year - lag`) and outputs (from `year`) of the units that
/// enter one frontier. Row `i` of both matrices belongs to `units[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierSlice {
    pub year: i32,
    pub units: Vec<String>,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub dropped: Vec<DroppedUnit>,
}

/// Builds the frontier data for `year` under `config`.
pub fn slice_for_frontier(
    data: &PanelDataset,
    config: &DeaConfig,
    year: i32,
) -> Result<FrontierSlice> {
    config.validate(data.registry(), data.n_years())?;
    let input_year = year - config.lag as i32;
    if year > data.last_year() || input_year < data.first_year() {
        return Err(Error::Config(format!(
            "model `{}`: year {year} with lag {} is outside the panel {}..={}",
            config.label,
            config.lag,
            data.first_year(),
            data.last_year()
        )));
    }

    let mut slice = FrontierSlice {
        year,
        units: Vec::new(),
        inputs: Vec::new(),
        outputs: Vec::new(),
        dropped: Vec::new(),
    };
    'units: for (u, unit) in data.units().iter().enumerate() {
        if config.excluded.contains(unit) {
            slice.dropped.push(DroppedUnit {
                unit: unit.clone(),
                reason: DropReason::Excluded,
            });
            continue;
        }
        let mut rows = [Vec::new(), Vec::new()];
        for (k, (names, y)) in [(&config.inputs, input_year), (&config.outputs, year)]
            .into_iter()
            .enumerate()
        {
            for name in names {
                match data.value_at(u, y, name) {
                    None => {
                        slice.dropped.push(DroppedUnit {
                            unit: unit.clone(),
                            reason: DropReason::Missing {
                                variable: name.clone(),
                                year: y,
                            },
                        });
                        continue 'units;
                    }
                    Some(v) if v <= 0.0 => {
                        return Err(Error::Input(format!(
                            "{name} for ({unit}, {y}) is {v}; DEA requires strictly positive data"
                        )));
                    }
                    Some(v) => rows[k].push(v),
                }
            }
        }
        let [x, y] = rows;
        slice.units.push(unit.clone());
        slice.inputs.push(x);
        slice.outputs.push(y);
    }

    if slice.units.len() < 2 {
        return Err(Error::Model(format!(
            "model `{}`, year {year}: {} unit(s) retained, a frontier needs at least 2",
            config.label,
            slice.units.len()
        )));
    }
    Ok(slice)
}
