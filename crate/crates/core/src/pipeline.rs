//! Declarative run configuration and the score / regress / report / demo
//! stages behind the command-line tool.
//!
//! A run is described by one TOML file:
//!
//! ```toml
//! dataset = "panel.csv"          # relative to the config file
//! seed = 20180425                # optional, used by synthetic commands
//!
//! [variables]                    # optional, defaults to TERD/SAE/CIT/EPO/GDP
//! TERD = { role = "input", description = "total R&D expenditures" }
//!
//! [[models]]                     # optional, defaults to general/basic/applied
//! label = "general"
//! inputs = ["TERD", "SAE"]
//! outputs = ["CIT", "EPO"]
//! lag = 1                        # default 1
//! exclude = []
//!
//! [regression]                   # optional
//! ceiling = 2.0                  # default 2
//! regressors = ["GDP"]           # default ["GDP"]
//! exclude = ["LU"]               # default ["LU"]
//!
//! [report]                       # optional
//! year = 2014                    # default: last scored year
//! bin_width = 0.1
//! density_points = 512
//! curve_points = 101
//! ```
//!
//! Every stage computes all of its outputs in memory first and then commits
//! them with write-then-rename, so a failing run leaves no new files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dataset::{load_csv, DeaConfig, PanelDataset, Role, VariableRegistry};
use crate::dea::{score_panel, Classification, ScoreRecord, ScoreTable};
use crate::exec::Execution;
use crate::report::{
    curve_csv, histogram, kernel_density, scatter_csv, BinSpec, GridSpec, ScatterPoint,
};
use crate::secondstage::{fit_random_time_effects, RegressionFit, RegressionSpec};
use crate::synthetic::{research_panel_csv, DEFAULT_SEED};
use crate::{Error, Result};

pub const DEMO_CONFIG_TOML: &str = include_str!("../data/demo_config.toml");
pub const SYNTHETIC_PANEL_CSV: &str = include_str!("../data/synthetic_panel.csv");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: PathBuf,
    seed: Option<u64>,
    variables: Option<VariableRegistry>,
    models: Option<Vec<RawModel>>,
    #[serde(default)]
    regression: RawRegression,
    #[serde(default)]
    report: ReportSettings,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    label: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    #[serde(default = "one")]
    lag: usize,
    #[serde(default)]
    exclude: BTreeSet<String>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRegression {
    ceiling: f64,
    regressors: Vec<String>,
    exclude: BTreeSet<String>,
}

impl Default for RawRegression {
    fn default() -> Self {
        Self {
            ceiling: 2.0,
            regressors: vec!["GDP".to_string()],
            exclude: ["LU".to_string()].into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSettings {
    pub year: Option<i32>,
    pub bin_width: f64,
    pub density_points: usize,
    pub curve_points: usize,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self {
            year: None,
            bin_width: 0.1,
            density_points: 512,
            curve_points: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub registry: VariableRegistry,
    pub models: Vec<DeaConfig>,
    pub regression: RegressionSpec,
    pub report: ReportSettings,
    pub seed: u64,
}

/// General (both outputs), basic (citations) and applied (patents) models
/// with a one-year lag.
pub fn research_models() -> Vec<DeaConfig> {
    vec![
        DeaConfig::new("general", &["TERD", "SAE"], &["CIT", "EPO"], 1),
        DeaConfig::new("basic", &["TERD", "SAE"], &["CIT"], 1),
        DeaConfig::new("applied", &["TERD", "SAE"], &["EPO"], 1),
    ]
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Parses a config; a relative `dataset` path is resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        let registry = raw.variables.unwrap_or_else(VariableRegistry::research_default);
        let models = match raw.models {
            Some(ms) => ms
                .into_iter()
                .map(|m| DeaConfig {
                    label: m.label,
                    inputs: m.inputs,
                    outputs: m.outputs,
                    lag: m.lag,
                    excluded: m.exclude,
                })
                .collect(),
            None => research_models(),
        };
        let dataset = if raw.dataset.is_absolute() {
            raw.dataset
        } else {
            base.join(raw.dataset)
        };
        let cfg = Self {
            dataset,
            registry,
            models,
            regression: RegressionSpec {
                ceiling: raw.regression.ceiling,
                regressors: raw.regression.regressors,
                excluded: raw.regression.exclude,
            },
            report: raw.report,
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("no models configured".to_string()));
        }
        let mut labels = BTreeSet::new();
        for m in &self.models {
            if m.label.is_empty()
                || !m.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(Error::Config(format!(
                    "model label `{}` must be non-empty ASCII letters, digits, `_` or `-`",
                    m.label
                )));
            }
            if !labels.insert(m.label.as_str()) {
                return Err(Error::Config(format!("duplicate model label `{}`", m.label)));
            }
            m.validate(&self.registry, usize::MAX)?;
        }
        if !(self.regression.ceiling > 0.0) {
            return Err(Error::Config(format!(
                "regression ceiling {} must be positive",
                self.regression.ceiling
            )));
        }
        let s = &self.report;
        if !(s.bin_width > 0.0) || s.density_points < 2 || s.curve_points < 2 {
            return Err(Error::Config(
                "report needs bin_width > 0 and at least 2 density and curve points".to_string(),
            ));
        }
        Ok(())
    }

    fn check_regressors(&self) -> Result<()> {
        if self.regression.regressors.is_empty() {
            return Err(Error::Config("regression needs at least one regressor".to_string()));
        }
        for name in &self.regression.regressors {
            match self.registry.get(name) {
                Some(v) if v.role == Role::Regressor => {}
                Some(v) => {
                    return Err(Error::Config(format!(
                        "`{name}` is registered as {}, not as a regressor",
                        v.role
                    )))
                }
                None => {
                    return Err(Error::Config(format!(
                        "regressor `{name}` is not a registered variable"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<PanelDataset> {
        let file = fs::File::open(&self.dataset).map_err(|e| Error::io(&self.dataset, e))?;
        let data = load_csv(std::io::BufReader::new(file), &self.registry)?;
        for m in &self.models {
            m.validate(&self.registry, data.n_years())?;
        }
        Ok(data)
    }
}

/// Files produced by a stage, keyed by path relative to the output directory.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outputs {
    files: BTreeMap<PathBuf, Vec<u8>>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, contents: impl Into<Vec<u8>>) {
        self.files.insert(path.into(), contents.into());
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.keys().map(PathBuf::as_path)
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.files.get(Path::new(path)).map(Vec::as_slice)
    }

    pub fn extend(&mut self, other: Outputs) {
        self.files.extend(other.files);
    }

    /// Writes every file under `dir` as a temporary sibling and renames it
    /// into place once all temporaries exist.
    pub fn commit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut staged: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(self.files.len());
        let cleanup = |staged: &[(PathBuf, PathBuf)]| {
            for (tmp, _) in staged {
                let _ = fs::remove_file(tmp);
            }
        };
        for (rel, bytes) in &self.files {
            let target = dir.join(rel);
            let mut name = target.file_name().unwrap_or_default().to_os_string();
            name.push(".partial");
            let tmp = target.with_file_name(name);
            let res = target
                .parent()
                .map_or(Ok(()), fs::create_dir_all)
                .and_then(|_| fs::write(&tmp, bytes));
            if let Err(e) = res {
                cleanup(&staged);
                return Err(Error::io(&target, e));
            }
            staged.push((tmp, target));
        }
        for (k, (tmp, target)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, target) {
                cleanup(&staged[k..]);
                return Err(Error::io(target, e));
            }
        }
        Ok(staged.into_iter().map(|(_, t)| t).collect())
    }
}

pub fn scores_file(label: &str) -> String {
    format!("scores_{label}.csv")
}

pub fn dropped_file(label: &str) -> String {
    format!("dropped_{label}.csv")
}

pub fn fit_file(label: &str) -> String {
    format!("fit_{label}.json")
}

pub fn curve_file(label: &str) -> String {
    format!("curve_{label}.csv")
}

pub fn scores_csv(table: &ScoreTable) -> String {
    let mut out = String::from("unit,year,delta,r,classification\n");
    for s in &table.scores {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.score.unit, s.year, s.score.delta, s.score.r, s.score.classification
        );
    }
    out
}

pub fn dropped_csv(table: &ScoreTable) -> String {
    let mut out = String::from("year,unit,reason\n");
    for d in &table.dropped {
        let _ = writeln!(out, "{},{},{}", d.year, d.dropped.unit, d.dropped.reason);
    }
    out
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    unit: String,
    year: i32,
    delta: f64,
    r: f64,
    classification: Classification,
}

pub fn parse_scores_csv(text: &str) -> Result<Vec<ScoreRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize::<ScoreRow>()
        .enumerate()
        .map(|(k, row)| {
            let row = row.map_err(|e| Error::Input(format!("score file row {}: {e}", k + 2)))?;
            Ok(ScoreRecord {
                unit: row.unit,
                year: row.year,
                delta: row.delta,
                r: row.r,
                classification: row.classification,
            })
        })
        .collect()
}

fn read_scores(dir: &Path, label: &str) -> Result<Vec<ScoreRecord>> {
    let path = dir.join(scores_file(label));
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    parse_scores_csv(&text)
}

fn read_fit(dir: &Path, label: &str) -> Result<RegressionFit> {
    let path = dir.join(fit_file(label));
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// Scores every configured model.
pub fn score_models(cfg: &RunConfig, data: &PanelDataset, exec: Execution) -> Result<Vec<ScoreTable>> {
    cfg.models.iter().map(|m| score_panel(data, m, exec)).collect()
}

pub fn score_outputs(tables: &[ScoreTable]) -> Outputs {
    let mut out = Outputs::default();
    for t in tables {
        out.add(scores_file(&t.label), scores_csv(t));
        out.add(dropped_file(&t.label), dropped_csv(t));
    }
    out
}

/// `score` stage: writes `scores_<label>.csv` and `dropped_<label>.csv`.
pub fn cmd_score(cfg: &RunConfig, out_dir: &Path, exec: Execution) -> Result<Vec<ScoreTable>> {
    let data = cfg.load_dataset()?;
    let tables = score_models(cfg, &data, exec)?;
    score_outputs(&tables).commit(out_dir)?;
    Ok(tables)
}

pub fn regress_models(
    cfg: &RunConfig,
    data: &PanelDataset,
    scores: &BTreeMap<String, Vec<ScoreRecord>>,
) -> Result<Vec<RegressionFit>> {
    cfg.check_regressors()?;
    cfg.models
        .iter()
        .map(|m| {
            let records = scores
                .get(&m.label)
                .ok_or_else(|| Error::Input(format!("no scores for model `{}`", m.label)))?;
            fit_random_time_effects(&m.label, records, data, &cfg.regression)
        })
        .collect()
}

pub fn fit_outputs(fits: &[RegressionFit]) -> Result<Outputs> {
    let mut out = Outputs::default();
    for f in fits {
        let mut json = serde_json::to_string_pretty(f)
            .map_err(|e| Error::Numerical(format!("cannot serialize fit: {e}")))?;
        json.push('\n');
        out.add(fit_file(&f.model), json);
    }
    Ok(out)
}

/// `regress` stage: reads the score files from `out_dir`, writes `fit_<label>.json`.
pub fn cmd_regress(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<RegressionFit>> {
    let data = cfg.load_dataset()?;
    let scores = cfg
        .models
        .iter()
        .map(|m| Ok((m.label.clone(), read_scores(out_dir, &m.label)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let fits = regress_models(cfg, &data, &scores)?;
    fit_outputs(&fits)?.commit(out_dir)?;
    Ok(fits)
}

/// Text table of estimates, standard errors and t-statistics per model.
pub fn summary_table(fits: &[RegressionFit], regressors: &[String]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<10} {:>9} {:>8} {:>9}", "model", "alpha", "se", "t");
    for name in regressors {
        let _ = write!(out, " {:>9} {:>8} {:>9}", format!("b[{name}]"), "se", "t");
    }
    let _ = writeln!(out, " {:>8} {:>8} {:>6}", "sigma", "omega", "n");
    for f in fits {
        let _ = write!(out, "{:<10} {:>9.3} {:>8.3} {:>9.3}", f.model, f.alpha, f.se_alpha, f.t_alpha);
        for k in 0..f.beta.len() {
            let _ = write!(out, " {:>9.3} {:>8.3} {:>9.3}", f.beta[k], f.se_beta[k], f.t_beta[k]);
        }
        let _ = writeln!(out, " {:>8.3} {:>8.3} {:>6}", f.sigma, f.omega, f.n_obs);
    }
    out
}

pub fn report_outputs(
    cfg: &RunConfig,
    data: &PanelDataset,
    scores: &BTreeMap<String, Vec<ScoreRecord>>,
    fits: &BTreeMap<String, RegressionFit>,
) -> Result<Outputs> {
    let mut out = Outputs::default();
    let settings = &cfg.report;
    let regressor = cfg.regression.regressors.first();
    let mut scatter = Vec::new();
    for m in &cfg.models {
        let records = scores
            .get(&m.label)
            .ok_or_else(|| Error::Input(format!("no scores for model `{}`", m.label)))?;
        let year = match settings.year {
            Some(y) => y,
            None => records
                .iter()
                .map(|r| r.year)
                .max()
                .ok_or_else(|| Error::Input(format!("model `{}` has no scores", m.label)))?,
        };
        let year_rows: Vec<&ScoreRecord> = records.iter().filter(|r| r.year == year).collect();
        let sample: Vec<f64> = year_rows.iter().map(|r| r.r).collect();
        if sample.is_empty() {
            return Err(Error::Input(format!("model `{}` has no scores in {year}", m.label)));
        }

        let density = kernel_density(
            &sample,
            GridSpec::Auto {
                points: settings.density_points,
            },
            None,
        )?;
        let hist = histogram(&sample, BinSpec::covering(&sample, 0.0, settings.bin_width))?;
        let dir = Path::new("report").join(&m.label);
        out.add(dir.join("density.csv"), density.to_csv());
        out.add(dir.join("hist.csv"), hist.to_csv());

        let mut zs = Vec::new();
        if let Some(name) = regressor {
            for row in &year_rows {
                if let Some(z) = data.value(&row.unit, year, name) {
                    zs.push(z);
                    scatter.push(ScatterPoint {
                        unit: row.unit.clone(),
                        z,
                        r: row.r,
                        model: m.label.clone(),
                    });
                }
            }
        }
        if let Some(fit) = fits.get(&m.label) {
            let lo = zs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() && hi >= lo {
                let n = settings.curve_points;
                let grid: Vec<f64> = (0..n)
                    .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                    .collect();
                let curve = fit.fitted_curve(cfg.regression.ceiling, &grid);
                out.add(curve_file(&m.label), curve_csv(&curve));
            }
        }
    }
    out.add("scatter.csv", scatter_csv(&scatter));
    Ok(out)
}

/// `report` stage: reads scores and fits from `out_dir` and writes
/// `report/<label>/{density,hist}.csv`, `scatter.csv` and `curve_<label>.csv`.
pub fn cmd_report(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let data = cfg.load_dataset()?;
    let mut scores = BTreeMap::new();
    let mut fits = BTreeMap::new();
    for m in &cfg.models {
        scores.insert(m.label.clone(), read_scores(out_dir, &m.label)?);
        fits.insert(m.label.clone(), read_fit(out_dir, &m.label)?);
    }
    report_outputs(cfg, &data, &scores, &fits)?.commit(out_dir)
}

#[derive(Debug, Clone)]
pub struct DemoRun {
    pub tables: Vec<ScoreTable>,
    pub fits: Vec<RegressionFit>,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Generates the synthetic panel for `seed` (the bundled file for the
/// default seed), writes it with the demo config under `out_dir/input`, and
/// runs every stage into `out_dir`.
pub fn cmd_demo(out_dir: &Path, seed: Option<u64>, exec: Execution) -> Result<DemoRun> {
    let seed = seed.unwrap_or(DEFAULT_SEED);
    let panel = if seed == DEFAULT_SEED {
        SYNTHETIC_PANEL_CSV.to_string()
    } else {
        research_panel_csv(seed)
    };
    let config_text = DEMO_CONFIG_TOML.replace(
        &format!("seed = {DEFAULT_SEED}"),
        &format!("seed = {seed}"),
    );
    let mut inputs = Outputs::default();
    inputs.add("input/synthetic_panel.csv", panel);
    inputs.add("input/config.toml", config_text);
    let mut files = inputs.commit(out_dir)?;

    let cfg = RunConfig::load(&out_dir.join("input/config.toml"))?;
    let data = cfg.load_dataset()?;
    let tables = score_models(&cfg, &data, exec)?;
    files.extend(score_outputs(&tables).commit(out_dir)?);
    let fits = cmd_regress(&cfg, out_dir)?;
    files.extend(cfg.models.iter().map(|m| out_dir.join(fit_file(&m.label))));
    files.extend(cmd_report(&cfg, out_dir)?);
    files.sort();
    Ok(DemoRun {
        summary: summary_table(&fits, &cfg.regression.regressors),
        tables,
        fits,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = RunConfig::from_toml("dataset = \"d.csv\"\n", Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.dataset, Path::new("/tmp/x/d.csv"));
        assert_eq!(cfg.models, research_models());
        assert_eq!(cfg.regression.ceiling, 2.0);
        assert_eq!(cfg.regression.regressors, ["GDP"]);
        assert!(cfg.regression.excluded.contains("LU"));
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert!(cfg.models.iter().all(|m| m.lag == 1));
    }

    #[test]
    fn bundled_demo_config_parses() {
        let cfg = RunConfig::from_toml(DEMO_CONFIG_TOML, Path::new(".")).unwrap();
        assert_eq!(
            cfg.models.iter().map(|m| m.label.as_str()).collect::<Vec<_>>(),
            ["general", "basic", "applied"]
        );
    }

    #[test]
    fn invalid_configs() {
        let base = Path::new(".");
        let dup = "dataset = \"d\"\n[[models]]\nlabel = \"a\"\ninputs = [\"TERD\"]\noutputs = [\"CIT\"]\n\
                   [[models]]\nlabel = \"a\"\ninputs = [\"SAE\"]\noutputs = [\"EPO\"]\n";
        assert!(matches!(RunConfig::from_toml(dup, base), Err(Error::Config(_))));
        let unknown = "dataset = \"d\"\n[[models]]\nlabel = \"a\"\ninputs = [\"XYZ\"]\noutputs = [\"CIT\"]\n";
        assert!(matches!(RunConfig::from_toml(unknown, base), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("dataset = 3", base), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("dataset = \"d\"\nbogus = 1", base), Err(Error::Config(_))));
        let bad_label = "dataset = \"d\"\n[[models]]\nlabel = \"a/b\"\ninputs = [\"TERD\"]\noutputs = [\"CIT\"]\n";
        assert!(matches!(RunConfig::from_toml(bad_label, base), Err(Error::Config(_))));
        let s = "dataset = \"d\"\n[regression]\nceiling = 0.0\n";
        assert!(matches!(RunConfig::from_toml(s, base), Err(Error::Config(_))));
    }

    #[test]
    fn bundled_panel_matches_generator() {
        assert_eq!(SYNTHETIC_PANEL_CSV, research_panel_csv(DEFAULT_SEED));
    }

    #[test]
    fn commit_writes_nested_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outputs::default();
        o.add("a.csv", "x\n");
        o.add("sub/b.csv", "y\n");
        let written = o.commit(dir.path()).unwrap();
        assert_eq!(written.len(), 2);
        assert_eq!(fs::read_to_string(dir.path().join("sub/b.csv")).unwrap(), "y\n");
        let leftovers: Vec<_> = walk(dir.path()).into_iter().filter(|p| p.to_string_lossy().ends_with(".partial")).collect();
        assert!(leftovers.is_empty());
    }

    fn walk(dir: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                out.extend(walk(&p));
            } else {
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn score_file_round_trip() {
        let text = "unit,year,delta,r,classification\nA,2014,-0.16666666666666666,0.6666666666666667,inefficient\n";
        let recs = parse_scores_csv(text).unwrap();
        assert_eq!(recs[0].classification, Classification::Inefficient);
        assert_eq!(recs[0].r, 0.6666666666666667);
        assert!(parse_scores_csv("unit,year,delta,r,classification\nA,x,0,1,efficient\n").is_err());
    }
}
