//! Experiment configuration: parsing, defaults and validation.

use std::collections::BTreeSet;
use std::fmt;

use gapspec_core::{Blocks, GapWindow, ModelSpec, PerturbationSpec, QuadratureSpec, Space};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Sweep,
    Convergence,
    Epsilon,
    Crossing,
    Counterexample,
    OracleCompare,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Sweep => "sweep",
            Task::Convergence => "convergence",
            Task::Epsilon => "epsilon",
            Task::Crossing => "crossing",
            Task::Counterexample => "counterexample",
            Task::OracleCompare => "oracle_compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// `count` uniformly spaced points on `[start, stop]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        gapspec_core::sweep::uniform_grid(self.start, self.stop, self.count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub lambda: GridSpec,
    pub n_list: Vec<usize>,
    /// Defaults to `[0]` on the torus and `[1]` on the line.
    #[serde(default)]
    pub epsilon_list: Option<Vec<f64>>,
    /// λ values for the convergence, epsilon and oracle tasks; defaults to the grid end.
    #[serde(default)]
    pub probe_lambdas: Option<Vec<f64>>,
}

/// Map from the search variable `t` to `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rescale {
    /// `λ = t`.
    Identity,
    /// `λ = tan(π t / 2)`, mapping `[0, 1)` onto `[0, ∞)`.
    Tan,
}

impl Rescale {
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Rescale::Identity => t,
            Rescale::Tan => (std::f64::consts::FRAC_PI_2 * t).tan(),
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Rescale::Identity => "lambda = t",
            Rescale::Tan => "lambda = tan(pi * t / 2)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingSpec {
    pub grid: GridSpec,
    #[serde(default = "default_rescale")]
    pub rescale: Rescale,
    #[serde(default = "default_crossing_tol")]
    pub tol: f64,
    pub n: usize,
    #[serde(default)]
    pub epsilon: f64,
    /// Points of an independent fine scan that must bracket the crossing (0 skips it).
    #[serde(default)]
    pub scan_points: usize,
}

fn default_rescale() -> Rescale {
    Rescale::Identity
}
fn default_crossing_tol() -> f64 {
    gapspec_core::spectral::DEFAULT_CROSSING_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSpec {
    #[serde(default = "default_max_n")]
    pub max_n: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Longest support of a random coefficient vector.
    #[serde(default = "default_support")]
    pub max_support: usize,
}

fn default_max_n() -> usize {
    1000
}
fn default_samples() -> usize {
    10
}
fn default_support() -> usize {
    32
}

impl Default for CounterexampleSpec {
    fn default() -> Self {
        Self { max_n: default_max_n(), samples: default_samples(), max_support: default_support() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    /// Grid points; defaults to 4096 on the torus and 8192 on the line.
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    12.0
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self { points: None, radius: default_radius() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> String {
    "out".into()
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { directory: default_directory(), formats: default_formats() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    /// Defaults to `(-1, 1)` for gap models and `(-∞, 1)` for semibounded ones.
    #[serde(default)]
    pub window: Option<GapWindow>,
    pub sweep: SweepSpec,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub crossing: Option<CrossingSpec>,
    #[serde(default)]
    pub counterexample: CounterexampleSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_workers() -> usize {
    1
}

impl ExperimentConfig {
    pub fn window(&self) -> GapWindow {
        self.window.unwrap_or_else(|| GapWindow::for_model(&self.model))
    }

    pub fn epsilons(&self) -> &[f64] {
        self.sweep.epsilon_list.as_deref().unwrap_or(&[])
    }

    pub fn probe_lambdas(&self) -> &[f64] {
        self.sweep.probe_lambdas.as_deref().unwrap_or(&[])
    }

    pub fn largest_n(&self) -> usize {
        self.sweep.n_list.iter().copied().max().unwrap_or(0)
    }

    pub fn oracle_points(&self) -> usize {
        self.oracle.points.unwrap_or(match self.model.space {
            Space::Torus => 4096,
            Space::Line => 8192,
        })
    }

    pub fn wants(&self, task: Task) -> bool {
        self.tasks.contains(&task)
    }

    pub fn writes(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }

    /// Fill every model-dependent default so the config serialises completely.
    fn normalize(&mut self) {
        self.window = Some(self.window());
        if self.sweep.epsilon_list.is_none() {
            self.sweep.epsilon_list = Some(vec![match self.model.space {
                Space::Torus => 0.0,
                Space::Line => 1.0,
            }]);
        }
        if self.sweep.probe_lambdas.is_none() {
            self.sweep.probe_lambdas = Some(vec![self.sweep.lambda.stop]);
        }
        if self.oracle.points.is_none() {
            self.oracle.points = Some(self.oracle_points());
        }
    }
}

/// One violation, located by a dotted path such as `sweep.n_list[2]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<Issue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Parse, fill defaults and check a JSON config.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        ConfigErrors(vec![Issue { path, message: e.into_inner().to_string() }])
    })?;
    config.normalize();
    let issues = check(&config);
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(ConfigErrors(issues))
    }
}

fn check(c: &ExperimentConfig) -> Vec<Issue> {
    let mut issues = Vec::new();
    let mut push = |path: &str, message: String| issues.push(Issue { path: path.into(), message });

    if let Err(e) = c.model.validate() {
        push("model", e.to_string());
    }
    if let Err(e) = c.perturbation.validate(&c.model) {
        push("perturbation", e.to_string());
    }
    if let Err(e) = c.quadrature.validate() {
        push("quadrature", e.to_string());
    }
    if let Err(e) = c.window().validate() {
        push("window", e.to_string());
    }

    let grid = &c.sweep.lambda;
    if grid.count < 2 {
        push("sweep.lambda.count", format!("need at least 2 points, got {}", grid.count));
    }
    if !(grid.start.is_finite() && grid.stop.is_finite() && grid.stop > grid.start) {
        push("sweep.lambda", format!("need finite start < stop, got [{}, {}]", grid.start, grid.stop));
    }

    let n_list = &c.sweep.n_list;
    if n_list.is_empty() {
        push("sweep.n_list", "must not be empty".into());
    }
    for (i, &n) in n_list.iter().enumerate() {
        if n == 0 {
            push(&format!("sweep.n_list[{i}]"), "dimension must be positive".into());
        } else if i > 0 && n <= n_list[i - 1] {
            push(&format!("sweep.n_list[{i}]"), format!("{n} does not exceed the previous entry {}", n_list[i - 1]));
        }
    }
    if c.wants(Task::Convergence) && n_list.len() < 3 {
        push("sweep.n_list", "the convergence task needs at least three dimensions".into());
    }

    let eps = c.epsilons();
    if eps.is_empty() {
        push("sweep.epsilon_list", "must not be empty".into());
    }
    for (i, &e) in eps.iter().enumerate() {
        if let Err(err) = c.model.check_epsilon(e) {
            push("sweep.epsilon_list", format!("entry {i} ({e}): {err}"));
        }
    }
    if c.wants(Task::Epsilon) {
        if c.model.space != Space::Line {
            push("tasks", "the epsilon task needs the line model".into());
        }
        if eps.len() < 2 {
            push("sweep.epsilon_list", "the epsilon task needs at least two values".into());
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            push("sweep.epsilon_list", "the epsilon task needs a strictly decreasing list".into());
        }
    }

    for (i, &l) in c.probe_lambdas().iter().enumerate() {
        if !l.is_finite() {
            push(&format!("sweep.probe_lambdas[{i}]"), "must be finite".into());
        }
    }
    if c.probe_lambdas().is_empty() {
        push("sweep.probe_lambdas", "must not be empty".into());
    }

    if c.tasks.is_empty() {
        push("tasks", "no tasks requested".into());
    }
    let unique: BTreeSet<_> = c.tasks.iter().collect();
    if unique.len() != c.tasks.len() {
        push("tasks", "tasks are listed more than once".into());
    }

    if c.wants(Task::Crossing) {
        match &c.crossing {
            None => push("crossing", "the crossing task needs a crossing section".into()),
            Some(x) => {
                if c.model.blocks != Blocks::Gap {
                    push("tasks", "the crossing task needs a gap model".into());
                }
                if x.grid.count < 2 || !(x.grid.stop > x.grid.start) {
                    push("crossing.grid", "need start < stop and at least 2 points".into());
                }
                if x.rescale == Rescale::Tan && !(x.grid.start >= 0.0 && x.grid.stop < 1.0) {
                    push("crossing.grid", "the tan rescaling needs 0 <= t < 1".into());
                }
                if !(x.tol > 0.0) {
                    push("crossing.tol", "must be > 0".into());
                }
                if x.n == 0 {
                    push("crossing.n", "dimension must be positive".into());
                }
                if let Err(err) = c.model.check_epsilon(x.epsilon) {
                    push("crossing.epsilon", err.to_string());
                }
            }
        }
    }

    if c.wants(Task::Counterexample) {
        let x = &c.counterexample;
        if x.max_n == 0 {
            push("counterexample.max_n", "must be positive".into());
        }
        if x.max_support == 0 {
            push("counterexample.max_support", "must be positive".into());
        }
    }

    if c.wants(Task::OracleCompare) {
        if c.oracle_points() < 16 {
            push("oracle.points", "need at least 16 grid points".into());
        }
        if !(c.oracle.radius > 0.0 && c.oracle.radius.is_finite()) {
            push("oracle.radius", "must be positive and finite".into());
        }
    }

    if c.output.formats.is_empty() {
        push("output.formats", "at least one format is required".into());
    }
    if c.output.directory.is_empty() {
        push("output.directory", "must not be empty".into());
    }
    if c.workers == 0 {
        push("workers", "need at least one worker".into());
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"space": "torus", "blocks": "semibounded", "confinement": "none"},
        "perturbation": {
            "kernel": {"kind": "multiplication", "profile": {"cosine": {"amplitude": 1.0, "wavenumber": 1.0}}},
            "support": {"plus": [0.0, 6.283185307179586]},
            "strength": {"linear": {"c0": 1.0}},
            "coupling": {"pp": -1.0}
        },
        "sweep": {"lambda": {"start": 0.0, "stop": 1.0, "count": 5}, "n_list": [8, 16, 32]},
        "tasks": ["sweep"]
    }"#;

    fn with(edit: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        edit(&mut v);
        v.to_string()
    }

    fn paths(text: &str) -> Vec<String> {
        validate_config(text).unwrap_err().0.into_iter().map(|i| i.path).collect()
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = validate_config(MINIMAL).unwrap();
        assert_eq!(c.model.gap_margin, 0.5);
        assert_eq!(c.window, Some(GapWindow::below_one()));
        assert_eq!(c.sweep.epsilon_list, Some(vec![0.0]));
        assert_eq!(c.sweep.probe_lambdas, Some(vec![1.0]));
        assert_eq!(c.quadrature, QuadratureSpec::default());
        assert_eq!(c.workers, 1);
        assert_eq!(c.output.formats, vec![Format::Csv, Format::Json]);
    }

    #[test]
    fn normalized_config_round_trips() {
        let c = validate_config(MINIMAL).unwrap();
        let again = validate_config(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn line_with_zero_epsilon_is_located() {
        let text = with(|v| {
            v["model"] = serde_json::json!({"space": "line", "blocks": "semibounded", "confinement": "harmonic"});
            v["perturbation"]["support"] = serde_json::json!({"plus": [-1.0, 1.0]});
            v["sweep"]["epsilon_list"] = serde_json::json!([1.0, 0.0]);
        });
        assert_eq!(paths(&text), vec!["sweep.epsilon_list"]);
    }

    #[test]
    fn inverted_window_is_located() {
        let text = with(|v| v["window"] = serde_json::json!({"lo": 0.5, "hi": 0.2}));
        assert_eq!(paths(&text), vec!["window"]);
    }

    #[test]
    fn non_increasing_dimension_is_located() {
        let text = with(|v| v["sweep"]["n_list"] = serde_json::json!([8, 16, 16]));
        assert_eq!(paths(&text), vec!["sweep.n_list[2]"]);
    }

    #[test]
    fn schema_errors_carry_paths() {
        let text = with(|v| v["sweep"]["n_list"] = serde_json::json!([8, "x"]));
        assert_eq!(paths(&text), vec!["sweep.n_list[1]"]);
        let text = with(|v| v["tasks"] = serde_json::json!(["sweep", "plot"]));
        assert_eq!(paths(&text), vec!["tasks[1]"]);
        assert!(validate_config("{").is_err());
    }

    #[test]
    fn task_requirements() {
        let text = with(|v| v["tasks"] = serde_json::json!(["crossing", "epsilon"]));
        let p = paths(&text);
        assert!(p.contains(&"crossing".to_string()));
        assert!(p.contains(&"tasks".to_string()));
        let text = with(|v| {
            v["tasks"] = serde_json::json!(["convergence"]);
            v["sweep"]["n_list"] = serde_json::json!([8, 16]);
        });
        assert_eq!(paths(&text), vec!["sweep.n_list"]);
    }

    #[test]
    fn multiple_issues_are_all_reported() {
        let text = with(|v| {
            v["workers"] = serde_json::json!(0);
            v["window"] = serde_json::json!({"lo": 2.0, "hi": 1.0});
        });
        assert_eq!(paths(&text), vec!["window", "workers"]);
    }
}
