//! Experiment configuration: a small versioned TOML schema, rejected on
//! unknown keys and validated in full before any computation starts.

use ldev::entropy::Bernoulli;
use ldev::functionals::ap3::Ap3;
use ldev::functionals::ergm::ErgmFunctional;
use ldev::functionals::graphs::{EdgeFunctional, Graph};
use ldev::functionals::toy::CurieWeiss;
use ldev::functionals::Functional;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Registry of runnable experiments with one-line summaries.
pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("rate", "constrained rate solves with dual and planted certificates"),
    ("free-energy", "mean-field value vs exact free energy, with budget terms"),
    ("sandwich", "two-sided tail interval audit against exact enumeration"),
    ("net-audit", "covering-net certificates on random inputs"),
    ("triangles", "triangle-count tail table, planted cliques, reference curve"),
    ("ap3", "progression-count tail table with planted intervals"),
    ("ergm", "weighted subgraph models: free energy and product nets"),
];

pub fn is_known_experiment(name: &str) -> bool {
    EXPERIMENTS.iter().any(|(n, _)| *n == name)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Format version; this build reads version 1 only.
    pub schema: u32,
    pub experiment: String,
    #[serde(default)]
    pub functional: FunctionalConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub run: RunConfig,
}

/// Which function on the cube the experiment studies.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalConfig {
    /// triangle | edge | pattern | ap3 | curie_weiss | ergm
    #[serde(default = "default_kind")]
    pub kind: String,
    /// Host vertex count for the graph kinds.
    #[serde(default = "default_n_vertices")]
    pub n_vertices: usize,
    /// Coordinate count for ap3 and curie_weiss.
    #[serde(default = "default_n_coords")]
    pub n: usize,
    /// Pair coupling for curie_weiss.
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    /// Pattern edge list for kind = pattern: "k m" header then 1-based
    /// "u v" pairs, whitespace separated.
    #[serde(default)]
    pub edges: Option<String>,
    /// Weighted terms for kind = ergm.
    #[serde(default)]
    pub terms: Vec<TermConfig>,
}

fn default_kind() -> String {
    "triangle".into()
}
fn default_n_vertices() -> usize {
    6
}
fn default_n_coords() -> usize {
    12
}
fn default_coupling() -> f64 {
    1.0
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            n_vertices: default_n_vertices(),
            n: default_n_coords(),
            coupling: default_coupling(),
            edges: None,
            terms: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    /// edge | triangle | c4 | k4 | p3, or "pattern" with an edge list.
    pub pattern: String,
    pub edges: Option<String>,
    pub weight: f64,
}

/// Instance grids. Each experiment consumes the axes it documents and
/// ignores none silently: validation rejects axes the experiment cannot use.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Background densities, each strictly inside (0, 1).
    #[serde(default = "default_density_axis")]
    pub p: Vec<f64>,
    /// Thresholds as mean ratios, each > 1.
    #[serde(default)]
    pub u: Vec<f64>,
    /// Absolute per-coordinate thresholds.
    #[serde(default)]
    pub t: Vec<f64>,
    /// Mean excess for the triangles experiment: tail at (1 + delta) E f.
    #[serde(default)]
    pub delta: Vec<f64>,
    /// Hamiltonian scale for free-energy and ergm experiments.
    #[serde(default)]
    pub beta: Vec<f64>,
}

fn default_density_axis() -> Vec<f64> {
    vec![0.3]
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            p: default_density_axis(),
            u: Vec::new(),
            t: Vec::new(),
            delta: Vec::new(),
            beta: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default = "default_max_inner")]
    pub max_inner: usize,
    #[serde(default = "default_solver_tol")]
    pub tol: f64,
    #[serde(default = "default_random_starts")]
    pub random_starts: usize,
}

fn default_max_outer() -> usize {
    ldev::variational::SolveOptions::default().max_outer
}
fn default_max_inner() -> usize {
    ldev::variational::SolveOptions::default().max_inner
}
fn default_solver_tol() -> f64 {
    ldev::variational::SolveOptions::default().tol
}
fn default_random_starts() -> usize {
    ldev::variational::SolveOptions::default().random_starts
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer: default_max_outer(),
            max_inner: default_max_inner(),
            tol: default_solver_tol(),
            random_starts: default_random_starts(),
        }
    }
}

impl SolverConfig {
    pub fn to_options(&self, seed: u64) -> ldev::variational::SolveOptions {
        ldev::variational::SolveOptions {
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            tol: self.tol,
            seed,
            random_starts: self.random_starts,
            extra_starts: Vec::new(),
        }
    }
}

/// Knobs of the evaluated error budgets.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    /// Gradient-net resolution entering the budgets.
    #[serde(default = "default_budget_epsilon")]
    pub epsilon: f64,
    /// Tail window as a fraction of the threshold.
    #[serde(default = "default_delta_frac")]
    pub delta_frac: f64,
}

fn default_budget_epsilon() -> f64 {
    0.25
}
fn default_delta_frac() -> f64 {
    0.05
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self { epsilon: default_budget_epsilon(), delta_frac: default_delta_frac() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_mc_samples")]
    pub samples: u64,
}

fn default_mc_samples() -> u64 {
    20_000
}

impl Default for McConfig {
    fn default() -> Self {
        Self { samples: default_mc_samples() }
    }
}

/// Inputs of the net-audit experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    /// spectral | gradient | fourier
    #[serde(default = "default_net_kind")]
    pub kind: String,
    /// Matrix sides (spectral, gradient) or coordinate counts (fourier).
    #[serde(default = "default_net_sides")]
    pub n: Vec<usize>,
    /// Operator-norm tolerances for spectral rounding.
    #[serde(default = "default_net_tau")]
    pub tau: Vec<f64>,
    /// Gradient tolerances for gradient and fourier rounding.
    #[serde(default)]
    pub epsilon: Vec<f64>,
    /// Random instances per parameter combination.
    #[serde(default = "default_net_count")]
    pub count: usize,
}

fn default_net_kind() -> String {
    "spectral".into()
}
fn default_net_sides() -> Vec<usize> {
    vec![16, 32]
}
fn default_net_tau() -> Vec<f64> {
    vec![0.8, 0.5, 0.3]
}
fn default_net_count() -> usize {
    5
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            kind: default_net_kind(),
            n: default_net_sides(),
            tau: default_net_tau(),
            epsilon: Vec::new(),
            count: default_net_count(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Exact enumeration is allowed up to 2^budget_states states.
    #[serde(default = "default_budget_states")]
    pub budget_states: u32,
    /// Append the closed-form reference column (triangles experiment).
    #[serde(default)]
    pub lz_overlay: bool,
    /// Output directory; overridden by --out, then by LDEV_OUT.
    #[serde(default)]
    pub out: Option<String>,
}

fn default_seed() -> u64 {
    7
}
fn default_budget_states() -> u32 {
    25
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            budget_states: default_budget_states(),
            lz_overlay: false,
            out: None,
        }
    }
}

/// A constructed functional together with the hooks the experiments need
/// beyond the shared trait: planted certificates and net size formulas are
/// family-specific.
pub enum BuiltFunctional {
    Edge(EdgeFunctional),
    Ap3(Ap3),
    Curie(CurieWeiss),
    Ergm(ErgmFunctional),
}

impl BuiltFunctional {
    pub fn as_dyn(&self) -> &dyn Functional {
        match self {
            BuiltFunctional::Edge(f) => f,
            BuiltFunctional::Ap3(f) => f,
            BuiltFunctional::Curie(f) => f,
            BuiltFunctional::Ergm(f) => f,
        }
    }
}

fn named_pattern(name: &str, edges: Option<&str>) -> Result<Graph, CliError> {
    match name {
        "edge" => Ok(Graph::single_edge()),
        "triangle" => Ok(Graph::triangle()),
        "c4" => Ok(Graph::cycle(4)),
        "k4" => Ok(Graph::complete(4)),
        "p3" => Ok(Graph::path(3)),
        "pattern" => {
            let text = edges.ok_or_else(|| {
                CliError::Config("functional.edges is required for pattern terms".into())
            })?;
            Graph::parse_edge_list(text).map_err(CliError::from)
        }
        other => Err(CliError::Config(format!(
            "unknown pattern {other:?}; use edge, triangle, c4, k4, p3, or pattern with an edge list"
        ))),
    }
}

impl FunctionalConfig {
    /// Construct the configured functional, optionally rescaling the
    /// Hamiltonian by `beta` (curie_weiss coupling, ergm weights).
    pub fn build(&self, beta: Option<f64>) -> Result<BuiltFunctional, CliError> {
        match self.kind.as_str() {
            "triangle" => Ok(BuiltFunctional::Edge(EdgeFunctional::new(
                Graph::triangle(),
                self.n_vertices,
            )?)),
            "edge" => Ok(BuiltFunctional::Edge(EdgeFunctional::new(
                Graph::single_edge(),
                self.n_vertices,
            )?)),
            "pattern" => {
                let g = named_pattern("pattern", self.edges.as_deref())?;
                Ok(BuiltFunctional::Edge(EdgeFunctional::new(g, self.n_vertices)?))
            }
            "ap3" => {
                if self.n < 3 {
                    return Err(CliError::Config(format!(
                        "functional.n = {} is too small for progressions (need 3)",
                        self.n
                    )));
                }
                Ok(BuiltFunctional::Ap3(Ap3::new(self.n)))
            }
            "curie_weiss" => {
                if self.n < 2 {
                    return Err(CliError::Config(format!(
                        "functional.n = {} is too small for a pair model (need 2)",
                        self.n
                    )));
                }
                let coupling = beta.unwrap_or(self.coupling);
                Ok(BuiltFunctional::Curie(CurieWeiss::new(self.n, coupling)))
            }
            "ergm" => {
                if self.terms.is_empty() {
                    return Err(CliError::Config(
                        "functional.terms must list at least one weighted pattern".into(),
                    ));
                }
                let scale = beta.unwrap_or(1.0);
                let mut patterns = Vec::new();
                for term in &self.terms {
                    let g = named_pattern(&term.pattern, term.edges.as_deref())?;
                    patterns.push((g, scale * term.weight));
                }
                Ok(BuiltFunctional::Ergm(ErgmFunctional::new(self.n_vertices, patterns)?))
            }
            other => Err(CliError::Config(format!(
                "unknown functional.kind {other:?}; see list-experiments for the registry"
            ))),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Full static validation: schema version, registry membership, grid
    /// domains, and a dry construction of the functional. Runs before any
    /// computation so bad configs never produce partial artifacts.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema: expected {SCHEMA_VERSION}, got {}",
                self.schema
            )));
        }
        if !is_known_experiment(&self.experiment) {
            return Err(CliError::Config(format!(
                "experiment: unknown name {:?}; known: {}",
                self.experiment,
                EXPERIMENTS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            )));
        }
        for (i, &p) in self.grid.p.iter().enumerate() {
            // reuse the library's open-interval check
            Bernoulli::new(p)
                .map_err(|e| CliError::Config(format!("grid.p[{i}]: {e}")))?;
        }
        for (i, &u) in self.grid.u.iter().enumerate() {
            if !(u > 1.0) || !u.is_finite() {
                return Err(CliError::Config(format!("grid.u[{i}] = {u} must exceed 1")));
            }
        }
        for (i, &t) in self.grid.t.iter().enumerate() {
            if !t.is_finite() {
                return Err(CliError::Config(format!("grid.t[{i}] = {t} must be finite")));
            }
        }
        for (i, &d) in self.grid.delta.iter().enumerate() {
            if !(d > 0.0) || !d.is_finite() {
                return Err(CliError::Config(format!("grid.delta[{i}] = {d} must be positive")));
            }
        }
        for (i, &b) in self.grid.beta.iter().enumerate() {
            if !b.is_finite() {
                return Err(CliError::Config(format!("grid.beta[{i}] = {b} must be finite")));
            }
        }
        if !(self.budget.epsilon > 0.0) || !self.budget.epsilon.is_finite() {
            return Err(CliError::Config(format!(
                "budget.epsilon = {} must be positive",
                self.budget.epsilon
            )));
        }
        if !(self.budget.delta_frac > 0.0 && self.budget.delta_frac < 1.0) {
            return Err(CliError::Config(format!(
                "budget.delta_frac = {} must lie in (0, 1)",
                self.budget.delta_frac
            )));
        }
        if self.mc.samples < 1_000 {
            return Err(CliError::Config(format!(
                "mc.samples = {} is below the minimum 1000",
                self.mc.samples
            )));
        }
        if self.run.budget_states > 40 {
            return Err(CliError::Config(format!(
                "run.budget_states = {} would enumerate more than 2^40 states",
                self.run.budget_states
            )));
        }
        if self.solver.max_outer == 0 || self.solver.max_inner == 0 {
            return Err(CliError::Config("solver iteration caps must be positive".into()));
        }
        if !(self.solver.tol > 0.0) {
            return Err(CliError::Config(format!(
                "solver.tol = {} must be positive",
                self.solver.tol
            )));
        }
        self.validate_experiment_axes()?;
        // dry construction: functional parameters fail here, not mid-run
        if self.experiment != "net-audit" {
            let beta = self.grid.beta.first().copied();
            self.functional.build(beta)?;
        }
        self.validate_net()?;
        Ok(())
    }

    fn validate_experiment_axes(&self) -> Result<(), CliError> {
        let has_threshold = !self.grid.u.is_empty() || !self.grid.t.is_empty();
        match self.experiment.as_str() {
            "rate" | "sandwich" | "ap3" => {
                if !has_threshold {
                    return Err(CliError::Config(format!(
                        "experiment {:?} needs grid.u or grid.t",
                        self.experiment
                    )));
                }
                if !self.grid.u.is_empty() && !self.grid.t.is_empty() {
                    return Err(CliError::Config(
                        "give thresholds as grid.u or grid.t, not both".into(),
                    ));
                }
                if self.experiment == "ap3" && self.functional.kind != "ap3" {
                    return Err(CliError::Config(
                        "the ap3 experiment requires functional.kind = \"ap3\"".into(),
                    ));
                }
            }
            "triangles" => {
                if self.grid.delta.is_empty() {
                    return Err(CliError::Config("the triangles experiment needs grid.delta".into()));
                }
                if self.functional.kind != "triangle" {
                    return Err(CliError::Config(
                        "the triangles experiment requires functional.kind = \"triangle\"".into(),
                    ));
                }
            }
            "free-energy" | "ergm" => {
                if self.grid.beta.is_empty() {
                    return Err(CliError::Config(format!(
                        "experiment {:?} needs grid.beta",
                        self.experiment
                    )));
                }
                if self.experiment == "ergm" && self.functional.kind != "ergm" {
                    return Err(CliError::Config(
                        "the ergm experiment requires functional.kind = \"ergm\"".into(),
                    ));
                }
            }
            "net-audit" => {}
            _ => unreachable!("registry membership was checked"),
        }
        if self.run.lz_overlay && self.experiment != "triangles" {
            return Err(CliError::Config(
                "the reference overlay column applies to the triangles experiment only".into(),
            ));
        }
        Ok(())
    }

    fn validate_net(&self) -> Result<(), CliError> {
        if self.experiment != "net-audit" {
            return Ok(());
        }
        let net = &self.net;
        if net.count == 0 || net.n.is_empty() {
            return Err(CliError::Config("net.count and net.n must be nonempty".into()));
        }
        match net.kind.as_str() {
            "spectral" => {
                if net.tau.is_empty() {
                    return Err(CliError::Config("spectral audits need net.tau".into()));
                }
                for (i, &t) in net.tau.iter().enumerate() {
                    if !(t > 0.0 && t < 1.0) {
                        return Err(CliError::Config(format!(
                            "net.tau[{i}] = {t} must lie in (0, 1)"
                        )));
                    }
                }
            }
            "gradient" | "fourier" => {
                if net.epsilon.is_empty() {
                    return Err(CliError::Config(format!(
                        "{} audits need net.epsilon",
                        net.kind
                    )));
                }
                for (i, &e) in net.epsilon.iter().enumerate() {
                    if !(e > 0.0) || !e.is_finite() {
                        return Err(CliError::Config(format!(
                            "net.epsilon[{i}] = {e} must be positive"
                        )));
                    }
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown net.kind {other:?}; use spectral, gradient, or fourier"
                )));
            }
        }
        Ok(())
    }
}

/// Built-in config for running an experiment without a file. Each default
/// is a small instance that finishes in seconds.
pub fn default_config(experiment: &str) -> Result<Config, CliError> {
    if !is_known_experiment(experiment) {
        return Err(CliError::Config(format!(
            "experiment: unknown name {experiment:?}; known: {}",
            EXPERIMENTS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
        )));
    }
    let mut cfg = Config {
        schema: SCHEMA_VERSION,
        experiment: experiment.to_string(),
        functional: FunctionalConfig::default(),
        grid: GridConfig::default(),
        solver: SolverConfig::default(),
        budget: BudgetConfig::default(),
        mc: McConfig::default(),
        net: NetConfig::default(),
        run: RunConfig::default(),
    };
    match experiment {
        "rate" => {
            cfg.functional.n_vertices = 5;
            cfg.grid.u = vec![1.2, 1.5];
        }
        "sandwich" => {
            cfg.grid.u = vec![1.2, 1.5, 2.0];
        }
        "free-energy" => {
            cfg.functional.kind = "curie_weiss".into();
            cfg.functional.n = 16;
            cfg.grid.beta = vec![0.5, 1.0, 2.0];
        }
        "net-audit" => {}
        "triangles" => {
            cfg.functional.n_vertices = 16;
            cfg.grid.delta = vec![0.5, 1.0, 2.0, 4.0, 8.0];
            // 120 coordinates: planted warm starts do the heavy lifting
            cfg.solver.random_starts = 4;
        }
        "ap3" => {
            cfg.functional.kind = "ap3".into();
            cfg.functional.n = 64;
            cfg.grid.p = vec![0.4];
            cfg.grid.u = vec![1.2, 1.5, 2.0];
            cfg.solver.random_starts = 4;
        }
        "ergm" => {
            cfg.functional.kind = "ergm".into();
            cfg.functional.terms =
                vec![TermConfig { pattern: "triangle".into(), edges: None, weight: 1.0 }];
            cfg.grid.beta = vec![0.2, 0.5];
        }
        _ => unreachable!(),
    }
    cfg.validate().expect("built-in configs stay valid");
    Ok(cfg)
}
