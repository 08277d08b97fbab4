//! Configuration, experiment catalog and report output for the `fbmoo` binary.

use std::fs;
use std::path::{Path, PathBuf};

use fbmoo_core::dyadic::{DyadicCube, Lattice};
use fbmoo_core::gridfn::GridFunction;
use fbmoo_core::operators::KernelSpec;
use fbmoo_core::verify::{self, ExperimentReport, FbmooParams, OperatorKind, SharpnessParams, Tolerances};
use fbmoo_core::weights::{Exponent, ExponentTuple, Q};
use serde::{Deserialize, Serialize};

/// Largest grid resolution accepted from a config.
pub const MAX_CONFIG_RESOLUTION: u32 = 20;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] fbmoo_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// A real number written either as a JSON number or as a string such as `"1/2"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Real {
    Number(f64),
    #[serde(with = "rational_string")]
    Rational(Q),
}

mod rational_string {
    use super::Q;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&q.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let text = String::deserialize(d)?;
        text.trim().parse::<Q>().map_err(serde::de::Error::custom)
    }
}

impl Real {
    pub fn as_f64(self) -> f64 {
        match self {
            Real::Number(x) => x,
            Real::Rational(q) => *q.numer() as f64 / *q.denom() as f64,
        }
    }

    pub fn as_rational(self) -> CliResult<Q> {
        match self {
            Real::Rational(q) => Ok(q),
            Real::Number(x) => Q::approximate_float(x).ok_or_else(|| config_err(format!("{x} is not a usable real"))),
        }
    }
}

/// A function on the grid described by a few parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant {
        value: f64,
    },
    /// `χ_{[a,b)}` sampled at midpoints.
    Indicator {
        a: f64,
        b: f64,
    },
    /// `x^exponent` sampled at midpoints.
    Power {
        exponent: f64,
    },
    Haar {
        level: u32,
        index: u64,
        #[serde(default = "yes")]
        cancellative: bool,
    },
    /// Piecewise constant on level-`level` intervals, values in `[lo, hi)`.
    Random {
        seed: u64,
        #[serde(default = "default_piece_level")]
        level: u32,
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    /// `exp` of a random trigonometric sum; a positive log-Lipschitz weight.
    LogLipschitz {
        seed: u64,
    },
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn default_piece_level() -> u32 {
    4
}

impl FunctionSpec {
    pub fn build(&self, resolution: u32) -> CliResult<GridFunction> {
        check_resolution(resolution)?;
        let f = match *self {
            FunctionSpec::Constant { value } => GridFunction::new(resolution, vec![value; 1 << resolution])?,
            FunctionSpec::Indicator { a, b } => GridFunction::indicator(resolution, a, b),
            FunctionSpec::Power { exponent } => {
                GridFunction::new(resolution, GridFunction::from_fn_midpoint(resolution, |x| x.powf(exponent)).into_values())?
            }
            FunctionSpec::Haar {
                level,
                index,
                cancellative,
            } => {
                if index >= 1u64 << level.min(63) {
                    return Err(config_err(format!("Haar index {index} out of range at level {level}")));
                }
                GridFunction::haar(resolution, &DyadicCube::standard(level, index), cancellative)?
            }
            FunctionSpec::Random { seed, level, lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(config_err(format!("random range [{lo}, {hi}) is empty")));
                }
                GridFunction::random_piecewise(resolution, level, lo, hi, &mut verify::rng_from_seed(seed))
            }
            FunctionSpec::LogLipschitz { seed } => {
                verify::random_log_lipschitz(resolution, &mut verify::rng_from_seed(seed))
            }
        };
        Ok(f)
    }
}

/// `dump-function` input: a function spec plus its resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpSpec {
    #[serde(default = "default_dump_resolution")]
    pub resolution: u32,
    #[serde(flatten)]
    pub function: FunctionSpec,
}

fn default_dump_resolution() -> u32 {
    10
}

fn check_resolution(n: u32) -> CliResult<()> {
    if n > MAX_CONFIG_RESOLUTION {
        return Err(config_err(format!("resolution {n} exceeds the limit {MAX_CONFIG_RESOLUTION}")));
    }
    Ok(())
}

/// One experiment invocation. Unknown keys are rejected; known keys the
/// chosen experiment does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    pub resolution: Option<u32>,
    pub depth: Option<u32>,
    pub samples: Option<usize>,
    pub pairs: Option<usize>,
    pub m: Option<usize>,
    pub eta: Option<Real>,
    pub p: Option<Vec<Exponent>>,
    pub r: Option<Vec<Exponent>>,
    pub s: Option<Exponent>,
    pub delta: Option<f64>,
    pub operator: Option<OperatorKind>,
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
    #[serde(default)]
    pub weights: Vec<FunctionSpec>,
    pub f_exponent: Option<f64>,
    pub weight_powers: Option<Vec<f64>>,
    pub resolutions: Option<Vec<u32>>,
    pub t_points: Option<usize>,
    pub omega_power: Option<f64>,
    pub mu_power: Option<f64>,
    pub k: Option<u32>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    fn resolution_or(&self, default: u32) -> CliResult<u32> {
        let n = self.resolution.unwrap_or(default);
        check_resolution(n)?;
        Ok(n)
    }

    fn eta_or(&self, default: f64) -> f64 {
        self.eta.map_or(default, Real::as_f64)
    }

    fn m_or(&self, default: usize) -> CliResult<usize> {
        let m = self.m.unwrap_or(default);
        if m == 0 {
            return Err(config_err("m must be at least 1"));
        }
        Ok(m)
    }

    /// `r` as floats, one per input, defaulting to `1`.
    fn r_values(&self, m: usize) -> CliResult<Vec<f64>> {
        match &self.r {
            None => Ok(vec![1.0; m]),
            Some(r) if r.len() != m => Err(config_err(format!("expected {m} entries in r, got {}", r.len()))),
            Some(r) => r
                .iter()
                .map(|e| {
                    let v = e.value();
                    if v.is_finite() && v >= 1.0 {
                        Ok(v)
                    } else {
                        Err(config_err(format!("r = {e} must lie in [1, ∞)")))
                    }
                })
                .collect(),
        }
    }

    /// The exponent tuple, validated, when `p` is present.
    pub fn exponent_tuple(&self) -> CliResult<Option<ExponentTuple>> {
        let Some(p) = &self.p else { return Ok(None) };
        let r = self.r.clone().unwrap_or_else(|| p.clone());
        let eta = self.eta.map(Real::as_rational).transpose()?.unwrap_or_default();
        let s = self.s.unwrap_or(Exponent::INFINITY);
        Ok(Some(ExponentTuple::new(eta, p, &r, s)?))
    }

    fn inputs(&self, m: usize, resolution: u32) -> CliResult<Vec<GridFunction>> {
        if self.functions.len() != m {
            return Err(config_err(format!("expected {m} function specs, got {}", self.functions.len())));
        }
        self.functions.iter().map(|f| f.build(resolution)).collect()
    }
}

/// One catalog entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub result: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "haar_system",
        description: "orthonormality of the Haar basis and Parseval on random functions",
        result: "Haar decomposition of dyadic martingales",
    },
    CatalogEntry {
        name: "sparse_constructor",
        description: "sparsity and Markov bound of the Calderón-Zygmund stopping time",
        result: "sparse family construction by stopping cubes",
    },
    CatalogEntry {
        name: "pointwise_domination",
        description: "sup |I_η f| / A_S f under resolution refinement",
        result: "pointwise sparse domination of multilinear fractional operators",
    },
    CatalogEntry {
        name: "maximal_weak_type",
        description: "weak-type ratio of the dyadic fractional maximal function by level-set sweep",
        result: "weak-type bound for the multilinear fractional maximal function",
    },
    CatalogEntry {
        name: "weight_arithmetic",
        description: "exact exponent identities and norm identities for weight tuples",
        result: "extrapolation exponent relations",
    },
    CatalogEntry {
        name: "factorization",
        description: "factorization inequalities and round trip for log-Lipschitz weights",
        result: "factorization of multilinear fractional weights",
    },
    CatalogEntry {
        name: "sharpness",
        description: "growth of the sparse operator norm against the weight constant for power weights",
        result: "sharp weighted bound for sparse operators",
    },
    CatalogEntry {
        name: "shift_paraproduct",
        description: "stability of shift and paraproduct norm surrogates under refinement",
        result: "fractional dyadic shifts and paraproducts",
    },
    CatalogEntry {
        name: "fbmoo_conditions",
        description: "empirical constants of the two mean-oscillation conditions",
        result: "bounded mean oscillation operator conditions",
    },
    CatalogEntry {
        name: "local_decay",
        description: "level sets of |I_η f| / M f and their tail decay",
        result: "local exponential decay estimate",
    },
    CatalogEntry {
        name: "mixed_weak",
        description: "mixed weak-type comparison of I_η and M with weights w and v",
        result: "mixed weak-type estimate",
    },
    CatalogEntry {
        name: "bloom",
        description: "Bloom weights from power weights and a commutator sparse form (ungated)",
        result: "Bloom-type two-weight estimate for commutators",
    },
];

/// Runs the experiment named in `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<ExperimentReport> {
    let tol = &cfg.tolerances;
    let seed = cfg.seed;
    if let Some(n) = cfg.resolution {
        check_resolution(n)?;
    }
    // exponents given in the config must be admissible whatever the experiment
    cfg.exponent_tuple()?;
    let report = match cfg.experiment.as_str() {
        "haar_system" => verify::check_haar_system(cfg.depth.unwrap_or(8), cfg.resolution_or(12)?, seed, tol)?,
        "sparse_constructor" => verify::check_sparse_constructor(
            cfg.m_or(1)?,
            cfg.delta.unwrap_or(0.5),
            cfg.resolution_or(10)?,
            cfg.samples.unwrap_or(200),
            seed,
        )?,
        "pointwise_domination" => {
            let m = cfg.m_or(1)?;
            let eta = cfg.eta_or(0.5);
            let delta = cfg.delta.unwrap_or(0.5);
            let n = cfg.resolution_or(10)?;
            if cfg.functions.is_empty() {
                verify::pointwise_domination_suite(m, eta, delta, n, cfg.samples.unwrap_or(50), seed, tol)?
            } else {
                let mut rep =
                    verify::check_pointwise_domination(&cfg.inputs(m, n)?, &KernelSpec::new(m, eta), delta, tol)?;
                rep.seed = seed;
                rep
            }
        }
        "maximal_weak_type" => {
            let m = cfg.m_or(1)?;
            let n = cfg.resolution_or(12)?;
            let lattice = Lattice::standard(cfg.depth.unwrap_or(n))?;
            let eta = cfg.eta_or(0.0) / m as f64;
            let fs = if cfg.functions.is_empty() {
                let mut rng = verify::rng_from_seed(seed);
                (0..m).map(|_| verify::random_input(n, &mut rng)).collect()
            } else {
                cfg.inputs(m, n)?
            };
            let mut rep = verify::check_maximal_weak_type(&fs, &cfg.r_values(m)?, &vec![eta; m], &lattice, tol)?;
            rep.seed = seed;
            rep
        }
        "weight_arithmetic" => verify::check_weight_arithmetic(
            cfg.samples.unwrap_or(1000),
            cfg.pairs.unwrap_or(100),
            cfg.resolution_or(8)?,
            seed,
            tol,
        )?,
        "factorization" => verify::check_factorization(cfg.samples.unwrap_or(50), cfg.depth.unwrap_or(8), seed, tol)?,
        "sharpness" => {
            let d = SharpnessParams::default();
            let params = SharpnessParams {
                resolution: cfg.resolution_or(d.resolution)?,
                p: single(&cfg.p, d.p, "p")?,
                r: single(&cfg.r, d.r, "r")?,
                s: cfg.s.unwrap_or(d.s),
                eta: cfg.eta_or(d.eta),
                f_exponent: cfg.f_exponent.unwrap_or(d.f_exponent),
                weight_powers: cfg.weight_powers.clone().unwrap_or(d.weight_powers),
            };
            check_resolution(params.resolution + 1)?;
            let mut rep = verify::check_sharp_weighted_bound(&params, tol)?;
            rep.seed = seed;
            rep
        }
        "shift_paraproduct" => {
            let m = cfg.m_or(1)?;
            let resolutions = cfg.resolutions.clone().unwrap_or_else(|| vec![8, 9, 10]);
            for n in &resolutions {
                check_resolution(*n)?;
            }
            let r = match &cfg.r {
                None => vec![2.0; m],
                Some(_) => cfg.r_values(m)?,
            };
            verify::check_shift_paraproduct_stability(m, cfg.eta_or(0.25), &r, &resolutions, seed, tol)?
        }
        "fbmoo_conditions" => {
            let m = cfg.m_or(1)?;
            let params = FbmooParams {
                operator: cfg.operator.unwrap_or(OperatorKind::FractionalIntegral),
                m,
                eta: cfg.eta_or(0.5),
                r: cfg.r_values(m)?,
                resolution: cfg.resolution_or(8)?,
                depth: cfg.depth.unwrap_or(6),
                samples: cfg.samples.unwrap_or(80),
            };
            check_resolution(params.resolution + 1)?;
            verify::check_fbmoo_conditions(&params, seed, tol)?
        }
        "local_decay" => {
            let m = cfg.m_or(1)?;
            let eta = cfg.eta_or(0.5);
            let n = cfg.resolution_or(10)?;
            let t_points = cfg.t_points.unwrap_or(64);
            if cfg.functions.is_empty() {
                verify::local_decay_suite(m, eta, n, cfg.samples.unwrap_or(20), t_points, seed)?
            } else {
                let lattice = Lattice::standard(cfg.depth.unwrap_or(n))?;
                let mut rep =
                    verify::check_local_decay(&cfg.inputs(m, n)?, &KernelSpec::new(m, eta), &lattice, t_points)?;
                rep.seed = seed;
                rep
            }
        }
        "mixed_weak" => {
            let m = cfg.m_or(1)?;
            let n = cfg.resolution_or(10)?;
            check_resolution(n + 1)?;
            let fs = if cfg.functions.is_empty() {
                vec![GridFunction::constant(n, 1.0); m]
            } else {
                cfg.inputs(m, n)?
            };
            let (w, v) = match cfg.weights.as_slice() {
                [] => (GridFunction::constant(n, 1.0), GridFunction::constant(n, 1.0)),
                [w, v] => (w.build(n)?, v.build(n)?),
                other => return Err(config_err(format!("mixed_weak takes weights [w, v], got {}", other.len()))),
            };
            let lattice = Lattice::standard(cfg.depth.unwrap_or(n))?;
            let mut rep = verify::check_mixed_weak(&fs, &KernelSpec::new(m, cfg.eta_or(0.5)), &w, &v, &lattice, tol)?;
            rep.seed = seed;
            rep
        }
        "bloom" => verify::check_bloom_smoke(
            cfg.resolution_or(10)?,
            cfg.omega_power.unwrap_or(0.25),
            cfg.mu_power.unwrap_or(-0.25),
            cfg.k.unwrap_or(1),
        )?,
        other => {
            let names: Vec<&str> = CATALOG.iter().map(|e| e.name).collect();
            return Err(config_err(format!("unknown experiment '{other}'; known: {}", names.join(", "))));
        }
    };
    Ok(report)
}

fn single(list: &Option<Vec<Exponent>>, default: Exponent, name: &str) -> CliResult<Exponent> {
    match list.as_deref() {
        None => Ok(default),
        Some([e]) => Ok(*e),
        Some(other) => Err(config_err(format!("sharpness takes a single {name}, got {}", other.len()))),
    }
}

/// Writes the report JSON and, if requested, a long-format CSV of its series.
pub fn write_outputs(cfg: &ExperimentConfig, report: &ExperimentReport) -> CliResult<()> {
    if let Some(path) = &cfg.output {
        fs::write(path, report.to_json()? + "\n").map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
    }
    if let Some(path) = &cfg.csv {
        let file = fs::File::create(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        write_series_csv(report, file)?;
    }
    Ok(())
}

pub fn write_series_csv<W: std::io::Write>(report: &ExperimentReport, w: W) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["series", "index", "value"])?;
    for (name, values) in &report.series {
        for (i, v) in values.iter().enumerate() {
            out.write_record([name.as_str(), &i.to_string(), &v.to_string()])?;
        }
    }
    out.flush().map_err(|source| CliError::Io {
        path: PathBuf::from("<csv>"),
        source,
    })?;
    Ok(())
}

/// Human-readable summary of a report.
pub fn render(report: &ExperimentReport) -> String {
    let mut s = format!("experiment {} (seed {})\n", report.name, report.seed);
    for (k, v) in &report.measured {
        s.push_str(&format!("  {k:<32} {v:.6e}\n"));
    }
    for f in &report.flags {
        let rel = serde_json::to_value(f.relation).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        s.push_str(&format!(
            "  [{}] {}: {} = {:.6e} {rel} {:.6e}\n",
            if f.pass { "PASS" } else { "FAIL" },
            f.name,
            f.quantity,
            f.value,
            f.threshold
        ));
    }
    for n in &report.notes {
        s.push_str(&format!("  note: {n}\n"));
    }
    s.push_str(if report.passed() { "PASS\n" } else { "FAIL\n" });
    s
}

/// Parses a `dump-function` spec given inline as JSON or as a path to a JSON file.
pub fn parse_dump_spec(arg: &str) -> CliResult<DumpSpec> {
    let text = if Path::new(arg).is_file() {
        fs::read_to_string(arg).map_err(|source| CliError::Io {
            path: PathBuf::from(arg),
            source,
        })?
    } else {
        arg.to_string()
    };
    Ok(serde_json::from_str(&text)?)
}
