//! Experiments that turn the weighted, sparse and weak-type inequalities of
//! the library into measured, reproducible reports.

use std::collections::BTreeMap;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{haar_coefficients, DyadicCube, Lattice, Side};
use crate::error::{Error, Result};
use crate::gridfn::{maximal_avg, GridFunction};
use crate::operators::{
    apply_paraproduct, apply_shift, fractional_integral_cells, fractional_integral_grid, maximal_grid, KernelSpec,
    ParaproductSpec, ShiftSpec, ShiftTerm,
};
use crate::sparse::{build_sparse_cz, is_sparse, sparse_form, sparse_operator_grid, SparseFamily, SymbolData};
use crate::weights::{
    ap_constant, bloom_weight, check_inverse_bound, factorize_weights, inverse_factorize, multilinear_constant,
    norm_identities, power_weight, Exponent, ExponentTuple, WeightTuple, Q,
};

/// Every pass threshold used by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Cap on domination and mixed weak-type ratios.
    pub c_cap: f64,
    /// Relative change allowed under sample or resolution doubling.
    pub stability: f64,
    /// Slack on the weak-type bound.
    pub weak_tol: f64,
    /// Dyadic hull constant in the weak-type bound `C_0^{1/r̃}(1 + weak_tol)`.
    pub hull_constant: f64,
    /// Slack on the sharp exponent.
    pub sharp_slack: f64,
    /// Relative change of `R` allowed under refinement.
    pub refinement: f64,
    /// Relative change of the shift and paraproduct norm surrogates.
    pub operator_stability: f64,
    /// Relative error allowed in exact identities evaluated in floating point.
    pub identity: f64,
    /// Tolerance for Haar orthonormality and Parseval.
    pub haar: f64,
    /// Relative error of the weight factorization round trip.
    pub round_trip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            c_cap: 50.0,
            stability: 0.25,
            weak_tol: 0.1,
            hull_constant: 2.0,
            sharp_slack: 0.15,
            refinement: 0.05,
            operator_stability: 0.10,
            identity: 1e-9,
            haar: 1e-10,
            round_trip: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
}

/// A pass/fail decision on one measured quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub name: String,
    pub quantity: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: serde_json::Value,
    pub seed: u64,
    pub measured: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub series: BTreeMap<String, Vec<f64>>,
    pub flags: Vec<Flag>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub runtime_ms: u64,
    pub timestamp: String,
}

impl ExperimentReport {
    pub fn new(name: &str, parameters: serde_json::Value, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            parameters,
            seed,
            measured: BTreeMap::new(),
            series: BTreeMap::new(),
            flags: Vec::new(),
            notes: Vec::new(),
            runtime_ms: 0,
            timestamp: String::new(),
        }
    }

    pub fn measure(&mut self, key: &str, value: f64) -> &mut Self {
        self.measured.insert(key.to_string(), value);
        self
    }

    pub fn record_series(&mut self, key: &str, values: Vec<f64>) -> &mut Self {
        self.series.insert(key.to_string(), values);
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    /// Adds a flag on an already measured quantity.
    pub fn flag(&mut self, name: &str, quantity: &str, relation: Relation, threshold: f64) -> &mut Self {
        let value = self.measured.get(quantity).copied().unwrap_or(f64::NAN);
        let pass = match relation {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
            Relation::Below => value < threshold,
        };
        self.flags.push(Flag {
            name: name.to_string(),
            quantity: quantity.to_string(),
            value,
            relation,
            threshold,
            pass,
        });
        self
    }

    pub fn passed(&self) -> bool {
        self.flags.iter().all(|f| f.pass)
    }

    pub fn flag_named(&self, name: &str) -> Option<&Flag> {
        self.flags.iter().find(|f| f.name == name)
    }

    fn finish(mut self, start: Instant) -> Self {
        self.runtime_ms = start.elapsed().as_millis() as u64;
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.timestamp = secs.to_string();
        self
    }

    /// The report with timing fields cleared; equal for equal inputs.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.runtime_ms = 0;
        r.timestamp.clear();
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Below this both quantities count as zero; they are ratios normalized to O(1).
const NEGLIGIBLE: f64 = 1e-12;

fn rel_change(a: f64, b: f64) -> f64 {
    if a == b || a.abs().max(b.abs()) < NEGLIGIBLE {
        return 0.0;
    }
    (b - a).abs() / a.abs().max(b.abs())
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Seeded generator used by every experiment.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random nonnegative function constant on dyadic intervals of level 3 or 4,
/// each piece zero with probability 1/4.
pub fn random_input(resolution: u32, rng: &mut impl Rng) -> GridFunction {
    let level = rng.gen_range(3..=4u32).min(resolution);
    let pieces: Vec<f64> = (0..1usize << level)
        .map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.05..1.0) })
        .collect();
    let width = 1usize << (resolution - level);
    let values = (0..1usize << resolution).map(|k| pieces[k / width]).collect();
    GridFunction::new(resolution, values).expect("finite values")
}

/// Random function whose first piece is nonzero, so that all averages over
/// the root are positive.
fn random_inputs(m: usize, resolution: u32, rng: &mut impl Rng) -> Vec<GridFunction> {
    (0..m)
        .map(|_| loop {
            let f = random_input(resolution, rng);
            if f.integral() > 0.0 {
                break f;
            }
        })
        .collect()
}

/// `exp(Σ_k c_k sin(2πk x + φ_k))` with `Σ|c_k| <= 1`, midpoint sampled.
pub fn random_log_lipschitz(resolution: u32, rng: &mut impl Rng) -> GridFunction {
    let terms: Vec<(f64, f64, f64)> = (1..=3)
        .map(|k| (rng.gen_range(-1.0..1.0) / 3.0, k as f64, rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    GridFunction::from_fn_midpoint(resolution, |x| {
        terms
            .iter()
            .map(|(c, k, ph)| c * (std::f64::consts::TAU * k * x + ph).sin())
            .sum::<f64>()
            .exp()
    })
}

/// `sup_λ λ ν({q > λ})^{1/r̃}` over all level sets of `q`, with cell masses `nu`.
pub fn weak_quasinorm(q: &[f64], nu: &[f64], inv_r_tilde: f64) -> f64 {
    let mut pairs: Vec<(f64, f64)> = q.iter().map(|v| v.abs()).zip(nu.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best: f64 = 0.0;
    let mut mass = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == v {
            mass += pairs[i].1;
            i += 1;
        }
        if v > 0.0 {
            best = best.max(v * f64::powf(mass, inv_r_tilde));
        }
    }
    best
}

fn ones(m: usize) -> Vec<f64> {
    vec![1.0; m]
}

/// Orthonormality of the Haar functions of a depth-`depth` lattice and
/// Parseval on random functions.
pub fn check_haar_system(depth: u32, resolution: u32, seed: u64, tol: &Tolerances) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new(
        "haar_system",
        serde_json::json!({"depth": depth, "resolution": resolution}),
        seed,
    );
    if depth + 1 > resolution {
        return Err(Error::ResolutionMismatch {
            level: depth + 1,
            shift_bits: 0,
            resolution,
        });
    }
    let lattice = Lattice::standard(depth)?;
    let h = (-(resolution as f64)).exp2();
    let value = |cube: &DyadicCube, cell: usize| -> f64 {
        let span = cube.cells(resolution).expect("resolvable");
        if !span.contains(cell) {
            return 0.0;
        }
        let norm = cube.measure().sqrt().recip();
        let local = (cell + span.n - span.start) % span.n;
        if local < span.len / 2 {
            norm
        } else {
            -norm
        }
    };
    let cubes: Vec<DyadicCube> = lattice.cubes().collect();
    let mut worst: f64 = 0.0;
    for (a, i) in cubes.iter().enumerate() {
        for j in &cubes[a..] {
            // j is at least as deep as i
            let span = j.cells(resolution)?;
            let ip: f64 = span.iter().map(|c| value(i, c) * value(j, c)).sum::<f64>() * h;
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((ip - expected).abs());
        }
    }
    rep.measure("orthonormality_error", worst);
    rep.measure("cube_count", cubes.len() as f64);

    let mut rng = rng_from_seed(seed);
    // f constant below level depth+1, so Haar levels <= depth are complete
    let coarse = GridFunction::random_piecewise(resolution, depth + 1, -1.0, 1.0, &mut rng);
    let parseval = |f: &GridFunction, lat: &Lattice| -> Result<f64> {
        let coeffs = haar_coefficients(f, lat)?;
        let energy: f64 = coeffs.iter().map(|c| c * c).sum::<f64>() + f.integral().powi(2);
        let norm2 = f.lp_norm(2.0).powi(2);
        Ok((energy - norm2).abs() / norm2.max(f64::MIN_POSITIVE))
    };
    rep.measure("parseval_error", parseval(&coarse, &lattice)?);
    let full = GridFunction::random_piecewise(resolution, resolution, -1.0, 1.0, &mut rng);
    rep.measure("parseval_error_full", parseval(&full, &Lattice::standard(resolution - 1)?)?);
    rep.flag("orthonormality", "orthonormality_error", Relation::AtMost, tol.haar)
        .flag("parseval", "parseval_error", Relation::AtMost, tol.haar)
        .flag("parseval_full", "parseval_error_full", Relation::AtMost, tol.haar);
    Ok(rep.finish(start))
}

/// Sparsity and the Markov bound for the stopping-time constructor over
/// random inputs.
pub fn check_sparse_constructor(m: usize, delta: f64, resolution: u32, samples: usize, seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new(
        "sparse_constructor",
        serde_json::json!({"m": m, "delta": delta, "resolution": resolution, "samples": samples}),
        seed,
    );
    let mut rng = rng_from_seed(seed);
    let root = DyadicCube::standard(0, 0);
    let (mut sparse_fail, mut markov_fail) = (0usize, 0usize);
    let mut max_family = 0usize;
    let mut max_ratio: f64 = 0.0;
    for _ in 0..samples {
        let fs: Vec<GridFunction> = (0..m).map(|_| random_input(resolution, &mut rng)).collect();
        let g = random_input(resolution, &mut rng);
        let (fam, trace) = build_sparse_cz(&fs, &g, &root, delta)?;
        if !is_sparse(&fam).sparse {
            sparse_fail += 1;
        }
        if !trace.markov_holds() {
            markov_fail += 1;
        }
        for s in &trace.steps {
            max_ratio = max_ratio.max(s.selected_measure / s.bound);
        }
        max_family = max_family.max(fam.len());
    }
    rep.measure("sparsity_failures", sparse_fail as f64)
        .measure("markov_failures", markov_fail as f64)
        .measure("max_family_size", max_family as f64)
        .measure("max_selected_over_bound", max_ratio)
        .flag("sparse", "sparsity_failures", Relation::AtMost, 0.0)
        .flag("markov", "markov_failures", Relation::AtMost, 0.0);
    Ok(rep.finish(start))
}

/// `sup_x |I_η f⃗(x)| / 𝒜_S f⃗(x)` for the family built by the stopping time
/// with surrogate `g = Σ f_i`.
fn domination_sup(fs: &[GridFunction], kernel: &KernelSpec, delta: f64) -> Result<Option<f64>> {
    let n = fs[0].resolution();
    let mut g = GridFunction::zeros(n);
    for f in fs {
        g = g.zip_with(f, |a, b| a + b)?;
    }
    let (family, _) = build_sparse_cz(fs, &g, &DyadicCube::standard(0, 0), delta)?;
    let sym = SymbolData::trivial(fs.len(), n);
    let a = sparse_operator_grid(&family, &sym, fs, &ones(fs.len()), kernel.eta)?;
    let t = fractional_integral_grid(fs, kernel)?;
    let mut best: Option<f64> = None;
    for (tv, av) in t.values().iter().zip(a.values()) {
        if *av > 0.0 {
            let c = tv.abs() / av;
            best = Some(best.map_or(c, |b: f64| b.max(c)));
        }
    }
    Ok(best)
}

/// Pointwise domination ratio for one input tuple at `N` and `N+1`.
pub fn check_pointwise_domination(fs: &[GridFunction], kernel: &KernelSpec, delta: f64, tol: &Tolerances) -> Result<ExperimentReport> {
    let start = Instant::now();
    let n = fs
        .first()
        .ok_or_else(|| Error::InvalidParameter("no inputs".into()))?
        .resolution();
    let mut rep = ExperimentReport::new(
        "pointwise_domination",
        serde_json::json!({"m": kernel.m, "eta": kernel.eta, "delta": delta, "resolution": n}),
        0,
    );
    let coarse = domination_sup(fs, kernel, delta)?;
    let fine_inputs: Vec<GridFunction> = fs.iter().map(GridFunction::refine).collect();
    let fine = domination_sup(&fine_inputs, kernel, delta)?;
    match (coarse, fine) {
        (Some(c), Some(f)) => {
            rep.measure("sup_ratio", c)
                .measure("sup_ratio_refined", f)
                .measure("refinement_change", rel_change(c, f))
                .flag("finite", "sup_ratio", Relation::AtMost, tol.c_cap)
                .flag("stable", "refinement_change", Relation::Below, tol.stability);
        }
        _ => {
            rep.note("no evaluable points: sparse operator vanishes everywhere");
        }
    }
    Ok(rep.finish(start))
}

/// [`check_pointwise_domination`] over `samples` random input tuples.
pub fn pointwise_domination_suite(
    m: usize,
    eta: f64,
    delta: f64,
    resolution: u32,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new(
        "pointwise_domination",
        serde_json::json!({"m": m, "eta": eta, "delta": delta, "resolution": resolution, "samples": samples}),
        seed,
    );
    let kernel = KernelSpec::new(m, eta);
    let mut rng = rng_from_seed(seed);
    let (mut sups, mut changes) = (Vec::new(), Vec::new());
    for _ in 0..samples {
        let fs = random_inputs(m, resolution, &mut rng);
        let r = check_pointwise_domination(&fs, &kernel, delta, tol)?;
        if let (Some(c), Some(ch)) = (r.measured.get("sup_ratio"), r.measured.get("refinement_change")) {
            sups.push(*c);
            changes.push(*ch);
        }
    }
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    rep.measure("evaluated_samples", sups.len() as f64)
        .measure("max_sup_ratio", max(&sups))
        .measure("max_refinement_change", max(&changes))
        .record_series("sup_ratio", sups)
        .record_series("refinement_change", changes)
        .flag("finite", "max_sup_ratio", Relation::AtMost, tol.c_cap)
        .flag("stable", "max_refinement_change", Relation::Below, tol.stability);
    Ok(rep.finish(start))
}

/// Weak-type ratio `sup_λ λ|{M f⃗ > λ}|^{1/r̃} / Π‖f_i‖_{r_i}` by an exhaustive
/// sweep over the level sets of the grid maximal function.
pub fn check_maximal_weak_type(
    fs: &[GridFunction],
    r: &[f64],
    eta: &[f64],
    lattice: &Lattice,
    tol: &Tolerances,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new(
        "maximal_weak_type",
        serde_json::json!({"m": fs.len(), "r": r, "eta": eta, "depth": lattice.max_level()}),
        0,
    );
    let inv_r_tilde: f64 = r.iter().map(|x| 1.0 / x).sum::<f64>() - eta.iter().sum::<f64>();
    if !(inv_r_tilde > 0.0) {
        return Err(Error::Inadmissible(format!("1/r̃ = {inv_r_tilde} must be positive")));
    }
    let m = maximal_grid(fs, lattice, r, eta)?;
    let h = m.cell_width();
    let nu = vec![h; m.len()];
    let weak = weak_quasinorm(m.values(), &nu, inv_r_tilde);
    let norms: f64 = fs.iter().zip(r).map(|(f, ri)| f.lp_norm(*ri)).product();
    let ratio = if norms > 0.0 { weak / norms } else { 0.0 };
    let bound = tol.hull_constant.powf(inv_r_tilde) * (1.0 + tol.weak_tol);
    rep.measure("weak_norm", weak)
        .measure("input_norm_product", norms)
        .measure("ratio", ratio)
        .measure("bound", bound)
        .flag("weak_type", "ratio", Relation::AtMost, bound);
    Ok(rep.finish(start))
}

/// The dyadic chain `{[0, 2^{-j})}_{j<=N}` with `E_j = Q_j \ Q_{j+1}`.
pub fn corner_chain_family(resolution: u32) -> Result<SparseFamily> {
    let cubes: Vec<DyadicCube> = (0..=resolution).map(|j| DyadicCube::standard(j, 0)).collect();
    let exceptional = (0..=resolution)
        .map(|j| {
            let hi = 1usize << (resolution - j);
            let lo = if j == resolution { 0 } else { hi / 2 };
            (lo..hi).collect()
        })
        .collect();
    SparseFamily::new(0.5, resolution, cubes, exceptional)
}

/// Parameters of the power-weight sharpness study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessParams {
    pub resolution: u32,
    pub p: Exponent,
    pub r: Exponent,
    pub s: Exponent,
    pub eta: f64,
    pub f_exponent: f64,
    pub weight_powers: Vec<f64>,
}

impl Default for SharpnessParams {
    fn default() -> Self {
        Self {
            resolution: 12,
            p: Exponent::integer(4),
            r: Exponent::integer(2),
            s: Exponent::INFINITY,
            eta: 0.0,
            f_exponent: -0.125,
            weight_powers: vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
        }
    }
}

fn sharpness_ratio(params: &SharpnessParams, exps: &ExponentTuple, resolution: u32, power: f64) -> Result<(f64, f64)> {
    let family = corner_chain_family(resolution)?;
    let f = GridFunction::from_fn_midpoint(resolution, |x| x.powf(params.f_exponent));
    let r = params.r.value();
    let a = sparse_operator_grid(&family, &SymbolData::trivial(1, resolution), std::slice::from_ref(&f), &[r], params.eta)?;
    // ω = x^power; ω^{-δ_1} stops being integrable once power >= 1/δ_1, so K
    // is a grid quantity that grows with the resolution there
    let w = power_weight(power, resolution)?;
    let p_tilde = 1.0 / exps.inv_p_tilde().to_f64().unwrap_or(f64::NAN);
    let lhs = a.zip_with(&w, |x, y| x * y)?.lp_norm(p_tilde);
    let rhs = f.zip_with(&w, |x, y| x * y)?.lp_norm(params.p.value());
    let k = multilinear_constant(&WeightTuple::new(vec![w])?, exps, &Lattice::standard(resolution)?)?.constant;
    Ok((lhs / rhs, k))
}

/// Growth of `R = ‖𝒜_S f‖_{L^{p̃}(ω^{p̃})}/‖f‖_{L^p(ω^p)}` against the weight
/// characteristic `K` along a power-weight family.
pub fn check_sharp_weighted_bound(params: &SharpnessParams, tol: &Tolerances) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new("sharpness", serde_json::to_value(params)?, 0);
    let eta_q = Q::approximate_float(params.eta)
        .ok_or_else(|| Error::InvalidParameter(format!("η = {}", params.eta)))?;
    let exps = ExponentTuple::new(eta_q, &[params.p], &[params.r], params.s)?;
    if exps.inv_deltas().iter().any(Zero::is_zero) {
        return Err(Error::Inadmissible("sharpness study needs (r,s) ≺ (p,p̃) strictly".into()));
    }
    let n = params.resolution;
    let mut log_r = Vec::new();
    let mut log_k = Vec::new();
    let mut refinement = Vec::new();
    for &power in &params.weight_powers {
        let (ratio, k) = sharpness_ratio(params, &exps, n, power)?;
        let (ratio_fine, _) = sharpness_ratio(params, &exps, n + 1, power)?;
        log_r.push(ratio.ln());
        log_k.push(k.ln());
        refinement.push(rel_change(ratio, ratio_fine));
    }
    let mut slopes = Vec::new();
    for i in 1..log_r.len() {
        let dk = log_k[i] - log_k[i - 1];
        if dk.abs() > 1e-12 {
            slopes.push((log_r[i] - log_r[i - 1]) / dk);
        }
    }
    let usable: Vec<usize> = (0..log_k.len()).filter(|&i| log_k[i] > 1e-12).collect();
    let regression = if usable.len() >= 2 {
        ls_slope(
            &usable.iter().map(|&i| log_k[i]).collect::<Vec<_>>(),
            &usable.iter().map(|&i| log_r[i]).collect::<Vec<_>>(),
        )
    } else {
        f64::NAN
    };
    let input_theta = (0..exps.m())
        .map(|i| (exps.inv_r(i) / exps.inv_delta(i)).to_f64().unwrap_or(f64::NAN))
        .fold(0.0, f64::max);
    let full_theta = exps.theta_sharp().and_then(|t| t.to_f64()).unwrap_or(f64::INFINITY);

    // ⟨f⟩_{r,Q_j} along the chain
    let f = GridFunction::from_fn_midpoint(n, |x| x.powf(params.f_exponent));
    let js: Vec<f64> = (0..n.saturating_sub(2)).map(f64::from).collect();
    let log2_avg: Vec<f64> = (0..n.saturating_sub(2))
        .map(|j| Ok(crate::gridfn::avg(&f, &DyadicCube::standard(j, 0), params.r.value(), 0.0)?.log2()))
        .collect::<Result<_>>()?;
    let avg_slope = ls_slope(&js, &log2_avg);

    let max_slope = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_refinement = refinement.iter().copied().fold(0.0, f64::max);
    rep.measure("theta_gate", input_theta)
        .measure("theta_formula", full_theta)
        .measure("max_slope", max_slope)
        .measure("regression_slope", regression)
        .measure("avg_exponent_measured", avg_slope)
        .measure("avg_exponent_claimed", -0.25)
        .measure("avg_exponent_exact", -params.f_exponent)
        .measure("max_refinement_change", max_refinement)
        .record_series("weight_power", params.weight_powers.clone())
        .record_series("log_ratio", log_r)
        .record_series("log_constant", log_k)
        .record_series("slope", slopes)
        .record_series("refinement_change", refinement)
        .flag("sharp_upper", "max_slope", Relation::AtMost, input_theta + tol.sharp_slack)
        .flag("refinement", "max_refinement_change", Relation::Below, tol.refinement)
        .note("avg_exponent_* are log2 growth rates of the r-average over [0,2^-j) per unit j");
    Ok(rep.finish(start))
}

/// The operator whose oscillation conditions are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Maximal,
    FractionalIntegral,
}

struct Operator<'a> {
    kind: OperatorKind,
    lattice: &'a Lattice,
    r: Vec<f64>,
    eta: Vec<f64>,
    kernel: KernelSpec,
}

impl Operator<'_> {
    fn eval(&self, fs: &[GridFunction], cells: &[usize]) -> Result<Vec<f64>> {
        match self.kind {
            OperatorKind::Maximal => {
                let g = maximal_grid(fs, self.lattice, &self.r, &self.eta)?;
                Ok(cells.iter().map(|&c| g.values()[c]).collect())
            }
            OperatorKind::FractionalIntegral => fractional_integral_cells(fs, &self.kernel, cells),
        }
    }
}

/// `⨍_B ⨍_B |d(x) − d(x')|` by sorting; reorders `values`.
pub fn mean_pair_difference(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let s: f64 = values
        .iter()
        .enumerate()
        .map(|(k, v)| v * (2.0 * k as f64 - n + 1.0))
        .sum();
    2.0 * s / (n * n)
}

fn restrict_all(fs: &[GridFunction], cube: &DyadicCube) -> Result<Vec<GridFunction>> {
    fs.iter().map(|f| f.restrict(cube)).collect()
}

/// Truncation-difference ratio (`cond1`) and local-oscillation ratio (`cond2`)
/// for one input tuple and one cube.
fn fbmoo_sample(op: &Operator<'_>, fs: &[GridFunction], b0: &DyadicCube) -> Result<(Option<f64>, Option<f64>)> {
    let n = fs[0].resolution();
    let cells: Vec<usize> = b0.cells(n)?.iter().collect();
    let lat = op.lattice;

    // cond1: min over B ⊋ B0 of ⟨|T(fχ_{B†}) − T(fχ_{B0†})|⟩_{B0} / Π⟨f_i⟩_{η_i,r_i,B†}
    let b0_dag = b0.parent();
    let base = op.eval(&restrict_all(fs, &b0_dag)?, &cells)?;
    let mut cond1: Option<f64> = None;
    for level in 0..b0.level {
        let b = b0.ancestor_at(level);
        let b_dag = b.parent();
        let mut denom = 1.0;
        for (i, f) in fs.iter().enumerate() {
            denom *= crate::gridfn::avg(f, &b_dag, op.r[i], op.eta[i])?;
        }
        if denom <= 0.0 {
            continue;
        }
        let vals = op.eval(&restrict_all(fs, &b_dag)?, &cells)?;
        let osc = vals.iter().zip(&base).map(|(a, b)| (a - b).abs()).sum::<f64>() / cells.len() as f64;
        let ratio = osc / denom;
        cond1 = Some(cond1.map_or(ratio, |c: f64| c.min(ratio)));
    }

    // cond2: ⨍⨍ |D(x) − D(x')| / Π⟨⟨f_i⟩⟩_{η_i,r_i,B} with D = T(f) − T(fχ_{B†})
    let full = op.eval(fs, &cells)?;
    let local = op.eval(&restrict_all(fs, &b0_dag)?, &cells)?;
    let mut d: Vec<f64> = full.iter().zip(&local).map(|(a, b)| a - b).collect();
    let lhs = mean_pair_difference(&mut d);
    let mut denom = 1.0;
    for (i, f) in fs.iter().enumerate() {
        denom *= maximal_avg(f, b0, lat, op.r[i], op.eta[i])?;
    }
    let cond2 = (denom > 0.0).then(|| lhs / denom);
    Ok((cond1, cond2))
}

/// The `cond1` and `cond2` ratios of `T` at one cube `b0` (level >= 1);
/// `None` where the normalizing averages vanish. The fractional integral uses
/// `η = Σ η_i`.
pub fn fbmoo_ratios(
    kind: OperatorKind,
    fs: &[GridFunction],
    b0: &DyadicCube,
    lattice: &Lattice,
    r: &[f64],
    eta: &[f64],
) -> Result<(Option<f64>, Option<f64>)> {
    if fs.is_empty() || r.len() != fs.len() || eta.len() != fs.len() {
        return Err(Error::InvalidParameter("need one r and one η per input".into()));
    }
    if b0.level == 0 {
        return Err(Error::InvalidParameter("the root has no proper ancestor".into()));
    }
    let op = Operator {
        kind,
        lattice,
        r: r.to_vec(),
        eta: eta.to_vec(),
        kernel: KernelSpec::new(fs.len(), eta.iter().sum()),
    };
    fbmoo_sample(&op, fs, b0)
}

/// Parameters of the oscillation-condition experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbmooParams {
    pub operator: OperatorKind,
    pub m: usize,
    pub eta: f64,
    pub r: Vec<f64>,
    pub resolution: u32,
    pub depth: u32,
    pub samples: usize,
}

fn fbmoo_sups(params: &FbmooParams, resolution: u32, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let lattice = Lattice::standard(params.depth.min(resolution))?;
    let eta_i = params.eta / params.m as f64;
    let op = Operator {
        kind: params.operator,
        lattice: &lattice,
        r: params.r.clone(),
        eta: vec![eta_i; params.m],
        kernel: KernelSpec::new(params.m, params.eta),
    };
    let mut rng = rng_from_seed(seed);
    let (mut s1, mut s2): (f64, f64) = (0.0, 0.0);
    for _ in 0..samples {
        let fs_coarse = random_inputs(params.m, params.resolution, &mut rng);
        let level = rng.gen_range(2..=lattice.max_level().max(2));
        let index = rng.gen_range(0..1u64 << level);
        let fs: Vec<GridFunction> = fs_coarse
            .iter()
            .map(|f| {
                let mut g = f.clone();
                while g.resolution() < resolution {
                    g = g.refine();
                }
                g
            })
            .collect();
        let (c1, c2) = fbmoo_sample(&op, &fs, &DyadicCube::standard(level, index))?;
        s1 = s1.max(c1.unwrap_or(0.0));
        s2 = s2.max(c2.unwrap_or(0.0));
    }
    Ok((s1, s2))
}

/// Empirical constants of the two mean-oscillation conditions, and their
/// stability under doubling of the sample count and of the resolution.
pub fn check_fbmoo_conditions(params: &FbmooParams, seed: u64, tol: &Tolerances) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new("fbmoo_conditions", serde_json::to_value(params)?, seed);
    if params.r.len() != params.m {
        return Err(Error::InvalidParameter("need one r per input".into()));
    }
    if params.depth < 2 {
        return Err(Error::InvalidParameter("lattice depth must be at least 2".into()));
    }
    let n = params.resolution;
    let (a1, a2) = fbmoo_sups(params, n, params.samples, seed)?;
    let (b1, b2) = fbmoo_sups(params, n, 2 * params.samples, seed)?;
    let (c1, c2) = fbmoo_sups(params, n + 1, params.samples, seed)?;
    rep.measure("cond1_sup", a1)
        .measure("cond2_sup", a2)
        .measure("cond1_sup_double_samples", b1)
        .measure("cond2_sup_double_samples", b2)
        .measure("cond1_sup_refined", c1)
        .measure("cond2_sup_refined", c2)
        .measure("cond1_sample_change", rel_change(a1, b1))
        .measure("cond2_sample_change", rel_change(a2, b2))
        .measure("cond1_refinement_change", rel_change(a1, c1))
        .measure("cond2_refinement_change", rel_change(a2, c2));
    for key in ["cond1_sample_change", "cond2_sample_change", "cond1_refinement_change", "cond2_refinement_change"] {
        rep.flag(key, key, Relation::Below, tol.stability);
    }
    rep.note("cond1 takes the best ball along the finite ancestor chain; B† is the parent cube");
    Ok(rep.finish(start))
}

/// `μ(t) = |{x : |I_η f⃗(x)| > t M f⃗(x)}|` on a grid of `t` up to the largest
/// ratio, with a tail fit of `log μ`.
pub fn check_local_decay(fs: &[GridFunction], kernel: &KernelSpec, lattice: &Lattice, t_points: usize) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new(
        "local_decay",
        serde_json::json!({"m": kernel.m, "eta": kernel.eta, "depth": lattice.max_level(), "t_points": t_points}),
        0,
    );
    let m = fs.len();
    let t = fractional_integral_grid(fs, kernel)?;
    let maxf = maximal_grid(fs, lattice, &ones(m), &vec![kernel.eta / m as f64; m])?;
    let ratios: Vec<f64> = t
        .values()
        .iter()
        .zip(maxf.values())
        .filter(|(_, mv)| **mv > 0.0)
        .map(|(tv, mv)| tv.abs() / mv)
        .collect();
    let top = ratios.iter().copied().fold(0.0, f64::max);
    if ratios.is_empty() || top == 0.0 {
        rep.note("empty level sets for every t");
        return Ok(rep.finish(start));
    }
    let h = t.cell_width();
    let grid: Vec<f64> = (0..t_points).map(|k| top * k as f64 / t_points as f64).collect();
    let mu: Vec<f64> = grid
        .iter()
        .map(|tt| ratios.iter().filter(|r| **r > *tt).count() as f64 * h)
        .collect();
    let monotone = mu.windows(2).all(|w| w[1] <= w[0]);
    let positive: Vec<usize> = (0..mu.len()).filter(|&k| mu[k] > 0.0).collect();
    let tail = &positive[positive.len() / 2..];
    let slope = if tail.len() >= 2 {
        ls_slope(
            &tail.iter().map(|&k| grid[k]).collect::<Vec<_>>(),
            &tail.iter().map(|&k| mu[k].ln()).collect::<Vec<_>>(),
        )
    } else {
        f64::NAN
    };
    rep.measure("max_ratio", top)
        .measure("monotone", if monotone { 1.0 } else { 0.0 })
        .measure("tail_slope", slope)
        .record_series("t", grid)
        .record_series("mu", mu)
        .flag("monotone", "monotone", Relation::AtLeast, 1.0)
        .flag("decay", "tail_slope", Relation::Below, 0.0);
    Ok(rep.finish(start))
}

/// [`check_local_decay`] over random inputs.
pub fn local_decay_suite(m: usize, eta: f64, resolution: u32, samples: usize, t_points: usize, seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new(
        "local_decay",
        serde_json::json!({"m": m, "eta": eta, "resolution": resolution, "samples": samples, "t_points": t_points}),
        seed,
    );
    let mut rng = rng_from_seed(seed);
    let lattice = Lattice::standard(resolution)?;
    let kernel = KernelSpec::new(m, eta);
    let (mut failures_mono, mut slopes) = (0usize, Vec::new());
    for _ in 0..samples {
        let fs = random_inputs(m, resolution, &mut rng);
        let r = check_local_decay(&fs, &kernel, &lattice, t_points)?;
        if r.measured.get("monotone") != Some(&1.0) {
            failures_mono += 1;
        }
        slopes.push(r.measured.get("tail_slope").copied().unwrap_or(f64::NAN));
    }
    let worst = slopes.iter().copied().fold(f64::NEG_INFINITY, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    rep.measure("monotonicity_failures", failures_mono as f64)
        .measure("max_tail_slope", worst)
        .record_series("tail_slope", slopes)
        .flag("monotone", "monotonicity_failures", Relation::AtMost, 0.0)
        .flag("decay", "max_tail_slope", Relation::Below, 0.0);
    Ok(rep.finish(start))
}

fn mixed_ratio(fs: &[GridFunction], kernel: &KernelSpec, w: &GridFunction, v: &GridFunction, lattice: &Lattice) -> Result<(f64, f64)> {
    let m = fs.len();
    let inv_r_tilde = m as f64 - kernel.eta;
    let t = fractional_integral_grid(fs, kernel)?;
    let mf = maximal_grid(fs, lattice, &ones(m), &vec![kernel.eta / m as f64; m])?;
    let h = t.cell_width();
    let nu: Vec<f64> = w
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| a * b.powf(1.0 / inv_r_tilde) * h)
        .collect();
    let tq: Vec<f64> = t.values().iter().zip(v.values()).map(|(a, b)| a / b).collect();
    let mq: Vec<f64> = mf.values().iter().zip(v.values()).map(|(a, b)| a / b).collect();
    Ok((weak_quasinorm(&tq, &nu, inv_r_tilde), weak_quasinorm(&mq, &nu, inv_r_tilde)))
}

/// Weak norms of `T f⃗ / v` and `M f⃗ / v` in `L^{r̃,∞}(w v^{r̃})` and their ratio.
pub fn check_mixed_weak(
    fs: &[GridFunction],
    kernel: &KernelSpec,
    w: &GridFunction,
    v: &GridFunction,
    lattice: &Lattice,
    tol: &Tolerances,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new(
        "mixed_weak",
        serde_json::json!({"m": kernel.m, "eta": kernel.eta, "depth": lattice.max_level()}),
        0,
    );
    w.check_positive()?;
    v.check_positive()?;
    let (t_weak, m_weak) = mixed_ratio(fs, kernel, w, v, lattice)?;
    let refined: Vec<GridFunction> = fs.iter().map(GridFunction::refine).collect();
    let (t_fine, m_fine) = mixed_ratio(&refined, kernel, &w.refine(), &v.refine(), lattice)?;
    let a1 = ap_constant(w, 1.0, lattice)?.constant;
    rep.measure("weight_a1_constant", a1)
        .measure("t_weak_norm", t_weak)
        .measure("m_weak_norm", m_weak);
    if m_weak == 0.0 {
        rep.note("both weak norms vanish");
        return Ok(rep.finish(start));
    }
    let ratio = t_weak / m_weak;
    let ratio_fine = t_fine / m_fine;
    rep.measure("ratio", ratio)
        .measure("ratio_refined", ratio_fine)
        .measure("refinement_change", rel_change(ratio, ratio_fine))
        .flag("bounded", "ratio", Relation::AtMost, tol.c_cap)
        .flag("stable", "refinement_change", Relation::Below, tol.stability);
    Ok(rep.finish(start))
}

/// Random exponent tuple with denominators dividing 12, optionally required to
/// satisfy the factorization conditions.
pub fn random_exponent_tuple(m: usize, factorizable: bool, rng: &mut impl Rng) -> ExponentTuple {
    loop {
        let r_num: Vec<i128> = (0..m).map(|_| rng.gen_range(4..=12)).collect();
        let inv_r: Vec<Q> = r_num.iter().map(|n| Q::new(*n, 12)).collect();
        let inv_p: Vec<Q> = r_num.iter().map(|n| Q::new(rng.gen_range(1..=*n.min(&11)), 12)).collect();
        let sum_p: Q = inv_p.iter().copied().sum();
        let eta_num = rng.gen_range(0..=(sum_p * 12).to_integer().min(12 * m as i128 - 1));
        let eta = Q::new(eta_num, 12);
        let inv_pt = sum_p - eta;
        if inv_pt <= Q::zero() {
            continue;
        }
        let s_max = (inv_pt * 12).floor().to_integer().min(12);
        let inv_s = Q::new(rng.gen_range(0..=s_max), 12);
        let p: Vec<Exponent> = inv_p.iter().map(|x| Exponent::from_reciprocal(*x).expect("positive")).collect();
        let r: Vec<Exponent> = inv_r.iter().map(|x| Exponent::from_reciprocal(*x).expect("positive")).collect();
        let s = Exponent::from_reciprocal(inv_s).expect("nonnegative");
        if let Ok(t) = ExponentTuple::new(eta, &p, &r, s) {
            if !factorizable || t.check_factorizable().is_ok() {
                return t;
            }
        }
    }
}

/// Exact exponent identities for random admissible tuples, and the two norm
/// identities of the factorization for random weights and functions.
pub fn check_weight_arithmetic(tuples: usize, pairs: usize, resolution: u32, seed: u64, tol: &Tolerances) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new(
        "weight_arithmetic",
        serde_json::json!({"tuples": tuples, "pairs": pairs, "resolution": resolution}),
        seed,
    );
    let mut rng = rng_from_seed(seed);
    let mut identity_failures = 0usize;
    for _ in 0..tuples {
        let m = rng.gen_range(1..=3);
        if !random_exponent_tuple(m, false, &mut rng).identities_hold() {
            identity_failures += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let m = rng.gen_range(1..=3);
        let exps = random_exponent_tuple(m, true, &mut rng);
        let w = WeightTuple::new((0..m).map(|_| random_log_lipschitz(resolution, &mut rng)).collect())?;
        let f = random_log_lipschitz(resolution, &mut rng).scale(rng.gen_range(0.1..3.0));
        worst = worst.max(norm_identities(&f, &w, &exps)?.max_relative_error());
    }
    rep.measure("identity_failures", identity_failures as f64)
        .measure("max_norm_identity_error", worst)
        .flag("exact_identities", "identity_failures", Relation::AtMost, 0.0)
        .flag("norm_identities", "max_norm_identity_error", Relation::AtMost, tol.identity);
    Ok(rep.finish(start))
}

/// Factorization inequalities and round trip for random log-Lipschitz tuples.
pub fn check_factorization(samples: usize, depth: u32, seed: u64, tol: &Tolerances) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new(
        "factorization",
        serde_json::json!({"samples": samples, "depth": depth}),
        seed,
    );
    let mut rng = rng_from_seed(seed);
    let lattice = Lattice::standard(depth)?;
    let (mut theta_fail, mut tilde_fail, mut w_fail, mut inverse_fail) = (0usize, 0usize, 0usize, 0usize);
    let mut round_trip: f64 = 0.0;
    for _ in 0..samples {
        let m = rng.gen_range(2..=3);
        let exps = random_exponent_tuple(m, true, &mut rng);
        let w = WeightTuple::new((0..m).map(|_| random_log_lipschitz(depth, &mut rng)).collect())?;
        let fac = factorize_weights(&w, &exps, &lattice)?;
        for c in &fac.report.checks {
            if !c.holds {
                match c.name.as_str() {
                    "tilde" => tilde_fail += 1,
                    "w_apq" => w_fail += 1,
                    _ => theta_fail += 1,
                }
            }
        }
        let back = inverse_factorize(&w.weights()[..m - 1], &fac.w, &exps)?;
        for (a, b) in back.get(m - 1).values().iter().zip(w.get(m - 1).values()) {
            round_trip = round_trip.max((a - b).abs() / b);
        }
        if !check_inverse_bound(&back, &fac.w, &exps, &lattice)?.holds {
            inverse_fail += 1;
        }
    }
    rep.measure("theta_power_failures", theta_fail as f64)
        .measure("tilde_failures", tilde_fail as f64)
        .measure("w_apq_failures", w_fail as f64)
        .measure("inverse_bound_failures", inverse_fail as f64)
        .measure("round_trip_error", round_trip)
        .flag("theta_power", "theta_power_failures", Relation::AtMost, 0.0)
        .flag("tilde", "tilde_failures", Relation::AtMost, 0.0)
        .flag("round_trip", "round_trip_error", Relation::AtMost, tol.round_trip);
    rep.note("w_apq and inverse_bound are measured and reported without a gate");
    Ok(rep.finish(start))
}

/// A random shift obeying the size bound, with coefficients on every
/// admissible `P` of level `<= max_level`.
pub fn random_shift_spec(m: usize, complexity: &[u32], max_level: u32, eta: f64, rng: &mut impl Rng) -> Result<ShiftSpec> {
    let mut cancellative = vec![false; m + 1];
    cancellative[0] = true;
    cancellative[m] = true;
    let mut terms = Vec::new();
    for level in 0..=max_level {
        for idx in 0..1u64 << level {
            let p = DyadicCube::standard(level, idx);
            let j: Vec<DyadicCube> = complexity
                .iter()
                .map(|&k| {
                    let mut c = p;
                    for _ in 0..k {
                        c = c.child(if rng.gen_bool(0.5) { Side::Left } else { Side::Right });
                    }
                    c
                })
                .collect();
            let bound = j.iter().map(|c| c.measure().sqrt()).product::<f64>() / p.measure().powf(m as f64 - eta);
            terms.push(ShiftTerm { p, j, beta: rng.gen_range(-1.0..1.0) * bound });
        }
    }
    ShiftSpec::new(eta, complexity.to_vec(), cancellative, 1.0, terms)
}

/// A random paraproduct whose Carleson sum stays below one.
pub fn random_paraproduct_spec(max_level: u32, eta: f64, rng: &mut impl Rng) -> Result<ParaproductSpec> {
    let damp = ((max_level + 1) as f64).sqrt().recip();
    let mut coeffs = Vec::new();
    for level in 0..=max_level {
        for idx in 0..1u64 << level {
            let p = DyadicCube::standard(level, idx);
            coeffs.push((p, rng.gen_range(-1.0..1.0) * damp * p.measure().powf(eta + 0.5)));
        }
    }
    ParaproductSpec::new(eta, coeffs)
}

fn test_inputs(m: usize, resolution: u32) -> Vec<GridFunction> {
    (0..m)
        .map(|i| {
            let a = 1.0 + i as f64;
            GridFunction::from_fn_midpoint(resolution, move |x| (x + 0.05).powf(-0.3) + (a * 9.0 * x).sin().abs())
        })
        .collect()
}

/// `‖S f⃗‖_{r̃} / Π‖f_i‖_{r_i}` for fixed shift and paraproduct coefficients
/// along a sequence of resolutions.
pub fn check_shift_paraproduct_stability(
    m: usize,
    eta: f64,
    r: &[f64],
    resolutions: &[u32],
    seed: u64,
    tol: &Tolerances,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new(
        "shift_paraproduct",
        serde_json::json!({"m": m, "eta": eta, "r": r, "resolutions": resolutions}),
        seed,
    );
    let inv_rt: f64 = r.iter().map(|x| 1.0 / x).sum::<f64>() - eta;
    if r.len() != m || !(inv_rt > 0.0) {
        return Err(Error::Inadmissible(format!("need m exponents with 1/r̃ = {inv_rt} > 0")));
    }
    let coarsest = *resolutions.iter().min().ok_or_else(|| Error::InvalidParameter("no resolutions".into()))?;
    let mut rng = rng_from_seed(seed);
    let mut complexity = vec![1u32; m + 1];
    complexity[m] = 0;
    let max_level = coarsest.saturating_sub(3);
    let shift = random_shift_spec(m, &complexity, max_level, eta, &mut rng)?;
    let para = random_paraproduct_spec(max_level, eta, &mut rng)?;
    let mut shift_c = Vec::new();
    let mut para_c = Vec::new();
    for &n in resolutions {
        let lattice = Lattice::standard(n - 1)?;
        let fs = test_inputs(m, n);
        let denom: f64 = fs.iter().zip(r).map(|(f, ri)| f.lp_norm(*ri)).product();
        shift_c.push(apply_shift(&shift, &fs, &lattice)?.lp_norm(1.0 / inv_rt) / denom);
        para_c.push(apply_paraproduct(&para, &fs, &lattice)?.lp_norm(1.0 / inv_rt) / denom);
    }
    let change = |v: &[f64]| v.windows(2).map(|w| rel_change(w[0], w[1])).fold(0.0, f64::max);
    let growth = |v: &[f64]| v.windows(2).map(|w| w[1] / w[0] - 1.0).fold(f64::NEG_INFINITY, f64::max);
    rep.measure("shift_max_change", change(&shift_c))
        .measure("paraproduct_max_change", change(&para_c))
        .measure("shift_max_growth", growth(&shift_c))
        .measure("paraproduct_max_growth", growth(&para_c))
        .record_series("shift_constant", shift_c)
        .record_series("paraproduct_constant", para_c)
        .flag("shift_stable", "shift_max_change", Relation::AtMost, tol.operator_stability)
        .flag("paraproduct_stable", "paraproduct_max_change", Relation::AtMost, tol.operator_stability)
        .flag("shift_non_increasing", "shift_max_growth", Relation::AtMost, tol.operator_stability)
        .flag("paraproduct_non_increasing", "paraproduct_max_growth", Relation::AtMost, tol.operator_stability);
    Ok(rep.finish(start))
}

/// Bloom weights from power weights and a commutator-type sparse form with a
/// first-order symbol; reported without gates.
pub fn check_bloom_smoke(resolution: u32, omega_power: f64, mu_power: f64, k: u32) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new(
        "bloom",
        serde_json::json!({"resolution": resolution, "omega_power": omega_power, "mu_power": mu_power, "k": k}),
        0,
    );
    let omega = power_weight(omega_power, resolution)?;
    let mu = power_weight(mu_power, resolution)?;
    let phi = bloom_weight(&omega, &mu, k)?;
    let lattice = Lattice::standard(resolution)?;
    let b = GridFunction::from_fn_midpoint(resolution, |x| x.ln());
    let family = corner_chain_family(resolution)?;
    let sym = SymbolData::new(vec![b.clone()], vec![k], vec![0])?;
    let f = GridFunction::constant(resolution, 1.0);
    let psi = GridFunction::constant(resolution, 1.0);
    let form = sparse_form(&family, &sym, &[f], &psi, &[1.0], 1.0, 0.0)?;
    rep.measure("phi_integral", phi.integral())
        .measure("bmo_phi", crate::gridfn::bmo_norm_weighted(&b, &phi, &lattice)?)
        .measure("omega_a2", ap_constant(&omega, 2.0, &lattice)?.constant)
        .measure("mu_a2", ap_constant(&mu, 2.0, &lattice)?.constant)
        .measure("form_value", form);
    Ok(rep.finish(start))
}
