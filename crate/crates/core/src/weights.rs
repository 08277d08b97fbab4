//! Weight characteristics, exponent bookkeeping for extrapolation, the
//! factorization `ω⃗ ↔ (ω_1, …, ω_{m-1}, ω̃, W)` and Bloom weights.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicCube, Lattice};
use crate::error::{Error, Result};
use crate::gridfn::{pyramid_max, pyramid_min, pyramid_sums, GridFunction};

/// Exact rational used for all exponent arithmetic.
pub type Q = Ratio<i128>;

const CHECK_SLACK: f64 = 1e-9;

fn q(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// An exponent in `(0, ∞]`, stored through its reciprocal so that `∞` is `0`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Exponent(Q);

impl Exponent {
    pub const INFINITY: Exponent = Exponent(Ratio::new_raw(0, 1));

    pub fn from_reciprocal(inv: Q) -> Result<Self> {
        if inv.is_negative() {
            return Err(Error::InvalidParameter(format!("negative reciprocal exponent {inv}")));
        }
        Ok(Self(inv))
    }

    pub fn finite(p: Q) -> Result<Self> {
        if !p.is_positive() {
            return Err(Error::InvalidParameter(format!("exponent {p} must be positive")));
        }
        Ok(Self(p.recip()))
    }

    pub fn integer(p: i128) -> Self {
        Self(q(1, p))
    }

    /// Best rational reading of a float exponent; `f64::INFINITY` maps to `∞`.
    pub fn from_f64(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            return Ok(Self::INFINITY);
        }
        let r = Q::approximate_float(p)
            .ok_or_else(|| Error::InvalidParameter(format!("exponent {p} is not representable")))?;
        Self::finite(r)
    }

    pub fn reciprocal(&self) -> Q {
        self.0
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_zero()
    }

    pub fn value(&self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            to_f64(&self.0.recip())
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t, "inf" | "infinity" | "∞" | "Inf") {
            return Ok(Self::INFINITY);
        }
        if let Ok(r) = t.parse::<Q>() {
            return Self::finite(r);
        }
        let f: f64 = t
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("cannot parse exponent `{s}`")))?;
        Self::from_f64(f)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0.recip())
        }
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Exponent::from_f64(x),
            Raw::Text(t) => t.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// `(m, η, p⃗, r⃗, s)` together with every derived exponent, all as exact
/// reciprocals.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentTuple {
    eta: Q,
    inv_p: Vec<Q>,
    inv_r: Vec<Q>,
    inv_s: Q,
    inv_p_tilde: Q,
    inv_delta: Vec<Q>,
    zeta: Q,
}

impl ExponentTuple {
    /// Validates `(r⃗,s) ⪯ (p⃗,p̃)` and the ranges of every input.
    pub fn new(eta: Q, p: &[Exponent], r: &[Exponent], s: Exponent) -> Result<Self> {
        let m = p.len();
        if m == 0 || r.len() != m {
            return Err(Error::InvalidParameter(format!(
                "need m >= 1 exponents p and r of equal length, got {} and {}",
                p.len(),
                r.len()
            )));
        }
        if eta.is_negative() || eta >= Q::from_integer(m as i128) {
            return Err(Error::Inadmissible(format!("η = {eta} must lie in [0, m) = [0, {m})")));
        }
        let inv_p: Vec<Q> = p.iter().map(Exponent::reciprocal).collect();
        let inv_r: Vec<Q> = r.iter().map(Exponent::reciprocal).collect();
        let inv_s = s.reciprocal();
        for (i, ip) in inv_p.iter().enumerate() {
            if *ip >= Q::one() {
                return Err(Error::Inadmissible(format!("p_{} = {} must exceed 1", i + 1, p[i])));
            }
        }
        for (i, ir) in inv_r.iter().enumerate() {
            if ir.is_zero() || *ir > Q::one() {
                return Err(Error::Inadmissible(format!("r_{} = {} must lie in [1, ∞)", i + 1, r[i])));
            }
        }
        if inv_s > Q::one() {
            return Err(Error::Inadmissible(format!("s = {s} must lie in [1, ∞]")));
        }
        for i in 0..m {
            if inv_r[i] < inv_p[i] {
                return Err(Error::Inadmissible(format!(
                    "(r,s) ⪯ (p,p̃) violated: r_{} = {} > p_{} = {}",
                    i + 1,
                    r[i],
                    i + 1,
                    p[i]
                )));
            }
        }
        let inv_p_tilde = inv_p.iter().copied().sum::<Q>() - eta;
        if !inv_p_tilde.is_positive() {
            return Err(Error::Inadmissible(format!(
                "1/p̃ = Σ1/p_i − η = {inv_p_tilde} must be positive"
            )));
        }
        if inv_p_tilde < inv_s {
            return Err(Error::Inadmissible(format!(
                "(r,s) ⪯ (p,p̃) violated: p̃ = {} > s = {s}",
                inv_p_tilde.recip()
            )));
        }
        let mut inv_delta: Vec<Q> = inv_r.iter().zip(&inv_p).map(|(a, b)| a - b).collect();
        inv_delta.push(inv_p_tilde - inv_s);
        let inv_gamma = inv_r.iter().copied().sum::<Q>() + (Q::one() - inv_s);
        let zeta = inv_gamma - (Q::one() + eta);
        Ok(Self {
            eta,
            inv_p,
            inv_r,
            inv_s,
            inv_p_tilde,
            inv_delta,
            zeta,
        })
    }

    pub fn m(&self) -> usize {
        self.inv_p.len()
    }

    pub fn eta(&self) -> Q {
        self.eta
    }

    /// `1/p_i` for `i < m`; `i = m` gives `1/p_{m+1} = 1 − 1/p̃`.
    pub fn inv_p(&self, i: usize) -> Q {
        if i == self.m() {
            Q::one() - self.inv_p_tilde
        } else {
            self.inv_p[i]
        }
    }

    /// `1/r_i` for `i < m`; `i = m` gives `1/s′`.
    pub fn inv_r(&self, i: usize) -> Q {
        if i == self.m() {
            self.inv_s_prime()
        } else {
            self.inv_r[i]
        }
    }

    pub fn inv_s(&self) -> Q {
        self.inv_s
    }

    pub fn inv_s_prime(&self) -> Q {
        Q::one() - self.inv_s
    }

    pub fn inv_p_tilde(&self) -> Q {
        self.inv_p_tilde
    }

    /// `1/r̃ = Σ 1/r_i − η`.
    pub fn inv_r_tilde(&self) -> Q {
        self.inv_r.iter().copied().sum::<Q>() - self.eta
    }

    /// `1/δ_i` for `i ≤ m` (slot `m` is `δ_{m+1}`).
    pub fn inv_delta(&self, i: usize) -> Q {
        self.inv_delta[i]
    }

    pub fn inv_deltas(&self) -> &[Q] {
        &self.inv_delta
    }

    pub fn inv_gamma(&self) -> Q {
        self.inv_r.iter().copied().sum::<Q>() + self.inv_s_prime()
    }

    pub fn zeta(&self) -> Q {
        self.zeta
    }

    /// `1/θ_i = ζ − 1/δ_i`, `i < m`.
    pub fn inv_theta(&self, i: usize) -> Q {
        self.zeta - self.inv_delta[i]
    }

    /// `1/ϱ = 1/δ_m + 1/δ_{m+1}`.
    pub fn inv_rho(&self) -> Q {
        let m = self.m();
        self.inv_delta[m - 1] + self.inv_delta[m]
    }

    /// `Θ = max_i δ_i / r_i` over the `m+1` slots; `None` when some `δ_i = ∞`.
    pub fn theta_sharp(&self) -> Option<Q> {
        (0..=self.m())
            .map(|i| {
                let d = self.inv_delta[i];
                (!d.is_zero()).then(|| self.inv_r(i) / d)
            })
            .try_fold(Q::zero(), |acc, v| v.map(|v| acc.max(v)))
    }

    /// `Ξ = max_i δ_i`; `None` when some `δ_i = ∞`.
    pub fn xi(&self) -> Option<Q> {
        self.inv_delta
            .iter()
            .map(|d| (!d.is_zero()).then(|| d.recip()))
            .try_fold(Q::zero(), |acc, v| v.map(|v| acc.max(v)))
    }

    /// Some `1/δ_i` vanishes or `ζ = 0`.
    pub fn is_degenerate(&self) -> bool {
        self.zeta.is_zero() || self.inv_delta.iter().any(Zero::is_zero)
    }

    /// Conditions under which the factorization applies:
    /// `1/ϱ > 0` and `1/θ_i > 0` for `i < m`.
    pub fn check_factorizable(&self) -> Result<()> {
        if !self.inv_rho().is_positive() {
            return Err(Error::Inadmissible(format!("1/ϱ = {} must be positive", self.inv_rho())));
        }
        for i in 0..self.m() - 1 {
            if !self.inv_theta(i).is_positive() {
                return Err(Error::Inadmissible(format!(
                    "1/θ_{} = {} must be positive",
                    i + 1,
                    self.inv_theta(i)
                )));
            }
        }
        Ok(())
    }

    /// Exact identities tying the derived exponents together.
    pub fn identities_hold(&self) -> bool {
        let m = self.m();
        let sum_p: Q = (0..=m).map(|i| self.inv_p(i)).sum();
        let sum_delta: Q = self.inv_delta.iter().copied().sum();
        let rho_alt = self.inv_r[m - 1] - self.inv_s - self.eta
            + self.inv_p[..m - 1].iter().copied().sum::<Q>();
        sum_p == Q::one() + self.eta
            && sum_delta == self.zeta
            && self.inv_rho() == rho_alt
            && self.zeta == self.inv_gamma() - (Q::one() + self.eta)
    }

    /// Float view for reports.
    pub fn summary(&self) -> ExponentSummary {
        let m = self.m();
        let inv = |x: Q| if x.is_zero() { f64::INFINITY } else { 1.0 / to_f64(&x) };
        ExponentSummary {
            m,
            eta: to_f64(&self.eta),
            p: (0..m).map(|i| inv(self.inv_p[i])).collect(),
            r: (0..m).map(|i| inv(self.inv_r[i])).collect(),
            s: inv(self.inv_s),
            p_tilde: inv(self.inv_p_tilde),
            r_tilde: inv(self.inv_r_tilde()),
            delta: self.inv_delta.iter().map(|d| inv(*d)).collect(),
            gamma: inv(self.inv_gamma()),
            zeta: to_f64(&self.zeta),
            theta: (0..m - 1).map(|i| inv(self.inv_theta(i))).collect(),
            rho: inv(self.inv_rho()),
            theta_sharp: self.theta_sharp().map(|t| to_f64(&t)),
            xi: self.xi().map(|t| to_f64(&t)),
        }
    }
}

/// Convenience constructor mirroring the mathematical signature.
pub fn extrapolation_exponents(
    m: usize,
    eta: Q,
    p: &[Exponent],
    r: &[Exponent],
    s: Exponent,
) -> Result<ExponentTuple> {
    if p.len() != m || r.len() != m {
        return Err(Error::InvalidParameter(format!(
            "arity {m} does not match {} p and {} r exponents",
            p.len(),
            r.len()
        )));
    }
    ExponentTuple::new(eta, p, r, s)
}

/// Derived exponents as floats; `∞` where a reciprocal vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSummary {
    pub m: usize,
    pub eta: f64,
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    pub s: f64,
    pub p_tilde: f64,
    pub r_tilde: f64,
    pub delta: Vec<f64>,
    pub gamma: f64,
    pub zeta: f64,
    pub theta: Vec<f64>,
    pub rho: f64,
    pub theta_sharp: Option<f64>,
    pub xi: Option<f64>,
}

/// `m` strictly positive weights on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTuple {
    weights: Vec<GridFunction>,
}

impl WeightTuple {
    pub fn new(weights: Vec<GridFunction>) -> Result<Self> {
        let first = weights
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty weight tuple".into()))?;
        for w in &weights {
            first.ensure_same_grid(w)?;
            w.check_positive()?;
        }
        Ok(Self { weights })
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[GridFunction] {
        &self.weights
    }

    pub fn get(&self, i: usize) -> &GridFunction {
        &self.weights[i]
    }

    pub fn product(&self) -> GridFunction {
        GridFunction::product(&self.weights).expect("validated on construction")
    }

    pub fn into_inner(self) -> Vec<GridFunction> {
        self.weights
    }
}

/// Supremum of a per-cube quantity and where it is attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub constant: f64,
    pub attaining_cube: DyadicCube,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_cube_values: Vec<f64>,
}

impl WeightReport {
    fn from_values(lattice: &Lattice, values: Vec<f64>) -> Self {
        let (best, constant) = values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv || v.is_nan() {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
        Self {
            constant,
            attaining_cube: lattice.cube_from_id(best),
            per_cube_values: values,
        }
    }

    /// Drops the per-cube table.
    pub fn compact(mut self) -> Self {
        self.per_cube_values.clear();
        self
    }
}

/// `⟨g⟩_{t,B} = (⨍_B g^t)^{1/t}` for every lattice cube, with `t = 1/inv_t`;
/// `inv_t = 0` gives the ess-sup.
fn brackets(g: &GridFunction, inv_t: f64, lattice: &Lattice) -> Result<Vec<f64>> {
    let n = g.resolution();
    if inv_t == 0.0 {
        return pyramid_max(g.values(), n, lattice);
    }
    let t = inv_t.recip();
    let powered: Vec<f64> = g.values().iter().map(|v| v.powf(t)).collect();
    let sums = pyramid_sums(&powered, n, lattice)?;
    Ok(sums
        .iter()
        .enumerate()
        .map(|(id, s)| (s / lattice.cube_from_id(id).measure()).powf(inv_t))
        .collect())
}

/// `(∫_B g^t ν / ν(B))^{1/t}` for every cube; `inv_t = 0` gives the ess-sup.
fn weighted_brackets(g: &GridFunction, nu: &GridFunction, inv_t: f64, lattice: &Lattice) -> Result<Vec<f64>> {
    let n = g.resolution();
    if inv_t == 0.0 {
        return pyramid_max(g.values(), n, lattice);
    }
    let t = inv_t.recip();
    let powered: Vec<f64> = g
        .values()
        .iter()
        .zip(nu.values())
        .map(|(v, w)| v.powf(t) * w)
        .collect();
    let sums = pyramid_sums(&powered, n, lattice)?;
    let mass = pyramid_sums(nu.values(), n, lattice)?;
    Ok(sums
        .iter()
        .zip(&mass)
        .map(|(s, m)| (s / m).powf(inv_t))
        .collect())
}

/// `[w]_{A_p} = sup_B ⨍w (⨍w^{1−p′})^{p−1}`; at `p = 1` the `A_1` constant
/// `sup_B ⨍w / ess inf_B w`.
pub fn ap_constant(w: &GridFunction, p: f64, lattice: &Lattice) -> Result<WeightReport> {
    w.check_positive()?;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("A_p needs 1 <= p < ∞, got {p}")));
    }
    let n = w.resolution();
    let mass = pyramid_sums(w.values(), n, lattice)?;
    let values: Vec<f64> = if p == 1.0 {
        let mins = pyramid_min(w.values(), n, lattice)?;
        mass.iter()
            .zip(&mins)
            .enumerate()
            .map(|(id, (s, lo))| s / lattice.cube_from_id(id).measure() / lo)
            .collect()
    } else {
        let e = 1.0 - p / (p - 1.0);
        let dual: Vec<f64> = w.values().iter().map(|v| v.powf(e)).collect();
        let dual_mass = pyramid_sums(&dual, n, lattice)?;
        mass.iter()
            .zip(&dual_mass)
            .enumerate()
            .map(|(id, (a, b))| {
                let size = lattice.cube_from_id(id).measure();
                (a / size) * (b / size).powf(p - 1.0)
            })
            .collect()
    };
    Ok(WeightReport::from_values(lattice, values))
}

/// Per-cube values of `Π_j ⟨ω_j^{-1}⟩_{δ_j,B} · ⟨ω⟩_{δ_{m+1},B}`.
fn multilinear_values(w: &WeightTuple, exps: &ExponentTuple, lattice: &Lattice) -> Result<Vec<f64>> {
    if w.m() != exps.m() {
        return Err(Error::InvalidParameter(format!(
            "{} weights for an {}-linear exponent tuple",
            w.m(),
            exps.m()
        )));
    }
    let m = exps.m();
    let mut acc = brackets(&w.product(), to_f64(&exps.inv_delta(m)), lattice)?;
    for j in 0..m {
        let inv = w.get(j).map(f64::recip);
        let b = brackets(&inv, to_f64(&exps.inv_delta(j)), lattice)?;
        acc.iter_mut().zip(b).for_each(|(a, v)| *a *= v);
    }
    Ok(acc)
}

/// Characteristic of `ω⃗` in the multilinear fractional class; exponents with
/// `1/δ = 0` become ess-sups.
pub fn multilinear_constant(w: &WeightTuple, exps: &ExponentTuple, lattice: &Lattice) -> Result<WeightReport> {
    let values = multilinear_values(w, exps, lattice)?;
    Ok(WeightReport::from_values(lattice, values))
}

/// `[W]_{A_{p,q}(ν)} = sup_B (⨍_B W^q dν)^{1/q} (⨍_B W^{−p′} dν)^{1/p′}`,
/// parametrized by reciprocals (`0` means `∞`).
pub fn apq_constant(w: &GridFunction, nu: &GridFunction, inv_p: f64, inv_q: f64, lattice: &Lattice) -> Result<WeightReport> {
    w.ensure_same_grid(nu)?;
    w.check_positive()?;
    nu.check_positive()?;
    let upper = weighted_brackets(w, nu, inv_q, lattice)?;
    let inv_p_prime = 1.0 - inv_p;
    let lower = weighted_brackets(&w.map(f64::recip), nu, inv_p_prime, lattice)?;
    let values = upper.iter().zip(&lower).map(|(a, b)| a * b).collect();
    Ok(WeightReport::from_values(lattice, values))
}

/// One numerically checked inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + CHECK_SLACK),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub multilinear: f64,
    /// `[ω_i^{θ_i}]_{A_{ζθ_i}}`, `i < m`.
    pub theta_constants: Vec<f64>,
    /// `[ω̃]_{A_{ζϱ}}`.
    pub tilde_constant: f64,
    /// `[W]_{A_{p_m/r_m, δ_{m+1}/r_m}(ω̃)}`.
    pub w_constant: f64,
    pub checks: Vec<InequalityCheck>,
}

impl FactorizationReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// The factorization `(ω̃, W)` of a weight tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub omega_tilde: GridFunction,
    pub w: GridFunction,
    pub report: FactorizationReport,
}

fn omega_tilde(small: &[GridFunction], exps: &ExponentTuple, resolution: u32) -> Result<GridFunction> {
    let rho = to_f64(&exps.inv_rho().recip());
    if small.is_empty() {
        return Ok(GridFunction::constant(resolution, 1.0));
    }
    Ok(GridFunction::product(small)?.map(|v| v.powf(rho)))
}

/// `A_p` exponent `ζ / (1/x)` from a positive reciprocal.
fn ap_index(exps: &ExponentTuple, inv: Q) -> f64 {
    to_f64(&(exps.zeta() / inv))
}

/// Constants entering the factorization, given `ω_1..ω_{m-1}`, `ω̃`, `W`.
fn factorization_constants(
    small: &[GridFunction],
    tilde: &GridFunction,
    w: &GridFunction,
    exps: &ExponentTuple,
    lattice: &Lattice,
) -> Result<(Vec<f64>, f64, f64)> {
    let m = exps.m();
    let mut theta_constants = Vec::with_capacity(m - 1);
    for (i, wi) in small.iter().enumerate() {
        let theta = to_f64(&exps.inv_theta(i).recip());
        let powered = wi.map(|v| v.powf(theta));
        theta_constants.push(ap_constant(&powered, ap_index(exps, exps.inv_theta(i)), lattice)?.constant);
    }
    let tilde_constant = ap_constant(tilde, ap_index(exps, exps.inv_rho()), lattice)?.constant;
    let inv_rm = exps.inv_r(m - 1);
    // p = p_m / r_m, q = δ_{m+1} / r_m, as reciprocals
    let inv_pp = to_f64(&(exps.inv_p(m - 1) / inv_rm));
    let inv_qq = to_f64(&(exps.inv_delta(m) / inv_rm));
    let w_constant = apq_constant(w, tilde, inv_pp, inv_qq, lattice)?.constant;
    Ok((theta_constants, tilde_constant, w_constant))
}

/// `ω̃ = (Π_{i<m} ω_i)^ϱ`, `W = ω^{r_m} ω̃^{−r_m/δ_{m+1}}`, and the measured
/// inequalities `[ω_i^{θ_i}] <= [ω⃗]^{θ_i}`, `[ω̃] <= [ω⃗]^ϱ`,
/// `[W] <= [ω⃗]^{r_m}`.
pub fn factorize_weights(w: &WeightTuple, exps: &ExponentTuple, lattice: &Lattice) -> Result<Factorization> {
    exps.check_factorizable()?;
    let m = exps.m();
    let res = w.get(0).resolution();
    let small = &w.weights()[..m - 1];
    let tilde = omega_tilde(small, exps, res)?;
    let r_m = to_f64(&exps.inv_r(m - 1).recip());
    let expo = to_f64(&(exps.inv_delta(m) / exps.inv_r(m - 1)));
    let big_w = w.product().zip_with(&tilde, |o, t| o.powf(r_m) * t.powf(-expo))?;

    let multilinear = multilinear_constant(w, exps, lattice)?.constant;
    let (theta_constants, tilde_constant, w_constant) = factorization_constants(small, &tilde, &big_w, exps, lattice)?;
    let mut checks = Vec::new();
    for (i, c) in theta_constants.iter().enumerate() {
        let theta = to_f64(&exps.inv_theta(i).recip());
        checks.push(InequalityCheck::new(format!("theta_power[{}]", i + 1), *c, multilinear.powf(theta)));
    }
    let rho = to_f64(&exps.inv_rho().recip());
    checks.push(InequalityCheck::new("tilde", tilde_constant, multilinear.powf(rho)));
    checks.push(InequalityCheck::new("w_apq", w_constant, multilinear.powf(r_m)));
    Ok(Factorization {
        omega_tilde: tilde,
        w: big_w,
        report: FactorizationReport {
            multilinear,
            theta_constants,
            tilde_constant,
            w_constant,
            checks,
        },
    })
}

/// Rebuilds `ω_m = W^{1/r_m} ω̃^{−1/δ_m}` from `ω_1..ω_{m-1}` and `W`.
pub fn inverse_factorize(small: &[GridFunction], w: &GridFunction, exps: &ExponentTuple) -> Result<WeightTuple> {
    exps.check_factorizable()?;
    let m = exps.m();
    if small.len() + 1 != m {
        return Err(Error::InvalidParameter(format!(
            "expected {} small weights, got {}",
            m - 1,
            small.len()
        )));
    }
    w.check_positive()?;
    for s in small {
        w.ensure_same_grid(s)?;
        s.check_positive()?;
    }
    let tilde = omega_tilde(small, exps, w.resolution())?;
    let inv_rm = to_f64(&exps.inv_r(m - 1));
    let inv_dm = to_f64(&exps.inv_delta(m - 1));
    let last = w.zip_with(&tilde, |a, t| a.powf(inv_rm) * t.powf(-inv_dm))?;
    let mut weights = small.to_vec();
    weights.push(last);
    WeightTuple::new(weights)
}

/// Measures `[ω⃗] <= [W]^{1/r_m} [ω̃]^{1/ϱ} Π [ω_i^{θ_i}]^{1/θ_i}` for a tuple
/// rebuilt by [`inverse_factorize`].
pub fn check_inverse_bound(
    tuple: &WeightTuple,
    w: &GridFunction,
    exps: &ExponentTuple,
    lattice: &Lattice,
) -> Result<InequalityCheck> {
    let m = exps.m();
    let small = &tuple.weights()[..m - 1];
    let tilde = omega_tilde(small, exps, w.resolution())?;
    let (theta_constants, tilde_constant, w_constant) = factorization_constants(small, &tilde, w, exps, lattice)?;
    let mut rhs = w_constant.powf(to_f64(&exps.inv_r(m - 1))) * tilde_constant.powf(to_f64(&exps.inv_rho()));
    for (i, c) in theta_constants.iter().enumerate() {
        rhs *= c.powf(to_f64(&exps.inv_theta(i)));
    }
    let lhs = multilinear_constant(tuple, exps, lattice)?.constant;
    Ok(InequalityCheck::new("inverse_bound", lhs, rhs))
}

/// Left and right sides of the two norm identities attached to the
/// factorization: `‖fω‖_{p̃}` and `‖fω_m‖_{p_m}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormIdentities {
    pub product_lhs: f64,
    pub product_rhs: f64,
    pub last_lhs: f64,
    pub last_rhs: f64,
}

impl NormIdentities {
    pub fn max_relative_error(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        rel(self.product_lhs, self.product_rhs).max(rel(self.last_lhs, self.last_rhs))
    }
}

/// `L^t(dν)` norm `(∫|g|^t ν)^{1/t}`; `t = ∞` is the ess-sup.
fn weighted_norm(g: &GridFunction, t: f64, nu: &GridFunction) -> Result<f64> {
    if t.is_infinite() {
        return Ok(g.sup_norm());
    }
    g.weighted_lp_norm(t, nu)
}

/// Evaluates both sides of the two norm identities for `f >= 0`.
pub fn norm_identities(f: &GridFunction, w: &WeightTuple, exps: &ExponentTuple) -> Result<NormIdentities> {
    f.check_nonnegative()?;
    let m = exps.m();
    let res = f.resolution();
    let tilde = omega_tilde(&w.weights()[..m - 1], exps, res)?;
    let omega = w.product();
    let r_m = to_f64(&exps.inv_r(m - 1).recip());
    let expo = to_f64(&(exps.inv_delta(m) / exps.inv_r(m - 1)));
    let big_w = omega.zip_with(&tilde, |o, t| o.powf(r_m) * t.powf(-expo))?;
    let ones = GridFunction::constant(res, 1.0);
    let inf_or = |x: Q| if x.is_zero() { f64::INFINITY } else { 1.0 / to_f64(&x) };

    let p_tilde = inf_or(exps.inv_p_tilde());
    let product_lhs = weighted_norm(&f.zip_with(&omega, |a, b| a * b)?, p_tilde, &ones)?;
    let inv_s = to_f64(&exps.inv_s());
    let g = f
        .zip_with(&tilde, |a, t| (a * t.powf(-inv_s)).powf(r_m))?
        .zip_with(&big_w, |a, b| a * b)?;
    let product_rhs = weighted_norm(&g, p_tilde / r_m, &tilde)?.powf(1.0 / r_m);

    let p_m = inf_or(exps.inv_p(m - 1));
    let last_lhs = weighted_norm(&f.zip_with(w.get(m - 1), |a, b| a * b)?, p_m, &ones)?;
    let g = f
        .zip_with(&tilde, |a, t| (a * t.powf(-1.0 / r_m)).powf(r_m))?
        .zip_with(&big_w, |a, b| a * b)?;
    let last_rhs = weighted_norm(&g, p_m / r_m, &tilde)?.powf(1.0 / r_m);
    Ok(NormIdentities {
        product_lhs,
        product_rhs,
        last_lhs,
        last_rhs,
    })
}

/// `φ = (ω/μ)^{1/k}`.
pub fn bloom_weight(omega: &GridFunction, mu: &GridFunction, k: u32) -> Result<GridFunction> {
    if k == 0 {
        return Err(Error::InvalidParameter("Bloom weight needs k >= 1".into()));
    }
    omega.check_positive()?;
    mu.check_positive()?;
    let e = 1.0 / k as f64;
    omega.zip_with(mu, |a, b| (a / b).powf(e))
}

/// Midpoint-sampled `x^a`, `a > −1`.
pub fn power_weight(exponent: f64, resolution: u32) -> Result<GridFunction> {
    if !(exponent > -1.0) || !exponent.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "power weight exponent {exponent} must exceed -1"
        )));
    }
    GridFunction::new(
        resolution,
        GridFunction::from_fn_midpoint(resolution, |x| x.powf(exponent)).into_values(),
    )
}
