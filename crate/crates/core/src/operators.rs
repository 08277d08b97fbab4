//! Multilinear fractional maximal operators, the `m`-linear fractional
//! integral, and dyadic shifts and paraproducts.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{haar_coefficient, DyadicCube, Lattice};
use crate::error::{Error, Result};
use crate::gridfn::{avg, pyramid_sums, GridFunction};

const BETA_SLACK: f64 = 1e-12;

/// Parameters of the kernel `(Σ_i |x − y_i|)^{η−m}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub m: usize,
    pub eta: f64,
    /// Integrate only where `Σ|x − y_i| > epsilon`; `0` disables truncation.
    #[serde(default)]
    pub epsilon: f64,
}

impl KernelSpec {
    pub fn new(m: usize, eta: f64) -> Self {
        Self { m, eta, epsilon: 0.0 }
    }

    pub fn truncated(m: usize, eta: f64, epsilon: f64) -> Self {
        Self { m, eta, epsilon }
    }

    fn validate(&self, arity: usize) -> Result<()> {
        if self.m == 0 || self.m != arity {
            return Err(Error::InvalidParameter(format!(
                "kernel arity {} does not match {arity} inputs",
                self.m
            )));
        }
        if !(self.eta > 0.0 && self.eta < self.m as f64) {
            return Err(Error::InvalidParameter(format!(
                "fractional order η = {} must lie in (0, {})",
                self.eta, self.m
            )));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("truncation ε = {} must be >= 0", self.epsilon)));
        }
        Ok(())
    }
}

fn check_inputs(fs: &[GridFunction]) -> Result<u32> {
    let first = fs
        .first()
        .ok_or_else(|| Error::InvalidParameter("no input functions".into()))?;
    for f in fs {
        first.ensure_same_grid(f)?;
    }
    Ok(first.resolution())
}

fn check_slots(fs: &[GridFunction], r: &[f64], eta: &[f64]) -> Result<()> {
    if r.len() != fs.len() || eta.len() != fs.len() {
        return Err(Error::InvalidParameter(format!(
            "{} inputs but {} exponents r and {} orders η",
            fs.len(),
            r.len(),
            eta.len()
        )));
    }
    check_inputs(fs).map(|_| ())
}

/// `Π_i ⟨f_i⟩_{η_i,r_i,B}` for every lattice cube, by [`Lattice::id`].
pub fn cube_products(fs: &[GridFunction], lattice: &Lattice, r: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
    check_slots(fs, r, eta)?;
    let mut out = vec![1.0; lattice.len()];
    for ((f, &ri), &ei) in fs.iter().zip(r).zip(eta) {
        // validates the exponents once
        avg(f, &lattice.root(), ri, ei)?;
        let powered: Vec<f64> = f.values().iter().map(|v| v.abs().powf(ri)).collect();
        let sums = pyramid_sums(&powered, f.resolution(), lattice)?;
        for (id, (o, s)) in out.iter_mut().zip(sums).enumerate() {
            let size = lattice.cube_from_id(id).measure();
            *o *= (s * size.powf(-(1.0 - ei * ri))).powf(1.0 / ri);
        }
    }
    Ok(out)
}

/// `sup_{B ∋ x} Π_i ⟨f_i⟩_{η_i,r_i,B}` over the lattice.
pub fn maximal(fs: &[GridFunction], x: f64, lattice: &Lattice, r: &[f64], eta: &[f64]) -> Result<f64> {
    check_slots(fs, r, eta)?;
    let mut best: f64 = 0.0;
    for b in lattice.chain(x)? {
        let mut prod = 1.0;
        for ((f, &ri), &ei) in fs.iter().zip(r).zip(eta) {
            prod *= avg(f, &b, ri, ei)?;
        }
        best = best.max(prod);
    }
    Ok(best)
}

/// `Π_i M_{η_i,r_i} f_i(x)`; dominates [`maximal`].
pub fn maximal_tensor(fs: &[GridFunction], x: f64, lattice: &Lattice, r: &[f64], eta: &[f64]) -> Result<f64> {
    check_slots(fs, r, eta)?;
    let chain = lattice.chain(x)?;
    let mut prod = 1.0;
    for ((f, &ri), &ei) in fs.iter().zip(r).zip(eta) {
        let mut best: f64 = 0.0;
        for b in &chain {
            best = best.max(avg(f, b, ri, ei)?);
        }
        prod *= best;
    }
    Ok(prod)
}

/// Top-down running maximum of per-cube values along ancestor chains.
pub(crate) fn propagate_max(values: &[f64]) -> Vec<f64> {
    let mut best = values.to_vec();
    for id in 1..best.len() {
        let parent = (id - 1) / 2;
        best[id] = best[id].max(best[parent]);
    }
    best
}

/// [`maximal`] at every grid cell at once.
pub fn maximal_grid(fs: &[GridFunction], lattice: &Lattice, r: &[f64], eta: &[f64]) -> Result<GridFunction> {
    let n = check_inputs(fs)?;
    let products = cube_products(fs, lattice, r, eta)?;
    let best = propagate_max(&products);
    let depth = lattice.max_level();
    let values = (0..1usize << n)
        .map(|cell| best[lattice.id(&lattice.cube_of_cell(cell, n, depth))])
        .collect();
    GridFunction::new(n, values)
}

/// Brute-force midpoint quadrature of the `m`-linear fractional integral at an
/// arbitrary `x`. Cost is `2^{Nm}`; intended as a reference.
pub fn fractional_integral(fs: &[GridFunction], x: f64, kernel: &KernelSpec) -> Result<f64> {
    let n = check_inputs(fs)?;
    kernel.validate(fs.len())?;
    if !(0.0..1.0).contains(&x) {
        return Err(Error::PointOutOfDomain(x));
    }
    let h = (-(n as f64)).exp2();
    let cells = 1usize << n;
    let power = kernel.eta - kernel.m as f64;
    let volume = h.powi(kernel.m as i32);
    let dist: Vec<f64> = (0..cells).map(|k| (x - (k as f64 + 0.5) * h).abs()).collect();

    fn recurse(
        fs: &[GridFunction],
        dist: &[f64],
        slot: usize,
        partial_dist: f64,
        partial_prod: f64,
        kernel: &KernelSpec,
        power: f64,
    ) -> f64 {
        if slot == fs.len() {
            if partial_dist == 0.0 || partial_dist <= kernel.epsilon {
                return 0.0;
            }
            return partial_prod * partial_dist.powf(power);
        }
        let mut total = 0.0;
        for (k, &v) in fs[slot].values().iter().enumerate() {
            if v != 0.0 {
                total += recurse(fs, dist, slot + 1, partial_dist + dist[k], partial_prod * v, kernel, power);
            }
        }
        total
    }

    Ok(volume * recurse(fs, &dist, 0, 0.0, 1.0, kernel, power))
}

/// Maximal runs of equal nonzero values: `(start, end, value)`.
fn runs(values: &[f64]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] != values[start] {
            if values[start] != 0.0 {
                out.push((start, k, values[start]));
            }
            start = k;
        }
    }
    out
}

/// Runs of one input seen from the left endpoint of cell `a`, as ranges of
/// the distance index `j` (distance `(j + ½)h`).
fn distance_pieces(runs: &[(usize, usize, f64)], a: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(runs.len() + 1);
    for &(s, e, v) in runs {
        if e > a {
            let lo = s.max(a);
            out.push((lo - a, e - a, v));
        }
        if s < a {
            let hi = e.min(a);
            // cells k in [s, hi) sit at j = a − 1 − k
            out.push((a - hi, a - s, v));
        }
    }
    out
}

/// The `m`-linear fractional integral at every left endpoint `x = a·2^{-N}`,
/// computed exactly as the midpoint quadrature of [`fractional_integral`] but
/// summed over constant runs of the inputs with iterated prefix sums of the
/// kernel profile.
pub fn fractional_integral_grid(fs: &[GridFunction], kernel: &KernelSpec) -> Result<GridFunction> {
    let n = check_inputs(fs)?;
    let cells: Vec<usize> = (0..1usize << n).collect();
    GridFunction::new(n, fractional_integral_cells(fs, kernel, &cells)?)
}

/// [`fractional_integral_grid`] restricted to the left endpoints of `cells`.
pub fn fractional_integral_cells(fs: &[GridFunction], kernel: &KernelSpec, cells: &[usize]) -> Result<Vec<f64>> {
    let n = check_inputs(fs)?;
    kernel.validate(fs.len())?;
    if let Some(&c) = cells.iter().find(|&&c| c >= 1usize << n) {
        return Err(Error::InvalidParameter(format!("cell {c} is outside the grid")));
    }
    let m = kernel.m;
    let total_cells = 1usize << n;
    let h = (-(n as f64)).exp2();
    let half_m = m as f64 / 2.0;
    let power = kernel.eta - m as f64;
    // w(s) = (s + m/2)^{η−m}, zero inside the truncation radius
    let len = m * total_cells + 1;
    let mut table: Vec<f64> = (0..len)
        .map(|s| {
            let d = s as f64 + half_m;
            if d * h <= kernel.epsilon {
                0.0
            } else {
                d.powf(power)
            }
        })
        .collect();
    for _ in 0..m {
        let mut acc = 0.0;
        let mut next = Vec::with_capacity(len + 1);
        next.push(0.0);
        for v in &table {
            acc += v;
            next.push(acc);
        }
        next.truncate(len);
        table = next;
    }
    let all_runs: Vec<_> = fs.iter().map(|f| runs(f.values())).collect();
    let scale = h.powf(kernel.eta);
    let signs: Vec<(usize, f64)> = (0..1usize << m)
        .map(|mask| (mask, if (m - mask.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 }))
        .collect();

    Ok(cells
        .par_iter()
        .map(|&a| {
            let pieces: Vec<_> = all_runs.iter().map(|r| distance_pieces(r, a)).collect();
            if pieces.iter().any(Vec::is_empty) {
                return 0.0;
            }
            let mut total = 0.0;
            let mut idx = vec![0usize; m];
            'tuples: loop {
                let mut coeff = 1.0;
                for (i, &k) in idx.iter().enumerate() {
                    coeff *= pieces[i][k].2;
                }
                let mut box_sum = 0.0;
                for &(mask, sign) in &signs {
                    let corner: usize = idx
                        .iter()
                        .enumerate()
                        .map(|(i, &k)| if mask >> i & 1 == 1 { pieces[i][k].1 } else { pieces[i][k].0 })
                        .sum();
                    box_sum += sign * table[corner];
                }
                total += coeff * box_sum;
                for i in 0..m {
                    idx[i] += 1;
                    if idx[i] < pieces[i].len() {
                        continue 'tuples;
                    }
                    idx[i] = 0;
                }
                break;
            }
            scale * total
        })
        .collect())
}

/// One coefficient `β_{J_1,…,J_{m+1},P}` of a dyadic shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftTerm {
    pub p: DyadicCube,
    pub j: Vec<DyadicCube>,
    pub beta: f64,
}

/// A multilinear fractional dyadic shift of complexity `(j_1, …, j_{m+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    eta: f64,
    complexity: Vec<u32>,
    cancellative: Vec<bool>,
    constant: f64,
    terms: Vec<ShiftTerm>,
}

impl ShiftSpec {
    /// Checks nesting, complexity, cancellation and the size bound
    /// `|β| <= C Π|J_i|^{1/2} / |P|^{m−η}` for every term.
    pub fn new(
        eta: f64,
        complexity: Vec<u32>,
        cancellative: Vec<bool>,
        constant: f64,
        mut terms: Vec<ShiftTerm>,
    ) -> Result<Self> {
        let slots = complexity.len();
        if slots < 2 || cancellative.len() != slots {
            return Err(Error::InvalidShift(format!(
                "need m+1 >= 2 complexity entries and flags, got {} and {}",
                slots,
                cancellative.len()
            )));
        }
        let m = slots - 1;
        if !(eta >= 0.0 && eta < m as f64) {
            return Err(Error::InvalidShift(format!("η = {eta} outside [0, {m})")));
        }
        if !cancellative[..m].iter().any(|c| *c) {
            return Err(Error::InvalidShift("no input slot is cancellative".into()));
        }
        if !(constant > 0.0) {
            return Err(Error::InvalidShift(format!("size constant {constant} must be positive")));
        }
        for t in &terms {
            if t.j.len() != slots {
                return Err(Error::InvalidShift(format!("term at {} has {} cubes, expected {slots}", t.p, t.j.len())));
            }
            for (k, (jc, &jk)) in t.j.iter().zip(&complexity).enumerate() {
                if jc.shift != t.p.shift || jc.level != t.p.level + jk || !t.p.contains(jc) {
                    return Err(Error::InvalidShift(format!(
                        "J_{} = {jc} is not a level-{} descendant of P = {}",
                        k + 1,
                        jk,
                        t.p
                    )));
                }
            }
            let bound = constant
                * t.j.iter().map(|c| c.measure().sqrt()).product::<f64>()
                / t.p.measure().powf(m as f64 - eta);
            if !t.beta.is_finite() || t.beta.abs() > bound * (1.0 + BETA_SLACK) {
                return Err(Error::InvalidShift(format!(
                    "|β| = {} exceeds size bound {bound} at P = {}",
                    t.beta.abs(),
                    t.p
                )));
            }
        }
        terms.sort_by(|a, b| {
            let key = |t: &ShiftTerm| {
                std::iter::once(&t.p)
                    .chain(&t.j)
                    .map(|c| (c.level, c.index))
                    .collect::<Vec<_>>()
            };
            key(a).cmp(&key(b))
        });
        Ok(Self {
            eta,
            complexity,
            cancellative,
            constant,
            terms,
        })
    }

    pub fn m(&self) -> usize {
        self.complexity.len() - 1
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn terms(&self) -> &[ShiftTerm] {
        &self.terms
    }

    pub fn complexity(&self) -> &[u32] {
        &self.complexity
    }

    pub fn cancellative(&self) -> &[bool] {
        &self.cancellative
    }
}

/// `⟨f, h̃_J⟩` with `h̃ ∈ {h, h^0}`.
fn pairing(f: &GridFunction, cube: &DyadicCube, cancellative: bool) -> Result<f64> {
    if cancellative {
        haar_coefficient(f, cube)
    } else {
        Ok(f.cube_integral(cube)? / cube.measure().sqrt())
    }
}

fn add_haar(out: &mut [f64], resolution: u32, cube: &DyadicCube, cancellative: bool, c: f64) -> Result<()> {
    let norm = c / cube.measure().sqrt();
    if !cancellative {
        for k in cube.cells(resolution)?.iter() {
            out[k] += norm;
        }
        return Ok(());
    }
    let [left, right] = cube.children();
    for k in left.cells(resolution)?.iter() {
        out[k] += norm;
    }
    for k in right.cells(resolution)?.iter() {
        out[k] -= norm;
    }
    Ok(())
}

fn check_in_lattice(lattice: &Lattice, cube: &DyadicCube, resolution: u32) -> Result<()> {
    if !lattice.contains(cube) {
        return Err(Error::InvalidParameter(format!("cube {cube} is outside the lattice")));
    }
    if cube.level + 1 > resolution {
        return Err(Error::ResolutionMismatch {
            level: cube.level + 1,
            shift_bits: cube.shift.bits(),
            resolution,
        });
    }
    Ok(())
}

/// `Σ_P Σ_{J⃗} β Π_i ⟨f_i, h̃_{J_i}⟩ h̃_{J_{m+1}}`.
pub fn apply_shift(spec: &ShiftSpec, fs: &[GridFunction], lattice: &Lattice) -> Result<GridFunction> {
    let n = check_inputs(fs)?;
    if fs.len() != spec.m() {
        return Err(Error::InvalidParameter(format!("shift is {}-linear, got {} inputs", spec.m(), fs.len())));
    }
    let m = spec.m();
    let mut out = vec![0.0; 1usize << n];
    for t in &spec.terms {
        for c in std::iter::once(&t.p).chain(&t.j) {
            check_in_lattice(lattice, c, n)?;
        }
        let mut coeff = t.beta;
        for i in 0..m {
            coeff *= pairing(&fs[i], &t.j[i], spec.cancellative[i])?;
        }
        if coeff != 0.0 {
            add_haar(&mut out, n, &t.j[m], spec.cancellative[m], coeff)?;
        }
    }
    GridFunction::new(n, out)
}

/// Paraproduct coefficients `β_{η,P}` obeying the Carleson normalization
/// `sup_{P_0} |P_0|^{−2η−1} Σ_{P ⊆ P_0} |β_P|² <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaproductSpec {
    eta: f64,
    coefficients: Vec<(DyadicCube, f64)>,
}

impl ParaproductSpec {
    pub fn new(eta: f64, coefficients: Vec<(DyadicCube, f64)>) -> Result<Self> {
        if !(eta >= 0.0) {
            return Err(Error::InvalidParameter(format!("η = {eta} must be >= 0")));
        }
        let (cube, value) = carleson_sup(eta, &coefficients)?;
        if value > 1.0 + BETA_SLACK {
            return Err(Error::Carleson {
                cube: cube.map(|c| c.to_string()).unwrap_or_default(),
                value,
                bound: 1.0,
            });
        }
        let mut coefficients = coefficients;
        coefficients.sort_by_key(|(c, _)| (c.level, c.index));
        Ok(Self { eta, coefficients })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn coefficients(&self) -> &[(DyadicCube, f64)] {
        &self.coefficients
    }
}

/// Largest Carleson ratio and the cube attaining it.
pub fn carleson_sup(eta: f64, coefficients: &[(DyadicCube, f64)]) -> Result<(Option<DyadicCube>, f64)> {
    let mut mass: HashMap<(u32, u64), (DyadicCube, f64)> = HashMap::new();
    for (c, b) in coefficients {
        if !b.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite coefficient at {c}")));
        }
        if c.shift != coefficients[0].0.shift {
            return Err(Error::InvalidParameter("coefficients live on different grids".into()));
        }
        for k in 0..=c.level {
            let a = c.ancestor_at(k);
            mass.entry((a.level, a.index)).or_insert((a, 0.0)).1 += b * b;
        }
    }
    let mut entries: Vec<_> = mass.into_values().collect();
    entries.sort_by_key(|(c, _)| (c.level, c.index));
    let mut best = (None, 0.0);
    for (c, s) in entries {
        let v = c.measure().powf(-2.0 * eta - 1.0) * s;
        if v > best.1 {
            best = (Some(c), v);
        }
    }
    Ok(best)
}

/// `Σ_P β_P Π_i ⟨f_i⟩_P h_P`.
pub fn apply_paraproduct(spec: &ParaproductSpec, fs: &[GridFunction], lattice: &Lattice) -> Result<GridFunction> {
    let n = check_inputs(fs)?;
    let mut out = vec![0.0; 1usize << n];
    for (p, beta) in &spec.coefficients {
        check_in_lattice(lattice, p, n)?;
        let mut coeff = *beta;
        for f in fs {
            coeff *= f.cube_mean(p)?;
        }
        if coeff != 0.0 {
            add_haar(&mut out, n, p, true, coeff)?;
        }
    }
    GridFunction::new(n, out)
}
