//! Piecewise-constant functions on the uniform grid of `2^N` cells, their
//! fractional averages, Orlicz gauges and BMO-type norms.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{haar_coefficients, DyadicCube, Lattice};
use crate::error::{Error, Result};

/// Largest grid resolution accepted by [`GridFunction::new`].
pub const MAX_RESOLUTION: u32 = 24;

const EXPONENT_SLACK: f64 = 1e-12;

/// A function on `[0,1)` that is constant on each cell `[k 2^-N, (k+1) 2^-N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    resolution: u32,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(resolution: u32, values: Vec<f64>) -> Result<Self> {
        if resolution > MAX_RESOLUTION {
            return Err(Error::LevelOutOfRange {
                level: resolution,
                max: MAX_RESOLUTION,
            });
        }
        let expected = 1usize << resolution;
        if values.len() != expected {
            return Err(Error::BadLength {
                resolution,
                expected,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { resolution, values })
    }

    pub fn constant(resolution: u32, c: f64) -> Self {
        Self {
            resolution,
            values: vec![c; 1usize << resolution],
        }
    }

    pub fn zeros(resolution: u32) -> Self {
        Self::constant(resolution, 0.0)
    }

    /// Samples `f` at left endpoints of the cells.
    pub fn from_fn_left(resolution: u32, f: impl Fn(f64) -> f64) -> Self {
        let h = (-(resolution as f64)).exp2();
        Self {
            resolution,
            values: (0..1usize << resolution).map(|k| f(k as f64 * h)).collect(),
        }
    }

    /// Samples `f` at cell midpoints; used for data with a pole at `x = 0`.
    pub fn from_fn_midpoint(resolution: u32, f: impl Fn(f64) -> f64) -> Self {
        let h = (-(resolution as f64)).exp2();
        Self {
            resolution,
            values: (0..1usize << resolution)
                .map(|k| f((k as f64 + 0.5) * h))
                .collect(),
        }
    }

    /// `χ_E` for a union of lattice cubes, exact on the grid.
    pub fn indicator_of(resolution: u32, cubes: &[DyadicCube]) -> Result<Self> {
        let mut values = vec![0.0; 1usize << resolution];
        for c in cubes {
            for cell in c.cells(resolution)?.iter() {
                values[cell] = 1.0;
            }
        }
        Ok(Self { resolution, values })
    }

    /// `χ_[a,b)` evaluated at cell midpoints.
    pub fn indicator(resolution: u32, a: f64, b: f64) -> Self {
        Self::from_fn_midpoint(resolution, |x| if x >= a && x < b { 1.0 } else { 0.0 })
    }

    /// Haar function of `cube` as a grid function.
    pub fn haar(resolution: u32, cube: &DyadicCube, cancellative: bool) -> Result<Self> {
        if cube.level + 1 > resolution {
            return Err(Error::ResolutionMismatch {
                level: cube.level + 1,
                shift_bits: cube.shift.bits(),
                resolution,
            });
        }
        let norm = cube.measure().sqrt().recip();
        let mut values = vec![0.0; 1usize << resolution];
        let [left, right] = cube.children();
        for cell in left.cells(resolution)?.iter() {
            values[cell] = norm;
        }
        let sign = if cancellative { -1.0 } else { 1.0 };
        for cell in right.cells(resolution)?.iter() {
            values[cell] = sign * norm;
        }
        Ok(Self { resolution, values })
    }

    /// Random nonnegative function, constant on dyadic intervals of `level`,
    /// with values drawn uniformly from `[lo, hi)`.
    pub fn random_piecewise(
        resolution: u32,
        level: u32,
        lo: f64,
        hi: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let level = level.min(resolution);
        let pieces: Vec<f64> = (0..1usize << level).map(|_| rng.gen_range(lo..hi)).collect();
        let width = 1usize << (resolution - level);
        Self {
            resolution,
            values: (0..1usize << resolution).map(|k| pieces[k / width]).collect(),
        }
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Cell width `2^-N`.
    pub fn cell_width(&self) -> f64 {
        (-(self.resolution as f64)).exp2()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn cell_of(&self, x: f64) -> Result<usize> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::PointOutOfDomain(x));
        }
        Ok(((x * self.len() as f64).floor() as usize).min(self.len() - 1))
    }

    pub fn value_at(&self, x: f64) -> Result<f64> {
        Ok(self.values[self.cell_of(x)?])
    }

    pub fn check_nonnegative(&self) -> Result<()> {
        match self.values.iter().position(|v| *v < 0.0) {
            Some(i) => Err(Error::Negative(i)),
            None => Ok(()),
        }
    }

    pub fn check_positive(&self) -> Result<()> {
        match self.values.iter().position(|v| *v <= 0.0) {
            Some(i) => Err(Error::NonPositiveWeight(i)),
            None => Ok(()),
        }
    }

    pub fn ensure_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.resolution != other.resolution {
            return Err(Error::GridMismatch(self.resolution, other.resolution));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            resolution: self.resolution,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_grid(other)?;
        Ok(Self {
            resolution: self.resolution,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Pointwise product of several functions on one grid.
    pub fn product(fs: &[GridFunction]) -> Result<Self> {
        let first = fs
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty product".into()))?;
        let mut out = first.clone();
        for f in &fs[1..] {
            out = out.zip_with(f, |a, b| a * b)?;
        }
        Ok(out)
    }

    /// Multiplies by `χ_cube`.
    pub fn restrict(&self, cube: &DyadicCube) -> Result<Self> {
        let span = cube.cells(self.resolution)?;
        let mut values = vec![0.0; self.len()];
        for cell in span.iter() {
            values[cell] = self.values[cell];
        }
        Ok(Self {
            resolution: self.resolution,
            values,
        })
    }

    /// Same function on a grid with twice as many cells.
    pub fn refine(&self) -> Self {
        Self {
            resolution: self.resolution + 1,
            values: self.values.iter().flat_map(|&v| [v, v]).collect(),
        }
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_width()
    }

    pub fn cube_integral(&self, cube: &DyadicCube) -> Result<f64> {
        let (a, b) = cube.cells(self.resolution)?.ranges();
        let s: f64 = self.values[a].iter().sum::<f64>() + self.values[b].iter().sum::<f64>();
        Ok(s * self.cell_width())
    }

    pub fn cube_mean(&self, cube: &DyadicCube) -> Result<f64> {
        Ok(self.cube_integral(cube)? / cube.measure())
    }

    /// `∫_Q |f|^r`.
    pub fn cube_integral_pow(&self, cube: &DyadicCube, r: f64) -> Result<f64> {
        let span = cube.cells(self.resolution)?;
        let s: f64 = if r == 1.0 {
            span.iter().map(|k| self.values[k].abs()).sum()
        } else {
            span.iter().map(|k| self.values[k].abs().powf(r)).sum()
        };
        Ok(s * self.cell_width())
    }

    pub fn cube_max_abs(&self, cube: &DyadicCube) -> Result<f64> {
        Ok(cube
            .cells(self.resolution)?
            .iter()
            .map(|k| self.values[k].abs())
            .fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖f‖_{L^p}`; `p = ∞` gives the grid sup.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_norm();
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.cell_width()).powf(1.0 / p)
    }

    /// `‖f‖_{L^p(w)} = (∫ |f|^p w)^{1/p}`.
    pub fn weighted_lp_norm(&self, p: f64, w: &GridFunction) -> Result<f64> {
        self.ensure_same_grid(w)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&w.values)
            .map(|(v, wv)| v.abs().powf(p) * wv)
            .sum();
        Ok((s * self.cell_width()).powf(1.0 / p))
    }

    /// Integrals over every lattice cube, indexed by [`Lattice::id`], built
    /// bottom-up from the cells.
    pub fn cube_integrals(&self, lattice: &Lattice) -> Result<Vec<f64>> {
        pyramid_sums(&self.values, self.resolution, lattice)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["index", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            wr.write_record([i.to_string(), format!("{v:e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "index" || &headers[1] != "value" {
            return Err(Error::InvalidParameter(
                "csv header must be `index,value`".into(),
            ));
        }
        let mut values = Vec::new();
        for (expected, row) in rd.deserialize::<(usize, f64)>().enumerate() {
            let (index, value) = row?;
            if index != expected {
                return Err(Error::InvalidParameter(format!(
                    "csv row {expected} has index {index}"
                )));
            }
            values.push(value);
        }
        if !values.len().is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "{} rows is not a power of two",
                values.len()
            )));
        }
        Self::new(values.len().trailing_zeros(), values)
    }
}

/// Sums of `values` over each lattice cube times the cell width.
pub(crate) fn pyramid_sums(values: &[f64], resolution: u32, lattice: &Lattice) -> Result<Vec<f64>> {
    let h = (-(resolution as f64)).exp2();
    let mut out = pyramid(values, resolution, lattice, 0.0, |a, b| a + b)?;
    out.iter_mut().for_each(|v| *v *= h);
    Ok(out)
}

/// Largest of `values` on each lattice cube.
pub(crate) fn pyramid_max(values: &[f64], resolution: u32, lattice: &Lattice) -> Result<Vec<f64>> {
    pyramid(values, resolution, lattice, f64::NEG_INFINITY, f64::max)
}

/// Smallest of `values` on each lattice cube.
pub(crate) fn pyramid_min(values: &[f64], resolution: u32, lattice: &Lattice) -> Result<Vec<f64>> {
    pyramid(values, resolution, lattice, f64::INFINITY, f64::min)
}

fn pyramid(
    values: &[f64],
    resolution: u32,
    lattice: &Lattice,
    init: f64,
    op: impl Fn(f64, f64) -> f64,
) -> Result<Vec<f64>> {
    let depth = lattice.max_level();
    if depth > resolution || lattice.shift().bits() > resolution {
        return Err(Error::ResolutionMismatch {
            level: depth,
            shift_bits: lattice.shift().bits(),
            resolution,
        });
    }
    let n = values.len();
    let width = 1usize << (resolution - depth);
    let offset = (lattice.shift().numerator() as usize) << (resolution - lattice.shift().bits());
    let mut level_vals: Vec<f64> = (0..1usize << depth)
        .map(|j| (0..width).fold(init, |acc, t| op(acc, values[(j * width + t + offset) % n])))
        .collect();
    let mut out = vec![0.0; lattice.len()];
    let mut level = depth;
    loop {
        let base = (1usize << level) - 1;
        out[base..base + level_vals.len()].copy_from_slice(&level_vals);
        if level == 0 {
            break;
        }
        level_vals = level_vals.chunks_exact(2).map(|p| op(p[0], p[1])).collect();
        level -= 1;
    }
    Ok(out)
}

fn check_fractional(r: f64, eta: f64) -> Result<()> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("average exponent r = {r} must be in [1,∞)")));
    }
    if eta < 0.0 || eta * r > 1.0 + EXPONENT_SLACK {
        return Err(Error::InvalidParameter(format!(
            "fractional order η = {eta} with r = {r} violates 0 <= ηr <= 1"
        )));
    }
    Ok(())
}

/// Fractional average `⟨f⟩_{η,r,Q} = (|Q|^{-(1-ηr)} ∫_Q |f|^r)^{1/r}`.
pub fn avg(f: &GridFunction, q: &DyadicCube, r: f64, eta: f64) -> Result<f64> {
    check_fractional(r, eta)?;
    let integral = f.cube_integral_pow(q, r)?;
    Ok((integral * q.measure().powf(-(1.0 - eta * r))).powf(1.0 / r))
}

/// `⟨⟨f⟩⟩_{η,r,Q}`: supremum of [`avg`] over the lattice cubes containing `q`.
pub fn maximal_avg(f: &GridFunction, q: &DyadicCube, lattice: &Lattice, r: f64, eta: f64) -> Result<f64> {
    check_fractional(r, eta)?;
    if !lattice.contains(q) {
        return Err(Error::InvalidParameter(format!("cube {q} is not in the lattice")));
    }
    lattice
        .ancestors(q)
        .iter()
        .map(|c| avg(f, c, r, eta))
        .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
}

/// The three parametric Young functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameter", rename_all = "snake_case")]
pub enum YoungFunction {
    /// `Φ(t) = t^p`
    Power(f64),
    /// `Φ(t) = t log^r(e + t)`
    LLogL(f64),
    /// `Φ(t) = e^{t^r} - 1`
    ExpL(f64),
}

impl YoungFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            YoungFunction::Power(p) => t.powf(p),
            YoungFunction::LLogL(r) => t * (std::f64::consts::E + t).ln().powf(r),
            YoungFunction::ExpL(r) => t.powf(r).exp_m1(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            YoungFunction::Power(p) => p >= 1.0,
            YoungFunction::LLogL(r) | YoungFunction::ExpL(r) => r > 0.0,
        };
        if ok && self.parameter().is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid Young function {self:?}")))
        }
    }

    fn parameter(&self) -> f64 {
        match *self {
            YoungFunction::Power(p) | YoungFunction::LLogL(p) | YoungFunction::ExpL(p) => p,
        }
    }
}

/// Normalized Luxemburg norm `inf{λ > 0 : ⨍_Q Φ(|f|/λ) <= 1}` by bisection.
pub fn luxemburg_norm(f: &GridFunction, q: &DyadicCube, phi: YoungFunction) -> Result<f64> {
    phi.validate()?;
    let cells: Vec<f64> = q
        .cells(f.resolution())?
        .iter()
        .map(|k| f.values()[k].abs())
        .collect();
    let sup = cells.iter().fold(0.0f64, |m, v| m.max(*v));
    if sup == 0.0 {
        return Ok(0.0);
    }
    let count = cells.len() as f64;
    let modular = |lambda: f64| cells.iter().map(|&v| phi.eval(v / lambda)).sum::<f64>() / count;

    let mut hi = sup;
    while modular(hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = 1e-12 * sup;
    while modular(lo) <= 1.0 {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Ok(0.0);
        }
    }
    // invariant: modular(lo) > 1 >= modular(hi)
    while (hi - lo) > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if modular(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Mean oscillation `⨍_B |b - b_B|` for every lattice cube, by [`Lattice::id`].
fn mean_oscillations(b: &GridFunction, lattice: &Lattice) -> Result<Vec<f64>> {
    lattice
        .cubes()
        .map(|c| {
            let mean = b.cube_mean(&c)?;
            let span = c.cells(b.resolution())?;
            let osc: f64 = span.iter().map(|k| (b.values()[k] - mean).abs()).sum();
            Ok(osc * b.cell_width())
        })
        .collect()
}

/// `sup_B ⨍_B |b - b_B|` over the lattice.
pub fn bmo_norm(b: &GridFunction, lattice: &Lattice) -> Result<f64> {
    let osc = mean_oscillations(b, lattice)?;
    Ok(lattice
        .cubes()
        .zip(osc)
        .map(|(c, o)| o / c.measure())
        .fold(0.0, f64::max))
}

/// `sup_B φ(B)^{-1} ∫_B |b - b_B|` with the unweighted mean `b_B`.
pub fn bmo_norm_weighted(b: &GridFunction, phi: &GridFunction, lattice: &Lattice) -> Result<f64> {
    b.ensure_same_grid(phi)?;
    let osc = mean_oscillations(b, lattice)?;
    let mut best: f64 = 0.0;
    for (c, o) in lattice.cubes().zip(osc) {
        let mass = phi.cube_integral(&c)?;
        if mass <= 0.0 {
            return Err(Error::DegenerateWeight(format!("φ({c}) = {mass}")));
        }
        best = best.max(o / mass);
    }
    Ok(best)
}

/// Direct `sup_R ⟨|b - b_R|⟩_{2,R}` over the lattice.
pub fn bmo2_norm(b: &GridFunction, lattice: &Lattice) -> Result<f64> {
    lattice.cubes().try_fold(0.0f64, |best, c| {
        let mean = b.cube_mean(&c)?;
        let span = c.cells(b.resolution())?;
        let s: f64 = span.iter().map(|k| (b.values()[k] - mean).powi(2)).sum();
        Ok(best.max((s * b.cell_width() / c.measure()).sqrt()))
    })
}

/// Fractional BMO norm through Haar coefficients:
/// `sup_R (|R|^{2η-1} Σ_{Q ⊆ R} |⟨b, h_Q⟩|²)^{1/2}`.
///
/// `R` ranges over the lattice; `Q` over every cube of the same grid that
/// the resolution can split (levels `< N`).
pub fn fbmo_norm_haar(b: &GridFunction, lattice: &Lattice, eta: f64) -> Result<f64> {
    let n = b.resolution();
    if lattice.max_level() > n {
        return Err(Error::ResolutionMismatch {
            level: lattice.max_level(),
            shift_bits: lattice.shift().bits(),
            resolution: n,
        });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let full = Lattice::new(n - 1, lattice.shift())?;
    let coeffs = haar_coefficients(b, &full)?;
    // subtree energies, accumulated leaves-up
    let mut energy: Vec<f64> = coeffs.iter().map(|c| c * c).collect();
    for level in (0..n - 1).rev() {
        for j in 0..(1usize << level) {
            let id = (1usize << level) - 1 + j;
            let child = (1usize << (level + 1)) - 1 + 2 * j;
            energy[id] += energy[child] + energy[child + 1];
        }
    }
    let mut best: f64 = 0.0;
    for c in lattice.cubes() {
        if c.level >= n {
            continue;
        }
        let e = energy[full.id(&c)];
        best = best.max((c.measure().powf(2.0 * eta - 1.0) * e).sqrt());
    }
    Ok(best)
}
