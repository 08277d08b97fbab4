//! Dyadic lattices on the circle `[0,1)`, Haar functions and martingale
//! differences.
//!
//! A lattice is the family of intervals `[j 2^-k, (j+1) 2^-k) + ω` reduced
//! modulo 1, for `0 <= k <= L`. The shift `ω` is a dyadic rational so that
//! every cube of the lattice is a union of grid cells once the grid is fine
//! enough. Cube relations (nesting, parents, children) are computed in
//! grid-local coordinates, where they coincide with the standard grid.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridfn::GridFunction;

/// Deepest lattice that [`Lattice::new`] accepts.
pub const MAX_LATTICE_LEVEL: u32 = 24;

/// A dyadic rational `num / 2^bits` in `[0,1)`, stored in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GridShift {
    num: u64,
    bits: u32,
}

impl GridShift {
    pub const ZERO: GridShift = GridShift { num: 0, bits: 0 };

    pub fn new(num: u64, bits: u32) -> Result<Self> {
        if bits > 62 || num >= (1u64 << bits) && !(num == 0 && bits == 0) {
            return Err(Error::InvalidParameter(format!(
                "shift {num}/2^{bits} is not in [0,1)"
            )));
        }
        Ok(Self::normalized(num, bits))
    }

    fn normalized(mut num: u64, mut bits: u32) -> Self {
        if num == 0 {
            return Self::ZERO;
        }
        while num.is_multiple_of(2) {
            num /= 2;
            bits -= 1;
        }
        Self { num, bits }
    }

    /// Converts `x` to a dyadic rational with denominator at most `2^max_bits`.
    pub fn from_f64(x: f64, max_bits: u32) -> Result<Self> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::ShiftNotDyadic(x, max_bits));
        }
        let scaled = x * (1u64 << max_bits) as f64;
        if scaled.fract() != 0.0 {
            return Err(Error::ShiftNotDyadic(x, max_bits));
        }
        Ok(Self::normalized(scaled as u64, max_bits))
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    /// Base-2 logarithm of the reduced denominator.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / (1u64 << self.bits) as f64
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }
}

impl Serialize for GridShift {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for GridShift {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        GridShift::from_f64(x, 52).map_err(serde::de::Error::custom)
    }
}

/// Left or right child of a cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A dyadic interval of a (possibly shifted) lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: u32,
    pub index: u64,
    #[serde(default)]
    pub shift: GridShift,
}

impl DyadicCube {
    pub fn new(level: u32, index: u64, shift: GridShift) -> Result<Self> {
        if level > MAX_LATTICE_LEVEL {
            return Err(Error::LevelOutOfRange {
                level,
                max: MAX_LATTICE_LEVEL,
            });
        }
        if index >= 1u64 << level {
            return Err(Error::InvalidParameter(format!(
                "cube index {index} out of range for level {level}"
            )));
        }
        Ok(Self {
            level,
            index,
            shift,
        })
    }

    /// Standard (unshifted) cube `[j 2^-k, (j+1) 2^-k)`.
    pub fn standard(level: u32, index: u64) -> Self {
        debug_assert!(index < 1u64 << level);
        Self {
            level,
            index,
            shift: GridShift::ZERO,
        }
    }

    pub fn root(shift: GridShift) -> Self {
        Self {
            level: 0,
            index: 0,
            shift,
        }
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Lebesgue measure, identical to [`side`](Self::side) in one dimension.
    pub fn measure(&self) -> f64 {
        self.side()
    }

    /// Left endpoint in grid-local coordinates (shift removed).
    pub fn local_start(&self) -> f64 {
        self.index as f64 * self.side()
    }

    /// Left endpoint on `[0,1)`; the cube wraps past 1 when
    /// `start + side > 1`.
    pub fn start(&self) -> f64 {
        let s = self.local_start() + self.shift.value();
        if s >= 1.0 {
            s - 1.0
        } else {
            s
        }
    }

    pub fn wraps(&self) -> bool {
        self.start() + self.side() > 1.0
    }

    pub fn is_root(&self) -> bool {
        self.level == 0
    }

    /// Parent cube; the root is its own parent.
    pub fn parent(&self) -> Self {
        if self.level == 0 {
            return *self;
        }
        Self {
            level: self.level - 1,
            index: self.index >> 1,
            shift: self.shift,
        }
    }

    pub fn child(&self, side: Side) -> Self {
        let bit = match side {
            Side::Left => 0,
            Side::Right => 1,
        };
        Self {
            level: self.level + 1,
            index: (self.index << 1) | bit,
            shift: self.shift,
        }
    }

    pub fn children(&self) -> [Self; 2] {
        [self.child(Side::Left), self.child(Side::Right)]
    }

    /// Ancestor at `level` (which must not exceed `self.level`).
    pub fn ancestor_at(&self, level: u32) -> Self {
        debug_assert!(level <= self.level);
        Self {
            level,
            index: self.index >> (self.level - level),
            shift: self.shift,
        }
    }

    /// Whether `other` is contained in `self`. Cubes of different grids are
    /// never compared.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        self.shift == other.shift
            && other.level >= self.level
            && other.index >> (other.level - self.level) == self.index
    }

    pub fn is_disjoint(&self, other: &DyadicCube) -> bool {
        !(self.contains(other) || other.contains(self))
    }

    /// Grid-local coordinate of `x`.
    fn local(&self, x: f64) -> f64 {
        let t = x - self.shift.value();
        if t < 0.0 {
            t + 1.0
        } else {
            t
        }
    }

    pub fn contains_point(&self, x: f64) -> bool {
        if !(0.0..1.0).contains(&x) {
            return false;
        }
        let t = self.local(x);
        ((t * (1u64 << self.level) as f64).floor() as u64) == self.index
    }

    /// Which child contains `x`, if `x` lies in the cube.
    pub fn side_of(&self, x: f64) -> Option<Side> {
        if !self.contains_point(x) {
            return None;
        }
        let t = self.local(x) * (1u64 << (self.level + 1)) as f64;
        if (t.floor() as u64) & 1 == 0 {
            Some(Side::Left)
        } else {
            Some(Side::Right)
        }
    }

    /// Cells of a grid of resolution `n_bits` covered by this cube.
    pub fn cells(&self, resolution: u32) -> Result<CellSpan> {
        if self.level > resolution || self.shift.bits > resolution {
            return Err(Error::ResolutionMismatch {
                level: self.level,
                shift_bits: self.shift.bits,
                resolution,
            });
        }
        let n = 1usize << resolution;
        let len = 1usize << (resolution - self.level);
        let offset = (self.shift.num as usize) << (resolution - self.shift.bits);
        let start = ((self.index as usize) * len + offset) % n;
        Ok(CellSpan { start, len, n })
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.start();
        let b = a + self.side();
        if b > 1.0 {
            write!(f, "[{a}, 1) u [0, {})", b - 1.0)
        } else {
            write!(f, "[{a}, {b})")
        }
    }
}

/// Contiguous run of cells modulo `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSpan {
    pub start: usize,
    pub len: usize,
    pub n: usize,
}

impl CellSpan {
    /// At most two half-open index ranges covering the span.
    pub fn ranges(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let end = self.start + self.len;
        if end <= self.n {
            (self.start..end, 0..0)
        } else {
            (self.start..self.n, 0..end - self.n)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        let (a, b) = self.ranges();
        a.chain(b)
    }

    pub fn contains(&self, cell: usize) -> bool {
        (cell + self.n - self.start) % self.n < self.len
    }
}

/// All cubes of one grid with level `<= max_level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    max_level: u32,
    shift: GridShift,
}

impl Lattice {
    pub fn new(max_level: u32, shift: GridShift) -> Result<Self> {
        if max_level > MAX_LATTICE_LEVEL {
            return Err(Error::LevelOutOfRange {
                level: max_level,
                max: MAX_LATTICE_LEVEL,
            });
        }
        if shift.bits > max_level {
            return Err(Error::ShiftNotDyadic(shift.value(), max_level));
        }
        Ok(Self { max_level, shift })
    }

    pub fn standard(max_level: u32) -> Result<Self> {
        Self::new(max_level, GridShift::ZERO)
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn shift(&self) -> GridShift {
        self.shift
    }

    pub fn root(&self) -> DyadicCube {
        DyadicCube::root(self.shift)
    }

    /// Number of cubes, `2^(L+1) - 1`.
    pub fn len(&self) -> usize {
        (1usize << (self.max_level + 1)) - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cube(&self, level: u32, index: u64) -> Option<DyadicCube> {
        (level <= self.max_level && index < 1u64 << level).then_some(DyadicCube {
            level,
            index,
            shift: self.shift,
        })
    }

    /// Dense index in level-major, index-minor order.
    pub fn id(&self, cube: &DyadicCube) -> usize {
        (1usize << cube.level) - 1 + cube.index as usize
    }

    pub fn cube_from_id(&self, id: usize) -> DyadicCube {
        let level = usize::BITS - 1 - (id + 1).leading_zeros();
        DyadicCube {
            level,
            index: (id + 1 - (1usize << level)) as u64,
            shift: self.shift,
        }
    }

    pub fn contains(&self, cube: &DyadicCube) -> bool {
        cube.shift == self.shift && cube.level <= self.max_level
    }

    pub fn cubes_at(&self, level: u32) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..(1u64 << level)).map(move |index| DyadicCube {
            level,
            index,
            shift: self.shift,
        })
    }

    /// Every cube, level-major and index-minor.
    pub fn cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..=self.max_level).flat_map(move |k| self.cubes_at(k))
    }

    /// Cubes containing `x`, from the root down to level `max_level`.
    pub fn chain(&self, x: f64) -> Result<Vec<DyadicCube>> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::PointOutOfDomain(x));
        }
        let leaf = self.leaf_containing(x);
        Ok((0..=self.max_level).map(|k| leaf.ancestor_at(k)).collect())
    }

    pub fn leaf_containing(&self, x: f64) -> DyadicCube {
        let mut t = x - self.shift.value();
        if t < 0.0 {
            t += 1.0;
        }
        let scale = (1u64 << self.max_level) as f64;
        let index = ((t * scale).floor() as u64).min((1u64 << self.max_level) - 1);
        DyadicCube {
            level: self.max_level,
            index,
            shift: self.shift,
        }
    }

    /// Cubes of the lattice containing `cube`, root first, `cube` last.
    pub fn ancestors(&self, cube: &DyadicCube) -> Vec<DyadicCube> {
        (0..=cube.level).map(|k| cube.ancestor_at(k)).collect()
    }

    /// Lattice cube containing grid cell `cell` at level `level`.
    pub fn cube_of_cell(&self, cell: usize, resolution: u32, level: u32) -> DyadicCube {
        let n = 1usize << resolution;
        let offset = (self.shift.num as usize) << (resolution - self.shift.bits);
        let local = (cell + n - offset) % n;
        DyadicCube {
            level,
            index: (local >> (resolution - level)) as u64,
            shift: self.shift,
        }
    }
}

/// Builds the lattice of depth `max_level` translated by `shift`.
pub fn build_lattice(max_level: u32, shift: f64) -> Result<Lattice> {
    if max_level > MAX_LATTICE_LEVEL {
        return Err(Error::LevelOutOfRange {
            level: max_level,
            max: MAX_LATTICE_LEVEL,
        });
    }
    let shift = GridShift::from_f64(shift, max_level)?;
    Lattice::new(max_level, shift)
}

/// Haar function of `cube` at `x`: `±|I|^{-1/2}` on the left/right child,
/// or `|I|^{-1/2} χ_I` when `cancellative` is false.
pub fn haar(cube: &DyadicCube, x: f64, cancellative: bool) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::PointOutOfDomain(x));
    }
    let norm = cube.measure().sqrt().recip();
    Ok(match cube.side_of(x) {
        None => 0.0,
        Some(_) if !cancellative => norm,
        Some(Side::Left) => norm,
        Some(Side::Right) => -norm,
    })
}

/// `⟨f, h_I⟩` computed from the integrals over the two children of `cube`.
pub fn haar_coefficient(f: &GridFunction, cube: &DyadicCube) -> Result<f64> {
    let [left, right] = cube.children();
    let a = f.cube_integral(&left)?;
    let b = f.cube_integral(&right)?;
    Ok((a - b) / cube.measure().sqrt())
}

/// Haar coefficients for every lattice cube with level `< resolution`,
/// indexed by [`Lattice::id`]. Built bottom-up from cell sums.
pub fn haar_coefficients(f: &GridFunction, lattice: &Lattice) -> Result<Vec<f64>> {
    let n_bits = f.resolution();
    let depth = lattice.max_level().min(n_bits.saturating_sub(1));
    if n_bits == 0 {
        return Ok(Vec::new());
    }
    if lattice.shift().bits() > n_bits {
        return Err(Error::ResolutionMismatch {
            level: lattice.max_level(),
            shift_bits: lattice.shift().bits(),
            resolution: n_bits,
        });
    }
    // integrals of level-(depth+1) cubes, in local index order
    let fine = depth + 1;
    let mut sums: Vec<f64> = lattice
        .cubes_at(fine)
        .map(|c| f.cube_integral(&c))
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; (1usize << (depth + 1)) - 1];
    for level in (0..=depth).rev() {
        let scale = (level as f64 / 2.0).exp2();
        let mut parents = Vec::with_capacity(sums.len() / 2);
        for (j, pair) in sums.chunks_exact(2).enumerate() {
            out[(1usize << level) - 1 + j] = (pair[0] - pair[1]) * scale;
            parents.push(pair[0] + pair[1]);
        }
        sums = parents;
    }
    Ok(out)
}

/// `Δ_I f = Σ_{I' ∈ ch(I)} (⟨f⟩_{I'} - ⟨f⟩_I) χ_{I'}`.
pub fn martingale_difference(f: &GridFunction, cube: &DyadicCube) -> Result<GridFunction> {
    if f.resolution() < cube.level + 1 {
        return Err(Error::ResolutionMismatch {
            level: cube.level + 1,
            shift_bits: cube.shift.bits(),
            resolution: f.resolution(),
        });
    }
    let mean = f.cube_mean(cube)?;
    let mut values = vec![0.0; f.len()];
    for child in cube.children() {
        let d = f.cube_mean(&child)? - mean;
        for cell in child.cells(f.resolution())?.iter() {
            values[cell] = d;
        }
    }
    GridFunction::new(f.resolution(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Goodness {
    Good,
    Bad,
}

/// Exponent `λ = δ / (2 [n(2-η) + δ])` with `n = 1`.
pub fn goodness_exponent(eta: f64, delta: f64) -> f64 {
    delta / (2.0 * ((2.0 - eta) + delta))
}

/// A cube `I` is bad when some lattice cube `J` with `ℓ(J) >= 2^r ℓ(I)`
/// has `dist(I, ∂J) <= ℓ(I)^λ ℓ(J)^{1-λ}`.
///
/// Distances are measured in grid-local coordinates, so the boundary of the
/// root is the pair `{0, 1}` of the unshifted grid. For each admissible level
/// of `J` only the nearest lattice boundary point matters.
pub fn classify_good_bad(
    cube: &DyadicCube,
    lattice: &Lattice,
    r: u32,
    eta: f64,
    delta: f64,
) -> Goodness {
    if r > cube.level {
        return Goodness::Good;
    }
    let lambda = goodness_exponent(eta, delta);
    let li = cube.side();
    let a = cube.local_start();
    let b = a + li;
    let top = cube.level - r;
    for k in 0..=top.min(lattice.max_level()) {
        let lj = (-(k as f64)).exp2();
        // nearest multiple of ℓ(J) to [a, b]
        let below = (a / lj).floor() * lj;
        let above = (b / lj).ceil() * lj;
        let dist = if below >= a || above <= b {
            0.0
        } else {
            (a - below).min(above - b)
        };
        if dist <= li.powf(lambda) * lj.powf(1.0 - lambda) {
            return Goodness::Bad;
        }
    }
    Goodness::Good
}
