//! Sparse families, the Calderón–Zygmund stopping time that builds them, and
//! the sparse operators and forms with multi-symbols.

use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicCube, Lattice};
use crate::error::{Error, Result};
use crate::gridfn::{avg, GridFunction};

/// Cubes with designated subsets `E_Q ⊆ Q`, stored as grid cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFamily {
    pub delta: f64,
    pub resolution: u32,
    pub cubes: Vec<DyadicCube>,
    #[serde(rename = "exceptional_cells")]
    pub exceptional: Vec<Vec<usize>>,
}

impl SparseFamily {
    pub fn new(delta: f64, resolution: u32, cubes: Vec<DyadicCube>, exceptional: Vec<Vec<usize>>) -> Result<Self> {
        if cubes.len() != exceptional.len() {
            return Err(Error::InvalidParameter(format!(
                "{} cubes but {} exceptional sets",
                cubes.len(),
                exceptional.len()
            )));
        }
        Ok(Self {
            delta,
            resolution,
            cubes,
            exceptional,
        })
    }

    /// Each cube with `E_Q = Q`.
    pub fn full(delta: f64, resolution: u32, cubes: Vec<DyadicCube>) -> Result<Self> {
        let exceptional = cubes
            .iter()
            .map(|c| Ok(c.cells(resolution)?.iter().collect()))
            .collect::<Result<_>>()?;
        Self::new(delta, resolution, cubes, exceptional)
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn cell_width(&self) -> f64 {
        (-(self.resolution as f64)).exp2()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(s)?;
        Self::new(f.delta, f.resolution, f.cubes, f.exceptional)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// The cube cannot be resolved on the family's grid.
    Unresolvable,
    /// A cell of `E_Q` lies outside `Q` or outside the grid.
    NotContained { cell: usize },
    /// A cell of `E_Q` already belongs to an earlier cube's set.
    Overlap { cell: usize, other: usize },
    /// `|E_Q| < δ|Q|`.
    TooSmall { measure: f64, required: f64 },
}

/// Result of [`is_sparse`]; `violation` names the first failing cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityCertificate {
    pub sparse: bool,
    pub cube: Option<usize>,
    pub violation: Option<Violation>,
}

impl SparsityCertificate {
    fn fail(cube: usize, v: Violation) -> Self {
        Self {
            sparse: false,
            cube: Some(cube),
            violation: Some(v),
        }
    }
}

/// Checks `E_Q ⊆ Q`, pairwise disjointness and `|E_Q| >= δ|Q|`, cube by cube.
pub fn is_sparse(family: &SparseFamily) -> SparsityCertificate {
    let n = 1usize << family.resolution;
    let h = family.cell_width();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (qi, (cube, cells)) in family.cubes.iter().zip(&family.exceptional).enumerate() {
        let span = match cube.cells(family.resolution) {
            Ok(s) => s,
            Err(_) => return SparsityCertificate::fail(qi, Violation::Unresolvable),
        };
        let mut count = 0usize;
        for &cell in cells {
            if cell >= n || !span.contains(cell) {
                return SparsityCertificate::fail(qi, Violation::NotContained { cell });
            }
            match owner[cell] {
                Some(other) => return SparsityCertificate::fail(qi, Violation::Overlap { cell, other }),
                None => owner[cell] = Some(qi),
            }
            count += 1;
        }
        let measure = count as f64 * h;
        let required = family.delta * cube.measure();
        if measure < required * (1.0 - 1e-12) {
            return SparsityCertificate::fail(qi, Violation::TooSmall { measure, required });
        }
    }
    SparsityCertificate {
        sparse: true,
        cube: None,
        violation: None,
    }
}

/// One node of the stopping time: the selected mass under a cube against the
/// Markov bound `(1 − δ)|P|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzStep {
    pub cube: DyadicCube,
    pub depth: usize,
    pub selected: usize,
    pub selected_measure: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzTrace {
    pub threshold: f64,
    pub steps: Vec<CzStep>,
}

impl CzTrace {
    pub fn markov_holds(&self) -> bool {
        self.steps
            .iter()
            .all(|s| s.selected_measure <= s.bound * (1.0 + 1e-12))
    }
}

/// The stopping-time threshold `C_0(δ) = (m+1)/(1−δ)`.
pub fn cz_threshold(m: usize, delta: f64) -> f64 {
    (m as f64 + 1.0) / (1.0 - delta)
}

/// Recursive Calderón–Zygmund stopping time below `p0`.
///
/// At each stopping cube `P` the children of the family are the maximal
/// `P' ⊊ P` with `Σ_i ⟨f_i⟩_{P'}/⟨f_i⟩_P + ⟨g⟩_{P'}/⟨g⟩_P > C_0(δ)`; slots
/// with `⟨·⟩_P = 0` are dropped. `E_P` is `P` minus the selected cubes.
pub fn build_sparse_cz(
    fs: &[GridFunction],
    g: &GridFunction,
    p0: &DyadicCube,
    delta: f64,
) -> Result<(SparseFamily, CzTrace)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("sparsity δ = {delta} must lie in (0,1)")));
    }
    let n = g.resolution();
    for f in fs {
        g.ensure_same_grid(f)?;
        f.check_nonnegative()?;
    }
    g.check_nonnegative()?;
    let lattice = Lattice::new(n, p0.shift)?;
    if p0.level > n {
        return Err(Error::ResolutionMismatch {
            level: p0.level,
            shift_bits: p0.shift.bits(),
            resolution: n,
        });
    }
    let integrals: Vec<Vec<f64>> = fs
        .iter()
        .chain(std::iter::once(g))
        .map(|f| f.cube_integrals(&lattice))
        .collect::<Result<_>>()?;
    let threshold = cz_threshold(fs.len(), delta);

    let mut cubes = Vec::new();
    let mut exceptional = Vec::new();
    let mut steps = Vec::new();
    let mut stack = vec![(*p0, 0usize)];
    while let Some((top, depth)) = stack.pop() {
        let top_id = lattice.id(&top);
        let active: Vec<(usize, f64)> = integrals
            .iter()
            .enumerate()
            .filter(|&(_i, s)| s[top_id] > 0.0).map(|(i, s)| (i, s[top_id] / top.measure()))
            .collect();
        let mut selected = Vec::new();
        if !active.is_empty() {
            let mut frontier = top.children().to_vec();
            while let Some(c) = frontier.pop() {
                if c.level > n {
                    continue;
                }
                let id = lattice.id(&c);
                let ratio: f64 = active
                    .iter()
                    .map(|&(i, mean)| integrals[i][id] / c.measure() / mean)
                    .sum();
                if ratio > threshold {
                    selected.push(c);
                } else if c.level < n {
                    frontier.extend(c.children().iter().rev());
                }
            }
        }
        selected.sort_by_key(|c| c.index);
        let span = top.cells(n)?;
        let mut inside = vec![false; span.len];
        for c in &selected {
            for cell in c.cells(n)?.iter() {
                inside[(cell + (1usize << n) - span.start) % (1usize << n)] = true;
            }
        }
        let mut e: Vec<usize> = span
            .iter()
            .enumerate()
            .filter(|(k, _)| !inside[*k])
            .map(|(_, cell)| cell)
            .collect();
        e.sort_unstable();
        steps.push(CzStep {
            cube: top,
            depth,
            selected: selected.len(),
            selected_measure: selected.iter().map(DyadicCube::measure).sum(),
            bound: (1.0 - delta) * top.measure(),
        });
        cubes.push(top);
        exceptional.push(e);
        for c in selected.into_iter().rev() {
            stack.push((c, depth + 1));
        }
    }
    Ok((
        SparseFamily::new(delta, n, cubes, exceptional)?,
        CzTrace { threshold, steps },
    ))
}

/// Multi-symbol `b⃗` with orders `0 <= t⃗ <= k⃗`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolData {
    pub b: Vec<GridFunction>,
    pub k: Vec<u32>,
    pub t: Vec<u32>,
}

impl SymbolData {
    pub fn new(b: Vec<GridFunction>, k: Vec<u32>, t: Vec<u32>) -> Result<Self> {
        if b.len() != k.len() || k.len() != t.len() {
            return Err(Error::InvalidParameter(format!(
                "symbol lengths differ: {} b, {} k, {} t",
                b.len(),
                k.len(),
                t.len()
            )));
        }
        if let Some(i) = (0..k.len()).find(|&i| t[i] > k[i]) {
            return Err(Error::InvalidParameter(format!("t_{} = {} exceeds k_{} = {}", i + 1, t[i], i + 1, k[i])));
        }
        Ok(Self { b, k, t })
    }

    /// `k⃗ = t⃗ = 0`.
    pub fn trivial(m: usize, resolution: u32) -> Self {
        Self {
            b: vec![GridFunction::zeros(resolution); m],
            k: vec![0; m],
            t: vec![0; m],
        }
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }
}

fn check_sparse_inputs(family: &SparseFamily, sym: &SymbolData, fs: &[GridFunction], r: &[f64]) -> Result<()> {
    if fs.len() != sym.m() || r.len() != fs.len() {
        return Err(Error::InvalidParameter(format!(
            "{} inputs, {} symbols, {} exponents",
            fs.len(),
            sym.m(),
            r.len()
        )));
    }
    for f in fs.iter().chain(&sym.b) {
        if f.resolution() != family.resolution {
            return Err(Error::GridMismatch(family.resolution, f.resolution()));
        }
    }
    Ok(())
}

/// `|B|^η Π_i ⟨|f_i (b_i − b_{i,B})^{t_i}|⟩_{r_i,B}` and the means `b_{i,B}`.
fn cube_term(cube: &DyadicCube, sym: &SymbolData, fs: &[GridFunction], r: &[f64], eta: f64) -> Result<(f64, Vec<f64>)> {
    let mut term = cube.measure().powf(eta);
    let mut means = Vec::with_capacity(fs.len());
    for (i, f) in fs.iter().enumerate() {
        let mean = if sym.k[i] > 0 { sym.b[i].cube_mean(cube)? } else { 0.0 };
        let a = if sym.t[i] == 0 {
            avg(f, cube, r[i], 0.0)?
        } else {
            let t = sym.t[i] as i32;
            let twisted = f.zip_with(&sym.b[i], |v, b| v * (b - mean).powi(t))?;
            avg(&twisted, cube, r[i], 0.0)?
        };
        term *= a;
        means.push(mean);
    }
    Ok((term, means))
}

fn symbol_factor(sym: &SymbolData, means: &[f64], cell: usize) -> f64 {
    (0..sym.m())
        .map(|i| (sym.b[i].values()[cell] - means[i]).abs().powi((sym.k[i] - sym.t[i]) as i32))
        .product()
}

/// `Σ_{B ∈ S} |B|^η Π_i |b_i(x) − b_{i,B}|^{k_i−t_i} ⟨|f_i (b_i − b_{i,B})^{t_i}|⟩_{r_i,B} χ_B(x)`.
pub fn sparse_operator(
    family: &SparseFamily,
    sym: &SymbolData,
    fs: &[GridFunction],
    r: &[f64],
    eta: f64,
    x: f64,
) -> Result<f64> {
    check_sparse_inputs(family, sym, fs, r)?;
    if !(0.0..1.0).contains(&x) {
        return Err(Error::PointOutOfDomain(x));
    }
    let cell = ((x * (1usize << family.resolution) as f64) as usize).min((1usize << family.resolution) - 1);
    let mut total = 0.0;
    for cube in &family.cubes {
        if !cube.contains_point(x) {
            continue;
        }
        let (term, means) = cube_term(cube, sym, fs, r, eta)?;
        total += term * symbol_factor(sym, &means, cell);
    }
    Ok(total)
}

/// [`sparse_operator`] at every grid cell.
pub fn sparse_operator_grid(
    family: &SparseFamily,
    sym: &SymbolData,
    fs: &[GridFunction],
    r: &[f64],
    eta: f64,
) -> Result<GridFunction> {
    check_sparse_inputs(family, sym, fs, r)?;
    let mut out = vec![0.0; 1usize << family.resolution];
    let plain = sym.k.iter().all(|k| *k == 0);
    for cube in &family.cubes {
        let (term, means) = cube_term(cube, sym, fs, r, eta)?;
        if term == 0.0 {
            continue;
        }
        for cell in cube.cells(family.resolution)?.iter() {
            out[cell] += if plain { term } else { term * symbol_factor(sym, &means, cell) };
        }
    }
    GridFunction::new(family.resolution, out)
}

/// `Σ_B |B|^{η+1} Π_i ⟨|f_i (b_i − b_{i,B})^{t_i}|⟩_{r_i,B} ⟨(Π_i |b_i − b_{i,B}|^{k_i−t_i}) ψ⟩_{s′,B}`.
#[allow(clippy::too_many_arguments)]
pub fn sparse_form(
    family: &SparseFamily,
    sym: &SymbolData,
    fs: &[GridFunction],
    psi: &GridFunction,
    r: &[f64],
    sprime: f64,
    eta: f64,
) -> Result<f64> {
    check_sparse_inputs(family, sym, fs, r)?;
    if psi.resolution() != family.resolution {
        return Err(Error::GridMismatch(family.resolution, psi.resolution()));
    }
    if !(sprime >= 1.0) {
        return Err(Error::InvalidParameter(format!("s′ = {sprime} must be >= 1")));
    }
    let mut total = 0.0;
    for cube in &family.cubes {
        let (term, means) = cube_term(cube, sym, fs, r, eta)?;
        if term == 0.0 {
            continue;
        }
        let dual = if sym.k.iter().zip(&sym.t).all(|(k, t)| k == t) {
            avg(psi, cube, sprime, 0.0)?
        } else {
            let span = cube.cells(family.resolution)?;
            let vals: Vec<f64> = (0..psi.len())
                .map(|cell| {
                    if span.contains(cell) {
                        symbol_factor(sym, &means, cell) * psi.values()[cell]
                    } else {
                        0.0
                    }
                })
                .collect();
            let weighted = GridFunction::new(psi.resolution(), vals)?;
            avg(&weighted, cube, sprime, 0.0)?
        };
        total += cube.measure() * term * dual;
    }
    Ok(total)
}
