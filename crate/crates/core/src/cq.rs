//! Classical-quantum and classical-classical-quantum states on grids.
//!
//! A [`CqState`] pairs a [`GridDensity`] `p(x)` with one density matrix
//! `rho(x)` per grid node. A [`CcqState`] is the same object on a
//! two-axis grid whose axes are read as `(X, Y)`.
//!
//! Most transforms (marginals, the law of `X + Y`, heat evolution) are linear
//! in the weighted operators `sigma(x) = p(x) rho(x)`. They are computed on
//! `sigma` and split back into `(p, rho)` by [`CqState::from_weighted`].
//! Nodes whose mass falls below [`ZERO_MASS`] carry a flagged maximally mixed
//! state and contribute nothing to any integral.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{state_map, StateFamilySpec};
use crate::grid::{Axis, DensitySpec, Grid, GridDensity};
use crate::quantum::{
    hermitian_eigenvalues, spectrum_entropy, validate, BlockStructure, DensityMatrix, StateField,
};

/// Mass below which a node's conditional state is undefined.
pub const ZERO_MASS: f64 = 1e-300;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// State of `(X, M)`: a density over `X` and the map `x -> rho(x)`.
#[derive(Clone, Debug)]
pub struct CqState {
    density: GridDensity,
    states: StateField,
    zero_mass: Vec<bool>,
    spectra: OnceLock<Vec<f64>>,
}

impl CqState {
    pub fn new(density: GridDensity, states: Vec<DensityMatrix>) -> Result<Self> {
        if states.len() != density.grid().len() {
            return Err(Error::DimensionMismatch(format!(
                "{} grid points but {} states",
                density.grid().len(),
                states.len()
            )));
        }
        let dim = states.first().map(DensityMatrix::dim).unwrap_or(1);
        let mut field = StateField::zeros(dim, states.len());
        for (i, s) in states.iter().enumerate() {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "state {i} has dimension {}, expected {dim}",
                    s.dim()
                )));
            }
            field.set(i, s);
        }
        Ok(Self::assemble(density, field))
    }

    /// Build from a map over grid coordinates.
    pub fn from_fn<F>(density: GridDensity, dim: usize, map: F) -> Result<Self>
    where
        F: Fn([f64; 2]) -> Result<DensityMatrix>,
    {
        let grid = density.grid().clone();
        let mut field = StateField::zeros(dim, grid.len());
        for i in 0..grid.len() {
            let rho = map(grid.point(i))?;
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "map returned dimension {}, expected {dim}",
                    rho.dim()
                )));
            }
            field.set(i, &rho);
        }
        Ok(Self::assemble(density, field))
    }

    /// One-dimensional `X` with a declared state family.
    pub fn from_family(density: GridDensity, family: &StateFamilySpec) -> Result<Self> {
        if density.grid().dim() != 1 {
            return Err(Error::DimensionMismatch("state families act on one axis".into()));
        }
        let map = state_map(family, density.grid().axis(0))?;
        Ok(Self::assemble(density, map.states))
    }

    /// `M` trivial (`d = 1`).
    pub fn trivial(density: GridDensity) -> Self {
        let n = density.grid().len();
        let field = StateField::from_raw(1, vec![Complex64::new(1.0, 0.0); n]);
        Self::assemble(density, field)
    }

    fn assemble(density: GridDensity, states: StateField) -> Self {
        let dim = states.dim();
        let mut states = states;
        let mut zero_mass = vec![false; density.values().len()];
        let mixed = DensityMatrix::maximally_mixed(dim);
        for (i, &p) in density.values().iter().enumerate() {
            if p < ZERO_MASS {
                zero_mass[i] = true;
                states.set(i, &mixed);
            }
        }
        CqState {
            density,
            states,
            zero_mass,
            spectra: OnceLock::new(),
        }
    }

    /// Split weighted operators `sigma(x) = p(x) rho(x)` into a state.
    pub(crate) fn from_weighted(grid: Grid, dim: usize, weighted: Vec<Complex64>) -> Result<Self> {
        let n = grid.len();
        let mut field = StateField::from_raw(dim, weighted);
        let mut values = vec![0.0; n];
        let mut zero_mass = vec![false; n];
        let mixed = DensityMatrix::maximally_mixed(dim);
        for i in 0..n {
            let op = field.get_mut(i);
            let p: f64 = (0..dim).map(|k| op[k * dim + k].re).sum();
            if !(p >= ZERO_MASS) {
                zero_mass[i] = true;
                op.copy_from_slice(mixed.as_slice());
                continue;
            }
            values[i] = p;
            let inv = 1.0 / p;
            for c in 0..dim {
                for r in c..dim {
                    let a = op[c * dim + r];
                    let b = op[r * dim + c];
                    let v = 0.5 * (a + b.conj()) * inv;
                    op[c * dim + r] = v;
                    op[r * dim + c] = v.conj();
                }
            }
        }
        let density = GridDensity::from_unnormalized(grid, values)?;
        Ok(CqState {
            density,
            states: field,
            zero_mass,
            spectra: OnceLock::new(),
        })
    }

    pub fn density(&self) -> &GridDensity {
        &self.density
    }

    pub fn grid(&self) -> &Grid {
        self.density.grid()
    }

    pub fn dim(&self) -> usize {
        self.states.dim()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> DensityMatrix {
        self.states.density_matrix(i)
    }

    pub fn states(&self) -> &StateField {
        &self.states
    }

    /// Nodes carrying the placeholder state because their mass is zero.
    pub fn zero_mass_flags(&self) -> &[bool] {
        &self.zero_mass
    }

    /// Eigenvalues of every `rho(x)`, `dim` per node.
    pub(crate) fn spectra(&self) -> &[f64] {
        self.spectra.get_or_init(|| {
            let d = self.dim();
            let mut out = vec![0.0; self.len() * d];
            for i in 0..self.len() {
                hermitian_eigenvalues(self.states.get(i), d, &mut out[i * d..(i + 1) * d]);
            }
            out
        })
    }

    /// `S(rho(x))` at every node.
    pub fn pointwise_entropies(&self) -> Vec<f64> {
        let d = self.dim();
        self.spectra().chunks(d).map(spectrum_entropy).collect()
    }

    /// `p(x) rho(x)` for every node.
    pub(crate) fn weighted_field(&self) -> Vec<Complex64> {
        let s = self.dim() * self.dim();
        let mut out = self.states.raw().to_vec();
        for (i, &p) in self.density.values().iter().enumerate() {
            let p = if self.zero_mass[i] { 0.0 } else { p };
            out[i * s..(i + 1) * s].iter_mut().for_each(|c| *c *= p);
        }
        out
    }

    /// `sum_x p(x) rho(x) h^n`, not revalidated.
    pub(crate) fn average_operator(&self) -> Vec<Complex64> {
        let s = self.dim() * self.dim();
        let vol = self.grid().cell_volume();
        let mut acc = vec![ZERO; s];
        for (i, &p) in self.density.values().iter().enumerate() {
            if self.zero_mass[i] {
                continue;
            }
            let w = p * vol;
            for (a, b) in acc.iter_mut().zip(self.states.get(i)) {
                *a += b * w;
            }
        }
        acc
    }

    /// Every other node per axis, renormalized; used for grid-refinement error bars.
    pub fn halved(&self) -> CqState {
        let idx = self.grid().halved_indices();
        let d = self.dim();
        let mut field = StateField::zeros(d, idx.len());
        for (k, &i) in idx.iter().enumerate() {
            field.get_mut(k).copy_from_slice(self.states.get(i));
        }
        let density = self.density.halved();
        Self::assemble(density, field)
    }
}

/// State of `(X, Y, M)` on a two-axis grid.
#[derive(Clone, Debug)]
pub struct CcqState {
    inner: CqState,
}

impl CcqState {
    pub fn new(joint: GridDensity, states: Vec<DensityMatrix>) -> Result<Self> {
        Self::wrap(CqState::new(joint, states)?)
    }

    pub(crate) fn wrap(inner: CqState) -> Result<Self> {
        if inner.grid().dim() != 2 {
            return Err(Error::DimensionMismatch(
                "a ccq state needs a two-axis (x, y) grid".into(),
            ));
        }
        Ok(CcqState { inner })
    }

    /// The joint state viewed as a cq state of the pair `(X, Y)`.
    pub fn as_cq(&self) -> &CqState {
        &self.inner
    }

    pub fn joint(&self) -> &GridDensity {
        self.inner.density()
    }

    pub fn grid(&self) -> &Grid {
        self.inner.grid()
    }

    pub fn x_axis(&self) -> &Axis {
        self.grid().axis(0)
    }

    pub fn y_axis(&self) -> &Axis {
        self.grid().axis(1)
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn state(&self, i: usize, j: usize) -> DensityMatrix {
        self.inner.state(i * self.y_axis().points + j)
    }

    pub fn halved(&self) -> CcqState {
        CcqState {
            inner: self.inner.halved(),
        }
    }
}

/// Build a ccq state from a joint density and a map `(x, y) -> rho(x, y)`.
pub fn make_ccq<F>(joint: GridDensity, dim: usize, map: F) -> Result<CcqState>
where
    F: Fn(f64, f64) -> Result<DensityMatrix>,
{
    if joint.grid().dim() != 2 {
        return Err(Error::DimensionMismatch("joint density must live on a 2-axis grid".into()));
    }
    CcqState::wrap(CqState::from_fn(joint, dim, |p| map(p[0], p[1]))?)
}

fn marginal(s: &CcqState, keep: usize) -> Result<CqState> {
    let grid = s.grid();
    let (nx, ny) = (grid.axis(0).points, grid.axis(1).points);
    let d = s.dim();
    let sz = d * d;
    let h_other = grid.axis(1 - keep).spacing();
    let n_keep = if keep == 0 { nx } else { ny };
    let mut out = vec![ZERO; n_keep * sz];
    let inner = s.as_cq();
    for i in 0..nx {
        for j in 0..ny {
            let idx = i * ny + j;
            if inner.zero_mass[idx] {
                continue;
            }
            let w = inner.density.values()[idx] * h_other;
            let k = if keep == 0 { i } else { j };
            let dst = &mut out[k * sz..(k + 1) * sz];
            for (a, b) in dst.iter_mut().zip(inner.states.get(idx)) {
                *a += b * w;
            }
        }
    }
    CqState::from_weighted(Grid::one(grid.axis(keep).clone()), d, out)
}

/// Marginal cq state of `(X, M)`.
pub fn marginal_x(s: &CcqState) -> Result<CqState> {
    marginal(s, 0)
}

/// Marginal cq state of `(Y, M)`.
pub fn marginal_y(s: &CcqState) -> Result<CqState> {
    marginal(s, 1)
}

/// Linearly resample the `y` axis of `s` onto spacing `h`.
fn resample_y(s: &CcqState, h: f64) -> Result<CcqState> {
    let y = s.y_axis();
    let points = ((y.hi - y.lo) / h).floor() as usize + 1;
    let new_y = Axis::from_spacing(y.lo, h, points);
    let nx = s.x_axis().points;
    let ny = y.points;
    let d = s.dim();
    let sz = d * d;
    let weighted = s.as_cq().weighted_field();
    let hy = y.spacing();
    let mut out = vec![ZERO; nx * points * sz];
    for j in 0..points {
        let pos = (new_y.coord(j) - y.lo) / hy;
        let j0 = (pos.floor() as usize).min(ny - 1);
        let j1 = (j0 + 1).min(ny - 1);
        let f = (pos - j0 as f64).clamp(0.0, 1.0);
        for i in 0..nx {
            let dst = &mut out[(i * points + j) * sz..(i * points + j + 1) * sz];
            let a = &weighted[(i * ny + j0) * sz..(i * ny + j0 + 1) * sz];
            let b = &weighted[(i * ny + j1) * sz..(i * ny + j1 + 1) * sz];
            for k in 0..sz {
                dst[k] = a[k] * (1.0 - f) + b[k] * f;
            }
        }
    }
    let grid = Grid::two(s.x_axis().clone(), new_y);
    CcqState::wrap(CqState::from_weighted(grid, d, out)?)
}

/// Law of `X + Y` together with the conditional states `rho_S(s)`.
///
/// If the two axes have different spacings, `Y` is first resampled onto the
/// spacing of `X`.
pub fn sum_pushforward(s: &CcqState) -> Result<CqState> {
    let hx = s.x_axis().spacing();
    let hy = s.y_axis().spacing();
    let resampled;
    let s = if (hx - hy).abs() > 1e-9 * hx {
        if s.y_axis().hi - s.y_axis().lo < hx {
            return Err(Error::IncompatibleGrids(format!(
                "y range is narrower than the x spacing {hx}"
            )));
        }
        resampled = resample_y(s, hx)?;
        &resampled
    } else {
        s
    };
    let (x, y) = (s.x_axis(), s.y_axis());
    let (nx, ny) = (x.points, y.points);
    let h = x.spacing();
    let d = s.dim();
    let sz = d * d;
    let ns = nx + ny - 1;
    let axis = Axis::from_spacing(x.lo + y.lo, h, ns);
    let inner = s.as_cq();
    let mut out = vec![ZERO; ns * sz];
    for i in 0..nx {
        for j in 0..ny {
            let idx = i * ny + j;
            if inner.zero_mass[idx] {
                continue;
            }
            let w = inner.density.values()[idx] * h;
            let dst = &mut out[(i + j) * sz..(i + j + 1) * sz];
            for (a, b) in dst.iter_mut().zip(inner.states.get(idx)) {
                *a += b * w;
            }
        }
    }
    CqState::from_weighted(Grid::one(axis), d, out)
}

/// The average state `rho = integral rho(x) p(x) dx`.
pub fn average_state(s: &CqState) -> Result<DensityMatrix> {
    let d = s.dim();
    let m = nalgebra::DMatrix::from_column_slice(d, d, &s.average_operator());
    validate(m)
}

/// Diagonal embedding of a classical `M` with table `q[m][i] = q(m | x_i)`.
pub fn embed_classical(q: &[Vec<f64>], p: &GridDensity) -> Result<CqState> {
    let n = p.grid().len();
    if q.is_empty() || q.iter().any(|row| row.len() != n) {
        return Err(Error::NotAProbabilityTable(format!(
            "expected rows of length {n} (one column per grid point)"
        )));
    }
    let d = q.len();
    let mut field = StateField::zeros(d, n);
    for i in 0..n {
        let col: Vec<f64> = q.iter().map(|row| row[i]).collect();
        let total: f64 = col.iter().sum();
        if col.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::NotAProbabilityTable(format!(
                "column {i} sums to {total} or has a negative entry"
            )));
        }
        let op = field.get_mut(i);
        for (k, v) in col.into_iter().enumerate() {
            op[k * d + k] = Complex64::new(v / total, 0.0);
        }
    }
    Ok(CqState::assemble(p.clone(), field))
}

/// One block of a structured conditionally independent state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiBlock {
    pub weight: f64,
    pub density_x: DensitySpec,
    pub density_y: DensitySpec,
    pub family_x: StateFamilySpec,
    pub family_y: StateFamilySpec,
}

/// `rho(x, y) = (+)_i r(i) p(x|i) p(y|i) rho_i^X(x) (x) rho_i^Y(y) / p(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuredCiState {
    pub blocks: Vec<CiBlock>,
}

impl StructuredCiState {
    pub fn new(blocks: Vec<CiBlock>) -> Result<Self> {
        let s = StructuredCiState { blocks };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::DimensionMismatch("no blocks".into()));
        }
        let total: f64 = self.blocks.iter().map(|b| b.weight).sum();
        if self.blocks.iter().any(|b| !(b.weight >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameters(format!(
                "block weights must form a probability vector (sum {total})"
            )));
        }
        for b in &self.blocks {
            b.family_x.check()?;
            b.family_y.check()?;
        }
        Ok(())
    }

    pub fn structure(&self) -> BlockStructure {
        BlockStructure::new(
            self.blocks
                .iter()
                .map(|b| (b.family_x.dim(), b.family_y.dim()))
                .collect(),
        )
        .expect("family dimensions are positive")
    }

    pub fn dim(&self) -> usize {
        self.structure().dim()
    }

    /// Assemble the block-diagonal state on the product grid `x` by `y`.
    pub fn realize(&self, x: &Axis, y: &Axis) -> Result<CcqState> {
        self.check()?;
        let structure = self.structure();
        let d = structure.dim();
        let sz = d * d;
        let (nx, ny) = (x.points, y.points);
        let mut out = vec![ZERO; nx * ny * sz];
        for (bi, block) in self.blocks.iter().enumerate() {
            let px = block.density_x.build(x)?;
            let py = block.density_y.build(y)?;
            let ax = state_map(&block.family_x, x)?.states;
            let ay = state_map(&block.family_y, y)?.states;
            let (dx, dy) = structure.blocks()[bi];
            if ax.dim() != dx || ay.dim() != dy {
                return Err(Error::DimensionMismatch(format!("block {bi} map dimensions")));
            }
            let off = structure.offset(bi);
            for i in 0..nx {
                let wx = block.weight * px.values()[i];
                if wx == 0.0 {
                    continue;
                }
                let a = ax.get(i);
                for j in 0..ny {
                    let w = wx * py.values()[j];
                    if w == 0.0 {
                        continue;
                    }
                    let dst = &mut out[(i * ny + j) * sz..(i * ny + j + 1) * sz];
                    kron_into(a, dx, ay.get(j), dy, w, dst, d, off);
                }
            }
        }
        CcqState::wrap(CqState::from_weighted(Grid::two(x.clone(), y.clone()), d, out)?)
    }
}

/// `out[off.., off..] += w * (a (x) b)`, all column-major.
#[allow(clippy::too_many_arguments)]
fn kron_into(
    a: &[Complex64],
    da: usize,
    b: &[Complex64],
    db: usize,
    w: f64,
    out: &mut [Complex64],
    d: usize,
    off: usize,
) {
    for ja in 0..da {
        for ia in 0..da {
            let av = a[ja * da + ia] * w;
            if av == ZERO {
                continue;
            }
            for jb in 0..db {
                let col = off + ja * db + jb;
                for ib in 0..db {
                    let row = off + ia * db + ib;
                    out[col * d + row] += av * b[jb * db + ib];
                }
            }
        }
    }
}
