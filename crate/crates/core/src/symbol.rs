//! Matrix symbols `σ_A(x, ξ)`: closed forms, extraction, quantization, differences
//! `Δ₊, Δ₋, Δ₀`, Taylor coordinates and the dual derivatives `∂^(α)`.
//!
//! Difference operators multiply the convolution kernel by
//! `q₊ = t_{+−} = x₂₁`, `q₋ = t_{−+} = x₁₂`, `q₀ = t_{−−} − t_{++} = x₁₁ − x₂₂`.
//! With these, `Δ_η σ_{∂_η} = σ_I` for each `η`.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fourier::{self, CoefficientStack, GridFunction, QuadratureGrid};
use crate::group::GroupElement;
use crate::wigner::{self, HalfInteger, SpinHalfEntry};
use crate::{CMat, Error, Result, C64};

/// Multi-index `(α₁, α₂, α₃)`.
pub type MultiIndex = [u32; 3];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Tolerance for deciding that nodal values are x-independent.
pub const INVARIANCE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Plus,
    Minus,
    Zero,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Plus, Direction::Minus, Direction::Zero];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" => Ok(Direction::Plus),
            "-" | "minus" => Ok(Direction::Minus),
            "0" | "zero" => Ok(Direction::Zero),
            _ => Err(Error::Invalid(format!("unknown direction '{s}' (expected +, - or 0)"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::Plus => "+",
            Direction::Minus => "-",
            Direction::Zero => "0",
        }
    }

    /// The ladder generator `∂_η`.
    pub fn generator(self) -> Generator {
        match self {
            Direction::Plus => Generator::DPlus,
            Direction::Minus => Generator::DMinus,
            Direction::Zero => Generator::D0,
        }
    }
}

/// Left-invariant generators with closed-form symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Generator {
    I,
    DPlus,
    DMinus,
    D0,
    Laplacian,
    A1,
    A2,
    A3,
}

impl Generator {
    pub const ALL: [Generator; 8] = [
        Generator::I,
        Generator::DPlus,
        Generator::DMinus,
        Generator::D0,
        Generator::Laplacian,
        Generator::A1,
        Generator::A2,
        Generator::A3,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "I" => Generator::I,
            "D+" => Generator::DPlus,
            "D-" => Generator::DMinus,
            "D0" => Generator::D0,
            "Laplacian" | "Lap" => Generator::Laplacian,
            "A1" => Generator::A1,
            "A2" => Generator::A2,
            "A3" => Generator::A3,
            _ => {
                return Err(Error::Invalid(format!(
                    "unknown generator '{name}' (known: I, D+, D-, D0, Laplacian, A1, A2, A3)"
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Generator::I => "I",
            Generator::DPlus => "D+",
            Generator::DMinus => "D-",
            Generator::D0 => "D0",
            Generator::Laplacian => "Lap",
            Generator::A1 => "A1",
            Generator::A2 => "A2",
            Generator::A3 => "A3",
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Generator::I => 0,
            Generator::Laplacian => 2,
            _ => 1,
        }
    }

    /// `σ(ξ)` at level `l`; row/column `i` is `m = i − ξ`.
    pub fn block(self, l: HalfInteger) -> CMat {
        let d = l.dim();
        let xi = l.value();
        let mut b = CMat::zeros(d, d);
        match self {
            Generator::I => b.fill_with_identity(),
            Generator::D0 => {
                for i in 0..d {
                    b[(i, i)] = C64::new(i as f64 - xi, 0.0);
                }
            }
            Generator::Laplacian => {
                for i in 0..d {
                    b[(i, i)] = C64::new(-xi * (xi + 1.0), 0.0);
                }
            }
            Generator::DPlus => {
                for j in 0..d.saturating_sub(1) {
                    let n = j as f64 - xi;
                    b[(j + 1, j)] = C64::new(-((xi - n) * (xi + n + 1.0)).sqrt(), 0.0);
                }
            }
            Generator::DMinus => {
                for j in 1..d {
                    let n = j as f64 - xi;
                    b[(j - 1, j)] = C64::new(-((xi + n) * (xi - n + 1.0)).sqrt(), 0.0);
                }
            }
            Generator::A1 => {
                b = (Generator::DPlus.block(l) + Generator::DMinus.block(l)) * C64::new(0.0, -0.5);
            }
            Generator::A2 => {
                b = (Generator::DMinus.block(l) - Generator::DPlus.block(l)) * C64::new(0.5, 0.0);
            }
            Generator::A3 => {
                b = Generator::D0.block(l) * (-I);
            }
        }
        b
    }
}

/// `A₁^{β₁} A₂^{β₂} A₃^{β₃}` acting on coefficients at level `l`.
pub fn derivative_block(beta: MultiIndex, l: HalfInteger) -> CMat {
    let mut m = CMat::identity(l.dim(), l.dim());
    for (k, g) in [Generator::A1, Generator::A2, Generator::A3].iter().enumerate() {
        if beta[k] > 0 {
            let b = g.block(l);
            for _ in 0..beta[k] {
                m = &m * &b;
            }
        }
    }
    m
}

pub fn order(alpha: MultiIndex) -> u32 {
    alpha.iter().sum()
}

pub fn factorial(alpha: MultiIndex) -> f64 {
    alpha.iter().map(|&a| (1..=a).map(f64::from).product::<f64>()).product()
}

/// All `α` with `|α| ≤ n`, graded, lexicographically decreasing within a degree.
pub fn multi_indices(n: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for deg in 0..=n {
        for a1 in (0..=deg).rev() {
            for a2 in (0..=deg - a1).rev() {
                out.push([a1, a2, deg - a1 - a2]);
            }
        }
    }
    out
}

/// Fourier coefficients of the entry functions `x ↦ σ(x, l)_{ij}`.
#[derive(Clone, Debug)]
pub struct Mirror {
    band: HalfInteger,
    /// `[2l][i·d + j]`.
    entries: Vec<Vec<CoefficientStack>>,
}

impl Mirror {
    pub fn band(&self) -> HalfInteger {
        self.band
    }

    pub fn entry(&self, l: HalfInteger, i: usize, j: usize) -> &CoefficientStack {
        &self.entries[l.twice as usize][i * l.dim() + j]
    }

    /// `σ(x, ·)` from the mirror.
    pub fn evaluate(&self, x: &GroupElement) -> Vec<CMat> {
        let ts = wigner::wigner_upto(self.band, x);
        self.entries
            .iter()
            .enumerate()
            .map(|(l2, ent)| {
                let d = l2 + 1;
                CMat::from_fn(d, d, |i, j| {
                    let c = &ent[i * d + j];
                    c.band()
                        .levels()
                        .map(|k| (&ts[k.twice as usize] * c.block(k)).trace() * k.dim() as f64)
                        .sum()
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct VaryingData {
    grid: Arc<QuadratureGrid>,
    /// `[node][2l]`.
    nodal: Vec<Vec<CMat>>,
    mirror: OnceLock<Arc<Mirror>>,
}

#[derive(Clone, Debug)]
pub enum Layout {
    /// One matrix per level.
    Invariant(Vec<CMat>),
    /// One matrix per node and level, with a spectral mirror built on demand.
    Varying(VaryingData),
}

/// Matrix symbol `σ(x, l)` for `l ≤ band`.
#[derive(Clone, Debug)]
pub struct Symbol {
    band: HalfInteger,
    layout: Layout,
}

fn check_blocks(blocks: &[CMat]) -> Result<()> {
    for (l2, b) in blocks.iter().enumerate() {
        if b.nrows() != l2 + 1 || b.ncols() != l2 + 1 {
            return Err(Error::Band(format!("block {l2} has shape {}x{}", b.nrows(), b.ncols())));
        }
    }
    if blocks.is_empty() {
        return Err(Error::Band("symbol without blocks".into()));
    }
    Ok(())
}

impl Symbol {
    pub fn invariant(blocks: Vec<CMat>) -> Result<Self> {
        check_blocks(&blocks)?;
        Ok(Self { band: HalfInteger::from_twice(blocks.len() as u32 - 1), layout: Layout::Invariant(blocks) })
    }

    pub fn varying(grid: Arc<QuadratureGrid>, nodal: Vec<Vec<CMat>>) -> Result<Self> {
        if nodal.len() != grid.len() {
            return Err(Error::Layout(format!("{} nodal entries for {} nodes", nodal.len(), grid.len())));
        }
        let l2 = nodal.first().map(|b| b.len()).unwrap_or(0);
        for b in &nodal {
            if b.len() != l2 {
                return Err(Error::Layout("nodes carry different band limits".into()));
            }
            check_blocks(b)?;
        }
        Ok(Self {
            band: HalfInteger::from_twice(l2 as u32 - 1),
            layout: Layout::Varying(VaryingData { grid, nodal, mirror: OnceLock::new() }),
        })
    }

    fn varying_with_mirror(grid: Arc<QuadratureGrid>, nodal: Vec<Vec<CMat>>, mirror: Mirror) -> Result<Self> {
        let s = Self::varying(grid, nodal)?;
        if let Layout::Varying(v) = &s.layout {
            let _ = v.mirror.set(Arc::new(mirror));
        }
        Ok(s)
    }

    pub fn builtin(g: Generator, band: HalfInteger) -> Self {
        Self { band, layout: Layout::Invariant(band.levels().map(|l| g.block(l)).collect()) }
    }

    pub fn zero(band: HalfInteger) -> Self {
        Self { band, layout: Layout::Invariant(band.levels().map(|l| CMat::zeros(l.dim(), l.dim())).collect()) }
    }

    /// Symbol of multiplication by `f`: `σ(x, l) = f(x)·I`.
    pub fn multiplier(f: &CoefficientStack, grid: &Arc<QuadratureGrid>, band: HalfInteger) -> Result<Self> {
        let values = fourier::synthesize_grid(f, grid)?;
        let nodal = values
            .values
            .iter()
            .map(|&v| band.levels().map(|l| CMat::identity(l.dim(), l.dim()) * v).collect())
            .collect();
        let mb = grid.max_analysis_band();
        let fm = f.with_band(mb);
        let zero = CoefficientStack::zeros(mb);
        let entries = band
            .levels()
            .map(|l| {
                let d = l.dim();
                (0..d * d).map(|k| if k / d == k % d { fm.clone() } else { zero.clone() }).collect()
            })
            .collect();
        Self::varying_with_mirror(grid.clone(), nodal, Mirror { band: mb, entries })
    }

    pub fn band(&self) -> HalfInteger {
        self.band
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn is_invariant(&self) -> bool {
        matches!(self.layout, Layout::Invariant(_))
    }

    pub fn grid(&self) -> Option<&Arc<QuadratureGrid>> {
        match &self.layout {
            Layout::Invariant(_) => None,
            Layout::Varying(v) => Some(&v.grid),
        }
    }

    /// Number of stored x-positions (1 for invariant symbols).
    pub fn node_count(&self) -> usize {
        match &self.layout {
            Layout::Invariant(_) => 1,
            Layout::Varying(v) => v.nodal.len(),
        }
    }

    /// Blocks at a node (the node is ignored for invariant symbols).
    pub fn blocks_at(&self, node: usize) -> &[CMat] {
        match &self.layout {
            Layout::Invariant(b) => b,
            Layout::Varying(v) => &v.nodal[node],
        }
    }

    pub fn block(&self, node: usize, l: HalfInteger) -> &CMat {
        &self.blocks_at(node)[l.twice as usize]
    }

    /// Spectral mirror of a varying symbol; invariant symbols have none.
    pub fn mirror(&self) -> Result<Arc<Mirror>> {
        match &self.layout {
            Layout::Invariant(_) => Err(Error::Layout("invariant symbols carry no mirror".into())),
            Layout::Varying(v) => {
                if let Some(m) = v.mirror.get() {
                    return Ok(m.clone());
                }
                let m = Arc::new(build_mirror(&v.grid, &v.nodal, self.band)?);
                Ok(v.mirror.get_or_init(|| m).clone())
            }
        }
    }

    /// `σ(x, ·)`: stored blocks at a node, otherwise evaluated from the mirror.
    pub fn evaluate(&self, x: &GroupElement) -> Result<Vec<CMat>> {
        match &self.layout {
            Layout::Invariant(b) => Ok(b.clone()),
            Layout::Varying(v) => {
                for idx in 0..v.grid.len() {
                    if v.grid.element(idx).distance(x) < 1e-14 {
                        return Ok(v.nodal[idx].clone());
                    }
                }
                Ok(self.mirror()?.evaluate(x))
            }
        }
    }

    /// Applies `f` to every node's block list.
    pub fn map_nodes(&self, f: impl Fn(&[CMat]) -> Vec<CMat>) -> Result<Symbol> {
        match &self.layout {
            Layout::Invariant(b) => Symbol::invariant(f(b)),
            Layout::Varying(v) => Symbol::varying(v.grid.clone(), v.nodal.iter().map(|b| f(b)).collect()),
        }
    }

    pub fn map_blocks(&self, f: impl Fn(HalfInteger, &CMat) -> CMat) -> Symbol {
        self.map_nodes(|b| b.iter().enumerate().map(|(l2, m)| f(HalfInteger::from_twice(l2 as u32), m)).collect())
            .expect("shape-preserving map")
    }

    /// Blockwise combination at matching nodes; the band is the smaller of the two.
    pub fn zip_with(&self, other: &Symbol, f: impl Fn(&CMat, &CMat) -> CMat) -> Result<Symbol> {
        let band = self.band.min(other.band);
        let n = band.twice as usize + 1;
        let combine = |a: &[CMat], b: &[CMat]| -> Vec<CMat> { (0..n).map(|k| f(&a[k], &b[k])).collect() };
        match (&self.layout, &other.layout) {
            (Layout::Invariant(a), Layout::Invariant(b)) => Symbol::invariant(combine(a, b)),
            (Layout::Varying(v), _) | (_, Layout::Varying(v)) => {
                if let (Some(g1), Some(g2)) = (self.grid(), other.grid()) {
                    if !Arc::ptr_eq(g1, g2) && g1.counts() != g2.counts() {
                        return Err(Error::Layout("symbols live on different x-grids".into()));
                    }
                }
                let nodal = (0..v.nodal.len()).map(|k| combine(self.blocks_at(k), other.blocks_at(k))).collect();
                Symbol::varying(v.grid.clone(), nodal)
            }
        }
    }

    pub fn add(&self, other: &Symbol) -> Result<Symbol> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Symbol) -> Result<Symbol> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Blockwise (pointwise in x) matrix product.
    pub fn mul(&self, other: &Symbol) -> Result<Symbol> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: C64) -> Symbol {
        self.map_blocks(|_, b| b * c)
    }

    /// Blockwise conjugate transpose.
    pub fn conjugate_transpose(&self) -> Symbol {
        self.map_blocks(|_, b| b.adjoint())
    }

    pub fn truncate(&self, band: HalfInteger) -> Symbol {
        if band >= self.band {
            return self.clone();
        }
        let n = band.twice as usize + 1;
        let mut s = self.map_nodes(|b| b[..n].to_vec()).expect("truncation");
        s.band = band;
        s
    }

    /// Converts to an invariant symbol when all nodes agree to `tol` (scaled by the entry size).
    pub fn try_invariant(&self, tol: f64) -> Symbol {
        match &self.layout {
            Layout::Invariant(_) => self.clone(),
            Layout::Varying(v) => {
                let first = &v.nodal[0];
                let scale = first.iter().map(crate::max_abs).fold(1.0, f64::max);
                let same = v.nodal.iter().all(|b| b.iter().zip(first).all(|(x, y)| crate::max_abs(&(x - y)) <= tol * scale));
                if same {
                    Symbol::invariant(first.clone()).expect("valid blocks")
                } else {
                    self.clone()
                }
            }
        }
    }

    /// Largest entry difference over all nodes and levels `≤ upto`.
    pub fn max_abs_diff_upto(&self, other: &Symbol, upto: HalfInteger) -> Result<f64> {
        let upto = upto.min(self.band).min(other.band);
        let d = self.truncate(upto).sub(&other.truncate(upto))?;
        Ok(d.max_abs_upto(upto))
    }

    pub fn max_abs_diff(&self, other: &Symbol) -> Result<f64> {
        self.max_abs_diff_upto(other, self.band.max(other.band))
    }

    pub fn max_abs_upto(&self, upto: HalfInteger) -> f64 {
        let n = (upto.min(self.band).twice + 1) as usize;
        (0..self.node_count())
            .flat_map(|k| self.blocks_at(k)[..n].iter().map(crate::max_abs).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    /// `sup_x ‖σ(x, l)‖` (operator norm).
    pub fn sup_norm(&self, l: HalfInteger) -> f64 {
        (0..self.node_count()).map(|k| fourier::operator_norm(self.block(k, l))).fold(0.0, f64::max)
    }
}

fn build_mirror(grid: &Arc<QuadratureGrid>, nodal: &[Vec<CMat>], band: HalfInteger) -> Result<Mirror> {
    let mb = grid.max_analysis_band();
    let mut entries = Vec::with_capacity(band.dim());
    for l in band.levels() {
        let d = l.dim();
        let mut row = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let values = nodal.iter().map(|b| b[l.twice as usize][(i, j)]).collect();
                let f = GridFunction::new(grid.clone(), values)?;
                row.push(fourier::analyze(&f, mb)?);
            }
        }
        entries.push(row);
    }
    Ok(Mirror { band: mb, entries })
}

/// Closed-form symbol of a named generator.
pub fn builtin_symbol(name: &str, band: HalfInteger) -> Result<Symbol> {
    Ok(Symbol::builtin(Generator::parse(name)?, band))
}

fn assemble(
    grid: &Arc<QuadratureGrid>,
    band: HalfInteger,
    mut entry_values: impl FnMut(HalfInteger, usize, usize) -> Result<Vec<C64>>,
) -> Result<Symbol> {
    // values of A t_{kn} at every node, combined as t(x)* G(x)
    let nn = grid.len();
    let mut nodal: Vec<Vec<CMat>> = vec![Vec::with_capacity(band.dim()); nn];
    for l in band.levels() {
        let d = l.dim();
        let mut g = vec![CMat::zeros(d, d); nn];
        for k in 0..d {
            for n in 0..d {
                let vals = entry_values(l, k, n)?;
                for (node, v) in vals.into_iter().enumerate() {
                    g[node][(k, n)] = v;
                }
            }
        }
        for (node, gm) in g.into_iter().enumerate() {
            let t = grid.wigner_at(node, l);
            nodal[node].push(t.adjoint() * gm);
        }
    }
    Ok(Symbol::varying(grid.clone(), nodal)?.try_invariant(INVARIANCE_TOL))
}

/// Symbol of a black-box linear operator on grid functions:
/// `σ(x, l) = t^l(x)* (A t^l)(x)`, entry functions sampled on `grid`.
/// The result is invariant when all nodes agree to 1e-9.
pub fn extract_symbol(
    apply: &dyn Fn(&GridFunction) -> Result<GridFunction>,
    grid: &Arc<QuadratureGrid>,
    band: HalfInteger,
) -> Result<Symbol> {
    check_linear(apply, grid, band)?;
    let ts: Vec<Vec<CMat>> = (0..grid.len()).map(|k| band.levels().map(|l| grid.wigner_at(k, l)).collect()).collect();
    assemble(grid, band, |l, k, n| {
        let values = ts.iter().map(|t| t[l.twice as usize][(k, n)]).collect();
        let out = apply(&GridFunction::new(grid.clone(), values)?)?;
        if out.values.len() != grid.len() {
            return Err(Error::Grid("operator changed the grid".into()));
        }
        Ok(out.values)
    })
}

/// As [`extract_symbol`] for an operator given on Fourier coefficients.
pub fn extract_symbol_spectral(
    apply: &dyn Fn(&CoefficientStack) -> Result<CoefficientStack>,
    grid: &Arc<QuadratureGrid>,
    band: HalfInteger,
) -> Result<Symbol> {
    assemble(grid, band, |l, k, n| {
        // t_{kn} has the single coefficient 1/(2l+1) at (n, k)
        let c = CoefficientStack::unit(l, l, n, k, C64::new(1.0 / l.dim() as f64, 0.0));
        Ok(fourier::synthesize_grid(&apply(&c)?, grid)?.values)
    })
}

fn check_linear(apply: &dyn Fn(&GridFunction) -> Result<GridFunction>, grid: &Arc<QuadratureGrid>, band: HalfInteger) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let b = band.min(grid.band());
    let f = fourier::synthesize_grid(&CoefficientStack::random(&mut rng, b), grid)?;
    let g = fourier::synthesize_grid(&CoefficientStack::random(&mut rng, b), grid)?;
    let c = C64::new(2.5, -0.5);
    let lhs = apply(&f.zip_with(&g, |a, b| a + c * b))?;
    let (af, ag) = (apply(&f)?, apply(&g)?);
    let rhs = af.zip_with(&ag, |a, b| a + c * b);
    let scale = rhs.values.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let err = lhs.max_abs_diff(&rhs) / scale;
    if err > 1e-8 {
        return Err(Error::Nonlinear(err));
    }
    Ok(())
}

fn check_quantize_band(sigma: &Symbol, f: &CoefficientStack) -> Result<()> {
    if f.band() > sigma.band() {
        return Err(Error::Band(format!("function band {} exceeds symbol band {}", f.band(), sigma.band())));
    }
    Ok(())
}

fn quantize_value(t: &[CMat], s: &[CMat], f: &CoefficientStack) -> C64 {
    f.band()
        .levels()
        .map(|l| {
            let k = l.twice as usize;
            (&t[k] * (&s[k] * f.block(l))).trace() * l.dim() as f64
        })
        .sum()
}

/// `(Af)(x) = Σ (2l+1) Tr(t^l(x) σ(x, l) f^(l))` at each point.
pub fn quantize(sigma: &Symbol, f: &CoefficientStack, points: &[GroupElement]) -> Result<Vec<C64>> {
    check_quantize_band(sigma, f)?;
    points
        .iter()
        .map(|x| {
            let s = sigma.evaluate(x)?;
            Ok(quantize_value(&wigner::wigner_upto(f.band(), x), &s, f))
        })
        .collect()
}

/// [`quantize`] at every node of `grid`; uses stored blocks when `grid` is the symbol's grid.
pub fn quantize_grid(sigma: &Symbol, f: &CoefficientStack, grid: &Arc<QuadratureGrid>) -> Result<GridFunction> {
    check_quantize_band(sigma, f)?;
    if let Layout::Invariant(b) = &sigma.layout {
        let g = f.map_blocks(|l, fb| &b[l.twice as usize] * fb);
        return fourier::synthesize_grid(&g, grid);
    }
    let same = sigma.grid().is_some_and(|g| Arc::ptr_eq(g, grid));
    let nn = grid.len();
    let ts: Vec<Vec<CMat>> = (0..nn).map(|k| f.band().levels().map(|l| grid.wigner_at(k, l)).collect()).collect();
    if same {
        let values = (0..nn).map(|k| quantize_value(&ts[k], sigma.blocks_at(k), f)).collect();
        return GridFunction::new(grid.clone(), values);
    }
    // entry functions of the needed levels, synthesized on the target grid
    let mirror = sigma.mirror()?;
    let mut values = vec![ZERO; nn];
    for l in f.band().levels() {
        let fb = f.block(l);
        if fb.iter().all(|z| *z == ZERO) {
            continue;
        }
        let d = l.dim();
        let mut blocks = vec![CMat::zeros(d, d); nn];
        for i in 0..d {
            for j in 0..d {
                let v = fourier::synthesize_grid(mirror.entry(l, i, j), grid)?;
                for (k, x) in v.values.into_iter().enumerate() {
                    blocks[k][(i, j)] = x;
                }
            }
        }
        for (k, b) in blocks.iter().enumerate() {
            values[k] += (&ts[k][l.twice as usize] * (b * fb)).trace() * d as f64;
        }
    }
    GridFunction::new(grid.clone(), values)
}

/// Coefficients of `q₊ = t_{+−}`, `q₋ = t_{−+}` or `q₀ = t_{−−} − t_{++}`.
pub fn q_function(which: Direction) -> CoefficientStack {
    let h = HalfInteger::HALF;
    let half = C64::new(0.5, 0.0);
    match which {
        Direction::Plus => CoefficientStack::unit(h, h, 0, 1, half),
        Direction::Minus => CoefficientStack::unit(h, h, 1, 0, half),
        Direction::Zero => {
            let mut c = CoefficientStack::unit(h, h, 0, 0, half);
            c.block_mut(h)[(1, 1)] = -half;
            c
        }
    }
}

fn stack_times_q(s: &CoefficientStack, which: Direction) -> CoefficientStack {
    match which {
        Direction::Plus => wigner::product_with_spin_half(s, SpinHalfEntry::PlusMinus),
        Direction::Minus => wigner::product_with_spin_half(s, SpinHalfEntry::MinusPlus),
        Direction::Zero => {
            let a = wigner::product_with_spin_half(s, SpinHalfEntry::MinusMinus);
            let b = wigner::product_with_spin_half(s, SpinHalfEntry::PlusPlus);
            a.add_scaled(&b, -ONE)
        }
    }
}

fn node_difference(blocks: &[CMat], which: Direction) -> Vec<CMat> {
    let s = CoefficientStack::from_blocks(blocks.to_vec()).expect("valid blocks");
    stack_times_q(&s, which).into_blocks()
}

/// `Δ_which σ`: the kernel multiplied by `q_which`, per x-node. Band grows by ½;
/// levels above `band − ½` are incomplete.
pub fn difference(sigma: &Symbol, which: Direction) -> Symbol {
    let mut s = sigma.map_nodes(|b| node_difference(b, which)).expect("difference");
    s.band = HalfInteger::from_twice(sigma.band.twice + 1);
    s
}

fn apply_differences(sigma: &Symbol, seq: &[(Direction, u32)]) -> Symbol {
    let mut s = sigma.clone();
    for &(d, k) in seq {
        for _ in 0..k {
            s = difference(&s, d);
        }
    }
    s
}

/// `Δ₊^{α₁} Δ₋^{α₂} Δ₀^{α₃} σ`.
pub fn multi_difference(sigma: &Symbol, alpha: MultiIndex) -> Symbol {
    apply_differences(sigma, &[(Direction::Plus, alpha[0]), (Direction::Minus, alpha[1]), (Direction::Zero, alpha[2])])
}

/// Kernel multiplied by the Taylor coordinate `x^(α)`: `Δ₋^{α₁} Δ₊^{α₂} Δ₀^{α₃} σ`.
pub fn taylor_difference(sigma: &Symbol, alpha: MultiIndex) -> Symbol {
    apply_differences(sigma, &[(Direction::Minus, alpha[0]), (Direction::Plus, alpha[1]), (Direction::Zero, alpha[2])])
}

/// `x^(α) = x₁₂^{α₁} x₂₁^{α₂} (x₁₁ − x₂₂)^{α₃}`, band `|α|/2`.
pub fn taylor_coordinate(alpha: MultiIndex) -> CoefficientStack {
    let mut f = CoefficientStack::constant(ONE);
    for (k, d) in [Direction::Minus, Direction::Plus, Direction::Zero].iter().enumerate() {
        for _ in 0..alpha[k] {
            f = stack_times_q(&f, *d);
        }
    }
    f
}

/// `Σ_β c_β ∂^β σ` with `∂^β = A₁^{β₁} A₂^{β₂} A₃^{β₃}` acting on `x`.
pub fn derivative_combination(sigma: &Symbol, terms: &[(MultiIndex, C64)]) -> Result<Symbol> {
    let c0: C64 = terms.iter().filter(|t| order(t.0) == 0).map(|t| t.1).sum();
    let v = match &sigma.layout {
        Layout::Invariant(_) => return Ok(sigma.scale(c0)),
        Layout::Varying(v) => v,
    };
    let mirror = sigma.mirror()?;
    let mb = mirror.band;
    let mats: Vec<CMat> = mb
        .levels()
        .map(|l| {
            terms.iter().fold(CMat::zeros(l.dim(), l.dim()), |acc, (beta, c)| acc + derivative_block(*beta, l) * *c)
        })
        .collect();
    let grid = &v.grid;
    let nn = grid.len();
    let mut nodal: Vec<Vec<CMat>> = vec![Vec::with_capacity(sigma.band.dim()); nn];
    let mut entries = Vec::with_capacity(sigma.band.dim());
    for l in sigma.band.levels() {
        let d = l.dim();
        let mut row = Vec::with_capacity(d * d);
        let mut blocks = vec![CMat::zeros(d, d); nn];
        for i in 0..d {
            for j in 0..d {
                let c = mirror.entry(l, i, j).map_blocks(|k, b| &mats[k.twice as usize] * b);
                let vals = fourier::synthesize_grid(&c, grid)?;
                for (node, val) in vals.values.into_iter().enumerate() {
                    blocks[node][(i, j)] = val;
                }
                row.push(c);
            }
        }
        for (node, b) in blocks.into_iter().enumerate() {
            nodal[node].push(b);
        }
        entries.push(row);
    }
    Symbol::varying_with_mirror(grid.clone(), nodal, Mirror { band: mb, entries })
}

/// `∂^β σ` in x (zero for invariant symbols when `|β| > 0`).
pub fn x_derivative(sigma: &Symbol, beta: MultiIndex) -> Result<Symbol> {
    derivative_combination(sigma, &[(beta, ONE)])
}

/// Coefficients `c_{αγ}` of `∂^(α) = Σ_{|γ|≤|α|} c_{αγ} ∂^γ`.
#[derive(Clone, Debug)]
pub struct DualTable {
    pub max_order: u32,
    pub indices: Vec<MultiIndex>,
    /// Row `α`, column `γ`, both in `indices` order.
    pub coeffs: CMat,
    /// `M_{βγ} = (∂^γ x^(β))(I)`.
    pub moments: CMat,
    pub condition: f64,
    /// `max |(∂^(α) x^(β))(I) − α! δ_{αβ}|`.
    pub residual: f64,
}

impl DualTable {
    pub fn position(&self, alpha: MultiIndex) -> Option<usize> {
        self.indices.iter().position(|&a| a == alpha)
    }

    /// `(γ, c_{αγ})` for `|γ| ≤ |α|`.
    pub fn terms(&self, alpha: MultiIndex) -> Result<Vec<(MultiIndex, C64)>> {
        let r = self
            .position(alpha)
            .ok_or_else(|| Error::Domain(format!("|α| = {} exceeds the table order {}", order(alpha), self.max_order)))?;
        Ok(self
            .indices
            .iter()
            .enumerate()
            .filter(|(_, g)| order(**g) <= order(alpha))
            .map(|(c, g)| (*g, self.coeffs[(r, c)]))
            .collect())
    }
}

/// `(P f)(I) = Σ (2l+1) Tr f^(l)`, after left-multiplying each block by `m(l)`.
fn value_at_identity(f: &CoefficientStack, m: impl Fn(HalfInteger) -> CMat) -> C64 {
    f.band().levels().map(|l| (m(l) * f.block(l)).trace() * l.dim() as f64).sum()
}

/// Solves `C Mᵀ = diag(α!)` for `|α| ≤ n`, `M_{βγ} = (∂^γ x^(β))(I)` computed spectrally.
pub fn dual_derivative_coeffs(n: u32) -> Result<DualTable> {
    let indices = multi_indices(n);
    let k = indices.len();
    let coords: Vec<CoefficientStack> = indices.iter().map(|&b| taylor_coordinate(b)).collect();
    let moments = CMat::from_fn(k, k, |b, g| value_at_identity(&coords[b], |l| derivative_block(indices[g], l)));
    let sv = moments.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = smax / smin;
    if !condition.is_finite() || condition > 1e12 {
        return Err(Error::IllConditioned(condition));
    }
    let fact = CMat::from_fn(k, k, |i, j| if i == j { C64::new(factorial(indices[i]), 0.0) } else { ZERO });
    let inv = moments.clone().try_inverse().ok_or(Error::IllConditioned(condition))?;
    let mut coeffs = (inv * &fact).transpose();
    // entries with |γ| > |α| vanish analytically
    for (r, a) in indices.iter().enumerate() {
        for (c, g) in indices.iter().enumerate() {
            if order(*g) > order(*a) {
                coeffs[(r, c)] = ZERO;
            }
        }
    }
    let residual = crate::max_abs(&(&coeffs * moments.transpose() - fact));
    Ok(DualTable { max_order: n, indices, coeffs, moments, condition, residual })
}

/// Highest `|α|` supported by the cached dual table.
pub const MAX_DUAL_ORDER: u32 = 4;

/// Shared table for `|α| ≤ 4`.
pub fn dual_table() -> &'static DualTable {
    static TABLE: OnceLock<DualTable> = OnceLock::new();
    TABLE.get_or_init(|| dual_derivative_coeffs(MAX_DUAL_ORDER).expect("dual derivative table"))
}

/// `∂^(α) σ`.
pub fn dual_derivative(sigma: &Symbol, alpha: MultiIndex) -> Result<Symbol> {
    derivative_combination(sigma, &dual_table().terms(alpha)?)
}

/// `(∂^(α) f)(I)` for a coefficient stack.
pub fn dual_derivative_at_identity(f: &CoefficientStack, alpha: MultiIndex) -> Result<C64> {
    let terms = dual_table().terms(alpha)?;
    Ok(value_at_identity(f, |l| {
        terms.iter().fold(CMat::zeros(l.dim(), l.dim()), |acc, (g, c)| acc + derivative_block(*g, l) * *c)
    }))
}

/// Blockwise `σ₁σ₂ − σ₂σ₁`.
pub fn commutator(a: &Symbol, b: &Symbol) -> Result<Symbol> {
    a.zip_with(b, |x, y| x * y - y * x)
}

/// `(i − j) σ_{ij}`, the closed form of `[σ_{∂₀}, σ]`.
pub fn d0_commutator_formula(sigma: &Symbol) -> Symbol {
    sigma.map_blocks(|_, b| CMat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * (i as f64 - j as f64)))
}

/// Closed form of `[σ_{∂₊}, σ]` with `i, j` the magnetic indices:
/// `−√((ξ−i+1)(ξ+i)) σ_{i−1,j} + √((ξ−j)(ξ+j+1)) σ_{i,j+1}`.
pub fn dplus_commutator_formula(sigma: &Symbol) -> Symbol {
    sigma.map_blocks(|l, b| {
        let d = l.dim();
        let xi = l.value();
        CMat::from_fn(d, d, |r, c| {
            let (i, j) = (r as f64 - xi, c as f64 - xi);
            let mut v = ZERO;
            if r > 0 {
                v -= b[(r - 1, c)] * ((xi - i + 1.0) * (xi + i)).sqrt();
            }
            if c + 1 < d {
                v += b[(r, c + 1)] * ((xi - j) * (xi + j + 1.0)).sqrt();
            }
            v
        })
    })
}

/// Random invariant symbol with entries uniform in the unit square.
pub fn random_symbol<R: rand::Rng + ?Sized>(rng: &mut R, band: HalfInteger) -> Symbol {
    let blocks = band
        .levels()
        .map(|l| CMat::from_fn(l.dim(), l.dim(), |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    Symbol::invariant(blocks).expect("valid blocks")
}

/// Real matrix helper for tests and reports.
pub fn real_part(m: &CMat) -> DMatrix<f64> {
    m.map(|z| z.re)
}
