//! Composition, adjoints, parametrices and symbol-class diagnostics.
//!
//! Composition uses `σ_{AB} ~ Σ 1/α! (Q^α σ_A)(∂^(α) σ_B)` where `Q^α` multiplies
//! the kernel of `A` by `x^(α)(z⁻¹) = (−1)^{|α|} q₋^{α₁} q₊^{α₂} q₀^{α₃}`.

use serde::Serialize;

use std::sync::Arc;

use crate::expr::{default_x_grid, OperatorExpr};
use crate::fourier::{self, operator_norm, CoefficientStack, QuadratureGrid};
use crate::group::GroupElement;
use crate::symbol::{self, Direction, Generator, MultiIndex, Symbol};
use crate::wigner::{self, HalfInteger};
use crate::{CMat, Error, Result, C64};

/// Blocks with condition number above this fail the ellipticity gate.
pub const ELLIPTICITY_COND: f64 = 1e12;

/// Sup norms below this count as zero in order estimation.
pub const ZERO_NORM: f64 = 1e-9;

/// `A ~ Σ A_j` with `A_j` of order `m − j`.
#[derive(Clone, Debug)]
pub struct SymbolExpansion {
    pub terms: Vec<(f64, Symbol)>,
    pub truncation: u32,
}

impl SymbolExpansion {
    pub fn single(order: f64, s: Symbol) -> Self {
        Self { terms: vec![(order, s)], truncation: 0 }
    }

    /// Sum of all terms.
    pub fn total(&self) -> Result<Symbol> {
        let mut it = self.terms.iter();
        let first = it.next().ok_or_else(|| Error::Invalid("empty expansion".into()))?.1.clone();
        it.try_fold(first, |acc, (_, s)| acc.add(s))
    }
}

/// `Q^α σ = (−1)^{|α|} Δ₋^{α₁} Δ₊^{α₂} Δ₀^{α₃} σ`.
pub fn q_difference(sigma: &Symbol, alpha: MultiIndex) -> Symbol {
    let s = symbol::taylor_difference(sigma, alpha);
    if symbol::order(alpha) % 2 == 1 {
        s.scale(C64::new(-1.0, 0.0))
    } else {
        s
    }
}

/// Truncated composition expansion `Σ_{|α|≤N} 1/α! (Q^α σ_A)(∂^(α) σ_B)`,
/// band limited to the smaller input band.
pub fn compose(a: &Symbol, b: &Symbol, n: u32) -> Result<Symbol> {
    if n > symbol::MAX_DUAL_ORDER {
        return Err(Error::Domain(format!("truncation {n} above {}", symbol::MAX_DUAL_ORDER)));
    }
    let band = a.band().min(b.band());
    let mut acc = a.truncate(band).mul(&b.truncate(band))?;
    if b.is_invariant() {
        return Ok(acc);
    }
    for alpha in symbol::multi_indices(n).into_iter().skip(1) {
        let qa = q_difference(a, alpha).truncate(band).scale(C64::new(1.0 / symbol::factorial(alpha), 0.0));
        let db = symbol::dual_derivative(b, alpha)?;
        acc = acc.add(&qa.mul(&db)?)?;
    }
    Ok(acc)
}

/// `σ_{A*} ~ Σ_{|α|≤N} 1/α! (Δ₋^{α₁}Δ₊^{α₂}Δ₀^{α₃} ∂^(α) σ_A)*`.
pub fn adjoint(a: &Symbol, n: u32) -> Result<Symbol> {
    if n > symbol::MAX_DUAL_ORDER {
        return Err(Error::Domain(format!("truncation {n} above {}", symbol::MAX_DUAL_ORDER)));
    }
    let mut acc = a.conjugate_transpose();
    if a.is_invariant() {
        return Ok(acc);
    }
    for alpha in symbol::multi_indices(n).into_iter().skip(1) {
        let d = symbol::dual_derivative(a, alpha)?;
        let t = symbol::taylor_difference(&d, alpha).truncate(a.band());
        acc = acc.add(&t.conjugate_transpose().scale(C64::new(1.0 / symbol::factorial(alpha), 0.0)))?;
    }
    Ok(acc)
}

/// Condition number of a square block (∞ when singular).
pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Blockwise inverse with the ellipticity gate; also returns the worst condition number.
pub fn invert_blocks(sigma: &Symbol) -> Result<(Symbol, f64)> {
    let mut worst: f64 = 1.0;
    let varying = !sigma.is_invariant();
    let mut nodal = Vec::with_capacity(sigma.node_count());
    for k in 0..sigma.node_count() {
        let mut blocks = Vec::with_capacity(sigma.band().dim());
        for l in sigma.band().levels() {
            let b = sigma.block(k, l);
            let cond = condition_number(b);
            if !cond.is_finite() || cond > ELLIPTICITY_COND {
                return Err(Error::Ellipticity { node: varying.then_some(k), l_x2: l.twice, cond });
            }
            worst = worst.max(cond);
            blocks.push(b.clone().lu().try_inverse().ok_or(Error::Ellipticity {
                node: varying.then_some(k),
                l_x2: l.twice,
                cond,
            })?);
        }
        nodal.push(blocks);
    }
    let out = match sigma.grid() {
        None => Symbol::invariant(nodal.pop().expect("one node"))?,
        Some(g) => Symbol::varying(g.clone(), nodal)?,
    };
    Ok((out, worst))
}

/// Parametrix terms `B₀ = σ_{A₀}⁻¹` and
/// `B_N = −B₀ Σ_{k<N} Σ_{j≤N−k} Σ_{|γ|=N−j−k} 1/γ! (Q^γ σ_{A_j})(∂^(γ) σ_{B_k})`.
pub fn parametrix(a: &SymbolExpansion, n: u32) -> Result<(SymbolExpansion, f64)> {
    if n > symbol::MAX_DUAL_ORDER {
        return Err(Error::Domain(format!("truncation {n} above {}", symbol::MAX_DUAL_ORDER)));
    }
    let (order0, a0) = a.terms.first().ok_or_else(|| Error::Invalid("empty expansion".into()))?;
    let band = a.terms.iter().map(|t| t.1.band()).min().expect("nonempty");
    let (b0, cond) = invert_blocks(&a0.truncate(band))?;
    let mut bs: Vec<Symbol> = vec![b0.clone()];
    for big_n in 1..=n {
        let mut sum: Option<Symbol> = None;
        for (k, bk) in bs.iter().enumerate() {
            let k = k as u32;
            for j in 0..=(big_n - k) {
                let Some((_, aj)) = a.terms.get(j as usize) else { continue };
                let g = big_n - j - k;
                for gamma in symbol::multi_indices(g).into_iter().filter(|x| symbol::order(*x) == g) {
                    let qa = q_difference(aj, gamma).truncate(band);
                    let db = if g == 0 { bk.clone() } else { symbol::dual_derivative(bk, gamma)? };
                    let term = qa.mul(&db)?.scale(C64::new(1.0 / symbol::factorial(gamma), 0.0));
                    sum = Some(match sum {
                        None => term,
                        Some(s) => s.add(&term)?,
                    });
                }
            }
        }
        let bn = match sum {
            None => Symbol::zero(band),
            Some(s) => b0.mul(&s)?.scale(C64::new(-1.0, 0.0)),
        };
        bs.push(bn);
    }
    let terms = bs.into_iter().enumerate().map(|(k, s)| (-order0 - k as f64, s)).collect();
    Ok((SymbolExpansion { terms, truncation: n }, cond))
}

/// Levels `ξ ∈ [lo, hi]` available in a symbol of band `band`.
pub fn levels_in(band: HalfInteger, lo: f64, hi: f64) -> Vec<HalfInteger> {
    band.levels().filter(|l| l.value() >= lo - 1e-12 && l.value() <= hi + 1e-12).collect()
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Fitted order: slope of `log sup_x ‖σ(x, ξ)‖` against `log⟨ξ⟩` over `ξ ∈ [lo, hi]`.
/// Returns `−∞` when every norm is below [`ZERO_NORM`].
pub fn estimate_order(sigma: &Symbol, lo: f64, hi: f64) -> Result<f64> {
    let levels = levels_in(sigma.band(), lo, hi);
    if levels.len() < 4 {
        return Err(Error::Domain(format!("only {} levels in [{lo}, {hi}] (need 4)", levels.len())));
    }
    let norms: Vec<f64> = levels.iter().map(|&l| sigma.sup_norm(l)).collect();
    if norms.iter().all(|&v| v < ZERO_NORM) {
        return Ok(f64::NEG_INFINITY);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = levels
        .iter()
        .zip(&norms)
        .filter(|(_, &v)| v > 0.0)
        .map(|(l, v)| (fourier::weight(*l).ln(), v.ln()))
        .unzip();
    if xs.len() < 4 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(fit_slope(&xs, &ys))
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct DecayRow {
    pub p: u32,
    pub xi_x2: u32,
    pub sup: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormRow {
    pub xi_x2: u32,
    /// `⟨ξ⟩^{−m} sup_x ‖σ(x, ξ)‖`.
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugatedDecay {
    pub u: [[f64; 2]; 4],
    pub rows: Vec<DecayRow>,
    pub norms: Vec<NormRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub m: f64,
    pub rows: Vec<DecayRow>,
    pub norms: Vec<NormRow>,
    /// Growth slope in `log⟨ξ⟩` of the `p`-row minus that of the `p = 0` row.
    pub excess_growth: Vec<f64>,
    /// `max_ξ` of each `p`-row.
    pub sup_by_p: Vec<f64>,
    pub rapid_decay: bool,
    pub conjugated: Vec<ConjugatedDecay>,
}

/// Excess growth above which a `p`-row is taken to grow with `ξ`.
pub const DECAY_SLOPE_TOL: f64 = 0.5;

fn decay_rows(blocks_by_node: &[Vec<CMat>], band: HalfInteger, m: f64, p_max: u32) -> (Vec<DecayRow>, Vec<NormRow>) {
    let mut rows = Vec::new();
    for p in 0..=p_max {
        for l in band.levels() {
            let w = fourier::weight(l).powf(-m);
            let mut sup: f64 = 0.0;
            for node in blocks_by_node {
                let b = &node[l.twice as usize];
                for i in 0..b.nrows() {
                    for j in 0..b.ncols() {
                        let k = i as f64 - j as f64;
                        let v = (1.0 + k * k).powf(p as f64 / 2.0) * b[(i, j)].norm();
                        sup = sup.max(v);
                    }
                }
            }
            rows.push(DecayRow { p, xi_x2: l.twice, sup: w * sup });
        }
    }
    let norms = band
        .levels()
        .map(|l| NormRow {
            xi_x2: l.twice,
            norm: fourier::weight(l).powf(-m)
                * blocks_by_node.iter().map(|b| operator_norm(&b[l.twice as usize])).fold(0.0, f64::max),
        })
        .collect();
    (rows, norms)
}

/// Tabulates `sup_{x,i,j} ⟨ξ⟩^{−m}⟨i−j⟩^p |σ(x,ξ)_{ij}|` for `p ≤ p_max`, and the same after
/// conjugating every block by `t^ξ(u)` for each `u`.
pub fn decay_report(sigma: &Symbol, m: f64, p_max: u32, us: &[GroupElement]) -> DecayReport {
    let nodes: Vec<Vec<CMat>> = (0..sigma.node_count()).map(|k| sigma.blocks_at(k).to_vec()).collect();
    let (rows, norms) = decay_rows(&nodes, sigma.band(), m, p_max);
    let levels: Vec<u32> = sigma.band().levels().map(|l| l.twice).filter(|&t| t >= 2).collect();
    let slope_of = |p: u32| -> f64 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.p == p && levels.contains(&r.xi_x2) && r.sup > 0.0)
            .map(|r| (fourier::weight(HalfInteger::from_twice(r.xi_x2)).ln(), r.sup.ln()))
            .unzip();
        if xs.len() < 2 {
            0.0
        } else {
            fit_slope(&xs, &ys)
        }
    };
    let base = slope_of(0);
    let excess_growth: Vec<f64> = (0..=p_max).map(|p| slope_of(p) - base).collect();
    let sup_by_p = (0..=p_max)
        .map(|p| rows.iter().filter(|r| r.p == p).map(|r| r.sup).fold(0.0, f64::max))
        .collect();
    let rapid_decay = excess_growth.iter().all(|&s| s < DECAY_SLOPE_TOL);
    let conjugated = us
        .iter()
        .map(|u| {
            let ts = wigner::wigner_upto(sigma.band(), u);
            let conj: Vec<Vec<CMat>> = nodes
                .iter()
                .map(|n| n.iter().zip(&ts).map(|(b, t)| t * b * t.adjoint()).collect())
                .collect();
            let (rows, norms) = decay_rows(&conj, sigma.band(), m, p_max);
            let mm = u.matrix();
            let flat = [[mm[0][0].re, mm[0][0].im], [mm[0][1].re, mm[0][1].im], [mm[1][0].re, mm[1][0].im], [mm[1][1].re, mm[1][1].im]];
            ConjugatedDecay { u: flat, rows, norms }
        })
        .collect();
    DecayReport { m, rows, norms, excess_growth, sup_by_p, rapid_decay, conjugated }
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutatorRow {
    pub direction: String,
    pub p: u32,
    pub order: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipRow {
    pub direction: String,
    pub gamma: MultiIndex,
    pub order: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutatorReport {
    pub order: f64,
    pub commutators: Vec<CommutatorRow>,
    pub memberships: Vec<MembershipRow>,
}

/// Orders of the iterated commutators `ad(σ_{∂_j})^p σ` for `p = 1..3`, and of
/// `(Δ^γ σ_{∂_j}) σ` for `|γ| = 1` against the bound `m + 1 − |γ|`.
pub fn commutator_diagnostics(sigma: &Symbol, lo: f64, hi: f64) -> Result<CommutatorReport> {
    let m = estimate_order(sigma, lo, hi)?;
    let band = sigma.band();
    let mut commutators = Vec::new();
    let mut memberships = Vec::new();
    for dir in Direction::ALL {
        let d = Symbol::builtin(dir.generator(), band);
        let mut c = sigma.clone();
        for p in 1..=3 {
            c = symbol::commutator(&d, &c)?;
            commutators.push(CommutatorRow { direction: dir.label().into(), p, order: estimate_order(&c, lo, hi)? });
        }
        let big = Symbol::builtin(dir.generator(), HalfInteger::from_twice(band.twice + 1));
        for gamma in [[1, 0, 0], [0, 1, 0], [0, 0, 1]] {
            let dg = symbol::multi_difference(&big, gamma).truncate(band);
            let order = estimate_order(&dg.mul(sigma)?, lo, hi)?;
            let bound = m + 1.0 - 1.0;
            memberships.push(MembershipRow {
                direction: dir.label().into(),
                gamma,
                order,
                bound,
                ok: order <= bound + 0.1,
            });
        }
    }
    Ok(CommutatorReport { order: m, commutators, memberships })
}

/// Builtin symbol of `I − Δ`.
pub fn one_minus_laplacian(band: HalfInteger) -> Symbol {
    Symbol::builtin(Generator::I, band)
        .sub(&Symbol::builtin(Generator::Laplacian, band))
        .expect("same layout")
}

/// Inverts an invariant operator blockwise: `f^(l) = σ_A(l)⁻¹ g^(l)`.
pub fn solve_exact(a: &OperatorExpr, g: &CoefficientStack) -> Result<CoefficientStack> {
    if !a.is_invariant() {
        return Err(Error::Layout(format!("exact solve needs an x-independent operator, got '{a}'")));
    }
    let sigma = a.symbol(g.band(), None)?;
    let (inv, _) = invert_blocks(&sigma)?;
    Ok(g.map_blocks(|l, b| inv.block(0, l) * b))
}

/// Grids used by the parametrix solver.
#[derive(Clone, Debug)]
pub struct SolveGrids {
    /// Grid carrying the x-dependence of the symbols.
    pub x_grid: Arc<QuadratureGrid>,
    /// Grid on which `f = Op(B) g` is sampled and `Af − g` is measured.
    pub eval_grid: Arc<QuadratureGrid>,
}

impl SolveGrids {
    /// `x_grid` from [`default_x_grid`]; `eval_grid` resolves `f` up to band `band(g) + extra`.
    pub fn for_problem(g_band: HalfInteger, x_band: HalfInteger, extra: HalfInteger) -> Result<Self> {
        let fb = HalfInteger::from_twice(g_band.twice + extra.twice);
        Ok(Self {
            x_grid: default_x_grid(x_band)?,
            eval_grid: QuadratureGrid::for_capacity(fb, HalfInteger::from_twice(2 * fb.twice + 4))?,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub truncation: u32,
    pub symbol_band_x2: u32,
    pub condition: f64,
    /// `‖Af − g‖` by quadrature.
    pub residual: f64,
    pub relative_residual: f64,
}

/// `f = Op(B₀ + … + B_N) g` for the parametrix of `A`, with the quadrature residual `‖Af − g‖`.
pub fn solve_parametrix(
    a: &OperatorExpr,
    g: &CoefficientStack,
    n: u32,
    grids: &SolveGrids,
) -> Result<(CoefficientStack, SolveReport)> {
    let band = HalfInteger::from_twice(g.band().twice + n.max(1));
    let sigma = a.symbol(band, Some(&grids.x_grid))?;
    let (p, condition) = parametrix(&SymbolExpansion::single(a.order() as f64, sigma), n)?;
    let b = p.total()?;
    let fv = symbol::quantize_grid(&b, g, &grids.eval_grid)?;
    let f = fourier::analyze(&fv, grids.eval_grid.max_analysis_band())?;
    let af = fourier::synthesize_grid(&a.apply(&f), &grids.eval_grid)?;
    let gv = fourier::synthesize_grid(g, &grids.eval_grid)?;
    let residual = af.zip_with(&gv, |x, y| x - y).l2_norm();
    let gn = gv.l2_norm();
    let report = SolveReport {
        truncation: n,
        symbol_band_x2: band.twice,
        condition,
        residual,
        relative_residual: if gn > 0.0 { residual / gn } else { residual },
    };
    Ok((f, report))
}
