//! Haar quadrature, Fourier analysis and synthesis, convolution and conjugation.

use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use rand::Rng;

use crate::group::{cis, EulerAngles, GroupElement};
use crate::wigner::{self, HalfInteger};
use crate::{CMat, Error, Result, C64};

type DTable = Vec<Vec<DMatrix<f64>>>;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Band-limited function on SU(2) as its blocks `f^(l)`, `l ≤ band`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientStack {
    band: HalfInteger,
    blocks: Vec<CMat>,
}

impl CoefficientStack {
    pub fn zeros(band: HalfInteger) -> Self {
        let blocks = band.levels().map(|l| CMat::zeros(l.dim(), l.dim())).collect();
        Self { band, blocks }
    }

    pub fn from_blocks(blocks: Vec<CMat>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Band("empty coefficient stack".into()));
        }
        for (l2, b) in blocks.iter().enumerate() {
            if b.nrows() != l2 + 1 || b.ncols() != l2 + 1 {
                return Err(Error::Band(format!("block {l2} has shape {}x{}", b.nrows(), b.ncols())));
            }
        }
        let band = HalfInteger::from_twice(blocks.len() as u32 - 1);
        Ok(Self { band, blocks })
    }

    /// Stack with a single unit entry `f^(l)_{ij} = value`.
    pub fn unit(band: HalfInteger, l: HalfInteger, i: usize, j: usize, value: C64) -> Self {
        let mut s = Self::zeros(band);
        s.block_mut(l)[(i, j)] = value;
        s
    }

    pub fn constant(c: C64) -> Self {
        Self::unit(HalfInteger::ZERO, HalfInteger::ZERO, 0, 0, c)
    }

    /// Independent standard complex Gaussian-like entries (uniform in [−1, 1]²).
    pub fn random<R: Rng + ?Sized>(rng: &mut R, band: HalfInteger) -> Self {
        let blocks = band
            .levels()
            .map(|l| CMat::from_fn(l.dim(), l.dim(), |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
            .collect();
        Self { band, blocks }
    }

    pub fn band(&self) -> HalfInteger {
        self.band
    }

    pub fn block(&self, l: HalfInteger) -> &CMat {
        &self.blocks[l.twice as usize]
    }

    pub fn block_mut(&mut self, l: HalfInteger) -> &mut CMat {
        &mut self.blocks[l.twice as usize]
    }

    /// Block or `None` above the band (missing blocks are zero).
    pub fn get(&self, l: HalfInteger) -> Option<&CMat> {
        self.blocks.get(l.twice as usize)
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    /// Same function with band `band` (zero-padded or truncated).
    pub fn with_band(&self, band: HalfInteger) -> Self {
        let blocks = band
            .levels()
            .map(|l| self.get(l).cloned().unwrap_or_else(|| CMat::zeros(l.dim(), l.dim())))
            .collect();
        Self { band, blocks }
    }

    pub fn map_blocks(&self, mut f: impl FnMut(HalfInteger, &CMat) -> CMat) -> Self {
        let blocks = self.band.levels().map(|l| f(l, self.block(l))).collect();
        Self { band: self.band, blocks }
    }

    /// `self + c·other`, band of the larger.
    pub fn add_scaled(&self, other: &CoefficientStack, c: C64) -> Self {
        let band = self.band.max(other.band);
        let mut out = self.with_band(band);
        for l in other.band.levels() {
            *out.block_mut(l) += other.block(l) * c;
        }
        out
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map_blocks(|_, b| b * c)
    }

    /// L² norm by Plancherel: `(Σ (2l+1) ‖f^(l)‖_F²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.band
            .levels()
            .map(|l| l.dim() as f64 * self.block(l).norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entrywise difference; missing blocks count as zero.
    pub fn max_abs_diff(&self, other: &CoefficientStack) -> f64 {
        let band = self.band.max(other.band);
        let a = self.with_band(band);
        let b = other.with_band(band);
        a.blocks.iter().zip(&b.blocks).map(|(x, y)| crate::max_abs(&(x - y))).fold(0.0, f64::max)
    }

    /// Largest blockwise operator norm `max_l ‖f^(l)‖`.
    pub fn max_operator_norm(&self) -> f64 {
        self.blocks.iter().map(operator_norm).fold(0.0, f64::max)
    }
}

/// Largest singular value.
pub fn operator_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Product quadrature: uniform in `φ` and `ψ`, Gauss–Legendre in `cos θ`.
#[derive(Debug)]
pub struct QuadratureGrid {
    band: HalfInteger,
    phi: Vec<f64>,
    theta: Vec<f64>,
    psi: Vec<f64>,
    /// Weights in `θ` summing to one; node weight is this over `N_φ N_ψ`.
    theta_weights: Vec<f64>,
    capacity_x2: u32,
    /// `d^l(θ_k)` indexed `[k][2l]`; extended on demand.
    dtab: RwLock<Arc<DTable>>,
}

/// Gauss–Legendre nodes and weights on [−1, 1] (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            if n == 0 {
                break;
            }
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Largest doubled combined band integrated exactly by the given node counts.
fn capacity_x2(n_phi: usize, n_theta: usize, n_psi: usize) -> u32 {
    let by_phi = 2 * (n_phi as u32).saturating_sub(1) + 1;
    let by_psi = (n_psi as u32).saturating_sub(1);
    let by_theta = 2 * (2 * n_theta as u32).saturating_sub(1) + 1;
    by_phi.min(by_psi).min(by_theta)
}

const NODE_CAP: usize = 4_000_000;

impl QuadratureGrid {
    /// Default grid for band `L`: `N_φ = N_ψ = 4·2L + 2`, `N_θ = 2·2L + 2`, refined
    /// by doubling until the Gram self-test passes at 1e-10.
    pub fn new(band: HalfInteger) -> Result<Arc<Self>> {
        let l2 = band.twice as usize;
        Self::with_counts_refined(band, 4 * l2 + 2, 2 * l2 + 2, 4 * l2 + 2)
    }

    /// Smallest grid that integrates products of combined band `capacity` exactly.
    pub fn for_capacity(band: HalfInteger, capacity: HalfInteger) -> Result<Arc<Self>> {
        let c2 = capacity.twice.max(2 * band.twice) as usize;
        let n_phi = c2 / 2 + 1;
        let n_psi = c2 + 1;
        let n_theta = (c2 / 2) / 2 + 1;
        Self::with_counts_refined(band, n_phi, n_theta, n_psi)
    }

    fn with_counts_refined(band: HalfInteger, mut n_phi: usize, mut n_theta: usize, mut n_psi: usize) -> Result<Arc<Self>> {
        loop {
            let g = Self::build(band, n_phi, n_theta, n_psi);
            let err = g.gram_error(band);
            if err < 1e-10 {
                return Ok(Arc::new(g));
            }
            n_phi *= 2;
            n_theta *= 2;
            n_psi *= 2;
            if n_phi * n_theta * n_psi > NODE_CAP {
                return Err(Error::Grid(format!(
                    "Gram self-test at band {band} still fails ({err:e}) before reaching the node cap"
                )));
            }
        }
    }

    /// Grid with explicit counts; runs the Gram self-test at `band` once.
    pub fn with_counts(band: HalfInteger, n_phi: usize, n_theta: usize, n_psi: usize) -> Result<Arc<Self>> {
        if n_phi == 0 || n_theta == 0 || n_psi == 0 {
            return Err(Error::Grid("node counts must be positive".into()));
        }
        if n_phi * n_theta * n_psi > NODE_CAP {
            return Err(Error::Grid("node count above cap".into()));
        }
        let g = Self::build(band, n_phi, n_theta, n_psi);
        let err = g.gram_error(band);
        if err >= 1e-10 {
            return Err(Error::Grid(format!("Gram self-test at band {band} fails: {err:e}")));
        }
        Ok(Arc::new(g))
    }

    /// Grid with explicit counts and band set to half its capacity (as read from files).
    pub fn from_counts(n_phi: usize, n_theta: usize, n_psi: usize) -> Result<Arc<Self>> {
        if n_phi == 0 || n_theta == 0 || n_psi == 0 {
            return Err(Error::Grid("node counts must be positive".into()));
        }
        let band = HalfInteger::from_twice(capacity_x2(n_phi, n_theta, n_psi) / 2);
        Self::with_counts(band, n_phi, n_theta, n_psi)
    }

    fn build(band: HalfInteger, n_phi: usize, n_theta: usize, n_psi: usize) -> Self {
        let phi = (0..n_phi).map(|j| -PI + 2.0 * PI * (j + 1) as f64 / n_phi as f64).collect();
        let psi = (0..n_psi).map(|j| -2.0 * PI + 4.0 * PI * (j + 1) as f64 / n_psi as f64).collect();
        let (x, w) = gauss_legendre(n_theta);
        // ascending θ
        let mut pairs: Vec<(f64, f64)> = x.iter().zip(&w).map(|(&x, &w)| (x.clamp(-1.0, 1.0).acos(), 0.5 * w)).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let theta: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let theta_weights = pairs.iter().map(|p| p.1).collect();
        let capacity_x2 = capacity_x2(n_phi, n_theta, n_psi);
        let table_x2 = (capacity_x2 / 2).max(band.twice);
        let table = HalfInteger::from_twice(table_x2);
        let dtab: DTable = theta.iter().map(|&t| wigner::small_d_upto(table, t)).collect();
        Self { band, phi, theta, psi, theta_weights, capacity_x2, dtab: RwLock::new(Arc::new(dtab)) }
    }

    pub fn band(&self) -> HalfInteger {
        self.band
    }

    /// Largest combined band integrated exactly.
    pub fn capacity(&self) -> HalfInteger {
        HalfInteger::from_twice(self.capacity_x2)
    }

    /// Largest level analysed exactly for functions whose band does not exceed it.
    pub fn max_analysis_band(&self) -> HalfInteger {
        HalfInteger::from_twice(self.capacity_x2 / 2)
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.phi.len(), self.theta.len(), self.psi.len())
    }

    pub fn len(&self) -> usize {
        self.phi.len() * self.theta.len() * self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node ordering is φ-major, then θ, then ψ.
    pub fn index(&self, ip: usize, it: usize, is: usize) -> usize {
        (ip * self.theta.len() + it) * self.psi.len() + is
    }

    pub fn split_index(&self, idx: usize) -> (usize, usize, usize) {
        let ns = self.psi.len();
        let nt = self.theta.len();
        (idx / (nt * ns), (idx / ns) % nt, idx % ns)
    }

    pub fn euler(&self, idx: usize) -> EulerAngles {
        let (ip, it, is) = self.split_index(idx);
        EulerAngles::new(self.phi[ip], self.theta[it], self.psi[is])
    }

    pub fn element(&self, idx: usize) -> GroupElement {
        crate::group::from_euler_unchecked(&self.euler(idx))
    }

    pub fn elements(&self) -> Vec<GroupElement> {
        (0..self.len()).map(|i| self.element(i)).collect()
    }

    pub fn weight(&self, idx: usize) -> f64 {
        let (_, it, _) = self.split_index(idx);
        self.theta_weights[it] / (self.phi.len() * self.psi.len()) as f64
    }

    pub fn weights_sum(&self) -> f64 {
        (0..self.len()).map(|i| self.weight(i)).sum()
    }

    /// Tables `d^l(θ_k)` for at least `l ≤ band`, indexed `[k][2l]`.
    pub fn d_tables(&self, band: HalfInteger) -> Arc<DTable> {
        {
            let cur = self.dtab.read().unwrap();
            if cur.first().is_none_or(|t| t.len() > band.twice as usize) {
                return cur.clone();
            }
        }
        let mut cur = self.dtab.write().unwrap();
        if cur.first().is_some_and(|t| t.len() <= band.twice as usize) {
            *cur = Arc::new(self.theta.iter().map(|&t| wigner::small_d_upto(band, t)).collect());
        }
        cur.clone()
    }

    /// `t^l` at node `idx` from the table.
    pub fn wigner_at(&self, idx: usize, l: HalfInteger) -> CMat {
        let (ip, it, is) = self.split_index(idx);
        wigner::phase_d(&self.d_tables(l)[it][l.twice as usize], self.phi[ip], self.psi[is])
    }

    /// Largest deviation from the identity of the discrete Gram matrix of
    /// `{√(2l+1) t^l_{mn} : l ≤ band}`.
    pub fn gram_error(&self, band: HalfInteger) -> f64 {
        let dtab = self.d_tables(band);
        let np = self.phi.len();
        let ns = self.psi.len();
        let span = 2 * band.twice as i32;
        // Φ(k) = mean_j e^{−i k φ_j / 2}, Ψ likewise (k doubled frequency)
        let phi_sum: Vec<C64> = (-span..=span)
            .map(|k| self.phi.iter().map(|&p| cis(-(k as f64) * p / 2.0)).sum::<C64>() / np as f64)
            .collect();
        let psi_sum: Vec<C64> = (-span..=span)
            .map(|k| self.psi.iter().map(|&p| cis(-(k as f64) * p / 2.0)).sum::<C64>() / ns as f64)
            .collect();
        let mut entries = Vec::new();
        for l in band.levels() {
            for m2 in l.m2_values() {
                for n2 in l.m2_values() {
                    entries.push((l, m2, n2));
                }
            }
        }
        let mut worst: f64 = 0.0;
        for (a, &(l, m, n)) in entries.iter().enumerate() {
            let (im, in_) = (wigner::index_map(l, m).unwrap(), wigner::index_map(l, n).unwrap());
            for &(lp, mp, np_) in &entries[a..] {
                let f = phi_sum[(m - mp + span) as usize] * psi_sum[(n - np_ + span) as usize];
                let target = if (l, m, n) == (lp, mp, np_) { 1.0 } else { 0.0 };
                if f.norm() < 1e-15 {
                    worst = worst.max(target);
                    continue;
                }
                let (imp, inp) = (wigner::index_map(lp, mp).unwrap(), wigner::index_map(lp, np_).unwrap());
                let mut s = 0.0;
                for k in 0..self.theta.len() {
                    s += self.theta_weights[k] * dtab[k][l.twice as usize][(im, in_)] * dtab[k][lp.twice as usize][(imp, inp)];
                }
                let v = f * s * ((l.dim() * lp.dim()) as f64).sqrt();
                worst = worst.max((v - target).norm());
            }
        }
        worst
    }

}

/// Complex samples of a function at the nodes of a grid.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub grid: Arc<QuadratureGrid>,
    pub values: Vec<C64>,
}

impl GridFunction {
    pub fn new(grid: Arc<QuadratureGrid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Arc<QuadratureGrid>, f: impl Fn(&GroupElement) -> C64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.element(i))).collect();
        Self { grid: grid.clone(), values }
    }

    /// `∫ f conj(g) dμ` by quadrature.
    pub fn inner(&self, other: &GridFunction) -> C64 {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(i, (a, b))| a * b.conj() * self.grid.weight(i))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(C64, C64) -> C64) -> GridFunction {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        GridFunction { grid: self.grid.clone(), values }
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// `f^(l) = ∫ f t^l* dμ` for `l ≤ band`, by separable sums over ψ, φ, then θ.
/// Exact when `band(f) + band ≤ capacity`.
pub fn analyze(f: &GridFunction, band: HalfInteger) -> Result<CoefficientStack> {
    let g = &*f.grid;
    if 2 * band.twice > g.capacity_x2 {
        return Err(Error::Grid(format!(
            "grid too coarse for band {band}: needs capacity {} (has {})",
            HalfInteger::from_twice(2 * band.twice),
            g.capacity()
        )));
    }
    let dtab = g.d_tables(band);
    let (np, nt, ns) = g.counts();
    let l2 = band.twice as i32;
    let nf = (2 * l2 + 1) as usize; // doubled frequencies −l2..=l2
    let epsi: Vec<C64> = (-l2..=l2).flat_map(|q| g.psi.iter().map(move |&p| cis(q as f64 * p / 2.0))).collect();
    let ephi: Vec<C64> = (-l2..=l2).flat_map(|q| g.phi.iter().map(move |&p| cis(q as f64 * p / 2.0))).collect();
    // H[ip][it][q]
    let mut h = vec![ZERO; np * nt * nf];
    for ip in 0..np {
        for it in 0..nt {
            let base = g.index(ip, it, 0);
            let row = &f.values[base..base + ns];
            let out = &mut h[(ip * nt + it) * nf..(ip * nt + it + 1) * nf];
            for (qi, o) in out.iter_mut().enumerate() {
                let e = &epsi[qi * ns..(qi + 1) * ns];
                *o = row.iter().zip(e).map(|(a, b)| a * b).sum();
            }
        }
    }
    // G[it][p][q]
    let mut gm = vec![ZERO; nt * nf * nf];
    for it in 0..nt {
        for pi in 0..nf {
            let e = &ephi[pi * np..(pi + 1) * np];
            for qi in 0..nf {
                if (pi + qi) % 2 == 1 {
                    continue;
                }
                let mut s = ZERO;
                for ip in 0..np {
                    s += h[(ip * nt + it) * nf + qi] * e[ip];
                }
                gm[(it * nf + pi) * nf + qi] = s;
            }
        }
    }
    let norm = 1.0 / (np * ns) as f64;
    let mut out = CoefficientStack::zeros(band);
    for l in band.levels() {
        let lt = l.twice as i32;
        let d = l.dim();
        let block = out.block_mut(l);
        for i in 0..d {
            let m2 = 2 * i as i32 - lt;
            for j in 0..d {
                let n2 = 2 * j as i32 - lt;
                let pi = (n2 + l2) as usize;
                let qi = (m2 + l2) as usize;
                let mut s = ZERO;
                for it in 0..nt {
                    s += gm[(it * nf + pi) * nf + qi] * (g.theta_weights[it] * dtab[it][l.twice as usize][(j, i)]);
                }
                block[(i, j)] = s * norm;
            }
        }
    }
    Ok(out)
}

/// `f(x) = Σ (2l+1) Tr(t^l(x) f^(l))` at every node of `grid`.
pub fn synthesize_grid(c: &CoefficientStack, grid: &Arc<QuadratureGrid>) -> Result<GridFunction> {
    let g = &**grid;
    let dtab = g.d_tables(c.band());
    let (np, nt, ns) = g.counts();
    let l2 = c.band().twice as i32;
    let nf = (2 * l2 + 1) as usize;
    // S[it][m][n] = Σ_l d · d^l_{mn}(θ) c^(l)_{nm}
    let mut s = vec![ZERO; nt * nf * nf];
    for it in 0..nt {
        for l in c.band().levels() {
            let lt = l.twice as i32;
            let dl = l.dim() as f64;
            let blk = c.block(l);
            let dt = &dtab[it][l.twice as usize];
            for i in 0..l.dim() {
                let m2 = 2 * i as i32 - lt;
                for j in 0..l.dim() {
                    let n2 = 2 * j as i32 - lt;
                    let v = blk[(j, i)];
                    if v != ZERO {
                        s[(it * nf + (m2 + l2) as usize) * nf + (n2 + l2) as usize] += v * (dl * dt[(i, j)]);
                    }
                }
            }
        }
    }
    let emphi: Vec<C64> = (-l2..=l2).flat_map(|q| g.phi.iter().map(move |&p| cis(-(q as f64) * p / 2.0))).collect();
    let empsi: Vec<C64> = (-l2..=l2).flat_map(|q| g.psi.iter().map(move |&p| cis(-(q as f64) * p / 2.0))).collect();
    // T[ip][it][n] = Σ_m e^{−imφ} S[it][m][n]
    let mut t = vec![ZERO; np * nt * nf];
    for ip in 0..np {
        for it in 0..nt {
            for mi in 0..nf {
                let e = emphi[mi * np + ip];
                let srow = &s[(it * nf + mi) * nf..(it * nf + mi + 1) * nf];
                let trow = &mut t[(ip * nt + it) * nf..(ip * nt + it + 1) * nf];
                for (tv, sv) in trow.iter_mut().zip(srow) {
                    if *sv != ZERO {
                        *tv += e * sv;
                    }
                }
            }
        }
    }
    let mut values = vec![ZERO; g.len()];
    for ip in 0..np {
        for it in 0..nt {
            let trow = &t[(ip * nt + it) * nf..(ip * nt + it + 1) * nf];
            for is in 0..ns {
                let mut v = ZERO;
                for (ni, tv) in trow.iter().enumerate() {
                    if *tv != ZERO {
                        v += tv * empsi[ni * ns + is];
                    }
                }
                values[g.index(ip, it, is)] = v;
            }
        }
    }
    GridFunction::new(grid.clone(), values)
}

/// Value of the Fourier series at one point.
pub fn synthesize_at(c: &CoefficientStack, x: &GroupElement) -> C64 {
    let ts = wigner::wigner_upto(c.band(), x);
    c.band()
        .levels()
        .map(|l| (&ts[l.twice as usize] * c.block(l)).trace() * l.dim() as f64)
        .sum()
}

/// The finite Fourier series at each point.
pub fn synthesize(c: &CoefficientStack, points: &[GroupElement]) -> Vec<C64> {
    points.iter().map(|x| synthesize_at(c, x)).collect()
}

/// Transform of `(f∗g)(x) = ∫ f(y) g(y⁻¹x) dμ(y)`, i.e. the blockwise product `g^(l) f^(l)`.
pub fn convolve(f: &CoefficientStack, g: &CoefficientStack) -> CoefficientStack {
    let band = f.band().max(g.band());
    let (f, g) = (f.with_band(band), g.with_band(band));
    f.map_blocks(|l, fb| g.block(l) * fb)
}

/// Transform of `x ↦ f(u⁻¹ x u)`: blockwise `t^l(u) f^(l) t^l(u)*`.
pub fn conjugate_transform(f: &CoefficientStack, u: &GroupElement) -> CoefficientStack {
    let ts = wigner::wigner_upto(f.band(), u);
    f.map_blocks(|l, b| {
        let t = &ts[l.twice as usize];
        t * b * t.adjoint()
    })
}

/// `⟨ξ⟩ = (1 + ξ + ξ²)^{1/2}`.
pub fn weight(xi: HalfInteger) -> f64 {
    let x = xi.value();
    (1.0 + x + x * x).sqrt()
}

/// Laplacian eigenvalue `λ_ξ = −ξ(ξ+1)`.
pub fn laplace_eigenvalue(xi: HalfInteger) -> f64 {
    let x = xi.value();
    -x * (x + 1.0)
}
