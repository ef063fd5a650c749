//! Irreducible representations `t^l` of SU(2) and the spin-½ product rules.
//!
//! `t^l(x)_{mn} = i^{n−m} e^{−i(mφ+nψ)} P^l_{mn}(cos θ)` where `(φ, θ, ψ)` are the
//! Euler angles of `x`. The factor `i^{n−m}` is a diagonal change of basis that
//! makes `t^{1/2}(x) = x` entrywise; with it the ladder operators have the
//! real closed-form symbols used in [`crate::symbol`]. The real matrix
//! `d^l(θ)_{mn} = i^{n−m} P^l_{mn}(cos θ)` is what gets tabulated.

use std::fmt;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fourier::CoefficientStack;
use crate::group::{self, cis, EulerAngles, GroupElement};
use crate::{CMat, Error, Result, C64};

/// Above this level `d^l` is built by the spin-½ ladder instead of the closed form.
pub const L_SWITCH_X2: u32 = 16;

/// Representation index `l ∈ ½ℕ`, stored as `2l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInteger {
    pub twice: u32,
}

impl HalfInteger {
    pub const ZERO: HalfInteger = HalfInteger { twice: 0 };
    pub const HALF: HalfInteger = HalfInteger { twice: 1 };

    pub fn from_twice(twice: u32) -> Self {
        Self { twice }
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// Doubled magnetic indices `−2l, −2l+2, …, 2l`.
    pub fn m2_values(self) -> impl Iterator<Item = i32> {
        let l2 = self.twice as i32;
        (0..=l2).map(move |i| 2 * i - l2)
    }

    /// All levels `0, ½, …, self`.
    pub fn levels(self) -> impl Iterator<Item = HalfInteger> {
        (0..=self.twice).map(HalfInteger::from_twice)
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice.is_multiple_of(2) {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Row index of `m` (given as `2m`) in a level-`l` block: `m + l`.
pub fn index_map(l: HalfInteger, m2: i32) -> Result<usize> {
    let l2 = l.twice as i32;
    if m2.abs() > l2 || (m2 + l2) % 2 != 0 {
        return Err(Error::Index(format!("m = {m2}/2 not in level {l}")));
    }
    Ok(((m2 + l2) / 2) as usize)
}

fn factorial(n: i64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn falling(n: i64, k: i64) -> f64 {
    // n!/(n−k)!
    (n - k + 1..=n).map(|v| v as f64).product()
}

fn binomial(n: i64, k: i64) -> f64 {
    falling(n, k) / factorial(k)
}

/// Closed-form `d^l_{mn}` at half-angle sine `s` and cosine `c`.
///
/// The `(l−m)`-fold derivative of `(1−x)^{l−n}(1+x)^{l+n}` is expanded by
/// Leibniz; with `1∓x = 2s², 2c²` every term is a monomial `s^p c^q` with
/// `p, q ≥ 0`, so no endpoint limits are needed.
fn closed_d(l2: i32, m2: i32, n2: i32, s: f64, c: f64) -> f64 {
    let k = ((l2 - m2) / 2) as i64;
    let a = ((l2 - n2) / 2) as i64;
    let b = ((l2 + n2) / 2) as i64;
    let nm = ((n2 - m2) / 2) as i64;
    let mut sum = 0.0;
    for j in 0..=k {
        if j > a || k - j > b {
            continue;
        }
        let coef = binomial(k, j) * falling(a, j) * falling(b, k - j) * if j % 2 == 0 { 1.0 } else { -1.0 };
        let pu = 2 * (a - j) + nm;
        let pv = 2 * (b - (k - j)) - ((m2 + n2) / 2) as i64;
        debug_assert!(pu >= 0 && pv >= 0);
        sum += coef * s.powi(pu as i32) * c.powi(pv as i32);
    }
    let lpm = ((l2 + m2) / 2) as i64;
    let norm = (factorial(lpm) / (factorial(k) * factorial(a) * factorial(b))).sqrt();
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * norm * sum
}

/// `P^l_{mn}(x)` from the closed formula with constant `c^l_{mn}`; indices doubled.
pub fn legendre_p(l: HalfInteger, m2: i32, n2: i32, x: f64) -> Result<C64> {
    index_map(l, m2)?;
    index_map(l, n2)?;
    if !x.is_finite() || !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [-1, 1]")));
    }
    let s = (0.5 * (1.0 - x)).max(0.0).sqrt();
    let c = (0.5 * (1.0 + x)).max(0.0).sqrt();
    let d = closed_d(l.twice as i32, m2, n2, s, c);
    // P = i^{m−n} d
    let v = d * i_pow((m2 - n2) / 2);
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::Domain(format!("P^{l}_{{{m2}/2,{n2}/2}}({x})")));
    }
    Ok(v)
}

pub(crate) fn i_pow(k: i32) -> C64 {
    match k.rem_euclid(4) {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

fn closed_d_matrix(l2: u32, s: f64, c: f64) -> DMatrix<f64> {
    let d = l2 as usize + 1;
    let l2 = l2 as i32;
    DMatrix::from_fn(d, d, |i, j| closed_d(l2, 2 * i as i32 - l2, 2 * j as i32 - l2, s, c))
}

/// Next level `d^{l+½}` from `d^l` and `d^{l−½}` via the spin-½ product rules at `ω₂(θ)`,
/// where `t_{−−} = t_{++} = c`, `t_{−+} = −s`, `t_{+−} = s`.
fn ladder_step(cur: &DMatrix<f64>, prev: Option<&DMatrix<f64>>, l2: u32, s: f64, c: f64) -> DMatrix<f64> {
    let l = l2 as f64 / 2.0;
    let dn = l2 as usize + 2;
    let lp2 = l2 as i32 + 1;
    let mut out = DMatrix::zeros(dn, dn);
    let prev_at = |i: usize, j: usize| -> f64 {
        // level l−½ entry with indices given in level l+½ numbering
        match prev {
            Some(p) if i >= 1 && j >= 1 && i - 1 < p.nrows() && j - 1 < p.ncols() => p[(i - 1, j - 1)],
            _ => 0.0,
        }
    };
    for i in 0..dn {
        for j in 0..dn {
            let mp = (2 * i as i32 - lp2) as f64 / 2.0;
            let np = (2 * j as i32 - lp2) as f64 / 2.0;
            let v = if i > 0 && j > 0 {
                let (m, n) = (mp - 0.5, np - 0.5);
                let lower = ((l - m) * (l - n)).max(0.0).sqrt() * prev_at(i, j);
                ((2.0 * l + 1.0) * cur[(i - 1, j - 1)] * c - lower) / ((l + m + 1.0) * (l + n + 1.0)).sqrt()
            } else if i == 0 && j > 0 {
                let n = np - 0.5;
                (2.0 * l + 1.0) * cur[(0, j - 1)] * (-s) / ((2.0 * l + 1.0) * (l + n + 1.0)).sqrt()
            } else if j == 0 && i > 0 {
                let m = mp - 0.5;
                (2.0 * l + 1.0) * cur[(i - 1, 0)] * s / ((l + m + 1.0) * (2.0 * l + 1.0)).sqrt()
            } else {
                c * cur[(0, 0)]
            };
            out[(i, j)] = v;
        }
    }
    out
}

/// Real matrices `d^l(θ)` for all `l ≤ band` (indexed by `2l`).
pub fn small_d_upto(band: HalfInteger, theta: f64) -> Vec<DMatrix<f64>> {
    let (s, c) = (0.5 * theta).sin_cos();
    let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(band.dim());
    for l2 in 0..=band.twice {
        let m = if l2 <= L_SWITCH_X2 || l2 < 2 {
            closed_d_matrix(l2, s, c)
        } else {
            let cur = &out[l2 as usize - 1];
            let prev = out.get(l2 as usize - 2);
            ladder_step(cur, prev, l2 - 1, s, c)
        };
        out.push(m);
    }
    out
}

/// `d^l(θ)` by the closed form only (any level).
pub fn small_d_closed(l: HalfInteger, theta: f64) -> DMatrix<f64> {
    let (s, c) = (0.5 * theta).sin_cos();
    closed_d_matrix(l.twice, s, c)
}

/// `d^l(θ)` by the ladder only, starting from `l = 0`.
pub fn small_d_ladder(l: HalfInteger, theta: f64) -> DMatrix<f64> {
    let (s, c) = (0.5 * theta).sin_cos();
    let mut prev: Option<DMatrix<f64>> = None;
    let mut cur = DMatrix::from_element(1, 1, 1.0);
    for l2 in 0..l.twice {
        let next = ladder_step(&cur, prev.as_ref(), l2, s, c);
        prev = Some(cur);
        cur = next;
    }
    cur
}

/// Phases `e^{−i(mφ+nψ)}` applied to a real `d^l(θ)`.
pub fn phase_d(d: &DMatrix<f64>, phi: f64, psi: f64) -> CMat {
    let l2 = d.nrows() as i32 - 1;
    CMat::from_fn(d.nrows(), d.ncols(), |i, j| {
        let m = (2 * i as i32 - l2) as f64 / 2.0;
        let n = (2 * j as i32 - l2) as f64 / 2.0;
        cis(-(m * phi + n * psi)) * d[(i, j)]
    })
}

pub fn wigner_from_euler(l: HalfInteger, e: &EulerAngles) -> CMat {
    let d = if l.twice <= L_SWITCH_X2 {
        small_d_closed(l, e.theta)
    } else {
        small_d_upto(l, e.theta).pop().expect("non-empty")
    };
    phase_d(&d, e.phi, e.psi)
}

/// `t^l(g)`.
pub fn wigner_matrix(l: HalfInteger, g: &GroupElement) -> CMat {
    wigner_from_euler(l, &group::to_euler(g))
}

/// `t^l(g)` for every `l ≤ band`.
pub fn wigner_upto(band: HalfInteger, g: &GroupElement) -> Vec<CMat> {
    let e = group::to_euler(g);
    small_d_upto(band, e.theta).iter().map(|d| phase_d(d, e.phi, e.psi)).collect()
}

/// Relation between `t^{1/2}(g)` and the matrix `g`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpinHalfCorrespondence {
    Identity,
    Transpose,
    /// `P g P` with `P` the 2×2 swap.
    SwapConjugation,
    /// `P gᵀ P`.
    SwapTranspose,
    /// `D g D⁻¹` with `D = diag(1, i)`.
    PhaseConjugation,
    /// `D g D⁻¹` with `D = diag(1, −i)`.
    InversePhaseConjugation,
}

impl SpinHalfCorrespondence {
    pub const ALL: [SpinHalfCorrespondence; 6] = [
        Self::Identity,
        Self::Transpose,
        Self::SwapConjugation,
        Self::SwapTranspose,
        Self::PhaseConjugation,
        Self::InversePhaseConjugation,
    ];

    /// Predicted `t^{1/2}(g)` under this candidate.
    pub fn apply(self, g: &GroupElement) -> [[C64; 2]; 2] {
        let m = g.matrix();
        let t = [[m[0][0], m[1][0]], [m[0][1], m[1][1]]];
        let swap = |x: [[C64; 2]; 2]| [[x[1][1], x[1][0]], [x[0][1], x[0][0]]];
        let i = C64::new(0.0, 1.0);
        match self {
            Self::Identity => m,
            Self::Transpose => t,
            Self::SwapConjugation => swap(m),
            Self::SwapTranspose => swap(t),
            Self::PhaseConjugation => [[m[0][0], -i * m[0][1]], [i * m[1][0], m[1][1]]],
            Self::InversePhaseConjugation => [[m[0][0], i * m[0][1]], [-i * m[1][0], m[1][1]]],
        }
    }
}

/// Determines the entrywise relation between `t^{1/2}(g)` and `g` from `ω₁(0.7)` and
/// ten random elements. Fails unless exactly one candidate matches to 1e-10.
pub fn calibrate_spin_half() -> Result<SpinHalfCorrespondence> {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let mut samples = vec![group::basic_rotation(1, 0.7)?];
    samples.extend((0..10).map(|_| GroupElement::random(&mut rng)));
    let mut survivors = Vec::new();
    let mut best = f64::INFINITY;
    for cand in SpinHalfCorrespondence::ALL {
        let mut worst: f64 = 0.0;
        for g in &samples {
            let t = wigner_matrix(HalfInteger::HALF, g);
            let p = cand.apply(g);
            for r in 0..2 {
                for c in 0..2 {
                    worst = worst.max((t[(r, c)] - p[r][c]).norm());
                }
            }
        }
        best = best.min(worst);
        if worst < 1e-10 {
            survivors.push(cand);
        }
    }
    match survivors.as_slice() {
        [one] => Ok(*one),
        _ => Err(Error::Calibration(best)),
    }
}

/// Entry of `t^{1/2}`: `−−, ++, −+, +−` (row sign first).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpinHalfEntry {
    MinusMinus,
    PlusPlus,
    MinusPlus,
    PlusMinus,
}

impl SpinHalfEntry {
    pub const ALL: [SpinHalfEntry; 4] = [Self::MinusMinus, Self::PlusPlus, Self::MinusPlus, Self::PlusMinus];

    /// `(2m, 2n)` of the entry.
    pub fn indices(self) -> (i32, i32) {
        match self {
            Self::MinusMinus => (-1, -1),
            Self::PlusPlus => (1, 1),
            Self::MinusPlus => (-1, 1),
            Self::PlusMinus => (1, -1),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "--" => Some(Self::MinusMinus),
            "++" => Some(Self::PlusPlus),
            "-+" => Some(Self::MinusPlus),
            "+-" => Some(Self::PlusMinus),
            _ => None,
        }
    }
}

/// Expansion of `t^l_{mn} · t_{which}` as `Σ w · t^{l'}_{m'n'}` (indices doubled).
///
/// Returns `(2l', 2m', 2n', w)` with the `1/(2l+1)` already applied. The
/// `−−` and `++` rules carry `+` on the lower term.
pub fn spin_half_product_terms(l2: u32, m2: i32, n2: i32, which: SpinHalfEntry) -> Vec<(u32, i32, i32, f64)> {
    let l = l2 as f64 / 2.0;
    let m = m2 as f64 / 2.0;
    let n = n2 as f64 / 2.0;
    let sq = |x: f64| x.max(0.0).sqrt();
    let (dm, dn, up, down) = match which {
        SpinHalfEntry::MinusMinus => (-1, -1, sq((l - m + 1.0) * (l - n + 1.0)), sq((l + m) * (l + n))),
        SpinHalfEntry::PlusPlus => (1, 1, sq((l + m + 1.0) * (l + n + 1.0)), sq((l - m) * (l - n))),
        SpinHalfEntry::MinusPlus => (-1, 1, sq((l - m + 1.0) * (l + n + 1.0)), -sq((l + m) * (l - n))),
        SpinHalfEntry::PlusMinus => (1, -1, sq((l + m + 1.0) * (l - n + 1.0)), -sq((l - m) * (l + n))),
    };
    let d = 2.0 * l + 1.0;
    let (tm, tn) = (m2 + dm, n2 + dn);
    let mut out = Vec::with_capacity(2);
    if up != 0.0 {
        out.push((l2 + 1, tm, tn, up / d));
    }
    if l2 >= 1 && down != 0.0 && tm.unsigned_abs() < l2 && tn.unsigned_abs() < l2 {
        out.push((l2 - 1, tm, tn, down / d));
    }
    out
}

/// Fourier coefficients of `t_{which} · f` from those of `f`; the band grows by ½.
///
/// With `f = Σ (2l+1) Σ f^(l)_{mn} t^l_{nm}`, each coefficient feeds the
/// product rule for `t^l_{nm}`; a target `t^{l'}_{rc}` lands in `h^(l')_{cr}`
/// divided by `2l'+1`.
pub fn product_with_spin_half(f: &CoefficientStack, which: SpinHalfEntry) -> CoefficientStack {
    let band = HalfInteger::from_twice(f.band().twice + 1);
    let mut out = CoefficientStack::zeros(band);
    for l in f.band().levels() {
        let l2 = l.twice as i32;
        let block = f.block(l);
        for i in 0..l.dim() {
            for j in 0..l.dim() {
                let v = block[(i, j)];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                // function t^l_{nm}: row n (index j), column m (index i)
                let row2 = 2 * j as i32 - l2;
                let col2 = 2 * i as i32 - l2;
                for (tl2, r2, c2, w) in spin_half_product_terms(l.twice, row2, col2, which) {
                    let tl = HalfInteger::from_twice(tl2);
                    let ri = ((r2 + tl2 as i32) / 2) as usize;
                    let ci = ((c2 + tl2 as i32) / 2) as usize;
                    out.block_mut(tl)[(ci, ri)] += v * (w * l.dim() as f64 / tl.dim() as f64);
                }
            }
        }
    }
    out
}
