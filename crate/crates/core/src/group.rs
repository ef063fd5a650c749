//! SU(2) as unit quaternions: products, Euler angles, exponential and logarithm.

use std::f64::consts::PI;

use rand::Rng;

use crate::{Error, Result, C64};

/// Point of SU(2), stored as `x = [[a, b], [-conj(b), conj(a)]]` with `|a|² + |b|² = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupElement {
    a: C64,
    b: C64,
}

/// Euler angles with `x = ω₃(φ) ω₂(θ) ω₃(ψ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerAngles {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

/// `z ∈ ℝ³`, standing for `X(z) = z₁X₁ + z₂X₂ + z₃X₃ ∈ su(2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgebraVector {
    pub z: [f64; 3],
}

impl EulerAngles {
    pub fn new(phi: f64, theta: f64, psi: f64) -> Self {
        Self { phi, theta, psi }
    }

    /// Ranges `φ ∈ (−π, π]`, `θ ∈ [0, π]`, `ψ ∈ (−2π, 2π]`.
    pub fn check(&self) -> Result<()> {
        let ok = self.phi > -PI
            && self.phi <= PI
            && (0.0..=PI).contains(&self.theta)
            && self.psi > -2.0 * PI
            && self.psi <= 2.0 * PI;
        if ok {
            Ok(())
        } else {
            Err(Error::AngleOutOfRange(format!("{self:?}")))
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.theta == 0.0 || self.theta == PI
    }
}

impl AlgebraVector {
    pub fn new(z1: f64, z2: f64, z3: f64) -> Self {
        Self { z: [z1, z2, z3] }
    }

    pub fn norm(&self) -> f64 {
        self.z.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `X(z) = ½ [[i z₃, i z₁ − z₂], [i z₁ + z₂, −i z₃]]`.
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        let [z1, z2, z3] = self.z;
        [
            [C64::new(0.0, 0.5 * z3), C64::new(-0.5 * z2, 0.5 * z1)],
            [C64::new(0.5 * z2, 0.5 * z1), C64::new(0.0, -0.5 * z3)],
        ]
    }

    /// Basis element `X_j` (j = 1, 2, 3).
    pub fn basis(j: usize) -> Self {
        let mut z = [0.0; 3];
        z[j - 1] = 1.0;
        Self { z }
    }
}

/// Matrix commutator of 2×2 complex matrices.
pub fn commutator2(x: &[[C64; 2]; 2], y: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                out[i][j] += x[i][k] * y[k][j] - y[i][k] * x[k][j];
            }
        }
    }
    out
}

impl GroupElement {
    pub fn identity() -> Self {
        Self { a: C64::new(1.0, 0.0), b: C64::new(0.0, 0.0) }
    }

    /// Builds from the first row, normalising small drift. Fails if `|a|²+|b|²` is far from 1.
    pub fn from_row(a: C64, b: C64) -> Result<Self> {
        let n2 = a.norm_sqr() + b.norm_sqr();
        if (n2 - 1.0).abs() > 1e-10 || !n2.is_finite() {
            return Err(Error::NotSu2(format!("|a|²+|b|² = {n2}")));
        }
        let s = n2.sqrt();
        Ok(Self { a: a / s, b: b / s })
    }

    /// Checked construction from a full matrix (unitarity and det 1 to 1e-12).
    pub fn from_matrix(m: [[C64; 2]; 2]) -> Result<Self> {
        let a = m[0][0];
        let b = m[0][1];
        let tol = 1e-12;
        if (m[1][1] - a.conj()).norm() > tol || (m[1][0] + b.conj()).norm() > tol {
            return Err(Error::NotSu2("missing quaternionic structure".into()));
        }
        let det = a * m[1][1] - b * m[1][0];
        if (det - 1.0).norm() > tol {
            return Err(Error::NotSu2(format!("det = {det}")));
        }
        Ok(Self { a, b })
    }

    /// Unit quaternion `(w, x, y, z)` mapped to `a = w + i z`, `b = y + i x`.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        Self::from_row(C64::new(w, z), C64::new(y, x))
    }

    /// Haar-distributed sample (uniform on the 3-sphere).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v: [f64; 4] = std::array::from_fn(|_| gaussian(rng));
            let n = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            if n > 1e-8 {
                return Self { a: C64::new(v[0], v[3]) / n, b: C64::new(v[2], v[1]) / n };
            }
        }
    }

    /// Random element `exp(X(z))` with `|z| ≤ radius`.
    pub fn random_near_identity<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Self {
        let z = AlgebraVector::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = z.norm().max(1e-300);
        let r = radius * rng.gen_range(0.0..1.0);
        exp_su2(&AlgebraVector::new(z.z[0] * r / n, z.z[1] * r / n, z.z[2] * r / n))
    }

    pub fn a(&self) -> C64 {
        self.a
    }

    pub fn b(&self) -> C64 {
        self.b
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        [[self.a, self.b], [-self.b.conj(), self.a.conj()]]
    }

    /// Entry `x_{ij}` with 1-based indices as in the coordinate functions.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.matrix()[i - 1][j - 1]
    }

    pub fn multiply(&self, h: &GroupElement) -> GroupElement {
        // [[a,b],[-b̄,ā]] · [[c,d],[-d̄,c̄]]
        let a = self.a * h.a - self.b * h.b.conj();
        let b = self.a * h.b + self.b * h.a.conj();
        let out = GroupElement { a, b };
        out.renormalized()
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement { a: self.a.conj(), b: -self.b }
    }

    pub fn det(&self) -> C64 {
        C64::new(self.a.norm_sqr() + self.b.norm_sqr(), 0.0)
    }

    fn renormalized(self) -> Self {
        let n2 = self.a.norm_sqr() + self.b.norm_sqr();
        if (n2 - 1.0).abs() > 1e-13 {
            let s = n2.sqrt();
            Self { a: self.a / s, b: self.b / s }
        } else {
            self
        }
    }

    /// Max-entry distance between matrices.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        (self.a - other.a).norm().max((self.b - other.b).norm())
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// `ω_j(t)`: `ω₁ = [[cos, i sin],[i sin, cos]]`, `ω₂ = [[cos, −sin],[sin, cos]]`,
/// `ω₃ = diag(e^{it/2}, e^{−it/2})`, all at half angle `t/2`.
pub fn basic_rotation(j: usize, t: f64) -> Result<GroupElement> {
    let (s, c) = (0.5 * t).sin_cos();
    match j {
        1 => Ok(GroupElement { a: C64::new(c, 0.0), b: C64::new(0.0, s) }),
        2 => Ok(GroupElement { a: C64::new(c, 0.0), b: C64::new(-s, 0.0) }),
        3 => Ok(GroupElement { a: C64::new(c, s), b: C64::new(0.0, 0.0) }),
        _ => Err(Error::Index(format!("rotation axis {j}"))),
    }
}

/// Closed form of `ω₃(φ) ω₂(θ) ω₃(ψ)` without range checks.
pub fn from_euler_unchecked(e: &EulerAngles) -> GroupElement {
    let (s, c) = (0.5 * e.theta).sin_cos();
    let a = C64::from_polar(c, 0.5 * (e.phi + e.psi));
    let b = C64::from_polar(-s, 0.5 * (e.phi - e.psi));
    GroupElement { a, b }
}

pub fn from_euler(e: &EulerAngles) -> Result<GroupElement> {
    e.check()?;
    Ok(from_euler_unchecked(e))
}

fn wrap(x: f64, lo: f64, period: f64) -> f64 {
    // into (lo, lo + period]
    let mut y = x - period * ((x - lo) / period).floor();
    if y <= lo {
        y += period;
    }
    if y > lo + period {
        y -= period;
    }
    y
}

/// Inverse of [`from_euler`]. On the degenerate chart (`θ ∈ {0, π}`) returns `φ = 0`.
pub fn to_euler(g: &GroupElement) -> EulerAngles {
    let (a, b) = (g.a, g.b);
    let theta = 2.0 * b.norm().atan2(a.norm());
    const EPS: f64 = 1e-15;
    if b.norm() <= EPS {
        // a = e^{iψ/2}
        let psi = wrap(2.0 * a.arg(), -2.0 * PI, 4.0 * PI);
        return EulerAngles { phi: 0.0, theta: 0.0, psi };
    }
    if a.norm() <= EPS {
        // b = −e^{−iψ/2}
        let psi = wrap(-2.0 * (-b).arg(), -2.0 * PI, 4.0 * PI);
        return EulerAngles { phi: 0.0, theta: PI, psi };
    }
    let s = 2.0 * a.arg(); // φ + ψ  (mod 4π)
    let d = 2.0 * (-b).arg(); // φ − ψ  (mod 4π)
    let phi0 = 0.5 * (s + d);
    let psi0 = 0.5 * (s - d);
    // The pair (φ, ψ) is defined modulo the lattice spanned by (2π, 2π) and (0, 4π).
    let phi = wrap(phi0, -PI, 2.0 * PI);
    let psi = wrap(psi0 + (phi - phi0), -2.0 * PI, 4.0 * PI);
    EulerAngles { phi, theta, psi }
}

/// Rodrigues formula `exp(X(z)) = I cos t + X(z) sin(t)/t`, `t = |z|/2`.
pub fn exp_su2(z: &AlgebraVector) -> GroupElement {
    let t = 0.5 * z.norm();
    let sinc = if t < 1e-8 { 1.0 - t * t / 6.0 } else { t.sin() / t };
    let x = z.matrix();
    let a = C64::new(t.cos(), 0.0) + x[0][0] * sinc;
    let b = x[0][1] * sinc;
    GroupElement { a, b }.renormalized()
}

/// Principal logarithm, `|z|/2 ∈ [0, π)`. Fails at `−I`.
pub fn log_su2(g: &GroupElement) -> Result<AlgebraVector> {
    let (a, b) = (g.a, g.b);
    let sin_t = (a.im * a.im + b.norm_sqr()).sqrt();
    let t = sin_t.atan2(a.re);
    if PI - t < 1e-12 {
        return Err(Error::BranchPoint);
    }
    let k = if sin_t < 1e-8 { 1.0 + t * t / 6.0 } else { t / sin_t };
    Ok(AlgebraVector::new(2.0 * b.im * k, -2.0 * b.re * k, 2.0 * a.im * k))
}

/// Matrix exponential of `X(z)` by scaling and squaring with a Taylor core.
/// Independent of the Rodrigues formula; used as a reference.
pub fn exp_series(z: &AlgebraVector) -> [[C64; 2]; 2] {
    let x = z.matrix();
    let n = z.norm();
    let mut k = 0;
    while n / 2f64.powi(k) > 0.25 {
        k += 1;
    }
    let scale = 2f64.powi(-k);
    let xs = [[x[0][0] * scale, x[0][1] * scale], [x[1][0] * scale, x[1][1] * scale]];
    let mut out = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
    let mut term = out;
    for p in 1..20 {
        term = mul2(&term, &xs);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= p as f64;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..k {
        out = mul2(&out, &out);
    }
    out
}

pub(crate) fn mul2(x: &[[C64; 2]; 2], y: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    out
}

/// `e^{iθ}` helper used by other modules.
pub(crate) fn cis(t: f64) -> C64 {
    C64::from_polar(1.0, t)
}
