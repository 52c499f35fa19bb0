//! Fibered N×N matrix realizations of the rational torus over the
//! quasi-momentum torus.
//!
//! Every generator pair has the shape `U = e^{i2πx_u}·𝕌_N^a`,
//! `V = e^{i2πx_v}·𝕍_N(e^{i2πx_λ})^b`, so monomials `Uⁿ Vᵐ` are weighted
//! permutation matrices with closed-form entries.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{root_of_unity, AlgebraElement, Theta};
use crate::arithmetic::WeylContext;
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// A point of the quasi-momentum torus (not necessarily reduced).
pub type KPoint = [f64; 2];

#[inline]
pub(crate) fn cis(turns: f64) -> Complex64 {
    let t = turns - turns.round();
    if t == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    Complex64::from_polar(1.0, 2.0 * PI * t)
}

/// `λ·diag(1, e^{i2π/q}, …, e^{i2π(q−1)/q})`.
pub fn clock_matrix(q: usize, lambda: Complex64) -> CMatrix {
    let mut out = CMatrix::zeros(q, q);
    for j in 0..q {
        out[(j, j)] = lambda * root_of_unity(j as i64, q as i64);
    }
    out
}

/// Ones on the subdiagonal and `λ` in the top-right corner.
pub fn shift_matrix(q: usize, lambda: Complex64) -> CMatrix {
    let mut out = CMatrix::zeros(q, q);
    for j in 0..q.saturating_sub(1) {
        out[(j + 1, j)] = Complex64::new(1.0, 0.0);
    }
    out[(0, q - 1)] += lambda;
    out
}

/// Ones on the superdiagonal and `e^{i2πqk₁}` in the bottom-left corner.
pub fn twist_matrix(ctx: &WeylContext, k1: f64) -> CMatrix {
    let n = ctx.dim();
    let mut out = CMatrix::zeros(n, n);
    for j in 0..n.saturating_sub(1) {
        out[(j, j + 1)] = Complex64::new(1.0, 0.0);
    }
    out[(n - 1, 0)] += cis(ctx.q as f64 * k1);
    out
}

/// Transition acting on matrix fields across the `k₂` seam:
/// `π_{k+(0,1)}(a) = T π_k(a) T⁻¹` with `T` the entrywise conjugate of [`twist_matrix`].
pub fn seam_transition(ctx: &WeylContext, k1: f64) -> CMatrix {
    twist_matrix(ctx, k1).map(|z| z.conj())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RepKind {
    /// Pseudo-periodic in `k₂`, glued by [`seam_transition`].
    Weyl,
    /// Conjugated reference pair `e^{i2πk₂}𝕌^{qM}`, `e^{i2πk₁}𝕍^{d_r}`; fully periodic.
    Reference,
    /// Un-conjugated reference pair `e^{i2πk₂}𝕌^{qM}` with the Weyl `V(k)`; fully periodic.
    ReferencePullback,
}

impl RepKind {
    pub fn name(&self) -> &'static str {
        match self {
            RepKind::Weyl => "weyl",
            RepKind::Reference => "reference",
            RepKind::ReferencePullback => "reference-pullback",
        }
    }

    pub fn is_periodic(&self) -> bool {
        !matches!(self, RepKind::Weyl)
    }
}

/// Closed-form data of `U = e^{i2πx_u}𝕌^a`, `V = e^{i2πx_v}𝕍(e^{i2πx_λ})^b`.
#[derive(Clone, Copy, Debug)]
struct Generators {
    n: i64,
    x_u: f64,
    a: i64,
    x_v: f64,
    x_lambda: f64,
    b: i64,
}

impl Generators {
    /// Add `c·Uᵖ Vˢ` into `out`.
    fn accumulate(&self, out: &mut CMatrix, p: i64, s: i64, c: Complex64) {
        let n = self.n;
        let scalar = c * cis(self.x_u * p as f64) * cis(self.x_v * s as f64);
        let shift = self.b as i128 * s as i128;
        let clock = (self.a as i128 * p as i128).rem_euclid(n as i128) as i64;
        for j in 0..n {
            // 𝕍(λ)^d e_j = λ^{⌊(j+d)/N⌋} e_{(j+d) mod N}
            let total = j as i128 + shift;
            let wraps = total.div_euclid(n as i128);
            let row = total.rem_euclid(n as i128) as i64;
            let lam = cis(self.x_lambda * wraps as f64);
            let diag = root_of_unity(((clock as i128 * row as i128) % n as i128) as i64, n);
            out[(row as usize, j as usize)] += scalar * lam * diag;
        }
    }

    fn dense(&self, p: i64, s: i64) -> CMatrix {
        let n = self.n as usize;
        let mut out = CMatrix::zeros(n, n);
        self.accumulate(&mut out, p, s, Complex64::new(1.0, 0.0));
        out
    }
}

/// A rule `k ↦ (U(k), V(k))` of N×N unitaries for a fixed Weyl context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FiberedRep {
    pub ctx: WeylContext,
    pub kind: RepKind,
}

pub fn weyl_fibered_rep(ctx: WeylContext) -> FiberedRep {
    FiberedRep { ctx, kind: RepKind::Weyl }
}

pub fn reference_fibered_rep(ctx: WeylContext) -> FiberedRep {
    FiberedRep { ctx, kind: RepKind::Reference }
}

impl FiberedRep {
    pub fn new(ctx: WeylContext, kind: RepKind) -> Self {
        Self { ctx, kind }
    }

    pub fn dim(&self) -> usize {
        self.ctx.dim()
    }

    fn generators(&self, k: KPoint) -> Generators {
        let c = &self.ctx;
        let a = c.q * c.m;
        let [k1, k2] = k;
        let (x_u, x_v, x_lambda) = match self.kind {
            RepKind::Weyl => (c.m0 as f64 * k2 / c.n as f64, c.n_r as f64 * k1, c.q as f64 * k1),
            RepKind::Reference => (k2, k1, 0.0),
            RepKind::ReferencePullback => (k2, c.n_r as f64 * k1, c.q as f64 * k1),
        };
        Generators { n: c.n, x_u, a, x_v, x_lambda, b: c.d_r }
    }

    /// `(U(k), V(k))` from the closed formulas at `k` as given (no reduction).
    pub fn generators_raw(&self, k: KPoint) -> (CMatrix, CMatrix) {
        let g = self.generators(k);
        (g.dense(1, 0), g.dense(0, 1))
    }

    /// `Σ a_{n,m} U(k)ⁿ V(k)ᵐ` from the closed formulas at `k` as given.
    pub fn evaluate_raw(&self, a: &AlgebraElement, k: KPoint) -> Result<CMatrix> {
        self.check_theta(a)?;
        let g = self.generators(k);
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for ((p, s), c) in a.terms() {
            g.accumulate(&mut out, p, s, c);
        }
        Ok(out)
    }

    /// `π_k(a)` with `k` reduced to `[0,1)²`; for the Weyl kind the
    /// wrap in `k₂` is applied through the seam transition.
    pub fn evaluate_at_k(&self, a: &AlgebraElement, k: KPoint) -> Result<CMatrix> {
        let (k0, wraps) = reduce(k);
        let base = self.evaluate_raw(a, k0)?;
        if self.kind.is_periodic() || wraps[1] == 0 {
            return Ok(base);
        }
        let t = self.seam_power(k0[0], wraps[1]);
        let t_inv = t.adjoint();
        Ok(&t * base * t_inv)
    }

    /// `T(k₁)^w` for the seam transition (unitary, so negative powers are adjoints).
    fn seam_power(&self, k1: f64, w: i64) -> CMatrix {
        let t = seam_transition(&self.ctx, k1);
        let base = if w < 0 { t.adjoint() } else { t };
        let mut out = CMatrix::identity(self.dim(), self.dim());
        for _ in 0..w.unsigned_abs() {
            out = &base * out;
        }
        out
    }

    /// Max Frobenius residual of the boundary rule for shifts `(1,0)` and `(0,1)`:
    /// plain periodicity, except the Weyl kind's `k₂` shift which is conjugated
    /// by the seam transition.
    pub fn check_pseudoperiodicity(&self, a: &AlgebraElement, k: KPoint) -> Result<f64> {
        let here = self.evaluate_raw(a, k)?;
        let right = self.evaluate_raw(a, [k[0] + 1.0, k[1]])?;
        let up = self.evaluate_raw(a, [k[0], k[1] + 1.0])?;
        let expected_up = match self.kind {
            RepKind::Weyl => {
                let t = seam_transition(&self.ctx, k[0]);
                &t * &here * t.adjoint()
            }
            _ => here.clone(),
        };
        Ok((right - &here).norm().max((up - expected_up).norm()))
    }

    /// `‖U V − e^{i2πM/N} V U‖_F`.
    pub fn commutation_residual(&self, k: KPoint) -> f64 {
        let (u, v) = self.generators_raw(k);
        let phase = self.ctx.theta.phase(1);
        (&u * &v - (&v * &u) * phase).norm()
    }

    /// `max(‖UU† − I‖_F, ‖VV† − I‖_F)`.
    pub fn unitarity_residual(&self, k: KPoint) -> f64 {
        let (u, v) = self.generators_raw(k);
        let id = CMatrix::identity(self.dim(), self.dim());
        (&u * u.adjoint() - &id).norm().max((&v * v.adjoint() - &id).norm())
    }

    /// Scalars `(λ_U, λ_V)` with `U(k)^N = λ_U·I` and `V(k)^N = λ_V·I`.
    pub fn expected_powers(&self, k: KPoint) -> (Complex64, Complex64) {
        let c = &self.ctx;
        let [k1, k2] = k;
        match self.kind {
            RepKind::Weyl => (cis(c.m0 as f64 * k2), cis(k1)),
            RepKind::Reference => (cis(c.n as f64 * k2), cis(c.n as f64 * k1)),
            RepKind::ReferencePullback => (cis(c.n as f64 * k2), cis(k1)),
        }
    }

    /// Max Frobenius residual of the N-th power identities, using repeated
    /// dense multiplication rather than the closed forms.
    pub fn power_residual(&self, k: KPoint) -> f64 {
        let (u, v) = self.generators_raw(k);
        let n = self.dim();
        let id = CMatrix::identity(n, n);
        let (lu, lv) = self.expected_powers(k);
        let pow = |m: &CMatrix| {
            let mut acc = id.clone();
            for _ in 0..n {
                acc = &acc * m;
            }
            acc
        };
        (pow(&u) - &id * lu).norm().max((pow(&v) - &id * lv).norm())
    }

    fn check_theta(&self, a: &AlgebraElement) -> Result<()> {
        match a.theta() {
            Theta::Rational(t) if t == self.ctx.theta => Ok(()),
            other => Err(Error::ThetaMismatch { left: other.to_string(), right: self.ctx.theta.to_string() }),
        }
    }
}

/// Split `k` into its `[0,1)²` representative and the integer shift.
pub fn reduce(k: KPoint) -> (KPoint, [i64; 2]) {
    let f = |x: f64| {
        let w = x.floor();
        let mut r = x - w;
        let mut w = w as i64;
        if r >= 1.0 {
            r -= 1.0;
            w += 1;
        }
        (r, w)
    };
    let (r1, w1) = f(k[0]);
    let (r2, w2) = f(k[1]);
    ([r1, r2], [w1, w2])
}

/// Row-major `[[re, im], …]` rows for debugging dumps.
pub fn matrix_to_json(m: &CMatrix) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> =
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
    serde_json::json!(rows)
}
