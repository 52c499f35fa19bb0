//! Twisted Laurent polynomials in the generators `u`, `v` of the
//! noncommutative torus, with `u v = e^{i2πθ} v u`.
//!
//! An element is stored as a sparse map `(n, m) -> a_{n,m}` meaning
//! `Σ a_{n,m} uⁿ vᵐ`, always with u-powers to the left of v-powers.
//! Products use the reordering rule
//!
//! ```text
//! (uⁿ vᵐ)(uᵖ vˢ) = e^{-i2πθ·m·p} uⁿ⁺ᵖ vᵐ⁺ˢ
//! ```
//!
//! For rational θ = M/N every phase `e^{i2πθk}` is evaluated from the
//! residue `k·M mod N`, so twist phases are exact N-th roots of unity.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold on [`projection_defect`] when a caller needs a projection.
pub const PROJECTION_TOLERANCE: f64 = 1e-10;

/// θ = M/N with N ≥ 1 and gcd(|M|, N) = 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RationalTheta {
    m: i64,
    n: i64,
}

impl RationalTheta {
    pub fn new(m: i64, n: i64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidTheta { m, n, reason: "denominator must be positive" });
        }
        if gcd(m, n) != 1 {
            return Err(Error::InvalidTheta { m, n, reason: "numerator and denominator must be coprime" });
        }
        Ok(Self { m, n })
    }

    #[inline]
    pub fn numerator(&self) -> i64 {
        self.m
    }

    #[inline]
    pub fn denominator(&self) -> i64 {
        self.n
    }

    pub fn value(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// `e^{i2πθk}` computed from `k·M mod N`.
    pub fn phase(&self, k: i64) -> Complex64 {
        let n = self.n as i128;
        let residue = ((k as i128) * (self.m as i128)).rem_euclid(n);
        root_of_unity(residue as i64, self.n)
    }
}

impl fmt::Display for RationalTheta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.m, self.n)
    }
}

impl FromStr for RationalTheta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidTheta { m: 0, n: 0, reason: "expected M/N with integer M and N" };
        let (m, n) = s.trim().split_once('/').ok_or_else(bad)?;
        let m = m.trim().parse::<i64>().map_err(|_| bad())?;
        let n = n.trim().parse::<i64>().map_err(|_| bad())?;
        RationalTheta::new(m, n)
    }
}

/// Deformation parameter: exact rational, or a bare double for the
/// irrational extension (no exact-phase shortcuts in that mode).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Theta {
    Rational(RationalTheta),
    Irrational(f64),
}

impl Theta {
    pub fn value(&self) -> f64 {
        match self {
            Theta::Rational(t) => t.value(),
            Theta::Irrational(x) => *x,
        }
    }

    pub fn phase(&self, k: i64) -> Complex64 {
        match self {
            Theta::Rational(t) => t.phase(k),
            Theta::Irrational(x) => Complex64::from_polar(1.0, 2.0 * PI * x * k as f64),
        }
    }

    pub fn as_rational(&self) -> Option<RationalTheta> {
        match self {
            Theta::Rational(t) => Some(*t),
            Theta::Irrational(_) => None,
        }
    }

    fn same_as(&self, other: &Theta) -> bool {
        match (self, other) {
            (Theta::Rational(a), Theta::Rational(b)) => a == b,
            (Theta::Irrational(a), Theta::Irrational(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl From<RationalTheta> for Theta {
    fn from(t: RationalTheta) -> Self {
        Theta::Rational(t)
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theta::Rational(t) => t.fmt(f),
            Theta::Irrational(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// ∂̄₁, scaling uⁿvᵐ by i2πn.
    First,
    /// ∂̄₂, scaling uⁿvᵐ by i2πm.
    Second,
}

/// Finite sum `Σ a_{n,m} uⁿ vᵐ` over a fixed θ.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    theta: Theta,
    coeffs: BTreeMap<(i64, i64), Complex64>,
}

impl AlgebraElement {
    pub fn zero(theta: impl Into<Theta>) -> Self {
        Self { theta: theta.into(), coeffs: BTreeMap::new() }
    }

    pub fn one(theta: impl Into<Theta>) -> Self {
        Self::monomial(theta, 0, 0, Complex64::new(1.0, 0.0))
    }

    pub fn monomial(theta: impl Into<Theta>, n: i64, m: i64, c: Complex64) -> Self {
        let mut e = Self::zero(theta);
        e.add_term(n, m, c);
        e
    }

    pub fn from_terms<I>(theta: impl Into<Theta>, terms: I) -> Self
    where
        I: IntoIterator<Item = ((i64, i64), Complex64)>,
    {
        let mut e = Self::zero(theta);
        for ((n, m), c) in terms {
            e.add_term(n, m, c);
        }
        e
    }

    /// `u + u* + v + v*`.
    pub fn hofstadter(theta: impl Into<Theta>) -> Self {
        let one = Complex64::new(1.0, 0.0);
        Self::from_terms(theta, [((1, 0), one), ((-1, 0), one), ((0, 1), one), ((0, -1), one)])
    }

    pub fn theta(&self) -> Theta {
        self.theta
    }

    pub fn coeff(&self, n: i64, m: i64) -> Complex64 {
        self.coeffs.get(&(n, m)).copied().unwrap_or_default()
    }

    /// Terms in lexicographic `(n, m)` order.
    pub fn terms(&self) -> impl Iterator<Item = ((i64, i64), Complex64)> + '_ {
        self.coeffs.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// max(|n| + |m|) over the support; 0 for the zero element.
    pub fn degree(&self) -> i64 {
        self.coeffs.keys().map(|(n, m)| n.abs() + m.abs()).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn add_term(&mut self, n: i64, m: i64, c: Complex64) {
        if c == Complex64::default() {
            return;
        }
        let slot = self.coeffs.entry((n, m)).or_default();
        *slot += c;
        if *slot == Complex64::default() {
            self.coeffs.remove(&(n, m));
        }
    }

    fn check_theta(&self, other: &Self) -> Result<()> {
        if self.theta.same_as(&other.theta) {
            Ok(())
        } else {
            Err(Error::ThetaMismatch { left: self.theta.to_string(), right: other.theta.to_string() })
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_theta(other)?;
        let mut out = self.clone();
        for ((n, m), c) in other.terms() {
            out.add_term(n, m, c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_terms(self.theta, self.terms().map(|(k, c)| (k, c * s)))
    }

    /// Twisted convolution product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_theta(other)?;
        let mut out = Self::zero(self.theta);
        for ((n, m), a) in self.terms() {
            for ((p, s), b) in other.terms() {
                let phase = self.theta.phase(-m * p);
                out.add_term(n + p, m + s, a * b * phase);
            }
        }
        Ok(out)
    }

    /// `(uⁿvᵐ)* = e^{-i2πθ·nm} u⁻ⁿ v⁻ᵐ`, extended antilinearly.
    pub fn star(&self) -> Self {
        Self::from_terms(
            self.theta,
            self.terms().map(|((n, m), c)| ((-n, -m), c.conj() * self.theta.phase(-n * m))),
        )
    }

    /// Noncommutative integral: the `a_{0,0}` coefficient.
    pub fn nc_integral(&self) -> Complex64 {
        self.coeff(0, 0)
    }

    pub fn derivation(&self, axis: Axis) -> Self {
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        Self::from_terms(
            self.theta,
            self.terms().map(|((n, m), c)| {
                let k = match axis {
                    Axis::First => n,
                    Axis::Second => m,
                };
                ((n, m), c * two_pi_i * k as f64)
            }),
        )
    }

    /// Connes formula `(1/i2π) ∮ p (∂̄₁p ∂̄₂p − ∂̄₂p ∂̄₁p)`, evaluated on any element.
    pub fn connes_chern(&self) -> Complex64 {
        let d1 = self.derivation(Axis::First);
        let d2 = self.derivation(Axis::Second);
        // θ is shared by construction, so the products cannot fail
        let comm = d1.mul(&d2).and_then(|a| a.sub(&d2.mul(&d1)?)).expect("same theta");
        let integrand = self.mul(&comm).expect("same theta");
        integrand.nc_integral() / Complex64::new(0.0, 2.0 * PI)
    }

    /// `max|p·p − p| + max|p* − p|` over coefficients.
    pub fn projection_defect(&self) -> f64 {
        let sq = self.mul(self).expect("same theta");
        let idem = sq.sub(self).expect("same theta").max_abs();
        let adj = self.star().sub(self).expect("same theta").max_abs();
        idem + adj
    }

    pub fn self_adjoint_defect(&self) -> f64 {
        self.star().sub(self).expect("same theta").max_abs()
    }
}

pub fn hofstadter_element(theta: RationalTheta) -> AlgebraElement {
    AlgebraElement::hofstadter(theta)
}

pub fn projection_defect(p: &AlgebraElement) -> f64 {
    p.projection_defect()
}

/// `e^{i2πk/n}` for `0 ≤ k < n`, with the exact values at quarter turns.
pub(crate) fn root_of_unity(k: i64, n: i64) -> Complex64 {
    let k = k.rem_euclid(n);
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if 2 * k == n {
        return Complex64::new(-1.0, 0.0);
    }
    if 4 * k == n {
        return Complex64::new(0.0, 1.0);
    }
    if 4 * k == 3 * n {
        return Complex64::new(0.0, -1.0);
    }
    Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
}

pub(crate) fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ThetaWire {
    Rational {
        #[serde(rename = "M")]
        m: i64,
        #[serde(rename = "N")]
        n: i64,
    },
    Irrational {
        value: f64,
    },
}

#[derive(Serialize, Deserialize)]
struct TermWire {
    n: i64,
    m: i64,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct ElementWire {
    theta: ThetaWire,
    coeffs: Vec<TermWire>,
}

impl Serialize for AlgebraElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let theta = match self.theta {
            Theta::Rational(t) => ThetaWire::Rational { m: t.m, n: t.n },
            Theta::Irrational(value) => ThetaWire::Irrational { value },
        };
        let coeffs = self.terms().map(|((n, m), c)| TermWire { n, m, re: c.re, im: c.im }).collect();
        ElementWire { theta, coeffs }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AlgebraElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = ElementWire::deserialize(d)?;
        let theta = match wire.theta {
            ThetaWire::Rational { m, n } => {
                Theta::Rational(RationalTheta::new(m, n).map_err(serde::de::Error::custom)?)
            }
            ThetaWire::Irrational { value } => Theta::Irrational(value),
        };
        Ok(Self::from_terms(theta, wire.coeffs.into_iter().map(|t| ((t.n, t.m), Complex64::new(t.re, t.im)))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn third() -> RationalTheta {
        RationalTheta::new(1, 3).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn u(t: RationalTheta) -> AlgebraElement {
        AlgebraElement::monomial(t, 1, 0, c(1.0, 0.0))
    }

    fn v(t: RationalTheta) -> AlgebraElement {
        AlgebraElement::monomial(t, 0, 1, c(1.0, 0.0))
    }

    fn single(e: &AlgebraElement) -> ((i64, i64), Complex64) {
        assert_eq!(e.len(), 1, "expected a single monomial, got {e:?}");
        e.terms().next().unwrap()
    }

    #[test]
    fn rational_theta_rejects_non_reduced() {
        assert!(RationalTheta::new(2, 4).is_err());
        assert!(RationalTheta::new(1, 0).is_err());
        assert!(RationalTheta::new(1, -3).is_err());
        assert!(RationalTheta::new(0, 1).is_ok());
        assert_eq!("3/7".parse::<RationalTheta>().unwrap(), RationalTheta::new(3, 7).unwrap());
        assert!("3".parse::<RationalTheta>().is_err());
    }

    #[test]
    fn exact_phase_reduction() {
        let t = RationalTheta::new(1, 4).unwrap();
        assert_eq!(t.phase(1), c(0.0, 1.0));
        assert_eq!(t.phase(2), c(-1.0, 0.0));
        assert_eq!(t.phase(-1), c(0.0, -1.0));
        assert_eq!(t.phase(4_000_000_000_004), c(1.0, 0.0));
    }

    #[test]
    fn v_times_u_picks_up_inverse_phase() {
        let t = third();
        let ((n, m), a) = single(&v(t).mul(&u(t)).unwrap());
        assert_eq!((n, m), (1, 1));
        let expected = Complex64::from_polar(1.0, -2.0 * PI / 3.0);
        assert_abs_diff_eq!(a.re, expected.re, epsilon = 1e-15);
        assert_abs_diff_eq!(a.im, expected.im, epsilon = 1e-15);
    }

    #[test]
    fn uv_squared() {
        let t = third();
        let uv = AlgebraElement::monomial(t, 1, 1, c(1.0, 0.0));
        let ((n, m), a) = single(&uv.mul(&uv).unwrap());
        assert_eq!((n, m), (2, 2));
        // uv·uv = u (vu) v = e^{-i2πθ} u²v²
        let expected = Complex64::from_polar(1.0, -2.0 * PI / 3.0);
        assert_abs_diff_eq!((a - expected).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn unit_is_neutral() {
        let t = third();
        let a = AlgebraElement::from_terms(t, [((2, -1), c(0.5, 1.0)), ((0, 3), c(-1.0, 0.25))]);
        assert_eq!(AlgebraElement::one(t).mul(&a).unwrap(), a);
        assert_eq!(a.mul(&AlgebraElement::one(t)).unwrap(), a);
    }

    #[test]
    fn mismatched_theta_is_rejected() {
        let a = u(third());
        let b = u(RationalTheta::new(1, 5).unwrap());
        assert!(matches!(a.mul(&b), Err(Error::ThetaMismatch { .. })));
        assert!(a.add(&b).is_err());
    }

    #[test]
    fn star_of_generators_and_monomials() {
        let t = third();
        let ((n, m), a) = single(&u(t).star());
        assert_eq!(((n, m), a), ((-1, 0), c(1.0, 0.0)));

        let uv = AlgebraElement::monomial(t, 1, 1, c(1.0, 0.0));
        let ((n, m), a) = single(&uv.star());
        assert_eq!((n, m), (-1, -1));
        assert_abs_diff_eq!((a - Complex64::from_polar(1.0, -2.0 * PI / 3.0)).norm(), 0.0, epsilon = 1e-15);

        let h = hofstadter_element(t);
        assert_eq!(h.star(), h);
    }

    #[test]
    fn integral_picks_constant_term() {
        let t = third();
        assert_eq!(AlgebraElement::monomial(t, 3, -2, c(1.0, 0.0)).nc_integral(), c(0.0, 0.0));
        assert_eq!(hofstadter_element(t).nc_integral(), c(0.0, 0.0));
        let uv = AlgebraElement::monomial(t, 1, 1, c(1.0, 0.0));
        let prod = uv.mul(&uv.star()).unwrap();
        assert_abs_diff_eq!((prod.nc_integral() - c(1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn derivations_scale_monomials() {
        let t = third();
        let ((_, _), a) = single(&u(t).derivation(Axis::First));
        assert_abs_diff_eq!((a - c(0.0, 2.0 * PI)).norm(), 0.0, epsilon = 1e-15);
        assert!(AlgebraElement::one(t).derivation(Axis::First).is_empty());
        let e = AlgebraElement::monomial(t, 2, 3, c(1.0, 0.0));
        let ((_, _), a) = single(&e.derivation(Axis::Second));
        assert_abs_diff_eq!((a - c(0.0, 6.0 * PI)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn connes_chern_trivial_cases() {
        let t = third();
        assert_eq!(AlgebraElement::one(t).connes_chern(), c(0.0, 0.0));
        assert_eq!(AlgebraElement::zero(t).connes_chern(), c(0.0, 0.0));
        let upv = u(t).add(&v(t)).unwrap();
        assert_abs_diff_eq!(upv.connes_chern().norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hofstadter_coefficients() {
        let h = hofstadter_element(third());
        let support: Vec<_> = h.terms().collect();
        assert_eq!(
            support,
            vec![((-1, 0), c(1.0, 0.0)), ((0, -1), c(1.0, 0.0)), ((0, 1), c(1.0, 0.0)), ((1, 0), c(1.0, 0.0))]
        );
        assert_eq!(h.degree(), 1);
    }

    #[test]
    fn projection_defect_examples() {
        let t = third();
        assert_eq!(AlgebraElement::one(t).projection_defect(), 0.0);
        assert!(u(t).projection_defect() > 0.5);
        // ½(1 + u + u⁻¹): self-adjoint, but p² − p = ¼(u² + u⁻²) + ¼·𝟙 + 0·u
        let half = c(0.5, 0.0);
        let p = AlgebraElement::from_terms(t, [((0, 0), half), ((1, 0), half), ((-1, 0), half)]);
        assert_abs_diff_eq!(p.projection_defect(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn json_layout_is_sorted() {
        let t = third();
        let a = AlgebraElement::from_terms(t, [((1, 0), c(1.0, 0.0)), ((-1, 2), c(0.0, -2.0))]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(
            s,
            r#"{"theta":{"M":1,"N":3},"coeffs":[{"n":-1,"m":2,"re":0.0,"im":-2.0},{"n":1,"m":0,"re":1.0,"im":0.0}]}"#
        );
        let back: AlgebraElement = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
    }
}
