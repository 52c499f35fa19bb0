//! Lattice Chern numbers of projector fields, numeric trace and Connes–Chern
//! character through the reference representation, and the TKNN verifiers.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::algebra::{gcd, AlgebraElement};
use crate::arithmetic::{tknn_rhs_value, TknnRecord, WeylContext};
use crate::error::{Error, Result};
use crate::representations::{seam_transition, CMatrix, FiberedRep, RepKind};
use crate::spectral::{bands_on_grid, fermi_projector_field, BandData, Boundary, Grid, ProjectorField};

/// Integer rounding threshold on lattice sums.
pub const ROUNDING_THRESHOLD: f64 = 0.01;
/// Link overlaps below this magnitude mean the grid cannot resolve the field.
pub const LINK_THRESHOLD: f64 = 1e-6;
/// Allowed gap between `t` and `q[∮p + (θ − r/q)C̄₁(p)]` before rounding.
pub const FORMULA_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernResult {
    pub value: i64,
    pub raw: f64,
    pub residual: f64,
    pub grid: usize,
}

impl ChernResult {
    fn from_raw(raw: f64, grid: usize) -> Result<Self> {
        let value = raw.round();
        let residual = (raw - value).abs();
        if !residual.is_finite() || residual >= ROUNDING_THRESHOLD {
            return Err(Error::NotQuantized { raw, threshold: ROUNDING_THRESHOLD });
        }
        Ok(Self { value: value as i64, raw, residual, grid })
    }
}

fn link(a: &CMatrix, b: &CMatrix, i: usize, j: usize) -> Result<Complex64> {
    if a.ncols() == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let z = (a.adjoint() * b).determinant();
    let magnitude = z.norm();
    if magnitude.is_nan() || magnitude < LINK_THRESHOLD {
        return Err(Error::GridTooCoarse { i, j, magnitude });
    }
    Ok(z / magnitude)
}

/// Pairwise summation in index order, so the result does not depend on threading.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Plaquette sum for a field closed periodically in `k₁` and, in `k₂`,
/// either periodically or through `transition(k₁)` acting on frames.
fn lattice_sum(field: &ProjectorField, transition: Option<&(dyn Fn(f64) -> CMatrix + Sync)>) -> Result<f64> {
    let grid = field.grid;
    let (g1, g2) = (grid.g1, grid.g2);
    let frame = |i: usize, j: usize| &field.frames[grid.index(i, j)];

    // seam frames F(k₁, 1) := T(k₁) F(k₁, 0)
    let seam: Vec<CMatrix> = (0..g1)
        .map(|i| match transition {
            Some(t) => t(grid.k(i, 0)[0]) * frame(i, 0),
            None => frame(i, 0).clone(),
        })
        .collect();

    let links: Vec<(Complex64, Complex64)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / g2, idx % g2);
            let here = frame(i, j);
            let l1 = link(here, frame(i + 1, j), i, j)?;
            let up = if j + 1 < g2 { frame(i, j + 1) } else { &seam[i] };
            let l2 = link(here, up, i, j)?;
            Ok((l1, l2))
        })
        .collect::<Result<_>>()?;
    let l1 = |i: usize, j: usize| links[grid.index(i, j)].0;
    let l2 = |i: usize, j: usize| links[grid.index(i, j)].1;

    // the closing row reuses the k₂ = 0 horizontal links, which is the chart
    // in which the seam links were expressed
    let angles: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let (i, j) = (idx / g2, idx % g2);
            let w = l1(i, j) * l2(i + 1, j) / (l1(i, j + 1) * l2(i, j));
            w.arg()
        })
        .collect();
    // orientation: the identity field on the twisted bundle gives +q
    Ok(-pairwise_sum(&angles) / (2.0 * PI))
}

fn require_periodic(field: &ProjectorField) -> Result<()> {
    match field.boundary {
        Boundary::Periodic => Ok(()),
        Boundary::Twisted(_) => Err(Error::WrongKind { expected: "periodic field", found: "twisted field" }),
    }
}

/// Lattice Chern number of a doubly periodic projector field.
pub fn fhs_chern(field: &ProjectorField) -> Result<ChernResult> {
    require_periodic(field)?;
    ChernResult::from_raw(lattice_sum(field, None)?, field.grid.g1)
}

/// Lattice Chern number of a subbundle of the twisted ambient bundle; links
/// across `k₂ = 1` are transported by the seam transition.
pub fn fhs_chern_twisted(field: &ProjectorField, ctx: &WeylContext) -> Result<ChernResult> {
    if field.kind != RepKind::Weyl {
        return Err(Error::WrongKind { expected: "weyl", found: field.kind.name() });
    }
    if field.dim != ctx.dim() {
        return Err(Error::InvalidGrid(format!("field dimension {} does not match N = {}", field.dim, ctx.n)));
    }
    let ctx = *ctx;
    let t = move |k1: f64| seam_transition(&ctx, k1);
    ChernResult::from_raw(lattice_sum(field, Some(&t))?, field.grid.g1)
}

/// Grid average of `tr P / N`.
pub fn nc_integral_numeric(field: &ProjectorField) -> f64 {
    let traces: Vec<f64> = field.frames.iter().map(|f| f.norm_squared() / field.dim as f64).collect();
    pairwise_sum(&traces) / traces.len() as f64
}

/// `C̄₁(p)` from a reference-representation field. The conjugated reference
/// field carries `N·C̄₁`, so its lattice value is divided by `N` (exact
/// divisibility is required); the un-conjugated one carries `C̄₁` itself.
pub fn connes_chern_numeric(field: &ProjectorField) -> Result<ChernResult> {
    match field.kind {
        RepKind::ReferencePullback => fhs_chern(field),
        RepKind::Reference => {
            let full = fhs_chern(field)?;
            let n = field.dim as i64;
            let raw = full.raw / n as f64;
            if full.value % n != 0 {
                return Err(Error::NotQuantized { raw, threshold: ROUNDING_THRESHOLD });
            }
            Ok(ChernResult { value: full.value / n, raw, residual: (raw - (full.value / n) as f64).abs(), grid: full.grid })
        }
        RepKind::Weyl => Err(Error::WrongKind { expected: "reference", found: "weyl" }),
    }
}

/// First Chern number of the ambient bundle `E_{N,q}`.
pub fn ambient_chern_analytic(n: i64, q: i64) -> Result<i64> {
    if n < 1 || q < 1 {
        return Err(Error::InvalidTwist { q, r: 0, reason: "N and q must be positive" });
    }
    let g = gcd(n, q);
    if g != 1 {
        return Err(Error::DegenerateRepresentation { n, q, gcd: g });
    }
    Ok(q)
}

/// `P(n₁k₁ mod 1, n₂k₂ mod 1)` sampled on the same grid.
pub fn pullback_field(field: &ProjectorField, n1: i64, n2: i64) -> Result<ProjectorField> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::ZeroMultiplier { n1, n2 });
    }
    require_periodic(field)?;
    let grid = field.grid;
    let frames = (0..grid.len())
        .map(|idx| {
            let (i, j) = (idx / grid.g2, idx % grid.g2);
            let si = (n1 as i128 * i as i128).rem_euclid(grid.g1 as i128) as usize;
            let sj = (n2 as i128 * j as i128).rem_euclid(grid.g2 as i128) as usize;
            field.frames[grid.index(si, sj)].clone()
        })
        .collect();
    Ok(ProjectorField { frames, ..field.clone() })
}

/// Pass/fail flags of the three identities checked per gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TknnChecks {
    /// `N t + M0 s = q d`.
    pub linear: bool,
    /// `|t − q[∮p + (θ − r/q)C̄₁]| < 1e-3`.
    pub formula: bool,
    /// `N t = M0 C₁(L_ref) + Rk·q`.
    pub duality: bool,
    /// `C₁(L_ref)` from the un-conjugated field equals `C̄₁` from the conjugated one.
    pub reference_routes: bool,
}

impl TknnChecks {
    pub fn all(&self) -> bool {
        self.linear && self.formula && self.duality && self.reference_routes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TknnVerification {
    pub theta: String,
    pub q: i64,
    pub r: i64,
    pub m0: i64,
    pub grid: usize,
    pub fermi: f64,
    pub rank: usize,
    pub ncint: f64,
    pub rhs: f64,
    /// Twisted lattice Chern number of the Weyl field.
    pub t: ChernResult,
    /// Connes–Chern character from the conjugated reference field.
    pub connes_chern: ChernResult,
    /// Chern number of `L_ref(p)` from the un-conjugated reference field.
    pub reference_chern: ChernResult,
    pub record: TknnRecord,
    pub checks: TknnChecks,
}

impl TknnVerification {
    pub fn passed(&self) -> bool {
        self.checks.all()
    }
}

/// Band data of `h_θ` for the three realizations of one context, reused
/// across Fermi levels.
pub struct TknnVerifier {
    pub ctx: WeylContext,
    pub weyl: BandData,
    pub reference: BandData,
    pub pullback: BandData,
}

impl TknnVerifier {
    pub fn new(ctx: WeylContext, grid: Grid) -> Result<Self> {
        let h = AlgebraElement::hofstadter(ctx.theta);
        Self::for_element(ctx, &h, grid)
    }

    pub fn for_element(ctx: WeylContext, a: &AlgebraElement, grid: Grid) -> Result<Self> {
        let build = |kind| bands_on_grid(&FiberedRep::new(ctx, kind), a, grid);
        Ok(Self {
            ctx,
            weyl: build(RepKind::Weyl)?,
            reference: build(RepKind::Reference)?,
            pullback: build(RepKind::ReferencePullback)?,
        })
    }

    pub fn verify(&self, g: i64, fermi: f64) -> Result<TknnVerification> {
        let ctx = &self.ctx;
        let weyl = fermi_projector_field(&self.weyl, fermi)?;
        let reference = fermi_projector_field(&self.reference, fermi)?;
        let pullback = fermi_projector_field(&self.pullback, fermi)?;
        if weyl.rank != reference.rank || weyl.rank != pullback.rank {
            let distance = 0.0;
            return Err(Error::GapViolation { fermi, distance });
        }

        let t = fhs_chern_twisted(&weyl, ctx)?;
        let connes_chern = connes_chern_numeric(&reference)?;
        let reference_chern = connes_chern_numeric(&pullback)?;
        let ncint = nc_integral_numeric(&reference);
        let d = weyl.rank as i64;
        let s = -connes_chern.value;

        let rhs = tknn_rhs_value(ncint, connes_chern.value, ctx.theta.value(), ctx.q, ctx.r);
        let residual = (t.raw - rhs).abs().max((rhs - t.value as f64).abs());
        let record = TknnRecord { g, d, t: t.value, s, fermi, residual };

        let (n, m0, q) = (ctx.n as i128, ctx.m0 as i128, ctx.q as i128);
        let checks = TknnChecks {
            linear: record.satisfies(ctx),
            formula: residual < FORMULA_TOLERANCE,
            duality: n * t.value as i128 == m0 * reference_chern.value as i128 + d as i128 * q,
            reference_routes: reference_chern.value == connes_chern.value,
        };
        Ok(TknnVerification {
            theta: ctx.theta.to_string(),
            q: ctx.q,
            r: ctx.r,
            m0: ctx.m0,
            grid: self.weyl.grid.g1,
            fermi,
            rank: weyl.rank,
            ncint,
            rhs,
            t,
            connes_chern,
            reference_chern,
            record,
            checks,
        })
    }
}

/// Full generalized-TKNN check of the Hofstadter projector below `fermi`.
pub fn verify_generalized_tknn(ctx: &WeylContext, fermi: f64, grid: usize) -> Result<TknnVerification> {
    TknnVerifier::new(*ctx, Grid::square(grid)?)?.verify(0, fermi)
}

/// Largest discrepancy between the symbolic trace / Connes formula of `a` and
/// grid averages of `(1/N) Tr` of its conjugated reference-representation
/// image, with `∂̄₁ ↔ ∂/∂k₂` and `∂̄₂ ↔ ∂/∂k₁` taken spectrally.
pub fn symbolic_numeric_crosscheck(a: &AlgebraElement, ctx: &WeylContext, grid: usize) -> Result<f64> {
    let deg = a.degree() as usize;
    if grid <= 3 * deg {
        return Err(Error::InvalidGrid(format!("grid {grid} must exceed 3 x degree {deg}")));
    }
    let g = Grid::square(grid)?;
    let rep = FiberedRep::new(*ctx, RepKind::Reference);
    let samples: Vec<CMatrix> =
        (0..g.len()).map(|idx| rep.evaluate_at_k(a, g.k(idx / g.g2, idx % g.g2))).collect::<Result<_>>()?;

    let d_k1 = spectral_derivative(&samples, g, 0);
    let d_k2 = spectral_derivative(&samples, g, 1);
    let n = ctx.n as f64;

    let traces: Vec<Complex64> = samples.iter().map(|m| m.trace() / n).collect();
    let integral = mean(&traces);

    let integrand: Vec<Complex64> = (0..g.len())
        .map(|idx| {
            let (p, d1, d2) = (&samples[idx], &d_k2[idx], &d_k1[idx]);
            (p * (d1 * d2 - d2 * d1)).trace() / n
        })
        .collect();
    let connes = mean(&integrand) / Complex64::new(0.0, 2.0 * PI);

    let di = (integral - a.nc_integral()).norm();
    let dc = (connes - a.connes_chern()).norm();
    Ok(di.max(dc))
}

fn mean(xs: &[Complex64]) -> Complex64 {
    let re: Vec<f64> = xs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = xs.iter().map(|z| z.im).collect();
    Complex64::new(pairwise_sum(&re), pairwise_sum(&im)) / xs.len() as f64
}

/// Exact derivative of a sampled trigonometric-polynomial matrix field along
/// `axis` (0 for `k₁`, 1 for `k₂`), valid below the Nyquist frequency.
fn spectral_derivative(samples: &[CMatrix], grid: Grid, axis: usize) -> Vec<CMatrix> {
    let len = if axis == 0 { grid.g1 } else { grid.g2 };
    let lines = grid.len() / len;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let (rows, cols) = samples[0].shape();
    let mut out = vec![CMatrix::zeros(rows, cols); samples.len()];
    let at = |line: usize, t: usize| {
        if axis == 0 {
            grid.index(t, line)
        } else {
            grid.index(line, t)
        }
    };
    let mut buf = vec![Complex64::default(); len];
    for line in 0..lines {
        for r in 0..rows {
            for c in 0..cols {
                for (t, slot) in buf.iter_mut().enumerate() {
                    *slot = samples[at(line, t)][(r, c)];
                }
                fwd.process(&mut buf);
                for (f, z) in buf.iter_mut().enumerate() {
                    let freq = if 2 * f < len {
                        f as f64
                    } else if 2 * f > len {
                        f as f64 - len as f64
                    } else {
                        0.0
                    };
                    *z *= Complex64::new(0.0, 2.0 * PI * freq) / len as f64;
                }
                inv.process(&mut buf);
                for (t, z) in buf.iter().enumerate() {
                    out[at(line, t)][(r, c)] = *z;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::RationalTheta;
    use crate::arithmetic::make_weyl_context;
    use crate::representations::{reference_fibered_rep, weyl_fibered_rep};
    use crate::spectral::{detect_gaps, DEFAULT_GAP_TOLERANCE};

    fn ctx(m: i64, n: i64, q: i64, r: i64) -> WeylContext {
        make_weyl_context(RationalTheta::new(m, n).unwrap(), q, r).unwrap()
    }

    fn grid(g: usize) -> Grid {
        Grid::square(g).unwrap()
    }

    fn gap1_field(kind: RepKind, c: WeylContext, g: usize) -> ProjectorField {
        let bd = bands_on_grid(&FiberedRep::new(c, kind), &AlgebraElement::hofstadter(c.theta), grid(g)).unwrap();
        let gaps = detect_gaps(&bd, DEFAULT_GAP_TOLERANCE).unwrap();
        fermi_projector_field(&bd, gaps.gaps[1].fermi).unwrap()
    }

    #[test]
    fn flat_fields_are_trivial() {
        let c = ctx(1, 3, 1, 0);
        let rep = reference_fibered_rep(c);
        assert_eq!(fhs_chern(&ProjectorField::coordinate(&rep, grid(8), 1)).unwrap().value, 0);
        assert_eq!(fhs_chern(&ProjectorField::identity(&rep, grid(8))).unwrap().value, 0);
        assert_eq!(fhs_chern(&ProjectorField::zero(&rep, grid(8))).unwrap().value, 0);
    }

    #[test]
    fn identity_on_twisted_bundle_gives_q() {
        for (m, n, q, r) in [(1, 3, 1, 0), (1, 3, 2, 1), (2, 5, 3, 1), (1, 1, 1, 0)] {
            let c = ctx(m, n, q, r);
            let f = ProjectorField::identity(&weyl_fibered_rep(c), grid(12));
            let res = fhs_chern_twisted(&f, &c).unwrap();
            assert_eq!(res.value, ambient_chern_analytic(n, q).unwrap(), "{m}/{n} ({q},{r})");
            assert!(res.residual < 1e-10);
        }
    }

    #[test]
    fn kind_guards() {
        let c = ctx(1, 3, 1, 0);
        let f = ProjectorField::identity(&weyl_fibered_rep(c), grid(4));
        assert!(matches!(fhs_chern(&f), Err(Error::WrongKind { .. })));
        assert!(matches!(pullback_field(&f, 1, 1), Err(Error::WrongKind { .. })));
        let g = ProjectorField::identity(&reference_fibered_rep(c), grid(4));
        assert!(matches!(fhs_chern_twisted(&g, &c), Err(Error::WrongKind { .. })));
        assert!(matches!(pullback_field(&g, 0, 1), Err(Error::ZeroMultiplier { .. })));
    }

    #[test]
    fn ambient_analytic() {
        assert_eq!(ambient_chern_analytic(3, 1).unwrap(), 1);
        assert_eq!(ambient_chern_analytic(5, 3).unwrap(), 3);
        assert_eq!(ambient_chern_analytic(1, 1).unwrap(), 1);
        assert!(ambient_chern_analytic(3, 0).is_err());
        assert!(ambient_chern_analytic(4, 2).is_err());
    }

    #[test]
    fn one_third_gap_one() {
        let c = ctx(1, 3, 1, 0);
        let un = gap1_field(RepKind::ReferencePullback, c, 16);
        assert_eq!(fhs_chern(&un).unwrap().value, -1);
        let conj = gap1_field(RepKind::Reference, c, 16);
        assert_eq!(fhs_chern(&conj).unwrap().value, -3);
        assert_eq!(connes_chern_numeric(&conj).unwrap().value, -1);
        assert!((nc_integral_numeric(&conj) - 1.0 / 3.0).abs() < 1e-10);

        let w = gap1_field(RepKind::Weyl, c, 16);
        assert_eq!(fhs_chern_twisted(&w, &c).unwrap().value, 0);
        let c2 = ctx(1, 3, 2, 1);
        let w = gap1_field(RepKind::Weyl, c2, 16);
        assert_eq!(fhs_chern_twisted(&w, &c2).unwrap().value, 1);
    }

    #[test]
    fn integral_of_trivial_fields() {
        let rep = reference_fibered_rep(ctx(1, 3, 1, 0));
        assert!((nc_integral_numeric(&ProjectorField::identity(&rep, grid(4))) - 1.0).abs() < 1e-15);
        assert_eq!(nc_integral_numeric(&ProjectorField::zero(&rep, grid(4))), 0.0);
        let f = ProjectorField::identity(&rep, grid(4));
        assert_eq!(connes_chern_numeric(&f).unwrap().value, 0);
    }

    #[test]
    fn pullback_scaling() {
        let c = ctx(1, 3, 1, 0);
        let f = gap1_field(RepKind::ReferencePullback, c, 24);
        assert_eq!(fhs_chern(&pullback_field(&f, 1, 1).unwrap()).unwrap().value, -1);
        assert_eq!(fhs_chern(&pullback_field(&f, 2, 1).unwrap()).unwrap().value, -2);
        assert_eq!(fhs_chern(&pullback_field(&f, 1, 3).unwrap()).unwrap().value, -3);
        assert_eq!(fhs_chern(&pullback_field(&f, -1, 1).unwrap()).unwrap().value, 1);
    }

    #[test]
    fn verifier_examples() {
        let c = ctx(1, 3, 1, 0);
        let v = TknnVerifier::new(c, grid(16)).unwrap();
        let gaps = detect_gaps(&v.weyl, DEFAULT_GAP_TOLERANCE).unwrap();
        let res = v.verify(1, gaps.gaps[1].fermi).unwrap();
        assert_eq!((res.record.t, res.record.s, res.record.d), (0, 1, 1));
        assert!(res.passed(), "{res:?}");

        let c = ctx(1, 3, 2, 1);
        let v = TknnVerifier::new(c, grid(16)).unwrap();
        let gaps = detect_gaps(&v.weyl, DEFAULT_GAP_TOLERANCE).unwrap();
        let res = v.verify(1, gaps.gaps[1].fermi).unwrap();
        assert_eq!((res.record.t, res.record.s, res.record.d), (1, 1, 1));
        assert!(res.passed());

        let top = v.verify(3, v.weyl.spectrum_max() + 1.0).unwrap();
        assert_eq!((top.record.t, top.record.s, top.record.d), (2, 0, 3));
    }

    #[test]
    fn crosscheck_trivial_and_monomials() {
        let c = ctx(2, 5, 3, 1);
        let one = AlgebraElement::one(c.theta);
        assert!(symbolic_numeric_crosscheck(&one, &c, 8).unwrap() < 1e-14);
        let m = AlgebraElement::monomial(c.theta, 2, -1, Complex64::new(0.3, -1.0));
        assert!(symbolic_numeric_crosscheck(&m, &c, 16).unwrap() < 1e-12);
        assert!(matches!(symbolic_numeric_crosscheck(&m, &c, 6), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn rounding_threshold() {
        assert_eq!(ChernResult::from_raw(-2.004, 8).unwrap().value, -2);
        assert!(matches!(ChernResult::from_raw(0.5, 8), Err(Error::NotQuantized { .. })));
        assert!(matches!(ChernResult::from_raw(1.01, 8), Err(Error::NotQuantized { .. })));
        assert!(ChernResult::from_raw(f64::NAN, 8).is_err());
    }

    #[test]
    fn result_json_layout() {
        let r = ChernResult { value: -1, raw: -1.0, residual: 0.0, grid: 24 };
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"value":-1,"raw":-1.0,"residual":0.0,"grid":24}"#);
    }
}
