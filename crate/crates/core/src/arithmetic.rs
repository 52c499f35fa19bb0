//! Diophantine layer: Bézout constants of a (q,r) twist, gap labels and
//! the classical / generalized TKNN equations `N·t + M0·s = q·d`.

use serde::{Deserialize, Serialize};

use crate::algebra::{gcd, RationalTheta};
use crate::error::{Error, Result};

/// Integer data of a (q,r)-Weyl representation of the rational torus at θ = M/N.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WeylContext {
    pub theta: RationalTheta,
    pub n: i64,
    pub m: i64,
    pub q: i64,
    pub r: i64,
    /// `β q − α r = 1`, `0 ≤ α < q`.
    pub alpha: i64,
    pub beta: i64,
    /// `ν q + μ (r N) = r`, `0 ≤ μ < q`.
    pub mu: i64,
    pub nu: i64,
    pub d_r: i64,
    pub n_r: i64,
    /// `q M − r N`.
    pub m0: i64,
}

impl WeylContext {
    pub fn new(theta: RationalTheta, q: i64, r: i64) -> Result<Self> {
        make_weyl_context(theta, q, r)
    }

    /// ε = M/N − r/q as the exact pair `(M0, N q)`.
    pub fn epsilon_ratio(&self) -> (i64, i64) {
        (self.m0, self.n * self.q)
    }

    pub fn epsilon(&self) -> f64 {
        self.m0 as f64 / (self.n * self.q) as f64
    }

    pub fn dim(&self) -> usize {
        self.n as usize
    }
}

pub fn make_weyl_context(theta: RationalTheta, q: i64, r: i64) -> Result<WeylContext> {
    if q < 1 {
        return Err(Error::InvalidTwist { q, r, reason: "q must be positive" });
    }
    if gcd(q, r) != 1 {
        return Err(Error::InvalidTwist { q, r, reason: "q and r must be coprime" });
    }
    if !(r.abs() < q || (q, r) == (1, 0)) {
        return Err(Error::InvalidTwist { q, r, reason: "need |r| < q or (q, r) = (1, 0)" });
    }
    let (m, n) = (theta.numerator(), theta.denominator());
    let g = gcd(n, q);
    if g != 1 {
        return Err(Error::DegenerateRepresentation { n, q, gcd: g });
    }

    let ovf = |what| Error::Overflow(what);
    let (alpha, beta, mu, nu) = if q == 1 {
        // β = 1 + α r with α = 0; μ = 0 and ν = r
        (0, 1, 0, r)
    } else {
        let alpha = (-mod_inverse(r, q)).rem_euclid(q);
        let num = 1i128 + alpha as i128 * r as i128;
        let beta = narrow(num / q as i128, "beta")?;
        let mu = mod_inverse(n, q);
        let num = r as i128 - mu as i128 * r as i128 * n as i128;
        let nu = narrow(num / q as i128, "nu")?;
        (alpha, beta, mu, nu)
    };
    let d_r = narrow(beta as i128 - alpha as i128 * nu as i128, "d_r")?;
    let n_r = narrow(-(mu as i128) * alpha as i128 * r as i128, "n_r")?;
    let m0 = q
        .checked_mul(m)
        .and_then(|a| r.checked_mul(n).and_then(|b| a.checked_sub(b)))
        .ok_or_else(|| ovf("M0"))?;

    let ctx = WeylContext { theta, n, m, q, r, alpha, beta, mu, nu, d_r, n_r, m0 };
    debug_assert_eq!(beta as i128 * q as i128 - alpha as i128 * r as i128, 1);
    debug_assert_eq!(nu as i128 * q as i128 + mu as i128 * r as i128 * n as i128, r as i128);
    if q as i128 * d_r as i128 + n_r as i128 * n as i128 != 1 {
        return Err(Error::InvalidTwist { q, r, reason: "q·d_r + n_r·N = 1 failed" });
    }
    Ok(ctx)
}

/// Band count below gap `g` of the Hofstadter spectrum at denominator `n`.
pub fn gap_label_d(n: i64, g: i64) -> Result<i64> {
    if n < 1 {
        return Err(Error::GapIndexOutOfRange { n, g, max: 0 });
    }
    let max = if n % 2 == 1 { n } else { n - 1 };
    if g < 0 || g > max {
        return Err(Error::GapIndexOutOfRange { n, g, max });
    }
    if n % 2 == 1 || g < n / 2 {
        Ok(g)
    } else {
        Ok(g + 1)
    }
}

/// The unique `(t, s)` with `N t + M0 s = q d` and `2|s| < N`.
pub fn tknn_solve(ctx: &WeylContext, d: i64) -> Result<(i64, i64)> {
    let n = ctx.n;
    if d < 0 || d > n {
        return Err(Error::LabelOutOfRange { n, d });
    }
    let n128 = n as i128;
    let qd = ctx.q as i128 * d as i128;
    let inv = mod_inverse(ctx.m0, n) as i128;
    let residue = (qd.rem_euclid(n128) * inv).rem_euclid(n128);
    let s = if 2 * residue < n128 {
        residue
    } else if 2 * residue > n128 {
        residue - n128
    } else {
        return Err(Error::NoConstrainedSolution { n, m0: ctx.m0, q: ctx.q, d });
    };
    let rest = qd - ctx.m0 as i128 * s;
    debug_assert_eq!(rest % n128, 0);
    Ok((narrow(rest / n128, "t")?, s as i64))
}

/// `q [∮p + (θ − r/q) C̄₁(p)]`.
pub fn tknn_rhs_value(ncint_p: f64, cc_p: i64, theta: f64, q: i64, r: i64) -> f64 {
    let q = q as f64;
    q * (ncint_p + (theta - r as f64 / q) * cc_p as f64)
}

/// Reduced fractions in [0, 1] with denominator at most `d`, ascending.
pub fn farey(d: i64) -> Vec<RationalTheta> {
    let mut out = Vec::new();
    for n in 1..=d.max(1) {
        for m in 0..=n {
            if let Ok(t) = RationalTheta::new(m, n) {
                out.push(t);
            }
        }
    }
    out.sort_by(|a, b| {
        (a.numerator() as i128 * b.denominator() as i128).cmp(&(b.numerator() as i128 * a.denominator() as i128))
    });
    out
}

/// One verified gap: labels, Fermi level and pre-rounding residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TknnRecord {
    pub g: i64,
    pub d: i64,
    pub t: i64,
    pub s: i64,
    pub fermi: f64,
    pub residual: f64,
}

impl TknnRecord {
    pub fn satisfies(&self, ctx: &WeylContext) -> bool {
        ctx.n as i128 * self.t as i128 + ctx.m0 as i128 * self.s as i128 == ctx.q as i128 * self.d as i128
    }
}

fn narrow(x: i128, what: &'static str) -> Result<i64> {
    i64::try_from(x).map_err(|_| Error::Overflow(what))
}

/// Inverse of `a` modulo `m ≥ 1`, assuming gcd(a, m) = 1. Returns 0 when m = 1.
pub(crate) fn mod_inverse(a: i64, m: i64) -> i64 {
    let (mut old_r, mut r) = (a.rem_euclid(m) as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let quot = old_r / r;
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
    }
    debug_assert!(m == 1 || old_r == 1, "not invertible");
    old_s.rem_euclid(m as i128) as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th(m: i64, n: i64) -> RationalTheta {
        RationalTheta::new(m, n).unwrap()
    }

    #[test]
    fn identity_twist_constants() {
        let c = make_weyl_context(th(1, 3), 1, 0).unwrap();
        assert_eq!((c.alpha, c.beta, c.mu, c.nu, c.d_r, c.n_r, c.m0), (0, 1, 0, 0, 1, 0, 1));
    }

    #[test]
    fn two_one_twist_constants() {
        let c = make_weyl_context(th(1, 3), 2, 1).unwrap();
        assert_eq!((c.alpha, c.beta, c.mu, c.nu, c.d_r, c.n_r, c.m0), (1, 1, 1, -1, 2, -1, -1));
        assert_eq!(2 * c.d_r + c.n_r * 3, 1);
        assert_eq!(c.epsilon_ratio(), (-1, 6));
    }

    #[test]
    fn degenerate_and_invalid_twists() {
        assert_eq!(
            make_weyl_context(th(1, 2), 2, 1),
            Err(Error::DegenerateRepresentation { n: 2, q: 2, gcd: 2 })
        );
        assert!(matches!(make_weyl_context(th(1, 3), 2, 0), Err(Error::InvalidTwist { .. })));
        assert!(matches!(make_weyl_context(th(1, 5), 4, 2), Err(Error::InvalidTwist { .. })));
        assert!(matches!(make_weyl_context(th(1, 5), 2, 3), Err(Error::InvalidTwist { .. })));
        assert!(matches!(make_weyl_context(th(1, 5), 0, 1), Err(Error::InvalidTwist { .. })));
    }

    #[test]
    fn negative_r_is_accepted() {
        let c = make_weyl_context(th(2, 5), 3, -1).unwrap();
        assert_eq!(c.q * c.d_r + c.n_r * c.n, 1);
        assert!(c.alpha >= 0 && c.alpha < 3);
    }

    #[test]
    fn gap_labels() {
        assert_eq!(gap_label_d(3, 1).unwrap(), 1);
        assert_eq!(gap_label_d(4, 2).unwrap(), 3);
        assert_eq!(gap_label_d(5, 0).unwrap(), 0);
        assert_eq!(gap_label_d(4, 1).unwrap(), 1);
        assert_eq!(gap_label_d(4, 3).unwrap(), 4);
        assert_eq!(gap_label_d(3, 3).unwrap(), 3);
        assert!(gap_label_d(4, 4).is_err());
        assert!(gap_label_d(3, -1).is_err());
    }

    #[test]
    fn tknn_examples() {
        let c = make_weyl_context(th(1, 3), 1, 0).unwrap();
        assert_eq!(tknn_solve(&c, 1).unwrap(), (0, 1));
        assert_eq!(tknn_solve(&c, 2).unwrap(), (1, -1));
        assert_eq!(tknn_solve(&c, 0).unwrap(), (0, 0));
        assert_eq!(tknn_solve(&c, 3).unwrap(), (1, 0));
        assert!(tknn_solve(&c, 4).is_err());

        let c = make_weyl_context(th(1, 3), 2, 1).unwrap();
        assert_eq!(tknn_solve(&c, 1).unwrap(), (1, 1));
        assert_eq!(tknn_solve(&c, 3).unwrap(), (2, 0));
    }

    #[test]
    fn tknn_even_denominator_midpoint() {
        // θ = 1/4: d = 2 forces s ≡ 2 mod 4, which has no representative with 2|s| < 4
        let c = make_weyl_context(th(1, 4), 1, 0).unwrap();
        assert!(matches!(tknn_solve(&c, 2), Err(Error::NoConstrainedSolution { .. })));
        assert_eq!(tknn_solve(&c, 1).unwrap(), (0, 1));
        assert_eq!(tknn_solve(&c, 3).unwrap(), (1, -1));
    }

    #[test]
    fn rhs_examples() {
        assert!((tknn_rhs_value(1.0, 0, 0.37, 3, 1) - 3.0).abs() < 1e-15);
        assert!(tknn_rhs_value(1.0 / 3.0, -1, 1.0 / 3.0, 1, 0).abs() < 1e-15);
        assert!((tknn_rhs_value(1.0 / 3.0, -1, 1.0 / 3.0, 2, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn farey_sequence() {
        let f: Vec<String> = farey(3).iter().map(|t| t.to_string()).collect();
        assert_eq!(f, ["0/1", "1/3", "1/2", "2/3", "1/1"]);
        let f: Vec<String> = farey(1).iter().map(|t| t.to_string()).collect();
        assert_eq!(f, ["0/1", "1/1"]);
    }

    #[test]
    fn record_json() {
        let r = TknnRecord { g: 1, d: 1, t: 0, s: 1, fermi: -1.5, residual: 0.0 };
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"g":1,"d":1,"t":0,"s":1,"fermi":-1.5,"residual":0.0}"#);
    }
}
