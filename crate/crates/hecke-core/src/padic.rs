//! p-adic scalar arithmetic with pessimistic precision tracking, plus the
//! Teichmüller lift, the p-adic logarithm on 1-units, and the induced
//! character κ(u) = log(u / ω(u)) / p reduced mod p^a.
//!
//! A nonzero scalar is p^val · unit with the unit known modulo p^rel
//! (1 ≤ rel ≤ N); a "zero" is only known to vanish modulo p^abs. Operations
//! shrink `rel`/`abs` conservatively and extracting digits beyond what is
//! tracked is an error rather than a silent wrong answer.

use crate::error::{HeckeError, Result};

/// Working precision for one computation: digits are tracked mod p^N and
/// output coefficients live in Z/p^a.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrecisionContext {
    p: u64,
    n_digits: u32,
    a: u32,
}

impl PrecisionContext {
    /// Requires p ≥ 5 prime, 1 ≤ a ≤ N, and p^N < 2^63 so that units fit in
    /// machine words.
    pub fn new(p: u64, n_digits: u32, a: u32) -> Result<Self> {
        if p < 5 || !is_prime(p) {
            return Err(HeckeError::InvalidParameter(format!(
                "p = {p} must be a prime >= 5"
            )));
        }
        if a == 0 || a > n_digits {
            return Err(HeckeError::InvalidParameter(format!(
                "need 1 <= a <= N, got a = {a}, N = {n_digits}"
            )));
        }
        if checked_p_pow(p, n_digits).is_none() {
            return Err(HeckeError::InvalidParameter(format!(
                "p^N = {p}^{n_digits} does not fit below 2^63"
            )));
        }
        Ok(PrecisionContext { p, n_digits, a })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n_digits(&self) -> u32 {
        self.n_digits
    }

    pub fn a(&self) -> u32 {
        self.a
    }

    /// p^N.
    pub fn modulus(&self) -> u64 {
        p_pow(self.p, self.n_digits)
    }

    /// p^a, the modulus of output coefficients.
    pub fn coeff_modulus(&self) -> u64 {
        p_pow(self.p, self.a)
    }
}

/// Sentinel `abs` for an exact zero (no finite amount of precision was spent
/// learning it).
const EXACT: i64 = i64::MAX / 2;

/// Add valuation bounds without ever reaching the exactness sentinel.
fn bump_abs(abs: i64, by: i64) -> i64 {
    if abs == EXACT {
        EXACT
    } else {
        abs.saturating_add(by).min(EXACT - 1)
    }
}

#[derive(Debug, Clone, Copy)]
enum Repr {
    /// Known to be ≡ 0 mod p^abs (abs = EXACT: the honest zero).
    Zero { abs: i64 },
    /// p^val · unit with p ∤ unit, unit reduced mod p^rel, 1 ≤ rel ≤ N.
    Unit { val: i64, unit: u64, rel: u32 },
}

/// A p-adic number with explicit precision bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct PScalar {
    ctx: PrecisionContext,
    repr: Repr,
}

impl PScalar {
    pub fn exact_zero(ctx: PrecisionContext) -> Self {
        PScalar {
            ctx,
            repr: Repr::Zero { abs: EXACT },
        }
    }

    /// A value only known to vanish mod p^abs.
    pub fn zero_mod(ctx: PrecisionContext, abs: i64) -> Self {
        PScalar {
            ctx,
            repr: Repr::Zero { abs },
        }
    }

    pub fn one(ctx: PrecisionContext) -> Self {
        PScalar {
            ctx,
            repr: Repr::Unit {
                val: 0,
                unit: 1,
                rel: ctx.n_digits,
            },
        }
    }

    /// Exact integer input; precision starts at the full N digits.
    pub fn from_int(ctx: PrecisionContext, x: i128) -> Self {
        if x == 0 {
            return Self::exact_zero(ctx);
        }
        let m = ctx.modulus() as i128;
        let r = x.rem_euclid(m) as u64;
        if r == 0 {
            return Self::zero_mod(ctx, ctx.n_digits as i64);
        }
        let (val, unit) = strip_p(r, ctx.p);
        let rel = ctx.n_digits - val;
        PScalar {
            ctx,
            repr: Repr::Unit {
                val: val as i64,
                unit: unit % p_pow(ctx.p, rel),
                rel,
            },
        }
    }

    /// p^val · unit with the unit known mod p^rel.
    pub fn from_unit(ctx: PrecisionContext, val: i64, unit: u64, rel: u32) -> Result<Self> {
        let rel = rel.min(ctx.n_digits);
        if rel == 0 {
            return Err(HeckeError::PrecisionStarved(
                "unit with zero known digits".into(),
            ));
        }
        let unit = unit % p_pow(ctx.p, rel);
        if unit.is_multiple_of(ctx.p) {
            return Err(HeckeError::InvalidParameter(format!(
                "unit part {unit} is divisible by p = {}",
                ctx.p
            )));
        }
        Ok(PScalar {
            ctx,
            repr: Repr::Unit { val, unit, rel },
        })
    }

    pub fn ctx(&self) -> PrecisionContext {
        self.ctx
    }

    pub fn is_exactly_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero { abs } if abs == EXACT)
    }

    /// Lower bound on the valuation that the bookkeeping guarantees
    /// (None for a zero, whose valuation exceeds everything tracked).
    pub fn valuation(&self) -> Option<i64> {
        match self.repr {
            Repr::Zero { .. } => None,
            Repr::Unit { val, .. } => Some(val),
        }
    }

    /// Digits of guaranteed vanishing: the value is ≡ 0 mod p^k for all
    /// k ≤ this bound (for a unit: its valuation; for a zero: abs).
    pub fn known_zero_to(&self) -> i64 {
        match self.repr {
            Repr::Zero { abs } => abs,
            Repr::Unit { val, .. } => val,
        }
    }

    /// Whether the tracked information proves divisibility by p^k.
    pub fn divisible_by_p_pow(&self, k: i64) -> bool {
        self.known_zero_to() >= k
    }

    pub fn neg(&self) -> Self {
        match self.repr {
            Repr::Zero { .. } => *self,
            Repr::Unit { val, unit, rel } => {
                let m = p_pow(self.ctx.p, rel);
                PScalar {
                    ctx: self.ctx,
                    repr: Repr::Unit {
                        val,
                        unit: (m - unit) % m,
                        rel,
                    },
                }
            }
        }
    }

    pub fn add(&self, rhs: &PScalar) -> Self {
        let ctx = self.ctx;
        match (self.repr, rhs.repr) {
            (Repr::Zero { abs: a1 }, Repr::Zero { abs: a2 }) => PScalar {
                ctx,
                repr: Repr::Zero { abs: a1.min(a2) },
            },
            (Repr::Zero { abs }, Repr::Unit { val, unit, rel })
            | (Repr::Unit { val, unit, rel }, Repr::Zero { abs }) => {
                if abs == EXACT {
                    PScalar {
                        ctx,
                        repr: Repr::Unit { val, unit, rel },
                    }
                } else if val >= abs {
                    PScalar {
                        ctx,
                        repr: Repr::Zero { abs },
                    }
                } else {
                    // Unknown garbage enters at digit abs − val of the unit.
                    let nrel = rel.min((abs - val) as u32);
                    PScalar {
                        ctx,
                        repr: Repr::Unit {
                            val,
                            unit: unit % p_pow(ctx.p, nrel),
                            rel: nrel,
                        },
                    }
                }
            }
            (
                Repr::Unit {
                    val: v1,
                    unit: u1,
                    rel: r1,
                },
                Repr::Unit {
                    val: v2,
                    unit: u2,
                    rel: r2,
                },
            ) => {
                let (v1, u1, r1, v2, u2, r2) = if v1 <= v2 {
                    (v1, u1, r1, v2, u2, r2)
                } else {
                    (v2, u2, r2, v1, u1, r1)
                };
                let width = (v2 - v1) as u32;
                if width >= r1 {
                    // The addend is entirely beyond the digits we know.
                    return PScalar {
                        ctx,
                        repr: Repr::Unit {
                            val: v1,
                            unit: u1,
                            rel: r1,
                        },
                    };
                }
                let rel = r1.min(width + r2);
                let m = p_pow(ctx.p, rel) as u128;
                let shifted = (u2 as u128 * p_pow(ctx.p, width) as u128) % m;
                let sum = ((u1 as u128 % m) + shifted) % m;
                if sum == 0 {
                    return PScalar {
                        ctx,
                        repr: Repr::Zero {
                            abs: v1 + rel as i64,
                        },
                    };
                }
                let (s, unit) = strip_p(sum as u64, ctx.p);
                PScalar {
                    ctx,
                    repr: Repr::Unit {
                        val: v1 + s as i64,
                        unit: unit % p_pow(ctx.p, rel - s),
                        rel: rel - s,
                    },
                }
            }
        }
    }

    pub fn sub(&self, rhs: &PScalar) -> Self {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &PScalar) -> Self {
        let ctx = self.ctx;
        match (self.repr, rhs.repr) {
            (Repr::Zero { abs: a1 }, Repr::Zero { abs: a2 }) => {
                let abs = if a1 == EXACT || a2 == EXACT {
                    EXACT
                } else {
                    bump_abs(a1, a2)
                };
                PScalar {
                    ctx,
                    repr: Repr::Zero { abs },
                }
            }
            (Repr::Zero { abs }, Repr::Unit { val, .. })
            | (Repr::Unit { val, .. }, Repr::Zero { abs }) => PScalar {
                ctx,
                repr: Repr::Zero {
                    abs: bump_abs(abs, val),
                },
            },
            (
                Repr::Unit {
                    val: v1,
                    unit: u1,
                    rel: r1,
                },
                Repr::Unit {
                    val: v2,
                    unit: u2,
                    rel: r2,
                },
            ) => {
                let rel = r1.min(r2);
                let m = p_pow(ctx.p, rel);
                let unit = ((u1 as u128 * u2 as u128) % m as u128) as u64;
                PScalar {
                    ctx,
                    repr: Repr::Unit {
                        val: v1 + v2,
                        unit,
                        rel,
                    },
                }
            }
        }
    }

    pub fn inv(&self) -> Result<Self> {
        match self.repr {
            Repr::Zero { abs } => {
                if abs == EXACT {
                    Err(HeckeError::InvalidParameter("division by zero".into()))
                } else {
                    Err(HeckeError::PrecisionStarved(format!(
                        "inverting a value only known to vanish mod p^{abs}"
                    )))
                }
            }
            Repr::Unit { val, unit, rel } => {
                let m = p_pow(self.ctx.p, rel);
                Ok(PScalar {
                    ctx: self.ctx,
                    repr: Repr::Unit {
                        val: -val,
                        unit: inv_mod(unit, m)?,
                        rel,
                    },
                })
            }
        }
    }

    /// Multiply by p^k (exact precision shift).
    pub fn mul_p_pow(&self, k: i64) -> Self {
        match self.repr {
            Repr::Zero { abs } => PScalar {
                ctx: self.ctx,
                repr: Repr::Zero {
                    abs: bump_abs(abs, k),
                },
            },
            Repr::Unit { val, unit, rel } => PScalar {
                ctx: self.ctx,
                repr: Repr::Unit {
                    val: val + k,
                    unit,
                    rel,
                },
            },
        }
    }

    /// The residue in [0, p^k) of an integral value, or an error if the value
    /// is non-integral or the tracked digits do not reach p^k.
    pub fn residue_mod(&self, k: u32) -> Result<u64> {
        let p = self.ctx.p;
        match self.repr {
            Repr::Zero { abs } => {
                if abs >= k as i64 {
                    Ok(0)
                } else {
                    Err(HeckeError::PrecisionStarved(format!(
                        "residue mod p^{k} requested of a value only known to vanish mod p^{abs}"
                    )))
                }
            }
            Repr::Unit { val, unit, rel } => {
                if val < 0 {
                    return Err(HeckeError::PrecisionStarved(format!(
                        "residue of a non-integral value (valuation {val})"
                    )));
                }
                if val >= k as i64 {
                    return Ok(0);
                }
                let need = k - val as u32;
                if rel < need {
                    return Err(HeckeError::PrecisionStarved(format!(
                        "residue mod p^{k} needs {need} unit digits, have {rel}"
                    )));
                }
                Ok((unit % p_pow(p, need)) * p_pow(p, val as u32))
            }
        }
    }

    /// Residue in Z/p^a, the output coefficient ring.
    pub fn coeff_residue(&self) -> Result<u64> {
        self.residue_mod(self.ctx.a)
    }
}

fn strip_p(mut x: u64, p: u64) -> (u32, u64) {
    debug_assert!(x != 0);
    let mut v = 0;
    while x.is_multiple_of(p) {
        x /= p;
        v += 1;
    }
    (v, x)
}

pub fn p_pow(p: u64, k: u32) -> u64 {
    checked_p_pow(p, k).expect("p^k overflow")
}

pub fn checked_p_pow(p: u64, k: u32) -> Option<u64> {
    let mut acc: u64 = 1;
    for _ in 0..k {
        acc = acc.checked_mul(p)?;
        if acc >= (1 << 63) {
            return None;
        }
    }
    Some(acc)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// p-adic valuation of a nonzero integer.
pub fn ord_p_i128(x: i128, p: u64) -> u32 {
    debug_assert!(x != 0);
    let mut x = x.unsigned_abs();
    let p = p as u128;
    let mut v = 0;
    while x.is_multiple_of(p) {
        x /= p;
        v += 1;
    }
    v
}

pub fn pow_mod(base: u64, mut exp: u64, m: u64) -> u64 {
    let mut base = (base % m) as u128;
    let mut acc: u128 = 1 % m as u128;
    let m = m as u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc as u64
}

/// Inverse of u mod m (extended Euclid); errors if gcd(u, m) ≠ 1.
pub fn inv_mod(u: u64, m: u64) -> Result<u64> {
    let (mut r0, mut r1) = (m as i128, (u % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return Err(HeckeError::InvalidParameter(format!(
            "{u} is not invertible mod {m}"
        )));
    }
    Ok(t0.rem_euclid(m as i128) as u64)
}

/// Teichmüller lift: the unique (p−1)-st root of unity ≡ u mod p, computed
/// mod p^N by iterating the p-power map until it stabilizes.
pub fn teichmuller(ctx: PrecisionContext, u: u64) -> Result<u64> {
    let m = ctx.modulus();
    let u = u % m;
    if u.is_multiple_of(ctx.p) {
        return Err(HeckeError::InvalidParameter(
            "Teichmüller lift of a non-unit".into(),
        ));
    }
    let mut x = u;
    for _ in 0..ctx.n_digits {
        let next = pow_mod(x, ctx.p, m);
        if next == x {
            break;
        }
        x = next;
    }
    debug_assert_eq!(pow_mod(x, ctx.p, m), x);
    Ok(x)
}

/// p-adic logarithm of a 1-unit: log(x) = Σ_{k≥1} (−1)^{k+1}(x−1)^k / k.
/// The input is x mod p^N with x ≡ 1 mod p; the series converges because
/// ord((x−1)^k / k) ≥ k − log_p k grows.
pub fn padic_log(ctx: PrecisionContext, x: u64) -> Result<PScalar> {
    let m = ctx.modulus();
    let x = x % m;
    if x % ctx.p != 1 {
        return Err(HeckeError::InvalidParameter(format!(
            "p-adic log needs x ≡ 1 mod p, got x ≡ {} mod {}",
            x % ctx.p,
            ctx.p
        )));
    }
    let y = PScalar::from_int(ctx, x as i128 - 1);
    if y.is_exactly_zero() {
        return Ok(y);
    }
    let mut sum = PScalar::exact_zero(ctx);
    let mut y_pow = PScalar::one(ctx);
    for k in 1..=(4 * ctx.n_digits as i128 + 8) {
        y_pow = y_pow.mul(&y);
        if y_pow.known_zero_to() >= ctx.n_digits as i64 + 3 {
            break;
        }
        let term = y_pow.mul(&PScalar::from_int(ctx, k).inv()?);
        sum = if k % 2 == 1 {
            sum.add(&term)
        } else {
            sum.sub(&term)
        };
    }
    Ok(sum)
}

/// κ(u) = log(u / ω(u)) / p reduced mod p^a: the standard generator of the
/// continuous characters of the units valued in Z/p^a. It is a homomorphism,
/// kills roots of unity, and κ(1+p) ≡ 1 mod p.
pub fn kappa(ctx: PrecisionContext, u: u64) -> Result<u64> {
    let m = ctx.modulus();
    let w = teichmuller(ctx, u)?;
    let one_unit = (u as u128 * inv_mod(w, m)? as u128 % m as u128) as u64;
    padic_log(ctx, one_unit)?.mul_p_pow(-1).residue_mod(ctx.a)
}

/// Smallest quadratic non-residue mod p.
pub fn quadratic_nonresidue(p: u64) -> u64 {
    (2..p)
        .find(|&n| pow_mod(n, (p - 1) / 2, p) == p - 1)
        .expect("p has a quadratic non-residue")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(p: u64, n: u32, a: u32) -> PrecisionContext {
        PrecisionContext::new(p, n, a).unwrap()
    }

    #[test]
    fn context_validation() {
        assert!(PrecisionContext::new(4, 8, 1).is_err());
        assert!(PrecisionContext::new(3, 8, 1).is_err());
        assert!(PrecisionContext::new(9, 8, 1).is_err());
        assert!(PrecisionContext::new(5, 8, 9).is_err());
        assert!(PrecisionContext::new(5, 40, 1).is_err()); // 5^40 ≥ 2^63
        assert!(PrecisionContext::new(5, 12, 2).is_ok());
    }

    #[test]
    fn from_int_strips_powers() {
        let c = ctx(5, 10, 2);
        let x = PScalar::from_int(c, 50);
        assert_eq!(x.valuation(), Some(2));
        assert_eq!(x.residue_mod(3).unwrap(), 50);
        assert_eq!(PScalar::from_int(c, -5).valuation(), Some(1));
        assert!(PScalar::from_int(c, 0).is_exactly_zero());
        // A multiple of p^N is only known to vanish mod p^N.
        let big = PScalar::from_int(c, 5i128.pow(10) * 3);
        assert_eq!(big.known_zero_to(), 10);
        assert!(!big.is_exactly_zero());
    }

    #[test]
    fn inverse_of_two() {
        // 1/2 = (p^N + 1)/2 mod p^N.
        for n in [6u32, 10, 12] {
            let c = ctx(5, n, 1);
            let inv2 = PScalar::from_int(c, 2).inv().unwrap();
            let expect = 5u64.pow(n).div_ceil(2);
            assert_eq!(inv2.residue_mod(n).unwrap(), expect);
        }
    }

    #[test]
    fn cancellation_is_pessimistic() {
        let c = ctx(5, 8, 1);
        let s = PScalar::from_int(c, 7).add(&PScalar::from_int(c, -7));
        assert!(!s.is_exactly_zero());
        assert_eq!(s.known_zero_to(), 8);
        assert_eq!(s.residue_mod(8).unwrap(), 0);
        assert!(s.residue_mod(9).is_err());

        // Partial cancellation keeps the surviving digits.
        let t = PScalar::from_int(c, 1 + 5 * 5 * 5).add(&PScalar::from_int(c, -1));
        assert_eq!(t.valuation(), Some(3));
        assert_eq!(t.residue_mod(4).unwrap(), 125);
    }

    #[test]
    fn starvation_is_an_error() {
        let c = ctx(5, 8, 1);
        assert!(PScalar::zero_mod(c, 2).residue_mod(3).is_err());
        assert!(PScalar::zero_mod(c, 2).inv().is_err());
        assert!(PScalar::from_int(c, 5).inv().unwrap().residue_mod(1).is_err());
        let low = PScalar::from_unit(c, 0, 1, 2).unwrap();
        assert!(low.residue_mod(3).is_err());
        assert_eq!(low.residue_mod(2).unwrap(), 1);
    }

    #[test]
    fn model_matches_integers() {
        let c = ctx(5, 12, 2);
        let m4 = 5i128.pow(4);
        let cases: Vec<(i128, i128)> = vec![
            (3, 4),
            (-3, 3),
            (625, -625),
            (1, -1 + 5i128.pow(7)),
            (123456, -654321),
            (2 * 5i128.pow(3), 3 * 5i128.pow(3)),
        ];
        for (x, y) in cases {
            let (px, py) = (PScalar::from_int(c, x), PScalar::from_int(c, y));
            assert_eq!(
                px.add(&py).residue_mod(4).unwrap() as i128,
                (x + y).rem_euclid(m4),
                "add {x} {y}"
            );
            assert_eq!(
                px.mul(&py).residue_mod(4).unwrap() as i128,
                (x * y).rem_euclid(m4),
                "mul {x} {y}"
            );
        }
    }

    #[test]
    fn teichmuller_is_torsion() {
        let c = ctx(5, 6, 1);
        let w = teichmuller(c, 2).unwrap();
        assert_eq!(w % 5, 2);
        assert_eq!(pow_mod(w, 5, c.modulus()), w);
        // ω(2) ≡ 7 mod 25: 7^5 = 16807 = 25·672 + 7.
        assert_eq!(w % 25, 7);
        // 1-units lift to 1; −1 is its own lift.
        assert_eq!(teichmuller(c, 6).unwrap(), 1);
        assert_eq!(teichmuller(c, c.modulus() - 1).unwrap(), c.modulus() - 1);
    }

    #[test]
    fn log_one_unit_reference_values() {
        // log(1+5)/5 = 1 − 5/2 + 25/3 − ... ≡ 1 mod 5 and ≡ 11 mod 25.
        let c = ctx(5, 12, 2);
        let l = padic_log(c, 6).unwrap().mul_p_pow(-1);
        assert_eq!(l.residue_mod(1).unwrap(), 1);
        assert_eq!(l.residue_mod(2).unwrap(), 11);
    }

    #[test]
    fn log_stable_under_extra_digits() {
        for (p, a) in [(5u64, 2u32), (7, 2)] {
            let n = a + 8;
            for u in [1 + p, 1 + 3 * p, 1 + p * p, 1 + 2 * p + p * p] {
                let lo = kappa(ctx(p, n, a), u).unwrap();
                let hi = kappa(ctx(p, n + 4, a), u).unwrap();
                assert_eq!(lo, hi, "p={p} u={u}");
            }
        }
    }

    #[test]
    fn kappa_reference_values() {
        let c = ctx(5, 12, 2);
        assert_eq!(kappa(c, 6).unwrap() % 5, 1);
        assert_eq!(kappa(c, 6).unwrap(), 11);
        // κ kills the torsion part of the units.
        assert_eq!(kappa(c, c.modulus() - 1).unwrap(), 0);
        assert_eq!(kappa(c, teichmuller(c, 3).unwrap()).unwrap(), 0);
        // κ(−u) = κ(u).
        let neg_u = (c.modulus() - 7) % c.modulus();
        assert_eq!(kappa(c, 7).unwrap(), kappa(c, neg_u).unwrap());
    }

    #[test]
    fn nonresidue_small_primes() {
        assert_eq!(quadratic_nonresidue(5), 2);
        assert_eq!(quadratic_nonresidue(7), 3);
        assert_eq!(quadratic_nonresidue(11), 2);
        assert_eq!(quadratic_nonresidue(13), 2);
    }

    proptest! {
        #[test]
        fn padic_ops_match_integer_ops(x in -1_000_000i128..1_000_000, y in -1_000_000i128..1_000_000) {
            let c = ctx(5, 12, 2);
            let m = 5i128.pow(4);
            let (px, py) = (PScalar::from_int(c, x), PScalar::from_int(c, y));
            prop_assert_eq!(px.add(&py).residue_mod(4).unwrap() as i128, (x + y).rem_euclid(m));
            prop_assert_eq!(px.sub(&py).residue_mod(4).unwrap() as i128, (x - y).rem_euclid(m));
            prop_assert_eq!(px.mul(&py).residue_mod(4).unwrap() as i128, (x * y).rem_euclid(m));
            if y != 0 {
                // x = (x/y)·y up to the tracked digits.
                let q = px.mul(&py.inv().unwrap());
                let back = q.mul(&py);
                let k = 3 - ord_p_i128(y, 5).min(3);
                if k > 0 {
                    prop_assert_eq!(back.residue_mod(k).unwrap() as i128, x.rem_euclid(5i128.pow(k)));
                }
            }
        }

        #[test]
        fn kappa_is_a_homomorphism(u1 in 1u64..10_000, u2 in 1u64..10_000, p in prop::sample::select(vec![5u64, 7])) {
            prop_assume!(u1 % p != 0 && u2 % p != 0);
            let c = ctx(p, 10, 2);
            let pa = p_pow(p, 2);
            let prod = (u1 as u128 * u2 as u128 % c.modulus() as u128) as u64;
            prop_assert_eq!(
                kappa(c, prod).unwrap(),
                (kappa(c, u1).unwrap() + kappa(c, u2).unwrap()) % pa
            );
        }

        #[test]
        fn kappa_of_one_plus_p_generates(k in 0u64..20, p in prop::sample::select(vec![5u64, 7])) {
            // κ((1+p)^k) = k·κ(1+p) and κ(1+p) is a unit mod p.
            let c = ctx(p, 12, 2);
            let x = pow_mod(1 + p, k, c.modulus());
            let base = kappa(c, 1 + p).unwrap();
            prop_assert_eq!(base % p, 1);
            prop_assert_eq!(kappa(c, x).unwrap(), k * base % p_pow(p, 2));
        }
    }
}
