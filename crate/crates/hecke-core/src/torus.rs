//! The graded Hecke algebra of a split torus with Z/p^a coefficients: the
//! group algebra of the cocharacter lattice tensored with the exterior algebra
//! on the log-based unit characters κ_1, ..., κ_r of T(O).
//!
//! A basis monomial is e_λ ⊗ κ_{i_1} ∧ ... ∧ κ_{i_k} (indices strictly
//! increasing); products add the lattice parts and merge wedge sets with the
//! shuffle sign, vanishing when an index repeats.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{HeckeError, Result};
use crate::padic::{inv_mod, kappa, p_pow, PrecisionContext};
use crate::root_datum::{Cocharacter, Family, RootDatum};

/// Wedge subsets as bitmasks (bit i ↔ generator κ_{i+1}).
pub type WedgeMask = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusDHAElem {
    rank: usize,
    key_len: usize,
    p: u64,
    a: u32,
    support: BTreeMap<(Cocharacter, WedgeMask), u64>,
}

impl TorusDHAElem {
    /// `rank` exterior generators; lattice keys of length `key_len`
    /// (the two differ when the torus sits inside a larger group whose
    /// cocharacter coordinates are used for the keys).
    pub fn new(rank: usize, key_len: usize, p: u64, a: u32) -> Result<Self> {
        if rank > 16 {
            return Err(HeckeError::InvalidParameter(format!(
                "rank {rank} exterior algebra not supported (max 16)"
            )));
        }
        if a == 0 || p < 2 || p_pow_checked(p, a).is_none() {
            return Err(HeckeError::InvalidParameter(format!(
                "coefficient modulus {p}^{a} invalid or too large"
            )));
        }
        Ok(TorusDHAElem {
            rank,
            key_len,
            p,
            a,
            support: BTreeMap::new(),
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn key_len(&self) -> usize {
        self.key_len
    }

    pub fn modulus(&self) -> u64 {
        p_pow(self.p, self.a)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn a(&self) -> u32 {
        self.a
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = (&(Cocharacter, WedgeMask), &u64)> {
        self.support.iter()
    }

    pub fn coeff(&self, key: &Cocharacter, mask: WedgeMask) -> u64 {
        self.support
            .get(&(key.clone(), mask))
            .copied()
            .unwrap_or(0)
    }

    fn check_key(&self, key: &Cocharacter, mask: WedgeMask) -> Result<()> {
        if key.len() != self.key_len {
            return Err(HeckeError::InvalidParameter(format!(
                "lattice key length {} != {}",
                key.len(),
                self.key_len
            )));
        }
        if mask >= (1 << self.rank) {
            return Err(HeckeError::InvalidParameter(format!(
                "wedge mask {mask:#b} exceeds rank {}",
                self.rank
            )));
        }
        Ok(())
    }

    /// Adds c · e_key ⊗ κ_mask into the element.
    pub fn add_term(&mut self, key: Cocharacter, mask: WedgeMask, c: u64) -> Result<()> {
        self.check_key(&key, mask)?;
        let m = self.modulus();
        let k = (key, mask);
        let e = self.support.entry(k.clone()).or_insert(0);
        *e = (*e + c % m) % m;
        if *e == 0 {
            self.support.remove(&k);
        }
        Ok(())
    }

    /// A single monomial c · e_key ⊗ κ_{i_1} ∧ ... (1-based generator
    /// indices). The indices may come in any order; sorting them into the
    /// canonical ascending form contributes the sign of the permutation, and
    /// a repeated index makes the monomial zero.
    pub fn monomial(
        rank: usize,
        key_len: usize,
        p: u64,
        a: u32,
        key: Cocharacter,
        wedge: &[u32],
        c: u64,
    ) -> Result<Self> {
        let mut mask: WedgeMask = 0;
        let mut inversions = 0u32;
        for (pos, &i) in wedge.iter().enumerate() {
            if i == 0 || i as usize > rank {
                return Err(HeckeError::InvalidParameter(format!(
                    "wedge index {i} out of range 1..={rank}"
                )));
            }
            if mask & (1 << (i - 1)) != 0 {
                // Repeated generator: the monomial is zero.
                return Self::new(rank, key_len, p, a);
            }
            inversions += wedge[..pos].iter().filter(|&&j| j > i).count() as u32;
            mask |= 1 << (i - 1);
        }
        let pa = p.pow(a);
        let signed = if inversions.is_multiple_of(2) { c % pa } else { (pa - c % pa) % pa };
        let mut e = Self::new(rank, key_len, p, a)?;
        e.add_term(key, mask, signed)?;
        Ok(e)
    }

    fn check_compatible(&self, rhs: &Self) -> Result<()> {
        if self.rank != rhs.rank
            || self.key_len != rhs.key_len
            || self.p != rhs.p
            || self.a != rhs.a
        {
            return Err(HeckeError::InvalidParameter(
                "mixing elements of different torus algebras".into(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_compatible(rhs)?;
        let mut out = self.clone();
        for ((k, m), &c) in &rhs.support {
            out.add_term(k.clone(), *m, c)?;
        }
        Ok(out)
    }

    pub fn scale(&self, c: u64) -> Self {
        let m = self.modulus();
        let c = c % m;
        let mut out = Self {
            rank: self.rank,
            key_len: self.key_len,
            p: self.p,
            a: self.a,
            support: BTreeMap::new(),
        };
        for ((k, mask), &v) in &self.support {
            let w = v * c % m;
            if w != 0 {
                out.support.insert((k.clone(), *mask), w);
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        let m = self.modulus();
        self.scale(m - 1)
    }

    /// Graded product: monomials multiply by adding lattice parts and merging
    /// wedge sets with the shuffle sign; overlapping sets give zero.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.check_compatible(rhs)?;
        let m = self.modulus();
        let mut out = Self::new(self.rank, self.key_len, self.p, self.a)?;
        for ((k1, a1), &c1) in &self.support {
            for ((k2, a2), &c2) in &rhs.support {
                if a1 & a2 != 0 {
                    continue;
                }
                let key = Cocharacter(k1.0.iter().zip(&k2.0).map(|(x, y)| x + y).collect());
                let mut c = c1 * c2 % m;
                if shuffle_sign(*a1, *a2) < 0 {
                    c = (m - c) % m;
                }
                out.add_term(key, a1 | a2, c)?;
            }
        }
        Ok(out)
    }

    /// Terms of exterior degree k.
    pub fn degree_part(&self, k: u32) -> Self {
        let mut out = Self {
            rank: self.rank,
            key_len: self.key_len,
            p: self.p,
            a: self.a,
            support: BTreeMap::new(),
        };
        for ((key, mask), &c) in &self.support {
            if mask.count_ones() == k {
                out.support.insert((key.clone(), *mask), c);
            }
        }
        out
    }

    pub fn max_degree(&self) -> u32 {
        self.support
            .keys()
            .map(|(_, m)| m.count_ones())
            .max()
            .unwrap_or(0)
    }

    /// Value of the degree-1 part at lattice key `key` on the torus point with
    /// the given diagonal entries: Σ_i coeff(key, {i}) · κ_i(t) in Z/p^a.
    pub fn evaluate_deg1(
        &self,
        gen: &TorusCharGenerator,
        key: &Cocharacter,
        t_diag: &[u64],
    ) -> Result<u64> {
        if gen.count() != self.rank || gen.ctx.p() != self.p || gen.ctx.a() != self.a {
            return Err(HeckeError::InvalidParameter(
                "character generator does not match this algebra".into(),
            ));
        }
        let m = self.modulus();
        let mut acc = 0u64;
        for i in 0..self.rank {
            let c = self.coeff(key, 1 << i);
            if c != 0 {
                acc = (acc + c * gen.kappa_i(i, t_diag)?) % m;
            }
        }
        Ok(acc)
    }
}

fn p_pow_checked(p: u64, a: u32) -> Option<u64> {
    let m = crate::padic::checked_p_pow(p, a)?;
    (m < (1 << 31)).then_some(m)
}

/// Sign of the permutation merging the sorted set `a` before the sorted set
/// `b` into one sorted set; the caller guarantees a ∩ b = ∅.
pub fn shuffle_sign(a: WedgeMask, b: WedgeMask) -> i32 {
    debug_assert_eq!(a & b, 0);
    let mut inv = 0u32;
    let mut bb = b;
    while bb != 0 {
        let i = bb.trailing_zeros();
        inv += (a >> (i + 1)).count_ones();
        bb &= bb - 1;
    }
    if inv.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// The log-based characters κ_i of the integral points of the diagonal torus,
/// per family: for GL_n all n coordinates κ(t_i); for SL_n the first n−1 (the
/// last is determined); for PGL_n the center-invariant κ(t_i / t_n).
#[derive(Debug, Clone)]
pub struct TorusCharGenerator {
    datum: RootDatum,
    ctx: PrecisionContext,
}

impl TorusCharGenerator {
    pub fn new(datum: RootDatum, ctx: PrecisionContext) -> Self {
        TorusCharGenerator { datum, ctx }
    }

    pub fn count(&self) -> usize {
        self.datum.cochar_rank()
    }

    pub fn ctx(&self) -> PrecisionContext {
        self.ctx
    }

    /// κ_i (0-based index) of a torus point given by its diagonal entries
    /// mod p^N; entries must be units.
    pub fn kappa_i(&self, i: usize, t_diag: &[u64]) -> Result<u64> {
        if t_diag.len() != self.datum.n {
            return Err(HeckeError::InvalidParameter(format!(
                "expected {} diagonal entries, got {}",
                self.datum.n,
                t_diag.len()
            )));
        }
        if i >= self.count() {
            return Err(HeckeError::InvalidParameter(format!(
                "character index {i} out of range"
            )));
        }
        match self.datum.family {
            Family::GL | Family::SL => kappa(self.ctx, t_diag[i]),
            Family::PGL => {
                let m = self.ctx.modulus();
                let last_inv = inv_mod(t_diag[self.datum.n - 1], m)?;
                let q = (t_diag[i] as u128 * last_inv as u128 % m as u128) as u64;
                kappa(self.ctx, q)
            }
        }
    }

    pub fn kappa_vector(&self, t_diag: &[u64]) -> Result<Vec<u64>> {
        (0..self.count()).map(|i| self.kappa_i(i, t_diag)).collect()
    }
}

/// Serialization shape: terms listed in the map's deterministic order with
/// 1-based ascending wedge indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TermRepr {
    cochar: Vec<i64>,
    wedge: Vec<u32>,
    coeff: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ElemRepr {
    rank: usize,
    key_len: usize,
    p: u64,
    a: u32,
    terms: Vec<TermRepr>,
}

impl Serialize for TorusDHAElem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms = self
            .support
            .iter()
            .map(|((k, mask), &c)| TermRepr {
                cochar: k.0.clone(),
                wedge: (0..32)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| b + 1)
                    .collect(),
                coeff: c,
            })
            .collect();
        ElemRepr {
            rank: self.rank,
            key_len: self.key_len,
            p: self.p,
            a: self.a,
            terms,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TorusDHAElem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ElemRepr::deserialize(d)?;
        let mut e = TorusDHAElem::new(r.rank, r.key_len, r.p, r.a).map_err(serde::de::Error::custom)?;
        for t in r.terms {
            let mono = TorusDHAElem::monomial(
                r.rank,
                r.key_len,
                r.p,
                r.a,
                Cocharacter(t.cochar),
                &t.wedge,
                t.coeff,
            )
            .map_err(serde::de::Error::custom)?;
            e = e.add(&mono).map_err(serde::de::Error::custom)?;
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mono(key: &[i64], wedge: &[u32], c: u64) -> TorusDHAElem {
        TorusDHAElem::monomial(3, 3, 5, 2, Cocharacter(key.to_vec()), wedge, c).unwrap()
    }

    #[test]
    fn wedge_antisymmetry() {
        let xy = mono(&[0, 0, 0], &[1], 1).mul(&mono(&[0, 0, 0], &[2], 1)).unwrap();
        let yx = mono(&[0, 0, 0], &[2], 1).mul(&mono(&[0, 0, 0], &[1], 1)).unwrap();
        assert_eq!(xy, yx.neg());
        assert_eq!(xy.coeff(&Cocharacter(vec![0, 0, 0]), 0b11), 1);
        assert_eq!(yx.coeff(&Cocharacter(vec![0, 0, 0]), 0b11), 24);
    }

    #[test]
    fn repeated_generator_vanishes() {
        let x = mono(&[1, 0, 0], &[1], 3);
        assert!(x.mul(&x).unwrap().is_zero());
        let m = TorusDHAElem::monomial(3, 3, 5, 2, Cocharacter(vec![0; 3]), &[2, 2], 7).unwrap();
        assert!(m.is_zero());
    }

    #[test]
    fn degree_zero_is_the_group_algebra() {
        let e1 = mono(&[1, 0, 0], &[], 2);
        let e2 = mono(&[0, -1, 2], &[], 3);
        let prod = e1.mul(&e2).unwrap();
        assert_eq!(prod.coeff(&Cocharacter(vec![1, -1, 2]), 0), 6);
        // Commutes on the nose in degree zero.
        assert_eq!(prod, e2.mul(&e1).unwrap());
    }

    #[test]
    fn top_degree_vanishing() {
        // rank 3: any product of total exterior degree > 3 vanishes.
        let top = mono(&[0, 0, 0], &[1, 2, 3], 1);
        let one_more = mono(&[0, 0, 0], &[1], 1);
        assert!(top.mul(&one_more).unwrap().is_zero());
        let deg2 = mono(&[0, 0, 0], &[1, 3], 1);
        assert!(deg2.mul(&deg2).unwrap().is_zero());
        assert!(!deg2.mul(&mono(&[0, 0, 0], &[2], 1)).unwrap().is_zero());
    }

    #[test]
    fn shuffle_sign_examples() {
        // {1} before {2}: already sorted.
        assert_eq!(shuffle_sign(0b01, 0b10), 1);
        // {2} before {1}: one inversion.
        assert_eq!(shuffle_sign(0b10, 0b01), -1);
        // {1,3} before {2}: κ1∧κ3∧κ2 → one swap.
        assert_eq!(shuffle_sign(0b101, 0b010), -1);
        // {2,3} before {1}: two inversions.
        assert_eq!(shuffle_sign(0b110, 0b001), 1);
    }

    fn all_monomials() -> Vec<TorusDHAElem> {
        let keys: [&[i64]; 2] = [&[0, 0, 0], &[-1, 1, 0]];
        let wedges: [&[u32]; 8] = [
            &[],
            &[1],
            &[2],
            &[3],
            &[1, 2],
            &[1, 3],
            &[2, 3],
            &[1, 2, 3],
        ];
        let mut v = Vec::new();
        for k in keys {
            for w in wedges {
                v.push(mono(k, w, 2));
            }
        }
        v
    }

    #[test]
    fn associativity_exhaustive_small() {
        let ms = all_monomials();
        for x in &ms {
            for y in &ms {
                for z in &ms {
                    let l = x.mul(y).unwrap().mul(z).unwrap();
                    let r = x.mul(&y.mul(z).unwrap()).unwrap();
                    assert_eq!(l, r);
                }
            }
        }
    }

    #[test]
    fn graded_commutativity_exhaustive_small() {
        let ms = all_monomials();
        for x in &ms {
            for y in &ms {
                let xy = x.mul(y).unwrap();
                let yx = y.mul(x).unwrap();
                let dx = x.max_degree();
                let dy = y.max_degree();
                if dx * dy % 2 == 0 {
                    assert_eq!(xy, yx);
                } else {
                    assert_eq!(xy, yx.neg());
                }
            }
        }
    }

    #[test]
    fn evaluate_degree_one_per_family() {
        let ctx = PrecisionContext::new(5, 12, 2).unwrap();
        let m = ctx.modulus();

        // GL₂: κ₁ sees the first entry only.
        let gl2 = RootDatum::new(Family::GL, 2).unwrap();
        let gen = TorusCharGenerator::new(gl2, ctx);
        let mut e = TorusDHAElem::new(2, 2, 5, 2).unwrap();
        e.add_term(Cocharacter(vec![-1, 0]), 0b01, 1).unwrap();
        e.add_term(Cocharacter(vec![-1, 0]), 0b10, 2).unwrap();
        let t = [6u64, 1];
        let v = e.evaluate_deg1(&gen, &Cocharacter(vec![-1, 0]), &t).unwrap();
        assert_eq!(v, kappa(ctx, 6).unwrap());

        // PGL₂: central points evaluate to zero.
        let pgl2 = RootDatum::new(Family::PGL, 2).unwrap();
        let gen = TorusCharGenerator::new(pgl2, ctx);
        let mut e = TorusDHAElem::new(1, 2, 5, 2).unwrap();
        e.add_term(Cocharacter(vec![-2, 0]), 0b1, 1).unwrap();
        assert_eq!(
            e.evaluate_deg1(&gen, &Cocharacter(vec![-2, 0]), &[7, 7]).unwrap(),
            0
        );
        assert_eq!(
            e.evaluate_deg1(&gen, &Cocharacter(vec![-2, 0]), &[6, 1]).unwrap(),
            kappa(ctx, 6).unwrap()
        );

        // SL₂: diag(t, t⁻¹) sees κ(t).
        let sl2 = RootDatum::new(Family::SL, 2).unwrap();
        let gen = TorusCharGenerator::new(sl2, ctx);
        let mut e = TorusDHAElem::new(1, 2, 5, 2).unwrap();
        e.add_term(Cocharacter(vec![-1, 1]), 0b1, 3).unwrap();
        let t_inv = crate::padic::inv_mod(6, m).unwrap();
        assert_eq!(
            e.evaluate_deg1(&gen, &Cocharacter(vec![-1, 1]), &[6, t_inv]).unwrap(),
            3 * kappa(ctx, 6).unwrap() % 25
        );
    }

    #[test]
    fn serde_roundtrip_and_canonical_bytes() {
        let mut e = TorusDHAElem::new(2, 2, 5, 2).unwrap();
        e.add_term(Cocharacter(vec![-1, 0]), 0b11, 7).unwrap();
        e.add_term(Cocharacter(vec![0, 0]), 0b01, 3).unwrap();

        let mut f = TorusDHAElem::new(2, 2, 5, 2).unwrap();
        f.add_term(Cocharacter(vec![0, 0]), 0b01, 3).unwrap();
        f.add_term(Cocharacter(vec![-1, 0]), 0b11, 7).unwrap();

        let se = serde_json::to_string(&e).unwrap();
        let sf = serde_json::to_string(&f).unwrap();
        assert_eq!(se, sf, "insertion order must not leak into the bytes");
        let back: TorusDHAElem = serde_json::from_str(&se).unwrap();
        assert_eq!(back, e);
        assert!(se.contains("\"wedge\":[1,2]"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn random_monomial_pairs_commute_with_sign(
            k1 in prop::collection::vec(-3i64..=3, 3),
            k2 in prop::collection::vec(-3i64..=3, 3),
            m1 in 0u32..8,
            m2 in 0u32..8,
            c1 in 1u64..25,
            c2 in 1u64..25,
        ) {
            let w1: Vec<u32> = (0..3).filter(|b| m1 & (1 << b) != 0).map(|b| b + 1).collect();
            let w2: Vec<u32> = (0..3).filter(|b| m2 & (1 << b) != 0).map(|b| b + 1).collect();
            let x = TorusDHAElem::monomial(3, 3, 5, 2, Cocharacter(k1), &w1, c1).unwrap();
            let y = TorusDHAElem::monomial(3, 3, 5, 2, Cocharacter(k2), &w2, c2).unwrap();
            let xy = x.mul(&y).unwrap();
            let yx = y.mul(&x).unwrap();
            let sign = (m1.count_ones() * m2.count_ones()) % 2;
            if sign == 0 {
                prop_assert_eq!(xy, yx);
            } else {
                prop_assert_eq!(xy, yx.neg());
            }
        }
    }
}
