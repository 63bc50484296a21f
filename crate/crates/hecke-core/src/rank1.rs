//! Degree-one Hecke classes for the rank-one groups GL2 / SL2 / PGL2.
//!
//! A degree-one element is supported on deep Cartan cells (depth >= 2); at a
//! cell λ it is a multiple of the canonical character of the joint stabilizer
//! K ∩ ϖ^λ K ϖ^{-λ}, scaled so that the value lands in Z/p^a.  This module
//! provides:
//!
//!   * [`HeckeElem1`]: the elements, with coefficients canonical modulo
//!     p^{min(depth-1, a)} per cell;
//!   * [`evaluate_class`]: the value of an element at a pair of cosets and a
//!     stabilizer element, by transporting along a Cartan factorization;
//!   * [`derived_satake1`]: the graded Satake transform, computed as a sum of
//!     corestrictions over torus orbits on the unipotent quotient;
//!   * [`convolve_mixed`]: the module action of the degree-zero algebra,
//!     computed orbit-by-orbit with the cyclic transfer collapse;
//!   * [`permutation_transfer`] / [`transfer_abelian`]: two independent
//!     computations of the transfer map on finite abelian quotients, used as
//!     cross-checks throughout;
//!   * [`satake_matrix`]: the change-of-basis matrix between deep-cell basis
//!     classes and torus characters, with its kernel computed by integer
//!     Smith reduction;
//!   * [`divisibility_report`]: the p-power divisibility of transform values
//!     against the root pairing of the evaluation key.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::config::ComputeOpts;
use crate::cosets::{subgroup_index, torus_stabilizer, transversal, IntMat, StabilizerKind, Transversal};
use crate::error::{HeckeError, Result};
use crate::hecke0::{EnumStats, HeckeElem0};
use crate::padic::{
    checked_p_pow, inv_mod, kappa, p_pow, pow_mod, quadratic_nonresidue, PrecisionContext, PScalar,
};
use crate::pmatrix::{int_snf, PMatrix};
use crate::root_datum::{Cocharacter, Family, RootDatum};
use crate::torus::{TorusCharGenerator, TorusDHAElem};

fn require_rank_one(datum: &RootDatum) -> Result<()> {
    if datum.n != 2 {
        return Err(HeckeError::InvalidParameter(format!(
            "degree-one classes are implemented for rank-one groups only, got {}{}",
            datum.family, datum.n
        )));
    }
    Ok(())
}

/// Depth of a canonical (weakly increasing) cell: λ_2 - λ_1 >= 0.
fn cell_depth(cell: &Cocharacter) -> i64 {
    cell.0[1] - cell.0[0]
}

fn mul_mod(x: u64, y: u64, m: u64) -> u64 {
    (x as u128 * y as u128 % m as u128) as u64
}

fn reduce_i128(c: i128, m: u64) -> u64 {
    let m = m as i128;
    (((c % m) + m) % m) as u64
}

fn p_pow_i128(p: u64, k: u32) -> i128 {
    let mut acc: i128 = 1;
    for _ in 0..k {
        acc *= p as i128;
    }
    acc
}

/// Unit residue with as many digits as the bookkeeping still certifies.
/// Transports through inverted coset representatives lose the pivot
/// valuations, but κ mod p^a only needs a + 2 digits of its argument.
fn unit_residue(ctx: PrecisionContext, s: &PScalar) -> Result<u64> {
    let floor = (ctx.a() + 2).min(ctx.n_digits());
    let mut k = ctx.n_digits();
    loop {
        match s.residue_mod(k) {
            Ok(r) => return Ok(r),
            Err(e) => {
                if k <= floor {
                    return Err(e);
                }
                k -= 1;
            }
        }
    }
}

/// A degree-one element: finitely many deep cells, one coefficient each.
/// The coefficient at a cell of depth d multiplies a class of order
/// p^{min(d-1, a)}, and is stored canonically modulo that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeckeElem1 {
    pub datum: RootDatum,
    pub ctx: PrecisionContext,
    support: BTreeMap<Cocharacter, u64>,
}

impl HeckeElem1 {
    pub fn new(datum: RootDatum, ctx: PrecisionContext) -> Result<Self> {
        require_rank_one(&datum)?;
        Ok(HeckeElem1 {
            datum,
            ctx,
            support: BTreeMap::new(),
        })
    }

    /// The basis class at one cell, coefficient 1.
    pub fn basis(datum: RootDatum, ctx: PrecisionContext, cell: Cocharacter) -> Result<Self> {
        let mut e = HeckeElem1::new(datum, ctx)?;
        e.add_term(cell, 1)?;
        Ok(e)
    }

    /// Order of the class carried by `cell`: p^{min(depth-1, a)}.
    pub fn coeff_modulus(&self, cell: &Cocharacter) -> u64 {
        let d = cell_depth(cell).max(1) as u32;
        p_pow(self.ctx.p(), (d - 1).min(self.ctx.a()))
    }

    pub fn add_term(&mut self, cell: Cocharacter, c: i128) -> Result<()> {
        if !self.datum.is_canonical_cell(&cell)? {
            return Err(HeckeError::InvalidParameter(format!(
                "cell {:?} is not canonical for {}{}",
                cell.0, self.datum.family, self.datum.n
            )));
        }
        if cell_depth(&cell) < 2 {
            return Err(HeckeError::InvalidParameter(format!(
                "cell {:?} has depth {} < 2 and carries no degree-one class",
                cell.0,
                cell_depth(&cell)
            )));
        }
        let m = self.coeff_modulus(&cell);
        let cur = self.support.get(&cell).copied().unwrap_or(0);
        let next = (cur + reduce_i128(c, m)) % m;
        if next == 0 {
            self.support.remove(&cell);
        } else {
            self.support.insert(cell, next);
        }
        Ok(())
    }

    pub fn coeff(&self, cell: &Cocharacter) -> u64 {
        self.support.get(cell).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Cocharacter, u64)> {
        self.support.iter().map(|(k, &c)| (k, c))
    }

    pub fn num_terms(&self) -> usize {
        self.support.len()
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    /// Largest cell depth in the support (0 when empty).
    pub fn max_depth(&self) -> u32 {
        self.support
            .keys()
            .map(|c| cell_depth(c) as u32)
            .max()
            .unwrap_or(0)
    }

    pub fn scale(&self, c: i128) -> Result<Self> {
        let mut out = HeckeElem1::new(self.datum, self.ctx)?;
        for (k, v) in self.terms() {
            out.add_term(k.clone(), c * v as i128)?;
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_compat(rhs)?;
        let mut out = self.clone();
        for (k, v) in rhs.terms() {
            out.add_term(k.clone(), v as i128)?;
        }
        Ok(out)
    }

    pub fn check_compat(&self, rhs: &Self) -> Result<()> {
        if self.datum != rhs.datum || self.ctx != rhs.ctx {
            return Err(HeckeError::InvalidParameter(
                "mismatched group or precision context".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Term1Repr {
    cell: Vec<i64>,
    coeff: u64,
}

impl Serialize for HeckeElem1 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("HeckeElem1", 6)?;
        st.serialize_field("family", &self.datum.family)?;
        st.serialize_field("n", &self.datum.n)?;
        st.serialize_field("p", &self.ctx.p())?;
        st.serialize_field("precision", &self.ctx.n_digits())?;
        st.serialize_field("a", &self.ctx.a())?;
        let mut terms: Vec<(Vec<i64>, &Cocharacter, u64)> = self
            .support
            .iter()
            .map(|(k, &c)| (self.datum.dominance_sort_key(k), k, c))
            .collect();
        terms.sort();
        let reprs: Vec<Term1Repr> = terms
            .into_iter()
            .map(|(_, k, c)| Term1Repr {
                cell: k.0.clone(),
                coeff: c,
            })
            .collect();
        st.serialize_field("terms", &reprs)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for HeckeElem1 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            family: Family,
            n: usize,
            p: u64,
            precision: u32,
            a: u32,
            terms: Vec<Term1Repr>,
        }
        let r = Repr::deserialize(d)?;
        let datum = RootDatum::new(r.family, r.n).map_err(serde::de::Error::custom)?;
        let ctx = PrecisionContext::new(r.p, r.precision, r.a).map_err(serde::de::Error::custom)?;
        let mut e = HeckeElem1::new(datum, ctx).map_err(serde::de::Error::custom)?;
        for t in r.terms {
            e.add_term(Cocharacter(t.cell), t.coeff as i128)
                .map_err(serde::de::Error::custom)?;
        }
        Ok(e)
    }
}

/// The canonical character of the stabilizer K_λ = K ∩ ϖ^λ K ϖ^{-λ} at a deep
/// cell, valued in Z/p^a after scaling by p^{max(0, a+1-depth)}: on a matrix
/// k = [[a, b], [c, d]] with v_p(c) >= depth the value is
/// p^{scale} · κ(a d^{-1}).  This is a homomorphism modulo p^a
/// (the product correction term has valuation >= depth - 1, killed by the
/// scale) and is conjugation-invariant, so transported values do not depend
/// on the choice of Cartan factorization.
#[derive(Debug, Clone)]
pub struct CanonicalGenerator {
    pub datum: RootDatum,
    pub ctx: PrecisionContext,
    pub cell: Cocharacter,
    pub depth: u32,
}

impl CanonicalGenerator {
    pub fn new(datum: RootDatum, ctx: PrecisionContext, cell: Cocharacter) -> Result<Self> {
        require_rank_one(&datum)?;
        if !datum.is_canonical_cell(&cell)? || cell_depth(&cell) < 2 {
            return Err(HeckeError::InvalidParameter(format!(
                "cell {:?} does not carry a degree-one class",
                cell.0
            )));
        }
        let depth = cell_depth(&cell) as u32;
        Ok(CanonicalGenerator {
            datum,
            ctx,
            cell,
            depth,
        })
    }

    /// Exponent of the p-power prefactor mapping the order-p^{depth-1} class
    /// into Z/p^a.
    pub fn scale_exponent(&self) -> u32 {
        (self.ctx.a() + 1).saturating_sub(self.depth)
    }

    /// Character value at `k`, which must lie in K_cell; values are in Z/p^a.
    pub fn value(&self, k: &PMatrix) -> Result<u64> {
        let ctx = self.ctx;
        if !k.is_in_k(self.datum.family)? {
            return Err(HeckeError::Structural(
                "transported stabilizer element left the maximal compact".into(),
            ));
        }
        // Normalize PGL representatives to the primitive integral matrix so
        // the entries can be read off; GL/SL representatives are integral.
        let m = k.min_entry_valuation()?;
        let kk = if self.datum.family == Family::PGL {
            k.scale_p_pow(-m)
        } else {
            k.clone()
        };
        if !kk.at(1, 0).divisible_by_p_pow(self.depth as i64) {
            return Err(HeckeError::Structural(format!(
                "stabilizer element escapes the depth-{} congruence subgroup",
                self.depth
            )));
        }
        let q = kk.at(0, 0).mul(&kk.at(1, 1).inv()?);
        let u = unit_residue(ctx, &q)?;
        let kap = kappa(ctx, u)?;
        let scale = p_pow(ctx.p(), self.scale_exponent());
        Ok(mul_mod(kap, scale, ctx.coeff_modulus()))
    }
}

/// Value of `f` at the coset pair (xK, yK) on a stabilizer element `h` of the
/// pair.  The invariant of the pair is the Cartan cell of x^{-1}y; off the
/// support the value is 0; on a support cell the value is the coefficient
/// times the canonical character, transported along a Cartan factorization
/// x^{-1}y = k_1 · ϖ^cell · k_2 via k_1^{-1} (x^{-1} h x) k_1.
pub fn evaluate_class(f: &HeckeElem1, x: &PMatrix, y: &PMatrix, h: &PMatrix) -> Result<u64> {
    let datum = f.datum;
    require_rank_one(&datum)?;
    let ctx = f.ctx;
    let xi = x.inverse()?;
    let hx = xi.mul(h)?.mul(x)?;
    if !hx.is_in_k(datum.family)? {
        return Err(HeckeError::InvalidParameter(
            "h does not stabilize the left coset of the pair".into(),
        ));
    }
    let hy = y.inverse()?.mul(h)?.mul(y)?;
    if !hy.is_in_k(datum.family)? {
        return Err(HeckeError::InvalidParameter(
            "h does not stabilize the right coset of the pair".into(),
        ));
    }
    let q = xi.mul(y)?;
    let q_rep = if datum.family == Family::PGL {
        let m = q.min_entry_valuation()?;
        q.scale_p_pow(-m)
    } else {
        q
    };
    let (k1, d_vals, _k2) = q_rep.cartan_factorize()?;
    let cell = datum.normalize(&Cocharacter(d_vals))?;
    let c = f.coeff(&cell);
    if c == 0 {
        return Ok(0);
    }
    let gen = CanonicalGenerator::new(datum, ctx, cell)?;
    let w = k1.inverse()?.mul(&hx)?.mul(&k1)?;
    let val = gen.value(&w)?;
    Ok(mul_mod(c, val, ctx.coeff_modulus()))
}

/// Cartan cell of ϖ^μ · i_α(ε p^{-n}) (for n = 0, of ϖ^μ alone): the minimum
/// valuation is min(μ_1 - n, μ_2) and the determinant valuation is μ_1 + μ_2.
fn orbit_cell(datum: &RootDatum, mu: &Cocharacter, n: u32) -> Result<Cocharacter> {
    let s1 = (mu.0[0] - n as i64).min(mu.0[1]);
    let s2 = mu.0[0] + mu.0[1] - s1;
    datum.normalize(&Cocharacter(vec![s1, s2]))
}

/// The matrix ϖ^μ · i_α(ε p^{-n}) (for n = 0, ϖ^μ).
fn orbit_point(
    datum: &RootDatum,
    ctx: PrecisionContext,
    mu: &Cocharacter,
    n: u32,
    eps: u64,
) -> Result<PMatrix> {
    let _ = datum;
    let d = PMatrix::diag_p_pow(ctx, &mu.0);
    if n == 0 {
        return Ok(d);
    }
    let x = PScalar::from_int(ctx, eps as i128).mul_p_pow(-(n as i64));
    let u = PMatrix::shear(ctx, 2, 0, 1, x);
    d.mul(&u)
}

/// A diagonal unit point of the integral torus, kept both as residues modulo
/// a working p-power (for exact coset bookkeeping) and as tracked p-adics
/// (for character evaluation).  For SL the second entry is forced to the
/// inverse of the first so the determinant certifies as 1.
#[derive(Debug, Clone)]
struct DiagUnit {
    big: u64,
    mod_n: u64,
    e: [u64; 2],
}

impl DiagUnit {
    fn new(datum: &RootDatum, ctx: PrecisionContext, d0: i128, d1: i128, big: u64) -> Result<Self> {
        let p = ctx.p();
        let e0 = reduce_i128(d0, big);
        let e1 = if datum.family == Family::SL {
            inv_mod(e0, big)?
        } else {
            reduce_i128(d1, big)
        };
        if e0.is_multiple_of(p) || e1.is_multiple_of(p) {
            return Err(HeckeError::InvalidParameter(
                "torus sample entries must be units".into(),
            ));
        }
        Ok(DiagUnit {
            big,
            mod_n: ctx.modulus(),
            e: [e0, e1],
        })
    }

    /// Diagonal residues mod p^N of the (unpowered) base point.
    fn base_diag(&self) -> [u64; 2] {
        [self.e[0] % self.mod_n, self.e[1] % self.mod_n]
    }

    /// The k-th power as a matrix with unit-residue entries.
    fn pow_matrix(&self, ctx: PrecisionContext, k: u64) -> Result<PMatrix> {
        let f0 = pow_mod(self.e[0], k, self.big) % self.mod_n;
        let f1 = pow_mod(self.e[1], k, self.big) % self.mod_n;
        PMatrix::from_int_rows(ctx, &[vec![f0 as i128, 0], vec![0, f1 as i128]])
    }

    /// The k-th power as exact integer entries modulo `big`.
    fn pow_ints(&self, k: u64) -> [i128; 4] {
        [
            pow_mod(self.e[0], k, self.big) as i128,
            0,
            0,
            pow_mod(self.e[1], k, self.big) as i128,
        ]
    }
}

/// The i-th basis torus point: the κ-characters evaluate to κ(1+p) at index i
/// and 0 at the others.
fn basis_unit(datum: &RootDatum, ctx: PrecisionContext, i: usize, big: u64) -> Result<DiagUnit> {
    let u = 1 + ctx.p() as i128;
    match datum.family {
        Family::GL => {
            if i == 0 {
                DiagUnit::new(datum, ctx, u, 1, big)
            } else {
                DiagUnit::new(datum, ctx, 1, u, big)
            }
        }
        Family::PGL | Family::SL => DiagUnit::new(datum, ctx, u, 1, big),
    }
}

/// Independent sample points for the κ-linearity cross-check.
fn sample_units(datum: &RootDatum, p: u64) -> Vec<(i128, i128)> {
    let q = 1 + 3 * p as i128;
    match datum.family {
        Family::GL => vec![(2, 3), (q, 2)],
        Family::PGL => vec![(2, 3), (q, 1)],
        Family::SL => vec![(2, 1), (-2, 1), (q, 1)],
    }
}

// ---------------------------------------------------------------------------
// Transfer on finite abelian quotients.

/// Ascending units modulo p^k.
fn units_mod(p: u64, k: u32) -> Result<Vec<u64>> {
    let m = checked_p_pow(p, k).ok_or_else(|| {
        HeckeError::PrecisionStarved(format!("p^{k} exceeds 64-bit bookkeeping"))
    })?;
    Ok((1..m).filter(|u| u % p != 0).collect())
}

/// Image of the root α on the integral torus inside (Z/p^k)^×: every unit for
/// GL and PGL, the squares for SL.
pub fn alpha_unit_image(datum: &RootDatum, p: u64, k: u32) -> Result<Vec<u64>> {
    require_rank_one(datum)?;
    let all = units_mod(p, k)?;
    match datum.family {
        Family::GL | Family::PGL => Ok(all),
        Family::SL => {
            let m = p_pow(p, k);
            let set: BTreeSet<u64> = all.iter().map(|&u| mul_mod(u, u, m)).collect();
            Ok(set.into_iter().collect())
        }
    }
}

/// Transfer G -> H for H <= G <= (Z/modulus)^×, computed by honest coset
/// bookkeeping: decompose G into H-cosets, then take the product of the
/// H-parts of g·r over coset representatives r.
pub fn permutation_transfer(
    modulus: u64,
    group: &[u64],
    subgroup: &[u64],
    g: u64,
) -> Result<u64> {
    let gset: HashSet<u64> = group.iter().copied().collect();
    let hset: HashSet<u64> = subgroup.iter().copied().collect();
    if !gset.contains(&g) {
        return Err(HeckeError::InvalidParameter(
            "transfer argument lies outside the group".into(),
        ));
    }
    if !hset.iter().all(|h| gset.contains(h)) {
        return Err(HeckeError::InvalidParameter(
            "subgroup is not contained in the group".into(),
        ));
    }
    let mut rep_of: HashMap<u64, u64> = HashMap::new();
    let mut reps: Vec<u64> = Vec::new();
    let mut sorted = group.to_vec();
    sorted.sort_unstable();
    for &e in &sorted {
        if rep_of.contains_key(&e) {
            continue;
        }
        reps.push(e);
        for &h in subgroup {
            let member = mul_mod(e, h, modulus);
            if let Some(&prev) = rep_of.get(&member) {
                if prev != e {
                    return Err(HeckeError::InvalidParameter(
                        "subgroup multiplication does not partition the group".into(),
                    ));
                }
            }
            rep_of.insert(member, e);
        }
    }
    let mut acc = 1u64;
    for &r in &reps {
        let gr = mul_mod(g, r, modulus);
        let r2 = *rep_of.get(&gr).ok_or_else(|| {
            HeckeError::InvalidParameter("group is not closed under multiplication".into())
        })?;
        let h = mul_mod(gr, inv_mod(r2, modulus)?, modulus);
        if !hset.contains(&h) {
            return Err(HeckeError::Structural(
                "transfer factor escaped the subgroup".into(),
            ));
        }
        acc = mul_mod(acc, h, modulus);
    }
    Ok(acc)
}

/// Transfer to a finite-index subgroup of an abelian group: the power map by
/// the index.
pub fn transfer_abelian(g: u64, index: u64, modulus: u64) -> u64 {
    pow_mod(g, index, modulus)
}

/// Cross-check the two transfer computations on a small quotient matching the
/// congruence depth, and (when the quotient is deep enough) the subgroup index
/// against the honest enumeration.
fn transfer_spot_check(datum: &RootDatum, p: u64, n: u32, a: u32) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    let k_q = (n + a).clamp(1, 4);
    let q = p_pow(p, k_q);
    let group = alpha_unit_image(datum, p, k_q)?;
    let depth = n.min(k_q);
    let pd = p_pow(p, depth);
    let subgroup: Vec<u64> = group.iter().copied().filter(|u| u % pd == 1).collect();
    let m_q = (group.len() / subgroup.len()) as u64;
    if k_q >= n {
        let m_idx = subgroup_index(datum, p, n)?;
        if m_q != m_idx {
            return Err(HeckeError::Structural(format!(
                "quotient index {m_q} disagrees with the enumerated stabilizer index {m_idx}"
            )));
        }
    }
    let mut samples = vec![group[1], group[group.len() - 1]];
    if group.contains(&(1 + p)) {
        samples.push(1 + p);
    }
    for g in samples {
        let via_cosets = permutation_transfer(q, &group, &subgroup, g)?;
        let via_power = transfer_abelian(g, m_q, q);
        if via_cosets != via_power {
            return Err(HeckeError::Structural(format!(
                "transfer mismatch on the depth-{depth} quotient: cosets {via_cosets} vs power {via_power}"
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// The graded Satake transform.

/// Why a transform value is (or is not) zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroKind {
    NonZero,
    /// No torus orbit meets the support.
    BySupport,
    /// Orbits meet the support but their contributions cancel mod p^a.
    ByDivisibility,
}

/// One torus orbit on the unipotent quotient and its contribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitContribution {
    pub depth: u32,
    pub epsilon: u64,
    pub cell: Vec<i64>,
    pub in_support: bool,
    /// Stabilizer index [T(O) : T_{α,depth}] mod p^a.
    pub index_mod: u64,
    /// Contribution per torus character, mod p^a.
    pub coeffs: Vec<u64>,
}

/// The transform value at one torus key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Satake1Value {
    pub key: Vec<i64>,
    /// Coefficient of each κ_i, mod p^a.
    pub coeffs: Vec<u64>,
    pub zero: ZeroKind,
    pub orbits: Vec<OrbitContribution>,
}

/// Graded Satake transform of `f` at the torus key `mu`: the sum over
/// T(O)-orbits on U(F)/U(O) of the corestriction of the orbit value.  An
/// orbit of congruence depth n has stabilizer T_{α,n} of index m, and its
/// corestriction sends t to the class value at t^m; the coefficients of the
/// κ-characters are extracted at basis points and cross-checked for
/// κ-linearity at independent samples.
pub fn derived_satake1(
    f: &HeckeElem1,
    mu: &Cocharacter,
    opts: &ComputeOpts,
) -> Result<Satake1Value> {
    let datum = f.datum;
    require_rank_one(&datum)?;
    let ctx = f.ctx;
    let p = ctx.p();
    let pa = ctx.coeff_modulus();
    if mu.len() != 2 {
        return Err(HeckeError::InvalidParameter(format!(
            "torus key {:?} has wrong length",
            mu.0
        )));
    }
    if datum.family == Family::SL && mu.sum() != 0 {
        return Err(HeckeError::InvalidParameter(
            "SL torus keys must sum to zero".into(),
        ));
    }
    if ctx.n_digits() < ctx.a() + 4 {
        return Err(HeckeError::PrecisionStarved(format!(
            "graded transform needs at least a + 4 = {} digits, have {}",
            ctx.a() + 4,
            ctx.n_digits()
        )));
    }
    let key = datum.normalize(mu)?;
    let d = key.0[0] - key.0[1];
    let m_depth = f.max_depth() as i64;
    let builtin = ((m_depth + d.abs()) / 2 + 1).max(1) as u32;
    let bound = opts.depth_max.unwrap_or(builtin);
    let probe = bound + 2;

    let gens = TorusCharGenerator::new(datum, ctx);
    let g_count = gens.count();
    let kinv = inv_mod(kappa(ctx, 1 + p)?, pa)?;
    let big = ctx.modulus();
    let ident = PMatrix::identity(ctx, 2);

    let mut totals = vec![0u64; g_count];
    let mut orbits_out: Vec<OrbitContribution> = Vec::new();
    let mut any_support = false;
    let mut used = 0u64;

    for n in 0..=probe {
        let cell = orbit_cell(&datum, &key, n)?;
        let in_support = f.coeff(&cell) != 0;
        if in_support && n > bound {
            return Err(HeckeError::DepthUnstable(format!(
                "support reached at congruence depth {n} beyond the probe bound {bound}"
            )));
        }
        let eps_list: Vec<u64> = if n == 0 {
            vec![1]
        } else if datum.family == Family::SL {
            vec![1, quadratic_nonresidue(p)]
        } else {
            vec![1]
        };
        if !in_support {
            for eps in eps_list {
                orbits_out.push(OrbitContribution {
                    depth: n,
                    epsilon: eps,
                    cell: cell.0.clone(),
                    in_support: false,
                    index_mod: 0,
                    coeffs: vec![0; g_count],
                });
            }
            continue;
        }
        any_support = true;
        // Honest stabilizer identification and transfer cross-checks at this
        // depth, shared by the ε-orbits.
        let desc = torus_stabilizer(&datum, ctx, n, 0x5EED_0BB5 ^ n as u64)?;
        match desc.kind {
            StabilizerKind::FullKPair if n == 0 => {}
            StabilizerKind::TorusCongruence if n >= 1 && desc.modulus == n => {}
            _ => {
                return Err(HeckeError::Structural(format!(
                    "depth-{n} orbit stabilizer has unexpected shape {:?}",
                    desc.kind
                )));
            }
        }
        transfer_spot_check(&datum, p, n, ctx.a())?;
        let m_idx = subgroup_index(&datum, p, n)?;
        for eps in eps_list {
            let q_mat = orbit_point(&datum, ctx, &key, n, eps)?;
            let mut coeffs_here = vec![0u64; g_count];
            for (i, slot) in coeffs_here.iter_mut().enumerate() {
                let t = basis_unit(&datum, ctx, i, big)?;
                let t_m = t.pow_matrix(ctx, m_idx)?;
                opts.charge(&mut used, 1)?;
                let v = evaluate_class(f, &ident, &q_mat, &t_m)?;
                *slot = mul_mod(v, kinv, pa);
            }
            // κ-linearity of the corestriction at independent samples.
            for (d0, d1) in sample_units(&datum, p) {
                let t = DiagUnit::new(&datum, ctx, d0, d1, big)?;
                let t_m = t.pow_matrix(ctx, m_idx)?;
                opts.charge(&mut used, 1)?;
                let got = evaluate_class(f, &ident, &q_mat, &t_m)?;
                let kv = gens.kappa_vector(&t.base_diag())?;
                let mut expect = 0u64;
                for i in 0..g_count {
                    expect = (expect + mul_mod(coeffs_here[i], kv[i], pa)) % pa;
                }
                if got != expect {
                    return Err(HeckeError::Structural(format!(
                        "corestriction at depth {n} is not κ-linear: sample ({d0},{d1}) gave {got}, expected {expect}"
                    )));
                }
            }
            for i in 0..g_count {
                totals[i] = (totals[i] + coeffs_here[i]) % pa;
            }
            orbits_out.push(OrbitContribution {
                depth: n,
                epsilon: eps,
                cell: cell.0.clone(),
                in_support: true,
                index_mod: m_idx % pa,
                coeffs: coeffs_here,
            });
        }
    }
    let zero = if !any_support {
        ZeroKind::BySupport
    } else if totals.iter().all(|&c| c == 0) {
        ZeroKind::ByDivisibility
    } else {
        ZeroKind::NonZero
    };
    Ok(Satake1Value {
        key: key.0.clone(),
        coeffs: totals,
        zero,
        orbits: orbits_out,
    })
}

/// Torus keys that can receive a nonzero transform value: keys whose depth-n
/// orbit cell lies in the support for some n.
fn candidate_keys(f: &HeckeElem1) -> Result<Vec<Cocharacter>> {
    let datum = f.datum;
    let mut keys: BTreeSet<Cocharacter> = BTreeSet::new();
    for (lam, _) in f.terms() {
        let depth = cell_depth(lam);
        keys.insert(datum.normalize(lam)?);
        keys.insert(datum.normalize(&Cocharacter(vec![lam.0[1], lam.0[0]]))?);
        for n in 1..depth {
            keys.insert(datum.normalize(&Cocharacter(vec![lam.0[0] + n, lam.0[1] - n]))?);
        }
    }
    Ok(keys.into_iter().collect())
}

/// Full graded transform: the torus element collecting every nonzero value,
/// plus the per-key evaluations (including the zero witnesses).
pub fn derived_satake1_all(
    f: &HeckeElem1,
    opts: &ComputeOpts,
) -> Result<(TorusDHAElem, Vec<Satake1Value>)> {
    let datum = f.datum;
    require_rank_one(&datum)?;
    let ctx = f.ctx;
    let mut out = TorusDHAElem::new(datum.cochar_rank(), 2, ctx.p(), ctx.a())?;
    let mut values = Vec::new();
    for key in candidate_keys(f)? {
        let v = derived_satake1(f, &key, opts)?;
        for (i, &c) in v.coeffs.iter().enumerate() {
            if c != 0 {
                out.add_term(Cocharacter(v.key.clone()), 1 << i, c)?;
            }
        }
        values.push(v);
    }
    Ok((out, values))
}

// ---------------------------------------------------------------------------
// Mixed convolution.

/// Position of the degree-zero factor in a mixed convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// t ∘ f
    Left,
    /// f ∘ t
    Right,
}

/// Dual of a canonical cell: the cell of the inverse double coset.
fn dual_cell(datum: &RootDatum, lam: &Cocharacter) -> Result<Cocharacter> {
    datum.normalize(&Cocharacter(vec![-lam.0[1], -lam.0[0]]))
}

/// The stabilizer samples used to pin down an output coefficient at a cell of
/// depth `depth`: a torus point for extraction, the two shear directions for
/// vanishing checks, and a second torus point for consistency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SampleKind {
    TorusUnit(i128),
    UpperShear,
    LowerShear,
}

impl SampleKind {
    /// Integer entries of the sample (as an element of K_ν), reduced mod big.
    fn sigma_ints(
        &self,
        datum: &RootDatum,
        ctx: PrecisionContext,
        side: Side,
        depth: u32,
        big: u64,
    ) -> Result<[i128; 4]> {
        match *self {
            SampleKind::TorusUnit(u) => {
                let d = DiagUnit::new(datum, ctx, u, 1, big)?;
                Ok(d.pow_ints(1))
            }
            // Conjugation by ϖ^{-ν} rescales the shear coordinates; the
            // σ-permutation acts through the conjugated matrix on the right
            // side and through the matrix itself on the left side.
            SampleKind::UpperShear => match side {
                Side::Left => Ok([1, 1, 0, 1]),
                Side::Right => Ok([1, p_pow_i128(ctx.p(), depth), 0, 1]),
            },
            SampleKind::LowerShear => match side {
                Side::Left => Ok([1, 0, p_pow_i128(ctx.p(), depth), 1]),
                Side::Right => Ok([1, 0, 1, 1]),
            },
        }
    }

    /// The k-th power of the sample as a matrix (the original element, not
    /// its conjugate: evaluation happens at the original pair).
    fn eval_pow(
        &self,
        datum: &RootDatum,
        ctx: PrecisionContext,
        depth: u32,
        k: u64,
        big: u64,
    ) -> Result<PMatrix> {
        match *self {
            SampleKind::TorusUnit(u) => DiagUnit::new(datum, ctx, u, 1, big)?.pow_matrix(ctx, k),
            SampleKind::UpperShear => {
                let x = PScalar::from_int(ctx, k as i128);
                Ok(PMatrix::shear(ctx, 2, 0, 1, x))
            }
            SampleKind::LowerShear => {
                let x = PScalar::from_int(ctx, k as i128 * p_pow_i128(ctx.p(), depth));
                Ok(PMatrix::shear(ctx, 2, 1, 0, x))
            }
        }
    }
}

/// Mixed convolution of a degree-zero element with a degree-one element.
/// The output coefficient at each candidate cell ν is recovered from the
/// functional
///
///   ψ(h) = Σ over middle cosets x₁, collapsed along ⟨h⟩-orbits, of
///          t(first factor) · f(second factor at h^{orbit length})
///
/// evaluated at a torus extraction point, with shear-direction vanishing and
/// second-point consistency as structural checks.
pub fn convolve_mixed(
    t: &HeckeElem0,
    f: &HeckeElem1,
    side: Side,
    opts: &ComputeOpts,
) -> Result<(HeckeElem1, EnumStats)> {
    let datum = f.datum;
    require_rank_one(&datum)?;
    if t.datum != datum {
        return Err(HeckeError::InvalidParameter(
            "mixed convolution needs both factors on the same group".into(),
        ));
    }
    let ctx = f.ctx;
    let p = ctx.p();
    if t.p != p {
        return Err(HeckeError::InvalidParameter(
            "mixed convolution factors disagree on p".into(),
        ));
    }
    match t.ring {
        crate::hecke0::Ring::Int => {}
        crate::hecke0::Ring::ZmodPa { a } => {
            if a != ctx.a() {
                return Err(HeckeError::InvalidParameter(format!(
                    "degree-zero factor lives mod p^{a}, degree-one factor mod p^{}",
                    ctx.a()
                )));
            }
        }
    }
    let pa = ctx.coeff_modulus();
    let mut out = HeckeElem1::new(datum, ctx)?;
    let mut stats = EnumStats::default();
    if t.is_zero() || f.is_zero() {
        return Ok((out, stats));
    }

    let t_terms: Vec<(Cocharacter, u64)> = t
        .terms()
        .map(|(k, c)| (k.clone(), reduce_i128(c, pa)))
        .collect();

    // Candidate output cells: antidominant points of the summed support box.
    let mut cands: BTreeMap<Cocharacter, Vec<i64>> = BTreeMap::new();
    for (lam, _) in &t_terms {
        for (mu, _) in f.terms() {
            let lo = lam.0[0] + mu.0[0];
            let hi = lam.0[1] + mu.0[1];
            let s = lam.sum() + mu.sum();
            for v0 in lo..=hi {
                let v1 = s - v0;
                if v0 <= v1 && v1 <= hi {
                    let raw = vec![v0, v1];
                    let c = datum.normalize(&Cocharacter(raw.clone()))?;
                    cands.entry(c).or_insert(raw);
                }
            }
        }
    }

    // One transversal per needed double coset.
    let mut trans: HashMap<Cocharacter, Transversal> = HashMap::new();
    for (lam, _) in &t_terms {
        let cell = match side {
            Side::Left => lam.clone(),
            Side::Right => dual_cell(&datum, lam)?,
        };
        if let std::collections::hash_map::Entry::Vacant(slot) = trans.entry(cell) {
            let tv = transversal(&datum, p, slot.key(), opts)?;
            stats.cosets_visited += tv.enumerated;
            slot.insert(tv);
        }
    }
    let max_key_digits = trans.values().map(|tv| tv.key_digits).max().unwrap_or(0);
    let big_k = max_key_digits.max(ctx.n_digits());
    let big = checked_p_pow(p, big_k).ok_or_else(|| {
        HeckeError::PrecisionStarved(format!("p^{big_k} exceeds 64-bit bookkeeping"))
    })?;
    let kinv_unit = match datum.family {
        Family::SL => {
            let u = 1 + p;
            let sq = mul_mod(u % ctx.modulus(), u % ctx.modulus(), ctx.modulus());
            inv_mod(kappa(ctx, sq)?, pa)?
        }
        _ => inv_mod(kappa(ctx, (1 + p) % ctx.modulus())?, pa)?,
    };
    let mut used = 0u64;

    for (nu_c, nu_raw) in &cands {
        let depth_nu = (nu_raw[1] - nu_raw[0]) as u32;
        // Membership per degree-zero support cell: which middle cosets see
        // the degree-one support, and on which cell.
        struct Memb {
            cell_key: Cocharacter,
            members: Vec<usize>,
        }
        let mut membs: Vec<(Cocharacter, u64, Memb)> = Vec::new();
        for (lam, c0) in &t_terms {
            let tcell = match side {
                Side::Left => lam.clone(),
                Side::Right => dual_cell(&datum, lam)?,
            };
            let tv = &trans[&tcell];
            let mut members = Vec::new();
            for (idx, rep) in tv.reps.iter().enumerate() {
                opts.charge(&mut used, 1)?;
                let cell = match side {
                    Side::Left => rep.inv_times_diag(p, nu_raw).cartan_cell(&datum, p)?,
                    Side::Right => {
                        let n2 = 2usize;
                        let m = IntMat {
                            n: n2,
                            e: rep.int_matrix(p),
                            row_shift: vec![nu_raw[0] + rep.scale, nu_raw[1] + rep.scale],
                            col_shift: vec![0; n2],
                        };
                        m.cartan_cell(&datum, p)?
                    }
                };
                if f.coeff(&cell) != 0 {
                    members.push(idx);
                }
            }
            if !members.is_empty() {
                membs.push((
                    tcell.clone(),
                    *c0,
                    Memb {
                        cell_key: tcell,
                        members,
                    },
                ));
            }
        }
        if membs.is_empty() {
            continue;
        }

        let samples = [
            SampleKind::TorusUnit(1 + p as i128),
            SampleKind::UpperShear,
            SampleKind::LowerShear,
            SampleKind::TorusUnit(2),
        ];
        let mut psi = [0u64; 4];
        for (si, sk) in samples.iter().enumerate() {
            let h_int = sk.sigma_ints(&datum, ctx, side, depth_nu, big)?;
            let mut total = 0u64;
            for (tcell, c0, memb) in &membs {
                let _ = tcell;
                let tv = &trans[&memb.cell_key];
                let member_set: HashSet<usize> = memb.members.iter().copied().collect();
                // σ: left multiplication by the sample permutes the middle
                // cosets; compute it through the lattice keys.
                let mut sigma: HashMap<usize, usize> = HashMap::new();
                for &idx in &memb.members {
                    opts.charge(&mut used, 1)?;
                    let z = tv.reps[idx].int_matrix(p);
                    let prod = [
                        h_int[0] * z[0] + h_int[1] * z[2],
                        h_int[0] * z[1] + h_int[1] * z[3],
                        h_int[2] * z[0] + h_int[3] * z[2],
                        h_int[2] * z[1] + h_int[3] * z[3],
                    ];
                    let img = tv.lookup_int(p, &prod)?.ok_or_else(|| {
                        HeckeError::Structural(
                            "stabilizer action left the double coset".into(),
                        )
                    })?;
                    if !member_set.contains(&img) {
                        return Err(HeckeError::Structural(
                            "stabilizer action mixed support and non-support cosets".into(),
                        ));
                    }
                    sigma.insert(idx, img);
                }
                // Collapse along cycles: each cycle contributes the value at
                // the cycle representative on the cycle-length power.
                let mut seen: HashSet<usize> = HashSet::new();
                for &start in &memb.members {
                    if seen.contains(&start) {
                        continue;
                    }
                    let mut cyc = vec![start];
                    seen.insert(start);
                    let mut cur = sigma[&start];
                    while cur != start {
                        seen.insert(cur);
                        cyc.push(cur);
                        cur = sigma[&cur];
                    }
                    let k = cyc.len() as u64;
                    let h_k = sk.eval_pow(&datum, ctx, depth_nu, k, big)?;
                    let rep = &tv.reps[start];
                    opts.charge(&mut used, 1)?;
                    stats.evaluation_points += 1;
                    let val = match side {
                        Side::Left => {
                            let x = rep.to_pmatrix(ctx)?;
                            let y = PMatrix::diag_p_pow(ctx, nu_raw);
                            evaluate_class(f, &x, &y, &h_k)?
                        }
                        Side::Right => {
                            let x = PMatrix::identity(ctx, 2);
                            let y = PMatrix::diag_p_pow(ctx, nu_raw).mul(&rep.to_pmatrix(ctx)?)?;
                            evaluate_class(f, &x, &y, &h_k)?
                        }
                    };
                    total = (total + mul_mod(*c0, val, pa)) % pa;
                }
            }
            psi[si] = total;
        }

        if depth_nu < 2 {
            // Shallow cells carry no degree-one class: everything must cancel.
            if psi.iter().any(|&v| v != 0) {
                return Err(HeckeError::Structural(format!(
                    "mixed convolution leaked onto the shallow cell {:?}: ψ = {:?}",
                    nu_c.0, psi
                )));
            }
            continue;
        }
        // Extraction at the torus point: ψ(h₀) = c · p^{scale} · κ(α-part of h₀).
        if psi[1] != 0 || psi[2] != 0 {
            return Err(HeckeError::Structural(format!(
                "mixed convolution value at {:?} does not kill the shear directions",
                nu_c.0
            )));
        }
        let scale_exp = (ctx.a() + 1).saturating_sub(depth_nu);
        let rhs = mul_mod(psi[0], kinv_unit, pa);
        let scale = p_pow(p, scale_exp);
        if !rhs.is_multiple_of(scale) {
            return Err(HeckeError::Structural(format!(
                "mixed convolution value at {:?} is not divisible by the class scale p^{}",
                nu_c.0, scale_exp
            )));
        }
        let c = rhs / scale;
        if c != 0 {
            out.add_term(nu_c.clone(), c as i128)?;
            // Consistency at the second torus point through the canonical
            // character.
            let gen = CanonicalGenerator::new(datum, ctx, nu_c.clone())?;
            let t2 = DiagUnit::new(&datum, ctx, 2, 1, big)?.pow_matrix(ctx, 1)?;
            let expect = mul_mod(c, gen.value(&t2)?, pa);
            if psi[3] != expect {
                return Err(HeckeError::Structural(format!(
                    "mixed convolution value at {:?} fails the second torus point: {} vs {}",
                    nu_c.0, psi[3], expect
                )));
            }
        } else if psi[3] != 0 {
            return Err(HeckeError::Structural(format!(
                "mixed convolution extracts zero at {:?} but the second torus point sees {}",
                nu_c.0, psi[3]
            )));
        }
    }
    Ok((out, stats))
}

// ---------------------------------------------------------------------------
// The Satake matrix and divisibility reports.

/// Change-of-basis data between the deep-cell basis classes and the torus
/// characters, for PGL2: rows are torus keys (-k, 0) for k = 0..n_max in
/// dominance order, columns the basis classes at depth 2..n_max.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SatakeMatrixReport {
    pub p: u64,
    pub a: u32,
    pub n_max: u32,
    pub row_keys: Vec<Vec<i64>>,
    pub col_cells: Vec<Vec<i64>>,
    /// matrix[row][col], mod p^a.
    pub matrix: Vec<Vec<u64>>,
    /// Invariant factors of the canonical integer lift.
    pub invariant_factors: Vec<i128>,
    /// No nonzero combination of columns vanishes mod p^a.
    pub kernel_trivial: bool,
    /// Each column has a unit at its own depth and nothing deeper.
    pub unit_diagonal: bool,
}

pub fn satake_matrix(
    datum: RootDatum,
    ctx: PrecisionContext,
    n_max: u32,
    opts: &ComputeOpts,
) -> Result<SatakeMatrixReport> {
    require_rank_one(&datum)?;
    if datum.family != Family::PGL {
        return Err(HeckeError::InvalidParameter(
            "the Satake matrix is tabulated against the PGL2 basis".into(),
        ));
    }
    if n_max < 2 {
        return Err(HeckeError::InvalidParameter(
            "need n_max >= 2 for at least one deep cell".into(),
        ));
    }
    let rows: Vec<Cocharacter> = (0..=n_max as i64).map(|k| Cocharacter(vec![-k, 0])).collect();
    let cols: Vec<Cocharacter> = (2..=n_max as i64).map(|k| Cocharacter(vec![-k, 0])).collect();
    let mut matrix = vec![vec![0u64; cols.len()]; rows.len()];
    for (j, cell) in cols.iter().enumerate() {
        let f = HeckeElem1::basis(datum, ctx, cell.clone())?;
        for (i, key) in rows.iter().enumerate() {
            let v = derived_satake1(&f, key, opts)?;
            matrix[i][j] = v.coeffs[0];
        }
    }
    let lift: Vec<Vec<i128>> = matrix
        .iter()
        .map(|r| r.iter().map(|&c| c as i128).collect())
        .collect();
    let (dvals, _, _) = int_snf(&lift);
    let p = ctx.p();
    let nonzero: Vec<i128> = dvals.iter().copied().filter(|&d| d != 0).collect();
    let kernel_trivial =
        nonzero.len() == cols.len() && nonzero.iter().all(|&d| d % p as i128 != 0);
    let mut unit_diagonal = true;
    for (j, cell) in cols.iter().enumerate() {
        let depth = -cell.0[0] as usize;
        if matrix[depth][j].is_multiple_of(p) {
            unit_diagonal = false;
        }
        for (i, row) in matrix.iter().enumerate() {
            if i > depth && row[j] != 0 {
                unit_diagonal = false;
            }
        }
    }
    Ok(SatakeMatrixReport {
        p,
        a: ctx.a(),
        n_max,
        row_keys: rows.into_iter().map(|k| k.0).collect(),
        col_cells: cols.into_iter().map(|k| k.0).collect(),
        matrix,
        invariant_factors: dvals,
        kernel_trivial,
        unit_diagonal,
    })
}

/// One divisibility check: the transform value at a key of positive root
/// pairing h must be divisible by p^{min(h, a)}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivisibilityRow {
    pub key: Vec<i64>,
    pub pairing: i64,
    pub required_pow: u32,
    pub coeffs: Vec<u64>,
    pub zero: ZeroKind,
    pub ok: bool,
}

/// Divisibility of transform values on the dominant side of the torus, for
/// the semisimple rank-one families: keys (h, 0) for PGL, (x, -x) for SL,
/// with pairing up to `max_pairing`.
pub fn divisibility_report(
    f: &HeckeElem1,
    max_pairing: i64,
    opts: &ComputeOpts,
) -> Result<Vec<DivisibilityRow>> {
    let datum = f.datum;
    require_rank_one(&datum)?;
    let ctx = f.ctx;
    let p = ctx.p();
    let keys: Vec<Cocharacter> = match datum.family {
        Family::PGL => (1..=max_pairing).map(|h| Cocharacter(vec![h, 0])).collect(),
        Family::SL => (1..)
            .take_while(|x| 2 * x <= max_pairing)
            .map(|x| Cocharacter(vec![x, -x]))
            .collect(),
        Family::GL => {
            return Err(HeckeError::InvalidParameter(
                "divisibility rows are tabulated for the semisimple rank-one families".into(),
            ));
        }
    };
    let mut rows = Vec::new();
    for key in keys {
        let pairing = datum.pairing(&key, 0)?;
        let v = derived_satake1(f, &key, opts)?;
        let req = (pairing.max(0) as u32).min(ctx.a());
        let pmod = p_pow(p, req);
        let ok = v.coeffs.iter().all(|&c| c % pmod == 0);
        rows.push(DivisibilityRow {
            key: key.0,
            pairing,
            required_pow: req,
            coeffs: v.coeffs,
            zero: v.zero,
            ok,
        });
    }
    Ok(rows)
}
