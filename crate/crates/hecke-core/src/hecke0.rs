//! Degree-zero Hecke algebra: finitely supported bi-invariant functions with
//! integer or Z/p^a coefficients, convolution through explicit coset
//! decompositions, and the constant-term (Satake) maps — directly to the
//! torus, or staged through a Levi subgroup.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::cache::{cached_satake_counts, CountsCache};
use crate::config::ComputeOpts;
use crate::cosets::{depth_windows, transversal, Transversal};
use crate::error::{HeckeError, Result};
use crate::padic::{checked_p_pow, is_prime};
use crate::root_datum::{Cocharacter, Family, RootDatum};

/// Coefficient ring for degree-zero elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ring {
    Int,
    ZmodPa { a: u32 },
}

impl Ring {
    pub fn validate(&self, p: u64) -> Result<()> {
        if let Ring::ZmodPa { a } = self {
            if *a == 0 {
                return Err(HeckeError::InvalidParameter(
                    "coefficient modulus exponent must be positive".into(),
                ));
            }
            if checked_p_pow(p, *a).is_none() {
                return Err(HeckeError::InvalidParameter(format!(
                    "p^{a} does not fit in a machine word"
                )));
            }
        }
        Ok(())
    }

    pub fn modulus(&self, p: u64) -> Option<i128> {
        match self {
            Ring::Int => None,
            Ring::ZmodPa { a } => Some(checked_p_pow(p, *a).map(|m| m as i128)?),
        }
    }

    pub fn reduce(&self, p: u64, c: i128) -> i128 {
        match self.modulus(p) {
            None => c,
            Some(m) => c.rem_euclid(m),
        }
    }
}

fn check_prime(p: u64) -> Result<()> {
    if p < 5 || !is_prime(p) {
        return Err(HeckeError::InvalidParameter(format!(
            "p = {p} must be a prime ≥ 5"
        )));
    }
    Ok(())
}

/// Serialized element shape shared by the degree-zero containers: terms are
/// emitted in dominance order (dominance-larger first, lexicographic tiebreak)
/// so equal elements always serialize to identical bytes.
#[derive(Serialize, Deserialize)]
struct TermRepr {
    key: Vec<i64>,
    coeff: i128,
}

fn ordered_terms(
    datum: &RootDatum,
    support: &BTreeMap<Cocharacter, i128>,
) -> Vec<(Cocharacter, i128)> {
    let mut terms: Vec<(Cocharacter, i128)> =
        support.iter().map(|(k, &c)| (k.clone(), c)).collect();
    terms.sort_by_key(|(k, _)| datum.dominance_sort_key(k));
    terms
}

/// A compactly supported K-bi-invariant function, stored by its values on the
/// canonical antidominant cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeckeElem0 {
    pub datum: RootDatum,
    pub p: u64,
    pub ring: Ring,
    support: BTreeMap<Cocharacter, i128>,
}

impl HeckeElem0 {
    pub fn new(datum: RootDatum, p: u64, ring: Ring) -> Result<Self> {
        check_prime(p)?;
        ring.validate(p)?;
        Ok(HeckeElem0 {
            datum,
            p,
            ring,
            support: BTreeMap::new(),
        })
    }

    /// The indicator of a single double coset K·ϖ^λ·K.
    pub fn basis(datum: RootDatum, p: u64, ring: Ring, cell: Cocharacter) -> Result<Self> {
        let mut e = Self::new(datum, p, ring)?;
        e.add_term(cell, 1)?;
        Ok(e)
    }

    pub fn from_terms(
        datum: RootDatum,
        p: u64,
        ring: Ring,
        terms: Vec<(Cocharacter, i128)>,
    ) -> Result<Self> {
        let mut e = Self::new(datum, p, ring)?;
        for (cell, c) in terms {
            e.add_term(cell, c)?;
        }
        Ok(e)
    }

    /// Adds c·(basis at cell), reducing into the ring and dropping zeros.
    pub fn add_term(&mut self, cell: Cocharacter, c: i128) -> Result<()> {
        if !self.datum.is_canonical_cell(&cell)? {
            return Err(HeckeError::InvalidParameter(format!(
                "{cell} is not a canonical cell for {}{}",
                self.datum.family, self.datum.n
            )));
        }
        let cur = self.support.get(&cell).copied().unwrap_or(0);
        let next = self.ring.reduce(self.p, cur + c);
        if next == 0 {
            self.support.remove(&cell);
        } else {
            self.support.insert(cell, next);
        }
        Ok(())
    }

    pub fn coeff(&self, cell: &Cocharacter) -> i128 {
        self.support.get(cell).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Cocharacter, i128)> {
        self.support.iter().map(|(k, &c)| (k, c))
    }

    pub fn num_terms(&self) -> usize {
        self.support.len()
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_compat(rhs)?;
        let mut out = self.clone();
        for (k, c) in rhs.terms() {
            out.add_term(k.clone(), c)?;
        }
        Ok(out)
    }

    pub fn scale(&self, c: i128) -> Self {
        let mut out = self.clone();
        let keys: Vec<Cocharacter> = out.support.keys().cloned().collect();
        for k in keys {
            let v = out.ring.reduce(out.p, out.support[&k] * c);
            if v == 0 {
                out.support.remove(&k);
            } else {
                out.support.insert(k, v);
            }
        }
        out
    }

    /// Reduction to a smaller coefficient ring (Int → Z/p^a, or lowering a).
    pub fn to_ring(&self, ring: Ring) -> Result<Self> {
        match (self.ring, ring) {
            (Ring::ZmodPa { a: from }, Ring::ZmodPa { a: to }) if to > from => {
                return Err(HeckeError::InvalidParameter(
                    "cannot lift coefficients to a larger modulus".into(),
                ));
            }
            (Ring::ZmodPa { .. }, Ring::Int) => {
                return Err(HeckeError::InvalidParameter(
                    "cannot lift torsion coefficients to the integers".into(),
                ));
            }
            _ => {}
        }
        let mut out = Self::new(self.datum, self.p, ring)?;
        for (k, c) in self.terms() {
            out.add_term(k.clone(), c)?;
        }
        Ok(out)
    }

    fn check_compat(&self, rhs: &Self) -> Result<()> {
        if self.datum != rhs.datum || self.p != rhs.p || self.ring != rhs.ring {
            return Err(HeckeError::InvalidParameter(
                "mismatched group, prime, or coefficient ring".into(),
            ));
        }
        Ok(())
    }
}

impl Serialize for HeckeElem0 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("HeckeElem0", 5)?;
        st.serialize_field("family", &self.datum.family)?;
        st.serialize_field("n", &self.datum.n)?;
        st.serialize_field("p", &self.p)?;
        st.serialize_field("ring", &self.ring)?;
        let terms: Vec<TermRepr> = ordered_terms(&self.datum, &self.support)
            .into_iter()
            .map(|(k, c)| TermRepr { key: k.0, coeff: c })
            .collect();
        st.serialize_field("terms", &terms)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for HeckeElem0 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            family: Family,
            n: usize,
            p: u64,
            ring: Ring,
            terms: Vec<TermRepr>,
        }
        let r = Repr::deserialize(d)?;
        let datum = RootDatum::new(r.family, r.n).map_err(serde::de::Error::custom)?;
        let mut e = HeckeElem0::new(datum, r.p, r.ring).map_err(serde::de::Error::custom)?;
        for t in r.terms {
            e.add_term(Cocharacter(t.key), t.coeff)
                .map_err(serde::de::Error::custom)?;
        }
        Ok(e)
    }
}

/// A finitely supported function on the cocharacter lattice of the torus,
/// with the group-algebra product. Keys are stored in normalized form
/// (PGL: last coordinate 0) and need not be antidominant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusElem0 {
    pub datum: RootDatum,
    pub p: u64,
    pub ring: Ring,
    support: BTreeMap<Cocharacter, i128>,
}

impl TorusElem0 {
    pub fn new(datum: RootDatum, p: u64, ring: Ring) -> Result<Self> {
        check_prime(p)?;
        ring.validate(p)?;
        Ok(TorusElem0 {
            datum,
            p,
            ring,
            support: BTreeMap::new(),
        })
    }

    pub fn basis(datum: RootDatum, p: u64, ring: Ring, key: Cocharacter) -> Result<Self> {
        let mut e = Self::new(datum, p, ring)?;
        e.add_term(key, 1)?;
        Ok(e)
    }

    pub fn one(datum: RootDatum, p: u64, ring: Ring) -> Result<Self> {
        Self::basis(datum, p, ring, Cocharacter(vec![0; datum.n]))
    }

    pub fn add_term(&mut self, key: Cocharacter, c: i128) -> Result<()> {
        let key = self.datum.normalize(&key)?;
        if self.datum.family == Family::SL && key.sum() != 0 {
            return Err(HeckeError::InvalidParameter(format!(
                "{key} is not in the SL cocharacter lattice"
            )));
        }
        let cur = self.support.get(&key).copied().unwrap_or(0);
        let next = self.ring.reduce(self.p, cur + c);
        if next == 0 {
            self.support.remove(&key);
        } else {
            self.support.insert(key, next);
        }
        Ok(())
    }

    pub fn coeff(&self, key: &Cocharacter) -> i128 {
        self.datum
            .normalize(key)
            .map(|k| self.support.get(&k).copied().unwrap_or(0))
            .unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Cocharacter, i128)> {
        self.support.iter().map(|(k, &c)| (k, c))
    }

    pub fn num_terms(&self) -> usize {
        self.support.len()
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_compat(rhs)?;
        let mut out = self.clone();
        for (k, c) in rhs.terms() {
            out.add_term(k.clone(), c)?;
        }
        Ok(out)
    }

    pub fn scale(&self, c: i128) -> Self {
        let mut out = Self::new(self.datum, self.p, self.ring).expect("validated");
        for (k, v) in self.terms() {
            out.add_term(k.clone(), v * c).expect("validated key");
        }
        out
    }

    /// Group-algebra product: keys add, coefficients multiply.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.check_compat(rhs)?;
        let mut out = Self::new(self.datum, self.p, self.ring)?;
        for (k1, c1) in self.terms() {
            for (k2, c2) in rhs.terms() {
                let key = Cocharacter(k1.0.iter().zip(&k2.0).map(|(a, b)| a + b).collect());
                out.add_term(key, c1 * c2)?;
            }
        }
        Ok(out)
    }

    pub fn to_ring(&self, ring: Ring) -> Result<Self> {
        match (self.ring, ring) {
            (Ring::ZmodPa { a: from }, Ring::ZmodPa { a: to }) if to > from => {
                return Err(HeckeError::InvalidParameter(
                    "cannot lift coefficients to a larger modulus".into(),
                ));
            }
            (Ring::ZmodPa { .. }, Ring::Int) => {
                return Err(HeckeError::InvalidParameter(
                    "cannot lift torsion coefficients to the integers".into(),
                ));
            }
            _ => {}
        }
        let mut out = Self::new(self.datum, self.p, ring)?;
        for (k, c) in self.terms() {
            out.add_term(k.clone(), c)?;
        }
        Ok(out)
    }

    fn check_compat(&self, rhs: &Self) -> Result<()> {
        if self.datum != rhs.datum || self.p != rhs.p || self.ring != rhs.ring {
            return Err(HeckeError::InvalidParameter(
                "mismatched group, prime, or coefficient ring".into(),
            ));
        }
        Ok(())
    }
}

impl Serialize for TorusElem0 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("TorusElem0", 5)?;
        st.serialize_field("family", &self.datum.family)?;
        st.serialize_field("n", &self.datum.n)?;
        st.serialize_field("p", &self.p)?;
        st.serialize_field("ring", &self.ring)?;
        let terms: Vec<TermRepr> = ordered_terms(&self.datum, &self.support)
            .into_iter()
            .map(|(k, c)| TermRepr { key: k.0, coeff: c })
            .collect();
        st.serialize_field("terms", &terms)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for TorusElem0 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            family: Family,
            n: usize,
            p: u64,
            ring: Ring,
            terms: Vec<TermRepr>,
        }
        let r = Repr::deserialize(d)?;
        let datum = RootDatum::new(r.family, r.n).map_err(serde::de::Error::custom)?;
        let mut e = TorusElem0::new(datum, r.p, r.ring).map_err(serde::de::Error::custom)?;
        for t in r.terms {
            e.add_term(Cocharacter(t.key), t.coeff)
                .map_err(serde::de::Error::custom)?;
        }
        Ok(e)
    }
}

/// Standard block Levi subgroup, given by the ordered block sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeviDescriptor {
    pub block_sizes: Vec<usize>,
}

impl LeviDescriptor {
    pub fn new(block_sizes: Vec<usize>) -> Result<Self> {
        if block_sizes.is_empty() || block_sizes.contains(&0) {
            return Err(HeckeError::InvalidParameter(
                "Levi blocks must be nonempty".into(),
            ));
        }
        Ok(LeviDescriptor { block_sizes })
    }

    pub fn n(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// (start, len) of each diagonal block.
    pub fn ranges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.block_sizes.len());
        let mut start = 0;
        for &b in &self.block_sizes {
            out.push((start, b));
            start += b;
        }
        out
    }

    pub fn block_of(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n());
        for (b, &len) in self.block_sizes.iter().enumerate() {
            out.extend(std::iter::repeat_n(b, len));
        }
        out
    }

    /// Root positions strictly between different blocks (the unipotent
    /// radical of the standard parabolic).
    pub fn cross_positions(&self) -> Vec<(usize, usize)> {
        let block = self.block_of();
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if block[i] != block[j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Whether a key is blockwise weakly increasing.
    pub fn is_blockwise_antidominant(&self, key: &[i64]) -> bool {
        self.ranges()
            .iter()
            .all(|&(s, l)| key[s..s + l].windows(2).all(|w| w[0] <= w[1]))
    }
}

/// A K_M-bi-invariant function on a block Levi M, keyed by blockwise
/// antidominant cells. Defined for the GL and SL families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeviElem0 {
    pub datum: RootDatum,
    pub levi: LeviDescriptor,
    pub p: u64,
    pub ring: Ring,
    support: BTreeMap<Cocharacter, i128>,
}

impl LeviElem0 {
    pub fn new(datum: RootDatum, levi: LeviDescriptor, p: u64, ring: Ring) -> Result<Self> {
        check_prime(p)?;
        ring.validate(p)?;
        if levi.n() != datum.n {
            return Err(HeckeError::InvalidParameter(format!(
                "Levi blocks sum to {}, group has n = {}",
                levi.n(),
                datum.n
            )));
        }
        if datum.family == Family::PGL {
            return Err(HeckeError::InvalidParameter(
                "Levi-valued transforms are implemented for GL and SL".into(),
            ));
        }
        Ok(LeviElem0 {
            datum,
            levi,
            p,
            ring,
            support: BTreeMap::new(),
        })
    }

    pub fn add_term(&mut self, key: Cocharacter, c: i128) -> Result<()> {
        if key.len() != self.datum.n || !self.levi.is_blockwise_antidominant(&key.0) {
            return Err(HeckeError::InvalidParameter(format!(
                "{key} is not a blockwise antidominant cell"
            )));
        }
        if self.datum.family == Family::SL && key.sum() != 0 {
            return Err(HeckeError::InvalidParameter(format!(
                "{key} is not in the SL cocharacter lattice"
            )));
        }
        let cur = self.support.get(&key).copied().unwrap_or(0);
        let next = self.ring.reduce(self.p, cur + c);
        if next == 0 {
            self.support.remove(&key);
        } else {
            self.support.insert(key, next);
        }
        Ok(())
    }

    pub fn coeff(&self, key: &Cocharacter) -> i128 {
        self.support.get(key).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Cocharacter, i128)> {
        self.support.iter().map(|(k, &c)| (k, c))
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.support.len()
    }
}

impl Serialize for LeviElem0 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("LeviElem0", 6)?;
        st.serialize_field("family", &self.datum.family)?;
        st.serialize_field("n", &self.datum.n)?;
        st.serialize_field("blocks", &self.levi.block_sizes)?;
        st.serialize_field("p", &self.p)?;
        st.serialize_field("ring", &self.ring)?;
        let terms: Vec<TermRepr> = ordered_terms(&self.datum, &self.support)
            .into_iter()
            .map(|(k, c)| TermRepr { key: k.0, coeff: c })
            .collect();
        st.serialize_field("terms", &terms)?;
        st.end()
    }
}

/// Work measures reported alongside transform results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumStats {
    pub cosets_visited: u64,
    pub evaluation_points: u64,
}

impl EnumStats {
    pub fn absorb(&mut self, other: EnumStats) {
        self.cosets_visited += other.cosets_visited;
        self.evaluation_points += other.evaluation_points;
    }
}

/// Convolution F₁ ∗ F₂ via a left-coset decomposition of each double coset in
/// the support of F₁.
pub fn convolve0(f1: &HeckeElem0, f2: &HeckeElem0, opts: &ComputeOpts) -> Result<HeckeElem0> {
    f1.check_compat(f2)?;
    let datum = f1.datum;
    let p = f1.p;
    let n = datum.n;
    let mut out = HeckeElem0::new(datum, p, f1.ring)?;
    if f1.is_zero() || f2.is_zero() {
        return Ok(out);
    }
    let mut trans: HashMap<Cocharacter, Transversal> = HashMap::new();
    let mut used = 0u64;
    for (lam, c1) in f1.terms() {
        if !trans.contains_key(lam) {
            trans.insert(lam.clone(), transversal(&datum, p, lam, opts)?);
        }
        let t = &trans[lam];
        // Candidate evaluation points ν, one raw representative per
        // normalized class: componentwise within [λ_min+μ_min, λ_max+μ_max]
        // and sum-matched to Σλ + Σμ for some μ in the support of F₂.
        let mut cands: BTreeMap<Cocharacter, Vec<i64>> = BTreeMap::new();
        for (mu, _) in f2.terms() {
            let lo = lam.0[0] + mu.0[0];
            let hi = lam.0[n - 1] + mu.0[n - 1];
            let total = lam.sum() + mu.sum();
            box_tuples_sorted(lo, hi, n, total, &mut |nu| {
                let norm = datum.normalize(&Cocharacter(nu.to_vec()))?;
                cands.entry(norm).or_insert_with(|| nu.to_vec());
                Ok(())
            })?;
        }
        for (norm, nu) in cands {
            let mut acc: i128 = 0;
            for rep in &t.reps {
                opts.charge(&mut used, 1)?;
                let cell = rep.inv_times_diag(p, &nu).cartan_vals(p)?;
                let c2 = f2.coeff(&datum.normalize(&Cocharacter(cell))?);
                acc += c2;
            }
            out.add_term(norm, c1 * acc)?;
        }
    }
    Ok(out)
}

/// All weakly increasing n-tuples in [lo, hi] with the given sum.
fn box_tuples_sorted(
    lo: i64,
    hi: i64,
    n: usize,
    total: i64,
    f: &mut dyn FnMut(&[i64]) -> Result<()>,
) -> Result<()> {
    fn rec(
        lo: i64,
        hi: i64,
        n: usize,
        total: i64,
        cur: &mut Vec<i64>,
        f: &mut dyn FnMut(&[i64]) -> Result<()>,
    ) -> Result<()> {
        if cur.len() == n {
            if total == 0 {
                f(cur)?;
            }
            return Ok(());
        }
        let rem = (n - cur.len()) as i64;
        let start = cur.last().copied().unwrap_or(lo).max(lo);
        for v in start..=hi {
            // Remaining coordinates are ≥ v and ≤ hi.
            let rest = rem - 1;
            if total - v < rest * v || total - v > rest * hi {
                continue;
            }
            cur.push(v);
            rec(lo, hi, n, total - v, cur, f)?;
            cur.pop();
        }
        Ok(())
    }
    rec(lo, hi, n, total, &mut Vec::with_capacity(n), f)
}

/// All n-tuples in [lo, hi]^n with the given sum (arbitrary order).
fn box_tuples(
    lo: i64,
    hi: i64,
    n: usize,
    total: i64,
    f: &mut dyn FnMut(&[i64]) -> Result<()>,
) -> Result<()> {
    fn rec(
        lo: i64,
        hi: i64,
        n: usize,
        total: i64,
        cur: &mut Vec<i64>,
        f: &mut dyn FnMut(&[i64]) -> Result<()>,
    ) -> Result<()> {
        if cur.len() == n {
            if total == 0 {
                f(cur)?;
            }
            return Ok(());
        }
        let rest = (n - cur.len()) as i64 - 1;
        for v in lo..=hi {
            if total - v < rest * lo || total - v > rest * hi {
                continue;
            }
            cur.push(v);
            rec(lo, hi, n, total - v, cur, f)?;
            cur.pop();
        }
        Ok(())
    }
    rec(lo, hi, n, total, &mut Vec::with_capacity(n), f)
}

/// Raw sum-matched representatives of the support cells at the evaluation
/// point ν: for GL/SL exactly the cells with matching total; for PGL each
/// cell shifted along the center when the total difference is divisible by n.
fn matched_support(datum: &RootDatum, supp: Vec<Vec<i64>>, nu_sum: i64) -> Vec<Vec<i64>> {
    let n = datum.n as i64;
    supp.into_iter()
        .filter_map(|cell| {
            let s: i64 = cell.iter().sum();
            match datum.family {
                Family::GL | Family::SL => (s == nu_sum).then_some(cell),
                Family::PGL => {
                    let d = nu_sum - s;
                    (d % n == 0).then(|| cell.iter().map(|x| x + d / n).collect())
                }
            }
        })
        .collect()
}

fn sorted_key(nu: &[i64]) -> Cocharacter {
    let mut v = nu.to_vec();
    v.sort_unstable();
    Cocharacter(v)
}

/// The Satake transform to the full torus: S(F)(ϖ^ν) = Σ_u F(ϖ^ν·u) over the
/// unipotent cosets, evaluated at one representative per torus key.
pub fn satake0(
    f: &HeckeElem0,
    mut cache: Option<&mut CountsCache>,
    opts: &ComputeOpts,
) -> Result<(TorusElem0, EnumStats)> {
    let datum = f.datum;
    let p = f.p;
    let n = datum.n;
    let positions = datum.positive_roots();
    let mut out = TorusElem0::new(datum, p, f.ring)?;
    let mut stats = EnumStats::default();
    let supp: Vec<Vec<i64>> = f.terms().map(|(k, _)| k.0.clone()).collect();
    // One raw representative per normalized torus key: every key with a
    // nonzero value has a sum-matched representative inside some support
    // cell's coordinate box.
    let mut cands: BTreeMap<Cocharacter, Vec<i64>> = BTreeMap::new();
    for cell in &supp {
        let (lo, hi) = (cell[0], cell[n - 1]);
        box_tuples(lo, hi, n, cell.iter().sum(), &mut |nu| {
            let norm = datum.normalize(&Cocharacter(nu.to_vec()))?;
            cands.entry(norm).or_insert_with(|| nu.to_vec());
            Ok(())
        })?;
    }
    for (norm, nu) in cands {
        let matched = matched_support(&datum, supp.clone(), nu.iter().sum());
        if matched.is_empty() {
            continue;
        }
        let srt = sorted_key(&nu);
        let mut reachable = false;
        for cell in &matched {
            if datum.dominance_leq(&Cocharacter(cell.clone()), &srt)? {
                reachable = true;
                break;
            }
        }
        if !reachable {
            continue;
        }
        let windows = depth_windows(&nu, &positions, &matched, opts.window_extra)?;
        let counts = cached_satake_counts(
            cache.as_deref_mut(),
            &datum,
            p,
            &nu,
            &positions,
            &windows,
            opts,
        )?;
        stats.cosets_visited += counts.visited;
        stats.evaluation_points += 1;
        let mut acc: i128 = 0;
        for (cell, &count) in &counts.counts {
            let c = f.coeff(&datum.normalize(&Cocharacter(cell.clone()))?);
            if c != 0 {
                acc += c * count as i128;
            }
        }
        out.add_term(norm, acc)?;
    }
    Ok((out, stats))
}

/// First stage of the transitivity factorization: the constant term along the
/// standard parabolic with the given Levi, computed by summing over the
/// cross-block unipotent cosets only.
pub fn satake0_levi(
    f: &HeckeElem0,
    levi: &LeviDescriptor,
    mut cache: Option<&mut CountsCache>,
    opts: &ComputeOpts,
) -> Result<(LeviElem0, EnumStats)> {
    let datum = f.datum;
    let p = f.p;
    let n = datum.n;
    let positions = levi.cross_positions();
    let mut out = LeviElem0::new(datum, levi.clone(), p, f.ring)?;
    let mut stats = EnumStats::default();
    let supp: Vec<Vec<i64>> = f.terms().map(|(k, _)| k.0.clone()).collect();
    let mut cands: BTreeMap<Cocharacter, ()> = BTreeMap::new();
    for cell in &supp {
        let (lo, hi) = (cell[0], cell[n - 1]);
        box_tuples(lo, hi, n, cell.iter().sum(), &mut |nu| {
            if levi.is_blockwise_antidominant(nu) {
                cands.entry(Cocharacter(nu.to_vec())).or_insert(());
            }
            Ok(())
        })?;
    }
    for (nu_key, ()) in cands {
        let nu = nu_key.0.clone();
        let matched = matched_support(&datum, supp.clone(), nu.iter().sum());
        if matched.is_empty() {
            continue;
        }
        let srt = sorted_key(&nu);
        let mut reachable = false;
        for cell in &matched {
            if datum.dominance_leq(&Cocharacter(cell.clone()), &srt)? {
                reachable = true;
                break;
            }
        }
        if !reachable {
            continue;
        }
        let windows = depth_windows(&nu, &positions, &matched, opts.window_extra)?;
        let counts = cached_satake_counts(
            cache.as_deref_mut(),
            &datum,
            p,
            &nu,
            &positions,
            &windows,
            opts,
        )?;
        stats.cosets_visited += counts.visited;
        stats.evaluation_points += 1;
        let mut acc: i128 = 0;
        for (cell, &count) in &counts.counts {
            let c = f.coeff(&datum.normalize(&Cocharacter(cell.clone()))?);
            if c != 0 {
                acc += c * count as i128;
            }
        }
        out.add_term(nu_key, acc)?;
    }
    Ok((out, stats))
}

/// Second stage: the Satake transform of a Levi element to the common torus,
/// block by block. The blocks are independent, so the joint coset tally is
/// the product of per-block tallies.
pub fn satake0_levi_to_torus(
    fm: &LeviElem0,
    mut cache: Option<&mut CountsCache>,
    opts: &ComputeOpts,
) -> Result<(TorusElem0, EnumStats)> {
    let datum = fm.datum;
    let p = fm.p;
    let ranges = fm.levi.ranges();
    let mut out = TorusElem0::new(datum, p, fm.ring)?;
    let mut stats = EnumStats::default();
    let supp: Vec<Vec<i64>> = fm.terms().map(|(k, _)| k.0.clone()).collect();
    // Candidates: per support key, the product of per-block sum-matched boxes.
    let mut cands: BTreeMap<Cocharacter, ()> = BTreeMap::new();
    for key in &supp {
        let mut blocks_options: Vec<Vec<Vec<i64>>> = Vec::with_capacity(ranges.len());
        for &(s, l) in &ranges {
            let blk = &key[s..s + l];
            let (lo, hi) = (blk[0], blk[l - 1]);
            let mut opts_b = Vec::new();
            box_tuples(lo, hi, l, blk.iter().sum(), &mut |nu_b| {
                opts_b.push(nu_b.to_vec());
                Ok(())
            })?;
            blocks_options.push(opts_b);
        }
        let mut assembled: Vec<Vec<i64>> = vec![Vec::new()];
        for opts_b in &blocks_options {
            let mut next = Vec::with_capacity(assembled.len() * opts_b.len());
            for prefix in &assembled {
                for choice in opts_b {
                    let mut v = prefix.clone();
                    v.extend_from_slice(choice);
                    next.push(v);
                }
            }
            assembled = next;
        }
        for nu in assembled {
            cands.entry(Cocharacter(nu)).or_insert(());
        }
    }
    for (nu_key, ()) in cands {
        let nu = &nu_key.0;
        // Support keys whose block sums all match ν's block sums.
        let matched: Vec<&Vec<i64>> = supp
            .iter()
            .filter(|key| {
                ranges.iter().all(|&(s, l)| {
                    key[s..s + l].iter().sum::<i64>() == nu[s..s + l].iter().sum::<i64>()
                })
            })
            .collect();
        if matched.is_empty() {
            continue;
        }
        // Per-block tallies as GL_{len} problems in block-local indices.
        let mut block_counts: Vec<BTreeMap<Vec<i64>, u64>> = Vec::with_capacity(ranges.len());
        let mut feasible = true;
        for &(s, l) in &ranges {
            let nu_b = &nu[s..s + l];
            let supp_b: Vec<Vec<i64>> = matched.iter().map(|key| key[s..s + l].to_vec()).collect();
            let datum_b = RootDatum::new(Family::GL, l)?;
            let positions_b = datum_b.positive_roots();
            if l == 1 {
                let mut m = BTreeMap::new();
                m.insert(nu_b.to_vec(), 1);
                block_counts.push(m);
                continue;
            }
            let srt = sorted_key(nu_b);
            if !supp_b
                .iter()
                .map(|c| datum_b.dominance_leq(&Cocharacter(c.clone()), &srt))
                .collect::<Result<Vec<bool>>>()?
                .into_iter()
                .any(|b| b)
            {
                feasible = false;
                break;
            }
            let windows = depth_windows(nu_b, &positions_b, &supp_b, opts.window_extra)?;
            let counts = cached_satake_counts(
                cache.as_deref_mut(),
                &datum_b,
                p,
                nu_b,
                &positions_b,
                &windows,
                opts,
            )?;
            stats.cosets_visited += counts.visited;
            block_counts.push(counts.counts);
        }
        if !feasible {
            continue;
        }
        stats.evaluation_points += 1;
        // Assemble joint cells and weights.
        let mut acc: i128 = 0;
        let mut combos: Vec<(Vec<i64>, u64)> = vec![(Vec::new(), 1)];
        for bc in &block_counts {
            let mut next = Vec::with_capacity(combos.len() * bc.len());
            for (prefix, w) in &combos {
                for (cell_b, &count) in bc {
                    let mut v = prefix.clone();
                    v.extend_from_slice(cell_b);
                    next.push((v, w * count));
                }
            }
            combos = next;
        }
        for (joint, w) in combos {
            let c = fm.coeff(&Cocharacter(joint));
            if c != 0 {
                acc += c * w as i128;
            }
        }
        out.add_term(nu_key, acc)?;
    }
    Ok((out, stats))
}

/// Transitivity of the constant term: the direct torus transform against the
/// two-stage route through a Levi.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransitivityReport {
    pub direct: TorusElem0,
    pub staged: TorusElem0,
    pub equal: bool,
}

pub fn transitivity_check(
    f: &HeckeElem0,
    levi: &LeviDescriptor,
    mut cache: Option<&mut CountsCache>,
    opts: &ComputeOpts,
) -> Result<TransitivityReport> {
    let (direct, _) = satake0(f, cache.as_deref_mut(), opts)?;
    let (mid, _) = satake0_levi(f, levi, cache.as_deref_mut(), opts)?;
    let (staged, _) = satake0_levi_to_torus(&mid, cache, opts)?;
    let equal = direct == staged;
    Ok(TransitivityReport {
        direct,
        staged,
        equal,
    })
}

/// One support-cone violation: a torus key outside the open cone carrying a
/// nonzero value, or an inside key whose value misses the required p-power.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConeViolation {
    pub key: Vec<i64>,
    pub height: i64,
    pub coeff: i128,
    pub required_p_power: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupportConeReport {
    pub a: u32,
    pub checked: usize,
    pub ok: bool,
    pub violations: Vec<ConeViolation>,
}

/// Verifies the image constraint of the mod-p^a transform: values vanish
/// where some simple-root pairing reaches a, and carry valuation ≥ h where
/// the largest pairing is h ∈ (0, a).
pub fn check_support_cone(s: &TorusElem0, a: u32) -> Result<SupportConeReport> {
    let datum = s.datum;
    let p = s.p as i128;
    let pa = (0..a).fold(1i128, |acc, _| acc * p);
    let mut violations = Vec::new();
    let mut checked = 0;
    for (key, c) in s.terms() {
        checked += 1;
        let mut h = 0i64;
        for i in 0..datum.num_simple_roots() {
            h = h.max(datum.pairing(key, i)?);
        }
        if h >= a as i64 {
            if c % pa != 0 {
                violations.push(ConeViolation {
                    key: key.0.clone(),
                    height: h,
                    coeff: c,
                    required_p_power: a,
                });
            }
        } else if h > 0 {
            let ph = (0..h).fold(1i128, |acc, _| acc * p);
            if c % ph != 0 {
                violations.push(ConeViolation {
                    key: key.0.clone(),
                    height: h,
                    coeff: c,
                    required_p_power: h as u32,
                });
            }
        }
    }
    Ok(SupportConeReport {
        a,
        checked,
        ok: violations.is_empty(),
        violations,
    })
}
