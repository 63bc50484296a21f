//! Root-datum combinatorics for the built-in split groups GL(n), SL(n), PGL(n):
//! pairings, dominance order, antidominant representatives and coroot arithmetic.
//!
//! Conventions, fixed once for the whole workspace:
//! - Borel = upper-triangular, so the positive roots are e_i − e_j for i < j and
//!   "antidominant" means weakly increasing valuation vectors.
//! - Cocharacters are stored as length-n integer vectors for every family.
//!   For SL(n) the coordinates sum to zero; for PGL(n) a vector represents its
//!   class modulo the all-ones vector and the canonical representative has last
//!   coordinate 0.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{HeckeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Family {
    GL,
    SL,
    PGL,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::GL => write!(f, "GL"),
            Family::SL => write!(f, "SL"),
            Family::PGL => write!(f, "PGL"),
        }
    }
}

/// A split group from one of the three built-in type-A families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RootDatum {
    pub family: Family,
    /// Matrix size n (so the semisimple rank is n − 1).
    pub n: usize,
}

/// Cocharacter of the diagonal torus, in length-n coordinates (see module docs
/// for the SL/PGL normalizations).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cocharacter(pub Vec<i64>);

impl Cocharacter {
    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().sum()
    }
}

impl fmt::Display for Cocharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl RootDatum {
    pub fn new(family: Family, n: usize) -> Result<Self> {
        let min = match family {
            Family::GL => 1,
            Family::SL | Family::PGL => 2,
        };
        if n < min {
            return Err(HeckeError::InvalidParameter(format!(
                "{family}{n}: need n >= {min}"
            )));
        }
        Ok(RootDatum { family, n })
    }

    /// Rank of the cocharacter lattice: n for GL, n − 1 for SL and PGL.
    pub fn cochar_rank(&self) -> usize {
        match self.family {
            Family::GL => self.n,
            Family::SL | Family::PGL => self.n - 1,
        }
    }

    pub fn num_simple_roots(&self) -> usize {
        self.n - 1
    }

    /// Positive roots as index pairs (i, j), i < j, for the root e_i − e_j.
    pub fn positive_roots(&self) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                v.push((i, j));
            }
        }
        v
    }

    /// The simple root α_i = e_i − e_{i+1} as a character vector.
    pub fn simple_root_vec(&self, i: usize) -> Vec<i64> {
        let mut v = vec![0i64; self.n];
        v[i] = 1;
        v[i + 1] = -1;
        v
    }

    /// The simple coroot α_i^∨ = e_i − e_{i+1} as a cocharacter vector.
    pub fn simple_coroot_vec(&self, i: usize) -> Cocharacter {
        Cocharacter(self.simple_root_vec(i))
    }

    /// Cartan pairing matrix ⟨α_i^∨, α_j⟩; type A_{n−1} for every family.
    pub fn cartan_matrix(&self) -> Vec<Vec<i64>> {
        let r = self.num_simple_roots();
        let mut m = vec![vec![0i64; r]; r];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                let covec = self.simple_coroot_vec(i);
                let root = self.simple_root_vec(j);
                *e = covec.0.iter().zip(&root).map(|(a, b)| a * b).sum();
            }
        }
        m
    }

    fn check_len(&self, mu: &Cocharacter) -> Result<()> {
        if mu.len() != self.n {
            return Err(HeckeError::InvalidParameter(format!(
                "cocharacter length {} does not match {}{}",
                mu.len(),
                self.family,
                self.n
            )));
        }
        Ok(())
    }

    /// ⟨μ, α_i⟩ for the i-th simple root: μ_i − μ_{i+1}.
    /// Well defined on PGL classes because translates by the all-ones vector cancel.
    pub fn pairing(&self, mu: &Cocharacter, alpha: usize) -> Result<i64> {
        self.check_len(mu)?;
        if alpha + 1 >= self.n {
            return Err(HeckeError::InvalidParameter(format!(
                "simple root index {alpha} out of range for n = {}",
                self.n
            )));
        }
        Ok(mu.0[alpha] - mu.0[alpha + 1])
    }

    /// ⟨μ, e_i − e_j⟩ for an arbitrary positive root (i, j).
    pub fn pairing_root(&self, mu: &Cocharacter, root: (usize, usize)) -> i64 {
        mu.0[root.0] - mu.0[root.1]
    }

    pub fn is_antidominant(&self, mu: &Cocharacter) -> Result<bool> {
        self.check_len(mu)?;
        Ok(mu.0.windows(2).all(|w| w[0] <= w[1]))
    }

    /// Canonical storage form of an arbitrary cocharacter: PGL classes are
    /// shifted so the last coordinate is 0; GL/SL vectors are returned as-is.
    pub fn normalize(&self, mu: &Cocharacter) -> Result<Cocharacter> {
        self.check_len(mu)?;
        match self.family {
            Family::PGL => {
                let last = *mu.0.last().expect("n >= 2");
                Ok(Cocharacter(mu.0.iter().map(|c| c - last).collect()))
            }
            _ => Ok(mu.clone()),
        }
    }

    /// The antidominant cocharacter with the given valuation multiset:
    /// sort ascending, then normalize (PGL: last coordinate 0).
    pub fn antidominant_representative(&self, valuations: &[i64]) -> Result<Cocharacter> {
        if valuations.len() != self.n {
            return Err(HeckeError::InvalidParameter(format!(
                "expected {} valuations, got {}",
                self.n,
                valuations.len()
            )));
        }
        let mut v = valuations.to_vec();
        v.sort_unstable();
        self.normalize(&Cocharacter(v))
    }

    /// Whether μ − λ is a non-negative rational combination of the simple
    /// coroots e_i − e_{i+1} (for PGL: modulo the central all-ones direction).
    ///
    /// Closed form via partial sums s_k of d = μ − λ:
    ///   GL/SL:  s_n = 0 and s_k ≥ 0 for all k < n;
    ///   PGL:    n·s_k − k·s_n ≥ 0 for all k < n.
    pub fn dominance_leq(&self, lambda: &Cocharacter, mu: &Cocharacter) -> Result<bool> {
        self.check_len(lambda)?;
        self.check_len(mu)?;
        let d: Vec<i64> = mu.0.iter().zip(&lambda.0).map(|(m, l)| m - l).collect();
        let total: i64 = d.iter().sum();
        let mut s = 0i64;
        match self.family {
            Family::GL | Family::SL => {
                if total != 0 {
                    return Ok(false);
                }
                for &di in &d[..self.n - 1] {
                    s += di;
                    if s < 0 {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Family::PGL => {
                let n = self.n as i64;
                for (k, &di) in d[..self.n - 1].iter().enumerate() {
                    s += di;
                    if n * s - (k as i64 + 1) * total < 0 {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    /// Sort key realizing a linear extension of the dominance order, with
    /// dominance-larger (less antidominant) elements first, then lexicographic
    /// coordinates as tiebreak. Used for canonical serialization order.
    pub fn dominance_sort_key(&self, mu: &Cocharacter) -> Vec<i64> {
        let n = self.n as i64;
        let total: i64 = mu.0.iter().sum();
        let mut key = Vec::with_capacity(2 * self.n);
        let mut s = 0i64;
        for &c in &mu.0[..self.n - 1] {
            s += c;
            // Center-invariant scaled partial sum, negated so that bigger in
            // dominance sorts first.
            key.push(-(n * s - ((key.len() as i64) + 1) * total));
        }
        if self.family != Family::PGL {
            key.push(-total);
        }
        key.extend(&mu.0);
        key
    }

    /// All antidominant cells with coordinates in [−height, 0] (canonical
    /// representatives; for SL the coordinates instead range over [−height, height]
    /// with zero sum).
    pub fn antidominant_box(&self, height: u32) -> Vec<Cocharacter> {
        let h = height as i64;
        let (lo, hi) = match self.family {
            Family::SL => (-h, h),
            _ => (-h, 0),
        };
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(self.n);
        self.box_rec(lo, hi, &mut cur, &mut out);
        out.retain(|c| match self.family {
            Family::SL => c.sum() == 0,
            Family::PGL => *c.0.last().unwrap() == 0,
            Family::GL => true,
        });
        out.sort_by_key(|c| self.dominance_sort_key(c));
        out
    }

    fn box_rec(&self, lo: i64, hi: i64, cur: &mut Vec<i64>, out: &mut Vec<Cocharacter>) {
        if cur.len() == self.n {
            out.push(Cocharacter(cur.clone()));
            return;
        }
        let start = cur.last().copied().unwrap_or(lo).max(lo);
        for v in start..=hi {
            cur.push(v);
            self.box_rec(lo, hi, cur, out);
            cur.pop();
        }
    }

    /// Checks that a vector is a valid canonical cell for this family.
    pub fn is_canonical_cell(&self, mu: &Cocharacter) -> Result<bool> {
        Ok(self.is_antidominant(mu)?
            && match self.family {
                Family::GL => true,
                Family::SL => mu.sum() == 0,
                Family::PGL => *mu.0.last().unwrap() == 0,
            })
    }
}
