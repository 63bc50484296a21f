//! Exact-integer coset enumeration: the workhorse for every transform.
//!
//! Matrices are manipulated as integer arrays with power-of-p row/column
//! scalings, so Cartan invariants come from exact minor valuations — no
//! tracked-precision arithmetic in the hot loops.

use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;

use crate::config::ComputeOpts;
use crate::error::{HeckeError, Result};
use crate::padic::{checked_p_pow, inv_mod, ord_p_i128, p_pow, PrecisionContext, PScalar};
use crate::pmatrix::PMatrix;
use crate::root_datum::{Cocharacter, Family, RootDatum};

/// Integer matrix with separate power-of-p scalings: the true entry at (i, j)
/// is e[i·n + j] · p^{row_shift[i] + col_shift[j]}.
#[derive(Debug, Clone)]
pub struct IntMat {
    pub n: usize,
    pub e: Vec<i128>,
    pub row_shift: Vec<i64>,
    pub col_shift: Vec<i64>,
}

impl IntMat {
    pub fn plain(n: usize, e: Vec<i128>) -> Self {
        IntMat {
            n,
            e,
            row_shift: vec![0; n],
            col_shift: vec![0; n],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> i128 {
        self.e[i * self.n + j]
    }

    /// Valuations of the elementary divisors, weakly increasing: partial sums
    /// are the minimal valuations of k×k minors, computed exactly.
    pub fn cartan_vals(&self, p: u64) -> Result<Vec<i64>> {
        let n = self.n;
        let mut s_prev = 0i64;
        let mut out = Vec::with_capacity(n);
        for k in 1..=n {
            let best = match n {
                2 => self.min_minor_val_2(p, k),
                3 => self.min_minor_val_3(p, k),
                _ => self.min_minor_val_generic(p, k),
            };
            let Some(s_k) = best else {
                return Err(HeckeError::InvalidParameter(
                    "singular matrix has no Cartan invariant".into(),
                ));
            };
            out.push(s_k - s_prev);
            s_prev = s_k;
        }
        debug_assert!(out.windows(2).all(|w| w[0] <= w[1]));
        Ok(out)
    }

    fn entry_val(&self, p: u64, i: usize, j: usize) -> Option<i64> {
        let x = self.at(i, j);
        (x != 0).then(|| ord_p_i128(x, p) as i64 + self.row_shift[i] + self.col_shift[j])
    }

    fn minor2_val(&self, p: u64, r0: usize, r1: usize, c0: usize, c1: usize) -> Option<i64> {
        let d = self.at(r0, c0) * self.at(r1, c1) - self.at(r0, c1) * self.at(r1, c0);
        (d != 0).then(|| {
            ord_p_i128(d, p) as i64
                + self.row_shift[r0]
                + self.row_shift[r1]
                + self.col_shift[c0]
                + self.col_shift[c1]
        })
    }

    fn det3(&self) -> i128 {
        let m = |i: usize, j: usize| self.at(i, j);
        m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
            - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
    }

    fn min_minor_val_2(&self, p: u64, k: usize) -> Option<i64> {
        match k {
            1 => (0..2)
                .flat_map(|i| (0..2).filter_map(move |j| (i, j).into()))
                .filter_map(|(i, j)| self.entry_val(p, i, j))
                .min(),
            2 => self.minor2_val(p, 0, 1, 0, 1),
            _ => None,
        }
    }

    fn min_minor_val_3(&self, p: u64, k: usize) -> Option<i64> {
        match k {
            1 => (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .filter_map(|(i, j)| self.entry_val(p, i, j))
                .min(),
            2 => {
                let pairs = [(0, 1), (0, 2), (1, 2)];
                let mut best = None;
                for &(r0, r1) in &pairs {
                    for &(c0, c1) in &pairs {
                        if let Some(v) = self.minor2_val(p, r0, r1, c0, c1) {
                            best = Some(best.map_or(v, |b: i64| b.min(v)));
                        }
                    }
                }
                best
            }
            3 => {
                let d = self.det3();
                (d != 0).then(|| {
                    ord_p_i128(d, p) as i64
                        + self.row_shift.iter().sum::<i64>()
                        + self.col_shift.iter().sum::<i64>()
                })
            }
            _ => None,
        }
    }

    fn min_minor_val_generic(&self, p: u64, k: usize) -> Option<i64> {
        let n = self.n;
        let mut best: Option<i64> = None;
        for rows in (0..n).combinations(k) {
            for cols in (0..n).combinations(k) {
                let d = self.minor_det(&rows, &cols);
                if d != 0 {
                    let v = ord_p_i128(d, p) as i64
                        + rows.iter().map(|&i| self.row_shift[i]).sum::<i64>()
                        + cols.iter().map(|&j| self.col_shift[j]).sum::<i64>();
                    best = Some(best.map_or(v, |b| b.min(v)));
                }
            }
        }
        best
    }

    fn minor_det(&self, rows: &[usize], cols: &[usize]) -> i128 {
        if rows.len() == 1 {
            return self.at(rows[0], cols[0]);
        }
        let mut acc = 0i128;
        for (t, &c) in cols.iter().enumerate() {
            let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let sub = self.minor_det(&rows[1..], &rest);
            let term = self.at(rows[0], c) * sub;
            if t % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        acc
    }

    /// Cartan cell in the family's canonical coordinates.
    pub fn cartan_cell(&self, datum: &RootDatum, p: u64) -> Result<Cocharacter> {
        datum.normalize(&Cocharacter(self.cartan_vals(p)?))
    }

    pub fn to_pmatrix(&self, ctx: PrecisionContext) -> Result<PMatrix> {
        let n = self.n;
        let mut m = PMatrix::identity(ctx, n);
        for i in 0..n {
            for j in 0..n {
                let s = PScalar::from_int(ctx, self.at(i, j))
                    .mul_p_pow(self.row_shift[i] + self.col_shift[j]);
                m.set(i, j, s);
            }
        }
        Ok(m)
    }
}

/// One coset of the integral points inside the full unipotent group: a digit
/// word c_ρ per enumerated root position, encoding the principal part
/// c_ρ · p^{-d_ρ} of that matrix entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnipotentCoset {
    pub depths: Vec<u32>,
    pub digits: Vec<u64>,
}

/// Lexicographic odometer over digit words: exactly Π p^{d_ρ} items.
pub struct UnipotentTransversal {
    p: u64,
    depths: Vec<u32>,
    caps: Vec<u64>,
    digits: Vec<u64>,
    started: bool,
    done: bool,
}

pub fn transversal_size(p: u64, depths: &[u32]) -> u128 {
    depths.iter().map(|&d| p_pow(p, d) as u128).product()
}

pub fn enumerate_unipotent_transversal(
    p: u64,
    depths: &[u32],
    opts: &ComputeOpts,
) -> Result<UnipotentTransversal> {
    for &d in depths {
        if checked_p_pow(p, d).is_none() {
            return Err(HeckeError::InvalidParameter(format!(
                "depth window {d} too deep for machine words"
            )));
        }
    }
    let total = transversal_size(p, depths);
    if total > opts.budget as u128 {
        return Err(HeckeError::BudgetExceeded(format!(
            "transversal needs {total} cosets, budget is {}",
            opts.budget
        )));
    }
    Ok(UnipotentTransversal {
        p,
        depths: depths.to_vec(),
        caps: depths.iter().map(|&d| p_pow(p, d)).collect(),
        digits: vec![0; depths.len()],
        started: false,
        done: false,
    })
}

impl Iterator for UnipotentTransversal {
    type Item = UnipotentCoset;

    fn next(&mut self) -> Option<UnipotentCoset> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(UnipotentCoset {
                depths: self.depths.clone(),
                digits: self.digits.clone(),
            });
        }
        // Advance the least significant position (the last).
        let mut k = self.digits.len();
        loop {
            if k == 0 {
                self.done = true;
                return None;
            }
            k -= 1;
            self.digits[k] += 1;
            if self.digits[k] < self.caps[k] {
                break;
            }
            self.digits[k] = 0;
        }
        let _ = self.p;
        Some(UnipotentCoset {
            depths: self.depths.clone(),
            digits: self.digits.clone(),
        })
    }
}

/// Partial-sum minima Λ_k = min_λ (λ_1 + ... + λ_k) over a set of weakly
/// increasing cells; the constraints "cell in the set ⟹ s_k ≥ Λ_k" drive the
/// depth windows below.
pub fn partial_sum_mins(supp: &[Vec<i64>]) -> Result<Vec<i64>> {
    let Some(first) = supp.first() else {
        return Err(HeckeError::InvalidParameter(
            "empty support has no enumeration windows".into(),
        ));
    };
    let n = first.len();
    let mut mins = vec![i64::MAX; n];
    for cell in supp {
        let mut s = 0;
        for k in 0..n {
            s += cell[k];
            mins[k] = mins[k].min(s);
        }
    }
    Ok(mins)
}

/// Sufficient depth windows for enumerating cosets u with cell(ϖ^ν·u)
/// possibly in the support: position (i, j) is capped by ν_i − Λ_1 (first
/// minor) and, for 3×3 matrices, by second-minor constraints. `positions`
/// selects which root positions are enumerated (others stay zero).
pub fn depth_windows(
    nu: &[i64],
    positions: &[(usize, usize)],
    supp: &[Vec<i64>],
    extra: u32,
) -> Result<Vec<u32>> {
    let n = nu.len();
    let mins = partial_sum_mins(supp)?;
    let l1 = mins[0];
    let clamp = |x: i64| -> u32 { x.max(0) as u32 };
    let mut base: HashMap<(usize, usize), i64> = HashMap::new();
    for &(i, j) in positions {
        if j <= i || j >= n {
            return Err(HeckeError::InvalidParameter(format!(
                "({i},{j}) is not an upper root position"
            )));
        }
        let mut d = nu[i] - l1;
        if n == 3 {
            let l2 = mins[1];
            match (i, j) {
                (0, 1) => d = d.min(nu[0] + nu[2] - l2),
                (1, 2) => d = d.min(nu[0] + nu[1] - l2),
                _ => {}
            }
        }
        base.insert((i, j), d.max(0));
    }
    if n == 3 && base.contains_key(&(0, 2)) {
        // s_2 constraint through the (rows {0,1}, cols {1,2}) minor, whose
        // top-right term is x_01·x_12 − x_02.
        let l2 = mins[1];
        let direct = nu[0] + nu[1] - l2;
        let cap = match (base.get(&(0, 1)), base.get(&(1, 2))) {
            (Some(&d01), Some(&d12)) => direct.max(d01 + d12),
            _ => direct,
        };
        let e = base.get_mut(&(0, 2)).expect("checked");
        *e = (*e).min(cap.max(0));
    }
    Ok(positions
        .iter()
        .map(|pos| clamp(base[pos]) + extra)
        .collect())
}

/// Tally of Cartan cells over the unipotent transversal at ϖ^ν: counts
/// cell(ϖ^ν·u) for every enumerated coset u, keyed by the raw (sum-matched)
/// weakly increasing valuation vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellCounts {
    pub counts: BTreeMap<Vec<i64>, u64>,
    pub visited: u64,
}

pub fn satake_counts(
    datum: &RootDatum,
    p: u64,
    nu: &[i64],
    positions: &[(usize, usize)],
    windows: &[u32],
    opts: &ComputeOpts,
) -> Result<CellCounts> {
    let n = datum.n;
    if nu.len() != n || positions.len() != windows.len() {
        return Err(HeckeError::InvalidParameter(
            "mismatched shapes in coset tally".into(),
        ));
    }
    // Rows scaled to integers: row i carries p^{ν_i − R_i} with R_i the
    // deepest window in that row.
    let mut r_max = vec![0u32; n];
    for (k, &(i, _)) in positions.iter().enumerate() {
        r_max[i] = r_max[i].max(windows[k]);
    }
    let mut m = IntMat {
        n,
        e: vec![0; n * n],
        row_shift: (0..n).map(|i| nu[i] - r_max[i] as i64).collect(),
        col_shift: vec![0; n],
    };
    for i in 0..n {
        m.e[i * n + i] = p_pow(p, r_max[i]) as i128;
    }
    let mut counts: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
    let mut visited = 0u64;
    let mut budget_used = 0u64;
    let iter = enumerate_unipotent_transversal(p, windows, opts)?;
    for coset in iter {
        opts.charge(&mut budget_used, 1)?;
        visited += 1;
        for (k, &(i, j)) in positions.iter().enumerate() {
            // digit word c encodes entry c·p^{ν_i − d}: as an integer against
            // the row scaling, c·p^{R_i − d}.
            let scale = p_pow(p, r_max[i] - coset.depths[k]) as i128;
            m.e[i * n + j] = coset.digits[k] as i128 * scale;
        }
        let cell = m.cartan_vals(p)?;
        *counts.entry(cell).or_insert(0) += 1;
    }
    Ok(CellCounts { counts, visited })
}

/// One representative z of a left coset z·K inside K·ϖ^λ·K: upper triangular
/// with diagonal p^{v_i} and above-diagonal entries digit·p^{scale}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetRep {
    pub v: Vec<i64>,
    pub digits: Vec<u64>,
    pub scale: i64,
}

impl CosetRep {
    fn positions(n: usize) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                v.push((i, j));
            }
        }
        v
    }

    /// The integer matrix z·p^{−scale}.
    pub fn int_matrix(&self, p: u64) -> Vec<i128> {
        let n = self.v.len();
        let mut e = vec![0i128; n * n];
        for i in 0..n {
            e[i * n + i] = p_big(p, (self.v[i] - self.scale) as u32);
        }
        for (k, &(i, j)) in Self::positions(n).iter().enumerate() {
            e[i * n + j] = self.digits[k] as i128;
        }
        e
    }

    pub fn as_int_mat(&self, p: u64) -> IntMat {
        let n = self.v.len();
        IntMat {
            n,
            e: self.int_matrix(p),
            row_shift: vec![self.scale; n],
            col_shift: vec![0; n],
        }
    }

    pub fn to_pmatrix(&self, ctx: PrecisionContext) -> Result<PMatrix> {
        self.as_int_mat(ctx.p()).to_pmatrix(ctx)
    }

    /// z⁻¹·ϖ^ν as a scaled integer matrix, via the exact adjugate of the
    /// integral part (the determinant is an exact power of p).
    pub fn inv_times_diag(&self, p: u64, nu: &[i64]) -> IntMat {
        let n = self.v.len();
        let z = IntMat::plain(n, self.int_matrix(p));
        let det_val: i64 = self.v.iter().map(|&vi| vi - self.scale).sum();
        let mut adj = vec![0i128; n * n];
        for i in 0..n {
            for j in 0..n {
                let rows: Vec<usize> = (0..n).filter(|&r| r != j).collect();
                let cols: Vec<usize> = (0..n).filter(|&c| c != i).collect();
                let minor = if n == 1 { 1 } else { z.minor_det(&rows, &cols) };
                let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
                adj[i * n + j] = sign * minor;
            }
        }
        IntMat {
            n,
            e: adj,
            row_shift: vec![-self.scale - det_val; n],
            col_shift: nu.to_vec(),
        }
    }
}

fn p_big(p: u64, k: u32) -> i128 {
    let mut acc: i128 = 1;
    for _ in 0..k {
        acc *= p as i128;
    }
    acc
}

/// Complete set of left-coset representatives for K·ϖ^λ·K / K, deduplicated
/// by canonical lattice keys.
#[derive(Debug, Clone)]
pub struct Transversal {
    pub lambda: Cocharacter,
    pub reps: Vec<CosetRep>,
    key_index: HashMap<Vec<u128>, usize>,
    pub key_digits: u32,
    pub scale: i64,
    pub enumerated: u64,
    pub duplicates: u64,
}

impl Transversal {
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    /// Index of the coset containing the integral matrix m·p^{scale}
    /// (entries given as plain integers at the transversal's own scale).
    pub fn lookup_int(&self, p: u64, entries: &[i128]) -> Result<Option<usize>> {
        let key = lattice_key(p, self.key_digits, self.lambda.len(), entries)?;
        Ok(self.key_index.get(&key).copied())
    }
}

pub fn transversal(
    datum: &RootDatum,
    p: u64,
    lambda: &Cocharacter,
    opts: &ComputeOpts,
) -> Result<Transversal> {
    if !datum.is_canonical_cell(lambda)? {
        return Err(HeckeError::InvalidParameter(format!(
            "{lambda} is not a canonical cell for {}{}",
            datum.family, datum.n
        )));
    }
    let n = datum.n;
    let lam = &lambda.0;
    let (lo, hi) = (lam[0], lam[n - 1]);
    let total: i64 = lam.iter().sum();
    let span = (hi - lo) as u32;
    let key_digits = n as u32 * span + 2;
    let positions = CosetRep::positions(n);
    let mut reps = Vec::new();
    let mut key_index = HashMap::new();
    let mut enumerated = 0u64;
    let mut duplicates = 0u64;
    let mut budget_used = 0u64;

    let mut v = vec![lo; n];
    loop {
        if v.iter().sum::<i64>() == total {
            // Digit windows: entry (i, j) ranges over residues c·p^{lo} with
            // c mod p^{v_i − lo}.
            let windows: Vec<u32> = positions
                .iter()
                .map(|&(i, _)| (v[i] - lo) as u32 + opts.window_extra)
                .collect();
            for coset in enumerate_unipotent_transversal(p, &windows, opts)? {
                opts.charge(&mut budget_used, 1)?;
                enumerated += 1;
                let rep = CosetRep {
                    v: v.clone(),
                    digits: coset.digits.clone(),
                    scale: lo,
                };
                let m = rep.as_int_mat(p);
                if m.cartan_vals(p)? != *lam {
                    continue;
                }
                let key = lattice_key(p, key_digits, n, &rep.int_matrix(p))?;
                if key_index.contains_key(&key) {
                    duplicates += 1;
                    continue;
                }
                key_index.insert(key, reps.len());
                reps.push(rep);
            }
        }
        // Odometer over v ∈ [lo, hi]^n.
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(Transversal {
                    lambda: lambda.clone(),
                    reps,
                    key_index,
                    key_digits,
                    scale: lo,
                    enumerated,
                    duplicates,
                });
            }
            k -= 1;
            v[k] += 1;
            if v[k] <= hi {
                break;
            }
            v[k] = lo;
        }
    }
}

/// Canonical key of the lattice spanned by the columns of an integral matrix:
/// the upper-triangular basis with exact p-power pivots p^{e_i} and row-i
/// entries reduced mod p^{e_i}, computed in Z/p^digits. Two integral matrices
/// generate the same column lattice iff their keys agree (digits chosen ≥
/// max pivot valuation + 2).
pub fn lattice_key(p: u64, digits: u32, n: usize, entries: &[i128]) -> Result<Vec<u128>> {
    let pc = p_big(p, digits) as u128;
    let mut a: Vec<u128> = entries
        .iter()
        .map(|&x| (x.rem_euclid(pc as i128)) as u128)
        .collect();
    let ordv = |x: u128| -> u32 {
        if x == 0 {
            return digits;
        }
        let mut v = 0;
        let mut y = x;
        while y.is_multiple_of(p as u128) {
            y /= p as u128;
            v += 1;
        }
        v
    };
    let mut pivot_col_of_row = vec![usize::MAX; n];
    let mut assigned = vec![false; n];
    for r in (0..n).rev() {
        let mut best: Option<(u32, usize)> = None;
        for j in 0..n {
            if assigned[j] {
                continue;
            }
            let v = ordv(a[r * n + j]);
            if v < digits && best.is_none_or(|(bv, bj)| v < bv || (v == bv && j < bj)) {
                best = Some((v, j));
            }
        }
        let Some((e, pj)) = best else {
            return Err(HeckeError::InvalidParameter(
                "column lattice key of a singular matrix".into(),
            ));
        };
        assigned[pj] = true;
        pivot_col_of_row[r] = pj;
        // Normalize the pivot column so its row-r entry is exactly p^e.
        let unit = a[r * n + pj] / p_big(p, e) as u128 % pc;
        let unit_inv = inv_mod((unit % pc) as u64 % p_pow(p, digits), p_pow(p, digits))? as u128;
        for i in 0..n {
            a[i * n + pj] = a[i * n + pj] * unit_inv % pc;
        }
        // Clear row r in the remaining columns.
        for j in 0..n {
            if assigned[j] {
                continue;
            }
            let q = a[r * n + j] / p_big(p, e) as u128;
            if q != 0 {
                for i in 0..n {
                    let sub = q * a[i * n + pj] % pc;
                    a[i * n + j] = (a[i * n + j] + pc - sub) % pc;
                }
            }
        }
    }
    // Permute columns so row r's pivot is column r, then reduce the entries
    // right of each pivot modulo that pivot.
    let mut h = vec![0u128; n * n];
    for r in 0..n {
        for i in 0..n {
            h[i * n + r] = a[i * n + pivot_col_of_row[r]];
        }
    }
    for j in 0..n {
        for r in (0..j).rev() {
            let e = ordv(h[r * n + r]);
            let pe = p_big(p, e) as u128;
            let q = h[r * n + j] / pe;
            if q != 0 {
                for i in 0..n {
                    let sub = q * h[i * n + r] % pc;
                    h[i * n + j] = (h[i * n + j] + pc - sub) % pc;
                }
            }
        }
    }
    let mut key = Vec::with_capacity(n + n * (n - 1) / 2);
    for r in 0..n {
        key.push(ordv(h[r * n + r]) as u128);
    }
    for r in 0..n {
        let pe = p_big(p, ordv(h[r * n + r])) as u128;
        for j in (r + 1)..n {
            key.push(h[r * n + j] % pe);
        }
    }
    Ok(key)
}

/// How the integral torus stabilizes a coset pair at unipotent depth n:
/// everything (depth 0), or the congruence condition α(t) ≡ 1 mod p^n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StabilizerKind {
    FullKPair,
    TorusCongruence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizerDescriptor {
    pub kind: StabilizerKind,
    pub modulus: u32,
    pub allowed_residues: Vec<u64>,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_unit(state: &mut u64, modulus: u64, p: u64) -> u64 {
    loop {
        let u = splitmix64(state) % modulus;
        if !u.is_multiple_of(p) {
            return u;
        }
    }
}

/// Stabilizer of the coset pair (K, u_α(p^{−depth})·K) under the torus action
/// t · (xK) = (t x t⁻¹)K, for the rank-one groups (n = 2). The congruence
/// prediction α(t) ≡ 1 mod p^depth is validated against 200 sampled torus
/// points; a mismatch is reported as a structural error.
pub fn torus_stabilizer(
    datum: &RootDatum,
    ctx: PrecisionContext,
    depth: u32,
    seed: u64,
) -> Result<StabilizerDescriptor> {
    if datum.n != 2 {
        return Err(HeckeError::InvalidParameter(
            "torus stabilizers are only computed in rank one".into(),
        ));
    }
    if depth == 0 {
        return Ok(StabilizerDescriptor {
            kind: StabilizerKind::FullKPair,
            modulus: 0,
            allowed_residues: vec![],
        });
    }
    if depth > ctx.n_digits() {
        return Err(HeckeError::PrecisionStarved(format!(
            "stabilizer depth {depth} exceeds tracked digits {}",
            ctx.n_digits()
        )));
    }
    let p = ctx.p();
    let big = ctx.modulus();
    let pm = p_pow(p, depth);
    let x = PMatrix::shear(ctx, 2, 0, 1, PScalar::one(ctx).mul_p_pow(-(depth as i64)));
    let x_inv = PMatrix::shear(ctx, 2, 0, 1, PScalar::one(ctx).mul_p_pow(-(depth as i64)).neg());
    let mut state = seed ^ 0xA5A5_5A5A_DEAD_BEEF;
    for _ in 0..200 {
        let t1 = sample_unit(&mut state, big, p);
        let t2 = match datum.family {
            Family::SL => inv_mod(t1, big)?,
            _ => sample_unit(&mut state, big, p),
        };
        let mut t = PMatrix::identity(ctx, 2);
        t.set(0, 0, PScalar::from_int(ctx, t1 as i128));
        t.set(1, 1, PScalar::from_int(ctx, t2 as i128));
        // t·(xK) = xK ⟺ x⁻¹ t x t⁻¹ ∈ K (the final t⁻¹ is already in K).
        let conj = x_inv.mul(&t)?.mul(&x)?;
        let stabilizes = conj.is_in_k(datum.family)?;
        let alpha = (t1 as u128 * inv_mod(t2, big)? as u128 % big as u128) as u64 % pm;
        let predicted = alpha == 1;
        if stabilizes != predicted {
            return Err(HeckeError::Structural(format!(
                "stabilizer at depth {depth} is not the congruence subgroup: \
                 α(t) ≡ {alpha} mod p^{depth} but membership = {stabilizes}"
            )));
        }
    }
    Ok(StabilizerDescriptor {
        kind: StabilizerKind::TorusCongruence,
        modulus: depth,
        allowed_residues: vec![1],
    })
}

/// Size of the image of α(t) = t_1/t_2 in (Z/p^m)^× as t runs over the
/// integral torus — the index of the depth-m congruence stabilizer. Computed
/// by honest enumeration of the image.
pub fn subgroup_index(datum: &RootDatum, p: u64, modulus: u32) -> Result<u64> {
    if datum.n != 2 {
        return Err(HeckeError::InvalidParameter(
            "subgroup indices are only computed in rank one".into(),
        ));
    }
    if modulus == 0 {
        return Ok(1);
    }
    let pm = checked_p_pow(p, modulus).ok_or_else(|| {
        HeckeError::InvalidParameter(format!("p^{modulus} too large to enumerate"))
    })?;
    let mut seen = vec![false; pm as usize];
    let mut count = 0u64;
    for u in 1..pm {
        if u % p == 0 {
            continue;
        }
        let img = match datum.family {
            Family::SL => (u as u128 * u as u128 % pm as u128) as u64,
            _ => u,
        };
        if !seen[img as usize] {
            seen[img as usize] = true;
            count += 1;
        }
    }
    Ok(count)
}
