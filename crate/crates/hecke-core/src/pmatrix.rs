//! Square matrices over Q_p with precision-tracked entries: products, inverses,
//! Smith normal form over Z_p with invertible-integral witnesses, Iwasawa
//! (Borel × maximal-compact) decomposition, Cartan double-coset invariants, and
//! group-membership tests for each family.

use crate::error::{HeckeError, Result};
use crate::padic::{PrecisionContext, PScalar};
use crate::root_datum::{Cocharacter, Family, RootDatum};

#[derive(Debug, Clone)]
pub struct PMatrix {
    ctx: PrecisionContext,
    n: usize,
    e: Vec<PScalar>, // row-major
}

impl PMatrix {
    pub fn new(ctx: PrecisionContext, n: usize, entries: Vec<PScalar>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(HeckeError::InvalidParameter(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        Ok(PMatrix { ctx, n, e: entries })
    }

    pub fn identity(ctx: PrecisionContext, n: usize) -> Self {
        let mut e = vec![PScalar::exact_zero(ctx); n * n];
        for i in 0..n {
            e[i * n + i] = PScalar::one(ctx);
        }
        PMatrix { ctx, n, e }
    }

    pub fn from_int_rows(ctx: PrecisionContext, rows: &[Vec<i128>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(HeckeError::InvalidParameter("ragged matrix".into()));
        }
        let e = rows
            .iter()
            .flat_map(|r| r.iter().map(|&x| PScalar::from_int(ctx, x)))
            .collect();
        Ok(PMatrix { ctx, n, e })
    }

    /// diag(p^{v_1}, ..., p^{v_n}).
    pub fn diag_p_pow(ctx: PrecisionContext, vals: &[i64]) -> Self {
        let n = vals.len();
        let mut m = Self::identity(ctx, n);
        for (i, &v) in vals.iter().enumerate() {
            m.e[i * n + i] = PScalar::one(ctx).mul_p_pow(v);
        }
        m
    }

    /// I + x·E_{ij} (i ≠ j): a root-group element when x is integral.
    pub fn shear(ctx: PrecisionContext, n: usize, i: usize, j: usize, x: PScalar) -> Self {
        debug_assert!(i != j && i < n && j < n);
        let mut m = Self::identity(ctx, n);
        m.e[i * n + j] = x;
        m
    }

    pub fn ctx(&self) -> PrecisionContext {
        self.ctx
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn at(&self, i: usize, j: usize) -> &PScalar {
        &self.e[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: PScalar) {
        self.e[i * self.n + j] = x;
    }

    pub fn mul(&self, rhs: &PMatrix) -> Result<PMatrix> {
        if self.n != rhs.n {
            return Err(HeckeError::InvalidParameter("size mismatch in product".into()));
        }
        let n = self.n;
        let mut e = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = PScalar::exact_zero(self.ctx);
                for k in 0..n {
                    acc = acc.add(&self.at(i, k).mul(rhs.at(k, j)));
                }
                e.push(acc);
            }
        }
        Ok(PMatrix { ctx: self.ctx, n, e })
    }

    pub fn scale_p_pow(&self, k: i64) -> PMatrix {
        let e = self.e.iter().map(|x| x.mul_p_pow(k)).collect();
        PMatrix {
            ctx: self.ctx,
            n: self.n,
            e,
        }
    }

    /// Minimum certified valuation over all entries; errors if no entry has a
    /// certified leading digit (i.e. the matrix could vanish entirely).
    pub fn min_entry_valuation(&self) -> Result<i64> {
        self.e
            .iter()
            .filter_map(|x| x.valuation())
            .min()
            .ok_or_else(|| {
                HeckeError::PrecisionStarved("no entry with a certified leading digit".into())
            })
    }

    pub fn is_integral(&self) -> bool {
        self.e.iter().all(|x| x.known_zero_to() >= 0)
    }

    /// Determinant by elimination with minimum-valuation pivoting.
    pub fn det(&self) -> Result<PScalar> {
        let n = self.n;
        let mut a = self.clone();
        let mut acc = PScalar::one(self.ctx);
        for t in 0..n {
            let pivot = (t..n)
                .filter_map(|r| a.at(r, t).valuation().map(|v| (v, r)))
                .min();
            let Some((_, r)) = pivot else {
                // Column t vanishes to tracked precision; every expansion term
                // picks one entry per remaining column, giving this bound.
                let bound = (t..n)
                    .map(|j| (t..n).map(|i| a.at(i, j).known_zero_to()).min().unwrap())
                    .fold(0i64, |s, x| s.saturating_add(x))
                    .min(i64::MAX / 4);
                return Ok(acc.mul(&PScalar::zero_mod(self.ctx, bound)));
            };
            if r != t {
                a.swap_rows(r, t);
                acc = acc.neg();
            }
            acc = acc.mul(a.at(t, t));
            let inv = a.at(t, t).inv()?;
            for i in (t + 1)..n {
                let c = a.at(i, t).mul(&inv);
                a.row_sub_multiple(i, t, &c);
            }
        }
        Ok(acc)
    }

    pub fn inverse(&self) -> Result<PMatrix> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = PMatrix::identity(self.ctx, n);
        for t in 0..n {
            let (_, r) = (t..n)
                .filter_map(|r| a.at(r, t).valuation().map(|v| (v, r)))
                .min()
                .ok_or_else(|| {
                    HeckeError::PrecisionStarved("matrix not certifiably invertible".into())
                })?;
            if r != t {
                a.swap_rows(r, t);
                inv.swap_rows(r, t);
            }
            let piv_inv = a.at(t, t).inv()?;
            a.scale_row(t, &piv_inv);
            inv.scale_row(t, &piv_inv);
            for i in 0..n {
                if i != t {
                    let c = *a.at(i, t);
                    a.row_sub_multiple(i, t, &c);
                    inv.row_sub_multiple(i, t, &c);
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for k in 0..self.n {
            self.e.swap(i * self.n + k, j * self.n + k);
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for r in 0..self.n {
            self.e.swap(r * self.n + i, r * self.n + j);
        }
    }

    fn scale_row(&mut self, i: usize, c: &PScalar) {
        for k in 0..self.n {
            self.e[i * self.n + k] = self.e[i * self.n + k].mul(c);
        }
    }

    fn scale_col(&mut self, j: usize, c: &PScalar) {
        for r in 0..self.n {
            self.e[r * self.n + j] = self.e[r * self.n + j].mul(c);
        }
    }

    /// row_i -= c · row_j
    fn row_sub_multiple(&mut self, i: usize, j: usize, c: &PScalar) {
        for k in 0..self.n {
            let d = self.e[j * self.n + k].mul(c);
            self.e[i * self.n + k] = self.e[i * self.n + k].sub(&d);
        }
    }

    /// row_i += c · row_j
    fn row_add_multiple(&mut self, i: usize, j: usize, c: &PScalar) {
        for k in 0..self.n {
            let d = self.e[j * self.n + k].mul(c);
            self.e[i * self.n + k] = self.e[i * self.n + k].add(&d);
        }
    }

    /// col_i -= c · col_j
    fn col_sub_multiple(&mut self, i: usize, j: usize, c: &PScalar) {
        for r in 0..self.n {
            let d = self.e[r * self.n + j].mul(c);
            self.e[r * self.n + i] = self.e[r * self.n + i].sub(&d);
        }
    }

    /// col_i += c · col_j
    fn col_add_multiple(&mut self, i: usize, j: usize, c: &PScalar) {
        for r in 0..self.n {
            let d = self.e[r * self.n + j].mul(c);
            self.e[r * self.n + i] = self.e[r * self.n + i].add(&d);
        }
    }

    /// Membership in the standard maximal compact subgroup, adjusted per
    /// family: GL needs integral entries and unit determinant; SL additionally
    /// det = 1; for PGL the class is in K iff after shifting the minimum entry
    /// valuation to 0 the determinant is a unit.
    pub fn is_in_k(&self, family: Family) -> Result<bool> {
        match family {
            Family::GL | Family::SL => {
                if !self.is_integral() {
                    return Ok(false);
                }
                let d = self.det()?;
                match d.valuation() {
                    Some(0) => {
                        if family == Family::SL {
                            // Equal to 1 up to every digit the bookkeeping
                            // tracks; a certified difference rejects.
                            Ok(d.sub(&PScalar::one(self.ctx)).valuation().is_none())
                        } else {
                            Ok(true)
                        }
                    }
                    Some(_) => Ok(false),
                    None => {
                        if d.known_zero_to() >= 1 {
                            Ok(false)
                        } else {
                            Err(HeckeError::PrecisionStarved(
                                "determinant valuation not certified".into(),
                            ))
                        }
                    }
                }
            }
            Family::PGL => {
                let m = self.min_entry_valuation()?;
                self.scale_p_pow(-m).is_in_k(Family::GL)
            }
        }
    }

    /// Smith normal form over Z_p: self = U · diag(p^{d_1}, ..., p^{d_n}) · V
    /// with U, V ∈ GL_n(Z_p) and d weakly increasing (possibly negative).
    /// Global minimum-valuation pivoting keeps every quotient integral.
    pub fn smith_normal_form(&self) -> Result<SmithNormalForm> {
        let n = self.n;
        let mut a = self.clone();
        let mut u = PMatrix::identity(self.ctx, n);
        let mut v = PMatrix::identity(self.ctx, n);
        let mut d_vals = Vec::with_capacity(n);
        for t in 0..n {
            // Invariant throughout: self = u · a · v.
            let pivot = (t..n)
                .flat_map(|i| (t..n).map(move |j| (i, j)))
                .filter_map(|(i, j)| a.at(i, j).valuation().map(|val| (val, i, j)))
                .min();
            let Some((val, pi, pj)) = pivot else {
                return Err(HeckeError::PrecisionStarved(
                    "no certifiable pivot: matrix is singular to tracked precision".into(),
                ));
            };
            a.swap_rows(pi, t);
            u.swap_cols(pi, t);
            a.swap_cols(pj, t);
            v.swap_rows(pj, t);
            // Normalize the pivot to the exact power p^val.
            let unit = a.at(t, t).mul_p_pow(-val);
            let unit_inv = unit.inv()?;
            a.scale_row(t, &unit_inv);
            u.scale_col(t, &unit);
            for i in (t + 1)..n {
                let c = a.at(i, t).mul_p_pow(-val); // integral by pivot minimality
                a.row_sub_multiple(i, t, &c);
                u.col_add_multiple(t, i, &c);
            }
            for j in (t + 1)..n {
                let c = a.at(t, j).mul_p_pow(-val);
                a.col_sub_multiple(j, t, &c);
                v.row_add_multiple(t, j, &c);
            }
            d_vals.push(val);
        }
        debug_assert!(d_vals.windows(2).all(|w| w[0] <= w[1]));
        Ok(SmithNormalForm { u, d_vals, v })
    }

    /// g = b · k with b upper triangular and k integral with integral inverse,
    /// by clearing rows bottom-up with integral column operations.
    pub fn iwasawa_decompose(&self) -> Result<(PMatrix, PMatrix)> {
        let n = self.n;
        let mut a = self.clone();
        let mut k = PMatrix::identity(self.ctx, n);
        // Invariant: self = a · k.
        for r in (0..n).rev() {
            let (_, pj) = (0..=r)
                .filter_map(|j| a.at(r, j).valuation().map(|v| (v, j)))
                .min()
                .ok_or_else(|| {
                    HeckeError::PrecisionStarved(
                        "row vanishes to tracked precision; cannot decompose".into(),
                    )
                })?;
            a.swap_cols(pj, r);
            k.swap_rows(pj, r);
            let piv_inv = a.at(r, r).inv()?;
            for s in 0..r {
                let c = a.at(r, s).mul(&piv_inv); // integral: pivot has min valuation
                a.col_sub_multiple(s, r, &c);
                k.row_add_multiple(r, s, &c);
            }
        }
        Ok((a, k))
    }

    /// The double-coset invariant K g K ↔ antidominant cocharacter, via the
    /// valuations of the Smith normal form (weakly increasing = antidominant).
    /// For PGL the result is normalized, so any class representative works.
    pub fn cartan_cell(&self, datum: &RootDatum) -> Result<Cocharacter> {
        if datum.n != self.n {
            return Err(HeckeError::InvalidParameter(format!(
                "matrix size {} vs group {}{}",
                self.n, datum.family, datum.n
            )));
        }
        let snf = self.smith_normal_form()?;
        datum.normalize(&Cocharacter(snf.d_vals))
    }

    /// Witnesses for the Cartan decomposition of this exact matrix:
    /// self = k1 · diag(p^{λ_1}, ..., p^{λ_n}) · k2 with k1, k2 ∈ GL_n(Z_p)
    /// and λ weakly increasing (not normalized: exactly this representative).
    pub fn cartan_factorize(&self) -> Result<(PMatrix, Vec<i64>, PMatrix)> {
        let snf = self.smith_normal_form()?;
        Ok((snf.u, snf.d_vals, snf.v))
    }
}

/// M = U · D · V with U, V invertible over Z_p and D = diag(p^{d_1}, ..., p^{d_n}),
/// d weakly increasing (possibly negative for non-integral M).
#[derive(Debug, Clone)]
pub struct SmithNormalForm {
    pub u: PMatrix,
    pub d_vals: Vec<i64>,
    pub v: PMatrix,
}

impl SmithNormalForm {
    pub fn d_matrix(&self) -> PMatrix {
        PMatrix::diag_p_pow(self.u.ctx(), &self.d_vals)
    }
}

/// Exact integer Smith normal form: returns (d, u, v) with u·m·v = diag(d),
/// u, v unimodular, d non-negative and each d_i dividing d_{i+1}. Used for
/// kernel computations modulo p^a on small integer matrices.
pub fn int_snf(m: &[Vec<i128>]) -> (Vec<i128>, Vec<Vec<i128>>, Vec<Vec<i128>>) {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut a: Vec<Vec<i128>> = m.to_vec();
    let mut u = ident_int(rows);
    let mut v = ident_int(cols);
    let steps = rows.min(cols);
    for t in 0..steps {
        loop {
            // Smallest nonzero entry of the working submatrix to the pivot.
            let mut best: Option<(i128, usize, usize)> = None;
            for (i, row) in a.iter().enumerate().skip(t) {
                for (j, &x) in row.iter().enumerate().skip(t) {
                    if x != 0 && best.is_none_or(|(b, _, _)| x.abs() < b) {
                        best = Some((x.abs(), i, j));
                    }
                }
            }
            let Some((_, pi, pj)) = best else {
                break;
            };
            a.swap(pi, t);
            u.swap(pi, t);
            for row in a.iter_mut() {
                row.swap(pj, t);
            }
            for row in v.iter_mut() {
                row.swap(pj, t);
            }
            let piv = a[t][t];
            let mut dirty = false;
            for i in (t + 1)..rows {
                let q = a[i][t].div_euclid(piv);
                if q != 0 {
                    for j in 0..cols {
                        a[i][j] -= q * a[t][j];
                    }
                    for j in 0..rows {
                        u[i][j] -= q * u[t][j];
                    }
                }
                if a[i][t] != 0 {
                    dirty = true;
                }
            }
            for j in (t + 1)..cols {
                let q = a[t][j].div_euclid(piv);
                if q != 0 {
                    for i in 0..rows {
                        a[i][j] -= q * a[i][t];
                    }
                    for i in 0..cols {
                        v[i][j] -= q * v[i][t];
                    }
                }
                if a[t][j] != 0 {
                    dirty = true;
                }
            }
            if dirty {
                continue;
            }
            // Pivot must divide the whole remaining block for the chain
            // condition; fold a bad row in and retry.
            let offender = ((t + 1)..rows)
                .find(|&i| ((t + 1)..cols).any(|j| a[i][j] % piv != 0));
            match offender {
                Some(i) => {
                    for j in 0..cols {
                        a[t][j] += a[i][j];
                    }
                    for j in 0..rows {
                        u[t][j] += u[i][j];
                    }
                }
                None => break,
            }
        }
    }
    let mut d = Vec::with_capacity(steps);
    for t in 0..steps {
        if a[t][t] < 0 {
            for i in 0..cols {
                v[i][t] = -v[i][t];
            }
            a[t][t] = -a[t][t];
        }
        d.push(a[t][t]);
    }
    (d, u, v)
}

fn ident_int(n: usize) -> Vec<Vec<i128>> {
    (0..n)
        .map(|i| (0..n).map(|j| i128::from(i == j)).collect())
        .collect()
}
