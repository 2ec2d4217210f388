//! Exact integer and rational matrices for resonance lattices.
//!
//! All lattice questions (unimodularity, equality of row lattices,
//! completion to GL(n,ℤ), dual bases) are answered with arbitrary
//! precision arithmetic. Floating point is used only by the CVP oracle.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{PssaError, Result};

/// Dense row-major matrix over ℤ.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from `i64` rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        assert!(rows.iter().all(|x| x.len() == c), "ragged integer matrix");
        IntMatrix {
            rows: r,
            cols: c,
            data: rows.iter().flatten().map(|&v| BigInt::from(v)).collect(),
        }
    }

    pub fn try_from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|x| x.len() != c) {
            return Err(PssaError::Validation("ragged integer matrix".into()));
        }
        Ok(Self::from_rows(rows))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    fn get_mut(&mut self, i: usize, j: usize) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *t.get_mut(j, i) = self.get(i, j).clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "integer matrix shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let prod = a * other.get(l, j);
                    *out.get_mut(i, j) += prod;
                }
            }
        }
        out
    }

    /// The first `k` rows.
    pub fn top_rows(&self, k: usize) -> IntMatrix {
        IntMatrix {
            rows: k,
            cols: self.cols,
            data: self.data[..k * self.cols].to_vec(),
        }
    }

    /// Rows `from..`.
    pub fn rows_from(&self, from: usize) -> IntMatrix {
        IntMatrix {
            rows: self.rows - from,
            cols: self.cols,
            data: self.data[from * self.cols..].to_vec(),
        }
    }

    pub fn stack(&self, below: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, below.cols);
        let mut data = self.data.clone();
        data.extend(below.data.iter().cloned());
        IntMatrix {
            rows: self.rows + below.rows,
            cols: self.cols,
            data,
        }
    }

    /// Block-diagonal `[[self, 0], [0, other]]`.
    pub fn block_diag(&self, other: &IntMatrix) -> IntMatrix {
        let mut out = Self::zeros(self.rows + other.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *out.get_mut(i, j) = self.get(i, j).clone();
            }
        }
        for i in 0..other.rows {
            for j in 0..other.cols {
                *out.get_mut(self.rows + i, self.cols + j) = other.get(i, j).clone();
            }
        }
        out
    }

    pub fn to_i64_rows(&self) -> Result<Vec<Vec<i64>>> {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .map(|v| {
                        v.to_i64()
                            .ok_or_else(|| PssaError::Validation(format!("entry {v} overflows i64")))
                    })
                    .collect()
            })
            .collect()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> BigInt {
        self.data.iter().map(|v| v.abs()).max().unwrap_or_else(BigInt::zero)
    }

    /// Exact determinant (fraction-free Bareiss elimination).
    pub fn det(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        determinant(self.rows, self.data.clone())
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// row[target] -= q · row[source]
    fn sub_row_multiple(&mut self, target: usize, source: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let delta = q * self.get(source, j);
            *self.get_mut(target, j) -= delta;
        }
    }

    fn negate_row(&mut self, r: usize) {
        for j in 0..self.cols {
            let v = -self.get(r, j).clone();
            *self.get_mut(r, j) = v;
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// col[target] += q · col[source]
    fn add_col_multiple(&mut self, target: usize, source: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let delta = q * self.get(i, source);
            *self.get_mut(i, target) += delta;
        }
    }

    fn negate_col(&mut self, c: usize) {
        for i in 0..self.rows {
            let v = -self.get(i, c).clone();
            *self.get_mut(i, c) = v;
        }
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            write!(f, "{}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

fn determinant(n: usize, mut a: Vec<BigInt>) -> BigInt {
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k * n + k].is_zero() {
            match (k + 1..n).find(|&r| !a[r * n + k].is_zero()) {
                Some(r) => {
                    for j in 0..n {
                        a.swap(k * n + j, r * n + j);
                    }
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i * n + j] * &a[k * n + k] - &a[i * n + k] * &a[k * n + j]) / &prev;
                a[i * n + j] = v;
            }
        }
        prev = a[k * n + k].clone();
    }
    sign * &a[n * n - 1]
}

/// All increasing k-subsets of 0..n.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// gcd of all k × k minors of a k × n matrix.
pub fn minor_gcd(a: &IntMatrix) -> BigInt {
    let k = a.nrows();
    let mut g = BigInt::zero();
    for cols in combinations(a.ncols(), k) {
        let data: Vec<BigInt> = (0..k)
            .flat_map(|i| cols.iter().map(move |&j| a.get(i, j).clone()))
            .collect();
        g = g.gcd(&determinant(k, data));
        if g.is_one() {
            break;
        }
    }
    g
}

/// True iff the k × k minors of `a` have gcd 1.
pub fn is_unimodular(a: &IntMatrix) -> Result<bool> {
    let (k, n) = (a.nrows(), a.ncols());
    if k == 0 || k > n {
        return Err(PssaError::dim(format!("{k} × {n} resonance matrix needs 1 ≤ k ≤ n")));
    }
    if a.is_zero() {
        return Err(PssaError::dim("resonance matrix is zero"));
    }
    Ok(minor_gcd(a).is_one())
}

/// A unimodular k × n integer matrix: the resonance relations of a subtorus.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResonanceMatrix(IntMatrix);

impl ResonanceMatrix {
    pub fn new(a: IntMatrix) -> Result<Self> {
        if is_unimodular(&a)? {
            Ok(ResonanceMatrix(a))
        } else {
            Err(PssaError::NotUnimodular)
        }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        Self::new(IntMatrix::try_from_rows(rows)?)
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    pub fn n(&self) -> usize {
        self.0.ncols()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        self.0.to_f64_rows()
    }

    /// Canonical representative of the row lattice (Hermite normal form).
    pub fn canonical_form(&self) -> IntMatrix {
        hermite_normal_form(&self.0).0
    }
}

impl fmt::Display for ResonanceMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Row-style Hermite normal form `H = U·A` with `U ∈ GL(k,ℤ)`.
///
/// Pivots are positive and entries above each pivot lie in `[0, pivot)`.
/// Zero rows (for rank-deficient input) are moved to the bottom.
/// Returns `(H, U, U⁻¹)`.
pub fn hermite_normal_form(a: &IntMatrix) -> (IntMatrix, IntMatrix, IntMatrix) {
    let k = a.nrows();
    let n = a.ncols();
    let mut h = a.clone();
    let mut u = IntMatrix::identity(k);
    let mut u_inv = IntMatrix::identity(k);
    let mut pivot_row = 0;
    for col in 0..n {
        if pivot_row == k {
            break;
        }
        loop {
            // smallest nonzero magnitude at or below the pivot row
            let best = (pivot_row..k)
                .filter(|&r| !h.get(r, col).is_zero())
                .min_by(|&r1, &r2| h.get(r1, col).abs().cmp(&h.get(r2, col).abs()));
            let Some(best) = best else { break };
            h.swap_rows(pivot_row, best);
            u.swap_rows(pivot_row, best);
            u_inv.swap_cols(pivot_row, best);
            let mut done = true;
            for r in pivot_row + 1..k {
                if h.get(r, col).is_zero() {
                    continue;
                }
                let q = h.get(r, col).div_floor(h.get(pivot_row, col));
                h.sub_row_multiple(r, pivot_row, &q);
                u.sub_row_multiple(r, pivot_row, &q);
                u_inv.add_col_multiple(pivot_row, r, &q);
                if !h.get(r, col).is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if h.get(pivot_row, col).is_zero() {
            continue;
        }
        if h.get(pivot_row, col).is_negative() {
            h.negate_row(pivot_row);
            u.negate_row(pivot_row);
            u_inv.negate_col(pivot_row);
        }
        for r in 0..pivot_row {
            let q = h.get(r, col).div_floor(h.get(pivot_row, col));
            h.sub_row_multiple(r, pivot_row, &q);
            u.sub_row_multiple(r, pivot_row, &q);
            u_inv.add_col_multiple(pivot_row, r, &q);
        }
        pivot_row += 1;
    }
    (h, u, u_inv)
}

/// Extends a unimodular k × n matrix to an n × n integer matrix with
/// determinant ±1 whose first k rows are `a`.
///
/// With `U·Aᵀ = H` in Hermite form, `A·Uᵀ = [L | 0]`, so the last n − k
/// rows of `(Uᵀ)⁻¹ = (U⁻¹)ᵀ` complete A.
pub fn complete_to_unimodular(a: &ResonanceMatrix) -> Result<IntMatrix> {
    let (k, n) = (a.k(), a.n());
    let (_, _, u_inv) = hermite_normal_form(&a.matrix().transpose());
    let rest = u_inv.transpose().rows_from(k);
    let c = a.matrix().stack(&rest);
    debug_assert_eq!(c.nrows(), n);
    if !c.det().abs().is_one() {
        return Err(PssaError::NotUnimodular);
    }
    Ok(c)
}

/// Matrix over ℚ, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigRational>,
}

impl RatMatrix {
    pub fn from_int(m: &IntMatrix) -> Self {
        RatMatrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data.iter().map(|v| BigRational::from_integer(v.clone())).collect(),
        }
    }

    /// Builds a matrix from `(numerator, denominator)` rows.
    pub fn from_fractions(rows: &[Vec<(i64, i64)>]) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        RatMatrix {
            rows: r,
            cols: c,
            data: rows
                .iter()
                .flatten()
                .map(|&(p, q)| BigRational::new(BigInt::from(p), BigInt::from(q)))
                .collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j).clone());
            }
        }
        RatMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn mul(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.cols, other.rows, "rational matrix shape mismatch");
        let mut data = vec![BigRational::zero(); self.rows * other.cols];
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    data[i * other.cols + j] += a * other.get(l, j);
                }
            }
        }
        RatMatrix {
            rows: self.rows,
            cols: other.cols,
            data,
        }
    }

    /// Exact inverse by Gauss–Jordan elimination; `None` if singular.
    pub fn inverse(&self) -> Option<RatMatrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut inv: Vec<BigRational> = (0..n * n)
            .map(|i| if i / n == i % n { BigRational::one() } else { BigRational::zero() })
            .collect();
        for col in 0..n {
            let piv = (col..n).find(|&r| !a[r * n + col].is_zero())?;
            if piv != col {
                for j in 0..n {
                    a.swap(piv * n + j, col * n + j);
                    inv.swap(piv * n + j, col * n + j);
                }
            }
            let p = a[col * n + col].clone();
            for j in 0..n {
                a[col * n + j] = &a[col * n + j] / &p;
                inv[col * n + j] = &inv[col * n + j] / &p;
            }
            for r in 0..n {
                if r == col || a[r * n + col].is_zero() {
                    continue;
                }
                let f = a[r * n + col].clone();
                for j in 0..n {
                    let da = &f * &a[col * n + j];
                    a[r * n + j] -= da;
                    let di = &f * &inv[col * n + j];
                    inv[r * n + j] -= di;
                }
            }
        }
        Some(RatMatrix {
            rows: n,
            cols: n,
            data: inv,
        })
    }

    /// Converts to an integer matrix if every entry is integral.
    pub fn to_integer(&self) -> Option<IntMatrix> {
        if self.data.iter().any(|v| !v.is_integer()) {
            return None;
        }
        Some(IntMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.to_integer()).collect(),
        })
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| ratio_to_f64(self.get(i, j))).collect())
            .collect()
    }

    /// Entries as `"p/q"` strings (`"p"` for integers).
    pub fn to_string_rows(&self) -> Vec<Vec<String>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).to_string()).collect())
            .collect()
    }

    /// Parses the output of [`RatMatrix::to_string_rows`].
    pub fn from_string_rows(rows: &[Vec<String>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(PssaError::Validation("ragged rational matrix".into()));
            }
            for s in row {
                let v: BigRational = s
                    .parse()
                    .map_err(|_| PssaError::Validation(format!("bad rational `{s}`")))?;
                data.push(v);
            }
        }
        Ok(RatMatrix { rows: r, cols: c, data })
    }
}

pub(crate) fn ratio_to_f64(v: &BigRational) -> f64 {
    match (v.numer().to_f64(), v.denom().to_f64()) {
        (Some(p), Some(q)) if p.is_finite() && q.is_finite() => p / q,
        _ => f64::NAN,
    }
}

/// Basis `B = Aᵀ(AAᵀ)⁻¹` of the dual lattice; `A·B = I` exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualLatticeBasis(RatMatrix);

impl DualLatticeBasis {
    pub fn matrix(&self) -> &RatMatrix {
        &self.0
    }

    /// Columns as floating-point vectors in ℝⁿ.
    pub fn columns_f64(&self) -> Vec<Vec<f64>> {
        let rows = self.0.to_f64_rows();
        (0..self.0.ncols())
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect()
    }

    /// Euclidean norm of each basis column: the spacing between winds.
    pub fn column_norms(&self) -> Vec<f64> {
        self.columns_f64()
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

pub fn dual_lattice_basis(a: &IntMatrix) -> Result<DualLatticeBasis> {
    let ar = RatMatrix::from_int(a);
    let at = ar.transpose();
    let gram = ar.mul(&at);
    let inv = gram.inverse().ok_or(PssaError::SingularGram)?;
    Ok(DualLatticeBasis(at.mul(&inv)))
}

/// `Z` with `to = Z·from` and `Z ∈ GL(k,ℤ)`, if the two row lattices agree.
pub fn row_transform(from: &IntMatrix, to: &IntMatrix) -> Option<IntMatrix> {
    if from.nrows() != to.nrows() || from.ncols() != to.ncols() {
        return None;
    }
    let b = dual_lattice_basis(from).ok()?;
    let z = RatMatrix::from_int(to).mul(b.matrix()).to_integer()?;
    if z.mul(from) != *to || !z.det().abs().is_one() {
        return None;
    }
    Some(z)
}

/// Whether two integer matrices have the same row lattice.
pub fn same_row_lattice(a: &IntMatrix, b: &IntMatrix) -> bool {
    row_transform(a, b).is_some() && row_transform(b, a).is_some()
}

fn sign_canonical_row(row: &mut [BigInt]) {
    if let Some(first) = row.iter().find(|v| !v.is_zero()) {
        if first.is_negative() {
            for v in row.iter_mut() {
                *v = -v.clone();
            }
        }
    }
}

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Nearest integer to p/q (q > 0), halves rounded up.
fn round_ratio(v: &BigRational) -> BigInt {
    let two = BigInt::from(2);
    (v.numer() * &two + v.denom()).div_floor(&(v.denom() * &two))
}

/// Rows of a reduced basis of the same lattice.
///
/// One row: sign fixed. Two rows: Lagrange–Gauss reduction (optimal).
/// More rows: LLL with δ = 3/4 over exact rationals. Each output row has
/// its first nonzero entry positive.
pub fn reduce_resonance_basis(a: &ResonanceMatrix) -> Result<ResonanceMatrix> {
    let k = a.k();
    let mut rows: Vec<Vec<BigInt>> = (0..k).map(|i| a.matrix().row(i).to_vec()).collect();
    match k {
        1 => {}
        2 => lagrange_gauss(&mut rows),
        _ => lll(&mut rows, BigRational::new(3.into(), 4.into())),
    }
    for r in rows.iter_mut() {
        sign_canonical_row(r);
    }
    let n = a.n();
    let out = IntMatrix {
        rows: k,
        cols: n,
        data: rows.into_iter().flatten().collect(),
    };
    ResonanceMatrix::new(out)
}

fn lagrange_gauss(rows: &mut [Vec<BigInt>]) {
    let (mut b1, mut b2) = (rows[0].clone(), rows[1].clone());
    if dot(&b1, &b1) > dot(&b2, &b2) {
        std::mem::swap(&mut b1, &mut b2);
    }
    loop {
        let mu = round_ratio(&BigRational::new(dot(&b1, &b2), dot(&b1, &b1)));
        for (x, y) in b2.iter_mut().zip(&b1) {
            *x -= &mu * y;
        }
        if dot(&b2, &b2) >= dot(&b1, &b1) {
            break;
        }
        std::mem::swap(&mut b1, &mut b2);
    }
    rows[0] = b1;
    rows[1] = b2;
}

fn gram_schmidt(rows: &[Vec<BigInt>]) -> (Vec<Vec<BigRational>>, Vec<BigRational>) {
    let k = rows.len();
    let mut star: Vec<Vec<BigRational>> = Vec::with_capacity(k);
    let mut norms: Vec<BigRational> = Vec::with_capacity(k);
    let mut mu = vec![vec![BigRational::zero(); k]; k];
    for i in 0..k {
        let mut v: Vec<BigRational> = rows[i].iter().map(|x| BigRational::from_integer(x.clone())).collect();
        for j in 0..i {
            let num: BigRational = rows[i]
                .iter()
                .zip(&star[j])
                .map(|(x, y)| BigRational::from_integer(x.clone()) * y)
                .sum();
            let m = num / &norms[j];
            for (vi, sj) in v.iter_mut().zip(&star[j]) {
                *vi -= &m * sj;
            }
            mu[i][j] = m;
        }
        let nrm: BigRational = v.iter().map(|x| x * x).sum();
        star.push(v);
        norms.push(nrm);
    }
    (mu, norms)
}

fn lll(rows: &mut [Vec<BigInt>], delta: BigRational) {
    let k = rows.len();
    let mut i = 1;
    while i < k {
        for j in (0..i).rev() {
            let (mu, _) = gram_schmidt(rows);
            let q = round_ratio(&mu[i][j]);
            if !q.is_zero() {
                let src = rows[j].clone();
                for (x, y) in rows[i].iter_mut().zip(&src) {
                    *x -= &q * y;
                }
            }
        }
        let (mu, norms) = gram_schmidt(rows);
        let lhs = norms[i].clone();
        let rhs = (&delta - &mu[i][i - 1] * &mu[i][i - 1]) * &norms[i - 1];
        if lhs >= rhs {
            i += 1;
        } else {
            rows.swap(i, i - 1);
            i = (i - 1).max(1);
        }
    }
}

/// Angle in degrees between two integer rows, taken as lines (≤ 90°).
pub fn row_angle_degrees(a: &IntMatrix, i: usize, j: usize) -> f64 {
    let ri: Vec<f64> = a.row(i).iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    let rj: Vec<f64> = a.row(j).iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    let d: f64 = ri.iter().zip(&rj).map(|(x, y)| x * y).sum();
    let ni = ri.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nj = rj.iter().map(|x| x * x).sum::<f64>().sqrt();
    (d.abs() / (ni * nj)).clamp(0.0, 1.0).acos().to_degrees()
}

/// Plücker coordinates of a primitive row lattice, up to sign.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum PluckerKey {
    Small(Vec<i128>),
    Big(Vec<BigInt>),
}

fn det_i128(a: &mut [i128], k: usize) -> Option<i128> {
    // fraction-free elimination
    let mut sign = 1i128;
    let mut prev = 1i128;
    for c in 0..k {
        let Some(p) = (c..k).find(|&r| a[r * k + c] != 0) else {
            return Some(0);
        };
        if p != c {
            for j in 0..k {
                a.swap(p * k + j, c * k + j);
            }
            sign = -sign;
        }
        for r in c + 1..k {
            for j in c + 1..k {
                let v = a[c * k + c]
                    .checked_mul(a[r * k + j])?
                    .checked_sub(a[r * k + c].checked_mul(a[c * k + j])?)?;
                a[r * k + j] = v / prev;
            }
        }
        prev = a[c * k + c];
    }
    Some(sign * a[k * k - 1])
}

/// Canonical key of the lattice spanned by `rows`, or `None` when the rows
/// do not span a primitive lattice of rank k.
fn plucker_key(rows: &[&Vec<i64>], col_sets: &[Vec<usize>]) -> Option<PluckerKey> {
    let k = rows.len();
    let mut scratch = [0i128; 64];
    let small: Option<Vec<i128>> = if k * k <= scratch.len() {
        col_sets
            .iter()
            .map(|cols| {
                for (i, r) in rows.iter().enumerate() {
                    for (j, &c) in cols.iter().enumerate() {
                        scratch[i * k + j] = r[c] as i128;
                    }
                }
                det_i128(&mut scratch[..k * k], k)
            })
            .collect()
    } else {
        None
    };
    let key = match small {
        Some(mut minors) => {
            let g = minors.iter().fold(0i128, |g, &v| g.gcd(&v));
            if g != 1 {
                return None;
            }
            if minors.iter().find(|&&v| v != 0).is_some_and(|&v| v < 0) {
                minors.iter_mut().for_each(|v| *v = -*v);
            }
            PluckerKey::Small(minors)
        }
        None => {
            let mut minors: Vec<BigInt> = col_sets
                .iter()
                .map(|cols| {
                    let data = rows
                        .iter()
                        .flat_map(|r| cols.iter().map(|&j| BigInt::from(r[j])))
                        .collect();
                    determinant(k, data)
                })
                .collect();
            let g = minors.iter().fold(BigInt::zero(), |g, v| g.gcd(v));
            if !g.is_one() {
                return None;
            }
            if minors.iter().find(|v| !v.is_zero()).is_some_and(|v| v.is_negative()) {
                minors.iter_mut().for_each(|v| *v = -&*v);
            }
            match minors.iter().map(|v| v.to_i128()).collect::<Option<Vec<_>>>() {
                Some(m) => PluckerKey::Small(m),
                None => PluckerKey::Big(minors),
            }
        }
    };
    Some(key)
}

/// Every unimodular k × n matrix with entries in (−bound, bound), one per
/// row lattice.
///
/// Rows are drawn from the sign-canonical integer vectors in the box,
/// ordered by length, and combined as increasing index tuples; this reaches
/// every lattice up to GL(k,ℤ) because row negation and row permutation are
/// themselves in GL(k,ℤ). Lattices are deduplicated by Plücker coordinates;
/// the representative kept is the first one met, which favours short rows.
/// The output is sorted by (largest entry, Hermite form).
pub fn enumerate_resonances(n: usize, k: usize, bound: u32) -> Vec<ResonanceMatrix> {
    if n == 0 || k == 0 || k > n || bound == 0 {
        return Vec::new();
    }
    let b = bound as i64 - 1;
    let mut vectors: Vec<Vec<i64>> = Vec::new();
    let mut current = vec![-b; n];
    loop {
        let first_nonzero = current.iter().find(|&&v| v != 0);
        if matches!(first_nonzero, Some(&v) if v > 0) {
            vectors.push(current.clone());
        }
        // odometer increment
        let mut pos = n;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            if current[pos] < b {
                current[pos] += 1;
                for v in current.iter_mut().skip(pos + 1) {
                    *v = -b;
                }
                break;
            }
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX {
            break;
        }
    }
    vectors.sort_by(|x, y| {
        let nx: i64 = x.iter().map(|v| v * v).sum();
        let ny: i64 = y.iter().map(|v| v * v).sum();
        nx.cmp(&ny).then_with(|| y.cmp(x))
    });

    let col_sets = combinations(n, k);
    let mut seen: HashMap<PluckerKey, usize> = HashMap::new();
    let mut kept: Vec<Vec<Vec<i64>>> = Vec::new();
    let mut visit = |rows: &[&Vec<i64>]| {
        let Some(key) = plucker_key(rows, &col_sets) else {
            return;
        };
        if let Entry::Vacant(e) = seen.entry(key) {
            e.insert(kept.len());
            kept.push(rows.iter().map(|r| (*r).clone()).collect());
        }
    };
    let m = vectors.len();
    if k <= m {
        let mut idx: Vec<usize> = (0..k).collect();
        let mut rows: Vec<&Vec<i64>> = Vec::with_capacity(k);
        loop {
            rows.clear();
            rows.extend(idx.iter().map(|&i| &vectors[i]));
            visit(&rows);
            let Some(i) = (0..k).rev().find(|&i| idx[i] != i + m - k) else {
                break;
            };
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    let mut out: Vec<(BigInt, IntMatrix, IntMatrix)> = kept
        .into_iter()
        .map(|rows| {
            let m = IntMatrix::from_rows(&rows);
            (m.max_abs(), hermite_normal_form(&m).0, m)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    out.into_iter().map(|(_, _, m)| ResonanceMatrix(m)).collect()
}

/// Exact closest lattice point (testing oracle, k ≤ 3).
#[derive(Clone, Debug, PartialEq)]
pub struct CvpSolution {
    pub coefficients: Vec<i64>,
    pub point: Vec<f64>,
    pub distance: f64,
}

/// Closest point of the lattice spanned by the columns of `b` to `target`,
/// by exhaustive enumeration over a provably sufficient coefficient box.
///
/// With `w` the least-squares coefficients of the target and `r` the
/// distance achieved by rounding `w`, any better point `Bz` satisfies
/// `|zⱼ − wⱼ| ≤ r·√(G⁻¹)ⱼⱼ` where `G = BᵀB`.
pub fn cvp_oracle(b: &DualLatticeBasis, target: &[f64]) -> Result<CvpSolution> {
    let cols = b.columns_f64();
    let k = cols.len();
    let n = b.matrix().nrows();
    if k == 0 || k > 3 {
        return Err(PssaError::dim(format!("CVP oracle supports 1 ≤ k ≤ 3, got {k}")));
    }
    if target.len() != n {
        return Err(PssaError::dim(format!("target has {} coordinates, lattice lives in ℝ^{n}", target.len())));
    }
    let bm = nalgebra::DMatrix::from_fn(n, k, |i, j| cols[j][i]);
    let t = nalgebra::DVector::from_column_slice(target);
    let g = bm.transpose() * &bm;
    let g_inv = g.try_inverse().ok_or(PssaError::SingularGram)?;
    let w = &g_inv * (bm.transpose() * &t);
    let dist = |z: &[i64]| -> f64 {
        let zv = nalgebra::DVector::from_iterator(k, z.iter().map(|&v| v as f64));
        (&bm * zv - &t).norm()
    };
    let z0: Vec<i64> = w.iter().map(|v| v.round() as i64).collect();
    let r = dist(&z0);
    let ranges: Vec<(i64, i64)> = (0..k)
        .map(|j| {
            let half = r * g_inv[(j, j)].max(0.0).sqrt() + 1e-9;
            ((w[j] - half).floor() as i64, (w[j] + half).ceil() as i64)
        })
        .collect();
    let mut best = (z0.clone(), r);
    let mut z: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        let d = dist(&z);
        if d < best.1 - 1e-12 || ((d - best.1).abs() <= 1e-12 && z < best.0) {
            best = (z.clone(), d);
        }
        let mut pos = 0;
        loop {
            if pos == k {
                let zv = nalgebra::DVector::from_iterator(k, best.0.iter().map(|&v| v as f64));
                let p = &bm * zv;
                return Ok(CvpSolution {
                    coefficients: best.0,
                    point: p.iter().copied().collect(),
                    distance: best.1,
                });
            }
            if z[pos] < ranges[pos].1 {
                z[pos] += 1;
                break;
            }
            z[pos] = ranges[pos].0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<i64>]) -> IntMatrix {
        IntMatrix::from_rows(rows)
    }

    #[test]
    fn unimodularity_examples() {
        assert!(is_unimodular(&m(&[vec![2, 5]])).unwrap());
        assert!(!is_unimodular(&m(&[vec![2, 0]])).unwrap());
        assert!(is_unimodular(&m(&[vec![-3, 0, 1], vec![-2, 1, 0]])).unwrap());
        assert!(matches!(is_unimodular(&m(&[vec![0, 0]])), Err(PssaError::Dimension(_))));
        assert!(matches!(
            is_unimodular(&m(&[vec![1, 0], vec![0, 1], vec![1, 1]])),
            Err(PssaError::Dimension(_))
        ));
        assert!(matches!(ResonanceMatrix::from_rows(&[vec![2, 4]]), Err(PssaError::NotUnimodular)));
    }

    #[test]
    fn minors_of_example_matrix() {
        // minors of [[−3,0,1],[−2,1,0]] are −3, 2, −1
        assert_eq!(minor_gcd(&m(&[vec![-3, 0, 1], vec![-2, 1, 0]])), BigInt::one());
        assert_eq!(m(&[vec![-3, 0], vec![-2, 1]]).det(), BigInt::from(-3));
        assert_eq!(m(&[vec![-3, 1], vec![-2, 0]]).det(), BigInt::from(2));
        assert_eq!(m(&[vec![0, 1], vec![1, 0]]).det(), BigInt::from(-1));
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let a = m(&[vec![2, -1, 3], vec![0, 4, 1], vec![5, 2, -2]]);
        // 2(4·−2 − 1·2) − (−1)(0·−2 − 1·5) + 3(0·2 − 4·5)
        assert_eq!(a.det(), BigInt::from(2 * (-10) + (-5) + 3 * (-20)));
        let z = m(&[vec![0, 1, 2], vec![0, 3, 4], vec![0, 5, 6]]);
        assert!(z.det().is_zero());
    }

    #[test]
    fn dual_basis_examples() {
        let b = dual_lattice_basis(&m(&[vec![-3, 0, 1], vec![-2, 1, 0]])).unwrap();
        let expect = RatMatrix::from_fractions(&[
            vec![(-3, 14), (-1, 7)],
            vec![(-6, 14), (5, 7)],
            vec![(5, 14), (-3, 7)],
        ]);
        assert_eq!(b.matrix(), &expect);
        let b = dual_lattice_basis(&m(&[vec![2, 5]])).unwrap();
        assert_eq!(b.matrix(), &RatMatrix::from_fractions(&[vec![(2, 29)], vec![(5, 29)]]));
        assert!((b.column_norms()[0] - 1.0 / 29f64.sqrt()).abs() < 1e-12);
        let b = dual_lattice_basis(&m(&[vec![1, 0]])).unwrap();
        assert_eq!(b.matrix(), &RatMatrix::from_fractions(&[vec![(1, 1)], vec![(0, 1)]]));
        assert!(matches!(
            dual_lattice_basis(&m(&[vec![1, 2], vec![2, 4]])),
            Err(PssaError::SingularGram)
        ));
    }

    #[test]
    fn dual_basis_is_right_inverse() {
        let a = m(&[vec![-3, 0, 1], vec![-2, 1, 0]]);
        let b = dual_lattice_basis(&a).unwrap();
        let prod = RatMatrix::from_int(&a).mul(b.matrix());
        assert_eq!(prod.to_integer().unwrap(), IntMatrix::identity(2));
    }

    #[test]
    fn rational_strings_round_trip() {
        let b = dual_lattice_basis(&m(&[vec![-3, 0, 1], vec![-2, 1, 0]])).unwrap();
        let s = b.matrix().to_string_rows();
        assert_eq!(s[0][0], "-3/14");
        assert_eq!(&RatMatrix::from_string_rows(&s).unwrap(), b.matrix());
    }

    #[test]
    fn completion_examples() {
        let id = ResonanceMatrix::from_rows(&[vec![1, 0, 0], vec![0, 1, 0]]).unwrap();
        assert_eq!(complete_to_unimodular(&id).unwrap(), IntMatrix::identity(3));
        for rows in [vec![vec![2, 5]], vec![vec![-3, 0, 1], vec![-2, 1, 0]], vec![vec![3, 7, -4, 11]]] {
            let a = ResonanceMatrix::from_rows(&rows).unwrap();
            let c = complete_to_unimodular(&a).unwrap();
            assert_eq!(c.top_rows(a.k()), *a.matrix());
            assert!(c.det().abs().is_one());
        }
    }

    #[test]
    fn hnf_is_canonical() {
        let a = m(&[vec![-3, 0, 1], vec![-2, 1, 0]]);
        let z = m(&[vec![2, 1], vec![1, 1]]);
        let (h1, u, u_inv) = hermite_normal_form(&a);
        let (h2, _, _) = hermite_normal_form(&z.mul(&a));
        assert_eq!(h1, h2);
        assert_eq!(u.mul(&a), h1);
        assert_eq!(u.mul(&u_inv), IntMatrix::identity(2));
    }

    #[test]
    fn enumeration_small_box() {
        let got: Vec<IntMatrix> = enumerate_resonances(2, 1, 2).into_iter().map(|r| r.canonical_form()).collect();
        let mut expect = vec![m(&[vec![0, 1]]), m(&[vec![1, 0]]), m(&[vec![1, 1]]), m(&[vec![1, -1]])];
        let mut got_sorted = got.clone();
        got_sorted.sort();
        expect.sort();
        assert_eq!(got_sorted, expect);
    }

    #[test]
    fn enumeration_contains_two_five() {
        let all = enumerate_resonances(2, 1, 10);
        let target = m(&[vec![2, 5]]);
        assert!(all.iter().any(|r| r.canonical_form() == target));
        for r in &all {
            assert!(is_unimodular(r.matrix()).unwrap());
            assert!(r.matrix().max_abs() < BigInt::from(10));
        }
    }

    #[test]
    fn enumeration_two_rows_dedup() {
        let all = enumerate_resonances(3, 2, 2);
        let mut forms: Vec<IntMatrix> = all.iter().map(|r| r.canonical_form()).collect();
        let before = forms.len();
        forms.sort();
        forms.dedup();
        assert_eq!(before, forms.len());
        // coordinate planes are among them
        assert!(forms.contains(&m(&[vec![1, 0, 0], vec![0, 1, 0]])));
    }

    #[test]
    fn gauss_reduction_of_example() {
        let a = ResonanceMatrix::from_rows(&[vec![-3, 0, 1], vec![-2, 1, 0]]).unwrap();
        assert!((row_angle_degrees(a.matrix(), 0, 1) - 31.948).abs() < 0.01);
        let r = reduce_resonance_basis(&a).unwrap();
        assert!(row_angle_degrees(r.matrix(), 0, 1) >= 75.0);
        assert!(same_row_lattice(a.matrix(), r.matrix()));
    }

    #[test]
    fn reduction_keeps_orthogonal_basis() {
        let a = ResonanceMatrix::from_rows(&[vec![1, 0, 0], vec![0, 1, 0]]).unwrap();
        let r = reduce_resonance_basis(&a).unwrap();
        let mut rows = r.matrix().to_i64_rows().unwrap();
        rows.sort();
        assert_eq!(rows, vec![vec![0, 1, 0], vec![1, 0, 0]]);
    }

    #[test]
    fn lll_three_rows() {
        let a = ResonanceMatrix::from_rows(&[vec![1, 1, 1, 0], vec![5, 6, 1, 1], vec![9, 13, 2, 0]]).unwrap();
        let r = reduce_resonance_basis(&a).unwrap();
        assert!(same_row_lattice(a.matrix(), r.matrix()));
        let norm = |mm: &IntMatrix| -> BigInt { (0..3).map(|i| dot(mm.row(i), mm.row(i))).sum() };
        assert!(norm(r.matrix()) <= norm(a.matrix()));
    }

    #[test]
    fn lattice_equality_detects_difference() {
        let a = m(&[vec![1, 0, 0], vec![0, 1, 0]]);
        let b = m(&[vec![1, 0, 0], vec![0, 2, 0]]);
        assert!(!same_row_lattice(&a, &b));
        assert!(same_row_lattice(&a, &m(&[vec![1, 1, 0], vec![0, 1, 0]])));
    }

    #[test]
    fn cvp_examples() {
        let b = dual_lattice_basis(&m(&[vec![-3, 0, 1], vec![-2, 1, 0]])).unwrap();
        let zero = cvp_oracle(&b, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(zero.coefficients, vec![0, 0]);
        let col = b.columns_f64()[1].clone();
        let hit = cvp_oracle(&b, &col).unwrap();
        assert_eq!(hit.coefficients, vec![0, 1]);
        let four = dual_lattice_basis(&IntMatrix::identity(4)).unwrap();
        assert!(matches!(cvp_oracle(&four, &[0.0; 4]), Err(PssaError::Dimension(_))));
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert!(combinations(2, 3).is_empty());
    }
}
