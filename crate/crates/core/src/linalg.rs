//! Small dense linear algebra for n <= 3: symmetric matrices, mixed
//! discriminants and the exact inverse of the integer-node Vandermonde matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest ambient dimension supported by the dense kernels.
pub const MAX_DIM: usize = 3;

/// Symmetric real `n x n` matrix with `n in {1, 2, 3}`.
///
/// Stored densely; every constructor symmetrizes or rejects asymmetric input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    m: [[f64; MAX_DIM]; MAX_DIM],
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "dimension {n} not supported");
        Self {
            n,
            m: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut out = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            out.m[i][i] = x;
        }
        out
    }

    /// `v vᵀ`.
    pub fn outer(v: &[f64]) -> Self {
        Self::sym_outer(v, v)
    }

    /// `(u wᵀ + w uᵀ) / 2`.
    pub fn sym_outer(u: &[f64], w: &[f64]) -> Self {
        assert_eq!(u.len(), w.len());
        let mut out = Self::zeros(u.len());
        for i in 0..u.len() {
            for j in 0..u.len() {
                out.m[i][j] = 0.5 * (u[i] * w[j] + w[i] * u[j]);
            }
        }
        out
    }

    /// Builds a matrix from rows, rejecting asymmetry beyond `1e-12` relative.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::OutOfRange(format!("matrix dimension {n}")));
        }
        let mut out = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::Invalid("non-finite matrix entry".into()));
                }
                out.m[i][j] = x;
            }
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (out.m[i][j], out.m[j][i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Invalid(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
                let avg = 0.5 * (a + b);
                out.m[i][j] = avg;
                out.m[j][i] = avg;
            }
        }
        Ok(out)
    }

    /// Builds a matrix from its upper triangle, row-major (`n(n+1)/2` entries).
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::OutOfRange(format!("matrix dimension {n}")));
        }
        if upper.len() != n * (n + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: n * (n + 1) / 2,
                found: upper.len(),
            });
        }
        let mut out = Self::zeros(n);
        let mut it = upper.iter();
        for i in 0..n {
            for j in i..n {
                let x = *it.next().unwrap();
                out.m[i][j] = x;
                out.m[j][i] = x;
            }
        }
        Ok(out)
    }

    /// Upper triangle, row-major.
    pub fn upper(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n + 1) / 2);
        for i in 0..self.n {
            for j in i..self.n {
                out.push(self.m[i][j]);
            }
        }
        out
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.m[i][..self.n].to_vec()).collect()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] += other.m[i][j];
            }
        }
        out
    }

    pub fn scale(&self, t: f64) -> Self {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] *= t;
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.m[i][i]).sum()
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        match self.n {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            3 => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
            _ => unreachable!(),
        }
    }

    /// `Mᵀ A M` for a square (not necessarily symmetric) `M` given by rows.
    pub fn congruence(&self, mrows: &[Vec<f64>]) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        acc += mrows[k][i] * self.m[k][l] * mrows[l][j];
                    }
                }
                out.m[i][j] = acc;
                out.m[j][i] = acc;
            }
        }
        out
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.m[i][j] * x[j]).sum())
            .collect()
    }

    /// Determinant of the submatrix with the given (sorted) row and column
    /// index sets. The empty minor is 1.
    pub fn minor(&self, rows: &[usize], cols: &[usize]) -> f64 {
        assert_eq!(rows.len(), cols.len());
        match rows.len() {
            0 => 1.0,
            1 => self.m[rows[0]][cols[0]],
            2 => {
                self.m[rows[0]][cols[0]] * self.m[rows[1]][cols[1]]
                    - self.m[rows[0]][cols[1]] * self.m[rows[1]][cols[0]]
            }
            3 => self.det(),
            _ => unreachable!(),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.n;
        let dm = DMatrix::from_fn(n, n, |i, j| self.m[i][j]);
        SymmetricEigen::new(dm).eigenvalues.min()
    }

    /// Largest absolute eigenvalue (spectral norm).
    pub fn spectral_norm(&self) -> f64 {
        let n = self.n;
        let dm = DMatrix::from_fn(n, n, |i, j| self.m[i][j]);
        SymmetricEigen::new(dm).eigenvalues.amax()
    }

    pub fn max_abs_entry(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                best = best.max(self.m[i][j].abs());
            }
        }
        best
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Mixed discriminant `D(A_1, ..., A_n)` via inclusion-exclusion over subsets:
/// `(1/n!) Σ_{S ⊆ [n]} (-1)^{n-|S|} det(Σ_{i∈S} A_i)`.
pub fn mixed_discriminant(mats: &[SymMatrix]) -> Result<f64> {
    let Some(first) = mats.first() else {
        return Err(Error::OutOfRange("mixed discriminant of zero matrices".into()));
    };
    let n = first.dim();
    if mats.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mats.len(),
        });
    }
    for a in mats {
        crate::error::check_dim(n, a.dim())?;
    }
    let mut acc = 0.0;
    for mask in 1u32..(1 << n) {
        let mut sum = SymMatrix::zeros(n);
        for (i, a) in mats.iter().enumerate() {
            if mask & (1 << i) != 0 {
                sum = sum.add(a);
            }
        }
        let size = mask.count_ones() as usize;
        let sign = if (n - size).is_multiple_of(2) { 1.0 } else { -1.0 };
        acc += sign * sum.det();
    }
    Ok(acc / factorial(n))
}

/// `D(A[c], extra[1], Id[rest])` in dimension `n`.
pub fn mixed_discriminant_with_multiplicity(
    a: &SymMatrix,
    c: usize,
    extra: Option<&SymMatrix>,
    n: usize,
) -> Result<f64> {
    crate::error::check_dim(n, a.dim())?;
    let extra_count = usize::from(extra.is_some());
    if c + extra_count > n {
        return Err(Error::OutOfRange(format!(
            "multiplicity {c} (+{extra_count}) exceeds dimension {n}"
        )));
    }
    let mut mats = Vec::with_capacity(n);
    mats.extend(std::iter::repeat_n(*a, c));
    if let Some(e) = extra {
        crate::error::check_dim(n, e.dim())?;
        mats.push(*e);
    }
    mats.resize(n, SymMatrix::identity(n));
    mixed_discriminant(&mats)
}

/// Inverse of the Vandermonde matrix `V[t][k] = t^k` over the integer nodes
/// `0..=m`, so that `Z = c · values` recovers polynomial coefficients from
/// samples at `t = 0, ..., m`.
#[derive(Clone, Debug, PartialEq)]
pub struct VandermondeCoeffs {
    pub nodes: Vec<u32>,
    /// Row `k` holds the weights producing the coefficient of `t^k`.
    pub c: Vec<Vec<f64>>,
}

impl VandermondeCoeffs {
    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    /// `Σ_j c[k][j] values[j]`.
    pub fn coefficient(&self, k: usize, values: &[f64]) -> f64 {
        self.c[k].iter().zip(values).map(|(c, v)| c * v).sum()
    }
}

pub const MAX_VANDERMONDE: usize = 12;

/// Exact rational inverse by Gauss-Jordan elimination over `BigRational`,
/// rounded to `f64` at the end.
pub fn vandermonde_inverse(m: usize) -> Result<VandermondeCoeffs> {
    if !(1..=MAX_VANDERMONDE).contains(&m) {
        return Err(Error::OutOfRange(format!(
            "vandermonde order {m} outside 1..={MAX_VANDERMONDE}"
        )));
    }
    Ok(vandermonde_inverse_unchecked(m))
}

pub(crate) fn vandermonde_inverse_unchecked(m: usize) -> VandermondeCoeffs {
    let size = m + 1;
    let int = |x: i64| BigRational::from_integer(BigInt::from(x));
    // augmented [V | I]
    let mut a: Vec<Vec<BigRational>> = (0..size)
        .map(|t| {
            let mut row: Vec<BigRational> = (0..size)
                .map(|k| int((t as i64).pow(k as u32)))
                .collect();
            row.extend((0..size).map(|j| if j == t { int(1) } else { int(0) }));
            row
        })
        .collect();
    for col in 0..size {
        let pivot = (col..size)
            .find(|&r| !a[r][col].is_zero())
            .expect("Vandermonde matrix on distinct nodes is invertible");
        a.swap(col, pivot);
        let inv = a[col][col].recip();
        for x in a[col].iter_mut() {
            *x *= &inv;
        }
        for r in 0..size {
            if r != col && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                for j in 0..2 * size {
                    let delta = &factor * &a[col][j];
                    a[r][j] -= delta;
                }
            }
        }
    }
    debug_assert!(a[0][0].is_one());
    let c = a
        .iter()
        .map(|row| {
            row[size..]
                .iter()
                .map(|q| q.to_f64().expect("finite rational"))
                .collect()
        })
        .collect();
    VandermondeCoeffs {
        nodes: (0..=m as u32).collect(),
        c,
    }
}
