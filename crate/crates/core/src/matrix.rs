//! Dense matrices over a [`FieldSpec`].

use rand::Rng;

use crate::error::{DexError, Result};
use crate::field::{Elem, FieldSpec};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Elem>,
    field: FieldSpec,
}

/// Result of [`FieldMatrix::solve_linear`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    /// `x` solves the system; `free` is the dimension of the solution space.
    /// Free variables are set to zero.
    Solved { x: Vec<Elem>, free: usize },
    Inconsistent,
}

impl SolveOutcome {
    pub fn unique(&self) -> Option<&[Elem]> {
        match self {
            SolveOutcome::Solved { x, free: 0 } => Some(x),
            _ => None,
        }
    }
}

impl FieldMatrix {
    pub fn new(field: &FieldSpec, rows: usize, cols: usize, entries: Vec<Elem>) -> Result<Self> {
        if rows * cols != entries.len() {
            return Err(DexError::DimensionMismatch(format!(
                "{rows}x{cols} matrix given {} entries",
                entries.len()
            )));
        }
        for &e in &entries {
            field.check(e)?;
        }
        Ok(FieldMatrix {
            rows,
            cols,
            entries,
            field: field.clone(),
        })
    }

    pub fn zeros(field: &FieldSpec, rows: usize, cols: usize) -> Self {
        FieldMatrix {
            rows,
            cols,
            entries: vec![0; rows * cols],
            field: field.clone(),
        }
    }

    pub fn identity(field: &FieldSpec, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.entries[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix from row vectors; every row must have `cols` entries.
    pub fn from_rows(field: &FieldSpec, cols: usize, rows: &[Vec<Elem>]) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(DexError::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            entries.extend_from_slice(r);
        }
        Self::new(field, rows.len(), cols, entries)
    }

    pub fn random<R: Rng + ?Sized>(field: &FieldSpec, rows: usize, cols: usize, rng: &mut R) -> Self {
        let q = field.order();
        let entries = (0..rows * cols).map(|_| rng.gen_range(0..q)).collect();
        FieldMatrix {
            rows,
            cols,
            entries,
            field: field.clone(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn entries(&self) -> &[Elem] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> Elem {
        self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Elem) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Elem] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<Elem>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// Same entries interpreted in another field. Used to lift a prime-field
    /// matrix into an extension of it, where the integers `0..p` keep their
    /// meaning.
    pub fn lift(&self, field: &FieldSpec) -> Result<Self> {
        if field.characteristic() != self.field.characteristic()
            || (!self.field.is_prime_field() && field != &self.field)
        {
            return Err(DexError::Unsupported(format!(
                "cannot embed GF({}^{}) into GF({}^{})",
                self.field.characteristic(),
                self.field.degree(),
                field.characteristic(),
                field.degree()
            )));
        }
        Ok(FieldMatrix {
            field: field.clone(),
            ..self.clone()
        })
    }

    /// Stacks matrices vertically. All parts must share column count and field.
    pub fn vstack(field: &FieldSpec, cols: usize, parts: &[&FieldMatrix]) -> Result<Self> {
        let mut entries = Vec::new();
        let mut rows = 0;
        for p in parts {
            if p.cols != cols || &p.field != field {
                return Err(DexError::DimensionMismatch(format!(
                    "cannot stack {}-column matrix into {cols} columns",
                    p.cols
                )));
            }
            rows += p.rows;
            entries.extend_from_slice(&p.entries);
        }
        Ok(FieldMatrix {
            rows,
            cols,
            entries,
            field: field.clone(),
        })
    }

    pub fn mul(&self, other: &FieldMatrix) -> Result<FieldMatrix> {
        if self.cols != other.rows || self.field != other.field {
            return Err(DexError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = &self.field;
        let mut out = FieldMatrix::zeros(f, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * other.cols + j;
                    out.entries[idx] = f.add(out.entries[idx], f.mul(a, other.get(k, j)));
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Elem]) -> Result<Vec<Elem>> {
        if v.len() != self.cols {
            return Err(DexError::DimensionMismatch(format!(
                "{}-column matrix times vector of length {}",
                self.cols,
                v.len()
            )));
        }
        let f = &self.field;
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .fold(0, |acc, (&a, &x)| f.add(acc, f.mul(a, x)))
            })
            .collect())
    }

    /// Block-diagonal replication `diag(self, ..., self)` with `copies` blocks.
    pub fn block_replicate(&self, copies: usize) -> FieldMatrix {
        let (r, c) = (self.rows, self.cols);
        let mut out = FieldMatrix::zeros(&self.field, r * copies, c * copies);
        for b in 0..copies {
            for i in 0..r {
                for j in 0..c {
                    out.set(b * r + i, b * c + j, self.get(i, j));
                }
            }
        }
        out
    }

    /// In-place reduction to reduced row echelon form; returns pivot columns.
    fn reduce(&mut self, augmented_cols: usize) -> Vec<usize> {
        let f = self.field.clone();
        let cols = self.cols;
        let mut pivots = Vec::new();
        let mut pivot_row = 0;
        for col in 0..augmented_cols {
            if pivot_row == self.rows {
                break;
            }
            let Some(src) = (pivot_row..self.rows).find(|&r| self.get(r, col) != 0) else {
                continue;
            };
            if src != pivot_row {
                for j in 0..cols {
                    self.entries.swap(src * cols + j, pivot_row * cols + j);
                }
            }
            let inv = f.inv(self.get(pivot_row, col)).expect("nonzero pivot");
            for j in col..cols {
                let v = self.get(pivot_row, j);
                self.set(pivot_row, j, f.mul(v, inv));
            }
            for r in 0..self.rows {
                if r == pivot_row {
                    continue;
                }
                let factor = self.get(r, col);
                if factor == 0 {
                    continue;
                }
                for j in col..cols {
                    let v = f.sub(self.get(r, j), f.mul(factor, self.get(pivot_row, j)));
                    self.set(r, j, v);
                }
            }
            pivots.push(col);
            pivot_row += 1;
        }
        pivots
    }

    /// Reduced row echelon form and its pivot columns.
    pub fn rref(&self) -> (FieldMatrix, Vec<usize>) {
        let mut m = self.clone();
        let pivots = m.reduce(self.cols);
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        self.rref().1.len()
    }

    /// Solves `self * x = b`. With a positive-dimensional solution space the
    /// free variables are pinned to zero.
    pub fn solve_linear(&self, b: &[Elem]) -> Result<SolveOutcome> {
        if b.len() != self.rows {
            return Err(DexError::DimensionMismatch(format!(
                "{} rows but right-hand side of length {}",
                self.rows,
                b.len()
            )));
        }
        let n = self.cols;
        let mut aug = FieldMatrix::zeros(&self.field, self.rows, n + 1);
        for r in 0..self.rows {
            for c in 0..n {
                aug.set(r, c, self.get(r, c));
            }
            aug.set(r, n, self.field.check(b[r])?);
        }
        let pivots = aug.reduce(n + 1);
        if pivots.last() == Some(&n) {
            return Ok(SolveOutcome::Inconsistent);
        }
        let mut x = vec![0; n];
        for (row, &col) in pivots.iter().enumerate() {
            x[col] = aug.get(row, n);
        }
        Ok(SolveOutcome::Solved {
            x,
            free: n - pivots.len(),
        })
    }
}
