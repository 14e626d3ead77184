use std::fmt;

use crate::error::{Error, Result};

fn words_for(cols: usize) -> usize {
    cols.div_ceil(64)
}

/// Dense matrix over GF(2), row-major, 64 columns per word. Column `j` of a
/// row is bit `j % 64` of word `j / 64`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Rows given as integers; bit `j` of `rows[i]` is entry `(i, j)`.
    pub fn from_rows_u64(rows: &[u64], cols: usize) -> Self {
        assert!(cols <= 64, "from_rows_u64 needs cols <= 64");
        let mut m = Self::zeros(rows.len(), cols);
        let mask = if cols == 64 { u64::MAX } else { (1u64 << cols) - 1 };
        for (i, &r) in rows.iter().enumerate() {
            if cols > 0 {
                m.data[i * m.stride] = r & mask;
            }
        }
        m
    }

    /// Rows written as strings of `0`/`1`, leftmost character = column 0.
    pub fn from_bit_strings(rows: &[&str]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged bit-string rows");
            for (j, ch) in r.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => m.set(i, j, true),
                    other => panic!("unexpected character {other:?} in bit string"),
                }
            }
        }
        m
    }

    pub fn from_row_words(rows: Vec<Vec<u64>>, cols: usize) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            let stride = m.stride;
            m.row_mut(i).copy_from_slice(&r[..stride]);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        assert!(i < self.rows && j < self.cols);
        (self.data[i * self.stride + j / 64] >> (j % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(i < self.rows && j < self.cols);
        let w = &mut self.data[i * self.stride + j / 64];
        if value {
            *w |= 1 << (j % 64);
        } else {
            *w &= !(1 << (j % 64));
        }
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.stride..(i + 1) * self.stride]
    }

    fn row_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.data[i * self.stride..(i + 1) * self.stride]
    }

    /// Row `i` as an integer; requires `cols <= 64`.
    pub fn row_u64(&self, i: usize) -> u64 {
        assert!(self.cols <= 64);
        if self.cols == 0 {
            0
        } else {
            self.data[i * self.stride]
        }
    }

    pub fn set_row_words(&mut self, i: usize, words: &[u64]) {
        self.row_mut(i).copy_from_slice(words);
    }

    fn xor_row_into(&mut self, src: usize, dst: usize) {
        let s = self.stride;
        for w in 0..s {
            let v = self.data[src * s + w];
            self.data[dst * s + w] ^= v;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for w in 0..self.stride {
            self.data.swap(a * self.stride + w, b * self.stride + w);
        }
    }

    /// `M * x` for a column vector packed into an integer (bit `j` = `x_j`).
    /// Output bit `i` is the parity of row `i` AND `x`. Requires `cols, rows <= 64`.
    #[inline]
    pub fn mul_u64(&self, x: u64) -> u64 {
        debug_assert!(self.cols <= 64 && self.rows <= 64);
        let mut out = 0u64;
        for i in 0..self.rows {
            let bit = (self.data[i * self.stride] & x).count_ones() as u64 & 1;
            out |= bit << i;
        }
        out
    }

    /// `M * x` for a multiword vector.
    pub fn mul_vec(&self, x: &[u64]) -> Vec<u64> {
        assert_eq!(x.len(), self.stride);
        let mut out = vec![0u64; words_for(self.rows)];
        for i in 0..self.rows {
            let parity = self
                .row(i)
                .iter()
                .zip(x)
                .fold(0u32, |acc, (r, v)| acc ^ (r & v).count_ones())
                & 1;
            if parity == 1 {
                out[i / 64] |= 1 << (i % 64);
            }
        }
        out
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = BitMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                if self.get(i, k) {
                    for w in 0..out.stride {
                        out.data[i * out.stride + w] ^= other.data[k * other.stride + w];
                    }
                }
            }
        }
        out
    }

    /// Vertical concatenation.
    pub fn stack(&self, below: &BitMatrix) -> BitMatrix {
        assert_eq!(self.cols, below.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&below.data);
        BitMatrix {
            rows: self.rows + below.rows,
            cols: self.cols,
            stride: self.stride,
            data,
        }
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.get(i, j) {
                    t.set(j, i, true);
                }
            }
        }
        t
    }

    pub fn is_zero_row(&self, i: usize) -> bool {
        self.row(i).iter().all(|&w| w == 0)
    }

    /// Reduced row-echelon form with leftmost-column pivoting, plus the pivot
    /// column of each nonzero row (in row order).
    pub fn rref(&self) -> (BitMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| m.get(i, c)) else {
                continue;
            };
            m.swap_rows(p, r);
            for i in 0..m.rows {
                if i != r && m.get(i, c) {
                    m.xor_row_into(r, i);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        let mut e = Echelon::new(self.cols);
        (0..self.rows).filter(|&i| e.insert(self.row(i))).count()
    }

    /// Canonical basis of the null space `{v : M v = 0}` as the rows of a
    /// `(cols - rank) x cols` matrix, one row per free column in ascending order.
    pub fn kernel_basis(&self) -> Result<BitMatrix> {
        let (r, pivots) = self.rref();
        if pivots.len() < self.rows {
            return Err(Error::NotFullRank {
                rank: pivots.len(),
                rows: self.rows,
            });
        }
        let mut is_pivot = vec![false; self.cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let free: Vec<usize> = (0..self.cols).filter(|&c| !is_pivot[c]).collect();
        let mut k = BitMatrix::zeros(free.len(), self.cols);
        for (row, &f) in free.iter().enumerate() {
            k.set(row, f, true);
            for (prow, &pc) in pivots.iter().enumerate() {
                if r.get(prow, f) {
                    k.set(row, pc, true);
                }
            }
        }
        Ok(k)
    }
}

impl BitMatrix {
    /// Rows `e_f` for every free (non-pivot) column of the RREF, ascending.
    /// Stacked under a full-row-rank `M` this gives an invertible matrix, so
    /// `x -> (M x, P x)` is a bijection. Unlike the kernel basis, which over
    /// GF(2) can meet the row space, this is always a complement.
    pub fn free_coordinate_projection(&self) -> Result<BitMatrix> {
        let (_, pivots) = self.rref();
        if pivots.len() < self.rows {
            return Err(Error::NotFullRank {
                rank: pivots.len(),
                rows: self.rows,
            });
        }
        let mut is_pivot = vec![false; self.cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let free: Vec<usize> = (0..self.cols).filter(|&c| !is_pivot[c]).collect();
        let mut out = BitMatrix::zeros(free.len(), self.cols);
        for (row, &f) in free.iter().enumerate() {
            out.set(row, f, true);
        }
        Ok(out)
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let s: String = (0..self.cols)
                .map(|j| if self.get(i, j) { '1' } else { '0' })
                .collect();
            writeln!(f, "  {s}")?;
        }
        write!(f, "]")
    }
}

/// Incrementally built row space in echelon form, pivot = lowest set column.
#[derive(Debug, Clone)]
pub struct Echelon {
    cols: usize,
    basis: Vec<(usize, Vec<u64>)>,
}

impl Echelon {
    pub fn new(cols: usize) -> Self {
        Self {
            cols,
            basis: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    fn reduce(&self, v: &[u64]) -> Vec<u64> {
        let mut v = v.to_vec();
        for (p, b) in &self.basis {
            if (v[p / 64] >> (p % 64)) & 1 == 1 {
                for (x, y) in v.iter_mut().zip(b) {
                    *x ^= y;
                }
            }
        }
        v
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        self.reduce(v).iter().all(|&w| w == 0)
    }

    /// Adds `v` to the span; returns whether it was independent.
    pub fn insert(&mut self, v: &[u64]) -> bool {
        debug_assert_eq!(v.len(), words_for(self.cols));
        let v = self.reduce(v);
        let Some(p) = lowest_bit(&v) else {
            return false;
        };
        // keep existing vectors reduced at the new pivot so reduce() stays one pass
        for (_, b) in self.basis.iter_mut() {
            if (b[p / 64] >> (p % 64)) & 1 == 1 {
                for (x, y) in b.iter_mut().zip(&v) {
                    *x ^= y;
                }
            }
        }
        self.basis.push((p, v));
        true
    }
}

fn lowest_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_can_meet_row_space_but_projection_cannot() {
        let m = BitMatrix::from_bit_strings(&["11"]);
        let k = m.kernel_basis().unwrap();
        assert_eq!(m.stack(&k).rank(), 1);
        let p = m.free_coordinate_projection().unwrap();
        assert_eq!(p, BitMatrix::from_bit_strings(&["01"]));
        assert_eq!(m.stack(&p).rank(), 2);
    }

    proptest! {
        #[test]
        fn projection_completes_full_rank_rows(rows in prop::collection::vec(any::<u64>(), 1..8), cols in 8usize..14) {
            let m = BitMatrix::from_rows_u64(&rows, cols);
            match m.free_coordinate_projection() {
                Ok(p) => prop_assert_eq!(m.stack(&p).rank(), cols),
                Err(_) => prop_assert!(m.rank() < m.rows()),
            }
        }
    }

    fn brute_rank(rows: &[u64]) -> usize {
        // largest k such that some k-subset of rows is independent, via
        // the size of the span enumerated through all subset XORs
        let mut span = std::collections::HashSet::new();
        for mask in 0u32..(1 << rows.len()) {
            let v = rows
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .fold(0u64, |acc, (_, r)| acc ^ r);
            span.insert(v);
        }
        span.len().trailing_zeros() as usize
    }

    #[test]
    fn rank_examples() {
        assert_eq!(BitMatrix::identity(3).rank(), 3);
        assert_eq!(BitMatrix::zeros(4, 5).rank(), 0);
        let m = BitMatrix::from_bit_strings(&["110", "011", "101"]);
        assert_eq!(m.rank(), 2);
        assert_eq!(brute_rank(&[m.row_u64(0), m.row_u64(1), m.row_u64(2)]), 2);
        assert_eq!(BitMatrix::zeros(0, 0).rank(), 0);
    }

    #[test]
    fn kernel_examples() {
        let m = BitMatrix::from_bit_strings(&["100", "010"]);
        assert_eq!(m.kernel_basis().unwrap(), BitMatrix::from_bit_strings(&["001"]));

        let k = BitMatrix::identity(4).kernel_basis().unwrap();
        assert_eq!((k.rows(), k.cols()), (0, 4));

        let m = BitMatrix::from_bit_strings(&["110", "011"]);
        let k = m.kernel_basis().unwrap();
        assert_eq!(k.rows(), 1);
        let v = k.row_u64(0);
        assert_ne!(v, 0);
        // the only nonzero null vector among all 2^3 candidates
        let null: Vec<u64> = (1..8u64).filter(|&x| m.mul_u64(x) == 0).collect();
        assert_eq!(null, vec![v]);
        assert_eq!(v, 0b111);
    }

    #[test]
    fn kernel_needs_full_row_rank() {
        let m = BitMatrix::from_bit_strings(&["110", "110"]);
        assert_eq!(m.kernel_basis(), Err(Error::NotFullRank { rank: 1, rows: 2 }));
    }

    #[test]
    fn multiword_rows() {
        let mut m = BitMatrix::zeros(3, 130);
        m.set(0, 0, true);
        m.set(1, 64, true);
        m.set(2, 129, true);
        m.set(2, 0, true);
        assert_eq!(m.rank(), 3);
        let k = m.kernel_basis().unwrap();
        assert_eq!(k.rows(), 127);
        assert_eq!(k.rank(), 127);
        for i in 0..k.rows() {
            assert!(m.mul_vec(k.row(i)).iter().all(|&w| w == 0));
        }
    }

    #[test]
    fn rref_is_canonical() {
        let a = BitMatrix::from_bit_strings(&["1101", "0111"]);
        let b = BitMatrix::from_bit_strings(&["1010", "0111"]); // same row space
        assert_eq!(a.rref().0, b.rref().0);
        assert_eq!(a.kernel_basis().unwrap(), b.kernel_basis().unwrap());
    }

    proptest! {
        #[test]
        fn rank_matches_brute_force(rows in prop::collection::vec(0u64..(1 << 8), 0..7)) {
            let m = BitMatrix::from_rows_u64(&rows, 8);
            prop_assert_eq!(m.rank(), brute_rank(&rows));
            prop_assert_eq!(m.transpose().rank(), m.rank());
        }

        #[test]
        fn kernel_accounting(rows in prop::collection::vec(0u64..(1 << 10), 0..8)) {
            let m = BitMatrix::from_rows_u64(&rows, 10);
            let (r, pivots) = m.rref();
            let basis = BitMatrix::from_rows_u64(
                &(0..pivots.len()).map(|i| r.row_u64(i)).collect::<Vec<_>>(), 10);
            let k = basis.kernel_basis().unwrap();
            prop_assert_eq!(k.rank(), 10 - m.rank());
            for i in 0..k.rows() {
                prop_assert_eq!(m.mul_u64(k.row_u64(i)), 0);
            }
        }
    }
}
