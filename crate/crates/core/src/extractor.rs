//! Linear seeded extractors whose output is exactly uniform on a uniform
//! source for every seed, plus exact distance computations for small sources.
//!
//! Sources, seeds and outputs are packed into `u64`s (bit `j` = coordinate `j`),
//! so source widths are limited to 64 bits.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, Echelon, FieldContext};
use crate::seed::low_mask;

/// A seeded map `x -> M_s x` from `source_bits` to `output_bits` bits.
pub trait LinearSeededMap: Send + Sync {
    fn source_bits(&self) -> usize;
    fn seed_bits(&self) -> usize;
    fn output_bits(&self) -> usize;

    /// The `output_bits x source_bits` matrix selected by `seed`.
    fn matrix(&self, seed: u64) -> BitMatrix;

    fn apply(&self, x: u64, seed: u64) -> u64 {
        self.matrix(seed).mul_u64(x)
    }

    /// Whether every seed's matrix is claimed to have full row rank.
    fn surjective(&self) -> bool {
        false
    }

    fn claimed_entropy(&self) -> Option<f64> {
        None
    }

    fn claimed_error(&self) -> Option<f64> {
        None
    }
}

/// `E(x, s) = low_m(x * (s + 1))` over GF(2^n).
#[derive(Debug, Clone)]
pub struct LeftoverHash {
    ctx: FieldContext,
    seed_bits: usize,
    output_bits: usize,
    entropy: Option<f64>,
}

impl LeftoverHash {
    /// Seed length `n - 1`.
    pub fn new(ctx: FieldContext, output_bits: usize) -> Result<Self> {
        Self::with_seed_bits(ctx, ctx.degree() as usize - 1, output_bits)
    }

    /// A shorter seed keeps the multipliers `1 ..= 2^d` distinct and nonzero;
    /// the error bound grows by `2^(n - 1 - d)`.
    pub fn with_seed_bits(ctx: FieldContext, seed_bits: usize, output_bits: usize) -> Result<Self> {
        let n = ctx.degree() as usize;
        if output_bits >= n {
            return Err(Error::WidthError { n, m: output_bits });
        }
        if seed_bits + 1 > n {
            return Err(Error::ParamViolation(format!(
                "leftover-hash seed of {seed_bits} bits over GF(2^{n}) needs at most {} bits",
                n - 1
            )));
        }
        Ok(Self {
            ctx,
            seed_bits,
            output_bits,
            entropy: None,
        })
    }

    /// Declares the source min-entropy the error claim refers to.
    pub fn with_entropy(mut self, k: f64) -> Self {
        self.entropy = Some(k);
        self
    }

    pub fn field(&self) -> &FieldContext {
        &self.ctx
    }

    /// The output-bit rows of `M_s` as integers.
    pub fn rows(&self, seed: u64) -> Vec<u64> {
        let n = self.source_bits();
        let y = seed + 1;
        let mut rows = vec![0u64; self.output_bits];
        for j in 0..n {
            let col = self.ctx.mul(1 << j, y);
            for (i, r) in rows.iter_mut().enumerate() {
                *r |= ((col >> i) & 1) << j;
            }
        }
        rows
    }
}

impl LinearSeededMap for LeftoverHash {
    fn source_bits(&self) -> usize {
        self.ctx.degree() as usize
    }
    fn seed_bits(&self) -> usize {
        self.seed_bits
    }
    fn output_bits(&self) -> usize {
        self.output_bits
    }
    fn matrix(&self, seed: u64) -> BitMatrix {
        BitMatrix::from_rows_u64(&self.rows(seed), self.source_bits())
    }
    #[inline]
    fn apply(&self, x: u64, seed: u64) -> u64 {
        self.ctx.mul(x, seed + 1) & low_mask(self.output_bits)
    }
    fn surjective(&self) -> bool {
        true
    }
    fn claimed_entropy(&self) -> Option<f64> {
        self.entropy
    }
    fn claimed_error(&self) -> Option<f64> {
        let slack = (self.source_bits() - 1 - self.seed_bits) as f64;
        self.entropy
            .map(|k| 2f64.powf(slack) * 2.0 * 2f64.powf((self.output_bits as f64 - k) / 2.0))
    }
}

/// Standalone form with an `(n - 1)`-bit seed.
pub fn leftover_extract(ctx: &FieldContext, x: u64, s: u64, m: usize) -> Result<u64> {
    let n = ctx.degree() as usize;
    if m >= n {
        return Err(Error::WidthError { n, m });
    }
    if !ctx.contains(x) || s >= 1u64 << (n - 1) {
        return Err(Error::ParamViolation(format!(
            "source {x:#x} or seed {s:#x} too wide for GF(2^{n})"
        )));
    }
    Ok(ctx.mul(x, s + 1) & low_mask(m))
}

/// Replaces each row that depends on earlier rows by the lowest-index unit
/// vector outside the current span. Independent rows are kept in place.
pub fn surjectify(m: &BitMatrix) -> Result<BitMatrix> {
    if m.rows() > m.cols() {
        return Err(Error::TooManyRows {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let mut span = Echelon::new(m.cols());
    let mut dependent = Vec::new();
    for i in 0..m.rows() {
        if !span.insert(m.row(i)) {
            dependent.push(i);
        }
    }
    let mut out = m.clone();
    let mut next = 0;
    let words = m.cols().div_ceil(64);
    for i in dependent {
        loop {
            let mut e = vec![0u64; words];
            e[next / 64] |= 1 << (next % 64);
            next += 1;
            if span.insert(&e) {
                out.set_row_words(i, &e);
                break;
            }
        }
    }
    Ok(out)
}

/// Any linear map made surjective seed by seed.
#[derive(Debug, Clone)]
pub struct Surjectified<E>(pub E);

impl<E: LinearSeededMap> LinearSeededMap for Surjectified<E> {
    fn source_bits(&self) -> usize {
        self.0.source_bits()
    }
    fn seed_bits(&self) -> usize {
        self.0.seed_bits()
    }
    fn output_bits(&self) -> usize {
        self.0.output_bits()
    }
    fn matrix(&self, seed: u64) -> BitMatrix {
        surjectify(&self.0.matrix(seed)).expect("output_bits <= source_bits")
    }
    fn surjective(&self) -> bool {
        true
    }
    fn claimed_entropy(&self) -> Option<f64> {
        self.0.claimed_entropy()
    }
}

/// A fixed matrix per seed, given as a lookup table. Handy for tests and for
/// slotting in externally computed maps.
#[derive(Debug, Clone)]
pub struct TableMap {
    source_bits: usize,
    output_bits: usize,
    seed_bits: usize,
    matrices: Vec<BitMatrix>,
}

impl TableMap {
    pub fn new(matrices: Vec<BitMatrix>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::ParamViolation("empty matrix table".into()))?;
        let (rows, cols) = (first.rows(), first.cols());
        if !matrices.len().is_power_of_two() || cols > 64 {
            return Err(Error::ParamViolation(
                "table needs a power-of-two number of matrices with at most 64 columns".into(),
            ));
        }
        if matrices.iter().any(|m| m.rows() != rows || m.cols() != cols) {
            return Err(Error::ParamViolation("matrices differ in shape".into()));
        }
        Ok(Self {
            source_bits: cols,
            output_bits: rows,
            seed_bits: matrices.len().trailing_zeros() as usize,
            matrices,
        })
    }
}

impl LinearSeededMap for TableMap {
    fn source_bits(&self) -> usize {
        self.source_bits
    }
    fn seed_bits(&self) -> usize {
        self.seed_bits
    }
    fn output_bits(&self) -> usize {
        self.output_bits
    }
    fn matrix(&self, seed: u64) -> BitMatrix {
        self.matrices[seed as usize].clone()
    }
}

/// A fixed-seed composition: per stage, its matrix and the projection onto
/// the free coordinates of its row-reduced form. Each stage sees the residual
/// left by the previous one, which carries exactly the conditional
/// distribution of the source given that stage's output.
pub struct ComposedMap {
    source_bits: usize,
    steps: Vec<(BitMatrix, BitMatrix)>,
}

impl ComposedMap {
    pub fn new(stages: &[&dyn LinearSeededMap], source_bits: usize, seeds: &[u64]) -> Result<Self> {
        if seeds.len() != stages.len() {
            return Err(Error::ParamViolation(format!(
                "{} stages but {} seeds",
                stages.len(),
                seeds.len()
            )));
        }
        let mut width = source_bits;
        let mut steps = Vec::with_capacity(stages.len());
        for (i, (stage, &seed)) in stages.iter().zip(seeds).enumerate() {
            if stage.source_bits() != width {
                return Err(Error::WidthMismatch {
                    stage: i,
                    expected: stage.source_bits(),
                    got: width,
                });
            }
            let m = stage.matrix(seed);
            let proj = m.free_coordinate_projection()?;
            steps.push((m, proj));
            width -= stage.output_bits();
        }
        Ok(Self { source_bits, steps })
    }

    /// Per-stage outputs on `x`, written into `out`.
    pub fn apply_into(&self, x: u64, out: &mut [u64]) {
        let mut x = x & low_mask(self.source_bits);
        for ((m, proj), o) in self.steps.iter().zip(out.iter_mut()) {
            *o = m.mul_u64(x);
            x = proj.mul_u64(x);
        }
    }

    pub fn apply(&self, x: u64) -> Vec<u64> {
        let mut out = vec![0; self.steps.len()];
        self.apply_into(x, &mut out);
        out
    }
}

/// Runs `stages` in order on an `source_bits`-bit source; see [`ComposedMap`].
pub fn compose_extract(
    stages: &[&dyn LinearSeededMap],
    source_bits: usize,
    x: u64,
    seeds: &[u64],
) -> Result<Vec<u64>> {
    Ok(ComposedMap::new(stages, source_bits, seeds)?.apply(x))
}

/// Packs per-stage outputs into one integer, stage 0 lowest.
pub fn pack_outputs(stages: &[&dyn LinearSeededMap], outputs: &[u64]) -> u64 {
    let mut v = 0u64;
    let mut shift = 0;
    for (s, &o) in stages.iter().zip(outputs) {
        v |= o << shift;
        shift += s.output_bits();
    }
    v
}

/// Half the L1 distance between two explicit distributions.
pub fn exact_statistical_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DomainMismatch(format!(
            "supports of size {} and {}",
            a.len(),
            b.len()
        )));
    }
    for (name, d) in [("first", a), ("second", b)] {
        let total: f64 = d.iter().sum();
        if (total - 1.0).abs() > 1e-12 || d.iter().any(|&p| p < 0.0) {
            return Err(Error::DomainMismatch(format!(
                "{name} distribution sums to {total}"
            )));
        }
    }
    Ok(0.5 * a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>())
}

/// Uniform distribution on an explicit set of `n`-bit values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatSource {
    n: usize,
    support: Vec<u64>,
}

impl FlatSource {
    pub fn new(n: usize, mut support: Vec<u64>) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        if support.is_empty() || support.iter().any(|&v| v & !low_mask(n) != 0) {
            return Err(Error::ParamViolation(format!(
                "flat source needs a nonempty support of {n}-bit values"
            )));
        }
        Ok(Self { n, support })
    }

    /// A uniformly random support of size `2^k`.
    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Self {
        assert!(k <= n && n < 32);
        let support = index::sample(rng, 1 << n, 1 << k)
            .into_iter()
            .map(|v| v as u64)
            .collect();
        Self::new(n, support).expect("sampled values fit")
    }

    /// `shift + span(basis)`.
    pub fn affine(n: usize, basis: &[u64], shift: u64) -> Result<Self> {
        let mut support = vec![shift & low_mask(n)];
        for &b in basis {
            let more: Vec<u64> = support.iter().map(|&v| v ^ (b & low_mask(n))).collect();
            support.extend(more);
        }
        Self::new(n, support)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn min_entropy(&self) -> f64 {
        (self.support.len() as f64).log2()
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            n,
            support: (0..1u64 << n).collect(),
        }
    }
}

/// Distance of `(S, E(X, S))` from uniform, by direct counting over every
/// seed and support point.
pub fn strong_extractor_distance(ext: &dyn LinearSeededMap, src: &FlatSource) -> f64 {
    let m = ext.output_bits();
    let k = src.support.len() as u128;
    let mut numer = 0u128;
    let mut counts = vec![0u128; 1 << m];
    for s in 0..1u64 << ext.seed_bits() {
        counts.iter_mut().for_each(|c| *c = 0);
        for &x in &src.support {
            counts[ext.apply(x, s) as usize] += 1;
        }
        numer += counts.iter().map(|&c| (c << m).abs_diff(k)).sum::<u128>();
    }
    numer as f64 / (2.0 * k as f64 * (1u128 << (m + ext.seed_bits())) as f64)
}

fn walsh_hadamard(a: &mut [i64]) {
    let mut h = 1;
    while h < a.len() {
        for block in a.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi) {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            }
        }
        h *= 2;
    }
}

/// Per-seed Fourier data of a linear extractor, reused across many sources.
///
/// For a linear map the output count at `y` is
/// `2^-m * sum_u (-1)^(u.y) * F(M_s^T u)` where `F` is the Walsh transform of
/// the source indicator, so each seed costs `O(m 2^m)` once `F` is known.
pub struct SeedSpectra {
    n: usize,
    m: usize,
    seed_bits: usize,
    /// `M_s^T u` for every seed `s` and `u in {0,1}^m`.
    dual: Vec<u32>,
}

impl SeedSpectra {
    pub fn new(ext: &dyn LinearSeededMap) -> Result<Self> {
        let (n, m, d) = (ext.source_bits(), ext.output_bits(), ext.seed_bits());
        if n > 24 || m > 16 || d > 24 {
            return Err(Error::TooLargeForExhaustive {
                bits: n.max(d),
                limit: 24,
            });
        }
        let mut dual = Vec::with_capacity((1 << d) << m);
        for s in 0..1u64 << d {
            let mat = ext.matrix(s);
            let rows: Vec<u64> = (0..m).map(|i| mat.row_u64(i)).collect();
            for u in 0..1usize << m {
                let v = (0..m).filter(|i| u >> i & 1 == 1).fold(0, |acc, i| acc ^ rows[i]);
                dual.push(v as u32);
            }
        }
        Ok(Self {
            n,
            m,
            seed_bits: d,
            dual,
        })
    }

    pub fn distance(&self, src: &FlatSource) -> f64 {
        assert_eq!(src.n, self.n);
        let mut f = vec![0i64; 1 << self.n];
        for &x in &src.support {
            f[x as usize] = 1;
        }
        walsh_hadamard(&mut f);
        let k = src.support.len() as i64;
        let width = 1usize << self.m;
        let mut buf = vec![0i64; width];
        let mut numer = 0u128;
        for chunk in self.dual.chunks(width) {
            for (b, &v) in buf.iter_mut().zip(chunk) {
                *b = f[v as usize];
            }
            walsh_hadamard(&mut buf);
            numer += buf.iter().map(|&c| (c - k).unsigned_abs() as u128).sum::<u128>();
        }
        numer as f64 / (2.0 * k as f64 * ((width as u128) << self.seed_bits) as f64)
    }
}

/// Seeds whose matrix has rank below the output width.
pub fn surjectivity_failures(ext: &dyn LinearSeededMap) -> Vec<u64> {
    (0..1u64 << ext.seed_bits())
        .filter(|&s| ext.matrix(s).rank() < ext.output_bits())
        .collect()
}

/// The leftover-hash error bound `2 * 2^((m - k) / 2)`.
pub fn leftover_hash_bound(m: usize, k: f64) -> f64 {
    2.0 * 2f64.powf((m as f64 - k) / 2.0)
}
