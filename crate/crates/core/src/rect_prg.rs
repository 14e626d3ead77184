//! Generators for combinatorial rectangles `[M]^N`, and exact error oracles.
//!
//! Coordinates are 1-indexed and take values in `1..=M`.

use serde::{Deserialize, Serialize};

use crate::enumerate::{count_seeds, fold_seeds, Sampling, EXHAUSTIVE_LIMIT};
use crate::error::{Error, Result};
use crate::gf2::{ceil_log2, find_irreducible, FieldContext};
use crate::kwise::{check_args, SeededFamily, TWiseFamily};
use crate::seed::{low_mask, SeedBits};

pub trait RectanglePrg: Send + Sync {
    fn seed_bits(&self) -> usize;
    fn dimension(&self) -> u64;
    fn alphabet(&self) -> u64;
    /// Declared additive error; audited, never assumed.
    fn claimed_error(&self) -> f64;

    /// Coordinate `i` of the expansion of `seed[offset..]` (unchecked).
    fn coordinate_at(&self, seed: &SeedBits, offset: usize, i: u64) -> u64;

    fn expand(&self, seed: &SeedBits) -> Result<Vec<u64>> {
        if seed.len() != self.seed_bits() {
            return Err(Error::BadSeedLength {
                expected: self.seed_bits(),
                got: seed.len(),
            });
        }
        Ok((1..=self.dimension())
            .map(|i| self.coordinate_at(seed, 0, i))
            .collect())
    }

    fn descriptor(&self) -> PrgDescriptor;
}

macro_rules! forward_prg {
    ($($t:ty),*) => {$(
        impl<P: RectanglePrg + ?Sized> RectanglePrg for $t {
            fn seed_bits(&self) -> usize {
                (**self).seed_bits()
            }
            fn dimension(&self) -> u64 {
                (**self).dimension()
            }
            fn alphabet(&self) -> u64 {
                (**self).alphabet()
            }
            fn claimed_error(&self) -> f64 {
                (**self).claimed_error()
            }
            #[inline]
            fn coordinate_at(&self, seed: &SeedBits, offset: usize, i: u64) -> u64 {
                (**self).coordinate_at(seed, offset, i)
            }
            fn descriptor(&self) -> PrgDescriptor {
                (**self).descriptor()
            }
        }
    )*};
}

forward_prg!(Box<P>, &P);

fn check_alphabet(m: u64) -> Result<()> {
    if m == 0 || !m.is_power_of_two() {
        return Err(Error::ParamViolation(format!(
            "alphabet {m} is not a power of two"
        )));
    }
    Ok(())
}

/// The seed is the output: coordinate `i` is chunk `i - 1` plus one.
#[derive(Debug, Clone)]
pub struct FullIndependence {
    dimension: u64,
    alphabet: u64,
}

impl FullIndependence {
    pub fn new(dimension: u64, alphabet: u64) -> Result<Self> {
        check_alphabet(alphabet)?;
        Ok(Self {
            dimension,
            alphabet,
        })
    }

    fn width(&self) -> usize {
        self.alphabet.trailing_zeros() as usize
    }
}

impl RectanglePrg for FullIndependence {
    fn seed_bits(&self) -> usize {
        self.dimension as usize * self.width()
    }
    fn dimension(&self) -> u64 {
        self.dimension
    }
    fn alphabet(&self) -> u64 {
        self.alphabet
    }
    fn claimed_error(&self) -> f64 {
        0.0
    }
    #[inline]
    fn coordinate_at(&self, seed: &SeedBits, offset: usize, i: u64) -> u64 {
        let w = self.width();
        seed.read(offset + (i as usize - 1) * w, w) + 1
    }
    fn descriptor(&self) -> PrgDescriptor {
        PrgDescriptor::new(PrgKind::Full, PrgParams::default(), self.seed_bits(), 0.0)
    }
}

/// Coordinate `i` is a `t`-wise independent polynomial evaluated at `i`.
#[derive(Debug, Clone)]
pub struct TWisePrg {
    family: TWiseFamily,
}

impl TWisePrg {
    pub fn new(t: u32, dimension: u64, alphabet: u64) -> Result<Self> {
        check_alphabet(alphabet)?;
        Ok(Self {
            family: TWiseFamily::new(t, dimension, alphabet)?,
        })
    }

    pub fn family(&self) -> &TWiseFamily {
        &self.family
    }
}

impl RectanglePrg for TWisePrg {
    fn seed_bits(&self) -> usize {
        self.family.seed_bits()
    }
    fn dimension(&self) -> u64 {
        self.family.domain_size()
    }
    fn alphabet(&self) -> u64 {
        self.family.range_size()
    }
    fn claimed_error(&self) -> f64 {
        1.0
    }
    #[inline]
    fn coordinate_at(&self, seed: &SeedBits, offset: usize, i: u64) -> u64 {
        self.family.eval_at(seed, offset, i)
    }
    fn descriptor(&self) -> PrgDescriptor {
        let params = PrgParams {
            t: Some(self.family.t()),
            ..Default::default()
        };
        PrgDescriptor::new(PrgKind::Twise, params, self.seed_bits(), 1.0)
    }
}

/// Recursive halving: `G_0(x) = (x)` and
/// `G_j(x) = G_{j-1}(x) || G_{j-1}(h_j(x))` with `h_j(x) = a_j x + c_j` over
/// GF(2^b). Each output block is truncated to `log2 M` bits.
///
/// Seed layout: `x` (b bits), then `(a_j, c_j)` for `j = 1..=depth`.
#[derive(Debug, Clone)]
pub struct Halving {
    ctx: FieldContext,
    depth: u32,
    dimension: u64,
    alphabet: u64,
}

impl Halving {
    pub fn new(block_bits: u32, dimension: u64, alphabet: u64) -> Result<Self> {
        check_alphabet(alphabet)?;
        if (block_bits as u64) < alphabet.trailing_zeros() as u64 {
            return Err(Error::ParamViolation(format!(
                "block of {block_bits} bits cannot cover alphabet {alphabet}"
            )));
        }
        if dimension == 0 {
            return Err(Error::ParamViolation("dimension must be >= 1".into()));
        }
        Ok(Self {
            ctx: find_irreducible(block_bits)?,
            depth: ceil_log2(dimension),
            dimension,
            alphabet,
        })
    }

    pub fn block_bits(&self) -> u32 {
        self.ctx.degree()
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// The untruncated block for 0-based coordinate `idx`.
    #[inline]
    pub fn block_at(&self, seed: &SeedBits, offset: usize, idx: u64) -> u64 {
        let b = self.ctx.degree() as usize;
        let mut x = seed.read(offset, b);
        for lvl in (1..=self.depth as usize).rev() {
            if (idx >> (lvl - 1)) & 1 == 1 {
                let base = offset + b + 2 * b * (lvl - 1);
                let (a, c) = (seed.read(base, b), seed.read(base + b, b));
                x = self.ctx.mul(a, x) ^ c;
            }
        }
        x
    }
}

impl RectanglePrg for Halving {
    fn seed_bits(&self) -> usize {
        let b = self.ctx.degree() as usize;
        b + 2 * b * self.depth as usize
    }
    fn dimension(&self) -> u64 {
        self.dimension
    }
    fn alphabet(&self) -> u64 {
        self.alphabet
    }
    fn claimed_error(&self) -> f64 {
        1.0
    }
    #[inline]
    fn coordinate_at(&self, seed: &SeedBits, offset: usize, i: u64) -> u64 {
        let bits = self.alphabet.trailing_zeros() as usize;
        (self.block_at(seed, offset, i - 1) & low_mask(bits)) + 1
    }
    fn descriptor(&self) -> PrgDescriptor {
        let params = PrgParams {
            block_bits: Some(self.block_bits()),
            ..Default::default()
        };
        PrgDescriptor::new(PrgKind::Halving, params, self.seed_bits(), 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrgKind {
    Full,
    Twise,
    Halving,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrgParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_bits: Option<u32>,
}

/// JSON form `{kind, params, seed_bits, claimed_error}`. `seed_bits` is
/// checked against the built generator when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrgDescriptor {
    pub kind: PrgKind,
    #[serde(default)]
    pub params: PrgParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_bits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claimed_error: Option<f64>,
}

impl PrgDescriptor {
    fn new(kind: PrgKind, params: PrgParams, seed_bits: usize, claimed_error: f64) -> Self {
        Self {
            kind,
            params,
            seed_bits: Some(seed_bits),
            claimed_error: Some(claimed_error),
        }
    }

    pub fn full() -> Self {
        Self {
            kind: PrgKind::Full,
            params: PrgParams::default(),
            seed_bits: None,
            claimed_error: None,
        }
    }

    pub fn twise(t: u32) -> Self {
        Self {
            kind: PrgKind::Twise,
            params: PrgParams {
                t: Some(t),
                block_bits: None,
            },
            seed_bits: None,
            claimed_error: None,
        }
    }

    pub fn halving(block_bits: u32) -> Self {
        Self {
            kind: PrgKind::Halving,
            params: PrgParams {
                t: None,
                block_bits: Some(block_bits),
            },
            seed_bits: None,
            claimed_error: None,
        }
    }

    /// Instantiates the generator for `[alphabet]^dimension`.
    pub fn build(&self, dimension: u64, alphabet: u64) -> Result<Box<dyn RectanglePrg>> {
        let missing = |p: &str| Error::Config(format!("{:?} generator needs params.{p}", self.kind));
        let prg: Box<dyn RectanglePrg> = match self.kind {
            PrgKind::Full => Box::new(FullIndependence::new(dimension, alphabet)?),
            PrgKind::Twise => Box::new(TWisePrg::new(
                self.params.t.ok_or_else(|| missing("t"))?,
                dimension,
                alphabet,
            )?),
            PrgKind::Halving => Box::new(Halving::new(
                self.params.block_bits.ok_or_else(|| missing("block_bits"))?,
                dimension,
                alphabet,
            )?),
        };
        if let Some(bits) = self.seed_bits {
            if bits != prg.seed_bits() {
                return Err(Error::Config(format!(
                    "{:?} generator declares {bits} seed bits but needs {}",
                    self.kind,
                    prg.seed_bits()
                )));
            }
        }
        Ok(match self.claimed_error {
            Some(e) => Box::new(WithClaim { inner: prg, claim: e }),
            None => prg,
        })
    }
}

struct WithClaim {
    inner: Box<dyn RectanglePrg>,
    claim: f64,
}

impl RectanglePrg for WithClaim {
    fn seed_bits(&self) -> usize {
        self.inner.seed_bits()
    }
    fn dimension(&self) -> u64 {
        self.inner.dimension()
    }
    fn alphabet(&self) -> u64 {
        self.inner.alphabet()
    }
    fn claimed_error(&self) -> f64 {
        self.claim
    }
    fn coordinate_at(&self, seed: &SeedBits, offset: usize, i: u64) -> u64 {
        self.inner.coordinate_at(seed, offset, i)
    }
    fn descriptor(&self) -> PrgDescriptor {
        PrgDescriptor {
            claimed_error: Some(self.claim),
            ..self.inner.descriptor()
        }
    }
}

/// A generator viewed as a hash family `[N] -> [M]`, `x -> G(seed)_x`.
pub struct PrgFamily<P>(pub P);

impl<P: RectanglePrg> SeededFamily for PrgFamily<P> {
    fn seed_bits(&self) -> usize {
        self.0.seed_bits()
    }
    fn domain_size(&self) -> u64 {
        self.0.dimension()
    }
    fn range_size(&self) -> u64 {
        self.0.alphabet()
    }
    #[inline]
    fn eval_at(&self, seed: &SeedBits, offset: usize, x: u64) -> u64 {
        self.0.coordinate_at(seed, offset, x)
    }
}

/// Truly random functions `[N] -> [M]` as a seeded family.
pub fn uniform_family(n: u64, m: u64) -> Result<PrgFamily<FullIndependence>> {
    Ok(PrgFamily(FullIndependence::new(n, m)?))
}

/// Accepting set of one coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    Any,
    /// `v > theta`
    Greater(u64),
    /// `v <= theta`
    AtMost(u64),
    Equal(u64),
    /// Explicit membership; entry `v - 1` for value `v`.
    Set(Vec<bool>),
}

impl Predicate {
    #[inline]
    pub fn accepts(&self, v: u64) -> bool {
        match self {
            Predicate::Any => true,
            Predicate::Greater(t) => v > *t,
            Predicate::AtMost(t) => v <= *t,
            Predicate::Equal(a) => v == *a,
            Predicate::Set(s) => s.get(v as usize - 1).copied().unwrap_or(false),
        }
    }

    /// `|S|` within `[M]`.
    pub fn size(&self, m: u64) -> u64 {
        match self {
            Predicate::Any => m,
            Predicate::Greater(t) => m.saturating_sub(*t),
            Predicate::AtMost(t) => (*t).min(m),
            Predicate::Equal(a) => (1..=m).contains(a) as u64,
            Predicate::Set(s) => s.iter().take(m as usize).filter(|&&b| b).count() as u64,
        }
    }
}

/// Product predicate over `[M]^N`; unlisted coordinates accept everything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rectangle {
    dimension: u64,
    constraints: Vec<(u64, Predicate)>,
}

impl Rectangle {
    pub fn all(dimension: u64) -> Self {
        Self {
            dimension,
            constraints: Vec::new(),
        }
    }

    /// Adds (or replaces) the constraint on 1-indexed coordinate `i`.
    pub fn with(mut self, i: u64, pred: Predicate) -> Self {
        assert!((1..=self.dimension).contains(&i), "coordinate {i} out of range");
        self.constraints.retain(|(j, _)| *j != i);
        if pred != Predicate::Any {
            self.constraints.push((i, pred));
            self.constraints.sort_by_key(|(j, _)| *j);
        }
        self
    }

    /// `1(x_i > theta)` for every listed coordinate.
    pub fn threshold(dimension: u64, coords: &[u64], theta: u64) -> Self {
        coords
            .iter()
            .fold(Self::all(dimension), |r, &i| r.with(i, Predicate::Greater(theta)))
    }

    pub fn dimension(&self) -> u64 {
        self.dimension
    }

    pub fn constraints(&self) -> &[(u64, Predicate)] {
        &self.constraints
    }

    pub fn predicate(&self, i: u64) -> &Predicate {
        self.constraints
            .iter()
            .find(|(j, _)| *j == i)
            .map(|(_, p)| p)
            .unwrap_or(&Predicate::Any)
    }

    pub fn accepts(&self, x: &[u64]) -> bool {
        self.constraints
            .iter()
            .all(|(i, p)| p.accepts(x[*i as usize - 1]))
    }

    /// Whether the generator's expansion lies in the rectangle; only the
    /// constrained coordinates are computed.
    #[inline]
    pub fn accepts_prg(&self, prg: &dyn RectanglePrg, seed: &SeedBits) -> bool {
        self.constraints
            .iter()
            .all(|(i, p)| p.accepts(prg.coordinate_at(seed, 0, *i)))
    }

    /// `prod |S_i| / M` under the uniform distribution.
    pub fn uniform_probability(&self, m: u64) -> f64 {
        self.constraints
            .iter()
            .map(|(_, p)| p.size(m) as f64 / m as f64)
            .product()
    }
}

fn check_rect(prg: &dyn RectanglePrg, rect: &Rectangle) -> Result<()> {
    if rect.dimension != prg.dimension() {
        return Err(Error::ParamViolation(format!(
            "rectangle of dimension {} for a generator of dimension {}",
            rect.dimension,
            prg.dimension()
        )));
    }
    Ok(())
}

/// `(Pr_G[rect], Pr_U[rect])`.
pub fn rectangle_probabilities(
    prg: &dyn RectanglePrg,
    rect: &Rectangle,
    sampling: Sampling,
) -> Result<(f64, f64)> {
    check_rect(prg, rect)?;
    let bits = prg.seed_bits();
    let hits = count_seeds(bits, sampling, |s| rect.accepts_prg(prg, s))?;
    let pseudo = hits as f64 / sampling.count(bits) as f64;
    Ok((pseudo, rect.uniform_probability(prg.alphabet())))
}

/// `|E_seed[rect(G(seed))] - prod |S_i| / M|`; exact when `sampling` is
/// exhaustive.
pub fn rectangle_error(prg: &dyn RectanglePrg, rect: &Rectangle, sampling: Sampling) -> Result<f64> {
    let (p, u) = rectangle_probabilities(prg, rect, sampling)?;
    Ok((p - u).abs())
}

fn require_exhaustive(prg: &dyn RectanglePrg) -> Result<()> {
    if prg.seed_bits() > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLargeForExhaustive {
            bits: prg.seed_bits(),
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    Ok(())
}

/// `|E_G[rect | x_j = alpha] - Pr_U[rect]|` for a rectangle that leaves
/// coordinate `j` free. Exhaustive only.
pub fn conditional_rectangle_check(
    prg: &dyn RectanglePrg,
    j: u64,
    alpha: u64,
    rect: &Rectangle,
) -> Result<f64> {
    check_rect(prg, rect)?;
    require_exhaustive(prg)?;
    if rect.predicate(j) != &Predicate::Any {
        return Err(Error::ParamViolation(format!(
            "rectangle constrains the conditioned coordinate {j}"
        )));
    }
    let (cond, both) = fold_seeds(
        prg.seed_bits(),
        Sampling::Exhaustive,
        || (0u64, 0u64),
        |acc, s| {
            if prg.coordinate_at(s, 0, j) == alpha {
                acc.0 += 1;
                acc.1 += rect.accepts_prg(prg, s) as u64;
            }
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    )?;
    if cond == 0 {
        return Err(Error::ConditionNeverHolds {
            coordinate: j,
            value: alpha,
        });
    }
    Ok((both as f64 / cond as f64 - rect.uniform_probability(prg.alphabet())).abs())
}

/// The quantities that bound a conditional rectangle error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalBound {
    pub conditional_error: f64,
    /// Error of the rectangle with `x_j = alpha` added.
    pub joint_error: f64,
    /// `|Pr_G[x_j = alpha] - 1/M|`.
    pub point_error: f64,
    pub point_probability: f64,
}

impl ConditionalBound {
    /// `(joint_error + point_error) / point_probability`.
    pub fn bound(&self) -> f64 {
        (self.joint_error + self.point_error) / self.point_probability
    }

    pub fn holds(&self) -> bool {
        self.conditional_error <= self.bound() + 1e-12
    }
}

/// Measures everything in the conditioning argument exhaustively:
/// `E[f | x_j = a] - E_U[f] = (e_joint - E_U[f] e_point) / Pr[x_j = a]`.
pub fn conditional_bound(
    prg: &dyn RectanglePrg,
    j: u64,
    alpha: u64,
    rect: &Rectangle,
) -> Result<ConditionalBound> {
    let conditional_error = conditional_rectangle_check(prg, j, alpha, rect)?;
    let joint = rect.clone().with(j, Predicate::Equal(alpha));
    let joint_error = rectangle_error(prg, &joint, Sampling::Exhaustive)?;
    let point = Rectangle::all(prg.dimension()).with(j, Predicate::Equal(alpha));
    let (p, u) = rectangle_probabilities(prg, &point, Sampling::Exhaustive)?;
    Ok(ConditionalBound {
        conditional_error,
        joint_error,
        point_error: (p - u).abs(),
        point_probability: p,
    })
}

/// Checked expansion for a generator used as a family member lookup.
pub fn coordinate(prg: &dyn RectanglePrg, seed: &SeedBits, i: u64) -> Result<u64> {
    check_args(prg.seed_bits(), prg.dimension(), seed, i)?;
    Ok(prg.coordinate_at(seed, 0, i))
}
