//! Seeded function families `[N] -> [M]`, bounded-independence polynomial
//! families over GF(2^n), and the direct-sum combinator.
//!
//! Domain points and range values are 1-indexed: `x` in `1..=N`, outputs in
//! `1..=M`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gf2::{ceil_log2, find_irreducible, FieldContext};
use crate::seed::{low_mask, SeedBits};

/// A function family indexed by a fixed-length bit-string seed.
pub trait SeededFamily: Send + Sync {
    fn seed_bits(&self) -> usize;
    fn domain_size(&self) -> u64;
    fn range_size(&self) -> u64;

    /// Evaluates the member selected by `seed[offset..offset + seed_bits]`
    /// at `x`. No argument checking.
    fn eval_at(&self, seed: &SeedBits, offset: usize, x: u64) -> u64;

    fn eval(&self, seed: &SeedBits, x: u64) -> Result<u64> {
        check_args(self.seed_bits(), self.domain_size(), seed, x)?;
        Ok(self.eval_at(seed, 0, x))
    }

    /// Evaluates at every point of `xs` (unchecked). Implementations may
    /// share work across points.
    fn eval_many(&self, seed: &SeedBits, xs: &[u64], out: &mut [u64]) {
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = self.eval_at(seed, 0, x);
        }
    }
}

pub(crate) fn check_args(seed_bits: usize, domain: u64, seed: &SeedBits, x: u64) -> Result<()> {
    if seed.len() != seed_bits {
        return Err(Error::BadSeedLength {
            expected: seed_bits,
            got: seed.len(),
        });
    }
    if x == 0 || x > domain {
        return Err(Error::DomainOverflow { x, domain });
    }
    Ok(())
}

macro_rules! forward_family {
    ($($ty:ty),*) => {$(
        impl<F: SeededFamily + ?Sized> SeededFamily for $ty {
            fn seed_bits(&self) -> usize { (**self).seed_bits() }
            fn domain_size(&self) -> u64 { (**self).domain_size() }
            fn range_size(&self) -> u64 { (**self).range_size() }
            fn eval_at(&self, seed: &SeedBits, offset: usize, x: u64) -> u64 {
                (**self).eval_at(seed, offset, x)
            }
            fn eval_many(&self, seed: &SeedBits, xs: &[u64], out: &mut [u64]) {
                (**self).eval_many(seed, xs, out)
            }
        }
    )*};
}

forward_family!(Box<F>, Arc<F>, &F);

pub type DynFamily = Arc<dyn SeededFamily>;

/// Degree-`(t-1)` polynomials over GF(2^n): a `t`-wise independent family.
///
/// The seed holds coefficients `a_0 .. a_{t-1}`, `n` bits each, `a_0` lowest.
/// Point `x` is embedded as the field element `x - 1`; the output keeps the
/// `log2 M` low-order bits of the polynomial value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TWiseFamily {
    t: u32,
    ctx: FieldContext,
    domain: u64,
    range: u64,
}

impl TWiseFamily {
    /// Uses the smallest field with `2^n >= max(N, M)`.
    pub fn new(t: u32, domain: u64, range: u64) -> Result<Self> {
        let degree = ceil_log2(domain).max(ceil_log2(range)).max(1);
        Self::with_field(t, find_irreducible(degree)?, domain, range)
    }

    pub fn with_field(t: u32, ctx: FieldContext, domain: u64, range: u64) -> Result<Self> {
        if t == 0 {
            return Err(Error::ParamViolation("independence t must be >= 1".into()));
        }
        if domain == 0 {
            return Err(Error::ParamViolation("domain size must be >= 1".into()));
        }
        if range == 0 || !range.is_power_of_two() {
            return Err(Error::ParamViolation(format!(
                "range size {range} is not a power of two"
            )));
        }
        let n = ctx.degree();
        if ceil_log2(domain) > n || ceil_log2(range) > n {
            return Err(Error::ParamViolation(format!(
                "field GF(2^{n}) too small for domain {domain} and range {range}"
            )));
        }
        Ok(Self {
            t,
            ctx,
            domain,
            range,
        })
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn field(&self) -> &FieldContext {
        &self.ctx
    }

    /// The polynomial value in the field before truncation to the range.
    #[inline]
    pub fn field_value_at(&self, seed: &SeedBits, offset: usize, x: u64) -> u64 {
        let n = self.ctx.degree() as usize;
        let point = x - 1;
        let t = self.t as usize;
        let mut v = seed.read(offset + (t - 1) * n, n);
        for i in (0..t - 1).rev() {
            v = self.ctx.mul(v, point) ^ seed.read(offset + i * n, n);
        }
        v
    }

    pub fn field_value(&self, seed: &SeedBits, x: u64) -> Result<u64> {
        check_args(self.seed_bits(), self.domain, seed, x)?;
        Ok(self.field_value_at(seed, 0, x))
    }

    /// Packs coefficients `a_0 .. a_{t-1}` into a seed.
    pub fn seed_from_coefficients(&self, coeffs: &[u64]) -> Result<SeedBits> {
        if coeffs.len() != self.t as usize {
            return Err(Error::BadSeedLength {
                expected: self.t as usize,
                got: coeffs.len(),
            });
        }
        let n = self.ctx.degree() as usize;
        let mut s = SeedBits::zeros(self.seed_bits());
        for (i, &c) in coeffs.iter().enumerate() {
            if !self.ctx.contains(c) {
                return Err(Error::ParamViolation(format!("coefficient {c:#x} outside the field")));
            }
            s.write(i * n, n, c);
        }
        Ok(s)
    }
}

impl SeededFamily for TWiseFamily {
    fn seed_bits(&self) -> usize {
        self.t as usize * self.ctx.degree() as usize
    }

    fn domain_size(&self) -> u64 {
        self.domain
    }

    fn range_size(&self) -> u64 {
        self.range
    }

    #[inline]
    fn eval_at(&self, seed: &SeedBits, offset: usize, x: u64) -> u64 {
        let bits = self.range.trailing_zeros() as usize;
        (self.field_value_at(seed, offset, x) & low_mask(bits)) + 1
    }
}

pub fn twise_eval(fam: &TWiseFamily, seed: &SeedBits, x: u64) -> Result<u64> {
    fam.eval(seed, x)
}

/// The single function `x -> value`; zero seed bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantFamily {
    domain: u64,
    range: u64,
    value: u64,
}

impl ConstantFamily {
    pub fn new(domain: u64, range: u64, value: u64) -> Result<Self> {
        if value == 0 || value > range {
            return Err(Error::ParamViolation(format!("constant {value} outside [1, {range}]")));
        }
        Ok(Self {
            domain,
            range,
            value,
        })
    }
}

impl SeededFamily for ConstantFamily {
    fn seed_bits(&self) -> usize {
        0
    }
    fn domain_size(&self) -> u64 {
        self.domain
    }
    fn range_size(&self) -> u64 {
        self.range
    }
    fn eval_at(&self, _: &SeedBits, _: usize, _: u64) -> u64 {
        self.value
    }
}

/// `(a + b - 1) mod M + 1` on values in `[1, M]`.
#[inline]
pub fn direct_sum_value(a: u64, b: u64, range: u64) -> u64 {
    (a + b - 1) % range + 1
}

/// Pointwise direct sum `f + g`; seed is `f`'s seed followed by `g`'s.
#[derive(Debug, Clone)]
pub struct DirectSum<F, G> {
    f: F,
    g: G,
}

impl<F: SeededFamily, G: SeededFamily> DirectSum<F, G> {
    pub fn new(f: F, g: G) -> Result<Self> {
        if f.range_size() != g.range_size() {
            return Err(Error::RangeMismatch {
                left: f.range_size(),
                right: g.range_size(),
            });
        }
        if f.domain_size() != g.domain_size() {
            return Err(Error::ParamViolation(format!(
                "direct sum of families on domains {} and {}",
                f.domain_size(),
                g.domain_size()
            )));
        }
        Ok(Self { f, g })
    }

    pub fn parts(&self) -> (&F, &G) {
        (&self.f, &self.g)
    }
}

impl<F: SeededFamily, G: SeededFamily> SeededFamily for DirectSum<F, G> {
    fn seed_bits(&self) -> usize {
        self.f.seed_bits() + self.g.seed_bits()
    }
    fn domain_size(&self) -> u64 {
        self.f.domain_size()
    }
    fn range_size(&self) -> u64 {
        self.f.range_size()
    }
    fn eval_at(&self, seed: &SeedBits, offset: usize, x: u64) -> u64 {
        let a = self.f.eval_at(seed, offset, x);
        let b = self.g.eval_at(seed, offset + self.f.seed_bits(), x);
        direct_sum_value(a, b, self.range_size())
    }
}

pub fn direct_sum<F: SeededFamily, G: SeededFamily>(f: F, g: G) -> Result<DirectSum<F, G>> {
    DirectSum::new(f, g)
}
