//! The bucketed min-wise and k-min-wise hash families.
//!
//! Evaluation of `h(x)`:
//! 1. bucket `i = g(x)` from a bounded-independence allocation `[N] -> [l]`;
//! 2. block seed `s_i` = coordinate `i` of `PRG1(prg1-seed)`, minus one;
//! 3. `z_i = Ext(w, s_i)` with the leftover-hash extractor;
//! 4. min-wise: `h(x) = G_{z_i}(x)` where `G` is the direct sum of a small
//!    bounded-independence family (low bits of `z_i`) and `PRG2` (high bits);
//!    k-min-wise: `h(x) = h0(x) + PRG2(z_i)_x`.
//!
//! Seed layout is `g || prg1 || w`, followed by `h0` for the k-min-wise family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{LeftoverHash, LinearSeededMap};
use crate::gf2::{ceil_log2, find_irreducible};
use crate::kwise::{direct_sum_value, SeededFamily, TWiseFamily};
use crate::rect_prg::{PrgDescriptor, RectanglePrg};
use crate::seed::SeedBits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// One bucketed inner family, `k = 1`.
    Minwise,
    /// Inner functions straight from `PRG2`, overlaid with `h0`.
    KMinwise,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ExtractorSpec {
    #[default]
    #[serde(rename = "leftover-hash")]
    LeftoverHash,
}

/// Optional overrides of the derived bit widths.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Widths {
    /// Extractor source `w`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_bits: Option<usize>,
    /// Each block seed `s_i`; also the extractor seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_bits: Option<usize>,
    /// Extractor output `z_i`. Fixed by the inner family; if given it must agree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_bits: Option<usize>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionParams {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(default = "one")]
    pub k: u32,
    /// Number of buckets; defaults to `2^t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<u64>,
    /// Defaults to `ceil(log N / log log N)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u32>,
    #[serde(rename = "C")]
    pub c: u32,
    #[serde(rename = "C_e")]
    pub c_e: u32,
    #[serde(rename = "C_s")]
    pub c_s: u32,
    #[serde(rename = "C_g")]
    pub c_g: u32,
    pub prg1: PrgDescriptor,
    pub prg2: PrgDescriptor,
    #[serde(default)]
    pub extractor: ExtractorSpec,
    #[serde(default)]
    pub widths: Widths,
    /// Largest accepted `k`; defaults to `ceil(log2 N)^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_cap: Option<u32>,
}

/// Every width and degree the construction uses, after rounding up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Derived {
    pub t: u32,
    pub ell: u64,
    pub allocation_independence: u32,
    /// Independence of the bounded part of the inner family (min-wise only).
    pub inner_independence: Option<u32>,
    /// Independence of `h0` (k-min-wise only).
    pub h0_independence: Option<u32>,
    pub source_bits: usize,
    pub block_bits: usize,
    pub index_bits: usize,
}

fn log2(v: u64) -> f64 {
    (v as f64).log2()
}

fn ceil_width(v: f64) -> usize {
    // guard against 12.000000000000002 style rounding
    (v - 1e-9).ceil().max(1.0) as usize
}

/// `ceil(log N / log log N)`, or 1 for tiny `N`.
pub fn default_t(n: u64) -> u32 {
    if n < 4 {
        return 1;
    }
    let l = log2(n);
    ((l / l.log2()) - 1e-9).ceil().max(1.0) as u32
}

impl ConstructionParams {
    /// Desk-scale constants `C = 1, C_g = 2, C_s = 3, C_e = 4` with pairwise
    /// generators in both slots.
    pub fn desk(n: u64, m: u64, k: u32) -> Self {
        Self {
            n,
            m,
            k,
            ell: None,
            t: None,
            c: 1,
            c_e: 4,
            c_s: 3,
            c_g: 2,
            prg1: PrgDescriptor::twise(2),
            prg2: PrgDescriptor::twise(2),
            extractor: ExtractorSpec::LeftoverHash,
            widths: Widths::default(),
            k_cap: None,
        }
    }

    pub fn t(&self) -> u32 {
        self.t.unwrap_or_else(|| default_t(self.n))
    }

    pub fn ell(&self) -> u64 {
        self.ell.unwrap_or(1u64 << self.t())
    }

    pub fn k_cap(&self) -> u32 {
        self.k_cap.unwrap_or_else(|| ceil_log2(self.n).max(1).pow(2))
    }

    fn validate(&self, variant: Variant) -> Result<()> {
        let bad = |msg: String| Err(Error::ParamViolation(msg));
        if !(self.c_e > self.c_s && self.c_s > self.c_g && self.c_g > self.c && self.c >= 1) {
            return bad(format!(
                "constants must satisfy C_e > C_s > C_g > C >= 1, got {} {} {} {}",
                self.c_e, self.c_s, self.c_g, self.c
            ));
        }
        if self.n < 2 {
            return bad(format!("domain size N = {} must be at least 2", self.n));
        }
        if self.m < 2 || !self.m.is_power_of_two() {
            return bad(format!("alphabet M = {} must be a power of two >= 2", self.m));
        }
        let ell = self.ell();
        if ell == 0 || !ell.is_power_of_two() {
            return bad(format!("bucket count {ell} must be a power of two"));
        }
        if self.t() == 0 {
            return bad("t must be positive".into());
        }
        if self.k == 0 || self.k > self.k_cap() {
            return bad(format!("k = {} outside [1, {}]", self.k, self.k_cap()));
        }
        if variant == Variant::Minwise && self.k != 1 {
            return bad(format!("the min-wise construction needs k = 1, got {}", self.k));
        }
        Ok(())
    }

    fn inner_independence(&self) -> u32 {
        (0.1 * self.c_s as f64 - 1e-9).ceil() as u32 + 1
    }

    fn source_bits(&self, variant: Variant) -> usize {
        self.widths.source_bits.unwrap_or_else(|| {
            let base = self.c_e as f64 * log2(self.n);
            match variant {
                Variant::Minwise => ceil_width(base),
                Variant::KMinwise => ceil_width(10.0 * self.k as f64 * base),
            }
        })
    }

    fn block_bits(&self) -> usize {
        self.widths
            .block_bits
            .unwrap_or((self.c_e * self.t()) as usize)
    }
}

/// One named field of a seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedField {
    pub name: String,
    pub offset: usize,
    pub width: usize,
}

/// Ordered seed fields; field 0 occupies the lowest bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLayout {
    pub fields: Vec<SeedField>,
}

impl SeedLayout {
    fn from_widths(parts: &[(&str, usize)]) -> Self {
        let mut offset = 0;
        let fields = parts
            .iter()
            .map(|&(name, width)| {
                let f = SeedField {
                    name: name.to_string(),
                    offset,
                    width,
                };
                offset += width;
                f
            })
            .collect();
        Self { fields }
    }

    pub fn total_bits(&self) -> usize {
        self.fields.iter().map(|f| f.width).sum()
    }

    pub fn field(&self, name: &str) -> Option<&SeedField> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn pack(&self, parts: &[SeedBits]) -> Result<SeedBits> {
        if parts.len() != self.fields.len() {
            return Err(Error::SeedFormat(format!(
                "{} parts for {} fields",
                parts.len(),
                self.fields.len()
            )));
        }
        for (f, p) in self.fields.iter().zip(parts) {
            if p.len() != f.width {
                return Err(Error::BadSeedLength {
                    expected: f.width,
                    got: p.len(),
                });
            }
        }
        Ok(SeedBits::concat(&parts.iter().collect::<Vec<_>>()))
    }

    pub fn unpack(&self, seed: &SeedBits) -> Result<Vec<SeedBits>> {
        if seed.len() != self.total_bits() {
            return Err(Error::BadSeedLength {
                expected: self.total_bits(),
                got: seed.len(),
            });
        }
        Ok(self
            .fields
            .iter()
            .map(|f| seed.slice(f.offset, f.width))
            .collect())
    }
}

/// Either bucketed construction as a [`SeededFamily`].
pub struct MinwiseFamily {
    variant: Variant,
    params: ConstructionParams,
    derived: Derived,
    layout: SeedLayout,
    g: TWiseFamily,
    prg1: Box<dyn RectanglePrg>,
    ext: LeftoverHash,
    inner: Option<TWiseFamily>,
    prg2: Box<dyn RectanglePrg>,
    h0: Option<TWiseFamily>,
    g_off: usize,
    prg1_off: usize,
    w_off: usize,
    h0_off: usize,
}

pub fn build_minwise(params: &ConstructionParams) -> Result<MinwiseFamily> {
    MinwiseFamily::new(params, Variant::Minwise)
}

pub fn build_kminwise(params: &ConstructionParams) -> Result<MinwiseFamily> {
    MinwiseFamily::new(params, Variant::KMinwise)
}

pub fn build(params: &ConstructionParams, variant: Variant) -> Result<MinwiseFamily> {
    MinwiseFamily::new(params, variant)
}

pub fn seed_layout(params: &ConstructionParams, variant: Variant) -> Result<SeedLayout> {
    Ok(MinwiseFamily::new(params, variant)?.layout)
}

impl MinwiseFamily {
    fn new(params: &ConstructionParams, variant: Variant) -> Result<Self> {
        params.validate(variant)?;
        let (n, m, k) = (params.n, params.m, params.k);
        let ell = params.ell();
        let allocation = params.c_g * k;
        let g = TWiseFamily::new(allocation, n, ell)?;

        let d = params.block_bits();
        let w = params.source_bits(variant);
        if d == 0 || d > 63 {
            return Err(Error::ParamViolation(format!("block width {d} outside 1..=63")));
        }
        if w > 64 {
            return Err(Error::ParamViolation(format!(
                "extractor source of {w} bits exceeds 64; set widths.source_bits"
            )));
        }
        if d + 1 > w {
            return Err(Error::ParamViolation(format!(
                "block width {d} needs a source of at least {} bits, have {w}",
                d + 1
            )));
        }
        let prg1 = params.prg1.build(ell, 1u64 << d)?;
        let prg2 = params.prg2.build(n, m)?;

        let (inner, h0) = match variant {
            Variant::Minwise => (Some(TWiseFamily::new(params.inner_independence(), n, m)?), None),
            Variant::KMinwise => (None, Some(TWiseFamily::new((params.c_e + 1) * k, n, m)?)),
        };
        let z = inner.as_ref().map_or(0, |f| f.seed_bits()) + prg2.seed_bits();
        if let Some(declared) = params.widths.index_bits {
            if declared != z {
                return Err(Error::ParamViolation(format!(
                    "index width {declared} does not match the {z} seed bits of the inner family"
                )));
            }
        }
        if z == 0 || z >= w {
            return Err(Error::ParamViolation(format!(
                "inner family needs {z} index bits, which must lie in [1, {w})"
            )));
        }
        let ext = LeftoverHash::with_seed_bits(find_irreducible(w as u32)?, d, z)?
            .with_entropy(0.6 * w as f64);

        let mut parts = vec![("g", g.seed_bits()), ("prg1", prg1.seed_bits()), ("w", w)];
        if let Some(h0) = &h0 {
            parts.push(("h0", h0.seed_bits()));
        }
        let layout = SeedLayout::from_widths(&parts);
        let off = |name| layout.field(name).map_or(0, |f| f.offset);
        let (g_off, prg1_off, w_off, h0_off) = (off("g"), off("prg1"), off("w"), off("h0"));
        let derived = Derived {
            t: params.t(),
            ell,
            allocation_independence: allocation,
            inner_independence: inner.as_ref().map(|f| f.t()),
            h0_independence: h0.as_ref().map(|f| f.t()),
            source_bits: w,
            block_bits: d,
            index_bits: z,
        };
        Ok(Self {
            variant,
            params: params.clone(),
            derived,
            layout,
            g,
            prg1,
            ext,
            inner,
            prg2,
            h0,
            g_off,
            prg1_off,
            w_off,
            h0_off,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> &ConstructionParams {
        &self.params
    }

    pub fn derived(&self) -> &Derived {
        &self.derived
    }

    pub fn layout(&self) -> &SeedLayout {
        &self.layout
    }

    pub fn allocation(&self) -> &TWiseFamily {
        &self.g
    }

    pub fn extractor(&self) -> &LeftoverHash {
        &self.ext
    }

    /// `g(x)` in `1..=l`.
    #[inline]
    pub fn bucket_at(&self, seed: &SeedBits, offset: usize, x: u64) -> u64 {
        self.g.eval_at(seed, offset + self.g_off, x)
    }

    /// `z_i = Ext(w, s_i)` for bucket `i`.
    #[inline]
    pub fn index_at(&self, seed: &SeedBits, offset: usize, bucket: u64) -> u64 {
        let s = self.prg1.coordinate_at(seed, offset + self.prg1_off, bucket) - 1;
        let w = seed.read(offset + self.w_off, self.derived.source_bits);
        self.ext.apply(w, s)
    }

    /// `sigma_z(x)`, the inner function selected by index `z`.
    #[inline]
    pub fn inner_eval(&self, z: &SeedBits, x: u64) -> u64 {
        match &self.inner {
            Some(f) => {
                let a = f.eval_at(z, 0, x);
                let b = self.prg2.coordinate_at(z, f.seed_bits(), x);
                direct_sum_value(a, b, self.params.m)
            }
            None => self.prg2.coordinate_at(z, 0, x),
        }
    }

    /// The value before the `h0` overlay: `sigma_{g(x)}(x)`.
    pub fn phi_at(&self, seed: &SeedBits, offset: usize, x: u64) -> u64 {
        let i = self.bucket_at(seed, offset, x);
        let z = SeedBits::from_u64(self.index_at(seed, offset, i), self.derived.index_bits);
        self.inner_eval(&z, x)
    }

    #[inline]
    fn finish(&self, seed: &SeedBits, offset: usize, x: u64, phi: u64) -> u64 {
        match &self.h0 {
            Some(h0) => direct_sum_value(h0.eval_at(seed, offset + self.h0_off, x), phi, self.params.m),
            None => phi,
        }
    }
}

impl SeededFamily for MinwiseFamily {
    fn seed_bits(&self) -> usize {
        self.layout.total_bits()
    }
    fn domain_size(&self) -> u64 {
        self.params.n
    }
    fn range_size(&self) -> u64 {
        self.params.m
    }
    fn eval_at(&self, seed: &SeedBits, offset: usize, x: u64) -> u64 {
        let phi = self.phi_at(seed, offset, x);
        self.finish(seed, offset, x, phi)
    }

    /// Extracts each bucket's index once.
    fn eval_many(&self, seed: &SeedBits, xs: &[u64], out: &mut [u64]) {
        let zb = self.derived.index_bits;
        let mut cache: Vec<Option<SeedBits>> = vec![None; self.derived.ell as usize];
        for (o, &x) in out.iter_mut().zip(xs) {
            let i = self.bucket_at(seed, 0, x);
            let z = cache[i as usize - 1]
                .get_or_insert_with(|| SeedBits::from_u64(self.index_at(seed, 0, i), zb));
            let phi = self.inner_eval(z, x);
            *o = self.finish(seed, 0, x, phi);
        }
    }
}
