//! Binary extension fields GF(2^n) and dense linear algebra over GF(2).

mod matrix;
pub mod poly;

pub use matrix::{BitMatrix, Echelon};

use crate::error::{Error, Result};

/// Smallest irreducible polynomial of each degree with its constant bit set,
/// indexed by degree. Entry 0 is unused.
#[rustfmt::skip]
const SMALLEST_IRREDUCIBLE: [u128; 65] = [
    0x0, 0x3, 0x7, 0xb, 0x13, 0x25, 0x43, 0x83,
    0x11b, 0x203, 0x409, 0x805, 0x1009, 0x201b, 0x4021, 0x8003,
    0x1002b, 0x20009, 0x40009, 0x80027, 0x100009, 0x200005, 0x400003, 0x800021,
    0x100001b, 0x2000009, 0x400001b, 0x8000027, 0x10000003, 0x20000005, 0x40000003, 0x80000009,
    0x10000008d, 0x20000004b, 0x40000001b, 0x800000005,
    0x1000000035, 0x200000003f, 0x4000000063, 0x8000000011,
    0x10000000039, 0x20000000009, 0x40000000027, 0x80000000059,
    0x100000000021, 0x20000000001b, 0x400000000003, 0x800000000021,
    0x100000000002d, 0x2000000000071, 0x400000000001d, 0x800000000004b,
    0x10000000000009, 0x20000000000047, 0x4000000000007d, 0x80000000000047,
    0x100000000000095, 0x200000000000011, 0x400000000000063, 0x80000000000007b,
    0x1000000000000003, 0x2000000000000027, 0x4000000000000069, 0x8000000000000003,
    0x1000000000000001b,
];

/// The field GF(2^degree) = GF(2)[x] / (modulus). Elements are the low
/// `degree` bits of a `u64`; bit `i` is the coefficient of `x^i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldContext {
    degree: u32,
    modulus: u128,
}

impl FieldContext {
    /// Builds a field from an explicit modulus, checking that it is an
    /// irreducible polynomial of exactly `degree` with constant bit set.
    pub fn new(degree: u32, modulus: u128) -> Result<Self> {
        if !(1..=64).contains(&degree) {
            return Err(Error::InvalidDegree(degree));
        }
        let ok = poly::degree(modulus) == Some(degree)
            && modulus & 1 == 1
            && poly::is_irreducible(modulus);
        if !ok {
            return Err(Error::NotIrreducible { degree, modulus });
        }
        Ok(Self { degree, modulus })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    /// Mask selecting the `degree` low bits.
    pub fn mask(&self) -> u64 {
        if self.degree == 64 {
            u64::MAX
        } else {
            (1u64 << self.degree) - 1
        }
    }

    pub fn order(&self) -> u128 {
        1u128 << self.degree
    }

    pub fn contains(&self, a: u64) -> bool {
        a & !self.mask() == 0
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        a ^ b
    }

    /// Carry-less product reduced modulo the field polynomial.
    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        debug_assert!(self.contains(a) && self.contains(b));
        let mask = self.mask();
        let low = (self.modulus as u64) & mask;
        let top = 1u64 << (self.degree - 1);
        let (mut a, mut b, mut acc) = (a, b, 0u64);
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a;
            }
            b >>= 1;
            let carry = a & top != 0;
            a = (a << 1) & mask;
            if carry {
                a ^= low;
            }
        }
        acc
    }

    pub fn pow(&self, a: u64, mut e: u128) -> u64 {
        let mut base = a;
        let mut acc = 1u64;
        while e != 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via `a^(2^n - 2)`; `None` for zero.
    pub fn inv(&self, a: u64) -> Option<u64> {
        (a != 0).then(|| self.pow(a, self.order() - 2))
    }
}

/// Field of the given degree built on the smallest irreducible modulus.
pub fn find_irreducible(degree: u32) -> Result<FieldContext> {
    if !(1..=64).contains(&degree) {
        return Err(Error::InvalidDegree(degree));
    }
    Ok(FieldContext {
        degree,
        modulus: SMALLEST_IRREDUCIBLE[degree as usize],
    })
}

pub fn field_mul(ctx: &FieldContext, a: u64, b: u64) -> u64 {
    ctx.mul(a, b)
}

/// Smallest `n` with `2^n >= v` (0 for `v <= 1`).
pub fn ceil_log2(v: u64) -> u32 {
    if v <= 1 {
        0
    } else {
        64 - (v - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn schoolbook(ctx: &FieldContext, a: u64, b: u64) -> u64 {
        // independent route: full carry-less product, then long division
        let mut prod = 0u128;
        for i in 0..64 {
            if (b >> i) & 1 == 1 {
                prod ^= (a as u128) << i;
            }
        }
        let m = ctx.modulus();
        for i in (ctx.degree()..128).rev() {
            if (prod >> i) & 1 == 1 {
                prod ^= m << (i - ctx.degree());
            }
        }
        prod as u64
    }

    #[test]
    fn table_matches_search() {
        for d in 1..=64 {
            assert_eq!(SMALLEST_IRREDUCIBLE[d as usize], poly::search_irreducible(d), "degree {d}");
        }
    }

    #[test]
    fn table_entries_are_irreducible_by_trial_division() {
        for d in 1..=16u32 {
            let f = SMALLEST_IRREDUCIBLE[d as usize];
            assert!(poly::is_irreducible_trial(f));
            // every odd candidate below it with the same degree is reducible
            for low in (1..(f ^ (1u128 << d))).step_by(2) {
                assert!(!poly::is_irreducible_trial((1u128 << d) | low));
            }
        }
    }

    #[test]
    fn known_moduli() {
        assert_eq!(find_irreducible(2).unwrap().modulus(), 0b111);
        assert_eq!(find_irreducible(3).unwrap().modulus(), 0b1011);
        assert_eq!(find_irreducible(8).unwrap().modulus(), 0x11b);
        assert_eq!(find_irreducible(0), Err(Error::InvalidDegree(0)));
        assert_eq!(find_irreducible(65), Err(Error::InvalidDegree(65)));
    }

    #[test]
    fn new_rejects_reducible() {
        assert!(FieldContext::new(2, 0b101).is_err());
        assert!(FieldContext::new(3, 0b111).is_err()); // wrong degree
        assert!(FieldContext::new(3, 0b1101).is_ok());
    }

    #[test]
    fn small_products() {
        let f = find_irreducible(3).unwrap();
        assert_eq!(f.mul(0b100, 0b010), 0b011);
        for a in 0..8 {
            assert_eq!(f.mul(a, 1), a);
        }
    }

    #[test]
    fn gf256_matches_schoolbook() {
        let f = find_irreducible(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let (a, b) = (rng.gen::<u8>() as u64, rng.gen::<u8>() as u64);
            assert_eq!(f.mul(a, b), schoolbook(&f, a, b));
        }
        // AES test vector
        assert_eq!(f.mul(0x57, 0x83), 0xc1);
    }

    #[test]
    fn wide_fields_match_schoolbook() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [13u32, 31, 32, 33, 63, 64] {
            let f = find_irreducible(d).unwrap();
            for _ in 0..500 {
                let a = rng.gen::<u64>() & f.mask();
                let b = rng.gen::<u64>() & f.mask();
                assert_eq!(f.mul(a, b), schoolbook(&f, a, b));
            }
        }
    }

    #[test]
    fn inverses_small_fields() {
        for d in 1..=8 {
            let f = find_irreducible(d).unwrap();
            assert_eq!(f.inv(0), None);
            for a in 1..(1u64 << d) {
                let ia = f.inv(a).unwrap();
                assert_eq!(f.mul(a, ia), 1);
            }
        }
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(0), 0);
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(8), 3);
        assert_eq!(ceil_log2(u64::MAX), 64);
    }
}
