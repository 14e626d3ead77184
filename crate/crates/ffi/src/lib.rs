//! C interface to minwise-lab.
//!
//! Families are opaque handles built from the same JSON accepted by
//! `minwise-lab construct`. Every fallible call returns an [`MwlStatus`];
//! the message of the last failure on the calling thread is available from
//! [`mwl_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use minwise_lab::cli::{parse_config, FamilyConfig};
use minwise_lab::extractor::leftover_extract;
use minwise_lab::gf2::find_irreducible;
use minwise_lab::kwise::SeededFamily;
use minwise_lab::verify::uniform_minwise_probability;
use minwise_lab::{Error, SeedBits};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Param = 4,
    BadSeed = 5,
    Domain = 6,
    Internal = 7,
}

/// A seeded hash family `[N] -> [M]`.
pub struct MwlFamily {
    inner: Box<dyn SeededFamily>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: MwlStatus, msg: impl Into<String>) -> MwlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn status_of(e: &Error) -> MwlStatus {
    match e {
        Error::Config(_) => MwlStatus::Config,
        Error::BadSeedLength { .. } | Error::SeedFormat(_) => MwlStatus::BadSeed,
        Error::DomainOverflow { .. } => MwlStatus::Domain,
        _ => MwlStatus::Param,
    }
}

fn guard(f: impl FnOnce() -> Result<(), MwlStatus>) -> MwlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MwlStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(MwlStatus::Internal, "internal panic"),
    }
}

fn lift<T>(r: minwise_lab::Result<T>) -> Result<T, MwlStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, MwlStatus> {
    if s.is_null() {
        return Err(fail(MwlStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(MwlStatus::InvalidUtf8, "string is not UTF-8"))
}

fn family<'a>(f: *const MwlFamily) -> Result<&'a MwlFamily, MwlStatus> {
    // SAFETY: callers pass a handle from `mwl_family_from_json` or null.
    unsafe { f.as_ref() }.ok_or_else(|| fail(MwlStatus::NullPointer, "null family handle"))
}

fn write<T>(out: *mut T, v: T) -> Result<(), MwlStatus> {
    if out.is_null() {
        return Err(fail(MwlStatus::NullPointer, "null output pointer"));
    }
    // SAFETY: non-null and, per the contract, valid for writes.
    unsafe { out.write(v) };
    Ok(())
}

/// Builds a family from a JSON config. On success `*out` owns a handle that
/// must be released with [`mwl_family_free`].
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mwl_family_from_json(json: *const c_char, out: *mut *mut MwlFamily) -> MwlStatus {
    guard(|| {
        let cfg: FamilyConfig = lift(parse_config(text(json)?))?;
        let inner = lift(cfg.build())?;
        write(out, Box::into_raw(Box::new(MwlFamily { inner })))
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `f` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mwl_family_free(f: *mut MwlFamily) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Seed length in bits, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mwl_family_seed_bits(f: *const MwlFamily) -> usize {
    f.as_ref().map_or(0, |f| f.inner.seed_bits())
}

/// Domain size `N`, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mwl_family_domain(f: *const MwlFamily) -> u64 {
    f.as_ref().map_or(0, |f| f.inner.domain_size())
}

/// Range size `M`, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mwl_family_range(f: *const MwlFamily) -> u64 {
    f.as_ref().map_or(0, |f| f.inner.range_size())
}

/// Evaluates `h_seed(x)`. The seed is little-endian: bit `i` is bit `i % 8`
/// of byte `i / 8`. Exactly `ceil(seed_bits / 8)` bytes are expected and
/// padding bits must be zero.
///
/// # Safety
/// `seed` must point to `seed_len` readable bytes (or be null when
/// `seed_len` is 0) and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mwl_family_eval(
    f: *const MwlFamily,
    seed: *const u8,
    seed_len: usize,
    x: u64,
    out: *mut u64,
) -> MwlStatus {
    guard(|| {
        let f = family(f)?;
        let bits = f.inner.seed_bits();
        if seed_len != bits.div_ceil(8) {
            return Err(fail(
                MwlStatus::BadSeed,
                format!("seed of {bits} bits needs {} bytes, got {seed_len}", bits.div_ceil(8)),
            ));
        }
        let bytes = if seed_len == 0 {
            &[][..]
        } else if seed.is_null() {
            return Err(fail(MwlStatus::NullPointer, "null seed"));
        } else {
            std::slice::from_raw_parts(seed, seed_len)
        };
        let mut words = vec![0u64; bits.div_ceil(64)];
        for (i, &b) in bytes.iter().enumerate() {
            words[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        if bits % 64 != 0 && words.last().is_some_and(|w| w >> (bits % 64) != 0) {
            return Err(fail(MwlStatus::BadSeed, format!("seed has bits set beyond bit {bits}")));
        }
        let seed = SeedBits::from_words(words, bits);
        write(out, lift(f.inner.eval(&seed, x))?)
    })
}

/// As [`mwl_family_eval`] with the seed as a hex integer (`0x` optional).
///
/// # Safety
/// `hex` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mwl_family_eval_hex(
    f: *const MwlFamily,
    hex: *const c_char,
    x: u64,
    out: *mut u64,
) -> MwlStatus {
    guard(|| {
        let f = family(f)?;
        let seed = lift(SeedBits::from_hex(text(hex)?, f.inner.seed_bits()))?;
        write(out, lift(f.inner.eval(&seed, x))?)
    })
}

/// `Pr[max h(Y) < min h(X \ Y)]` for a truly random `h: X -> [M]`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mwl_uniform_minwise_probability(
    size_x: usize,
    m: u64,
    k: usize,
    out: *mut f64,
) -> MwlStatus {
    guard(|| write(out, lift(uniform_minwise_probability(size_x, m, k))?))
}

/// `low_m(x * (s + 1))` over GF(2^n) with the library's default modulus.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mwl_leftover_extract(n: u32, x: u64, s: u64, m: u32, out: *mut u64) -> MwlStatus {
    guard(|| {
        let ctx = lift(find_irreducible(n))?;
        write(out, lift(leftover_extract(&ctx, x, s, m as usize))?)
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the buffer size the full message needs.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn mwl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len() + 1
    })
}
