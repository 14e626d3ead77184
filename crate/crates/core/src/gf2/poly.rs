//! Polynomials over GF(2) packed into `u128` (bit `i` is the coefficient of `x^i`).

/// Degree of `p`, or `None` for the zero polynomial.
pub fn degree(p: u128) -> Option<u32> {
    if p == 0 {
        None
    } else {
        Some(127 - p.leading_zeros())
    }
}

/// Carry-less product of two polynomials of degree < 64.
pub fn clmul(a: u64, b: u64) -> u128 {
    let mut acc = 0u128;
    let mut b = b;
    let a = a as u128;
    while b != 0 {
        let i = b.trailing_zeros();
        acc ^= a << i;
        b &= b - 1;
    }
    acc
}

/// Remainder of `a` divided by the nonzero polynomial `m`.
pub fn rem(mut a: u128, m: u128) -> u128 {
    let dm = degree(m).expect("division by the zero polynomial");
    while let Some(da) = degree(a) {
        if da < dm {
            break;
        }
        a ^= m << (da - dm);
    }
    a
}

/// `a * b mod m` for polynomials already reduced below `deg m <= 64`.
pub fn mulmod(a: u128, b: u128, m: u128) -> u128 {
    debug_assert!(a >> 64 == 0 && b >> 64 == 0);
    rem(clmul(a as u64, b as u64), m)
}

pub fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = rem(a, b);
        a = b;
        b = r;
    }
    a
}

/// Irreducibility over GF(2) by Rabin's test: `x^(2^n) = x mod f` and
/// `gcd(x^(2^(n/p)) - x, f) = 1` for every prime `p | n`.
pub fn is_irreducible(f: u128) -> bool {
    let n = match degree(f) {
        Some(d) if d >= 1 => d,
        _ => return false,
    };
    if n > 64 {
        return false;
    }
    if n == 1 {
        return true;
    }
    if f & 1 == 0 {
        return false;
    }
    let x = 0b10u128;
    // frob[i] = x^(2^i) mod f
    let mut frob = Vec::with_capacity(n as usize + 1);
    let mut cur = rem(x, f);
    frob.push(cur);
    for _ in 0..n {
        cur = mulmod(cur, cur, f);
        frob.push(cur);
    }
    if frob[n as usize] != rem(x, f) {
        return false;
    }
    for p in prime_factors(n) {
        let h = frob[(n / p) as usize] ^ x;
        if gcd(f, h) != 1 {
            return false;
        }
    }
    true
}

/// Irreducibility by trial division against every polynomial of degree
/// `1..=deg/2`. Independent of [`is_irreducible`]; only practical for small degrees.
pub fn is_irreducible_trial(f: u128) -> bool {
    let n = match degree(f) {
        Some(d) if d >= 1 => d,
        _ => return false,
    };
    for d in 1..=n / 2 {
        for low in 0u128..(1u128 << d) {
            let g = (1u128 << d) | low;
            if rem(f, g) == 0 {
                return false;
            }
        }
    }
    true
}

fn prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Ascending scan for the smallest irreducible polynomial of the given degree
/// whose constant coefficient is set (for degree 1 this picks `x + 1` over `x`).
pub fn search_irreducible(degree: u32) -> u128 {
    let top = 1u128 << degree;
    (0u128..top)
        .filter(|low| low & 1 == 1)
        .map(|low| top | low)
        .find(|&f| is_irreducible(f))
        .expect("irreducible polynomials exist in every degree")
}
