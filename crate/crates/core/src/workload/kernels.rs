//! CPU-burning building blocks shared by several handlers.

use std::hint::black_box;

use sha2::{Digest, Sha256};

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Trigonometry, exponentials and trial-division primality whose result nobody needs.
pub(crate) fn wasted_math(steps: u64) -> f64 {
    let mut acc = 0.0f64;
    for i in 0..steps {
        let x = (i % 10_000) as f64 * 1e-3;
        acc += x.sin() * x.cos() + (x * 0.1).exp().ln() + (x * 0.5).tan().atan();
        if is_prime(i % 512 + 2) {
            acc -= 1.0;
        }
        acc = black_box(acc);
    }
    acc
}

/// `rounds` chained SHA-256 applications starting from `seed`.
pub(crate) fn hash_rounds(seed: &[u8], rounds: u64) -> [u8; 32] {
    let mut out: [u8; 32] = Sha256::digest(seed).into();
    for _ in 1..rounds {
        out = Sha256::digest(out).into();
    }
    out
}

/// Integer mixing work; `units` is the work size in abstract steps.
pub(crate) fn spin_units(units: u64, salt: u64) -> u64 {
    let mut x = salt ^ 0x9E37_79B9_7F4A_7C15;
    for i in 0..units {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        x = x.wrapping_add(i);
        x = black_box(x);
    }
    x
}

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
