//! Negacyclic number-theoretic transforms over word-sized primes, plus the
//! search for chain primes `q ≡ 1 (mod 2N·p)`.
//!
//! Congruence to 1 mod 2N gives the 2N-th root of unity the negacyclic NTT
//! needs; congruence to 1 mod p keeps the BGV modulus-switch correction from
//! disturbing the plaintext.

use crate::field::{is_prime_u64, mul_mod_u64, pow_mod_u64};

use super::HeError;

/// Precomputed transform tables for one prime.
#[derive(Debug, Clone)]
pub(crate) struct NttTable {
    pub q: u64,
    n: usize,
    /// psi^i for the negacyclic twist, i in 0..n
    psi_pows: Vec<u64>,
    /// psi^-i, i in 0..n
    psi_inv_pows: Vec<u64>,
    /// omega^(n/m) for each butterfly stage size m = 2,4,..,n
    stage_roots: Vec<u64>,
    stage_roots_inv: Vec<u64>,
    n_inv: u64,
}

impl NttTable {
    pub fn new(q: u64, n: usize) -> Result<Self, HeError> {
        if !n.is_power_of_two() || n < 2 {
            return Err(HeError::UnsupportedParams(format!(
                "ring dimension {n} is not a power of two"
            )));
        }
        if (q - 1) % (2 * n as u64) != 0 {
            return Err(HeError::UnsupportedParams(format!(
                "prime {q} is not congruent to 1 mod 2N"
            )));
        }
        let g = primitive_root(q);
        let psi = pow_mod_u64(g, (q - 1) / (2 * n as u64), q);
        let psi_inv = pow_mod_u64(psi, q - 2, q);
        debug_assert_eq!(pow_mod_u64(psi, n as u64, q), q - 1, "psi^n must be -1");

        let powers = |base: u64| {
            let mut v = vec![1u64; n];
            for i in 1..n {
                v[i] = mul_mod_u64(v[i - 1], base, q);
            }
            v
        };
        let omega = mul_mod_u64(psi, psi, q);
        let omega_inv = mul_mod_u64(psi_inv, psi_inv, q);
        let stages = n.trailing_zeros() as usize;
        let mut stage_roots = Vec::with_capacity(stages);
        let mut stage_roots_inv = Vec::with_capacity(stages);
        let mut m = 2usize;
        while m <= n {
            stage_roots.push(pow_mod_u64(omega, (n / m) as u64, q));
            stage_roots_inv.push(pow_mod_u64(omega_inv, (n / m) as u64, q));
            m *= 2;
        }
        Ok(NttTable {
            q,
            n,
            psi_pows: powers(psi),
            psi_inv_pows: powers(psi_inv),
            stage_roots,
            stage_roots_inv,
            n_inv: pow_mod_u64(n as u64, q - 2, q),
        })
    }

    fn butterflies(&self, a: &mut [u64], roots: &[u64]) {
        let n = self.n;
        let q = self.q;
        // bit-reversal permutation
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = (i as u64).reverse_bits() >> (64 - bits) as u64;
            let j = j as usize;
            if i < j {
                a.swap(i, j);
            }
        }
        let mut m = 2usize;
        let mut stage = 0usize;
        while m <= n {
            let w_m = roots[stage];
            for base in (0..n).step_by(m) {
                let mut w = 1u64;
                for j in 0..m / 2 {
                    let t = mul_mod_u64(w, a[base + j + m / 2], q);
                    let u = a[base + j];
                    a[base + j] = add_mod(u, t, q);
                    a[base + j + m / 2] = sub_mod(u, t, q);
                    w = mul_mod_u64(w, w_m, q);
                }
            }
            m *= 2;
            stage += 1;
        }
    }

    /// In-place forward negacyclic transform.
    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        for (x, psi) in a.iter_mut().zip(&self.psi_pows) {
            *x = mul_mod_u64(*x, *psi, self.q);
        }
        self.butterflies(a, &self.stage_roots);
    }

    /// In-place inverse negacyclic transform.
    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        self.butterflies(a, &self.stage_roots_inv);
        for (x, psi) in a.iter_mut().zip(&self.psi_inv_pows) {
            *x = mul_mod_u64(mul_mod_u64(*x, self.n_inv, self.q), *psi, self.q);
        }
    }

    /// `a * b mod (X^n + 1, q)`, out of place.
    pub fn negacyclic_mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let mut fa = a.to_vec();
        let mut fb = b.to_vec();
        self.forward(&mut fa);
        self.forward(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x = mul_mod_u64(*x, *y, self.q);
        }
        self.inverse(&mut fa);
        fa
    }
}

#[inline]
pub(crate) fn add_mod(a: u64, b: u64, q: u64) -> u64 {
    let s = a + b;
    if s >= q {
        s - q
    } else {
        s
    }
}

#[inline]
pub(crate) fn sub_mod(a: u64, b: u64, q: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + q - b
    }
}

/// Smallest generator of `Z_q^*` for prime q, found by checking candidate
/// orders against the prime factorization of q - 1.
fn primitive_root(q: u64) -> u64 {
    let factors = prime_factors(q - 1);
    'candidate: for g in 2..q {
        for &f in &factors {
            if pow_mod_u64(g, (q - 1) / f, q) == 1 {
                continue 'candidate;
            }
        }
        return g;
    }
    unreachable!("every prime has a primitive root")
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut fs = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            fs.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        fs.push(n);
    }
    fs
}

/// Finds `count` distinct primes congruent to 1 mod `2n * p`, scanning
/// downward from the top of the `min_bits`-bit window and widening upward
/// when a window runs dry. Returned most-significant first is irrelevant;
/// the chain order is smallest-last so index 0 is the final decryption prime.
pub(crate) fn find_chain_primes(
    count: usize,
    min_bits: u32,
    n: usize,
    p: u64,
) -> Result<Vec<u64>, HeError> {
    let step = 2u128 * n as u128 * p as u128;
    if step >= 1 << 56 {
        return Err(HeError::UnsupportedParams(format!(
            "2N*p = {step} leaves no room for chain primes below 2^62"
        )));
    }
    let mut found = Vec::new();
    let mut bits = min_bits.max((128 - step.leading_zeros()) + 2);
    while found.len() < count {
        if bits > 62 {
            return Err(HeError::UnsupportedParams(
                "could not find enough NTT-friendly chain primes below 2^62".into(),
            ));
        }
        let hi = (1u128 << bits) - 1;
        let lo = 1u128 << (bits - 1);
        let mut k = hi / step;
        while k * step + 1 >= lo && found.len() < count {
            let q = k * step + 1;
            if q <= hi && is_prime_u64(q as u64) && !found.contains(&(q as u64)) {
                found.push(q as u64);
            }
            if k == 0 {
                break;
            }
            k -= 1;
        }
        bits += 1;
    }
    // smallest prime first: it is the level-0 modulus that survives to decryption
    found.sort_unstable();
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn chain_primes_have_required_congruences() {
        let primes = find_chain_primes(4, 35, 1024, 65537).unwrap();
        assert_eq!(primes.len(), 4);
        for &q in &primes {
            assert!(is_prime_u64(q));
            assert_eq!((q - 1) % (2 * 1024), 0);
            assert_eq!((q - 1) % 65537, 0);
            assert!(q >= 1 << 34);
        }
        let mut sorted = primes.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
    }

    #[test]
    fn forward_inverse_round_trip() {
        let q = find_chain_primes(1, 35, 256, 65537).unwrap()[0];
        let table = NttTable::new(q, 256).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a: Vec<u64> = (0..256).map(|_| rng.random_range(0..q)).collect();
        let mut b = a.clone();
        table.forward(&mut b);
        table.inverse(&mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn negacyclic_mul_matches_schoolbook() {
        let n = 64usize;
        let q = find_chain_primes(1, 35, n, 65537).unwrap()[0];
        let table = NttTable::new(q, n).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a: Vec<u64> = (0..n).map(|_| rng.random_range(0..q)).collect();
            let b: Vec<u64> = (0..n).map(|_| rng.random_range(0..q)).collect();
            // schoolbook negacyclic convolution oracle
            let mut want = vec![0u64; n];
            for i in 0..n {
                for j in 0..n {
                    let prod = mul_mod_u64(a[i], b[j], q);
                    let idx = (i + j) % n;
                    if i + j < n {
                        want[idx] = add_mod(want[idx], prod, q);
                    } else {
                        want[idx] = sub_mod(want[idx], prod, q);
                    }
                }
            }
            assert_eq!(table.negacyclic_mul(&a, &b), want);
        }
    }
}
