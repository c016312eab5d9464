//! A leveled BGV-style scheme over power-of-two cyclotomic rings with an RNS
//! ciphertext-modulus chain.
//!
//! Conventions: a ciphertext of degree d satisfies
//! `sum_i c_i * s^i = m + p*e  (mod q_level)` with `m` a constant polynomial.
//! The secret is ternary, noise is centered binomial, and multiplication
//! relinearizes with RNS-digit key-switching keys and then drops one chain
//! prime, so the chain supports exactly `len(primes) - 1` multiplications.
//!
//! The parameters used at desk scale make no concrete security claim; they
//! are sized for correctness of the depth-3 protocol circuit.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::{Rng, RngCore};

use crate::field::{mul_mod_u64, pow_mod_u64};

use super::ntt::{add_mod, find_chain_primes, sub_mod, NttTable};
use super::HeError;

/// Everything derivable from the public parameters: the prime chain, NTT
/// tables, CRT reconstruction constants and modulus-switch inverses.
#[derive(Debug)]
pub(crate) struct RlweContext {
    pub n: usize,
    pub p: u64,
    pub primes: Vec<u64>,
    pub tables: Vec<NttTable>,
    /// p^-1 mod q_j for every chain prime
    p_inv: Vec<u64>,
    /// q_inv[l][j] = q_l^-1 mod q_j for j < l
    q_inv: Vec<Vec<u64>>,
    /// per level: product of active primes
    q_big: Vec<BigUint>,
    /// per level: CRT basis elements (Q/q_j) * ((Q/q_j)^-1 mod q_j)
    crt_basis: Vec<Vec<BigUint>>,
    /// per level: q_level mod p, for centered reduction into the plaintext space
    q_mod_p: Vec<u64>,
    /// per level: log2 of the active modulus
    pub log2_q: Vec<f64>,
    pub cbd_k: u32,
}

impl RlweContext {
    pub fn new(n: usize, p: u64, chain_len: usize, prime_bits: u32, cbd_k: u32) -> Result<Self, HeError> {
        let primes = find_chain_primes(chain_len, prime_bits, n, p)?;
        let tables = primes
            .iter()
            .map(|&q| NttTable::new(q, n))
            .collect::<Result<Vec<_>, _>>()?;
        let p_inv = primes
            .iter()
            .map(|&q| pow_mod_u64(p % q, q - 2, q))
            .collect();
        let q_inv = (0..primes.len())
            .map(|l| {
                (0..l)
                    .map(|j| pow_mod_u64(primes[l] % primes[j], primes[j] - 2, primes[j]))
                    .collect()
            })
            .collect();
        let mut q_big = Vec::with_capacity(primes.len());
        let mut acc = BigUint::from(1u32);
        for &q in &primes {
            acc *= q;
            q_big.push(acc.clone());
        }
        let crt_basis = (0..primes.len())
            .map(|l| {
                let big = &q_big[l];
                (0..=l)
                    .map(|j| {
                        let hat = big / primes[j];
                        let hat_mod = (&hat % primes[j]).to_u64_digits();
                        let hat_mod = hat_mod.first().copied().unwrap_or(0);
                        let inv = pow_mod_u64(hat_mod, primes[j] - 2, primes[j]);
                        (&hat * inv) % big
                    })
                    .collect()
            })
            .collect();
        let q_mod_p = q_big
            .iter()
            .map(|big| (big % p).to_u64_digits().first().copied().unwrap_or(0))
            .collect();
        let log2_q = (0..primes.len())
            .map(|l| primes[..=l].iter().map(|&q| (q as f64).log2()).sum())
            .collect();
        Ok(RlweContext {
            n,
            p,
            primes,
            tables,
            p_inv,
            q_inv,
            q_big,
            crt_basis,
            q_mod_p,
            log2_q,
            cbd_k,
        })
    }

    pub fn top_level(&self) -> usize {
        self.primes.len() - 1
    }
}

/// An element of `R_q` in RNS form: `limbs[j][i]` is coefficient `i`
/// modulo `primes[j]`. The active level is `limbs.len() - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Poly {
    pub limbs: Vec<Vec<u64>>,
}

impl Poly {
    pub fn level(&self) -> usize {
        self.limbs.len() - 1
    }

    pub fn zero(ctx: &RlweContext, level: usize) -> Poly {
        Poly {
            limbs: vec![vec![0u64; ctx.n]; level + 1],
        }
    }

    pub fn constant(ctx: &RlweContext, value: u64, level: usize) -> Poly {
        let mut poly = Poly::zero(ctx, level);
        for (j, limb) in poly.limbs.iter_mut().enumerate() {
            limb[0] = value % ctx.primes[j];
        }
        poly
    }

    /// Lifts a small signed polynomial into RNS at the given level.
    pub fn from_small(ctx: &RlweContext, small: &[i64], level: usize) -> Poly {
        let limbs = (0..=level)
            .map(|j| {
                let q = ctx.primes[j] as i64;
                small
                    .iter()
                    .map(|&x| {
                        let r = x % q;
                        (if r < 0 { r + q } else { r }) as u64
                    })
                    .collect()
            })
            .collect();
        Poly { limbs }
    }

    pub fn uniform<R: RngCore + ?Sized>(ctx: &RlweContext, level: usize, rng: &mut R) -> Poly {
        let limbs = (0..=level)
            .map(|j| {
                let q = ctx.primes[j];
                (0..ctx.n).map(|_| uniform_u64_below(rng, q)).collect()
            })
            .collect();
        Poly { limbs }
    }

    pub fn add(&self, other: &Poly, ctx: &RlweContext) -> Poly {
        debug_assert_eq!(self.level(), other.level());
        let limbs = self
            .limbs
            .iter()
            .zip(&other.limbs)
            .enumerate()
            .map(|(j, (a, b))| {
                let q = ctx.primes[j];
                a.iter().zip(b).map(|(&x, &y)| add_mod(x, y, q)).collect()
            })
            .collect();
        Poly { limbs }
    }

    pub fn sub(&self, other: &Poly, ctx: &RlweContext) -> Poly {
        debug_assert_eq!(self.level(), other.level());
        let limbs = self
            .limbs
            .iter()
            .zip(&other.limbs)
            .enumerate()
            .map(|(j, (a, b))| {
                let q = ctx.primes[j];
                a.iter().zip(b).map(|(&x, &y)| sub_mod(x, y, q)).collect()
            })
            .collect();
        Poly { limbs }
    }

    pub fn neg(&self, ctx: &RlweContext) -> Poly {
        let limbs = self
            .limbs
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let q = ctx.primes[j];
                a.iter().map(|&x| if x == 0 { 0 } else { q - x }).collect()
            })
            .collect();
        Poly { limbs }
    }

    pub fn mul(&self, other: &Poly, ctx: &RlweContext) -> Poly {
        debug_assert_eq!(self.level(), other.level());
        let limbs = self
            .limbs
            .iter()
            .zip(&other.limbs)
            .enumerate()
            .map(|(j, (a, b))| ctx.tables[j].negacyclic_mul(a, b))
            .collect();
        Poly { limbs }
    }

    pub fn scale(&self, k: u64, ctx: &RlweContext) -> Poly {
        let limbs = self
            .limbs
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let q = ctx.primes[j];
                let kj = k % q;
                a.iter().map(|&x| mul_mod_u64(x, kj, q)).collect()
            })
            .collect();
        Poly { limbs }
    }

    /// Drops limbs above `level` (moving to a smaller modulus without the
    /// BGV correction is only valid for key material defined modulo every
    /// chain prime, not for ciphertexts).
    pub fn truncated(&self, level: usize) -> Poly {
        Poly {
            limbs: self.limbs[..=level].to_vec(),
        }
    }

    /// BGV modulus switch: returns `(self + delta) / q_last` one level down,
    /// where `delta ≡ -self (mod q_last)`, `delta ≡ 0 (mod p)` and delta is
    /// coefficient-wise minimal. Preserves the plaintext because every chain
    /// prime is congruent to 1 mod p.
    pub fn mod_switch(&self, ctx: &RlweContext) -> Poly {
        let level = self.level();
        debug_assert!(level >= 1);
        let q_last = ctx.primes[level];
        let p_inv_last = ctx.p_inv[level];
        let half = q_last / 2;
        let n = ctx.n;
        let mut out = Poly::zero(ctx, level - 1);
        for i in 0..n {
            let x = self.limbs[level][i];
            // w = [-x * p^-1] mod q_last, centered
            let w = mul_mod_u64(q_last - x % q_last, p_inv_last, q_last);
            let w_centered: i128 = if w > half {
                w as i128 - q_last as i128
            } else {
                w as i128
            };
            let delta = ctx.p as i128 * w_centered;
            for j in 0..level {
                let qj = ctx.primes[j] as i128;
                let mut d = delta % qj;
                if d < 0 {
                    d += qj;
                }
                let sum = add_mod(self.limbs[j][i], d as u64, ctx.primes[j]);
                out.limbs[j][i] = mul_mod_u64(sum, ctx.q_inv[level][j], ctx.primes[j]);
            }
        }
        out
    }
}

fn uniform_u64_below<R: RngCore + ?Sized>(rng: &mut R, bound: u64) -> u64 {
    let zone = u64::MAX - u64::MAX % bound;
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % bound;
        }
    }
}

pub(crate) fn sample_ternary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<i64> {
    (0..n).map(|_| rng.random_range(-1i64..=1)).collect()
}

/// Centered binomial with parameter k: sum of k (bit - bit) terms.
pub(crate) fn sample_cbd<R: Rng + ?Sized>(n: usize, k: u32, rng: &mut R) -> Vec<i64> {
    (0..n)
        .map(|_| {
            let mut acc = 0i64;
            for _ in 0..k {
                acc += rng.random_range(0..=1i64) - rng.random_range(0..=1i64);
            }
            acc
        })
        .collect()
}

#[derive(Debug, Clone)]
pub(crate) struct RlwePublicKey {
    pub b: Poly,
    pub a: Poly,
}

#[derive(Debug, Clone)]
pub(crate) struct RlweSecretKey {
    pub s_small: Vec<i64>,
}

/// RNS-digit key-switching keys for s^2: entry j satisfies
/// `b_j + a_j * s = p * e_j + u_j * s^2` with u_j the CRT unit of prime j.
#[derive(Debug, Clone)]
pub(crate) struct RlweEvalKey {
    pub pairs: Vec<(Poly, Poly)>,
}

pub(crate) fn keygen<R: Rng + ?Sized>(
    ctx: &RlweContext,
    rng: &mut R,
) -> (RlwePublicKey, RlweSecretKey, RlweEvalKey) {
    let top = ctx.top_level();
    let s_small = sample_ternary(ctx.n, rng);
    let s = Poly::from_small(ctx, &s_small, top);

    let a = Poly::uniform(ctx, top, rng);
    let e = Poly::from_small(ctx, &sample_cbd(ctx.n, ctx.cbd_k, rng), top);
    let b = a.mul(&s, ctx).neg(ctx).add(&e.scale(ctx.p, ctx), ctx);

    let s2 = s.mul(&s, ctx);
    let pairs = (0..=top)
        .map(|j| {
            let a_j = Poly::uniform(ctx, top, rng);
            let e_j = Poly::from_small(ctx, &sample_cbd(ctx.n, ctx.cbd_k, rng), top);
            let mut b_j = a_j.mul(&s, ctx).neg(ctx).add(&e_j.scale(ctx.p, ctx), ctx);
            // add u_j * s^2: the CRT unit is 1 at limb j and 0 elsewhere
            for i in 0..ctx.n {
                b_j.limbs[j][i] = add_mod(b_j.limbs[j][i], s2.limbs[j][i], ctx.primes[j]);
            }
            (b_j, a_j)
        })
        .collect();

    (
        RlwePublicKey { b, a },
        RlweSecretKey { s_small },
        RlweEvalKey { pairs },
    )
}

/// Fresh encryption at the top level; degree 1.
pub(crate) fn encrypt<R: Rng + ?Sized>(
    ctx: &RlweContext,
    pk: &RlwePublicKey,
    m: u64,
    rng: &mut R,
) -> Vec<Poly> {
    let top = ctx.top_level();
    let u = Poly::from_small(ctx, &sample_ternary(ctx.n, rng), top);
    let e0 = Poly::from_small(ctx, &sample_cbd(ctx.n, ctx.cbd_k, rng), top);
    let e1 = Poly::from_small(ctx, &sample_cbd(ctx.n, ctx.cbd_k, rng), top);
    let c0 = pk
        .b
        .mul(&u, ctx)
        .add(&e0.scale(ctx.p, ctx), ctx)
        .add(&Poly::constant(ctx, m, top), ctx);
    let c1 = pk.a.mul(&u, ctx).add(&e1.scale(ctx.p, ctx), ctx);
    vec![c0, c1]
}

/// Decrypts a ciphertext of any degree at its current level. Returns the
/// plaintext, or an error if the non-constant coefficients carry residue mod
/// p — the symptom of noise having overflowed the modulus.
pub(crate) fn decrypt(
    ctx: &RlweContext,
    sk: &RlweSecretKey,
    comps: &[Poly],
) -> Result<u64, HeError> {
    let level = comps[0].level();
    let s = Poly::from_small(ctx, &sk.s_small, level);
    // Horner: v = (...(c_d * s + c_{d-1}) * s + ...) + c_0
    let mut v = comps.last().expect("nonempty ciphertext").clone();
    for comp in comps.iter().rev().skip(1) {
        v = v.mul(&s, ctx).add(comp, ctx);
    }

    let q_big = &ctx.q_big[level];
    let half = q_big / 2u32;
    let q_mod_p = ctx.q_mod_p[level];
    let mut message = 0u64;
    for i in 0..ctx.n {
        let mut acc = BigUint::zero();
        for j in 0..=level {
            acc += &ctx.crt_basis[level][j] * v.limbs[j][i];
        }
        acc %= q_big;
        // centered reduction into the plaintext space
        let mut r = (&acc % ctx.p).to_u64_digits().first().copied().unwrap_or(0);
        if acc > half {
            r = (r + ctx.p - q_mod_p % ctx.p) % ctx.p;
        }
        if i == 0 {
            message = r;
        } else if r != 0 {
            return Err(HeError::DecryptionFailure);
        }
    }
    Ok(message)
}

/// Tensor product of two degree-1 ciphertexts at a common level.
pub(crate) fn tensor(a: &[Poly], b: &[Poly], ctx: &RlweContext) -> Vec<Poly> {
    debug_assert_eq!(a.len(), 2);
    debug_assert_eq!(b.len(), 2);
    let e0 = a[0].mul(&b[0], ctx);
    let e1 = a[0].mul(&b[1], ctx).add(&a[1].mul(&b[0], ctx), ctx);
    let e2 = a[1].mul(&b[1], ctx);
    vec![e0, e1, e2]
}

/// Key-switches the degree-2 component back onto (1, s) using RNS digits.
pub(crate) fn relinearize(comps: &[Poly], evk: &RlweEvalKey, ctx: &RlweContext) -> Vec<Poly> {
    debug_assert_eq!(comps.len(), 3);
    let level = comps[0].level();
    let mut c0 = comps[0].clone();
    let mut c1 = comps[1].clone();
    let c2 = &comps[2];
    for j in 0..=level {
        // centered digit: limb j of c2 as a small signed polynomial
        let q_j = ctx.primes[j];
        let half = q_j / 2;
        let digit: Vec<i64> = c2.limbs[j]
            .iter()
            .map(|&x| {
                if x > half {
                    x as i64 - q_j as i64
                } else {
                    x as i64
                }
            })
            .collect();
        let digit = Poly::from_small(ctx, &digit, level);
        let (ref b_j, ref a_j) = evk.pairs[j];
        c0 = c0.add(&digit.mul(&b_j.truncated(level), ctx), ctx);
        c1 = c1.add(&digit.mul(&a_j.truncated(level), ctx), ctx);
    }
    vec![c0, c1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn ctx() -> RlweContext {
        RlweContext::new(256, 65537, 4, 35, 2).unwrap()
    }

    #[test]
    fn round_trip_fresh() {
        let ctx = ctx();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (pk, sk, _evk) = keygen(&ctx, &mut rng);
        for &m in &[0u64, 1, 5, 65535, 65536] {
            let ct = encrypt(&ctx, &pk, m, &mut rng);
            assert_eq!(decrypt(&ctx, &sk, &ct).unwrap(), m);
        }
        for _ in 0..50 {
            let m = rng.random_range(0..65537);
            let ct = encrypt(&ctx, &pk, m, &mut rng);
            assert_eq!(decrypt(&ctx, &sk, &ct).unwrap(), m);
        }
    }

    #[test]
    fn homomorphic_add_sub() {
        let ctx = ctx();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (pk, sk, _evk) = keygen(&ctx, &mut rng);
        for _ in 0..20 {
            let ma = rng.random_range(0..65537u64);
            let mb = rng.random_range(0..65537u64);
            let ca = encrypt(&ctx, &pk, ma, &mut rng);
            let cb = encrypt(&ctx, &pk, mb, &mut rng);
            let sum: Vec<Poly> = ca.iter().zip(&cb).map(|(x, y)| x.add(y, &ctx)).collect();
            let diff: Vec<Poly> = ca.iter().zip(&cb).map(|(x, y)| x.sub(y, &ctx)).collect();
            assert_eq!(decrypt(&ctx, &sk, &sum).unwrap(), (ma + mb) % 65537);
            assert_eq!(
                decrypt(&ctx, &sk, &diff).unwrap(),
                (ma + 65537 - mb) % 65537
            );
        }
    }

    #[test]
    fn mod_switch_preserves_plaintext() {
        let ctx = ctx();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (pk, sk, _evk) = keygen(&ctx, &mut rng);
        let m = 12345u64;
        let mut ct = encrypt(&ctx, &pk, m, &mut rng);
        for _ in 0..3 {
            ct = ct.iter().map(|c| c.mod_switch(&ctx)).collect();
            assert_eq!(decrypt(&ctx, &sk, &ct).unwrap(), m);
        }
    }

    #[test]
    fn depth_three_multiplication_chain() {
        let ctx = ctx();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (pk, sk, evk) = keygen(&ctx, &mut rng);
        for _ in 0..10 {
            let ms: Vec<u64> = (0..4).map(|_| rng.random_range(0..65537)).collect();
            let cts: Vec<Vec<Poly>> = ms.iter().map(|&m| encrypt(&ctx, &pk, m, &mut rng)).collect();

            let mul = |a: &Vec<Poly>, b: &Vec<Poly>| -> Vec<Poly> {
                let t = tensor(a, b, &ctx);
                let r = relinearize(&t, &evk, &ctx);
                r.iter().map(|c| c.mod_switch(&ctx)).collect()
            };
            // depth 1: m0*m1, m2*m3; depth 2: product of those; depth 3: square it
            let p01 = mul(&cts[0], &cts[1]);
            let p23 = mul(&cts[2], &cts[3]);
            let p = mul(&p01, &p23);
            let sq = mul(&p, &p);

            let want_p = ms.iter().fold(1u64, |acc, &m| mul_mod_u64(acc, m, 65537));
            let want_sq = mul_mod_u64(want_p, want_p, 65537);
            assert_eq!(decrypt(&ctx, &sk, &p).unwrap(), want_p);
            assert_eq!(decrypt(&ctx, &sk, &sq).unwrap(), want_sq);
        }
    }
}
