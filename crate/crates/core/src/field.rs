//! Arithmetic in the prime field `Z_p` and its multiplicative group `Z*_p`.
//!
//! Every protocol value in this crate lives in one of these two sets, so the
//! types here are deliberately small: a [`FieldParams`] describing the prime
//! modulus and a `Copy` [`FieldElement`] that remembers which modulus it
//! belongs to. Mixing elements from different moduli is an error, not UB.

use rand::RngCore;
use thiserror::Error;

/// Errors raised by field construction and arithmetic.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is too small (need p >= 5)")]
    TooSmall(u64),
    #[error("modulus {0} does not fit in 32 bits")]
    TooLarge(u64),
    #[error("operands belong to different fields ({0} vs {1})")]
    ParamsMismatch(u64, u64),
    #[error("0 has no multiplicative inverse")]
    NonInvertible,
}

/// Parameters of the prime field: just the modulus, checked prime at
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldParams {
    p: u64,
}

impl FieldParams {
    /// Builds field parameters, verifying that `p` is a prime in `[5, 2^32)`.
    pub fn new(p: u64) -> Result<Self, FieldError> {
        if p < 5 {
            return Err(FieldError::TooSmall(p));
        }
        if p >= (1u64 << 32) {
            return Err(FieldError::TooLarge(p));
        }
        if !is_prime_u64(p) {
            return Err(FieldError::NotPrime(p));
        }
        Ok(FieldParams { p })
    }

    /// The default field used throughout: `p = 2^16 + 1`.
    pub fn default_p() -> Self {
        FieldParams { p: 65537 }
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    /// Reduces an arbitrary integer into the field.
    pub fn element(&self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.p,
            modulus: self.p,
        }
    }

    /// Samples uniformly from `Z*_p = [1, p-1]` by rejection, so there is no
    /// modulo bias.
    pub fn sample_unit<R: RngCore + ?Sized>(&self, rng: &mut R) -> FieldElement {
        let span = self.p - 1;
        // Largest multiple of `span` representable in u64; draws at or above
        // it are rejected.
        let zone = u64::MAX - u64::MAX % span;
        loop {
            let x = rng.next_u64();
            if x < zone {
                return FieldElement {
                    value: 1 + x % span,
                    modulus: self.p,
                };
            }
        }
    }

    /// Samples uniformly from the whole field `[0, p-1]`.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> FieldElement {
        let zone = u64::MAX - u64::MAX % self.p;
        loop {
            let x = rng.next_u64();
            if x < zone {
                return FieldElement {
                    value: x % self.p,
                    modulus: self.p,
                };
            }
        }
    }
}

/// An element of `Z_p`, always kept reduced to `[0, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    modulus: u64,
}

impl FieldElement {
    /// Crate-internal constructor for values already known to be reduced and
    /// for moduli already validated.
    pub(crate) fn from_parts(value: u64, modulus: u64) -> FieldElement {
        debug_assert!(value < modulus);
        FieldElement { value, modulus }
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    /// True for members of `Z*_p`.
    pub fn is_unit(&self) -> bool {
        self.value != 0
    }

    fn check_params(&self, other: &FieldElement) -> Result<(), FieldError> {
        if self.modulus != other.modulus {
            return Err(FieldError::ParamsMismatch(self.modulus, other.modulus));
        }
        Ok(())
    }

    pub fn add(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        self.check_params(other)?;
        let mut v = self.value + other.value;
        if v >= self.modulus {
            v -= self.modulus;
        }
        Ok(FieldElement {
            value: v,
            modulus: self.modulus,
        })
    }

    pub fn sub(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        self.check_params(other)?;
        let v = if self.value >= other.value {
            self.value - other.value
        } else {
            self.value + self.modulus - other.value
        };
        Ok(FieldElement {
            value: v,
            modulus: self.modulus,
        })
    }

    pub fn mul(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        self.check_params(other)?;
        let v = (self.value as u128 * other.value as u128) % self.modulus as u128;
        Ok(FieldElement {
            value: v as u64,
            modulus: self.modulus,
        })
    }

    pub fn neg(&self) -> FieldElement {
        FieldElement {
            value: (self.modulus - self.value) % self.modulus,
            modulus: self.modulus,
        }
    }

    /// Multiplicative inverse via the extended Euclidean algorithm.
    pub fn inv(&self) -> Result<FieldElement, FieldError> {
        if self.value == 0 {
            return Err(FieldError::NonInvertible);
        }
        let (mut r0, mut r1) = (self.modulus as i128, self.value as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        debug_assert_eq!(r0, 1, "modulus is prime, gcd must be 1");
        let m = self.modulus as i128;
        let v = ((t0 % m) + m) % m;
        Ok(FieldElement {
            value: v as u64,
            modulus: self.modulus,
        })
    }

    pub fn pow(&self, mut exp: u64) -> FieldElement {
        let mut base = *self;
        let mut acc = FieldElement {
            value: 1,
            modulus: self.modulus,
        };
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base).expect("same modulus");
            }
            base = base.mul(&base).expect("same modulus");
            exp >>= 1;
        }
        acc
    }
}

impl std::fmt::Display for FieldElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Deterministic Miller-Rabin for u64. The base set is exact for all
/// n < 3.3 * 10^24, far beyond the 32-bit moduli accepted here and the
/// 64-bit NTT primes used by the lattice backend.
pub(crate) fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &q in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub(crate) fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub(crate) fn pow_mod_u64(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u64(acc, base, m);
        }
        base = mul_mod_u64(base, base, m);
        exp >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn f() -> FieldParams {
        FieldParams::default_p()
    }

    #[test]
    fn rejects_bad_moduli() {
        assert_eq!(FieldParams::new(4), Err(FieldError::TooSmall(4)));
        assert_eq!(FieldParams::new(65536), Err(FieldError::NotPrime(65536)));
        assert_eq!(FieldParams::new(1 << 33), Err(FieldError::TooLarge(1 << 33)));
        assert!(FieldParams::new(65537).is_ok());
        assert!(FieldParams::new(4294967291).is_ok()); // largest 32-bit prime
    }

    #[test]
    fn add_identity_and_wraparound() {
        let p = f();
        let x = p.element(12345);
        assert_eq!(p.element(0).add(&x).unwrap(), x);
        assert_eq!(p.element(65536).add(&p.element(1)).unwrap(), p.element(0));
        // integer addition then reduction oracle: 40000 + 30000 = 70000 -> 4463
        assert_eq!(
            p.element(40000).add(&p.element(30000)).unwrap(),
            p.element(4463)
        );
    }

    #[test]
    fn mul_identity_and_inverse_pair() {
        let p = f();
        let x = p.element(4242);
        assert_eq!(p.element(1).mul(&x).unwrap(), x);
        // 21846 = 3^-1 mod 65537, confirmed by the extended Euclidean oracle below
        assert_eq!(
            p.element(3).mul(&p.element(21846)).unwrap(),
            p.element(1)
        );
        assert_eq!(
            p.element(256).mul(&p.element(256)).unwrap(),
            p.element(65536)
        );
    }

    #[test]
    fn inverses() {
        let p = f();
        assert_eq!(p.element(1).inv().unwrap(), p.element(1));
        // -1 is self-inverse
        assert_eq!(p.element(65536).inv().unwrap(), p.element(65536));
        assert_eq!(p.element(3).inv().unwrap(), p.element(21846));
        assert_eq!(p.element(0).inv(), Err(FieldError::NonInvertible));
    }

    #[test]
    fn inv_matches_fermat_exponentiation_oracle() {
        let p = f();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..500 {
            let a = p.sample_unit(&mut rng);
            // Fermat: a^(p-2) is the inverse in a prime field.
            assert_eq!(a.inv().unwrap(), a.pow(p.modulus() - 2));
        }
    }

    #[test]
    fn params_mismatch_is_an_error() {
        let a = FieldParams::new(65537).unwrap().element(5);
        let b = FieldParams::new(40961).unwrap().element(5);
        assert_eq!(a.add(&b), Err(FieldError::ParamsMismatch(65537, 40961)));
        assert_eq!(a.mul(&b), Err(FieldError::ParamsMismatch(65537, 40961)));
    }

    #[test]
    fn commutativity_associativity_randomized() {
        let p = f();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let a = p.sample(&mut rng);
            let b = p.sample(&mut rng);
            let c = p.sample(&mut rng);
            assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
            assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
            assert_eq!(
                a.add(&b).unwrap().add(&c).unwrap(),
                a.add(&b.add(&c).unwrap()).unwrap()
            );
            assert_eq!(
                a.mul(&b).unwrap().mul(&c).unwrap(),
                a.mul(&b.mul(&c).unwrap()).unwrap()
            );
            assert_eq!(a.add(&a.neg()).unwrap(), p.element(0));
            if a.is_unit() {
                assert_eq!(a.mul(&a.inv().unwrap()).unwrap(), p.element(1));
            }
        }
    }

    #[test]
    fn sample_unit_range_and_nonzero() {
        let p = FieldParams::new(5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..10 * 5 {
            let x = p.sample_unit(&mut rng);
            assert!(x.value() >= 1 && x.value() <= 4);
        }
        let p = f();
        for _ in 0..1000 {
            assert!(p.sample_unit(&mut rng).is_unit());
        }
    }

    #[test]
    fn sample_unit_chi_square_uniformity() {
        // 100k draws over 16 equal buckets of Z*_65537 (span 65536 = 16*4096).
        let p = f();
        let mut rng = ChaCha20Rng::seed_from_u64(20260810);
        let mut buckets = [0u64; 16];
        let n = 100_000u64;
        for _ in 0..n {
            let x = p.sample_unit(&mut rng);
            buckets[((x.value() - 1) / 4096) as usize] += 1;
        }
        let expect = n as f64 / 16.0;
        let chi2: f64 = buckets
            .iter()
            .map(|&o| {
                let d = o as f64 - expect;
                d * d / expect
            })
            .sum();
        // 0.999 quantile of chi-square with 15 degrees of freedom
        assert!(chi2 < 37.697, "chi2 = {chi2}");
    }
}
