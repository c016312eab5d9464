//! DNA-profile data model: a profile is a `t x 2` matrix of
//! (fragment size, signal amplitude) pairs over `Z*_p`, plus the flattening
//! transform used by the blind-encryption phase, synthetic data generation,
//! and the plaintext distance/match oracle that the encrypted pipeline is
//! cross-checked against.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;
use thiserror::Error;

use crate::field::{FieldElement, FieldError, FieldParams};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile must have at least one slot")]
    Empty,
    #[error("profile entries must lie in [1, p-1], got {0}")]
    NotAUnit(u64),
    #[error("expected a vector of length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("profiles have different slot counts ({0} vs {1})")]
    SlotCountMismatch(usize, usize),
    #[error("range bound must lie in [1, p-1], got {0}")]
    InvalidBound(u64),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("malformed profile file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One DNA profile: `t` slots of (fragment size eta, amplitude sigma).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnaProfile {
    slots: Vec<(FieldElement, FieldElement)>,
}

impl DnaProfile {
    pub fn new(slots: Vec<(FieldElement, FieldElement)>) -> Result<Self, ProfileError> {
        if slots.is_empty() {
            return Err(ProfileError::Empty);
        }
        for &(eta, sigma) in &slots {
            if !eta.is_unit() {
                return Err(ProfileError::NotAUnit(eta.value()));
            }
            if !sigma.is_unit() {
                return Err(ProfileError::NotAUnit(sigma.value()));
            }
        }
        Ok(DnaProfile { slots })
    }

    /// Convenience constructor from raw values.
    pub fn from_values(params: &FieldParams, rows: &[(u64, u64)]) -> Result<Self, ProfileError> {
        let slots = rows
            .iter()
            .map(|&(e, s)| (params.element(e), params.element(s)))
            .collect();
        DnaProfile::new(slots)
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[(FieldElement, FieldElement)] {
        &self.slots
    }

    /// Row-major flattening `T`: `[eta_1, sigma_1, ..., eta_t, sigma_t]`.
    pub fn flatten(&self) -> Vec<FieldElement> {
        let mut out = Vec::with_capacity(2 * self.slots.len());
        for &(eta, sigma) in &self.slots {
            out.push(eta);
            out.push(sigma);
        }
        out
    }

    /// Inverse of [`DnaProfile::flatten`].
    pub fn unflatten(v: &[FieldElement], t: usize) -> Result<Self, ProfileError> {
        if v.len() != 2 * t || t == 0 {
            return Err(ProfileError::ShapeMismatch {
                expected: 2 * t,
                got: v.len(),
            });
        }
        let slots = v.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        DnaProfile::new(slots)
    }

    /// Generates a profile with all `2t` entries uniform in `[1, B]`.
    pub fn generate<R: Rng + ?Sized>(
        params: &FieldParams,
        t: usize,
        range_bound: u64,
        rng: &mut R,
    ) -> Result<Self, ProfileError> {
        if range_bound < 1 || range_bound > params.modulus() - 1 {
            return Err(ProfileError::InvalidBound(range_bound));
        }
        if t == 0 {
            return Err(ProfileError::Empty);
        }
        warn_on_range_discipline(t, range_bound, params.modulus());
        let slots = (0..t)
            .map(|_| {
                (
                    params.element(rng.random_range(1..=range_bound)),
                    params.element(rng.random_range(1..=range_bound)),
                )
            })
            .collect();
        DnaProfile::new(slots)
    }

    /// Moves every entry by an integer in `[-max_delta, +max_delta]`, clamped
    /// to stay inside `[1, p-1]`. Used to build near-match test samples.
    pub fn perturb<R: Rng + ?Sized>(&self, max_delta: u64, rng: &mut R) -> DnaProfile {
        let shift = |e: &FieldElement, rng: &mut R| {
            let p = e.modulus();
            let d = rng.random_range(-(max_delta as i64)..=max_delta as i64);
            let v = (e.value() as i64 + d).clamp(1, (p - 1) as i64);
            FieldElement::from_parts(v as u64, p)
        };
        let slots = self
            .slots
            .iter()
            .map(|(eta, sigma)| (shift(eta, rng), shift(sigma, rng)))
            .collect();
        DnaProfile { slots }
    }
}

/// The squared-product distance: `delta = sum_j (d_eta_j)^2 * (d_sigma_j)^2`,
/// computed entirely in `Z_p`. This is the reference oracle the encrypted
/// circuit must reproduce exactly.
///
/// Note the metric's own quirk: a slot with `d_eta = 0` contributes nothing
/// no matter how far the amplitudes are apart.
pub fn plaintext_distance(a: &DnaProfile, b: &DnaProfile) -> Result<FieldElement, ProfileError> {
    if a.slot_count() != b.slot_count() {
        return Err(ProfileError::SlotCountMismatch(
            a.slot_count(),
            b.slot_count(),
        ));
    }
    let params = FieldParams::new(a.slots[0].0.modulus())?;
    let mut acc = params.element(0);
    for (&(ae, as_), &(be, bs)) in a.slots.iter().zip(b.slots.iter()) {
        let de = ae.sub(&be)?;
        let ds = as_.sub(&bs)?;
        let term = de.mul(&de)?.mul(&ds.mul(&ds)?)?;
        acc = acc.add(&term)?;
    }
    Ok(acc)
}

/// The public match threshold tau compared against the real fourth root of
/// the distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchThreshold(f64);

impl MatchThreshold {
    pub fn new(tau: f64) -> Option<Self> {
        (tau >= 0.0 && tau.is_finite()).then_some(MatchThreshold(tau))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Declares a match iff `delta^(1/4) < tau` (strict).
pub fn match_decision(delta: &FieldElement, tau: MatchThreshold) -> bool {
    (delta.value() as f64).powf(0.25) < tau.value()
}

/// True when `t * (2B)^4 < p`, the documented precondition under which the
/// mod-p distance of profiles generated with range bound `B` equals the true
/// integer distance, making the threshold comparison meaningful.
pub fn range_discipline_ok(t: usize, range_bound: u64, p: u64) -> bool {
    let two_b = 2u128 * range_bound as u128;
    let bound = t as u128 * two_b.pow(4);
    bound < p as u128
}

fn warn_on_range_discipline(t: usize, range_bound: u64, p: u64) {
    if !range_discipline_ok(t, range_bound, p) {
        log::warn!(
            "range discipline violated: t*(2B)^4 = {}*(2*{})^4 >= p = {}; \
             distances may wrap mod p and the threshold comparison can \
             misclassify far-apart profiles",
            t,
            range_bound,
            p
        );
    }
}

/// An ordered database of `n` profiles sharing one slot count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileDatabase {
    entries: Vec<DnaProfile>,
}

impl ProfileDatabase {
    pub fn new(entries: Vec<DnaProfile>) -> Result<Self, ProfileError> {
        if entries.is_empty() {
            return Err(ProfileError::Empty);
        }
        let t = entries[0].slot_count();
        for e in &entries {
            if e.slot_count() != t {
                return Err(ProfileError::SlotCountMismatch(t, e.slot_count()));
            }
        }
        Ok(ProfileDatabase { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn slot_count(&self) -> usize {
        self.entries[0].slot_count()
    }

    /// 1-based access mirroring protocol indices.
    pub fn get(&self, index: u32) -> Option<&DnaProfile> {
        self.entries.get(index as usize - 1)
    }

    pub fn entries(&self) -> &[DnaProfile] {
        &self.entries
    }

    pub fn generate<R: Rng + ?Sized>(
        params: &FieldParams,
        t: usize,
        n: usize,
        range_bound: u64,
        rng: &mut R,
    ) -> Result<Self, ProfileError> {
        let entries = (0..n)
            .map(|_| DnaProfile::generate(params, t, range_bound, rng))
            .collect::<Result<Vec<_>, _>>()?;
        ProfileDatabase::new(entries)
    }

    /// Writes the line-oriented text format:
    /// header `t=<t> p=<p> n=<n>`, then one profile per line as `2t`
    /// space-separated integers. Round-trips bit-exactly through
    /// [`ProfileDatabase::read_text`].
    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<(), ProfileError> {
        let p = self.entries[0].slots()[0].0.modulus();
        writeln!(w, "t={} p={} n={}", self.slot_count(), p, self.len())?;
        for profile in &self.entries {
            let mut line = String::new();
            for (i, e) in profile.flatten().iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                write!(line, "{}", e.value()).expect("write to string");
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: &mut R) -> Result<(Self, FieldParams), ProfileError> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let header = header.trim_end_matches('\n');
        let mut t = None;
        let mut p = None;
        let mut n = None;
        for part in header.split(' ') {
            match part.split_once('=') {
                Some(("t", v)) => t = v.parse::<usize>().ok(),
                Some(("p", v)) => p = v.parse::<u64>().ok(),
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                _ => return Err(ProfileError::Parse(format!("bad header field `{part}`"))),
            }
        }
        let (t, p, n) = match (t, p, n) {
            (Some(t), Some(p), Some(n)) => (t, p, n),
            _ => return Err(ProfileError::Parse("header must be `t=<t> p=<p> n=<n>`".into())),
        };
        let params = FieldParams::new(p)?;
        let mut entries = Vec::with_capacity(n);
        for i in 0..n {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(ProfileError::Parse(format!(
                    "expected {n} profile lines, got {i}"
                )));
            }
            let values = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<u64>()
                        .map_err(|_| ProfileError::Parse(format!("bad integer `{tok}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != 2 * t {
                return Err(ProfileError::Parse(format!(
                    "line {}: expected {} values, got {}",
                    i + 2,
                    2 * t,
                    values.len()
                )));
            }
            for &v in &values {
                if v == 0 || v >= p {
                    return Err(ProfileError::NotAUnit(v));
                }
            }
            let flat: Vec<FieldElement> = values.iter().map(|&v| params.element(v)).collect();
            entries.push(DnaProfile::unflatten(&flat, t)?);
        }
        Ok((ProfileDatabase::new(entries)?, params))
    }
}
