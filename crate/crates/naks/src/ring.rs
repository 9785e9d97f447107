//! Arithmetic in truncated local rings `R_n = R / m^n`.
//!
//! Two families share one representation: `Z/p^n` (addition propagates
//! carries across digits) and `F_p[t]/(t^n)` (digitwise, carry-free). An
//! element is a little-endian digit vector `(x_0, ..., x_{n-1})` with digits
//! in `[0, p)`, packed into a single `u64` as `sum x_i * p^i`. The packed
//! value ranges over `[0, p^n)` and the packing is identical for both
//! families; only the arithmetic differs. The maximal ideal is generated by
//! the uniformizer `pi` (`p` itself, resp. `t`), whose packed value is `p`
//! in both families.

use std::fmt;
use std::str::FromStr;

/// Which local ring the truncation comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RingFamily {
    /// `Z/p^n`: integers mod `p^n`, digit arithmetic with carries.
    Padic,
    /// `F_p[t]/(t^n)`: polynomial truncations, digitwise arithmetic.
    Series,
}

impl RingFamily {
    fn tag(self) -> &'static str {
        match self {
            RingFamily::Padic => "padic",
            RingFamily::Series => "series",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RingError {
    #[error("modulus {0} is not prime")]
    NonPrimeModulus(u64),
    #[error("invalid truncation level {0}: must be at least 1 and at most the ring level")]
    InvalidLevel(u32),
    #[error("ring too large: {p}^{n} does not fit in 64 bits")]
    RingTooLarge { p: u64, n: u32 },
    #[error("elements belong to different rings: {0} vs {1}")]
    MixedRings(RingDescriptor, RingDescriptor),
    #[error("element is not a unit (valuation {0} > 0)")]
    NotAUnit(u32),
    #[error("packed value {value} out of range for ring of size {size}")]
    OutOfRange { value: u64, size: u64 },
    #[error("digit {digit} out of range for characteristic {p}")]
    DigitOutOfRange { digit: u64, p: u64 },
    #[error("got {given} digits for a ring with {expected} digit positions")]
    WrongDigitCount { given: usize, expected: u32 },
    #[error("cannot parse {0:?}: {1}")]
    Parse(String, &'static str),
}

pub type RingResult<T> = Result<T, RingError>;

/// A validated description of one truncated ring `R_n`: family, prime
/// characteristic `p` of the residue field, and truncation level `n >= 1`.
///
/// Copyable and cheap; every [`RingElement`] carries one so cross-ring
/// operations can be rejected with [`RingError::MixedRings`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RingDescriptor {
    family: RingFamily,
    p: u64,
    n: u32,
    /// `p^n`, cached; fits in `u64` by construction.
    size: u64,
}

/// Deterministic Miller-Rabin, exact for all `u64` inputs.
fn is_prime_u64(x: u64) -> bool {
    if x < 2 {
        return false;
    }
    for small in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if x == small {
            return true;
        }
        if x.is_multiple_of(small) {
            return false;
        }
    }
    let mulmod = |a: u64, b: u64, m: u64| ((a as u128 * b as u128) % m as u128) as u64;
    let powmod = |mut base: u64, mut exp: u64, m: u64| {
        let mut acc = 1u64;
        base %= m;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = mulmod(acc, base, m);
            }
            base = mulmod(base, base, m);
            exp >>= 1;
        }
        acc
    };
    let d = (x - 1) >> (x - 1).trailing_zeros();
    let s = (x - 1).trailing_zeros();
    // This witness set decides primality for every 64-bit integer.
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut y = powmod(a, d, x);
        if y == 1 || y == x - 1 {
            continue;
        }
        for _ in 1..s {
            y = mulmod(y, y, x);
            if y == x - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

impl RingDescriptor {
    /// Validates `p` prime, `n >= 1`, and `p^n` representable in 64 bits.
    pub fn new(family: RingFamily, p: u64, n: u32) -> RingResult<Self> {
        if !is_prime_u64(p) {
            return Err(RingError::NonPrimeModulus(p));
        }
        if n == 0 {
            return Err(RingError::InvalidLevel(0));
        }
        let size = p
            .checked_pow(n)
            .ok_or(RingError::RingTooLarge { p, n })?;
        Ok(Self { family, p, n, size })
    }

    pub fn family(&self) -> RingFamily {
        self.family
    }

    /// Characteristic of the residue field.
    pub fn p(&self) -> u64 {
        self.p
    }

    /// Truncation level (number of digit positions).
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Number of ring elements, `p^n`.
    pub fn size(&self) -> u64 {
        self.size
    }

    /// The same ring truncated at level `m`, `1 <= m <= n`.
    pub fn at_level(&self, m: u32) -> RingResult<Self> {
        if m == 0 || m > self.n {
            return Err(RingError::InvalidLevel(m));
        }
        Self::new(self.family, self.p, m)
    }

    /// Element from its packed value `sum x_i p^i < p^n`.
    pub fn element(&self, packed: u64) -> RingResult<RingElement> {
        if packed >= self.size {
            return Err(RingError::OutOfRange {
                value: packed,
                size: self.size,
            });
        }
        Ok(RingElement {
            ring: *self,
            packed,
        })
    }

    pub fn zero(&self) -> RingElement {
        RingElement {
            ring: *self,
            packed: 0,
        }
    }

    pub fn one(&self) -> RingElement {
        RingElement {
            ring: *self,
            packed: 1 % self.size,
        }
    }

    /// The uniformizer `pi` generating the maximal ideal: `p` itself in the
    /// `Z/p^n` family, `t` in the `F_p[t]/(t^n)` family. Packed value `p`
    /// either way (zero when `n = 1`, where the ring is the field `F_p`).
    pub fn uniformizer(&self) -> RingElement {
        RingElement {
            ring: *self,
            packed: self.p % self.size,
        }
    }

    /// Element from little-endian digits; fewer than `n` digits are padded
    /// with zeros.
    pub fn from_digits(&self, digits: &[u64]) -> RingResult<RingElement> {
        if digits.len() > self.n as usize {
            return Err(RingError::WrongDigitCount {
                given: digits.len(),
                expected: self.n,
            });
        }
        let mut packed = 0u64;
        for (i, &d) in digits.iter().enumerate() {
            if d >= self.p {
                return Err(RingError::DigitOutOfRange { digit: d, p: self.p });
            }
            packed += d * self.p.pow(i as u32);
        }
        Ok(RingElement {
            ring: *self,
            packed,
        })
    }

    /// Uniform random element (convenience for experiments and tests; the
    /// Monte Carlo digit-draw contract lives in [`crate::lipschitz`]).
    pub fn random_element<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> RingElement {
        RingElement {
            ring: *self,
            packed: rng.random_range(0..self.size),
        }
    }

    /// Parses the fixed-width digit string produced by
    /// [`RingElement`]'s `Display` (little-endian, `0-9a-z` alphabet).
    pub fn parse_element(&self, s: &str) -> RingResult<RingElement> {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != self.n as usize {
            return Err(RingError::Parse(
                s.to_string(),
                "wrong number of digit characters for this ring level",
            ));
        }
        let mut digits = Vec::with_capacity(chars.len());
        for c in chars {
            let d = char_to_digit(c)
                .ok_or_else(|| RingError::Parse(s.to_string(), "invalid digit character"))?;
            digits.push(d);
        }
        self.from_digits(&digits)
    }

    fn check_same(&self, other: &RingDescriptor) -> RingResult<()> {
        if self == other {
            Ok(())
        } else {
            Err(RingError::MixedRings(*self, *other))
        }
    }
}

impl fmt::Display for RingDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:p={},n={}", self.family.tag(), self.p, self.n)
    }
}

impl FromStr for RingDescriptor {
    type Err = RingError;

    /// Parses the `Display` form, e.g. `padic:p=2,n=3`.
    fn from_str(s: &str) -> RingResult<Self> {
        let err = |why| RingError::Parse(s.to_string(), why);
        let (tag, rest) = s
            .split_once(':')
            .ok_or_else(|| err("expected `family:p=..,n=..`"))?;
        let family = match tag {
            "padic" => RingFamily::Padic,
            "series" => RingFamily::Series,
            _ => return Err(err("unknown family (expected `padic` or `series`)")),
        };
        let (p_part, n_part) = rest
            .split_once(',')
            .ok_or_else(|| err("expected `p=..,n=..`"))?;
        let p = p_part
            .strip_prefix("p=")
            .and_then(|v| v.parse::<u64>().ok())
            .ok_or_else(|| err("bad p field"))?;
        let n = n_part
            .strip_prefix("n=")
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| err("bad n field"))?;
        RingDescriptor::new(family, p, n)
    }
}

const DIGIT_ALPHABET: &[u8; 36] = b"0123456789abcdefghijklmnopqrstuvwxyz";

fn digit_to_char(d: u64) -> Option<char> {
    DIGIT_ALPHABET.get(d as usize).map(|&b| b as char)
}

fn char_to_digit(c: char) -> Option<u64> {
    match c {
        '0'..='9' => Some(c as u64 - '0' as u64),
        'a'..='z' => Some(c as u64 - 'a' as u64 + 10),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Packed-value arithmetic. These operate on raw `u64` packings so the hot
// loops elsewhere in the crate can skip per-element descriptor checks.
// ---------------------------------------------------------------------------

#[inline]
pub(crate) fn add_packed(ring: &RingDescriptor, a: u64, b: u64) -> u64 {
    match ring.family {
        RingFamily::Padic => {
            let sum = a as u128 + b as u128;
            let size = ring.size as u128;
            (if sum >= size { sum - size } else { sum }) as u64
        }
        RingFamily::Series => {
            if ring.p == 2 {
                a ^ b
            } else {
                let p = ring.p;
                let (mut a, mut b) = (a, b);
                let mut out = 0u64;
                let mut scale = 1u64;
                for _ in 0..ring.n {
                    let d = (a % p + b % p) % p;
                    out += d * scale;
                    a /= p;
                    b /= p;
                    if a == 0 && b == 0 {
                        break;
                    }
                    scale *= p;
                }
                out
            }
        }
    }
}

#[inline]
pub(crate) fn neg_packed(ring: &RingDescriptor, a: u64) -> u64 {
    match ring.family {
        RingFamily::Padic => {
            if a == 0 {
                0
            } else {
                ring.size - a
            }
        }
        RingFamily::Series => {
            if ring.p == 2 {
                a
            } else {
                let p = ring.p;
                let mut a = a;
                let mut out = 0u64;
                let mut scale = 1u64;
                while a != 0 {
                    let d = a % p;
                    if d != 0 {
                        out += (p - d) * scale;
                    }
                    a /= p;
                    scale = scale.wrapping_mul(p);
                }
                out
            }
        }
    }
}

#[inline]
pub(crate) fn sub_packed(ring: &RingDescriptor, a: u64, b: u64) -> u64 {
    match ring.family {
        RingFamily::Padic => {
            if a >= b {
                a - b
            } else {
                a + (ring.size - b)
            }
        }
        RingFamily::Series => add_packed(ring, a, neg_packed(ring, b)),
    }
}

pub(crate) fn mul_packed(ring: &RingDescriptor, a: u64, b: u64) -> u64 {
    match ring.family {
        RingFamily::Padic => ((a as u128 * b as u128) % ring.size as u128) as u64,
        RingFamily::Series => {
            let p = ring.p;
            let n = ring.n as usize;
            let mut da = [0u64; 64];
            let mut db = [0u64; 64];
            unpack_digits(p, n, a, &mut da);
            unpack_digits(p, n, b, &mut db);
            let mut out = 0u64;
            let mut scale = 1u64;
            for k in 0..n {
                let mut c = 0u64;
                for i in 0..=k {
                    c += da[i] * db[k - i];
                }
                out += (c % p) * scale;
                scale = scale.wrapping_mul(p);
            }
            out
        }
    }
}

/// Multiply by the scalar digit `s < p` (same meaning in both families:
/// `s`-fold repeated addition).
pub(crate) fn scalar_mul_packed(ring: &RingDescriptor, s: u64, a: u64) -> u64 {
    debug_assert!(s < ring.p);
    match ring.family {
        RingFamily::Padic => ((s as u128 * a as u128) % ring.size as u128) as u64,
        RingFamily::Series => {
            let p = ring.p;
            let mut a = a;
            let mut out = 0u64;
            let mut scale = 1u64;
            for _ in 0..ring.n {
                out += (a % p * s % p) * scale;
                a /= p;
                scale = scale.wrapping_mul(p);
            }
            out
        }
    }
}

/// Number of trailing zero digits (identical for both families); `n` for 0.
#[inline]
pub(crate) fn valuation_packed(ring: &RingDescriptor, a: u64) -> u32 {
    if a == 0 {
        return ring.n;
    }
    let mut a = a;
    let mut v = 0;
    while a.is_multiple_of(ring.p) {
        a /= ring.p;
        v += 1;
    }
    v
}

fn unpack_digits(p: u64, n: usize, mut v: u64, out: &mut [u64; 64]) {
    for slot in out.iter_mut().take(n) {
        *slot = v % p;
        v /= p;
    }
}

/// One element of a truncated ring; a packed digit vector plus its ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RingElement {
    ring: RingDescriptor,
    packed: u64,
}

impl RingElement {
    pub fn ring(&self) -> &RingDescriptor {
        &self.ring
    }

    /// Packed value `sum x_i p^i`, in `[0, p^n)`.
    pub fn packed(&self) -> u64 {
        self.packed
    }

    /// Little-endian digit vector of length `n`.
    pub fn digits(&self) -> Vec<u64> {
        let mut v = self.packed;
        let mut out = Vec::with_capacity(self.ring.n as usize);
        for _ in 0..self.ring.n {
            out.push(v % self.ring.p);
            v /= self.ring.p;
        }
        out
    }

    /// Digit at position `i` (coefficient of `pi^i`), `i < n`.
    pub fn digit(&self, i: u32) -> u64 {
        debug_assert!(i < self.ring.n);
        self.packed / self.ring.p.pow(i) % self.ring.p
    }

    pub fn is_zero(&self) -> bool {
        self.packed == 0
    }

    /// Units are exactly the elements with nonzero constant digit.
    pub fn is_unit(&self) -> bool {
        !self.packed.is_multiple_of(self.ring.p)
    }

    pub fn add(&self, other: &RingElement) -> RingResult<RingElement> {
        self.ring.check_same(&other.ring)?;
        Ok(RingElement {
            ring: self.ring,
            packed: add_packed(&self.ring, self.packed, other.packed),
        })
    }

    pub fn sub(&self, other: &RingElement) -> RingResult<RingElement> {
        self.ring.check_same(&other.ring)?;
        Ok(RingElement {
            ring: self.ring,
            packed: sub_packed(&self.ring, self.packed, other.packed),
        })
    }

    pub fn neg(&self) -> RingElement {
        RingElement {
            ring: self.ring,
            packed: neg_packed(&self.ring, self.packed),
        }
    }

    pub fn mul(&self, other: &RingElement) -> RingResult<RingElement> {
        self.ring.check_same(&other.ring)?;
        Ok(RingElement {
            ring: self.ring,
            packed: mul_packed(&self.ring, self.packed, other.packed),
        })
    }

    /// Multiplicative inverse; defined exactly for units.
    pub fn inverse(&self) -> RingResult<RingElement> {
        if !self.is_unit() {
            return Err(RingError::NotAUnit(self.valuation()));
        }
        let packed = match self.ring.family {
            RingFamily::Padic => invert_mod(self.packed, self.ring.size),
            RingFamily::Series => {
                // Solve the triangular system c_0 b_0 = 1,
                // sum_{i<=k} a_i b_{k-i} = 0 digit by digit.
                let p = self.ring.p;
                let n = self.ring.n as usize;
                let mut a = [0u64; 64];
                unpack_digits(p, n, self.packed, &mut a);
                let a0_inv = invert_mod(a[0], p);
                let mut b = [0u64; 64];
                b[0] = a0_inv;
                for k in 1..n {
                    let mut acc = 0u64;
                    for i in 1..=k {
                        acc += a[i] * b[k - i] % p;
                    }
                    b[k] = (p - acc % p) % p * a0_inv % p;
                }
                let mut out = 0u64;
                for k in (0..n).rev() {
                    out = out * p + b[k];
                }
                out
            }
        };
        Ok(RingElement {
            ring: self.ring,
            packed,
        })
    }

    /// `pi`-adic valuation: the number of trailing zero digits, with the
    /// convention `v(0) = n`.
    pub fn valuation(&self) -> u32 {
        valuation_packed(&self.ring, self.packed)
    }

    /// Image under the truncation `R_n -> R_m`, `1 <= m <= n`: keeps the
    /// low `m` digits. A ring homomorphism in both families.
    pub fn reduce_level(&self, m: u32) -> RingResult<RingElement> {
        let target = self.ring.at_level(m)?;
        Ok(RingElement {
            ring: target,
            packed: self.packed % target.size,
        })
    }
}

/// Inverse of `a` mod `m` via extended Euclid; caller guarantees gcd 1.
fn invert_mod(a: u64, m: u64) -> u64 {
    let (mut r0, mut r1) = (m as i128, a as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    debug_assert_eq!(r0, 1, "invert_mod called on a non-unit");
    t0.rem_euclid(m as i128) as u64
}

impl fmt::Display for RingElement {
    /// Fixed-width little-endian digit string (constant digit first),
    /// alphabet `0-9a-z`; falls back to dot-separated decimal digits for
    /// `p > 36`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ring.p <= 36 {
            for d in self.digits() {
                write!(f, "{}", digit_to_char(d).expect("digit below 36"))?;
            }
            Ok(())
        } else {
            let digits = self.digits();
            let strs: Vec<String> = digits.iter().map(|d| d.to_string()).collect();
            write!(f, "{}", strs.join("."))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zp(p: u64, n: u32) -> RingDescriptor {
        RingDescriptor::new(RingFamily::Padic, p, n).unwrap()
    }

    fn fpt(p: u64, n: u32) -> RingDescriptor {
        RingDescriptor::new(RingFamily::Series, p, n).unwrap()
    }

    #[test]
    fn constructor_validates() {
        assert!(RingDescriptor::new(RingFamily::Padic, 2, 3).is_ok());
        assert_eq!(
            RingDescriptor::new(RingFamily::Padic, 6, 2),
            Err(RingError::NonPrimeModulus(6))
        );
        assert_eq!(
            RingDescriptor::new(RingFamily::Series, 1, 2),
            Err(RingError::NonPrimeModulus(1))
        );
        assert_eq!(
            RingDescriptor::new(RingFamily::Padic, 2, 0),
            Err(RingError::InvalidLevel(0))
        );
        assert_eq!(
            RingDescriptor::new(RingFamily::Padic, 2, 64),
            Err(RingError::RingTooLarge { p: 2, n: 64 })
        );
        assert_eq!(zp(2, 63).size(), 1 << 63);
        assert_eq!(zp(3, 4).size(), 81);
    }

    #[test]
    fn padic_arithmetic_examples() {
        let r = zp(2, 3);
        let add = |a: u64, b: u64| {
            r.element(a)
                .unwrap()
                .add(&r.element(b).unwrap())
                .unwrap()
                .packed()
        };
        assert_eq!(add(5, 7), 4); // 12 mod 8
        assert_eq!(add(3, 7), 2);
        let mul = |a: u64, b: u64| {
            r.element(a)
                .unwrap()
                .mul(&r.element(b).unwrap())
                .unwrap()
                .packed()
        };
        assert_eq!(mul(3, 5), 7); // 15 mod 8
        assert_eq!(mul(2, 4), 0);
    }

    #[test]
    fn series_arithmetic_examples() {
        let r = fpt(2, 3);
        let el = |v: u64| r.element(v).unwrap();
        // (1 + t^2) + (1 + t + t^2) = t
        assert_eq!(el(5).add(&el(7)).unwrap().packed(), 2);
        // (1 + t)^2 = 1 + t^2 over F_2
        assert_eq!(el(3).mul(&el(3)).unwrap().packed(), 5);
        // t * t^2 = t^3 = 0
        assert_eq!(el(2).mul(&el(4)).unwrap().packed(), 0);

        let r3 = fpt(3, 2);
        let el3 = |v: u64| r3.element(v).unwrap();
        // (2 + t) + (2 + 2t) = 1 (digitwise mod 3, no carry)
        assert_eq!(el3(5).add(&el3(8)).unwrap().packed(), 1);
        // contrast: same packed values in Z/9 give 5 + 8 = 4
        let z9 = zp(3, 2);
        assert_eq!(
            z9.element(5)
                .unwrap()
                .add(&z9.element(8).unwrap())
                .unwrap()
                .packed(),
            4
        );
    }

    #[test]
    fn mixed_rings_rejected() {
        let a = zp(2, 3).element(1).unwrap();
        let b = fpt(2, 3).element(1).unwrap();
        assert!(matches!(a.add(&b), Err(RingError::MixedRings(_, _))));
        let c = zp(2, 2).element(1).unwrap();
        assert!(matches!(a.mul(&c), Err(RingError::MixedRings(_, _))));
    }

    #[test]
    fn units_and_inverses() {
        let r = zp(2, 3);
        assert!(r.element(3).unwrap().is_unit());
        assert!(!r.element(6).unwrap().is_unit());
        assert_eq!(r.element(3).unwrap().inverse().unwrap().packed(), 3);
        assert_eq!(r.element(5).unwrap().inverse().unwrap().packed(), 5);
        assert_eq!(
            r.element(2).unwrap().inverse(),
            Err(RingError::NotAUnit(1))
        );

        // (1 + t)^{-1} = 1 + t + t^2 in F_2[t]/(t^3)
        let s = fpt(2, 3);
        assert_eq!(s.element(3).unwrap().inverse().unwrap().packed(), 7);

        let z9 = zp(3, 2);
        // 2 * 5 = 10 = 1 mod 9
        assert_eq!(z9.element(2).unwrap().inverse().unwrap().packed(), 5);
    }

    #[test]
    fn valuation_examples() {
        let r = zp(2, 3);
        let v = |x: u64| r.element(x).unwrap().valuation();
        assert_eq!(v(0), 3);
        assert_eq!(v(1), 0);
        assert_eq!(v(4), 2);
        assert_eq!(v(6), 1);
        let s = fpt(3, 3);
        assert_eq!(s.element(9).unwrap().valuation(), 2); // t^2
        assert_eq!(s.element(12).unwrap().valuation(), 1); // t + t^2
    }

    #[test]
    fn uniformizer_is_nilpotent_of_order_n() {
        for ring in [zp(2, 3), fpt(2, 3), zp(3, 2), fpt(3, 2)] {
            let pi = ring.uniformizer();
            assert_eq!(pi.valuation(), 1);
            let mut acc = ring.one();
            for _ in 0..ring.n() {
                acc = acc.mul(&pi).unwrap();
            }
            assert!(acc.is_zero(), "pi^n must vanish in {ring}");
        }
    }

    #[test]
    fn reduce_level_examples() {
        let r = zp(2, 3);
        let x = r.element(6).unwrap();
        let y = x.reduce_level(2).unwrap();
        assert_eq!(y.ring().n(), 2);
        assert_eq!(y.packed(), 2);
        assert_eq!(x.reduce_level(3).unwrap().packed(), 6);
        assert_eq!(x.reduce_level(0), Err(RingError::InvalidLevel(0)));
        assert_eq!(x.reduce_level(4), Err(RingError::InvalidLevel(4)));
    }

    #[test]
    fn digits_round_trip_and_errors() {
        let r = zp(3, 4);
        let x = r.from_digits(&[2, 0, 1]).unwrap();
        assert_eq!(x.packed(), 2 + 9);
        assert_eq!(x.digits(), vec![2, 0, 1, 0]);
        assert_eq!(x.digit(0), 2);
        assert_eq!(x.digit(2), 1);
        assert_eq!(
            r.from_digits(&[3]),
            Err(RingError::DigitOutOfRange { digit: 3, p: 3 })
        );
        assert_eq!(
            r.from_digits(&[0; 5]),
            Err(RingError::WrongDigitCount {
                given: 5,
                expected: 4
            })
        );
        assert_eq!(
            r.element(81),
            Err(RingError::OutOfRange {
                value: 81,
                size: 81
            })
        );
    }

    #[test]
    fn element_text_round_trip() {
        let r = zp(2, 3);
        let x = r.element(6).unwrap();
        assert_eq!(x.to_string(), "011");
        assert_eq!(r.parse_element("011").unwrap(), x);
        let r13 = zp(13, 2);
        let y = r13.from_digits(&[12, 10]).unwrap();
        assert_eq!(y.to_string(), "ca");
        assert_eq!(r13.parse_element("ca").unwrap(), y);
        assert!(r.parse_element("01").is_err());
        assert!(r.parse_element("01!").is_err());
        assert!(r.parse_element("021").is_err()); // digit 2 out of range for p=2
    }

    #[test]
    fn descriptor_text_round_trip() {
        for ring in [zp(2, 3), fpt(5, 2)] {
            let s = ring.to_string();
            assert_eq!(s.parse::<RingDescriptor>().unwrap(), ring);
        }
        assert_eq!(zp(2, 3).to_string(), "padic:p=2,n=3");
        assert!("padic:p=6,n=2".parse::<RingDescriptor>().is_err());
        assert!("weird:p=2,n=2".parse::<RingDescriptor>().is_err());
        assert!("padic:p=2".parse::<RingDescriptor>().is_err());
    }

    fn any_ring() -> impl Strategy<Value = RingDescriptor> {
        (
            prop_oneof![Just(RingFamily::Padic), Just(RingFamily::Series)],
            prop_oneof![Just(2u64), Just(3), Just(5), Just(7)],
            1u32..=6,
        )
            .prop_map(|(f, p, n)| RingDescriptor::new(f, p, n).unwrap())
    }

    fn ring_with_elements(
        count: usize,
    ) -> impl Strategy<Value = (RingDescriptor, Vec<RingElement>)> {
        any_ring().prop_flat_map(move |r| {
            proptest::collection::vec(0..r.size(), count)
                .prop_map(move |vs| (r, vs.iter().map(|&v| r.element(v).unwrap()).collect()))
        })
    }

    proptest! {
        #[test]
        fn ring_axioms((r, els) in ring_with_elements(3)) {
            let (a, b, c) = (&els[0], &els[1], &els[2]);
            let zero = r.zero();
            let one = r.one();
            prop_assert_eq!(a.add(b).unwrap(), b.add(a).unwrap());
            prop_assert_eq!(a.mul(b).unwrap(), b.mul(a).unwrap());
            prop_assert_eq!(
                a.add(b).unwrap().add(c).unwrap(),
                a.add(&b.add(c).unwrap()).unwrap()
            );
            prop_assert_eq!(
                a.mul(b).unwrap().mul(c).unwrap(),
                a.mul(&b.mul(c).unwrap()).unwrap()
            );
            prop_assert_eq!(
                a.mul(&b.add(c).unwrap()).unwrap(),
                a.mul(b).unwrap().add(&a.mul(c).unwrap()).unwrap()
            );
            prop_assert_eq!(a.add(&zero).unwrap(), *a);
            prop_assert_eq!(a.mul(&one).unwrap(), *a);
            prop_assert_eq!(a.add(&a.neg()).unwrap(), zero);
            prop_assert_eq!(a.sub(b).unwrap(), a.add(&b.neg()).unwrap());
        }

        #[test]
        fn valuation_is_multiplicative((r, els) in ring_with_elements(2)) {
            let (a, b) = (&els[0], &els[1]);
            let expected = (a.valuation() + b.valuation()).min(r.n());
            prop_assert_eq!(a.mul(b).unwrap().valuation(), expected);
        }

        #[test]
        fn unit_times_inverse_is_one((r, els) in ring_with_elements(1)) {
            let a = &els[0];
            if a.is_unit() {
                prop_assert_eq!(a.mul(&a.inverse().unwrap()).unwrap(), r.one());
            } else {
                prop_assert!(a.inverse().is_err());
            }
        }

        #[test]
        fn reduce_level_is_homomorphism((r, els) in ring_with_elements(2)) {
            let (a, b) = (&els[0], &els[1]);
            for m in 1..=r.n() {
                prop_assert_eq!(
                    a.add(b).unwrap().reduce_level(m).unwrap(),
                    a.reduce_level(m).unwrap().add(&b.reduce_level(m).unwrap()).unwrap()
                );
                prop_assert_eq!(
                    a.mul(b).unwrap().reduce_level(m).unwrap(),
                    a.reduce_level(m).unwrap().mul(&b.reduce_level(m).unwrap()).unwrap()
                );
            }
        }

        #[test]
        fn digits_pack_round_trip((r, els) in ring_with_elements(1)) {
            let a = &els[0];
            prop_assert_eq!(r.from_digits(&a.digits()).unwrap(), *a);
            let text = a.to_string();
            prop_assert_eq!(r.parse_element(&text).unwrap(), *a);
        }

        #[test]
        fn valuation_matches_pi_divisibility((r, els) in ring_with_elements(1)) {
            let a = &els[0];
            let v = a.valuation();
            // a is divisible by pi^v: a = pi^v * u with u a unit (or a = 0).
            // Stripping v digits is packed / p^v in both families.
            if !a.is_zero() {
                let u = r.element(a.packed() / r.p().pow(v)).unwrap();
                prop_assert!(u.is_unit());
            } else {
                prop_assert_eq!(v, r.n());
            }
        }
    }
}
