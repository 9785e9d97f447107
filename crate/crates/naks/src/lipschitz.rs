//! The space of 1-Lipschitz maps `P^{d-1}(R_n) -> R_n^d`.
//!
//! A map `f` is 1-Lipschitz for the valuation metric when
//! `f(a) = f(b) mod pi^{v_n(a,b)}` for all points `a, b`. Such maps are in
//! bijection with tuples of digit tables `(g_1, ..., g_n)`, where `g_i`
//! assigns one digit vector in `[0,p)^d` to every point of `P^{d-1}(R_i)`:
//! digit `i-1` of `f(a)` is `g_i` evaluated at the level-`i` specialization
//! of `a`. Consequences used throughout:
//!
//! * the number of maps is `q^(d * (card_1 + ... + card_n))` with `card_i`
//!   the cardinality of `P^{d-1}(R_i)`;
//! * drawing every table digit uniformly and independently gives the
//!   uniform distribution on the space;
//! * truncating to the first `m` tables realizes the projection onto the
//!   level-`m` map space.
//!
//! Sampling consumes randomness in a fixed documented order, so results are
//! reproducible from a seed independent of worker count or platform.

use std::io::{self, BufRead, Write};

use num_bigint::BigUint;
use rand::RngCore;

use crate::projective::{ProjectiveError, ProjectivePoint, ProjectiveSpace};
use crate::ring::{RingDescriptor, RingElement, RingError};

/// Default cap on the number of maps `enumerate_omega` will agree to yield.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LipschitzError {
    #[error("enumeration of {cardinality} maps exceeds cap {cap}")]
    EnumerationTooLarge { cardinality: BigUint, cap: u64 },
    #[error("value table has {got} entries, expected {expected}")]
    WrongValueCount { got: usize, expected: usize },
    #[error("layer table for level {level} has {got} digit entries, expected {expected}")]
    WrongLayerShape {
        level: u32,
        got: usize,
        expected: usize,
    },
    #[error("cannot parse map CSV: {0}")]
    Parse(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Projective(#[from] ProjectiveError),
}

impl From<io::Error> for LipschitzError {
    fn from(e: io::Error) -> Self {
        LipschitzError::Io(e.to_string())
    }
}

pub type LipschitzResult<T> = Result<T, LipschitzError>;

/// Shared geometry for one `(ring, d)`: the top-level space plus, for each
/// lower level, the index of every top point's specialization.
#[derive(Debug, Clone)]
struct LayerShape {
    space: ProjectiveSpace,
    /// Cardinality of `P^{d-1}(R_i)` for `i = 1..=n` (index `i-1`).
    cards: Vec<u64>,
    /// `spec_idx[i-1][top]` = enumeration index at level `i` of the
    /// specialization of top point `top`; level `n` stores the identity.
    spec_idx: Vec<Vec<u32>>,
}

impl LayerShape {
    fn new(ring: RingDescriptor, d: usize) -> LipschitzResult<Self> {
        let space = ProjectiveSpace::new(ring, d)?;
        let n = ring.n();
        let top_card = space.cardinality();
        if top_card > u32::MAX as u64 {
            return Err(ProjectiveError::SpaceTooLarge.into());
        }
        let mut cards = Vec::with_capacity(n as usize);
        let mut spec_idx = Vec::with_capacity(n as usize);
        for i in 1..=n {
            let low = space.at_level(i)?;
            cards.push(low.cardinality());
            let mut table = Vec::with_capacity(top_card as usize);
            for point in space.iter() {
                let idx = low.point_index(&point.specialize(i)?)?;
                table.push(idx as u32);
            }
            spec_idx.push(table);
        }
        Ok(Self {
            space,
            cards,
            spec_idx,
        })
    }

    fn ring(&self) -> &RingDescriptor {
        self.space.ring()
    }

    fn d(&self) -> usize {
        self.space.dim()
    }

    /// Total number of free digits across all layer tables.
    fn digit_count(&self) -> u64 {
        self.cards.iter().sum::<u64>() * self.d() as u64
    }

    /// Packs layer tables (level-major, point-major, coord-minor digits)
    /// into per-point packed values of the resulting map.
    fn assemble(&self, tables: &[Vec<u64>]) -> Vec<u64> {
        let d = self.d();
        let p = self.ring().p();
        let n = self.ring().n() as usize;
        debug_assert_eq!(tables.len(), n);
        let top_card = self.space.cardinality() as usize;
        let mut packed = vec![0u64; top_card * d];
        let mut scale = 1u64;
        for (table, spec) in tables.iter().zip(&self.spec_idx) {
            for top in 0..top_card {
                let low = spec[top] as usize;
                for c in 0..d {
                    packed[top * d + c] += table[low * d + c] * scale;
                }
            }
            scale *= p;
        }
        packed
    }

    /// For each level `i`, one top-point index specializing to each level-`i`
    /// point (used to read layer digits back out of a map).
    fn representatives(&self, level: u32) -> Vec<u32> {
        let card = self.cards[level as usize - 1] as usize;
        let mut reps = vec![u32::MAX; card];
        for (top, &low) in self.spec_idx[level as usize - 1].iter().enumerate() {
            if reps[low as usize] == u32::MAX {
                reps[low as usize] = top as u32;
            }
        }
        reps
    }
}

/// A map `P^{d-1}(R_n) -> R_n^d` tabulated in enumeration order:
/// `value(i)` is the image of `ProjectiveSpace::point_at(i)`.
///
/// The type stores arbitrary value tables; membership in the 1-Lipschitz
/// space is a property checked by [`LipschitzMap::validate`] and guaranteed
/// by the constructors that go through layer tables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LipschitzMap {
    ring: RingDescriptor,
    d: usize,
    values: Vec<RingElement>,
}

impl LipschitzMap {
    /// Wraps an explicit value table (no Lipschitz check; see `validate`).
    /// `values` is flat, point-major: `values[i*d + c]`.
    pub fn from_values(
        ring: RingDescriptor,
        d: usize,
        values: Vec<RingElement>,
    ) -> LipschitzResult<Self> {
        let space = ProjectiveSpace::new(ring, d)?;
        let expected = space.cardinality() as usize * d;
        if values.len() != expected {
            return Err(LipschitzError::WrongValueCount {
                got: values.len(),
                expected,
            });
        }
        for v in &values {
            if v.ring() != &ring {
                return Err(RingError::MixedRings(ring, *v.ring()).into());
            }
        }
        Ok(Self { ring, d, values })
    }

    /// Builds the map with digit tables `(g_1, ..., g_n)`; `layers[i-1]` is
    /// flat point-major/coord-minor over `P^{d-1}(R_i)` with digit entries.
    /// Every such table tuple yields a valid 1-Lipschitz map.
    pub fn from_layers(
        ring: RingDescriptor,
        d: usize,
        layers: &[Vec<u64>],
    ) -> LipschitzResult<Self> {
        let shape = LayerShape::new(ring, d)?;
        if layers.len() != ring.n() as usize {
            return Err(LipschitzError::WrongLayerShape {
                level: layers.len() as u32,
                got: layers.len(),
                expected: ring.n() as usize,
            });
        }
        for (i, table) in layers.iter().enumerate() {
            let expected = shape.cards[i] as usize * d;
            if table.len() != expected {
                return Err(LipschitzError::WrongLayerShape {
                    level: i as u32 + 1,
                    got: table.len(),
                    expected,
                });
            }
            for &digit in table {
                if digit >= ring.p() {
                    return Err(RingError::DigitOutOfRange {
                        digit,
                        p: ring.p(),
                    }
                    .into());
                }
            }
        }
        let packed = shape.assemble(layers);
        let values = packed
            .into_iter()
            .map(|v| ring.element(v).expect("digit-bounded"))
            .collect();
        Ok(Self { ring, d, values })
    }

    pub fn ring(&self) -> &RingDescriptor {
        &self.ring
    }

    /// Number of homogeneous coordinates `d` of the domain.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of tabulated points, `Card P^{d-1}(R_n)`.
    pub fn num_points(&self) -> usize {
        self.values.len() / self.d
    }

    /// Image of the point with enumeration index `i`.
    pub fn value(&self, i: usize) -> &[RingElement] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[RingElement] {
        &self.values
    }

    /// Checks the 1-Lipschitz condition `f(a) = f(b) mod pi^{v_n(a,b)}`
    /// over all point pairs. Quadratic in the space cardinality.
    pub fn validate(&self) -> bool {
        let space = ProjectiveSpace::new(self.ring, self.d).expect("valid by construction");
        let points: Vec<ProjectivePoint> = space.iter().collect();
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let v = points[i]
                    .valuation_distance(&points[j])
                    .expect("same space");
                if v == 0 {
                    continue;
                }
                let (a, b) = (self.value(i), self.value(j));
                for c in 0..self.d {
                    let diff = a[c].sub(&b[c]).expect("same ring");
                    if diff.valuation() < v {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Digit tables `(g_1, ..., g_n)` of the map; inverse of `from_layers`
    /// for 1-Lipschitz maps (for invalid tables the result depends on the
    /// chosen representatives).
    pub fn layers(&self) -> Vec<Vec<u64>> {
        let shape = LayerShape::new(self.ring, self.d).expect("valid by construction");
        let n = self.ring.n();
        let mut out = Vec::with_capacity(n as usize);
        for i in 1..=n {
            let reps = shape.representatives(i);
            let mut table = Vec::with_capacity(reps.len() * self.d);
            for &top in &reps {
                for c in 0..self.d {
                    table.push(self.value(top as usize)[c].digit(i - 1));
                }
            }
            out.push(table);
        }
        out
    }

    /// Pointwise sum; the 1-Lipschitz space is closed under addition.
    pub fn add(&self, other: &Self) -> LipschitzResult<Self> {
        if self.ring != other.ring {
            return Err(RingError::MixedRings(self.ring, other.ring).into());
        }
        if self.d != other.d || self.values.len() != other.values.len() {
            return Err(LipschitzError::WrongValueCount {
                got: other.values.len(),
                expected: self.values.len(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.add(b).expect("same ring"))
            .collect();
        Ok(Self {
            ring: self.ring,
            d: self.d,
            values,
        })
    }

    /// Projection onto the level-`m` map space: keep the first `m` digit
    /// tables. For 1-Lipschitz maps this is `value(rep) mod pi^m` for any
    /// representative and commutes with addition.
    pub fn project(&self, m: u32) -> LipschitzResult<Self> {
        let target = self.ring.at_level(m)?;
        let shape = LayerShape::new(self.ring, self.d)?;
        let reps = shape.representatives(m);
        let mut values = Vec::with_capacity(reps.len() * self.d);
        for &top in &reps {
            for c in 0..self.d {
                values.push(self.value(top as usize)[c].reduce_level(m)?);
            }
        }
        LipschitzMap::from_values(target, self.d, values)
    }

    /// CSV rows `index,point,value_1,...,value_d` after `# ring = ...` /
    /// `# d = ...` (and optional `# seed = ...`) comment headers.
    pub fn write_csv<W: Write>(&self, w: &mut W, seed: Option<u64>) -> LipschitzResult<()> {
        let space = ProjectiveSpace::new(self.ring, self.d)?;
        writeln!(w, "# ring = {}", self.ring)?;
        writeln!(w, "# d = {}", self.d)?;
        if let Some(seed) = seed {
            writeln!(w, "# seed = {seed}")?;
        }
        write!(w, "index,point")?;
        for c in 1..=self.d {
            write!(w, ",value_{c}")?;
        }
        writeln!(w)?;
        for i in 0..self.num_points() {
            let point = space.point_at(i as u64)?;
            write!(w, "{i},{point}")?;
            for c in 0..self.d {
                write!(w, ",{}", self.value(i)[c])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads the `write_csv` format back.
    pub fn read_csv<R: BufRead>(r: &mut R) -> LipschitzResult<Self> {
        let mut ring: Option<RingDescriptor> = None;
        let mut d: Option<usize> = None;
        let mut values: Vec<RingElement> = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("ring = ") {
                    ring = Some(v.parse()?);
                } else if let Some(v) = rest.strip_prefix("d = ") {
                    d = Some(
                        v.parse()
                            .map_err(|_| LipschitzError::Parse("bad d header".into()))?,
                    );
                }
                continue;
            }
            if line.starts_with("index,") {
                continue;
            }
            let ring = ring.ok_or_else(|| {
                LipschitzError::Parse("value row before `# ring = ...` header".into())
            })?;
            let d =
                d.ok_or_else(|| LipschitzError::Parse("value row before `# d = ...` header".into()))?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 2 {
                return Err(LipschitzError::Parse(format!(
                    "expected {} fields, got {}",
                    d + 2,
                    fields.len()
                )));
            }
            for field in &fields[2..] {
                values.push(ring.parse_element(field)?);
            }
        }
        let ring = ring.ok_or_else(|| LipschitzError::Parse("missing `# ring = ...`".into()))?;
        let d = d.ok_or_else(|| LipschitzError::Parse("missing `# d = ...`".into()))?;
        LipschitzMap::from_values(ring, d, values)
    }
}

/// Draws one uniform digit in `[0, p)` from 128 random bits (first call is
/// the low half). The modulo bias is at most `p / 2^128`, far below any
/// observable level; in exchange the consumption pattern is fixed, which
/// keeps sampling reproducible.
fn draw_digit<R: RngCore + ?Sized>(rng: &mut R, p: u64) -> u64 {
    let lo = rng.next_u64() as u128;
    let hi = rng.next_u64() as u128;
    ((hi << 64 | lo) % p as u128) as u64
}

/// Uniform sampler over the 1-Lipschitz space for one `(ring, d)`,
/// precomputing the layer geometry once.
///
/// Draw order is fixed: levels `1..=n`, within a level the points of
/// `P^{d-1}(R_i)` in enumeration order, within a point the `d` coordinates;
/// one digit ([`draw_digit`]) per slot.
#[derive(Debug, Clone)]
pub struct MapSampler {
    shape: LayerShape,
}

impl MapSampler {
    pub fn new(ring: RingDescriptor, d: usize) -> LipschitzResult<Self> {
        Ok(Self {
            shape: LayerShape::new(ring, d)?,
        })
    }

    pub fn ring(&self) -> &RingDescriptor {
        self.shape.ring()
    }

    pub fn dim(&self) -> usize {
        self.shape.d()
    }

    /// Number of random digits consumed per sample.
    pub fn digits_per_sample(&self) -> u64 {
        self.shape.digit_count()
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> LipschitzMap {
        let ring = *self.shape.ring();
        let p = ring.p();
        let d = self.shape.d();
        let tables: Vec<Vec<u64>> = self
            .shape
            .cards
            .iter()
            .map(|&card| (0..card as usize * d).map(|_| draw_digit(rng, p)).collect())
            .collect();
        let packed = self.shape.assemble(&tables);
        let values = packed
            .into_iter()
            .map(|v| ring.element(v).expect("digit-bounded"))
            .collect();
        LipschitzMap {
            ring,
            d,
            values,
        }
    }
}

/// One uniform draw; convenience wrapper when no sampler reuse is needed.
pub fn random_map<R: RngCore + ?Sized>(
    ring: RingDescriptor,
    d: usize,
    rng: &mut R,
) -> LipschitzResult<LipschitzMap> {
    Ok(MapSampler::new(ring, d)?.sample(rng))
}

/// `Card` of the 1-Lipschitz space: `q^(d * (card_1 + ... + card_n))`, for
/// any base `q >= 2`.
pub fn omega_cardinality(q: u64, d: u32, n: u32) -> LipschitzResult<BigUint> {
    let mut exponent = BigUint::from(0u32);
    for i in 1..=n {
        exponent += crate::projective::projective_cardinality(q, d, i)?;
    }
    exponent *= BigUint::from(d);
    Ok(big_pow(&BigUint::from(q), &exponent))
}

/// `base^exp` for big exponents by square-and-multiply.
fn big_pow(base: &BigUint, exp: &BigUint) -> BigUint {
    use num_traits::Zero;
    let mut result = BigUint::from(1u32);
    let mut base = base.clone();
    let mut exp = exp.clone();
    let two = BigUint::from(2u32);
    while !exp.is_zero() {
        if (&exp % &two) == BigUint::from(1u32) {
            result *= &base;
        }
        exp /= &two;
        if !exp.is_zero() {
            base = &base * &base;
        }
    }
    result
}

/// Exhaustive enumeration of the 1-Lipschitz space in odometer order over
/// the layer digits (the zero map comes first). Refuses spaces larger than
/// the cap; see [`DEFAULT_ENUMERATION_CAP`].
pub fn enumerate_omega(
    ring: RingDescriptor,
    d: usize,
) -> LipschitzResult<OmegaEnumeration> {
    enumerate_omega_with_cap(ring, d, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_omega_with_cap(
    ring: RingDescriptor,
    d: usize,
    cap: u64,
) -> LipschitzResult<OmegaEnumeration> {
    let cardinality = omega_cardinality(ring.p(), d as u32, ring.n())?;
    if cardinality > BigUint::from(cap) {
        return Err(LipschitzError::EnumerationTooLarge { cardinality, cap });
    }
    let shape = LayerShape::new(ring, d)?;
    let tables: Vec<Vec<u64>> = shape
        .cards
        .iter()
        .map(|&card| vec![0u64; card as usize * d])
        .collect();
    Ok(OmegaEnumeration {
        shape,
        tables,
        done: false,
    })
}

#[derive(Debug)]
pub struct OmegaEnumeration {
    shape: LayerShape,
    /// Current layer digits; advanced like an odometer, level 1 fastest.
    tables: Vec<Vec<u64>>,
    done: bool,
}

impl Iterator for OmegaEnumeration {
    type Item = LipschitzMap;

    fn next(&mut self) -> Option<LipschitzMap> {
        if self.done {
            return None;
        }
        let ring = *self.shape.ring();
        let packed = self.shape.assemble(&self.tables);
        let values = packed
            .into_iter()
            .map(|v| ring.element(v).expect("digit-bounded"))
            .collect();
        let item = LipschitzMap {
            ring,
            d: self.shape.d(),
            values,
        };
        // Advance the odometer.
        let p = ring.p();
        self.done = true;
        'carry: for table in self.tables.iter_mut() {
            for digit in table.iter_mut() {
                *digit += 1;
                if *digit < p {
                    self.done = false;
                    break 'carry;
                }
                *digit = 0;
            }
        }
        Some(item)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::RingFamily;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn zp(p: u64, n: u32) -> RingDescriptor {
        RingDescriptor::new(RingFamily::Padic, p, n).unwrap()
    }

    fn fpt(p: u64, n: u32) -> RingDescriptor {
        RingDescriptor::new(RingFamily::Series, p, n).unwrap()
    }

    fn zero_map(ring: RingDescriptor, d: usize) -> LipschitzMap {
        let space = ProjectiveSpace::new(ring, d).unwrap();
        let values = vec![ring.zero(); space.cardinality() as usize * d];
        LipschitzMap::from_values(ring, d, values).unwrap()
    }

    #[test]
    fn zero_map_validates() {
        for ring in [zp(2, 2), fpt(3, 2)] {
            for d in [2, 3] {
                assert!(zero_map(ring, d).validate());
            }
        }
    }

    #[test]
    fn explicit_violation_detected() {
        // Points 0 and 1 of P^1(Z/4) are [1:0] and [1:2], at distance 1;
        // assigning values that differ in the constant digit breaks the
        // Lipschitz condition.
        let ring = zp(2, 2);
        let mut values = vec![ring.zero(); 12];
        values[2] = ring.element(1).unwrap(); // f(point 1) = (1, 0)
        let map = LipschitzMap::from_values(ring, 2, values).unwrap();
        assert!(!map.validate());
    }

    #[test]
    fn any_values_validate_at_level_one() {
        // At n = 1 distinct points are at distance 0, so the space is all
        // of (R_1^d)^points.
        let ring = zp(3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let space = ProjectiveSpace::new(ring, 2).unwrap();
            let values: Vec<RingElement> = (0..space.cardinality() * 2)
                .map(|_| ring.random_element(&mut rng))
                .collect();
            let map = LipschitzMap::from_values(ring, 2, values).unwrap();
            assert!(map.validate());
        }
    }

    #[test]
    fn sampled_maps_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for ring in [zp(2, 3), fpt(2, 3), zp(3, 2), fpt(3, 2)] {
            for d in [2usize, 3] {
                let sampler = MapSampler::new(ring, d).unwrap();
                for _ in 0..25 {
                    let map = sampler.sample(&mut rng);
                    assert!(map.validate(), "{ring} d={d}");
                    assert_eq!(map.num_points() as u64,
                        ProjectiveSpace::new(ring, d).unwrap().cardinality());
                }
            }
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let ring = zp(2, 3);
        let sampler = MapSampler::new(ring, 2).unwrap();
        let map1 = sampler.sample(&mut ChaCha8Rng::seed_from_u64(123));
        let map2 = sampler.sample(&mut ChaCha8Rng::seed_from_u64(123));
        assert_eq!(map1, map2);
        let map3 = sampler.sample(&mut ChaCha8Rng::seed_from_u64(124));
        assert_ne!(map1, map3);
    }

    /// Critical value of the chi-square distribution with 63 degrees of
    /// freedom at the 1 - 1e-6 quantile (Wilson-Hilferty approximation).
    const CHI2_63_CRIT: f64 = 131.8;

    fn map_class_index(map: &LipschitzMap) -> usize {
        // Injective encoding of a level-1 map over P^1(F_2): 6 values in
        // [0, 2) per digitless... at n = 1 each value is one digit.
        let mut idx = 0usize;
        for v in map.values() {
            idx = idx * 2 + v.packed() as usize;
        }
        idx
    }

    #[test]
    fn sampler_is_uniform_at_small_parameters() {
        // 64 equally likely maps at (p, d, n) = (2, 2, 1).
        let ring = zp(2, 1);
        let sampler = MapSampler::new(ring, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 64_000usize;
        let mut counts = [0u64; 64];
        for _ in 0..draws {
            counts[map_class_index(&sampler.sample(&mut rng))] += 1;
        }
        let expected = draws as f64 / 64.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let dev = c as f64 - expected;
                dev * dev / expected
            })
            .sum();
        assert!(chi2 < CHI2_63_CRIT, "chi2 = {chi2}");
    }

    #[test]
    fn projection_of_uniform_is_uniform() {
        // Project level-2 draws to level 1 and repeat the uniformity check.
        let ring = zp(2, 2);
        let sampler = MapSampler::new(ring, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 64_000usize;
        let mut counts = [0u64; 64];
        for _ in 0..draws {
            let map = sampler.sample(&mut rng).project(1).unwrap();
            counts[map_class_index(&map)] += 1;
        }
        let expected = draws as f64 / 64.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let dev = c as f64 - expected;
                dev * dev / expected
            })
            .sum();
        assert!(chi2 < CHI2_63_CRIT, "chi2 = {chi2}");
    }

    #[test]
    fn omega_cardinality_examples() {
        assert_eq!(omega_cardinality(2, 2, 1).unwrap(), BigUint::from(64u32));
        assert_eq!(
            omega_cardinality(2, 2, 2).unwrap(),
            BigUint::from(1u32) << 18
        );
        assert_eq!(
            omega_cardinality(2, 3, 1).unwrap(),
            BigUint::from(1u32) << 21
        );
        assert_eq!(omega_cardinality(3, 2, 1).unwrap(), BigUint::from(6561u32));
        // Closed form: exponent d*(q^d-1)/(q-1) * (q^{n(d-1)}-1)/(q^{d-1}-1).
        let got = omega_cardinality(2, 2, 5).unwrap();
        assert_eq!(got, big_pow(&BigUint::from(2u32), &BigUint::from(2u32 * 3 * 31)));
    }

    #[test]
    fn enumeration_is_complete_and_valid() {
        let ring = zp(2, 1);
        let maps: Vec<LipschitzMap> = enumerate_omega(ring, 2).unwrap().collect();
        assert_eq!(maps.len(), 64);
        let distinct: HashSet<Vec<u64>> = maps
            .iter()
            .map(|m| m.values().iter().map(|v| v.packed()).collect())
            .collect();
        assert_eq!(distinct.len(), 64);
        assert!(maps.iter().all(|m| m.validate()));
        // The zero map comes first.
        assert!(maps[0].values().iter().all(|v| v.is_zero()));
    }

    #[test]
    fn enumeration_level_two_count_and_distinctness() {
        let ring = zp(2, 2);
        let mut distinct: HashSet<Vec<u64>> = HashSet::new();
        let mut count = 0u64;
        for map in enumerate_omega(ring, 2).unwrap() {
            distinct.insert(map.values().iter().map(|v| v.packed()).collect());
            count += 1;
        }
        assert_eq!(count, 1 << 18);
        assert_eq!(distinct.len(), 1 << 18);
    }

    #[test]
    fn enumeration_cap_enforced() {
        let err = enumerate_omega(zp(2, 5), 2).unwrap_err();
        assert!(matches!(err, LipschitzError::EnumerationTooLarge { .. }));
        let err = enumerate_omega_with_cap(zp(2, 2), 2, 1000).unwrap_err();
        assert!(matches!(
            err,
            LipschitzError::EnumerationTooLarge { cap: 1000, .. }
        ));
    }

    #[test]
    fn layers_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for ring in [zp(2, 3), fpt(3, 2)] {
            for d in [2usize, 3] {
                let sampler = MapSampler::new(ring, d).unwrap();
                for _ in 0..10 {
                    let map = sampler.sample(&mut rng);
                    let layers = map.layers();
                    assert_eq!(layers.len(), ring.n() as usize);
                    let rebuilt = LipschitzMap::from_layers(ring, d, &layers).unwrap();
                    assert_eq!(rebuilt, map);
                }
            }
        }
    }

    #[test]
    fn from_layers_builds_expected_values() {
        // g_1 sends [1:0] to (0,1) and the rest to 0; g_2 sends [1:0] to
        // (1,0), [1:2] to (0,1), the rest to 0. Then
        // f([1:0]@2) = (0,1) + 2*(1,0) = (2,1) and
        // f([1:2]@2) = (0,1) + 2*(0,1) = (0,3).
        let ring = zp(2, 2);
        let g1 = vec![0, 1, 0, 0, 0, 0];
        let mut g2 = vec![0u64; 12];
        g2[0] = 1; // point [1:0], coord 1
        g2[3] = 1; // point [1:2], coord 2
        let map = LipschitzMap::from_layers(ring, 2, &[g1, g2]).unwrap();
        assert!(map.validate());
        let packed: Vec<u64> = map.values().iter().map(|v| v.packed()).collect();
        assert_eq!(&packed[0..2], &[2, 1]);
        assert_eq!(&packed[2..4], &[0, 3]);

        // Projection keeps the first table: every level-1 value is the
        // mod-2 reduction, consistent across the fiber.
        let low = map.project(1).unwrap();
        let packed: Vec<u64> = low.values().iter().map(|v| v.packed()).collect();
        assert_eq!(packed, vec![0, 1, 0, 0, 0, 0]);
    }

    #[test]
    fn projection_is_linear_and_identity_at_top() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ring = zp(2, 3);
        let sampler = MapSampler::new(ring, 2).unwrap();
        for _ in 0..10 {
            let f = sampler.sample(&mut rng);
            let g = sampler.sample(&mut rng);
            assert_eq!(f.project(ring.n()).unwrap(), f);
            for m in 1..=ring.n() {
                let lhs = f.add(&g).unwrap().project(m).unwrap();
                let rhs = f.project(m).unwrap().add(&g.project(m).unwrap()).unwrap();
                assert_eq!(lhs, rhs);
                assert!(f.project(m).unwrap().validate());
            }
        }
    }

    #[test]
    fn from_layers_rejects_bad_shapes() {
        let ring = zp(2, 2);
        assert!(matches!(
            LipschitzMap::from_layers(ring, 2, &[vec![0; 6]]),
            Err(LipschitzError::WrongLayerShape { .. })
        ));
        assert!(matches!(
            LipschitzMap::from_layers(ring, 2, &[vec![0; 5], vec![0; 12]]),
            Err(LipschitzError::WrongLayerShape { .. })
        ));
        assert!(matches!(
            LipschitzMap::from_layers(ring, 2, &[vec![2, 0, 0, 0, 0, 0], vec![0; 12]]),
            Err(LipschitzError::Ring(RingError::DigitOutOfRange { .. }))
        ));
        let values = vec![ring.zero(); 11];
        assert!(matches!(
            LipschitzMap::from_values(ring, 2, values),
            Err(LipschitzError::WrongValueCount {
                got: 11,
                expected: 12
            })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let ring = fpt(2, 2);
        let sampler = MapSampler::new(ring, 2).unwrap();
        let map = sampler.sample(&mut ChaCha8Rng::seed_from_u64(11));
        let mut buf = Vec::new();
        map.write_csv(&mut buf, Some(11)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# ring = series:p=2,n=2\n# d = 2\n# seed = 11\n"));
        assert!(text.contains("index,point,value_1,value_2"));
        let parsed = LipschitzMap::read_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(parsed, map);
    }

    #[test]
    fn draw_digit_uses_two_words() {
        // The contract is two next_u64 calls per digit, low word first.
        struct Counter(u64);
        impl RngCore for Counter {
            fn next_u32(&mut self) -> u32 {
                self.next_u64() as u32
            }
            fn next_u64(&mut self) -> u64 {
                self.0 += 1;
                self.0
            }
            fn fill_bytes(&mut self, _dest: &mut [u8]) {
                unimplemented!()
            }
        }
        let mut rng = Counter(0);
        let _ = draw_digit(&mut rng, 3);
        assert_eq!(rng.0, 2);
        // (2 << 64 | 1) mod 5: the high word carries weight 2^64 mod 5 = 1.
        let mut rng = Counter(0);
        let d = draw_digit(&mut rng, 5);
        assert_eq!(d, ((2u128 << 64 | 1) % 5) as u64);
    }
}
