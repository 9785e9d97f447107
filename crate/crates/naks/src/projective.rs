//! Projective spaces `P^{d-1}(R_n)` over truncated local rings.
//!
//! Points are classes of unit-sphere tuples (tuples with at least one unit
//! coordinate) under unit scaling. Each class has a unique canonical
//! representative: scale so that the first unit coordinate becomes `1`;
//! coordinates before that pivot are then non-units. The module provides
//!
//! * canonicalization and the pivot of a point,
//! * a total enumeration order that refines across levels: indices are
//!   sorted first by pivot, then lexicographically by digit layers
//!   (all level-0 digits, then all level-1 digits, ...), so truncating to a
//!   lower level never swaps the strict order of two indices,
//! * specialization maps `P^{d-1}(R_n) -> P^{d-1}(R_m)` for `m <= n`,
//! * the valuation metric `v_n(a, b)`: the largest `v` such that `a` and
//!   `b` coincide in `P^{d-1}(R_v)` (`0` when the pivots differ, `n` when
//!   `a = b`).

use std::fmt;

use num_bigint::BigUint;

use crate::ring::{
    self, RingDescriptor, RingElement, RingError,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProjectiveError {
    #[error("no unit coordinate: the tuple does not lie on the unit sphere")]
    NotOnSphere,
    #[error("projective points need at least 2 coordinates, got {0}")]
    InvalidDimension(usize),
    #[error("coordinate count {got} does not match space dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("point index {index} out of range (cardinality {cardinality})")]
    IndexOutOfRange { index: u64, cardinality: u64 },
    #[error("projective space too large to index in 64 bits")]
    SpaceTooLarge,
    #[error("cannot parse {0:?} as a projective point: {1}")]
    Parse(String, &'static str),
    #[error(transparent)]
    Ring(#[from] RingError),
}

pub type ProjectiveResult<T> = Result<T, ProjectiveError>;

/// A point of `P^{d-1}(R_n)`, stored as its canonical representative.
///
/// The pivot is the index of the first unit coordinate (0-based); the
/// canonical representative has `1` there and non-units before it. Equality
/// of values is exactly projective equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProjectivePoint {
    ring: RingDescriptor,
    coords: Vec<RingElement>,
    pivot: usize,
}

impl ProjectivePoint {
    /// Canonicalizes an arbitrary unit-sphere tuple. All coordinates must
    /// belong to the same ring and at least one must be a unit.
    pub fn canonicalize(coords: &[RingElement]) -> ProjectiveResult<Self> {
        if coords.len() < 2 {
            return Err(ProjectiveError::InvalidDimension(coords.len()));
        }
        let ring = *coords[0].ring();
        for c in coords {
            if c.ring() != &ring {
                return Err(RingError::MixedRings(ring, *c.ring()).into());
            }
        }
        let pivot = coords
            .iter()
            .position(|c| c.is_unit())
            .ok_or(ProjectiveError::NotOnSphere)?;
        let scale = coords[pivot].inverse()?;
        let canonical: Vec<RingElement> = coords
            .iter()
            .map(|c| c.mul(&scale).expect("same ring"))
            .collect();
        Ok(Self {
            ring,
            coords: canonical,
            pivot,
        })
    }

    pub fn ring(&self) -> &RingDescriptor {
        &self.ring
    }

    /// Number of homogeneous coordinates `d` (the space is `P^{d-1}`).
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Index of the first unit coordinate, 0-based.
    pub fn pivot(&self) -> usize {
        self.pivot
    }

    /// Canonical representative.
    pub fn coords(&self) -> &[RingElement] {
        &self.coords
    }

    /// Image in `P^{d-1}(R_m)`, `1 <= m <= n`: truncate every coordinate.
    /// Preserves canonicity and the pivot.
    pub fn specialize(&self, m: u32) -> ProjectiveResult<Self> {
        let coords: Vec<RingElement> = self
            .coords
            .iter()
            .map(|c| c.reduce_level(m))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            ring: *coords[0].ring(),
            coords,
            pivot: self.pivot,
        })
    }

    /// The valuation metric: `n` if `a = b`, otherwise the largest `v` with
    /// `specialize(a, v) = specialize(b, v)` (0 if the pivots differ).
    ///
    /// Equivalently: the minimum over coordinates of the valuation of the
    /// difference of canonical representatives.
    pub fn valuation_distance(&self, other: &Self) -> ProjectiveResult<u32> {
        if self.ring != other.ring {
            return Err(RingError::MixedRings(self.ring, other.ring).into());
        }
        if self.dim() != other.dim() {
            return Err(ProjectiveError::DimensionMismatch {
                got: other.dim(),
                expected: self.dim(),
            });
        }
        if self.pivot != other.pivot {
            return Ok(0);
        }
        let mut v = self.ring.n();
        for (a, b) in self.coords.iter().zip(&other.coords) {
            let diff = ring::sub_packed(&self.ring, a.packed(), b.packed());
            v = v.min(ring::valuation_packed(&self.ring, diff));
            if v == 0 {
                break;
            }
        }
        Ok(v)
    }

    /// Parses the `Display` form `[c_1:...:c_d]@n` against a ring.
    pub fn parse(ring: &RingDescriptor, s: &str) -> ProjectiveResult<Self> {
        let err = |why| ProjectiveError::Parse(s.to_string(), why);
        let (body, level) = s
            .strip_prefix('[')
            .and_then(|r| r.split_once(']'))
            .ok_or_else(|| err("expected `[..]@n`"))?;
        let level = level
            .strip_prefix('@')
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| err("expected `@n` level suffix"))?;
        if level != ring.n() {
            return Err(err("level suffix does not match the ring"));
        }
        let coords: Vec<RingElement> = body
            .split(':')
            .map(|part| ring.parse_element(part))
            .collect::<Result<_, _>>()?;
        Self::canonicalize(&coords)
    }
}

impl fmt::Display for ProjectivePoint {
    /// `[c_1:...:c_d]@n` with coordinates in digit-string form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ":")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]@{}", self.ring.n())
    }
}

/// `P^{d-1}(R_n)` with its enumeration order; precomputes the per-pivot
/// index blocks so `point_at` / `point_index` are O(d * n).
///
/// Index layout: points with pivot `j` occupy one contiguous block, blocks
/// ordered by `j`. Within a block the free digits form a mixed-radix number,
/// most significant first: level-0 digits of coordinates after the pivot
/// (ascending), then for each level `k >= 1` the digits of all non-pivot
/// coordinates (ascending). Truncating to level `m` keeps exactly the
/// leading slots, which is what makes the order refine across levels.
#[derive(Debug, Clone)]
pub struct ProjectiveSpace {
    ring: RingDescriptor,
    d: usize,
    /// `class_offset[j]` = first index with pivot `j`; last entry = cardinality.
    class_offset: Vec<u64>,
    /// `p^k` for `k < n`.
    powers: Vec<u64>,
}

impl ProjectiveSpace {
    pub fn new(ring: RingDescriptor, d: usize) -> ProjectiveResult<Self> {
        if d < 2 {
            return Err(ProjectiveError::InvalidDimension(d));
        }
        let p = ring.p();
        let n = ring.n();
        let mut class_offset = Vec::with_capacity(d + 1);
        let mut acc = 0u64;
        for j in 0..d as u32 {
            class_offset.push(acc);
            let exponent = (d as u32 - 1 - j) + (n - 1) * (d as u32 - 1);
            let size = p
                .checked_pow(exponent)
                .ok_or(ProjectiveError::SpaceTooLarge)?;
            acc = acc.checked_add(size).ok_or(ProjectiveError::SpaceTooLarge)?;
        }
        class_offset.push(acc);
        let powers = (0..n).map(|k| p.pow(k)).collect();
        Ok(Self {
            ring,
            d,
            class_offset,
            powers,
        })
    }

    pub fn ring(&self) -> &RingDescriptor {
        &self.ring
    }

    /// Number of homogeneous coordinates `d`.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// `q^{(d-1)(n-1)} * (q^d - 1)/(q - 1)`, guaranteed to fit `u64` here.
    pub fn cardinality(&self) -> u64 {
        self.class_offset[self.d]
    }

    /// The same space over the level-`m` truncation of the ring.
    pub fn at_level(&self, m: u32) -> ProjectiveResult<Self> {
        Self::new(self.ring.at_level(m)?, self.d)
    }

    /// Point at a given position of the enumeration order.
    pub fn point_at(&self, index: u64) -> ProjectiveResult<ProjectivePoint> {
        let cardinality = self.cardinality();
        if index >= cardinality {
            return Err(ProjectiveError::IndexOutOfRange { index, cardinality });
        }
        let pivot = (0..self.d)
            .rfind(|&j| self.class_offset[j] <= index)
            .expect("offset 0 covers index 0");
        let mut r = index - self.class_offset[pivot];
        let p = self.ring.p();
        let n = self.ring.n();
        let mut packed = vec![0u64; self.d];
        // Peel free digits least significant slot first: levels n-1 down to
        // 1 over all non-pivot coordinates (descending), then level 0 over
        // the coordinates after the pivot (descending).
        for k in (1..n).rev() {
            for c in (0..self.d).rev() {
                if c != pivot {
                    packed[c] += (r % p) * self.powers[k as usize];
                    r /= p;
                }
            }
        }
        for c in ((pivot + 1)..self.d).rev() {
            packed[c] += r % p;
            r /= p;
        }
        packed[pivot] = 1;
        let coords = packed
            .into_iter()
            .map(|v| self.ring.element(v).expect("digit-bounded"))
            .collect();
        Ok(ProjectivePoint {
            ring: self.ring,
            coords,
            pivot,
        })
    }

    /// Position of a point in the enumeration order; inverse of `point_at`.
    pub fn point_index(&self, point: &ProjectivePoint) -> ProjectiveResult<u64> {
        if point.ring != self.ring {
            return Err(RingError::MixedRings(self.ring, point.ring).into());
        }
        if point.dim() != self.d {
            return Err(ProjectiveError::DimensionMismatch {
                got: point.dim(),
                expected: self.d,
            });
        }
        let p = self.ring.p();
        let n = self.ring.n();
        let pivot = point.pivot;
        let mut acc = 0u64;
        for c in (pivot + 1)..self.d {
            acc = acc * p + point.coords[c].digit(0);
        }
        for k in 1..n {
            for (c, coord) in point.coords.iter().enumerate() {
                if c != pivot {
                    acc = acc * p + coord.digit(k);
                }
            }
        }
        Ok(self.class_offset[pivot] + acc)
    }

    /// All points in enumeration order.
    pub fn iter(&self) -> impl Iterator<Item = ProjectivePoint> + '_ {
        (0..self.cardinality()).map(move |i| self.point_at(i).expect("index in range"))
    }
}

/// `Card P^{d-1}(R_n) = q^{(d-1)(n-1)} * (1 + q + ... + q^{d-1})` as a big
/// integer, for any base `q >= 2` (no primality or size constraint).
pub fn projective_cardinality(q: u64, d: u32, n: u32) -> ProjectiveResult<BigUint> {
    if d < 2 {
        return Err(ProjectiveError::InvalidDimension(d as usize));
    }
    if q < 2 {
        return Err(RingError::NonPrimeModulus(q).into());
    }
    if n == 0 {
        return Err(RingError::InvalidLevel(0).into());
    }
    let q = BigUint::from(q);
    let mut sphere = BigUint::from(0u32);
    for i in 0..d {
        sphere += q.pow(i);
    }
    Ok(q.pow((d - 1) * (n - 1)) * sphere)
}
