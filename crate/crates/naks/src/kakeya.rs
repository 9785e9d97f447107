//! Kakeya-type sets: unions of lines in `R_n^d`, one per projective
//! direction, with exact cardinalities and measures.
//!
//! For a map `f` on `P^{d-1}(R_n)` the set is
//! `N(f) = union over directions a of S_a(f)`, where the line (segment)
//! `S_a(f) = { t * can(a) + f(a) : t in R_n }` passes through `f(a)` with
//! direction the canonical representative of `a`. Cells of `R_n^d` are
//! indexed by `sum_c packed(x_c) * (p^n)^c` (coordinate 0 least
//! significant) into a dense bit array, so cardinalities and measures are
//! exact integers and rationals, never floating point.
//!
//! Shorter segments `{ t * can(a) + base : v(t) >= l }` with `q^{n-l}`
//! cells and their pairwise intersections are provided for the
//! combinatorial identities; intersection cardinalities are computed from
//! actual cell sets, not from a formula, so they can serve as an oracle.

use std::io::{Read, Write};

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::lipschitz::LipschitzMap;
use crate::projective::{ProjectiveError, ProjectivePoint, ProjectiveSpace};
use crate::ring::{
    self, RingDescriptor, RingElement, RingError, RingFamily,
};

/// Default cap on bit-array storage (256 MiB = 2^31 cells).
pub const DEFAULT_CELL_CAP_BYTES: u64 = 1 << 28;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KakeyaError {
    #[error("cell array of {cells} cells exceeds the {cap_bytes}-byte cap")]
    SetTooLarge { cells: u128, cap_bytes: u64 },
    #[error("direction subset is empty")]
    EmptySubset,
    #[error("bad set file: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Projective(#[from] ProjectiveError),
}

impl From<std::io::Error> for KakeyaError {
    fn from(e: std::io::Error) -> Self {
        KakeyaError::Io(e.to_string())
    }
}

pub type KakeyaResult<T> = Result<T, KakeyaError>;

/// A subset of the cells of `R_n^d` as a dense bit array with cached
/// cardinality. Construction never produces more than the builder's
/// byte cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KakeyaSet {
    ring: RingDescriptor,
    d: usize,
    words: Vec<u64>,
    cells: u64,
    card: u64,
}

impl KakeyaSet {
    /// Builds `N(f)` for a map, with the default storage cap.
    pub fn build(map: &LipschitzMap) -> KakeyaResult<Self> {
        KakeyaBuilder::new(*map.ring(), map.dim())?.build(map)
    }

    pub fn build_with_cap(map: &LipschitzMap, cap_bytes: u64) -> KakeyaResult<Self> {
        KakeyaBuilder::with_cap(*map.ring(), map.dim(), cap_bytes)?.build(map)
    }

    /// The empty subset of `R_n^d` (useful as a neutral element and for
    /// format tests; `build` never returns it).
    pub fn empty(ring: RingDescriptor, d: usize) -> KakeyaResult<Self> {
        let cells = checked_cell_count(&ring, d, DEFAULT_CELL_CAP_BYTES)?;
        Ok(Self {
            ring,
            d,
            words: vec![0u64; cells.div_ceil(64) as usize],
            cells,
            card: 0,
        })
    }

    pub fn ring(&self) -> &RingDescriptor {
        &self.ring
    }

    /// Number of coordinates `d` of the ambient module.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Total number of cells, `p^{n d}`.
    pub fn cell_count(&self) -> u64 {
        self.cells
    }

    /// Number of occupied cells.
    pub fn cardinality(&self) -> u64 {
        self.card
    }

    /// Exact normalized measure `cardinality / p^{n d}`.
    pub fn measure(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.card),
            BigInt::from(self.ring.size()).pow(self.d as u32),
        )
    }

    pub fn contains_cell(&self, index: u64) -> bool {
        debug_assert!(index < self.cells);
        self.words[(index / 64) as usize] >> (index % 64) & 1 == 1
    }

    /// Cell index of a coordinate tuple.
    pub fn cell_index(&self, coords: &[RingElement]) -> KakeyaResult<u64> {
        if coords.len() != self.d {
            return Err(ProjectiveError::DimensionMismatch {
                got: coords.len(),
                expected: self.d,
            }
            .into());
        }
        let mut idx = 0u64;
        for c in coords.iter().rev() {
            if c.ring() != &self.ring {
                return Err(RingError::MixedRings(self.ring, *c.ring()).into());
            }
            idx = idx * self.ring.size() + c.packed();
        }
        Ok(idx)
    }

    pub fn contains(&self, coords: &[RingElement]) -> KakeyaResult<bool> {
        Ok(self.contains_cell(self.cell_index(coords)?))
    }

    /// Packed coordinates of a cell index (inverse of `cell_index`).
    pub fn cell_coords(&self, index: u64) -> Vec<u64> {
        let mut idx = index;
        let mut out = Vec::with_capacity(self.d);
        for _ in 0..self.d {
            out.push(idx % self.ring.size());
            idx /= self.ring.size();
        }
        out
    }

    /// Occupied cell indices in increasing order.
    pub fn iter_cells(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(move |(w, &word)| {
            (0..64u64)
                .filter(move |b| word >> b & 1 == 1)
                .map(move |b| w as u64 * 64 + b)
        })
    }

    /// Raw bit-array format: 16-byte header (magic `NAKS`, then `p`, `n`,
    /// `d` as little-endian `u32`), then the cells as a little-endian
    /// bitstream (cell `8j + i` is bit `i` of payload byte `j`).
    pub fn write_bits<W: Write>(&self, w: &mut W) -> KakeyaResult<()> {
        if self.ring.p() > u32::MAX as u64 {
            return Err(KakeyaError::Format(
                "characteristic too large for the file header".into(),
            ));
        }
        w.write_all(b"NAKS")?;
        w.write_all(&(self.ring.p() as u32).to_le_bytes())?;
        w.write_all(&self.ring.n().to_le_bytes())?;
        w.write_all(&(self.d as u32).to_le_bytes())?;
        let bytes = self.cells.div_ceil(8) as usize;
        let mut payload = vec![0u8; bytes];
        for (j, chunk) in payload.chunks_mut(8).enumerate() {
            let word = self.words[j].to_le_bytes();
            chunk.copy_from_slice(&word[..chunk.len()]);
        }
        w.write_all(&payload)?;
        Ok(())
    }

    /// Reads the `write_bits` format. The header does not record the ring
    /// family (the bit array is family-independent), so the caller picks
    /// the family to attach.
    pub fn read_bits<R: Read>(r: &mut R, family: RingFamily) -> KakeyaResult<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|_| KakeyaError::Format("truncated header".into()))?;
        if &header[0..4] != b"NAKS" {
            return Err(KakeyaError::Format("bad magic".into()));
        }
        let p = u32::from_le_bytes(header[4..8].try_into().unwrap()) as u64;
        let n = u32::from_le_bytes(header[8..12].try_into().unwrap());
        let d = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        if d < 2 {
            return Err(ProjectiveError::InvalidDimension(d).into());
        }
        let ring = RingDescriptor::new(family, p, n)?;
        let cells = checked_cell_count(&ring, d, DEFAULT_CELL_CAP_BYTES)?;
        let bytes = cells.div_ceil(8) as usize;
        let mut payload = vec![0u8; bytes];
        r.read_exact(&mut payload)
            .map_err(|_| KakeyaError::Format("truncated payload".into()))?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(KakeyaError::Format("trailing bytes after payload".into()));
        }
        let mut words = vec![0u64; cells.div_ceil(64) as usize];
        for (j, chunk) in payload.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            words[j] = u64::from_le_bytes(buf);
        }
        // Bits beyond the cell count must be clear.
        let tail_bits = cells % 64;
        if tail_bits != 0 {
            let last = words.len() - 1;
            if words[last] >> tail_bits != 0 {
                return Err(KakeyaError::Format("nonzero padding bits".into()));
            }
        }
        let card = words.iter().map(|w| w.count_ones() as u64).sum();
        Ok(Self {
            ring,
            d,
            words,
            cells,
            card,
        })
    }

    /// CSV listing of occupied cells (`c_1,...,c_d` digit strings, one row
    /// per cell in index order) — readable only for tiny sets.
    pub fn write_cells_csv<W: Write>(&self, w: &mut W) -> KakeyaResult<()> {
        for c in 1..=self.d {
            write!(w, "{}c_{c}", if c > 1 { "," } else { "" })?;
        }
        writeln!(w)?;
        for index in self.iter_cells() {
            for (c, packed) in self.cell_coords(index).into_iter().enumerate() {
                let element = self.ring.element(packed).expect("cell in range");
                write!(w, "{}{element}", if c > 0 { "," } else { "" })?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn checked_cell_count(ring: &RingDescriptor, d: usize, cap_bytes: u64) -> KakeyaResult<u64> {
    if d < 2 {
        return Err(ProjectiveError::InvalidDimension(d).into());
    }
    let cells = (0..d).try_fold(1u128, |acc, _| {
        acc.checked_mul(ring.size() as u128)
    });
    match cells {
        Some(cells) if cells.div_ceil(8) <= cap_bytes as u128 => Ok(cells as u64),
        Some(cells) => Err(KakeyaError::SetTooLarge {
            cells,
            cap_bytes,
        }),
        None => Err(KakeyaError::SetTooLarge {
            cells: u128::MAX,
            cap_bytes,
        }),
    }
}

/// Reusable builder for one `(ring, d)`: precomputes the canonical
/// direction vectors and the per-wrap step increments once, and reuses the
/// bit-array scratch across maps (samples share nothing else, so parallel
/// workers each own a builder).
#[derive(Debug, Clone)]
pub struct KakeyaBuilder {
    ring: RingDescriptor,
    d: usize,
    cells: u64,
    /// Canonical representatives, flat point-major: `directions[i*d + c]`.
    directions: Vec<u64>,
    /// `delta[k]` = ring difference between consecutive packed line
    /// parameters when digit `k` is incremented and lower digits wrap
    /// (constant 1 in the carry family).
    delta: Vec<u64>,
    words: Vec<u64>,
}

impl KakeyaBuilder {
    pub fn new(ring: RingDescriptor, d: usize) -> KakeyaResult<Self> {
        Self::with_cap(ring, d, DEFAULT_CELL_CAP_BYTES)
    }

    pub fn with_cap(ring: RingDescriptor, d: usize, cap_bytes: u64) -> KakeyaResult<Self> {
        let cells = checked_cell_count(&ring, d, cap_bytes)?;
        let space = ProjectiveSpace::new(ring, d)?;
        let mut directions = Vec::with_capacity(space.cardinality() as usize * d);
        for point in space.iter() {
            directions.extend(point.coords().iter().map(|c| c.packed()));
        }
        // delta[k] = pi^k - (p-1)(1 + pi + ... + pi^{k-1}); stepping the
        // packed parameter from ...0(p-1)...(p-1) to the next value adds
        // exactly this ring element.
        let mut delta = Vec::with_capacity(ring.n() as usize);
        let mut geom = 0u64; // 1 + pi + ... + pi^{k-1}
        for k in 0..ring.n() {
            let pi_k = ring.p().pow(k);
            let drop = ring::scalar_mul_packed(&ring, ring.p() - 1, geom);
            delta.push(ring::sub_packed(&ring, pi_k, drop));
            geom = ring::add_packed(&ring, geom, pi_k);
        }
        Ok(Self {
            ring,
            d,
            cells,
            directions,
            delta,
            words: vec![0u64; cells.div_ceil(64) as usize],
        })
    }

    pub fn ring(&self) -> &RingDescriptor {
        &self.ring
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    fn check_map(&self, map: &LipschitzMap) -> KakeyaResult<()> {
        if map.ring() != &self.ring {
            return Err(RingError::MixedRings(self.ring, *map.ring()).into());
        }
        if map.dim() != self.d {
            return Err(ProjectiveError::DimensionMismatch {
                got: map.dim(),
                expected: self.d,
            }
            .into());
        }
        Ok(())
    }

    fn mark_cells(&mut self, map: &LipschitzMap) {
        self.words.fill(0);
        let ring = self.ring;
        let d = self.d;
        let size = ring.size();
        let p = ring.p();
        let n = ring.n() as usize;
        let mut step = vec![0u64; n * d];
        let mut cur = vec![0u64; d];
        let mut odometer = vec![0u64; n];
        for (i, dir) in self.directions.chunks_exact(d).enumerate() {
            // Per-direction step vectors: step[k] = delta[k] * can(a).
            for k in 0..n {
                for c in 0..d {
                    step[k * d + c] = ring::mul_packed(&ring, self.delta[k], dir[c]);
                }
            }
            for (c, v) in map.value(i).iter().enumerate() {
                cur[c] = v.packed();
            }
            odometer.fill(0);
            loop {
                let mut idx = 0u64;
                for &coord in cur.iter().rev() {
                    idx = idx * size + coord;
                }
                self.words[(idx / 64) as usize] |= 1 << (idx % 64);
                // Advance the line parameter.
                let mut k = 0usize;
                loop {
                    if k == n {
                        break;
                    }
                    odometer[k] += 1;
                    if odometer[k] < p {
                        break;
                    }
                    odometer[k] = 0;
                    k += 1;
                }
                if k == n {
                    break;
                }
                for c in 0..d {
                    cur[c] = ring::add_packed(&ring, cur[c], step[k * d + c]);
                }
            }
        }
    }

    /// Builds the set, reusing internal scratch; the result owns a copy.
    pub fn build(&mut self, map: &LipschitzMap) -> KakeyaResult<KakeyaSet> {
        self.check_map(map)?;
        self.mark_cells(map);
        let card = self.words.iter().map(|w| w.count_ones() as u64).sum();
        Ok(KakeyaSet {
            ring: self.ring,
            d: self.d,
            words: self.words.clone(),
            cells: self.cells,
            card,
        })
    }

    /// Cardinality of `N(f)` without materializing a set (the Monte Carlo
    /// hot path).
    pub fn cardinality_of(&mut self, map: &LipschitzMap) -> KakeyaResult<u64> {
        self.check_map(map)?;
        self.mark_cells(map);
        Ok(self.words.iter().map(|w| w.count_ones() as u64).sum())
    }
}

/// Cell indices of the segment `{ t * can(a) + base : v(t) >= l }`, sorted
/// ascending. Always exactly `p^{n-l}` distinct cells (the parameter-to-cell
/// map is injective because the pivot coordinate of `can(a)` is `1`).
pub fn segment(
    a: &ProjectivePoint,
    base: &[RingElement],
    ell: u32,
) -> KakeyaResult<Vec<u64>> {
    let ring = *a.ring();
    let d = a.dim();
    if ell > ring.n() {
        return Err(RingError::InvalidLevel(ell).into());
    }
    if base.len() != d {
        return Err(ProjectiveError::DimensionMismatch {
            got: base.len(),
            expected: d,
        }
        .into());
    }
    for b in base {
        if b.ring() != &ring {
            return Err(RingError::MixedRings(ring, *b.ring()).into());
        }
    }
    let size = ring.size();
    let pi_ell = ring.p().pow(ell);
    let count = size / pi_ell;
    let mut cells = Vec::with_capacity(count as usize);
    for raw in 0..count {
        // Parameters of valuation >= l are exactly the multiples of pi^l:
        // raw * p^l is such a packed value in both families.
        let t = raw * pi_ell;
        let mut idx = 0u64;
        for c in (0..d).rev() {
            let coord = ring::add_packed(
                &ring,
                ring::mul_packed(&ring, t, a.coords()[c].packed()),
                base[c].packed(),
            );
            idx = idx * size + coord;
        }
        cells.push(idx);
    }
    cells.sort_unstable();
    debug_assert!(cells.windows(2).all(|w| w[0] < w[1]));
    Ok(cells)
}

/// Cardinality of the intersection of two level-`l` segments in distinct
/// directions, computed from the actual cell sets.
///
/// Callers must pass distinct directions (`a != b` as projective points).
pub fn segment_intersection_card(
    a: &ProjectivePoint,
    base_a: &[RingElement],
    b: &ProjectivePoint,
    base_b: &[RingElement],
    ell: u32,
) -> KakeyaResult<u64> {
    assert_ne!(a, b, "segment intersection requires distinct directions");
    let sa = segment(a, base_a, ell)?;
    let sb = segment(b, base_b, ell)?;
    Ok(sorted_intersection_count(&sa, &sb))
}

fn sorted_intersection_count(a: &[u64], b: &[u64]) -> u64 {
    let (mut i, mut j, mut count) = (0usize, 0usize, 0u64);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// `C_A(f)`: the number of cells common to every full line `S_a(f)` for
/// `a` in the subset `A`, given by enumeration indices into the direction
/// space of the map.
pub fn intersection_card(map: &LipschitzMap, subset: &[u64]) -> KakeyaResult<u64> {
    if subset.is_empty() {
        return Err(KakeyaError::EmptySubset);
    }
    let space = ProjectiveSpace::new(*map.ring(), map.dim())?;
    let mut common: Option<Vec<u64>> = None;
    for &idx in subset {
        let point = space.point_at(idx)?;
        let cells = segment(&point, map.value(idx as usize), 0)?;
        common = Some(match common {
            None => cells,
            Some(prev) => {
                let mut merged = Vec::with_capacity(prev.len().min(cells.len()));
                let (mut i, mut j) = (0usize, 0usize);
                while i < prev.len() && j < cells.len() {
                    match prev[i].cmp(&cells[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            merged.push(prev[i]);
                            i += 1;
                            j += 1;
                        }
                    }
                }
                merged
            }
        });
        if common.as_ref().is_some_and(|c| c.is_empty()) {
            break;
        }
    }
    Ok(common.expect("nonempty subset").len() as u64)
}
