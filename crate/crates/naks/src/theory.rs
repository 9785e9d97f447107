//! Closed-form expectations, height combinatorics, and lower bounds.
//!
//! Everything in this module is exact rational arithmetic unless a function
//! name says otherwise.  The central objects are:
//!
//! * the recurrence `u_0 = 1`, `u_{k+1} = 1 - (1 - u_k / q^{d-1})^{q^{d-1}}`
//!   whose value [`u_sequence`] feeds the expected covered fraction
//!   [`expected_measure`] of a random Kakeya set,
//! * [`HeightFunction`]s -- finite sequences over `[1, n]` that classify
//!   direction subsets by the ultrametric gaps between consecutive elements --
//!   together with their [`multiplicity`] statistics and signed
//!   [`weight`]/[`modified_weight`] products,
//! * counting formulas ([`count_with_height`], [`directional_mean`],
//!   [`card_fiber_b_a`]) that let the inclusion-exclusion sum
//!   [`inclusion_exclusion_mean`] and the height-sum recursion
//!   [`weighted_height_sum`] reproduce the same expectation by two
//!   independent routes,
//! * asymptotics and deterministic lower bounds ([`asymptotic_constant`],
//!   [`lower_bound_dim2`], [`lower_bound_torsion`]).

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::projective::{ProjectiveError, ProjectiveSpace};
use crate::ring::RingError;

/// Hard cap on the number of directions accepted by
/// [`inclusion_exclusion_mean`]; the sum ranges over all `2^Card - 1`
/// non-empty subsets.
pub const MAX_INCLUSION_EXCLUSION_POINTS: u64 = 20;

/// Hard cap on the number of terms evaluated by [`weighted_height_sum`].
pub const MAX_HEIGHT_SUM_TERMS: u128 = 100_000_000;

/// Errors from the exact-combinatorics layer.
#[derive(Debug, Error)]
pub enum TheoryError {
    /// A direction subset was not given in strictly increasing enumeration
    /// order.
    #[error("direction subset must be strictly increasing in enumeration order")]
    UnsortedSubset,
    /// A height value lies outside `[1, n]`.
    #[error("height value {value} outside the valid range [1, {n}]")]
    HeightOutOfRange {
        /// Offending value.
        value: u32,
        /// Level of the height function.
        n: u32,
    },
    /// The projective space has too many points to enumerate all direction
    /// subsets.
    #[error("{points} directions give too many subsets (cap: {cap} directions)")]
    TooManySubsets {
        /// Number of points in the space.
        points: u64,
        /// Maximum number of points accepted.
        cap: u64,
    },
    /// The height-sum recursion would evaluate too many terms.
    #[error("weighted height sum needs about {terms} terms (cap: {cap})")]
    SumExplosion {
        /// Estimated number of terms.
        terms: u128,
        /// Maximum number of terms evaluated.
        cap: u128,
    },
    /// A counting formula produced a non-integer; indicates an invalid input
    /// combination (or a bug -- the counts are integers for every reachable
    /// height function).
    #[error("count formula produced the non-integer {0}")]
    NonIntegralCount(String),
    /// Error from the underlying ring.
    #[error(transparent)]
    Ring(#[from] RingError),
    /// Error from the projective-space layer.
    #[error(transparent)]
    Projective(#[from] ProjectiveError),
}

fn biguint_pow(base: u64, exp: u32) -> BigUint {
    BigUint::from(base).pow(exp)
}

fn rational_from_biguint(n: BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `1 - (1 - u/a)^exp` for `u` in `[0, 1]` given in lowest terms, keeping
/// every intermediate in lowest terms without any big-integer gcd.
///
/// With `u = num/den` reduced, a common divisor of `den*a - num` and
/// `den*a` must divide `num`, hence is coprime to `den` and divides `a`;
/// one word-sized gcd against `a` therefore fully reduces the base.  Powers
/// of a reduced fraction stay reduced, and so does `(D - N)/D` for reduced
/// `N/D`.  This keeps the recurrence polynomial-time where generic
/// `BigRational` reduction would run quadratic gcds on huge integers.
fn one_minus_scaled_pow(u: &BigRational, a: u64, exp: u32) -> BigRational {
    let num = u.numer().magnitude();
    let den = u.denom().magnitude();
    let scaled_den = den * a;
    let mut base_num = &scaled_den - num;
    let mut base_den = scaled_den;
    let residue = (&base_num % a).try_into().unwrap_or(0u64);
    let g = gcd_u64(residue, a);
    if g > 1 {
        base_num /= g;
        base_den /= g;
    }
    let pow_num = base_num.pow(exp);
    let pow_den = base_den.pow(exp);
    BigRational::new_raw(BigInt::from(&pow_den - &pow_num), BigInt::from(pow_den))
}

/// `1 + q + q^2 + ... + q^{d-1}` -- the number of points of `P^{d-1}` over
/// the residue field.
fn point_count_residue(q: u64, d: usize) -> BigUint {
    let mut sum = BigUint::zero();
    for i in 0..d {
        sum += biguint_pow(q, i as u32);
    }
    sum
}

fn assert_params(q: u64, d: usize) {
    assert!(q >= 2, "q must be at least 2");
    assert!(d >= 2, "dimension must be at least 2");
}

/// The exponent `q^{d-1}` as a `u32`, panicking when it is too large to use
/// as a binomial-power exponent.
fn small_exponent(value: &BigUint) -> u32 {
    u32::try_from(value).unwrap_or_else(|_| {
        panic!("exponent {value} too large for exact power computation")
    })
}

/// `u_n` for the recurrence `u_0 = 1`, `u_{k+1} = 1 - (1 - u_k/A)^A` with
/// `A = q^{d-1}`.
///
/// The sequence starts at `1`, strictly decreases, and tends to `0` like
/// `constant / n` (see [`asymptotic_constant`]).
pub fn u_sequence(q: u64, d: usize, n: u32) -> BigRational {
    assert_params(q, d);
    let a_exp = small_exponent(&biguint_pow(q, (d - 1) as u32));
    let a = u64::from(a_exp);
    let mut u = BigRational::one();
    for _ in 0..n {
        u = one_minus_scaled_pow(&u, a, a_exp);
    }
    u
}

/// Expected fraction of cells covered by a random Kakeya set at level `n`:
/// `E[X_n] = 1 - (1 - u_{n-1}/q^{d-1})^{1 + q + ... + q^{d-1}}`.
///
/// Requires `n >= 1`.
pub fn expected_measure(q: u64, d: usize, n: u32) -> BigRational {
    assert_params(q, d);
    assert!(n >= 1, "level must be at least 1");
    let a_exp = small_exponent(&biguint_pow(q, (d - 1) as u32));
    let p_exp = small_exponent(&point_count_residue(q, d));
    let u = u_sequence(q, d, n - 1);
    one_minus_scaled_pow(&u, u64::from(a_exp), p_exp)
}

/// Floating-point version of [`u_sequence`] for levels where exact rationals
/// are intractable (their bit size doubles every level).
pub fn u_sequence_f64(q: u64, d: usize, n: u32) -> f64 {
    assert_params(q, d);
    let a_exp = small_exponent(&biguint_pow(q, (d - 1) as u32));
    let a = f64::from(a_exp);
    let mut u = 1.0_f64;
    for _ in 0..n {
        u = 1.0 - (1.0 - u / a).powi(a_exp as i32);
    }
    u
}

/// Floating-point version of [`expected_measure`] for levels where exact
/// rationals are intractable.
pub fn expected_measure_f64(q: u64, d: usize, n: u32) -> f64 {
    assert_params(q, d);
    assert!(n >= 1, "level must be at least 1");
    let a_exp = small_exponent(&biguint_pow(q, (d - 1) as u32));
    let p_exp = small_exponent(&point_count_residue(q, d));
    let a = f64::from(a_exp);
    1.0 - (1.0 - u_sequence_f64(q, d, n - 1) / a).powi(p_exp as i32)
}

/// Limit of `n * E[X_n]` as `n` grows:
/// `2 (q^d - 1) / ((q - 1)(q^{d-1} - 1))`.
pub fn asymptotic_constant(q: u64, d: usize) -> BigRational {
    assert_params(q, d);
    let numer = BigInt::from(2) * (BigInt::from(biguint_pow(q, d as u32)) - 1);
    let denom = (BigInt::from(q) - 1) * (BigInt::from(biguint_pow(q, (d - 1) as u32)) - 1);
    BigRational::new(numer, denom)
}

/// Deterministic lower bound for the measure of any planar (`d = 2`) Kakeya
/// set at level `n`: `1 / (((q-1)/(q+1)) n + 1)`.
pub fn lower_bound_dim2(q: u64, n: u32) -> BigRational {
    assert!(q >= 2, "q must be at least 2");
    let slope = BigRational::new(BigInt::from(q) - 1, BigInt::from(q) + 1);
    let one = BigRational::one();
    let denom = &slope * BigRational::from_integer(BigInt::from(n)) + &one;
    &one / &denom
}

/// Lower bound for the number of cells hit by segments whose parameter runs
/// over the multiples of `p^ell` only: `q^{2(n-ell)}` times the level-`(n-ell)`
/// planar bound.
///
/// Requires `ell <= n`.
pub fn lower_bound_torsion(q: u64, n: u32, ell: u32) -> BigRational {
    assert!(ell <= n, "valuation level must not exceed the ring level");
    let scale = rational_from_biguint(biguint_pow(q, 2 * (n - ell)));
    &scale * &lower_bound_dim2(q, n - ell)
}

/// A finite sequence of heights over `[1, n]`.
///
/// For a direction subset `A = {a_0 < a_1 < ... < a_k}` in enumeration
/// order, the height of `a_j` (for `j >= 1`) is `n - v_n(a_j, a_{j-1})`
/// where `v_n` is the valuation metric; the stored sequence has length
/// `|A| - 1`.  The first element's height is `n` by convention and is *not*
/// stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeightFunction {
    n: u32,
    values: Vec<u32>,
}

impl HeightFunction {
    /// Builds a height function at level `n`, validating every value lies in
    /// `[1, n]`.
    pub fn new(n: u32, values: Vec<u32>) -> Result<Self, TheoryError> {
        for &value in &values {
            if value < 1 || value > n {
                return Err(TheoryError::HeightOutOfRange { value, n });
            }
        }
        Ok(HeightFunction { n, values })
    }

    /// Level `n` the heights are bounded by.
    pub fn level(&self) -> u32 {
        self.n
    }

    /// The stored height values (the first subset element is excluded by
    /// convention).
    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// Number of stored heights (`|A| - 1` for a subset of size `|A|`).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// `true` when the underlying subset is a singleton.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Height function of a strictly increasing direction subset, given by
/// enumeration indices into `space`.
///
/// Heights compare *consecutive* subset elements only; the strict ordering
/// requirement makes that well defined.  Returns
/// [`TheoryError::UnsortedSubset`] when indices repeat or decrease.
pub fn height_function(
    space: &ProjectiveSpace,
    subset: &[u64],
) -> Result<HeightFunction, TheoryError> {
    for pair in subset.windows(2) {
        if pair[0] >= pair[1] {
            return Err(TheoryError::UnsortedSubset);
        }
    }
    let n = space.ring().n();
    let mut values = Vec::with_capacity(subset.len().saturating_sub(1));
    let mut prev = None;
    for &index in subset {
        let point = space.point_at(index)?;
        if let Some(prev_point) = &prev {
            let v = point.valuation_distance(prev_point)?;
            values.push(n - v);
        }
        prev = Some(point);
    }
    HeightFunction::new(n, values)
}

/// Multiplicity sequence `M(h)`.
///
/// `M(h)(j)` counts the positions `j' <= j` with `h(j') = h(j)` such that no
/// strictly larger height occurs between `j'` and `j`; larger heights "reset"
/// the count, smaller ones are transparent.
pub fn multiplicity(h: &HeightFunction) -> Vec<u32> {
    let values = h.values();
    let mut out = Vec::with_capacity(values.len());
    for (j, &hj) in values.iter().enumerate() {
        let mut count = 1u32;
        for j_prime in (0..j).rev() {
            if values[j_prime] > hj {
                break;
            }
            if values[j_prime] == hj {
                count += 1;
            }
        }
        out.push(count);
    }
    out
}

/// Weight sequence `W(h)(j) = (q^{d-1} - M(j)) / (q^{d-1} (M(j) + 1))`.
///
/// A weight is zero exactly when the multiplicity reaches `q^{d-1}`;
/// sequences containing such a position never contribute to
/// [`weighted_height_sum`].
pub fn weight(h: &HeightFunction, q: u64, d: usize) -> Vec<BigRational> {
    assert_params(q, d);
    let a = BigInt::from(biguint_pow(q, (d - 1) as u32));
    multiplicity(h)
        .into_iter()
        .map(|m| BigRational::new(&a - BigInt::from(m), &a * BigInt::from(m + 1)))
        .collect()
}

/// Modified weight sequence `W'(h)`: positions with `h(j) = n` replace the
/// numerator threshold `q^{d-1}` by `1 + q + ... + q^{d-1}`, all other
/// positions agree with [`weight`].
pub fn modified_weight(h: &HeightFunction, q: u64, d: usize) -> Vec<BigRational> {
    assert_params(q, d);
    let a = BigInt::from(biguint_pow(q, (d - 1) as u32));
    let p = BigInt::from(point_count_residue(q, d));
    multiplicity(h)
        .into_iter()
        .zip(h.values())
        .map(|(m, &hj)| {
            let threshold = if hj == h.level() { &p } else { &a };
            BigRational::new(threshold - BigInt::from(m), &a * BigInt::from(m + 1))
        })
        .collect()
}

/// Number of strictly increasing direction subsets whose height function
/// equals `h`:
/// `(1 + q^{-1} + ... + q^{-(d-1)}) q^{(d-1)n} prod_j W'(h)(j) q^{(d-1)h(j)}`.
///
/// The leading factor equals the cardinality of the projective space, so the
/// empty height function counts the singletons.  The product is always an
/// integer for valid inputs; a non-integer result raises
/// [`TheoryError::NonIntegralCount`].
pub fn count_with_height(h: &HeightFunction, q: u64, d: usize) -> Result<BigInt, TheoryError> {
    assert_params(q, d);
    let n = h.level();
    let mut total = rational_from_biguint(point_count_residue(q, d))
        * rational_from_biguint(biguint_pow(q, (d - 1) as u32 * (n.saturating_sub(1))));
    for (w, &hj) in modified_weight(h, q, d).iter().zip(h.values()) {
        total *= w * rational_from_biguint(biguint_pow(q, (d - 1) as u32 * hj));
    }
    if !total.is_integer() {
        return Err(TheoryError::NonIntegralCount(total.to_string()));
    }
    Ok(total.to_integer())
}

/// Expected number of cells in the intersection of the segments of a random
/// map over a direction subset with height function `h`:
/// `E[C_A] = q^n prod_j q^{-(d-1) h(j)}`.
///
/// The empty height function (a singleton subset) gives `q^n`, a single
/// segment's cell count.
pub fn directional_mean(h: &HeightFunction, q: u64, d: usize) -> BigRational {
    assert_params(q, d);
    let mut exponent_denom = 0u64;
    for &hj in h.values() {
        exponent_denom += (d as u64 - 1) * u64::from(hj);
    }
    BigRational::new(
        BigInt::from(biguint_pow(q, h.level())),
        BigInt::from(BigUint::from(q).pow(small_exponent(&BigUint::from(exponent_denom)))),
    )
}

/// Number of maps whose values on the underlying subset realize one fixed
/// assignment compatible with `h`: `q^{nd} prod_j q^{d h(j)}`.
pub fn card_fiber_b_a(h: &HeightFunction, q: u64, d: usize) -> BigUint {
    assert_params(q, d);
    let mut exponent = u64::from(h.level()) * d as u64;
    for &hj in h.values() {
        exponent += d as u64 * u64::from(hj);
    }
    BigUint::from(q).pow(small_exponent(&BigUint::from(exponent)))
}

/// Expected cell count of a random Kakeya set by inclusion-exclusion over
/// all non-empty direction subsets:
/// `sum_A (-1)^{1+|A|} E[C_A]`, with `E[C_A]` given by [`directional_mean`]
/// of the subset's height function.
///
/// Equals `q^{nd}` times [`expected_measure`].  The space may have at most
/// [`MAX_INCLUSION_EXCLUSION_POINTS`] points.
pub fn inclusion_exclusion_mean(space: &ProjectiveSpace) -> Result<BigRational, TheoryError> {
    let card = space.cardinality();
    if card > MAX_INCLUSION_EXCLUSION_POINTS {
        return Err(TheoryError::TooManySubsets {
            points: card,
            cap: MAX_INCLUSION_EXCLUSION_POINTS,
        });
    }
    let n = space.ring().n();
    let q = space.ring().p();
    let d = space.dim();

    // Heights only ever compare consecutive subset elements, so one table of
    // adjacent-pair valuation distances serves every subset.
    let all_points: Vec<_> = space.iter().collect();
    let mut gap = vec![vec![0u32; card as usize]; card as usize];
    for i in 0..card as usize {
        for j in (i + 1)..card as usize {
            gap[i][j] = all_points[j].valuation_distance(&all_points[i])?;
        }
    }

    let mut total = BigRational::zero();
    for mask in 1u64..(1u64 << card) {
        let chosen: Vec<usize> = (0..card as usize)
            .filter(|&i| mask & (1 << i) != 0)
            .collect();
        let values: Vec<u32> = chosen
            .windows(2)
            .map(|pair| n - gap[pair[0]][pair[1]])
            .collect();
        let h = HeightFunction::new(n, values)?;
        let term = directional_mean(&h, q, d);
        if chosen.len() % 2 == 1 {
            total += term;
        } else {
            total -= term;
        }
    }
    Ok(total)
}

/// Signed sum of weight products over *all* height functions of level `n`:
///
/// * plain (`modified = false`): `sum_h (-1)^{len(h)} prod_j W(h)(j)`,
///   which telescopes to `u_n` (see [`u_sequence`]);
/// * modified (`modified = true`): same sum with [`modified_weight`]; scaling
///   the result by `1 + q^{-1} + ... + q^{-(d-1)}` gives
///   [`expected_measure`] at level `n`.
///
/// Although the index set is infinite, all but finitely many height functions
/// contain a zero weight.  The sum is evaluated by recursion on the level:
/// a height function splits at its `n`-valued positions into at most
/// `threshold - 1` blocks, each a level-`(n-1)` height function, and blocks
/// of equal level share one memoized sub-sum.  Work beyond
/// [`MAX_HEIGHT_SUM_TERMS`] terms raises [`TheoryError::SumExplosion`].
pub fn weighted_height_sum(
    q: u64,
    d: usize,
    n: u32,
    modified: bool,
) -> Result<BigRational, TheoryError> {
    assert_params(q, d);
    let a_big = biguint_pow(q, (d - 1) as u32);
    let a_terms = u128::try_from(&a_big).unwrap_or(u128::MAX);
    let top_terms = if modified {
        u128::try_from(&point_count_residue(q, d)).unwrap_or(u128::MAX)
    } else {
        a_terms
    };
    let planned = (u128::from(n.saturating_sub(1)))
        .saturating_mul(a_terms)
        .saturating_add(top_terms);
    if planned > MAX_HEIGHT_SUM_TERMS {
        return Err(TheoryError::SumExplosion {
            terms: planned,
            cap: MAX_HEIGHT_SUM_TERMS,
        });
    }

    let a = rational_from_biguint(a_big.clone());
    // One level of the recursion: blocks between consecutive top-valued
    // positions are independent level-(k-1) sums, and the i-th top-valued
    // position carries weight (threshold - i) / (A (i + 1)).
    let level_up = |lower: &BigRational, threshold: &BigRational| -> BigRational {
        let mut total = BigRational::zero();
        let mut coeff = BigRational::one();
        let mut power = lower.clone();
        let mut m = 0u64;
        loop {
            let term = &coeff * &power;
            if m.is_multiple_of(2) {
                total += term;
            } else {
                total -= term;
            }
            m += 1;
            let factor_numer = threshold - BigRational::from_integer(BigInt::from(m));
            if factor_numer.is_zero() || factor_numer.is_negative() {
                break;
            }
            coeff *= factor_numer / (&a * BigRational::from_integer(BigInt::from(m + 1)));
            power *= lower;
        }
        total
    };

    let p = rational_from_biguint(point_count_residue(q, d));
    let mut sum = BigRational::one();
    for level in 1..=n {
        let threshold = if modified && level == n { &p } else { &a };
        sum = level_up(&sum, threshold);
    }
    Ok(sum)
}

/// Renders `x` with exactly `places` digits after the decimal point, rounding
/// half-to-even.
pub fn decimal_string(x: &BigRational, places: usize) -> String {
    let sign = if x.is_negative() { "-" } else { "" };
    let abs = x.abs();
    let scale = BigInt::from(10u32).pow(places as u32);
    let scaled_numer = abs.numer() * &scale;
    let denom = abs.denom();
    let mut quotient = &scaled_numer / denom;
    let remainder = &scaled_numer % denom;
    let twice = &remainder * BigInt::from(2);
    let round_up = match twice.cmp(denom) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => (&quotient % BigInt::from(2)) == BigInt::one(),
    };
    if round_up {
        quotient += 1;
    }
    let digits = quotient.to_string();
    if places == 0 {
        return format!("{sign}{digits}");
    }
    let padded = if digits.len() <= places {
        format!("{}{}", "0".repeat(places + 1 - digits.len()), digits)
    } else {
        digits
    };
    let split = padded.len() - places;
    format!("{sign}{}.{}", &padded[..split], &padded[split..])
}
