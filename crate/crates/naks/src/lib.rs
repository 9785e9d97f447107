//! Random Kakeya sets over truncated non-archimedean rings.
//!
//! This crate constructs random Kakeya-type sets in `R_n^d`, where `R_n` is a
//! truncated local ring (`Z/p^n` or `F_p[t]/(t^n)`), measures them exactly,
//! and compares against closed-form expectations:
//!
//! * [`ring`] — arithmetic in `R_n` with elements as little-endian digit
//!   vectors packed into a `u64`.
//! * [`projective`] — canonical representatives and enumeration of the
//!   projective space of directions `P^{d-1}(R_n)`.
//! * [`lipschitz`] — the space of 1-Lipschitz maps from directions to
//!   offsets, with exact sampling and exhaustive enumeration.
//! * [`kakeya`] — dense bit-set Kakeya sets built from a map (one line
//!   segment per direction), exact measures, and segment intersections.
//! * [`theory`] — closed-form expectations, height-function combinatorics,
//!   and deterministic lower bounds, all in exact rational arithmetic.
//! * [`montecarlo`] — reproducible parallel sampling experiments over the
//!   map space, plus exact small-space enumeration of the same statistics.
//! * [`render`] — digit-reversal visualizations of Kakeya sets as images
//!   and voxel lists.

pub mod kakeya;
pub mod lipschitz;
pub mod montecarlo;
pub mod projective;
pub mod render;
pub mod ring;
pub mod theory;

pub use kakeya::KakeyaSet;
pub use lipschitz::LipschitzMap;
pub use projective::{ProjectivePoint, ProjectiveSpace};
pub use ring::{RingDescriptor, RingElement, RingFamily};
pub use theory::HeightFunction;
