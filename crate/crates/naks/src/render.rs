//! Digit-reversal visualization of Kakeya sets.
//!
//! Level-`n` ring elements embed into the unit interval through the digit
//! reversal `r(sum s_i pi^i) = sum s_i p^{-i-1}`; on a `p^n` pixel grid this
//! is exactly [`reverse_index`], a bijection that maps each cell class to
//! the pixel whose base-`p` digits are reversed.  Planar sets render to
//! binary PGM rasters ([`render_2d`] / [`RasterImage::write_pgm`]), spatial
//! sets export as voxel lists ([`export_voxels`]).

use std::io::Write;

use thiserror::Error;

use crate::kakeya::KakeyaSet;
use crate::ring::RingElement;

/// Errors from the visualization layer.
#[derive(Debug, Error)]
pub enum RenderError {
    /// The set has the wrong ambient dimension for the requested export.
    #[error("set has dimension {got}, expected {expected}")]
    WrongDimension {
        /// Dimension of the given set.
        got: usize,
        /// Dimension the operation requires.
        expected: usize,
    },
    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for RenderError {
    fn from(e: std::io::Error) -> Self {
        RenderError::Io(e.to_string())
    }
}

/// Reverses the base-`p` digits of a packed level-`n` value.
///
/// The result is the pixel index of the element's digit-reversal embedding
/// on a `p^n` grid; applying the map twice is the identity.
pub fn reverse_index(packed: u64, p: u64, n: u32) -> u64 {
    let mut value = packed;
    let mut out = 0u64;
    for _ in 0..n {
        out = out * p + value % p;
        value /= p;
    }
    out
}

/// [`reverse_index`] applied to a ring element.
pub fn reverse_coord(x: &RingElement) -> u64 {
    reverse_index(x.packed(), x.ring().p(), x.ring().n())
}

/// A square grayscale raster of side `p^n`, row-major, `0` = black.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    /// Width and height in pixels (both equal `p^n`).
    pub width: u64,
    /// Height in pixels.
    pub height: u64,
    /// Row-major pixel values; `0` is black (occupied), `255` white.
    pub pixels: Vec<u8>,
    /// Residue characteristic recorded in the metadata comment.
    pub p: u64,
    /// Level recorded in the metadata comment.
    pub n: u32,
    /// Dimension recorded in the metadata comment.
    pub d: usize,
    /// Seed recorded in the metadata comment.
    pub seed: u64,
}

impl RasterImage {
    /// Number of black (occupied) pixels.
    pub fn black_pixels(&self) -> u64 {
        self.pixels.iter().filter(|&&v| v == 0).count() as u64
    }

    /// Writes the image as binary PGM (P5, maxval 255) with a metadata
    /// comment line.
    pub fn write_pgm<W: Write>(&self, w: &mut W) -> Result<(), RenderError> {
        write!(
            w,
            "P5\n# NAKS p={} n={} d={} seed={}\n{} {}\n255\n",
            self.p, self.n, self.d, self.seed, self.width, self.height
        )?;
        w.write_all(&self.pixels)?;
        Ok(())
    }
}

/// Rasterizes a planar set: pixel `(reverse(x), reverse(y))` is black iff
/// the cell `(x, y)` belongs to the set.
///
/// The first coordinate indexes columns, the second rows.  `seed` is stored
/// in the image metadata only.
pub fn render_2d(set: &KakeyaSet, seed: u64) -> Result<RasterImage, RenderError> {
    if set.dim() != 2 {
        return Err(RenderError::WrongDimension {
            got: set.dim(),
            expected: 2,
        });
    }
    let ring = set.ring();
    let side = ring.size();
    let mut pixels = vec![255u8; (side * side) as usize];
    for cell in set.iter_cells() {
        let coords = set.cell_coords(cell);
        let x = reverse_index(coords[0], ring.p(), ring.n());
        let y = reverse_index(coords[1], ring.p(), ring.n());
        pixels[(y * side + x) as usize] = 0;
    }
    Ok(RasterImage {
        width: side,
        height: side,
        pixels,
        p: ring.p(),
        n: ring.n(),
        d: 2,
        seed,
    })
}

/// Writes the occupied cells of a spatial (`d = 3`) set as CSV rows
/// `rx,ry,rz` of digit-reversed coordinates, sorted lexicographically.
pub fn export_voxels<W: Write>(set: &KakeyaSet, w: &mut W) -> Result<(), RenderError> {
    if set.dim() != 3 {
        return Err(RenderError::WrongDimension {
            got: set.dim(),
            expected: 3,
        });
    }
    let ring = set.ring();
    let mut rows: Vec<[u64; 3]> = set
        .iter_cells()
        .map(|cell| {
            let coords = set.cell_coords(cell);
            [
                reverse_index(coords[0], ring.p(), ring.n()),
                reverse_index(coords[1], ring.p(), ring.n()),
                reverse_index(coords[2], ring.p(), ring.n()),
            ]
        })
        .collect();
    rows.sort_unstable();
    writeln!(w, "rx,ry,rz")?;
    for [rx, ry, rz] in rows {
        writeln!(w, "{rx},{ry},{rz}")?;
    }
    Ok(())
}
