//! Browser bindings for the Kakeya-set library: a canvas-ready raster of a
//! random planar set, the closed-form expectation curve, and a sequential
//! Monte Carlo histogram.
//!
//! The heavy lifting stays in the core crate; this layer only validates
//! browser-sized parameter ranges, adapts outputs to JS-friendly types
//! (RGBA byte buffers, JSON strings), and keeps everything deterministic.
//! Sampling reuses the per-sample RNG streams of
//! [`naks::montecarlo::run_experiment`], so a browser run with a given seed
//! reproduces the CLI's numbers exactly -- but runs on the calling thread,
//! because wasm cannot spawn the worker pool.

use naks::kakeya::{KakeyaBuilder, KakeyaSet};
use naks::lipschitz::MapSampler;
use naks::montecarlo::{sample_rng, stats_from_cards};
use naks::render::render_2d;
use naks::theory;
use naks::{RingDescriptor, RingFamily};
use num_traits::ToPrimitive;
use wasm_bindgen::prelude::*;

/// Largest raster side (`p^n`) the demo will draw.
pub const MAX_RASTER_SIDE: u64 = 512;
/// Largest per-request sample count for the histogram panel.
pub const MAX_SAMPLES: u32 = 20_000;
/// Largest number of histogram bins.
pub const MAX_BINS: u32 = 200;
/// Largest cell count (`p^{nd}`) accepted for sampling.
pub const MAX_CELLS: u128 = 1 << 26;
/// Deepest level accepted for the expectation curve.
pub const MAX_CURVE_LEVEL: u32 = 5_000;

/// RGBA ink for occupied cells.
const INK: [u8; 4] = [24, 24, 48, 255];
/// RGBA background for empty cells.
const PAPER: [u8; 4] = [246, 246, 250, 255];

fn parse_family(family: &str) -> Result<RingFamily, String> {
    match family {
        "series" => Ok(RingFamily::Series),
        "padic" => Ok(RingFamily::Padic),
        other => Err(format!(
            "unknown ring family '{other}' (expected 'series' or 'padic')"
        )),
    }
}

fn descriptor(family: &str, p: u32, n: u32) -> Result<RingDescriptor, String> {
    RingDescriptor::new(parse_family(family)?, u64::from(p), n).map_err(|e| e.to_string())
}

/// The random planar Kakeya set shown for `(family, p, n, seed)`: sample
/// stream 0 of the Monte Carlo experiment with base seed `seed`.
fn showcase_set(family: &str, p: u32, n: u32, seed: u32) -> Result<KakeyaSet, String> {
    let ring = descriptor(family, p, n)?;
    if ring.size() > MAX_RASTER_SIDE {
        return Err(format!(
            "raster side p^n = {} exceeds the demo cap {MAX_RASTER_SIDE}",
            ring.size()
        ));
    }
    let sampler = MapSampler::new(ring, 2).map_err(|e| e.to_string())?;
    let map = sampler.sample(&mut sample_rng(u64::from(seed), n, 0));
    KakeyaSet::build(&map).map_err(|e| e.to_string())
}

fn raster_rgba_impl(family: &str, p: u32, n: u32, seed: u32) -> Result<Vec<u8>, String> {
    let set = showcase_set(family, p, n, seed)?;
    let image = render_2d(&set, u64::from(seed)).map_err(|e| e.to_string())?;
    let mut rgba = Vec::with_capacity(image.pixels.len() * 4);
    for &value in &image.pixels {
        rgba.extend_from_slice(if value == 0 { &INK } else { &PAPER });
    }
    Ok(rgba)
}

fn raster_meta_impl(
    family: &str,
    p: u32,
    n: u32,
    seed: u32,
) -> Result<serde_json::Value, String> {
    let set = showcase_set(family, p, n, seed)?;
    let side = set.ring().size();
    Ok(serde_json::json!({
        "family": family,
        "p": p,
        "n": n,
        "seed": seed,
        "side": side,
        "cardinality": set.cardinality(),
        "measure": set.measure().to_f64(),
        "expected_measure": theory::expected_measure_f64(u64::from(p), 2, n),
    }))
}

fn theory_curve_impl(q: u32, d: u32, n_max: u32) -> Result<serde_json::Value, String> {
    if !(2..=16).contains(&q) {
        return Err(format!("q = {q} outside the demo range 2..=16"));
    }
    if !(2..=6).contains(&d) {
        return Err(format!("d = {d} outside the demo range 2..=6"));
    }
    if !(1..=MAX_CURVE_LEVEL).contains(&n_max) {
        return Err(format!("n_max = {n_max} outside 1..={MAX_CURVE_LEVEL}"));
    }
    let q64 = u64::from(q);
    let dusize = d as usize;
    let rows: Vec<serde_json::Value> = (1..=n_max)
        .map(|n| {
            let mean = theory::expected_measure_f64(q64, dusize, n);
            let lower_bound = (d == 2).then(|| theory::lower_bound_dim2(q64, n).to_f64());
            serde_json::json!({
                "n": n,
                "mean": mean,
                "scaled_mean": f64::from(n) * mean,
                "lower_bound": lower_bound,
            })
        })
        .collect();
    Ok(serde_json::json!({
        "q": q,
        "d": d,
        "asymptotic_constant": theory::asymptotic_constant(q64, dusize).to_f64(),
        "rows": rows,
    }))
}

fn sample_histogram_impl(
    family: &str,
    p: u32,
    d: u32,
    n: u32,
    samples: u32,
    seed: u32,
    bins: u32,
) -> Result<serde_json::Value, String> {
    if !(1..=MAX_SAMPLES).contains(&samples) {
        return Err(format!("samples = {samples} outside 1..={MAX_SAMPLES}"));
    }
    if !(1..=MAX_BINS).contains(&bins) {
        return Err(format!("bins = {bins} outside 1..={MAX_BINS}"));
    }
    if !(2..=6).contains(&d) {
        return Err(format!("d = {d} outside the demo range 2..=6"));
    }
    let ring = descriptor(family, p, n)?;
    let cells = u128::from(ring.size()).pow(d);
    if cells > MAX_CELLS {
        return Err(format!(
            "cell count p^(n*d) = {cells} exceeds the demo cap {MAX_CELLS}"
        ));
    }
    let dusize = d as usize;
    let sampler = MapSampler::new(ring, dusize).map_err(|e| e.to_string())?;
    let mut builder = KakeyaBuilder::new(ring, dusize).map_err(|e| e.to_string())?;
    let mut cards = Vec::with_capacity(samples as usize);
    for i in 0..u64::from(samples) {
        let map = sampler.sample(&mut sample_rng(u64::from(seed), n, i));
        cards.push(builder.cardinality_of(&map).map_err(|e| e.to_string())?);
    }
    let stats =
        stats_from_cards(&cards, &ring, dusize, bins as usize).map_err(|e| e.to_string())?;
    Ok(serde_json::json!({
        "family": family,
        "p": p,
        "d": d,
        "n": n,
        "samples": samples,
        "seed": seed,
        "mean_theoretical": theory::expected_measure_f64(u64::from(p), dusize, n),
        "stats": serde_json::to_value(&stats).map_err(|e| e.to_string())?,
    }))
}

/// RGBA pixel buffer (row-major, `side * side * 4` bytes) of a random planar
/// Kakeya set; pair with [`kakeya_raster_side`] for `putImageData`.
#[wasm_bindgen]
pub fn kakeya_raster_rgba(family: &str, p: u32, n: u32, seed: u32) -> Result<Vec<u8>, JsError> {
    raster_rgba_impl(family, p, n, seed).map_err(|e| JsError::new(&e))
}

/// Side length `p^n` of the raster for the given parameters.
#[wasm_bindgen]
pub fn kakeya_raster_side(family: &str, p: u32, n: u32) -> Result<u32, JsError> {
    let ring = descriptor(family, p, n).map_err(|e| JsError::new(&e))?;
    if ring.size() > MAX_RASTER_SIDE {
        return Err(JsError::new(&format!(
            "raster side p^n = {} exceeds the demo cap {MAX_RASTER_SIDE}",
            ring.size()
        )));
    }
    Ok(ring.size() as u32)
}

/// JSON metadata (side, cardinality, exact and expected measure) for the
/// same set drawn by [`kakeya_raster_rgba`].
#[wasm_bindgen]
pub fn kakeya_raster_meta_json(
    family: &str,
    p: u32,
    n: u32,
    seed: u32,
) -> Result<String, JsError> {
    raster_meta_impl(family, p, n, seed)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

/// JSON rows of the expectation curve `n -> E[X_n]` with the scaled mean
/// `n * E[X_n]`, the planar lower bound (d = 2 only), and the asymptotic
/// constant.
#[wasm_bindgen]
pub fn theory_curve_json(q: u32, d: u32, n_max: u32) -> Result<String, JsError> {
    theory_curve_impl(q, d, n_max)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

/// JSON report (stats + histogram) of a sequential Monte Carlo run; numbers
/// are identical to the CLI's for the same parameters and seed.
#[wasm_bindgen]
pub fn sample_histogram_json(
    family: &str,
    p: u32,
    d: u32,
    n: u32,
    samples: u32,
    seed: u32,
    bins: u32,
) -> Result<String, JsError> {
    sample_histogram_impl(family, p, d, n, samples, seed, bins)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}
