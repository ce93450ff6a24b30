//! Patch extraction over a tissue mask and deterministic patch augmentation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BinaryMask, RgbRaster};
use crate::rng::{derive_seed, hash_label, rng_from_seed};

#[derive(Debug, Error)]
pub enum TileError {
    #[error("patch size must be positive")]
    ZeroPatchSize,
    #[error("stride must be positive")]
    ZeroStride,
    #[error("coverage must lie in [0, 1], got {0}")]
    CoverageOutOfRange(f64),
    #[error("mask is {mask_w}x{mask_h} but image is {img_w}x{img_h}")]
    MaskSizeMismatch {
        mask_w: usize,
        mask_h: usize,
        img_w: usize,
        img_h: usize,
    },
    #[error("max_shift ({max_shift}) must be smaller than patch size ({size})")]
    ShiftTooLarge { max_shift: usize, size: usize },
}

/// One extracted patch: pixels plus grid position and mask coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub slide_id: String,
    /// Top-left corner in working-level pixel coordinates.
    pub x: usize,
    pub y: usize,
    pub pixels: RgbRaster,
    /// Fraction of patch pixels inside the mask, in [0, 1].
    pub coverage: f64,
}

impl Patch {
    /// Canonical file stem `{slide_id}_{x}_{y}`.
    pub fn stem(&self) -> String {
        format!("{}_{}_{}", self.slide_id, self.x, self.y)
    }
}

/// Patch grid parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileParams {
    pub size: usize,
    pub stride: usize,
    pub min_coverage: f64,
}

impl Default for TileParams {
    fn default() -> Self {
        Self {
            size: 256,
            stride: 256,
            min_coverage: 0.5,
        }
    }
}

/// Fraction of the `size` x `size` window at (x, y) covered by the mask.
pub fn coverage(mask: &BinaryMask, x: usize, y: usize, size: usize) -> f64 {
    let mut count = 0usize;
    for yy in y..y + size {
        for xx in x..x + size {
            if mask.get(xx, yy) {
                count += 1;
            }
        }
    }
    count as f64 / (size * size) as f64
}

/// Row-major grid scan at the given stride. Windows that overflow the image
/// edge are skipped, as are windows with mask coverage below `min_coverage`
/// (inclusive bound: coverage == min_coverage is kept).
pub fn extract_patches(
    image: &RgbRaster,
    mask: &BinaryMask,
    slide_id: &str,
    params: &TileParams,
) -> Result<Vec<Patch>, TileError> {
    if params.size == 0 {
        return Err(TileError::ZeroPatchSize);
    }
    if params.stride == 0 {
        return Err(TileError::ZeroStride);
    }
    if !(0.0..=1.0).contains(&params.min_coverage) {
        return Err(TileError::CoverageOutOfRange(params.min_coverage));
    }
    if mask.width() != image.width() || mask.height() != image.height() {
        return Err(TileError::MaskSizeMismatch {
            mask_w: mask.width(),
            mask_h: mask.height(),
            img_w: image.width(),
            img_h: image.height(),
        });
    }
    let mut patches = Vec::new();
    if image.width() < params.size || image.height() < params.size {
        return Ok(patches);
    }
    let mut y = 0;
    while y + params.size <= image.height() {
        let mut x = 0;
        while x + params.size <= image.width() {
            let cov = coverage(mask, x, y, params.size);
            if cov >= params.min_coverage {
                patches.push(Patch {
                    slide_id: slide_id.to_string(),
                    x,
                    y,
                    pixels: image.crop_square(x, y, params.size),
                    coverage: cov,
                });
            }
            x += params.stride;
        }
        y += params.stride;
    }
    Ok(patches)
}

/// Augmentation draw parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    /// Allow 90-degree rotations (k drawn from 0..4).
    pub rotate: bool,
    /// Allow horizontal and vertical flips (independent coin flips).
    pub flip: bool,
    /// Maximum absolute shift in pixels per axis; must be < patch size.
    pub max_shift: usize,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            rotate: true,
            flip: true,
            max_shift: 0,
        }
    }
}

/// Rotates a square raster by k quarter turns counterclockwise.
pub fn rot90(r: &RgbRaster, k: u8) -> RgbRaster {
    let n = r.width();
    debug_assert_eq!(n, r.height(), "rotation requires a square raster");
    let mut out = r.clone();
    for _ in 0..(k % 4) {
        let src = out.clone();
        // counterclockwise: dst(x, y) = src(n-1-y, x)
        for y in 0..n {
            for x in 0..n {
                out.set_pixel(x, y, src.pixel(n - 1 - y, x));
            }
        }
    }
    out
}

/// Mirrors left-right.
pub fn flip_h(r: &RgbRaster) -> RgbRaster {
    let (w, h) = (r.width(), r.height());
    let mut out = r.clone();
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(x, y, r.pixel(w - 1 - x, y));
        }
    }
    out
}

/// Mirrors top-bottom.
pub fn flip_v(r: &RgbRaster) -> RgbRaster {
    let (w, h) = (r.width(), r.height());
    let mut out = r.clone();
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(x, y, r.pixel(x, h - 1 - y));
        }
    }
    out
}

/// Integer translation with symmetric reflect padding at the exposed border.
pub fn shift_reflect(r: &RgbRaster, dx: i64, dy: i64) -> RgbRaster {
    let (w, h) = (r.width() as i64, r.height() as i64);
    let reflect = |i: i64, n: i64| -> i64 {
        let period = 2 * n;
        let mut j = i.rem_euclid(period);
        if j >= n {
            j = period - 1 - j;
        }
        j
    };
    let mut out = r.clone();
    for y in 0..h {
        for x in 0..w {
            let sx = reflect(x - dx, w);
            let sy = reflect(y - dy, h);
            out.set_pixel(x as usize, y as usize, r.pixel(sx as usize, sy as usize));
        }
    }
    out
}

/// One deterministic augmentation draw. The transform is fully determined by
/// `(seed, slide_id, x, y, draw_index)`: rotation first, then flips, then
/// shift. Coordinates refer to the original patch grid position.
pub fn augment(
    patch: &Patch,
    spec: &AugmentSpec,
    seed: u64,
    draw_index: u64,
) -> Result<RgbRaster, TileError> {
    if spec.max_shift >= patch.pixels.width() && spec.max_shift > 0 {
        return Err(TileError::ShiftTooLarge {
            max_shift: spec.max_shift,
            size: patch.pixels.width(),
        });
    }
    let mut rng = rng_from_seed(derive_seed(
        seed,
        &[
            hash_label("augment"),
            hash_label(&patch.slide_id),
            patch.x as u64,
            patch.y as u64,
            draw_index,
        ],
    ));
    let mut out = patch.pixels.clone();
    if spec.rotate {
        let k: u8 = rng.gen_range(0..4);
        out = rot90(&out, k);
    }
    if spec.flip {
        if rng.gen_bool(0.5) {
            out = flip_h(&out);
        }
        if rng.gen_bool(0.5) {
            out = flip_v(&out);
        }
    }
    if spec.max_shift > 0 {
        let s = spec.max_shift as i64;
        let dx = rng.gen_range(-s..=s);
        let dy = rng.gen_range(-s..=s);
        out = shift_reflect(&out, dx, dy);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::rng::rng_from_seed;

    fn checker(size: usize) -> RgbRaster {
        let mut r = RgbRaster::filled(size, size, [0, 0, 0]);
        for y in 0..size {
            for x in 0..size {
                let v = (((x / 2) + (y / 2)) % 2 * 255) as u8;
                r.set_pixel(x, y, [v, (x % 256) as u8, (y % 256) as u8]);
            }
        }
        r
    }

    /// Brute-force reference: enumerate every grid window from the definition.
    fn extract_oracle(
        image: &RgbRaster,
        mask: &BinaryMask,
        params: &TileParams,
    ) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for y in (0..).step_by(params.stride) {
            if y + params.size > image.height() {
                break;
            }
            for x in (0..).step_by(params.stride) {
                if x + params.size > image.width() {
                    break;
                }
                let mut n = 0;
                for yy in 0..params.size {
                    for xx in 0..params.size {
                        if mask.get(x + xx, y + yy) {
                            n += 1;
                        }
                    }
                }
                let cov = n as f64 / (params.size * params.size) as f64;
                if cov >= params.min_coverage {
                    out.push((x, y, cov));
                }
            }
        }
        out
    }

    #[test]
    fn full_mask_full_grid() {
        let img = checker(8);
        let mask = BinaryMask::filled(8, 8, true);
        let ps = extract_patches(
            &img,
            &mask,
            "s",
            &TileParams {
                size: 4,
                stride: 4,
                min_coverage: 0.5,
            },
        )
        .unwrap();
        assert_eq!(ps.len(), 4);
        assert_eq!(
            ps.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>(),
            vec![(0, 0), (4, 0), (0, 4), (4, 4)]
        );
        for p in &ps {
            assert_eq!(p.coverage, 1.0);
            assert_eq!(p.pixels.width(), 4);
        }
    }

    #[test]
    fn empty_mask_no_patches() {
        let img = checker(8);
        let mask = BinaryMask::filled(8, 8, false);
        let ps = extract_patches(&img, &mask, "s", &TileParams { size: 4, stride: 4, min_coverage: 0.1 }).unwrap();
        assert!(ps.is_empty());
    }

    #[test]
    fn min_coverage_zero_keeps_empty_windows() {
        let img = checker(8);
        let mask = BinaryMask::filled(8, 8, false);
        let ps = extract_patches(&img, &mask, "s", &TileParams { size: 4, stride: 4, min_coverage: 0.0 }).unwrap();
        assert_eq!(ps.len(), 4, "coverage >= 0.0 always holds");
    }

    #[test]
    fn inclusive_coverage_bound() {
        let img = checker(4);
        // exactly half the window
        let mut mask = BinaryMask::filled(4, 4, false);
        for y in 0..2 {
            for x in 0..4 {
                mask.set(x, y, true);
            }
        }
        let ps = extract_patches(&img, &mask, "s", &TileParams { size: 4, stride: 4, min_coverage: 0.5 }).unwrap();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps[0].coverage, 0.5);
    }

    #[test]
    fn edge_windows_skipped() {
        // 10x10 image, size 4, stride 3: starts 0,3,6 fit; 9 would overflow
        let img = checker(10);
        let mask = BinaryMask::filled(10, 10, true);
        let ps = extract_patches(&img, &mask, "s", &TileParams { size: 4, stride: 3, min_coverage: 0.0 }).unwrap();
        assert_eq!(ps.len(), 9);
        assert!(ps.iter().all(|p| p.x + 4 <= 10 && p.y + 4 <= 10));
    }

    #[test]
    fn image_smaller_than_patch_yields_empty() {
        let img = checker(3);
        let mask = BinaryMask::filled(3, 3, true);
        let ps = extract_patches(&img, &mask, "s", &TileParams { size: 4, stride: 4, min_coverage: 0.0 }).unwrap();
        assert!(ps.is_empty());
    }

    #[test]
    fn parameter_validation() {
        let img = checker(4);
        let mask = BinaryMask::filled(4, 4, true);
        assert!(matches!(
            extract_patches(&img, &mask, "s", &TileParams { size: 0, stride: 1, min_coverage: 0.5 }),
            Err(TileError::ZeroPatchSize)
        ));
        assert!(matches!(
            extract_patches(&img, &mask, "s", &TileParams { size: 2, stride: 0, min_coverage: 0.5 }),
            Err(TileError::ZeroStride)
        ));
        assert!(matches!(
            extract_patches(&img, &mask, "s", &TileParams { size: 2, stride: 2, min_coverage: 1.5 }),
            Err(TileError::CoverageOutOfRange(_))
        ));
        let small_mask = BinaryMask::filled(3, 4, true);
        assert!(matches!(
            extract_patches(&img, &small_mask, "s", &TileParams { size: 2, stride: 2, min_coverage: 0.5 }),
            Err(TileError::MaskSizeMismatch { .. })
        ));
    }

    #[test]
    fn randomized_settings_match_brute_force() {
        let mut rng = rng_from_seed(7);
        for case in 0..12 {
            let w = rng.gen_range(6..40);
            let h = rng.gen_range(6..40);
            let size = rng.gen_range(2..=6.min(w.min(h)));
            let stride = rng.gen_range(1..=size + 2);
            let min_coverage = [0.0, 0.25, 0.5, 0.9, 1.0][rng.gen_range(0..5)];
            let img = {
                let mut r = RgbRaster::filled(w, h, [0, 0, 0]);
                for y in 0..h {
                    for x in 0..w {
                        r.set_pixel(x, y, [rng.gen(), rng.gen(), rng.gen()]);
                    }
                }
                r
            };
            let mask = {
                let bits = (0..w * h).map(|_| rng.gen_bool(0.6)).collect();
                BinaryMask::new(w, h, bits).unwrap()
            };
            let params = TileParams { size, stride, min_coverage };
            let got = extract_patches(&img, &mask, "s", &params).unwrap();
            let want = extract_oracle(&img, &mask, &params);
            assert_eq!(
                got.iter().map(|p| (p.x, p.y, p.coverage)).collect::<Vec<_>>(),
                want,
                "case {case}: w={w} h={h} size={size} stride={stride} cov={min_coverage}"
            );
            // pixel content equals direct crop
            for p in &got {
                assert_eq!(p.pixels, img.crop_square(p.x, p.y, size), "case {case}");
            }
        }
    }

    #[test]
    fn rot90_group_identities() {
        let r = checker(6);
        assert_eq!(rot90(&r, 0), r);
        assert_eq!(rot90(&rot90(&r, 1), 3), r);
        assert_eq!(rot90(&rot90(&r, 2), 2), r);
        assert_eq!(rot90(&r, 4), r);
        // single quarter turn moves a known pixel: dst(0, 0) = src(n-1, 0)
        let q = rot90(&r, 1);
        assert_eq!(q.pixel(0, 0), r.pixel(5, 0));
    }

    #[test]
    fn flips_are_involutions() {
        let r = checker(5);
        assert_eq!(flip_h(&flip_h(&r)), r);
        assert_eq!(flip_v(&flip_v(&r)), r);
        assert_eq!(flip_h(&r).pixel(0, 2), r.pixel(4, 2));
        assert_eq!(flip_v(&r).pixel(2, 0), r.pixel(2, 4));
    }

    #[test]
    fn shift_zero_is_identity_and_reflect_edges() {
        let r = checker(6);
        assert_eq!(shift_reflect(&r, 0, 0), r);
        let s = shift_reflect(&r, 1, 0);
        // content moved right by one; exposed left column reflects src column 0
        assert_eq!(s.pixel(1, 3), r.pixel(0, 3));
        assert_eq!(s.pixel(0, 3), r.pixel(0, 3));
        let s2 = shift_reflect(&r, -2, 0);
        assert_eq!(s2.pixel(0, 1), r.pixel(2, 1));
        // exposed right columns mirror back from the right border: 5, 4, ...
        assert_eq!(s2.pixel(4, 1), r.pixel(5, 1));
        assert_eq!(s2.pixel(5, 1), r.pixel(4, 1));
    }

    #[test]
    fn transforms_preserve_pixel_multiset() {
        let r = checker(6);
        let collect = |img: &RgbRaster| {
            let mut v: Vec<[u8; 3]> = (0..6 * 6)
                .map(|i| img.pixel(i % 6, i / 6))
                .collect();
            v.sort();
            v
        };
        let base = collect(&r);
        assert_eq!(collect(&rot90(&r, 1)), base);
        assert_eq!(collect(&rot90(&r, 2)), base);
        assert_eq!(collect(&flip_h(&r)), base);
        assert_eq!(collect(&flip_v(&r)), base);
        // shift does not preserve the multiset in general (reflection duplicates)
    }

    fn sample_patch() -> Patch {
        Patch {
            slide_id: "slide_a".into(),
            x: 32,
            y: 64,
            pixels: checker(8),
            coverage: 1.0,
        }
    }

    #[test]
    fn augment_deterministic_per_key() {
        let p = sample_patch();
        let spec = AugmentSpec { rotate: true, flip: true, max_shift: 3 };
        let a = augment(&p, &spec, 42, 0).unwrap();
        let b = augment(&p, &spec, 42, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn augment_varies_with_each_key_part() {
        let p = sample_patch();
        let spec = AugmentSpec { rotate: true, flip: true, max_shift: 3 };
        let base = augment(&p, &spec, 42, 0).unwrap();
        let with_other_draw = augment(&p, &spec, 42, 1).unwrap();
        let with_other_seed = augment(&p, &spec, 43, 0).unwrap();
        let mut moved = p.clone();
        moved.x += 8;
        let with_other_pos = augment(&moved, &spec, 42, 0).unwrap();
        // distinct keys give independent streams; at least one draw differs
        // across this set with overwhelming probability for this fixed seed
        let distinct = [&with_other_draw, &with_other_seed, &with_other_pos]
            .iter()
            .filter(|img| ***img != base)
            .count();
        assert!(distinct >= 2, "derived streams should decorrelate");
    }

    #[test]
    fn augment_disabled_is_identity() {
        let p = sample_patch();
        let spec = AugmentSpec { rotate: false, flip: false, max_shift: 0 };
        assert_eq!(augment(&p, &spec, 1, 0).unwrap(), p.pixels);
    }

    #[test]
    fn augment_rejects_shift_ge_size() {
        let p = sample_patch();
        let spec = AugmentSpec { rotate: false, flip: false, max_shift: 8 };
        assert!(matches!(
            augment(&p, &spec, 1, 0),
            Err(TileError::ShiftTooLarge { .. })
        ));
    }

    #[test]
    fn augment_output_is_reachable_transform() {
        // with shift disabled the output must be one of the 16 dihedral images
        let p = sample_patch();
        let spec = AugmentSpec { rotate: true, flip: true, max_shift: 0 };
        let out = augment(&p, &spec, 9, 4).unwrap();
        let mut reachable = Vec::new();
        for k in 0..4u8 {
            let r = rot90(&p.pixels, k);
            reachable.push(r.clone());
            reachable.push(flip_h(&r));
            reachable.push(flip_v(&r));
            reachable.push(flip_v(&flip_h(&r)));
        }
        assert!(reachable.contains(&out));
    }
}
