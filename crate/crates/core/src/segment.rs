//! Tissue segmentation: grayscale conversion, Gaussian smoothing, Otsu
//! thresholding, connected component labeling, and contour tracing.
//!
//! The full chain is [`build_mask`]; each stage is also exposed on its own.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BinaryMask, GrayImage, RgbRaster};

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("empty image")]
    EmptyImage,
    #[error("histogram has a single distinct value ({value}); no threshold exists")]
    DegenerateHistogram { value: u8 },
}

/// Rec. 601 luma conversion: gray = round(0.299 R + 0.587 G + 0.114 B).
pub fn to_grayscale(raster: &RgbRaster) -> Result<GrayImage, SegmentError> {
    if raster.width() == 0 || raster.height() == 0 {
        return Err(SegmentError::EmptyImage);
    }
    let data = raster
        .data()
        .chunks_exact(3)
        .map(|p| {
            let y = 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]);
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Ok(GrayImage::new(raster.width(), raster.height(), data).expect("same pixel count"))
}

/// Discrete Gaussian kernel of radius ceil(3 sigma), normalized to sum 1.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Symmetric reflection at borders: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
#[inline]
fn reflect(i: i64, n: i64) -> i64 {
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j
}

/// Separable Gaussian blur with reflect border handling. `sigma == 0` returns
/// the input unchanged.
pub fn gaussian_blur(g: &GrayImage, sigma: f64) -> GrayImage {
    assert!(sigma >= 0.0, "sigma must be nonnegative");
    if sigma == 0.0 {
        return g.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let (w, h) = (g.width() as i64, g.height() as i64);

    // horizontal pass into f64, vertical pass back to u8
    let mut tmp = vec![0.0f64; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                let sx = reflect(x + ki as i64 - radius, w);
                acc += kv * f64::from(g.get(sx as usize, y as usize));
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = GrayImage::filled(g.width(), g.height(), 0);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                let sy = reflect(y + ki as i64 - radius, h);
                acc += kv * tmp[(sy * w + x) as usize];
            }
            out.set(x as usize, y as usize, acc.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Otsu's threshold: the `t` maximizing between-class variance of
/// {gray < t} vs {gray >= t}, ties broken by the smallest `t`.
pub fn otsu_threshold(g: &GrayImage) -> Result<u8, SegmentError> {
    let mut hist = [0u64; 256];
    for &v in g.data() {
        hist[v as usize] += 1;
    }
    let distinct = hist.iter().filter(|&&c| c > 0).count();
    if distinct < 2 {
        let value = hist
            .iter()
            .position(|&c| c > 0)
            .map(|i| i as u8)
            .unwrap_or(0);
        return Err(SegmentError::DegenerateHistogram { value });
    }

    let total = g.data().len() as f64;
    let total_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();

    let mut best_t = 0u8;
    let mut best_var = -1.0f64;
    let mut count_below = 0.0f64;
    let mut sum_below = 0.0f64;
    // class 0 = {gray < t}; t = 0 leaves class 0 empty
    for t in 0..=255u32 {
        if t > 0 {
            let i = (t - 1) as usize;
            count_below += hist[i] as f64;
            sum_below += i as f64 * hist[i] as f64;
        }
        let w0 = count_below / total;
        let w1 = 1.0 - w0;
        if count_below == 0.0 || count_below == total {
            continue;
        }
        let mu0 = sum_below / count_below;
        let mu1 = (total_sum - sum_below) / (total - count_below);
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    Ok(best_t)
}

/// Thresholds a gray image. `tissue_is_dark` selects `gray < t`, otherwise
/// `gray >= t`.
pub fn binarize(g: &GrayImage, t: u8, tissue_is_dark: bool) -> BinaryMask {
    let data = g
        .data()
        .iter()
        .map(|&v| if tissue_is_dark { v < t } else { v >= t })
        .collect();
    BinaryMask::new(g.width(), g.height(), data).expect("same pixel count")
}

/// Axis-aligned bounding box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

/// A connected region of the mask with its traced outer contour.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Component {
    pub label: u32,
    pub area_px: usize,
    pub bounding_box: BoundingBox,
    /// Closed polygon of pixel-corner vertices (first == last).
    pub contour: Vec<(i64, i64)>,
    /// Shoelace area of the contour polygon.
    pub contour_area: f64,
}

/// Label image plus per-component records; label 0 is background.
pub struct LabeledMask {
    pub labels: Vec<u32>,
    pub width: usize,
    pub height: usize,
    pub components: Vec<Component>,
}

/// 8-connectivity component labeling with contour tracing.
pub fn label_components(m: &BinaryMask) -> LabeledMask {
    let (w, h) = (m.width(), m.height());
    let mut labels = vec![0u32; w * h];
    let mut components = Vec::new();
    let mut next_label = 1u32;
    let mut stack = Vec::new();

    for start in 0..w * h {
        if !m.data()[start] || labels[start] != 0 {
            continue;
        }
        let label = next_label;
        next_label += 1;
        let mut area = 0usize;
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (usize::MAX, usize::MAX, 0, 0);
        // flood fill
        labels[start] = label;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            area += 1;
            let (x, y) = (idx % w, idx / w);
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let nidx = ny as usize * w + nx as usize;
                    if m.data()[nidx] && labels[nidx] == 0 {
                        labels[nidx] = label;
                        stack.push(nidx);
                    }
                }
            }
        }
        let contour = trace_contour(&labels, w, h, label, (min_x, min_y));
        let contour_area = shoelace_area(&contour);
        components.push(Component {
            label,
            area_px: area,
            bounding_box: BoundingBox {
                x: min_x,
                y: min_y,
                w: max_x - min_x + 1,
                h: max_y - min_y + 1,
            },
            contour,
            contour_area,
        });
    }
    LabeledMask {
        labels,
        width: w,
        height: h,
        components,
    }
}

/// Traces the outer boundary of a labeled component along pixel edges,
/// returning pixel-corner vertices. The walk keeps the component on its right
/// and resolves diagonal pinch corners by crossing over, so an 8-connected
/// component yields one closed loop.
fn trace_contour(
    labels: &[u32],
    w: usize,
    h: usize,
    label: u32,
    bbox_min: (usize, usize),
) -> Vec<(i64, i64)> {
    let inside = |x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && labels[y as usize * w + x as usize] == label
    };
    // topmost-then-leftmost pixel of the component; its top-left corner starts the walk
    let mut start_px = None;
    'outer: for y in bbox_min.1..h {
        for x in 0..w {
            if inside(x as i64, y as i64) {
                start_px = Some((x as i64, y as i64));
                break 'outer;
            }
        }
    }
    let (sx, sy) = start_px.expect("component has at least one pixel");
    let start = (sx, sy);
    let mut contour = vec![start];
    let mut pos = (sx + 1, sy); // walked the top edge eastward
    let mut dir = (1i64, 0i64);
    contour.push(pos);

    while pos != start {
        // pixels around the current corner
        let d_px = inside(pos.0, pos.1); // bottom-right
        let c_px = inside(pos.0 - 1, pos.1); // bottom-left
        let b_px = inside(pos.0, pos.1 - 1); // top-right
        let a_px = inside(pos.0 - 1, pos.1 - 1); // top-left
        // candidate directions in precedence order: left turn, straight, right turn
        let turns = [
            (dir.1, -dir.0), // left (screen coords, y down)
            dir,
            (-dir.1, dir.0), // right
        ];
        let mut moved = false;
        for nd in turns {
            // a directed edge exists iff the pixel on its right is in the
            // component and the pixel on its left is not
            let ok = match nd {
                (1, 0) => d_px && !b_px,  // east: below in, above out
                (-1, 0) => a_px && !c_px, // west: above in, below out
                (0, 1) => c_px && !d_px,  // south: left in, right out
                (0, -1) => b_px && !a_px, // north: right in, left out
                _ => unreachable!(),
            };
            if ok {
                dir = nd;
                pos = (pos.0 + nd.0, pos.1 + nd.1);
                contour.push(pos);
                moved = true;
                break;
            }
        }
        assert!(moved, "contour walk stalled at {pos:?}");
    }
    contour
}

/// Unsigned shoelace area of a closed polygon (first vertex == last).
fn shoelace_area(poly: &[(i64, i64)]) -> f64 {
    let mut twice = 0i64;
    for pair in poly.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        twice += x0 * y1 - x1 * y0;
    }
    (twice.abs() as f64) / 2.0
}

/// 8-connectivity connected components of a mask.
pub fn connected_components(m: &BinaryMask) -> Vec<Component> {
    label_components(m).components
}

/// Keeps components with `area_px >= min_area_px`, order preserved.
pub fn filter_components(cs: Vec<Component>, min_area_px: usize) -> Vec<Component> {
    cs.into_iter().filter(|c| c.area_px >= min_area_px).collect()
}

/// Parameters for [`build_mask`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub sigma: f64,
    pub min_area_px: usize,
    pub tissue_is_dark: bool,
}

impl SegmentParams {
    /// Defaults for a given level size: sigma 2.0, min area 0.5% of pixels,
    /// tissue darker than the glass background.
    pub fn defaults_for(width: usize, height: usize) -> Self {
        Self {
            sigma: 2.0,
            min_area_px: default_min_area(width, height),
            tissue_is_dark: true,
        }
    }
}

/// Default component area threshold: 0.5% of the level pixel count.
pub fn default_min_area(width: usize, height: usize) -> usize {
    width * height / 200
}

/// Result of the full segmentation chain.
pub struct Segmentation {
    pub mask: BinaryMask,
    pub components: Vec<Component>,
}

/// Full chain: grayscale -> blur -> Otsu -> binarize -> components -> area
/// filter. The returned mask is the union of surviving components.
pub fn build_mask(raster: &RgbRaster, params: &SegmentParams) -> Result<Segmentation, SegmentError> {
    let gray = to_grayscale(raster)?;
    let blurred = gaussian_blur(&gray, params.sigma);
    let t = otsu_threshold(&blurred)?;
    let binary = binarize(&blurred, t, params.tissue_is_dark);
    let labeled = label_components(&binary);
    let keep: Vec<bool> = {
        let mut keep = vec![false; labeled.components.len() + 1];
        for c in &labeled.components {
            if c.area_px >= params.min_area_px {
                keep[c.label as usize] = true;
            }
        }
        keep
    };
    let mask_data = labeled
        .labels
        .iter()
        .map(|&l| l != 0 && keep[l as usize])
        .collect();
    let mask = BinaryMask::new(labeled.width, labeled.height, mask_data).expect("size matches");
    let components = filter_components(labeled.components, params.min_area_px);
    Ok(Segmentation { mask, components })
}
