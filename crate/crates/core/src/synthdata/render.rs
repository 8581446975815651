//! Rasterizer for the rig designs.
//!
//! Each part is painted onto its own boolean canvas with a square brush;
//! overlaps are then resolved by a fixed priority order so the final masks
//! partition the ink. All coordinates scale with the resolution, keeping the
//! layout identical at any canvas size.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DesignSample, FrameShape, HandleShape, Part, StyleParams, SynthError};
use crate::num::Real;
use crate::rng::next_uniform;
use crate::{BitMask, Image};

/// Pixels a part claims are resolved by this order: a pixel belongs to the
/// last listed part that painted it. Wheels win so rack struts and frame
/// chords never break the rims.
const PRIORITY: [Part; 5] = [
    Part::Frame,
    Part::Saddle,
    Part::Handle,
    Part::Rack,
    Part::Wheel,
];

struct PartCanvas {
    mask: Array2<bool>,
    out_of_bounds: bool,
    res: usize,
}

impl PartCanvas {
    fn new(res: usize) -> Self {
        Self {
            mask: Array2::from_elem((res, res), false),
            out_of_bounds: false,
            res,
        }
    }

    /// Stamps a square brush of side `t` centered near `(x, y)`.
    fn stamp(&mut self, x: f64, y: f64, t: usize) {
        let t = t.max(1) as isize;
        let ix = x.round() as isize;
        let iy = y.round() as isize;
        let lo = (t - 1) / 2;
        for dy in -lo..=(t / 2) {
            for dx in -lo..=(t / 2) {
                let (px, py) = (ix + dx, iy + dy);
                if px < 0 || py < 0 || px >= self.res as isize || py >= self.res as isize {
                    self.out_of_bounds = true;
                } else {
                    self.mask[[py as usize, px as usize]] = true;
                }
            }
        }
    }

    fn segment(&mut self, a: (f64, f64), b: (f64, f64), t: usize) {
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let steps = (len / 0.4).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let s = i as f64 / steps as f64;
            self.stamp(a.0 + (b.0 - a.0) * s, a.1 + (b.1 - a.1) * s, t);
        }
    }

    fn polyline(&mut self, pts: &[(f64, f64)], t: usize) {
        for w in pts.windows(2) {
            self.segment(w[0], w[1], t);
        }
    }

    /// Annulus: pixels whose distance to the center is within `t/2` of `r`.
    fn circle_band(&mut self, center: (f64, f64), r: f64, t: f64) {
        let (cx, cy) = center;
        let pad = r + t / 2.0 + 1.0;
        if cx - pad < 0.0 || cy - pad < 0.0 || cx + pad >= self.res as f64 || cy + pad >= self.res as f64
        {
            self.out_of_bounds = true;
        }
        let x0 = (cx - pad).floor().max(0.0) as usize;
        let x1 = ((cx + pad).ceil() as usize).min(self.res - 1);
        let y0 = (cy - pad).floor().max(0.0) as usize;
        let y1 = ((cy + pad).ceil() as usize).min(self.res - 1);
        for py in y0..=y1 {
            for px in x0..=x1 {
                let d = ((px as f64 - cx).powi(2) + (py as f64 - cy).powi(2)).sqrt();
                if (d - r).abs() <= t / 2.0 {
                    self.mask[[py, px]] = true;
                }
            }
        }
    }

    fn disk(&mut self, center: (f64, f64), r: f64) {
        let (cx, cy) = center;
        let x0 = (cx - r - 1.0).floor().max(0.0) as usize;
        let x1 = (((cx + r + 1.0).ceil()) as usize).min(self.res - 1);
        let y0 = (cy - r - 1.0).floor().max(0.0) as usize;
        let y1 = (((cy + r + 1.0).ceil()) as usize).min(self.res - 1);
        if cx - r < 0.0 || cy - r < 0.0 || cx + r >= self.res as f64 || cy + r >= self.res as f64 {
            self.out_of_bounds = true;
        }
        for py in y0..=y1 {
            for px in x0..=x1 {
                let d = ((px as f64 - cx).powi(2) + (py as f64 - cy).powi(2)).sqrt();
                if d <= r {
                    self.mask[[py, px]] = true;
                }
            }
        }
    }
}

/// Resolution-scaled layout shared by all parts of one design.
struct Layout {
    res: f64,
    unit: f64,
    cy: f64,
    rear: (f64, f64),
    front: (f64, f64),
    mid_jitter: f64,
    handle_x: f64,
    wheel_r: f64,
}

impl Layout {
    fn from_params(params: &StyleParams, res: usize) -> Self {
        let r = res as f64;
        let unit = r / 64.0;
        let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
        let j_rear: f64 = next_uniform(&mut rng, -2.0 * unit, 2.0 * unit);
        let j_front: f64 = next_uniform(&mut rng, -2.0 * unit, 2.0 * unit);
        let j_mid: f64 = next_uniform(&mut rng, -1.5 * unit, 1.5 * unit);
        let j_handle: f64 = next_uniform(&mut rng, -1.0 * unit, 1.0 * unit);
        let cy = 0.68 * r;
        let front_x = 0.75 * r + j_front;
        Self {
            res: r,
            unit,
            cy,
            rear: (0.25 * r + j_rear, cy),
            front: (front_x, cy),
            mid_jitter: j_mid,
            handle_x: front_x + j_handle,
            wheel_r: params.wheel_radius,
        }
    }

    fn mid_x(&self) -> f64 {
        (self.rear.0 + self.front.0) / 2.0 + self.mid_jitter
    }

    fn brush(&self) -> usize {
        (2.0 * self.unit).round().max(1.0) as usize
    }

    fn thin_brush(&self) -> usize {
        (1.5 * self.unit).round().max(1.0) as usize
    }
}

fn paint_wheel(c: &mut PartCanvas, l: &Layout) {
    c.circle_band(l.rear, l.wheel_r, 2.0 * l.unit);
    c.circle_band(l.front, l.wheel_r, 2.0 * l.unit);
    c.disk(l.rear, 1.3 * l.unit);
    c.disk(l.front, 1.3 * l.unit);
}

fn paint_frame(c: &mut PartCanvas, l: &Layout, shape: FrameShape) {
    let t = c_brush(l);
    let peak_y = l.cy - 0.30 * l.res;
    let mid = l.mid_x();
    match shape {
        FrameShape::Triangle => {
            c.polyline(&[l.rear, (mid, peak_y), l.front], t);
            c.segment(l.rear, l.front, t);
        }
        FrameShape::Diamond => {
            let low = (mid, l.cy + 0.07 * l.res);
            c.polyline(&[l.rear, (mid, peak_y), l.front, low, l.rear], t);
        }
        FrameShape::Arc => {
            // Near-semicircular bow through both hubs; sagitta just under
            // half the chord so the curve stays a function of x.
            let sagitta = 0.24 * l.res;
            let half_chord = (l.front.0 - l.rear.0) / 2.0;
            let rho = (half_chord * half_chord / sagitta + sagitta) / 2.0;
            let center_y = l.cy - sagitta + rho;
            let cx = (l.rear.0 + l.front.0) / 2.0;
            let steps = ((l.front.0 - l.rear.0) / 0.4).ceil() as usize;
            for i in 0..=steps {
                let x = l.rear.0 + (l.front.0 - l.rear.0) * i as f64 / steps as f64;
                let dx = x - cx;
                let y = center_y - (rho * rho - dx * dx).max(0.0).sqrt();
                c.stamp(x, y, t);
            }
            c.segment(l.rear, l.front, t);
        }
        FrameShape::Step => {
            let shelf_y = l.cy - 0.16 * l.res;
            c.polyline(
                &[
                    l.rear,
                    (l.rear.0, shelf_y),
                    (mid, shelf_y),
                    (mid, peak_y),
                    (l.front.0, peak_y),
                    l.front,
                ],
                t,
            );
        }
    }
}

fn c_brush(l: &Layout) -> usize {
    l.brush()
}

fn paint_saddle(c: &mut PartCanvas, l: &Layout, offset: f64) {
    let sx = l.rear.0 + 0.10 * l.res + offset;
    let sy = l.cy - 0.36 * l.res;
    let half = 0.055 * l.res;
    c.segment((sx - half, sy), (sx + half, sy), l.brush());
    c.segment((sx, sy), (sx, sy + 0.07 * l.res), l.thin_brush());
}

fn paint_handle(c: &mut PartCanvas, l: &Layout, shape: HandleShape) {
    let hx = l.handle_x;
    let hy = l.cy - 0.36 * l.res;
    c.segment((l.front.0, l.cy - 0.20 * l.res), (hx, hy), l.thin_brush());
    match shape {
        HandleShape::Flat => {
            let half = 0.06 * l.res;
            c.segment((hx - half, hy), (hx + half, hy), l.brush());
        }
        HandleShape::Curled => {
            c.segment((hx - 0.05 * l.res, hy), (hx + 0.03 * l.res, hy), l.brush());
            let r = 0.045 * l.res;
            let (ax, ay) = (hx + 0.03 * l.res, hy + r);
            let steps = 14;
            for i in 0..=steps {
                // quarter turn from pointing up to pointing forward
                let theta = -std::f64::consts::FRAC_PI_2 + (i as f64 / steps as f64) * std::f64::consts::FRAC_PI_2;
                c.stamp(ax + r * theta.cos(), ay + r * theta.sin(), l.brush());
            }
        }
        HandleShape::Loop => {
            c.circle_band((hx, hy - 0.01 * l.res), 0.05 * l.res, 1.6 * l.unit);
        }
    }
}

fn paint_rack(c: &mut PartCanvas, l: &Layout) {
    let ry = l.cy - l.wheel_r - 0.07 * l.res;
    let left = l.rear.0 - 0.16 * l.res;
    let right = l.rear.0 + 0.01 * l.res;
    c.segment((left, ry), (right, ry), l.brush());
    c.segment((l.rear.0 - 0.10 * l.res, ry), (l.rear.0, l.cy), l.thin_brush());
    c.segment((right, ry), (l.rear.0, l.cy), l.thin_brush());
}

fn paint_part(c: &mut PartCanvas, l: &Layout, params: &StyleParams, part: Part) {
    match part {
        Part::Frame => paint_frame(c, l, params.frame_shape),
        Part::Wheel => paint_wheel(c, l),
        Part::Saddle => paint_saddle(c, l, params.saddle_offset),
        Part::Handle => paint_handle(c, l, params.handle_shape),
        Part::Rack => paint_rack(c, l),
    }
}

pub(super) fn render_design<T: Real>(
    params: &StyleParams,
    resolution: usize,
) -> Result<DesignSample<T>, SynthError> {
    let layout = Layout::from_params(params, resolution);

    // Paint and bounds-check in canonical part order so the reported part
    // is the geometric root cause (an oversized wheel, not the rack that
    // sits relative to it).
    let mut canvases: Vec<PartCanvas> = Vec::with_capacity(Part::ALL.len());
    for part in Part::ALL {
        let mut c = PartCanvas::new(resolution);
        paint_part(&mut c, &layout, params, part);
        if c.out_of_bounds {
            return Err(SynthError::Geometry {
                part,
                res: resolution,
            });
        }
        canvases.push(c);
    }

    // Priority resolution: the last painter of a pixel owns it.
    let mut owner = Array2::<u8>::zeros((resolution, resolution));
    for part in PRIORITY {
        for ((r, col), &on) in canvases[part.index()].mask.indexed_iter() {
            if on {
                owner[[r, col]] = part.label();
            }
        }
    }

    let mut part_masks: Vec<BitMask> = Vec::with_capacity(Part::ALL.len());
    for part in Part::ALL {
        let mask = owner.mapv(|l| l == part.label());
        if !mask.iter().any(|&b| b) {
            return Err(SynthError::EmptyPart { part });
        }
        part_masks.push(mask);
    }

    let image = owner.mapv(|l| if l > 0 { T::one() } else { T::zero() });
    Ok(DesignSample {
        image,
        part_masks,
        params: params.clone(),
    })
}

pub(super) fn render_single_part<T: Real>(
    params: &StyleParams,
    resolution: usize,
    part: Part,
) -> Result<Image<T>, SynthError> {
    let layout = Layout::from_params(params, resolution);
    let mut c = PartCanvas::new(resolution);
    paint_part(&mut c, &layout, params, part);
    if c.out_of_bounds {
        return Err(SynthError::Geometry {
            part,
            res: resolution,
        });
    }
    Ok(c.mask.mapv(|b| if b { T::one() } else { T::zero() }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(frame: FrameShape, handle: HandleShape) -> StyleParams {
        StyleParams::new(frame, 9.0, 0.5, handle, 314)
    }

    #[test]
    fn all_variant_combinations_render() {
        for frame in [
            FrameShape::Triangle,
            FrameShape::Diamond,
            FrameShape::Arc,
            FrameShape::Step,
        ] {
            for handle in [HandleShape::Flat, HandleShape::Curled, HandleShape::Loop] {
                let p = params(frame, handle);
                let s = render_design::<f32>(&p, 64);
                assert!(s.is_ok(), "{frame:?}/{handle:?} failed: {:?}", s.err());
            }
        }
    }

    #[test]
    fn rare_frames_differ_from_common_ones() {
        let a = render_design::<f32>(&params(FrameShape::Triangle, HandleShape::Flat), 64).unwrap();
        let b = render_design::<f32>(&params(FrameShape::Arc, HandleShape::Flat), 64).unwrap();
        let diff: usize = a
            .mask(Part::Frame)
            .iter()
            .zip(b.mask(Part::Frame).iter())
            .filter(|(x, y)| x != y)
            .count();
        assert!(diff > 40, "arc and triangle frames too similar ({diff} px)");
    }

    #[test]
    fn scales_to_other_resolutions() {
        let p = StyleParams::new(FrameShape::Diamond, 18.0, 0.0, HandleShape::Curled, 9);
        let s = render_design::<f32>(&p, 128).unwrap();
        assert_eq!(s.image.dim(), (128, 128));
    }

    #[test]
    fn single_part_render_matches_combined_support() {
        let p = params(FrameShape::Triangle, HandleShape::Flat);
        let lone: Image<f32> = render_single_part(&p, 64, Part::Wheel).unwrap();
        let full = render_design::<f32>(&p, 64).unwrap();
        // every pixel the resolved wheel mask owns is ink in the lone render
        for ((r, c), &owned) in full.mask(Part::Wheel).indexed_iter() {
            if owned {
                assert!(lone[[r, c]] > 0.0);
            }
        }
    }
}
