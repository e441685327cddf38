//! Histograms of oriented optical flow.
//!
//! Flow vectors are binned by their primary angle from the horizontal axis,
//! folded so that z and -z share a bin, and weighted by magnitude. The
//! histogram is L1-normalized; an empty or all-zero flow set yields the
//! all-zero histogram.

use std::f64::consts::PI;

use crate::segment::Segment;
use crate::trajectory::FlowField;
use crate::tubes::MotionTube;

pub const DEFAULT_HOOF_BINS: usize = 100;

/// Magnitude-weighted, fold-symmetric orientation histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct HoofVector {
    pub bins: Vec<f64>,
}

impl HoofVector {
    pub fn dim(&self) -> usize {
        self.bins.len()
    }

    pub fn sum(&self) -> f64 {
        self.bins.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.bins.iter().all(|&b| b == 0.0)
    }
}

/// Primary angle in [-pi/2, pi/2). The vector is canonicalized into the right
/// half-plane before atan2, so negating a vector reproduces the exact same
/// angle bit for bit.
#[inline]
pub fn primary_angle(x: f64, y: f64) -> f64 {
    let (cx, cy) = if x < 0.0 || (x == 0.0 && y < 0.0) {
        (-x, -y)
    } else {
        (x, y)
    };
    let theta = cy.atan2(cx);
    // x == 0, y > 0 lands on +pi/2 exactly; fold it onto -pi/2.
    if theta >= PI / 2.0 {
        theta - PI
    } else {
        theta
    }
}

/// Zero-based bin of the inequality
/// `-pi/2 + pi*(b-1)/B <= theta < -pi/2 + pi*b/B`.
#[inline]
pub fn hoof_bin(theta: f64, bins: usize) -> usize {
    let b = ((theta + PI / 2.0) * bins as f64 / PI).floor() as isize;
    b.clamp(0, bins as isize - 1) as usize
}

/// Bins a set of flow vectors into a normalized HOOF histogram.
pub fn compute_hoof(flow_vectors: &[(f64, f64)], bins: usize) -> HoofVector {
    assert!(bins >= 1, "bins must be >= 1");
    let mut hist = vec![0.0; bins];
    for &(x, y) in flow_vectors {
        let weight = (x * x + y * y).sqrt();
        if weight == 0.0 {
            continue;
        }
        hist[hoof_bin(primary_angle(x, y), bins)] += weight;
    }
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        for b in &mut hist {
            *b /= total;
        }
    }
    HoofVector { bins: hist }
}

/// One HOOF per (tube, frame) action box, computed over the flow vectors at
/// the integer pixels inside that box. `flows` is indexed by absolute frame
/// (the same indices the boxes carry); tubes must be normalized first.
/// Output order is tube-major, frame order within a tube.
pub fn extract_segment_hoofs(
    segment: &Segment,
    tubes: &[MotionTube],
    flows: &[FlowField],
    bins: usize,
) -> Vec<HoofVector> {
    let mut out = Vec::with_capacity(tubes.len() * segment.len());
    for tube in tubes {
        for b in &tube.boxes {
            debug_assert!(segment.frames().contains(&b.f));
            let flow = &flows[b.f];
            let x0 = (b.x.round() as isize).clamp(0, flow.width as isize) as usize;
            let x1 = ((b.x + b.r).round() as isize).clamp(0, flow.width as isize) as usize;
            let y0 = (b.y.round() as isize).clamp(0, flow.height as isize) as usize;
            let y1 = ((b.y + b.r).round() as isize).clamp(0, flow.height as isize) as usize;
            let mut vectors = Vec::with_capacity((x1 - x0) * (y1 - y0));
            for y in y0..y1 {
                for x in x0..x1 {
                    vectors.push(flow.at(x, y));
                }
            }
            out.push(compute_hoof(&vectors, bins));
        }
    }
    out
}
