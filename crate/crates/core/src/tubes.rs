//! Motion tubes: per-frame action boxes linked into disjoint chains across a
//! segment.
//!
//! Frames first get their box counts equalized to the floored mean N (excess
//! boxes dropped, missing boxes synthesized by per-coordinate linear
//! regression over the matched chain's history), then consecutive frames are
//! linked by the greedy distance-matrix rule, keeping tubes isolated from
//! each other.

use crate::clustering::ActionBox;
use crate::error::{Error, Result};
use crate::vten::Tensor;

/// Bijective mapping from box index at frame k to box index at frame k+1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn map(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.0.len()];
        for &j in &self.0 {
            if j >= self.0.len() || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        true
    }
}

/// One tracked region: a chain of action boxes, one per segment frame.
#[derive(Debug, Clone)]
pub struct MotionTube {
    pub boxes: Vec<ActionBox>,
}

/// Row-per-(frame, tube) encoding of all tubes in a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeMatrix {
    /// Rows `(frame_index, tube_index, x, y, r)` ordered by frame then tube.
    pub rows: Vec<(usize, usize, f64, f64, f64)>,
}

impl TubeMatrix {
    /// Rank-2 tensor (rows x 5) for VTEN persistence.
    pub fn to_tensor(&self) -> Tensor {
        let mut data = Vec::with_capacity(self.rows.len() * 5);
        for &(k, n, x, y, r) in &self.rows {
            data.extend_from_slice(&[k as f64, n as f64, x, y, r]);
        }
        Tensor::f32_from_f64(vec![self.rows.len(), 5], &data).expect("row-major 5-wide payload")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let dims = t.dims();
        if dims.len() != 2 || dims[1] != 5 {
            return Err(Error::Shape(format!(
                "tube matrix tensor must be rows x 5, got {dims:?}"
            )));
        }
        let data = t.to_f64();
        let rows = data
            .chunks_exact(5)
            .map(|c| (c[0] as usize, c[1] as usize, c[2], c[3], c[4]))
            .collect();
        Ok(Self { rows })
    }
}

/// Equalizes every frame of a segment to exactly N boxes, N being the floored
/// mean count. Starting at the anchor frame (first frame with exactly N
/// boxes, else closest count, earliest on ties) the pass walks backward to
/// the segment start and then forward to its end: surplus frames drop the
/// boxes with the largest minimum centroid distance to the adjacent processed
/// frame, deficit frames gain boxes regressed from the unmatched chain's
/// history (or copies of the chain's adjacent box when the history is a
/// single point). `start_frame` is the absolute index of `per_frame[0]`, so
/// emitted boxes keep absolute frame numbers.
pub fn equalize_box_counts(
    per_frame: &[Vec<ActionBox>],
    start_frame: usize,
) -> Result<(Vec<Vec<ActionBox>>, usize)> {
    let z = per_frame.len();
    assert!(z >= 1, "segment must contain at least one frame");
    let total: usize = per_frame.iter().map(|f| f.len()).sum();
    let n = total / z;
    if n == 0 {
        return Err(Error::NoMotion);
    }

    // Anchor: first frame with exactly n boxes, else the nonempty frame with
    // the closest count (an empty frame cannot seed chains).
    let anchor = per_frame
        .iter()
        .position(|f| f.len() == n)
        .unwrap_or_else(|| {
            per_frame
                .iter()
                .enumerate()
                .filter(|(_, f)| !f.is_empty())
                .min_by_key(|(_, f)| (f.len() as i64 - n as i64).unsigned_abs())
                .map(|(i, _)| i)
                .expect("n >= 1 implies a nonempty frame")
        });

    // Chains record each slot's (relative frame, box) history for regression.
    let mut chains: Vec<Vec<(usize, ActionBox)>> =
        init_anchor_chains(&per_frame[anchor], n, anchor, start_frame);
    let mut out: Vec<Vec<ActionBox>> = vec![Vec::new(); z];
    out[anchor] = chains.iter().map(|c| c[0].1).collect();

    for k in (0..anchor).rev() {
        out[k] = process_frame(&per_frame[k], &mut chains, k, k + 1, start_frame);
    }
    for k in anchor + 1..z {
        out[k] = process_frame(&per_frame[k], &mut chains, k, k - 1, start_frame);
    }

    debug_assert!(out.iter().all(|f| f.len() == n));
    Ok((out, n))
}

fn init_anchor_chains(
    anchor_boxes: &[ActionBox],
    n: usize,
    anchor: usize,
    start_frame: usize,
) -> Vec<Vec<(usize, ActionBox)>> {
    let mut seed: Vec<ActionBox> = anchor_boxes.to_vec();
    match seed.len().cmp(&n) {
        std::cmp::Ordering::Greater => {
            // No neighbor context yet; keep the n largest boxes (stable).
            let mut idx: Vec<usize> = (0..seed.len()).collect();
            idx.sort_by(|&a, &b| {
                seed[b]
                    .r
                    .partial_cmp(&seed[a].r)
                    .unwrap()
                    .then(a.cmp(&b))
            });
            idx.truncate(n);
            idx.sort_unstable();
            seed = idx.into_iter().map(|i| seed[i]).collect();
        }
        std::cmp::Ordering::Less => {
            // Anchor fallback deficit: cycle copies of the existing boxes.
            let have = seed.len();
            for j in have..n {
                let copy = seed[j % have];
                seed.push(copy);
            }
        }
        std::cmp::Ordering::Equal => {}
    }
    seed.into_iter()
        .map(|mut b| {
            b.f = start_frame + anchor;
            vec![(anchor, b)]
        })
        .collect()
}

/// Fixes frame `k` (relative to the segment) to exactly `chains.len()` boxes
/// using the already-processed adjacent frame, then extends every chain.
fn process_frame(
    frame_boxes: &[ActionBox],
    chains: &mut [Vec<(usize, ActionBox)>],
    k: usize,
    adjacent: usize,
    start_frame: usize,
) -> Vec<ActionBox> {
    let n = chains.len();
    let tips: Vec<ActionBox> = chains
        .iter()
        .map(|c| {
            c.iter()
                .find(|(f, _)| *f == adjacent)
                .expect("adjacent frame was processed before this one")
                .1
        })
        .collect();

    let mut boxes: Vec<ActionBox> = frame_boxes.to_vec();
    if boxes.len() > n {
        // Drop the boxes least explainable by the adjacent frame.
        let mut idx: Vec<usize> = (0..boxes.len()).collect();
        let min_dist = |b: &ActionBox| {
            tips.iter()
                .map(|t| b.centroid_distance(t))
                .fold(f64::INFINITY, f64::min)
        };
        idx.sort_by(|&a, &b| {
            min_dist(&boxes[b])
                .partial_cmp(&min_dist(&boxes[a]))
                .unwrap()
                .then(a.cmp(&b))
        });
        idx.truncate(boxes.len() - n);
        let drop: std::collections::HashSet<usize> = idx.into_iter().collect();
        boxes = boxes
            .iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, b)| *b)
            .collect();
    }

    // Global-minimum greedy matching between chain tips and this frame's
    // boxes (ties to the lowest chain then box index), so a stray chain
    // cannot steal another chain's obvious continuation.
    let mut assigned: Vec<Option<ActionBox>> = vec![None; n];
    let mut chain_open: Vec<bool> = vec![true; n];
    let mut box_open: Vec<bool> = vec![true; boxes.len()];
    for _ in 0..n.min(boxes.len()) {
        let mut best: Option<(f64, usize, usize)> = None;
        for (ci, tip) in tips.iter().enumerate() {
            if !chain_open[ci] {
                continue;
            }
            for (bi, b) in boxes.iter().enumerate() {
                if !box_open[bi] {
                    continue;
                }
                let d = tip.centroid_distance(b);
                if best.map(|(bd, _, _)| d < bd).unwrap_or(true) {
                    best = Some((d, ci, bi));
                }
            }
        }
        let (_, ci, bi) = best.expect("open pairs remain");
        chain_open[ci] = false;
        box_open[bi] = false;
        let mut b = boxes[bi];
        b.f = start_frame + k;
        assigned[ci] = Some(b);
    }

    // Unmatched chains receive synthetic boxes.
    let mut out = Vec::with_capacity(n);
    for (ci, slot) in assigned.into_iter().enumerate() {
        let b = match slot {
            Some(b) => b,
            None => synthesize_box(&chains[ci], k, start_frame),
        };
        chains[ci].push((k, b));
        out.push(b);
    }
    out
}

/// Linear-regression extrapolation of (x, y, r) over the chain history, or a
/// copy of the chain's only box when fewer than two history points exist.
fn synthesize_box(history: &[(usize, ActionBox)], k: usize, start_frame: usize) -> ActionBox {
    if history.len() < 2 {
        let (_, tip) = history.last().expect("chains never empty");
        return ActionBox {
            f: start_frame + k,
            ..*tip
        };
    }
    let xs: Vec<f64> = history.iter().map(|(f, _)| *f as f64).collect();
    let fit = |get: fn(&ActionBox) -> f64| -> f64 {
        let ys: Vec<f64> = history.iter().map(|(_, b)| get(b)).collect();
        let (slope, intercept) = ols(&xs, &ys);
        slope * k as f64 + intercept
    };
    let x = fit(|b| b.x);
    let y = fit(|b| b.y);
    let r = fit(|b| b.r).max(1.0);
    ActionBox {
        x,
        y,
        r,
        f: start_frame + k,
    }
}

/// Ordinary least squares y = slope*x + intercept.
fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        (0.0, my)
    } else {
        let slope = sxy / sxx;
        (slope, my - slope * mx)
    }
}

/// Links equal-size box sets of consecutive frames: the distance matrix is
/// consumed row by row in ascending box order, each row taking its
/// minimum-distance remaining column (ties to the lowest column index).
pub fn link_boxes(boxes_k: &[ActionBox], boxes_k1: &[ActionBox]) -> Result<Assignment> {
    if boxes_k.len() != boxes_k1.len() || boxes_k.is_empty() {
        return Err(Error::Shape(format!(
            "link_boxes needs equal nonempty sets, got {} and {}",
            boxes_k.len(),
            boxes_k1.len()
        )));
    }
    let d: Vec<Vec<f64>> = boxes_k
        .iter()
        .map(|a| boxes_k1.iter().map(|b| a.centroid_distance(b)).collect())
        .collect();
    Ok(greedy_assign(&d))
}

/// Consumes a square distance matrix row by row: each row in ascending order
/// links to its minimum remaining column (ties to the lowest column index),
/// and that column is removed.
pub fn greedy_assign(d: &[Vec<f64>]) -> Assignment {
    let n = d.len();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut assignment = vec![0usize; n];
    for (i, row) in d.iter().enumerate() {
        debug_assert_eq!(row.len(), n, "distance matrix must be square");
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .map(|(pos, &j)| (pos, row[j]))
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then(x.0.cmp(&y.0)))
            .expect("remaining never empty before all rows are processed");
        assignment[i] = remaining.remove(pos);
    }
    let assignment = Assignment(assignment);
    debug_assert!(assignment.is_bijection());
    assignment
}

/// Composes per-frame-pair assignments into N disjoint tubes and the
/// row-per-(frame, tube) matrix.
pub fn build_motion_tubes(
    per_frame: &[Vec<ActionBox>],
    assignments: &[Assignment],
) -> Result<(Vec<MotionTube>, TubeMatrix)> {
    let z = per_frame.len();
    assert!(z >= 1);
    let n = per_frame[0].len();
    if assignments.len() + 1 != z {
        return Err(Error::Shape(format!(
            "{} assignments for {z} frames",
            assignments.len()
        )));
    }
    for (k, f) in per_frame.iter().enumerate() {
        if f.len() != n {
            return Err(Error::Shape(format!(
                "frame {k} holds {} boxes, expected {n}",
                f.len()
            )));
        }
    }
    let mut tubes: Vec<MotionTube> = (0..n)
        .map(|j| MotionTube {
            boxes: vec![per_frame[0][j]],
        })
        .collect();
    let mut cursor: Vec<usize> = (0..n).collect();
    for (k, asg) in assignments.iter().enumerate() {
        if asg.len() != n || !asg.is_bijection() {
            return Err(Error::Shape(format!("assignment {k} is not a bijection on {n}")));
        }
        for j in 0..n {
            cursor[j] = asg.map(cursor[j]);
            tubes[j].boxes.push(per_frame[k + 1][cursor[j]]);
        }
    }

    let mut rows = Vec::with_capacity(z * n);
    for k in 0..z {
        for (j, tube) in tubes.iter().enumerate() {
            let b = tube.boxes[k];
            rows.push((b.f, j, b.x, b.y, b.r));
        }
    }
    Ok((tubes, TubeMatrix { rows }))
}

/// Redraws every box of a tube as the largest-side square about its original
/// centroid, shifted (never shrunk) to stay inside the frame.
pub fn normalize_tube_boxes(
    tube: &MotionTube,
    frame_width: usize,
    frame_height: usize,
) -> MotionTube {
    assert!(!tube.boxes.is_empty(), "tube must be nonempty");
    let frame_side = frame_width.min(frame_height) as f64;
    let r = tube
        .boxes
        .iter()
        .map(|b| b.r)
        .fold(0.0, f64::max)
        .min(frame_side);
    let boxes = tube
        .boxes
        .iter()
        .map(|b| {
            let (cx, cy) = b.centroid();
            ActionBox {
                x: (cx - r / 2.0).clamp(0.0, frame_width as f64 - r),
                y: (cy - r / 2.0).clamp(0.0, frame_height as f64 - r),
                r,
                f: b.f,
            }
        })
        .collect();
    MotionTube { boxes }
}
