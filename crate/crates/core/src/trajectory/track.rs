//! Grid-seeded point tracking over dense flow.
//!
//! A simplified stand-in for full dense-trajectory extraction: points are
//! seeded on a coarse grid wherever flow is strong, advanced by the median
//! flow of their 3x3 neighborhood, and terminated when they leave the frame,
//! exceed the length cap, or jump implausibly far in one step.

use super::flow::FlowField;

/// A tracked point with its per-frame history `(frame_index, x, y)`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub id: u64,
    pub points: Vec<(usize, f64, f64)>,
    pub alive: bool,
}

impl Trajectory {
    pub fn last_position(&self) -> (f64, f64) {
        let &(_, x, y) = self.points.last().expect("trajectory never empty");
        (x, y)
    }

    pub fn last_frame(&self) -> usize {
        self.points.last().expect("trajectory never empty").0
    }

    /// Displacement of the most recent advance, zero for fresh seeds.
    pub fn last_displacement(&self) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        let (_, x1, y1) = self.points[self.points.len() - 1];
        let (_, x0, y0) = self.points[self.points.len() - 2];
        ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
    }
}

/// Moving-point evidence for one frame: `(x, y, trajectory_id)` per live
/// trajectory that moved at least `min_displacement`.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryPointSet {
    pub frame_index: usize,
    pub points: Vec<(f64, f64, u64)>,
}

/// Tracker tuning knobs.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrackerParams {
    pub max_trajectory_length: usize,
    pub max_jump: f64,
    pub min_displacement: f64,
    pub grid_step: usize,
    pub mag_threshold: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            max_trajectory_length: 15,
            max_jump: 8.0,
            min_displacement: 0.4,
            grid_step: 5,
            mag_threshold: 0.5,
        }
    }
}

/// Advances every live trajectory from `frame_index - 1` to `frame_index` by
/// the median flow in its 3x3 neighborhood. Returns `(live, terminated)`.
pub fn advance_trajectories(
    live: Vec<Trajectory>,
    flow: &FlowField,
    frame_index: usize,
    params: &TrackerParams,
) -> (Vec<Trajectory>, Vec<Trajectory>) {
    let mut kept = Vec::with_capacity(live.len());
    let mut dead = Vec::new();
    let (w, h) = (flow.width, flow.height);
    for mut t in live {
        debug_assert_eq!(t.last_frame(), frame_index - 1);
        if t.points.len() >= params.max_trajectory_length {
            t.alive = false;
            dead.push(t);
            continue;
        }
        let (x, y) = t.last_position();
        let (du, dv) = median_flow_3x3(flow, x, y);
        let jump = (du * du + dv * dv).sqrt();
        let nx = x + du;
        let ny = y + dv;
        let in_bounds = nx >= 0.0 && nx <= (w - 1) as f64 && ny >= 0.0 && ny <= (h - 1) as f64;
        if jump > params.max_jump || !in_bounds {
            t.alive = false;
            dead.push(t);
            continue;
        }
        t.points.push((frame_index, nx, ny));
        kept.push(t);
    }
    (kept, dead)
}

fn median_flow_3x3(flow: &FlowField, x: f64, y: f64) -> (f64, f64) {
    let cx = x.round() as isize;
    let cy = y.round() as isize;
    let mut us = [0.0; 9];
    let mut vs = [0.0; 9];
    let mut i = 0;
    for dy in -1..=1 {
        for dx in -1..=1 {
            let px = (cx + dx).clamp(0, flow.width as isize - 1) as usize;
            let py = (cy + dy).clamp(0, flow.height as isize - 1) as usize;
            let (u, v) = flow.at(px, py);
            us[i] = u;
            vs[i] = v;
            i += 1;
        }
    }
    (median9(&mut us), median9(&mut vs))
}

fn median9(vals: &mut [f64; 9]) -> f64 {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals[4]
}

/// Seeds one new trajectory per unoccupied grid cell whose peak flow
/// magnitude reaches `mag_threshold`. The seed lands on the cell's
/// max-magnitude pixel. `next_id` supplies unique ids.
pub fn seed_points(
    flow: &FlowField,
    live: &[Trajectory],
    frame_index: usize,
    params: &TrackerParams,
    next_id: &mut u64,
) -> Vec<Trajectory> {
    assert!(params.grid_step >= 1, "grid_step must be >= 1");
    let step = params.grid_step;
    let cells_x = flow.width.div_ceil(step);
    let cells_y = flow.height.div_ceil(step);
    let mut occupied = vec![false; cells_x * cells_y];
    for t in live {
        let (x, y) = t.last_position();
        let cx = (x as usize / step).min(cells_x - 1);
        let cy = (y as usize / step).min(cells_y - 1);
        occupied[cy * cells_x + cx] = true;
    }
    let mut seeds = Vec::new();
    for cy in 0..cells_y {
        for cx in 0..cells_x {
            if occupied[cy * cells_x + cx] {
                continue;
            }
            let mut best_mag = 0.0;
            let mut best = None;
            for y in cy * step..((cy + 1) * step).min(flow.height) {
                for x in cx * step..((cx + 1) * step).min(flow.width) {
                    let m = flow.magnitude(x, y);
                    if m > best_mag {
                        best_mag = m;
                        best = Some((x, y));
                    }
                }
            }
            if best_mag >= params.mag_threshold {
                let (x, y) = best.unwrap();
                seeds.push(Trajectory {
                    id: *next_id,
                    points: vec![(frame_index, x as f64, y as f64)],
                    alive: true,
                });
                *next_id += 1;
            }
        }
    }
    seeds
}

/// Runs the full tracking loop over per-frame flow fields (`flows[k]` maps
/// frame `k` to `k + 1`) and emits moving-point evidence per frame.
///
/// The set for frame `k` holds the frame-`k` positions of trajectories that
/// moved at least `min_displacement` between `k` and `k + 1`; the final frame
/// reuses its incoming displacements.
pub fn track_video(flows: &[FlowField], params: &TrackerParams) -> Vec<TrajectoryPointSet> {
    let frame_count = flows.len() + 1;
    let mut sets: Vec<TrajectoryPointSet> = (0..frame_count)
        .map(|k| TrajectoryPointSet {
            frame_index: k,
            points: Vec::new(),
        })
        .collect();
    let mut live: Vec<Trajectory> = Vec::new();
    let mut next_id = 0u64;
    for (k, flow) in flows.iter().enumerate() {
        let seeds = seed_points(flow, &live, k, params, &mut next_id);
        live.extend(seeds);
        let (advanced, _dead) = advance_trajectories(live, flow, k + 1, params);
        live = advanced;
        for t in &live {
            if t.last_displacement() >= params.min_displacement {
                let n = t.points.len();
                let (_, px, py) = t.points[n - 2];
                sets[k].points.push((px, py, t.id));
                if k + 1 == frame_count - 1 {
                    let (_, cx, cy) = t.points[n - 1];
                    sets[k + 1].points.push((cx, cy, t.id));
                }
            }
        }
    }
    sets
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_flow(w: usize, h: usize, u: f64, v: f64) -> FlowField {
        FlowField {
            u: vec![u; w * h],
            v: vec![v; w * h],
            width: w,
            height: h,
        }
    }

    fn traj(id: u64, frame: usize, x: f64, y: f64) -> Trajectory {
        Trajectory {
            id,
            points: vec![(frame, x, y)],
            alive: true,
        }
    }

    #[test]
    fn uniform_field_displaces_point() {
        let flow = uniform_flow(32, 32, 2.0, 0.0);
        let (live, dead) =
            advance_trajectories(vec![traj(0, 0, 10.0, 10.0)], &flow, 1, &TrackerParams::default());
        assert!(dead.is_empty());
        assert_eq!(live[0].last_position(), (12.0, 10.0));
    }

    #[test]
    fn boundary_exit_terminates() {
        let flow = uniform_flow(32, 32, -5.0, 0.0);
        let (live, dead) =
            advance_trajectories(vec![traj(0, 0, 1.0, 1.0)], &flow, 1, &TrackerParams::default());
        assert!(live.is_empty());
        assert_eq!(dead.len(), 1);
        assert!(!dead[0].alive);
    }

    #[test]
    fn length_cap_terminates_regardless_of_flow() {
        let flow = uniform_flow(32, 32, 0.0, 0.0);
        let mut t = traj(0, 0, 16.0, 16.0);
        for k in 1..15 {
            t.points.push((k, 16.0, 16.0));
        }
        assert_eq!(t.points.len(), 15);
        let (live, dead) = advance_trajectories(vec![t], &flow, 15, &TrackerParams::default());
        assert!(live.is_empty());
        assert_eq!(dead.len(), 1);
    }

    #[test]
    fn excessive_jump_terminates() {
        let flow = uniform_flow(64, 64, 9.0, 0.0);
        let (live, dead) =
            advance_trajectories(vec![traj(0, 0, 20.0, 20.0)], &flow, 1, &TrackerParams::default());
        assert!(live.is_empty());
        assert_eq!(dead.len(), 1);
    }

    #[test]
    fn zero_flow_seeds_nothing() {
        let flow = uniform_flow(32, 32, 0.0, 0.0);
        let mut id = 0;
        let seeds = seed_points(&flow, &[], 0, &TrackerParams::default(), &mut id);
        assert!(seeds.is_empty());
    }

    #[test]
    fn seeds_only_inside_moving_blob_cells() {
        // A 10x10 moving blob in a 40x40 frame; enumerate expected cells.
        let (w, h) = (40, 40);
        let mut flow = FlowField::zeros(w, h);
        for y in 10..20 {
            for x in 10..20 {
                flow.u[y * w + x] = 1.5;
            }
        }
        let params = TrackerParams::default(); // grid_step 5
        let mut id = 0;
        let seeds = seed_points(&flow, &[], 0, &params, &mut id);
        // Blob covers cells (2,2),(3,2),(2,3),(3,3) exactly.
        assert_eq!(seeds.len(), 4);
        for s in &seeds {
            let (x, y) = s.last_position();
            assert!((10.0..20.0).contains(&x) && (10.0..20.0).contains(&y));
        }
    }

    #[test]
    fn occupied_cells_are_vetoed() {
        let flow = uniform_flow(10, 10, 2.0, 0.0); // everything moving
        let params = TrackerParams::default(); // 2x2 cells of 5px
        let live: Vec<Trajectory> = vec![
            traj(0, 0, 1.0, 1.0),
            traj(1, 0, 7.0, 1.0),
            traj(2, 0, 1.0, 7.0),
            traj(3, 0, 7.0, 7.0),
        ];
        let mut id = 4;
        let seeds = seed_points(&flow, &live, 0, &params, &mut id);
        assert!(seeds.is_empty());
    }

    #[test]
    fn no_two_seeds_share_a_cell() {
        let flow = uniform_flow(40, 40, 1.0, 1.0);
        let params = TrackerParams::default();
        let mut id = 0;
        let seeds = seed_points(&flow, &[], 0, &params, &mut id);
        let mut cells: Vec<(usize, usize)> = seeds
            .iter()
            .map(|s| {
                let (x, y) = s.last_position();
                ((x as usize) / params.grid_step, (y as usize) / params.grid_step)
            })
            .collect();
        let n = cells.len();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), n);
    }

    #[test]
    fn point_sets_stay_in_bounds_and_track_motion() {
        // Rightward motion in a band; all emitted points must be in bounds.
        let (w, h) = (48, 48);
        let mut flows = Vec::new();
        for _ in 0..10 {
            let mut f = FlowField::zeros(w, h);
            for y in 20..30 {
                for x in 4..44 {
                    f.u[y * w + x] = 1.0;
                }
            }
            flows.push(f);
        }
        let params = TrackerParams {
            grid_step: 3,
            ..TrackerParams::default()
        };
        let sets = track_video(&flows, &params);
        assert_eq!(sets.len(), 11);
        assert!(sets[1..].iter().take(9).all(|s| !s.points.is_empty()));
        for s in &sets {
            for &(x, y, _) in &s.points {
                assert!(x >= 0.0 && x <= (w - 1) as f64);
                assert!(y >= 0.0 && y <= (h - 1) as f64);
            }
        }
    }
}
