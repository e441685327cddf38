//! Motion evidence extraction: dense optical flow, grid-seeded point
//! tracking, and ingestion of precomputed trajectory files.

pub mod flow;
pub mod track;

pub use flow::{compute_flow, compute_flow_gray, FlowField, FlowParams};
pub use track::{
    advance_trajectories, seed_points, track_video, Trajectory, TrajectoryPointSet, TrackerParams,
};

use std::path::Path;

use crate::error::{Error, Result};

/// Reads precomputed trajectory points: one line per point,
/// `frame_index x y trajectory_id`, whitespace separated. Frames missing from
/// the file yield empty point sets up to the largest frame index seen.
pub fn read_trajectory_file(path: &Path) -> Result<Vec<TrajectoryPointSet>> {
    parse_trajectory_text(&std::fs::read_to_string(path)?)
}

pub fn parse_trajectory_text(text: &str) -> Result<Vec<TrajectoryPointSet>> {
    let mut rows: Vec<(usize, f64, f64, u64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!(
                "trajectory line {}: expected `frame x y id`, got {} fields",
                lineno + 1,
                fields.len()
            )));
        }
        let bad =
            |what: &str| Error::Format(format!("trajectory line {}: bad {what}", lineno + 1));
        let frame: usize = fields[0].parse().map_err(|_| bad("frame_index"))?;
        let x: f64 = fields[1].parse().map_err(|_| bad("x"))?;
        let y: f64 = fields[2].parse().map_err(|_| bad("y"))?;
        let id: u64 = fields[3].parse().map_err(|_| bad("trajectory_id"))?;
        rows.push((frame, x, y, id));
    }
    let max_frame = rows.iter().map(|r| r.0).max().unwrap_or(0);
    let mut sets: Vec<TrajectoryPointSet> = (0..=max_frame)
        .map(|k| TrajectoryPointSet {
            frame_index: k,
            points: Vec::new(),
        })
        .collect();
    for (frame, x, y, id) in rows {
        sets[frame].points.push((x, y, id));
    }
    Ok(sets)
}

/// Serializes point sets in the `frame_index x y trajectory_id` format.
pub fn trajectory_text(sets: &[TrajectoryPointSet]) -> String {
    let mut out = String::new();
    for s in sets {
        for &(x, y, id) in &s.points {
            out.push_str(&format!("{} {} {} {}\n", s.frame_index, x, y, id));
        }
    }
    out
}
