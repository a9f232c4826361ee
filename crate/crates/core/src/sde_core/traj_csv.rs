//! Debug dump of trajectory batches.
//!
//! Columns, in order:
//!
//! ```text
//! trajectory_id, k, t, x0 … x{D_x-1}, u0 … u{D_u-1}, dw0 … dw{D_w-1}, g
//! ```
//!
//! There are `H + 1` rows per trajectory. The last row (`k = H`) carries the
//! terminal state; its control, increment and running-cost fields are empty.

use std::io::Write;

use super::Trajectory;
use crate::error::{Error, Result};

pub fn trajectory_csv_header(dim_x: usize, dim_u: usize, dim_w: usize) -> Vec<String> {
    let mut cols = vec!["trajectory_id".to_string(), "k".into(), "t".into()];
    cols.extend((0..dim_x).map(|i| format!("x{i}")));
    cols.extend((0..dim_u).map(|i| format!("u{i}")));
    cols.extend((0..dim_w).map(|i| format!("dw{i}")));
    cols.push("g".into());
    cols
}

pub fn write_trajectories_csv<W: Write>(writer: W, trajectories: &[Trajectory]) -> Result<()> {
    let Some(first) = trajectories.first() else {
        return Ok(());
    };
    let dim_x = first.dim_x();
    let dim_u = first.controls.first().map_or(0, |u| u.len());
    let dim_w = first.dim_w();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(trajectory_csv_header(dim_x, dim_u, dim_w))?;
    for (id, traj) in trajectories.iter().enumerate() {
        if traj.dim_x() != dim_x || traj.dim_w() != dim_w {
            return Err(Error::InvalidArgument(
                "trajectories in one CSV must share dimensions".into(),
            ));
        }
        for k in 0..=traj.steps() {
            let mut row = vec![id.to_string(), k.to_string(), traj.grid.node(k).to_string()];
            row.extend(traj.states[k].iter().map(|v| v.to_string()));
            if k < traj.steps() {
                row.extend(traj.controls[k].iter().map(|v| v.to_string()));
                row.extend(traj.dw.step(k).iter().map(|v| v.to_string()));
                row.push(traj.running_costs[k].to_string());
            } else {
                row.extend(std::iter::repeat_n(String::new(), dim_u + dim_w + 1));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
