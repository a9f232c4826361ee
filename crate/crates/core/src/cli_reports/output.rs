use std::io::Write;

use super::example1::Example1Run;
use crate::error::Result;
use crate::gradcheck::GradCheck;
use crate::policy_iteration::IterationReport;

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Columns `step, train_loss, val_loss, theta, y0_db`.
pub fn write_example1_steps<W: Write>(w: W, run: &Example1Run) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["step", "train_loss", "val_loss", "theta", "y0_db"])?;
    for r in &run.records {
        out.write_record([
            r.step.to_string(),
            r.train_loss.to_string(),
            r.val_loss.to_string(),
            r.theta.to_string(),
            opt(r.y0_db),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per dimension with the final estimate and its limit.
pub fn write_example1_summary<W: Write>(
    w: W,
    loss: &str,
    parameterization: &str,
    runs: &[Example1Run],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "n",
        "loss",
        "param",
        "final_theta",
        "target_theta",
        "abs_error",
        "final_y0_db",
    ])?;
    for run in runs {
        out.write_record([
            run.n.to_string(),
            loss.to_string(),
            parameterization.to_string(),
            run.final_theta.to_string(),
            run.target_theta.to_string(),
            run.abs_error().to_string(),
            opt(run.final_y0_db),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per outer iteration.
pub fn write_iteration_reports<W: Write>(w: W, reports: &[IterationReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let dim_x = reports.first().map_or(0, |r| r.rollout.dim_x());
    let mut header: Vec<String> = [
        "iteration",
        "eval_loss",
        "eval_steps",
        "improve_loss",
        "improve_steps",
        "cost",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..dim_x).map(|j| format!("terminal_x{j}")));
    out.write_record(&header)?;
    for r in reports {
        let mut row = vec![
            r.iteration.to_string(),
            opt(r.eval_loss),
            r.eval_steps.to_string(),
            opt(r.improve_loss),
            r.improve_steps.to_string(),
            r.cost().to_string(),
        ];
        row.extend(r.terminal_state().iter().map(|v| v.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Noise-free rollouts: `iteration, k, t, x…, u…, cost_to_go`. The final
/// node has no control.
pub fn write_rollout_traces<W: Write>(w: W, reports: &[IterationReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let Some(first) = reports.first() else {
        out.flush()?;
        return Ok(());
    };
    let dim_x = first.rollout.dim_x();
    let dim_u = first.rollout.controls.first().map_or(0, |u| u.len());
    let mut header = vec!["iteration".to_string(), "k".into(), "t".into()];
    header.extend((0..dim_x).map(|j| format!("x{j}")));
    header.extend((0..dim_u).map(|j| format!("u{j}")));
    header.push("cost_to_go".into());
    out.write_record(&header)?;
    for r in reports {
        let traj = &r.rollout;
        let ctg = traj.cost_to_go();
        for (k, x) in traj.states.iter().enumerate() {
            let mut row = vec![r.iteration.to_string(), k.to_string(), traj.grid.node(k).to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            match traj.controls.get(k) {
                Some(u) => row.extend(u.iter().map(|v| v.to_string())),
                None => row.extend((0..dim_u).map(|_| String::new())),
            }
            row.push(ctg[k].to_string());
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_gradcheck<W: Write>(w: W, checks: &[GradCheck]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["arch", "loss", "num_params", "max_rel_error", "tolerance", "passed"])?;
    for c in checks {
        out.write_record([
            c.arch.clone(),
            c.loss.to_string(),
            c.num_params.to_string(),
            c.max_rel_error.to_string(),
            c.tolerance.to_string(),
            c.passed().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
