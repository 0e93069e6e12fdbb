//! Simultaneous gradient descent-ascent on `f(x, y) = xy`.
//!
//! The update `x' = x - a·y`, `y' = y + a·x` multiplies the squared distance to
//! the unique saddle `(0, 0)` by exactly `1 + a²` per step, so the iterates
//! spiral outward for every positive step size.

use std::io::Write;

use crate::diagnostics::{RunTrace, TraceRow};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaddleState {
    pub x: f64,
    pub y: f64,
    pub step: f64,
}

impl SaddleState {
    pub fn radius_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }
}

/// Descent in `x`, ascent in `y`, both from the current point.
pub fn saddle_step(s: SaddleState) -> SaddleState {
    SaddleState { x: s.x - s.step * s.y, y: s.y + s.step * s.x, step: s.step }
}

/// The initial state followed by `steps` updates.
pub fn saddle_trajectory(start: SaddleState, steps: usize) -> Vec<SaddleState> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = start;
    out.push(s);
    for _ in 0..steps {
        s = saddle_step(s);
        out.push(s);
    }
    out
}

/// Adapts a trajectory to the generic trace shape: `objective = xy`, and
/// `cov_gap` holds the squared distance to the saddle point.
pub fn saddle_trace(traj: &[SaddleState]) -> RunTrace {
    let mut t = RunTrace::default();
    for (i, s) in traj.iter().enumerate() {
        t.push(TraceRow {
            iteration: i,
            objective: s.x * s.y,
            disc_accuracy: 0.5,
            mean_gap: 0.0,
            cov_gap: s.radius_sq(),
        });
    }
    t
}

/// `iter,x,y,r2`
pub fn write_saddle_csv<W: Write>(w: W, traj: &[SaddleState]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iter", "x", "y", "r2"])?;
    for (i, s) in traj.iter().enumerate() {
        out.write_record([i.to_string(), s.x.to_string(), s.y.to_string(), s.radius_sq().to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{classify_trace, RunStatus};
    use proptest::prelude::*;

    #[test]
    fn origin_is_fixed() {
        let s = saddle_step(SaddleState { x: 0.0, y: 0.0, step: 0.7 });
        assert_eq!((s.x, s.y), (0.0, 0.0));
    }

    #[test]
    fn one_step_from_unit_x() {
        let s = saddle_step(SaddleState { x: 1.0, y: 0.0, step: 0.1 });
        assert_eq!((s.x, s.y), (1.0, 0.1));
        assert!((s.radius_sq() - 1.01).abs() < 1e-15);
    }

    #[test]
    fn long_trajectory_is_classified_diverged() {
        // (1.25)^t passes 1e12 after ~124 steps.
        let traj = saddle_trajectory(SaddleState { x: 1.0, y: 0.0, step: 0.5 }, 400);
        let trace = saddle_trace(&traj);
        assert_eq!(classify_trace(&trace, 40, 0.05).unwrap(), RunStatus::Diverged);
    }

    proptest! {
        #[test]
        fn radius_recurrence(x in -1e3..1e3f64, y in -1e3..1e3f64, a in 0.0..2.0f64) {
            let s = SaddleState { x, y, step: a };
            let r0 = s.radius_sq();
            let r1 = saddle_step(s).radius_sq();
            prop_assert!((r1 - (1.0 + a * a) * r0).abs() <= 1e-12 * r1.max(1e-300));
        }
    }
}
