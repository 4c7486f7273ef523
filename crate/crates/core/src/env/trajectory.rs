use std::io::{self, Write};

use super::StepResult;
use crate::vehicle::Action;

pub const TRAJECTORY_HEADER: &str =
    "step,t,x,y,psi,v_joint,a_T,a_delta,T,delta,r_m,reward,terminated,truncated";

/// One logged step. `a_*` is the raw policy action, `T`/`delta` the clamped
/// control input actually applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v_joint: f64,
    pub a_throttle: f64,
    pub a_steer: f64,
    pub throttle: f64,
    pub steer: f64,
    pub r_m: f64,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl TrajectoryRow {
    pub fn new(action: Action, result: &StepResult, sample_time: f64) -> Self {
        let i = &result.info;
        Self {
            step: i.step,
            t: i.step as f64 * sample_time,
            x: i.x,
            y: i.y,
            psi: i.psi,
            v_joint: i.v_joint,
            a_throttle: action.throttle(),
            a_steer: action.steer(),
            throttle: i.throttle,
            steer: i.steer,
            r_m: i.r_m,
            reward: result.reward,
            terminated: result.terminated,
            truncated: result.truncated,
        }
    }
}

/// Rust's `Display` for `f64` prints the shortest string that parses back to
/// the same value, so rows round-trip exactly.
pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, r: &TrajectoryRow) -> io::Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.t,
            r.x,
            r.y,
            r.psi,
            r.v_joint,
            r.a_throttle,
            r.a_steer,
            r.throttle,
            r.steer,
            r.r_m,
            r.reward,
            r.terminated,
            r.truncated
        )
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let row = TrajectoryRow {
            step: 3,
            t: 0.03,
            x: 0.1 + 0.2,
            y: -1.0 / 3.0,
            psi: std::f64::consts::PI,
            v_joint: 1e-300,
            a_throttle: 0.5,
            a_steer: -0.2,
            throttle: 0.5,
            steer: -0.2,
            r_m: 2.25,
            reward: 1.07,
            terminated: false,
            truncated: true,
        };
        let mut w = TrajectoryWriter::new(Vec::new()).unwrap();
        w.write(&row).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRAJECTORY_HEADER));
        let f: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(f.len(), 14);
        assert_eq!(f[2].parse::<f64>().unwrap(), row.x);
        assert_eq!(f[3].parse::<f64>().unwrap(), row.y);
        assert_eq!(f[5].parse::<f64>().unwrap(), row.v_joint);
        assert_eq!(f[13], "true");
    }
}
