//! Trajectory CSV serialization. Floats are written with 17 significant
//! digits so a read-back reproduces the exact f64 bits.

use std::io::{BufRead, BufReader, Read, Write};

use crate::dynamics::{State, TorquePair};
use crate::{Error, Result};

use super::trajectory::{Trajectory, TrajectorySample};

pub const CSV_HEADER: &str = "t,theta1,theta2,omega1,omega2,tau1,tau2,action,reward";

const COLUMNS: [&str; 9] = [
    "t", "theta1", "theta2", "omega1", "omega2", "tau1", "tau2", "action", "reward",
];

pub fn write_csv(traj: &Trajectory, mut w: impl Write) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for s in &traj.samples {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.t,
            s.state.theta1,
            s.state.theta2,
            s.state.omega1,
            s.state.omega2,
            s.tau.tau1,
            s.tau.tau2,
            s.action,
            s.reward
        )?;
    }
    Ok(())
}

/// Reads a trajectory back. Errors carry the 1-based row (header is row 1)
/// and the offending column. The divergence flag is report metadata and is
/// not represented in the CSV; read trajectories come back not-diverged.
pub fn read_csv(r: impl Read) -> Result<Trajectory> {
    let mut lines = BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Csv {
            row: 1,
            column: "t".into(),
            message: "empty file".into(),
        })??;
    if header.trim_end() != CSV_HEADER {
        return Err(Error::Csv {
            row: 1,
            column: "t".into(),
            message: format!("bad header `{header}`, expected `{CSV_HEADER}`"),
        });
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != COLUMNS.len() {
            return Err(Error::Csv {
                row,
                column: COLUMNS[fields.len().min(COLUMNS.len() - 1)].into(),
                message: format!("expected {} fields, got {}", COLUMNS.len(), fields.len()),
            });
        }
        let mut vals = [0.0f64; 9];
        for (j, f) in fields.iter().enumerate() {
            vals[j] = f.trim().parse::<f64>().map_err(|e| Error::Csv {
                row,
                column: COLUMNS[j].into(),
                message: format!("`{f}`: {e}"),
            })?;
            if !vals[j].is_finite() {
                return Err(Error::Csv {
                    row,
                    column: COLUMNS[j].into(),
                    message: format!("non-finite value `{f}`"),
                });
            }
        }
        samples.push(TrajectorySample {
            t: vals[0],
            state: State::new(vals[1], vals[2], vals[3], vals[4]),
            tau: TorquePair {
                tau1: vals[5],
                tau2: vals[6],
            },
            action: vals[7],
            reward: vals[8],
        });
    }
    let traj = Trajectory {
        samples,
        diverged: false,
    };
    traj.validate()?;
    Ok(traj)
}
