use super::{DensityMatrix, DissipatorSet, DriveGenerator, FreeEvolution, IntegratorConfig, POSITIVITY_TOL};
use crate::error::{Error, Result};
use crate::hamiltonian::{LevelScheme, Mat4, PulseSpec, C64, EXCITED_STATES, GROUND_STATES};

#[derive(Debug, Clone, PartialEq)]
pub enum Drive {
    /// No optical field; propagated in closed form in the current frame.
    Silence,
    Pulse { pulse: PulseSpec, calibration: f64 },
    Cw { rabi: f64, detuning: f64, coupling_weights: [C64; 4] },
}

impl Drive {
    fn frame(&self) -> Option<f64> {
        match self {
            Drive::Silence => None,
            Drive::Pulse { pulse, .. } => Some(pulse.detuning),
            Drive::Cw { detuning, .. } => Some(*detuning),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub drive: Drive,
}

impl Segment {
    pub fn silence(start: f64, end: f64) -> Self {
        Self { start, end, drive: Drive::Silence }
    }

    /// The pulse's full integration window around its arrival time.
    pub fn pulse(pulse: &PulseSpec, calibration: f64) -> Self {
        let w = pulse.half_window();
        Self {
            start: pulse.arrival_time - w,
            end: pulse.arrival_time + w,
            drive: Drive::Pulse { pulse: pulse.clone(), calibration },
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&DensityMatrix> {
        self.states.last()
    }
}

/// Re-expresses ρ from a frame with excited-state detuning `from` to one with
/// detuning `to` at absolute time `t`. Only ground–excited coherences change.
pub fn change_frame(rho: &Mat4, from: f64, to: f64, t: f64) -> Mat4 {
    if from == to {
        return *rho;
    }
    let phase = C64::from_polar(1.0, (from - to) * t);
    let mut out = *rho;
    for e in EXCITED_STATES {
        for g in GROUND_STATES {
            out[(e, g)] *= phase;
            out[(g, e)] *= phase.conj();
        }
    }
    out
}

fn checked(rho: Mat4, time: f64) -> Result<DensityMatrix> {
    let state = DensityMatrix::from_matrix_unchecked(rho);
    let min = state.min_eigenvalue();
    if min < -POSITIVITY_TOL || !min.is_finite() {
        return Err(Error::Positivity { time, min_eigenvalue: min });
    }
    Ok(state)
}

/// Integrates through contiguous segments, recording ρ at each requested
/// sample time inside the span and at the end.
///
/// The frame follows the most recent drive; `levels.detuning` is the initial one.
pub fn evolve(
    rho0: &DensityMatrix,
    levels: &LevelScheme,
    segments: &[Segment],
    d: &DissipatorSet,
    cfg: &IntegratorConfig,
    sample_times: &[f64],
) -> Result<Trajectory> {
    cfg.validate()?;
    d.validate()?;
    let first = segments.first().ok_or_else(|| Error::invalid("segments", "need at least one segment"))?;
    for (i, s) in segments.iter().enumerate() {
        if !(s.end > s.start) {
            return Err(Error::invalid(format!("segments[{i}]"), "end must be after start"));
        }
        if let Some(next) = segments.get(i + 1) {
            let tol = 1e-12 * s.end.abs().max(next.start.abs()).max(1e-300);
            if (next.start - s.end).abs() > tol {
                return Err(Error::invalid(
                    format!("segments[{}]", i + 1),
                    format!("must start where segments[{i}] ends ({:e} s), got {:e} s", s.end, next.start),
                ));
            }
        }
    }
    let t_end = segments.last().map(|s| s.end).unwrap_or(first.start);
    let mut samples: Vec<f64> = sample_times
        .iter()
        .copied()
        .filter(|t| *t >= first.start && *t <= t_end)
        .collect();
    samples.sort_by(f64::total_cmp);
    samples.dedup();

    let propagator = cfg.propagator()?;
    let mut traj = Trajectory::default();
    let mut rho = *rho0.matrix();
    let mut frame = levels.detuning;
    let mut next_sample = samples.iter().peekable();
    let mut t = first.start;
    while next_sample.peek().is_some_and(|s| **s <= t) {
        traj.times.push(t);
        traj.states.push(checked(rho, t)?);
        next_sample.next();
    }

    for seg in segments {
        if let Some(to) = seg.drive.frame() {
            rho = change_frame(&rho, frame, to, seg.start);
            frame = to;
        }
        let frame_levels = levels.with_detuning(frame);
        let free = FreeEvolution::new(&frame_levels, d);
        let gen = match &seg.drive {
            Drive::Silence => None,
            Drive::Pulse { pulse, calibration } => Some(DriveGenerator::pulse(levels, pulse, *calibration, d)),
            Drive::Cw { rabi, detuning, coupling_weights } => {
                Some(DriveGenerator::cw(levels, *rabi, *detuning, *coupling_weights, d))
            }
        };
        let advance = |rho: &Mat4, from: f64, to: f64| -> Result<Mat4> {
            match &gen {
                None => Ok(free.propagate(rho, to - from, 0.0)),
                Some(g) => propagator.propagate(g, rho, from, to, cfg),
            }
        };
        while let Some(&&ts) = next_sample.peek() {
            if ts > seg.end {
                break;
            }
            rho = advance(&rho, t, ts)?;
            t = ts;
            traj.times.push(t);
            traj.states.push(checked(rho, t)?);
            next_sample.next();
        }
        if seg.end > t {
            rho = advance(&rho, t, seg.end)?;
            t = seg.end;
        }
    }
    if traj.times.last() != Some(&t_end) {
        traj.times.push(t_end);
        traj.states.push(checked(rho, t_end)?);
    }
    Ok(traj)
}
