//! Open-loop along-span motion from clamp timing.
//!
//! A platform clamped to the drive loop between `t_s` and `t_a` is carried
//! `ΔD = r·ω·(t_a − t_s)` along the cable. Positioning is done entirely by
//! choosing those instants; [`Planner`] turns displacement requests into
//! clamp timelines for single platforms or synchronized groups.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{CafeState, CableSystemConfig, ClampTarget, ClampTimeline, ClampingParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("clamp-off time {t_a} precedes clamp-on time {t_s}")]
    ReversedInterval { t_s: f64, t_a: f64 },
    #[error("cafe {cafe}: position {x:.6} m is outside the span [0, {span}]")]
    OutOfRange { cafe: usize, x: f64, span: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cafe {cafe}: move starting at {t:.6} s overlaps its previous segment")]
    CommandConflict { cafe: usize, t: f64 },
}

/// The roller drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveState {
    /// Cable surface speed `r·ω`, m/s.
    pub surface_speed: f64,
    pub running: bool,
}

impl DriveState {
    pub fn from_system(system: &CableSystemConfig) -> Self {
        Self {
            surface_speed: system.surface_speed(),
            running: true,
        }
    }

    pub fn with_speed(surface_speed: f64) -> Self {
        Self {
            surface_speed,
            running: true,
        }
    }
}

/// Cable travel between clamp-on `t_s` and clamp-off `t_a`.
pub fn drive_displacement(t_s: f64, t_a: f64, drive: &DriveState) -> Result<f64, KinematicsError> {
    if t_a < t_s {
        return Err(KinematicsError::ReversedInterval { t_s, t_a });
    }
    if !drive.running {
        return Ok(0.0);
    }
    Ok(drive.surface_speed * (t_a - t_s))
}

/// Position after being carried `delta_d` in direction `s` from the state's
/// stored position. Returns `(x, z_nominal)`; `z_nominal` is the rigid-cable
/// height and excludes sag.
pub fn advance_position(
    state: &CafeState,
    s: ClampTarget,
    delta_d: f64,
    incline: f64,
    span: f64,
) -> Result<(f64, f64), KinematicsError> {
    if !(delta_d >= 0.0) {
        return Err(KinematicsError::InvalidArgument(format!(
            "displacement must be >= 0, got {delta_d}"
        )));
    }
    let travel = s.sign() * delta_d;
    let x = travel * incline.cos() + state.x;
    let z = travel * incline.sin() + state.z;
    if !(0.0..=span).contains(&x) {
        return Err(KinematicsError::OutOfRange {
            cafe: state.id,
            x,
            span,
        });
    }
    Ok((x, z))
}

/// One clamped stretch on the drive: on at `t_on`, off at `t_off`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveSegment {
    pub t_on: f64,
    pub t_off: f64,
    pub direction: ClampTarget,
}

impl MoveSegment {
    pub fn duration(&self) -> f64 {
        self.t_off - self.t_on
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoordinationMode {
    Independent,
    /// Every platform moves only as part of these groups.
    Cooperative(Vec<Vec<usize>>),
    Mixed,
}

/// Clamp segments per platform, plus the groups that were planned together.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MotionPlan {
    pub segments: BTreeMap<usize, Vec<MoveSegment>>,
    pub groups: Vec<Vec<usize>>,
}

impl MotionPlan {
    pub fn mode(&self) -> CoordinationMode {
        let grouped: Vec<usize> = self.groups.iter().flatten().copied().collect();
        let moving: Vec<usize> = self
            .segments
            .iter()
            .filter(|(_, s)| !s.is_empty())
            .map(|(id, _)| *id)
            .collect();
        if self.groups.is_empty() {
            CoordinationMode::Independent
        } else if moving.iter().all(|id| grouped.contains(id)) && self.all_moves_grouped() {
            CoordinationMode::Cooperative(self.groups.clone())
        } else {
            CoordinationMode::Mixed
        }
    }

    fn all_moves_grouped(&self) -> bool {
        // every segment of every grouped platform must be shared with its group
        self.groups.iter().all(|g| {
            let first = self.segments.get(&g[0]);
            g.iter().all(|id| self.segments.get(id) == first)
        })
    }

    /// Clamp commands that realize the plan: engage `transition` before each
    /// segment so coupling starts on time, release at `t_off`.
    pub fn to_timeline(&self, transition: f64) -> ClampTimeline {
        let mut t = ClampTimeline::new();
        for (&id, segs) in &self.segments {
            for seg in segs {
                if seg.direction == ClampTarget::Stationary || seg.duration() <= 0.0 {
                    continue;
                }
                t.push(id, seg.t_on - transition, seg.direction);
                t.push(id, seg.t_off, ClampTarget::Stationary);
            }
        }
        t
    }
}

struct Cursor {
    x: f64,
    /// Earliest instant a new segment may begin coupling.
    ready: f64,
}

/// Builds a [`MotionPlan`] one move at a time, tracking where each platform
/// ends up and when it is free to clamp again.
pub struct Planner {
    drive: DriveState,
    transition: f64,
    span: f64,
    incline: f64,
    cursors: BTreeMap<usize, Cursor>,
    plan: MotionPlan,
}

impl Planner {
    /// Platforms start where `cafes` places them; the first move can couple
    /// at `start_time + transition_duration`.
    pub fn new(
        system: &CableSystemConfig,
        clamping: &ClampingParams,
        cafes: &[CafeState],
        start_time: f64,
    ) -> Self {
        let transition = clamping.transition_duration;
        let cursors = cafes
            .iter()
            .map(|c| {
                (
                    c.id,
                    Cursor {
                        x: c.x,
                        ready: start_time + transition,
                    },
                )
            })
            .collect();
        Self {
            drive: DriveState::from_system(system),
            transition,
            span: system.span_length,
            incline: system.incline_angle,
            cursors,
            plan: MotionPlan::default(),
        }
    }

    pub fn drive(&self) -> DriveState {
        self.drive
    }

    /// Planned position of `cafe` after all moves so far.
    pub fn position(&self, cafe: usize) -> Option<f64> {
        self.cursors.get(&cafe).map(|c| c.x)
    }

    /// Holds every listed platform until `t`.
    pub fn wait_until(&mut self, cafes: &[usize], t: f64) {
        for id in cafes {
            if let Some(c) = self.cursors.get_mut(id) {
                c.ready = c.ready.max(t + self.transition);
            }
        }
    }

    fn segment_for(&self, displacement: f64, start: f64, s: ClampTarget) -> Result<MoveSegment, KinematicsError> {
        if !(displacement >= 0.0) {
            return Err(KinematicsError::InvalidArgument(format!(
                "target displacement must be >= 0, got {displacement}"
            )));
        }
        if !(self.drive.surface_speed > 0.0) || !self.drive.running {
            return Err(KinematicsError::InvalidArgument(
                "drive must be running with positive surface speed".into(),
            ));
        }
        Ok(MoveSegment {
            t_on: start,
            t_off: start + displacement / self.drive.surface_speed,
            direction: s,
        })
    }

    fn end_x(&self, cafe: usize, x: f64, displacement: f64, s: ClampTarget) -> Result<f64, KinematicsError> {
        let nx = x + s.sign() * displacement * self.incline.cos();
        if !(0.0..=self.span).contains(&nx) {
            return Err(KinematicsError::OutOfRange {
                cafe,
                x: nx,
                span: self.span,
            });
        }
        Ok(nx)
    }

    fn commit(&mut self, cafe: usize, seg: MoveSegment, x: f64) {
        let release = if seg.direction == ClampTarget::Stationary || seg.duration() <= 0.0 {
            seg.t_off
        } else {
            // release switch, then the next engage switch
            seg.t_off + 2.0 * self.transition
        };
        let c = self.cursors.get_mut(&cafe).expect("cursor exists");
        c.x = x;
        c.ready = c.ready.max(release);
        self.plan.segments.entry(cafe).or_default().push(seg);
    }

    /// Plans a single platform's move of `displacement` in direction `s` at the
    /// earliest time it is free.
    pub fn plan_move(&mut self, cafe: usize, displacement: f64, s: ClampTarget) -> Result<MoveSegment, KinematicsError> {
        let c = self
            .cursors
            .get(&cafe)
            .ok_or_else(|| KinematicsError::InvalidArgument(format!("unknown cafe {cafe}")))?;
        let seg = self.segment_for(displacement, c.ready, s)?;
        let x = self.end_x(cafe, c.x, displacement, s)?;
        self.commit(cafe, seg, x);
        Ok(seg)
    }

    /// Plans an identical clamp segment for every member of `group`, starting
    /// when the last of them is free. Separations are preserved exactly.
    pub fn plan_cooperative(
        &mut self,
        group: &[usize],
        displacement: f64,
        s: ClampTarget,
    ) -> Result<MoveSegment, KinematicsError> {
        if group.is_empty() {
            return Err(KinematicsError::InvalidArgument("empty cooperative group".into()));
        }
        let mut start = f64::NEG_INFINITY;
        let mut ends = Vec::with_capacity(group.len());
        for &id in group {
            let c = self
                .cursors
                .get(&id)
                .ok_or_else(|| KinematicsError::InvalidArgument(format!("unknown cafe {id}")))?;
            start = start.max(c.ready);
            ends.push(self.end_x(id, c.x, displacement, s)?);
        }
        let seg = self.segment_for(displacement, start, s)?;
        for (&id, x) in group.iter().zip(ends) {
            self.commit(id, seg, x);
        }
        let mut members = group.to_vec();
        members.sort_unstable();
        members.dedup();
        if !self.plan.groups.contains(&members) {
            self.plan.groups.push(members);
        }
        Ok(seg)
    }

    /// Adds an externally timed segment, checking it does not overlap the
    /// platform's previous one.
    pub fn push_segment(&mut self, cafe: usize, seg: MoveSegment) -> Result<(), KinematicsError> {
        if seg.t_off < seg.t_on {
            return Err(KinematicsError::ReversedInterval {
                t_s: seg.t_on,
                t_a: seg.t_off,
            });
        }
        let c = self
            .cursors
            .get(&cafe)
            .ok_or_else(|| KinematicsError::InvalidArgument(format!("unknown cafe {cafe}")))?;
        if seg.t_on < c.ready - 1e-12 {
            return Err(KinematicsError::CommandConflict { cafe, t: seg.t_on });
        }
        let d = drive_displacement(seg.t_on, seg.t_off, &self.drive)?;
        let x = self.end_x(cafe, c.x, d, seg.direction)?;
        self.commit(cafe, seg, x);
        Ok(())
    }

    pub fn plan(&self) -> &MotionPlan {
        &self.plan
    }

    pub fn into_plan(self) -> MotionPlan {
        self.plan
    }

    pub fn timeline(&self) -> ClampTimeline {
        self.plan.to_timeline(self.transition)
    }
}
