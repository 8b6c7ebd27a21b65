//! Fixed-step scenario runner.
//!
//! Each step of length `dt` runs, in order: drive travel for platforms whose
//! clamp is settled on the drive, an RK4 step of the vertical dynamics with
//! the new horizontal positions, then the clamp state machines for the next
//! instant (commands are applied on the first grid time at or after their
//! timestamp). A platform on the drive sits at `x₀ + s·ΔD·cos θ`, where `x₀`
//! and the drive position are captured when its clamp settles.

use thiserror::Error;

use crate::clamping::{can_hold, hertz_force, step_clamp_state, ClampError};
use crate::dynamics::{
    segment_forces, solve_equilibrium, step_dynamics, CableChain, DynamicsError, RelaxationOptions,
    SegmentForces, DT_MAX,
};
use crate::kinematics::KinematicsError;
use crate::model::{CafeState, ClampState, ClampTarget, Scenario, Violation, GRAVITY};
use crate::noise::{NoiseModel, NoiseSource};
use crate::trace::{CafeSample, SimTrace, TraceRow};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("invalid options: {0}")]
    Options(String),
    #[error("t = {t:.6} s, cafe {cafe}: {source}")]
    Clamp {
        t: f64,
        cafe: usize,
        #[source]
        source: ClampError,
    },
    #[error("t = {t:.6} s: {source}")]
    Kinematics {
        t: f64,
        #[source]
        source: KinematicsError,
    },
    #[error("t = {t:.6} s: {source}")]
    Dynamics {
        t: f64,
        #[source]
        source: DynamicsError,
    },
}

impl SimError {
    /// True for failures of the numerical integration rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SimError::Dynamics {
                source: DynamicsError::NumericalInstability { .. } | DynamicsError::NonConvergence { .. },
                ..
            }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    /// Defaults to one second past the last command's switch.
    pub duration: Option<f64>,
    /// Noise model and seed; `None` runs the ideal open-loop model.
    pub noise: Option<(NoiseModel, u64)>,
    /// Integrate vertical dynamics. When off, heights stay at their start values.
    pub dynamics: bool,
    /// Start every platform at its static equilibrium instead of on the
    /// anchor line.
    pub settle: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            duration: None,
            noise: None,
            dynamics: true,
            settle: true,
        }
    }
}

impl SimOptions {
    pub fn kinematic() -> Self {
        Self {
            dynamics: false,
            settle: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlipEvent {
    pub t: f64,
    pub cafe: usize,
    pub required: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    pub duration: f64,
    pub steps: usize,
    pub final_x: Vec<f64>,
    pub final_z: Vec<f64>,
    /// Signed drive travel per platform including injected errors, m.
    pub final_travel: Vec<f64>,
    /// Deepest sag seen by any platform, m.
    pub max_sag: f64,
    pub max_speed: f64,
    pub slip_events: Vec<SlipEvent>,
    /// Platforms with identical command lists, and the largest change in
    /// their pairwise separation over the run.
    pub group_drift: Vec<(Vec<usize>, f64)>,
}

impl SimSummary {
    pub fn max_group_drift(&self) -> Option<f64> {
        self.group_drift.iter().map(|g| g.1).reduce(f64::max)
    }
}

/// Platforms whose command lists are identical and non-empty.
pub fn cooperative_groups(scenario: &Scenario) -> Vec<Vec<usize>> {
    let n = scenario.cafes.len();
    let mut assigned = vec![false; n];
    let mut groups = Vec::new();
    for i in 0..n {
        let cmds = scenario.timeline.commands(i);
        if assigned[i] || cmds.is_empty() {
            continue;
        }
        let group: Vec<usize> = (i..n)
            .filter(|&j| !assigned[j] && scenario.timeline.commands(j) == cmds)
            .collect();
        if group.len() > 1 {
            for &j in &group {
                assigned[j] = true;
            }
            groups.push(group);
        }
    }
    groups
}

fn tick_of(t: f64, dt: f64) -> usize {
    (t / dt - 1e-9).ceil().max(0.0) as usize
}

/// A running simulation. Call [`Simulation::advance`] until
/// [`Simulation::finished`], or use [`Simulation::run`].
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    dt: f64,
    steps: usize,
    step: usize,
    dynamics: bool,
    states: Vec<CafeState>,
    chain: CableChain,
    forces: SegmentForces,
    commands: Vec<Vec<(usize, ClampTarget)>>,
    next_command: Vec<usize>,
    noise: Option<NoiseSource>,
    speed: f64,
    drive_position: f64,
    drive_speed: f64,
    /// Position, travel, drive position and step when each platform last
    /// coupled.
    coupled_at: Vec<(f64, f64, f64, usize)>,
    travel: Vec<f64>,
    slip: Vec<bool>,
    capacity: f64,
    groups: Vec<Vec<usize>>,
    group_drift: Vec<f64>,
    max_sag: f64,
    max_speed: f64,
    slip_events: Vec<SlipEvent>,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, opts: &SimOptions) -> Result<Self, SimError> {
        scenario.validate().map_err(SimError::Invalid)?;
        let dt = opts.dt;
        if !(dt > 0.0) || (opts.dynamics && dt > DT_MAX) {
            return Err(SimError::Options(format!(
                "dt must lie in (0, {DT_MAX}] s, got {dt}"
            )));
        }
        let transition = scenario.clamping.transition_duration;
        let duration = opts.duration.unwrap_or_else(|| {
            scenario.timeline.last_time().map_or(0.0, |t| t + transition) + 1.0
        });
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(SimError::Options(format!("duration must be >= 0, got {duration}")));
        }
        let steps = (duration / dt).round() as usize;

        let mut states = scenario.cafes.clone();
        let mut chain = CableChain::new(&scenario.system, &states)
            .map_err(|source| SimError::Dynamics { t: 0.0, source })?;
        if opts.settle && !states.is_empty() {
            let eq = solve_equilibrium(&chain, &states, &RelaxationOptions::default())
                .map_err(|source| SimError::Dynamics { t: 0.0, source })?;
            for (s, z) in states.iter_mut().zip(eq.z) {
                s.z = z;
                s.z_dot = 0.0;
            }
        }
        chain
            .update(&states)
            .map_err(|source| SimError::Dynamics { t: 0.0, source })?;
        let forces = segment_forces(&chain).map_err(|source| SimError::Dynamics { t: 0.0, source })?;

        let commands = (0..states.len())
            .map(|i| {
                scenario
                    .timeline
                    .commands(i)
                    .iter()
                    .map(|c| (tick_of(c.time, dt), c.target))
                    .collect()
            })
            .collect();
        let n = states.len();
        let capacity = hertz_force(scenario.clamping.max_deformation, &scenario.clamping)
            .map(|f| f.hold_capacity)
            .unwrap_or(0.0);
        let groups = cooperative_groups(scenario);
        let group_count = groups.len();
        let mut sim = Self {
            scenario,
            dt,
            steps,
            step: 0,
            dynamics: opts.dynamics,
            coupled_at: states.iter().map(|s| (s.x, 0.0, 0.0, 0)).collect(),
            states,
            chain,
            forces,
            commands,
            next_command: vec![0; n],
            noise: opts
                .noise
                .as_ref()
                .map(|(model, seed)| NoiseSource::new(model.clone(), *seed, n)),
            speed: scenario.system.surface_speed(),
            drive_position: 0.0,
            drive_speed: scenario.system.surface_speed(),
            travel: vec![0.0; n],
            slip: vec![false; n],
            capacity,
            groups,
            group_drift: vec![0.0; group_count],
            max_sag: 0.0,
            max_speed: 0.0,
            slip_events: Vec::new(),
        };
        sim.update_drive_speed();
        sim.apply_clamps(false)?;
        sim.observe();
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn finished(&self) -> bool {
        self.step >= self.steps
    }

    pub fn states(&self) -> &[CafeState] {
        &self.states
    }

    fn update_drive_speed(&mut self) {
        let t = self.time();
        let factor = self.noise.as_mut().map_or(1.0, |n| n.drive_factor(t));
        self.drive_speed = self.speed * factor;
    }

    /// Places every coupled platform from the drive position, failing if one
    /// would leave the span.
    fn place_coupled(&mut self) -> Result<(), SimError> {
        let cos = self.scenario.system.incline_angle.cos();
        let span = self.scenario.system.span_length;
        for (i, s) in self.states.iter_mut().enumerate() {
            let sign = s.clamp.drive_sign();
            if sign == 0.0 {
                continue;
            }
            let (x0, travel0, d0, k0) = self.coupled_at[i];
            // ideal drive: equal hold times give bitwise-equal travel
            let carried = if self.noise.is_some() {
                sign * (self.drive_position - d0)
            } else {
                sign * (self.speed * self.dt * (self.step - k0) as f64)
            };
            s.x = x0 + carried * cos;
            self.travel[i] = travel0 + carried;
            if !(0.0..=span).contains(&s.x) {
                return Err(SimError::Kinematics {
                    t: (self.step) as f64 * self.dt,
                    source: KinematicsError::OutOfRange {
                        cafe: s.id,
                        x: s.x,
                        span,
                    },
                });
            }
        }
        Ok(())
    }

    /// Applies commands due at the current tick and advances the switches.
    /// With `countdown` false (the initial instant) only commands are applied.
    fn apply_clamps(&mut self, countdown: bool) -> Result<(), SimError> {
        let t = self.time();
        let cos = self.scenario.system.incline_angle.cos();
        for i in 0..self.states.len() {
            let due = self.commands[i]
                .get(self.next_command[i])
                .filter(|(tick, _)| *tick <= self.step)
                .map(|&(_, target)| target);
            if due.is_some() {
                self.next_command[i] += 1;
            }
            let prev = self.states[i].clamp;
            let step = |state, cmd| {
                step_clamp_state(state, cmd, self.dt, &self.scenario.clamping)
                    .map_err(|source| SimError::Clamp { t, cafe: i, source })
            };
            // a switch finishing at this instant completes before a new command
            let counted = if countdown { step(prev, None)? } else { prev };
            let next = match due {
                Some(_) => step(counted, due)?,
                None => counted,
            };
            let was_on = prev.drive_sign() != 0.0;
            let is_on = next.drive_sign() != 0.0;
            if was_on && next != prev {
                let err = self.noise.as_mut().map_or(0.0, |n| n.release_error(i));
                if err != 0.0 {
                    self.states[i].x += err * cos;
                    self.travel[i] += err;
                    let span = self.scenario.system.span_length;
                    if !(0.0..=span).contains(&self.states[i].x) {
                        return Err(SimError::Kinematics {
                            t,
                            source: KinematicsError::OutOfRange {
                                cafe: i,
                                x: self.states[i].x,
                                span,
                            },
                        });
                    }
                }
            }
            if is_on && next != prev {
                self.coupled_at[i] = (self.states[i].x, self.travel[i], self.drive_position, self.step);
            }
            self.states[i].clamp = next;
        }
        Ok(())
    }

    fn observe(&mut self) {
        let sin = self.scenario.system.incline_angle.sin().abs();
        let t = self.time();
        for (i, s) in self.states.iter().enumerate() {
            self.max_sag = self.max_sag.max(-s.z);
            self.max_speed = self.max_speed.max(s.z_dot.abs());
            let slipping = match s.clamp {
                ClampState::Settled(_) => {
                    let required = self.forces.cafes[i].horizontal_residual.abs()
                        / self.scenario.system.load_bearing_cables as f64
                        + s.mass * GRAVITY * sin;
                    let held = can_hold(
                        &crate::clamping::ClampForceResult {
                            normal_force: 0.0,
                            hold_capacity: self.capacity,
                            deformation: self.scenario.clamping.max_deformation,
                        },
                        required,
                    );
                    if !held && !self.slip[i] {
                        self.slip_events.push(SlipEvent {
                            t,
                            cafe: i,
                            required,
                            capacity: self.capacity,
                        });
                    }
                    !held
                }
                ClampState::Transitioning { .. } => false,
            };
            self.slip[i] = slipping;
        }
        for (g, group) in self.groups.iter().enumerate() {
            let base = self.travel[group[0]];
            for &j in &group[1..] {
                self.group_drift[g] = self.group_drift[g].max((self.travel[j] - base).abs());
            }
        }
    }

    /// Advances one step.
    pub fn advance(&mut self) -> Result<(), SimError> {
        let t_next = (self.step + 1) as f64 * self.dt;
        self.drive_position += self.drive_speed * self.dt;
        self.step += 1;
        self.place_coupled()?;
        if self.dynamics {
            self.forces = step_dynamics(&mut self.chain, &mut self.states, self.dt)
                .map_err(|source| SimError::Dynamics { t: t_next, source })?;
        } else {
            self.chain
                .update(&self.states)
                .map_err(|source| SimError::Dynamics { t: t_next, source })?;
            self.forces = segment_forces(&self.chain).map_err(|source| SimError::Dynamics { t: t_next, source })?;
        }
        self.apply_clamps(true)?;
        self.update_drive_speed();
        self.observe();
        Ok(())
    }

    /// Snapshot of the current instant.
    pub fn row(&self) -> TraceRow {
        let per_cable = self.scenario.system.load_bearing_cables as f64;
        TraceRow {
            t: self.time(),
            drive_speed: self.drive_speed,
            cafes: self
                .states
                .iter()
                .enumerate()
                .map(|(i, s)| CafeSample {
                    x: s.x,
                    z: s.z,
                    z_dot: s.z_dot,
                    clamp: s.clamp,
                    slip: self.slip[i],
                    travel: self.travel[i],
                })
                .collect(),
            tensions: self.forces.tensions.iter().map(|t| t / per_cable).collect(),
        }
    }

    pub fn segment_count(&self) -> usize {
        self.forces.tensions.len()
    }

    pub fn summary(&self) -> SimSummary {
        SimSummary {
            duration: self.steps as f64 * self.dt,
            steps: self.steps,
            final_x: self.states.iter().map(|s| s.x).collect(),
            final_z: self.states.iter().map(|s| s.z).collect(),
            final_travel: self.travel.clone(),
            max_sag: self.max_sag,
            max_speed: self.max_speed,
            slip_events: self.slip_events.clone(),
            group_drift: self.groups.iter().cloned().zip(self.group_drift.iter().copied()).collect(),
        }
    }

    /// Runs to the end, handing every row (including the initial one) to
    /// `on_row`.
    pub fn run(mut self, mut on_row: impl FnMut(&TraceRow)) -> Result<SimSummary, SimError> {
        on_row(&self.row());
        while !self.finished() {
            self.advance()?;
            on_row(&self.row());
        }
        Ok(self.summary())
    }

    /// Runs to the end without producing rows.
    pub fn run_silent(mut self) -> Result<SimSummary, SimError> {
        while !self.finished() {
            self.advance()?;
        }
        Ok(self.summary())
    }
}

/// Runs a scenario and keeps the whole trace in memory.
pub fn simulate(scenario: &Scenario, opts: &SimOptions) -> Result<(SimTrace, SimSummary), SimError> {
    let sim = Simulation::new(scenario, opts)?;
    let mut rows = Vec::with_capacity(sim.steps + 1);
    let summary = sim.run(|r| rows.push(r.clone()))?;
    Ok((SimTrace { dt: opts.dt, rows }, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Planner;
    use crate::model::{default_paper_config, ClampTimeline};

    fn one_cafe(x: f64) -> Scenario {
        let mut s = default_paper_config();
        s.cafes.truncate(1);
        s.cafes[0].x = x;
        s.timeline = ClampTimeline::new();
        s
    }

    #[test]
    fn no_commands_stays_put() {
        let s = one_cafe(0.75);
        let (trace, summary) = simulate(&s, &SimOptions { duration: Some(0.5), ..Default::default() }).unwrap();
        assert_eq!(trace.rows.len(), 501);
        assert_eq!(summary.final_x, vec![0.75]);
        // settled start: no ringing
        assert!(summary.max_speed < 1e-6, "{}", summary.max_speed);
    }

    #[test]
    fn switch_latency_then_coupling() {
        let mut s = one_cafe(0.2);
        s.timeline.push(0, 0.0, ClampTarget::Rightward);
        s.timeline.push(0, 1.3, ClampTarget::Stationary);
        let (trace, summary) = simulate(&s, &SimOptions::kinematic()).unwrap();
        // transitioning on rows 0..=299, coupled from row 300
        assert!(matches!(trace.rows[299].cafes[0].clamp, ClampState::Transitioning { .. }));
        assert_eq!(trace.rows[300].cafes[0].clamp, ClampState::Settled(ClampTarget::Rightward));
        assert_eq!(trace.rows[300].cafes[0].x, 0.2);
        assert!(matches!(trace.rows[1300].cafes[0].clamp, ClampState::Transitioning { .. }));
        // coupled for exactly 1.0 s
        assert!((summary.final_x[0] - (0.2 + 0.105)).abs() < 1e-12);
    }

    #[test]
    fn command_at_switch_completion_is_accepted() {
        let mut s = one_cafe(0.5);
        s.timeline.push(0, 0.0, ClampTarget::Rightward);
        s.timeline.push(0, 1.0, ClampTarget::Stationary);
        s.timeline.push(0, 1.3, ClampTarget::Leftward);
        s.timeline.push(0, 2.3, ClampTarget::Stationary);
        let (_, summary) = simulate(&s, &SimOptions::kinematic()).unwrap();
        assert!((summary.final_x[0] - 0.5).abs() < 1e-12);
        assert_eq!(summary.final_travel[0], 0.0);
    }

    #[test]
    fn running_into_anchor_fails() {
        let mut s = one_cafe(1.4);
        s.timeline.push(0, 0.0, ClampTarget::Rightward);
        let err = simulate(&s, &SimOptions { duration: Some(5.0), ..SimOptions::kinematic() }).unwrap_err();
        assert!(matches!(err, SimError::Kinematics { .. }), "{err}");
    }

    #[test]
    fn plan_then_simulate_hits_target() {
        let s0 = one_cafe(0.1);
        let mut p = Planner::new(&s0.system, &s0.clamping, &s0.cafes, 0.0);
        p.plan_move(0, 0.9, ClampTarget::Rightward).unwrap();
        let s = Scenario { timeline: p.timeline(), ..s0 };
        let (_, summary) = simulate(&s, &SimOptions::kinematic()).unwrap();
        assert!((summary.final_x[0] - 1.0).abs() <= 0.105e-3);
    }

    #[test]
    fn cooperative_groups_found() {
        let s = default_paper_config();
        assert_eq!(cooperative_groups(&s), vec![vec![0, 1]]);
        let (_, summary) = simulate(&s, &SimOptions::default()).unwrap();
        assert_eq!(summary.max_group_drift(), Some(0.0));
        assert!(summary.slip_events.is_empty());
        assert!((summary.final_x[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn bad_options() {
        let s = one_cafe(0.5);
        assert!(matches!(
            Simulation::new(&s, &SimOptions { dt: 0.0, ..Default::default() }),
            Err(SimError::Options(_))
        ));
        assert!(Simulation::new(&s, &SimOptions { dt: 0.5, ..Default::default() }).is_err());
    }
}
