//! Domain types for the shared cable set, the platforms riding on it, and the
//! clamp commands that move them.
//!
//! All values are SI. Construction from a scenario document lives in [`config`].

use std::fmt;
use std::f64::consts::FRAC_PI_2;

pub mod config;
pub mod units;

/// Standard gravity, m/s². Also the kilogram-force to newton factor.
pub const GRAVITY: f64 = 9.80665;

/// A single failed invariant, addressed by its document key path.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl Violation {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

fn require(out: &mut Vec<Violation>, ok: bool, key: &str, message: impl Into<String>) {
    if !ok {
        out.push(Violation::new(key, message));
    }
}

/// Geometry, stiffness and drive of the cable set shared by every platform.
#[derive(Debug, Clone, PartialEq)]
pub struct CableSystemConfig {
    /// Horizontal anchor-to-anchor distance, m.
    pub span_length: f64,
    /// Incline of the cable run to horizontal, rad.
    pub incline_angle: f64,
    /// End-to-end stiffness of one cable measured over `stiffness_reference_length`, N/m.
    pub stiffness: f64,
    /// Length over which `stiffness` was measured, m.
    pub stiffness_reference_length: f64,
    /// Installed tension per cable, N.
    pub pretension: f64,
    /// Number of cables sharing the platforms' weight.
    pub load_bearing_cables: u32,
    pub roller_radius: f64,
    /// Roller angular velocity, rad/s.
    pub roller_angular_velocity: f64,
    /// Rated maximum drive surface speed, m/s.
    pub max_surface_speed: f64,
    /// Spacing of intermediate anchors, m. `None` means anchors only at the span ends.
    pub anchor_spacing: Option<f64>,
}

impl CableSystemConfig {
    /// Drive cable surface speed `r * omega`, m/s.
    pub fn surface_speed(&self) -> f64 {
        self.roller_radius * self.roller_angular_velocity
    }

    /// Pretension of the aggregated load-bearing set, N.
    pub fn effective_pretension(&self) -> f64 {
        self.pretension * self.load_bearing_cables as f64
    }

    /// Axial rigidity `EA` of the aggregated load-bearing set, N.
    ///
    /// A segment of rest length `L` then has stiffness `EA / L`.
    pub fn axial_rigidity(&self) -> f64 {
        self.stiffness * self.stiffness_reference_length * self.load_bearing_cables as f64
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let pos = |x: f64| x.is_finite() && x > 0.0;
        require(&mut v, pos(self.span_length), "system.span_length_m", "must be > 0");
        require(&mut v, pos(self.stiffness), "system.stiffness_n_per_m", "must be > 0");
        require(
            &mut v,
            pos(self.stiffness_reference_length),
            "system.stiffness_reference_length_m",
            "must be > 0",
        );
        require(
            &mut v,
            self.pretension.is_finite() && self.pretension >= 0.0,
            "system.pretension",
            "must be >= 0",
        );
        require(
            &mut v,
            self.load_bearing_cables >= 1,
            "system.load_bearing_cables",
            "must be >= 1",
        );
        require(
            &mut v,
            self.incline_angle.is_finite() && self.incline_angle.abs() < FRAC_PI_2,
            "system.incline_deg",
            "must lie strictly between -90 and 90 degrees",
        );
        require(&mut v, pos(self.roller_radius), "roller.radius_m", "must be > 0");
        require(
            &mut v,
            self.roller_angular_velocity.is_finite() && self.roller_angular_velocity >= 0.0,
            "roller.omega_rad_s",
            "must be >= 0",
        );
        require(
            &mut v,
            pos(self.max_surface_speed),
            "roller.max_surface_speed_mm_s",
            "must be > 0",
        );
        if v.is_empty() {
            require(
                &mut v,
                self.surface_speed() <= self.max_surface_speed * (1.0 + 1e-12),
                "roller.omega_rad_s",
                format!(
                    "surface speed {:.6} m/s exceeds rated {:.6} m/s",
                    self.surface_speed(),
                    self.max_surface_speed
                ),
            );
        }
        if let Some(s) = self.anchor_spacing {
            require(&mut v, pos(s), "system.anchor_spacing_m", "must be > 0");
        }
        v
    }
}

/// The three settled clamp positions of the cam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClampTarget {
    /// Clamped to the lower side of the drive loop.
    Leftward,
    /// Clamped to the upper side of the drive loop.
    Rightward,
    /// Clamped to the stationary cable.
    Stationary,
}

impl ClampTarget {
    /// Direction sign: -1, 0 or +1.
    pub fn sign(self) -> f64 {
        match self {
            ClampTarget::Leftward => -1.0,
            ClampTarget::Stationary => 0.0,
            ClampTarget::Rightward => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ClampTarget::Leftward => "left",
            ClampTarget::Rightward => "right",
            ClampTarget::Stationary => "stationary",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "left" => Some(ClampTarget::Leftward),
            "right" => Some(ClampTarget::Rightward),
            "stationary" => Some(ClampTarget::Stationary),
            _ => None,
        }
    }

    pub fn from_sign(s: i8) -> Option<Self> {
        match s {
            -1 => Some(ClampTarget::Leftward),
            0 => Some(ClampTarget::Stationary),
            1 => Some(ClampTarget::Rightward),
            _ => None,
        }
    }
}

/// Clamp state of one platform at a simulation instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClampState {
    Settled(ClampTarget),
    /// Cam moving toward `target`; `remaining` seconds left.
    Transitioning { target: ClampTarget, remaining: f64 },
}

impl ClampState {
    pub const STATIONARY: ClampState = ClampState::Settled(ClampTarget::Stationary);

    /// The settled target, if not mid-switch.
    pub fn settled(self) -> Option<ClampTarget> {
        match self {
            ClampState::Settled(t) => Some(t),
            ClampState::Transitioning { .. } => None,
        }
    }

    /// Sign of the drive coupling. Zero while transitioning: the platform holds.
    pub fn drive_sign(self) -> f64 {
        self.settled().map_or(0.0, ClampTarget::sign)
    }

    pub fn label(self) -> &'static str {
        match self {
            ClampState::Settled(t) => t.label(),
            ClampState::Transitioning { target, .. } => match target {
                ClampTarget::Leftward => "to_left",
                ClampTarget::Rightward => "to_right",
                ClampTarget::Stationary => "to_stationary",
            },
        }
    }
}

/// One platform on the cable.
#[derive(Debug, Clone, PartialEq)]
pub struct CafeState {
    pub id: usize,
    /// kg
    pub mass: f64,
    /// Horizontal position from the left anchor, m.
    pub x: f64,
    /// Vertical displacement from the anchor line, m (negative is sag).
    pub z: f64,
    pub z_dot: f64,
    pub clamp: ClampState,
    /// Vertical viscous damping, N·s/m.
    pub damping: f64,
}

impl CafeState {
    /// A platform at rest on the anchor line, clamped to the stationary cable.
    pub fn new(id: usize, mass: f64, x: f64, damping: f64) -> Self {
        Self {
            id,
            mass,
            x,
            z: 0.0,
            z_dot: 0.0,
            clamp: ClampState::STATIONARY,
            damping,
        }
    }

    pub fn violations(&self, index: usize, span: f64) -> Vec<Violation> {
        let mut v = Vec::new();
        require(
            &mut v,
            self.mass.is_finite() && self.mass > 0.0,
            &format!("cafes[{index}].mass_kg"),
            "must be > 0",
        );
        require(
            &mut v,
            self.damping.is_finite() && self.damping >= 0.0,
            &format!("cafes[{index}].damping_c"),
            "must be >= 0",
        );
        require(
            &mut v,
            self.x.is_finite() && (0.0..=span).contains(&self.x),
            &format!("cafes[{index}].x0_m"),
            format!("must lie in [0, {span}]"),
        );
        v
    }
}

/// A clamp command: switch to `target` at `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampCommand {
    pub time: f64,
    pub target: ClampTarget,
}

/// Time-ordered clamp commands per platform, the open-loop control input.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClampTimeline {
    per_cafe: Vec<Vec<ClampCommand>>,
}

impl ClampTimeline {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a command. Ordering is checked by [`ClampTimeline::violations`].
    pub fn push(&mut self, cafe: usize, time: f64, target: ClampTarget) {
        if self.per_cafe.len() <= cafe {
            self.per_cafe.resize_with(cafe + 1, Vec::new);
        }
        self.per_cafe[cafe].push(ClampCommand { time, target });
    }

    pub fn commands(&self, cafe: usize) -> &[ClampCommand] {
        self.per_cafe.get(cafe).map_or(&[], Vec::as_slice)
    }

    /// Highest CAFE id that has a command list, plus one.
    pub fn cafe_slots(&self) -> usize {
        self.per_cafe.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_cafe.iter().all(Vec::is_empty)
    }

    /// Time of the last command, if any.
    pub fn last_time(&self) -> Option<f64> {
        self.per_cafe
            .iter()
            .filter_map(|c| c.last().map(|c| c.time))
            .reduce(f64::max)
    }

    /// All commands flattened, sorted by time then CAFE id.
    pub fn entries(&self) -> Vec<(usize, ClampCommand)> {
        let mut out: Vec<_> = self
            .per_cafe
            .iter()
            .enumerate()
            .flat_map(|(id, cmds)| cmds.iter().map(move |c| (id, *c)))
            .collect();
        out.sort_by(|a, b| a.1.time.total_cmp(&b.1.time).then(a.0.cmp(&b.0)));
        out
    }

    /// Checks ordering, id range, and that no command lands inside the previous
    /// command's switching window.
    pub fn violations(&self, cafe_count: usize, transition_duration: f64) -> Vec<Violation> {
        let mut v = Vec::new();
        for (id, cmds) in self.per_cafe.iter().enumerate() {
            if cmds.is_empty() {
                continue;
            }
            if id >= cafe_count {
                v.push(Violation::new(
                    "timeline",
                    format!("cafe {id} does not exist ({cafe_count} configured)"),
                ));
                continue;
            }
            if let Some(first) = cmds.first() {
                if !(first.time.is_finite() && first.time >= 0.0) {
                    v.push(Violation::new(
                        "timeline",
                        format!("cafe {id}: first command time {} must be >= 0", first.time),
                    ));
                }
            }
            for w in cmds.windows(2) {
                let (a, b) = (w[0].time, w[1].time);
                if !(b > a) {
                    v.push(Violation::new(
                        "timeline",
                        format!("cafe {id}: command times must strictly increase ({a} s then {b} s)"),
                    ));
                } else if b - a < transition_duration * (1.0 - 1e-9) {
                    v.push(Violation::new(
                        "timeline",
                        format!(
                            "cafe {id}: command at {b} s overlaps the switch started at {a} s \
                             ({transition_duration} s switching time)"
                        ),
                    ));
                }
            }
        }
        v
    }
}

/// Cam geometry, contact stiffness and switching latency.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampingParams {
    pub cam_radius: f64,
    /// Effective contact modulus, Pa.
    pub effective_modulus: f64,
    /// Cam angle for each settled state, rad.
    pub theta_left: f64,
    pub theta_right: f64,
    pub theta_stationary: f64,
    /// rad/s
    pub cam_speed: f64,
    /// Time from command to a settled clamp, s.
    pub transition_duration: f64,
    /// Elastomer deformation when fully engaged, m.
    pub max_deformation: f64,
    pub friction_coefficient: f64,
}

impl ClampingParams {
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let pos = |x: f64| x.is_finite() && x > 0.0;
        require(&mut v, pos(self.cam_radius), "clamping.cam_radius_m", "must be > 0");
        require(
            &mut v,
            pos(self.effective_modulus),
            "clamping.effective_modulus_pa",
            "must be > 0",
        );
        require(&mut v, pos(self.cam_speed), "clamping.cam_speed_deg_s", "must be > 0");
        require(
            &mut v,
            pos(self.transition_duration),
            "clamping.transition_duration_s",
            "must be > 0",
        );
        require(
            &mut v,
            pos(self.max_deformation),
            "clamping.max_deformation_m",
            "must be > 0",
        );
        require(
            &mut v,
            pos(self.friction_coefficient),
            "clamping.friction_coefficient",
            "must be > 0",
        );
        let angles = [self.theta_left, self.theta_right, self.theta_stationary];
        require(
            &mut v,
            angles.iter().all(|a| a.is_finite())
                && angles[0] != angles[1]
                && angles[0] != angles[2]
                && angles[1] != angles[2],
            "clamping.theta_*_deg",
            "cam angles must be finite and distinct",
        );
        v
    }
}

/// A complete scenario: cable set, clamp hardware, platforms and their commands.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: CableSystemConfig,
    pub clamping: ClampingParams,
    pub cafes: Vec<CafeState>,
    pub timeline: ClampTimeline,
}

impl Scenario {
    /// Every invariant violation in the scenario.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = self.system.violations();
        v.extend(self.clamping.violations());
        for (i, c) in self.cafes.iter().enumerate() {
            v.extend(c.violations(i, self.system.span_length));
        }
        let mut xs: Vec<(f64, usize)> = self.cafes.iter().enumerate().map(|(i, c)| (c.x, i)).collect();
        xs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in xs.windows(2) {
            if !(w[1].0 > w[0].0) {
                v.push(Violation::new(
                    format!("cafes[{}].x0_m", w[1].1),
                    format!("coincides with cafes[{}]", w[0].1),
                ));
            }
        }
        v.extend(
            self.timeline
                .violations(self.cafes.len(), self.clamping.transition_duration),
        );
        v
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }
}

/// The laboratory rig: a 1.5 m level span, two 1.4 kg platforms side by side at
/// midspan, 60 kgf per cable, drive at 105 mm/s.
///
/// The timeline moves both platforms together 315 mm to the right and back.
pub fn default_paper_config() -> Scenario {
    let system = CableSystemConfig {
        span_length: 1.5,
        incline_angle: 0.0,
        stiffness: 18_148.5,
        stiffness_reference_length: 1.5,
        pretension: 60.0 * GRAVITY,
        load_bearing_cables: 6,
        roller_radius: 0.02,
        roller_angular_velocity: 5.25,
        max_surface_speed: 0.12,
        anchor_spacing: None,
    };
    let clamping = ClampingParams {
        cam_radius: 0.01,
        effective_modulus: 10.0e6,
        theta_left: -FRAC_PI_2,
        theta_right: FRAC_PI_2,
        theta_stationary: 0.0,
        cam_speed: 340f64.to_radians(),
        transition_duration: 0.3,
        max_deformation: 1.0e-3,
        friction_coefficient: 0.8,
    };
    let cafes = vec![
        CafeState::new(0, 1.4, 0.70, 5.0),
        CafeState::new(1, 1.4, 0.80, 5.0),
    ];
    let mut timeline = ClampTimeline::new();
    for id in 0..2 {
        timeline.push(id, 0.0, ClampTarget::Rightward);
        timeline.push(id, 3.3, ClampTarget::Stationary);
        timeline.push(id, 4.0, ClampTarget::Leftward);
        timeline.push(id, 7.3, ClampTarget::Stationary);
    }
    Scenario {
        system,
        clamping,
        cafes,
        timeline,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rig_defaults() {
        let s = default_paper_config();
        assert_eq!(s.system.span_length, 1.5);
        assert_eq!(s.system.stiffness, 18_148.5);
        assert!((s.system.pretension - 588.399).abs() < 1e-9);
        assert!(s.cafes.iter().all(|c| c.mass == 1.4));
        assert_eq!(s.cafes.len(), 2);
        assert_eq!(s.clamping.transition_duration, 0.3);
        assert_eq!(s.system.incline_angle, 0.0);
        assert!((s.system.surface_speed() - 0.105).abs() < 1e-12);
        assert_eq!(s.system.max_surface_speed, 0.12);
        assert_eq!(s.validate(), Ok(()));
    }

    #[test]
    fn negative_mass_is_reported() {
        let mut s = default_paper_config();
        s.cafes[1].mass = -1.0;
        let v = s.validate().unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].key, "cafes[1].mass_kg");
    }

    #[test]
    fn overlapping_commands_name_the_cafe() {
        let mut t = ClampTimeline::new();
        t.push(1, 1.0, ClampTarget::Rightward);
        t.push(1, 1.1, ClampTarget::Stationary);
        let v = t.violations(2, 0.3);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("cafe 1"));
        assert!(v[0].message.contains("1.1"));
    }

    #[test]
    fn timeline_ordering() {
        let mut t = ClampTimeline::new();
        t.push(0, 2.0, ClampTarget::Rightward);
        t.push(0, 1.0, ClampTarget::Stationary);
        t.push(3, -1.0, ClampTarget::Leftward);
        let v = t.violations(2, 0.3);
        assert_eq!(v.len(), 2);
        // back-to-back at exactly the switching time is allowed
        let mut t = ClampTimeline::new();
        t.push(0, 0.0, ClampTarget::Rightward);
        t.push(0, 0.3, ClampTarget::Stationary);
        assert!(t.violations(1, 0.3).is_empty());
    }

    #[test]
    fn drive_sign_holds_while_switching() {
        let s = ClampState::Transitioning {
            target: ClampTarget::Rightward,
            remaining: 0.1,
        };
        assert_eq!(s.drive_sign(), 0.0);
        assert_eq!(ClampState::Settled(ClampTarget::Leftward).drive_sign(), -1.0);
    }

    #[test]
    fn speed_above_rating_rejected() {
        let mut s = default_paper_config();
        s.system.roller_angular_velocity = 10.0;
        let v = s.system.violations();
        assert_eq!(v[0].key, "roller.omega_rad_s");
    }
}
