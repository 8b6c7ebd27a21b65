//! Vertical spring-mass dynamics of platforms hanging on the pretensioned
//! cable set.
//!
//! The load-bearing cables are lumped into one chain running anchor → platform
//! → … → platform → anchor. Each segment is a massless spring whose tension is
//! the pretension plus `k_seg · max(0, L − L′)`, where `L′` is the horizontal
//! distance between its end nodes (the straight cable) and `k_seg = EA / L′`.
//! Horizontal positions are imposed by the drive; only `z` is integrated.

use thiserror::Error;

use crate::model::{CafeState, CableSystemConfig, GRAVITY};

/// Largest step accepted by [`step_dynamics`], s.
pub const DT_MAX: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("time step {0} s outside (0, {DT_MAX}]")]
    InvalidStep(f64),
    #[error("non-finite state after step; reduce the time step (dt = {dt} s)")]
    NumericalInstability { dt: f64 },
    #[error("equilibrium not reached after {iterations} iterations (residual {residual:.3e} N)")]
    NonConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainNode {
    pub x: f64,
    pub z: f64,
    /// Index of the platform in the caller's state slice; `None` for anchors.
    pub cafe: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSegment {
    /// Unstretched length `L′`, m.
    pub rest_length: f64,
    /// `EA / L′`, N/m.
    pub stiffness: f64,
}

/// Anchors and platforms in along-span order, joined by spring segments.
#[derive(Debug, Clone, PartialEq)]
pub struct CableChain {
    nodes: Vec<ChainNode>,
    segments: Vec<ChainSegment>,
    /// State index → node index.
    node_of: Vec<usize>,
    pretension: f64,
    axial_rigidity: f64,
}

impl CableChain {
    /// Chain over the whole span of `system`, with the load-bearing cables
    /// aggregated.
    pub fn new(system: &CableSystemConfig, states: &[CafeState]) -> Result<Self, DynamicsError> {
        Self::between_anchors(
            0.0,
            system.span_length,
            system.effective_pretension(),
            system.axial_rigidity(),
            states,
        )
    }

    /// Chain between anchors at `left` and `right` carrying every state in
    /// `states`.
    pub fn between_anchors(
        left: f64,
        right: f64,
        pretension: f64,
        axial_rigidity: f64,
        states: &[CafeState],
    ) -> Result<Self, DynamicsError> {
        let mut order: Vec<usize> = (0..states.len()).collect();
        order.sort_by(|&a, &b| states[a].x.total_cmp(&states[b].x));
        let mut nodes = Vec::with_capacity(states.len() + 2);
        nodes.push(ChainNode {
            x: left,
            z: 0.0,
            cafe: None,
        });
        for &i in &order {
            nodes.push(ChainNode {
                x: states[i].x,
                z: states[i].z,
                cafe: Some(i),
            });
        }
        nodes.push(ChainNode {
            x: right,
            z: 0.0,
            cafe: None,
        });
        let mut node_of = vec![0; states.len()];
        for (n, node) in nodes.iter().enumerate() {
            if let Some(i) = node.cafe {
                node_of[i] = n;
            }
        }
        let mut chain = Self {
            segments: vec![
                ChainSegment {
                    rest_length: 0.0,
                    stiffness: 0.0
                };
                nodes.len() - 1
            ],
            nodes,
            node_of,
            pretension: pretension.abs(),
            axial_rigidity,
        };
        chain.refresh_segments()?;
        Ok(chain)
    }

    fn refresh_segments(&mut self) -> Result<(), DynamicsError> {
        for j in 0..self.segments.len() {
            let (a, b) = (self.nodes[j], self.nodes[j + 1]);
            let dx = b.x - a.x;
            if !(dx > 0.0) {
                return Err(DynamicsError::DegenerateGeometry(format!(
                    "nodes at x = {} and x = {} are not strictly ordered",
                    a.x, b.x
                )));
            }
            self.segments[j] = ChainSegment {
                rest_length: dx,
                stiffness: self.axial_rigidity / dx,
            };
        }
        Ok(())
    }

    /// Pulls current `x` and `z` from the states. Platforms may move but not
    /// pass each other or an anchor.
    pub fn update(&mut self, states: &[CafeState]) -> Result<(), DynamicsError> {
        if states.len() != self.node_of.len() {
            return Err(DynamicsError::DegenerateGeometry(format!(
                "chain built for {} platforms, got {}",
                self.node_of.len(),
                states.len()
            )));
        }
        for (i, s) in states.iter().enumerate() {
            let n = &mut self.nodes[self.node_of[i]];
            n.x = s.x;
            n.z = s.z;
        }
        self.refresh_segments()
    }

    pub fn nodes(&self) -> &[ChainNode] {
        &self.nodes
    }

    pub fn segments(&self) -> &[ChainSegment] {
        &self.segments
    }

    pub fn cafe_count(&self) -> usize {
        self.node_of.len()
    }

    /// Pretension of the lumped chain, N.
    pub fn pretension(&self) -> f64 {
        self.pretension
    }

    /// Node index of the platform at state index `i`.
    pub fn node_of(&self, i: usize) -> usize {
        self.node_of[i]
    }

    /// State indices in along-span order.
    pub fn order(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| n.cafe)
    }

    fn tension_at(&self, j: usize, length: f64) -> f64 {
        let seg = self.segments[j];
        (seg.stiffness * (length - seg.rest_length).max(0.0)).abs() + self.pretension
    }

    /// Net vertical cable force on every platform node with node heights
    /// taken from `z` (indexed by node; anchors ignored).
    fn vertical_cable_forces(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|f| *f = 0.0);
        let last = self.nodes.len() - 1;
        let height = |n: usize| if n == 0 || n == last { 0.0 } else { z[n] };
        for j in 0..self.segments.len() {
            let dx = self.nodes[j + 1].x - self.nodes[j].x;
            let dz = height(j + 1) - height(j);
            let l = dx.hypot(dz);
            let pull = self.tension_at(j, l) * dz / l;
            out[j] += pull;
            out[j + 1] -= pull;
        }
    }

    /// Diagonal of the tangent stiffness in `z`, per node.
    fn tangent_diagonal(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|k| *k = 0.0);
        let last = self.nodes.len() - 1;
        let height = |n: usize| if n == 0 || n == last { 0.0 } else { z[n] };
        for j in 0..self.segments.len() {
            let dx = self.nodes[j + 1].x - self.nodes[j].x;
            let dz = height(j + 1) - height(j);
            let l = dx.hypot(dz);
            let s2 = (dz / l).powi(2);
            let seg = self.segments[j];
            let kt = if l > seg.rest_length { seg.stiffness } else { 0.0 };
            let k = kt * s2 + self.tension_at(j, l) / l * (1.0 - s2);
            out[j] += k;
            out[j + 1] += k;
        }
    }
}

/// Cable forces acting on one platform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CafeForces {
    /// Signed tensions, negative when the platform sits above that neighbour.
    pub t_left: f64,
    pub t_right: f64,
    /// Elevation of each neighbour seen from the platform, rad.
    pub theta_left: f64,
    pub theta_right: f64,
    /// `|T_l| cos θ_l − |T_r| cos θ_r`, N.
    pub horizontal_residual: f64,
}

impl CafeForces {
    /// Net vertical pull of both segments, N.
    ///
    /// The signed tension already carries the direction, so it multiplies
    /// `|sin θ|`; the result always points toward the neighbour's height.
    pub fn vertical(&self) -> f64 {
        self.t_left * self.theta_left.sin().abs() + self.t_right * self.theta_right.sin().abs()
    }
}

/// Tensions and angles for the whole chain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentForces {
    /// Tension magnitude of each segment, left to right, N.
    pub tensions: Vec<f64>,
    /// Per platform, in state order.
    pub cafes: Vec<CafeForces>,
}

impl SegmentForces {
    pub fn max_tension(&self) -> f64 {
        self.tensions.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_horizontal_residual(&self) -> f64 {
        self.cafes
            .iter()
            .map(|c| c.horizontal_residual.abs())
            .fold(0.0, f64::max)
    }
}

fn check_cafe(chain: &CableChain, i: usize) -> Result<usize, DynamicsError> {
    if i >= chain.cafe_count() {
        return Err(DynamicsError::DegenerateGeometry(format!(
            "no platform with index {i}"
        )));
    }
    Ok(chain.node_of[i])
}

/// Elevation angles `(θ_l, θ_r)` of the left and right neighbours of the
/// platform at state index `i`. Positive when the neighbour is higher.
pub fn segment_angles(chain: &CableChain, i: usize) -> Result<(f64, f64), DynamicsError> {
    let n = check_cafe(chain, i)?;
    let me = chain.nodes[n];
    let angle = |other: ChainNode| {
        let dx = (other.x - me.x).abs();
        if dx == 0.0 {
            Err(DynamicsError::DegenerateGeometry(format!(
                "platform {i} shares x = {} with a neighbour",
                me.x
            )))
        } else {
            Ok((other.z - me.z).atan2(dx))
        }
    };
    Ok((angle(chain.nodes[n - 1])?, angle(chain.nodes[n + 1])?))
}

/// Signed segment tensions `(T_l, T_r)` at the platform with state index `i`.
///
/// Magnitude is `|k_seg · max(0, L − L′)| + |T_pre|`; a side is negated when
/// the platform is above that neighbour.
pub fn segment_tensions(chain: &CableChain, i: usize) -> Result<(f64, f64), DynamicsError> {
    let n = check_cafe(chain, i)?;
    let me = chain.nodes[n];
    let side = |j: usize, other: ChainNode| {
        let l = (other.x - me.x).hypot(other.z - me.z);
        let t = chain.tension_at(j, l);
        if me.z > other.z {
            -t
        } else {
            t
        }
    };
    Ok((side(n - 1, chain.nodes[n - 1]), side(n, chain.nodes[n + 1])))
}

/// Tensions, angles and residuals for the chain's current geometry.
pub fn segment_forces(chain: &CableChain) -> Result<SegmentForces, DynamicsError> {
    let tensions = (0..chain.segments.len())
        .map(|j| {
            let (a, b) = (chain.nodes[j], chain.nodes[j + 1]);
            chain.tension_at(j, (b.x - a.x).hypot(b.z - a.z))
        })
        .collect();
    let cafes = (0..chain.cafe_count())
        .map(|i| {
            let (theta_left, theta_right) = segment_angles(chain, i)?;
            let (t_left, t_right) = segment_tensions(chain, i)?;
            Ok(CafeForces {
                t_left,
                t_right,
                theta_left,
                theta_right,
                horizontal_residual: t_left.abs() * theta_left.cos()
                    - t_right.abs() * theta_right.cos(),
            })
        })
        .collect::<Result<_, DynamicsError>>()?;
    Ok(SegmentForces { tensions, cafes })
}

/// `z̈ = (T_l sin θ_l + T_r sin θ_r − m g − c ż) / m` with the sign handling of
/// [`CafeForces::vertical`].
pub fn vertical_acceleration(state: &CafeState, forces: &CafeForces, g: f64) -> f64 {
    (forces.vertical() - state.mass * g - state.damping * state.z_dot) / state.mass
}

/// Per-node inertia, damping and dead load for the integrator. Anchors carry
/// zero inertia and are never moved.
struct Dofs {
    inertia: Vec<f64>,
    damping: Vec<f64>,
    load: Vec<f64>,
}

struct Rk4Scratch {
    k: [Vec<f64>; 8],
    z: Vec<f64>,
    v: Vec<f64>,
    force: Vec<f64>,
}

impl Rk4Scratch {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            z: vec![0.0; n],
            v: vec![0.0; n],
            force: vec![0.0; n],
        }
    }
}

fn accelerations(chain: &CableChain, dofs: &Dofs, z: &[f64], v: &[f64], force: &mut [f64], acc: &mut [f64]) {
    chain.vertical_cable_forces(z, force);
    for n in 0..acc.len() {
        acc[n] = if dofs.inertia[n] > 0.0 {
            (force[n] - dofs.load[n] - dofs.damping[n] * v[n]) / dofs.inertia[n]
        } else {
            0.0
        };
    }
}

/// Classical RK4 on `(z, ż)` for every node; nodes with zero inertia stay put.
fn rk4(chain: &CableChain, dofs: &Dofs, z: &mut [f64], v: &mut [f64], dt: f64, s: &mut Rk4Scratch) {
    let n = z.len();
    let [kz1, kv1, kz2, kv2, kz3, kv3, kz4, kv4] = &mut s.k;
    let frozen = |i: usize| dofs.inertia[i] <= 0.0;

    kz1.copy_from_slice(v);
    accelerations(chain, dofs, z, v, &mut s.force, kv1);

    for i in 0..n {
        s.z[i] = z[i] + 0.5 * dt * kz1[i];
        s.v[i] = v[i] + 0.5 * dt * kv1[i];
    }
    kz2.copy_from_slice(&s.v);
    accelerations(chain, dofs, &s.z, &s.v, &mut s.force, kv2);

    for i in 0..n {
        s.z[i] = z[i] + 0.5 * dt * kz2[i];
        s.v[i] = v[i] + 0.5 * dt * kv2[i];
    }
    kz3.copy_from_slice(&s.v);
    accelerations(chain, dofs, &s.z, &s.v, &mut s.force, kv3);

    for i in 0..n {
        s.z[i] = z[i] + dt * kz3[i];
        s.v[i] = v[i] + dt * kv3[i];
    }
    kz4.copy_from_slice(&s.v);
    accelerations(chain, dofs, &s.z, &s.v, &mut s.force, kv4);

    for i in 0..n {
        if frozen(i) {
            continue;
        }
        z[i] += dt / 6.0 * (kz1[i] + 2.0 * kz2[i] + 2.0 * kz3[i] + kz4[i]);
        v[i] += dt / 6.0 * (kv1[i] + 2.0 * kv2[i] + 2.0 * kv3[i] + kv4[i]);
    }
}

/// Advances every platform's `(z, ż)` by one fixed RK4 step. Horizontal
/// positions are taken from `states` and held for the step. Platforms with
/// zero mass are not integrated.
pub fn step_dynamics(
    chain: &mut CableChain,
    states: &mut [CafeState],
    dt: f64,
) -> Result<SegmentForces, DynamicsError> {
    if !(dt > 0.0 && dt <= DT_MAX) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    if states.is_empty() {
        return Ok(SegmentForces {
            tensions: vec![chain.pretension; chain.segments.len()],
            cafes: Vec::new(),
        });
    }
    chain.update(states)?;
    let n = chain.nodes.len();
    let mut dofs = Dofs {
        inertia: vec![0.0; n],
        damping: vec![0.0; n],
        load: vec![0.0; n],
    };
    let mut z: Vec<f64> = vec![0.0; n];
    let mut v: Vec<f64> = vec![0.0; n];
    for (i, s) in states.iter().enumerate() {
        let node = chain.node_of[i];
        dofs.inertia[node] = s.mass;
        dofs.damping[node] = s.damping;
        dofs.load[node] = s.mass * GRAVITY;
        z[node] = s.z;
        v[node] = s.z_dot;
    }
    let mut scratch = Rk4Scratch::new(n);
    rk4(chain, &dofs, &mut z, &mut v, dt, &mut scratch);
    if z.iter().chain(&v).any(|x| !x.is_finite()) {
        return Err(DynamicsError::NumericalInstability { dt });
    }
    for (i, s) in states.iter_mut().enumerate() {
        let node = chain.node_of[i];
        s.z = z[node];
        s.z_dot = v[node];
    }
    chain.update(states)?;
    segment_forces(chain)
}

/// Controls for [`solve_equilibrium`].
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationOptions {
    /// Fixed pseudo-time step. `None` picks one from the tangent stiffness
    /// each iteration.
    pub dt: Option<f64>,
    pub max_iterations: usize,
    /// Stop once every |ż| is below this, m/s ...
    pub velocity_tolerance: f64,
    /// ... and every net vertical force is below this, N.
    pub force_tolerance: f64,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        Self {
            dt: None,
            max_iterations: 500_000,
            velocity_tolerance: 1e-8,
            force_tolerance: 1e-6,
        }
    }
}

/// Static solution of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    /// Equilibrium height per platform, state order, m.
    pub z: Vec<f64>,
    pub forces: SegmentForces,
    pub iterations: usize,
    /// Largest |net vertical force| at exit, N.
    pub residual: f64,
}

impl Equilibrium {
    /// Deepest sag over all platforms, m (non-negative).
    pub fn max_sag(&self) -> f64 {
        self.z.iter().map(|z| (-z).max(0.0)).fold(0.0, f64::max)
    }
}

/// Finds the static heights by dynamic relaxation: the chain is integrated
/// with per-node critical damping until it comes to rest.
///
/// Massless platforms get unit fictitious inertia so they relax like the
/// rest; their dead load stays zero.
pub fn solve_equilibrium(
    chain: &CableChain,
    states: &[CafeState],
    opts: &RelaxationOptions,
) -> Result<Equilibrium, DynamicsError> {
    let mut chain = chain.clone();
    chain.update(states)?;
    if states.is_empty() {
        return Ok(Equilibrium {
            z: Vec::new(),
            forces: segment_forces(&chain)?,
            iterations: 0,
            residual: 0.0,
        });
    }
    let n = chain.nodes.len();
    let mut dofs = Dofs {
        inertia: vec![0.0; n],
        damping: vec![0.0; n],
        load: vec![0.0; n],
    };
    let mut z: Vec<f64> = vec![0.0; n];
    let mut v: Vec<f64> = vec![0.0; n];
    for (i, s) in states.iter().enumerate() {
        let node = chain.node_of[i];
        dofs.inertia[node] = if s.mass > 0.0 { s.mass } else { 1.0 };
        dofs.load[node] = s.mass.max(0.0) * GRAVITY;
        z[node] = s.z;
    }
    let cafe_nodes: Vec<usize> = (1..n - 1).collect();
    let mut scratch = Rk4Scratch::new(n);
    let mut stiffness = vec![0.0; n];
    let mut force = vec![0.0; n];

    let residual_of = |chain: &CableChain, z: &[f64], force: &mut [f64]| {
        chain.vertical_cable_forces(z, force);
        cafe_nodes
            .iter()
            .map(|&k| (force[k] - dofs.load[k]).abs())
            .fold(0.0, f64::max)
    };

    let mut residual = residual_of(&chain, &z, &mut force);
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let speed = cafe_nodes.iter().map(|&k| v[k].abs()).fold(0.0, f64::max);
        if speed < opts.velocity_tolerance && residual < opts.force_tolerance {
            break;
        }
        chain.tangent_diagonal(&z, &mut stiffness);
        let mut omega_max: f64 = 0.0;
        for &k in &cafe_nodes {
            let kk = stiffness[k].max(0.0);
            dofs.damping[k] = 2.0 * (kk * dofs.inertia[k]).sqrt();
            omega_max = omega_max.max((2.0 * kk / dofs.inertia[k]).sqrt());
        }
        let dt = opts
            .dt
            .unwrap_or_else(|| if omega_max > 0.0 { (0.5 / omega_max).min(DT_MAX) } else { DT_MAX });
        rk4(&chain, &dofs, &mut z, &mut v, dt, &mut scratch);
        iterations += 1;
        if z.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(DynamicsError::NonConvergence {
                iterations,
                residual,
            });
        }
        residual = residual_of(&chain, &z, &mut force);
    }
    let speed = cafe_nodes.iter().map(|&k| v[k].abs()).fold(0.0, f64::max);
    if !(speed < opts.velocity_tolerance && residual < opts.force_tolerance) {
        return Err(DynamicsError::NonConvergence {
            iterations,
            residual,
        });
    }
    let mut solved = states.to_vec();
    for (i, s) in solved.iter_mut().enumerate() {
        s.z = z[chain.node_of[i]];
        s.z_dot = 0.0;
    }
    chain.update(&solved)?;
    Ok(Equilibrium {
        z: solved.iter().map(|s| s.z).collect(),
        forces: segment_forces(&chain)?,
        iterations,
        residual,
    })
}

/// Vertical offset an arm controller adds to reach the anchor line: `−z*`.
pub fn sag_compensation(equilibrium_z: &[f64]) -> Vec<f64> {
    equilibrium_z.iter().map(|z| -z).collect()
}
