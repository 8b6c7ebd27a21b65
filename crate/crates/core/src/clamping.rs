//! Cam clamp: Hertzian normal force, friction hold capacity, and the switching
//! state machine.

use thiserror::Error;

use crate::model::{ClampState, ClampTarget, ClampingParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClampError {
    #[error("deformation must be >= 0, got {0}")]
    NegativeDeformation(f64),
    #[error("time step must be > 0, got {0}")]
    InvalidStep(f64),
    #[error("clamp command {command:?} issued while still switching to {pending:?}")]
    CommandConflict {
        command: ClampTarget,
        pending: ClampTarget,
    },
}

/// Contact force of the cam pressing into the elastomer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampForceResult {
    /// N
    pub normal_force: f64,
    /// Largest tangential load the clamp resists without slipping, N.
    pub hold_capacity: f64,
    /// m
    pub deformation: f64,
}

/// Hertz contact of a cylinder-ended cam on an elastic half-space:
/// `F = 4/3 · E · √R · δ^{3/2}`.
pub fn hertz_force(delta: f64, params: &ClampingParams) -> Result<ClampForceResult, ClampError> {
    if !(delta >= 0.0) {
        return Err(ClampError::NegativeDeformation(delta));
    }
    let normal_force =
        4.0 / 3.0 * params.effective_modulus * params.cam_radius.sqrt() * delta * delta.sqrt();
    Ok(ClampForceResult {
        normal_force,
        hold_capacity: params.friction_coefficient * normal_force,
        deformation: delta,
    })
}

/// True when friction can carry `required_tangential_force` (inclusive).
pub fn can_hold(force: &ClampForceResult, required_tangential_force: f64) -> bool {
    force.hold_capacity >= required_tangential_force
}

/// Advances one platform's clamp by `dt`, applying `command` first if present.
///
/// A command on a settled clamp starts a full-length switch; the returned
/// state is the one in force for the step that begins now. A switch settles on
/// the step where its remaining time is no more than `dt`.
pub fn step_clamp_state(
    state: ClampState,
    command: Option<ClampTarget>,
    dt: f64,
    params: &ClampingParams,
) -> Result<ClampState, ClampError> {
    if !(dt > 0.0) {
        return Err(ClampError::InvalidStep(dt));
    }
    match (state, command) {
        (ClampState::Settled(current), Some(target)) if current == target => Ok(state),
        (ClampState::Settled(_), Some(target)) => Ok(ClampState::Transitioning {
            target,
            remaining: params.transition_duration,
        }),
        (ClampState::Settled(_), None) => Ok(state),
        (ClampState::Transitioning { target, .. }, Some(command)) => {
            Err(ClampError::CommandConflict {
                command,
                pending: target,
            })
        }
        (ClampState::Transitioning { target, remaining }, None) => {
            // relative slack so 0.3 s at 1 ms takes exactly 300 steps
            if remaining <= dt * (1.0 + 1e-9) {
                Ok(ClampState::Settled(target))
            } else {
                Ok(ClampState::Transitioning {
                    target,
                    remaining: remaining - dt,
                })
            }
        }
    }
}
