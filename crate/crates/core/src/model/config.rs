//! TOML scenario documents.
//!
//! ```toml
//! [system]
//! span_length_m = 1.5
//! stiffness_n_per_m = 18148.5
//! pretension = { value = 60, unit = "kgf" }
//! load_bearing_cables = 6
//!
//! [roller]
//! radius_m = 0.02
//! surface_speed_mm_s = 105
//!
//! [[cafes]]
//! mass_kg = 1.4
//! x0_m = 0.7
//!
//! [[timeline]]
//! t_s = 0.0
//! cafe_id = 0
//! state = "right"
//! ```
//!
//! Lengths and the pretension may be bare numbers (SI) or `{ value, unit }`
//! tables. Every `clamping.*` key is optional and falls back to the laboratory
//! rig's value.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::units::{Dimension, Quantity};
use super::{
    default_paper_config, CableSystemConfig, CafeState, ClampTarget, ClampTimeline, ClampingParams,
    Scenario, Violation,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid configuration:{}", list_violations(.0))]
    Invalid(Vec<Violation>),
}

fn list_violations(v: &[Violation]) -> String {
    let mut s = String::new();
    for x in v {
        let _ = write!(s, "\n  {x}");
    }
    s
}

fn default_cables() -> u32 {
    6
}

fn default_damping() -> f64 {
    5.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    system: SystemDoc,
    roller: RollerDoc,
    #[serde(default)]
    clamping: ClampingDoc,
    #[serde(default)]
    cafes: Vec<CafeDoc>,
    #[serde(default)]
    timeline: Vec<CommandDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    span_length_m: Quantity,
    stiffness_n_per_m: f64,
    pretension: Quantity,
    #[serde(default)]
    incline_deg: f64,
    #[serde(default = "default_cables")]
    load_bearing_cables: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stiffness_reference_length_m: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchor_spacing_m: Option<Quantity>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RollerDoc {
    radius_m: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    surface_speed_mm_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_surface_speed_mm_s: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClampingDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cam_radius_m: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    effective_modulus_pa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_left_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_right_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_stationary_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cam_speed_deg_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transition_duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_deformation_m: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    friction_coefficient: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CafeDoc {
    mass_kg: f64,
    x0_m: Quantity,
    #[serde(default = "default_damping")]
    damping_c: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommandDoc {
    t_s: f64,
    cafe_id: usize,
    state: String,
}

fn quantity(q: &Quantity, dim: Dimension, key: &str) -> Result<f64, ConfigError> {
    q.to_si(dim).map_err(|e| ConfigError::Schema(format!("{key}: {e}")))
}

/// Parses a scenario document and normalizes it to SI without checking invariants.
pub fn parse_config(document: &str) -> Result<Scenario, ConfigError> {
    let doc: Document = toml::from_str(document).map_err(|e| ConfigError::Schema(e.to_string()))?;
    let defaults = default_paper_config();

    let span_length = quantity(&doc.system.span_length_m, Dimension::Length, "system.span_length_m")?;
    let roller_radius = quantity(&doc.roller.radius_m, Dimension::Length, "roller.radius_m")?;
    let roller_angular_velocity = match (doc.roller.omega_rad_s, doc.roller.surface_speed_mm_s) {
        (Some(w), None) => w,
        (None, Some(v)) => v * 1e-3 / roller_radius,
        (Some(_), Some(_)) => {
            return Err(ConfigError::Schema(
                "roller: give only one of omega_rad_s and surface_speed_mm_s".into(),
            ))
        }
        (None, None) => {
            return Err(ConfigError::Schema(
                "roller: one of omega_rad_s or surface_speed_mm_s is required".into(),
            ))
        }
    };
    let system = CableSystemConfig {
        span_length,
        incline_angle: doc.system.incline_deg.to_radians(),
        stiffness: doc.system.stiffness_n_per_m,
        stiffness_reference_length: match &doc.system.stiffness_reference_length_m {
            Some(q) => quantity(q, Dimension::Length, "system.stiffness_reference_length_m")?,
            None => span_length,
        },
        pretension: quantity(&doc.system.pretension, Dimension::Force, "system.pretension")?,
        load_bearing_cables: doc.system.load_bearing_cables,
        roller_radius,
        roller_angular_velocity,
        max_surface_speed: doc
            .roller
            .max_surface_speed_mm_s
            .map_or(defaults.system.max_surface_speed, |v| v * 1e-3),
        anchor_spacing: doc
            .system
            .anchor_spacing_m
            .as_ref()
            .map(|q| quantity(q, Dimension::Length, "system.anchor_spacing_m"))
            .transpose()?,
    };

    let c = &doc.clamping;
    let d = &defaults.clamping;
    let clamping = ClampingParams {
        cam_radius: match &c.cam_radius_m {
            Some(q) => quantity(q, Dimension::Length, "clamping.cam_radius_m")?,
            None => d.cam_radius,
        },
        effective_modulus: c.effective_modulus_pa.unwrap_or(d.effective_modulus),
        theta_left: c.theta_left_deg.map_or(d.theta_left, f64::to_radians),
        theta_right: c.theta_right_deg.map_or(d.theta_right, f64::to_radians),
        theta_stationary: c.theta_stationary_deg.map_or(d.theta_stationary, f64::to_radians),
        cam_speed: c.cam_speed_deg_s.map_or(d.cam_speed, f64::to_radians),
        transition_duration: c.transition_duration_s.unwrap_or(d.transition_duration),
        max_deformation: match &c.max_deformation_m {
            Some(q) => quantity(q, Dimension::Length, "clamping.max_deformation_m")?,
            None => d.max_deformation,
        },
        friction_coefficient: c.friction_coefficient.unwrap_or(d.friction_coefficient),
    };

    let mut cafes = Vec::with_capacity(doc.cafes.len());
    for (i, cafe) in doc.cafes.iter().enumerate() {
        let x = quantity(&cafe.x0_m, Dimension::Length, &format!("cafes[{i}].x0_m"))?;
        cafes.push(CafeState::new(i, cafe.mass_kg, x, cafe.damping_c));
    }

    let mut timeline = ClampTimeline::new();
    for (i, cmd) in doc.timeline.iter().enumerate() {
        let target = ClampTarget::from_label(&cmd.state).ok_or_else(|| {
            ConfigError::Schema(format!(
                "timeline[{i}].state: expected \"left\", \"right\" or \"stationary\", got {:?}",
                cmd.state
            ))
        })?;
        timeline.push(cmd.cafe_id, cmd.t_s, target);
    }

    Ok(Scenario {
        system,
        clamping,
        cafes,
        timeline,
    })
}

/// Parses, normalizes and validates a scenario document.
pub fn load_config(document: &str) -> Result<Scenario, ConfigError> {
    let scenario = parse_config(document)?;
    scenario.validate().map_err(ConfigError::Invalid)?;
    Ok(scenario)
}

pub fn load_config_file(path: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_config(&text)
}

/// Serializes a scenario as an SI-unit document that [`load_config`] accepts.
pub fn to_document(s: &Scenario) -> String {
    let sys = &s.system;
    let cl = &s.clamping;
    let doc = Document {
        system: SystemDoc {
            span_length_m: Quantity::Plain(sys.span_length),
            stiffness_n_per_m: sys.stiffness,
            pretension: Quantity::si(sys.pretension, Dimension::Force),
            incline_deg: sys.incline_angle.to_degrees(),
            load_bearing_cables: sys.load_bearing_cables,
            stiffness_reference_length_m: Some(Quantity::Plain(sys.stiffness_reference_length)),
            anchor_spacing_m: sys.anchor_spacing.map(Quantity::Plain),
        },
        roller: RollerDoc {
            radius_m: Quantity::Plain(sys.roller_radius),
            omega_rad_s: Some(sys.roller_angular_velocity),
            surface_speed_mm_s: None,
            max_surface_speed_mm_s: Some(sys.max_surface_speed * 1e3),
        },
        clamping: ClampingDoc {
            cam_radius_m: Some(Quantity::Plain(cl.cam_radius)),
            effective_modulus_pa: Some(cl.effective_modulus),
            theta_left_deg: Some(cl.theta_left.to_degrees()),
            theta_right_deg: Some(cl.theta_right.to_degrees()),
            theta_stationary_deg: Some(cl.theta_stationary.to_degrees()),
            cam_speed_deg_s: Some(cl.cam_speed.to_degrees()),
            transition_duration_s: Some(cl.transition_duration),
            max_deformation_m: Some(Quantity::Plain(cl.max_deformation)),
            friction_coefficient: Some(cl.friction_coefficient),
        },
        cafes: s
            .cafes
            .iter()
            .map(|c| CafeDoc {
                mass_kg: c.mass,
                x0_m: Quantity::Plain(c.x),
                damping_c: c.damping,
            })
            .collect(),
        timeline: s
            .timeline
            .entries()
            .into_iter()
            .map(|(id, c)| CommandDoc {
                t_s: c.time,
                cafe_id: id,
                state: c.target.label().to_string(),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("scenario documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[system]
span_length_m = 1.5
stiffness_n_per_m = 18148.5
pretension = { value = 60, unit = "kgf" }

[roller]
radius_m = 0.02
surface_speed_mm_s = 105

[[cafes]]
mass_kg = 1.4
x0_m = { value = 700, unit = "mm" }

[[timeline]]
t_s = 0.0
cafe_id = 0
state = "right"
"#;

    #[test]
    fn loads_tagged_units() {
        let s = load_config(MINIMAL).unwrap();
        assert!((s.system.pretension - 588.399).abs() < 1e-9);
        assert_eq!(s.system.stiffness, 18148.5);
        assert!((s.system.surface_speed() - 0.105).abs() < 1e-15);
        assert!((s.cafes[0].x - 0.7).abs() < 1e-15);
        assert_eq!(s.cafes[0].damping, 5.0);
        assert_eq!(s.system.load_bearing_cables, 6);
        assert_eq!(s.system.stiffness_reference_length, 1.5);
        assert_eq!(s.timeline.commands(0)[0].target, ClampTarget::Rightward);
    }

    #[test]
    fn negative_mass_is_a_validation_error() {
        let doc = MINIMAL.replace("mass_kg = 1.4", "mass_kg = -1");
        match load_config(&doc) {
            Err(ConfigError::Invalid(v)) => assert_eq!(v[0].key, "cafes[0].mass_kg"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_key_names_it() {
        let doc = MINIMAL.replace("stiffness_n_per_m = 18148.5\n", "");
        let err = load_config(&doc).unwrap_err();
        assert!(matches!(err, ConfigError::Schema(_)));
        assert!(err.to_string().contains("stiffness_n_per_m"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let doc = MINIMAL.replace("[roller]", "[roller]\nspeed = 3");
        let err = load_config(&doc).unwrap_err();
        assert!(err.to_string().contains("speed"), "{err}");
    }

    #[test]
    fn bad_state_label() {
        let doc = MINIMAL.replace("\"right\"", "\"up\"");
        let err = load_config(&doc).unwrap_err();
        assert!(err.to_string().contains("timeline[0].state"), "{err}");
    }

    #[test]
    fn roller_speed_must_be_given_once() {
        let doc = MINIMAL.replace("surface_speed_mm_s = 105", "surface_speed_mm_s = 105\nomega_rad_s = 5");
        assert!(matches!(load_config(&doc), Err(ConfigError::Schema(_))));
        let doc = MINIMAL.replace("surface_speed_mm_s = 105", "");
        assert!(matches!(load_config(&doc), Err(ConfigError::Schema(_))));
    }

    #[test]
    fn default_config_serializes_and_loads() {
        let s = default_paper_config();
        let back = load_config(&to_document(&s)).unwrap();
        assert_eq!(back.system.pretension, s.system.pretension);
        assert_eq!(back.cafes, s.cafes);
        assert_eq!(back.timeline, s.timeline);
    }
}
