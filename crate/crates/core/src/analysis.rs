//! Sag versus pretension, span and platform count.

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::dynamics::{solve_equilibrium, CableChain, DynamicsError, RelaxationOptions};
use crate::model::units::{Dimension, Quantity};
use crate::model::{CableSystemConfig, CafeState, Violation, GRAVITY};

/// Platform spacing for clustered placement, m.
pub const CLUSTER_GAP: f64 = 0.1;
/// Per-cable tension cap used when sizing pretension, N.
pub const DEFAULT_TENSION_CAP: f64 = 5000.0;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid sweep:{}", .0.iter().map(|v| format!("\n  {v}")).collect::<String>())]
    InvalidSpec(Vec<Violation>),
    #[error("sag budget unreachable below the per-cable cap of {cap} N")]
    Infeasible { cap: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    /// Platform `j` of `n` at `j·span/(n+1)`.
    Evenly,
    /// Platforms `CLUSTER_GAP` apart, centred on `center` (m).
    Clustered { center: f64 },
}

impl Placement {
    pub fn positions(self, span: f64, count: usize) -> Vec<f64> {
        match self {
            Placement::Evenly => (1..=count)
                .map(|j| j as f64 * span / (count + 1) as f64)
                .collect(),
            Placement::Clustered { center } => {
                let mid = (count as f64 - 1.0) / 2.0;
                (0..count)
                    .map(|j| center + (j as f64 - mid) * CLUSTER_GAP)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub span_lengths: Vec<f64>,
    pub robot_counts: Vec<usize>,
    /// Per-cable pretensions, N.
    pub pretensions: Vec<f64>,
    pub robot_mass: f64,
    pub placement: Placement,
}

impl SweepSpec {
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let pos = |x: &f64| x.is_finite() && *x > 0.0;
        let mut list = |key: &str, empty: bool, ok: bool| {
            if empty {
                v.push(Violation::new(key, "must not be empty"));
            } else if !ok {
                v.push(Violation::new(key, "every value must be > 0"));
            }
        };
        list("sweep.span_lengths_m", self.span_lengths.is_empty(), self.span_lengths.iter().all(pos));
        list("sweep.robot_counts", self.robot_counts.is_empty(), self.robot_counts.iter().all(|&n| n > 0));
        list("sweep.pretensions", self.pretensions.is_empty(), self.pretensions.iter().all(pos));
        if !pos(&self.robot_mass) {
            v.push(Violation::new("sweep.robot_mass_kg", "must be > 0"));
        }
        if let Placement::Clustered { center } = self.placement {
            for &span in &self.span_lengths {
                for &n in &self.robot_counts {
                    let xs = self.placement.positions(span, n);
                    if xs.iter().any(|&x| !(x > 0.0 && x < span)) {
                        v.push(Violation::new(
                            "sweep.placement",
                            format!("{n} platforms around x = {center} m do not fit in a {span} m span"),
                        ));
                    }
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub span: f64,
    pub count: usize,
    /// Per-cable pretension, N.
    pub pretension: f64,
    /// Deepest platform sag, m. NaN when not converged.
    pub max_sag: f64,
    /// Largest per-cable segment tension, N. NaN when not converged.
    pub max_tension: f64,
    pub converged: bool,
}

/// Cells ordered by span, then count, then pretension, each in spec order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn get(&self, span: f64, count: usize, pretension: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.span == span && c.count == count && c.pretension == pretension)
    }

    pub fn all_converged(&self) -> bool {
        self.cells.iter().all(|c| c.converged)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("span_m,count,pretension_N,max_sag_m,max_tension_N,converged\n");
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                crate::trace::num(c.span),
                c.count,
                crate::trace::num(c.pretension),
                crate::trace::num(c.max_sag),
                crate::trace::num(c.max_tension),
                c.converged
            ));
        }
        s
    }
}

/// Sag and tension of `count` platforms of `mass` at `xs` on a system like
/// `base` but with the given span and per-cable pretension.
pub fn static_sag(
    base: &CableSystemConfig,
    span: f64,
    pretension: f64,
    mass: f64,
    xs: &[f64],
) -> Result<(f64, f64), DynamicsError> {
    let system = CableSystemConfig {
        span_length: span,
        pretension,
        ..base.clone()
    };
    let n = system.load_bearing_cables as f64;
    let mut anchors = vec![0.0];
    if let Some(a) = system.anchor_spacing.filter(|a| *a > 0.0) {
        let mut k = 1.0;
        while k * a < span - 1e-12 {
            anchors.push(k * a);
            k += 1.0;
        }
    }
    anchors.push(span);

    let mut sag = 0.0_f64;
    let mut tension = pretension;
    for w in anchors.windows(2) {
        let (left, right) = (w[0], w[1]);
        let states: Vec<CafeState> = xs
            .iter()
            .filter(|&&x| x > left && x < right)
            .enumerate()
            .map(|(i, &x)| CafeState::new(i, mass, x, 0.0))
            .collect();
        if states.is_empty() {
            continue;
        }
        let chain = CableChain::between_anchors(
            left,
            right,
            system.effective_pretension(),
            system.axial_rigidity(),
            &states,
        )?;
        let eq = solve_equilibrium(&chain, &states, &RelaxationOptions::default())?;
        sag = sag.max(eq.max_sag());
        tension = tension.max(eq.forces.max_tension() / n);
    }
    Ok((sag, tension))
}

/// Evaluates every grid cell, in parallel, and assembles them in order.
pub fn run_sweep(spec: &SweepSpec, base: &CableSystemConfig) -> Result<SweepResult, AnalysisError> {
    let bad = spec.violations();
    if !bad.is_empty() {
        return Err(AnalysisError::InvalidSpec(bad));
    }
    let mut grid = Vec::new();
    for &span in &spec.span_lengths {
        for &count in &spec.robot_counts {
            for &pretension in &spec.pretensions {
                grid.push((span, count, pretension));
            }
        }
    }
    let cells = grid
        .into_par_iter()
        .map(|(span, count, pretension)| {
            let xs = spec.placement.positions(span, count);
            match static_sag(base, span, pretension, spec.robot_mass, &xs) {
                Ok((max_sag, max_tension)) => SweepCell {
                    span,
                    count,
                    pretension,
                    max_sag,
                    max_tension,
                    converged: true,
                },
                Err(_) => SweepCell {
                    span,
                    count,
                    pretension,
                    max_sag: f64::NAN,
                    max_tension: f64::NAN,
                    converged: false,
                },
            }
        })
        .collect();
    Ok(SweepResult { cells })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizingOptions {
    /// Lowest per-cable pretension considered, N.
    pub min_pretension: f64,
    /// Highest per-cable pretension allowed, N.
    pub tension_cap: f64,
    pub placement: Placement,
    pub max_bisections: usize,
}

impl Default for SizingOptions {
    fn default() -> Self {
        Self {
            min_pretension: 20.0 * GRAVITY,
            tension_cap: DEFAULT_TENSION_CAP,
            placement: Placement::Evenly,
            max_bisections: 200,
        }
    }
}

/// Smallest per-cable pretension, found by bisection, whose sag lies in
/// `[0.95, 1.0]` of `budget`. Returns `min_pretension` when even that
/// meets the budget.
pub fn size_pretension(
    span: f64,
    count: usize,
    mass: f64,
    budget: f64,
    base: &CableSystemConfig,
    opts: &SizingOptions,
) -> Result<f64, AnalysisError> {
    if !(budget > 0.0) {
        return Err(AnalysisError::InvalidSpec(vec![Violation::new("sag_budget_m", "must be > 0")]));
    }
    let xs = opts.placement.positions(span, count);
    let sag = |p: f64| static_sag(base, span, p, mass, &xs).map(|r| r.0);
    let mut lo = opts.min_pretension;
    if sag(lo)? <= budget {
        return Ok(lo);
    }
    let mut hi = opts.tension_cap;
    let mut hi_sag = sag(hi)?;
    if hi_sag > budget {
        return Err(AnalysisError::Infeasible { cap: opts.tension_cap });
    }
    for _ in 0..opts.max_bisections {
        if hi_sag >= 0.95 * budget {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = sag(mid)?;
        if s <= budget {
            hi = mid;
            hi_sag = s;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepDocument {
    span_lengths_m: Vec<f64>,
    robot_counts: Vec<usize>,
    pretensions: PretensionList,
    robot_mass_kg: f64,
    #[serde(default)]
    placement: PlacementDoc,
    cluster_center_m: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PretensionList {
    Plain(Vec<f64>),
    Tagged { values: Vec<f64>, unit: String },
}

#[derive(Deserialize, Default, PartialEq)]
#[serde(rename_all = "lowercase")]
enum PlacementDoc {
    #[default]
    Evenly,
    Clustered,
}

/// Reads a sweep description:
///
/// ```toml
/// span_lengths_m = [2, 5, 10]
/// robot_counts = [1, 2]
/// pretensions = { values = [20, 60, 200], unit = "kgf" }
/// robot_mass_kg = 1.4
/// placement = "evenly"   # or "clustered" with cluster_center_m
/// ```
pub fn parse_sweep_spec(document: &str) -> Result<SweepSpec, String> {
    let doc: SweepDocument = toml::from_str(document).map_err(|e| e.to_string())?;
    let pretensions = match doc.pretensions {
        PretensionList::Plain(v) => v,
        PretensionList::Tagged { values, unit } => values
            .into_iter()
            .map(|value| {
                Quantity::Tagged {
                    value,
                    unit: unit.clone(),
                }
                .to_si(Dimension::Force)
            })
            .collect::<Result<_, _>>()?,
    };
    let placement = match (doc.placement, doc.cluster_center_m) {
        (PlacementDoc::Evenly, None) => Placement::Evenly,
        (PlacementDoc::Evenly, Some(_)) => {
            return Err("cluster_center_m only applies to clustered placement".into())
        }
        (PlacementDoc::Clustered, Some(center)) => Placement::Clustered { center },
        (PlacementDoc::Clustered, None) => return Err("clustered placement needs cluster_center_m".into()),
    };
    Ok(SweepSpec {
        span_lengths: doc.span_lengths_m,
        robot_counts: doc.robot_counts,
        pretensions,
        robot_mass: doc.robot_mass_kg,
        placement,
    })
}
