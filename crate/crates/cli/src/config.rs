//! Scenario configuration: a single TOML file describing the walk, its
//! loops, truncation/horizon grids, the initial state, and the named checks
//! to run. Parsing is strict (unknown fields are rejected) and the structs
//! round-trip through serialization unchanged.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qwalk_core::walk::{HalfLineWalk, RecurrenceClass, TakeFrom};
use qwalk_core::Direction;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub walk: WalkConfig,
    #[serde(default)]
    pub loops: Vec<LoopConfig>,
    pub truncation: TruncationConfig,
    pub horizon: HorizonConfig,
    pub initial_state: InitialStateConfig,
    #[serde(default)]
    pub checks: Vec<String>,
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    pub family: FamilyName,
    /// Homogeneous parameters `[p, q, r]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    /// Custom coefficient table, one `[p, q, r]` row per site.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub declared_class: Option<ClassName>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Homogeneous,
    ExampleA,
    ExampleB,
    ExampleC,
    Custom,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ClassName {
    Transient,
    NullRecurrent,
    PositiveRecurrent,
}

impl From<ClassName> for RecurrenceClass {
    fn from(c: ClassName) -> Self {
        match c {
            ClassName::Transient => RecurrenceClass::Transient,
            ClassName::NullRecurrent => RecurrenceClass::NullRecurrent,
            ClassName::PositiveRecurrent => RecurrenceClass::PositiveRecurrent,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    pub site: usize,
    pub mass: f64,
    pub take_from: TakeFromName,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TakeFromName {
    Right,
    Left,
    Proportional,
}

impl From<TakeFromName> for TakeFrom {
    fn from(t: TakeFromName) -> Self {
        match t {
            TakeFromName::Right => TakeFrom::Right,
            TakeFromName::Left => TakeFrom::Left,
            TakeFromName::Proportional => TakeFrom::Proportional,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    pub t: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    pub kind: StateKind,
    pub vertex: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<DirectionName>,
    /// `[re, im]` pairs over the `L, O, R` slots (custom / hs_projected).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<[f64; 2]>>,
    /// Remove overlaps with accepted mass-point eigenvectors before use.
    #[serde(default)]
    pub project_out_mass_points: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Incidence,
    Arc,
    Custom,
    HsProjected,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub enum DirectionName {
    L,
    O,
    R,
}

impl From<DirectionName> for Direction {
    fn from(d: DirectionName) -> Self {
        match d {
            DirectionName::L => Direction::Left,
            DirectionName::O => Direction::Loop,
            DirectionName::R => Direction::Right,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigIo {
            path: path.display().to_string(),
            source: e,
        })?;
        let config: ScenarioConfig = toml::from_str(&text).map_err(|e| CliError::ConfigParse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::ConfigParse {
            path: self.name.clone(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |field: &str, message: String| {
            Err(CliError::ConfigInvalid {
                field: field.to_string(),
                message,
            })
        };
        match self.walk.family {
            FamilyName::Homogeneous => {
                let params = self.walk.params.as_deref().unwrap_or(&[]);
                if params.len() < 2 || params.len() > 3 {
                    return fail("walk.params", "homogeneous needs [p, q] or [p, q, r]".into());
                }
            }
            FamilyName::Custom if self.walk.table.as_ref().is_none_or(|t| t.is_empty()) => {
                return fail("walk.table", "custom walk needs a coefficient table".into());
            }
            _ => {}
        }
        for (i, l) in self.loops.iter().enumerate() {
            if !(l.mass > 0.0 && l.mass < 1.0) {
                return fail(
                    &format!("loops[{i}].mass"),
                    format!("loop mass must be in (0, 1), got {}", l.mass),
                );
            }
        }
        if self.truncation.n.is_empty() {
            return fail("truncation.n", "need at least one truncation size".into());
        }
        if self.horizon.t.is_empty() {
            return fail("horizon.t", "need at least one horizon".into());
        }
        let max_loop = self.loops.iter().map(|l| l.site).max();
        for &n in &self.truncation.n {
            if let Some(m) = max_loop {
                if n < m + 2 {
                    return fail(
                        "truncation.n",
                        format!("truncation {n} must reach at least two past the last loop {m}"),
                    );
                }
            }
        }
        match self.initial_state.kind {
            StateKind::Arc => {
                if self.initial_state.direction.is_none() {
                    return fail("initial_state.direction", "arc state needs a direction".into());
                }
            }
            StateKind::Custom | StateKind::HsProjected => {
                let ok = self.initial_state.direction.is_some()
                    || self
                        .initial_state
                        .coefficients
                        .as_ref()
                        .is_some_and(|c| c.len() == 3);
                if !ok {
                    return fail(
                        "initial_state.coefficients",
                        "custom/hs_projected state needs three [re, im] pairs or a direction".into(),
                    );
                }
            }
            StateKind::Incidence => {}
        }
        Ok(())
    }

    /// Build the configured walk with its loops applied.
    pub fn build_walk(&self) -> Result<HalfLineWalk, CliError> {
        let mut walk = match self.walk.family {
            FamilyName::Homogeneous => {
                let params = self.walk.params.as_deref().unwrap_or(&[]);
                let p = params[0];
                let q = params[1];
                let r = params.get(2).copied().unwrap_or(1.0 - p - q);
                HalfLineWalk::homogeneous(p, q, r)?
            }
            FamilyName::ExampleA => HalfLineWalk::example_a(),
            FamilyName::ExampleB => HalfLineWalk::example_b(),
            FamilyName::ExampleC => HalfLineWalk::example_c(),
            FamilyName::Custom => {
                let table = self
                    .walk
                    .table
                    .as_ref()
                    .expect("validated")
                    .iter()
                    .map(|&[p, q, r]| (p, q, r))
                    .collect();
                HalfLineWalk::custom(table, self.walk.declared_class.map(Into::into))?
            }
        };
        if let Some(class) = self.walk.declared_class {
            walk = walk.with_declared_class(class.into());
        }
        for l in &self.loops {
            walk = walk.with_self_loop(l.site, l.mass, l.take_from.into())?;
        }
        Ok(walk)
    }

    pub fn tolerance(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }
}
