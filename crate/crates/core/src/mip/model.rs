use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulationKind {
    Hyra,
    DedicatedOnly,
    SharedOnly,
}

impl FormulationKind {
    pub const ALL: [FormulationKind; 3] = [FormulationKind::Hyra, FormulationKind::DedicatedOnly, FormulationKind::SharedOnly];

    pub fn has_dedicated(self) -> bool {
        !matches!(self, FormulationKind::SharedOnly)
    }

    pub fn has_shared(self) -> bool {
        !matches!(self, FormulationKind::DedicatedOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FormulationKind::Hyra => "hyra",
            FormulationKind::DedicatedOnly => "dedicated_only",
            FormulationKind::SharedOnly => "shared_only",
        }
    }
}

impl fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormulationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hyra" => Ok(FormulationKind::Hyra),
            "dedicated_only" | "dedicated" => Ok(FormulationKind::DedicatedOnly),
            "shared_only" | "shared" => Ok(FormulationKind::SharedOnly),
            other => Err(Error::config("mode", format!("unknown formulation `{other}` (hyra | dedicated_only | shared_only)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn as_str(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

/// Constraint families, used to group violation reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Capacity,
    Queue,
    Sla,
    BudgetDedicated,
    BudgetShared,
    StationarityDedicated,
    StationarityShared,
    ActivationDedicated,
    UpperDedicated,
    LowerDedicated,
    ActivationShared,
    UpperShared,
    LowerShared,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Capacity => "capacity",
            Family::Queue => "queue",
            Family::Sla => "sla",
            Family::BudgetDedicated => "budget_dedicated",
            Family::BudgetShared => "budget_shared",
            Family::StationarityDedicated => "stationarity_dedicated",
            Family::StationarityShared => "stationarity_shared",
            Family::ActivationDedicated => "activation_dedicated",
            Family::UpperDedicated => "bigm_upper_dedicated",
            Family::LowerDedicated => "bigm_lower_dedicated",
            Family::ActivationShared => "activation_shared",
            Family::UpperShared => "bigm_upper_shared",
            Family::LowerShared => "bigm_lower_shared",
        }
    }

    pub fn is_big_m(self) -> bool {
        matches!(
            self,
            Family::ActivationDedicated
                | Family::UpperDedicated
                | Family::LowerDedicated
                | Family::ActivationShared
                | Family::UpperShared
                | Family::LowerShared
        )
    }
}

/// Marks the binary whose value loosens a Big-M row by `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigMInfo {
    pub binary: usize,
    /// Binary value at which the row is relaxed.
    pub relaxed_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub family: Family,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub big_m: Option<BigMInfo>,
}

impl Constraint {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }

    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.lhs(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A minimisation MIP over named variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MipModel {
    pub kind: FormulationKind,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(usize, f64)>,
    pub big_m: f64,
    pub epsilon: f64,
    index: HashMap<String, usize>,
}

impl MipModel {
    pub(crate) fn new(kind: FormulationKind, big_m: f64, epsilon: f64) -> Self {
        MipModel { kind, variables: Vec::new(), constraints: Vec::new(), objective: Vec::new(), big_m, epsilon, index: HashMap::new() }
    }

    pub(crate) fn add_var(&mut self, name: String, kind: VarKind, lower: f64) -> usize {
        let id = self.variables.len();
        let prev = self.index.insert(name.clone(), id);
        debug_assert!(prev.is_none(), "duplicate variable {name}");
        self.variables.push(Variable { name, kind, lower });
        id
    }

    pub(crate) fn add_constraint(&mut self, name: String, family: Family, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64, big_m: Option<BigMInfo>) {
        debug_assert!(terms.iter().all(|&(v, _)| v < self.variables.len()));
        self.constraints.push(Constraint { name, family, terms, sense, rhs, big_m });
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn var_count(&self) -> usize {
        self.variables.len()
    }

    pub fn binary_count(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn family_count(&self, family: Family) -> usize {
        self.constraints.iter().filter(|c| c.family == family).count()
    }

    /// True when every constraint references only declared variables.
    pub fn is_well_formed(&self) -> bool {
        let n = self.variables.len();
        self.constraints.iter().all(|c| c.terms.iter().all(|&(v, _)| v < n)) && self.objective.iter().all(|&(v, _)| v < n)
    }
}
