//! Scenario files: a plan library, the worlds agents consider, their
//! plausibility orderings, who holds which worlds possible, and the truth.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use epike_core::actions::{ActionError, PointedAction, WireAction};
use epike_core::doxastic::{validate_model, AgentId, DoxError, PlausibilityModel, PointedState, Preorder, World};
use epike_core::kb::{Kb, KbError};
use epike_core::planlib::{LibrarySpec, PlanError, PlanLibrary};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unsupported scenario format {0}")]
    Format(u32),
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown world `{0}`")]
    UnknownWorld(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("duplicate world `{0}`")]
    DuplicateWorld(String),
    #[error("invalid plausibility model: {0}")]
    InvalidModel(String),
    #[error("agent `{agent}`: {reason}")]
    Designation { agent: String, reason: String },
    #[error("prefix action {index}: {source}")]
    Prefix { index: usize, source: ActionError },
    #[error("no built-in scenario named `{0}`")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Dox(#[from] DoxError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub id: String,
    /// Constraints over decision variables, in the constraint syntax.
    #[serde(default)]
    pub constraints: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `from` is strictly more plausible than `to`.
    Strict,
    /// `from` and `to` are equally plausible.
    Equi,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlausibilitySpec {
    pub agent: String,
    pub from: String,
    pub to: String,
    pub kind: Relation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub format: u32,
    pub name: String,
    #[serde(flatten)]
    pub library: LibrarySpec,
    pub worlds: Vec<WorldSpec>,
    /// Pairs not listed are incomparable; reflexive and transitive closure
    /// is taken per agent.
    #[serde(default)]
    pub plausibility: Vec<PlausibilitySpec>,
    /// Worlds each agent holds possible. Defaults to the agent's component
    /// of the true world.
    #[serde(default)]
    pub designated: BTreeMap<String, Vec<String>>,
    pub true_world: String,
    /// Actions already taken when the agents start.
    #[serde(default)]
    pub prefix: Vec<WireAction>,
}

/// A validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub lib: Arc<PlanLibrary>,
    /// The compiled model pointed at the true world.
    pub truth: PointedState,
    /// Each agent's own state, indexed by agent id.
    pub views: Vec<PointedState>,
    pub prefix: Vec<PointedAction>,
    pub file: ScenarioFile,
}

const BUILTIN: &[(&str, &str)] = &[
    ("breakfast-case1", include_str!("../scenarios/breakfast-case1.json")),
    ("breakfast-case1-ordered", include_str!("../scenarios/breakfast-case1-ordered.json")),
    ("breakfast-case2", include_str!("../scenarios/breakfast-case2.json")),
    ("breakfast-case2-ordered", include_str!("../scenarios/breakfast-case2-ordered.json")),
    ("breakfast-case3", include_str!("../scenarios/breakfast-case3.json")),
];

impl Scenario {
    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(n, _)| *n)
    }

    pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ScenarioError::UnknownBuiltin(name.into()))?;
        Scenario::from_json(text)
    }

    /// A path to a scenario file, or the name of a built-in scenario.
    pub fn load(path_or_name: &str) -> Result<Scenario, ScenarioError> {
        if Path::new(path_or_name).exists() {
            Scenario::from_json(&std::fs::read_to_string(path_or_name)?)
        } else if BUILTIN.iter().any(|(n, _)| *n == path_or_name) {
            Scenario::builtin(path_or_name)
        } else {
            Err(std::io::Error::new(std::io::ErrorKind::NotFound, format!("{path_or_name}: no such file or built-in scenario")).into())
        }
    }

    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        Scenario::from_file(serde_json::from_str(text)?)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
        if file.format != FORMAT {
            return Err(ScenarioError::Format(file.format));
        }
        let lib = Arc::new(PlanLibrary::from_spec(&file.library)?);
        let schema = lib.schema();
        let mut index = BTreeMap::new();
        let mut worlds = Vec::new();
        for (i, w) in file.worlds.iter().enumerate() {
            if index.insert(w.id.clone(), i).is_some() {
                return Err(ScenarioError::DuplicateWorld(w.id.clone()));
            }
            let cs = w.constraints.iter().map(|c| schema.parse(c)).collect::<Result<Vec<_>, _>>()?;
            worlds.push(World::new(w.id.clone(), Kb::with_constraints(schema.clone(), cs)?));
        }
        let world = |id: &str| index.get(id).copied().ok_or_else(|| ScenarioError::UnknownWorld(id.into()));
        let agent = |name: &str| lib.agent(name).ok_or_else(|| ScenarioError::UnknownAgent(name.into()));
        let n = worlds.len();
        let mut pairs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); lib.agents().len()];
        for p in &file.plausibility {
            let a = agent(&p.agent)?;
            let (from, to) = (world(&p.from)?, world(&p.to)?);
            pairs[a.index()].push((from, to));
            if p.kind == Relation::Equi {
                pairs[a.index()].push((to, from));
            }
        }
        let orders = pairs.into_iter().map(|ps| Preorder::from_pairs(n, ps).closure()).collect();
        let model = PlausibilityModel::new(lib.agents().clone(), worlds, orders)?;
        let violations = validate_model(&model);
        if !violations.is_empty() {
            let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(ScenarioError::InvalidModel(text.join("; ")));
        }
        let raw = PointedState::new(model, [world(&file.true_world)?])?;
        let truth = lib.compile_initial_state(&raw)?;
        for name in file.designated.keys() {
            agent(name)?;
        }
        let mut views = Vec::new();
        for (i, name) in lib.agents().iter().enumerate() {
            let a = AgentId(i as u16);
            let component = truth.components_of(a);
            let view = match file.designated.get(name) {
                None => component,
                Some(ids) => {
                    let ws = ids.iter().map(|id| world(id)).collect::<Result<Vec<_>, _>>()?;
                    let bad = |reason: &str| ScenarioError::Designation {
                        agent: name.clone(),
                        reason: reason.into(),
                    };
                    if !ws.contains(&truth.designated()[0]) {
                        return Err(bad("the true world must be among the designated worlds"));
                    }
                    if ws.iter().any(|w| !component.designated().contains(w)) {
                        return Err(bad("designated worlds must lie in the agent's component of the true world"));
                    }
                    PointedState::new(truth.model.clone(), ws)?
                }
            };
            views.push(view);
        }
        let prefix = file
            .prefix
            .iter()
            .enumerate()
            .map(|(index, w)| PointedAction::decode(w, &lib).map_err(|source| ScenarioError::Prefix { index, source }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Scenario {
            name: file.name.clone(),
            lib,
            truth,
            views,
            prefix,
            file,
        })
    }

    pub fn agent(&self, name: &str) -> Result<AgentId, ScenarioError> {
        self.lib.agent(name).ok_or_else(|| ScenarioError::UnknownAgent(name.into()))
    }

    /// The knowledge base of the true world.
    pub fn ground(&self) -> &Kb {
        &self.truth.model.world(self.truth.designated()[0]).kb
    }

    /// Human-readable summary for `check`.
    pub fn report(&self) -> String {
        let lib = &self.lib;
        let mut out = format!(
            "scenario {}: {} agents, {} decision variables, {} time points, {} orderings, {} nogoods\n",
            self.name,
            lib.agents().len(),
            lib.decision_vars().count(),
            lib.timepoints().len(),
            lib.orderings().len(),
            lib.nogoods().len()
        );
        let m = &self.truth.model;
        for w in m.worlds() {
            let plans = lib.feasible_subplans(&w.kb);
            out.push_str(&format!("world {}: {} feasible subplans\n", w.id, plans.len()));
            for g in plans {
                out.push_str(&format!("  {}\n", lib.render_subplan(&g).join(", ")));
            }
        }
        for (i, v) in self.views.iter().enumerate() {
            let a = AgentId(i as u16);
            let ids = |s: &PointedState| s.designated().iter().map(|&w| m.world(w).id.clone()).collect::<Vec<_>>().join(", ");
            out.push_str(&format!(
                "agent {}: holds [{}] possible, believes [{}]\n",
                lib.agents()[i],
                ids(v),
                ids(&v.most_plausible(a))
            ));
        }
        out.push_str(&format!("true world: {}\n", self.file.true_world));
        if !self.prefix.is_empty() {
            let p: Vec<String> = self.prefix.iter().map(|a| a.describe(lib)).collect();
            out.push_str(&format!("prefix: {}\n", p.join("; ")));
        }
        out
    }
}
