use std::fmt;
use std::sync::Arc;

use crate::kb::syntax::{parse_constraint_at, parse_list, render_list, write_constraint, Cursor, ListForm, ListOp};
use crate::kb::{Constraint, Kb, KbError, ParseError, Schema, Solver, VarId, TRUE_VALUE};

use super::AgentId;

/// Success test for an execution encoding: some assignment of the decision
/// variables is consistent with the knowledge base and every time point it
/// activates is entailed executed.
///
/// Equivalently, the knowledge base stays satisfiable after asserting the
/// negated guard of every time point not yet entailed executed.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SuccessCondition {
    /// (time-point variable, guard) pairs.
    pub timepoints: Vec<(VarId, Constraint)>,
}

impl SuccessCondition {
    pub fn holds(&self, kb: &Kb, solver: &dyn Solver) -> Result<bool, KbError> {
        let mut pending = Vec::new();
        for (var, guard) in &self.timepoints {
            if !kb.entails_with(solver, &Constraint::Assign(*var, TRUE_VALUE))? {
                pending.push(Constraint::not(guard.clone()));
            }
        }
        kb.sat_with(solver, &Constraint::And(pending))
    }
}

/// Formulas of conditional doxastic logic over knowledge-base worlds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DoxFormula {
    Top,
    In(Constraint),
    Entailed(Constraint),
    Succeeded(Arc<SuccessCondition>),
    Not(Box<DoxFormula>),
    And(Vec<DoxFormula>),
    /// `B^ψ_a φ` as (agent, ψ, φ).
    CondBelief(AgentId, Box<DoxFormula>, Box<DoxFormula>),
}

impl DoxFormula {
    pub fn bottom() -> Self {
        DoxFormula::not(DoxFormula::Top)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: DoxFormula) -> Self {
        DoxFormula::Not(Box::new(f))
    }

    pub fn and(fs: impl IntoIterator<Item = DoxFormula>) -> Self {
        DoxFormula::And(fs.into_iter().collect())
    }

    pub fn or(fs: impl IntoIterator<Item = DoxFormula>) -> Self {
        DoxFormula::not(DoxFormula::And(fs.into_iter().map(DoxFormula::not).collect()))
    }

    pub fn implies(a: DoxFormula, b: DoxFormula) -> Self {
        DoxFormula::not(DoxFormula::and([a, DoxFormula::not(b)]))
    }

    /// `sat(c) = ¬entailed(¬c)`.
    pub fn sat(c: Constraint) -> Self {
        DoxFormula::not(DoxFormula::Entailed(Constraint::not(c)))
    }

    pub fn entailed(c: Constraint) -> Self {
        DoxFormula::Entailed(c)
    }

    pub fn member(c: Constraint) -> Self {
        DoxFormula::In(c)
    }

    /// `entailed(⊥)`.
    pub fn failed() -> Self {
        DoxFormula::Entailed(Constraint::Bottom)
    }

    pub fn belief(a: AgentId, f: DoxFormula) -> Self {
        DoxFormula::CondBelief(a, Box::new(DoxFormula::Top), Box::new(f))
    }

    pub fn cond_belief(a: AgentId, cond: DoxFormula, f: DoxFormula) -> Self {
        DoxFormula::CondBelief(a, Box::new(cond), Box::new(f))
    }

    /// `⋀_i B_i φ` over the given agents.
    pub fn everyone_believes(agents: impl IntoIterator<Item = AgentId>, f: &DoxFormula) -> Self {
        DoxFormula::And(agents.into_iter().map(|a| DoxFormula::belief(a, f.clone())).collect())
    }

    /// Whether the formula stays inside `φ := ¬φ | B_a φ | in(c)`, the shape
    /// explanations and questions may carry.
    pub fn is_explainable(&self) -> bool {
        match self {
            DoxFormula::In(_) => true,
            DoxFormula::Not(f) => f.is_explainable(),
            DoxFormula::CondBelief(_, cond, f) => **cond == DoxFormula::Top && f.is_explainable(),
            _ => false,
        }
    }

    /// Maximum nesting of belief operators.
    pub fn belief_depth(&self) -> usize {
        match self {
            DoxFormula::Top | DoxFormula::In(_) | DoxFormula::Entailed(_) | DoxFormula::Succeeded(_) => 0,
            DoxFormula::Not(f) => f.belief_depth(),
            DoxFormula::And(fs) => fs.iter().map(|f| f.belief_depth()).max().unwrap_or(0),
            DoxFormula::CondBelief(_, c, f) => 1 + c.belief_depth().max(f.belief_depth()),
        }
    }

    pub fn agents_referenced(&self, out: &mut Vec<AgentId>) {
        match self {
            DoxFormula::Top | DoxFormula::In(_) | DoxFormula::Entailed(_) | DoxFormula::Succeeded(_) => {}
            DoxFormula::Not(f) => f.agents_referenced(out),
            DoxFormula::And(fs) => fs.iter().for_each(|f| f.agents_referenced(out)),
            DoxFormula::CondBelief(a, c, f) => {
                out.push(*a);
                c.agents_referenced(out);
                f.agents_referenced(out);
            }
        }
    }
}

/// What the formula text needs to resolve names: the variable schema, the
/// agent list, and optionally the success condition bound to `suc`.
#[derive(Clone, Copy)]
pub struct FormulaContext<'a> {
    pub schema: &'a Schema,
    pub agents: &'a [String],
    pub success: Option<&'a Arc<SuccessCondition>>,
}

impl<'a> FormulaContext<'a> {
    pub fn new(schema: &'a Schema, agents: &'a [String]) -> Self {
        FormulaContext {
            schema,
            agents,
            success: None,
        }
    }

    pub fn with_success(mut self, success: &'a Arc<SuccessCondition>) -> Self {
        self.success = Some(success);
        self
    }

    pub fn parse(&self, text: &str) -> Result<DoxFormula, ParseError> {
        let mut cur = Cursor::new(text);
        let f = self.parse_at(&mut cur)?;
        cur.finish()?;
        Ok(f)
    }

    fn parse_at(&self, cur: &mut Cursor<'_>) -> Result<DoxFormula, ParseError> {
        if cur.eat_keyword("true") {
            return Ok(DoxFormula::Top);
        }
        if cur.eat_keyword("false") {
            return Ok(DoxFormula::bottom());
        }
        if cur.eat_keyword("suc") {
            return match self.success {
                Some(s) => Ok(DoxFormula::Succeeded(s.clone())),
                None => Err(cur.error("`suc` used without a plan library")),
            };
        }
        if cur.eat("!") {
            return Ok(DoxFormula::not(self.parse_at(cur)?));
        }
        if cur.eat("(") {
            return Ok(match parse_list(cur, |c| self.parse_at(c))? {
                ListForm::Group(f) => f,
                ListForm::List(ListOp::And, fs) => DoxFormula::And(fs),
                ListForm::List(ListOp::Or, fs) => DoxFormula::or(fs),
            });
        }
        for (word, kind) in [("in", 0), ("entailed", 1), ("sat", 2)] {
            let save = cur.save();
            if cur.eat_keyword(word) {
                if cur.eat("(") {
                    let c = parse_constraint_at(self.schema, cur)?;
                    cur.expect(")")?;
                    return Ok(match kind {
                        0 => DoxFormula::In(c),
                        1 => DoxFormula::Entailed(c),
                        _ => DoxFormula::sat(c),
                    });
                }
                cur.restore(save);
            }
        }
        let save = cur.save();
        if cur.eat_keyword("B") && cur.eat("[") {
            let name = cur.ident()?;
            let Some(idx) = self.agents.iter().position(|a| a == name) else {
                cur.restore(save);
                return Err(cur.error(format!("unknown agent `{name}`")));
            };
            let cond = if cur.eat("|") { self.parse_at(cur)? } else { DoxFormula::Top };
            cur.expect("]")?;
            cur.expect("(")?;
            let body = self.parse_at(cur)?;
            cur.expect(")")?;
            return Ok(DoxFormula::cond_belief(AgentId(idx as u16), cond, body));
        }
        cur.restore(save);
        Err(cur.error("expected a formula"))
    }

    pub fn render(&self, f: &DoxFormula) -> String {
        let mut out = String::new();
        self.write(f, &mut out);
        out
    }

    fn write(&self, f: &DoxFormula, out: &mut String) {
        match f {
            DoxFormula::Top => out.push_str("true"),
            DoxFormula::Succeeded(_) => out.push_str("suc"),
            DoxFormula::In(c) => self.wrap("in", c, out),
            DoxFormula::Entailed(c) => self.wrap("entailed", c, out),
            DoxFormula::Not(inner) => match &**inner {
                DoxFormula::Entailed(Constraint::Not(c)) => self.wrap("sat", c, out),
                other => {
                    out.push('!');
                    self.write(other, out);
                }
            },
            DoxFormula::And(fs) => {
                let items: Vec<_> = fs.iter().map(|f| move |o: &mut String| self.write(f, o)).collect();
                render_list(out, "&", &items);
            }
            DoxFormula::CondBelief(a, cond, body) => {
                out.push_str("B[");
                match self.agents.get(a.index()) {
                    Some(name) => out.push_str(name),
                    None => out.push_str(&format!("#{}", a.0)),
                }
                if **cond != DoxFormula::Top {
                    out.push_str(" | ");
                    self.write(cond, out);
                }
                out.push_str("](");
                self.write(body, out);
                out.push(')');
            }
        }
    }

    fn wrap(&self, word: &str, c: &Constraint, out: &mut String) {
        out.push_str(word);
        out.push('(');
        write_constraint(self.schema, c, out);
        out.push(')');
    }

    /// Renderer usable with `{}`.
    pub fn display<'f>(&'f self, f: &'f DoxFormula) -> impl fmt::Display + 'f {
        struct D<'x>(&'x FormulaContext<'x>, &'x DoxFormula);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0.render(self.1))
            }
        }
        D(self, f)
    }
}
