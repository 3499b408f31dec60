//! Systems of equations over a finite structure: varieties, minimal
//! subsystems with the same variety, and the universal sentence transferring
//! a discarded equation.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::folang::{self, Formula, Term};
use crate::fostruct::{combinations, index_tuples, FiniteStructure};
use crate::par;

/// A finite system of equations `t = u` in a fixed ordered variable list.
/// Only the equation atom is allowed; inequations are rejected at
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquationSystem {
    variables: Vec<String>,
    equations: Vec<(Term, Term)>,
}

#[derive(Debug, Error)]
pub enum EquationError {
    #[error("only plain equations `t = u` are allowed in a system")]
    NotAnEquation,
    #[error("equation uses variable `{0}` that is not among the system variables")]
    ForeignVariable(String),
    #[error("system has {0} equations; the exact core search is capped at {MAX_CORE_SEARCH}")]
    TooManyEquations(usize),
    #[error(transparent)]
    Eval(#[from] folang::EvalError),
}

/// Exhaustive subset search is exponential; refuse beyond this many equations.
pub const MAX_CORE_SEARCH: usize = 12;

impl EquationSystem {
    pub fn new(
        variables: Vec<String>,
        equations: Vec<(Term, Term)>,
    ) -> Result<Self, EquationError> {
        for (lhs, rhs) in &equations {
            for v in lhs.variables().union(&rhs.variables()) {
                if !variables.contains(v) {
                    return Err(EquationError::ForeignVariable(v.clone()));
                }
            }
        }
        Ok(EquationSystem {
            variables,
            equations,
        })
    }

    /// Builds a system from formulas, accepting only the `Equal` atom.
    pub fn from_formulas(
        variables: Vec<String>,
        formulas: Vec<Formula>,
    ) -> Result<Self, EquationError> {
        let mut equations = Vec::with_capacity(formulas.len());
        for f in formulas {
            match f {
                Formula::Equal(lhs, rhs) => equations.push((lhs, rhs)),
                _ => return Err(EquationError::NotAnEquation),
            }
        }
        Self::new(variables, equations)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn equations(&self) -> &[(Term, Term)] {
        &self.equations
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    fn subsystem(&self, indices: &[usize]) -> EquationSystem {
        EquationSystem {
            variables: self.variables.clone(),
            equations: indices.iter().map(|i| self.equations[*i].clone()).collect(),
        }
    }
}

fn holds(
    m: &FiniteStructure,
    eq: &(Term, Term),
    env: &mut Vec<(String, usize)>,
) -> Result<bool, folang::EvalError> {
    Ok(folang::eval_term(m, &eq.0, env)? == folang::eval_term(m, &eq.1, env)?)
}

fn variety_idx(
    m: &FiniteStructure,
    sys: &EquationSystem,
) -> Result<BTreeSet<Vec<usize>>, EquationError> {
    let mut out = BTreeSet::new();
    for tuple in index_tuples(m.size(), sys.variables.len()) {
        let mut env: Vec<(String, usize)> = sys
            .variables
            .iter()
            .cloned()
            .zip(tuple.iter().copied())
            .collect();
        let mut solves = true;
        for eq in &sys.equations {
            if !holds(m, eq, &mut env)? {
                solves = false;
                break;
            }
        }
        if solves {
            out.insert(tuple);
        }
    }
    Ok(out)
}

/// The solution set of `sys` in `m`, as id tuples in assignment-enumeration
/// order (brute force over carrier^m).
pub fn variety(
    m: &FiniteStructure,
    sys: &EquationSystem,
) -> Result<Vec<Vec<String>>, EquationError> {
    Ok(variety_idx(m, sys)?
        .into_iter()
        .map(|t| t.iter().map(|e| m.elem_id(*e).to_string()).collect())
        .collect())
}

/// A minimal-cardinality subsystem with the same variety as the full system.
/// Candidates of each size are scanned in lexicographic order of their index
/// sets, so ties resolve to the earliest equations in list order.
pub fn noetherian_core(
    m: &FiniteStructure,
    sys: &EquationSystem,
) -> Result<EquationSystem, EquationError> {
    let n = sys.len();
    if n > MAX_CORE_SEARCH {
        return Err(EquationError::TooManyEquations(n));
    }
    let target = variety_idx(m, sys)?;
    for size in 0..=n {
        let candidates = combinations(n, size);
        let found = par::first_match(&candidates, |combo| {
            let sub = sys.subsystem(combo);
            match variety_idx(m, &sub) {
                Ok(v) if v == target => Some(sub),
                _ => None,
            }
        });
        if let Some(core) = found {
            return Ok(core);
        }
    }
    unreachable!("the full system always matches its own variety")
}

/// The universal sentence carrying one discarded equation `s` along a core
/// `{s_1, ..., s_r}`: `forall x... !(s_1 & ... & s_r & !s)`, or `forall x...
/// s` for an empty core. True in `m` whenever the core's variety is contained
/// in the variety of `{s}`.
pub fn transfer_sentence(
    core: &EquationSystem,
    s: &(Term, Term),
) -> Result<Formula, EquationError> {
    for v in s.0.variables().union(&s.1.variables()) {
        if !core.variables.contains(v) {
            return Err(EquationError::ForeignVariable(v.clone()));
        }
    }
    let eq = |pair: &(Term, Term)| Formula::Equal(pair.0.clone(), pair.1.clone());
    let mut body = if core.is_empty() {
        eq(s)
    } else {
        let clauses: Vec<Formula> = core
            .equations
            .iter()
            .map(eq)
            .chain([Formula::Not(Box::new(eq(s)))])
            .collect();
        Formula::Not(Box::new(Formula::and_all(clauses).expect("non-empty")))
    };
    for v in core.variables.iter().rev() {
        body = Formula::Forall(v.clone(), Box::new(body));
    }
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::folang::{eval_sentence, parse, parse_equation};

    fn z3_system(vars: &[&str], texts: &[&str]) -> EquationSystem {
        let m = fixtures::z3_group();
        let equations = texts
            .iter()
            .map(|t| parse_equation(t, m.signature()).unwrap())
            .collect();
        EquationSystem::new(vars.iter().map(|v| v.to_string()).collect(), equations).unwrap()
    }

    #[test]
    fn variety_of_doubling() {
        let m = fixtures::z3_group();
        let sys = z3_system(&["x", "y"], &["x*x = y"]);
        let v = variety(&m, &sys).unwrap();
        assert_eq!(
            v,
            vec![
                vec!["0".to_string(), "0".to_string()],
                vec!["1".to_string(), "2".to_string()],
                vec!["2".to_string(), "1".to_string()],
            ]
        );
    }

    #[test]
    fn empty_system_has_full_variety() {
        let m = fixtures::z3_group();
        let sys = z3_system(&["x"], &[]);
        assert_eq!(variety(&m, &sys).unwrap().len(), 3);
    }

    #[test]
    fn inequations_are_rejected() {
        let m = fixtures::z3_group();
        let f = parse("x != y", m.signature()).unwrap();
        let err = EquationSystem::from_formulas(vec!["x".into(), "y".into()], vec![f]);
        assert!(matches!(err, Err(EquationError::NotAnEquation)));
    }

    #[test]
    fn core_drops_redundant_equations() {
        let m = fixtures::z3_group();
        let sys = z3_system(&["x", "y"], &["x = x", "x*x = y", "(x*x)*0 = y"]);
        let core = noetherian_core(&m, &sys).unwrap();
        assert_eq!(core.len(), 1);
        let rendered =
            Formula::Equal(core.equations()[0].0.clone(), core.equations()[0].1.clone());
        assert_eq!(rendered.to_string(), "mul(x, x) = y");
    }

    #[test]
    fn universally_valid_singleton_has_empty_core() {
        let m = fixtures::z3_group();
        let sys = z3_system(&["x"], &["x = x"]);
        let core = noetherian_core(&m, &sys).unwrap();
        assert!(core.is_empty());
    }

    #[test]
    fn proper_singleton_is_its_own_core() {
        let m = fixtures::z3_group();
        let sys = z3_system(&["x"], &["x*x = 0"]);
        let core = noetherian_core(&m, &sys).unwrap();
        assert_eq!(core.len(), 1);
    }

    #[test]
    fn empty_core_is_a_fixed_point() {
        let m = fixtures::z3_group();
        let sys = z3_system(&["x"], &[]);
        let core = noetherian_core(&m, &sys).unwrap();
        assert!(core.is_empty());
    }

    #[test]
    fn transfer_sentence_for_discarded_equation() {
        let m = fixtures::z3_group();
        let core = z3_system(&["x", "y"], &["x*x = y"]);
        let s = parse_equation("(x*x)*0 = y", m.signature()).unwrap();
        let phi = transfer_sentence(&core, &s).unwrap();
        assert!(eval_sentence(&m, &phi).unwrap());
    }

    #[test]
    fn transfer_sentence_with_empty_core_is_plain_universal() {
        let m = fixtures::z3_group();
        let core = z3_system(&["x"], &[]);
        let s = parse_equation("x = x", m.signature()).unwrap();
        let phi = transfer_sentence(&core, &s).unwrap();
        assert_eq!(phi.to_string(), "forall x . x = x");
        assert!(eval_sentence(&m, &phi).unwrap());
    }

    #[test]
    fn transfer_sentence_pinned_variable() {
        let m = fixtures::z3_group();
        let core = z3_system(&["x"], &["x = 0"]);
        let s = parse_equation("x*x = 0", m.signature()).unwrap();
        let phi = transfer_sentence(&core, &s).unwrap();
        assert!(eval_sentence(&m, &phi).unwrap());
    }

    #[test]
    fn variety_is_antitone() {
        let m = fixtures::z3_group();
        let small = z3_system(&["x", "y"], &["x*x = y"]);
        let large = z3_system(&["x", "y"], &["x*x = y", "x = 0"]);
        let vs: BTreeSet<Vec<String>> = variety(&m, &small).unwrap().into_iter().collect();
        let vl: BTreeSet<Vec<String>> = variety(&m, &large).unwrap().into_iter().collect();
        assert!(vl.is_subset(&vs));
    }
}
