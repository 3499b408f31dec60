//! Signatures, finite structures and the machinery of partial morphisms.
//!
//! A [`FiniteStructure`] interprets a [`Signature`] over a finite ordered
//! carrier of opaque string ids. Functions are total; partial operations
//! (like a pregroup product) are modelled as relations. On top of that this
//! module provides subset isomorphism search, closure chains under the total
//! functions, and the bounded finite-subset equivalence check used to certify
//! existential equivalence at desk scale.

use std::collections::{HashMap, HashSet};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;

/// A first-order signature: constant, function and relation symbols.
///
/// Symbol names are pairwise distinct across the three classes and arities
/// are strictly positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SignatureDef", into = "SignatureDef")]
pub struct Signature {
    constants: BTreeSet<String>,
    functions: BTreeMap<String, usize>,
    relations: BTreeMap<String, usize>,
}

/// Serde-facing form of [`Signature`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignatureDef {
    #[serde(default)]
    pub constants: Vec<String>,
    #[serde(default)]
    pub functions: BTreeMap<String, usize>,
    #[serde(default)]
    pub relations: BTreeMap<String, usize>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("symbol `{0}` is declared in more than one class")]
    DuplicateSymbol(String),
    #[error("symbol `{0}` has arity 0; arities must be positive")]
    ZeroArity(String),
    #[error("symbol name `{0}` is empty or contains a separator character")]
    BadName(String),
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Signature {
    pub fn new<C, F, R>(constants: C, functions: F, relations: R) -> Result<Self, SignatureError>
    where
        C: IntoIterator<Item = String>,
        F: IntoIterator<Item = (String, usize)>,
        R: IntoIterator<Item = (String, usize)>,
    {
        let constants: BTreeSet<String> = constants.into_iter().collect();
        let functions: BTreeMap<String, usize> = functions.into_iter().collect();
        let relations: BTreeMap<String, usize> = relations.into_iter().collect();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for name in constants
            .iter()
            .chain(functions.keys())
            .chain(relations.keys())
        {
            if !valid_name(name) {
                return Err(SignatureError::BadName(name.clone()));
            }
            if !seen.insert(name) {
                return Err(SignatureError::DuplicateSymbol(name.clone()));
            }
        }
        for (name, arity) in functions.iter().chain(relations.iter()) {
            if *arity == 0 {
                return Err(SignatureError::ZeroArity(name.clone()));
            }
        }
        Ok(Signature {
            constants,
            functions,
            relations,
        })
    }

    pub fn constants(&self) -> impl Iterator<Item = &str> {
        self.constants.iter().map(String::as_str)
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, usize)> {
        self.functions.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, usize)> {
        self.relations.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn has_constant(&self, name: &str) -> bool {
        self.constants.contains(name)
    }

    pub fn function_arity(&self, name: &str) -> Option<usize> {
        self.functions.get(name).copied()
    }

    pub fn relation_arity(&self, name: &str) -> Option<usize> {
        self.relations.get(name).copied()
    }
}

impl TryFrom<SignatureDef> for Signature {
    type Error = SignatureError;

    fn try_from(def: SignatureDef) -> Result<Self, SignatureError> {
        Signature::new(def.constants, def.functions, def.relations)
    }
}

impl From<Signature> for SignatureDef {
    fn from(sig: Signature) -> SignatureDef {
        SignatureDef {
            constants: sig.constants.into_iter().collect(),
            functions: sig.functions,
            relations: sig.relations,
        }
    }
}

/// Raw, unvalidated structure document. This is the on-disk schema: one
/// structured-text (JSON) document per structure, unknown keys rejected.
///
/// Function tables are keyed by comma-joined argument ids, e.g. `"a,b"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureDef {
    pub signature: SignatureDef,
    pub carrier: Vec<String>,
    #[serde(default)]
    pub constants: BTreeMap<String, String>,
    #[serde(default)]
    pub functions: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    pub relations: BTreeMap<String, Vec<Vec<String>>>,
    /// Optional tag; `"pregroup"` asks loaders to run the axiom check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

/// One violated invariant found by [`validate_structure`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Finding {
    BadSignature { message: String },
    EmptyCarrier,
    BadElementId { id: String },
    DuplicateCarrierId { id: String },
    UnknownSymbol { kind: String, symbol: String },
    MissingConstant { symbol: String },
    ForeignElement { context: String, id: String },
    NonTotalFunction { symbol: String, missing: Vec<String> },
    ArityMismatch { symbol: String, entry: String },
    DuplicateRelationTuple { symbol: String, tuple: Vec<String> },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::BadSignature { message } => write!(f, "bad signature: {message}"),
            Finding::EmptyCarrier => write!(f, "carrier is empty"),
            Finding::BadElementId { id } => write!(f, "bad element id `{id}`"),
            Finding::DuplicateCarrierId { id } => write!(f, "duplicate carrier id `{id}`"),
            Finding::UnknownSymbol { kind, symbol } => {
                write!(f, "interpretation for unknown {kind} symbol `{symbol}`")
            }
            Finding::MissingConstant { symbol } => {
                write!(f, "constant `{symbol}` has no interpretation")
            }
            Finding::ForeignElement { context, id } => {
                write!(f, "foreign element `{id}` in {context}")
            }
            Finding::NonTotalFunction { symbol, missing } => write!(
                f,
                "non-total function `{symbol}`: no value for ({})",
                missing.join(",")
            ),
            Finding::ArityMismatch { symbol, entry } => {
                write!(f, "arity mismatch for `{symbol}` at {entry}")
            }
            Finding::DuplicateRelationTuple { symbol, tuple } => {
                write!(f, "duplicate tuple ({}) in `{symbol}`", tuple.join(","))
            }
        }
    }
}

/// Outcome of structure validation; empty iff the document is a valid
/// finite structure.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            write!(f, "valid")
        } else {
            for finding in &self.findings {
                writeln!(f, "- {finding}")?;
            }
            Ok(())
        }
    }
}

/// Lists every violated structure invariant in `def`; empty report iff valid.
pub fn validate_structure(def: &StructureDef) -> ValidationReport {
    let mut findings = Vec::new();
    let sig = match Signature::try_from(def.signature.clone()) {
        Ok(sig) => sig,
        Err(e) => {
            findings.push(Finding::BadSignature {
                message: e.to_string(),
            });
            return ValidationReport { findings };
        }
    };

    if def.carrier.is_empty() {
        findings.push(Finding::EmptyCarrier);
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, id) in def.carrier.iter().enumerate() {
        if id.is_empty() || id.contains(',') || id.chars().any(char::is_whitespace) {
            findings.push(Finding::BadElementId { id: id.clone() });
        }
        if index.insert(id.as_str(), i).is_some() {
            findings.push(Finding::DuplicateCarrierId { id: id.clone() });
        }
    }
    let known = |id: &str| index.contains_key(id);

    for (symbol, elem) in &def.constants {
        if !sig.has_constant(symbol) {
            findings.push(Finding::UnknownSymbol {
                kind: "constant".into(),
                symbol: symbol.clone(),
            });
        }
        if !known(elem) {
            findings.push(Finding::ForeignElement {
                context: format!("interpretation of constant `{symbol}`"),
                id: elem.clone(),
            });
        }
    }
    for symbol in sig.constants() {
        if !def.constants.contains_key(symbol) {
            findings.push(Finding::MissingConstant {
                symbol: symbol.into(),
            });
        }
    }

    for (symbol, table) in &def.functions {
        let Some(arity) = sig.function_arity(symbol) else {
            findings.push(Finding::UnknownSymbol {
                kind: "function".into(),
                symbol: symbol.clone(),
            });
            continue;
        };
        let mut seen: HashSet<Vec<&str>> = HashSet::new();
        for (key, value) in table {
            let args: Vec<&str> = key.split(',').collect();
            if args.len() != arity {
                findings.push(Finding::ArityMismatch {
                    symbol: symbol.clone(),
                    entry: key.clone(),
                });
                continue;
            }
            for a in &args {
                if !known(a) {
                    findings.push(Finding::ForeignElement {
                        context: format!("argument of function `{symbol}`"),
                        id: (*a).into(),
                    });
                }
            }
            if !known(value) {
                findings.push(Finding::ForeignElement {
                    context: format!("value of function `{symbol}`"),
                    id: value.clone(),
                });
            }
            seen.insert(args);
        }
        // Totality: every tuple over the carrier must have a value.
        if !def.carrier.is_empty() {
            for tuple in tuples_over(&def.carrier, arity) {
                let key: Vec<&str> = tuple.iter().map(|i| def.carrier[*i].as_str()).collect();
                if !seen.contains(&key) {
                    findings.push(Finding::NonTotalFunction {
                        symbol: symbol.clone(),
                        missing: key.iter().map(|s| (*s).into()).collect(),
                    });
                }
            }
        }
    }
    for (symbol, _) in sig.functions() {
        if !def.functions.contains_key(symbol) && !def.carrier.is_empty() {
            findings.push(Finding::NonTotalFunction {
                symbol: symbol.into(),
                missing: vec![def.carrier[0].clone(); sig.function_arity(symbol).unwrap()],
            });
        }
    }

    for (symbol, tuples) in &def.relations {
        let Some(arity) = sig.relation_arity(symbol) else {
            findings.push(Finding::UnknownSymbol {
                kind: "relation".into(),
                symbol: symbol.clone(),
            });
            continue;
        };
        let mut seen: HashSet<&[String]> = HashSet::new();
        for tuple in tuples {
            if tuple.len() != arity {
                findings.push(Finding::ArityMismatch {
                    symbol: symbol.clone(),
                    entry: tuple.join(","),
                });
                continue;
            }
            for id in tuple {
                if !known(id) {
                    findings.push(Finding::ForeignElement {
                        context: format!("tuple of relation `{symbol}`"),
                        id: id.clone(),
                    });
                }
            }
            if !seen.insert(tuple.as_slice()) {
                findings.push(Finding::DuplicateRelationTuple {
                    symbol: symbol.clone(),
                    tuple: tuple.clone(),
                });
            }
        }
    }

    ValidationReport { findings }
}

/// Iterate all index tuples of the given arity over a carrier, in
/// lexicographic order.
fn tuples_over(carrier: &[String], arity: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
    let n = carrier.len();
    let total = n.checked_pow(arity as u32).unwrap_or(0);
    (0..total).map(move |mut code| {
        let mut tuple = vec![0usize; arity];
        for slot in tuple.iter_mut().rev() {
            *slot = code % n;
            code /= n;
        }
        tuple
    })
}

pub(crate) fn index_tuples(n: usize, arity: usize) -> Vec<Vec<usize>> {
    let total = n.checked_pow(arity as u32).unwrap_or(0);
    (0..total)
        .map(|mut code| {
            let mut tuple = vec![0usize; arity];
            for slot in tuple.iter_mut().rev() {
                *slot = code % n;
                code /= n;
            }
            tuple
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("structure is invalid:\n{0}")]
    Invalid(ValidationReport),
    #[error("unknown element id `{0}`")]
    UnknownElement(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// A validated finite L-structure: carrier, constant/function/relation
/// interpretations. Immutable after construction; all queries are pure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteStructure {
    signature: Signature,
    carrier: Vec<String>,
    index: HashMap<String, usize>,
    consts: BTreeMap<String, usize>,
    funcs: BTreeMap<String, HashMap<Vec<usize>, usize>>,
    rels: BTreeMap<String, BTreeSet<Vec<usize>>>,
}

impl FiniteStructure {
    /// Validates `def` and freezes it into an indexed structure.
    pub fn from_def(def: &StructureDef) -> Result<Self, StructureError> {
        let report = validate_structure(def);
        if !report.is_valid() {
            return Err(StructureError::Invalid(report));
        }
        let signature = Signature::try_from(def.signature.clone()).expect("validated");
        let carrier = def.carrier.clone();
        let index: HashMap<String, usize> = carrier
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let consts = def
            .constants
            .iter()
            .map(|(sym, elem)| (sym.clone(), index[elem]))
            .collect();
        let funcs = def
            .functions
            .iter()
            .map(|(sym, table)| {
                let table = table
                    .iter()
                    .map(|(key, value)| {
                        let args: Vec<usize> =
                            key.split(',').map(|id| index[id]).collect();
                        (args, index[value])
                    })
                    .collect();
                (sym.clone(), table)
            })
            .collect();
        let rels = def
            .relations
            .iter()
            .map(|(sym, tuples)| {
                let tuples = tuples
                    .iter()
                    .map(|t| t.iter().map(|id| index[id]).collect::<Vec<usize>>())
                    .collect();
                (sym.clone(), tuples)
            })
            .collect();
        Ok(FiniteStructure {
            signature,
            carrier,
            index,
            consts,
            funcs,
            rels,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, StructureError> {
        let def: StructureDef = serde_json::from_str(text)?;
        Self::from_def(&def)
    }

    pub fn to_def(&self) -> StructureDef {
        StructureDef {
            signature: SignatureDef::from(self.signature.clone()),
            carrier: self.carrier.clone(),
            constants: self
                .consts
                .iter()
                .map(|(sym, idx)| (sym.clone(), self.carrier[*idx].clone()))
                .collect(),
            functions: self
                .funcs
                .iter()
                .map(|(sym, table)| {
                    let mut out = BTreeMap::new();
                    for (args, value) in table {
                        let key = args
                            .iter()
                            .map(|i| self.carrier[*i].as_str())
                            .collect::<Vec<_>>()
                            .join(",");
                        out.insert(key, self.carrier[*value].clone());
                    }
                    (sym.clone(), out)
                })
                .collect(),
            relations: self
                .rels
                .iter()
                .map(|(sym, tuples)| {
                    let out = tuples
                        .iter()
                        .map(|t| t.iter().map(|i| self.carrier[*i].clone()).collect())
                        .collect();
                    (sym.clone(), out)
                })
                .collect(),
            kind: None,
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    /// Carrier ids in carrier order. The position of an id in this list is
    /// its index, and the order is the one every deterministic search in the
    /// crate uses.
    pub fn carrier(&self) -> &[String] {
        &self.carrier
    }

    pub fn size(&self) -> usize {
        self.carrier.len()
    }

    pub fn elem_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn elem_id(&self, idx: usize) -> &str {
        &self.carrier[idx]
    }

    pub fn require_elem(&self, id: &str) -> Result<usize, StructureError> {
        self.elem_index(id)
            .ok_or_else(|| StructureError::UnknownElement(id.into()))
    }

    pub fn const_elem(&self, symbol: &str) -> Option<usize> {
        self.consts.get(symbol).copied()
    }

    /// Constant symbols interpreted by the element at `idx`, in symbol order.
    pub fn constants_of(&self, idx: usize) -> Vec<&str> {
        self.consts
            .iter()
            .filter(|(_, e)| **e == idx)
            .map(|(sym, _)| sym.as_str())
            .collect()
    }

    pub fn func_value(&self, symbol: &str, args: &[usize]) -> Option<usize> {
        self.funcs.get(symbol)?.get(args).copied()
    }

    pub fn rel_contains(&self, symbol: &str, tuple: &[usize]) -> bool {
        self.rels
            .get(symbol)
            .map(|t| t.contains(tuple))
            .unwrap_or(false)
    }

    pub fn rel_tuples(&self, symbol: &str) -> impl Iterator<Item = &Vec<usize>> {
        self.rels.get(symbol).into_iter().flatten()
    }

    /// Restriction of the structure to a sub-language. Symbols not listed are
    /// dropped; listed symbols must exist.
    pub fn reduct(
        &self,
        constants: &[&str],
        functions: &[&str],
        relations: &[&str],
    ) -> Result<FiniteStructure, StructureError> {
        for c in constants {
            if !self.signature.has_constant(c) {
                return Err(StructureError::UnknownSymbol((*c).into()));
            }
        }
        let mut def = self.to_def();
        def.signature.constants.retain(|c| constants.contains(&c.as_str()));
        def.constants.retain(|c, _| constants.contains(&c.as_str()));
        for f in functions {
            if self.signature.function_arity(f).is_none() {
                return Err(StructureError::UnknownSymbol((*f).into()));
            }
        }
        def.signature.functions.retain(|f, _| functions.contains(&f.as_str()));
        def.functions.retain(|f, _| functions.contains(&f.as_str()));
        for r in relations {
            if self.signature.relation_arity(r).is_none() {
                return Err(StructureError::UnknownSymbol((*r).into()));
            }
        }
        def.signature.relations.retain(|r, _| relations.contains(&r.as_str()));
        def.relations.retain(|r, _| relations.contains(&r.as_str()));
        FiniteStructure::from_def(&def)
    }

    /// Copy of the structure with element ids renamed through `map`.
    /// Ids absent from the map are kept; carrier positions are preserved.
    pub fn relabeled(&self, map: &BTreeMap<String, String>) -> Result<FiniteStructure, StructureError> {
        let rename = |id: &String| map.get(id).cloned().unwrap_or_else(|| id.clone());
        let mut def = self.to_def();
        def.carrier = def.carrier.iter().map(rename).collect();
        def.constants = def
            .constants
            .iter()
            .map(|(sym, elem)| (sym.clone(), rename(elem)))
            .collect();
        def.functions = def
            .functions
            .iter()
            .map(|(sym, table)| {
                let table = table
                    .iter()
                    .map(|(key, value)| {
                        let key = key
                            .split(',')
                            .map(|id| rename(&id.to_string()))
                            .collect::<Vec<_>>()
                            .join(",");
                        (key, rename(value))
                    })
                    .collect();
                (sym.clone(), table)
            })
            .collect();
        def.relations = def
            .relations
            .iter()
            .map(|(sym, tuples)| {
                let tuples = tuples
                    .iter()
                    .map(|t| t.iter().map(rename).collect())
                    .collect();
                (sym.clone(), tuples)
            })
            .collect();
        FiniteStructure::from_def(&def)
    }
}

/// A partial map between carriers of two structures, kept by element id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartialMap {
    pairs: BTreeMap<String, String>,
}

impl PartialMap {
    pub fn new<I, S, T>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        PartialMap {
            pairs: pairs
                .into_iter()
                .map(|(a, b)| (a.into(), b.into()))
                .collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.pairs.get(id).map(String::as_str)
    }

    pub fn domain(&self) -> impl Iterator<Item = &str> {
        self.pairs.keys().map(String::as_str)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_injective(&self) -> bool {
        let images: BTreeSet<&str> = self.pairs.values().map(String::as_str).collect();
        images.len() == self.pairs.len()
    }

    /// The inverse map; `None` when not injective.
    pub fn inverse(&self) -> Option<PartialMap> {
        if !self.is_injective() {
            return None;
        }
        Some(PartialMap {
            pairs: self
                .pairs
                .iter()
                .map(|(a, b)| (b.clone(), a.clone()))
                .collect(),
        })
    }
}

/// A violated morphism condition, with the offending tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum MorphismViolation {
    /// The domain element interprets `symbol` but its image does not.
    Constant { symbol: String, elem: String, image: String },
    /// `f(args)` lands in the domain but the image of the value differs from
    /// `f` applied to the mapped arguments.
    Function {
        symbol: String,
        args: Vec<String>,
        expected: String,
        found: String,
    },
    /// `tuple` is in the relation on the source but its image is not.
    Relation { symbol: String, tuple: Vec<String>, image: Vec<String> },
}

impl fmt::Display for MorphismViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MorphismViolation::Constant { symbol, elem, image } => write!(
                f,
                "`{elem}` interprets constant `{symbol}` but its image `{image}` does not"
            ),
            MorphismViolation::Function {
                symbol,
                args,
                expected,
                found,
            } => write!(
                f,
                "{symbol}({}) should map to `{expected}` but the target gives `{found}`",
                args.join(",")
            ),
            MorphismViolation::Relation { symbol, tuple, image } => write!(
                f,
                "({}) is in `{symbol}` but its image ({}) is not",
                tuple.join(","),
                image.join(",")
            ),
        }
    }
}

/// Result of checking the three morphism conditions; `ok()` iff no condition
/// is violated. Violations are listed in a fixed order: constants, then
/// function tuples, then relation tuples.
#[derive(Debug, Clone, Serialize)]
pub struct MorphismCheck {
    pub violations: Vec<MorphismViolation>,
}

impl MorphismCheck {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_failure(&self) -> Option<&MorphismViolation> {
        self.violations.first()
    }
}

/// Checks whether `phi` is an L-morphism from a subset of `source` into
/// `target`: interpreted constants are carried to interpreted constants,
/// function values landing in the domain are preserved, and relation tuples
/// over the domain are preserved.
pub fn is_morphism(
    phi: &PartialMap,
    source: &FiniteStructure,
    target: &FiniteStructure,
) -> Result<MorphismCheck, StructureError> {
    let mut dom: Vec<usize> = Vec::with_capacity(phi.len());
    let mut img: HashMap<usize, usize> = HashMap::with_capacity(phi.len());
    for (a, b) in phi.pairs() {
        let ia = source.require_elem(a)?;
        let ib = target.require_elem(b)?;
        dom.push(ia);
        img.insert(ia, ib);
    }
    dom.sort_unstable();
    let mut violations = Vec::new();

    for symbol in source.signature().constants() {
        if let Some(elem) = source.const_elem(symbol) {
            if let Some(&image) = img.get(&elem) {
                if target.const_elem(symbol) != Some(image) {
                    violations.push(MorphismViolation::Constant {
                        symbol: symbol.into(),
                        elem: source.elem_id(elem).into(),
                        image: target.elem_id(image).into(),
                    });
                }
            }
        }
    }

    for (symbol, arity) in source.signature().functions() {
        for args in index_tuples(dom.len(), arity) {
            let args: Vec<usize> = args.iter().map(|i| dom[*i]).collect();
            let Some(value) = source.func_value(symbol, &args) else {
                continue;
            };
            let Some(&mapped_value) = img.get(&value) else {
                continue; // value lands outside the domain: no condition
            };
            let mapped_args: Vec<usize> = args.iter().map(|a| img[a]).collect();
            let found = target.func_value(symbol, &mapped_args);
            if found != Some(mapped_value) {
                violations.push(MorphismViolation::Function {
                    symbol: symbol.into(),
                    args: args.iter().map(|a| source.elem_id(*a).into()).collect(),
                    expected: target.elem_id(mapped_value).into(),
                    found: found
                        .map(|v| target.elem_id(v).into())
                        .unwrap_or_else(|| "<undefined>".into()),
                });
            }
        }
    }

    for (symbol, _) in source.signature().relations() {
        for tuple in source.rel_tuples(symbol) {
            if !tuple.iter().all(|e| img.contains_key(e)) {
                continue;
            }
            let image: Vec<usize> = tuple.iter().map(|e| img[e]).collect();
            if !target.rel_contains(symbol, &image) {
                violations.push(MorphismViolation::Relation {
                    symbol: symbol.into(),
                    tuple: tuple.iter().map(|e| source.elem_id(*e).into()).collect(),
                    image: image.iter().map(|e| target.elem_id(*e).into()).collect(),
                });
            }
        }
    }

    Ok(MorphismCheck { violations })
}

/// Searches for an L-isomorphism from the subset `s` of `source` onto some
/// subset of `target`: a bijection that is a morphism in both directions.
///
/// Deterministic: `s` is processed in source carrier order and candidate
/// images are tried in target carrier order, so the first (and returned)
/// solution carries the lexicographically least image tuple.
pub fn find_isomorphism(
    s: &[String],
    source: &FiniteStructure,
    target: &FiniteStructure,
) -> Result<Option<PartialMap>, StructureError> {
    let mut subset: Vec<usize> = Vec::new();
    for id in s {
        let idx = source.require_elem(id)?;
        if !subset.contains(&idx) {
            subset.push(idx);
        }
    }
    subset.sort_unstable();
    Ok(find_isomorphism_idx(&subset, source, target).map(|images| {
        PartialMap::new(
            subset
                .iter()
                .zip(images.iter())
                .map(|(a, b)| (source.elem_id(*a), target.elem_id(*b))),
        )
    }))
}

/// Index-level isomorphism search; `subset` must be sorted.
pub(crate) fn find_isomorphism_idx(
    subset: &[usize],
    source: &FiniteStructure,
    target: &FiniteStructure,
) -> Option<Vec<usize>> {
    if subset.is_empty() {
        return Some(Vec::new());
    }
    // Exact constant patterns must match element by element.
    let pattern = |st: &FiniteStructure, e: usize| -> Vec<String> {
        st.constants_of(e).iter().map(|s| (*s).to_string()).collect()
    };
    let source_patterns: Vec<Vec<String>> =
        subset.iter().map(|e| pattern(source, *e)).collect();

    let candidates: Vec<usize> = (0..target.size()).collect();
    par::first_match(&candidates, |&first| {
        if pattern(target, first) != source_patterns[0] {
            return None;
        }
        let mut images = vec![first];
        if !relations_consistent(subset, &images, source, target) {
            return None;
        }
        extend_isomorphism(subset, &mut images, &source_patterns, source, target)
    })
}

fn extend_isomorphism(
    subset: &[usize],
    images: &mut Vec<usize>,
    source_patterns: &[Vec<String>],
    source: &FiniteStructure,
    target: &FiniteStructure,
) -> Option<Vec<usize>> {
    if images.len() == subset.len() {
        let phi = PartialMap::new(
            subset
                .iter()
                .zip(images.iter())
                .map(|(a, b)| (source.elem_id(*a), target.elem_id(*b))),
        );
        let forward = is_morphism(&phi, source, target).expect("elements verified");
        if !forward.ok() {
            return None;
        }
        let backward = is_morphism(&phi.inverse()?, target, source).expect("elements verified");
        if !backward.ok() {
            return None;
        }
        return Some(images.clone());
    }
    let k = images.len();
    for candidate in 0..target.size() {
        if images.contains(&candidate) {
            continue;
        }
        let cand_pattern: Vec<String> = target
            .constants_of(candidate)
            .iter()
            .map(|s| (*s).to_string())
            .collect();
        if cand_pattern != source_patterns[k] {
            continue;
        }
        images.push(candidate);
        if relations_consistent(subset, images, source, target) {
            if let Some(found) =
                extend_isomorphism(subset, images, source_patterns, source, target)
            {
                return Some(found);
            }
        }
        images.pop();
    }
    None
}

/// Forward check: on the assigned prefix, relation membership must agree in
/// both directions.
fn relations_consistent(
    subset: &[usize],
    images: &[usize],
    source: &FiniteStructure,
    target: &FiniteStructure,
) -> bool {
    let k = images.len();
    for (symbol, arity) in source.signature().relations() {
        if target.signature().relation_arity(symbol) != Some(arity) {
            return false;
        }
        for tuple in index_tuples(k, arity) {
            // Only check tuples that touch the newest assignment.
            if !tuple.contains(&(k - 1)) {
                continue;
            }
            let src: Vec<usize> = tuple.iter().map(|i| subset[*i]).collect();
            let dst: Vec<usize> = tuple.iter().map(|i| images[*i]).collect();
            if source.rel_contains(symbol, &src) != target.rel_contains(symbol, &dst) {
                return false;
            }
        }
    }
    true
}

/// An ascending chain of carrier subsets, with the first level at which the
/// chain became stationary (if it did within the requested depth).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureChain {
    pub levels: Vec<BTreeSet<usize>>,
    pub stabilized_at: Option<usize>,
}

impl ClosureChain {
    pub fn last(&self) -> &BTreeSet<usize> {
        self.levels.last().expect("chain has at least S_0")
    }

    pub fn level_ids(&self, m: &FiniteStructure, level: usize) -> Vec<String> {
        self.levels[level]
            .iter()
            .map(|e| m.elem_id(*e).to_string())
            .collect()
    }
}

/// The chain S_0 ⊆ S_1 ⊆ … ⊆ S_depth where each step adds all values of the
/// structure's total functions on tuples from the previous level.
pub fn generated_closure(
    s0: &[String],
    m: &FiniteStructure,
    depth: usize,
) -> Result<ClosureChain, StructureError> {
    let mut current: BTreeSet<usize> = BTreeSet::new();
    for id in s0 {
        current.insert(m.require_elem(id)?);
    }
    let mut levels = vec![current.clone()];
    let mut stabilized_at = None;
    for step in 1..=depth {
        let mut next = current.clone();
        let base: Vec<usize> = current.iter().copied().collect();
        for (symbol, arity) in m.signature().functions() {
            for tuple in index_tuples(base.len(), arity) {
                let args: Vec<usize> = tuple.iter().map(|i| base[*i]).collect();
                if let Some(value) = m.func_value(symbol, &args) {
                    next.insert(value);
                }
            }
        }
        if stabilized_at.is_none() && next == current {
            stabilized_at = Some(step);
        }
        levels.push(next.clone());
        current = next;
    }
    Ok(ClosureChain {
        levels,
        stabilized_at,
    })
}

/// Which structure a failing subset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Left,
    Right,
}

/// Verdict of [`bounded_f_equiv`], with the first witness subset that has no
/// isomorphic partner on the other side.
#[derive(Debug, Clone, Serialize)]
pub struct FEquivOutcome {
    pub equivalent: bool,
    pub witness: Option<(Side, Vec<String>)>,
}

/// Checks that every subset of size 1..=`max_size` of each structure is
/// L-isomorphic to some subset of the other. Subsets are enumerated in
/// size-then-lex order; the witness, if any, is the first failure.
///
/// Already-processed subsets are cached: a new subset that is isomorphic (in
/// the same structure) to a cached one with the same relation fingerprint
/// reuses its verdict.
pub fn bounded_f_equiv(
    m: &FiniteStructure,
    n: &FiniteStructure,
    max_size: usize,
) -> FEquivOutcome {
    if let Some(witness) = one_sided_failure(m, n, max_size) {
        return FEquivOutcome {
            equivalent: false,
            witness: Some((Side::Left, witness)),
        };
    }
    if let Some(witness) = one_sided_failure(n, m, max_size) {
        return FEquivOutcome {
            equivalent: false,
            witness: Some((Side::Right, witness)),
        };
    }
    FEquivOutcome {
        equivalent: true,
        witness: None,
    }
}

fn one_sided_failure(
    m: &FiniteStructure,
    n: &FiniteStructure,
    max_size: usize,
) -> Option<Vec<String>> {
    // fingerprint -> already-processed subsets with their verdicts
    let mut cache: HashMap<Vec<usize>, Vec<(Vec<usize>, bool)>> = HashMap::new();
    for size in 1..=max_size.min(m.size()) {
        for subset in combinations(m.size(), size) {
            let fp = fingerprint(m, &subset);
            let mut verdict = None;
            if let Some(entries) = cache.get(&fp) {
                for (rep, rep_verdict) in entries {
                    let rep_set: BTreeSet<usize> = rep.iter().copied().collect();
                    if onto_search(&subset, &rep_set, m) {
                        verdict = Some(*rep_verdict);
                        break;
                    }
                }
            }
            let verdict =
                verdict.unwrap_or_else(|| find_isomorphism_idx(&subset, m, n).is_some());
            cache.entry(fp).or_default().push((subset.clone(), verdict));
            if !verdict {
                return Some(subset.iter().map(|e| m.elem_id(*e).to_string()).collect());
            }
        }
    }
    None
}

/// Backtracking search for an isomorphism of `a` onto exactly the set `b`
/// within the same structure.
fn onto_search(a: &[usize], b: &BTreeSet<usize>, m: &FiniteStructure) -> bool {
    fn extend(
        a: &[usize],
        b: &[usize],
        images: &mut Vec<usize>,
        m: &FiniteStructure,
    ) -> bool {
        if images.len() == a.len() {
            let phi = PartialMap::new(
                a.iter()
                    .zip(images.iter())
                    .map(|(x, y)| (m.elem_id(*x), m.elem_id(*y))),
            );
            let Some(inv) = phi.inverse() else { return false };
            return is_morphism(&phi, m, m).map(|c| c.ok()).unwrap_or(false)
                && is_morphism(&inv, m, m).map(|c| c.ok()).unwrap_or(false);
        }
        for &candidate in b {
            if images.contains(&candidate) {
                continue;
            }
            images.push(candidate);
            if relations_consistent(a, images, m, m) && extend(a, b, images, m) {
                return true;
            }
            images.pop();
        }
        false
    }
    if a.len() != b.len() {
        return false;
    }
    let b: Vec<usize> = b.iter().copied().collect();
    let mut images = Vec::new();
    extend(a, &b, &mut images, m)
}

/// Cheap isomorphism invariant: subset size plus, per relation, the sorted
/// incidence counts of subset elements in tuples staying inside the subset.
fn fingerprint(m: &FiniteStructure, subset: &[usize]) -> Vec<usize> {
    let inside: BTreeSet<usize> = subset.iter().copied().collect();
    let mut fp = vec![subset.len()];
    for (symbol, _) in m.signature().relations() {
        let mut degrees: Vec<usize> = subset
            .iter()
            .map(|e| {
                m.rel_tuples(symbol)
                    .filter(|t| t.contains(e) && t.iter().all(|x| inside.contains(x)))
                    .count()
            })
            .collect();
        degrees.sort_unstable();
        fp.extend(degrees);
        fp.push(usize::MAX); // separator
    }
    fp
}

/// All size-`k` index combinations from `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn z3_structure_is_valid() {
        let def = fixtures::z3_group_def();
        assert!(validate_structure(&def).is_valid());
    }

    #[test]
    fn missing_function_entry_is_reported() {
        let mut def = fixtures::z3_group_def();
        def.functions.get_mut("mul").unwrap().remove("0,0");
        let report = validate_structure(&def);
        assert_eq!(report.findings.len(), 1);
        assert!(matches!(
            &report.findings[0],
            Finding::NonTotalFunction { symbol, .. } if symbol == "mul"
        ));
    }

    #[test]
    fn foreign_relation_element_is_reported() {
        let mut def = fixtures::pg_dinf_def();
        def.relations
            .get_mut("D")
            .unwrap()
            .push(vec!["a".into(), "zz".into()]);
        let report = validate_structure(&def);
        assert!(report
            .findings
            .iter()
            .any(|f| matches!(f, Finding::ForeignElement { id, .. } if id == "zz")));
    }

    #[test]
    fn identity_map_is_morphism() {
        let m = fixtures::pg_dinf();
        let st = m.structure();
        for subset in [vec!["a"], vec!["1", "a"], vec!["1", "a", "b"]] {
            let phi = PartialMap::new(subset.iter().map(|s| (*s, *s)));
            assert!(is_morphism(&phi, st, st).unwrap().ok());
        }
    }

    #[test]
    fn singleton_a_maps_into_z3() {
        // {a -> 0} from the free-product pregroup into Z/3: the one-sided
        // morphism conditions hold on the singleton domain.
        let dinf = fixtures::pg_dinf();
        let z3 = fixtures::z3_pregroup();
        let phi = PartialMap::new([("a", "0")]);
        assert!(is_morphism(&phi, dinf.structure(), z3.structure())
            .unwrap()
            .ok());
    }

    #[test]
    fn z3_identity_does_not_map_to_a() {
        let dinf = fixtures::pg_dinf();
        let z3 = fixtures::z3_pregroup();
        let phi = PartialMap::new([("0", "a")]);
        let check = is_morphism(&phi, z3.structure(), dinf.structure()).unwrap();
        assert!(!check.ok());
        // (0,0,0) is in M on the source but (a,a,a) is not on the target.
        assert!(check.violations.iter().any(|v| matches!(
            v,
            MorphismViolation::Relation { symbol, tuple, image }
                if symbol == "M"
                    && tuple == &vec!["0".to_string(); 3]
                    && image == &vec!["a".to_string(); 3]
        )));
    }

    #[test]
    fn no_isomorphism_from_involution_to_z3() {
        // a is a self-inverse non-identity with (a,a,1) in M; Z/3 has no
        // such element, so the singleton has no partner.
        let dinf = fixtures::pg_dinf();
        let z3 = fixtures::z3_pregroup();
        let found =
            find_isomorphism(&["a".into()], dinf.structure(), z3.structure()).unwrap();
        assert!(found.is_none());
    }

    #[test]
    fn singleton_isomorphism_is_lex_least() {
        let dinf = fixtures::pg_dinf();
        let st = dinf.structure();
        let found = find_isomorphism(&["a".into()], st, st).unwrap().unwrap();
        assert_eq!(found.get("a"), Some("a"));
    }

    #[test]
    fn full_carrier_isomorphism_is_identity() {
        let z3 = fixtures::z3_pregroup();
        let st = z3.structure();
        let carrier: Vec<String> = st.carrier().to_vec();
        let found = find_isomorphism(&carrier, st, st).unwrap().unwrap();
        for id in st.carrier() {
            assert_eq!(found.get(id), Some(id.as_str()));
        }
    }

    #[test]
    fn closure_in_pg_dinf_stabilizes_immediately() {
        let dinf = fixtures::pg_dinf();
        let chain =
            generated_closure(&["a".into(), "b".into()], dinf.structure(), 2).unwrap();
        assert_eq!(chain.level_ids(dinf.structure(), 0), vec!["a", "b"]);
        assert_eq!(chain.level_ids(dinf.structure(), 1), vec!["a", "b"]);
        assert_eq!(chain.stabilized_at, Some(1));
    }

    #[test]
    fn closure_in_z3_group_reaches_carrier() {
        let m = fixtures::z3_group();
        let chain = generated_closure(&["1".into()], &m, 3).unwrap();
        assert_eq!(chain.level_ids(&m, 0), vec!["1"]);
        assert_eq!(chain.level_ids(&m, 1), vec!["1", "2"]);
        assert_eq!(chain.level_ids(&m, 2), vec!["0", "1", "2"]);
        assert_eq!(chain.stabilized_at, Some(3));
    }

    #[test]
    fn empty_closure_stays_empty() {
        let m = fixtures::z3_group();
        let chain = generated_closure(&[], &m, 3).unwrap();
        assert!(chain.levels.iter().all(BTreeSet::is_empty));
        assert_eq!(chain.stabilized_at, Some(1));
    }

    #[test]
    fn f_equiv_with_itself() {
        let dinf = fixtures::pg_dinf();
        let st = dinf.structure();
        let outcome = bounded_f_equiv(st, st, 3);
        assert!(outcome.equivalent);
    }

    #[test]
    fn f_equiv_fails_against_z3_at_size_one() {
        let dinf = fixtures::pg_dinf();
        let z3 = fixtures::z3_pregroup();
        let outcome = bounded_f_equiv(dinf.structure(), z3.structure(), 1);
        assert!(!outcome.equivalent);
        let (side, witness) = outcome.witness.unwrap();
        assert!(matches!(side, Side::Left));
        assert_eq!(witness, vec!["a".to_string()]);
    }

    #[test]
    fn f_equiv_with_relabeled_copy() {
        let dinf = fixtures::pg_dinf();
        let copy = fixtures::pg_dinf_relabeled();
        let outcome = bounded_f_equiv(dinf.structure(), copy.structure(), 3);
        assert!(outcome.equivalent, "witness: {:?}", outcome.witness);
    }

    #[test]
    fn f_equiv_monotone_in_size() {
        let dinf = fixtures::pg_dinf();
        let z3 = fixtures::z3_pregroup();
        for size in 1..=3 {
            let outcome = bounded_f_equiv(dinf.structure(), z3.structure(), size);
            assert!(!outcome.equivalent, "failure must persist at size {size}");
        }
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(
            combinations(4, 2),
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert!(combinations(2, 3).is_empty());
    }

    #[test]
    fn structure_roundtrips_through_json() {
        let def = fixtures::pg_am_def();
        let m = FiniteStructure::from_def(&def).unwrap();
        let text = serde_json::to_string_pretty(&m.to_def()).unwrap();
        let back = FiniteStructure::from_json(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"signature":{"constants":[]},"carrier":["e"],"extra":1}"#;
        assert!(FiniteStructure::from_json(text).is_err());
    }
}
