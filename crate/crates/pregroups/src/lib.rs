//! Finite pregroups and their universal groups, with the first-order
//! machinery needed to certify existential equivalence of finite structures.
//!
//! The crate covers:
//!
//! - generic finite structures over a signature, subset isomorphism search
//!   and bounded finite-subset equivalence ([`fostruct`]);
//! - a small first-order language with a parser, evaluator, prenex
//!   conversion and the characteristic existential sentence of a finite
//!   subset ([`folang`]);
//! - equation systems, varieties and minimal equivalent subsystems
//!   ([`equations`]);
//! - pregroups with the eight defining axioms checked two independent ways,
//!   and designated-subset extensions ([`pregroup`]);
//! - words, reduction, interleaving, the decision procedure for word
//!   equivalence and arithmetic in the universal group ([`ugroup`]);
//! - free products, amalgams and HNN quotients built at the table level,
//!   each with a classical normal-form oracle ([`constructions`]);
//! - the transfer construction carrying finite subsets and word classes
//!   across a subset isomorphism, plus the application harness
//!   ([`equivalence`]).
//!
//! Heavy searches are data-parallel via rayon by default; build with
//! `--no-default-features` for the sequential fallback. Both modes produce
//! identical results.

pub mod constructions;
pub mod equations;
pub mod equivalence;
pub mod fixtures;
pub mod folang;
pub mod fostruct;
pub mod par;
pub mod pregroup;
pub mod ugroup;

pub use fostruct::{FiniteStructure, Signature, StructureDef};
pub use pregroup::{Pregroup, SPregroup};
pub use ugroup::{UElement, Word};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Structure(#[from] fostruct::StructureError),
    #[error(transparent)]
    Pregroup(#[from] pregroup::PregroupError),
    #[error("io error reading `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Loads a structure document from disk. A `"kind": "pregroup"` tag makes
/// the load fail unless the eight axioms hold.
pub fn load_structure(path: &str) -> Result<FiniteStructure, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_string(),
        source,
    })?;
    let def: StructureDef = serde_json::from_str(&text)
        .map_err(|e| LoadError::Structure(fostruct::StructureError::Parse(e)))?;
    let structure = FiniteStructure::from_def(&def)?;
    if def.kind.as_deref() == Some("pregroup") {
        let report = pregroup::check_axioms(&structure)?;
        if !report.all_hold() {
            return Err(LoadError::Pregroup(pregroup::PregroupError::AxiomsFailed(
                report,
            )));
        }
    }
    Ok(structure)
}

/// Loads a structure and interprets it as a pregroup, validating the axioms
/// regardless of the `kind` tag.
pub fn load_pregroup(path: &str) -> Result<Pregroup, LoadError> {
    let structure = load_structure(path)?;
    Ok(Pregroup::new(structure)?)
}
