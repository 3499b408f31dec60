//! Small structures used throughout the test suites and benches: the
//! additive group Z/3 in two presentations, the free product Z2 * Z2 (whose
//! universal group is the infinite dihedral group), the amalgam
//! Z4 *_{Z2} Z4, and the HNN quotient of Z2 with full association.

use std::collections::BTreeMap;

use crate::constructions::{
    amalgam_pregroup, free_product_pregroup, group_as_pregroup, hnn_pregroup, Amalgam,
    FiniteGroup, FreeProduct, Hnn, HnnSpec,
};
use crate::fostruct::{FiniteStructure, SignatureDef, StructureDef};
use crate::pregroup::{Pregroup, SPregroup};

/// Z/3 in the group language `(0, mul, inv)`: carrier `0,1,2`, `mul` is
/// addition mod 3 and the constant `0` names the additive identity.
pub fn z3_group_def() -> StructureDef {
    let names = ["0", "1", "2"];
    let mut mul = BTreeMap::new();
    let mut inv = BTreeMap::new();
    for i in 0..3usize {
        inv.insert(names[i].to_string(), names[(3 - i) % 3].to_string());
        for j in 0..3usize {
            mul.insert(
                format!("{},{}", names[i], names[j]),
                names[(i + j) % 3].to_string(),
            );
        }
    }
    StructureDef {
        signature: SignatureDef {
            constants: vec!["0".to_string()],
            functions: BTreeMap::from([("mul".to_string(), 2), ("inv".to_string(), 1)]),
            relations: BTreeMap::new(),
        },
        carrier: names.iter().map(|s| s.to_string()).collect(),
        constants: BTreeMap::from([("0".to_string(), "0".to_string())]),
        functions: BTreeMap::from([("mul".to_string(), mul), ("inv".to_string(), inv)]),
        relations: BTreeMap::new(),
        kind: None,
    }
}

pub fn z3_group() -> FiniteStructure {
    FiniteStructure::from_def(&z3_group_def()).expect("fixture is valid")
}

/// Z/3 regarded as a pregroup (D is everything); the pregroup constant `1`
/// names the additive identity, element `0`.
pub fn z3_pregroup() -> Pregroup {
    group_as_pregroup(&FiniteGroup::cyclic(&["0", "1", "2"])).expect("fixture is valid")
}

/// The free product Z2 * Z2 with carrier `1, a, b`; its universal group is
/// the infinite dihedral group.
pub fn pg_dinf_construction() -> FreeProduct {
    let a = FiniteGroup::cyclic(&["1", "a"]);
    let b = FiniteGroup::cyclic(&["1", "b"]);
    free_product_pregroup(&a, &b).expect("fixture is valid")
}

pub fn pg_dinf() -> Pregroup {
    pg_dinf_construction().pregroup().clone()
}

pub fn pg_dinf_def() -> StructureDef {
    pg_dinf().structure().to_def()
}

/// The same pregroup with `a` and `b` exchanged; the carrier order becomes
/// `1, b, a`, so deterministic searches see a genuinely different copy.
pub fn pg_dinf_relabeled() -> Pregroup {
    let map = BTreeMap::from([
        ("a".to_string(), "b".to_string()),
        ("b".to_string(), "a".to_string()),
    ]);
    pg_dinf().relabeled(&map).expect("relabeling is sound")
}

/// The subpregroup `{1, a}` of the free product, with inherited tables.
pub fn z2_inside_dinf() -> Pregroup {
    group_as_pregroup(&FiniteGroup::cyclic(&["1", "a"])).expect("fixture is valid")
}

/// Components of the amalgam Z4 *_{Z2} Z4: the core Z2 embeds as the square
/// of each generator.
pub fn pg_am_components() -> (
    FiniteGroup,
    FiniteGroup,
    FiniteGroup,
    BTreeMap<String, String>,
    BTreeMap<String, String>,
) {
    let core = FiniteGroup::cyclic(&["e", "w"]);
    let a = FiniteGroup::cyclic(&["1", "x", "c", "X"]);
    let b = FiniteGroup::cyclic(&["1", "y", "d", "Y"]);
    let embed_a = BTreeMap::from([
        ("e".to_string(), "1".to_string()),
        ("w".to_string(), "c".to_string()),
    ]);
    let embed_b = BTreeMap::from([
        ("e".to_string(), "1".to_string()),
        ("w".to_string(), "d".to_string()),
    ]);
    (core, a, b, embed_a, embed_b)
}

/// The same amalgam with the factor roles exchanged (the y-copy first); it
/// produces the carrier order `1, c, y, Y, x, X`.
pub fn pg_am_relabeled_components() -> (
    FiniteGroup,
    FiniteGroup,
    FiniteGroup,
    BTreeMap<String, String>,
    BTreeMap<String, String>,
) {
    let core = FiniteGroup::cyclic(&["e", "w"]);
    let a = FiniteGroup::cyclic(&["1", "y", "c", "Y"]);
    let b = FiniteGroup::cyclic(&["1", "x", "d", "X"]);
    let embed_a = BTreeMap::from([
        ("e".to_string(), "1".to_string()),
        ("w".to_string(), "c".to_string()),
    ]);
    let embed_b = BTreeMap::from([
        ("e".to_string(), "1".to_string()),
        ("w".to_string(), "d".to_string()),
    ]);
    (core, a, b, embed_a, embed_b)
}

/// The amalgam Z4 *_{Z2} Z4 with carrier `1, c, x, X, y, Y`, where
/// `x·x = y·y = c` and the core `{1, c}` carries designated constants.
pub fn pg_am_construction() -> Amalgam {
    let (core, a, b, embed_a, embed_b) = pg_am_components();
    amalgam_pregroup(&a, &b, &core, &embed_a, &embed_b).expect("fixture is valid")
}

pub fn pg_am() -> SPregroup {
    pg_am_construction().spregroup().clone()
}

pub fn pg_am_def() -> StructureDef {
    pg_am().structure().to_def()
}

/// Factor-exchanged copy of the amalgam, carrier `1, c, y, Y, x, X`.
pub fn pg_am_relabeled() -> SPregroup {
    let (core, a, b, embed_a, embed_b) = pg_am_relabeled_components();
    amalgam_pregroup(&a, &b, &core, &embed_a, &embed_b)
        .expect("fixture is valid")
        .spregroup()
        .clone()
}

/// HNN data over Z2 with both associated subgroups equal to the whole group
/// and the identity association; the universal group is Z2 x Z.
pub fn hnn_z2_spec() -> HnnSpec {
    HnnSpec {
        group: FiniteGroup::cyclic(&["1", "g"]),
        c1: vec!["1".into(), "g".into()],
        c2: vec!["1".into(), "g".into()],
        theta: BTreeMap::from([
            ("1".to_string(), "1".to_string()),
            ("g".to_string(), "g".to_string()),
        ]),
        stable: "t".into(),
    }
}

pub fn hnn_z2_construction() -> Hnn {
    hnn_pregroup(&hnn_z2_spec()).expect("fixture is valid")
}

pub fn hnn_z2() -> SPregroup {
    hnn_z2_construction().spregroup().clone()
}

/// Z2 * Z3, carrier `1, a, b, B`; used as a word-count fixture.
pub fn z2_z3_free() -> FreeProduct {
    let a = FiniteGroup::cyclic(&["1", "a"]);
    let b = FiniteGroup::cyclic(&["1", "b", "B"]);
    free_product_pregroup(&a, &b).expect("fixture is valid")
}
