//! Table-level constructions of pregroups from finite groups: a group as a
//! pregroup, free products, amalgamated products and HNN quotients, together
//! with classical normal-form oracles for each construction.
//!
//! The oracles compute canonical strings straight from the group tables
//! (syllable forms, coset representatives, pinch elimination) and never call
//! into the word or pregroup machinery, so they can sit on the other side of
//! equivalence tests.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::fostruct::{FiniteStructure, SignatureDef, StructureDef, StructureError};
use crate::pregroup::{
    attach_constants, designated_constant, Pregroup, PregroupError, SPregroup,
};

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("duplicate element id `{0}`")]
    DuplicateId(String),
    #[error("bad element id `{0}`")]
    BadId(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("multiplication table has no entry for ({0},{1})")]
    IncompleteTable(String, String),
    #[error("`{0}` is not a two-sided identity")]
    BadIdentity(String),
    #[error("associativity fails at ({0},{1},{2})")]
    NotAssociative(String, String, String),
    #[error("element `{0}` has no inverse")]
    NoInverse(String),
}

/// A finite group given by its full multiplication table. Validated on
/// construction: identity and inverse laws plus associativity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    carrier: Vec<String>,
    index: HashMap<String, usize>,
    identity: usize,
    mul: Vec<Vec<usize>>,
    inv: Vec<usize>,
}

impl FiniteGroup {
    pub fn new(
        carrier: Vec<String>,
        identity: &str,
        products: &BTreeMap<(String, String), String>,
    ) -> Result<FiniteGroup, GroupError> {
        let mut index = HashMap::new();
        for (i, id) in carrier.iter().enumerate() {
            if id.is_empty() || id.contains(',') || id.chars().any(char::is_whitespace) {
                return Err(GroupError::BadId(id.clone()));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(GroupError::DuplicateId(id.clone()));
            }
        }
        let n = carrier.len();
        let identity = *index
            .get(identity)
            .ok_or_else(|| GroupError::UnknownElement(identity.into()))?;
        let mut mul = vec![vec![usize::MAX; n]; n];
        for ((a, b), c) in products {
            let ia = *index.get(a).ok_or_else(|| GroupError::UnknownElement(a.clone()))?;
            let ib = *index.get(b).ok_or_else(|| GroupError::UnknownElement(b.clone()))?;
            let ic = *index.get(c).ok_or_else(|| GroupError::UnknownElement(c.clone()))?;
            mul[ia][ib] = ic;
        }
        for a in 0..n {
            for b in 0..n {
                if mul[a][b] == usize::MAX {
                    return Err(GroupError::IncompleteTable(
                        carrier[a].clone(),
                        carrier[b].clone(),
                    ));
                }
            }
        }
        for a in 0..n {
            if mul[a][identity] != a || mul[identity][a] != a {
                return Err(GroupError::BadIdentity(carrier[identity].clone()));
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if mul[mul[a][b]][c] != mul[a][mul[b][c]] {
                        return Err(GroupError::NotAssociative(
                            carrier[a].clone(),
                            carrier[b].clone(),
                            carrier[c].clone(),
                        ));
                    }
                }
            }
        }
        let mut inv = vec![usize::MAX; n];
        for a in 0..n {
            match (0..n).find(|&b| mul[a][b] == identity && mul[b][a] == identity) {
                Some(b) => inv[a] = b,
                None => return Err(GroupError::NoInverse(carrier[a].clone())),
            }
        }
        Ok(FiniteGroup {
            carrier,
            index,
            identity,
            mul,
            inv,
        })
    }

    /// Table keyed by comma-joined pairs, as in the CLI construction specs.
    pub fn from_comma_table(
        carrier: Vec<String>,
        identity: &str,
        table: &BTreeMap<String, String>,
    ) -> Result<FiniteGroup, GroupError> {
        let mut products = BTreeMap::new();
        for (key, value) in table {
            let Some((a, b)) = key.split_once(',') else {
                return Err(GroupError::BadId(key.clone()));
            };
            products.insert((a.trim().to_string(), b.trim().to_string()), value.clone());
        }
        FiniteGroup::new(carrier, identity, &products)
    }

    /// The cyclic group on the given names; `names[0]` is the identity and
    /// `names[i]` the i-th power of the generator.
    pub fn cyclic(names: &[&str]) -> FiniteGroup {
        let n = names.len();
        assert!(n > 0);
        let mut products = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                products.insert(
                    (names[i].to_string(), names[j].to_string()),
                    names[(i + j) % n].to_string(),
                );
            }
        }
        FiniteGroup::new(
            names.iter().map(|s| s.to_string()).collect(),
            names[0],
            &products,
        )
        .expect("cyclic table is a group")
    }

    pub fn trivial(name: &str) -> FiniteGroup {
        FiniteGroup::cyclic(&[name])
    }

    pub fn carrier(&self) -> &[String] {
        &self.carrier
    }

    pub fn size(&self) -> usize {
        self.carrier.len()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.carrier[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn identity_idx(&self) -> usize {
        self.identity
    }

    pub fn identity_id(&self) -> &str {
        &self.carrier[self.identity]
    }

    pub fn mul_idx(&self, a: usize, b: usize) -> usize {
        self.mul[a][b]
    }

    pub fn inv_idx(&self, a: usize) -> usize {
        self.inv[a]
    }

    pub fn mul_id(&self, a: &str, b: &str) -> Option<&str> {
        let a = self.index_of(a)?;
        let b = self.index_of(b)?;
        Some(self.id(self.mul[a][b]))
    }

    /// Is the id set a subgroup (identity, closure, inverses)?
    pub fn is_subgroup(&self, ids: &BTreeSet<String>) -> bool {
        let Some(indices) = ids
            .iter()
            .map(|id| self.index_of(id))
            .collect::<Option<BTreeSet<usize>>>()
        else {
            return false;
        };
        if !indices.contains(&self.identity) {
            return false;
        }
        for &a in &indices {
            if !indices.contains(&self.inv[a]) {
                return false;
            }
            for &b in &indices {
                if !indices.contains(&self.mul[a][b]) {
                    return false;
                }
            }
        }
        true
    }

    pub fn relabeled(&self, map: &BTreeMap<String, String>) -> Result<FiniteGroup, GroupError> {
        let rename =
            |id: &String| -> String { map.get(id).cloned().unwrap_or_else(|| id.clone()) };
        let carrier: Vec<String> = self.carrier.iter().map(rename).collect();
        let mut products = BTreeMap::new();
        for a in 0..self.size() {
            for b in 0..self.size() {
                products.insert(
                    (carrier[a].clone(), carrier[b].clone()),
                    carrier[self.mul[a][b]].clone(),
                );
            }
        }
        let identity = carrier[self.identity].clone();
        FiniteGroup::new(carrier, &identity, &products)
    }

    /// The group as a structure in the group language `(1, mul, inv)`.
    pub fn as_structure(&self) -> FiniteStructure {
        self.as_s_structure(&[]).expect("no families to fail")
    }

    /// The group as an S-group structure: group language plus designated
    /// constants `d_<family>_<elem>` and the `delta` membership predicate.
    pub fn as_s_structure(
        &self,
        families: &[(String, Vec<String>)],
    ) -> Result<FiniteStructure, ConstructionError> {
        let mut constants = vec!["1".to_string()];
        let mut const_interp: BTreeMap<String, String> =
            BTreeMap::from([("1".to_string(), self.identity_id().to_string())]);
        let mut delta: BTreeSet<String> = BTreeSet::new();
        for (name, members) in families {
            for elem in members {
                if self.index_of(elem).is_none() {
                    return Err(ConstructionError::UnknownElement(elem.clone()));
                }
                let constant = designated_constant(name, elem);
                constants.push(constant.clone());
                const_interp.insert(constant, elem.clone());
                delta.insert(elem.clone());
            }
        }
        let mut functions = BTreeMap::new();
        let mut mul_table = BTreeMap::new();
        let mut inv_table = BTreeMap::new();
        for a in 0..self.size() {
            inv_table.insert(self.carrier[a].clone(), self.carrier[self.inv[a]].clone());
            for b in 0..self.size() {
                mul_table.insert(
                    format!("{},{}", self.carrier[a], self.carrier[b]),
                    self.carrier[self.mul[a][b]].clone(),
                );
            }
        }
        functions.insert("mul".to_string(), mul_table);
        functions.insert("inv".to_string(), inv_table);
        let mut sig_functions = BTreeMap::new();
        sig_functions.insert("mul".to_string(), 2);
        sig_functions.insert("inv".to_string(), 1);
        let mut sig_relations = BTreeMap::new();
        let mut relations = BTreeMap::new();
        if !families.is_empty() {
            sig_relations.insert("delta".to_string(), 1);
            relations.insert(
                "delta".to_string(),
                delta.iter().map(|e| vec![e.clone()]).collect(),
            );
        }
        let def = StructureDef {
            signature: SignatureDef {
                constants,
                functions: sig_functions,
                relations: sig_relations,
            },
            carrier: self.carrier.clone(),
            constants: const_interp,
            functions,
            relations,
            kind: None,
        };
        Ok(FiniteStructure::from_def(&def)?)
    }
}

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Pregroup(#[from] PregroupError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("factors share the non-identity element `{0}`")]
    FactorsNotDisjoint(String),
    #[error("the amalgamated subgroup is trivial; build a free product instead")]
    TrivialCore,
    #[error("embedding is not an injective homomorphism: {0}")]
    BadEmbedding(String),
    #[error("id `{0}` would collide across factors")]
    IdCollision(String),
    #[error("theta is not an isomorphism from C1 to C2: {0}")]
    BadTheta(String),
    #[error("`{0}` is not a subgroup")]
    NotASubgroup(String),
    #[error("stable letter `{0}` is unusable: {1}")]
    BadStableLetter(String, String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("word letter `{0}` is not in the construction's carrier")]
    ForeignLetter(String),
}

fn pregroup_def(
    carrier: Vec<String>,
    identity: &str,
    inv: &BTreeMap<String, String>,
    d: &BTreeSet<(String, String)>,
    m: &BTreeSet<(String, String, String)>,
) -> StructureDef {
    StructureDef {
        signature: SignatureDef {
            constants: vec!["1".to_string()],
            functions: BTreeMap::from([("inv".to_string(), 1)]),
            relations: BTreeMap::from([("D".to_string(), 2), ("M".to_string(), 3)]),
        },
        carrier,
        constants: BTreeMap::from([("1".to_string(), identity.to_string())]),
        functions: BTreeMap::from([(
            "inv".to_string(),
            inv.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        )]),
        relations: BTreeMap::from([
            (
                "D".to_string(),
                d.iter().map(|(a, b)| vec![a.clone(), b.clone()]).collect(),
            ),
            (
                "M".to_string(),
                m.iter()
                    .map(|(a, b, c)| vec![a.clone(), b.clone(), c.clone()])
                    .collect(),
            ),
        ]),
        kind: Some("pregroup".to_string()),
    }
}

/// A group regarded as a pregroup: `D` is everything and `M` is the graph of
/// the multiplication table.
pub fn group_as_pregroup(g: &FiniteGroup) -> Result<Pregroup, ConstructionError> {
    let mut inv = BTreeMap::new();
    let mut d = BTreeSet::new();
    let mut m = BTreeSet::new();
    for a in 0..g.size() {
        inv.insert(g.id(a).to_string(), g.id(g.inv_idx(a)).to_string());
        for b in 0..g.size() {
            d.insert((g.id(a).to_string(), g.id(b).to_string()));
            m.insert((
                g.id(a).to_string(),
                g.id(b).to_string(),
                g.id(g.mul_idx(a, b)).to_string(),
            ));
        }
    }
    let def = pregroup_def(g.carrier().to_vec(), g.identity_id(), &inv, &d, &m);
    Ok(Pregroup::from_def(&def)?)
}

/// A free product pregroup together with its factor tables (relabeled into
/// the merged id space), kept for the syllable-form oracle.
#[derive(Debug, Clone)]
pub struct FreeProduct {
    pregroup: Pregroup,
    factor_a: FiniteGroup,
    factor_b: FiniteGroup,
}

/// Carrier = A ∪ B with the identities merged (keeping A's id); `D` is
/// `(A×A) ∪ (B×B)` and `M` the union of both multiplication graphs.
pub fn free_product_pregroup(
    a: &FiniteGroup,
    b: &FiniteGroup,
) -> Result<FreeProduct, ConstructionError> {
    for id in a.carrier() {
        if a.index_of(id) != Some(a.identity_idx())
            && b.index_of(id).is_some_and(|i| i != b.identity_idx())
        {
            return Err(ConstructionError::FactorsNotDisjoint(id.clone()));
        }
    }
    let identity = a.identity_id().to_string();
    let factor_b = b.relabeled(&BTreeMap::from([(
        b.identity_id().to_string(),
        identity.clone(),
    )]))?;
    if let Some(bad) = factor_b
        .carrier()
        .iter()
        .find(|id| *id != &identity && a.index_of(id).is_some())
    {
        return Err(ConstructionError::IdCollision(bad.clone()));
    }
    let mut carrier = vec![identity.clone()];
    carrier.extend(
        a.carrier()
            .iter()
            .filter(|id| *id != &identity)
            .cloned(),
    );
    carrier.extend(
        factor_b
            .carrier()
            .iter()
            .filter(|id| *id != &identity)
            .cloned(),
    );
    let mut inv = BTreeMap::new();
    let mut d = BTreeSet::new();
    let mut m = BTreeSet::new();
    for g in [a, &factor_b] {
        for i in 0..g.size() {
            inv.insert(g.id(i).to_string(), g.id(g.inv_idx(i)).to_string());
            for j in 0..g.size() {
                d.insert((g.id(i).to_string(), g.id(j).to_string()));
                m.insert((
                    g.id(i).to_string(),
                    g.id(j).to_string(),
                    g.id(g.mul_idx(i, j)).to_string(),
                ));
            }
        }
    }
    let def = pregroup_def(carrier, &identity, &inv, &d, &m);
    Ok(FreeProduct {
        pregroup: Pregroup::from_def(&def)?,
        factor_a: a.clone(),
        factor_b,
    })
}

impl FreeProduct {
    pub fn pregroup(&self) -> &Pregroup {
        &self.pregroup
    }

    pub fn factors(&self) -> (&FiniteGroup, &FiniteGroup) {
        (&self.factor_a, &self.factor_b)
    }

    /// Alternating syllable form: adjacent same-factor letters are merged
    /// and identity syllables drop out. Two words name the same element of
    /// the free product iff their strings are equal.
    pub fn oracle_normal_form(&self, word: &[&str]) -> Result<String, ConstructionError> {
        let identity = self.factor_a.identity_id();
        // (which factor, index in that factor)
        let mut syllables: Vec<(u8, usize)> = Vec::new();
        for letter in word {
            if *letter == identity {
                continue;
            }
            let (factor, idx) = if let Some(i) = self.factor_a.index_of(letter) {
                (0u8, i)
            } else if let Some(i) = self.factor_b.index_of(letter) {
                (1u8, i)
            } else {
                return Err(ConstructionError::ForeignLetter((*letter).to_string()));
            };
            syllables.push((factor, idx));
            loop {
                let n = syllables.len();
                if n >= 1 {
                    let (f, i) = syllables[n - 1];
                    let g = if f == 0 { &self.factor_a } else { &self.factor_b };
                    if i == g.identity_idx() {
                        syllables.pop();
                        continue;
                    }
                }
                if n >= 2 && syllables[n - 2].0 == syllables[n - 1].0 {
                    let (f, i) = syllables[n - 2];
                    let j = syllables[n - 1].1;
                    let g = if f == 0 { &self.factor_a } else { &self.factor_b };
                    let prod = g.mul_idx(i, j);
                    syllables.truncate(n - 2);
                    syllables.push((f, prod));
                    continue;
                }
                break;
            }
        }
        if syllables.is_empty() {
            return Ok(identity.to_string());
        }
        Ok(syllables
            .iter()
            .map(|(f, i)| {
                if *f == 0 {
                    self.factor_a.id(*i)
                } else {
                    self.factor_b.id(*i)
                }
            })
            .collect::<Vec<_>>()
            .join("*"))
    }
}

/// An amalgamated product pregroup with its factor tables and identified
/// core, kept for the coset-representative oracle.
#[derive(Debug, Clone)]
pub struct Amalgam {
    spregroup: SPregroup,
    factor_a: FiniteGroup,
    factor_b: FiniteGroup,
    core_ids: BTreeSet<String>,
}

/// Carrier = A ⊔ B with `embed_a(w)` identified with `embed_b(w)` for every
/// `w` of the core; `D = (A×A) ∪ (B×B)`; the core becomes a designated
/// constant family `C` with `delta` over its image.
pub fn amalgam_pregroup(
    a: &FiniteGroup,
    b: &FiniteGroup,
    core: &FiniteGroup,
    embed_a: &BTreeMap<String, String>,
    embed_b: &BTreeMap<String, String>,
) -> Result<Amalgam, ConstructionError> {
    if core.size() <= 1 {
        return Err(ConstructionError::TrivialCore);
    }
    let check_embedding = |g: &FiniteGroup,
                           embed: &BTreeMap<String, String>|
     -> Result<(), ConstructionError> {
        let mut images = BTreeSet::new();
        for w in core.carrier() {
            let img = embed
                .get(w)
                .ok_or_else(|| ConstructionError::BadEmbedding(format!("missing image of `{w}`")))?;
            if g.index_of(img).is_none() {
                return Err(ConstructionError::BadEmbedding(format!(
                    "image `{img}` is not in the factor"
                )));
            }
            if !images.insert(img.clone()) {
                return Err(ConstructionError::BadEmbedding(format!(
                    "image `{img}` repeats; embedding must be injective"
                )));
            }
        }
        if embed[core.identity_id()] != g.identity_id() {
            return Err(ConstructionError::BadEmbedding(
                "identity must map to identity".into(),
            ));
        }
        for u in core.carrier() {
            for v in core.carrier() {
                let uv = core.mul_id(u, v).unwrap();
                let lhs = embed[uv].clone();
                let rhs = g.mul_id(&embed[u], &embed[v]).unwrap().to_string();
                if lhs != rhs {
                    return Err(ConstructionError::BadEmbedding(format!(
                        "not a homomorphism at ({u},{v})"
                    )));
                }
            }
        }
        Ok(())
    };
    check_embedding(a, embed_a)?;
    check_embedding(b, embed_b)?;

    // Relabel B so that core images coincide with their A-side ids.
    let mut rename = BTreeMap::new();
    for w in core.carrier() {
        rename.insert(embed_b[w].clone(), embed_a[w].clone());
    }
    let factor_b = b.relabeled(&rename)?;
    let core_ids: BTreeSet<String> = core.carrier().iter().map(|w| embed_a[w].clone()).collect();
    for id in factor_b.carrier() {
        if !core_ids.contains(id) && a.index_of(id).is_some() {
            return Err(ConstructionError::IdCollision(id.clone()));
        }
    }

    let identity = a.identity_id().to_string();
    let mut carrier = vec![identity.clone()];
    for w in core.carrier() {
        let id = embed_a[w].clone();
        if id != identity {
            carrier.push(id);
        }
    }
    for id in a.carrier() {
        if !carrier.contains(id) {
            carrier.push(id.clone());
        }
    }
    for id in factor_b.carrier() {
        if !carrier.contains(id) {
            carrier.push(id.clone());
        }
    }

    let mut inv = BTreeMap::new();
    let mut d = BTreeSet::new();
    let mut m = BTreeSet::new();
    for g in [a, &factor_b] {
        for i in 0..g.size() {
            inv.insert(g.id(i).to_string(), g.id(g.inv_idx(i)).to_string());
            for j in 0..g.size() {
                d.insert((g.id(i).to_string(), g.id(j).to_string()));
                m.insert((
                    g.id(i).to_string(),
                    g.id(j).to_string(),
                    g.id(g.mul_idx(i, j)).to_string(),
                ));
            }
        }
    }
    let def = pregroup_def(carrier, &identity, &inv, &d, &m);
    let pregroup = Pregroup::from_def(&def)?;
    let spregroup = attach_constants(
        &pregroup,
        &[("C".to_string(), core_ids.iter().cloned().collect())],
    )?;
    Ok(Amalgam {
        spregroup,
        factor_a: a.clone(),
        factor_b,
        core_ids,
    })
}

impl Amalgam {
    pub fn spregroup(&self) -> &SPregroup {
        &self.spregroup
    }

    pub fn pregroup(&self) -> &Pregroup {
        self.spregroup.pregroup()
    }

    pub fn factors(&self) -> (&FiniteGroup, &FiniteGroup) {
        (&self.factor_a, &self.factor_b)
    }

    pub fn core_ids(&self) -> &BTreeSet<String> {
        &self.core_ids
    }

    fn factor_of(&self, id: &str) -> Option<(bool, bool)> {
        (self.factor_a.index_of(id).is_some() || self.factor_b.index_of(id).is_some()).then(
            || {
                (
                    self.factor_a.index_of(id).is_some(),
                    self.factor_b.index_of(id).is_some(),
                )
            },
        )
    }

    fn share_factor(&self, x: &str, y: &str) -> bool {
        let (xa, xb) = self.factor_of(x).unwrap();
        let (ya, yb) = self.factor_of(y).unwrap();
        (xa && ya) || (xb && yb)
    }

    fn mul(&self, x: &str, y: &str) -> String {
        if self.factor_a.index_of(x).is_some() && self.factor_a.index_of(y).is_some() {
            self.factor_a.mul_id(x, y).unwrap().to_string()
        } else {
            self.factor_b.mul_id(x, y).unwrap().to_string()
        }
    }

    fn inv(&self, x: &str) -> String {
        if let Some(i) = self.factor_a.index_of(x) {
            self.factor_a.id(self.factor_a.inv_idx(i)).to_string()
        } else {
            let i = self.factor_b.index_of(x).unwrap();
            self.factor_b.id(self.factor_b.inv_idx(i)).to_string()
        }
    }

    /// Coset-representative syllable form `c | r1*r2*...`: a leading core
    /// element followed by alternating representatives of right cosets of
    /// the core (lex-least by id). Equal strings iff equal elements of the
    /// amalgam.
    pub fn oracle_normal_form(&self, word: &[&str]) -> Result<String, ConstructionError> {
        let identity = self.factor_a.identity_id().to_string();
        let mut syllables: Vec<String> = Vec::new();
        for letter in word {
            if self.factor_of(letter).is_none() {
                return Err(ConstructionError::ForeignLetter((*letter).to_string()));
            }
            syllables.push((*letter).to_string());
            loop {
                let n = syllables.len();
                if n >= 1 && syllables[n - 1] == identity {
                    syllables.pop();
                    continue;
                }
                if n >= 2 && self.share_factor(&syllables[n - 2], &syllables[n - 1]) {
                    let merged = self.mul(&syllables[n - 2], &syllables[n - 1]);
                    syllables.truncate(n - 2);
                    syllables.push(merged);
                    continue;
                }
                break;
            }
        }
        if syllables.is_empty() {
            return Ok(format!("{identity}|"));
        }
        if syllables.len() == 1 && self.core_ids.contains(&syllables[0]) {
            return Ok(format!("{}|", syllables[0]));
        }
        // Right-to-left coset normalization, pushing core parts left.
        let mut leading = identity.clone();
        for i in (0..syllables.len()).rev() {
            let s = &syllables[i];
            // the coset C·s inside the factor containing s
            let rep = self
                .core_ids
                .iter()
                .map(|c| self.mul(c, s))
                .min()
                .expect("core is non-empty");
            let c_part = self.mul(s, &self.inv(&rep));
            debug_assert!(self.core_ids.contains(&c_part));
            syllables[i] = rep;
            if i > 0 {
                syllables[i - 1] = self.mul(&syllables[i - 1], &c_part);
            } else {
                leading = c_part;
            }
        }
        Ok(format!("{leading}|{}", syllables.join("*")))
    }
}

/// Data of an HNN quotient: base group, associated subgroups, the
/// isomorphism between them, and the stable letter name.
#[derive(Debug, Clone)]
pub struct HnnSpec {
    pub group: FiniteGroup,
    pub c1: Vec<String>,
    pub c2: Vec<String>,
    pub theta: BTreeMap<String, String>,
    pub stable: String,
}

/// One element of the raw set `G ∪ t^-1·G ∪ G·t ∪ t^-1·G·t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RawElem {
    pub t_inv_left: bool,
    pub g: usize,
    pub t_right: bool,
}

fn raw_name(spec: &HnnSpec, raw: RawElem, tinv: &str) -> String {
    let mut parts = Vec::new();
    if raw.t_inv_left {
        parts.push(tinv.to_string());
    }
    parts.push(spec.group.id(raw.g).to_string());
    if raw.t_right {
        parts.push(spec.stable.clone());
    }
    parts.join("*")
}

/// An HNN pregroup with its quotient bookkeeping: class ids, canonical raw
/// representatives, and the sidecar mapping raw names to carrier ids.
#[derive(Debug, Clone)]
pub struct Hnn {
    spregroup: SPregroup,
    spec: HnnSpec,
    tinv: String,
    /// canonical raw representative of every carrier class, by carrier order
    class_reps: Vec<RawElem>,
    class_of: HashMap<RawElem, usize>,
    c1_idx: BTreeSet<usize>,
    c2_idx: BTreeSet<usize>,
    theta_idx: HashMap<usize, usize>,
    theta_inv_idx: HashMap<usize, usize>,
}

/// Builds the quotient of the four-block raw set by `t^-1·h·t ~ theta(h)`
/// for `h` in `C1`, with `D` joining blocks whose inner t-exponents match.
/// The two associated subgroups become designated constant families.
pub fn hnn_pregroup(spec: &HnnSpec) -> Result<Hnn, ConstructionError> {
    let g = &spec.group;
    let c1: BTreeSet<String> = spec.c1.iter().cloned().collect();
    let c2: BTreeSet<String> = spec.c2.iter().cloned().collect();
    if !g.is_subgroup(&c1) {
        return Err(ConstructionError::NotASubgroup("C1".into()));
    }
    if !g.is_subgroup(&c2) {
        return Err(ConstructionError::NotASubgroup("C2".into()));
    }
    let c1_idx: BTreeSet<usize> = c1.iter().map(|id| g.index_of(id).unwrap()).collect();
    let c2_idx: BTreeSet<usize> = c2.iter().map(|id| g.index_of(id).unwrap()).collect();
    // theta: C1 -> C2 bijective homomorphism
    let mut theta_idx: HashMap<usize, usize> = HashMap::new();
    let mut theta_inv_idx: HashMap<usize, usize> = HashMap::new();
    for h in &c1 {
        let img = spec
            .theta
            .get(h)
            .ok_or_else(|| ConstructionError::BadTheta(format!("missing image of `{h}`")))?;
        if !c2.contains(img) {
            return Err(ConstructionError::BadTheta(format!(
                "image `{img}` is outside C2"
            )));
        }
        let hi = g.index_of(h).unwrap();
        let ii = g.index_of(img).unwrap();
        theta_idx.insert(hi, ii);
        if theta_inv_idx.insert(ii, hi).is_some() {
            return Err(ConstructionError::BadTheta(format!(
                "image `{img}` repeats"
            )));
        }
    }
    if theta_idx.len() != c2.len() {
        return Err(ConstructionError::BadTheta("not surjective onto C2".into()));
    }
    for &u in &c1_idx {
        for &v in &c1_idx {
            if theta_idx[&g.mul_idx(u, v)] != g.mul_idx(theta_idx[&u], theta_idx[&v]) {
                return Err(ConstructionError::BadTheta(format!(
                    "not a homomorphism at ({},{})",
                    g.id(u),
                    g.id(v)
                )));
            }
        }
    }
    let tinv = spec.stable.to_uppercase();
    if tinv == spec.stable {
        return Err(ConstructionError::BadStableLetter(
            spec.stable.clone(),
            "needs a distinct uppercase form for the inverse block".into(),
        ));
    }
    if g.index_of(&spec.stable).is_some() || g.index_of(&tinv).is_some() {
        return Err(ConstructionError::BadStableLetter(
            spec.stable.clone(),
            "collides with a group element".into(),
        ));
    }

    // Quotient classes, in block order with G first.
    let canonical_raw = |raw: RawElem| -> RawElem {
        if raw.t_inv_left && raw.t_right && c1_idx.contains(&raw.g) {
            RawElem {
                t_inv_left: false,
                g: theta_idx[&raw.g],
                t_right: false,
            }
        } else {
            raw
        }
    };
    let mut class_reps: Vec<RawElem> = Vec::new();
    let mut class_of: HashMap<RawElem, usize> = HashMap::new();
    for (t_inv_left, t_right) in [(false, false), (true, false), (false, true), (true, true)] {
        for gi in 0..g.size() {
            let raw = RawElem {
                t_inv_left,
                g: gi,
                t_right,
            };
            let rep = canonical_raw(raw);
            if let Some(&cls) = class_of.get(&rep) {
                class_of.insert(raw, cls);
            } else {
                let cls = class_reps.len();
                class_reps.push(rep);
                class_of.insert(rep, cls);
                class_of.insert(raw, cls);
            }
        }
    }

    let class_name = |raw: RawElem| -> String {
        let mut name = String::new();
        if raw.t_inv_left {
            name.push_str(&tinv);
        }
        if raw.g != g.identity_idx() || (!raw.t_inv_left && !raw.t_right) {
            name.push_str(g.id(raw.g));
        }
        if raw.t_right {
            name.push_str(&spec.stable);
        }
        name
    };
    let names: Vec<String> = class_reps.iter().map(|r| class_name(*r)).collect();
    {
        let mut seen = BTreeSet::new();
        for n in &names {
            if !seen.insert(n.clone()) {
                return Err(ConstructionError::IdCollision(n.clone()));
            }
        }
    }

    // Members of each class (one or two raws).
    let mut members: Vec<Vec<RawElem>> = vec![Vec::new(); class_reps.len()];
    for (&raw, &cls) in &class_of {
        if !members[cls].contains(&raw) {
            members[cls].push(raw);
        }
    }

    // Products transported through the quotient: a pair multiplies when the
    // inner t-exponents of some representatives match.
    let mut m: BTreeSet<(String, String, String)> = BTreeSet::new();
    let mut d: BTreeSet<(String, String)> = BTreeSet::new();
    let mut product_check: HashMap<(usize, usize), usize> = HashMap::new();
    for p in 0..class_reps.len() {
        for q in 0..class_reps.len() {
            for &rp in &members[p] {
                for &rq in &members[q] {
                    if rp.t_right != rq.t_inv_left {
                        continue;
                    }
                    let product = canonical_raw(RawElem {
                        t_inv_left: rp.t_inv_left,
                        g: g.mul_idx(rp.g, rq.g),
                        t_right: rq.t_right,
                    });
                    let cls = class_of[&product];
                    if let Some(&prev) = product_check.get(&(p, q)) {
                        assert_eq!(prev, cls, "HNN product not well-defined");
                    } else {
                        product_check.insert((p, q), cls);
                    }
                    d.insert((names[p].clone(), names[q].clone()));
                    m.insert((names[p].clone(), names[q].clone(), names[cls].clone()));
                }
            }
        }
    }

    let mut inv = BTreeMap::new();
    for (cls, rep) in class_reps.iter().enumerate() {
        let inverse = canonical_raw(RawElem {
            t_inv_left: rep.t_right,
            g: g.inv_idx(rep.g),
            t_right: rep.t_inv_left,
        });
        inv.insert(names[cls].clone(), names[class_of[&inverse]].clone());
    }

    let identity_name = names[class_of[&RawElem {
        t_inv_left: false,
        g: g.identity_idx(),
        t_right: false,
    }]]
        .clone();
    let def = pregroup_def(names.clone(), &identity_name, &inv, &d, &m);
    let pregroup = Pregroup::from_def(&def)?;

    // C1 and C2 must embed in the quotient; their classes are the G-block
    // classes of their elements and distinctness is checked here.
    let family = |name: &str, ids: &BTreeSet<String>| -> (String, Vec<String>) {
        (
            name.to_string(),
            ids.iter()
                .map(|id| {
                    names[class_of[&RawElem {
                        t_inv_left: false,
                        g: g.index_of(id).unwrap(),
                        t_right: false,
                    }]]
                        .clone()
                })
                .collect(),
        )
    };
    let (f1_name, f1) = family("C1", &c1);
    let (f2_name, f2) = family("C2", &c2);
    for f in [&f1, &f2] {
        let distinct: BTreeSet<&String> = f.iter().collect();
        assert_eq!(distinct.len(), f.len(), "associated subgroup must embed");
    }
    let spregroup = attach_constants(&pregroup, &[(f1_name, f1), (f2_name, f2)])?;

    Ok(Hnn {
        spregroup,
        spec: spec.clone(),
        tinv,
        class_reps,
        class_of,
        c1_idx,
        c2_idx,
        theta_idx,
        theta_inv_idx,
    })
}

impl Hnn {
    pub fn spregroup(&self) -> &SPregroup {
        &self.spregroup
    }

    pub fn pregroup(&self) -> &Pregroup {
        self.spregroup.pregroup()
    }

    pub fn spec(&self) -> &HnnSpec {
        &self.spec
    }

    pub fn stable_letters(&self) -> (&str, &str) {
        (&self.spec.stable, &self.tinv)
    }

    /// Every raw element with the carrier id of its quotient class, sorted.
    pub fn raw_classes(&self) -> Vec<(RawElem, String)> {
        let st = self.spregroup.structure();
        let mut out: Vec<(RawElem, String)> = self
            .class_of
            .iter()
            .map(|(raw, cls)| (*raw, st.elem_id(*cls).to_string()))
            .collect();
        out.sort();
        out
    }

    pub fn class_id_of_raw(&self, raw: RawElem) -> Option<&str> {
        self.class_of
            .get(&raw)
            .map(|cls| self.spregroup.structure().elem_id(*cls))
    }

    /// Sidecar map: raw names of `G ∪ t^-1·G ∪ G·t ∪ t^-1·G·t` to the
    /// carrier id of their quotient class.
    pub fn raw_to_carrier(&self) -> BTreeMap<String, String> {
        let st = self.spregroup.structure();
        self.class_of
            .iter()
            .map(|(raw, cls)| {
                (
                    raw_name(&self.spec, *raw, &self.tinv),
                    st.elem_id(*cls).to_string(),
                )
            })
            .collect()
    }

    /// Britton pinch-free form with right-coset representatives (lex-least
    /// by id): `g0*t*r1*...` with no `t^-1 c t` (`c` in `C1`) and no
    /// `t c' t^-1` (`c'` in `C2`). Equal strings iff equal elements of the
    /// HNN extension.
    pub fn oracle_normal_form(&self, word: &[&str]) -> Result<String, ConstructionError> {
        let g = &self.spec.group;
        let st = self.spregroup.structure();
        // head group element, then alternating (exponent, group element)
        let mut head = g.identity_idx();
        let mut segments: Vec<(i8, usize)> = Vec::new();
        let absorb = |head: &mut usize, segments: &mut Vec<(i8, usize)>, gi: usize| {
            match segments.last_mut() {
                Some((_, last)) => *last = g.mul_idx(*last, gi),
                None => *head = g.mul_idx(*head, gi),
            }
        };
        for letter in word {
            let cls = st
                .elem_index(letter)
                .ok_or_else(|| ConstructionError::ForeignLetter((*letter).to_string()))?;
            let raw = self.class_reps[cls];
            if raw.t_inv_left {
                segments.push((-1, g.identity_idx()));
            }
            absorb(&mut head, &mut segments, raw.g);
            if raw.t_right {
                segments.push((1, g.identity_idx()));
            }
        }
        // Britton reduction: remove pinches until none are left.
        loop {
            let mut pinched = None;
            for i in 0..segments.len().saturating_sub(1) {
                let (e1, g1) = segments[i];
                let (e2, _) = segments[i + 1];
                if e1 == -1 && e2 == 1 && self.c1_idx.contains(&g1) {
                    pinched = Some((i, self.theta_idx[&g1]));
                    break;
                }
                if e1 == 1 && e2 == -1 && self.c2_idx.contains(&g1) {
                    pinched = Some((i, self.theta_inv_idx[&g1]));
                    break;
                }
            }
            let Some((i, carried)) = pinched else { break };
            let (_, tail) = segments[i + 1];
            let merged = g.mul_idx(carried, tail);
            segments.drain(i..=i + 1);
            match i.checked_sub(1) {
                Some(j) => segments[j].1 = g.mul_idx(segments[j].1, merged),
                None => head = g.mul_idx(head, merged),
            }
        }
        // Right-to-left coset normalization, pushing subgroup parts left
        // through the adjacent stable letter.
        for i in (0..segments.len()).rev() {
            let (eps, gi) = segments[i];
            let sub = if eps == 1 { &self.c2_idx } else { &self.c1_idx };
            let rep = sub
                .iter()
                .map(|&c| g.mul_idx(c, gi))
                .min_by(|a, b| g.id(*a).cmp(g.id(*b)))
                .expect("subgroup is non-empty");
            let c_part = g.mul_idx(gi, g.inv_idx(rep));
            debug_assert!(sub.contains(&c_part));
            segments[i].1 = rep;
            let pushed = if eps == 1 {
                self.theta_inv_idx[&c_part]
            } else {
                self.theta_idx[&c_part]
            };
            match i.checked_sub(1) {
                Some(j) => segments[j].1 = g.mul_idx(segments[j].1, pushed),
                None => head = g.mul_idx(head, pushed),
            }
        }
        let mut parts = vec![g.id(head).to_string()];
        for (eps, gi) in &segments {
            parts.push(if *eps == 1 {
                self.spec.stable.clone()
            } else {
                self.tinv.clone()
            });
            parts.push(g.id(*gi).to_string());
        }
        Ok(parts.join("*"))
    }
}

/// A construction together with its oracle, for dispatch by kind.
#[derive(Debug, Clone)]
pub enum Construction {
    Free(FreeProduct),
    Amalgam(Amalgam),
    Hnn(Hnn),
}

impl Construction {
    pub fn pregroup(&self) -> &Pregroup {
        match self {
            Construction::Free(f) => f.pregroup(),
            Construction::Amalgam(a) => a.pregroup(),
            Construction::Hnn(h) => h.pregroup(),
        }
    }

    pub fn spregroup(&self) -> Option<&SPregroup> {
        match self {
            Construction::Free(_) => None,
            Construction::Amalgam(a) => Some(a.spregroup()),
            Construction::Hnn(h) => Some(h.spregroup()),
        }
    }

    /// Canonical string for the group element named by `word`, computed by
    /// the classical normal-form algorithm of the construction.
    pub fn oracle_normal_form(&self, word: &[&str]) -> Result<String, ConstructionError> {
        match self {
            Construction::Free(f) => f.oracle_normal_form(word),
            Construction::Amalgam(a) => a.oracle_normal_form(word),
            Construction::Hnn(h) => h.oracle_normal_form(word),
        }
    }

    /// The structure file this construction emits, tagged as a pregroup.
    pub fn structure_def(&self) -> StructureDef {
        let mut def = match self {
            Construction::Free(f) => f.pregroup().structure().to_def(),
            Construction::Amalgam(a) => a.spregroup().structure().to_def(),
            Construction::Hnn(h) => h.spregroup().structure().to_def(),
        };
        def.kind = Some("pregroup".to_string());
        def
    }

    /// Raw-name sidecar for quotient constructions (amalgam, HNN).
    pub fn sidecar(&self) -> Option<BTreeMap<String, String>> {
        match self {
            Construction::Free(_) => None,
            Construction::Amalgam(a) => {
                let (fa, fb) = a.factors();
                let mut map = BTreeMap::new();
                for id in fa.carrier() {
                    map.insert(format!("A:{id}"), id.clone());
                }
                for id in fb.carrier() {
                    map.insert(format!("B:{id}"), id.clone());
                }
                Some(map)
            }
            Construction::Hnn(h) => Some(h.raw_to_carrier()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::pregroup::check_axioms;
    use crate::ugroup::{equivalent, Word};

    #[test]
    fn groups_as_pregroups_pass_axioms() {
        for g in [
            FiniteGroup::cyclic(&["0", "1", "2"]),
            FiniteGroup::cyclic(&["1", "g"]),
            FiniteGroup::trivial("e"),
        ] {
            let p = group_as_pregroup(&g).unwrap();
            assert!(check_axioms(p.structure()).unwrap().all_hold());
            assert_eq!(
                p.structure().rel_tuples("M").count(),
                g.size() * g.size()
            );
        }
    }

    #[test]
    fn free_product_carrier_is_merged() {
        let fp = fixtures::pg_dinf_construction();
        assert_eq!(fp.pregroup().structure().carrier(), &["1", "a", "b"]);
        let z2z3 = fixtures::z2_z3_free();
        assert_eq!(z2z3.pregroup().size(), 4);
    }

    #[test]
    fn free_product_with_trivial_factor_is_the_group() {
        let a = FiniteGroup::trivial("1");
        let b = FiniteGroup::cyclic(&["1", "g"]);
        let fp = free_product_pregroup(&a, &b).unwrap();
        let direct = group_as_pregroup(&b).unwrap();
        assert_eq!(
            fp.pregroup().structure().to_def().relations,
            direct.structure().to_def().relations
        );
    }

    #[test]
    fn amalgam_carrier_and_products() {
        let am = fixtures::pg_am_construction();
        let st = am.spregroup().structure();
        assert_eq!(st.carrier(), &["1", "c", "x", "X", "y", "Y"]);
        let p = am.pregroup();
        assert_eq!(p.product("x", "c").unwrap().as_deref(), Some("X"));
        assert_eq!(p.product("c", "y").unwrap().as_deref(), Some("Y"));
        // the shared element obeys both factor tables
        assert_eq!(p.product("c", "c").unwrap().as_deref(), Some("1"));
    }

    #[test]
    fn trivial_core_is_routed_to_free_products() {
        let a = FiniteGroup::cyclic(&["1", "x", "c", "X"]);
        let b = FiniteGroup::cyclic(&["1", "y", "d", "Y"]);
        let core = FiniteGroup::trivial("e");
        let embed_a = BTreeMap::from([("e".to_string(), "1".to_string())]);
        let embed_b = BTreeMap::from([("e".to_string(), "1".to_string())]);
        assert!(matches!(
            amalgam_pregroup(&a, &b, &core, &embed_a, &embed_b),
            Err(ConstructionError::TrivialCore)
        ));
    }

    #[test]
    fn non_homomorphic_embedding_is_rejected() {
        let a = FiniteGroup::cyclic(&["1", "x", "c", "X"]);
        let b = FiniteGroup::cyclic(&["1", "y", "d", "Y"]);
        let core = FiniteGroup::cyclic(&["e", "w"]);
        let embed_a = BTreeMap::from([
            ("e".to_string(), "1".to_string()),
            ("w".to_string(), "x".to_string()), // x has order 4, w has order 2
        ]);
        let embed_b = BTreeMap::from([
            ("e".to_string(), "1".to_string()),
            ("w".to_string(), "d".to_string()),
        ]);
        assert!(matches!(
            amalgam_pregroup(&a, &b, &core, &embed_a, &embed_b),
            Err(ConstructionError::BadEmbedding(_))
        ));
    }

    #[test]
    fn hnn_carrier_of_z2_full_association() {
        let hnn = fixtures::hnn_z2_construction();
        let st = hnn.spregroup().structure();
        assert_eq!(st.carrier(), &["1", "g", "T", "Tg", "t", "gt"]);
        // t^-1 * t = 1 and t commutes with g in this quotient
        let p = hnn.pregroup();
        assert_eq!(p.product("T", "t").unwrap().as_deref(), Some("1"));
        assert_eq!(p.product("t", "g").unwrap().as_deref(), Some("gt"));
        assert_eq!(p.product("g", "t").unwrap().as_deref(), Some("gt"));
    }

    #[test]
    fn hnn_trivial_association_counts_classes() {
        let spec = HnnSpec {
            group: FiniteGroup::cyclic(&["1", "g"]),
            c1: vec!["1".into()],
            c2: vec!["1".into()],
            theta: BTreeMap::from([("1".to_string(), "1".to_string())]),
            stable: "t".into(),
        };
        let hnn = hnn_pregroup(&spec).unwrap();
        assert_eq!(hnn.pregroup().size(), 4 * 2 - 1);
    }

    #[test]
    fn free_oracle_examples() {
        let fp = fixtures::pg_dinf_construction();
        assert_eq!(fp.oracle_normal_form(&["a", "a", "b"]).unwrap(), "b");
        assert_eq!(fp.oracle_normal_form(&["a", "b", "a"]).unwrap(), "a*b*a");
        assert_eq!(fp.oracle_normal_form(&["a", "a"]).unwrap(), "1");
        assert_eq!(fp.oracle_normal_form(&[]).unwrap(), "1");
    }

    #[test]
    fn amalgam_oracle_identifies_shifted_words() {
        let am = fixtures::pg_am_construction();
        let left = am.oracle_normal_form(&["x", "y"]).unwrap();
        let right = am.oracle_normal_form(&["X", "Y"]).unwrap();
        assert_eq!(left, right);
        let other = am.oracle_normal_form(&["x", "Y"]).unwrap();
        assert_ne!(left, other);
    }

    #[test]
    fn hnn_oracle_removes_pinches() {
        let hnn = fixtures::hnn_z2_construction();
        let pinched = hnn.oracle_normal_form(&["T", "g", "t"]).unwrap();
        let direct = hnn.oracle_normal_form(&["g"]).unwrap();
        assert_eq!(pinched, direct);
    }

    #[test]
    fn oracle_agrees_with_equivalence_on_examples() {
        let am = fixtures::pg_am_construction();
        let p = am.pregroup();
        let pairs = [
            (vec!["x", "y"], vec!["X", "Y"], true),
            (vec!["x", "y"], vec!["x", "Y"], false),
            (vec!["x", "x"], vec!["c"], true),
            (vec!["c", "c"], vec!["1"], true),
        ];
        for (u, v, expected) in pairs {
            let wu = Word::from_ids(p, &u).unwrap();
            let wv = Word::from_ids(p, &v).unwrap();
            assert_eq!(equivalent(p, &wu, &wv), expected);
            assert_eq!(
                am.oracle_normal_form(&u).unwrap() == am.oracle_normal_form(&v).unwrap(),
                expected
            );
        }
    }

    #[test]
    fn subgroup_detection() {
        let z4 = FiniteGroup::cyclic(&["1", "x", "c", "X"]);
        assert!(z4.is_subgroup(&BTreeSet::from(["1".to_string(), "c".to_string()])));
        assert!(!z4.is_subgroup(&BTreeSet::from(["1".to_string(), "x".to_string()])));
        assert!(!z4.is_subgroup(&BTreeSet::from(["c".to_string()])));
    }
}
