//! The executable transfer construction: closure chains under the partial
//! product, the letterwise word map induced by a subset isomorphism, the
//! induced map on U(P)-classes, and the application harness for free
//! products, amalgams and HNN quotients.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::constructions::{
    amalgam_pregroup, free_product_pregroup, hnn_pregroup, Amalgam, ConstructionError,
    FiniteGroup, FreeProduct, Hnn, HnnSpec, RawElem,
};
use crate::fostruct::{
    bounded_f_equiv, find_isomorphism, is_morphism, ClosureChain, PartialMap, StructureError,
};
use crate::par;
use crate::pregroup::Pregroup;
use crate::ugroup::{self, Word};

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("transfer needs at least one word")]
    NoWords,
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Ugroup(#[from] ugroup::UgroupError),
}

/// Closes `s0` under the partial product: each step adds `a·b` for every
/// pair already present with `(a,b)` in `D`. Unlike the total-function
/// closure this only follows the relation-encoded product.
pub fn product_closure(
    p: &Pregroup,
    s0: &[String],
    steps: usize,
) -> Result<ClosureChain, StructureError> {
    let mut current: BTreeSet<usize> = BTreeSet::new();
    for id in s0 {
        current.insert(p.structure().require_elem(id)?);
    }
    let mut levels = vec![current.clone()];
    let mut stabilized_at = None;
    for step in 1..=steps {
        let mut next = current.clone();
        for &a in &current {
            for &b in &current {
                if let Some(c) = p.product_idx(a, b) {
                    next.insert(c);
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

/// The four verdicts of a successful transfer.
#[derive(Debug, Clone, Serialize)]
pub struct TransferVerdicts {
    /// the isomorphism maps each closure level onto the target-side level
    pub chain_image_equality: bool,
    /// the letterwise map sends reduced words to reduced words (both ways)
    pub theta_preserves_reduced: bool,
    /// word equivalence transports along the letterwise map
    pub equivalence_transport: bool,
    /// the induced class map respects products and inverses within bounds
    pub homomorphism_on_products: bool,
}

impl TransferVerdicts {
    pub fn all(&self) -> bool {
        self.chain_image_equality
            && self.theta_preserves_reduced
            && self.equivalence_transport
            && self.homomorphism_on_products
    }
}

/// Everything the transfer construction produced: the closure chain, the
/// subset isomorphism (if any), the image words and the verification
/// verdicts.
#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub source_words: Vec<String>,
    pub max_len: usize,
    pub closure_levels: Vec<Vec<String>>,
    pub closure_stabilized_at: Option<usize>,
    pub iso: Option<PartialMap>,
    pub image_words: Vec<String>,
    pub image_classes: Vec<String>,
    pub verdicts: Option<TransferVerdicts>,
    pub ok: bool,
}

/// Runs the transfer construction from `p1` to `p2` for the given words:
/// reduce representatives, close their letters to depth `2J` under the
/// partial product, search for a subset isomorphism in the full (possibly
/// S-extended) language, and when one exists map words letterwise and verify
/// the four transported properties.
///
/// A missing isomorphism is reported, not an error: the hypothesis simply
/// fails at this subset.
pub fn transfer(
    p1: &Pregroup,
    p2: &Pregroup,
    words: &[Word],
) -> Result<TransferReport, TransferError> {
    if words.is_empty() {
        return Err(TransferError::NoWords);
    }
    let reps: Vec<Word> = words.iter().map(|w| ugroup::reduce(p1, w)).collect();
    let max_len = reps.iter().map(Word::len).max().unwrap_or(1);
    let mut letters: BTreeSet<usize> = BTreeSet::new();
    for rep in &reps {
        letters.extend(rep.letters());
    }
    let s0: Vec<String> = letters
        .iter()
        .map(|e| p1.structure().elem_id(*e).to_string())
        .collect();
    let chain = product_closure(p1, &s0, 2 * max_len)?;
    let closure_levels: Vec<Vec<String>> = (0..chain.levels.len())
        .map(|i| chain.level_ids(p1.structure(), i))
        .collect();

    let s_final: Vec<String> = closure_levels.last().cloned().unwrap_or_default();
    let iso = find_isomorphism(&s_final, p1.structure(), p2.structure())?;

    let mut report = TransferReport {
        source_words: reps.iter().map(|w| w.render(p1)).collect(),
        max_len,
        closure_levels,
        closure_stabilized_at: chain.stabilized_at,
        iso: iso.clone(),
        image_words: Vec::new(),
        image_classes: Vec::new(),
        verdicts: None,
        ok: false,
    };
    let Some(phi) = iso else {
        return Ok(report);
    };

    let map_word = |w: &Word| -> Option<Word> {
        let letters = w
            .letters()
            .iter()
            .map(|e| {
                phi.get(p1.structure().elem_id(*e))
                    .and_then(|id| p2.structure().elem_index(id))
            })
            .collect::<Option<Vec<usize>>>()?;
        Some(Word::from_indices(letters))
    };

    // (a) phi carries each closure level onto the corresponding level of the
    // image chain.
    let t0: Vec<String> = s0
        .iter()
        .map(|id| phi.get(id).expect("s0 is inside the domain").to_string())
        .collect();
    let image_chain = product_closure(p2, &t0, 2 * max_len)?;
    let chain_image_equality = chain
        .levels
        .iter()
        .zip(image_chain.levels.iter())
        .all(|(s_r, t_r)| {
            let mapped: BTreeSet<usize> = s_r
                .iter()
                .filter_map(|e| {
                    phi.get(p1.structure().elem_id(*e))
                        .and_then(|id| p2.structure().elem_index(id))
                })
                .collect();
            mapped.len() == s_r.len() && &mapped == t_r
        });

    // words over S_0 of length 1..=J, for the reducedness and transport
    // checks
    let s0_idx: Vec<usize> = letters.iter().copied().collect();
    let mut words_over_s0: Vec<Word> = Vec::new();
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for prefix in &frontier {
            for &e in &s0_idx {
                let mut word = prefix.clone();
                word.push(e);
                words_over_s0.push(Word::from_indices(word.clone()));
                next.push(word);
            }
        }
        frontier = next;
    }

    let theta_preserves_reduced = par::all(&words_over_s0, |w| {
        let Some(img) = map_word(w) else { return false };
        ugroup::is_reduced(p1, w) == ugroup::is_reduced(p2, &img)
    });

    let reduced_over_s0: Vec<Word> = words_over_s0
        .iter()
        .filter(|w| ugroup::is_reduced(p1, w))
        .cloned()
        .collect();
    let pairs: Vec<(usize, usize)> = (0..reduced_over_s0.len())
        .flat_map(|i| (0..reduced_over_s0.len()).map(move |j| (i, j)))
        .filter(|(i, j)| reduced_over_s0[*i].len() == reduced_over_s0[*j].len())
        .collect();
    let equivalence_transport = par::all(&pairs, |&(i, j)| {
        let u = &reduced_over_s0[i];
        let v = &reduced_over_s0[j];
        match (map_word(u), map_word(v)) {
            (Some(iu), Some(iv)) => {
                ugroup::equivalent(p1, u, v) == ugroup::equivalent(p2, &iu, &iv)
            }
            _ => false,
        }
    });

    // (d) the induced class map respects products whose reduced form stays
    // within length J, and inverses whose letters stay inside the closure.
    let mut homomorphism_on_products = true;
    for u in &reps {
        for v in &reps {
            let product = ugroup::reduce(p1, &Word::from_indices(
                u.letters().iter().chain(v.letters()).copied().collect(),
            ));
            if product.len() > max_len {
                continue;
            }
            let (Some(iu), Some(iv), Some(ip)) =
                (map_word(u), map_word(v), map_word(&product))
            else {
                homomorphism_on_products = false;
                break;
            };
            let image_product = ugroup::reduce(p2, &Word::from_indices(
                iu.letters().iter().chain(iv.letters()).copied().collect(),
            ));
            if !ugroup::equivalent(p2, &ip, &image_product) {
                homomorphism_on_products = false;
                break;
            }
        }
        // inverse: representative of u^-1, when it stays inside the domain
        let inv_word = Word::from_indices(
            u.letters()
                .iter()
                .rev()
                .map(|e| p1.inv_idx(*e))
                .collect(),
        );
        if let Some(inv_img) = map_word(&inv_word) {
            if let Some(iu) = map_word(u) {
                let image_inv = Word::from_indices(
                    iu.letters().iter().rev().map(|e| p2.inv_idx(*e)).collect(),
                );
                if !ugroup::equivalent(p2, &inv_img, &image_inv) {
                    homomorphism_on_products = false;
                }
            }
        }
    }

    report.image_words = reps
        .iter()
        .map(|w| map_word(w).map(|iw| iw.render(p2)).unwrap_or_default())
        .collect();
    report.image_classes = reps
        .iter()
        .filter_map(|w| map_word(w))
        .map(|iw| {
            ugroup::canonical(p2, &iw)
                .map(|u| u.render(p2))
                .unwrap_or_default()
        })
        .collect();
    let verdicts = TransferVerdicts {
        chain_image_equality,
        theta_preserves_reduced,
        equivalence_transport,
        homomorphism_on_products,
    };
    report.ok = verdicts.all();
    report.verdicts = Some(verdicts);
    Ok(report)
}

// ---------------------------------------------------------------------------
// Application harness
// ---------------------------------------------------------------------------

/// Components for one run of the application harness.
#[derive(Debug, Clone)]
pub enum HarnessInput {
    /// Free products `A1 * B1` vs `A2 * B2`.
    Free {
        a1: FiniteGroup,
        b1: FiniteGroup,
        a2: FiniteGroup,
        b2: FiniteGroup,
    },
    /// Amalgams over a common core, given by the core group and embeddings
    /// into each factor.
    AmalgamPair {
        core: FiniteGroup,
        a1: FiniteGroup,
        b1: FiniteGroup,
        embed_a1: BTreeMap<String, String>,
        embed_b1: BTreeMap<String, String>,
        a2: FiniteGroup,
        b2: FiniteGroup,
        embed_a2: BTreeMap<String, String>,
        embed_b2: BTreeMap<String, String>,
    },
    /// HNN quotients; the two sides may carry independent associations.
    HnnPair { side1: HnnSpec, side2: HnnSpec },
}

/// One subset of the first pregroup with the partner assembled on the other
/// side, and whether the assembled map verified as an isomorphism.
#[derive(Debug, Clone, Serialize)]
pub struct SubsetPartner {
    pub subset: Vec<String>,
    pub partner: Option<Vec<String>>,
    pub verified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnessReport {
    pub hypothesis_ok: bool,
    pub hypothesis_notes: Vec<String>,
    pub partners: Vec<SubsetPartner>,
    pub partners_ok: bool,
    pub transfer: TransferReport,
    pub ok: bool,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

fn map_subset(phi: &PartialMap, subset: &[String]) -> Option<Vec<String>> {
    subset
        .iter()
        .map(|id| phi.get(id).map(str::to_string))
        .collect()
}

/// Verifies the assembled partner map as an isomorphism of pregroup subsets
/// (in the full language of the two structures).
fn verify_partner(
    p1: &Pregroup,
    p2: &Pregroup,
    pairs: &BTreeMap<String, String>,
) -> bool {
    let phi = PartialMap::new(pairs.iter().map(|(a, b)| (a.clone(), b.clone())));
    let Some(inverse) = phi.inverse() else {
        return false;
    };
    let forward = is_morphism(&phi, p1.structure(), p2.structure());
    let backward = is_morphism(&inverse, p2.structure(), p1.structure());
    matches!((forward, backward), (Ok(f), Ok(b)) if f.ok() && b.ok())
}

/// Deterministic transfer word sample: the lexicographically first reduced
/// words of each length up to `max_len`, capped at `cap` words.
fn sample_words(p: &Pregroup, max_len: usize, cap: usize) -> Vec<Word> {
    let mut out = Vec::new();
    for len in 1..=max_len {
        for w in ugroup::reduced_words(p, len) {
            if out.len() >= cap {
                return out;
            }
            out.push(w);
        }
    }
    out
}

/// Checks the componentwise hypothesis of the relevant proposition, builds
/// both pregroups, splits every subset of the first into its factor (or
/// coset-block) parts, finds componentwise partners, reassembles and
/// verifies them, and finally runs `transfer` on a sampled word set.
pub fn application_harness(
    input: &HarnessInput,
    max_subset: usize,
    word_len: usize,
) -> Result<HarnessReport, HarnessError> {
    match input {
        HarnessInput::Free { a1, b1, a2, b2 } => {
            let mut notes = Vec::new();
            let fa = bounded_f_equiv(&a1.as_structure(), &a2.as_structure(), max_subset);
            notes.push(format!("factor A subsets match: {}", fa.equivalent));
            let fb = bounded_f_equiv(&b1.as_structure(), &b2.as_structure(), max_subset);
            notes.push(format!("factor B subsets match: {}", fb.equivalent));
            let hypothesis_ok = fa.equivalent && fb.equivalent;
            let fp1 = free_product_pregroup(a1, b1)?;
            let fp2 = free_product_pregroup(a2, b2)?;
            let partners = free_partners(&fp1, &fp2, max_subset)?;
            finish_harness(
                hypothesis_ok,
                notes,
                partners,
                fp1.pregroup(),
                fp2.pregroup(),
                word_len,
            )
        }
        HarnessInput::AmalgamPair {
            core,
            a1,
            b1,
            embed_a1,
            embed_b1,
            a2,
            b2,
            embed_a2,
            embed_b2,
        } => {
            let families = |embed: &BTreeMap<String, String>| -> Vec<(String, Vec<String>)> {
                vec![(
                    "C".to_string(),
                    core.carrier().iter().map(|w| embed[w].clone()).collect(),
                )]
            };
            let mut notes = Vec::new();
            let fa = bounded_f_equiv(
                &a1.as_s_structure(&families(embed_a1))?,
                &a2.as_s_structure(&families(embed_a2))?,
                max_subset,
            );
            notes.push(format!("factor A subsets match in L_C: {}", fa.equivalent));
            let fb = bounded_f_equiv(
                &b1.as_s_structure(&families(embed_b1))?,
                &b2.as_s_structure(&families(embed_b2))?,
                max_subset,
            );
            notes.push(format!("factor B subsets match in L_C: {}", fb.equivalent));
            let hypothesis_ok = fa.equivalent && fb.equivalent;
            let am1 = amalgam_pregroup(a1, b1, core, embed_a1, embed_b1)?;
            let am2 = amalgam_pregroup(a2, b2, core, embed_a2, embed_b2)?;
            let partners = amalgam_partners(&am1, &am2, max_subset)?;
            finish_harness(
                hypothesis_ok,
                notes,
                partners,
                am1.pregroup(),
                am2.pregroup(),
                word_len,
            )
        }
        HarnessInput::HnnPair { side1, side2 } => {
            let families = |spec: &HnnSpec| -> Vec<(String, Vec<String>)> {
                vec![
                    ("C1".to_string(), spec.c1.clone()),
                    ("C2".to_string(), spec.c2.clone()),
                ]
            };
            let mut notes = Vec::new();
            let fg = bounded_f_equiv(
                &side1.group.as_s_structure(&families(side1))?,
                &side2.group.as_s_structure(&families(side2))?,
                max_subset,
            );
            notes.push(format!("base groups match in L_S: {}", fg.equivalent));
            let hypothesis_ok = fg.equivalent;
            let h1 = hnn_pregroup(side1)?;
            let h2 = hnn_pregroup(side2)?;
            let partners = hnn_partners(&h1, &h2, max_subset)?;
            finish_harness(
                hypothesis_ok,
                notes,
                partners,
                h1.pregroup(),
                h2.pregroup(),
                word_len,
            )
        }
    }
}

fn finish_harness(
    hypothesis_ok: bool,
    notes: Vec<String>,
    partners: Vec<SubsetPartner>,
    p1: &Pregroup,
    p2: &Pregroup,
    word_len: usize,
) -> Result<HarnessReport, HarnessError> {
    let partners_ok = partners.iter().all(|p| p.verified);
    let words = sample_words(p1, word_len, 6);
    let transfer = transfer(p1, p2, &words)?;
    let ok = hypothesis_ok && partners_ok && transfer.ok;
    Ok(HarnessReport {
        hypothesis_ok,
        hypothesis_notes: notes,
        partners,
        partners_ok,
        transfer,
        ok,
    })
}

fn all_subsets_up_to(n: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for size in 1..=max_size.min(n) {
        out.extend(crate::fostruct::combinations(n, size));
    }
    out
}

/// Combines componentwise maps, failing on any disagreement over shared
/// elements (the identity, or the amalgamated core).
fn combine_maps(maps: &[&PartialMap]) -> Option<BTreeMap<String, String>> {
    let mut pairs: BTreeMap<String, String> = BTreeMap::new();
    for map in maps {
        for (k, v) in map.pairs() {
            if let Some(prev) = pairs.insert(k.to_string(), v.to_string()) {
                if prev != v {
                    return None;
                }
            }
        }
    }
    Some(pairs)
}

/// Shared subset-split logic for the two-factor constructions: every subset
/// of the first carrier splits as `S = (S ∩ A1) ∪ (S ∩ B1)` (the parts
/// overlap in the identity, or in the core for amalgams), partners are found
/// factorwise and the reassembled map is verified on the pregroups.
#[allow(clippy::too_many_arguments)]
fn factor_split_partners(
    p1: &Pregroup,
    p2: &Pregroup,
    a1: &FiniteGroup,
    b1: &FiniteGroup,
    a1s: &crate::fostruct::FiniteStructure,
    b1s: &crate::fostruct::FiniteStructure,
    a2s: &crate::fostruct::FiniteStructure,
    b2s: &crate::fostruct::FiniteStructure,
    max_subset: usize,
) -> Result<Vec<SubsetPartner>, HarnessError> {
    let st1 = p1.structure();
    let mut out = Vec::new();
    for subset in all_subsets_up_to(st1.size(), max_subset) {
        let ids: Vec<String> = subset
            .iter()
            .map(|e| st1.elem_id(*e).to_string())
            .collect();
        let s_a: Vec<String> = ids
            .iter()
            .filter(|id| a1.index_of(id).is_some())
            .cloned()
            .collect();
        let s_b: Vec<String> = ids
            .iter()
            .filter(|id| b1.index_of(id).is_some())
            .cloned()
            .collect();
        let phi_a = find_isomorphism(&s_a, a1s, a2s)?;
        let phi_b = find_isomorphism(&s_b, b1s, b2s)?;
        let (partner_ids, verified) = match (phi_a, phi_b) {
            (Some(pa), Some(pb)) => match combine_maps(&[&pa, &pb]) {
                Some(pairs) => {
                    let verified = verify_partner(p1, p2, &pairs);
                    let phi =
                        PartialMap::new(pairs.iter().map(|(a, b)| (a.clone(), b.clone())));
                    (map_subset(&phi, &ids), verified)
                }
                None => (None, false),
            },
            _ => (None, false),
        };
        out.push(SubsetPartner {
            subset: ids,
            partner: partner_ids,
            verified,
        });
    }
    Ok(out)
}

/// Subset split for free products, in the plain group language.
fn free_partners(
    fp1: &FreeProduct,
    fp2: &FreeProduct,
    max_subset: usize,
) -> Result<Vec<SubsetPartner>, HarnessError> {
    // factors relabeled into the merged id space
    let (fa1, fb1) = fp1.factors();
    let (fa2, fb2) = fp2.factors();
    factor_split_partners(
        fp1.pregroup(),
        fp2.pregroup(),
        fa1,
        fb1,
        &fa1.as_structure(),
        &fb1.as_structure(),
        &fa2.as_structure(),
        &fb2.as_structure(),
        max_subset,
    )
}

/// Subset split for amalgams, in the language carrying the designated core
/// constants (so the factorwise maps agree on the core automatically).
fn amalgam_partners(
    am1: &Amalgam,
    am2: &Amalgam,
    max_subset: usize,
) -> Result<Vec<SubsetPartner>, HarnessError> {
    let (a1, b1) = am1.factors();
    let (a2, b2) = am2.factors();
    let core_family =
        |am: &Amalgam| vec![("C".to_string(), am.core_ids().iter().cloned().collect())];
    let a1s = a1.as_s_structure(&core_family(am1))?;
    let b1s = b1.as_s_structure(&core_family(am1))?;
    let a2s = a2.as_s_structure(&core_family(am2))?;
    let b2s = b2.as_s_structure(&core_family(am2))?;
    factor_split_partners(
        am1.pregroup(),
        am2.pregroup(),
        a1,
        b1,
        &a1s,
        &b1s,
        &a2s,
        &b2s,
        max_subset,
    )
}

/// Subset split for HNN quotients: expand each class to its raw members,
/// split the raw set into the four t-blocks, strip the stable letters to get
/// subsets of the base group, find partners in the S-group language, dress
/// them back up and project to the quotient of the second side.
fn hnn_partners(
    h1: &Hnn,
    h2: &Hnn,
    max_subset: usize,
) -> Result<Vec<SubsetPartner>, HarnessError> {
    let families = |spec: &HnnSpec| -> Vec<(String, Vec<String>)> {
        vec![
            ("C1".to_string(), spec.c1.clone()),
            ("C2".to_string(), spec.c2.clone()),
        ]
    };
    let g1s = h1.spec().group.as_s_structure(&families(h1.spec()))?;
    let g2s = h2.spec().group.as_s_structure(&families(h2.spec()))?;
    let st1 = h1.spregroup().structure();
    let g1 = &h1.spec().group;
    let g2 = &h2.spec().group;
    let raw_classes_1 = h1.raw_classes();

    let mut out = Vec::new();
    for subset in all_subsets_up_to(st1.size(), max_subset) {
        let ids: Vec<String> = subset
            .iter()
            .map(|e| st1.elem_id(*e).to_string())
            .collect();
        // expand each class to all of its raw members, grouped by t-block
        let members: Vec<&(RawElem, String)> = raw_classes_1
            .iter()
            .filter(|(_, class)| ids.contains(class))
            .collect();
        let mut blocks: [BTreeSet<String>; 4] = Default::default();
        for (raw, _) in &members {
            let block = (raw.t_inv_left as usize) + 2 * (raw.t_right as usize);
            blocks[block].insert(g1.id(raw.g).to_string());
        }
        // per-block partner inside the base group, in the S-language
        let mut phis: Vec<Option<PartialMap>> = Vec::with_capacity(4);
        for block in &blocks {
            let block_ids: Vec<String> = block.iter().cloned().collect();
            phis.push(find_isomorphism(&block_ids, &g1s, &g2s)?);
        }
        let partner = if phis.iter().all(Option::is_some) {
            // dress the images back up with stable letters and project to
            // classes of the second quotient
            let mut pairs: BTreeMap<String, String> = BTreeMap::new();
            let mut consistent = true;
            for (raw, class) in &members {
                let block = (raw.t_inv_left as usize) + 2 * (raw.t_right as usize);
                let image = phis[block]
                    .as_ref()
                    .unwrap()
                    .get(g1.id(raw.g))
                    .and_then(|id| g2.index_of(id))
                    .map(|g| RawElem {
                        t_inv_left: raw.t_inv_left,
                        g,
                        t_right: raw.t_right,
                    })
                    .and_then(|raw2| h2.class_id_of_raw(raw2));
                let Some(class2) = image else {
                    consistent = false;
                    break;
                };
                if let Some(prev) = pairs.insert(class.clone(), class2.to_string()) {
                    if prev != class2 {
                        consistent = false;
                        break;
                    }
                }
            }
            consistent.then_some(pairs)
        } else {
            None
        };
        let (partner_ids, verified) = match partner {
            Some(pairs) => {
                let verified = verify_partner(h1.pregroup(), h2.pregroup(), &pairs)
                    && pairs.len() == ids.len();
                let images = ids
                    .iter()
                    .map(|id| pairs.get(id).cloned())
                    .collect::<Option<Vec<String>>>();
                (images, verified)
            }
            None => (None, false),
        };
        out.push(SubsetPartner {
            subset: ids,
            partner: partner_ids,
            verified,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn product_closure_in_pg_dinf() {
        let p = fixtures::pg_dinf();
        let chain = product_closure(&p, &["a".into(), "b".into()], 2).unwrap();
        assert_eq!(chain.level_ids(p.structure(), 0), vec!["a", "b"]);
        assert_eq!(chain.level_ids(p.structure(), 1), vec!["1", "a", "b"]);
        assert_eq!(chain.stabilized_at, Some(2));
    }

    #[test]
    fn product_closure_in_pg_am_reaches_carrier() {
        let am = fixtures::pg_am();
        let p = am.pregroup();
        let chain = product_closure(p, &["x".into(), "y".into()], 3).unwrap();
        assert_eq!(chain.level_ids(p.structure(), 0), vec!["x", "y"]);
        assert_eq!(chain.level_ids(p.structure(), 1), vec!["c", "x", "y"]);
        assert_eq!(
            chain.level_ids(p.structure(), 2),
            vec!["1", "X", "Y", "c", "x", "y"]
        );
        assert_eq!(chain.stabilized_at, Some(3));
    }

    #[test]
    fn closure_of_identity_is_stationary() {
        let p = fixtures::pg_dinf();
        let chain = product_closure(&p, &["1".into()], 2).unwrap();
        assert_eq!(chain.stabilized_at, Some(1));
        assert_eq!(chain.last().len(), 1);
    }

    #[test]
    fn transfer_to_itself_is_identity() {
        let p = fixtures::pg_dinf();
        let words = vec![Word::parse(&p, "a,b").unwrap()];
        let report = transfer(&p, &p, &words).unwrap();
        assert!(report.ok, "{report:?}");
        let phi = report.iso.unwrap();
        for id in p.structure().carrier() {
            if let Some(img) = phi.get(id) {
                assert_eq!(img, id);
            }
        }
    }

    #[test]
    fn transfer_to_relabeled_copy_swaps_letters() {
        let p = fixtures::pg_dinf();
        let q = fixtures::pg_dinf_relabeled();
        let words = vec![Word::parse(&p, "a,b").unwrap()];
        let report = transfer(&p, &q, &words).unwrap();
        assert!(report.ok, "{report:?}");
        let phi = report.iso.unwrap();
        assert_eq!(phi.get("1"), Some("1"));
        assert_eq!(phi.get("a"), Some("b"));
        assert_eq!(phi.get("b"), Some("a"));
        assert_eq!(report.image_classes, vec!["b,a".to_string()]);
    }

    #[test]
    fn transfer_reports_missing_isomorphism() {
        let p = fixtures::pg_dinf();
        let z3 = fixtures::z3_pregroup();
        let words = vec![Word::parse(&p, "a").unwrap()];
        let report = transfer(&p, &z3, &words).unwrap();
        assert!(!report.ok);
        assert!(report.iso.is_none());
        assert!(report.verdicts.is_none());
    }

    #[test]
    fn free_harness_on_equal_components() {
        let z2a = FiniteGroup::cyclic(&["1", "a"]);
        let z2b = FiniteGroup::cyclic(&["1", "b"]);
        let input = HarnessInput::Free {
            a1: z2a.clone(),
            b1: z2b.clone(),
            a2: z2a,
            b2: z2b,
        };
        let report = application_harness(&input, 2, 3).unwrap();
        assert!(report.hypothesis_ok);
        assert!(report.partners_ok, "{:#?}", report.partners);
        assert!(report.ok);
    }

    #[test]
    fn amalgam_harness_on_relabeled_factors() {
        let (core, a1, b1, ea1, eb1) = fixtures::pg_am_components();
        let (_, a2, b2, ea2, eb2) = fixtures::pg_am_relabeled_components();
        let input = HarnessInput::AmalgamPair {
            core,
            a1,
            b1,
            embed_a1: ea1,
            embed_b1: eb1,
            a2,
            b2,
            embed_a2: ea2,
            embed_b2: eb2,
        };
        let report = application_harness(&input, 2, 2).unwrap();
        assert!(report.hypothesis_ok, "{:?}", report.hypothesis_notes);
        assert!(report.partners_ok);
        assert!(report.ok);
    }

    #[test]
    fn hnn_harness_on_identical_sides() {
        let spec = fixtures::hnn_z2_spec();
        let input = HarnessInput::HnnPair {
            side1: spec.clone(),
            side2: spec,
        };
        let report = application_harness(&input, 2, 2).unwrap();
        assert!(report.hypothesis_ok);
        assert!(report.partners_ok, "{:#?}", report.partners);
        assert!(report.ok);
    }
}
