//! Words over a pregroup, reduction and interleaving, the decision procedure
//! for the word equivalence `≈`, and arithmetic in the universal group U(P).
//!
//! Elements of U(P) are `≈`-classes of reduced words. A class is represented
//! by its lexicographically least member under the carrier order, found by
//! exhaustive interleaver search; the identity class is represented by the
//! empty word (serialized as the empty string).

use std::collections::BTreeSet;

use thiserror::Error;

use crate::fostruct::StructureError;
use crate::par;
use crate::pregroup::Pregroup;

/// Exhaustive interleaver search is `O(|P|^(k-1))`; words longer than this
/// are rejected rather than silently slow.
pub const MAX_CANONICAL_LEN: usize = 8;

#[derive(Debug, Error)]
pub enum UgroupError {
    #[error("interleaver word must have length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("word of length {len} exceeds the canonical-form guard ({max})")]
    WordTooLong { len: usize, max: usize },
    #[error("operands belong to different pregroups")]
    PregroupMismatch,
    #[error("words over the subpregroup must use its carrier")]
    NotASubpregroup,
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// A finite sequence of pregroup elements, stored by carrier index. The
/// empty word is accepted and denotes the identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word {
    letters: Vec<usize>,
}

impl Word {
    pub fn from_indices(letters: Vec<usize>) -> Word {
        Word { letters }
    }

    pub fn from_ids(p: &Pregroup, ids: &[&str]) -> Result<Word, UgroupError> {
        let letters = ids
            .iter()
            .map(|id| p.structure().require_elem(id))
            .collect::<Result<_, _>>()?;
        Ok(Word { letters })
    }

    /// Parses the comma-separated serialization; the empty string is the
    /// identity.
    pub fn parse(p: &Pregroup, text: &str) -> Result<Word, UgroupError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Ok(Word { letters: vec![] });
        }
        let ids: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        Word::from_ids(p, &ids)
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn render(&self, p: &Pregroup) -> String {
        self.letters
            .iter()
            .map(|e| p.structure().elem_id(*e))
            .collect::<Vec<_>>()
            .join(",")
    }

    fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word { letters }
    }
}

/// Leftmost-first reduction: repeatedly merges the leftmost adjacent pair
/// lying in `D` until the word is reduced. The empty word normalizes to the
/// one-letter identity word.
pub fn reduce(p: &Pregroup, w: &Word) -> Word {
    let mut letters = if w.is_empty() {
        vec![p.identity_idx()]
    } else {
        w.letters.clone()
    };
    loop {
        let mut merged = false;
        for i in 0..letters.len().saturating_sub(1) {
            if let Some(c) = p.product_idx(letters[i], letters[i + 1]) {
                letters[i] = c;
                letters.remove(i + 1);
                merged = true;
                break;
            }
        }
        if !merged {
            return Word { letters };
        }
    }
}

/// Rightmost-first reduction. Different strategies may produce different
/// reduced words; all land in the same `≈`-class, which is what
/// [`equivalent`] decides.
pub fn reduce_rightmost(p: &Pregroup, w: &Word) -> Word {
    let mut letters = if w.is_empty() {
        vec![p.identity_idx()]
    } else {
        w.letters.clone()
    };
    loop {
        let mut merged = false;
        for i in (0..letters.len().saturating_sub(1)).rev() {
            if let Some(c) = p.product_idx(letters[i], letters[i + 1]) {
                letters[i] = c;
                letters.remove(i + 1);
                merged = true;
                break;
            }
        }
        if !merged {
            return Word { letters };
        }
    }
}

/// No adjacent pair lies in `D`.
pub fn is_reduced(p: &Pregroup, w: &Word) -> bool {
    w.letters
        .windows(2)
        .all(|pair| !p.defined(pair[0], pair[1]))
}

/// The interleaving `c * a` of a length-`k` word with a length-`k-1` word:
/// `(c1·a1, a1^-1·c2·a2, ..., a_{k-1}^-1·ck)`. Returns `Ok(None)` when one of
/// the required partial products is undefined.
pub fn interleave(p: &Pregroup, c: &Word, a: &Word) -> Result<Option<Word>, UgroupError> {
    let k = c.len();
    if k == 0 {
        return if a.is_empty() {
            Ok(Some(c.clone()))
        } else {
            Err(UgroupError::LengthMismatch {
                expected: 0,
                got: a.len(),
            })
        };
    }
    if a.len() + 1 != k {
        return Err(UgroupError::LengthMismatch {
            expected: k - 1,
            got: a.len(),
        });
    }
    let identity = p.identity_idx();
    let mut out = Vec::with_capacity(k);
    let mut prev = identity; // a_0 = a_k = 1
    for i in 0..k {
        let Some(u) = p.product_idx(p.inv_idx(prev), c.letters[i]) else {
            return Ok(None);
        };
        let next = if i + 1 < k { a.letters[i] } else { identity };
        let Some(d) = p.product_idx(u, next) else {
            return Ok(None);
        };
        out.push(d);
        prev = next;
    }
    Ok(Some(Word { letters: out }))
}

/// Decides `c ≈ d` by the telescoping-product criterion: both words are
/// reduced first; words of different reduced length are never equivalent;
/// otherwise the products `π_r = d_r^-1 (π_{r-1} c_r)` must all be defined
/// and `π_m` must be the identity.
pub fn equivalent(p: &Pregroup, c: &Word, d: &Word) -> bool {
    let c = reduce(p, c);
    let d = reduce(p, d);
    if c.len() != d.len() {
        return false;
    }
    let mut pi = p.identity_idx();
    for r in 0..c.len() {
        let Some(u) = p.product_idx(pi, c.letters[r]) else {
            return false;
        };
        let Some(next) = p.product_idx(p.inv_idx(d.letters[r]), u) else {
            return false;
        };
        pi = next;
    }
    pi == p.identity_idx()
}

/// An element of U(P): an `≈`-class held by its canonical representative,
/// the lex-least reduced word of the class (empty for the identity).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UElement {
    letters: Vec<usize>,
    tag: u64,
}

impl UElement {
    pub fn word(&self) -> Word {
        Word {
            letters: self.letters.clone(),
        }
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    /// Canonical length; the identity is the empty product and has length 0.
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn render(&self, p: &Pregroup) -> String {
        self.word().render(p)
    }
}

/// The class of `w`: reduces, then enumerates every interleaver by DFS and
/// keeps the lexicographically least image under the carrier order.
pub fn canonical(p: &Pregroup, w: &Word) -> Result<UElement, UgroupError> {
    let r = reduce(p, w);
    if r.len() > MAX_CANONICAL_LEN {
        return Err(UgroupError::WordTooLong {
            len: r.len(),
            max: MAX_CANONICAL_LEN,
        });
    }
    if r.letters == [p.identity_idx()] {
        return Ok(UElement {
            letters: vec![],
            tag: p.tag(),
        });
    }
    if r.len() == 1 {
        return Ok(UElement {
            letters: r.letters,
            tag: p.tag(),
        });
    }
    // DFS over interleaver letters a_1..a_{k-1}; the all-identity choice is
    // always admissible, so the original word is among the candidates.
    fn descend(
        p: &Pregroup,
        c: &[usize],
        prev_a: usize,
        pos: usize,
        prefix: &mut Vec<usize>,
        best: &mut Vec<usize>,
    ) {
        let k = c.len();
        let Some(u) = p.product_idx(p.inv_idx(prev_a), c[pos]) else {
            return;
        };
        if pos + 1 == k {
            prefix.push(u);
            if prefix.as_slice() < best.as_slice() {
                *best = prefix.clone();
            }
            prefix.pop();
            return;
        }
        for a in 0..p.size() {
            if let Some(d) = p.product_idx(u, a) {
                prefix.push(d);
                // Lex pruning: a prefix already above the best cannot win.
                if prefix.as_slice() <= &best[..prefix.len().min(best.len())] {
                    descend(p, c, a, pos + 1, prefix, best);
                }
                prefix.pop();
            }
        }
    }

    let candidates: Vec<usize> = (0..p.size()).collect();
    let best = par::min_of(&candidates, |&a1| {
        // branch on the first interleaver letter
        let Some(d1) = p.product_idx(r.letters[0], a1) else {
            return None;
        };
        let mut best = r.letters.clone();
        let mut prefix = vec![d1];
        if prefix.as_slice() <= &best[..1] {
            descend(p, &r.letters, a1, 1, &mut prefix, &mut best);
        }
        // `best` may still be the original word; that is a valid candidate
        // (the identity interleaver) only when a1 reproduces it, but taking
        // the minimum with the original is harmless and keeps this branch
        // total.
        Some(best)
    })
    .unwrap_or_else(|| r.letters.clone());
    Ok(UElement {
        letters: best,
        tag: p.tag(),
    })
}

/// Product in U(P): concatenate canonical representatives, reduce, and take
/// the canonical form of the result.
pub fn u_mul(p: &Pregroup, u: &UElement, v: &UElement) -> Result<UElement, UgroupError> {
    if u.tag != p.tag() || v.tag != p.tag() {
        return Err(UgroupError::PregroupMismatch);
    }
    canonical(p, &u.word().concat(&v.word()))
}

/// Inverse in U(P): reverse the word and invert each letter.
pub fn u_inv(p: &Pregroup, u: &UElement) -> Result<UElement, UgroupError> {
    if u.tag != p.tag() {
        return Err(UgroupError::PregroupMismatch);
    }
    let letters: Vec<usize> = u
        .letters
        .iter()
        .rev()
        .map(|e| p.inv_idx(*e))
        .collect();
    canonical(p, &Word { letters })
}

/// The embedding of P into U(P): the class of the one-letter word.
pub fn embed(p: &Pregroup, g: &str) -> Result<UElement, UgroupError> {
    let e = p.structure().require_elem(g)?;
    canonical(p, &Word { letters: vec![e] })
}

pub fn identity_element(p: &Pregroup) -> UElement {
    UElement {
        letters: vec![],
        tag: p.tag(),
    }
}

/// Evaluates `c ≈ d` both inside the subpregroup `q` and inside the host
/// `p`. The two verdicts always agree for genuine subpregroups; the pair is
/// exposed so that agreement can be tested rather than assumed.
pub fn subgroup_agreement(
    q: &Pregroup,
    p: &Pregroup,
    c: &Word,
    d: &Word,
) -> Result<(bool, bool), UgroupError> {
    if !crate::pregroup::is_subpregroup(q, p) {
        return Err(UgroupError::NotASubpregroup);
    }
    let translate = |w: &Word| -> Result<Word, UgroupError> {
        let letters = w
            .letters
            .iter()
            .map(|e| p.structure().require_elem(q.structure().elem_id(*e)))
            .collect::<Result<_, _>>()?;
        Ok(Word { letters })
    };
    let in_q = equivalent(q, c, d);
    let in_p = equivalent(p, &translate(c)?, &translate(d)?);
    Ok((in_q, in_p))
}

/// All reduced words over `p` of exactly the given length, in lexicographic
/// order. Length 0 yields the empty word only.
pub fn reduced_words(p: &Pregroup, len: usize) -> Vec<Word> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(len);
    fn rec(p: &Pregroup, len: usize, current: &mut Vec<usize>, out: &mut Vec<Word>) {
        if current.len() == len {
            out.push(Word {
                letters: current.clone(),
            });
            return;
        }
        for e in 0..p.size() {
            if let Some(&last) = current.last() {
                if p.defined(last, e) {
                    continue;
                }
            }
            current.push(e);
            rec(p, len, current, out);
            current.pop();
        }
    }
    rec(p, len, &mut current, &mut out);
    out
}

/// The distinct elements of U(P) with canonical length at most `max_len`
/// (the identity has canonical length 0), in canonical-word order.
pub fn enumerate_elements(p: &Pregroup, max_len: usize) -> Result<Vec<UElement>, UgroupError> {
    let mut seen: BTreeSet<UElement> = BTreeSet::new();
    seen.insert(identity_element(p));
    for len in 1..=max_len {
        for w in reduced_words(p, len) {
            seen.insert(canonical(p, &w)?);
        }
    }
    Ok(seen.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn w(p: &Pregroup, text: &str) -> Word {
        Word::parse(p, text).unwrap()
    }

    #[test]
    fn reduce_merges_leftmost_first() {
        let p = fixtures::pg_dinf();
        assert_eq!(reduce(&p, &w(&p, "a,a,b")).render(&p), "b");
        assert_eq!(reduce(&p, &w(&p, "a,b,a")).render(&p), "a,b,a");
    }

    #[test]
    fn reduce_in_z3() {
        let p = fixtures::z3_pregroup();
        assert_eq!(reduce(&p, &w(&p, "1,1,1")).render(&p), "0");
    }

    #[test]
    fn empty_word_normalizes_to_identity_letter() {
        let p = fixtures::pg_dinf();
        assert_eq!(reduce(&p, &w(&p, "")).render(&p), "1");
    }

    #[test]
    fn reducedness_check() {
        let p = fixtures::pg_dinf();
        assert!(is_reduced(&p, &w(&p, "a,b,a,b")));
        assert!(!is_reduced(&p, &w(&p, "a,a")));
        for id in ["1", "a", "b"] {
            assert!(is_reduced(&p, &w(&p, id)));
        }
    }

    #[test]
    fn interleave_amalgam_example() {
        let am = fixtures::pg_am();
        let p = am.pregroup();
        let out = interleave(p, &w(p, "x,y"), &w(p, "c")).unwrap().unwrap();
        assert_eq!(out.render(p), "X,Y");
    }

    #[test]
    fn interleave_identity_interleaver_fixes_word() {
        let am = fixtures::pg_am();
        let p = am.pregroup();
        let word = w(p, "x,y");
        let ones = w(p, "1");
        assert_eq!(interleave(p, &word, &ones).unwrap().unwrap(), word);
    }

    #[test]
    fn interleave_undefined_product_is_absent() {
        let p = fixtures::pg_dinf();
        let out = interleave(&p, &w(&p, "a,b"), &w(&p, "a")).unwrap();
        assert!(out.is_none());
    }

    #[test]
    fn interleave_length_mismatch_is_an_error() {
        let p = fixtures::pg_dinf();
        assert!(matches!(
            interleave(&p, &w(&p, "a,b"), &w(&p, "a,b")),
            Err(UgroupError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn equivalence_examples() {
        let am = fixtures::pg_am();
        let p = am.pregroup();
        assert!(equivalent(p, &w(p, "x,y"), &w(p, "X,Y")));
        let d = fixtures::pg_dinf();
        assert!(!equivalent(&d, &w(&d, "a,b"), &w(&d, "b,a")));
        for text in ["a", "b", "a,b,a"] {
            assert!(equivalent(&d, &w(&d, text), &w(&d, text)));
        }
    }

    #[test]
    fn interleaving_preserves_reducedness() {
        // property: for every reduced word and admissible interleaver the
        // image is reduced
        let am = fixtures::pg_am();
        let p = am.pregroup();
        for len in 1..=3usize {
            for word in reduced_words(p, len) {
                let slots = len - 1;
                let mut stack = vec![Vec::<usize>::new()];
                while let Some(a) = stack.pop() {
                    if a.len() == slots {
                        let a = Word::from_indices(a);
                        if let Some(img) = interleave(p, &word, &a).unwrap() {
                            assert!(is_reduced(p, &img), "{} * {}", word.render(p), a.render(p));
                        }
                        continue;
                    }
                    for e in 0..p.size() {
                        let mut next = a.clone();
                        next.push(e);
                        stack.push(next);
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_picks_lex_least() {
        let am = fixtures::pg_am();
        let p = am.pregroup();
        let u = canonical(p, &w(p, "X,Y")).unwrap();
        assert_eq!(u.render(p), "x,y");
        let v = canonical(p, &w(p, "x,y")).unwrap();
        assert_eq!(u, v);
    }

    #[test]
    fn canonical_reduces_first() {
        let p = fixtures::pg_dinf();
        assert_eq!(
            canonical(&p, &w(&p, "a,a,b")).unwrap(),
            canonical(&p, &w(&p, "b")).unwrap()
        );
    }

    #[test]
    fn canonical_identity_is_empty() {
        let p = fixtures::pg_dinf();
        let e = canonical(&p, &w(&p, "1")).unwrap();
        assert!(e.is_identity());
        assert_eq!(e.render(&p), "");
        assert_eq!(canonical(&p, &w(&p, "a,a")).unwrap(), e);
    }

    #[test]
    fn canonical_fixes_single_letters() {
        let am = fixtures::pg_am();
        let p = am.pregroup();
        for id in ["c", "x", "X", "y", "Y"] {
            assert_eq!(canonical(p, &w(p, id)).unwrap().render(p), id);
        }
    }

    #[test]
    fn canonical_guard_rejects_long_words() {
        let p = fixtures::pg_dinf();
        let long: Vec<&str> = ["a", "b"].iter().cycle().take(9).copied().collect();
        let word = Word::from_ids(&p, &long).unwrap();
        assert!(matches!(
            canonical(&p, &word),
            Err(UgroupError::WordTooLong { .. })
        ));
    }

    #[test]
    fn u_mul_cancels_inverse_pair() {
        let p = fixtures::pg_dinf();
        let ab = canonical(&p, &w(&p, "a,b")).unwrap();
        let ba = canonical(&p, &w(&p, "b,a")).unwrap();
        let product = u_mul(&p, &ab, &ba).unwrap();
        assert!(product.is_identity());
    }

    #[test]
    fn u_mul_identity_is_neutral() {
        let p = fixtures::pg_dinf();
        let e = identity_element(&p);
        for text in ["a", "b", "a,b", "b,a,b"] {
            let u = canonical(&p, &w(&p, text)).unwrap();
            assert_eq!(u_mul(&p, &u, &e).unwrap(), u);
            assert_eq!(u_mul(&p, &e, &u).unwrap(), u);
        }
    }

    #[test]
    fn u_mul_concatenates_when_reduced() {
        let p = fixtures::pg_dinf();
        let a = embed(&p, "a").unwrap();
        let b = embed(&p, "b").unwrap();
        assert_eq!(u_mul(&p, &a, &b).unwrap().render(&p), "a,b");
    }

    #[test]
    fn u_inv_examples() {
        let p = fixtures::pg_dinf();
        let ab = canonical(&p, &w(&p, "a,b")).unwrap();
        assert_eq!(u_inv(&p, &ab).unwrap().render(&p), "b,a");
        let e = identity_element(&p);
        assert_eq!(u_inv(&p, &e).unwrap(), e);
        let am = fixtures::pg_am();
        let x = embed(am.pregroup(), "x").unwrap();
        assert_eq!(u_inv(am.pregroup(), &x).unwrap().render(am.pregroup()), "X");
    }

    #[test]
    fn embed_is_injective_and_homomorphic_on_d() {
        let p = fixtures::pg_dinf();
        let mut images = BTreeSet::new();
        for id in p.structure().carrier().to_vec() {
            images.insert(embed(&p, &id).unwrap());
        }
        assert_eq!(images.len(), p.size());
        // embed(a)·embed(a) = identity since a·a = 1 in P
        let a = embed(&p, "a").unwrap();
        assert!(u_mul(&p, &a, &a).unwrap().is_identity());
    }

    #[test]
    fn mismatched_pregroups_are_rejected() {
        let p = fixtures::pg_dinf();
        let z = fixtures::z3_pregroup();
        let u = embed(&p, "a").unwrap();
        let v = embed(&z, "1").unwrap();
        assert!(matches!(
            u_mul(&p, &u, &v),
            Err(UgroupError::PregroupMismatch)
        ));
    }

    #[test]
    fn subgroup_agreement_examples() {
        let p = fixtures::pg_dinf();
        let q = fixtures::z2_inside_dinf();
        let a = Word::parse(&q, "a").unwrap();
        let one = Word::parse(&q, "1").unwrap();
        assert_eq!(subgroup_agreement(&q, &p, &a, &a).unwrap(), (true, true));
        assert_eq!(subgroup_agreement(&q, &p, &a, &one).unwrap(), (false, false));
    }

    #[test]
    fn reduction_strategy_does_not_change_the_class() {
        let am = fixtures::pg_am();
        let p = am.pregroup();
        // all words of length <= 4 over the carrier
        let mut stack = vec![Vec::<usize>::new()];
        while let Some(word) = stack.pop() {
            if !word.is_empty() {
                let word = Word::from_indices(word.clone());
                let left = reduce(p, &word);
                let right = reduce_rightmost(p, &word);
                assert!(
                    equivalent(p, &left, &right),
                    "strategies diverge on {}",
                    word.render(p)
                );
            }
            if word.len() < 3 {
                for e in 0..p.size() {
                    let mut next = word.clone();
                    next.push(e);
                    stack.push(next);
                }
            }
        }
    }

    #[test]
    fn dihedral_ball_sizes() {
        let p = fixtures::pg_dinf();
        for n in 0..=4 {
            let elems = enumerate_elements(&p, n).unwrap();
            assert_eq!(elems.len(), 2 * n + 1, "ball of radius {n}");
        }
    }
}
