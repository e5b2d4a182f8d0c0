//! Nested index sets `M_k` as stopping rules over words.
//!
//! Words are sequences of 0-based symbol indices. For a graph-directed system
//! the symbols are edges and only paths are admissible; [`Alphabet`] abstracts
//! over both cases.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::QuadScalar;

pub type Word = Vec<usize>;

/// 1-based, dot-free rendering used in reports, e.g. `[1,3]` → `"13"` for
/// alphabets under ten symbols and `"1.3"` otherwise.
pub fn word_label(word: &[usize], alphabet_size: usize) -> String {
    let parts: Vec<String> = word.iter().map(|s| (s + 1).to_string()).collect();
    if alphabet_size < 10 {
        parts.concat()
    } else {
        parts.join(".")
    }
}

/// Symbols with contraction ratios, and which symbol may follow which.
pub trait Alphabet {
    fn len(&self) -> usize;
    fn ratio(&self, symbol: usize) -> &QuadScalar;
    /// Symbols that may be appended to a word ending in `state`.
    fn successors(&self, state: usize) -> &[usize];
    /// State reached after appending `symbol`.
    fn target(&self, symbol: usize) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Unrestricted alphabet of an ordinary IFS: a single state, every symbol allowed.
#[derive(Debug, Clone)]
pub struct FreeAlphabet {
    ratios: Vec<QuadScalar>,
    all: Vec<usize>,
}

impl FreeAlphabet {
    pub fn new(ratios: Vec<QuadScalar>) -> Result<FreeAlphabet> {
        check_contractive(&ratios)?;
        let all = (0..ratios.len()).collect();
        Ok(FreeAlphabet { ratios, all })
    }
}

pub(crate) fn check_contractive(ratios: &[QuadScalar]) -> Result<()> {
    for (i, r) in ratios.iter().enumerate() {
        if !r.is_positive() || *r >= QuadScalar::one() {
            return Err(Error::model(format!(
                "generator {} has non-contractive ratio {r}",
                i + 1
            )));
        }
    }
    Ok(())
}

impl Alphabet for FreeAlphabet {
    fn len(&self) -> usize {
        self.ratios.len()
    }
    fn ratio(&self, symbol: usize) -> &QuadScalar {
        &self.ratios[symbol]
    }
    fn successors(&self, _state: usize) -> &[usize] {
        &self.all
    }
    fn target(&self, _symbol: usize) -> usize {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IndexSetRule {
    /// `M_k` = all words of length `k`.
    FixedLength,
    /// `u ∈ M_k` iff `ρ_u ≤ base^k < ρ_{u⁻}`.
    RatioStopping(QuadScalar),
}

impl IndexSetRule {
    /// Fixed length for equal ratios, otherwise stopping at the largest ratio.
    pub fn default_for(ratios: &[QuadScalar]) -> IndexSetRule {
        match ratios.first() {
            Some(first) if ratios.iter().any(|r| r != first) => {
                IndexSetRule::RatioStopping(ratios.iter().max().expect("nonempty").clone())
            }
            _ => IndexSetRule::FixedLength,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let IndexSetRule::RatioStopping(b) = self {
            if !b.is_positive() || *b >= QuadScalar::one() {
                return Err(Error::model(format!("stopping base {b} must lie in (0,1)")));
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match self {
            IndexSetRule::FixedLength => "fixed_length".into(),
            IndexSetRule::RatioStopping(b) => format!("ratio_stopping(base = {b})"),
        }
    }
}

/// One step from a member of `M_k` to a member of `M_{k+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extension {
    /// Appended symbols; may be empty under ratio stopping (the word stays put).
    pub word: Word,
    /// `ρ_w`, the product of the appended ratios.
    pub ratio: QuadScalar,
    /// `ρ_{uw} / base^{k+1}` for ratio stopping, always 1 for fixed length.
    pub scale: QuadScalar,
    pub end_state: usize,
}

/// Hard cap on the length of a single extension word.
const MAX_EXTENSION_LEN: usize = 256;

/// All extensions of a word in `M_k` that ends in `state` and has relative
/// scale `scale = ρ_u / base^k`, in lexicographic order of the appended word.
pub fn extensions<A: Alphabet + ?Sized>(
    rule: &IndexSetRule,
    alphabet: &A,
    state: usize,
    scale: &QuadScalar,
) -> Result<Vec<Extension>> {
    match rule {
        IndexSetRule::FixedLength => Ok(alphabet
            .successors(state)
            .iter()
            .map(|&s| Extension {
                word: vec![s],
                ratio: alphabet.ratio(s).clone(),
                scale: QuadScalar::one(),
                end_state: alphabet.target(s),
            })
            .collect()),
        IndexSetRule::RatioStopping(base) => {
            if scale <= base {
                return Ok(vec![Extension {
                    word: vec![],
                    ratio: QuadScalar::one(),
                    scale: scale / base,
                    end_state: state,
                }]);
            }
            let mut out = Vec::new();
            let mut stack = Vec::new();
            stop_dfs(
                alphabet,
                base,
                state,
                scale,
                &QuadScalar::one(),
                &mut stack,
                &mut out,
            )?;
            Ok(out)
        }
    }
}

fn stop_dfs<A: Alphabet + ?Sized>(
    alphabet: &A,
    base: &QuadScalar,
    state: usize,
    scale: &QuadScalar,
    ratio: &QuadScalar,
    word: &mut Word,
    out: &mut Vec<Extension>,
) -> Result<()> {
    if word.len() >= MAX_EXTENSION_LEN {
        return Err(Error::Resource(format!(
            "extension word longer than {MAX_EXTENSION_LEN} symbols"
        )));
    }
    for &s in alphabet.successors(state) {
        let r = ratio * alphabet.ratio(s);
        let rel = scale * &r;
        word.push(s);
        if rel <= *base {
            out.push(Extension {
                word: word.clone(),
                ratio: r,
                scale: rel / base,
                end_state: alphabet.target(s),
            });
        } else {
            stop_dfs(alphabet, base, alphabet.target(s), scale, &r, word, out)?;
        }
        word.pop();
    }
    Ok(())
}

fn word_ratio<A: Alphabet + ?Sized>(alphabet: &A, word: &[usize]) -> QuadScalar {
    word.iter()
        .fold(QuadScalar::one(), |acc, &s| acc * alphabet.ratio(s))
}

fn is_path<A: Alphabet + ?Sized>(alphabet: &A, start: usize, word: &[usize]) -> bool {
    let mut state = start;
    for &s in word {
        if !alphabet.successors(state).contains(&s) {
            return false;
        }
        state = alphabet.target(s);
    }
    true
}

/// Membership by the defining inequality, without any incremental state.
pub fn is_member<A: Alphabet + ?Sized>(
    rule: &IndexSetRule,
    alphabet: &A,
    word: &[usize],
    k: usize,
) -> bool {
    match rule {
        IndexSetRule::FixedLength => word.len() == k,
        IndexSetRule::RatioStopping(base) => {
            let threshold = base.pow(k as u32);
            if word_ratio(alphabet, word) > threshold {
                return false;
            }
            match word.split_last() {
                None => k == 0,
                Some((_, parent)) => word_ratio(alphabet, parent) > threshold,
            }
        }
    }
}

/// The words `v ∈ M_{k+1}` extending `u ∈ M_k`.
pub fn children_in_next<A: Alphabet + ?Sized>(
    u: &[usize],
    k: usize,
    start: usize,
    rule: &IndexSetRule,
    alphabet: &A,
) -> Result<Vec<Word>> {
    rule.validate()?;
    if !is_path(alphabet, start, u) || !is_member(rule, alphabet, u, k) {
        return Err(Error::model(format!(
            "word {} is not in M_{k} under {}",
            word_label(u, alphabet.len()),
            rule.describe()
        )));
    }
    let state = u
        .iter()
        .last()
        .map(|&s| alphabet.target(s))
        .unwrap_or(start);
    let scale = match rule {
        IndexSetRule::FixedLength => QuadScalar::one(),
        IndexSetRule::RatioStopping(base) => word_ratio(alphabet, u) / base.pow(k as u32),
    };
    Ok(extensions(rule, alphabet, state, &scale)?
        .into_iter()
        .map(|e| {
            let mut v = u.to_vec();
            v.extend(e.word);
            v
        })
        .collect())
}

/// `M_k` restricted to paths leaving `start`, enumerated from the defining
/// inequality and sorted.
pub fn index_set<A: Alphabet + ?Sized>(
    rule: &IndexSetRule,
    alphabet: &A,
    start: usize,
    k: usize,
    budget: usize,
) -> Result<Vec<Word>> {
    let mut out = Vec::new();
    let threshold = match rule {
        IndexSetRule::RatioStopping(base) => Some(base.pow(k as u32)),
        IndexSetRule::FixedLength => None,
    };
    let mut word = Vec::new();
    enumerate(
        alphabet,
        start,
        k,
        threshold.as_ref(),
        &QuadScalar::one(),
        &mut word,
        &mut out,
        budget,
    )?;
    out.sort();
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn enumerate<A: Alphabet + ?Sized>(
    alphabet: &A,
    state: usize,
    k: usize,
    threshold: Option<&QuadScalar>,
    ratio: &QuadScalar,
    word: &mut Word,
    out: &mut Vec<Word>,
    budget: usize,
) -> Result<()> {
    let done = match threshold {
        None => word.len() == k,
        Some(t) => ratio <= t,
    };
    if done {
        if out.len() >= budget {
            return Err(Error::Resource(format!("index set exceeds {budget} words")));
        }
        out.push(word.clone());
        return Ok(());
    }
    for &s in alphabet.successors(state) {
        word.push(s);
        let r = ratio * alphabet.ratio(s);
        enumerate(
            alphabet,
            alphabet.target(s),
            k,
            threshold,
            &r,
            word,
            out,
            budget,
        )?;
        word.pop();
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct NestedReport {
    pub rule: String,
    pub depth: usize,
    pub min_lengths: Vec<usize>,
    pub max_lengths: Vec<usize>,
    /// Largest `|v| − |u|` seen for `u ∈ M_k`, `u ⪯ v ∈ M_{k+1}`.
    pub gap_bound: usize,
    pub violations: Vec<String>,
}

impl NestedReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check conditions (a)–(e) of a nested index sequence for `k ≤ depth`, by
/// exhaustive enumeration from each start state.
pub fn validate_nested_properties<A: Alphabet + ?Sized>(
    rule: &IndexSetRule,
    alphabet: &A,
    starts: &[usize],
    depth: usize,
) -> Result<NestedReport> {
    if depth == 0 {
        return Err(Error::model("validation depth must be at least 1"));
    }
    rule.validate()?;
    const BUDGET: usize = 2_000_000;
    let n = alphabet.len();
    let mut report = NestedReport {
        rule: rule.describe(),
        depth,
        min_lengths: Vec::new(),
        max_lengths: Vec::new(),
        gap_bound: 0,
        violations: Vec::new(),
    };
    let mut levels: Vec<Vec<(usize, Word)>> = Vec::new();
    for k in 0..=depth + 1 {
        let mut level = Vec::new();
        for &s in starts {
            for w in index_set(rule, alphabet, s, k, BUDGET)? {
                level.push((s, w));
            }
        }
        levels.push(level);
    }
    for k in 0..=depth {
        let level = &levels[k];
        let set: HashSet<&(usize, Word)> = level.iter().collect();
        let min = level.iter().map(|(_, w)| w.len()).min().unwrap_or(0);
        let max = level.iter().map(|(_, w)| w.len()).max().unwrap_or(0);
        if let (Some(&pmin), Some(&pmax)) = (report.min_lengths.last(), report.max_lengths.last()) {
            if min < pmin || max < pmax {
                report
                    .violations
                    .push(format!("(a) word lengths of M_{k} decrease"));
            }
        }
        report.min_lengths.push(min);
        report.max_lengths.push(max);

        for w in level.windows(2) {
            let (s0, a) = &w[0];
            let (s1, b) = &w[1];
            if s0 == s1 && b.starts_with(a) {
                report.violations.push(format!(
                    "(b) M_{k} is not an antichain: {} is a prefix of {}",
                    word_label(a, n),
                    word_label(b, n)
                ));
            }
        }

        let prefixes: HashSet<(usize, &[usize])> = level
            .iter()
            .flat_map(|(s, w)| (0..=w.len()).map(move |i| (*s, &w[..i])))
            .collect();
        for &s in starts {
            let mut stack: Vec<(usize, Word)> = vec![(s, vec![])];
            let mut visited = 0usize;
            while let Some((state, w)) = stack.pop() {
                visited += 1;
                if visited > BUDGET {
                    return Err(Error::Resource("covering check exceeds budget".into()));
                }
                if w.len() < min && !prefixes.contains(&(s, w.as_slice())) {
                    report.violations.push(format!(
                        "(d) {} has no extension in M_{k}",
                        word_label(&w, n)
                    ));
                }
                if set.contains(&(s, w.clone())) {
                    continue;
                }
                if w.len() > max {
                    report
                        .violations
                        .push(format!("(c) {} has no prefix in M_{k}", word_label(&w, n)));
                    continue;
                }
                for &sym in alphabet.successors(state) {
                    let mut next = w.clone();
                    next.push(sym);
                    stack.push((alphabet.target(sym), next));
                }
            }
        }

        let next_level = &levels[k + 1];
        let mut expected: BTreeSet<(usize, Word)> = BTreeSet::new();
        for (s, v) in next_level {
            let parent = (0..=v.len())
                .rev()
                .find(|&i| set.contains(&(*s, v[..i].to_vec())));
            match parent {
                Some(i) => {
                    report.gap_bound = report.gap_bound.max(v.len() - i);
                    expected.insert((*s, v.clone()));
                }
                None => report.violations.push(format!(
                    "(e) {} in M_{} has no prefix in M_{k}",
                    word_label(v, n),
                    k + 1
                )),
            }
        }
        let mut produced: BTreeSet<(usize, Word)> = BTreeSet::new();
        for (s, u) in level {
            for v in children_in_next(u, k, *s, rule, alphabet)? {
                produced.insert((*s, v));
            }
        }
        if produced != expected {
            report.violations.push(format!(
                "incremental children of M_{k} disagree with M_{}",
                k + 1
            ));
        }
    }
    report.violations.dedup();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Field;

    fn golden() -> (QuadScalar, FreeAlphabet) {
        let rho = QuadScalar::parse("-1/2 + 1/2*sqrt(5)", Field::Quadratic(5)).unwrap();
        let alpha = FreeAlphabet::new(vec![rho.clone(), rho.clone(), rho.pow(2)]).unwrap();
        (rho, alpha)
    }

    /// Brute force: every word up to length `max_len` tested by the inequality.
    fn brute_children(
        u: &[usize],
        k: usize,
        rule: &IndexSetRule,
        alphabet: &FreeAlphabet,
        max_len: usize,
    ) -> BTreeSet<Word> {
        let mut out = BTreeSet::new();
        let mut frontier = vec![u.to_vec()];
        while let Some(w) = frontier.pop() {
            if is_member(rule, alphabet, &w, k + 1) {
                out.insert(w.clone());
            }
            if w.len() < max_len {
                for s in 0..alphabet.len() {
                    let mut v = w.clone();
                    v.push(s);
                    frontier.push(v);
                }
            }
        }
        out
    }

    #[test]
    fn fixed_length_children() {
        let a = FreeAlphabet::new(vec![QuadScalar::ratio(1, 2); 3]).unwrap();
        let kids = children_in_next(&[0], 1, 0, &IndexSetRule::FixedLength, &a).unwrap();
        assert_eq!(kids, vec![vec![0, 0], vec![0, 1], vec![0, 2]]);
    }

    #[test]
    fn golden_children_match_brute_force() {
        let (rho, a) = golden();
        let rule = IndexSetRule::RatioStopping(rho);
        assert!(is_member(&rule, &a, &[2], 2));
        assert!(is_member(&rule, &a, &[2], 1));
        let kids = children_in_next(&[2], 2, 0, &rule, &a).unwrap();
        assert_eq!(kids, vec![vec![2, 0], vec![2, 1], vec![2, 2]]);
        let want = brute_children(&[2], 2, &rule, &a, 6);
        assert_eq!(kids.into_iter().collect::<BTreeSet<_>>(), want);
        for k in 0..5 {
            for u in index_set(&rule, &a, 0, k, 10_000).unwrap() {
                let got: BTreeSet<Word> = children_in_next(&u, k, 0, &rule, &a)
                    .unwrap()
                    .into_iter()
                    .collect();
                assert_eq!(
                    got,
                    brute_children(&u, k, &rule, &a, u.len() + 3),
                    "u = {u:?}, k = {k}"
                );
            }
        }
    }

    #[test]
    fn stays_in_place_when_already_small_enough() {
        let (rho, a) = golden();
        let rule = IndexSetRule::RatioStopping(rho);
        assert_eq!(
            children_in_next(&[2], 1, 0, &rule, &a).unwrap(),
            vec![vec![2]]
        );
    }

    #[test]
    fn homogeneous_stopping_is_fixed_length() {
        let half = QuadScalar::ratio(1, 2);
        let a = FreeAlphabet::new(vec![half.clone(); 3]).unwrap();
        let stop = IndexSetRule::RatioStopping(half);
        for k in 0..4 {
            assert_eq!(
                index_set(&stop, &a, 0, k, 1000).unwrap(),
                index_set(&IndexSetRule::FixedLength, &a, 0, k, 1000).unwrap()
            );
        }
        let kids = children_in_next(&[1, 2], 2, 0, &stop, &a).unwrap();
        assert_eq!(kids, vec![vec![1, 2, 0], vec![1, 2, 1], vec![1, 2, 2]]);
    }

    #[test]
    fn non_member_rejected() {
        let (rho, a) = golden();
        let rule = IndexSetRule::RatioStopping(rho);
        assert!(children_in_next(&[0], 2, 0, &rule, &a).is_err());
        assert!(FreeAlphabet::new(vec![QuadScalar::ratio(3, 2)]).is_err());
    }

    #[test]
    fn default_rule() {
        let (rho, a) = golden();
        let ratios: Vec<QuadScalar> = (0..a.len()).map(|s| a.ratio(s).clone()).collect();
        assert_eq!(
            IndexSetRule::default_for(&ratios),
            IndexSetRule::RatioStopping(rho)
        );
        assert_eq!(
            IndexSetRule::default_for(&vec![QuadScalar::ratio(1, 3); 4]),
            IndexSetRule::FixedLength
        );
    }

    #[test]
    fn nested_properties_fixed_length() {
        let a = FreeAlphabet::new(vec![QuadScalar::ratio(1, 3); 4]).unwrap();
        let report = validate_nested_properties(&IndexSetRule::FixedLength, &a, &[0], 4).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
        assert_eq!(report.gap_bound, 1);
        assert_eq!(report.max_lengths, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn nested_properties_golden() {
        let (rho, a) = golden();
        let report =
            validate_nested_properties(&IndexSetRule::RatioStopping(rho), &a, &[0], 5).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
        // scales alternate between 1 and ρ, so one symbol always suffices
        assert_eq!(report.gap_bound, 1);
    }

    #[test]
    fn nested_properties_mixed_thirds_and_halves() {
        let a = FreeAlphabet::new(vec![QuadScalar::ratio(1, 2), QuadScalar::ratio(1, 3)]).unwrap();
        let report = validate_nested_properties(
            &IndexSetRule::RatioStopping(QuadScalar::ratio(1, 2)),
            &a,
            &[0],
            6,
        )
        .unwrap();
        // every ratio is at most the base, so one symbol always suffices
        assert!(report.passed(), "{:?}", report.violations);
        assert_eq!(report.gap_bound, 1);
    }

    #[test]
    fn labels() {
        assert_eq!(word_label(&[0, 2], 3), "13");
        assert_eq!(word_label(&[0, 10], 12), "1.11");
        assert_eq!(word_label(&[], 3), "");
    }
}
