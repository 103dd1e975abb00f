//! Permutations, profiles, fixing subgroups and their cosets.
//!
//! A ranking is stored as a word: `word[r - 1]` is the name of the
//! alternative placed at rank `r`. Composition follows
//! `compose(x, y)(r) = x(y(r))`. Cosets of a fixing subgroup `H` are taken on
//! the rank side, `y∘H = {compose(y, h) : h ∈ H}`: two rankings share a coset
//! exactly when every block of rank positions holds the same set of names.

use std::collections::HashMap;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `m` for which the full group is ever enumerated.
pub const MAX_ENUM_M: usize = 10;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    word: Vec<u8>,
}

impl Permutation {
    pub fn from_word(word: Vec<u8>) -> Result<Self> {
        let m = word.len();
        let text = || format!("{word:?}");
        if m == 0 {
            return Err(Error::Format {
                text: text(),
                reason: "empty".into(),
            });
        }
        let mut seen = vec![false; m + 1];
        for &w in &word {
            let w = w as usize;
            if w == 0 || w > m {
                return Err(Error::Format {
                    text: text(),
                    reason: format!("symbol {w} outside 1..={m}"),
                });
            }
            if seen[w] {
                return Err(Error::Format {
                    text: text(),
                    reason: format!("duplicate symbol {w}"),
                });
            }
            seen[w] = true;
        }
        Ok(Permutation { word })
    }

    pub fn identity(m: usize) -> Self {
        Permutation {
            word: (1..=m as u8).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.word.len()
    }

    pub fn word(&self) -> &[u8] {
        &self.word
    }

    /// Name placed at `rank` (1-based).
    pub fn at(&self, rank: usize) -> usize {
        self.word[rank - 1] as usize
    }

    /// Rank held by `name` (1-based), i.e. `x⁻¹(name)`.
    pub fn rank_of(&self, name: usize) -> usize {
        self.word.iter().position(|&w| w as usize == name).unwrap() + 1
    }

    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        compose(self, other)
    }

    pub fn inverse(&self) -> Permutation {
        inverse(self)
    }

    pub fn fixed_points(&self) -> usize {
        self.word
            .iter()
            .enumerate()
            .filter(|(r, &w)| *r + 1 == w as usize)
            .count()
    }

    /// Position in lexicographic order (Lehmer code).
    pub fn lex_index(&self) -> usize {
        let m = self.m();
        let mut idx = 0;
        for i in 0..m {
            let smaller = self.word[i + 1..]
                .iter()
                .filter(|&&w| w < self.word[i])
                .count();
            idx = idx * (m - i) + smaller;
        }
        idx
    }

    pub fn from_lex_index(m: usize, mut idx: usize) -> Permutation {
        let mut digits = vec![0usize; m];
        for i in (0..m).rev() {
            let base = m - i;
            digits[i] = idx % base;
            idx /= base;
        }
        let mut pool: Vec<u8> = (1..=m as u8).collect();
        let word = digits.into_iter().map(|d| pool.remove(d)).collect();
        Permutation { word }
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.m() <= 9 {
            for w in &self.word {
                write!(f, "{w}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.word.iter().map(|w| w.to_string()).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation({self})")
    }
}

impl Serialize for Permutation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_any(&text).map_err(serde::de::Error::custom)
    }
}

/// Parses a literal of the expected size: digits for `m ≤ 9`, otherwise
/// comma-separated integers.
pub fn parse_perm(text: &str, m: usize) -> Result<Permutation> {
    let p = parse_any(text)?;
    if p.m() != m {
        return Err(Error::Format {
            text: text.into(),
            reason: format!("expected {m} symbols, found {}", p.m()),
        });
    }
    Ok(p)
}

/// Parses a literal, inferring `m` from its length.
pub fn parse_any(text: &str) -> Result<Permutation> {
    let t = text.trim();
    let bad = |reason: String| Error::Format {
        text: text.into(),
        reason,
    };
    let symbols: Vec<usize> = if t.contains(',') {
        t.split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|e| bad(e.to_string())))
            .collect::<Result<_>>()?
    } else {
        t.chars()
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as usize)
                    .ok_or_else(|| bad(format!("non-digit {c:?}")))
            })
            .collect::<Result<_>>()?
    };
    if symbols.iter().any(|&s| s > u8::MAX as usize) {
        return Err(bad("symbol too large".into()));
    }
    Permutation::from_word(symbols.into_iter().map(|s| s as u8).collect()).map_err(|e| match e {
        Error::Format { reason, .. } => bad(reason),
        other => other,
    })
}

/// `compose(x, y)(r) = x(y(r))`.
pub fn compose(x: &Permutation, y: &Permutation) -> Result<Permutation> {
    if x.m() != y.m() {
        return Err(Error::Shape(format!(
            "cannot compose permutations of sizes {} and {}",
            x.m(),
            y.m()
        )));
    }
    Ok(Permutation {
        word: y.word.iter().map(|&r| x.word[r as usize - 1]).collect(),
    })
}

pub fn inverse(x: &Permutation) -> Permutation {
    let mut word = vec![0u8; x.m()];
    for (r, &name) in x.word.iter().enumerate() {
        word[name as usize - 1] = (r + 1) as u8;
    }
    Permutation { word }
}

pub fn factorial(m: usize) -> usize {
    (1..=m).product()
}

fn check_m(m: usize) -> Result<()> {
    if !(2..=MAX_ENUM_M).contains(&m) {
        return Err(Error::OutOfRange {
            m,
            min: 2,
            max: MAX_ENUM_M,
        });
    }
    Ok(())
}

/// All of `S_m` in lexicographic order, `2 ≤ m ≤ MAX_ENUM_M`.
pub fn enumerate_group(m: usize) -> Result<Vec<Permutation>> {
    check_m(m)?;
    Ok((0..factorial(m))
        .map(|i| Permutation::from_lex_index(m, i))
        .collect())
}

/// `S_m` with lookup tables indexed by lexicographic position.
#[derive(Clone, Debug)]
pub struct SymmetricGroup {
    m: usize,
    elements: Vec<Permutation>,
    /// `ranks[x][j - 1] = x⁻¹(j)`.
    ranks: Vec<Vec<u8>>,
}

impl SymmetricGroup {
    pub fn new(m: usize) -> Result<Self> {
        let elements = enumerate_group(m)?;
        let ranks = elements.iter().map(|x| inverse(x).word).collect();
        Ok(SymmetricGroup { m, elements, ranks })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Permutation] {
        &self.elements
    }

    pub fn get(&self, idx: usize) -> &Permutation {
        &self.elements[idx]
    }

    pub fn index_of(&self, x: &Permutation) -> usize {
        x.lex_index()
    }

    /// Rank of alternative `j` (1-based) in element `idx`.
    pub fn rank(&self, idx: usize, j: usize) -> usize {
        self.ranks[idx][j - 1] as usize
    }

    pub fn compose_idx(&self, x: usize, y: usize) -> usize {
        compose(&self.elements[x], &self.elements[y])
            .unwrap()
            .lex_index()
    }
}

/// One ranking per voter.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Profile {
    pub votes: Vec<Permutation>,
}

impl Profile {
    pub fn new(votes: Vec<Permutation>) -> Result<Self> {
        let Some(first) = votes.first() else {
            return Err(Error::Shape("a profile needs at least one voter".into()));
        };
        if votes.iter().any(|v| v.m() != first.m()) {
            return Err(Error::Shape("voters rank different numbers of alternatives".into()));
        }
        Ok(Profile { votes })
    }

    pub fn n(&self) -> usize {
        self.votes.len()
    }

    pub fn m(&self) -> usize {
        self.votes[0].m()
    }
}

/// Mixed-radix indexing of `S_m^n`; voter 1 is the most significant digit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProfileSpace {
    pub group_order: usize,
    pub n: usize,
    pub size: usize,
}

impl ProfileSpace {
    pub fn new(group_order: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Shape("n must be at least 1".into()));
        }
        let size = (0..n)
            .try_fold(1usize, |acc, _| acc.checked_mul(group_order))
            .ok_or_else(|| Error::budget("profile enumeration", (group_order as f64).powi(n as i32), usize::MAX as f64))?;
        Ok(ProfileSpace {
            group_order,
            n,
            size,
        })
    }

    /// Place value of voter `i` (0-based).
    pub fn weight(&self, i: usize) -> usize {
        self.group_order.pow((self.n - 1 - i) as u32)
    }

    pub fn digit(&self, idx: usize, i: usize) -> usize {
        (idx / self.weight(i)) % self.group_order
    }

    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for i in (0..self.n).rev() {
            out[i] = idx % self.group_order;
            idx /= self.group_order;
        }
        out
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &d| acc * self.group_order + d)
    }

    /// Index of the profile obtained by replacing voter `i`'s ranking.
    pub fn with_voter(&self, idx: usize, i: usize, elem: usize) -> usize {
        let w = self.weight(i);
        idx - self.digit(idx, i) * w + elem * w
    }
}

/// Distribution over ranks of one alternative inside a coset, stored as
/// counts over the common denominator `|H|`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RankProfile {
    pub counts: Vec<u32>,
    pub denom: u32,
}

impl RankProfile {
    pub fn vector(&self) -> Vec<Ratio<i64>> {
        self.counts
            .iter()
            .map(|&c| Ratio::new(c as i64, self.denom as i64))
            .collect()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.denom as f64)
            .collect()
    }

    /// Squared Euclidean distance between two profile vectors.
    pub fn dist2(&self, other: &RankProfile) -> f64 {
        self.as_f64()
            .iter()
            .zip(other.as_f64())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

impl Serialize for RankProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<String> = self.vector().iter().map(|r| r.to_string()).collect();
        v.serialize(s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Coset {
    pub representative: Permutation,
    pub members: Vec<Permutation>,
}

/// Subgroup of rankings that permute rank positions within each block of a
/// partition of `[m]`.
#[derive(Clone, Debug)]
pub struct FixingSubgroup {
    m: usize,
    partition: Vec<Vec<usize>>,
    block_of: Vec<usize>,
    members: Vec<Permutation>,
    cosets: Vec<Coset>,
    /// Coset id of each element of `S_m`, by lexicographic index.
    coset_of: Vec<u32>,
    /// `profile_ids[k][j - 1]` indexes into `profiles[j - 1]`.
    profile_ids: Vec<Vec<u32>>,
    profiles: Vec<Vec<RankProfile>>,
}

impl FixingSubgroup {
    pub fn new(m: usize, partition: &[Vec<usize>]) -> Result<Self> {
        check_m(m)?;
        let partition = normalize_partition(m, partition)?;
        let mut block_of = vec![0usize; m];
        for (b, block) in partition.iter().enumerate() {
            for &r in block {
                block_of[r - 1] = b;
            }
        }
        let group = enumerate_group(m)?;
        let members: Vec<Permutation> = group
            .iter()
            .filter(|h| (1..=m).all(|r| block_of[h.at(r) - 1] == block_of[r - 1]))
            .cloned()
            .collect();

        let mut by_rep: HashMap<Vec<u8>, u32> = HashMap::new();
        let mut reps: Vec<Permutation> = Vec::new();
        let mut coset_of = vec![0u32; group.len()];
        for (i, y) in group.iter().enumerate() {
            let rep = canonical_rep(y, &partition);
            let next = reps.len() as u32;
            let id = *by_rep.entry(rep.word.clone()).or_insert_with(|| {
                reps.push(rep);
                next
            });
            coset_of[i] = id;
        }
        // Representatives appear in lexicographic order because each is the
        // least member of its coset and the group is scanned in order.
        let mut cosets: Vec<Coset> = reps
            .into_iter()
            .map(|representative| Coset {
                representative,
                members: Vec::new(),
            })
            .collect();
        for (i, y) in group.iter().enumerate() {
            cosets[coset_of[i] as usize].members.push(y.clone());
        }

        let h = members.len() as u32;
        let mut profiles: Vec<Vec<RankProfile>> = vec![Vec::new(); m];
        let mut profile_ids = vec![vec![0u32; m]; cosets.len()];
        for j in 1..=m {
            let raw: Vec<RankProfile> = cosets
                .iter()
                .map(|c| {
                    let mut counts = vec![0u32; m];
                    for y in &c.members {
                        counts[y.rank_of(j) - 1] += 1;
                    }
                    RankProfile { counts, denom: h }
                })
                .collect();
            let mut distinct = raw.clone();
            distinct.sort();
            distinct.dedup();
            for (k, p) in raw.iter().enumerate() {
                profile_ids[k][j - 1] = distinct.binary_search(p).unwrap() as u32;
            }
            profiles[j - 1] = distinct;
        }

        Ok(FixingSubgroup {
            m,
            partition,
            block_of,
            members,
            cosets,
            coset_of,
            profile_ids,
            profiles,
        })
    }

    /// All-singletons partition: the trivial group, whose aggregators rank
    /// every alternative.
    pub fn trivial(m: usize) -> Result<Self> {
        Self::new(m, &(1..=m).map(|r| vec![r]).collect::<Vec<_>>())
    }

    /// `{1} | {2..m}`: aggregators that only name a winner.
    pub fn winner(m: usize) -> Result<Self> {
        Self::new(m, &[vec![1], (2..=m).collect()])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn partition(&self) -> &[Vec<usize>] {
        &self.partition
    }

    pub fn block_of_rank(&self, rank: usize) -> usize {
        self.block_of[rank - 1]
    }

    pub fn members(&self) -> &[Permutation] {
        &self.members
    }

    pub fn order(&self) -> usize {
        self.members.len()
    }

    pub fn cosets(&self) -> &[Coset] {
        &self.cosets
    }

    pub fn coset_count(&self) -> usize {
        self.cosets.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.members.len() == 1
    }

    /// Coset id of the element with lexicographic index `idx`.
    pub fn coset_of_index(&self, idx: usize) -> usize {
        self.coset_of[idx] as usize
    }

    pub fn coset_of(&self, y: &Permutation) -> usize {
        self.coset_of[y.lex_index()] as usize
    }

    pub fn coset_id_of_rep(&self, rep: &Permutation) -> Option<usize> {
        if rep.m() != self.m {
            return None;
        }
        let k = self.coset_of(rep);
        (self.cosets[k].representative == *rep).then_some(k)
    }

    pub fn j_profile(&self, coset: usize, j: usize) -> &RankProfile {
        &self.profiles[j - 1][self.profile_ids[coset][j - 1] as usize]
    }

    /// Identifier of the `j`-profile of a coset among the distinct
    /// `j`-profiles.
    pub fn profile_id(&self, coset: usize, j: usize) -> usize {
        self.profile_ids[coset][j - 1] as usize
    }

    /// Distinct `j`-profiles, sorted.
    pub fn distinct_profiles(&self, j: usize) -> &[RankProfile] {
        &self.profiles[j - 1]
    }
}

/// Least member of `y∘H`: names sorted ascending within each block.
fn canonical_rep(y: &Permutation, partition: &[Vec<usize>]) -> Permutation {
    let mut word = y.word.clone();
    for block in partition {
        let mut names: Vec<u8> = block.iter().map(|&r| y.word[r - 1]).collect();
        names.sort_unstable();
        for (&r, name) in block.iter().zip(names) {
            word[r - 1] = name;
        }
    }
    Permutation { word }
}

fn normalize_partition(m: usize, partition: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
    let mut seen = vec![false; m];
    let mut out = Vec::with_capacity(partition.len());
    for block in partition {
        if block.is_empty() {
            return Err(Error::Partition("empty block".into()));
        }
        let mut b = block.clone();
        b.sort_unstable();
        for &r in &b {
            if r == 0 || r > m {
                return Err(Error::Partition(format!("rank {r} outside 1..={m}")));
            }
            if seen[r - 1] {
                return Err(Error::Partition(format!("rank {r} appears twice")));
            }
            seen[r - 1] = true;
        }
        out.push(b);
    }
    if let Some(r) = seen.iter().position(|s| !s) {
        return Err(Error::Partition(format!("rank {} is not covered", r + 1)));
    }
    if out.len() < 2 {
        return Err(Error::Partition(
            "a single block gives the whole group and carries no ranking information".into(),
        ));
    }
    out.sort();
    Ok(out)
}

/// Parses `"1|2,3"` into `[[1], [2, 3]]`.
pub fn parse_partition(text: &str) -> Result<Vec<Vec<usize>>> {
    text.split('|')
        .map(|block| {
            block
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Partition(format!("{text:?}: {e}")))
                })
                .collect()
        })
        .collect()
}

pub fn format_partition(partition: &[Vec<usize>]) -> String {
    partition
        .iter()
        .map(|b| {
            b.iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("|")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Permutation {
        parse_any(s).unwrap()
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_perm("123", 3).unwrap(), Permutation::identity(3));
        let x = parse_perm("231", 3).unwrap();
        assert_eq!((x.at(1), x.at(2), x.at(3)), (2, 3, 1));
        assert!(matches!(parse_perm("221", 3), Err(Error::Format { .. })));
        assert!(parse_perm("124", 3).is_err());
        assert!(parse_perm("12", 3).is_err());
        let big = parse_perm("10,9,8,7,6,5,4,3,2,1", 10).unwrap();
        assert_eq!(big.to_string(), "10,9,8,7,6,5,4,3,2,1");
    }

    #[test]
    fn compose_and_inverse_examples() {
        assert_eq!(compose(&p("213"), &p("231")).unwrap(), p("132"));
        assert_eq!(compose(&Permutation::identity(3), &p("231")).unwrap(), p("231"));
        assert_eq!(inverse(&p("231")), p("312"));
        assert_eq!(inverse(&Permutation::identity(4)), Permutation::identity(4));
        assert!(compose(&p("12"), &p("123")).is_err());
    }

    #[test]
    fn inverse_of_composition_exhaustive() {
        for m in 2..=4 {
            let g = enumerate_group(m).unwrap();
            for x in &g {
                assert_eq!(compose(x, &inverse(x)).unwrap(), Permutation::identity(m));
                assert_eq!(inverse(&inverse(x)), *x);
                for y in &g {
                    let lhs = compose(&inverse(y), &inverse(x)).unwrap();
                    assert_eq!(lhs, inverse(&compose(x, y).unwrap()));
                }
            }
        }
    }

    #[test]
    fn enumeration_order_and_bounds() {
        let g = enumerate_group(3).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], p("123"));
        assert_eq!(g[5], p("321"));
        assert_eq!(enumerate_group(4).unwrap().len(), 24);
        assert!(enumerate_group(1).is_err());
        assert!(enumerate_group(MAX_ENUM_M + 1).is_err());
        for (i, x) in enumerate_group(5).unwrap().iter().enumerate() {
            assert_eq!(x.lex_index(), i);
        }
    }

    #[test]
    fn subgroup_sizes() {
        let swf = FixingSubgroup::new(3, &[vec![1], vec![2], vec![3]]).unwrap();
        assert_eq!((swf.order(), swf.coset_count()), (1, 6));
        let scf = FixingSubgroup::new(3, &[vec![1], vec![2, 3]]).unwrap();
        assert_eq!((scf.order(), scf.coset_count()), (2, 3));
        let mid = FixingSubgroup::new(4, &[vec![1], vec![2, 3], vec![4]]).unwrap();
        assert_eq!((mid.order(), mid.coset_count()), (2, 12));
    }

    #[test]
    fn invalid_partitions() {
        assert!(FixingSubgroup::new(3, &[vec![1], vec![2]]).is_err());
        assert!(FixingSubgroup::new(3, &[vec![1, 2], vec![2, 3]]).is_err());
        assert!(FixingSubgroup::new(3, &[vec![1], vec![], vec![2, 3]]).is_err());
        assert!(FixingSubgroup::new(3, &[vec![1, 2, 3]]).is_err());
        assert!(FixingSubgroup::new(3, &[vec![0], vec![1, 2, 3]]).is_err());
    }

    #[test]
    fn subgroup_laws_and_coset_partition() {
        for m in 2..=5 {
            let parts: Vec<Vec<Vec<usize>>> = vec![
                (1..=m).map(|r| vec![r]).collect(),
                vec![vec![1], (2..=m).collect()],
                vec![(1..m).collect(), vec![m]],
            ];
            for part in parts {
                let h = FixingSubgroup::new(m, &part).unwrap();
                let expected: usize = h.partition().iter().map(|b| factorial(b.len())).product();
                assert_eq!(h.order(), expected);
                let set: std::collections::HashSet<_> = h.members().iter().cloned().collect();
                assert!(set.contains(&Permutation::identity(m)));
                for a in h.members() {
                    assert!(set.contains(&inverse(a)));
                    for b in h.members() {
                        assert!(set.contains(&compose(a, b).unwrap()));
                    }
                }
                let total: usize = h.cosets().iter().map(|c| c.members.len()).sum();
                assert_eq!(total, factorial(m));
                for (k, c) in h.cosets().iter().enumerate() {
                    assert_eq!(c.members.len(), h.order());
                    assert_eq!(c.representative, *c.members.iter().min().unwrap());
                    for y in &c.members {
                        assert_eq!(h.coset_of(y), k);
                        let diff = compose(&inverse(&c.representative), y).unwrap();
                        assert!(set.contains(&diff));
                    }
                    for j in 1..=m {
                        let prof = h.j_profile(k, j);
                        assert_eq!(prof.counts.iter().sum::<u32>(), prof.denom);
                    }
                }
            }
        }
    }

    #[test]
    fn winner_profiles() {
        let h = FixingSubgroup::winner(3).unwrap();
        for k in 1..=3 {
            let coset = h
                .cosets()
                .iter()
                .position(|c| c.representative.at(1) == k)
                .unwrap();
            for j in 1..=3 {
                let v = h.j_profile(coset, j).vector();
                let expect: Vec<Ratio<i64>> = if j == k {
                    vec![1.into(), 0.into(), 0.into()]
                } else {
                    vec![0.into(), Ratio::new(1, 2), Ratio::new(1, 2)]
                };
                assert_eq!(v, expect);
            }
        }
    }

    #[test]
    fn trivial_profiles_are_unit_vectors() {
        let h = FixingSubgroup::trivial(4).unwrap();
        for (k, c) in h.cosets().iter().enumerate() {
            for j in 1..=4 {
                let mut e = vec![0u32; 4];
                e[c.representative.rank_of(j) - 1] = 1;
                assert_eq!(h.j_profile(k, j).counts, e);
            }
        }
    }

    #[test]
    fn profile_space_roundtrip() {
        let s = ProfileSpace::new(6, 3).unwrap();
        assert_eq!(s.size, 216);
        for idx in 0..s.size {
            let d = s.decode(idx);
            assert_eq!(s.encode(&d), idx);
            assert_eq!(s.with_voter(idx, 1, 4), s.encode(&[d[0], 4, d[2]]));
        }
    }

    #[test]
    fn partition_text() {
        let p = parse_partition("1|2,3").unwrap();
        assert_eq!(p, vec![vec![1], vec![2, 3]]);
        assert_eq!(format_partition(&p), "1|2,3");
        assert!(parse_partition("1|x").is_err());
    }
}
