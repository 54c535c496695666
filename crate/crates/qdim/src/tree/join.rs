//! Join sets of word tuples and their orbits under tree automorphisms.
//!
//! The join set of `n` distinct equal-length words is the multiset of
//! vertices at which subsets of the tuple split apart: a vertex whose
//! subtree partition of the tuple has `r >= 2` classes carries multiplicity
//! `r - 1`, and the multiplicities always total `n - 1`.
//!
//! Automorphisms of the `M`-ary tree permute sibling subtrees arbitrarily,
//! so two ordered tuples lie in one orbit exactly when their matrices of
//! pairwise join levels coincide.  [`OrbitSignature`] is a canonical
//! encoding of that data: the leveled split tree with tuple positions at the
//! leaves and children sorted recursively.

use std::collections::HashMap;

use super::{TreeError, Word, TUPLE_CAP};

/// One join vertex with its multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinVertex {
    pub vertex: Word,
    pub level: u32,
    pub multiplicity: u32,
}

/// Multiset of join vertices of a word tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinSet {
    pub vertices: Vec<JoinVertex>,
}

impl JoinSet {
    pub fn total_multiplicity(&self) -> u32 {
        self.vertices.iter().map(|v| v.multiplicity).sum()
    }

    /// Join levels with multiplicity, sorted ascending.
    pub fn level_multiset(&self) -> Vec<u32> {
        let mut levels = Vec::new();
        for v in &self.vertices {
            for _ in 0..v.multiplicity {
                levels.push(v.level);
            }
        }
        levels.sort_unstable();
        levels
    }
}

/// Canonical per-orbit encoding: a split vertex with its level and the
/// canonical encodings of the sub-tuples, sorted; leaves carry the tuple
/// position. Equal signatures ⟺ equal pairwise join-level matrices ⟺ the
/// tuples are related by a root-fixing automorphism.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SigNode {
    Leaf(u16),
    Split { level: u32, children: Vec<SigNode> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrbitSignature {
    n: usize,
    root: SigNode,
}

impl OrbitSignature {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn root(&self) -> &SigNode {
        &self.root
    }

    /// Level of the top (shallowest) join vertex; `None` for a single word.
    pub fn top_level(&self) -> Option<u32> {
        match &self.root {
            SigNode::Leaf(_) => None,
            SigNode::Split { level, .. } => Some(*level),
        }
    }

    /// Join levels with multiplicity (vertex with `r` children counts
    /// `r - 1` times), sorted ascending. Size is always `n - 1`.
    pub fn level_multiset(&self) -> Vec<u32> {
        let mut levels = Vec::new();
        collect_levels(&self.root, &mut levels);
        levels.sort_unstable();
        levels
    }

    /// The same split structure with every level shifted by `delta`
    /// (used to translate orbits enumerated below a vertex to absolute levels).
    pub fn shift_levels(&self, delta: u32) -> Self {
        fn shift(node: &SigNode, delta: u32) -> SigNode {
            match node {
                SigNode::Leaf(p) => SigNode::Leaf(*p),
                SigNode::Split { level, children } => SigNode::Split {
                    level: level + delta,
                    children: children.iter().map(|c| shift(c, delta)).collect(),
                },
            }
        }
        Self { n: self.n, root: shift(&self.root, delta) }
    }

    /// Pairwise join levels reconstructed from the signature (test oracle and
    /// cross-check; `levels[i][j]` for `i != j`).
    pub fn meet_matrix(&self) -> Vec<Vec<Option<u32>>> {
        let mut matrix = vec![vec![None; self.n]; self.n];
        fn positions(node: &SigNode, out: &mut Vec<u16>) {
            match node {
                SigNode::Leaf(p) => out.push(*p),
                SigNode::Split { children, .. } => {
                    for c in children {
                        positions(c, out);
                    }
                }
            }
        }
        fn fill(node: &SigNode, matrix: &mut Vec<Vec<Option<u32>>>) {
            if let SigNode::Split { level, children } = node {
                for a in 0..children.len() {
                    for b in a + 1..children.len() {
                        let mut pa = Vec::new();
                        let mut pb = Vec::new();
                        positions(&children[a], &mut pa);
                        positions(&children[b], &mut pb);
                        for &i in &pa {
                            for &j in &pb {
                                matrix[i as usize][j as usize] = Some(*level);
                                matrix[j as usize][i as usize] = Some(*level);
                            }
                        }
                    }
                }
                for c in children {
                    fill(c, matrix);
                }
            }
        }
        fill(&self.root, &mut matrix);
        matrix
    }
}

fn collect_levels(node: &SigNode, out: &mut Vec<u32>) {
    if let SigNode::Split { level, children } = node {
        for _ in 0..children.len() - 1 {
            out.push(*level);
        }
        for c in children {
            collect_levels(c, out);
        }
    }
}

fn validate_tuple(words: &[Word]) -> Result<(), TreeError> {
    let first = words.first().ok_or(TreeError::EmptyTuple)?;
    for w in words {
        if w.branching() != first.branching() {
            return Err(TreeError::BranchingMismatch);
        }
        if w.len() != first.len() {
            return Err(TreeError::WordLength { expected: first.len(), got: w.len() });
        }
    }
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            if words[i] == words[j] {
                return Err(TreeError::DuplicateWords);
            }
        }
    }
    Ok(())
}

/// Longest common prefix of the whole tuple.
pub fn top_vertex(words: &[Word]) -> Result<Word, TreeError> {
    let first = words.first().ok_or(TreeError::EmptyTuple)?;
    for w in words {
        if w.branching() != first.branching() {
            return Err(TreeError::BranchingMismatch);
        }
    }
    let mut level = first.len();
    for w in &words[1..] {
        level = level.min(first.meet_level(w));
    }
    Ok(first.prefix(level))
}

/// Join multiset of a tuple of distinct equal-length words.
pub fn join_set(words: &[Word]) -> Result<JoinSet, TreeError> {
    validate_tuple(words)?;
    let mut vertices = Vec::new();
    let indices: Vec<usize> = (0..words.len()).collect();
    split_recursive(words, &indices, 0, &mut vertices);
    let mut n_check: u32 = 1;
    for v in &vertices {
        n_check += v.multiplicity;
    }
    debug_assert_eq!(n_check as usize, words.len(), "total multiplicity must be n-1");
    Ok(JoinSet { vertices })
}

fn split_recursive(words: &[Word], indices: &[usize], depth: usize, out: &mut Vec<JoinVertex>) {
    if indices.len() <= 1 {
        return;
    }
    // Advance to the first depth where the group splits; equal-length
    // distinct words always split before their end.
    let mut d = depth;
    loop {
        let mut groups: HashMap<u16, Vec<usize>> = HashMap::new();
        for &i in indices {
            groups.entry(words[i].symbols()[d]).or_default().push(i);
        }
        if groups.len() > 1 {
            out.push(JoinVertex {
                vertex: words[indices[0]].prefix(d),
                level: d as u32,
                multiplicity: groups.len() as u32 - 1,
            });
            let mut keys: Vec<u16> = groups.keys().copied().collect();
            keys.sort_unstable();
            for k in keys {
                split_recursive(words, &groups[&k], d + 1, out);
            }
            return;
        }
        d += 1;
    }
}

/// Canonical orbit signature of an ordered tuple of distinct equal-length
/// words under root-fixing automorphisms.
pub fn orbit_signature(words: &[Word]) -> Result<OrbitSignature, TreeError> {
    validate_tuple(words)?;
    let indices: Vec<usize> = (0..words.len()).collect();
    let root = signature_recursive(words, &indices, 0);
    Ok(OrbitSignature { n: words.len(), root })
}

fn signature_recursive(words: &[Word], indices: &[usize], depth: usize) -> SigNode {
    if indices.len() == 1 {
        return SigNode::Leaf(indices[0] as u16);
    }
    let mut d = depth;
    loop {
        let mut groups: HashMap<u16, Vec<usize>> = HashMap::new();
        for &i in indices {
            groups.entry(words[i].symbols()[d]).or_default().push(i);
        }
        if groups.len() > 1 {
            let mut children: Vec<SigNode> = groups
                .values()
                .map(|g| signature_recursive(words, g, d + 1))
                .collect();
            children.sort();
            return SigNode::Split { level: d as u32, children };
        }
        d += 1;
    }
}

/// One orbit of ordered `n`-tuples of distinct depth-`K` words, with the
/// number of tuples that realize it.
#[derive(Debug, Clone)]
pub struct OrbitInfo {
    pub signature: OrbitSignature,
    pub tuple_count: u64,
    pub level_multiset: Vec<u32>,
}

/// Census of all orbits at fixed branching, word length, and tuple order.
#[derive(Debug, Clone)]
pub struct OrbitCensus {
    pub branching: u32,
    pub word_len: usize,
    pub n: usize,
    pub orbits: Vec<OrbitInfo>,
    /// Ordered tuples skipped because they repeat a word (their joins are
    /// deeper than the leaves resolve).
    pub skipped_duplicate_tuples: u64,
}

/// Enumerate every ordered `n`-tuple of depth-`word_len` words and classify
/// by orbit signature. Orbits are returned in canonical (sorted) order.
pub fn enumerate_orbits(
    branching: u32,
    word_len: usize,
    n: usize,
) -> Result<OrbitCensus, TreeError> {
    if n == 0 {
        return Err(TreeError::EmptyTuple);
    }
    let leaves = (branching as u64)
        .checked_pow(word_len as u32)
        .ok_or(TreeError::EnumerationTooLarge { tuples: u64::MAX })?;
    let tuples = leaves
        .checked_pow(n as u32)
        .filter(|&t| t <= TUPLE_CAP)
        .ok_or(TreeError::EnumerationTooLarge { tuples: u64::MAX })?;
    let mut counts: HashMap<OrbitSignature, u64> = HashMap::new();
    let mut skipped = 0u64;
    let mut tuple = vec![0u64; n];
    let words_all: Vec<Word> =
        (0..leaves).map(|i| Word::from_index(branching, word_len, i)).collect();
    for _ in 0..tuples {
        let mut distinct = true;
        'dup: for a in 0..n {
            for b in a + 1..n {
                if tuple[a] == tuple[b] {
                    distinct = false;
                    break 'dup;
                }
            }
        }
        if distinct {
            let words: Vec<Word> = tuple.iter().map(|&i| words_all[i as usize].clone()).collect();
            let sig = orbit_signature(&words)?;
            *counts.entry(sig).or_insert(0) += 1;
        } else {
            skipped += 1;
        }
        // Odometer.
        for pos in (0..n).rev() {
            tuple[pos] += 1;
            if tuple[pos] < leaves {
                break;
            }
            tuple[pos] = 0;
        }
    }
    let mut orbits: Vec<OrbitInfo> = counts
        .into_iter()
        .map(|(signature, tuple_count)| {
            let level_multiset = signature.level_multiset();
            OrbitInfo { signature, tuple_count, level_multiset }
        })
        .collect();
    orbits.sort_by(|a, b| a.signature.cmp(&b.signature));
    Ok(OrbitCensus { branching, word_len, n, orbits, skipped_duplicate_tuples: skipped })
}
