//! Words, measures, and multipotential combinatorics on `M`-ary trees.
//!
//! Vertices of the rooted `M`-ary tree are finite words over `{0,…,M-1}`; the
//! cylinder of a word is the set of infinite words extending it.  For a tuple
//! of words, the *join set* is the multiset of pairwise longest common
//! prefixes: a vertex where `r` branches of the tuple meet mutually carries
//! multiplicity `r - 1`, so a tuple of `n` distinct words always has total
//! join multiplicity `n - 1` ([`join_set`]).
//!
//! Orbits of word tuples under automorphisms of the tree (arbitrary
//! permutations of sibling subtrees) are classified by a canonical signature
//! equivalent to the matrix of pairwise join levels ([`OrbitSignature`]).
//! The verification routines in [`verify`] check, exhaustively over small
//! trees, the moment inequalities that bound orbit masses by products of
//! level moments `Σ_{|u|=l} μ(C_u)^q`, count the level configurations
//! entering the associated series, and evaluate depth-truncated
//! multipotential integrals.

mod join;
mod verify;

pub use join::{
    enumerate_orbits, join_set, top_vertex, JoinSet, JoinVertex, OrbitCensus, OrbitInfo,
    OrbitSignature, SigNode,
};
pub use verify::{
    count_level_configs, level_config_series, multipotential_phi, orbit_masses, partial_j,
    phi_a, verify_frac_inequality, verify_integer_inequality, FracConstraint, FracGroup,
    GroupMassTable, InequalityCheck, LevelConfigCount, PartialJReport, SeriesCheck,
};

use rand::Rng;
use thiserror::Error;

/// Relative tolerance for "left side does not exceed right side" inequality
/// checks: float roundoff in products of masses, nothing looser.
pub const INEQ_REL_TOL: f64 = 1e-9;

/// Hard cap on the number of tuples any exhaustive enumeration may touch.
pub const TUPLE_CAP: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("branching must be in 2..=65536, got {0}")]
    BadBranching(u32),
    #[error("symbol {symbol} out of range for branching {branching}")]
    BadSymbol { symbol: u16, branching: u32 },
    #[error("words must all have length {expected}, got one of length {got}")]
    WordLength { expected: usize, got: usize },
    #[error("words must share one branching factor")]
    BranchingMismatch,
    #[error("tuple contains equal words; joins below the leaf depth are unresolvable")]
    DuplicateWords,
    #[error("empty tuple")]
    EmptyTuple,
    #[error("enumeration of {tuples} tuples exceeds the cap of {TUPLE_CAP}")]
    EnumerationTooLarge { tuples: u64 },
    #[error("requires q > 1, got {0}")]
    BadQ(f64),
    #[error("level {level} exceeds tree depth {depth}")]
    LevelTooDeep { level: u32, depth: u32 },
    #[error("group levels must be strictly increasing")]
    LevelsNotIncreasing,
    #[error("orbit signature has {sig} positions but the group declares {group}")]
    GroupSizeMismatch { sig: usize, group: usize },
    #[error("orbit top level {top} is above the group level {level}")]
    OrbitAboveGroupLevel { top: u32, level: u32 },
    #[error("vertex masses must be nonnegative with children summing to their parent (drift {drift})")]
    MassesInvalid { drift: f64 },
    #[error("tuple order n = {n} has no closed recursion here and the exhaustive path exceeds the cap")]
    UnsupportedOrder { n: usize },
    #[error("word is not a prefix path inside this tree (length {len} > depth {depth})")]
    WordTooDeep { len: usize, depth: u32 },
}

/// A vertex of the `M`-ary tree: a finite word over `{0,…,M-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    branching: u32,
    symbols: Vec<u16>,
}

impl Word {
    pub fn new(branching: u32, symbols: Vec<u16>) -> Result<Self, TreeError> {
        if !(2..=65536).contains(&branching) {
            return Err(TreeError::BadBranching(branching));
        }
        if let Some(&s) = symbols.iter().find(|&&s| (s as u32) >= branching) {
            return Err(TreeError::BadSymbol { symbol: s, branching });
        }
        Ok(Self { branching, symbols })
    }

    pub fn root(branching: u32) -> Self {
        Self { branching, symbols: Vec::new() }
    }

    /// Word of length `len` addressing leaf `index` in lexicographic order.
    pub fn from_index(branching: u32, len: usize, index: u64) -> Self {
        let mut symbols = vec![0u16; len];
        let mut rest = index;
        for l in (0..len).rev() {
            symbols[l] = (rest % branching as u64) as u16;
            rest /= branching as u64;
        }
        Self { branching, symbols }
    }

    pub fn index(&self) -> u64 {
        self.symbols
            .iter()
            .fold(0u64, |acc, &s| acc * self.branching as u64 + s as u64)
    }

    pub fn branching(&self) -> u32 {
        self.branching
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[u16] {
        &self.symbols
    }

    pub fn prefix(&self, len: usize) -> Self {
        Self { branching: self.branching, symbols: self.symbols[..len].to_vec() }
    }

    pub fn child(&self, symbol: u16) -> Result<Self, TreeError> {
        let mut symbols = self.symbols.clone();
        symbols.push(symbol);
        Self::new(self.branching, symbols)
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        self.branching == other.branching
            && self.len() <= other.len()
            && other.symbols[..self.len()] == self.symbols[..]
    }

    /// Longest common prefix length with `other`.
    pub fn meet_level(&self, other: &Word) -> usize {
        self.symbols
            .iter()
            .zip(&other.symbols)
            .take_while(|(a, b)| a == b)
            .count()
    }
}

/// A probability measure on the boundary of the depth-`K` `M`-ary tree, held
/// as exact cylinder masses per level.  `masses(k)[i]` is the mass of the
/// `i`-th level-`k` vertex (lexicographic), children sum to their parent, and
/// the root has mass 1.
#[derive(Debug, Clone)]
pub struct TreeMeasure {
    branching: u32,
    depth: u32,
    levels: Vec<Vec<f64>>,
}

impl TreeMeasure {
    /// Validate and adopt per-level masses (level 0 must be `[1.0]`).
    pub fn from_level_masses(branching: u32, levels: Vec<Vec<f64>>) -> Result<Self, TreeError> {
        if !(2..=65536).contains(&branching) {
            return Err(TreeError::BadBranching(branching));
        }
        if levels.is_empty() || levels[0].len() != 1 {
            return Err(TreeError::MassesInvalid { drift: f64::NAN });
        }
        for (k, level) in levels.iter().enumerate() {
            let expected = (branching as u64).checked_pow(k as u32);
            if expected != Some(level.len() as u64) {
                return Err(TreeError::MassesInvalid { drift: f64::NAN });
            }
            if level.iter().any(|&m| !(m >= 0.0)) {
                return Err(TreeError::MassesInvalid { drift: f64::NAN });
            }
        }
        let mut max_drift = (levels[0][0] - 1.0).abs();
        for k in 0..levels.len() - 1 {
            for (i, &parent) in levels[k].iter().enumerate() {
                let child_sum: f64 = levels[k + 1]
                    [i * branching as usize..(i + 1) * branching as usize]
                    .iter()
                    .sum();
                max_drift = max_drift.max((parent - child_sum).abs());
            }
        }
        if max_drift > 1e-9 {
            return Err(TreeError::MassesInvalid { drift: max_drift });
        }
        Ok(Self { branching, depth: (levels.len() - 1) as u32, levels })
    }

    /// Uniform mass `M^{-k}` on every level-`k` vertex.
    pub fn uniform(branching: u32, depth: u32) -> Result<Self, TreeError> {
        let mut levels = Vec::with_capacity(depth as usize + 1);
        for k in 0..=depth {
            let count = (branching as u64).pow(k) as usize;
            levels.push(vec![1.0 / count as f64; count]);
        }
        Self::from_level_masses(branching, levels)
    }

    /// Self-similar measure: every vertex splits its mass among children with
    /// the fixed `weights` (must sum to 1).
    pub fn multinomial(branching: u32, depth: u32, weights: &[f64]) -> Result<Self, TreeError> {
        if weights.len() != branching as usize
            || weights.iter().any(|&w| w < 0.0)
            || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(TreeError::MassesInvalid { drift: f64::NAN });
        }
        let mut levels = vec![vec![1.0]];
        for k in 0..depth {
            let prev = &levels[k as usize];
            let mut next = Vec::with_capacity(prev.len() * branching as usize);
            for &p in prev {
                for &w in weights {
                    next.push(p * w);
                }
            }
            levels.push(next);
        }
        Self::from_level_masses(branching, levels)
    }

    /// Random measure: at every vertex the mass splits by a uniform draw from
    /// the simplex (normalized exponentials). Deterministic given the RNG.
    pub fn random(branching: u32, depth: u32, rng: &mut impl Rng) -> Result<Self, TreeError> {
        let mut levels = vec![vec![1.0]];
        for k in 0..depth {
            let prev = levels[k as usize].clone();
            let mut next = Vec::with_capacity(prev.len() * branching as usize);
            for &p in &prev {
                let draws: Vec<f64> = (0..branching)
                    .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                    .collect();
                let sum: f64 = draws.iter().sum();
                for d in draws {
                    next.push(p * d / sum);
                }
            }
            levels.push(next);
        }
        Self::from_level_masses(branching, levels)
    }

    pub fn branching(&self) -> u32 {
        self.branching
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn leaf_count(&self) -> u64 {
        (self.branching as u64).pow(self.depth)
    }

    /// Mass of the level-`k` vertex with lexicographic index `i`.
    pub fn mass_at(&self, level: u32, index: u64) -> f64 {
        self.levels[level as usize][index as usize]
    }

    pub fn mass_of(&self, word: &Word) -> Result<f64, TreeError> {
        if word.len() > self.depth as usize {
            return Err(TreeError::WordTooDeep { len: word.len(), depth: self.depth });
        }
        Ok(self.mass_at(word.len() as u32, word.index()))
    }

    /// Level moment `Σ_{|u|=l} μ(C_u)^q` over all level-`l` vertices.
    pub fn level_moment(&self, q: f64, level: u32) -> Result<f64, TreeError> {
        if level > self.depth {
            return Err(TreeError::LevelTooDeep { level, depth: self.depth });
        }
        Ok(self.levels[level as usize].iter().map(|m| m.powf(q)).sum())
    }

    /// Level moment restricted to vertices below `v`:
    /// `Σ_{|u|=l, u ⪰ v} μ(C_u)^q`.
    pub fn level_moment_below(&self, q: f64, level: u32, v: &Word) -> Result<f64, TreeError> {
        if level > self.depth {
            return Err(TreeError::LevelTooDeep { level, depth: self.depth });
        }
        let lv = v.len() as u32;
        if level < lv {
            return Err(TreeError::LevelTooDeep { level, depth: lv });
        }
        let span = (self.branching as u64).pow(level - lv);
        let start = v.index() * span;
        Ok(self.levels[level as usize][start as usize..(start + span) as usize]
            .iter()
            .map(|m| m.powf(q))
            .sum())
    }
}
