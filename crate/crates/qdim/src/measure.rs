//! Measure models on `[0,1)^N` with exact cylinder (mesh-cube) masses.
//!
//! The level-`k` mesh over `[0,1)^N` in base `m` consists of the half-open
//! cubes `∏_c [j_c m^{-k}, (j_c+1) m^{-k})`, so every point lies in exactly
//! one cube per level and cube masses add exactly across refinements.
//!
//! * [`MeasureModel::Multinomial`]: mass splits at every level among the
//!   `m^N` child cubes with fixed weights `w`, giving cylinder masses
//!   `∏ w_{digit}` and the closed-form moment sum `Σ_C μ(C)^q = (Σ_i w_i^q)^k`.
//!   Its q-dimension is `D_q = log(Σ_i w_i^q) / ((q-1) log m^{-1})`.
//! * [`MeasureModel::Atoms`]: finitely many point masses whose coordinates are
//!   exact base-`m` rationals `num / m^depth`, so cube membership and digit
//!   extraction are integer arithmetic (no floating-point misassignment at
//!   cube boundaries).
//! * [`MeasureModel::Uniform`]: Lebesgue measure on `[0,1)^N`; mesh operations
//!   default to the dyadic mesh.
//!
//! Moment sums never materialize all `m^{Nk}` cubes: multinomial and uniform
//! models use closed recursions, atomic models bucket atoms by their cube key.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

/// Tolerance for "masses sum to one" checks at construction time.
pub const MASS_TOL: f64 = 1e-12;

/// Hard cap on the number of cells any enumeration is allowed to touch.
pub const ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("branching base must be an even integer >= 2, got {0}")]
    BadBase(u32),
    #[error("dimension must be >= 1, got {0}")]
    BadDim(usize),
    #[error("expected base^dim = {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weights must be nonnegative and sum to 1 within {MASS_TOL} (sum = {sum})")]
    BadWeights { sum: f64 },
    #[error("atom masses must be positive and sum to 1 within {MASS_TOL} (sum = {sum})")]
    BadMasses { sum: f64 },
    #[error("atom coordinates must lie in [0,1), got {0}")]
    CoordOutOfRange(f64),
    #[error("atom {atom} has {got} coordinates, expected {expected}")]
    AtomDim { atom: usize, expected: usize, got: usize },
    #[error("cube digit {digit} out of range for base {base}")]
    BadDigit { digit: u32, base: u32 },
    #[error("cube has base {cube} but model uses base {model}")]
    BaseMismatch { cube: u32, model: u32 },
    #[error("cube dimension {cube} does not match model dimension {model}")]
    DimMismatch { cube: usize, model: usize },
    #[error("moment sums require q > 1, got {0}")]
    BadQ(f64),
    #[error("level {level} exceeds the exactly representable depth for base {base}")]
    LevelTooDeep { level: usize, base: u32 },
    #[error("enumeration of {cells} cells exceeds the cap of {ENUMERATION_CAP}")]
    EnumerationTooLarge { cells: u64 },
    #[error("operation requires an atomic model; discretize the model first")]
    NotAtomic,
    #[error("no closed-form q-dimension for this model")]
    NoClosedForm,
}

/// Address of one half-open mesh cube: base, dimension, and level-major digits
/// (`digits[l*dim + c]` is the base-`m` digit of coordinate `c` at level `l+1`).
/// Level 0 (no digits) addresses all of `[0,1)^N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CubeAddress {
    base: u32,
    dim: usize,
    digits: Vec<u32>,
}

impl CubeAddress {
    pub fn new(base: u32, dim: usize, digits: Vec<u32>) -> Result<Self, MeasureError> {
        check_base(base)?;
        if dim == 0 {
            return Err(MeasureError::BadDim(dim));
        }
        if digits.len() % dim != 0 {
            return Err(MeasureError::DimMismatch { cube: digits.len(), model: dim });
        }
        if let Some(&d) = digits.iter().find(|&&d| d >= base) {
            return Err(MeasureError::BadDigit { digit: d, base });
        }
        Ok(Self { base, dim, digits })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.digits.len() / self.dim
    }

    /// Side length `m^{-k}` of the cube.
    pub fn side(&self) -> f64 {
        (self.base as f64).powi(-(self.level() as i32))
    }

    /// Digit of coordinate `c` at level `l+1` (zero-based `l`).
    pub fn digit(&self, l: usize, c: usize) -> u32 {
        self.digits[l * self.dim + c]
    }

    /// Lower corner of the cube, exact as a base-`m` rational evaluated in f64.
    pub fn low_corner(&self) -> Vec<f64> {
        let mut corner = vec![0.0; self.dim];
        let mut scale = 1.0 / self.base as f64;
        for l in 0..self.level() {
            for (c, x) in corner.iter_mut().enumerate() {
                *x += self.digit(l, c) as f64 * scale;
            }
            scale /= self.base as f64;
        }
        corner
    }

    /// Child cube obtained by appending one digit per coordinate.
    pub fn child(&self, digits: &[u32]) -> Result<Self, MeasureError> {
        let mut all = self.digits.clone();
        all.extend_from_slice(digits);
        Self::new(self.base, self.dim, all)
    }
}

fn check_base(base: u32) -> Result<(), MeasureError> {
    if base < 2 || base % 2 != 0 {
        return Err(MeasureError::BadBase(base));
    }
    Ok(())
}

/// Finitely many point masses with exact base-`m` coordinates
/// `num / m^depth ∈ [0,1)`.
#[derive(Debug, Clone, Serialize)]
pub struct AtomSet {
    base: u32,
    depth: u32,
    dim: usize,
    /// Atom-major numerators: coordinate `c` of atom `a` is
    /// `nums[a*dim + c] / base^depth`.
    nums: Vec<u64>,
    masses: Vec<f64>,
}

impl AtomSet {
    /// Build from exact numerators. `nums` is atom-major with `dim` entries
    /// per atom; masses must be positive and sum to 1.
    pub fn from_numerators(
        base: u32,
        depth: u32,
        dim: usize,
        nums: Vec<u64>,
        masses: Vec<f64>,
    ) -> Result<Self, MeasureError> {
        check_base(base)?;
        if dim == 0 {
            return Err(MeasureError::BadDim(dim));
        }
        if nums.len() != masses.len() * dim {
            return Err(MeasureError::AtomDim {
                atom: masses.len(),
                expected: masses.len() * dim,
                got: nums.len(),
            });
        }
        let denom = checked_pow(base, depth)
            .ok_or(MeasureError::LevelTooDeep { level: depth as usize, base })?;
        if let Some(&n) = nums.iter().find(|&&n| (n as u128) >= denom) {
            return Err(MeasureError::CoordOutOfRange(n as f64 / denom as f64));
        }
        let sum: f64 = masses.iter().sum();
        if masses.iter().any(|&w| w <= 0.0) || (sum - 1.0).abs() > MASS_TOL {
            return Err(MeasureError::BadMasses { sum });
        }
        Ok(Self { base, depth, dim, nums, masses })
    }

    /// Build from floating-point coordinates in `[0,1)`, snapping each to the
    /// nearest multiple of `base^{-depth}`. Returns the set and the largest
    /// snap distance, so callers can verify the snap was inconsequential.
    pub fn from_points(
        base: u32,
        depth: u32,
        points: &[Vec<f64>],
        masses: &[f64],
    ) -> Result<(Self, f64), MeasureError> {
        check_base(base)?;
        let dim = points.first().map(|p| p.len()).unwrap_or(1);
        let denom = checked_pow(base, depth)
            .ok_or(MeasureError::LevelTooDeep { level: depth as usize, base })? as f64;
        let mut nums = Vec::with_capacity(points.len() * dim);
        let mut max_snap = 0.0f64;
        for (a, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(MeasureError::AtomDim { atom: a, expected: dim, got: p.len() });
            }
            for &x in p {
                if !(0.0..1.0).contains(&x) {
                    return Err(MeasureError::CoordOutOfRange(x));
                }
                let num = (x * denom).round().min(denom - 1.0).max(0.0);
                max_snap = max_snap.max((x - num / denom).abs());
                nums.push(num as u64);
            }
        }
        let set = Self::from_numerators(base, depth, dim, nums, masses.to_vec())?;
        Ok((set, max_snap))
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn mass(&self, atom: usize) -> f64 {
        self.masses[atom]
    }

    pub fn numerator(&self, atom: usize, coord: usize) -> u64 {
        self.nums[atom * self.dim + coord]
    }

    /// Coordinate as f64 (exact when `base^depth <= 2^53`).
    pub fn coord(&self, atom: usize, coord: usize) -> f64 {
        let denom = (self.base as f64).powi(self.depth as i32);
        self.numerator(atom, coord) as f64 / denom
    }

    pub fn point(&self, atom: usize) -> Vec<f64> {
        (0..self.dim).map(|c| self.coord(atom, c)).collect()
    }

    /// Index of the level-`k` mesh interval containing coordinate `c` of
    /// `atom`, computed exactly: `floor(x * base^k)`.
    pub fn cube_index(&self, atom: usize, coord: usize, level: usize) -> Result<u64, MeasureError> {
        let num = self.numerator(atom, coord) as u128;
        let k = level as u32;
        let idx = if k <= self.depth {
            let div = checked_pow(self.base, self.depth - k)
                .ok_or(MeasureError::LevelTooDeep { level, base: self.base })?;
            num / div
        } else {
            let mul = checked_pow(self.base, k - self.depth)
                .ok_or(MeasureError::LevelTooDeep { level, base: self.base })?;
            num.checked_mul(mul)
                .ok_or(MeasureError::LevelTooDeep { level, base: self.base })?
        };
        u64::try_from(idx).map_err(|_| MeasureError::LevelTooDeep { level, base: self.base })
    }

    /// Whether the atom lies in `cube` (half-open), exact for any even base:
    /// `num/m1^depth ∈ [j/m2^k, (j+1)/m2^k)  ⟺  num·m2^k ∈ [j·m1^depth, (j+1)·m1^depth)`.
    pub fn in_cube(&self, atom: usize, cube: &CubeAddress) -> Result<bool, MeasureError> {
        if cube.dim != self.dim {
            return Err(MeasureError::DimMismatch { cube: cube.dim, model: self.dim });
        }
        let level = cube.level();
        let my_denom = checked_pow(self.base, self.depth)
            .ok_or(MeasureError::LevelTooDeep { level: self.depth as usize, base: self.base })?;
        let cube_denom = checked_pow(cube.base, level as u32)
            .ok_or(MeasureError::LevelTooDeep { level, base: cube.base })?;
        for c in 0..self.dim {
            let mut j: u128 = 0;
            for l in 0..level {
                j = j * cube.base as u128 + cube.digit(l, c) as u128;
            }
            let lhs = self.numerator(atom, c) as u128 * cube_denom;
            let lo = j * my_denom;
            let hi = (j + 1) * my_denom;
            if lhs < lo || lhs >= hi {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn checked_pow(base: u32, exp: u32) -> Option<u128> {
    (base as u128).checked_pow(exp)
}

/// A probability measure on `[0,1)^N` with exactly computable cube masses.
#[derive(Debug, Clone, Serialize)]
pub enum MeasureModel {
    /// Self-similar multinomial measure: at every level each cube splits its
    /// mass among its `base^dim` children with the fixed `weights`.  The child
    /// with per-coordinate digits `(d_0, …, d_{N-1})` gets weight index
    /// `Σ_c d_c · base^c`.
    Multinomial { base: u32, dim: usize, weights: Vec<f64> },
    Atoms(AtomSet),
    Uniform { dim: usize },
}

impl MeasureModel {
    pub fn multinomial(base: u32, dim: usize, weights: Vec<f64>) -> Result<Self, MeasureError> {
        check_base(base)?;
        if dim == 0 {
            return Err(MeasureError::BadDim(dim));
        }
        let expected = (base as u64).pow(dim as u32) as usize;
        if weights.len() != expected {
            return Err(MeasureError::WeightCount { expected, got: weights.len() });
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > MASS_TOL {
            return Err(MeasureError::BadWeights { sum });
        }
        Ok(Self::Multinomial { base, dim, weights })
    }

    pub fn uniform(dim: usize) -> Result<Self, MeasureError> {
        if dim == 0 {
            return Err(MeasureError::BadDim(dim));
        }
        Ok(Self::Uniform { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Multinomial { dim, .. } => *dim,
            Self::Atoms(a) => a.dim(),
            Self::Uniform { dim } => *dim,
        }
    }

    /// Base of the mesh the model naturally lives on (uniform defaults to the
    /// dyadic mesh).
    pub fn mesh_base(&self) -> u32 {
        match self {
            Self::Multinomial { base, .. } => *base,
            Self::Atoms(a) => a.base(),
            Self::Uniform { .. } => 2,
        }
    }

    pub fn as_atoms(&self) -> Option<&AtomSet> {
        match self {
            Self::Atoms(a) => Some(a),
            _ => None,
        }
    }
}

/// Exact mass `μ(C)` of a mesh cube.
pub fn cylinder_mass(model: &MeasureModel, cube: &CubeAddress) -> Result<f64, MeasureError> {
    if cube.dim() != model.dim() {
        return Err(MeasureError::DimMismatch { cube: cube.dim(), model: model.dim() });
    }
    match model {
        MeasureModel::Multinomial { base, dim, weights } => {
            if cube.base() != *base {
                return Err(MeasureError::BaseMismatch { cube: cube.base(), model: *base });
            }
            let mut mass = 1.0;
            for l in 0..cube.level() {
                mass *= weights[symbol_index(cube, l, *base, *dim)];
            }
            Ok(mass)
        }
        MeasureModel::Uniform { dim } => {
            Ok((cube.base() as f64).powi(-((cube.level() * dim) as i32)))
        }
        MeasureModel::Atoms(atoms) => {
            let mut mass = 0.0;
            for a in 0..atoms.len() {
                if atoms.in_cube(a, cube)? {
                    mass += atoms.mass(a);
                }
            }
            Ok(mass)
        }
    }
}

fn symbol_index(cube: &CubeAddress, level: usize, base: u32, dim: usize) -> usize {
    let mut idx = 0usize;
    for c in (0..dim).rev() {
        idx = idx * base as usize + cube.digit(level, c) as usize;
    }
    idx
}

/// Level-`k` mesh moment `Σ_C μ(C)^q` over the model's natural mesh,
/// computed without materializing all `m^{Nk}` cubes.
pub fn moment_sum(model: &MeasureModel, q: f64, level: usize) -> Result<f64, MeasureError> {
    if q <= 1.0 {
        return Err(MeasureError::BadQ(q));
    }
    match model {
        MeasureModel::Multinomial { weights, .. } => {
            let per_level: f64 = weights.iter().map(|w| w.powf(q)).sum();
            Ok(per_level.powi(level as i32))
        }
        MeasureModel::Uniform { dim } => {
            // m^{Nk} cubes of mass m^{-Nk} each: Σ μ^q = m^{Nk(1-q)}.
            Ok((2f64).powf((*dim as f64) * (level as f64) * (1.0 - q)))
        }
        MeasureModel::Atoms(atoms) => {
            let mut buckets: HashMap<Vec<u64>, f64> = HashMap::with_capacity(atoms.len());
            for a in 0..atoms.len() {
                let key: Result<Vec<u64>, _> =
                    (0..atoms.dim()).map(|c| atoms.cube_index(a, c, level)).collect();
                *buckets.entry(key?).or_insert(0.0) += atoms.mass(a);
            }
            Ok(buckets.values().map(|w| w.powf(q)).sum())
        }
    }
}

/// Discrete correlation integral `Σ_i w_i · (Σ_{j: |x_j - x_i| <= r} w_j)^{q-1}`
/// with closed Euclidean balls. Requires an atomic model (discretize first).
pub fn correlation_integral(model: &MeasureModel, q: f64, r: f64) -> Result<f64, MeasureError> {
    if q <= 1.0 {
        return Err(MeasureError::BadQ(q));
    }
    let atoms = model.as_atoms().ok_or(MeasureError::NotAtomic)?;
    let n = atoms.len();
    let pts: Vec<Vec<f64>> = (0..n).map(|a| atoms.point(a)).collect();
    let r2 = r * r;
    let mut total = 0.0;
    for i in 0..n {
        let mut ball = 0.0;
        for j in 0..n {
            let d2: f64 =
                (0..atoms.dim()).map(|c| (pts[i][c] - pts[j][c]).powi(2)).sum();
            if d2 <= r2 {
                ball += atoms.mass(j);
            }
        }
        total += atoms.mass(i) * ball.powf(q - 1.0);
    }
    Ok(total)
}

/// Replace the model by point masses at the centers of the level-`depth`
/// cylinders, with the exact cylinder masses. Centers `(j + 1/2) m^{-depth}`
/// are exact numerators at depth `depth+1` because the base is even.
/// Zero-mass cylinders are dropped.
pub fn discretize(model: &MeasureModel, depth: u32) -> Result<AtomSet, MeasureError> {
    let base = model.mesh_base();
    let dim = model.dim();
    match model {
        MeasureModel::Multinomial { weights, .. } => {
            let cells = (base as u64)
                .checked_pow(depth * dim as u32)
                .filter(|&c| c <= ENUMERATION_CAP)
                .ok_or(MeasureError::EnumerationTooLarge { cells: u64::MAX })?;
            let _ = cells;
            let mut nums = Vec::new();
            let mut masses = Vec::new();
            // Depth-first walk over digit strings; indices[c] accumulates the
            // level-`depth` cube index of coordinate c.
            let mut indices = vec![0u64; dim];
            walk_cylinders(base, dim, depth, weights, &mut indices, 0, 1.0, &mut |idx, mass| {
                if mass > 0.0 {
                    for &j in idx {
                        nums.push(j * base as u64 + base as u64 / 2);
                    }
                    masses.push(mass);
                }
            });
            renormalize(&mut masses);
            AtomSet::from_numerators(base, depth + 1, dim, nums, masses)
        }
        MeasureModel::Uniform { dim } => {
            let cells = 2u64
                .checked_pow(depth * *dim as u32)
                .filter(|&c| c <= ENUMERATION_CAP)
                .ok_or(MeasureError::EnumerationTooLarge { cells: u64::MAX })?;
            let mass = 1.0 / cells as f64;
            let mut nums = Vec::with_capacity((cells as usize) * dim);
            let mut masses = vec![mass; cells as usize];
            let side = 2u64.pow(depth);
            for cell in 0..cells {
                let mut rest = cell;
                for _ in 0..*dim {
                    let j = rest % side;
                    rest /= side;
                    nums.push(j * 2 + 1);
                }
            }
            renormalize(&mut masses);
            AtomSet::from_numerators(2, depth + 1, *dim, nums, masses)
        }
        MeasureModel::Atoms(atoms) => {
            // Coarsen: pool atom masses by level-`depth` cube, mass at centers.
            let mut buckets: HashMap<Vec<u64>, f64> = HashMap::new();
            for a in 0..atoms.len() {
                let key: Result<Vec<u64>, _> =
                    (0..dim).map(|c| atoms.cube_index(a, c, depth as usize)).collect();
                *buckets.entry(key?).or_insert(0.0) += atoms.mass(a);
            }
            let mut nums = Vec::with_capacity(buckets.len() * dim);
            let mut masses = Vec::with_capacity(buckets.len());
            let mut keys: Vec<_> = buckets.into_iter().collect();
            keys.sort();
            for (idx, mass) in keys {
                for &j in &idx {
                    nums.push(j * base as u64 + base as u64 / 2);
                }
                masses.push(mass);
            }
            renormalize(&mut masses);
            AtomSet::from_numerators(base, depth + 1, dim, nums, masses)
        }
    }
}

/// Compensate accumulated floating-point drift so the atom-set invariant
/// (masses sum to 1 within `MASS_TOL`) holds after long enumerations.
fn renormalize(masses: &mut [f64]) {
    let sum: f64 = masses.iter().sum();
    if sum > 0.0 && (sum - 1.0).abs() > MASS_TOL / 2.0 {
        for w in masses.iter_mut() {
            *w /= sum;
        }
    }
}

fn walk_cylinders(
    base: u32,
    dim: usize,
    depth: u32,
    weights: &[f64],
    indices: &mut Vec<u64>,
    level: u32,
    mass: f64,
    emit: &mut impl FnMut(&[u64], f64),
) {
    if level == depth {
        emit(indices, mass);
        return;
    }
    let symbols = (base as usize).pow(dim as u32);
    for s in 0..symbols {
        let mut rest = s;
        for c in 0..dim {
            indices[c] = indices[c] * base as u64 + (rest % base as usize) as u64;
            rest /= base as usize;
        }
        walk_cylinders(base, dim, depth, weights, indices, level + 1, mass * weights[s], emit);
        for c in 0..dim {
            indices[c] /= base as u64;
        }
    }
}

/// Closed-form generalized q-dimension, where one exists:
/// multinomial `D_q = log(Σ_i w_i^q)/((q-1) log m^{-1})`, uniform `D_q = N`.
pub fn analytic_dq(model: &MeasureModel, q: f64) -> Result<f64, MeasureError> {
    if q <= 1.0 {
        return Err(MeasureError::BadQ(q));
    }
    match model {
        MeasureModel::Multinomial { base, weights, .. } => {
            let s: f64 = weights.iter().map(|w| w.powf(q)).sum();
            Ok(s.ln() / ((q - 1.0) * (1.0 / *base as f64).ln()))
        }
        MeasureModel::Uniform { dim } => Ok(*dim as f64),
        MeasureModel::Atoms(_) => Err(MeasureError::NoClosedForm),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w73() -> MeasureModel {
        MeasureModel::multinomial(2, 1, vec![0.7, 0.3]).unwrap()
    }

    /// Independent oracle: moment sum by enumerating every level-k cylinder.
    fn moment_sum_by_enumeration(model: &MeasureModel, q: f64, level: usize) -> f64 {
        let base = model.mesh_base();
        let dim = model.dim();
        let mut total = 0.0;
        let mut digits = vec![0u32; level * dim];
        loop {
            let cube = CubeAddress::new(base, dim, digits.clone()).unwrap();
            total += cylinder_mass(model, &cube).unwrap().powf(q);
            // Odometer over all digit strings.
            let mut pos = digits.len();
            loop {
                if pos == 0 {
                    return total;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < base {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }

    #[test]
    fn multinomial_cylinder_mass_is_product_of_weights() {
        let m = w73();
        let cube = CubeAddress::new(2, 1, vec![0, 1]).unwrap();
        let mass = cylinder_mass(&m, &cube).unwrap();
        assert!((mass - 0.7 * 0.3).abs() < 1e-15, "mass {mass} != 0.21");
    }

    #[test]
    fn multinomial_moment_closed_form_matches_enumeration() {
        let m = w73();
        for k in 0..=6 {
            let closed = moment_sum(&m, 2.0, k).unwrap();
            let brute = moment_sum_by_enumeration(&m, 2.0, k);
            assert!(
                (closed - brute).abs() <= 1e-12 * brute.max(1.0),
                "level {k}: closed {closed} vs enumerated {brute}"
            );
        }
        // (0.49 + 0.09)^2 = 0.58^2
        let v = moment_sum(&m, 2.0, 2).unwrap();
        assert!((v - 0.3364).abs() < 1e-15, "level-2 moment {v}");
    }

    #[test]
    fn multinomial_2d_moment_matches_enumeration() {
        let m = MeasureModel::multinomial(2, 2, vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        for k in 0..=4 {
            let closed = moment_sum(&m, 2.5, k).unwrap();
            let brute = moment_sum_by_enumeration(&m, 2.5, k);
            assert!(
                (closed - brute).abs() <= 1e-12 * brute.max(1.0),
                "level {k}: closed {closed} vs enumerated {brute}"
            );
        }
    }

    #[test]
    fn uniform_moment_closed_form() {
        let m = MeasureModel::uniform(1).unwrap();
        let v = moment_sum(&m, 2.0, 1).unwrap();
        assert!((v - 0.5).abs() < 1e-15, "uniform level-1 q=2 moment {v} != 1/2");
        for k in 0..=5 {
            let closed = moment_sum(&m, 2.0, k).unwrap();
            let brute = moment_sum_by_enumeration(&m, 2.0, k);
            assert!((closed - brute).abs() <= 1e-12, "level {k}: {closed} vs {brute}");
        }
    }

    #[test]
    fn atom_in_quarter_cube() {
        // Single atom at 0.3 lies in [0.25, 0.5), the level-2 dyadic cube 01.
        let (atoms, snap) =
            AtomSet::from_points(2, 20, &[vec![0.3]], &[1.0]).unwrap();
        assert!(snap <= 0.5 / 2f64.powi(20));
        let model = MeasureModel::Atoms(atoms);
        let cube = CubeAddress::new(2, 1, vec![0, 1]).unwrap();
        assert_eq!(cylinder_mass(&model, &cube).unwrap(), 1.0);
        let other = CubeAddress::new(2, 1, vec![0, 0]).unwrap();
        assert_eq!(cylinder_mass(&model, &other).unwrap(), 0.0);
    }

    #[test]
    fn boundary_atom_belongs_to_the_cube_on_its_right() {
        // Atom exactly at 0.25: half-open cubes put it in [0.25, 0.5).
        let atoms = AtomSet::from_numerators(2, 2, 1, vec![1], vec![1.0]).unwrap();
        let model = MeasureModel::Atoms(atoms);
        let left = CubeAddress::new(2, 1, vec![0, 0]).unwrap();
        let right = CubeAddress::new(2, 1, vec![0, 1]).unwrap();
        assert_eq!(cylinder_mass(&model, &left).unwrap(), 0.0);
        assert_eq!(cylinder_mass(&model, &right).unwrap(), 1.0);
    }

    #[test]
    fn discretized_multinomial_reproduces_moment_sums() {
        let m = w73();
        let atoms = MeasureModel::Atoms(discretize(&m, 8).unwrap());
        for k in 0..=8 {
            let a = moment_sum(&atoms, 2.0, k).unwrap();
            let b = moment_sum(&m, 2.0, k).unwrap();
            assert!(
                (a - b).abs() <= 1e-13 * b.max(1.0),
                "level {k}: atoms {a} vs closed {b}"
            );
        }
    }

    #[test]
    fn discretized_atoms_one_per_cylinder_below_depth() {
        let m = w73();
        let atoms = discretize(&m, 3).unwrap();
        assert_eq!(atoms.len(), 8);
        // Center of cylinder 000 is 1/16 = num 1 at depth 4.
        assert_eq!(atoms.numerator(0, 0), 1);
    }

    #[test]
    fn correlation_integral_of_uniform_matches_interval_overlap() {
        // Continuum: ∫ (min(x+r,1) - max(x-r,0)) dx = 2r - r^2 = 0.4375 at r=1/4.
        // Discrete oracle at depth 12: atoms at (2i+1)/2^13, ball radius 1024
        // atoms each side; the count sum has the closed form below.
        let u = MeasureModel::uniform(1).unwrap();
        let atoms = MeasureModel::Atoms(discretize(&u, 12).unwrap());
        let got = correlation_integral(&atoms, 2.0, 0.25).unwrap();
        let n: i64 = 4096;
        let h: i64 = 1024;
        let mut count_sum = 0i64;
        for i in 0..n {
            count_sum += (i + h).min(n - 1) - (i - h).max(0) + 1;
        }
        let exact_discrete = count_sum as f64 / (n as f64 * n as f64);
        assert!(
            (got - exact_discrete).abs() < 1e-12,
            "correlation {got} vs discrete oracle {exact_discrete}"
        );
        assert!(
            (got - 0.4375).abs() < 5e-4,
            "correlation {got} should approach 2r - r^2 = 0.4375"
        );
    }

    #[test]
    fn analytic_dq_matches_moment_slope_oracle() {
        // Oracle: least-squares slope of log moment_sum against (q-1) log r
        // over levels 10..=20 must agree with the closed form to 1e-9.
        let m = w73();
        let q = 2.0;
        let pts: Vec<(f64, f64)> = (10..=20)
            .map(|k| {
                let x = (q - 1.0) * (-(k as f64) * 2f64.ln());
                let y = moment_sum(&m, q, k).unwrap().ln();
                (x, y)
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        let analytic = analytic_dq(&m, q).unwrap();
        assert!(
            (slope - analytic).abs() < 1e-9,
            "slope oracle {slope} vs analytic {analytic}"
        );
        assert!(
            (analytic - 0.785875).abs() < 1e-6,
            "D_2 of (0.7, 0.3) multinomial is {analytic}, expected ~0.785875"
        );
    }

    #[test]
    fn uniform_dq_is_the_dimension() {
        assert_eq!(analytic_dq(&MeasureModel::uniform(2).unwrap(), 3.0).unwrap(), 2.0);
    }

    #[test]
    fn constructor_rejections() {
        assert!(matches!(
            MeasureModel::multinomial(3, 1, vec![0.5, 0.3, 0.2]),
            Err(MeasureError::BadBase(3))
        ));
        assert!(matches!(
            MeasureModel::multinomial(2, 1, vec![0.7, 0.31]),
            Err(MeasureError::BadWeights { .. })
        ));
        assert!(matches!(
            MeasureModel::multinomial(2, 2, vec![0.5, 0.5]),
            Err(MeasureError::WeightCount { expected: 4, got: 2 })
        ));
        assert!(matches!(moment_sum(&w73(), 1.0, 3), Err(MeasureError::BadQ(_))));
        assert!(matches!(
            correlation_integral(&w73(), 2.0, 0.1),
            Err(MeasureError::NotAtomic)
        ));
    }

    #[test]
    fn uniform_discretize_covers_square_grid() {
        let u = MeasureModel::uniform(2).unwrap();
        let atoms = discretize(&u, 3).unwrap();
        assert_eq!(atoms.len(), 64);
        let total: f64 = (0..atoms.len()).map(|a| atoms.mass(a)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn weights_strategy() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.05f64..1.0, 2).prop_map(|raw| {
                let s: f64 = raw.iter().sum();
                raw.iter().map(|w| w / s).collect()
            })
        }

        proptest! {
            // Mesh moments with q > 1 never increase under refinement.
            #[test]
            fn moment_sum_nonincreasing_in_level(
                w in weights_strategy(),
                q in 1.1f64..4.0,
            ) {
                let m = MeasureModel::multinomial(2, 1, w).unwrap();
                let mut prev = f64::INFINITY;
                for k in 0..10 {
                    let v = moment_sum(&m, q, k).unwrap();
                    prop_assert!(v <= prev * (1.0 + 1e-12));
                    prev = v;
                }
            }

            // Cube mass equals the sum of its children's masses.
            #[test]
            fn cylinder_mass_is_additive(
                w in weights_strategy(),
                digits in proptest::collection::vec(0u32..2, 0..6),
            ) {
                let m = MeasureModel::multinomial(2, 1, w).unwrap();
                let cube = CubeAddress::new(2, 1, digits).unwrap();
                let parent = cylinder_mass(&m, &cube).unwrap();
                let children: f64 = (0..2u32)
                    .map(|d| cylinder_mass(&m, &cube.child(&[d]).unwrap()).unwrap())
                    .sum();
                prop_assert!((parent - children).abs() <= 1e-12 * parent.max(1e-30));
            }

            // Correlation integral is nondecreasing in the radius.
            #[test]
            fn correlation_monotone_in_radius(r1 in 0.01f64..0.5, r2 in 0.01f64..0.5) {
                let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
                let u = MeasureModel::uniform(1).unwrap();
                let atoms = MeasureModel::Atoms(discretize(&u, 6).unwrap());
                let a = correlation_integral(&atoms, 2.0, lo).unwrap();
                let b = correlation_integral(&atoms, 2.0, hi).unwrap();
                prop_assert!(a <= b + 1e-12);
            }
        }
    }
}
