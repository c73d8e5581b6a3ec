//! Network model: faces of the orthant, per-face jump measures, and the
//! face-homogeneous transition law they induce on the lattice.
//!
//! A model consists of a dimension `N` and one finite jump measure per subset
//! of `{1..N}`. A lattice state `y` uses the measure attached to its active
//! set (the coordinates that are strictly positive), so the transition law is
//! constant on each face of the orthant. Jumps whose target would leave the
//! orthant are absent transitions: they carry no rate.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::localproc::enumerate_lattice_box;
use crate::scalar::Scalar;

/// Cap on the number of box states `validate` will enumerate.
const VALIDATE_CAP: usize = 200_000;

/// A subset of the coordinate axes `{1..N}`, stored as a bitmask.
///
/// Methods use 0-based coordinate indices; display and the file format use
/// the 1-based convention.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SubsetMask(u32);

impl SubsetMask {
    pub const MAX_DIM: usize = 32;

    pub fn empty() -> Self {
        SubsetMask(0)
    }

    pub fn full(n: usize) -> Self {
        assert!(n <= Self::MAX_DIM);
        if n == 32 {
            SubsetMask(u32::MAX)
        } else {
            SubsetMask((1u32 << n) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut bits = 0u32;
        for i in indices {
            assert!(i < Self::MAX_DIM);
            bits |= 1 << i;
        }
        SubsetMask(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < Self::MAX_DIM && self.0 & (1 << i) != 0
    }

    pub fn with(self, i: usize) -> Self {
        assert!(i < Self::MAX_DIM);
        SubsetMask(self.0 | (1 << i))
    }

    pub fn union(self, other: Self) -> Self {
        SubsetMask(self.0 | other.0)
    }

    pub fn complement(self, n: usize) -> Self {
        SubsetMask(Self::full(n).0 & !self.0)
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Ascending 0-based member indices.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..Self::MAX_DIM).filter(move |&i| self.0 & (1 << i) != 0)
    }

    /// CSV-safe token: `empty` or `+`-joined 1-based indices, e.g. `1+2`.
    pub fn csv_token(self) -> String {
        if self.is_empty() {
            "empty".into()
        } else {
            self.iter()
                .map(|i| (i + 1).to_string())
                .collect::<Vec<_>>()
                .join("+")
        }
    }

    /// Parses `empty`, `full`, or 1-based indices joined by `,` or `+`.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("empty") {
            return Ok(Self::empty());
        }
        if t.eq_ignore_ascii_case("full") {
            return Ok(Self::full(n));
        }
        let mut mask = Self::empty();
        for piece in t.split([',', '+']) {
            let idx: usize = piece
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("bad face index `{piece}`")))?;
            if idx == 0 || idx > n {
                return Err(Error::Invalid(format!("face index {idx} outside 1..={n}")));
            }
            if mask.contains(idx - 1) {
                return Err(Error::Invalid(format!("repeated face index {idx}")));
            }
            mask = mask.with(idx - 1);
        }
        Ok(mask)
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "empty");
        }
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Active set of a lattice point: the coordinates that are strictly positive.
pub fn active_set(coords: &[i64]) -> Result<SubsetMask> {
    let mut mask = SubsetMask::empty();
    for (i, &c) in coords.iter().enumerate() {
        if c < 0 {
            return Err(Error::NegativeCoordinate {
                index: i,
                value: c as f64,
            });
        }
        if c > 0 {
            mask = mask.with(i);
        }
    }
    Ok(mask)
}

/// Active set of a real point in the orthant.
pub fn active_set_real<T: Scalar>(x: &[T]) -> Result<SubsetMask> {
    let mut mask = SubsetMask::empty();
    for (i, &c) in x.iter().enumerate() {
        if c < T::zero() {
            return Err(Error::NegativeCoordinate {
                index: i,
                value: c.as_f64(),
            });
        }
        if c > T::zero() {
            mask = mask.with(i);
        }
    }
    Ok(mask)
}

/// A lattice state in the nonnegative orthant.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct State(Vec<i64>);

impl State {
    pub fn new(coords: Vec<i64>) -> Result<Self> {
        for (i, &c) in coords.iter().enumerate() {
            if c < 0 {
                return Err(Error::NegativeCoordinate {
                    index: i,
                    value: c as f64,
                });
            }
        }
        Ok(State(coords))
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn active_set(&self) -> SubsetMask {
        active_set(&self.0).expect("state coordinates are nonnegative")
    }
}

impl Deref for State {
    type Target = [i64];
    fn deref(&self) -> &[i64] {
        &self.0
    }
}

/// Finite measure on nonzero lattice displacements: jump → rate.
#[derive(Clone, PartialEq, Debug)]
pub struct JumpMeasure<T> {
    atoms: BTreeMap<Vec<i64>, T>,
}

impl<T: Scalar> JumpMeasure<T> {
    /// Builds a measure; zero-rate atoms are dropped, negative rates and the
    /// zero displacement are rejected.
    pub fn new<I: IntoIterator<Item = (Vec<i64>, T)>>(entries: I) -> Result<Self> {
        let mut atoms = BTreeMap::new();
        for (disp, rate) in entries {
            if disp.iter().all(|&d| d == 0) {
                return Err(Error::Invalid(
                    "jump measure atom at the zero vector".into(),
                ));
            }
            if rate < T::zero() || !rate.is_finite() {
                return Err(Error::Invalid(format!(
                    "atom {disp:?} has invalid rate {rate}"
                )));
            }
            if rate == T::zero() {
                continue;
            }
            if atoms.insert(disp.clone(), rate).is_some() {
                return Err(Error::Invalid(format!("duplicate atom {disp:?}")));
            }
        }
        Ok(JumpMeasure { atoms })
    }

    pub fn empty() -> Self {
        JumpMeasure {
            atoms: BTreeMap::new(),
        }
    }

    pub fn rate(&self, disp: &[i64]) -> T {
        self.atoms.get(disp).copied().unwrap_or_else(T::zero)
    }

    /// Atoms in lexicographic displacement order.
    pub fn atoms(&self) -> impl Iterator<Item = (&Vec<i64>, T)> {
        self.atoms.iter().map(|(d, &r)| (d, r))
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_rate(&self) -> T {
        self.atoms.values().copied().sum()
    }

    /// Max-norm of the largest displacement (0 for the empty measure).
    pub fn max_range(&self) -> i64 {
        self.atoms
            .keys()
            .flat_map(|d| d.iter().map(|c| c.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Rate-weighted mean displacement.
    pub fn mean_drift(&self, dim: usize) -> Vec<T> {
        let mut v = vec![T::zero(); dim];
        for (d, r) in self.atoms() {
            for (vi, &di) in v.iter_mut().zip(d) {
                *vi += r * T::of(di as f64);
            }
        }
        v
    }
}

/// A face-homogeneous lattice model: dimension, jump range, and one jump
/// measure per face (absent faces carry the zero measure).
#[derive(Clone, PartialEq, Debug)]
pub struct NetworkModel<T> {
    dimension: usize,
    range: i64,
    measures: BTreeMap<SubsetMask, JumpMeasure<T>>,
}

impl<T: Scalar> NetworkModel<T> {
    /// Builds and checks a model. `range` defaults to the largest max-norm
    /// displacement present; an explicit smaller value is rejected.
    pub fn new(
        dimension: usize,
        measures: BTreeMap<SubsetMask, JumpMeasure<T>>,
        range: Option<i64>,
    ) -> Result<Self> {
        if dimension == 0 || dimension > SubsetMask::MAX_DIM {
            return Err(Error::Invalid(format!(
                "dimension {dimension} outside 1..={}",
                SubsetMask::MAX_DIM
            )));
        }
        let full = SubsetMask::full(dimension);
        let mut kept = BTreeMap::new();
        let mut derived_range = 1i64;
        for (face, measure) in measures {
            if !face.is_subset_of(full) {
                return Err(Error::Invalid(format!(
                    "face {face} has members above dimension {dimension}"
                )));
            }
            if measure.is_empty() {
                continue;
            }
            for (atom, _) in measure.atoms() {
                if atom.len() != dimension {
                    return Err(Error::Invalid(format!(
                        "atom {atom:?} does not have dimension {dimension}"
                    )));
                }
                // An atom is feasible from some state of its face iff it does
                // not push any inactive coordinate negative.
                for i in 0..dimension {
                    if !face.contains(i) && atom[i] < 0 {
                        return Err(Error::InfeasibleAtom {
                            face: face.to_string(),
                            atom: atom.clone(),
                        });
                    }
                }
                derived_range = derived_range.max(atom.iter().map(|c| c.abs()).max().unwrap_or(0));
            }
            kept.insert(face, measure);
        }
        let range = match range {
            Some(d) => {
                if d < 1 {
                    return Err(Error::Invalid("range must be positive".into()));
                }
                for measure in kept.values() {
                    for (atom, _) in measure.atoms() {
                        if atom.iter().map(|c| c.abs()).max().unwrap_or(0) > d {
                            return Err(Error::RangeViolation {
                                atom: atom.clone(),
                                range: d,
                            });
                        }
                    }
                }
                d
            }
            None => derived_range,
        };
        Ok(NetworkModel {
            dimension,
            range,
            measures: kept,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Max-norm bound on all jumps.
    pub fn range(&self) -> i64 {
        self.range
    }

    /// The measure attached to a face, if any rate is present there.
    pub fn measure(&self, face: SubsetMask) -> Option<&JumpMeasure<T>> {
        self.measures.get(&face)
    }

    /// Faces that carry a nonzero measure, ascending by mask.
    pub fn faces(&self) -> impl Iterator<Item = SubsetMask> + '_ {
        self.measures.keys().copied()
    }

    /// Transition intensity `q(y, y2) = μ_{Λ(y)}(y2 − y)`.
    pub fn intensity(&self, y: &State, y2: &State) -> Result<T> {
        if y.len() != self.dimension || y2.len() != self.dimension {
            return Err(Error::Invalid("state dimension mismatch".into()));
        }
        if y == y2 {
            return Err(Error::SameState);
        }
        let face = y.active_set();
        let disp: Vec<i64> = y2.iter().zip(y.iter()).map(|(&b, &a)| b - a).collect();
        Ok(self
            .measure(face)
            .map(|m| m.rate(&disp))
            .unwrap_or_else(T::zero))
    }

    /// Checks the jump-range bound exactly and the communication condition
    /// empirically on the box `{y : y_i ≤ box_radius}`.
    ///
    /// Strong connectivity of the box transition graph is a necessary
    /// condition only; the report never claims global constants.
    pub fn validate(&self, box_radius: i64) -> Result<CommReport<T>> {
        if box_radius < self.range {
            return Err(Error::Invalid(format!(
                "box radius {box_radius} is below the jump range {}",
                self.range
            )));
        }
        for measure in self.measures.values() {
            for (atom, _) in measure.atoms() {
                if atom.iter().map(|c| c.abs()).max().unwrap_or(0) > self.range {
                    return Err(Error::RangeViolation {
                        atom: atom.clone(),
                        range: self.range,
                    });
                }
            }
        }

        let states = enumerate_lattice_box(self.dimension, box_radius, VALIDATE_CAP)?;
        let count = states.len();
        let index: HashMap<&[i64], usize> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_slice(), i))
            .collect();

        let mut fwd: Vec<Vec<usize>> = vec![Vec::new(); count];
        let mut bwd: Vec<Vec<usize>> = vec![Vec::new(); count];
        let mut gamma: Option<T> = None;
        let mut dead_faces: BTreeSet<SubsetMask> = BTreeSet::new();
        let mut target = vec![0i64; self.dimension];
        for (i, y) in states.iter().enumerate() {
            let face = active_set(y)?;
            let Some(measure) = self.measure(face) else {
                dead_faces.insert(face);
                continue;
            };
            for (atom, rate) in measure.atoms() {
                let mut ok = true;
                for k in 0..self.dimension {
                    target[k] = y[k] + atom[k];
                    if target[k] < 0 {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    continue; // absent transition: target leaves the orthant
                }
                if let Some(&j) = index.get(target.as_slice()) {
                    fwd[i].push(j);
                    bwd[j].push(i);
                    gamma = Some(match gamma {
                        Some(g) => g.min(rate),
                        None => rate,
                    });
                }
            }
        }

        let reach_fwd = bfs_reach(&fwd, 0);
        let reach_bwd = bfs_reach(&bwd, 0);
        let connected = reach_fwd.iter().all(|&r| r) && reach_bwd.iter().all(|&r| r);

        // Shortest-path length (in jumps) over lattice distance, maximized
        // over sampled source states.
        let sources: Vec<usize> = if count <= 600 {
            (0..count).collect()
        } else {
            let stride = count / 400 + 1;
            (0..count).step_by(stride).collect()
        };
        let mut path_ratio = T::zero();
        for &s in &sources {
            let dist = bfs_dist(&fwd, s);
            for (t, d) in dist.iter().enumerate() {
                let Some(d) = d else { continue };
                if t == s {
                    continue;
                }
                let sep = states[s]
                    .iter()
                    .zip(&states[t])
                    .map(|(&a, &b)| (a - b).abs())
                    .max()
                    .unwrap_or(1)
                    .max(1);
                let ratio = T::of(*d as f64 / sep as f64);
                path_ratio = path_ratio.max(ratio);
            }
        }

        Ok(CommReport {
            box_radius,
            gamma_hat: gamma.unwrap_or_else(T::zero),
            path_ratio,
            connected,
            dead_faces: dead_faces.into_iter().collect(),
        })
    }
}

/// Empirical communication report over a finite box.
#[derive(Clone, Debug, PartialEq)]
pub struct CommReport<T> {
    pub box_radius: i64,
    /// Minimum positive rate used by any box transition.
    pub gamma_hat: T,
    /// Max over sampled pairs of shortest-path length over lattice distance.
    pub path_ratio: T,
    pub connected: bool,
    /// Faces occurring in the box whose measure is zero.
    pub dead_faces: Vec<SubsetMask>,
}

fn bfs_reach(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = std::collections::VecDeque::new();
    seen[start] = true;
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn bfs_dist(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    let mut queue = std::collections::VecDeque::new();
    dist[start] = Some(0);
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

// ---------------------------------------------------------------------------
// Model file format
//
//   # comment
//   N <int>
//   measure <comma-separated 1-based indices>|empty
//   <dz_1> <dz_2> ... <dz_N> : <rate>
//
// Duplicate atoms within a block are an ingestion error.
// ---------------------------------------------------------------------------

impl<T: Scalar> NetworkModel<T> {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut dimension: Option<usize> = None;
        let mut blocks: BTreeMap<SubsetMask, Vec<(Vec<i64>, T, usize)>> = BTreeMap::new();
        let mut current: Option<SubsetMask> = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line_number = lineno + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: line_number,
                message,
            };

            if let Some(rest) = line.strip_prefix("N ").or_else(|| line.strip_prefix("N\t")) {
                if dimension.is_some() {
                    return Err(parse_err("duplicate N line".into()));
                }
                let n: usize = rest
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("bad dimension `{}`", rest.trim())))?;
                if n == 0 || n > SubsetMask::MAX_DIM {
                    return Err(parse_err(format!("dimension {n} outside 1..=32")));
                }
                dimension = Some(n);
                continue;
            }

            if let Some(rest) = line.strip_prefix("measure") {
                let n = dimension.ok_or_else(|| parse_err("measure before N line".into()))?;
                let face = SubsetMask::parse(rest.trim(), n).map_err(|e| match e {
                    Error::Invalid(m) => parse_err(m),
                    other => other,
                })?;
                if blocks.contains_key(&face) {
                    return Err(parse_err(format!(
                        "duplicate measure block for face {face}"
                    )));
                }
                blocks.insert(face, Vec::new());
                current = Some(face);
                continue;
            }

            // atom line
            let n = dimension.ok_or_else(|| parse_err("atom line before N line".into()))?;
            let face =
                current.ok_or_else(|| parse_err("atom line outside a measure block".into()))?;
            let (lhs, rhs) = line
                .split_once(':')
                .ok_or_else(|| parse_err("atom line must be `<dz...> : <rate>`".into()))?;
            let disp: Vec<i64> = lhs
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<i64>()
                        .map_err(|_| parse_err(format!("bad displacement `{tok}`")))
                })
                .collect::<Result<_>>()?;
            if disp.len() != n {
                return Err(parse_err(format!(
                    "expected {n} displacement components, found {}",
                    disp.len()
                )));
            }
            if disp.iter().all(|&d| d == 0) {
                return Err(parse_err("atom at the zero displacement".into()));
            }
            let rate_f: f64 = rhs
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad rate `{}`", rhs.trim())))?;
            if !rate_f.is_finite() || rate_f < 0.0 {
                return Err(parse_err(format!("invalid rate {rate_f}")));
            }
            let block = blocks.get_mut(&face).expect("current block exists");
            if block.iter().any(|(d, _, _)| d == &disp) {
                return Err(parse_err(format!("duplicate atom {disp:?} in block")));
            }
            block.push((disp, T::of(rate_f), line_number));
        }

        let dimension = dimension.ok_or(Error::Parse {
            line: 0,
            message: "missing N line".into(),
        })?;
        let mut measures = BTreeMap::new();
        for (face, atoms) in blocks {
            let measure = JumpMeasure::new(atoms.into_iter().map(|(d, r, _)| (d, r)))?;
            measures.insert(face, measure);
        }
        NetworkModel::new(dimension, measures, None)
    }

    /// Canonical text form; `parse_str` of the output reproduces the model.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("N {}\n", self.dimension));
        for (face, measure) in &self.measures {
            let token = if face.is_empty() {
                "empty".to_string()
            } else {
                face.iter()
                    .map(|i| (i + 1).to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            };
            out.push_str(&format!("measure {token}\n"));
            for (atom, rate) in measure.atoms() {
                let comps = atom
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                out.push_str(&format!("{comps} : {}\n", crate::report::fmt(rate)));
            }
        }
        out
    }
}


#[cfg(test)]
mod tests {
    use super::testmodels::{mm1, tandem, MM1};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn active_set_examples() {
        assert_eq!(active_set(&[0, 0]).unwrap(), SubsetMask::empty());
        assert_eq!(active_set(&[3, 0]).unwrap(), SubsetMask::from_indices([0]));
        assert_eq!(
            active_set(&[2, 5]).unwrap(),
            SubsetMask::from_indices([0, 1])
        );
        assert!(matches!(
            active_set(&[1, -1]),
            Err(Error::NegativeCoordinate { index: 1, .. })
        ));
    }

    #[test]
    fn active_set_real_matches_lattice() {
        assert_eq!(
            active_set_real(&[0.0, 2.5]).unwrap(),
            SubsetMask::from_indices([1])
        );
        assert!(active_set_real(&[-0.1]).is_err());
    }

    #[test]
    fn mask_parse_and_tokens() {
        assert_eq!(SubsetMask::parse("empty", 3).unwrap(), SubsetMask::empty());
        assert_eq!(SubsetMask::parse("full", 3).unwrap(), SubsetMask::full(3));
        assert_eq!(
            SubsetMask::parse("1,3", 3).unwrap(),
            SubsetMask::from_indices([0, 2])
        );
        assert_eq!(SubsetMask::from_indices([0, 2]).csv_token(), "1+3");
        assert!(SubsetMask::parse("0", 2).is_err());
        assert!(SubsetMask::parse("3", 2).is_err());
    }

    #[test]
    fn intensity_examples_mm1() {
        let m = mm1();
        let s = |c: i64| State::new(vec![c]).unwrap();
        assert_eq!(m.intensity(&s(5), &s(6)).unwrap(), 1.0);
        assert_eq!(m.intensity(&s(0), &s(1)).unwrap(), 1.0);
        assert_eq!(m.intensity(&s(5), &s(9)).unwrap(), 0.0);
        assert!(matches!(m.intensity(&s(4), &s(4)), Err(Error::SameState)));
    }

    #[test]
    fn intensity_is_face_homogeneous() {
        let m = tandem();
        // states on face {1} with different sizes
        let y = State::new(vec![3, 0]).unwrap();
        let w = State::new(vec![7, 0]).unwrap();
        for atom in [[1i64, 0], [-1, 1]] {
            let y2 = State::new(vec![y[0] + atom[0], y[1] + atom[1]]).unwrap();
            let w2 = State::new(vec![w[0] + atom[0], w[1] + atom[1]]).unwrap();
            assert_eq!(m.intensity(&y, &y2).unwrap(), m.intensity(&w, &w2).unwrap());
        }
    }

    #[test]
    fn validate_mm1_box() {
        let m = mm1();
        let report = m.validate(10).unwrap();
        assert!(report.connected);
        assert_eq!(report.gamma_hat, 1.0);
        assert!(report.dead_faces.is_empty());
        // deterministic
        assert_eq!(m.validate(10).unwrap(), report);
    }

    #[test]
    fn validate_detects_absorbing_origin() {
        let text = "\
N 1
measure 1
1 : 1.0
-1 : 2.0
";
        let m: NetworkModel<f64> = NetworkModel::parse_str(text).unwrap();
        let report = m.validate(5).unwrap();
        assert!(!report.connected);
        assert_eq!(report.dead_faces, vec![SubsetMask::empty()]);
    }

    #[test]
    fn validate_tandem_box() {
        let m = tandem();
        let report = m.validate(6).unwrap();
        assert!(report.connected);
        assert!(report.gamma_hat > 0.0);
        assert!(report.path_ratio >= 1.0);
    }

    #[test]
    fn validate_rejects_small_box() {
        let m = mm1();
        assert!(m.validate(0).is_err());
    }

    #[test]
    fn range_violation_with_explicit_range() {
        let mut measures = BTreeMap::new();
        measures.insert(
            SubsetMask::full(1),
            JumpMeasure::new([(vec![2], 1.0f64)]).unwrap(),
        );
        let err = NetworkModel::new(1, measures, Some(1)).unwrap_err();
        assert!(matches!(err, Error::RangeViolation { range: 1, .. }));
    }

    #[test]
    fn infeasible_atom_rejected() {
        // face ∅ with a negative component can never fire from the origin
        let mut measures = BTreeMap::new();
        measures.insert(
            SubsetMask::empty(),
            JumpMeasure::new([(vec![-1], 1.0f64)]).unwrap(),
        );
        assert!(matches!(
            NetworkModel::new(1, measures, None),
            Err(Error::InfeasibleAtom { .. })
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "N 1\nmeasure 1\n1 : 1.0\n1 : 2.0\n";
        match NetworkModel::<f64>::parse_str(text) {
            Err(Error::Parse { line: 4, .. }) => {}
            other => panic!("expected duplicate-atom parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_zero_rate_atoms_are_dropped() {
        let text = "N 1\nmeasure 1\n1 : 1.0\n-1 : 0.0\n";
        let m: NetworkModel<f64> = NetworkModel::parse_str(text).unwrap();
        let meas = m.measure(SubsetMask::full(1)).unwrap();
        assert_eq!(meas.len(), 1);
    }

    #[test]
    fn dump_round_trips() {
        let m = tandem();
        let text = m.dump();
        let again: NetworkModel<f64> = NetworkModel::parse_str(&text).unwrap();
        assert_eq!(m, again);
        assert_eq!(text, again.dump());
    }

    #[test]
    fn parse_mm1_fields() {
        let m = mm1();
        assert_eq!(m.dimension(), 1);
        assert_eq!(m.range(), 1);
        assert_eq!(m.faces().count(), 2);
        assert!(MM1.contains("services"));
    }

    proptest! {
        #[test]
        fn intensity_zero_beyond_range(y0 in 0i64..40, step in 2i64..9) {
            let m = mm1();
            let y = State::new(vec![y0]).unwrap();
            let y2 = State::new(vec![y0 + step]).unwrap();
            prop_assert_eq!(m.intensity(&y, &y2).unwrap(), 0.0);
        }

        #[test]
        fn homogeneity_on_random_tandem_states(a in 1i64..30, b in 1i64..30, c in 1i64..30) {
            // both states interior: intensities agree atom by atom
            let m = tandem();
            let y = State::new(vec![a, b]).unwrap();
            let w = State::new(vec![c, c]).unwrap();
            for atom in [[1i64, 0], [-1, 1], [0, -1]] {
                let ty = State::new(vec![y[0] + atom[0], y[1] + atom[1]]);
                let tw = State::new(vec![w[0] + atom[0], w[1] + atom[1]]);
                if let (Ok(ty), Ok(tw)) = (ty, tw) {
                    prop_assert_eq!(m.intensity(&y, &ty).unwrap(), m.intensity(&w, &tw).unwrap());
                }
            }
        }
    }
}
