//! The face-local process: jump descriptors split into additive and Markovian
//! parts, and finite box truncations of the Markovian state space.
//!
//! For a face `Λ` the local process keeps the coordinates in `Λ` free (they
//! may go negative; this is the additive part) while the coordinates in `Λ^c`
//! stay in the nonnegative lattice (the Markovian part). A jump of the model
//! splits accordingly, and the measure used at a Markovian state `y` is the
//! one attached to `Λ ∪ {i ∈ Λ^c : y_i > 0}`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{NetworkModel, SubsetMask};
use crate::scalar::Scalar;

/// Default cap on truncation sizes.
pub const DEFAULT_SIZE_CAP: usize = 1 << 21;

/// One jump of the local process on face `Λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalJump<T> {
    /// Displacement of the additive part, over the coordinates of `Λ` ascending.
    pub additive: Vec<i64>,
    /// Displacement of the Markovian part, over the coordinates of `Λ^c` ascending.
    pub markov: Vec<i64>,
    pub rate: T,
}

/// Jumps of the local process available from Markovian state `y ∈ ℤ₊^{Λ^c}`.
///
/// Atoms that would push the Markovian part negative are omitted entirely and
/// carry no rate; the additive part is unconstrained.
pub fn local_jumps<T: Scalar>(
    model: &NetworkModel<T>,
    face: SubsetMask,
    y: &[i64],
) -> Result<Vec<LocalJump<T>>> {
    let n = model.dimension();
    let comp: Vec<usize> = face.complement(n).iter().collect();
    if y.len() != comp.len() {
        return Err(Error::Invalid(format!(
            "Markovian state has {} coordinates, face complement has {}",
            y.len(),
            comp.len()
        )));
    }
    for (k, &c) in y.iter().enumerate() {
        if c < 0 {
            return Err(Error::NegativeCoordinate {
                index: comp[k],
                value: c as f64,
            });
        }
    }

    let mut effective = face;
    for (k, &i) in comp.iter().enumerate() {
        if y[k] > 0 {
            effective = effective.with(i);
        }
    }

    let mut jumps = Vec::new();
    let Some(measure) = model.measure(effective) else {
        return Ok(jumps);
    };
    let face_coords: Vec<usize> = face.iter().collect();
    'atoms: for (atom, rate) in measure.atoms() {
        let mut markov = Vec::with_capacity(comp.len());
        for (k, &i) in comp.iter().enumerate() {
            if y[k] + atom[i] < 0 {
                continue 'atoms;
            }
            markov.push(atom[i]);
        }
        let additive = face_coords.iter().map(|&i| atom[i]).collect();
        jumps.push(LocalJump {
            additive,
            markov,
            rate,
        });
    }
    Ok(jumps)
}

/// Lexicographically ordered states of the box `{y : 0 ≤ y_i ≤ radius}` in
/// `dim` coordinates.
pub(crate) fn enumerate_lattice_box(dim: usize, radius: i64, cap: usize) -> Result<Vec<Vec<i64>>> {
    if radius < 0 {
        return Err(Error::Invalid("box radius must be nonnegative".into()));
    }
    let size = (radius as u128 + 1)
        .checked_pow(dim as u32)
        .unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::SizeOverflow {
            size,
            cap: cap as u128,
        });
    }
    let mut states = Vec::with_capacity(size as usize);
    let mut current = vec![0i64; dim];
    loop {
        states.push(current.clone());
        // odometer, last coordinate fastest
        let mut k = dim;
        loop {
            if k == 0 {
                return Ok(states);
            }
            k -= 1;
            if current[k] < radius {
                current[k] += 1;
                for c in &mut current[k + 1..] {
                    *c = 0;
                }
                break;
            }
        }
    }
}

/// A finite box truncation of the Markovian state space of a face.
#[derive(Clone, Debug)]
pub struct Truncation {
    pub face: SubsetMask,
    pub radius: i64,
    /// States of `ℤ₊^{Λ^c}` with every coordinate ≤ radius, lexicographic.
    pub states: Vec<Vec<i64>>,
    /// Global coordinate indices of `Λ^c`, ascending.
    pub markov_coords: Vec<usize>,
    index: HashMap<Vec<i64>, usize>,
    origin: usize,
}

impl Truncation {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, y: &[i64]) -> Option<usize> {
        self.index.get(y).copied()
    }

    /// Index of the all-zero Markovian state.
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub(crate) fn from_states(
        face: SubsetMask,
        radius: i64,
        markov_coords: Vec<usize>,
        states: Vec<Vec<i64>>,
    ) -> Self {
        let index: HashMap<Vec<i64>, usize> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let origin = states
            .iter()
            .position(|s| s.iter().all(|&c| c == 0))
            .expect("truncation contains the origin");
        Truncation {
            face,
            radius,
            states,
            markov_coords,
            index,
            origin,
        }
    }

    /// Keeps only the given state indices, preserving order.
    pub(crate) fn restrict(&self, keep: &[usize]) -> Self {
        let states: Vec<Vec<i64>> = keep.iter().map(|&i| self.states[i].clone()).collect();
        Truncation::from_states(self.face, self.radius, self.markov_coords.clone(), states)
    }
}

/// Enumerates the box truncation of radius `m` for the face `Λ` in an
/// `n_dim`-dimensional model.
pub fn enumerate_truncation(
    face: SubsetMask,
    m: i64,
    n_dim: usize,
    cap: usize,
) -> Result<Truncation> {
    if m < 1 {
        return Err(Error::Invalid("truncation radius must be ≥ 1".into()));
    }
    let comp: Vec<usize> = face.complement(n_dim).iter().collect();
    let states = enumerate_lattice_box(comp.len(), m, cap)?;
    Ok(Truncation::from_states(face, m, comp, states))
}
