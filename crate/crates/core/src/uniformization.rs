//! Uniformization: transient probabilities and tilted-semigroup entries via
//! the Poisson jump-count series on a truncated chain.
//!
//! These routines evaluate the same quantities as the matrix exponential and
//! the Monte Carlo estimators through an independent summation, so they serve
//! as reference values in tests. They are exact up to the Poisson tail and
//! the state-space truncation. Intended for `f64`; the Poisson weights
//! underflow `f32` for large rate·time products.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::localproc::{enumerate_lattice_box, local_jumps, Truncation};
use crate::model::{active_set, NetworkModel, State, SubsetMask};
use crate::scalar::{dot_int, Scalar};

const BOX_CAP: usize = 2_000_000;

/// Sub-probability distribution of the box-truncated (and optionally
/// face-killed) chain at a fixed time.
#[derive(Clone, Debug)]
pub struct TransientDistribution<T> {
    pub states: Vec<Vec<i64>>,
    pub probs: Vec<T>,
    index: HashMap<Vec<i64>, usize>,
}

impl<T: Scalar> TransientDistribution<T> {
    pub fn prob_of(&self, state: &[i64]) -> T {
        self.index
            .get(state)
            .map(|&i| self.probs[i])
            .unwrap_or_else(T::zero)
    }

    /// Total mass of states with `|y/n − center| < delta` in the max norm.
    pub fn window_mass(&self, center: &[T], delta: T, n: u64) -> T {
        let nf = T::of(n as f64);
        let mut total = T::zero();
        for (y, &p) in self.states.iter().zip(&self.probs) {
            let inside = y
                .iter()
                .zip(center)
                .all(|(&c, &x)| (T::of(c as f64) / nf - x).abs() < delta);
            if inside {
                total += p;
            }
        }
        total
    }
}

/// Distribution of `X(t)` started from `x0`, truncated to the box
/// `{y : y_i ≤ box_radius}`, with mass leaving the box dropped.
///
/// With `kill_face = Some(Λ)` the chain is additionally absorbed on entering
/// `{y : y_i = 0 for some i ∈ Λ}`, so the result is
/// `P(X(t) = ·, never exited the box, never hit the Λ-boundary)`.
pub fn transient_distribution<T: Scalar>(
    model: &NetworkModel<T>,
    x0: &State,
    t: T,
    box_radius: i64,
    kill_face: Option<SubsetMask>,
) -> Result<TransientDistribution<T>> {
    if t < T::zero() {
        return Err(Error::Invalid("time must be nonnegative".into()));
    }
    let n = model.dimension();
    if x0.len() != n {
        return Err(Error::Invalid("initial state dimension mismatch".into()));
    }
    let alive = |y: &[i64]| -> bool {
        match kill_face {
            Some(mask) => mask.iter().all(|i| y[i] > 0),
            None => true,
        }
    };
    let all = enumerate_lattice_box(n, box_radius, BOX_CAP)?;
    let states: Vec<Vec<i64>> = all.into_iter().filter(|y| alive(y)).collect();
    let index: HashMap<Vec<i64>, usize> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    let Some(&start) = index.get(x0.coords()) else {
        // initial state already outside the live set: zero distribution
        let probs = vec![T::zero(); states.len()];
        return Ok(TransientDistribution {
            states,
            probs,
            index,
        });
    };

    // per-state feasible jumps and the uniformization rate
    let mut jumps: Vec<Vec<(usize, T)>> = Vec::with_capacity(states.len());
    let mut out_rates: Vec<T> = Vec::with_capacity(states.len());
    let mut theta = T::zero();
    for y in &states {
        let face = active_set(y)?;
        let mut row = Vec::new();
        let mut total = T::zero();
        if let Some(measure) = model.measure(face) {
            let mut target = vec![0i64; n];
            'atoms: for (atom, rate) in measure.atoms() {
                for k in 0..n {
                    target[k] = y[k] + atom[k];
                    if target[k] < 0 {
                        continue 'atoms; // absent transition
                    }
                }
                total += rate;
                if let Some(&j) = index.get(target.as_slice()) {
                    row.push((j, rate));
                }
                // else: absorbed (box exit or killed boundary)
            }
        }
        theta = theta.max(total);
        jumps.push(row);
        out_rates.push(total);
    }
    if theta == T::zero() {
        // no motion anywhere: point mass at the start
        let mut probs = vec![T::zero(); states.len()];
        probs[start] = T::one();
        return Ok(TransientDistribution {
            states,
            probs,
            index,
        });
    }

    let mut pi = vec![T::zero(); states.len()];
    pi[start] = T::one();
    let mut acc = vec![T::zero(); states.len()];
    let mean = (theta * t).as_f64();
    let mut weight = T::of((-mean).exp());
    let mut cumulative = weight.as_f64();
    for (a, &p) in acc.iter_mut().zip(&pi) {
        *a = weight * p;
    }
    let mut next = vec![T::zero(); states.len()];
    let k_cap = (mean + 12.0 * (mean + 25.0).sqrt() + 60.0).ceil() as usize;
    for k in 1..=k_cap {
        for x in next.iter_mut() {
            *x = T::zero();
        }
        for (i, row) in jumps.iter().enumerate() {
            let p = pi[i];
            if p == T::zero() {
                continue;
            }
            let stay = T::one() - out_rates[i] / theta;
            next[i] += p * stay;
            for &(j, rate) in row {
                next[j] += p * rate / theta;
            }
        }
        std::mem::swap(&mut pi, &mut next);
        weight *= T::of(mean / k as f64);
        cumulative += weight.as_f64();
        for (a, &p) in acc.iter_mut().zip(&pi) {
            *a += weight * p;
        }
        if cumulative > 1.0 - 1e-14 {
            break;
        }
    }

    Ok(TransientDistribution {
        states,
        probs: acc,
        index,
    })
}

/// Tilted killed semigroup entry
/// `E[e^{⟨α, A(t)⟩}; Y(t) = y_to, T_K > t]` for the local process on `face`,
/// started from the Markovian state with index `from` in the truncation,
/// evaluated by the Poisson series over the uniformized jump chain.
pub fn tilted_entry<T: Scalar>(
    model: &NetworkModel<T>,
    trunc: &Truncation,
    alpha: &[T],
    t: T,
    from: usize,
    to: usize,
) -> Result<T> {
    if t < T::zero() {
        return Err(Error::Invalid("time must be nonnegative".into()));
    }
    let k_states = trunc.len();
    // weighted one-step kernel of the uniformized chain
    let mut rows: Vec<Vec<(usize, T)>> = Vec::with_capacity(k_states);
    let mut out_rates = Vec::with_capacity(k_states);
    let mut theta = T::zero();
    for y in &trunc.states {
        let mut row = Vec::new();
        let mut total = T::zero();
        let mut target = vec![0i64; y.len()];
        for jump in local_jumps(model, trunc.face, y)? {
            total += jump.rate;
            for (tc, (&yc, &dc)) in target.iter_mut().zip(y.iter().zip(&jump.markov)) {
                *tc = yc + dc;
            }
            if let Some(j) = trunc.index_of(&target) {
                let w = jump.rate * dot_int(alpha, &jump.additive).exp();
                row.push((j, w));
            }
            // exits from K are killed: no entry
        }
        theta = theta.max(total);
        rows.push(row);
        out_rates.push(total);
    }
    if theta == T::zero() {
        return Ok(if from == to { T::one() } else { T::zero() });
    }

    let mut v = vec![T::zero(); k_states];
    v[from] = T::one();
    let mean = (theta * t).as_f64();
    let mut weight = T::of((-mean).exp());
    let mut acc = weight * v[to];
    let mut next = vec![T::zero(); k_states];
    let k_cap = 8 * ((mean + 12.0 * (mean + 25.0).sqrt() + 80.0).ceil() as usize);
    let mut quiet = 0usize;
    for k in 1..=k_cap {
        for x in next.iter_mut() {
            *x = T::zero();
        }
        for (i, row) in rows.iter().enumerate() {
            let p = v[i];
            if p == T::zero() {
                continue;
            }
            let stay = T::one() - out_rates[i] / theta;
            next[i] += p * stay;
            for &(j, w) in row {
                next[j] += p * w / theta;
            }
        }
        std::mem::swap(&mut v, &mut next);
        weight *= T::of(mean / k as f64);
        let contribution = weight * v[to];
        acc += contribution;
        let vmax = v.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        if (weight * vmax).as_f64() < 1e-17 * acc.as_f64().abs().max(1e-300) && k as f64 > mean {
            quiet += 1;
            if quiet > 8 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localproc::{enumerate_truncation, DEFAULT_SIZE_CAP};
    use crate::model::testmodels::mm1;

    #[test]
    fn transient_mass_is_probability() {
        let m = mm1();
        let dist =
            transient_distribution(&m, &State::new(vec![3]).unwrap(), 1.0, 40, None).unwrap();
        let total: f64 = dist.probs.iter().sum();
        assert!(total > 0.999999 && total <= 1.0 + 1e-12, "total {total}");
    }

    #[test]
    fn transient_zero_time_is_point_mass() {
        let m = mm1();
        let dist =
            transient_distribution(&m, &State::new(vec![5]).unwrap(), 0.0, 20, None).unwrap();
        assert!((dist.prob_of(&[5]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn killed_mass_is_smaller() {
        let m = mm1();
        let x0 = State::new(vec![2]).unwrap();
        let free = transient_distribution(&m, &x0, 1.0, 40, None).unwrap();
        let killed = transient_distribution(&m, &x0, 1.0, 40, Some(SubsetMask::full(1))).unwrap();
        let f: f64 = free.probs.iter().sum();
        let k: f64 = killed.probs.iter().sum();
        assert!(k < f);
        assert!(killed.prob_of(&[0]) == 0.0);
    }

    #[test]
    fn tilted_entry_zero_tilt_matches_transient() {
        // For the empty face the local process is the chain itself; at α = ()
        // the tilted entry is a killed transition probability.
        let m = mm1();
        let trunc = enumerate_truncation(SubsetMask::empty(), 30, 1, DEFAULT_SIZE_CAP).unwrap();
        let from = trunc.index_of(&[2]).unwrap();
        let to = trunc.index_of(&[1]).unwrap();
        let e = tilted_entry(&m, &trunc, &[], 0.8, from, to).unwrap();
        let dist =
            transient_distribution(&m, &State::new(vec![2]).unwrap(), 0.8, 30, None).unwrap();
        // box exit at radius 30 from state 2 in time 0.8 is negligible
        assert!((e - dist.prob_of(&[1])).abs() < 1e-10, "{e}");
    }
}
