//! Exact event-driven simulation of the lattice process and Monte Carlo
//! estimation of tube and endpoint probabilities, directly and under an
//! exponentially twisted change of measure.
//!
//! Estimators work on the fluid scale: the lattice process `X` runs over the
//! unscaled horizon `n·T` and is compared against `n` times the reference
//! path. Replications draw from independent, splittable RNG streams keyed by
//! the replication index, so results are reproducible and independent of the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::localproc::{enumerate_truncation, local_jumps, Truncation};
use crate::model::{NetworkModel, State, SubsetMask};
use crate::pathcost::{path_cost, segment_face, PiecewisePath};
use crate::scalar::{dot_int, Scalar};
use crate::spectral::{build, lambda, pf_eigen};
use crate::variational::{legendre, FullFaceEvaluator, RateOpts, TruncatedFaceEvaluator};

/// Simulation options.
#[derive(Clone, Debug)]
pub struct SimOpts {
    /// Per-replication cap on jump events.
    pub max_events: u64,
}

impl Default for SimOpts {
    fn default() -> Self {
        SimOpts {
            max_events: 20_000_000,
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn exp_sample<T: Scalar>(rng: &mut ChaCha8Rng, rate: T) -> T {
    let u: f64 = rng.random();
    let u = (1.0 - u).max(f64::MIN_POSITIVE); // (0, 1]
    T::of(-u.ln()) / rate
}

/// A simulated trajectory: the initial state and every jump.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    /// `(time, state)`, first entry at time zero.
    pub events: Vec<(T, Vec<i64>)>,
    pub horizon: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn final_state(&self) -> &[i64] {
        &self.events[self.events.len() - 1].1
    }
}

/// Exact simulation of the lattice process from `x0` over `[0, horizon]`:
/// exponential holding times at the total feasible rate of the current face
/// measure, jumps chosen proportionally to their rates.
pub fn simulate_ctmc<T: Scalar>(
    model: &NetworkModel<T>,
    x0: &State,
    horizon: T,
    seed: u64,
    opts: &SimOpts,
) -> Result<Trajectory<T>> {
    if horizon < T::zero() {
        return Err(Error::Invalid("horizon must be nonnegative".into()));
    }
    if x0.len() != model.dimension() {
        return Err(Error::Invalid("initial state dimension mismatch".into()));
    }
    let mut rng = rng_for(seed, 0);
    let mut x = x0.coords().to_vec();
    let mut t = T::zero();
    let mut events = vec![(t, x.clone())];
    let mut scratch: Vec<(usize, T)> = Vec::new();
    loop {
        let total = feasible_jumps(model, &x, &mut scratch)?;
        if total == T::zero() {
            break; // absorbing state
        }
        let dt = exp_sample(&mut rng, total);
        if t + dt > horizon {
            break;
        }
        t += dt;
        let atom_idx = pick_jump(&mut rng, &scratch, total);
        apply_jump(model, &mut x, atom_idx)?;
        events.push((t, x.clone()));
        if events.len() as u64 > opts.max_events {
            return Err(Error::RateExplosion {
                cap: opts.max_events,
            });
        }
    }
    Ok(Trajectory { events, horizon })
}

/// Writes `(atom_ordinal, rate)` for the feasible atoms of the face measure
/// at `x` into `scratch` and returns the total rate.
fn feasible_jumps<T: Scalar>(
    model: &NetworkModel<T>,
    x: &[i64],
    scratch: &mut Vec<(usize, T)>,
) -> Result<T> {
    scratch.clear();
    let face = crate::model::active_set(x)?;
    let mut total = T::zero();
    if let Some(measure) = model.measure(face) {
        for (ordinal, (atom, rate)) in measure.atoms().enumerate() {
            let feasible = atom.iter().zip(x).all(|(&u, &c)| c + u >= 0);
            if feasible {
                total += rate;
                scratch.push((ordinal, rate));
            }
        }
    }
    Ok(total)
}

fn pick_jump<T: Scalar>(rng: &mut ChaCha8Rng, scratch: &[(usize, T)], total: T) -> usize {
    let draw = T::of(rng.random::<f64>()) * total;
    let mut acc = T::zero();
    for &(ordinal, rate) in scratch {
        acc += rate;
        if draw < acc {
            return ordinal;
        }
    }
    scratch.last().expect("nonempty jump set").0
}

fn apply_jump<T: Scalar>(model: &NetworkModel<T>, x: &mut [i64], ordinal: usize) -> Result<()> {
    let face = crate::model::active_set(x)?;
    let measure = model
        .measure(face)
        .ok_or_else(|| Error::Invalid("jump from a silent face".into()))?;
    let (atom, _) = measure
        .atoms()
        .nth(ordinal)
        .ok_or_else(|| Error::Invalid("jump ordinal out of range".into()))?;
    for (c, &u) in x.iter_mut().zip(atom) {
        *c += u;
    }
    Ok(())
}

/// Estimator method tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Direct,
    Twisted,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Direct => write!(f, "direct"),
            Method::Twisted => write!(f, "twisted"),
        }
    }
}

/// Specification of a tube or endpoint event at scale `n`.
#[derive(Clone, Debug)]
pub struct TubeSpec<T> {
    /// Reference path on the fluid scale.
    pub path: PiecewisePath<T>,
    /// Tube half-width in scaled units.
    pub delta: T,
    /// Scaling parameter.
    pub n: u64,
    /// When present, require the scaled process to keep these coordinates
    /// strictly positive over the whole horizon (the hitting-time constraint)
    /// and check only the endpoint unless a full tube is requested.
    pub constrain_face: Option<SubsetMask>,
    /// Check only the endpoint window instead of the whole tube.
    pub endpoint_only: bool,
}

impl<T: Scalar> TubeSpec<T> {
    fn validate(&self, model: &NetworkModel<T>) -> Result<()> {
        if self.path.dimension() != model.dimension() {
            return Err(Error::Invalid("path and model dimensions differ".into()));
        }
        if !(self.delta > T::zero()) {
            return Err(Error::Invalid("tube half-width must be positive".into()));
        }
        if self.n == 0 {
            return Err(Error::Invalid("scaling parameter must be ≥ 1".into()));
        }
        Ok(())
    }

    fn rounded_start(&self) -> Vec<i64> {
        let nf = self.n as f64;
        self.path
            .start_point()
            .iter()
            .map(|&c| (c.as_f64() * nf).round().max(0.0) as i64)
            .collect()
    }
}

/// Monte Carlo estimate of a tube or endpoint probability.
#[derive(Clone, Debug, PartialEq)]
pub struct TubeEstimate<T> {
    pub hits: u64,
    pub reps: u64,
    pub p_hat: T,
    /// `(1/n)·log p_hat`; `-∞` when no replication hit.
    pub log_over_n: T,
    /// Delta-method standard error of `log_over_n`; NaN when no hits.
    pub stderr_log: T,
    /// No replication hit; `p_hat` is zero and `upper_log_over_n` carries a
    /// one-sided 95% bound instead.
    pub zero_hits: bool,
    /// `(1/n)·log` of the one-sided 95% upper confidence bound on `p`.
    pub upper_log_over_n: T,
    pub method: Method,
}

fn summarize<T: Scalar>(weights: &[T], n: u64, method: Method) -> TubeEstimate<T> {
    let reps = weights.len() as u64;
    let hits = weights.iter().filter(|&&w| w > T::zero()).count() as u64;
    let nf = T::of(n as f64);
    let repsf = T::of(reps as f64);
    let mean = weights.iter().copied().sum::<T>() / repsf;
    // one-sided 95% exact bound for the hit indicator when nothing hit
    let p_upper = T::of(1.0 - 0.05f64.powf(1.0 / reps as f64));
    if hits == 0 {
        return TubeEstimate {
            hits,
            reps,
            p_hat: T::zero(),
            log_over_n: T::neg_infinity(),
            stderr_log: T::nan(),
            zero_hits: true,
            upper_log_over_n: p_upper.ln() / nf,
            method,
        };
    }
    let var = weights.iter().map(|&w| (w - mean) * (w - mean)).sum::<T>() / (repsf - T::one());
    let se_mean = (var / repsf).sqrt();
    TubeEstimate {
        hits,
        reps,
        p_hat: mean,
        log_over_n: mean.ln() / nf,
        stderr_log: se_mean / (nf * mean),
        zero_hits: false,
        upper_log_over_n: (mean + T::of(1.6448536269514722) * se_mean).ln() / nf,
        method,
    }
}

/// Direct Monte Carlo estimate of the tube (or endpoint) probability at
/// scale `n`: simulates the lattice process from the rounded initial state
/// and checks the scaled distance to the reference path at every jump event
/// and every path knot.
pub fn tube_probability<T: Scalar>(
    model: &NetworkModel<T>,
    spec: &TubeSpec<T>,
    reps: u64,
    seed: u64,
    opts: &SimOpts,
) -> Result<TubeEstimate<T>> {
    spec.validate(model)?;
    if reps == 0 {
        return Err(Error::Invalid("need at least one replication".into()));
    }
    let outcomes: Result<Vec<T>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_for(seed, rep);
            direct_rep(model, spec, &mut rng, opts)
                .map(|hit| if hit { T::one() } else { T::zero() })
        })
        .collect();
    Ok(summarize(&outcomes?, spec.n, Method::Direct))
}

fn violates_constraint(face: Option<SubsetMask>, x: &[i64]) -> bool {
    match face {
        Some(mask) => mask.iter().any(|i| x[i] == 0),
        None => false,
    }
}

fn within<T: Scalar>(x: &[i64], nf: T, target: &[T], delta: T) -> bool {
    x.iter()
        .zip(target)
        .all(|(&c, &p)| (T::of(c as f64) / nf - p).abs() < delta)
}

fn direct_rep<T: Scalar>(
    model: &NetworkModel<T>,
    spec: &TubeSpec<T>,
    rng: &mut ChaCha8Rng,
    opts: &SimOpts,
) -> Result<bool> {
    let nf = T::of(spec.n as f64);
    let t0 = spec.path.start_time();
    let t1 = spec.path.end_time();
    let horizon = nf * (t1 - t0);
    let full_tube = !spec.endpoint_only;
    let knots = spec.path.knots();

    let mut x = spec.rounded_start();
    if violates_constraint(spec.constrain_face, &x) {
        return Ok(false);
    }
    if full_tube && !within(&x, nf, spec.path.start_point(), spec.delta) {
        return Ok(false);
    }

    let mut t = T::zero();
    let mut knot_ptr = 1usize; // knot 0 checked above
    let mut events = 0u64;
    let mut scratch: Vec<(usize, T)> = Vec::new();
    loop {
        let total = feasible_jumps(model, &x, &mut scratch)?;
        let t_next = if total > T::zero() {
            t + exp_sample(rng, total)
        } else {
            T::infinity()
        };
        let t_stop = t_next.min(horizon);
        if full_tube {
            while knot_ptr < knots.len() && nf * (knots[knot_ptr].0 - t0) < t_stop {
                if !within(&x, nf, &knots[knot_ptr].1, spec.delta) {
                    return Ok(false);
                }
                knot_ptr += 1;
            }
        }
        if t_next >= horizon {
            return Ok(within(&x, nf, spec.path.end_point(), spec.delta));
        }
        let scaled = t0 + t_next / nf;
        if full_tube && !within(&x, nf, &spec.path.eval(scaled), spec.delta) {
            return Ok(false);
        }
        let ordinal = pick_jump(rng, &scratch, total);
        apply_jump(model, &mut x, ordinal)?;
        events += 1;
        if events > opts.max_events {
            return Err(Error::RateExplosion {
                cap: opts.max_events,
            });
        }
        t = t_next;
        if violates_constraint(spec.constrain_face, &x) {
            return Ok(false);
        }
        if full_tube {
            if !within(&x, nf, &spec.path.eval(scaled), spec.delta) {
                return Ok(false);
            }
            while knot_ptr < knots.len() && nf * (knots[knot_ptr].0 - t0) <= t_next {
                knot_ptr += 1;
            }
        }
    }
}

/// An exponentially twisted transition kernel of the local process on a
/// finite truncation.
#[derive(Clone, Debug)]
pub struct TwistedKernel<T> {
    pub face: SubsetMask,
    pub truncation: Truncation,
    /// Maximizing tilt `α_v` over the face coordinates.
    pub tilt: Vec<T>,
    /// `λ_{Λ,K}(α_v)`.
    pub eigenvalue: T,
    /// Positive eigenvector over the truncation states, 1 at the origin.
    pub eigenvector: Vec<T>,
    rows: Vec<TwistedRow<T>>,
}

#[derive(Clone, Debug)]
struct TwistedRow<T> {
    jumps: Vec<TwistedJump<T>>,
    total: T,
}

#[derive(Clone, Debug)]
struct TwistedJump<T> {
    additive: Vec<i64>,
    target: usize,
    rate: T,
}

impl<T: Scalar> TwistedKernel<T> {
    /// Twisted rate sum out of a truncation state.
    pub fn total_rate(&self, state: usize) -> T {
        self.rows[state].total
    }

    /// Twisted rates `(additive displacement, target state, rate)`.
    pub fn jumps(&self, state: usize) -> impl Iterator<Item = (&[i64], usize, T)> {
        self.rows[state]
            .jumps
            .iter()
            .map(|j| (j.additive.as_slice(), j.target, j.rate))
    }
}

/// Builds the twisted kernel for velocity `v` over the face coordinates: the
/// maximizing tilt `α_v` is found by the conjugate ascent, the eigenpair is
/// solved on the given truncation, and every surviving jump gets rate
/// `r·e^{⟨α_v, u_Λ⟩}·f(y')/f(y)`. Jumps leaving the truncation are forbidden:
/// the twisted process never exits.
pub fn build_twist<T: Scalar>(
    model: &NetworkModel<T>,
    face: SubsetMask,
    trunc: &Truncation,
    v: &[T],
    opts: &RateOpts<T>,
) -> Result<TwistedKernel<T>> {
    if v.len() != face.count() {
        return Err(Error::Invalid(format!(
            "velocity has {} components, face {} needs {}",
            v.len(),
            face,
            face.count()
        )));
    }
    let conj = if face == SubsetMask::full(model.dimension()) {
        let mut eval = FullFaceEvaluator { model };
        legendre(&mut eval, v, &opts.legendre)?
    } else {
        let mut eval = TruncatedFaceEvaluator {
            model,
            face,
            trunc: trunc.clone(),
            spectral: opts.lambda.spectral.clone(),
            fd_step: opts.fd_step,
        };
        legendre(&mut eval, v, &opts.legendre)?
    };
    if !conj.value.is_finite() {
        return Err(Error::Invalid(
            "velocity lies outside the effective domain; no twist exists".into(),
        ));
    }
    let tilt = conj.argmax_tilt.unwrap_or_default();

    let gen = build(model, face, trunc, &tilt, &opts.lambda.spectral)?;
    let pf = pf_eigen(&gen, &opts.lambda.spectral)?;
    let trunc = gen.truncation.clone();
    let f = &pf.eigenvector;

    let mut rows = Vec::with_capacity(trunc.len());
    for (i, y) in trunc.states.iter().enumerate() {
        let mut jumps = Vec::new();
        let mut total = T::zero();
        let mut target = vec![0i64; y.len()];
        for jump in local_jumps(model, face, y)? {
            for (tc, (&yc, &dc)) in target.iter_mut().zip(y.iter().zip(&jump.markov)) {
                *tc = yc + dc;
            }
            let Some(j) = trunc.index_of(&target) else {
                continue; // exits the truncation: forbidden under the twist
            };
            let rate = jump.rate * dot_int(&tilt, &jump.additive).exp() * f[j] / f[i];
            total += rate;
            jumps.push(TwistedJump {
                additive: jump.additive,
                target: j,
                rate,
            });
        }
        rows.push(TwistedRow { jumps, total });
    }
    Ok(TwistedKernel {
        face,
        truncation: trunc,
        tilt,
        eigenvalue: pf.eigenvalue,
        eigenvector: pf.eigenvector,
        rows,
    })
}

/// Importance-sampled estimate of an endpoint event under the twisted
/// kernel. Each hit carries the likelihood weight
/// `exp(−⟨α_v, A⟩ + horizon·λ)·f(y_start)/f(Y_end)`, making the estimator
/// unbiased for the original probability restricted to staying inside the
/// truncation.
pub fn twisted_tube_probability<T: Scalar>(
    model: &NetworkModel<T>,
    spec: &TubeSpec<T>,
    kernel: &TwistedKernel<T>,
    reps: u64,
    seed: u64,
    opts: &SimOpts,
) -> Result<TubeEstimate<T>> {
    spec.validate(model)?;
    if reps == 0 {
        return Err(Error::Invalid("need at least one replication".into()));
    }
    if spec.constrain_face != Some(kernel.face) {
        return Err(Error::Invalid(
            "tube spec must constrain the kernel's face".into(),
        ));
    }
    let comp: Vec<usize> = kernel.face.complement(model.dimension()).iter().collect();
    if !comp.is_empty() && !spec.endpoint_only {
        // the Markovian part may leave the truncation mid-path on full-tube
        // events, so only endpoint events are supported off the full face
        return Err(Error::Invalid(
            "full-tube twisted estimation is only supported on the full face; use endpoint mode"
                .into(),
        ));
    }
    // The Markovian tube must fit inside the truncation.
    let nf = spec.n as f64;
    let mut needed = 0i64;
    for &i in &comp {
        let peak = spec
            .path
            .knots()
            .iter()
            .map(|(_, x)| x[i].as_f64())
            .fold(0.0f64, f64::max);
        needed = needed.max(((peak + spec.delta.as_f64()) * nf).ceil() as i64);
    }
    if needed > kernel.truncation.radius {
        return Err(Error::TubeExceedsTruncation {
            needed,
            radius: kernel.truncation.radius,
        });
    }

    let start = spec.rounded_start();
    if violates_constraint(Some(kernel.face), &start) {
        // the hitting-time constraint fails at time zero
        let weights = vec![T::zero(); reps as usize];
        return Ok(summarize(&weights, spec.n, Method::Twisted));
    }
    let y0: Vec<i64> = comp.iter().map(|&i| start[i]).collect();
    let Some(y0_idx) = kernel.truncation.index_of(&y0) else {
        return Err(Error::TubeExceedsTruncation {
            needed: y0.iter().copied().max().unwrap_or(0),
            radius: kernel.truncation.radius,
        });
    };

    let weights: Result<Vec<T>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_for(seed, rep);
            twisted_rep(spec, kernel, &comp, &start, y0_idx, &mut rng, opts)
        })
        .collect();
    Ok(summarize(&weights?, spec.n, Method::Twisted))
}

fn twisted_rep<T: Scalar>(
    spec: &TubeSpec<T>,
    kernel: &TwistedKernel<T>,
    comp: &[usize],
    start: &[i64],
    y0_idx: usize,
    rng: &mut ChaCha8Rng,
    opts: &SimOpts,
) -> Result<T> {
    let nf = T::of(spec.n as f64);
    let t0 = spec.path.start_time();
    let horizon = nf * (spec.path.end_time() - t0);
    let face_coords: Vec<usize> = kernel.face.iter().collect();
    let full_tube = !spec.endpoint_only;
    let knots = spec.path.knots();
    let dim = spec.path.dimension();

    let mut y_idx = y0_idx;
    let mut a_disp = vec![0i64; face_coords.len()];
    let mut x = vec![0i64; dim];
    let reconstruct = |x: &mut [i64], a_disp: &[i64], y_idx: usize| {
        for (pos, &i) in face_coords.iter().enumerate() {
            x[i] = start[i] + a_disp[pos];
        }
        for (pos, &i) in comp.iter().enumerate() {
            x[i] = kernel.truncation.states[y_idx][pos];
        }
    };
    reconstruct(&mut x, &a_disp, y_idx);
    if full_tube && !within(&x, nf, spec.path.start_point(), spec.delta) {
        return Ok(T::zero());
    }

    let mut t = T::zero();
    let mut knot_ptr = 1usize;
    let mut events = 0u64;
    loop {
        let row = &kernel.rows[y_idx];
        let t_next = if row.total > T::zero() {
            t + exp_sample(rng, row.total)
        } else {
            T::infinity()
        };
        let t_stop = t_next.min(horizon);
        if full_tube {
            while knot_ptr < knots.len() && nf * (knots[knot_ptr].0 - t0) < t_stop {
                if !within(&x, nf, &knots[knot_ptr].1, spec.delta) {
                    return Ok(T::zero());
                }
                knot_ptr += 1;
            }
        }
        if t_next >= horizon {
            break;
        }
        let scaled = t0 + t_next / nf;
        if full_tube && !within(&x, nf, &spec.path.eval(scaled), spec.delta) {
            return Ok(T::zero());
        }
        // pick a twisted jump
        let draw = T::of(rng.random::<f64>()) * row.total;
        let mut acc = T::zero();
        let mut chosen = row.jumps.len() - 1;
        for (k, j) in row.jumps.iter().enumerate() {
            acc += j.rate;
            if draw < acc {
                chosen = k;
                break;
            }
        }
        let jump = &row.jumps[chosen];
        for (a, &u) in a_disp.iter_mut().zip(&jump.additive) {
            *a += u;
        }
        y_idx = jump.target;
        t = t_next;
        events += 1;
        if events > opts.max_events {
            return Err(Error::RateExplosion {
                cap: opts.max_events,
            });
        }
        // hitting-time constraint on the face coordinates
        for (pos, &i) in face_coords.iter().enumerate() {
            if start[i] + a_disp[pos] <= 0 {
                return Ok(T::zero());
            }
        }
        reconstruct(&mut x, &a_disp, y_idx);
        if full_tube {
            if !within(&x, nf, &spec.path.eval(scaled), spec.delta) {
                return Ok(T::zero());
            }
            while knot_ptr < knots.len() && nf * (knots[knot_ptr].0 - t0) <= t_next {
                knot_ptr += 1;
            }
        }
    }

    // endpoint window over all coordinates
    reconstruct(&mut x, &a_disp, y_idx);
    if !within(&x, nf, spec.path.end_point(), spec.delta) {
        return Ok(T::zero());
    }

    let exponent = -dot_int(&kernel.tilt, &a_disp) + horizon * kernel.eigenvalue;
    Ok(exponent.exp() * kernel.eigenvector[y0_idx] / kernel.eigenvector[y_idx])
}

/// A constant-velocity reference line for the trend check.
#[derive(Clone, Debug)]
pub struct LdLine<T> {
    pub x0: Vec<T>,
    pub velocity: Vec<T>,
    pub t_end: T,
}

impl<T: Scalar> LdLine<T> {
    pub fn path(&self) -> Result<PiecewisePath<T>> {
        let end: Vec<T> = self
            .x0
            .iter()
            .zip(&self.velocity)
            .map(|(&x, &v)| x + v * self.t_end)
            .collect();
        PiecewisePath::line(T::zero(), self.x0.clone(), self.t_end, end)
    }
}

/// One row of the trend table.
#[derive(Clone, Debug)]
pub struct LdCheckRow<T> {
    pub n: u64,
    pub method: Method,
    pub reps: u64,
    pub hits: u64,
    pub p_hat: T,
    pub log_over_n: T,
    /// Analytic cost of the reference line (`T·L_Λ(v)`).
    pub target: T,
    pub stderr_log: T,
    pub zero_hits: bool,
}

fn derived_seed(seed: u64, row: u64) -> u64 {
    seed.wrapping_add((row + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Estimates the tube or endpoint event probability of a constant-velocity
/// line at each scale in `ns`, with both the direct and the twisted
/// estimator, next to the analytic cost target.
///
/// `endpoint_only = true` checks the endpoint window with the hitting-time
/// constraint; `false` checks the whole tube (full-face lines only, since the
/// twisted process must not leave its truncation mid-path).
pub fn ld_check<T: Scalar>(
    model: &NetworkModel<T>,
    line: &LdLine<T>,
    ns: &[u64],
    delta: T,
    reps: u64,
    seed: u64,
    endpoint_only: bool,
    rate_opts: &RateOpts<T>,
    sim_opts: &SimOpts,
) -> Result<Vec<LdCheckRow<T>>> {
    if ns.is_empty() {
        return Err(Error::Invalid("no scales given".into()));
    }
    let path = line.path()?;
    let face = segment_face(path.start_point(), path.end_point())?;
    let cost = path_cost(model, &path, rate_opts)?;
    if !cost.total.is_finite() {
        return Err(Error::Invalid(
            "reference path has infinite cost; no trend to check".into(),
        ));
    }
    let target = cost.total;

    // One twisted kernel sized for the largest scale.
    let comp_count = face.complement(model.dimension()).count();
    let n_max = ns.iter().copied().max().unwrap_or(1);
    let radius = if comp_count == 0 {
        1
    } else {
        let zero_tilt = vec![T::zero(); face.count()];
        let est = lambda(model, face, &zero_tilt, &rate_opts.lambda)?;
        let conv_radius = est.trace.last().expect("nonempty trace").0;
        let peak = path
            .knots()
            .iter()
            .flat_map(|(_, x)| {
                face.complement(model.dimension())
                    .iter()
                    .map(move |i| x[i].as_f64())
            })
            .fold(0.0f64, f64::max);
        let needed = ((peak + delta.as_f64()) * n_max as f64).ceil() as i64 + 2;
        conv_radius.max(needed)
    };
    let trunc = enumerate_truncation(
        face,
        radius,
        model.dimension(),
        rate_opts.lambda.spectral.size_cap,
    )?;
    let v_face: Vec<T> = face.iter().map(|i| line.velocity[i]).collect();
    let kernel = build_twist(model, face, &trunc, &v_face, rate_opts)?;

    let mut rows = Vec::with_capacity(2 * ns.len());
    for (k, &n) in ns.iter().enumerate() {
        let spec = TubeSpec {
            path: path.clone(),
            delta,
            n,
            constrain_face: Some(face),
            endpoint_only,
        };
        let direct = tube_probability(
            model,
            &spec,
            reps,
            derived_seed(seed, 2 * k as u64),
            sim_opts,
        )?;
        rows.push(LdCheckRow {
            n,
            method: Method::Direct,
            reps: direct.reps,
            hits: direct.hits,
            p_hat: direct.p_hat,
            log_over_n: direct.log_over_n,
            target,
            stderr_log: direct.stderr_log,
            zero_hits: direct.zero_hits,
        });
        let twisted = twisted_tube_probability(
            model,
            &spec,
            &kernel,
            reps,
            derived_seed(seed, 2 * k as u64 + 1),
            sim_opts,
        )?;
        rows.push(LdCheckRow {
            n,
            method: Method::Twisted,
            reps: twisted.reps,
            hits: twisted.hits,
            p_hat: twisted.p_hat,
            log_over_n: twisted.log_over_n,
            target,
            stderr_log: twisted.stderr_log,
            zero_hits: twisted.zero_hits,
        });
    }
    Ok(rows)
}
