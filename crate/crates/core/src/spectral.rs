//! Tilted killed generators of the local process and their Perron–Frobenius
//! spectra.
//!
//! For a face `Λ`, a truncation `K` of the Markovian part, and a tilt
//! `α ∈ ℝ^Λ`, the generator entry from `y` to `y'` collects
//! `rate · exp(⟨α, u_Λ⟩)` over all local jumps that move the Markovian part
//! from `y` to `y'` (including `y' = y`), while the diagonal subtracts the
//! total outflow. Jumps whose Markovian target stays in the orthant but
//! leaves `K` contribute to the outflow only: the process is killed on exit
//! from `K`. The maximal real eigenvalue of this matrix grows to the face's
//! exponent `λ_Λ(α)` as the truncation grows.

use crate::error::{Error, Result};
use crate::linalg::DMat;
use crate::localproc::{enumerate_truncation, local_jumps, Truncation, DEFAULT_SIZE_CAP};
use crate::model::{NetworkModel, SubsetMask};
use crate::scalar::{dot_int, Scalar};

/// Options for generator assembly and eigenvalue solves.
#[derive(Clone, Debug)]
pub struct SpectralOpts<T> {
    /// Dimension at or below which the dense shifted-inverse solver is used;
    /// larger problems use shifted power iteration.
    pub dense_cutoff: usize,
    /// Relative-change stopping tolerance and residual bound factor.
    pub tol: T,
    /// Iteration cap for the power path.
    pub max_iters: usize,
    /// Restrict the truncation to the strongly connected component of the
    /// origin instead of failing when the support graph is reducible.
    pub shrink_to_component: bool,
    /// Cap on truncation sizes.
    pub size_cap: usize,
}

impl<T: Scalar> Default for SpectralOpts<T> {
    fn default() -> Self {
        SpectralOpts {
            dense_cutoff: 400,
            tol: T::of(1e-12),
            max_iters: 500_000,
            shrink_to_component: false,
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

/// The matrix `Q_{Λ,K}(α)`, stored sparse by rows with the diagonal merged in.
#[derive(Clone, Debug)]
pub struct TiltedGenerator<T> {
    pub face: SubsetMask,
    pub truncation: Truncation,
    pub tilt: Vec<T>,
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> TiltedGenerator<T> {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.rows[i]
            .iter()
            .find(|(c, _)| *c == j)
            .map(|&(_, v)| v)
            .unwrap_or_else(T::zero)
    }

    pub fn matvec(&self, x: &[T], out: &mut [T]) {
        for (i, row) in self.rows.iter().enumerate() {
            out[i] = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }

    pub fn row_sum(&self, i: usize) -> T {
        self.rows[i].iter().map(|&(_, v)| v).sum()
    }

    pub fn max_abs_diagonal(&self) -> T {
        (0..self.dim())
            .map(|i| self.entry(i, i).abs())
            .fold(T::zero(), T::max)
    }

    pub fn to_dense(&self) -> DMat<T> {
        let mut m = DMat::zeros(self.dim());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m.add_to(i, j, v);
            }
        }
        m
    }

    /// Dense matrix exponential `exp(t·Q)`; only for modest dimensions.
    pub fn semigroup_dense(&self, t: T) -> Result<DMat<T>> {
        if self.dim() > 2000 {
            return Err(Error::SizeOverflow {
                size: self.dim() as u128,
                cap: 2000,
            });
        }
        Ok(self.to_dense().expm(t))
    }

    /// Off-diagonal support edges (independent of the tilt).
    fn support(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .filter(|&&(j, v)| j != i && v > T::zero())
                    .map(|&(j, _)| j)
                    .collect()
            })
            .collect()
    }
}

fn assemble<T: Scalar>(
    model: &NetworkModel<T>,
    trunc: &Truncation,
    alpha: &[T],
) -> Result<Vec<Vec<(usize, T)>>> {
    let mut rows: Vec<Vec<(usize, T)>> = Vec::with_capacity(trunc.len());
    for y in &trunc.states {
        let jumps = local_jumps(model, trunc.face, y)?;
        let mut entries: Vec<(usize, T)> = Vec::with_capacity(jumps.len() + 1);
        let mut outflow = T::zero();
        let mut target = vec![0i64; y.len()];
        for jump in &jumps {
            outflow += jump.rate;
            for (t, (&yc, &dc)) in target.iter_mut().zip(y.iter().zip(&jump.markov)) {
                *t = yc + dc;
            }
            let Some(j) = trunc.index_of(&target) else {
                continue; // killed on exit from K
            };
            let weight = jump.rate * dot_int(alpha, &jump.additive).exp();
            match entries.iter_mut().find(|(c, _)| *c == j) {
                Some((_, v)) => *v += weight,
                None => entries.push((j, weight)),
            }
        }
        let i = rows.len();
        match entries.iter_mut().find(|(c, _)| *c == i) {
            Some((_, v)) => *v -= outflow,
            None => entries.push((i, -outflow)),
        }
        entries.sort_by_key(|&(j, _)| j);
        rows.push(entries);
    }
    Ok(rows)
}

/// Builds `Q_{Λ,K}(α)` on the given truncation.
///
/// The support graph must be strongly connected; with
/// `shrink_to_component` the truncation is first restricted to the strongly
/// connected component of the origin, otherwise reducibility is an error.
pub fn build<T: Scalar>(
    model: &NetworkModel<T>,
    face: SubsetMask,
    trunc: &Truncation,
    alpha: &[T],
    opts: &SpectralOpts<T>,
) -> Result<TiltedGenerator<T>> {
    if alpha.len() != face.count() {
        return Err(Error::Invalid(format!(
            "tilt has {} components, face {} needs {}",
            alpha.len(),
            face,
            face.count()
        )));
    }
    if !alpha.iter().all(|a| a.is_finite()) {
        return Err(Error::Invalid("tilt must be finite".into()));
    }
    if trunc.is_empty() {
        return Err(Error::Invalid("truncation is empty".into()));
    }
    let rows = assemble(model, trunc, alpha)?;
    let gen = TiltedGenerator {
        face,
        truncation: trunc.clone(),
        tilt: alpha.to_vec(),
        rows,
    };

    let component = origin_component(&gen.support(), trunc.origin());
    if component.len() == trunc.len() {
        return Ok(gen);
    }
    if !opts.shrink_to_component {
        return Err(Error::NotIrreducible {
            component: component.len(),
            total: trunc.len(),
        });
    }
    let restricted = trunc.restrict(&component);
    let rows = assemble(model, &restricted, alpha)?;
    Ok(TiltedGenerator {
        face,
        truncation: restricted,
        tilt: alpha.to_vec(),
        rows,
    })
}

/// Indices (ascending) of the strongly connected component containing `start`.
fn origin_component(adj: &[Vec<usize>], start: usize) -> Vec<usize> {
    let n = adj.len();
    let mut radj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, vs) in adj.iter().enumerate() {
        for &v in vs {
            radj[v].push(u);
        }
    }
    let fwd = reach(adj, start);
    let bwd = reach(&radj, start);
    (0..n).filter(|&i| fwd[i] && bwd[i]).collect()
}

fn reach(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Perron–Frobenius eigenpair of a tilted generator.
#[derive(Clone, Debug)]
pub struct SpectralResult<T> {
    /// Maximal real eigenvalue, per unit time.
    pub eigenvalue: T,
    /// Strictly positive right eigenvector, normalized to 1 at the origin state.
    pub eigenvector: Vec<T>,
    /// Max-norm of `Q·f − λ·f`.
    pub residual: T,
}

/// Computes the maximal real eigenvalue and positive right eigenvector.
///
/// The matrix is shifted by one more than its largest diagonal magnitude so
/// the iteration runs on a primitive nonnegative matrix. Below the dense
/// cutoff the power warm-up is refined by shifted-inverse (Rayleigh)
/// iteration; above it, pure power iteration with a relative-change stop.
pub fn pf_eigen<T: Scalar>(
    q: &TiltedGenerator<T>,
    opts: &SpectralOpts<T>,
) -> Result<SpectralResult<T>> {
    let n = q.dim();
    let origin = q.truncation.origin();
    if n == 1 {
        let value = q.entry(0, 0);
        return Ok(SpectralResult {
            eigenvalue: value,
            eigenvector: vec![T::one()],
            residual: T::zero(),
        });
    }

    let shift = q.max_abs_diagonal() + T::one();
    let mut v = vec![T::one() / T::of(n as f64); n];
    let mut qv = vec![T::zero(); n];
    let mut rayleigh = T::zero();

    let warmup = if n <= opts.dense_cutoff {
        40
    } else {
        opts.max_iters
    };
    let mut converged_power = false;
    let mut last = T::infinity();
    let mut stable = 0usize;
    for _ in 0..warmup {
        q.matvec(&v, &mut qv);
        let vv: T = v.iter().map(|&x| x * x).sum();
        let vqv: T = v.iter().zip(&qv).map(|(&a, &b)| a * b).sum();
        rayleigh = vqv / vv;
        // w = (Q + shift I) v, normalized by its max entry
        let mut max = T::zero();
        for (w, &x) in qv.iter_mut().zip(&v) {
            *w += shift * x;
            max = max.max(w.abs());
        }
        if max == T::zero() {
            return Err(Error::NoConvergence {
                iters: 0,
                residual: f64::INFINITY,
            });
        }
        for (x, &w) in v.iter_mut().zip(&qv) {
            *x = w / max;
        }
        let change = (rayleigh - last).abs();
        last = rayleigh;
        if change <= opts.tol * rayleigh.abs().max(T::one()) {
            stable += 1;
            if stable >= 3 {
                converged_power = true;
                break;
            }
        } else {
            stable = 0;
        }
    }

    if n <= opts.dense_cutoff {
        // Rayleigh-quotient inverse iteration on the dense matrix. Accept on
        // a small eigen-residual: near-degenerate top pairs can keep the
        // Rayleigh quotient jittering at machine scale long after the
        // eigenpair has converged.
        let dense = q.to_dense();
        let scale = q.max_abs_diagonal().max(T::one());
        let mut mu = rayleigh;
        let mut iters = 0usize;
        loop {
            iters += 1;
            if iters > 200 {
                let residual = residual_norm(q, &v, mu);
                return Err(Error::NoConvergence {
                    iters,
                    residual: residual.as_f64(),
                });
            }
            let w = match dense.solve_shifted(mu, &v) {
                Ok(w) => w,
                Err(_) => {
                    // shift sits exactly on an eigenvalue; nudge it
                    mu += T::of(1e-12) * mu.abs().max(T::one());
                    continue;
                }
            };
            let max = w.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
            let vnew: Vec<T> = w.iter().map(|&x| x / max).collect();
            q.matvec(&vnew, &mut qv);
            let vv: T = vnew.iter().map(|&x| x * x).sum();
            let vqv: T = vnew.iter().zip(&qv).map(|(&a, &b)| a * b).sum();
            let mu_new = vqv / vv;
            let residual = qv
                .iter()
                .zip(&vnew)
                .map(|(&a, &b)| (a - mu_new * b).abs())
                .fold(T::zero(), T::max);
            let done = (mu_new - mu).abs() <= opts.tol * mu_new.abs().max(T::one())
                || residual <= opts.tol * scale;
            v = vnew;
            mu = mu_new;
            if done {
                break;
            }
        }
        return finish(q, v, mu, origin, opts);
    }

    if !converged_power {
        let residual = residual_norm(q, &v, rayleigh);
        return Err(Error::NoConvergence {
            iters: opts.max_iters,
            residual: residual.as_f64(),
        });
    }
    finish(q, v, rayleigh, origin, opts)
}

fn residual_norm<T: Scalar>(q: &TiltedGenerator<T>, v: &[T], lambda: T) -> T {
    let mut qv = vec![T::zero(); v.len()];
    q.matvec(v, &mut qv);
    qv.iter()
        .zip(v)
        .map(|(&a, &b)| (a - lambda * b).abs())
        .fold(T::zero(), T::max)
}

fn finish<T: Scalar>(
    q: &TiltedGenerator<T>,
    mut v: Vec<T>,
    lambda: T,
    origin: usize,
    opts: &SpectralOpts<T>,
) -> Result<SpectralResult<T>> {
    // orient so the origin entry is positive, then normalize there
    if v[origin] < T::zero() {
        for x in &mut v {
            *x = -*x;
        }
    }
    let anchor = v[origin];
    if anchor <= T::zero() {
        return Err(Error::NoConvergence {
            iters: 0,
            residual: residual_norm(q, &v, lambda).as_f64(),
        });
    }
    for x in &mut v {
        *x /= anchor;
    }
    if v.iter().any(|&x| x <= T::zero()) {
        return Err(Error::NoConvergence {
            iters: 0,
            residual: residual_norm(q, &v, lambda).as_f64(),
        });
    }
    let residual = residual_norm(q, &v, lambda);
    let fmax = v.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let scale = q.max_abs_diagonal().max(T::one());
    if residual > opts.tol * fmax * scale * T::of(100.0) {
        return Err(Error::NoConvergence {
            iters: 0,
            residual: residual.as_f64(),
        });
    }
    Ok(SpectralResult {
        eigenvalue: lambda,
        eigenvector: v,
        residual,
    })
}

/// Exponent estimate along a schedule of growing truncations.
#[derive(Clone, Debug)]
pub struct LambdaEstimate<T> {
    /// Best estimate of `λ_Λ(α)`: the last extrapolant when the trace
    /// supports Aitken extrapolation, otherwise the last raw eigenvalue.
    pub value: T,
    /// `(radius, λ_{Λ,K_m}(α))` along the schedule; nondecreasing in `m`.
    pub trace: Vec<(i64, T)>,
    /// Aitken-extrapolated limit estimates from consecutive trace triples.
    pub extrapolated: Vec<T>,
    pub converged: bool,
}

/// Options for the truncation schedule.
#[derive(Clone, Debug)]
pub struct LambdaOpts<T> {
    /// Box radii to visit, increasing.
    pub schedule: Vec<i64>,
    /// Convergence tolerance on successive estimates.
    pub tol: T,
    pub spectral: SpectralOpts<T>,
}

impl<T: Scalar> Default for LambdaOpts<T> {
    fn default() -> Self {
        LambdaOpts {
            schedule: vec![2, 4, 8, 16, 32, 64, 128],
            tol: T::of(1e-8),
            spectral: SpectralOpts {
                shrink_to_component: true,
                ..SpectralOpts::default()
            },
        }
    }
}

/// Approximates `λ_Λ(α)` as the supremum over box truncations.
///
/// The raw eigenvalue trace increases with the radius; successive triples are
/// Aitken-extrapolated to estimate the limit. The schedule stops early once
/// the raw increment falls below `tol`. For the full face the closed form is
/// returned directly.
pub fn lambda<T: Scalar>(
    model: &NetworkModel<T>,
    face: SubsetMask,
    alpha: &[T],
    opts: &LambdaOpts<T>,
) -> Result<LambdaEstimate<T>> {
    if opts.schedule.is_empty() {
        return Err(Error::Invalid("truncation schedule is empty".into()));
    }
    if face == SubsetMask::full(model.dimension()) {
        let value = lambda_full(model, alpha);
        return Ok(LambdaEstimate {
            value,
            trace: vec![(0, value)],
            extrapolated: Vec::new(),
            converged: true,
        });
    }

    let mut trace: Vec<(i64, T)> = Vec::new();
    let mut extrapolated: Vec<T> = Vec::new();
    let mut converged = false;
    for &m in &opts.schedule {
        let trunc = enumerate_truncation(face, m, model.dimension(), opts.spectral.size_cap)?;
        let gen = build(model, face, &trunc, alpha, &opts.spectral)?;
        let pf = pf_eigen(&gen, &opts.spectral)?;
        trace.push((m, pf.eigenvalue));

        let k = trace.len();
        if k >= 3 {
            extrapolated.push(aitken(trace[k - 3].1, trace[k - 2].1, trace[k - 1].1));
        }
        let le = extrapolated.len();
        if le >= 2 && (extrapolated[le - 1] - extrapolated[le - 2]).abs() < opts.tol {
            converged = true;
            break;
        }
        if k >= 2 && (trace[k - 1].1 - trace[k - 2].1).abs() < opts.tol {
            converged = true;
            break;
        }
    }
    let value = extrapolated
        .last()
        .copied()
        .unwrap_or_else(|| trace.last().expect("nonempty trace").1);
    Ok(LambdaEstimate {
        value,
        trace,
        extrapolated,
        converged,
    })
}

/// Aitken Δ² limit estimate from three consecutive values.
fn aitken<T: Scalar>(a: T, b: T, c: T) -> T {
    let d1 = b - a;
    let d2 = c - b;
    let denom = d1 - d2;
    if denom.abs() <= T::epsilon() * (d1.abs() + d2.abs()).max(T::epsilon()) || d2.abs() > d1.abs()
    {
        return c;
    }
    c + d2 * d2 / denom
}

/// Closed-form exponent of the full face:
/// `λ(α) = Σ_u μ(u)(e^{⟨α,u⟩} − 1)`.
pub fn lambda_full<T: Scalar>(model: &NetworkModel<T>, alpha: &[T]) -> T {
    lambda_full_with_grad(model, alpha).0
}

/// Full-face exponent with its analytic gradient `Σ_u μ(u)·u·e^{⟨α,u⟩}`.
pub fn lambda_full_with_grad<T: Scalar>(model: &NetworkModel<T>, alpha: &[T]) -> (T, Vec<T>) {
    let n = model.dimension();
    assert_eq!(alpha.len(), n, "full-face tilt has one component per axis");
    let mut value = T::zero();
    let mut grad = vec![T::zero(); n];
    if let Some(measure) = model.measure(SubsetMask::full(n)) {
        for (atom, rate) in measure.atoms() {
            let e = dot_int(alpha, atom).exp();
            value += rate * (e - T::one());
            for (g, &u) in grad.iter_mut().zip(atom) {
                *g += rate * T::of(u as f64) * e;
            }
        }
    }
    (value, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testmodels::{mm1, tandem};

    fn mm1_empty_face_gen(radius: i64, alpha_none: &[f64]) -> TiltedGenerator<f64> {
        let m = mm1();
        let trunc = enumerate_truncation(SubsetMask::empty(), radius, 1, DEFAULT_SIZE_CAP).unwrap();
        build(
            &m,
            SubsetMask::empty(),
            &trunc,
            alpha_none,
            &SpectralOpts::default(),
        )
        .unwrap()
    }

    #[test]
    fn build_mm1_empty_face_fixture() {
        let gen = mm1_empty_face_gen(1, &[]);
        assert_eq!(gen.dim(), 2);
        assert_eq!(gen.entry(0, 0), -1.0);
        assert_eq!(gen.entry(0, 1), 1.0);
        assert_eq!(gen.entry(1, 0), 2.0);
        assert_eq!(gen.entry(1, 1), -3.0);
    }

    #[test]
    fn build_full_face_singleton() {
        let m = mm1();
        let full = SubsetMask::full(1);
        let trunc = enumerate_truncation(full, 1, 1, DEFAULT_SIZE_CAP).unwrap();
        let gen = build(&m, full, &trunc, &[0.0], &SpectralOpts::default()).unwrap();
        assert_eq!(gen.dim(), 1);
        assert!(gen.entry(0, 0).abs() < 1e-15);

        let gen = build(&m, full, &trunc, &[2f64.ln()], &SpectralOpts::default()).unwrap();
        // 1·2 + 2·0.5 − 3 = 0
        assert!(gen.entry(0, 0).abs() < 1e-14);
    }

    #[test]
    fn row_sums_nonpositive_at_zero_tilt() {
        let m = tandem();
        for face in [SubsetMask::empty(), SubsetMask::from_indices([0])] {
            let trunc = enumerate_truncation(face, 3, 2, DEFAULT_SIZE_CAP).unwrap();
            let alpha = vec![0.0; face.count()];
            let gen = build(&m, face, &trunc, &alpha, &SpectralOpts::default()).unwrap();
            for i in 0..gen.dim() {
                assert!(gen.row_sum(i) <= 1e-12);
            }
        }
    }

    #[test]
    fn support_graph_independent_of_tilt() {
        let m = tandem();
        let face = SubsetMask::from_indices([0]);
        let trunc = enumerate_truncation(face, 4, 2, DEFAULT_SIZE_CAP).unwrap();
        let opts = SpectralOpts::default();
        let g0 = build(&m, face, &trunc, &[0.0], &opts).unwrap();
        let g1 = build(&m, face, &trunc, &[1.3], &opts).unwrap();
        assert_eq!(g0.support(), g1.support());
    }

    #[test]
    fn pf_eigen_two_state_fixture() {
        let gen = mm1_empty_face_gen(1, &[]);
        let pf = pf_eigen(&gen, &SpectralOpts::default()).unwrap();
        let expected = -2.0 + 3f64.sqrt();
        assert!((pf.eigenvalue - expected).abs() < 1e-12);
        assert!((pf.eigenvector[0] - 1.0).abs() < 1e-14);
        assert!((pf.eigenvector[1] - (3f64.sqrt() - 1.0)).abs() < 1e-10);
        assert!(pf.residual < 1e-10);
    }

    #[test]
    fn pf_eigen_conservative_symmetric() {
        // a two-state flip-flop: its box generator is the conservative
        // symmetric [[-1, 1], [1, -1]] with eigenpair (0, (1, 1))
        let text = "N 1\nmeasure 1\n-1 : 1.0\nmeasure empty\n1 : 1.0\n";
        let m: NetworkModel<f64> = NetworkModel::parse_str(text).unwrap();
        let trunc = enumerate_truncation(SubsetMask::empty(), 1, 1, DEFAULT_SIZE_CAP).unwrap();
        let gen = build(
            &m,
            SubsetMask::empty(),
            &trunc,
            &[],
            &SpectralOpts::default(),
        )
        .unwrap();
        assert_eq!(gen.entry(0, 0), -1.0);
        assert_eq!(gen.entry(0, 1), 1.0);
        assert_eq!(gen.entry(1, 0), 1.0);
        assert_eq!(gen.entry(1, 1), -1.0);
        let pf = pf_eigen(&gen, &SpectralOpts::default()).unwrap();
        assert!(pf.eigenvalue.abs() < 1e-12);
        assert!((pf.eigenvector[0] - 1.0).abs() < 1e-10);
        assert!((pf.eigenvector[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pf_power_path_matches_dense_path() {
        let m = mm1();
        let trunc = enumerate_truncation(SubsetMask::empty(), 60, 1, DEFAULT_SIZE_CAP).unwrap();
        let opts_dense = SpectralOpts::default();
        let gen = build(&m, SubsetMask::empty(), &trunc, &[], &opts_dense).unwrap();
        let dense = pf_eigen(&gen, &opts_dense).unwrap();
        let opts_power = SpectralOpts {
            dense_cutoff: 4,
            tol: 1e-13,
            ..SpectralOpts::default()
        };
        let power = pf_eigen(&gen, &opts_power).unwrap();
        assert!((dense.eigenvalue - power.eigenvalue).abs() < 1e-8);
    }

    #[test]
    fn power_path_reports_no_convergence_when_starved() {
        let m = mm1();
        let trunc = enumerate_truncation(SubsetMask::empty(), 30, 1, DEFAULT_SIZE_CAP).unwrap();
        let opts = SpectralOpts {
            dense_cutoff: 2,
            max_iters: 3,
            ..SpectralOpts::default()
        };
        let gen = build(&m, SubsetMask::empty(), &trunc, &[], &opts).unwrap();
        let err = pf_eigen(&gen, &opts).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn not_irreducible_without_shrink() {
        // pure birth: no way back down, box graph is a chain
        let text = "N 1\nmeasure 1\n1 : 1.0\nmeasure empty\n1 : 1.0\n";
        let m: NetworkModel<f64> = NetworkModel::parse_str(text).unwrap();
        let trunc = enumerate_truncation(SubsetMask::empty(), 3, 1, DEFAULT_SIZE_CAP).unwrap();
        let err = build(
            &m,
            SubsetMask::empty(),
            &trunc,
            &[],
            &SpectralOpts::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotIrreducible { .. }));
        let opts = SpectralOpts {
            shrink_to_component: true,
            ..SpectralOpts::default()
        };
        let gen = build(&m, SubsetMask::empty(), &trunc, &[], &opts).unwrap();
        assert_eq!(gen.dim(), 1); // origin alone
    }

    #[test]
    fn lambda_full_examples() {
        let m = mm1();
        assert_eq!(lambda_full(&m, &[0.0]), 0.0);
        assert!(lambda_full(&m, &[2f64.ln()]).abs() < 1e-15);
        let expected = (1f64.exp() - 1.0) + 2.0 * ((-1f64).exp() - 1.0);
        assert!((lambda_full(&m, &[1.0]) - expected).abs() < 1e-15);
    }

    #[test]
    fn lambda_full_gradient_matches_finite_differences() {
        let m = tandem();
        let alpha = [0.3, -0.2];
        let (_, grad) = lambda_full_with_grad(&m, &alpha);
        let h = 1e-6;
        for i in 0..2 {
            let mut up = alpha;
            let mut dn = alpha;
            up[i] += h;
            dn[i] -= h;
            let fd = (lambda_full(&m, &up) - lambda_full(&m, &dn)) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1.0),
                "component {i}: fd {fd} vs analytic {}",
                grad[i]
            );
        }
    }

    #[test]
    fn lambda_bypasses_solver_on_full_face() {
        let m = mm1();
        let est = lambda(&m, SubsetMask::full(1), &[0.0], &LambdaOpts::default()).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.converged);
        assert_eq!(est.trace.len(), 1);
    }

    #[test]
    fn lambda_empty_face_stable_mm1_is_conservative() {
        // the stable queue is ergodic, so the whole-chain exponent is zero:
        // the killed-box eigenvalues rise to 0 exponentially fast
        let m = mm1();
        let opts = LambdaOpts {
            schedule: vec![25, 50, 100, 200],
            tol: 0.0,
            ..LambdaOpts::default()
        };
        let est = lambda(&m, SubsetMask::empty(), &[], &opts).unwrap();
        for w in est.trace.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-12);
        }
        assert!(est.trace.iter().all(|&(_, v)| v <= 1e-12));
        assert!(est.value.abs() < 1e-6, "value {}", est.value);
    }

    #[test]
    fn lambda_empty_face_unstable_mm1_converges_to_decay_rate() {
        // with the rates flipped the queue is transient and the exponent is
        // the classic decay rate −(√2−1)²
        let text = "N 1\nmeasure 1\n1 : 2.0\n-1 : 1.0\nmeasure empty\n1 : 2.0\n";
        let m: NetworkModel<f64> = NetworkModel::parse_str(text).unwrap();
        let opts = LambdaOpts {
            schedule: vec![25, 50, 100, 200],
            tol: 0.0,
            ..LambdaOpts::default()
        };
        let est = lambda(&m, SubsetMask::empty(), &[], &opts).unwrap();
        let target = -(3.0 - 2.0 * 2f64.sqrt());
        for w in est.trace.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-12);
        }
        assert!(
            (est.value - target).abs() < 1e-3,
            "value {} vs {target}",
            est.value
        );
        // extrapolation sharpens the raw trace
        assert!((est.value - target).abs() < (est.trace.last().unwrap().1 - target).abs());
    }

    #[test]
    fn lambda_tandem_boundary_face_nonpositive() {
        let m = tandem();
        let est = lambda(
            &m,
            SubsetMask::from_indices([0]),
            &[0.0],
            &LambdaOpts::default(),
        )
        .unwrap();
        for w in est.trace.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-12);
        }
        assert!(est.value <= 1e-9);
        assert!(est.converged);
    }

    #[test]
    fn lambda_monotone_in_truncation_and_convex_in_tilt() {
        let m = tandem();
        let face = SubsetMask::from_indices([0]);
        let opts = SpectralOpts {
            shrink_to_component: true,
            ..SpectralOpts::default()
        };
        let alphas = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let radii = [2i64, 4, 8];
        let mut values = std::collections::HashMap::new();
        for &a in &alphas {
            let mut prev = f64::NEG_INFINITY;
            for &r in &radii {
                let trunc = enumerate_truncation(face, r, 2, DEFAULT_SIZE_CAP).unwrap();
                let gen = build(&m, face, &trunc, &[a], &opts).unwrap();
                let pf = pf_eigen(&gen, &opts).unwrap();
                assert!(pf.eigenvalue >= prev - 1e-9, "monotonicity in K");
                prev = pf.eigenvalue;
                values.insert((a.to_bits(), r), pf.eigenvalue);
            }
        }
        // midpoint convexity at the largest radius over all pairs
        for &a in &alphas {
            for &b in &alphas {
                let mid = 0.5 * (a + b);
                if !alphas.contains(&mid) {
                    continue;
                }
                let va = values[&(a.to_bits(), 8)];
                let vb = values[&(b.to_bits(), 8)];
                let vm = values[&(mid.to_bits(), 8)];
                assert!(vm <= 0.5 * (va + vb) + 1e-8);
            }
        }
    }
}
