//! Numerical Legendre–Fenchel transform of the face exponents and the local
//! rate functions they induce.
//!
//! `λ*(v) = sup_α (⟨α, v⟩ − λ(α))` is computed by gradient ascent on the
//! concave objective with backtracking. Full-face exponents use the closed
//! form and its analytic gradient. Sub-face exponents go through the
//! spectral solver with central-difference gradients; since the
//! per-truncation conjugates decrease toward the face conjugate as the
//! truncation grows, `local_rate` sweeps the truncation schedule and
//! extrapolates the trace.

use crate::error::{Error, Result};
use crate::localproc::enumerate_truncation;
use crate::model::{active_set_real, NetworkModel, SubsetMask};
use crate::scalar::{dot, inf_norm, Scalar};
use crate::spectral::{build, lambda, lambda_full_with_grad, pf_eigen, LambdaOpts, SpectralOpts};

/// Evaluator of a convex exponent `α → λ(α)` and its gradient.
pub trait RateEvaluator<T: Scalar> {
    fn value(&mut self, alpha: &[T]) -> Result<T>;
    fn value_grad(&mut self, alpha: &[T]) -> Result<(T, Vec<T>)>;
    /// Smallest gradient norm the evaluator can resolve.
    fn gradient_floor(&self) -> T {
        T::zero()
    }
}

/// Closed-form full-face evaluator.
pub struct FullFaceEvaluator<'a, T> {
    pub model: &'a NetworkModel<T>,
}

impl<T: Scalar> RateEvaluator<T> for FullFaceEvaluator<'_, T> {
    fn value(&mut self, alpha: &[T]) -> Result<T> {
        Ok(lambda_full_with_grad(self.model, alpha).0)
    }
    fn value_grad(&mut self, alpha: &[T]) -> Result<(T, Vec<T>)> {
        Ok(lambda_full_with_grad(self.model, alpha))
    }
}

/// Spectral evaluator on a fixed truncation, with central-difference
/// gradients of step `fd_step · (1 + ‖α‖∞)`.
pub struct TruncatedFaceEvaluator<'a, T> {
    pub model: &'a NetworkModel<T>,
    pub face: SubsetMask,
    pub trunc: crate::localproc::Truncation,
    pub spectral: SpectralOpts<T>,
    pub fd_step: T,
}

impl<T: Scalar> TruncatedFaceEvaluator<'_, T> {
    fn solve(&self, alpha: &[T]) -> Result<T> {
        let gen = build(self.model, self.face, &self.trunc, alpha, &self.spectral)
            .map_err(|e| Error::OracleFailure(Box::new(e)))?;
        let pf = pf_eigen(&gen, &self.spectral).map_err(|e| Error::OracleFailure(Box::new(e)))?;
        Ok(pf.eigenvalue)
    }
}

impl<T: Scalar> RateEvaluator<T> for TruncatedFaceEvaluator<'_, T> {
    fn value(&mut self, alpha: &[T]) -> Result<T> {
        self.solve(alpha)
    }

    fn value_grad(&mut self, alpha: &[T]) -> Result<(T, Vec<T>)> {
        let value = self.solve(alpha)?;
        let h = self.fd_step * (T::one() + inf_norm(alpha));
        let mut grad = vec![T::zero(); alpha.len()];
        let mut probe = alpha.to_vec();
        for i in 0..alpha.len() {
            probe[i] = alpha[i] + h;
            let up = self.solve(&probe)?;
            probe[i] = alpha[i] - h;
            let down = self.solve(&probe)?;
            probe[i] = alpha[i];
            grad[i] = (up - down) / (h + h);
        }
        Ok((value, grad))
    }

    fn gradient_floor(&self) -> T {
        // central differences on an eigenvalue computed to ~1e-14 absolute
        T::of(1e-7)
    }
}

/// Options for the concave maximization.
#[derive(Clone, Debug)]
pub struct LegendreOpts<T> {
    /// Stop when the ascent gradient max-norm falls below this.
    pub gtol: T,
    pub max_iters: usize,
    /// Tilt radius beyond which a still-ascending objective is declared
    /// unbounded (`λ*(v) = +∞`).
    pub domain_radius: T,
    /// Ascent slope below which the radius escape is not triggered.
    pub slope_eps: T,
}

impl<T: Scalar> Default for LegendreOpts<T> {
    fn default() -> Self {
        LegendreOpts {
            gtol: T::of(1e-9),
            max_iters: 2000,
            domain_radius: T::of(50.0),
            slope_eps: T::of(1e-8),
        }
    }
}

/// Result of a conjugate evaluation.
#[derive(Clone, Debug)]
pub struct LegendreResult<T> {
    /// `λ*(v)`; `+∞` when `v` lies outside the effective domain.
    pub value: T,
    /// Maximizing tilt; absent for the empty face or when the value is `+∞`.
    pub argmax_tilt: Option<Vec<T>>,
    /// `‖∇λ(α_v) − v‖∞` at the returned tilt.
    pub gradient_residual: T,
}

/// Maximizes `g(α) = ⟨α, v⟩ − λ(α)` from `α = 0` by gradient ascent with
/// backtracking. If the iterate escapes `domain_radius` while the objective
/// still ascends at slope ≥ `slope_eps`, the conjugate is reported infinite.
pub fn legendre<T: Scalar, E: RateEvaluator<T>>(
    eval: &mut E,
    v: &[T],
    opts: &LegendreOpts<T>,
) -> Result<LegendreResult<T>> {
    legendre_from(eval, v, None, opts)
}

/// [`legendre`] with an explicit starting tilt (used to warm-start sweeps
/// over growing truncations).
pub fn legendre_from<T: Scalar, E: RateEvaluator<T>>(
    eval: &mut E,
    v: &[T],
    start: Option<&[T]>,
    opts: &LegendreOpts<T>,
) -> Result<LegendreResult<T>> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::Invalid("velocity must be finite".into()));
    }
    if v.is_empty() {
        // empty tilt space: sup over {0} of −λ
        let value = eval.value(&[])?;
        return Ok(LegendreResult {
            value: -value,
            argmax_tilt: None,
            gradient_residual: T::zero(),
        });
    }
    let gtol = opts.gtol.max(eval.gradient_floor());

    let mut alpha = match start {
        Some(s) if s.len() == v.len() && s.iter().all(|x| x.is_finite()) => s.to_vec(),
        _ => vec![T::zero(); v.len()],
    };
    let (mut lam, mut grad_lambda) = eval.value_grad(&alpha)?;
    let mut g = dot(&alpha, v) - lam;
    let mut step = T::one();
    let mut best_gnorm = T::infinity();
    let mut no_progress = 0usize;
    for _ in 0..opts.max_iters {
        let ascent: Vec<T> = v
            .iter()
            .zip(&grad_lambda)
            .map(|(&vi, &gi)| vi - gi)
            .collect();
        let gnorm = inf_norm(&ascent);
        if gnorm <= gtol {
            return Ok(LegendreResult {
                value: g,
                argmax_tilt: Some(alpha),
                gradient_residual: gnorm,
            });
        }
        if inf_norm(&alpha) > opts.domain_radius && gnorm >= opts.slope_eps {
            return Ok(LegendreResult {
                value: T::infinity(),
                argmax_tilt: None,
                gradient_residual: gnorm,
            });
        }
        if gnorm < T::of(0.5) * best_gnorm {
            best_gnorm = gnorm;
            no_progress = 0;
        } else {
            no_progress += 1;
            if no_progress >= 15 {
                break; // objective is flat at float resolution; polish below
            }
        }

        // backtracking line search along the gradient
        let gg: T = ascent.iter().map(|&x| x * x).sum();
        let mut accepted = false;
        let mut t = step;
        for _ in 0..60 {
            let trial: Vec<T> = alpha
                .iter()
                .zip(&ascent)
                .map(|(&a, &d)| a + t * d)
                .collect();
            let trial_lam = eval.value(&trial)?;
            let trial_g = dot(&trial, v) - trial_lam;
            if trial_g.is_finite() && trial_g >= g + T::of(0.3) * t * gg {
                alpha = trial;
                lam = trial_lam;
                step = t * T::of(2.0);
                accepted = true;
                break;
            }
            t *= T::of(0.5);
        }
        if !accepted {
            break;
        }
        let refreshed = eval.value_grad(&alpha)?;
        lam = refreshed.0;
        grad_lambda = refreshed.1;
        g = dot(&alpha, v) - lam;
    }

    // Polish by contracting the gradient norm directly: near the optimum the
    // ascent objective is flat to machine precision but the gradient still
    // carries signal. Step size from a secant curvature probe.
    let mut scale = {
        let gnorm0 = inf_norm(
            &v.iter()
                .zip(&grad_lambda)
                .map(|(&vi, &gi)| vi - gi)
                .collect::<Vec<_>>(),
        );
        if gnorm0 > T::zero() && gnorm0.is_finite() {
            let h = T::of(1e-6) * (T::one() + inf_norm(&alpha));
            let probe: Vec<T> = alpha
                .iter()
                .zip(v.iter().zip(&grad_lambda))
                .map(|(&a, (&vi, &gi))| a + h * (vi - gi) / gnorm0)
                .collect();
            let (_, probe_grad) = eval.value_grad(&probe)?;
            let dg = inf_norm(
                &probe_grad
                    .iter()
                    .zip(&grad_lambda)
                    .map(|(&a, &b)| a - b)
                    .collect::<Vec<_>>(),
            );
            let curvature = dg / h;
            if curvature > T::of(1e-12) {
                (T::one() / curvature).min(T::of(1e6))
            } else {
                T::one()
            }
        } else {
            T::one()
        }
    };
    for _ in 0..200 {
        let ascent: Vec<T> = v
            .iter()
            .zip(&grad_lambda)
            .map(|(&vi, &gi)| vi - gi)
            .collect();
        let gnorm = inf_norm(&ascent);
        if gnorm <= gtol {
            break;
        }
        if inf_norm(&alpha) > opts.domain_radius && gnorm >= opts.slope_eps {
            return Ok(LegendreResult {
                value: T::infinity(),
                argmax_tilt: None,
                gradient_residual: gnorm,
            });
        }
        let trial: Vec<T> = alpha
            .iter()
            .zip(&ascent)
            .map(|(&a, &d)| a + scale * d)
            .collect();
        let (trial_lam, trial_grad) = eval.value_grad(&trial)?;
        let trial_gnorm = inf_norm(
            &v.iter()
                .zip(&trial_grad)
                .map(|(&vi, &gi)| vi - gi)
                .collect::<Vec<_>>(),
        );
        if trial_gnorm < gnorm {
            alpha = trial;
            lam = trial_lam;
            grad_lambda = trial_grad;
        } else {
            scale *= T::of(0.5);
            if scale < T::of(1e-14) {
                break;
            }
        }
    }
    g = dot(&alpha, v) - lam;

    let ascent: Vec<T> = v
        .iter()
        .zip(&grad_lambda)
        .map(|(&vi, &gi)| vi - gi)
        .collect();
    Ok(LegendreResult {
        value: g,
        argmax_tilt: Some(alpha),
        gradient_residual: inf_norm(&ascent),
    })
}

/// Options shared by the rate-function operations.
#[derive(Clone, Debug)]
pub struct RateOpts<T> {
    pub legendre: LegendreOpts<T>,
    pub lambda: LambdaOpts<T>,
    /// Central-difference step base for sub-face gradients.
    pub fd_step: T,
    /// Warn when the conjugate moves more than this on the verification
    /// truncation.
    pub verify_tol: T,
}

impl<T: Scalar> Default for RateOpts<T> {
    fn default() -> Self {
        RateOpts {
            legendre: LegendreOpts::default(),
            lambda: LambdaOpts::default(),
            fd_step: T::of(2e-5),
            verify_tol: T::of(1e-4),
        }
    }
}

/// A local rate value `L_Λ(v)` with its maximizing tilt.
#[derive(Clone, Debug)]
pub struct RateResult<T> {
    pub face: SubsetMask,
    /// `L_Λ(v) = λ*_Λ(v_Λ)`, or `+∞`.
    pub value: T,
    /// Maximizing tilt over the face coordinates.
    pub tilt: Option<Vec<T>>,
    pub converged: bool,
    /// Shift of the value between the optimization truncation and the
    /// verification truncation (sub-faces only).
    pub verify_shift: T,
}

/// Local rate function `L_Λ(v)`: conjugate of the face exponent evaluated at
/// the face components of `v` (the complement components are ignored).
///
/// Sub-faces optimize the per-truncation conjugate `λ*_{Λ,K}(v)` along the
/// whole truncation schedule (warm-starting each ascent at the previous
/// tilt). The per-truncation conjugates decrease toward the face conjugate,
/// so the returned value is the Aitken-extrapolated limit of that trace; the
/// residual trace movement is reported as `verify_shift` and clears
/// `converged` when it exceeds `verify_tol`.
pub fn local_rate<T: Scalar>(
    model: &NetworkModel<T>,
    face: SubsetMask,
    v: &[T],
    opts: &RateOpts<T>,
) -> Result<RateResult<T>> {
    let n = model.dimension();
    if v.len() != n {
        return Err(Error::Invalid(format!(
            "velocity has {} components, model dimension is {n}",
            v.len()
        )));
    }
    let v_face: Vec<T> = face.iter().map(|i| v[i]).collect();

    if face == SubsetMask::full(n) {
        let mut eval = FullFaceEvaluator { model };
        let res = legendre(&mut eval, &v_face, &opts.legendre)?;
        let converged = res.value.is_infinite() || res.gradient_residual <= opts.legendre.gtol;
        return Ok(RateResult {
            face,
            value: res.value,
            tilt: res.argmax_tilt,
            converged,
            verify_shift: T::zero(),
        });
    }

    if face.is_empty() {
        let est = lambda(model, face, &[], &opts.lambda)?;
        return Ok(RateResult {
            face,
            value: -est.value,
            tilt: None,
            converged: est.converged,
            verify_shift: T::zero(),
        });
    }

    // Sub-face: conjugate trace along the truncation schedule.
    let mut values: Vec<T> = Vec::new();
    let mut extrapolated: Vec<T> = Vec::new();
    let mut tilt: Option<Vec<T>> = None;
    let mut start: Option<Vec<T>> = None;
    for &m in &opts.lambda.schedule {
        let trunc = enumerate_truncation(face, m, n, opts.lambda.spectral.size_cap)?;
        let mut eval = TruncatedFaceEvaluator {
            model,
            face,
            trunc,
            spectral: opts.lambda.spectral.clone(),
            fd_step: opts.fd_step,
        };
        let res = legendre_from(&mut eval, &v_face, start.as_deref(), &opts.legendre)?;
        if !res.value.is_finite() {
            // the per-truncation domain only shrinks as K grows
            return Ok(RateResult {
                face,
                value: T::infinity(),
                tilt: None,
                converged: true,
                verify_shift: T::zero(),
            });
        }
        start = res.argmax_tilt.clone();
        tilt = res.argmax_tilt;
        values.push(res.value);
        let k = values.len();
        if k >= 3 {
            extrapolated.push(aitken_down(values[k - 3], values[k - 2], values[k - 1]));
        }
        // early exit once the raw trace has settled
        if k >= 2 && (values[k - 1] - values[k - 2]).abs() < opts.lambda.tol {
            break;
        }
    }
    let raw_last = *values.last().expect("nonempty schedule");
    let value = extrapolated.last().copied().unwrap_or(raw_last);
    let verify_shift = match (extrapolated.len(), values.len()) {
        (e, _) if e >= 2 => (extrapolated[e - 1] - extrapolated[e - 2]).abs(),
        (_, k) if k >= 2 => (values[k - 1] - values[k - 2]).abs(),
        _ => T::zero(),
    };
    let converged = verify_shift <= opts.verify_tol;
    Ok(RateResult {
        face,
        value,
        tilt,
        converged,
        verify_shift,
    })
}

/// Aitken Δ² limit estimate for a nonincreasing trace.
fn aitken_down<T: Scalar>(a: T, b: T, c: T) -> T {
    let d1 = b - a;
    let d2 = c - b;
    let denom = d2 - d1;
    if denom.abs() <= T::epsilon() * (d1.abs() + d2.abs()).max(T::epsilon()) || d2.abs() > d1.abs()
    {
        return c;
    }
    c - d2 * d2 / denom
}

/// `L(x, v) = L_{Λ(x)}(v)`: the local rate at the face of the point `x`.
pub fn pointwise_rate<T: Scalar>(
    model: &NetworkModel<T>,
    x: &[T],
    v: &[T],
    opts: &RateOpts<T>,
) -> Result<RateResult<T>> {
    let face = active_set_real(x)?;
    local_rate(model, face, v, opts)
}

/// Closed-form conjugate for a one-dimensional walk with up-rate `a` and
/// down-rate `b`: solve `a e^α − b e^{−α} = v` as a quadratic in `e^α`.
/// Test oracle, independent of the ascent path.
#[cfg(test)]
pub(crate) fn walk_conjugate(a: f64, b: f64, v: f64) -> (f64, f64) {
    let s = (v + (v * v + 4.0 * a * b).sqrt()) / (2.0 * a);
    let alpha = s.ln();
    let value = v * alpha + (a + b) - (v * v + 4.0 * a * b).sqrt();
    (value, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testmodels::{mm1, tandem};

    #[test]
    fn legendre_mm1_closed_form_fixtures() {
        let m = mm1();
        let opts = LegendreOpts::default();
        for (v, expect_value, expect_alpha) in [
            (-1.0, 0.0, 0.0),
            (1.0, 2f64.ln(), 2f64.ln()),
            (0.0, 3.0 - 2.0 * 2f64.sqrt(), 0.5f64.sqrt().ln().abs()),
        ] {
            let mut eval = FullFaceEvaluator { model: &m };
            let res = legendre(&mut eval, &[v], &opts).unwrap();
            assert!(
                (res.value - expect_value).abs() < 1e-9,
                "v={v}: {} vs {expect_value}",
                res.value
            );
            let (oracle_value, oracle_alpha) = walk_conjugate(1.0, 2.0, v);
            assert!((res.value - oracle_value).abs() < 1e-9);
            let alpha = res.argmax_tilt.unwrap()[0];
            assert!((alpha - oracle_alpha).abs() < 1e-7, "v={v}: α={alpha}");
            let _ = expect_alpha;
        }
    }

    #[test]
    fn legendre_detects_unbounded_conjugate() {
        // pure birth walk: negative velocities are unreachable
        let text = "N 1\nmeasure 1\n1 : 1.0\nmeasure empty\n1 : 1.0\n";
        let m: NetworkModel<f64> = NetworkModel::parse_str(text).unwrap();
        let mut eval = FullFaceEvaluator { model: &m };
        let res = legendre(&mut eval, &[-0.5], &LegendreOpts::default()).unwrap();
        assert!(res.value.is_infinite());
        assert!(res.argmax_tilt.is_none());
    }

    #[test]
    fn legendre_boundary_of_domain_reports_best_iterate() {
        // pure birth at v = 0: sup is 1, approached but not attained
        let text = "N 1\nmeasure 1\n1 : 1.0\nmeasure empty\n1 : 1.0\n";
        let m: NetworkModel<f64> = NetworkModel::parse_str(text).unwrap();
        let mut eval = FullFaceEvaluator { model: &m };
        let res = legendre(&mut eval, &[0.0], &LegendreOpts::default()).unwrap();
        assert!(res.value.is_finite());
        assert!((res.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn local_rate_mm1_faces() {
        let m = mm1();
        let opts = RateOpts::default();
        let full = local_rate(&m, SubsetMask::full(1), &[1.0], &opts).unwrap();
        assert!((full.value - 2f64.ln()).abs() < 1e-9);
        assert!(full.converged);

        // pinning the queue at a positive level costs (√2−1)² per unit time
        let pinned = local_rate(&m, SubsetMask::full(1), &[0.0], &opts).unwrap();
        assert!((pinned.value - (2f64.sqrt() - 1.0).powi(2)).abs() < 1e-9);

        // parking the scaled process at the origin is free for a stable queue
        let boundary = local_rate(&m, SubsetMask::empty(), &[0.0], &opts).unwrap();
        assert!(boundary.value.abs() < 1e-6, "{}", boundary.value);
        assert!(boundary.tilt.is_none());
    }

    #[test]
    fn local_rate_unstable_boundary_is_decay_rate() {
        // the transient queue pays the classic decay rate to sit at zero
        let text = "N 1\nmeasure 1\n1 : 2.0\n-1 : 1.0\nmeasure empty\n1 : 2.0\n";
        let m: NetworkModel<f64> = NetworkModel::parse_str(text).unwrap();
        let mut opts = RateOpts::default();
        opts.lambda.schedule = vec![25, 50, 100, 200];
        opts.lambda.tol = 0.0;
        let boundary = local_rate(&m, SubsetMask::empty(), &[0.0], &opts).unwrap();
        let target = (2f64.sqrt() - 1.0).powi(2);
        assert!(
            (boundary.value - target).abs() < 1e-3,
            "{} vs {target}",
            boundary.value
        );
    }

    #[test]
    fn local_rate_vanishes_at_mean_drift() {
        let m = tandem();
        let full = SubsetMask::full(2);
        let drift = m.measure(full).unwrap().mean_drift(2);
        let res = local_rate(&m, full, &drift, &RateOpts::default()).unwrap();
        assert!(res.value.abs() < 1e-10);
    }

    #[test]
    fn pointwise_rate_dispatches_on_face() {
        let m = mm1();
        let opts = RateOpts::default();
        let interior = pointwise_rate(&m, &[1.0], &[-1.0], &opts).unwrap();
        assert!(interior.value.abs() < 1e-10);
        assert_eq!(interior.face, SubsetMask::full(1));

        let boundary = pointwise_rate(&m, &[0.0], &[0.0], &opts).unwrap();
        assert_eq!(boundary.face, SubsetMask::empty());
        assert!(boundary.value.abs() < 1e-6);

        let half = pointwise_rate(&m, &[0.5], &[1.0], &opts).unwrap();
        assert!((half.value - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn fenchel_young_inequality_sampled() {
        let m = mm1();
        for &alpha in &[-1.0, -0.3, 0.0, 0.4, 1.1] {
            let lam = crate::spectral::lambda_full(&m, &[alpha]);
            for &v in &[-2.0, -1.0, 0.0, 0.7, 1.5] {
                let (conj, _) = walk_conjugate(1.0, 2.0, v);
                assert!(alpha * v <= lam + conj + 1e-9);
            }
        }
    }

    #[test]
    fn biconjugate_recovers_lambda_on_grid() {
        let m = mm1();
        for &alpha in &[-0.5, 0.2, 0.8] {
            let lam = crate::spectral::lambda_full(&m, &[alpha]);
            let mut best = f64::NEG_INFINITY;
            let mut v = -4.0;
            while v <= 4.0 {
                let (conj, _) = walk_conjugate(1.0, 2.0, v);
                best = best.max(alpha * v - conj);
                v += 0.001;
            }
            assert!((best - lam).abs() < 1e-3, "α={alpha}: {best} vs {lam}");
        }
    }

    #[test]
    fn sub_face_rate_dominated_by_full_face() {
        // L_Λ(v) ≤ L_full(v) for velocities with zero complement components
        let m = tandem();
        let opts = RateOpts::default();
        let face = SubsetMask::from_indices([0]);
        for &v1 in &[-1.0, -0.5, 0.0, 0.5, 1.0] {
            let v = [v1, 0.0];
            let sub = local_rate(&m, face, &v, &opts).unwrap();
            let full = local_rate(&m, SubsetMask::full(2), &v, &opts).unwrap();
            assert!(
                sub.value <= full.value + 1e-7,
                "v1={v1}: {} vs {}",
                sub.value,
                full.value
            );
        }
    }

    #[test]
    fn full_face_rate_finite_near_zero() {
        let m = tandem();
        let full = SubsetMask::full(2);
        let measure = m.measure(full).unwrap();
        // one-sided drift mass per axis bounds a ball inside the domain
        let mut radius = f64::INFINITY;
        for i in 0..2 {
            let up: f64 = measure
                .atoms()
                .filter(|(u, _)| u[i] > 0)
                .map(|(u, r)| r * u[i] as f64)
                .sum();
            let down: f64 = measure
                .atoms()
                .filter(|(u, _)| u[i] < 0)
                .map(|(u, r)| r * (-u[i]) as f64)
                .sum();
            radius = radius.min(up.min(down));
        }
        assert!(radius > 0.0);
        let opts = RateOpts::default();
        for &(dx, dy) in &[(1.0, 0.0), (0.0, 1.0), (-0.7, 0.7), (0.5, -0.5)] {
            let v = [0.9 * radius * dx, 0.9 * radius * dy];
            let res = local_rate(&m, full, &v, &opts).unwrap();
            assert!(res.value.is_finite(), "v={v:?}");
        }
    }

    #[test]
    fn rate_convex_in_velocity() {
        let m = mm1();
        let opts = RateOpts::default();
        let full = SubsetMask::full(1);
        let pairs = [(-1.5, 0.5), (0.0, 2.0), (-2.0, -0.5)];
        for (a, b) in pairs {
            let fa = local_rate(&m, full, &[a], &opts).unwrap().value;
            let fb = local_rate(&m, full, &[b], &opts).unwrap().value;
            let fm = local_rate(&m, full, &[0.5 * (a + b)], &opts).unwrap().value;
            assert!(fm <= 0.5 * (fa + fb) + 1e-9);
        }
    }

    #[test]
    fn evaluator_failures_surface_as_oracle_errors() {
        // a birth-only Markovian part makes the box truncation reducible;
        // with shrinking disabled the spectral error reaches the caller
        // wrapped as an oracle failure
        let text =
            "N 2\nmeasure 1,2\n1 0 : 1.0\n-1 1 : 2.0\nmeasure 1\n1 0 : 1.0\n-1 1 : 2.0\nmeasure 2\n1 0 : 1.0\nmeasure empty\n1 0 : 1.0\n";
        let m: NetworkModel<f64> = NetworkModel::parse_str(text).unwrap();
        let mut opts = RateOpts::default();
        opts.lambda.spectral.shrink_to_component = false;
        let err = local_rate(&m, SubsetMask::from_indices([0]), &[0.5, 0.0], &opts).unwrap_err();
        match err {
            Error::OracleFailure(inner) => {
                assert!(matches!(*inner, Error::NotIrreducible { .. }))
            }
            other => panic!("expected OracleFailure, got {other:?}"),
        }
    }

    #[test]
    fn nonnegative_rates() {
        let m = tandem();
        let opts = RateOpts::default();
        for face in [
            SubsetMask::empty(),
            SubsetMask::from_indices([0]),
            SubsetMask::from_indices([1]),
            SubsetMask::full(2),
        ] {
            let res = local_rate(&m, face, &[0.3, -0.1], &opts).unwrap();
            if res.value.is_finite() {
                assert!(res.value >= -1e-12, "face {face}: {}", res.value);
            }
        }
    }
}
