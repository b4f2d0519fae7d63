//! Quantitative perturbation certificates for uniformly contracting
//! automorphism sequences.
//!
//! Given a sequence `{S_n}` with `‖S_n(z)‖ < C‖z‖` on `B(0;r)` (the uniform
//! upper bound), the module computes the per-step tolerance schedule
//! `δ_n = min(δ·C̃ⁿ·r₀, δ̃_n)` under which any perturbed sequence `{F_n}`
//! with `‖F_n − S_n‖ < δ_n` on the ball has a biholomorphic basin: the
//! conjugacy iterates `φ_n = S(n)⁻¹ ∘ F(n)` then satisfy the Cauchy bound
//! `sup‖φ_n − φ_m‖ ≤ ε^{n+1}/(1−ε)`, which is checked directly on sample
//! clouds. Every sampled sup/inf is pushed in the safe direction (operator
//! norms inflated, continuity moduli deflated), so PASS certificates are
//! conservative.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::maps::{AutoStep, CPoint, MapSequence, MapsError};
use crate::num::ExtReal;

#[derive(Debug, Error)]
pub enum ConjugacyError {
    #[error(transparent)]
    Maps(#[from] MapsError),
    #[error("finite-difference Jacobian degenerated at n = {0}")]
    DegenerateJacobian(usize),
    #[error("modulus-of-continuity search collapsed at n = {0}")]
    ModulusSearchFailed(usize),
    #[error("invalid radius: {0}")]
    BadRadius(f64),
}

/// Sphere/ball sample clouds in ℂᵏ ≅ ℝ^{2k}. Structured axis points come
/// first so suprema attained on coordinate axes are always seen.
pub mod sampling {
    use super::*;

    pub fn axis_points(dim: usize, radius: f64) -> Vec<CPoint> {
        let mut out = Vec::with_capacity(4 * dim);
        for j in 0..dim {
            for &(re, im) in &[(radius, 0.0), (-radius, 0.0), (0.0, radius), (0.0, -radius)] {
                let mut coords = vec![(0.0, 0.0); dim];
                coords[j] = (re, im);
                out.push(CPoint::from_f64(&coords).expect("finite"));
            }
        }
        out
    }

    pub fn sphere_points(dim: usize, radius: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<CPoint> {
        let mut out = axis_points(dim, radius);
        while out.len() < count {
            let dir: Vec<f64> = (0..2 * dim).map(|_| StandardNormal.sample(rng)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-9 {
                continue;
            }
            let coords: Vec<(f64, f64)> = (0..dim)
                .map(|j| (radius * dir[2 * j] / norm, radius * dir[2 * j + 1] / norm))
                .collect();
            out.push(CPoint::from_f64(&coords).expect("finite"));
        }
        out.truncate(count.max(4 * dim));
        out
    }

    pub fn ball_points(dim: usize, radius: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<CPoint> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let r = radius * rng.random::<f64>().powf(1.0 / (2 * dim) as f64);
            let mut sphere = sphere_points(dim, r, 4 * dim + 1, rng);
            out.push(sphere.pop().expect("nonempty"));
        }
        out
    }

    /// Sphere shells at radii r·{1, ¾, ½, ¼} plus random interior points.
    pub fn shell_cloud(dim: usize, r: f64, per_shell: usize, rng: &mut ChaCha8Rng) -> Vec<CPoint> {
        let mut out = Vec::new();
        for &s in &[1.0, 0.75, 0.5, 0.25] {
            out.extend(sphere_points(dim, r * s, per_shell, rng));
        }
        out
    }
}

/// Verified uniform-upper-bound data and derived constants.
#[derive(Clone, Debug)]
pub struct UUBWitness {
    pub r: f64,
    /// The contraction bound C < 1.
    pub c_bound: f64,
    /// `r₀ = C·r`.
    pub r0: f64,
    /// Series ratio, `0 < ε < r − C·r`.
    pub eps: f64,
    /// `0 < δ < min(ε, 1 − C)`.
    pub delta: f64,
    /// `C̃ = C + δ < 1`.
    pub c_tilde: f64,
    pub n_checked: usize,
    pub samples_per_shell: usize,
}

#[derive(Clone, Debug)]
pub struct UUBViolation {
    pub n: usize,
    pub z: Vec<(f64, f64)>,
    pub ratio: f64,
}

impl UUBWitness {
    /// Override the derived margins (both must respect their ranges).
    pub fn with_margins(mut self, eps: f64, delta: f64) -> Self {
        assert!(eps > 0.0 && eps < self.r - self.c_bound * self.r);
        assert!(delta > 0.0 && delta < eps.min(1.0 - self.c_bound));
        self.eps = eps;
        self.delta = delta;
        self.c_tilde = self.c_bound + delta;
        self
    }
}

/// Check `‖S_n(z)‖ < C‖z‖` on shell samples of `B(0;r)` for n ≤ n_max.
pub fn verify_uub(
    seq: &MapSequence,
    r: f64,
    c_bound: f64,
    n_max: usize,
    per_shell: usize,
    seed: u64,
) -> Result<Result<UUBWitness, UUBViolation>, MapsError> {
    assert!(r > 0.0 && r < 1.0, "uniform bound needs 0 < r < 1");
    assert!(c_bound > 0.0 && c_bound < 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cloud = sampling::shell_cloud(seq.dim(), r, per_shell, &mut rng);
    for n in 0..=n_max {
        let step = seq.step_at(n);
        for z in &cloud {
            let img = step.apply(z)?;
            let ratio = img.norm_euclid().to_f64() / z.norm_euclid().to_f64();
            if ratio >= c_bound {
                return Ok(Err(UUBViolation {
                    n,
                    z: z.to_f64(),
                    ratio,
                }));
            }
        }
    }
    let eps = 0.95 * (r - c_bound * r);
    let delta = 0.5 * eps.min(1.0 - c_bound);
    Ok(Ok(UUBWitness {
        r,
        c_bound,
        r0: c_bound * r,
        eps,
        delta,
        c_tilde: c_bound + delta,
        n_checked: n_max,
        samples_per_shell: per_shell,
    }))
}

/// Per-n schedule entry. `m_raw` is the measured operator-norm bound of
/// `D(S(n−1))⁻¹` over the ball; `m_safe = 2·m_raw` enters the ε_n choice.
#[derive(Clone, Copy, Debug)]
pub struct ScheduleRow {
    pub n: usize,
    pub m_raw: f64,
    pub m_safe: f64,
    pub eps_n: f64,
    pub delta_tilde: f64,
    pub delta_n: f64,
}

/// Sampling provenance stored with the schedule.
#[derive(Clone, Debug)]
pub struct ScheduleProvenance {
    pub jacobian_samples: usize,
    pub fd_step_rel: f64,
    pub power_iterations: usize,
    pub modulus_pairs: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ToleranceSchedule {
    pub witness: UUBWitness,
    pub rows: Vec<ScheduleRow>,
    pub provenance: ScheduleProvenance,
}

impl ToleranceSchedule {
    pub fn delta_at(&self, n: usize) -> f64 {
        self.rows[n.min(self.rows.len() - 1)].delta_n
    }
}

const FD_STEP_REL: f64 = 1e-6;
const POWER_ITERS: usize = 50;
const JACOBIAN_SAMPLES: usize = 24;
const MODULUS_PAIRS: usize = 32;

/// `S(n−1)⁻¹` as a real map ℝ^{2k} → ℝ^{2k} for finite differences
/// (`n = 0` is the empty composition).
fn inverse_chain_real(
    seq: &MapSequence,
    n: usize,
    x: &[f64],
) -> Result<Vec<f64>, MapsError> {
    let dim = seq.dim();
    let coords: Vec<(f64, f64)> = (0..dim).map(|j| (x[2 * j], x[2 * j + 1])).collect();
    let z = CPoint::from_f64(&coords)?;
    let w = if n == 0 {
        z
    } else {
        seq.apply_inverse_chain(&z, n - 1)?
    };
    Ok(w.to_f64().into_iter().flat_map(|(a, b)| [a, b]).collect())
}

/// Largest singular value of the finite-difference Jacobian at `z`,
/// via power iteration on JᵀJ.
fn fd_operator_norm(
    seq: &MapSequence,
    n: usize,
    z: &CPoint,
    h: f64,
) -> Result<f64, ConjugacyError> {
    let dim2 = 2 * seq.dim();
    let x0: Vec<f64> = z.to_f64().into_iter().flat_map(|(a, b)| [a, b]).collect();
    // Column j = (G(x + h e_j) − G(x − h e_j)) / 2h.
    let mut cols = Vec::with_capacity(dim2);
    for j in 0..dim2 {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[j] += h;
        xm[j] -= h;
        let gp = inverse_chain_real(seq, n, &xp)?;
        let gm = inverse_chain_real(seq, n, &xm)?;
        let col: Vec<f64> = gp
            .iter()
            .zip(&gm)
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect();
        if col.iter().any(|v| !v.is_finite()) {
            return Err(ConjugacyError::DegenerateJacobian(n));
        }
        cols.push(col);
    }
    let matvec = |v: &[f64]| -> Vec<f64> {
        // J v, with J given by columns.
        let mut out = vec![0.0; dim2];
        for (j, col) in cols.iter().enumerate() {
            for i in 0..dim2 {
                out[i] += col[i] * v[j];
            }
        }
        out
    };
    let matvec_t = |v: &[f64]| -> Vec<f64> {
        cols.iter().map(|col| col.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    };
    let mut v = vec![1.0 / (dim2 as f64).sqrt(); dim2];
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERS {
        let w = matvec_t(&matvec(&v));
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(ConjugacyError::DegenerateJacobian(n));
        }
        v = w.into_iter().map(|x| x / norm).collect();
        sigma = norm.sqrt();
    }
    Ok(sigma)
}

/// Sampled modulus of continuity of `S_n⁻¹` at scale `eps_n`: halve the
/// offset until the sampled sup drops below `eps_n/2`, then deflate by
/// another half. Under-estimation is the safe direction here.
fn modulus_of_continuity(
    seq: &MapSequence,
    n: usize,
    r: f64,
    eps_n: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64, ConjugacyError> {
    let step = seq.step_at(n);
    let dim = seq.dim();
    let mut delta = 0.25 * r;
    for _ in 0..2000 {
        let mut sup = 0.0f64;
        for _ in 0..MODULUS_PAIRS {
            let z = sampling::ball_points(dim, r - delta, 1, rng).pop().expect("one");
            let u = sampling::sphere_points(dim, delta, 4 * dim + 1, rng)
                .pop()
                .expect("one");
            let w = z.add(&u);
            let iz = step.apply_inverse(&z)?;
            let iw = step.apply_inverse(&w)?;
            sup = sup.max(iz.dist_euclid(&iw).to_f64());
        }
        if sup < 0.5 * eps_n {
            return Ok(0.5 * delta);
        }
        delta *= 0.5;
        if delta < 1e-300 {
            break;
        }
    }
    Err(ConjugacyError::ModulusSearchFailed(n))
}

/// Compute the full schedule for `n = 0..=n_max`.
pub fn tolerance_schedule(
    witness: &UUBWitness,
    seq: &MapSequence,
    n_max: usize,
    seed: u64,
) -> Result<ToleranceSchedule, ConjugacyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = seq.dim();
    let h = FD_STEP_REL * witness.r;
    let mut rows = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let m_raw = if n == 0 {
            1.0
        } else {
            let mut worst = 0.0f64;
            let cloud = sampling::shell_cloud(dim, witness.r * 0.98, JACOBIAN_SAMPLES / 4, &mut rng);
            for z in cloud {
                worst = worst.max(fd_operator_norm(seq, n, &z, h)?);
            }
            if worst <= 0.0 {
                return Err(ConjugacyError::DegenerateJacobian(n));
            }
            worst
        };
        let m_safe = 2.0 * m_raw;
        let eps_n = witness.eps.powi(n as i32 + 1) / (2.0 * m_safe);
        let delta_tilde = modulus_of_continuity(seq, n, witness.r, eps_n, &mut rng)?;
        let delta_n = (witness.delta * witness.c_tilde.powi(n as i32) * witness.r0).min(delta_tilde);
        rows.push(ScheduleRow {
            n,
            m_raw,
            m_safe,
            eps_n,
            delta_tilde,
            delta_n,
        });
    }
    Ok(ToleranceSchedule {
        witness: witness.clone(),
        rows,
        provenance: ScheduleProvenance {
            jacobian_samples: JACOBIAN_SAMPLES,
            fd_step_rel: FD_STEP_REL,
            power_iterations: POWER_ITERS,
            modulus_pairs: MODULUS_PAIRS,
            seed,
        },
    })
}

/// Recompute the schedule for a smaller ball radius (the contraction bound
/// is unchanged; margins re-derive from the same rules).
pub fn reschedule(
    witness: &UUBWitness,
    seq: &MapSequence,
    r_small: f64,
    n_max: usize,
    seed: u64,
) -> Result<ToleranceSchedule, ConjugacyError> {
    if !(r_small > 0.0) || r_small > witness.r {
        return Err(ConjugacyError::BadRadius(r_small));
    }
    let c = witness.c_bound;
    let eps = 0.95 * (r_small - c * r_small);
    let delta = 0.5 * eps.min(1.0 - c);
    let small = UUBWitness {
        r: r_small,
        c_bound: c,
        r0: c * r_small,
        eps,
        delta,
        c_tilde: c + delta,
        n_checked: witness.n_checked,
        samples_per_shell: witness.samples_per_shell,
    };
    tolerance_schedule(&small, seq, n_max, seed)
}

#[derive(Clone, Copy, Debug)]
pub struct PerturbRow {
    pub n: usize,
    pub sup_diff: f64,
    pub delta_n: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct PerturbationReport {
    pub rows: Vec<PerturbRow>,
    pub pass: bool,
}

/// Sampled sup of `‖F_n − S_n‖` over `B(0;r)` against the schedule.
pub fn check_perturbation(
    s_seq: &MapSequence,
    f_seq: &MapSequence,
    sched: &ToleranceSchedule,
    cloud_size: usize,
    seed: u64,
) -> Result<PerturbationReport, MapsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cloud = sampling::shell_cloud(s_seq.dim(), sched.witness.r, cloud_size / 4, &mut rng);
    let mut rows = Vec::new();
    let mut pass = true;
    for row in &sched.rows {
        let s_step = s_seq.step_at(row.n);
        let f_step = f_seq.step_at(row.n);
        let mut sup = 0.0f64;
        for z in &cloud {
            let d = f_step.apply(z)?.dist_euclid(&s_step.apply(z)?).to_f64();
            sup = sup.max(d);
        }
        let ok = sup < row.delta_n;
        pass &= ok;
        rows.push(PerturbRow {
            n: row.n,
            sup_diff: sup,
            delta_n: row.delta_n,
            pass: ok,
        });
    }
    Ok(PerturbationReport { rows, pass })
}

#[derive(Clone, Copy, Debug)]
pub struct ProfileStepRow {
    pub n: usize,
    /// `sup_z ‖φ_{n+1}(z) − φ_n(z)‖` over the retained cloud.
    pub sup_step: f64,
}

#[derive(Clone, Debug)]
pub struct ConjugacyProfile {
    pub steps: Vec<ProfileStepRow>,
    /// Worst `sup‖φ_n − φ_m‖ / (ε^{n+1}/(1−ε))` over observed pairs n < m.
    pub worst_cauchy_ratio: f64,
    pub certificate_pass: bool,
    /// Samples excluded because an inverse orbit left the validated ball.
    pub excluded: usize,
    /// Minimum pairwise separation of the final φ images (injectivity probe).
    pub min_separation: f64,
}

/// Compute `φ_n = S(n)⁻¹ ∘ F(n)` on a sample cloud for n ≤ n_max and check
/// the Cauchy certificate.
pub fn conjugacy_profile(
    s_seq: &MapSequence,
    f_seq: &MapSequence,
    sched: &ToleranceSchedule,
    cloud: &[CPoint],
    n_max: usize,
) -> Result<ConjugacyProfile, ConjugacyError> {
    let eps = sched.witness.eps;
    let ball_guard = ExtReal::from_f64(sched.witness.r * (1.0 + 1e-9)).expect("finite");
    let mut excluded = 0usize;
    // φ values per retained sample, per n.
    let mut phis: Vec<Vec<CPoint>> = Vec::new();
    'samples: for z in cloud {
        let mut history = Vec::with_capacity(n_max + 1);
        let mut forward = z.clone();
        for n in 0..=n_max {
            forward = f_seq.step_at(n).apply(&forward)?;
            // Inverse chain with ball validation on intermediates.
            let mut back = forward.clone();
            for i in (0..=n).rev() {
                if !ball_guard.magnitude_ge(back.norm_euclid()) {
                    excluded += 1;
                    continue 'samples;
                }
                back = s_seq.step_at(i).apply_inverse(&back)?;
            }
            history.push(back);
        }
        phis.push(history);
    }

    let mut steps = Vec::new();
    for n in 0..n_max {
        let mut sup = 0.0f64;
        for h in &phis {
            sup = sup.max(h[n + 1].dist_euclid(&h[n]).to_f64());
        }
        steps.push(ProfileStepRow { n, sup_step: sup });
    }

    let mut worst_ratio = 0.0f64;
    for n in 0..=n_max {
        let bound = eps.powi(n as i32 + 1) / (1.0 - eps);
        for m in n + 1..=n_max {
            let mut sup = 0.0f64;
            for h in &phis {
                sup = sup.max(h[m].dist_euclid(&h[n]).to_f64());
            }
            worst_ratio = worst_ratio.max(sup / bound);
        }
    }

    let mut min_sep = f64::INFINITY;
    for i in 0..phis.len() {
        for j in i + 1..phis.len() {
            min_sep = min_sep.min(phis[i][n_max].dist_euclid(&phis[j][n_max]).to_f64());
        }
    }

    Ok(ConjugacyProfile {
        steps,
        worst_cauchy_ratio: worst_ratio,
        certificate_pass: worst_ratio <= 1.0,
        excluded,
        min_separation: min_sep,
    })
}

#[derive(Clone, Debug)]
pub struct BallContainmentReport {
    /// Worst observed `‖F(n)(z)‖ / (C̃^{n+1}·r₀)` over samples and n.
    pub worst_ratio: f64,
    pub pass: bool,
    /// Worst single-step ratio `‖F_n(z)‖/r` over `B(0;r)` samples
    /// (ball invariance `F_n(B(0;r)) ⊂ B(0;r)`).
    pub worst_step_ratio: f64,
}

/// Basin containment under admissible perturbation: sphere samples of
/// `B(0;r₀)` must contract along `‖F(n)(z)‖ ≤ C̃^{n+1}·r₀·(1 + tol)`.
pub fn ball_containment_check(
    f_seq: &MapSequence,
    witness: &UUBWitness,
    n_max: usize,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<BallContainmentReport, MapsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cloud = sampling::sphere_points(f_seq.dim(), witness.r0, samples, &mut rng);
    let mut worst = 0.0f64;
    for z in &cloud {
        let mut cur = z.clone();
        for n in 0..=n_max {
            cur = f_seq.step_at(n).apply(&cur)?;
            let bound = witness.c_tilde.powi(n as i32 + 1) * witness.r0;
            worst = worst.max(cur.norm_euclid().to_f64() / bound);
        }
    }
    let mut worst_step = 0.0f64;
    let shell = sampling::shell_cloud(f_seq.dim(), witness.r, 8, &mut rng);
    for z in &shell {
        for n in 0..=n_max.min(8) {
            let img = f_seq.step_at(n).apply(z)?;
            worst_step = worst_step.max(img.norm_euclid().to_f64() / witness.r);
        }
    }
    Ok(BallContainmentReport {
        worst_ratio: worst,
        pass: worst <= 1.0 + tol,
        worst_step_ratio: worst_step,
    })
}

/// Shape of the built-in perturbation bumps. Each is an automorphism when
/// added to a diagonal step: shears act on the first coordinate through the
/// last one, the linear bump rescales the first coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BumpKind {
    /// `+ amp·(z_k/r)²` on the first coordinate; sup over the ball = amp.
    QuadraticShear,
    /// `+ amp·(z_k/r)³` on the first coordinate.
    CubicShear,
    /// `+ amp·(z₁/r)` on the first coordinate.
    LinearScale,
}

/// Perturb a base sequence by `amp(n)`-sized bumps (forward-only custom
/// steps; the conjugacy machinery never inverts the perturbed maps).
pub fn perturbed_sequence(
    base: &MapSequence,
    r: f64,
    kind: BumpKind,
    amp: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
) -> MapSequence {
    let dim = base.dim();
    let base = base.clone();
    let descriptor = format!("perturbed({:?},{})", kind, base.descriptor());
    MapSequence::from_fn(dim, descriptor, move |n| {
        let step = base.step_at(n);
        let a = amp(n);
        let r = r;
        AutoStep::Custom {
            dim,
            forward: Arc::new(move |z: &CPoint| {
                let mut w = step.apply(z).expect("dimension fixed");
                let rr = ExtReal::from_f64(1.0 / r).expect("finite");
                let bump = match kind {
                    BumpKind::QuadraticShear => {
                        let t = z.0[dim - 1].scale(rr);
                        t.mul(t)
                    }
                    BumpKind::CubicShear => {
                        let t = z.0[dim - 1].scale(rr);
                        t.mul(t).mul(t)
                    }
                    BumpKind::LinearScale => z.0[0].scale(rr),
                };
                let amp_ext = ExtReal::from_f64(a).expect("finite");
                w.0[0] = w.0[0].add(bump.scale(amp_ext));
                w
            }),
            inverse: None,
            tag: format!("bump{n}"),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{CoeffSequence, PolySpec};

    fn diag_half() -> MapSequence {
        MapSequence::diag_linear(0.5, 2)
    }

    fn witness_diag() -> UUBWitness {
        verify_uub(&diag_half(), 0.9, 0.6, 12, 8, 1)
            .unwrap()
            .unwrap()
            .with_margins(0.35, 0.09)
    }

    #[test]
    fn uub_accepts_and_rejects_diagonal_contractions() {
        let ok = verify_uub(&MapSequence::diag_linear(0.4, 2), 1.0 - 1e-9, 0.5, 10, 8, 1).unwrap();
        assert!(ok.is_ok());

        let bad = verify_uub(&MapSequence::diag_linear(0.6, 2), 0.9, 0.5, 10, 8, 1).unwrap();
        let v = bad.err().expect("violation");
        assert_eq!(v.n, 0);
        assert!((v.ratio - 0.6).abs() < 1e-12);
    }

    #[test]
    fn uub_accepts_shift_like_on_small_ball() {
        let seq = MapSequence::shift_like(
            2,
            CoeffSequence::generator(1.0, 3.0).unwrap(),
            PolySpec::constant(1.0),
        )
        .unwrap();
        let w = verify_uub(&seq, 0.2, 0.5, 12, 16, 3).unwrap();
        assert!(w.is_ok(), "{w:?}");
    }

    #[test]
    fn schedule_matches_analytic_diagonal_case() {
        let w = witness_diag();
        let sched = tolerance_schedule(&w, &diag_half(), 12, 5).unwrap();
        for row in &sched.rows {
            let want = 2f64.powi(row.n as i32);
            assert!(
                (row.m_raw - want).abs() <= 0.1 * want,
                "M_{} = {} vs {want}",
                row.n,
                row.m_raw
            );
            assert!(row.delta_n > 0.0);
            assert!(row.delta_n <= w.delta * w.c_tilde.powi(row.n as i32) * w.r0 + 1e-30);
            assert!(row.eps_n < w.eps.powi(row.n as i32 + 1) / row.m_raw);
        }
        // Geometric decay to zero.
        let last = sched.rows.last().unwrap();
        assert!(last.delta_n < 1e-6 * sched.rows[0].delta_n);
    }

    #[test]
    fn perturbation_check_pass_and_fail() {
        let w = witness_diag();
        let s = diag_half();
        let sched = tolerance_schedule(&w, &s, 10, 5).unwrap();

        let identity = check_perturbation(&s, &s, &sched, 32, 9).unwrap();
        assert!(identity.pass);
        assert!(identity.rows.iter().all(|r| r.sup_diff == 0.0));

        let deltas: Vec<f64> = sched.rows.iter().map(|r| r.delta_n).collect();
        let half = {
            let d = deltas.clone();
            perturbed_sequence(
                &s,
                w.r,
                BumpKind::QuadraticShear,
                Arc::new(move |n| 0.5 * d[n.min(d.len() - 1)]),
            )
        };
        assert!(check_perturbation(&s, &half, &sched, 32, 9).unwrap().pass);

        let double = {
            let d = deltas;
            perturbed_sequence(
                &s,
                w.r,
                BumpKind::QuadraticShear,
                Arc::new(move |n| 2.0 * d[n.min(d.len() - 1)]),
            )
        };
        let rep = check_perturbation(&s, &double, &sched, 32, 9).unwrap();
        assert!(!rep.pass);
        assert!(rep.rows.iter().all(|r| !r.pass), "{:?}", rep.rows);
    }

    #[test]
    fn profile_of_identity_perturbation_is_flat() {
        let w = witness_diag();
        let s = diag_half();
        let sched = tolerance_schedule(&w, &s, 10, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cloud = sampling::ball_points(2, 0.3, 12, &mut rng);
        let prof = conjugacy_profile(&s, &s, &sched, &cloud, 10).unwrap();
        assert!(prof.certificate_pass);
        assert_eq!(prof.excluded, 0);
        assert!(prof.steps.iter().all(|r| r.sup_step == 0.0));
    }

    #[test]
    fn profile_certificate_for_admissible_perturbation() {
        let w = witness_diag();
        let s = diag_half();
        let n_max = 14;
        let sched = tolerance_schedule(&w, &s, n_max, 5).unwrap();
        let deltas: Vec<f64> = sched.rows.iter().map(|r| r.delta_n).collect();
        let f = perturbed_sequence(
            &s,
            w.r,
            BumpKind::QuadraticShear,
            Arc::new(move |n| 0.5 * deltas[n.min(deltas.len() - 1)]),
        );
        assert!(check_perturbation(&s, &f, &sched, 32, 9).unwrap().pass);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cloud = sampling::ball_points(2, 0.3, 10, &mut rng);
        let prof = conjugacy_profile(&s, &f, &sched, &cloud, n_max).unwrap();
        assert!(
            prof.certificate_pass,
            "worst ratio {}",
            prof.worst_cauchy_ratio
        );
        // Per-step differences obey the proof's ε^{n+1} envelope.
        for row in &prof.steps {
            let bound = w.eps.powi(row.n as i32 + 1);
            assert!(
                row.sup_step <= bound,
                "step {} diff {} > {}",
                row.n,
                row.sup_step,
                bound
            );
        }
        // Injectivity probe: a separated cloud stays separated.
        assert!(prof.min_separation > 0.0);
    }

    #[test]
    fn ball_containment_for_admissible_perturbation() {
        let w = witness_diag();
        let s = diag_half();
        let sched = tolerance_schedule(&w, &s, 12, 5).unwrap();
        let deltas: Vec<f64> = sched.rows.iter().map(|r| r.delta_n).collect();
        let f = perturbed_sequence(
            &s,
            w.r,
            BumpKind::CubicShear,
            Arc::new(move |n| 0.5 * deltas[n.min(deltas.len() - 1)]),
        );
        let rep = ball_containment_check(&f, &w, 12, 24, 1e-9, 11).unwrap();
        assert!(rep.pass, "worst ratio {}", rep.worst_ratio);
        assert!(rep.worst_step_ratio < 1.0);
    }

    #[test]
    fn reschedule_shrinks_with_radius() {
        let w = witness_diag();
        let s = diag_half();
        let sched_r = tolerance_schedule(&w, &s, 8, 5).unwrap();
        let sched_half = reschedule(&w, &s, w.r / 2.0, 8, 5).unwrap();
        for (a, b) in sched_half.rows.iter().zip(&sched_r.rows) {
            assert!(
                a.delta_n <= b.delta_n * (1.0 + 1e-9),
                "delta_{}({}) > delta_{}({})",
                a.n,
                a.delta_n,
                b.n,
                b.delta_n
            );
        }
        assert!(matches!(
            reschedule(&w, &s, 0.0, 4, 5),
            Err(ConjugacyError::BadRadius(_))
        ));
        assert!(matches!(
            reschedule(&w, &s, -1.0, 4, 5),
            Err(ConjugacyError::BadRadius(_))
        ));
    }
}
