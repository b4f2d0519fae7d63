//! Potential ladder of shift-like basins.
//!
//! For a shift-like sequence with coefficient schedule `{a_n}`,
//! `φ_n(z) = max(|f_1^n(z)|, …, |f_k^n(z)|, a_n)` over the composed orbit,
//! `ψ_n = 2^{-n}·log φ_n`, and the monotone envelope adds the geometric tail
//! `Φ_n = ψ_n + 2^{-n}·log M_env`. The one-step recursion
//! `φ_{n+1} ≤ (M+1)·φ_n²` (valid once `φ_n ≤ c`) makes `Φ_n` decrease when
//! `M_env ≥ M + 1`, and the decreasing limit is the bounded
//! plurisubharmonic potential of the basin.

use num_complex::Complex64;
use thiserror::Error;

use crate::basin::BasinParams;
use crate::maps::{AutoStep, CPoint, MapSequence, MapsError, PolySpec};
use crate::num::LogMag;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("potential ladder requires a shift-like sequence, found {0}")]
    NotShiftLike(String),
    #[error(transparent)]
    Maps(#[from] MapsError),
}

/// Constants of the potential ladder for one scenario.
#[derive(Clone, Debug)]
pub struct PotentialParams {
    /// Quadratic bound constant `M = P(c)` (exact for non-negative
    /// coefficients).
    pub m_bound: f64,
    /// Envelope constant: the recursion certifies `φ_{n+1} ≤ (M+1)φ_n²`,
    /// and the envelope needs `M_env ≥ max(M+1, 1)`.
    pub m_envelope: f64,
    /// Polydisc radius from the basin parameters.
    pub c: f64,
    /// Iteration budget for convergence.
    pub n_max: usize,
    /// Stop once `|ψ_{n+1} − ψ_n|` drops below this.
    pub conv_tol: f64,
}

impl PotentialParams {
    pub fn derive(p: &PolySpec, basin: &BasinParams) -> Self {
        let m_bound = p.sup_on_disc(basin.c);
        Self {
            m_bound,
            m_envelope: (m_bound + 1.0).max(1.0),
            c: basin.c,
            n_max: 48,
            conv_tol: 1e-6,
        }
    }
}

fn log_coeff(step: &AutoStep) -> Result<LogMag, PotentialError> {
    match step {
        AutoStep::ShiftLike { log_a, .. } => Ok(*log_a),
        other => Err(PotentialError::NotShiftLike(format!("{other:?}"))),
    }
}

/// One row of the ladder at index n.
#[derive(Clone, Copy, Debug)]
pub struct PotentialRow {
    pub n: usize,
    /// `log φ_n` (`+∞` marks an escaping/overflowed orbit).
    pub phi_log: LogMag,
    /// `ψ_n = 2^{-n} log φ_n`.
    pub psi: f64,
    /// `Φ_n = ψ_n + 2^{-n} log M_env`.
    pub envelope: f64,
}

/// Why the ladder stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// `|ψ_{n+1} − ψ_n| < conv_tol` first held at this n.
    Converged(usize),
    /// The budget `n_max` ran out first.
    Budget,
}

#[derive(Clone, Debug)]
pub struct PotentialProfile {
    pub rows: Vec<PotentialRow>,
    pub stop: StopReason,
}

impl PotentialProfile {
    /// Final ψ value (the converged potential when `stop` is `Converged`).
    pub fn psi_final(&self) -> f64 {
        self.rows.last().map(|r| r.psi).unwrap_or(f64::NAN)
    }
}

/// Compute the ladder along the orbit of `z` until convergence or budget.
pub fn potential_profile(
    seq: &MapSequence,
    z: &CPoint,
    params: &PotentialParams,
) -> Result<PotentialProfile, PotentialError> {
    let log_m_env = params.m_envelope.ln();
    let mut rows = Vec::new();
    let mut stop = StopReason::Budget;
    let mut cur = z.clone();
    for n in 0..=params.n_max {
        let step = seq.step_at(n);
        let la = log_coeff(&step)?;
        cur = step.apply(&cur)?;
        let mut phi_log = la;
        for coord in &cur.0 {
            phi_log = phi_log.max(coord.log_modulus());
        }
        let scale = 0.5f64.powi(n as i32);
        let psi = scale * phi_log.value();
        let envelope = psi + scale * log_m_env;
        rows.push(PotentialRow {
            n,
            phi_log,
            psi,
            envelope,
        });
        if n > 0 {
            let prev = rows[n - 1].psi;
            if (psi - prev).abs() < params.conv_tol {
                stop = StopReason::Converged(n);
                break;
            }
        }
        if phi_log.is_overflow() {
            break;
        }
    }
    Ok(PotentialProfile { rows, stop })
}

/// `log φ_n(z)` alone.
pub fn phi_n(
    seq: &MapSequence,
    z: &CPoint,
    n: usize,
    params: &PotentialParams,
) -> Result<LogMag, PotentialError> {
    let mut relaxed = params.clone();
    relaxed.n_max = n;
    relaxed.conv_tol = 0.0;
    let profile = potential_profile(seq, z, &relaxed)?;
    Ok(profile.rows[n.min(profile.rows.len() - 1)].phi_log)
}

/// `ψ_n(z)`.
pub fn psi_n(
    seq: &MapSequence,
    z: &CPoint,
    n: usize,
    params: &PotentialParams,
) -> Result<f64, PotentialError> {
    Ok(phi_n(seq, z, n, params)?.value() * 0.5f64.powi(n as i32))
}

/// `Φ_n(z) = ψ_n(z) + 2^{-n}·log M_env` (closed form of the tail sum
/// `Σ_{j ≥ n} 2^{-(j+1)} log M_env`).
pub fn envelope_n(
    seq: &MapSequence,
    z: &CPoint,
    n: usize,
    params: &PotentialParams,
) -> Result<f64, PotentialError> {
    Ok(psi_n(seq, z, n, params)? + 0.5f64.powi(n as i32) * params.m_envelope.ln())
}

/// Row of the positive-real-slice table.
#[derive(Clone, Copy, Debug)]
pub struct TableRow {
    pub x: f64,
    pub y: f64,
    pub n: usize,
    pub psi: f64,
    pub envelope: f64,
    pub converged: bool,
}

/// Ladder rows for each x at fixed y on the positive-real slice.
pub fn positive_real_table(
    seq: &MapSequence,
    xs: &[f64],
    y: f64,
    params: &PotentialParams,
) -> Result<Vec<TableRow>, PotentialError> {
    let mut out = Vec::new();
    for &x in xs {
        let z = CPoint::from_f64(&[(x, 0.0), (y, 0.0)]).map_err(PotentialError::Maps)?;
        let profile = potential_profile(seq, &z, params)?;
        let converged = matches!(profile.stop, StopReason::Converged(_));
        for row in &profile.rows {
            out.push(TableRow {
                x,
                y,
                n: row.n,
                psi: row.psi,
                envelope: row.envelope,
                converged,
            });
        }
    }
    Ok(out)
}

/// Disc on a complex line: center + radius along a direction.
#[derive(Clone, Copy, Debug)]
pub struct PshDisc {
    pub center: Complex64,
    pub dir: Complex64,
    pub radius: f64,
}

/// Sub-mean-value tolerance, scaling with the disc radius squared.
#[derive(Clone, Copy, Debug)]
pub struct PshTolerance {
    pub base: f64,
    pub quad: f64,
}

impl Default for PshTolerance {
    fn default() -> Self {
        Self {
            base: 1e-9,
            quad: 0.5,
        }
    }
}

impl PshTolerance {
    pub fn at(&self, radius: f64) -> f64 {
        self.base.max(self.quad * radius * radius)
    }
}

#[derive(Clone, Debug)]
pub struct PshViolation {
    pub disc: PshDisc,
    pub center_value: f64,
    pub circle_mean: f64,
    /// How far the center exceeded mean + tolerance.
    pub excess: f64,
}

#[derive(Clone, Debug, Default)]
pub struct PshReport {
    pub discs_checked: usize,
    /// Discs whose center value is −∞: the inequality is trivial there.
    pub trivial: usize,
    /// Discs skipped because a circle sample was not finite.
    pub skipped: usize,
    pub violations: Vec<PshViolation>,
    /// Worst observed `center − mean` over the checked discs.
    pub max_deficit: f64,
}

impl PshReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Sub-mean-value check: `value(center) ≤ circle average + tol(r)` on every
/// disc, with the circle averaged by m uniform samples (the trapezoid rule
/// on a periodic integrand).
pub fn psh_check(
    field: impl Fn(Complex64) -> f64,
    discs: &[PshDisc],
    m: usize,
    tol: PshTolerance,
) -> PshReport {
    let mut report = PshReport {
        max_deficit: f64::NEG_INFINITY,
        ..Default::default()
    };
    for &disc in discs {
        let center_value = field(disc.center);
        if center_value == f64::NEG_INFINITY {
            report.trivial += 1;
            report.discs_checked += 1;
            continue;
        }
        if !center_value.is_finite() {
            report.skipped += 1;
            continue;
        }
        let mut sum = 0.0;
        let mut ok = true;
        for j in 0..m {
            let theta = 2.0 * std::f64::consts::PI * (j as f64) / (m as f64);
            let w = disc.center + disc.dir * Complex64::from_polar(disc.radius, theta);
            let v = field(w);
            if !v.is_finite() {
                ok = false;
                break;
            }
            sum += v;
        }
        if !ok {
            report.skipped += 1;
            continue;
        }
        let mean = sum / m as f64;
        report.discs_checked += 1;
        report.max_deficit = report.max_deficit.max(center_value - mean);
        let allowance = tol.at(disc.radius);
        if center_value > mean + allowance {
            report.violations.push(PshViolation {
                disc,
                center_value,
                circle_mean: mean,
                excess: center_value - mean - allowance,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::CoeffSequence;

    fn scenario(k_scale: f64, poly: PolySpec) -> (MapSequence, BasinParams, PotentialParams) {
        let coeffs = CoeffSequence::generator(k_scale, 3.0).unwrap();
        let basin = BasinParams::derive(&poly, &coeffs, 2, 60);
        let params = PotentialParams::derive(&poly, &basin);
        let seq = MapSequence::shift_like(2, coeffs, poly).unwrap();
        (seq, basin, params)
    }

    fn pt(x: f64, y: f64) -> CPoint {
        CPoint::from_f64(&[(x, 0.0), (y, 0.0)]).unwrap()
    }

    #[test]
    fn phi_at_origin_equals_coefficient() {
        let (seq, _, params) = scenario(1.0, PolySpec::constant(1.0));
        for n in [0usize, 1, 3, 6] {
            let got = phi_n(&seq, &CPoint::zero(2), n, &params).unwrap();
            let want = -(3f64.powi(n as i32));
            assert_eq!(got.value(), want, "phi_{n}(0)");
        }
    }

    #[test]
    fn psi_at_origin_diverges_to_minus_infinity() {
        // ψ_n(0) = −K·(3/2)ⁿ for the generator schedule.
        let (seq, _, params) = scenario(2.0, PolySpec::constant(1.0));
        for n in [0usize, 2, 5, 9] {
            let got = psi_n(&seq, &CPoint::zero(2), n, &params).unwrap();
            let want = -2.0 * 1.5f64.powi(n as i32);
            assert!((got - want).abs() <= 1e-12 * want.abs());
        }
    }

    #[test]
    fn envelope_tail_is_geometric() {
        let (seq, _, params) = scenario(1.0, PolySpec::new(vec![1.0, 1.0]).unwrap());
        let z = pt(0.05, 0.05);
        for n in [0usize, 1, 4] {
            let psi = psi_n(&seq, &z, n, &params).unwrap();
            let env = envelope_n(&seq, &z, n, &params).unwrap();
            let tail = 0.5f64.powi(n as i32) * params.m_envelope.ln();
            assert!((env - psi - tail).abs() < 1e-15);
        }
        // Φ_n − ψ_n → 0.
        let psi = psi_n(&seq, &z, 20, &params).unwrap();
        let env = envelope_n(&seq, &z, 20, &params).unwrap();
        assert!(env - psi < 1e-5);
    }

    /// Exact-rational cross-check of φ at low n: the step coefficients are
    /// converted to extended floats first, whose values are exact rationals.
    #[test]
    fn phi_matches_exact_rational_iteration() {
        use num::rational::BigRational;
        use num::FromPrimitive;
        use num::ToPrimitive;

        let (seq, _, params) = scenario(1.0, PolySpec::constant(1.0));
        let z = pt(0.1, 0.1);

        let rat = |v: f64| BigRational::from_f64(v).unwrap();
        let mut rz1 = rat(0.1);
        let mut rz2 = rat(0.1);
        for n in 0..=3usize {
            // The extended-float value of a_n, as an exact rational.
            let a_ext = crate::num::ExtReal::from_log_mag(LogMag::new(-(3f64.powi(n as i32))));
            let a_f64 = a_ext.to_f64();
            let a = rat(a_f64);
            let nz1 = &a * &rz2 + &rz1 * &rz1;
            let nz2 = &a * &rz1;
            rz1 = nz1;
            rz2 = nz2;
            let phi_rat = rz1
                .clone()
                .max(rz2.clone())
                .max(rat(a_f64))
                .to_f64()
                .unwrap();
            let got = phi_n(&seq, &z, n, &params).unwrap().value();
            let want = phi_rat.ln();
            assert!(
                (got - want).abs() <= 1e-10 * want.abs().max(1.0),
                "n={n}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn envelope_monotone_on_attracted_samples() {
        let (seq, basin, params) = scenario(1.0, PolySpec::new(vec![1.0, 1.0]).unwrap());
        for i in 0..40 {
            let t = (i as f64 + 0.5) / 40.0;
            let z = pt(basin.c * t, basin.c * (1.0 - t) * 0.9);
            let profile = potential_profile(&seq, &z, &params).unwrap();
            for w in profile.rows.windows(2) {
                assert!(
                    w[1].envelope <= w[0].envelope + 1e-12,
                    "envelope rose at n={} for t={t}",
                    w[1].n
                );
            }
        }
    }

    #[test]
    fn one_step_recursion_bound() {
        // φ_{n+1} ≤ (M+1)·φ_n² once φ_n ≤ c, in the log domain.
        let (seq, _, params) = scenario(1.0, PolySpec::new(vec![1.0, 0.5, 0.25]).unwrap());
        let log_bound = params.m_envelope.ln();
        for i in 0..25 {
            let t = (i as f64 + 0.5) / 25.0;
            let z = pt(params.c * t, params.c * 0.5);
            let profile = potential_profile(&seq, &z, &params).unwrap();
            for w in profile.rows.windows(2) {
                let lp = w[0].phi_log.value();
                if lp <= params.c.ln() {
                    assert!(
                        w[1].phi_log.value() <= 2.0 * lp + log_bound + 1e-12,
                        "recursion bound failed at n={}",
                        w[1].n
                    );
                }
            }
        }
    }

    #[test]
    fn converged_psi_brackets_on_positive_real_slice() {
        // Short version of the acceptance probe: P = 1 + z, c₀ = 1.
        let (seq, basin, params) = scenario(1.0, PolySpec::new(vec![1.0, 1.0]).unwrap());
        let y = basin.c / 2.0;
        let mut values = Vec::new();
        for i in 0..10 {
            let x = basin.c * (0.01f64).powf(1.0 - (i as f64 + 0.5) / 10.0);
            let z = pt(x, y);
            let profile = potential_profile(&seq, &z, &params).unwrap();
            assert!(matches!(profile.stop, StopReason::Converged(_)), "x={x}");
            let psi = profile.psi_final();
            assert!(psi < 0.0, "psi({x}) = {psi}");
            assert!(psi >= 2.0 * x.ln() - 1e-6, "psi({x}) = {psi} below bracket");
            values.push(psi);
        }
        let spread = values.iter().cloned().fold(f64::MIN, f64::max)
            - values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 0.5, "psi nearly constant: spread {spread}");
    }

    #[test]
    fn psh_detector_harmonic_and_concave() {
        // log|z − 2| is harmonic away from 2: equality within quadrature.
        let field = |z: Complex64| (z - Complex64::new(2.0, 0.0)).norm().ln();
        let discs: Vec<PshDisc> = (0..20)
            .map(|i| PshDisc {
                center: Complex64::from_polar(0.5, i as f64),
                dir: Complex64::new(1.0, 0.0),
                radius: 0.3,
            })
            .collect();
        let report = psh_check(field, &discs, 64, PshTolerance::default());
        assert!(report.pass(), "harmonic field flagged: {:?}", report.violations);
        assert!(report.max_deficit.abs() < 1e-6);

        // −|z|² violates the sub-mean-value inequality at every center.
        let bad = |z: Complex64| -z.norm_sqr();
        let report = psh_check(bad, &discs, 64, PshTolerance { base: 1e-9, quad: 0.0 });
        assert_eq!(report.violations.len(), discs.len());
    }

    #[test]
    fn psh_neg_infinity_center_is_trivial() {
        let field = |z: Complex64| {
            if z.norm() < 1e-12 {
                f64::NEG_INFINITY
            } else {
                z.norm().ln()
            }
        };
        let discs = [PshDisc {
            center: Complex64::new(0.0, 0.0),
            dir: Complex64::new(1.0, 0.0),
            radius: 0.1,
        }];
        let report = psh_check(field, &discs, 32, PshTolerance::default());
        assert!(report.pass());
        assert_eq!(report.trivial, 1);
    }

    #[test]
    fn limit_psi_subaverages_on_basin_lines() {
        // The converged ψ restricted to complex lines inside the basin must
        // satisfy the sub-mean-value inequality at tolerance 1e−3.
        let (seq, basin, params) = scenario(1.0, PolySpec::new(vec![1.0, 1.0]).unwrap());
        let center = pt(0.12, 0.08);
        let dir = [(0.8, 0.0), (0.0, 0.6)];
        let field = |lambda: Complex64| -> f64 {
            let coords: Vec<(f64, f64)> = center
                .to_f64()
                .iter()
                .zip(&dir)
                .map(|(&(re, im), &(dre, dim))| {
                    (
                        re + lambda.re * dre - lambda.im * dim,
                        im + lambda.re * dim + lambda.im * dre,
                    )
                })
                .collect();
            let z = CPoint::from_f64(&coords).unwrap();
            potential_profile(&seq, &z, &params).unwrap().psi_final()
        };
        let discs: Vec<PshDisc> = (0..12)
            .map(|i| PshDisc {
                center: Complex64::from_polar(0.04, 0.5 * i as f64),
                dir: Complex64::new(1.0, 0.0),
                radius: 0.02,
            })
            .collect();
        let report = psh_check(field, &discs, 64, PshTolerance { base: 1e-3, quad: 0.0 });
        assert!(report.pass(), "violations: {:?}", report.violations);
        assert_eq!(report.discs_checked, discs.len());
        let _ = basin;
    }

    #[test]
    fn non_shift_like_sequences_are_rejected() {
        let seq = MapSequence::diag_linear(0.5, 2);
        let params = PotentialParams {
            m_bound: 1.0,
            m_envelope: 2.0,
            c: 0.5,
            n_max: 10,
            conv_tol: 1e-6,
        };
        assert!(matches!(
            potential_profile(&seq, &CPoint::zero(2), &params),
            Err(PotentialError::NotShiftLike(_))
        ));
    }
}
