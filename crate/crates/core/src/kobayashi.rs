//! Holomorphic disc witnesses with arbitrarily large derivatives.
//!
//! At an attracted point p with unit tangent ξ and any R > 0, push forward
//! to `p_n = F(n)(p)`, transport the direction by a finite difference
//! `ξ_n ≈ DF(n)·ξ`, and pull back the affine disc `x ↦ p_n + x·R·ξ_n`
//! through the exact inverse chain: `τ_n = F(n)⁻¹ ∘ η_n`. Once n is large
//! enough that `‖p_n‖ + R·‖ξ_n‖` fits inside the attraction region, the
//! disc lies in the basin while `τ_n(0) = p` and `τ_n'(0) = R·ξ` — which
//! drives the infinitesimal metric at (p, ξ) below 1/R.

use thiserror::Error;

use crate::basin::{classify_point, BasinParams};
use crate::maps::{CPoint, MapSequence, MapsError};
use crate::num::ExtReal;

#[derive(Debug, Error)]
pub enum KobayashiError {
    #[error(transparent)]
    Maps(#[from] MapsError),
    #[error("base point is not attracted")]
    NotAttracted,
    #[error("no admissible index ≤ {n_max}: ‖p_n‖ + R·‖ξ_n‖ never dropped below {required}")]
    NoAdmissibleIndex {
        n_max: usize,
        required: f64,
        /// Per-n values of `‖p_n‖ + R·‖ξ_n‖`, the decay trace.
        trace: Vec<f64>,
    },
    #[error("tangent vector must be nonzero")]
    ZeroTangent,
}

#[derive(Clone, Debug)]
pub struct DiscWitness {
    pub base: CPoint,
    pub xi: CPoint,
    pub big_r: f64,
    /// Selected composition index.
    pub n: usize,
    /// `τ_n(0)`, which must reproduce the base point.
    pub center_value: CPoint,
    pub center_error: f64,
    /// Finite-difference `τ_n'(0)`; target `R·ξ`.
    pub fd_derivative: CPoint,
    /// `‖fd_derivative − R·ξ‖ / R`.
    pub derivative_rel_error: f64,
    /// Disc boundary samples that failed to classify as attracted.
    pub containment_violations: usize,
    pub boundary_samples: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct WitnessConfig {
    /// Admissibility radius: the disc must fit in `B(0; r)`.
    pub r_fit: f64,
    /// Relative step for the direction transport at the base point.
    pub fd_step_rel: f64,
    /// Step in the disc parameter for the center derivative.
    pub fd_step_disc: f64,
    pub n_search_max: usize,
}

impl WitnessConfig {
    pub fn from_basin(p: &BasinParams) -> Self {
        Self {
            r_fit: p.c,
            fd_step_rel: 1e-7,
            fd_step_disc: 1e-6,
            n_search_max: 40,
        }
    }
}

/// Build a disc witness at (p, ξ) with derivative target R·ξ.
pub fn disc_witness(
    seq: &MapSequence,
    base: &CPoint,
    xi: &CPoint,
    big_r: f64,
    boundary_samples: usize,
    basin: &BasinParams,
    cfg: &WitnessConfig,
) -> Result<DiscWitness, KobayashiError> {
    assert!(big_r > 0.0, "R must be positive");
    let xi_norm = xi.norm_euclid().to_f64();
    if !(xi_norm > 0.0) {
        return Err(KobayashiError::ZeroTangent);
    }
    let xi_unit = xi.scale(ExtReal::from_f64(1.0 / xi_norm).expect("finite"));
    if !classify_point(seq, base, basin).is_attracted() {
        return Err(KobayashiError::NotAttracted);
    }

    // Forward transport of the base point and the two offset orbits used by
    // the centered difference ξ_n = (F(n)(p + hξ) − F(n)(p − hξ)) / 2h.
    let base_scale = base.norm_euclid().to_f64().max(1e-3);
    let h = cfg.fd_step_rel * base_scale;
    let h_ext = ExtReal::from_f64(h).expect("finite");
    let inv_2h = ExtReal::from_f64(1.0 / (2.0 * h)).expect("finite");

    let mut fwd = base.clone();
    let mut fwd_plus = base.add(&xi_unit.scale(h_ext));
    let mut fwd_minus = base.sub(&xi_unit.scale(h_ext));
    let mut trace = Vec::new();
    let mut selected: Option<(usize, CPoint, CPoint)> = None;

    for n in 0..=cfg.n_search_max {
        let step = seq.step_at(n);
        fwd = step.apply(&fwd)?;
        fwd_plus = step.apply(&fwd_plus)?;
        fwd_minus = step.apply(&fwd_minus)?;
        let xi_n = fwd_plus.sub(&fwd_minus).scale(inv_2h);
        let reach = fwd.norm_euclid().to_f64() + big_r * xi_n.norm_euclid().to_f64();
        trace.push(reach);
        if reach < cfg.r_fit {
            selected = Some((n, fwd.clone(), xi_n));
            break;
        }
    }
    let (n, p_n, xi_n) = selected.ok_or(KobayashiError::NoAdmissibleIndex {
        n_max: cfg.n_search_max,
        required: cfg.r_fit,
        trace: trace.clone(),
    })?;

    // τ_n(x) = F(n)⁻¹(p_n + x·R·ξ_n) for real or complex disc parameter x.
    let r_ext = ExtReal::from_f64(big_r).expect("finite");
    let tau = |x: (f64, f64)| -> Result<CPoint, MapsError> {
        let xc = crate::num::ExtComplex::from_f64_pair(x.0, x.1).expect("finite");
        let offset = CPoint(xi_n.0.iter().map(|c| c.mul(xc).scale(r_ext)).collect());
        seq.apply_inverse_chain(&p_n.add(&offset), n)
    };

    let center_value = tau((0.0, 0.0))?;
    let center_error = center_value.dist_euclid(base).to_f64();

    // Central difference with one Richardson step: the pulled-back disc has
    // violent higher derivatives near its convergence boundary, so the h²
    // term is eliminated rather than shrunk.
    let central = |h: f64| -> Result<CPoint, MapsError> {
        let tp = tau((h, 0.0))?;
        let tm = tau((-h, 0.0))?;
        Ok(tp
            .sub(&tm)
            .scale(ExtReal::from_f64(1.0 / (2.0 * h)).expect("finite")))
    };
    let hd = cfg.fd_step_disc;
    let d_h = central(hd)?;
    let d_h2 = central(0.5 * hd)?;
    let four_thirds = ExtReal::from_f64(4.0 / 3.0).expect("finite");
    let third = ExtReal::from_f64(1.0 / 3.0).expect("finite");
    let fd_derivative = d_h2.scale(four_thirds).sub(&d_h.scale(third));
    let target = xi_unit.scale(r_ext);
    let derivative_rel_error = fd_derivative.dist_euclid(&target).to_f64() / big_r;

    let mut violations = 0usize;
    for j in 0..boundary_samples {
        let theta = 2.0 * std::f64::consts::PI * (j as f64) / (boundary_samples as f64);
        let z = tau((theta.cos(), theta.sin()))?;
        if !classify_point(seq, &z, basin).is_attracted() {
            violations += 1;
        }
    }

    Ok(DiscWitness {
        base: base.clone(),
        xi: xi_unit,
        big_r,
        n,
        center_value,
        center_error,
        fd_derivative,
        derivative_rel_error,
        containment_violations: violations,
        boundary_samples,
    })
}
