//! Scenario layer: named constructions tying the modules together.
//!
//! A scenario bundles a map sequence with its basin parameters, default
//! slice windows and a canonical manifest, reproducible from the manifest
//! alone. The coupling construction picks shift-like coefficients small
//! enough that the first coordinate of the composed orbit follows the
//! one-variable dynamics within the per-step perturbation margins, which
//! pins the forward Julia set of the sequence to the polynomial's Julia
//! set inside the tube `N_C`.

use thiserror::Error;

use crate::basin::{
    boundary_witness, boundary_pixels, classify_point, render_slice, BasinParams, SliceWindow,
};
use crate::dimension::{boxdim_grid, DimEstimate, DimensionError};
use crate::grid::GridSet;
use crate::io::{fmt_f64, Manifest};
use crate::julia1d::{preimage_grid_on, JuliaError, NestedSequence, Poly1};
use crate::maps::{CoeffSequence, CPoint, MapsError, MapSequence, PolySpec};
use crate::num::LogMag;
use crate::potential::PotentialParams;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Maps(#[from] MapsError),
    #[error(transparent)]
    Julia(#[from] JuliaError),
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error("coefficient sequence failed validation: {0}")]
    SequenceInvalid(String),
    #[error("coupling margins exhausted before any step: {0}")]
    NoMargins(String),
    #[error("polynomial is not of the shift-like form z²·P(z): {0}")]
    NotQuadraticHead(String),
}

/// A named, reproducible construction.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub seq: MapSequence,
    pub coeffs: CoeffSequence,
    pub poly: PolySpec,
    pub basin: BasinParams,
    pub potential: PotentialParams,
    pub windows: Vec<(String, SliceWindow)>,
    pub manifest: Manifest,
}

impl Scenario {
    pub fn content_hash(&self) -> String {
        self.manifest.content_hash()
    }
}

fn scenario_manifest(
    name: &str,
    seq: &MapSequence,
    basin: &BasinParams,
    windows: &[(String, SliceWindow)],
) -> Manifest {
    let mut m = Manifest::new();
    m.push("scenario", "name", name);
    m.push("scenario", "sequence", seq.descriptor());
    m.push("scenario", "dim", seq.dim());
    m.push("basin", "c", fmt_f64(basin.c));
    m.push("basin", "ladder_ratio", fmt_f64(basin.ladder_ratio));
    m.push("basin", "m_bound", fmt_f64(basin.m_bound));
    m.push("basin", "n0", basin.n0);
    m.push("basin", "r_escape", fmt_f64(basin.r_escape));
    m.push("basin", "escape_rule", format!("{:?}", basin.escape_rule));
    m.push("basin", "n_max", basin.n_max);
    for (wname, w) in windows {
        let section = format!("window.{wname}");
        let fmt_pt = |p: &CPoint| {
            p.to_f64()
                .iter()
                .map(|(re, im)| format!("{},{}", fmt_f64(*re), fmt_f64(*im)))
                .collect::<Vec<_>>()
                .join(";")
        };
        m.push(&section, "base", fmt_pt(&w.base));
        m.push(&section, "u", fmt_pt(&w.u));
        m.push(&section, "v", fmt_pt(&w.v));
        m.push(&section, "width", fmt_f64(w.width));
        m.push(&section, "height", fmt_f64(w.height));
        m.push(&section, "res", format!("{}x{}", w.nx, w.ny));
    }
    m
}

/// Shift-like basin scenario with generator coefficients `log a_n = −K·gⁿ`.
/// Validation of both decay constraints runs on a 64-term prefix.
pub fn build_theorem11_scenario(
    p: PolySpec,
    k_scale: f64,
    growth: f64,
    window_side: f64,
    res: usize,
) -> Result<Scenario, SuiteError> {
    let coeffs = CoeffSequence::generator(k_scale, growth)?;
    let report = crate::maps::validate_sequence(&coeffs, 64);
    if !report.pass {
        return Err(SuiteError::SequenceInvalid(format!(
            "generator K={k_scale}, g={growth}: root decay {:?}",
            report.generator_root_decay
        )));
    }
    let basin = BasinParams::derive(&p, &coeffs, 2, 60);
    let potential = PotentialParams::derive(&p, &basin);
    let seq = MapSequence::shift_like(2, coeffs.clone(), p.clone())?;
    let windows = vec![
        (
            "re1-re2".to_string(),
            SliceWindow::coordinate_plane(2, (0, 1), window_side, res)?,
        ),
        (
            "re1-im1".to_string(),
            SliceWindow::coordinate_plane(2, (0, 0), window_side, res)?,
        ),
    ];
    let name = format!("theorem11-K{k_scale}-g{growth}");
    let manifest = scenario_manifest(&name, &seq, &basin, &windows);
    Ok(Scenario {
        name,
        seq,
        coeffs,
        poly: p,
        basin,
        potential,
        windows,
        manifest,
    })
}

/// Tube geometry for the Julia coupling: `N_C` half-width, the Julia
/// δ-neighborhood, and a radius R with `J_p(δ) ⊂ D(0;R)`.
#[derive(Clone, Copy, Debug)]
pub struct TubeSpec {
    pub c_tube: f64,
    pub delta: f64,
    pub r_julia: f64,
}

impl TubeSpec {
    /// Derive R from the Julia raster (max modulus plus δ plus a margin).
    pub fn derive(c_tube: f64, delta: f64, julia: &GridSet) -> Self {
        let r_max = julia
            .set_pixel_centers()
            .iter()
            .map(|&(x, y)| x.hypot(y))
            .fold(0.0f64, f64::max);
        Self {
            c_tube,
            delta,
            r_julia: r_max + delta + 0.2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CouplingReport {
    /// Steps whose coefficient is certified by a nested-sequence margin.
    pub certified_len: usize,
    /// Diagnostic when the margin list was shorter than requested.
    pub truncated: Option<String>,
}

/// Coefficients `a_n < min(a_{n−1}², c_n)` with `c_n = ½·c'_n/R`, in the
/// log domain (halved once more against the strict inequality). Beyond
/// the certified prefix the sequence continues by cubing, which keeps both
/// decay constraints.
pub fn couple_sequence_to_julia(
    nested: &NestedSequence,
    tube: &TubeSpec,
    n_max: usize,
) -> Result<(CoeffSequence, CouplingReport), SuiteError> {
    if nested.stages.is_empty() {
        return Err(SuiteError::NoMargins(
            nested
                .truncated
                .clone()
                .unwrap_or_else(|| "no nested stages".into()),
        ));
    }
    let r = tube.r_julia;
    let mut logs: Vec<LogMag> = Vec::new();
    // a_0 is capped by the first margin so the very first perturbation
    // w_0 = a_1·(coordinate) already respects c'_1; strict inequalities come
    // from the extra factor ½.
    let c1 = 0.5 * nested.stages[0].c_prime / r;
    logs.push(LogMag::new((0.5 * c1.min(1.0)).ln()));
    for n in 1..=n_max.min(nested.stages.len()) {
        let c_n = 0.5 * nested.stages[n - 1].c_prime / r;
        let prev = logs[n - 1].value();
        let log_a = (2.0 * prev).min(c_n.ln()) + 0.5f64.ln();
        logs.push(LogMag::new(log_a));
    }
    let certified_len = logs.len();
    let seq = CoeffSequence::explicit(logs)
        .map_err(|e| SuiteError::SequenceInvalid(e.to_string()))?;
    let report = CouplingReport {
        certified_len,
        truncated: if certified_len <= n_max {
            nested.truncated.clone()
        } else {
            None
        },
    };
    Ok((seq, report))
}

/// Extract the quadratic-head factor: `p1(z) = z²·P(z)` with positive
/// constant term.
pub fn quadratic_head_factor(p1: &Poly1) -> Result<PolySpec, SuiteError> {
    let c = p1.coeffs();
    if c.len() < 3 || c[0] != 0.0 || c[1] != 0.0 {
        return Err(SuiteError::NotQuadraticHead(format!("{c:?}")));
    }
    let p = PolySpec::new(c[2..].to_vec())?;
    p.validate_positive()?;
    Ok(p)
}

/// Shift-like scenario whose first-coordinate polynomial follows `p1` and
/// whose coefficients are coupled to the nested margins.
pub fn coupled_scenario(
    p1: &Poly1,
    nested: &NestedSequence,
    tube: &TubeSpec,
    n_max: usize,
) -> Result<(Scenario, CouplingReport), SuiteError> {
    let poly = quadratic_head_factor(p1)?;
    let (coeffs, report) = couple_sequence_to_julia(nested, tube, n_max)?;
    let check = crate::maps::validate_sequence(&coeffs, report.certified_len.saturating_sub(1));
    if !check.pass {
        return Err(SuiteError::SequenceInvalid(
            "coupled sequence failed the decay constraints".into(),
        ));
    }
    let mut basin = BasinParams::derive(&poly, &coeffs, 2, 60);
    // Escape must clear the tube radius so V_R⁺ certification applies.
    basin.r_escape = basin.r_escape.max(2.0 * tube.r_julia);
    let potential = PotentialParams::derive(&poly, &basin);
    let seq = MapSequence::shift_like(2, coeffs.clone(), poly.clone())?;
    let name = format!("coupled-{:?}", p1.coeffs());
    let windows = Vec::new();
    let mut manifest = scenario_manifest(&name, &seq, &basin, &windows);
    manifest.push("coupling", "tube_c", fmt_f64(tube.c_tube));
    manifest.push("coupling", "tube_delta", fmt_f64(tube.delta));
    manifest.push("coupling", "tube_r", fmt_f64(tube.r_julia));
    manifest.push("coupling", "certified_len", report.certified_len);
    Ok((
        Scenario {
            name,
            seq,
            coeffs,
            poly,
            basin,
            potential,
            windows,
            manifest,
        },
        report,
    ))
}

/// Sample counts from the two components of `N_C ∖ U`.
#[derive(Clone, Copy, Debug, Default)]
pub struct TubeDichotomy {
    pub compact_attracted: usize,
    pub compact_total: usize,
    pub unbounded_escaped: usize,
    pub unbounded_total: usize,
}

impl TubeDichotomy {
    pub fn pass(&self) -> bool {
        self.compact_attracted == self.compact_total
            && self.unbounded_escaped == self.unbounded_total
            && self.compact_total > 0
            && self.unbounded_total > 0
    }
}

/// Classify points `(z₁, z₂)` with z₁ sampled from the compact/unbounded
/// components of the preimage complement and `|z₂| < C` random in the tube.
pub fn tube_dichotomy(
    scenario: &Scenario,
    nested: &NestedSequence,
    tube: &TubeSpec,
    per_side: usize,
    seed: u64,
) -> TubeDichotomy {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = TubeDichotomy::default();

    let compact = nested.c0.set_pixel_centers();
    let unbounded: Vec<(f64, f64)> = nested
        .e0
        .set_pixel_centers()
        .into_iter()
        .filter(|&(x, y)| x.hypot(y) <= tube.r_julia)
        .collect();

    let sample = |pool: &[(f64, f64)], rng: &mut rand_chacha::ChaCha8Rng| -> Vec<CPoint> {
        (0..per_side)
            .map(|_| {
                let &(x, y) = &pool[rng.random_range(0..pool.len())];
                let rho = tube.c_tube * rng.random::<f64>();
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                CPoint::from_f64(&[(x, y), (rho * theta.cos(), rho * theta.sin())])
                    .expect("finite")
            })
            .collect()
    };

    if !compact.is_empty() {
        for z in sample(&compact, &mut rng) {
            out.compact_total += 1;
            if classify_point(&scenario.seq, &z, &scenario.basin).is_attracted() {
                out.compact_attracted += 1;
            }
        }
    }
    if !unbounded.is_empty() {
        for z in sample(&unbounded, &mut rng) {
            out.unbounded_total += 1;
            if classify_point(&scenario.seq, &z, &scenario.basin).is_escaped() {
                out.unbounded_escaped += 1;
            }
        }
    }
    out
}

/// Measurement report for the forward-Julia-set slice.
#[derive(Clone, Debug)]
pub struct JPlusReport {
    pub boundary_pixels: usize,
    pub boxdim: DimEstimate,
    /// Directed distance from the rendered boundary into the U tube.
    pub distance_into_tube: f64,
    /// Tolerance `δ + 2·pixel diagonal` for the one-sided containment.
    pub tube_tolerance: f64,
    pub witness_successes: usize,
    pub witness_attempts: usize,
    pub slice_z2: f64,
    pub boundary: GridSet,
    pub tube_raster: GridSet,
}

impl JPlusReport {
    pub fn tube_containment_pass(&self) -> bool {
        self.distance_into_tube <= self.tube_tolerance
    }

    pub fn witness_rate(&self) -> f64 {
        if self.witness_attempts == 0 {
            0.0
        } else {
            self.witness_successes as f64 / self.witness_attempts as f64
        }
    }
}

/// Render the z₁-plane slice at fixed z₂ inside the tube, extract the fate
/// interface, estimate its box dimension, probe boundary points for
/// two-sided witnesses, and compare against the U tube raster.
#[allow(clippy::too_many_arguments)]
pub fn measure_jplus(
    scenario: &Scenario,
    p1: &Poly1,
    julia_delta: &GridSet,
    tube: &TubeSpec,
    side: f64,
    res: usize,
    eps_list: &[f64],
    witness_budget: usize,
    witness_samples: usize,
    seed: u64,
) -> Result<JPlusReport, SuiteError> {
    let z2 = 0.5 * tube.c_tube;
    let base = CPoint::from_f64(&[(0.0, 0.0), (z2, 0.0)])?;
    let u = CPoint::from_f64(&[(1.0, 0.0), (0.0, 0.0)])?;
    let v = CPoint::from_f64(&[(0.0, 1.0), (0.0, 0.0)])?;
    let window = SliceWindow::new(base, u, v, side, side, res, res)?;
    let fates = render_slice(&scenario.seq, &window, &scenario.basin);
    let boundary = boundary_pixels(&fates);

    // The slice is the z₁-plane through 0, so the slice frame and the
    // world frame of the tube raster coincide.
    let tube_raster = preimage_grid_on(p1, julia_delta, window.slice_rect(), res, res);

    let boxdim = boxdim_grid(&boundary, eps_list)?;
    let px_diag = boundary.pixel_diag();
    let distance_into_tube = if boundary.is_empty() || tube_raster.is_empty() {
        f64::INFINITY
    } else {
        boundary.directed_distance_to(&tube_raster)
    };

    let centers = boundary.set_pixel_centers();
    let mut successes = 0usize;
    let mut attempts = 0usize;
    if !centers.is_empty() {
        let take = witness_samples.min(centers.len()).max(1);
        let eps = 4.0 * window.pixel_size().0;
        for i in 0..take {
            let (sx, sy) = centers[i * centers.len() / take];
            attempts += 1;
            let z = window.point_at(sx, sy);
            if boundary_witness(
                &scenario.seq,
                &z,
                eps,
                witness_budget,
                &scenario.basin,
                seed.wrapping_add(i as u64),
            )
            .is_ok()
            {
                successes += 1;
            }
        }
    }

    Ok(JPlusReport {
        boundary_pixels: boundary.count(),
        boxdim,
        distance_into_tube,
        tube_tolerance: tube.delta + 2.0 * px_diag,
        witness_successes: successes,
        witness_attempts: attempts,
        slice_z2: z2,
        boundary,
        tube_raster,
    })
}
