//! Orbit classification and basin rasters.
//!
//! A point is attracted once its composed orbit enters the closed polydisc
//! Δᵏ(0;c) at a step n ≥ n₀; from there the per-step inequality
//! `a_{n+l}·c_l + M·c_l² < c_{l+1}` drives it down the shrinking polydisc
//! ladder, so no re-exit can occur. Escape is crossing the sup-norm
//! threshold (or exponent overflow). Everything else within the step budget
//! is Undecided, a first-class outcome.

use rayon::prelude::*;

use crate::grid::{GridSet, Rect};
use crate::maps::{CoeffSequence, CPoint, MapsError, MapSequence, PolySpec};
use crate::num::ExtReal;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// How escape is certified during classification.
///
/// Shift-like and Hénon-like escape is driven by the polynomial first
/// coordinate: crossing the threshold counts only from the dominant-first
/// wedge V_R⁺ ("If z ∈ V_R⁺, S(n)(z) → ∞"). Points with a transiently huge
/// trailing coordinate (inverse-image lobes of the basin) keep iterating
/// until they either collapse into the polydisc or the first coordinate
/// takes over. Sequences without that structure use the plain sup-norm
/// threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EscapeRule {
    SupNorm,
    DominantFirst,
}

/// Attraction/escape parameters for one sequence.
#[derive(Clone, Debug)]
pub struct BasinParams {
    /// Attraction polydisc radius; satisfies `1 − M·c > 0` with margin.
    pub c: f64,
    /// Ladder ratio: the l-th polydisc radius is `c·ladder_ratio^l`.
    /// Strictly between `M·c + a_{n₀}` and 1.
    pub ladder_ratio: f64,
    /// Quadratic bound constant: `|z₁²P(z₁)| ≤ M·|z₁|²` on `D(0;c)`.
    pub m_bound: f64,
    /// First step index at which polydisc entry is accepted as attraction.
    pub n0: usize,
    /// Escape threshold.
    pub r_escape: f64,
    pub escape_rule: EscapeRule,
    /// Iteration budget.
    pub n_max: usize,
    /// Ambient dimension k.
    pub dim: usize,
}

impl BasinParams {
    /// Derive defaults for a shift-like sequence with polynomial part `p`.
    ///
    /// `c = min(½, 1/(2·P(½)))` gives `M·c ≤ ½` for `M = P(c)` (positive
    /// coefficients make P increasing), and the ladder ratio sits halfway
    /// between `M·c` and 1. `n₀` is the first n with
    /// `a_n < ladder_ratio − M·c`, which makes the per-step ladder
    /// inequality hold for every l ≥ 0 at once.
    pub fn derive(p: &PolySpec, coeffs: &CoeffSequence, dim: usize, n_max: usize) -> Self {
        let c = 0.5f64.min(1.0 / (2.0 * p.sup_on_disc(0.5)));
        let m_bound = p.sup_on_disc(c);
        let ladder_ratio = 0.5 * (1.0 + m_bound * c);
        let slack = (ladder_ratio - m_bound * c).ln();
        let mut n0 = 0;
        while coeffs.log_a(n0).value() >= slack {
            n0 += 1;
            assert!(n0 < 10_000, "coefficient sequence never decays below the ladder slack");
        }
        let r_escape = 10f64.max(4.0 / p.c0());
        Self {
            c,
            ladder_ratio,
            m_bound,
            n0,
            r_escape,
            escape_rule: EscapeRule::DominantFirst,
            n_max,
            dim,
        }
    }

    /// Probe the ladder inequality `a_{n₀+l}·c_l + M·c_l² < c_{l+1}`
    /// explicitly for l = 0..depth; returns the first violating l.
    pub fn probe_ladder(&self, coeffs: &CoeffSequence, depth: usize) -> Option<usize> {
        let mut c_l = self.c;
        for l in 0..depth {
            let c_next = c_l * self.ladder_ratio;
            let a = coeffs.log_a(self.n0 + l).value().exp();
            if a * c_l + self.m_bound * c_l * c_l >= c_next {
                return Some(l);
            }
            c_l = c_next;
        }
        None
    }
}

/// Per-point classification outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitFate {
    /// First polydisc membership observed at step `first_n`.
    Attracted { first_n: usize },
    /// Sup-norm crossed the escape threshold (or overflowed) at `first_n`.
    Escaped { first_n: usize },
    /// Budget exhausted without a decision.
    Undecided { n_max: usize },
}

impl OrbitFate {
    pub fn is_attracted(self) -> bool {
        matches!(self, OrbitFate::Attracted { .. })
    }

    pub fn is_escaped(self) -> bool {
        matches!(self, OrbitFate::Escaped { .. })
    }

    pub fn is_undecided(self) -> bool {
        matches!(self, OrbitFate::Undecided { .. })
    }
}

fn escape_certified(z: &CPoint, r_esc: ExtReal, rule: EscapeRule) -> bool {
    if z.is_overflow() {
        return true;
    }
    match rule {
        EscapeRule::SupNorm => !r_esc.magnitude_ge(z.norm_inf()),
        EscapeRule::DominantFirst => {
            let m1 = z.0[0].modulus();
            !r_esc.magnitude_ge(m1) && z.0.iter().all(|c| m1.magnitude_ge(c.modulus()))
        }
    }
}

/// Classify one point under the composed sequence.
pub fn classify_point(seq: &MapSequence, z: &CPoint, p: &BasinParams) -> OrbitFate {
    let c = ExtReal::from_f64(p.c).expect("finite c");
    let r_esc = ExtReal::from_f64(p.r_escape).expect("finite escape radius");
    let mut first_entry: Option<usize> = None;
    let mut cur = z.clone();
    for n in 0..=p.n_max {
        cur = match seq.step_at(n).apply(&cur) {
            Ok(w) => w,
            Err(_) => return OrbitFate::Undecided { n_max: p.n_max },
        };
        if escape_certified(&cur, r_esc, p.escape_rule) {
            return OrbitFate::Escaped { first_n: n };
        }
        if cur.in_closed_polydisc(c) {
            let entry = *first_entry.get_or_insert(n);
            if n >= p.n0 {
                return OrbitFate::Attracted { first_n: entry };
            }
        } else {
            // Membership before n₀ that does not persist is not accepted.
            if first_entry.is_some_and(|e| e < p.n0) {
                first_entry = None;
            }
        }
    }
    OrbitFate::Undecided { n_max: p.n_max }
}

/// Iterate an attracted point beyond acceptance and report the first
/// re-exit from the polydisc, if any. Supports the monotone-exhaustion
/// assertion: entries at n ≥ n₀ never re-exit.
pub fn first_reexit(
    seq: &MapSequence,
    z: &CPoint,
    p: &BasinParams,
    extra_steps: usize,
) -> Result<Option<usize>, MapsError> {
    let c = ExtReal::from_f64(p.c).expect("finite c");
    let mut cur = z.clone();
    let mut accepted_at: Option<usize> = None;
    for n in 0..=p.n_max + extra_steps {
        cur = seq.step_at(n).apply(&cur)?;
        match accepted_at {
            None => {
                if n >= p.n0 && cur.in_closed_polydisc(c) {
                    accepted_at = Some(n);
                }
            }
            Some(_) => {
                if !cur.in_closed_polydisc(c) {
                    return Ok(Some(n));
                }
            }
        }
    }
    Ok(None)
}

/// Membership in the §4 region decomposition at threshold R.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Region {
    /// All coordinate moduli ≤ R.
    InVR,
    /// In V_R¹ (the dominant-first-coordinate wedge), possibly others too.
    InVRPlus,
    /// Only wedges with index ≥ 2 (1-based coordinate indices).
    InVRMinus(Vec<usize>),
}

/// Decide V_R / V_R^i membership. A coordinate index i (1-based) is in the
/// result when `|z_j| ≤ max(|z_i|, R)` for every j.
pub fn region_of(z: &CPoint, r_threshold: f64) -> Region {
    assert!(r_threshold > 0.0, "region threshold must be positive");
    let r = ExtReal::from_f64(r_threshold).expect("finite R");
    let moduli: Vec<ExtReal> = z.0.iter().map(|c| c.modulus()).collect();
    let in_vr = moduli.iter().all(|m| r.magnitude_ge(*m));
    if in_vr {
        return Region::InVR;
    }
    let mut indices = Vec::new();
    for (i, mi) in moduli.iter().enumerate() {
        let cap = if mi.magnitude_ge(r) { *mi } else { r };
        if moduli.iter().all(|mj| cap.magnitude_ge(*mj)) {
            indices.push(i + 1);
        }
    }
    if indices.contains(&1) {
        Region::InVRPlus
    } else {
        Region::InVRMinus(indices)
    }
}

/// Counts of region membership along classified orbits; the §4 lemma says
/// the `outside_both` counter stays at zero once R clears the threshold.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrichotomyCounter {
    pub steps_checked: usize,
    pub in_vr: usize,
    pub in_vr_plus: usize,
    pub outside_both: usize,
}

/// Track the trichotomy along an orbit (stops at overflow/escape scale).
pub fn trichotomy_along_orbit(
    seq: &MapSequence,
    z: &CPoint,
    r_threshold: f64,
    n_max: usize,
    counter: &mut TrichotomyCounter,
) {
    let mut cur = z.clone();
    for n in 0..=n_max {
        cur = match seq.step_at(n).apply(&cur) {
            Ok(w) => w,
            Err(_) => return,
        };
        if cur.is_overflow() {
            return;
        }
        counter.steps_checked += 1;
        match region_of(&cur, r_threshold) {
            Region::InVR => counter.in_vr += 1,
            Region::InVRPlus => counter.in_vr_plus += 1,
            Region::InVRMinus(_) => counter.outside_both += 1,
        }
    }
}

/// Affine 2-D slice of ℂᵏ: `point(sx, sy) = base + sx·u + sy·v`.
#[derive(Clone, Debug)]
pub struct SliceWindow {
    pub base: CPoint,
    pub u: CPoint,
    pub v: CPoint,
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
}

impl SliceWindow {
    pub fn new(
        base: CPoint,
        u: CPoint,
        v: CPoint,
        width: f64,
        height: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Self, MapsError> {
        if u.dim() != base.dim() || v.dim() != base.dim() {
            return Err(MapsError::DimensionMismatch {
                expected: base.dim(),
                got: u.dim().max(v.dim()),
            });
        }
        // Gram determinant in ℝ^{2k}: rejects ℝ-linearly dependent spans.
        let flat = |p: &CPoint| -> Vec<f64> {
            p.to_f64().into_iter().flat_map(|(a, b)| [a, b]).collect()
        };
        let (fu, fv) = (flat(&u), flat(&v));
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (uu, vv, uv) = (dot(&fu, &fu), dot(&fv, &fv), dot(&fu, &fv));
        let gram = uu * vv - uv * uv;
        if !(gram > 1e-12 * uu.max(vv).max(1e-300).powi(2)) {
            return Err(MapsError::InvalidPolynomial(
                "slice directions are linearly dependent".into(),
            ));
        }
        Ok(Self {
            base,
            u,
            v,
            width,
            height,
            nx,
            ny,
        })
    }

    /// Standard window through the origin spanned by coordinate directions:
    /// `axes = (i, j)` picks Re/Im parts of zᵢ and zⱼ when i ≠ j, or the
    /// (Re, Im)-plane of zᵢ when i == j.
    pub fn coordinate_plane(
        dim: usize,
        axes: (usize, usize),
        side: f64,
        res: usize,
    ) -> Result<Self, MapsError> {
        let mut uc = vec![(0.0, 0.0); dim];
        let mut vc = vec![(0.0, 0.0); dim];
        if axes.0 == axes.1 {
            uc[axes.0] = (1.0, 0.0);
            vc[axes.1] = (0.0, 1.0);
        } else {
            uc[axes.0] = (1.0, 0.0);
            vc[axes.1] = (1.0, 0.0);
        }
        Self::new(
            CPoint::zero(dim),
            CPoint::from_f64(&uc)?,
            CPoint::from_f64(&vc)?,
            side,
            side,
            res,
            res,
        )
    }

    /// World point of the pixel center (ix, iy); row iy = 0 at sy minimum.
    pub fn pixel_point(&self, ix: usize, iy: usize) -> CPoint {
        let sx = ((ix as f64 + 0.5) / self.nx as f64 - 0.5) * self.width;
        let sy = ((iy as f64 + 0.5) / self.ny as f64 - 0.5) * self.height;
        self.point_at(sx, sy)
    }

    /// World point of slice coordinates (sx, sy).
    pub fn point_at(&self, sx: f64, sy: f64) -> CPoint {
        let sxe = ExtReal::from_f64(sx).expect("finite");
        let sye = ExtReal::from_f64(sy).expect("finite");
        self.base.add(&self.u.scale(sxe)).add(&self.v.scale(sye))
    }

    /// Raster frame in slice coordinates (sx, sy).
    pub fn slice_rect(&self) -> Rect {
        Rect::new(0.0, 0.0, self.width, self.height)
    }

    pub fn pixel_size(&self) -> (f64, f64) {
        (self.width / self.nx as f64, self.height / self.ny as f64)
    }
}

/// Raster of per-pixel fates over a slice window.
#[derive(Clone, Debug)]
pub struct FateGrid {
    pub window: SliceWindow,
    fates: Vec<OrbitFate>,
}

impl FateGrid {
    pub fn at(&self, ix: usize, iy: usize) -> OrbitFate {
        self.fates[iy * self.window.nx + ix]
    }

    pub fn fates(&self) -> &[OrbitFate] {
        &self.fates
    }

    pub fn count_where(&self, pred: impl Fn(OrbitFate) -> bool) -> usize {
        self.fates.iter().filter(|&&f| pred(f)).count()
    }

    /// Pixels matching a fate predicate, as a grid in slice coordinates.
    pub fn select(&self, pred: impl Fn(OrbitFate) -> bool) -> GridSet {
        let mut g = GridSet::empty(self.window.slice_rect(), self.window.nx, self.window.ny);
        for iy in 0..self.window.ny {
            for ix in 0..self.window.nx {
                if pred(self.at(ix, iy)) {
                    g.set(ix, iy, true);
                }
            }
        }
        g
    }
}

/// Classify every pixel center of the window; deterministic for fixed
/// inputs regardless of the worker pool shape.
pub fn render_slice(seq: &MapSequence, window: &SliceWindow, p: &BasinParams) -> FateGrid {
    let n = window.nx * window.ny;
    let fates: Vec<OrbitFate> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (ix, iy) = (i % window.nx, i / window.nx);
            let z = window.pixel_point(ix, iy);
            classify_point(seq, &z, p)
        })
        .collect();
    FateGrid {
        window: window.clone(),
        fates,
    }
}

/// Interface pixels: the closed 3×3 neighborhood sees both an Attracted and
/// an Escaped pixel and the pixel itself is not Escaped. This makes a
/// half-plane split produce a one-pixel-wide interface on the attracted
/// side; Undecided pixels sandwiched between the two phases count as
/// boundary material.
pub fn boundary_pixels(g: &FateGrid) -> GridSet {
    let (nx, ny) = (g.window.nx, g.window.ny);
    let mut out = GridSet::empty(g.window.slice_rect(), nx, ny);
    for iy in 0..ny {
        for ix in 0..nx {
            if g.at(ix, iy).is_escaped() {
                continue;
            }
            let mut saw_attracted = false;
            let mut saw_escaped = false;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let jx = ix as i64 + dx;
                    let jy = iy as i64 + dy;
                    if jx < 0 || jy < 0 || jx >= nx as i64 || jy >= ny as i64 {
                        continue;
                    }
                    match g.at(jx as usize, jy as usize) {
                        OrbitFate::Attracted { .. } => saw_attracted = true,
                        OrbitFate::Escaped { .. } => saw_escaped = true,
                        OrbitFate::Undecided { .. } => {}
                    }
                }
            }
            if saw_attracted && saw_escaped {
                out.set(ix, iy, true);
            }
        }
    }
    out
}

/// A successful boundary probe: both fates realized inside B(z; eps).
#[derive(Clone, Debug)]
pub struct WitnessPair {
    pub attracted: CPoint,
    pub attracted_fate: OrbitFate,
    pub escaped: CPoint,
    pub escaped_fate: OrbitFate,
    pub tried: usize,
}

/// Failure report for a boundary probe.
#[derive(Clone, Debug)]
pub struct WitnessFailure {
    pub attracted_found: bool,
    pub escaped_found: bool,
    pub tried: usize,
}

/// Search B(z; eps) for one attracted and one escaped point: structured
/// rings in the z₁-plane first, then random fill in the full ball.
pub fn boundary_witness(
    seq: &MapSequence,
    z: &CPoint,
    eps: f64,
    budget: usize,
    p: &BasinParams,
    seed: u64,
) -> Result<WitnessPair, WitnessFailure> {
    assert!(eps > 0.0, "witness radius must be positive");
    let dim = z.dim();
    let mut attracted: Option<(CPoint, OrbitFate)> = None;
    let mut escaped: Option<(CPoint, OrbitFate)> = None;
    let mut tried = 0usize;

    let consider = |cand: CPoint,
                        tried: &mut usize,
                        attracted: &mut Option<(CPoint, OrbitFate)>,
                        escaped: &mut Option<(CPoint, OrbitFate)>| {
        *tried += 1;
        let fate = classify_point(seq, &cand, p);
        match fate {
            OrbitFate::Attracted { .. } if attracted.is_none() => {
                *attracted = Some((cand, fate));
            }
            OrbitFate::Escaped { .. } if escaped.is_none() => {
                *escaped = Some((cand, fate));
            }
            _ => {}
        }
    };

    // Structured rings in the first coordinate.
    'rings: for &scale in &[1.0, 0.75, 0.5, 0.25] {
        let r = eps * scale;
        for j in 0..16 {
            if tried >= budget {
                break 'rings;
            }
            let theta = 2.0 * std::f64::consts::PI * (j as f64) / 16.0;
            let mut coords = z.to_f64();
            coords[0].0 += r * theta.cos();
            coords[0].1 += r * theta.sin();
            let cand = CPoint::from_f64(&coords).expect("finite");
            consider(cand, &mut tried, &mut attracted, &mut escaped);
            if attracted.is_some() && escaped.is_some() {
                break 'rings;
            }
        }
    }

    // Random fill in the full ball.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while tried < budget && (attracted.is_none() || escaped.is_none()) {
        let dir: Vec<f64> = (0..2 * dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        let radius = eps * rng.random::<f64>().powf(1.0 / (2 * dim) as f64);
        let mut coords = z.to_f64();
        for (i, c) in coords.iter_mut().enumerate() {
            c.0 += radius * dir[2 * i] / norm;
            c.1 += radius * dir[2 * i + 1] / norm;
        }
        let cand = CPoint::from_f64(&coords).expect("finite");
        consider(cand, &mut tried, &mut attracted, &mut escaped);
    }

    match (attracted, escaped) {
        (Some((pa, fa)), Some((pe, fe))) => {
            // Re-verify both fates before handing them out.
            debug_assert_eq!(classify_point(seq, &pa, p), fa);
            debug_assert_eq!(classify_point(seq, &pe, p), fe);
            Ok(WitnessPair {
                attracted: pa,
                attracted_fate: fa,
                escaped: pe,
                escaped_fate: fe,
                tried,
            })
        }
        (a, e) => Err(WitnessFailure {
            attracted_found: a.is_some(),
            escaped_found: e.is_some(),
            tried,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::CoeffSequence;

    fn default_seq() -> (MapSequence, BasinParams) {
        let coeffs = CoeffSequence::generator(1.0, 3.0).unwrap();
        let p = PolySpec::constant(1.0);
        let params = BasinParams::derive(&p, &coeffs, 2, 60);
        let seq = MapSequence::shift_like(2, coeffs, p).unwrap();
        (seq, params)
    }

    fn pt(coords: &[(f64, f64)]) -> CPoint {
        CPoint::from_f64(coords).unwrap()
    }

    #[test]
    fn derived_params_are_sane() {
        let (_, p) = default_seq();
        assert_eq!(p.c, 0.5);
        assert_eq!(p.m_bound, 1.0);
        assert!(p.ladder_ratio > p.m_bound * p.c && p.ladder_ratio < 1.0);
        assert!(1.0 - p.m_bound * p.c > 0.0);
        // a_0 = e^{-1} ≈ 0.37 exceeds the slack 0.25; a_1 = e^{-3} does not.
        assert_eq!(p.n0, 1);
    }

    #[test]
    fn ladder_probe_passes_at_n0() {
        let coeffs = CoeffSequence::generator(1.0, 3.0).unwrap();
        let (_, p) = default_seq();
        assert_eq!(p.probe_ladder(&coeffs, 32), None);
    }

    #[test]
    fn origin_is_attracted_at_zero() {
        let (seq, p) = default_seq();
        let fate = classify_point(&seq, &CPoint::zero(2), &p);
        assert_eq!(fate, OrbitFate::Attracted { first_n: 0 });
    }

    #[test]
    fn interior_point_attracted_at_zero() {
        let (seq, p) = default_seq();
        let z = pt(&[(p.c / 2.0, 0.0), (p.c / 2.0, 0.0)]);
        assert_eq!(classify_point(&seq, &z, &p), OrbitFate::Attracted { first_n: 0 });
    }

    #[test]
    fn large_point_escapes_quickly() {
        let (seq, p) = default_seq();
        let z = pt(&[(2.0, 0.0), (0.0, 0.0)]);
        match classify_point(&seq, &z, &p) {
            OrbitFate::Escaped { first_n } => assert!(first_n <= 5, "slow escape {first_n}"),
            other => panic!("expected escape, got {other:?}"),
        }
    }

    #[test]
    fn no_reexit_for_attracted_samples() {
        let (seq, p) = default_seq();
        for i in 0..50 {
            let t = i as f64 / 50.0;
            let z = pt(&[(0.4 * t, 0.1 * t), (0.2 - 0.3 * t, 0.05)]);
            if classify_point(&seq, &z, &p).is_attracted() {
                assert_eq!(first_reexit(&seq, &z, &p, 15).unwrap(), None);
            }
        }
    }

    #[test]
    fn shift_like_dimension_three_classifies() {
        let coeffs = CoeffSequence::generator(1.0, 3.0).unwrap();
        let poly = PolySpec::constant(1.0);
        let params = BasinParams::derive(&poly, &coeffs, 3, 60);
        let seq = MapSequence::shift_like(3, coeffs, poly).unwrap();
        let inside = pt(&[(0.2, 0.0), (0.1, 0.05), (-0.1, 0.1)]);
        assert!(classify_point(&seq, &inside, &params).is_attracted());
        let outside = pt(&[(3.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        assert!(classify_point(&seq, &outside, &params).is_escaped());
    }

    #[test]
    fn rosay_rudin_neighborhood_attracted() {
        let seq = MapSequence::rosay_rudin(0);
        let params = BasinParams {
            c: 0.3,
            ladder_ratio: 0.9,
            m_bound: 0.0,
            n0: 0,
            r_escape: 40.0,
            escape_rule: EscapeRule::SupNorm,
            n_max: 200,
            dim: 2,
        };
        let z = pt(&[(0.05, 0.02), (-0.03, 0.01)]);
        assert!(classify_point(&seq, &z, &params).is_attracted());
        // The shifted copy at (2πi, 0) attracts its own neighborhood.
        let seq_m = MapSequence::rosay_rudin(1);
        assert!(classify_point(&seq_m, &z, &params).is_attracted());
    }

    #[test]
    fn region_membership_examples() {
        let r = 2.0;
        assert_eq!(region_of(&pt(&[(1.0, 0.0), (1.0, 0.0)]), r), Region::InVR);
        assert_eq!(
            region_of(&pt(&[(4.0, 0.0), (1.0, 0.0)]), r),
            Region::InVRPlus
        );
        let z3 = pt(&[(1.0, 0.0), (4.0, 0.0), (2.0, 0.0)]);
        assert_eq!(region_of(&z3, r), Region::InVRMinus(vec![2]));
    }

    #[test]
    fn escape_lemma_from_vr_plus() {
        // Sampled points that enter V_R⁺ must end up Escaped.
        let (seq, p) = default_seq();
        let mut checked = 0;
        for i in 0..20 {
            let x = 1.5 + 0.2 * i as f64;
            let z = pt(&[(x, 0.0), (0.3, 0.1)]);
            if let Region::InVRPlus = region_of(&z, 1.0) {
                checked += 1;
                assert!(classify_point(&seq, &z, &p).is_escaped(), "x = {x}");
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn trichotomy_counter_stays_clean() {
        let (seq, p) = default_seq();
        let mut counter = TrichotomyCounter::default();
        for i in 0..30 {
            let t = i as f64 / 30.0;
            let z = pt(&[(3.0 * t - 1.5, 0.2), (0.5 - t, -0.1)]);
            trichotomy_along_orbit(&seq, &z, p.r_escape, 20, &mut counter);
        }
        assert!(counter.steps_checked > 0);
        assert_eq!(counter.outside_both, 0);
    }

    #[test]
    fn tiny_window_renders_all_attracted() {
        let (seq, p) = default_seq();
        let w = SliceWindow::coordinate_plane(2, (0, 1), 0.05, 16).unwrap();
        let g = render_slice(&seq, &w, &p);
        assert_eq!(g.count_where(|f| f.is_attracted()), 16 * 16);
    }

    #[test]
    fn far_window_renders_all_escaped() {
        let (seq, p) = default_seq();
        let base = pt(&[(50.0, 0.0), (0.0, 0.0)]);
        let u = pt(&[(1.0, 0.0), (0.0, 0.0)]);
        let v = pt(&[(0.0, 1.0), (0.0, 0.0)]);
        let w = SliceWindow::new(base, u, v, 1.0, 1.0, 8, 8).unwrap();
        let g = render_slice(&seq, &w, &p);
        assert_eq!(g.count_where(|f| f.is_escaped()), 64);
    }

    #[test]
    fn render_is_deterministic() {
        let (seq, p) = default_seq();
        let w = SliceWindow::coordinate_plane(2, (0, 0), 2.0, 48).unwrap();
        let a = render_slice(&seq, &w, &p);
        let b = render_slice(&seq, &w, &p);
        assert_eq!(a.fates(), b.fates());
    }

    #[test]
    fn slice_window_rejects_dependent_directions() {
        let u = pt(&[(1.0, 0.0), (0.0, 0.0)]);
        let v = pt(&[(2.0, 0.0), (0.0, 0.0)]);
        assert!(SliceWindow::new(CPoint::zero(2), u, v, 1.0, 1.0, 4, 4).is_err());
    }

    #[test]
    fn boundary_of_uniform_grid_is_empty() {
        let (seq, p) = default_seq();
        let w = SliceWindow::coordinate_plane(2, (0, 1), 0.05, 12).unwrap();
        let g = render_slice(&seq, &w, &p);
        assert!(boundary_pixels(&g).is_empty());
    }

    #[test]
    fn boundary_of_half_split_is_one_pixel_wide() {
        let w = SliceWindow::coordinate_plane(2, (0, 1), 1.0, 16).unwrap();
        let fates: Vec<OrbitFate> = (0..16 * 16)
            .map(|i| {
                if i % 16 < 8 {
                    OrbitFate::Attracted { first_n: 0 }
                } else {
                    OrbitFate::Escaped { first_n: 0 }
                }
            })
            .collect();
        let g = FateGrid { window: w, fates };
        let b = boundary_pixels(&g);
        // Exactly one column (the attracted side of the interface).
        assert_eq!(b.count(), 16);
        for iy in 0..16 {
            assert!(b.get(7, iy));
        }
    }

    #[test]
    fn witness_fails_deep_inside_and_far_outside() {
        let (seq, p) = default_seq();
        let deep = CPoint::zero(2);
        let res = boundary_witness(&seq, &deep, 0.01, 200, &p, 7);
        match res {
            Err(f) => {
                assert!(f.attracted_found);
                assert!(!f.escaped_found);
            }
            Ok(_) => panic!("no escaped point should exist near the origin"),
        }

        let far = pt(&[(40.0, 0.0), (0.0, 0.0)]);
        let res = boundary_witness(&seq, &far, 0.01, 200, &p, 7);
        match res {
            Err(f) => {
                assert!(f.escaped_found);
                assert!(!f.attracted_found);
            }
            Ok(_) => panic!("no attracted point should exist far outside"),
        }
    }

    #[test]
    fn witness_succeeds_on_rendered_interface() {
        let (seq, p) = default_seq();
        let w = SliceWindow::coordinate_plane(2, (0, 0), 3.0, 96).unwrap();
        let g = render_slice(&seq, &w, &p);
        let b = boundary_pixels(&g);
        let px = w.width / w.nx as f64;
        let centers = b.set_pixel_centers();
        assert!(!centers.is_empty(), "interface should be nonempty");
        let mut successes = 0;
        for &(sx, sy) in centers.iter().step_by(centers.len().div_ceil(12)) {
            let z = g.window.point_at(sx, sy);
            if boundary_witness(&seq, &z, 4.0 * px, 400, &p, 11).is_ok() {
                successes += 1;
            }
        }
        assert!(successes > 0, "no witness found on the interface");
    }
}
