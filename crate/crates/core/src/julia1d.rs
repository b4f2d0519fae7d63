//! One-variable polynomial dynamics: Julia set rasters, δ-neighborhoods,
//! hyperbolicity probes, and the nested compact-set sequence that yields
//! per-step perturbation margins.
//!
//! The nested construction starts from the compact component of
//! `ℂ ∖ p⁻¹(J_p(δ₀))` containing 0 and repeatedly takes the forward image
//! plus the largest dilation that stays inside the previous set. The
//! perturbation margins `c'_n = min(δ_n, η_n, cap)` then certify the orbit
//! dichotomy: perturbed orbits from the compact side reach 0, from the
//! unbounded side they escape. All image rasters over-approximate (pixel
//! padding by a derivative bound) so the grid containments fail safe.

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::{GridSet, Rect};

#[derive(Debug, Error)]
pub enum JuliaError {
    #[error("polynomial must have degree ≥ 2, got {0}")]
    DegreeTooLow(usize),
    #[error("invalid polynomial: {0}")]
    Invalid(String),
    #[error("no attraction radius found by sampling (origin not attracting?)")]
    NoAttractionRadius,
    #[error("the compact component containing 0 is not resolvable: {0}")]
    NotResolvable(String),
    #[error("nested construction requires p(0) = 0, got {0}")]
    OriginNotFixed(f64),
}

/// One-variable polynomial with real coefficients, `p(z) = Σ cᵢ zⁱ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly1 {
    coeffs: Vec<f64>,
}

impl Poly1 {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, JuliaError> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(JuliaError::Invalid("non-finite coefficient".into()));
        }
        let degree = coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
        if degree < 2 {
            return Err(JuliaError::DegreeTooLow(degree));
        }
        let mut coeffs = coeffs;
        coeffs.truncate(degree + 1);
        Ok(Self { coeffs })
    }

    /// The family `a z⁴ + b z³ + z²`.
    pub fn quartic(a: f64, b: f64) -> Result<Self, JuliaError> {
        Self::new(vec![0.0, 0.0, 1.0, b, a])
    }

    pub fn square() -> Self {
        Self::new(vec![0.0, 0.0, 1.0]).expect("degree 2")
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn derivative(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| i as f64 * c)
            .collect()
    }

    /// `sup_{|z| ≤ r} |p'(z)| ≤ Σ i·|cᵢ|·r^{i−1}`, a Lipschitz bound.
    pub fn lipschitz_on_disc(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| i as f64 * c.abs() * r.powi(i as i32 - 1))
            .sum()
    }

    /// Smallest radius beyond which `|p(z) + w| ≥ q·|z|` holds for every
    /// `|w| ≤ cap`, from the coefficient lower bound
    /// `|p(z)| ≥ |c_d|·t^d − Σ_{i<d}|cᵢ|·t^i`. The auxiliary polynomial has
    /// exactly one positive root (one sign change), so bisection suffices.
    pub fn growth_radius(&self, q: f64, cap: f64) -> f64 {
        let d = self.degree();
        let lead = self.coeffs[d].abs();
        let g = |t: f64| -> f64 {
            let mut v = lead * t.powi(d as i32) - cap - q * t;
            for (i, &c) in self.coeffs.iter().enumerate().take(d) {
                v -= c.abs() * t.powi(i as i32);
            }
            v
        };
        let mut hi = 1.0;
        while g(hi) < 0.0 {
            hi *= 2.0;
            assert!(hi < 1e30, "no growth radius found");
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Largest dyadic radius (from ½ down) whose circle maps inside itself
    /// with a 0.9 safety factor, by 64-point sampling.
    pub fn attraction_radius(&self) -> Result<f64, JuliaError> {
        let mut r = 0.5;
        for _ in 0..24 {
            let sup = (0..64)
                .map(|j| {
                    let theta = 2.0 * std::f64::consts::PI * j as f64 / 64.0;
                    self.eval(Complex64::from_polar(r, theta)).norm()
                })
                .fold(0.0f64, f64::max);
            if sup <= 0.9 * r {
                return Ok(r);
            }
            r *= 0.5;
        }
        Err(JuliaError::NoAttractionRadius)
    }

    /// Critical points: roots of p' by Durand–Kerner iteration.
    pub fn critical_points(&self) -> Vec<Complex64> {
        let dp = self.derivative();
        polynomial_roots(&dp)
    }
}

/// All complex roots of a real polynomial (Durand–Kerner; fine for the
/// small degrees used here).
fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let deg = match coeffs.iter().rposition(|&c| c != 0.0) {
        Some(d) if d >= 1 => d,
        _ => return Vec::new(),
    };
    let lead = coeffs[deg];
    let monic: Vec<Complex64> = coeffs[..=deg]
        .iter()
        .map(|&c| Complex64::new(c / lead, 0.0))
        .collect();
    let eval = |z: Complex64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in monic.iter().rev() {
            acc = acc * z + c;
        }
        acc
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..deg).map(|i| seed.powu(i as u32 + 1)).collect();
    for _ in 0..256 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let delta = eval(roots[i]) / denom;
            roots[i] -= delta;
            moved = moved.max(delta.norm());
        }
        if moved < 1e-13 {
            break;
        }
    }
    roots
}

/// Fate of a point under iteration of one polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fate1 {
    /// Entered the attraction disc of the fixed point 0.
    Attracted0,
    /// Crossed the escape radius.
    Escaped,
    Undecided,
}

/// Standard trichotomy after at most `n_iter` applications of p.
pub fn fate1d(p: &Poly1, z: Complex64, n_iter: usize, r_esc: f64, r_att: f64) -> Fate1 {
    let mut z = z;
    for _ in 0..=n_iter {
        let n2 = z.norm_sqr();
        if n2 <= r_att * r_att {
            return Fate1::Attracted0;
        }
        if n2 > r_esc * r_esc {
            return Fate1::Escaped;
        }
        z = p.eval(z);
    }
    Fate1::Undecided
}

/// Iteration parameters shared by the raster routines.
#[derive(Clone, Copy, Debug)]
pub struct JuliaIter {
    pub n_iter: usize,
    pub r_esc: f64,
    pub r_att: f64,
}

impl JuliaIter {
    pub fn derive(p: &Poly1, n_iter: usize) -> Result<Self, JuliaError> {
        Ok(Self {
            n_iter,
            r_esc: 2.0f64.max(p.growth_radius(1.5, 0.0)),
            r_att: p.attraction_radius()?,
        })
    }
}

/// Julia-set raster: pixels that stay undecided or sit on a fate interface.
pub fn julia_grid(p: &Poly1, rect: Rect, res: usize, it: JuliaIter) -> GridSet {
    use rayon::prelude::*;
    let mut g = GridSet::empty(rect, res, res);
    let fates: Vec<Fate1> = (0..res * res)
        .into_par_iter()
        .map(|i| {
            let (ix, iy) = (i % res, i / res);
            let (x, y) = g.pixel_center(ix, iy);
            fate1d(p, Complex64::new(x, y), it.n_iter, it.r_esc, it.r_att)
        })
        .collect();
    let at = |ix: i64, iy: i64| -> Option<Fate1> {
        if ix < 0 || iy < 0 || ix >= res as i64 || iy >= res as i64 {
            None
        } else {
            Some(fates[iy as usize * res + ix as usize])
        }
    };
    for iy in 0..res {
        for ix in 0..res {
            let f = fates[iy * res + ix];
            let on = match f {
                Fate1::Undecided => true,
                _ => {
                    let mut saw_a = f == Fate1::Attracted0;
                    let mut saw_e = f == Fate1::Escaped;
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            match at(ix as i64 + dx, iy as i64 + dy) {
                                Some(Fate1::Attracted0) => saw_a = true,
                                Some(Fate1::Escaped) => saw_e = true,
                                _ => {}
                            }
                        }
                    }
                    saw_a && saw_e
                }
            };
            if on {
                g.set(ix, iy, true);
            }
        }
    }
    g
}

/// Conservative preimage raster: a pixel belongs to `p⁻¹(target)` when its
/// image sits within the local image-of-a-pixel radius of the target. The
/// fattening seals sub-pixel preimage rings so component floods cannot leak
/// through them.
pub fn preimage_grid(p: &Poly1, target: &GridSet) -> GridSet {
    preimage_grid_on(p, target, target.rect(), target.nx(), target.ny())
}

/// Preimage raster over an arbitrary output frame (the target stays in its
/// own frame; membership is looked up by world coordinates).
pub fn preimage_grid_on(
    p: &Poly1,
    target: &GridSet,
    rect: Rect,
    nx: usize,
    ny: usize,
) -> GridSet {
    let dt = target.distance_transform();
    let out_half_diag = 0.5 * ((rect.width / nx as f64).hypot(rect.height / ny as f64));
    let tol = 0.5 * target.pixel_diag();
    GridSet::from_indicator(rect, nx, ny, |x, y| {
        let z = Complex64::new(x, y);
        let w = p.eval(z);
        let lip = p.lipschitz_on_disc(z.norm() + out_half_diag);
        match target.pixel_of(w.re, w.im) {
            Some((ix, iy)) => dt[iy * target.nx() + ix] <= lip * out_half_diag + tol,
            None => false,
        }
    })
}

/// Fate of one critical orbit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CriticalFate {
    /// Settled on an attracting cycle passing through a small disc at 0;
    /// period 1 means the origin itself is the attractor.
    ZeroCycle { period: usize },
    Escaped { at: usize },
    Inconclusive,
}

/// Probe verdict: a necessary condition for "hyperbolic with a single
/// attracting cycle only at the origin".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeVerdict {
    Pass,
    /// Some witnessing cycle passes through 0 but is not the fixed point.
    PassWithNote,
    Inconclusive,
    Fail,
}

#[derive(Clone, Debug)]
pub struct HyperbolicityReport {
    pub criticals: Vec<(Complex64, CriticalFate)>,
    pub verdict: ProbeVerdict,
}

/// Iterate every critical point. PASS requires each orbit to resolve
/// (zero-cycle or escape) and at least one to witness the attracting cycle
/// through the origin; an orbit through 0 with period > 1 downgrades to
/// pass-with-note. Never claims to certify hyperbolicity.
pub fn hyperbolicity_probe(p: &Poly1, n_budget: usize, r_esc: f64) -> HyperbolicityReport {
    let near0 = 1e-3;
    let mut criticals = Vec::new();
    for c in p.critical_points() {
        let mut z = c;
        let mut visits: Vec<usize> = Vec::new();
        let mut fate = CriticalFate::Inconclusive;
        for n in 0..n_budget {
            if z.norm_sqr() > r_esc * r_esc {
                fate = CriticalFate::Escaped { at: n };
                break;
            }
            if z.norm() < near0 {
                visits.push(n);
                if visits.len() >= 4 {
                    let gaps: Vec<usize> = visits.windows(2).map(|w| w[1] - w[0]).collect();
                    if gaps.iter().all(|&g| g == gaps[0]) {
                        fate = CriticalFate::ZeroCycle { period: gaps[0] };
                        break;
                    }
                    visits.remove(0);
                }
            }
            z = p.eval(z);
        }
        criticals.push((c, fate));
    }
    let any_inconclusive = criticals
        .iter()
        .any(|(_, f)| matches!(f, CriticalFate::Inconclusive));
    let witness_period = criticals.iter().find_map(|(_, f)| match f {
        CriticalFate::ZeroCycle { period } => Some(*period),
        _ => None,
    });
    let verdict = if any_inconclusive {
        ProbeVerdict::Inconclusive
    } else {
        match witness_period {
            Some(1) => ProbeVerdict::Pass,
            Some(_) => ProbeVerdict::PassWithNote,
            None => ProbeVerdict::Fail,
        }
    };
    HyperbolicityReport { criticals, verdict }
}

/// One stage of the nested construction (n ≥ 1).
#[derive(Clone, Debug)]
pub struct NestedStage {
    pub n: usize,
    /// `C_n = p(C_{n−1})` dilated by `delta`.
    pub set: GridSet,
    /// Compact-side margin: largest pixel multiple with
    /// `dilate(p(C_{n−1}), 2δ) ⊆ C_{n−1}`.
    pub delta: f64,
    /// Unbounded-side margin within the rect (the analytic cap once the
    /// truncated escape set empties out).
    pub eta: f64,
    /// Perturbation budget `min(delta, eta, cap)`.
    pub c_prime: f64,
    pub diam: f64,
}

#[derive(Clone, Debug)]
pub struct NestedSequence {
    pub julia: GridSet,
    pub julia_delta0: GridSet,
    pub preimage: GridSet,
    /// Compact component of the preimage complement containing 0.
    pub c0: GridSet,
    /// Unbounded component of the preimage complement, truncated to rect.
    pub e0: GridSet,
    pub diam_c0: f64,
    pub stages: Vec<NestedStage>,
    /// Margin-collapse diagnostic when the list is shorter than requested.
    pub truncated: Option<String>,
    /// Radius beyond which `|p(z)+w| ≥ 1.5|z|` for `|w| ≤ perturb_cap`.
    pub growth_radius: f64,
    /// Set in `Asserted` mode: the escape-side margins are not
    /// grid-certified (sub-pixel satellite tube structure).
    pub escape_caveat: Option<String>,
    pub perturb_cap: f64,
    pub delta0: f64,
}

/// Default δ₀ convention: 5% of the Julia raster diameter.
pub fn default_delta0(julia: &GridSet) -> f64 {
    0.05 * julia.bbox_diameter()
}

/// How the unbounded-side margins are obtained.
///
/// Polynomials whose Julia set carries satellite components (far-field
/// roots) have δ₀-tubes at every preimage depth; the deep ones sit below
/// pixel scale at any feasible grid, so their escape margins cannot be
/// grid-certified. `Asserted` then fixes η_n at the perturbation cap and
/// records the caveat; the orbit dichotomy remains measured, not assumed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EscapeMode {
    GridCertified,
    Asserted,
}

/// Build the nested compact-set sequence and its perturbation margins.
pub fn nested_sequence(
    p: &Poly1,
    delta0: f64,
    n_max: usize,
    rect: Rect,
    res: usize,
    it: JuliaIter,
    escape_mode: EscapeMode,
) -> Result<NestedSequence, JuliaError> {
    if p.eval(Complex64::new(0.0, 0.0)).norm() != 0.0 {
        return Err(JuliaError::OriginNotFixed(
            p.eval(Complex64::new(0.0, 0.0)).norm(),
        ));
    }
    let perturb_cap = 1.0;
    let growth = p.growth_radius(1.5, perturb_cap);
    let escape_caveat = (escape_mode == EscapeMode::Asserted).then(|| {
        "escape-side margins fixed at the cap (grid certification skipped); \
         the dichotomy on the unbounded side is measured, not certified"
            .to_string()
    });
    if !rect.contains((growth, growth))
        || !rect.contains((-growth, -growth))
    {
        return Err(JuliaError::NotResolvable(format!(
            "rect must contain the growth disc of radius {growth:.3}"
        )));
    }

    let julia = julia_grid(p, rect, res, it);
    if julia.is_empty() {
        return Err(JuliaError::NotResolvable("empty Julia raster".into()));
    }
    let julia_delta0 = julia.dilate(delta0).grid;
    let preimage = preimage_grid(p, &julia_delta0);
    let complement = preimage.complement();
    let comps = complement.components();

    let origin_px = complement
        .pixel_of(0.0, 0.0)
        .ok_or_else(|| JuliaError::NotResolvable("origin outside rect".into()))?;
    let origin_label = comps.label_at(origin_px.0, origin_px.1);
    if origin_label < 0 {
        return Err(JuliaError::NotResolvable(
            "origin pixel lies inside the preimage neighborhood".into(),
        ));
    }
    if comps.touches_border[origin_label as usize] {
        return Err(JuliaError::NotResolvable(
            "component containing 0 touches the rect border".into(),
        ));
    }
    let c0 = complement.component_grid(&comps, origin_label);

    // Unbounded side: union of border-touching complement components.
    let mut e0 = GridSet::empty(rect, res, res);
    for label in 0..comps.count() as i32 {
        if comps.touches_border[label as usize] {
            e0 = e0.union(&complement.component_grid(&comps, label));
        }
    }

    // Escape-side forbidden set: the tube by the plain center test plus all
    // bounded complement components. The flood above used the fattened tube
    // (safe components); measuring margins against the fattened tube would
    // clash with the over-approximated images near strong-expansion spots,
    // so distances are taken to the center-test tube with an explicit
    // one-pixel honesty slack instead.
    let plain_tube = GridSet::from_indicator(rect, res, res, |x, y| {
        let w = p.eval(Complex64::new(x, y));
        julia_delta0
            .pixel_of(w.re, w.im)
            .is_some_and(|(ix, iy)| julia_delta0.get(ix, iy))
    });
    let forbidden = plain_tube.union(&complement.minus(&e0));

    let px = c0.pixel_width().min(c0.pixel_height());
    let half_diag = 0.5 * c0.pixel_diag();
    let map = |x: f64, y: f64| {
        let w = p.eval(Complex64::new(x, y));
        (w.re, w.im)
    };
    // Over-approximation pad from the local derivative bound: the image of
    // one pixel spreads at most lip·half_diag around the mapped center.
    let pad_at = |x: f64, y: f64| -> usize {
        let lip = p.lipschitz_on_disc(x.hypot(y) + half_diag);
        1 + (lip * half_diag / px).ceil() as usize
    };

    let mut stages = Vec::new();
    let mut truncated = None;
    let mut compact_prev = c0.clone();
    let mut escape_prev = restrict_to_disc(&e0, growth);
    let mut escape_live =
        escape_mode == EscapeMode::GridCertified && !escape_prev.is_empty();

    for n in 1..=n_max {
        // Compact side: image, then the largest 2δ-dilation inside prev.
        let img = compact_prev.forward_image_local(map, pad_at, |_, _| true);
        if img.out_of_rect > 0 {
            truncated = Some(format!(
                "stage {n}: compact-side image left the rect ({} centers)",
                img.out_of_rect
            ));
            break;
        }
        let delta = match largest_margin(&img.grid, &compact_prev, px) {
            Some(d) => d,
            None => {
                truncated = Some(format!("stage {n}: compact-side margin below pixel scale"));
                break;
            }
        };
        let c_n = img.grid.dilate(delta).grid;

        // Unbounded side truncated to the rect: pixels beyond the growth
        // radius are resolved analytically and drop out of the grid.
        let eta = if escape_live {
            // Image points beyond the growth radius are resolved
            // analytically and never stamped.
            let img_e =
                escape_prev.forward_image_local(map, pad_at, |u, v| u.hypot(v) <= growth);
            let live = restrict_to_disc(&img_e.grid, growth);
            if live.is_empty() {
                escape_live = false;
                perturb_cap
            } else {
                let slack = 2.0 * c0.pixel_diag();
                match margin_avoiding(&live, &forbidden, px, slack) {
                    Some(eta) => {
                        escape_prev =
                            restrict_to_disc(&live.dilate(eta).grid.minus(&forbidden), growth);
                        eta
                    }
                    None => {
                        truncated =
                            Some(format!("stage {n}: escape-side margin below pixel scale"));
                        break;
                    }
                }
            }
        } else {
            perturb_cap
        };

        let c_prime = delta.min(eta).min(perturb_cap);
        stages.push(NestedStage {
            n,
            diam: c_n.bbox_diameter(),
            set: c_n.clone(),
            delta,
            eta,
            c_prime,
        });
        compact_prev = c_n;
    }

    Ok(NestedSequence {
        diam_c0: c0.bbox_diameter(),
        julia,
        julia_delta0,
        preimage,
        c0,
        e0,
        stages,
        truncated,
        growth_radius: growth,
        escape_caveat,
        perturb_cap,
        delta0,
    })
}

fn restrict_to_disc(g: &GridSet, radius: f64) -> GridSet {
    let mut out = g.clone();
    for iy in 0..g.ny() {
        for ix in 0..g.nx() {
            if out.get(ix, iy) {
                let (x, y) = g.pixel_center(ix, iy);
                if x.hypot(y) > radius {
                    out.set(ix, iy, false);
                }
            }
        }
    }
    out
}

/// Largest pixel-multiple `d` with `dilate(img, 2d) ⊆ container`, via the
/// distance transform of `img` minimized over the container's complement.
fn largest_margin(img: &GridSet, container: &GridSet, px: f64) -> Option<f64> {
    if img.is_empty() {
        return None;
    }
    let dt = img.distance_transform();
    let mut min_outside = f64::INFINITY;
    for iy in 0..container.ny() {
        for ix in 0..container.nx() {
            if !container.get(ix, iy) {
                min_outside = min_outside.min(dt[iy * container.nx() + ix]);
            }
        }
    }
    // dilate(img, 2d) ⊆ container ⟺ every outside pixel is farther than 2d.
    let j = ((min_outside / px) / 2.0 - 1e-9).floor() as i64;
    if j < 1 {
        return None;
    }
    let d = j as f64 * px;
    debug_assert!(img.dilate(2.0 * d).grid.is_subset_of(container));
    Some(d)
}

/// Largest pixel-multiple `d` with `dilate(img, 2d + slack)` avoiding the
/// forbidden set; the slack absorbs the rasterization honesty gap of a
/// center-test forbidden raster.
fn margin_avoiding(img: &GridSet, forbidden: &GridSet, px: f64, slack: f64) -> Option<f64> {
    if img.is_empty() {
        return None;
    }
    let dt = img.distance_transform();
    let mut min_d = f64::INFINITY;
    for iy in 0..forbidden.ny() {
        for ix in 0..forbidden.nx() {
            if forbidden.get(ix, iy) {
                min_d = min_d.min(dt[iy * forbidden.nx() + ix]);
            }
        }
    }
    let j = (((min_d - slack) / px) / 2.0 - 1e-9).floor() as i64;
    if j < 1 {
        return None;
    }
    Some(j as f64 * px)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_setup(res: usize) -> (Poly1, Rect, JuliaIter) {
        let p = Poly1::square();
        let rect = Rect::centered_square((0.0, 0.0), 4.4);
        let it = JuliaIter::derive(&p, 256).unwrap();
        let _ = res;
        (p, rect, it)
    }

    #[test]
    fn fate_basics_for_square() {
        let p = Poly1::square();
        let it = JuliaIter::derive(&p, 256).unwrap();
        assert_eq!(
            fate1d(&p, Complex64::new(0.5, 0.0), it.n_iter, it.r_esc, it.r_att),
            Fate1::Attracted0
        );
        assert_eq!(
            fate1d(&p, Complex64::new(2.0, 0.0), it.n_iter, it.r_esc, it.r_att),
            Fate1::Escaped
        );
    }

    #[test]
    fn quartic_fate_matches_long_run_reference() {
        let p = Poly1::quartic(0.01, 0.01).unwrap();
        let it = JuliaIter::derive(&p, 512).unwrap();
        let z = Complex64::new(0.95, 0.0);
        let short = fate1d(&p, z, it.n_iter, it.r_esc, it.r_att);
        let long = fate1d(&p, z, 1_000_000, it.r_esc, it.r_att);
        assert_eq!(short, long);
        assert_eq!(short, Fate1::Attracted0);
    }

    #[test]
    fn julia_raster_of_square_is_thin_unit_circle() {
        let (p, rect, it) = square_setup(0);
        let res = 440;
        let j = julia_grid(&p, rect, res, it);
        assert!(!j.is_empty());
        let tol = 2.0 * j.pixel_diag();
        for (x, y) in j.set_pixel_centers() {
            let r = x.hypot(y);
            assert!((r - 1.0).abs() <= tol, "julia pixel at radius {r}");
        }
        // Hausdorff distance to the analytic circle stays within 2 pixels.
        let circle = GridSet::from_indicator(rect, res, res, |x, y| {
            (x.hypot(y) - 1.0).abs() <= 0.5 * j.pixel_width()
        });
        let d = j
            .directed_distance_to(&circle)
            .max(circle.directed_distance_to(&j));
        assert!(d <= tol, "d_H to circle = {d}");
    }

    #[test]
    fn julia_raster_far_rect_is_empty() {
        let p = Poly1::square();
        let it = JuliaIter::derive(&p, 128).unwrap();
        let rect = Rect::centered_square((30.0, 0.0), 2.0);
        let j = julia_grid(&p, rect, 64, it);
        assert!(j.is_empty());
    }

    #[test]
    fn perturbed_quadratic_julia_is_one_loop() {
        // z² − 0.1: a quasicircle; the raster should be a single
        // 8-connected curve (4-connected components of its complement: 2).
        let p = Poly1::new(vec![-0.1, 0.0, 1.0]).unwrap();
        let it = JuliaIter::derive(&p, 512).unwrap();
        let rect = Rect::centered_square((0.0, 0.0), 4.4);
        let j = julia_grid(&p, rect, 500, it);
        let comp = j.complement().components();
        assert_eq!(comp.count(), 2, "inside and outside only");
        let inside: Vec<i32> = comp.interior_labels();
        assert_eq!(inside.len(), 1);
    }

    #[test]
    fn critical_points_of_known_polynomials() {
        let p = Poly1::square();
        let crits = p.critical_points();
        assert_eq!(crits.len(), 1);
        assert!(crits[0].norm() < 1e-10);

        let q = Poly1::quartic(0.01, 0.01).unwrap();
        let crits = q.critical_points();
        assert_eq!(crits.len(), 3);
        let near0 = crits.iter().filter(|c| c.norm() < 1e-8).count();
        assert_eq!(near0, 1);
        for c in crits.iter().filter(|c| c.norm() > 1e-8) {
            // p'(c) = 0 away from 0: c solves 0.04z² + 0.03z + 2 = 0.
            let v = 0.04 * c * c + 0.03 * c + 2.0;
            assert!(v.norm() < 1e-8, "residual {v}");
        }
    }

    #[test]
    fn probe_passes_square() {
        let p = Poly1::square();
        let rep = hyperbolicity_probe(&p, 4096, 4.0);
        assert_eq!(rep.verdict, ProbeVerdict::Pass);
    }

    #[test]
    fn probe_flags_basilica_cycle() {
        // z² − 1: the critical orbit lands on the superattracting 2-cycle
        // through 0, so the probe passes with a note.
        let p = Poly1::new(vec![-1.0, 0.0, 1.0]).unwrap();
        let rep = hyperbolicity_probe(&p, 4096, 4.0);
        assert_eq!(rep.verdict, ProbeVerdict::PassWithNote);
        assert!(matches!(
            rep.criticals[0].1,
            CriticalFate::ZeroCycle { period: 2 }
        ));
    }

    #[test]
    fn probe_fails_when_no_cycle_is_witnessed() {
        // z² + 0.26: the critical orbit escapes past the parabolic
        // bottleneck, so no attracting cycle at the origin is witnessed.
        let p = Poly1::new(vec![0.26, 0.0, 1.0]).unwrap();
        let rep = hyperbolicity_probe(&p, 4096, 4.0);
        assert_eq!(rep.verdict, ProbeVerdict::Fail);
        assert!(matches!(rep.criticals[0].1, CriticalFate::Escaped { .. }));
    }

    #[test]
    fn nested_sequence_square_contracts() {
        let (p, rect, it) = square_setup(0);
        let seq = nested_sequence(&p, 0.2, 12, rect, 440, it, EscapeMode::GridCertified).unwrap();
        // C₀ is the disc-like region inside the preimage annulus ~0.894;
        // the diameter proxy is the bbox diagonal, √2·(2r) for a disc.
        assert!(seq.diam_c0 > 2.2 && seq.diam_c0 < 2.6, "diam {}", seq.diam_c0);
        assert!(!seq.stages.is_empty());
        for s in &seq.stages {
            assert!(s.delta > 0.0);
            assert!(s.eta > 0.0);
            assert!(s.c_prime > 0.0);
        }
        // Nesting: dilate(p(C_{n−1}), 2δ_n) ⊆ C_{n−1} holds by construction;
        // check the visible consequence, non-increasing diameters.
        let mut prev = seq.diam_c0;
        for s in &seq.stages {
            assert!(
                s.diam <= prev + 2.0 * seq.c0.pixel_diag(),
                "stage {} grew: {} > {}",
                s.n,
                s.diam,
                prev
            );
            prev = s.diam;
        }
        // Margins certify the defining containment on the grid itself.
        let s1 = &seq.stages[0];
        let img = seq.c0.forward_image(
            |x, y| {
                let w = p.eval(Complex64::new(x, y));
                (w.re, w.im)
            },
            2,
        );
        assert!(img.grid.dilate(2.0 * s1.delta).grid.is_subset_of(&seq.c0));
    }

    #[test]
    fn nested_sequence_dichotomy_under_perturbation() {
        use rand::Rng;
        use rand::SeedableRng;

        let (p, rect, it) = square_setup(0);
        let seq = nested_sequence(&p, 0.2, 10, rect, 440, it, EscapeMode::GridCertified).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);

        let compact_starts = seq.c0.set_pixel_centers();
        let escape_starts: Vec<(f64, f64)> = seq
            .e0
            .set_pixel_centers()
            .into_iter()
            .filter(|&(x, y)| x.hypot(y) < 2.0)
            .collect();
        assert!(!compact_starts.is_empty() && !escape_starts.is_empty());

        let escaped_for_good = it.r_esc.max(seq.growth_radius);
        let run = |z0: Complex64, rng: &mut rand_chacha::ChaCha8Rng| -> Fate1 {
            let mut z = z0;
            for stage in &seq.stages {
                // Past the growth radius the cap cannot stop the escape;
                // stop before f64 overflows into NaN.
                if z.norm() > escaped_for_good {
                    return Fate1::Escaped;
                }
                let r = stage.c_prime * rng.random::<f64>().sqrt() * 0.999;
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                z = p.eval(z) + Complex64::from_polar(r, theta);
            }
            // Margins exhausted: finish unperturbed.
            fate1d(&p, z, 2000, escaped_for_good, it.r_att)
        };

        for i in 0..30 {
            let (x, y) = compact_starts[(i * 97) % compact_starts.len()];
            let fate = run(Complex64::new(x, y), &mut rng);
            assert_eq!(fate, Fate1::Attracted0, "compact start ({x},{y})");
        }
        for i in 0..30 {
            let (x, y) = escape_starts[(i * 131) % escape_starts.len()];
            let fate = run(Complex64::new(x, y), &mut rng);
            assert_eq!(fate, Fate1::Escaped, "escape start ({x},{y})");
        }
    }

    #[test]
    fn nested_sequence_reports_sub_pixel_collapse() {
        // The quartic's satellite Julia components make the certified
        // escape-side margin collapse below pixel scale; the construction
        // must say so rather than return margins.
        let p = Poly1::quartic(0.01, 0.01).unwrap();
        let it = JuliaIter::derive(&p, 200).unwrap();
        let rect = Rect::centered_square((0.0, 0.0), 23.0);
        let ns = nested_sequence(&p, 0.3, 6, rect, 1000, it, EscapeMode::GridCertified).unwrap();
        assert!(ns.stages.is_empty());
        assert!(ns.truncated.as_deref().is_some_and(|t| t.contains("escape-side")));

        // Asserted mode records the caveat and keeps the compact margins.
        let ns = nested_sequence(&p, 0.3, 6, rect, 1000, it, EscapeMode::Asserted).unwrap();
        assert!(!ns.stages.is_empty());
        assert!(ns.escape_caveat.is_some());
        assert!(ns.stages.iter().all(|s| s.delta > 0.0));
    }

    #[test]
    fn nested_sequence_rejects_unresolvable_setups() {
        let p = Poly1::square();
        let it = JuliaIter::derive(&p, 128).unwrap();
        // Rect too small to contain the growth disc.
        let rect = Rect::centered_square((0.0, 0.0), 1.0);
        assert!(matches!(
            nested_sequence(&p, 0.1, 4, rect, 64, it, EscapeMode::GridCertified),
            Err(JuliaError::NotResolvable(_))
        ));

        // Origin not fixed.
        let q = Poly1::new(vec![0.3, 0.0, 1.0]).unwrap();
        let rect = Rect::centered_square((0.0, 0.0), 6.0);
        assert!(matches!(
            nested_sequence(&q, 0.1, 4, rect, 64, it, EscapeMode::GridCertified),
            Err(JuliaError::OriginNotFixed(_))
        ));
    }

    #[test]
    fn degree_validation() {
        assert!(Poly1::new(vec![0.0, 1.0]).is_err());
        assert!(Poly1::new(vec![0.0, 0.0, 0.0]).is_err());
        assert!(Poly1::new(vec![0.0, 0.0, 1.0, 0.0]).unwrap().degree() == 2);
    }
}
