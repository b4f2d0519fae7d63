//! Box-counting measurements: occupied-cell counts, h-contents, upper-box
//! dimension estimates from log-log regression, and Hausdorff distances.
//!
//! Counts use the axis-aligned eps-grid occupancy surrogate for the
//! inf-over-ball-covers quantity: the two differ by bounded factors, which
//! leaves log-log slopes unchanged.

use std::collections::HashSet;

use thiserror::Error;

use crate::grid::GridSet;

#[derive(Debug, Error)]
pub enum DimensionError {
    #[error("empty set has no Hausdorff distance")]
    EmptySet,
    #[error("regression needs at least {need} eps values spanning {span_decades} decades")]
    BadEpsSchedule { need: usize, span_decades: f64 },
}

/// Number of occupied cells of the axis-aligned eps-grid hit by the points.
pub fn box_count_points(points: &[(f64, f64)], eps: f64) -> usize {
    assert!(eps > 0.0, "eps must be positive");
    let mut cells: HashSet<(i64, i64)> = HashSet::with_capacity(points.len());
    for &(x, y) in points {
        cells.insert(((x / eps).floor() as i64, (y / eps).floor() as i64));
    }
    cells.len()
}

/// Grid version, counting cells hit by set pixel centers. `eps` below the
/// pixel scale saturates at the pixel count; keep `eps ≥ pixel size`.
pub fn box_count_grid(g: &GridSet, eps: f64) -> usize {
    box_count_points(&g.set_pixel_centers(), eps)
}

/// Cover statistics at one scale: `gamma = eps^h · N(eps)`.
#[derive(Clone, Copy, Debug)]
pub struct CoverStats {
    pub eps: f64,
    pub count: usize,
    pub h: f64,
    pub gamma: f64,
}

pub fn gamma_content_points(points: &[(f64, f64)], h: f64, eps: f64) -> CoverStats {
    let count = box_count_points(points, eps);
    CoverStats {
        eps,
        count,
        h,
        gamma: eps.powf(h) * count as f64,
    }
}

pub fn gamma_content_grid(g: &GridSet, h: f64, eps: f64) -> CoverStats {
    let count = box_count_grid(g, eps);
    CoverStats {
        eps,
        count,
        h,
        gamma: eps.powf(h) * count as f64,
    }
}

/// Count table over an eps schedule (sorted descending).
pub fn count_table_points(points: &[(f64, f64)], eps_list: &[f64]) -> Vec<(f64, usize)> {
    eps_list
        .iter()
        .map(|&e| (e, box_count_points(points, e)))
        .collect()
}

pub fn count_table_grid(g: &GridSet, eps_list: &[f64]) -> Vec<(f64, usize)> {
    eps_list
        .iter()
        .map(|&e| (e, box_count_grid(g, e)))
        .collect()
}

/// Geometrically spaced eps schedule from `hi` down to `lo`.
pub fn log_spaced(hi: f64, lo: f64, m: usize) -> Vec<f64> {
    assert!(hi > lo && lo > 0.0 && m >= 2);
    let ratio = (lo / hi).powf(1.0 / (m as f64 - 1.0));
    (0..m).map(|i| hi * ratio.powi(i as i32)).collect()
}

/// Upper-box-dimension estimate from a least-squares fit of
/// `log N(eps)` against `log(1/eps)`.
#[derive(Clone, Debug)]
pub struct DimEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// The eps window actually used by the fit (hi, lo).
    pub eps_range: (f64, f64),
    /// Set when the regression is degenerate (constant counts, too few
    /// boxes) and the slope should be read with care.
    pub flagged: Option<String>,
}

/// Fit over the best sliding window: all contiguous windows of at least 4
/// points spanning at least one decade compete on r²; the full range is the
/// fallback. Avoids the saturation plateau at pixel scale.
pub fn boxdim_from_counts(table: &[(f64, usize)]) -> Result<DimEstimate, DimensionError> {
    let span = |tab: &[(f64, usize)]| -> f64 {
        (tab[0].0 / tab[tab.len() - 1].0).log10().abs()
    };
    if table.len() < 4 || span(table) < 1.5 {
        return Err(DimensionError::BadEpsSchedule {
            need: 4,
            span_decades: 1.5,
        });
    }
    if table.iter().any(|&(_, n)| n == 0) {
        return Ok(DimEstimate {
            slope: 0.0,
            intercept: 0.0,
            r2: 1.0,
            eps_range: (table[0].0, table[table.len() - 1].0),
            flagged: Some("empty set at some scale".into()),
        });
    }

    let fit = |tab: &[(f64, usize)]| -> (f64, f64, f64) {
        let xs: Vec<f64> = tab.iter().map(|&(e, _)| (1.0 / e).ln()).collect();
        let ys: Vec<f64> = tab.iter().map(|&(_, n)| (n as f64).ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
        (slope, intercept, r2.clamp(0.0, 1.0))
    };

    let mut best: Option<(f64, usize, usize, (f64, f64, f64))> = None;
    for start in 0..table.len() {
        for end in start + 4..=table.len() {
            let window = &table[start..end];
            if span(window) < 1.0 {
                continue;
            }
            let f = fit(window);
            let better = match &best {
                None => true,
                Some((r2, _, _, _)) => f.2 > *r2 + 1e-12,
            };
            if better {
                best = Some((f.2, start, end, f));
            }
        }
    }
    let (start, end, (slope, intercept, r2)) = match best {
        Some((_, s, e, f)) => (s, e, f),
        None => (0, table.len(), fit(table)),
    };
    let window = &table[start..end];
    let all_equal = window.windows(2).all(|w| w[0].1 == w[1].1);
    Ok(DimEstimate {
        slope,
        intercept,
        r2,
        eps_range: (window[0].0, window[window.len() - 1].0),
        flagged: all_equal.then(|| "constant counts across the window".into()),
    })
}

pub fn boxdim_points(
    points: &[(f64, f64)],
    eps_list: &[f64],
) -> Result<DimEstimate, DimensionError> {
    boxdim_from_counts(&count_table_points(points, eps_list))
}

pub fn boxdim_grid(g: &GridSet, eps_list: &[f64]) -> Result<DimEstimate, DimensionError> {
    boxdim_from_counts(&count_table_grid(g, eps_list))
}

/// Directed Hausdorff distance `sup_{a∈A} inf_{b∈B} |a−b|` between finite
/// point sets (exact max-min).
pub fn directed_distance_points(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64, DimensionError> {
    if a.is_empty() || b.is_empty() {
        return Err(DimensionError::EmptySet);
    }
    let mut worst = 0f64;
    for &(ax, ay) in a {
        let mut best = f64::INFINITY;
        for &(bx, by) in b {
            let d2 = (ax - bx) * (ax - bx) + (ay - by) * (ay - by);
            if d2 < best {
                best = d2;
            }
        }
        worst = worst.max(best);
    }
    Ok(worst.sqrt())
}

/// Hausdorff distance between finite point sets.
pub fn hausdorff_points(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64, DimensionError> {
    Ok(directed_distance_points(a, b)?.max(directed_distance_points(b, a)?))
}

/// Hausdorff distance between grids over the same frame
/// (distance-transform accelerated).
pub fn hausdorff_grids(a: &GridSet, b: &GridSet) -> Result<f64, DimensionError> {
    if a.is_empty() || b.is_empty() {
        return Err(DimensionError::EmptySet);
    }
    Ok(a.directed_distance_to(b).max(b.directed_distance_to(a)))
}
