//! Boolean rasters over rectangles in ℂ ≅ ℝ².
//!
//! [`GridSet`] carries Julia-set approximations, δ-neighborhoods, nested
//! compact sets and boundary rasters. Dilation is morphological (exact
//! Euclidean distance transform, thresholded), so the containment checks in
//! the nested-set construction are grid-exact.

/// Axis-aligned rectangle given by center and extents, in world units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(cx: f64, cy: f64, width: f64, height: f64) -> Self {
        assert!(width > 0.0 && height > 0.0, "degenerate rect");
        Self {
            cx,
            cy,
            width,
            height,
        }
    }

    pub fn centered_square(c: (f64, f64), side: f64) -> Self {
        Self::new(c.0, c.1, side, side)
    }

    pub fn x_min(&self) -> f64 {
        self.cx - 0.5 * self.width
    }

    pub fn y_min(&self) -> f64 {
        self.cy - 0.5 * self.height
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        p.0 >= self.x_min()
            && p.0 <= self.x_min() + self.width
            && p.1 >= self.y_min()
            && p.1 <= self.y_min() + self.height
    }
}

/// Boolean raster; row iy = 0 sits at the bottom (minimum y).
#[derive(Clone, Debug, PartialEq)]
pub struct GridSet {
    rect: Rect,
    nx: usize,
    ny: usize,
    bits: Vec<bool>,
}

/// Distances at or above this are treated as "no set pixel anywhere".
const FAR: f64 = 1e100;

impl GridSet {
    pub fn empty(rect: Rect, nx: usize, ny: usize) -> Self {
        assert!(nx > 0 && ny > 0, "empty resolution");
        Self {
            rect,
            nx,
            ny,
            bits: vec![false; nx * ny],
        }
    }

    /// Rasterize an indicator function sampled at pixel centers.
    pub fn from_indicator(rect: Rect, nx: usize, ny: usize, f: impl Fn(f64, f64) -> bool) -> Self {
        let mut g = Self::empty(rect, nx, ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let (x, y) = g.pixel_center(ix, iy);
                if f(x, y) {
                    g.bits[iy * nx + ix] = true;
                }
            }
        }
        g
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn pixel_width(&self) -> f64 {
        self.rect.width / self.nx as f64
    }

    pub fn pixel_height(&self) -> f64 {
        self.rect.height / self.ny as f64
    }

    /// Diagonal of one pixel, the raster resolution scale.
    pub fn pixel_diag(&self) -> f64 {
        self.pixel_width().hypot(self.pixel_height())
    }

    pub fn pixel_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.rect.x_min() + (ix as f64 + 0.5) * self.pixel_width(),
            self.rect.y_min() + (iy as f64 + 0.5) * self.pixel_height(),
        )
    }

    /// Pixel containing a world point, if inside the rect.
    pub fn pixel_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = (x - self.rect.x_min()) / self.pixel_width();
        let fy = (y - self.rect.y_min()) / self.pixel_height();
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        if ix >= self.nx || iy >= self.ny {
            return None;
        }
        Some((ix, iy))
    }

    pub fn get(&self, ix: usize, iy: usize) -> bool {
        self.bits[iy * self.nx + ix]
    }

    pub fn set(&mut self, ix: usize, iy: usize, value: bool) {
        self.bits[iy * self.nx + ix] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Centers of all set pixels.
    pub fn set_pixel_centers(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.count());
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                if self.get(ix, iy) {
                    out.push(self.pixel_center(ix, iy));
                }
            }
        }
        out
    }

    fn assert_same_frame(&self, other: &Self) {
        assert!(
            self.rect == other.rect && self.nx == other.nx && self.ny == other.ny,
            "set operation between grids with different rect/resolution"
        );
    }

    pub fn union(&self, other: &Self) -> Self {
        self.assert_same_frame(other);
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a || b)
            .collect();
        Self { bits, ..*self }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        self.assert_same_frame(other);
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a && b)
            .collect();
        Self { bits, ..*self }
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.assert_same_frame(other);
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a && !b)
            .collect();
        Self { bits, ..*self }
    }

    pub fn complement(&self) -> Self {
        let bits = self.bits.iter().map(|&a| !a).collect();
        Self { bits, ..*self }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.assert_same_frame(other);
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Exact Euclidean distance (world units) from every pixel center to the
    /// nearest set pixel center. `FAR`-scale entries mean the set is empty.
    pub fn distance_transform(&self) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut d = vec![0f64; nx * ny];
        for i in 0..nx * ny {
            d[i] = if self.bits[i] { 0.0 } else { FAR };
        }
        let sx2 = self.pixel_width() * self.pixel_width();
        let sy2 = self.pixel_height() * self.pixel_height();

        // Columns first, then rows (separable squared-distance transform).
        let mut col_in = vec![0f64; ny];
        let mut col_out = vec![0f64; ny];
        for ix in 0..nx {
            for iy in 0..ny {
                col_in[iy] = d[iy * nx + ix];
            }
            dt_1d(&col_in, &mut col_out, sy2);
            for iy in 0..ny {
                d[iy * nx + ix] = col_out[iy];
            }
        }
        let mut row_in = vec![0f64; nx];
        let mut row_out = vec![0f64; nx];
        for iy in 0..ny {
            row_in.copy_from_slice(&d[iy * nx..(iy + 1) * nx]);
            dt_1d(&row_in, &mut row_out, sx2);
            for ix in 0..nx {
                d[iy * nx + ix] = row_out[ix].sqrt();
            }
        }
        d
    }

    /// Largest finite distance from a set pixel of `self` to the set `other`
    /// (the directed Hausdorff distance between the represented point sets).
    pub fn directed_distance_to(&self, other: &Self) -> f64 {
        self.assert_same_frame(other);
        assert!(!self.is_empty() && !other.is_empty(), "empty grid set");
        let dt = other.distance_transform();
        let mut worst = 0f64;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                if self.get(ix, iy) {
                    worst = worst.max(dt[iy * self.nx + ix]);
                }
            }
        }
        worst
    }

    /// Morphological dilation by a closed disc of radius `delta` (world
    /// units). A radius below half a pixel cannot move any pixel boundary;
    /// the grid is returned unchanged with the warning flag set.
    pub fn dilate(&self, delta: f64) -> Dilated {
        assert!(delta >= 0.0, "negative dilation radius");
        let half_px = 0.5 * self.pixel_width().min(self.pixel_height());
        if delta < half_px {
            return Dilated {
                grid: self.clone(),
                subpixel: delta != 0.0,
            };
        }
        let dt = self.distance_transform();
        let bits = dt.iter().map(|&d| d <= delta).collect();
        Dilated {
            grid: Self { bits, ..*self },
            subpixel: false,
        }
    }

    /// Forward image of the set under a plane map, rasterized from pixel
    /// centers and padded by `pad_px` pixels (Chebyshev) to over-approximate.
    /// Returns the raster and the count of centers that left the rect.
    pub fn forward_image(&self, map: impl Fn(f64, f64) -> (f64, f64), pad_px: usize) -> Image {
        self.forward_image_local(map, |_, _| pad_px, |_, _| true)
    }

    /// Forward image with a per-source-pixel pad (local derivative bounds)
    /// and a keep filter: image points failing `keep` count as resolved
    /// instead of being stamped.
    pub fn forward_image_local(
        &self,
        map: impl Fn(f64, f64) -> (f64, f64),
        pad_at: impl Fn(f64, f64) -> usize,
        keep: impl Fn(f64, f64) -> bool,
    ) -> Image {
        let mut img = GridSet::empty(self.rect, self.nx, self.ny);
        let mut resolved = 0usize;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                if !self.get(ix, iy) {
                    continue;
                }
                let (x, y) = self.pixel_center(ix, iy);
                let (u, v) = map(x, y);
                if !keep(u, v) {
                    resolved += 1;
                    continue;
                }
                match img.pixel_of(u, v) {
                    Some((jx, jy)) => {
                        let pad_px = pad_at(x, y);
                        let x0 = jx.saturating_sub(pad_px);
                        let y0 = jy.saturating_sub(pad_px);
                        let x1 = (jx + pad_px).min(self.nx - 1);
                        let y1 = (jy + pad_px).min(self.ny - 1);
                        for py in y0..=y1 {
                            for px in x0..=x1 {
                                img.set(px, py, true);
                            }
                        }
                    }
                    None => resolved += 1,
                }
            }
        }
        Image {
            grid: img,
            out_of_rect: resolved,
        }
    }

    /// 4-connected components of the set pixels.
    pub fn components(&self) -> Components {
        let (nx, ny) = (self.nx, self.ny);
        let mut labels = vec![-1i32; nx * ny];
        let mut touches_border = Vec::new();
        let mut sizes = Vec::new();
        let mut next = 0i32;
        let mut queue = Vec::new();
        for start in 0..nx * ny {
            if !self.bits[start] || labels[start] >= 0 {
                continue;
            }
            let label = next;
            next += 1;
            let mut touches = false;
            let mut size = 0usize;
            labels[start] = label;
            queue.push(start);
            while let Some(i) = queue.pop() {
                size += 1;
                let (ix, iy) = (i % nx, i / nx);
                if ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1 {
                    touches = true;
                }
                let mut push = |j: usize| {
                    if self.bits[j] && labels[j] < 0 {
                        labels[j] = label;
                        queue.push(j);
                    }
                };
                if ix > 0 {
                    push(i - 1);
                }
                if ix + 1 < nx {
                    push(i + 1);
                }
                if iy > 0 {
                    push(i - nx);
                }
                if iy + 1 < ny {
                    push(i + nx);
                }
            }
            touches_border.push(touches);
            sizes.push(size);
        }
        Components {
            labels,
            touches_border,
            sizes,
            nx,
        }
    }

    /// Extract one labeled component as its own grid.
    pub fn component_grid(&self, comps: &Components, label: i32) -> GridSet {
        let bits = comps.labels.iter().map(|&l| l == label).collect();
        Self { bits, ..*self }
    }

    /// Diameter of the set: largest pairwise distance between set pixel
    /// centers (monotone proxy via bounding box, exact enough for the
    /// shrinking-diameter diagnostics).
    pub fn bbox_diameter(&self) -> f64 {
        let mut min_x = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for (x, y) in self.set_pixel_centers() {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
        if min_x > max_x {
            0.0
        } else {
            (max_x - min_x).hypot(max_y - min_y)
        }
    }
}

/// Dilation result; `subpixel` flags a radius below half a pixel.
#[derive(Clone, Debug)]
pub struct Dilated {
    pub grid: GridSet,
    pub subpixel: bool,
}

/// Forward-image raster plus the number of source centers that mapped
/// outside the rect.
#[derive(Clone, Debug)]
pub struct Image {
    pub grid: GridSet,
    pub out_of_rect: usize,
}

/// Component labeling of a grid (label -1 = background).
#[derive(Clone, Debug)]
pub struct Components {
    pub labels: Vec<i32>,
    pub touches_border: Vec<bool>,
    pub sizes: Vec<usize>,
    nx: usize,
}

impl Components {
    pub fn count(&self) -> usize {
        self.touches_border.len()
    }

    pub fn label_at(&self, ix: usize, iy: usize) -> i32 {
        self.labels[iy * self.nx + ix]
    }

    /// Labels of components that do not touch the rect border ("compact" at
    /// this truncation).
    pub fn interior_labels(&self) -> Vec<i32> {
        (0..self.count() as i32)
            .filter(|&l| !self.touches_border[l as usize])
            .collect()
    }
}

/// 1-D squared distance transform (lower envelope of parabolas) with
/// square spacing `s2`.
fn dt_1d(f: &[f64], out: &mut [f64], s2: f64) {
    let n = f.len();
    debug_assert_eq!(out.len(), n);
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let qp = q as f64;
            let pp = p as f64;
            let s = ((f[q] + s2 * qp * qp) - (f[p] + s2 * pp * pp)) / (2.0 * s2 * (qp - pp));
            if s <= z[k] {
                debug_assert!(k > 0);
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k] as f64;
        let dq = q as f64 - p;
        out[q] = s2 * dq * dq + f[v[k]];
    }
}
