//! Dense flow fields, bilinear warping and a coarse-to-fine block matcher.
//!
//! Convention: a flow from frame `a` to frame `b` satisfies
//! `a(x) ≈ b(x + flow(x))`, so `warp(b, flow)` aligns `b` onto `a`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::video_io::Frame;

/// Per-pixel displacement with a validity mask, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    valid: Vec<bool>,
}

impl FlowField {
    pub fn new(
        width: usize,
        height: usize,
        u: Vec<f64>,
        v: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let n = width * height;
        if width == 0 || height == 0 || u.len() != n || v.len() != n || valid.len() != n {
            return Err(Error::DimMismatch(format!(
                "flow planes do not match {width}x{height}"
            )));
        }
        if u.iter()
            .zip(&v)
            .zip(&valid)
            .any(|((a, b), &ok)| ok && !(a.is_finite() && b.is_finite()))
        {
            return Err(Error::InvalidFrame(
                "non-finite displacement under a valid mask".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            u,
            v,
            valid,
        })
    }

    /// Spatially constant displacement, valid everywhere.
    pub fn constant(width: usize, height: usize, u: f64, v: f64) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            u: vec![u; n],
            v: vec![v; n],
            valid: vec![true; n],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn with_valid(mut self, valid: Vec<bool>) -> Result<Self> {
        if valid.len() != self.valid.len() {
            return Err(Error::DimMismatch("mask size".into()));
        }
        self.valid = valid;
        Ok(self)
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> Option<(f64, f64)> {
        let i = y * self.width + x;
        self.valid[i].then(|| (self.u[i], self.v[i]))
    }

    /// Mean endpoint error against a constant displacement over the pixels
    /// accepted by `keep` that are also valid. `None` when nothing qualifies.
    pub fn mean_endpoint_error(
        &self,
        u: f64,
        v: f64,
        keep: impl Fn(usize, usize) -> bool,
    ) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in 0..self.height {
            for x in 0..self.width {
                if let Some((fu, fv)) = self.at(y, x) {
                    if keep(y, x) {
                        sum += ((fu - u).powi(2) + (fv - v).powi(2)).sqrt();
                        n += 1;
                    }
                }
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}

/// Bilinear sample of a row-major plane at `(x, y)`; `None` outside
/// `[0, w-1] x [0, h-1]`.
#[inline]
pub fn sample_bilinear(plane: &[f64], width: usize, height: usize, x: f64, y: f64) -> Option<f64> {
    if !(x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64) {
        return None;
    }
    let (x0, fx) = split_coord(x, width);
    let (y0, fy) = split_coord(y, height);
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let p = |yy: usize, xx: usize| plane[yy * width + xx];
    let top = if fx == 0.0 {
        p(y0, x0)
    } else {
        p(y0, x0) + fx * (p(y0, x1) - p(y0, x0))
    };
    if fy == 0.0 {
        return Some(top);
    }
    let bottom = if fx == 0.0 {
        p(y1, x0)
    } else {
        p(y1, x0) + fx * (p(y1, x1) - p(y1, x0))
    };
    Some(top + fy * (bottom - top))
}

#[inline]
fn split_coord(c: f64, len: usize) -> (usize, f64) {
    let base = c.floor();
    let i = base as usize;
    if i >= len - 1 {
        (len - 1, 0.0)
    } else {
        (i, c - base)
    }
}

/// Samples `frame` at `x + flow(x)` with bilinear interpolation.
///
/// The returned mask is false where the flow is invalid or the sample
/// position leaves the image; masked samples are set to zero.
pub fn warp(frame: &Frame, flow: &FlowField) -> Result<(Frame, Vec<bool>)> {
    let (w, h) = (frame.width(), frame.height());
    if flow.width() != w || flow.height() != h {
        return Err(Error::DimMismatch(format!(
            "frame {w}x{h} vs flow {}x{}",
            flow.width(),
            flow.height()
        )));
    }
    let n = w * h;
    let mut mask = vec![false; n];
    let mut coords = vec![(0.0, 0.0); n];
    for y in 0..h {
        for x in 0..w {
            if let Some((du, dv)) = flow.at(y, x) {
                let (sx, sy) = (x as f64 + du, y as f64 + dv);
                if sx >= 0.0 && sy >= 0.0 && sx <= (w - 1) as f64 && sy <= (h - 1) as f64 {
                    mask[y * w + x] = true;
                    coords[y * w + x] = (sx, sy);
                }
            }
        }
    }
    let mut samples = Vec::with_capacity(frame.samples().len());
    for c in 0..frame.channels() {
        let plane = frame.plane(c);
        samples.extend(coords.iter().zip(&mask).map(|(&(sx, sy), &ok)| {
            if ok {
                sample_bilinear(plane, w, h, sx, sy).unwrap_or(0.0)
            } else {
                0.0
            }
        }));
    }
    Ok((Frame::new(w, h, frame.layout(), samples)?, mask))
}

/// Smallest side accepted by [`estimate_flow`].
pub const MIN_FLOW_DIM: usize = 16;

/// Coarse-to-fine block matcher: integer SSD search over a box pyramid,
/// vector median filtering per level, and parabolic sub-pixel refinement at
/// full resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMatcher {
    pub levels: usize,
    pub block: usize,
    /// Search radius at the coarsest level, in that level's pixels.
    pub coarse_radius: i32,
    /// Search radius around the upsampled prediction on finer levels.
    pub refine_radius: i32,
}

impl Default for BlockMatcher {
    fn default() -> Self {
        Self {
            levels: 3,
            block: 8,
            coarse_radius: 8,
            refine_radius: 2,
        }
    }
}

struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn downsample(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * self.w + 2 * x;
                data.push(
                    0.25 * (self.data[i]
                        + self.data[i + 1]
                        + self.data[i + self.w]
                        + self.data[i + self.w + 1]),
                );
            }
        }
        Plane { w, h, data }
    }
}

struct Grid {
    nbx: usize,
    nby: usize,
    block: usize,
}

impl Grid {
    fn new(w: usize, h: usize, block: usize) -> Self {
        Self {
            nbx: w.div_ceil(block),
            nby: h.div_ceil(block),
            block,
        }
    }

    /// Top-left corner of a block; the last row/column is aligned to the edge.
    fn origin(&self, bx: usize, by: usize, w: usize, h: usize) -> (usize, usize) {
        (
            (bx * self.block).min(w - self.block),
            (by * self.block).min(h - self.block),
        )
    }
}

type Vector = (i32, i32);

impl BlockMatcher {
    fn ssd(&self, a: &Plane, b: &Plane, ax: usize, ay: usize, d: Vector) -> Option<f64> {
        let bx = ax as i64 + d.0 as i64;
        let by = ay as i64 + d.1 as i64;
        let bs = self.block as i64;
        if bx < 0 || by < 0 || bx + bs > b.w as i64 || by + bs > b.h as i64 {
            return None;
        }
        let (bx, by) = (bx as usize, by as usize);
        let mut acc = 0.0;
        for j in 0..self.block {
            let ra = &a.data[(ay + j) * a.w + ax..(ay + j) * a.w + ax + self.block];
            let rb = &b.data[(by + j) * b.w + bx..(by + j) * b.w + bx + self.block];
            for (p, q) in ra.iter().zip(rb) {
                let e = p - q;
                acc += e * e;
            }
        }
        Some(acc)
    }

    fn search(
        &self,
        a: &Plane,
        b: &Plane,
        ax: usize,
        ay: usize,
        pred: Vector,
        radius: i32,
    ) -> Vector {
        // Clamp the prediction so that at least the center candidate is in bounds.
        let max_dx = (b.w - self.block) as i32 - ax as i32;
        let max_dy = (b.h - self.block) as i32 - ay as i32;
        let pred = (
            pred.0.clamp(-(ax as i32), max_dx),
            pred.1.clamp(-(ay as i32), max_dy),
        );
        let mut best = pred;
        let mut best_key = (f64::INFINITY, i32::MAX);
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let d = (pred.0 + dx, pred.1 + dy);
                if let Some(cost) = self.ssd(a, b, ax, ay, d) {
                    let key = (cost, dx * dx + dy * dy);
                    if key.0 < best_key.0 || (key.0 == best_key.0 && key.1 < best_key.1) {
                        best_key = key;
                        best = d;
                    }
                }
            }
        }
        best
    }

    fn median_filter(grid: &Grid, field: &[Vector]) -> Vec<Vector> {
        let mut out = Vec::with_capacity(field.len());
        for by in 0..grid.nby {
            for bx in 0..grid.nbx {
                let mut xs = Vec::with_capacity(9);
                let mut ys = Vec::with_capacity(9);
                for ny in by.saturating_sub(1)..=(by + 1).min(grid.nby - 1) {
                    for nx in bx.saturating_sub(1)..=(bx + 1).min(grid.nbx - 1) {
                        let v = field[ny * grid.nbx + nx];
                        xs.push(v.0);
                        ys.push(v.1);
                    }
                }
                xs.sort_unstable();
                ys.sort_unstable();
                out.push((xs[(xs.len() - 1) / 2], ys[(ys.len() - 1) / 2]));
            }
        }
        out
    }

    fn parabola(cm: Option<f64>, c0: f64, cp: Option<f64>) -> f64 {
        match (cm, cp) {
            (Some(cm), Some(cp)) => {
                let denom = cm - 2.0 * c0 + cp;
                if denom > 0.0 {
                    (0.5 * (cm - cp) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }

    /// Estimates the flow from `a` to `b` on luma planes.
    pub fn estimate(&self, a: &Frame, b: &Frame) -> Result<FlowField> {
        if a.width() != b.width() || a.height() != b.height() {
            return Err(Error::DimMismatch(format!(
                "{}x{} vs {}x{}",
                a.width(),
                a.height(),
                b.width(),
                b.height()
            )));
        }
        let (w, h) = (a.width(), a.height());
        if w.min(h) < MIN_FLOW_DIM {
            return Err(Error::TooSmall {
                width: w,
                height: h,
                min: MIN_FLOW_DIM,
            });
        }
        let la = a.to_luma();
        let lb = b.to_luma();
        let mut pyr_a = vec![Plane {
            w,
            h,
            data: la.into_samples(),
        }];
        let mut pyr_b = vec![Plane {
            w,
            h,
            data: lb.into_samples(),
        }];
        while pyr_a.len() < self.levels.max(1) {
            let last = pyr_a.last().unwrap();
            if (last.w / 2).min(last.h / 2) < self.block {
                break;
            }
            let next_a = last.downsample();
            let next_b = pyr_b.last().unwrap().downsample();
            pyr_a.push(next_a);
            pyr_b.push(next_b);
        }

        let mut parent: Option<(Grid, Vec<Vector>)> = None;
        for level in (0..pyr_a.len()).rev() {
            let (pa, pb) = (&pyr_a[level], &pyr_b[level]);
            let grid = Grid::new(pa.w, pa.h, self.block);
            let radius = if parent.is_none() {
                self.coarse_radius
            } else {
                self.refine_radius
            };
            let field: Vec<Vector> = (0..grid.nbx * grid.nby)
                .into_par_iter()
                .map(|i| {
                    let (bx, by) = (i % grid.nbx, i / grid.nbx);
                    let (ox, oy) = grid.origin(bx, by, pa.w, pa.h);
                    let pred = match &parent {
                        None => (0, 0),
                        Some((pg, pf)) => {
                            let cx = (ox + self.block / 2) / 2;
                            let cy = (oy + self.block / 2) / 2;
                            let pbx = (cx / pg.block).min(pg.nbx - 1);
                            let pby = (cy / pg.block).min(pg.nby - 1);
                            let pv = pf[pby * pg.nbx + pbx];
                            (2 * pv.0, 2 * pv.1)
                        }
                    };
                    self.search(pa, pb, ox, oy, pred, radius)
                })
                .collect();
            let field = Self::median_filter(&grid, &field);
            parent = Some((grid, field));
        }

        let (grid, field) = parent.expect("at least one pyramid level");
        let (pa, pb) = (&pyr_a[0], &pyr_b[0]);
        let refined: Vec<(f64, f64)> = (0..grid.nbx * grid.nby)
            .into_par_iter()
            .map(|i| {
                let (bx, by) = (i % grid.nbx, i / grid.nbx);
                let (ox, oy) = grid.origin(bx, by, w, h);
                let d = self.search(pa, pb, ox, oy, field[i], 1);
                let c0 = self.ssd(pa, pb, ox, oy, d).unwrap_or(0.0);
                let sx = Self::parabola(
                    self.ssd(pa, pb, ox, oy, (d.0 - 1, d.1)),
                    c0,
                    self.ssd(pa, pb, ox, oy, (d.0 + 1, d.1)),
                );
                let sy = Self::parabola(
                    self.ssd(pa, pb, ox, oy, (d.0, d.1 - 1)),
                    c0,
                    self.ssd(pa, pb, ox, oy, (d.0, d.1 + 1)),
                );
                (d.0 as f64 + sx, d.1 as f64 + sy)
            })
            .collect();

        let n = w * h;
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        let mut valid = Vec::with_capacity(n);
        for y in 0..h {
            let by = (y / self.block).min(grid.nby - 1);
            for x in 0..w {
                let bx = (x / self.block).min(grid.nbx - 1);
                let (fu, fv) = refined[by * grid.nbx + bx];
                let (sx, sy) = (x as f64 + fu, y as f64 + fv);
                u.push(fu);
                v.push(fv);
                valid.push(sx >= 0.0 && sy >= 0.0 && sx <= (w - 1) as f64 && sy <= (h - 1) as f64);
            }
        }
        FlowField::new(w, h, u, v, valid)
    }
}

/// Flow from `a` to `b` with the default [`BlockMatcher`].
pub fn estimate_flow(a: &Frame, b: &Frame) -> Result<FlowField> {
    BlockMatcher::default().estimate(a, b)
}

/// Negated displacement of `flow`, re-masked against the image bounds.
/// This is the exact inverse for translations and a first-order one otherwise.
pub fn negate_flow(flow: &FlowField) -> FlowField {
    let (w, h) = (flow.width(), flow.height());
    let mut valid = flow.valid().to_vec();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let sx = x as f64 - flow.u()[i];
            let sy = y as f64 - flow.v()[i];
            valid[i] &= sx >= 0.0 && sy >= 0.0 && sx <= (w - 1) as f64 && sy <= (h - 1) as f64;
        }
    }
    FlowField {
        width: w,
        height: h,
        u: flow.u().iter().map(|a| -a).collect(),
        v: flow.v().iter().map(|a| -a).collect(),
        valid,
    }
}
