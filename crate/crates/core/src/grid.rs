//! Discrete calculus on closed discs `ρ·D̄`.
//!
//! Nodes are the points of the Cartesian lattice `x_i = -ρ + i h`, `h = 2ρ/N`,
//! that lie in the closed disc. Every lattice cell meeting the disc is owned by
//! a node: a node owns its own cell clipped to the disc, and the clipped part
//! of a cell whose centre lies outside the disc is split evenly between the
//! nearest interior nodes. The cell weights therefore tile the disc and sum to
//! `πρ²` up to rounding.

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Subdivision used for clipped-cell centroids and kernel integrals.
/// Quadtree levels used to resolve the circle inside a clipped cell.
pub(crate) const CLIP_DEPTH: u32 = 7;

/// A (possibly shared) portion of a lattice cell owned by a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub ci: usize,
    pub cj: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub i: usize,
    pub j: usize,
    pub z: Complex64,
    pub weight: f64,
    /// Centroid of the owned region; equals `z` for full cells.
    pub centroid: Complex64,
    /// Owned cell pieces; empty when the node owns exactly its full cell.
    pub pieces: Vec<Piece>,
}

impl Node {
    pub fn is_rim(&self) -> bool {
        !self.pieces.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDisc {
    radius: f64,
    resolution: usize,
    h: f64,
    nodes: Vec<Node>,
    lattice: Vec<Option<usize>>,
}

pub type Grid = Arc<GridDisc>;

/// Builds the grid on the closed disc of the given radius with `n` lattice intervals per diameter.
pub fn make_grid(radius: f64, n: usize) -> Result<Grid> {
    GridDisc::new(radius, n).map(Arc::new)
}

impl GridDisc {
    pub fn new(radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("grid radius must be positive, got {radius}")));
        }
        if n < 16 || !n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("grid resolution must be even and >= 16, got {n}")));
        }
        let h = 2.0 * radius / n as f64;
        let side = n + 1;
        let coord = |i: usize| -radius + i as f64 * h;
        let mut lattice = vec![None; side * side];
        let mut nodes = Vec::new();
        for j in 0..side {
            for i in 0..side {
                let z = Complex64::new(coord(i), coord(j));
                if z.norm() <= radius * (1.0 + 1e-14) {
                    lattice[j * side + i] = Some(nodes.len());
                    nodes.push(Node { i, j, z, weight: 0.0, centroid: z, pieces: Vec::new() });
                }
            }
        }

        let mut grid = GridDisc { radius, resolution: n, h, nodes, lattice };
        let full = h * h;
        // (weighted first moment, weight) accumulated per node
        let mut moments = vec![(Complex64::new(0.0, 0.0), 0.0); grid.nodes.len()];
        for cj in 0..side {
            for ci in 0..side {
                let (x0, x1, y0, y1) = grid.cell_bounds(ci, cj);
                let area = rect_disc_area(x0, x1, y0, y1, radius);
                if area <= 0.0 {
                    continue;
                }
                let owners: Vec<usize> = match grid.node_at(ci, cj) {
                    Some(k) => vec![k],
                    None => grid.nearest_nodes(ci, cj),
                };
                if owners.is_empty() {
                    continue;
                }
                let share = 1.0 / owners.len() as f64;
                let centroid = if area >= full * (1.0 - 1e-13) {
                    Complex64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1))
                } else {
                    grid.clipped_centroid(ci, cj)
                };
                for &k in &owners {
                    let own_full = grid.nodes[k].i == ci && grid.nodes[k].j == cj && area >= full * (1.0 - 1e-13);
                    moments[k].0 += centroid * (area * share);
                    moments[k].1 += area * share;
                    if !own_full {
                        grid.nodes[k].pieces.push(Piece { ci, cj, share });
                    }
                }
            }
        }
        for (node, (m, w)) in grid.nodes.iter_mut().zip(moments) {
            node.weight = w;
            if !node.pieces.is_empty() {
                // A rim node whose own full cell went into `moments` without a piece entry.
                let own_listed = node.pieces.iter().any(|p| p.ci == node.i && p.cj == node.j);
                if !own_listed {
                    node.pieces.push(Piece { ci: node.i, cj: node.j, share: 1.0 });
                }
                node.centroid = m / w;
            }
        }
        Ok(grid)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Lattice spacing.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &Node {
        &self.nodes[k]
    }

    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.nodes.iter().map(|n| n.z)
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    pub fn lattice_side(&self) -> usize {
        self.resolution + 1
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.radius + i as f64 * self.h
    }

    pub fn node_at(&self, i: usize, j: usize) -> Option<usize> {
        let side = self.lattice_side();
        if i >= side || j >= side {
            return None;
        }
        self.lattice[j * side + i]
    }

    fn node_at_signed(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 {
            return None;
        }
        self.node_at(i as usize, j as usize)
    }

    /// Index of the node at the centre of the disc.
    pub fn center_index(&self) -> usize {
        let c = self.resolution / 2;
        self.node_at(c, c).expect("even resolution puts the origin on the lattice")
    }

    pub fn cell_bounds(&self, ci: usize, cj: usize) -> (f64, f64, f64, f64) {
        let (x, y) = (self.coord(ci), self.coord(cj));
        let half = 0.5 * self.h;
        (x - half, x + half, y - half, y + half)
    }

    fn nearest_nodes(&self, ci: usize, cj: usize) -> Vec<usize> {
        let c = Complex64::new(self.coord(ci), self.coord(cj));
        for reach in 1..=3isize {
            let mut best = f64::INFINITY;
            let mut found = Vec::new();
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    if let Some(k) = self.node_at_signed(ci as isize + di, cj as isize + dj) {
                        let d = (self.nodes[k].z - c).norm();
                        if d < best - 1e-12 * self.h {
                            best = d;
                            found.clear();
                            found.push(k);
                        } else if (d - best).abs() <= 1e-12 * self.h {
                            found.push(k);
                        }
                    }
                }
            }
            if !found.is_empty() {
                return found;
            }
        }
        Vec::new()
    }

    fn clipped_centroid(&self, ci: usize, cj: usize) -> Complex64 {
        let (x0, x1, y0, y1) = self.cell_bounds(ci, cj);
        let origin = Complex64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let m = clipped_moments((x0, x1, y0, y1), self.radius, origin, CLIP_DEPTH, 1);
        origin + m[1] / m[0].re
    }

    /// Whether centred differences are available in both lattice directions.
    pub fn is_interior(&self, k: usize) -> bool {
        let n = &self.nodes[k];
        let (i, j) = (n.i as isize, n.j as isize);
        self.node_at_signed(i - 1, j).is_some()
            && self.node_at_signed(i + 1, j).is_some()
            && self.node_at_signed(i, j - 1).is_some()
            && self.node_at_signed(i, j + 1).is_some()
    }

    /// Node indices with `|ζ| <= fraction·radius`.
    pub fn within(&self, fraction: f64) -> Vec<usize> {
        let lim = fraction * self.radius * (1.0 + 1e-12);
        (0..self.nodes.len()).filter(|&k| self.nodes[k].z.norm() <= lim).collect()
    }

    /// Nodes that coincide with the nodes of a grid with half the resolution.
    pub fn coarse_node(&self, coarse: &GridDisc, k: usize) -> Option<usize> {
        if coarse.resolution * 2 != self.resolution || (coarse.radius - self.radius).abs() > 1e-14 * self.radius {
            return None;
        }
        let n = &coarse.nodes[k];
        self.node_at(2 * n.i, 2 * n.j)
    }

    fn same_as(&self, other: &GridDisc) -> bool {
        std::ptr::eq(self, other) || (self.resolution == other.resolution && self.radius == other.radius)
    }

    /// Plane fit over the 5×5 neighbourhood, used for the lattice-axis tips
    /// that have no neighbour along one axis.
    fn fitted_partial(&self, values: &[Complex64], n: &Node, axis: usize) -> Complex64 {
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        let (mut sxf, mut syf) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let f0 = values[self.node_at(n.i, n.j).expect("node present")];
        for dj in -2isize..=2 {
            for di in -2isize..=2 {
                if let Some(k) = self.node_at_signed(n.i as isize + di, n.j as isize + dj) {
                    let (dx, dy) = (di as f64 * self.h, dj as f64 * self.h);
                    let df = values[k] - f0;
                    sxx += dx * dx;
                    sxy += dx * dy;
                    syy += dy * dy;
                    sxf += df * dx;
                    syf += df * dy;
                }
            }
        }
        let det = sxx * syy - sxy * sxy;
        if det.abs() < 1e-300 {
            return Complex64::new(0.0, 0.0);
        }
        if axis == 0 {
            (sxf * syy - syf * sxy) / det
        } else {
            (syf * sxx - sxf * sxy) / det
        }
    }

    /// Derivative along a lattice axis at every node; `axis = 0` is x.
    fn partial(&self, values: &[Complex64], axis: usize) -> Vec<Complex64> {
        let h = self.h;
        self.nodes
            .iter()
            .map(|n| {
                let (i, j) = (n.i as isize, n.j as isize);
                let at = |d: isize| -> Option<Complex64> {
                    let k = if axis == 0 { self.node_at_signed(i + d, j) } else { self.node_at_signed(i, j + d) };
                    k.map(|k| values[k])
                };
                let f0 = at(0).expect("node present");
                match (at(-2), at(-1), at(1), at(2)) {
                    (_, Some(m1), Some(p1), _) => (p1 - m1) / (2.0 * h),
                    (_, _, Some(p1), Some(p2)) => (-3.0 * f0 + 4.0 * p1 - p2) / (2.0 * h),
                    (Some(m2), Some(m1), _, _) => (3.0 * f0 - 4.0 * m1 + m2) / (2.0 * h),
                    (_, _, Some(p1), None) => (p1 - f0) / h,
                    (_, Some(m1), None, _) => (f0 - m1) / h,
                    _ => self.fitted_partial(values, n, axis),
                }
            })
            .collect()
    }
}

/// Complex-valued samples on a [`GridDisc`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParameter("grid function values must be finite".into()));
        }
        Ok(GridFunction { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: Grid, values: Vec<Complex64>) -> Self {
        GridFunction { grid, values }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(Complex64) -> Complex64) -> Self {
        let values = grid.points().map(f).collect();
        GridFunction { grid: grid.clone(), values }
    }

    pub fn constant(grid: &Grid, c: Complex64) -> Self {
        GridFunction { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, Complex64::new(0.0, 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn value(&self, k: usize) -> Complex64 {
        self.values[k]
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.grid.same_as(&other.grid)
    }

    fn check(&self, other: &GridFunction) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        GridFunction { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.check(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(GridFunction { grid: self.grid.clone(), values })
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    pub fn try_add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn try_mul(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Maximum of `|f|` over the given nodes.
    pub fn sup_over(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&k| self.values[k].norm()).fold(0.0, f64::max)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Evaluates the function off the lattice by local bicubic Lagrange
    /// interpolation, shifting the stencil inward near the rim and falling
    /// back to bilinear interpolation where no 4×4 block fits.
    pub fn interpolate(&self, z: Complex64) -> Option<Complex64> {
        let g = &self.grid;
        let u = (z.re + g.radius) / g.h;
        let v = (z.im + g.radius) / g.h;
        if !u.is_finite() || !v.is_finite() {
            return None;
        }
        for width in [4usize, 2] {
            let base_u = u.floor() as isize - (width as isize / 2 - 1);
            let base_v = v.floor() as isize - (width as isize / 2 - 1);
            let shifts: &[isize] = if width == 4 { &[0, -1, 1, -2, 2] } else { &[0, -1, 1] };
            for &sv in shifts {
                for &su in shifts {
                    let (i0, j0) = (base_u + su, base_v + sv);
                    if let Some(val) = self.block(i0, j0, width, u - i0 as f64, v - j0 as f64) {
                        return Some(val);
                    }
                }
            }
        }
        None
    }

    fn block(&self, i0: isize, j0: isize, width: usize, tu: f64, tv: f64) -> Option<Complex64> {
        let wu = lagrange_weights(width, tu);
        let wv = lagrange_weights(width, tv);
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..width {
            for a in 0..width {
                let k = self.grid.node_at_signed(i0 + a as isize, j0 + b as isize)?;
                acc += self.values[k] * (wu[a] * wv[b]);
            }
        }
        Some(acc)
    }
}

fn lagrange_weights(width: usize, t: f64) -> [f64; 4] {
    if width == 4 {
        [
            -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
            t * (t - 2.0) * (t - 3.0) / 2.0,
            -t * (t - 1.0) * (t - 3.0) / 2.0,
            t * (t - 1.0) * (t - 2.0) / 6.0,
        ]
    } else {
        [1.0 - t, t, 0.0, 0.0]
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &GridFunction) -> GridFunction {
        self.try_add(rhs).expect("grid functions on different grids")
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &GridFunction) -> GridFunction {
        self.try_sub(rhs).expect("grid functions on different grids")
    }
}

impl Mul for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: &GridFunction) -> GridFunction {
        self.try_mul(rhs).expect("grid functions on different grids")
    }
}

impl Mul<Complex64> for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: Complex64) -> GridFunction {
        self.scale(rhs)
    }
}

/// Discrete `∂/∂ζ̄ = (∂_x + i ∂_y)/2`.
pub fn wirtinger_dbar(f: &GridFunction) -> GridFunction {
    let g = &f.grid;
    let dx = g.partial(&f.values, 0);
    let dy = g.partial(&f.values, 1);
    let values = dx.iter().zip(&dy).map(|(&a, &b)| 0.5 * (a + Complex64::i() * b)).collect();
    GridFunction { grid: g.clone(), values }
}

/// Discrete `∂/∂ζ = (∂_x - i ∂_y)/2`.
pub fn wirtinger_d(f: &GridFunction) -> GridFunction {
    let g = &f.grid;
    let dx = g.partial(&f.values, 0);
    let dy = g.partial(&f.values, 1);
    let values = dx.iter().zip(&dy).map(|(&a, &b)| 0.5 * (a - Complex64::i() * b)).collect();
    GridFunction { grid: g.clone(), values }
}

/// `L^p` norm with the cell weights, or the maximum over nodes for `p = ∞`.
/// Only `p > 2` is accepted.
pub fn norm(f: &GridFunction, p: f64) -> Result<f64> {
    if p.is_nan() || p <= 2.0 {
        return Err(Error::InvalidParameter(format!("norm exponent must exceed 2, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.sup());
    }
    let s: f64 = f.grid.nodes.iter().zip(&f.values).map(|(n, v)| n.weight * v.norm().powf(p)).sum();
    Ok(s.powf(1.0 / p))
}

/// Exact area of `[x0,x1]×[y0,y1] ∩ {|z| <= r}`.
/// Moments `∫ (ω - o)^k dA`, `k = 0..=order`, over a rectangle clipped to
/// the disc of radius `r`, refining only the pieces that straddle the circle.
pub(crate) fn clipped_moments(
    (x0, x1, y0, y1): (f64, f64, f64, f64),
    r: f64,
    o: Complex64,
    depth: u32,
    order: usize,
) -> Vec<Complex64> {
    let full = (x1 - x0) * (y1 - y0);
    let area = rect_disc_area(x0, x1, y0, y1, r);
    if area <= 0.0 {
        return vec![Complex64::new(0.0, 0.0); order + 1];
    }
    if area >= full * (1.0 - 1e-13) || depth == 0 {
        let frac = area / full;
        return (0..=order).map(|k| rect_moment((x0, x1, y0, y1), o, k) * frac).collect();
    }
    let (xm, ym) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let mut acc = vec![Complex64::new(0.0, 0.0); order + 1];
    for rect in [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)] {
        for (a, m) in acc.iter_mut().zip(clipped_moments(rect, r, o, depth - 1, order)) {
            *a += m;
        }
    }
    acc
}

/// `∫∫ (ω - o)^k dx dy` over a rectangle, from the primitive `-i w^{k+2} / ((k+1)(k+2))`.
pub(crate) fn rect_moment((x0, x1, y0, y1): (f64, f64, f64, f64), o: Complex64, k: usize) -> Complex64 {
    let c = -Complex64::i() / ((k + 1) * (k + 2)) as f64;
    let q = |x: f64, y: f64| c * (Complex64::new(x, y) - o).powu(k as u32 + 2);
    q(x1, y1) - q(x0, y1) - q(x1, y0) + q(x0, y0)
}

/// Area of `[x0,x1]×[y0,y1]` inside the disc of radius `r` about the origin.
pub fn rect_disc_area(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    let g = |x: f64, y: f64| x.signum() * y.signum() * quadrant_area(x.abs(), y.abs(), r);
    let a = g(x1, y1) - g(x0, y1) - g(x1, y0) + g(x0, y0);
    a.max(0.0)
}

/// Area of `[0,a]×[0,b] ∩ {|z| <= r}` for `a, b >= 0`.
fn quadrant_area(a: f64, b: f64, r: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    if a * a + b * b <= r * r {
        return a * b;
    }
    let a = a.min(r);
    let b = b.min(r);
    let u_star = (r * r - b * b).max(0.0).sqrt();
    let lo = u_star.min(a);
    let prim = |u: f64| 0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).clamp(-1.0, 1.0).asin());
    b * lo + prim(a) - prim(lo)
}
