//! The Cauchy-Green transform
//!
//! ```text
//! Tf(ζ) = 1/(2πi) ∫ f(ω) dω∧dω̄ / (ω - ζ) = -(1/π) ∫ f(ω) / (ω - ζ) dA(ω)
//! ```
//!
//! over the grid disc. `f` is frozen at its node value on the region each node
//! owns and the kernel is integrated over that region: exactly, through the
//! closed-form primitive of `1/ω` on rectangles, when the target is near, and
//! through a multipole expansion about the node otherwise. A node owning
//! exactly its lattice cell has a kernel depending only on the lattice offset,
//! so the bulk is an FFT convolution. The rim nodes, whose regions are clipped
//! or enlarged, contribute their deviation from a full cell as one extra
//! convolution per multipole order plus an exact near-field table.

use std::f64::consts::PI;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{clipped_moments, rect_moment, Grid, GridDisc, GridFunction, Node, CLIP_DEPTH};

/// Targets within this many lattice steps of a rim node get exact kernel integrals.
const NEAR_REACH: isize = 3;
/// Highest multipole order kept for the far field of rim regions.
const ORDER: usize = 6;

pub struct CGOperator {
    grid: Grid,
    size: usize,
    /// FFT of the full-cell kernel followed by the far multipole kernels of orders `0..=ORDER`.
    kernel_hats: Vec<Vec<Complex64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    rim: Vec<RimCorrection>,
}

struct RimCorrection {
    node: usize,
    /// Region moments about the node minus those of its full cell.
    moments: Vec<Complex64>,
    /// `(target, W_exact - W_full)` for the near targets, sorted by target.
    near: Vec<(usize, Complex64)>,
}

impl std::fmt::Debug for CGOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CGOperator")
            .field("resolution", &self.grid.resolution())
            .field("radius", &self.grid.radius())
            .field("fft_size", &self.size)
            .field("rim_nodes", &self.rim.len())
            .finish()
    }
}

impl CGOperator {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.resolution();
        let size = fft_size(2 * n + 1);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let h = grid.spacing();

        let reach = n as isize;
        let mut kernels = vec![vec![Complex64::new(0.0, 0.0); size * size]; ORDER + 2];
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                // the convolution is indexed by target - source
                let at = (-dy).rem_euclid(size as isize) as usize * size + (-dx).rem_euclid(size as isize) as usize;
                kernels[0][at] = full_cell_kernel(dx, dy, h);
                if dx.abs() > NEAR_REACH || dy.abs() > NEAR_REACH {
                    let d = Complex64::new(dx as f64, dy as f64) * h;
                    let mut p = 1.0 / d;
                    for kernel in &mut kernels[1..] {
                        kernel[at] = p;
                        p *= -1.0 / d;
                    }
                }
            }
        }
        for kernel in &mut kernels {
            fft2(kernel, size, &forward);
        }

        let rim = grid
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, node)| node.is_rim())
            .map(|(j, node)| {
                let mut near = Vec::new();
                for dy in -NEAR_REACH..=NEAR_REACH {
                    for dx in -NEAR_REACH..=NEAR_REACH {
                        let (ti, tj) = (node.i as isize + dx, node.j as isize + dy);
                        if ti < 0 || tj < 0 {
                            continue;
                        }
                        if let Some(k) = grid.node_at(ti as usize, tj as usize) {
                            let exact = region_kernel(grid, node, grid.node(k).z);
                            near.push((k, exact - full_cell_kernel(-dx, -dy, h)));
                        }
                    }
                }
                near.sort_by_key(|&(k, _)| k);
                RimCorrection { node: j, moments: moment_deviation(grid, node), near }
            })
            .collect();

        CGOperator { grid: grid.clone(), size, kernel_hats: kernels, forward, inverse, rim }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `Tf` at every node.
    pub fn transform(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        let g = &self.grid;
        let size = self.size;
        let mut acc = vec![Complex64::new(0.0, 0.0); size * size];
        let mut data = vec![Complex64::new(0.0, 0.0); size * size];
        for (k, kernel) in self.kernel_hats.iter().enumerate() {
            data.iter_mut().for_each(|d| *d = Complex64::new(0.0, 0.0));
            if k == 0 {
                for (node, &v) in g.nodes().iter().zip(f.values()) {
                    data[node.j * size + node.i] = v;
                }
            } else {
                for rc in &self.rim {
                    let node = g.node(rc.node);
                    data[node.j * size + node.i] = f.value(rc.node) * rc.moments[k - 1];
                }
            }
            fft2(&mut data, size, &self.forward);
            for ((a, d), w) in acc.iter_mut().zip(&data).zip(kernel) {
                *a += d * w;
            }
        }
        fft2(&mut acc, size, &self.inverse);
        let scale = 1.0 / (size * size) as f64;
        let mut sums: Vec<Complex64> = g.nodes().iter().map(|node| acc[node.j * size + node.i] * scale).collect();
        for rc in &self.rim {
            let fj = f.value(rc.node);
            for &(k, corr) in &rc.near {
                sums[k] += fj * corr;
            }
        }
        let values = sums.into_iter().map(|s| s * (-1.0 / PI)).collect();
        Ok(GridFunction::from_values_unchecked(g.clone(), values))
    }

    /// The same quadrature as [`CGOperator::transform`] summed directly in
    /// `O(M²)`; kept as a reference for the convolution path.
    pub fn transform_direct(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        let g = &self.grid;
        let h = g.spacing();
        let mut sums = vec![Complex64::new(0.0, 0.0); g.len()];
        for (j, src) in g.nodes().iter().enumerate() {
            let fj = f.value(j);
            let moments = if src.is_rim() { moment_deviation(g, src) } else { Vec::new() };
            for (k, target) in g.nodes().iter().enumerate() {
                let (dx, dy) = (src.i as isize - target.i as isize, src.j as isize - target.j as isize);
                let near = dx.abs() <= NEAR_REACH && dy.abs() <= NEAR_REACH;
                let w = if !src.is_rim() {
                    full_cell_kernel(dx, dy, h)
                } else if near {
                    region_kernel(g, src, target.z)
                } else {
                    let d = src.z - target.z;
                    let mut p = 1.0 / d;
                    let mut w = full_cell_kernel(dx, dy, h);
                    for m in &moments {
                        w += m * p;
                        p *= -1.0 / d;
                    }
                    w
                };
                sums[k] += fj * w;
            }
        }
        let values = sums.into_iter().map(|s| s * (-1.0 / PI)).collect();
        Ok(GridFunction::from_values_unchecked(g.clone(), values))
    }

    /// `Tf(ζ)` at a point outside the closed grid disc, where the kernel is regular.
    pub fn exterior(&self, f: &GridFunction, zeta: Complex64) -> Result<Complex64> {
        self.check(f)?;
        let g = &self.grid;
        if zeta.norm() <= g.radius() {
            return Err(Error::NotExterior(zeta, g.radius()));
        }
        let near = (NEAR_REACH as f64 + 1.0) * g.spacing();
        let mut sum = Complex64::new(0.0, 0.0);
        for (node, &v) in g.nodes().iter().zip(f.values()) {
            let w = if (node.centroid - zeta).norm() > near {
                node.weight / (node.centroid - zeta)
            } else {
                region_kernel(g, node, zeta)
            };
            sum += v * w;
        }
        Ok(sum * (-1.0 / PI))
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.grid().resolution() == self.grid.resolution() && f.grid().radius() == self.grid.radius() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// The operator for a grid, built once per `(radius, resolution)` and shared.
pub fn shared_operator(grid: &Grid) -> Arc<CGOperator> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<CGOperator>>>> = OnceLock::new();
    let key = (grid.radius().to_bits(), grid.resolution());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(op) = cache.lock().expect("operator cache poisoned").get(&key) {
        return op.clone();
    }
    let op = Arc::new(CGOperator::new(grid));
    cache.lock().expect("operator cache poisoned").entry(key).or_insert(op).clone()
}

/// Functional forms matching the operation names used elsewhere.
pub fn cg_transform(op: &CGOperator, f: &GridFunction) -> Result<GridFunction> {
    op.transform(f)
}

pub fn cg_exterior(op: &CGOperator, f: &GridFunction, zeta: Complex64) -> Result<Complex64> {
    op.exterior(f, zeta)
}

/// Moments `∫ (ω - z)^k dA` of a rim region about its node, minus those of the full cell.
fn moment_deviation(g: &GridDisc, node: &Node) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(0.0, 0.0); ORDER + 1];
    for piece in &node.pieces {
        let part = clipped_moments(g.cell_bounds(piece.ci, piece.cj), g.radius(), node.z, CLIP_DEPTH, ORDER);
        for (a, b) in m.iter_mut().zip(part) {
            *a += piece.share * b;
        }
    }
    let own = g.cell_bounds(node.i, node.j);
    for (k, a) in m.iter_mut().enumerate() {
        *a -= rect_moment(own, node.z, k);
    }
    m
}

/// `∫ dA(ω) / (ω - ζ)` over the region a node owns.
fn region_kernel(g: &GridDisc, node: &Node, zeta: Complex64) -> Complex64 {
    if !node.is_rim() {
        let (x0, x1, y0, y1) = g.cell_bounds(node.i, node.j);
        return rect_kernel(x0 - zeta.re, x1 - zeta.re, y0 - zeta.im, y1 - zeta.im);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for piece in &node.pieces {
        let (x0, x1, y0, y1) = g.cell_bounds(piece.ci, piece.cj);
        acc += piece.share * clipped_kernel(x0, x1, y0, y1, g.radius(), zeta, CLIP_DEPTH);
    }
    acc
}

/// `∫ dA(ω) / (ω - ζ)` over a rectangle clipped to the disc of radius `r`,
/// refining only the pieces that straddle the circle.
fn clipped_kernel(x0: f64, x1: f64, y0: f64, y1: f64, r: f64, zeta: Complex64, depth: u32) -> Complex64 {
    let full = (x1 - x0) * (y1 - y0);
    let area = crate::grid::rect_disc_area(x0, x1, y0, y1, r);
    if area <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let exact = rect_kernel(x0 - zeta.re, x1 - zeta.re, y0 - zeta.im, y1 - zeta.im);
    if area >= full * (1.0 - 1e-13) {
        return exact;
    }
    if depth == 0 {
        return exact * (area / full);
    }
    let (xm, ym) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    clipped_kernel(x0, xm, y0, ym, r, zeta, depth - 1)
        + clipped_kernel(xm, x1, y0, ym, r, zeta, depth - 1)
        + clipped_kernel(x0, xm, ym, y1, r, zeta, depth - 1)
        + clipped_kernel(xm, x1, ym, y1, r, zeta, depth - 1)
}

/// Kernel integral over the full lattice cell at offset `(dx, dy)` from the target.
fn full_cell_kernel(dx: isize, dy: isize, h: f64) -> Complex64 {
    if dx == 0 && dy == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let (x, y) = (dx as f64, dy as f64);
    h * rect_kernel(x - 0.5, x + 0.5, y - 0.5, y + 0.5)
}

/// `∫∫ dx dy / (x + iy)` over `[x0,x1]×[y0,y1]`, singularity at the origin.
pub fn rect_kernel(x0: f64, x1: f64, y0: f64, y1: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    // split along both axes so each piece sits in one closed quadrant
    let xs = split(x0, x1);
    let ys = split(y0, y1);
    for &(a0, a1) in &xs {
        for &(b0, b1) in &ys {
            if a0 >= 0.0 {
                acc += right_half_kernel(a0, a1, b0, b1);
            } else {
                // ω ↦ -ω maps the piece to the right half plane and flips the kernel sign
                acc -= right_half_kernel(-a1, -a0, -b1, -b0);
            }
        }
    }
    acc
}

fn split(a: f64, b: f64) -> Vec<(f64, f64)> {
    if a < 0.0 && b > 0.0 {
        vec![(a, 0.0), (0.0, b)]
    } else {
        vec![(a, b)]
    }
}

fn right_half_kernel(x0: f64, x1: f64, y0: f64, y1: f64) -> Complex64 {
    // primitive -i·w·log w of 1/w, continuous on the closed right half plane
    let p = |x: f64, y: f64| {
        let w = Complex64::new(x, y);
        if w.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            -Complex64::i() * w * w.ln()
        }
    };
    p(x1, y1) - p(x0, y1) - p(x1, y0) + p(x0, y0)
}

fn fft_size(min: usize) -> usize {
    (min..)
        .find(|&s| {
            let mut m = s;
            for p in [2, 3, 5] {
                while m % p == 0 {
                    m /= p;
                }
            }
            m == 1
        })
        .expect("smooth sizes are unbounded")
}

fn fft2(data: &mut [Complex64], size: usize, fft: &Arc<dyn Fft<f64>>) {
    fft.process(data);
    transpose(data, size);
    fft.process(data);
    transpose(data, size);
}

fn transpose(data: &mut [Complex64], size: usize) {
    for r in 0..size {
        for c in (r + 1)..size {
            data.swap(r * size + c, c * size + r);
        }
    }
}

/// Accuracy figures of the transform on a grid of the given resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTest {
    pub resolution: usize,
    /// `max |T1 - ζ̄|` over all nodes.
    pub interior_error: f64,
    /// `(probe, |T1(ζ) - 1/ζ|)`.
    pub exterior_errors: Vec<(Complex64, f64)>,
    /// `(name, sup|∂̄Tf - f| / sup|f|)` over `|ζ| <= 0.9`.
    pub dbar_inverse_errors: Vec<(&'static str, f64)>,
    /// `sup|Tf| / sup|f|` over the battery.
    pub bound: f64,
}

/// The exterior probes used by [`selftest`].
pub const EXTERIOR_PROBES: [Complex64; 3] =
    [Complex64 { re: 1.5, im: 0.0 }, Complex64 { re: 0.0, im: -2.0 }, Complex64 { re: -4.0 * 0.6, im: 4.0 * 0.8 }];

/// Test functions for the `∂̄ ∘ T = id` check.
pub fn dbar_battery() -> Vec<(&'static str, fn(Complex64) -> Complex64)> {
    vec![
        ("one", |_| Complex64::new(1.0, 0.0)),
        ("zeta", |z| z),
        ("zeta_bar", |z| z.conj()),
        ("exp_abs2", |z| (z * z.conj()).exp()),
    ]
}

/// Runs the closed-form and `∂̄`-inverse checks on the unit disc.
pub fn selftest(resolution: usize) -> Result<SelfTest> {
    let grid = crate::grid::make_grid(1.0, resolution)?;
    let op = CGOperator::new(&grid);
    let one = GridFunction::constant(&grid, Complex64::new(1.0, 0.0));
    let t1 = op.transform(&one)?;
    let interior_error = grid.nodes().iter().zip(t1.values()).map(|(n, v)| (v - n.z.conj()).norm()).fold(0.0, f64::max);
    let exterior_errors = EXTERIOR_PROBES
        .iter()
        .map(|&z| Ok((z, (op.exterior(&one, z)? - 1.0 / z).norm())))
        .collect::<Result<Vec<_>>>()?;

    let inner = grid.within(0.9);
    let mut dbar_inverse_errors = Vec::new();
    let mut bound: f64 = 0.0;
    for (name, f) in dbar_battery() {
        let fg = GridFunction::from_fn(&grid, f);
        let tf = op.transform(&fg)?;
        let err = (&crate::grid::wirtinger_dbar(&tf) - &fg).sup_over(&inner) / fg.sup_over(&inner);
        dbar_inverse_errors.push((name, err));
        bound = bound.max(tf.sup() / fg.sup());
    }
    Ok(SelfTest { resolution, interior_error, exterior_errors, dbar_inverse_errors, bound })
}
