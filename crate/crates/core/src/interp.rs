//! Point sampling of nodal fields: periodic in `x`, clamped in `z`.
//!
//! Every interpolant is written as `f_base + Σ w_k (f_k - f_base)` with the
//! nearest node as base, so constants are reproduced bit for bit and sampling
//! exactly at a node returns the stored value.

use crate::fields::{BeamField, Grid, ScalarField};
use crate::scalar::Real;

/// Four-point Lagrange weights for nodes at local positions 0, 1, 2, 3.
#[inline]
fn lagrange4<T: Real>(t: T) -> [T; 4] {
    let (one, two, three) = (T::one(), T::lit(2.0), T::lit(3.0));
    let six = T::lit(6.0);
    let t0 = t;
    let t1 = t - one;
    let t2 = t - two;
    let t3 = t - three;
    [
        -(t1 * t2 * t3) / six,
        (t0 * t2 * t3) / two,
        -(t0 * t1 * t3) / two,
        (t0 * t1 * t2) / six,
    ]
}

#[inline]
fn combine4<T: Real>(w: [T; 4], f: [T; 4], base: usize) -> T {
    let fb = f[base];
    let mut acc = fb;
    for k in 0..4 {
        if k != base {
            acc += w[k] * (f[k] - fb);
        }
    }
    acc
}

/// Rounds `u` to the nearest integer when it is within a few ulps of it, so
/// that node coordinates like `i·dx / dx` land exactly on node `i`.
#[inline]
fn snap<T: Real>(u: T) -> T {
    let r = u.round();
    if (u - r).abs() <= T::lit(16.0) * T::epsilon() * r.abs().max(T::one()) {
        r
    } else {
        u
    }
}

/// Cell index and fractional offset of `x` on the periodic line.
#[inline]
fn periodic_cell<T: Real>(grid: &Grid<T>, x: T) -> (usize, T) {
    let u = snap(x / grid.dx);
    let fl = u.floor();
    let s = u - fl;
    let n = grid.nx as i64;
    let i = fl.to_i64().unwrap_or(0).rem_euclid(n) as usize;
    (i, s)
}

/// Cell index `j0` in `0..nz` and offset in `[0, 1]`, with `z` clamped.
#[inline]
fn clamped_cell<T: Real>(grid: &Grid<T>, z: T) -> (usize, T) {
    let z = z.max(T::zero()).min(T::one());
    let u = snap(z / grid.dz);
    let mut j = u.floor().to_usize().unwrap_or(0);
    if j >= grid.nz {
        j = grid.nz - 1;
    }
    (j, u - T::from_usize_lossy(j))
}

#[inline]
fn wrap(grid_nx: usize, i: usize, offset: isize) -> usize {
    (i as isize + offset).rem_euclid(grid_nx as isize) as usize
}

pub fn periodic_linear<T: Real>(f: &BeamField<T>, x: T) -> T {
    let (i, s) = periodic_cell(&f.grid, x);
    let a = f.values[i];
    let b = f.values[wrap(f.grid.nx, i, 1)];
    if s == T::zero() {
        a
    } else {
        a + s * (b - a)
    }
}

pub fn periodic_cubic<T: Real>(f: &BeamField<T>, x: T) -> T {
    let (i, s) = periodic_cell(&f.grid, x);
    let n = f.grid.nx;
    let vals = [
        f.values[wrap(n, i, -1)],
        f.values[i],
        f.values[wrap(n, i, 1)],
        f.values[wrap(n, i, 2)],
    ];
    let t = s + T::one();
    let base = if s < T::lit(0.5) { 1 } else { 2 };
    combine4(lagrange4(t), vals, base)
}

/// Bilinear sample, periodic in `x`, `z` clamped to `[0, 1]`.
pub fn bilinear<T: Real>(f: &ScalarField<T>, x: T, z: T) -> T {
    let g = &f.grid;
    let (i, s) = periodic_cell(g, x);
    let (j, r) = clamped_cell(g, z);
    let i1 = wrap(g.nx, i, 1);
    let f00 = f.at(i, j);
    let f10 = f.at(i1, j);
    let f01 = f.at(i, j + 1);
    let f11 = f.at(i1, j + 1);
    let lo = f00 + s * (f10 - f00);
    let hi = f01 + s * (f11 - f01);
    lo + r * (hi - lo)
}

/// Tensor-product cubic sample: periodic four-point Lagrange in `x`, four-point
/// Lagrange in `z` with the stencil shifted inward near the walls. With
/// `monotone`, the result is clamped to the range of the enclosing cell's
/// four nodes.
pub fn bicubic<T: Real>(f: &ScalarField<T>, x: T, z: T, monotone: bool) -> T {
    let g = &f.grid;
    let (i, s) = periodic_cell(g, x);
    let (j, r) = clamped_cell(g, z);
    let start = (j as isize - 1).clamp(0, g.nz as isize - 3) as usize;
    let tz = T::from_usize_lossy(j - start) + r;
    let wz = lagrange4(tz);
    let zbase = {
        let near = (tz + T::lit(0.5)).floor().to_usize().unwrap_or(0);
        near.min(3)
    };
    let wx = lagrange4(s + T::one());
    let xbase = if s < T::lit(0.5) { 1 } else { 2 };
    let cols = [
        wrap(g.nx, i, -1),
        i,
        wrap(g.nx, i, 1),
        wrap(g.nx, i, 2),
    ];
    let mut rows = [T::zero(); 4];
    for (m, row) in rows.iter_mut().enumerate() {
        let jj = start + m;
        let vals = [f.at(cols[0], jj), f.at(cols[1], jj), f.at(cols[2], jj), f.at(cols[3], jj)];
        *row = combine4(wx, vals, xbase);
    }
    let v = combine4(wz, rows, zbase);
    if monotone {
        let i1 = cols[2];
        let corners = [f.at(i, j), f.at(i1, j), f.at(i, j + 1), f.at(i1, j + 1)];
        let lo = corners.iter().copied().fold(T::infinity(), T::min);
        let hi = corners.iter().copied().fold(T::neg_infinity(), T::max);
        v.max(lo).min(hi)
    } else {
        v
    }
}
