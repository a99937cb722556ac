//! Discrete Fourier transform along the periodic `x` direction.
//!
//! Normalization: the forward transform is unnormalized,
//! `f̂_j = Σ_i f_i e^{-2πi ij/N}`, so a constant `1` maps to `N` in mode 0; the
//! inverse divides by `N`. Mode `j` carries the signed wavenumber
//! `κ_j = 2π j'/L` with `j' = j` for `j <= N/2` and `j' = j - N` above; for even
//! `N` the Nyquist mode `j = N/2` uses the positive sign, `|κ| = πN/L`.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::fields::{BeamField, Grid};
use crate::scalar::Real;

/// Cached forward/inverse plans for one line length.
#[derive(Clone)]
pub struct LineTransform<T: Real> {
    grid: Grid<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for LineTransform<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LineTransform")
            .field("nx", &self.grid.nx)
            .finish()
    }
}

impl<T: Real> LineTransform<T> {
    pub fn new(grid: Grid<T>) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.nx),
            inverse: planner.plan_fft_inverse(grid.nx),
        }
    }

    pub fn grid(&self) -> Grid<T> {
        self.grid
    }

    pub fn forward(&self, f: &BeamField<T>) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = f.values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse transform; returns the real part and the largest discarded
    /// imaginary residue.
    pub fn inverse_with_residue(&self, modes: &[Complex<T>]) -> (BeamField<T>, T) {
        let mut buf = modes.to_vec();
        self.inverse.process(&mut buf);
        let n = T::from_usize_lossy(self.grid.nx);
        let mut residue = T::zero();
        let values = buf
            .iter()
            .map(|c| {
                residue = residue.max((c.im / n).abs());
                c.re / n
            })
            .collect();
        (
            BeamField {
                grid: self.grid,
                values,
            },
            residue,
        )
    }

    pub fn inverse(&self, modes: &[Complex<T>]) -> BeamField<T> {
        self.inverse_with_residue(modes).0
    }

    /// Signed wavenumber of storage index `j`.
    pub fn wavenumber(&self, j: usize) -> T {
        wavenumber(&self.grid, j)
    }

    /// Applies the Fourier multiplier `m(κ)` and transforms back.
    pub fn apply_multiplier(&self, f: &BeamField<T>, m: impl Fn(T) -> T) -> BeamField<T> {
        let mut modes = self.forward(f);
        for (j, c) in modes.iter_mut().enumerate() {
            *c = *c * m(self.wavenumber(j));
        }
        self.inverse(&modes)
    }

    /// Spectral second derivative.
    pub fn d2x(&self, f: &BeamField<T>) -> BeamField<T> {
        self.apply_multiplier(f, |k| -k * k)
    }

    /// Spectral fourth derivative.
    pub fn d4x(&self, f: &BeamField<T>) -> BeamField<T> {
        self.apply_multiplier(f, |k| k * k * k * k)
    }

    /// `∫ |∂_x^p f|²` over one period via Parseval, for even-power use
    /// (`p` in 0..=2). Exact for trigonometric polynomials on the grid.
    pub fn derivative_energy(&self, f: &BeamField<T>, p: u32) -> T {
        let modes = self.forward(f);
        let n = T::from_usize_lossy(self.grid.nx);
        let mut s = T::zero();
        for (j, c) in modes.iter().enumerate() {
            let k2 = {
                let k = self.wavenumber(j);
                k * k
            };
            s += c.norm_sqr() * k2.powi(p as i32);
        }
        s * self.grid.length / (n * n)
    }
}

pub fn wavenumber<T: Real>(grid: &Grid<T>, j: usize) -> T {
    let n = grid.nx;
    let signed = if j <= n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    };
    T::lit(2.0 * std::f64::consts::PI * signed) / grid.length
}

/// Forward transform of a beam function (see module docs for normalization).
pub fn dft_x<T: Real>(f: &BeamField<T>) -> Vec<Complex<T>> {
    LineTransform::new(f.grid).forward(f)
}

/// Inverse of [`dft_x`].
pub fn idft_x<T: Real>(grid: Grid<T>, modes: &[Complex<T>]) -> BeamField<T> {
    LineTransform::new(grid).inverse(modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_lands_in_mode_zero() {
        let grid = Grid::new(8, 4, 1.0f64).unwrap();
        let m = dft_x(&BeamField::constant(grid, 1.0));
        assert!((m[0].re - 8.0).abs() < 1e-14);
        for c in &m[1..] {
            assert!(c.norm() < 1e-14);
        }
    }

    #[test]
    fn cosine_has_two_conjugate_modes() {
        let grid = Grid::new(16, 4, 3.0).unwrap();
        let f = BeamField::from_fn(grid, |x| (2.0 * PI * x / 3.0).cos());
        let m = dft_x(&f);
        let big: Vec<usize> = (0..16).filter(|&j| m[j].norm() > 1e-10).collect();
        assert_eq!(big, vec![1, 15]);
        assert!((m[1] - m[15].conj()).norm() < 1e-12);
        assert!((m[1].re - 8.0).abs() < 1e-12);
    }

    #[test]
    fn wavenumber_convention() {
        let grid = Grid::new(8, 4, 2.0 * PI).unwrap();
        let t = LineTransform::new(grid);
        assert!((t.wavenumber(1) - 1.0).abs() < 1e-15);
        assert!((t.wavenumber(4) - 4.0).abs() < 1e-15);
        assert!((t.wavenumber(7) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_derivatives_exact_on_harmonics() {
        let l = 2.0;
        let grid = Grid::new(16, 4, l).unwrap();
        let k = 2.0 * PI * 3.0 / l;
        let f = BeamField::from_fn(grid, |x| (k * x).sin());
        let t = LineTransform::new(grid);
        let d2 = t.d2x(&f);
        let d4 = t.d4x(&f);
        for i in 0..16 {
            assert!((d2.values[i] + k * k * f.values[i]).abs() < 1e-10);
            assert!((d4.values[i] - k.powi(4) * f.values[i]).abs() < 1e-7);
        }
        let e1 = t.derivative_energy(&f, 1);
        assert!((e1 - k * k * l / 2.0).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec(-1.0e3f64..1.0e3, 4..64)) {
            let grid = Grid::new(values.len(), 4, 1.7).unwrap();
            let f = BeamField::from_values(grid, values.clone()).unwrap();
            let back = idft_x(grid, &dft_x(&f));
            let scale = values.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
            for (a, b) in back.values.iter().zip(&values) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
    }
}
