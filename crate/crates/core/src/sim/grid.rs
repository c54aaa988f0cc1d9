//! Fourier × staggered finite-difference grid.
//!
//! Vertical nodes `y_j = jΔy` (`j = 0..=Ny`) carry the streamfunction and `v₂`;
//! cell centres `y_{j+½}` carry `ϱ`, `v₁` and the pressure. Physical arrays are
//! row-major with `y` outer and `x` inner; spectral arrays hold the `Nx/2 + 1`
//! non-negative wavenumbers per row.

use std::f64::consts::PI;
use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{NskError, Result};
use crate::par;

pub type C64 = Complex64;

#[derive(Clone, Debug)]
pub struct SlabGrid {
    pub nx: usize,
    pub ny: usize,
    /// `nx/2 + 1` stored wavenumbers.
    pub nk: usize,
    /// Highest retained wavenumber index.
    pub kmax: usize,
    pub lx: f64,
    pub dx: f64,
    pub dy: f64,
    pub h: f64,
    pub l: f64,
    /// `ξ_k = k/L`.
    pub xi: Vec<f64>,
    pub x: Vec<f64>,
    pub y_nodes: Vec<f64>,
    pub y_centres: Vec<f64>,
}

impl SlabGrid {
    pub fn new(nx: usize, ny: usize, l: f64, h: f64, dealias: bool) -> Result<Self> {
        if nx < 4 || !nx.is_power_of_two() {
            return Err(NskError::InvalidConfig(format!("Nx must be a power of two >= 4, got {nx}")));
        }
        if ny < 16 {
            return Err(NskError::InvalidConfig(format!("Ny must be >= 16, got {ny}")));
        }
        let lx = 2.0 * PI * l;
        let dx = lx / nx as f64;
        let dy = h / ny as f64;
        let nk = nx / 2 + 1;
        let kmax = if dealias { nx / 3 } else { nx / 2 - 1 };
        Ok(SlabGrid {
            nx,
            ny,
            nk,
            kmax,
            lx,
            dx,
            dy,
            h,
            l,
            xi: (0..nk).map(|k| k as f64 / l).collect(),
            x: (0..nx).map(|i| i as f64 * dx).collect(),
            y_nodes: (0..=ny).map(|j| j as f64 * dy).collect(),
            y_centres: (0..ny).map(|j| (j as f64 + 0.5) * dy).collect(),
        })
    }

    pub fn centre_len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn node_len(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    /// Area element `Δx Δy`.
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Parseval weight of a stored wavenumber: 1 for the mean and Nyquist, else 2.
    pub fn mode_weight(&self, k: usize) -> f64 {
        if k == 0 || 2 * k == self.nx {
            1.0
        } else {
            2.0
        }
    }
}

/// Row-wise real FFTs. The forward transform is scaled by `1/Nx` so that
/// coefficients are Fourier amplitudes.
#[derive(Clone)]
pub struct RowFft {
    nx: usize,
    nk: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
}

impl RowFft {
    pub fn new(nx: usize) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        RowFft { nx, nk: nx / 2 + 1, r2c: planner.plan_fft_forward(nx), c2r: planner.plan_fft_inverse(nx) }
    }

    pub fn forward(&self, phys: &[f64]) -> Vec<C64> {
        let rows = phys.len() / self.nx;
        let mut out = vec![C64::new(0.0, 0.0); rows * self.nk];
        let scale = 1.0 / self.nx as f64;
        let nx = self.nx;
        par::for_each_row(&mut out, self.nk, |r, o| {
            let mut buf = phys[r * nx..(r + 1) * nx].to_vec();
            self.r2c.process(&mut buf, o).expect("forward fft");
            o.iter_mut().for_each(|c| *c *= scale);
        });
        out
    }

    pub fn inverse(&self, spec: &[C64]) -> Vec<f64> {
        let rows = spec.len() / self.nk;
        let mut out = vec![0.0; rows * self.nx];
        let nk = self.nk;
        par::for_each_row(&mut out, self.nx, |r, o| {
            let mut buf = spec[r * nk..(r + 1) * nk].to_vec();
            buf[0].im = 0.0;
            buf[nk - 1].im = 0.0;
            self.c2r.process(&mut buf, o).expect("inverse fft");
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_round_trip_and_amplitude() {
        let nx = 16;
        let fft = RowFft::new(nx);
        let g = SlabGrid::new(nx, 16, 1.0, 1.0, false).unwrap();
        let f: Vec<f64> = g.x.iter().map(|x| 0.5 + 2.0 * (3.0 * x).cos()).collect();
        let s = fft.forward(&f);
        assert!((s[0].re - 0.5).abs() < 1e-14);
        assert!((s[3].re - 1.0).abs() < 1e-14);
        let back = fft.inverse(&s);
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(SlabGrid::new(12, 16, 1.0, 1.0, false).is_err());
        assert!(SlabGrid::new(16, 8, 1.0, 1.0, false).is_err());
    }
}
