//! Minimal 3-D FFT engine over the tensor grid, with cached plans and
//! scratch buffers. Layout: `index = (i1 * n2 + i2) * n3 + j`, axis 3
//! contiguous.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GridDims {
    pub n1: usize,
    pub n2: usize,
    pub n_theta: usize,
}

impl GridDims {
    pub fn new(n1: usize, n2: usize, n_theta: usize) -> Self {
        GridDims { n1, n2, n_theta }
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2 * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i1: usize, i2: usize, j: usize) -> usize {
        (i1 * self.n2 + i2) * self.n_theta + j
    }

    /// Signed positional mode of the flat FFT index along axis 1 / 2.
    pub fn kvec_of(&self, m1: usize, m2: usize) -> (i64, i64) {
        (signed(m1, self.n1), signed(m2, self.n2))
    }

    pub fn theta_mode_of(&self, m3: usize) -> i64 {
        signed(m3, self.n_theta)
    }
}

pub fn signed(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

pub struct Fft3 {
    pub dims: GridDims,
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
    scratch: Vec<Complex64>,
    line: Vec<Complex64>,
}

impl Fft3 {
    pub fn new(dims: GridDims) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = [
            planner.plan_fft_forward(dims.n1),
            planner.plan_fft_forward(dims.n2),
            planner.plan_fft_forward(dims.n_theta),
        ];
        let inv = [
            planner.plan_fft_inverse(dims.n1),
            planner.plan_fft_inverse(dims.n2),
            planner.plan_fft_inverse(dims.n_theta),
        ];
        let max_scratch = fwd
            .iter()
            .chain(inv.iter())
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let max_line = dims.n1.max(dims.n2);
        Fft3 {
            dims,
            fwd,
            inv,
            scratch: vec![Complex64::ZERO; max_scratch],
            line: vec![Complex64::ZERO; max_line],
        }
    }

    fn transform_axis3(&mut self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv[2] } else { &self.fwd[2] };
        for chunk in data.chunks_exact_mut(self.dims.n_theta) {
            plan.process_with_scratch(chunk, &mut self.scratch);
        }
    }

    fn transform_axis2(&mut self, data: &mut [Complex64], inverse: bool) {
        let (n1, n2, n3) = (self.dims.n1, self.dims.n2, self.dims.n_theta);
        let plan = if inverse { &self.inv[1] } else { &self.fwd[1] };
        for i1 in 0..n1 {
            for j in 0..n3 {
                let base = i1 * n2 * n3 + j;
                for i2 in 0..n2 {
                    self.line[i2] = data[base + i2 * n3];
                }
                plan.process_with_scratch(&mut self.line[..n2], &mut self.scratch);
                for i2 in 0..n2 {
                    data[base + i2 * n3] = self.line[i2];
                }
            }
        }
    }

    fn transform_axis1(&mut self, data: &mut [Complex64], inverse: bool) {
        let (n1, n2, n3) = (self.dims.n1, self.dims.n2, self.dims.n_theta);
        let plan = if inverse { &self.inv[0] } else { &self.fwd[0] };
        let stride = n2 * n3;
        for rest in 0..stride {
            for i1 in 0..n1 {
                self.line[i1] = data[rest + i1 * stride];
            }
            plan.process_with_scratch(&mut self.line[..n1], &mut self.scratch);
            for i1 in 0..n1 {
                data[rest + i1 * stride] = self.line[i1];
            }
        }
    }

    /// In-place forward transform of a complex buffer; output is normalized
    /// so entries are the coefficients of `exp(2 pi i k.x) exp(i n theta)`.
    pub fn forward_c(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.dims.len());
        self.transform_axis3(data, false);
        self.transform_axis2(data, false);
        self.transform_axis1(data, false);
        let scale = 1.0 / self.dims.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// In-place synthesis (no further normalization).
    pub fn inverse_c(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.dims.len());
        self.transform_axis3(data, true);
        self.transform_axis2(data, true);
        self.transform_axis1(data, true);
    }

    pub fn forward(&mut self, grid: &[f64], spec: &mut Vec<Complex64>) {
        spec.clear();
        spec.extend(grid.iter().map(|&v| Complex64::new(v, 0.0)));
        self.forward_c(spec);
    }

    /// Synthesize into a real grid, discarding the (roundoff-level)
    /// imaginary part.
    pub fn inverse_into(&mut self, spec: &[Complex64], grid: &mut [f64]) {
        assert_eq!(grid.len(), spec.len());
        let mut buf = spec.to_vec();
        self.inverse_c(&mut buf);
        for (g, v) in grid.iter_mut().zip(buf.iter()) {
            *g = v.re;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_single_mode() {
        let dims = GridDims::new(8, 4, 16);
        let mut fft = Fft3::new(dims);
        let grid: Vec<f64> = (0..dims.len()).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let mut spec = Vec::new();
        fft.forward(&grid, &mut spec);
        let mut back = vec![0.0; dims.len()];
        fft.inverse_into(&spec, &mut back);
        for (a, b) in grid.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }

        // a pure mode lands on a single coefficient
        use std::f64::consts::PI;
        let pure: Vec<f64> = (0..dims.n1)
            .flat_map(|i1| {
                (0..dims.n2).flat_map(move |_i2| {
                    (0..dims.n_theta).map(move |j| {
                        let x1 = i1 as f64 / 8.0;
                        let th = 2.0 * PI * j as f64 / 16.0;
                        (2.0 * PI * 2.0 * x1 + 3.0 * th).cos()
                    })
                })
            })
            .collect();
        fft.forward(&pure, &mut spec);
        let idx = dims.idx(2, 0, 3);
        assert!((spec[idx] - Complex64::new(0.5, 0.0)).norm() < 1e-12);
    }
}
