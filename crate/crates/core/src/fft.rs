//! Square 2D complex FFTs built from rustfft row transforms.
//!
//! Plans are cached per size and shared read-only; every call allocates its
//! own scratch, so concurrent transforms never share mutable state.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Rows handed to one rayon task.
const BAND: usize = 16;

pub(crate) fn plan(n: usize) -> Arc<Fft2> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft2>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Fft2 {
                n,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

impl Fft2 {
    fn rows(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        data.par_chunks_mut(n * BAND).for_each(|band| {
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for row in band.chunks_exact_mut(n) {
                // dealiased spectra carry whole rows of zeros
                if row.iter().any(|z| z.re != 0.0 || z.im != 0.0) {
                    fft.process_with_scratch(row, &mut scratch);
                }
            }
        });
    }

    fn transpose(&self, data: &mut [Complex64]) {
        const TILE: usize = 32;
        let n = self.n;
        for bi in (0..n).step_by(TILE) {
            for bj in (bi..n).step_by(TILE) {
                for i in bi..(bi + TILE).min(n) {
                    let j0 = if bi == bj { i + 1 } else { bj };
                    for j in j0..(bj + TILE).min(n) {
                        data.swap(i * n + j, j * n + i);
                    }
                }
            }
        }
    }

    fn run(&self, data: &mut Array2<Complex64>, fft: &Arc<dyn Fft<f64>>) {
        let slice = data
            .as_slice_mut()
            .expect("spectral arrays are always in standard layout");
        self.rows(slice, fft);
        self.transpose(slice);
        self.rows(slice, fft);
        self.transpose(slice);
    }

    /// Unnormalized forward transform in place.
    pub(crate) fn forward(&self, data: &mut Array2<Complex64>) {
        let fwd = self.forward.clone();
        self.run(data, &fwd);
    }

    /// Unnormalized inverse transform in place.
    pub(crate) fn inverse(&self, data: &mut Array2<Complex64>) {
        let inv = self.inverse.clone();
        self.run(data, &inv);
    }

    /// Coefficients of a real field, normalized so that coefficient zero is the mean.
    pub(crate) fn analyze(&self, samples: &Array2<f64>) -> Array2<Complex64> {
        let mut data = samples.mapv(|x| Complex64::new(x, 0.0));
        self.forward(&mut data);
        let scale = 1.0 / (self.n * self.n) as f64;
        data.mapv_inplace(|c| c * scale);
        data
    }

    /// Two real fields analyzed with one complex transform.
    pub(crate) fn analyze_pair(
        &self,
        a: &Array2<f64>,
        b: &Array2<f64>,
    ) -> (Array2<Complex64>, Array2<Complex64>) {
        let n = self.n;
        let mut packed = Zip::from(a).and(b).map_collect(|&x, &y| Complex64::new(x, y));
        self.forward(&mut packed);
        let scale = 0.5 / (n * n) as f64;
        let p = packed.as_slice().expect("standard layout");
        let mut oa = Vec::with_capacity(n * n);
        let mut ob = Vec::with_capacity(n * n);
        for i in 0..n {
            let mi = (n - i) % n;
            for j in 0..n {
                let mj = (n - j) % n;
                let c = p[i * n + j];
                let m = p[mi * n + mj].conj();
                oa.push((c + m) * scale);
                // (c - m) / (2i)
                let d = c - m;
                ob.push(Complex64::new(d.im, -d.re) * scale);
            }
        }
        let shape = |v| Array2::from_shape_vec((n, n), v).expect("n*n entries");
        (shape(oa), shape(ob))
    }

    /// Real samples from normalized coefficients.
    pub(crate) fn synthesize(&self, coeffs: &Array2<Complex64>) -> Array2<f64> {
        let mut data = coeffs.clone();
        self.inverse(&mut data);
        data.mapv(|c| c.re)
    }

    /// Two real fields synthesized with one complex transform.
    pub(crate) fn synthesize_pair(
        &self,
        a: &Array2<Complex64>,
        b: &Array2<Complex64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let mut packed = Zip::from(a)
            .and(b)
            .map_collect(|&x, &y| Complex64::new(x.re - y.im, x.im + y.re));
        self.inverse(&mut packed);
        (packed.mapv(|c| c.re), packed.mapv(|c| c.im))
    }
}
