use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

/// Forward/inverse 1D plans shared by every grid with the same resolution.
pub(crate) struct FftPlans {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

fn plans_for(n: usize) -> Arc<FftPlans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<FftPlans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(FftPlans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Uniform grid on the torus `[-1, 1)^d` with `n` samples per axis.
///
/// Samples sit at `x_j = -1 + 2 j / n`; flat indices are row-major with the
/// last axis fastest.
#[derive(Clone)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    plans: Arc<FftPlans>,
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

impl Eq for TorusGrid {}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish()
    }
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(invalid("dim", format!("must be 1, 2 or 3, got {dim}")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(invalid(
                "n",
                format!("samples per axis must be a power of two >= 4, got {n}"),
            ));
        }
        Ok(Self {
            dim,
            n,
            plans: plans_for(n),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Samples per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Lebesgue measure of the torus, `2^d`.
    pub fn measure(&self) -> f64 {
        2f64.powi(self.dim as i32)
    }

    pub(crate) fn plans(&self) -> &FftPlans {
        &self.plans
    }

    /// Per-axis indices of a flat index (unused axes are zero).
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        (0..self.dim).fold(0, |acc, axis| acc * self.n + idx[axis] % self.n)
    }

    /// Physical coordinates of a grid point.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = -1.0 + self.spacing() * idx[axis] as f64;
        }
        x
    }

    /// Signed integer wavenumber of a 1D FFT index, in `(-n/2, n/2]`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let i = i as i64;
        let n = self.n as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn wavevector(&self, flat: usize) -> [i64; 3] {
        let idx = self.multi_index(flat);
        let mut k = [0i64; 3];
        for axis in 0..self.dim {
            k[axis] = self.wavenumber(idx[axis]);
        }
        k
    }

    /// Flat index of a wavevector (components taken modulo `n`).
    pub fn index_of_wavevector(&self, k: [i64; 3]) -> usize {
        let n = self.n as i64;
        let mut idx = [0usize; 3];
        for axis in 0..self.dim {
            idx[axis] = k[axis].rem_euclid(n) as usize;
        }
        self.flat_index(idx)
    }

    /// Whether an axis wavenumber sits on the Nyquist frequency.
    pub fn is_nyquist(&self, k: i64) -> bool {
        k == (self.n / 2) as i64
    }

    /// Largest wavenumber kept by the 2/3 dealiasing rule (`3|k| < n`).
    pub fn dealias_limit(&self) -> i64 {
        ((self.n - 1) / 3) as i64
    }

    pub fn is_dealiased(&self, k: [i64; 3]) -> bool {
        let lim = self.dealias_limit();
        k[..self.dim].iter().all(|c| c.abs() <= lim)
    }

    /// Flat index of the reflected point `-x`.
    pub fn reflected_index(&self, flat: usize) -> usize {
        let idx = self.multi_index(flat);
        let mut out = [0usize; 3];
        for axis in 0..self.dim {
            out[axis] = (self.n - idx[axis]) % self.n;
        }
        self.flat_index(out)
    }

    /// Flat index of the sample at `x_i - x_j + x_origin`, i.e. the kernel
    /// sample used for the offset between points `i` and `j`.
    pub fn offset_index(&self, i: usize, j: usize) -> usize {
        let a = self.multi_index(i);
        let b = self.multi_index(j);
        let mut out = [0usize; 3];
        for axis in 0..self.dim {
            out[axis] = (a[axis] + self.n + self.n / 2 - b[axis]) % self.n;
        }
        self.flat_index(out)
    }
}
