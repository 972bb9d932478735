//! Trigonometric interpolation of 1-periodic samples on a uniform dyadic grid.
//!
//! A real sample vector `f_j = f(j/N)` is represented by the interpolant
//! `f(t) = Re Σ_{k=0}^{N/2} w_k e^{2πikt}`, where `w_0` and the Nyquist weight
//! carry a single copy and the interior weights are doubled.

use std::cell::RefCell;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Weights below this magnitude are dropped from pointwise evaluation.
const BAND_CUTOFF: f64 = 1e-15;

/// Sample amplitude treated as rounding noise by [`TrigInterpolant::tail_fraction`].
const NOISE_FLOOR: f64 = 1e-13;

fn forward(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

fn inverse(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrigInterpolant {
    samples: Vec<f64>,
    weights: Vec<Complex64>,
    band: usize,
}

impl TrigInterpolant {
    /// Builds the interpolant of `samples`; the length must be a power of two, at least 4.
    pub fn new(samples: Vec<f64>) -> Self {
        let n = samples.len();
        assert!(n >= 4 && n.is_power_of_two(), "grid size must be a power of two >= 4");
        let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        forward(&mut buf);
        let half = n / 2;
        let scale = 1.0 / n as f64;
        let weights: Vec<Complex64> = (0..=half)
            .map(|k| {
                let c = buf[k] * scale;
                if k == 0 || k == half {
                    Complex64::new(c.re, 0.0)
                } else {
                    c * 2.0
                }
            })
            .collect();
        let cutoff = BAND_CUTOFF * weights.iter().fold(1.0f64, |m, w| m.max(w.norm()));
        let band = (0..=half).rev().find(|&k| weights[k].norm() > cutoff).unwrap_or(0);
        Self { samples, weights, band }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Highest wavenumber that contributes to pointwise evaluation.
    pub fn bandwidth(&self) -> usize {
        self.band
    }

    pub fn mean(&self) -> f64 {
        self.weights[0].re
    }

    pub fn eval(&self, t: f64) -> f64 {
        let z = Complex64::from_polar(1.0, TAU * t);
        let mut acc = Complex64::new(0.0, 0.0);
        for w in self.weights[..=self.band].iter().rev() {
            acc = acc * z + w;
        }
        acc.re
    }

    /// Value and first derivative at `t`.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let z = Complex64::from_polar(1.0, TAU * t);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut dacc = Complex64::new(0.0, 0.0);
        for w in self.weights[..=self.band].iter().rev() {
            dacc = dacc * z + acc;
            acc = acc * z + w;
        }
        let d = Complex64::new(0.0, TAU) * z * dacc;
        (acc.re, d.re)
    }

    fn two_sided(&self, order: usize, m: usize) -> Vec<Complex64> {
        let n = self.len();
        let half = n / 2;
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let factor = |k: f64| Complex64::new(0.0, TAU * k).powu(order as u32);
        for k in 0..=half {
            let w = self.weights[k];
            if k == 0 {
                buf[0] = if order == 0 { w } else { Complex64::new(0.0, 0.0) };
            } else if k == half {
                let c = w * 0.5;
                buf[k] += c * factor(k as f64);
                buf[m - k] += c * factor(-(k as f64));
            } else {
                let c = w * 0.5;
                buf[k] = c * factor(k as f64);
                buf[m - k] = c.conj() * factor(-(k as f64));
            }
        }
        buf
    }

    /// Samples of the `order`-th derivative on the grid refined by `refine` (a power of two).
    pub fn derivative_samples(&self, order: usize, refine: usize) -> Vec<f64> {
        assert!(refine >= 1 && refine.is_power_of_two());
        let m = self.len() * refine;
        if order == 0 && refine == 1 {
            return self.samples.clone();
        }
        let mut buf = self.two_sided(order, m);
        inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Sum of the weight magnitudes above `N/4`. For spectra that decay geometrically this
    /// majorizes the pointwise error of evaluating the interpolant between grid points.
    pub fn aliasing_estimate(&self) -> f64 {
        self.weights.iter().skip(self.len() / 4 + 1).map(|w| w.norm()).sum()
    }

    /// Fraction of the `order`-th derivative's spectral energy carried by wavenumbers above
    /// the guard band `N/3`.
    pub fn tail_fraction(&self, order: usize) -> f64 {
        let guard = self.len() / 3;
        let mut total = 0.0;
        let mut tail = 0.0;
        for (k, w) in self.weights.iter().enumerate().skip(1) {
            let e = (w.norm() * (TAU * k as f64).powi(order as i32)).powi(2);
            total += e;
            if k > guard {
                tail += e;
            }
        }
        // rounding noise in the samples, amplified by differentiation, is not a signal
        let floor = (NOISE_FLOOR * (TAU * (self.len() / 2) as f64).powi(order as i32)).powi(2);
        tail / (total + floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|j| j as f64 / n as f64).collect()
    }

    #[test]
    fn reproduces_band_limited_function_off_grid() {
        let f = |t: f64| 0.3 + 0.2 * (TAU * t).cos() - 0.05 * (3.0 * TAU * t).sin();
        let interp = TrigInterpolant::new(grid(32).into_iter().map(f).collect());
        for &t in &[0.013, 0.37, 0.5001, 0.99] {
            assert!((interp.eval(t) - f(t)).abs() < 1e-14);
        }
        assert_eq!(interp.bandwidth(), 3);
        assert!((interp.mean() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_closed_form() {
        let f = |t: f64| (TAU * t).sin() + 0.1 * (2.0 * TAU * t).cos();
        let df = |t: f64| TAU * (TAU * t).cos() - 0.2 * TAU * (2.0 * TAU * t).sin();
        let d2f = |t: f64| -TAU * TAU * (TAU * t).sin() - 0.4 * TAU * TAU * (2.0 * TAU * t).cos();
        let interp = TrigInterpolant::new(grid(16).into_iter().map(f).collect());
        let d1 = interp.derivative_samples(1, 2);
        let d2 = interp.derivative_samples(2, 2);
        for (j, t) in grid(32).into_iter().enumerate() {
            assert!((d1[j] - df(t)).abs() < 1e-12);
            assert!((d2[j] - d2f(t)).abs() < 1e-10);
        }
        let (v, d) = interp.eval_with_derivative(0.123);
        assert!((v - f(0.123)).abs() < 1e-14);
        assert!((d - df(0.123)).abs() < 1e-12);
    }

    #[test]
    fn tail_fraction_flags_rough_samples() {
        let smooth = TrigInterpolant::new(grid(64).iter().map(|t| (TAU * t).sin()).collect());
        assert!(smooth.tail_fraction(2) < 1e-20);
        let rough: Vec<f64> = (0..64).map(|j| if j % 2 == 0 { 1e-3 } else { -1e-3 }).collect();
        assert!(TrigInterpolant::new(rough).tail_fraction(1) > 0.99);
    }

    #[test]
    fn aliasing_estimate_sees_only_the_top_band() {
        let low = TrigInterpolant::new(grid(32).iter().map(|t| 0.1 * (TAU * t).sin()).collect());
        assert!(low.aliasing_estimate() < 1e-16);
        let high = TrigInterpolant::new(grid(32).iter().map(|t| 1e-6 * (12.0 * TAU * t).cos()).collect());
        assert!((high.aliasing_estimate() - 1e-6).abs() < 1e-15);
    }
}
