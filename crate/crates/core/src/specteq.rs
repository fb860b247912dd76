//! Spectrum equalization: estimate the spectral magnitude of the envelope
//! image, turn it into the whitening gain `L = (|H| + eps)^(-1/2)` and apply
//! that gain in the frequency domain.

use std::f64::consts::PI;

use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::image::Image;
use crate::Complex64;

/// Complex frequency grid, DC at `(0, 0)`. Magnitude-only spectra keep `im = 0`.
pub type Spectrum = ComplexGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualizerConfig {
    /// Regularizer added to `|H|` before the inverse square root.
    pub epsilon: f64,
    /// Periodogram block side in pixels (power of two).
    pub block: usize,
    /// Fractional overlap between neighbouring blocks, in `[0, 1)`.
    pub overlap: f64,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        EqualizerConfig {
            epsilon: 0.1,
            block: 32,
            overlap: 0.5,
        }
    }
}

impl EqualizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", "must be positive and finite"));
        }
        if self.block < 2 || !self.block.is_power_of_two() {
            return Err(Error::invalid(
                "block",
                format!("{} is not a power of two >= 2", self.block),
            ));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::invalid("overlap", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// 2-D FFT over a row-major complex buffer.
fn fft2_in_place(data: &mut [Complex64], width: usize, height: usize, direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft(width, direction);
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft(height, direction);
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for x in 0..width {
        for (y, c) in column.iter_mut().enumerate() {
            *c = data[y * width + x];
        }
        col_fft.process(&mut column);
        for (y, c) in column.iter().enumerate() {
            data[y * width + x] = *c;
        }
    }
}

/// Unnormalized forward DFT: `X(k) = sum_n x(n) exp(-2 pi i k.n / N)`.
pub fn dft2(img: &Image) -> Spectrum {
    let (w, h) = img.dims();
    let mut data: Vec<Complex64> = img.pixels().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(&mut data, w, h, FftDirection::Forward);
    Spectrum::from_vec(w, h, data).expect("dims preserved")
}

/// Inverse DFT scaled by `1 / (width * height)`.
///
/// Returns the real part and the largest absolute imaginary residue.
pub fn idft2(spec: &Spectrum) -> Result<(Image, f64)> {
    let (w, h) = spec.dims();
    let mut data = spec.data().to_vec();
    fft2_in_place(&mut data, w, h, FftDirection::Inverse);
    let scale = 1.0 / (w * h) as f64;
    let residue = data.iter().map(|z| (z.im * scale).abs()).fold(0.0, f64::max);
    let img = Image::new(w, h, data.iter().map(|z| z.re * scale).collect())
        .map_err(|_| Error::NonFinite { stage: "idft2" })?;
    Ok((img, residue))
}

/// Periodic Hann window of length `n`.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Block origins covering `0..len` with the given step; the final block is
/// aligned to the end so no samples are skipped.
fn block_origins(len: usize, block: usize, step: usize) -> Vec<usize> {
    let mut origins: Vec<usize> = (0..=len - block).step_by(step).collect();
    if *origins.last().unwrap() != len - block {
        origins.push(len - block);
    }
    origins
}

/// Expected power kept in each bin after removing the block mean, relative to
/// a white input: `1 - |W(k)|^2 / (N * sum w^2)` for the 2-D window `w`.
/// Only the bins inside the window's main lobe around DC are affected.
fn mean_removal_gain(window: &[f64]) -> Vec<f64> {
    let b = window.len();
    let dft_mag: Vec<f64> = (0..b)
        .map(|k| {
            window
                .iter()
                .enumerate()
                .map(|(n, &w)| Complex64::from_polar(w, -2.0 * PI * (k * n) as f64 / b as f64))
                .sum::<Complex64>()
                .norm()
        })
        .collect();
    let energy: f64 = window.iter().map(|w| w * w).sum();
    let norm = (b * b) as f64 * energy * energy;
    let mut gain = vec![0.0; b * b];
    for ky in 0..b {
        for kx in 0..b {
            gain[ky * b + kx] = 1.0 - (dft_mag[kx] * dft_mag[ky]).powi(2) / norm;
        }
    }
    gain
}

/// Welch-style periodogram magnitude on a `block x block` frequency grid.
///
/// Blocks are mean-subtracted and weighted by a separable Hann window. Per
/// bin, `|DFT|^2` is pooled over blocks with the median rather than the mean,
/// so the few blocks that straddle strong object edges do not pass their
/// spectrum off as speckle correlation. The pooled power is corrected for
/// what the mean removal takes out of the bins next to DC (a white input
/// gives a flat map), square-rooted and scaled so the largest bin is 1.
/// A featureless (constant) image yields an all-zero map.
pub fn estimate_spectrum_magnitude(img: &Image, cfg: &EqualizerConfig) -> Result<Spectrum> {
    cfg.validate()?;
    let b = cfg.block;
    let (w, h) = img.dims();
    if w < b || h < b {
        return Err(Error::invalid(
            "image dimensions",
            format!("{w}x{h} is smaller than the {b}x{b} periodogram block"),
        ));
    }
    let step = (((b as f64) * (1.0 - cfg.overlap)).round() as usize).max(1);
    let window = hann(b);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft(b, FftDirection::Forward);
    // Per-block power, block-major; f32 keeps large images affordable.
    let mut power: Vec<f32> = Vec::new();
    let mut buf = vec![Complex64::new(0.0, 0.0); b * b];
    let mut column = vec![Complex64::new(0.0, 0.0); b];
    let mut block_power = vec![0.0f32; b * b];
    let mut count = 0usize;

    for &oy in &block_origins(h, b, step) {
        for &ox in &block_origins(w, b, step) {
            let mut mean = 0.0;
            for y in 0..b {
                mean += img.pixels()[(oy + y) * w + ox..(oy + y) * w + ox + b]
                    .iter()
                    .sum::<f64>();
            }
            mean /= (b * b) as f64;
            for y in 0..b {
                for x in 0..b {
                    let v = img.get(ox + x, oy + y) - mean;
                    buf[y * b + x] = Complex64::new(v * window[x] * window[y], 0.0);
                }
            }
            for row in buf.chunks_exact_mut(b) {
                fft.process(row);
            }
            for x in 0..b {
                for (y, c) in column.iter_mut().enumerate() {
                    *c = buf[y * b + x];
                }
                fft.process(&mut column);
                for (y, c) in column.iter().enumerate() {
                    block_power[y * b + x] = c.norm_sqr() as f32;
                }
            }
            power.extend_from_slice(&block_power);
            count += 1;
        }
    }

    let bias = mean_removal_gain(&window);
    let mut samples = vec![0.0f32; count];
    let mag: Vec<f64> = (0..b * b)
        .map(|bin| {
            for (k, s) in samples.iter_mut().enumerate() {
                *s = power[k * b * b + bin];
            }
            let (_, &mut median, _) = samples.select_nth_unstable_by(count / 2, f32::total_cmp);
            (median as f64 / bias[bin]).sqrt()
        })
        .collect();
    let peak = mag.iter().copied().fold(0.0, f64::max);
    let data = mag
        .iter()
        .map(|&m| Complex64::new(if peak > 0.0 { m / peak } else { 0.0 }, 0.0))
        .collect();
    Spectrum::from_vec(b, b, data)
}

/// Signed frequency of bin `k` on an `n`-point grid, in cycles per sample.
#[inline]
fn signed_frequency(k: usize, n: usize) -> f64 {
    let k = k as f64;
    let n_f = n as f64;
    if k <= n_f / 2.0 {
        k / n_f
    } else {
        (k - n_f) / n_f
    }
}

/// Bilinear resampling of a magnitude spectrum onto a `width x height`
/// frequency grid. Interpolation runs over signed frequencies and wraps
/// across the Nyquist edge.
pub fn resample_magnitude(mag: &Spectrum, width: usize, height: usize) -> Spectrum {
    let (bw, bh) = mag.dims();
    let lookup = |u: isize, v: isize| {
        mag.get(u.rem_euclid(bw as isize) as usize, v.rem_euclid(bh as isize) as usize)
            .norm()
    };
    Spectrum::from_fn(width, height, |kx, ky| {
        let u = signed_frequency(kx, width) * bw as f64;
        let v = signed_frequency(ky, height) * bh as f64;
        let (u0, v0) = (u.floor(), v.floor());
        let (fu, fv) = (u - u0, v - v0);
        let (u0, v0) = (u0 as isize, v0 as isize);
        let val = (1.0 - fu) * (1.0 - fv) * lookup(u0, v0)
            + fu * (1.0 - fv) * lookup(u0 + 1, v0)
            + (1.0 - fu) * fv * lookup(u0, v0 + 1)
            + fu * fv * lookup(u0 + 1, v0 + 1);
        Complex64::new(val, 0.0)
    })
}

/// Whitening gain `L = (|H| + epsilon)^(-1/2)` per bin (real-valued).
pub fn build_equalizer(mag_h: &Spectrum, epsilon: f64) -> Result<Spectrum> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", "must be positive and finite"));
    }
    Ok(mag_h.map(|h| Complex64::new((h.norm() + epsilon).powf(-0.5), 0.0)))
}

/// Filters `img` with the real gain `gain` in the frequency domain.
///
/// The gain is rescaled so its DC value is 1, which keeps the image mean.
/// The result is floored at `1e-6 * max` to stay strictly positive; if the
/// floor moved the mean, the image is rescaled back to the input mean.
pub fn apply_equalizer(img: &Image, gain: &Spectrum) -> Result<Image> {
    gain.ensure_dims(img.dims())?;
    let dc_gain = gain.get(0, 0).re;
    if let Some(bad) = gain.data().iter().find(|g| !(g.re >= 0.0 && g.re.is_finite())) {
        return Err(Error::invalid(
            "equalizer gain",
            format!("bin value {bad} is not a finite nonnegative real"),
        ));
    }
    if dc_gain <= 0.0 {
        return Err(Error::invalid("equalizer gain", "DC gain must be positive"));
    }

    let mut spec = dft2(img);
    for (x, g) in spec.data_mut().iter_mut().zip(gain.data()) {
        *x *= g.re / dc_gain;
    }
    let (filtered, _) = idft2(&spec)?;

    let input_mean = img.mean();
    let floor = 1e-6 * filtered.max().max(0.0);
    let mut out: Vec<f64> = filtered.pixels().iter().map(|&v| v.max(floor)).collect();
    if floor == 0.0 {
        // Degenerate all-nonpositive result: nothing sensible to preserve.
        return Image::new(img.width(), img.height(), out);
    }
    let out_mean = out.iter().sum::<f64>() / out.len() as f64;
    if out_mean != input_mean && out_mean > 0.0 {
        let s = input_mean / out_mean;
        out.iter_mut().for_each(|v| *v *= s);
    }
    Image::new(img.width(), img.height(), out).map_err(|_| Error::NonFinite {
        stage: "spectrum equalization",
    })
}

/// Estimates `|H|` from `img` itself and applies the resulting whitening filter.
pub fn equalize(img: &Image, cfg: &EqualizerConfig) -> Result<Image> {
    let mag = estimate_spectrum_magnitude(img, cfg)?;
    let full = resample_magnitude(&mag, img.width(), img.height());
    let gain = build_equalizer(&full, cfg.epsilon)?;
    apply_equalizer(img, &gain)
}
