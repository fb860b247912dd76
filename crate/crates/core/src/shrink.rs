//! Adaptive MAP shrinkage of complex wavelet coefficients.
//!
//! Each coefficient `Y` is shrunk in magnitude by
//! `T = sqrt(3) * exp(K) * sigma_n^2 / S`, where `S` is a local signal scale and
//! `K = cos^2(NC * pi / 2)` is driven by the normalised interscale product of
//! the coefficient with its parent. Strong parent/child evidence (NC near 1)
//! gives `K` near 0 and the smallest threshold.

use std::f64::consts::PI;

use crate::dtcwt::DtcwtPyramid;
use crate::error::{Error, Result};
use crate::grid::{reflect, ComplexGrid, RealGrid};
use crate::Complex64;

/// Median absolute deviation to standard deviation for a Gaussian.
pub const MAD_TO_SIGMA: f64 = 0.6745;

pub const DEFAULT_WINDOW: usize = 7;

/// Per-subband parameters of the shrinkage rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageParams {
    /// Noise variance per real/imaginary component.
    pub sigma_n2: f64,
    pub s_map: RealGrid,
    pub k_map: RealGrid,
    pub s_floor: f64,
}

impl ShrinkageParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_n2 >= 0.0 && self.sigma_n2.is_finite()) {
            return Err(Error::invalid("sigma_n2", format!("{} is not a finite value >= 0", self.sigma_n2)));
        }
        if !(self.s_floor > 0.0 && self.s_floor.is_finite()) {
            return Err(Error::invalid("s_floor", format!("{} is not positive", self.s_floor)));
        }
        self.k_map.ensure_dims(self.s_map.dims())?;
        if let Some(s) = self.s_map.data().iter().find(|&&s| !(s >= self.s_floor) || !s.is_finite()) {
            return Err(Error::invalid("s_map", format!("value {s} below floor {}", self.s_floor)));
        }
        if let Some(k) = self.k_map.data().iter().find(|&&k| !(0.0..=1.0).contains(&k)) {
            return Err(Error::invalid("k_map", format!("value {k} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Interscale product `C = |parent| * |child|` and its per-subband normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct InterscaleField {
    pub c_grid: RealGrid,
    pub nc_grid: RealGrid,
}

impl InterscaleField {
    pub fn k_map(&self) -> RealGrid {
        self.nc_grid.map(|&nc| k_unchecked(nc))
    }
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let (_, &mut hi, _) = values.select_nth_unstable_by(n / 2, f64::total_cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = values[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Robust noise variance from the finest level: `(median |v| / 0.6745)^2`
/// over the real and imaginary parts of all six subbands.
pub fn estimate_noise_sigma2(pyr: &DtcwtPyramid) -> Result<f64> {
    let finest = pyr
        .subbands
        .first()
        .filter(|level| level.iter().any(|b| !b.data().is_empty()))
        .ok_or_else(|| Error::invalid("pyramid", "no detail coefficients to estimate noise from"))?;
    let mut values: Vec<f64> = finest
        .iter()
        .flat_map(|b| b.data().iter().flat_map(|z| [z.re.abs(), z.im.abs()]))
        .collect();
    let sigma = median(&mut values) / MAD_TO_SIGMA;
    Ok(sigma * sigma)
}

/// Division guard for `S`: `1e-6 * (max |Y| + 1e-300)`.
pub fn signal_floor(subband: &ComplexGrid) -> f64 {
    1e-6 * (subband.max_magnitude() + 1e-300)
}

/// Mean of `values` over a `window x window` neighbourhood with half-sample
/// symmetric extension. Separable running sums.
fn local_mean(values: &RealGrid, window: usize) -> RealGrid {
    let (w, h) = values.dims();
    let r = (window / 2) as isize;
    let box_1d = |src: &[f64], dst: &mut [f64]| {
        let n = src.len();
        let mut acc: f64 = (-r..=r).map(|k| src[reflect(k, n)]).sum();
        for (i, d) in dst.iter_mut().enumerate() {
            *d = acc;
            let i = i as isize;
            acc += src[reflect(i + r + 1, n)] - src[reflect(i - r, n)];
        }
    };
    let mut rows = RealGrid::filled(w, h, 0.0);
    for y in 0..h {
        let start = y * w;
        box_1d(values.row(y), &mut rows.data_mut()[start..start + w]);
    }
    let mut out = RealGrid::filled(w, h, 0.0);
    let (mut col, mut col_out) = (vec![0.0; h], vec![0.0; h]);
    let scale = 1.0 / (window * window) as f64;
    for x in 0..w {
        for (y, c) in col.iter_mut().enumerate() {
            *c = *rows.get(x, y);
        }
        box_1d(&col, &mut col_out);
        for (y, v) in col_out.iter().enumerate() {
            *out.get_mut(x, y) = v * scale;
        }
    }
    out
}

fn check_window(window: usize) -> Result<()> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::invalid("window", format!("{window} must be odd and >= 3")));
    }
    Ok(())
}

/// Per-component signal variance from a complex second moment:
/// `E|Y|^2 = E|X|^2 + 2 sigma_n^2` and `E|X|^2 = 2 s^2` for a circular signal.
#[inline]
pub fn component_signal_variance(second_moment: f64, sigma_n2: f64) -> f64 {
    0.5 * (second_moment - 2.0 * sigma_n2)
}

/// Local signal scale `S`, the per-component standard deviation of the
/// bivariate Laplacian prior: `S = sqrt(max((mean_window |Y|^2 - 2 sigma_n^2) / 2, floor^2))`.
pub fn estimate_signal_s(subband: &ComplexGrid, sigma_n2: f64, window: usize) -> Result<RealGrid> {
    check_window(window)?;
    if !(sigma_n2 >= 0.0 && sigma_n2.is_finite()) {
        return Err(Error::invalid("sigma_n2", format!("{sigma_n2} is not a finite value >= 0")));
    }
    let floor2 = signal_floor(subband).powi(2);
    let energy = local_mean(&subband.map(|z| z.norm_sqr()), window);
    Ok(energy.map(|&e| component_signal_variance(e, sigma_n2).max(floor2).sqrt()))
}

fn normalise(c_grid: RealGrid) -> InterscaleField {
    let max = c_grid.data().iter().copied().fold(0.0, f64::max);
    let nc_grid = if max > 0.0 {
        c_grid.map(|&c| (c / max).min(1.0))
    } else {
        c_grid.map(|_| 0.0)
    };
    InterscaleField { c_grid, nc_grid }
}

/// Interscale product with a parent one level coarser (2x2 replication).
pub fn interscale_product(child: &ComplexGrid, parent: &ComplexGrid) -> Result<InterscaleField> {
    let (cw, ch) = child.dims();
    let expected = (cw.div_ceil(2), ch.div_ceil(2));
    if parent.dims() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: parent.dims(),
        });
    }
    let c = RealGrid::from_fn(cw, ch, |x, y| parent.get(x / 2, y / 2).norm() * child.get(x, y).norm());
    Ok(normalise(c))
}

/// Interscale product against a real magnitude map of any size, resampled to
/// the child grid by nearest neighbour. Used at the coarsest level, where the
/// lowpass stands in for the missing detail parent.
pub fn interscale_product_with_magnitude(child: &ComplexGrid, parent: &RealGrid) -> Result<InterscaleField> {
    let (cw, ch) = child.dims();
    let (pw, ph) = parent.dims();
    if pw == 0 || ph == 0 {
        return Err(Error::invalid("parent", "empty magnitude map"));
    }
    let c = RealGrid::from_fn(cw, ch, |x, y| {
        let (px, py) = (x * pw / cw, y * ph / ch);
        parent.get(px, py).abs() * child.get(x, y).norm()
    });
    Ok(normalise(c))
}

fn k_unchecked(nc: f64) -> f64 {
    // cos^2(nc * pi / 2) in a form that is exact at nc = 0, 1/2 and 1
    (0.5 * (1.0 + (PI * nc).cos())).max(0.0)
}

/// `K = cos^2(nc * pi / 2)`, the probability of the noise state.
pub fn compute_k(nc: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&nc) {
        return Err(Error::invalid("nc", format!("{nc} outside [0, 1]")));
    }
    Ok(k_unchecked(nc))
}

/// Shrinkage amount `sqrt(3) * exp(K) * sigma_n^2 / S`.
pub fn threshold(sigma_n2: f64, s: f64, k: f64) -> f64 {
    3f64.sqrt() * k.exp() * sigma_n2 / s
}

/// Single-coefficient update: magnitude reduced by `t`, phase kept.
#[inline]
pub fn shrink_coefficient(y: Complex64, t: f64) -> Complex64 {
    let m = y.norm();
    if m == 0.0 || m <= t {
        Complex64::new(0.0, 0.0)
    } else {
        y * ((m - t) / m)
    }
}

pub fn shrink_subband(subband: &ComplexGrid, params: &ShrinkageParams) -> Result<ComplexGrid> {
    params.validate()?;
    params.s_map.ensure_dims(subband.dims())?;
    let data = subband
        .data()
        .iter()
        .zip(params.s_map.data())
        .zip(params.k_map.data())
        .map(|((&y, &s), &k)| shrink_coefficient(y, threshold(params.sigma_n2, s, k)))
        .collect();
    ComplexGrid::from_vec(subband.width(), subband.height(), data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkConfig {
    /// Side of the square window for `S`.
    pub window: usize,
    /// Overrides the MAD noise estimate.
    pub sigma_n2: Option<f64>,
}

impl Default for ShrinkConfig {
    fn default() -> Self {
        ShrinkConfig {
            window: DEFAULT_WINDOW,
            sigma_n2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkOutcome {
    pub pyramid: DtcwtPyramid,
    pub sigma_n2: f64,
    /// Mean of `K` over all subbands of each level, finest first.
    pub mean_k: Vec<f64>,
}

/// Shrinks every directional subband; the lowpass is passed through.
pub fn shrink_pyramid(pyr: &DtcwtPyramid, cfg: &ShrinkConfig) -> Result<ShrinkOutcome> {
    pyr.validate()?;
    check_window(cfg.window)?;
    let sigma_n2 = match cfg.sigma_n2 {
        Some(v) if v >= 0.0 && v.is_finite() => v,
        Some(v) => return Err(Error::invalid("sigma_n2", format!("{v} is not a finite value >= 0"))),
        None => estimate_noise_sigma2(pyr)?,
    };
    let levels = pyr.levels();
    let lowpass_mag = pyr.lowpass_magnitude();
    let mut subbands = Vec::with_capacity(levels);
    let mut mean_k = Vec::with_capacity(levels);
    for (s, level) in pyr.subbands.iter().enumerate() {
        let mut out_level = Vec::with_capacity(level.len());
        let (mut k_sum, mut k_count) = (0.0, 0usize);
        for (d, band) in level.iter().enumerate() {
            let field = if s + 1 < levels {
                interscale_product(band, &pyr.subbands[s + 1][d])?
            } else {
                interscale_product_with_magnitude(band, &lowpass_mag)?
            };
            let params = ShrinkageParams {
                sigma_n2,
                s_map: estimate_signal_s(band, sigma_n2, cfg.window)?,
                k_map: field.k_map(),
                s_floor: signal_floor(band),
            };
            k_sum += params.k_map.data().iter().sum::<f64>();
            k_count += params.k_map.data().len();
            out_level.push(shrink_subband(band, &params)?);
        }
        mean_k.push(k_sum / k_count.max(1) as f64);
        subbands.push(out_level);
    }
    Ok(ShrinkOutcome {
        pyramid: DtcwtPyramid {
            subbands,
            lowpass: pyr.lowpass.clone(),
            original_dims: pyr.original_dims,
        },
        sigma_n2,
        mean_k,
    })
}
