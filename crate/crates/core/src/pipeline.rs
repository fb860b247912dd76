//! End-to-end despeckling and the two reference baselines.
//!
//! `despeckle` runs: spectrum equalization, `ln(p + lambda)`, forward DTCWT,
//! adaptive MAP shrinkage, inverse DTCWT, `exp(.) - lambda`, then clamps to
//! non-negative values and restores the input mean.

use crate::dtcwt::{self, default_filter_bank, DtcwtPyramid, FilterBank};
use crate::error::{Error, Result};
use crate::grid::reflect;
use crate::image::Image;
use crate::shrink::{self, ShrinkConfig};
use crate::specteq::{equalize, EqualizerConfig};
use crate::Complex64;

pub const DEFAULT_LEVELS: usize = 3;
pub const MAX_PIPELINE_LEVELS: usize = 5;
pub const DEFAULT_FROST_WINDOW: usize = 5;
pub const DEFAULT_FROST_DAMPING: f64 = 1.0;

/// Relative offset added before the log, as a fraction of the image max.
const LOG_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub levels: usize,
    pub equalizer: EqualizerConfig,
    /// Window side for the local signal scale.
    pub window: usize,
    pub enable_equalization: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            levels: DEFAULT_LEVELS,
            equalizer: EqualizerConfig::default(),
            window: shrink::DEFAULT_WINDOW,
            enable_equalization: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_PIPELINE_LEVELS).contains(&self.levels) {
            return Err(Error::invalid(
                "levels",
                format!("{} outside 1..={MAX_PIPELINE_LEVELS}", self.levels),
            ));
        }
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::invalid("window", format!("{} must be odd and >= 3", self.window)));
        }
        self.equalizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DespeckleReport {
    pub output: Image,
    pub sigma_n2: f64,
    /// Mean `K` per level, finest first.
    pub mean_k: Vec<f64>,
    pub equalizer_epsilon: f64,
}

fn check_finite(img: &Image, stage: &'static str) -> Result<()> {
    // Image enforces finiteness on construction; this guards intermediate buffers.
    if img.pixels().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { stage })
    }
}

fn finite_image(w: usize, h: usize, data: Vec<f64>, stage: &'static str) -> Result<Image> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { stage });
    }
    Image::new(w, h, data)
}

/// Log transform shared by both wavelet methods. Returns the log image and `lambda`.
fn log_domain(img: &Image) -> Result<(Image, f64)> {
    let lambda = LOG_GUARD * img.max();
    let (w, h) = img.dims();
    let data = img.pixels().iter().map(|&p| (p + lambda).ln()).collect();
    Ok((finite_image(w, h, data, "log transform")?, lambda))
}

/// `exp(.) - lambda`, clamp at zero, rescale to `target_mean`.
fn from_log_domain(log_img: &Image, lambda: f64, target_mean: f64) -> Result<Image> {
    let (w, h) = log_img.dims();
    let mut data: Vec<f64> = log_img.pixels().iter().map(|&v| (v.exp() - lambda).max(0.0)).collect();
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    if mean > 0.0 && mean.is_finite() {
        let s = target_mean / mean;
        data.iter_mut().for_each(|v| *v *= s);
    }
    finite_image(w, h, data, "exponential")
}

/// Zero image for inputs without any energy: `ln(0)` has no meaning there.
fn all_zero(img: &Image) -> bool {
    img.max() == 0.0
}

/// Runs the full despeckling chain on a non-negative image.
pub fn despeckle(img: &Image, cfg: &PipelineConfig) -> Result<DespeckleReport> {
    despeckle_with(img, cfg, &default_filter_bank())
}

pub fn despeckle_with(img: &Image, cfg: &PipelineConfig, fb: &FilterBank) -> Result<DespeckleReport> {
    cfg.validate()?;
    img.ensure_nonnegative()?;
    if all_zero(img) {
        return Ok(DespeckleReport {
            output: img.clone(),
            sigma_n2: 0.0,
            mean_k: vec![1.0; cfg.levels],
            equalizer_epsilon: cfg.equalizer.epsilon,
        });
    }
    let input_mean = img.mean();

    let equalized = if cfg.enable_equalization {
        let e = equalize(img, &cfg.equalizer)?;
        check_finite(&e, "spectrum equalization")?;
        e
    } else {
        img.clone()
    };
    let (log_img, lambda) = log_domain(&equalized)?;
    let pyr = dtcwt::forward(&log_img, cfg.levels, fb)?;
    let shrunk = shrink::shrink_pyramid(
        &pyr,
        &ShrinkConfig {
            window: cfg.window,
            sigma_n2: None,
        },
    )?;
    if !pyramid_finite(&shrunk.pyramid) {
        return Err(Error::NonFinite { stage: "shrinkage" });
    }
    let restored = dtcwt::inverse(&shrunk.pyramid, fb)?;
    let output = from_log_domain(&restored, lambda, input_mean)?;

    Ok(DespeckleReport {
        output,
        sigma_n2: shrunk.sigma_n2,
        mean_k: shrunk.mean_k,
        equalizer_epsilon: cfg.equalizer.epsilon,
    })
}

fn pyramid_finite(pyr: &DtcwtPyramid) -> bool {
    pyr.subbands
        .iter()
        .flatten()
        .all(|b| b.data().iter().all(|z| z.re.is_finite() && z.im.is_finite()))
}

/// Frost adaptive filter: exponentially decaying weights whose rate follows
/// the local coefficient of variation, `exp(-damping * (v / mu^2) * d)` with
/// `d` the Chebyshev distance to the centre.
pub fn frost_filter(img: &Image, window: usize, damping: f64) -> Result<Image> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::invalid("window", format!("{window} must be odd")));
    }
    if !(damping > 0.0) {
        return Err(Error::invalid("damping", format!("{damping} must be positive")));
    }
    let (w, h) = img.dims();
    let r = (window / 2) as isize;
    let n = (window * window) as f64;
    let mut patch = Vec::with_capacity(window * window);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            patch.clear();
            for dy in -r..=r {
                for dx in -r..=r {
                    let d = dx.abs().max(dy.abs()) as f64;
                    patch.push((img.get(reflect(x + dx, w), reflect(y + dy, h)), d));
                }
            }
            let mu = patch.iter().map(|p| p.0).sum::<f64>() / n;
            if mu == 0.0 {
                out.push(img.get(x as usize, y as usize));
                continue;
            }
            let var = patch.iter().map(|p| (p.0 - mu).powi(2)).sum::<f64>() / n;
            // Exactly flat windows get uniform weights even for infinite damping.
            let rate = if var == 0.0 { 0.0 } else { damping * var / (mu * mu) };
            let (mut num, mut den) = (0.0, 0.0);
            for &(v, d) in &patch {
                let m = if d == 0.0 { 1.0 } else { (-rate * d).exp() };
                num += m * v;
                den += m;
            }
            out.push(num / den);
        }
    }
    finite_image(w, h, out, "frost filter")
}

/// Homomorphic BayesShrink baseline: per-subband soft threshold
/// `T = sigma_n^2 / sigma_x` on coefficient magnitudes, no equalization.
/// `sigma_x` is the per-component signal deviation, like `sigma_n`.
pub fn log_wavelet_baseline(img: &Image, levels: usize) -> Result<Image> {
    log_wavelet_baseline_with(img, levels, &default_filter_bank())
}

pub fn log_wavelet_baseline_with(img: &Image, levels: usize, fb: &FilterBank) -> Result<Image> {
    if !(1..=MAX_PIPELINE_LEVELS).contains(&levels) {
        return Err(Error::invalid("levels", format!("{levels} outside 1..={MAX_PIPELINE_LEVELS}")));
    }
    img.ensure_nonnegative()?;
    if all_zero(img) {
        return Ok(img.clone());
    }
    let (log_img, lambda) = log_domain(img)?;
    let pyr = dtcwt::forward(&log_img, levels, fb)?;
    let sigma_n2 = shrink::estimate_noise_sigma2(&pyr)?;
    let subbands = pyr
        .subbands
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|band| {
                    let n = band.data().len() as f64;
                    let energy = band.data().iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
                    let floor = shrink::signal_floor(band);
                    let sigma_x = shrink::component_signal_variance(energy, sigma_n2)
                        .max(floor * floor)
                        .sqrt();
                    let t = sigma_n2 / sigma_x;
                    band.map(|&z| soft_threshold(z, t))
                })
                .collect()
        })
        .collect();
    let shrunk = DtcwtPyramid {
        subbands,
        lowpass: pyr.lowpass.clone(),
        original_dims: pyr.original_dims,
    };
    let restored = dtcwt::inverse(&shrunk, fb)?;
    from_log_domain(&restored, lambda, img.mean())
}

fn soft_threshold(z: Complex64, t: f64) -> Complex64 {
    shrink::shrink_coefficient(z, t)
}
