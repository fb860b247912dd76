//! Deterministic phantoms and multiplicative speckle synthesis (`Y = X * N`).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::image::Image;
use crate::Complex64;

/// splitmix64 generator. Identical seeds give identical streams on every platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prng {
    state: u64,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Prng { state: seed }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `(0, 1]` with 53 bits of resolution; never returns 0.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Circular complex Gaussian with `E|z|^2 = 1` (Box-Muller).
    pub fn next_complex_gaussian(&mut self) -> Complex64 {
        let r = (-self.next_open01().ln()).sqrt();
        let theta = 2.0 * PI * self.next_open01();
        Complex64::new(r * theta.cos(), r * theta.sin())
    }
}

/// Value-semantics step: returns the output and the advanced generator.
pub fn next_u64(prng: Prng) -> (u64, Prng) {
    let mut p = prng;
    let v = p.next_u64();
    (v, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    Disks,
    Blocks,
    Gradient,
}

impl std::str::FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disks" => Ok(PhantomKind::Disks),
            "blocks" => Ok(PhantomKind::Blocks),
            "gradient" => Ok(PhantomKind::Gradient),
            other => Err(Error::invalid("phantom kind", format!("unknown kind '{other}'"))),
        }
    }
}

pub const PHANTOM_MIN_SIDE: usize = 32;

/// Noise-free test object with intensities in `[20, 235]`.
///
/// * `Blocks`: four constant quadrants, 40 (top-left), 90 (top-right),
///   150 (bottom-left), 210 (bottom-right).
/// * `Gradient`: horizontal ramp `20 + 215 * x / (width - 1)`.
/// * `Disks`: five disks of differing contrast on a background of 100.
pub fn generate_phantom(width: usize, height: usize, kind: PhantomKind) -> Result<Image> {
    if width < PHANTOM_MIN_SIDE || height < PHANTOM_MIN_SIDE {
        return Err(Error::invalid(
            "phantom dimensions",
            format!("{width}x{height} is smaller than {PHANTOM_MIN_SIDE}x{PHANTOM_MIN_SIDE}"),
        ));
    }
    match kind {
        PhantomKind::Blocks => {
            let (hw, hh) = (width / 2, height / 2);
            Image::from_fn(width, height, |x, y| match (x < hw, y < hh) {
                (true, true) => 40.0,
                (false, true) => 90.0,
                (true, false) => 150.0,
                (false, false) => 210.0,
            })
        }
        PhantomKind::Gradient => Image::from_fn(width, height, |x, _| {
            20.0 + 215.0 * x as f64 / (width - 1) as f64
        }),
        PhantomKind::Disks => {
            let (w, h) = (width as f64, height as f64);
            let side = w.min(h);
            // (centre x, centre y, radius, intensity), all relative to the image size
            let disks = [
                (0.25 * w, 0.25 * h, 0.15 * side, 200.0),
                (0.75 * w, 0.25 * h, 0.10 * side, 160.0),
                (0.25 * w, 0.75 * h, 0.12 * side, 30.0),
                (0.70 * w, 0.70 * h, 0.18 * side, 235.0),
                (0.50 * w, 0.50 * h, 0.06 * side, 20.0),
            ];
            Image::from_fn(width, height, |x, y| {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                disks
                    .iter()
                    .rev()
                    .find(|(cx, cy, r, _)| (px - cx).powi(2) + (py - cy).powi(2) <= r * r)
                    .map_or(100.0, |d| d.3)
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeckleMode {
    /// Independent Rayleigh multiplier per pixel.
    Iid,
    /// Envelope of a Gaussian-blurred circular complex field.
    Correlated,
}

impl std::str::FromStr for SpeckleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(SpeckleMode::Iid),
            "correlated" => Ok(SpeckleMode::Correlated),
            other => Err(Error::invalid("speckle mode", format!("unknown mode '{other}'"))),
        }
    }
}

/// Rayleigh scale whose distribution has unit mean.
pub const UNIT_MEAN_RAYLEIGH_SCALE: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeckleSpec {
    pub mode: SpeckleMode,
    /// Rayleigh scale of the iid multiplier.
    pub rayleigh_scale: f64,
    /// Standard deviation (pixels) of the Gaussian PSF, correlated mode only.
    pub psf_sigma: f64,
    pub seed: u64,
}

impl Default for SpeckleSpec {
    fn default() -> Self {
        SpeckleSpec {
            mode: SpeckleMode::Iid,
            rayleigh_scale: UNIT_MEAN_RAYLEIGH_SCALE,
            psf_sigma: 2.0,
            seed: 0,
        }
    }
}

impl SpeckleSpec {
    pub fn iid(seed: u64) -> Self {
        SpeckleSpec {
            seed,
            ..Default::default()
        }
    }

    pub fn correlated(seed: u64, psf_sigma: f64) -> Self {
        SpeckleSpec {
            mode: SpeckleMode::Correlated,
            psf_sigma,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rayleigh_scale > 0.0 && self.rayleigh_scale.is_finite()) {
            return Err(Error::invalid("rayleigh_scale", "must be positive and finite"));
        }
        if self.mode == SpeckleMode::Correlated
            && !(self.psf_sigma > 0.0 && self.psf_sigma.is_finite())
        {
            return Err(Error::invalid("psf_sigma", "must be positive and finite"));
        }
        Ok(())
    }
}

/// Multiplier field `N` for a `width x height` image.
pub fn speckle_multiplier(width: usize, height: usize, spec: &SpeckleSpec) -> Result<Image> {
    spec.validate()?;
    let mut prng = Prng::new(spec.seed);
    match spec.mode {
        SpeckleMode::Iid => {
            let scale = spec.rayleigh_scale;
            let n = (0..width * height)
                .map(|_| scale * (-2.0 * prng.next_open01().ln()).sqrt())
                .collect();
            Image::new(width, height, n)
        }
        SpeckleMode::Correlated => {
            let field = ComplexGrid::from_fn(width, height, |_, _| prng.next_complex_gaussian());
            let blurred = gaussian_blur_periodic(&field, spec.psf_sigma);
            let env: Vec<f64> = blurred.data().iter().map(|z| z.norm()).collect();
            let mean = env.iter().sum::<f64>() / env.len() as f64;
            Image::new(width, height, env.into_iter().map(|v| v / mean).collect())
        }
    }
}

/// Applies multiplicative speckle: output pixel = input pixel * multiplier.
pub fn apply_speckle(img: &Image, spec: &SpeckleSpec) -> Result<Image> {
    img.ensure_nonnegative()?;
    let n = speckle_multiplier(img.width(), img.height(), spec)?;
    Image::new(
        img.width(),
        img.height(),
        img.pixels()
            .iter()
            .zip(n.pixels())
            .map(|(x, n)| x * n)
            .collect(),
    )
}

/// Separable Gaussian convolution with periodic boundary, kernel truncated at 4 sigma.
fn gaussian_blur_periodic(field: &ComplexGrid, sigma: f64) -> ComplexGrid {
    let radius = (4.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
    let (w, h) = field.dims();

    let rows = ComplexGrid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let xs = (x as isize + k as isize - radius).rem_euclid(w as isize) as usize;
                field.get(xs, y) * c
            })
            .sum()
    });
    ComplexGrid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let ys = (y as isize + k as isize - radius).rem_euclid(h as isize) as usize;
                rows.get(x, ys) * c
            })
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix64_reference_vector() {
        let mut p = Prng::new(0);
        assert_eq!(p.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(p.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(p.next_u64(), 0x06C4_5D18_8009_454F);
        let (v, next) = next_u64(Prng::new(0));
        assert_eq!(v, 0xE220_A839_7B1D_CDAF);
        assert_eq!(next.state(), 0x9E37_79B9_7F4A_7C15);
    }

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<u64> = {
            let mut p = Prng::new(42);
            (0..1000).map(|_| p.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut p = Prng::new(42);
            (0..1000).map(|_| p.next_u64()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn open01_never_zero() {
        let mut p = Prng::new(3);
        for _ in 0..10_000 {
            let u = p.next_open01();
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn blocks_layout() {
        let img = generate_phantom(64, 64, PhantomKind::Blocks).unwrap();
        assert_eq!(img.get(0, 0), 40.0);
        assert_eq!(img.get(31, 31), 40.0);
        assert_eq!(img.get(32, 0), 90.0);
        assert_eq!(img.get(0, 32), 150.0);
        assert_eq!(img.get(63, 63), 210.0);
    }

    #[test]
    fn gradient_layout() {
        let img = generate_phantom(64, 64, PhantomKind::Gradient).unwrap();
        for x in 0..64 {
            let expected = 20.0 + 215.0 * x as f64 / 63.0;
            assert_eq!(img.get(x, 17), expected);
        }
        assert_eq!(img.get(63, 0), 235.0);
    }

    #[test]
    fn phantoms_stay_in_range() {
        for kind in [PhantomKind::Disks, PhantomKind::Blocks, PhantomKind::Gradient] {
            let img = generate_phantom(96, 80, kind).unwrap();
            assert!(img.min() >= 20.0, "{kind:?}");
            assert!(img.max() <= 235.0, "{kind:?}");
        }
        let disks = generate_phantom(128, 128, PhantomKind::Disks).unwrap();
        assert_eq!(disks.get(32, 32), 200.0);
        assert_eq!(disks.get(64, 64), 20.0);
        assert_eq!(disks.get(2, 127), 100.0);
    }

    #[test]
    fn phantom_rejects_small_dims() {
        assert!(generate_phantom(31, 64, PhantomKind::Blocks).is_err());
    }

    #[test]
    fn zero_image_stays_zero() {
        let img = Image::filled(40, 40, 0.0).unwrap();
        for spec in [SpeckleSpec::iid(5), SpeckleSpec::correlated(5, 1.5)] {
            let out = apply_speckle(&img, &spec).unwrap();
            assert!(out.pixels().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn negative_input_rejected() {
        let img = Image::new(2, 1, vec![1.0, -1.0]).unwrap();
        assert!(apply_speckle(&img, &SpeckleSpec::iid(1)).is_err());
    }

    #[test]
    fn rayleigh_scale_sets_multiplier_mean() {
        // Rayleigh(sigma) has mean sigma * sqrt(pi / 2).
        let spec = SpeckleSpec {
            rayleigh_scale: 2.0,
            ..SpeckleSpec::iid(9)
        };
        let n = speckle_multiplier(500, 400, &spec).unwrap();
        let expected = 2.0 * (PI / 2.0).sqrt();
        assert!((n.mean() / expected - 1.0).abs() < 0.01);
        assert!((UNIT_MEAN_RAYLEIGH_SCALE * (PI / 2.0).sqrt() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn speckle_is_deterministic() {
        let img = generate_phantom(64, 64, PhantomKind::Disks).unwrap();
        for spec in [SpeckleSpec::iid(11), SpeckleSpec::correlated(11, 2.0)] {
            let a = apply_speckle(&img, &spec).unwrap();
            let b = apply_speckle(&img, &spec).unwrap();
            assert_eq!(a, b);
        }
        let a = apply_speckle(&img, &SpeckleSpec::iid(1)).unwrap();
        let b = apply_speckle(&img, &SpeckleSpec::iid(2)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn correlated_multiplier_has_unit_mean() {
        let n = speckle_multiplier(128, 128, &SpeckleSpec::correlated(4, 2.0)).unwrap();
        assert!((n.mean() - 1.0).abs() < 1e-12);
        assert!(n.min() >= 0.0);
    }

    #[test]
    fn invalid_spec_rejected() {
        let img = Image::filled(4, 4, 1.0).unwrap();
        let bad = SpeckleSpec {
            rayleigh_scale: 0.0,
            ..Default::default()
        };
        assert!(apply_speckle(&img, &bad).is_err());
        assert!(apply_speckle(&img, &SpeckleSpec::correlated(1, -1.0)).is_err());
    }
}
