//! 2-D dual-tree complex wavelet transform.
//!
//! Level 1 uses the near-symmetric 13/19-tap biorthogonal pair, evaluated
//! without decimation so that the even and odd output phases form trees A and
//! B. Every coarser level uses the 14-tap Q-shift orthonormal pair, tree A
//! filtering the even samples of the interleaved two-tree signal and tree B
//! (the time reverse of A) the odd ones. Both stages use half-sample symmetric
//! extension; because tree B is the mirror of tree A, the interleaved outputs
//! stay mirror symmetric and reconstruction is exact at the borders.
//!
//! Per level, the four real tree combinations of each highpass band are merged
//! into two complex subbands, giving six orientations (about 15, 45, 75, 105,
//! 135 and 165 degrees).

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::grid::{reflect, ComplexGrid, RealGrid};
use crate::image::Image;
use crate::Complex64;

/// Number of directional subbands per level.
pub const DIRECTIONS: usize = 6;

pub const MAX_LEVELS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterPair {
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeFilters {
    pub tree_a: FilterPair,
    pub tree_b: FilterPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub level1_analysis: TreeFilters,
    pub level1_synthesis: TreeFilters,
    pub qshift_analysis: TreeFilters,
    pub qshift_synthesis: TreeFilters,
}

// Kingsbury near-symmetric "near_sym_b" pair (13-tap analysis lowpass,
// 19-tap synthesis lowpass), as distributed with the reference DTCWT
// toolboxes (N. Kingsbury, Cambridge, 2000).
const NEAR_SYM_B_H0: [f64; 13] = [
    -0.0017578125,
    0.0,
    0.022265625,
    -0.046875,
    -0.0482421875,
    0.296875,
    0.55546875,
    0.296875,
    -0.0482421875,
    -0.046875,
    0.022265625,
    0.0,
    -0.0017578125,
];

const NEAR_SYM_B_G0: [f64; 19] = [
    7.062639508928571e-05,
    0.0,
    -0.0013419015066964285,
    -0.0018833705357142855,
    0.007156808035714285,
    0.023856026785714284,
    -0.05564313616071428,
    -0.05168805803571428,
    0.29975760323660716,
    0.5594308035714286,
    0.29975760323660716,
    -0.05168805803571428,
    -0.05564313616071428,
    0.023856026785714284,
    0.007156808035714285,
    -0.0018833705357142855,
    -0.0013419015066964285,
    0.0,
    7.062639508928571e-05,
];

// Kingsbury 14-tap Q-shift "qshift_b" lowpass (the branch with group delay
// near 6.75 samples). The published table has a highpass DC leak of about
// 9e-7; these taps carry a minimum-norm correction (largest change 1.3e-7)
// that makes the filter exactly orthonormal with a zero at z = -1.
const QSHIFT_B_H0: [f64; 14] = [
    -0.004556876742820043,
    -0.0054394560345875365,
    0.017025223370035186,
    0.023825382688208774,
    -0.10671169218758102,
    0.01186597400431464,
    0.568810532359082,
    0.7561455337234387,
    0.27529548310269075,
    -0.11720401465701727,
    -0.03887268833066862,
    0.03466023000825229,
    -0.0038832003841907654,
    0.0032531314539378485,
];

fn reversed(h: &[f64]) -> Vec<f64> {
    h.iter().rev().copied().collect()
}

/// `(-1)^k * h[k]`, optionally negated.
fn modulated(h: &[f64], negate: bool) -> Vec<f64> {
    h.iter()
        .enumerate()
        .map(|(k, &v)| {
            let s = if (k % 2 == 1) != negate { -1.0 } else { 1.0 };
            s * v
        })
        .collect()
}

/// Near-symmetric 13/19 level-1 filters with 14-tap Q-shift filters for coarser levels.
pub fn default_filter_bank() -> FilterBank {
    let h0o = NEAR_SYM_B_H0.to_vec();
    let g0o = NEAR_SYM_B_G0.to_vec();
    let h1o = modulated(&g0o, true);
    let g1o = modulated(&h0o, false);
    let level1 = |lowpass: &Vec<f64>, highpass: &Vec<f64>| TreeFilters {
        tree_a: FilterPair {
            lowpass: lowpass.clone(),
            highpass: highpass.clone(),
        },
        tree_b: FilterPair {
            lowpass: reversed(lowpass),
            highpass: reversed(highpass),
        },
    };

    let h0 = QSHIFT_B_H0.to_vec();
    // alternating flip: h1[k] = (-1)^(k+1) h0[m-1-k]
    let h1 = modulated(&reversed(&h0), true);
    let analysis = TreeFilters {
        tree_a: FilterPair {
            lowpass: h0.clone(),
            highpass: h1.clone(),
        },
        tree_b: FilterPair {
            lowpass: reversed(&h0),
            highpass: reversed(&h1),
        },
    };
    // Orthonormal: synthesis filters are the time reverse of the analysis filters.
    let synthesis = TreeFilters {
        tree_a: FilterPair {
            lowpass: reversed(&h0),
            highpass: reversed(&h1),
        },
        tree_b: FilterPair {
            lowpass: h0,
            highpass: h1,
        },
    };

    FilterBank {
        level1_analysis: level1(&h0o, &h1o),
        level1_synthesis: level1(&g0o, &g1o),
        qshift_analysis: analysis,
        qshift_synthesis: synthesis,
    }
}

/// Sampling geometry of one 1-D stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    /// Undecimated odd-length filtering; trees are the even/odd output phases.
    Level1,
    /// Q-shift filtering of an interleaved two-tree signal, decimating each tree by 2.
    Qshift,
}

impl Stage {
    /// Input stride between taps of one tree.
    fn stride(self) -> isize {
        match self {
            Stage::Level1 => 1,
            Stage::Qshift => 2,
        }
    }

    /// Input samples per output sample of one tree.
    fn decimation(self) -> isize {
        match self {
            Stage::Level1 => 2,
            Stage::Qshift => 4,
        }
    }

    /// Input position of tap 0 for output `i = 0` of tree `tree` with an
    /// `m`-tap filter. The two trees satisfy `p_a + p_b = D - 1 + S (m - 1)`,
    /// which makes the interleaved output mirror symmetric about -1/2.
    fn analysis_offset(self, m: usize, tree: usize) -> isize {
        let m = m as isize;
        let p_a = match self {
            Stage::Level1 => (m - 1) / 2,
            Stage::Qshift => m,
        };
        if tree == 0 {
            p_a
        } else {
            self.decimation() - 1 + self.stride() * (m - 1) - p_a
        }
    }

    fn synthesis_offset(self, m: usize, tree: usize) -> isize {
        let m = m as isize;
        match self {
            Stage::Level1 => (m - 1) / 2 - tree as isize,
            Stage::Qshift => m - 2 - tree as isize,
        }
    }

    /// Interleaved position (0 even, 1 odd) of a tree within band 0 (lowpass)
    /// or 1 (highpass). Q-shift highpass trees are stored swapped so that the
    /// real/imaginary roles, and hence subband orientations, agree with level 1.
    fn slot(self, band: usize, tree: usize) -> usize {
        match (self, band) {
            (Stage::Qshift, 1) => 1 - tree,
            _ => tree,
        }
    }

    fn check_filters(self, f: &TreeFilters) -> Result<()> {
        for (name, h) in [
            ("tree A lowpass", &f.tree_a.lowpass),
            ("tree A highpass", &f.tree_a.highpass),
            ("tree B lowpass", &f.tree_b.lowpass),
            ("tree B highpass", &f.tree_b.highpass),
        ] {
            let ok = match self {
                Stage::Level1 => h.len() % 2 == 1,
                Stage::Qshift => !h.is_empty() && h.len() % 2 == 0,
            };
            if !ok {
                return Err(Error::invalid(
                    "filter bank",
                    format!("{name} has unsupported length {} for {self:?}", h.len()),
                ));
            }
        }
        if f.tree_a.lowpass.len() != f.tree_b.lowpass.len()
            || f.tree_a.highpass.len() != f.tree_b.highpass.len()
        {
            return Err(Error::invalid("filter bank", "tree lengths differ"));
        }
        Ok(())
    }
}

/// One analysis stage on a 1-D signal into interleaved (lowpass, highpass)
/// outputs; see [`Stage::slot`] for tree placement.
fn analyze_1d(x: &[f64], stage: Stage, f: &TreeFilters, lo: &mut [f64], hi: &mut [f64]) {
    let r = x.len();
    let (s, d) = (stage.stride(), stage.decimation());
    let per_tree = r / d as usize;
    for (tree, pair) in [&f.tree_a, &f.tree_b].into_iter().enumerate() {
        for (band, h, out) in [(0, &pair.lowpass, &mut *lo), (1, &pair.highpass, &mut *hi)] {
            let p = stage.analysis_offset(h.len(), tree);
            let slot = stage.slot(band, tree);
            for i in 0..per_tree {
                let base = d * i as isize + p;
                let acc: f64 = h
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| c * x[reflect(base - s * k as isize, r)])
                    .sum();
                out[2 * i + slot] = acc;
            }
        }
    }
}

/// Inverse of [`analyze_1d`]; `out.len()` is the reconstructed signal length.
fn synthesize_1d(lo: &[f64], hi: &[f64], stage: Stage, g: &TreeFilters, out: &mut [f64]) {
    let len = lo.len();
    let (s, d) = (stage.stride(), stage.decimation());
    out.iter_mut().for_each(|v| *v = 0.0);
    for (tree, pair) in [&g.tree_a, &g.tree_b].into_iter().enumerate() {
        for (band, h, y) in [(0, &pair.lowpass, lo), (1, &pair.highpass, hi)] {
            let q = stage.synthesis_offset(h.len(), tree);
            let slot = stage.slot(band, tree) as isize;
            for (n, o) in out.iter_mut().enumerate() {
                let base = n as isize + q;
                let mut acc = 0.0;
                for (k, &c) in h.iter().enumerate() {
                    let idx = base - s * k as isize;
                    if idx.rem_euclid(d) == 0 {
                        let i = idx.div_euclid(d);
                        acc += c * y[reflect(2 * i + slot, len)];
                    }
                }
                *o += acc;
            }
        }
    }
}

fn output_len(stage: Stage, n: usize) -> usize {
    2 * n / stage.decimation() as usize
}

fn analyze_columns(x: &RealGrid, stage: Stage, f: &TreeFilters) -> (RealGrid, RealGrid) {
    let (w, h) = x.dims();
    let out_h = output_len(stage, h);
    let mut lo = RealGrid::filled(w, out_h, 0.0);
    let mut hi = RealGrid::filled(w, out_h, 0.0);
    let mut col = vec![0.0; h];
    let mut col_lo = vec![0.0; out_h];
    let mut col_hi = vec![0.0; out_h];
    for cx in 0..w {
        for (y, v) in col.iter_mut().enumerate() {
            *v = *x.get(cx, y);
        }
        analyze_1d(&col, stage, f, &mut col_lo, &mut col_hi);
        for y in 0..out_h {
            *lo.get_mut(cx, y) = col_lo[y];
            *hi.get_mut(cx, y) = col_hi[y];
        }
    }
    (lo, hi)
}

fn analyze_rows(x: &RealGrid, stage: Stage, f: &TreeFilters) -> (RealGrid, RealGrid) {
    let (w, h) = x.dims();
    let out_w = output_len(stage, w);
    let mut lo = Vec::with_capacity(out_w * h);
    let mut hi = Vec::with_capacity(out_w * h);
    let mut row_lo = vec![0.0; out_w];
    let mut row_hi = vec![0.0; out_w];
    for y in 0..h {
        analyze_1d(x.row(y), stage, f, &mut row_lo, &mut row_hi);
        lo.extend_from_slice(&row_lo);
        hi.extend_from_slice(&row_hi);
    }
    (
        RealGrid::from_vec(out_w, h, lo).expect("row analysis dims"),
        RealGrid::from_vec(out_w, h, hi).expect("row analysis dims"),
    )
}

fn synthesize_columns(lo: &RealGrid, hi: &RealGrid, stage: Stage, g: &TreeFilters) -> RealGrid {
    let (w, h) = lo.dims();
    let out_h = h * stage.decimation() as usize / 2;
    let mut out = RealGrid::filled(w, out_h, 0.0);
    let mut col_lo = vec![0.0; h];
    let mut col_hi = vec![0.0; h];
    let mut col = vec![0.0; out_h];
    for cx in 0..w {
        for y in 0..h {
            col_lo[y] = *lo.get(cx, y);
            col_hi[y] = *hi.get(cx, y);
        }
        synthesize_1d(&col_lo, &col_hi, stage, g, &mut col);
        for (y, v) in col.iter().enumerate() {
            *out.get_mut(cx, y) = *v;
        }
    }
    out
}

fn synthesize_rows(lo: &RealGrid, hi: &RealGrid, stage: Stage, g: &TreeFilters) -> RealGrid {
    let (w, h) = lo.dims();
    let out_w = w * stage.decimation() as usize / 2;
    let mut data = Vec::with_capacity(out_w * h);
    let mut row = vec![0.0; out_w];
    for y in 0..h {
        synthesize_1d(lo.row(y), hi.row(y), stage, g, &mut row);
        data.extend_from_slice(&row);
    }
    RealGrid::from_vec(out_w, h, data).expect("row synthesis dims")
}

/// Merges the 2x2 tree polyphase components of a real band into two complex
/// subbands: `((a - d) + i(b + c)) / sqrt2` and `((a + d) + i(b - c)) / sqrt2`,
/// where rows select the column tree and columns the row tree.
fn quad_to_complex(band: &RealGrid) -> (ComplexGrid, ComplexGrid) {
    let (w, h) = (band.width() / 2, band.height() / 2);
    let mut z1 = Vec::with_capacity(w * h);
    let mut z2 = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let a = *band.get(2 * x, 2 * y);
            let b = *band.get(2 * x + 1, 2 * y);
            let c = *band.get(2 * x, 2 * y + 1);
            let d = *band.get(2 * x + 1, 2 * y + 1);
            z1.push(Complex64::new(a - d, b + c) * FRAC_1_SQRT_2);
            z2.push(Complex64::new(a + d, b - c) * FRAC_1_SQRT_2);
        }
    }
    (
        ComplexGrid::from_vec(w, h, z1).expect("q2c dims"),
        ComplexGrid::from_vec(w, h, z2).expect("q2c dims"),
    )
}

/// Exact inverse of [`quad_to_complex`].
fn complex_to_quad(z1: &ComplexGrid, z2: &ComplexGrid) -> RealGrid {
    let (w, h) = z1.dims();
    let mut band = RealGrid::filled(2 * w, 2 * h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let p = (z1.get(x, y) + z2.get(x, y)) * FRAC_1_SQRT_2;
            let q = (z1.get(x, y) - z2.get(x, y)) * FRAC_1_SQRT_2;
            *band.get_mut(2 * x, 2 * y) = p.re;
            *band.get_mut(2 * x + 1, 2 * y) = p.im;
            *band.get_mut(2 * x, 2 * y + 1) = q.im;
            *band.get_mut(2 * x + 1, 2 * y + 1) = -q.re;
        }
    }
    band
}

/// Splits an interleaved lowpass into its four tree grids
/// `[AA, AB, BA, BB]` (column tree, row tree).
fn split_trees(lolo: &RealGrid) -> [RealGrid; 4] {
    let (w, h) = (lolo.width() / 2, lolo.height() / 2);
    let part = |ox: usize, oy: usize| RealGrid::from_fn(w, h, |x, y| *lolo.get(2 * x + ox, 2 * y + oy));
    [part(0, 0), part(1, 0), part(0, 1), part(1, 1)]
}

fn merge_trees(trees: &[RealGrid; 4]) -> RealGrid {
    let (w, h) = trees[0].dims();
    RealGrid::from_fn(2 * w, 2 * h, |x, y| {
        let t = (y % 2) * 2 + (x % 2);
        *trees[t].get(x / 2, y / 2)
    })
}

/// Multi-level DTCWT decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct DtcwtPyramid {
    /// `subbands[s][d]`: scale `s` (0 = finest) and direction `d`, each
    /// `(H' / 2^(s+1)) x (W' / 2^(s+1))` for padded dims `W' x H'`.
    pub subbands: Vec<Vec<ComplexGrid>>,
    /// Residual lowpass of the four trees `[AA, AB, BA, BB]`.
    pub lowpass: [RealGrid; 4],
    /// `(width, height)` of the image before symmetric padding.
    pub original_dims: (usize, usize),
}

impl DtcwtPyramid {
    pub fn levels(&self) -> usize {
        self.subbands.len()
    }

    /// Padded image dims implied by the finest subband.
    pub fn padded_dims(&self) -> (usize, usize) {
        let (w, h) = self.subbands[0][0].dims();
        (2 * w, 2 * h)
    }

    /// Per-position RMS over the four lowpass trees.
    pub fn lowpass_magnitude(&self) -> RealGrid {
        let (w, h) = self.lowpass[0].dims();
        RealGrid::from_fn(w, h, |x, y| {
            let s: f64 = self.lowpass.iter().map(|t| t.get(x, y).powi(2)).sum();
            (s / 4.0).sqrt()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let levels = self.levels();
        if levels == 0 {
            return Err(Error::invalid("pyramid", "no levels"));
        }
        let (w0, h0) = self.subbands[0]
            .first()
            .map(|g| g.dims())
            .ok_or_else(|| Error::invalid("pyramid", "level 1 has no subbands"))?;
        for (s, level) in self.subbands.iter().enumerate() {
            if level.len() != DIRECTIONS {
                return Err(Error::invalid(
                    "pyramid",
                    format!("level {} has {} subbands, expected {DIRECTIONS}", s + 1, level.len()),
                ));
            }
            let expected = (w0 >> s, h0 >> s);
            if expected.0 == 0 || expected.1 == 0 || (w0 % (1 << s)) != 0 || (h0 % (1 << s)) != 0 {
                return Err(Error::invalid("pyramid", "subband dims do not halve per level"));
            }
            for band in level {
                band.ensure_dims(expected)?;
            }
        }
        let coarsest = self.subbands[levels - 1][0].dims();
        for tree in &self.lowpass {
            tree.ensure_dims(coarsest)?;
        }
        let (pw, ph) = (2 * w0, 2 * h0);
        let (ow, oh) = self.original_dims;
        if ow == 0 || oh == 0 || ow > pw || oh > ph {
            return Err(Error::invalid(
                "pyramid",
                format!("original dims {ow}x{oh} incompatible with padded {pw}x{ph}"),
            ));
        }
        Ok(())
    }

    /// Applies `f` to every complex coefficient; lowpass is untouched.
    pub fn map_subbands(&self, mut f: impl FnMut(Complex64) -> Complex64) -> DtcwtPyramid {
        DtcwtPyramid {
            subbands: self
                .subbands
                .iter()
                .map(|level| level.iter().map(|b| b.map(|z| f(*z))).collect())
                .collect(),
            lowpass: self.lowpass.clone(),
            original_dims: self.original_dims,
        }
    }
}

fn padded_len(n: usize, levels: usize) -> usize {
    let m = 1usize << levels;
    n.div_ceil(m) * m
}

/// Forward transform with `levels` levels.
///
/// The image is symmetrically extended on the right and bottom to multiples
/// of `2^levels`; [`inverse`] crops the extension again.
pub fn forward(img: &Image, levels: usize, fb: &FilterBank) -> Result<DtcwtPyramid> {
    if levels == 0 || levels > MAX_LEVELS {
        return Err(Error::invalid(
            "levels",
            format!("{levels} outside 1..={MAX_LEVELS}"),
        ));
    }
    let (w, h) = img.dims();
    if w < (1 << levels) || h < (1 << levels) {
        return Err(Error::invalid(
            "levels",
            format!("{levels} levels need at least {0}x{0} pixels, image is {w}x{h}", 1 << levels),
        ));
    }
    Stage::Level1.check_filters(&fb.level1_analysis)?;
    if levels > 1 {
        Stage::Qshift.check_filters(&fb.qshift_analysis)?;
    }

    let (pw, ph) = (padded_len(w, levels), padded_len(h, levels));
    let padded = RealGrid::from_fn(pw, ph, |x, y| {
        img.get(reflect(x as isize, w), reflect(y as isize, h))
    });

    let mut subbands = Vec::with_capacity(levels);
    let mut lolo = padded;
    for level in 0..levels {
        let (stage, filters) = if level == 0 {
            (Stage::Level1, &fb.level1_analysis)
        } else {
            (Stage::Qshift, &fb.qshift_analysis)
        };
        let (lo, hi) = analyze_columns(&lolo, stage, filters);
        let (lolo_next, lo_hi) = analyze_rows(&lo, stage, filters);
        let (hi_lo, hi_hi) = analyze_rows(&hi, stage, filters);

        let (d15, d165) = quad_to_complex(&hi_lo);
        let (d75, d105) = quad_to_complex(&lo_hi);
        let (d45, d135) = quad_to_complex(&hi_hi);
        subbands.push(vec![d15, d45, d75, d105, d135, d165]);
        lolo = lolo_next;
    }

    Ok(DtcwtPyramid {
        subbands,
        lowpass: split_trees(&lolo),
        original_dims: (w, h),
    })
}

/// Inverse transform, cropped to the pyramid's original dims.
pub fn inverse(pyr: &DtcwtPyramid, fb: &FilterBank) -> Result<Image> {
    pyr.validate()?;
    Stage::Level1.check_filters(&fb.level1_synthesis)?;
    if pyr.levels() > 1 {
        Stage::Qshift.check_filters(&fb.qshift_synthesis)?;
    }

    let mut lolo = merge_trees(&pyr.lowpass);
    for level in (0..pyr.levels()).rev() {
        let (stage, filters) = if level == 0 {
            (Stage::Level1, &fb.level1_synthesis)
        } else {
            (Stage::Qshift, &fb.qshift_synthesis)
        };
        let bands = &pyr.subbands[level];
        let hi_lo = complex_to_quad(&bands[0], &bands[5]);
        let lo_hi = complex_to_quad(&bands[2], &bands[3]);
        let hi_hi = complex_to_quad(&bands[1], &bands[4]);

        let lo = synthesize_rows(&lolo, &lo_hi, stage, filters);
        let hi = synthesize_rows(&hi_lo, &hi_hi, stage, filters);
        lolo = synthesize_columns(&lo, &hi, stage, filters);
    }

    let (w, h) = pyr.original_dims;
    Image::from_fn(w, h, |x, y| *lolo.get(x, y)).map_err(|_| Error::NonFinite {
        stage: "inverse DTCWT",
    })
}
