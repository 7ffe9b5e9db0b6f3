//! Joint spectral amplitude construction and its Schmidt-mode content.
//!
//! The two-photon amplitude is modeled as a Gaussian pump envelope in the
//! sum frequency times a sinc phase-matching function along a configurable
//! ridge, sampled on a uniform grid of frequency-offset bin centers.  Its
//! singular value decomposition yields the Schmidt coefficients that drive
//! the squeezer bank in [`crate::pdcstate`]; partitioning the signal axis
//! with the herald filter and decomposing each part separately (keeping the
//! parent normalization) yields the transmitted and reflected families.

use nalgebra::{Complex, DMatrix};

use crate::error::Error;
use crate::Result;

type Complex64 = Complex<f64>;

/// Uniform grids of angular-frequency offsets (rad/s) from the signal and
/// idler center frequencies.  Values are bin centers.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGrid {
    signal_offsets: Vec<f64>,
    idler_offsets: Vec<f64>,
}

impl FrequencyGrid {
    pub const MIN_BINS: usize = 16;

    pub fn new(signal_offsets: Vec<f64>, idler_offsets: Vec<f64>) -> Result<Self> {
        for (name, offsets) in [("signal", &signal_offsets), ("idler", &idler_offsets)] {
            if offsets.len() < Self::MIN_BINS {
                return Err(Error::Config(format!(
                    "{name} grid needs at least {} bins, got {}",
                    Self::MIN_BINS,
                    offsets.len()
                )));
            }
            if offsets.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} grid contains non-finite offsets"
                )));
            }
            let step = offsets[1] - offsets[0];
            if step <= 0.0 {
                return Err(Error::Config(format!(
                    "{name} grid must be strictly increasing"
                )));
            }
            for pair in offsets.windows(2) {
                let d = pair[1] - pair[0];
                if (d - step).abs() > 1e-9 * step.abs() {
                    return Err(Error::Config(format!(
                        "{name} grid spacing is not uniform ({d} vs {step})"
                    )));
                }
            }
        }
        Ok(Self {
            signal_offsets,
            idler_offsets,
        })
    }

    /// Square grid of `bins` bin centers per axis covering
    /// `[-half_span, half_span]` on both axes.
    pub fn symmetric(half_span: f64, bins: usize) -> Result<Self> {
        if !half_span.is_finite() || half_span <= 0.0 {
            return Err(Error::Config(format!(
                "grid half-span must be positive, got {half_span}"
            )));
        }
        let step = 2.0 * half_span / bins as f64;
        let centers: Vec<f64> = (0..bins)
            .map(|i| -half_span + (i as f64 + 0.5) * step)
            .collect();
        Self::new(centers.clone(), centers)
    }

    pub fn signal_offsets(&self) -> &[f64] {
        &self.signal_offsets
    }

    pub fn idler_offsets(&self) -> &[f64] {
        &self.idler_offsets
    }

    pub fn signal_step(&self) -> f64 {
        self.signal_offsets[1] - self.signal_offsets[0]
    }

    pub fn idler_step(&self) -> f64 {
        self.idler_offsets[1] - self.idler_offsets[0]
    }

    /// Area of one grid cell in (rad/s)².
    pub fn cell_area(&self) -> f64 {
        self.signal_step() * self.idler_step()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PumpShape {
    Gaussian,
}

/// Pump pulse spectrum.  `spectral_width_hz` is the standard deviation of
/// the Gaussian amplitude in ordinary frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct PumpSpec {
    pub center_wavelength_nm: f64,
    pub spectral_width_hz: f64,
    pub shape: PumpShape,
}

impl PumpSpec {
    pub fn new(center_wavelength_nm: f64, spectral_width_hz: f64) -> Result<Self> {
        if !center_wavelength_nm.is_finite()
            || center_wavelength_nm <= 0.0
            || !spectral_width_hz.is_finite()
            || spectral_width_hz <= 0.0
        {
            return Err(Error::Config(
                "pump center wavelength and spectral width must be positive".into(),
            ));
        }
        Ok(Self {
            center_wavelength_nm,
            spectral_width_hz,
            shape: PumpShape::Gaussian,
        })
    }

    /// Angular-frequency standard deviation of the pump amplitude.
    pub fn angular_width(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.spectral_width_hz
    }

    /// Pump amplitude at signal + idler offset `sum` (rad/s).
    fn amplitude(&self, sum: f64) -> f64 {
        let s = self.angular_width();
        (-sum * sum / (2.0 * s * s)).exp()
    }
}

/// Sinc phase-matching band in the (signal, idler) offset plane.
///
/// The amplitude is `sinc(inverse_width_s * (nu_s - ridge_slope * nu_i))`:
/// maximal along the ridge `nu_s = ridge_slope * nu_i` and falling off over
/// an angular-frequency scale of `pi / inverse_width_s` across it.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMatchSpec {
    pub inverse_width_s: f64,
    pub ridge_slope: f64,
}

impl PhaseMatchSpec {
    pub fn new(inverse_width_s: f64, ridge_slope: f64) -> Result<Self> {
        if !inverse_width_s.is_finite() || inverse_width_s <= 0.0 || !ridge_slope.is_finite() {
            return Err(Error::Config(
                "phase-matching inverse width must be positive and finite".into(),
            ));
        }
        Ok(Self {
            inverse_width_s,
            ridge_slope,
        })
    }

    fn amplitude(&self, signal: f64, idler: f64) -> f64 {
        sinc(self.inverse_width_s * (signal - self.ridge_slope * idler))
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterShape {
    Rectangular,
}

/// Spectral filter on the signal (herald) axis.  A bin belongs to the
/// transmitted band iff its center lies in `[center - width/2,
/// center + width/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSpec {
    pub center: f64,
    pub width: f64,
    pub shape: FilterShape,
}

impl FilterSpec {
    pub fn new(center: f64, width: f64) -> Result<Self> {
        if width < 0.0 || !width.is_finite() || !center.is_finite() {
            return Err(Error::Config(format!(
                "filter width must be nonnegative, got {width}"
            )));
        }
        Ok(Self {
            center,
            width,
            shape: FilterShape::Rectangular,
        })
    }

    pub fn transmits(&self, offset: f64) -> bool {
        let half = 0.5 * self.width;
        offset >= self.center - half && offset < self.center + half
    }
}

/// Discretized joint spectral amplitude.  Rows follow the signal grid,
/// columns the idler grid; `norm` is the L² weight
/// `sum |amplitude|^2 * cell_area`.
#[derive(Clone, Debug, PartialEq)]
pub struct JsaMatrix {
    grid: FrequencyGrid,
    amplitudes: DMatrix<Complex64>,
    norm: f64,
}

impl JsaMatrix {
    pub fn from_amplitudes(grid: FrequencyGrid, amplitudes: DMatrix<Complex64>) -> Result<Self> {
        if amplitudes.nrows() != grid.signal_offsets.len()
            || amplitudes.ncols() != grid.idler_offsets.len()
        {
            return Err(Error::Config(format!(
                "amplitude matrix is {}x{} but the grid is {}x{}",
                amplitudes.nrows(),
                amplitudes.ncols(),
                grid.signal_offsets.len(),
                grid.idler_offsets.len()
            )));
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Config(
                "amplitude matrix contains non-finite entries".into(),
            ));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.cell_area();
        Ok(Self {
            grid,
            amplitudes,
            norm,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &DMatrix<Complex64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }
}

/// Evaluates pump envelope times phase matching at every pair of bin
/// centers and L²-normalizes the result.
pub fn build_jsa(pump: &PumpSpec, pm: &PhaseMatchSpec, grid: &FrequencyGrid) -> Result<JsaMatrix> {
    let rows = grid.signal_offsets.len();
    let cols = grid.idler_offsets.len();
    let mut amplitudes = DMatrix::from_element(rows, cols, Complex64::new(0.0, 0.0));
    for (i, &s) in grid.signal_offsets.iter().enumerate() {
        for (j, &idler) in grid.idler_offsets.iter().enumerate() {
            let a = pump.amplitude(s + idler) * pm.amplitude(s, idler);
            amplitudes[(i, j)] = Complex64::new(a, 0.0);
        }
    }
    let norm_sq = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.cell_area();
    if norm_sq <= 0.0 {
        return Err(Error::DegenerateJsa(
            "pump and phase-matching have no support on the grid".into(),
        ));
    }
    amplitudes /= Complex64::new(norm_sq.sqrt(), 0.0);
    JsaMatrix::from_amplitudes(grid.clone(), amplitudes)
}

/// Schmidt coefficients of one amplitude matrix, nonincreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtSpectrum {
    coefficients: Vec<f64>,
    discarded_weight: f64,
    truncation_warning: bool,
}

impl SchmidtSpectrum {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Weight `norm - sum of kept coefficients squared` lost to the mode
    /// cutoff and the small-singular-value drop threshold.
    pub fn discarded_weight(&self) -> f64 {
        self.discarded_weight
    }

    /// True when more than 1e-3 of the weight was discarded.
    pub fn truncation_warning(&self) -> bool {
        self.truncation_warning
    }
}

/// Coefficient below which singular values are treated as numerical noise
/// and dropped.
const SINGULAR_VALUE_FLOOR: f64 = 1e-8;

/// Computes the top `max_modes` Schmidt coefficients of the JSA.
///
/// The coefficients are the singular values of the amplitude matrix scaled
/// by the square root of the grid cell area, so that their squares sum to
/// the matrix norm (1 for a freshly built JSA).
pub fn schmidt_decompose(jsa: &JsaMatrix, max_modes: usize) -> Result<SchmidtSpectrum> {
    if max_modes == 0 {
        return Err(Error::Config("max_modes must be at least 1".into()));
    }
    if jsa.norm <= 0.0 {
        return Err(Error::DegenerateJsa(
            "cannot decompose an all-zero amplitude matrix".into(),
        ));
    }
    let scale = jsa.grid.cell_area().sqrt();
    let mut coefficients: Vec<f64> = singular_values(&jsa.amplitudes)
        .into_iter()
        .map(|s| s * scale)
        .filter(|l| *l >= SINGULAR_VALUE_FLOOR)
        .collect();
    coefficients.truncate(max_modes);
    let kept: f64 = coefficients.iter().map(|l| l * l).sum();
    let discarded_weight = (jsa.norm - kept).max(0.0);
    Ok(SchmidtSpectrum {
        coefficients,
        discarded_weight,
        truncation_warning: discarded_weight > 1e-3,
    })
}

/// Splits the JSA along the signal axis: rows whose bin center passes the
/// filter go to the transmitted matrix, all others to the reflected one.
/// Every element lands in exactly one part, so the partition is exact.
pub fn partition_by_filter(jsa: &JsaMatrix, filter: &FilterSpec) -> (JsaMatrix, JsaMatrix) {
    let zero = Complex64::new(0.0, 0.0);
    let mut transmitted = jsa.amplitudes.clone();
    let mut reflected = jsa.amplitudes.clone();
    for (i, &offset) in jsa.grid.signal_offsets.iter().enumerate() {
        if filter.transmits(offset) {
            reflected.row_mut(i).fill(zero);
        } else {
            transmitted.row_mut(i).fill(zero);
        }
    }
    let t = JsaMatrix::from_amplitudes(jsa.grid.clone(), transmitted)
        .expect("partition of a valid matrix is valid");
    let r = JsaMatrix::from_amplitudes(jsa.grid.clone(), reflected)
        .expect("partition of a valid matrix is valid");
    (t, r)
}

/// Schmidt coefficients of the transmitted and reflected families, sharing
/// the parent JSA's normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredSchmidt {
    transmitted: Vec<f64>,
    reflected: Vec<f64>,
    discarded_weight: f64,
}

impl FilteredSchmidt {
    /// Builds directly from coefficient lists, for tests and for replaying
    /// a previously derived spectrum from a scenario file.
    pub fn from_coefficients(transmitted: Vec<f64>, reflected: Vec<f64>) -> Result<Self> {
        for (name, lams) in [("transmitted", &transmitted), ("reflected", &reflected)] {
            if lams.iter().any(|l| !l.is_finite() || *l < 0.0) {
                return Err(Error::Config(format!(
                    "{name} coefficients must be finite and nonnegative"
                )));
            }
            if lams.windows(2).any(|p| p[1] > p[0]) {
                return Err(Error::Config(format!(
                    "{name} coefficients must be nonincreasing"
                )));
            }
        }
        Ok(Self {
            transmitted,
            reflected,
            discarded_weight: 0.0,
        })
    }

    pub fn transmitted(&self) -> &[f64] {
        &self.transmitted
    }

    pub fn reflected(&self) -> &[f64] {
        &self.reflected
    }

    pub fn discarded_weight(&self) -> f64 {
        self.discarded_weight
    }
}

/// Decomposes the two halves of a partitioned JSA without renormalizing
/// either, keeping up to `max_modes` coefficients per family.
pub fn filtered_schmidt(
    jsa_t: &JsaMatrix,
    jsa_r: &JsaMatrix,
    max_modes: usize,
) -> Result<FilteredSchmidt> {
    if max_modes == 0 {
        return Err(Error::Config("max_modes must be at least 1".into()));
    }
    let decompose = |jsa: &JsaMatrix| -> (Vec<f64>, f64) {
        if jsa.norm <= 0.0 {
            return (Vec::new(), 0.0);
        }
        let scale = jsa.grid.cell_area().sqrt();
        let mut lams: Vec<f64> = singular_values(&jsa.amplitudes)
            .into_iter()
            .map(|s| s * scale)
            .filter(|l| *l >= SINGULAR_VALUE_FLOOR)
            .collect();
        lams.truncate(max_modes);
        let kept: f64 = lams.iter().map(|l| l * l).sum();
        (lams, (jsa.norm - kept).max(0.0))
    };
    let (transmitted, lost_t) = decompose(jsa_t);
    let (reflected, lost_r) = decompose(jsa_r);
    Ok(FilteredSchmidt {
        transmitted,
        reflected,
        discarded_weight: lost_t + lost_r,
    })
}

/// Singular values of a complex matrix, nonincreasing.
///
/// Zero rows and columns are removed first (filtered matrices are mostly
/// zeros), then the Gram matrix of the smaller side is diagonalized.  A
/// real matrix is handled directly; a genuinely complex one goes through
/// the standard real embedding [[Re, -Im], [Im, Re]], whose singular
/// values are those of the original, each twice.
fn singular_values(a: &DMatrix<Complex64>) -> Vec<f64> {
    let live_rows: Vec<usize> = (0..a.nrows())
        .filter(|&i| a.row(i).iter().any(|z| z.norm_sqr() != 0.0))
        .collect();
    let live_cols: Vec<usize> = (0..a.ncols())
        .filter(|&j| a.column(j).iter().any(|z| z.norm_sqr() != 0.0))
        .collect();
    if live_rows.is_empty() || live_cols.is_empty() {
        return Vec::new();
    }
    let sub = a
        .select_rows(live_rows.iter())
        .select_columns(live_cols.iter());
    let all_real = sub.iter().all(|z| z.im == 0.0);
    let svs = if all_real {
        let re = sub.map(|z| z.re);
        gram_singular_values(&re)
    } else {
        let (m, n) = sub.shape();
        let mut embed = DMatrix::zeros(2 * m, 2 * n);
        for i in 0..m {
            for j in 0..n {
                let z = sub[(i, j)];
                embed[(i, j)] = z.re;
                embed[(i, j + n)] = -z.im;
                embed[(i + m, j)] = z.im;
                embed[(i + m, j + n)] = z.re;
            }
        }
        gram_singular_values(&embed)
            .into_iter()
            .step_by(2)
            .collect()
    };
    // Forming the Gram matrix squares the condition number, so singular
    // values below sigma_max * sqrt(dim * eps) are indistinguishable from
    // rounding noise and are cut here.
    let dim = live_rows.len().max(live_cols.len());
    let floor = svs
        .first()
        .map_or(0.0, |s| s * 8.0 * (dim as f64 * f64::EPSILON).sqrt());
    svs.into_iter().take_while(|s| *s > floor).collect()
}

fn gram_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    let eig = gram.symmetric_eigen();
    let mut svs: Vec<f64> = eig.eigenvalues.iter().map(|e| e.max(0.0).sqrt()).collect();
    svs.sort_by(|x, y| y.total_cmp(x));
    svs
}
