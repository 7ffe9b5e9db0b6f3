//! Scenario files: a TOML description of the source (pump, phase matching,
//! grid, filter), the truncation settings, a loss budget, and simulation
//! parameters, together with helpers that turn a scenario into Schmidt
//! coefficients, squeezer banks, and run configurations.
//!
//! The built-in reference scenario is a representative strongly multimode
//! source, not a fit to a measured device; outputs carry its digest so
//! every figure is traceable to the exact parameters used.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eventsim::RunConfig;
use crate::heralding::{DetectorModel, HeraldScheme};
use crate::pdcstate::{calibrate_pump_factor, squeezer_bank, SqueezerBank};
use crate::spectra::{
    build_jsa, filtered_schmidt, partition_by_filter, schmidt_decompose, FilterSpec,
    FilteredSchmidt, FrequencyGrid, PhaseMatchSpec, PumpSpec,
};
use crate::{Error, Result};

const TWO_PI: f64 = std::f64::consts::TAU;

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpSection {
    pub center_wavelength_nm: f64,
    pub spectral_width_hz: f64,
}

impl Default for PumpSection {
    fn default() -> Self {
        Self {
            center_wavelength_nm: 777.24,
            spectral_width_hz: 4.5e10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseMatchingSection {
    pub inverse_width_s: f64,
    pub ridge_slope: f64,
}

impl Default for PhaseMatchingSection {
    fn default() -> Self {
        Self {
            inverse_width_s: 2.8e-13,
            ridge_slope: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub bins: usize,
    /// Half-span of each axis in units of the pump angular width.
    pub span_pump_widths: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            bins: 512,
            span_pump_widths: 36.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub center_offset_hz: f64,
    pub full_width_hz: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            center_offset_hz: 0.0,
            full_width_hz: 5e10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationSection {
    pub n_max: u32,
    pub max_modes_per_family: usize,
}

impl Default for TruncationSection {
    fn default() -> Self {
        Self {
            n_max: 6,
            max_modes_per_family: 32,
        }
    }
}

/// Loss budget of the experimental preset; the lossless preset ignores it.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    pub herald_transmission: f64,
    pub heralded_transmission: f64,
    pub detector_efficiency: f64,
    pub dark: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        Self {
            herald_transmission: 0.3,
            heralded_transmission: 0.3,
            detector_efficiency: 0.9,
            dark: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub repetition_rate_hz: f64,
    pub pulses: u64,
    pub delay_s: f64,
    pub on_time_s: f64,
    pub extinction_db: f64,
    pub seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            repetition_rate_hz: 5e5,
            pulses: 1_000_000,
            delay_s: 1e-6,
            on_time_s: 2e-7,
            extinction_db: 20.0,
            seed: 7,
        }
    }
}

/// A previously derived squeezer bank, pinned for exact replay.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedState {
    pub transmitted_q: Vec<f64>,
    pub reflected_q: Vec<f64>,
    pub pump_factor: f64,
}

/// Which loss numbers a computation uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossPreset {
    /// The scenario's loss budget.
    Experimental,
    /// Unit transmissions and efficiencies, zero dark counts.
    Lossless,
}

impl std::fmt::Display for LossPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossPreset::Experimental => "experimental",
            LossPreset::Lossless => "lossless",
        })
    }
}

impl std::str::FromStr for LossPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "experimental" => Ok(LossPreset::Experimental),
            "lossless" => Ok(LossPreset::Lossless),
            other => Err(Error::Config(format!(
                "unknown loss preset '{other}' (expected 'experimental' or 'lossless')"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub pump: PumpSection,
    pub phase_matching: PhaseMatchingSection,
    pub grid: GridSection,
    pub filter: FilterSection,
    pub truncation: TruncationSection,
    pub losses: LossSection,
    pub simulation: SimulationSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derived_state: Option<DerivedState>,
}

impl Scenario {
    /// The built-in reference source.
    pub fn reference() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let scenario: Scenario =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.pump_spec()?;
        self.phase_match_spec()?;
        self.filter_spec()?;
        if self.grid.bins < FrequencyGrid::MIN_BINS {
            return Err(Error::Config(format!(
                "grid needs at least {} bins, got {}",
                FrequencyGrid::MIN_BINS,
                self.grid.bins
            )));
        }
        if !self.grid.span_pump_widths.is_finite() || self.grid.span_pump_widths <= 0.0 {
            return Err(Error::Config(format!(
                "grid span must be positive, got {} pump widths",
                self.grid.span_pump_widths
            )));
        }
        if self.truncation.n_max == 0 {
            return Err(Error::Config(
                "truncation must keep at least 1 photon".into(),
            ));
        }
        if self.truncation.max_modes_per_family == 0 {
            return Err(Error::Config(
                "at least one mode per family is required".into(),
            ));
        }
        let l = &self.losses;
        for (name, value) in [
            ("herald_transmission", l.herald_transmission),
            ("heralded_transmission", l.heralded_transmission),
            ("detector_efficiency", l.detector_efficiency),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!(
                    "losses.{name} must lie in [0, 1], got {value}"
                )));
            }
        }
        if !(0.0..1.0).contains(&l.dark) {
            return Err(Error::Config(format!(
                "losses.dark must lie in [0, 1), got {}",
                l.dark
            )));
        }
        if let Some(derived) = &self.derived_state {
            if !derived.pump_factor.is_finite() || derived.pump_factor <= 0.0 {
                return Err(Error::Config(format!(
                    "derived_state.pump_factor must be positive, got {}",
                    derived.pump_factor
                )));
            }
        }
        // Simulation timing fields are validated by RunConfig, but catch
        // nonsense early so `sweep` runs fail fast too.
        let s = &self.simulation;
        if !s.repetition_rate_hz.is_finite() || s.repetition_rate_hz <= 0.0 {
            return Err(Error::Config(format!(
                "simulation.repetition_rate_hz must be positive, got {}",
                s.repetition_rate_hz
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))
    }

    /// Hex SHA-256 of the canonical serialized form.
    pub fn digest(&self) -> Result<String> {
        Ok(format!("{:x}", Sha256::digest(self.to_toml()?.as_bytes())))
    }

    fn pump_spec(&self) -> Result<PumpSpec> {
        PumpSpec::new(self.pump.center_wavelength_nm, self.pump.spectral_width_hz)
    }

    fn phase_match_spec(&self) -> Result<PhaseMatchSpec> {
        PhaseMatchSpec::new(
            self.phase_matching.inverse_width_s,
            self.phase_matching.ridge_slope,
        )
    }

    fn filter_spec(&self) -> Result<FilterSpec> {
        FilterSpec::new(
            TWO_PI * self.filter.center_offset_hz,
            TWO_PI * self.filter.full_width_hz,
        )
    }

    fn frequency_grid(&self) -> Result<FrequencyGrid> {
        let half_span = self.grid.span_pump_widths * self.pump_spec()?.angular_width();
        FrequencyGrid::symmetric(half_span, self.grid.bins)
    }

    /// Schmidt coefficients of the filter-split source.  A pinned derived
    /// state replays exactly; otherwise the spectrum is built and
    /// decomposed from the optical parameters.
    pub fn coefficients(&self) -> Result<FilteredSchmidt> {
        if let Some(derived) = &self.derived_state {
            let b = derived.pump_factor;
            return FilteredSchmidt::from_coefficients(
                derived.transmitted_q.iter().map(|q| q / b).collect(),
                derived.reflected_q.iter().map(|q| q / b).collect(),
            );
        }
        let jsa = build_jsa(
            &self.pump_spec()?,
            &self.phase_match_spec()?,
            &self.frequency_grid()?,
        )?;
        let (t, r) = partition_by_filter(&jsa, &self.filter_spec()?);
        filtered_schmidt(&t, &r, self.truncation.max_modes_per_family)
    }

    /// Schmidt coefficients of the same source without any filter: every
    /// mode heralds, none is vetoed.
    pub fn unfiltered_coefficients(&self) -> Result<FilteredSchmidt> {
        let jsa = build_jsa(
            &self.pump_spec()?,
            &self.phase_match_spec()?,
            &self.frequency_grid()?,
        )?;
        let spectrum = schmidt_decompose(&jsa, self.truncation.max_modes_per_family)?;
        FilteredSchmidt::from_coefficients(spectrum.coefficients().to_vec(), Vec::new())
    }

    /// Bank with the pump factor calibrated to a mean pair number.
    pub fn bank_at(&self, coefficients: &FilteredSchmidt, n_bar: f64) -> Result<SqueezerBank> {
        let pump_factor = calibrate_pump_factor(coefficients, n_bar)?;
        squeezer_bank(coefficients, pump_factor)
    }

    /// The pinned bank from the derived-state section, if present.
    pub fn pinned_bank(&self) -> Result<Option<SqueezerBank>> {
        match &self.derived_state {
            None => Ok(None),
            Some(d) => Ok(Some(SqueezerBank::new(
                d.transmitted_q.clone(),
                d.reflected_q.clone(),
                d.pump_factor,
            )?)),
        }
    }

    /// Copy of this scenario with the bank pinned for replay.
    pub fn with_derived_state(&self, bank: &SqueezerBank) -> Scenario {
        let mut scenario = self.clone();
        scenario.derived_state = Some(DerivedState {
            transmitted_q: bank.transmitted().to_vec(),
            reflected_q: bank.reflected().to_vec(),
            pump_factor: bank.pump_factor(),
        });
        scenario
    }

    fn loss_budget(&self, preset: LossPreset) -> LossSection {
        match preset {
            LossPreset::Experimental => self.losses.clone(),
            LossPreset::Lossless => LossSection {
                herald_transmission: 1.0,
                heralded_transmission: 1.0,
                detector_efficiency: 1.0,
                dark: 0.0,
            },
        }
    }

    /// Detector seen by herald-arm photons: quantum efficiency times the
    /// herald path transmission.
    pub fn herald_detector(&self, preset: LossPreset) -> Result<DetectorModel> {
        let l = self.loss_budget(preset);
        DetectorModel::new(l.detector_efficiency, l.dark)?.attenuated(l.herald_transmission)
    }

    /// End-to-end detector seen by heralded-arm photons (Klyshko
    /// efficiency as a detector model).
    pub fn output_detector(&self, preset: LossPreset) -> Result<DetectorModel> {
        let l = self.loss_budget(preset);
        DetectorModel::new(l.detector_efficiency, l.dark)?.attenuated(l.heralded_transmission)
    }

    /// Heralded-arm end-to-end efficiency.
    pub fn klyshko(&self, preset: LossPreset) -> f64 {
        let l = self.loss_budget(preset);
        l.heralded_transmission * l.detector_efficiency
    }

    /// Assembles a run configuration around a concrete bank.
    pub fn run_config(
        &self,
        bank: SqueezerBank,
        preset: LossPreset,
        scheme: HeraldScheme,
        feed_forward: bool,
    ) -> Result<RunConfig> {
        let l = self.loss_budget(preset);
        let s = &self.simulation;
        let detector = DetectorModel::new(l.detector_efficiency, l.dark)?;
        let config = RunConfig {
            repetition_rate_hz: s.repetition_rate_hz,
            pulses: s.pulses,
            bank,
            herald_transmission: l.herald_transmission,
            heralded_transmission: l.heralded_transmission,
            det_t: detector,
            det_r: detector,
            det_d1: detector,
            det_d2: detector,
            delay_s: s.delay_s,
            on_time_s: s.on_time_s,
            extinction_db: s.extinction_db,
            scheme,
            feed_forward,
            seed: s.seed,
        };
        config.validate()?;
        Ok(config)
    }
}
