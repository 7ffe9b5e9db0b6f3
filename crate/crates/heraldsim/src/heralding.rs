//! Detector response and quality metrics of the heralded photon state.
//!
//! The herald arm of the source is split by a spectral filter into a
//! transmitted family (watched by the herald detector) and a reflected
//! family (watched by the veto detector under extended heralding).  All
//! metrics are expectation values over the photon-number occupation
//! patterns of [`crate::pdcstate`], truncated at a maximum total photon
//! count.  Instead of enumerating patterns one by one, the sums are carried
//! out over the distribution of each family's total count (the per-pattern
//! weights only enter through those totals), which is exactly equivalent
//! and much cheaper; the equivalence is asserted against literal pattern
//! enumeration in the tests.

use crate::error::Error;
use crate::kahan::KahanSum;
use crate::pdcstate::SqueezerBank;
use crate::Result;

/// Threshold (click / no-click) detector with quantum efficiency and a
/// per-pulse dark-count probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub dark: f64,
}

impl DetectorModel {
    pub fn new(efficiency: f64, dark: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) || !efficiency.is_finite() {
            return Err(Error::Config(format!(
                "detector efficiency must lie in [0, 1], got {efficiency}"
            )));
        }
        if !(0.0..1.0).contains(&dark) || !dark.is_finite() {
            return Err(Error::Config(format!(
                "dark-count probability must lie in [0, 1), got {dark}"
            )));
        }
        Ok(Self { efficiency, dark })
    }

    /// A detector that never clicks, used to disable the veto arm under
    /// standard heralding.
    pub fn blind() -> Self {
        Self {
            efficiency: 0.0,
            dark: 0.0,
        }
    }

    /// Probability of at least one click given `n` incident photons:
    /// `c_n = 1 - (1 - d)(1 - eta)^n`.  Nondecreasing in `n`.
    pub fn click_coefficient(&self, n: u32) -> f64 {
        1.0 - self.noclick_coefficient(n)
    }

    /// Probability of no click given `n` incident photons:
    /// `(1 - d)(1 - eta)^n`.
    pub fn noclick_coefficient(&self, n: u32) -> f64 {
        (1.0 - self.dark) * (1.0 - self.efficiency).powi(n as i32)
    }

    /// Same detector with its efficiency scaled by an upstream transmission
    /// factor.
    pub fn attenuated(&self, transmission: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmission) {
            return Err(Error::Config(format!(
                "transmission must lie in [0, 1], got {transmission}"
            )));
        }
        Self::new(self.efficiency * transmission, self.dark)
    }
}

/// Which condition announces a photon in the heralded arm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeraldScheme {
    /// Click on the transmitted-family detector.
    Standard,
    /// Click on the transmitted-family detector and no click on the
    /// reflected-family veto detector.
    Extended,
}

impl std::fmt::Display for HeraldScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HeraldScheme::Standard => "standard",
            HeraldScheme::Extended => "extended",
        })
    }
}

impl std::str::FromStr for HeraldScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(HeraldScheme::Standard),
            "extended" => Ok(HeraldScheme::Extended),
            other => Err(Error::Config(format!(
                "unknown heralding scheme '{other}' (expected 'standard' or 'extended')"
            ))),
        }
    }
}

/// Distribution of a mode family's total photon count, truncated at `n_max`.
///
/// `pmf[n]` is the exact probability that the family's modes hold `n`
/// photons in total; mass beyond `n_max` is dropped, not renormalized.
fn total_count_pmf(qs: &[f64], n_max: u32) -> Vec<f64> {
    let n = n_max as usize;
    let mut pmf = vec![0.0; n + 1];
    pmf[0] = 1.0;
    let mut next = vec![0.0; n + 1];
    for &q in qs {
        let mu = q.tanh().powi(2);
        if mu == 0.0 {
            continue;
        }
        next.fill(0.0);
        for (total, &p) in pmf.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut geom = 1.0 - mu;
            for slot in next.iter_mut().skip(total) {
                *slot += p * geom;
                geom *= mu;
            }
        }
        std::mem::swap(&mut pmf, &mut next);
    }
    pmf
}

/// Probability that the herald detector clicks on the transmitted family,
/// with the reflected family marginalized out.
pub fn p_herald(bank: &SqueezerBank, det_t: &DetectorModel, n_max: u32) -> f64 {
    let mut sum = KahanSum::new();
    for (n, p) in total_count_pmf(bank.transmitted(), n_max)
        .iter()
        .enumerate()
    {
        sum.add(p * det_t.click_coefficient(n as u32));
    }
    sum.value()
}

/// Probability that the veto detector registers no click on the reflected
/// family, with the transmitted family marginalized out.
pub fn p_ext(bank: &SqueezerBank, det_r: &DetectorModel, n_max: u32) -> f64 {
    let mut sum = KahanSum::new();
    for (n, p) in total_count_pmf(bank.reflected(), n_max).iter().enumerate() {
        sum.add(p * det_r.noclick_coefficient(n as u32));
    }
    sum.value()
}

/// Probability mass lost to the truncation of the joint pattern space at
/// total count `n_max`.
pub fn truncation_tail(bank: &SqueezerBank, n_max: u32) -> f64 {
    let t = total_count_pmf(bank.transmitted(), n_max);
    let r = total_count_pmf(bank.reflected(), n_max);
    let mut kept = 0.0;
    for (nt, pt) in t.iter().enumerate() {
        let cum_r: f64 = r[..=(n_max as usize - nt)].iter().sum();
        kept += pt * cum_r;
    }
    (1.0 - kept).max(0.0)
}

/// Overlap of the heralded state with a lone photon in the leading
/// transmitted mode.
///
/// The only pattern contributing is one photon in the top transmitted mode
/// and vacuum everywhere else; its weight, times the herald click and veto
/// no-click probabilities for that pattern, is divided by the product of
/// the herald and veto acceptance probabilities.
pub fn heralded_fidelity(
    bank: &SqueezerBank,
    det_t: &DetectorModel,
    det_r: &DetectorModel,
    n_max: u32,
) -> Result<f64> {
    let ph = p_herald(bank, det_t, n_max);
    let pe = p_ext(bank, det_r, n_max);
    if ph <= 0.0 || pe <= 0.0 {
        return Err(Error::UndefinedMetric(
            "heralded fidelity requires a nonzero herald probability".into(),
        ));
    }
    let vacuum: f64 = bank
        .all_qs()
        .iter()
        .map(|q| 1.0 - q.tanh().powi(2))
        .product();
    let mu_top = bank.transmitted().first().map_or(0.0, |q| q.tanh().powi(2));
    let numerator = vacuum * mu_top * det_t.click_coefficient(1) * det_r.noclick_coefficient(0);
    Ok(numerator / (ph * pe))
}

/// Single-modedness of the transmitted family:
/// `sum q^4 / (sum q^2)^2`.  Invariant under rescaling all q by a common
/// pump factor.
pub fn spectral_purity(transmitted_qs: &[f64]) -> Result<f64> {
    let sum_sq: f64 = transmitted_qs.iter().map(|q| q * q).sum();
    if sum_sq <= 0.0 {
        return Err(Error::UndefinedMetric(
            "spectral purity of an all-zero mode family".into(),
        ));
    }
    let sum_quart: f64 = transmitted_qs.iter().map(|q| q.powi(4)).sum();
    Ok(sum_quart / (sum_sq * sum_sq))
}

/// Second-order correlation of the heralded beam's total photon number,
/// conditioned on (herald click AND veto no-click):
/// `<n(n-1)> / <n>^2` with `n = n_t + n_r`.
///
/// The conditioning is evaluated on the exact joint truncated distribution
/// of the two family totals, not as a product of separately conditioned
/// marginals.
pub fn g2_heralded(
    bank: &SqueezerBank,
    det_t: &DetectorModel,
    det_r: &DetectorModel,
    n_max: u32,
) -> Result<f64> {
    let (norm, mean, fact2) = conditioned_moments(bank, n_max, |nt, nr| {
        det_t.click_coefficient(nt) * det_r.noclick_coefficient(nr)
    });
    if norm <= 0.0 || mean <= 0.0 {
        return Err(Error::UndefinedMetric(
            "heralded g2 conditioned on an impossible or photon-free herald".into(),
        ));
    }
    Ok(fact2 * norm / (mean * mean))
}

/// Unnormalized moments of the total photon count under a per-pattern
/// acceptance probability that depends only on the family totals.
///
/// Returns `(sum w, sum w n, sum w n(n-1))` over the grid
/// `n_t + n_r <= n_max`, with `w = P(n_t) P(n_r) accept(n_t, n_r)`.
fn conditioned_moments<F>(bank: &SqueezerBank, n_max: u32, accept: F) -> (f64, f64, f64)
where
    F: Fn(u32, u32) -> f64,
{
    let t = total_count_pmf(bank.transmitted(), n_max);
    let r = total_count_pmf(bank.reflected(), n_max);
    let mut norm = KahanSum::new();
    let mut mean = KahanSum::new();
    let mut fact2 = KahanSum::new();
    for (nt, pt) in t.iter().enumerate() {
        for (nr, pr) in r.iter().take(n_max as usize - nt + 1).enumerate() {
            let w = pt * pr * accept(nt as u32, nr as u32);
            let n = (nt + nr) as f64;
            norm.add(w);
            mean.add(w * n);
            fact2.add(w * n * (n - 1.0));
        }
    }
    (norm.value(), mean.value(), fact2.value())
}

/// First-order approximation to the heralded fidelity from the spectral
/// purity and the heralded g2: `sqrt(P) (1 - g2/2)`.
pub fn fidelity_approx(purity: f64, g2: f64) -> f64 {
    purity.sqrt() * (1.0 - 0.5 * g2)
}

/// Probability that the heralded arm is photon-free given that the herald
/// did not fire.
///
/// `det_heralded` is the effective end-to-end detector on the heralded arm
/// (channel transmission and any switch leakage folded into its
/// efficiency).  Its click probability conditioned on the no-herald
/// outcome is unfolded by the arm's Klyshko efficiency to a source-level
/// photon-presence probability: the result is `1 - P_click / klyshko`.
pub fn p_noclick_given_no_herald(
    bank: &SqueezerBank,
    det_t: &DetectorModel,
    det_r: &DetectorModel,
    det_heralded: &DetectorModel,
    klyshko: f64,
    n_max: u32,
) -> Result<f64> {
    if !(klyshko > 0.0 && klyshko <= 1.0) {
        return Err(Error::Config(format!(
            "Klyshko efficiency must lie in (0, 1], got {klyshko}"
        )));
    }
    let no_herald =
        |nt: u32, nr: u32| 1.0 - det_t.click_coefficient(nt) * det_r.noclick_coefficient(nr);
    let (click, _, _) = conditioned_moments(bank, n_max, |nt, nr| {
        no_herald(nt, nr) * det_heralded.click_coefficient(nt + nr)
    });
    let (no_herald_mass, _, _) = conditioned_moments(bank, n_max, no_herald);
    if no_herald_mass <= 0.0 {
        return Err(Error::UndefinedMetric(
            "no-herald outcome has zero probability".into(),
        ));
    }
    let p_click = click / no_herald_mass;
    unfold_noclick(p_click, klyshko)
}

/// Converts a detector-level click probability into a source-level
/// no-photon probability by dividing out the arm's Klyshko efficiency.
fn unfold_noclick(p_click: f64, klyshko: f64) -> Result<f64> {
    if p_click > klyshko {
        return Err(Error::InconsistentEfficiency { p_click, klyshko });
    }
    Ok(1.0 - p_click / klyshko)
}

/// Convex combination of delivering the heralded state (probability
/// `p_herald`, quality `fidelity`) and correctly delivering vacuum
/// (probability `1 - p_herald`, quality `p_noclick`).
pub fn source_fitness(p_herald: f64, fidelity: f64, p_noclick: f64) -> f64 {
    p_herald * fidelity + (1.0 - p_herald) * p_noclick
}

/// Everything the sweep reports for one bank and heralding configuration.
#[derive(Clone, Copy, Debug)]
pub struct HeraldMetrics {
    /// Click probability of the herald detector (transmitted family).
    pub p_herald: f64,
    /// No-click probability of the veto detector (1.0 under standard
    /// heralding, where no veto exists).
    pub p_ext: f64,
    /// Herald acceptance probability of the scheme as a whole.
    pub p_accept: f64,
    pub fidelity: f64,
    pub purity: f64,
    pub g2: f64,
    pub fidelity_approx: f64,
    /// None where the no-herald click probability exceeds the Klyshko
    /// efficiency and the unfolding leaves [0, 1].
    pub p_noclick: Option<f64>,
    pub fitness: Option<f64>,
    pub truncation_tail: f64,
    /// Set when the truncation discards more than 1e-3 of the probability
    /// mass and the metrics should not be trusted to three digits.
    pub tail_warning: bool,
}

/// Evaluates the full metric set for one bank.
///
/// Under [`HeraldScheme::Standard`] the veto detector is replaced by a
/// blind one, which reduces every formula to its single-detector form.
/// `det_heralded` and `klyshko` describe the heralded arm as seen by the
/// no-click figure; an inconsistent unfolding there is reported as
/// `p_noclick = None` rather than an error, since it only marks the edge
/// of that figure's domain.
pub fn herald_metrics(
    bank: &SqueezerBank,
    scheme: HeraldScheme,
    det_t: &DetectorModel,
    det_r: &DetectorModel,
    det_heralded: &DetectorModel,
    klyshko: f64,
    n_max: u32,
) -> Result<HeraldMetrics> {
    let veto = match scheme {
        HeraldScheme::Standard => DetectorModel::blind(),
        HeraldScheme::Extended => *det_r,
    };
    let ph = p_herald(bank, det_t, n_max);
    let pe = match scheme {
        HeraldScheme::Standard => 1.0,
        HeraldScheme::Extended => p_ext(bank, &veto, n_max),
    };
    let fidelity = heralded_fidelity(bank, det_t, &veto, n_max)?;
    let purity = spectral_purity(bank.transmitted())?;
    let g2 = g2_heralded(bank, det_t, &veto, n_max)?;
    let p_accept = ph * pe;
    let p_noclick =
        match p_noclick_given_no_herald(bank, det_t, &veto, det_heralded, klyshko, n_max) {
            Ok(v) => Some(v),
            Err(Error::InconsistentEfficiency { .. }) => None,
            Err(e) => return Err(e),
        };
    let fitness = p_noclick.map(|pn| source_fitness(p_accept, fidelity, pn));
    let tail = truncation_tail(bank, n_max);
    Ok(HeraldMetrics {
        p_herald: ph,
        p_ext: pe,
        p_accept,
        fidelity,
        purity,
        g2,
        fidelity_approx: fidelity_approx(purity, g2),
        p_noclick,
        fitness,
        truncation_tail: tail,
        tail_warning: tail > 1e-3,
    })
}
