//! Photon-number statistics of a bank of independent two-mode squeezers.
//!
//! Each spectral mode `k` of the source is an independent two-mode squeezer
//! with squeezing parameter `q_k = B lambda_k`, where `B` is the overall pump
//! power factor and `lambda_k` a Schmidt coefficient.  The signal/idler joint
//! state of one mode carries the photon-number distribution
//! `P(n) = sech^2(q) tanh^{2n}(q)`, i.e. a thermal distribution with
//! `mu = tanh^2(q)`.  Modes are grouped into the family transmitted by the
//! herald filter and the reflected remainder; both share the same pump
//! factor.

use crate::error::Error;
use crate::spectra::FilteredSchmidt;
use crate::Result;

/// Hard cap on the total number of modes accepted by the pattern enumerator.
/// Beyond this the pattern space is unmanageable and callers almost certainly
/// passed an untruncated spectrum by mistake.
pub const MAX_TOTAL_MODES: usize = 64;

/// Squeezing parameters of all modes, grouped by filter family.
///
/// Within each family the parameters are nonincreasing, mirroring the
/// ordering of the Schmidt coefficients they derive from.
#[derive(Clone, Debug, PartialEq)]
pub struct SqueezerBank {
    transmitted: Vec<f64>,
    reflected: Vec<f64>,
    pump_factor: f64,
}

impl SqueezerBank {
    /// Builds a bank from explicit squeezing parameters, recording the pump
    /// factor they were derived with.
    pub fn new(transmitted: Vec<f64>, reflected: Vec<f64>, pump_factor: f64) -> Result<Self> {
        for (name, qs) in [("transmitted", &transmitted), ("reflected", &reflected)] {
            for pair in qs.windows(2) {
                if pair[1] > pair[0] {
                    return Err(Error::Config(format!(
                        "{name} squeezing parameters must be nonincreasing"
                    )));
                }
            }
            if qs.iter().any(|q| !q.is_finite() || *q < 0.0) {
                return Err(Error::Config(format!(
                    "{name} squeezing parameters must be finite and nonnegative"
                )));
            }
        }
        if !pump_factor.is_finite() || pump_factor < 0.0 {
            return Err(Error::Config(format!(
                "pump factor must be finite and nonnegative, got {pump_factor}"
            )));
        }
        Ok(Self {
            transmitted,
            reflected,
            pump_factor,
        })
    }

    pub fn transmitted(&self) -> &[f64] {
        &self.transmitted
    }

    /// The pump power factor the squeezing parameters were built with.
    pub fn pump_factor(&self) -> f64 {
        self.pump_factor
    }

    pub fn reflected(&self) -> &[f64] {
        &self.reflected
    }

    pub fn mode_count(&self) -> usize {
        self.transmitted.len() + self.reflected.len()
    }

    /// All squeezing parameters in enumeration order (transmitted family
    /// first).
    pub fn all_qs(&self) -> Vec<f64> {
        let mut qs = self.transmitted.clone();
        qs.extend_from_slice(&self.reflected);
        qs
    }
}

/// Scales a filtered Schmidt spectrum into squeezing parameters,
/// `q_k = pump_factor * lambda_k` per mode in both families.
pub fn squeezer_bank(fs: &FilteredSchmidt, pump_factor: f64) -> Result<SqueezerBank> {
    let scale = |lams: &[f64]| lams.iter().map(|l| pump_factor * l).collect();
    SqueezerBank::new(scale(fs.transmitted()), scale(fs.reflected()), pump_factor)
}

/// Mean photon-pair number of the whole bank, `sum_k sinh^2(q_k)`.
pub fn mean_pair_number(bank: &SqueezerBank) -> f64 {
    bank.transmitted
        .iter()
        .chain(bank.reflected.iter())
        .map(|q| q.sinh().powi(2))
        .sum()
}

/// Finds the pump factor `B` such that the bank built from `fs` has the
/// requested mean pair number, to a relative accuracy of 1e-8.
///
/// `sum_k sinh^2(B lambda_k)` is strictly increasing in `B`, so plain
/// bracketing bisection is robust.
pub fn calibrate_pump_factor(fs: &FilteredSchmidt, target_pairs: f64) -> Result<f64> {
    if !target_pairs.is_finite() || target_pairs <= 0.0 {
        return Err(Error::Config(format!(
            "target mean pair number must be positive, got {target_pairs}"
        )));
    }
    let lambdas: Vec<f64> = fs
        .transmitted()
        .iter()
        .chain(fs.reflected().iter())
        .copied()
        .collect();
    if lambdas.iter().all(|l| *l == 0.0) {
        return Err(Error::Config(
            "cannot calibrate pump power on an empty spectrum".into(),
        ));
    }
    let pairs_at = |b: f64| -> f64 { lambdas.iter().map(|l| (b * l).sinh().powi(2)).sum() };

    let mut hi = 1.0f64;
    while pairs_at(hi) < target_pairs {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::Config(format!(
                "target mean pair number {target_pairs} is out of reach"
            )));
        }
    }
    let mut lo = 0.0f64;
    for _ in 0..128 {
        let mid = 0.5 * (lo + hi);
        if pairs_at(mid) < target_pairs {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Photon counts per mode, grouped like the bank they were drawn for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupationPattern {
    pub transmitted: Vec<u32>,
    pub reflected: Vec<u32>,
}

impl OccupationPattern {
    pub fn transmitted_total(&self) -> u32 {
        self.transmitted.iter().sum()
    }

    pub fn reflected_total(&self) -> u32 {
        self.reflected.iter().sum()
    }

    /// Total photon count over both families.
    pub fn total(&self) -> u32 {
        self.transmitted_total() + self.reflected_total()
    }
}

/// A pattern together with its probability weight
/// `prod_k sech^2(q_k) tanh^{2 n_k}(q_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPattern {
    pub pattern: OccupationPattern,
    pub weight: f64,
}

/// Streaming enumeration of every occupation pattern with total photon count
/// up to `n_max`, in lexicographic order over the mode counts (transmitted
/// family first).
///
/// Modes with `q = 0` can only ever hold zero photons (their weight for any
/// other count is exactly zero), so such counts are pruned rather than
/// yielded.
pub fn enumerate_patterns(bank: &SqueezerBank, n_max: u32) -> Result<PatternEnumeration> {
    let modes = bank.mode_count();
    if modes > MAX_TOTAL_MODES {
        return Err(Error::TooManyModes {
            modes,
            max: MAX_TOTAL_MODES,
        });
    }
    let mu: Vec<f64> = bank.all_qs().iter().map(|q| q.tanh().powi(2)).collect();
    let base: f64 = mu.iter().map(|m| 1.0 - m).product();
    let active: Vec<usize> = (0..modes).filter(|&i| mu[i] > 0.0).collect();
    let prefix = vec![base; active.len() + 1];
    let tail_bound = chernoff_tail_bound(&mu, n_max);
    Ok(PatternEnumeration {
        mu,
        n_transmitted: bank.transmitted.len(),
        n_max,
        counts: vec![0; modes],
        active,
        prefix,
        total: 0,
        started: false,
        done: false,
        tail_bound,
    })
}

pub struct PatternEnumeration {
    mu: Vec<f64>,
    n_transmitted: usize,
    n_max: u32,
    counts: Vec<u32>,
    /// Indices of modes with nonzero thermal weight; only these can carry
    /// photons.
    active: Vec<usize>,
    /// `prefix[i]` is the weight of the first `i` active modes at their
    /// current counts, times the global vacuum factor.
    prefix: Vec<f64>,
    total: u32,
    started: bool,
    done: bool,
    tail_bound: f64,
}

impl PatternEnumeration {
    /// Upper bound on the probability mass of all patterns beyond the
    /// truncation, i.e. on `1 - sum of yielded weights`.
    ///
    /// This is a Chernoff bound: for any `z` in `(1, 1/max mu_k)`,
    /// `P(n_tot > n_max) <= z^-(n_max+1) prod_k (1-mu_k)/(1-mu_k z)`;
    /// the bound is minimized over a fixed logarithmic grid of `z`.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    fn current(&self) -> WeightedPattern {
        let (t, r) = self.counts.split_at(self.n_transmitted);
        WeightedPattern {
            pattern: OccupationPattern {
                transmitted: t.to_vec(),
                reflected: r.to_vec(),
            },
            weight: self.prefix[self.active.len()],
        }
    }

    /// Advances the count vector to its lexicographic successor among
    /// patterns with total count at most `n_max`.  Returns false once
    /// exhausted.
    fn advance(&mut self) -> bool {
        if self.total < self.n_max && !self.active.is_empty() {
            let i = self.active.len() - 1;
            self.counts[self.active[i]] += 1;
            self.total += 1;
            self.prefix[i + 1] *= self.mu[self.active[i]];
            return true;
        }
        // Total is saturated (or nothing can be incremented): zero the
        // rightmost occupied mode and push one photon into its left
        // neighbour.
        let Some(j) = (0..self.active.len())
            .rev()
            .find(|&j| self.counts[self.active[j]] > 0)
        else {
            return false;
        };
        if j == 0 {
            return false;
        }
        self.total -= self.counts[self.active[j]];
        self.counts[self.active[j]] = 0;
        self.counts[self.active[j - 1]] += 1;
        self.total += 1;
        self.prefix[j] *= self.mu[self.active[j - 1]];
        let carried = self.prefix[j];
        for k in j + 1..=self.active.len() {
            self.prefix[k] = carried;
        }
        true
    }
}

impl Iterator for PatternEnumeration {
    type Item = WeightedPattern;

    fn next(&mut self) -> Option<WeightedPattern> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.current());
        }
        if self.advance() {
            Some(self.current())
        } else {
            self.done = true;
            None
        }
    }
}

fn chernoff_tail_bound(mu: &[f64], n_max: u32) -> f64 {
    let mu_max = mu.iter().copied().fold(0.0f64, f64::max);
    if mu_max <= 0.0 {
        return 0.0;
    }
    let z_hi = 0.999_999 / mu_max;
    if z_hi <= 1.0 {
        return 1.0;
    }
    let mut best = 1.0f64;
    let steps = 400;
    let log_hi = z_hi.ln();
    for i in 1..=steps {
        let z = (log_hi * i as f64 / steps as f64).exp();
        let mut b = z.powi(-(n_max as i32 + 1));
        for &m in mu {
            b *= (1.0 - m) / (1.0 - m * z);
        }
        if b < best {
            best = b;
        }
    }
    best
}
