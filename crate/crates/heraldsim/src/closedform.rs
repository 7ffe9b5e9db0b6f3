//! Closed-form reference values for thermal click statistics.
//!
//! A single squeezed mode with squeezing parameter `q` carries a geometric
//! (thermal) photon-number distribution `P(n) = (1 - mu) mu^n` with
//! `mu = tanh^2(q)`, whose probability generating function is
//! `E[x^n] = (1 - mu) / (1 - mu x)`.  Everything in this module is evaluated
//! directly from that generating function.  It deliberately shares no code
//! with the pattern-enumeration route in [`crate::pdcstate`] and
//! [`crate::heralding`], so agreement between the two is a meaningful
//! cross-check rather than a tautology.

use crate::heralding::DetectorModel;

/// Probability that a threshold detector registers no click on the combined
/// output of the given squeezer modes.
///
/// Per mode this is `E[(1 - eta)^n] = (1 - mu) / (1 - mu (1 - eta))`; the
/// detector's dark-count probability contributes one global `(1 - d)` factor.
pub fn noclick_closed(qs: &[f64], det: &DetectorModel) -> f64 {
    let miss = 1.0 - det.efficiency;
    let mut p = 1.0 - det.dark;
    for &q in qs {
        let mu = q.tanh().powi(2);
        p *= (1.0 - mu) / (1.0 - mu * miss);
    }
    p
}

/// Unconditional mean photon number and second factorial moment
/// `<n (n - 1)>` of the total count over the given modes.
///
/// Each mode contributes `<n_k> = mu_k / (1 - mu_k) = sinh^2(q_k)` and, being
/// thermal, `<n_k (n_k - 1)> = 2 <n_k>^2`; distinct modes are independent, so
/// cross pairs contribute `<n_j><n_k>` for each ordered pair.
pub fn unconditional_moments(qs: &[f64]) -> (f64, f64) {
    let means: Vec<f64> = qs
        .iter()
        .map(|&q| {
            let mu = q.tanh().powi(2);
            mu / (1.0 - mu)
        })
        .collect();
    let mean: f64 = means.iter().sum();
    let mut second_factorial = 0.0;
    for (j, &nj) in means.iter().enumerate() {
        second_factorial += 2.0 * nj * nj;
        for &nk in &means[j + 1..] {
            second_factorial += 2.0 * nj * nk;
        }
    }
    (mean, second_factorial)
}
