//! Pulse-by-pulse Monte Carlo of the full source: pair generation, herald
//! detection, the delayed feed-forward switch with finite extinction, a
//! 50/50 output splitter, and time-tagged click records.
//!
//! Time is pulse-slotted.  Every photon of a pulse shares one arrival time
//! per channel, since all estimators downstream count per pulse and the
//! switch on-time is far below the pulse period.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::heralding::{DetectorModel, HeraldScheme};
use crate::pdcstate::{OccupationPattern, SqueezerBank};
use crate::{Error, Result};

/// Fixed latency between a pulse and the heralding-logic decision record.
const HERALD_OFFSET_PS: u64 = 100_000;

/// Algorithm name written into stream headers by [`simulate_run`].
const RNG_NAME: &str = "chacha8";

/// Output channels of the time tagger.  Declaration order is the tie-break
/// order for records with equal timestamps.
#[derive(Clone, Copy, Debug, Hash, PartialEq, Eq, PartialOrd, Ord)]
pub enum Channel {
    /// Transmitted-family herald detector.
    T,
    /// Reflected-family veto detector.
    R,
    /// First output detector behind the splitter.
    D1,
    /// Second output detector behind the splitter.
    D2,
    /// Heralding-logic decision marker.
    Herald,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::T => "T",
            Channel::R => "R",
            Channel::D1 => "D1",
            Channel::D2 => "D2",
            Channel::Herald => "HERALD",
        })
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" => Ok(Channel::T),
            "R" => Ok(Channel::R),
            "D1" => Ok(Channel::D1),
            "D2" => Ok(Channel::D2),
            "HERALD" => Ok(Channel::Herald),
            other => Err(Error::Config(format!("unknown channel '{other}'"))),
        }
    }
}

/// One time-tagged click or decision marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EventRecord {
    pub channel: Channel,
    pub pulse_index: u64,
    pub time_ps: u64,
}

/// Run parameters carried with every stream for traceability and analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamHeader {
    pub digest: String,
    pub seed: u64,
    pub rng: String,
    pub repetition_rate_hz: f64,
    pub pulses: u64,
    pub scheme: HeraldScheme,
    pub feed_forward: bool,
    pub extinction_db: f64,
    pub delay_ps: u64,
    pub dark_d1: f64,
    pub dark_d2: f64,
}

/// An immutable, globally time-sorted record list with its header.
#[derive(Clone, Debug, PartialEq)]
pub struct EventStream {
    pub header: StreamHeader,
    pub records: Vec<EventRecord>,
}

/// Everything needed to simulate one run.
///
/// The herald-path transmission is folded into the T and R detector
/// efficiencies; the heralded-path transmission acts on each idler photon
/// before the switch.  `feed_forward = false` models the switch taken out
/// of the path (post-selected operation), so no gating is applied at all.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub repetition_rate_hz: f64,
    pub pulses: u64,
    pub bank: SqueezerBank,
    pub herald_transmission: f64,
    pub heralded_transmission: f64,
    pub det_t: DetectorModel,
    pub det_r: DetectorModel,
    pub det_d1: DetectorModel,
    pub det_d2: DetectorModel,
    pub delay_s: f64,
    pub on_time_s: f64,
    pub extinction_db: f64,
    pub scheme: HeraldScheme,
    pub feed_forward: bool,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.repetition_rate_hz.is_finite()
            || self.repetition_rate_hz <= 0.0
            || self.repetition_rate_hz > 1e12
        {
            return Err(Error::Config(format!(
                "repetition rate must lie in (0, 1e12] Hz, got {}",
                self.repetition_rate_hz
            )));
        }
        for (name, t) in [
            ("herald", self.herald_transmission),
            ("heralded", self.heralded_transmission),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!(
                    "{name} path transmission must lie in [0, 1], got {t}"
                )));
            }
        }
        for (name, d) in [("delay", self.delay_s), ("switch on-time", self.on_time_s)] {
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be a positive duration, got {d} s"
                )));
            }
        }
        if self.extinction_db.is_nan() || self.extinction_db < 0.0 {
            return Err(Error::Config(format!(
                "extinction ratio must be >= 0 dB, got {}",
                self.extinction_db
            )));
        }
        Ok(())
    }

    fn digest(&self) -> String {
        let join = |qs: &[f64]| {
            qs.iter()
                .map(|q| q.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut text = String::new();
        for (key, value) in [
            ("repetition_rate_hz", self.repetition_rate_hz.to_string()),
            ("pulses", self.pulses.to_string()),
            ("transmitted_q", join(self.bank.transmitted())),
            ("reflected_q", join(self.bank.reflected())),
            ("pump_factor", self.bank.pump_factor().to_string()),
            ("herald_transmission", self.herald_transmission.to_string()),
            (
                "heralded_transmission",
                self.heralded_transmission.to_string(),
            ),
            ("det_t", detector_text(&self.det_t)),
            ("det_r", detector_text(&self.det_r)),
            ("det_d1", detector_text(&self.det_d1)),
            ("det_d2", detector_text(&self.det_d2)),
            ("delay_s", self.delay_s.to_string()),
            ("on_time_s", self.on_time_s.to_string()),
            ("extinction_db", self.extinction_db.to_string()),
            ("scheme", self.scheme.to_string()),
            ("feed_forward", self.feed_forward.to_string()),
            ("seed", self.seed.to_string()),
        ] {
            text.push_str(key);
            text.push('=');
            text.push_str(&value);
            text.push('\n');
        }
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

fn detector_text(det: &DetectorModel) -> String {
    format!("{},{}", det.efficiency, det.dark)
}

/// Draws one photon-pair pattern, one geometric draw per mode in bank order
/// (transmitted family first).  Sampling is untruncated.
pub fn sample_pattern<R: Rng>(bank: &SqueezerBank, rng: &mut R) -> OccupationPattern {
    let mut draw = |q: f64| -> u32 {
        let u: f64 = rng.gen();
        let mu = q.tanh().powi(2);
        if mu <= 0.0 {
            return 0;
        }
        // P(n >= k) = mu^k, inverted through the uniform draw.
        ((1.0 - u).ln() / mu.ln()) as u32
    };
    OccupationPattern {
        transmitted: bank.transmitted().iter().map(|&q| draw(q)).collect(),
        reflected: bank.reflected().iter().map(|&q| draw(q)).collect(),
    }
}

/// Simulates `config.pulses` pulses and returns the sorted stream.
///
/// Per pulse, draws are consumed in a fixed order: one geometric per mode,
/// one click draw each for T and R, the draw-free heralding decision, one
/// survival draw per idler photon (switch and path losses combined), one
/// splitter draw per survivor, and one click draw each for D1 and D2.
/// Every pulse uses its own counter-indexed RNG substream, so the stream
/// is reproducible and pulses could be generated in any order.
pub fn simulate_run(config: &RunConfig) -> Result<EventStream> {
    config.validate()?;
    let det_t = config.det_t.attenuated(config.herald_transmission)?;
    let det_r = config.det_r.attenuated(config.herald_transmission)?;
    let period_ps = (1e12 / config.repetition_rate_hz).round() as u64;
    let delay_ps = (config.delay_s * 1e12).round() as u64;
    let leakage = 10f64.powf(-config.extinction_db / 10.0);

    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::new();
    for pulse in 0..config.pulses {
        let mut rng = base.clone();
        rng.set_stream(pulse);
        let pattern = sample_pattern(&config.bank, &mut rng);

        let click_t = rng.gen::<f64>() < det_t.click_coefficient(pattern.transmitted_total());
        let click_r = rng.gen::<f64>() < det_r.click_coefficient(pattern.reflected_total());
        let herald = match config.scheme {
            HeraldScheme::Standard => click_t,
            HeraldScheme::Extended => click_t && !click_r,
        };

        let gate = if config.feed_forward && !herald {
            leakage
        } else {
            1.0
        };
        let pass = config.heralded_transmission * gate;
        let mut n1 = 0u32;
        let mut n2 = 0u32;
        for _ in 0..pattern.total() {
            if rng.gen::<f64>() < pass {
                if rng.gen::<f64>() < 0.5 {
                    n1 += 1;
                } else {
                    n2 += 1;
                }
            }
        }
        let click_d1 = rng.gen::<f64>() < config.det_d1.click_coefficient(n1);
        let click_d2 = rng.gen::<f64>() < config.det_d2.click_coefficient(n2);

        let t0 = pulse * period_ps;
        let mut push = |channel, time_ps| {
            records.push(EventRecord {
                channel,
                pulse_index: pulse,
                time_ps,
            })
        };
        if click_t {
            push(Channel::T, t0);
        }
        if click_r {
            push(Channel::R, t0);
        }
        if herald {
            push(Channel::Herald, t0 + HERALD_OFFSET_PS);
        }
        if click_d1 {
            push(Channel::D1, t0 + delay_ps);
        }
        if click_d2 {
            push(Channel::D2, t0 + delay_ps);
        }
    }
    records.sort_unstable_by_key(|r| (r.time_ps, r.channel, r.pulse_index));

    Ok(EventStream {
        header: StreamHeader {
            digest: config.digest(),
            seed: config.seed,
            rng: RNG_NAME.to_string(),
            repetition_rate_hz: config.repetition_rate_hz,
            pulses: config.pulses,
            scheme: config.scheme,
            feed_forward: config.feed_forward,
            extinction_db: config.extinction_db,
            delay_ps,
            dark_d1: config.det_d1.dark,
            dark_d2: config.det_d2.dark,
        },
        records,
    })
}

const COLUMNS: &str = "channel,pulse_index,time_ps";

/// Writes the stream as UTF-8 CSV: `# key = value` header lines, the column
/// line, then one sorted record per row.
pub fn write_stream(stream: &EventStream, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let h = &stream.header;
    for (key, value) in [
        ("digest", h.digest.clone()),
        ("seed", h.seed.to_string()),
        ("rng", h.rng.clone()),
        ("repetition_rate_hz", h.repetition_rate_hz.to_string()),
        ("pulses", h.pulses.to_string()),
        ("scheme", h.scheme.to_string()),
        ("feed_forward", h.feed_forward.to_string()),
        ("extinction_db", h.extinction_db.to_string()),
        ("delay_ps", h.delay_ps.to_string()),
        ("dark_d1", h.dark_d1.to_string()),
        ("dark_d2", h.dark_d2.to_string()),
    ] {
        writeln!(w, "# {key} = {value}")?;
    }
    writeln!(w, "{COLUMNS}")?;
    for r in &stream.records {
        writeln!(w, "{},{},{}", r.channel, r.pulse_index, r.time_ps)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a stream written by [`write_stream`], enforcing the header schema,
/// record ordering, and pulse-index bounds.  Errors carry the line number.
pub fn read_stream(path: &Path) -> Result<EventStream> {
    let reader = BufReader::new(File::open(path)?);
    let fail = |line: usize, message: String| Error::Stream {
        path: path.display().to_string(),
        line,
        message,
    };

    let mut fields: HashMap<String, String> = HashMap::new();
    let mut header: Option<StreamHeader> = None;
    let mut records = Vec::new();
    let mut last_key = None;
    for (index, line) in reader.lines().enumerate() {
        let number = index + 1;
        let line = line?;
        let Some(h) = &header else {
            if let Some(rest) = line.strip_prefix('#') {
                let (key, value) = rest
                    .split_once('=')
                    .ok_or_else(|| fail(number, "header line without '='".into()))?;
                fields.insert(key.trim().to_string(), value.trim().to_string());
                continue;
            }
            if line != COLUMNS {
                return Err(fail(number, format!("expected column line '{COLUMNS}'")));
            }
            header = Some(parse_header(&fields).map_err(|m| fail(number, m))?);
            continue;
        };

        let mut parts = line.split(',');
        let (Some(channel), Some(pulse), Some(time), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(fail(number, "expected 3 comma-separated fields".into()));
        };
        let record = EventRecord {
            channel: channel
                .parse::<Channel>()
                .map_err(|e| fail(number, e.to_string()))?,
            pulse_index: pulse
                .parse::<u64>()
                .map_err(|e| fail(number, format!("bad pulse index '{pulse}': {e}")))?,
            time_ps: time
                .parse::<u64>()
                .map_err(|e| fail(number, format!("bad timestamp '{time}': {e}")))?,
        };
        if record.pulse_index >= h.pulses {
            return Err(fail(
                number,
                format!(
                    "pulse index {} out of range for {} pulses",
                    record.pulse_index, h.pulses
                ),
            ));
        }
        if let Some(key) = last_key {
            if (record.time_ps, record.channel) < key {
                return Err(fail(number, "records out of order".into()));
            }
        }
        last_key = Some((record.time_ps, record.channel));
        records.push(record);
    }

    let header = header.ok_or_else(|| fail(0, "missing column line".into()))?;
    Ok(EventStream { header, records })
}

fn parse_header(fields: &HashMap<String, String>) -> std::result::Result<StreamHeader, String> {
    let known = [
        "digest",
        "seed",
        "rng",
        "repetition_rate_hz",
        "pulses",
        "scheme",
        "feed_forward",
        "extinction_db",
        "delay_ps",
        "dark_d1",
        "dark_d2",
    ];
    for key in fields.keys() {
        if !known.contains(&key.as_str()) {
            return Err(format!("unknown header key '{key}'"));
        }
    }
    let get = |key: &str| {
        fields
            .get(key)
            .ok_or_else(|| format!("missing header key '{key}'"))
    };
    fn number<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
    where
        T::Err: fmt::Display,
    {
        value
            .parse()
            .map_err(|e| format!("bad value for '{key}': {e}"))
    }

    Ok(StreamHeader {
        digest: get("digest")?.clone(),
        seed: number("seed", get("seed")?)?,
        rng: get("rng")?.clone(),
        repetition_rate_hz: number("repetition_rate_hz", get("repetition_rate_hz")?)?,
        pulses: number("pulses", get("pulses")?)?,
        scheme: get("scheme")?
            .parse::<HeraldScheme>()
            .map_err(|e| e.to_string())?,
        feed_forward: number("feed_forward", get("feed_forward")?)?,
        extinction_db: number("extinction_db", get("extinction_db")?)?,
        delay_ps: number("delay_ps", get("delay_ps")?)?,
        dark_d1: number("dark_d1", get("dark_d1")?)?,
        dark_d2: number("dark_d2", get("dark_d2")?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heralding::{p_ext, p_herald};
    use std::collections::HashSet;

    fn det(eta: f64, dark: f64) -> DetectorModel {
        DetectorModel::new(eta, dark).unwrap()
    }

    fn config(transmitted: &[f64], reflected: &[f64]) -> RunConfig {
        RunConfig {
            repetition_rate_hz: 5e5,
            pulses: 1000,
            bank: SqueezerBank::new(transmitted.to_vec(), reflected.to_vec(), 1.0).unwrap(),
            herald_transmission: 1.0,
            heralded_transmission: 1.0,
            det_t: det(1.0, 0.0),
            det_r: det(1.0, 0.0),
            det_d1: det(1.0, 0.0),
            det_d2: det(1.0, 0.0),
            delay_s: 1e-6,
            on_time_s: 2e-7,
            extinction_db: 20.0,
            scheme: HeraldScheme::Extended,
            feed_forward: false,
            seed: 11,
        }
    }

    #[test]
    fn geometric_sampling_follows_the_thermal_law() {
        let bank = SqueezerBank::new(vec![0.2], vec![], 1.0).unwrap();
        let mu = 0.2f64.tanh().powi(2);
        let n = 1_000_000u32;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut zeros = 0u32;
        let mut total = 0u64;
        for _ in 0..n {
            let count = sample_pattern(&bank, &mut rng).transmitted[0];
            if count == 0 {
                zeros += 1;
            }
            total += u64::from(count);
        }

        let p0 = 1.0 - mu;
        let sigma = (p0 * (1.0 - p0) * f64::from(n)).sqrt();
        assert!((f64::from(zeros) - p0 * f64::from(n)).abs() < 3.0 * sigma);

        let mean = mu / (1.0 - mu);
        let sigma_mean = (mu / (1.0 - mu).powi(2) / f64::from(n)).sqrt();
        assert!((total as f64 / f64::from(n) - mean).abs() < 3.0 * sigma_mean);
    }

    #[test]
    fn zero_squeezing_always_yields_the_vacuum_pattern() {
        let bank = SqueezerBank::new(vec![0.0, 0.0], vec![0.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            assert_eq!(sample_pattern(&bank, &mut rng).total(), 0);
        }
    }

    #[test]
    fn dark_free_vacuum_run_produces_no_records() {
        let stream = simulate_run(&config(&[0.0], &[0.0])).unwrap();
        assert!(stream.records.is_empty());
    }

    #[test]
    fn zero_pulse_run_is_a_valid_empty_stream() {
        let mut cfg = config(&[0.3], &[0.2]);
        cfg.pulses = 0;
        let stream = simulate_run(&cfg).unwrap();
        assert!(stream.records.is_empty());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_stream(&stream, &path).unwrap();
        assert_eq!(read_stream(&path).unwrap(), stream);
    }

    #[test]
    fn identical_seed_reproduces_the_stream_bit_for_bit() {
        let mut cfg = config(&[0.3], &[0.25]);
        cfg.pulses = 2000;
        cfg.det_d1 = det(0.8, 1e-4);
        cfg.det_d2 = det(0.85, 2e-4);
        let a = simulate_run(&cfg).unwrap();
        let b = simulate_run(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(!a.records.is_empty());

        let dir = tempfile::tempdir().unwrap();
        let pa = dir.path().join("a.csv");
        let pb = dir.path().join("b.csv");
        write_stream(&a, &pa).unwrap();
        write_stream(&b, &pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());

        cfg.seed += 1;
        let c = simulate_run(&cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn herald_rate_matches_the_analytic_probability() {
        let mut cfg = config(&[0.35], &[0.25]);
        cfg.pulses = 1_000_000;
        cfg.herald_transmission = 0.3;
        cfg.det_t = det(0.9, 0.0);
        cfg.det_r = det(0.9, 0.0);
        let stream = simulate_run(&cfg).unwrap();

        let det_eff = cfg.det_t.attenuated(cfg.herald_transmission).unwrap();
        let p = p_herald(&cfg.bank, &det_eff, 20) * p_ext(&cfg.bank, &det_eff, 20);
        let heralds = stream
            .records
            .iter()
            .filter(|r| r.channel == Channel::Herald)
            .count() as f64;
        let sigma = (p * (1.0 - p) * cfg.pulses as f64).sqrt();
        assert!(
            (heralds - p * cfg.pulses as f64).abs() < 3.0 * sigma,
            "herald count {heralds} vs expected {}",
            p * cfg.pulses as f64
        );
    }

    fn pulse_clicks(stream: &EventStream) -> HashMap<u64, (bool, bool, bool)> {
        let mut map: HashMap<u64, (bool, bool, bool)> = HashMap::new();
        for r in &stream.records {
            let entry = map.entry(r.pulse_index).or_default();
            match r.channel {
                Channel::Herald => entry.0 = true,
                Channel::D1 => entry.1 = true,
                Channel::D2 => entry.2 = true,
                _ => {}
            }
        }
        map
    }

    #[test]
    fn gate_suppresses_unheralded_pulses_by_the_extinction_ratio() {
        // Weak per-photon detection keeps the unheralded click rate linear
        // in the switch transmission, so the gated/ungated ratio estimates
        // the leakage directly.
        let mut cfg = config(&[0.25], &[0.2]);
        cfg.pulses = 4_000_000;
        cfg.herald_transmission = 0.3;
        cfg.det_t = det(0.9, 0.0);
        cfg.det_r = det(0.9, 0.0);
        cfg.heralded_transmission = 0.5;
        cfg.det_d1 = det(0.1, 0.0);
        cfg.det_d2 = det(0.1, 0.0);

        cfg.feed_forward = true;
        let gated = pulse_clicks(&simulate_run(&cfg).unwrap());
        cfg.feed_forward = false;
        let open = pulse_clicks(&simulate_run(&cfg).unwrap());

        let unheralded_clicks = |map: &HashMap<u64, (bool, bool, bool)>| {
            map.values()
                .filter(|(herald, _, _)| !herald)
                .map(|(_, d1, d2)| u32::from(*d1) + u32::from(*d2))
                .sum::<u32>() as f64
        };
        let on = unheralded_clicks(&gated);
        let off = unheralded_clicks(&open);
        assert!(on > 50.0, "too few leaked clicks ({on}) to test the ratio");

        let leakage = 10f64.powf(-cfg.extinction_db / 10.0);
        let ratio = on / off;
        let sigma = ratio * (1.0 / on + 1.0 / off).sqrt();
        assert!(
            (ratio - leakage).abs() < 3.0 * sigma,
            "ratio {ratio} vs leakage {leakage} (sigma {sigma})"
        );
    }

    #[test]
    fn heralded_photons_split_evenly_between_the_outputs() {
        let mut cfg = config(&[0.22], &[]);
        cfg.pulses = 1_000_000;
        let stream = simulate_run(&cfg).unwrap();
        let c1 = stream
            .records
            .iter()
            .filter(|r| r.channel == Channel::D1)
            .count() as f64;
        let c2 = stream
            .records
            .iter()
            .filter(|r| r.channel == Channel::D2)
            .count() as f64;
        let total = c1 + c2;
        assert!(total > 10_000.0);
        assert!(
            (c1 - total / 2.0).abs() < 3.0 * (total / 4.0).sqrt(),
            "split {c1} / {c2}"
        );
    }

    #[test]
    fn perfect_gate_blocks_all_unheralded_light() {
        let mut cfg = config(&[0.3], &[0.25]);
        cfg.pulses = 200_000;
        cfg.feed_forward = true;
        cfg.extinction_db = f64::INFINITY;
        cfg.det_t = det(0.4, 0.0);
        let stream = simulate_run(&cfg).unwrap();

        let heralded: HashSet<u64> = stream
            .records
            .iter()
            .filter(|r| r.channel == Channel::Herald)
            .map(|r| r.pulse_index)
            .collect();
        let outputs: Vec<u64> = stream
            .records
            .iter()
            .filter(|r| matches!(r.channel, Channel::D1 | Channel::D2))
            .map(|r| r.pulse_index)
            .collect();
        assert!(!outputs.is_empty());
        assert!((heralded.len() as u64) < cfg.pulses);
        assert!(outputs.iter().all(|p| heralded.contains(p)));
    }

    #[test]
    fn streams_are_globally_sorted_with_channel_tie_break() {
        let mut cfg = config(&[0.4], &[0.3]);
        cfg.pulses = 5000;
        cfg.det_d1 = det(0.9, 1e-3);
        cfg.det_d2 = det(0.9, 1e-3);
        let stream = simulate_run(&cfg).unwrap();
        assert!(stream
            .records
            .windows(2)
            .all(|w| (w[0].time_ps, w[0].channel) <= (w[1].time_ps, w[1].channel)));
    }

    #[test]
    fn round_trip_preserves_every_field() {
        let mut cfg = config(&[0.3, 0.1], &[0.2]);
        cfg.pulses = 1500;
        cfg.det_d1 = det(0.75, 1e-5);
        cfg.det_d2 = det(0.8, 3e-5);
        cfg.feed_forward = true;
        cfg.extinction_db = 17.5;
        let stream = simulate_run(&cfg).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        write_stream(&stream, &path).unwrap();
        let reread = read_stream(&path).unwrap();
        assert_eq!(reread, stream);

        let second = dir.path().join("again.csv");
        write_stream(&reread, &second).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&second).unwrap()
        );
    }

    fn parse_str(content: &str) -> Result<EventStream> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixture.csv");
        std::fs::write(&path, content).unwrap();
        read_stream(&path)
    }

    const FIXTURE_HEADER: &str = "# digest = abc\n# seed = 7\n# rng = chacha8\n\
         # repetition_rate_hz = 500000\n# pulses = 10\n# scheme = extended\n\
         # feed_forward = false\n# extinction_db = 20\n# delay_ps = 1000000\n\
         # dark_d1 = 0\n# dark_d2 = 0\nchannel,pulse_index,time_ps\n";

    #[test]
    fn hand_written_fixture_parses_to_expected_records() {
        let content = format!("{FIXTURE_HEADER}T,0,0\nHERALD,0,100000\nD1,0,1000000\n");
        let stream = parse_str(&content).unwrap();
        assert_eq!(stream.header.seed, 7);
        assert_eq!(stream.header.pulses, 10);
        assert_eq!(stream.header.scheme, HeraldScheme::Extended);
        assert_eq!(
            stream.records,
            vec![
                EventRecord {
                    channel: Channel::T,
                    pulse_index: 0,
                    time_ps: 0
                },
                EventRecord {
                    channel: Channel::Herald,
                    pulse_index: 0,
                    time_ps: 100_000
                },
                EventRecord {
                    channel: Channel::D1,
                    pulse_index: 0,
                    time_ps: 1_000_000
                },
            ]
        );
    }

    #[test]
    fn malformed_files_report_the_offending_line() {
        let line_of = |content: &str| match parse_str(content) {
            Err(Error::Stream { line, .. }) => line,
            other => panic!("expected a stream error, got {other:?}"),
        };

        assert_eq!(
            line_of("# digest = a\n# oops = 1\nchannel,pulse_index,time_ps\n"),
            3
        );
        assert_eq!(line_of("# digest = a\nnot,the,columns\n"), 2);
        assert_eq!(line_of(&format!("{FIXTURE_HEADER}X,0,0\n")), 13);
        assert_eq!(line_of(&format!("{FIXTURE_HEADER}T,zero,0\n")), 13);
        assert_eq!(line_of(&format!("{FIXTURE_HEADER}T,0\n")), 13);
        assert_eq!(line_of(&format!("{FIXTURE_HEADER}T,12,0\n")), 13);
        assert_eq!(line_of(&format!("{FIXTURE_HEADER}T,1,200\nT,2,100\n")), 14);
        let missing_seed = FIXTURE_HEADER.replace("# seed = 7\n", "");
        assert_eq!(line_of(&missing_seed), 11);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = config(&[0.2], &[]);
        cfg.repetition_rate_hz = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let mut cfg = config(&[0.2], &[]);
        cfg.herald_transmission = 1.5;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let mut cfg = config(&[0.2], &[]);
        cfg.delay_s = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let mut cfg = config(&[0.2], &[]);
        cfg.extinction_db = -3.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let mut cfg = config(&[0.2], &[]);
        cfg.extinction_db = f64::NAN;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
