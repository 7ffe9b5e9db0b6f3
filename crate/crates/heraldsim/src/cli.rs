//! Command-line front end: power sweeps of the heralding metrics,
//! event-stream generation, and stream analysis.
//!
//! All outputs are deterministic for a fixed configuration: CSV floats are
//! written with Rust's shortest round-trip formatting, sweep rows appear in
//! sweep order regardless of evaluation order, and every figure CSV carries
//! the scenario digest so plots remain traceable to exact parameters.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{count_coincidences, klyshko_efficiency, onf};
use crate::eventsim::{read_stream, simulate_run, write_stream, EventStream};
use crate::heralding::{herald_metrics, DetectorModel, HeraldMetrics, HeraldScheme};
use crate::scenario::{LossPreset, Scenario};
use crate::spectra::FilteredSchmidt;
use crate::{Error, Result};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "HERALDSIM_OUT";

#[derive(Parser, Debug)]
#[command(
    name = "heraldsim",
    version,
    about = "Heralded photon-pair source simulation toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sweep the mean pair number and tabulate heralding metrics per scheme.
    Sweep(SweepArgs),
    /// Monte Carlo run producing a timestamped detector event stream.
    Simulate(SimulateArgs),
    /// Counting statistics and noise figures from an event-stream file.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug)]
pub struct IoArgs {
    /// Scenario file; the built-in reference scenario when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; defaults to $HERALDSIM_OUT, then the working
    /// directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Loss preset: "experimental" or "lossless".
    #[arg(long, default_value = "experimental")]
    pub preset: String,
    /// Heralding schemes to evaluate, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "unfiltered,standard,extended,extended+ffwd"
    )]
    pub schemes: Vec<String>,
    /// Mean pair number range, log spaced.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [1e-2, 2.0])]
    pub range: Vec<f64>,
    /// Number of sweep points.
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    /// Also write SVG line charts next to the CSV.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Loss preset: "experimental" or "lossless".
    #[arg(long, default_value = "experimental")]
    pub preset: String,
    /// Heralding scheme: "standard" or "extended".
    #[arg(long, default_value = "extended")]
    pub scheme: String,
    /// Gate the heralded arm with the feed-forward switch.
    #[arg(long)]
    pub feed_forward: bool,
    /// Mean pair number; a pinned derived state takes precedence unless
    /// this is given explicitly.
    #[arg(long)]
    pub n_bar: Option<f64>,
    /// Override the scenario's RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the scenario's pulse count.
    #[arg(long)]
    pub pulses: Option<u64>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Event-stream CSV produced by `simulate`.
    pub stream: PathBuf,
    /// Output directory; defaults to $HERALDSIM_OUT, then the working
    /// directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One column of the sweep: which heralding condition is applied and, for
/// the feed-forward variant, whether the switch gates the heralded arm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepScheme {
    /// No spectral filter; every Schmidt mode reaches the herald detector.
    Unfiltered,
    /// Filtered source, herald on the transmitted-port detector only.
    Standard,
    /// Filtered source, herald on transmitted click and reflected no-click.
    Extended,
    /// Extended heralding with the feed-forward switch closing the
    /// heralded arm on rejected pulses; identical click statistics, but
    /// the blocked-arm metrics see only the switch leakage.
    ExtendedFeedForward,
}

impl std::fmt::Display for SweepScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepScheme::Unfiltered => "unfiltered",
            SweepScheme::Standard => "standard",
            SweepScheme::Extended => "extended",
            SweepScheme::ExtendedFeedForward => "extended+ffwd",
        })
    }
}

impl std::str::FromStr for SweepScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unfiltered" => Ok(SweepScheme::Unfiltered),
            "standard" => Ok(SweepScheme::Standard),
            "extended" => Ok(SweepScheme::Extended),
            "extended+ffwd" => Ok(SweepScheme::ExtendedFeedForward),
            other => Err(Error::Config(format!(
                "unknown sweep scheme '{other}' (expected unfiltered, standard, \
                 extended, or extended+ffwd)"
            ))),
        }
    }
}

/// A validated sweep request.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub n_bar_lo: f64,
    pub n_bar_hi: f64,
    pub points: usize,
    pub schemes: Vec<SweepScheme>,
    pub preset: LossPreset,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_bar_lo > 0.0 && self.n_bar_hi <= 4.0 && self.n_bar_lo <= self.n_bar_hi) {
            return Err(Error::Config(format!(
                "sweep range must satisfy 0 < lo <= hi <= 4, got [{}, {}]",
                self.n_bar_lo, self.n_bar_hi
            )));
        }
        if self.points < 2 && self.n_bar_lo != self.n_bar_hi {
            return Err(Error::Config(format!(
                "a sweep over a nondegenerate range needs at least 2 points, got {}",
                self.points
            )));
        }
        if self.points == 0 {
            return Err(Error::Config("a sweep needs at least 1 point".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no sweep schemes selected".into()));
        }
        Ok(())
    }

    /// Log-spaced mean pair numbers.
    pub fn n_bars(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.n_bar_lo];
        }
        (0..self.points)
            .map(|i| {
                self.n_bar_lo
                    * (self.n_bar_hi / self.n_bar_lo).powf(i as f64 / (self.points - 1) as f64)
            })
            .collect()
    }
}

/// One sweep row: a scheme evaluated at one mean pair number.
#[derive(Clone, Copy, Debug)]
pub struct SweepRow {
    pub scheme: SweepScheme,
    pub n_bar: f64,
    pub pump_factor: f64,
    pub metrics: HeraldMetrics,
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Sweep(args) => cmd_sweep(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(args),
    }
}

fn load_scenario(io: &IoArgs) -> Result<(Scenario, String)> {
    match &io.config {
        Some(path) => Ok((Scenario::load(path)?, path.display().to_string())),
        None => Ok((
            Scenario::reference(),
            "built-in reference (representative stand-in, not a fitted device)".into(),
        )),
    }
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Shortest round-trip decimal form, with `None` rendered as an empty
/// field.
fn field(value: Option<f64>) -> String {
    value.map_or_else(String::new, |v| v.to_string())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let (scenario, source) = load_scenario(&args.io)?;
    let spec = SweepSpec {
        n_bar_lo: args.range[0],
        n_bar_hi: args.range[1],
        points: args.points,
        schemes: args
            .schemes
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<_>>>()?,
        preset: args.preset.parse()?,
    };
    spec.validate()?;

    let rows = sweep_rows(&scenario, &spec)?;
    let dir = out_dir(&args.io.out)?;

    let csv_path = dir.join("sweep.csv");
    let mut text = String::new();
    let _ = writeln!(text, "# scenario_digest = {}", scenario.digest()?);
    let _ = writeln!(text, "# scenario_source = {source}");
    let _ = writeln!(text, "# preset = {}", spec.preset);
    let _ = writeln!(
        text,
        "scheme,n_bar,pump_factor,p_herald,p_ext,p_accept,fidelity,purity,g2,\
         fidelity_approx,p_noclick,fitness,truncation_tail,tail_warning"
    );
    for row in &rows {
        let m = &row.metrics;
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.scheme,
            row.n_bar,
            row.pump_factor,
            m.p_herald,
            m.p_ext,
            m.p_accept,
            m.fidelity,
            m.purity,
            m.g2,
            m.fidelity_approx,
            field(m.p_noclick),
            field(m.fitness),
            m.truncation_tail,
            m.tail_warning,
        );
    }
    if let Some(reduction) = max_relative_g2_reduction(&rows) {
        let _ = writeln!(text, "# max_relative_g2_reduction = {reduction}");
    }
    std::fs::write(&csv_path, &text)?;
    println!("wrote {}", csv_path.display());

    if args.svg {
        write_sweep_charts(&rows, &dir)?;
    }
    Ok(())
}

/// Evaluates every (scheme, power) pair of the sweep.  Points are computed
/// concurrently; the returned rows are in deterministic sweep order.
pub fn sweep_rows(scenario: &Scenario, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let filtered = scenario.coefficients()?;
    let unfiltered = if spec.schemes.contains(&SweepScheme::Unfiltered) {
        Some(scenario.unfiltered_coefficients()?)
    } else {
        None
    };
    let det_herald = scenario.herald_detector(spec.preset)?;
    let output = scenario.output_detector(spec.preset)?;
    let leak = 10f64.powf(-scenario.simulation.extinction_db / 10.0);
    let gated_output = output.attenuated(leak)?;
    let kappa = scenario.klyshko(spec.preset);
    let n_max = scenario.truncation.n_max;

    let tasks: Vec<(SweepScheme, f64)> = spec
        .schemes
        .iter()
        .flat_map(|&scheme| spec.n_bars().into_iter().map(move |n| (scheme, n)))
        .collect();

    let evaluate = |&(scheme, n_bar): &(SweepScheme, f64)| -> Result<SweepRow> {
        let coefficients: &FilteredSchmidt = match scheme {
            SweepScheme::Unfiltered => unfiltered.as_ref().expect("unfiltered coefficients"),
            _ => &filtered,
        };
        let physical = match scheme {
            SweepScheme::Unfiltered | SweepScheme::Standard => HeraldScheme::Standard,
            SweepScheme::Extended | SweepScheme::ExtendedFeedForward => HeraldScheme::Extended,
        };
        let heralded_arm: &DetectorModel = match scheme {
            SweepScheme::ExtendedFeedForward => &gated_output,
            _ => &output,
        };
        let bank = scenario.bank_at(coefficients, n_bar)?;
        let metrics = herald_metrics(
            &bank,
            physical,
            &det_herald,
            &det_herald,
            heralded_arm,
            kappa,
            n_max,
        )?;
        Ok(SweepRow {
            scheme,
            n_bar,
            pump_factor: bank.pump_factor(),
            metrics,
        })
    };

    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(tasks.len().max(1));
    let chunk = tasks.len().div_ceil(threads.max(1)).max(1);
    let mut results: Vec<Result<Vec<SweepRow>>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = tasks
            .chunks(chunk)
            .map(|slice| scope.spawn(move || slice.iter().map(evaluate).collect()))
            .collect();
        for handle in handles {
            results.push(handle.join().expect("sweep worker panicked"));
        }
    });
    let mut rows = Vec::with_capacity(tasks.len());
    for result in results {
        rows.extend(result?);
    }
    Ok(rows)
}

/// Largest relative g2 drop of the extended scheme against the standard
/// scheme at the same power, when the sweep contains both.
pub fn max_relative_g2_reduction(rows: &[SweepRow]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for s in rows.iter().filter(|r| r.scheme == SweepScheme::Standard) {
        for e in rows
            .iter()
            .filter(|r| r.scheme == SweepScheme::Extended && r.n_bar == s.n_bar)
        {
            if s.metrics.g2 > 0.0 {
                let reduction = (s.metrics.g2 - e.metrics.g2) / s.metrics.g2;
                best = Some(best.map_or(reduction, |b: f64| b.max(reduction)));
            }
        }
    }
    best
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let (scenario, _) = load_scenario(&args.io)?;
    let preset: LossPreset = args.preset.parse()?;
    let scheme: HeraldScheme = args.scheme.parse()?;

    let bank = match (&args.n_bar, scenario.pinned_bank()?) {
        (None, Some(pinned)) => pinned,
        (n_bar, _) => scenario.bank_at(&scenario.coefficients()?, n_bar.unwrap_or(0.1))?,
    };

    let mut scenario = scenario;
    if let Some(seed) = args.seed {
        scenario.simulation.seed = seed;
    }
    if let Some(pulses) = args.pulses {
        scenario.simulation.pulses = pulses;
    }
    let config = scenario.run_config(bank.clone(), preset, scheme, args.feed_forward)?;

    let stream = simulate_run(&config)?;
    let dir = out_dir(&args.io.out)?;
    let stream_path = dir.join("events.csv");
    write_stream(&stream, &stream_path)?;

    let snapshot = scenario.with_derived_state(&bank);
    let snapshot_path = dir.join("events.scenario.toml");
    std::fs::write(&snapshot_path, snapshot.to_toml()?)?;

    print_run_summary(&scenario, &config.bank, preset, scheme, &stream);
    println!("wrote {}", stream_path.display());
    println!("wrote {}", snapshot_path.display());
    Ok(())
}

fn print_run_summary(
    scenario: &Scenario,
    bank: &crate::pdcstate::SqueezerBank,
    preset: LossPreset,
    scheme: HeraldScheme,
    stream: &EventStream,
) {
    use crate::heralding::{p_ext, p_herald};

    let heralds = stream
        .records
        .iter()
        .filter(|r| r.channel == crate::eventsim::Channel::Herald)
        .count();
    let pulses = stream.header.pulses;
    let rate = if pulses > 0 {
        heralds as f64 / pulses as f64
    } else {
        0.0
    };
    println!("pulses = {pulses}");
    println!("heralds = {heralds}");
    println!("herald_rate = {rate}");

    // Analytic acceptance probability for the same detectors, for a quick
    // sanity check against the observed rate.
    if let Ok(det) = scenario.herald_detector(preset) {
        let n_max = scenario.truncation.n_max;
        let expected = match scheme {
            HeraldScheme::Standard => p_herald(bank, &det, n_max),
            HeraldScheme::Extended => p_herald(bank, &det, n_max) * p_ext(bank, &det, n_max),
        };
        println!("herald_rate_analytic = {expected}");
    }
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let stream = read_stream(&args.stream)?;
    let report = count_coincidences(&stream);

    // Ratio metrics are undefined on degenerate streams (no heralds, no
    // output clicks); the report leaves those fields empty rather than
    // failing, so empty-but-valid streams still analyze cleanly.
    let klyshko = match klyshko_efficiency(&stream) {
        Ok(value) => Some(value),
        Err(Error::UndefinedMetric(_)) => None,
        Err(other) => return Err(other),
    };
    let (onf_value, onf_sigma) = match onf(&stream) {
        Ok((value, sigma)) => (Some(value), Some(sigma)),
        Err(Error::UndefinedMetric(_)) => (None, None),
        Err(other) => return Err(other),
    };

    let mut text = String::new();
    let _ = writeln!(text, "# stream_digest = {}", stream.header.digest);
    let _ = writeln!(text, "pulses = {}", stream.header.pulses);
    let _ = writeln!(text, "heralds = {}", report.h);
    let _ = writeln!(text, "singles_1 = {}", report.s1);
    let _ = writeln!(text, "singles_2 = {}", report.s2);
    let _ = writeln!(text, "coincidences = {}", report.c);
    let _ = writeln!(text, "g2 = {}", field(report.g2));
    let _ = writeln!(text, "g2_sigma = {}", field(report.g2_sigma));
    let _ = writeln!(text, "klyshko = {}", field(klyshko));
    let _ = writeln!(text, "onf = {}", field(onf_value));
    let _ = writeln!(text, "onf_sigma = {}", field(onf_sigma));

    let dir = out_dir(&args.out)?;
    let txt_path = dir.join("report.txt");
    std::fs::write(&txt_path, &text)?;

    let csv_path = dir.join("report.csv");
    let mut csv = String::new();
    let _ = writeln!(
        csv,
        "pulses,heralds,singles_1,singles_2,coincidences,g2,g2_sigma,klyshko,onf,onf_sigma"
    );
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{},{},{},{}",
        stream.header.pulses,
        report.h,
        report.s1,
        report.s2,
        report.c,
        field(report.g2),
        field(report.g2_sigma),
        field(klyshko),
        field(onf_value),
        field(onf_sigma),
    );
    std::fs::write(&csv_path, &csv)?;

    print!("{text}");
    println!("wrote {}", txt_path.display());
    println!("wrote {}", csv_path.display());
    Ok(())
}

const CHART_COLORS: [&str; 4] = ["#1767a8", "#c8501d", "#2b8a3e", "#7048a8"];

struct Chart<'a> {
    file: &'a str,
    y_label: &'a str,
    series: Vec<(String, Vec<(f64, f64)>)>,
}

fn write_sweep_charts(rows: &[SweepRow], dir: &Path) -> Result<()> {
    // The x axis is the scheme's acceptance probability, which is the
    // herald probability for schemes without a veto.
    let series_for = |pick: &dyn Fn(&SweepRow) -> Option<f64>| -> Vec<(String, Vec<(f64, f64)>)> {
        let mut series = Vec::new();
        for scheme in [
            SweepScheme::Unfiltered,
            SweepScheme::Standard,
            SweepScheme::Extended,
            SweepScheme::ExtendedFeedForward,
        ] {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.scheme == scheme)
                .filter_map(|r| Some((r.metrics.p_accept, pick(r)?)))
                .collect();
            if !points.is_empty() {
                series.push((scheme.to_string(), points));
            }
        }
        series
    };

    let charts = [
        Chart {
            file: "sweep_fidelity.svg",
            y_label: "fidelity",
            series: series_for(&|r| Some(r.metrics.fidelity)),
        },
        Chart {
            file: "sweep_g2.svg",
            y_label: "g2",
            series: series_for(&|r| Some(r.metrics.g2)),
        },
        Chart {
            file: "sweep_fitness.svg",
            y_label: "fitness",
            series: series_for(&|r| r.metrics.fitness),
        },
    ];
    for chart in charts {
        if chart.series.is_empty() {
            continue;
        }
        let path = dir.join(chart.file);
        std::fs::write(&path, line_chart(&chart))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Minimal static SVG line chart with a log x axis.
fn line_chart(chart: &Chart) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const M: f64 = 56.0;

    let xs = chart
        .series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.0))
        .filter(|x| *x > 0.0);
    let (mut x_lo, mut x_hi) = (f64::MAX, f64::MIN);
    for x in xs {
        x_lo = x_lo.min(x.log10());
        x_hi = x_hi.max(x.log10());
    }
    if x_lo >= x_hi {
        x_hi = x_lo + 1.0;
    }
    let y_hi = chart
        .series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.1))
        .fold(0.0_f64, f64::max)
        .max(1.0);

    let map_x = |x: f64| M + (x.log10() - x_lo) / (x_hi - x_lo) * (W - 2.0 * M);
    let map_y = |y: f64| H - M - y / y_hi * (H - 2.0 * M);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - M,
        W - M,
        H - M
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#,
        H - M
    );

    // Decade ticks on x, quarter ticks on y.
    for decade in (x_lo.floor() as i32)..=(x_hi.ceil() as i32) {
        let x = decade as f64;
        if x < x_lo - 1e-9 || x > x_hi + 1e-9 {
            continue;
        }
        let px = M + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * M);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="black"/>"#,
            H - M,
            H - M + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle">1e{decade}</text>"#,
            H - M + 20.0
        );
    }
    for i in 0..=4 {
        let y = y_hi * i as f64 / 4.0;
        let py = map_y(y);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{py:.2}" x2="{M}" y2="{py:.2}" stroke="black"/>"#,
            M - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{y:.2}</text>"#,
            M - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">acceptance probability</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        chart.y_label
    );

    for (i, (label, points)) in chart.series.iter().enumerate() {
        let color = CHART_COLORS[i % CHART_COLORS.len()];
        let path: Vec<String> = points
            .iter()
            .filter(|p| p.0 > 0.0)
            .map(|p| format!("{:.2},{:.2}", map_x(p.0), map_y(p.1)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{label}</text>"#,
            W - M - 150.0,
            M + 16.0 * i as f64
        );
    }
    let _ = writeln!(svg, "</svg>");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_specs_take_only_physical_ranges() {
        let base = SweepSpec {
            n_bar_lo: 0.01,
            n_bar_hi: 2.0,
            points: 25,
            schemes: vec![SweepScheme::Standard],
            preset: LossPreset::Lossless,
        };
        base.validate().unwrap();

        let mut spec = base.clone();
        spec.n_bar_hi = 4.5;
        assert!(spec.validate().is_err());

        let mut spec = base.clone();
        spec.n_bar_lo = 0.0;
        assert!(spec.validate().is_err());

        let mut spec = base.clone();
        spec.points = 1;
        assert!(spec.validate().is_err());
        spec.n_bar_hi = spec.n_bar_lo;
        spec.validate().unwrap();
        assert_eq!(spec.n_bars(), vec![0.01]);

        let mut spec = base.clone();
        spec.schemes.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn sweep_points_are_log_spaced_endpoints_inclusive() {
        let spec = SweepSpec {
            n_bar_lo: 0.01,
            n_bar_hi: 1.0,
            points: 3,
            schemes: vec![SweepScheme::Standard],
            preset: LossPreset::Lossless,
        };
        let n = spec.n_bars();
        assert_eq!(n.len(), 3);
        assert!((n[0] - 0.01).abs() < 1e-15);
        assert!((n[1] - 0.1).abs() < 1e-12);
        assert!((n[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scheme_names_round_trip() {
        for scheme in [
            SweepScheme::Unfiltered,
            SweepScheme::Standard,
            SweepScheme::Extended,
            SweepScheme::ExtendedFeedForward,
        ] {
            let parsed: SweepScheme = scheme.to_string().parse().unwrap();
            assert_eq!(parsed, scheme);
        }
        assert!("filtered".parse::<SweepScheme>().is_err());
    }

    #[test]
    fn sweep_rows_keep_sweep_order_and_match_direct_evaluation() {
        let scenario = Scenario::reference();
        let spec = SweepSpec {
            n_bar_lo: 0.05,
            n_bar_hi: 0.2,
            points: 3,
            schemes: vec![SweepScheme::Standard, SweepScheme::Extended],
            preset: LossPreset::Experimental,
        };
        let rows = sweep_rows(&scenario, &spec).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows[..3].iter().all(|r| r.scheme == SweepScheme::Standard));
        assert!(rows[3..].iter().all(|r| r.scheme == SweepScheme::Extended));
        for chunk in rows.chunks(3) {
            assert!(chunk.windows(2).all(|w| w[0].n_bar < w[1].n_bar));
        }

        let coefficients = scenario.coefficients().unwrap();
        let bank = scenario.bank_at(&coefficients, rows[1].n_bar).unwrap();
        let det = scenario.herald_detector(spec.preset).unwrap();
        let out = scenario.output_detector(spec.preset).unwrap();
        let direct = herald_metrics(
            &bank,
            HeraldScheme::Standard,
            &det,
            &det,
            &out,
            scenario.klyshko(spec.preset),
            scenario.truncation.n_max,
        )
        .unwrap();
        assert_eq!(rows[1].metrics.p_herald, direct.p_herald);
        assert_eq!(rows[1].metrics.fidelity, direct.fidelity);
        assert_eq!(rows[1].metrics.g2, direct.g2);
    }

    #[test]
    fn the_reduction_footer_compares_matching_powers_only() {
        let metrics = HeraldMetrics {
            p_herald: 0.1,
            p_ext: 1.0,
            p_accept: 0.1,
            fidelity: 0.9,
            purity: 0.9,
            g2: 0.2,
            fidelity_approx: 0.85,
            p_noclick: None,
            fitness: None,
            truncation_tail: 0.0,
            tail_warning: false,
        };
        let row = |scheme, n_bar, g2| SweepRow {
            scheme,
            n_bar,
            pump_factor: 1.0,
            metrics: HeraldMetrics { g2, ..metrics },
        };
        assert_eq!(
            max_relative_g2_reduction(&[row(SweepScheme::Standard, 0.1, 0.2)]),
            None
        );
        let rows = [
            row(SweepScheme::Standard, 0.1, 0.2),
            row(SweepScheme::Extended, 0.1, 0.05),
            row(SweepScheme::Standard, 0.2, 0.4),
            row(SweepScheme::Extended, 0.2, 0.3),
        ];
        let reduction = max_relative_g2_reduction(&rows).unwrap();
        assert!((reduction - 0.75).abs() < 1e-12);
    }
}
