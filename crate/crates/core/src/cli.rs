//! Command-line front end for `macpir`.
//!
//! Every CSV output starts with a `#`-prefixed manifest echoing the command,
//! the full argument set, the seed and the build version, so identical
//! invocations produce identical bytes.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::exec::Execution;
use crate::experiments::{self, AuditMode, TrialConfig};
use crate::protocol::ChannelMode;
use crate::rates;

pub const SEED_ENV: &str = "MACPIR_SEED";

/// Build identifier embedded in every manifest.
pub const BUILD_DESCRIBE: &str = match option_env!("MACPIR_GIT_DESCRIBE") {
    Some(d) => d,
    None => concat!("v", env!("CARGO_PKG_VERSION")),
};

#[derive(Debug, Parser)]
#[command(name = "macpir", version, about = "PIR over the Gaussian multiple-access channel")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate table: separation, joint, MISO capacity and gap over an SNR grid
    Rates(RatesArgs),
    /// Monte Carlo retrieval error rate over an SNR grid
    Simulate(SimulateArgs),
    /// Exact or sampled audit of the query distributions
    Privacy(PrivacyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Awgn,
    Fading,
}

impl From<Mode> for ChannelMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Awgn => ChannelMode::Awgn,
            Mode::Fading => ChannelMode::Fading,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SnrGrid {
    /// First SNR point in dB (P = 10^(dB/10), unit noise)
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db_start: f64,
    /// Last SNR point in dB, inclusive
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db_stop: f64,
    #[arg(long, default_value_t = 1.0)]
    pub snr_db_step: f64,
}

impl SnrGrid {
    pub fn points_db(&self, offset: f64) -> Result<Vec<f64>, CliError> {
        let (start, stop, step) = (self.snr_db_start, self.snr_db_stop, self.snr_db_step);
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 {
            return Err(CliError::Usage("SNR grid needs finite bounds and a positive step".into()));
        }
        if stop < start {
            return Err(CliError::Usage("SNR grid is empty (stop < start)".into()));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| offset + start + i as f64 * step).collect())
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RatesArgs {
    #[arg(long, default_value_t = 2)]
    pub n_servers: usize,
    #[arg(long, default_value_t = 2)]
    pub messages: usize,
    #[command(flatten)]
    pub grid: SnrGrid,
    #[arg(long, value_enum, default_value_t = Mode::Awgn)]
    pub mode: Mode,
    /// Channel draws per grid point in fading mode
    #[arg(long, default_value_t = 1000)]
    pub draws: u64,
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    pub seed: u64,
    /// Output file; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Lattice dimension n
    #[arg(long, default_value_t = 8)]
    pub lattice_n: usize,
    /// Field size p (prime)
    #[arg(long, default_value_t = 11)]
    pub lattice_p: u64,
    /// Message symbols per codeword k
    #[arg(long, default_value_t = 1)]
    pub lattice_k: usize,
    /// When set, the SNR grid is read as offsets (dB) from the SNR at which
    /// the joint rate exceeds the code rate by this many bits
    #[arg(long)]
    pub rate_margin_bits: Option<f64>,
    #[command(flatten)]
    pub grid: SnrGrid,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 2)]
    pub n_servers: usize,
    #[arg(long, default_value_t = 4)]
    pub messages: usize,
    /// Message length L (multiple of k)
    #[arg(long, default_value_t = 1)]
    pub message_len: usize,
    #[arg(long, value_enum, default_value_t = Mode::Awgn)]
    pub mode: Mode,
    /// Remove channel noise
    #[arg(long)]
    pub noiseless: bool,
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub code_seed: u64,
    /// Run trials on one thread
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PrivacyMode {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PrivacyArgs {
    #[arg(long, default_value_t = 1)]
    pub m_min: usize,
    #[arg(long, default_value_t = 8)]
    pub m_max: usize,
    #[arg(long, value_enum, default_value_t = PrivacyMode::Exhaustive)]
    pub mode: PrivacyMode,
    /// Draws per private index in sampled mode
    #[arg(long, default_value_t = 100_000)]
    pub draws: u64,
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    pub seed: u64,
    /// Audit the negative-control builder that sends e_i in the clear
    #[arg(long)]
    pub mutant: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, A: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub config: &'a A,
    pub output: String,
}

impl<A: Serialize> RunManifest<'_, A> {
    fn csv_header(&self) -> String {
        let config = serde_json::to_string(self.config).expect("arguments serialize");
        format!(
            "# command: {}\n# version: {}\n# seed: {}\n# config: {}\n# output: {}\n",
            self.command, self.version, self.seed, config, self.output
        )
    }
}

fn output_name(out: &Option<PathBuf>) -> String {
    out.as_ref().map_or_else(|| "-".to_string(), |p| p.display().to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

#[derive(Serialize)]
struct JsonDoc<'a, A: Serialize, R: Serialize> {
    manifest: &'a RunManifest<'a, A>,
    rows: &'a [R],
}

/// Renders the `rates` table.
pub fn cmd_rates(args: &RatesArgs) -> Result<String, CliError> {
    if args.n_servers < 2 {
        return Err(CliError::Usage("--n-servers must be at least 2".into()));
    }
    if args.messages < 1 {
        return Err(CliError::Usage("--messages must be at least 1".into()));
    }
    let powers: Vec<f64> = args.grid.points_db(0.0)?.into_iter().map(rates::db_to_power).collect();
    let rows = experiments::sweep_rates(
        args.n_servers,
        args.messages,
        &powers,
        args.mode.into(),
        args.draws,
        args.seed,
        Execution::Parallel,
    )?;
    let manifest = RunManifest {
        command: "rates",
        version: BUILD_DESCRIBE,
        seed: args.seed,
        config: args,
        output: output_name(&args.out),
    };
    Ok(match args.format {
        Format::Json => json(&JsonDoc { manifest: &manifest, rows: &rows }),
        Format::Csv => {
            let mut s = manifest.csv_header();
            s.push_str("snr_db,P,rate_separation,rate_joint,miso_capacity,gap_bits,winner\n");
            for r in &rows {
                let winner = if r.separation.is_some() { r.chosen.to_string() } else { "NA".into() };
                writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    r.snr_db,
                    r.power,
                    opt(r.separation),
                    r.joint,
                    r.miso_capacity,
                    opt(r.gap),
                    winner
                )
                .unwrap();
            }
            s
        }
    })
}

#[derive(Debug, Serialize)]
struct SimRow {
    snr_db: f64,
    power: f64,
    trials: u64,
    errors: u64,
    pe: f64,
    pe_lo: f64,
    pe_hi: f64,
}

/// Runs the Monte Carlo error-rate sweep.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<String, CliError> {
    if args.n_servers < 2 {
        return Err(CliError::Usage("--n-servers must be at least 2".into()));
    }
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    let config = TrialConfig {
        servers: args.n_servers,
        messages: args.messages,
        p: args.lattice_p,
        k: args.lattice_k,
        n: args.lattice_n,
        message_len: args.message_len,
        trials: args.trials,
        mode: args.mode.into(),
        noiseless: args.noiseless,
        seed: args.seed,
        code_seed: args.code_seed,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    // validates p and the enumeration cap before any trial runs
    let probe = config.code(1.0)?;
    let offset = match args.rate_margin_bits {
        Some(margin) => rates::power_to_db(rates::power_for_joint_rate(args.n_servers, probe.rate() + margin)?),
        None => 0.0,
    };
    let powers: Vec<f64> = args.grid.points_db(offset)?.into_iter().map(rates::db_to_power).collect();
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    let points = experiments::simulate(&config, &powers, exec)?;
    let rows: Vec<SimRow> = points
        .iter()
        .map(|pt| SimRow {
            snr_db: pt.snr_db,
            power: pt.power,
            trials: pt.rate.trials,
            errors: pt.rate.errors,
            pe: pt.rate.pe,
            pe_lo: pt.rate.pe_lo,
            pe_hi: pt.rate.pe_hi,
        })
        .collect();
    let manifest = RunManifest {
        command: "simulate",
        version: BUILD_DESCRIBE,
        seed: args.seed,
        config: args,
        output: output_name(&args.out),
    };
    Ok(match args.format {
        Format::Json => json(&JsonDoc { manifest: &manifest, rows: &rows }),
        Format::Csv => {
            let mut s = manifest.csv_header();
            writeln!(s, "# code_rate_bits: {}", probe.rate()).unwrap();
            s.push_str("snr_db,trials,errors,pe,pe_lo,pe_hi\n");
            for r in &rows {
                writeln!(s, "{},{},{},{},{},{}", r.snr_db, r.trials, r.errors, r.pe, r.pe_lo, r.pe_hi).unwrap();
            }
            s
        }
    })
}

/// JSON shape of the privacy report.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct PrivacyJson {
    pub mutant: bool,
    pub exhaustive: bool,
    pub max_tv: f64,
    pub private: bool,
    pub reports: Vec<crate::protocol::PrivacyReport>,
}

/// Runs the privacy audit.
pub fn cmd_privacy(args: &PrivacyArgs) -> Result<String, CliError> {
    if args.m_min < 1 || args.m_max < args.m_min {
        return Err(CliError::Usage("need 1 <= --m-min <= --m-max".into()));
    }
    let mode = match args.mode {
        PrivacyMode::Exhaustive => {
            if args.m_max > crate::protocol::EXHAUSTIVE_AUDIT_LIMIT {
                return Err(CliError::Usage(format!(
                    "exhaustive audit supports M <= {}",
                    crate::protocol::EXHAUSTIVE_AUDIT_LIMIT
                )));
            }
            AuditMode::Exhaustive
        }
        PrivacyMode::Sampled => AuditMode::Sampled { draws: args.draws, seed: args.seed },
    };
    let reports = experiments::privacy_audit(args.m_min..=args.m_max, mode, args.mutant)?;
    let max_tv = reports.iter().map(|r| r.max_tv()).fold(0.0, f64::max);
    let doc = PrivacyJson {
        mutant: args.mutant,
        exhaustive: args.mode == PrivacyMode::Exhaustive,
        max_tv,
        private: reports.iter().all(|r| r.private()),
        reports,
    };
    Ok(match args.format {
        ReportFormat::Json => {
            let manifest = RunManifest {
                command: "privacy",
                version: BUILD_DESCRIBE,
                seed: args.seed,
                config: args,
                output: output_name(&args.out),
            };
            #[derive(Serialize)]
            struct Doc<'a> {
                manifest: RunManifest<'a, PrivacyArgs>,
                report: &'a PrivacyJson,
            }
            json(&Doc { manifest, report: &doc })
        }
        ReportFormat::Text => {
            let mut s = String::new();
            for r in &doc.reports {
                writeln!(
                    s,
                    "M={}: role1 max TV = {}, role2 max TV = {}, tolerance = {}",
                    r.messages, r.roles[0].max_tv, r.roles[1].max_tv, r.tv_bound
                )
                .unwrap();
            }
            writeln!(s, "max TV = {}", doc.max_tv).unwrap();
            writeln!(s, "{}", if doc.private { "PRIVATE" } else { "LEAK DETECTED" }).unwrap();
            s
        }
    })
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Runs a parsed command and writes its output.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (text, out) = match &cli.command {
        Command::Rates(a) => (cmd_rates(a)?, &a.out),
        Command::Simulate(a) => (cmd_simulate(a)?, &a.out),
        Command::Privacy(a) => (cmd_privacy(a)?, &a.out),
    };
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(anyhow::anyhow!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("macpir").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn grid_points() {
        let g = SnrGrid { snr_db_start: 0.0, snr_db_stop: 1.0, snr_db_step: 0.25 };
        assert_eq!(g.points_db(0.0).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = SnrGrid { snr_db_start: 2.0, snr_db_stop: 1.0, snr_db_step: 0.5 };
        assert!(matches!(g.points_db(0.0), Err(CliError::Usage(_))));
        let g = SnrGrid { snr_db_start: 0.0, snr_db_stop: 1.0, snr_db_step: 0.0 };
        assert!(matches!(g.points_db(0.0), Err(CliError::Usage(_))));
    }

    #[test]
    fn rates_csv_layout() {
        let cli = parse(&["rates", "--snr-db-start", "0", "--snr-db-stop", "2", "--snr-db-step", "1"]);
        let Command::Rates(a) = &cli.command else { panic!() };
        let out = cmd_rates(a).unwrap();
        let body: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[0], "snr_db,P,rate_separation,rate_joint,miso_capacity,gap_bits,winner");
        assert_eq!(body.len(), 4);
        assert!(body[1].starts_with("0,1,"));
        assert_eq!(out, cmd_rates(a).unwrap());
    }

    #[test]
    fn privacy_json_round_trip() {
        let cli = parse(&["privacy", "--m-max", "4", "--format", "json"]);
        let Command::Privacy(a) = &cli.command else { panic!() };
        let out = cmd_privacy(a).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let report: PrivacyJson = serde_json::from_value(v["report"].clone()).unwrap();
        assert_eq!(report.max_tv, 0.0);
        assert!(report.private);
        assert_eq!(report.reports.len(), 4);
        let back = serde_json::to_value(&report).unwrap();
        assert_eq!(back, v["report"]);
    }

    #[test]
    fn usage_errors_have_exit_code_two() {
        let cli = parse(&["privacy", "--m-min", "3", "--m-max", "2"]);
        let Command::Privacy(a) = &cli.command else { panic!() };
        assert_eq!(cmd_privacy(a).unwrap_err().exit_code(), 2);
    }
}
