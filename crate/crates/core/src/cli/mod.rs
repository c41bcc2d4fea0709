//! The `kf` command line.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 I/O or parse error,
//! 3 reduction not certified.

mod region;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::json::{parse_kraus_set, to_json, JsonError};
use crate::channel::{
    choi, choi_rank, classify, completeness_defect, is_strictly_incoherent, ClassSlot, KrausSet, Regime, CPTP_TOL,
};
use crate::reduction::{groups_for, reduce_with_groups, ReduceOptions, ReductionOutcome, Status};
use crate::sampler::{sample_seeded, ChannelKind, SamplerConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_REDUCED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "kf", version, about = "Incoherent Kraus decompositions of qubit and qutrit channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check completeness and incoherence of a Kraus-set file
    Verify {
        path: PathBuf,
        /// Class table used for labels (default: by dimension)
        #[arg(long, value_enum)]
        regime: Option<RegimeArg>,
    },
    /// Reduce a canonical set and certify the result
    Reduce {
        path: PathBuf,
        #[arg(long, value_enum)]
        regime: RegimeArg,
        #[arg(long)]
        out: PathBuf,
        /// Skip the closed-form matrices and use the numerical engines only
        #[arg(long)]
        no_explicit: bool,
    },
    /// Sample the image of a two-dimensional section
    Region {
        /// Coordinate pair `i,j` (1-based)
        #[arg(long)]
        section: String,
        #[arg(long, allow_hyphen_values = true)]
        ti: f64,
        #[arg(long, allow_hyphen_values = true)]
        tj: f64,
        #[arg(long, value_enum, default_value = "sio")]
        kind: KindArg,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Rank of the Choi matrix and its smallest eigenvalues
    ChoiRank {
        path: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Write a random canonical set
    Sample {
        #[arg(long, value_enum)]
        regime: RegimeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Real coefficients only
        #[arg(long)]
        real: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    QubitIo,
    QutritIo,
    QutritSio,
}

impl RegimeArg {
    pub fn regime(self) -> Regime {
        match self {
            RegimeArg::QubitIo => Regime::Qubit5,
            RegimeArg::QutritIo => Regime::QutritIO39,
            RegimeArg::QutritSio => Regime::QutritSIO15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Sio,
    Io,
}

impl From<KindArg> for ChannelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Sio => ChannelKind::Sio,
            KindArg::Io => ChannelKind::Io,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: JsonError,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn io(path: &FsPath, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct OperatorReport {
    pub index: usize,
    /// 1-based rows per column, 0 for an empty column; absent if the
    /// operator is not incoherent.
    pub signature: Option<String>,
    pub incoherent: bool,
    pub strictly_incoherent: bool,
    pub class: Option<String>,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub group: String,
    pub path: String,
    pub ops_before: usize,
    pub ops_after: usize,
    pub choi_distance: f64,
    pub explicit_rejected: bool,
    pub note: String,
}

/// Machine-readable result of `verify` and `reduce`. Fields serialize in
/// declaration order.
#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct CertReport {
    pub command: String,
    pub input_sha256: String,
    pub dim: usize,
    pub regime: Option<String>,
    pub completeness_defect: f64,
    pub op_count_before: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub op_count_after: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub choi_distance: Option<f64>,
    pub all_incoherent: bool,
    pub strictly_incoherent: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub operators: Vec<OperatorReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupReport>,
    pub status: String,
}

/// Result of a command: what to print and how to exit.
pub struct Output {
    pub code: i32,
    pub stdout: String,
}

fn read_text(path: &FsPath) -> Result<(String, String), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|e| CliError::Usage(format!("{}: not UTF-8: {e}", path.display())))?;
    Ok((text, digest))
}

fn read_set(path: &FsPath) -> Result<(KrausSet, String), CliError> {
    let (text, digest) = read_text(path)?;
    let s = parse_kraus_set(&text).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((s, digest))
}

fn write_file(path: &FsPath, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn to_json_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn default_regime(s: &KrausSet) -> Regime {
    match s.dim() {
        2 => Regime::Qubit5,
        _ if s.all_strictly_incoherent() => Regime::QutritSIO15,
        _ => Regime::QutritIO39,
    }
}

pub fn cmd_verify(path: &FsPath, regime: Option<Regime>) -> Result<(CertReport, i32), CliError> {
    let (s, digest) = read_set(path)?;
    let regime = regime.unwrap_or_else(|| default_regime(&s));
    if regime.dim() != s.dim() {
        return Err(CliError::Usage(format!("{regime} needs dimension {}, file has {}", regime.dim(), s.dim())));
    }
    let defect = completeness_defect(&s);
    let classes: Vec<Option<String>> = match classify(&s, regime) {
        Ok(slots) => slots
            .into_iter()
            .map(|c| match c {
                ClassSlot::Class(c) => Some(format!("C{}", c.index)),
                ClassSlot::Zero => Some("zero".into()),
                ClassSlot::Unclassified(_) => None,
            })
            .collect(),
        Err(_) => vec![None; s.len()],
    };
    let operators: Vec<OperatorReport> = s
        .ops()
        .iter()
        .zip(classes)
        .enumerate()
        .map(|(index, (k, class))| {
            let incoherent = k.is_incoherent();
            OperatorReport {
                index,
                signature: k.signature().map(|sig| sig.to_string()),
                incoherent,
                strictly_incoherent: is_strictly_incoherent(k),
                class: if incoherent { class } else { None },
            }
        })
        .collect();
    let all_incoherent = s.all_incoherent();
    let pass = defect <= CPTP_TOL && all_incoherent;
    let report = CertReport {
        command: "verify".into(),
        input_sha256: digest,
        dim: s.dim(),
        regime: Some(regime.to_string()),
        completeness_defect: defect,
        op_count_before: s.len(),
        op_count_after: None,
        choi_distance: None,
        all_incoherent,
        strictly_incoherent: s.all_strictly_incoherent(),
        operators,
        groups: Vec::new(),
        status: if pass { "pass" } else { "fail" }.into(),
    };
    Ok((report, if pass { EXIT_PASS } else { EXIT_FAIL }))
}

fn group_reports(out: &ReductionOutcome) -> Vec<GroupReport> {
    out.log
        .iter()
        .map(|l| GroupReport {
            group: l.group.to_string(),
            path: l.path.to_string(),
            ops_before: l.ops_before,
            ops_after: l.ops_after,
            choi_distance: l.choi_distance,
            explicit_rejected: l.explicit_rejected,
            note: l.note.clone(),
        })
        .collect()
}

pub fn cmd_reduce(path: &FsPath, regime: Regime, out: &FsPath, use_explicit: bool) -> Result<(CertReport, i32), CliError> {
    let (s, digest) = read_set(path)?;
    let defect = completeness_defect(&s);
    let mut report = CertReport {
        command: "reduce".into(),
        input_sha256: digest,
        dim: s.dim(),
        regime: Some(regime.to_string()),
        completeness_defect: defect,
        op_count_before: s.len(),
        op_count_after: None,
        choi_distance: None,
        all_incoherent: s.all_incoherent(),
        strictly_incoherent: s.all_strictly_incoherent(),
        operators: Vec::new(),
        groups: Vec::new(),
        status: String::new(),
    };
    if defect > CPTP_TOL {
        report.status = format!("input is not trace preserving (defect {defect:.3e})");
        return Ok((report, EXIT_FAIL));
    }
    let outcome = match reduce_with_groups(&s, regime, groups_for(regime), &ReduceOptions { use_explicit }) {
        Ok(o) => o,
        Err(e) => {
            report.status = e.to_string();
            return Ok((report, EXIT_FAIL));
        }
    };
    report.op_count_after = Some(outcome.op_count_after);
    report.choi_distance = Some(outcome.choi_distance);
    report.all_incoherent = outcome.all_incoherent;
    report.strictly_incoherent = outcome.strictly_incoherent;
    report.groups = group_reports(&outcome);
    report.status = outcome.status.to_string();
    if outcome.status == Status::NotReduced {
        return Ok((report, EXIT_NOT_REDUCED));
    }
    write_file(out, &(to_json(&outcome.result) + "\n"))?;
    Ok((report, EXIT_PASS))
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct RankReport {
    pub input_sha256: String,
    pub rank: usize,
    pub tol: f64,
    /// Choi eigenvalues, largest first.
    pub eigenvalues: Vec<f64>,
}

pub fn cmd_choi_rank(path: &FsPath, tol: f64) -> Result<(RankReport, i32), CliError> {
    let (s, digest) = read_set(path)?;
    let rank = match choi_rank(&s, tol) {
        Ok(r) => r,
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let mut eigenvalues = choi(&s).eigenvalues();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok((
        RankReport {
            input_sha256: digest,
            rank,
            tol,
            eigenvalues,
        },
        EXIT_PASS,
    ))
}

pub fn cmd_sample(regime: Regime, seed: u64, real: bool, out: &FsPath) -> Result<i32, CliError> {
    let cfg = SamplerConfig {
        real_entries: real,
        ..SamplerConfig::new(regime, seed)
    };
    let s = sample_seeded(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    write_file(out, &(to_json(&s) + "\n"))?;
    Ok(EXIT_PASS)
}

fn dispatch(cli: Cli) -> Result<Output, CliError> {
    Ok(match cli.command {
        Command::Verify { path, regime } => {
            let (report, code) = cmd_verify(&path, regime.map(RegimeArg::regime))?;
            Output {
                code,
                stdout: to_json_line(&report),
            }
        }
        Command::Reduce {
            path,
            regime,
            out,
            no_explicit,
        } => {
            let (report, code) = cmd_reduce(&path, regime.regime(), &out, !no_explicit)?;
            Output {
                code,
                stdout: to_json_line(&report),
            }
        }
        Command::Region {
            section,
            ti,
            tj,
            kind,
            n,
            seed,
            csv,
            svg,
        } => {
            let args = region::RegionArgs {
                section: region::parse_section(&section)?,
                ti,
                tj,
                kind: kind.into(),
                n,
                seed,
            };
            let (summary, code) = region::cmd_region(&args, &csv, svg.as_deref())?;
            Output {
                code,
                stdout: to_json_line(&summary),
            }
        }
        Command::ChoiRank { path, tol } => {
            let (report, code) = cmd_choi_rank(&path, tol)?;
            Output {
                code,
                stdout: to_json_line(&report),
            }
        }
        Command::Sample { regime, seed, out, real } => Output {
            code: cmd_sample(regime.regime(), seed, real, &out)?,
            stdout: String::new(),
        },
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli) {
        Ok(out) => {
            let _ = stdout.write_all(out.stdout.as_bytes());
            out.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT
        }
    }
}

pub use region::{format_csv, region_svg, RegionArgs, RegionReport};
