use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod analyze;
mod attack;
mod codegen;
mod config;
mod output;
mod simulate;
mod suite;
mod tables;

use config::Settings;

/// Error carrying the process exit code: 2 for bad input, 1 for failures at run time.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
}

impl From<bb84_core::Error> for CliError {
    fn from(e: bb84_core::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "bb84", version, about = "BB84 / used-bits BB84 simulator and security bound calculator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the protocol against an attack and summarize the trials
    Simulate(SimulateArgs),
    /// Reliability and security bounds for one parameter set
    Bounds(BoundsArgs),
    /// η spectrum and trace-distance bounds for one attack and public context
    AttackAnalyze(AnalyzeArgs),
    /// Random ECC+PA code with a distance certificate
    Codegen(CodegenArgs),
    /// Invariant checks, one line per property
    Verify(VerifyArgs),
    /// Reliability and rate table
    Table1(Table1Args),
}

#[derive(Args, Clone)]
struct Common {
    /// key = value file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// output file (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args, Clone)]
struct Protocol {
    /// half the number of used bits
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p_allowed: Option<f64>,
    #[arg(long)]
    eps_sec: Option<f64>,
    #[arg(long)]
    eps_rel: Option<f64>,
}

#[derive(Args, Clone)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    protocol: Protocol,
    #[arg(long)]
    trials: Option<u64>,
    /// code file: "n r m" header followed by the P_C rows then the P_PA rows
    #[arg(long)]
    code: Option<PathBuf>,
    /// preset name, flip:<p>, loss:<p>, or an attack JSON file
    #[arg(long)]
    attack: Option<String>,
    /// used-bits or full
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    symmetrize: Option<bool>,
    /// auto, quantum or classical
    #[arg(long)]
    backend: Option<String>,
    /// full mode: n'' = ceil((4 + delta) n)
    #[arg(long)]
    delta_num: Option<f64>,
    /// full mode: Bob reports missing qubits
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    loss_tolerant: Option<bool>,
}

#[derive(Args, Clone)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    protocol: Protocol,
    /// key length
    #[arg(long)]
    m: Option<usize>,
    /// number of parity checks (default: smallest r meeting the ECC requirement)
    #[arg(long)]
    r: Option<usize>,
}

#[derive(Args, Clone)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// number of information bits; the attack acts on 2n qubits
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    code: Option<PathBuf>,
    #[arg(long)]
    attack: Option<String>,
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    symmetrize: Option<bool>,
    /// bases, 2n bits
    #[arg(long)]
    b: Option<String>,
    /// subset mask, 2n bits, 1 = information bit
    #[arg(long)]
    s: Option<String>,
    /// Alice's test bits
    #[arg(long)]
    i_t: Option<String>,
    /// Bob's test bits
    #[arg(long)]
    j_t: Option<String>,
    /// syndrome
    #[arg(long)]
    xi: Option<String>,
    /// which PA row to bound
    #[arg(long)]
    v_index: Option<usize>,
}

#[derive(Args, Clone)]
struct CodegenArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    protocol: Protocol,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args, Clone)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// all, symmetrization, orthogonality, spectrum, ordering or hoeffding
    #[arg(long)]
    suite: Option<String>,
    /// preset, attack JSON file, "random" or "all"
    #[arg(long)]
    attack: Option<String>,
    /// number of random attacks
    #[arg(long)]
    attacks: Option<usize>,
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    symmetrize: Option<bool>,
}

#[derive(Args, Clone)]
struct Table1Args {
    #[command(flatten)]
    common: Common,
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(|x| x.to_string())
}

fn p(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|x| x.display().to_string())
}

impl Common {
    fn flags(&self) -> Vec<(&'static str, Option<String>)> {
        vec![("seed", s(&self.seed)), ("out", p(&self.out)), ("format", s(&self.format))]
    }
}

impl Protocol {
    fn flags(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("n", s(&self.n)),
            ("p-allowed", s(&self.p_allowed)),
            ("eps-sec", s(&self.eps_sec)),
            ("eps-rel", s(&self.eps_rel)),
        ]
    }
}

fn settings(
    command: &'static str,
    common: &Common,
    mut flags: Vec<(&'static str, Option<String>)>,
    defaults: &[(&str, &str)],
) -> Result<Settings, CliError> {
    flags.extend(common.flags());
    let allowed: Vec<&str> = flags.iter().map(|(k, _)| *k).collect();
    Settings::resolve(command, &allowed, defaults, common.config.as_deref(), flags)
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate(a) => {
            let mut f = a.protocol.flags();
            f.extend([
                ("trials", s(&a.trials)),
                ("code", p(&a.code)),
                ("attack", s(&a.attack)),
                ("mode", s(&a.mode)),
                ("symmetrize", s(&a.symmetrize)),
                ("backend", s(&a.backend)),
                ("delta-num", s(&a.delta_num)),
                ("loss-tolerant", s(&a.loss_tolerant)),
            ]);
            simulate::run(&settings("simulate", &a.common, f, simulate::DEFAULTS)?)
        }
        Command::Bounds(a) => {
            let mut f = a.protocol.flags();
            f.extend([("m", s(&a.m)), ("r", s(&a.r))]);
            tables::bounds(&settings("bounds", &a.common, f, tables::BOUNDS_DEFAULTS)?)
        }
        Command::AttackAnalyze(a) => {
            let f = vec![
                ("n", s(&a.n)),
                ("code", p(&a.code)),
                ("attack", s(&a.attack)),
                ("symmetrize", s(&a.symmetrize)),
                ("b", s(&a.b)),
                ("s", s(&a.s)),
                ("i-t", s(&a.i_t)),
                ("j-t", s(&a.j_t)),
                ("xi", s(&a.xi)),
                ("v-index", s(&a.v_index)),
            ];
            analyze::run(&settings("attack-analyze", &a.common, f, analyze::DEFAULTS)?)
        }
        Command::Codegen(a) => {
            let mut f = a.protocol.flags();
            f.extend([("r", s(&a.r)), ("m", s(&a.m))]);
            codegen::run(&settings("codegen", &a.common, f, codegen::DEFAULTS)?)
        }
        Command::Verify(a) => {
            let f = vec![
                ("suite", s(&a.suite)),
                ("attack", s(&a.attack)),
                ("attacks", s(&a.attacks)),
                ("symmetrize", s(&a.symmetrize)),
            ];
            suite::run(&settings("verify", &a.common, f, suite::DEFAULTS)?)
        }
        Command::Table1(a) => tables::table1(&settings("table1", &a.common, vec![], tables::TABLE1_DEFAULTS)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("bb84: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
