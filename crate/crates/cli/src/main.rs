use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kolmolab_core::bitstr::BitString;
use kolmolab_core::cache::RunCache;
use kolmolab_core::complexity::codec::{
    log_cond_decode, log_cond_encode, mindchange_decode, mindchange_encode, two_log_decode,
    two_log_encode, MindchangeCode, MindchangeTable,
};
use kolmolab_core::complexity::{
    cond_c_approx_cached, hardness_profile, ic_bar_window, ic_window, write_profile_csv,
    ConsistencyWindow,
};
use kolmolab_core::registry::{OracleSpec, Registry, RunConfig};
use kolmolab_core::trace::{CheckReport, StageTrace};

/// Step-bounded Kolmogorov and instance complexity on a toy machine.
#[derive(Parser)]
#[command(name = "kolmolab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// C^s(x), or C^s(x | y) with --cond.
    C {
        #[arg(long, value_parser = parse_bits)]
        x: BitString,
        #[arg(long, value_parser = parse_bits)]
        cond: Option<BitString>,
        #[command(flatten)]
        search: Search,
        /// NDJSON run cache; KOLMOLAB_CACHE takes precedence.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Instance complexity of x against a window file.
    Ic {
        #[arg(long, value_parser = parse_bits)]
        x: BitString,
        /// JSON object mapping bit strings to 0/1.
        #[arg(long)]
        window: PathBuf,
        /// Tolerate pending runs away from x.
        #[arg(long)]
        weak: bool,
        #[command(flatten)]
        search: Search,
    },
    /// C, ic and weak ic for every point of a window.
    Profile {
        #[arg(long)]
        window: PathBuf,
        #[command(flatten)]
        search: Search,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-part code bin(n) bin(m) of a characteristic prefix.
    Encode2log {
        #[command(flatten)]
        a: Enumeration,
        #[arg(long)]
        n: u64,
    },
    Decode2log {
        #[command(flatten)]
        a: Enumeration,
        #[arg(long, value_parser = parse_bits)]
        code: BitString,
    },
    /// Count code bin(m), decoded with n known.
    Encodelog {
        #[command(flatten)]
        a: Enumeration,
        #[arg(long)]
        n: u64,
    },
    Decodelog {
        #[command(flatten)]
        a: Enumeration,
        #[arg(long, value_parser = parse_bits)]
        code: BitString,
        #[arg(long)]
        n: u64,
    },
    /// Mind-change code for a limit approximation table.
    Encodemc {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        n: u64,
    },
    Decodemc {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_parser = parse_bits)]
        code: BitString,
    },
    /// Run a construction and write its trace.
    Sim(SimArgs),
    /// Replay a trace through its checker.
    Check { trace: PathBuf },
}

#[derive(Args)]
struct Search {
    #[arg(long, default_value_t = 64)]
    budget: u64,
    #[arg(long, default_value_t = 8)]
    max_len: u32,
}

#[derive(Args)]
struct Enumeration {
    /// Enumeration order of A, comma separated.
    #[arg(long = "enum", value_delimiter = ',', num_args = 0..)]
    elements: Vec<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SimArgs {
    /// complex-set, gap, hard-instances or icc.
    construction: Option<String>,
    /// Start from a saved config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    save_config: Option<PathBuf>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    k_max: Option<u32>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    stages: Option<u64>,
    #[arg(long)]
    budget: Option<u64>,
    /// vm or scripted.
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long)]
    oracle_budget: Option<u64>,
    /// Triples file for the scripted oracle.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// icc only: write the ψ bands as JSON.
    #[arg(long)]
    dump_psi: Option<PathBuf>,
    /// No-op: every construction is deterministic.
    #[arg(long)]
    seedless: bool,
}

enum Failure {
    Violation(String),
    Input(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

type Outcome = Result<(), Failure>;

fn parse_bits(s: &str) -> Result<BitString, String> {
    s.parse().map_err(|e: kolmolab_core::bitstr::BitStrError| e.to_string())
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn load_window(path: &Path) -> anyhow::Result<ConsistencyWindow> {
    serde_json::from_str(&read(path)?).with_context(|| format!("window {}", path.display()))
}

fn load_table(path: &Path) -> anyhow::Result<MindchangeTable> {
    serde_json::from_str(&read(path)?).with_context(|| format!("table {}", path.display()))
}

fn cache_path(flag: Option<PathBuf>) -> Option<PathBuf> {
    std::env::var_os("KOLMOLAB_CACHE")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or(flag)
}

fn c_cmd(x: BitString, cond: Option<BitString>, search: Search, cache: Option<PathBuf>) -> Outcome {
    let path = cache_path(cache);
    let memo = match &path {
        Some(p) if p.exists() => {
            let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            RunCache::load(BufReader::new(f)).with_context(|| format!("cache {}", p.display()))?
        }
        _ => RunCache::new(),
    };
    let cond = cond.unwrap_or_default();
    let v = cond_c_approx_cached(&x, &cond, search.budget, search.max_len, &memo);
    println!("{}", v.value);
    if let Some(p) = path {
        let f = fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?;
        memo.save(io::BufWriter::new(f))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn ic_cmd(x: BitString, window: PathBuf, weak: bool, search: Search) -> Outcome {
    let w = load_window(&window)?;
    let f = if weak { ic_bar_window } else { ic_window };
    let v = f(&x, &w, search.budget, search.max_len).map_err(|e| anyhow!(e))?;
    match &v.witness {
        Some(p) => println!("{}\t{}", v.value, p),
        None => println!("{}", v.value),
    }
    Ok(())
}

fn profile_cmd(window: PathBuf, search: Search, format: Format, out: Option<PathBuf>) -> Outcome {
    let w = load_window(&window)?;
    let rows = hardness_profile(&w, search.budget, search.max_len);
    let text = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_profile_csv(&rows, search.budget, search.max_len, &mut buf)
                .context("writing csv")?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
        Format::Json => serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n",
    };
    write_out(out.as_deref(), &text)?;
    Ok(())
}

fn sim_cmd(args: SimArgs, registry: &Registry) -> Outcome {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_json(&read(p)?).with_context(|| format!("config {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(name) = args.construction {
        cfg.construction = name;
    }
    if cfg.construction.is_empty() {
        let known: Vec<_> = registry.names().collect();
        return Err(anyhow!("name a construction: {}", known.join(", ")).into());
    }
    cfg.k = args.k.or(cfg.k);
    cfg.k_max = args.k_max.or(cfg.k_max);
    cfg.n = args.n.or(cfg.n);
    cfg.stages = args.stages.or(cfg.stages);
    cfg.budget = args.budget.or(cfg.budget);
    if let Some(o) = args.oracle {
        cfg.oracle = OracleSpec {
            name: o,
            ..Default::default()
        };
    }
    if let Some(p) = args.script {
        if args.oracle_budget.is_none() && cfg.oracle.name == "vm" && cfg.oracle.path.is_none() {
            cfg.oracle.name = "scripted".into();
        }
        cfg.oracle.path = Some(p);
    }
    cfg.oracle.budget = args.oracle_budget.or(cfg.oracle.budget);
    if let Some(p) = &args.save_config {
        fs::write(p, cfg.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    let trace = registry.run(&cfg).map_err(|e| anyhow!(e))?;
    if let Some(p) = &args.dump_psi {
        let psi = trace
            .final_state
            .get("psi")
            .ok_or_else(|| anyhow!("--dump-psi needs the icc construction"))?;
        let text = serde_json::to_string_pretty(psi).expect("json value") + "\n";
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    let text = trace.to_json();
    match &args.out {
        Some(p) => fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    let report = registry.check(&trace).map_err(|e| anyhow!(e))?;
    summarize(&report, args.out.is_none())
}

fn check_cmd(path: PathBuf, registry: &Registry) -> Outcome {
    let trace = StageTrace::from_json(&read(&path)?)
        .with_context(|| format!("trace {}", path.display()))?;
    let report = registry
        .check(&trace)
        .map_err(|e| anyhow!(e))
        .with_context(|| format!("trace {}", path.display()))?;
    summarize(&report, false)
}

/// One line per check; any failure is a violation.
fn summarize(report: &CheckReport, quiet: bool) -> Outcome {
    for r in &report.results {
        if quiet && r.passed {
            continue;
        }
        let stage = r.stage.map_or(String::new(), |s| format!(" stage {s}"));
        let status = if r.passed { "PASS" } else { "FAIL" };
        let line = format!("{status} {}{stage}", r.name);
        if r.detail.is_empty() {
            eprintln!("{line}");
        } else {
            eprintln!("{line}: {}", r.detail);
        }
    }
    let mut failed: Vec<&str> = Vec::new();
    for f in report.failures() {
        if !failed.contains(&f.name.as_str()) {
            failed.push(&f.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(format!("failed: {}", failed.join(", "))))
    }
}

fn dispatch(cmd: Command) -> Outcome {
    let registry = Registry::default();
    match cmd {
        Command::C {
            x,
            cond,
            search,
            cache,
        } => c_cmd(x, cond, search, cache),
        Command::Ic {
            x,
            window,
            weak,
            search,
        } => ic_cmd(x, window, weak, search),
        Command::Profile {
            window,
            search,
            format,
            out,
        } => profile_cmd(window, search, format, out),
        Command::Encode2log { a, n } => {
            println!("{}", two_log_encode(&a.elements, n).literal());
            Ok(())
        }
        Command::Decode2log { a, code } => {
            let seg = two_log_decode(&code, &a.elements).map_err(|e| anyhow!(e))?;
            println!("{}", seg.literal());
            Ok(())
        }
        Command::Encodelog { a, n } => {
            println!("{}", log_cond_encode(&a.elements, n).literal());
            Ok(())
        }
        Command::Decodelog { a, code, n } => {
            let seg = log_cond_decode(&code, n, &a.elements).map_err(|e| anyhow!(e))?;
            println!("{}", seg.literal());
            Ok(())
        }
        Command::Encodemc { table, n } => {
            let t = load_table(&table)?;
            let code = mindchange_encode(&t, n).map_err(|e| anyhow!(e))?;
            println!("{}", code.to_bits(n).literal());
            Ok(())
        }
        Command::Decodemc { table, code } => {
            let t = load_table(&table)?;
            let (mc, n) = MindchangeCode::from_bits(&code, &t).map_err(|e| anyhow!(e))?;
            let seg = mindchange_decode(&mc, n, &t).map_err(|e| anyhow!(e))?;
            println!("{}", seg.literal());
            Ok(())
        }
        Command::Sim(args) => sim_cmd(args, &registry),
        Command::Check { trace } => check_cmd(trace, &registry),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(msg)) => {
            eprintln!("violation: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            // sources already quoted by their wrapper are dropped
            let mut parts: Vec<String> = Vec::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !parts.last().is_some_and(|p| p.ends_with(&cause)) {
                    parts.push(cause);
                }
            }
            eprintln!("error: {}", parts.join(": "));
            ExitCode::from(2)
        }
    }
}
