use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hbproxy::bench::{emit_report, predict_comm_time, read_records, write_records, MachineProfile, PROFILES};
use hbproxy::driver::{run, OutputRequest, RunConfig};
use hbproxy::exchange::{predicted_message_count, CutPlan, ExchangeMode, ExchangeStrategy, ThreadMode};
use hbproxy::hybrid::{ActivationMode, Axis, TeamConfig};
use hbproxy::mesh::{build_topology, partition_blocks, CaseConfig, NamedCase};
use hbproxy::outio::WriteStrategy;
use hbproxy::reduce::{ForceReduceStrategy, Functag, ReduceMode};
use hbproxy::{Error, Result};

#[derive(Parser)]
#[command(name = "hbproxy", version, about = "Harmonic-balance proxy solver and parallel-runtime laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a case and write restart and flowtec output.
    Run(RunArgs),
    /// Byte-compare every output file against a golden directory.
    Verify {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        golden: PathBuf,
    },
    /// Modelled message counts and exchange time for a case.
    Predict {
        #[arg(long)]
        case: String,
        #[arg(long)]
        machine: MachineProfile,
        #[arg(long)]
        exchange: ExchangeMode,
        /// Defaults to one rank per block.
        #[arg(long)]
        ranks: Option<usize>,
    },
    /// Efficiency and energy report from run records: CSV on stdout, table on stderr.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        records: Vec<PathBuf>,
        /// All built-in machines when omitted.
        #[arg(long)]
        machine: Option<MachineProfile>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Case file, or the name of a built-in case.
    #[arg(long)]
    case: String,
    #[arg(long)]
    ranks: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value = "harmonics")]
    axis: Axis,
    #[arg(long, default_value = "hoisted")]
    activation: ActivationMode,
    #[arg(long, default_value = "aggregated")]
    exchange: ExchangeMode,
    #[arg(long, default_value = "serial")]
    exchange_threads: ThreadMode,
    #[arg(long, default_value = "buffered")]
    reduce: ReduceMode,
    #[arg(long, default_value = "3")]
    functag: Functag,
    #[arg(long, default_value = "buffered")]
    io: WriteStrategy,
    /// Overrides the case's iteration count.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn load_case(case: &str) -> Result<(String, CaseConfig)> {
    let path = Path::new(case);
    if path.exists() {
        let name = path.file_stem().map_or(case.to_string(), |s| s.to_string_lossy().into_owned());
        return Ok((name, CaseConfig::from_file(path)?));
    }
    match case.parse::<NamedCase>() {
        Ok(named) => Ok((named.name().to_string(), named.config())),
        Err(_) => Err(Error::Usage(format!("no case file or built-in case named '{case}'"))),
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let (name, config) = load_case(&args.case)?;
    let topo = build_topology(&config)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Usage(format!("{}: {e}", args.out.display())))?;
    let mut cfg = RunConfig::new(args.ranks, args.iterations.unwrap_or(config.params.iterations));
    cfg.team = TeamConfig { threads: args.threads, axis: args.axis, activation: args.activation };
    cfg.exchange = ExchangeStrategy { mode: args.exchange, thread_mode: args.exchange_threads };
    cfg.reduce = ForceReduceStrategy { mode: args.reduce, functag: args.functag };
    cfg.outputs = vec![OutputRequest { dir: args.out.clone(), strategy: args.io }];
    let result = run(&topo, &config.params, &cfg)?;
    let csv = write_records(&[result.record(&name, &cfg)])?;
    let path = args.out.join("record.csv");
    std::fs::write(&path, &csv).map_err(|e| Error::Usage(format!("writing {}: {e}", path.display())))?;
    print!("{csv}");
    Ok(ExitCode::SUCCESS)
}

fn regular_files(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Usage(format!("{}: {e}", dir.display())))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::Usage(format!("{}: {e}", dir.display())))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.path().is_file() && name.ends_with(".bin") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

fn cmd_verify(out: &Path, golden: &Path) -> Result<ExitCode> {
    let (have, want) = (regular_files(out)?, regular_files(golden)?);
    let mut mismatches = 0;
    for name in want.iter().filter(|n| !have.contains(n)) {
        println!("missing {name}");
        mismatches += 1;
    }
    for name in have.iter().filter(|n| !want.contains(n)) {
        println!("unexpected {name}");
        mismatches += 1;
    }
    for name in have.iter().filter(|n| want.contains(n)) {
        let read = |d: &Path| std::fs::read(d.join(name)).map_err(|e| Error::Usage(format!("{name}: {e}")));
        let (a, b) = (read(out)?, read(golden)?);
        if a != b {
            let at = a.iter().zip(&b).position(|(x, y)| x != y).unwrap_or(a.len().min(b.len()));
            println!("differs {name} at byte {at}");
            mismatches += 1;
        }
    }
    if mismatches == 0 {
        println!("{} files identical", want.len());
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn cmd_predict(case: &str, machine: MachineProfile, mode: ExchangeMode, ranks: Option<usize>) -> Result<ExitCode> {
    let (name, config) = load_case(case)?;
    let topo = build_topology(&config)?;
    let partition = partition_blocks(&topo, ranks.unwrap_or(topo.nblocks()))?;
    let plan = CutPlan::new(&topo, &partition, config.params.nharms, config.params.npde);
    let count = predicted_message_count(&plan, mode);
    let t = predict_comm_time(&plan, mode, &machine);
    println!("case {name} on {} ranks, {} profile", partition.nranks(), machine.name);
    println!("messages per direction  {}", count.messages_per_direction);
    println!("messages per exchange   {}", count.total_messages());
    println!("bytes per exchange      {}", count.total_bytes());
    println!("modelled seconds        {t:.6e}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(paths: &[PathBuf], machine: Option<MachineProfile>) -> Result<ExitCode> {
    let mut records = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p).map_err(|e| Error::Usage(format!("{}: {e}", p.display())))?;
        records.extend(read_records(&text)?);
    }
    let profiles = machine.map_or(PROFILES.to_vec(), |m| vec![m]);
    let report = emit_report(&records, &profiles)?;
    // CSV on stdout for pipelines, the aligned table for people on stderr.
    print!("{}", report.csv);
    eprint!("{}", report.table);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify { out, golden } => cmd_verify(&out, &golden),
        Command::Predict { case, machine, exchange, ranks } => cmd_predict(&case, machine, exchange, ranks),
        Command::Report { records, machine } => cmd_report(&records, machine),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_configuration() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
