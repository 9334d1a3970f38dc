use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::dodag::DodagState;
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::resources::{EntanglementPool, QuantumParams};
use crate::verifier;

use super::config::{ExperimentConfig, TopologySpec, SEED_ENV};
use super::csv::emit_csv;
use super::experiment::run_experiment;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ghz-router", version, about = "Multipartite entanglement routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run a parameter sweep and write the series as CSV.
    Run(RunArgs),
    /// Run the state-vector checks of the swapping and fusion primitives.
    Verify,
    /// Print a topology's edge list, optionally followed by DODAG tables.
    TopoDump(DumpArgs),
}

/// Every flag is optional; unset flags fall back to the config file, then
/// to GHZ_ROUTER_SEED (seed only), then to the built-in default.
#[derive(Debug, Args)]
struct RunArgs {
    /// maer | sync | both [default: both]
    #[arg(long)]
    engine: Option<String>,
    /// grid:R,C | barbell:K | random:N,P | path:N [default: grid:10,10]
    #[arg(long)]
    topology: Option<String>,
    /// Link generation probability, comma list [default: 0.6]
    #[arg(long)]
    p: Option<String>,
    /// Swap/fusion success probability, comma list [default: 0.9]
    #[arg(long)]
    q: Option<String>,
    /// Coherence time in slots, comma list, `inf` allowed [default: 4]
    #[arg(long)]
    m: Option<String>,
    /// Consumer count, comma list [default: 3]
    #[arg(long)]
    consumers: Option<String>,
    /// Target mean pairwise hop distance, number or `<k>n` [default: 6]
    #[arg(long = "d-star")]
    d_star: Option<String>,
    /// Half-width of the accepted distance window in hops [default: 1]
    #[arg(long)]
    delta: Option<String>,
    /// Consumer sets drawn per point [default: 100]
    #[arg(long)]
    trials: Option<String>,
    /// Slots per trial [default: 20000]
    #[arg(long)]
    slots: Option<String>,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<String>,
    /// uniform | optical [default: uniform]
    #[arg(long = "fusion-mode")]
    fusion_mode: Option<String>,
    /// expected | bernoulli [default: expected]
    #[arg(long)]
    accounting: Option<String>,
    /// Join layers per slot, or `unbounded` [default: unbounded]
    #[arg(long = "join-hops-per-slot")]
    join_hops_per_slot: Option<String>,
    /// key=value file using the flag names above
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Disable the thread pool
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[arg(long, default_value = "grid:10,10")]
    topology: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also simulate this many slots of DODAG growth and print each table.
    #[arg(long = "dodag-slots")]
    dodag_slots: Option<u64>,
    #[arg(long, default_value_t = 0.6)]
    p: f64,
    #[arg(long, default_value = "4")]
    m: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn to_config(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::default();
        if let Ok(seed) = std::env::var(SEED_ENV) {
            config.set("seed", &seed)?;
        }
        if let Some(path) = &self.config {
            config.apply_file(&std::fs::read_to_string(path)?)?;
        }
        let flags = [
            ("engine", &self.engine),
            ("topology", &self.topology),
            ("p", &self.p),
            ("q", &self.q),
            ("m", &self.m),
            ("consumers", &self.consumers),
            ("d-star", &self.d_star),
            ("delta", &self.delta),
            ("trials", &self.trials),
            ("slots", &self.slots),
            ("seed", &self.seed),
            ("fusion-mode", &self.fusion_mode),
            ("accounting", &self.accounting),
            ("join-hops-per-slot", &self.join_hops_per_slot),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        if self.sequential {
            config.execution = Execution::Sequential;
        }
        config.validate()?;
        Ok(config)
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(args: &RunArgs) -> Result<i32> {
    let config = args.to_config()?;
    let series = run_experiment(&config)?;
    emit_csv(&series, output(&args.out)?)?;
    Ok(EXIT_OK)
}

fn verify() -> Result<i32> {
    let checks = verifier::standard_checks()?;
    let mut out = io::stdout().lock();
    let mut failed = 0;
    for c in &checks {
        let mark = if c.passed() { "" } else { "  FAILED" };
        writeln!(out, "{} {:.6}{mark}", c.name, c.value)?;
        failed += usize::from(!c.passed());
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_RUNTIME })
}

fn topo_dump(args: &DumpArgs) -> Result<i32> {
    let spec: TopologySpec = args.topology.parse()?;
    let topo = spec.build(args.seed)?;
    let mut out = output(&args.out)?;
    topo.write_edge_list(&mut out)?;
    if let Some(slots) = args.dodag_slots {
        let mut probe = ExperimentConfig::default();
        probe.set("p", &args.p.to_string())?;
        probe.set("m", &args.m)?;
        let params = QuantumParams::new(probe.p[0], 1.0, probe.m[0])?;
        let mut rng = crate::rng::derive(args.seed, crate::rng::Purpose::Simulation, 0, 0);
        let mut pool = EntanglementPool::new(&topo);
        let mut dodag = DodagState::new(&topo, topo.center_node());
        for slot in 0..slots {
            let expired = pool.advance_age(&params);
            dodag.detach_expired(&topo, &expired);
            pool.attempt_generation(&params, &mut rng);
            dodag.join_round(&pool, slot, None);
            writeln!(out, "# slot {slot}")?;
            dodag.write_table(&mut out)?;
        }
    }
    out.flush()?;
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the subcommand,
/// returning the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Verify => verify(),
        Command::TopoDump(a) => topo_dump(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(cli_main(["ghz-router", "--help"]), EXIT_OK);
        assert_eq!(cli_main(["ghz-router", "run", "--bogus"]), EXIT_USAGE);
        assert_eq!(cli_main(["ghz-router", "run", "--p", "1.5"]), EXIT_USAGE);
        assert_eq!(cli_main(["ghz-router", "run", "--topology", "grid:x"]), EXIT_USAGE);
        assert_eq!(cli_main(["ghz-router", "topo-dump", "--topology", "random:40,0.001"]), EXIT_RUNTIME);
    }
}
