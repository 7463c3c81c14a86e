use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sizing_core::llm::{ChatClient, HttpClient, MockClient, MockScript};
use sizing_core::orchestrator::{
    convergence_csv, derive_seed, report, run, ExperimentConfig, InitStrategy, Method, RunConfig, RunError, RunLog,
};
use sizing_core::sampler::SamplerKind;

#[derive(Parser)]
#[command(name = "sizing", version, about = "Analog circuit sizing with Bayesian optimization and LLM proposals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a config file.
    Run(RunArgs),
    /// GP-BO with uniform random versus LLM zero-shot initialization.
    AblateInit(RunArgs),
    /// LLM-only runs without demonstrations, with uniform demonstrations and with top-k demonstrations.
    AblateIcl(RunArgs),
    /// Summarize run logs as a markdown table.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run log path (`run`) or output directory (ablations).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the scripted mock model instead of the remote endpoint.
    #[arg(long, value_name = "SCRIPT")]
    mock_llm: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run logs to tabulate.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write best-so-far curves as CSV.
    #[arg(long, value_name = "CSV")]
    curves: Option<PathBuf>,
}

fn load(args: &RunArgs) -> Result<RunConfig, RunError> {
    let mut cfg = ExperimentConfig::load(&args.config)?.resolve()?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn client_for(cfg: &RunConfig, mock: Option<&Path>) -> Result<Option<Box<dyn ChatClient>>, RunError> {
    if !cfg.uses_llm() {
        return Ok(None);
    }
    match mock {
        Some(path) => {
            let script = MockScript::load(path).map_err(|e| RunError::Config(e.to_string()))?;
            let seed = derive_seed(cfg.seed, "mock_llm", 0);
            Ok(Some(Box::new(MockClient::new(script, cfg.preset.space(), seed))))
        }
        None => Ok(Some(Box::new(HttpClient::new(&cfg.llm).map_err(RunError::Llm)?))),
    }
}

fn execute(cfg: &RunConfig, mock: Option<&Path>, out: &Path) -> Result<RunLog, RunError> {
    let mut client = client_for(cfg, mock)?;
    let log = run(cfg, client.as_deref_mut())?;
    log.write(out)?;
    let s = log.summary().expect("finished runs have a summary");
    println!(
        "{}: {} evaluations, best fom {} at #{} ({} missed specs) -> {}",
        cfg.method,
        s.records,
        s.best_fom,
        s.best_index,
        s.missed_specs,
        out.display()
    );
    Ok(log)
}

fn default_out(cfg: &RunConfig) -> PathBuf {
    PathBuf::from("runs").join(format!("{}-{}-seed{}.jsonl", cfg.method, cfg.preset.name(), cfg.seed))
}

fn ablate(args: &RunArgs, arms: Vec<(String, RunConfig)>, default_dir: &str) -> Result<(), RunError> {
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(default_dir));
    let mut logs = Vec::new();
    for (name, cfg) in arms {
        let path = dir.join(format!("{name}.jsonl"));
        logs.push((name, execute(&cfg, args.mock_llm.as_deref(), &path)?));
    }
    let text = report(&logs)?;
    fs::write(dir.join("report.md"), &text).map_err(|e| RunError::Io(e.to_string()))?;
    print!("{text}");
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load(&args)?;
            let out = args.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| default_out(&cfg));
            execute(&cfg, args.mock_llm.as_deref(), &out).map(|_| ())
        }
        Command::AblateInit(args) => {
            let base = load(&args)?;
            let arms = [InitStrategy::UniformRandom, InitStrategy::LlmZeroShot]
                .into_iter()
                .map(|init| {
                    let mut c = RunConfig {
                        init_strategy: init,
                        ..base.clone()
                    };
                    c.method = Method::GpBo;
                    (c.llm_queries, c.gp_queries) = (0, base.batch());
                    c.validate().map(|_| (format!("gp_bo-{}", init.as_str()), c))
                })
                .collect::<Result<Vec<_>, _>>()?;
            ablate(&args, arms, "ablate-init")
        }
        Command::AblateIcl(args) => {
            let base = load(&args)?;
            let arms = [SamplerKind::None, SamplerKind::Uniform, SamplerKind::TopK]
                .into_iter()
                .map(|kind| {
                    let mut c = base.clone();
                    c.method = Method::LlmOnly;
                    c.init_strategy = InitStrategy::LlmZeroShot;
                    (c.llm_queries, c.gp_queries) = (base.llm_queries.max(1), 0);
                    c.sampler.kind = kind;
                    c.validate().map(|_| (format!("llm_only-{}", kind.as_str()), c))
                })
                .collect::<Result<Vec<_>, _>>()?;
            ablate(&args, arms, "ablate-icl")
        }
        Command::Report(args) => {
            let logs = args
                .logs
                .iter()
                .map(|p| {
                    let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    RunLog::read(p)
                        .map(|l| (name, l))
                        .map_err(|e| match e {
                            RunError::Log { line, message } => RunError::Log {
                                line,
                                message: format!("{}: {message}", p.display()),
                            },
                            other => other,
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let text = report(&logs)?;
            match &args.out {
                Some(p) => fs::write(p, &text).map_err(|e| RunError::Io(format!("{}: {e}", p.display())))?,
                None => print!("{text}"),
            }
            if let Some(p) = &args.curves {
                fs::write(p, convergence_csv(&logs)).map_err(|e| RunError::Io(format!("{}: {e}", p.display())))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
