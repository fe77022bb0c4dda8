// Range checks are written `!(x > 0.0)` on purpose so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use apbench::analysis::{analyze_campaign, AnalysisOptions, CpuScope};
use apbench::load::{run_load, write_requests_csv, LoadPlan};
use apbench::orchestrator::{
    load_campaign, full_campaign_estimate_h, run_campaign, ExperimentPlan, PowerBackend, ServiceLaunch,
};
use apbench::report::{render_report, write_bundle, write_report};
use apbench::telemetry::SimPowerModel;
use apbench::workload::{calibrate, limit_memory, pin_to_core, serve, AntipatternKind, WorkloadConfig};
use apbench::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing::info;

#[derive(Parser)]
#[command(name = "apbench", version, about = "Performance-antipattern power benchmark")]
struct Cli {
    /// Output directory (campaign directory, load log directory or report bundle).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the fixture, handler randomness and simulated power noise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output; repeat for trace level.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve one antipattern endpoint over HTTP.
    Serve(ServeArgs),
    /// Drive an endpoint with closed-loop virtual users and record every request.
    Load(LoadArgs),
    /// Run repeated trials: fresh service, settle, sample, load, cool down.
    Campaign(CampaignArgs),
    /// Analyse one or more campaign directories into a report bundle.
    Analyze(AnalyzeArgs),
    /// Re-render report.md from an existing bundle.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct WorkloadArgs {
    /// One of the ten antipattern slugs.
    #[arg(long)]
    antipattern: Option<String>,
    #[arg(long)]
    scale: Option<u32>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    payload_size: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    pin_core: Option<usize>,
    #[arg(long)]
    memory_limit_mb: Option<u64>,
    /// Scale the work per request so one request takes about this long.
    #[arg(long)]
    calibrate_target_ms: Option<f64>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    workload: WorkloadArgs,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Full workload configuration as JSON; used by the campaign runner.
    #[arg(long, hide = true)]
    config_json: Option<String>,
}

#[derive(Args)]
struct LoadArgs {
    /// Endpoint URL, e.g. http://127.0.0.1:8080/the-ramp
    #[arg(long)]
    url: String,
    #[arg(long, default_value_t = 50)]
    users: usize,
    #[arg(long, default_value_t = 10.0)]
    spawn_rate: f64,
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    think_time_ms: u64,
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Real,
    Sim,
}

#[derive(Args)]
struct CampaignArgs {
    #[command(flatten)]
    workload: WorkloadArgs,
    /// Defaults to the per-antipattern user count.
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    spawn_rate: Option<f64>,
    /// Load phase length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    warmup: Option<f64>,
    #[arg(long)]
    cooldown: Option<f64>,
    #[arg(long)]
    settle: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    /// 20-minute load, 120 s warm-up, 30 repetitions; explicit flags still win.
    #[arg(long)]
    full_scale: bool,
    #[arg(long, value_enum, default_value = "real")]
    backend: BackendArg,
    #[arg(long, default_value = apbench::telemetry::DEFAULT_POWERCAP_ROOT, hide = true)]
    powercap_root: PathBuf,
    /// Simulated power: watts per ms of mean response time.
    #[arg(long)]
    sim_rt_coeff: Option<f64>,
    /// Simulated power: watts at full CPU utilisation.
    #[arg(long)]
    sim_cpu_coeff: Option<f64>,
    #[arg(long)]
    sim_base_w: Option<f64>,
    #[arg(long)]
    sim_noise_sd: Option<f64>,
    /// Drive an already-running service instead of launching one per trial.
    #[arg(long)]
    url: Option<String>,
    /// Print the duration estimate and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Campaign directories; one table row per campaign.
    #[arg(required = true)]
    campaigns: Vec<PathBuf>,
    /// Override the warm-up recorded in each run.
    #[arg(long)]
    warmup: Option<f64>,
    #[arg(long, default_value = "process")]
    cpu_scope: String,
    /// Pool only repetitions that pass the validity rules.
    #[arg(long)]
    valid_only: bool,
}

#[derive(Args)]
struct ReportArgs {
    bundle: PathBuf,
    /// Also print the Markdown.
    #[arg(long)]
    print: bool,
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("starting the async runtime", e))
}

fn workload_config(args: &WorkloadArgs, seed: Option<u64>) -> Result<WorkloadConfig> {
    let slug = args.antipattern.as_deref().ok_or_else(|| {
        Error::Usage(format!("--antipattern is required (one of: {})", AntipatternKind::slugs().join(", ")))
    })?;
    let kind: AntipatternKind = slug.parse()?;
    let mut config = WorkloadConfig::new(kind);
    if let Some(s) = seed {
        config.dataset_seed = s;
        config.rng_seed = s;
    }
    if let Some(v) = args.scale {
        config.dataset_scale = v;
    }
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.payload_size {
        config.payload_size = v;
    }
    if let Some(v) = args.workers {
        config.worker_count = v;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_serve(args: ServeArgs, seed: Option<u64>) -> Result<()> {
    let mut config = match &args.config_json {
        Some(json) => serde_json::from_str::<WorkloadConfig>(json)
            .map_err(|e| Error::Usage(format!("--config-json: {e}")))?,
        None => workload_config(&args.workload, seed)?,
    };
    config.validate()?;
    if let Some(target) = args.workload.calibrate_target_ms {
        if !(target > 0.0) {
            return Err(Error::Usage("--calibrate-target-ms must be positive".into()));
        }
    }
    // affinity and limits first, so every runtime thread inherits them
    if let Some(core) = args.workload.pin_core {
        pin_to_core(core).map_err(|e| Error::Capability(format!("cannot pin to core {core}: {e}")))?;
    }
    if let Some(mb) = args.workload.memory_limit_mb {
        limit_memory(mb).map_err(|e| Error::Capability(format!("cannot limit memory to {mb} MB: {e}")))?;
    }
    if let Some(target) = args.workload.calibrate_target_ms {
        config = calibrate(&config, target)?;
        info!(iterations = config.iterations, target_ms = target, "calibrated");
    }
    let rt = runtime()?;
    rt.block_on(async move {
        let handle = serve(config, &format!("{}:{}", args.host, args.port)).await?;
        let line = serde_json::to_string(&handle.meta).map_err(|e| Error::Runtime(e.to_string()))?;
        let mut stdout = std::io::stdout().lock();
        writeln!(stdout, "{line}").and_then(|_| stdout.flush()).map_err(|e| Error::io("writing startup record", e))?;
        drop(stdout);
        handle.run_until_signal().await
    })
}

fn cmd_load(args: LoadArgs, out: &Path) -> Result<()> {
    let mut plan = LoadPlan::new(args.url, args.users, args.duration);
    plan.spawn_rate = args.spawn_rate;
    plan.think_time_ms = args.think_time_ms;
    plan.timeout_s = args.timeout;
    plan.validate()?;
    let log = runtime()?.block_on(run_load(&plan))?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    let path = out.join("requests.csv");
    write_requests_csv(&path, &log.records)?;
    println!(
        "{} requests, {} failed, peak {} in flight; log written to {}",
        log.records.len(),
        log.failure_count(),
        log.max_in_flight,
        path.display()
    );
    Ok(())
}

fn cmd_campaign(args: CampaignArgs, out: PathBuf, seed: Option<u64>) -> Result<()> {
    let workload = workload_config(&args.workload, seed)?;
    let mut launch = ServiceLaunch::current_exe()?;
    launch.pin_core = args.workload.pin_core;
    launch.memory_limit_mb = args.workload.memory_limit_mb;
    launch.calibrate_target_ms = args.workload.calibrate_target_ms;

    let kind = workload.kind;
    let mut plan = if args.full_scale {
        ExperimentPlan::full_scale(kind, out, launch)
    } else {
        ExperimentPlan::desk_scale(kind, out, launch)
    };
    plan.workload = workload;
    if let Some(v) = args.users {
        plan.load.target_users = v;
    }
    if let Some(v) = args.spawn_rate {
        plan.load.spawn_rate = v;
    }
    if let Some(v) = args.duration {
        plan.load.duration_s = v;
    }
    if let Some(v) = args.warmup {
        plan.warmup_s = v;
    }
    if let Some(v) = args.cooldown {
        plan.cooldown_s = v;
    }
    if let Some(v) = args.settle {
        plan.settle_s = v;
    }
    if let Some(v) = args.reps {
        plan.repetitions = v;
    }
    plan.target_url = args.url;
    plan.power_backend = match args.backend {
        BackendArg::Real => PowerBackend::Real { powercap_root: args.powercap_root },
        BackendArg::Sim => {
            let mut m = SimPowerModel::default();
            if let Some(s) = seed {
                m.seed = s;
            }
            if let Some(v) = args.sim_rt_coeff {
                m.rt_coeff = v;
            }
            if let Some(v) = args.sim_cpu_coeff {
                m.cpu_coeff_w = v;
            }
            if let Some(v) = args.sim_base_w {
                m.base_w = v;
            }
            if let Some(v) = args.sim_noise_sd {
                m.noise_sd_w = v;
            }
            PowerBackend::Simulated(m)
        }
    };
    plan.validate()?;
    plan.check_capabilities()?;

    eprintln!(
        "{} repetition(s) of {}: about {:.1} min (all ten antipatterns at full scale: about {:.0} h)",
        plan.repetitions,
        kind.slug(),
        plan.estimate_s() / 60.0,
        full_campaign_estimate_h(&plan.service.program)
    );
    if args.dry_run {
        return Ok(());
    }
    let summary = runtime()?.block_on(run_campaign(&plan))?;
    println!(
        "{} of {} repetitions ok in {:.1} min; manifest at {}",
        summary.ok_count(),
        summary.entries.len(),
        summary.elapsed_s / 60.0,
        plan.out_dir.join(apbench::orchestrator::MANIFEST_FILE).display()
    );
    for e in summary.entries.iter().filter(|e| !e.ok()) {
        println!("  {} failed: {}", e.dir, e.detail);
    }
    if summary.ok_count() == 0 {
        return Err(Error::Runtime("every repetition failed".into()));
    }
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs, out: &Path) -> Result<()> {
    let opts = AnalysisOptions {
        warmup_s: args.warmup,
        cpu_scope: args.cpu_scope.parse::<CpuScope>()?,
        valid_only: args.valid_only,
    };
    let mut analyses = Vec::new();
    for dir in &args.campaigns {
        let (artifacts, manifest) = load_campaign(dir)?;
        if artifacts.is_empty() {
            return Err(Error::Runtime(format!(
                "{} has no successful repetitions ({} listed)",
                dir.display(),
                manifest.len()
            )));
        }
        analyses.push(analyze_campaign(&artifacts, &opts)?);
    }
    let report = write_bundle(&analyses, out)?;
    println!("report written to {}", report.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let path = write_report(&args.bundle)?;
    if args.print {
        print!("{}", render_report(&args.bundle)?);
    } else {
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out;
    match cli.command {
        Command::Serve(a) => cmd_serve(a, cli.seed),
        Command::Load(a) => cmd_load(a, &out.unwrap_or_else(|| PathBuf::from("load-out"))),
        Command::Campaign(a) => cmd_campaign(a, out.unwrap_or_else(|| PathBuf::from("campaign")), cli.seed),
        Command::Analyze(a) => cmd_analyze(a, &out.unwrap_or_else(|| PathBuf::from("report"))),
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
