use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use emtgrid::{data_dir, open_grid, parse_list, parse_slots, router};
use emtgrid_core::bench::{self, Backend, ReportFormat, TimingConfig, TimingReport};
use emtgrid_core::compiler::{compile, DeviceProfile, ScheduleProgram};
use emtgrid_core::exec::{
    compile_emitted, emit_source, execute_parallel, interpret, ExecutionContext, Toolchain,
};
use emtgrid_core::grid::{estimate_cost, run_package};
use emtgrid_core::kernels::run_serial;
use emtgrid_core::model::{parse_model, serialize_model, validate, NetworkModel, Severity};

const DEFAULT_SLOTS: &str = "cpu-serial:2,cpu-parallel:1,cpu-vector:1";

#[derive(Parser)]
#[command(name = "emtgrid", version, about = "EMT simulation compiler, backends and task grid")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a model document and write its waveforms as CSV.
    Run {
        model: PathBuf,
        /// serial, interpreter, parallel:<workers> or c99.
        #[arg(long, default_value = "interpreter")]
        backend: String,
        /// Device profile used to compile (defaults to the document's).
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a model document to a schedule file.
    Compile {
        model: PathBuf,
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit source code for a schedule file.
    Emit {
        schedule: PathBuf,
        #[arg(long, default_value = "c99")]
        dialect: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the bundled 33-bus feeder, optionally replicated at its root.
    Case {
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a packaged engine (used by grid workers).
    VseRun {
        #[arg(long)]
        package: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the task grid over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Queue a model document in the local grid store.
    Submit { model: PathBuf },
    /// Print a task record.
    Status { id: String },
    /// Write a finished task's waveforms.
    Result {
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List worker slots.
    Slots {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Local grid operations.
    Grid {
        #[command(subcommand)]
        cmd: GridCmd,
    },
    /// Timing benchmarks.
    Bench {
        #[command(subcommand)]
        cmd: BenchCmd,
    },
    /// Rental cost of a run.
    Cost {
        /// Price per device-week.
        #[arg(long)]
        price: f64,
        #[arg(long)]
        hours: f64,
        #[arg(long, default_value_t = 1)]
        devices: usize,
    },
    /// Render saved benchmark reports.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "table")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Worker slots as `profile[:capacity],...`.
    #[arg(long, default_value = DEFAULT_SLOTS)]
    slots: String,
    /// Run packages on threads instead of worker processes.
    #[arg(long)]
    in_process: bool,
}

#[derive(Subcommand)]
enum GridCmd {
    /// Run every dispatchable queued task, then print all records.
    Run {
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Args)]
struct TimingArgs {
    #[arg(long, default_value_t = 100)]
    warmup: usize,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 2)]
    repeats: usize,
    #[arg(long, default_value = "table")]
    format: String,
    /// Also save the reports as JSON for `emtgrid report`.
    #[arg(long)]
    save: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Replicated-feeder scaling.
    Scale {
        #[arg(long, default_value = "1,4,16,32")]
        k: String,
        #[arg(long, default_value = "serial,parallel:8")]
        backends: String,
        #[command(flatten)]
        timing: TimingArgs,
    },
    /// Vectorized scenario batches.
    Scenarios {
        #[arg(long, default_value = "1,4,16,64")]
        n: String,
        #[arg(long, default_value = "vectorized")]
        backend: String,
        /// Steps compared against serial runs before timing.
        #[arg(long, default_value_t = 50)]
        check_steps: usize,
        #[command(flatten)]
        timing: TimingArgs,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = real_main(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn load_model(path: &Path) -> Result<NetworkModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let m = parse_model(&text).with_context(|| format!("parsing {}", path.display()))?;
    let report = validate(&m);
    for i in &report.issues {
        let level = if i.severity == Severity::Error { "error" } else { "warning" };
        eprintln!("{level}: {:?} {}: {}", i.code, i.subject, i.message);
    }
    if report.has_errors() {
        bail!("{} failed validation", path.display());
    }
    Ok(m)
}

fn profile_for(m: &NetworkModel, name: Option<&str>) -> Result<DeviceProfile> {
    Ok(DeviceProfile::lookup(name.unwrap_or(&m.task.device_profile))?)
}

fn timing(t: &TimingArgs) -> TimingConfig {
    TimingConfig { warmup: t.warmup, steps: t.steps, repeats: t.repeats }
}

fn render(reports: &[TimingReport], t: &TimingArgs) -> Result<()> {
    if let Some(p) = &t.save {
        fs::write(p, serde_json::to_string_pretty(reports)? + "\n")?;
    }
    let fmt = ReportFormat::parse(&t.format).with_context(|| format!("unknown format `{}`", t.format))?;
    write_out(None, &bench::report(reports, fmt))
}

fn real_main(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { model, backend, profile, steps, out } => {
            let m = load_model(&model)?;
            let waves = if backend == "serial" {
                let mut task = m.task.clone();
                if let Some(n) = steps {
                    task.duration = task.dt * n as f64;
                }
                run_serial(&m, &task)?.waveforms
            } else {
                let p = profile_for(&m, profile.as_deref())?;
                let schedule = compile(&m, &p, None)?.0;
                let n = steps.unwrap_or(schedule.steps);
                let mut ctx = ExecutionContext::new(schedule);
                match backend.as_str() {
                    "interpreter" => interpret(&mut ctx, n)?,
                    "c99" => {
                        let dir = tempfile::tempdir()?;
                        let src = emit_source(&ctx.schedule, "c99")?;
                        let prog = compile_emitted(&src, &Toolchain::default(), dir.path())?;
                        prog.run(&ctx, n, dir.path())?
                    }
                    other => match Backend::parse(other)? {
                        Backend::Parallel(w) => execute_parallel(&mut ctx, w, n)?,
                        _ => bail!("backend `{other}` needs a scenario batch; use `bench scenarios`"),
                    },
                }
            };
            write_out(out.as_deref(), &waves.to_csv())
        }
        Cmd::Compile { model, profile, out } => {
            let m = load_model(&model)?;
            let (s, loops) = compile(&m, &profile_for(&m, profile.as_deref())?, None)?;
            for l in &loops.loops {
                eprintln!("note: algebraic loop broken at {} -> {}", l.producer, l.consumer);
            }
            write_out(out.as_deref(), &s.to_text())
        }
        Cmd::Emit { schedule, dialect, out } => {
            let text = fs::read_to_string(&schedule).with_context(|| format!("reading {}", schedule.display()))?;
            let s = ScheduleProgram::parse(&text)?;
            write_out(out.as_deref(), &emit_source(&s, &dialect)?)
        }
        Cmd::Case { k, out } => {
            let m = bench::gen_scale_case(&bench::ieee33_pv3(), k)?;
            write_out(out.as_deref(), &(serialize_model(&m) + "\n"))
        }
        Cmd::VseRun { package, out } => {
            let waves = run_package(&package)?;
            fs::write(&out, waves.to_csv()).with_context(|| format!("writing {}", out.display()))
        }
        Cmd::Serve { addr, grid } => {
            let g = open_grid(data_dir(), parse_slots(&grid.slots)?, grid.in_process)?;
            g.pump();
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
                eprintln!("serving on http://{} (data in {})", listener.local_addr()?, data_dir().display());
                axum::serve(listener, router(g)).await?;
                Ok(())
            })
        }
        Cmd::Submit { model } => {
            let text = fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
            let g = open_grid(data_dir(), parse_slots(DEFAULT_SLOTS)?, true)?;
            println!("{}", g.submit(&text)?);
            Ok(())
        }
        Cmd::Status { id } => {
            let g = open_grid(data_dir(), parse_slots(DEFAULT_SLOTS)?, true)?;
            println!("{}", serde_json::to_string_pretty(&g.status(&id)?)?);
            Ok(())
        }
        Cmd::Result { id, out } => {
            let g = open_grid(data_dir(), parse_slots(DEFAULT_SLOTS)?, true)?;
            write_out(out.as_deref(), &g.result_csv(&id)?)
        }
        Cmd::Slots { grid } => {
            let g = open_grid(data_dir(), parse_slots(&grid.slots)?, true)?;
            println!("{}", serde_json::to_string_pretty(&g.slots())?);
            Ok(())
        }
        Cmd::Grid { cmd: GridCmd::Run { grid } } => {
            let g = open_grid(data_dir(), parse_slots(&grid.slots)?, grid.in_process)?;
            g.run_until_idle();
            for r in g.records() {
                let extra = r.failure.as_deref().or(r.waiting.as_deref()).unwrap_or("");
                println!("{} {:<8} {}", r.id, r.state, extra);
            }
            Ok(())
        }
        Cmd::Bench { cmd } => match cmd {
            BenchCmd::Scale { k, backends, timing: t } => {
                let ks: Vec<usize> = parse_list(&k)?;
                let bs = backends.split(',').map(Backend::parse).collect::<Result<Vec<_>, _>>()?;
                let reports = bench::run_scale_benchmark(&bench::ieee33_pv3(), &ks, &bs, &timing(&t))?;
                render(&reports, &t)
            }
            BenchCmd::Scenarios { n, backend, check_steps, timing: t } => {
                if Backend::parse(&backend)? != Backend::Vectorized {
                    bail!("scenario batches run on the vectorized backend");
                }
                let ns: Vec<usize> = parse_list(&n)?;
                let reports = bench::run_scenario_benchmark(&bench::ieee33_pv3(), &ns, &timing(&t), check_steps)?;
                render(&reports, &t)
            }
        },
        Cmd::Cost { price, hours, devices } => {
            println!("{:.3}", estimate_cost(price, hours, devices)?);
            Ok(())
        }
        Cmd::Report { input, format, out } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let reports: Vec<TimingReport> = serde_json::from_str(&text)?;
            if reports.is_empty() {
                bail!("{} holds no reports", input.display());
            }
            let fmt = ReportFormat::parse(&format).with_context(|| format!("unknown format `{format}`"))?;
            write_out(out.as_deref(), &bench::report(&reports, fmt))
        }
    }
}
