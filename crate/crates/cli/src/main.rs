use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use perron::{Error, SubequationSpec};
use perron_cli::commands::{self, Ctx, Outcome};
use perron_cli::config::RunConfig;
use perron_cli::io::OutDir;
use perron_cli::validate::{run_suite, SuiteOptions};

#[derive(Parser)]
#[command(name = "perron", version, about = "Riesz characteristics, nonlinear Green's functions and Perron solves")]
struct Cli {
    /// Run configuration (key=value lines with [section] headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write fields as PGM images.
    #[arg(long, global = true)]
    emit_pgm: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// Full spec line, e.g. "kind=minmax n=2 p=1.5".
    #[arg(long)]
    spec: Option<String>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    q: Option<u32>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    cap_lambda: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Riesz characteristic and condition (F3) of a subequation.
    RieszChar(SpecArgs),
    /// Duality checks on random matrices.
    DualCheck {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Also classify diag(v1,...,vn).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        diag: Option<Vec<f64>>,
    },
    /// Green's function with one pole and zero boundary data.
    Green,
    /// Dirichlet solve.
    Solve,
    /// Solution with a prescribed density at one point.
    Density,
    /// Finite-case density curve f(t).
    FiniteSweep,
    /// Value cone generators, membership and value-problem solves.
    ValueCone {
        /// Value vectors to solve for, e.g. --solve=-1,-1
        #[arg(long, allow_hyphen_values = true)]
        solve: Vec<String>,
    },
    /// Runs the invariant suite.
    Validate,
}

fn spec_from(args: &SpecArgs, cfg: Option<&RunConfig>) -> perron::Result<SubequationSpec> {
    if let Some(line) = &args.spec {
        return line.parse();
    }
    let Some(kind) = &args.kind else {
        return match cfg {
            Some(c) => c.subequation(),
            None => Err(Error::Config("give --spec, --kind or a --config with [subequation]".into())),
        };
    };
    let mut pairs = vec![
        ("kind".to_string(), kind.clone()),
        ("n".to_string(), args.n.unwrap_or(2).to_string()),
    ];
    let mut opt = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    opt("p", args.p.map(|x| x.to_string()));
    opt("k", args.k.map(|x| x.to_string()));
    opt("q", args.q.map(|x| x.to_string()));
    opt("delta", args.delta.map(|x| x.to_string()));
    opt("lambda", args.lambda.map(|x| x.to_string()));
    opt("cap_lambda", args.cap_lambda.map(|x| x.to_string()));
    perron::subeq::from_pairs(&pairs)
}

fn parse_vector(s: &str) -> perron::Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("'{t}' is not a number"))))
        .collect()
}

fn is_usage(e: &Error) -> bool {
    matches!(e, Error::Config(_))
}

fn run(cli: &Cli) -> perron::Result<Outcome> {
    let cfg = match &cli.config {
        Some(p) => Some(RunConfig::load(p)?),
        None => None,
    };
    let need_cfg = || {
        cfg.clone()
            .ok_or_else(|| Error::Config("this command needs --config PATH".into()))
    };
    match &cli.command {
        Command::RieszChar(a) => Ok(commands::riesz_char(&spec_from(a, cfg.as_ref())?)),
        Command::DualCheck { spec, samples, diag } => {
            let s = spec_from(spec, cfg.as_ref())?;
            commands::dual_check(&s, *samples, cli.seed, diag.as_deref())
        }
        Command::Validate => {
            let mut out = OutDir::new(&cli.out)?;
            let checks = run_suite(
                SuiteOptions {
                    seed: cli.seed,
                    flip_gauge: false,
                },
                Some(&mut out),
            )?;
            let text: String = checks.iter().map(|c| c.line() + "\n").collect();
            out.write("validate.txt", &text)?;
            Ok(Outcome {
                ok: checks.iter().all(|c| c.pass),
                text,
            })
        }
        cmd => {
            let mut ctx = Ctx {
                cfg: need_cfg()?,
                out: OutDir::new(&cli.out)?,
                seed: cli.seed,
                emit_pgm: cli.emit_pgm,
            };
            let res = match cmd {
                Command::Green => commands::green(&mut ctx),
                Command::Solve => commands::solve(&mut ctx),
                Command::Density => commands::density(&mut ctx),
                Command::FiniteSweep => commands::finite_sweep(&mut ctx),
                Command::ValueCone { solve } => {
                    let targets = solve.iter().map(|s| parse_vector(s)).collect::<perron::Result<Vec<_>>>()?;
                    commands::value_cone(&mut ctx, &targets)
                }
                _ => unreachable!("handled above"),
            };
            if let Err(e) = &res {
                if !is_usage(e) {
                    let diag = format!("error={e}\n{}", ctx.cfg.echo());
                    let _ = ctx.out.write("diagnostics.txt", &diag);
                }
            }
            res
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(o) => {
            print!("{}", o.text);
            if o.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_usage(&e) { 2 } else { 1 })
        }
    }
}
