use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use milsynth::bench::{self, BenchConfig};
use milsynth::kb::{print_problem, stdlib_problem, Theory};
use milsynth::{learn, parse_problem, LearnOutcome, Mode};

#[derive(Parser)]
#[command(name = "milsynth", version, about = "Typed meta-interpretive program synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a program from a problem file.
    Learn {
        file: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        max_clauses: Option<usize>,
        /// Solver command line, e.g. "z3 -in".
        #[arg(long)]
        solver: Option<String>,
        #[arg(long)]
        smt_timeout_ms: Option<u64>,
        #[arg(long)]
        smt_theory: Option<Theory>,
        /// Stop after this many steps.
        #[arg(long)]
        step_limit: Option<u64>,
        /// Add the bundled library (map, reduceback, filter and metarules).
        #[arg(long)]
        stdlib: bool,
        /// Print the number of derivation steps.
        #[arg(long)]
        count_steps: bool,
        #[arg(long)]
        json: bool,
    },
    /// Run one of the benchmark experiments and write a CSV.
    Bench {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        experiment: u8,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated parameter values instead of the default range.
        #[arg(long, value_delimiter = ',')]
        params: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<Mode>>,
        #[arg(long)]
        step_limit: Option<u64>,
        #[arg(long)]
        solver: Option<String>,
        #[arg(long)]
        smt_timeout_ms: Option<u64>,
        #[arg(long)]
        smt_theory: Option<Theory>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the problem file one benchmark trial uses.
    Problem {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        experiment: u8,
        #[arg(long, default_value_t = 0)]
        param: usize,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Learn {
            file,
            mode,
            max_clauses,
            solver,
            smt_timeout_ms,
            smt_theory,
            step_limit,
            stdlib,
            count_steps,
            json,
        } => {
            let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let mut p = parse_problem(&text).with_context(|| format!("parsing {}", file.display()))?;
            if stdlib {
                p.extend(stdlib_problem());
            }
            let o = &mut p.options;
            if let Some(m) = mode {
                o.mode = m;
            }
            if let Some(n) = max_clauses {
                o.max_clauses = n;
            }
            if let Some(s) = solver {
                o.solver_cmd = s;
            }
            if let Some(t) = smt_timeout_ms {
                o.smt_timeout_ms = t;
            }
            if let Some(t) = smt_theory {
                o.smt_theory = t;
            }
            if step_limit.is_some() {
                o.step_limit = step_limit;
            }
            let r = learn(&p)?;
            if json {
                let mut v = serde_json::to_value(&r)?;
                v["mode"] = p.options.mode.as_str().into();
                v["program"] = r.program_text().into();
                v["program_type"] = r.program.as_ref().and_then(|pr| pr.type_text()).into();
                println!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                match &r.program {
                    Some(prog) => println!("{}", prog.text()),
                    None => println!("% no program found ({:?})", r.outcome),
                }
                if count_steps {
                    println!("% steps: {}", r.steps);
                }
            }
            Ok(if r.outcome == LearnOutcome::Found {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Bench {
            experiment,
            trials,
            seed,
            out,
            params,
            modes,
            step_limit,
            solver,
            smt_timeout_ms,
            smt_theory,
            threads,
        } => {
            if trials == 0 {
                bail!("--trials must be at least 1");
            }
            let mut cfg = BenchConfig::new(experiment, trials, seed);
            cfg.params = params;
            cfg.modes = modes;
            if step_limit.is_some() {
                cfg.step_limit = step_limit;
            }
            if let Some(s) = solver {
                cfg.solver_cmd = s;
            }
            if let Some(t) = smt_timeout_ms {
                cfg.smt_timeout_ms = t;
            }
            if let Some(t) = smt_theory {
                cfg.smt_theory = t;
            }
            if let Some(n) = threads {
                cfg.threads = n;
            }
            let records = bench::run_experiment(&cfg)?;
            let f = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            bench::write_csv(&records, f)?;
            for (param, mode, (s, sd), (t, td)) in bench::summarize(&records) {
                eprintln!("param {param:>5} {mode:>8}: steps {s:>12.1} ± {sd:<10.1} time_ms {t:>10.1} ± {td:.1}");
            }
            for v in bench::dominance_violations(&records) {
                eprintln!("dominance violation: {v}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Problem {
            experiment,
            param,
            trial,
            seed,
        } => {
            let p = bench::build_problem(experiment, param, seed, trial)?;
            print!("{}", print_problem(&p));
            Ok(ExitCode::SUCCESS)
        }
    }
}
