//! Experiment harness: problem generation, trial execution and CSV output.
//!
//! A trial builds one problem from a seed derived from (seed, experiment,
//! parameter, trial) and runs it once per mode, so all modes of a trial see
//! identical background knowledge and examples.

pub mod droplasts;
pub mod problems;

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::{entails, learn_exhaustive, learn_in, LearnOutcome, LearnResult};
use crate::error::{Error, Result};
use crate::kb::{Mode, Problem, Theory, DEFAULT_SOLVER};
use crate::term::Clause;

pub use droplasts::gen_droplasts_examples;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub experiment: u8,
    pub trials: usize,
    pub seed: u64,
    /// Parameter values; `None` uses the experiment's default range.
    pub params: Option<Vec<usize>>,
    pub modes: Option<Vec<Mode>>,
    /// Per-run step limit; runs that reach it count as incomplete.
    pub step_limit: Option<u64>,
    pub solver_cmd: String,
    pub smt_timeout_ms: u64,
    pub smt_theory: Theory,
    pub threads: usize,
}

impl BenchConfig {
    pub fn new(experiment: u8, trials: usize, seed: u64) -> BenchConfig {
        BenchConfig {
            experiment,
            trials,
            seed,
            params: None,
            modes: None,
            // Experiments 1 and 2 measure a full traversal, which must not be cut.
            step_limit: (experiment > 2).then_some(2_000_000),
            solver_cmd: DEFAULT_SOLVER.to_string(),
            smt_timeout_ms: 30,
            smt_theory: Theory::Seq,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    pub fn default_params(experiment: u8) -> Vec<usize> {
        match experiment {
            1 => (0..=20).collect(),
            2 => (1..=25).collect(),
            3 => vec![0, 2, 4, 6, 8],
            _ => vec![0, 1, 2, 3, 4],
        }
    }

    pub fn default_modes(experiment: u8) -> Vec<Mode> {
        match experiment {
            1..=3 => vec![Mode::Untyped, Mode::Typed],
            _ => vec![Mode::Untyped, Mode::Typed, Mode::Refined],
        }
    }
}

fn ser_mode<S: serde::Serializer>(m: &Mode, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(m.as_str())
}

/// One learn run. Serialized fields are the CSV columns.
#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub experiment: u8,
    pub trial: usize,
    #[serde(serialize_with = "ser_mode")]
    pub mode: Mode,
    pub param: String,
    pub steps: u64,
    pub time_ms: f64,
    pub success: bool,
    pub program: String,
    #[serde(skip)]
    pub outcome: Option<LearnOutcome>,
    #[serde(skip)]
    pub smt_ms: f64,
    /// Entailment check of a found program against the trial's examples.
    #[serde(skip)]
    pub sound: Option<bool>,
    /// The numeric parameter behind `param`.
    #[serde(skip)]
    pub param_value: usize,
}

impl TrialRecord {
    /// Ended without hitting the step limit.
    pub fn completed(&self) -> bool {
        matches!(self.outcome, Some(LearnOutcome::Found | LearnOutcome::NotFound))
    }
}

fn param_label(experiment: u8, p: usize) -> String {
    match experiment {
        2 => format!("{:.2}", p as f64 / 25.0),
        _ => p.to_string(),
    }
}

fn trial_seed(seed: u64, experiment: u8, param: usize, trial: usize) -> u64 {
    // splitmix-style mixing keeps neighbouring configurations uncorrelated.
    let mut z = seed
        ^ (experiment as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (param as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (trial as u64).wrapping_mul(0x94D0_49BB_1331_11EB);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The problem an experiment uses for one parameter value and trial.
pub fn build_problem(experiment: u8, param: usize, seed: u64, trial: usize) -> Result<Problem> {
    let s = trial_seed(seed, experiment, param, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(s);
    let examples = || problems::droplasts_examples(s);
    Ok(match experiment {
        1 => problems::exp1_problem(param),
        2 => problems::exp2_problem(param),
        3 => problems::exp3_problem(param, &examples(), &mut rng),
        4 => problems::exp4_problem(param, &examples(), &mut rng),
        5 => problems::exp5_problem(param, &examples(), &mut rng),
        other => return Err(Error::Config(format!("no experiment {other}; expected 1 to 5"))),
    })
}

/// Whether every positive is entailed and no negative is.
pub fn is_sound(problem: &Problem, program: &[Clause]) -> Result<bool> {
    for p in &problem.pos {
        if !entails(problem, program, p)? {
            return Ok(false);
        }
    }
    for n in &problem.neg {
        if entails(problem, program, n)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn run_one(cfg: &BenchConfig, problem: &Problem, mode: Mode) -> Result<LearnResult> {
    let mut p = problem.clone();
    p.options.mode = mode;
    p.options.step_limit = cfg.step_limit;
    p.options.solver_cmd = cfg.solver_cmd.clone();
    p.options.smt_timeout_ms = cfg.smt_timeout_ms;
    p.options.smt_theory = cfg.smt_theory;
    if matches!(cfg.experiment, 1 | 2) {
        // The example is unprovable; the whole space is traversed.
        learn_exhaustive(&p, mode, |_| {})
    } else {
        learn_in(&p, mode)
    }
}

fn run_trial(cfg: &BenchConfig, modes: &[Mode], param: usize, trial: usize) -> Result<Vec<TrialRecord>> {
    let problem = build_problem(cfg.experiment, param, cfg.seed, trial)?;
    let mut out = Vec::new();
    for &mode in modes {
        let r = run_one(cfg, &problem, mode)?;
        let sound = match &r.program {
            Some(prog) => Some(is_sound(&problem, &prog.plain_clauses())?),
            None => None,
        };
        out.push(TrialRecord {
            experiment: cfg.experiment,
            trial,
            mode,
            param: param_label(cfg.experiment, param),
            steps: r.steps,
            time_ms: r.elapsed.as_secs_f64() * 1000.0,
            success: r.outcome == LearnOutcome::Found,
            program: r.program_text().unwrap_or_default().replace('\n', " "),
            outcome: Some(r.outcome),
            smt_ms: r.smt.solver_ms,
            sound,
            param_value: param,
        });
    }
    Ok(out)
}

/// Run every (parameter, trial) pair, in parallel across trials. Records
/// come back ordered by parameter, trial and mode.
pub fn run_experiment(cfg: &BenchConfig) -> Result<Vec<TrialRecord>> {
    if !(1..=5).contains(&cfg.experiment) {
        return Err(Error::Config(format!(
            "no experiment {}; expected 1 to 5",
            cfg.experiment
        )));
    }
    let params = cfg
        .params
        .clone()
        .unwrap_or_else(|| BenchConfig::default_params(cfg.experiment));
    let modes = cfg
        .modes
        .clone()
        .unwrap_or_else(|| BenchConfig::default_modes(cfg.experiment));
    let jobs: Vec<(usize, usize)> = params
        .iter()
        .flat_map(|&p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let results: Mutex<Vec<Option<Result<Vec<TrialRecord>>>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = cfg.threads.clamp(1, jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(p, t)) = jobs.get(i) else { break };
                let r = run_trial(cfg, &modes, p, t);
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    let mut out = Vec::new();
    for r in results.into_inner().unwrap_or_else(|e| e.into_inner()) {
        out.extend(r.expect("every job ran")?);
    }
    Ok(out)
}

pub fn write_csv<W: Write>(records: &[TrialRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r)
            .map_err(|e| Error::Config(format!("writing CSV: {e}")))?;
    }
    wr.flush().map_err(|e| Error::Config(format!("writing CSV: {e}")))?;
    Ok(())
}

/// Mean and sample standard deviation of a series.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Parameter label, mode, and (mean, sd) of steps and of time.
pub type Summary = (String, Mode, (f64, f64), (f64, f64));

/// Per (parameter, mode) mean and standard deviation of steps and time.
pub fn summarize(records: &[TrialRecord]) -> Vec<Summary> {
    let mut keys: Vec<(usize, String, Mode)> = Vec::new();
    for r in records {
        let k = (r.param_value, r.param.clone(), r.mode);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(pv, label, mode)| {
            let sel: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.param_value == pv && r.mode == mode)
                .collect();
            let steps: Vec<f64> = sel.iter().map(|r| r.steps as f64).collect();
            let times: Vec<f64> = sel.iter().map(|r| r.time_ms).collect();
            (label, mode, mean_sd(&steps), mean_sd(&times))
        })
        .collect()
}

/// Trials of experiments 3 to 5 that completed in every mode but violate
/// refined <= typed <= untyped on steps.
pub fn dominance_violations(records: &[TrialRecord]) -> Vec<String> {
    let mut out = Vec::new();
    let mut keys: Vec<(u8, usize, usize)> = records.iter().map(|r| (r.experiment, r.param_value, r.trial)).collect();
    keys.dedup();
    for (e, p, t) in keys {
        let run: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.experiment == e && r.param_value == p && r.trial == t)
            .collect();
        if run.iter().any(|r| !r.completed()) {
            continue;
        }
        let steps = |m: Mode| run.iter().find(|r| r.mode == m).map(|r| r.steps);
        let chain = [steps(Mode::Refined), steps(Mode::Typed), steps(Mode::Untyped)];
        let present: Vec<u64> = chain.iter().flatten().copied().collect();
        if present.windows(2).any(|w| w[0] > w[1]) {
            out.push(format!("experiment {e} param {p} trial {t}: steps {chain:?}"));
        }
    }
    out
}
