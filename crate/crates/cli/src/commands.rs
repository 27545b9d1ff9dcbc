//! Subcommand implementations. Each one resolves its effective config
//! (flags over file section over defaults), hashes it, and emits rows
//! that carry the hash.

use std::io::Write;

use serde::Serialize;

use ballfall::dynamics::{simulate as run_simulate, SimOptions, Stepper, StopRule};
use ballfall::mass::MassVector;
use ballfall::oracle::{
    bisect_collision_time, enumerate_sequences, finite_difference_cocycle, ghost_trajectory,
    OracleConfig,
};
use ballfall::sequence::SymbolicSequence;
use ballfall::spectrum::{lyapunov_spectrum, strict_invariance_check, sufficiency_onset};
use ballfall::state::{sample_state_seeded, SamplingConfig};
use ballfall::sufficiency::{classify_sequence, neutral_space, Dichotomy, RationalMasses};
use ballfall::tangent::push_frame;
use ballfall::{SimError, SpectrumError, SufficiencyError};

use crate::config::{
    config_hash, explicit_state, open_output, parse_grid, parse_masses, parse_seed_list,
    sim_options,
};
use crate::{
    CliError, ConeCheckArgs, LyapunovArgs, ScanArgs, SimulateArgs, SufficiencyArgs, VerifyArgs,
};
use crate::config::{
    ConeCheckSection, LyapunovSection, ScanSection, SimulateSection, SufficiencySection,
    VerifySection,
};

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Singularity { .. }
        | SimError::GrazingSingularity { .. }
        | SimError::AccumulationSuspected { .. } => CliError::Singularity(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn spectrum_error(e: SpectrumError) -> CliError {
    match e {
        SpectrumError::Sim(e) => sim_error(e),
        other => CliError::Config(other.to_string()),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize)]
struct EffectiveSimulate {
    masses: String,
    seed: u64,
    q: Option<String>,
    v: Option<String>,
    events: Option<u64>,
    time: Option<f64>,
    energy_renorm_every: u64,
    tol_sing: f64,
    tol_graze: f64,
    tol_ord: f64,
    tol_energy: f64,
}

pub fn simulate(args: SimulateArgs, file: SimulateSection) -> Result<(), CliError> {
    let eff = EffectiveSimulate {
        masses: pick(args.masses, file.masses)
            .ok_or_else(|| CliError::Config("simulate needs --masses".into()))?,
        seed: pick(args.seed, file.seed).unwrap_or(0),
        q: pick(args.q, file.q),
        v: pick(args.v, file.v),
        events: pick(args.events, file.events),
        time: pick(args.time, file.time),
        energy_renorm_every: pick(args.energy_renorm_every, file.energy_renorm_every).unwrap_or(0),
        tol_sing: pick(args.tol_sing, file.tol_sing).unwrap_or(1e-11),
        tol_graze: pick(args.tol_graze, file.tol_graze).unwrap_or(1e-11),
        tol_ord: pick(args.tol_ord, file.tol_ord).unwrap_or(1e-9),
        tol_energy: pick(args.tol_energy, file.tol_energy).unwrap_or(1e-6),
    };
    if eff.events.is_none() && eff.time.is_none() {
        return Err(CliError::Config(
            "simulate needs a stop rule: --events or --time".into(),
        ));
    }
    let hash = config_hash(&eff);
    let (_, masses) = parse_masses(&eff.masses)?;
    let opts = sim_options(
        eff.tol_sing,
        eff.tol_graze,
        eff.tol_ord,
        eff.tol_energy,
        eff.energy_renorm_every,
    );
    let x0 = match (&eff.q, &eff.v) {
        (Some(q), Some(v)) => explicit_state(q, v, &masses, &opts)?,
        (None, None) => sample_state_seeded(&masses, eff.seed, &SamplingConfig::default()),
        _ => {
            return Err(CliError::Config(
                "explicit state needs both --q and --v".into(),
            ))
        }
    };

    let out = pick(args.out, file.out);
    let mut w = open_output(out.as_deref())?;
    writeln!(w, "# ballfall event-log v1")?;
    writeln!(w, "# config {hash}")?;
    writeln!(w, "# columns: k t i rho H config")?;

    let mut stepper = Stepper::new(x0, &masses, &opts);
    let mut k: u64 = 0;
    let mut renorms_seen = 0usize;
    loop {
        if let Some(max) = eff.events {
            if k >= max {
                break;
            }
        }
        if let Some(t_max) = eff.time {
            let (dt, _) = match stepper.peek() {
                Ok(x) => x,
                Err(e) => {
                    w.flush()?;
                    return Err(sim_error(e));
                }
            };
            if stepper.state().t + dt > t_max {
                break;
            }
        }
        let ev = match stepper.step() {
            Ok(ev) => ev,
            Err(e) => {
                w.flush()?;
                return Err(sim_error(e));
            }
        };
        k += 1;
        let h = stepper.state().energy(&masses);
        writeln!(
            w,
            "{} {} {} {} {} {hash}",
            k,
            ev.t,
            ev.label.paper_index(),
            ev.rho,
            h
        )?;
        for r in &stepper.renorms()[renorms_seen..] {
            writeln!(w, "# renorm {} {}", r.event_index, r.factor)?;
        }
        renorms_seen = stepper.renorms().len();
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- lyapunov

#[derive(Serialize)]
struct EffectiveLyapunov {
    masses: String,
    seeds: String,
    events: u64,
    renorm_every: u64,
    tol_sing: f64,
    tol_graze: f64,
    tol_ord: f64,
    tol_energy: f64,
}

pub fn lyapunov(args: LyapunovArgs, file: LyapunovSection) -> Result<(), CliError> {
    let eff = EffectiveLyapunov {
        masses: pick(args.masses, file.masses)
            .ok_or_else(|| CliError::Config("lyapunov needs --masses".into()))?,
        seeds: pick(args.seeds, file.seeds).unwrap_or_else(|| "0".into()),
        events: pick(args.events, file.events).unwrap_or(100_000),
        renorm_every: pick(args.renorm_every, file.renorm_every).unwrap_or(1),
        tol_sing: pick(args.tol_sing, file.tol_sing).unwrap_or(1e-11),
        tol_graze: pick(args.tol_graze, file.tol_graze).unwrap_or(1e-11),
        tol_ord: pick(args.tol_ord, file.tol_ord).unwrap_or(1e-9),
        tol_energy: pick(args.tol_energy, file.tol_energy).unwrap_or(1e-6),
    };
    let hash = config_hash(&eff);
    let (_, masses) = parse_masses(&eff.masses)?;
    let seeds = parse_seed_list(&eff.seeds)?;
    let opts = sim_options(eff.tol_sing, eff.tol_graze, eff.tol_ord, eff.tol_energy, 0);

    let out = pick(args.out, file.out);
    let mut w = open_output(out.as_deref())?;
    let n2 = 2 * masses.n();
    let lambda_cols: Vec<String> = (1..=n2).map(|j| format!("lambda_{j}")).collect();
    writeln!(
        w,
        "seed,n_collisions,total_time,{},pairing_residual,flags,config",
        lambda_cols.join(",")
    )?;
    for seed in seeds {
        let x0 = sample_state_seeded(&masses, seed, &SamplingConfig::default());
        let rep = match lyapunov_spectrum(&x0, &masses, eff.events, eff.renorm_every, &opts) {
            Ok(r) => r,
            Err(e) => {
                w.flush()?;
                return Err(spectrum_error(e));
            }
        };
        let lambdas: Vec<String> = rep.exponents.iter().map(|l| l.to_string()).collect();
        writeln!(
            w,
            "{seed},{},{},{},{},{}|{},{hash}",
            rep.collisions,
            rep.total_time,
            lambdas.join(","),
            rep.pairing_residual,
            rep.flagged[0] + 1,
            rep.flagged[1] + 1
        )?;
    }
    w.flush()?;
    Ok(())
}

// -------------------------------------------------------------- sufficiency

#[derive(Serialize)]
struct EffectiveSufficiency {
    seq: String,
    masses: Option<String>,
    n: usize,
    classify: bool,
    trials: usize,
    seed: u64,
}

pub fn sufficiency(args: SufficiencyArgs, file: SufficiencySection) -> Result<(), CliError> {
    let seq_text = pick(args.seq, file.seq)
        .ok_or_else(|| CliError::Config("sufficiency needs --seq".into()))?;
    let masses_text = pick(args.masses, file.masses);
    let classify = args.classify || file.classify.unwrap_or(false);
    let exact = masses_text
        .as_deref()
        .map(|t| {
            RationalMasses::parse(t).map_err(|e| CliError::Config(format!("bad masses: {e}")))
        })
        .transpose()?;
    let n = match (&exact, pick(args.n, file.n)) {
        (Some(m), _) => m.n(),
        (None, Some(n)) => n,
        (None, None) => {
            return Err(CliError::Config(
                "sufficiency needs --masses or --n".into(),
            ))
        }
    };
    let eff = EffectiveSufficiency {
        seq: seq_text.clone(),
        masses: masses_text,
        n,
        classify,
        trials: pick(args.trials, file.trials).unwrap_or(16),
        seed: pick(args.seed, file.seed).unwrap_or(0),
    };
    let hash = config_hash(&eff);
    let seq = SymbolicSequence::parse(&seq_text, n)
        .map_err(|e| CliError::Config(format!("bad sequence: {e}")))?;

    let out = pick(args.out, file.out);
    let mut w = open_output(out.as_deref())?;

    if classify {
        match classify_sequence(&seq, eff.trials, eff.seed) {
            Ok(Dichotomy::D1 { witness }) => {
                writeln!(w, "seq={seq} class=D1 witness={witness} config={hash}")?
            }
            Ok(Dichotomy::D2Certified { .. }) => writeln!(
                w,
                "seq={seq} class=D2 certified=no-floor-collision config={hash}"
            )?,
            Ok(Dichotomy::D2Presumed { trials }) => {
                writeln!(w, "seq={seq} class=D2-presumed trials={trials} config={hash}")?
            }
            Err(SufficiencyError::PreconditionViolated(_)) => writeln!(
                w,
                "seq={seq} class=D2 certified=disconnected-ball-graph config={hash}"
            )?,
            Err(e) => return Err(CliError::Config(e.to_string())),
        }
        w.flush()?;
        return Ok(());
    }

    let exact =
        exact.ok_or_else(|| CliError::Config("verdict mode needs --masses".into()))?;
    match neutral_space(&seq, &exact) {
        Ok(report) => {
            let basis: Vec<String> = report
                .basis
                .iter()
                .map(|b| {
                    let parts: Vec<String> = b
                        .iter()
                        .map(|x| format!("{}/{}", x.numer(), x.denom()))
                        .collect();
                    parts.join("|")
                })
                .collect();
            writeln!(
                w,
                "seq={seq} masses={exact} dimension={} sufficient={} basis={} config={hash}",
                report.dimension,
                report.sufficient,
                if basis.is_empty() {
                    "-".to_string()
                } else {
                    basis.join(";")
                }
            )?;
        }
        Err(SufficiencyError::PreconditionViolated(_)) => {
            writeln!(
                w,
                "seq={seq} masses={exact} dimension=na sufficient=false \
                 certified=disconnected-ball-graph config={hash}"
            )?;
        }
        Err(e) => return Err(CliError::Config(e.to_string())),
    }
    w.flush()?;
    Ok(())
}

// --------------------------------------------------------------------- scan

#[derive(Serialize)]
struct EffectiveScan {
    masses: String,
    vary_top: String,
    seeds: String,
    onset_events: u64,
    collisions: u64,
    jobs: usize,
}

struct ScanRow {
    index: usize,
    line: String,
}

pub fn scan(args: ScanArgs, file: ScanSection) -> Result<(), CliError> {
    let eff = EffectiveScan {
        masses: pick(args.masses, file.masses)
            .ok_or_else(|| CliError::Config("scan needs --masses".into()))?,
        vary_top: pick(args.vary_top, file.vary_top)
            .ok_or_else(|| CliError::Config("scan needs --vary-top lo:hi:steps".into()))?,
        seeds: pick(args.seeds, file.seeds).unwrap_or_else(|| "0".into()),
        onset_events: pick(args.onset_events, file.onset_events).unwrap_or(500),
        collisions: pick(args.collisions, file.collisions).unwrap_or(100_000),
        jobs: pick(args.jobs, file.jobs).unwrap_or(1).max(1),
    };
    let hash = config_hash(&eff);
    let (_, base) = parse_masses(&eff.masses)?;
    let (lo, hi, steps) = parse_grid(&eff.vary_top)?;
    let seeds = parse_seed_list(&eff.seeds)?;
    let opts = SimOptions::default();

    // all (grid, seed) cells, index-ordered
    let mut cells = Vec::new();
    for g in 0..steps {
        let top = if steps == 1 {
            lo
        } else {
            lo + (hi - lo) * g as f64 / (steps - 1) as f64
        };
        let mut m = base.masses().to_vec();
        m[0] = top;
        for &seed in &seeds {
            cells.push((cells.len(), m.clone(), seed));
        }
    }

    let run_cell = |index: usize, m: &[f64], seed: u64| -> ScanRow {
        let masses_txt: Vec<String> = m.iter().map(|x| x.to_string()).collect();
        let line = match MassVector::new(m.to_vec()) {
            Err(e) => format!("status=invalid-masses error={e}"),
            Ok(masses) => {
                let x0 = sample_state_seeded(&masses, seed, &SamplingConfig::default());
                let onset = sufficiency_onset(&x0, &masses, eff.onset_events, &opts);
                let spec = lyapunov_spectrum(&x0, &masses, eff.collisions, 1, &opts);
                match (onset, spec) {
                    (Ok(o), Ok(s)) => format!(
                        "status=ok onset={} lambda_max={} pairing={}",
                        o.onset.map_or("na".into(), |k| k.to_string()),
                        s.exponents[0],
                        s.pairing_residual
                    ),
                    _ => "status=singular".to_string(),
                }
            }
        };
        ScanRow {
            index,
            line: format!("{} {} {line}", masses_txt.join(","), seed),
        }
    };

    // fixed-size worker pool over cell indices; rows are gathered and
    // emitted in index order regardless of completion order
    let mut rows: Vec<Option<ScanRow>> = Vec::new();
    rows.resize_with(cells.len(), || None);
    let chunk = cells.len().div_ceil(eff.jobs);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for worker_cells in cells.chunks(chunk.max(1)) {
            handles.push(scope.spawn(move || {
                worker_cells
                    .iter()
                    .map(|(i, m, s)| run_cell(*i, m, *s))
                    .collect::<Vec<_>>()
            }));
        }
        for h in handles {
            for row in h.join().expect("scan worker") {
                let slot = row.index;
                rows[slot] = Some(row);
            }
        }
    });

    let out = pick(args.out, file.out);
    let mut w = open_output(out.as_deref())?;
    writeln!(w, "# ballfall scan v1")?;
    writeln!(w, "# config {hash}")?;
    writeln!(w, "# columns: index masses seed <status fields> config")?;
    for row in rows.into_iter().flatten() {
        writeln!(w, "{} {} config={hash}", row.index, row.line)?;
    }
    w.flush()?;
    Ok(())
}

// --------------------------------------------------------------- cone-check

#[derive(Serialize)]
struct EffectiveConeCheck {
    masses: String,
    seed: u64,
    events: u64,
}

pub fn cone_check(args: ConeCheckArgs, file: ConeCheckSection) -> Result<(), CliError> {
    let eff = EffectiveConeCheck {
        masses: pick(args.masses, file.masses)
            .ok_or_else(|| CliError::Config("cone-check needs --masses".into()))?,
        seed: pick(args.seed, file.seed).unwrap_or(0),
        events: pick(args.events, file.events).unwrap_or(100),
    };
    let hash = config_hash(&eff);
    let (_, masses) = parse_masses(&eff.masses)?;
    let opts = SimOptions::default();
    let x0 = sample_state_seeded(&masses, eff.seed, &SamplingConfig::default());
    let rep = strict_invariance_check(&x0, &masses, eff.events, &opts).map_err(spectrum_error)?;

    let out = pick(args.out, file.out);
    let mut w = open_output(out.as_deref())?;
    writeln!(
        w,
        "strict={} neutral_dim_v={} neutral_dim_h={} events={} note={} config={hash}",
        rep.strict,
        rep.neutral_dim_v,
        rep.neutral_dim_h.map_or("na".into(), |d| d.to_string()),
        rep.events,
        rep.note.as_deref().unwrap_or("-").replace(' ', "-"),
    )?;
    w.flush()?;
    Ok(())
}

// ------------------------------------------------------------------- verify

#[derive(Serialize)]
struct EffectiveVerify {
    cases: usize,
    seed: u64,
    suites: String,
    tol_bisect: f64,
}

pub fn verify(args: VerifyArgs, file: VerifySection) -> Result<(), CliError> {
    let eff = EffectiveVerify {
        cases: pick(args.cases, file.cases).unwrap_or(200),
        seed: pick(args.seed, file.seed).unwrap_or(0),
        suites: pick(args.suites, file.suites)
            .unwrap_or_else(|| "event-times,cocycle,ghost,enumeration".into()),
        tol_bisect: pick(args.tol_bisect, file.tol_bisect).unwrap_or(1e-12),
    };
    let hash = config_hash(&eff);
    let out = pick(args.out, file.out);
    let mut w = open_output(out.as_deref())?;
    writeln!(w, "# ballfall verify v1")?;
    writeln!(w, "# config {hash}")?;

    let wanted: Vec<&str> = eff.suites.split(',').map(str::trim).collect();
    let mut all_ok = true;
    for suite in &wanted {
        let outcome = match *suite {
            "event-times" => verify_event_times(&eff),
            "cocycle" => verify_cocycle(&eff),
            "ghost" => verify_ghost(&eff),
            "enumeration" => verify_enumeration(&eff),
            other => Err(format!("unknown suite {other:?}")),
        };
        match outcome {
            Ok(detail) => writeln!(w, "suite {suite}: PASS ({detail}) config={hash}")?,
            Err(detail) => {
                all_ok = false;
                writeln!(w, "suite {suite}: FAIL ({detail}) config={hash}")?;
            }
        }
    }
    w.flush()?;
    if all_ok {
        Ok(())
    } else {
        Err(CliError::Verification("one or more suites failed".into()))
    }
}

fn verify_event_times(eff: &EffectiveVerify) -> Result<String, String> {
    let cfg = OracleConfig {
        bisection_tol: eff.tol_bisect,
        ..OracleConfig::default()
    };
    let opts = SimOptions::default();
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for seed in 0..eff.cases {
        let n = 2 + (seed % 3);
        let mut m: Vec<f64> = (0..n).map(|k| 3.0 - 0.4 * k as f64).collect();
        m.sort_by(|a, b| b.total_cmp(a));
        let masses = MassVector::new(m).expect("sorted positive masses");
        let x0 = sample_state_seeded(&masses, eff.seed + seed as u64, &SamplingConfig::default());
        let Ok((dt, label)) = ballfall::dynamics::next_event(&x0, &masses, &opts.tol) else {
            continue;
        };
        let (dt_o, label_o) =
            bisect_collision_time(&x0, &masses, &cfg).map_err(|e| e.to_string())?;
        if label != label_o {
            return Err(format!("label mismatch at seed {seed}"));
        }
        worst = worst.max((dt - dt_o).abs() / dt.max(1.0));
        checked += 1;
    }
    if worst <= 10.0 * eff.tol_bisect {
        Ok(format!("{checked} cases, worst {worst:.3e}"))
    } else {
        Err(format!(
            "worst deviation {worst:.3e} exceeds {:.3e}",
            10.0 * eff.tol_bisect
        ))
    }
}

fn verify_cocycle(eff: &EffectiveVerify) -> Result<String, String> {
    let opts = SimOptions::default();
    let masses = MassVector::new(vec![2.0, 1.0]).expect("masses");
    let mut worst: f64 = 0.0;
    let mut done = 0usize;
    let mut seed = 0u64;
    while done < (eff.cases / 10).max(5) {
        seed += 1;
        if seed > 10_000 {
            return Err("could not find enough admissible segments".into());
        }
        let x0 = sample_state_seeded(&masses, eff.seed + seed, &SamplingConfig::default());
        let Ok(run) = run_simulate(&x0, &masses, StopRule::collisions(10), &opts) else {
            continue;
        };
        let min_rho = run.events.iter().map(|e| e.rho).fold(f64::INFINITY, f64::min);
        let min_gap = run
            .events
            .windows(2)
            .map(|p| p[1].t - p[0].t)
            .fold(f64::INFINITY, f64::min);
        if min_rho < 0.1 || min_gap < 5e-3 {
            continue;
        }
        let u = ballfall::tangent::TangentVector::new_unchecked(vec![0.5, -0.5], vec![0.3, 0.1]);
        let exact = push_frame(std::slice::from_ref(&u), &run.events, &masses)
            .map_err(|e| e.to_string())?
            .remove(0);
        if exact.norm() > 60.0 {
            continue;
        }
        let Ok(fd) = finite_difference_cocycle(&x0, &masses, &run.events, &u, 1e-7, &opts) else {
            continue;
        };
        let mut diff = fd;
        diff.axpy(-1.0, &exact);
        worst = worst.max(diff.norm() / exact.norm());
        done += 1;
    }
    if worst <= 1e-5 {
        Ok(format!("{done} segments, worst {worst:.3e}"))
    } else {
        Err(format!("worst relative error {worst:.3e} exceeds 1e-5"))
    }
}

fn verify_ghost(eff: &EffectiveVerify) -> Result<String, String> {
    let opts = SimOptions::default();
    let masses = MassVector::new(vec![1.0, 1.0, 1.0]).expect("masses");
    let x0 = sample_state_seeded(&masses, eff.seed, &SamplingConfig::default());
    let events = (eff.cases as u64 * 10).max(1000);
    let run = run_simulate(&x0, &masses, StopRule::collisions(events), &opts)
        .map_err(|e| e.to_string())?;
    let ghost = ghost_trajectory(&x0, &masses, run.final_state.t - x0.t + 1.0)
        .map_err(|e| e.to_string())?;
    let mut max_dev: f64 = 0.0;
    let mut cur = x0;
    for ev in &run.events {
        let (dt, label) = ballfall::dynamics::next_event(&cur, &masses, &opts.tol)
            .map_err(|e| e.to_string())?;
        cur = ballfall::dynamics::advance(&cur, dt, &opts.tol).map_err(|e| e.to_string())?;
        for (a, b) in cur.q.iter().zip(ghost.sorted_positions_at(ev.t)) {
            max_dev = max_dev.max((a - b).abs());
        }
        let (next, _) = ballfall::dynamics::apply_collision(&cur, label, &masses, &opts.tol)
            .map_err(|e| e.to_string())?;
        cur = next;
    }
    if max_dev <= 1e-9 {
        Ok(format!("{} events, max deviation {max_dev:.3e}", events))
    } else {
        Err(format!("max deviation {max_dev:.3e} exceeds 1e-9"))
    }
}

fn verify_enumeration(eff: &EffectiveVerify) -> Result<String, String> {
    // two-ball golden table
    let table = enumerate_sequences(2, 2, 6, eff.seed).map_err(|e| e.to_string())?;
    for (seq, verdict) in &table {
        let text = seq.to_string();
        let expect_d1 = text.contains("0-1") && text.contains("1-2");
        if verdict.is_d1() != expect_d1 {
            return Err(format!("misclassified {text}"));
        }
    }
    // three-ball stability across two seeds
    let a = enumerate_sequences(3, 4, 6, eff.seed).map_err(|e| e.to_string())?;
    let b = enumerate_sequences(3, 4, 6, eff.seed + 1).map_err(|e| e.to_string())?;
    for ((s1, v1), (s2, v2)) in a.iter().zip(&b) {
        if s1 != s2 || v1.is_d1() != v2.is_d1() {
            return Err(format!("classification of {s1} unstable across seeds"));
        }
    }
    Ok(format!("{} + {} sequences", table.len(), a.len()))
}

