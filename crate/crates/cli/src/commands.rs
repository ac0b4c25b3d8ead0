use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use rebasesim::histdata::{
    load_history_file, parse_timestamp, replay as replay_history, PolicySchedule, ScheduleEntry,
};
use rebasesim::simulate::write_path_csv;
use rebasesim::sweep::{
    frontier_from_surface, optimal_policy, robustness_battery, sweep_grid, write_frontier_csv, LossSurface,
    MarketVariant, RobustnessBase,
};
use rebasesim::{generate_cap_path, path_loss, run_path, LossWeights, PathSeed, PolicyParams};

use crate::config::{RunArgs, Settings};
use crate::{CliError, ReplayArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out).and_then(|_| out.flush()).map_err(|e| io_err(&path, e))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), CliError> {
    write_file(dir, name, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)
    })
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn resolve_seed(settings: &Settings, strict: bool) -> Result<u64, CliError> {
    match settings.seed {
        Some(seed) => Ok(seed),
        None if strict => Err(CliError::Config("--seed is required in --strict mode".into())),
        None => {
            let seed = rand::random::<u64>();
            eprintln!("no --seed given; using seed {seed}");
            Ok(seed)
        }
    }
}

fn provenance(command: &str, fields: Value) -> Value {
    let mut p = json!({ "tool": "rebasesim", "version": VERSION, "command": command });
    if let (Value::Object(base), Value::Object(extra)) = (&mut p, fields) {
        base.extend(extra);
    }
    p
}

pub fn simulate(args: &RunArgs, strict: bool) -> Result<(), CliError> {
    let s = args.resolve()?;
    let market = s.market()?;
    let policy = s.policy()?;
    let weights = s.weights()?;
    let seed = resolve_seed(&s, strict)?;
    let path_index = s.path_index.unwrap_or(0);

    let caps = generate_cap_path(&market, PathSeed::new(seed, path_index));
    let path = run_path(&caps, &policy).map_err(|e| CliError::Runtime(e.to_string()))?;
    let loss = path_loss(&path, weights);

    prepare_out(&args.out)?;
    write_file(&args.out, "path.csv", |out| write_path_csv(&path, out))?;
    write_json(
        &args.out,
        "loss.json",
        &json!({
            "provenance": provenance("simulate", json!({
                "seed": seed,
                "path_index": path_index,
                "market": market,
                "policy": policy,
                "lambda": weights.lambda(),
            })),
            "loss": loss,
        }),
    )
}

fn run_sweep(s: &Settings, seed: u64, label: &str) -> Result<LossSurface, CliError> {
    let grid = s.grid()?;
    let n_paths = s.n_paths()?;
    eprintln!("{label}: {} cells x {n_paths} paths", grid.len());
    let started = Instant::now();
    let surface =
        sweep_grid(&s.market()?, &grid, s.weights()?, n_paths, seed).map_err(|e| CliError::Runtime(e.to_string()))?;
    eprintln!("{label}: done in {:.2?}", started.elapsed());
    Ok(surface)
}

fn sweep_provenance(command: &str, s: &Settings, seed: u64, extra: Value) -> Result<Value, CliError> {
    let grid = s.grid()?;
    let mut fields = json!({
        "seed": seed,
        "market": s.market()?,
        "lambda": s.weights()?.lambda(),
        "n_paths": s.n_paths()?,
        "p_star": s.target_price(),
        "a_values": grid.a_values(),
        "b_values": grid.b_values(),
    });
    if let (Value::Object(base), Value::Object(more)) = (&mut fields, extra) {
        base.extend(more);
    }
    Ok(provenance(command, fields))
}

fn optimum_json(surface: &LossSurface) -> Value {
    match optimal_policy(surface) {
        Ok(opt) => json!({ "A": opt.a, "B": opt.b, "estimate": opt.estimate }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn sweep(args: &RunArgs, with_robustness: bool, strict: bool) -> Result<(), CliError> {
    let s = args.resolve()?;
    let seed = resolve_seed(&s, strict)?;
    let surface = run_sweep(&s, seed, "sweep")?;

    prepare_out(&args.out)?;
    write_file(&args.out, "surface.csv", |out| surface.write_csv(out))?;

    let mut summary = json!({ "optimum": optimum_json(&surface) });
    if s.lambdas.is_some() {
        let lambdas = s.lambdas_or_default()?;
        let frontier = frontier_from_surface(&surface, &lambdas).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_file(&args.out, "frontier.csv", |out| write_frontier_csv(&frontier, out))?;
        summary["frontier"] = json!(frontier);
    }
    summary["provenance"] = sweep_provenance("sweep", &s, seed, json!({ "lambdas": s.lambdas }))?;
    write_json(&args.out, "run.json", &summary)?;

    if with_robustness {
        run_robustness(&s, seed, &args.out)?;
    }
    Ok(())
}

pub fn frontier(args: &RunArgs, strict: bool) -> Result<(), CliError> {
    let s = args.resolve()?;
    let seed = resolve_seed(&s, strict)?;
    let lambdas = s.lambdas_or_default()?;
    let surface = run_sweep(&s, seed, "frontier")?;
    let frontier = frontier_from_surface(&surface, &lambdas).map_err(|e| CliError::Runtime(e.to_string()))?;

    prepare_out(&args.out)?;
    write_file(&args.out, "surface.csv", |out| surface.write_csv(out))?;
    write_file(&args.out, "frontier.csv", |out| write_frontier_csv(&frontier, out))?;
    write_json(
        &args.out,
        "run.json",
        &json!({
            "provenance": sweep_provenance("frontier", &s, seed, json!({ "lambdas": lambdas }))?,
            "frontier": frontier,
        }),
    )
}

fn run_robustness(s: &Settings, seed: u64, out: &Path) -> Result<(), CliError> {
    let base = RobustnessBase {
        market: s.market()?,
        grid: s.grid()?,
        lambda: s.weights()?.lambda(),
        fixed_b: s.fixed_b(),
        lambdas: s.lambdas_or_default()?,
        n_paths: s.n_paths()?,
        master_seed: seed,
    };
    let variants = MarketVariant::standard_presets();
    eprintln!(
        "robustness: {} variants x {} cells x {} paths",
        variants.len(),
        base.grid.len(),
        base.n_paths
    );
    let started = Instant::now();
    let outcomes = robustness_battery(&base, &variants).map_err(|e| CliError::Runtime(e.to_string()))?;
    eprintln!("robustness: done in {:.2?}", started.elapsed());

    prepare_out(out)?;
    for o in &outcomes {
        let name = &o.variant.name;
        write_file(out, &format!("surface_{name}.csv"), |w| o.surface.write_csv(w))?;
        write_file(out, &format!("frontier_{name}.csv"), |w| {
            write_frontier_csv(&o.frontier, w)
        })?;
    }
    write_json(
        out,
        "robustness.json",
        &json!({
            "provenance": sweep_provenance("robustness", s, seed, json!({
                "lambdas": base.lambdas,
                "fixed_b": base.fixed_b,
            }))?,
            "variants": outcomes,
        }),
    )
}

pub fn robustness(args: &RunArgs, strict: bool) -> Result<(), CliError> {
    let s = args.resolve()?;
    let seed = resolve_seed(&s, strict)?;
    run_robustness(&s, seed, &args.out)
}

fn parse_switch(raw: &str) -> Result<(chrono::DateTime<chrono::Utc>, f64), CliError> {
    let bad = || CliError::Config(format!("--b-switch {raw:?}: expected DATE=B"));
    let (date, b) = raw.split_once('=').ok_or_else(bad)?;
    let when = parse_timestamp(date.trim()).ok_or_else(bad)?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    Ok((when, b))
}

fn schedule(args: &ReplayArgs) -> Result<Option<PolicySchedule>, CliError> {
    if args.b.is_none() && args.b_switch.is_empty() {
        return Ok(None);
    }
    let a = args.a.unwrap_or(0.05);
    let mut entries = Vec::new();
    if let Some(b) = args.b {
        entries.push(ScheduleEntry {
            effective_from: chrono::DateTime::<chrono::Utc>::MIN_UTC,
            policy: PolicyParams::new(a, b, args.p_star)?,
        });
    }
    for raw in &args.b_switch {
        let (when, b) = parse_switch(raw)?;
        entries.push(ScheduleEntry {
            effective_from: when,
            policy: PolicyParams::new(a, b, args.p_star)?,
        });
    }
    PolicySchedule::new(entries)
        .map(Some)
        .map_err(|e| CliError::Config(format!("--b-switch: {e}")))
}

pub fn replay(args: &ReplayArgs) -> Result<(), CliError> {
    let weights = LossWeights::new(args.lambda)?;
    if !(args.p_star > 0.0 && args.p_star.is_finite()) {
        return Err(CliError::Config(format!(
            "invalid parameter P_star: must be > 0 (got {})",
            args.p_star
        )));
    }
    let schedule = schedule(args)?;
    let records =
        load_history_file(&args.history).map_err(|e| CliError::Config(format!("{}: {e}", args.history.display())))?;
    let report = replay_history(&records, args.p_star, weights, schedule.as_ref()).map_err(|e| match e {
        rebasesim::HistError::TooFewRecords(_) => CliError::Config(format!("{}: {e}", args.history.display())),
        other => CliError::Runtime(other.to_string()),
    })?;

    prepare_out(&args.out)?;
    write_file(&args.out, "series.csv", |out| report.write_series_csv(out))?;
    write_json(
        &args.out,
        "report.json",
        &json!({
            "provenance": provenance("replay", json!({
                "history": args.history.file_name().map(|n| n.to_string_lossy()),
                "records": records.len(),
                "p_star": args.p_star,
                "lambda": args.lambda,
            })),
            "report": report,
        }),
    )
}
