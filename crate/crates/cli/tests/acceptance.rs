//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.
//!
//! All criteria use master seed 7 and 200 CRN paths unless stated.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rebasesim::histdata::{load_history_file, replay, synthetic};
use rebasesim::montecarlo::simulate_cap_paths;
use rebasesim::sweep::{
    default_a_values, frontier_from_surface, monotonicity_in_a, robustness_battery, sweep_grid, GridSpec,
    MarketVariant, RobustnessBase,
};
use rebasesim::{estimate_loss, path_loss, run_path, LossWeights, MarketParams, PolicyParams};

const SEED: u64 = 7;
const CRN_PATHS: usize = 200;
const SPEARMAN_MIN: f64 = 0.8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn lam(x: f64) -> LossWeights {
    LossWeights::new(x).unwrap()
}

fn baseline_market() -> MarketParams {
    MarketParams::new(0.0, 0.05, 100e6, 100).unwrap()
}

fn hand_trace() -> Outcome {
    const TOL: f64 = 1e-9;
    let path = run_path(&[100.0, 110.0, 110.0], &PolicyParams::new(0.05, 5.0, 1.0).unwrap()).unwrap();
    let loss = path_loss(&path, lam(1.0));
    // exact: dP = [0.1, 8/102], dS = [0, 0.02]
    let dp2 = 8.0 / 102.0;
    let total = 0.01 + dp2 * dp2 + 0.0004;
    let checks = [
        rel(path.supply[0], 100.0),
        rel(path.supply[1], 100.0),
        rel(path.supply[2], 102.0),
        rel(path.d_price[0], 0.10),
        rel(path.d_price[1], dp2),
        path.d_supply[0].abs(),
        rel(path.d_supply[1], 0.02),
        rel(loss.total, total),
    ];
    let worst = checks.iter().cloned().fold(0.0, f64::max);
    let rounded = format!("{:.7}", loss.total);
    outcome(
        worst <= TOL && rounded == "0.0165515",
        format!(
            "total = {} (≈ {rounded}), worst relative error {worst:.1e} (tol {TOL:.0e})",
            loss.total
        ),
    )
}

fn zero_loss() -> Outcome {
    let flat = MarketParams::new(0.0, 0.0, 100e6, 100).unwrap();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for a in [0.0, 0.05, 0.1] {
        for b in [0.5, 1.0, 5.0, 10.0] {
            for l in [0.0, 1.0, 10.0] {
                let r = estimate_loss(&flat, &PolicyParams::new(a, b, 1.0).unwrap(), lam(l), 10, SEED).unwrap();
                worst = worst.max(r.mean_total.abs()).max(r.std_error);
                cases += 1;
            }
        }
    }
    outcome(worst == 0.0, format!("{cases} policy/λ cases, max |loss| = {worst}"))
}

fn gbm_moments() -> Outcome {
    const N: usize = 10_000;
    let (sigma, n) = (0.05, 100usize);
    let m = MarketParams::new(0.0, sigma, 100e6, n).unwrap();
    let logs: Vec<f64> = simulate_cap_paths(&m, N, SEED)
        .iter()
        .map(|p| (p[n] / p[0]).ln())
        .collect();
    let nf = N as f64;
    let mean = logs.iter().sum::<f64>() / nf;
    let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let target_mean = -(n as f64) * sigma * sigma / 2.0;
    let target_var = n as f64 * sigma * sigma;
    let se = (target_var / nf).sqrt();
    let mean_ok = (mean - target_mean).abs() <= 4.0 * se;
    let var_ok = (var - target_var).abs() <= 0.10 * target_var;
    outcome(
        mean_ok && var_ok,
        format!(
            "mean {mean:.5} vs {target_mean} (±{:.4}), variance {var:.5} vs {target_var} (±10%)",
            4.0 * se
        ),
    )
}

fn a_axis_spearman(m: &MarketParams) -> Option<f64> {
    let grid = GridSpec::new(default_a_values(), vec![5.0], 1.0).unwrap();
    let surface = sweep_grid(m, &grid, lam(1.0), CRN_PATHS, SEED).unwrap();
    monotonicity_in_a(&surface, 5.0)
}

fn wider_band_more_loss() -> Outcome {
    let rho = a_axis_spearman(&baseline_market());
    outcome(
        rho.is_some_and(|r| r > SPEARMAN_MIN),
        format!("Spearman(A, loss) = {rho:?} at B=5 (need > {SPEARMAN_MIN})"),
    )
}

fn b_star_pair(m: &MarketParams) -> (f64, f64) {
    let surface = sweep_grid(m, &GridSpec::default_grid(1.0).unwrap(), lam(1.0), CRN_PATHS, SEED).unwrap();
    let f = frontier_from_surface(&surface, &[0.5, 10.0]).unwrap();
    (f[0].b_star, f[1].b_star)
}

fn optimal_b_rises_with_lambda() -> Outcome {
    let (low, high) = b_star_pair(&baseline_market());
    outcome(high >= low, format!("B*(λ=0.5) = {low}, B*(λ=10) = {high}"))
}

fn robustness() -> Outcome {
    let base = RobustnessBase {
        market: baseline_market(),
        grid: GridSpec::default_grid(1.0).unwrap(),
        lambda: 1.0,
        fixed_b: 5.0,
        lambdas: vec![0.5, 10.0],
        n_paths: CRN_PATHS,
        master_seed: SEED,
    };
    let outcomes = robustness_battery(&base, &MarketVariant::standard_presets()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for o in &outcomes {
        let mono = o.monotonicity.is_some_and(|r| r > SPEARMAN_MIN);
        let frontier = o.frontier[1].b_star >= o.frontier[0].b_star;
        pass &= mono && frontier;
        parts.push(format!(
            "{} (mu={}, sigma={}): Spearman {:.3} [{}], B* {} -> {} [{}]",
            o.variant.name,
            o.market.mu(),
            o.market.sigma(),
            o.monotonicity.unwrap_or(f64::NAN),
            if mono { "ok" } else { "FAIL" },
            o.frontier[0].b_star,
            o.frontier[1].b_star,
            if frontier { "ok" } else { "FAIL" },
        ));
    }
    outcome(pass, parts.join("; "))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rebasesim")
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/synthetic_ampl.csv")
}

fn run_cli(args: &[&str], workers: &str, out: &Path) -> Result<(), String> {
    let status = Command::new(bin())
        .args(args)
        .args(["--workers", workers, "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)))
    }
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = fixture();
    let fixture = fixture.to_str().unwrap();
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("simulate", vec!["simulate", "--seed", "7"]),
        (
            "sweep",
            vec!["sweep", "--seed", "7", "--n-paths", "50", "--lambdas", "0.5,10"],
        ),
        ("frontier", vec!["frontier", "--seed", "7", "--n-paths", "50"]),
        ("robustness", vec!["robustness", "--seed", "7", "--n-paths", "50"]),
        ("replay", vec!["replay", "--history", fixture, "--b", "10"]),
    ];
    let mut failures = Vec::new();
    let mut n_files = 0;
    for (name, args) in &commands {
        let runs: Result<Vec<_>, String> = [("1", "a"), ("1", "b"), ("4", "c")]
            .iter()
            .map(|(workers, tag)| {
                let out = tmp.path().join(format!("{name}_{tag}"));
                run_cli(args, workers, &out).map(|_| dir_contents(&out))
            })
            .collect();
        match runs {
            Ok(r) => {
                n_files += r[0].len();
                if r[0].is_empty() || r[0] != r[1] || r[0] != r[2] {
                    failures.push(format!("{name}: outputs differ"));
                }
            }
            Err(e) => failures.push(e),
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{} commands, {n_files} files identical across repeat and --workers 1 vs 4",
                commands.len()
            )
        } else {
            failures.join("; ")
        },
    )
}

fn replay_fixed_point() -> Outcome {
    const TOL: f64 = 1e-9;
    let records = load_history_file(fixture()).unwrap();
    let report = replay(&records, 1.0, lam(1.0), Some(&synthetic::schedule())).unwrap();
    let cf = report.counterfactual.as_ref().unwrap();
    let pairs = report
        .historical
        .d_price
        .iter()
        .zip(&cf.d_price)
        .chain(report.historical.d_supply.iter().zip(&cf.d_supply));
    // zero entries (in-band dS) must match exactly; others relatively
    let worst = pairs
        .map(|(h, c)| if *h == 0.0 { c.abs() } else { rel(*c, *h) })
        .fold(0.0, f64::max);
    let hist = report.historical.loss;
    let regime = hist.price_component > hist.supply_component;
    outcome(
        worst <= TOL && regime,
        format!(
            "max deviation {worst:.1e} (tol {TOL:.0e}); price component {:.4} > supply component {:.6}",
            hist.price_component, hist.supply_component
        ),
    )
}

fn lambda_affinity() -> Outcome {
    const TOL: f64 = 1e-12;
    let m = baseline_market();
    let surface = sweep_grid(&m, &GridSpec::default_grid(1.0).unwrap(), lam(1.0), CRN_PATHS, SEED).unwrap();
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for l in [0.0, 1.0, 10.0] {
        let reweighted = surface.reweight(lam(l));
        for cell in &reweighted.cells {
            let stored = cell.outcome.as_ref().unwrap();
            let fresh = estimate_loss(
                &m,
                &PolicyParams::new(cell.a, cell.b, 1.0).unwrap(),
                lam(l),
                CRN_PATHS,
                SEED,
            )
            .unwrap();
            let from_components = stored.mean_price_component + l * stored.mean_supply_component;
            worst = worst
                .max(rel(stored.mean_total, fresh.mean_total))
                .max(rel(from_components, fresh.mean_total));
            checks += 1;
        }
    }
    outcome(
        worst <= TOL,
        format!("{checks} cell/λ checks, worst relative error {worst:.1e} (tol {TOL:.0e})"),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 hand-trace oracle", hand_trace),
        ("2 zero-loss degeneracy", zero_loss),
        ("3 GBM moments", gbm_moments),
        ("4 wider band, greater loss", wider_band_more_loss),
        ("5 optimal B rises with λ", optimal_b_rises_with_lambda),
        ("6 robustness (mu=±0.01, sigma=0.5)", robustness),
        ("7 CLI determinism", cli_determinism),
        ("8 replay fixed point", replay_fixed_point),
        ("9 λ-affinity exactness", lambda_affinity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} ({:.2?}) - {}",
            if o.pass { "PASS" } else { "FAIL" },
            started.elapsed(),
            o.detail
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
