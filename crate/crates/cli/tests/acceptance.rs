//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! `cargo test -p rwre-cli --test acceptance`

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rwre::analytics::{mu_site, realize_with_margin, sigma2_site, summary, SummaryBudget, DEFAULT_TOL};
use rwre::env::{self, realize, EnvironmentModel};
use rwre::harness::{
    self, clt_hitting, clt_position, coupling_identity_check, lln_check, rel_diagnostics, strictly_decreasing,
    uniform_ergodicity_estimate, Centering, ExperimentConfig, LlnReport,
};
use rwre::oracle::{mc_moment_oracle, variance_hitting};
use rwre::rng;
use rwre::walk::SimulationBudget;
use rwre_cli::config::{self, ResolvedSeeds, Seeds};
use rwre_cli::output::read_manifest;
use rwre_cli::{run, Command, RunOptions};
use serde_json::Value;

type Check = Result<String, String>;

fn seeds() -> ResolvedSeeds {
    config::resolve_seeds(&Seeds::default(), None, None).unwrap()
}

fn configured(model: EnvironmentModel) -> ExperimentConfig {
    let s = seeds();
    let mut cfg = ExperimentConfig::new(model);
    cfg.env_seed = s.env;
    cfg.walk_seed = s.walk;
    cfg
}

fn constant() -> EnvironmentModel {
    EnvironmentModel::constant(0.75)
}

fn two_point() -> EnvironmentModel {
    EnvironmentModel::iid_discrete(&[(0.8, 0.5), (0.6, 0.5)])
}

fn zero_speed() -> EnvironmentModel {
    EnvironmentModel::iid_discrete(&[(0.9, 0.5), (0.15, 0.5)])
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn within(elapsed: Duration, limit_s: u64) -> Check {
    if elapsed <= Duration::from_secs(limit_s) {
        Ok(format!("{:.1}s", elapsed.as_secs_f64()))
    } else {
        Err(format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()))
    }
}

fn require(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c1_oracle_equivalence() -> Check {
    let clock = Instant::now();
    let (mut worst_mu, mut worst_s2) = (0.0f64, 0.0f64);
    for i in 0..10 {
        let seed = rng::derive(seeds().env, &[100, i]);
        let (window, profile) =
            realize_with_margin(&two_point(), -40, 200, seed, DEFAULT_TOL).map_err(|e| e.to_string())?;
        let var = variance_hitting(&window, -40, 200).map_err(|e| e.to_string())?;
        for k in 0..200 {
            worst_mu = worst_mu.max((profile.mu(k).unwrap() - var.expected.increment(k).unwrap()).abs());
            worst_s2 = worst_s2.max((profile.sigma2(k).unwrap() - var.increment(k).unwrap()).abs());
        }
    }
    let t = within(clock.elapsed(), 5)?;
    require(
        worst_mu <= 1e-8 && worst_s2 <= 1e-7,
        format!("max |dmu| = {worst_mu:.2e}, max |dsigma2| = {worst_s2:.2e} over 10 windows, {t}"),
    )
}

fn c2_constant_closed_forms() -> Check {
    let clock = Instant::now();
    let s = summary(&constant(), &SummaryBudget::default()).map_err(|e| e.to_string())?;
    let window = realize(&constant(), -2_000, 100, 0).map_err(|e| e.to_string())?;
    let mu0 = mu_site(&window, 0, DEFAULT_TOL).map_err(|e| e.to_string())?.value;
    let s20 = sigma2_site(&window, 0, DEFAULT_TOL).map_err(|e| e.to_string())?.value;
    let analytic = [
        (s.mu.value, 2.0),
        (s.sigma2.value, 6.0),
        (s.sigma_star_squared(), 0.75),
        (mu0, 2.0),
        (s20, 6.0),
    ];
    let analytic_err = analytic.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let budget = SimulationBudget::new(1 << 40, 1, 1_000, 1 << 40).map_err(|e| e.to_string())?;
    let mc = mc_moment_oracle(&window, 0, 1_000_000, seeds().walk, &budget).map_err(|e| e.to_string())?;
    let z_mean = (mc.mean - 2.0) / mc.mean_se;
    let z_var = (mc.variance - 6.0) / mc.variance_se;
    let t = within(clock.elapsed(), 60)?;
    require(
        analytic_err <= 1e-10 && z_mean.abs() <= 3.0 && z_var.abs() <= 3.0,
        format!(
            "analytic error {analytic_err:.1e}; MC mean {:.4} ({z_mean:+.2} se), var {:.4} ({z_var:+.2} se), {t}",
            mc.mean, mc.variance
        ),
    )
}

fn cli(command: Command, config: &Path, out: &Path, workers: Option<usize>) -> Result<Value, String> {
    let outcome = run(&RunOptions {
        command,
        config: config.to_path_buf(),
        out: out.to_path_buf(),
        seed: None,
        workers,
        centering: None,
    })
    .map_err(|e| e.to_string())?;
    if outcome.exit_code != 0 {
        return Err(format!("exit code {}: {:?}", outcome.exit_code, outcome.error));
    }
    let text = fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn c3_variance_audit(tmp: &Path) -> Check {
    let clock = Instant::now();
    let cfg = configs_dir().join("constant.json");
    let r = cli(Command::OracleCheck, &cfg, &tmp.join("c3a"), None)?;
    cli(Command::OracleCheck, &cfg, &tmp.join("c3b"), None)?;
    let same = fs::read(tmp.join("c3a/report.json")).ok() == fs::read(tmp.join("c3b/report.json")).ok();
    let v = &r["report"]["variance"];
    let printed = v["printed"].as_f64().unwrap_or(f64::NAN);
    let corrected = v["corrected"].as_f64().unwrap_or(f64::NAN);
    let empirical = v["site_mc"]["variance"].as_f64().unwrap_or(f64::NAN);
    let flagged = v["discrepancy"].as_bool() == Some(true);
    let t = within(clock.elapsed(), 60)?;
    require(
        (printed - 5.0).abs() < 1e-9 && (corrected - 6.0).abs() < 1e-9 && (empirical - 6.0).abs() <= 0.1 && flagged && same,
        format!(
            "printed {printed:.6}, corrected {corrected:.6}, empirical {empirical:.4}, flagged {flagged}, deterministic {same}, {t}"
        ),
    )
}

fn c4_hitting_clt() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for (model, n, limit) in [(constant(), 2000u64, 0.03), (two_point(), 5000, 0.05)] {
        let clock = Instant::now();
        let mut cfg = configured(model);
        cfg.n = n;
        cfg.replicas = 5000;
        cfg.ks_threshold = Some(limit);
        let r = clt_hitting(&cfg).map_err(|e| e.to_string())?;
        let t = within(clock.elapsed(), 120);
        ok &= r.ks_distance <= limit && t.is_ok();
        if n == 2000 {
            let exact =
                (r.center - 2.0 * n as f64).abs() < 1e-8 && (r.scale_factor - (6.0 * n as f64).sqrt()).abs() < 1e-8;
            ok &= exact;
            parts.push(format!(
                "constant n=2000 KS {:.4} <= {limit} (center 2n, scale sqrt(6n): {exact})",
                r.ks_distance
            ));
        } else {
            parts.push(format!("two-point n=5000 KS {:.4} <= {limit}", r.ks_distance));
        }
        parts.push(t.unwrap_or_else(|e| e));
    }
    require(ok, parts.join(", "))
}

fn position(
    model: EnvironmentModel,
    t: u64,
    centering: Centering,
    limit: f64,
) -> Result<harness::ExperimentReport, String> {
    let mut cfg = configured(model);
    cfg.t = t;
    cfg.replicas = 5000;
    cfg.centering = centering;
    cfg.ks_threshold = Some(limit);
    clt_position(&cfg).map_err(|e| e.to_string())
}

fn c5_position_clt() -> Check {
    let clock = Instant::now();
    let a = position(constant(), 4000, Centering::Explicit, 0.04)?;
    let b = position(constant(), 4000, Centering::Implicit, 0.04)?;
    let c = position(two_point(), 10_000, Centering::Explicit, 0.06)?;
    let t = within(clock.elapsed(), 300);
    require(
        a.ks_distance <= 0.04 && b.ks_distance <= 0.04 && c.ks_distance <= 0.06 && t.is_ok(),
        format!(
            "constant t=4000 KS explicit {:.4}, implicit {:.4} (<= 0.04); two-point t=1e4 explicit {:.4} (<= 0.06), {}",
            a.ks_distance,
            b.ks_distance,
            c.ks_distance,
            t.unwrap_or_else(|e| e)
        ),
    )
}

fn c6_uniformly_ergodic() -> Check {
    let golden = EnvironmentModel::golden_quasi_periodic();
    let r = position(golden.clone(), 10_000, Centering::Implicit, 0.06)?;
    let e = uniform_ergodicity_estimate(&golden, &[100, 1000, 10_000], 1000, seeds().env, DEFAULT_TOL)
        .map_err(|e| e.to_string())?;
    let dec = strictly_decreasing(&e.epsilon);
    require(
        r.ks_distance <= 0.06 && dec,
        format!(
            "golden t=1e4 implicit KS {:.4} (<= 0.06); eps_n at 1e2, 1e3, 1e4 = {:.2e}, {:.2e}, {:.2e} (decreasing {dec})",
            r.ks_distance, e.epsilon[0], e.epsilon[1], e.epsilon[2]
        ),
    )
}

fn lln(model: EnvironmentModel) -> Result<LlnReport, String> {
    let mut cfg = configured(model);
    cfg.lln_grid = vec![1000, 10_000, 100_000];
    lln_check(&cfg).map_err(|e| e.to_string())
}

fn c7_lln() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, model) in [("constant", constant()), ("two-point", two_point())] {
        let r = lln(model)?;
        let mu = r.mu.ok_or("missing mu")?;
        let tn = r.hitting.last().and_then(|p| p.ratio).ok_or("missing T(n)/n")?;
        let xt = r.position.last().and_then(|p| p.ratio).ok_or("missing X(t)/t")?;
        let (eh, ep) = ((tn - mu).abs() / mu, (xt - 1.0 / mu).abs() * mu);
        ok &= eh <= 0.02 && ep <= 0.02;
        parts.push(format!("{name}: T/n rel err {eh:.4}, X/t rel err {ep:.4}"));
    }
    let z = lln(zero_speed())?;
    let decay = z.speed_decay.unwrap_or(0.0);
    ok &= !z.positive_speed && decay >= 2.0;
    parts.push(format!("zero-speed X(t)/t decay 1e3 -> 1e5: {decay:.2}x"));
    require(ok, parts.join("; "))
}

fn c8_exact_identities() -> Check {
    let cfg = configured(constant());
    let r = coupling_identity_check(&cfg).map_err(|e| e.to_string())?;
    let mut sim_cfg = configured(two_point());
    sim_cfg.n = 2000;
    sim_cfg.t = 4001;
    sim_cfg.replicas = 2000;
    let sim = harness::simulate(&sim_cfg).map_err(|e| e.to_string())?;
    let bad_parity = sim
        .rows
        .iter()
        .filter(|row| (row.position + sim_cfg.t as i64) % 2 != 0 || row.hitting_time % 2 != sim_cfg.n % 2)
        .count();
    let zero = r.event_violations + r.bound_violations + r.parity_violations + r.odd_tau_violations;
    require(
        r.event_checks >= 100_000 && zero == 0 && bad_parity == 0,
        format!(
            "{} event checks, {} bound checks: violations event {}, bound {}, parity {}, odd tau {}; {} simulated samples with {} parity failures",
            r.event_checks,
            r.bound_checks,
            r.event_violations,
            r.bound_violations,
            r.parity_violations,
            r.odd_tau_violations,
            sim.rows.len(),
            bad_parity
        ),
    )
}

fn c9_diagnostics() -> Check {
    let cfg = configured(two_point());
    let r = rel_diagnostics(&cfg).map_err(|e| e.to_string())?;
    let rel1: Vec<f64> = r
        .medians
        .iter()
        .filter(|m| m.x == 1.0)
        .map(|m| m.median_abs_rel1)
        .collect();
    let lin: Vec<f64> = r.median_scales.iter().map(|m| m.median_h_star_linear).collect();
    let ok = rel1.len() == 3 && strictly_decreasing(&rel1) && strictly_decreasing(&lin) && r.h_star_sqrt_band <= 10.0;
    require(
        ok,
        format!(
            "{} seeds; median |rel1| at x=1: {:.4?}; H*/n: {:.4?}; H*/sqrt(n) band {:.2}",
            r.seeds.len(),
            rel1,
            lin,
            r.h_star_sqrt_band
        ),
    )
}

fn c10_convexity() -> Check {
    let grid: Vec<f64> = (0..=8).map(|i| i as f64 * 0.25).collect();
    let mut parts = Vec::new();
    let mut ok = true;
    let mut paths: Vec<_> = fs::read_dir(configs_dir())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for p in &paths {
        let run = config::load(p).map_err(|e| e.to_string())?;
        let d = env::ln_r_second_differences(&run.model, &grid).map_err(|e| e.to_string())?;
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        ok &= min >= -1e-9;
        parts.push(format!("{} {min:.2e}", p.file_stem().unwrap().to_string_lossy()));
    }
    ok &= paths.len() >= 7;
    require(ok, format!("min second difference: {}", parts.join(", ")))
}

fn c11_determinism(tmp: &Path) -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for (command, file) in [
        (Command::CltHitting, "constant.json"),
        (Command::CltPosition, "golden.json"),
    ] {
        let first = tmp.join(format!("c11-{}-1", command.name()));
        cli(command, &configs_dir().join(file), &first, Some(1))?;
        let manifest = first.join("manifest.json");
        let reference = fs::read(first.join("samples.csv")).map_err(|e| e.to_string())?;
        for workers in [4, 16] {
            let out = tmp.join(format!("c11-{}-{workers}", command.name()));
            cli(command, &manifest, &out, Some(workers))?;
            let bytes = fs::read(out.join("samples.csv")).map_err(|e| e.to_string())?;
            let m = read_manifest(&out.join("manifest.json")).map_err(|e| e.to_string())?;
            ok &= bytes == reference && m.workers == workers;
        }
        parts.push(format!("{} {} bytes", command.name(), reference.len()));
    }
    require(
        ok,
        format!("samples.csv identical under 1, 4, 16 workers: {}", parts.join(", ")),
    )
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(u32, Box<dyn Fn() -> Check>)> = vec![
        (1, Box::new(c1_oracle_equivalence)),
        (2, Box::new(c2_constant_closed_forms)),
        (3, Box::new(|| c3_variance_audit(tmp.path()))),
        (4, Box::new(c4_hitting_clt)),
        (5, Box::new(c5_position_clt)),
        (6, Box::new(c6_uniformly_ergodic)),
        (7, Box::new(c7_lln)),
        (8, Box::new(c8_exact_identities)),
        (9, Box::new(c9_diagnostics)),
        (10, Box::new(c10_convexity)),
        (11, Box::new(|| c11_determinism(tmp.path()))),
    ];
    let mut failed = 0;
    for (n, check) in &criteria {
        match check() {
            Ok(msg) => println!("criterion {n}: PASS  {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n}: FAIL  {msg}");
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
