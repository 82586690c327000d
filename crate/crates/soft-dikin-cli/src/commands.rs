//! The four subcommand implementations.

use crate::config::RunConfig;
use crate::CliError;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use soft_dikin::diagnostics::{
    self, random_unit_vector, GridOracle, LemmaCheckReport,
};
use soft_dikin::geometry::Polytope;
use soft_dikin::targets::{SmoothnessClass, TargetSpec};
use soft_dikin::walk::{
    self, default_hyperparameters, step_count, warm_start_uniform_ball, warmness_bound,
    AcceptanceVariant, ChainState, RunReport, WalkConfig,
};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

#[derive(Serialize)]
struct Derived {
    m: usize,
    d: usize,
    alpha: f64,
    eta_inv: f64,
    lipschitz: Option<f64>,
    smooth: Option<f64>,
    radius: f64,
}

#[derive(Serialize)]
struct WarmStartEcho {
    mode: String,
    inner_radius: Option<f64>,
    /// exp(d log(R/r) + M) with M = 0: exact for uniform targets, an
    /// underestimate otherwise.
    warmness_m0: Option<f64>,
    warmness_overflowed: bool,
}

#[derive(Serialize)]
struct StepCountEcho {
    formula: String,
    delta: f64,
    t_at_config_constants: Option<u64>,
    note: Option<String>,
}

#[derive(Serialize)]
struct Outcome {
    steps: u64,
    thin: u64,
    retained: usize,
    accepted: u64,
    rejected_outside: u64,
    rejected_mh: u64,
    rejected_lazy: u64,
    acceptance_rate: f64,
    mean_acceptance_probability: f64,
    step_norms: soft_dikin::walk::StepNormStats,
}

impl Outcome {
    fn from_report(report: &RunReport) -> Self {
        Outcome {
            steps: report.steps,
            thin: report.thin,
            retained: report.samples.len(),
            accepted: report.accepted,
            rejected_outside: report.rejected_outside,
            rejected_mh: report.rejected_mh,
            rejected_lazy: report.rejected_lazy,
            acceptance_rate: report.acceptance_rate(),
            mean_acceptance_probability: report.mean_acceptance_probability,
            step_norms: report.step_norms,
        }
    }
}

struct PreparedRun {
    polytope: Polytope,
    target: TargetSpec,
    walk_cfg: WalkConfig,
    derived: Derived,
    warm: WarmStartEcho,
    t_echo: StepCountEcho,
}

fn prepare(
    cfg: &RunConfig,
    config_dir: &Path,
    seed: u64,
    target_override: Option<TargetSpec>,
) -> Result<PreparedRun, CliError> {
    let polytope = cfg.build_polytope(config_dir)?;
    let target = match target_override {
        Some(t) => t,
        None => cfg.build_target(polytope.dim(), config_dir)?,
    };
    let constants = cfg.constants();
    let params = default_hyperparameters(polytope.dim(), target.class(), &constants)?;
    let walk_cfg = WalkConfig::new(params, cfg.walk.steps, seed)
        .with_laziness(cfg.walk.laziness)?
        .with_variant(cfg.variant())
        .with_constants(constants);

    let radius = target.radius();
    let derived = Derived {
        m: polytope.num_constraints(),
        d: polytope.dim(),
        alpha: params.alpha(),
        eta_inv: params.eta_inv(),
        lipschitz: target.class().lipschitz(),
        smooth: target.class().smooth(),
        radius,
    };

    let ball = polytope
        .inscribed_radius_at(polytope.witness())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let warmness = warmness_bound(polytope.dim(), radius.max(ball.radius), ball.radius, 0.0)?;
    let warm = WarmStartEcho {
        mode: cfg.walk.start.clone(),
        inner_radius: Some(ball.radius),
        warmness_m0: warmness.value.is_finite().then_some(warmness.value),
        warmness_overflowed: warmness.overflowed,
    };

    let delta = 0.1;
    let t_echo = match step_count(
        polytope.num_constraints(),
        &params,
        radius,
        warmness.value.max(1.0),
        delta,
        constants.c_t,
    ) {
        Ok(t) => StepCountEcho {
            formula: "ceil(c_t (2 m alpha^-1 + eta^-1 R^2) log(w/delta))".into(),
            delta,
            t_at_config_constants: Some(t),
            note: None,
        },
        Err(e) => StepCountEcho {
            formula: "ceil(c_t (2 m alpha^-1 + eta^-1 R^2) log(w/delta))".into(),
            delta,
            t_at_config_constants: None,
            note: Some(e.to_string()),
        },
    };

    Ok(PreparedRun {
        polytope,
        target,
        walk_cfg,
        derived,
        warm,
        t_echo,
    })
}

fn run_prepared(run: &PreparedRun, cfg: &RunConfig) -> Result<RunReport, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(run.walk_cfg.seed);
    let theta0 = match cfg.walk.start.as_str() {
        "witness" => run.polytope.witness().clone(),
        _ => {
            let ball = run
                .polytope
                .inscribed_radius_at(run.polytope.witness())
                .map_err(|e| CliError::Config(e.to_string()))?;
            warm_start_uniform_ball(&ball, &run.polytope, &mut rng)
        }
    };
    Ok(walk::run_chain(
        theta0,
        &run.target,
        &run.polytope,
        &run.walk_cfg,
        cfg.walk.thin,
        &mut rng,
    )?)
}

fn write_samples_csv(path: &Path, report: &RunReport) -> Result<(), CliError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (1..=report.dim).map(|k| format!("θ{k}")).collect();
    writeln!(f, "{}", header.join(","))?;
    for row in &report.samples {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(f, "{}", cells.join(","))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numeric(format!("report serialization: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn cmd_sample(cfg: &RunConfig, config_dir: &Path, out: &Path, seed: u64) -> Result<(), CliError> {
    let run = prepare(cfg, config_dir, seed, None)?;
    let report = run_prepared(&run, cfg)?;
    write_samples_csv(&out.join("samples.csv"), &report)?;
    let full = json!({
        "version": soft_dikin::VERSION,
        "seed": seed,
        "config": cfg,
        "derived": run.derived,
        "warm_start": run.warm,
        "step_count_echo": run.t_echo,
        "outcome": Outcome::from_report(&report),
    });
    write_json(&out.join("report.json"), &full)?;
    println!(
        "sample: {} steps, {} retained, acceptance rate {:.4}",
        report.steps,
        report.samples.len(),
        report.acceptance_rate()
    );
    Ok(())
}

const ALL_LEMMAS: [&str; 7] = [
    "detailed_balance",
    "comparability",
    "cross_ratio",
    "acceptance_event",
    "step_norm_tail",
    "density_ratio",
    "self_concordance",
];

pub fn cmd_diagnose(
    cfg: &RunConfig,
    config_dir: &Path,
    out: &Path,
    seed: u64,
    suite: Option<Vec<String>>,
) -> Result<(), CliError> {
    let run = prepare(cfg, config_dir, seed, None)?;
    let p = &run.polytope;
    let target = &run.target;
    let params = run.walk_cfg.params;
    let dg = &cfg.diagnose;
    let radius = target.radius();

    let selected: Vec<String> = match suite {
        Some(ids) => {
            for id in &ids {
                if !ALL_LEMMAS.contains(&id.as_str()) {
                    return Err(CliError::Config(format!(
                        "unknown lemma id {id}; known: {}",
                        ALL_LEMMAS.join(", ")
                    )));
                }
            }
            ids
        }
        // step_norm_tail needs a positive regularizer; skip it by default
        // when the target class zeroes eta^-1
        None => ALL_LEMMAS
            .iter()
            .filter(|&&id| id != "step_norm_tail" || params.eta_inv() > 0.0)
            .map(|s| s.to_string())
            .collect(),
    };

    let mut failures: Vec<String> = Vec::new();
    for id in &selected {
        let (report, asserted): (LemmaCheckReport, bool) = match id.as_str() {
            "detailed_balance" => {
                // informational companion: the displayed-formula variant
                let literal = diagnostics::detailed_balance_check(
                    target,
                    p,
                    &params,
                    AcceptanceVariant::UnhalvedNorms,
                    dg.pairs,
                    seed,
                )?;
                write_json(&out.join("detailed_balance_unhalved.json"), &literal)?;
                println!(
                    "detailed_balance (unhalved-norms, informational): worst margin {:.3e}",
                    literal.worst_margin
                );
                let exact = diagnostics::detailed_balance_check(
                    target,
                    p,
                    &params,
                    AcceptanceVariant::ExactMh,
                    dg.pairs,
                    seed,
                )?;
                (exact, true)
            }
            "comparability" => (diagnostics::comparability_check(p, &params, dg.pairs, seed)?, true),
            "cross_ratio" => (
                diagnostics::cross_ratio_bound_check(p, &params, radius, dg.pairs, seed)?,
                true,
            ),
            "acceptance_event" => (
                diagnostics::acceptance_event_rate(target, p, &params, dg.anchors, dg.draws, seed)?,
                true,
            ),
            "step_norm_tail" => (
                diagnostics::step_norm_tail_check(p, &params, dg.anchors, dg.draws, seed)?,
                true,
            ),
            "density_ratio" => (
                diagnostics::density_ratio_check(target, p, &params, dg.anchors, dg.draws, seed)?,
                true,
            ),
            "self_concordance" => (
                diagnostics::self_concordance_check(
                    p,
                    dg.alpha_quad,
                    radius,
                    p.num_constraints() as f64,
                    dg.self_concordance_samples,
                    seed,
                )?,
                true,
            ),
            other => return Err(CliError::Config(format!("unknown lemma id {other}"))),
        };
        write_json(&out.join(format!("{id}.json")), &report)?;
        let ok = report.passed();
        println!(
            "{id}: {} (trials={}, violations={}, worst_margin={:.3e})",
            if ok { "PASS" } else { "FAIL" },
            report.trials,
            report.violations,
            report.worst_margin
        );
        if asserted && !ok {
            failures.push(id.clone());
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Lemma(failures.join(", ")))
    }
}

pub fn cmd_dp_erm(cfg: &RunConfig, config_dir: &Path, out: &Path, seed: u64) -> Result<(), CliError> {
    let dp = cfg
        .dp
        .as_ref()
        .ok_or_else(|| CliError::Config("dp-erm needs a [dp] section with epsilon".into()))?;
    if !(dp.epsilon > 0.0) {
        return Err(CliError::Config(format!("dp.epsilon must be > 0, got {}", dp.epsilon)));
    }
    if cfg.target.kind != "logistic_lasso" {
        return Err(CliError::Config(
            "dp-erm expects target.kind = \"logistic_lasso\" with a dataset".into(),
        ));
    }
    let polytope = cfg.build_polytope(config_dir)?;
    let base = cfg.build_target(polytope.dim(), config_dir)?;
    let radius = base.radius();
    let scale = dp.epsilon / (2.0 * dp.l_hat * radius);
    let scaled = TargetSpec::exponential_mechanism(base.clone(), dp.l_hat, dp.epsilon)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let run = prepare(cfg, config_dir, seed, Some(scaled))?;
    let report = run_prepared(&run, cfg)?;
    write_samples_csv(&out.join("samples.csv"), &report)?;

    let theta_hat_row = report
        .samples
        .last()
        .ok_or_else(|| CliError::Numeric("empty chain output".into()))?
        .clone();
    let theta_hat = DVector::from_column_slice(&theta_hat_row);
    let f_hat = base.f(&theta_hat);

    // empirical excess risk against a grid minimum (d <= 2 only)
    let (grid_min, excess_risk, grid_note) = if polytope.dim() <= 2 {
        let uniform = TargetSpec::uniform(radius).map_err(|e| CliError::Config(e.to_string()))?;
        let oracle = GridOracle::new(&polytope, &uniform, dp.grid)?;
        let mut best = f64::INFINITY;
        for idx in 0..oracle.cells() {
            let center = oracle.cell_center(idx);
            let point = DVector::from_column_slice(&center);
            if polytope.contains_interior(&point) {
                best = best.min(base.f(&point));
            }
        }
        if best.is_finite() {
            (Some(best), Some(f_hat - best), None)
        } else {
            (None, None, Some("no interior grid point".to_string()))
        }
    } else {
        (None, None, Some("grid minimization limited to d <= 2".to_string()))
    };

    let full = json!({
        "version": soft_dikin::VERSION,
        "seed": seed,
        "config": cfg,
        "derived": run.derived,
        "exponential_mechanism": {
            "epsilon": dp.epsilon,
            "l_hat": dp.l_hat,
            "radius": radius,
            "scale": scale,
            "scale_formula": "epsilon / (2 l_hat R)",
        },
        "theta_hat": theta_hat_row,
        "f_base_at_theta_hat": f_hat,
        "grid_resolution": dp.grid,
        "grid_min": grid_min,
        "excess_risk": excess_risk,
        "grid_note": grid_note,
        "caveat": "TV-accurate sampling alone does not certify pure epsilon-DP; the \
                   infinity-distance post-processing conversion is out of scope here",
        "outcome": Outcome::from_report(&report),
    });
    write_json(&out.join("report.json"), &full)?;
    println!(
        "dp-erm: scale {scale:.6e}, theta_hat written, excess risk {:?}",
        excess_risk
    );
    Ok(())
}

pub fn cmd_bench(cfg: &RunConfig, out: &Path, seed: u64) -> Result<(), CliError> {
    let bench = cfg
        .bench
        .as_ref()
        .ok_or_else(|| CliError::Config("bench needs a [bench] section with sizes".into()))?;
    if bench.sizes.is_empty() {
        return Err(CliError::Config("bench.sizes must list at least one (m, d)".into()));
    }
    let mut cases = Vec::new();
    for &[m, d] in &bench.sizes {
        if m == 0 || d == 0 {
            return Err(CliError::Config(format!("bad bench size ({m}, {d})")));
        }
        cases.push(BenchCase::new(m, d, seed, cfg)?);
    }
    // interleave the timing windows and keep the per-size minimum, so every
    // size samples the same machine regimes (bursty schedulers otherwise
    // poison whichever size runs last)
    for _ in 0..3 {
        for case in &mut cases {
            let ns = case.window(bench.steps)?;
            case.best = case.best.min(ns);
        }
    }
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for case in &cases {
        println!("bench: m={} d={} ns_per_step={:.0}", case.m, case.d, case.best);
        rows.push((case.m, case.d, case.best));
    }

    let mut f = std::io::BufWriter::new(std::fs::File::create(out.join("bench.csv"))?);
    writeln!(f, "m,d,ns_per_step")?;
    for (m, d, ns) in &rows {
        writeln!(f, "{m},{d},{ns}")?;
    }
    drop(f);

    // near-linear growth in m at fixed d: consecutive same-d sizes must keep
    // the time ratio within [m_ratio / 2, 1.5 m_ratio]; timing noise is
    // reported, never fatal
    let mut ratio_checks = Vec::new();
    let mut all_ok = true;
    for pair in rows.windows(2) {
        let (m0, d0, t0) = pair[0];
        let (m1, d1, t1) = pair[1];
        if d0 == d1 && m1 > m0 {
            let m_ratio = m1 as f64 / m0 as f64;
            let t_ratio = t1 / t0;
            let ok = t_ratio >= m_ratio / 2.0 && t_ratio <= 1.5 * m_ratio;
            all_ok &= ok;
            ratio_checks.push(json!({
                "m_from": m0, "m_to": m1, "d": d0,
                "m_ratio": m_ratio, "time_ratio": t_ratio, "within_window": ok,
            }));
        }
    }
    if !all_ok {
        eprintln!("bench: time ratios outside the near-linear window (timing noise is not fatal)");
    }
    let report = json!({
        "version": soft_dikin::VERSION,
        "seed": seed,
        "steps": bench.steps,
        "rows": rows.iter().map(|(m, d, ns)| json!({"m": m, "d": d, "ns_per_step": ns})).collect::<Vec<_>>(),
        "near_linear_window": "[m_ratio/2, 1.5 m_ratio]",
        "ratio_checks": ratio_checks,
        "near_linear_ok": all_ok,
    });
    write_json(&out.join("report.json"), &report)?;
    Ok(())
}

/// One timed walk on a random m x d polytope (unit rows, offsets one, origin
/// interior).
struct BenchCase {
    m: usize,
    d: usize,
    polytope: Polytope,
    target: TargetSpec,
    walk_cfg: WalkConfig,
    state: Option<ChainState>,
    rng: ChaCha8Rng,
    best: f64,
}

impl BenchCase {
    fn new(m: usize, d: usize, seed: u64, cfg: &RunConfig) -> Result<Self, CliError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = nalgebra::DMatrix::zeros(m, d);
        for j in 0..m {
            let row = random_unit_vector(d, &mut rng);
            for k in 0..d {
                a[(j, k)] = row[k];
            }
        }
        let b = nalgebra::DVector::from_element(m, 1.0);
        let polytope = Polytope::validate(a, b, None).map_err(|e| CliError::Config(e.to_string()))?;
        let target = TargetSpec::uniform(1.0).map_err(|e| CliError::Config(e.to_string()))?;
        let constants = cfg.constants();
        let params = default_hyperparameters(d, SmoothnessClass::Smooth(0.0), &constants)?;
        let walk_cfg = WalkConfig::new(params, 0, seed).with_constants(constants);
        let mut state = ChainState::new(&polytope, &target, polytope.witness().clone(), &params)?;
        for _ in 0..10 {
            let (next, _) = walk::step(state, &target, &polytope, &walk_cfg, &mut rng)?;
            state = next;
        }
        Ok(Self {
            m,
            d,
            polytope,
            target,
            walk_cfg,
            state: Some(state),
            rng,
            best: f64::INFINITY,
        })
    }

    fn window(&mut self, steps: u64) -> Result<f64, CliError> {
        let mut state = self.state.take().expect("state present between windows");
        let start = Instant::now();
        for _ in 0..steps {
            let (next, _) = walk::step(state, &self.target, &self.polytope, &self.walk_cfg, &mut self.rng)?;
            state = next;
        }
        let ns = start.elapsed().as_nanos() as f64 / steps as f64;
        self.state = Some(state);
        Ok(ns)
    }
}
