//! Command implementations. Every command is a pure function of the resolved
//! configuration (plus seed) to output bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use predlink::comm::{FadingMode, LinkParams};
use predlink::optimizer::{
    multi_user_allocate, outer_opt_bandwidth, savings_from_optima, AllocationMode, SearchConfig,
    ToleranceRule,
};
use predlink::prediction::{
    estimate_error_prob, fit_predictor, generate_trajectories, TrajectoryProcess,
};
use predlink::reliability::{overall_error_bound, Criticality, TaskSpec};
use predlink::simulator::{compare_placements, run_sim, Placement, SimScenario};
use predlink::{LookupMode, TradeoffTable};

use crate::config::Resolved;
use crate::{CliError, Command, CommonArgs, LinkArgs, SearchArgs, TaskArgs};

const LINK_DEFAULTS: &[(&str, &str)] = &[
    ("tx_power_dbm", "23"),
    ("noise_psd_dbm_hz", "-144"),
    ("distance_km", "0.2"),
    ("backhaul_delay_ms", "10"),
    ("tx_duration_ms", "0.5"),
    ("coherence_time_ms", "10"),
    ("horizon_cap_ms", "50"),
    ("fading", "fixed:1"),
];

const TASK_DEFAULTS: &[(&str, &str)] = &[
    ("dmax_ms", "20"),
    ("eps_max", "1e-5"),
    ("delta_pct", "1"),
    ("lambda_pps", "100"),
];

const SEARCH_DEFAULTS: &[(&str, &str)] = &[
    ("w0_khz", "5"),
    ("wmax_khz", "400"),
    ("b0_bits", "1"),
    ("bmax_bits", "2000"),
    ("b_step_bits", "1"),
    ("tolerance", "target_squared"),
    ("max_iters", "64"),
];

fn apply_link_flags(cfg: &mut Resolved, link: &LinkArgs) {
    cfg.set_flag("tx_power_dbm", link.tx_power_dbm);
    cfg.set_flag("noise_psd_dbm_hz", link.noise_psd_dbm_hz);
    cfg.set_flag("distance_km", link.distance_km);
    cfg.set_flag("backhaul_delay_ms", link.backhaul_delay_ms);
    cfg.set_flag("tx_duration_ms", link.tx_duration_ms);
    cfg.set_flag("coherence_time_ms", link.coherence_time_ms);
    cfg.set_flag("horizon_cap_ms", link.horizon_cap_ms);
    cfg.set_flag("fading", link.fading.clone());
}

fn apply_task_flags(cfg: &mut Resolved, task: &TaskArgs) {
    cfg.set_flag("dmax_ms", task.dmax_ms);
    cfg.set_flag("eps_max", task.eps_max);
    cfg.set_flag("delta_pct", task.delta_pct);
    cfg.set_flag("lambda_pps", task.lambda_pps);
}

fn apply_search_flags(cfg: &mut Resolved, search: &SearchArgs) {
    cfg.set_flag("w0_khz", search.w0_khz);
    cfg.set_flag("wmax_khz", search.wmax_khz);
    cfg.set_flag("b0_bits", search.b0_bits);
    cfg.set_flag("bmax_bits", search.bmax_bits);
    cfg.set_flag("b_step_bits", search.b_step_bits);
    cfg.set_flag("tolerance", search.tolerance.clone());
    cfg.set_flag("max_iters", search.max_iters);
}

fn finish_common(cfg: &mut Resolved, common: &CommonArgs) -> Result<(), CliError> {
    cfg.set_flag("seed", common.seed);
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    std::fs::create_dir_all(&common.out)?;
    Ok(())
}

fn parse_fading(cfg: &Resolved) -> Result<FadingMode, CliError> {
    let raw = cfg.string("fading")?;
    let (kind, arg) = raw
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("fading must be fixed:<gain> or rayleigh:<nodes>, got '{raw}'")))?;
    match kind {
        "fixed" => Ok(FadingMode::FixedGain {
            gain: arg
                .parse()
                .map_err(|_| CliError::Config(format!("invalid fading gain '{arg}'")))?,
        }),
        "rayleigh" => Ok(FadingMode::RayleighAverage {
            nodes: arg
                .parse()
                .map_err(|_| CliError::Config(format!("invalid node count '{arg}'")))?,
        }),
        other => Err(CliError::Config(format!("unknown fading mode '{other}'"))),
    }
}

fn link_from(cfg: &Resolved) -> Result<LinkParams, CliError> {
    Ok(LinkParams {
        tx_power_dbm: cfg.f64("tx_power_dbm")?,
        noise_psd_dbm_hz: cfg.f64("noise_psd_dbm_hz")?,
        distance_km: cfg.f64("distance_km")?,
        backhaul_delay_ms: cfg.f64("backhaul_delay_ms")?,
        tx_duration_ms: cfg.f64("tx_duration_ms")?,
        coherence_time_ms: cfg.f64("coherence_time_ms")?,
        horizon_cap_ms: cfg.f64("horizon_cap_ms")?,
        fading: parse_fading(cfg)?,
    })
}

fn task_from(cfg: &Resolved, delta_key: &str, critical: bool) -> Result<TaskSpec, CliError> {
    Ok(TaskSpec {
        delay_bound_ms: cfg.f64("dmax_ms")?,
        reliability_target: cfg.f64("eps_max")?,
        jnd_threshold_pct: cfg.f64(delta_key)?,
        arrival_rate_pps: cfg.f64("lambda_pps")?,
        criticality: if critical {
            Criticality::Critical
        } else {
            Criticality::NonCritical
        },
    })
}

fn search_from(cfg: &Resolved) -> Result<SearchConfig, CliError> {
    let tol = cfg.string("tolerance")?;
    let tolerance_rule = if tol == "target_squared" {
        ToleranceRule::TargetSquared
    } else if let Some(v) = tol.strip_prefix("abs:") {
        ToleranceRule::Absolute(
            v.parse()
                .map_err(|_| CliError::Config(format!("invalid tolerance '{tol}'")))?,
        )
    } else {
        return Err(CliError::Config(format!(
            "tolerance must be 'target_squared' or 'abs:<value>', got '{tol}'"
        )));
    };
    Ok(SearchConfig {
        w_range_khz: (cfg.f64("w0_khz")?, cfg.f64("wmax_khz")?),
        b_range_bits: (cfg.u64("b0_bits")?, cfg.u64("bmax_bits")?),
        tolerance_rule,
        max_iters: cfg.usize("max_iters")?,
        b_grid_step: cfg.u64("b_step_bits")?,
    })
}

fn load_table(cfg: &Resolved) -> Result<TradeoffTable, CliError> {
    let path = cfg.string("table_file")?;
    if path.is_empty() {
        return Err(CliError::Config("table_file is required".into()));
    }
    Ok(TradeoffTable::load(Path::new(&path))?)
}

fn write_file(path: &Path, bytes: &str) -> Result<(), CliError> {
    std::fs::write(path, bytes)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Render an f64 without trailing noise; shortest round-trip form.
fn num(x: f64) -> String {
    format!("{x}")
}

pub fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Tradeoff {
            common,
            sequences,
            eval_sequences,
            seq_len_slots,
            process,
            ou_reversion_rate,
            ou_noise_std,
            ou_init_vel_std,
            ou_base_position,
            sin_components,
            sin_max_freq_hz,
            sin_offset,
            history_slots,
            horizon_slots,
            ar_order,
            horizons_ms,
            deltas_pct,
            stride,
        } => {
            let mut cfg = Resolved::with_defaults(&[
                ("seed", ""),
                ("sequences", "64"),
                ("eval_sequences", "32"),
                ("seq_len_slots", "4000"),
                ("process", "ou"),
                ("ou_reversion_rate", "8"),
                ("ou_noise_std", "6"),
                ("ou_init_vel_std", "0.5"),
                ("ou_base_position", "10"),
                ("sin_components", "4"),
                ("sin_max_freq_hz", "6"),
                ("sin_offset", "5"),
                ("history_slots", "500"),
                ("horizon_slots", "100"),
                ("ar_order", "4"),
                ("horizons_ms", "1,2,5,10,20,50,100"),
                ("deltas_pct", "0.1,0.3,1,3"),
                ("stride", "7"),
            ]);
            cfg.set_flag("sequences", sequences);
            cfg.set_flag("eval_sequences", eval_sequences);
            cfg.set_flag("seq_len_slots", seq_len_slots);
            cfg.set_flag("process", process);
            cfg.set_flag("ou_reversion_rate", ou_reversion_rate);
            cfg.set_flag("ou_noise_std", ou_noise_std);
            cfg.set_flag("ou_init_vel_std", ou_init_vel_std);
            cfg.set_flag("ou_base_position", ou_base_position);
            cfg.set_flag("sin_components", sin_components);
            cfg.set_flag("sin_max_freq_hz", sin_max_freq_hz);
            cfg.set_flag("sin_offset", sin_offset);
            cfg.set_flag("history_slots", history_slots);
            cfg.set_flag("horizon_slots", horizon_slots);
            cfg.set_flag("ar_order", ar_order);
            cfg.set_flag("horizons_ms", horizons_ms);
            cfg.set_flag("deltas_pct", deltas_pct);
            cfg.set_flag("stride", stride);
            finish_common(&mut cfg, &common)?;
            cmd_tradeoff(&cfg, &common.out)
        }
        Command::Optimize {
            common,
            link,
            task,
            search,
            table_file,
        } => {
            let mut cfg = optimize_defaults();
            apply_link_flags(&mut cfg, &link);
            apply_task_flags(&mut cfg, &task);
            apply_search_flags(&mut cfg, &search);
            cfg.set_flag("table_file", table_file.map(|p| p.display().to_string()));
            finish_common(&mut cfg, &common)?;
            cmd_optimize(&cfg, &common.out)
        }
        Command::Allocate {
            common,
            link,
            task,
            search,
            table_file,
            n_tasks,
            critical_ratio,
            delta_crit_pct,
            delta_noncrit_pct,
            wmax_min_khz,
            wmax_max_khz,
            wmax_steps,
            inject_w_crit_khz,
            inject_w_noncrit_khz,
        } => {
            let mut cfg = allocate_defaults();
            apply_link_flags(&mut cfg, &link);
            apply_task_flags(&mut cfg, &task);
            apply_search_flags(&mut cfg, &search);
            cfg.set_flag("table_file", table_file.map(|p| p.display().to_string()));
            cfg.set_flag("n_tasks", n_tasks);
            cfg.set_flag("critical_ratio", critical_ratio);
            cfg.set_flag("delta_crit_pct", delta_crit_pct);
            cfg.set_flag("delta_noncrit_pct", delta_noncrit_pct);
            cfg.set_flag("wmax_min_khz", wmax_min_khz);
            cfg.set_flag("wmax_max_khz", wmax_max_khz);
            cfg.set_flag("wmax_steps", wmax_steps);
            cfg.set_flag("inject_w_crit_khz", inject_w_crit_khz);
            cfg.set_flag("inject_w_noncrit_khz", inject_w_noncrit_khz);
            finish_common(&mut cfg, &common)?;
            cmd_allocate(&cfg, &common.out)
        }
        Command::Simulate {
            common,
            link,
            task,
            table_file,
            w_khz,
            bits,
            n_slots,
            placement,
            eps_d_override,
            loss_sweep,
            sweep_slots,
        } => {
            let mut cfg = simulate_defaults();
            apply_link_flags(&mut cfg, &link);
            apply_task_flags(&mut cfg, &task);
            cfg.set_flag("table_file", table_file.map(|p| p.display().to_string()));
            cfg.set_flag("w_khz", w_khz);
            cfg.set_flag("bits", bits);
            cfg.set_flag("n_slots", n_slots);
            cfg.set_flag("placement", placement);
            cfg.set_flag("eps_d_override", eps_d_override);
            cfg.set_flag("loss_sweep", loss_sweep);
            cfg.set_flag("sweep_slots", sweep_slots);
            finish_common(&mut cfg, &common)?;
            cmd_simulate(&cfg, &common.out)
        }
        Command::Sweep {
            common,
            link,
            task,
            search,
            table_file,
            w_khz,
            bits,
            dmax_min_ms,
            dmax_max_ms,
            dmax_step_ms,
            bits_min,
            bits_max,
            bits_step,
            w_min_khz,
            w_max_khz,
            w_steps,
        } => {
            let mut cfg = sweep_defaults();
            apply_link_flags(&mut cfg, &link);
            apply_task_flags(&mut cfg, &task);
            apply_search_flags(&mut cfg, &search);
            cfg.set_flag("table_file", table_file.map(|p| p.display().to_string()));
            cfg.set_flag("w_khz", w_khz);
            cfg.set_flag("bits", bits);
            cfg.set_flag("dmax_min_ms", dmax_min_ms);
            cfg.set_flag("dmax_max_ms", dmax_max_ms);
            cfg.set_flag("dmax_step_ms", dmax_step_ms);
            cfg.set_flag("bits_min", bits_min);
            cfg.set_flag("bits_max", bits_max);
            cfg.set_flag("bits_step", bits_step);
            cfg.set_flag("w_min_khz", w_min_khz);
            cfg.set_flag("w_max_khz", w_max_khz);
            cfg.set_flag("w_steps", w_steps);
            finish_common(&mut cfg, &common)?;
            cmd_sweep(&cfg, &common.out)
        }
    }
}

fn optimize_defaults() -> Resolved {
    let mut defaults: Vec<(&str, &str)> = vec![("seed", ""), ("table_file", "")];
    defaults.extend_from_slice(LINK_DEFAULTS);
    defaults.extend_from_slice(TASK_DEFAULTS);
    defaults.extend_from_slice(SEARCH_DEFAULTS);
    Resolved::with_defaults(&defaults)
}

fn allocate_defaults() -> Resolved {
    let mut defaults: Vec<(&str, &str)> = vec![
        ("seed", ""),
        ("table_file", ""),
        ("n_tasks", "31"),
        ("critical_ratio", "0.5"),
        ("delta_crit_pct", "0.1"),
        ("delta_noncrit_pct", "1"),
        ("wmax_min_khz", "100"),
        ("wmax_max_khz", "2000"),
        ("wmax_steps", "20"),
        ("inject_w_crit_khz", ""),
        ("inject_w_noncrit_khz", ""),
    ];
    defaults.extend_from_slice(LINK_DEFAULTS);
    defaults.extend_from_slice(TASK_DEFAULTS);
    defaults.extend_from_slice(SEARCH_DEFAULTS);
    Resolved::with_defaults(&defaults)
}

fn simulate_defaults() -> Resolved {
    let mut defaults: Vec<(&str, &str)> = vec![
        ("seed", ""),
        ("table_file", ""),
        ("w_khz", "32.19"),
        ("bits", "92"),
        ("n_slots", "1000000"),
        ("placement", "receiver"),
        ("eps_d_override", ""),
        ("loss_sweep", "0.001,0.003,0.01,0.03,0.1"),
        ("sweep_slots", "1000000"),
    ];
    defaults.extend_from_slice(LINK_DEFAULTS);
    defaults.extend_from_slice(TASK_DEFAULTS);
    Resolved::with_defaults(&defaults)
}

fn sweep_defaults() -> Resolved {
    let mut defaults: Vec<(&str, &str)> = vec![
        ("seed", ""),
        ("table_file", ""),
        ("w_khz", "140"),
        ("bits", "256"),
        ("dmax_min_ms", "2"),
        ("dmax_max_ms", "50"),
        ("dmax_step_ms", "0.5"),
        ("bits_min", "1"),
        ("bits_max", "600"),
        ("bits_step", "1"),
        ("w_min_khz", "10"),
        ("w_max_khz", "300"),
        ("w_steps", "50"),
    ];
    defaults.extend_from_slice(LINK_DEFAULTS);
    defaults.extend_from_slice(TASK_DEFAULTS);
    defaults.extend_from_slice(SEARCH_DEFAULTS);
    Resolved::with_defaults(&defaults)
}

fn cmd_tradeoff(cfg: &Resolved, out: &Path) -> Result<(), CliError> {
    let seed = cfg.required_seed()?;
    let process = match cfg.string("process")?.as_str() {
        "ou" => TrajectoryProcess::Ou {
            reversion_rate: cfg.f64("ou_reversion_rate")?,
            noise_std: cfg.f64("ou_noise_std")?,
            init_vel_std: cfg.f64("ou_init_vel_std")?,
            base_position: cfg.f64("ou_base_position")?,
        },
        "sinusoid" => TrajectoryProcess::SinusoidMix {
            components: cfg.usize("sin_components")?,
            max_freq_hz: cfg.f64("sin_max_freq_hz")?,
            offset: cfg.f64("sin_offset")?,
        },
        other => return Err(CliError::Config(format!("unknown process '{other}'"))),
    };
    let seq_len = cfg.usize("seq_len_slots")?;
    let train = generate_trajectories(cfg.usize("sequences")?, seq_len, seed, process)?;
    // Held-out evaluation data from a different stream.
    let eval = generate_trajectories(
        cfg.usize("eval_sequences")?,
        seq_len,
        seed.wrapping_add(1),
        process,
    )?;
    let (model, report) = fit_predictor(
        &train,
        cfg.usize("history_slots")?,
        cfg.usize("horizon_slots")?,
        cfg.usize("ar_order")?,
    )?;
    log::info!(
        "fit: train RRMSE {:.4}%, validation RRMSE {:.4}%",
        report.train_rrmse_pct,
        report.validation_rrmse_pct
    );
    let horizons = cfg.f64_list("horizons_ms")?;
    let deltas = cfg.f64_list("deltas_pct")?;
    let table = estimate_error_prob(&model, &eval, &horizons, &deltas, cfg.usize("stride")?)?;

    let mut table_text = cfg.header_comment();
    table_text.push_str(&table.to_csv());
    write_file(&out.join("tradeoff_table.csv"), &table_text)?;

    let mut curves = cfg.header_comment();
    curves.push_str("horizon_ms");
    for d in &table.deltas_pct {
        let _ = write!(curves, ",eps_p_delta_{}", num(*d));
    }
    curves.push('\n');
    for (i, h) in table.horizons_ms.iter().enumerate() {
        let _ = write!(curves, "{}", num(*h));
        for j in 0..table.deltas_pct.len() {
            let _ = write!(curves, ",{:.16e}", table.eps[i][j]);
        }
        curves.push('\n');
    }
    write_file(&out.join("tradeoff_curves.csv"), &curves)
}

#[derive(Serialize)]
struct OptimizeOutput<'a> {
    config_hash: String,
    seed: Option<u64>,
    result: &'a predlink::AllocationResult,
}

fn cmd_optimize(cfg: &Resolved, out: &Path) -> Result<(), CliError> {
    let link = link_from(cfg)?;
    let task = task_from(cfg, "delta_pct", false)?;
    let search = search_from(cfg)?;
    let table = load_table(cfg)?;
    let result = outer_opt_bandwidth(&task, &link, &table, &search)?;
    let output = OptimizeOutput {
        config_hash: cfg.hash(),
        seed: if cfg.is_set("seed") {
            Some(cfg.u64("seed")?)
        } else {
            None
        },
        result: &result,
    };
    let json = serde_json::to_string_pretty(&output).expect("serializable") + "\n";
    write_file(&out.join("allocation.json"), &json)?;
    if !result.feasible {
        return Err(CliError::Infeasible(format!(
            "target {} not reachable within the bandwidth range",
            task.reliability_target
        )));
    }
    Ok(())
}

/// Class bandwidths for the allocation curves: either injected or solved.
fn class_optima(cfg: &Resolved) -> Result<(f64, f64), CliError> {
    if cfg.is_set("inject_w_crit_khz") && cfg.is_set("inject_w_noncrit_khz") {
        return Ok((
            cfg.f64("inject_w_crit_khz")?,
            cfg.f64("inject_w_noncrit_khz")?,
        ));
    }
    let link = link_from(cfg)?;
    let search = search_from(cfg)?;
    let table = load_table(cfg)?;
    let crit = task_from(cfg, "delta_crit_pct", true)?;
    let noncrit = task_from(cfg, "delta_noncrit_pct", false)?;
    let a = multi_user_allocate(
        &[crit, noncrit],
        &link,
        &table,
        f64::MAX,
        AllocationMode::TaskOriented,
        &search,
    )?;
    for (r, name) in a.per_task.iter().zip(["critical", "non-critical"]) {
        if !r.feasible {
            return Err(CliError::Infeasible(format!(
                "{name} class has no feasible bandwidth in range"
            )));
        }
    }
    Ok((
        a.per_task[0].bandwidth_khz,
        a.per_task[1].bandwidth_khz,
    ))
}

/// Criticality pattern spreading `ratio` critical tasks evenly through the
/// prefix order.
fn is_critical_at(i: usize, ratio: f64) -> bool {
    ((i + 1) as f64 * ratio).floor() > (i as f64 * ratio).floor()
}

fn cmd_allocate(cfg: &Resolved, out: &Path) -> Result<(), CliError> {
    let (w_crit, w_noncrit) = class_optima(cfg)?;
    let n_tasks = cfg.usize("n_tasks")?;
    let ratio = cfg.f64("critical_ratio")?;
    if !(0.0..=1.0).contains(&ratio) {
        return Err(CliError::Config("critical_ratio must be in [0,1]".into()));
    }

    // Total bandwidth versus number of users, both modes, plus the saving.
    let mut bw_curve = cfg.header_comment();
    bw_curve.push_str(
        "n_users,total_task_oriented_khz,total_task_agnostic_khz,savings_pct\n",
    );
    let mut total_to = 0.0;
    for n in 1..=n_tasks {
        total_to += if is_critical_at(n - 1, ratio) {
            w_crit
        } else {
            w_noncrit
        };
        let total_ta = n as f64 * w_crit;
        let savings = 100.0 * (1.0 - total_to / total_ta);
        let _ = writeln!(
            bw_curve,
            "{n},{},{},{}",
            num(total_to),
            num(total_ta),
            num(savings)
        );
    }
    write_file(&out.join("allocate_bandwidth_vs_users.csv"), &bw_curve)?;

    // Users served versus available bandwidth.
    let per_task_bw: Vec<f64> = (0..10_000)
        .map(|i| {
            if is_critical_at(i, ratio) {
                w_crit
            } else {
                w_noncrit
            }
        })
        .collect();
    let mut users_curve = cfg.header_comment();
    users_curve.push_str("wmax_khz,users_task_oriented,users_task_agnostic\n");
    let (lo, hi) = (cfg.f64("wmax_min_khz")?, cfg.f64("wmax_max_khz")?);
    let steps = cfg.usize("wmax_steps")?.max(2);
    for k in 0..steps {
        let wmax = lo + (hi - lo) * k as f64 / (steps - 1) as f64;
        let n_to = predlink::optimizer::admit_prefix(&per_task_bw, wmax);
        let n_ta = (wmax / w_crit).floor() as usize;
        let _ = writeln!(users_curve, "{},{n_to},{n_ta}", num(wmax));
    }
    write_file(&out.join("allocate_users_vs_wmax.csv"), &users_curve)?;

    log::info!(
        "class optima: critical {w_crit} kHz, non-critical {w_noncrit} kHz, savings at r=0: {:.2}%",
        savings_from_optima(w_crit, w_noncrit, 0.0)?
    );
    Ok(())
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    config_hash: String,
    report: &'a predlink::SimReport,
}

fn cmd_simulate(cfg: &Resolved, out: &Path) -> Result<(), CliError> {
    let seed = cfg.required_seed()?;
    let link = link_from(cfg)?;
    let task = task_from(cfg, "delta_pct", false)?;
    let table = load_table(cfg)?;
    let placement = match cfg.string("placement")?.as_str() {
        "receiver" => Placement::Receiver,
        "transmitter" => Placement::Transmitter,
        other => return Err(CliError::Config(format!("unknown placement '{other}'"))),
    };
    let scenario = SimScenario {
        task,
        link: link.clone(),
        bandwidth_khz: cfg.f64("w_khz")?,
        bits: cfg.u64("bits")?,
        table: table.clone(),
        placement,
        n_slots: cfg.u64("n_slots")?,
        seed,
        slot_ms: link.tx_duration_ms,
        decode_error_override: if cfg.is_set("eps_d_override") {
            Some(cfg.f64("eps_d_override")?)
        } else {
            None
        },
    };
    let report = run_sim(&scenario)?;
    let output = SimulateOutput {
        config_hash: cfg.hash(),
        report: &report,
    };
    let json = serde_json::to_string_pretty(&output).expect("serializable") + "\n";
    write_file(&out.join("sim_report.json"), &json)?;

    // Paired placement curves across the configured loss levels.
    let mut sweep = cfg.header_comment();
    sweep.push_str("loss_prob,rx_error,rx_ci95,tx_error,tx_ci95\n");
    for loss in cfg.f64_list("loss_sweep")? {
        let sc = SimScenario {
            n_slots: cfg.u64("sweep_slots")?,
            decode_error_override: Some(loss),
            table: table.clone(),
            ..scenario.clone()
        };
        let (rx, tx) = compare_placements(&sc)?;
        let _ = writeln!(
            sweep,
            "{},{},{},{},{}",
            num(loss),
            num(rx.empirical_overall_error),
            num(rx.ci_half_width),
            num(tx.empirical_overall_error),
            num(tx.ci_half_width)
        );
    }
    write_file(&out.join("placement_sweep.csv"), &sweep)
}

fn cmd_sweep(cfg: &Resolved, out: &Path) -> Result<(), CliError> {
    let link = link_from(cfg)?;
    let task = task_from(cfg, "delta_pct", false)?;
    let table = load_table(cfg)?;
    let search = search_from(cfg)?;
    let w_khz = cfg.f64("w_khz")?;
    let bits = cfg.u64("bits")? as f64;

    // Error versus delay bound at fixed (W, b).
    let mut dmax_csv = cfg.header_comment();
    dmax_csv.push_str("dmax_ms,term1,term2,term3,total\n");
    let (lo, hi, step) = (
        cfg.f64("dmax_min_ms")?,
        cfg.f64("dmax_max_ms")?,
        cfg.f64("dmax_step_ms")?,
    );
    if step <= 0.0 || hi < lo {
        return Err(CliError::Config("invalid dmax sweep range".into()));
    }
    let mut dmax = lo;
    while dmax <= hi + 1e-9 {
        let b = overall_error_bound(
            &TaskSpec {
                delay_bound_ms: dmax,
                ..task
            },
            &link,
            &table,
            w_khz,
            bits,
            LookupMode::Clamp,
        )?;
        let _ = writeln!(
            dmax_csv,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            num(dmax),
            b.term1,
            b.term2,
            b.term3,
            b.total
        );
        dmax += step;
    }
    write_file(&out.join("sweep_dmax.csv"), &dmax_csv)?;

    // Error components versus bits at fixed W.
    let mut bits_csv = cfg.header_comment();
    bits_csv.push_str("bits,eps_d,fq_dth,fq_dth_tth,term1,term2,term3,total\n");
    let (b_lo, b_hi, b_step) = (
        cfg.u64("bits_min")?,
        cfg.u64("bits_max")?,
        cfg.u64("bits_step")?.max(1),
    );
    let mut b = b_lo.max(1);
    while b <= b_hi {
        let r = overall_error_bound(&task, &link, &table, w_khz, b as f64, LookupMode::Clamp)?;
        let _ = writeln!(
            bits_csv,
            "{b},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.eps_d, r.fq_dth, r.fq_dth_tth, r.term1, r.term2, r.term3, r.total
        );
        b += b_step;
    }
    write_file(&out.join("sweep_bits.csv"), &bits_csv)?;

    // Error versus bandwidth with bits re-optimized at every point.
    let mut w_csv = cfg.header_comment();
    w_csv.push_str("w_khz,bits_opt,eps_d,fq_dth,fq_dth_tth,term1,term2,term3,total\n");
    let (w_lo, w_hi) = (cfg.f64("w_min_khz")?, cfg.f64("w_max_khz")?);
    let w_steps = cfg.usize("w_steps")?.max(2);
    for k in 0..w_steps {
        let w = w_lo + (w_hi - w_lo) * k as f64 / (w_steps - 1) as f64;
        let (b_opt, _) = predlink::optimizer::inner_opt_bits(&task, &link, &table, w, &search)?;
        let r = overall_error_bound(&task, &link, &table, w, b_opt as f64, LookupMode::Clamp)?;
        let _ = writeln!(
            w_csv,
            "{},{b_opt},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            num(w),
            r.eps_d,
            r.fq_dth,
            r.fq_dth_tth,
            r.term1,
            r.term2,
            r.term3,
            r.total
        );
    }
    write_file(&out.join("sweep_bandwidth.csv"), &w_csv)
}
