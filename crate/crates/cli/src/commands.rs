use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use bundle_eq::equilibrium::{seller_commitment_optimum, CommitmentConfig};
use bundle_eq::io::{figure_rows, to_json, write_figure_csv};
use bundle_eq::learner::buyer_commitment_optimum;
use bundle_eq::mechanism::{buyer_utility, worst_off_certificate};
use bundle_eq::oracle::OracleConfig;
use bundle_eq::{
    best_direction, extract_menu, find_equilibrium, optimal_mechanism, presets, Direction, EquilibriumConfig,
    Menu, Scenario, SearchConfig, TypeLine, ValueModel,
};

use crate::{Format, InputError, Options};

pub fn load_scenario(spec: &str) -> Result<Scenario> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading scenario file {spec}"))?;
        return Scenario::from_json_str(&text).with_context(|| format!("scenario file {spec}"));
    }
    if presets::NAMES.contains(&spec) || matches!(spec, "fig2_left" | "fig7") {
        return Ok(presets::by_name(spec)?);
    }
    Err(InputError(format!(
        "scenario `{spec}` is neither a readable file nor a preset ({})",
        presets::NAMES.join(", ")
    ))
    .into())
}

pub fn require_scenario(opts: &Options) -> Result<Scenario> {
    let spec = opts
        .scenario
        .as_deref()
        .ok_or_else(|| InputError("--scenario is required for this command".into()))?;
    load_scenario(spec)
}

fn load_menu(path: &Path, k: usize) -> Result<Menu> {
    let text = fs::read_to_string(path).with_context(|| format!("reading menu file {}", path.display()))?;
    // Accept whole `mech` reports as well as bare menus.
    let menu = match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(obj)) if obj.contains_key("menu") => Menu::from_json_str(&obj["menu"].to_string()),
        _ => Menu::from_json_str(&text),
    }
    .with_context(|| format!("menu file {}", path.display()))?;
    menu.check_dim(k)
        .with_context(|| format!("menu file {}", path.display()))?;
    Ok(menu)
}

fn direction(opts: &Options, k: usize) -> Result<Option<Direction>> {
    let Some(crate::Weights(w)) = &opts.alpha else { return Ok(None) };
    if w.len() != k {
        return Err(InputError(format!("--alpha has {} weights but the scenario has {k} goods", w.len())).into());
    }
    Ok(Some(Direction::new(w.clone()).context("--alpha")?))
}

pub fn search_config(opts: &Options) -> Result<SearchConfig> {
    let mut cfg = SearchConfig::default();
    if let Some(n) = opts.grid_angles {
        cfg.angle_grid = n;
    }
    cfg.validate().context("--grid-angles")?;
    Ok(cfg)
}

pub fn oracle_config(opts: &Options) -> Result<OracleConfig> {
    let mut cfg = OracleConfig::default();
    if let Some(step) = opts.price_step {
        cfg.price_grid_step = step;
    }
    if let Some(seed) = opts.seed {
        cfg.rng_seed = seed;
    }
    if let Some(n) = opts.grid_angles {
        cfg.angle_grid_size = n;
    }
    cfg.validate().context("--price-step")?;
    Ok(cfg)
}

pub fn equilibrium_config(opts: &Options, k: usize) -> Result<EquilibriumConfig> {
    Ok(EquilibriumConfig {
        seed: direction(opts, k)?.map(|d| d.weights().to_vec()),
        search: search_config(opts)?,
        oracle: oracle_config(opts)?,
        ..Default::default()
    })
}

fn commitment_config(opts: &Options) -> Result<CommitmentConfig> {
    let mut cfg = CommitmentConfig {
        search: search_config(opts)?,
        ..Default::default()
    };
    if let Some(step) = opts.price_step {
        if !(step > 0.0 && step <= cfg.coarse_step) {
            return Err(InputError(format!("--price-step must lie in (0, {}], got {step}", cfg.coarse_step)).into());
        }
        cfg.fine_step = step;
    }
    Ok(cfg)
}

fn check_points(opts: &Options) -> Result<()> {
    if opts.format == Format::Csv && opts.points < 2 {
        return Err(InputError(format!("--points must be at least 2, got {}", opts.points)).into());
    }
    Ok(())
}

/// Writes `text` to `--out` or standard output.
pub fn emit(opts: &Options, text: &str) -> Result<()> {
    match &opts.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

/// Serializes `rows` as CSV with a header taken from the field names.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// JSON report, or the figure CSV of `menu` along `line`.
fn emit_result<T: Serialize>(opts: &Options, report: &T, line: &TypeLine, menu: &Menu) -> Result<()> {
    match opts.format {
        Format::Json => emit(opts, &to_json(report)?),
        Format::Csv => {
            let rows = figure_rows(line, menu, opts.points)?;
            let mut buf = Vec::new();
            write_figure_csv(&rows, &mut buf)?;
            emit(opts, &String::from_utf8(buf)?)
        }
    }
}

fn line_json(line: &TypeLine) -> Value {
    json!({ "a": line.a, "b": line.b })
}

pub fn mech(opts: &Options) -> Result<()> {
    let scenario = require_scenario(opts)?;
    let d = direction(opts, scenario.k)?
        .ok_or_else(|| InputError("--alpha is required for `mech`".into()))?;
    check_points(opts)?;

    let model = ValueModel::new(scenario.clone())?;
    let line = model.posterior_line(&d)?;
    let mech = optimal_mechanism(&line)?;
    let menu = extract_menu(&mech)?;
    let certificate = worst_off_certificate(&mech, &line);
    let report = json!({
        "scenario": scenario,
        "direction": d.weights(),
        "line": line_json(&line),
        "menu": menu,
        "revenue": mech.revenue,
        "buyer_utility": buyer_utility(&mech, &line),
        "vertical": mech.vertical,
        "certificate": certificate,
        "mechanism": mech,
    });
    emit_result(opts, &report, &line, &menu)
}

pub fn br_buyer(opts: &Options) -> Result<()> {
    let scenario = require_scenario(opts)?;
    let path = opts
        .menu
        .as_deref()
        .ok_or_else(|| InputError("--menu is required for `br-buyer`".into()))?;
    let menu = load_menu(path, scenario.k)?;
    let search = search_config(opts)?;
    check_points(opts)?;

    let model = ValueModel::new(scenario.clone())?;
    let br = best_direction(&model, &menu, &search)?;
    let line = model.posterior_line(&br.direction)?;
    let report = json!({
        "scenario": scenario,
        "menu": menu,
        "best_response": br,
    });
    emit_result(opts, &report, &line, &menu)
}

pub fn equilibrium(opts: &Options) -> Result<()> {
    let scenario = require_scenario(opts)?;
    let cfg = equilibrium_config(opts, scenario.k)?;
    check_points(opts)?;

    let model = ValueModel::new(scenario)?;
    let rep = find_equilibrium(&model, &cfg)?;
    let line = model.posterior_line(&rep.direction)?;
    emit_result(opts, &rep, &line, &rep.menu)
}

pub fn commitment_seller(opts: &Options) -> Result<()> {
    let scenario = require_scenario(opts)?;
    let cfg = commitment_config(opts)?;
    check_points(opts)?;

    let model = ValueModel::new(scenario)?;
    let com = seller_commitment_optimum(&model, &cfg)?;
    let line = model.posterior_line(&com.direction)?;
    emit_result(opts, &com, &line, &com.menu)
}

pub fn commitment_buyer(opts: &Options) -> Result<()> {
    let scenario = require_scenario(opts)?;
    let search = search_config(opts)?;
    check_points(opts)?;

    let model = ValueModel::new(scenario)?;
    let com = buyer_commitment_optimum(&model, &search)?;
    let dev = best_direction(&model, &com.menu, &search)?;
    let own = bundle_eq::learner::expected_utility(&model, &com.direction, &com.menu)?;
    let line = model.posterior_line(&com.direction)?;
    let report = json!({
        "commitment": com,
        "deviation": {
            "direction": dev.direction,
            "expected_utility": dev.expected_utility,
            "gain": dev.expected_utility - own,
        },
    });
    emit_result(opts, &report, &line, &com.menu)
}
