use std::f64::consts::PI;

use anyhow::Result;
use serde::Serialize;

use bundle_eq::mechanism::{buyer_utility, incentive_violation, revenue, worst_off_certificate};
use bundle_eq::oracle::mc_validate;
use bundle_eq::envelope::envelope;
use bundle_eq::{extract_menu, find_equilibrium, optimal_mechanism, presets, Direction, Scenario, ValueModel};

use crate::commands::{emit, to_csv, equilibrium_config, load_scenario, oracle_config};
use crate::{CheckFailed, Format, Options};

/// Sampling statistics beyond this many standard errors count as failures.
/// Loose enough that a correct model essentially never trips it.
const Z_LIMIT: f64 = 5.0;

#[derive(Debug, Serialize)]
struct Outcome {
    scenario: String,
    check: String,
    passed: bool,
    detail: String,
}

struct Suite {
    scenario: String,
    outcomes: Vec<Outcome>,
}

impl Suite {
    fn record(&mut self, check: &str, passed: bool, detail: String) {
        self.outcomes.push(Outcome {
            scenario: self.scenario.clone(),
            check: check.into(),
            passed,
            detail,
        });
    }
}

fn directions(k: usize) -> Vec<Direction> {
    if k == 2 {
        return (0..24).map(|j| Direction::from_angle(PI * j as f64 / 24.0)).collect();
    }
    let mut out: Vec<Direction> = (0..k)
        .map(|i| {
            let mut w = vec![0.0; k];
            w[i] = 1.0;
            Direction::new(w).expect("axis")
        })
        .collect();
    out.push(Direction::new(vec![1.0; k]).expect("ones"));
    for j in 0..16 {
        let w: Vec<f64> = (0..k).map(|i| (1.7 * j as f64 + 2.3 * i as f64 + 0.5).sin()).collect();
        if let Ok(d) = Direction::new(w) {
            out.push(d);
        }
    }
    out
}

fn mechanism_checks(suite: &mut Suite, model: &ValueModel) -> Result<()> {
    let sc = model.scenario();
    let (mut bayes, mut ic, mut cert, mut menu_gap) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    let mut nested = true;
    let dirs = directions(model.k());
    for d in &dirs {
        let line = model.posterior_line(d)?;
        for i in 0..model.k() {
            bayes = bayes.max((line.a[i] * 0.5 + line.b[i] - sc.mu[i]).abs() / (1.0 + sc.mu[i]));
        }
        let mech = optimal_mechanism(&line)?;
        let scale = 1.0 + line.value_span();
        for j in 0..=100 {
            ic = ic.max(incentive_violation(&mech, &line, j as f64 / 100.0) / scale);
        }
        cert = cert.min(worst_off_certificate(&mech, &line).margin);
        let menu = extract_menu(&mech)?;
        let eu = envelope(&line, &menu).expected_utility(&line);
        menu_gap = menu_gap
            .max((revenue(&menu, &line) - mech.revenue).abs() / scale)
            .max((eu - buyer_utility(&mech, &line)).abs() / scale);
        if mech.vertical && menu.len() > 1 && !menu.is_nested() {
            nested = false;
        }
    }
    let n = dirs.len();
    suite.record("posterior mean preserving", bayes <= 1e-9, format!("max relative error {bayes:.2e} over {n} directions"));
    suite.record("mechanism IC/IR", ic <= 1e-8, format!("max scaled violation {ic:.2e}"));
    suite.record("worst-off certificate", cert >= 0.0, format!("smallest margin {cert:.2e}"));
    suite.record("menu reproduces mechanism", menu_gap <= 1e-6, format!("max scaled gap {menu_gap:.2e}"));
    suite.record("vertical mechanisms nested", nested, String::new());
    Ok(())
}

fn sampling_checks(suite: &mut Suite, model: &ValueModel, opts: &Options) -> Result<()> {
    let r = mc_validate(model, &oracle_config(opts)?)?;
    let mean_z = r.mean_z.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let call_z = r.calls.iter().fold(0.0f64, |m, c| m.max(c.z.abs()));
    let worst = [
        ("acceptance rate", r.acceptance_z.abs()),
        ("means", mean_z),
        ("correlation", r.correlation_z.abs()),
        ("signal density", r.density.max_z),
        ("posterior linearity", r.linearity.max_z),
        ("call values", call_z),
    ];
    for (name, z) in worst {
        suite.record(
            &format!("Monte Carlo {name}"),
            z <= Z_LIMIT,
            format!("max |z| {z:.2} (seed {}, {} draws)", r.seed, r.accepted),
        );
    }
    Ok(())
}

fn equilibrium_checks(suite: &mut Suite, model: &ValueModel, opts: &Options) -> Result<()> {
    let rep = find_equilibrium(model, &equilibrium_config(opts, model.k())?)?;
    if !rep.converged {
        suite.record(
            "equilibrium structure",
            true,
            format!("not converged after {} iterations (cycle {}); nothing to audit", rep.iterations, rep.cycle_detected),
        );
        return Ok(());
    }
    suite.record(
        "equilibrium verified",
        rep.verified(),
        rep.verification.as_ref().map_or_else(String::new, |v| {
            format!("buyer slack {:.2e}, oracle gap {:?}", v.buyer_slack, v.oracle_gap)
        }),
    );
    suite.record(
        "equilibrium vertical and nested",
        rep.vertical && rep.nested,
        format!("direction {:?}", rep.direction.weights()),
    );
    Ok(())
}

pub fn run(opts: &Options) -> Result<()> {
    let scenarios: Vec<(String, Scenario)> = match &opts.scenario {
        Some(spec) => vec![(spec.clone(), load_scenario(spec)?)],
        None => presets::NAMES
            .iter()
            .map(|&n| Ok((n.to_string(), presets::by_name(n)?)))
            .collect::<Result<_>>()?,
    };
    oracle_config(opts)?;

    let mut outcomes = Vec::new();
    for (name, scenario) in scenarios {
        let model = ValueModel::new(scenario)?;
        let mut suite = Suite {
            scenario: name,
            outcomes: Vec::new(),
        };
        mechanism_checks(&mut suite, &model)?;
        sampling_checks(&mut suite, &model, opts)?;
        equilibrium_checks(&mut suite, &model, opts)?;
        outcomes.extend(suite.outcomes);
    }

    let text = match opts.format {
        Format::Json => serde_json::to_string_pretty(&outcomes)?,
        Format::Csv => to_csv(&outcomes)?,
    };
    emit(opts, &text)?;
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    for o in outcomes.iter().filter(|o| !o.passed) {
        eprintln!("check failed: {} / {}: {}", o.scenario, o.check, o.detail);
    }
    if failed > 0 {
        return Err(CheckFailed(failed).into());
    }
    Ok(())
}
