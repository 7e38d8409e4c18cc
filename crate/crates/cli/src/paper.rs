use anyhow::Result;
use serde::Serialize;

use bundle_eq::equilibrium::{seller_commitment_optimum, CommitmentConfig};
use bundle_eq::learner::{buyer_commitment_optimum, expected_utility};
use bundle_eq::mechanism::{revenue, separate_sales_prices};
use bundle_eq::oracle::{oracle_seller_best, OracleConfig};
use bundle_eq::{
    best_direction, extract_menu, find_equilibrium, optimal_mechanism, presets, Direction, Menu, MenuOption,
    ValueModel,
};

use crate::commands::{emit, to_csv, equilibrium_config, oracle_config, search_config};
use crate::{Example, Format, InputError, Options};

const TOL: f64 = 0.01;
const TOL_WIDE: f64 = 0.05;

#[derive(Debug, Serialize)]
struct Row {
    quantity: String,
    computed: f64,
    paper: f64,
    abs_delta: f64,
    tolerance: f64,
    within: bool,
}

#[derive(Debug, Serialize)]
struct Table {
    example: String,
    rows: Vec<Row>,
    notes: Vec<String>,
}

impl Table {
    fn new(example: &str) -> Self {
        Table {
            example: example.into(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn row(&mut self, quantity: impl Into<String>, computed: f64, paper: f64, tolerance: f64) {
        let abs_delta = (computed - paper).abs();
        self.rows.push(Row {
            quantity: quantity.into(),
            computed,
            paper,
            abs_delta,
            tolerance,
            within: abs_delta <= tolerance,
        });
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }
}

fn price(menu: &Menu, lottery: &[f64]) -> f64 {
    menu.options
        .iter()
        .find(|o| o.lottery.iter().zip(lottery).all(|(x, y)| (x - y).abs() < 1e-9))
        .map_or(f64::NAN, |o| o.price)
}

fn rationing(menu: &Menu) -> Option<&MenuOption> {
    menu.options
        .iter()
        .find(|o| o.lottery.iter().any(|&x| x > 1e-9 && x < 1.0 - 1e-9))
}

fn model(name: &str) -> Result<ValueModel> {
    Ok(ValueModel::new(presets::by_name(name)?)?)
}

pub fn run(example: Example, opts: &Options) -> Result<()> {
    if opts.scenario.is_some() || opts.alpha.is_some() || opts.menu.is_some() {
        return Err(InputError("`paper` runs canned scenarios; drop --scenario, --alpha and --menu".into()).into());
    }
    let table = match example {
        Example::Intro => intro(opts)?,
        Example::Fig2 => fig2(opts)?,
        Example::Fig3 => fig3(opts)?,
        Example::Fig4 => fig4(opts)?,
        Example::Fig6 => fig6(opts)?,
        Example::Fig7 => fig7(opts)?,
    };
    match opts.format {
        Format::Json => emit(opts, &serde_json::to_string_pretty(&table)?),
        Format::Csv => {
            for n in &table.notes {
                eprintln!("note: {n}");
            }
            emit(opts, &to_csv(&table.rows)?)
        }
    }
}

fn intro(opts: &Options) -> Result<Table> {
    let mut t = Table::new("intro");
    let m = model("intro")?;
    let rep = find_equilibrium(&m, &equilibrium_config(opts, 2)?)?;
    let w = rep.direction.sum_normalized();
    t.row("alpha_1", w[0], 0.5, TOL);
    t.row("alpha_2", w[1], 0.5, TOL);
    t.row("bundle price", price(&rep.menu, &[1.0, 1.0]), 3.12, TOL);
    t.note(format!(
        "converged {}, pure bundling {}, revenue {:.4}",
        rep.converged,
        rep.is_pure_bundling(),
        rep.revenue
    ));
    Ok(t)
}

fn fig2(opts: &Options) -> Result<Table> {
    let mut t = Table::new("fig2");
    let search = search_config(opts)?;

    let m = model("perturbed")?;
    let rep = find_equilibrium(&m, &equilibrium_config(opts, 2)?)?;
    t.row("left: {2} price", price(&rep.menu, &[0.0, 1.0]), 1.59, TOL);
    t.row("left: {1,2} price", price(&rep.menu, &[1.0, 1.0]), 3.16, TOL);
    let line = m.posterior_line(&rep.direction)?;
    let ss = separate_sales_prices(&optimal_mechanism(&line)?, &line);
    t.row("left: separate-sales p1", ss[0].unwrap_or(f64::NAN), 1.57, TOL);
    t.row("left: separate-sales p2", ss[1].unwrap_or(f64::NAN), 1.59, TOL);
    t.note(format!("left: converged {}, nested {}", rep.converged, rep.nested));

    // The right panel's menu is checked as a pair of one-sided best responses.
    let m = model("fig2_right")?;
    let drawn = Menu::new(vec![
        MenuOption::bundle(2, &[1], 1.595),
        MenuOption::bundle(2, &[0, 1], 3.174),
    ])?;
    let br = best_direction(&m, &drawn, &search)?;
    let line = m.posterior_line(&br.direction)?;
    let mech = optimal_mechanism(&line)?;
    let reply = extract_menu(&mech)?;
    t.row("right: seller reply {2} price", price(&reply, &[0.0, 1.0]), 1.595, TOL);
    t.row("right: seller reply {1,2} price", price(&reply, &[1.0, 1.0]), 3.174, TOL);
    let eps = mech.revenue - revenue(&drawn, &line);
    t.row("right: seller regret of drawn menu", eps, 0.0, TOL);
    let horizontal = Direction::new(vec![1.0, 0.0])?;
    let gain = expected_utility(&m, &horizontal, &reply)? - expected_utility(&m, &br.direction, &reply)?;
    let rep = find_equilibrium(&m, &equilibrium_config(opts, 2)?)?;
    t.note(format!(
        "right: buyer reply to the drawn menu is {:?}; the drawn menu is an epsilon-equilibrium with seller regret {eps:.2e}",
        br.direction.sum_normalized()
    ));
    t.note(format!(
        "right: against the exact seller reply, learning about good 1 alone gains {gain:.2e}; best-response iteration converged {}, cycle detected {}",
        rep.converged, rep.cycle_detected
    ));
    Ok(t)
}

fn fig3(opts: &Options) -> Result<Table> {
    let mut t = Table::new("fig3");
    let m = model("fig3")?;
    let rep = find_equilibrium(&m, &equilibrium_config(opts, 2)?)?;
    let w = rep.direction.sum_normalized();
    t.row("alpha_1", w[0], 0.74, TOL);
    t.row("alpha_2", w[1], 0.26, TOL);
    t.row("{2} price", price(&rep.menu, &[0.0, 1.0]), 1.51, TOL);
    t.row("{1,2} price", price(&rep.menu, &[1.0, 1.0]), 2.37, TOL);
    t.row("Var log theta_1", rep.var_log_theta[0], 0.39, TOL);
    t.row("Var log theta_2", rep.var_log_theta[1], 0.03, TOL);
    t.note(format!("converged {}, verified {}", rep.converged, rep.verified()));
    Ok(t)
}

fn fig4(opts: &Options) -> Result<Table> {
    let mut t = Table::new("fig4");
    let m = model("fig4")?;
    let line = m.posterior_line(&Direction::new(vec![1.0, 0.0])?)?;
    let menu = extract_menu(&optimal_mechanism(&line)?)?;
    let (x1, x2, p) = rationing(&menu).map_or((f64::NAN, f64::NAN, f64::NAN), |o| {
        (o.lottery[0], o.lottery[1], o.price)
    });
    t.row("BR to (1,0): rationing x_1", x1, 0.9, TOL);
    t.row("BR to (1,0): rationing x_2", x2, 1.0, TOL);
    t.row("BR to (1,0): rationing price", p, 3.8, TOL);
    t.row("BR to (1,0): bundle price", price(&menu, &[1.0, 1.0]), 3.98, TOL);
    let rep = find_equilibrium(&m, &equilibrium_config(opts, 2)?)?;
    // Printed to one decimal.
    t.row("equilibrium bundle price", price(&rep.menu, &[1.0, 1.0]), 3.2, TOL_WIDE);
    t.note(format!(
        "converged {}, pure bundling {}",
        rep.converged,
        rep.is_pure_bundling()
    ));
    Ok(t)
}

fn fig6(opts: &Options) -> Result<Table> {
    let mut t = Table::new("fig6");
    let m = model("fig6")?;
    let rep = find_equilibrium(&m, &equilibrium_config(opts, 2)?)?;
    t.row("simultaneous bundle price", price(&rep.menu, &[1.0, 1.0]), 3.0, TOL_WIDE);
    t.row("simultaneous revenue", rep.revenue, 2.35, TOL_WIDE);

    let mut cfg = CommitmentConfig {
        search: search_config(opts)?,
        ..Default::default()
    };
    if let Some(step) = opts.price_step {
        cfg.fine_step = step.min(cfg.coarse_step);
    }
    let com = seller_commitment_optimum(&m, &cfg)?;
    t.row("commitment {2} price", price(&com.menu, &[0.0, 1.0]), 1.9, TOL_WIDE);
    t.row("commitment {1,2} price", price(&com.menu, &[1.0, 1.0]), 3.66, TOL_WIDE);
    t.row("commitment revenue", com.revenue, 2.92, TOL_WIDE);

    let line = m.posterior_line(&Direction::new(vec![1.0, 0.0])?)?;
    let oracle = OracleConfig {
        include_lotteries: false,
        ..oracle_config(opts)?
    };
    let br = oracle_seller_best(&line, &oracle)?;
    t.row("deterministic BR to (1,0): {2} price", price(&br.menu, &[0.0, 1.0]), 2.3, TOL_WIDE);
    t.row("deterministic BR to (1,0): {1,2} price", price(&br.menu, &[1.0, 1.0]), 3.5, TOL_WIDE);
    t.note("radius 0.5, the largest that keeps the support in the positive quadrant");
    t.note(format!("buyer learns {:?} against the committed menu", com.direction.sum_normalized()));
    Ok(t)
}

fn fig7(opts: &Options) -> Result<Table> {
    let mut t = Table::new("fig7");
    let m = model("buyer_first")?;
    let search = search_config(opts)?;
    let com = buyer_commitment_optimum(&m, &search)?;
    let w = com.direction.weights();
    t.row("ratio alpha_2/alpha_1", w[1] / w[0], 2.8, 0.1);
    let (x1, p) = rationing(&com.menu).map_or((f64::NAN, f64::NAN), |o| (o.lottery[0], o.price));
    t.row("rationing x_1", x1, 0.14, TOL);
    t.row("rationing price", p, 0.13, TOL);
    t.row("bundle price", price(&com.menu, &[1.0, 1.0]), 0.25, TOL);
    let own = expected_utility(&m, &com.direction, &com.menu)?;
    let dev = best_direction(&m, &com.menu, &search)?;
    let gain = dev.expected_utility - own;
    t.note(format!(
        "buyer deviation to {:?} gains {gain:.3e}; the pair is {}an equilibrium",
        dev.direction.weights(),
        if gain > 1e-9 { "not " } else { "" }
    ));
    Ok(t)
}
