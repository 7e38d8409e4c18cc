//! Reproduction and property checks. Every test prints one `[PASS]`/`[FAIL]`
//! line straight to stdout (bypassing the harness capture) and then asserts.

use std::io::Write;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use bundle_eq::auxiliary::solve_auxiliary;
use bundle_eq::equilibrium::{
    check_pure_bundling_condition, find_equilibrium, seller_commitment_optimum, verify_ordering,
    CommitmentConfig, EquilibriumConfig, EquilibriumReport,
};
use bundle_eq::ironing::virtual_value;
use bundle_eq::learner::{best_direction, buyer_commitment_optimum, expected_utility, SearchConfig};
use bundle_eq::mechanism::{
    extract_menu, incentive_violation, optimal_mechanism, separate_sales_prices, worst_off_certificate,
};
use bundle_eq::menu::{Menu, MenuOption};
use bundle_eq::oracle::{knapsack_vertex_max, mc_validate, oracle_seller_best, OracleConfig};
use bundle_eq::presets;
use bundle_eq::value_model::{Direction, Scenario, ValueModel};

/// Printed-precision tolerance on prices, weights, variances and revenues.
const TOL: f64 = 0.01;
/// Widened tolerance for the seller-first commitment example.
const TOL_WIDE: f64 = 0.05;
/// Wall-clock limit per reproduction.
const TIME_LIMIT: f64 = 60.0;

struct Criterion {
    id: &'static str,
    title: &'static str,
    start: Instant,
    notes: Vec<String>,
    failed: usize,
}

impl Criterion {
    fn new(id: &'static str, title: &'static str) -> Self {
        Criterion {
            id,
            title,
            start: Instant::now(),
            notes: Vec::new(),
            failed: 0,
        }
    }

    fn ok(&mut self, label: impl Into<String>, pass: bool) {
        let label = label.into();
        if !pass {
            self.failed += 1;
            self.notes.push(format!("{label} FAIL"));
        } else {
            self.notes.push(label);
        }
    }

    fn near(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let dev = (got - want).abs();
        self.ok(
            format!("{label} {got:.4} vs {want} |Δ|={dev:.4} (tol {tol})"),
            dev <= tol,
        );
    }

    fn within(&mut self, label: &str, got: f64, lo: f64, hi: f64) {
        self.ok(format!("{label} {got:.4} in [{lo}, {hi}]"), (lo..=hi).contains(&got));
    }

    fn finish(mut self, time_limit: Option<f64>) {
        let secs = self.start.elapsed().as_secs_f64();
        if let Some(limit) = time_limit {
            self.ok(format!("time {secs:.1}s (limit {limit}s)"), secs <= limit);
        }
        let status = if self.failed == 0 { "PASS" } else { "FAIL" };
        let line = format!("[{status}] {} {}: {}\n", self.id, self.title, self.notes.join("; "));
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(line.as_bytes());
        let _ = out.flush();
        assert_eq!(self.failed, 0, "{line}");
    }
}

fn model(s: Scenario) -> ValueModel {
    ValueModel::new(s).unwrap()
}

fn option_price(menu: &Menu, lottery: &[f64]) -> Option<f64> {
    menu.options
        .iter()
        .find(|o| o.lottery.iter().zip(lottery).all(|(a, b)| (a - b).abs() < 1e-9))
        .map(|o| o.price)
}

fn rationing(menu: &Menu) -> Option<&MenuOption> {
    menu.options
        .iter()
        .find(|o| o.lottery.iter().any(|&x| x > 1e-9 && x < 1.0 - 1e-9))
}

fn equilibrium(s: Scenario) -> (ValueModel, EquilibriumReport) {
    let m = model(s);
    let rep = find_equilibrium(&m, &EquilibriumConfig::default()).unwrap();
    (m, rep)
}

fn equilibrium_checks(c: &mut Criterion, rep: &EquilibriumReport) {
    c.ok(format!("converged in {} iterations", rep.iterations), rep.converged);
    c.ok("verified", rep.verified());
}

#[test]
fn intro_pure_bundling_equilibrium() {
    let mut c = Criterion::new("#1", "intro equilibrium");
    let (_, rep) = equilibrium(presets::intro());
    equilibrium_checks(&mut c, &rep);
    c.ok("pure bundling", rep.is_pure_bundling());
    let w = rep.direction.sum_normalized();
    c.near("alpha_1", w[0], 0.5, TOL);
    c.near("alpha_2", w[1], 0.5, TOL);
    let p = option_price(&rep.menu, &[1.0, 1.0]).unwrap_or(f64::NAN);
    c.near("bundle price", p, 3.12, TOL);
    c.finish(Some(TIME_LIMIT));
}

#[test]
fn perturbed_intro_nested_equilibrium() {
    let mut c = Criterion::new("#2", "perturbed intro equilibrium");
    let (m, rep) = equilibrium(presets::perturbed());
    equilibrium_checks(&mut c, &rep);
    c.ok("nested", rep.nested && rep.vertical);
    c.near("{2} price", option_price(&rep.menu, &[0.0, 1.0]).unwrap_or(f64::NAN), 1.59, TOL);
    c.near("{1,2} price", option_price(&rep.menu, &[1.0, 1.0]).unwrap_or(f64::NAN), 3.16, TOL);
    let line = m.posterior_line(&rep.direction).unwrap();
    let mech = optimal_mechanism(&line).unwrap();
    let ss = separate_sales_prices(&mech, &line);
    c.near("separate-sales p1", ss[0].unwrap_or(f64::NAN), 1.57, TOL);
    c.near("separate-sales p2", ss[1].unwrap_or(f64::NAN), 1.59, TOL);
    c.finish(Some(TIME_LIMIT));
}

#[test]
fn fig3_nested_equilibrium() {
    let mut c = Criterion::new("#3", "fig3 equilibrium");
    let (_, rep) = equilibrium(presets::fig3());
    equilibrium_checks(&mut c, &rep);
    let w = rep.direction.sum_normalized();
    c.near("alpha_1", w[0], 0.74, TOL);
    c.near("alpha_2", w[1], 0.26, TOL);
    c.near("{2} price", option_price(&rep.menu, &[0.0, 1.0]).unwrap_or(f64::NAN), 1.51, TOL);
    c.near("{1,2} price", option_price(&rep.menu, &[1.0, 1.0]).unwrap_or(f64::NAN), 2.37, TOL);
    c.near("Var log theta_1", rep.var_log_theta[0], 0.39, TOL);
    c.near("Var log theta_2", rep.var_log_theta[1], 0.03, TOL);
    c.finish(Some(TIME_LIMIT));
}

#[test]
fn fig4_rationing_and_bundling() {
    let mut c = Criterion::new("#4", "fig4 negative correlation");
    let m = model(presets::fig4());
    let line = m.posterior_line(&Direction::new(vec![1.0, 0.0]).unwrap()).unwrap();
    let menu = extract_menu(&optimal_mechanism(&line).unwrap()).unwrap();
    match rationing(&menu) {
        Some(o) => {
            c.near("rationing x_1", o.lottery[0], 0.9, TOL);
            c.near("rationing x_2", o.lottery[1], 1.0, TOL);
            c.near("rationing price", o.price, 3.8, TOL);
        }
        None => c.ok("rationing option present", false),
    }
    c.near("BR bundle price", option_price(&menu, &[1.0, 1.0]).unwrap_or(f64::NAN), 3.98, TOL);

    let rep = find_equilibrium(&m, &EquilibriumConfig::default()).unwrap();
    equilibrium_checks(&mut c, &rep);
    c.ok("pure bundling", rep.is_pure_bundling());
    // The caption prints this price to one decimal.
    let p = option_price(&rep.menu, &[1.0, 1.0]).unwrap_or(f64::NAN);
    c.near("equilibrium bundle price (printed 3.2)", p, 3.2, 0.05);
    c.finish(Some(TIME_LIMIT));
}

#[test]
fn fig6_seller_first_commitment() {
    let mut c = Criterion::new("#5", "seller-first commitment");
    let m = model(presets::fig6());
    let rep = find_equilibrium(&m, &EquilibriumConfig::default()).unwrap();
    equilibrium_checks(&mut c, &rep);
    c.near("simultaneous bundle", option_price(&rep.menu, &[1.0, 1.0]).unwrap_or(f64::NAN), 3.0, TOL_WIDE);
    c.near("simultaneous revenue", rep.revenue, 2.35, TOL_WIDE);

    let com = seller_commitment_optimum(&m, &CommitmentConfig::default()).unwrap();
    c.near("commitment {2}", option_price(&com.menu, &[0.0, 1.0]).unwrap_or(f64::NAN), 1.9, TOL_WIDE);
    c.near("commitment {1,2}", option_price(&com.menu, &[1.0, 1.0]).unwrap_or(f64::NAN), 3.66, TOL_WIDE);
    c.near("commitment revenue", com.revenue, 2.92, TOL_WIDE);

    let line = m.posterior_line(&Direction::new(vec![1.0, 0.0]).unwrap()).unwrap();
    let cfg = OracleConfig {
        include_lotteries: false,
        ..Default::default()
    };
    let br = oracle_seller_best(&line, &cfg).unwrap();
    c.near("BR to (1,0) {2}", option_price(&br.menu, &[0.0, 1.0]).unwrap_or(f64::NAN), 2.3, TOL_WIDE);
    c.near("BR to (1,0) {1,2}", option_price(&br.menu, &[1.0, 1.0]).unwrap_or(f64::NAN), 3.5, TOL_WIDE);
    c.finish(Some(TIME_LIMIT));
}

#[test]
fn buyer_first_commitment() {
    let mut c = Criterion::new("#6", "buyer-first commitment");
    let m = model(presets::buyer_first());
    let search = SearchConfig::default();
    let com = buyer_commitment_optimum(&m, &search).unwrap();
    let w = com.direction.weights();
    c.near("ratio alpha_2/alpha_1", w[1] / w[0], 2.8, 0.1);
    match rationing(&com.menu) {
        Some(o) => {
            c.near("rationing x_1", o.lottery[0], 0.14, TOL);
            c.near("rationing price", o.price, 0.13, TOL);
        }
        None => c.ok("rationing option present", false),
    }
    c.within("bundle price", option_price(&com.menu, &[1.0, 1.0]).unwrap_or(f64::NAN), 0.25, 0.26);
    let own = expected_utility(&m, &com.direction, &com.menu).unwrap();
    let dev = best_direction(&m, &com.menu, &search).unwrap();
    let gain = dev.expected_utility - own;
    c.ok(format!("buyer deviation gain {gain:.3e} > 0"), gain > 1e-9);
    c.finish(Some(TIME_LIMIT));
}

fn random_scenario(rng: &mut ChaCha8Rng, k: usize, rho: Option<f64>) -> Scenario {
    let mu: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..3.0)).collect();
    let sigma: Vec<f64> = (0..k).map(|_| rng.random_range(0.3..2.0)).collect();
    let lo = -1.0 / (k as f64 - 1.0);
    let rho = rho.unwrap_or_else(|| rng.random_range((0.9 * lo).max(-0.9)..0.9));
    let r_max = mu.iter().zip(&sigma).map(|(m, s)| m / s).fold(f64::INFINITY, f64::min);
    let radius = r_max.min(rng.random_range(0.3..1.5));
    Scenario::new(mu, sigma, rho, radius).unwrap()
}

fn random_direction(rng: &mut ChaCha8Rng, k: usize) -> Direction {
    loop {
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        if w.iter().map(|x| x * x).sum::<f64>() > 0.05 {
            return Direction::new(w).unwrap();
        }
    }
}

#[test]
fn property_regularity() {
    let mut c = Criterion::new("#7a", "signal distribution regularity (30 scenarios)");
    let mut rng = ChaCha8Rng::seed_from_u64(7001);
    let mut bad = Vec::new();
    for n in 0..30 {
        let k = 2 + n % 3;
        let m = model(random_scenario(&mut rng, k, None));
        let dist = m.dist();
        let grid: Vec<f64> = (1..1000).map(|j| j as f64 / 1000.0).collect();
        let phi: Vec<f64> = grid.iter().map(|&t| virtual_value(dist, t, 0.0)).collect();
        let increasing = grid
            .iter()
            .zip(phi.windows(2))
            .filter(|(&t, _)| t < 0.5)
            .all(|(_, w)| w[1] > w[0]);
        let positive = grid.iter().zip(&phi).filter(|(&t, _)| t > 0.5).all(|(_, &v)| v > 0.0);
        let tail = [1e-6, 1e-4, 1e-2].map(|t| virtual_value(dist, t, 0.0));
        let low_end = tail[0] < -100.0 && tail[0] < tail[1] && tail[1] < tail[2];
        if !(increasing && positive && low_end) {
            bad.push(n);
        }
    }
    c.ok(format!("failing scenarios {bad:?}"), bad.is_empty());
    c.finish(None);
}

#[test]
fn property_knapsack_matches_vertices() {
    let mut c = Criterion::new("#7b", "auxiliary knapsack vs vertex enumeration (200 instances)");
    let mut rng = ChaCha8Rng::seed_from_u64(7002);
    let (mut worst, mut checked) = (0.0_f64, 0);
    for _ in 0..200 {
        let k = rng.random_range(2..5);
        // Sign convention: Σa ≥ 0 with at least one negative slope.
        let a: Vec<f64> = loop {
            let mut a: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            a[0] = -a[0].abs() - 0.1;
            if a.iter().sum::<f64>() >= 0.0 {
                break a;
            }
        };
        let b: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..4.0)).collect();
        let greedy = solve_auxiliary(&a, &b).unwrap();
        if let Some((_, v)) = knapsack_vertex_max(&a, &b) {
            worst = worst.max((greedy.value - v).abs());
            checked += 1;
        }
    }
    c.ok(format!("{checked} instances, max |Δ| = {worst:.2e} (tol 1e-9)"), worst <= 1e-9 && checked > 150);
    c.finish(None);
}

#[test]
fn property_certificates() {
    let mut c = Criterion::new("#7c", "worst-off certificates and IC/IR (50 lines)");
    let mut rng = ChaCha8Rng::seed_from_u64(7003);
    let (mut failed, mut worst_ic) = (0, 0.0_f64);
    for _ in 0..50 {
        let k = rng.random_range(2..5);
        let m = model(random_scenario(&mut rng, k, None));
        let line = m.posterior_line(&random_direction(&mut rng, k)).unwrap();
        let mech = optimal_mechanism(&line).unwrap();
        if !worst_off_certificate(&mech, &line).passed {
            failed += 1;
        }
        for _ in 0..100 {
            let t: f64 = rng.random_range(0.0..1.0);
            worst_ic = worst_ic.max(incentive_violation(&mech, &line, t) / (1.0 + line.value_span()));
        }
    }
    c.ok(format!("certificate failures {failed}"), failed == 0);
    c.ok(format!("max relative IC/IR violation {worst_ic:.2e} (tol 1e-8)"), worst_ic <= 1e-8);
    c.finish(None);
}

#[test]
fn property_oracle_gap() {
    let mut c = Criterion::new("#7d", "optimal mechanism vs brute-force oracle (20 lines)");
    let mut rng = ChaCha8Rng::seed_from_u64(7004);
    let cfg = OracleConfig::default();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let m = model(random_scenario(&mut rng, 2, None));
        let line = m.posterior_line(&random_direction(&mut rng, 2)).unwrap();
        let mech = optimal_mechanism(&line).unwrap();
        let oracle = oracle_seller_best(&line, &cfg).unwrap();
        worst = worst.max(oracle.revenue - mech.revenue);
    }
    c.ok(format!("max oracle - optimal = {worst:.2e} (tol 1e-3)"), worst <= 1e-3);
    c.finish(Some(600.0));
}

/// EU on a grid of angles in `(0, π)`; the first half is vertical at ρ = 0.
fn eu_grid(m: &ValueModel, menu: &Menu, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut vertical, mut horizontal) = (Vec::new(), Vec::new());
    for j in 1..n {
        let angle = std::f64::consts::PI * j as f64 / n as f64;
        if 2 * j == n {
            continue;
        }
        let eu = expected_utility(m, &Direction::from_angle(angle), menu).unwrap();
        if 2 * j < n {
            vertical.push(eu);
        } else {
            horizontal.push(eu);
        }
    }
    (vertical, horizontal)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn property_learning_preferences() {
    let mut c = Criterion::new("#7e", "learning preferences at zero correlation (3 x 20 menus)");
    let mut rng = ChaCha8Rng::seed_from_u64(7005);
    let (mut ss_gap, mut nb_fail, mut oo_fail) = (0.0_f64, 0, 0);
    for _ in 0..20 {
        let m = model(random_scenario(&mut rng, 2, Some(0.0)));
        let mu = &m.scenario().mu;
        let p1 = mu[0] * rng.random_range(0.5..1.3);
        let p2 = mu[1] * rng.random_range(0.5..1.3);
        let menu = Menu::new(vec![
            MenuOption::bundle(2, &[0], p1),
            MenuOption::bundle(2, &[1], p2),
            MenuOption::bundle(2, &[0, 1], p1 + p2),
        ])
        .unwrap();
        let w = random_direction(&mut rng, 2);
        let (a1, a2) = (w.weights()[0], w.weights()[1]);
        let e = expected_utility(&m, &Direction::new(vec![a1, a2]).unwrap(), &menu).unwrap();
        let f = expected_utility(&m, &Direction::new(vec![a1, -a2]).unwrap(), &menu).unwrap();
        ss_gap = ss_gap.max((e - f).abs());
    }
    for _ in 0..20 {
        let m = model(random_scenario(&mut rng, 2, Some(0.0)));
        let mu = &m.scenario().mu;
        let base = rng.random_range(0..2);
        let pb = mu[base] * rng.random_range(0.5..1.3);
        let pbundle = pb + mu[1 - base] * rng.random_range(0.5..1.3);
        let menu = Menu::new(vec![
            MenuOption::bundle(2, &[base], pb),
            MenuOption::bundle(2, &[0, 1], pbundle),
        ])
        .unwrap();
        let (v, h) = eu_grid(&m, &menu, 90);
        if max(&v) < max(&h) - 1e-9 {
            nb_fail += 1;
        }
    }
    for n in 0..20 {
        let m = model(random_scenario(&mut rng, 2, Some(0.0)));
        let mu = &m.scenario().mu;
        let p1 = mu[0] * rng.random_range(0.5..1.3);
        let p2 = mu[1] * rng.random_range(0.5..1.3);
        let options = match n % 3 {
            0 => vec![MenuOption::bundle(2, &[0], p1)],
            1 => vec![MenuOption::bundle(2, &[1], p2)],
            _ => vec![MenuOption::bundle(2, &[0], p1), MenuOption::bundle(2, &[1], p2)],
        };
        let menu = Menu::new(options).unwrap();
        let (v, h) = eu_grid(&m, &menu, 90);
        if max(&h) < max(&v) - 1e-9 {
            oo_fail += 1;
        }
    }
    c.ok(format!("separate sales mirror gap {ss_gap:.2e} (tol 1e-8)"), ss_gap <= 1e-8);
    c.ok(format!("nested menus preferring horizontal {nb_fail}"), nb_fail == 0);
    c.ok(format!("no-bundle menus preferring vertical {oo_fail}"), oo_fail == 0);
    c.finish(None);
}

#[test]
fn property_equilibrium_structure() {
    let mut c = Criterion::new("#7f", "converged equilibria: vertical, nested, ordering, pure bundling");
    let mut rng = ChaCha8Rng::seed_from_u64(7006);
    let mut scenarios: Vec<(String, Scenario)> = ["intro", "perturbed", "fig3", "fig4", "fig6"]
        .iter()
        .map(|n| (n.to_string(), presets::by_name(n).unwrap()))
        .collect();
    for j in 0..6 {
        scenarios.push((format!("random{j}"), random_scenario(&mut rng, 2, None)));
    }
    // Scenarios satisfying the pure-bundling condition: μ_i ∝ σ_i² + ρ σ_i σ_j.
    for j in 0..3 {
        let s1: f64 = rng.random_range(0.5..1.5);
        let s2: f64 = rng.random_range(0.5..1.5);
        let rho: f64 = rng.random_range(-0.5..0.5);
        let scale = 3.0 / (s1 * s1 + s2 * s2);
        let mu = vec![scale * (s1 * s1 + rho * s1 * s2), scale * (s2 * s2 + rho * s1 * s2)];
        if mu.iter().any(|&m| m <= 0.2) {
            continue;
        }
        let sc = Scenario::fit_radius(mu, vec![s1, s2], rho).unwrap();
        let sc = Scenario::new(sc.mu.clone(), sc.sigma.clone(), rho, sc.radius.min(1.0)).unwrap();
        scenarios.push((format!("pure{j}"), sc));
    }

    let (mut converged, mut structure_fail, mut ordering_fail, mut pure_fail, mut pure_checked) =
        (0, Vec::new(), Vec::new(), Vec::new(), 0);
    let search = SearchConfig::default();
    for (name, sc) in &scenarios {
        let m = model(sc.clone());
        let rep = find_equilibrium(&m, &EquilibriumConfig::default()).unwrap();
        if check_pure_bundling_condition(sc) {
            pure_checked += 1;
            if !(rep.converged && rep.is_pure_bundling()) {
                pure_fail.push(name.clone());
            }
        }
        if !rep.converged {
            continue;
        }
        converged += 1;
        let own = expected_utility(&m, &rep.direction, &rep.nested_menu).unwrap();
        let br = best_direction(&m, &rep.nested_menu, &search).unwrap();
        let tol = 1e-5 * m.scenario().mu.iter().sum::<f64>();
        if !(rep.vertical && rep.nested && br.expected_utility - own <= tol) {
            structure_fail.push(name.clone());
        }
        if !verify_ordering(&m, &rep).map(|o| o.passed).unwrap_or(false) {
            ordering_fail.push(name.clone());
        }
    }
    c.ok(format!("{converged}/{} converged", scenarios.len()), converged > 0);
    c.ok(format!("not vertical+nested or reduced menu fails {structure_fail:?}"), structure_fail.is_empty());
    c.ok(format!("ordering failures {ordering_fail:?}"), ordering_fail.is_empty());
    c.ok(format!("pure-bundling condition on {pure_checked}, failures {pure_fail:?}"), pure_fail.is_empty() && pure_checked > 0);
    c.finish(None);
}

#[test]
fn property_monte_carlo() {
    let mut c = Criterion::new("#7g", "Monte Carlo distribution validation (1e6 draws)");
    let cfg = OracleConfig::default();
    let rep = mc_validate(&model(presets::intro()), &cfg).unwrap();
    c.ok(
        format!("intro: density sup-norm {:.4} (tol 0.02, max |z| {:.2})", rep.density.sup_norm, rep.density.max_z),
        rep.density.sup_norm <= 0.02,
    );
    c.ok(
        format!(
            "intro: linearity max |z| {:.2}, {} of {} cells beyond 3 SE",
            rep.linearity.max_z, rep.linearity.beyond_3se, rep.linearity.cells
        ),
        rep.linearity.beyond_3se == 0,
    );
    let call_z = rep.calls.iter().fold(0.0_f64, |m, cc| m.max(cc.z.abs()));
    c.ok(format!("intro: call values max |z| {call_z:.2} (tol 3)"), call_z <= 3.0);

    // Three goods: many more cells, so the per-cell bound is Bonferroni
    // corrected at family level 0.01.
    let sc = Scenario::new(vec![2.0, 2.5, 3.0], vec![1.0, 1.5, 1.0], 0.3, 1.0).unwrap();
    let rep = mc_validate(&model(sc), &cfg).unwrap();
    c.ok(format!("3 goods: density sup-norm {:.4} (tol 0.02)", rep.density.sup_norm), rep.density.sup_norm <= 0.02);
    let bound = bonferroni_z(0.01 / rep.linearity.cells as f64);
    c.ok(
        format!(
            "3 goods: linearity max |z| {:.2} over {} cells (bound {bound:.2})",
            rep.linearity.max_z, rep.linearity.cells
        ),
        rep.linearity.max_z <= bound,
    );
    let call_z = rep.calls.iter().fold(0.0_f64, |m, cc| m.max(cc.z.abs()));
    c.ok(format!("3 goods: call values max |z| {call_z:.2} (tol 3)"), call_z <= 3.0);
    c.finish(None);
}

/// Two-sided normal critical value for tail probability `p`.
fn bonferroni_z(p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 10.0_f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if erfc(mid / std::f64::consts::SQRT_2) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

