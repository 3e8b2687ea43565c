//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::*;
use polystab_core::acoustic_model::{
    build_acoustic_discretization, check_acoustic_b2g0, check_acoustic_bg11,
};
use polystab_core::kappa_bounds::{
    estimate_kappa_numeric, webster_certificate, webster_exact_window_constant,
    webster_exact_window_product, webster_m, webster_reference_f, webster_reference_g,
    webster_windows_exact_coefficients, webster_certificate_with, S0Choice,
};
use polystab_core::perturbation_check::{
    check_almost_dissipative, check_finite_rank, check_hilbert_schmidt, check_rank_one,
    check_webster_rank_one, CheckReport, Perturbation,
};
use polystab_core::spectral_model::{
    expand, gram_matrix, rectangle_basis, webster_basis, webster_linear_damping_coefficient,
};
use polystab_core::truncation_verify::{
    assemble_wave, resolvent_sweep, simulate_decay, spectrum_check, uniform_grid, Damping,
    TruncatedSystem,
};
use polystab_core::Result;

const WEBSTER_N: usize = 200;
const ACOUSTIC_N: usize = 256;
const DECAY_STEPS: usize = 1 << 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn ok(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn webster_system(n: usize) -> Result<TruncatedSystem> {
    let b = webster_basis(2.0, n)?;
    let d = expand(|p| 1.0 - p[0], &b, n, 4 * n + 64)?;
    assemble_wave(&b, &Damping::WeakRankOne(d), n, 2.0)
}

fn golden_constants() -> Result<Outcome> {
    let cert = webster_certificate(S0Choice::Fixed(2.8))?;
    let m = webster_m();
    let ratio = cert.kappa_max / m;
    let pass = within(cert.m_r, 5.451, 0.002)
        && within(cert.m_c, 17.0664, 0.002)
        && within(cert.kappa_max, 0.1712, 0.0005)
        && within(ratio, 0.1449, 0.0005);
    ok(
        pass,
        format!(
            "M_R = {:.6}, M_C(2.8) = {:.6}, kappa_max = {:.6}, kappa/M = {:.6}",
            cert.m_r, cert.m_c, cert.kappa_max, ratio
        ),
    )
}

/// `int_0^1 e^{a x / 2} sin(pi n x) (1 - x) dx` by composite Simpson.
fn coefficient_oracle(a: f64, n: usize) -> f64 {
    let panels = 200_000;
    let h = 1.0 / panels as f64;
    let f = |x: f64| (a * x / 2.0).exp() * (PI * n as f64 * x).sin() * (1.0 - x);
    let mut s = f(0.0) + f(1.0);
    for i in 1..panels {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn closed_form_oracle() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for a in [0.0, 2.0] {
        for n in 1..=50 {
            let q = coefficient_oracle(a, n).abs();
            let c = webster_linear_damping_coefficient(a, n).abs();
            worst = worst.max((q - c).abs());
        }
    }
    ok(worst < 1e-8, format!("max |quadrature - closed form| = {worst:.3e} over a in {{0, 2}}, n <= 50"))
}

fn orthonormality() -> Result<Outcome> {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, basis) in [
        ("Webster a=0", webster_basis(0.0, 20)?),
        ("Webster a=2", webster_basis(2.0, 20)?),
        ("Rectangle 1x1", rectangle_basis(1.0, 1.0, 20)?),
    ] {
        let g = gram_matrix(&basis, 20, 128)?;
        let dev = (g - nalgebra::DMatrix::<f64>::identity(20, 20)).amax();
        pass &= dev < 1e-10;
        parts.push(format!("{name}: {dev:.2e}"));
    }
    ok(pass, parts.join(", "))
}

fn brute_force_c() -> Result<Outcome> {
    let f1 = webster_reference_f(1);
    let g2 = webster_reference_g(2);
    let c = f1.min(g2);
    let scan_min = (1..=10_000).map(webster_reference_f).fold(f64::INFINITY, f64::min);
    let g_increasing = (2..10_000).all(|n| webster_reference_g(n + 1) > webster_reference_g(n));
    let g_below_f = (2..=10_000).all(|n| webster_reference_g(n) <= webster_reference_f(n));
    let pass = within(scan_min, c, 1e-15) && g_increasing && g_below_f;
    ok(
        pass,
        format!(
            "min_n<=1e4 F(n) = {scan_min:.12}, min(F(1), G(2)) = {c:.12}, G increasing on 2..1e4: {g_increasing}"
        ),
    )
}

fn resolvent_growth() -> Result<Outcome> {
    let sys = webster_system(WEBSTER_N)?;
    let prof = resolvent_sweep(&sys, &uniform_grid(1.0, 50.0, 0.05), 0)?;
    let cert = webster_certificate(S0Choice::Fixed(2.8))?;
    let envelope = prof.envelope_ratio(cert.m_r * cert.m_0, 2.0);
    let Some(fit) = prof.fit else {
        return ok(false, "no resonance peaks to fit");
    };
    let pass = within(fit.slope, 2.0, 0.2) && envelope <= 1.0;
    ok(
        pass,
        format!(
            "exponent {:.4} +- {:.4} ({} peaks), max ||R|| / (M_R M_0 (1 + s^2)) = {envelope:.4}",
            fit.slope,
            2.0 * fit.slope_stderr,
            fit.points
        ),
    )
}

fn decay_rate() -> Result<Outcome> {
    let sys = webster_system(WEBSTER_N)?;
    let tr = simulate_decay(&sys, 1, 1000.0, DECAY_STEPS, 1)?;
    let (Some(env), Some(rnd)) = (tr.fit, tr.fit_random) else {
        return ok(false, "decay fit failed");
    };
    ok(
        within(env.slope, -1.0, 0.2),
        format!(
            "envelope slope {:.4} on [10, 1000]; random-data slope {:.4}; step-halving change {:.2e}",
            env.slope, rnd.slope, tr.step_halving_change
        ),
    )
}

fn threshold_bracketing() -> Result<Outcome> {
    let kappa = webster_certificate(S0Choice::Fixed(2.8))?.kappa_max;
    let m = webster_m();
    let wb = webster(20);
    let sq = square(10);
    let one = rank_one(&wb, 20);
    let (b, c1, c2) = multi(&wb, 20, 3);
    let fr = Perturbation::finite_rank(b.clone(), c1.clone(), c2.clone())?;
    let hs = Perturbation::hilbert_schmidt(b, c1, c2)?;
    let web = Perturbation::webster_rank_one(one.b[0].clone(), one.c1[0].clone(), one.c2[0].clone());
    let sq_b = webster_vec(&sq, 10, 0.4);
    let sq_c = webster_vec(&sq, 10, 1.1);
    let damping = smooth_damping();
    let zero_sq = sq_b.scaled(0.0);

    type Eval<'a> = Box<dyn Fn(f64) -> Result<CheckReport> + 'a>;
    let cases: Vec<(&str, Eval)> = vec![
        ("rank_one/B", Box::new(|t| check_rank_one(&zero_c(&one).scaled(t, 1.0), 2.0, 1.0, 1.0, kappa, m))),
        ("rank_one/C", Box::new(|t| check_rank_one(&zero_b(&one).scaled(1.0, t), 2.0, 1.0, 1.0, kappa, m))),
        ("webster_rank_one/B", Box::new(|t| check_webster_rank_one(&zero_c(&web).scaled(t, 1.0), kappa, m))),
        ("webster_rank_one/C", Box::new(|t| check_webster_rank_one(&zero_b(&web).scaled(1.0, t), kappa, m))),
        ("finite_rank/B", Box::new(|t| check_finite_rank(&zero_c(&fr).scaled(t, 1.0), 2.0, 1.0, 1.0, kappa, m))),
        ("finite_rank/C", Box::new(|t| check_finite_rank(&zero_b(&fr).scaled(1.0, t), 2.0, 1.0, 1.0, kappa, m))),
        ("hilbert_schmidt/B", Box::new(|t| check_hilbert_schmidt(&zero_c(&hs).scaled(t, 1.0), 2.0, 1.0, 1.0, kappa, m))),
        ("hilbert_schmidt/C", Box::new(|t| check_hilbert_schmidt(&zero_b(&hs).scaled(1.0, t), 2.0, 1.0, 1.0, kappa, m))),
        ("almost_dissipative/B", Box::new(|t| check_almost_dissipative(&sq_b.scaled(t), &zero_sq, &damping, kappa, 64))),
        ("almost_dissipative/C", Box::new(|t| check_almost_dissipative(&zero_sq, &sq_c.scaled(t), &damping, kappa, 64))),
        ("acoustic_bg11/B", Box::new(|t| check_acoustic_bg11(&acoustic_b_side().scaled(t, 1.0), 1.0, kappa))),
        ("acoustic_bg11/C", Box::new(|t| check_acoustic_bg11(&acoustic_c_side(false).scaled(1.0, t), 1.0, kappa))),
        ("acoustic_b2g0/B", Box::new(|t| check_acoustic_b2g0(&acoustic_b_side().scaled(t, 1.0), 1.0, kappa))),
        ("acoustic_b2g0/C", Box::new(|t| check_acoustic_b2g0(&acoustic_c_side(true).scaled(1.0, t), 1.0, kappa))),
    ];
    let mut failed = Vec::new();
    for (name, eval) in &cases {
        let br = bracket(eval)?;
        if !br.flips() {
            failed.push(format!("{name} ({}: 0.99x {}, 1.01x {})", br.condition, br.below, br.above));
        }
    }
    if failed.is_empty() {
        ok(true, format!("{} checker sides flip between 0.99x and 1.01x", cases.len()))
    } else {
        ok(false, format!("no flip: {}", failed.join("; ")))
    }
}

fn conservativeness() -> Result<Outcome> {
    let sys = webster_system(WEBSTER_N)?;
    let est = estimate_kappa_numeric(&sys.matrix, 2, &uniform_grid(0.0, 50.0, 0.05))?;
    let cert = webster_certificate(S0Choice::Fixed(2.8))?;
    ok(
        est.kappa >= cert.kappa_max,
        format!(
            "numerical kappa (n=2) = {:.4} (sup {:.4} at s = {:.3}) >= certified {:.4}",
            est.kappa, est.sup_norm, est.argmax_s, cert.kappa_max
        ),
    )
}

fn acoustic_decay() -> Result<Outcome> {
    let disc = build_acoustic_discretization(ACOUSTIC_N, 1.0, 1.0)?;
    let spec = spectrum_check(&disc.system)?;
    let tr = simulate_decay(&disc.system, 1, 1000.0, DECAY_STEPS, 1)?;
    let Some(fit) = tr.fit else {
        return ok(false, "decay fit failed");
    };
    let monotone = tr.max_energy_increase <= 1e-9;
    ok(
        spec.pass && monotone && within(fit.slope, -1.0, 0.2),
        format!(
            "max Re lambda = {:.3e}, max relative energy increase = {:.2e}, envelope slope {:.4}",
            spec.max_real, tr.max_energy_increase, fit.slope
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Result<Outcome>, Option<f64>);
    let criteria: [Criterion; 9] = [
        ("golden constants", golden_constants, Some(1.0)),
        ("closed-form coefficient oracle", closed_form_oracle, Some(1.0)),
        ("orthonormality", orthonormality, None),
        ("brute-force window constant", brute_force_c, None),
        ("resolvent growth (Webster N=200)", resolvent_growth, Some(60.0)),
        ("decay rate (Webster N=200)", decay_rate, Some(60.0)),
        ("threshold bracketing", threshold_bracketing, None),
        ("conservativeness of certified kappa", conservativeness, None),
        ("acoustic decay (N=256)", acoustic_decay, None),
    ];
    let mut failures = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match out {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = limit.map_or(true, |l| secs < l);
        let limit_note = limit.map_or(String::new(), |l| format!(", limit {l} s"));
        let verdict = if pass && in_time { "PASS" } else { "FAIL" };
        if verdict == "FAIL" {
            failures += 1;
        }
        println!("{verdict} {name}: {detail} [{secs:.2} s{limit_note}]");
    }
    info_lines();
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}

fn info_lines() {
    let conv = || -> Result<String> {
        let grid = uniform_grid(0.0, 50.0, 0.05);
        let k100 = estimate_kappa_numeric(&webster_system(100)?.matrix, 2, &grid)?;
        let k200 = estimate_kappa_numeric(&webster_system(WEBSTER_N)?.matrix, 2, &grid)?;
        Ok(format!(
            "numerical kappa N=100: {:.6}, N=200: {:.6}, relative change {:.2e}",
            k100.kappa,
            k200.kappa,
            (k200.kappa - k100.kappa).abs() / k200.kappa
        ))
    };
    match conv() {
        Ok(s) => println!("INFO truncation convergence: {s}"),
        Err(e) => println!("INFO truncation convergence: error {e}"),
    }
    let exact = || -> Result<String> {
        let cert = webster_certificate_with(&webster_windows_exact_coefficients(), S0Choice::Fixed(2.8))?;
        let scan = (1..=10_000).map(webster_exact_window_product).fold(f64::INFINITY, f64::min);
        let reference = webster_reference_f(1).min(webster_reference_g(2));
        Ok(format!(
            "min_n sqrt(mu_n)|<phi_n, 1-x>| = {scan:.6} (n <= 1e4) vs reference c = {reference:.6}; \
             exact c = {:.6}, corrected M_R = {:.6}, M_C(2.8) = {:.6}, kappa_max = {:.6}, kappa/M = {:.6}",
            webster_exact_window_constant(),
            cert.m_r,
            cert.m_c,
            cert.kappa_max,
            cert.kappa_max / webster_m()
        ))
    };
    match exact() {
        Ok(s) => println!("INFO exact-coefficient certificate: {s}"),
        Err(e) => println!("INFO exact-coefficient certificate: error {e}"),
    }
}
