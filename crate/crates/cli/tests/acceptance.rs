//! Acceptance run: one pass/fail line per criterion, nonzero exit if any
//! criterion fails.

use std::time::{Duration, Instant};

use cwbnlw_cli::modes::{audit, coupling, diophantine, scan, separation};
use cwbnlw_cli::RunConfig;
use cwbnlw_core::lattice::bracket;
use cwbnlw_core::separation::cluster_eigen_variation;
use cwbnlw_core::{
    assemble, cluster_decompose, resonant_set, singular_sites, solve_coupled, verify_solution, ConvolutionConfig,
    FourierField, LatticeIndex, OperatorKind, ProblemParams, SolverConfig,
};
use cwbnlw_oracles as oracle;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn reference() -> RunConfig {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/reference.toml"))
        .expect("reference config");
    let cfg = RunConfig::from_toml(&text).expect("reference config parses");
    cfg.validate().expect("reference config validates");
    cfg
}

fn params(cfg: &RunConfig, eps: f64) -> ProblemParams {
    cfg.problem.params().expect("valid problem").with_eps(eps)
}

fn frequency_amplitude(cfg: &RunConfig) -> Outcome {
    let p0 = cfg.problem.p0;
    let start = Instant::now();
    let mut points = Vec::new();
    for eps in [1e-4, 2e-4, 5e-4, 1e-3] {
        let p = params(cfg, eps);
        let sol = match solve_coupled(p0, &p, &SolverConfig::default()) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("eps {eps}: {e}")),
        };
        points.push((eps * eps, sol.state.lambda_sq - p.lambda0 * p.lambda0));
    }
    let slope = diophantine::fit_slope(&points);
    let want = 0.75 * bracket(&cfg.problem.m0).powf(cfg.problem.alpha) * p0 * p0;
    let rel = (slope - want).abs() / want;
    let elapsed = start.elapsed();
    outcome(
        rel < 0.02 && elapsed < Duration::from_secs(300),
        format!("slope {slope:.10} vs {want:.10}, rel {rel:.2e}, {elapsed:.1?}"),
    )
}

fn oracle_equivalence(cfg: &RunConfig) -> Outcome {
    let start = Instant::now();
    let p = params(cfg, cfg.problem.eps);
    let sol = match solve_coupled(cfg.problem.p0, &p, &SolverConfig::default()) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let full = oracle::full_system_newton(
        &oracle::FullSystem {
            d: p.d,
            m0: cfg.problem.m0.clone(),
            rho: p.rho,
            alpha: p.alpha,
            eps: p.eps,
            p0: cfg.problem.p0,
            n_trunc: 16,
        },
        30,
        1e-15,
    );
    // coefficients below the floor are compared at the floor's scale
    let floor = 1e-6;
    let mut worst = 0.0f64;
    for (s, v) in &full.coeffs {
        let ours = sol.u.get(&LatticeIndex::from_coords(s));
        worst = worst.max((ours - v).abs() / v.abs().max(floor));
    }
    let lambda_rel = (full.lambda - sol.state.lambda).abs() / full.lambda;
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-9 && lambda_rel < 1e-9 && elapsed < Duration::from_secs(60),
        format!(
            "{} coefficients, worst rel {worst:.2e} (floor {floor:e}), lambda rel {lambda_rel:.2e}, {elapsed:.1?}",
            full.coeffs.len()
        ),
    )
}

fn full_residual(cfg: &RunConfig) -> Outcome {
    let p = params(cfg, cfg.problem.eps);
    let run = || -> cwbnlw_core::Result<_> {
        let sol = solve_coupled(cfg.problem.p0, &p, &SolverConfig::default())?;
        verify_solution(
            &sol.u,
            sol.state.lambda_sq,
            &p,
            cfg.solver.audit_radius,
            cfg.solver.gevrey_c,
            &Default::default(),
        )
    };
    match run() {
        Ok(r) => {
            let tail_bound = p.eps.powf(0.125);
            outcome(
                r.sup_residual < 1e-10 && r.gevrey_tail < tail_bound,
                format!(
                    "sup residual {:.2e}, gevrey tail {:.2e} < {tail_bound:.2e}",
                    r.sup_residual, r.gevrey_tail
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn newton_contraction(cfg: &RunConfig) -> Outcome {
    match audit::contraction(cfg) {
        Ok(c) => outcome(
            c.contraction_ok && c.tail_ok,
            format!(
                "{} steps checked at power {}, {} tail splits at slack {}, residuals {:?}",
                c.steps.len(),
                c.power,
                c.tail.len(),
                cfg.audit.tail_slack,
                c.residuals.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>()
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn certificates(cfg: &RunConfig) -> Outcome {
    let samples = audit::certificates(cfg);
    let tol = 1e-12;
    let failed: Vec<String> = samples
        .iter()
        .filter(|s| !s.pass(tol))
        .map(|s| format!("p0 {}: {:?}", s.p0, s.error))
        .collect();
    let worst = samples.iter().map(|s| s.inverse_mismatch).fold(0.0, f64::max);
    let regime = samples.iter().map(|s| s.regime).fold(0.0, f64::max);
    outcome(
        failed.is_empty() && !samples.is_empty(),
        format!(
            "{} samples, max regime quantity {regime:.2e}, worst Neumann mismatch {worst:.2e}{}",
            samples.len(),
            if failed.is_empty() {
                String::new()
            } else {
                format!(", failures {failed:?}")
            }
        ),
    )
}

fn separation_check(cfg: &RunConfig) -> Outcome {
    let start = Instant::now();
    match separation::compute(cfg) {
        Ok(r) => outcome(
            r.pass(),
            format!(
                "{} samples, separated {}, max k {} <= {:.0} ({}), control {:?} violates {}, {:.1?}",
                r.samples.len(),
                r.separated,
                r.samples.iter().map(|s| s.chain.k_max).max().unwrap_or(0),
                r.chain_bound,
                if r.samples.iter().all(|s| s.chain.exact) {
                    "exact"
                } else {
                    "search lower bounds"
                },
                r.control.iter().map(|c| (c.radius, c.longest)).collect::<Vec<_>>(),
                r.control_violates,
                start.elapsed()
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn eigen_variation(cfg: &RunConfig) -> Outcome {
    let p = params(cfg, cfg.problem.eps);
    let sol = match solve_coupled(cfg.problem.p0, &p, &SolverConfig::default()) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let lambda = sol.state.lambda;
    let n = 256i64;
    let nf = n as f64;
    let threshold = 2.0 * nf.powf(p.alpha);
    let run = || -> cwbnlw_core::Result<Outcome> {
        let sites = singular_sites(p.d, lambda, n, threshold)?;
        let clusters = cluster_decompose(&sites, threshold)?;
        let s = resonant_set(&p);
        let radius = nf.powf(p.alpha / 2.0).floor() as i64;
        let n_min = nf.powf(1.0 / 6.0);
        let bound = 0.5 * 2.0 * lambda * nf.powf(1.0 / 6.0 - p.alpha);
        let mut far = 0;
        let mut worst_rel = 0.0f64;
        let mut min_der = f64::INFINITY;
        let mut ok = true;
        for c in &clusters {
            let nb = c.neighbourhood(radius, &s);
            if nb.is_empty() || !nb.iter().all(|x| (x.n.abs() as f64) > n_min) {
                continue;
            }
            far += 1;
            let ev = cluster_eigen_variation(&sol.u, &p, nb, lambda, 1e-6, &ConvolutionConfig::default())?;
            match ev.max_rel_disagreement {
                Some(r) => worst_rel = worst_rel.max(r),
                None => ok = false,
            }
            min_der = min_der.min(ev.min_abs_derivative);
        }
        Ok(outcome(
            ok && far > 0 && worst_rel < 1e-6 && min_der >= bound,
            format!(
                "{far} far clusters of {}, worst disagreement {worst_rel:.2e}, min |dE/dlambda| {min_der:.3} >= {bound:.3}",
                clusters.len()
            ),
        ))
    };
    run().unwrap_or_else(|e| outcome(false, e.to_string()))
}

fn coupling_lemmas(cfg: &RunConfig) -> Outcome {
    let r = coupling::compute(cfg);
    outcome(
        r.pass() && r.c1_tested >= 100 && r.c2_tested >= 100,
        format!(
            "c1 {} / c2 {} tested, {} generation and {} hypothesis failures discarded, {} violations",
            r.c1_tested, r.c2_tested, r.generation_failed, r.hypothesis_failed, r.violations
        ),
    )
}

fn diophantine_measure(cfg: &RunConfig) -> Outcome {
    match diophantine::compute(cfg) {
        Ok(r) => outcome(
            r.slope_ok && r.sublevel_ok,
            format!(
                "log-slope {:.3} >= {:.3}, fractions {:?}, sublevel max error {:.2e}",
                r.slope,
                r.slope_target,
                r.estimates.iter().map(|e| e.excluded_fraction).collect::<Vec<_>>(),
                r.sublevel_max_error
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn scan_trend(cfg: &RunConfig) -> Outcome {
    let r = scan::compute(cfg);
    outcome(
        r.pass() && r.levels.len() == 3 && r.levels.iter().all(|l| l.samples == 64),
        format!(
            "excluded fractions {:?}",
            r.levels
                .iter()
                .map(|l| (l.eps, l.excluded_fraction))
                .collect::<Vec<_>>()
        ),
    )
}

fn field(d: usize) -> impl Strategy<Value = FourierField> {
    prop::collection::vec((prop::collection::vec(-3i64..=3, d), -3i64..=3, -1.0f64..1.0), 1..7).prop_map(move |pairs| {
        FourierField::from_pairs(d, pairs.into_iter().map(|(m, n, v)| (LatticeIndex::new(m, n), v))).unwrap()
    })
}

fn instance() -> impl Strategy<Value = (ProblemParams, FourierField, f64, i64)> {
    (1usize..=2).prop_flat_map(|d| {
        let m0 = if d == 1 { vec![1] } else { vec![1, 0] };
        (0.5f64..3.0, 0.0f64..0.5, 0.0f64..0.3, field(d), 0.5f64..4.0, 1i64..6).prop_map(
            move |(rho, alpha, eps, u, lambda_sq, n)| {
                (
                    ProblemParams::new(m0.clone(), rho, alpha, eps).unwrap(),
                    u,
                    lambda_sq,
                    n,
                )
            },
        )
    })
}

fn invariant_suite() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let result = runner.run(&instance(), |(p, u, lambda_sq, n)| {
        let cfg = ConvolutionConfig::default();
        let fft = ConvolutionConfig {
            fft_threshold: 0,
            ..Default::default()
        };
        let cube = u.cube(&cfg).unwrap();
        prop_assert_eq!(cube.symmetry_defect(), 0.0);
        prop_assert!(cube.add_scaled(&u.cube(&fft).unwrap(), -1.0).sup_norm() <= 1e-12 * cube.sup_norm().max(1.0));

        let t = assemble(&u, lambda_sq, &p, 4, OperatorKind::T, &cfg).unwrap();
        let tt = assemble(&u, lambda_sq, &p, 4, OperatorKind::TTilde, &cfg).unwrap();
        let m = &tt.entries;
        prop_assert!((m - m.transpose()).amax() <= 1e-14 * m.amax().max(1.0));
        for (i, xi) in t.basis.sites().iter().enumerate() {
            let w = p.weight(&xi.m);
            for j in 0..t.size() {
                let want = w * tt.entries[(i, j)];
                prop_assert!((t.entries[(i, j)] - want).abs() <= 1e-13 * want.abs());
            }
        }

        let s = resonant_set(&p);
        let (pp, qq) = (u.project_p(&s), u.project_q(&s));
        prop_assert_eq!(pp.len() + qq.len(), u.len());
        prop_assert_eq!(pp.add_scaled(&qq, 1.0), u.clone());
        prop_assert_eq!(u.project_n(&s, n), u.project_ball(n).project_p(&s));
        Ok(())
    });
    match result {
        Ok(()) => outcome(
            true,
            "1000 cases: evenness, self-adjointness, weight factorization, partitions".into(),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    let cfg = reference();
    let criteria: Vec<(&str, Check)> = vec![
        ("frequency-amplitude law", Box::new(|| frequency_amplitude(&cfg))),
        ("oracle equivalence", Box::new(|| oracle_equivalence(&cfg))),
        ("full-residual audit", Box::new(|| full_residual(&cfg))),
        ("Newton contraction", Box::new(|| newton_contraction(&cfg))),
        ("certificate behavior", Box::new(|| certificates(&cfg))),
        ("separation", Box::new(|| separation_check(&cfg))),
        ("eigenvalue variation", Box::new(|| eigen_variation(&cfg))),
        ("coupling lemmas", Box::new(|| coupling_lemmas(&cfg))),
        ("Diophantine measure", Box::new(|| diophantine_measure(&cfg))),
        ("scan trend", Box::new(|| scan_trend(&cfg))),
        ("invariant suite", Box::new(invariant_suite)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<24} {} ({}) [{:.1?}]",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
