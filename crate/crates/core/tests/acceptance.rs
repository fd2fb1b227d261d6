//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `ACCEPTANCE_ONLY=1,4` restricts the run to the listed criteria.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use active_irl::acquisition::{
    argmax_lowest, bo_gaussian_update, bo_ucb_eig, eig_exact_tiny, eig_nmc, ucb_select, BoConfig,
    BoEntry, EigConfig,
};
use active_irl::active_loop::{
    regret, run_active_learning, run_suite, target_distribution, Expert, SuiteResult,
    SyntheticExpert,
};
use active_irl::bayes_irl::{
    grid_oracle_posterior, knn_entropy, marginal_tv, sample_posterior, DemoDataset,
    PosteriorSampleSet, SamplerConfig,
};
use active_irl::config::{ExperimentConfig, Method, TargetSpec};
use active_irl::mdp::{
    boltzmann_policy, solve_optimal, value_iteration, CellType, Mdp, Policy, QFunction,
};
use active_irl::reward::RewardModel;
use active_irl::rng::{derive, Rng};
use active_irl::scaling::{run_scaling, ScaleConfig};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn random_tiny_mdp(rng: &mut Rng) -> Mdp {
    let n = rng.random_range(2..=4);
    let na = rng.random_range(2..=3);
    let mut terminal: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.3).collect();
    terminal[0] = false;
    let mut t = Vec::with_capacity(n * na);
    for _ in 0..n * na {
        let a = rng.random_range(0..n);
        if rng.random::<f64>() < 0.5 {
            t.push(vec![(a, 1.0)]);
        } else {
            let b = (a + rng.random_range(1..n)) % n;
            let p = rng.random_range(0.1..0.9);
            t.push(vec![(a, p), (b, 1.0 - p)]);
        }
    }
    Mdp::new(n, na, t, terminal, 0.9, 3).unwrap()
}

fn estimator_oracle() -> Outcome {
    let mut rng = derive(2024, &[1]);
    let instances = 20;
    let mut worst: f64 = 0.0;
    let mut fails = 0;
    for i in 0..instances {
        let mdp = random_tiny_mdp(&mut rng);
        let cap = rng.random_range(1..=3);
        let k = rng.random_range(2..=4);
        let model = RewardModel::per_state(mdp.n_states());
        let thetas: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                (0..mdp.n_states())
                    .map(|_| rng.random_range(-4.0..4.0))
                    .collect()
            })
            .collect();
        let post = PosteriorSampleSet::from_thetas(thetas.clone(), &mdp, &model).unwrap();
        let cfg = EigConfig {
            n_rewards: k,
            n_trajectories: 200,
            step_cap: Some(cap),
            ..EigConfig::default()
        };
        let est = eig_nmc(&[0], &post, &mdp, &cfg, &mut derive(i, &[7])).unwrap();
        let c = &est.scores[0];
        let w = vec![1.0 / k as f64; k];
        let exact = eig_exact_tiny(0, &thetas, &w, &mdp, &model, 1.0, cap).unwrap();
        let se = c.std_error.unwrap();
        if se > 0.0 {
            worst = worst.max((c.score - exact).abs() / se);
        }
        if (c.score - exact).abs() > 3.0 * se + 1e-12 {
            fails += 1;
            println!(
                "  instance {i}: nmc {:.5} exact {exact:.5} se {se:.5}",
                c.score
            );
        }
    }
    outcome(
        fails == 0,
        format!("{instances} instances, {fails} outside 3 SE, worst |z| = {worst:.2}"),
    )
}

fn posterior_oracle() -> Outcome {
    let base = ExperimentConfig::structured_paper();
    let sampler = SamplerConfig::default();
    let mut good = 0;
    let mut worst = Vec::new();
    for seed in 0..10u64 {
        let env = base.env.build(seed).unwrap();
        let mut expert = SyntheticExpert::new(&env, 1.0).unwrap();
        let mut data = DemoDataset::new();
        for (k, xi) in [6usize, 19, 35].into_iter().enumerate() {
            let mut r = derive(seed, &[99, k as u64]);
            data.push(
                expert
                    .demonstrate(&env.mdp, xi, env.mdp.step_cap(), &mut r)
                    .unwrap(),
            );
        }
        let post = sample_posterior(
            &data,
            &env.mdp,
            &env.reward_model,
            &env.prior,
            &sampler,
            &mut derive(seed, &[5]),
        )
        .unwrap();
        let oracle =
            grid_oracle_posterior(&data, &env.mdp, &env.reward_model, &env.prior, 1.0, 50).unwrap();
        let tvs: Vec<f64> = (0..3)
            .map(|d| marginal_tv(&post.kept, &oracle, d, 10))
            .collect();
        let max = tvs.iter().copied().fold(0.0, f64::max);
        if max <= 0.15 {
            good += 1;
        }
        worst.push(format!("{max:.3}"));
    }
    outcome(
        good >= 9,
        format!(
            "{good}/10 seeds with max marginal TV <= 0.15 (per-seed max TV: {})",
            worst.join(" ")
        ),
    )
}

fn structured_cfg() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::structured_paper();
    cfg.record_timing = false;
    cfg.resolve().unwrap()
}

fn structured_suite() -> &'static SuiteResult {
    static SUITE: OnceLock<SuiteResult> = OnceLock::new();
    SUITE.get_or_init(|| {
        let cfg = structured_cfg();
        let seeds: Vec<u64> = (0..10).collect();
        run_suite(&cfg, &Method::ALL, &seeds, jobs()).unwrap()
    })
}

fn jobs() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn print_medians(suite: &SuiteResult, methods: &[Method]) {
    for &m in methods {
        println!(
            "  {:<15} median final entropy {:>8.3}  regret {:>8.3}",
            m.name(),
            suite.median_final_entropy(m).unwrap(),
            suite.median_final_regret(m).unwrap()
        );
    }
}

fn structured_shape() -> Outcome {
    let suite = structured_suite();
    print_medians(suite, &Method::ALL);
    let h = |m| suite.median_final_entropy(m).unwrap();
    let g = |m| suite.median_final_regret(m).unwrap();
    let cfg = structured_cfg();
    let env = cfg.env.build(0).unwrap();
    let grid = env.mdp.grid().unwrap();
    let jail_always = suite.records_for(Method::ActionEntropy).all(|r| {
        r.rows
            .iter()
            .all(|row| grid.cells[row.xi] == CellType::Jail)
    });
    let order = h(Method::EigNmc) <= h(Method::EigBo) && h(Method::EigBo) < h(Method::Random);
    let regret_ok = g(Method::EigNmc) <= g(Method::Random);
    outcome(
        order && regret_ok && jail_always,
        format!(
            "entropy nmc {:.3} <= bo {:.3} < random {:.3}: {order}; regret nmc {:.3} <= random {:.3}: {regret_ok}; \
             action_entropy always jail: {jail_always}",
            h(Method::EigNmc),
            h(Method::EigBo),
            h(Method::Random),
            g(Method::EigNmc),
            g(Method::Random)
        ),
    )
}

fn random_env_property() -> Outcome {
    let mut cfg = ExperimentConfig::random_paper();
    cfg.record_timing = false;
    let cfg = cfg.resolve().unwrap();
    let seeds: Vec<u64> = (0..16).collect();
    let methods = [
        Method::EigNmc,
        Method::EigBo,
        Method::Random,
        Method::QEntropy,
    ];
    let suite = run_suite(&cfg, &methods, &seeds, jobs()).unwrap();
    print_medians(&suite, &methods);
    let h = |m| suite.median_final_entropy(m).unwrap();
    let start = median(
        suite
            .records_for(Method::Random)
            .map(|r| r.diagnostics[0].entropy_nats)
            .collect(),
    );
    let eig_better = [Method::EigNmc, Method::EigBo]
        .iter()
        .all(|&m| h(m) < h(Method::Random) && h(m) < h(Method::QEntropy));
    // No advantage: q_entropy does not undercut random by more than 5% of
    // random's entropy reduction.
    let margin = 0.05 * (start - h(Method::Random)).abs();
    let no_adv = h(Method::QEntropy) >= h(Method::Random) - margin;
    outcome(
        eig_better && no_adv,
        format!(
            "nmc {:.3}, bo {:.3} < random {:.3}, q_entropy {:.3}: {eig_better}; q_entropy >= random - {margin:.3}: {no_adv}",
            h(Method::EigNmc),
            h(Method::EigBo),
            h(Method::Random),
            h(Method::QEntropy)
        ),
    )
}

fn bo_efficiency() -> Outcome {
    let suite = structured_suite();
    let mut cfg = structured_cfg();
    cfg.eig.n_trajectories *= 2;
    let seeds: Vec<u64> = (0..10).collect();
    let double = run_suite(&cfg, &[Method::EigNmc], &seeds, jobs()).unwrap();
    let h_bo = suite.median_final_entropy(Method::EigBo).unwrap();
    let h_nmc2 = double.median_final_entropy(Method::EigNmc).unwrap();
    let budget_ok = h_bo <= h_nmc2;

    // Overhead at equal budget: same posterior, interleaved repetitions.
    let cfg = structured_cfg();
    let env = cfg.env.build(0).unwrap();
    let mut expert = SyntheticExpert::new(&env, 1.0).unwrap();
    let mut data = DemoDataset::new();
    for (k, xi) in [0usize, 20, 30].into_iter().enumerate() {
        data.push(
            expert
                .demonstrate(&env.mdp, xi, 15, &mut derive(1, &[k as u64]))
                .unwrap(),
        );
    }
    let post = sample_posterior(
        &data,
        &env.mdp,
        &env.reward_model,
        &env.prior,
        &cfg.sampler,
        &mut derive(2, &[]),
    )
    .unwrap();
    let cands = env.mdp.non_terminal_states();
    let (mut t_nmc, mut t_bo) = (Vec::new(), Vec::new());
    for rep in 0..15u64 {
        let s = Instant::now();
        eig_nmc(&cands, &post, &env.mdp, &cfg.eig, &mut derive(rep, &[1])).unwrap();
        t_nmc.push(s.elapsed().as_secs_f64());
        let s = Instant::now();
        bo_ucb_eig(
            &cands,
            &post,
            &env.mdp,
            &cfg.eig,
            &cfg.bo,
            &mut derive(rep, &[2]),
        )
        .unwrap();
        t_bo.push(s.elapsed().as_secs_f64());
    }
    let (m_nmc, m_bo) = (median(t_nmc), median(t_bo));
    let overhead = m_bo / m_nmc - 1.0;
    let overhead_ok = overhead <= 0.15;
    outcome(
        budget_ok && overhead_ok,
        format!(
            "median final entropy bo(T) {h_bo:.3} <= nmc(2T) {h_nmc2:.3}: {budget_ok}; \
             acquisition time nmc {:.2} ms, bo {:.2} ms, overhead {:.1}%: {overhead_ok}",
            m_nmc * 1e3,
            m_bo * 1e3,
            overhead * 100.0
        ),
    )
}

fn scaling() -> Outcome {
    let res = run_scaling(&ScaleConfig::default()).unwrap();
    for r in res.rows.iter().chain(&res.bo_rows) {
        println!(
            "  n={:<3} {:<7} median {:.4}s mean {:.4}s std {:.4}s",
            r.size, r.phase, r.median_s, r.mean_s, r.std_s
        );
    }
    let p = res.exponent("eig").unwrap();
    let p_mcmc = res.exponent("mcmc").unwrap();
    let bo14 = res
        .bo_rows
        .iter()
        .find(|r| r.size == 14)
        .map(|r| r.median_s)
        .unwrap();
    let nmc14 = res
        .rows
        .iter()
        .find(|r| r.size == 14 && r.phase == "eig")
        .map(|r| r.median_s)
        .unwrap();
    println!(
        "  info: sampler exponent {p_mcmc:.2}; n=14 bo quarter rule {bo14:.4}s vs nmc {nmc14:.4}s"
    );
    outcome(
        (1.5..=2.5).contains(&p) && res.rows.len() == 10,
        format!("EIG time exponent p = {p:.3}"),
    )
}

fn single_state() -> Outcome {
    let suite = structured_suite();
    let curves = [Method::SingleEig, Method::SingleEigX8].iter().all(|&m| {
        suite.records_for(m).count() == 10
            && suite
                .records_for(m)
                .all(|r| r.complete && r.rows.len() == 20)
    });
    let x8 = suite.median_final_entropy(Method::SingleEigX8).unwrap();
    let nmc = suite.median_final_entropy(Method::EigNmc).unwrap();
    let mean_len: f64 = {
        let v: Vec<f64> = [Method::EigNmc, Method::EigBo]
            .iter()
            .flat_map(|&m| {
                suite
                    .records_for(m)
                    .flat_map(|r| r.rows.iter().map(|x| x.traj_len as f64))
            })
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    println!("  info: mean full-trajectory demonstration length {mean_len:.2}");
    outcome(
        curves && x8 <= nmc,
        format!("curves complete: {curves}; single_eig_x8 {x8:.3} <= eig_nmc {nmc:.3}"),
    )
}

fn invariants() -> Outcome {
    let mut failures: Vec<String> = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };
    let mut rng = derive(8, &[]);

    // Boltzmann normalisation and shift invariance.
    for _ in 0..200 {
        let vals: Vec<f64> = (0..10).map(|_| rng.random_range(-100.0..100.0)).collect();
        let c = rng.random_range(-1e3..1e3);
        let q = QFunction::from_values(2, 5, vals.clone());
        let qs = QFunction::from_values(2, 5, vals.iter().map(|v| v + c).collect());
        let (p, ps) = (boltzmann_policy(&q, 1.0), boltzmann_policy(&qs, 1.0));
        for s in 0..2 {
            check(
                (p.row(s).iter().sum::<f64>() - 1.0).abs() < 1e-12,
                "boltzmann normalisation",
            );
            for a in 0..5 {
                check(
                    (p.prob(s, a) - ps.prob(s, a)).abs() < 1e-9,
                    "boltzmann shift invariance",
                );
            }
        }
    }

    // Bellman residuals on the structured world.
    let cfg = ExperimentConfig::structured_paper();
    for seed in 0..5 {
        let env = cfg.env.build(seed).unwrap();
        let r = env.true_rewards();
        let q = value_iteration(&env.mdp, &r, 1e-8).unwrap();
        let v = q.state_values();
        let mut resid: f64 = 0.0;
        for s in 0..env.mdp.n_states() {
            if env.mdp.is_terminal(s) {
                continue;
            }
            for a in 0..5 {
                let next: f64 = env
                    .mdp
                    .successors(s, a)
                    .iter()
                    .map(|&(t, p)| p * v[t])
                    .sum();
                resid = resid.max((q.get(s, a) - (r[s] + env.mdp.gamma() * next)).abs());
            }
        }
        check(resid < 1e-7, "bellman residual");
        let (qpi, _) = solve_optimal(&env.mdp, &r, None).unwrap();
        check(
            qpi.max_abs_diff(&q) < 1e-6,
            "policy iteration agrees with value iteration",
        );
    }

    // Gaussian update closed forms and order independence.
    let (mu, var) = bo_gaussian_update(0.0, 1.0, 1.0, 1, 2.0);
    check(mu == 1.0 && var == 0.5, "gaussian update example");
    check(
        bo_gaussian_update(0.5, 2.0, 1.0, 0, 9.0) == (0.5, 4.0),
        "gaussian update without data",
    );
    for _ in 0..100 {
        let obs: Vec<f64> = (0..rng.random_range(1..30))
            .map(|_| rng.random_range(-3.0..3.0))
            .collect();
        let eps = rng.random_range(0.1..3.0);
        let (mut m, mut v) = (0.0, 4.0);
        for &o in &obs {
            let (m2, v2) = bo_gaussian_update(m, f64::sqrt(v), eps, 1, o);
            m = m2;
            v = v2;
        }
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        let (mb, vb) = bo_gaussian_update(0.0, 2.0, eps, obs.len(), mean);
        check(
            (m - mb).abs() < 1e-10 && (v - vb).abs() < 1e-10,
            "gaussian update order independence",
        );
    }

    // UCB argmax cases.
    let bo = BoConfig::default();
    let mut a = BoEntry::new(0, &bo);
    let mut b = BoEntry::new(1, &bo);
    (a.mu, a.sigma, b.mu, b.sigma) = (1.0, 0.0, 0.0, 1.0);
    check(
        ucb_select(&[a.clone(), b.clone()], 3.0) == 1,
        "ucb explores",
    );
    check(ucb_select(&[a, b], 0.0) == 0, "ucb exploits");
    check(argmax_lowest(&[2.0, 2.0, 1.0]) == 0, "lowest-index ties");

    // Entropy estimator analytic checks.
    let n: Vec<Vec<f64>> = (0..4000)
        .map(|_| vec![StandardNormal.sample(&mut rng)])
        .collect();
    let h = knn_entropy(&n, 5).unwrap();
    check(
        (h - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()).abs() < 0.05,
        "normal entropy",
    );
    let u: Vec<Vec<f64>> = (0..4000).map(|_| vec![rng.random::<f64>()]).collect();
    check(knn_entropy(&u, 5).unwrap().abs() < 0.05, "uniform entropy");
    let u2: Vec<Vec<f64>> = u.iter().map(|x| vec![2.0 * x[0]]).collect();
    check(
        (knn_entropy(&u2, 5).unwrap() - knn_entropy(&u, 5).unwrap() - 2f64.ln()).abs() < 0.05,
        "entropy scaling law",
    );

    // Regret non-negativity.
    let env = cfg.env.build(1).unwrap();
    let target = target_distribution(&TargetSpec::UniformNonTerminalNonJail, &env.mdp).unwrap();
    let tr = env.true_rewards();
    for _ in 0..50 {
        let probs: Vec<f64> = (0..env.mdp.n_states() * 5)
            .map(|_| rng.random_range(0.01..1.0))
            .collect();
        let mut p = probs.clone();
        for s in 0..env.mdp.n_states() {
            let z: f64 = probs[s * 5..s * 5 + 5].iter().sum();
            p[s * 5..s * 5 + 5].iter_mut().for_each(|x| *x /= z);
        }
        let pol = Policy::from_probs(env.mdp.n_states(), 5, p);
        check(
            regret(&pol, &tr, &env.mdp, &target).unwrap() >= -1e-8,
            "regret non-negative",
        );
    }

    // Determinism under a fixed seed.
    let mut small = ExperimentConfig::structured_paper();
    small.steps = 2;
    small.record_timing = false;
    for m in Method::ALL {
        small.method = m;
        let c = small.clone().resolve().unwrap();
        check(
            run_active_learning(&c).unwrap() == run_active_learning(&c).unwrap(),
            "run determinism",
        );
    }

    let n_fail = failures.len();
    failures.dedup();
    outcome(
        n_fail == 0,
        if n_fail == 0 {
            "all checks hold".to_string()
        } else {
            failures.join(", ")
        },
    )
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 8] = [
        (1, "estimator matches exhaustive oracle", estimator_oracle),
        (2, "posterior matches grid oracle", posterior_oracle),
        (3, "structured suite shape", structured_shape),
        (4, "random environment ordering", random_env_property),
        (5, "BO budget efficiency and overhead", bo_efficiency),
        (6, "EIG step scales quadratically", scaling),
        (7, "single-state comparison", single_state),
        (8, "invariant suites", invariants),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} [{id}] {name} ({secs:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
