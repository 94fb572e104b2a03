//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use page_core::data::{partition, PartitionScheme};
use page_core::Dataset;
use page_core::ddpg::bandit::{QuadraticBandit, BANDIT_OPTIMUM};
use page_core::ddpg::{ActionSpace, DdpgAgent, DdpgConfig, DdpgHyper, Transition};
use page_core::game::{
    accumulate_payoff, fse_diagnostic, BanditGame, FseConfig, PayoffLedger,
};
use page_core::numerics::{ce_loss_and_grad, grad_check, Activation, MlpSpec, OutputHead};
use page_core::orchestrator::{
    build_data, detect_equilibrium_series, run, run_replicated, Algorithm, ExperimentConfig, FlGame, FreezeConfig,
    RunOutcome, Simulation, Weighting,
};
use page_core::report::{spearman, write_rounds_csv, write_trajectory_csv};
use page_core::rng::rng_from;
use rand::Rng;

const DESK_CONFIG: &str = include_str!("../../../configs/desk_synthetic.json");

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn synthetic_cfg(n: usize, t_max: usize) -> ExperimentConfig {
    let json = format!(
        r#"{{
            "num_clients": {n}, "t_max": {t_max}, "runs": 1,
            "data": {{"synthetic": {{"num_clients": {n}, "dims": 10, "classes": 5,
                "mean_train_per_client": 60, "mean_test_per_client": 30, "server_test_size": 500, "seed": 11}}}},
            "stop": {{"enabled": false}}
        }}"#
    );
    ExperimentConfig::from_json(&json).expect("valid config")
}

fn bits(h: &[page_core::orchestrator::RoundRecord]) -> Vec<Vec<u64>> {
    h.iter()
        .map(|r| {
            let mut v = vec![r.t as u64, r.global_acc.to_bits(), r.global_loss.to_bits()];
            v.extend([r.mean_local_acc, r.var_local_acc, r.r_cs, r.mean_r_i, r.wall_ms].map(f64::to_bits));
            v.extend(r.weights.iter().map(|p| p.to_bits()));
            v.extend(r.alphas.iter().map(|a| *a as u64));
            v.extend(r.etas.iter().map(|e| e.to_bits()));
            v
        })
        .collect()
}

fn c1_reduction() -> Verdict {
    let start = Instant::now();
    let mut page = synthetic_cfg(10, 50);
    page.freeze = Some(FreezeConfig { alpha: 5, eta: 0.05 });
    let mut fedavg = synthetic_cfg(10, 50);
    fedavg.algorithm = Algorithm::Fedavg;
    fedavg.fedavg_weighting = Weighting::Uniform;
    let a = run(&page, 3).expect("page run");
    let b = run(&fedavg, 3).expect("fedavg run");
    let same = a.history.len() == 50
        && bits(&a.history) == bits(&b.history)
        && a.global.bit_eq(&b.global)
        && a.locals.iter().zip(&b.locals).all(|(x, y)| x.bit_eq(y));
    let el = start.elapsed();
    verdict(
        same && within(el, 60),
        format!("frozen PAGE vs uniform FedAvg over 50 rounds: bitwise equal = {same}"),
    )
}

fn c2_gradients() -> Verdict {
    let start = Instant::now();
    let mut worst = [0.0f64; 3];
    for seed in 0..10u64 {
        let mut rng = rng_from(seed, &[]);
        let spec = MlpSpec::new(vec![4, 6, 3], Activation::Tanh, OutputHead::SoftmaxLogits).unwrap();
        let params = spec.init_params(&mut rng);
        let rows: Vec<(Vec<f64>, usize)> = (0..8)
            .map(|_| ((0..4).map(|_| rng.random_range(-1.0..1.0)).collect(), rng.random_range(0..3)))
            .collect();
        let batch: Vec<(&[f64], usize)> = rows.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
        let e = grad_check(&params, |p| ce_loss_and_grad(&spec, p, &batch).unwrap());
        worst[0] = worst[0].max(e);

        for space in [ActionSpace::Simplex, ActionSpace::Box { low: 0.0, high: 1.0 }] {
            let hyper = DdpgHyper {
                hidden_layers: vec![8, 8],
                batch_size: 6,
                warmup_steps: 0,
                ..DdpgHyper::default()
            };
            let cfg = DdpgConfig::new(3, 3, space, hyper).unwrap();
            let mut agent = DdpgAgent::new(cfg, seed);
            for _ in 0..6 {
                let s: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
                let a = agent.act(&s, true).unwrap();
                let next: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
                let reward = rng.random_range(0.0..2.0);
                agent.store(Transition { state: s, action: a, reward, next_state: next }).unwrap();
            }
            let batch: Vec<&Transition> = agent.buffer().iter_oldest_first().collect();
            let critic = agent.critic().clone();
            let e = grad_check(&critic, |p| agent.critic_loss_and_grad(&batch, p).unwrap());
            worst[1] = worst[1].max(e);
            let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
            let actor = agent.actor().clone();
            let e = grad_check(&actor, |p| agent.actor_objective_and_grad(&states, p).unwrap());
            worst[2] = worst[2].max(e);
        }
    }
    let el = start.elapsed();
    let ok = worst.iter().all(|e| *e < 1e-5);
    verdict(
        ok && within(el, 60),
        format!(
            "max relative error: model CE {:.1e}, critic MSE {:.1e}, actor objective {:.1e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn c3_bandit() -> (Verdict, Option<DdpgAgent>) {
    let start = Instant::now();
    let bandit = QuadraticBandit::default();
    let mut hits = 0;
    let mut actions = Vec::new();
    let mut first = None;
    for seed in 0..5 {
        let agent = bandit.train(QuadraticBandit::agent_config(), seed, 5000).expect("bandit training");
        let a = agent.policy(&QuadraticBandit::STATE).unwrap()[0];
        if (a - BANDIT_OPTIMUM).abs() <= 0.05 {
            hits += 1;
            first.get_or_insert(agent);
        }
        actions.push(format!("{a:.3}"));
    }
    let el = start.elapsed();
    let v = verdict(
        hits >= 4 && within(el, 120),
        format!("greedy actions after 5000 steps [{}]: {hits}/5 within 0.05 of 0.7", actions.join(", ")),
    );
    (v, first)
}

struct DeskRuns {
    page: Vec<RunOutcome>,
    elapsed: Duration,
}

fn final_means(runs: &[RunOutcome]) -> (f64, f64) {
    let n = runs.len() as f64;
    let g = runs.iter().map(|r| r.history.last().unwrap().global_acc).sum::<f64>() / n;
    let l = runs.iter().map(|r| r.history.last().unwrap().mean_local_acc).sum::<f64>() / n;
    (g, l)
}

fn desk_config() -> ExperimentConfig {
    ExperimentConfig::from_json(DESK_CONFIG).expect("shipped desk config is valid")
}

fn c4_directional() -> (Verdict, DeskRuns) {
    let start = Instant::now();
    let mut cfg = desk_config();
    cfg.algorithm = Algorithm::Fedavg;
    let (fedavg, _) = run_replicated(&cfg).expect("fedavg runs");
    cfg.algorithm = Algorithm::Page;
    let (page, _) = run_replicated(&cfg).expect("page runs");
    let elapsed = start.elapsed();
    let (fg, fl) = final_means(&fedavg);
    let (pg, pl) = final_means(&page);
    let ok = pg >= fg - 0.01 && pl >= fl && within(elapsed, 900);
    let v = verdict(
        ok,
        format!(
            "final global PAGE {:.2}% vs FedAvg {:.2}% (floor -1.0pp), local PAGE {:.2}% vs FedAvg {:.2}%",
            pg * 100.0,
            fg * 100.0,
            pl * 100.0,
            fl * 100.0
        ),
    );
    (v, DeskRuns { page, elapsed })
}

fn c5_cotrend(runs: &DeskRuns) -> Verdict {
    let mut good = 0;
    let mut detail = Vec::new();
    for r in &runs.page {
        let h = &r.history;
        let col = |f: fn(&page_core::orchestrator::RoundRecord) -> f64| h.iter().map(f).collect::<Vec<_>>();
        let rg = spearman(&col(|x| x.r_cs), &col(|x| x.global_acc)).unwrap_or(f64::NAN);
        let rl = spearman(&col(|x| x.mean_r_i), &col(|x| x.mean_local_acc)).unwrap_or(f64::NAN);
        if rg > 0.3 && rl > 0.3 {
            good += 1;
        }
        detail.push(format!("({rg:.2}, {rl:.2})"));
    }
    verdict(
        good >= 2,
        format!("Spearman (r_cs~global, r_i~local) per seed {}: {good}/3 above 0.3", detail.join(" ")),
    )
}

fn c6_bias() -> Verdict {
    let mut cfg = desk_config();
    cfg.kappa_global = 10.0;
    cfg.kappa_local = 1.0;
    let (global_biased, _) = run_replicated(&cfg).expect("10:1 runs");
    cfg.kappa_global = 1.0;
    cfg.kappa_local = 10.0;
    let (local_biased, _) = run_replicated(&cfg).expect("1:10 runs");
    let mut good = 0;
    let mut detail = Vec::new();
    for (g, l) in global_biased.iter().zip(&local_biased) {
        let (gg, gl) = (g.history.last().unwrap().global_acc, g.history.last().unwrap().mean_local_acc);
        let (lg, ll) = (l.history.last().unwrap().global_acc, l.history.last().unwrap().mean_local_acc);
        if gg >= lg && ll >= gl {
            good += 1;
        }
        detail.push(format!("g {:.3}/{:.3} l {:.3}/{:.3}", gg, lg, gl, ll));
    }
    verdict(
        good >= 2,
        format!(
            "10:1 vs 1:10 per seed [{}]: {good}/3 ordered",
            detail.join("; ")
        ),
    )
}

/// `n` rows whose single feature is the row id, classes assigned round-robin.
fn id_pool(n: usize, classes: usize) -> Dataset {
    Dataset::new((0..n).map(|i| i as f64).collect(), (0..n).map(|i| i % classes).collect(), 1, classes).unwrap()
}

fn c7_partitions() -> Verdict {
    let start = Instant::now();
    let mut worst_dev = 0.0f64;
    for seed in 0..10u64 {
        let pool = id_pool(5000, 5);
        let parts = partition(&pool, 10, PartitionScheme::DirichletLabelSkew { delta: 1000.0 }, &mut rng_from(seed, &[1]))
            .expect("partition");
        for p in &parts {
            let counts = p.class_counts();
            for c in counts {
                worst_dev = worst_dev.max((c as f64 / p.len() as f64 - 0.2).abs());
            }
        }
    }
    let mut size_spread = 0usize;
    for seed in 0..10u64 {
        let pool = id_pool(1003, 5);
        let parts = partition(&pool, 7, PartitionScheme::LognormalQuantitySkew { sigma: 1e-9 }, &mut rng_from(seed, &[2]))
            .expect("partition");
        let sizes: Vec<usize> = parts.iter().map(|p| p.len()).collect();
        size_spread = size_spread.max(sizes.iter().max().unwrap() - sizes.iter().min().unwrap());
    }
    let mut conserved = 0;
    let mut rng = rng_from(99, &[]);
    for k in 0..100u64 {
        let n = rng.random_range(20..400);
        let clients = rng.random_range(1..=n.min(15));
        let scheme = match k % 3 {
            0 => PartitionScheme::DirichletLabelSkew { delta: rng.random_range(0.05..5.0) },
            1 => PartitionScheme::LognormalQuantitySkew { sigma: rng.random_range(0.1..2.0) },
            _ => PartitionScheme::Uniform,
        };
        let pool = id_pool(n, 4);
        let parts = partition(&pool, clients, scheme, &mut rng_from(k, &[3])).expect("partition");
        let mut ids: Vec<u64> = parts.iter().flat_map(|p| p.features().iter().map(|v| *v as u64)).collect();
        ids.sort_unstable();
        if ids == (0..n as u64).collect::<Vec<_>>() && parts.iter().all(|p| !p.is_empty()) {
            conserved += 1;
        }
    }
    let el = start.elapsed();
    verdict(
        worst_dev < 0.05 && size_spread <= 1 && conserved == 100 && within(el, 60),
        format!(
            "Dirichlet(1000) max class deviation {:.4}; near-zero sigma size spread {size_spread}; conservation {conserved}/100",
            worst_dev
        ),
    )
}

fn c8_payoff() -> Verdict {
    let mut rng = rng_from(8, &[]);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let gamma = rng.random_range(0.5..1.0);
        let t = rng.random_range(1..40);
        let us: Vec<f64> = (0..t).map(|_| rng.random_range(0.1..1.0)).collect();
        let mut ledger = PayoffLedger::new(gamma, 1.0, 1.0).unwrap();
        for &u in &us {
            ledger.record(u, vec![u * 0.5]).unwrap();
        }
        let tau = rng.random_range(1..=t);
        let (u_cs, u_i) = accumulate_payoff(&ledger, tau).unwrap();
        let mut brute = 0.0;
        for s in tau..=t {
            brute += gamma.powi(s as i32) * us[s - 1];
        }
        worst = worst.max((u_cs - brute).abs()).max((u_i[0] - 0.5 * brute).abs());
    }
    let mut geo_err = 0.0f64;
    for (gamma, t) in [(0.99, 100usize), (0.9, 37), (0.5, 10)] {
        let mut ledger = PayoffLedger::new(gamma, 1.0, 1.0).unwrap();
        for _ in 0..t {
            ledger.record(1.0, vec![1.0]).unwrap();
        }
        let closed = gamma * (1.0 - gamma.powi(t as i32)) / (1.0 - gamma);
        geo_err = geo_err.max((accumulate_payoff(&ledger, 1).unwrap().0 - closed).abs());
    }
    verdict(
        worst <= 1e-12 && geo_err <= 1e-9,
        format!("max error vs brute force {worst:.1e}; vs geometric closed form {geo_err:.1e}"),
    )
}

fn brute_scan(g: &[f64], l: &[f64], k: usize, eps: f64) -> Option<usize> {
    for t in k..=g.len() {
        let w = t - k..t;
        let spread = |s: &[f64]| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for v in s {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
            hi - lo
        };
        if spread(&g[w.clone()]) <= eps && spread(&l[w]) <= eps {
            return Some(t);
        }
    }
    None
}

fn c9_equilibrium() -> Verdict {
    let constant = vec![0.42; 60];
    let c = detect_equilibrium_series(&constant, &constant, 20, 0.005);
    let rising: Vec<f64> = (0..200).map(|i| i as f64 * 0.006).collect();
    let r = detect_equilibrium_series(&rising, &rising, 20, 0.005);
    let mut agree = 0;
    let mut rng = rng_from(9, &[]);
    for _ in 0..50 {
        let ramp = rng.random_range(5..60);
        let len = ramp + rng.random_range(0..60);
        let noise = rng.random_range(0.0..0.004);
        let series = |rng: &mut page_core::rng::SimRng| -> Vec<f64> {
            (0..len)
                .map(|i| {
                    let base = if i < ramp { i as f64 / ramp as f64 * 0.6 } else { 0.6 };
                    base + rng.random_range(0.0..=noise)
                })
                .collect()
        };
        let g = series(&mut rng);
        let l = series(&mut rng);
        let k = rng.random_range(2..25);
        if detect_equilibrium_series(&g, &l, k, 0.005) == brute_scan(&g, &l, k, 0.005) {
            agree += 1;
        }
    }
    verdict(
        c == Some(20) && r.is_none() && agree == 50,
        format!("constant -> {c:?}; rising -> {r:?}; ramp/plateau agreement {agree}/50"),
    )
}

fn c10_fse(bandit_agent: Option<DdpgAgent>) -> Verdict {
    let Some(agent) = bandit_agent else {
        return verdict(false, "no converged bandit agent available");
    };
    let game = BanditGame::new(QuadraticBandit::default(), agent);
    let report = fse_diagnostic(&game, &FseConfig::default()).expect("bandit diagnostic");
    let bandit_identity = report.probes[0].delta;
    let probing = FseConfig {
        probes: 100,
        include_identity: false,
        min_magnitude: 0.2,
        max_magnitude: 0.6,
        ..FseConfig::default()
    };
    let report = fse_diagnostic(&game, &probing).expect("bandit diagnostic");
    let negative = report.probes.iter().filter(|p| p.delta < 0.0).count();

    let mut cfg = synthetic_cfg(3, 8);
    cfg.client_agent.batch_size = 4;
    cfg.server_agent.batch_size = 4;
    let mut sim = Simulation::new(&cfg, 1).expect("simulation");
    sim.run_to_end().expect("short run");
    let fl = FlGame::new(sim).expect("game");
    let fl_report = fse_diagnostic(&fl, &FseConfig { probes: 3, horizon: 2, ..FseConfig::default() }).expect("FL diagnostic");
    let fl_identity = fl_report.probes[0].delta;
    verdict(
        bandit_identity == 0.0 && fl_identity == 0.0 && negative == 100,
        format!(
            "identity delta bandit {bandit_identity}, federated {fl_identity}; {negative}/100 probes of size >= 0.2 lose payoff"
        ),
    )
}

fn c11_determinism() -> Verdict {
    let mut detail = Vec::new();
    let mut ok = true;
    for algo in [Algorithm::Page, Algorithm::Fedavg, Algorithm::Fedprox] {
        let mut cfg = synthetic_cfg(5, 30);
        cfg.algorithm = algo;
        cfg.local_train.prox_mu = 0.1;
        cfg.client_agent.batch_size = 8;
        cfg.server_agent.batch_size = 8;
        let data = Arc::new(build_data(&cfg).unwrap());
        let csv = |seed| {
            let mut sim = Simulation::with_data(&cfg, Arc::clone(&data), seed).unwrap();
            let (h, _) = sim.run_to_end().unwrap();
            let mut rounds = Vec::new();
            write_rounds_csv(&mut rounds, &h).unwrap();
            write_trajectory_csv(&mut rounds, &h).unwrap();
            rounds
        };
        let same = csv(4) == csv(4);
        let differs = csv(4) != csv(5);
        ok &= same;
        detail.push(format!("{} identical={same} seed-sensitive={differs}", algo.name()));
    }
    verdict(ok, detail.join("; "))
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, v: Verdict, secs: f64| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failures += 1;
        }
        println!("{tag} criterion {n:>2} [{name}] {} ({secs:.1}s)", v.detail);
    };
    macro_rules! timed {
        ($e:expr) => {{
            let s = Instant::now();
            let v = $e;
            (v, s.elapsed().as_secs_f64())
        }};
    }

    let (v, s) = timed!(c1_reduction());
    report(1, "reduction oracle", v, s);
    let (v, s) = timed!(c2_gradients());
    report(2, "gradient suite", v, s);
    let ((v, bandit_agent), s) = timed!(c3_bandit());
    report(3, "DDPG bandit", v, s);
    let ((v, desk), s) = timed!(c4_directional());
    report(4, "PAGE vs FedAvg trend", v, s);
    let (v, s) = timed!(c5_cotrend(&desk));
    report(5, "reward/accuracy co-trend", v, s);
    let (v, s) = timed!(c6_bias());
    report(6, "bias ratio mechanics", v, s);
    let (v, s) = timed!(c7_partitions());
    report(7, "partition statistics", v, s);
    let (v, s) = timed!(c8_payoff());
    report(8, "payoff accumulation", v, s);
    let (v, s) = timed!(c9_equilibrium());
    report(9, "equilibrium detector", v, s);
    let (v, s) = timed!(c10_fse(bandit_agent));
    report(10, "deviation diagnostic", v, s);
    let (v, s) = timed!(c11_determinism());
    report(11, "determinism", v, s);
    println!("desk-scale runs took {:.0}s", desk.elapsed.as_secs_f64());

    if failures == 0 {
        println!("acceptance: all 11 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
