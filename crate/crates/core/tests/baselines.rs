use std::collections::HashMap;

use ndarray::Array2;
use qapcore::baselines::{
    brute_force, greedy_construct, lmo_transportation, local_search_swap, local_search_trace, qp_relax_solve,
    random_feasible, round_fractional, round_max_mass, FractionalAllocation,
};
use qapcore::graph::{gen_sbm, gen_uniform};
use qapcore::problem::{is_feasible, risk};
use qapcore::rng::rng_from_seed;
use qapcore::solver::SolverRegistry;
use qapcore::{AllocationState, CommGraph, ProblemInstance, QapError, SbmConfig};
use rand::Rng;

fn uniform(m: usize, caps: Vec<usize>, seed: u64) -> ProblemInstance {
    let n = caps.len();
    ProblemInstance::new(gen_uniform(m, seed).unwrap(), caps, vec![1.0 / n as f64; n]).unwrap()
}

fn from_w_bar(w_bar: Array2<f64>, caps: Vec<usize>) -> ProblemInstance {
    let n = caps.len();
    ProblemInstance::new(CommGraph::from_complement(&w_bar).unwrap(), caps, vec![1.0 / n as f64; n]).unwrap()
}

fn pair_risk(w_bar: &Array2<f64>, assign: &[usize]) -> f64 {
    let mut r = 0.0;
    for i in 0..assign.len() {
        for j in 0..i {
            if assign[i] == assign[j] {
                r += w_bar[[i, j]];
            }
        }
    }
    r
}

/// Plain recursion over every assignment, no pruning.
fn enumerate(inst: &ProblemInstance) -> (f64, Vec<usize>) {
    fn go(inst: &ProblemInstance, assign: &mut Vec<usize>, best: &mut (f64, Vec<usize>)) {
        if assign.len() == inst.m() {
            let counts = AllocationState::new(assign.clone()).counts(inst.n());
            if counts.iter().zip(inst.capacities()).all(|(c, k)| c <= k) {
                let r = pair_risk(inst.w_bar(), assign);
                if r < best.0 - 1e-12 {
                    *best = (r, assign.clone());
                }
            }
            return;
        }
        for h in 0..inst.n() {
            assign.push(h);
            go(inst, assign, best);
            assign.pop();
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    go(inst, &mut Vec::new(), &mut best);
    best
}

fn random_caps<R: Rng>(m: usize, n: usize, rng: &mut R) -> Vec<usize> {
    loop {
        let caps: Vec<usize> = (0..n).map(|_| rng.gen_range(0..=m)).collect();
        if caps.iter().sum::<usize>() >= m {
            return caps;
        }
    }
}

#[test]
fn brute_force_examples() {
    let inst = uniform(2, vec![1, 1], 3);
    assert_eq!(brute_force(&inst).unwrap().risk, 0.0);

    let mut w_bar = Array2::zeros((3, 3));
    for (i, j, v) in [(0, 1, 0.2), (0, 2, 0.5), (1, 2, 0.9)] {
        w_bar[[i, j]] = v;
        w_bar[[j, i]] = v;
    }
    let out = brute_force(&from_w_bar(w_bar, vec![3])).unwrap();
    assert!((out.risk - 1.6).abs() < 1e-12);
    assert!(out.feasible);
}

#[test]
fn brute_force_matches_independent_enumerator() {
    for seed in 0..10 {
        let inst = uniform(8, vec![4, 4], seed);
        let out = brute_force(&inst).unwrap();
        let (r, assign) = enumerate(&inst);
        assert!((out.risk - r).abs() < 1e-12, "seed {seed}: {} vs {r}", out.risk);
        assert_eq!(out.allocation.assign(), &assign[..], "lexicographic tie-break");
    }
}

#[test]
fn brute_force_errors() {
    let big = uniform(24, vec![24; 2], 1);
    assert!(matches!(brute_force(&big), Err(QapError::TooLarge(_))));
    // Short capacity is rejected when the instance is built.
    let short = ProblemInstance::new(gen_uniform(5, 1).unwrap(), vec![2, 2], vec![0.5, 0.5]);
    assert!(matches!(short, Err(QapError::Infeasible(_))));
    let cost = Array2::zeros((5, 2));
    assert!(matches!(lmo_transportation(&cost, &[2, 2]), Err(QapError::Infeasible(_))));
    assert!(matches!(round_max_mass(&FractionalAllocation::new(Array2::from_elem((5, 2), 0.5)).unwrap(), &[2, 2]), Err(QapError::Infeasible(_))));
}

#[test]
fn no_method_beats_brute_force() {
    let reg = SolverRegistry::with_baselines();
    let mut rng = rng_from_seed(2024);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(2..=9);
        if (n as f64).powi(m as i32) > 1e5 {
            continue;
        }
        let caps = random_caps(m, n, &mut rng);
        let inst = uniform(m, caps, rng.gen());
        let opt = brute_force(&inst).unwrap();
        assert!(opt.feasible);
        for name in ["random", "greedy", "local_search", "qp"] {
            let out = reg.get(name).unwrap().solve(&inst, checked as u64).unwrap();
            assert!(out.feasible, "{name} infeasible");
            assert!((out.risk - risk(&inst, &out.allocation).unwrap()).abs() == 0.0);
            assert!(out.risk >= opt.risk - 1e-9, "{name} beat the optimum: {} < {}", out.risk, opt.risk);
        }
        checked += 1;
    }
}

#[test]
fn random_feasible_single_host_and_feasibility() {
    let inst = uniform(6, vec![6], 4);
    let out = random_feasible(&inst, &mut rng_from_seed(1)).unwrap();
    assert_eq!(out.allocation.assign(), &[0; 6]);

    let inst = uniform(12, vec![3, 4, 5], 5);
    let mut rng = rng_from_seed(6);
    for _ in 0..1000 {
        let out = random_feasible(&inst, &mut rng).unwrap();
        assert!(out.feasible && is_feasible(&inst, &out.allocation));
    }
}

/// Exact distribution of final host counts: each step picks uniformly among
/// hosts with room. Phones are exchangeable under the random order, so every
/// pair shares a host with the same probability.
fn colocation_probability(caps: &[usize], m: usize) -> f64 {
    let mut dist: HashMap<Vec<usize>, f64> = HashMap::from([(vec![0; caps.len()], 1.0)]);
    for _ in 0..m {
        let mut next = HashMap::new();
        for (counts, p) in dist {
            let open: Vec<usize> = (0..caps.len()).filter(|&h| counts[h] < caps[h]).collect();
            for &h in &open {
                let mut c = counts.clone();
                c[h] += 1;
                *next.entry(c).or_insert(0.0) += p / open.len() as f64;
            }
        }
        dist = next;
    }
    let pairs = (m * (m - 1)) as f64;
    dist.iter()
        .map(|(c, p)| p * c.iter().map(|&k| (k * k.saturating_sub(1)) as f64).sum::<f64>() / pairs)
        .sum()
}

#[test]
fn random_feasible_mean_matches_closed_form() {
    let caps = vec![6, 7, 12];
    let inst = uniform(20, caps.clone(), 7);
    let w_bar = inst.w_bar();
    let total: f64 = (0..20).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| w_bar[[i, j]]).sum();
    let expected = colocation_probability(&caps, 20) * total;

    let mut rng = rng_from_seed(8);
    let draws: Vec<f64> = (0..1000).map(|_| random_feasible(&inst, &mut rng).unwrap().risk).collect();
    let mean = draws.iter().sum::<f64>() / 1000.0;
    let var = draws.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 999.0;
    let se = (var / 1000.0).sqrt();
    assert!((mean - expected).abs() < 3.0 * se, "mean {mean}, expected {expected}, se {se}");
}

#[test]
fn greedy_separates_perfect_clusters() {
    for sizes in [vec![5, 5], vec![7, 4], vec![3, 3, 3]] {
        let cfg = SbmConfig { cluster_sizes: sizes.clone(), p_within: 1.0, p_between: 0.0, seed: 1 };
        let g = gen_sbm(&cfg).unwrap();
        let n = sizes.len();
        let inst = ProblemInstance::new(g, sizes.clone(), vec![1.0 / n as f64; n]).unwrap();
        let out = greedy_construct(&inst).unwrap();
        assert_eq!(out.risk, 0.0, "cluster sizes {sizes:?}");
    }
}

#[test]
fn greedy_and_local_search_against_the_optimum() {
    let mut rng = rng_from_seed(31);
    for case in 0..60 {
        let m = rng.gen_range(2..=8);
        let n = rng.gen_range(1..=3);
        let inst = uniform(m, random_caps(m, n, &mut rng), 500 + case);
        let opt = brute_force(&inst).unwrap();
        let greedy = greedy_construct(&inst).unwrap();
        assert!(greedy.risk >= opt.risk - 1e-9);
        if n == 1 {
            assert_eq!(greedy.allocation, opt.allocation);
        }
        let (ls, history) = local_search_trace(&inst, &greedy.allocation, usize::MAX).unwrap();
        assert!(ls.feasible);
        assert!(ls.risk <= greedy.risk + 1e-12 && ls.risk >= opt.risk - 1e-9);
        assert!(history.windows(2).all(|w| w[1] < w[0]), "every accepted move improves");
        assert_eq!(*history.last().unwrap(), ls.risk);

        let still = local_search_swap(&inst, &opt.allocation, usize::MAX).unwrap();
        assert_eq!(still.allocation, opt.allocation);
    }
}

#[test]
fn local_search_respects_budget_and_start() {
    let inst = uniform(10, vec![4, 3, 3], 12);
    let start = random_feasible(&inst, &mut rng_from_seed(3)).unwrap().allocation;
    let (_, history) = local_search_trace(&inst, &start, 2).unwrap();
    assert!(history.len() <= 3);
    let bad = AllocationState::new(vec![0; 10]);
    assert!(matches!(local_search_swap(&inst, &bad, 5), Err(QapError::Infeasible(_))));
}

fn lmo_by_enumeration(cost: &Array2<f64>, caps: &[usize]) -> f64 {
    let (m, n) = cost.dim();
    let mut best = f64::INFINITY;
    for code in 0..n.pow(m as u32) {
        let mut c = code;
        let mut counts = vec![0; n];
        let mut obj = 0.0;
        for i in 0..m {
            let h = c % n;
            c /= n;
            counts[h] += 1;
            obj += cost[[i, h]];
        }
        if counts.iter().zip(caps).all(|(a, b)| a <= b) {
            best = best.min(obj);
        }
    }
    best
}

#[test]
fn lmo_examples() {
    let cost = ndarray::array![[0.3, 0.1], [0.2, 0.9], [0.5, 0.4]];
    let x = lmo_transportation(&cost, &[3, 3]).unwrap();
    assert_eq!(x.matrix(), &ndarray::array![[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
    let x = lmo_transportation(&ndarray::array![[1.0], [-1.0]], &[2]).unwrap();
    assert_eq!(x.matrix(), &ndarray::array![[1.0], [1.0]]);
}

#[test]
fn lmo_matches_vertex_enumeration() {
    let mut rng = rng_from_seed(77);
    for _ in 0..200 {
        let cost = Array2::from_shape_fn((6, 3), |_| rng.gen_range(-1.0..1.0));
        let caps = random_caps(6, 3, &mut rng);
        let x = lmo_transportation(&cost, &caps).unwrap();
        let m = x.matrix();
        assert!(m.iter().all(|v| *v == 0.0 || *v == 1.0), "integral vertex");
        assert!(x.respects(&caps));
        let obj = (m * &cost).sum();
        let best = lmo_by_enumeration(&cost, &caps);
        assert!((obj - best).abs() < 1e-12, "{obj} vs {best}");
    }
}

#[test]
fn frank_wolfe_on_zero_complement_stops_at_once() {
    let inst = from_w_bar(Array2::zeros((6, 6)), vec![3, 3]);
    let out = qp_relax_solve(&inst, 500, 0).unwrap();
    assert_eq!(out.iterations, 0);
    assert_eq!(out.objective, 0.0);
}

#[test]
fn frank_wolfe_stays_in_the_polytope_and_improves() {
    for seed in 0..20 {
        let inst = uniform(15, vec![4, 5, 6], seed);
        let out = qp_relax_solve(&inst, 500, seed).unwrap();
        let x = out.x.matrix();
        for row in x.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|v| *v >= -1e-12));
        }
        assert!(out.x.respects(inst.capacities()));
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        assert!((out.objective - out.x.objective(inst.w_bar())).abs() < 1e-9);
        assert!(out.objective <= out.history[0] + 1e-12);
        assert!(out.iterations <= 500);
    }
}

#[test]
fn frank_wolfe_on_small_toys_is_local() {
    // The objective is indefinite, so Frank–Wolfe can stop above the
    // integral optimum; it never ends above its own start.
    let mut above = 0;
    for seed in 0..20 {
        let inst = uniform(6, vec![3, 3], seed);
        let opt = brute_force(&inst).unwrap();
        let out = qp_relax_solve(&inst, 500, 1).unwrap();
        assert!(out.objective <= out.history[0] + 1e-12);
        assert!(out.objective >= opt.risk - 1e-9 || out.x.matrix().iter().any(|v| *v > 1e-9 && *v < 1.0 - 1e-9));
        if out.objective > opt.risk + 1e-9 {
            above += 1;
        }
    }
    println!("toy instances where the relaxation stopped above the optimum: {above}/20");
}

#[test]
fn rounding_examples() {
    let inst = uniform(9, vec![3, 3, 3], 41);
    let s = random_feasible(&inst, &mut rng_from_seed(2)).unwrap().allocation;
    let x = FractionalAllocation::from_allocation(&s, 3);
    assert_eq!(round_max_mass(&x, inst.capacities()).unwrap(), s);
    let repaired = round_fractional(&inst, &x).unwrap();
    assert!(repaired.risk <= risk(&inst, &s).unwrap());

    let flat = FractionalAllocation::new(Array2::from_elem((7, 3), 1.0 / 3.0)).unwrap();
    let s = round_max_mass(&flat, &[2, 4, 3]).unwrap();
    assert_eq!(s.assign(), &[0, 0, 1, 1, 1, 1, 2]);

    assert!(FractionalAllocation::new(ndarray::array![[0.5, 0.4]]).is_err());
    assert!(FractionalAllocation::new(ndarray::array![[1.5, -0.5]]).is_err());
}

#[test]
fn rounding_gap_against_the_relaxation() {
    // Exact line search along the row-multilinear objective takes full
    // steps, so iterates land on vertices; rounding is then the identity and
    // the repair move can only lower the risk.
    let mut gaps = Vec::new();
    for seed in 0..20 {
        let inst = uniform(16, vec![4, 6, 6], 300 + seed);
        let relax = qp_relax_solve(&inst, 500, seed).unwrap();
        let rounded = round_fractional(&inst, &relax.x).unwrap();
        assert!(rounded.feasible);
        let integral = relax.x.matrix().iter().all(|v| *v == 0.0 || *v == 1.0);
        if integral {
            let plain = round_max_mass(&relax.x, inst.capacities()).unwrap();
            assert!((risk(&inst, &plain).unwrap() - relax.objective).abs() < 1e-9);
            assert!(rounded.risk <= relax.objective + 1e-9);
        }
        gaps.push(rounded.risk - relax.objective);
    }
    println!("rounded minus relaxation: {gaps:?}");
}

#[test]
fn registry_lookup() {
    let reg = SolverRegistry::with_baselines();
    let names: Vec<&str> = reg.names().collect();
    assert_eq!(names, ["brute_force", "greedy", "local_search", "qp", "random"]);
    assert!(reg.select(&["greedy".into(), "nope".into()]).err().unwrap().is_config());
    let inst = uniform(30, vec![10; 3], 1);
    assert!(reg.get("brute_force").unwrap().supports(&inst).is_err());
    let a = reg.get("qp").unwrap().solve(&inst, 5).unwrap();
    let b = reg.get("qp").unwrap().solve(&inst, 5).unwrap();
    assert_eq!(a.allocation, b.allocation);
}
