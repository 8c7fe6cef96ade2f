//! Allocation states, the co-location risk objective, the capacity
//! constraint and the distribution penalty that shapes the reward.

use ndarray::Array2;
use rand::Rng;

use crate::error::{QapError, Result};
use crate::fmt::fmt9;
use crate::graph::{next_content, parse_graph_lines, parse_header, CommGraph};

pub const INSTANCE_HEADER: &str = "qapinst v1";

/// A graph plus the host side of the problem: `n` hosts with integer
/// capacities and a desired share of phones per host.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    graph: CommGraph,
    w_bar: Array2<f64>,
    capacities: Vec<usize>,
    desired: Vec<f64>,
}

impl ProblemInstance {
    pub fn new(graph: CommGraph, capacities: Vec<usize>, desired: Vec<f64>) -> Result<Self> {
        let n = capacities.len();
        if n == 0 {
            return Err(QapError::Config("need at least one host".into()));
        }
        if desired.len() != n {
            return Err(QapError::Dimension(format!(
                "{n} capacities but {} desired shares",
                desired.len()
            )));
        }
        let total: usize = capacities.iter().sum();
        if total < graph.m() {
            return Err(QapError::Infeasible(format!(
                "total capacity {total} below phone count {}",
                graph.m()
            )));
        }
        if desired.iter().any(|q| !q.is_finite() || *q <= 0.0) {
            return Err(QapError::Config("desired shares must be strictly positive".into()));
        }
        let sum: f64 = desired.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(QapError::Config(format!("desired shares sum to {sum}, not 1")));
        }
        let w_bar = graph.complement();
        Ok(Self {
            graph,
            w_bar,
            capacities,
            desired,
        })
    }

    /// Capacities from relative shares (see [`capacities_from_relative`]) with
    /// the same shares as the desired distribution.
    pub fn with_relative_capacities(graph: CommGraph, relative: &[f64]) -> Result<Self> {
        let capacities = capacities_from_relative(relative, graph.m())?;
        let sum: f64 = relative.iter().sum();
        let desired = relative.iter().map(|r| r / sum).collect();
        Self::new(graph, capacities, desired)
    }

    pub fn graph(&self) -> &CommGraph {
        &self.graph
    }

    /// Complementary weights `w̄ = 1 − w`.
    pub fn w_bar(&self) -> &Array2<f64> {
        &self.w_bar
    }

    pub fn m(&self) -> usize {
        self.graph.m()
    }

    pub fn n(&self) -> usize {
        self.capacities.len()
    }

    pub fn capacities(&self) -> &[usize] {
        &self.capacities
    }

    pub fn desired(&self) -> &[f64] {
        &self.desired
    }

    pub fn write_to<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{INSTANCE_HEADER} m={} n={}", self.m(), self.n())?;
        let caps: Vec<String> = self.capacities.iter().map(|c| c.to_string()).collect();
        writeln!(out, "capacities {}", caps.join(" "))?;
        let des: Vec<String> = self.desired.iter().map(|&q| fmt9(q)).collect();
        writeln!(out, "desired {}", des.join(" "))?;
        self.graph.write_to(out)
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("instance text is ascii")
    }

    /// Parses a `qapinst v1` document. The graph is either embedded or named
    /// by a `graph <path>` line, resolved relative to `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&std::path::Path>) -> Result<Self> {
        let bad = |line: usize, msg: String| QapError::Format {
            what: "instance file",
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (hl, header) = next_content(&mut lines).ok_or_else(|| bad(0, "empty file".into()))?;
        let field = |key: &str| -> Result<usize> {
            let v = parse_header(header, INSTANCE_HEADER, key).map_err(|e| bad(hl, e))?;
            v.parse().map_err(|_| bad(hl, format!("bad {key}={v:?}")))
        };
        let (m, n) = (field("m")?, field("n")?);

        let (cl, cap_line) = next_content(&mut lines).ok_or_else(|| bad(hl + 1, "missing capacities".into()))?;
        let capacities: Vec<usize> = labelled_values(cap_line, "capacities").map_err(|e| bad(cl, e))?;
        let (dl, des_line) = next_content(&mut lines).ok_or_else(|| bad(cl + 1, "missing desired".into()))?;
        let desired: Vec<f64> = labelled_values(des_line, "desired").map_err(|e| bad(dl, e))?;
        if capacities.len() != n || desired.len() != n {
            return Err(bad(cl, format!("expected {n} capacities and desired shares")));
        }
        let sum: f64 = desired.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(bad(dl, format!("desired shares sum to {sum}")));
        }
        let desired: Vec<f64> = desired.iter().map(|q| q / sum).collect();

        let mut rest = lines.peekable();
        let graph = match rest.peek() {
            Some((gl, l)) if l.trim_start().starts_with("graph ") => {
                let gl = *gl;
                let rel = l.trim_start()["graph ".len()..].trim();
                let path = match base_dir {
                    Some(dir) => dir.join(rel),
                    None => rel.into(),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| bad(gl, format!("cannot read {}: {e}", path.display())))?;
                CommGraph::parse(&text)?
            }
            _ => parse_graph_lines(&mut rest)?,
        };
        if graph.m() != m {
            return Err(bad(hl, format!("header says m={m}, graph has {}", graph.m())));
        }
        let desired = normalize_exact(desired);
        Self::new(graph, capacities, desired)
    }
}

fn labelled_values<T: std::str::FromStr>(line: &str, label: &str) -> std::result::Result<Vec<T>, String> {
    let mut toks = line.split_whitespace();
    if toks.next() != Some(label) {
        return Err(format!("expected line starting with {label:?}"));
    }
    toks.map(|t| t.parse().map_err(|_| format!("bad value {t:?}"))).collect()
}

/// Rescales so the sum lands within 1e-12 of one.
fn normalize_exact(mut v: Vec<f64>) -> Vec<f64> {
    for _ in 0..3 {
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() <= 1e-12 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

/// Phone → host index vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AllocationState {
    assign: Vec<usize>,
}

impl AllocationState {
    pub fn new(assign: Vec<usize>) -> Self {
        Self { assign }
    }

    /// Each phone on an independent uniformly random host.
    pub fn random<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Self {
        Self {
            assign: (0..m).map(|_| rng.gen_range(0..n)).collect(),
        }
    }

    pub fn assign(&self) -> &[usize] {
        &self.assign
    }

    pub fn host_of(&self, phone: usize) -> usize {
        self.assign[phone]
    }

    pub fn len(&self) -> usize {
        self.assign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assign.is_empty()
    }

    pub fn check(&self, m: usize, n: usize) -> Result<()> {
        if self.assign.len() != m {
            return Err(QapError::State(format!(
                "state has {} phones, instance has {m}",
                self.assign.len()
            )));
        }
        if let Some((i, &h)) = self.assign.iter().enumerate().find(|(_, &h)| h >= n) {
            return Err(QapError::State(format!("phone {i} on host {h}, only {n} hosts")));
        }
        Ok(())
    }

    /// Occupancy per host.
    pub fn counts(&self, n: usize) -> Vec<usize> {
        let mut c = vec![0; n];
        for &h in &self.assign {
            c[h] += 1;
        }
        c
    }

    /// The `m × n` one-hot allocation matrix.
    pub fn one_hot(&self, n: usize) -> Array2<f64> {
        let mut x = Array2::zeros((self.assign.len(), n));
        for (i, &h) in self.assign.iter().enumerate() {
            x[[i, h]] = 1.0;
        }
        x
    }
}

impl From<Vec<usize>> for AllocationState {
    fn from(assign: Vec<usize>) -> Self {
        Self::new(assign)
    }
}

/// Total complementary weight over co-located pairs, `½ tr(Xᵀ W̄ X)`.
pub fn risk(inst: &ProblemInstance, s: &AllocationState) -> Result<f64> {
    s.check(inst.m(), inst.n())?;
    Ok(risk_unchecked(inst.w_bar(), s.assign()))
}

pub(crate) fn risk_unchecked(w_bar: &Array2<f64>, assign: &[usize]) -> f64 {
    let m = assign.len();
    let mut total = 0.0;
    for i in 0..m {
        let row = w_bar.row(i);
        for j in (i + 1)..m {
            if assign[i] == assign[j] {
                total += row[j];
            }
        }
    }
    total
}

/// Change in risk when `phone` moves to `host`, in O(m).
pub fn risk_delta(inst: &ProblemInstance, s: &AllocationState, phone: usize, host: usize) -> f64 {
    let old = s.assign[phone];
    if old == host {
        return 0.0;
    }
    let row = inst.w_bar().row(phone);
    let mut delta = 0.0;
    for (j, &h) in s.assign.iter().enumerate() {
        if j == phone {
            continue;
        }
        if h == host {
            delta += row[j];
        } else if h == old {
            delta -= row[j];
        }
    }
    delta
}

pub fn is_feasible(inst: &ProblemInstance, s: &AllocationState) -> bool {
    s.counts(inst.n())
        .iter()
        .zip(inst.capacities())
        .all(|(count, cap)| count <= cap)
}

/// Fraction of phones on each host.
pub fn host_distribution(inst: &ProblemInstance, s: &AllocationState) -> Vec<f64> {
    let m = s.len() as f64;
    s.counts(inst.n()).iter().map(|&c| c as f64 / m).collect()
}

/// `KL(actual ‖ desired)` with `0 · ln 0 = 0`.
pub fn kl_penalty(inst: &ProblemInstance, s: &AllocationState) -> f64 {
    kl_from_counts(&s.counts(inst.n()), s.len(), inst.desired())
}

pub fn kl_from_counts(counts: &[usize], m: usize, desired: &[f64]) -> f64 {
    let m = m as f64;
    counts
        .iter()
        .zip(desired)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &q)| {
            let p = c as f64 / m;
            p * (p / q).ln()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Copy of `s` with `phone` moved to `host`.
pub fn apply_move(s: &AllocationState, phone: usize, host: usize, n: usize) -> Result<AllocationState> {
    if phone >= s.len() {
        return Err(QapError::State(format!("phone {phone} out of range ({} phones)", s.len())));
    }
    if host >= n {
        return Err(QapError::State(format!("host {host} out of range ({n} hosts)")));
    }
    let mut next = s.clone();
    next.assign[phone] = host;
    Ok(next)
}

/// Reduction in risk plus `beta` times the reduction in KL penalty.
///
/// Single-phone moves use the O(m) incremental risk delta; anything else
/// falls back to full recomputation.
pub fn step_reward(
    inst: &ProblemInstance,
    before: &AllocationState,
    after: &AllocationState,
    beta: f64,
) -> Result<f64> {
    before.check(inst.m(), inst.n())?;
    after.check(inst.m(), inst.n())?;
    let mut diff = before
        .assign
        .iter()
        .zip(&after.assign)
        .enumerate()
        .filter(|(_, (a, b))| a != b);
    let risk_gain = match (diff.next(), diff.next()) {
        (None, _) => return Ok(0.0),
        (Some((phone, (_, &host))), None) => -risk_delta(inst, before, phone, host),
        _ => risk(inst, before)? - risk(inst, after)?,
    };
    Ok(risk_gain + beta * (kl_penalty(inst, before) - kl_penalty(inst, after)))
}

/// Integer capacities from relative shares: `round(rel_j · m)`, then topped up
/// by largest remainder until the total reaches `m`.
pub fn capacities_from_relative(rel: &[f64], m: usize) -> Result<Vec<usize>> {
    if rel.is_empty() {
        return Err(QapError::Config("relative capacities are empty".into()));
    }
    if rel.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(QapError::Config("relative capacities must be nonnegative".into()));
    }
    let sum: f64 = rel.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(QapError::Config(format!("relative capacities sum to {sum}, not 1")));
    }
    let quotas: Vec<f64> = rel.iter().map(|r| r * m as f64).collect();
    let mut caps: Vec<usize> = quotas.iter().map(|q| q.round() as usize).collect();
    let mut total: usize = caps.iter().sum();
    if total < m {
        let mut order: Vec<usize> = (0..rel.len()).collect();
        order.sort_by(|&a, &b| {
            (quotas[b] - caps[b] as f64)
                .total_cmp(&(quotas[a] - caps[a] as f64))
                .then(a.cmp(&b))
        });
        for &j in order.iter().cycle() {
            if total >= m {
                break;
            }
            caps[j] += 1;
            total += 1;
        }
    }
    Ok(caps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen_uniform;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn pair_graph(w01: f64) -> CommGraph {
        let mut w = Array2::eye(2);
        w[[0, 1]] = w01;
        w[[1, 0]] = w01;
        CommGraph::new(w).unwrap()
    }

    fn uniform_instance(m: usize, n: usize, seed: u64) -> ProblemInstance {
        let g = gen_uniform(m, seed).unwrap();
        ProblemInstance::new(g, vec![m; n], vec![1.0 / n as f64; n]).unwrap_or_else(|_| {
            let rel = vec![1.0 / n as f64; n];
            ProblemInstance::with_relative_capacities(gen_uniform(m, seed).unwrap(), &rel).unwrap()
        })
    }

    /// Straight double loop over ordered pairs, halved.
    fn pairwise_oracle(w_bar: &Array2<f64>, assign: &[usize]) -> f64 {
        let m = assign.len();
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i != j && assign[i] == assign[j] {
                    s += w_bar[[i, j]];
                }
            }
        }
        0.5 * s
    }

    #[test]
    fn risk_pair_examples() {
        let inst = ProblemInstance::new(pair_graph(0.3), vec![2, 2], vec![0.5, 0.5]).unwrap();
        let r = risk(&inst, &vec![0, 0].into()).unwrap();
        assert!((r - 0.7).abs() < 1e-15);
        assert_eq!(risk(&inst, &vec![0, 1].into()).unwrap(), 0.0);
        assert!(matches!(risk(&inst, &vec![0, 2].into()), Err(QapError::State(_))));
    }

    #[test]
    fn risk_matches_pairwise_enumeration() {
        let inst = uniform_instance(5, 3, 17);
        let mut rng = rng_from_seed(3);
        for _ in 0..50 {
            let s = AllocationState::random(5, 3, &mut rng);
            let r = risk(&inst, &s).unwrap();
            let x = s.one_hot(3);
            let trace = 0.5 * (x.t().dot(inst.w_bar()).dot(&x)).diag().sum();
            assert!((r - pairwise_oracle(inst.w_bar(), s.assign())).abs() < 1e-12);
            assert!((r - trace).abs() < 1e-12);
        }
    }

    #[test]
    fn feasibility_examples() {
        let g = gen_uniform(4, 0).unwrap();
        let inst = ProblemInstance::new(g.clone(), vec![2, 2], vec![0.5, 0.5]).unwrap();
        assert!(is_feasible(&inst, &vec![0, 0, 1, 1].into()));
        let inst = ProblemInstance::new(g, vec![1, 3], vec![0.25, 0.75]).unwrap();
        assert!(!is_feasible(&inst, &vec![0, 0, 1, 1].into()));

        let rel = [0.1, 0.1, 0.2, 0.3, 0.3];
        let inst = ProblemInstance::with_relative_capacities(gen_uniform(100, 1).unwrap(), &rel).unwrap();
        assert_eq!(inst.capacities(), &[10, 10, 20, 30, 30]);
        let mut assign = Vec::new();
        for (h, c) in [10, 10, 20, 30, 30].iter().enumerate() {
            assign.extend(std::iter::repeat_n(h, *c));
        }
        let s = AllocationState::new(assign);
        assert!(is_feasible(&inst, &s));
        assert_eq!(host_distribution(&inst, &s), vec![0.1, 0.1, 0.2, 0.3, 0.3]);
        let uniform = [0.2; 5];
        let oracle: f64 = [0.1f64, 0.1, 0.2, 0.3, 0.3]
            .iter()
            .zip(uniform)
            .map(|(p, q)| p * (p / q).ln())
            .sum();
        let inst_u = ProblemInstance::new(inst.graph().clone(), vec![30; 5], uniform.to_vec()).unwrap();
        assert!((kl_penalty(&inst_u, &s) - oracle).abs() < 1e-15);
        assert!(kl_penalty(&inst, &s).abs() < 1e-15);
    }

    #[test]
    fn distribution_and_kl_examples() {
        let g = gen_uniform(4, 0).unwrap();
        let inst = ProblemInstance::new(g, vec![4, 4], vec![0.5, 0.5]).unwrap();
        let all0: AllocationState = vec![0, 0, 0, 0].into();
        assert_eq!(host_distribution(&inst, &all0), vec![1.0, 0.0]);
        assert!((kl_penalty(&inst, &all0) - std::f64::consts::LN_2).abs() < 1e-15);
        let rr: AllocationState = vec![0, 1, 0, 1].into();
        assert_eq!(host_distribution(&inst, &rr), vec![0.5, 0.5]);
        assert_eq!(kl_penalty(&inst, &rr), 0.0);
    }

    #[test]
    fn apply_move_examples() {
        let s: AllocationState = vec![0, 0].into();
        assert_eq!(apply_move(&s, 1, 0, 2).unwrap(), s);
        assert_eq!(apply_move(&s, 1, 1, 2).unwrap(), vec![0, 1].into());
        assert_eq!(s.assign(), &[0, 0]);
        assert!(apply_move(&s, 2, 0, 2).is_err());
        assert!(apply_move(&s, 0, 2, 2).is_err());
    }

    #[test]
    fn incremental_delta_matches_full() {
        let inst = uniform_instance(12, 4, 5);
        let mut rng = rng_from_seed(8);
        let mut s = AllocationState::random(12, 4, &mut rng);
        for _ in 0..200 {
            let phone = rng.gen_range(0..12);
            let host = rng.gen_range(0..4);
            let next = apply_move(&s, phone, host, 4).unwrap();
            let full = risk(&inst, &next).unwrap() - risk(&inst, &s).unwrap();
            assert!((risk_delta(&inst, &s, phone, host) - full).abs() < 1e-12);
            s = next;
        }
    }

    #[test]
    fn reward_examples() {
        let inst = ProblemInstance::new(pair_graph(0.3), vec![2, 2], vec![0.5, 0.5]).unwrap();
        let s: AllocationState = vec![0, 0].into();
        assert_eq!(step_reward(&inst, &s, &s, 1.0).unwrap(), 0.0);
        // separating the pair also fixes the distribution, so isolate risk with beta = 0
        let r = step_reward(&inst, &s, &vec![0, 1].into(), 0.0).unwrap();
        assert!((r - 0.7).abs() < 1e-15);
        // w̄(0,1) = 0.7 is the only conflict; [0,0,1] -> [1,0,1] mirrors the counts
        let mut w = Array2::eye(3);
        w[[0, 1]] = 0.3;
        w[[1, 0]] = 0.3;
        w[[0, 2]] = 1.0;
        w[[2, 0]] = 1.0;
        w[[1, 2]] = 1.0;
        w[[2, 1]] = 1.0;
        let inst3 = ProblemInstance::new(CommGraph::new(w).unwrap(), vec![3, 3], vec![0.5, 0.5]).unwrap();
        let before: AllocationState = vec![0, 0, 1].into();
        let after: AllocationState = vec![1, 0, 1].into();
        let r = step_reward(&inst3, &before, &after, 1.0).unwrap();
        assert!((r - 0.7).abs() < 1e-12);
    }

    #[test]
    fn penalty_components_telescope() {
        let inst = uniform_instance(10, 3, 2);
        let mut rng = rng_from_seed(4);
        let mut s = AllocationState::random(10, 3, &mut rng);
        let (r0, kl0) = (risk(&inst, &s).unwrap(), kl_penalty(&inst, &s));
        let mut pen = 0.0;
        let mut total = 0.0;
        for phone in 0..10 {
            let next = apply_move(&s, phone, rng.gen_range(0..3), 3).unwrap();
            pen += 2.5 * (kl_penalty(&inst, &s) - kl_penalty(&inst, &next));
            total += step_reward(&inst, &s, &next, 2.5).unwrap();
            s = next;
        }
        let (r1, kl1) = (risk(&inst, &s).unwrap(), kl_penalty(&inst, &s));
        assert!((pen - 2.5 * (kl0 - kl1)).abs() < 1e-12);
        assert!((total - (r0 - r1 + 2.5 * (kl0 - kl1))).abs() < 1e-9);
    }

    #[test]
    fn relative_capacity_examples() {
        assert_eq!(capacities_from_relative(&[0.1, 0.1, 0.2, 0.3, 0.3], 100).unwrap(), vec![10, 10, 20, 30, 30]);
        assert_eq!(capacities_from_relative(&[0.5, 0.5], 3).unwrap(), vec![2, 2]);
        let third = 1.0 / 3.0;
        let caps = capacities_from_relative(&[third; 3], 10).unwrap();
        assert!(caps.iter().sum::<usize>() >= 10);
        assert!(caps.iter().all(|c| *c == 3 || *c == 4));
        assert!(capacities_from_relative(&[0.5, 0.6], 10).is_err());
    }

    #[test]
    fn instance_validation() {
        let g = gen_uniform(4, 0).unwrap();
        assert!(matches!(
            ProblemInstance::new(g.clone(), vec![1, 1], vec![0.5, 0.5]),
            Err(QapError::Infeasible(_))
        ));
        assert!(ProblemInstance::new(g.clone(), vec![2, 2], vec![1.0, 0.0]).is_err());
        assert!(ProblemInstance::new(g, vec![2, 2], vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn instance_text_roundtrip() {
        let cfg = crate::graph::SbmConfig::equal_clusters(100, 5, 0.7, 0.05, 3).unwrap();
        let g = crate::graph::gen_sbm(&cfg).unwrap();
        let inst = ProblemInstance::with_relative_capacities(g, &[0.1, 0.1, 0.2, 0.3, 0.3]).unwrap();
        let text = inst.to_text();
        assert!(text.starts_with("qapinst v1 m=100 n=5\ncapacities 10 10 20 30 30\n"));
        assert_eq!(ProblemInstance::parse(&text, None).unwrap(), inst);
    }

    #[test]
    fn instance_with_referenced_graph() {
        let dir = std::env::temp_dir().join(format!("qapinst-ref-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let g = gen_uniform(3, 1).unwrap();
        std::fs::write(dir.join("g.txt"), g.to_text()).unwrap();
        let text = "qapinst v1 m=3 n=2\ncapacities 2 2\ndesired 0.5 0.5\ngraph g.txt\n";
        let inst = ProblemInstance::parse(text, Some(&dir)).unwrap();
        assert_eq!(inst.m(), 3);
        for i in 0..3 {
            for j in 0..3 {
                assert!((inst.graph().weight(i, j) - g.weight(i, j)).abs() < 1e-8);
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    proptest! {
        #[test]
        fn risk_bounds_and_relabel_invariance(
            seed in any::<u64>(),
            m in 2usize..15,
            n in 1usize..5,
            perm_seed in any::<u64>(),
        ) {
            let g = gen_uniform(m, seed).unwrap();
            let inst = ProblemInstance::new(g, vec![m; n], vec![1.0 / n as f64; n]);
            prop_assume!(inst.is_ok());
            let inst = inst.unwrap();
            let mut rng = rng_from_seed(perm_seed);
            let s = AllocationState::random(m, n, &mut rng);
            let r = risk(&inst, &s).unwrap();
            prop_assert!(r >= 0.0 && r <= (m * (m - 1) / 2) as f64);
            let mut labels: Vec<usize> = (0..n).collect();
            use rand::seq::SliceRandom;
            labels.shuffle(&mut rng);
            let relabeled = AllocationState::new(s.assign().iter().map(|&h| labels[h]).collect());
            prop_assert!((risk(&inst, &relabeled).unwrap() - r).abs() < 1e-12);
            let kl = kl_penalty(&inst, &s);
            prop_assert!(kl >= 0.0);
            let counts = s.counts(n);
            if counts.iter().all(|&c| c * n == m) {
                prop_assert!(kl.abs() < 1e-12);
            } else {
                prop_assert!(kl > 0.0);
            }
        }

        #[test]
        fn episode_rewards_telescope(seed in any::<u64>(), beta in 0.0f64..3.0) {
            let inst = uniform_instance(9, 3, seed);
            let mut rng = rng_from_seed(seed ^ 1);
            let s0 = AllocationState::random(9, 3, &mut rng);
            let mut s = s0.clone();
            let mut total = 0.0;
            for phone in 0..9 {
                let next = apply_move(&s, phone, rng.gen_range(0..3), 3).unwrap();
                total += step_reward(&inst, &s, &next, beta).unwrap();
                s = next;
            }
            let expect = risk(&inst, &s0).unwrap() - risk(&inst, &s).unwrap()
                + beta * (kl_penalty(&inst, &s0) - kl_penalty(&inst, &s));
            prop_assert!((total - expect).abs() < 1e-9);
        }
    }
}
