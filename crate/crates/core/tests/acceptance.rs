//! Acceptance suite. Prints one PASS/FAIL line per criterion, preceded by the
//! individual checks it aggregates, and exits nonzero when any check fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use tci_core::corpus::synth::Group;
use tci_core::corpus::{generate_synthetic_corpus, IpcLevel, PatentRecord, SynthConfig};
use tci_core::embed::{EmbeddingKind, EmbeddingTable};
use tci_core::hgraph::{build_graph, initial_features, EdgeRef, GraphConfig, HeteroGraph};
use tci_core::hgt::{self, AttentionScope, EncoderParams, TrainConfig};
use tci_core::index::{
    compose_tci, enforce_weight_constraint, entropy_weights, IndicatorMatrix, Variant, WeightVector,
};
use tci_core::metrics::{
    average_distance_score, breadth_raw, clustering_coefficient_score, depth1, depth2, BreadthInputs, CoocNetwork,
    DepthInputs,
};
use tci_core::pipeline::{Run, RunConfig, ScoreTable, CHECKPOINT_FILE, EDGES_FILE, NODES_FILE};
use tci_core::stats::{self, correlation_matrix, ols_fit, pearson, spearman};

const SEED: u64 = 20240601;
const PLANTED_BETA: f64 = 0.5;

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
}

impl Criterion {
    fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        let detail = detail.into();
        println!("    {} {name}: {detail}", if pass { "ok  " } else { "FAIL" });
        self.checks.push(Check { name: name.into(), pass, detail });
    }

    fn finish(self, title: &str) -> bool {
        let pass = self.checks.iter().all(|c| c.pass);
        let failed: Vec<String> =
            self.checks.iter().filter(|c| !c.pass).map(|c| format!("{} ({})", c.name, c.detail)).collect();
        if pass {
            println!("PASS {title} [{} checks]", self.checks.len());
        } else {
            println!("FAIL {title}: {}", failed.join("; "));
        }
        pass
    }
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    unit((0..dim).map(|_| normal.sample(rng)).collect())
}

fn cos_clamped(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// oracle equivalence

fn oracle_sdi(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut uniform_worst: f64 = 0.0;
    for t in 0..1000 {
        let n = rng.random_range(1..=12);
        let counts: BTreeMap<String, usize> = (0..n).map(|i| (format!("C{i:02}"), rng.random_range(1..=20))).collect();
        let total: usize = counts.values().sum();
        let direct: f64 = -counts.values().map(|&k| k as f64 / total as f64).map(|p| p * p.ln()).sum::<f64>();
        worst = worst.max((breadth_raw(&BreadthInputs::new(format!("p{t}"), counts)) - direct).abs());

        let k = rng.random_range(1..=5);
        let uniform: BTreeMap<String, usize> = (0..n).map(|i| (format!("C{i:02}"), k)).collect();
        let got = breadth_raw(&BreadthInputs::new("u", uniform));
        uniform_worst = uniform_worst.max((got - (n as f64).ln()).abs());
    }
    c.check("SDI vs -sum p ln p (1000 count vectors)", worst < 1e-9, format!("max err {worst:.2e}"));
    c.check("SDI uniform equals ln N", uniform_worst < 1e-9, format!("max err {uniform_worst:.2e}"));
}

/// Textbook entropy weights on the min-max normalized matrix.
fn ewm_oracle(cols: &[Vec<f64>]) -> Vec<f64> {
    let n = cols[0].len() as f64;
    let mut div = Vec::new();
    for col in cols {
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: Vec<f64> = col.iter().map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }).collect();
        let s: f64 = z.iter().sum();
        let e = if s == 0.0 {
            1.0
        } else {
            -z.iter().map(|v| v / s).filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>() / n.ln()
        };
        div.push(1.0 - e);
    }
    let total: f64 = div.iter().sum();
    if total <= 0.0 {
        return vec![1.0 / cols.len() as f64; cols.len()];
    }
    div.iter().map(|d| d / total).collect()
}

fn oracle_ewm(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut sum_worst, mut const_worst) = (0.0f64, 0.0f64, 0.0f64);
    let mut const_trials = 0;
    for t in 0..200 {
        let rows = rng.random_range(2..=60);
        let ncols = rng.random_range(2..=5);
        let constant = if t % 4 == 0 { Some(rng.random_range(0..ncols)) } else { None };
        let cols: Vec<Vec<f64>> = (0..ncols)
            .map(|j| {
                if Some(j) == constant {
                    vec![rng.random_range(0.0..1.0); rows]
                } else {
                    (0..rows).map(|_| rng.random_range(0.0..1.0)).collect()
                }
            })
            .collect();
        let m = IndicatorMatrix::from_columns(&cols).unwrap();
        let w = entropy_weights(&m).unwrap();
        let want = ewm_oracle(&cols);
        for (a, b) in w.as_slice().iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
        sum_worst = sum_worst.max((w.sum() - 1.0).abs());
        if let Some(j) = constant {
            const_trials += 1;
            const_worst = const_worst.max(w.as_slice()[j].abs());
        }
    }
    c.check("EWM vs brute force (200 matrices)", worst < 1e-9, format!("max err {worst:.2e}"));
    c.check(
        "EWM constant column weight 0",
        const_worst == 0.0 && const_trials > 0,
        format!("{const_trials} matrices, max weight {const_worst:.2e}"),
    );
    c.check("EWM weights sum to 1", sum_worst < 1e-12, format!("max |sum-1| {sum_worst:.2e}"));
}

fn oracle_depth(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut w1, mut w2) = (0.0f64, 0.0f64);
    let mut degenerate_ok = true;
    for _ in 0..500 {
        let dim = rng.random_range(2..=16);
        let n = rng.random_range(0..=8);
        let k = rng.random_range(0..=4);
        let main = random_unit(&mut rng, dim);
        let sec: Vec<Vec<f64>> = (0..n).map(|_| random_unit(&mut rng, dim)).collect();
        let inputs = DepthInputs {
            patent_id: "p",
            main: &main,
            secondary: sec.iter().map(Vec::as_slice).collect(),
            smoothing_k: k,
        };
        let d1 = depth1(&inputs);
        let d2 = depth2(&inputs);
        let o1 =
            if n == 0 { 0.0 } else { 1.0 - sec.iter().map(|s| cos_clamped(&main, s)).fold(f64::INFINITY, f64::min) };
        let o2 = if n < 2 {
            0.0
        } else {
            let mut sims = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i < j {
                        sims.push(cos_clamped(&sec[i], &sec[j]));
                    }
                }
            }
            let avg = sims.iter().sum::<f64>() / sims.len() as f64;
            let max = sims.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let alpha = n as f64 / (n as f64 + k as f64);
            1.0 - (alpha * avg + (1.0 - alpha) * max)
        };
        w1 = w1.max((d1 - o1).abs());
        w2 = w2.max((d2 - o2).abs());
        if (n == 0 && (d1 != 0.0 || d2 != 0.0)) || (n == 1 && d2 != 0.0) {
            degenerate_ok = false;
        }
    }
    c.check("depth1 vs exhaustive min (500 sets)", w1 < 1e-9, format!("max err {w1:.2e}"));
    c.check("depth2 vs pair enumeration (500 sets)", w2 < 1e-9, format!("max err {w2:.2e}"));
    c.check("degenerate depths (D1 = D2 = 0 at n = 0, D2 = 0 at n = 1)", degenerate_ok, "checked on all sets");
}

fn record(id: &str, codes: &[String]) -> PatentRecord {
    PatentRecord {
        patent_id: id.into(),
        year: 2020,
        main_ipc: codes[0].clone(),
        secondary_ipcs: codes[1..].to_vec(),
        applicants: vec!["a".into()],
        topics: vec![],
        first_claims: 0.0,
        forward_citations: 0,
        backward_citations: 0,
        pages: 1,
        claims: 1,
    }
}

fn oracle_networks(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut cc_worst, mut dist_worst, mut score_worst) = (0.0f64, 0.0f64, 0.0f64);
    for net_i in 0..50 {
        let n = rng.random_range(2..=30);
        let p = rng.random_range(0.05..0.5);
        let names: Vec<String> = (0..n)
            .map(|i| {
                format!("{}{:02}{}", (b'A' + (i / 26) as u8) as char, 10 + net_i % 80, (b'A' + (i % 26) as u8) as char)
            })
            .collect();
        let mut adj = vec![vec![false; n]; n];
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(p) {
                    adj[i][j] = true;
                    adj[j][i] = true;
                    edges.push((names[i].clone(), names[j].clone()));
                }
            }
        }
        let net = CoocNetwork::from_edges(IpcLevel::Subclass, &names, &edges);

        // Floyd–Warshall
        let inf = f64::INFINITY;
        let mut d = vec![vec![inf; n]; n];
        for i in 0..n {
            d[i][i] = 0.0;
            for j in 0..n {
                if adj[i][j] {
                    d[i][j] = 1.0;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        let diameter = d.iter().flatten().filter(|x| x.is_finite()).cloned().fold(0.0, f64::max);

        // triangles over wedges
        let cc: Vec<f64> = (0..n)
            .map(|u| {
                let nb: Vec<usize> = (0..n).filter(|&v| adj[u][v]).collect();
                let k = nb.len();
                if k < 2 {
                    return 0.0;
                }
                let mut tri = 0;
                for a in 0..k {
                    for b in 0..k {
                        if a < b && adj[nb[a]][nb[b]] {
                            tri += 1;
                        }
                    }
                }
                tri as f64 / (k * (k - 1) / 2) as f64
            })
            .collect();

        for i in 0..n {
            cc_worst = cc_worst.max((net.clustering_coefficient(&names[i]).unwrap() - cc[i]).abs());
            for j in 0..n {
                let got = net.distance(&names[i], &names[j]).map_or(inf, f64::from);
                if got != d[i][j] {
                    dist_worst = dist_worst.max(if got.is_finite() && d[i][j].is_finite() {
                        (got - d[i][j]).abs()
                    } else {
                        inf
                    });
                }
            }
        }

        for t in 0..10 {
            let m = rng.random_range(1..=n.min(6));
            let mut idx: Vec<usize> = (0..n).collect();
            for i in 0..m {
                let j = rng.random_range(i..n);
                idx.swap(i, j);
            }
            let pick = &idx[..m];
            let codes: Vec<String> = pick.iter().map(|&i| names[i].clone()).collect();
            let rec = record(&format!("P{t}"), &codes);
            let want_cc = pick.iter().map(|&i| cc[i]).sum::<f64>() / m as f64;
            let want_d = if m < 2 {
                0.0
            } else {
                let (mut s, mut cnt) = (0.0, 0);
                for a in 0..m {
                    for b in a + 1..m {
                        let x = d[pick[a]][pick[b]];
                        s += if x.is_finite() { x } else { diameter + 1.0 };
                        cnt += 1;
                    }
                }
                s / cnt as f64
            };
            score_worst = score_worst
                .max((clustering_coefficient_score(&rec, &net) - want_cc).abs())
                .max((average_distance_score(&rec, &net, None) - want_d).abs());
        }
    }
    c.check(
        "clustering coefficient vs triangle/wedge enumeration (50 networks)",
        cc_worst < 1e-12,
        format!("max err {cc_worst:.2e}"),
    );
    c.check("distances vs Floyd-Warshall", dist_worst < 1e-9, format!("max err {dist_worst:.2e}"));
    c.check("V1/V2 patent scores vs oracle networks", score_worst < 1e-9, format!("max err {score_worst:.2e}"));
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn oracle_ols(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (mut coef_worst, mut orth_worst, mut shift_worst) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(30..=120);
        let p = rng.random_range(1..=4);
        let n_years = rng.random_range(1..=4);
        let x: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| normal.sample(&mut rng)).collect()).collect();
        let years: Vec<i32> = (0..n).map(|i| 2000 + (i % n_years) as i32).collect();
        let beta: Vec<f64> = (0..p).map(|_| normal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                1.0 + (0..p).map(|j| beta[j] * x[j][i]).sum::<f64>()
                    + 0.3 * (years[i] - 2000) as f64
                    + normal.sample(&mut rng)
            })
            .collect();
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let regs: Vec<(&str, &[f64])> = names.iter().map(String::as_str).zip(x.iter().map(Vec::as_slice)).collect();
        let fit = ols_fit(&y, &regs, Some(&years)).unwrap();

        // design in the same column order: intercept, regressors, year dummies
        let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
        cols.extend(x.iter().cloned());
        for yr in 2001..2000 + n_years as i32 {
            cols.push(years.iter().map(|&v| f64::from(u8::from(v == yr))).collect());
        }
        let k = cols.len();
        let xtx: Vec<Vec<f64>> =
            (0..k).map(|a| (0..k).map(|b| (0..n).map(|i| cols[a][i] * cols[b][i]).sum()).collect()).collect();
        let xty: Vec<f64> = (0..k).map(|a| (0..n).map(|i| cols[a][i] * y[i]).sum()).collect();
        let want = gauss_solve(xtx, xty);
        assert_eq!(fit.coefficients.len(), k);
        for (got, w) in fit.coefficients.iter().zip(&want) {
            coef_worst = coef_worst.max((got.estimate - w).abs());
        }
        for col in &cols {
            let dot: f64 = col.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            orth_worst = orth_worst.max(dot.abs());
        }

        // adding a per-year constant moves only the intercept and dummies
        let shifts: Vec<f64> = (0..n_years).map(|_| 5.0 * normal.sample(&mut rng)).collect();
        let y2: Vec<f64> = (0..n).map(|i| y[i] + shifts[(years[i] - 2000) as usize]).collect();
        let fit2 = ols_fit(&y2, &regs, Some(&years)).unwrap();
        for name in &names {
            let a = fit.coefficient(name).unwrap().estimate;
            let b = fit2.coefficient(name).unwrap().estimate;
            shift_worst = shift_worst.max((a - b).abs());
        }
    }
    c.check("OLS vs normal equations (100 designs)", coef_worst < 1e-8, format!("max err {coef_worst:.2e}"));
    c.check("residual-design orthogonality", orth_worst < 1e-8, format!("max |X'e| {orth_worst:.2e}"));
    c.check("year-shift absorption", shift_worst < 1e-8, format!("max regressor change {shift_worst:.2e}"));
}

fn textbook_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn textbook_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let less = x.iter().filter(|w| *w < v).count() as f64;
            let equal = x.iter().filter(|w| *w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn oracle_correlations(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut pw, mut sw) = (0.0f64, 0.0f64);
    let mut diag_exact = true;
    for _ in 0..100 {
        let n = rng.random_range(5..=80);
        // coarse values so ties occur
        let cols: Vec<(String, Vec<f64>)> = (0..4)
            .map(|j| (format!("c{j}"), (0..n).map(|_| rng.random_range(0.0f64..10.0).round()).collect()))
            .collect();
        let m = correlation_matrix(&cols).unwrap();
        for a in 0..4 {
            diag_exact &= m.pearson[a][a].is_none_or(|v| v == 1.0) && m.spearman[a][a].is_none_or(|v| v == 1.0);
            for b in 0..4 {
                if a == b {
                    continue;
                }
                let (x, y) = (&cols[a].1, &cols[b].1);
                if let Some(got) = pearson(x, y) {
                    pw = pw.max((got - textbook_pearson(x, y)).abs());
                }
                if let Some(got) = spearman(x, y) {
                    sw = sw.max((got - textbook_pearson(&textbook_ranks(x), &textbook_ranks(y))).abs());
                }
            }
        }
    }
    c.check("Pearson vs textbook formula", pw < 1e-10, format!("max err {pw:.2e}"));
    c.check("Spearman vs ranked textbook formula", sw < 1e-10, format!("max err {sw:.2e}"));
    c.check("correlation diagonal exactly 1", diag_exact, "100 matrices");
}

// ---------------------------------------------------------------------------
// encoder

fn small_corpus_graph(seed: u64) -> (HeteroGraph, EmbeddingTable) {
    let cfg = SynthConfig {
        n_patents: 14,
        n_fields: 2,
        codes_per_field: 4,
        dim: 6,
        topics_per_field: 2,
        n_applicants: 4,
        high_secondaries: (2, 3),
        ..SynthConfig::default()
    };
    let s = generate_synthetic_corpus(&cfg, seed).unwrap();
    let graph = build_graph(&s.corpus, &s.embeddings, &GraphConfig { knn_k: 2, sim_threshold: 0.0 }).unwrap();
    let init = initial_features(&graph, &s.embeddings).unwrap();
    (graph, init)
}

fn shuffled(graph: &HeteroGraph, seed: u64) -> HeteroGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = graph.nodes().to_vec();
    let mut edges: Vec<EdgeRef> = graph
        .edges()
        .iter()
        .map(|e| EdgeRef {
            relation: e.relation,
            src: graph.node(e.src).clone(),
            dst: graph.node(e.dst).clone(),
            weight: e.weight,
        })
        .collect();
    for i in (1..nodes.len()).rev() {
        nodes.swap(i, rng.random_range(0..=i));
    }
    for i in (1..edges.len()).rev() {
        edges.swap(i, rng.random_range(0..=i));
    }
    HeteroGraph::from_parts(nodes, edges).unwrap()
}

struct PipelineRun {
    train: tci_core::pipeline::TrainSummary,
    train_time: Duration,
    total_time: Duration,
    attention_error: f64,
}

fn encoder_checks(c: &mut Criterion, full: &PipelineRun) {
    let (graph, init) = small_corpus_graph(11);
    let cfg = TrainConfig { layers: 2, negatives: 2, seed: 3, ..TrainConfig::default() };
    match hgt::gradient_check(&graph, &init, &cfg, 1e-4) {
        Ok(r) => c.check(
            "gradient check",
            graph.node_count() <= 50 && r.max_rel_error < 1e-3,
            format!("{} nodes, {} params, max rel err {:.2e}", graph.node_count(), r.entries.len(), r.max_rel_error),
        ),
        Err(e) => c.check("gradient check", false, e.to_string()),
    }

    let mut att_worst: f64 = 0.0;
    let mut perm_ok = true;
    for scope in [AttentionScope::Joint, AttentionScope::PerRelation] {
        let params = EncoderParams::init(init.dim(), 2, 5, scope, 0.3);
        let (out, att) = hgt::encode_with_attention(&graph, &init, &params).unwrap();
        att_worst = att_worst.max(att.max_normalization_error(scope));
        for s in 0..5 {
            let g2 = shuffled(&graph, 100 + s);
            perm_ok &= hgt::encode(&g2, &init, &params).unwrap() == out;
        }
    }
    att_worst = att_worst.max(full.attention_error);
    c.check(
        "attention normalization",
        att_worst < 1e-6,
        format!("max |sum - expected| {att_worst:.2e} (fixture + 2,000-patent graph)"),
    );
    c.check("neighbour-permutation invariance", perm_ok, "bit-identical under 5 shuffles per scope");

    let t = &full.train;
    c.check(
        "training loss decreases",
        t.final_loss < t.initial_loss,
        format!("{:.4} -> {:.4}", t.initial_loss, t.final_loss),
    );
    let auc = t.holdout_auc.unwrap_or(f64::NAN);
    c.check("held-out edge AUC > 0.6", auc > 0.6, format!("AUC {auc:.4} over {} held-out edges", t.holdout_edges));
    c.check(
        "training runtime < 5 min",
        full.train_time < Duration::from_secs(300),
        format!("{:.1}s", full.train_time.as_secs_f64()),
    );
}

// ---------------------------------------------------------------------------
// end-to-end

fn run_stages(dir: &Path, data: &Path) -> PipelineRun {
    let text = format!(
        "seed = {SEED}\n[paths]\ncorpus = \"{0}/corpus.jsonl\"\nipc_texts = \"{0}/ipc_texts.tsv\"\nembeddings = \"{0}/embeddings.tsv\"\n",
        data.display()
    );
    let mut cfg = RunConfig::from_toml(&text, data).unwrap();
    cfg.paths.out = dir.to_path_buf();
    let cfg = cfg.finalize().unwrap();
    let start = Instant::now();
    let mut run = Run::new(cfg.clone()).unwrap();
    run.ingest().unwrap();
    run.graph().unwrap();
    let t0 = Instant::now();
    let train = run.train().unwrap();
    let train_time = t0.elapsed();
    run.score().unwrap();
    run.report().unwrap();
    let total_time = start.elapsed();

    let read = |f: &str| std::fs::read_to_string(dir.join(f)).unwrap();
    let graph = HeteroGraph::read(read(NODES_FILE).as_bytes(), read(EDGES_FILE).as_bytes()).unwrap();
    let params = hgt::read_checkpoint(read(CHECKPOINT_FILE).as_bytes()).unwrap();
    let semantic = tci_core::embed::load_embeddings_as(&data.join("embeddings.tsv"), EmbeddingKind::Semantic).unwrap();
    let init = initial_features(&graph, &semantic).unwrap();
    let (_, att) = hgt::encode_with_attention(&graph, &init, &params).unwrap();
    PipelineRun { train, train_time, total_time, attention_error: att.max_normalization_error(cfg.train.attention) }
}

fn planted_checks(c: &mut Criterion, data: &Path, run_a: &Path, run_b: &Path, first: &PipelineRun) {
    let scores = ScoreTable::parse(&std::fs::read_to_string(run_a.join("scores.tsv")).unwrap()).unwrap();
    let truth =
        tci_core::corpus::synth::parse_truth(&std::fs::read_to_string(data.join("truth.tsv")).unwrap()).unwrap();
    let group: BTreeMap<&str, Group> = truth.iter().map(|t| (t.0.as_str(), t.1)).collect();
    let tci = scores.column("v8").unwrap();
    let (mut hi, mut lo) = (Vec::new(), Vec::new());
    for (id, v) in scores.patent_ids.iter().zip(tci) {
        match group[id.as_str()] {
            Group::High => hi.push(*v),
            Group::Low => lo.push(*v),
        }
    }
    let w = stats::welch_t_test(&hi, &lo).unwrap();
    c.check(
        "high group TCI > low group (Welch p < 0.01)",
        w.mean_a > w.mean_b && w.p_greater < 0.01,
        format!("means {:.4} vs {:.4}, t {:.2}, one-sided p {:.2e}", w.mean_a, w.mean_b, w.t_stat, w.p_greater),
    );

    let reg = tci_core::pipeline::read_regression(
        &std::fs::read_to_string(run_a.join("regression_first_claims.tsv")).unwrap(),
    )
    .unwrap();
    let (b, se, p) = reg["tci"];
    c.check(
        "planted beta recovered within 3 SE, p < 0.01",
        (b - PLANTED_BETA).abs() <= 3.0 * se && p < 0.01 && b > 0.0,
        format!("beta {b:.4} (planted {PLANTED_BETA}), se {se:.4}, p {p:.2e}"),
    );

    let cols: Vec<(String, Vec<f64>)> =
        Variant::ALL.iter().map(|v| (v.label().to_string(), scores.column(v.label()).unwrap().to_vec())).collect();
    let m = correlation_matrix(&cols).unwrap();
    let r = |l: &str| m.pearson_between("v8", l).unwrap_or(f64::NAN);
    let (r5, r6, r1, r2) = (r("v5"), r("v6"), r("v1"), r("v2"));
    c.check(
        "Pearson(V8,V5), Pearson(V8,V6) exceed Pearson(V8,V1), Pearson(V8,V2)",
        r5.min(r6) > r1.max(r2),
        format!("V5 {r5:.3}, V6 {r6:.3}, V1 {r1:.3}, V2 {r2:.3}"),
    );

    c.check(
        "full pipeline runtime < 10 min",
        first.total_time < Duration::from_secs(600),
        format!("{:.1}s", first.total_time.as_secs_f64()),
    );

    let mut diffs = Vec::new();
    let mut count = 0;
    for entry in std::fs::read_dir(run_a).unwrap() {
        let name = entry.unwrap().file_name();
        count += 1;
        if std::fs::read(run_a.join(&name)).unwrap() != std::fs::read(run_b.join(&name)).unwrap_or_default() {
            diffs.push(name.to_string_lossy().into_owned());
        }
    }
    c.check(
        "rerun with same seed is byte-identical",
        diffs.is_empty(),
        if diffs.is_empty() { format!("{count} files identical") } else { format!("differs: {}", diffs.join(", ")) },
    );
}

fn index_checks(c: &mut Criterion, run_a: &Path) {
    let scores = ScoreTable::parse(&std::fs::read_to_string(run_a.join("scores.tsv")).unwrap()).unwrap();
    let mut out_of_range = Vec::new();
    for col in ["v8", "D1", "D2", "breadth_norm"] {
        let v = scores.column(col).unwrap();
        let bad = v.iter().filter(|x| !(0.0..=1.0).contains(*x)).count();
        if bad > 0 {
            out_of_range.push(format!("{col}: {bad}"));
        }
    }
    c.check(
        "TCI, D1, D2, normalized breadth in [0,1]",
        out_of_range.is_empty(),
        if out_of_range.is_empty() { format!("{} patents", scores.patent_ids.len()) } else { out_of_range.join(", ") },
    );

    let manifest = tci_core::pipeline::Manifest::load(&run_a.join("manifest.toml")).unwrap();
    let mw = manifest.weights.unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut constraint_ok = mw.w1 > mw.w2;
    for t in 0..1000 {
        let mut raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
        if t % 10 == 0 {
            raw[1] = raw[0];
        }
        let s: f64 = raw.iter().sum();
        let w = enforce_weight_constraint(&WeightVector(raw.iter().map(|x| x / s).collect()));
        constraint_ok &= w.as_slice()[0] > w.as_slice()[1] && (w.sum() - 1.0).abs() < 1e-12;
    }
    c.check(
        "w1 > w2 after enforcement",
        constraint_ok,
        format!("corpus weights ({:.4}, {:.4}, {:.4}) + 1000 random vectors", mw.w1, mw.w2, mw.w3),
    );

    let mut violations = 0;
    for _ in 0..10_000 {
        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(1e-6..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let w = enforce_weight_constraint(&WeightVector(raw.iter().map(|x| x / s).collect()));
        let d: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
        let j = rng.random_range(0..3);
        let mut up = d.clone();
        up[j] = rng.random_range(d[j]..=1.0);
        if compose_tci(&up, &w) < compose_tci(&d, &w) {
            violations += 1;
        }
    }
    c.check("TCI monotone in each component (10,000 trials)", violations == 0, format!("{violations} violations"));
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run_a = tmp.path().join("run_a");
    let run_b = tmp.path().join("run_b");
    let synth = generate_synthetic_corpus(&SynthConfig::default(), SEED).unwrap();
    std::fs::create_dir_all(&data).unwrap();
    synth.save(&data, tci_core::corpus::CorpusFormat::Jsonl).unwrap();
    assert!(synth.truth.iter().all(|t| t.planted_beta == PLANTED_BETA));

    let mut all = true;

    let start = Instant::now();
    let mut oracle = Criterion::default();
    oracle_sdi(&mut oracle);
    oracle_ewm(&mut oracle);
    oracle_depth(&mut oracle);
    oracle_networks(&mut oracle);
    oracle_ols(&mut oracle);
    oracle_correlations(&mut oracle);
    let elapsed = start.elapsed();
    oracle.check(
        "oracle suite runtime < 60 s",
        elapsed < Duration::from_secs(60),
        format!("{:.2}s", elapsed.as_secs_f64()),
    );
    all &= oracle.finish("oracle equivalence");

    let first = run_stages(&run_a, &data);
    let _second = run_stages(&run_b, &data);

    let mut enc = Criterion::default();
    encoder_checks(&mut enc, &first);
    all &= enc.finish("encoder numerical checks");

    let mut planted = Criterion::default();
    planted_checks(&mut planted, &data, &run_a, &run_b, &first);
    all &= planted.finish("planted-structure recovery");

    let mut index = Criterion::default();
    index_checks(&mut index, &run_a);
    all &= index.finish("index invariants");

    if !all {
        std::process::exit(1);
    }
}
