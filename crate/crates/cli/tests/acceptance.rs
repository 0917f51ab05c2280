//! Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use synacc::datamodel::{ClassId, ClassSet, EmbeddingRow, HParamValue, LabeledEmbeddingSet, ModelRecord, Split};
use synacc::frechet::{class_conditional_distance, distance_report, gaussian_stats};
use synacc::numerics::{psd_sqrt, trace_sqrt_product, Matrix, SymMatrix};
use synacc::predictor::fit_calibration;
use synacc::scoring::{
    adjusted_r_squared, build_pair_sign_table, conditional_mutual_information, kendall_tau, kfold_assignment,
    kfold_r_squared, ConditionKey, PairSign, PairSignTable, Sign,
};
use synacc::toygan::{default_suite, run_toy, ToyConfig};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn d_h(a: &LabeledEmbeddingSet<f64>, b: &LabeledEmbeddingSet<f64>) -> Result<f64, String> {
    let (s, t) = (gaussian_stats(a), gaussian_stats(b));
    class_conditional_distance(&s.map_err(|e| e.to_string())?, &t.map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())
}

fn labeled(split: Split, dim: usize, per_class: &[Vec<Vec<f64>>]) -> LabeledEmbeddingSet<f64> {
    let names: Vec<String> = (0..per_class.len()).map(|c| format!("k{c}")).collect();
    let mut rows = Vec::new();
    for (c, vs) in per_class.iter().enumerate() {
        for v in vs {
            rows.push(EmbeddingRow {
                example_id: format!("r{}", rows.len()),
                label: ClassId(c as u32),
                vector: v.clone(),
            });
        }
    }
    LabeledEmbeddingSet::new(split, dim, ClassSet::from_labels(&names), rows).expect("valid set")
}

fn random_set(rng: &mut ChaCha8Rng, split: Split, dim: usize, sizes: &[usize]) -> LabeledEmbeddingSet<f64> {
    let per_class: Vec<Vec<Vec<f64>>> = sizes
        .iter()
        .map(|&n| {
            let (m, s) = (rng.random_range(-3.0..3.0), rng.random_range(0.2..2.0));
            (0..n)
                .map(|_| (0..dim).map(|_| m + s * normal(rng)).collect())
                .collect()
        })
        .collect();
    labeled(split, dim, &per_class)
}

fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fixtures = 50;
    let mut worst = 0.0f64;
    for _ in 0..fixtures {
        let k = rng.random_range(1..=5);
        let mut draw = || -> Vec<Vec<f64>> {
            (0..k)
                .map(|_| {
                    let (m, s) = (rng.random_range(-5.0..5.0), rng.random_range(0.1..3.0));
                    let n = rng.random_range(2..40);
                    (0..n).map(|_| m + s * normal(&mut rng)).collect()
                })
                .collect()
        };
        let (a, b) = (draw(), draw());
        let stats = |v: &[f64]| {
            let n = v.len() as f64;
            let m = v.iter().sum::<f64>() / n;
            (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
        };
        let want: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| {
                let ((m1, s1), (m2, s2)) = (stats(x), stats(y));
                (m1 - m2).powi(2) + (s1 - s2).powi(2)
            })
            .sum();
        let wrap = |v: &[Vec<f64>]| {
            v.iter()
                .map(|c| c.iter().map(|&x| vec![x]).collect())
                .collect::<Vec<_>>()
        };
        let got = d_h(
            &labeled(Split::Train, 1, &wrap(&a)),
            &labeled(Split::Test, 1, &wrap(&b)),
        )?;
        let err = rel_err(got, want);
        worst = worst.max(err);
        ensure(err <= 1e-8, || format!("{got} vs closed form {want}"))?;
    }
    Ok(format!("{fixtures} fixtures, worst relative error {worst:.1e}"))
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> SymMatrix<f64> {
    let b = Matrix::from_fn(n, rank, |_, _| normal(rng));
    let mut m = b.matmul(&b.transpose()).expect("shapes agree");
    for v in m.as_mut_slice() {
        *v /= n as f64;
    }
    SymMatrix::symmetrize(m)
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_sq, mut worst_sym) = (0.0f64, 0.0f64);
    for n in 2..=64 {
        for rank in [n, (n / 2).max(1)] {
            let a = random_psd(&mut rng, n, rank);
            let r = psd_sqrt(&a).map_err(|e| e.to_string())?;
            let sq = r.as_matrix().matmul(r.as_matrix()).expect("square");
            let diff: f64 = sq
                .as_slice()
                .iter()
                .zip(a.as_matrix().as_slice())
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            let err = diff / a.frobenius_norm();
            worst_sq = worst_sq.max(err);
            ensure(err <= 1e-8, || format!("n={n} rank={rank}: sqrt^2 off by {err:e}"))?;
        }
        let (a, b) = (random_psd(&mut rng, n, n), random_psd(&mut rng, n, n));
        let ab = trace_sqrt_product(&a, &b).map_err(|e| e.to_string())?;
        let ba = trace_sqrt_product(&b, &a).map_err(|e| e.to_string())?;
        worst_sym = worst_sym.max(rel_err(ab, ba));
        ensure(rel_err(ab, ba) <= 1e-8, || format!("n={n}: {ab} vs {ba}"))?;
    }
    Ok(format!(
        "dims 2-64, worst sqrt error {worst_sq:.1e}, worst asymmetry {worst_sym:.1e}"
    ))
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let trials = 40;
    let (mut worst_self, mut worst_ratio) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let dim = rng.random_range(1..10);
        let k = rng.random_range(1..5);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(dim + 2..dim + 40)).collect();
        let s = random_set(&mut rng, Split::Train, dim, &sizes);
        let self_d = d_h(&s, &s)?;
        worst_self = worst_self.max(self_d);
        ensure(self_d <= 1e-8, || format!("d_h(S,S) = {self_d:e}"))?;

        let test_sizes: Vec<usize> = (0..k).map(|_| rng.random_range(dim + 2..dim + 40)).collect();
        let test = random_set(&mut rng, Split::Test, dim, &test_sizes);
        let syn = LabeledEmbeddingSet {
            split: Split::Syn,
            ..s.clone()
        };
        let r = distance_report(&s, &test, &syn).map_err(|e| e.to_string())?;
        let dev = (r.ratio_syn_test_over_train_test - 1.0).abs();
        worst_ratio = worst_ratio.max(dev);
        ensure(dev <= 1e-10, || {
            format!("ratio {} with syn = train", r.ratio_syn_test_over_train_test)
        })?;
    }
    Ok(format!(
        "{trials} random sets, max d_h(S,S) {worst_self:.1e}, max |ratio - 1| {worst_ratio:.1e}"
    ))
}

fn brute_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut tx, mut ty) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let (dx, dy) = (x[i] - x[j], y[i] - y[j]);
            match (dx == 0.0, dy == 0.0) {
                (true, true) => {}
                (true, false) => tx += 1.0,
                (false, true) => ty += 1.0,
                _ if (dx > 0.0) == (dy > 0.0) => c += 1.0,
                _ => d += 1.0,
            }
        }
    }
    let den: f64 = (c + d + tx) * (c + d + ty);
    (den > 0.0).then(|| (c - d) / den.sqrt())
}

/// `sum_u p(u) sum_ab p(a,b|u) log2(p(a,b|u) / (p(a|u) p(b|u)))` by counting.
fn brute_cmi(rows: &[(i8, i8, String)]) -> f64 {
    let n = rows.len() as f64;
    let mut groups: HashMap<&str, Vec<(i8, i8)>> = HashMap::new();
    for (a, b, u) in rows {
        groups.entry(u).or_default().push((*a, *b));
    }
    let mut total = 0.0;
    for g in groups.values() {
        let m = g.len() as f64;
        let count = |f: &dyn Fn(&(i8, i8)) -> bool| g.iter().filter(|p| f(p)).count() as f64;
        for a in [-1i8, 1] {
            for b in [-1i8, 1] {
                let pab = count(&|p| p.0 == a && p.1 == b) / m;
                if pab == 0.0 {
                    continue;
                }
                let pa = count(&|p| p.0 == a) / m;
                let pb = count(&|p| p.1 == b) / m;
                total += m / n * pab * (pab / (pa * pb)).log2();
            }
        }
    }
    total
}

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let instances = 150;
    let mut worst_tau = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(2..=50);
        let coarse = rng.random_bool(0.5);
        let mut draw = || {
            if coarse {
                rng.random_range(0..5) as f64
            } else {
                rng.random_range(-1.0..1.0)
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw()).collect();
        let y: Vec<f64> = (0..n).map(|_| draw()).collect();
        match (brute_tau(&x, &y), kendall_tau(&x, &y)) {
            (Some(want), Ok(got)) => {
                worst_tau = worst_tau.max((got - want).abs());
                ensure((got - want).abs() <= 1e-10, || format!("tau {got} vs {want}"))?;
            }
            (None, Err(_)) => {}
            (want, got) => return Err(format!("tau defined-ness differs: {want:?} vs {got:?}")),
        }
    }

    let mut worst_cmi = 0.0f64;
    let mut compared = 0;
    while compared < instances {
        let n = rng.random_range(3..=50);
        let lrs = [0.1, 0.01, 0.001];
        let models: Vec<ModelRecord> = (0..n)
            .map(|i| {
                let mut m = ModelRecord::new(format!("m{i}"), 1.0);
                m.hparams
                    .insert("lr".into(), HParamValue::Num(lrs[rng.random_range(0..3)]));
                m
            })
            .collect();
        let mu: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let lr = |i: usize| match &models[i].hparams["lr"] {
            HParamValue::Num(v) => *v,
            _ => unreachable!(),
        };
        let mut rows = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = ((mu[i] - mu[j]).signum(), (g[i] - g[j]).signum());
                if mu[i] != mu[j] && g[i] != g[j] {
                    let (p, q) = (lr(i).min(lr(j)), lr(i).max(lr(j)));
                    rows.push((a as i8, b as i8, format!("{p}|{q}")));
                }
            }
        }
        if rows.is_empty() {
            continue;
        }
        let table = build_pair_sign_table(&models, &mu, &g, &["lr"]).map_err(|e| e.to_string())?;
        let got = conditional_mutual_information(&table).map_err(|e| e.to_string())?;
        let want = brute_cmi(&rows);
        worst_cmi = worst_cmi.max((got - want).abs());
        ensure((got - want).abs() <= 1e-10, || format!("cmi {got} vs {want}"))?;
        compared += 1;
    }

    let fixture = |pairs: &[(Sign, Sign)]| PairSignTable {
        rows: pairs
            .iter()
            .map(|&(v_mu, v_g)| PairSign {
                v_mu,
                v_g,
                u_s: ConditionKey(vec![], vec![]),
            })
            .collect(),
        dropped_ties: 0,
    };
    use Sign::{Neg, Pos};
    let dependent = conditional_mutual_information(&fixture(&[(Pos, Pos), (Neg, Neg), (Pos, Pos), (Neg, Neg)]))
        .map_err(|e| e.to_string())?;
    let independent = conditional_mutual_information(&fixture(&[(Pos, Pos), (Pos, Neg), (Neg, Pos), (Neg, Neg)]))
        .map_err(|e| e.to_string())?;
    ensure(dependent == 1.0, || format!("dependent fixture gives {dependent} bits"))?;
    ensure(independent <= 1e-12, || {
        format!("independent fixture gives {independent} bits")
    })?;
    Ok(format!(
        "{instances} tau and {instances} CMI instances, worst errors {worst_tau:.1e} / {worst_cmi:.1e}; fixtures {dependent} and {independent} bits"
    ))
}

fn criterion_5() -> Check {
    for (a, b) in [(0.8, 0.1), (1.0, 0.0), (-2.5, 3.0), (1e-3, 0.9)] {
        let pool: Vec<(f64, f64)> = (0..17).map(|i| i as f64 / 17.0).map(|x| (x, a * x + b)).collect();
        let c = fit_calibration(&pool).map_err(|e| e.to_string())?;
        ensure((c.a - a).abs() <= 1e-10 && (c.b - b).abs() <= 1e-10, || {
            format!("fit ({}, {}) for line ({a}, {b})", c.a, c.b)
        })?;
    }
    let adj: f64 = adjusted_r_squared(0.9, 5, 1).map_err(|e| e.to_string())?;
    ensure((adj - 0.8667).abs() <= 1e-4, || format!("adjusted R^2 {adj}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pools = 30;
    let mut worst = 0.0f64;
    for seed in 0..pools {
        let n = rng.random_range(8..60);
        let k = rng.random_range(2..=(n / 3).min(10));
        let pool: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(0.3..1.0);
                (x, 0.9 * x + 0.05 + 0.05 * normal(&mut rng))
            })
            .collect();
        let folds = kfold_assignment(n, k, seed).map_err(|e| e.to_string())?;
        let mut sum = 0.0;
        for held in &folds {
            let train: Vec<(f64, f64)> = (0..n).filter(|i| !held.contains(i)).map(|i| pool[i]).collect();
            let m = train.len() as f64;
            let mx = train.iter().map(|p| p.0).sum::<f64>() / m;
            let my = train.iter().map(|p| p.1).sum::<f64>() / m;
            let slope = train.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
                / train.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
            let icept = my - slope * mx;
            let ybar = held.iter().map(|&i| pool[i].1).sum::<f64>() / held.len() as f64;
            let ss_res: f64 = held
                .iter()
                .map(|&i| (pool[i].1 - slope * pool[i].0 - icept).powi(2))
                .sum();
            let ss_tot: f64 = held.iter().map(|&i| (pool[i].1 - ybar).powi(2)).sum();
            sum += 1.0 - ss_res / ss_tot;
        }
        let want = sum / k as f64;
        let got = kfold_r_squared(&pool, k, seed).map_err(|e| e.to_string())?;
        let err = (got - want).abs() / want.abs().max(1.0);
        worst = worst.max(err);
        ensure(err <= 1e-10, || format!("k-fold R^2 {got} vs {want} (n={n}, k={k})"))?;
    }
    Ok(format!(
        "exact lines recovered, adjusted R^2 {adj:.4}, {pools} k-fold pools worst error {worst:.1e}"
    ))
}

fn criterion_6() -> Check {
    let mut worst = 0.0f64;
    let mut nets = 0;
    for seed in 0..4 {
        for r in default_suite(seed).map_err(|e| e.to_string())? {
            ensure(r.checked > 0, || format!("{:?}: nothing checked", r.sizes))?;
            ensure(r.max_rel_error <= 1e-4, || {
                format!("{:?} {:?}: {:e}", r.sizes, r.activation, r.max_rel_error)
            })?;
            worst = worst.max(r.max_rel_error);
            nets += 1;
        }
    }
    Ok(format!(
        "{nets} net configurations (2-8-8-1, 2-32-32-1; tanh, relu), worst {worst:.1e}"
    ))
}

fn criterion_7() -> Check {
    let config = ToyConfig::default();
    let first = run_toy(&config, 0).map_err(|e| e.to_string())?;
    let second = run_toy(&config, 0).map_err(|e| e.to_string())?;
    let (a, b) = (
        serde_json::to_string(&first.summary).expect("serializes"),
        serde_json::to_string(&second.summary).expect("serializes"),
    );
    ensure(a == b, || "summaries differ between two runs".into())?;
    let s = &first.summary;
    ensure(s.n_models == 24, || format!("{} classifiers, expected 24", s.n_models))?;
    ensure(s.kendall_tau >= 0.5, || {
        format!("Kendall tau {} below 0.5", s.kendall_tau)
    })?;
    for r in s.ratios.iter().filter(|r| r.train_acc > s.well_trained_threshold) {
        ensure(
            r.well_trained && r.ratio_syn_test_over_train_test.is_some() && r.ratio_syn_test_over_syn_train.is_some(),
            || format!("{}: ratios missing for a well-trained classifier", r.model_id),
        )?;
    }
    ensure(s.n_well_trained > 0, || "no well-trained classifier".into())?;
    let (r1, r2) = (&s.ratio_syn_test_over_train_test, &s.ratio_syn_test_over_syn_train);
    Ok(format!(
        "tau {:.3}, R^2 {:.3}, {} well-trained; d(syn,test)/d(train,test) median {:.2} ({} of {} below 1); \
         d(syn,test)/d(syn,train) median {:.2} ({} of {} below 1)",
        s.kendall_tau,
        s.r2,
        s.n_well_trained,
        r1.median.unwrap_or(f64::NAN),
        r1.below_one,
        r1.count,
        r2.median.unwrap_or(f64::NAN),
        r2.below_one,
        r2.count,
    ))
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_synacc"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!(
            "synacc {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&o.stderr)
        ));
    }
    Ok(o.stdout)
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).expect("readable") {
            let p = e.expect("entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).expect("inside").display().to_string();
                out.push((rel, fs::read(&p).expect("readable")));
            }
        }
    }
    out.sort();
    out
}

fn criterion_8() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| tmp.path().join(name).display().to_string();
    for run in ["a", "b"] {
        run_cli(&["--seed", "7", "--out", &p(run), "toy-e2e", "--embeddings"])?;
    }
    let (a, b) = (tree(&tmp.path().join("a")), tree(&tmp.path().join("b")));
    ensure(a == b, || "toy-e2e output trees differ".into())?;
    let files = a.len();

    let [records, embeddings, train, test, syn] = [
        "records.jsonl",
        "embeddings",
        "data/train.csv",
        "data/test.csv",
        "data/syn.csv",
    ]
    .map(|f| p(&format!("a/{f}")));
    let reports: [Vec<&str>; 4] = [
        vec!["score", "--models", &records, "--k", "4"],
        vec!["--seed", "3", "predict", "--models", &records, "--calibrate"],
        vec!["frechet", "--pool", &embeddings, "--models", &records],
        vec!["frechet", "--train", &train, "--test", &test, "--syn", &syn],
    ];
    for args in &reports {
        let (x, y) = (run_cli(args)?, run_cli(args)?);
        ensure(x == y, || format!("synacc {} differs between runs", args.join(" ")))?;
        ensure(!x.is_empty(), || format!("synacc {} wrote nothing", args.join(" ")))?;
    }
    let jobs1 = run_cli(&["--jobs", "1", "score", "--models", &records, "--k", "4"])?;
    ensure(jobs1 == run_cli(&reports[0])?, || {
        "score depends on the worker count".into()
    })?;
    Ok(format!(
        "toy-e2e: {files} files identical across runs; score, predict and both frechet modes byte-identical"
    ))
}

/// Number, title, time limit in seconds, check.
type Criterion = (u32, &'static str, u64, fn() -> Check);

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "Frechet oracle on 1-D fixtures", 1, criterion_1),
        (2, "matrix square root properties", 10, criterion_2),
        (3, "identity and substitution cases", 5, criterion_3),
        (4, "rank and CMI oracles", 10, criterion_4),
        (5, "regression metrics", 5, criterion_5),
        (6, "gradient checks", 30, criterion_6),
        (7, "toy end-to-end", 600, criterion_7),
        (8, "byte-identical reports", 600, criterion_8),
    ];
    let mut failed = 0;
    let mut stdout = std::io::stdout();
    for (n, title, limit, f) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > Duration::from_secs(limit) => Err(format!(
                "too slow: {:.2}s over the {limit}s limit ({detail})",
                elapsed.as_secs_f64()
            )),
            r => r,
        };
        let (status, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        writeln!(
            stdout,
            "criterion {n} {status} [{:.2}s] {title}: {detail}",
            elapsed.as_secs_f64()
        )
        .ok();
    }
    writeln!(stdout, "{} of 8 criteria passed", 8 - failed).ok();
    if failed > 0 {
        std::process::exit(1);
    }
}
