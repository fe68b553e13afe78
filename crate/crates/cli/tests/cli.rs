use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use serde_json::Value;
use tempfile::TempDir;

fn lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aof-lab"))
        .current_dir(dir)
        .env_remove("AOF_LAB_THREADS")
        .args(args)
        .output()
        .expect("spawn aof-lab")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = lab(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = lab(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(
        &std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path:?}: {e}")),
    )
    .unwrap()
}

fn csv_rows(path: PathBuf) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

/// Writes a model with `gen` into `dir/name` and returns the model path.
fn model(dir: &Path, name: &str, extra: &[&str]) -> String {
    let mut args = vec!["--out", name, "gen"];
    args.extend_from_slice(extra);
    ok(dir, &args);
    format!("{name}/model.json")
}

#[test]
fn gen_is_deterministic() {
    let t = TempDir::new().unwrap();
    for out in ["a", "b"] {
        ok(
            t.path(),
            &["--seed", "5", "--out", out, "gen", "--length", "300"],
        );
    }
    for f in ["model.json", "trajectory.csv"] {
        let a = std::fs::read(t.path().join("a").join(f)).unwrap();
        let b = std::fs::read(t.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn gen_without_length_writes_model_only() {
    let t = TempDir::new().unwrap();
    ok(t.path(), &["--out", "m", "gen"]);
    assert!(t.path().join("m/model.json").exists());
    assert!(!t.path().join("m/trajectory.csv").exists());
    let meta = json(t.path().join("m/gen.meta.json"));
    assert_eq!(meta["report"]["files"], serde_json::json!(["model.json"]));
}

#[test]
fn gen_rejects_bad_noise() {
    let t = TempDir::new().unwrap();
    assert!(fails(t.path(), &["--out", "m", "gen", "--noise", "1.5"]).contains("noise"));
    assert!(fails(t.path(), &["--out", "m", "gen", "--noise", "lots"]).contains("noise"));
    assert!(!t.path().join("m/model.json").exists());
}

#[test]
fn config_file_and_flag_precedence() {
    let t = TempDir::new().unwrap();
    std::fs::write(
        t.path().join("run.toml"),
        "seed = 11\nout = \"from_file\"\n[gen]\nnoise = 0.3\nstates = 3\n",
    )
    .unwrap();
    ok(t.path(), &["--config", "run.toml", "gen"]);
    let meta = json(t.path().join("from_file/gen.meta.json"));
    let cfg = &meta["config"];
    assert_eq!(cfg["global"]["seed"], 11);
    assert_eq!(cfg["params"]["noise"], 0.3);
    assert_eq!(cfg["params"]["states"], 3);
    assert_eq!(cfg["params"]["window"], 1, "defaults are echoed too");

    ok(
        t.path(),
        &[
            "--config", "run.toml", "--seed", "12", "--out", "flags", "gen", "--noise", "0.2",
        ],
    );
    let cfg = &json(t.path().join("flags/gen.meta.json"))["config"];
    assert_eq!(cfg["global"]["seed"], 12);
    assert_eq!(cfg["params"]["noise"], 0.2);
    assert_eq!(cfg["params"]["states"], 3);

    std::fs::write(t.path().join("typo.toml"), "[gen]\nnoize = 0.3\n").unwrap();
    assert!(fails(t.path(), &["--config", "typo.toml", "gen"]).contains("noize"));
}

#[test]
fn thread_variable_is_validated() {
    let t = TempDir::new().unwrap();
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_aof-lab"))
            .current_dir(t.path())
            .env("AOF_LAB_THREADS", v)
            .args(["--out", "m", "gen"])
            .status()
            .unwrap()
    };
    assert!(run("1").success());
    assert!(!run("zero").success());
}

/// Sum of drops along unit coordinate increases, from the CSV rows.
fn index_from_csv(path: PathBuf) -> f64 {
    let (header, rows) = csv_rows(path);
    let m = header.len() - 1;
    let points: Vec<(Vec<usize>, f64)> = rows
        .iter()
        .map(|r| {
            (
                r[..m].iter().map(|c| c.parse().unwrap()).collect(),
                num(&r[m]),
            )
        })
        .collect();
    let mut total = 0.0;
    for (g, v) in &points {
        for l in 0..m {
            let mut up = g.clone();
            up[l] += 1;
            if let Some((_, w)) = points.iter().find(|(p, _)| *p == up) {
                total += (v - w).max(0.0);
            }
        }
    }
    total
}

#[test]
fn age_curve_on_markov_model_is_monotone() {
    let t = TempDir::new().unwrap();
    let m = model(t.path(), "mk", &["--kind", "markov"]);
    ok(
        t.path(),
        &["--out", "ac", "age-curve", "--model", &m, "--max-age", "3"],
    );
    let side = json(t.path().join("ac/age_curve.json"));
    assert!(
        side["report"]["curves"][0]["non_monotonicity"]
            .as_f64()
            .unwrap()
            <= 1e-9
    );
    assert!(index_from_csv(t.path().join("ac/age_curve.csv")) <= 1e-9);
}

#[test]
fn age_curve_single_point() {
    let t = TempDir::new().unwrap();
    let m = model(t.path(), "m", &[]);
    ok(
        t.path(),
        &["--out", "ac", "age-curve", "--model", &m, "--max-age", "0"],
    );
    let (header, rows) = csv_rows(t.path().join("ac/age_curve.csv"));
    assert_eq!(header, ["delta_1", "delta_2", "loss"]);
    assert_eq!(rows.len(), 1);
}

#[test]
fn longer_windows_flatten_the_curve() {
    let t = TempDir::new().unwrap();
    let m = model(t.path(), "m", &["--noise", "0.1"]);
    ok(
        t.path(),
        &[
            "--out",
            "ac",
            "age-curve",
            "--model",
            &m,
            "--max-age",
            "4",
            "--windows",
            "1,2,3",
        ],
    );
    let side = json(t.path().join("ac/age_curve.json"));
    let curves = side["report"]["curves"].as_array().unwrap();
    assert_eq!(curves.len(), 3);
    let idx: Vec<f64> = (1..=3)
        .map(|b| index_from_csv(t.path().join(format!("ac/age_curve_b{b}.csv"))))
        .collect();
    for (c, i) in curves.iter().zip(&idx) {
        assert!((c["non_monotonicity"].as_f64().unwrap() - i).abs() < 1e-12);
    }
    assert!(idx[0] > 0.0);
    assert!(idx[1] <= idx[0] && idx[2] <= idx[1], "{idx:?}");
}

#[test]
fn age_curve_needs_exactly_one_source() {
    let t = TempDir::new().unwrap();
    let m = model(t.path(), "m", &["--length", "200"]);
    assert!(fails(t.path(), &["age-curve"]).contains("exactly one"));
    assert!(fails(
        t.path(),
        &["age-curve", "--model", &m, "--data", "m/trajectory.csv"]
    )
    .contains("exactly one"));
    assert!(fails(
        t.path(),
        &["age-curve", "--data", "m/trajectory.csv", "--windows", "2"]
    )
    .contains("model"));
}

#[test]
fn decompose_reports() {
    let t = TempDir::new().unwrap();
    let m = model(t.path(), "m", &["--seed", "4"]);
    ok(t.path(), &["--out", "zero", "decompose", "--model", &m]);
    for r in json(t.path().join("zero/decompose.json"))["report"]
        .as_array()
        .unwrap()
    {
        assert_eq!(r["f2"], 0.0);
    }

    ok(
        t.path(),
        &[
            "--out",
            "both",
            "decompose",
            "--model",
            &m,
            "--delta",
            "2,3",
        ],
    );
    let reports = json(t.path().join("both/decompose.json"))["report"].clone();
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["h"], reports[1]["h"]);
    assert_ne!(reports[0]["path"], reports[1]["path"]);
    for r in reports {
        // rebuild the identity from the listed terms
        let (mut gain, mut loss) = (0.0, 0.0);
        for term in r["terms"].as_array().unwrap() {
            let v = term["value"].as_f64().unwrap();
            match term["kind"].as_str().unwrap() {
                "gain" => gain += v,
                "loss" => loss += v,
                k => panic!("{k}"),
            }
        }
        let h = r["h"].as_f64().unwrap();
        let rebuilt = r["h_fresh"].as_f64().unwrap() + gain - loss;
        assert!((h - rebuilt).abs() < 1e-9, "{h} vs {rebuilt}");
    }

    let mk = model(t.path(), "mk", &["--kind", "markov"]);
    ok(
        t.path(),
        &[
            "--out",
            "mkd",
            "--loss",
            "quad",
            "decompose",
            "--model",
            &mk,
            "--delta",
            "3,2",
            "--path",
            "1,0",
        ],
    );
    let r = &json(t.path().join("mkd/decompose.json"))["report"][0];
    assert!(r["f2"].as_f64().unwrap() <= 1e-10);
    assert_eq!(r["path"], serde_json::json!([1, 0]));
}

#[test]
fn epsilon_and_sweep() {
    let t = TempDir::new().unwrap();
    let mk = model(t.path(), "mk", &["--kind", "markov"]);
    ok(
        t.path(),
        &[
            "--out",
            "e",
            "epsilon",
            "--model",
            &mk,
            "--tau-max",
            "2",
            "--mu-max",
            "2",
        ],
    );
    assert!(
        json(t.path().join("e/epsilon.json"))["report"]["epsilon"]
            .as_f64()
            .unwrap()
            < 1e-6
    );

    let m = model(t.path(), "m", &["--seed", "2"]);
    ok(
        t.path(),
        &[
            "--out",
            "s",
            "epsilon",
            "--model",
            &m,
            "--tau-max",
            "1",
            "--mu-max",
            "2",
            "--sweep",
            "5",
        ],
    );
    let (header, rows) = csv_rows(t.path().join("s/epsilon_sweep.csv"));
    assert_eq!(header, ["eta", "epsilon", "max_information"]);
    assert_eq!(rows.len(), 5);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(num(&r[0]), 0.5f64.powi(i as i32 + 1));
    }
    for w in rows.windows(2) {
        assert!(num(&w[1][1]) < num(&w[0][1]));
    }
    assert!(t.path().join("s/epsilon_sweep.meta.json").exists());
}

#[test]
fn beta_between_files() {
    let t = TempDir::new().unwrap();
    let a = model(t.path(), "a", &["--seed", "1"]);
    let b = model(t.path(), "b", &["--seed", "2"]);
    ok(
        t.path(),
        &[
            "--out", "same", "beta", "--train", &a, "--test", &a, "--delta", "1,2",
        ],
    );
    assert_eq!(json(t.path().join("same/beta.json"))["report"]["beta"], 0.0);
    ok(
        t.path(),
        &["--out", "diff", "beta", "--train", &a, "--test", &b],
    );
    assert!(
        json(t.path().join("diff/beta.json"))["report"]["beta"]
            .as_f64()
            .unwrap()
            > 0.0
    );
}

fn write_ages(path: &Path, support: &[(Vec<usize>, f64)]) {
    let m = support[0].0.len();
    let mut s: String = (1..=m).map(|l| format!("age_{l},")).collect();
    s.push_str("prob\n");
    for (v, p) in support {
        for c in v {
            s.push_str(&format!("{c},"));
        }
        s.push_str(&format!("{p}\n"));
    }
    std::fs::write(path, s).unwrap();
}

fn order_verdict(dir: &Path, first: &str, second: &str) -> Value {
    ok(
        dir,
        &[
            "--out",
            "o",
            "order-check",
            "--first",
            first,
            "--second",
            second,
        ],
    );
    json(dir.join("o/order.json"))["report"].clone()
}

#[test]
fn order_check_examples() {
    let t = TempDir::new().unwrap();
    let a = vec![(vec![0, 2], 0.5), (vec![1, 0], 0.5)];
    write_ages(&t.path().join("a.csv"), &a);
    write_ages(&t.path().join("b.csv"), &[(vec![1, 1], 1.0)]);
    assert_eq!(order_verdict(t.path(), "a.csv", "a.csv")["holds"], true);
    let v = order_verdict(t.path(), "a.csv", "b.csv");
    assert_eq!(v["holds"], false);
    let w = &v["witness"];
    assert!(w["mass_first"].as_f64().unwrap() > w["mass_second"].as_f64().unwrap());
}

/// `p <=_st q` iff every upper set of the joint support has no more mass
/// under `p` than under `q`.
fn enumerate_order(p: &[(Vec<usize>, f64)], q: &[(Vec<usize>, f64)]) -> bool {
    let points: Vec<&Vec<usize>> = p.iter().chain(q).map(|(v, _)| v).collect();
    let geq = |a: &Vec<usize>, b: &Vec<usize>| a.iter().zip(b).all(|(x, y)| x >= y);
    (1u32..1 << points.len()).all(|mask| {
        let gens: Vec<&Vec<usize>> = (0..points.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| points[i])
            .collect();
        let mass = |d: &[(Vec<usize>, f64)]| -> f64 {
            d.iter()
                .filter(|(v, _)| gens.iter().any(|g| geq(v, g)))
                .map(|(_, w)| w)
                .sum()
        };
        mass(p) <= mass(q) + 1e-9
    })
}

#[test]
fn order_check_matches_enumeration() {
    let t = TempDir::new().unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(17);
    let mut holds = 0;
    for _ in 0..30 {
        let m = rng.random_range(1..=2);
        let draw = |rng: &mut rand::rngs::StdRng| -> Vec<(Vec<usize>, f64)> {
            let n = rng.random_range(1..=3);
            let mut pts: Vec<Vec<usize>> = Vec::new();
            while pts.len() < n {
                let v: Vec<usize> = (0..m).map(|_| rng.random_range(0..3)).collect();
                if !pts.contains(&v) {
                    pts.push(v);
                }
            }
            let w: Vec<u32> = (0..n).map(|_| rng.random_range(1..5)).collect();
            let s: u32 = w.iter().sum();
            pts.into_iter()
                .zip(w)
                .map(|(v, w)| (v, w as f64 / s as f64))
                .collect()
        };
        let (p, q) = (draw(&mut rng), draw(&mut rng));
        write_ages(&t.path().join("p.csv"), &p);
        write_ages(&t.path().join("q.csv"), &q);
        let verdict = order_verdict(t.path(), "p.csv", "q.csv")["holds"]
            .as_bool()
            .unwrap();
        assert_eq!(verdict, enumerate_order(&p, &q), "{p:?} vs {q:?}");
        holds += verdict as usize;
    }
    assert!(holds > 0 && holds < 30, "{holds}");
}

#[test]
fn cross_loss_same_source_has_no_gap() {
    let t = TempDir::new().unwrap();
    let m = model(t.path(), "m", &["--seed", "8"]);
    write_ages(
        &t.path().join("ages.csv"),
        &[(vec![0, 1], 0.25), (vec![2, 2], 0.75)],
    );
    ok(
        t.path(),
        &[
            "--out",
            "c",
            "cross-loss",
            "--train",
            &m,
            "--ages",
            "ages.csv",
        ],
    );
    let (header, rows) = csv_rows(t.path().join("c/cross_loss.csv"));
    assert_eq!(
        header,
        ["age_1", "age_2", "weight", "training", "testing", "gap"]
    );
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r[3], r[4]);
        assert_eq!(num(&r[5]), 0.0);
    }
    let meta = json(t.path().join("c/cross_loss.meta.json"));
    assert_eq!(meta["summary"]["beta"], 0.0);
}

#[test]
fn cross_loss_sweep_columns() {
    let t = TempDir::new().unwrap();
    let m = model(t.path(), "m", &["--seed", "6"]);
    ok(
        t.path(),
        &[
            "--out",
            "s",
            "cross-loss",
            "--train",
            &m,
            "--delta",
            "1,1",
            "--sweep",
            "4",
        ],
    );
    let (header, rows) = csv_rows(t.path().join("s/cross_loss_sweep.csv"));
    assert_eq!(header, ["eta", "beta", "training", "testing", "gap"]);
    assert_eq!(rows.len(), 4);
    for w in rows.windows(2) {
        assert!(num(&w[1][1]) < num(&w[0][1]));
        assert!(num(&w[1][4]).abs() <= num(&w[0][4]).abs());
    }
}

/// Two sources; training data only ever shows matching symbols.
fn dataset(path: &Path, mismatched: bool) {
    let mut s = String::from("t,x_1,x_2,age_1,age_2,y\n");
    for t in 0..120 {
        let a = if t % 2 == 0 { "a" } else { "b" };
        let b = if mismatched && t % 3 == 0 {
            if a == "a" {
                "b"
            } else {
                "a"
            }
        } else {
            a
        };
        s.push_str(&format!("{t},{a},{b},0,0,{}\n", t % 2));
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn cross_loss_lists_untrained_cells() {
    let t = TempDir::new().unwrap();
    dataset(&t.path().join("train.csv"), false);
    dataset(&t.path().join("test.csv"), true);
    let err = fails(
        t.path(),
        &[
            "--loss",
            "quad",
            "--lag-cap",
            "2",
            "--out",
            "c",
            "cross-loss",
            "--train",
            "train.csv",
            "--test",
            "test.csv",
        ],
    );
    assert!(err.contains("untrained"), "{err}");
    assert!(err.contains('a') && err.contains('b'), "{err}");
    assert!(!t.path().join("c/cross_loss.csv").exists());
}

#[test]
fn simulate_aoi_traces() {
    let t = TempDir::new().unwrap();
    std::fs::write(t.path().join("t.csv"), "source_id,G,D\n1,0,1\n1,3,5\n").unwrap();
    ok(
        t.path(),
        &[
            "--out",
            "s",
            "simulate-aoi",
            "--trace",
            "t.csv",
            "--horizon",
            "7",
        ],
    );
    let (_, rows) = csv_rows(t.path().join("s/ages.csv"));
    let ages: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(ages, ["", "1", "2", "3", "4", "2", "3"]);

    let instant: String = (0..5).map(|g| format!("1,{g},{g}\n")).collect();
    std::fs::write(t.path().join("i.csv"), format!("source_id,G,D\n{instant}")).unwrap();
    ok(
        t.path(),
        &[
            "--out",
            "i",
            "simulate-aoi",
            "--trace",
            "i.csv",
            "--horizon",
            "5",
        ],
    );
    let (_, rows) = csv_rows(t.path().join("i/ages.csv"));
    assert!(rows.iter().all(|r| r[1] == "0"));

    std::fs::write(t.path().join("bad.csv"), "source_id,G,D\n1,4,2\n").unwrap();
    fails(
        t.path(),
        &[
            "--out",
            "b",
            "simulate-aoi",
            "--trace",
            "bad.csv",
            "--horizon",
            "7",
        ],
    );
    assert!(!t.path().join("b/ages.csv").exists());
}

#[test]
fn empirical_source_with_smoothing() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &["--seed", "3", "--out", "m", "gen", "--length", "4000"],
    );
    ok(
        t.path(),
        &[
            "--lag-cap",
            "3",
            "--lambda",
            "0.5",
            "--out",
            "d",
            "age-curve",
            "--data",
            "m/trajectory.csv",
            "--max-age",
            "2",
        ],
    );
    let (_, rows) = csv_rows(t.path().join("d/age_curve.csv"));
    assert_eq!(rows.len(), 9);
    let cfg = &json(t.path().join("d/age_curve.json"))["config"]["global"];
    assert_eq!(cfg["lambda"], 0.5);
    assert_eq!(cfg["lag_cap"], 3);
    assert!(fails(
        t.path(),
        &["--lambda=-1", "age-curve", "--data", "m/trajectory.csv"]
    )
    .contains("lambda"));
}
