//! The ten acceptance criteria, one PASS/FAIL line each. Runs without the
//! libtest harness so the lines always reach standard output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use thoughtgap::bench::{
    build_winocontrol, load_bbq, load_winobias, read_items, BenchItem, Task, FRUITS, OCCUPATIONS,
};
use thoughtgap::eval::{parse_choice, read_run, ClientConfig, RunManifest};
use thoughtgap::gap::{run_random_trials, TrialConfig, TrialStatus, IDENTITY_TOLERANCE};
use thoughtgap::metrics::{heatmap, improvement_grid, round1, winobias_metrics};
use thoughtgap::prompt::{render, InterventionKind, RenderOptions};

type Check = Result<String, String>;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> PathBuf {
    root().join("fixtures").join(name)
}

fn cli(args: &[&str]) -> Result<Output, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_thoughtgap"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!(
            "`thoughtgap {}` exited {:?}: {}",
            args.join(" "),
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        ));
    }
    Ok(o)
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.2?}, limit {limit:?}"))?;
    Ok(t)
}

fn c1_theorem_bound() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("trials.csv");
    let start = Instant::now();
    cli(&[
        "scm",
        "verify-theorem",
        "--trials",
        "1000",
        "--seed",
        "7",
        "--out",
        s(&out),
    ])?;
    let t = within(Duration::from_secs(30), start)?;
    let csv = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    let mut rows = 0;
    let mut min_slack = f64::INFINITY;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        ensure(f[6] == "pass", || format!("trial row `{line}`"))?;
        let slack: f64 = f[3].parse().map_err(|_| format!("slack in `{line}`"))?;
        ensure(slack >= -1e-12, || format!("slack {slack} in `{line}`"))?;
        min_slack = min_slack.min(slack);
        rows += 1;
    }
    ensure(rows == 1000, || format!("{rows} rows"))?;
    Ok(format!(
        "1000/1000 trials, min slack {min_slack:.2e}, {t:.2?}"
    ))
}

fn hundred_trials() -> Vec<thoughtgap::gap::TrialOutcome> {
    run_random_trials(7, 100, TrialConfig::default())
}

fn c2_shortcut_identity() -> Check {
    let outcomes = hundred_trials();
    let mut worst = 0.0f64;
    for o in &outcomes {
        let e = o
            .eq1_err
            .ok_or_else(|| format!("seed {}: no shortcut check ({:?})", o.seed, o.reason))?;
        ensure(e < IDENTITY_TOLERANCE, || {
            format!("seed {}: error {e:e}", o.seed)
        })?;
        worst = worst.max(e);
    }
    Ok(format!("100 SCMs, max entrywise error {worst:.2e}"))
}

fn c3_decomposition_identity() -> Check {
    let outcomes = hundred_trials();
    let mut worst = 0.0f64;
    for o in &outcomes {
        ensure(o.status == TrialStatus::Pass, || {
            format!("seed {}: {:?}", o.seed, o.reason)
        })?;
        let e = o
            .decomposition_err
            .ok_or_else(|| format!("seed {}: no decomposition check", o.seed))?;
        ensure(e < IDENTITY_TOLERANCE, || {
            format!("seed {}: error {e:e}", o.seed)
        })?;
        worst = worst.max(e);
    }
    Ok(format!("100 SCMs, max entrywise error {worst:.2e}"))
}

fn c4_empirical_shortcut() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("demo.json");
    let f = fixture("biased_two_premise.json");
    let start = Instant::now();
    cli(&[
        "scm",
        "demo-bias",
        "--scm",
        s(&f),
        "--samples",
        "100000",
        "--seed",
        "7",
        "--out",
        s(&out),
    ])?;
    let t = within(Duration::from_secs(10), start)?;
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let get = |k: &str| v[k].as_f64().ok_or_else(|| format!("missing {k}"));
    let (max_s, mean_s, mean_t) = (
        get("max_tv_ntp_shortcut")?,
        get("mean_tv_ntp_shortcut")?,
        get("mean_tv_ntp_topological")?,
    );
    ensure(max_s < 0.02, || format!("TV to shortcut {max_s}"))?;
    ensure(mean_t > mean_s, || {
        format!("TV to topological {mean_t} <= TV to shortcut {mean_s}")
    })?;
    Ok(format!("TV(ntp, shortcut) max {max_s:.4}, TV(ntp, topological) mean {mean_t:.4} > {mean_s:.4}, {t:.2?}"))
}

fn c5_alice() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("alice.jsonl");
    cli(&["bench", "build", "alice", "--out", s(&out)])?;
    let items = read_items(&out).map_err(|e| e.to_string())?;
    ensure(items.len() == 200, || format!("{} items", items.len()))?;
    let mut templates = std::collections::BTreeSet::new();
    for it in &items {
        let n = it.meta["N"].as_u64().unwrap_or(0);
        let m = it.meta["M"].as_u64().unwrap_or(0);
        ensure((1..=10).contains(&n) && (1..=10).contains(&m), || {
            format!("{}: N={n} M={m}", it.id)
        })?;
        ensure(it.gold == (m + 1).to_string(), || {
            format!("{}: gold {}", it.id, it.gold)
        })?;
        templates.insert(it.meta["template"].as_u64().unwrap_or(0));
    }
    ensure(templates.len() == 2, || format!("templates {templates:?}"))?;
    Ok("200 items, gold = M+1, two templates, N,M in 1..10".into())
}

fn c6_winocontrol() -> Check {
    let base = load_winobias(&fixture("winobias_pairs.jsonl"), true).map_err(|e| e.to_string())?;
    let re = regex::Regex::new(&format!(
        r"^The ({}) ate one ({}) because (he|she) likes it\.$",
        OCCUPATIONS.join("|"),
        FRUITS.join("|")
    ))
    .expect("valid template");
    let mut sizes = Vec::new();
    for l in 0..3u8 {
        for q in 0..3u8 {
            let cell = build_winocontrol(&base, l, q, 7).map_err(|e| e.to_string())?;
            sizes.push(cell.len());
            for it in &cell {
                let caps: Vec<_> = it
                    .inserted
                    .iter()
                    .map(|x| re.captures(x).ok_or_else(|| format!("off-template `{x}`")))
                    .collect::<Result<_, _>>()?;
                if l == 0 {
                    let other = it.base.pronoun.opposite().as_str();
                    ensure(
                        caps.iter()
                            .any(|c| &c[1] == it.base.wrong() && &c[3] == other),
                        || format!("{}: no wrong-answer helper", it.base.id),
                    )?;
                }
                let distractors: Vec<_> = caps
                    .iter()
                    .filter(|c| {
                        &c[1] != it.base.occupation_a.as_str()
                            && &c[1] != it.base.occupation_b.as_str()
                    })
                    .collect();
                ensure(distractors.len() == 2 * q as usize, || {
                    format!("{}: {} distractors", it.base.id, distractors.len())
                })?;
                if q == 1 {
                    ensure(distractors[0][3] != distractors[1][3], || {
                        format!("{}: same pronouns", it.base.id)
                    })?;
                }
            }
        }
    }
    ensure(sizes.iter().all(|&n| n == sizes[0]), || {
        format!("cell sizes {sizes:?}")
    })?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let f = fixture("winobias_pairs.jsonl");
    let mut bytes = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let out = dir.path().join(name);
        cli(&[
            "bench",
            "build",
            "winocontrol",
            "--input",
            s(&f),
            "--l",
            "0",
            "--q",
            "2",
            "--seed",
            "7",
            "--out",
            s(&out),
        ])?;
        bytes.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure(bytes[0] == bytes[1], || "reruns differ".into())?;
    Ok(format!(
        "9 cells of {} items, insertions on template, byte-identical reruns",
        sizes[0]
    ))
}

fn c7_goldens() -> Check {
    let item = load_bbq(&fixture("bbq_mixed.jsonl"), &["Age".into()])
        .map_err(|e| e.to_string())?
        .remove(0);
    let dir = root().join("crates/core/tests/golden");
    for kind in InterventionKind::ALL {
        let golden = std::fs::read_to_string(dir.join(format!("{}.txt", kind.slug())))
            .map_err(|e| e.to_string())?;
        let p = render(&item, kind).map_err(|e| e.to_string())?;
        ensure(p.text == golden, || {
            format!("{kind} differs from its golden file")
        })?;
    }
    let lines = [
        (InterventionKind::Direct, "Please give me the answer directly."),
        (InterventionKind::CoT, "Let's think step by step."),
        (InterventionKind::RaR, "**Rephrase** and **expand** the question, and **respond**."),
        (
            InterventionKind::LoTAppendix,
            "Let's **observe**, **echo**, and **expand** all the relevant information, and then think step by step.",
        ),
    ];
    for (kind, line) in lines {
        let p = render(&item, kind).map_err(|e| e.to_string())?;
        ensure(p.text.contains(&format!("\n\n{line}\n\n")), || {
            format!("{kind} lacks `{line}`")
        })?;
        ensure(
            p.text.ends_with(
                "At last, enclose your final choice, e.g., <choice>(a)/(b)/(c)</choice>.",
            ),
            || format!("{kind} lacks the enclose line"),
        )?;
    }
    Ok("10 kinds match their goldens byte for byte".into())
}

fn c8_parsers() -> Check {
    let labels: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let dir = root().join("crates/core/tests/fixtures/responses");
    let mut got = Vec::new();
    for name in [
        "deepseek_direct.txt",
        "deepseek_cot.txt",
        "deepseek_rar.txt",
        "deepseek_lot_appendix.txt",
    ] {
        let text = std::fs::read_to_string(dir.join(name)).map_err(|e| e.to_string())?;
        got.push(
            parse_choice(&text, &labels)
                .map_err(|e| format!("{name}: {e}"))?
                .value,
        );
    }
    ensure(got == ["a", "a", "a", "c"], || format!("parsed {got:?}"))?;
    let multi = parse_choice("<choice>(a)</choice> no, <choice>(c)</choice>", &labels)?;
    ensure(multi.value == "c", || {
        format!("multi-tag gave {}", multi.value)
    })?;
    ensure(
        parse_choice("It is the old man, surely.", &labels).is_err(),
        || "prose parsed".into(),
    )?;
    Ok("(a) (a) (a) (c); last tag wins; prose fails".into())
}

fn wino_item(
    id: String,
    pair: String,
    stereotype: &str,
    extra: &[(&str, serde_json::Value)],
) -> BenchItem {
    let mut meta = BTreeMap::from([
        ("pair_id".to_string(), serde_json::Value::from(pair)),
        (
            "stereotype".to_string(),
            serde_json::Value::from(stereotype),
        ),
    ]);
    for (k, v) in extra {
        meta.insert(k.to_string(), v.clone());
    }
    BenchItem {
        id,
        context: None,
        question: "q".into(),
        options: Some(vec!["The cook".into(), "The driver".into()]),
        gold: "a".into(),
        task: Task::Winobias,
        meta,
    }
}

fn record(id: &str, answer: &str) -> thoughtgap::eval::EvalRecord {
    thoughtgap::eval::EvalRecord {
        item_id: id.into(),
        kind: InterventionKind::CoT,
        model: "m".into(),
        prompt_digest: String::new(),
        response: Some(answer.into()),
        answer: Some(thoughtgap::eval::ParsedAnswer::Choice(answer.into())),
        parse_failure: None,
        fallback: false,
        prompt_tokens: None,
        completion_tokens: None,
        latency_ms: 0,
        timestamp_ms: 0,
        cache_hit: false,
        retries: 0,
        error: None,
    }
}

fn c9_metrics() -> Check {
    let mut items = Vec::new();
    let mut recs = Vec::new();
    for p in 0..1000 {
        for (st, k) in [("pro", 955), ("anti", 788)] {
            let id = format!("{p}-{st}");
            recs.push(record(&id, if p < k { "a" } else { "b" }));
            items.push(wino_item(id, p.to_string(), st, &[]));
        }
    }
    let m = winobias_metrics(&recs, &items).map_err(|e| e.to_string())?;
    ensure(
        (round1(m.pro), round1(m.anti), round1(m.delta)) == (95.5, 78.8, 16.7),
        || format!("pro {} anti {} delta {}", m.pro, m.anti, m.delta),
    )?;

    let half: Vec<BenchItem> = (0..2)
        .flat_map(|p| {
            ["pro", "anti"].map(|st| wino_item(format!("{p}-{st}"), p.to_string(), st, &[]))
        })
        .collect();
    let half_recs = vec![
        record("0-pro", "a"),
        record("0-anti", "a"),
        record("1-pro", "a"),
        record("1-anti", "b"),
    ];
    let con = winobias_metrics(&half_recs, &half)
        .map_err(|e| e.to_string())?
        .con;
    ensure(con == 50.0, || format!("con {con}"))?;

    let mut grid = Vec::new();
    for l in 0..3u8 {
        for q in 0..3u8 {
            for k in 0..3 {
                let extra = [("l_level", l.into()), ("q_level", q.into())];
                grid.push(wino_item(
                    format!("{k}/L{l}q{q}"),
                    format!("{k}/L{l}q{q}"),
                    "pro",
                    &extra,
                ));
            }
        }
    }
    let t_recs: Vec<_> = grid
        .iter()
        .enumerate()
        .map(|(i, it)| record(&it.id, if i % 2 == 0 { "a" } else { "b" }))
        .collect();
    let b_recs: Vec<_> = grid
        .iter()
        .enumerate()
        .map(|(i, it)| record(&it.id, if i % 3 == 0 { "a" } else { "b" }))
        .collect();
    let t = heatmap(&t_recs, &grid).map_err(|e| e.to_string())?;
    let b = heatmap(&b_recs, &grid).map_err(|e| e.to_string())?;
    let tb = improvement_grid(&t, &b).map_err(|e| e.to_string())?;
    let bt = improvement_grid(&b, &t).map_err(|e| e.to_string())?;
    for l in 0..3 {
        for q in 0..3 {
            ensure(tb[l][q] == -bt[l][q], || {
                format!("cell L{l}q{q}: {} vs {}", tb[l][q], bt[l][q])
            })?;
        }
    }
    Ok("delta 16.7, con 50.0, improvement grid antisymmetric".into())
}

fn c10_offline_pipeline() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let (items, cache) = (d.join("wc.jsonl"), d.join("cache"));
    let f = fixture("winobias_pairs.jsonl");
    let mock = fixture("mock_winobias.json");
    let start = Instant::now();
    cli(&[
        "bench",
        "build",
        "winocontrol",
        "--input",
        s(&f),
        "--seed",
        "7",
        "--out",
        s(&items),
    ])?;
    let mut reports = Vec::new();
    let mut calls = Vec::new();
    for pass in ["cold", "warm"] {
        let run = d.join(format!("{pass}.jsonl"));
        let rep = d.join(format!("report-{pass}"));
        let o = cli(&[
            "eval",
            "run",
            "--items",
            s(&items),
            "--kind",
            "lot2",
            "--mock",
            s(&mock),
            "--cache-dir",
            s(&cache),
            "--max-in-flight",
            "4",
            "--out",
            s(&run),
        ])?;
        let stderr = String::from_utf8_lossy(&o.stderr).into_owned();
        calls.push(
            stderr
                .lines()
                .find_map(|l| l.strip_prefix("backend calls: "))
                .and_then(|n| n.trim().parse::<usize>().ok())
                .ok_or_else(|| format!("no call count in `{stderr}`"))?,
        );
        let o = cli(&[
            "report",
            "--task",
            "winocontrol",
            "--items",
            s(&items),
            s(&run),
            "--out",
            s(&rep),
        ])?;
        let heat = std::fs::read_to_string(rep.join("heatmap.csv")).map_err(|e| e.to_string())?;
        reports.push((String::from_utf8_lossy(&o.stdout).into_owned(), heat));
        let run_file = read_run(&run).map_err(|e| e.to_string())?;
        let bench = read_items(&items).map_err(|e| e.to_string())?;
        ensure(run_file.records.len() == bench.len(), || {
            format!(
                "{} records for {} items",
                run_file.records.len(),
                bench.len()
            )
        })?;
        let cfg: ClientConfig = run_file.manifest.config.clone();
        let expect = RunManifest::new(
            &bench,
            InterventionKind::LoT2,
            RenderOptions::default(),
            &cfg,
        );
        ensure(run_file.manifest == expect, || {
            "manifest does not describe the run".into()
        })?;
        ensure(cfg.base_url.starts_with("mock:"), || {
            format!("base url {}", cfg.base_url)
        })?;
    }
    let t = within(Duration::from_secs(5), start)?;
    let (md, heat) = &reports[0];
    ensure(
        md.starts_with("| Model | Method | Pro | Anti | Delta | Con |"),
        || format!("table `{md}`"),
    )?;
    let rows: Vec<&str> = heat.lines().skip(1).collect();
    ensure(rows.len() == 9, || format!("{} heatmap rows", rows.len()))?;
    let counts: Vec<&str> = rows
        .iter()
        .map(|r| r.rsplit(',').next().unwrap_or(""))
        .collect();
    ensure(counts.iter().all(|c| *c == counts[0] && *c != "0"), || {
        format!("cell counts {counts:?}")
    })?;
    ensure(calls[1] == 0, || {
        format!("warm rerun made {} calls", calls[1])
    })?;
    ensure(reports[0] == reports[1], || {
        "warm rerun changed the report".into()
    })?;
    Ok(format!(
        "9 cells x {} items, {} cold calls, 0 warm calls, identical reports, {t:.2?}",
        counts[0], calls[0]
    ))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 KL lower bound on 1000 random SCMs", c1_theorem_bound),
        (
            "2 shortcut closed form matches enumeration",
            c2_shortcut_identity,
        ),
        (
            "3 total-probability decomposition",
            c3_decomposition_identity,
        ),
        (
            "4 fitted predictor learns the shortcut",
            c4_empirical_shortcut,
        ),
        ("5 Alice builder", c5_alice),
        ("6 WinoControl builder", c6_winocontrol),
        ("7 prompt golden files", c7_goldens),
        ("8 response parser fixtures", c8_parsers),
        ("9 metrics arithmetic", c9_metrics),
        ("10 offline end-to-end run", c10_offline_pipeline),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
