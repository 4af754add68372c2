use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::net::SocketAddr;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use serde_json::json;

use qa_label::bounds::{bound_sweep, kernel_rademacher_bound, BoundInputs, KernelBoundInputs};
use qa_label::data::{append_events, read_events, save_metrics_csv, Origin, StoredEvent};
use qa_label::labeling::{derive_seed, simulate_dataset};
use qa_label::model::{evaluate, read_params, train as fit, write_params, TrainingData};
use qa_label::verify::{run_verification, VerifyConfig};
use qa_label::{AnnotatorModel, ClassSpace, LabelSubset, QuestionSpec, Supervision};
use qa_label_server::{router, AppState, DatasetEntry, HeaderValue};

use crate::config::{usage, Loaded, RunArgs, RunConfig, UsageError};
use crate::{BoundsArgs, EvalArgs, ServeArgs, VerifyArgs};

fn create_out(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn spec_for(cfg: &RunConfig, space: ClassSpace) -> anyhow::Result<QuestionSpec> {
    QuestionSpec::new(cfg.qtype, cfg.items()?, space).map_err(|e| UsageError(e.to_string()).into())
}

/// Ground-truth annotator keyed by instance id.
fn truth_annotator(loaded: &Loaded) -> AnnotatorModel {
    AnnotatorModel::Deterministic(
        loaded
            .ids()
            .into_iter()
            .zip(loaded.dataset.labels.iter().copied())
            .collect(),
    )
}

pub fn label(args: &RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.resolve()?;
    let loaded = cfg.load_train(cfg.seed)?;
    let space = loaded.dataset.space;
    let spec = spec_for(&cfg, space)?;
    let events: Vec<StoredEvent> =
        simulate_dataset(cfg.seed, &spec, &truth_annotator(&loaded), &loaded.ids())?
            .into_iter()
            .map(|e| StoredEvent::now(e, Origin::Simulated))
            .collect();

    create_out(&cfg.out)?;
    let store = cfg.out.join("events.jsonl");
    if store.exists() {
        fs::remove_file(&store).with_context(|| format!("replacing {}", store.display()))?;
    }
    append_events(&store, &events, space)?;

    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for e in &events {
        *histogram.entry(e.event.qa_label.len()).or_default() += 1;
    }
    let n = events.len();
    let summary = json!({
        "events": n,
        "seed": cfg.seed,
        "qtype": spec.qtype(),
        "I": spec.items(),
        "K": space.k(),
        "label_size_histogram": histogram,
        "singleton_fraction": *histogram.get(&1).unwrap_or(&0) as f64 / n.max(1) as f64,
    });
    write_json(&cfg.out.join("label_summary.json"), &summary)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(ExitCode::SUCCESS)
}

pub fn verify(args: &VerifyArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = VerifyConfig {
        posteriors: args.posteriors as usize,
        seed: args.seed,
        coefficient_fault: args.inject_coefficient_fault,
        ..VerifyConfig::default()
    };
    if let Some(k) = args.k {
        if k < 2 {
            return usage(format!("--K must be at least 2, got {k}"));
        }
        cfg.k_min = k;
        cfg.k_max = k;
    }
    let report = run_verification(&cfg)?;
    for c in &report.checks {
        println!(
            "{:<24} max deviation {:.3e}  tol {:.0e}  cases {:>6}  {}",
            c.name,
            c.max_deviation,
            c.tolerance,
            c.cases,
            if c.passed() { "ok" } else { "FAIL" }
        );
    }
    if let Some(out) = &args.out {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            create_out(dir)?;
        }
        write_json(out, &serde_json::to_value(&report)?)?;
    }
    if report.passed() {
        println!(
            "all checks passed (K={}..={}, seed {})",
            cfg.k_min, cfg.k_max, cfg.seed
        );
        return Ok(ExitCode::SUCCESS);
    }
    for c in report.failures() {
        if let Some(w) = c.worst {
            let qtype = w.qtype.map_or("-".to_string(), |q| q.to_string());
            eprintln!(
                "{} failed at K={} I={} qtype={qtype} seed={}",
                c.name, w.k, w.items, w.seed
            );
        }
    }
    Ok(ExitCode::FAILURE)
}

/// Training labels for one repetition: simulated Q&A labels, ground
/// truth, or labels read back from an event store.
fn training_labels(
    cfg: &RunConfig,
    loaded: &Loaded,
    seed: u64,
) -> anyhow::Result<(Vec<usize>, Vec<LabelSubset>)> {
    let space = loaded.dataset.space;
    let supervision = cfg.supervision()?;
    let all_rows: Vec<usize> = (0..loaded.dataset.len()).collect();
    if let Some(path) = &cfg.events {
        let Supervision::Qa { qtype, items } = supervision else {
            return usage("--events cannot be combined with --ordinary");
        };
        let mut by_id: HashMap<String, LabelSubset> = HashMap::new();
        for e in read_events(path, space)? {
            if e.event.qtype != qtype || e.event.items != items {
                return usage(format!(
                    "event for `{}` is {} with I={}, run is configured for {qtype} with I={items}",
                    e.event.instance_id, e.event.qtype, e.event.items
                ));
            }
            by_id.insert(e.event.instance_id, e.event.qa_label);
        }
        let ids = loaded.ids();
        let (rows, labels): (Vec<usize>, Vec<LabelSubset>) = all_rows
            .into_iter()
            .filter_map(|r| by_id.remove(&ids[r]).map(|l| (r, l)))
            .unzip();
        if rows.is_empty() {
            anyhow::bail!(
                "no event in {} matches the loaded instances",
                path.display()
            );
        }
        return Ok((rows, labels));
    }
    let labels = match supervision {
        Supervision::Ordinary => loaded
            .dataset
            .labels
            .iter()
            .map(|&y| LabelSubset::singleton(y))
            .collect::<Result<_, _>>()?,
        Supervision::Qa { .. } => {
            let spec = spec_for(cfg, space)?;
            simulate_dataset(
                derive_seed(seed, 11),
                &spec,
                &truth_annotator(loaded),
                &loaded.ids(),
            )?
            .into_iter()
            .map(|e| e.qa_label)
            .collect()
        }
    };
    Ok((all_rows, labels))
}

pub fn train(args: &RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.resolve()?;
    let supervision = cfg.supervision()?;
    create_out(&cfg.out)?;
    write_json(
        &cfg.out.join("run_config.json"),
        &serde_json::to_value(&cfg)?,
    )?;
    let test = cfg.load_test()?.map(|t| t.to_test_data()).transpose()?;

    let mut finals = Vec::new();
    for rep in 1..=cfg.repetitions {
        let seed = derive_seed(cfg.seed, rep as u64);
        let loaded = cfg.load_train(seed)?;
        supervision
            .validate(loaded.dataset.space)
            .map_err(|e| UsageError(e.to_string()))?;
        let (rows, labels) = training_labels(&cfg, &loaded, seed)?;
        let features = loaded.dataset.select(&rows)?.features;
        let data = TrainingData::new(features, labels, loaded.dataset.space)?;
        let train_cfg = cfg.train_config(seed)?;
        let outcome = fit(&data, test.as_ref(), &train_cfg)?;

        save_metrics_csv(
            &cfg.out.join(format!("metrics_rep{rep}.csv")),
            &outcome.metrics,
        )?;
        write_params(
            &cfg.out.join(format!("params_rep{rep}.bin")),
            &outcome.params,
        )?;

        let last = outcome.metrics.last();
        let eval = last.and_then(|m| m.test);
        println!(
            "rep {rep}: seed {seed}, n {}, final train risk {}, test {}",
            data.labels.len(),
            last.map_or("-".into(), |m| format!("{:.4}", m.train_qa_risk)),
            eval.map_or("-".into(), |e| format!(
                "MAE {:.4} accuracy {:.4}",
                e.mae, e.accuracy
            ))
        );
        finals.push(json!({"rep": rep, "seed": seed, "test": eval}));
    }
    write_json(
        &cfg.out.join("summary.json"),
        &json!({"seed": cfg.seed, "supervision": supervision, "repetitions": finals}),
    )?;
    Ok(ExitCode::SUCCESS)
}

pub fn eval(args: &EvalArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.run.resolve()?;
    let dataset = match cfg.load_test()? {
        Some(t) => t,
        None => cfg.load_train(cfg.seed)?.dataset,
    };
    let params =
        read_params(&args.params).with_context(|| format!("reading {}", args.params.display()))?;
    let result = evaluate(&params, &dataset.to_test_data()?)?;
    println!(
        "{}",
        json!({"mae": result.mae, "accuracy": result.accuracy, "n": dataset.len()})
    );
    Ok(ExitCode::SUCCESS)
}

pub fn bounds(args: &BoundsArgs) -> anyhow::Result<ExitCode> {
    let to_usage = |e: qa_label::Error| UsageError(e.to_string());
    let rad_sum = match (args.rad_sum, args.kernel_r, args.kernel_lambda) {
        (Some(v), _, _) => v,
        (None, Some(r), Some(lambda)) => {
            args.k as f64
                * kernel_rademacher_bound(&KernelBoundInputs {
                    r,
                    lambda,
                    n: args.n,
                })
                .map_err(to_usage)?
        }
        _ => {
            args.k as f64
                * kernel_rademacher_bound(&KernelBoundInputs {
                    r: 1.0,
                    lambda: 1.0,
                    n: args.n,
                })
                .map_err(to_usage)?
        }
    };
    let inputs = BoundInputs {
        k: args.k,
        items: 1,
        rho: args.rho,
        c_l: args.c_l,
        delta: args.delta,
        n: args.n,
        rad_sum,
    };
    inputs.validate().map_err(to_usage)?;
    let rows = bound_sweep(&inputs)?;
    let mut csv = String::from("I,bound_whichone,bound_isin\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            r.items, r.bound_whichone, r.bound_isin
        ));
    }
    create_out(&args.out)?;
    fs::write(args.out.join("bounds.csv"), &csv)?;
    print!("{csv}");
    Ok(ExitCode::SUCCESS)
}

pub fn serve(args: &ServeArgs) -> anyhow::Result<ExitCode> {
    let cfg = args.run.resolve()?;
    let loaded = cfg.load_train(cfg.seed)?;
    let ids = loaded.ids();
    let mut entry = DatasetEntry::with_ids(loaded.dataset, ids)?;
    if let Some(names) = &args.class_names {
        entry = entry.with_class_names(names.clone());
    }
    let origin = match &args.cors_origin {
        Some(o) => {
            Some(HeaderValue::from_str(o).map_err(|e| UsageError(format!("--cors-origin: {e}")))?)
        }
        None => None,
    };
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| UsageError(format!("bad listen address: {e}")))?;
    create_out(&cfg.out)?;
    let store = args
        .store
        .clone()
        .unwrap_or_else(|| cfg.out.join("events.jsonl"));
    let state = AppState::new(
        HashMap::from([(args.dataset_name.clone(), entry)]),
        Some(&store),
        cfg.seed,
    )?;
    let app = router(state, origin);
    tokio::runtime::Runtime::new()?.block_on(qa_label_server::serve(addr, app))?;
    Ok(ExitCode::SUCCESS)
}
