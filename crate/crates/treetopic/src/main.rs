//! Command-line front end: corpus generation, fitting, held-out evaluation,
//! metric reports and the two experiment harnesses. Every command writes its
//! outputs into a run directory together with a manifest recording the
//! configuration, seeds and file checksums.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use treetopic::experiments::{
    pca_projection, run_rate_experiment, run_selection_experiment, selection_diagnostics,
    RateConfig, SelectionConfig,
};
use treetopic::geometry::{augmented_tree_hausdorff, d_l2, union_hausdorff};
use treetopic::gibbs::{
    heldout_loglik, posterior_mean_estimates, run_chains, state_at_sample, ChainStrategy,
    FoldInOpts, Hyper, MultiChainOpts,
};
use treetopic::io::{
    self, format_float, parse_corpus, parse_fit, parse_params, parse_tree, trace_sidecar,
    write_corpus, write_fit, FitFile, HyperFile, RunManifest, TreeFile,
};
use treetopic::model::sample_corpus;

#[derive(Parser)]
#[command(name = "treetopic", version, about = "Tree-directed topic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Mixed,
}

#[derive(Args)]
struct FitFlags {
    /// Parallel chains; the best one by harmonic-mean data likelihood wins.
    #[arg(long, default_value_t = 8)]
    chains: usize,
    #[arg(long, default_value_t = 5500)]
    iters: usize,
    #[arg(long, default_value_t = 5000)]
    burnin: usize,
    #[arg(long, default_value_t = 10)]
    thin: usize,
    /// Document-depth concentration.
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    /// Topic-word concentration.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Path concentration.
    #[arg(long, default_value_t = 1.0)]
    pi0: f64,
    /// Chain initialization mixture.
    #[arg(long, value_enum, default_value_t = InitArg::Mixed)]
    init: InitArg,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a corpus from a parameter file.
    Generate {
        /// Model parameter JSON ({tree, topics, pi, alpha}).
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write word:count lines instead of token lists.
        #[arg(long)]
        sparse: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the sampler to a corpus under a fixed tree.
    Fit {
        /// Tree JSON ({root, parents}).
        #[arg(long)]
        tree: PathBuf,
        /// Corpus text file.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        flags: FitFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Held-out per-document log-likelihood of a saved fit by fold-in.
    Eval {
        /// Run directory written by `fit`.
        #[arg(long)]
        fit_dir: PathBuf,
        /// The corpus the fit was trained on.
        #[arg(long)]
        train: PathBuf,
        /// Held-out corpus.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 200)]
        inner_burnin: usize,
        #[arg(long, default_value_t = 5)]
        thin: usize,
        /// Keep held-out counts out of the word-node probabilities.
        #[arg(long)]
        no_feedback: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metric report between two parameter files, or a diagnostic report of
    /// one.
    Metrics {
        #[arg(long)]
        params_a: PathBuf,
        #[arg(long)]
        params_b: Option<PathBuf>,
        /// Monte-Carlo points per polytope for the union Hausdorff estimate.
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Topic-estimation-rate experiment over a corpus-size grid.
    RateExp {
        #[arg(long, value_enum, default_value_t = Profile::Desk)]
        profile: Profile,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tree-selection experiment: held-out likelihood and minimum path
    /// probability across candidate trees.
    SelectExp {
        #[arg(long, value_enum, default_value_t = Profile::Desk)]
        profile: Profile,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Generate {
            params,
            m,
            n,
            seed,
            sparse,
            out,
        } => generate(&params, m, n, seed, sparse, &out),
        Command::Fit {
            tree,
            corpus,
            seed,
            flags,
            out,
        } => fit(&tree, &corpus, seed, &flags, &out),
        Command::Eval {
            fit_dir,
            train,
            corpus,
            samples,
            inner_burnin,
            thin,
            no_feedback,
            seed,
            out,
        } => eval(
            &fit_dir,
            &train,
            &corpus,
            samples,
            inner_burnin,
            thin,
            !no_feedback,
            seed,
            &out,
        ),
        Command::Metrics {
            params_a,
            params_b,
            samples,
            seed,
            out,
        } => metrics(&params_a, params_b.as_deref(), samples, seed, &out),
        Command::RateExp { profile, seed, out } => rate_exp(profile, seed, &out),
        Command::SelectExp { profile, seed, out } => select_exp(profile, seed, &out),
    }
}

fn generate(
    params_path: &Path,
    m: usize,
    n: usize,
    seed: u64,
    sparse: bool,
    out: &Path,
) -> Result<(), String> {
    ensure_dir(out)?;
    let params = parse_params(params_path).map_err(|e| e.to_string())?;
    let (corpus, truth) = sample_corpus(&params, m, n, seed);
    write_corpus(&corpus, &out.join("corpus.txt"), sparse).map_err(|e| e.to_string())?;

    #[derive(Serialize, Deserialize)]
    struct TruthFile {
        path_indices: Vec<usize>,
        betas: Vec<Vec<f64>>,
        etas: Vec<Vec<f64>>,
    }
    let tf = TruthFile {
        path_indices: truth.path_indices,
        betas: truth.betas,
        etas: truth.etas,
    };
    std::fs::write(
        out.join("truth.json"),
        serde_json::to_string_pretty(&tf).expect("serializes"),
    )
    .map_err(|e| e.to_string())?;

    let mut manifest = RunManifest::new(json!({
        "command": "generate",
        "params": params_path.display().to_string(),
        "m": m,
        "n": n,
        "sparse": sparse,
    }));
    manifest.record_seed("generate", seed);
    for name in ["corpus.txt", "truth.json"] {
        manifest.record_file(out, name).map_err(|e| e.to_string())?;
    }
    manifest.save(out).map_err(|e| e.to_string())?;
    println!(
        "generated {} documents of {} words over {} word types -> {}",
        m,
        n,
        corpus.vocab_size,
        out.display()
    );
    Ok(())
}

/// Best-sample labels persisted so evaluation can rebuild the frozen counts.
#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    c: Vec<usize>,
    l: Vec<Vec<u8>>,
}

fn fit(
    tree_path: &Path,
    corpus_path: &Path,
    seed: u64,
    flags: &FitFlags,
    out: &Path,
) -> Result<(), String> {
    ensure_dir(out)?;
    let drt = parse_tree(tree_path).map_err(|e| e.to_string())?;
    let corpus = parse_corpus(corpus_path).map_err(|e| e.to_string())?;
    let hyper = Hyper::new(flags.alpha, flags.eta, flags.pi0).map_err(|e| e.to_string())?;
    let result = run_chains(
        &corpus,
        &drt,
        hyper,
        MultiChainOpts {
            chains: flags.chains,
            iters: flags.iters,
            burnin: flags.burnin,
            thin: flags.thin,
            strategy: match flags.init {
                InitArg::Random => ChainStrategy::AllRandom,
                InitArg::Mixed => ChainStrategy::Mixed,
            },
            seed,
        },
    )
    .map_err(|e| e.to_string())?;
    let best = result.best();
    let est = posterior_mean_estimates(best);

    let fit_file = FitFile {
        tree: TreeFile::from_drt(&drt),
        theta_hat: est.theta_hat.clone(),
        pi_hat: est.pi_hat.clone(),
        seed,
        hyper: HyperFile::from(hyper),
        harmonic_mean_loglik: best.harmonic_mean_loglik,
    };
    write_fit(&fit_file, &best.loglik_trace, &out.join("fit.json")).map_err(|e| e.to_string())?;

    let snap = &best.samples[best.best_sample];
    std::fs::write(
        out.join("snapshot.json"),
        serde_json::to_string(&SnapshotFile {
            c: snap.c.clone(),
            l: snap.l.clone(),
        })
        .expect("serializes"),
    )
    .map_err(|e| e.to_string())?;

    // PCA plots of the document means with the fitted topics projected in.
    for (name, comps) in [("pca_1_2.csv", (0usize, 1usize)), ("pca_2_3.csv", (1, 2))] {
        if corpus.doc_count() < 2 {
            break;
        }
        let pca = pca_projection(&corpus, comps).map_err(|e| e.to_string())?;
        let mut rows = vec![format!(
            "# components {} {} degenerate {}",
            comps.0 + 1,
            comps.1 + 1,
            pca.degenerate
        )];
        for (i, (x, y)) in pca.doc_coords.iter().enumerate() {
            rows.push(format!("doc,{i},{},{}", format_float(*x), format_float(*y)));
        }
        for (k, topic) in est.theta_hat.iter().enumerate() {
            let (x, y) = pca.project(topic);
            rows.push(format!(
                "topic,{},{},{}",
                k + 1,
                format_float(x),
                format_float(y)
            ));
        }
        io::append_csv_rows(&out.join(name), "kind,id,x,y", &rows).map_err(|e| e.to_string())?;
    }

    let mut manifest = RunManifest::new(json!({
        "command": "fit",
        "tree": tree_path.display().to_string(),
        "corpus": corpus_path.display().to_string(),
        "chains": flags.chains,
        "iters": flags.iters,
        "burnin": flags.burnin,
        "thin": flags.thin,
        "alpha": flags.alpha,
        "eta": flags.eta,
        "pi0": flags.pi0,
    }));
    manifest.record_seed("fit", seed);
    for chain in &result.chains {
        manifest.record_seed(&format!("chain_{}", chain.seed), chain.seed);
    }
    let trace_name = trace_sidecar(&out.join("fit.json"));
    let trace_name = trace_name.file_name().unwrap().to_string_lossy().into_owned();
    for name in ["fit.json", "snapshot.json", trace_name.as_str()] {
        manifest.record_file(out, name).map_err(|e| e.to_string())?;
    }
    manifest.save(out).map_err(|e| e.to_string())?;
    println!(
        "fit {} chains; best harmonic-mean loglik {:.4} -> {}",
        flags.chains,
        best.harmonic_mean_loglik,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval(
    fit_dir: &Path,
    train_path: &Path,
    heldout_path: &Path,
    samples: usize,
    inner_burnin: usize,
    thin: usize,
    feedback: bool,
    seed: u64,
    out: &Path,
) -> Result<(), String> {
    // The checksum gate: refuse to evaluate a tampered or incomplete fit.
    let manifest = RunManifest::load(fit_dir).map_err(|e| e.to_string())?;
    manifest.verify(fit_dir).map_err(|e| e.to_string())?;

    let fit_file = parse_fit(&fit_dir.join("fit.json")).map_err(|e| e.to_string())?;
    let snapshot: SnapshotFile = serde_json::from_str(
        &std::fs::read_to_string(fit_dir.join("snapshot.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let drt = fit_file.tree.to_drt().map_err(|e| e.to_string())?;
    let hyper = fit_file.hyper.to_hyper().map_err(|e| e.to_string())?;
    let train = parse_corpus(train_path).map_err(|e| e.to_string())?;
    let heldout = parse_corpus(heldout_path).map_err(|e| e.to_string())?;

    let sample = treetopic::gibbs::ChainSample {
        c: snapshot.c,
        l: snapshot.l,
        joint_loglik: 0.0,
        loglik_x: 0.0,
        estimates: treetopic::gibbs::Estimates {
            pi_hat: fit_file.pi_hat.clone(),
            beta_hat: Vec::new(),
            theta_hat: fit_file.theta_hat.clone(),
        },
    };
    let state = state_at_sample(&train, &drt, hyper, &sample).map_err(|e| e.to_string())?;
    let per_doc = heldout_loglik(
        &state,
        &drt,
        &heldout,
        FoldInOpts {
            samples,
            burnin: inner_burnin,
            thin,
            feedback,
            seed,
        },
    )
    .map_err(|e| e.to_string())?;

    ensure_dir(out)?;
    std::fs::write(
        out.join("eval.json"),
        serde_json::to_string_pretty(&json!({
            "heldout_loglik_per_doc": per_doc,
            "heldout_docs": heldout.doc_count(),
            "samples": samples,
            "feedback": feedback,
        }))
        .expect("serializes"),
    )
    .map_err(|e| e.to_string())?;
    let mut manifest = RunManifest::new(json!({
        "command": "eval",
        "fit_dir": fit_dir.display().to_string(),
        "train": train_path.display().to_string(),
        "corpus": heldout_path.display().to_string(),
    }));
    manifest.record_seed("eval", seed);
    manifest.record_file(out, "eval.json").map_err(|e| e.to_string())?;
    manifest.save(out).map_err(|e| e.to_string())?;
    println!("held-out log-likelihood per document: {per_doc:.6}");
    Ok(())
}

fn metrics(
    a_path: &Path,
    b_path: Option<&Path>,
    samples: usize,
    seed: u64,
    out: &Path,
) -> Result<(), String> {
    ensure_dir(out)?;
    let pa = parse_params(a_path).map_err(|e| e.to_string())?;
    let mut rows: Vec<String> = Vec::new();

    match b_path {
        Some(bp) => {
            let pb = parse_params(bp).map_err(|e| e.to_string())?;
            match augmented_tree_hausdorff(&pa.hierarchy, &pb.hierarchy) {
                Ok(v) => rows.push(format!("tree_hausdorff,{},0", format_float(v))),
                Err(e) => rows.push(format!("tree_hausdorff,nan,0 # {e}")),
            }
            let same_tree = pa.hierarchy.drt.parent_map() == pb.hierarchy.drt.parent_map()
                && pa.hierarchy.drt.root() == pb.hierarchy.drt.root();
            if same_tree {
                match d_l2(
                    &pa.hierarchy.topic_map,
                    &pb.hierarchy.topic_map,
                    &pa.hierarchy.drt,
                ) {
                    Ok(v) => rows.push(format!("d_l2,{},0", format_float(v))),
                    Err(e) => rows.push(format!("d_l2,nan,0 # {e}")),
                }
                match union_hausdorff(
                    &pa.hierarchy.topic_map,
                    &pb.hierarchy.topic_map,
                    &pa.hierarchy.drt,
                    samples,
                    seed,
                ) {
                    Ok((v, slack)) => rows.push(format!(
                        "union_hausdorff,{},{}",
                        format_float(v),
                        format_float(slack)
                    )),
                    Err(e) => rows.push(format!("union_hausdorff,nan,0 # {e}")),
                }
            }
        }
        None => {
            let row = selection_diagnostics(
                pa.hierarchy.topic_map.topics(),
                &pa.hierarchy.drt,
                &pa.hierarchy.pi,
                None,
            )
            .map_err(|e| e.to_string())?;
            let fmt_opt = |v: Option<f64>| v.map(format_float).unwrap_or_else(|| "na".into());
            rows.push(format!("min_topic_dist,{},0", format_float(row.min_dist)));
            rows.push(format!("min_path_prob,{},0", format_float(row.min_path)));
            rows.push(format!("min_width,{},0", fmt_opt(row.min_width)));
            rows.push(format!("min_minimal_matching,{},0", fmt_opt(row.min_mm)));
            rows.push(format!("min_grassmann_angle,{},0", fmt_opt(row.min_gr)));
            rows.push(format!("min_projection,{},0", fmt_opt(row.min_proj)));
        }
    }
    io::append_csv_rows(&out.join("metrics.csv"), "metric,value,slack", &rows)
        .map_err(|e| e.to_string())?;

    let mut manifest = RunManifest::new(json!({
        "command": "metrics",
        "params_a": a_path.display().to_string(),
        "params_b": b_path.map(|p| p.display().to_string()),
        "samples": samples,
    }));
    manifest.record_seed("metrics", seed);
    manifest.record_file(out, "metrics.csv").map_err(|e| e.to_string())?;
    manifest.save(out).map_err(|e| e.to_string())?;
    println!("wrote {} metric rows -> {}", rows.len(), out.display());
    Ok(())
}

fn rate_exp(profile: Profile, seed: u64, out: &Path) -> Result<(), String> {
    ensure_dir(out)?;
    let cfg = match profile {
        Profile::Desk => RateConfig::desk(seed),
        Profile::Full => RateConfig::full(seed),
    };
    let report = run_rate_experiment(&cfg).map_err(|e| e.to_string())?;

    let cell_rows: Vec<String> = report
        .cells
        .iter()
        .map(|c| {
            format!(
                "{},{},{},{},{},{}",
                c.n,
                c.m,
                c.replicate,
                format_float(c.d_l2),
                c.sharing_ok,
                c.seed
            )
        })
        .collect();
    io::append_csv_rows(
        &out.join("cells.csv"),
        "n,m,replicate,d_l2,sharing_ok,seed",
        &cell_rows,
    )
    .map_err(|e| e.to_string())?;
    let slope_rows: Vec<String> = report
        .slopes
        .iter()
        .map(|s| {
            format!(
                "{},{},{},{}",
                s.n,
                s.slope.map(format_float).unwrap_or_else(|| "na".into()),
                s.stderr.map(format_float).unwrap_or_else(|| "na".into()),
                s.flagged
            )
        })
        .collect();
    io::append_csv_rows(&out.join("slopes.csv"), "n,slope,stderr,flagged", &slope_rows)
        .map_err(|e| e.to_string())?;

    let mut manifest = RunManifest::new(json!({
        "command": "rate-exp",
        "profile": match profile { Profile::Desk => "desk", Profile::Full => "full" },
        "vocab": cfg.vocab,
        "n_values": cfg.n_values,
        "m_grid": cfg.m_grid,
        "replicates": cfg.replicates,
        "alpha": cfg.alpha,
        "fit": serde_json::to_value(cfg.fit).unwrap(),
    }));
    manifest.record_seed("rate-exp", seed);
    for name in ["cells.csv", "slopes.csv"] {
        manifest.record_file(out, name).map_err(|e| e.to_string())?;
    }
    manifest.save(out).map_err(|e| e.to_string())?;
    for s in &report.slopes {
        println!(
            "n={}: slope {} (stderr {}), sharing ok {:.0}%",
            s.n,
            s.slope.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into()),
            s.stderr.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into()),
            100.0 * report.sharing_fraction()
        );
    }
    Ok(())
}

fn select_exp(profile: Profile, seed: u64, out: &Path) -> Result<(), String> {
    ensure_dir(out)?;
    let mut cfg = SelectionConfig::desk(seed);
    if matches!(profile, Profile::Full) {
        cfg.fit = treetopic::experiments::FitSettings::full();
        cfg.heldout_samples = 50;
    }
    let rows = run_selection_experiment(&cfg).map_err(|e| e.to_string())?;
    let csv_rows: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.candidate,
                r.replicate,
                format_float(r.heldout_loglik),
                format_float(r.min_pi_hat),
                r.is_lda,
                r.is_supertree,
                r.node_count
            )
        })
        .collect();
    io::append_csv_rows(
        &out.join("selection.csv"),
        "candidate,replicate,heldout_loglik,min_pi_hat,is_lda,is_supertree,node_count",
        &csv_rows,
    )
    .map_err(|e| e.to_string())?;

    let mut manifest = RunManifest::new(json!({
        "command": "select-exp",
        "profile": match profile { Profile::Desk => "desk", Profile::Full => "full" },
        "m": cfg.m,
        "n": cfg.n,
        "vocab": cfg.vocab,
        "train_fraction": cfg.train_fraction,
        "replicates": cfg.replicates,
        "alpha": cfg.alpha,
        "candidates": cfg.candidates.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
    }));
    manifest.record_seed("select-exp", seed);
    manifest.record_file(out, "selection.csv").map_err(|e| e.to_string())?;
    manifest.save(out).map_err(|e| e.to_string())?;

    for cand in &cfg.candidates {
        let hl: Vec<f64> = rows
            .iter()
            .filter(|r| r.candidate == cand.name)
            .map(|r| r.heldout_loglik)
            .collect();
        let mean = hl.iter().sum::<f64>() / hl.len().max(1) as f64;
        println!("{}: mean held-out loglik/doc {:.4}", cand.name, mean);
    }
    Ok(())
}
