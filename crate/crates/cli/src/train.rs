use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use graphrel::data::Document;
use graphrel::model::ParserModel;
use graphrel::training::{evaluate, train, TrainConfig};
use graphrel::Result;

use crate::config::RunConfig;
use crate::io::print_out;

#[derive(clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seeds to run, replacing `run.seeds`; repeatable.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory, replacing `run.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep L_psi and L_phi over 0..=3 instead of the configured depths.
    #[arg(long)]
    grid: bool,
}

const SUMMARY_HEADER: &str = "l_psi,l_phi,seed,best_step,best_dev_f1,test_f1,dropped_relations";

pub fn run(args: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config, &args.overrides)?;
    if !args.seeds.is_empty() {
        cfg.run.seeds = args.seeds.clone();
    }
    if let Some(o) = &args.out {
        cfg.run.out_dir = o.clone();
    }
    let (spec, train_docs, dev_docs) = cfg.load_data()?;
    let test_docs = cfg.load_test(&spec)?;

    let depths: Vec<(usize, usize)> = if args.grid {
        (0..=3).flat_map(|a| (0..=3).map(move |b| (a, b))).collect()
    } else {
        vec![(cfg.model.l_psi, cfg.model.l_phi)]
    };
    // Every run is checked before the first one starts.
    for &(l_psi, l_phi) in &depths {
        for &seed in &cfg.run.seeds {
            let mut c = cfg.clone();
            c.model.l_psi = l_psi;
            c.model.l_phi = l_phi;
            c.model_config(spec.clone(), seed).validate()?;
        }
    }

    let out_root = cfg.run.out_dir.clone();
    fs::create_dir_all(&out_root)?;
    let mut summary = format!("{SUMMARY_HEADER}\n");
    print_out(&format!("{SUMMARY_HEADER}\n"))?;
    for &(l_psi, l_phi) in &depths {
        for &seed in &cfg.run.seeds {
            let mut c = cfg.clone();
            c.model.l_psi = l_psi;
            c.model.l_phi = l_phi;
            c.train.seed = seed;
            c.run.seeds = vec![seed];
            let dir = if args.grid {
                out_root.join(format!("psi{l_psi}-phi{l_phi}")).join(format!("seed{seed}"))
            } else {
                out_root.join(format!("seed{seed}"))
            };
            let line = run_one(&c, &spec, &train_docs, &dev_docs, test_docs.as_deref(), seed, &dir)?;
            print_out(&format!("{line}\n"))?;
            summary.push_str(&line);
            summary.push('\n');
        }
    }
    fs::write(out_root.join("summary.csv"), summary)?;
    Ok(())
}

fn run_one(
    cfg: &RunConfig,
    spec: &graphrel::data::DatasetSpec,
    train_docs: &[Document],
    dev_docs: &[Document],
    test_docs: Option<&[Document]>,
    seed: u64,
    dir: &Path,
) -> Result<String> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    let mut model = ParserModel::new(cfg.model_config(spec.clone(), seed))?;
    let tc: &TrainConfig = &cfg.train;
    let tag = format!("psi{} phi{} seed{seed}", cfg.model.l_psi, cfg.model.l_phi);
    let report = train(&mut model, tc, train_docs, dev_docs, Some(dir), |row| {
        if let Some(p) = &row.prf {
            eprintln!("[{tag}] step {:>6} dev loss {:.4} F1 {:.4}", row.step, row.loss.total, p.f1);
        } else {
            eprintln!("[{tag}] step {:>6} train loss {:.4}", row.step, row.loss.total);
        }
    })?;
    let test_f1 = match test_docs {
        Some(docs) => {
            let lambda1 = if model.oracle_tags() { 0.0 } else { tc.lambda1 };
            Some(evaluate(&model, docs, lambda1, tc.lambda2)?.1.f1)
        }
        None => None,
    };
    let mut line = format!(
        "{},{},{seed},{},{:.6},",
        cfg.model.l_psi, cfg.model.l_phi, report.best_step, report.best_f1
    );
    if let Some(f) = test_f1 {
        write!(line, "{f:.6}").unwrap();
    }
    write!(line, ",{}", report.dropped_relations).unwrap();
    Ok(line)
}
