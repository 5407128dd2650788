//! Subcommands behind the `bifair` binary. Each returns the process exit
//! code: 0 ok, 1 constraint or domain failure, 2 I/O or parse failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::{ConfigError, ExperimentConfig};
use crate::oracle::{bound_breakdown, estimate_l1, BoundParameters, OracleSummary, L1_SAMPLES};
use crate::policies::Algorithm;
use crate::rng::{Purpose, RngStream, StreamId};
use crate::runner::{run_experiment, AggregateResult, FinalAggregate, InstanceSource, RunResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONSTRAINT: i32 = 1;
pub const EXIT_IO: i32 = 2;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RESOLVED_FILE: &str = "resolved_config.toml";

/// Command-line overrides for `run`.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub runs: Option<u64>,
    pub horizon: Option<u64>,
    pub seed: Option<u64>,
    pub algorithms: Option<Vec<Algorithm>>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(r) = self.runs {
            cfg.experiment.runs = r;
        }
        if let Some(t) = self.horizon {
            cfg.experiment.horizon = t;
        }
        if let Some(s) = self.seed {
            cfg.experiment.seed = s;
        }
        if let Some(a) = &self.algorithms {
            cfg.algorithms = a.clone();
        }
    }
}

fn load(path: &Path, err: &mut dyn Write) -> Result<ExperimentConfig, i32> {
    ExperimentConfig::load(path).map_err(|e| {
        let _ = writeln!(err, "error: {e}");
        EXIT_IO
    })
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cfg = match load(path, err) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let mut ok = true;
    for check in cfg.checks() {
        let line = match &check.outcome {
            Ok(()) => format!("ok    {}", check.name),
            Err(e) => {
                ok = false;
                format!("FAIL  {}: {e}", check.name)
            }
        };
        let _ = writeln!(out, "{line}");
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_CONSTRAINT
    }
}

pub fn cmd_run(path: &Path, out_dir: &Path, overrides: &Overrides, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut cfg = match load(path, err) {
        Ok(c) => c,
        Err(code) => return code,
    };
    overrides.apply(&mut cfg);
    let resolved = match cfg.resolve() {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONSTRAINT;
        }
    };
    if let Err(e) = fs::create_dir_all(out_dir) {
        let _ = writeln!(err, "error: cannot create {}: {e}", out_dir.display());
        return EXIT_IO;
    }
    let mut labelled: Vec<(Option<String>, AggregateResult)> = Vec::new();
    for run in &resolved {
        match run_experiment(&run.config) {
            Ok(agg) => labelled.push((run.beta_label.clone(), agg)),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_CONSTRAINT;
            }
        }
    }
    let written = write_artifacts(out_dir, &cfg, &labelled);
    match written {
        Ok(()) => {
            let _ = writeln!(out, "wrote {}", out_dir.display());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_IO
        }
    }
}

fn label(alg: Algorithm, beta: &Option<String>) -> String {
    match beta {
        Some(b) => format!("{}/beta={b}", alg.name()),
        None => alg.name().to_string(),
    }
}

fn write_artifacts(
    dir: &Path,
    cfg: &ExperimentConfig,
    results: &[(Option<String>, AggregateResult)],
) -> Result<(), ConfigError> {
    let io = |p: PathBuf, e: &dyn std::fmt::Display| ConfigError::Parse(format!("{}: {e}", p.display()));

    let path = dir.join(TIMESERIES_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| io(path.clone(), &e))?;
    let mut rows = || -> Result<(), csv::Error> {
        w.write_record(["algorithm", "run", "t", "metric", "group", "value"])?;
        for (beta, agg) in results {
            for a in &agg.algorithms {
                let name = label(a.algorithm, beta);
                for r in &a.runs {
                    write_run(&mut w, &name, r)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    };
    rows().map_err(|e| io(path.clone(), &e))?;

    let path = dir.join(AGGREGATE_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| io(path.clone(), &e))?;
    let mut rows = || -> Result<(), csv::Error> {
        w.write_record(["algorithm", "t", "metric", "group", "mean", "std"])?;
        for (beta, agg) in results {
            for a in &agg.algorithms {
                let name = label(a.algorithm, beta);
                for p in &a.series {
                    w.write_record([
                        name.as_str(),
                        &p.t.to_string(),
                        p.metric,
                        p.group.as_deref().unwrap_or(""),
                        &p.stat.mean.to_string(),
                        &p.stat.std.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    };
    rows().map_err(|e| io(path.clone(), &e))?;

    #[derive(Serialize)]
    struct Entry<'a> {
        algorithm: String,
        runs: usize,
        #[serde(flatten)]
        summary: &'a FinalAggregate,
    }
    let entries: Vec<Entry> = results
        .iter()
        .flat_map(|(beta, agg)| {
            agg.algorithms.iter().map(move |a| Entry {
                algorithm: label(a.algorithm, beta),
                runs: a.runs.len(),
                summary: &a.summary,
            })
        })
        .collect();
    let summary = json!({
        "horizon": cfg.experiment.horizon,
        "runs": cfg.experiment.runs,
        "seed": cfg.experiment.seed,
        "algorithms": entries,
    });
    let path = dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    fs::write(&path, text).map_err(|e| io(path.clone(), &e))?;

    let path = dir.join(RESOLVED_FILE);
    fs::write(&path, cfg.to_toml()).map_err(|e| io(path.clone(), &e))?;
    Ok(())
}

fn write_run<W: Write>(w: &mut csv::Writer<W>, name: &str, r: &RunResult) -> Result<(), csv::Error> {
    let run = r.run.to_string();
    for s in &r.snapshots {
        let t = s.t.to_string();
        let mut row = |metric: &str, group: &str, value: String| w.write_record([name, &run, &t, metric, group, &value]);
        row("pseudo_regret", "", s.pseudo_regret.to_string())?;
        row("realized_reward", "", s.realized_reward.to_string())?;
        row("term1", "", s.term1.to_string())?;
        row("term2", "", s.term2.to_string())?;
        for g in 0..s.group_pulls.len() {
            let gs = g.to_string();
            if let Some(fr) = s.fr_norm[g] {
                row("fr_norm", &gs, fr.to_string())?;
            }
            row("gef_slack", &gs, s.gef_slack[g].to_string())?;
            row("group_pulls", &gs, s.group_pulls[g].to_string())?;
        }
        for (g, arms) in r.instance.groups.groups().iter().enumerate() {
            for &i in arms {
                row("arm_pulls", &format!("{g}:{i}"), s.arm_pulls[i].to_string())?;
            }
        }
    }
    Ok(())
}

pub fn cmd_oracle(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cfg = match load(path, err) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if cfg.regenerates() {
        let _ = writeln!(err, "error: oracle needs a fixed instance (set regenerate_per_run = false)");
        return EXIT_CONSTRAINT;
    }
    let resolved = match cfg.resolve() {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONSTRAINT;
        }
    };
    let run = &resolved[0].config;
    let inst = match &run.instance {
        InstanceSource::Fixed(i) => i.clone(),
        InstanceSource::Generated { .. } => match run.instance_for_run(0) {
            Ok(i) => i,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_CONSTRAINT;
            }
        },
    };
    let horizon = run.horizon;
    let summary = OracleSummary::build(&inst, &run.merit);
    let mut rng = RngStream::new(run.seed, StreamId::new(0, 0, Purpose::Estimate));
    let l1 = estimate_l1(&run.merit, &inst, L1_SAMPLES, &mut rng);
    let params = BoundParameters::new(&summary, &inst, &run.merit, &run.beta, run.delta, l1);
    // group pulls of the fair-optimal schedule
    let mut pulls: Vec<u64> = (0..summary.groups()).map(|g| run.beta.floor(g, horizon)).collect();
    pulls[summary.g_star] = horizon - (0..pulls.len()).filter(|&g| g != summary.g_star).map(|g| pulls[g]).sum::<u64>();
    let bound = match bound_breakdown(&params, &pulls, horizon).and_then(|b| b.total().map(|t| (b, t))) {
        Ok((b, total)) => json!({ "total": total, "breakdown": b }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let doc = json!({
        "means": inst.means,
        "groups": inst.groups,
        "horizon": horizon,
        "beta": run.beta.shares().iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "pi_star": summary.pi_star,
        "g_star": summary.g_star,
        "g_star_unique": summary.g_star_unique,
        "r_star": summary.r_star,
        "gaps": summary.gaps,
        "delta_min": summary.delta_min,
        "optimal_reward": summary.optimal_reward(&run.beta, horizon),
        "bound_inputs": params,
        "bound_group_pulls": pulls,
        "bound": bound,
    });
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("oracle output serializes"));
    EXIT_OK
}
