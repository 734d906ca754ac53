use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use svdro_bench::config::{parse_override, RunConfig};
use svdro_bench::error::{BenchError, BenchResult};
use svdro_bench::runner::{
    controller_cells, kernel_cells, run_cells, run_trial, summarize, time_ordering_confidence, trial_file,
    write_record, write_records,
};
use svdro_bench::scale::run_scaling;
use svdro_bench::tables::{format_summary, validate_csv, write_csv};
use svdro_bench::trace::{discrepancy_trace, objective_trace, particle_trace};
use svdro_bench::Resolved;
use svdro_core::record::{decode_trial, summary_of};
use svdro_core::WorkPool;
use toml::Value;

#[derive(Parser)]
#[command(name = "svdro", version, about = "Benchmarks for Stein-variational robust sampling MPC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its record file.
    Trial(Common),
    /// Paired benchmark of every configured controller.
    Bench(Common),
    /// SV-DRO with each kernel on paired trials.
    AblateKernel {
        #[command(flatten)]
        common: Common,
        /// Comma-separated kernel names (rbf, constant, imq).
        #[arg(long, value_delimiter = ',')]
        kernels: Vec<String>,
    },
    /// Objective, particle or discrepancy traces.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mode: Option<String>,
    },
    /// Cycle wall-clock against particle count or horizon.
    Scale {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: Option<String>,
        #[arg(long, value_delimiter = ',')]
        values: Vec<usize>,
    },
    /// Resolve the configuration and print it.
    ValidateConfig(Common),
    /// Check record (.jsonl) and table (.csv) files against their schemas.
    SchemaCheck {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    env: Option<String>,
    /// Controller name; comma-separated for bench and trace.
    #[arg(long, value_delimiter = ',')]
    controller: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Success threshold in meters; comma-separated for several.
    #[arg(long, value_delimiter = ',')]
    threshold: Vec<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; defaults to $SVDRO_OUT_DIR, then ./svdro-out.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` applied after the config file and flags, in order.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn key(k: &str) -> Vec<String> {
    k.split('.').map(str::to_string).collect()
}

impl Common {
    fn patches(&self, extra: Vec<(Vec<String>, Value)>) -> BenchResult<Vec<(Vec<String>, Value)>> {
        let mut p = Vec::new();
        if let Some(e) = &self.env {
            p.push((key("env"), Value::String(e.clone())));
        }
        if !self.controller.is_empty() {
            let names = self.controller.iter().map(|c| Value::String(c.clone())).collect();
            p.push((key("controllers"), Value::Array(names)));
        }
        if let Some(s) = self.seed {
            let s = i64::try_from(s).map_err(|_| BenchError::Validation("seed exceeds i64::MAX".into()))?;
            p.push((key("seed"), Value::Integer(s)));
        }
        for (name, v) in [("trials", self.trials), ("workers", self.workers)] {
            if let Some(v) = v {
                p.push((key(name), Value::Integer(v as i64)));
            }
        }
        if !self.threshold.is_empty() {
            p.push((key("thresholds"), Value::Array(self.threshold.iter().map(|t| Value::Float(*t)).collect())));
        }
        if let Some(o) = &self.out {
            p.push((key("out"), Value::String(o.display().to_string())));
        }
        p.extend(extra);
        for o in &self.overrides {
            p.push(parse_override(o)?);
        }
        Ok(p)
    }

    fn resolve(&self, extra: Vec<(Vec<String>, Value)>) -> BenchResult<Resolved> {
        RunConfig::load(self.config.as_deref(), &self.patches(extra)?)?.resolve()
    }
}

fn strings(v: &[String]) -> Value {
    Value::Array(v.iter().map(|s| Value::String(s.clone())).collect())
}

fn cmd_trial(c: &Common) -> BenchResult<()> {
    let r = c.resolve(Vec::new())?;
    if r.controllers.len() != 1 {
        return Err(BenchError::Validation("trial needs exactly one --controller".into()));
    }
    let (name, kind) = &r.controllers[0];
    let pool = WorkPool::new(r.cfg.workers)?;
    let rec = run_trial(&r, *kind, r.cfg.seed, &pool)?;
    let path = trial_file(&r.cfg.out_dir(), &r.env.name, name, r.cfg.seed);
    write_record(&path, &rec)?;
    let line = serde_json::to_string(&summary_of(&rec)).map_err(|e| BenchError::Runtime(e.to_string()))?;
    println!("{line}");
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn bench_like(r: &Resolved, cells: &[svdro_bench::runner::Cell], name: &str) -> BenchResult<Vec<svdro_bench::runner::CellResult>> {
    let pool = WorkPool::new(r.cfg.workers)?;
    let results = run_cells(r, cells, &pool)?;
    let out = r.cfg.out_dir();
    let rows = summarize(&r.env.name, &results, &r.cfg.thresholds);
    let csv = out.join(format!("{name}-{}.csv", r.env.name));
    write_csv(&csv, &rows)?;
    write_records(&out.join(format!("{name}-{}", r.env.name)), &results)?;
    print!("{}", format_summary(&rows));
    eprintln!("wrote {}", csv.display());
    Ok(results)
}

fn cmd_bench(c: &Common) -> BenchResult<()> {
    let r = c.resolve(Vec::new())?;
    bench_like(&r, &controller_cells(&r), "bench")?;
    Ok(())
}

fn cmd_ablate(c: &Common, kernels: &[String]) -> BenchResult<()> {
    let extra = if kernels.is_empty() {
        Vec::new()
    } else {
        vec![(key("ablation.kernels"), strings(kernels))]
    };
    let r = c.resolve(extra)?;
    let cells = kernel_cells(&r, &r.cfg.ablation.kernels)?;
    let results = bench_like(&r, &cells, "ablation")?;
    if results.len() > 1 {
        let thr = r.cfg.thresholds.iter().copied().fold(f64::INFINITY, f64::min);
        let order: Vec<&str> = results.iter().map(|c| c.label.as_str()).collect();
        println!(
            "P(mean completion {} at {thr} m) = {:.3}",
            order.join(" <= "),
            time_ordering_confidence(&results, thr, r.cfg.seed)
        );
    }
    Ok(())
}

fn cmd_trace(c: &Common, mode: Option<&str>) -> BenchResult<()> {
    let extra = mode.map_or(Vec::new(), |m| vec![(key("trace.mode"), Value::String(m.into()))]);
    let r = c.resolve(extra)?;
    let pool = WorkPool::new(r.cfg.workers)?;
    let cells = controller_cells(&r);
    let mode = r.cfg.trace.mode.as_str();
    let rows = match mode {
        "objective" => {
            let t = objective_trace(&r, &cells, &pool)?;
            for (i, cell) in cells.iter().enumerate() {
                println!("{:<10} across-seed final objective variance {:.6e}", cell.label, t.pooled_variance(i));
            }
            t.rows
        }
        "particles" => particle_trace(&r, &cells, &pool)?,
        _ => {
            let t = discrepancy_trace(&r, &cells, &pool)?;
            for (cell, fit) in cells.iter().zip(&t.fits) {
                match fit {
                    Some(f) => println!("{:<10} final error slope {:.5} m per prior width", cell.label, f.slope),
                    None => println!("{:<10} final error slope undefined (need two offsets)", cell.label),
                }
            }
            t.rows
        }
    };
    let path = r.cfg.out_dir().join(format!("trace-{mode}-{}.csv", r.env.name));
    write_csv(&path, &rows)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_scale(c: &Common, axis: Option<&str>, values: &[usize]) -> BenchResult<()> {
    let mut extra = Vec::new();
    if let Some(a) = axis {
        extra.push((key("scale.axis"), Value::String(a.into())));
    }
    if !values.is_empty() {
        extra.push((key("scale.values"), Value::Array(values.iter().map(|v| Value::Integer(*v as i64)).collect())));
    }
    let r = c.resolve(extra)?;
    let s = run_scaling(&r)?;
    for row in &s.rows {
        println!(
            "{}={:<4} workers={:<2} {:.4} ± {:.4} s",
            row.axis, row.value, row.workers, row.mean_s, row.std_s
        );
    }
    for (w, fit) in &s.fits {
        if let Some(f) = fit {
            println!("workers={w}: slope {:.3e} s per unit, R² {:.3}", f.slope, f.r_squared);
        }
    }
    let path = r.cfg.out_dir().join(format!("scale-{}-{}.csv", r.cfg.scale.axis, r.env.name));
    write_csv(&path, &s.rows)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_validate(c: &Common) -> BenchResult<()> {
    let r = c.resolve(Vec::new())?;
    print!("{}", r.cfg.to_toml()?);
    Ok(())
}

fn cmd_schema_check(files: &[PathBuf]) -> BenchResult<()> {
    let mut bad = 0;
    for f in files {
        let text = std::fs::read_to_string(f)?;
        let verdict = match f.extension().and_then(|e| e.to_str()) {
            Some("jsonl") => decode_trial(&text)
                .map(|r| format!("svdro-trial/1, {} cycles", r.cycles.len()))
                .map_err(|e| e.to_string()),
            Some("csv") => validate_csv(&text)
                .map(|(s, n)| format!("{s}, {n} rows"))
                .map_err(|e| e.to_string()),
            _ => Err("unknown extension (expected .jsonl or .csv)".into()),
        };
        match verdict {
            Ok(v) => println!("ok   {}: {v}", f.display()),
            Err(e) => {
                bad += 1;
                println!("FAIL {}: {e}", f.display());
            }
        }
    }
    if bad > 0 {
        return Err(BenchError::Validation(format!("{bad} file(s) failed the schema check")));
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors are validation errors (exit 1), not clap's default 2.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Trial(c) => cmd_trial(c),
        Command::Bench(c) => cmd_bench(c),
        Command::AblateKernel { common, kernels } => cmd_ablate(common, kernels),
        Command::Trace { common, mode } => cmd_trace(common, mode.as_deref()),
        Command::Scale { common, axis, values } => cmd_scale(common, axis.as_deref(), values),
        Command::ValidateConfig(c) => cmd_validate(c),
        Command::SchemaCheck { files } => cmd_schema_check(files),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
