use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use regionplan_core::bench::{dump_search_space, run_suite, write_reports, BenchSuite};
use regionplan_core::datagen::{build_scenario, generate_samples, GenOptions, Scenario, ScenarioSpec, Template};
use regionplan_core::multi::{plan_all, SampleFrom};
use regionplan_core::raster;
use regionplan_core::region::{self, predict_batch, Concurrency, RegionSource};
use regionplan_core::search::validate_path;
use regionplan_core::{plan, ActionMode, ActionSet, Cell, SearchConfig, TargetSamplerConfig};

#[derive(Parser)]
#[command(name = "regionplan", version, about = "Lookup-table A* with predicted path regions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan to a single target and print the result as JSON.
    Plan(PlanArgs),
    /// Sample targets along the reference path and plan to each.
    PlanMulti(MultiArgs),
    /// Write (input PPM, label PGM) training pairs and manifest.csv.
    GenSamples(GenArgs),
    /// Write oracle region masks named mask_{scenario}_{index}.pgm.
    OracleRegion(OracleArgs),
    /// Print the action set as CSV.
    DumpActions {
        #[arg(long, default_value = "coprime")]
        mode: ActionMode,
    },
    /// Run the benchmark suite and write bench.csv.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario file in key = value form; flags below override it.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// corridor, s-curve or lot.
    #[arg(long)]
    template: Option<String>,
    #[arg(long)]
    id: Option<String>,
}

impl ScenarioArgs {
    fn spec(&self) -> Result<ScenarioSpec> {
        let mut spec = match &self.scenario {
            Some(p) => ScenarioSpec::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => ScenarioSpec::default(),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(name) = &self.template {
            spec.template = Template::from_name(name).with_context(|| format!("unknown template {name:?}"))?;
        }
        if let Some(id) = &self.id {
            spec.id = id.clone();
        }
        Ok(spec)
    }

    fn build(&self) -> Result<Scenario> {
        Ok(build_scenario(&self.spec()?)?)
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SourceKind {
    Null,
    Oracle,
    File,
}

#[derive(Args, Clone)]
struct SourceArgs {
    #[arg(long, value_enum, default_value = "null")]
    source: SourceKind,
    /// Directory of mask_{scenario}_{index}.pgm files for the file source.
    #[arg(long)]
    mask_dir: Option<PathBuf>,
    /// Dilation radius of oracle masks, cells.
    #[arg(long, default_value_t = region::ORACLE_RADIUS)]
    oracle_radius: u32,
}

impl SourceArgs {
    fn source(&self) -> Result<RegionSource> {
        Ok(match self.source {
            SourceKind::Null => RegionSource::Null,
            SourceKind::Oracle => RegionSource::Oracle { radius: self.oracle_radius, search: generous_search() },
            SourceKind::File => RegionSource::File { dir: self.mask_dir.clone().context("--source file needs --mask-dir")? },
        })
    }
}

#[derive(Args, Clone)]
struct SearchArgs {
    #[arg(long, default_value_t = 0.15)]
    w: f64,
    #[arg(long, default_value_t = 3.0)]
    delta_ang_weight: f64,
    #[arg(long, default_value_t = 100)]
    time_limit_ms: u64,
    #[arg(long, default_value_t = 1.0)]
    goal_tolerance: f64,
    #[arg(long, default_value = "coprime")]
    action_mode: ActionMode,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            w: self.w,
            delta_ang_weight: self.delta_ang_weight,
            time_limit: Duration::from_millis(self.time_limit_ms),
            goal_tolerance: self.goal_tolerance,
            ..Default::default()
        }
    }
}

#[derive(Args, Clone)]
struct SamplerArgs {
    #[arg(long, default_value_t = 25.0)]
    step: f64,
    /// Comma-separated lateral offsets in cells, positive to the left.
    #[arg(long, default_value = "-10,-5,0,5,10", allow_hyphen_values = true)]
    offsets: String,
    #[arg(long, default_value_t = 10)]
    max_targets: usize,
    /// Walk stations back from the path's far end or out from the ego.
    #[arg(long, default_value = "far-end")]
    from: SampleFrom,
}

impl SamplerArgs {
    fn config(&self) -> Result<TargetSamplerConfig> {
        let lateral_offsets = parse_list(&self.offsets)?;
        let cfg = TargetSamplerConfig { longitudinal_step: self.step, lateral_offsets, max_targets: self.max_targets, from: self.from };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Target cell as COL,ROW.
    #[arg(long, allow_hyphen_values = true)]
    target: String,
    /// Vehicle speed in m/s; defaults to the scenario's.
    #[arg(long)]
    speed: Option<f64>,
    /// Region mask PGM to plan with, in place of --source.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Write the path as CSV (col,row,heading).
    #[arg(long)]
    path_out: Option<PathBuf>,
    /// Write the expanded-cell footprint as a PGM.
    #[arg(long)]
    footprint_out: Option<PathBuf>,
}

#[derive(Args)]
struct MultiArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    parallel: bool,
    /// Directory for per-target path_{index}.csv files.
    #[arg(long)]
    paths_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    per_target: usize,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    out: PathBuf,
    /// Explicit targets as COL,ROW;COL,ROW instead of sampling.
    #[arg(long, allow_hyphen_values = true)]
    targets: Option<String>,
    #[arg(long, default_value_t = region::ORACLE_RADIUS)]
    radius: u32,
    /// Also write input_{scenario}_{index}.ppm predictor inputs.
    #[arg(long)]
    with_inputs: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    out: PathBuf,
    /// Number of seeded scenarios per template.
    #[arg(long, default_value_t = 5)]
    scenarios: u64,
    #[arg(long, default_value = "corridor")]
    templates: String,
    #[arg(long, default_value = "1,3,7,10,15,20,30,40,50")]
    counts: String,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value = "null,oracle")]
    sources: String,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    parallel: bool,
}

fn generous_search() -> SearchConfig {
    SearchConfig { time_limit: Duration::from_secs(10), ..Default::default() }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<T>().map_err(|_| anyhow::anyhow!("bad list entry {t:?} in {s:?}")))
        .collect()
}

fn parse_cell(s: &str) -> Result<Cell> {
    match parse_list::<i32>(s)?.as_slice() {
        [c, r] => Ok(Cell::new(*c, *r)),
        _ => bail!("expected COL,ROW, got {s:?}"),
    }
}

fn concurrency(parallel: bool) -> Concurrency {
    if parallel {
        Concurrency::Parallel
    } else {
        Concurrency::Sequential
    }
}

fn run_plan(args: PlanArgs) -> Result<()> {
    let mut sc = args.scenario.build()?;
    if let Some(speed) = args.speed {
        sc.speed = speed;
    }
    let target = parse_cell(&args.target)?;
    let actions = ActionSet::build(args.search.action_mode);
    let mut cfg = args.search.config();
    cfg.trace = args.footprint_out.is_some();
    let (kind, mask) = match &args.mask {
        Some(p) => {
            if args.source.source != SourceKind::Null {
                bail!("--mask and --source are exclusive");
            }
            let mask = raster::read_mask_sized(p, sc.inflated.width(), sc.inflated.height())
                .with_context(|| format!("reading {}", p.display()))?;
            ("mask", Some(mask))
        }
        None => {
            let source = args.source.source()?;
            (source.kind(), predict_batch(&source, &sc, &[target], &actions, Concurrency::Sequential).remove(0)?)
        }
    };
    let r = plan(&sc.inflated, sc.start, target, sc.speed, mask.as_ref(), &cfg, &actions)?;
    let valid = r.reached().then(|| validate_path(&sc.inflated, &r.path, sc.start, target, sc.speed, &cfg, &actions).is_ok());
    let out = serde_json::json!({
        "scenario": sc.id,
        "source": kind,
        "target": target,
        "status": r.status,
        "cost": r.cost,
        "steps": r.path.len().saturating_sub(1),
        "stats": r.stats,
        "valid": valid,
    });
    println!("{out}");
    if let Some(p) = &args.path_out {
        let mut s = String::from("col,row,heading\n");
        for pose in &r.path {
            s.push_str(&format!("{},{},{}\n", pose.col, pose.row, pose.heading));
        }
        fs::write(p, s).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &args.footprint_out {
        dump_search_space(&r, p)?;
    }
    Ok(())
}

fn run_multi(args: MultiArgs) -> Result<()> {
    let sc = args.scenario.build()?;
    let actions = ActionSet::build(args.search.action_mode);
    let report = plan_all(
        &sc,
        &args.source.source()?,
        &args.search.config(),
        &args.sampler.config()?,
        &actions,
        concurrency(args.parallel),
    );
    report.write_json_lines(BufWriter::new(io::stdout().lock()))?;
    if let Some(dir) = &args.paths_dir {
        report.write_path_csvs(dir)?;
    }
    Ok(())
}

fn run_gen(args: GenArgs) -> Result<()> {
    let spec = args.scenario.spec()?;
    let options = GenOptions { concurrency: concurrency(!args.sequential), ..Default::default() };
    let m = generate_samples(&spec, &args.sampler.config()?, args.per_target, &args.out, &options)?;
    eprintln!("{} targets, {} samples, {} skipped -> {}", m.targets, m.rows.len(), m.skipped, args.out.display());
    Ok(())
}

fn run_oracle(args: OracleArgs) -> Result<()> {
    let sc = args.scenario.build()?;
    let targets: Vec<Cell> = match &args.targets {
        Some(list) => list.split(';').filter(|t| !t.trim().is_empty()).map(parse_cell).collect::<Result<_>>()?,
        None => regionplan_core::sample_targets(&sc.inflated, &sc.refpath, &args.sampler.config()?),
    };
    let actions = ActionSet::default();
    let source = RegionSource::Oracle { radius: args.radius, search: generous_search() };
    let masks = predict_batch(&source, &sc, &targets, &actions, Concurrency::Parallel);
    let written = region::export_masks(&args.out, &sc.id, &masks)?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "index,target_col,target_row,mask")?;
    for (i, (t, w)) in targets.iter().zip(&written).enumerate() {
        let name = w.as_ref().and_then(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        writeln!(stdout, "{i},{},{},{name}", t.col, t.row)?;
        if args.with_inputs {
            let img = region::render_fcn_input(&sc.inflated, &sc.refpath, *t);
            raster::write_ppm(&img, args.out.join(region::input_file_name(&sc.id, i)))?;
        }
    }
    for (i, m) in masks.iter().enumerate() {
        if let Err(e) = m {
            eprintln!("target {i}: {e}");
        }
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let templates: Vec<String> = parse_list(&args.templates)?;
    let mut scenarios = Vec::new();
    for name in &templates {
        let template = Template::from_name(name).with_context(|| format!("unknown template {name:?}"))?;
        for seed in 0..args.scenarios {
            scenarios.push(ScenarioSpec { id: format!("{name}-{seed}"), seed, template: template.clone(), ..Default::default() });
        }
    }
    let sources = parse_list::<String>(&args.sources)?
        .iter()
        .map(|s| match s.as_str() {
            "null" => Ok(RegionSource::Null),
            "oracle" => Ok(RegionSource::oracle()),
            other => bail!("bench supports null and oracle sources, got {other:?}"),
        })
        .collect::<Result<Vec<_>>>()?;
    let suite = BenchSuite {
        scenarios,
        target_counts: parse_list(&args.counts)?,
        repetitions: args.reps,
        sources,
        search: args.search.config(),
        sampler: TargetSamplerConfig::default(),
        concurrency: concurrency(args.parallel),
    };
    let rows = run_suite(&suite, &ActionSet::build(args.search.action_mode))?;
    write_reports(&rows, &args.out)?;
    print!("{}", regionplan_core::bench::summary_csv(&rows));
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Plan(a) => run_plan(a),
        Command::PlanMulti(a) => run_multi(a),
        Command::GenSamples(a) => run_gen(a),
        Command::OracleRegion(a) => run_oracle(a),
        Command::DumpActions { mode } => {
            print!("{}", ActionSet::build(mode).to_csv());
            Ok(())
        }
        Command::Bench(a) => run_bench(a),
    }
}
