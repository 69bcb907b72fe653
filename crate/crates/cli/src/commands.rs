use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sphere_wsf::designs::{octahedral_rotations, orbit_design, symmetric_design};
use sphere_wsf::estimator::{write_model, EvaluationPlan, InterpolationSystem, LabeledData, WeightedSystem};
use sphere_wsf::experiments::{
    self, dump_to_csv, ingest_latlon_csv, run_real_data, run_scenario, write_records, RealDataConfig, Sampler,
    Scenario, ScenarioConfig,
};
use sphere_wsf::filters::{FilterFamily, FilterSpec};
use sphere_wsf::geometry::PointSet;
use sphere_wsf::io::{read_labeled_points, read_points, write_points, write_text};
use sphere_wsf::kernels::{KernelFamily, KernelSpec};
use sphere_wsf::model_selection::{quadrature_for, select_with_system, split_data, ParameterGrid};
use sphere_wsf::quadrature::{read_rule, write_rule, QuadratureRule};
use sphere_wsf::WsfError;

use crate::config::{self, FileConfig};
use crate::{
    Cli, Command, CvArgs, DesignArgs, DiagnoseArgs, FitArgs, KernelArgs, QuadratureArgs, RealArgs, SimulateArgs,
};

pub enum Failure {
    Usage(String),
    Runtime(WsfError),
}

impl From<WsfError> for Failure {
    fn from(e: WsfError) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

/// Parses a flag value, turning failures into usage errors.
fn parse_flag<T: std::str::FromStr<Err = WsfError>>(s: &str) -> Outcome<T> {
    s.parse().map_err(|e: WsfError| Failure::Usage(e.to_string()))
}

/// `$WSF_DATA_DIR`, else the data directory of the source tree.
pub fn data_dir() -> PathBuf {
    std::env::var_os("WSF_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data")))
}

pub fn run(cli: Cli) -> Outcome {
    let file = match &cli.config {
        Some(p) => config::load(p).map_err(Failure::Usage)?,
        None => FileConfig::default(),
    };
    if let Some(n) = cli.threads.or(file.threads) {
        if n == 0 {
            return usage("--threads must be positive");
        }
        // a pool may already exist when embedded; the first one wins
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Fit(a) => fit(a),
        Command::Cv(a) => cv(a),
        Command::Simulate(a) => simulate(a, file),
        Command::Real(a) => real(a, file),
        Command::Diagnose(a) => diagnose(a),
        Command::Quadrature(a) => quadrature(a),
        Command::Design(a) => design(a),
    }
}

fn kernel_spec(args: &KernelArgs, file: Option<&FileConfig>) -> Outcome<KernelSpec> {
    let family = match args.kernel.clone().or_else(|| file.and_then(|f| f.kernel.clone())) {
        Some(k) => parse_flag::<KernelFamily>(&k)?,
        None => KernelFamily::Wendland41,
    };
    let support = args.support.or_else(|| file.and_then(|f| f.support)).unwrap_or(1.0);
    KernelSpec::new(family, support).map_err(|e| Failure::Usage(e.to_string()))
}

fn parse_degree(s: &str) -> Outcome<Option<usize>> {
    if s == "auto" {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Failure::Usage(format!("--degree must be `auto` or an integer, got {s:?}")))
}

fn labeled(path: &Path) -> Outcome<LabeledData> {
    let (points, values) = read_labeled_points(path)?;
    Ok(LabeledData::new(points, values)?)
}

/// `x y z` or `x y z truth` rows.
fn eval_points(path: &Path) -> Outcome<(PointSet, Option<Vec<f64>>)> {
    match read_labeled_points(path) {
        Ok((p, v)) => Ok((p, Some(v))),
        Err(WsfError::Parse { .. }) => Ok((read_points(path)?, None)),
        Err(e) => Err(e.into()),
    }
}

fn families(list: Option<Vec<String>>) -> Outcome<Option<Vec<FilterFamily>>> {
    list.map(|v| v.iter().map(|s| parse_flag::<FilterFamily>(s)).collect())
        .transpose()
}

fn fit(a: FitArgs) -> Outcome {
    let kernel = kernel_spec(&a.kernel, None)?;
    let degree = parse_degree(&a.degree)?;
    let is_ki = a.filter == "ki";
    let family = if is_ki {
        None
    } else {
        Some(parse_flag::<FilterFamily>(&a.filter)?)
    };
    if family.is_some() && a.param.is_none() && a.ratio.is_none() && a.param_l.is_none() {
        return usage("a filter needs --param, --param-l or --ratio");
    }
    if a.param_l.is_some() && family != Some(FilterFamily::Landweber) {
        return usage("--param-l applies to landweber only");
    }
    if a.out.is_some() && a.eval_points.is_none() {
        return usage("--out needs --eval-points");
    }
    let data = labeled(&a.points)?;
    let eval = a.eval_points.as_deref().map(eval_points).transpose()?;

    let (coefficients, model_text, summary) = if let Some(family) = family {
        let rule = match &a.quadrature {
            Some(p) => read_rule(p)?,
            None => quadrature_for(&data.points, degree)?,
        };
        if rule.points != data.points {
            return Err(WsfError::PointSetMismatch.into());
        }
        let system = WeightedSystem::new(kernel, &rule)?;
        let spec = match (a.param, a.ratio, a.param_l) {
            (Some(p), _, _) => FilterSpec::new(family, p),
            (None, Some(r), _) => ParameterGrid::relative(family, system.kappa(), &[r]).map(|g| g.specs()[0]),
            (None, None, Some(l)) => Ok(FilterSpec::landweber(l)),
            _ => unreachable!(),
        }
        .map_err(|e| Failure::Usage(e.to_string()))?;
        let model = system.fit(&data.values, &spec)?;
        let mut s = format!(
            "{} on {} points, quadrature degree {}, κ = {:.4e}",
            spec.label(),
            data.len(),
            rule.degree_s,
            system.kappa()
        );
        if let Some(d) = model.diagnostics {
            let _ = write!(s, ", filtered condition number {:.4e}", d.cnkm);
        }
        (model.coefficients.clone(), model, s)
    } else {
        let model = InterpolationSystem::new(kernel, data.points.clone())?.fit(&data.values)?;
        let mut s = format!("kernel interpolation on {} points", data.len());
        if let Some(d) = model.diagnostics {
            let _ = write!(s, ", condition number {:.4e}", d.cnkm);
        }
        if model.ill_conditioned {
            s.push_str(" (ill-conditioned)");
        }
        (model.coefficients.clone(), model, s)
    };
    println!("{summary}");
    if let Some(p) = &a.model_out {
        write_model(p, &model_text)?;
    }
    if let Some((points, truth)) = eval {
        let pred = EvaluationPlan::new(&kernel, &data.points, &points).apply(&coefficients);
        match &truth {
            Some(t) => println!(
                "test rmse {:.6e}, sup error {:.6e}",
                experiments::rmse(&pred, t)?,
                experiments::sup_err(&pred, t)?
            ),
            None => println!("predicted {} points", points.len()),
        }
        if let Some(out) = &a.out {
            let text = match &truth {
                Some(t) => dump_to_csv(&points, t, &pred)?,
                None => {
                    let mut s = String::from("x,y,z,prediction\n");
                    for (p, v) in points.iter().zip(&pred) {
                        let _ = writeln!(s, "{:e},{:e},{:e},{:e}", p[0], p[1], p[2], v);
                    }
                    s
                }
            };
            write_text(out, &text)?;
        }
    }
    Ok(())
}

fn cv(a: CvArgs) -> Outcome {
    let kernel = kernel_spec(&a.kernel, None)?;
    let family = parse_flag::<FilterFamily>(&a.filter)?;
    let explicit: Option<Vec<f64>> = if a.grid == "auto" {
        None
    } else {
        let v = a
            .grid
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| Failure::Usage(format!("bad --grid {:?}", a.grid)))?;
        Some(v)
    };
    let data = labeled(&a.points)?;
    let (train, val) = match (&a.val_points, a.split) {
        (Some(v), None) => (data, labeled(v)?),
        (None, Some(f)) => split_data(&data, f, a.seed).map_err(|e| Failure::Usage(e.to_string()))?,
        (None, None) => return usage("give --val-points or --split"),
        (Some(_), Some(_)) => unreachable!(),
    };
    let train_rule = quadrature_for(&train.points, None)?;
    let val_rule: QuadratureRule = quadrature_for(&val.points, None)?;
    let system = WeightedSystem::new(kernel, &train_rule)?;
    let grid = match explicit {
        Some(v) => ParameterGrid::new(family, v),
        None => ParameterGrid::harmonic(family, train.len(), system.kappa()),
    }
    .map_err(|e| Failure::Usage(e.to_string()))?;
    let res = select_with_system(&system, &train.values, &val, &val_rule, &kernel, &grid)?;
    println!(
        "{} chosen {:e} (candidate {} of {}), train {} / validation {}, quadrature degrees {} / {}",
        family,
        res.chosen_lambda,
        res.chosen_index + 1,
        res.candidates.len(),
        res.train_size,
        res.val_size,
        train_rule.degree_s,
        val_rule.degree_s
    );
    if let Some(out) = &a.out {
        let mut s = String::from("param,weighted_score,chosen\n");
        for (i, (c, sc)) in res.candidates.iter().zip(&res.weighted_scores).enumerate() {
            let _ = writeln!(s, "{c:e},{sc:e},{}", u8::from(i == res.chosen_index));
        }
        write_text(out, &s)?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs, f: FileConfig) -> Outcome {
    let Some(scenario) = a.scenario.clone().or(f.scenario.clone()) else {
        return usage("--scenario is required");
    };
    let scenario: Scenario = parse_flag(&scenario)?;
    let sampler = a
        .sampler
        .clone()
        .or(f.sampler.clone())
        .map(|s| parse_flag::<Sampler>(&s))
        .transpose()?;
    let design_dir = a
        .design_dir
        .clone()
        .or(f.design_dir.clone())
        .unwrap_or_else(|| data_dir().join("designs"));
    let mut cfg = ScenarioConfig::new(scenario, sampler, design_dir);
    if let Some(v) = a.sizes.clone().or(f.sizes.clone().map(|v| v.into_vec())) {
        cfg.sizes = v;
    }
    if let Some(v) = a.deltas.clone().or(f.delta.clone().map(|v| v.into_vec())) {
        cfg.deltas = v;
    }
    if let Some(v) = families(a.families.clone().or(f.families.clone().map(|v| v.into_vec())))? {
        cfg.families = v;
    }
    cfg.include_ki = !(a.no_ki || f.no_ki.unwrap_or(false));
    cfg.trials = a.trials.or(f.trials).unwrap_or(cfg.trials);
    cfg.seed = a.seed.or(f.seed).unwrap_or(cfg.seed);
    cfg.test_size = a.test_size.or(f.test_size).unwrap_or(cfg.test_size);
    cfg.validation_t = a.validation_t.or(f.validation_t).unwrap_or(cfg.validation_t);
    cfg.truncation = a.truncation.or(f.truncation).unwrap_or(cfg.truncation);
    cfg.quad_degree = a.quad_degree.or(f.quad_degree);
    cfg.kernel = kernel_spec(&a.kernel, Some(&f))?;
    cfg.timing = a.timing || f.timing.unwrap_or(false);
    cfg.dump_dir = a.dump_dir.clone().or(f.dump_dir.clone());
    let out = a.out.clone().or(f.out.clone());
    if cfg.sizes.is_empty() || cfg.deltas.is_empty() || cfg.trials == 0 {
        return usage("sizes, noise levels and trials must be nonempty");
    }
    if scenario == Scenario::Sim6 && cfg.dump_dir.is_none() {
        if let Some(o) = &out {
            cfg.dump_dir = Some(o.parent().map(Path::to_path_buf).unwrap_or_default().join("sim6_dumps"));
        }
    }

    let result = run_scenario(&cfg)?;
    for (size, reason) in &result.skipped {
        eprintln!("skipped size {size}: {reason}");
    }
    print_means(&result.records);
    if !result.dumps.is_empty() {
        println!("wrote {} prediction dumps", result.dumps.len());
    }
    match out {
        Some(p) => write_records(&p, &result.records)?,
        None => print!("{}", result.csv()),
    }
    Ok(())
}

fn print_means(records: &[experiments::ExperimentRecord]) {
    let means: Vec<_> = records.iter().filter(|r| r.is_mean()).collect();
    let shown = if means.is_empty() {
        records.iter().collect()
    } else {
        means
    };
    for r in shown.iter().take(60) {
        println!(
            "{:<9} n={:<5} δ={:<5} {:<18} rmse {}",
            r.sampler,
            r.n_train,
            r.delta,
            r.method,
            r.rmse.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into()),
        );
    }
    if shown.len() > 60 {
        println!("… {} more rows", shown.len() - 60);
    }
}

fn real(a: RealArgs, f: FileConfig) -> Outcome {
    let (Some(train), Some(test)) = (a.train.clone().or(f.train.clone()), a.test.clone().or(f.test.clone())) else {
        return usage("--train and --test are required");
    };
    let column = a
        .value_column
        .clone()
        .or(f.value_column.clone())
        .unwrap_or_else(|| "value".into());
    let mut cfg = RealDataConfig::default();
    cfg.delta = a
        .delta
        .or(f.delta.clone().and_then(|d| d.into_vec().first().copied()))
        .unwrap_or(cfg.delta);
    cfg.truncation = a.truncation.or(f.truncation);
    cfg.clamp_nonnegative = a.clamp_zero || f.clamp_zero.unwrap_or(false);
    cfg.folds = a.folds.or(f.folds).unwrap_or(cfg.folds);
    cfg.trials = a.trials.or(f.trials).unwrap_or(cfg.trials);
    cfg.seed = a.seed.or(f.seed).unwrap_or(cfg.seed);
    if let Some(v) = families(a.families.clone().or(f.families.clone().map(|v| v.into_vec())))? {
        cfg.families = v;
    }
    cfg.include_ki = !(a.no_ki || f.no_ki.unwrap_or(false));
    cfg.kernel = kernel_spec(&a.kernel, Some(&f))?;
    cfg.quad_degree = a.quad_degree.or(f.quad_degree);
    cfg.timing = a.timing || f.timing.unwrap_or(false);
    cfg.dump_dir = a.dump_dir.clone().or(f.dump_dir.clone());
    if cfg.delta < 0.0 || cfg.trials == 0 || cfg.folds < 2 {
        return usage("need δ ≥ 0, at least one trial and at least two folds");
    }
    let val_path = a.val.clone().or(f.val.clone());

    let train = ingest_latlon_csv(&train, &column)?;
    let test = ingest_latlon_csv(&test, &column)?;
    let val = val_path.map(|p| ingest_latlon_csv(&p, &column)).transpose()?;
    let result = run_real_data(&train, &test, val.as_ref(), &cfg)?;
    print_means(&result.records);
    match a.out.clone().or(f.out.clone()) {
        Some(p) => write_records(&p, &result.records)?,
        None => print!("{}", result.csv()),
    }
    Ok(())
}

fn diagnose(a: DiagnoseArgs) -> Outcome {
    let kernel = kernel_spec(&a.kernel, None)?;
    let degree = parse_degree(&a.degree)?;
    let filter = match (&a.filter, a.ratio) {
        (Some(f), Some(r)) => Some((parse_flag::<FilterFamily>(f)?, r)),
        _ => None,
    };
    let (points, _) = eval_points(&a.points)?;
    let stats = points.stats(100)?;
    println!("points            {}", points.len());
    println!("mesh norm         {:.6e}", stats.mesh_norm);
    println!("separation radius {:.6e}", stats.separation_radius);
    println!("mesh ratio        {:.6e}", stats.mesh_ratio);
    let interp = InterpolationSystem::new(kernel, points.clone())?;
    match interp.conditioning()? {
        Some(c) => println!(
            "cond(Φ)           {:.6e}  (σ_min {:.3e}, σ_max {:.3e})",
            c.cnkm, c.sigma_min, c.sigma_max
        ),
        None => println!(
            "cond(Φ)           skipped (more than {} points)",
            sphere_wsf::estimator::DIAGNOSTICS_LIMIT
        ),
    }
    let rule = quadrature_for(&points, degree)?;
    println!(
        "quadrature degree {} ({} clamped weights)",
        rule.degree_s, rule.clamped_count
    );
    let system = WeightedSystem::new(kernel, &rule)?;
    println!("κ                 {:.6e}", system.kappa());
    if let Some(c) = system.conditioning(None)? {
        println!("cond(Ψ)           {:.6e}", c.cnkm);
    }
    if let Some((family, r)) = filter {
        let spec = ParameterGrid::relative(family, system.kappa(), &[r])
            .map_err(|e| Failure::Usage(e.to_string()))?
            .specs()[0];
        if let Some(c) = system.conditioning(Some(&spec))? {
            println!("{:<17} {:.6e}", format!("cond({})", spec.label()), c.cnkm);
        }
    }
    Ok(())
}

fn quadrature(a: QuadratureArgs) -> Outcome {
    let degree = parse_degree(&a.degree)?;
    let (points, _) = eval_points(&a.points)?;
    let rule = quadrature_for(&points, degree)?;
    write_rule(&a.out, &rule)?;
    println!(
        "degree {} rule on {} points, {} clamped weights, min weight {:.3e}",
        rule.degree_s,
        rule.len(),
        rule.clamped_count,
        rule.weights.iter().copied().fold(f64::INFINITY, f64::min)
    );
    Ok(())
}

fn design(a: DesignArgs) -> Outcome {
    if a.t == 0 {
        return usage("--t must be positive");
    }
    let (set, note) = if let Some(orbits) = a.orbits {
        let g = octahedral_rotations();
        let set = orbit_design(&g, a.t, orbits, 50, a.seed)?;
        (
            set,
            format!("spherical {}-design from {} octahedral orbits", a.t, orbits),
        )
    } else {
        let equations: usize = (2..=a.t).step_by(2).map(|k| 2 * k + 1).sum();
        let mut n = a.points.unwrap_or(equations + 3);
        n += n % 2;
        let mut last = None;
        let mut found = None;
        for _ in 0..if a.points.is_some() { 1 } else { 6 } {
            match symmetric_design(a.t, n, 400) {
                Ok(s) => {
                    found = Some(s);
                    break;
                }
                Err(e) => {
                    eprintln!("{n} points: {e}");
                    last = Some(e);
                    n += 2;
                }
            }
        }
        match found {
            Some(s) => (s, format!("symmetric spherical {}-design", a.t)),
            None => return Err(last.expect("at least one attempt").into()),
        }
    };
    let note = format!("{note}, {} points", set.len());
    write_points(&a.out, &set, Some(&note))?;
    println!("{note}");
    Ok(())
}
