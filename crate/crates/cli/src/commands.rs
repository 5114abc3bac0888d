use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};
use pmf_core::assignment::Permutation;
use pmf_core::density::{KernelParams, MatchSet, DEFAULT_SIGMA_SQ_REL};
use pmf_core::evaluation::{color_transfer_export, default_thresholds, error_curve, geodesic_errors, summarize};
use pmf_core::geometry::shape_diameter;
use pmf_core::metric::{write_explicit, MetricSpace};
use pmf_core::pmf::{pmf_multiscale, pmf_single_scale, PmfConfig, SolverChoice, WidenPolicy};
use pmf_core::sampling::{default_schedule, farthest_point_sampling, SamplingHierarchy};
use serde_json::json;

use crate::manifest::{write_file, RunManifest};
use crate::spaces::{index_map_text, load_mesh_only, load_space};
use crate::{usage, Failure, Stage};

/// Sample count up to which `resample` also writes the full distance matrix.
const EXPLICIT_LIMIT: usize = 2000;

/// FPS samples used to estimate a shape's diameter.
const DIAMETER_SAMPLES: usize = 100;

fn parse_sizes(text: &str, stage: &'static str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| usage(stage, format!("bad level size {t:?} in {text:?}")))
        })
        .collect()
}

fn check_schedule(sizes: &[usize], n: usize, stage: &'static str) -> Result<(), Failure> {
    if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage(stage, format!("level sizes {sizes:?} must be positive and strictly increasing")));
    }
    if sizes[sizes.len() - 1] > n {
        return Err(usage(stage, format!("level size {} exceeds the {n} points available", sizes[sizes.len() - 1])));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct FpsArgs {
    /// Mesh (.off/.ply), distance matrix file, circle:N[:C] or subset:<index-file>:<space>.
    #[arg(long)]
    space: String,
    /// Comma-separated increasing level sizes; defaults to 1000,2000,...,16000 clipped to n, then n.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: usize,
    #[arg(long)]
    out: PathBuf,
}

pub fn fps(a: FpsArgs) -> Result<(), Failure> {
    let space = load_space(&a.space, "load")?.space;
    let sizes = match &a.sizes {
        Some(s) => parse_sizes(s, "fps")?,
        None => default_schedule(space.len()),
    };
    check_schedule(&sizes, space.len(), "fps")?;
    if a.seed >= space.len() {
        return Err(usage("fps", format!("seed {} is out of range for {} points", a.seed, space.len())));
    }
    let h = farthest_point_sampling(&space, &sizes, a.seed).stage("fps")?;
    write_file(&a.out, &h.to_text())?;
    println!(
        "{} levels {:?}, covering radii {:?}",
        h.levels().len(),
        h.sizes(),
        h.levels().iter().map(|l| l.radius).collect::<Vec<_>>()
    );
    Ok(())
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverArg {
    Auction,
    Exact,
}

#[derive(Args, Debug)]
pub struct MatchArgs {
    /// Source shape.
    #[arg(long)]
    x: String,
    /// Target shape.
    #[arg(long)]
    y: String,
    /// Input matches, one `xi eta [weight]` per line.
    #[arg(long)]
    matches: PathBuf,
    /// Kernel width σ² as a fraction of the target's area.
    #[arg(long, default_value_t = DEFAULT_SIGMA_SQ_REL)]
    sigma_rel: f64,
    /// Iteration cap of the single-scale filter (and of level 1 when multiscale).
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// Keep iterating after the map stops changing.
    #[arg(long)]
    no_fixed_point_stop: bool,
    #[arg(long, value_enum, default_value_t = SolverArg::Auction)]
    solver: SolverArg,
    /// Coarse-to-fine matching over farthest-point samples.
    #[arg(long)]
    multiscale: bool,
    /// Level sizes for --multiscale; the default schedule otherwise.
    #[arg(long)]
    schedule: Option<String>,
    /// FPS seed on X; defaults to the source of the first match.
    #[arg(long)]
    seed: Option<usize>,
    /// FPS seed on Y; defaults to the target of the first match.
    #[arg(long)]
    seed_y: Option<usize>,
    /// Assignment solves per multiscale level.
    #[arg(long, default_value_t = 1)]
    level_iters: usize,
    /// Growth of the vicinity factor when a level is infeasible; 0 fails instead.
    #[arg(long, default_value_t = 1.5)]
    widen_step: f64,
    /// Output prefix; writes <prefix>.perm.txt and <prefix>.manifest.json.
    #[arg(long)]
    out_prefix: PathBuf,
}

fn with_suffix(prefix: &std::path::Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Moves every match onto the nearest coarsest-level sample on each side.
/// Returns the snapped set and how many pairs changed.
fn snap_to_level(
    matches: &MatchSet,
    x: &MetricSpace,
    y: &MetricSpace,
    lx: &[usize],
    ly: &[usize],
) -> pmf_core::Result<(MatchSet, usize)> {
    let nearest = |space: &MetricSpace, samples: &[usize], v: usize| -> pmf_core::Result<usize> {
        if samples.contains(&v) {
            return Ok(v);
        }
        let col = space.distance_column_uncached(v)?;
        Ok(*samples
            .iter()
            .min_by(|&&a, &&b| col[a].total_cmp(&col[b]).then(a.cmp(&b)))
            .expect("non-empty level"))
    };
    let mut pairs = Vec::with_capacity(matches.len());
    let mut moved = 0;
    for &(a, b) in matches.pairs() {
        let p = (nearest(x, lx, a)?, nearest(y, ly, b)?);
        moved += (p != (a, b)) as usize;
        pairs.push(p);
    }
    let snapped = match matches.weights() {
        Some(w) => MatchSet::with_weights(pairs, w.to_vec())?,
        None => MatchSet::new(pairs)?,
    };
    Ok((snapped, moved))
}

pub fn run_match(a: MatchArgs, threads: Option<usize>) -> Result<(), Failure> {
    let mut manifest = RunManifest::new("match");
    manifest.inputs.insert("x", a.x.clone());
    manifest.inputs.insert("y", a.y.clone());
    manifest.inputs.insert("matches", a.matches.display().to_string());

    let (x, y) = manifest.time("load", || -> Result<_, Failure> {
        Ok((load_space(&a.x, "load-x")?.space, load_space(&a.y, "load-y")?.space))
    })?;
    let matches = MatchSet::load(&a.matches).stage("load-matches")?;
    matches.validate(x.len(), y.len()).stage("load-matches")?;
    if x.len() != y.len() {
        return Err(Failure {
            stage: "validate",
            error: pmf_core::Error::Validation(format!(
                "X has {} points and Y has {}; run `pmf resample` on the larger shape so both have the same count",
                x.len(),
                y.len()
            )),
        });
    }
    if !(a.sigma_rel > 0.0) {
        return Err(usage("config", format!("--sigma-rel must be positive, got {}", a.sigma_rel)));
    }
    let kernel = KernelParams::resolve(a.sigma_rel, &y).stage("config")?;
    let mut cfg = PmfConfig::new(kernel);
    cfg.max_iters = a.iters;
    cfg.stop_on_fixed_point = !a.no_fixed_point_stop;
    cfg.level_iters = a.level_iters;
    cfg.solver = match a.solver {
        SolverArg::Auction => SolverChoice::Auction { config: None },
        SolverArg::Exact => SolverChoice::Exact,
    };
    cfg.validate().stage("config")?;
    let widen = if a.widen_step == 0.0 {
        WidenPolicy::Fail
    } else {
        WidenPolicy::Widen { step: a.widen_step }
    };

    let n = x.len();
    let mut config = json!({
        "sigma_sq_rel": a.sigma_rel,
        "sigma_sq": kernel.sigma_sq(),
        "max_iters": cfg.max_iters,
        "stop_on_fixed_point": cfg.stop_on_fixed_point,
        "solver": cfg.solver,
        "multiscale": a.multiscale,
        "threads": threads,
        "match_count": matches.len(),
    });

    let result = if a.multiscale {
        let sizes = match &a.schedule {
            Some(s) => parse_sizes(s, "config")?,
            None => default_schedule(n),
        };
        check_schedule(&sizes, n, "config")?;
        if sizes[sizes.len() - 1] != n {
            return Err(usage("config", format!("the last level must cover all {n} points")));
        }
        let seed_x = a.seed.unwrap_or(matches.pairs()[0].0);
        let seed_y = a.seed_y.unwrap_or(matches.pairs()[0].1);
        if seed_x >= n || seed_y >= n {
            return Err(usage("config", "FPS seed out of range"));
        }
        let (hx, hy) = manifest.time("fps", || -> Result<(SamplingHierarchy, SamplingHierarchy), Failure> {
            Ok((
                farthest_point_sampling(&x, &sizes, seed_x).stage("fps")?,
                farthest_point_sampling(&y, &sizes, seed_y).stage("fps")?,
            ))
        })?;
        let (init, moved) = snap_to_level(&matches, &x, &y, &hx.levels()[0].indices, &hy.levels()[0].indices)
            .stage("snap-matches")?;
        config["schedule"] = json!(sizes);
        config["fps_seeds"] = json!([seed_x, seed_y]);
        config["level_iters"] = json!(cfg.level_iters);
        config["widen"] = json!(widen);
        config["matches_snapped_to_coarsest_level"] = json!(moved);
        manifest.time("pmf", || pmf_multiscale(&x, &y, &hx, &hy, &init, &cfg, widen)).stage("pmf-multiscale")?
    } else {
        manifest.time("pmf", || pmf_single_scale(&x, &y, &matches, &cfg)).stage("pmf")?
    };
    manifest.config = config;
    manifest.result = serde_json::to_value(&result).expect("result serializes");

    let perm_path = with_suffix(&a.out_prefix, ".perm.txt");
    result.permutation.save(&perm_path).stage("write")?;
    manifest.outputs.push(perm_path.display().to_string());
    manifest.write(&with_suffix(&a.out_prefix, ".manifest.json"))?;
    println!(
        "{} iterations, objective {}, wrote {}",
        result.iterations_run,
        result.objective_trace.last().copied().unwrap_or(0.0),
        perm_path.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Map to evaluate, one `i p_i` per line.
    #[arg(long)]
    perm: PathBuf,
    /// Ground-truth map in the same format.
    #[arg(long)]
    truth: PathBuf,
    /// Target shape the errors are measured on.
    #[arg(long)]
    y: String,
    /// Normalizing diameter; estimated by farthest-point sampling if omitted.
    #[arg(long)]
    diameter: Option<f64>,
    /// Error curve output (threshold,fraction).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn percent(f: f64) -> String {
    let p = 100.0 * f;
    if p.fract() == 0.0 {
        format!("{p}%")
    } else {
        format!("{p:.2}%")
    }
}

pub fn eval(a: EvalArgs) -> Result<(), Failure> {
    let perm = Permutation::load(&a.perm).stage("load-perm")?;
    let truth = Permutation::load(&a.truth).stage("load-truth")?;
    let y = load_space(&a.y, "load-y")?.space;
    if perm.len() != truth.len() || perm.len() != y.len() {
        return Err(Failure {
            stage: "validate",
            error: pmf_core::Error::Validation(format!(
                "map has {} entries, ground truth {}, target shape {} points",
                perm.len(),
                truth.len(),
                y.len()
            )),
        });
    }
    let diameter = match a.diameter {
        Some(d) => d,
        None => shape_diameter(&y, DIAMETER_SAMPLES.min(y.len()).max(2)).stage("diameter")?,
    };
    let errors = geodesic_errors(perm.forward(), truth.forward(), &y, diameter).stage("errors")?;
    let curve = error_curve(&errors, &default_thresholds()).stage("errors")?;
    if let Some(out) = &a.out {
        write_file(out, &curve.to_csv())?;
    }
    let (mean, _) = summarize(&errors);
    let within = errors.iter().filter(|&&e| e <= 0.05).count() as f64 / errors.len() as f64;
    println!("mean {mean:?}, ≤0.05: {}", percent(within));
    Ok(())
}

#[derive(Args, Debug)]
pub struct ResampleArgs {
    #[arg(long)]
    space: String,
    /// Number of points to keep.
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: usize,
    /// Writes <prefix>.index.txt, <prefix>.json and, for small counts, <prefix>.dist.
    #[arg(long)]
    out_prefix: PathBuf,
}

pub fn resample(a: ResampleArgs) -> Result<(), Failure> {
    let space = load_space(&a.space, "load")?.space;
    let n = space.len();
    if a.count == 0 || a.count > n {
        return Err(usage("resample", format!("count must be in 1..={n}, got {}", a.count)));
    }
    if a.seed >= n {
        return Err(usage("resample", format!("seed {} is out of range for {n} points", a.seed)));
    }
    let h = farthest_point_sampling(&space, &[a.count], a.seed).stage("fps")?;
    let level = &h.levels()[0];
    let mut indices = level.indices.clone();
    // keep original order so that count == n is the identity
    indices.sort_unstable();
    let index_path = with_suffix(&a.out_prefix, ".index.txt");
    write_file(&index_path, &index_map_text(&indices))?;
    let mut outputs = vec![index_path.display().to_string()];
    if a.count <= EXPLICIT_LIMIT {
        let sub = MetricSpace::subset(Arc::clone(&space), indices.clone()).stage("resample")?;
        let data = sub.full_distance_matrix().stage("resample")?;
        let dist_path = with_suffix(&a.out_prefix, ".dist");
        write_explicit(&dist_path, a.count, &data).stage("write")?;
        outputs.push(dist_path.display().to_string());
    }
    let info_path = with_suffix(&a.out_prefix, ".json");
    outputs.push(info_path.display().to_string());
    let info = json!({
        "source": a.space,
        "source_points": n,
        "count": a.count,
        "seed": a.seed,
        "covering_radius": level.radius,
        "subset_spec": format!("subset:{}:{}", index_path.display(), a.space),
        "outputs": outputs,
    });
    write_file(&info_path, &serde_json::to_string_pretty(&info).expect("serializes"))?;
    println!("{} of {n} points, covering radius {}", a.count, level.radius);
    Ok(())
}

#[derive(Args, Debug)]
pub struct TransferArgs {
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    #[arg(long)]
    perm: PathBuf,
    /// Colored PLY of Y.
    #[arg(long)]
    out: PathBuf,
}

pub fn transfer(a: TransferArgs) -> Result<(), Failure> {
    let mx = load_mesh_only(&a.x, "load-x")?;
    let my = load_mesh_only(&a.y, "load-y")?;
    let perm = Permutation::load(&a.perm).stage("load-perm")?;
    color_transfer_export(&mx, &my, &perm, &a.out).stage("transfer")?;
    Ok(())
}
