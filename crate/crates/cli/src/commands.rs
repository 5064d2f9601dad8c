use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use featurenull::corpus::{list_files, scan_corpus};
use featurenull::orb::{BriefPattern, PATTERN_SEED};
use featurenull::pipeline::train;
use featurenull::probmap::{
    auto_mask, default_range, interpolate, mean_log_prob, render_heatmap, score_grid,
};
use featurenull::synth::Kind;
use featurenull::{
    correlation_experiment, load_grayscale, stats, DensityModel, Error, OrbExtractor,
};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{Overrides, RunConfig};
use crate::exit::{model_failure, CliResult, Context, Failure};
use crate::{
    Cli, Command, CompareArgs, HeatmapArgs, InspectArgs, KeypointsArgs, ScanArgs, ScoreArgs,
    ScoringArgs, SynthArgs, SynthKind, TrainArgs, ValidateArgs,
};

pub fn run(cli: &Cli) -> CliResult {
    let file = cli.config.as_deref();
    match &cli.command {
        Command::Train(a) => cmd_train(a, file),
        Command::Score(a) => cmd_score(a, file),
        Command::Heatmap(a) => cmd_heatmap(a, file),
        Command::Compare(a) => cmd_compare(a, file),
        Command::ValidateReduction(a) => cmd_validate(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Scan(a) => cmd_scan(a, file),
        Command::Keypoints(a) => cmd_keypoints(a, file),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Model timestamp: `SOURCE_DATE_EPOCH` when set, otherwise 0 so that
/// repeated runs give identical files.
fn created_timestamp() -> CliResult<i64> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("SOURCE_DATE_EPOCH is not an integer: {s:?}"))),
        Err(_) => Ok(0),
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .context(format!("cannot create {}", path.display()))
}

/// A file when `path` is given, stdout otherwise.
fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_model(path: &Path) -> CliResult<DensityModel> {
    DensityModel::load(path)
        .map_err(|e| model_failure(e).context_msg(format!("cannot load model {}", path.display())))
}

fn extractor(cfg: &RunConfig) -> CliResult<OrbExtractor> {
    let params = cfg.orb();
    Ok(OrbExtractor::new(
        params,
        BriefPattern::generate(PATTERN_SEED, params.patch_radius),
    )?)
}

fn scoring_config(s: &ScoringArgs, file: Option<&Path>) -> CliResult<RunConfig> {
    RunConfig::resolve(
        file,
        &Overrides {
            stride: s.stride,
            ..Overrides::default()
        },
    )
}

fn cmd_train(a: &TrainArgs, file: Option<&Path>) -> CliResult {
    let cfg = RunConfig::resolve(file, &a.overrides)?;
    let tc = cfg.train_config(created_timestamp()?);
    let outcome = train(&a.corpus, &tc).map_err(|e| match e {
        Error::TooFewPoints { k, distinct } => Failure::usage(format!(
            "requested {k} clusters but the corpus yields only {distinct} distinct feature \
             vectors; use --clusters {distinct} or fewer, or add images"
        )),
        e => Failure::from(e).context_msg(format!("training on {}", a.corpus.display())),
    })?;

    outcome
        .model
        .save(&a.output)
        .context(format!("cannot write model {}", a.output.display()))?;
    let weights_path = a.weights_csv.clone().unwrap_or_else(|| {
        let mut p = a.output.clone().into_os_string();
        p.push(".weights.csv");
        PathBuf::from(p)
    });
    let mut w = create(&weights_path)?;
    outcome.model.write_weights_csv(&mut w)?;
    w.flush()?;
    if let Some(path) = &a.manifest {
        outcome.scan.manifest.write_jsonl(create(path)?)?;
    }
    for s in &outcome.scan.skipped {
        warn!("skipped {}: {}", s.path.display(), s.reason);
    }

    println!("images={}", outcome.scan.manifest.total_images);
    println!("skipped={}", outcome.scan.skipped.len());
    println!("features={}", outcome.extracted);
    println!("N={}", outcome.sampled);
    println!("K={}", outcome.model.k());
    println!("iterations={}", outcome.clustering.iterations);
    println!("inertia={}", outcome.clustering.inertia);
    println!("model={}", a.output.display());
    println!("weights={}", weights_path.display());
    Ok(())
}

fn cmd_score(a: &ScoreArgs, file: Option<&Path>) -> CliResult {
    let cfg = scoring_config(&a.scoring, file)?;
    let model = load_model(&a.model)?;
    let img = load_grayscale(&a.image)?;
    let mask = a.scoring.auto_mask.then(|| auto_mask(&img));
    let grid = score_grid(&model, &img, cfg.stride, mask)
        .context(format!("scoring {}", a.image.display()))?;
    let mean = mean_log_prob(&grid)
        .map_err(Failure::data)
        .context(format!("scoring {}", a.image.display()))?;
    if let Some(path) = &a.per_point {
        let mut w = create(path)?;
        grid.write_csv(&mut w)?;
        w.flush()?;
    }
    println!("mean_ln_p={mean}");
    Ok(())
}

fn cmd_heatmap(a: &HeatmapArgs, file: Option<&Path>) -> CliResult {
    let cfg = scoring_config(&a.scoring, file)?;
    let model = load_model(&a.model)?;
    let img = load_grayscale(&a.image)?;
    let mask = a.scoring.auto_mask.then(|| auto_mask(&img));
    let grid = score_grid(&model, &img, cfg.stride, mask)
        .context(format!("scoring {}", a.image.display()))?;
    if let Some(path) = &a.raw {
        grid.write_raw(path)?;
    }
    if let Some(path) = &a.csv {
        let mut w = create(path)?;
        grid.write_csv(&mut w)?;
        w.flush()?;
    }
    let dense = interpolate(&grid);
    let (lo, hi) = match a.range {
        Some(r) => r,
        None => default_range(&dense).unwrap_or_else(|| {
            warn!("no finite values in the map; rendering it black");
            (-1.0, 1.0)
        }),
    };
    let rgb = render_heatmap(&dense, lo, hi, a.overlay.then_some(&img))?;
    rgb.save(&a.output)
        .map_err(Failure::data)
        .context(format!("cannot write {}", a.output.display()))?;
    println!("range={lo}:{hi}");
    println!("heatmap={}", a.output.display());
    Ok(())
}

struct GroupScores {
    name: String,
    scores: Vec<f64>,
}

fn score_group(
    model: &DensityModel,
    dir: &Path,
    stride: usize,
    use_auto_mask: bool,
) -> CliResult<GroupScores> {
    let files = list_files(dir).map_err(Failure::from)?;
    let results: Vec<_> = files
        .par_iter()
        .map(|p| {
            let img = load_grayscale(p)?;
            let mask = use_auto_mask.then(|| auto_mask(&img));
            mean_log_prob(&score_grid(model, &img, stride, mask)?)
        })
        .collect();
    let mut scores = Vec::new();
    for (p, r) in files.iter().zip(results) {
        match r {
            Ok(v) => scores.push(v),
            Err(e) => warn!("not scored {}: {e}", p.display()),
        }
    }
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    if scores.len() < 2 {
        return Err(Failure::usage(format!(
            "group {} has {} scorable image(s), need at least 2",
            dir.display(),
            scores.len()
        )));
    }
    Ok(GroupScores { name, scores })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_compare(a: &CompareArgs, file: Option<&Path>) -> CliResult {
    if a.groups.len() < 2 {
        return Err(Failure::usage("compare needs at least 2 group directories"));
    }
    let cfg = scoring_config(&a.scoring, file)?;
    let model = load_model(&a.model)?;
    let groups = a
        .groups
        .iter()
        .map(|d| score_group(&model, d, cfg.stride, a.scoring.auto_mask))
        .collect::<CliResult<Vec<_>>>()?;

    let n = groups.len();
    let mut p = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let r = stats::welch_t_test(&groups[i].scores, &groups[j].scores).context(format!(
                "comparing {} with {}",
                groups[i].name, groups[j].name
            ))?;
            p[i][j] = r.p_value;
            p[j][i] = r.p_value;
        }
    }

    // the human summary never shares a stream with the CSV
    let mut human: Box<dyn Write> = if a.output.is_some() {
        Box::new(io::stdout().lock())
    } else {
        Box::new(io::stderr().lock())
    };
    for g in &groups {
        writeln!(
            human,
            "{}: n={} mean_ln_p={}",
            g.name,
            g.scores.len(),
            stats::mean(&g.scores)
        )?;
    }

    let mut w = sink(a.output.as_deref())?;
    write!(w, "group,n,mean")?;
    for g in &groups {
        write!(w, ",p_{}", csv_field(&g.name))?;
    }
    writeln!(w)?;
    for (i, g) in groups.iter().enumerate() {
        write!(
            w,
            "{},{},{}",
            csv_field(&g.name),
            g.scores.len(),
            stats::mean(&g.scores)
        )?;
        for v in &p[i] {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> CliResult {
    let report = correlation_experiment(a.pairs, a.dmax, a.seed)?;
    if let Some(path) = &a.csv {
        let mut w = create(path)?;
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    println!("n={}", report.n);
    println!("rho={}", report.rho);
    println!("p={}", report.p_value);
    Ok(())
}

fn cmd_inspect(a: &InspectArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let meta = model.meta();
    let params = model.extractor().params();
    println!("format_version={}", meta.version);
    println!("created={}", meta.created);
    println!("N={}", meta.n);
    println!("K={}", model.k());
    println!("dims={}", model.dims());
    println!("categories={}", model.categories());
    println!(
        "orb levels={} scale_factor={} patch_radius={} fast_threshold={}",
        params.n_levels, params.scale_factor, params.patch_radius, params.fast_threshold
    );
    println!("normalization_error={:e}", model.normalization_error());
    let mut order: Vec<usize> = (0..model.k()).collect();
    let lw = model.log_weights();
    order.sort_by(|&i, &j| lw[j].total_cmp(&lw[i]).then(i.cmp(&j)));
    for &j in order.iter().take(a.top) {
        println!("cluster {j} weight={}", lw[j].exp());
    }
    Ok(())
}

fn cmd_scan(a: &ScanArgs, file: Option<&Path>) -> CliResult {
    let cfg = RunConfig::resolve(file, &a.overrides)?;
    let ex = extractor(&cfg)?;
    let report = scan_corpus(&a.corpus, &ex, cfg.max_keypoints)?;
    for s in &report.skipped {
        warn!("skipped {}: {}", s.path.display(), s.reason);
    }
    info!(
        "{} images, {} skipped",
        report.manifest.total_images,
        report.skipped.len()
    );
    report.manifest.write_jsonl(sink(a.output.as_deref())?)?;
    Ok(())
}

fn cmd_keypoints(a: &KeypointsArgs, file: Option<&Path>) -> CliResult {
    let cfg = RunConfig::resolve(file, &a.overrides)?;
    let ex = extractor(&cfg)?;
    let img = load_grayscale(&a.image)?;
    let kps = ex.top_keypoints(&img, cfg.max_keypoints);
    let mut w = sink(a.output.as_deref())?;
    writeln!(w, "x,y,angle,response,level,descriptor")?;
    for (kp, d) in &kps {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            kp.x,
            kp.y,
            kp.angle,
            kp.response,
            kp.level,
            d.to_hex()
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> CliResult {
    if a.count == 0 || a.size < 8 {
        return Err(Failure::usage(
            "--count must be at least 1 and --size at least 8",
        ));
    }
    let kind = match a.kind {
        SynthKind::Texture => Kind::Texture,
        SynthKind::Blob => Kind::Blob,
        SynthKind::Text => Kind::Text,
    };
    std::fs::create_dir_all(&a.dir).context(format!("cannot create {}", a.dir.display()))?;
    (0..a.count).into_par_iter().try_for_each(|i| {
        let img = kind.render(a.size, a.size, a.seed.wrapping_add(i as u64));
        let path = a.dir.join(format!("{}_{i:05}.png", kind.name()));
        img.save_png(&path).map_err(Failure::from)
    })?;
    println!(
        "wrote {} {} images to {}",
        a.count,
        kind.name(),
        a.dir.display()
    );
    Ok(())
}
