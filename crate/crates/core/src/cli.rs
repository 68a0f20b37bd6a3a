//! The `lop` command line.
//!
//! Exit status is 0 on success, 1 on usage errors and 2 when the data or the
//! numerics fail. Diagnostics go to standard error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use crate::dataset::load_csv;
use crate::ensemble::{LpModel, LpOptions, Scheme};
use crate::error::{Error, Result};
use crate::evaluation::{run_experiment, ExperimentSpec, Method};
use crate::localproj::CoreMode;
use crate::tuning::{tune_k, TuneOptions};
use crate::viz::{render_matrix, render_ternary, PosteriorDump, Role, TernaryDiagram};

#[derive(Debug, Parser)]
#[command(name = "lop", version, about = "Classification by weighted local projections")]
struct Cli {
    /// Worker threads for fitting and repetitions.
    #[arg(long, global = true, env = "LOP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model with a fixed k, or tune k with --auto-k.
    Fit(FitArgs),
    /// Tune k over its admissible interval and write the per-k report.
    Tune(TuneArgs),
    /// Classify the rows of a CSV file with a saved model.
    Predict(PredictArgs),
    /// Run a resampling experiment from a TOML manifest.
    Eval(EvalArgs),
    /// Draw ternary diagrams from a posterior dump.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    /// Name of the class label column.
    #[arg(long, default_value = "class")]
    label: String,
    #[arg(long, default_value_t = CoreMode::Strict)]
    mode: CoreMode,
    /// Aggregation used for the training error when tuning.
    #[arg(long, default_value_t = Scheme::Weighted)]
    scheme: Scheme,
    /// Leave core members out of the quality weights.
    #[arg(long)]
    exclude_core: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    common: TrainArgs,
    #[arg(long, conflicts_with = "auto_k", required_unless_present = "auto_k")]
    k: Option<usize>,
    #[arg(long)]
    auto_k: bool,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    common: TrainArgs,
    #[arg(long)]
    out: PathBuf,
    /// Per-k training error CSV.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = Scheme::Weighted)]
    scheme: Scheme,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the manifest's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    mode: Option<CoreMode>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    dump_posteriors: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum RoleFilter {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    posteriors: PathBuf,
    /// Two 1-based class codes, e.g. `1,2`.
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    pair: Option<String>,
    /// Draw every pair in a lower-triangular grid.
    #[arg(long)]
    matrix: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = RoleFilter::All)]
    role: RoleFilter,
    /// Legend names by class code, comma separated.
    #[arg(long, value_delimiter = ',')]
    class_names: Option<Vec<String>>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if cli.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return 1;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit(a) => fit(a),
        Command::Tune(a) => tune(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Plot(a) => plot(a),
    }
}

fn options(a: &TrainArgs) -> TuneOptions {
    TuneOptions {
        lp: LpOptions {
            mode: a.mode,
            exclude_core_in_weights: a.exclude_core,
        },
        scheme: a.scheme,
        ..Default::default()
    }
}

fn fit(a: FitArgs) -> Result<()> {
    let train = load_csv(&a.common.train, &a.common.label)?;
    let opts = options(&a.common);
    let model = match a.k {
        Some(k) => LpModel::fit(&train, k, opts.lp)?,
        None => tune_k(&train, opts)?.0,
    };
    model.save(&a.out)?;
    eprintln!("fitted k = {} on {} rows", model.k, train.n());
    Ok(())
}

fn tune(a: TuneArgs) -> Result<()> {
    let train = load_csv(&a.common.train, &a.common.label)?;
    let (model, report) = tune_k(&train, options(&a.common))?;
    model.save(&a.out)?;
    report.write_csv(create(&a.report)?)?;
    eprintln!("selected k = {}", report.selected);
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Reads the model's feature columns by name; other columns are ignored.
fn read_features(path: &Path, names: &[String]) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = rdr.headers()?.clone();
    let cols = names
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidDataset(format!("column `{name}` missing from {}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (&j, name) in cols.iter().zip(names) {
            let cell = rec.get(j).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row: r + 1,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: r + 1,
                    column: name.clone(),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(DMatrix::from_row_slice(rows, names.len(), &values))
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = LpModel::load(&a.model)?;
    let x = read_features(&a.data, &model.feature_names)?;
    let out = model.classify_rows(&x, a.scheme)?;
    let mut w = csv::Writer::from_writer(create(&a.out)?);
    let mut header = vec!["row".to_string(), "label".to_string()];
    header.extend((1..=model.n_classes()).map(|g| format!("p_{g}")));
    w.write_record(&header)?;
    for (i, c) in out.iter().enumerate() {
        let mut rec = vec![i.to_string(), c.label.clone()];
        rec.extend(c.posterior.iter().map(|p| p.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&a.out, e))?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut spec = ExperimentSpec::load(&a.config)?;
    if let Some(dir) = a.out_dir {
        spec.output_dir = Some(dir);
    }
    if let Some(seed) = a.seed {
        spec.plan.seed = seed;
    }
    if let Some(r) = a.repetitions {
        spec.plan.repetitions = r;
    }
    if let Some(m) = a.methods {
        spec.methods = m;
    }
    if let Some(k) = a.k {
        spec.lp.k = Some(k);
    }
    if let Some(mode) = a.mode {
        spec.lp.mode = mode;
    }
    if let Some(scheme) = a.scheme {
        spec.lp.scheme = scheme;
    }
    spec.dump_posteriors |= a.dump_posteriors;
    if spec.output_dir.is_none() {
        return Err(Error::Config("no output directory; set output_dir or pass --out-dir".into()));
    }
    let out = run_experiment(&spec)?;
    for s in &out.summary {
        eprintln!(
            "{:>4}: median error {:.4}, MAD {:.4} ({} ok, {} failed)",
            s.method.to_string(),
            s.median,
            s.mad,
            s.n_ok,
            s.n_failed
        );
    }
    Ok(())
}

fn parse_pair(s: &str, g: usize) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let code = |t: &str| t.parse::<usize>().ok().filter(|&c| c >= 1 && c <= g);
    match parts.as_slice() {
        [x, y] => match (code(x), code(y)) {
            (Some(a), Some(b)) if a != b => Ok((a - 1, b - 1)),
            (Some(a), Some(b)) => Err(Error::InvalidPair(a, b)),
            _ => Err(Error::Config(format!("bad class pair `{s}` for {g} classes"))),
        },
        _ => Err(Error::Config(format!("bad class pair `{s}`"))),
    }
}

fn plot(a: PlotArgs) -> Result<()> {
    let dump = PosteriorDump::load(&a.posteriors)?;
    let g = dump.n_classes;
    let names = match a.class_names {
        Some(n) if n.len() == g => n,
        Some(n) => {
            return Err(Error::Config(format!("{} class names given for {g} classes", n.len())));
        }
        None => (1..=g).map(|c| c.to_string()).collect(),
    };
    let roles: &[Role] = match a.role {
        RoleFilter::Train => &[Role::Train],
        RoleFilter::Test => &[Role::Test],
        RoleFilter::All => &[Role::Train, Role::Test],
    };
    if a.matrix {
        return render_matrix(&dump, &names, roles, &a.out);
    }
    let (x, y) = parse_pair(a.pair.as_deref().unwrap_or_default(), g)?;
    let diagram = TernaryDiagram::from_dump(&dump, x, y, names, roles)?;
    render_ternary(&diagram, &a.out)
}
