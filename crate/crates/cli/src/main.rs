use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use ish_core::eval::{
    auc_table_csv, auc_vs_k_csv, ordered_slice_curve, roc_csv, slice_curve_csv, AucRow, Experiment,
    Metric,
};
use ish_core::hashfile::{HashRecord, FORMAT_VERSION};
use ish_core::image::{decode_image, GrayImage};
use ish_core::spectral::effective_k;
use ish_core::transform::VariantMode;
use ish_core::{analyze, detect_adaptive, Error, HashParams};

#[derive(Parser)]
#[command(name = "ish", about = "Invariant spectral image hashing")]
struct Cli {
    /// Parameter file with one key=value per line; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct ParamArgs {
    /// First-round detection scale in pixels.
    #[arg(long)]
    sigma0: Option<f64>,
    /// Final detection scale relative to the first-round diameter.
    #[arg(long)]
    rho: Option<f64>,
    /// Harris sensitivity.
    #[arg(long)]
    kappa: Option<f64>,
    /// Graph radius relative to the corner-set diameter.
    #[arg(long)]
    r: Option<f64>,
    /// Maximum number of corners kept.
    #[arg(long)]
    max_corners: Option<usize>,
    /// Number of eigenvalues compared by the spectral distances.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Detect salient corners and write them as CSV.
    Detect {
        image: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Compute the spectral hash of an image.
    Hash {
        image: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write the binary encoding instead of text.
        #[arg(long)]
        binary: bool,
        /// Also write the saliency graph as an edge-list CSV.
        #[arg(long, value_name = "FILE")]
        graph: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Print the distance between two hash files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "sp")]
        metric: Metric,
        /// Number of eigenvalues compared; defaults to the configured k.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run the ROC/AUC protocol on a directory of images.
    Eval {
        corpus: PathBuf,
        out_dir: PathBuf,
        #[arg(long, default_value = "mixed")]
        mode: VariantMode,
        #[arg(long, default_value_t = 9)]
        variants: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        jobs: Option<usize>,
        /// Database label written to the AUC table; the corpus directory name by default.
        #[arg(long)]
        database: Option<String>,
        /// Comma-separated k values for the AUC sweep; `all` means the full hash.
        #[arg(long, value_delimiter = ',', default_value = "2,5,10,20,all")]
        k_values: Vec<KValue>,
        /// Directory of ordered frames for the slice-distance curve.
        #[arg(long, value_name = "DIR")]
        slices: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        max_offset: usize,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Write a synthetic corpus or morph sequence as PGM files.
    Synth {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 320)]
        size: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write a morph sequence of `count` frames instead of distinct contents.
        #[arg(long)]
        morph: bool,
        /// Fraction by which the morph shrinks the scene's chains.
        #[arg(long, default_value_t = 0.08)]
        shrink: f64,
    },
}

#[derive(Clone, Copy)]
struct KValue(Option<usize>);

impl fmt::Display for KValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(k) => write!(f, "{k}"),
            None => f.write_str("all"),
        }
    }
}

impl std::str::FromStr for KValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(KValue(None));
        }
        s.parse()
            .map(|k| KValue(Some(k)))
            .map_err(|_| format!("expected a count or `all`, got `{s}`"))
    }
}

/// Exit status and message of a failed command.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(message: impl fmt::Display) -> Self {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_no_corners() {
            2
        } else if matches!(e.root(), Error::Format(_) | Error::VersionMismatch { .. }) {
            3
        } else {
            1
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn params_for(config: Option<&Path>, args: &ParamArgs) -> Result<HashParams, Failure> {
    let mut p = HashParams::default();
    if let Some(path) = config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        p = p.merge_config(&text)?;
    }
    p.sigma0 = args.sigma0.unwrap_or(p.sigma0);
    p.rho = args.rho.unwrap_or(p.rho);
    p.kappa = args.kappa.unwrap_or(p.kappa);
    p.r = args.r.unwrap_or(p.r);
    p.max_corners = args.max_corners.unwrap_or(p.max_corners);
    p.k = args.k.unwrap_or(p.k);
    p.validate()?;
    Ok(p)
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<(Vec<u8>, GrayImage), Failure> {
    let bytes = read(path)?;
    let img = decode_image(&bytes, path)?;
    Ok((bytes, img))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> CmdResult {
    let fail = |e: &dyn fmt::Display| Failure::io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    tmp.write_all(bytes).map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    Ok(())
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match output {
        Some(path) => write_atomic(path, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::io(format!("stdout: {e}"))),
    }
}

fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))
}

fn cmd_detect(image: &Path, output: Option<&Path>, params: &HashParams) -> CmdResult {
    let (_, img) = load(image)?;
    let corners = detect_adaptive(&img, params)?;
    emit(output, corners.to_csv().as_bytes())
}

fn cmd_hash(
    image: &Path,
    output: Option<&Path>,
    binary: bool,
    graph: Option<&Path>,
    params: &HashParams,
) -> CmdResult {
    let (bytes, img) = load(image)?;
    let analysis = analyze(&img, params)?;
    if let Some(path) = graph {
        write_atomic(path, analysis.graph.to_edge_csv().as_bytes())?;
    }
    let record = HashRecord::new(analysis.spectral, analysis.ordered, &bytes);
    let encoded = if binary {
        record.to_binary()
    } else {
        record.to_text().into_bytes()
    };
    emit(output, &encoded)
}

fn cmd_compare(a: &Path, b: &Path, metric: Metric, k: usize) -> CmdResult {
    let ra = HashRecord::parse(&read(a)?)?;
    let rb = HashRecord::parse(&read(b)?)?;
    let used = effective_k(&ra.hash, &rb.hash, k);
    if used < k && metric != Metric::Ord {
        log::warn!(
            "k={k} exceeds the hash lengths ({} and {}); comparing {used}",
            ra.hash.n_c(),
            rb.hash.n_c()
        );
    }
    let d = match metric {
        Metric::Ord => ish_core::distance_ord(&ra.ordered, &rb.ordered),
        Metric::Sp => ish_core::distance_sp(&ra.hash, &rb.hash, k)?,
        Metric::SpDelta => ish_core::distance_combined(&ra.hash, &rb.hash, k)?,
    };
    println!("{d}");
    Ok(())
}

/// Every regular file in `dir`, sorted by name, decoded. Unreadable files
/// are reported together.
fn load_dir(dir: &Path) -> Result<(Vec<String>, Vec<GrayImage>), Failure> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut names = Vec::new();
    let mut images = Vec::new();
    let mut bad = 0;
    for path in paths {
        match load(&path) {
            Ok((_, img)) => {
                names.push(path.file_name().unwrap().to_string_lossy().into_owned());
                images.push(img);
            }
            Err(f) => {
                log::error!("{}", f.message);
                bad += 1;
            }
        }
    }
    if bad > 0 {
        return Err(Failure::io(format!(
            "{}: {bad} unreadable file(s)",
            dir.display()
        )));
    }
    Ok((names, images))
}

struct EvalArgs<'a> {
    corpus: &'a Path,
    out_dir: &'a Path,
    mode: VariantMode,
    variants: usize,
    seed: u64,
    database: Option<&'a str>,
    k_values: &'a [KValue],
    slices: Option<&'a Path>,
    max_offset: usize,
}

fn cmd_eval(a: &EvalArgs, params: &HashParams) -> CmdResult {
    let (names, images) = load_dir(a.corpus)?;
    if images.len() < 2 {
        return Err(Failure::io(format!(
            "{}: need at least 2 images, found {}",
            a.corpus.display(),
            images.len()
        )));
    }
    create_dir(a.out_dir)?;
    let ex = Experiment::run(&images, &names, a.variants, a.mode, a.seed, params)?;
    for id in ex.excluded() {
        log::warn!("{id}: no hash, left out of the pairing");
    }

    let database = a.database.map(str::to_owned).unwrap_or_else(|| {
        a.corpus
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".into())
    });
    let mut table = Vec::new();
    for metric in Metric::ALL {
        let k = (metric != Metric::Ord).then_some(params.k);
        let report = ex.roc(metric, k)?;
        write_atomic(
            &a.out_dir.join(format!("roc_{metric}.csv")),
            roc_csv(&report).as_bytes(),
        )?;
        println!("{} {metric} {} {:.6}", a.mode, KValue(k), report.auc);
        table.push(AucRow {
            database: database.clone(),
            mode: a.mode,
            metric,
            k,
            auc: report.auc,
        });
    }
    write_atomic(
        &a.out_dir.join("auc_table.csv"),
        auc_table_csv(&table).as_bytes(),
    )?;

    let shortest = ex
        .signatures
        .iter()
        .flatten()
        .map(|s| s.spectral.n_c())
        .min()
        .unwrap_or(0);
    let ks: Vec<Option<usize>> = a
        .k_values
        .iter()
        .map(|k| k.0)
        .filter(|k| match k {
            Some(k) if *k > shortest => {
                log::warn!("k={k} exceeds the shortest hash ({shortest}); skipped in the sweep");
                false
            }
            _ => true,
        })
        .collect();
    let mut sweep = Vec::new();
    for k in ks {
        match ex.auc_vs_k(&[k]) {
            Ok(rows) => sweep.extend(rows),
            Err(Error::Harness(why)) => log::warn!("k={}: {why}; skipped in the sweep", KValue(k)),
            Err(e) => return Err(e.into()),
        }
    }
    write_atomic(
        &a.out_dir.join("auc_vs_k.csv"),
        auc_vs_k_csv(&sweep).as_bytes(),
    )?;

    if let Some(dir) = a.slices {
        let (_, frames) = load_dir(dir)?;
        let curve = ordered_slice_curve(&frames, a.max_offset, a.mode, a.variants, a.seed, params)?;
        write_atomic(
            &a.out_dir.join("slice_curve.csv"),
            slice_curve_csv(&curve).as_bytes(),
        )?;
    }
    Ok(())
}

fn cmd_synth(
    out_dir: &Path,
    count: usize,
    size: usize,
    seed: u64,
    morph: Option<f64>,
) -> CmdResult {
    if count == 0 || size < 16 {
        return Err(Failure::io("need at least one image of at least 16 px"));
    }
    create_dir(out_dir)?;
    let (prefix, images) = match morph {
        Some(shrink) => (
            "frame",
            ish_core::synth::morph_sequence(count, size, seed, shrink),
        ),
        None => ("scene", ish_core::synth::corpus(count, size, seed)),
    };
    for (i, img) in images.iter().enumerate() {
        let path = out_dir.join(format!("{prefix}_{i:03}.pgm"));
        write_atomic(&path, &ish_core::image::encode_pgm(img, 255))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Detect {
            image,
            output,
            params,
        } => cmd_detect(&image, output.as_deref(), &params_for(config, &params)?),
        Command::Hash {
            image,
            output,
            binary,
            graph,
            params,
        } => cmd_hash(
            &image,
            output.as_deref(),
            binary,
            graph.as_deref(),
            &params_for(config, &params)?,
        ),
        Command::Compare { a, b, metric, k } => {
            let params = params_for(
                config,
                &ParamArgs {
                    k,
                    ..ParamArgs::default()
                },
            )?;
            cmd_compare(&a, &b, metric, params.k)
        }
        Command::Eval {
            corpus,
            out_dir,
            mode,
            variants,
            seed,
            jobs,
            database,
            k_values,
            slices,
            max_offset,
            params,
        } => {
            let params = params_for(config, &params)?;
            let args = EvalArgs {
                corpus: &corpus,
                out_dir: &out_dir,
                mode,
                variants,
                seed,
                database: database.as_deref(),
                k_values: &k_values,
                slices: slices.as_deref(),
                max_offset,
            };
            match jobs {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(Failure::io)?
                    .install(|| cmd_eval(&args, &params)),
                None => cmd_eval(&args, &params),
            }
        }
        Command::Synth {
            out_dir,
            count,
            size,
            seed,
            morph,
            shrink,
        } => cmd_synth(&out_dir, count, size, seed, morph.then_some(shrink)),
    }
}

fn main() -> ExitCode {
    let version = format!(
        "{} (format_version={FORMAT_VERSION})",
        env!("CARGO_PKG_VERSION")
    );
    let matches = Cli::command().version(version).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ish: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
