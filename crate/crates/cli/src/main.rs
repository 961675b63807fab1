use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use langworld_core::corpus::{self, CorpusConfig, CorpusExample};
use langworld_core::dcg::DEFAULT_REGULARIZATION;
use langworld_core::pipeline::{self, Models, SiteLog};
use langworld_core::world::WorldSpec;
use langworld_core::{fixtures, ClassifierRegistry, Mode};

#[derive(Parser)]
#[command(
    name = "langworld",
    version,
    about = "Ground navigation instructions in language-guided compact world models"
)]
struct Cli {
    /// Classifier registry TOML; the built-in registry is used otherwise.
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic instruction corpus as JSON lines.
    GenerateCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Write a built-in site as a world spec, and optionally its observation log.
    GenerateWorld {
        #[arg(long, value_enum)]
        fixture: Fixture,
        /// World spec TOML.
        #[arg(long)]
        out: PathBuf,
        /// Also simulate the trajectory and write the observation log here.
        #[arg(long)]
        log_out: Option<PathBuf>,
        /// Override the simulation seed stored in the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the semantic, perception and grounding models.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REGULARIZATION)]
        regularization: f64,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Exact-match accuracy of trained models on a corpus split.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long, value_enum, default_value_t = Part::Test)]
        part: Part,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Ground one instruction on one site.
    Ground {
        #[command(flatten)]
        site: SiteArgs,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        instruction: String,
        /// b, of, ap or of_ap.
        #[arg(long, default_value = "of_ap")]
        mode: Mode,
    },
    /// Run every manifest case under all four modes.
    Benchmark {
        /// World spec TOML or observation log (.jsonl); repeat for each site.
        #[arg(long = "world", required = true)]
        worlds: Vec<PathBuf>,
        #[arg(long)]
        models: PathBuf,
        /// TOML list of [[case]] tables; the six built-in cases otherwise.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// CSV report; the summary table goes to stdout either way.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave out the wall-time column so reruns are byte-identical.
        #[arg(long)]
        no_wall_time: bool,
        /// Filter decisions and classifier selections as JSON lines.
        #[arg(long)]
        audit: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    Site1,
    Site2,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Part {
    Train,
    Test,
    All,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SiteArgs {
    /// World spec TOML; its trajectory is simulated.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Recorded observation log.
    #[arg(long)]
    log: Option<PathBuf>,
}

fn registry(path: Option<&Path>) -> anyhow::Result<ClassifierRegistry> {
    match path {
        Some(p) => ClassifierRegistry::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(ClassifierRegistry::default()),
    }
}

fn read_corpus(path: &Path) -> anyhow::Result<Vec<CorpusExample>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    corpus::read_corpus(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn load_models(dir: &Path) -> anyhow::Result<Models> {
    Models::load_dir(dir).with_context(|| format!("loading models from {}", dir.display()))
}

fn load_site(path: &Path, registry: &ClassifierRegistry) -> anyhow::Result<SiteLog> {
    let context = || format!("reading {}", path.display());
    if path.extension().is_some_and(|e| e == "jsonl") {
        SiteLog::load(path).with_context(context)
    } else {
        let spec = WorldSpec::load(path).with_context(context)?;
        SiteLog::simulate(&spec, registry).with_context(context)
    }
}

fn parts(
    corpus: &[CorpusExample],
    split: &SplitArgs,
) -> anyhow::Result<(Vec<CorpusExample>, Vec<CorpusExample>)> {
    Ok(corpus::split(corpus, split.train_fraction, split.seed)?)
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let registry = registry(cli.registry.as_deref())?;
    match cli.command {
        Command::GenerateCorpus { out, seed } => {
            let examples =
                corpus::generate(&CorpusConfig::from_registry(&registry, seed), &registry)?;
            let mut w = BufWriter::new(File::create(&out)?);
            corpus::write_corpus(&mut w, &examples)?;
            w.flush()?;
            println!("wrote {} examples to {}", examples.len(), out.display());
        }
        Command::GenerateWorld {
            fixture,
            out,
            log_out,
            seed,
        } => {
            let mut spec = match fixture {
                Fixture::Site1 => fixtures::site1(),
                Fixture::Site2 => fixtures::site2(),
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            std::fs::write(&out, spec.to_toml_string())?;
            println!(
                "wrote {} ({} objects) to {}",
                spec.name,
                spec.objects.len(),
                out.display()
            );
            if let Some(path) = log_out {
                let site = SiteLog::simulate(&spec, &registry)?;
                site.save(&path)?;
                println!(
                    "wrote {} observations to {}",
                    site.observations.len(),
                    path.display()
                );
            }
        }
        Command::Train {
            corpus,
            out_dir,
            regularization,
            split,
        } => {
            if !(regularization.is_finite() && regularization >= 0.0) {
                bail!("regularization must be a non-negative number");
            }
            let examples = read_corpus(&corpus)?;
            let (train, _) = parts(&examples, &split)?;
            let (models, reports) = corpus::train_models(&train, &registry, regularization)?;
            models.save_dir(&out_dir)?;
            for (name, r) in ["semantic", "perception", "grounding"].iter().zip(&reports) {
                println!(
                    "{name}: {} iterations, objective {:.4}, gradient norm {:.2e}{}",
                    r.iterations,
                    r.objective,
                    r.gradient_norm,
                    if r.converged {
                        ""
                    } else {
                        " (iteration limit)"
                    }
                );
            }
            println!(
                "trained on {} examples; models in {}",
                train.len(),
                out_dir.display()
            );
        }
        Command::Evaluate {
            corpus,
            models,
            part,
            split,
        } => {
            let examples = read_corpus(&corpus)?;
            let models = load_models(&models)?;
            let chosen = match part {
                Part::All => examples,
                Part::Train => parts(&examples, &split)?.0,
                Part::Test => parts(&examples, &split)?.1,
            };
            let reference = fixtures::reference_world(&registry);
            let r = corpus::evaluate(&models, &chosen, &registry, &reference)?;
            println!("examples    {}", r.examples);
            println!("semantic    {:.4}", r.semantic_rate());
            println!("perception  {:.4}", r.perception_rate());
            println!("action      {:.4}", r.action_rate());
        }
        Command::Ground {
            site,
            models,
            instruction,
            mode,
        } => {
            let path = site.world.or(site.log).expect("clap enforces one source");
            let site = load_site(&path, &registry)?;
            let models = load_models(&models)?;
            let r = pipeline::run(&instruction, &site, &models, &registry, mode);
            if let Some(e) = r.error {
                bail!(e.message);
            }
            println!("{}", r.grounding_text());
            println!(
                "mode {}: {} objects, {:.2} cost units",
                r.mode, r.object_count, r.cost_units
            );
        }
        Command::Benchmark {
            worlds,
            models,
            manifest,
            out,
            no_wall_time,
            audit,
            jobs,
        } => {
            let cases = match manifest {
                Some(p) => pipeline::read_manifest(&std::fs::read_to_string(&p)?)
                    .with_context(|| format!("reading {}", p.display()))?,
                None => pipeline::read_manifest(fixtures::DEFAULT_MANIFEST)?,
            };
            let mut sites = BTreeMap::new();
            for path in &worlds {
                let site = load_site(path, &registry)?;
                sites.insert(site.name.clone(), site);
            }
            let models = load_models(&models)?;
            let report = pipeline::benchmark(&cases, &sites, &models, &registry, jobs);
            print!("{}", report.table());
            if let Some(path) = out {
                std::fs::write(&path, report.to_csv(!no_wall_time))?;
            }
            if let Some(path) = audit {
                std::fs::write(&path, report.audit_jsonl())?;
            }
            let failed = report.results.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                bail!("{failed} of {} runs failed", report.results.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
