//! End-to-end grounding under the four world-model construction modes and
//! the benchmark harness built on it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufReader;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{
    filter_observations, infer_classifiers, infer_semantics, ClassifierSelection, FilterDecision,
};
use crate::dcg::{infer, DcgModel};
use crate::grammar::Grammar;
use crate::symbols::{enumerate_grounding_space, Domain, GroundingSymbol, Symbol};
use crate::world::{
    build_world_model, read_observation_log, simulate, write_observation_log, ClassifierRegistry,
    Observation, Pose, WorldModel, WorldSpec,
};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Mode {
    /// All observations, all classifiers.
    B,
    /// Observation filtering only.
    Of,
    /// Adaptive perception only.
    Ap,
    /// Both reductions.
    OfAp,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::B, Mode::Of, Mode::Ap, Mode::OfAp];

    /// Column label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Mode::B => "B",
            Mode::Of => "OF",
            Mode::Ap => "AP",
            Mode::OfAp => "OF+AP",
        }
    }

    pub fn filters(self) -> bool {
        matches!(self, Mode::Of | Mode::OfAp)
    }

    pub fn adapts(self) -> bool {
        matches!(self, Mode::Ap | Mode::OfAp)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "b" => Ok(Mode::B),
            "of" => Ok(Mode::Of),
            "ap" => Ok(Mode::Ap),
            "of_ap" | "of+ap" | "ofap" => Ok(Mode::OfAp),
            _ => Err(Error::InvalidConfig(format!("unknown mode {s:?}"))),
        }
    }
}

/// The semantic, perception and grounding models.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub semantic: DcgModel,
    pub perception: DcgModel,
    pub grounding: DcgModel,
}

impl Models {
    pub fn untrained(regularization: f64) -> Self {
        Models {
            semantic: DcgModel::new(Domain::Semantic, regularization),
            perception: DcgModel::new(Domain::Perception, regularization),
            grounding: DcgModel::new(Domain::Grounding, regularization),
        }
    }

    const FILES: [(&'static str, Domain); 3] = [
        ("semantic.toml", Domain::Semantic),
        ("perception.toml", Domain::Perception),
        ("grounding.toml", Domain::Grounding),
    ];

    /// Reads `semantic.toml`, `perception.toml` and `grounding.toml`.
    pub fn load_dir(dir: &Path) -> Result<Self, Error> {
        let mut loaded = Vec::new();
        for (file, domain) in Self::FILES {
            let m = DcgModel::load(&dir.join(file))?;
            if m.domain != domain {
                return Err(Error::DomainMismatch {
                    expected: domain,
                    found: m.domain,
                });
            }
            loaded.push(m);
        }
        let grounding = loaded.pop().unwrap();
        let perception = loaded.pop().unwrap();
        let semantic = loaded.pop().unwrap();
        Ok(Models {
            semantic,
            perception,
            grounding,
        })
    }

    pub fn save_dir(&self, dir: &Path) -> Result<(), Error> {
        std::fs::create_dir_all(dir)?;
        self.semantic.save(&dir.join(Self::FILES[0].0))?;
        self.perception.save(&dir.join(Self::FILES[1].0))?;
        self.grounding.save(&dir.join(Self::FILES[2].0))?;
        Ok(())
    }
}

/// Recorded observations of one site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteLog {
    pub name: String,
    pub observations: Vec<Observation>,
}

impl SiteLog {
    pub fn simulate(spec: &WorldSpec, registry: &ClassifierRegistry) -> Result<Self, Error> {
        Ok(SiteLog {
            name: spec.name.clone(),
            observations: simulate(spec, registry)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let file = std::fs::File::open(path)?;
        let (name, observations) = read_observation_log(BufReader::new(file))?;
        Ok(SiteLog { name, observations })
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_observation_log(&mut out, &self.name, &self.observations)?;
        std::io::Write::flush(&mut out)?;
        Ok(())
    }

    /// Where the robot is when the instruction arrives: the pose of the last
    /// observation.
    pub fn robot_pose(&self) -> Pose {
        self.observations
            .last()
            .map(|o| o.robot_pose)
            .unwrap_or_default()
    }
}

/// The grounded action together with what it refers to. Object ids are
/// local to a world model, so results from different modes are compared by
/// [`Grounding::describe`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grounding {
    pub symbol: GroundingSymbol,
    pub class: String,
    pub color: Option<String>,
    pub pose: Pose,
}

impl Grounding {
    pub fn describe(&self) -> String {
        // Adding 0.0 turns a rounded -0.0 into 0.0.
        let r = |v: f64| (v * 100.0).round() / 100.0 + 0.0;
        format!(
            "navigate_to({}@{:.2},{:.2})",
            self.class,
            r(self.pose.x),
            r(self.pose.y)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunError {
    pub message: String,
    /// Whether the failure concerns the instruction or the world rather
    /// than the setup.
    pub domain: bool,
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError {
            message: e.to_string(),
            domain: e.is_domain_error(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub instruction: String,
    pub site: String,
    pub mode: Mode,
    pub grounding: Option<Grounding>,
    pub error: Option<RunError>,
    pub object_count: usize,
    pub cost_units: f64,
    pub wall_time_s: f64,
    pub filter_decision: Option<FilterDecision>,
    pub classifier_selection: Option<ClassifierSelection>,
}

impl RunResult {
    pub fn grounding_text(&self) -> String {
        self.grounding
            .as_ref()
            .map(Grounding::describe)
            .unwrap_or_default()
    }
}

/// Grounds one instruction on one site log. Failures are recorded in the
/// result.
pub fn run(
    instruction: &str,
    site: &SiteLog,
    models: &Models,
    registry: &ClassifierRegistry,
    mode: Mode,
) -> RunResult {
    let start = Instant::now();
    let mut result = RunResult {
        instruction: instruction.to_string(),
        site: site.name.clone(),
        mode,
        grounding: None,
        error: None,
        object_count: 0,
        cost_units: 0.0,
        wall_time_s: 0.0,
        filter_decision: None,
        classifier_selection: None,
    };
    if let Err(e) = run_into(&mut result, instruction, site, models, registry, mode) {
        result.error = Some(e.into());
    }
    result.wall_time_s = start.elapsed().as_secs_f64();
    result
}

fn run_into(
    result: &mut RunResult,
    instruction: &str,
    site: &SiteLog,
    models: &Models,
    registry: &ClassifierRegistry,
    mode: Mode,
) -> Result<(), Error> {
    let tree = Grammar::new(registry).parse_text(instruction)?;

    let observations: Vec<&Observation> = if mode.filters() {
        let labels = infer_semantics(&models.semantic, &tree)?;
        let decision = filter_observations(&site.observations, &labels);
        let kept = decision.apply(&site.observations);
        result.filter_decision = Some(decision);
        kept
    } else {
        site.observations.iter().collect()
    };

    let classifiers: BTreeSet<_> = if mode.adapts() {
        let selection = infer_classifiers(&models.perception, &tree, registry)?;
        let selected = selection.selected.clone();
        result.classifier_selection = Some(selection);
        selected
    } else {
        registry.classifiers().into_iter().collect()
    };

    let world = build_world_model(
        &observations,
        &classifiers,
        &WorldModel::default(),
        registry,
    )?
    .with_robot_pose(site.robot_pose());
    result.object_count = world.len();
    // The scene classifier runs on every frame while driving, whatever the mode.
    result.cost_units =
        registry.scene_classification_cost() * site.observations.len() as f64 + world.total_cost;

    let space = enumerate_grounding_space(&world, registry);
    let a = infer(&models.grounding, &tree, &space, Some(&world))?;
    let target = a.root_symbols(&space).into_iter().find_map(|s| match s {
        Symbol::Grounding(g @ GroundingSymbol::NavigateTo(id)) => Some((g.clone(), *id)),
        _ => None,
    });
    if let Some((symbol, id)) = target {
        let o = world
            .object(id)
            .expect("action symbols reference world objects");
        result.grounding = Some(Grounding {
            symbol,
            class: o.class.clone(),
            color: o.color.clone(),
            pose: o.pose,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub instruction: String,
    pub site: String,
}

impl BenchmarkCase {
    pub fn new(instruction: &str, site: &str) -> Self {
        BenchmarkCase {
            instruction: instruction.to_string(),
            site: site.to_string(),
        }
    }
}

/// Reads a list of `[[case]]` tables with `instruction` and `site`.
pub fn read_manifest(text: &str) -> Result<Vec<BenchmarkCase>, Error> {
    #[derive(Deserialize)]
    struct Manifest {
        #[serde(default)]
        case: Vec<BenchmarkCase>,
    }
    let m: Manifest = toml::from_str(text).map_err(|e| Error::Format {
        what: "benchmark manifest",
        message: e.to_string(),
    })?;
    Ok(m.case)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    /// Ordered by case, then by mode.
    pub results: Vec<RunResult>,
}

/// Runs every case under all four modes on up to `jobs` threads.
pub fn benchmark(
    cases: &[BenchmarkCase],
    sites: &BTreeMap<String, SiteLog>,
    models: &Models,
    registry: &ClassifierRegistry,
    jobs: usize,
) -> BenchmarkReport {
    let tasks: Vec<(&BenchmarkCase, Mode)> = cases
        .iter()
        .flat_map(|c| Mode::ALL.into_iter().map(move |m| (c, m)))
        .collect();
    let one = |(case, mode): &(&BenchmarkCase, Mode)| match sites.get(&case.site) {
        Some(site) => run(&case.instruction, site, models, registry, *mode),
        None => RunResult {
            instruction: case.instruction.clone(),
            site: case.site.clone(),
            mode: *mode,
            grounding: None,
            error: Some(RunError {
                message: format!("no observation log for site {:?}", case.site),
                domain: false,
            }),
            object_count: 0,
            cost_units: 0.0,
            wall_time_s: 0.0,
            filter_decision: None,
            classifier_selection: None,
        },
    };
    let results = match rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
    {
        Ok(pool) => pool.install(|| tasks.par_iter().map(one).collect()),
        Err(_) => tasks.iter().map(one).collect(),
    };
    BenchmarkReport { results }
}

impl BenchmarkReport {
    pub const COLUMNS: [&'static str; 8] = [
        "instruction",
        "site",
        "mode",
        "cost_units",
        "wall_time_s",
        "object_count",
        "grounding",
        "error",
    ];

    /// Delimiter-separated report. Without `wall_time` the timing column is
    /// left out, which makes the output reproducible byte for byte.
    pub fn to_csv(&self, wall_time: bool) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = Self::COLUMNS
            .iter()
            .copied()
            .filter(|c| wall_time || *c != "wall_time_s")
            .collect();
        w.write_record(&header).expect("write to memory");
        for r in &self.results {
            let mut row = vec![
                r.instruction.clone(),
                r.site.clone(),
                r.mode.label().to_string(),
                format!("{:.4}", r.cost_units),
            ];
            if wall_time {
                row.push(format!("{:.6}", r.wall_time_s));
            }
            row.push(r.object_count.to_string());
            row.push(r.grounding_text());
            row.push(
                r.error
                    .as_ref()
                    .map(|e| e.message.clone())
                    .unwrap_or_default(),
            );
            w.write_record(&row).expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }

    /// Filter decisions and classifier selections, one JSON object per run.
    pub fn audit_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            #[derive(Serialize)]
            struct Audit<'a> {
                instruction: &'a str,
                site: &'a str,
                mode: &'a str,
                filter_decision: &'a Option<FilterDecision>,
                classifier_selection: Option<Vec<String>>,
            }
            let a = Audit {
                instruction: &r.instruction,
                site: &r.site,
                mode: r.mode.label(),
                filter_decision: &r.filter_decision,
                classifier_selection: r
                    .classifier_selection
                    .as_ref()
                    .map(|s| s.selected.iter().map(|c| c.canonical()).collect()),
            };
            out.push_str(&serde_json::to_string(&a).expect("audit serializes"));
            out.push('\n');
        }
        out
    }

    /// Runs of one case, in mode order.
    pub fn rows(&self) -> Vec<Vec<&RunResult>> {
        let mut rows: Vec<Vec<&RunResult>> = Vec::new();
        for r in &self.results {
            match rows.last_mut() {
                Some(row)
                    if row[0].instruction == r.instruction
                        && row[0].site == r.site
                        && row.len() < Mode::ALL.len() =>
                {
                    row.push(r)
                }
                _ => rows.push(vec![r]),
            }
        }
        rows
    }

    /// Human-readable summary: cost units and object counts per mode, with
    /// costs relative to B.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let width = self
            .results
            .iter()
            .map(|r| r.instruction.len())
            .max()
            .unwrap_or(11)
            .max(11);
        out.push_str(&format!(
            "{:<width$}  {:<5}  {:>8} {:>8} {:>8} {:>8}  {:>6} {:>6}  {:>4} {:>4} {:>4} {:>5}  grounding\n",
            "instruction", "site", "B", "OF", "AP", "OF+AP", "OF/B", "OA/B", "#B", "#OF", "#AP", "#OFAP"
        ));
        for row in self.rows() {
            let cost = |m: Mode| row.iter().find(|r| r.mode == m).map(|r| r.cost_units);
            let count = |m: Mode| row.iter().find(|r| r.mode == m).map(|r| r.object_count);
            let c = |m: Mode| cost(m).map_or("-".to_string(), |v| format!("{v:.1}"));
            let n = |m: Mode| count(m).map_or("-".to_string(), |v| v.to_string());
            let ratio = |m: Mode| match (cost(m), cost(Mode::B)) {
                (Some(x), Some(b)) if b > 0.0 => format!("{:.3}", x / b),
                _ => "-".to_string(),
            };
            let grounding = row
                .iter()
                .find(|r| r.mode == Mode::B)
                .map(|r| match &r.error {
                    Some(e) => format!("error: {}", e.message),
                    None => r.grounding_text(),
                })
                .unwrap_or_default();
            out.push_str(&format!(
                "{:<width$}  {:<5}  {:>8} {:>8} {:>8} {:>8}  {:>6} {:>6}  {:>4} {:>4} {:>4} {:>5}  {}\n",
                row[0].instruction,
                row[0].site,
                c(Mode::B),
                c(Mode::Of),
                c(Mode::Ap),
                c(Mode::OfAp),
                ratio(Mode::Of),
                ratio(Mode::OfAp),
                n(Mode::B),
                n(Mode::Of),
                n(Mode::Ap),
                n(Mode::OfAp),
                grounding
            ));
        }
        out
    }
}
