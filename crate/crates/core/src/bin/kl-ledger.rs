use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use kl_ledger::fusion::simple_current_fpdim_check;
use kl_ledger::lattice::{
    build_cocycle, discriminant_form, DiscriminantForm, IntegralLattice, LatticeInput, Subgroup,
    DEFAULT_GROUP_BOUND,
};
use kl_ledger::nichols::{graded_dimensions, parse_q_matrix, NicholsStatus};
use kl_ledger::qseries::{
    asymptotic_dim, false_theta_character, AsymptoticOptions, CharacterOptions, Normalization, Projection,
    WeightLabel,
};
use kl_ledger::rational::format_rational;
use kl_ledger::rootdata::build_from_label;
use kl_ledger::verifier::{kl_verify, VerifierError, VerifyOptions, DEFAULT_NICHOLS_CUTOFF, SCHEMA};

#[derive(Parser)]
#[command(name = "kl-ledger", version, about = "Nichols dimensions, FP ledgers and character asymptotics for screening lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the JSON report here
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Omit timings so reports are byte-identical across runs
    #[arg(long, global = true)]
    stable: bool,
    #[arg(long, global = true, env = "KL_LEDGER_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline for a simply-laced type and p
    KlVerify {
        type_label: String,
        p: u64,
        #[command(flatten)]
        common: PipelineFlags,
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
        #[arg(long)]
        allow_degenerate: bool,
    },
    /// Graded dimensions of a diagonal Nichols algebra
    Nichols {
        #[arg(long)]
        q_matrix: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NICHOLS_CUTOFF)]
        cutoff: usize,
    },
    /// Discriminant form computations
    Lattice {
        #[arg(value_enum)]
        action: LatticeAction,
        #[arg(long)]
        gram: PathBuf,
        /// Group order bound for isotropic enumeration
        #[arg(long, default_value_t = DEFAULT_GROUP_BOUND)]
        bound: u64,
        /// Element indices spanning the subgroup for `extend` (default: every isotropic subgroup)
        #[arg(long, value_delimiter = ',')]
        subgroup: Option<Vec<usize>>,
    },
    /// False-theta character and its cusp limit
    Character {
        type_label: String,
        p: u64,
        #[command(flatten)]
        common: PipelineFlags,
        /// lambda_bar coefficients s_i (default: vacuum)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        s: Option<Vec<i64>>,
        /// lambda_hat in fundamental coordinates
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda_hat: Option<Vec<i64>>,
        #[arg(long, value_enum, default_value_t = ProjectionArg::Singlet)]
        projection: ProjectionArg,
        #[arg(long, value_enum, default_value_t = NormalizationArg::Half)]
        normalization: NormalizationArg,
        /// Character coefficients shown above the lowest exponent
        #[arg(long, default_value_t = 10)]
        terms: u64,
    },
}

#[derive(Args)]
struct PipelineFlags {
    #[arg(long, default_value_t = DEFAULT_NICHOLS_CUTOFF)]
    cutoff: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.04,0.01,0.0025")]
    t_schedule: Vec<f64>,
    /// 1 fits c0 + c1 sqrt(t), 2 adds c2 t
    #[arg(long, default_value_t = 1)]
    model_order: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum LatticeAction {
    Disc,
    Isotropic,
    Extend,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProjectionArg {
    Full,
    Singlet,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizationArg {
    Half,
    Full,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<VerifierError> for Failure {
    fn from(e: VerifierError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn fail(code: u8, tag: &str, e: impl std::fmt::Display) -> Failure {
    Failure {
        code,
        message: format!("[{tag}] {e}"),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 64,
        message: format!("[usage] {}", msg.into()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error{}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<(), Failure> {
    let Some(path) = path else { return Ok(()) };
    let mut text = serde_json::to_string_pretty(value).map_err(|e| fail(8, "io", e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| fail(8, "io", format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let json = cli.json.as_deref();
    match &cli.command {
        Command::KlVerify {
            type_label,
            p,
            common,
            tolerance,
            allow_degenerate,
        } => {
            let options = VerifyOptions {
                cutoff: common.cutoff,
                schedule: common.t_schedule.clone(),
                tolerance: *tolerance,
                allow_degenerate: *allow_degenerate,
                model_order: common.model_order,
            };
            let report = kl_verify(type_label, *p, &options, cli.stable)?;
            print_report(&report);
            write_json(json, &report)?;
            Ok(report.verdict.exit_code as u8)
        }
        Command::Nichols { q_matrix, cutoff } => {
            let q = parse_q_matrix(&read(q_matrix)?).map_err(|e| fail(4, "nichols", e))?;
            let table = graded_dimensions(&q, *cutoff).map_err(|e| fail(4, "nichols", e))?;
            println!("{:>6}  {:>10}", "degree", "dimension");
            for (m, d) in table.by_total_degree.iter().enumerate() {
                println!("{m:>6}  {d:>10}");
            }
            match table.status {
                NicholsStatus::Finite { top_degree, total_dimension } => {
                    println!("Finite: total {total_dimension}, top degree {top_degree}")
                }
                NicholsStatus::CutoffReached { cutoff } => println!("CutoffReached at degree {cutoff}"),
            }
            write_json(json, &json!({"schema": SCHEMA, "nichols": table}))?;
            Ok(0)
        }
        Command::Lattice {
            action,
            gram,
            bound,
            subgroup,
        } => lattice_command(*action, &read(gram)?, *bound, subgroup.as_deref(), json),
        Command::Character {
            type_label,
            p,
            common,
            s,
            lambda_hat,
            projection,
            normalization,
            terms,
        } => {
            let r = build_from_label(type_label).map_err(|e| fail(6, "rootdata", e))?;
            let n = r.rank();
            let label = WeightLabel {
                s: s.clone().unwrap_or_else(|| vec![0; n]),
                lambda_hat: lambda_hat.clone().unwrap_or_else(|| vec![0; n]),
            };
            let norm = match normalization {
                NormalizationArg::Half => Normalization::Half,
                NormalizationArg::Full => Normalization::Full,
            };
            let proj = match projection {
                ProjectionArg::Full => Projection::Full,
                ProjectionArg::Singlet => Projection::WeightSpace {
                    nu: label.lambda_hat.clone(),
                },
            };
            let copts = CharacterOptions {
                normalization: norm,
                projection: proj,
                point_limit: kl_ledger::qseries::DEFAULT_POINT_LIMIT,
            };
            let qerr = |e| fail(5, "qseries", e);
            let ch = false_theta_character(&r, *p, &label, *terms, &copts).map_err(qerr)?;
            for w in &ch.warnings {
                eprintln!("warning: {w}");
            }
            println!("character q^({}) * (", format_rational(ch.full.offset()));
            println!("{:>8}  {:>12}", "k", "coefficient");
            for (e, c) in ch.full.terms() {
                println!("{:>8}  {:>12}", format_rational(e), format_rational(c));
            }
            println!(")");
            let mut aopts = AsymptoticOptions::for_label(&label);
            aopts.order = common.model_order;
            aopts.character = copts;
            let est = asymptotic_dim(&r, *p, &label, &common.t_schedule, &aopts).map_err(qerr)?;
            println!("{:>10}  {:>22}  {:>10}", "t", "value", "tail_bound");
            for s in &est.samples {
                println!("{:>10}  {:>22.16}  {:>10.2e}", s.t, s.value, s.tail_bound);
            }
            println!("estimate {:.6} +/- {:.6}", est.value, est.error);
            write_json(
                json,
                &json!({
                    "schema": SCHEMA,
                    "input": {"type": r.cartan_type().to_string(), "p": p, "label": label},
                    "character": ch,
                    "samples": est.samples,
                    "estimate": est,
                }),
            )?;
            Ok(0)
        }
    }
}

fn parse_lattice(text: &str) -> Result<IntegralLattice, Failure> {
    let mut v: Value = serde_json::from_str(text).map_err(|e| usage(format!("gram file: {e}")))?;
    if v.is_array() {
        v = json!({ "gram": v });
    }
    let input: LatticeInput = serde_json::from_value(v).map_err(|e| usage(format!("gram file: {e}")))?;
    IntegralLattice::new(input.gram).map_err(|e| fail(3, "lattice", e))
}

fn element_label(a: &[i64]) -> String {
    format!("({})", a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
}

fn subgroup_json(form: &DiscriminantForm, s: &Subgroup) -> Value {
    json!({
        "order": s.order(),
        "indices": s.indices(),
        "elements": s.indices().iter().map(|&i| form.element_at(i)).collect::<Vec<_>>(),
    })
}

fn lattice_command(
    action: LatticeAction,
    text: &str,
    bound: u64,
    subgroup: Option<&[usize]>,
    json: Option<&Path>,
) -> Result<u8, Failure> {
    let lerr = |e| fail(3, "lattice", e);
    let lattice = parse_lattice(text)?;
    let form = discriminant_form(&lattice).map_err(lerr)?;
    let factors = form
        .factors()
        .iter()
        .map(|d| format!("Z/{d}"))
        .collect::<Vec<_>>()
        .join(" x ");
    println!("group {} (order {})", if factors.is_empty() { "0".into() } else { factors }, form.order());
    let out = match action {
        LatticeAction::Disc => {
            let mut table = Vec::new();
            if form.order() <= bound {
                println!("{:>6}  {:>16}  {:>10}", "index", "element", "q mod 2");
                for (i, a) in form.elements().enumerate() {
                    let q = format_rational(&form.q_exponent(&a));
                    println!("{i:>6}  {:>16}  {q:>10}", element_label(&a));
                    table.push(json!({"index": i, "element": a, "q_exponent": q}));
                }
            }
            let cocycle = (form.order() <= 64).then(|| build_cocycle(&form).verify());
            if let Some(c) = &cocycle {
                println!("cocycle identities: {} ({} checks)", if c.passed() { "pass" } else { "FAIL" }, c.checks);
            }
            json!({
                "schema": SCHEMA,
                "discriminant": form.report(),
                "q_exponents": table,
                "cocycle": cocycle.map(|c| json!({"passed": c.passed(), "checks": c.checks})),
            })
        }
        LatticeAction::Isotropic => {
            let subs = form.isotropic_subgroups(bound).map_err(lerr)?;
            for s in &subs {
                let els: Vec<String> = s.indices().iter().map(|&i| element_label(&form.element_at(i))).collect();
                println!("order {:>4}: {}", s.order(), els.join(" "));
            }
            json!({
                "schema": SCHEMA,
                "discriminant": form.report(),
                "isotropic_subgroups": subs.iter().map(|s| subgroup_json(&form, s)).collect::<Vec<_>>(),
            })
        }
        LatticeAction::Extend => {
            let subs = match subgroup {
                Some(idx) => {
                    if let Some(bad) = idx.iter().find(|&&i| i as u64 >= form.order()) {
                        return Err(usage(format!("element index {bad} out of range")));
                    }
                    let gens: Vec<Vec<i64>> = idx.iter().map(|&i| form.element_at(i)).collect();
                    vec![form.span(&gens)]
                }
                None => form
                    .isotropic_subgroups(bound)
                    .map_err(lerr)?
                    .into_iter()
                    .filter(|s| s.order() > 1)
                    .collect(),
            };
            let mut rows = Vec::new();
            for s in &subs {
                let quotient = form.extend_by_isotropic(s).map_err(lerr)?;
                let ok = simple_current_fpdim_check(&form, s).map_err(|e| fail(7, "fusion", e))?;
                let gens: Vec<String> = quotient.q_generators().iter().map(format_rational).collect();
                println!(
                    "I of order {}: I^perp/I order {} factors {:?} q-exponents [{}]; order identities {}",
                    s.order(),
                    quotient.order(),
                    quotient.factors(),
                    gens.join(", "),
                    if ok { "hold" } else { "FAIL" }
                );
                rows.push(json!({
                    "subgroup": subgroup_json(&form, s),
                    "perp_order": form.orthogonal(s).order(),
                    "local": quotient.report(),
                    "order_identities": ok,
                }));
            }
            json!({"schema": SCHEMA, "discriminant": form.report(), "extensions": rows})
        }
    };
    write_json(json, &out)?;
    Ok(0)
}

fn print_report(r: &kl_ledger::verifier::VerificationReport) {
    println!("{} p = {}", r.input.root_type, r.input.p);
    println!(
        "discriminant: order {} factors {:?}{}",
        r.discriminant.form.order,
        r.discriminant.form.factors,
        match r.discriminant.cocycle_verified {
            Some(true) => ", cocycle identities pass",
            Some(false) => ", cocycle identities FAIL",
            None => "",
        }
    );
    println!("nichols by degree: {:?}", r.nichols.by_total_degree);
    match &r.nichols.status {
        NicholsStatus::Finite { total_dimension, .. } => println!("dim B = {total_dimension}"),
        NicholsStatus::CutoffReached { cutoff } => println!("dim B: ExceedsCutoff (degree {cutoff})"),
    }
    if let Some(l) = &r.fp_ledger {
        println!(
            "FP ledger: |Gamma| = {}, Mod(B) = {}, relative center = {}, FPdim(A) = {:.4} +/- {:.4}",
            l.fp_c, l.fp_modules, l.fp_relative_center, l.fp_a.value, l.fp_a.error
        );
    }
    if let Some(a) = &r.asymptotics {
        let d = &a.quantum_dimension.denominator;
        println!(
            "vacuum cusp limit {:.6} +/- {:.6}; quantum dimension {:.4} +/- {:.4} (p^|Phi+| = {})",
            d.value, d.error, a.quantum_dimension.value, a.quantum_dimension.error, a.expected_quantum_dimension
        );
    }
    for w in &r.warnings {
        println!("warning: {w}");
    }
    println!("{}", r.verdict.text);
    println!("standing hypotheses:");
    for h in &r.hypotheses {
        println!("  - {h}");
    }
}
