use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use opspace::decomp::decomposition_bound;
use opspace::io::{
    bilinear_from_doc, bilinear_weight_from_flag, element_from_doc, load_json, map_from_doc, tensor_from_doc,
    weight_from_flag, BilinearDoc, ElementDoc, MapDoc, Report, TensorDoc,
};
use opspace::quantcheck::{check_r1, check_r2, oracle_by_label, precheck, SamplerConfig, ViolationReport};
use opspace::suites::{run_suite, Suite, SuiteOptions};
use opspace::{
    bilinear_lambda_norm, cb_norm, lambda_cb_norm, lambda_class_norm, lambda_tensor_norm_lower, BilinearWeight,
    DecompMode, EstimatorConfig, LambdaCollection, NormEstimate,
};

const EXIT_ERROR: u8 = 1;
const EXIT_VIOLATION: u8 = 3;
const EXIT_ASSERTION: u8 = 4;

#[derive(Parser)]
#[command(name = "opspace", version, about = "Operator space norm brackets and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Random restarts per ascent.
    #[arg(long, global = true, default_value_t = 16)]
    restarts: usize,
    #[arg(long, global = true, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol: f64,
    /// Highest matrix level for profiles.
    #[arg(long, global = true, default_value_t = 3)]
    level_max: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    #[value(name = "1", alias = "product")]
    Product,
    #[value(name = "2", alias = "kronecker")]
    Kronecker,
    #[value(name = "3", alias = "schur")]
    Schur,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    #[value(alias = "odot")]
    Haagerup,
    #[value(alias = "otimes")]
    Projective,
    #[value(alias = "bullet")]
    Schur,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axiom {
    R1,
    R2,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Exact min norm of a matrix-level element.
    Norm { element: PathBuf },
    /// Completely bounded norm bracket and level profile of a map.
    Cbnorm { map: PathBuf },
    /// Weighted cb norm: `identity`, `transpose`, or a weight file.
    Wcbnorm {
        map: PathBuf,
        #[arg(long)]
        weight: String,
    },
    /// Norm over a collection of spaces, e.g. `M:2,D:4`.
    Classnorm {
        map: PathBuf,
        #[arg(long)]
        collection: String,
    },
    /// Weighted norm of a bilinear map: product, kronecker or schur.
    Bilnorm {
        map: PathBuf,
        #[arg(long, default_value = "product")]
        weight: String,
    },
    /// Dual-form lower bound and matching decomposition upper bound.
    Tensornorm {
        tensor: PathBuf,
        #[arg(long, value_enum)]
        case: Case,
        /// Largest size of the dual form arrays.
        #[arg(long, default_value_t = 2)]
        m_cap: usize,
    },
    /// Decomposition upper bound for a tensor element.
    Decomp {
        tensor: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Largest inner size of the decomposition.
        #[arg(long, default_value_t = 8)]
        cap: usize,
    },
    /// Search for Ruan axiom violations of a norm oracle.
    Ruancheck {
        /// `min:<space>`, `frobenius:<space>`, `l1[:scale]` or `minq:<normed space>`.
        #[arg(long)]
        oracle: String,
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = Axiom::Both)]
        axiom: Axiom,
    },
    /// Run a named verification suite.
    Suite {
        name: Suite,
        /// Overrides the suite's default collection, e.g. `D:3`.
        #[arg(long)]
        collection: Option<String>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
}

fn collection(flag: &str) -> opspace::Result<LambdaCollection> {
    let items: Vec<&str> = flag.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    LambdaCollection::from_shorthand(format!("{{{}}}", items.join(", ")), &items)
}

fn single(command: String, cfg: &EstimatorConfig, level_max: usize, quantity: &str, est: &NormEstimate, level: Option<usize>) -> Report {
    let mut report = Report::new(command, cfg, level_max);
    report.push_estimate(quantity, est, level);
    report
}

fn ruan_rows(report: &mut Report, rep: &ViolationReport) {
    let quantity = format!("{}.max_excess", rep.axiom.to_lowercase());
    let est = NormEstimate::exact(rep.max_excess);
    report.push_estimate(&quantity, &est, None);
    if let Some(best) = rep.best_certificate() {
        report.notes.push(format!("{}: certificate {best}", rep.axiom));
    }
    report.notes.push(rep.summary());
}

fn run(cli: &Cli) -> opspace::Result<(Report, u8)> {
    let cfg = EstimatorConfig {
        restarts: cli.restarts,
        max_iter: cli.max_iter,
        tol: cli.tol,
        seed: cli.seed,
    };
    cfg.validate()?;
    if cli.level_max == 0 {
        return Err(opspace::Error::Shape("--level-max must be at least 1".into()));
    }
    let lm = cli.level_max;
    let name = |p: &Path| p.display().to_string();
    let report = match &cli.command {
        Command::Norm { element } => {
            let x = element_from_doc(&load_json::<ElementDoc>(element)?)?;
            let est = NormEstimate::exact(x.min_norm());
            single(format!("norm {}", name(element)), &cfg, lm, "min_norm", &est, Some(x.level()))
        }
        Command::Cbnorm { map } => {
            let phi = map_from_doc(&load_json::<MapDoc>(map)?)?;
            let est = cb_norm(&phi, lm, &cfg)?;
            single(format!("cbnorm {}", name(map)), &cfg, lm, "cb_norm", &est, Some(lm))
        }
        Command::Wcbnorm { map, weight } => {
            let phi = map_from_doc(&load_json::<MapDoc>(map)?)?;
            let w = weight_from_flag(weight)?;
            let est = lambda_cb_norm(&phi, &w, lm, &cfg)?;
            let mut r = single(format!("wcbnorm {} --weight {weight}", name(map)), &cfg, lm, "weighted_cb_norm", &est, Some(lm));
            r.notes.push(format!("certified range: {}", w.certified_range()));
            r
        }
        Command::Classnorm { map, collection: flag } => {
            let phi = map_from_doc(&load_json::<MapDoc>(map)?)?;
            let coll = collection(flag)?;
            let mut est = lambda_class_norm(&phi, &coll, &cfg)?;
            let members = std::mem::take(&mut est.level_profile);
            let mut r = single(format!("classnorm {} --collection {flag}", name(map)), &cfg, lm, "class_norm", &est, None);
            for (x, v) in coll.members().iter().zip(members) {
                let row = NormEstimate {
                    upper: est.upper,
                    converged: est.converged,
                    ..NormEstimate::exact(v)
                };
                r.push_estimate(&format!("class_norm.member[{}]", x.label()), &row, None);
            }
            r
        }
        Command::Bilnorm { map, weight } => {
            let phi = bilinear_from_doc(&load_json::<BilinearDoc>(map)?)?;
            let w = bilinear_weight_from_flag(weight)?;
            let est = bilinear_lambda_norm(&phi, &w, lm, &cfg)?;
            single(format!("bilnorm {} --weight {weight}", name(map)), &cfg, lm, "bilinear_norm", &est, Some(lm))
        }
        Command::Tensornorm { tensor, case, m_cap } => {
            let u = tensor_from_doc(&load_json::<TensorDoc>(tensor)?)?;
            let w = match case {
                Case::Product => BilinearWeight::product(),
                Case::Kronecker => BilinearWeight::kronecker(),
                Case::Schur => BilinearWeight::schur(),
            };
            let est = lambda_tensor_norm_lower(&u, &w, *m_cap, &cfg)?;
            let command = format!("tensornorm {} --case {} --m-cap {m_cap}", name(tensor), w.label());
            single(command, &cfg, lm, "tensor_norm", &est, Some(u.level()))
        }
        Command::Decomp { tensor, mode, cap } => {
            let u = tensor_from_doc(&load_json::<TensorDoc>(tensor)?)?;
            let mode = match mode {
                Mode::Haagerup => DecompMode::Odot,
                Mode::Projective => DecompMode::Otimes,
                Mode::Schur => DecompMode::Bullet,
            };
            let est = decomposition_bound(&u, mode, *cap, &cfg)?;
            let command = format!("decomp {} --mode {} --cap {cap}", name(tensor), mode.label());
            single(command, &cfg, lm, &format!("{}_norm", mode.label()), &est, Some(u.level()))
        }
        Command::Ruancheck { oracle, budget, axiom } => {
            let o = oracle_by_label(oracle, &cfg)?;
            precheck(o.as_ref(), 1, 8, cfg.seed)?;
            let mut sampler = SamplerConfig::new(cfg.seed, *budget);
            sampler.max_level = lm;
            let mut report = Report::new(format!("ruancheck --oracle {oracle} --budget {budget}"), &cfg, lm);
            let mut violated = false;
            if matches!(axiom, Axiom::R1 | Axiom::Both) {
                let rep = check_r1(o.as_ref(), &sampler)?;
                violated |= rep.has_violation();
                ruan_rows(&mut report, &rep);
            }
            if matches!(axiom, Axiom::R2 | Axiom::Both) {
                let rep = check_r2(o.as_ref(), &sampler)?;
                violated |= rep.has_violation();
                ruan_rows(&mut report, &rep);
            }
            return Ok((report, if violated { EXIT_VIOLATION } else { 0 }));
        }
        Command::Suite {
            name: suite,
            collection: flag,
            trials,
        } => {
            let opts = SuiteOptions {
                trials: *trials,
                level_max: lm,
                collection: flag.as_deref().map(collection).transpose()?,
            };
            let report = run_suite(*suite, &cfg, &opts)?;
            let code = if report.all_pass() { 0 } else { EXIT_ASSERTION };
            return Ok((report, code));
        }
    };
    Ok((report, 0))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report, code) = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let text = match cli.format {
        Format::Csv => report.to_csv(),
        Format::Text => report.to_text(),
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_ERROR);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(code)
}
