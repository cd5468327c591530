//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Needs the solver named by `PLIFT_SOLVER`
//! (default: two z3 configurations raced).

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use plift_core::binding::{bind, structurally_equal};
use plift_core::bundle::{parse_metamodel, parse_model, Bundle};
use plift_core::constraint::{CmpOp, Expr, Navigation, SetExpr, Term};
use plift_core::lifting::lift;
use plift_core::oracle::equivalence_test;
use plift_core::smt::{check, emit_smt, Section, SolverConfig, Verdict};
use plift_core::synth::{random_product_line, sfit_product_line, RandomBounds, SfitSize};
use plift_core::variability::{enumerate_configurations, make_configuration, DEFAULT_ENUMERATION_CAP};

const LIFTING_LIMIT: Duration = Duration::from_secs(1);
const MICRO_CHECK_LIMIT: Duration = Duration::from_secs(10);
const PEN_LIMIT: Duration = Duration::from_secs(30);
const RANDOM_LIMIT: Duration = Duration::from_secs(600);
const RANDOM_INSTANCES: u64 = 250;
const TABLE_SCALE_LIMIT: Duration = Duration::from_secs(60);
const PEN_SCALE_LIMIT: Duration = Duration::from_secs(5);
const SOLVER_TIMEOUT: Duration = Duration::from_secs(120);

/// Feature declarations and assertions of the pen listing, as published.
const PEN_FEATURE_LISTING: &str = "
(declare-const PenFeatures bool)
(declare-const OpenMechanism bool)
(declare-const TwistToOpen bool)
(declare-const PushToOpen bool)

(assert (=> OpenMechanism PenFeatures))
(assert (=> OpenMechanism (or PushToOpen TwistToOpen)))
(assert (=> PushToOpen OpenMechanism))
(assert (=> TwistToOpen OpenMechanism))
(assert (=> TwistToOpen (not PushToOpen)))
(assert (=> PushToOpen (not TwistToOpen)))
(assert (=> PenFeatures OpenMechanism))
(assert (= PenFeatures true))
";

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn bundle(dir: &str) -> Result<Bundle, String> {
    Bundle::load_dir(&fixtures().join(dir)).map_err(|e| format!("{dir}: {e}"))
}

fn solver() -> SolverConfig {
    SolverConfig::from_env().with_timeout(Some(SOLVER_TIMEOUT))
}

fn within(elapsed: Duration, limit: Duration) -> Outcome {
    if elapsed < limit {
        Ok(format!("{:.2} s < {} s", elapsed.as_secs_f64(), limit.as_secs()))
    } else {
        Err(format!("took {:.2} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs()))
    }
}

fn nav(var: &str, path: &[&str]) -> Term {
    Term::Nav(Navigation::new(var, path.iter().copied()))
}

fn ty(name: &str) -> SetExpr {
    SetExpr::Type(name.into())
}

fn expected_lifted() -> [(&'static str, Expr); 3] {
    let unique = Expr::forall(
        "f1",
        ty("FunctionDefinition"),
        Expr::implies(
            Expr::selected("f1"),
            Expr::not(Expr::exists(
                "f2",
                ty("FunctionDefinition"),
                Expr::and(
                    Expr::selected("f2"),
                    Expr::and(
                        Expr::cmp(CmpOp::Ne, nav("f1", &[]), nav("f2", &[])),
                        Expr::cmp(CmpOp::Eq, nav("f1", &["funName"]), nav("f2", &["funName"])),
                    ),
                ),
            )),
        ),
    );
    let defined = Expr::forall(
        "a",
        ty("Argument"),
        Expr::implies(
            Expr::selected("a"),
            Expr::exists(
                "v",
                ty("VariableDeclaration"),
                Expr::and(
                    Expr::selected("v"),
                    Expr::cmp(CmpOp::Eq, nav("a", &["varName"]), nav("v", &["varName"])),
                ),
            ),
        ),
    );
    let types_match = Expr::forall(
        "F_call",
        ty("FunctionCall"),
        Expr::implies(
            Expr::selected("F_call"),
            Expr::forall(
                "a",
                SetExpr::Nav(Navigation::new("F_call", ["args"])),
                Expr::exists(
                    "F_def",
                    ty("FunctionDefinition"),
                    Expr::and(
                        Expr::selected("F_def"),
                        Expr::forall(
                            "p",
                            SetExpr::Nav(Navigation::new("F_def", ["params"])),
                            Expr::exists(
                                "v",
                                ty("VariableDeclaration"),
                                Expr::and(
                                    Expr::selected("v"),
                                    Expr::implies(
                                        Expr::and(
                                            Expr::cmp(CmpOp::Eq, nav("a", &["paramName"]), nav("p", &["paramName"])),
                                            Expr::cmp(CmpOp::Eq, nav("a", &["varName"]), nav("v", &["varName"])),
                                        ),
                                        Expr::cmp(CmpOp::Eq, nav("v", &["varType"]), nav("p", &["paramType"])),
                                    ),
                                ),
                            ),
                        ),
                    ),
                ),
            ),
        ),
    );
    [
        ("unique_function_names", unique),
        ("arguments_defined", defined),
        ("call_types_match", types_match),
    ]
}

fn lifting_golden() -> Outcome {
    let b = bundle("microl")?;
    let started = Instant::now();
    for (name, expected) in expected_lifted() {
        let c = b.constraint(name).ok_or_else(|| format!("missing constraint {name}"))?;
        let lifted = lift(c);
        if *lifted.root() != expected {
            return Err(format!("{name}: got {lifted}"));
        }
    }
    within(started.elapsed(), LIFTING_LIMIT)
}

fn micro_violation() -> Outcome {
    let b = bundle("microl")?;
    let c = b.constraint("call_types_match").ok_or("missing call_types_match")?;
    let started = Instant::now();
    let verdict = check(&b.product_line, c, &solver()).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    match verdict {
        Verdict::Violation { config, confirmed: true }
            if config.get("FPU") == Some(true) && config.get("Runtime") == Some(true) =>
        {
            within(elapsed, MICRO_CHECK_LIMIT).map(|t| format!("{config}, {t}"))
        }
        other => Err(format!("unexpected verdict {other:?}")),
    }
}

fn variant_derivation() -> Outcome {
    let b = bundle("microl")?;
    let pl = &b.product_line;
    let mm = parse_metamodel(include_str!("../../../fixtures/microl/metamodel.json")).map_err(|e| e.to_string())?;
    let program = |text: &str| parse_model(&mm, text).map_err(|e| e.to_string());
    let p1 = program(include_str!("../../../fixtures/microl/my_program1.json"))?;
    let p2 = program(include_str!("../../../fixtures/microl/my_program2.json"))?;
    for (fpu, expected, label) in [(false, &p1, "myProgram1"), (true, &p2, "myProgram2")] {
        let k = make_configuration(
            pl.feature_model(),
            [
                ("SoftwareOptimization", true),
                ("ControllerFeatures", true),
                ("Precision", false),
                ("Runtime", true),
                ("FPU", fpu),
            ],
        )
        .map_err(|e| e.to_string())?;
        if !structurally_equal(&bind(pl, &k).graph, expected) {
            return Err(format!("variant at FPU={fpu}, Runtime=true differs from {label}"));
        }
    }
    Ok("both variants match".into())
}

fn pen_verdicts() -> Outcome {
    let started = Instant::now();
    let valid = bundle("pen")?;
    for (name, c) in &valid.constraints {
        let verdict = check(&valid.product_line, c, &solver()).map_err(|e| e.to_string())?;
        if verdict != Verdict::AllVariantsSatisfy {
            return Err(format!("pen/{name}: {verdict:?}"));
        }
    }
    for (dir, name) in [
        ("pen_faults/depl3_push", "steps_deployed"),
        ("pen_faults/screwhead_push", "parts_assembled"),
        ("pen_faults/depl4_twist", "deployment_capability"),
    ] {
        let b = bundle(dir)?;
        let c = b.constraint(name).ok_or_else(|| format!("missing {name}"))?;
        match check(&b.product_line, c, &solver()).map_err(|e| e.to_string())? {
            Verdict::Violation { confirmed: true, .. } => {}
            other => return Err(format!("{dir}/{name}: {other:?}")),
        }
    }
    within(started.elapsed(), PEN_LIMIT).map(|t| format!("3 valid, 3 faults confirmed, {t}"))
}

fn random_agreement() -> Outcome {
    let started = Instant::now();
    let next = AtomicU64::new(0);
    let failures = Mutex::new(Vec::new());
    let violations = AtomicU64::new(0);
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get()).min(8);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let seed = next.fetch_add(1, Ordering::Relaxed);
                if seed >= RANDOM_INSTANCES {
                    break;
                }
                let (pl, c) = random_product_line(seed, RandomBounds::default());
                match equivalence_test(&pl, &c, &solver()) {
                    Ok(report) if report.agree => {
                        if report.oracle.kind() == "violation" {
                            violations.fetch_add(1, Ordering::Relaxed);
                        }
                    }
                    Ok(report) => failures.lock().expect("not poisoned").push(format!("seed {seed}: {report}")),
                    Err(e) => failures.lock().expect("not poisoned").push(format!("seed {seed}: {e}")),
                }
            });
        }
    });
    let failures = failures.into_inner().expect("not poisoned");
    if !failures.is_empty() {
        return Err(format!("{} of {RANDOM_INSTANCES} disagree: {}", failures.len(), failures.join("; ")));
    }
    within(started.elapsed(), RANDOM_LIMIT).map(|t| {
        format!(
            "{RANDOM_INSTANCES}/{RANDOM_INSTANCES} agree ({} violations), {t}",
            violations.load(Ordering::Relaxed)
        )
    })
}

fn scalability() -> Outcome {
    let (pl, constraints) = sfit_product_line(SfitSize::TABLE_SCALE, 1, true);
    let started = Instant::now();
    for (name, c) in &constraints {
        let verdict = check(&pl, c, &solver()).map_err(|e| e.to_string())?;
        if verdict != Verdict::AllVariantsSatisfy {
            return Err(format!("table scale/{name}: {verdict:?}"));
        }
    }
    let large = within(started.elapsed(), TABLE_SCALE_LIMIT)?;
    let (pen, constraints) = sfit_product_line(SfitSize::PEN_SCALE, 1, true);
    let started = Instant::now();
    for (name, c) in &constraints {
        let verdict = check(&pen, c, &solver()).map_err(|e| e.to_string())?;
        if verdict != Verdict::AllVariantsSatisfy {
            return Err(format!("pen scale/{name}: {verdict:?}"));
        }
    }
    let small = within(started.elapsed(), PEN_SCALE_LIMIT)?;
    Ok(format!(
        "{} objects: {large}; {} objects: {small}",
        pl.model().len(),
        pen.model().len()
    ))
}

/// Whitespace-insensitive, with sort names compared case-insensitively.
fn normalize(block: &str) -> String {
    block
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .replace(" bool)", " Bool)")
}

fn determinism() -> Outcome {
    let b = bundle("pen")?;
    let c = b.constraint("steps_deployed").ok_or("missing steps_deployed")?;
    let first = emit_smt(&b.product_line, &lift(c)).map_err(|e| e.to_string())?;
    let second = emit_smt(&b.product_line, &lift(c)).map_err(|e| e.to_string())?;
    if first.text() != second.text() {
        return Err("two emissions differ".into());
    }
    let block = first.section(Section::Features).join("\n");
    if normalize(&block) != normalize(PEN_FEATURE_LISTING) {
        return Err(format!("feature block differs:\n{block}"));
    }
    Ok(format!("{} bytes identical, feature block matches", first.text().len()))
}

fn enumeration_counts() -> Outcome {
    let count = |dir: &str| -> Result<usize, String> {
        let b = bundle(dir)?;
        enumerate_configurations(b.product_line.feature_model(), DEFAULT_ENUMERATION_CAP)
            .map(|v| v.len())
            .map_err(|e| e.to_string())
    };
    match (count("pen")?, count("microl")?) {
        (2, 3) => Ok("pen 2, microl 3".into()),
        (pen, micro) => Err(format!("pen {pen}, microl {micro}")),
    }
}

fn main() {
    let criteria: [(&str, Criterion); 8] = [
        ("1 lifting golden ASTs", lifting_golden),
        ("2 microl violation at FPU and Runtime", micro_violation),
        ("3 variant derivation", variant_derivation),
        ("4 pen validity and seeded faults", pen_verdicts),
        ("5 smt and oracle agree on random product lines", random_agreement),
        ("6 scalability smoke", scalability),
        ("7 deterministic emission", determinism),
        ("8 enumeration counts", enumeration_counts),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
