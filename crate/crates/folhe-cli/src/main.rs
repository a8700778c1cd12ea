//! `folhe`: command-line front-end. One subcommand per study; every run
//! emits a JSON report (stdout or `--out`) whose floats carry 17 significant
//! digits and whose key order is fixed, so reports are diff-able. Reports are
//! byte-identical across runs with the same config and seed, except for the
//! `wall_clock_seconds` field.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use folhe_core::bundle::BundleSpec;
use folhe_core::config::{
    bundle_from_config, model_from_config, solve_options_from_config, Config,
};
use folhe_core::field::BasicField;
use folhe_core::instanton::{instanton_residual, yang_mills_residual};
use folhe_core::model::FoliatedTorusModel;
use folhe_core::moduli::{noncompactness_certificate, parse_xi, ModuliError, TransverseModuli};
use folhe_core::solver::{trace_path, PathTrace, SolveOptions, Verdict};
use folhe_core::stability::{harder_narasimhan, stability_verdict, vanishing_check};
use folhe_core::suite;
use serde_json::{json, Map, Number, Value};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "folhe", version, about = "numerical laboratory for transverse Hermitian-Einstein geometry on flat foliated tori")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Randomized exactness/adjointness battery for the transverse calculus
    KernelCheck {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Degree, slope, Einstein factor and Bogomolov number of a bundle
    Degree {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the continuity method on the perturbed Hermitian-Einstein equation
    SolveHe {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// final ε of the continuity schedule
        #[arg(long)]
        eps_min: Option<f64>,
        /// Newton stopping tolerance
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// also write the per-ε history as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Slope-stability verdict; `--solve` cross-checks against the solver
    Verdict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long, default_value_t = false)]
        solve: bool,
        /// also attempt the H⁰ dimension count (flat factors only)
        #[arg(long, default_value_t = false)]
        vanishing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Harder-Narasimhan filtration of the bundle
    Hn {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact compactness/non-compactness certificate for flat U(1) moduli on T³
    ModuliT3 {
        /// foliation direction, e.g. "1,sqrt2,sqrt3"
        #[arg(long)]
        xi: String,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ω-instanton and Yang-Mills residuals of the solved metric
    InstantonCheck {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run every acceptance study and emit one report per criterion
    ReproduceAll {
        #[arg(long, default_value = "reports")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 8)]
        cutoff: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Render the per-ε history of a solve-he report as a static SVG
    Plot {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// step field on the vertical axis
        #[arg(long, default_value = "sup_log")]
        y: String,
    },
}

fn main() {
    // clap exits 2 on usage errors by default; the contract here is 1 for
    // errors and 2 for UNSUPPORTED/INCONCLUSIVE verdicts
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            std::process::exit(code);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

// ---------------------------------------------------------------------------
// report plumbing

/// A float as a JSON number with 17 significant digits.
fn jf(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_string_unchecked(format!("{x:.16e}")))
    } else {
        Value::String(format!("{x}"))
    }
}

/// Rewrite every non-integer number in the tree to the 17-digit form.
fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) => {
            if n.as_i64().is_some() || n.as_u64().is_some() {
                Value::Number(n)
            } else if let Some(x) = n.as_f64() {
                jf(x)
            } else {
                Value::Number(n)
            }
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

fn report(command: &str, config_echo: Option<&str>, payload: Value, started: Instant) -> Value {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    if let Some(echo) = config_echo {
        m.insert("config".into(), json!(echo));
    }
    m.insert("result".into(), canonicalize(payload));
    m.insert(
        "wall_clock_seconds".into(),
        jf(started.elapsed().as_secs_f64()),
    );
    Value::Object(m)
}

fn emit(out: &Option<PathBuf>, report: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {path:?}"))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_model_bundle(
    model_path: &Path,
    bundle_path: &Option<PathBuf>,
) -> Result<(Config, Arc<FoliatedTorusModel>, BundleSpec, String)> {
    let mcfg = Config::from_file(model_path)?;
    let model = model_from_config(&mcfg)?;
    let (bcfg, echo) = match bundle_path {
        Some(p) => {
            let c = Config::from_file(p)?;
            let echo = format!("{}\n{}", mcfg.source, c.source);
            (c, echo)
        }
        None => {
            let echo = mcfg.source.clone();
            (Config::parse(&mcfg.source)?, echo)
        }
    };
    let bundle = bundle_from_config(&bcfg, &model)?;
    Ok((bcfg, model, bundle, echo))
}

/// Mode-coefficient dump of a (0,0) endomorphism field: one record per
/// admissible mode with a nonzero matrix.
fn dump_field(f: &BasicField) -> Value {
    let model = &f.model;
    let r = f.rank;
    let mut records = Vec::new();
    for b in 0..model.modes.box_len {
        if !model.modes.admissible[b] {
            continue;
        }
        let mut mat = Vec::with_capacity(r);
        let mut nonzero = false;
        for i in 0..r {
            let mut row = Vec::with_capacity(r);
            for j in 0..r {
                let c = f.slice(0, i, j)[b];
                if c.norm_sqr() != 0.0 {
                    nonzero = true;
                }
                row.push(json!([jf(c.re), jf(c.im)]));
            }
            mat.push(Value::Array(row));
        }
        if nonzero {
            records.push(json!({"k": model.modes.kappa(b), "matrix": mat}));
        }
    }
    Value::Array(records)
}

fn steps_json(trace: &PathTrace) -> Value {
    serde_json::to_value(&trace.steps).expect("steps serialize")
}

fn write_history_csv(path: &Path, trace: &PathTrace) -> Result<()> {
    let mut s = String::from(
        "eps,sup_log,l2_log,he_residual_sup,residual_l2,newton_iters,estimate_violation,mean_bound_violation\n",
    );
    for st in &trace.steps {
        s += &format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}\n",
            st.eps,
            st.sup_log,
            st.l2_log,
            st.he_residual_sup,
            st.residual_l2,
            st.newton_iters,
            st.estimate_violation,
            st.mean_bound_violation
        );
    }
    std::fs::write(path, s).with_context(|| format!("writing {path:?}"))?;
    Ok(())
}

// ---------------------------------------------------------------------------

fn run(cli: Cli) -> Result<i32> {
    let started = Instant::now();
    match cli.cmd {
        Cmd::KernelCheck {
            model,
            samples,
            seed,
            out,
        } => {
            let cfg = Config::from_file(&model)?;
            let m = model_from_config(&cfg)?;
            let rep = suite::kernel_check(&m, samples, seed);
            let pass = rep.passes();
            let payload = json!({
                "seed": seed,
                "kernel": serde_json::to_value(&rep)?,
                "pass": pass,
            });
            emit(&out, &report("kernel-check", Some(&cfg.source), payload, started))?;
            println!("kernel-check: {}", if pass { "PASS" } else { "FAIL" });
            Ok(if pass { 0 } else { 1 })
        }
        Cmd::Degree { model, bundle, out } => {
            let (_, m, b, echo) = load_model_bundle(&model, &bundle)?;
            let bogomolov = b.bogomolov_integral().ok();
            let payload = json!({
                "rank": b.rank(),
                "degree": b.degree(),
                "slope": b.slope(),
                "einstein_factor": b.einstein_factor(),
                "bogomolov": bogomolov,
                "normalization": {"volume": m.volume, "leaf_volume": m.leaf_volume},
            });
            emit(&out, &report("degree", Some(&echo), payload, started))?;
            Ok(0)
        }
        Cmd::SolveHe {
            model,
            bundle,
            eps_min,
            tol,
            out,
            csv,
        } => {
            let (bcfg, _, b, echo) = load_model_bundle(&model, &bundle)?;
            let mut opts = solve_options_from_config(&bcfg)?;
            if let Some(e) = eps_min {
                opts.eps_target = e;
            }
            if let Some(t) = tol {
                opts.newton_tol = t;
            }
            let trace = trace_path(&b, &opts)?;
            if let Some(csv_path) = &csv {
                write_history_csv(csv_path, &trace)?;
            }
            let destab = if trace.verdict == Verdict::Blowup {
                folhe_core::solver::extract_destabilizer(&b, &trace)
            } else {
                None
            };
            let payload = json!({
                "verdict": trace.verdict.to_string(),
                "gamma": trace.gamma,
                "eps_final": trace.eps_final,
                "growth_rate": trace.growth_rate,
                "steps": steps_json(&trace),
                "final_metric_log": dump_field(&trace.final_s),
                "destabilizer": destab.as_ref().map(|d| serde_json::to_value(d).unwrap()),
            });
            emit(&out, &report("solve-he", Some(&echo), payload, started))?;
            println!("solve-he: {}", trace.verdict);
            Ok(if trace.verdict == Verdict::Inconclusive { 2 } else { 0 })
        }
        Cmd::Verdict {
            model,
            bundle,
            solve,
            vanishing,
            out,
        } => {
            let (bcfg, _, b, echo) = load_model_bundle(&model, &bundle)?;
            let stab = stability_verdict(&b);
            let mut payload = Map::new();
            payload.insert("stability".into(), serde_json::to_value(&stab)?);
            let mut unsupported = false;
            if vanishing {
                match vanishing_check(&b) {
                    Ok(v) => {
                        payload.insert("vanishing".into(), serde_json::to_value(&v)?);
                    }
                    Err(e) => {
                        unsupported = true;
                        payload.insert("vanishing".into(), json!({"verdict": "UNSUPPORTED", "reason": e.to_string()}));
                    }
                }
            }
            let mut agree = None;
            if solve {
                let opts = solve_options_from_config(&bcfg)?;
                let trace = trace_path(&b, &opts)?;
                let expected = if stab.polystable {
                    Verdict::Converged
                } else {
                    Verdict::Blowup
                };
                agree = Some(trace.verdict == expected);
                payload.insert("solver_verdict".into(), json!(trace.verdict.to_string()));
                payload.insert("dichotomy_agrees".into(), json!(trace.verdict == expected));
            }
            emit(&out, &report("verdict", Some(&echo), Value::Object(payload), started))?;
            let tag = if stab.stable {
                "STABLE"
            } else if stab.polystable {
                "POLYSTABLE"
            } else if stab.semistable {
                "SEMISTABLE"
            } else {
                "UNSTABLE"
            };
            match agree {
                Some(a) => println!("verdict: {tag} (solver cross-check: {})", if a { "agree" } else { "DISAGREE" }),
                None => println!("verdict: {tag}"),
            }
            Ok(if unsupported { 2 } else { 0 })
        }
        Cmd::Hn { model, bundle, out } => {
            let (_, _, b, echo) = load_model_bundle(&model, &bundle)?;
            let layers = harder_narasimhan(&b);
            let payload = json!({
                "steps": layers.iter().map(|l| json!({
                    "factors": l.factors,
                    "rank": l.rank,
                    "degree": l.degree,
                    "slope": l.slope,
                })).collect::<Vec<_>>(),
            });
            emit(&out, &report("hn", Some(&echo), payload, started))?;
            Ok(0)
        }
        Cmd::ModuliT3 { xi, count, out } => {
            let xiv = parse_xi(&xi).map_err(|e| anyhow!("{e}"))?;
            let payload = match noncompactness_certificate(&xiv, count) {
                Ok(cert) => json!({
                    "compact": false,
                    "certificate": serde_json::to_value(&cert)?,
                    "conclusion": "no convergent subsequence modulo basic gauge",
                }),
                Err(ModuliError::CompactCase) => {
                    let tm = TransverseModuli::new(xiv.clone()).map_err(|e| anyhow!("{e}"))?;
                    json!({
                        "compact": true,
                        "lattice_rank": tm.lattice_rank(),
                        "conclusion": "transverse moduli space is a compact dual 2-torus",
                    })
                }
                Err(e) => bail!("{e}"),
            };
            emit(&out, &report("moduli-t3", Some(&xi), payload, started))?;
            Ok(0)
        }
        Cmd::InstantonCheck { model, bundle, out } => {
            let (bcfg, m, b, echo) = load_model_bundle(&model, &bundle)?;
            if m.n < 2 {
                bail!("instanton-check needs a model with n ≥ 2");
            }
            let opts = solve_options_from_config(&bcfg)?;
            let trace = trace_path(&b, &opts)?;
            let (inst, ym) = (
                instanton_residual(&b, &trace.final_s),
                yang_mills_residual(&b, &trace.final_s),
            );
            let payload = json!({
                "solver_verdict": trace.verdict.to_string(),
                "instanton_residual": inst,
                "yang_mills_residual": ym,
            });
            emit(&out, &report("instanton-check", Some(&echo), payload, started))?;
            println!("instanton-check: residual {inst:.3e}, yang-mills {ym:.3e}");
            Ok(if trace.verdict == Verdict::Inconclusive { 2 } else { 0 })
        }
        Cmd::ReproduceAll {
            out_dir,
            cutoff,
            seed,
        } => reproduce_all(&out_dir, cutoff, seed),
        Cmd::Plot { report, out, y } => plot(&report, &out, &y),
    }
}

// ---------------------------------------------------------------------------
// reproduce-all: one report per acceptance study

fn criterion_report(
    out_dir: &Path,
    idx: usize,
    description: &str,
    pass: bool,
    data: Value,
    started: Instant,
) -> Result<bool> {
    let payload = json!({
        "criterion": idx,
        "description": description,
        "pass": pass,
        "data": data,
    });
    let rep = report("reproduce-all", None, payload, started);
    emit(&Some(out_dir.join(format!("criterion{idx}.json"))), &rep)?;
    println!("criterion {idx}: {} ({description})", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn reproduce_all(out_dir: &Path, cutoff: usize, seed: u64) -> Result<i32> {
    std::fs::create_dir_all(out_dir)?;
    let mut all = true;

    // 1: kernel exactness on the 5-dimensional model
    let t0 = Instant::now();
    let m5 = FoliatedTorusModel::product(2, 1, 1.0, cutoff);
    let rep = suite::kernel_check(&m5, 100, seed);
    all &= criterion_report(
        out_dir,
        1,
        "kernel exactness, Stokes, adjointness",
        rep.passes(),
        serde_json::to_value(&rep)?,
        t0,
    )?;

    // 2: degree metric-independence
    let t0 = Instant::now();
    let m3 = FoliatedTorusModel::product(1, 1, 1.0, 4);
    let dev = suite::degree_independence(&m3, 50, seed);
    all &= criterion_report(
        out_dir,
        2,
        "degree independent of the transverse metric",
        dev < 1e-10,
        json!({"trials": 50, "max_deviation": dev}),
        t0,
    )?;

    // 3: Einstein factor on the c = 1 line
    let t0 = Instant::now();
    let line = suite::einstein_line_check(cutoff)?;
    all &= criterion_report(
        out_dir,
        3,
        "Einstein factor 2π on the unit-volume c=1 line",
        line.verdict == Verdict::Converged && line.sup_deviation < 1e-8,
        serde_json::to_value(&line)?,
        t0,
    )?;

    // 4-6: the dichotomy battery, its a-priori estimates, its destabilizers
    let t0 = Instant::now();
    let mb = FoliatedTorusModel::product(1, 1, 1.0, cutoff);
    let battery = suite::dichotomy_battery(&mb);
    let opts = SolveOptions::default();
    let mut outcomes = Vec::new();
    for (name, bundle) in &battery {
        outcomes.push((bundle, suite::run_dichotomy_case(name, bundle, &opts)?));
    }
    let agree = outcomes.iter().filter(|(_, o)| o.agree).count();
    all &= criterion_report(
        out_dir,
        4,
        "solver/stability dichotomy on the 8-bundle battery",
        agree == outcomes.len(),
        json!({
            "cases": outcomes.iter().map(|(_, o)| json!({
                "name": o.name,
                "rank": o.rank,
                "slope": o.slope,
                "polystable": o.stability.polystable,
                "expected": o.expected.to_string(),
                "solver": o.solver.to_string(),
                "agree": o.agree,
            })).collect::<Vec<_>>(),
            "agreeing": agree,
        }),
        t0,
    )?;

    let t0 = Instant::now();
    let mut est = f64::NEG_INFINITY;
    let mut mean = f64::NEG_INFINITY;
    for (_, o) in &outcomes {
        for st in &o.trace.steps {
            est = est.max(st.estimate_violation);
            mean = mean.max(st.mean_bound_violation);
        }
    }
    all &= criterion_report(
        out_dir,
        5,
        "a-priori bounds on log f along every continuity path",
        est <= 1e-8 && mean <= 1e-6,
        json!({"max_pointwise_estimate_violation": est, "max_mean_bound_violation": mean}),
        t0,
    )?;

    let t0 = Instant::now();
    let mut destab_ok = true;
    let mut blocks = Vec::new();
    for (bundle, o) in &outcomes {
        if o.solver != Verdict::Blowup {
            continue;
        }
        match &o.destabilizer {
            None => destab_ok = false,
            Some(d) => {
                let ok = d.projection_residual < 1e-6
                    && (d.rank_trace - d.rank as f64).abs() < 1e-3
                    && d.weak_holomorphy_residual < 1e-4
                    && d.slope >= bundle.slope() - 1e-6;
                destab_ok &= ok;
                let mut v = serde_json::to_value(d)?;
                v["name"] = json!(o.name);
                v["ok"] = json!(ok);
                blocks.push(v);
            }
        }
    }
    all &= criterion_report(
        out_dir,
        6,
        "destabilizing projections from every blown-up path",
        destab_ok,
        json!({"destabilizers": blocks}),
        t0,
    )?;

    // 7: Harder-Narasimhan chain on L(2)⊕L(1)⊕L(0) and shuffles
    let t0 = Instant::now();
    let mhn = FoliatedTorusModel::product(1, 1, 1.0, 3);
    let perms: [[i64; 3]; 6] = [
        [2, 1, 0],
        [2, 0, 1],
        [1, 2, 0],
        [1, 0, 2],
        [0, 2, 1],
        [0, 1, 2],
    ];
    let mut hn_ok = true;
    let mut tables = Vec::new();
    for perm in &perms {
        let b = BundleSpec::new(
            &mhn,
            perm.iter()
                .map(|&c| folhe_core::bundle::LineFactor::new(vec![c]))
                .collect(),
            vec![],
        )
        .map_err(|e| anyhow!("{e}"))?;
        let layers = harder_narasimhan(&b);
        let slopes: Vec<f64> = layers.iter().map(|l| l.slope).collect();
        let ok = slopes.len() == 3
            && (slopes[0] - 2.0).abs() < 1e-9
            && (slopes[1] - 1.0).abs() < 1e-9
            && slopes[2].abs() < 1e-9;
        hn_ok &= ok;
        tables.push(json!({"order": perm, "slopes": slopes, "ok": ok}));
    }
    all &= criterion_report(
        out_dir,
        7,
        "HN slope chain 2 > 1 > 0, permutation-invariant",
        hn_ok,
        json!({"cases": tables}),
        t0,
    )?;

    // 8: T³ moduli certificate plus the compact control case
    let t0 = Instant::now();
    let xi = parse_xi("1,sqrt2,sqrt3").map_err(|e| anyhow!("{e}"))?;
    let cert = noncompactness_certificate(&xi, 10).map_err(|e| anyhow!("{e}"))?;
    let regular = parse_xi("0,0,1").map_err(|e| anyhow!("{e}"))?;
    let control = TransverseModuli::new(regular).map_err(|e| anyhow!("{e}"))?;
    let ok8 = cert.valid && control.is_compact();
    all &= criterion_report(
        out_dir,
        8,
        "exact non-compactness certificate and compact control case",
        ok8,
        json!({
            "certificate": serde_json::to_value(&cert)?,
            "control_lattice_rank": control.lattice_rank(),
            "control_compact": control.is_compact(),
        }),
        t0,
    )?;

    // 9: Ω-instanton on T⁴×S¹
    let t0 = Instant::now();
    let m4 = FoliatedTorusModel::product(2, 1, 1.0, 3);
    let b9 = BundleSpec::new(
        &m4,
        vec![
            folhe_core::bundle::LineFactor::new(vec![1, -1]),
            folhe_core::bundle::LineFactor::new(vec![-1, 1]),
        ],
        vec![],
    )
    .map_err(|e| anyhow!("{e}"))?;
    let trace9 = trace_path(&b9, &SolveOptions::default())?;
    let inst = instanton_residual(&b9, &trace9.final_s);
    let ym = yang_mills_residual(&b9, &trace9.final_s);
    all &= criterion_report(
        out_dir,
        9,
        "trace-free HE solution is an Ω-instanton and Yang-Mills",
        trace9.verdict == Verdict::Converged && inst < 1e-8 && ym < 1e-8,
        json!({
            "solver_verdict": trace9.verdict.to_string(),
            "instanton_residual": inst,
            "yang_mills_residual": ym,
        }),
        t0,
    )?;

    // 10: Bogomolov inequality endpoints
    let t0 = Instant::now();
    let flat = BundleSpec::new(
        &m4,
        vec![
            folhe_core::bundle::LineFactor::new(vec![1, 1]),
            folhe_core::bundle::LineFactor::new(vec![1, 1]),
        ],
        vec![],
    )
    .map_err(|e| anyhow!("{e}"))?;
    let split = BundleSpec::new(
        &m4,
        vec![
            folhe_core::bundle::LineFactor::new(vec![1, 0]),
            folhe_core::bundle::LineFactor::new(vec![0, 1]),
        ],
        vec![],
    )
    .map_err(|e| anyhow!("{e}"))?;
    let flat_val = flat.bogomolov_integral().map_err(|e| anyhow!("{e}"))?;
    let split_val = split.bogomolov_integral().map_err(|e| anyhow!("{e}"))?;
    let closed_form = 2.0 * m4.leaf_volume;
    let ok10 = flat_val.abs() < 1e-10 && (split_val - closed_form).abs() < 1e-9 && split_val > 0.0;
    all &= criterion_report(
        out_dir,
        10,
        "Bogomolov number: zero iff projectively flat, closed form on the split example",
        ok10,
        json!({
            "projectively_flat_value": flat_val,
            "split_value": split_val,
            "split_closed_form": closed_form,
        }),
        t0,
    )?;

    Ok(if all { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// SVG plotting of per-ε histories

fn plot(report_path: &Path, out: &Path, y_field: &str) -> Result<i32> {
    let text = std::fs::read_to_string(report_path)?;
    let v: Value = serde_json::from_str(&text)?;
    let steps = v
        .pointer("/result/steps")
        .and_then(Value::as_array)
        .ok_or_else(|| anyhow!("report has no result.steps table"))?;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for s in steps {
        let eps = s["eps"].as_f64().ok_or_else(|| anyhow!("step without eps"))?;
        let y = s[y_field]
            .as_f64()
            .ok_or_else(|| anyhow!("step without field '{y_field}'"))?;
        pts.push((-eps.log10(), y));
    }
    if pts.is_empty() {
        bail!("empty history");
    }
    let (w, h, margin) = (640.0, 420.0, 50.0);
    let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let xs = |x: f64| margin + (x - xmin) / (xmax - xmin).max(1e-300) * (w - 2.0 * margin);
    let ys = |y: f64| h - margin - (y - ymin) / (ymax - ymin).max(1e-300) * (h - 2.0 * margin);
    let poly: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", xs(p.0), ys(p.1))).collect();
    let svg = format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<line x1=\"{m}\" y1=\"{hm}\" x2=\"{wm}\" y2=\"{hm}\" stroke=\"black\"/>\n",
            "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{hm}\" stroke=\"black\"/>\n",
            "<polyline points=\"{pts}\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\"/>\n",
            "<text x=\"{wc}\" y=\"{hl}\" font-size=\"12\" text-anchor=\"middle\">log10(1/eps)  [{x0:.2} .. {x1:.2}]</text>\n",
            "<text x=\"12\" y=\"{vc}\" font-size=\"12\" transform=\"rotate(-90 12 {vc})\" text-anchor=\"middle\">{yf}  [{y0:.3e} .. {y1:.3e}]</text>\n",
            "</svg>\n"
        ),
        w = w,
        h = h,
        m = margin,
        hm = h - margin,
        wm = w - margin,
        pts = poly.join(" "),
        wc = w / 2.0,
        hl = h - margin / 3.0,
        vc = h / 2.0,
        yf = y_field,
        x0 = xmin,
        x1 = xmax,
        y0 = ymin,
        y1 = ymax,
    );
    std::fs::write(out, svg).with_context(|| format!("writing {out:?}"))?;
    println!("plot: wrote {}", out.display());
    Ok(0)
}
