use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use mnr::baselines::{desparsified_lasso, DebiasedResult};
use mnr::bench::{check_bands, emit_report, run_experiment, ExperimentConfig, ReportFormat};
use mnr::datagen::{
    parse_beta_spec, CovKind, CovSpec, Dataset, Family, FamilySpec, Generator, GeneratorSpec,
    ModelSpec,
};
use mnr::mnr::{adjust_pvalues, run_causal, run_mnr, Adjustment, MnrConfig, MnrReport};

use crate::data::{write_dataset, write_file, CsvTable};
use crate::error::CliError;
use crate::{BenchArgs, CausalArgs, Design, InferArgs, Method, SimulateArgs};

const TOP_FEATURES: usize = 10;

fn usage<E: std::fmt::Display>(flag: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Usage(format!("{flag}: {e}"))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(value).expect("json value serializes");
    write_file(path, s.as_bytes())
}

fn manifest(command: &str, body: serde_json::Value) -> serde_json::Value {
    json!({
        "tool": "mnr",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "resolved": body,
    })
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let rho = || {
        a.rho
            .ok_or_else(|| CliError::Usage("--rho is required for this design".into()))
    };
    let kind = match a.design {
        Design::Toeplitz => CovKind::Toeplitz { rho: rho()? },
        Design::Equicorr => CovKind::Equicorr { rho: rho()? },
        Design::Ar2 => CovKind::Ar2Precision,
    };
    let cov = CovSpec::new(kind, a.p).map_err(usage("--design/--rho/--p"))?;
    let family = match a.family {
        Family::Gaussian => FamilySpec::Gaussian { sigma2: a.sigma2 },
        Family::Binomial => FamilySpec::Binomial,
        Family::Cox => FamilySpec::Cox {
            lambda0: a.lambda0,
            lambda_c: a.lambda_c,
        },
    };
    let beta = parse_beta_spec(&a.beta, a.p).map_err(usage("--beta"))?;
    let model = ModelSpec::new(family, a.intercept, beta).map_err(usage("model flags"))?;
    let spec = GeneratorSpec { cov, n: a.n };
    let gen = Generator::new(&spec, &model).map_err(usage("--n"))?;
    let ds = gen.generate(a.seed)?;

    write_dataset(&a.out, &ds)?;
    let sidecar = a.out.with_extension("model.json");
    write_json(
        &sidecar,
        &manifest(
            "simulate",
            json!({
                "generator": spec,
                "model": model,
                "beta_spec": a.beta,
                "active": model.active_set().iter().map(|j| j + 1).collect::<Vec<_>>(),
                "seed": a.seed,
            }),
        ),
    )?;
    println!(
        "wrote {} (n = {}, p = {}) and {}",
        a.out.display(),
        ds.n(),
        ds.p(),
        sidecar.display()
    );
    Ok(())
}

fn load(a: &InferArgs) -> Result<Dataset, CliError> {
    let table = CsvTable::read(&a.data)?;
    table.into_dataset(&a.response, a.event.as_deref(), a.family)
}

fn mnr_config(a: &InferArgs, alpha: Option<f64>) -> Result<MnrConfig, CliError> {
    let mut cfg = match a.method {
        Method::MnrScreen => MnrConfig::screening(),
        _ => MnrConfig::default(),
    };
    cfg.level = a.level;
    if let Some(alpha) = alpha {
        cfg.alpha = alpha;
    }
    if let Some(s) = a.selection {
        cfg.selection = s;
    }
    if let Some(b) = a.blanket {
        cfg.blanket = b;
    }
    cfg.validate().map_err(usage("--level/--alpha"))?;
    Ok(cfg)
}

fn args_json(a: &InferArgs) -> serde_json::Value {
    json!({
        "data": a.data,
        "response": a.response,
        "event": a.event,
        "family": a.family,
        "method": format!("{:?}", a.method).to_lowercase(),
        "level": a.level,
        "seed": a.seed,
    })
}

fn output_paths(out: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (
        out.with_extension("csv"),
        out.with_extension("json"),
        out.with_extension("manifest.json"),
    )
}

fn fmt_p(p: f64) -> String {
    if p == 0.0 {
        "0".to_string()
    } else if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

fn print_top(names: &[String], rows: &[(usize, f64, f64, f64, f64, f64)]) {
    // a closed pipe (e.g. `| head`) is not an error for a summary
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "{:<4} {:<16} {:>10} {:>22} {:>10} {:>10}",
        "rank", "feature", "estimate", "interval", "p", "p_holm"
    );
    for (rank, &(j, b, lo, hi, p, q)) in rows.iter().take(TOP_FEATURES).enumerate() {
        let _ = writeln!(
            out,
            "{:<4} {:<16} {:>10.4} {:>22} {:>10} {:>10}",
            rank + 1,
            names[j],
            b,
            format!("[{lo:.4}, {hi:.4}]"),
            fmt_p(p),
            fmt_p(q)
        );
    }
}

fn report_failures(rep: &MnrReport) -> Result<(), CliError> {
    for f in &rep.failures {
        log::warn!(
            "feature {} ({}): {}",
            f.feature + 1,
            rep.names[f.feature],
            f.error
        );
    }
    if rep.records.is_empty() {
        if let Some(f) = rep.failures.first() {
            let msg = format!(
                "no feature could be assessed; first failure at feature {} ({}): {}",
                f.feature + 1,
                rep.names[f.feature],
                f.error
            );
            return Err(if f.numerical {
                CliError::Numeric(msg)
            } else {
                CliError::Data(msg)
            });
        }
    }
    Ok(())
}

fn emit_mnr(
    a: &InferArgs,
    cfg: &MnrConfig,
    rep: &MnrReport,
    command: &str,
) -> Result<(), CliError> {
    let (csv, js, man) = output_paths(&a.out);
    write_file(&csv, rep.to_csv().as_bytes())?;
    write_file(&js, rep.to_json().as_bytes())?;
    write_json(
        &man,
        &manifest(command, json!({ "args": args_json(a), "config": cfg })),
    )?;
    let rows: Vec<_> = rep
        .ranked()
        .into_iter()
        .map(|i| {
            let r = &rep.records[i];
            (
                r.feature,
                r.beta_hat,
                r.ci_low,
                r.ci_high,
                r.p_value,
                rep.p_holm[i],
            )
        })
        .collect();
    print_top(&rep.names, &rows);
    report_failures(rep)
}

fn emit_debiased(a: &InferArgs, res: &DebiasedResult) -> Result<(), CliError> {
    let (csv, js, man) = output_paths(&a.out);
    write_file(&csv, res.to_csv().as_bytes())?;
    write_file(&js, res.to_json().as_bytes())?;
    write_json(&man, &manifest("infer", json!({ "args": args_json(a) })))?;
    let recs = res.records();
    let p: Vec<f64> = recs.iter().map(|r| r.p_value).collect();
    let holm = adjust_pvalues(&p, Adjustment::Holm)?;
    let mut idx: Vec<usize> = (0..recs.len()).collect();
    idx.sort_by(|&x, &y| {
        holm[x]
            .total_cmp(&holm[y])
            .then(p[x].total_cmp(&p[y]))
            .then(x.cmp(&y))
    });
    let rows: Vec<_> = idx
        .into_iter()
        .map(|i| {
            let r = &recs[i];
            (
                r.feature, r.beta_hat, r.ci_low, r.ci_high, r.p_value, holm[i],
            )
        })
        .collect();
    print_top(&res.names, &rows);
    for &j in &res.flagged {
        log::warn!(
            "feature {} ({}): degenerate projection, no interval",
            j + 1,
            res.names[j]
        );
    }
    Ok(())
}

pub fn infer(a: &InferArgs) -> Result<(), CliError> {
    if a.method == Method::Desparsified {
        if a.family != Family::Gaussian {
            return Err(CliError::Usage(
                "--method desparsified needs --family gaussian".into(),
            ));
        }
        if !(a.level > 0.0 && a.level < 1.0) {
            return Err(CliError::Usage(format!(
                "--level {} outside (0, 1)",
                a.level
            )));
        }
        let ds = load(a)?;
        let res = desparsified_lasso(&ds, a.level)?;
        return emit_debiased(a, &res);
    }
    let cfg = mnr_config(a, None)?;
    let ds = load(a)?;
    let rep = run_mnr(&ds, &cfg)?;
    emit_mnr(a, &cfg, &rep, "infer")
}

pub fn causal(a: &CausalArgs) -> Result<(), CliError> {
    if a.infer.method == Method::Desparsified {
        return Err(CliError::Usage(
            "causal mode needs --method mnr or mnr-screen".into(),
        ));
    }
    let cfg = mnr_config(&a.infer, Some(a.alpha))?;
    let ds = load(&a.infer)?;
    let rep = run_causal(&ds, &cfg)?;
    emit_mnr(&a.infer, &cfg, &rep, "causal")?;
    let selected: Vec<&str> = rep
        .selected_causal
        .iter()
        .flatten()
        .map(|&j| rep.names[j].as_str())
        .collect();
    println!("selected at Holm {}: {}", a.alpha, selected.join(", "));
    if rep.causal_fallback {
        println!("no feature passed the threshold; reporting the smallest p-value (fallback)");
    }
    Ok(())
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn bench(a: &BenchArgs) -> Result<(), CliError> {
    let mut failed = 0;
    for path in &a.config {
        let text = std::fs::read_to_string(path)
            .map_err(CliError::io(format!("cannot read {}", path.display())))?;
        let mut cfg = ExperimentConfig::from_json(&text)
            .map_err(|e| CliError::from(e).with_context(&path.display().to_string()))?;
        if a.desk {
            cfg = cfg.desk_scaled();
        }
        if let Some(seed) = a.seed {
            cfg.seed = seed;
        }
        if let Some(r) = a.replicates {
            cfg.replicates = r;
        }
        cfg.validate()?;

        let start = Instant::now();
        let table = run_experiment(&cfg)?;
        if a.timing {
            eprintln!("{}: {:.2} s", cfg.name, start.elapsed().as_secs_f64());
        }
        let stem = path
            .file_stem()
            .map_or_else(|| file_stem(&cfg.name), |s| file_stem(&s.to_string_lossy()));
        for fmt in [
            ReportFormat::Csv,
            ReportFormat::Json,
            ReportFormat::Markdown,
        ] {
            let out = a.out.join(format!("{stem}.{}", fmt.extension()));
            write_file(&out, &emit_report(&table, fmt))?;
        }
        write_json(
            &a.out.join(format!("{stem}.manifest.json")),
            &manifest(
                "bench",
                json!({ "config_file": path, "desk": a.desk, "config": cfg }),
            ),
        )?;

        println!(
            "{}: {} ({} of {} replicates completed)",
            cfg.name, table.method, table.completed, table.replicates
        );
        for check in check_bands(&table, &cfg.bands) {
            println!("  {check}");
            failed += usize::from(!check.pass);
        }
    }
    if failed > 0 {
        return Err(CliError::Bands { failed });
    }
    Ok(())
}
