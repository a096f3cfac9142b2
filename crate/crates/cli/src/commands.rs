use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use pals_core::analysis::{
    energy_line_search, extract_anomaly, fit_lifetime, AnomalyEstimate, FitModelSpec, FitResult,
    LineSearchResult, LineWindow,
};
use pals_core::config::{load_config, load_fit_model_str, Config, LoadedConfig};
use pals_core::detection::random_to_true_ratio;
use pals_core::io::{
    energy_csv, read_spectrum_csv, sha256_hex, spectrum_csv, write_atomic, write_json,
};
use pals_core::mcnrs::{full_report, McnrsReport};
use pals_core::montecarlo::{simulate_spectrum, TimeEnergyHistogram};
use pals_core::{Error, Profile, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::manifest::RunManifest;
use crate::{Cli, Command, FitArgs, Format, ReplicaArgs, ReportArgs, SimulateArgs};

pub fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Estimate => estimate(cli),
        Command::Simulate(a) => simulate(cli, a),
        Command::Fit(a) => fit(cli, a),
        Command::Replicas(a) => replicas(cli, a),
        Command::Report(a) => report(cli, a),
    }
}

/// Loads the configuration with `--profile`, `--seed` and `extra` applied on
/// top of the `--set` overrides.
fn load(cli: &Cli, extra: &[String]) -> Result<LoadedConfig> {
    let g = &cli.global;
    let mut overrides = g.set.clone();
    if let Some(p) = g.profile {
        overrides.push(format!("profile=\"{}\"", Profile::from(p).name()));
    }
    if let Some(seed) = g.seed {
        overrides.push(format!("simulation.seed={seed}"));
    }
    overrides.extend_from_slice(extra);
    load_config(g.config.as_deref(), &overrides)
}

fn out_path(cli: &Cli, p: &Path) -> PathBuf {
    cli.global.out_dir.join(p)
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn print_json(v: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("json value serializes")
    );
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_value(x: f64) -> String {
    if x == 0.0 || (1e-2..1e4).contains(&x.abs()) {
        format!("{}", round_sig(x, 5))
    } else {
        format!("{x:.4e}")
    }
}

fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

// ---------------------------------------------------------------- estimate

struct EstimateTable {
    selected: Profile,
    other: Profile,
    main: McnrsReport,
    comparison: McnrsReport,
    random_to_true: f64,
}

fn other_profile(p: Profile) -> Profile {
    match p {
        Profile::Paper => Profile::Codata,
        Profile::Codata => Profile::Paper,
    }
}

fn estimate_table(config: &Config) -> Result<EstimateTable> {
    let selected = config.profile;
    let other = other_profile(selected);
    let energy = config.source.nuclear_gamma_energy_mev;
    let main = full_report(&config.gas, &selected.constants(), &config.mcnrs, energy)?;
    let comparison = full_report(&config.gas, &other.constants(), &config.mcnrs, energy)?;
    Ok(EstimateTable {
        selected,
        other,
        main,
        comparison,
        random_to_true: random_to_true_ratio(&config.source, &config.detector),
    })
}

const RANDOM_TO_TRUE_FORMULA: &str = "R/C = Q dtau (2 + eps_high Omega_high / (eps_low Omega_low))";

fn estimate_rows(t: &EstimateTable) -> Vec<[String; 5]> {
    let units = McnrsReport::units();
    let formulas = McnrsReport::provenance();
    let mut rows: Vec<[String; 5]> = t
        .main
        .headline()
        .into_iter()
        .zip(t.comparison.headline())
        .map(|((name, v), (_, w))| {
            [
                name.to_string(),
                fmt_value(v),
                fmt_value(w),
                units[name].to_string(),
                formulas[name].to_string(),
            ]
        })
        .collect();
    rows.push([
        "random_to_true".into(),
        fmt_value(t.random_to_true),
        fmt_value(t.random_to_true),
        "dimensionless".into(),
        RANDOM_TO_TRUE_FORMULA.into(),
    ]);
    rows
}

fn estimate_text(t: &EstimateTable) -> String {
    let header = [
        "quantity".to_string(),
        t.selected.name().to_string(),
        t.other.name().to_string(),
        "unit".to_string(),
        "formula".to_string(),
    ];
    let rows = estimate_rows(t);
    let mut widths = header.clone().map(|h| h.len());
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, r: &[String; 5]| {
        let _ = writeln!(
            out,
            "{:<w0$}  {:>w1$}  {:>w2$}  {:<w3$}  {}",
            r[0],
            r[1],
            r[2],
            r[3],
            r[4],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        );
    };
    line(&mut out, &header);
    for r in &rows {
        line(&mut out, r);
    }
    let d = &t.main.details;
    let _ = writeln!(
        out,
        "\nn_bar = {}, eta = {}, Delta forms differ by {:.3e} (relative); amplified branching is {:.0}x the prior single-photon limit",
        fmt_value(d.n_bar),
        fmt_value(d.eta),
        d.delta_relative_difference,
        d.ratio_to_prior_limit
    );
    out
}

fn estimate_json(t: &EstimateTable) -> Value {
    let mut v = to_json(&t.main);
    let obj = v.as_object_mut().expect("report is an object");
    obj.insert("profile".into(), json!(t.selected.name()));
    obj.insert("units".into(), to_json(&McnrsReport::units()));
    obj.insert("provenance".into(), to_json(&McnrsReport::provenance()));
    obj.insert("random_to_true".into(), json!(t.random_to_true));
    obj.insert(
        "comparison".into(),
        json!({ "profile": t.other.name(), "report": to_json(&t.comparison) }),
    );
    v
}

fn estimate_csv(t: &EstimateTable) -> String {
    let mut out = format!(
        "quantity,{},{},unit,formula\n",
        t.selected.name(),
        t.other.name()
    );
    for r in estimate_rows(t) {
        let cells: Vec<String> = r.iter().map(|c| csv_field(c)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn estimate(cli: &Cli) -> Result<ExitCode> {
    let loaded = load(cli, &[])?;
    let t = estimate_table(&loaded.config)?;
    match cli.global.format {
        Format::Text => print!("{}", estimate_text(&t)),
        Format::Json => print_json(&estimate_json(&t)),
        Format::Csv => print!("{}", estimate_csv(&t)),
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- simulate

fn simulate_config(cli: &Cli, events: Option<u64>) -> Result<LoadedConfig> {
    let extra: Vec<String> = events
        .map(|n| format!("simulation.events={n}"))
        .into_iter()
        .collect();
    load(cli, &extra)
}

fn run_simulation(loaded: &LoadedConfig) -> Result<TimeEnergyHistogram> {
    let c = &loaded.config;
    let mut hist = simulate_spectrum(&c.model, &c.detector, &c.source, &c.simulation)?;
    hist.metadata.config_hash = Some(loaded.hash.clone());
    Ok(hist)
}

fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("spectrum");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Writes the spectrum CSV, one energy CSV per delay window and the JSON sidecar.
fn write_spectrum_artifacts(
    loaded: &LoadedConfig,
    hist: &TimeEnergyHistogram,
    manifest: &mut RunManifest,
    path: &Path,
) -> Result<()> {
    let m = &hist.metadata;
    let mut header = manifest.csv_header();
    header.extend([
        ("seed".to_string(), m.seed.to_string()),
        ("n_true".to_string(), m.n_true.to_string()),
        ("n_random".to_string(), m.n_random.to_string()),
        ("n_discarded".to_string(), m.n_discarded.to_string()),
        ("random_to_true".to_string(), m.random_to_true.to_string()),
        ("rng".to_string(), m.rng.clone()),
    ]);
    write_atomic(path, spectrum_csv(hist, &header).as_bytes())?;
    manifest.record(path);
    for spectrum in &hist.energy_by_window {
        let p = sibling(path, &format!("_energy_{}", spectrum.window.name), "csv");
        write_atomic(
            &p,
            energy_csv(spectrum, &hist.energy_axis, &header).as_bytes(),
        )?;
        manifest.record(&p);
    }
    let sidecar = sibling(path, "", "json");
    manifest.record(&sidecar);
    manifest.finish();
    write_json(
        &sidecar,
        &json!({
            "manifest": manifest,
            "metadata": m,
            "config_echo": loaded.echo,
            "defaulted_keys": loaded.defaulted,
        }),
    )
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<ExitCode> {
    let loaded = simulate_config(cli, a.events)?;
    let sim = &loaded.config.simulation;
    let mut manifest = RunManifest::start(
        format!("simulate events={}", sim.events),
        &loaded.hash,
        vec![sim.seed],
    );
    let hist = run_simulation(&loaded)?;
    let path = out_path(cli, &a.out);
    write_spectrum_artifacts(&loaded, &hist, &mut manifest, &path)?;
    let m = &hist.metadata;
    match cli.global.format {
        Format::Json => print_json(&json!({ "manifest": manifest, "metadata": m })),
        Format::Csv => {
            println!("file,digest,seed,n_true,n_random");
            println!(
                "{},{},{},{},{}",
                csv_field(&path.display().to_string()),
                manifest.digest,
                m.seed,
                m.n_true,
                m.n_random
            );
        }
        Format::Text => {
            println!(
                "wrote {} ({} true, {} random, seed {})",
                path.display(),
                m.n_true,
                m.n_random,
                m.seed
            );
            for w in &m.warnings {
                println!("warning: {w}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- fit

fn fit_spec(loaded: &LoadedConfig, model: Option<&Path>) -> Result<(FitModelSpec, String)> {
    match model {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.to_path_buf(),
                source,
            })?;
            let spec = load_fit_model_str(&text, &loaded.config.detector)?;
            let hash = sha256_hex(
                serde_json::to_string(&spec)
                    .expect("spec serializes")
                    .as_bytes(),
            );
            Ok((spec, hash))
        }
        None => Ok((loaded.config.fit.clone(), "config".into())),
    }
}

fn anomaly_json(fit: &FitResult, loaded: &LoadedConfig) -> (Option<AnomalyEstimate>, Value) {
    match extract_anomaly(fit, &loaded.config.constants()) {
        Ok(a) => {
            let v = json!({ "anomaly": a });
            (Some(a), v)
        }
        Err(e) => (None, json!({ "anomaly_error": e.to_string() })),
    }
}

fn fit_summary(fit: &FitResult, anomaly: Option<&AnomalyEstimate>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "converged: {} after {} iterations; deviance {:.2} for {} dof",
        fit.converged, fit.iterations, fit.chi2, fit.dof
    );
    for (i, c) in fit.components.iter().enumerate() {
        let sig = |e: pals_core::analysis::Estimate| {
            e.sigma
                .map(|s| format!(" ± {}", fmt_value(s)))
                .unwrap_or_default()
        };
        let _ = writeln!(
            out,
            "component {i}: rate {}{} 1/ns, lifetime {}{} ns, intensity {}{}{}",
            fmt_value(c.rate_per_ns.value),
            sig(c.rate_per_ns),
            fmt_value(c.lifetime_ns.value),
            sig(c.lifetime_ns),
            fmt_value(c.intensity.value),
            sig(c.intensity),
            if c.rate_fixed { " (rate fixed)" } else { "" }
        );
    }
    let b = fit.background_per_bin;
    let _ = writeln!(
        out,
        "background: {}{} counts/bin",
        fmt_value(b.value),
        b.sigma
            .map(|s| format!(" ± {}", fmt_value(s)))
            .unwrap_or_default()
    );
    if let Some(a) = anomaly {
        let _ = writeln!(
            out,
            "o-Ps rate {:.5} ± {:.5} 1/us vs theory {:.5}: anomaly fraction {:.3e} ± {:.1e}, {} reference band [{:.5}, {:.5}]",
            a.lambda_obs_per_us,
            a.lambda_obs_sigma_per_us,
            a.lambda_theor_per_us,
            a.fraction,
            a.sigma,
            if a.compatible { "inside" } else { "outside" },
            a.compatible_interval[0],
            a.compatible_interval[1]
        );
    }
    for d in &fit.diagnostics {
        let _ = writeln!(out, "note: {d}");
    }
    out
}

fn fit_exit(fit: &FitResult) -> ExitCode {
    if fit.converged {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: fit did not converge; see diagnostics");
        ExitCode::from(2)
    }
}

fn fit(cli: &Cli, a: &FitArgs) -> Result<ExitCode> {
    let loaded = load(cli, &[])?;
    let bytes = std::fs::read(&a.input).map_err(|source| Error::Io {
        path: a.input.clone(),
        source,
    })?;
    let file = read_spectrum_csv(&a.input)?;
    let (spec, spec_hash) = fit_spec(&loaded, a.model.as_deref())?;
    let mut manifest = RunManifest::start(
        format!(
            "fit spectrum_sha256={} model={spec_hash}",
            sha256_hex(&bytes)
        ),
        &loaded.hash,
        vec![file.hist.metadata.seed],
    );
    let result = fit_lifetime(&file.hist, &spec)?;
    let (anomaly, mut doc) = anomaly_json(&result, &loaded);
    let path = out_path(cli, &a.out);
    manifest.record(&path);
    manifest.finish();
    let obj = doc.as_object_mut().expect("object");
    obj.insert("manifest".into(), to_json(&manifest));
    obj.insert("model".into(), to_json(&spec));
    obj.insert("spectrum_header".into(), to_json(&file.header));
    obj.insert("fit".into(), to_json(&result));
    write_json(&path, &doc)?;
    match cli.global.format {
        Format::Json => print_json(&doc),
        Format::Csv => {
            println!("component,rate_per_ns,rate_sigma_per_ns,lifetime_ns,intensity");
            for (i, c) in result.components.iter().enumerate() {
                println!(
                    "{i},{},{},{},{}",
                    c.rate_per_ns.value,
                    c.rate_per_ns
                        .sigma
                        .map(|s| s.to_string())
                        .unwrap_or_default(),
                    c.lifetime_ns.value,
                    c.intensity.value
                );
            }
        }
        Format::Text => print!("{}", fit_summary(&result, anomaly.as_ref())),
    }
    Ok(fit_exit(&result))
}

// ---------------------------------------------------------------- replicas

#[derive(Debug, Clone, Serialize)]
struct ReplicaRow {
    seed: u64,
    rate_per_ns: f64,
    sigma_per_ns: f64,
    pull: f64,
    converged: bool,
}

#[derive(Debug, Clone, Serialize)]
struct PullSummary {
    replicas: usize,
    used: usize,
    truth_rate_per_ns: f64,
    pull_mean: f64,
    pull_sd: f64,
    mean_sigma_per_ns: f64,
}

fn one_replica(loaded: &LoadedConfig, seed: u64, truth: f64) -> Result<ReplicaRow> {
    let c = &loaded.config;
    let mut sim = c.simulation.clone();
    sim.seed = seed;
    let hist = simulate_spectrum(&c.model, &c.detector, &c.source, &sim)?;
    let fit = fit_lifetime(&hist, &c.fit)?;
    // o-Ps is the longest-lived component in the accepted range
    let idx = extract_anomaly(&fit, &c.constants())
        .map(|a| a.component)
        .ok();
    let (rate, sigma) = match idx {
        Some(i) => {
            let r = fit.components[i].rate_per_ns;
            (r.value, r.sigma.unwrap_or(f64::NAN))
        }
        None => (f64::NAN, f64::NAN),
    };
    Ok(ReplicaRow {
        seed,
        rate_per_ns: rate,
        sigma_per_ns: sigma,
        pull: (rate - truth) / sigma,
        converged: fit.converged && idx.is_some(),
    })
}

fn summarize(rows: &[ReplicaRow], truth: f64) -> PullSummary {
    let used: Vec<&ReplicaRow> = rows
        .iter()
        .filter(|r| r.converged && r.pull.is_finite())
        .collect();
    let n = used.len() as f64;
    let mean = used.iter().map(|r| r.pull).sum::<f64>() / n;
    let var = used.iter().map(|r| (r.pull - mean).powi(2)).sum::<f64>() / (n - 1.0);
    PullSummary {
        replicas: rows.len(),
        used: used.len(),
        truth_rate_per_ns: truth,
        pull_mean: mean,
        pull_sd: var.sqrt(),
        mean_sigma_per_ns: used.iter().map(|r| r.sigma_per_ns).sum::<f64>() / n,
    }
}

fn replicas(cli: &Cli, a: &ReplicaArgs) -> Result<ExitCode> {
    if a.replicas == 0 {
        return Err(Error::Validation {
            field: "--replicas".into(),
            message: "must be at least 1".into(),
        });
    }
    let loaded = simulate_config(cli, a.events)?;
    let base = loaded.config.simulation.seed;
    let seeds: Vec<u64> = (0..a.replicas).map(|i| base.wrapping_add(i)).collect();
    let truth = loaded.config.model.rate_ortho_observed_per_ns();
    let mut manifest = RunManifest::start(
        format!(
            "replicas n={} events={}",
            a.replicas, loaded.config.simulation.events
        ),
        &loaded.hash,
        seeds.clone(),
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.workers)
        .build()
        .map_err(|e| Error::Analysis(format!("cannot build worker pool: {e}")))?;
    let rows: Vec<ReplicaRow> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| one_replica(&loaded, s, truth))
            .collect::<Result<_>>()
    })?;
    let summary = summarize(&rows, truth);

    let path = out_path(cli, &a.out);
    let mut csv = String::new();
    for (k, v) in manifest.csv_header() {
        let _ = writeln!(csv, "# {k}: {v}");
    }
    let _ = writeln!(csv, "# truth_rate_per_ns: {truth}");
    csv.push_str("seed,rate_per_ns,sigma_per_ns,pull,converged\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.seed, r.rate_per_ns, r.sigma_per_ns, r.pull, r.converged
        );
    }
    write_atomic(&path, csv.as_bytes())?;
    manifest.record(&path);
    let summary_path = sibling(&path, "_summary", "json");
    manifest.record(&summary_path);
    manifest.finish();
    let doc = json!({ "manifest": manifest, "summary": summary, "config_echo": loaded.echo });
    write_json(&summary_path, &doc)?;
    match cli.global.format {
        Format::Json => print_json(&doc),
        Format::Csv => print!("{csv}"),
        Format::Text => println!(
            "{} of {} replicas fitted; pull mean {:.3}, sd {:.3}; wrote {}",
            summary.used,
            summary.replicas,
            summary.pull_mean,
            summary.pull_sd,
            path.display()
        ),
    }
    if summary.used == 0 {
        eprintln!("error: no replica produced a usable o-Ps rate");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- report

fn late_window(config: &Config) -> (f64, f64) {
    let sim = &config.simulation;
    sim.delay_windows
        .iter()
        .find(|w| w.name == "late")
        .map(|w| (w.t_min_ns, w.t_max_ns))
        .unwrap_or((50.0, sim.t_max_ns))
}

fn fit_curve_csv(
    hist: &TimeEnergyHistogram,
    fit: &FitResult,
    header: &[(String, String)],
) -> String {
    let axis = hist.time_axis;
    let model = fit.expected_counts(&axis);
    let [a, b] = fit.fit_window_ns;
    let mut out = String::new();
    for (k, v) in header {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out.push_str("# units: t_bin_center_ns: ns; counts, model: events per bin; residual: (counts - model)/sqrt(model)\n");
    out.push_str("t_bin_center_ns,counts,model,residual,in_fit_window\n");
    for (i, (&n, &mu)) in hist.time_counts.iter().zip(&model).enumerate() {
        let t = axis.center(i);
        let r = if mu > 0.0 {
            (n as f64 - mu) / mu.sqrt()
        } else {
            0.0
        };
        let inside = u8::from(t >= a && t < b);
        let _ = writeln!(out, "{t},{n},{mu},{r},{inside}");
    }
    out
}

fn report(cli: &Cli, a: &ReportArgs) -> Result<ExitCode> {
    let loaded = simulate_config(cli, a.events)?;
    let config = &loaded.config;
    let (hist, source_desc, mut manifest) = match &a.input {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|source| Error::Io {
                path: p.clone(),
                source,
            })?;
            let file = read_spectrum_csv(p)?;
            let seed = file.hist.metadata.seed;
            let m = RunManifest::start(
                format!("report spectrum_sha256={}", sha256_hex(&bytes)),
                &loaded.hash,
                vec![seed],
            );
            (file.hist, format!("read from {}", p.display()), m)
        }
        None => {
            let sim = &config.simulation;
            let mut m = RunManifest::start(
                format!("report events={}", sim.events),
                &loaded.hash,
                vec![sim.seed],
            );
            let hist = run_simulation(&loaded)?;
            write_spectrum_artifacts(
                &loaded,
                &hist,
                &mut m,
                &out_path(cli, Path::new("spectrum.csv")),
            )?;
            let desc = format!("simulated, {} events, seed {}", sim.events, sim.seed);
            (hist, desc, m)
        }
    };

    let table = estimate_table(config)?;
    let fit = fit_lifetime(&hist, &config.fit)?;
    let anomaly = extract_anomaly(&fit, &config.constants());
    let window = late_window(config);
    let line: Result<LineSearchResult> =
        energy_line_search(&hist, window, LineWindow::single_quantum(&config.detector));

    let curve_path = out_path(cli, Path::new("fit_curve.csv"));
    write_atomic(
        &curve_path,
        fit_curve_csv(&hist, &fit, &manifest.csv_header()).as_bytes(),
    )?;
    manifest.record(&curve_path);

    let mut text = String::new();
    let _ = writeln!(text, "pals report");
    let _ = writeln!(
        text,
        "digest: {}\nconfig_hash: {}\n",
        manifest.digest, manifest.config_hash
    );
    let _ = writeln!(
        text,
        "== collective-state estimates ==\n{}",
        estimate_text(&table)
    );
    let _ = writeln!(
        text,
        "== spectrum ==\n{source_desc}; {} counts in {} bins over [{}, {}) ns\n",
        hist.total_counts(),
        hist.time_axis.bins,
        hist.time_axis.min,
        hist.time_axis.max
    );
    let _ = writeln!(
        text,
        "== lifetime fit on [{}, {}) ns ==",
        fit.fit_window_ns[0], fit.fit_window_ns[1]
    );
    text.push_str(&fit_summary(&fit, anomaly.as_ref().ok()));
    if let Err(e) = &anomaly {
        let _ = writeln!(text, "anomaly: unavailable ({e})");
    }
    let _ = writeln!(
        text,
        "\n== 1022 keV line search, delay window [{}, {}) ns ==",
        window.0, window.1
    );
    match &line {
        Ok(l) => {
            let _ = writeln!(
                text,
                "on [{:.1}, {:.1}) keV: {} counts; sidebands {} counts, alpha {:.3}; excess {:.1} ± {:.1}; significance {:.2}",
                l.on_window_kev[0], l.on_window_kev[1], l.on_counts, l.off_counts, l.alpha, l.excess_counts, l.excess_sigma, l.significance
            );
        }
        Err(e) => {
            let _ = writeln!(text, "unavailable ({e})");
        }
    }
    let path = out_path(cli, &a.out);
    manifest.record(&path);
    let json_path = sibling(&path, "", "json");
    manifest.record(&json_path);
    manifest.finish();
    write_atomic(&path, text.as_bytes())?;
    let doc = json!({
        "manifest": manifest,
        "estimate": estimate_json(&table),
        "fit": fit,
        "anomaly": anomaly.as_ref().ok(),
        "anomaly_error": anomaly.as_ref().err().map(|e| e.to_string()),
        "line_search": line.as_ref().ok(),
        "line_search_error": line.as_ref().err().map(|e| e.to_string()),
        "config_echo": loaded.echo,
    });
    write_json(&json_path, &doc)?;
    match cli.global.format {
        Format::Json => print_json(&doc),
        Format::Csv => print!("{}", estimate_csv(&table)),
        Format::Text => print!("{text}"),
    }
    Ok(fit_exit(&fit))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_fields_are_quoted_when_needed() {
        assert_eq!(csv_field("a b"), "a b");
        assert_eq!(csv_field("x, y"), "\"x, y\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn values_keep_five_significant_digits() {
        assert_eq!(fmt_value(4750.2), "4750.2");
        assert_eq!(fmt_value(52780.0), "5.2780e4");
        assert_eq!(fmt_value(1.2834), "1.2834");
        assert_eq!(fmt_value(0.086_123_4), "0.086123");
        assert_eq!(fmt_value(7.5e-21), "7.5000e-21");
    }

    #[test]
    fn every_headline_row_has_unit_and_formula() {
        let config = Config::default().validated().unwrap();
        let t = estimate_table(&config).unwrap();
        let rows = estimate_rows(&t);
        assert_eq!(rows.len(), t.main.headline().len() + 1);
        assert!(rows.iter().all(|r| !r[3].is_empty() && !r[4].is_empty()));
    }
}
