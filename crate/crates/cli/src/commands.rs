use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use hep_core::combinadics;
use hep_core::current::{critical_density, current_density_relation, stationary_current_finite};
use hep_core::duality::{domain_walk_check, intertwining_residual, DomainMeasure};
use hep_core::generator::{balance_residual, build_hep_generator, stationary_distribution, TorusStates};
use hep_core::lattice::{CoordinateConfiguration, TorusConfiguration};
use hep_core::measures::{canonical_log_partition, MeasureTable, DEFAULT_SERIES_TOL};
use hep_core::potential::{PotentialFile, PotentialSpec};
use hep_core::simulator::{simulate as run_simulation, Geometry, Observables, SimulationConfig};
use hep_core::stats::{mean_and_se, poisson_pmf};

use crate::manifest::ManifestBuilder;
use crate::{CliError, CommonArgs};

fn load_potential(path: &Path) -> Result<(PotentialSpec, String), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let file: PotentialFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("bad potential file {}: {e}", path.display())))?;
    Ok((file.build()?, text))
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_output(
    manifest: &mut ManifestBuilder,
    dir: &Path,
    name: &str,
    contents: &str,
) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    manifest.record_output(&path);
    Ok(())
}

#[derive(Debug, Serialize)]
struct StationarySummary {
    l: usize,
    n: usize,
    states: usize,
    total_variation: f64,
    balance_residual: f64,
    log_partition_enumeration: f64,
    log_partition_identity: f64,
}

pub fn stationary(common: &CommonArgs, l: usize, n: usize, cap: usize) -> Result<(), CliError> {
    let (spec, potential_text) = load_potential(&common.potential)?;
    ensure_out_dir(&common.out)?;
    let states = combinadics::binomial(l, n);
    if states > cap as u64 {
        return Err(CliError::CapExceeded(format!(
            "C({l}, {n}) = {states} states exceeds the cap {cap}; use `hep simulate` instead"
        )));
    }
    let mut manifest = ManifestBuilder::new(
        "stationary",
        &potential_text,
        json!({ "L": l, "N": n, "cap": cap, "potential": common.potential.display().to_string() }),
    );

    let q = build_hep_generator(l, n, &spec)?;
    let stationary = stationary_distribution(&q)?;
    let canonical = MeasureTable::canonical(l, n, &spec)?;
    let tv = stationary.total_variation(&canonical);
    let residual = balance_residual(&canonical, &q);

    let torus = TorusStates { l, n };
    let mut csv = String::from("state,occupation,stationary_probability,canonical_probability\n");
    for idx in 0..stationary.len() {
        let mut occ = vec![false; l];
        for &p in &torus.positions(idx) {
            occ[p] = true;
        }
        let literal = TorusConfiguration::new(occ)
            .expect("valid occupation")
            .to_string();
        let _ = writeln!(
            csv,
            "{idx},{literal},{:.17e},{:.17e}",
            stationary.probability(idx),
            canonical.probability(idx)
        );
    }
    write_output(&mut manifest, &common.out, "stationary.csv", &csv)?;

    let summary = StationarySummary {
        l,
        n,
        states: states as usize,
        total_variation: tv,
        balance_residual: residual,
        log_partition_enumeration: canonical.log_partition(),
        log_partition_identity: canonical_log_partition(l, n, &spec)?,
    };
    write_output(
        &mut manifest,
        &common.out,
        "summary.json",
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    manifest.write(&common.out)?;
    println!(
        "stationary: L={l} N={n}, TV = {tv:.3e}, balance residual = {residual:.3e}"
    );
    Ok(())
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "density grid must be start:end:step, got {text:?}"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad grid number {p:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    Ok(hep_core::current::density_grid(nums[0], nums[1], nums[2])?)
}

fn parse_l_list(text: &str) -> Result<Vec<usize>, CliError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Config(format!("bad torus size {p:?}: {e}")))
        })
        .collect()
}

pub fn current(common: &CommonArgs, rho: &str, l_list: &str) -> Result<(), CliError> {
    let (spec, potential_text) = load_potential(&common.potential)?;
    ensure_out_dir(&common.out)?;
    let grid = parse_grid(rho)?;
    let sizes = parse_l_list(l_list)?;
    let mut manifest = ManifestBuilder::new(
        "current",
        &potential_text,
        json!({ "rho": rho, "L": sizes, "potential": common.potential.display().to_string() }),
    );

    // The thermodynamic relation assumes the rate-ratio sequence is bounded
    // ("limited" is read as bounded); report the finite-range evidence.
    let summability = spec.summability_report(spec.depth() / 2)?;
    println!(
        "note: rate-ratio boundedness read as sup_n y_n/y_n+1 < inf; \
         sup over stored range = {:.6} at n = {}{}",
        summability.sup_ratio,
        summability.attained_at,
        if summability.increasing_tail {
            " (warning: still increasing at the end of the range)"
        } else {
            ""
        }
    );

    let rho_c = critical_density(&spec, DEFAULT_SERIES_TOL)?;
    let curve = current_density_relation(&spec, &grid, DEFAULT_SERIES_TOL)?;

    let mut csv = String::new();
    let _ = writeln!(csv, "# u_c = {:.17e}", curve.u_c);
    let _ = writeln!(csv, "# rho_c = {rho_c:.17e}");
    let _ = writeln!(csv, "# potential_digest = {}", manifest.digest());
    let mut header = String::from("rho,j,branch,u");
    for l in &sizes {
        let _ = write!(header, ",j_L{l}");
    }
    let _ = writeln!(csv, "{header}");
    for sample in &curve.samples {
        let branch = match sample.branch {
            hep_core::current::Branch::SupercriticalDensity => "supercritical-density",
            hep_core::current::Branch::LinearPlateau => "linear-plateau",
        };
        let _ = write!(
            csv,
            "{:.6},{:.17e},{branch},{:.17e}",
            sample.rho, sample.current, sample.u
        );
        for &l in &sizes {
            let n = (sample.rho * l as f64).round() as usize;
            let j = stationary_current_finite(l, n, &spec)?;
            let _ = write!(csv, ",{j:.17e}");
        }
        csv.push('\n');
    }
    write_output(&mut manifest, &common.out, "current.csv", &csv)?;
    manifest.write(&common.out)?;
    println!(
        "current: {} grid points, u_c = {}, rho_c = {rho_c:.6}",
        curve.samples.len(),
        curve.u_c
    );
    Ok(())
}

fn parse_pair(text: &str, what: &str) -> Result<(i64, i64), CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Config(format!("{what} expects two numbers, got {text:?}")));
    }
    let a = parts[0]
        .trim()
        .parse::<i64>()
        .map_err(|e| CliError::Config(format!("bad {what}: {e}")))?;
    let b = parts[1]
        .trim()
        .parse::<i64>()
        .map_err(|e| CliError::Config(format!("bad {what}: {e}")))?;
    Ok((a, b))
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    geometry: String,
    t: f64,
    t_burn: f64,
    replicas: usize,
    seed: u64,
    events: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    current_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    current_standard_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_stationary_current: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_displacement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected_displacement: Option<f64>,
    zero_rate_halt: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    common: &CommonArgs,
    torus: Option<String>,
    line: Option<String>,
    t: f64,
    replicas: usize,
    seed: u64,
    burn: Option<f64>,
    init: Option<String>,
    snapshots: Option<String>,
) -> Result<(), CliError> {
    let (spec, potential_text) = load_potential(&common.potential)?;
    ensure_out_dir(&common.out)?;

    let (geometry, geometry_text) = match (&torus, &line) {
        (Some(t), None) => {
            let (l, n) = parse_pair(t, "--torus L,N")?;
            if l <= 0 || n < 0 {
                return Err(CliError::Config("torus sizes must be positive".into()));
            }
            (
                Geometry::Torus {
                    l: l as usize,
                    n: n as usize,
                },
                format!("torus L={l} N={n}"),
            )
        }
        (None, Some(s)) => {
            let (n, x_star) = parse_pair(s, "--line N,XSTAR")?;
            if n <= 0 {
                return Err(CliError::Config("line particle count must be positive".into()));
            }
            (
                Geometry::Line {
                    n: n as usize,
                    x_star,
                },
                format!("line N={n} x*={x_star}"),
            )
        }
        _ => {
            return Err(CliError::Config(
                "exactly one of --torus or --line is required".into(),
            ))
        }
    };

    let snapshot_times: Vec<f64> = match &snapshots {
        Some(text) => text
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::Config(format!("bad snapshot time {p:?}: {e}")))
            })
            .collect::<Result<_, _>>()?,
        None => Vec::new(),
    };
    let mut cfg = SimulationConfig::new(geometry, t, seed)?
        .with_replicas(replicas)?
        .with_observables(Observables {
            current: true,
            headway_hist: true,
            leftmost: true,
            snapshot_times,
        });
    if let Some(burn) = burn {
        cfg = cfg.with_burn_in(burn)?;
    }

    let initial = match (&geometry, &init) {
        (Geometry::Torus { l, .. }, Some(text)) => {
            let occ: TorusConfiguration = text
                .parse()
                .map_err(|e: hep_core::Error| CliError::Config(e.to_string()))?;
            let _ = l;
            hep_core::lattice::coords_from_occupation(&occ)
        }
        (Geometry::Torus { l, n }, None) => {
            // Evenly spread particles.
            let positions: Vec<i64> = (0..*n).map(|i| (i * l / n.max(&1)) as i64).collect();
            CoordinateConfiguration::torus(*l, positions)?
        }
        (Geometry::Line { .. }, Some(text)) => CoordinateConfiguration::parse_line(text)?,
        (Geometry::Line { n, x_star }, None) => {
            // Packed block starting at the pin.
            CoordinateConfiguration::line((0..*n).map(|i| x_star + i as i64).collect())?
        }
    };

    let mut manifest = ManifestBuilder::new(
        "simulate",
        &potential_text,
        json!({
            "geometry": geometry_text,
            "t": t,
            "burn": cfg.t_burn,
            "replicas": replicas,
            "seed": seed,
            "init": initial.to_string(),
            "potential": common.potential.display().to_string(),
        }),
    )
    .seed(seed);

    let stats = run_simulation(&spec, &cfg, &initial)?;

    let mut summary = SimulateSummary {
        geometry: geometry_text,
        t,
        t_burn: cfg.t_burn,
        replicas,
        seed,
        events: stats.events_total,
        current_estimate: None,
        current_standard_error: None,
        exact_stationary_current: None,
        mean_displacement: None,
        expected_displacement: None,
        zero_rate_halt: stats.zero_rate_halt,
    };

    match geometry {
        Geometry::Torus { l, n } => {
            let (mean, se) = mean_and_se(&stats.per_replica_current);
            summary.current_estimate = Some(mean);
            summary.current_standard_error = Some(se);
            summary.exact_stationary_current = Some(hep_core::current::ahep_current(l, n, &spec)?);
            // Time-averaged headway occupation.
            let hist = stats.headway_histogram();
            let mut csv = String::from("headway,fraction\n");
            for (k, f) in hist.iter().enumerate() {
                let _ = writeln!(csv, "{k},{f:.17e}");
            }
            write_output(&mut manifest, &common.out, "headways.csv", &csv)?;
        }
        Geometry::Line { x_star, .. } => {
            let displacements: Vec<f64> = stats
                .leftmost_final
                .iter()
                .map(|&x| (x - x_star) as f64)
                .collect();
            let (mean, _) = mean_and_se(&displacements);
            summary.mean_displacement = Some(mean);
            summary.expected_displacement = Some(spec.w() * t);
        }
    }

    if !stats.snapshots.is_empty() {
        let mut csv = String::from("replica,time,configuration\n");
        for snap in &stats.snapshots {
            let _ = writeln!(csv, "{},{},{}", snap.replica, snap.time, snap.literal(geometry));
        }
        write_output(&mut manifest, &common.out, "snapshots.csv", &csv)?;
    }

    write_output(
        &mut manifest,
        &common.out,
        "summary.json",
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    manifest.write(&common.out)?;
    println!(
        "simulate: {} events over {} replicas{}",
        stats.events_total,
        replicas,
        summary
            .current_estimate
            .map(|c| format!(", current = {c:.6}"))
            .unwrap_or_default()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct DualityReport {
    n: usize,
    window: i64,
    t: f64,
    replicas: usize,
    seed: u64,
    potential_digest: String,
    log_gap_partition: f64,
    intertwining_residual: f64,
    intertwining_states: usize,
    intertwining_interior_columns: usize,
    leftmost_tv: f64,
    leftmost_chi2_p: f64,
    gap_tv: f64,
    gap_chi2_p: f64,
    mean_displacement: f64,
    expected_displacement: f64,
    three_sigma: f64,
    joint_factorization_tv: f64,
}

pub fn duality(
    common: &CommonArgs,
    n: usize,
    window: i64,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<(), CliError> {
    let (spec, potential_text) = load_potential(&common.potential)?;
    ensure_out_dir(&common.out)?;
    let mut manifest = ManifestBuilder::new(
        "duality",
        &potential_text,
        json!({
            "N": n,
            "window": window,
            "t": t,
            "replicas": replicas,
            "seed": seed,
            "potential": common.potential.display().to_string(),
        }),
    )
    .seed(seed);

    let dm = DomainMeasure::new(&spec, 0, n, DEFAULT_SERIES_TOL)?;
    let exact = intertwining_residual(n, (0, window - 1), &spec, DEFAULT_SERIES_TOL)?;
    let walk = domain_walk_check(&spec, n, 0, t, replicas, seed, DEFAULT_SERIES_TOL)?;

    let report = DualityReport {
        n,
        window,
        t,
        replicas,
        seed,
        potential_digest: manifest.digest(),
        log_gap_partition: dm.log_partition(),
        intertwining_residual: exact.residual,
        intertwining_states: exact.states,
        intertwining_interior_columns: exact.interior_columns,
        leftmost_tv: walk.leftmost_tv,
        leftmost_chi2_p: walk.leftmost_chi2_p,
        gap_tv: walk.gap_tv,
        gap_chi2_p: walk.gap_chi2_p,
        mean_displacement: walk.mean_displacement,
        expected_displacement: walk.expected_displacement,
        three_sigma: walk.three_sigma,
        joint_factorization_tv: walk.joint_factorization_tv,
    };
    write_output(
        &mut manifest,
        &common.out,
        "report.json",
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;

    // Leftmost-displacement histogram vs the walk kernel, for plotting.
    let k_max = walk.displacement_counts.len().saturating_sub(1);
    let pmf = poisson_pmf(spec.w() * t, k_max);
    let total = replicas as f64;
    let mut csv = String::from("displacement,empirical,poisson_pmf\n");
    for (k, (&c, p)) in walk.displacement_counts.iter().zip(&pmf).enumerate() {
        let _ = writeln!(csv, "{k},{:.17e},{p:.17e}", c as f64 / total);
    }
    write_output(&mut manifest, &common.out, "leftmost_hist.csv", &csv)?;

    manifest.write(&common.out)?;
    println!(
        "duality: residual = {:.3e} over {} interior columns; leftmost TV = {:.4} (p = {:.3})",
        exact.residual, exact.interior_columns, walk.leftmost_tv, walk.leftmost_chi2_p
    );
    Ok(())
}
