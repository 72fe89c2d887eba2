use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use vdwlab_core::asymptotics::{fit_power_law, run_sweep, FitOptions, SweepResult};
use vdwlab_core::dispersion::{direction_invariance_check, sigma_coefficient};
use vdwlab_core::feshbach::feshbach_energy;
use vdwlab_core::hamiltonian::build_full_hamiltonian_with;
use vdwlab_core::spectral::low_spectrum;
use vdwlab_core::stability::{
    build_ims_partition, charge_group_decompose, exhaustive_group_scan, ion_ladder, property_e_check,
    property_e_prime_check, zero_subset_witness, ImsConstruction,
};
use vdwlab_core::symmetry::FermionSectorOperator;
use vdwlab_core::variational::build_test_function;
use vdwlab_core::{AtomSpec, Exec, LinearOperator, SolverSettings};

use crate::config::{CombinatoricsParams, Parameters, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub jobs: usize,
}

#[derive(Serialize)]
struct ScenarioRecord {
    name: String,
    kind: &'static str,
    status: &'static str,
    output: String,
    error: Option<String>,
    tolerances: Value,
    wall_seconds: f64,
}

struct Outcome {
    result: Value,
    csv: Option<String>,
    tolerances: Value,
    /// A completed run whose content signals a failure (e.g. sweep points
    /// that did not converge).
    failure: Option<String>,
}

fn tolerances(s: &SolverSettings) -> Value {
    json!({
        "solver_tolerance": s.tolerance,
        "max_iterations": s.max_iterations,
        "krylov_dim": s.krylov_dim,
        "dense_cutoff": s.dense_cutoff,
        "method": s.method,
    })
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn sweep_csv(s: &SweepResult) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["abscissa", "method", "W", "residual"]).map_err(err)?;
    for (x, method, value, residual) in s.rows() {
        let v = value.map_or_else(String::new, |v| format!("{v:e}"));
        let r = if residual.is_nan() { String::new() } else { format!("{residual:e}") };
        w.write_record([format!("{x}"), method.tag().to_string(), v, r]).map_err(err)?;
    }
    String::from_utf8(w.into_inner().map_err(err)?).map_err(err)
}

fn execute(sc: &Scenario, seed: u64) -> Result<Outcome, String> {
    let plain = |result: Value, settings: &SolverSettings| Outcome {
        result,
        csv: None,
        tolerances: tolerances(settings),
        failure: None,
    };
    match &sc.parameters {
        Parameters::GroundState(p) => {
            let s = p.solver.settings(seed);
            let cfg = p.system.config()?;
            let g = p.grid.spec()?;
            let h = build_full_hamiltonian_with(&cfg, &g, s.exec).map_err(err)?;
            let fermionic = !cfg.is_drude() && cfg.electrons > 1;
            let r = if fermionic {
                low_spectrum(&FermionSectorOperator::new(&h).map_err(err)?, p.states, &s)
            } else {
                low_spectrum(&h, p.states, &s)
            }
            .map_err(err)?;
            Ok(plain(
                json!({
                    "dimension": h.dim(),
                    "fermionic_sector": fermionic,
                    "energies": r.eigenvalues,
                    "residuals": r.residual_norms,
                    "method": r.method,
                }),
                &s,
            ))
        }
        Parameters::Sigma(p) => {
            let s = p.solver.settings(seed);
            let g = p.grid.spec()?;
            let (a, b) = match &p.atoms {
                Some([a, b]) => (a.atom()?, b.atom()?),
                None => (AtomSpec::well1d(1.0), AtomSpec::well1d(1.0)),
            };
            let r = match p.directions.len() {
                0 => sigma_coefficient(&a, &b, None, &g, &s),
                1 => sigma_coefficient(&a, &b, Some(&p.directions[0]), &g, &s),
                _ => direction_invariance_check(&a, &b, &p.directions, &g, &s),
            }
            .map_err(err)?;
            Ok(plain(serde_json::to_value(&r).map_err(err)?, &s))
        }
        Parameters::Feshbach(p) => {
            let s = p.solver.settings(seed);
            let (r, proj) =
                feshbach_energy(&p.system.config()?, &p.grid.spec()?, &s, p.cutoff_radius, p.measure_gap).map_err(err)?;
            Ok(plain(
                json!({
                    "fixed_point": r,
                    "projection": {
                        "norm_squared": proj.norm_squared,
                        "expected_norm_squared": proj.expected_norm_squared,
                        "expansion_defect": proj.expansion_defect,
                        "independence_defect": proj.independence_defect,
                        "cutoff_radius": proj.cutoff.cutoff_radius,
                        "atom_energies": proj.cutoff.atom_energies,
                    },
                }),
                &s,
            ))
        }
        Parameters::Variational(p) => {
            let s = p.solver.settings(seed);
            let cfg = p.system.config()?;
            let b = cfg.canonical_decomposition().map_err(err)?;
            let r = build_test_function(&cfg, &b, &p.grid.spec()?, &s, p.cutoff_radius).map_err(err)?;
            Ok(plain(serde_json::to_value(&r).map_err(err)?, &s))
        }
        Parameters::Sweep(p) => {
            let s = p.solver.settings(seed);
            let sweep = run_sweep(&p.template()?, &p.abscissae()?, &p.methods, &p.grid.spec()?, &s).map_err(err)?;
            let fits: Vec<Value> = if p.fit {
                let opts = FitOptions { drop_strongest: p.fit_drop };
                sweep
                    .series
                    .iter()
                    .map(|ser| match fit_power_law(&sweep, ser.method, &opts) {
                        Ok(f) => json!({ "method": ser.method, "fit": f }),
                        Err(e) => json!({ "method": ser.method, "error": e.to_string() }),
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let failed = sweep.failures();
            Ok(Outcome {
                csv: Some(sweep_csv(&sweep)?),
                result: json!({
                    "abscissa": sweep.metadata.abscissa,
                    "abscissae": sweep.abscissae,
                    "grid": sweep.metadata.grid,
                    "errors": sweep.series.iter().map(|s| json!({ "method": s.method, "errors": s.errors })).collect::<Vec<_>>(),
                    "sandwich_violations": sweep.sandwich_violations(1e-10, 1e-8),
                    "fits": fits,
                }),
                tolerances: tolerances(&s),
                failure: (failed > 0).then(|| format!("{failed} sweep points failed")),
            })
        }
        Parameters::Stability(p) => {
            let s = p.solver.settings(seed);
            let g = p.grid.spec()?;
            let ladders = p
                .ladders
                .iter()
                .map(|l| ion_ladder(&l.atom.atom()?, l.n_max, &g, &s).map_err(err))
                .collect::<Result<Vec<_>, _>>()?;
            let report = |r: Result<Value, String>| r.unwrap_or_else(|e| json!({ "error": e }));
            let e = report(
                property_e_check(&ladders).map_err(err).and_then(|r| serde_json::to_value(r).map_err(err)),
            );
            let prime = p.prime.then(|| {
                report(property_e_prime_check(&ladders).map_err(err).and_then(|r| serde_json::to_value(r).map_err(err)))
            });
            let ordering: Vec<Vec<String>> = ladders.iter().map(|l| l.ordering_violations()).collect();
            Ok(plain(json!({ "ladders": ladders, "ordering_violations": ordering, "property_e": e, "property_e_prime": prime }), &s))
        }
        Parameters::Partition(p) => {
            let cfg = p.system.config()?;
            let g = p.grid.spec()?;
            let part = build_ims_partition(&cfg, p.scale, &g, Exec::default()).map_err(err)?;
            let c = ImsConstruction::new(&cfg, part.scale).map_err(err)?;
            let hw = g.extent;
            let sampled = c.random_sum_defect(p.samples, hw, seed);
            Ok(Outcome {
                result: json!({ "partition": part, "sampled_sum_defect": sampled, "samples": p.samples }),
                csv: None,
                tolerances: json!({ "seed": seed }),
                failure: None,
            })
        }
        Parameters::Combinatorics(p) => {
            let result = match p {
                CombinatoricsParams::Scan { z, max_length } => {
                    let len = max_length.unwrap_or((z * z + 2) as usize);
                    serde_json::to_value(exhaustive_group_scan(*z, len).map_err(err)?).map_err(err)?
                }
                CombinatoricsParams::Decompose { z, charges } => {
                    serde_json::to_value(charge_group_decompose(charges, *z).map_err(err)?).map_err(err)?
                }
                CombinatoricsParams::Witness { integers } => {
                    let w = zero_subset_witness(integers).map_err(err)?;
                    let sum: i64 = w.iter().map(|&i| integers[i]).sum();
                    json!({ "indices": w, "sum": sum, "modulus": integers.len() })
                }
            };
            Ok(Outcome { result, csv: None, tolerances: json!({}), failure: None })
        }
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), String> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("JSON values serialize");
    b.push(b'\n');
    b
}

fn run_one(sc: &Scenario, opts: &RunOptions) -> ScenarioRecord {
    let t = Instant::now();
    let outcome = execute(sc, opts.seed);
    let path = opts.out_dir.join(&sc.output_path);
    let mut record = ScenarioRecord {
        name: sc.name.clone(),
        kind: sc.kind.tag(),
        status: "ok",
        output: sc.output_path.clone(),
        error: None,
        tolerances: Value::Null,
        wall_seconds: 0.0,
    };
    let header = |status: &str| {
        json!({
            "schema_version": SCHEMA_VERSION,
            "scenario": sc.name,
            "kind": sc.kind.tag(),
            "status": status,
            "seed": opts.seed,
            "parameters": sc.parameters,
        })
    };
    let written = match outcome {
        Ok(o) => {
            record.tolerances = o.tolerances.clone();
            let status = if o.failure.is_some() { "failed" } else { "ok" };
            let mut doc = header(status);
            doc["result"] = o.result;
            doc["tolerances"] = o.tolerances;
            if let Some(f) = &o.failure {
                doc["error"] = json!(f);
                record.status = "failed";
                record.error = Some(f.clone());
            }
            match o.csv {
                Some(csv) => {
                    let side = path.with_extension("json");
                    write(&path, csv.as_bytes()).and_then(|_| write(&side, &json_bytes(&doc)))
                }
                None => write(&path, &json_bytes(&doc)),
            }
        }
        Err(e) => {
            record.status = "failed";
            record.error = Some(e.clone());
            let mut doc = header("failed");
            doc["error"] = json!(e);
            // Sweeps keep the CSV name for data; the error goes next to it.
            write(&path.with_extension("json"), &json_bytes(&doc))
        }
    };
    if let Err(e) = written {
        record.status = "failed";
        record.error = Some(format!("writing output: {e}"));
    }
    record.wall_seconds = t.elapsed().as_secs_f64();
    record
}

/// Runs every scenario, writes one result per scenario plus
/// `manifest.json`, and returns whether all of them succeeded.
pub fn run_scenarios(scenarios: &[Scenario], config_bytes: &[u8], config_path: &str, opts: &RunOptions) -> Result<bool, String> {
    let t = Instant::now();
    fs::create_dir_all(&opts.out_dir).map_err(|e| format!("{}: {e}", opts.out_dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build().map_err(err)?;
    let records: Vec<ScenarioRecord> = pool.install(|| scenarios.par_iter().map(|sc| run_one(sc, opts)).collect());
    for r in &records {
        match &r.error {
            None => eprintln!("ok      {} ({}) -> {} [{:.2} s]", r.name, r.kind, r.output, r.wall_seconds),
            Some(e) => eprintln!("FAILED  {} ({}): {e}", r.name, r.kind),
        }
    }
    let ok = records.iter().all(|r| r.status == "ok");
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "config": config_path,
        "inputs_sha256": hex(&Sha256::digest(config_bytes)),
        "versions": {
            "vdwlab": env!("CARGO_PKG_VERSION"),
            "vdwlab_core": vdwlab_core::VERSION,
        },
        "seed": opts.seed,
        "jobs": opts.jobs,
        "default_tolerances": tolerances(&SolverSettings::default()),
        "scenarios": records,
        "failed": records.iter().filter(|r| r.status != "ok").count(),
        "wall_seconds": t.elapsed().as_secs_f64(),
    });
    write(&opts.out_dir.join("manifest.json"), &json_bytes(&manifest))?;
    Ok(ok)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
