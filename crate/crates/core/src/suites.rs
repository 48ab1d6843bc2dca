//! Seeded property suites over generated corpora. Instances run in parallel
//! and results are merged by instance index, so a summary depends only on the
//! seed, the count and the configuration.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::corpus::{self, instance_rng};
use crate::dynamics::{detect_period, rotation_counterexample, simulate, verify_power_identity, OrbitStatus};
use crate::error::Result;
use crate::fixed_points::{is_tstable_fixed, map_critical_graph, meet, omega_limit, orbit_derivative, residual, sup_dist};
use crate::homogeneous::{certify_tstable, Outcome, NORM_SLACK};
use crate::io::{map_json, matrix_json};
use crate::nonneg_matrix::{check_subinvariant, normal_form, Verification};
use rand::Rng;

pub const SUITES: [&str; 6] = ["thm81", "thm86", "norm", "rotation", "normal-form", "semilattice"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteFailure {
    pub index: u64,
    pub reason: String,
    /// The failing instance in its input schema.
    pub fixture: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub seed: u64,
    pub count: u64,
    pub passed: u64,
    pub failed: u64,
    pub failures: Vec<SuiteFailure>,
    /// Per-suite tallies such as the number of periodic orbits seen.
    pub counters: BTreeMap<String, u64>,
}

impl SuiteSummary {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

struct Instance {
    fixture: serde_json::Value,
    failure: Option<String>,
    counters: BTreeMap<String, u64>,
}

impl Instance {
    fn new<T: Serialize>(fixture: &T) -> Self {
        Instance { fixture: serde_json::to_value(fixture).expect("fixtures serialize"), failure: None, counters: BTreeMap::new() }
    }

    fn fail(&mut self, reason: impl Into<String>) {
        if self.failure.is_none() {
            self.failure = Some(reason.into());
        }
    }

    fn bump(&mut self, key: &str) {
        *self.counters.entry(key.into()).or_default() += 1;
    }
}

fn collect(name: &str, seed: u64, instances: Vec<Instance>) -> SuiteSummary {
    let mut summary = SuiteSummary {
        suite: name.into(),
        seed,
        count: instances.len() as u64,
        passed: 0,
        failed: 0,
        failures: Vec::new(),
        counters: BTreeMap::new(),
    };
    for (index, inst) in instances.into_iter().enumerate() {
        for (k, v) in inst.counters {
            *summary.counters.entry(k).or_default() += v;
        }
        match inst.failure {
            None => summary.passed += 1,
            Some(reason) => {
                summary.failed += 1;
                summary.failures.push(SuiteFailure { index: index as u64, reason, fixture: inst.fixture });
            }
        }
    }
    summary
}

fn run_parallel<F>(name: &str, seed: u64, count: u64, f: F) -> SuiteSummary
where
    F: Fn(u64) -> Instance + Sync + Send,
{
    let instances: Vec<Instance> = (0..count).into_par_iter().map(&f).collect();
    collect(name, seed, instances)
}

/// Runs a suite by name; `None` for an unknown name.
pub fn run_suite(name: &str, seed: u64, count: u64, cfg: &AnalysisConfig) -> Option<SuiteSummary> {
    Some(match name {
        "thm81" => power_identity_suite(seed, count, cfg),
        "thm86" => period_suite(seed, count, cfg),
        "norm" => norm_suite(seed, count, cfg),
        "rotation" => rotation_suite(cfg),
        "normal-form" => normal_form_suite(seed, count, cfg),
        "semilattice" => semilattice_suite(seed, count, cfg),
        _ => return None,
    })
}

/// Critical graph of `f^k` against k-step walks in the critical graph of `f`,
/// for k = 1..4, on maps fixing the origin.
pub fn power_identity_suite(seed: u64, count: u64, cfg: &AnalysisConfig) -> SuiteSummary {
    run_parallel("thm81", seed, count, |index| {
        let f = corpus::origin_fixed_map(&mut instance_rng(seed, index), cfg);
        let mut inst = Instance::new(&map_json(&f));
        let zero = vec![0.0; f.n()];
        for k in 1..=4 {
            match verify_power_identity(&f, &zero, k, cfg) {
                Ok(r) if !r.holds => inst.fail(format!("identity fails for k = {k}")),
                Ok(r) if r.verification != Verification::Exhaustive => {
                    inst.fail(format!("selection enumeration capped for k = {k}"))
                }
                Ok(r) => {
                    if r.lhs.arc_count() > 0 {
                        inst.bump("nonempty_graphs");
                    }
                }
                Err(e) => inst.fail(format!("k = {k}: {e}")),
            }
        }
        inst
    })
}

/// Periods of orbits from random starts against the cyclicity of the map.
pub fn period_suite(seed: u64, count: u64, cfg: &AnalysisConfig) -> SuiteSummary {
    run_parallel("thm86", seed, count, |index| {
        let mut rng = instance_rng(seed, index);
        let f = corpus::origin_fixed_map(&mut rng, cfg);
        let mut inst = Instance::new(&map_json(&f));
        let n = f.n();
        let zero = vec![0.0; n];
        let bound = corpus::landau(n);
        let c = match map_critical_graph(&f, &zero, cfg) {
            Ok(g) => g.cyclicity,
            Err(e) => {
                inst.fail(format!("critical graph: {e}"));
                return inst;
            }
        };
        if c > bound {
            inst.fail(format!("cyclicity {c} exceeds {bound}"));
        }
        for _ in 0..4 {
            let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..=3.0)).collect();
            let orbit = simulate(&f, &x0, 5000, cfg);
            match orbit.status {
                OrbitStatus::Converged => inst.bump("fixed_orbits"),
                OrbitStatus::Periodic => match detect_period(&f, &orbit.states, Some(&zero), cfg) {
                    Ok(report) => {
                        let p = report.period;
                        let tstable = orbit_derivative(&f, &report.orbit_points, cfg)
                            .map(|h| certify_tstable(&h, cfg).outcome == Outcome::Certified)
                            .unwrap_or(false);
                        if !tstable {
                            inst.bump("uncertified_orbits");
                            continue;
                        }
                        inst.bump(if p > 1 { "periodic_orbits" } else { "fixed_orbits" });
                        if report.divides != Some(true) || c % p as u64 != 0 {
                            inst.fail(format!("period {p} does not divide cyclicity {c}"));
                        }
                        if p as u64 > bound {
                            inst.fail(format!("period {p} exceeds {bound}"));
                        }
                    }
                    Err(_) => inst.bump("undetected_orbits"),
                },
                OrbitStatus::Capped => inst.bump("undetected_orbits"),
                OrbitStatus::Diverged => inst.fail("orbit diverged"),
            }
        }
        inst
    })
}

/// Sampled non-expansiveness of stable max-linear maps, and of the same maps
/// with constants added, under the norm built from the max-linear map.
pub fn norm_suite(seed: u64, count: u64, cfg: &AnalysisConfig) -> SuiteSummary {
    run_parallel("norm", seed, count, |index| {
        let mut rng = instance_rng(seed, index);
        let h = corpus::stable_max_linear(&mut rng, cfg);
        let f = corpus::with_constants(&mut rng, &h);
        let mut inst = Instance::new(&map_json(&f));
        let cert = certify_tstable(&h, cfg);
        let Some(norm) = cert.norm else {
            inst.fail(format!("norm not built: {}", cert.outcome.as_str()));
            return inst;
        };
        let check_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index);
        let eh = norm.max_expansion(|x| h.eval(x), 1000, check_seed);
        let ef = norm.max_expansion(|x| f.eval(x), 1000, check_seed ^ 1);
        if eh > NORM_SLACK || ef > NORM_SLACK {
            inst.fail(format!("expansion {eh:e} (linear), {ef:e} (affine)"));
        }
        if !norm.b.is_empty() {
            inst.bump("split_norms");
        }
        inst
    })
}

/// Unstable nonnegative matrices with a period-p orbit, p = 3..6.
pub fn rotation_suite(cfg: &AnalysisConfig) -> SuiteSummary {
    let instances = (3..=6)
        .map(|p| match rotation_counterexample(p, 3.0, cfg) {
            Ok(r) => {
                let mut inst = Instance::new(&matrix_json(&r.matrix));
                if r.stable {
                    inst.fail("matrix reported stable");
                }
                if r.detected_period != Some(p) {
                    inst.fail(format!("detected period {:?}", r.detected_period));
                }
                if r.closing_error > 1e-8 || r.min_gap <= 1e-4 {
                    inst.fail(format!("closing error {:e}, gap {:e}", r.closing_error, r.min_gap));
                }
                inst
            }
            Err(e) => {
                let mut inst = Instance::new(&p);
                inst.fail(e.to_string());
                inst
            }
        })
        .collect();
    collect("rotation", 0, instances)
}

/// Block pattern, radii and sub-invariant vectors of stable matrices.
pub fn normal_form_suite(seed: u64, count: u64, cfg: &AnalysisConfig) -> SuiteSummary {
    run_parallel("normal-form", seed, count, |index| {
        let mut rng = instance_rng(seed, index);
        let s = corpus::stable_structured(&mut rng);
        let mut inst = Instance::new(&matrix_json(&s.matrix));
        if let Err(e) = check_normal_form(&mut rng, &s, cfg) {
            inst.fail(e.to_string());
        }
        inst
    })
}

fn check_normal_form<R: Rng>(rng: &mut R, s: &corpus::StructuredMatrix, cfg: &AnalysisConfig) -> Result<()> {
    let nf = normal_form(&s.matrix, cfg)?;
    let mut expected: Vec<usize> = s.unit_classes().concat();
    expected.sort_unstable();
    if nf.c != expected {
        return Err(crate::Error::Internal(format!("critical nodes {:?}, expected {:?}", nf.c, expected)));
    }
    let support: Vec<usize> = nf.i.clone();
    for _ in 0..10 {
        let z = corpus::subinvariant_vector(rng, &s.matrix, &support);
        let report = check_subinvariant(&s.matrix, &z, cfg)?;
        if !report.holds {
            return Err(crate::Error::Internal(format!("sub-invariant conclusions fail: {report:?}")));
        }
    }
    Ok(())
}

/// Meet laws and convex combinations on maps with many t-stable fixed points.
pub fn semilattice_suite(seed: u64, count: u64, cfg: &AnalysisConfig) -> SuiteSummary {
    run_parallel("semilattice", seed, count, |index| {
        let s = corpus::semilattice_map(&mut instance_rng(seed, index), cfg);
        let mut inst = Instance::new(&map_json(&s.map));
        if let Err(e) = check_semilattice(&s, cfg) {
            inst.fail(e);
        }
        inst
    })
}

const LAW_TOL: f64 = 1e-9;

fn check_semilattice(s: &corpus::SemilatticeInstance, cfg: &AnalysisConfig) -> std::result::Result<(), String> {
    let f = &s.map;
    let pts = &s.fixed_points;
    if pts.len() < 2 {
        return Err("fewer than two fixed points".into());
    }
    let m = |x: &[f64], y: &[f64]| meet(f, x, y, cfg).map_err(|e| e.to_string());
    let certified = |v: &[f64]| {
        is_tstable_fixed(f, v, cfg).map(|c| c.outcome == Outcome::Certified).unwrap_or(false)
    };
    let critical = map_critical_graph(f, &pts[0], cfg).map_err(|e| e.to_string())?.nodes;
    if critical != s.critical {
        return Err(format!("critical nodes {critical:?}, expected {:?}", s.critical));
    }
    for x in pts {
        if !certified(x) {
            return Err("generated fixed point not certified".into());
        }
        if sup_dist(&m(x, x)?, x) > LAW_TOL {
            return Err("meet not idempotent".into());
        }
    }
    for (a, x) in pts.iter().enumerate() {
        for y in &pts[a + 1..] {
            let xy = m(x, y)?;
            if sup_dist(&xy, &m(y, x)?) > LAW_TOL {
                return Err("meet not commutative".into());
            }
            if !certified(&xy) || residual(f, &xy) > cfg.tol.eps_fix * 10.0 {
                return Err("meet leaves the t-stable fixed points".into());
            }
            if critical.iter().any(|&i| (xy[i] - x[i].min(y[i])).abs() > LAW_TOL) {
                return Err("meet does not restrict to the minimum on critical nodes".into());
            }
            for z in pts {
                if sup_dist(&m(&xy, z)?, &m(x, &m(y, z)?)?) > LAW_TOL {
                    return Err("meet not associative".into());
                }
            }
            for lambda in [0.25, 0.5, 0.75] {
                let c: Vec<f64> = x.iter().zip(y).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
                let u = omega_limit(f, &c, cfg).map_err(|e| e.to_string())?;
                if !certified(&u) {
                    return Err(format!("convex combination {lambda} not certified"));
                }
                if critical.iter().any(|&i| (u[i] - c[i]).abs() > LAW_TOL) {
                    return Err(format!("convex combination {lambda} moves critical coordinates"));
                }
            }
        }
    }
    Ok(())
}
