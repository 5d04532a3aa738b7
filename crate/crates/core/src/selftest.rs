//! Full invariant battery: one fast, self-contained check per module,
//! runnable from the CLI and aggregated into a single PASS/FAIL report.

use std::f64::consts::PI;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audit;
use crate::curvature::{parse_selector, Curvature};
use crate::flow::{self, FlowState, IntegratorConfig, Method};
use crate::hyperboloid::{distance, exp_map, log_map, HPoint};
use crate::minkowski::{cross_m, make_boost, make_rotation, Frame, MVec3};
use crate::orbits::CircleOrbit;
use crate::reduction::{find_reduced_zero, sigma23, CenterChart};
use crate::solver::{seed_from_reduced_zero, solve_orbit, sweep_energy, PerturbationSpec};
use crate::store::{RunConfig, SCHEMA_VERSION};
use crate::variational::monodromy;

const TRIALS: usize = 64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub pass: bool,
    pub millis: u128,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub pass: bool,
    pub suites: Vec<SuiteOutcome>,
}

impl SelftestReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            out.push_str(&format!(
                "{:<12} {}  ({} ms){}\n",
                s.name,
                if s.pass { "PASS" } else { "FAIL" },
                s.millis,
                if s.pass { String::new() } else { format!("  {}", s.detail) },
            ));
        }
        out.push_str(if self.pass { "selftest: PASS\n" } else { "selftest: FAIL\n" });
        out
    }
}

fn random_point(rng: &mut ChaCha8Rng) -> HPoint {
    let b = make_boost(
        rng.gen_range(-1.5..1.5),
        {
            let a: f64 = rng.gen_range(0.0..2.0 * PI);
            (a.cos(), a.sin())
        },
    );
    HPoint(b.apply(MVec3::E3))
}

fn suite_minkowski(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..TRIALS {
        let a = MVec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let b = MVec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let c = MVec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        // twisted triple product is cyclic
        let t1 = cross_m(a, b).dot_m(c);
        let t2 = cross_m(b, c).dot_m(a);
        if (t1 - t2).abs() > 1e-12 {
            return Err(format!("triple product asymmetry {}", (t1 - t2).abs()));
        }
        let l = make_rotation(rng.gen_range(-3.0..3.0))
            .compose(&make_boost(rng.gen_range(-1.0..1.0), (1.0, 0.0)));
        let d = (l.apply(a).dot_m(l.apply(b)) - a.dot_m(b)).abs();
        if d > 1e-12 {
            return Err(format!("inner product not Lorentz-invariant: {d}"));
        }
        let idres = l.compose(&l.inverse()).apply(a) - a;
        if idres.norm_e() > 1e-12 {
            return Err(format!("inverse residual {}", idres.norm_e()));
        }
    }
    Ok(())
}

fn suite_hyperboloid(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    for _ in 0..TRIALS {
        let p = random_point(&mut rng);
        let q = random_point(&mut rng);
        let u = log_map(p, q);
        let back = exp_map(p, &u);
        if distance(back, q) > 1e-10 {
            return Err(format!("exp∘log misses by {}", distance(back, q)));
        }
        if (distance(p, q) - distance(q, p)).abs() > 1e-12 {
            return Err("distance not symmetric".into());
        }
        if (u.norm() - distance(p, q)).abs() > 1e-10 {
            return Err("log norm differs from distance".into());
        }
    }
    Ok(())
}

fn suite_flow() -> Result<(), String> {
    let o = CircleOrbit::new(Frame::canonical(), 0.3);
    let s0 = FlowState::new(o.position(0.0), o.velocity(0.0));
    let k = Curvature::Constant(o.k0());
    let cfg = IntegratorConfig { method: Method::Rk45 { tol: 1e-10 }, renormalize: true, samples: 256 };
    let traj = flow::integrate(&s0, &k, 1.0, &cfg).map_err(|e| e.to_string())?;
    let gap = distance(s0.point, traj.final_state.point);
    if gap > 1e-8 {
        return Err(format!("circle orbit fails to close: {gap}"));
    }
    if traj.speed_drift > 1e-10 {
        return Err(format!("speed drift {}", traj.speed_drift));
    }
    Ok(())
}

fn suite_orbits() -> Result<(), String> {
    let o = CircleOrbit::new(Frame::canonical(), 1.0);
    let kg = audit::geodesic_curvature_samples(&o.curve(256)).map_err(|e| e.to_string())?;
    let target = 2.0f64.sqrt();
    for v in kg {
        if (v - target).abs() > 1e-9 {
            return Err(format!("circle curvature {v} != {target}"));
        }
    }
    Ok(())
}

fn suite_variational() -> Result<(), String> {
    let o = CircleOrbit::new(Frame::canonical(), 0.1);
    let m = monodromy(&o.curve(256), &Curvature::Constant(o.k0())).map_err(|e| e.to_string())?;
    if m.geometric_mult_one != 3 || m.algebraic_mult_one != 4 {
        return Err(format!(
            "multiplicities geo {} alg {}",
            m.geometric_mult_one, m.algebraic_mult_one
        ));
    }
    Ok(())
}

fn suite_reduction() -> Result<(), String> {
    let r = 0.1;
    let o = CircleOrbit::new(Frame::canonical(), r);
    let v = sigma23(&o, &parse_selector("linear-e1").map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let expect = 4.0 * PI * PI * r.powi(3) / (1.0 - 4.0 * PI * PI * r * r);
    if (v.sigma3 - expect).abs() > 1e-10 || v.sigma2.abs() > 1e-10 {
        return Err(format!("sigma oracle miss: ({}, {})", v.sigma2, v.sigma3));
    }
    Ok(())
}

fn suite_solver_and_audit() -> Result<(), String> {
    let r = 0.05;
    let chart = CenterChart::at_point(HPoint::origin());
    let k1 = parse_selector("linear-e3").map_err(|e| e.to_string())?;
    let zero = find_reduced_zero(&chart, r, &k1, (0.01, 0.01)).map_err(|e| e.to_string())?;
    let (section, seed) = seed_from_reduced_zero(&chart, r, &zero).map_err(|e| e.to_string())?;
    let spec = PerturbationSpec::new((1.0 + r * r).sqrt() / r, k1, 1e-3);
    let rec = solve_orbit(&spec, &section, &seed, Some(&zero)).map_err(|e| e.to_string())?;
    if rec.closure_residual > 1e-9 {
        return Err(format!("closure {}", rec.closure_residual));
    }
    if rec.geometric_mult_one != 1 {
        return Err(format!("perturbed multiplicity {}", rec.geometric_mult_one));
    }
    let report = audit::audit_record(&rec).map_err(|e| e.to_string())?;
    if !report.pass {
        return Err(format!(
            "audit failed: gb {} winding {}",
            report.gauss_bonnet_residual, report.winding_number
        ));
    }
    Ok(())
}

fn suite_sweep() -> Result<(), String> {
    let entries =
        sweep_energy(&Curvature::Constant(1.0), &[0.5, 1.0, 2.0]).map_err(|e| e.to_string())?;
    for e in &entries {
        if !e.pass {
            return Err(format!("sweep entry c={} failed: {:?}", e.c, e.outcome));
        }
    }
    Ok(())
}

fn suite_store() -> Result<(), String> {
    let cfg = RunConfig {
        command: "selftest".into(),
        r: Some(0.05),
        eps: Some(1e-3),
        seed: Some(crate::DEFAULT_SEED),
        ..Default::default()
    };
    let back = RunConfig::from_config_str(&cfg.to_config_string()).map_err(|e| e.to_string())?;
    if back != cfg {
        return Err("config round trip mismatch".into());
    }
    if SCHEMA_VERSION != 1 {
        return Err("unexpected schema version".into());
    }
    Ok(())
}

/// Geodesic curvature tangency sanity: a pure geodesic audits at k_g = 0.
fn suite_geodesic() -> Result<(), String> {
    let mut points = Vec::new();
    let mut velocities = Vec::new();
    for j in 0..64 {
        let t = j as f64 / 64.0;
        points.push(HPoint(MVec3::E3 * t.cosh() + MVec3::E2 * t.sinh()));
        velocities.push(MVec3::E3 * t.sinh() + MVec3::E2 * t.cosh());
    }
    let c = crate::hyperboloid::Curve::new(points, velocities).map_err(|e| e.to_string())?;
    for v in audit::geodesic_curvature_samples(&c).map_err(|e| e.to_string())? {
        if v.abs() > 1e-9 {
            return Err(format!("geodesic k_g {v}"));
        }
    }
    Ok(())
}

pub fn run_all(seed: u64) -> SelftestReport {
    let suites: Vec<(&str, Box<dyn Fn() -> Result<(), String>>)> = vec![
        ("minkowski", Box::new(move || suite_minkowski(seed))),
        ("hyperboloid", Box::new(move || suite_hyperboloid(seed))),
        ("flow", Box::new(suite_flow)),
        ("orbits", Box::new(suite_orbits)),
        ("geodesic", Box::new(suite_geodesic)),
        ("variational", Box::new(suite_variational)),
        ("reduction", Box::new(suite_reduction)),
        ("solver", Box::new(suite_solver_and_audit)),
        ("sweep", Box::new(suite_sweep)),
        ("store", Box::new(suite_store)),
    ];
    let mut outcomes = Vec::new();
    let mut pass = true;
    for (name, f) in suites {
        let t0 = Instant::now();
        let res = f();
        let millis = t0.elapsed().as_millis();
        let ok = res.is_ok();
        pass &= ok;
        outcomes.push(SuiteOutcome {
            name: name.to_string(),
            pass: ok,
            millis,
            detail: res.err().unwrap_or_default(),
        });
    }
    SelftestReport { seed, pass, suites: outcomes }
}
