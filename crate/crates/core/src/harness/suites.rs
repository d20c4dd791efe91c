use std::f64::consts::PI;

use rand::Rng as _;
use serde_json::json;

use super::gen;
use super::{CheckRecord, Ctx, InputDigest, Outcome, RunError};
use crate::braid::{
    extract_braid, extract_permutation, permutation_of, trace_path, BraidRep, BraidWord, CMatrix, C64,
};
use crate::classical::{correspondence_residuals, momentum, poisson, position, PhasePoint};
use crate::config::{detect_stabilizer, Configuration, Permutation, STABILIZER_TOL};
use crate::constructions::{random_stabilizer_loop, rotation_exchange, straight_exchange};
use crate::currents::{
    braid_cocycle, cocycle_residual, commutator_residual_j_j, commutator_residual_rho_j, commutator_residual_rho_rho,
    intertwining_residual, jacobi_residual, mc_norm_change, stone_residual, v_apply, v_compose_residual, BoxSampler,
    PhysicalConstants, StructureConstants,
};
use crate::error::KinematError;
use crate::fields::{directional_derivative, lie_bracket, Point, VectorField, VectorPrimitive};
use crate::flows::{flow_point, Diffeo, FlowStep, IntegratorSettings, DEFAULT_TOL};
use crate::group::{se_compose, se_distance, se_identity, se_inverse, GroupElement, SampleSet, SAMPLE_COUNT};
use crate::rng::{substream, Rng};

type Checks = Result<Vec<CheckRecord>, RunError>;

/// Integrator tolerance for checks that differentiate flows numerically.
const FINE_TOL: f64 = 1e-13;

/// Both exchange constructions of a pair at distance `L` move points only
/// within `1.5 L` of the pair midpoint.
const HOMOTOPY_REACH: f64 = 1.5;

fn dim_params(n: usize) -> String {
    format!("/n={n}")
}

fn params(n: usize, particles: usize) -> String {
    format!("/n={n}/N={particles}")
}

fn constants(ctx: &Ctx) -> PhysicalConstants {
    PhysicalConstants { hbar: ctx.cfg.hbar }
}

fn point(rng: &mut Rng, dim: usize, half_width: f64) -> Point {
    Point::from_fn(dim, |_, _| rng.random_range(-half_width..half_width))
}

fn mismatches(a: &Permutation, b: &Permutation) -> f64 {
    if a.len() != b.len() {
        return a.len().max(b.len()) as f64;
    }
    a.as_slice().iter().zip(b.as_slice()).filter(|(x, y)| x != y).count() as f64
}

fn unequal<T: PartialEq>(a: &T, b: &T) -> Outcome {
    Outcome::from(if a == b { 0.0 } else { 1.0 })
}

pub(super) fn flow_laws(ctx: &Ctx) -> Checks {
    let count = ctx.cfg.instances();
    let steps = ctx.cfg.steps;
    let mut out = Vec::new();
    for n in ctx.cfg.dims() {
        let p = dim_params(n);
        out.push(ctx.check("one-parameter", &p, count, |rng, d| {
            let g = gen::vector_field(rng, n);
            let x = point(rng, n, 0.8);
            let (r1, r2) = (rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            d.add(&g);
            d.add(&(x.as_slice(), r1, r2));
            let split = flow_point(&g, r2, &flow_point(&g, r1, &x, DEFAULT_TOL)?, DEFAULT_TOL)?;
            let whole = flow_point(&g, r1 + r2, &x, DEFAULT_TOL)?;
            Ok((split - whole).norm().into())
        })?);
        out.push(ctx.check("inverse", &p, count, |rng, d| {
            let phi = gen::diffeo(rng, n, steps, 1.0, DEFAULT_TOL);
            let x = point(rng, n, 0.8);
            d.add(&phi);
            d.add(x.as_slice());
            Ok((phi.inverse().apply(&phi.apply(&x)?)? - x).norm().into())
        })?);
        out.push(ctx.check("jacobian", &p, count, |rng, d| {
            let phi = gen::diffeo(rng, n, steps, 1.0, FINE_TOL);
            let x = point(rng, n, 0.8);
            d.add(&phi);
            d.add(x.as_slice());
            let (_, jac) = phi.apply_with_jacobian(&x)?;
            let h = 1e-5 * x.amax().max(1.0);
            let mut worst = 0.0f64;
            for k in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let col = (phi.apply(&xp)? - phi.apply(&xm)?) / (2.0 * h);
                worst = worst.max((col - jac.column(k)).amax());
            }
            Ok((worst / (1.0 + jac.amax())).into())
        })?);
        out.push(ctx.check("liouville", &p, count, |rng, d| {
            let g = gen::vector_field(rng, n);
            let r = rng.random_range(-1.5..1.5);
            let x = point(rng, n, 0.8);
            d.add(&g);
            d.add(&(x.as_slice(), r));
            let tol = 1e-12;
            let phi = Diffeo::new(n, vec![FlowStep::new(g.clone(), r)], IntegratorSettings::with_tol(tol))?;
            let (_, jac) = phi.apply_with_jacobian(&x)?;
            let traj = phi.trajectory(&x)?;
            let mut integral = 0.0;
            for w in traj.windows(2) {
                let h = w[1].s - w[0].s;
                let mid = flow_point(&g, 0.5 * h, &w[0].point, tol)?;
                integral +=
                    h / 6.0 * (g.divergence(&w[0].point)? + 4.0 * g.divergence(&mid)? + g.divergence(&w[1].point)?);
            }
            Ok((jac.determinant().abs().ln() - integral).abs().into())
        })?);
        out.push(ctx.check("bracket-flow", &p, count, |rng, d| {
            let (g1, g2) = (gen::vector_field(rng, n), gen::vector_field(rng, n));
            let x = point(rng, n, 0.5);
            d.add(&g1);
            d.add(&g2);
            d.add(x.as_slice());
            let quotient = |s: f64| -> crate::Result<Point> {
                let word = vec![
                    FlowStep::new(g1.clone(), s),
                    FlowStep::new(g2.clone(), s),
                    FlowStep::new(g1.clone(), -s),
                    FlowStep::new(g2.clone(), -s),
                ];
                let phi = Diffeo::new(n, word, IntegratorSettings::with_tol(FINE_TOL))?;
                Ok((phi.apply(&x)? - &x) / (s * s))
            };
            // Richardson on s, s/2, s/4, s/8 removes the O(s), O(s^2), O(s^3) terms
            let mut table = [0.01, 0.005, 0.0025, 0.00125].map(|s| quotient(s)).into_iter().collect::<crate::Result<Vec<_>>>()?;
            for order in 1..=3 {
                let w = f64::powi(2.0, order);
                table = table.windows(2).map(|p| (&p[1] * w - &p[0]) / (w - 1.0)).collect();
            }
            let limit = &table[0];
            let exact = lie_bracket(g1.clone(), g2.clone())?.value(&x)?;
            Ok(((limit - &exact).norm() / (1.0 + exact.norm())).into())
        })?);
        out.push(ctx.check("directional-derivative", &p, count, |rng, d| {
            let f = gen::scalar_field(rng, n, 1.0);
            let g = gen::vector_field(rng, n);
            let x = point(rng, n, 0.8);
            d.add(&f);
            d.add(&g);
            d.add(x.as_slice());
            let s = 1e-4;
            let forward = f.eval(&flow_point(&g, s, &x, FINE_TOL)?)?;
            let backward = f.eval(&flow_point(&g, -s, &x, FINE_TOL)?)?;
            let exact = directional_derivative(g.clone(), f.clone())?.value(&x)?;
            Ok((((forward - backward) / (2.0 * s) - exact).abs() / (1.0 + exact.abs())).into())
        })?);
    }
    Ok(out)
}

fn group_element(rng: &mut Rng, d: &mut InputDigest, n: usize, steps: usize) -> crate::Result<GroupElement> {
    let f = gen::scalar_field(rng, n, 1.0);
    let phi = gen::diffeo(rng, n, steps, 1.0, DEFAULT_TOL);
    d.add(&f);
    d.add(&phi);
    GroupElement::new(f, phi)
}

pub(super) fn group_axioms(ctx: &Ctx) -> Checks {
    let count = ctx.cfg.instances();
    let steps = ctx.cfg.steps;
    let mut out = Vec::new();
    for n in ctx.cfg.dims() {
        let p = dim_params(n);
        out.push(ctx.check("associativity", &p, count, |rng, d| {
            let (a, b, c) =
                (group_element(rng, d, n, steps)?, group_element(rng, d, n, steps)?, group_element(rng, d, n, steps)?);
            let samples = SampleSet::covering(&[&a, &b, &c], rng.random(), SAMPLE_COUNT);
            let left = se_compose(&se_compose(&a, &b)?, &c)?;
            let right = se_compose(&a, &se_compose(&b, &c)?)?;
            Ok(se_distance(&left, &right, &samples)?.into())
        })?);
        out.push(ctx.check("identity", &p, count, |rng, d| {
            let e = group_element(rng, d, n, steps)?;
            let id = se_identity(n);
            let samples = SampleSet::covering(&[&e], rng.random(), SAMPLE_COUNT);
            let left = se_distance(&se_compose(&id, &e)?, &e, &samples)?;
            let right = se_distance(&se_compose(&e, &id)?, &e, &samples)?;
            Ok(left.max(right).into())
        })?);
        out.push(ctx.check("inverse", &p, count, |rng, d| {
            let e = group_element(rng, d, n, steps)?;
            let (id, inv) = (se_identity(n), se_inverse(&e));
            let samples = SampleSet::covering(&[&e], rng.random(), SAMPLE_COUNT);
            let right = se_distance(&se_compose(&e, &inv)?, &id, &samples)?;
            let left = se_distance(&se_compose(&inv, &e)?, &id, &samples)?;
            Ok(left.max(right).into())
        })?);
    }
    Ok(out)
}

pub(super) fn current_algebra(ctx: &Ctx) -> Checks {
    let count = ctx.cfg.instances();
    let jacobi_count = count.div_ceil(4);
    let s = ctx.cfg.samples();
    let c = constants(ctx);
    let sc = if ctx.cfg.flip_jj_sign {
        StructureConstants { j_j: C64::new(0.0, c.hbar), ..StructureConstants::canonical(c) }
    } else {
        StructureConstants::canonical(c)
    };
    let mut out = Vec::new();
    for n in ctx.cfg.dims() {
        for big_n in ctx.cfg.particle_counts() {
            let p = params(n, big_n);
            let setup = |rng: &mut Rng| {
                let masses = gen::masses(rng, big_n);
                let psi = gen::wave(rng, n, big_n, 1);
                let samples = gen::samples(rng, n, &masses, s);
                (psi, samples)
            };
            out.push(ctx.check("rho-rho", &p, count, |rng, d| {
                let (f1, f2) = (gen::scalar_field(rng, n, 1.0), gen::scalar_field(rng, n, 1.0));
                d.add(&f1);
                d.add(&f2);
                let (psi, samples) = setup(rng);
                Ok(commutator_residual_rho_rho(f1, f2, &psi, &samples)?.max.into())
            })?);
            out.push(ctx.check("rho-j", &p, count, |rng, d| {
                let (f, g) = (gen::scalar_field(rng, n, 1.0), gen::vector_field(rng, n));
                d.add(&f);
                d.add(&g);
                let (psi, samples) = setup(rng);
                Ok(commutator_residual_rho_j(f, g, &psi, &samples, c)?.max.into())
            })?);
            out.push(ctx.check("j-j", &p, count, |rng, d| {
                let (g1, g2) = (gen::vector_field(rng, n), gen::vector_field(rng, n));
                d.add(&g1);
                d.add(&g2);
                let (psi, samples) = setup(rng);
                Ok(commutator_residual_j_j(g1, g2, &psi, &samples, c)?.max.into())
            })?);
            out.push(ctx.check("jacobi", &p, jacobi_count, |rng, d| {
                let f = gen::scalar_field(rng, n, 1.0);
                let (g1, g2) = (gen::vector_field(rng, n), gen::vector_field(rng, n));
                d.add(&f);
                d.add(&g1);
                d.add(&g2);
                let (psi, samples) = setup(rng);
                Ok(jacobi_residual(f, g1, g2, &psi, &samples, c, sc)?.max.into())
            })?);
        }
    }
    Ok(out)
}

pub(super) fn stone_limit(ctx: &Ctx) -> Checks {
    let count = ctx.cfg.instances();
    let s = ctx.cfg.samples();
    let mut out = Vec::new();
    for n in ctx.cfg.dims() {
        for big_n in ctx.cfg.particle_counts() {
            out.push(ctx.check("stone", &params(n, big_n), count, |rng, d| {
                // keeps |<gamma, f>| below 2
                let f = gen::scalar_field(rng, n, 1.0 / big_n as f64);
                d.add(&f);
                let psi = gen::wave(rng, n, big_n, 1);
                let samples = gen::samples(rng, n, &vec![1.0; big_n], s);
                Ok(stone_residual(f, &psi, &samples)?.max.into())
            })?);
        }
    }
    Ok(out)
}

pub(super) fn intertwining(ctx: &Ctx) -> Checks {
    let count = ctx.cfg.instances();
    let s = ctx.cfg.samples();
    let steps = ctx.cfg.steps;
    let c = constants(ctx);
    let mut out = Vec::new();
    for n in ctx.cfg.dims() {
        for big_n in ctx.cfg.particle_counts() {
            out.push(ctx.check("intertwining", &params(n, big_n), count, |rng, d| {
                let f = gen::scalar_field(rng, n, 1.0);
                let phi = gen::diffeo(rng, n, steps, 1.0, DEFAULT_TOL);
                d.add(&f);
                d.add(&phi);
                let masses = gen::masses(rng, big_n);
                let psi = gen::wave(rng, n, big_n, 1);
                let samples = gen::samples(rng, n, &masses, s);
                Ok(intertwining_residual(f, &phi, None, &psi, &samples, c)?.max.into())
            })?);
        }
    }
    Ok(out)
}

fn cocycle_reps(ctx: &Ctx, particles: usize) -> crate::Result<Vec<(String, BraidRep)>> {
    let random_theta =
        ctx.cfg.theta.unwrap_or_else(|| substream(ctx.seed(), &["cocycle", "theta"]).random_range(0.0..2.0 * PI));
    Ok(vec![
        ("abelian-0".into(), BraidRep::abelian(particles, 0.0)?),
        ("abelian-pi/4".into(), BraidRep::abelian(particles, PI / 4.0)?),
        ("abelian-pi".into(), BraidRep::abelian(particles, PI)?),
        ("abelian-random".into(), BraidRep::abelian(particles, random_theta)?),
        ("permutation".into(), BraidRep::permutation(particles)?),
    ])
}

fn numerical(check: &str, source: KinematError) -> RunError {
    RunError::Numerical { check: check.into(), source }
}

/// Configuration on which two rotation exchanges of disjoint adjacent pairs
/// have disjoint supports.
fn far_exchange_pair(rng: &mut Rng, particles: usize) -> crate::Result<(Configuration, Diffeo, Diffeo)> {
    loop {
        let gamma = gen::configuration(rng, 2, particles, 1.0)?;
        let (Ok(a), Ok(b)) = (rotation_exchange(&gamma, 0, 1, true), rotation_exchange(&gamma, 2, 3, rng.random_bool(0.5)))
        else {
            continue;
        };
        let (ba, bb) = (&a.support()[0], &b.support()[0]);
        if (&ba.center - &bb.center).norm() > ba.radius + bb.radius {
            return Ok((gamma, a, b));
        }
    }
}

pub(super) fn cocycle(ctx: &Ctx) -> Checks {
    let count = ctx.cfg.instances();
    let s = ctx.cfg.samples();
    let steps = ctx.cfg.steps.max(1);
    let c = constants(ctx);
    let mut out = Vec::new();
    for big_n in ctx.cfg.particle_counts() {
        let reps = cocycle_reps(ctx, big_n).map_err(|e| numerical("cocycle", e))?;
        for (label, rep) in &reps {
            let p = format!("/rep={label}/N={big_n}");
            out.push(ctx.check("cocycle", &p, count, |rng, d| {
                let gamma = gen::configuration(rng, 2, big_n, 0.7)?;
                let (phi1, phi2) = (gen::braiding_diffeo(rng, steps), gen::braiding_diffeo(rng, steps));
                d.add(&gamma);
                d.add(&phi1);
                d.add(&phi2);
                Ok(cocycle_residual(&phi1, &phi2, &gamma, rep)?.into())
            })?);
            out.push(ctx.check("inverse-cancel", &p, count.div_ceil(5), |rng, d| {
                let gamma = gen::configuration(rng, 2, big_n, 0.7)?;
                let phi = gen::braiding_diffeo(rng, steps);
                d.add(&gamma);
                d.add(&phi);
                let chi = braid_cocycle(&phi.compose(&phi.inverse())?, &gamma, rep)?;
                Ok((chi - CMatrix::identity(rep.dim(), rep.dim())).norm().into())
            })?);
            if big_n >= 4 {
                out.push(ctx.check("far-commutation", &p, count.div_ceil(5), |rng, d| {
                    let (gamma, a, b) = far_exchange_pair(rng, big_n)?;
                    d.add(&gamma);
                    let ab = braid_cocycle(&a.compose(&b)?, &gamma, rep)?;
                    let ba = braid_cocycle(&b.compose(&a)?, &gamma, rep)?;
                    Ok((ab - ba).norm().into())
                })?);
            }
            if label == "abelian-random" || label == "permutation" {
                out.push(ctx.check("v-compose", &p, count.div_ceil(5), |rng, d| {
                    let (phi1, phi2) = (gen::braiding_diffeo(rng, steps), gen::braiding_diffeo(rng, steps));
                    d.add(&phi1);
                    d.add(&phi2);
                    let psi = gen::wave(rng, 2, big_n, rep.dim());
                    let samples = gen::samples(rng, 2, &vec![1.0; big_n], s);
                    Ok(v_compose_residual(&phi1, &phi2, Some(rep), &psi, &samples, c)?.max.into())
                })?);
            }
        }
    }
    Ok(out)
}

/// Points near `(j - (N-1)/2, 0)` with small jitter, sorted.
fn row_configuration(rng: &mut Rng, particles: usize) -> crate::Result<Configuration> {
    let points = (0..particles)
        .map(|j| {
            let x = j as f64 - 0.5 * (particles as f64 - 1.0) + rng.random_range(-0.1..0.1);
            Point::from_vec(vec![x, rng.random_range(-0.1..0.1)])
        })
        .collect();
    Ok(Configuration::unit_masses(points)?.sorted_lexicographic())
}

/// Pairs whose exchange constructions both stay inside a vertical band free
/// of the other points. The two exchange paths are then homotopic and cross
/// no other strand in the projection, so their words agree letter for letter.
fn isolated_pairs(gamma: &Configuration) -> Vec<(usize, usize)> {
    let pts = gamma.points();
    let mut pairs = Vec::new();
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            let mid = (&pts[a] + &pts[b]) * 0.5;
            let reach = HOMOTOPY_REACH * (&pts[b] - &pts[a]).norm();
            if (0..pts.len()).filter(|&k| k != a && k != b).all(|k| (pts[k][0] - mid[0]).abs() > reach) {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

fn phase_outcome(chi: C64, expected: C64) -> Outcome {
    Outcome { residual: (chi - expected).norm(), observed: Some(json!({ "phase": [chi.re, chi.im] })) }
}

fn planar_braid_checks(ctx: &Ctx, big_n: usize, out: &mut Vec<CheckRecord>) -> Result<(), RunError> {
    let count = ctx.cfg.instances();
    let steps = ctx.cfg.steps.max(1);
    let theta = ctx.cfg.theta.unwrap_or(PI);
    let p = params(2, big_n);
    let exchange = |rng: &mut Rng, d: &mut InputDigest| -> crate::Result<(Configuration, usize, Diffeo)> {
        let gamma = row_configuration(rng, big_n)?;
        let pos = rng.random_range(0..big_n - 1);
        d.add(&gamma);
        d.add(&pos);
        let phi = rotation_exchange(&gamma, pos, pos + 1, true)?;
        Ok((gamma, pos, phi))
    };
    out.push(ctx.check("exchange-word", &p, count, |rng, d| {
        let (gamma, pos, phi) = exchange(rng, d)?;
        let word = extract_braid(&trace_path(&phi, &gamma)?)?;
        let expected = BraidWord::from_pairs(big_n, &[(pos + 1, 1)])?;
        Ok(Outcome { observed: Some(json!({ "word": word.to_string() })), ..unequal(&word, &expected) })
    })?);
    out.push(ctx.check("exchange-phase", &format!("/theta={theta}{p}"), 1, |rng, d| {
        let (gamma, _, phi) = exchange(rng, d)?;
        let chi = braid_cocycle(&phi, &gamma, &BraidRep::abelian(big_n, theta)?)?[(0, 0)];
        Ok(phase_outcome(chi, C64::from_polar(1.0, theta)))
    })?);
    let fixed = [("0", 0.0, C64::new(1.0, 0.0)), ("pi/2", PI / 2.0, C64::new(0.0, 1.0)), ("pi", PI, C64::new(-1.0, 0.0))];
    for (label, angle, expected) in fixed {
        out.push(ctx.check("anyon-phase", &format!("/theta={label}{p}"), count.div_ceil(10), |rng, d| {
            let (gamma, _, phi) = exchange(rng, d)?;
            let chi = braid_cocycle(&phi, &gamma, &BraidRep::abelian(big_n, angle)?)?[(0, 0)];
            Ok(phase_outcome(chi, expected))
        })?);
    }
    out.push(ctx.check("double-exchange", &format!("/theta={theta}{p}"), count.div_ceil(10), |rng, d| {
        let (gamma, _, phi) = exchange(rng, d)?;
        let chi = braid_cocycle(&phi.compose(&phi)?, &gamma, &BraidRep::abelian(big_n, theta)?)?[(0, 0)];
        Ok(phase_outcome(chi, C64::from_polar(1.0, 2.0 * theta)))
    })?);
    out.push(ctx.check("quotient", &p, count, |rng, d| {
        let gamma = gen::configuration(rng, 2, big_n, 1.0)?;
        let exchanges = rng.random_range(1..=4);
        let lp = random_stabilizer_loop(rng, &gamma, exchanges)?;
        d.add(&gamma);
        d.add(&lp.diffeo);
        let path = trace_path(&lp.diffeo, &gamma)?;
        let from_braid = permutation_of(&extract_braid(&path)?);
        let Ok(from_ends) = extract_permutation(&path, STABILIZER_TOL) else {
            return Ok((big_n as f64).into());
        };
        Ok((mismatches(&from_braid, &from_ends) + mismatches(&from_ends, &lp.permutation)).into())
    })?);
    out.push(ctx.check("homotopy", &p, count, |rng, d| {
        for _ in 0..200 {
            let gamma = gen::configuration(rng, 2, big_n, 1.0)?;
            let pairs = isolated_pairs(&gamma);
            if pairs.is_empty() {
                continue;
            }
            let (a, b) = pairs[rng.random_range(0..pairs.len())];
            let ccw = rng.random_bool(0.5);
            if let (Ok(rot), Ok(legs)) = (rotation_exchange(&gamma, a, b, ccw), straight_exchange(&gamma, a, b, ccw)) {
                d.add(&gamma);
                d.add(&(a, b, ccw));
                let w1 = extract_braid(&trace_path(&rot, &gamma)?)?;
                let w2 = extract_braid(&trace_path(&legs, &gamma)?)?;
                let observed = (w1 != w2).then(|| json!({ "rotation": w1.to_string(), "straight": w2.to_string() }));
                return Ok(Outcome { observed, ..unequal(&w1, &w2) });
            }
        }
        Err(KinematError::InvalidConfiguration("no pair admits both exchange constructions".into()))
    })?);
    out.push(ctx.check("refinement", &p, count, |rng, d| {
        let gamma = gen::configuration(rng, 2, big_n, 0.7)?;
        let phi = gen::braiding_diffeo(rng, steps);
        d.add(&gamma);
        d.add(&phi);
        let coarse = extract_braid(&trace_path(&phi, &gamma)?)?;
        let settings = IntegratorSettings { max_step: 0.05, ..phi.settings() };
        let dense = trace_path(&phi.clone().with_settings(settings)?, &gamma)?;
        let fine = extract_braid(&dense)?;
        let midpoints = extract_braid(&dense.refined())?;
        Ok(Outcome::from(unequal(&coarse, &fine).residual + unequal(&fine, &midpoints).residual))
    })?);
    out.push(ctx.check("reversal", &p, count, |rng, d| {
        let gamma = gen::configuration(rng, 2, big_n, 0.7)?;
        let phi = gen::braiding_diffeo(rng, steps);
        d.add(&gamma);
        d.add(&phi);
        let path = trace_path(&phi, &gamma)?;
        Ok(unequal(&extract_braid(&path.reversed())?, &extract_braid(&path)?.inverse()))
    })?);
    out.push(ctx.check("concatenation", &p, count, |rng, d| {
        let gamma = gen::configuration(rng, 2, big_n, 0.7)?;
        let (phi1, phi2) = (gen::braiding_diffeo(rng, steps), gen::braiding_diffeo(rng, steps));
        d.add(&gamma);
        d.add(&phi1);
        d.add(&phi2);
        let first = trace_path(&phi1, &gamma)?;
        let second = trace_path(&phi2, &first.end())?;
        let whole = extract_braid(&first.concat(&second)?)?;
        let parts = extract_braid(&first)?.concat(&extract_braid(&second)?)?.free_reduce();
        Ok(unequal(&whole, &parts))
    })?);
    Ok(())
}

pub(super) fn braid_oracles(ctx: &Ctx) -> Checks {
    let count = ctx.cfg.instances();
    let mut out = Vec::new();
    for n in ctx.cfg.dims() {
        for big_n in ctx.cfg.particle_counts() {
            if n == 2 {
                planar_braid_checks(ctx, big_n, &mut out)?;
                continue;
            }
            out.push(ctx.check("quotient-3d", &params(n, big_n), count, |rng, d| {
                let gamma = gen::configuration(rng, n, big_n, 1.0)?;
                let exchanges = rng.random_range(1..=4);
                let lp = random_stabilizer_loop(rng, &gamma, exchanges)?;
                d.add(&gamma);
                d.add(&lp.diffeo);
                Ok(match detect_stabilizer(&lp.diffeo, &gamma, STABILIZER_TOL)? {
                    Some(sigma) => mismatches(&sigma, &lp.permutation),
                    None => big_n as f64,
                }
                .into())
            })?);
        }
    }
    Ok(out)
}

pub(super) fn classical_correspondence(ctx: &Ctx) -> Checks {
    let count = ctx.cfg.instances();
    let s = ctx.cfg.samples();
    let c = constants(ctx);
    let mut out = Vec::new();
    for n in ctx.cfg.dims() {
        for big_n in ctx.cfg.particle_counts() {
            let p = params(n, big_n);
            let phase_points =
                |rng: &mut Rng| -> Vec<PhasePoint> { (0..s).map(|_| PhasePoint::random(rng, n, big_n, 1.0, 2.0)).collect() };
            out.push(ctx.check("coordinate", &p, count, |rng, _| {
                let mut worst = 0.0f64;
                for z in phase_points(rng) {
                    for j in 0..big_n {
                        for k in 0..big_n {
                            for l in 0..n {
                                for m in 0..n {
                                    let delta = if j == k && l == m { 1.0 } else { 0.0 };
                                    worst = worst.max((poisson(&position(j, l), &momentum(k, m), &z)? - delta).abs());
                                    worst = worst.max(poisson(&position(j, l), &position(k, m), &z)?.abs());
                                    worst = worst.max(poisson(&momentum(j, l), &momentum(k, m), &z)?.abs());
                                }
                            }
                        }
                    }
                }
                Ok(worst.into())
            })?);
            let families = |rng: &mut Rng, d: &mut InputDigest| {
                let (f, f2) = (gen::scalar_field(rng, n, 1.0), gen::scalar_field(rng, n, 1.0));
                let (g, g2) = (gen::vector_field(rng, n), gen::vector_field(rng, n));
                let masses = gen::masses(rng, big_n);
                d.add(&f);
                d.add(&f2);
                d.add(&g);
                d.add(&g2);
                d.add(&masses);
                (f, f2, g, g2, masses)
            };
            out.push(ctx.check("rho-rho", &p, count, |rng, d| {
                let (f, f2, g, g2, masses) = families(rng, d);
                Ok(correspondence_residuals(f, f2, g, g2, &masses, &phase_points(rng))?.rho_rho.into())
            })?);
            out.push(ctx.check("rho-j", &p, count, |rng, d| {
                let (f, f2, g, g2, masses) = families(rng, d);
                Ok(correspondence_residuals(f, f2, g, g2, &masses, &phase_points(rng))?.rho_j.into())
            })?);
            out.push(ctx.check("j-j", &p, count, |rng, d| {
                let (f, f2, g, g2, masses) = families(rng, d);
                Ok(correspondence_residuals(f, f2, g, g2, &masses, &phase_points(rng))?.j_j.into())
            })?);
            // the same (f, g) checked on both sides of the correspondence
            out.push(ctx.check("quantum-rho-j", &p, count, |rng, d| {
                let (f, f2, g, g2, masses) = families(rng, d);
                let zs = phase_points(rng);
                let classical = correspondence_residuals(f.clone(), f2, g.clone(), g2, &masses, &zs)?.rho_j;
                let gammas = zs.iter().map(|z| z.configuration(&masses)).collect::<crate::Result<Vec<_>>>()?;
                let psi = gen::wave(rng, n, big_n, 1);
                let quantum = commutator_residual_rho_j(f, g, &psi, &gammas, c)?.max;
                Ok(quantum.max(classical).into())
            })?);
        }
    }
    Ok(out)
}

/// Compressing translation flows supported in `[-1.2, 1.2]^2`.
fn mc_diffeo(rng: &mut Rng) -> Diffeo {
    let steps = (0..2)
        .map(|_| {
            let field = VectorField::new(
                2,
                vec![VectorPrimitive::Translate {
                    center: point(rng, 2, 0.3),
                    radius: rng.random_range(0.6..0.9),
                    dir: point(rng, 2, 1.0),
                }],
            )
            .expect("valid field");
            FlowStep::new(field, rng.random_range(0.3..0.8))
        })
        .collect();
    Diffeo::new(2, steps, IntegratorSettings::with_tol(1e-8)).expect("valid word")
}

pub(super) fn mc_unitarity(ctx: &Ctx) -> Checks {
    let count = ctx.cfg.instances();
    let samples = ctx.cfg.mc_samples();
    let sigmas = ctx.cfg.tolerance("unitarity-sigmas");
    let c = constants(ctx);
    let mut out = Vec::new();
    for n in ctx.cfg.dims() {
        for big_n in ctx.cfg.particle_counts() {
            for i in 0..count {
                let name = format!("mc-unitarity/unitarity{}/instance={i}", params(n, big_n));
                let started = std::time::Instant::now();
                let mut rng = crate::rng::indexed(ctx.seed(), &["mc-unitarity", &params(n, big_n)], i);
                let phi = mc_diffeo(&mut rng);
                let psi = gen::wave(&mut rng, n, big_n, 1);
                let mc_seed: u64 = rng.random();
                let mut digest = InputDigest::new();
                digest.add(&phi);
                digest.add(&(samples, mc_seed));
                let fail = |e| numerical(&name, e);
                let sampler = BoxSampler::containing(&phi.support(), n, 0.2, vec![1.0; big_n]).map_err(fail)?;
                let transformed = v_apply(&phi, None, &psi, c).map_err(fail)?;
                let est = mc_norm_change(&transformed, &psi, &sampler, samples, mc_seed).map_err(fail)?;
                let residual = est.value().norm();
                let tolerance = sigmas * est.std_error;
                out.push(CheckRecord {
                    name,
                    inputs_digest: digest.hex(),
                    instances: 1,
                    residual,
                    tolerance,
                    passed: residual <= tolerance,
                    observed: Some(json!({ "difference": [est.re, est.im], "std_error": est.std_error, "samples": samples })),
                    wall_time_ms: ctx.cfg.record_timings.then(|| started.elapsed().as_secs_f64() * 1e3),
                });
            }
        }
    }
    Ok(out)
}
