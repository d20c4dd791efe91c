//! Random instance generators for the suites.

use rand::Rng as _;

use crate::config::Configuration;
use crate::constructions::random_configuration;
use crate::currents::{BoxSampler, GaussianWave, Wavefunction};
use crate::error::Result;
use crate::fields::{BumpTerm, Point, ScalarField, VectorField, VectorPrimitive};
use crate::flows::{Diffeo, FlowStep, IntegratorSettings};
use crate::rng::Rng;

fn uniform_point(rng: &mut Rng, dim: usize, half_width: f64) -> Point {
    Point::from_fn(dim, |_, _| rng.random_range(-half_width..half_width))
}

/// One or two bumps centered in `[-0.5, 0.5]^n` with `|coeff| < coeff`.
pub fn scalar_field(rng: &mut Rng, dim: usize, coeff: f64) -> ScalarField {
    let count = rng.random_range(1..=2);
    let terms = (0..count)
        .map(|_| BumpTerm {
            center: uniform_point(rng, dim, 0.5),
            radius: rng.random_range(0.8..1.5),
            coeff: rng.random_range(-coeff..coeff),
        })
        .collect();
    ScalarField::new(dim, terms).expect("valid random field")
}

/// One or two translation or (in the plane) rotation primitives.
pub fn vector_field(rng: &mut Rng, dim: usize) -> VectorField {
    let count = rng.random_range(1..=2);
    let terms = (0..count)
        .map(|_| {
            let center = uniform_point(rng, dim, 0.5);
            let radius = rng.random_range(0.8..1.5);
            if dim == 2 && rng.random_bool(0.5) {
                VectorPrimitive::Rotate { center, radius, rate: rng.random_range(-1.5..1.5) }
            } else {
                VectorPrimitive::Translate { center, radius, dir: uniform_point(rng, dim, 1.0) }
            }
        })
        .collect();
    VectorField::new(dim, terms).expect("valid random field")
}

/// Word of `1..=max_steps` random flows with `|r| < r_max`; the identity
/// when `max_steps` is zero.
pub fn diffeo(rng: &mut Rng, dim: usize, max_steps: usize, r_max: f64, tol: f64) -> Diffeo {
    if max_steps == 0 {
        return Diffeo::identity(dim);
    }
    let count = rng.random_range(1..=max_steps);
    let steps = (0..count).map(|_| FlowStep::new(vector_field(rng, dim), rng.random_range(-r_max..r_max))).collect();
    Diffeo::new(dim, steps, IntegratorSettings::with_tol(tol)).expect("valid random word")
}

/// Large planar rotations about random centers; these wind points around
/// each other.
pub fn braiding_diffeo(rng: &mut Rng, max_steps: usize) -> Diffeo {
    let count = rng.random_range(1..=max_steps.max(1));
    let steps = (0..count)
        .map(|_| {
            let field = VectorField::rotate(uniform_point(rng, 2, 0.6), rng.random_range(0.8..1.6), 1.0)
                .expect("valid rotation");
            FlowStep::new(field, rng.random_range(-6.0..6.0))
        })
        .collect();
    Diffeo::from_steps(2, steps).expect("valid word")
}

/// `count` unit-mass points in `[-half_width, half_width]^n`, sorted.
pub fn configuration(rng: &mut Rng, dim: usize, count: usize, half_width: f64) -> Result<Configuration> {
    random_configuration(rng, dim, count, half_width, 0.05 * half_width)
}

/// Random masses in `[0.5, 2)`.
pub fn masses(rng: &mut Rng, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.random_range(0.5..2.0)).collect()
}

/// `count` configurations with the given masses in `[-1, 1]^n`.
pub fn samples(rng: &mut Rng, dim: usize, masses: &[f64], count: usize) -> Vec<Configuration> {
    let sampler = BoxSampler::new(vec![-1.0; dim], vec![1.0; dim], masses.to_vec()).expect("valid box");
    (0..count).map(|_| sampler.sample(rng)).collect()
}

pub fn wave(rng: &mut Rng, dim: usize, particles: usize, value_dim: usize) -> Wavefunction {
    Wavefunction::new(GaussianWave::random(rng, dim, particles, value_dim, 0.6))
}
