#![allow(dead_code)]

use rand::Rng;
use tentwave::local_solver::{BoundaryConstraint, TentInflow, TentMaterial};
use tentwave::mesh1d::{Region, Tent, TentType};

pub fn random_region(rng: &mut impl Rng) -> Region {
    Region { kappa1: rng.random_range(0.25..4.0), kappa2: rng.random_range(0.25..4.0) }
}

/// Random tent satisfying the local CFL bound at `margin` for the given side speeds.
pub fn random_tent(rng: &mut impl Rng, kind: TentType, speed_l: f64, speed_r: f64, margin: f64) -> Tent {
    let h_l = if kind == TentType::Left { 0.0 } else { rng.random_range(0.005..0.02) };
    let h_r = if kind == TentType::Right { 0.0 } else { rng.random_range(0.005..0.02) };
    let p_l: f64 = if kind == TentType::Left { 0.0 } else { rng.random_range(-0.5..1.0) };
    let p_r: f64 = if kind == TentType::Right { 0.0 } else { rng.random_range(-0.5..1.0) };
    let mut k_max: f64 = 0.05;
    if kind != TentType::Left && p_l != 0.0 {
        k_max = k_max.min(margin * h_l / (speed_l * p_l.abs()));
    }
    if kind != TentType::Right && p_r != 0.0 {
        k_max = k_max.min(margin * h_r / (speed_r * p_r.abs()));
    }
    let k = k_max * rng.random_range(0.05..1.0);
    let (center, x) = match kind {
        TentType::Left => (0, 0.0),
        TentType::Right => (10, 1.0),
        TentType::Interior => (5, 0.5),
    };
    Tent { center, tent_type: kind, x, t_bottom: rng.random_range(0.0..1.0), k, h_l, h_r, p_l, p_r }
}

pub fn random_kind(rng: &mut impl Rng) -> TentType {
    match rng.random_range(0..3) {
        0 => TentType::Left,
        1 => TentType::Right,
        _ => TentType::Interior,
    }
}

pub fn random_pair(rng: &mut impl Rng) -> [f64; 2] {
    [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
}

pub fn random_inflow(rng: &mut impl Rng, tent: &Tent) -> TentInflow {
    TentInflow {
        bottom: random_pair(rng),
        left: tent.has_left().then(|| random_pair(rng)),
        right: tent.has_right().then(|| random_pair(rng)),
    }
}

/// Random material-jump or homogeneous tent with its material and constraint.
pub fn random_general_tent(rng: &mut impl Rng, margin: f64) -> (Tent, TentMaterial, BoundaryConstraint) {
    let c = rng.random_range(0.5..2.0);
    let left = random_region(rng);
    let right = if rng.random_bool(0.5) { left } else { random_region(rng) };
    let speed = |r: Region| c / (r.kappa1 * r.kappa2).sqrt();
    let kind = random_kind(rng);
    let tent = random_tent(rng, kind, speed(left), speed(right), margin);
    let z = rng.random_range(0.0..3.0);
    let constraint = BoundaryConstraint::for_tent(&tent, z, z);
    (tent, TentMaterial { c, left, right }, constraint)
}
