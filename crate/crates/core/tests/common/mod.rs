#![allow(dead_code)]

use filippov::builtin::NamedSystem;
use filippov::integrate::{integrate_orbit_with, Chooser, Choice, Decision, SigmaAction};
use filippov::{NsvfSystem, Orbit, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Picks a uniformly random option, sometimes with a short dwell on an escaping slide.
pub struct RandomChooser<'a, R: Rng>(pub &'a mut R);

impl<R: Rng> Chooser for RandomChooser<'_, R> {
    fn choose(&mut self, d: &Decision) -> Choice {
        let a = d.options[self.0.gen_range(0..d.options.len())];
        if d.escaping && self.0.gen_bool(0.3) {
            let exit = if self.0.gen_bool(0.5) { SigmaAction::ExitToPlus } else { SigmaAction::ExitToMinus };
            return Choice::after(exit, self.0.gen_range(0.05..0.4));
        }
        Choice::new(a)
    }
}

pub fn random_point<R: Rng>(named: &NamedSystem, rng: &mut R) -> Point {
    let b = named.seed_domain().unwrap();
    let mut p = [0.0; 3];
    for i in 0..named.config.dimension {
        p[i] = rng.gen_range(b.min[i]..b.max[i]);
    }
    p
}

/// A random solution through a random seed, falling back to default choices
/// when a sampled dwell turns out to be infeasible.
pub fn random_orbit<R: Rng>(named: &NamedSystem, sys: &NsvfSystem, rng: &mut R, horizon: f64) -> Orbit {
    let p = random_point(named, rng);
    let mut back_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut fwd = RandomChooser(rng);
    let mut bwd = RandomChooser(&mut back_rng);
    match integrate_orbit_with(sys, p, &mut fwd, &mut bwd, horizon) {
        Ok(o) => o,
        Err(_) => filippov::integrate_orbit(sys, p, &[], horizon).unwrap(),
    }
}

pub fn systems() -> Vec<(NamedSystem, NsvfSystem)> {
    filippov::builtin::all()
        .into_iter()
        .map(|n| {
            let s = n.system().unwrap();
            (n, s)
        })
        .collect()
}
