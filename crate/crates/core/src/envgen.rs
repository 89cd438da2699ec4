//! Builders for supportive, adversarial and genome-parameterized worlds.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Cell, EnvironmentSpec, NeedKind, Pos, ADVERSARIAL_TAG};

/// Salience and replenishment of ordinary ("medium") cells.
pub const SUPPORTIVE_SALIENCE: f64 = 1.0;
/// Salience of the adversarial belonging cell in the fixed adversarial world.
pub const ADVERSARIAL_SALIENCE: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum EnvGenError {
    #[error("adversarial replenishment must lie in (0, 1], got {0}")]
    BadReplenish(f64),
    #[error("{requested} cells do not fit in a grid of {capacity}")]
    OverCapacity { requested: usize, capacity: usize },
    #[error("genome places no supportive cells")]
    NoSupportiveCells,
}

/// Searchable environment parameters: discrete cell counts plus the salience
/// and replenishment of the adversarial belonging cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvGenome {
    pub n_adversarial_belonging: u32,
    pub n_supportive_per_need: BTreeMap<NeedKind, u32>,
    pub adv_salience: f64,
    pub adv_replenish: f64,
}

impl Default for EnvGenome {
    /// The neutral starting point: one cell of every kind, adversarial
    /// parameters equal to the supportive ones.
    fn default() -> Self {
        EnvGenome {
            n_adversarial_belonging: 1,
            n_supportive_per_need: NeedKind::ALL.iter().map(|&n| (n, 1)).collect(),
            adv_salience: 1.0,
            adv_replenish: 1.0,
        }
    }
}

impl EnvGenome {
    pub fn supportive_count(&self, need: NeedKind) -> u32 {
        self.n_supportive_per_need.get(&need).copied().unwrap_or(0)
    }

    pub fn total_cells(&self) -> usize {
        self.n_adversarial_belonging as usize
            + self.n_supportive_per_need.values().map(|&n| n as usize).sum::<usize>()
    }

    /// Clamps the continuous fields to be nonnegative.
    pub fn clamped(mut self) -> Self {
        self.adv_salience = self.adv_salience.max(0.0);
        self.adv_replenish = self.adv_replenish.max(0.0);
        self
    }

    pub fn is_valid(&self) -> bool {
        self.adv_salience >= 0.0
            && self.adv_replenish >= 0.0
            && NeedKind::ALL.iter().all(|n| self.n_supportive_per_need.contains_key(n))
    }
}

/// Draws `count` distinct free positions, resampling on collision.
fn free_positions<R: Rng>(env: &EnvironmentSpec, count: usize, rng: &mut R) -> Vec<Pos> {
    let mut taken: Vec<Pos> = env.cells.iter().map(|c| c.position).collect();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Pos(rng.random_range(0..env.height), rng.random_range(0..env.width));
        if !taken.contains(&p) {
            taken.push(p);
            out.push(p);
        }
    }
    out
}

/// Adds cells at random free positions. Capacity must be checked by the caller.
pub(crate) fn place<R: Rng>(env: &mut EnvironmentSpec, protos: Vec<Cell>, rng: &mut R) {
    let positions = free_positions(env, protos.len(), rng);
    for (mut cell, pos) in protos.into_iter().zip(positions) {
        cell.position = pos;
        env.add_cell(cell).expect("free position inside the grid");
    }
}

fn supportive_protos(need: NeedKind, count: u32) -> impl Iterator<Item = Cell> {
    (0..count).map(move |_| Cell::new(Pos(0, 0), need, SUPPORTIVE_SALIENCE, SUPPORTIVE_SALIENCE))
}

/// One medium-salience cell per need, salience equal to replenishment.
pub fn make_supportive(seed: u64) -> EnvironmentSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = EnvironmentSpec::new(EnvironmentSpec::DEFAULT_SIZE, EnvironmentSpec::DEFAULT_SIZE, seed);
    let protos = NeedKind::ALL.iter().flat_map(|&n| supportive_protos(n, 1)).collect();
    place(&mut env, protos, &mut rng);
    env
}

/// The supportive layout plus one high-salience, weakly replenishing
/// belonging cell.
pub fn make_adversarial(seed: u64, adv_replenish: f64) -> Result<EnvironmentSpec, EnvGenError> {
    if !(adv_replenish > 0.0 && adv_replenish <= 1.0) {
        return Err(EnvGenError::BadReplenish(adv_replenish));
    }
    let mut env = make_supportive(seed);
    // Continue the placement stream so the supportive cells keep their spots.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xad5e_0000_0000_0001);
    let adv = Cell::new(Pos(0, 0), NeedKind::Belonging, ADVERSARIAL_SALIENCE, adv_replenish)
        .with_tag(ADVERSARIAL_TAG);
    place(&mut env, vec![adv], &mut rng);
    Ok(env)
}

pub fn genome_to_environment(g: &EnvGenome, seed: u64) -> Result<EnvironmentSpec, EnvGenError> {
    let mut env = EnvironmentSpec::new(EnvironmentSpec::DEFAULT_SIZE, EnvironmentSpec::DEFAULT_SIZE, seed);
    let requested = g.total_cells();
    if requested > env.area() {
        return Err(EnvGenError::OverCapacity { requested, capacity: env.area() });
    }
    if NeedKind::ALL.iter().all(|&n| g.supportive_count(n) == 0) {
        return Err(EnvGenError::NoSupportiveCells);
    }
    let g = g.clone().clamped();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut protos: Vec<Cell> = NeedKind::ALL
        .iter()
        .flat_map(|&n| supportive_protos(n, g.supportive_count(n)))
        .collect();
    protos.extend((0..g.n_adversarial_belonging).map(|_| {
        Cell::new(Pos(0, 0), NeedKind::Belonging, g.adv_salience, g.adv_replenish)
            .with_tag(ADVERSARIAL_TAG)
    }));
    place(&mut env, protos, &mut rng);
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supportive_has_one_cell_per_need() {
        for seed in 0..20 {
            let env = make_supportive(seed);
            assert_eq!(env.cells.len(), 5);
            for n in NeedKind::ALL {
                assert_eq!(env.count_for(n), 1);
            }
            assert!(env.cells.iter().all(|c| c.salience == c.replenish_rate));
            env.validate().unwrap();
        }
        let a = make_supportive(1);
        let b = make_supportive(2);
        assert_ne!(a.cells, b.cells);
        let params = |e: &EnvironmentSpec| {
            e.cells.iter().map(|c| (c.need, c.salience.to_bits(), c.replenish_rate.to_bits())).collect::<Vec<_>>()
        };
        assert_eq!(params(&a), params(&b));
    }

    #[test]
    fn adversarial_adds_tagged_belonging_cell() {
        let env = make_adversarial(4, 0.25).unwrap();
        assert_eq!(env.cells.len(), 6);
        let adv: Vec<_> = env.cells.iter().filter(|c| c.is_adversarial()).collect();
        assert_eq!(adv.len(), 1);
        assert_eq!(adv[0].need, NeedKind::Belonging);
        assert_eq!(adv[0].salience, 2.0);
        // Gain per step before decay under the x7 rule.
        assert_eq!(7.0 * adv[0].replenish_rate, 1.75);
        // Supportive cells are untouched by the extra placement.
        assert_eq!(&env.cells[..5], &make_supportive(4).cells[..]);

        assert_eq!(make_adversarial(0, 0.0), Err(EnvGenError::BadReplenish(0.0)));
        assert!(make_adversarial(0, 1.5).is_err());
    }

    #[test]
    fn genome_counts_match() {
        let g = EnvGenome::default();
        let env = genome_to_environment(&g, 9).unwrap();
        assert_eq!(env.cells.len(), 6);
        assert_eq!(env.count_for(NeedKind::Belonging), 2);

        let mut g = EnvGenome { n_adversarial_belonging: 10, adv_replenish: 0.1, ..EnvGenome::default() };
        g.n_supportive_per_need.insert(NeedKind::Physiological, 3);
        let env = genome_to_environment(&g, 9).unwrap();
        assert_eq!(env.cells.iter().filter(|c| c.is_adversarial()).count(), 10);
        assert_eq!(env.count_for(NeedKind::Physiological), 3);
        assert_eq!(env, genome_to_environment(&g, 9).unwrap());
    }

    #[test]
    fn genome_errors() {
        let g = EnvGenome {
            n_supportive_per_need: NeedKind::ALL.iter().map(|&n| (n, 0)).collect(),
            ..EnvGenome::default()
        };
        assert_eq!(genome_to_environment(&g, 0), Err(EnvGenError::NoSupportiveCells));
        let g = EnvGenome { n_adversarial_belonging: 60, ..EnvGenome::default() };
        assert_eq!(
            genome_to_environment(&g, 0),
            Err(EnvGenError::OverCapacity { requested: 65, capacity: 64 })
        );
        let g = EnvGenome { n_adversarial_belonging: 59, ..EnvGenome::default() };
        assert_eq!(genome_to_environment(&g, 0).unwrap().cells.len(), 64);
    }
}
