//! Seeded random inputs: parameter values, sparse 2-D matrices and small
//! values for 1-D arrays the program only reads.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::interp::{ArrayData, Machine, Memory, RunError};
use crate::frontend::{written_names, Program};

/// Matrix densities, cycled by trial number.
pub const DENSITIES: [f64; 4] = [0.0, 0.01, 0.3, 1.0];

#[derive(Debug, Clone)]
pub struct Shape {
    pub param_max: i64,
    /// Nonzero matrix entries and input values are drawn from `1..=value_max`
    /// (`0..=value_max` for 1-D inputs).
    pub value_max: i64,
}

impl Default for Shape {
    fn default() -> Self {
        Shape { param_max: 200, value_max: 9 }
    }
}

#[derive(Debug, Clone)]
pub struct InputGenerator {
    pub seed: u64,
    pub shape: Shape,
    /// Parameters held at fixed values.
    pub fixed: BTreeMap<String, i64>,
}

#[derive(Debug, Clone)]
pub struct TrialInput {
    pub trial: usize,
    pub density: f64,
    pub machine: Machine,
    pub memory: Memory,
}

impl InputGenerator {
    pub fn new(seed: u64) -> Self {
        InputGenerator { seed, shape: Shape::default(), fixed: BTreeMap::new() }
    }

    /// Parameters and memory contents use separate streams of the same seed.
    fn rng(&self, trial: usize, memory: bool) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(2 * trial as u64 + memory as u64);
        rng
    }

    pub fn params(&self, program: &Program, trial: usize) -> BTreeMap<String, i64> {
        let mut rng = self.rng(trial, false);
        program
            .params
            .iter()
            .map(|p| {
                let v = match self.fixed.get(p) {
                    Some(v) => *v,
                    // Half the trials stay small so that boundary sizes are common.
                    None if rng.gen_bool(0.5) => rng.gen_range(1..=self.shape.param_max.min(8)),
                    None => rng.gen_range(1..=self.shape.param_max),
                };
                (p.clone(), v)
            })
            .collect()
    }

    pub fn trial(&self, program: &Program, trial: usize) -> Result<TrialInput, RunError> {
        let params = self.params(program, trial);
        let machine = Machine::new(program, &params)?;
        let mut memory = machine.fresh_memory();
        let density = DENSITIES[trial % DENSITIES.len()];
        let mut rng = self.rng(trial, true);
        let (mut scalars, mut arrays) = (Vec::new(), Vec::new());
        written_names(&program.body, &mut scalars, &mut arrays);
        let written: BTreeSet<String> = arrays.into_iter().collect();
        let vmax = self.shape.value_max;
        for name in memory.array_names().to_vec() {
            if written.contains(&name) {
                continue;
            }
            let a = memory.array_mut(&name).expect("declared");
            let matrix = a.dims.len() == 2;
            match &mut a.data {
                ArrayData::Int(v) if matrix => {
                    for x in v.iter_mut() {
                        *x = if rng.gen_bool(density) { rng.gen_range(1..=vmax) } else { 0 };
                    }
                }
                ArrayData::Int(v) => v.iter_mut().for_each(|x| *x = rng.gen_range(0..=vmax)),
                ArrayData::Float(v) => v.iter_mut().for_each(|x| *x = rng.gen_range(0..=vmax) as f64),
            }
        }
        Ok(TrialInput { trial, density, machine, memory })
    }
}
