use std::collections::HashMap;
use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_input, finish, Constraint, Explanation, ExplainerKind, ExplanationFlag, ExplanationItem};
use crate::classifiers::BlackBox;
use crate::dataset::FeatureVector;
use crate::solvers::{cart_build, cart_path_predicates, TreeParams};
use crate::util::{rng, Rng};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoreParams {
    pub population: usize,
    pub generations: usize,
    /// Probability that a parent pair is recombined (uniform crossover).
    pub crossover_rate: f64,
    /// Probability that a child is mutated at all.
    pub mutation_rate: f64,
    /// Per-bit flip probability inside a mutation.
    pub bit_flip_prob: f64,
    pub tournament_size: usize,
    /// Best individuals copied unchanged into the next generation.
    pub elitism: usize,
    pub tree: TreeParams,
}

impl Default for LoreParams {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 20,
            crossover_rate: 0.5,
            mutation_rate: 0.2,
            bit_flip_prob: 0.1,
            tournament_size: 3,
            elitism: 5,
            tree: TreeParams::default(),
        }
    }
}

impl LoreParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.population < 2 {
            v.push(format!("lore.population must be >= 2, got {}", self.population));
        }
        for (name, p) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
            ("bit_flip_prob", self.bit_flip_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                v.push(format!("lore.{name} must be in [0, 1], got {p}"));
            }
        }
        if self.tournament_size == 0 {
            v.push("lore.tournament_size must be >= 1".into());
        }
        if self.elitism >= self.population.max(1) {
            v.push(format!(
                "lore.elitism ({}) must be below the population size ({})",
                self.elitism, self.population
            ));
        }
        v
    }
}

/// `I[label agreement as wanted] + (1 - dif(x, z)) - I[z = x]`, with `dif`
/// the normalized Hamming distance. `want_same` selects the same-label
/// fitness, otherwise the different-label one.
pub fn lore_fitness(x: &[u8], z: &[u8], pred_x: usize, pred_z: usize, want_same: bool) -> f64 {
    let diff = x.iter().zip(z).filter(|(a, b)| a != b).count();
    let indicator = if want_same { pred_x == pred_z } else { pred_x != pred_z };
    f64::from(u8::from(indicator)) + (1.0 - diff as f64 / x.len() as f64) - f64::from(u8::from(diff == 0))
}

struct Oracle<'a, M: ?Sized> {
    model: &'a M,
    cache: HashMap<Vec<u8>, usize>,
}

impl<M: BlackBox + ?Sized> Oracle<'_, M> {
    fn predict(&mut self, z: &[u8]) -> usize {
        if let Some(&p) = self.cache.get(z) {
            return p;
        }
        let p = self.model.predict_bits(z);
        self.cache.insert(z.to_vec(), p);
        p
    }
}

fn tournament(fit: &[f64], size: usize, r: &mut Rng) -> usize {
    let mut best = r.gen_range(0..fit.len());
    for _ in 1..size {
        let c = r.gen_range(0..fit.len());
        if fit[c] > fit[best] {
            best = c;
        }
    }
    best
}

fn evolve<M: BlackBox + ?Sized>(
    oracle: &mut Oracle<'_, M>,
    x: &[u8],
    pred: usize,
    want_same: bool,
    p: &LoreParams,
    r: &mut Rng,
) -> Vec<Vec<u8>> {
    let mut pop = vec![x.to_vec(); p.population];
    for _ in 0..p.generations {
        let fit: Vec<f64> = pop
            .iter()
            .map(|z| {
                let pz = oracle.predict(z);
                lore_fitness(x, z, pred, pz, want_same)
            })
            .collect();
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fit[b].partial_cmp(&fit[a]).unwrap().then(a.cmp(&b)));
        let mut next: Vec<Vec<u8>> = order.iter().take(p.elitism).map(|&i| pop[i].clone()).collect();
        while next.len() < p.population {
            let a = &pop[tournament(&fit, p.tournament_size, r)];
            let b = &pop[tournament(&fit, p.tournament_size, r)];
            let (mut c1, mut c2) = (a.clone(), b.clone());
            if r.gen_bool(p.crossover_rate) {
                for j in 0..x.len() {
                    if r.gen_bool(0.5) {
                        std::mem::swap(&mut c1[j], &mut c2[j]);
                    }
                }
            }
            for c in [&mut c1, &mut c2] {
                if r.gen_bool(p.mutation_rate) {
                    for bit in c.iter_mut() {
                        if r.gen_bool(p.bit_flip_prob) {
                            *bit = 1 - *bit;
                        }
                    }
                }
            }
            next.push(c1);
            if next.len() < p.population {
                next.push(c2);
            }
        }
        pop = next;
    }
    pop
}

/// Genetic neighbourhood of same-label and different-label individuals,
/// a decision tree fitted to the model's labels on it, and the tree path of
/// the sample as the rule.
pub fn explain_lore<M: BlackBox + ?Sized>(model: &M, x: &FeatureVector, params: &LoreParams, seed: u64) -> Result<Explanation> {
    let start = Instant::now();
    super::config_error(params.violations())?;
    check_input(model, x)?;
    let pred = model.predict_bits(x.bits());
    let mut e = Explanation::new(ExplainerKind::Lore, model, pred);
    let mut r = rng(seed);
    let mut oracle = Oracle {
        model,
        cache: HashMap::new(),
    };
    let same = evolve(&mut oracle, x.bits(), pred, true, params, &mut r);
    let diff = evolve(&mut oracle, x.bits(), pred, false, params, &mut r);
    if !diff.iter().any(|z| oracle.predict(z) != pred) {
        e.flags.push(ExplanationFlag::Degenerate);
        return Ok(finish(e, start));
    }
    let samples: Vec<Vec<u8>> = same.into_iter().chain(diff).collect();
    let labels: Vec<usize> = samples.iter().map(|z| oracle.predict(z)).collect();
    let weights = vec![1.0; samples.len()];
    let tree = cart_build(&samples, &labels, &weights, model.n_classes(), &params.tree, None);
    let path = cart_path_predicates(&tree, x.bits());
    let n = path.len();
    e.items = path
        .into_iter()
        .enumerate()
        .map(|(i, (feature, bit))| ExplanationItem {
            feature,
            constraint: Constraint::equals(bit),
            weight: (n - i) as f64,
        })
        .collect();
    Ok(finish(e, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::FnModel;

    #[test]
    fn fitness_of_the_sample_itself() {
        let x = [1, 0, 1, 0];
        assert_eq!(lore_fitness(&x, &x, 1, 1, true), 1.0);
        let near = [0, 0, 1, 0];
        assert_eq!(lore_fitness(&x, &near, 1, 1, true), 1.0 + (1.0 - 0.25));
        assert_eq!(lore_fitness(&x, &near, 1, 0, false), 1.0 + 0.75);
        assert_eq!(lore_fitness(&x, &near, 1, 1, false), 0.75);
    }

    #[test]
    fn dictator_rule_is_found() {
        let m = FnModel::new(15, 2, "d0", |b| b[0] as usize);
        let x = FeatureVector::from_bools((0..15).map(|i| i % 4 == 0));
        let e = explain_lore(&m, &x, &LoreParams::default(), 6).unwrap();
        assert!(e.items.iter().any(|i| i.feature == 0 && i.constraint == Constraint::EqualsOne), "{e:?}");
        assert!(e.validate(15).is_ok());
        assert_eq!(e.items, explain_lore(&m, &x, &LoreParams::default(), 6).unwrap().items);
        // root first carries the largest weight
        assert!(e.items.windows(2).all(|w| w[0].weight > w[1].weight));
    }

    #[test]
    fn constant_model_is_degenerate() {
        let m = FnModel::new(5, 2, "c", |_| 0);
        let e = explain_lore(&m, &FeatureVector::zeros(5), &LoreParams::default(), 0).unwrap();
        assert!(e.is_empty() && e.has_flag(ExplanationFlag::Degenerate));
    }
}
