use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::sample::select;

use discrete_abc::bitstate::{BitVector, RngStream};
use discrete_abc::harness::{run_experiment, ExperimentConfig, RunOptions};
use discrete_abc::kernels::{proposal_pmf_exact, KernelKind, KernelSpec, Population};
use discrete_abc::problems::{
    binnn_error, binnn_predict, boltzmann_log_prior, nas_encode, qmr_log_likelihood, BinNetSpec, LabeledDataset,
    NasDecoded, QmrDtModel,
};

const DIMS: [usize; 6] = [1, 7, 63, 64, 65, 4000];

fn random_bits(dim: usize, seed: u64) -> Vec<bool> {
    let mut rng = RngStream::new(seed);
    (0..dim).map(|_| rng.bernoulli(0.5)).collect()
}

fn tail_clear(v: &BitVector) -> bool {
    let rem = v.dim() % 64;
    rem == 0 || v.words().last().is_none_or(|w| w >> rem == 0)
}

fn population(dim: usize, size: usize, seed: u64) -> Population {
    let mut rng = RngStream::new(seed);
    Population::new((0..size).map(|_| BitVector::bernoulli(dim, 0.5, &mut rng).unwrap()).collect()).unwrap()
}

fn states(dim: usize) -> impl Iterator<Item = BitVector> {
    (0..1u64 << dim).map(move |s| BitVector::from_index(s, dim))
}

fn with_chain(pop: &Population, i: usize, x: BitVector) -> Population {
    let mut p = pop.clone();
    p.set(i, x);
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn packed_ops_match_per_bit_reference(dim in select(DIMS.to_vec()), sa: u64, sb: u64) {
        let (ra, rb) = (random_bits(dim, sa), random_bits(dim, sb));
        let (a, b) = (BitVector::from_bits(&ra), BitVector::from_bits(&rb));
        let x = a.xor(&b).unwrap();
        let rx: Vec<bool> = ra.iter().zip(&rb).map(|(p, q)| p ^ q).collect();
        prop_assert_eq!(x.iter().collect::<Vec<_>>(), rx.clone());
        prop_assert_eq!(a.hamming(&b).unwrap(), rx.iter().filter(|&&v| v).count());
        prop_assert_eq!(a.popcount(), ra.iter().filter(|&&v| v).count());
        prop_assert!(a.popcount() <= dim);
        let c = a.complement();
        prop_assert_eq!(c.iter().collect::<Vec<_>>(), ra.iter().map(|v| !v).collect::<Vec<_>>());
        prop_assert_eq!(a.to_string().parse::<BitVector>().unwrap(), a.clone());
        prop_assert!(tail_clear(&x) && tail_clear(&c));
    }

    #[test]
    fn xor_involution_and_commutativity(dim in select(DIMS.to_vec()), sa: u64, sb: u64) {
        let a = BitVector::from_bits(&random_bits(dim, sa));
        let b = BitVector::from_bits(&random_bits(dim, sb));
        prop_assert_eq!(a.xor(&b).unwrap().xor(&b).unwrap(), a.clone());
        prop_assert_eq!(a.xor(&b).unwrap(), b.xor(&a).unwrap());
        prop_assert_eq!(a.hamming(&b).unwrap(), b.hamming(&a).unwrap());
        prop_assert_eq!(a.xor(&a).unwrap(), BitVector::zeros(dim));
    }

    #[test]
    fn fuzzed_operations_keep_tail_clear(dim in select(DIMS.to_vec()), seed: u64, ops in prop::collection::vec(0u8..6, 1..40)) {
        let mut rng = RngStream::new(seed);
        let mut v = BitVector::ones(dim);
        let mut reference = vec![true; dim];
        for op in ops {
            match op {
                0 => {
                    let other = BitVector::bernoulli(dim, 0.7, &mut rng).unwrap();
                    for (r, o) in reference.iter_mut().zip(other.iter()) {
                        *r ^= o;
                    }
                    v.xor_assign(&other).unwrap();
                }
                1 => {
                    v = v.complement();
                    reference.iter_mut().for_each(|r| *r = !*r);
                }
                2 => {
                    let l = rng.below(dim);
                    v.flip(l);
                    reference[l] = !reference[l];
                }
                3 => {
                    let l = rng.below(dim);
                    let value = rng.bernoulli(0.5);
                    v.set(l, value);
                    reference[l] = value;
                }
                4 => {
                    v = v.mutate(0.3, &mut rng).unwrap();
                    reference = v.iter().collect();
                }
                _ => {
                    v = BitVector::bernoulli(dim, 0.9, &mut rng).unwrap();
                    reference = v.iter().collect();
                }
            }
            prop_assert!(tail_clear(&v));
            prop_assert_eq!(v.popcount(), reference.iter().filter(|&&b| b).count());
        }
        prop_assert_eq!(v.iter().collect::<Vec<_>>(), reference);
    }

    #[test]
    fn equal_seeds_draw_equal_vectors(seed: u64, dim in select(DIMS.to_vec()), p in 0.0f64..=1.0) {
        let (mut r1, mut r2) = (RngStream::new(seed), RngStream::new(seed));
        let x = BitVector::bernoulli(dim, 0.5, &mut r1).unwrap();
        prop_assert_eq!(&x, &BitVector::bernoulli(dim, 0.5, &mut r2).unwrap());
        prop_assert_eq!(x.mutate(p, &mut r1).unwrap(), x.mutate(p, &mut r2).unwrap());
        let (mut d1, mut d2) = (r1.derive_named("child"), RngStream::new(seed).derive_named("child"));
        prop_assert_eq!(d1.uniform(), d2.uniform());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symmetric_kernels_satisfy_exchange_symmetry(
        dim in 1usize..=4,
        size in 3usize..=5,
        seed: u64,
        kind in select(KernelKind::ALL.to_vec()),
        p_flip in select(vec![0.01, 0.1, 0.37]),
    ) {
        prop_assume!(kind != KernelKind::MutCrx);
        let spec = KernelSpec::new(kind).with_p_flip(p_flip);
        let pop = population(dim, size, seed);
        let i = (seed % size as u64) as usize;
        let forward = proposal_pmf_exact(&spec, i, &pop).unwrap();
        prop_assert!((forward.total() - 1.0).abs() < 1e-12);
        let a = pop.get(i).clone();
        for x in states(dim) {
            let back = proposal_pmf_exact(&spec, i, &with_chain(&pop, i, x.clone())).unwrap();
            prop_assert!((forward.prob(&x) - back.prob(&a)).abs() < 1e-12, "{kind} {x} {a}");
        }
    }

    #[test]
    fn xor_support_is_the_difference_set(dim in 1usize..=6, size in 3usize..=5, seed: u64) {
        let pop = population(dim, size, seed);
        let i = (seed % size as u64) as usize;
        let pmf = proposal_pmf_exact(&KernelSpec::new(KernelKind::Xor), i, &pop).unwrap();
        let mut expected = BTreeSet::new();
        for j in 0..size {
            for k in 0..size {
                if j != i && k != i && j != k {
                    let delta = pop.get(j).xor(pop.get(k)).unwrap();
                    expected.insert(pop.get(i).xor(&delta).unwrap().to_index());
                }
            }
        }
        let support: BTreeSet<u64> = pmf.iter().filter(|(_, p)| *p > 0.0).map(|(x, _)| x.to_index()).collect();
        prop_assert_eq!(&support, &expected);
        if expected.len() < 1 << dim {
            prop_assert!(pmf.support_len() < 1 << dim);
        }
    }

    #[test]
    fn mutating_kernels_have_full_support(
        dim in 1usize..=6,
        size in 3usize..=5,
        seed: u64,
        kind in select(vec![KernelKind::DdeMc, KernelKind::MutXor]),
        p_flip in select(vec![0.01, 0.1]),
    ) {
        let spec = KernelSpec::new(kind).with_p_flip(p_flip);
        let pop = population(dim, size, seed);
        let pmf = proposal_pmf_exact(&spec, 0, &pop).unwrap();
        prop_assert!(states(dim).all(|x| pmf.prob(&x) > 0.0));
    }

    #[test]
    fn dde_mc_orderings_coincide(dim in 1usize..=6, size in 3usize..=5, seed: u64, p_flip in select(vec![0.01, 0.1, 0.5])) {
        let pop = population(dim, size, seed);
        for i in 0..size {
            let a = proposal_pmf_exact(&KernelSpec::new(KernelKind::DdeMc).with_p_flip(p_flip), i, &pop).unwrap();
            let b = proposal_pmf_exact(&KernelSpec::new(KernelKind::DdeMc1).with_p_flip(p_flip), i, &pop).unwrap();
            for x in states(dim) {
                prop_assert!((a.prob(&x) - b.prob(&x)).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boltzmann_ratio_telescopes(dim in 1usize..200, sa: u64, sb: u64) {
        let a = BitVector::from_bits(&random_bits(dim, sa));
        let b = BitVector::from_bits(&random_bits(dim, sb));
        let forward = boltzmann_log_prior(&b) - boltzmann_log_prior(&a);
        let backward = boltzmann_log_prior(&a) - boltzmann_log_prior(&b);
        prop_assert_eq!(forward + backward, 0.0);
    }

    #[test]
    fn qmr_likelihood_normalises(diseases in 1usize..=4, findings in 1usize..=6, seed: u64) {
        let mut rng = RngStream::new(seed);
        let leak: Vec<f64> = (0..findings).map(|_| 0.01 + 0.9 * rng.uniform()).collect();
        let assoc: Vec<f64> = (0..findings * diseases).map(|_| rng.uniform()).collect();
        let model = QmrDtModel::new(leak, assoc, vec![0.5; diseases]).unwrap();
        let x = BitVector::bernoulli(diseases, 0.5, &mut rng).unwrap();
        let total: f64 = states(findings)
            .map(|y| qmr_log_likelihood(&model, &x, std::slice::from_ref(&y)).unwrap().exp())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn binnn_predictions_follow_examples(input_dim in 1usize..12, hidden in 1usize..6, n in 1usize..30, seed: u64) {
        let mut rng = RngStream::new(seed);
        let spec = BinNetSpec::new(input_dim, hidden).unwrap();
        let w = BitVector::bernoulli(spec.dim(), 0.5, &mut rng).unwrap();
        let inputs: Vec<BitVector> = (0..n).map(|_| BitVector::bernoulli(input_dim, 0.5, &mut rng).unwrap()).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
        let data = LabeledDataset::new(inputs.clone(), labels.clone()).unwrap();
        let order: Vec<usize> = (0..n).rev().collect();
        let reversed = LabeledDataset::new(
            order.iter().map(|&k| inputs[k].clone()).collect(),
            order.iter().map(|&k| labels[k]).collect(),
        ).unwrap();
        let predict = |d: &LabeledDataset| -> Vec<u8> {
            d.inputs().iter().map(|x| binnn_predict(&spec, &w, x).unwrap()).collect()
        };
        let p = predict(&data);
        prop_assert!(p.iter().all(|&y| y <= 1));
        prop_assert_eq!(p, predict(&reversed).into_iter().rev().collect::<Vec<_>>());
        let e = binnn_error(&spec, &w, &data).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert_eq!(e, binnn_error(&spec, &w, &reversed).unwrap());
    }

    #[test]
    fn nas_encoding_round_trips(bits in prop::collection::vec(any::<bool>(), 21)) {
        let x = BitVector::from_bits(&bits);
        match nas_encode(&x).unwrap() {
            NasDecoded::Valid(arch) => {
                prop_assert!(arch.edge_count() <= 9 && arch.path_count() > 0);
                prop_assert_eq!(arch.bits(), &x);
                prop_assert_eq!(arch.key(), x.to_string());
            }
            NasDecoded::Invalid(_) => prop_assert!(x.popcount() > 9 || !has_path(&x)),
        }
    }
}

fn has_path(x: &BitVector) -> bool {
    let mut reach = [false; 7];
    reach[0] = true;
    let mut k = 0;
    for i in 0..7 {
        for j in i + 1..7 {
            if x.get(k) && reach[i] {
                reach[j] = true;
            }
            k += 1;
        }
    }
    reach[6]
}

const RUN: &str = r#"
[experiment]
name = "prop"
seed = 0
repeats = 2
iterations = 30
stride = 5

[problem]
kind = "qmr"
diseases = 5
findings = 8
n_obs = 4

[sampler]
mode = "abc"
population = 5
epsilon = { mode = "fixed", value = 1.5 }

[[kernels]]
kind = "mut+xor"
p_flip = 0.05
"#;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn run_rows_respect_invariants(seed in 0u64..1000, stride in select(vec![1usize, 3, 5, 7, 30]), repeats in 0usize..3) {
        let mut cfg = ExperimentConfig::from_toml(RUN).unwrap();
        cfg.experiment.seed = seed;
        cfg.experiment.stride = stride;
        cfg.experiment.repeats = repeats;
        prop_assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg.clone());
        let out = run_experiment(&cfg, &RunOptions::default()).unwrap();
        let runs = &out.variants[0].runs;
        prop_assert_eq!(runs.iter().map(|r| r.rows.len()).sum::<usize>(), repeats * (30 / stride));
        for run in runs {
            for pair in run.rows.windows(2) {
                prop_assert!(pair[0].accepted <= pair[1].accepted);
                prop_assert!(pair[0].within_tolerance <= pair[1].within_tolerance);
                prop_assert!(pair[0].proposals < pair[1].proposals);
            }
            for r in &run.rows {
                prop_assert!(r.min_error <= r.avg_error);
                prop_assert!(r.accepted <= r.within_tolerance && r.within_tolerance <= r.proposals);
            }
        }
    }
}
