//! Generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semchan_core::{encode_frame, model::ObjectRef, model::PredicateCode, Proposition};

const NAME_CHARS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-";

pub fn arb_name() -> impl Strategy<Value = String> {
    "[A-Za-z0-9-]{1,12}"
}

pub fn arb_predicate() -> impl Strategy<Value = PredicateCode> {
    prop_oneof![
        6 => arb_name().prop_map(|n| PredicateCode::named(&n).unwrap()),
        1 => prop::sample::select(vec!["NT", "Tr", "Err"]).prop_map(|n| PredicateCode::named(n).unwrap()),
        1 => (1u64..).prop_map(|i| PredicateCode::index(i).unwrap()),
    ]
}

fn arb_leaf_object() -> impl Strategy<Value = ObjectRef> {
    prop_oneof![
        4 => (1u64..1000).prop_map(|m| ObjectRef::number(m).unwrap()),
        2 => (1u64..).prop_map(|m| ObjectRef::number(m).unwrap()),
        1 => Just(ObjectRef::All),
    ]
}

/// Propositions nesting at most three frame levels.
pub fn arb_proposition() -> impl Strategy<Value = Proposition> {
    let leaf = (any::<bool>(), arb_predicate(), arb_leaf_object())
        .prop_map(|(pol, pred, obj)| Proposition::new(pol, pred, obj).unwrap());
    leaf.prop_recursive(2, 8, 1, |inner| {
        (any::<bool>(), arb_predicate(), inner).prop_map(|(pol, pred, q)| {
            let obj = ObjectRef::Nested(Box::new(encode_frame(&q)));
            Proposition::new(pol, pred, obj).unwrap()
        })
    })
}

/// Seeded stand-alone generator, for corpora outside proptest.
pub fn random_proposition(rng: &mut impl Rng, max_depth: usize) -> Proposition {
    let pred = match rng.gen_range(0..8) {
        0 => PredicateCode::named(["NT", "Tr", "Err"].choose(rng).unwrap()).unwrap(),
        1 => PredicateCode::index(rng.gen_range(1..=u64::MAX)).unwrap(),
        _ => {
            let len = rng.gen_range(1..=12);
            let name: String = (0..len)
                .map(|_| *NAME_CHARS.choose(rng).unwrap() as char)
                .collect();
            PredicateCode::named(&name).unwrap()
        }
    };
    let obj = match rng.gen_range(0..10) {
        0 => ObjectRef::All,
        1 | 2 if max_depth > 1 => ObjectRef::Nested(Box::new(encode_frame(&random_proposition(
            rng,
            max_depth - 1,
        )))),
        3 => ObjectRef::number(rng.gen_range(1..=u64::MAX)).unwrap(),
        _ => ObjectRef::number(rng.gen_range(1..1000)).unwrap(),
    };
    Proposition::new(rng.gen(), pred, obj).unwrap()
}

pub fn corpus(seed: u64, n: usize, max_depth: usize) -> Vec<Proposition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| random_proposition(&mut rng, max_depth))
        .collect()
}

pub fn distinct_corpus(seed: u64, n: usize, max_depth: usize) -> Vec<Proposition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = random_proposition(&mut rng, max_depth);
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    out
}

/// Random bytes that never contain the first sync byte.
pub fn garbage(rng: &mut impl Rng, max_len: usize) -> Vec<u8> {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| loop {
            let b: u8 = rng.gen();
            if b != 0xA5 {
                break b;
            }
        })
        .collect()
}
