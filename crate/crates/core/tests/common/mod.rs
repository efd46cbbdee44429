#![allow(dead_code)]

use doma_core::network::{generate_scenario, Scenario, SystemConfig};
use doma_core::rates::{Assignment, OverlapProfile, PowerAllocation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random drop with 1-2 APs, 1-3 UEs per AP and 2-4 subbands.
pub fn random_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let aps = rng.random_range(1..=2);
    let ues = rng.random_range(1..=3);
    let subbands = rng.random_range(2..=4);
    let mut cfg = SystemConfig::uniform(aps, ues, subbands, 3);
    cfg.rng_seed = rng.random();
    generate_scenario(&cfg).unwrap()
}

/// Every UE on a random subband (or unserved) with a random power.
pub fn random_decision(scn: &Scenario, rng: &mut ChaCha8Rng) -> (Assignment, PowerAllocation) {
    let n_sub = scn.num_subbands();
    let choices: Vec<Option<usize>> = (0..scn.num_ues())
        .map(|_| {
            let c = rng.random_range(0..=n_sub);
            (c < n_sub).then_some(c)
        })
        .collect();
    let asg = Assignment::from_choices(n_sub, &choices);
    let mut pw = PowerAllocation::zeros(scn.num_ues(), n_sub);
    for (ue, c) in choices.iter().enumerate() {
        if let Some(n) = c {
            pw.set(ue, *n, rng.random_range(0.0..=scn.config.max_tx_power_w));
        }
    }
    (asg, pw)
}

pub fn random_overlap(scn: &Scenario, rng: &mut ChaCha8Rng, symmetric: bool) -> OverlapProfile {
    let (k, n_sub) = (scn.num_aps(), scn.num_subbands());
    let mut ov = if symmetric {
        OverlapProfile::zero(k, n_sub)
    } else {
        OverlapProfile::asymmetric(k, n_sub)
    };
    for ap in 0..k {
        for n in 0..n_sub - 1 {
            ov.set_right(ap, n, rng.random());
            if !symmetric {
                ov.set_left(ap, n + 1, rng.random());
            }
        }
    }
    ov
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
