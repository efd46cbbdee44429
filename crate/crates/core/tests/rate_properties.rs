mod common;

use common::{random_decision, random_overlap, random_scenario, rel_diff, rng};
use doma_core::network::{Scenario, SystemConfig};
use doma_core::oracle::recompute_metrics;
use doma_core::rates::{network_metrics, Assignment, OverlapProfile, PowerAllocation};
use proptest::prelude::*;

/// Plain NOMA-OFDM uplink: SIC in descending own gain, full inter-AP
/// interference on the same subband, nothing from neighbouring subbands.
fn noma_rates(scn: &Scenario, asg: &Assignment, pw: &PowerAllocation) -> Vec<f64> {
    let n_sub = scn.num_subbands();
    let mut out = vec![0.0; scn.num_ues() * n_sub];
    for ue in 0..scn.num_ues() {
        for n in 0..n_sub {
            if asg.get(ue, n) == 0.0 {
                continue;
            }
            let ap = scn.home_ap(ue);
            let mine = scn.gain(ue, ap, n);
            let mut denom = scn.noise_power_w;
            for other in 0..scn.num_ues() {
                if other == ue {
                    continue;
                }
                let g = scn.gain(other, ap, n);
                let rx = pw.get(other, n) * g;
                if scn.home_ap(other) != ap {
                    denom += rx;
                } else if g < mine || (g == mine && other > ue) {
                    denom += rx;
                }
            }
            out[ue * n_sub + n] =
                scn.subband_bandwidth_hz() * (1.0 + pw.get(ue, n) * mine / denom).log2();
        }
    }
    out
}

#[test]
fn zero_overlap_reduces_to_noma() {
    let mut r = rng(11);
    for _ in 0..100 {
        let scn = random_scenario(&mut r);
        let (asg, pw) = random_decision(&scn, &mut r);
        let ov = OverlapProfile::zero(scn.num_aps(), scn.num_subbands());
        let m = network_metrics(&scn, &asg, &pw, &ov).unwrap();
        for (a, b) in m.per_ue_rate.iter().zip(noma_rates(&scn, &asg, &pw)) {
            assert!(rel_diff(*a, b) <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn oracle_recomputation_agrees_on_random_instances() {
    let mut r = rng(12);
    for i in 0..100 {
        let scn = random_scenario(&mut r);
        let (asg, pw) = random_decision(&scn, &mut r);
        let ov = random_overlap(&scn, &mut r, i % 2 == 0);
        let a = network_metrics(&scn, &asg, &pw, &ov).unwrap();
        let b = recompute_metrics(&scn, &asg, &pw, &ov).unwrap();
        assert!(rel_diff(a.sum_rate_bps, b.sum_rate_bps) <= 1e-10);
        assert!(rel_diff(a.energy_efficiency, b.energy_efficiency) <= 1e-10);
        for (x, y) in a.per_ue_rate.iter().zip(&b.per_ue_rate) {
            assert!(rel_diff(*x, *y) <= 1e-10);
        }
    }
}

#[test]
fn full_overlap_on_both_edges_triples_bandwidth() {
    let ov = OverlapProfile::uniform(2, 3, 1.0);
    for ap in 0..2 {
        assert_eq!(ov.bandwidth_factor(ap, 1), 3.0);
    }
    let scn = Scenario::from_gains(SystemConfig::uniform(1, 1, 3, 1), |_, _, _| 1e-11).unwrap();
    let b = scn.subband_bandwidth_hz() * ov.bandwidth_factor(0, 1);
    assert_eq!(b, 3.0 * scn.subband_bandwidth_hz());
}

proptest! {
    #[test]
    fn symmetric_leak_weight_is_four_delta(delta in 0.0f64..=1.0, k in 1usize..3, n_sub in 2usize..5, edge in 0usize..3) {
        let edge = edge % (n_sub - 1);
        let mut ov = OverlapProfile::zero(k, n_sub);
        ov.set_right(k - 1, edge, delta);
        let w = ov.lower_leak_weight(k - 1, edge + 1);
        prop_assert!((w - 4.0 * delta).abs() <= 4.0 * f64::EPSILON * delta.max(f64::MIN_POSITIVE));
        prop_assert_eq!(w, ov.upper_leak_weight(k - 1, edge));
    }

    #[test]
    fn bandwidth_stays_between_one_and_three_subbands(seed in any::<u64>()) {
        let mut r = rng(seed);
        let scn = random_scenario(&mut r);
        let ov = random_overlap(&scn, &mut r, seed % 2 == 0);
        for ap in 0..scn.num_aps() {
            for n in 0..scn.num_subbands() {
                let f = ov.bandwidth_factor(ap, n);
                prop_assert!((1.0..=3.0).contains(&f));
            }
        }
    }

    #[test]
    fn rate_rises_with_own_power_and_falls_with_others(seed in any::<u64>(), bump in 1e-3f64..0.1) {
        let mut r = rng(seed);
        let scn = random_scenario(&mut r);
        let (asg, pw) = random_decision(&scn, &mut r);
        let ov = random_overlap(&scn, &mut r, true);
        let base = network_metrics(&scn, &asg, &pw, &ov).unwrap();
        for ue in 0..scn.num_ues() {
            let Some(n) = asg.subband_of(ue) else { continue };
            let mut more = pw.clone();
            more.set(ue, n, pw.get(ue, n) + bump);
            let after = network_metrics(&scn, &asg, &more, &ov).unwrap();
            if scn.own_gain(ue, n) > 0.0 {
                prop_assert!(after.rate(ue, n) > base.rate(ue, n));
            }
            for other in (0..scn.num_ues()).filter(|&o| o != ue) {
                for m in 0..scn.num_subbands() {
                    prop_assert!(after.rate(other, m) <= base.rate(other, m));
                }
            }
        }
    }

    #[test]
    fn relabelling_ues_within_an_ap_leaves_metrics_unchanged(seed in any::<u64>()) {
        let mut r = rng(seed);
        let scn = random_scenario(&mut r);
        let (asg, pw) = random_decision(&scn, &mut r);
        let ov = random_overlap(&scn, &mut r, true);
        // Reverse the UE order inside every AP.
        let perm: Vec<usize> = (0..scn.num_ues())
            .map(|ue| {
                let range = scn.ues_of(scn.home_ap(ue));
                range.end - 1 - (ue - range.start)
            })
            .collect();
        let n_sub = scn.num_subbands();
        let permuted = Scenario::from_gains(scn.config.clone(), |ue, ap, n| scn.gain(perm[ue], ap, n)).unwrap();
        let choices: Vec<Option<usize>> = (0..scn.num_ues()).map(|ue| asg.subband_of(perm[ue])).collect();
        let asg2 = Assignment::from_choices(n_sub, &choices);
        let mut pw2 = PowerAllocation::zeros(scn.num_ues(), n_sub);
        for ue in 0..scn.num_ues() {
            for n in 0..n_sub {
                pw2.set(ue, n, pw.get(perm[ue], n));
            }
        }
        let a = network_metrics(&scn, &asg, &pw, &ov).unwrap();
        let b = network_metrics(&permuted, &asg2, &pw2, &ov).unwrap();
        prop_assert!(rel_diff(a.sum_rate_bps, b.sum_rate_bps) <= 1e-12);
        prop_assert!(rel_diff(a.sum_power_w, b.sum_power_w) <= 1e-12);
        for ue in 0..scn.num_ues() {
            for n in 0..n_sub {
                prop_assert!(rel_diff(a.rate(perm[ue], n), b.rate(ue, n)) <= 1e-12);
            }
        }
    }

    #[test]
    fn energy_efficiency_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let scn = random_scenario(&mut r);
        let (asg, pw) = random_decision(&scn, &mut r);
        let ov = random_overlap(&scn, &mut r, false);
        let m = network_metrics(&scn, &asg, &pw, &ov).unwrap();
        let back = m.energy_efficiency * (m.sum_power_w + m.circuit_power_w);
        prop_assert!(rel_diff(back, m.sum_rate_bps) <= 2.0 * f64::EPSILON);
        prop_assert_eq!(m.spectral_efficiency, m.sum_rate_bps / scn.config.total_bandwidth_hz);
    }

    #[test]
    fn generation_is_a_function_of_the_config(seed in any::<u64>()) {
        let cfg = SystemConfig::desk_scale().with_seed(seed);
        let a = doma_core::network::generate_scenario(&cfg).unwrap();
        let b = doma_core::network::generate_scenario(&cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}
