mod common;

use hyra::scheduler::{kkt_residuals, schedule_slot, utility, water_fill};
use hyra::{Allocation, Topology};
use proptest::prelude::*;

/// (slice counts, etas, dedicated budgets, shared budget) with at most 8 UEs.
fn instance() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, Vec<f64>, f64)> {
    prop::collection::vec(1usize..=4, 1..=3)
        .prop_filter("at most 8 UEs", |c| c.iter().sum::<usize>() <= 8)
        .prop_flat_map(|counts| {
            let n: usize = counts.iter().sum();
            let s = counts.len();
            (
                Just(counts),
                prop::collection::vec(0.11f64..=7.4, n),
                prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..20.0], s),
                prop_oneof![Just(0.0), 0.0f64..20.0],
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_projected_gradient_oracle((counts, etas, ded, sh) in instance()) {
        let topo = Topology::from_counts(&counts).unwrap();
        let alloc = Allocation::new(ded.clone(), sh).unwrap();
        let s = schedule_slot(&alloc, &etas, &topo).unwrap();
        let oracle = common::projected_gradient(&etas, topo.slice_map(), &ded, sh, 1e-8, 20_000);
        prop_assert!(oracle.gap <= 1e-6);
        prop_assert!((utility(&etas, &s.y_ded, &s.y_sh) - oracle.utility).abs() <= 1e-6);
        prop_assert!(kkt_residuals(&s, &alloc, &etas, &topo).max() <= 1e-8);
    }

    #[test]
    fn budgets_are_spent_exactly((counts, etas, ded, sh) in instance()) {
        let topo = Topology::from_counts(&counts).unwrap();
        let s = schedule_slot(&Allocation::new(ded.clone(), sh).unwrap(), &etas, &topo).unwrap();
        for (k, &x) in ded.iter().enumerate() {
            let used: f64 = topo.members(k).iter().map(|&i| s.y_ded[i]).sum();
            prop_assert!((used - x).abs() <= 1e-9 * (1.0 + x));
        }
        prop_assert!((s.y_sh.iter().sum::<f64>() - sh).abs() <= 1e-9 * (1.0 + sh));
        prop_assert!(s.y_ded.iter().chain(&s.y_sh).all(|&y| y >= 0.0));
    }

    #[test]
    fn relabelling_permutes_the_schedule((counts, etas, ded, sh) in instance(), seed in any::<u64>()) {
        let topo = Topology::from_counts(&counts).unwrap();
        let n = etas.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut x = seed;
        for j in (1..n).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(j, (x >> 33) as usize % (j + 1));
        }
        let alloc = Allocation::new(ded, sh).unwrap();
        let a = schedule_slot(&alloc, &etas, &topo).unwrap();
        let etas_p: Vec<f64> = order.iter().map(|&o| etas[o]).collect();
        let b = schedule_slot(&alloc, &etas_p, &topo.permuted(&order)).unwrap();
        for (new, &old) in order.iter().enumerate() {
            prop_assert!((b.y_ded[new] - a.y_ded[old]).abs() <= 1e-9);
            prop_assert!((b.y_sh[new] - a.y_sh[old]).abs() <= 1e-9);
        }
    }

    #[test]
    fn totals_grow_with_every_budget((counts, etas, ded, sh) in instance(), which in any::<prop::sample::Index>(), bump in 0.0f64..5.0) {
        let topo = Topology::from_counts(&counts).unwrap();
        let base = Allocation::new(ded.clone(), sh).unwrap();
        let mut c = base.components();
        let j = which.index(c.len());
        c[j] += bump;
        let more = Allocation::from_components(&c);
        let a = schedule_slot(&base, &etas, &topo).unwrap().totals();
        let b = schedule_slot(&more, &etas, &topo).unwrap().totals();
        for i in 0..etas.len() {
            prop_assert!(b[i] >= a[i] - 1e-9, "ue {i}: {} -> {}", a[i], b[i]);
        }
    }

    #[test]
    fn water_fill_matches_sorted_closed_form(bases in prop::collection::vec(0.01f64..10.0, 1..10), budget in 0.0f64..30.0) {
        let mut y = vec![0.0; bases.len()];
        let level = water_fill(&bases, budget, &mut y).unwrap();
        // reference: raise the level over the k lowest bases
        let mut sorted = bases.clone();
        sorted.sort_by(f64::total_cmp);
        let mut h = sorted[0];
        let mut acc = 0.0;
        for k in 1..=sorted.len() {
            acc += sorted[k - 1];
            h = (budget + acc) / k as f64;
            if k == sorted.len() || h <= sorted[k] {
                break;
            }
        }
        if budget > 0.0 {
            prop_assert!((level.height - h).abs() <= 1e-9 * (1.0 + h));
        }
        for (b, yi) in bases.iter().zip(&y) {
            prop_assert!((yi - (h - b).max(0.0)).abs() <= 1e-9 * (1.0 + h));
        }
    }
}

#[test]
fn shared_free_slot_decomposes_by_slice() {
    let topo = Topology::from_counts(&[2, 3]).unwrap();
    let etas = [2.0, 1.0, 0.5, 3.0, 6.0];
    let s = schedule_slot(&Allocation::new(vec![1.0, 4.0], 0.0).unwrap(), &etas, &topo).unwrap();
    let a = common::projected_gradient(&etas[..2], &[0, 0], &[1.0], 0.0, 1e-10, 20_000);
    let b = common::projected_gradient(&etas[2..], &[0, 0, 0], &[4.0], 0.0, 1e-10, 20_000);
    assert!((utility(&etas, &s.y_ded, &s.y_sh) - a.utility - b.utility).abs() < 1e-8);
}

#[test]
fn kkt_residual_detects_perturbed_schedule() {
    let topo = Topology::from_counts(&[2, 2]).unwrap();
    let etas = [2.0, 1.0, 4.0, 3.0];
    let alloc = Allocation::new(vec![1.0, 2.0], 1.5).unwrap();
    let mut s = schedule_slot(&alloc, &etas, &topo).unwrap();
    let i = (0..4).find(|&i| s.y_ded[i] > 0.0).unwrap();
    s.y_ded[i] += 0.1;
    assert!(kkt_residuals(&s, &alloc, &etas, &topo).max() > 1e-3);
}
