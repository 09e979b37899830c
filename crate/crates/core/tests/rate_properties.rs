use kstep_core::rates::{
    k_star_profile, k_star_smooth, l1, profile_rate_sequence, smooth_rate_sequence,
    step_size_stage, SmoothMode, Stage,
};
use kstep_core::{q, Rational};
use proptest::prelude::*;

/// Independent scan: float-free brute force over the sequence itself.
fn first_index_above_half(seq: &[Rational]) -> Option<u32> {
    seq.iter()
        .position(|r| *r > Rational::half())
        .map(|i| i as u32 + 1)
}

#[test]
fn k_star_profile_matches_sequence_scan_on_dense_grid() {
    for pn in 1..=10 {
        for rn in 16..=30 {
            let psi = q(pn, 20);
            let r = q(rn, 60);
            let k_star = k_star_profile(&psi, &r).unwrap();
            let seq = profile_rate_sequence(&psi, &r, k_star + 5).unwrap();
            assert_eq!(
                first_index_above_half(&seq),
                Some(k_star),
                "psi = {psi}, r = {r}"
            );
        }
    }
}

#[test]
fn k_star_smooth_matches_sequence_scan_on_dense_grid() {
    for pn in 1..=10 {
        for gn in 16..=30 {
            let psi = q(pn, 20);
            let g = q(gn, 60);
            if psi.clone() + g.clone() <= Rational::half() {
                continue;
            }
            for mode in [SmoothMode::Analytic, SmoothMode::FiniteDiff] {
                let k_star = k_star_smooth(&psi, &g, mode).unwrap();
                let seq = smooth_rate_sequence(&psi, &g, mode, k_star + 5).unwrap();
                assert_eq!(first_index_above_half(&seq), Some(k_star), "psi = {psi}, g = {g}");
            }
        }
    }
}

#[test]
fn parametric_embedding_uses_g_half() {
    let g = Rational::half();
    for pn in 1..=10 {
        let psi = q(pn, 20);
        let seq = smooth_rate_sequence(&psi, &g, SmoothMode::FiniteDiff, 6).unwrap();
        let switch = l1(&psi, &g).unwrap();
        for (i, got) in seq.iter().enumerate() {
            let k = i as u32 + 1;
            // R1 = 2^k psi before the switch, R2 = kg + psi after it.
            let expected = if k <= switch {
                psi.clone() * q(2, 1).pow(k as i32)
            } else {
                psi.clone() * q(2, 1).pow(switch as i32) + q((k - switch) as i64, 2)
            };
            assert_eq!(*got, expected, "psi = {psi}, k = {k}");
        }
    }
}

fn psi_strategy() -> impl Strategy<Value = Rational> {
    (1i64..=50).prop_map(|n| q(n, 100))
}

fn r_strategy() -> impl Strategy<Value = Rational> {
    (26i64..=50).prop_map(|n| q(n, 100))
}

proptest! {
    #[test]
    fn profile_sequence_nondecreasing_and_capped(psi in psi_strategy(), r in r_strategy()) {
        let seq = profile_rate_sequence(&psi, &r, 12).unwrap();
        let cap = r.clone() + q(1, 4);
        let mut prev = psi.clone();
        for s in &seq {
            prop_assert!(*s >= prev);
            prop_assert!(*s <= cap);
            prev = s.clone();
        }
        prop_assert_eq!(seq.last().unwrap().clone(), cap);
    }

    #[test]
    fn smooth_sequences_increase(psi in psi_strategy(), gn in 26i64..=50) {
        let g = q(gn, 100);
        prop_assume!(psi.clone() + g.clone() > Rational::half());
        let fd = smooth_rate_sequence(&psi, &g, SmoothMode::FiniteDiff, 10).unwrap();
        prop_assert!(fd.windows(2).all(|w| w[0] < w[1]));
        let an = smooth_rate_sequence(&psi, &g, SmoothMode::Analytic, 10).unwrap();
        prop_assert_eq!(an[0].clone(), q(2, 1) * psi.clone());
        prop_assert!(an.windows(2).all(|w| w[1] == q(2, 1) * w[0].clone()));
    }

    #[test]
    fn nuisance_limited_stage_converges_to_two_r(rn in 26i64..=49, offset in 0i64..100) {
        let r = q(rn, 100);
        // r_prev in [r, 1/2)
        let span = Rational::half() - r.clone();
        let mut prev = r.clone() + span.clone() * q(offset, 100);
        let two_r = q(2, 1) * r.clone();
        let mut gap = two_r.clone() - prev.clone();
        while prev < Rational::half() {
            let (_, next, stage) = step_size_stage(&prev, &r).unwrap();
            prop_assert_eq!(stage, Stage::NuisanceLimited);
            let new_gap = two_r.clone() - next.clone();
            prop_assert!(next > prev);
            prop_assert_eq!(new_gap.clone(), gap.clone() * q(1, 2));
            gap = new_gap;
            prev = next;
        }
    }

    #[test]
    fn rational_arithmetic_is_exact(a in -1000i64..1000, b in 1i64..1000, c in -1000i64..1000, d in 1i64..1000) {
        let x = q(a, b);
        let y = q(c, d);
        prop_assert_eq!((x.clone() + y.clone()) - y.clone(), x.clone());
        prop_assert_eq!(q(a * d + c * b, b * d), x.clone() + y.clone());
        let text = x.to_string();
        prop_assert_eq!(text.parse::<Rational>().unwrap(), x);
    }
}
