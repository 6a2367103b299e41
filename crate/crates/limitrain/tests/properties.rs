//! Property tests for the crate-wide invariants.

use limitrain::dataset::{split, Category, Dataset, PairFormat, Provenance, TrainingPair};
use limitrain::eval::compute_metrics;
use limitrain::net::modelfile::ModelFile;
use limitrain::net::{mse_loss, Activation, Mlp};
use limitrain::plant::{
    CandidateMode, ContactMode, HydraulicDrive, HydraulicParams, SaturationLink, StopLink,
    Trajectory,
};
use proptest::prelude::*;

proptest! {
    /// Saturation state never leaves its bound, whatever the drive does.
    #[test]
    fn saturation_bound_invariant(
        time_constant in 0.05f64..5.0,
        bound in 0.1f64..10.0,
        dt in 0.001f64..0.5,
        gain in -3.0f64..3.0,
        euler in any::<bool>(),
        inputs in prop::collection::vec(-50.0f64..50.0, 50..200),
    ) {
        let mode = if euler { CandidateMode::Euler } else { CandidateMode::Zoh };
        let link = SaturationLink::new(gain, time_constant, bound, dt, mode).unwrap();
        let mut x = 0.0;
        for u in inputs {
            x = link.step_one(x, u).unwrap();
            prop_assert!(x.abs() <= bound);
        }
    }

    /// Stop position never leaves its bound in either contact mode.
    #[test]
    fn stop_bound_invariant(
        time_constant in 0.2f64..3.0,
        damping in 0.0f64..2.0,
        bound in 0.1f64..5.0,
        dt in 0.005f64..0.2,
        strict in any::<bool>(),
        inputs in prop::collection::vec(-20.0f64..20.0, 50..200),
    ) {
        let contact = if strict { ContactMode::Strict } else { ContactMode::Companion };
        let link = StopLink::new(1.0, time_constant, damping, bound, dt, CandidateMode::Zoh, contact).unwrap();
        let (mut x1, mut x2) = (0.0, 0.0);
        for u in inputs {
            let (n1, n2) = link.step_pair(x1, x2, u).unwrap();
            prop_assert!(n1.abs() <= bound, "position {n1} left ±{bound}");
            x1 = n1;
            x2 = n2;
        }
    }

    /// Both hydraulic limiters hold under arbitrary drive.
    #[test]
    fn hydraulic_bound_invariant(
        inputs in prop::collection::vec(-10.0f64..10.0, 100..300),
        speed0 in -60.0f64..60.0,
    ) {
        let drive = HydraulicDrive::new(HydraulicParams::default()).unwrap();
        let mut s = [0.0, 0.0, speed0, 0.0];
        for u in inputs {
            s = drive.step_state(&s, u).unwrap();
            prop_assert!(s[0].abs() <= drive.params.cradle_bound);
            prop_assert!(s[1].abs() <= drive.params.pressure_bound);
        }
    }

    /// Model-file round trip reproduces forward outputs bitwise on
    /// arbitrary small networks.
    #[test]
    fn model_file_round_trip_bitwise(
        seed in 0u64..5000,
        dims_pick in 0usize..4,
        input in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let dims: &[usize] = match dims_pick {
            0 => &[4, 3, 1],
            1 => &[4, 6, 2],
            2 => &[4, 2, 2, 1],
            _ => &[4, 5],
        };
        let acts: Vec<Activation> = (0..dims.len() - 1)
            .map(|i| match (seed as usize + i) % 3 {
                0 => Activation::Identity,
                1 => Activation::Relu,
                _ => Activation::LeakyRelu { alpha: 0.01 },
            })
            .collect();
        let net = Mlp::from_dims(dims, &acts, &mut limitrain::rng::seeded(seed)).unwrap();
        let json = serde_json::to_string(&ModelFile::from_net(&net)).unwrap();
        let back: ModelFile = serde_json::from_str(&json).unwrap();
        let net2 = back.into_net().unwrap();
        let a = net.forward(&input).unwrap();
        let b = net2.forward(&input).unwrap();
        prop_assert_eq!(a, b);
    }

    /// MSE is non-negative and zero exactly when the vectors agree.
    #[test]
    fn mse_nonnegative_zero_iff_equal(
        pred in prop::collection::vec(-100.0f64..100.0, 1..8),
        delta in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let target: Vec<f64> = pred.iter().zip(&delta).map(|(p, d)| p + d).collect();
        let loss = mse_loss(&pred, &target).unwrap();
        prop_assert!(loss.value >= 0.0);
        let all_equal = pred.iter().zip(&target).all(|(a, b)| a == b);
        prop_assert_eq!(loss.value == 0.0, all_equal);
    }

    /// Train/test splits are disjoint and jointly complete.
    #[test]
    fn split_partitions_dataset(n in 10usize..300, seed in any::<u64>()) {
        let pairs: Vec<TrainingPair> = (0..n)
            .map(|i| TrainingPair {
                input: vec![i as f64],
                target: vec![-(i as f64)],
                category: Category::NoLimit,
            })
            .collect();
        let ds = Dataset {
            pairs,
            provenance: Provenance {
                signals: vec![],
                plant_config_hash: "p".into(),
                seed: 0,
                pair_format: PairFormat::ImitatorState,
                balance: None,
            },
        };
        let (train, test) = split(&ds, 0.9, seed).unwrap();
        prop_assert_eq!(train.len(), (n as f64 * 0.9).floor() as usize);
        prop_assert_eq!(train.len() + test.len(), n);
        let mut ids: Vec<i64> = train.iter().chain(&test).map(|p| p.input[0] as i64).collect();
        ids.sort_unstable();
        let expected: Vec<i64> = (0..n as i64).collect();
        prop_assert_eq!(ids, expected);
    }

    /// Settling time is invariant under time shift and joint output/target
    /// scaling; overshoot is invariant under scaling.
    #[test]
    fn metrics_shift_and_scale_invariance(
        rate in 0.5f64..5.0,
        scale in 0.1f64..50.0,
        shift in 0.0f64..100.0,
        target in -3.0f64..3.0,
        y0 in -3.0f64..3.0,
    ) {
        prop_assume!((target - y0).abs() > 0.05);
        let dt = 0.01;
        let y: Vec<f64> = (0..2000)
            .map(|i| {
                let t = i as f64 * dt;
                target + (y0 - target) * (-rate * t).exp()
            })
            .collect();
        let mk = |y: Vec<f64>, t_shift: f64| Trajectory {
            dt,
            time: (0..y.len()).map(|i| i as f64 * dt + t_shift).collect(),
            reference: vec![target; y.len()],
            control: vec![0.0; y.len()],
            states: y.iter().map(|&v| vec![v]).collect(),
            output: y,
        };
        let base = compute_metrics(&mk(y.clone(), 0.0), target, 0.02).unwrap();
        let shifted = compute_metrics(&mk(y.clone(), shift), target, 0.02).unwrap();
        // The shifted time column rounds (t + shift) − shift, so equality
        // holds at rounding precision rather than bitwise.
        match (base.settling_time, shifted.settling_time) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9 * (1.0 + shift)),
            (a, b) => prop_assert_eq!(a, b),
        }
        let scaled_y: Vec<f64> = y.iter().map(|v| v * scale).collect();
        let scaled = compute_metrics(&mk(scaled_y, 0.0), target * scale, 0.02).unwrap();
        prop_assert_eq!(base.settling_time, scaled.settling_time);
        prop_assert!((base.overshoot - scaled.overshoot).abs() <= 1e-9 * (1.0 + base.overshoot));
    }
}
