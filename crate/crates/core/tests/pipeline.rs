use clbf::analytics::{pr_alpha_distribution, pr_efp, Backend, FpModel, ModelParams};
use clbf::optimizer::{optimize_k2, split_budget};
use clbf::protocol::{recover_provenance, Arrangement, Classification, Clbf, ClbfParams, PacketId, RecoveryLimits};
use clbf::segmentation::{NodeId, SegmentId, SegmentSequence, SeqLenMode};
use clbf::sim::{run_sweep, run_trials, PlacementPolicy, ScenarioConfig, SweepAxis};

fn n(i: u32) -> NodeId {
    NodeId(i)
}

#[test]
fn packet_survives_the_wire_between_hops() {
    let params = ClbfParams { m1: 512, k1: 5, m2: 512, k2: 5, seed: 99 };
    let mut c = Clbf::new(params, PacketId(0xfeed)).unwrap();
    c.source_embed(n(5), SegmentId(3)).unwrap();
    c.forward_embed(n(5), n(4), SegmentId(3)).unwrap();
    let mut c = Clbf::from_bytes(&c.to_bytes()).unwrap();
    c.forward_embed(n(4), n(2), SegmentId(2)).unwrap();
    c.forward_embed(n(2), n(1), SegmentId(1)).unwrap();
    c.deliver(n(1), n(0)).unwrap();
    let c = Clbf::from_bytes(&c.to_bytes()).unwrap();
    assert_eq!(c.hop_count(), 4);

    let nodes: Vec<NodeId> = (0..7).map(n).collect();
    let out = recover_provenance(&c, &nodes, n(0), 4, SeqLenMode::H, RecoveryLimits::default()).unwrap();
    let truth = Arrangement {
        path: vec![n(5), n(4), n(2), n(1), n(0)],
        sequence: SegmentSequence::from_indices(&[1, 2, 3, 3]),
    };
    assert_eq!(out.classify(&truth), Classification::Unique);
}

#[test]
fn fig3_optimum_golden() {
    // Pinned from the first verified run; both backends agree on the optimum.
    for backend in [Backend::ClosedForm, Backend::Oracle] {
        for mode in [SeqLenMode::H, SeqLenMode::HPlus1] {
            let r = optimize_k2(200, 15, 8, Some(2..=30), mode, backend).unwrap();
            assert_eq!(r.k2_star, 9, "{backend} {mode:?}");
        }
    }
}

#[test]
fn budget_split_hands_remainder_to_locations() {
    let r = split_budget(2000, 10, 6, 12, 1e-4, SeqLenMode::H, Backend::Oracle).unwrap();
    assert_eq!(r.m1.unwrap() + r.m2, 2000);
    let direct = optimize_k2(r.m2, 10, 6, None, SeqLenMode::H, Backend::Oracle).unwrap();
    assert_eq!(r.k2_star, direct.k2_star);
    assert_eq!(r.achieved_pr_efp, direct.achieved_pr_efp);
}

#[test]
fn model_is_a_probability_everywhere() {
    for delta in 1..=6u16 {
        for h in [1usize, 3, 7] {
            let model = FpModel::new(h, delta, SeqLenMode::H, Backend::ClosedForm).unwrap();
            for (m2, k2) in [(8u32, 1u16), (8, 8), (64, 3), (300, 12)] {
                let b = model.evaluate(m2, k2).unwrap();
                assert!((0.0..=1.0).contains(&b.total), "delta={delta} h={h} m2={m2} k2={k2}");
                assert!(b.pr_efp_given_alpha.iter().all(|p| (0.0..=1.0).contains(p)));
                let mass: f64 = pr_alpha_distribution(m2, k2, h).iter().sum();
                assert!((mass - 1.0).abs() < 1e-9);
            }
        }
    }
    let p = ModelParams { m2: 100, k2: 4, h: 15, delta: 8, mode: SeqLenMode::HPlus1 };
    assert_eq!(pr_efp(&p, Backend::Oracle).unwrap(), pr_efp(&p, Backend::Oracle).unwrap());
}

#[test]
fn sweeps_are_bitwise_reproducible() {
    let config = ScenarioConfig {
        n_nodes: 10,
        delta: 5,
        h: 6,
        m1: 512,
        k1: 6,
        m2: 40,
        k2: 3,
        placement: PlacementPolicy::Random,
        mode: SeqLenMode::H,
        trials: 400,
        base_seed: 11,
        limits: RecoveryLimits::default(),
    };
    let a = run_sweep(&config, SweepAxis::M2, &[20, 40, 80]);
    let b = run_sweep(&config, SweepAxis::M2, &[20, 40, 80]);
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    assert!(a.iter().all(|r| r.miss_count == 0 && r.error.is_none()));
    assert!(a.iter().any(|r| r.skipped_trials > 0), "random placement should sometimes leave no valid path");
    let other = run_sweep(&ScenarioConfig { base_seed: 12, ..config }, SweepAxis::M2, &[20]);
    assert_ne!(other[0], a[0]);
}

#[test]
fn larger_location_filters_mean_fewer_alternatives() {
    let config = ScenarioConfig {
        n_nodes: 9,
        delta: 6,
        h: 8,
        m1: 1024,
        k1: 8,
        m2: 32,
        k2: 3,
        placement: PlacementPolicy::Lattice,
        mode: SeqLenMode::H,
        trials: 600,
        base_seed: 5,
        limits: RecoveryLimits::default(),
    };
    let small: usize = run_trials(&config).iter().map(|r| r.as_ref().unwrap().arrangements_count).sum();
    let large: usize = run_trials(&ScenarioConfig { m2: 512, ..config })
        .iter()
        .map(|r| r.as_ref().unwrap().arrangements_count)
        .sum();
    assert!(large < small);
    assert!(large >= 600);
}
