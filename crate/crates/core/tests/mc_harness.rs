use addmeta::effect_model::AdditiveEffect;
use addmeta::mc_harness::*;
use addmeta::mixture::DensityId;
use addmeta::parallel::with_workers;
use addmeta::rng::substream;
use addmeta::Result;
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn perturbation_golden_replay() {
    // Frozen at first implementation. Study 1's AB SD draw was non-positive
    // and fell back to sigma_ws.
    let p = perturb_study_params(
        [4.0, 5.5, 9.0],
        1.0,
        10,
        PERTURBATION_SD,
        Truncation::FirstAnchor,
        &mut substream(2024, &[]),
    );
    assert_eq!(p.len(), 10);
    assert_eq!(
        p[0].means,
        [2.03414844974219, 5.467081647216472, 10.303862711925722]
    );
    assert_eq!(p[0].sds, [1.4064933403241386, 1.0, 1.1133619528963916]);
    assert_eq!(
        p[9].means,
        [2.9502130403640936, 5.270146381133831, 10.544649216369868]
    );
    assert_eq!(
        p[9].sds,
        [0.20756663680293475, 2.2149523574120735, 2.4443486215011765]
    );
}

#[test]
fn zero_perturbation_returns_anchors() {
    let p = perturb_study_params(
        [4.0, 5.5, 11.0],
        5.0,
        15,
        0.0,
        Truncation::FirstAnchor,
        &mut substream(1, &[]),
    );
    assert!(p
        .iter()
        .all(|s| s.means == [4.0, 5.5, 11.0] && s.sds == [5.0; 3]));
}

#[test]
fn negative_draw_replacement() {
    let mv = [4.0, 5.5, 9.0];
    assert_eq!(truncate_mean(-1.0, 2, &mv, Truncation::FirstAnchor), 4.0);
    assert_eq!(truncate_mean(-1.0, 2, &mv, Truncation::PerGroup), 9.0);
    assert_eq!(truncate_mean(0.5, 2, &mv, Truncation::FirstAnchor), 0.5);
    assert_eq!(truncate_sd(-0.3, 5.0), 5.0);
    assert_eq!(truncate_sd(0.0, 1.0), 1.0);
    // With a huge perturbation every mean stays non-negative.
    let p = perturb_study_params(mv, 1.0, 15, 50.0, Truncation::FirstAnchor, &mut substream(3, &[]));
    assert!(p
        .iter()
        .all(|s| s.means.iter().all(|&m| m >= 0.0) && s.sds.iter().all(|&v| v > 0.0)));
}

struct Oracle;

impl StudyEstimator for Oracle {
    fn estimate(&self, study: &GeneratedStudy, _seed: u64) -> Result<AdditiveEffect> {
        Ok(study.truth.clone())
    }
}

fn small(density: DensityId) -> Scenario {
    Scenario::new(density, 5, [4.0, 5.5, 9.0], 1.0, [15, 20, 10])
        .with_reps(8, 200)
        .with_seed(99)
}

#[test]
fn oracle_substitution_gives_zero_bias() {
    let s = small(DensityId::F3);
    let r = run_scenario_with(&s, &CrudeEstimator::default(), &Oracle).unwrap();
    assert_eq!(r.bias_g_sim, 0.0);
    assert_eq!(r.bias_gwm_sim, 0.0);
    assert!(r.bias_g_crude > 0.0);
}

#[test]
fn bias_is_invariant_to_study_order() {
    let s = small(DensityId::F2);
    let studies = generate_studies(&s, 0, 0).unwrap();
    let truth: Vec<_> = studies.iter().map(|x| x.truth.clone()).collect();
    let crude: Vec<_> = studies
        .iter()
        .map(|x| CrudeEstimator::default().estimate(x, 0).unwrap())
        .collect();
    let a = ReplicateOutcome::from_effects(&truth, &crude, &truth).unwrap();
    let perm = [3, 0, 4, 2, 1];
    let t2: Vec<_> = perm.iter().map(|&i| truth[i].clone()).collect();
    let c2: Vec<_> = perm.iter().map(|&i| crude[i].clone()).collect();
    let b = ReplicateOutcome::from_effects(&t2, &c2, &t2).unwrap();
    assert_eq!(a.bias_g_crude.to_bits(), b.bias_g_crude.to_bits());
    assert_eq!(a.bias_gwm_crude.to_bits(), b.bias_gwm_crude.to_bits());
}

#[test]
fn identical_reports_across_worker_counts() {
    let s = small(DensityId::F4);
    let one = with_workers(1, || run_scenario(&s)).unwrap();
    let three = with_workers(3, || run_scenario(&s)).unwrap();
    assert_eq!(one, three);
    let again = run_scenario(&s).unwrap();
    assert_eq!(one, again);
}

#[test]
fn generated_studies_carry_scenario_shape() {
    let s = small(DensityId::F1);
    let studies = generate_studies(&s, 2, 0).unwrap();
    assert_eq!(studies.len(), 5);
    for st in &studies {
        assert_eq!(st.data.each_ref().map(Vec::len), [15, 20, 10]);
        assert_eq!(st.summary.means, st.params.means);
        assert!(st.truth.g.is_finite() && st.truth.v_g > 0.0);
    }
    let sample = Scenario {
        summary_source: SummarySource::Sample,
        ..s
    };
    let studies = generate_studies(&sample, 2, 0).unwrap();
    let m0 = studies[0].data[0].iter().sum::<f64>() / 15.0;
    assert!((studies[0].summary.means[0] - m0).abs() < 1e-12);
}

#[test]
fn scenario_validation_and_config_parsing() {
    let text = r#"
        density = "f2"
        L = 10
        mean_vec = [4.0, 5.5, 11.0]
        sigma_ws = 5.0
        n_triplet = [300, 400, 240]
        mc_reps = 100
        inner_iterations = 2000
        seed = 1
        truncation = "per-group"
    "#;
    let s = Scenario::from_toml(text).unwrap();
    assert_eq!(s.truncation, Truncation::PerGroup);
    assert_eq!(s.studies, 10);
    let json = serde_json::to_string(&s).unwrap();
    assert_eq!(Scenario::from_json(&json).unwrap(), s);
    assert!(Scenario::from_toml(&text.replace("L = 10", "L = 7")).is_err());
    assert!(Scenario::from_toml(&text.replace("sigma_ws = 5.0", "sigma_ws = 2.0")).is_err());
    assert!(Scenario::from_toml(&text.replace("mc_reps = 100", "mc_reps = 0")).is_err());
    assert_eq!(full_grid(1, 1, 0).len(), 576);
}

#[test]
fn sim_bias_falls_as_samples_grow() {
    // Allow one inversion across the eight sample-size triplets.
    let biases: Vec<f64> = N_TRIPLETS
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let s = Scenario::new(DensityId::F1, 10, [4.0, 5.5, 11.0], 1.0, n)
                .with_reps(30, 400)
                .with_seed(500 + i as u64);
            run_scenario(&s).unwrap().bias_gwm_sim
        })
        .collect();
    let inversions = biases.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{biases:?}");
}

#[test]
fn sim_beats_crude_in_nearly_all_batches() {
    let batches = 20;
    let wins = (0..batches)
        .filter(|&b| {
            let s = Scenario::new(DensityId::F1, 10, [4.0, 5.5, 11.0], 1.0, [150, 200, 120])
                .with_reps(5, 300)
                .with_seed(7_000 + b);
            let r = run_scenario(&s).unwrap();
            r.bias_gwm_sim < r.bias_gwm_crude
        })
        .count();
    assert!(wins * 100 >= 95 * batches as usize, "{wins}/{batches}");
}

#[test]
fn binary_fixture_expected_counts() {
    let p_present = |mean: f64| {
        1.0 - Normal::new(mean, DICHOTOMIZED_SD)
            .unwrap()
            .cdf(DICHOTOMIZED_CUTOFF)
    };
    let expected_aa = 30.0 * p_present(4.0);
    let expected_bb = 30.0 * p_present(7.0);
    assert!((expected_aa - 10.34).abs() < 0.01 && (expected_bb - 17.38).abs() < 0.01);

    // Average realized counts over many fixtures track the expectation.
    let reps = 4000;
    let mut totals = [0.0; 3];
    for r in 0..reps {
        let f = dichotomized_fixture(&mut substream(31, &[r]));
        for (k, total) in totals.iter_mut().enumerate() {
            assert_eq!(f.counts[k][0] + f.counts[k][1], 30);
            assert_eq!(f.data[k].len(), 30);
            *total += f64::from(f.counts[k][0]);
        }
    }
    let mean_aa = totals[0] / reps as f64;
    let mean_bb = totals[2] / reps as f64;
    // Binomial SE of the mean count is about 0.04.
    assert!((mean_aa - expected_aa).abs() < 0.2, "{mean_aa}");
    assert!((mean_bb - expected_bb).abs() < 0.2, "{mean_bb}");

    let all = dichotomized_fixture_with_cutoff(&mut substream(1, &[]), f64::NEG_INFINITY);
    assert!(all.counts.iter().all(|c| c[0] == 30 && c[1] == 0));
}
