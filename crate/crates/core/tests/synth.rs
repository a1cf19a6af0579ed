use icewatch_core::record::{apply_label_windows, summarize, Channel, Label};
use icewatch_core::synth::{generate_turbine, make_turbine_pair, OffsetProfile, SynthConfig};

fn config(seed: u64, duration: usize) -> SynthConfig {
    SynthConfig {
        seed,
        duration,
        ..SynthConfig::default()
    }
}

#[test]
fn labeled_summary_matches_generator_labels() {
    let out = generate_turbine(&config(7, 40_000)).unwrap();
    let ds = apply_label_windows("wt", out.records.clone(), &out.truth_windows).unwrap();
    let s = summarize(&ds);
    assert_eq!(s.n_normal, out.count(Label::Normal));
    assert_eq!(s.n_abnormal, out.count(Label::Abnormal));
    assert_eq!(s.n_invalid, out.count(Label::Invalid));
    assert!(s.n_abnormal > 0);
}

#[test]
fn heavier_derating_lowers_iced_power() {
    let mean_iced_power = |derating: f64| {
        let mut cfg = config(3, 30_000);
        cfg.effect.power_derating = derating;
        let out = generate_turbine(&cfg).unwrap();
        let iced: Vec<f64> = out
            .records
            .iter()
            .zip(&out.truth_labels)
            .filter(|(_, &l)| l == Label::Abnormal)
            .map(|(r, _)| r.power)
            .collect();
        (
            out.truth_labels,
            iced.iter().sum::<f64>() / iced.len() as f64,
        )
    };
    let runs: Vec<_> = [0.1, 0.3, 0.5, 0.8]
        .into_iter()
        .map(mean_iced_power)
        .collect();
    for pair in runs.windows(2) {
        assert_eq!(pair[0].0, pair[1].0, "derating must not move labels");
        assert!(pair[1].1 < pair[0].1);
    }
}

#[test]
fn icing_share_stays_in_a_plausible_band() {
    for seed in 0..4 {
        let out = generate_turbine(&config(seed, 50_000)).unwrap();
        let share = out.count(Label::Abnormal) as f64 / out.records.len() as f64;
        assert!((0.02..0.15).contains(&share), "seed {seed}: {share}");
    }
}

#[test]
fn pair_with_zero_profile_differs_only_by_draws() {
    let base = config(5, 5_000);
    let (a, b) = make_turbine_pair(&base, &OffsetProfile::zero()).unwrap();
    let again = generate_turbine(&SynthConfig { seed: 6, ..base }).unwrap();
    assert_eq!(b.records, again.records);
    assert_ne!(a.records, b.records);
}

#[test]
fn default_offsets_shift_the_affected_channels() {
    let base = config(9, 3_000);
    let (_, plain) = make_turbine_pair(&base, &OffsetProfile::zero()).unwrap();
    let (_, shifted) = make_turbine_pair(&base, &OffsetProfile::documented_default()).unwrap();
    assert_eq!(plain.truth_labels, shifted.truth_labels);
    let mean = |out: &icewatch_core::synth::SynthOutput, c: Channel| {
        out.records.iter().map(|r| r.channel(c)).sum::<f64>() / out.records.len() as f64
    };
    assert!(mean(&shifted, Channel::Pitch1MotoTmp) < mean(&plain, Channel::Pitch1MotoTmp));
    assert!(mean(&shifted, Channel::IntTmp) > mean(&plain, Channel::IntTmp));
    assert_eq!(mean(&shifted, Channel::AccX), mean(&plain, Channel::AccX));
}
