use kerdock_radar::harness::{default_thresholds, roc, run_trials, success_rate, TrialConfig};
use kerdock_radar::scene_grid::{sample_geometry, Grid};
use kerdock_radar::sensing::{coherence_dense, dense_matrix, SensingOperator};
use kerdock_radar::waveforms::{
    alltop_waveforms, kerdock_family, kerdock_waveforms, FamilyTag, WaveformSet,
};
use nalgebra::DMatrix;

fn mu(w: WaveformSet, n_rx: usize, seed: u64) -> f64 {
    let (p, n_tx) = (w.matrix().nrows(), w.n_tx());
    let op = SensingOperator::new(
        w,
        sample_geometry(n_tx, n_rx, seed).unwrap(),
        Grid::new(p, p, n_tx, n_rx).unwrap(),
    )
    .unwrap();
    coherence_dense(&dense_matrix(&op).unwrap()).mu.unwrap()
}

#[test]
fn coherence_negative_control() {
    let fam = kerdock_family(7).unwrap();
    let pair = kerdock_waveforms(&fam, 2, 0).unwrap();
    let s = pair.column(1).to_vec();
    let dup = WaveformSet::new(DMatrix::from_fn(7, 2, |l, _| s[l]), FamilyTag::External).unwrap();
    // Identical transmitters collapse to one waveform times a scalar, whose
    // unit-modulus ambiguity points make whole columns parallel.
    assert!((mu(dup, 3, 1) - 1.0).abs() < 1e-10);
    let single = kerdock_waveforms(&fam, 2, 0).unwrap();
    let single = WaveformSet::new(
        single.matrix().columns(1, 1).into_owned(),
        FamilyTag::Kerdock,
    )
    .unwrap();
    assert!((mu(single, 3, 1) - 1.0).abs() < 1e-10);
    assert!(mu(pair, 3, 1) < 1.0 - 1e-3);
    assert!(mu(alltop_waveforms(7, 1).unwrap(), 3, 1) < 1.0 - 1e-3);
}

fn small(sparsity: usize, snr_db: f64) -> TrialConfig {
    let mut cfg = TrialConfig::new(FamilyTag::Kerdock, 11, 2, 4, sparsity);
    cfg.snr_db = Some(snr_db);
    cfg.trials = 20;
    cfg.seed = 3;
    cfg
}

#[test]
fn recovery_improves_with_snr() {
    let low = success_rate(&run_trials(&small(3, 0.0)).unwrap());
    let high = success_rate(&run_trials(&small(3, 30.0)).unwrap());
    assert!(high > low, "low {low} high {high}");
}

#[test]
fn detection_degrades_with_sparsity() {
    let pd = |s| {
        let mut cfg = small(s, 15.0);
        cfg.trials = 50;
        let out = run_trials(&cfg).unwrap();
        roc(&out, &default_thresholds(&out).unwrap())
            .unwrap()
            .pd_at_pfa(1e-2)
    };
    let (p5, p10, p20) = (pd(5), pd(10), pd(20));
    println!("P_d at P_fa = 1e-2: S=5 {p5:.3}, S=10 {p10:.3}, S=20 {p20:.3}");
    // A trend over 50 trials, so adjacent steps get a small allowance.
    assert!(p5 > p20);
    assert!(p10 <= p5 + 0.02 && p20 <= p10 + 0.02);
}
