use proptest::prelude::*;
use sisac::sigmodel::{
    ap_power, ap_power_beamformers, sinr_ue, sinr_ue_beamformers, snr_eve, snr_eve_beamformers,
};
use sisac::synth::{random_beamformers, random_scenario};
use sisac::LiftedVariables;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lifted_and_beamformer_metrics_agree(
        seed in any::<u64>(),
        aps in 1usize..4,
        antennas in 2usize..7,
        ues in 1usize..4,
        an_rank in 0usize..3,
    ) {
        let scn = random_scenario(seed, aps, antennas, ues).unwrap();
        let (bf, r) = random_beamformers(seed ^ 0x5eed, &scn, an_rank).unwrap();
        let vars = LiftedVariables::from_beamformers(&bf, r.clone()).unwrap();
        for k in 0..ues {
            let lifted = sinr_ue(&scn, &vars, k).unwrap();
            let direct = sinr_ue_beamformers(&scn, &bf, &r, k).unwrap();
            prop_assert!(rel(lifted, direct) < 1e-10, "SINR {k}: {lifted} vs {direct}");
        }
        let lifted = snr_eve(&scn, &vars).unwrap();
        let direct = snr_eve_beamformers(&scn, &bf, &r).unwrap();
        prop_assert!(rel(lifted, direct) < 1e-10, "Eve SNR: {lifted} vs {direct}");
        for m in 0..aps {
            let lifted = ap_power(&vars, m).unwrap();
            prop_assert!(rel(lifted, ap_power_beamformers(&bf, &r, m)) < 1e-12);
        }
    }
}
