use std::path::PathBuf;

use osc_factor_cli::config::{
    Axis, BathSection, CouplingEntry, CurveSection, OutputSection, ProbeName, ProtocolSection, RunConfig, RunSection,
    SeriesSection, SweepSection, SystemSection, TauModeName, ThermalSection, ToolSection, WindowModeName,
};
use proptest::prelude::*;

fn axis() -> impl Strategy<Value = Axis> {
    prop_oneof![Just(Axis::G), Just(Axis::K), Just(Axis::Alpha), Just(Axis::Gamma3), Just(Axis::Tau)]
}

fn series() -> impl Strategy<Value = Option<SeriesSection>> {
    proptest::option::of((axis(), prop::collection::vec(0.0..20.0f64, 1..6)).prop_map(|(axis, values)| SeriesSection { axis, values }))
}

fn system() -> impl Strategy<Value = SystemSection> {
    let couplings = prop::sample::subsequence(vec![1u32, 2, 3, 4], 1..4).prop_flat_map(|orders| {
        prop::collection::vec(0.01..3.0f64, orders.len()).prop_map(move |g| {
            orders.iter().zip(g).map(|(&order, strength)| CouplingEntry { order, strength }).collect::<Vec<_>>()
        })
    });
    (0.1..5.0f64, 0.1..5.0f64, 0.1..5.0f64, couplings)
        .prop_map(|(omega1, omega2, omega3, couplings)| SystemSection { omega1, omega2, omega3, couplings })
}

fn protocol() -> impl Strategy<Value = ProtocolSection> {
    let mode = prop_oneof![Just(WindowModeName::FullSupport), Just(WindowModeName::PaperWindow), Just(WindowModeName::Explicit)];
    (
        4u64..500,
        (0.0..15.0f64, -std::f64::consts::PI..std::f64::consts::PI),
        mode,
        (2u32..6, 1u32..10),
        proptest::option::of(0.0..10.0f64),
        (0.01..0.99f64, 0.01..0.99f64),
        any::<bool>(),
    )
        .prop_map(|(n, (alpha_modulus, alpha_phase), window_mode, (lo, span), tau, (peak_level, weight_threshold), damped)| {
            ProtocolSection {
                // the paper window of N = 4 is the single state [2, 2]
                n: if window_mode == WindowModeName::PaperWindow { n.max(5) } else { n },
                alpha_modulus,
                alpha_phase,
                window_mode,
                window: (window_mode == WindowModeName::Explicit).then_some([lo, lo + span]),
                tau,
                peak_level,
                weight_threshold,
                probe: if damped { ProbeName::Damped } else { ProbeName::Lossless },
            }
        })
}

fn sweep() -> impl Strategy<Value = Option<SweepSection>> {
    let mode = prop_oneof![
        Just((TauModeName::Optimal, None)),
        Just((TauModeName::Reference, None)),
        (0.0..2.0f64).prop_map(|t| (TauModeName::Fixed, Some(t))),
        (0.05..0.99f64).prop_map(|t| (TauModeName::Threshold, Some(t))),
    ];
    proptest::option::of((axis(), prop::collection::vec(0.0..20.0f64, 1..30), series(), mode).prop_map(
        |(axis, grid, series, (tau_mode, tau_value))| SweepSection { axis, grid, series, tau_mode, tau_value },
    ))
}

fn run_config() -> impl Strategy<Value = RunConfig> {
    (
        system(),
        (0.2..10.0f64, 1e-15..1e-6f64),
        (0.0..2.0f64, prop::array::uniform3(0.0..5.0f64)),
        protocol(),
        (0.0..1.0f64, 1.0..5.0f64, 1usize..5000, series()),
        sweep(),
        ("[a-z0-9_/]{1,20}", proptest::option::of(1usize..64)),
    )
        .prop_map(|(system, (temperature, tail_cutoff), (gamma3, nbar), protocol, curve, sweep, (dir, threads))| {
            let (start, stop, points, series) = curve;
            RunConfig {
                tool: ToolSection { version: "0.1.0".into() },
                system,
                thermal: ThermalSection { temperature, tail_cutoff },
                bath: BathSection { gamma: [0.0, 0.0, gamma3], nbar },
                protocol,
                curve: CurveSection { start, stop, points, series },
                sweep,
                output: OutputSection { dir: PathBuf::from(dir), ..OutputSection::default() },
                run: RunSection { threads },
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn valid_configs_round_trip(rc in run_config()) {
        rc.to_protocol().unwrap();
        let text = rc.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &rc);
        prop_assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn extreme_floats_round_trip(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let mut rc: RunConfig = RunConfig::preset(osc_factor::experiments::Preset::Fig4);
        rc.thermal.tail_cutoff = x;
        rc.curve.stop = x;
        let back = RunConfig::from_toml(&rc.to_toml()).unwrap();
        prop_assert_eq!(back.thermal.tail_cutoff.to_bits(), x.to_bits());
        prop_assert_eq!(back.curve.stop.to_bits(), x.to_bits());
    }
}
