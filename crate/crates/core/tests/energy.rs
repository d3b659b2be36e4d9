use dss_core::node::{
    cycle_charge_mah, lifetime_hours, BatteryConfig, Charge, ChargeModel, DutyCycleConfig,
};
use dss_core::sim::{self, LotterySchedule, RunParams, SimConfig};
use proptest::prelude::*;

/// Counts whole cycles until the battery can no longer supply one, phase by
/// phase, and returns the time at which the failing phase starts.
fn accumulate_until_dead(cfg: &DutyCycleConfig, battery: &BatteryConfig) -> f64 {
    let pc = cfg.phase_charges();
    let (init_h, com_h) = cfg.active_durations();
    let phases = [
        (Charge::from_mah(pc.sleep_mah).nah(), cfg.sleep_hours),
        (Charge::from_mah(pc.init_mah).nah(), init_h),
        (Charge::from_mah(pc.com_mah).nah(), com_h),
    ];
    let cap = Charge::from_mah(battery.effective_capacity_mah()).nah();
    let (mut drawn, mut t) = (0u64, 0.0);
    loop {
        for (q, d) in phases {
            if drawn + q > cap {
                return t;
            }
            drawn += q;
            t += d;
            if drawn == cap {
                return t;
            }
        }
    }
}

#[test]
fn closed_form_matches_accumulation_for_reference_values() {
    let b = BatteryConfig::default();
    for x in [0.1, 0.5, 0.73, 1.0, 5.0, 24.0] {
        let cfg = DutyCycleConfig::default().with_sleep(x);
        let formula = 1500.0 / (0.12 + 0.01 * x) * (0.0016 + x);
        let l = lifetime_hours(&cfg, &b).unwrap();
        assert!((l - formula).abs() < 1e-6 * formula);
        let sim = accumulate_until_dead(&cfg, &b);
        assert!((sim - l).abs() <= cfg.cycle_hours(), "x={x}: {sim} vs {l}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn closed_form_matches_accumulation(
        x in 0.05f64..30.0,
        init_ma in 5.0f64..200.0,
        com_ma in 5.0f64..300.0,
        cap in 50.0f64..3000.0,
        measured in any::<bool>(),
    ) {
        let cfg = DutyCycleConfig {
            sleep_hours: x,
            init_current_ma: init_ma,
            com_current_ma: com_ma,
            charge_model: if measured { ChargeModel::Measured } else { ChargeModel::Rounded },
            ..DutyCycleConfig::default()
        };
        let b = BatteryConfig { capacity_mah: cap, ..BatteryConfig::default() };
        let l = lifetime_hours(&cfg, &b).unwrap();
        let sim = accumulate_until_dead(&cfg, &b);
        prop_assert!((sim - l).abs() <= cfg.cycle_hours() + 1e-6 * l);
    }
}

#[test]
fn simulated_death_matches_lifetime() {
    let cfg = SimConfig {
        run: RunParams {
            n_nodes: 1,
            duration_h: 9000.0,
            tick_h: 0.5,
            ..RunParams::default()
        },
        lottery: LotterySchedule {
            draw_every_h: 0.0,
            ..LotterySchedule::default()
        },
        ..SimConfig::default()
    };
    let out = sim::run(&cfg).unwrap();
    let node = &out.summary.nodes[0];
    let death = node.death_time_h.expect("node dies before 9000 h");
    let l = lifetime_hours(&cfg.duty_cycle, &cfg.battery).unwrap();
    assert!((death - 8620.58).abs() < 0.01 + cfg.duty_cycle.cycle_hours());
    assert!((death - l).abs() <= cfg.duty_cycle.cycle_hours());
    assert_eq!(node.drawn_nah, Charge::from_mah(1500.0).nah());

    // Every whole cycle drew exactly one cycle charge.
    let per_cycle = Charge::from_mah(cycle_charge_mah(&cfg.duty_cycle)).nah();
    assert_eq!(node.cycles, 1_500_000_000 / per_cycle);
}

#[test]
fn trace_energy_equals_summary() {
    let cfg = SimConfig {
        run: RunParams {
            n_nodes: 4,
            duration_h: 300.0,
            loss_prob: 0.3,
            ..RunParams::default()
        },
        ..SimConfig::default()
    };
    let out = sim::run(&cfg).unwrap();
    for n in &out.summary.nodes {
        // Sum of per-phase increments along this node's rows.
        let mut prev = 0u64;
        let mut total = 0u64;
        for line in out
            .trace
            .lines()
            .filter(|l| l.starts_with(&format!("node,{},", n.id)))
        {
            let drawn = Charge::parse_mah(line.split(',').nth(4).unwrap())
                .unwrap()
                .nah();
            total += drawn - prev;
            prev = drawn;
        }
        assert_eq!(total, n.drawn_nah);
    }
}
