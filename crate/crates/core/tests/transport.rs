mod common;

use porous_da::diagnostics::{fit_decay, ErrorRecord, ErrorSeries, Metric, SeriesMeta};
use porous_da::{CellField, FluidModel, FluidParams, Grid, NudgingMode, PressureSystem, Transport, WellConfig};
use rand::Rng;

#[test]
fn maximum_principle_on_random_divergence_free_steps() {
    let mut rng = common::rng(2024);
    let g = Grid::new(16, 12, 1.0, 0.75).unwrap();
    for _ in 0..1000 {
        let params = FluidParams {
            mu_w: rng.gen_range(0.2..5.0),
            xi_w: rng.gen_range(0.0..2.0),
            xi_o: rng.gen_range(0.0..2.0),
            ..FluidParams::default()
        };
        let fluid = FluidModel::new(params).unwrap();
        let amplitude = rng.gen_range(0.01..1.0);
        let flux = common::stream_flux(g, &mut rng, amplitude);
        let lo = rng.gen_range(0.0..0.5);
        let hi = rng.gen_range(0.5..1.0);
        let s = common::random_field(g, &mut rng, lo, hi);
        let transport = Transport::new(&fluid);
        let dt = rng.gen_range(0.05..1.0) * transport.stable_dt(&flux, 1.0).unwrap();
        let (next, report) = transport.step(&s, &flux, dt).unwrap();
        assert!(next.min() >= s.min() - 1e-14 && next.max() <= s.max() + 1e-14);
        assert_eq!(report.clamp, 0.0);
    }
}

#[test]
fn water_ledger_closes_with_wells_and_pressure_updates() {
    let g = Grid::unit_square(30).unwrap();
    let fluid = FluidModel::new(FluidParams::default()).unwrap();
    let wells = WellConfig::corners(&g, 10.0, 100.0).unwrap();
    let perm = CellField::constant(g, 1.0);
    let transport = Transport::new(&fluid).with_wells(Some(&wells));
    let mut s = CellField::zeros(g);
    for _ in 0..200 {
        let (q_t, _) = wells.sources(&s).unwrap();
        let sys = PressureSystem::assemble(&perm, &s, &fluid).unwrap();
        let flux = sys.face_fluxes(&sys.solve(&q_t).unwrap()).unwrap();
        let (next, report) = transport.advance(&s, &flux, 0.05, 1.0).unwrap();
        let scale = report.water_after.abs().max(report.water_before.abs()).max(report.injected.abs());
        assert!(report.balance_error().abs() <= 1e-12 * scale, "{report:?}");
        s = next;
    }
    assert!(s.max() <= 1.0 && s.min() >= 0.0);
}

#[test]
fn transport_is_first_order_in_time() {
    let ratio = common::transport_richardson_ratio();
    assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
}

#[test]
fn nudging_matches_relaxation_ode() {
    for mode in [NudgingMode::Implicit, NudgingMode::Explicit] {
        let e = common::nudging_oracle_error(0.05, 2.0, 3.0, mode);
        let e_half = common::nudging_oracle_error(0.025, 2.0, 3.0, mode);
        assert!(e <= 0.01, "{mode:?}: {e}");
        let ratio = e / e_half;
        assert!((1.8..=2.2).contains(&ratio), "{mode:?}: ratio {ratio}");
    }
}

#[test]
fn decay_fit_recovers_nudging_rate() {
    let g = Grid::unit_square(1).unwrap();
    let map = porous_da::CoarseMap::new(g, g).unwrap();
    let observer = porous_da::Observer::full(map);
    let obs = observer.project(&CellField::constant(g, 0.5)).unwrap();
    let fluid = FluidModel::new(FluidParams::default()).unwrap();
    let transport = Transport::new(&fluid);
    let flux = porous_da::FaceFlux::zeros(g);
    for (mu, dt) in [(2.0, 0.01), (2.0, 0.02), (10.0, 0.004)] {
        let nudge =
            porous_da::transport::Nudge { observer: &observer, observation: &obs, mu, mode: NudgingMode::Implicit };
        let mut s = CellField::constant(g, 1.0);
        let mut series = ErrorSeries::new(SeriesMeta { h: 1.0, mu, mask: "full".into() });
        for n in 0..=(2.0 / (mu * dt)) as usize {
            if n > 0 {
                s = transport.nudged_step(&s, &flux, dt, &nudge).unwrap().0;
            }
            let e = (s.get(0) - 0.5).abs();
            series.push(ErrorRecord { t: n as f64 * dt, l2: e, linf: e, v0star: None }).unwrap();
        }
        let fit = fit_decay(&series, Metric::L2, (0.0, f64::INFINITY)).unwrap();
        assert!((fit.rate / mu - 1.0).abs() <= 0.02, "mu {mu} dt {dt}: rate {}", fit.rate);
        assert!(fit.r_squared > 1.0 - 1e-9);
    }
}
