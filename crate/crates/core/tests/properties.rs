use proptest::prelude::*;

use strata::calibration::{ame, rmse};
use strata::column::Column;
use strata::grid::Grid;
use strata::hydro::{
    convective_adjustment, inflow_placement, kz_profile, vertical_mixing, water_density, Constituent, HydroParams,
    MixingForcing,
};
use strata::oxygen::{do_saturation, kinetics_column, OxygenParams};
use strata::thermal::diffuse_scalar;

fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(-50.0..50.0f64, n),
            prop::collection::vec(-50.0..50.0f64, n),
        )
    })
}

prop_compose! {
    fn column()(n in 2usize..16)(
        thick in prop::collection::vec(0.3..3.0f64, n),
        shrink in prop::collection::vec(0.6..1.0f64, n),
        top in 1e3..1e6f64,
        temp in prop::collection::vec(4.0..30.0f64, n),
        oxy in prop::collection::vec(0.0..12.0f64, n),
        bod in prop::collection::vec(0.0..8.0f64, n),
    ) -> Column {
        let mut a = top;
        let area: Vec<f64> = shrink.iter().map(|s| { let x = a; a *= s; x }).collect();
        Column::from_layers(&thick, &area, 100.0, temp, oxy, bod)
    }
}

prop_compose! {
    fn grid()(ns in 1usize..8, nl in 1usize..10)(
        widths in prop::collection::vec(prop::collection::vec(0.0..500.0f64, nl), ns),
        lengths in prop::collection::vec(10.0..1000.0f64, ns),
        th in 0.2..4.0f64,
        nl in Just(nl),
    ) -> Grid {
        let segs = widths
            .into_iter()
            .zip(lengths)
            .enumerate()
            .map(|(i, (mut w, len))| {
                // narrowing downwards
                for k in 1..w.len() {
                    w[k] = w[k].min(w[k - 1]);
                }
                (i as u32 + 1, len, w)
            })
            .collect();
        Grid::uniform(segs, nl, th, -5.0).unwrap()
    }
}

fn stable(c: &Column) -> bool {
    let rho = c.densities().unwrap();
    rho.windows(2).all(|w| w[0] <= w[1] + 1e-12)
}

proptest! {
    #[test]
    fn error_metrics((p, o) in pairs()) {
        let a = ame(&p, &o).unwrap();
        let r = rmse(&p, &o).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!(r + 1e-12 >= a);
        prop_assert!((a - ame(&o, &p).unwrap()).abs() < 1e-12);
        prop_assert_eq!(ame(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn volume_is_monotone_and_inverts(g in grid(), f in 0.0..1.0f64, h in 0.0..1.0f64) {
        let lo = g.datum_elevation_m();
        let span = g.top_elevation_m() - lo;
        let (e1, e2) = (lo + span * f.min(h), lo + span * f.max(h));
        let (v1, v2) = (g.total_volume(e1).unwrap(), g.total_volume(e2).unwrap());
        prop_assert!(v1 <= v2 + 1e-9 * v2.abs());
        let curve = g.area_volume_curve();
        let at = curve.volume_at(e2).unwrap();
        prop_assert!((at - v2).abs() <= 1e-9 * v2.max(1.0));
        if g.surface_area(e2).unwrap() > 0.0 && v2 > 0.0 {
            let back = curve.elevation_at_volume(v2).unwrap();
            prop_assert!((g.total_volume(back).unwrap() - v2).abs() <= 1e-9 * v2);
        }
    }

    #[test]
    fn placement_weights_sum_to_one(
        mut temps in prop::collection::vec(4.5..30.0f64, 1..30),
        t_in in 0.0..35.0f64,
        hw in 0usize..5,
    ) {
        temps.sort_by(|a, b| b.total_cmp(a));
        let rho: Vec<f64> = temps.iter().map(|&t| water_density(t).unwrap()).collect();
        let w = inflow_placement(&rho, water_density(t_in).unwrap(), hw).unwrap();
        prop_assert_eq!(w.len(), rho.len());
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diffusion_conserves_and_bounds(mut c in column(), dt in 1.0..86_400.0f64, lk in -7.0..-3.0f64) {
        let kz = vec![10f64.powf(lk); c.len() - 1];
        let before = c.content(Constituent::Temperature);
        let lo = c.temp.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.temp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut x = c.temp.clone();
        diffuse_scalar(&c, &kz, dt, &mut x).unwrap();
        c.temp = x;
        let after = c.content(Constituent::Temperature);
        prop_assert!((after - before).abs() <= 1e-11 * before.abs());
        prop_assert!(c.temp.iter().all(|&t| t >= lo - 1e-9 && t <= hi + 1e-9));
    }

    #[test]
    fn convective_adjustment_stabilises(mut c in column()) {
        let heat = c.content(Constituent::Temperature);
        let oxy = c.content(Constituent::Oxygen);
        convective_adjustment(&mut c).unwrap();
        prop_assert!(stable(&c));
        prop_assert!((c.content(Constituent::Temperature) - heat).abs() <= 1e-11 * heat);
        prop_assert!((c.content(Constituent::Oxygen) - oxy).abs() <= 1e-11 * oxy.max(1.0));
        // already stable: nothing moves
        let snap = c.temp.clone();
        prop_assert_eq!(convective_adjustment(&mut c).unwrap(), 0);
        prop_assert_eq!(&c.temp, &snap);
    }

    #[test]
    fn mixing_leaves_a_stable_column(
        mut c in column(),
        wind in 0.0..15.0f64,
        b in -1e-7..1e-7f64,
        power in 0.0..1e-3f64,
    ) {
        let heat = c.content(Constituent::Temperature);
        let f = MixingForcing { wind_speed: wind, buoyancy_flux: b, inflow_power: power, carried_energy: 0.0 };
        vertical_mixing(&mut c, &f, &HydroParams::default(), 3600.0).unwrap();
        prop_assert!(stable(&c));
        prop_assert!((c.content(Constituent::Temperature) - heat).abs() <= 1e-10 * heat);
        let p = HydroParams::default();
        prop_assert!(kz_profile(&c, &p).unwrap().iter().all(|&k| k >= 0.0 && k <= p.kz_max * (1.0 + 1e-12)));
    }

    #[test]
    fn kinetics_keep_oxygen_in_range(mut c in column(), wind in 0.0..15.0f64, hours in 1u32..72) {
        let p = OxygenParams::default();
        let sat_max = c.temp.iter().map(|&t| do_saturation(t).unwrap()).fold(0.0, f64::max);
        let start = c.content(Constituent::Oxygen);
        let audit = kinetics_column(&mut c, &p, wind, 3600.0 * f64::from(hours)).unwrap();
        prop_assert!(c.oxygen.iter().all(|&o| o >= 0.0));
        prop_assert!(c.oxygen.iter().all(|&o| o <= sat_max.max(12.0) + 1e-9));
        prop_assert!(c.bod.iter().all(|&x| x >= 0.0));
        let end = c.content(Constituent::Oxygen);
        prop_assert!((end - start - audit.net_oxygen()).abs() <= 1e-9 * start.max(end).max(1.0));
    }
}
