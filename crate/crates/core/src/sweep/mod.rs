//! One- and two-dimensional parameter sweeps over the scattering model.
//!
//! Columns (one per sweep value) are evaluated independently on the rayon
//! pool and collected in order, so results do not depend on thread count.

mod analysis;
mod engine;
mod export;
mod render;
mod spec;

use thiserror::Error;

use crate::model::ModelError;
use crate::scattering::ScatteringError;

pub use analysis::{
    anticrossing_gap, dynamic_range_db, find_exceptional_point, minima_trace, BranchGap,
    MinimaTrace, MinimumEntry, EP_TOL,
};
pub use engine::{
    column_setup, evaluate, run, run_with_threads, sweep_displacement, sweep_field, sweep_phase,
    sweep_ratio, to_db, Provenance, SweepResult, DB_CONVENTION, DB_FLOOR,
};
pub use export::{export, from_json, minima_to_csv, to_csv, to_json, write_text, Format, CSV_HEADER};
pub use render::{render_heatmap, render_lines, LineSeries, Style};
pub use spec::{Observable, Probe, Range, SweepAxis, SweepSpec};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("this operation sweeps {expected}, but the spec sweeps {found}")]
    WrongAxis {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid sweep result: {0}")]
    InvalidResult(String),
    #[error("sweep result is empty")]
    EmptyResult,
    #[error("bracket [{lo}, {hi}] mm does not straddle the exceptional point: {detail}")]
    Bracket { lo: f64, hi: f64, detail: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("render: {0}")]
    Render(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cpa_eigenfrequencies, CavityOverrides, CouplingMap, FeedConfig, SystemParams};
    use crate::scattering::{cpa_feed_conditions, s_matrix, two_feed_output};

    fn pt_base() -> SystemParams {
        SystemParams::new(10024.0, 10024.0, 0.0, 1.75, 1.25, 1.5, 1.5).unwrap()
    }

    fn displacement_spec() -> SweepSpec {
        let base = pt_base();
        SweepSpec::new(
            SweepAxis::Displacement(Range::new(-4.0, 4.0, 0.1)),
            Probe::Grid(Range::around(10024.0, 15.0, 0.02)),
            base,
            cpa_feed_conditions(&base).unwrap(),
            Observable::TotalPower,
        )
    }

    #[test]
    fn columns_match_standalone_evaluation() {
        let spec = displacement_spec();
        let res = sweep_displacement(&spec).unwrap();
        for &c in &[0usize, 17, 40, 63, 80] {
            let (p, feed) = column_setup(&spec, res.sweep_values[c]).unwrap();
            for &r in &[0usize, 333, 750, 1499] {
                let direct = two_feed_output(res.frequencies[r], &p, &feed).unwrap().total_power;
                assert_eq!(res.power[c][r].to_bits(), direct.to_bits());
            }
        }
    }

    #[test]
    fn displacement_overlay_is_cpa_pair() {
        let spec = displacement_spec();
        let res = sweep_displacement(&spec).unwrap();
        for (c, &x) in res.sweep_values.iter().enumerate() {
            let g = 1.3 * x.abs();
            if g >= 1.5 {
                let (hi, lo) = cpa_eigenfrequencies(10024.0, g, 1.5).unwrap();
                assert_eq!(res.overlay[c], vec![lo.re, hi.re]);
            } else {
                assert!(res.overlay[c].is_empty());
            }
        }
        // at x = ±3 mm the branches are 2·sqrt(3.9² - 1.5²) = 7.2 MHz apart
        let c = res.sweep_values.iter().position(|&x| (x + 3.0).abs() < 1e-9).unwrap();
        assert!((res.overlay[c][1] - res.overlay[c][0] - 7.2).abs() < 1e-9);
    }

    #[test]
    fn branch_separation_closes_continuously() {
        let map = CouplingMap::default();
        let mut last = f64::INFINITY;
        for i in 0..4000 {
            let x = 1.5 - 0.0001 * f64::from(i);
            let g = map.slope * x;
            if g < 1.5 {
                break;
            }
            let (hi, lo) = cpa_eigenfrequencies(0.0, g, 1.5).unwrap();
            let sep = hi.re - lo.re;
            assert!(sep <= last);
            last = sep;
        }
        assert!(last < 0.05, "{last}");
    }

    #[test]
    fn displacement_range_is_checked() {
        let mut spec = displacement_spec();
        spec.axis = SweepAxis::Displacement(Range::new(-5.0, 4.0, 0.1));
        assert!(matches!(sweep_displacement(&spec), Err(SweepError::Model(_))));
    }

    #[test]
    fn wrong_axis_is_rejected() {
        let spec = displacement_spec();
        assert!(matches!(sweep_phase(&spec), Err(SweepError::WrongAxis { .. })));
        assert!(matches!(sweep_field(&spec), Err(SweepError::WrongAxis { .. })));
    }

    #[test]
    fn invalid_ranges() {
        let mut spec = displacement_spec();
        spec.probe = Probe::Grid(Range::new(1.0, 0.0, 0.1));
        assert!(matches!(run(&spec), Err(SweepError::InvalidSpec(_))));
        spec.probe = Probe::Grid(Range::new(0.0, 1.0, 0.0));
        assert!(matches!(run(&spec), Err(SweepError::InvalidSpec(_))));
    }

    #[test]
    fn uncoupled_field_sweep_is_a_single_ridge() {
        let base = SystemParams::reference();
        let spec = SweepSpec::new(
            SweepAxis::MagnonFrequency(Range::around(10031.7, 10.0, 1.0)),
            Probe::Grid(Range::around(10031.7, 15.0, 0.02)),
            base,
            FeedConfig::new(0.0, 1.0).unwrap(),
            Observable::S11Power,
        );
        let res = sweep_field(&spec).unwrap();
        assert!(anticrossing_gap(&res).is_none());
        for c in 0..res.sweep_values.len() {
            let col = &res.power[c];
            let imin = (0..col.len()).min_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
            assert!((res.frequencies[imin] - 10031.7).abs() < 0.011);
        }
    }

    #[test]
    fn field_axis_maps_through_kittel_relation() {
        let base = SystemParams::reference().with_coupling(2.0).unwrap();
        let spec = SweepSpec::new(
            SweepAxis::Field(Range::new(358.0, 359.0, 0.5)),
            Probe::Points {
                frequencies: vec![10031.7],
            },
            base,
            FeedConfig::new(0.0, 1.0).unwrap(),
            Observable::S21Power,
        );
        let res = sweep_field(&spec).unwrap();
        let p = base.with_omega_m(28.0 * 358.5).unwrap();
        let direct = s_matrix(10031.7, &p).unwrap().s21.norm_sqr();
        assert_eq!(res.power[1][0], direct);
    }

    #[test]
    fn phase_sweep_samples_in_phase_feed() {
        let base = pt_base();
        let mut spec = SweepSpec::new(
            SweepAxis::Phase(Range::new(-std::f64::consts::PI, std::f64::consts::PI, 0.05)),
            Probe::UpperCpa,
            base,
            cpa_feed_conditions(&base).unwrap(),
            Observable::TotalPower,
        );
        spec.displacement = Some(-3.0);
        let res = sweep_phase(&spec).unwrap();
        assert!(res.sweep_values.contains(&0.0));
        let (range, at) = dynamic_range_db(&res, 0).unwrap();
        assert_eq!(at, 0.0);
        assert!(range > 20.0);
    }

    #[test]
    fn ratio_sweep_minimum_at_port_ratio() {
        let base = pt_base();
        let mut spec = SweepSpec::new(
            SweepAxis::Ratio(Range::new(0.05, 5.0, 0.01)),
            Probe::UpperCpa,
            base,
            cpa_feed_conditions(&base).unwrap(),
            Observable::TotalPower,
        );
        spec.displacement = Some(-3.0);
        let res = sweep_ratio(&spec).unwrap();
        let (_, at) = dynamic_range_db(&res, 0).unwrap();
        assert!((at - 1.75 / 1.25).abs() < 0.011, "{at}");
        spec.axis = SweepAxis::Ratio(Range::new(0.0, 5.0, 0.01));
        assert!(run(&spec).is_err());
    }

    #[test]
    fn minima_trace_shows_phase_transition() {
        let mut spec = displacement_spec();
        spec.overrides = Some(CavityOverrides::reference());
        let res = sweep_displacement(&spec).unwrap();
        let trace = minima_trace(&res).unwrap();
        assert_eq!(trace.entries.len(), res.sweep_values.len());
        let at = |x: f64| {
            trace
                .entries
                .iter()
                .find(|e| (e.sweep_value - x).abs() < 1e-9)
                .unwrap()
        };
        assert!(at(3.0).averaged && at(-3.0).averaged);
        assert!(at(3.0).value_db < -30.0);
        assert!(!at(0.0).averaged);
        assert!(at(0.0).value_db > -15.0 && at(0.0).value_db < -5.0);
    }

    #[test]
    fn minima_trace_of_empty_result() {
        let mut res = sweep_displacement(&displacement_spec()).unwrap();
        res.sweep_values.clear();
        assert!(matches!(minima_trace(&res), Err(SweepError::EmptyResult)));
    }

    #[test]
    fn exceptional_point_by_bisection() {
        let base = pt_base();
        let map = CouplingMap::default();
        let x = find_exceptional_point(&base, &map, (0.0, 4.0)).unwrap();
        assert!((x - 1.5 / 1.3).abs() < 1e-6);
        assert!((1.3 * x - 1.5).abs() < 1e-5);
        let xn = find_exceptional_point(&base, &map, (-4.0, 0.0)).unwrap();
        assert!((xn + 1.5 / 1.3).abs() < 1e-6);
        let unit = CouplingMap::new(1.5, 4.0).unwrap();
        assert!((find_exceptional_point(&base, &unit, (0.0, 4.0)).unwrap() - 1.0).abs() < 1e-6);
        assert!(matches!(
            find_exceptional_point(&base, &map, (2.0, 4.0)),
            Err(SweepError::Bracket { .. })
        ));
        assert!(find_exceptional_point(&base, &map, (0.0, 6.0)).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let res = sweep_displacement(&displacement_spec()).unwrap();
        let back = from_json(&to_json(&res).unwrap()).unwrap();
        assert_eq!(back, res);
        for (a, b) in back.power.iter().flatten().zip(res.power.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_layout() {
        let mut spec = displacement_spec();
        spec.axis = SweepAxis::Displacement(Range::new(-3.0, -2.9, 0.1));
        spec.probe = Probe::Points {
            frequencies: vec![10020.0, 10027.6],
        };
        let res = run(&spec).unwrap();
        let csv = to_csv(&res);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# power_dB"));
        assert_eq!(lines[1], CSV_HEADER);
        assert_eq!(lines.len(), 2 + 4);
        assert!(lines[2].starts_with("x_mm,-3,10020,"));
    }

    #[test]
    fn heatmap_without_overlay() {
        let base = SystemParams::reference();
        let spec = SweepSpec::new(
            SweepAxis::MagnonFrequency(Range::around(10031.7, 5.0, 1.0)),
            Probe::Grid(Range::around(10031.7, 5.0, 0.5)),
            base,
            FeedConfig::new(0.0, 1.0).unwrap(),
            Observable::S21Power,
        );
        let mut res = run(&spec).unwrap();
        for o in &mut res.overlay {
            o.clear();
        }
        let svg = render_heatmap(&res, &Style::default()).unwrap();
        assert!(svg.contains("data:image/png;base64,"));
        assert!(!svg.contains("<circle"));
        assert!(!svg.contains("http://") || svg.matches("http://").count() == 1);
    }

    #[test]
    fn export_to_unwritable_path_fails() {
        let res = sweep_displacement(&displacement_spec()).unwrap();
        let err = export(&res, Format::Csv, std::path::Path::new("/nonexistent/dir/x.csv")).unwrap_err();
        assert!(matches!(err, SweepError::Io { .. }));
    }
}
