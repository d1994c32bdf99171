use chrono::NaiveDate;

use super::TransportParams;
use crate::geo::{distance_deg, EARTH_RADIUS_KM, KM_PER_DEGREE};
use crate::grid::{Cell, GridSpec};

/// Position of a streamline at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceState {
    pub sender: Cell,
    pub start_day: NaiveDate,
    pub t: usize,
    pub lon: f64,
    pub lat: f64,
    pub rad: f64,
    /// Interpolated current at the position, m/s.
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepScore {
    pub sender: Cell,
    pub receiver: Cell,
    pub start_day: NaiveDate,
    pub t: usize,
    pub value: f64,
}

impl StepScore {
    pub fn arrival_day(&self) -> NaiveDate {
        self.start_day + chrono::Days::new(self.t as u64)
    }
}

/// Wraps a longitude difference into (-180, 180].
pub fn wrap_lon(d: f64) -> f64 {
    let w = (d + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

/// Score of a receiver at (lon, lat) against a trace state.
pub fn score_at(state: &TraceState, lon: f64, lat: f64, params: &TransportParams) -> f64 {
    let dist = distance_deg(state.lon, state.lat, lon, lat);
    if dist > state.rad {
        return 0.0;
    }
    let speed = state.u.hypot(state.v);
    let theta = if speed == 0.0 {
        if dist != 0.0 {
            return 0.0;
        }
        0.0
    } else {
        let lx = wrap_lon(lon - state.lon);
        let ly = lat - state.lat;
        let cross = state.u * ly - state.v * lx;
        let dot = state.u * lx + state.v * ly;
        if cross.abs().atan2(dot) > params.theta_cutoff {
            return 0.0;
        }
        cross.abs() / speed
    };
    (-params.alpha * state.rad - params.beta * theta - params.gamma * dist).exp()
}

pub fn score_step(
    state: &TraceState,
    spec: &GridSpec,
    receiver: Cell,
    params: &TransportParams,
) -> StepScore {
    let (lon, lat) = spec.center(receiver);
    StepScore {
        sender: state.sender,
        receiver,
        start_day: state.start_day,
        t: state.t,
        value: score_at(state, lon, lat, params),
    }
}

/// Receiver cells bucketed by grid row for disk queries.
#[derive(Debug, Clone)]
pub struct ReceiverIndex {
    spec: GridSpec,
    // (row latitude, cells sorted by longitude with their longitudes)
    rows: Vec<(f64, Vec<(f64, Cell)>)>,
    len: usize,
}

impl ReceiverIndex {
    pub fn new(spec: GridSpec, receivers: &[Cell]) -> Self {
        let mut by_row: Vec<Vec<(f64, Cell)>> = vec![Vec::new(); spec.nlat];
        for &c in receivers {
            let (ilon, ilat) = spec.indices(c);
            by_row[ilat].push((spec.lon_of(ilon), c));
        }
        let mut len = 0;
        let rows = by_row
            .into_iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .map(|(ilat, mut r)| {
                r.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                r.dedup_by_key(|e| e.1);
                len += r.len();
                (spec.lat_of(ilat), r)
            })
            .collect();
        ReceiverIndex { spec, rows, len }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out: Vec<Cell> = self
            .rows
            .iter()
            .flat_map(|(_, r)| r.iter().map(|e| e.1))
            .collect();
        out.sort();
        out
    }

    /// Receivers whose center lies within `rad` equivalent degrees of (lon, lat),
    /// in ascending cell order.
    pub fn within(&self, lon: f64, lat: f64, rad: f64) -> Vec<Cell> {
        let mut out = Vec::new();
        let rad_rad = (rad * KM_PER_DEGREE / EARTH_RADIUS_KM).min(std::f64::consts::PI);
        let hav_r = (rad_rad / 2.0).sin().powi(2);
        // a small slack keeps the prefilter conservative; the exact test follows
        let slack = 1e-9;
        let lo = self.rows.partition_point(|(rl, _)| *rl < lat - rad - slack);
        for (row_lat, cells) in &self.rows[lo..] {
            if *row_lat > lat + rad + slack {
                break;
            }
            let cos_prod = lat.to_radians().cos() * row_lat.to_radians().cos();
            let dlon_max = if cos_prod <= 0.0 || hav_r >= cos_prod {
                180.0
            } else {
                (2.0 * (hav_r / cos_prod).sqrt().min(1.0).asin()).to_degrees() + slack
            };
            for shift in [-360.0, 0.0, 360.0] {
                let centre = lon + shift;
                let a = cells.partition_point(|e| e.0 < centre - dlon_max);
                for &(clon, cell) in &cells[a..] {
                    if clon > centre + dlon_max {
                        break;
                    }
                    if distance_deg(lon, lat, clon, *row_lat) <= rad {
                        out.push(cell);
                    }
                }
                if dlon_max >= 180.0 {
                    break;
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Mask;
    use proptest::prelude::*;

    fn state(lon: f64, lat: f64, u: f64, v: f64, t: usize) -> TraceState {
        let p = TransportParams::default();
        TraceState {
            sender: Cell(0),
            start_day: NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(),
            t,
            lon,
            lat,
            rad: p.radius(t),
            u,
            v,
        }
    }

    #[test]
    fn colocated_receiver_at_step_zero() {
        let p = TransportParams::default();
        let s = score_at(&state(10.0, 5.0, 0.3, -0.2, 0), 10.0, 5.0, &p);
        assert!((s - 0.449_328_964_117_221_6).abs() < 1e-15);
        assert!((s - (-0.8f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn radius_and_angle_cutoffs() {
        let p = TransportParams::default();
        let st = state(0.0, 0.0, 1.0, 0.0, 0);
        // just inside and just outside the one-degree disk, straight downstream
        assert!(score_at(&st, 0.999_999, 0.0, &p) > 0.0);
        assert_eq!(score_at(&st, 1.000_001, 0.0, &p), 0.0);
        // perpendicular and upstream receivers
        assert_eq!(score_at(&st, 0.0, 0.5, &p), 0.0);
        assert_eq!(score_at(&st, -0.5, 0.0, &p), 0.0);
        // angle 0.39 passes, 0.41 fails
        let r = 0.5;
        assert!(score_at(&st, r * 0.39f64.cos(), r * 0.39f64.sin(), &p) > 0.0);
        assert_eq!(score_at(&st, r * 0.41f64.cos(), r * 0.41f64.sin(), &p), 0.0);
    }

    #[test]
    fn exponent_terms_match_hand_evaluation() {
        let p = TransportParams::default();
        let st = state(0.0, 0.0, 0.6, 0.8, 4);
        let (lon, lat) = (0.3, 0.5);
        let dist = distance_deg(0.0, 0.0, lon, lat);
        let theta = (0.8 * lon - 0.6 * lat).abs();
        let expected = (-0.8 * 1.2 - 0.49 * theta - 0.23 * dist).exp();
        assert!((score_at(&st, lon, lat, &p) - expected).abs() < 1e-14);
    }

    #[test]
    fn still_water_scores_only_the_colocated_receiver() {
        let p = TransportParams::default();
        let st = state(1.0, 1.0, 0.0, 0.0, 10);
        assert_eq!(score_at(&st, 1.0, 1.0, &p), (-0.8f64 * 1.5).exp());
        assert_eq!(score_at(&st, 1.25, 1.0, &p), 0.0);
    }

    #[test]
    fn each_step_multiplies_by_the_radius_factor() {
        let p = TransportParams::default();
        let a = score_at(&state(0.0, 0.0, 1.0, 0.2, 7), 0.4, 0.05, &p);
        let b = score_at(&state(0.0, 0.0, 1.0, 0.2, 8), 0.4, 0.05, &p);
        assert!((b / a - (-0.8f64 * 0.05).exp()).abs() < 1e-14);
    }

    #[test]
    fn half_turn_about_the_equator_is_an_exact_symmetry() {
        let p = TransportParams::default();
        let st = state(0.0, 0.0, 0.7, 0.3, 2);
        let flipped = state(0.0, 0.0, -0.7, -0.3, 2);
        for (lon, lat) in [(0.5, 0.1), (0.8, 0.4), (0.2, -0.05), (1.0, 0.2)] {
            assert_eq!(
                score_at(&st, lon, lat, &p),
                score_at(&flipped, -lon, -lat, &p)
            );
        }
    }

    #[test]
    fn quarter_turn_near_the_equator_permutes_scores() {
        let p = TransportParams::default();
        let st = state(0.0, 0.0, 0.7, 0.3, 2);
        let rot = state(0.0, 0.0, -0.3, 0.7, 2);
        for (lon, lat) in [(0.05, 0.01), (0.04, 0.02), (0.08, 0.02)] {
            let a = score_at(&st, lon, lat, &p);
            let b = score_at(&rot, -lat, lon, &p);
            // haversine is isotropic only to second order off the equator
            assert!(a > 0.0 && ((a - b) / a).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn wrap_lon_range() {
        assert_eq!(wrap_lon(190.0), -170.0);
        assert_eq!(wrap_lon(-180.0), 180.0);
        assert_eq!(wrap_lon(10.0), 10.0);
    }

    proptest! {
        #[test]
        fn score_is_bounded(
            lon in -2.0f64..2.0, lat in -2.0f64..2.0,
            u in -2.0f64..2.0, v in -2.0f64..2.0, t in 0usize..90,
        ) {
            let p = TransportParams::default();
            let s = score_at(&state(0.0, 0.0, u, v, t), lon, lat, &p);
            prop_assert!((0.0..=(-0.8f64).exp()).contains(&s));
        }

        #[test]
        fn index_equals_full_scan(
            bits in proptest::collection::vec(any::<bool>(), 30 * 24),
            lon in -1.0f64..9.0, lat in -7.0f64..2.0, rad in 0.0f64..5.0,
        ) {
            let spec = GridSpec::new(0.0, -6.0, 0.25, 0.25, 30, 24).unwrap();
            let mask = Mask::new(spec, bits).unwrap();
            let cells = mask.ocean_cells();
            let idx = ReceiverIndex::new(spec, &cells);
            let scan: Vec<Cell> = cells.iter().copied().filter(|&c| {
                let (clon, clat) = spec.center(c);
                distance_deg(lon, lat, clon, clat) <= rad
            }).collect();
            prop_assert_eq!(idx.within(lon, lat, rad), scan);
        }
    }

    #[test]
    fn index_handles_dateline_wrap() {
        let spec = GridSpec::new(-180.0, 0.0, 1.0, 1.0, 360, 3).unwrap();
        let cells: Vec<Cell> = spec.cells().collect();
        let idx = ReceiverIndex::new(spec, &cells);
        let got = idx.within(179.5, 1.0, 1.2);
        let scan: Vec<Cell> = cells
            .iter()
            .copied()
            .filter(|&c| {
                let (clon, clat) = spec.center(c);
                distance_deg(179.5, 1.0, clon, clat) <= 1.2
            })
            .collect();
        assert_eq!(got, scan);
        assert!(got.contains(&spec.cell(0, 1)));
    }
}
