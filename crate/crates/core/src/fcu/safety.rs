use super::{road_col, FcuError, RiskSet};
use crate::mdp::{CellId, GridGeometry, HighLevelAction};
use crate::vehicle::{EgoState, ReferenceTrajectory};

/// Timing and speed inputs of the override maneuver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyTiming {
    pub t_now: f64,
    pub speed: f64,
    pub tau_env: f64,
    pub tau_safe: f64,
}

/// Override reference for `tau_safe` seconds.
///
/// Keeps the current ordinate when the cell one step ahead on the ego row is
/// clear. Otherwise shifts one row toward whichever clear neighbor has fewer
/// risky cells over the override distance, preferring the upper row on a
/// tie. Ordinates are clamped into the lane rows.
pub fn safety_mode(
    ego: &EgoState,
    risk: &RiskSet,
    g: &GridGeometry,
    timing: SafetyTiming,
) -> Result<ReferenceTrajectory, FcuError> {
    let SafetyTiming {
        t_now,
        speed,
        tau_env,
        tau_safe,
    } = timing;
    let (lo_row, hi_row) = g.lane_row_bounds();
    let (y_lo, y_hi) = g.lane_y_bounds();
    let row = g.row_at_clamped(ego.y).clamp(lo_row, hi_row);
    let ahead = road_col(g, ego.x + speed * tau_env).unwrap_or(0);
    let span = (speed * tau_safe / g.cell_length()).ceil() as usize;
    let y_now = ego.y.clamp(y_lo, y_hi);

    if !risk.contains(1, CellId::new(row, ahead)) {
        return ReferenceTrajectory::constant(t_now, ego.x, speed, y_now, tau_safe).map_err(FcuError::from);
    }

    let shifted = [HighLevelAction::Sec1, HighLevelAction::Sec3]
        .into_iter()
        .filter_map(|a| row.checked_add_signed(a.lateral_offset()))
        .filter(|r| (lo_row..=hi_row).contains(r))
        .filter(|&r| !risk.contains(1, CellId::new(r, ahead)))
        .min_by_key(|&r| risk.count_in_row(1, r, ahead..=ahead + span));
    let Some(target) = shifted else {
        return Err(FcuError::NoSafeOverride {
            cell: CellId::new(row, ahead),
        });
    };
    let knots = ((tau_safe / tau_env).ceil() as usize + 1).max(2);
    let mut ys = vec![g.row_center_y(target); knots];
    ys[0] = y_now;
    ReferenceTrajectory::new(t_now, ego.x, speed, tau_env, ys).map_err(FcuError::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_grid, LaneLayout};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn highway() -> GridGeometry {
        build_grid(11, 39, 2.0, 3.5, &LaneLayout::uniform(3, 3)).unwrap()
    }

    const TIMING: SafetyTiming = SafetyTiming {
        t_now: 4.0,
        speed: 16.75,
        tau_env: 0.2,
        tau_safe: 0.2,
    };

    fn ego_at(g: &GridGeometry, row: usize) -> EgoState {
        EgoState::initial(10.0, g.row_center_y(row))
    }

    fn risk_of(cells: &[(usize, usize)]) -> RiskSet {
        RiskSet::invariant(cells.iter().map(|&(r, c)| CellId::new(r, c)).collect::<BTreeSet<_>>())
    }

    /// Road column one step ahead of the test ego.
    fn ahead(g: &GridGeometry) -> usize {
        road_col(g, 10.0 + 16.75 * 0.2).unwrap()
    }

    #[test]
    fn clear_road_keeps_lane() {
        let g = highway();
        let r = safety_mode(&ego_at(&g, 5), &RiskSet::empty(), &g, TIMING).unwrap();
        for (_, _, y) in r.sample(1e-2) {
            assert_eq!(y, g.row_center_y(5));
        }
        assert!((r.end_time() - 4.2).abs() < 1e-12);
    }

    #[test]
    fn blocked_ahead_shifts_up_when_clear() {
        let g = highway();
        let a = ahead(&g);
        let r = safety_mode(&ego_at(&g, 5), &risk_of(&[(5, a), (4, a + 1)]), &g, TIMING).unwrap();
        assert_eq!(*r.ordinates().last().unwrap(), g.row_center_y(6));
    }

    #[test]
    fn blocked_ahead_picks_the_quieter_neighbor() {
        let g = highway();
        let a = ahead(&g);
        let r = safety_mode(&ego_at(&g, 5), &risk_of(&[(5, a), (6, a + 1)]), &g, TIMING).unwrap();
        assert_eq!(*r.ordinates().last().unwrap(), g.row_center_y(4));
    }

    #[test]
    fn all_blocked_is_reported() {
        let g = highway();
        let a = ahead(&g);
        let err = safety_mode(&ego_at(&g, 5), &risk_of(&[(4, a), (5, a), (6, a)]), &g, TIMING).unwrap_err();
        assert_eq!(err, FcuError::NoSafeOverride { cell: CellId::new(5, a) });
    }

    #[test]
    fn never_leaves_the_lanes() {
        let g = highway();
        let a = ahead(&g);
        // Row 1 blocked ahead; the only neighbor inside the lanes is row 2.
        let r = safety_mode(&ego_at(&g, 1), &risk_of(&[(1, a)]), &g, TIMING).unwrap();
        assert_eq!(*r.ordinates().last().unwrap(), g.row_center_y(2));
        let err = safety_mode(&ego_at(&g, 1), &risk_of(&[(1, a), (2, a)]), &g, TIMING);
        assert!(err.is_err());
    }

    proptest! {
        #[test]
        fn ordinates_stay_in_lane_bounds(
            y in -11.0f64..11.0,
            cells in proptest::collection::vec((0usize..11, 0usize..8), 0..20),
        ) {
            let g = highway();
            let (lo, hi) = g.lane_y_bounds();
            let ego = EgoState::initial(10.0, y);
            if let Ok(r) = safety_mode(&ego, &risk_of(&cells), &g, TIMING) {
                for (_, _, yr) in r.sample(1e-3) {
                    prop_assert!(yr >= lo && yr <= hi, "{yr}");
                }
            }
        }
    }
}
