//! Random Waypoint kinematics: pause, pick a destination, move at a chosen
//! speed, repeat.
//!
//! Mobility is evaluated lazily: a node's position at any time is computed on
//! demand from its current leg, and arrival events are scheduled exactly, so
//! no per-tick position updates exist.

use crate::engine::{RngStream, SimTime};
use crate::geometry::{distance, Position};
use crate::ids::NodeId;

/// Area bounds and Random Waypoint parameters.
///
/// Speeds are meters/second; scenario presets set `speed_min == speed_max` to
/// the fixed table speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityParams {
    pub area_w: f64,
    pub area_h: f64,
    pub pause_s: f64,
    pub speed_min: f64,
    pub speed_max: f64,
}

impl MobilityParams {
    pub fn validate(&self) {
        assert!(self.area_w > 0.0 && self.area_h > 0.0);
        assert!(0.0 <= self.speed_min && self.speed_min <= self.speed_max);
        assert!(self.pause_s >= 0.0);
    }
}

/// One node's current leg: paused at `anchor_pos` until `move_start`, then
/// moving in a straight line toward `dest` at `speed`.
#[derive(Debug, Clone, Copy)]
pub struct WaypointState {
    pub node: NodeId,
    pub anchor_pos: Position,
    pub anchor_time: SimTime,
    pub move_start: SimTime,
    pub dest: Position,
    pub speed: f64,
}

impl WaypointState {
    /// A node that never moves (zero-speed leg anchored forever).
    pub fn stationary(node: NodeId, pos: Position, now: SimTime) -> Self {
        WaypointState {
            node,
            anchor_pos: pos,
            anchor_time: now,
            move_start: now,
            dest: pos,
            speed: 0.0,
        }
    }

    pub fn is_paused_at(&self, t: SimTime) -> bool {
        t < self.move_start
    }

    /// When this leg reaches `dest`, or `None` for a leg that never arrives
    /// (zero speed).
    pub fn arrival_time(&self) -> Option<SimTime> {
        let d = distance(self.anchor_pos, self.dest);
        if d == 0.0 {
            return Some(self.move_start);
        }
        if self.speed <= 0.0 {
            return None;
        }
        Some(self.move_start.offset(d / self.speed))
    }

    /// Position at time `t >= anchor_time`: the anchor while paused, linear
    /// interpolation toward `dest` afterwards, clamped at arrival.
    pub fn position_at(&self, t: SimTime) -> Position {
        debug_assert!(t >= self.anchor_time);
        if t <= self.move_start {
            return self.anchor_pos;
        }
        let d = distance(self.anchor_pos, self.dest);
        if d == 0.0 || self.speed <= 0.0 {
            return self.anchor_pos;
        }
        let frac = (self.speed * (t.seconds() - self.move_start.seconds()) / d).min(1.0);
        Position::new(
            self.anchor_pos.x + frac * (self.dest.x - self.anchor_pos.x),
            self.anchor_pos.y + frac * (self.dest.y - self.anchor_pos.y),
        )
    }
}

/// `n` independent uniform positions over the area.
pub fn init_positions(n: usize, params: &MobilityParams, rng: &mut RngStream) -> Vec<Position> {
    assert!(n >= 1);
    (0..n)
        .map(|_| {
            Position::new(
                rng.uniform(0.0, params.area_w),
                rng.uniform(0.0, params.area_h),
            )
        })
        .collect()
}

/// Next leg for a node that arrived at `arrived_at` at time `now`: pause,
/// then move toward a fresh uniform waypoint at a speed drawn from
/// `[speed_min, speed_max]` (degenerate to the fixed value when equal).
pub fn next_leg(
    node: NodeId,
    arrived_at: Position,
    now: SimTime,
    params: &MobilityParams,
    rng: &mut RngStream,
) -> WaypointState {
    let dest = Position::new(
        rng.uniform(0.0, params.area_w),
        rng.uniform(0.0, params.area_h),
    );
    let speed = rng.uniform(params.speed_min, params.speed_max);
    WaypointState {
        node,
        anchor_pos: arrived_at,
        anchor_time: now,
        move_start: now.offset(params.pause_s),
        dest,
        speed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pause: f64, speed: f64) -> MobilityParams {
        MobilityParams {
            area_w: 500.0,
            area_h: 500.0,
            pause_s: pause,
            speed_min: speed,
            speed_max: speed,
        }
    }

    #[test]
    fn init_positions_in_bounds() {
        let mut rng = RngStream::new(1, "mobility");
        let ps = init_positions(1, &params(0.0, 20.0), &mut rng);
        assert!(ps[0].x >= 0.0 && ps[0].x <= 500.0);
        assert!(ps[0].y >= 0.0 && ps[0].y <= 500.0);
    }

    #[test]
    fn init_positions_deterministic_per_seed() {
        let mut a = RngStream::new(42, "mobility");
        let mut b = RngStream::new(42, "mobility");
        let pa = init_positions(50, &params(0.0, 20.0), &mut a);
        let pb = init_positions(50, &params(0.0, 20.0), &mut b);
        assert_eq!(pa, pb);
    }

    #[test]
    fn init_positions_mean_near_center() {
        // Statistical oracle: direct sample mean of 1e4 draws.
        let mut rng = RngStream::new(5, "mobility");
        let ps = init_positions(10_000, &params(0.0, 20.0), &mut rng);
        let mean_x: f64 = ps.iter().map(|p| p.x).sum::<f64>() / ps.len() as f64;
        assert!((mean_x - 250.0).abs() < 5.0, "mean x = {mean_x}");
    }

    #[test]
    fn zero_pause_resumes_immediately() {
        let mut rng = RngStream::new(2, "mobility");
        let leg = next_leg(
            NodeId(0),
            Position::new(10.0, 10.0),
            SimTime::new(7.0),
            &params(0.0, 20.0),
            &mut rng,
        );
        assert_eq!(leg.move_start, SimTime::new(7.0));
        assert!(!leg.is_paused_at(SimTime::new(7.0)));
    }

    #[test]
    fn fixed_speed_range_gives_exact_speed() {
        let mut rng = RngStream::new(3, "mobility");
        for _ in 0..100 {
            let leg = next_leg(
                NodeId(0),
                Position::new(0.0, 0.0),
                SimTime::ZERO,
                &params(0.0, 20.0),
                &mut rng,
            );
            assert_eq!(leg.speed, 20.0);
        }
    }

    #[test]
    fn waypoints_stay_in_area_over_many_legs() {
        let mut rng = RngStream::new(4, "mobility");
        let p = params(1.0, 20.0);
        let mut pos = Position::new(250.0, 250.0);
        let mut now = SimTime::ZERO;
        for _ in 0..1000 {
            let leg = next_leg(NodeId(0), pos, now, &p, &mut rng);
            assert!(leg.dest.x >= 0.0 && leg.dest.x <= 500.0);
            assert!(leg.dest.y >= 0.0 && leg.dest.y <= 500.0);
            now = leg.arrival_time().unwrap();
            pos = leg.dest;
        }
    }

    #[test]
    fn position_at_anchor_time_is_anchor() {
        let leg = WaypointState {
            node: NodeId(0),
            anchor_pos: Position::new(3.0, 4.0),
            anchor_time: SimTime::new(1.0),
            move_start: SimTime::new(2.0),
            dest: Position::new(100.0, 4.0),
            speed: 10.0,
        };
        assert_eq!(leg.position_at(SimTime::new(1.0)), leg.anchor_pos);
        assert_eq!(leg.position_at(SimTime::new(1.5)), leg.anchor_pos);
    }

    #[test]
    fn position_interpolates_linearly() {
        let leg = WaypointState {
            node: NodeId(0),
            anchor_pos: Position::new(0.0, 0.0),
            anchor_time: SimTime::ZERO,
            move_start: SimTime::ZERO,
            dest: Position::new(100.0, 0.0),
            speed: 20.0,
        };
        let p = leg.position_at(SimTime::new(2.5));
        assert_eq!(p, Position::new(50.0, 0.0));
    }

    #[test]
    fn position_clamps_at_destination() {
        let leg = WaypointState {
            node: NodeId(0),
            anchor_pos: Position::new(0.0, 0.0),
            anchor_time: SimTime::ZERO,
            move_start: SimTime::ZERO,
            dest: Position::new(100.0, 0.0),
            speed: 20.0,
        };
        assert_eq!(leg.position_at(SimTime::new(50.0)), leg.dest);
        assert_eq!(leg.arrival_time(), Some(SimTime::new(5.0)));
    }

    #[test]
    fn trajectory_is_lipschitz_and_in_bounds() {
        let p = params(0.5, 30.0);
        let mut rng = RngStream::new(6, "mobility");
        let mut pos = Position::new(100.0, 100.0);
        let mut now = SimTime::ZERO;
        for _ in 0..50 {
            let leg = next_leg(NodeId(0), pos, now, &p, &mut rng);
            let end = leg.arrival_time().unwrap();
            let mut t = now;
            let mut prev = leg.position_at(t);
            while t < end {
                let t2 = SimTime::new((t.seconds() + 0.1).min(end.seconds()));
                let cur = leg.position_at(t2);
                let dt = t2.seconds() - t.seconds();
                assert!(
                    distance(prev, cur) <= p.speed_max * dt + 1e-9,
                    "teleport detected"
                );
                assert!(cur.x >= 0.0 && cur.x <= 500.0 && cur.y >= 0.0 && cur.y <= 500.0);
                prev = cur;
                t = t2;
            }
            pos = leg.dest;
            now = end;
        }
    }
}
