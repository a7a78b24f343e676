//! The replanning loop: validate the current trajectory each tick and, when
//! a moving obstacle breaks it, prune the risk region, repair the tree at
//! hot-spots, optimize with the rewiring cascade, extract a fresh
//! trajectory, and reintegrate the pruned structure.

use crate::geometry::Point2;
use crate::pruning::{compute_risk, first_violation, prune, ObstacleState, RiskParams};
use crate::repair::{best_entry, repair, RepairOutcome, RepairParams};
use crate::tree::{build_initial_tree, reintegrate, rewire_cascade, Forest, NodeId, TreeError};
use crate::world::{CellIndex, StaticMap};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("start ({0}, {1}) is outside the workspace")]
    StartOutsideWorkspace(f64, f64),
    #[error("start isolated: no feasible edge from the start into the tree")]
    StartIsolated,
}

/// Planner parameters (defaults follow the evaluation setup: 0.8 s reaction
/// horizon, 0.4 s obstacle horizon, 0.5 m robot radius, 4 m/s speed, 1 m
/// cells).
#[derive(Debug, Clone)]
pub struct PlannerConfig {
    pub t_rh: f64,
    pub t_oh: f64,
    pub r_robot: f64,
    pub v_robot: f64,
    pub cell_size: f64,
    /// Repair window bound; `None` lets the window grow to cover the tiling.
    pub l_max: Option<usize>,
    pub connect_radius: f64,
    pub rrt_samples: usize,
    pub rrt_step: f64,
    /// LRZ floor so a stopped robot keeps validating.
    pub r_min: f64,
    pub fallback_cap: usize,
    /// Simulated seconds charged per replanning episode.
    pub replan_charge: f64,
    pub seed: u64,
}

impl PlannerConfig {
    pub fn for_cell_size(cell_size: f64) -> Self {
        Self {
            t_rh: 0.8,
            t_oh: 0.4,
            r_robot: 0.5,
            v_robot: 4.0,
            cell_size,
            l_max: None,
            connect_radius: 1.5 * cell_size,
            rrt_samples: 3000,
            rrt_step: cell_size,
            r_min: cell_size,
            fallback_cap: 2000,
            replan_charge: 0.03,
            seed: 0,
        }
    }

    pub fn risk_params(&self) -> RiskParams {
        RiskParams {
            t_rh: self.t_rh,
            t_oh: self.t_oh,
            r_robot: self.r_robot,
            r_min: self.r_min,
        }
    }

    pub fn repair_params(&self) -> RepairParams {
        RepairParams {
            l_max: self.l_max,
            connect_radius: self.connect_radius,
            fallback_cap: self.fallback_cap,
        }
    }
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self::for_cell_size(1.0)
    }
}

/// Time-embedded path: piecewise-straight waypoints traversed at constant
/// speed. The head waypoint is the robot position at creation; the tail is
/// the goal. Waypoints extracted from the tree carry their node id.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<Point2>,
    pub node_ids: Vec<Option<NodeId>>,
    pub segment_times: Vec<f64>,
    pub start_time: f64,
}

impl Trajectory {
    pub fn total_time(&self) -> f64 {
        self.segment_times.iter().sum()
    }

    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| w[0].distance(w[1]))
            .sum()
    }

    /// Move `dist` along the trajectory from `pos`, `next` being the index of
    /// the waypoint ahead. Returns the new position, the new index, and
    /// whether the tail was reached.
    pub fn advance(&self, pos: Point2, next: usize, dist: f64) -> (Point2, usize, bool) {
        let mut p = pos;
        let mut i = next;
        let mut budget = dist;
        while i < self.waypoints.len() {
            let target = self.waypoints[i];
            let d = p.distance(target);
            if d <= budget {
                p = target;
                i += 1;
                budget -= d;
            } else {
                p = Point2::new(
                    p.x + (target.x - p.x) * budget / d,
                    p.y + (target.y - p.y) * budget / d,
                );
                break;
            }
        }
        (p, i, i >= self.waypoints.len())
    }
}

fn time_embed(
    waypoints: Vec<Point2>,
    node_ids: Vec<Option<NodeId>>,
    v: f64,
    start_time: f64,
) -> Trajectory {
    let segment_times = waypoints
        .windows(2)
        .map(|w| w[0].distance(w[1]) / v)
        .collect();
    Trajectory {
        waypoints,
        node_ids,
        segment_times,
        start_time,
    }
}

/// Build the initial tree and the initial trajectory: the start connects to
/// its nearest statically-reachable tree node, then follows parent links to
/// the goal.
pub fn plan_initial(
    map: &StaticMap,
    start: Point2,
    goal: Point2,
    cfg: &PlannerConfig,
) -> Result<(Forest, Trajectory), PlanError> {
    if !map.tiling().contains(start) {
        return Err(PlanError::StartOutsideWorkspace(start.x, start.y));
    }
    let forest = build_initial_tree(map, goal, cfg.rrt_samples, cfg.rrt_step, cfg.seed)?;
    if start == goal {
        let traj = Trajectory {
            waypoints: vec![start],
            node_ids: vec![Some(forest.goal_root())],
            segment_times: vec![],
            start_time: 0.0,
        };
        return Ok((forest, traj));
    }
    // nearest node with a feasible straight edge from the start
    let mut by_distance: Vec<(f64, NodeId)> = forest
        .active_ids()
        .map(|id| (start.distance(forest.position(id)), id))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let entry = by_distance
        .iter()
        .find(|(_, id)| crate::world::edge_feasible(map, &[], start, forest.position(*id)))
        .map(|(_, id)| *id)
        .ok_or(PlanError::StartIsolated)?;
    let traj = extract_trajectory(&forest, start, entry, cfg.v_robot, 0.0);
    Ok((forest, traj))
}

fn extract_trajectory(
    forest: &Forest,
    from: Point2,
    entry: NodeId,
    v: f64,
    start_time: f64,
) -> Trajectory {
    let mut waypoints = vec![from];
    let mut node_ids = vec![None];
    let mut cursor = Some(entry);
    while let Some(id) = cursor {
        waypoints.push(forest.position(id));
        node_ids.push(Some(id));
        cursor = forest.parent(id);
    }
    time_embed(waypoints, node_ids, v, start_time)
}

/// Result of one planning tick.
#[derive(Debug, Clone)]
pub enum TickOutcome {
    /// Current trajectory is still valid.
    Kept,
    /// Path was invalid; a new trajectory was produced.
    Replanned {
        trajectory: Trajectory,
        /// Measured wall-clock time of prune + repair + optimize + path
        /// search (not part of the deterministic simulation state).
        wall: Duration,
        /// Simulated seconds charged for this episode.
        charged: f64,
        final_l: usize,
        fallback_used: bool,
    },
    /// Repair could not reach the goal tree; the robot holds this tick.
    Failed { wall: Duration },
}

/// One planner instance driving one forest.
pub struct Planner {
    pub cfg: PlannerConfig,
    pub forest: Forest,
    pub trajectory: Option<Trajectory>,
    goal: Point2,
    rng: ChaCha8Rng,
}

impl Planner {
    pub fn new(map: &StaticMap, start: Point2, goal: Point2, cfg: PlannerConfig) -> Result<(Self, Trajectory), PlanError> {
        let (forest, traj) = plan_initial(map, start, goal, &cfg)?;
        // distinct stream from the one used to build the tree
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        Ok((
            Self {
                cfg,
                forest,
                trajectory: Some(traj.clone()),
                goal,
                rng,
            },
            traj,
        ))
    }

    pub fn goal(&self) -> Point2 {
        self.goal
    }

    /// One validate-or-replan step. `next_waypoint` indexes the waypoint the
    /// robot is currently moving toward on the held trajectory.
    pub fn tick(
        &mut self,
        map: &StaticMap,
        clock: f64,
        cobot_pos: Point2,
        cobot_speed: f64,
        obstacles: &[ObstacleState],
        next_waypoint: usize,
    ) -> TickOutcome {
        let risk = compute_risk(cobot_pos, cobot_speed, obstacles, &self.cfg.risk_params());
        // remaining polyline: the robot position followed by the waypoints ahead
        let (polyline, node_tail): (Vec<Point2>, Vec<Option<NodeId>>) = match &self.trajectory {
            Some(t) => {
                let mut pts = vec![cobot_pos];
                let mut ids = vec![None];
                pts.extend_from_slice(&t.waypoints[next_waypoint.min(t.waypoints.len())..]);
                ids.extend_from_slice(&t.node_ids[next_waypoint.min(t.node_ids.len())..]);
                (pts, ids)
            }
            None => (Vec::new(), Vec::new()),
        };

        let violation = if polyline.is_empty() {
            None // no trajectory: forced replan below
        } else {
            match first_violation(&polyline, &risk) {
                None => return TickOutcome::Kept,
                v => v,
            }
        };

        let started = Instant::now();
        // CPR: danger set, widened by the hazards that actually invalidated
        // the path in case they sit beyond the reaction zone
        let mut cpr = risk.cpr.clone();
        if let Some(v) = &violation {
            if cpr.is_empty() {
                for id in &v.obstacle_ids {
                    if let Some((_, d)) = risk.hazards.iter().find(|(hid, _)| hid == id) {
                        cpr.push(*d);
                    }
                }
            }
        }

        if !cpr.is_empty() {
            prune(&mut self.forest, &cpr);
        }

        let center = self.repair_center(map, cobot_pos, &violation, &polyline, &node_tail);
        let outcome: RepairOutcome = repair(
            &mut self.forest,
            cobot_pos,
            self.goal,
            center,
            map,
            &cpr,
            &self.cfg.repair_params(),
            &mut self.rng,
        );
        if !outcome.success {
            self.trajectory = None;
            return TickOutcome::Failed {
                wall: started.elapsed(),
            };
        }
        rewire_cascade(&mut self.forest, map, &cpr, &outcome.seeds);
        let (entry, _) = best_entry(
            &mut self.forest,
            map,
            &cpr,
            cobot_pos,
            self.cfg.connect_radius,
        )
        .expect("entry exists after successful repair");
        let traj = extract_trajectory(&self.forest, cobot_pos, entry, self.cfg.v_robot, clock);
        let wall = started.elapsed();
        // pruned nodes and leftover subtrees come back after the path search
        reintegrate(&mut self.forest, map, &cpr);
        self.trajectory = Some(traj.clone());
        TickOutcome::Replanned {
            trajectory: traj,
            wall,
            charged: self.cfg.replan_charge,
            final_l: outcome.final_l,
            fallback_used: outcome.fallback_used,
        }
    }

    /// Window center for the repair: the pruned path node closest to the
    /// robot; with none (edge-only prune, or no trajectory at all) the cell
    /// of the invalid element's robot-side endpoint, falling back to the
    /// robot's own cell.
    fn repair_center(
        &self,
        map: &StaticMap,
        cobot_pos: Point2,
        violation: &Option<crate::pruning::PathViolation>,
        polyline: &[Point2],
        node_tail: &[Option<NodeId>],
    ) -> CellIndex {
        let tiling = map.tiling();
        for id in node_tail.iter().flatten() {
            if !self.forest.is_active(*id) {
                return self.forest.cell(*id);
            }
        }
        if let Some(v) = violation {
            if let Some(p) = polyline.get(v.index) {
                if let Ok(c) = tiling.cell_of(*p) {
                    return c;
                }
            }
        }
        tiling
            .cell_of(cobot_pos)
            .unwrap_or(CellIndex::new(0, 0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Tiling;

    fn empty8() -> StaticMap {
        StaticMap::empty(Tiling::new(Point2::new(0.0, 0.0), 8.0, 8.0, 1.0))
    }

    fn cfg8() -> PlannerConfig {
        PlannerConfig {
            rrt_samples: 400,
            v_robot: 4.0,
            seed: 21,
            ..PlannerConfig::for_cell_size(1.0)
        }
    }

    fn obstacle(id: u32, x: f64, y: f64, speed: f64, radius: f64) -> ObstacleState {
        ObstacleState {
            id,
            position: Point2::new(x, y),
            speed,
            radius,
        }
    }

    #[test]
    fn initial_trajectory_descends_in_cost() {
        let map = empty8();
        let (forest, traj) = plan_initial(
            &map,
            Point2::new(1.0, 1.0),
            Point2::new(7.0, 7.0),
            &cfg8(),
        )
        .unwrap();
        let costs: Vec<f64> = traj
            .node_ids
            .iter()
            .flatten()
            .map(|id| forest.cost_to_go(*id))
            .collect();
        assert!(!costs.is_empty());
        for w in costs.windows(2) {
            assert!(w[1] < w[0] + 1e-12, "cost-to-go must decrease: {w:?}");
        }
        assert_eq!(*traj.waypoints.last().unwrap(), Point2::new(7.0, 7.0));
        // time embedding at constant speed
        for (i, w) in traj.waypoints.windows(2).enumerate() {
            let want = w[0].distance(w[1]) / 4.0;
            assert!((traj.segment_times[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn start_equals_goal() {
        let map = empty8();
        let p = Point2::new(3.0, 3.0);
        let (_, traj) = plan_initial(&map, p, p, &cfg8()).unwrap();
        assert_eq!(traj.waypoints.len(), 1);
        assert_eq!(traj.total_time(), 0.0);
    }

    #[test]
    fn occupied_goal_is_an_error() {
        let t = Tiling::new(Point2::new(0.0, 0.0), 8.0, 8.0, 1.0);
        let mut map = StaticMap::empty(t);
        map.set_occupied(crate::world::CellIndex::new(7, 7), true);
        let err = plan_initial(
            &map,
            Point2::new(1.0, 1.0),
            Point2::new(7.5, 7.5),
            &cfg8(),
        );
        assert!(matches!(err, Err(PlanError::Tree(_))));
    }

    #[test]
    fn tick_keeps_an_unthreatened_path() {
        let map = empty8();
        let (mut planner, _) = Planner::new(
            &map,
            Point2::new(1.0, 1.0),
            Point2::new(7.0, 7.0),
            cfg8(),
        )
        .unwrap();
        let nodes_before = planner.forest.len();
        let out = planner.tick(
            &map,
            0.0,
            Point2::new(1.0, 1.0),
            4.0,
            &[obstacle(0, 7.5, 0.5, 1.0, 0.5)],
            1,
        );
        assert!(matches!(out, TickOutcome::Kept));
        assert_eq!(planner.forest.len(), nodes_before);
    }

    #[test]
    fn replanned_trajectory_avoids_the_cpr() {
        let map = empty8();
        let start = Point2::new(1.0, 4.0);
        let goal = Point2::new(7.0, 4.0);
        let (mut planner, _) = Planner::new(&map, start, goal, cfg8()).unwrap();
        // obstacle astride the path right in front of the robot
        let obs = [obstacle(0, 2.6, 4.0, 1.0, 0.5)];
        let risk = compute_risk(start, 4.0, &obs, &cfg8().risk_params());
        assert!(!risk.cpr.is_empty());
        let out = planner.tick(&map, 0.0, start, 4.0, &obs, 1);
        let TickOutcome::Replanned { trajectory, .. } = out else {
            panic!("want a replan");
        };
        for w in trajectory.waypoints.windows(2) {
            let seg = crate::geometry::Segment2::new(w[0], w[1]);
            for d in &risk.cpr {
                assert!(
                    !crate::geometry::segment_intersects_disc(seg, *d),
                    "replanned segment {w:?} crosses the CPR"
                );
            }
        }
        // tree cost identity: polyline length equals entry + cost-to-go
        let entry = trajectory.node_ids[1].unwrap();
        let want = trajectory.waypoints[0].distance(trajectory.waypoints[1])
            + planner.forest.cost_to_go(entry);
        assert!((trajectory.length() - want).abs() < 1e-9);
        planner.forest.check_invariants().unwrap();
    }

    #[test]
    fn walled_goal_fails_then_recovers() {
        let map = empty8();
        let start = Point2::new(4.0, 1.0);
        let goal = Point2::new(4.0, 7.0);
        let mut cfg = cfg8();
        cfg.fallback_cap = 100;
        let (mut planner, _) = Planner::new(&map, start, goal, cfg).unwrap();
        // an obstacle so large its hazard disc spans the whole map width
        let wall = [obstacle(0, 4.0, 4.0, 0.0, 3.6)];
        let out = planner.tick(&map, 0.0, start, 4.0, &wall, 1);
        assert!(matches!(out, TickOutcome::Failed { .. }));
        assert!(planner.trajectory.is_none());
        // obstacle clears off; the next tick replans successfully
        let gone = [obstacle(0, 400.0, 400.0, 0.0, 0.5)];
        let out = planner.tick(&map, 0.05, start, 0.0, &gone, 1);
        assert!(matches!(out, TickOutcome::Replanned { .. }));
        planner.forest.check_invariants().unwrap();
    }

    #[test]
    fn tick_sequence_is_deterministic() {
        let run = || {
            let map = empty8();
            let (mut planner, _) = Planner::new(
                &map,
                Point2::new(1.0, 1.0),
                Point2::new(7.0, 7.0),
                cfg8(),
            )
            .unwrap();
            let mut tags = Vec::new();
            let mut pos = Point2::new(1.0, 1.0);
            let mut next = 1usize;
            for k in 0..40 {
                let t = k as f64 * 0.05;
                let obs = [obstacle(0, 4.0, 4.0 - t, 2.0, 0.5)];
                match planner.tick(&map, t, pos, 4.0, &obs, next) {
                    TickOutcome::Kept => {
                        let traj = planner.trajectory.clone().unwrap();
                        let (p, n, _) = traj.advance(pos, next, 4.0 * 0.05);
                        pos = p;
                        next = n;
                        tags.push(format!("K{:.3},{:.3}", pos.x, pos.y));
                    }
                    TickOutcome::Replanned { trajectory, .. } => {
                        next = 1;
                        tags.push(format!("R{}", trajectory.waypoints.len()));
                    }
                    TickOutcome::Failed { .. } => tags.push("F".into()),
                }
            }
            tags
        };
        assert_eq!(run(), run());
    }
}
