//! Risk-zone computation and local tree-pruning.
//!
//! A reaction zone (LRZ) follows the robot and a hazard zone (OHZ) follows
//! each moving obstacle. Obstacles whose hazard zone reaches into the
//! reaction zone form the critical pruning region (CPR); every node and edge
//! inside it is cut out of the tree, which may split it into disjoint
//! subtrees.

use crate::geometry::{point_in_disc, segment_intersects_disc, Disc, Point2, Segment2};
use crate::tree::{Forest, NodeId};
use crate::world::CellIndex;
use std::collections::BTreeSet;

/// A moving circular obstacle as perceived at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleState {
    pub id: u32,
    pub position: Point2,
    pub speed: f64,
    pub radius: f64,
}

/// Time horizons and radii that shape the risk zones.
#[derive(Debug, Clone, Copy)]
pub struct RiskParams {
    /// Reaction time-horizon (seconds): LRZ radius = speed * t_rh.
    pub t_rh: f64,
    /// Obstacle risk time-horizon (seconds): OHZ radius = v_i * t_oh + r_i + r_robot.
    pub t_oh: f64,
    pub r_robot: f64,
    /// Floor on the LRZ radius so a stopped robot keeps validating.
    pub r_min: f64,
}

/// Snapshot of all risk zones at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskModel {
    pub lrz: Disc,
    /// Full hazard zones per obstacle (the defining radius formula).
    pub ohz: Vec<(u32, Disc)>,
    /// Effective hazard discs used for validation and pruning: when the robot
    /// is already inside an obstacle's OHZ, that OHZ is ignored and only the
    /// physical disc (r_i + r_robot) counts.
    pub hazards: Vec<(u32, Disc)>,
    /// Hazard discs of the obstacles in the danger set, in id order.
    pub cpr: Vec<Disc>,
    pub danger_ids: BTreeSet<u32>,
}

/// Build the risk model for one instant. Pure function of its inputs.
pub fn compute_risk(
    cobot_pos: Point2,
    cobot_speed: f64,
    obstacles: &[ObstacleState],
    params: &RiskParams,
) -> RiskModel {
    let lrz = Disc::new(cobot_pos, (cobot_speed * params.t_rh).max(params.r_min));
    let mut ohz = Vec::with_capacity(obstacles.len());
    let mut hazards = Vec::with_capacity(obstacles.len());
    let mut cpr = Vec::new();
    let mut danger_ids = BTreeSet::new();
    for o in obstacles {
        let full = Disc::new(
            o.position,
            o.speed * params.t_oh + o.radius + params.r_robot,
        );
        let effective = if point_in_disc(cobot_pos, full) {
            Disc::new(o.position, o.radius + params.r_robot)
        } else {
            full
        };
        if discs_intersect(lrz, effective) {
            danger_ids.insert(o.id);
            cpr.push(effective);
        }
        ohz.push((o.id, full));
        hazards.push((o.id, effective));
    }
    RiskModel {
        lrz,
        ohz,
        hazards,
        cpr,
        danger_ids,
    }
}

fn discs_intersect(a: Disc, b: Disc) -> bool {
    a.center.distance(b.center) <= a.radius + b.radius
}

/// First invalid element of a path polyline, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct PathViolation {
    /// Index of the violating waypoint, or of the cobot-side endpoint when an
    /// edge is the violator.
    pub index: usize,
    pub is_edge: bool,
    /// Obstacles whose hazard disc caused the violation.
    pub obstacle_ids: Vec<u32>,
}

/// Validate a path polyline (robot-side first) against the risk model.
///
/// Only the local part matters: waypoints inside the LRZ are checked against
/// every hazard disc, and edges with at least one endpoint inside the LRZ
/// likewise. Everything wholly outside the LRZ is ignored.
pub fn validate_path(path: &[Point2], risk: &RiskModel) -> bool {
    first_violation(path, risk).is_none()
}

/// Like [`validate_path`] but reports the robot-nearest violation.
pub fn first_violation(path: &[Point2], risk: &RiskModel) -> Option<PathViolation> {
    for (i, &p) in path.iter().enumerate() {
        if point_in_disc(p, risk.lrz) {
            let ids: Vec<u32> = risk
                .hazards
                .iter()
                .filter(|(_, d)| point_in_disc(p, *d))
                .map(|(id, _)| *id)
                .collect();
            if !ids.is_empty() {
                return Some(PathViolation {
                    index: i,
                    is_edge: false,
                    obstacle_ids: ids,
                });
            }
        }
        if i + 1 < path.len() {
            let q = path[i + 1];
            if point_in_disc(p, risk.lrz) || point_in_disc(q, risk.lrz) {
                let seg = Segment2::new(p, q);
                let ids: Vec<u32> = risk
                    .hazards
                    .iter()
                    .filter(|(_, d)| segment_intersects_disc(seg, *d))
                    .map(|(id, _)| *id)
                    .collect();
                if !ids.is_empty() {
                    return Some(PathViolation {
                        index: i,
                        is_edge: true,
                        obstacle_ids: ids,
                    });
                }
            }
        }
    }
    None
}

/// What a prune did, for the caller and for instrumentation.
#[derive(Debug, Clone)]
pub struct PruneReport {
    /// Goal root plus every node whose parent link was severed and which is
    /// still active: the roots of the disjoint subtrees.
    pub roots: Vec<NodeId>,
    /// Nodes examined (the cost driver; bounded by the nodes registered in
    /// the widened cell cover of the CPR).
    pub touched: usize,
    /// Cells whose square intersects the CPR proper.
    pub cover_cells: usize,
}

/// Prune every node inside the CPR and every surviving edge crossing it.
///
/// Work is confined to the cells overlapping the CPR discs' bounding boxes,
/// widened by the longest edge ever created so that an edge dangling into
/// the region from outside is still caught. The tree labels are invalidated
/// wholesale (epoch bump); relabeling happens lazily during repair.
pub fn prune(forest: &mut Forest, cpr: &[Disc]) -> PruneReport {
    debug_assert!(!cpr.is_empty(), "prune called with an empty CPR");
    forest.bump_epoch();

    let tiling = *forest.tiling();
    let margin = forest.max_edge_len();
    let mut cover: BTreeSet<CellIndex> = BTreeSet::new();
    let mut exact_cover: BTreeSet<CellIndex> = BTreeSet::new();
    for d in cpr {
        for c in cells_in_bbox(&tiling, d.center, d.radius + margin) {
            cover.insert(c);
        }
        for c in cells_in_bbox(&tiling, d.center, d.radius) {
            if cell_intersects_disc(&tiling, c, *d) {
                exact_cover.insert(c);
            }
        }
    }

    let mut candidates: Vec<NodeId> = Vec::new();
    for &c in &cover {
        candidates.extend_from_slice(forest.active_in_cell(c));
    }
    candidates.sort_unstable();
    candidates.dedup();
    let touched = candidates.len();

    let goal = forest.goal_root();
    let mut severed: BTreeSet<NodeId> = BTreeSet::new();

    // nodes inside the CPR go first (the goal root itself is never pruned;
    // cutting its edges is enough and keeps the goal tree rooted)
    for &id in &candidates {
        if id == goal || !forest.is_active(id) {
            continue;
        }
        let pos = forest.position(id);
        if cpr.iter().any(|d| point_in_disc(pos, *d)) {
            for child in forest.prune_node(id) {
                severed.insert(child);
            }
        }
    }

    // then surviving edges that cross the CPR: endpoints safe, edge removed
    for &id in &candidates {
        if !forest.is_active(id) {
            continue;
        }
        let Some(parent) = forest.parent(id) else {
            continue;
        };
        let seg = Segment2::new(forest.position(id), forest.position(parent));
        if cpr.iter().any(|d| segment_intersects_disc(seg, *d)) {
            forest.detach(id);
            severed.insert(id);
        }
    }

    let mut roots = vec![goal];
    roots.extend(severed.into_iter().filter(|id| forest.is_active(*id)));
    roots.sort_unstable();
    roots.dedup();

    PruneReport {
        roots,
        touched,
        cover_cells: exact_cover.len(),
    }
}

/// In-bounds cells overlapping the axis-aligned box of half-width `r`.
fn cells_in_bbox(
    t: &crate::world::Tiling,
    center: Point2,
    r: f64,
) -> impl Iterator<Item = CellIndex> {
    let c0 = (((center.x - r - t.origin.x) / t.cell_size).floor().max(0.0)) as usize;
    let r0 = (((center.y - r - t.origin.y) / t.cell_size).floor().max(0.0)) as usize;
    let c1 = ((((center.x + r - t.origin.x) / t.cell_size).floor()).max(0.0) as usize)
        .min(t.cols.saturating_sub(1));
    let r1 = ((((center.y + r - t.origin.y) / t.cell_size).floor()).max(0.0) as usize)
        .min(t.rows.saturating_sub(1));
    let cols = c0..=c1.max(c0);
    let span_ok = center.x + r >= t.origin.x
        && center.x - r <= t.origin.x + t.width
        && center.y + r >= t.origin.y
        && center.y - r <= t.origin.y + t.height;
    let rows = r0..=r1.max(r0);
    rows.flat_map(move |row| cols.clone().map(move |col| CellIndex::new(col, row)))
        .filter(move |_| span_ok)
}

fn cell_intersects_disc(t: &crate::world::Tiling, c: CellIndex, d: Disc) -> bool {
    let x0 = t.origin.x + c.col as f64 * t.cell_size;
    let y0 = t.origin.y + c.row as f64 * t.cell_size;
    let nearest_x = d.center.x.clamp(x0, x0 + t.cell_size);
    let nearest_y = d.center.y.clamp(y0, y0 + t.cell_size);
    Point2::new(nearest_x, nearest_y).distance(d.center) <= d.radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{build_initial_tree, GOAL_TREE};
    use crate::world::{StaticMap, Tiling};

    fn params() -> RiskParams {
        RiskParams {
            t_rh: 0.8,
            t_oh: 0.4,
            r_robot: 0.5,
            r_min: 1.0,
        }
    }

    fn obstacle(id: u32, x: f64, y: f64, speed: f64) -> ObstacleState {
        ObstacleState {
            id,
            position: Point2::new(x, y),
            speed,
            radius: 0.5,
        }
    }

    #[test]
    fn risk_radii_match_the_formulas() {
        let risk = compute_risk(
            Point2::new(0.0, 0.0),
            4.0,
            &[obstacle(0, 2.0, 0.0, 2.0)],
            &params(),
        );
        assert_eq!(risk.lrz.radius, 3.2); // 4 m/s * 0.8 s
        assert_eq!(risk.ohz[0].1.radius, 1.8); // 2 * 0.4 + 0.5 + 0.5
        assert!(risk.danger_ids.contains(&0));
        assert_eq!(risk.cpr.len(), 1);
    }

    #[test]
    fn far_obstacle_is_not_dangerous() {
        let risk = compute_risk(
            Point2::new(0.0, 0.0),
            4.0,
            &[obstacle(3, 100.0, 0.0, 2.0)],
            &params(),
        );
        assert!(risk.cpr.is_empty());
        assert!(risk.danger_ids.is_empty());
    }

    #[test]
    fn stopped_robot_keeps_a_floor_radius() {
        let risk = compute_risk(Point2::new(1.0, 1.0), 0.0, &[], &params());
        assert_eq!(risk.lrz.radius, 1.0);
    }

    #[test]
    fn robot_inside_ohz_falls_back_to_physical_disc() {
        // obstacle right on top of the robot: full OHZ contains the robot
        let risk = compute_risk(
            Point2::new(0.0, 0.0),
            4.0,
            &[obstacle(0, 1.2, 0.0, 2.0)],
            &params(),
        );
        assert_eq!(risk.ohz[0].1.radius, 1.8);
        assert_eq!(risk.hazards[0].1.radius, 1.0); // r_i + r_robot
        assert_eq!(risk.cpr[0].radius, 1.0);
    }

    #[test]
    fn compute_risk_is_pure() {
        let obs = [obstacle(0, 2.0, 1.0, 3.0), obstacle(1, -4.0, 2.0, 1.0)];
        let a = compute_risk(Point2::new(0.5, 0.5), 4.0, &obs, &params());
        let b = compute_risk(Point2::new(0.5, 0.5), 4.0, &obs, &params());
        assert_eq!(a, b);
    }

    #[test]
    fn validation_is_local_to_the_lrz() {
        let p = params();
        let path = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(20.0, 0.0),
        ];
        // hazard centered on a path node inside the LRZ (radius 3.2)
        let near = compute_risk(path[0], 4.0, &[obstacle(0, 2.0, 0.0, 2.0)], &p);
        assert!(!validate_path(&path, &near));
        // same obstacle but the affected node is outside the LRZ
        let far = compute_risk(path[0], 4.0, &[obstacle(0, 20.0, 0.0, 2.0)], &p);
        assert!(validate_path(&path, &far));
        // no obstacles at all
        let none = compute_risk(path[0], 4.0, &[], &p);
        assert!(validate_path(&path, &none));
    }

    #[test]
    fn first_violation_reports_nearest_element() {
        let p = params();
        let path = [Point2::new(0.0, 0.0), Point2::new(3.0, 0.0)];
        let risk = compute_risk(path[0], 4.0, &[obstacle(7, 2.0, 0.0, 0.0)], &p);
        let v = first_violation(&path, &risk).unwrap();
        assert_eq!(v.obstacle_ids, vec![7]);
        assert_eq!(v.index, 0);
        assert!(v.is_edge);
    }

    fn chain_forest() -> (StaticMap, Forest, Vec<NodeId>) {
        let t = Tiling::new(Point2::new(0.0, 0.0), 10.0, 10.0, 1.0);
        let map = StaticMap::empty(t);
        let goal = Point2::new(0.5, 0.5);
        let mut forest = Forest::new(t, goal).unwrap();
        let mut ids = vec![forest.goal_root()];
        let mut prev = forest.goal_root();
        for i in 1..5 {
            let id = forest.add_node(Point2::new(0.5 + i as f64, 0.5));
            forest.attach(id, prev);
            let cost = forest.cost_to_go(prev) + 1.0;
            forest.set_cost(id, cost);
            forest.set_label(id, GOAL_TREE);
            ids.push(id);
            prev = id;
        }
        (map, forest, ids)
    }

    #[test]
    fn pruning_the_middle_of_a_chain_splits_it() {
        let (_map, mut forest, ids) = chain_forest();
        // disc covering only the middle node (2.5, 0.5)
        let cpr = [Disc::new(Point2::new(2.5, 0.5), 0.4)];
        let report = prune(&mut forest, &cpr);
        assert!(!forest.is_active(ids[2]));
        assert!(forest.is_active(ids[1]) && forest.is_active(ids[3]));
        // roots: goal plus the severed child of the pruned node
        assert_eq!(report.roots, vec![forest.goal_root(), ids[3]]);
        assert_eq!(subtree_partition(&forest), edge_components(&forest));
        forest.check_invariants().unwrap();
    }

    #[test]
    fn edge_only_prune_keeps_both_endpoints() {
        let (_map, mut forest, ids) = chain_forest();
        // small disc across the edge between nodes 1 and 2, touching neither
        let cpr = [Disc::new(Point2::new(2.0, 0.5), 0.3)];
        let report = prune(&mut forest, &cpr);
        assert!(forest.is_active(ids[1]) && forest.is_active(ids[2]));
        assert_eq!(forest.parent(ids[2]), None);
        assert_eq!(report.roots, vec![forest.goal_root(), ids[2]]);
        forest.check_invariants().unwrap();
    }

    #[test]
    fn cpr_touching_nothing_changes_nothing() {
        let (_map, mut forest, _ids) = chain_forest();
        let cpr = [Disc::new(Point2::new(8.5, 8.5), 0.9)];
        let report = prune(&mut forest, &cpr);
        assert_eq!(report.roots, vec![forest.goal_root()]);
        assert_eq!(forest.active_ids().count(), 5);
        forest.check_invariants().unwrap();
    }

    /// Partition of active nodes by following parent links to the root.
    fn subtree_partition(forest: &Forest) -> Vec<Vec<NodeId>> {
        let mut groups: std::collections::BTreeMap<NodeId, Vec<NodeId>> = Default::default();
        for id in forest.active_ids() {
            let mut root = id;
            while let Some(p) = forest.parent(root) {
                root = p;
            }
            groups.entry(root).or_default().push(id);
        }
        groups.into_values().collect()
    }

    /// Connected components of the surviving edge set (union-find oracle).
    fn edge_components(forest: &Forest) -> Vec<Vec<NodeId>> {
        let n = forest.len();
        let mut dsu: Vec<usize> = (0..n).collect();
        fn find(dsu: &mut Vec<usize>, x: usize) -> usize {
            if dsu[x] != x {
                let root = find(dsu, dsu[x]);
                dsu[x] = root;
            }
            dsu[x]
        }
        for id in forest.active_ids() {
            if let Some(p) = forest.parent(id) {
                let (a, b) = (find(&mut dsu, id.0 as usize), find(&mut dsu, p.0 as usize));
                dsu[a] = b;
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<NodeId>> = Default::default();
        for id in forest.active_ids() {
            let root = find(&mut dsu, id.0 as usize);
            groups.entry(root).or_default().push(id);
        }
        groups.into_values().collect()
    }

    #[test]
    fn random_prunes_satisfy_everything() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let map = StaticMap::empty(Tiling::new(Point2::new(0.0, 0.0), 8.0, 8.0, 1.0));
        for trial in 0..50 {
            let mut forest =
                build_initial_tree(&map, Point2::new(4.0, 4.0), 60, 1.0, trial).unwrap();
            let n_discs = rng.random_range(1..=3);
            let cpr: Vec<Disc> = (0..n_discs)
                .map(|_| {
                    Disc::new(
                        Point2::new(rng.random_range(0.0..8.0), rng.random_range(0.0..8.0)),
                        rng.random_range(0.4..1.6),
                    )
                })
                .collect();
            let report = prune(&mut forest, &cpr);
            forest.check_invariants().unwrap();
            // no active node in the CPR, no surviving edge crossing it
            for id in forest.active_ids() {
                if id != forest.goal_root() {
                    assert!(!cpr.iter().any(|d| point_in_disc(forest.position(id), *d)));
                }
                if let Some(p) = forest.parent(id) {
                    let seg = Segment2::new(forest.position(id), forest.position(p));
                    assert!(!cpr.iter().any(|d| segment_intersects_disc(seg, *d)));
                }
            }
            assert_eq!(subtree_partition(&forest), edge_components(&forest));
            // every severed root really is parentless and active
            for r in &report.roots {
                assert!(forest.is_active(*r));
                assert!(forest.parent(*r).is_none() || *r == forest.goal_root());
            }
        }
    }
}
