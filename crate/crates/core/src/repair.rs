//! Informed tree-repair.
//!
//! After pruning, the disjoint subtrees are merged back together at
//! hot-spots: cells where nodes of two different subtrees sit close enough
//! for a feasible straight edge. Hot-spots are searched in an expanding
//! local window around the damaged part of the path, ranked by a
//! shortest-path utility, and reconnected best-first until the robot can
//! reach the goal tree. If the informed search exhausts the space, uniform
//! random sampling keeps the search probabilistically complete.

use crate::geometry::{Disc, Point2};
use crate::tree::{Forest, NodeId, GOAL_TREE};
use crate::world::{edge_feasible, CellIndex, StaticMap};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy)]
pub struct RepairParams {
    /// Largest window size; `None` grows until the window covers the tiling.
    pub l_max: Option<usize>,
    /// How close the robot must be to a goal-tree node (with a feasible
    /// straight edge) for the tree to count as reachable.
    pub connect_radius: f64,
    /// Random samples allowed after the informed search is exhausted.
    pub fallback_cap: usize,
}

/// Search window state: the hot-spot and utility maps over the current
/// l x l region. A cell maps to the witness node-pair that makes it a
/// hot-spot, or `None` when it is not one.
#[derive(Debug, Clone)]
pub struct RepairState {
    pub center: CellIndex,
    pub l: usize,
    pub hotspots: BTreeMap<CellIndex, Option<(NodeId, NodeId)>>,
    pub utilities: BTreeMap<CellIndex, f64>,
}

#[derive(Debug, Clone)]
pub struct RepairOutcome {
    /// Nodes merged into the goal tree this episode (seed set for the
    /// rewiring cascade).
    pub seeds: Vec<NodeId>,
    pub success: bool,
    /// Goal-tree node the robot connects through, when successful.
    pub entry: Option<NodeId>,
    pub final_l: usize,
    pub fallback_used: bool,
}

/// Label every active node registered in `region` with its subtree index and
/// return the number of distinct subtrees seen.
pub fn label_subtrees(forest: &mut Forest, region: &[CellIndex]) -> usize {
    let mut labels = std::collections::BTreeSet::new();
    for &c in region {
        let ids: Vec<NodeId> = forest.active_in_cell(c).to_vec();
        for id in ids {
            labels.insert(forest.tree_index(id));
        }
    }
    labels.len()
}

/// Hot-spot test for one cell: does it hold a node pair of two different
/// subtrees (within the cell or across its eight neighbors) joinable by an
/// edge clear of statics and of the CPR? Returns the first such pair in
/// ascending id order.
pub fn hotspot_status(
    forest: &mut Forest,
    c: CellIndex,
    map: &StaticMap,
    cpr: &[Disc],
) -> Option<(NodeId, NodeId)> {
    let own: Vec<NodeId> = forest.active_in_cell(c).to_vec();
    if own.is_empty() {
        return None;
    }
    let mut nearby: Vec<NodeId> = Vec::new();
    for n in forest.tiling().adjacent(c) {
        nearby.extend_from_slice(forest.active_in_cell(n));
    }
    nearby.sort_unstable();
    for &u in &own {
        let lu = forest.tree_index(u);
        let u_pos = forest.position(u);
        for &v in &nearby {
            if v == u || forest.tree_index(v) == lu {
                continue;
            }
            if edge_feasible(map, cpr, u_pos, forest.position(v)) {
                return Some((u, v));
            }
        }
    }
    None
}

/// Hot-spot map over a region (spec'd as h: region -> {1, -1}; here the
/// hot cells carry their witness pair).
pub fn find_hotspots(
    forest: &mut Forest,
    region: &[CellIndex],
    map: &StaticMap,
    cpr: &[Disc],
) -> BTreeMap<CellIndex, Option<(NodeId, NodeId)>> {
    region
        .iter()
        .map(|&c| (c, hotspot_status(forest, c, map, cpr)))
        .collect()
}

const UTILITY_DENOM_FLOOR: f64 = 1e-9;

/// Utility of a cell: inverse of heuristic cost-to-come plus cost-to-go.
/// With a goal-tree node in the cell the actual cost-to-go is used,
/// otherwise the straight-line heuristic through the cell centroid.
pub fn utility(forest: &mut Forest, c: CellIndex, cobot_pos: Point2, goal: Point2) -> f64 {
    let centroid = forest.tiling().cell_center(c);
    let ids: Vec<NodeId> = forest.active_in_cell(c).to_vec();
    let mut best_cost = f64::INFINITY;
    for id in ids {
        if forest.tree_index(id) == GOAL_TREE {
            best_cost = best_cost.min(forest.cost_to_go(id));
        }
    }
    let denom = if best_cost.is_finite() {
        cobot_pos.distance(centroid) + best_cost
    } else {
        cobot_pos.distance(centroid) + centroid.distance(goal)
    };
    1.0 / denom.max(UTILITY_DENOM_FLOOR)
}

/// Cheapest feasible connection from the robot into the goal tree: an active
/// goal-tree node within `connect_radius` whose straight edge clears statics
/// and the CPR, minimizing entry length + cost-to-go. Ties go to the lower id.
pub fn best_entry(
    forest: &mut Forest,
    map: &StaticMap,
    cpr: &[Disc],
    cobot_pos: Point2,
    connect_radius: f64,
) -> Option<(NodeId, f64)> {
    let tiling = *forest.tiling();
    let ring = (connect_radius / tiling.cell_size).ceil() as usize;
    let center = tiling.cell_of(cobot_pos).ok()?;
    let region = tiling.neighborhood(center, 2 * ring + 1).ok()?;
    let mut best: Option<(f64, f64, NodeId)> = None;
    for c in region {
        let ids: Vec<NodeId> = forest.active_in_cell(c).to_vec();
        for id in ids {
            let entry = cobot_pos.distance(forest.position(id));
            if entry > connect_radius || forest.tree_index(id) != GOAL_TREE {
                continue;
            }
            let cost = forest.cost_to_go(id);
            if !cost.is_finite() {
                continue;
            }
            let total = entry + cost;
            if best.map_or(true, |(bt, _, _)| total < bt)
                && edge_feasible(map, cpr, cobot_pos, forest.position(id))
            {
                best = Some((total, entry, id));
            }
        }
    }
    best.map(|(_, entry, id)| (id, entry))
}

/// Smallest odd l whose l x l window centered at `c` covers the whole grid.
fn covering_l(cols: usize, rows: usize, c: CellIndex) -> usize {
    let half = [c.col, cols - 1 - c.col, c.row, rows - 1 - c.row]
        .into_iter()
        .max()
        .unwrap_or(0);
    2 * half + 1
}

/// Repair episode. See [`repair_with_observer`] for the observable variant.
#[allow(clippy::too_many_arguments)]
pub fn repair(
    forest: &mut Forest,
    cobot_pos: Point2,
    goal: Point2,
    n_hat_cell: CellIndex,
    map: &StaticMap,
    cpr: &[Disc],
    params: &RepairParams,
    rng: &mut ChaCha8Rng,
) -> RepairOutcome {
    repair_with_observer(
        forest,
        cobot_pos,
        goal,
        n_hat_cell,
        map,
        cpr,
        params,
        rng,
        |_, _| {},
    )
}

/// Repair episode with a hook called after every successful reconnection
/// (once the hot-spot and utility maps have been refreshed).
#[allow(clippy::too_many_arguments)]
pub fn repair_with_observer(
    forest: &mut Forest,
    cobot_pos: Point2,
    goal: Point2,
    n_hat_cell: CellIndex,
    map: &StaticMap,
    cpr: &[Disc],
    params: &RepairParams,
    rng: &mut ChaCha8Rng,
    mut observer: impl FnMut(&mut Forest, &RepairState),
) -> RepairOutcome {
    let tiling = *forest.tiling();
    let l_max = params
        .l_max
        .unwrap_or_else(|| covering_l(tiling.cols, tiling.rows, n_hat_cell));
    let mut state = RepairState {
        center: n_hat_cell,
        l: 1,
        hotspots: BTreeMap::new(),
        utilities: BTreeMap::new(),
    };
    let mut seeds: Vec<NodeId> = Vec::new();
    let mut fallback_used = false;
    let mut entry = best_entry(forest, map, cpr, cobot_pos, params.connect_radius);

    while entry.is_none() {
        if state.l < l_max {
            state.l += 2;
            let region = tiling
                .neighborhood(n_hat_cell, state.l)
                .expect("l stays odd");
            label_subtrees(forest, &region);
            state.hotspots = find_hotspots(forest, &region, map, cpr);
            state.utilities = BTreeMap::new();
            let hot: Vec<CellIndex> = state
                .hotspots
                .iter()
                .filter(|(_, w)| w.is_some())
                .map(|(c, _)| *c)
                .collect();
            for c in hot {
                let u = utility(forest, c, cobot_pos, goal);
                state.utilities.insert(c, u);
            }
            // reconnect best-first until the window is out of hot-spots
            loop {
                entry = best_entry(forest, map, cpr, cobot_pos, params.connect_radius);
                if entry.is_some() {
                    break;
                }
                let Some((_cell, u, v)) = pick_best_hotspot(&state, &tiling) else {
                    break;
                };
                let merged = connect_pair(forest, u, v, cobot_pos, goal);
                seeds.extend_from_slice(&merged.absorbed_goal);
                refresh_after_connection(
                    forest,
                    &mut state,
                    &merged.relabeled,
                    map,
                    cpr,
                    cobot_pos,
                    goal,
                );
                observer(forest, &state);
            }
        } else {
            fallback_used = true;
            entry = sampling_fallback(
                forest,
                cobot_pos,
                map,
                cpr,
                params,
                rng,
                &mut seeds,
            );
            break;
        }
    }

    seeds.sort_unstable();
    seeds.dedup();
    RepairOutcome {
        seeds,
        success: entry.is_some(),
        entry: entry.map(|(id, _)| id),
        final_l: state.l,
        fallback_used,
    }
}

/// Highest-utility hot-spot with its witness pair; utility ties break to the
/// lower row-major cell index.
fn pick_best_hotspot(
    state: &RepairState,
    tiling: &crate::world::Tiling,
) -> Option<(CellIndex, NodeId, NodeId)> {
    let mut best: Option<(f64, usize, CellIndex, (NodeId, NodeId))> = None;
    for (&c, witness) in &state.hotspots {
        let Some(pair) = witness else { continue };
        let u = *state.utilities.get(&c)?;
        let linear = tiling.linear(c);
        let better = match best {
            None => true,
            Some((bu, blin, _, _)) => u > bu || (u == bu && linear < blin),
        };
        if better {
            best = Some((u, linear, c, *pair));
        }
    }
    best.map(|(_, _, c, (u, v))| (c, u, v))
}

struct MergeResult {
    /// Every node whose subtree label changed.
    relabeled: Vec<NodeId>,
    /// The relabeled nodes that joined the goal tree (empty otherwise).
    absorbed_goal: Vec<NodeId>,
}

/// Connect a feasible node pair of two different subtrees (steps d-e):
/// the goal-tree endpoint becomes the parent when there is one, otherwise
/// the endpoint in the higher-utility cell; the child side is re-rooted at
/// the junction and its whole subtree adopts the surviving label (plus
/// updated cost-to-go when that label is the goal tree).
fn connect_pair(
    forest: &mut Forest,
    u: NodeId,
    v: NodeId,
    cobot_pos: Point2,
    goal: Point2,
) -> MergeResult {
    let lu = forest.tree_index(u);
    let lv = forest.tree_index(v);
    debug_assert_ne!(lu, lv, "connect_pair wants nodes of different subtrees");
    let (parent, child) = if lu == GOAL_TREE {
        (u, v)
    } else if lv == GOAL_TREE {
        (v, u)
    } else {
        let uu = utility(forest, forest.cell(u), cobot_pos, goal);
        let uv = utility(forest, forest.cell(v), cobot_pos, goal);
        if uu > uv || (uu == uv && u < v) {
            (u, v)
        } else {
            (v, u)
        }
    };
    forest.reroot(child);
    forest.attach(child, parent);
    let surviving = forest.tree_index(parent);
    if surviving == GOAL_TREE {
        let relabeled = forest.absorb_subtree(child, GOAL_TREE, true);
        MergeResult {
            absorbed_goal: relabeled.clone(),
            relabeled,
        }
    } else {
        MergeResult {
            relabeled: forest.absorb_subtree(child, surviving, false),
            absorbed_goal: Vec::new(),
        }
    }
}

/// Step f: refresh the hot-spot and utility maps on every window cell whose
/// 3x3 block contains a relabeled node.
fn refresh_after_connection(
    forest: &mut Forest,
    state: &mut RepairState,
    relabeled: &[NodeId],
    map: &StaticMap,
    cpr: &[Disc],
    cobot_pos: Point2,
    goal: Point2,
) {
    let tiling = *forest.tiling();
    let mut affected = std::collections::BTreeSet::new();
    for &id in relabeled {
        for c in tiling.adjacent(forest.cell(id)) {
            if state.hotspots.contains_key(&c) {
                affected.insert(c);
            }
        }
    }
    for c in affected {
        let status = hotspot_status(forest, c, map, cpr);
        if status.is_some() {
            let u = utility(forest, c, cobot_pos, goal);
            state.utilities.insert(c, u);
        } else {
            state.utilities.remove(&c);
        }
        state.hotspots.insert(c, status);
    }
}

/// Remark-1 fallback: sample uniform free positions, join each sample to
/// every nearby subtree it can feasibly reach, and locally rewire samples
/// that land in the goal tree. Gives up after the iteration cap.
fn sampling_fallback(
    forest: &mut Forest,
    cobot_pos: Point2,
    map: &StaticMap,
    cpr: &[Disc],
    params: &RepairParams,
    rng: &mut ChaCha8Rng,
    seeds: &mut Vec<NodeId>,
) -> Option<(NodeId, f64)> {
    let tiling = *forest.tiling();
    for _ in 0..params.fallback_cap {
        if let Some(entry) = best_entry(forest, map, cpr, cobot_pos, params.connect_radius) {
            return Some(entry);
        }
        let p = Point2::new(
            rng.random_range(tiling.origin.x..tiling.origin.x + tiling.width),
            rng.random_range(tiling.origin.y..tiling.origin.y + tiling.height),
        );
        let Ok(cell) = tiling.cell_of(p) else { continue };
        if map.is_occupied(cell) {
            continue;
        }
        // per nearby subtree: candidate connectors by distance
        let mut by_label: BTreeMap<u32, Vec<(f64, NodeId)>> = BTreeMap::new();
        for m in forest.neighbors(p) {
            let label = forest.tree_index(m);
            by_label
                .entry(label)
                .or_default()
                .push((p.distance(forest.position(m)), m));
        }
        // the goal tree ranks its connectors by resulting cost instead
        if let Some(goal_candidates) = by_label.get_mut(&GOAL_TREE) {
            for (key, id) in goal_candidates.iter_mut() {
                *key += forest.cost_to_go(*id);
            }
        }
        let mut connectors: Vec<(u32, NodeId)> = Vec::new();
        for (label, mut candidates) in by_label {
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((_, id)) = candidates
                .into_iter()
                .find(|(_, id)| edge_feasible(map, cpr, p, forest.position(*id)))
            {
                connectors.push((label, id));
            }
        }
        if connectors.is_empty() {
            continue;
        }
        // parent: the goal-tree connector when present, else the first subtree's
        let parent_slot = connectors
            .iter()
            .position(|(l, _)| *l == GOAL_TREE)
            .unwrap_or(0);
        let (parent_label, parent_node) = connectors[parent_slot];
        let sample = forest.add_node(p);
        forest.attach(sample, parent_node);
        forest.set_label(sample, parent_label);
        if parent_label == GOAL_TREE {
            let cost = forest.cost_to_go(parent_node) + p.distance(forest.position(parent_node));
            forest.set_cost(sample, cost);
            seeds.push(sample);
        }
        for (slot, &(_, connector)) in connectors.iter().enumerate() {
            if slot == parent_slot {
                continue;
            }
            forest.reroot(connector);
            forest.attach(connector, sample);
            let absorbed = forest.absorb_subtree(connector, parent_label, parent_label == GOAL_TREE);
            if parent_label == GOAL_TREE {
                seeds.extend_from_slice(&absorbed);
            }
        }
        // Rewire(x_rand): pull neighbors through the sample when it improves them
        if parent_label == GOAL_TREE {
            let own_cost = forest.cost_to_go(sample);
            for m in forest.neighbors(p) {
                if m == sample || m == forest.goal_root() || forest.tree_index(m) != GOAL_TREE {
                    continue;
                }
                let m_pos = forest.position(m);
                let tentative = own_cost + p.distance(m_pos);
                if tentative < forest.cost_to_go(m) - 1e-12 && edge_feasible(map, cpr, p, m_pos) {
                    forest.detach(m);
                    forest.attach(m, sample);
                    forest.set_cost(m, tentative);
                    let absorbed = forest.absorb_subtree(m, GOAL_TREE, true);
                    seeds.extend_from_slice(&absorbed);
                }
            }
        }
    }
    best_entry(forest, map, cpr, cobot_pos, params.connect_radius)
}
