//! The node forest: a single goal-rooted tree after initialization, multiple
//! disjoint subtrees after pruning. Nodes are registered per tile so that
//! "neighbors" are all nodes in the same and adjacent cells, which backs the
//! RRT* construction, the rewiring cascade, and the hot-spot repair.

use crate::geometry::{Disc, Point2};
use crate::world::{edge_feasible, CellIndex, StaticMap, Tiling};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("goal ({0}, {1}) is outside the workspace")]
    GoalOutsideWorkspace(f64, f64),
    #[error("goal cell ({0}, {1}) is occupied by a static obstacle")]
    GoalOccupied(usize, usize),
}

/// Stable handle of a node; never reused within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Active,
    Pruned,
}

/// Goal tree index: subtree 0 is rooted at the goal.
pub const GOAL_TREE: u32 = 0;

#[derive(Debug, Clone)]
struct Node {
    position: Point2,
    cell: CellIndex,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    status: NodeStatus,
    /// Subtree label, valid only when the epoch matches the forest epoch.
    label: Option<(u64, u32)>,
    cost_to_go: f64,
}

/// Node store plus the per-cell registry of active nodes.
#[derive(Debug, Clone)]
pub struct Forest {
    nodes: Vec<Node>,
    goal_root: NodeId,
    tiling: Tiling,
    registry: Vec<Vec<NodeId>>,
    pruned: Vec<NodeId>,
    /// Bumped by every prune; invalidates all subtree labels at once.
    epoch: u64,
    next_label: u32,
    max_edge_len: f64,
}

impl Forest {
    pub fn new(tiling: Tiling, goal: Point2) -> Result<Self, TreeError> {
        let cell = tiling
            .cell_of(goal)
            .map_err(|_| TreeError::GoalOutsideWorkspace(goal.x, goal.y))?;
        let mut forest = Self {
            nodes: Vec::new(),
            goal_root: NodeId(0),
            tiling,
            registry: vec![Vec::new(); tiling.cell_count()],
            pruned: Vec::new(),
            epoch: 0,
            next_label: 1,
            max_edge_len: 0.0,
        };
        let root = forest.add_node(goal);
        debug_assert_eq!(root, forest.goal_root);
        forest.nodes[root.idx()].cost_to_go = 0.0;
        forest.nodes[root.idx()].label = Some((0, GOAL_TREE));
        debug_assert_eq!(forest.nodes[root.idx()].cell, cell);
        Ok(forest)
    }

    pub fn goal_root(&self) -> NodeId {
        self.goal_root
    }

    pub fn tiling(&self) -> &Tiling {
        &self.tiling
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn position(&self, id: NodeId) -> Point2 {
        self.nodes[id.idx()].position
    }

    pub fn cell(&self, id: NodeId) -> CellIndex {
        self.nodes[id.idx()].cell
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.idx()].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.idx()].children
    }

    pub fn status(&self, id: NodeId) -> NodeStatus {
        self.nodes[id.idx()].status
    }

    pub fn is_active(&self, id: NodeId) -> bool {
        self.nodes[id.idx()].status == NodeStatus::Active
    }

    pub fn cost_to_go(&self, id: NodeId) -> f64 {
        self.nodes[id.idx()].cost_to_go
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn active_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().filter(|id| self.is_active(*id))
    }

    pub fn pruned_ids(&self) -> &[NodeId] {
        &self.pruned
    }

    pub fn active_in_cell(&self, c: CellIndex) -> &[NodeId] {
        &self.registry[self.tiling.linear(c)]
    }

    /// Longest edge ever created; bounds how far an edge can stick out of a
    /// region, which the pruner uses to widen its cell cover.
    pub(crate) fn max_edge_len(&self) -> f64 {
        self.max_edge_len
    }

    /// All active nodes in the same and adjacent cells of `p`, ascending.
    pub fn neighbors(&self, p: Point2) -> Vec<NodeId> {
        let Ok(center) = self.tiling.cell_of(p) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for c in self.tiling.adjacent(center) {
            out.extend_from_slice(self.active_in_cell(c));
        }
        out.sort_unstable();
        out
    }

    pub fn add_node(&mut self, position: Point2) -> NodeId {
        let cell = self
            .tiling
            .cell_of(position)
            .expect("node position must be inside the workspace");
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            position,
            cell,
            parent: None,
            children: Vec::new(),
            status: NodeStatus::Active,
            label: None,
            cost_to_go: f64::INFINITY,
        });
        self.register(id);
        id
    }

    fn register(&mut self, id: NodeId) {
        let slot = self.tiling.linear(self.nodes[id.idx()].cell);
        let list = &mut self.registry[slot];
        if let Err(pos) = list.binary_search(&id) {
            list.insert(pos, id);
        }
    }

    fn unregister(&mut self, id: NodeId) {
        let slot = self.tiling.linear(self.nodes[id.idx()].cell);
        let list = &mut self.registry[slot];
        if let Ok(pos) = list.binary_search(&id) {
            list.remove(pos);
        }
    }

    /// Make `parent` the parent of `child`. The child must currently be
    /// parentless; edge feasibility is the caller's concern.
    pub(crate) fn attach(&mut self, child: NodeId, parent: NodeId) {
        debug_assert!(self.nodes[child.idx()].parent.is_none());
        debug_assert_ne!(child, parent);
        self.nodes[child.idx()].parent = Some(parent);
        self.nodes[parent.idx()].children.push(child);
        let len = self.position(child).distance(self.position(parent));
        if len > self.max_edge_len {
            self.max_edge_len = len;
        }
    }

    /// Sever `child` from its parent (the parent keeps its other children).
    pub(crate) fn detach(&mut self, child: NodeId) {
        if let Some(parent) = self.nodes[child.idx()].parent.take() {
            self.nodes[parent.idx()].children.retain(|c| *c != child);
        }
    }

    pub(crate) fn set_cost(&mut self, id: NodeId, cost: f64) {
        self.nodes[id.idx()].cost_to_go = cost;
    }

    pub(crate) fn set_label(&mut self, id: NodeId, label: u32) {
        self.nodes[id.idx()].label = Some((self.epoch, label));
    }

    pub(crate) fn raw_label(&self, id: NodeId) -> Option<u32> {
        match self.nodes[id.idx()].label {
            Some((epoch, label)) if epoch == self.epoch => Some(label),
            _ => None,
        }
    }

    pub(crate) fn alloc_label(&mut self) -> u32 {
        let label = self.next_label;
        self.next_label += 1;
        label
    }

    /// Invalidate all subtree labels (called once per prune).
    pub(crate) fn bump_epoch(&mut self) {
        self.epoch += 1;
        self.next_label = 1;
        let root = self.goal_root;
        self.set_label(root, GOAL_TREE);
    }

    /// Subtree index of `id`, labeling lazily: walk to the nearest labeled
    /// ancestor or to the subtree root, then stamp the walked chain.
    pub fn tree_index(&mut self, id: NodeId) -> u32 {
        if let Some(label) = self.raw_label(id) {
            return label;
        }
        let mut chain = vec![id];
        let mut cursor = id;
        let label = loop {
            match self.parent(cursor) {
                Some(p) => {
                    if let Some(label) = self.raw_label(p) {
                        break label;
                    }
                    chain.push(p);
                    cursor = p;
                }
                None => {
                    break if cursor == self.goal_root {
                        GOAL_TREE
                    } else {
                        self.alloc_label()
                    };
                }
            }
        };
        for n in chain {
            self.set_label(n, label);
        }
        label
    }

    /// True when `id` is active and currently belongs to the goal tree.
    pub fn in_goal_tree(&mut self, id: NodeId) -> bool {
        self.is_active(id) && self.tree_index(id) == GOAL_TREE
    }

    /// Remove a node from the active structure: drop it from the registry and
    /// sever every incident edge. Its children become parentless roots.
    /// Position and cell are kept for later reintegration.
    pub(crate) fn prune_node(&mut self, id: NodeId) -> Vec<NodeId> {
        debug_assert_eq!(self.status(id), NodeStatus::Active);
        self.unregister(id);
        self.detach(id);
        let children = std::mem::take(&mut self.nodes[id.idx()].children);
        for child in &children {
            self.nodes[child.idx()].parent = None;
        }
        self.nodes[id.idx()].status = NodeStatus::Pruned;
        self.nodes[id.idx()].label = None;
        if let Err(pos) = self.pruned.binary_search(&id) {
            self.pruned.insert(pos, id);
        }
        children
    }

    /// Bring a pruned node back as a child of `parent` in the goal tree.
    pub(crate) fn reactivate(&mut self, id: NodeId, parent: NodeId, cost: f64) {
        debug_assert_eq!(self.status(id), NodeStatus::Pruned);
        self.nodes[id.idx()].status = NodeStatus::Active;
        self.register(id);
        self.attach(id, parent);
        self.set_cost(id, cost);
        self.set_label(id, GOAL_TREE);
        if let Ok(pos) = self.pruned.binary_search(&id) {
            self.pruned.remove(pos);
        }
    }

    /// Reverse the parent chain of `at` so it becomes the root of its subtree.
    pub(crate) fn reroot(&mut self, at: NodeId) {
        let mut chain = vec![at];
        let mut cursor = at;
        while let Some(p) = self.parent(cursor) {
            chain.push(p);
            cursor = p;
        }
        for window in chain.windows(2) {
            let (child, parent) = (window[0], window[1]);
            self.nodes[child.idx()].parent = None;
            self.nodes[parent.idx()].children.retain(|c| *c != child);
        }
        for window in chain.windows(2) {
            let (new_parent, new_child) = (window[0], window[1]);
            self.attach(new_child, new_parent);
        }
    }

    /// Stamp `label` on the whole subtree under `root` (following children),
    /// recomputing cost-to-go along the way when joining the goal tree.
    /// Returns the visited nodes.
    pub(crate) fn absorb_subtree(&mut self, root: NodeId, label: u32, with_costs: bool) -> Vec<NodeId> {
        let mut visited = Vec::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            self.set_label(id, label);
            if with_costs {
                if let Some(p) = self.parent(id) {
                    let cost = self.cost_to_go(p) + self.position(id).distance(self.position(p));
                    self.set_cost(id, cost);
                }
            }
            visited.push(id);
            stack.extend_from_slice(self.children(id));
        }
        visited
    }

    /// Nearest active node to `p`, searching cell rings outward.
    pub fn nearest(&self, p: Point2) -> Option<NodeId> {
        let center = self.tiling.cell_of(p).ok()?;
        let max_ring = self.tiling.cols.max(self.tiling.rows);
        let mut best: Option<(f64, NodeId)> = None;
        for ring in 0..=max_ring {
            // all unscanned nodes are at least (ring - 1) * cell away
            if let Some((d, _)) = best {
                if d <= (ring as f64 - 1.0) * self.tiling.cell_size {
                    break;
                }
            }
            let mut any_cell = false;
            for c in ring_cells(&self.tiling, center, ring) {
                any_cell = true;
                for id in self.active_in_cell(c) {
                    let d = self.position(*id).distance(p);
                    if best.map_or(true, |(bd, bid)| d < bd || (d == bd && *id < bid)) {
                        best = Some((d, *id));
                    }
                }
            }
            if !any_cell && ring > 0 && best.is_some() {
                break;
            }
        }
        best.map(|(_, id)| id)
    }

    /// Structural self-check used by tests and the acceptance suite.
    pub fn check_invariants(&self) -> Result<(), String> {
        for id in self.ids() {
            let node = &self.nodes[id.idx()];
            if let Some(p) = node.parent {
                if !self.nodes[p.idx()].children.contains(&id) {
                    return Err(format!("{id:?} has parent {p:?} but is not its child"));
                }
            }
            for c in &node.children {
                if self.nodes[c.idx()].parent != Some(id) {
                    return Err(format!("{id:?} lists child {c:?} with a different parent"));
                }
            }
            match node.status {
                NodeStatus::Pruned => {
                    if node.parent.is_some() || !node.children.is_empty() {
                        return Err(format!("pruned {id:?} still has edges"));
                    }
                    if self.active_in_cell(node.cell).contains(&id) {
                        return Err(format!("pruned {id:?} still registered"));
                    }
                    if self.pruned.binary_search(&id).is_err() {
                        return Err(format!("pruned {id:?} missing from pruned set"));
                    }
                }
                NodeStatus::Active => {
                    if !self.active_in_cell(node.cell).contains(&id) {
                        return Err(format!("active {id:?} not registered in its cell"));
                    }
                    if self.pruned.binary_search(&id).is_ok() {
                        return Err(format!("active {id:?} in pruned set"));
                    }
                }
            }
        }
        // registry matches a recomputation from scratch
        let mut expect = vec![Vec::new(); self.tiling.cell_count()];
        for id in self.active_ids() {
            expect[self.tiling.linear(self.cell(id))].push(id);
        }
        if expect != self.registry {
            return Err("cell registry out of sync".into());
        }
        // active edges form a forest (no parent cycles)
        for id in self.active_ids() {
            let mut cursor = id;
            let mut steps = 0;
            while let Some(p) = self.parent(cursor) {
                cursor = p;
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(format!("parent cycle reachable from {id:?}"));
                }
            }
        }
        // goal-tree costs are consistent with the parent chain
        if self.cost_to_go(self.goal_root) != 0.0 {
            return Err("goal root cost is not zero".into());
        }
        for id in self.active_ids() {
            if self.raw_label(id) == Some(GOAL_TREE) {
                if let Some(p) = self.parent(id) {
                    let want = self.cost_to_go(p) + self.position(id).distance(self.position(p));
                    if (self.cost_to_go(id) - want).abs() > 1e-9 {
                        return Err(format!(
                            "{id:?} cost {} != parent cost + edge {}",
                            self.cost_to_go(id),
                            want
                        ));
                    }
                } else if id != self.goal_root {
                    return Err(format!("{id:?} labeled goal tree but is a detached root"));
                }
            }
        }
        Ok(())
    }
}

/// Cells at exact Chebyshev distance `ring` from `center`, clipped to the grid.
fn ring_cells(t: &Tiling, center: CellIndex, ring: usize) -> Vec<CellIndex> {
    if ring == 0 {
        return vec![center];
    }
    let r = ring as isize;
    let (cc, cr) = (center.col as isize, center.row as isize);
    let mut out = Vec::new();
    let mut push = |col: isize, row: isize| {
        if col >= 0 && row >= 0 && col < t.cols as isize && row < t.rows as isize {
            out.push(CellIndex::new(col as usize, row as usize));
        }
    };
    for col in (cc - r)..=(cc + r) {
        push(col, cr - r);
        push(col, cr + r);
    }
    for row in (cr - r + 1)..(cr + r) {
        push(cc - r, row);
        push(cc + r, row);
    }
    out
}

/// Min-heap key ordered by cost then id, with f64 total ordering.
#[derive(PartialEq)]
struct CascadeKey(f64, NodeId);

impl Eq for CascadeKey {}

impl Ord for CascadeKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| self.1.cmp(&other.1))
    }
}

impl PartialOrd for CascadeKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

const IMPROVE_EPS: f64 = 1e-12;

/// Rewiring cascade: priority-ordered relaxation over the neighbor graph
/// restricted to edges clear of the static map and of the given discs.
///
/// Seeds are goal-tree nodes whose cost may have changed (freshly merged
/// subtree nodes, typically). On termination every goal-tree node reachable
/// from the seeds carries its shortest-path cost-to-go over the feasibility
/// graph and parent pointers realize those paths.
pub fn rewire_cascade(forest: &mut Forest, map: &StaticMap, cpr: &[Disc], seeds: &[NodeId]) {
    let mut heap: BinaryHeap<Reverse<CascadeKey>> = BinaryHeap::new();
    for &s in seeds {
        if forest.is_active(s) && forest.tree_index(s) == GOAL_TREE {
            let cost = forest.cost_to_go(s);
            if cost.is_finite() {
                heap.push(Reverse(CascadeKey(cost, s)));
            }
        }
    }
    while let Some(Reverse(CascadeKey(key, id))) = heap.pop() {
        if !forest.is_active(id) || key > forest.cost_to_go(id) + IMPROVE_EPS {
            continue; // stale entry
        }
        let pos = forest.position(id);
        let neighbors: Vec<NodeId> = forest
            .neighbors(pos)
            .into_iter()
            .filter(|m| *m != id && forest.tree_index(*m) == GOAL_TREE)
            .collect();
        // pull: adopt the best feasible parent among the neighbors
        if id != forest.goal_root() {
            let mut best: Option<(f64, NodeId)> = None;
            for &m in &neighbors {
                let c = forest.cost_to_go(m);
                if !c.is_finite() {
                    continue;
                }
                let tentative = c + pos.distance(forest.position(m));
                if tentative < forest.cost_to_go(id) - IMPROVE_EPS
                    && best.map_or(true, |(bc, _)| tentative < bc)
                    && edge_feasible(map, cpr, pos, forest.position(m))
                {
                    best = Some((tentative, m));
                }
            }
            if let Some((cost, parent)) = best {
                forest.detach(id);
                forest.attach(id, parent);
                forest.set_cost(id, cost);
            }
        }
        // push: relax the neighbors through this node
        let own_cost = forest.cost_to_go(id);
        if !own_cost.is_finite() {
            continue;
        }
        for &m in &neighbors {
            if m == forest.goal_root() {
                continue;
            }
            let m_pos = forest.position(m);
            let tentative = own_cost + pos.distance(m_pos);
            if tentative < forest.cost_to_go(m) - IMPROVE_EPS && edge_feasible(map, cpr, pos, m_pos)
            {
                forest.detach(m);
                forest.attach(m, id);
                forest.set_cost(m, tentative);
                heap.push(Reverse(CascadeKey(tentative, m)));
            }
        }
    }
}

/// Add pruned nodes back and merge leftover disjoint subtrees into the goal
/// tree wherever a feasible straight edge to a goal-tree neighbor exists.
/// Nodes with no feasible attachment stay as they are and are retried at the
/// next replanning.
pub fn reintegrate(forest: &mut Forest, map: &StaticMap, cpr: &[Disc]) {
    // pruned nodes first: each attaches to the active goal-tree neighbor
    // minimizing the resulting cost-to-go
    let pruned: Vec<NodeId> = forest.pruned_ids().to_vec();
    for id in pruned {
        let pos = forest.position(id);
        if let Some((cost, parent)) = best_goal_tree_attachment(forest, map, cpr, pos, Some(id)) {
            forest.reactivate(id, parent, cost);
        }
    }
    // then leftover subtree roots, attached by a straight line from the root
    let roots: Vec<NodeId> = forest
        .active_ids()
        .filter(|id| forest.parent(*id).is_none() && *id != forest.goal_root())
        .collect();
    for root in roots {
        let pos = forest.position(root);
        if let Some((cost, parent)) = best_goal_tree_attachment(forest, map, cpr, pos, Some(root)) {
            forest.attach(root, parent);
            forest.set_cost(root, cost);
            forest.absorb_subtree(root, GOAL_TREE, true);
        }
    }
}

/// Cheapest feasible attachment of `pos` to an active goal-tree neighbor:
/// minimizes neighbor cost-to-go + edge length, ties to the lower id.
pub(crate) fn best_goal_tree_attachment(
    forest: &mut Forest,
    map: &StaticMap,
    cpr: &[Disc],
    pos: Point2,
    exclude: Option<NodeId>,
) -> Option<(f64, NodeId)> {
    let mut best: Option<(f64, NodeId)> = None;
    for m in forest.neighbors(pos) {
        if Some(m) == exclude || forest.tree_index(m) != GOAL_TREE {
            continue;
        }
        let c = forest.cost_to_go(m);
        if !c.is_finite() {
            continue;
        }
        let total = c + pos.distance(forest.position(m));
        if best.map_or(true, |(bc, _)| total < bc)
            && edge_feasible(map, cpr, pos, forest.position(m))
        {
            best = Some((total, m));
        }
    }
    best
}

/// RRT* construction of the initial goal-rooted tree, followed by a coverage
/// pass that keeps extending toward every still-empty free cell (at least one
/// node per free cell, where reachable) and a final cascade that leaves
/// costs shortest-path-consistent over the neighbor graph.
pub fn build_initial_tree(
    map: &StaticMap,
    goal: Point2,
    n_samples: usize,
    step: f64,
    rng_seed: u64,
) -> Result<Forest, TreeError> {
    let tiling = *map.tiling();
    let goal_cell = tiling
        .cell_of(goal)
        .map_err(|_| TreeError::GoalOutsideWorkspace(goal.x, goal.y))?;
    if map.is_occupied(goal_cell) {
        return Err(TreeError::GoalOccupied(goal_cell.col, goal_cell.row));
    }
    let mut forest = Forest::new(tiling, goal)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    for _ in 0..n_samples {
        let target = sample_workspace(&tiling, &mut rng);
        extend_once(&mut forest, map, target, step);
    }

    // coverage pass: sample inside uncovered free cells and grow toward them
    let free: Vec<CellIndex> = map.free_cells().collect();
    for cell in free {
        if !forest.active_in_cell(cell).is_empty() {
            continue;
        }
        let mut covered = false;
        for _ in 0..20 {
            let target = sample_in_cell(&tiling, cell, &mut rng);
            // connect-style: keep stepping toward the sample until blocked
            let mut guard = 0;
            while guard < 4 * (tiling.cols + tiling.rows) {
                guard += 1;
                match extend_once(&mut forest, map, target, step) {
                    Some(new_id) => {
                        if forest.cell(new_id) == cell {
                            covered = true;
                            break;
                        }
                        if forest.position(new_id) == target {
                            break;
                        }
                    }
                    None => break,
                }
            }
            if covered || !forest.active_in_cell(cell).is_empty() {
                covered = true;
                break;
            }
        }
        if !covered {
            log::warn!(
                "initial tree: free cell ({}, {}) left uncovered after 20 attempts",
                cell.col,
                cell.row
            );
        }
    }

    // settle costs to shortest paths over the neighbor graph
    let seeds: Vec<NodeId> = forest.active_ids().collect();
    rewire_cascade(&mut forest, map, &[], &seeds);
    Ok(forest)
}

fn sample_workspace(t: &Tiling, rng: &mut ChaCha8Rng) -> Point2 {
    Point2::new(
        rng.random_range(t.origin.x..t.origin.x + t.width),
        rng.random_range(t.origin.y..t.origin.y + t.height),
    )
}

fn sample_in_cell(t: &Tiling, c: CellIndex, rng: &mut ChaCha8Rng) -> Point2 {
    let x0 = t.origin.x + c.col as f64 * t.cell_size;
    let y0 = t.origin.y + c.row as f64 * t.cell_size;
    // clip to the workspace for boundary cells of non-integral grids
    let x1 = (x0 + t.cell_size).min(t.origin.x + t.width);
    let y1 = (y0 + t.cell_size).min(t.origin.y + t.height);
    Point2::new(rng.random_range(x0..x1), rng.random_range(y0..y1))
}

/// One RRT* extension toward `target`: steer from the nearest node, choose
/// the cheapest feasible parent among cell neighbors, then rewire neighbors
/// through the new node. Returns the new node on success.
fn extend_once(forest: &mut Forest, map: &StaticMap, target: Point2, step: f64) -> Option<NodeId> {
    let nearest = forest.nearest(target)?;
    let from = forest.position(nearest);
    let dist = from.distance(target);
    let q = if dist <= step {
        target
    } else {
        Point2::new(
            from.x + (target.x - from.x) * step / dist,
            from.y + (target.y - from.y) * step / dist,
        )
    };
    if dist == 0.0 {
        return None;
    }
    let cell = forest.tiling().cell_of(q).ok()?;
    if map.is_occupied(cell) {
        return None;
    }
    // cheapest feasible parent among the 3x3 neighbors
    let mut best: Option<(f64, NodeId)> = None;
    for m in forest.neighbors(q) {
        let c = forest.cost_to_go(m);
        if !c.is_finite() {
            continue;
        }
        let total = c + q.distance(forest.position(m));
        if best.map_or(true, |(bc, _)| total < bc)
            && edge_feasible(map, &[], q, forest.position(m))
        {
            best = Some((total, m));
        }
    }
    let (cost, parent) = best?;
    let id = forest.add_node(q);
    forest.attach(id, parent);
    forest.set_cost(id, cost);
    forest.set_label(id, GOAL_TREE);
    // rewire neighbors through the new node where that helps
    for m in forest.neighbors(q) {
        if m == id || m == forest.goal_root() {
            continue;
        }
        let m_pos = forest.position(m);
        let tentative = cost + q.distance(m_pos);
        if tentative < forest.cost_to_go(m) - IMPROVE_EPS && edge_feasible(map, &[], q, m_pos) {
            forest.detach(m);
            forest.attach(m, id);
            forest.set_cost(m, tentative);
            let delta_nodes = forest.absorb_subtree(m, GOAL_TREE, true);
            debug_assert!(!delta_nodes.is_empty());
        }
    }
    Some(id)
}
