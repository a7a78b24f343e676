//! Line-oriented replay traces.
//!
//! One record per line; floats printed with six decimals so traces diff
//! cleanly. A trace carries everything a snapshot needs: the static map,
//! per-tick robot and obstacle positions, path updates, and the tree edge
//! deltas plus risk circles at every replan.

use smart_core::geometry::Point2;
use smart_core::sim::{ObstacleSim, ReplanTrace, ScenarioConfig, TraceSink};
use smart_core::tree::Forest;
use smart_core::world::{CellIndex, StaticMap};
use smart_core::Trajectory;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

/// Sink that renders records into a string buffer.
#[derive(Default)]
pub struct TraceWriter {
    pub buffer: String,
}

impl TraceWriter {
    pub fn new() -> Self {
        Self::default()
    }
}

fn f(v: f64) -> String {
    format!("{v:.6}")
}

impl TraceSink for TraceWriter {
    fn meta(&mut self, map: &StaticMap, cfg: &ScenarioConfig) {
        let t = map.tiling();
        let _ = writeln!(
            self.buffer,
            "META {} {} {} {} {}",
            f(t.width),
            f(t.height),
            f(t.cell_size),
            f(cfg.cobot_radius),
            f(cfg.cobot_speed)
        );
        for row in 0..t.rows {
            let mut line = String::with_capacity(t.cols);
            for col in 0..t.cols {
                line.push(if map.is_occupied(CellIndex::new(col, row)) {
                    '#'
                } else {
                    '.'
                });
            }
            let _ = writeln!(self.buffer, "STATICROW {row} {line}");
        }
        for i in 0..cfg.obstacle_count {
            let _ = writeln!(self.buffer, "OBSMETA {i} {}", f(cfg.obstacle_radius));
        }
    }

    fn initial_tree(&mut self, t: f64, forest: &Forest) {
        for id in forest.active_ids() {
            if let Some(p) = forest.parent(id) {
                let a = forest.position(id);
                let b = forest.position(p);
                let _ = writeln!(
                    self.buffer,
                    "EDGE+ {} {} {} {} {}",
                    f(t),
                    f(a.x),
                    f(a.y),
                    f(b.x),
                    f(b.y)
                );
            }
        }
    }

    fn tick(&mut self, t: f64, cobot: Point2, obstacles: &[ObstacleSim]) {
        let _ = writeln!(self.buffer, "TICK {} {} {}", f(t), f(cobot.x), f(cobot.y));
        for o in obstacles {
            let _ = writeln!(
                self.buffer,
                "OBS {} {} {}",
                o.state.id,
                f(o.state.position.x),
                f(o.state.position.y)
            );
        }
    }

    fn path(&mut self, t: f64, traj: &Trajectory) {
        let mut line = format!("PATH {}", f(t));
        for w in &traj.waypoints {
            let _ = write!(line, " {} {}", f(w.x), f(w.y));
        }
        let _ = writeln!(self.buffer, "{line}");
    }

    fn replan(&mut self, t: f64, info: &ReplanTrace) {
        let _ = writeln!(
            self.buffer,
            "REPLAN {} {} {}",
            f(t),
            f(info.charged_ms),
            info.final_l
        );
        let _ = writeln!(
            self.buffer,
            "RISK {} {} {} {}",
            f(t),
            f(info.lrz.center.x),
            f(info.lrz.center.y),
            f(info.lrz.radius)
        );
        for (id, d) in &info.ohz {
            let _ = writeln!(
                self.buffer,
                "OHZ {} {} {} {} {}",
                f(t),
                id,
                f(d.center.x),
                f(d.center.y),
                f(d.radius)
            );
        }
        for d in &info.cpr {
            let _ = writeln!(
                self.buffer,
                "CPR {} {} {} {}",
                f(t),
                f(d.center.x),
                f(d.center.y),
                f(d.radius)
            );
        }
        for (a, b) in &info.edges_removed {
            let _ = writeln!(
                self.buffer,
                "EDGE- {} {} {} {} {}",
                f(t),
                f(a.x),
                f(a.y),
                f(b.x),
                f(b.y)
            );
        }
        for (a, b) in &info.edges_added {
            let _ = writeln!(
                self.buffer,
                "EDGE+ {} {} {} {} {}",
                f(t),
                f(a.x),
                f(a.y),
                f(b.x),
                f(b.y)
            );
        }
    }

    fn wants_edges(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Meta {
        width: f64,
        height: f64,
        cell_size: f64,
        r_robot: f64,
        v_robot: f64,
    },
    StaticRow {
        row: usize,
        cells: String,
    },
    ObsMeta {
        id: u32,
        radius: f64,
    },
    Tick {
        t: f64,
        x: f64,
        y: f64,
    },
    Obs {
        id: u32,
        x: f64,
        y: f64,
    },
    Path {
        t: f64,
        points: Vec<Point2>,
    },
    Replan {
        t: f64,
        duration_ms: f64,
        l_final: usize,
    },
    Risk {
        t: f64,
        x: f64,
        y: f64,
        r: f64,
    },
    Ohz {
        t: f64,
        id: u32,
        x: f64,
        y: f64,
        r: f64,
    },
    Cpr {
        t: f64,
        x: f64,
        y: f64,
        r: f64,
    },
    EdgeAdd {
        t: f64,
        a: Point2,
        b: Point2,
    },
    EdgeDel {
        t: f64,
        a: Point2,
        b: Point2,
    },
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<Record>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

/// Reconstructed world state at one tick, ready to render.
#[derive(Debug, Clone)]
pub struct Scene {
    pub width: f64,
    pub height: f64,
    pub cell_size: f64,
    pub r_robot: f64,
    pub t: f64,
    pub static_rows: Vec<String>,
    pub cobot: Point2,
    pub obstacles: Vec<(u32, Point2)>,
    pub obstacle_radius: BTreeMap<u32, f64>,
    pub edges: BTreeSet<((u64, u64), (u64, u64))>,
    pub path: Vec<Point2>,
    /// Risk circles, present when this tick replanned.
    pub lrz: Option<Circle>,
    pub ohz: Vec<Circle>,
    pub cpr: Vec<Circle>,
}

fn parse_floats(fields: &[&str]) -> Result<Vec<f64>, String> {
    fields
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| format!("bad number `{s}`")))
        .collect()
}

impl Trace {
    pub fn parse(text: &str) -> Result<Trace, String> {
        let mut records = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let tag = it.next().unwrap();
            let rest: Vec<&str> = it.collect();
            let err = |msg: &str| format!("line {}: {msg}", lineno + 1);
            let record = match tag {
                "META" => {
                    let v = parse_floats(&rest).map_err(|e| err(&e))?;
                    if v.len() != 5 {
                        return Err(err("META wants 5 fields"));
                    }
                    Record::Meta {
                        width: v[0],
                        height: v[1],
                        cell_size: v[2],
                        r_robot: v[3],
                        v_robot: v[4],
                    }
                }
                "STATICROW" => {
                    if rest.len() != 2 {
                        return Err(err("STATICROW wants 2 fields"));
                    }
                    Record::StaticRow {
                        row: rest[0].parse().map_err(|_| err("bad row"))?,
                        cells: rest[1].to_string(),
                    }
                }
                "OBSMETA" => {
                    if rest.len() != 2 {
                        return Err(err("OBSMETA wants 2 fields"));
                    }
                    Record::ObsMeta {
                        id: rest[0].parse().map_err(|_| err("bad id"))?,
                        radius: rest[1].parse().map_err(|_| err("bad radius"))?,
                    }
                }
                "TICK" => {
                    let v = parse_floats(&rest).map_err(|e| err(&e))?;
                    if v.len() != 3 {
                        return Err(err("TICK wants 3 fields"));
                    }
                    Record::Tick {
                        t: v[0],
                        x: v[1],
                        y: v[2],
                    }
                }
                "OBS" => {
                    if rest.len() != 3 {
                        return Err(err("OBS wants 3 fields"));
                    }
                    Record::Obs {
                        id: rest[0].parse().map_err(|_| err("bad id"))?,
                        x: rest[1].parse().map_err(|_| err("bad x"))?,
                        y: rest[2].parse().map_err(|_| err("bad y"))?,
                    }
                }
                "PATH" => {
                    let v = parse_floats(&rest).map_err(|e| err(&e))?;
                    if v.len() < 3 || (v.len() - 1) % 2 != 0 {
                        return Err(err("PATH wants t plus coordinate pairs"));
                    }
                    Record::Path {
                        t: v[0],
                        points: v[1..]
                            .chunks(2)
                            .map(|c| Point2::new(c[0], c[1]))
                            .collect(),
                    }
                }
                "REPLAN" => {
                    if rest.len() != 3 {
                        return Err(err("REPLAN wants 3 fields"));
                    }
                    Record::Replan {
                        t: rest[0].parse().map_err(|_| err("bad t"))?,
                        duration_ms: rest[1].parse().map_err(|_| err("bad duration"))?,
                        l_final: rest[2].parse().map_err(|_| err("bad l"))?,
                    }
                }
                "RISK" => {
                    let v = parse_floats(&rest).map_err(|e| err(&e))?;
                    if v.len() != 4 {
                        return Err(err("RISK wants 4 fields"));
                    }
                    Record::Risk {
                        t: v[0],
                        x: v[1],
                        y: v[2],
                        r: v[3],
                    }
                }
                "OHZ" => {
                    if rest.len() != 5 {
                        return Err(err("OHZ wants 5 fields"));
                    }
                    Record::Ohz {
                        t: rest[0].parse().map_err(|_| err("bad t"))?,
                        id: rest[1].parse().map_err(|_| err("bad id"))?,
                        x: rest[2].parse().map_err(|_| err("bad x"))?,
                        y: rest[3].parse().map_err(|_| err("bad y"))?,
                        r: rest[4].parse().map_err(|_| err("bad r"))?,
                    }
                }
                "CPR" => {
                    let v = parse_floats(&rest).map_err(|e| err(&e))?;
                    if v.len() != 4 {
                        return Err(err("CPR wants 4 fields"));
                    }
                    Record::Cpr {
                        t: v[0],
                        x: v[1],
                        y: v[2],
                        r: v[3],
                    }
                }
                "EDGE+" | "EDGE-" => {
                    let v = parse_floats(&rest).map_err(|e| err(&e))?;
                    if v.len() != 5 {
                        return Err(err("EDGE wants 5 fields"));
                    }
                    let a = Point2::new(v[1], v[2]);
                    let b = Point2::new(v[3], v[4]);
                    if tag == "EDGE+" {
                        Record::EdgeAdd { t: v[0], a, b }
                    } else {
                        Record::EdgeDel { t: v[0], a, b }
                    }
                }
                _ => return Err(err(&format!("unknown record `{tag}`"))),
            };
            records.push(record);
        }
        if records.is_empty() {
            return Err("empty trace".into());
        }
        Ok(Trace { records })
    }

    pub fn tick_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| matches!(r, Record::Tick { .. }))
            .count()
    }

    /// Replay up to (and including) tick `index`.
    pub fn scene_at(&self, index: usize) -> Result<Scene, String> {
        let mut scene = Scene {
            width: 0.0,
            height: 0.0,
            cell_size: 1.0,
            r_robot: 0.5,
            t: 0.0,
            static_rows: Vec::new(),
            cobot: Point2::new(0.0, 0.0),
            obstacles: Vec::new(),
            obstacle_radius: BTreeMap::new(),
            edges: BTreeSet::new(),
            path: Vec::new(),
            lrz: None,
            ohz: Vec::new(),
            cpr: Vec::new(),
        };
        let key = |p: Point2| (p.x.to_bits(), p.y.to_bits());
        let mut seen = None::<usize>;
        for record in &self.records {
            if let Record::Tick { .. } = record {
                let next = seen.map_or(0, |k| k + 1);
                if next > index {
                    break;
                }
                seen = Some(next);
            }
            let at_target = seen == Some(index);
            match record {
                Record::Meta {
                    width,
                    height,
                    cell_size,
                    r_robot,
                    ..
                } => {
                    scene.width = *width;
                    scene.height = *height;
                    scene.cell_size = *cell_size;
                    scene.r_robot = *r_robot;
                }
                Record::StaticRow { row, cells } => {
                    if scene.static_rows.len() <= *row {
                        scene.static_rows.resize(row + 1, String::new());
                    }
                    scene.static_rows[*row] = cells.clone();
                }
                Record::ObsMeta { id, radius } => {
                    scene.obstacle_radius.insert(*id, *radius);
                }
                Record::Tick { t, x, y } => {
                    scene.t = *t;
                    scene.cobot = Point2::new(*x, *y);
                    scene.obstacles.clear();
                    scene.lrz = None;
                    scene.ohz.clear();
                    scene.cpr.clear();
                }
                Record::Obs { id, x, y } => {
                    scene.obstacles.push((*id, Point2::new(*x, *y)));
                }
                Record::Path { points, .. } => {
                    scene.path = points.clone();
                }
                Record::Replan { .. } => {}
                Record::Risk { x, y, r, .. } => {
                    if at_target {
                        scene.lrz = Some(Circle {
                            x: *x,
                            y: *y,
                            r: *r,
                        });
                    }
                }
                Record::Ohz { x, y, r, .. } => {
                    if at_target {
                        scene.ohz.push(Circle {
                            x: *x,
                            y: *y,
                            r: *r,
                        });
                    }
                }
                Record::Cpr { x, y, r, .. } => {
                    if at_target {
                        scene.cpr.push(Circle {
                            x: *x,
                            y: *y,
                            r: *r,
                        });
                    }
                }
                Record::EdgeAdd { a, b, .. } => {
                    let (ka, kb) = (key(*a), key(*b));
                    scene.edges.insert(if ka <= kb { (ka, kb) } else { (kb, ka) });
                }
                Record::EdgeDel { a, b, .. } => {
                    let (ka, kb) = (key(*a), key(*b));
                    scene.edges.remove(&if ka <= kb { (ka, kb) } else { (kb, ka) });
                }
            }
        }
        match seen {
            Some(k) if k == index => Ok(scene),
            _ => Err(format!(
                "tick {index} out of range (trace has {} ticks)",
                self.tick_count()
            )),
        }
    }
}
