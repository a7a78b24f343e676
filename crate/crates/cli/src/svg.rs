//! Standalone SVG snapshots of a trace tick: static cells, the tree colored
//! by connected component, risk circles when the tick replanned, the current
//! path, and the agents.

use crate::trace::Scene;
use std::collections::BTreeMap;
use std::fmt::Write as _;

const TREE_PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22",
];

pub fn render(scene: &Scene) -> String {
    let w = scene.width;
    let h = scene.height;
    let slim = (w.max(h) / 640.0).max(0.01); // hairline in world units
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" width="800" height="{:.0}">"#,
        800.0 * h / w
    );
    // flip to y-up world coordinates
    let _ = writeln!(svg, r#"<g transform="translate(0,{h}) scale(1,-1)">"#);
    let _ = writeln!(
        svg,
        r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##
    );

    let _ = writeln!(svg, r##"<g id="static" fill="#444444">"##);
    for (row, cells) in scene.static_rows.iter().enumerate() {
        for (col, ch) in cells.chars().enumerate() {
            if ch == '#' {
                let _ = writeln!(
                    svg,
                    r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
                    col as f64 * scene.cell_size,
                    row as f64 * scene.cell_size,
                    scene.cell_size,
                    scene.cell_size
                );
            }
        }
    }
    let _ = writeln!(svg, "</g>");

    // tree edges colored by connected component
    let _ = writeln!(svg, r#"<g id="tree" fill="none" stroke-width="{slim}">"#);
    let components = color_components(scene);
    for (ka, kb) in &scene.edges {
        let color = TREE_PALETTE[components[ka] % TREE_PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}"/>"#,
            f64::from_bits(ka.0),
            f64::from_bits(ka.1),
            f64::from_bits(kb.0),
            f64::from_bits(kb.1)
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g id="risk" fill="none">"#);
    for c in &scene.ohz {
        let _ = writeln!(
            svg,
            r##"<circle cx="{}" cy="{}" r="{}" stroke="#e8a33d" stroke-width="{slim}"/>"##,
            c.x, c.y, c.r
        );
    }
    for c in &scene.cpr {
        let _ = writeln!(
            svg,
            r##"<circle cx="{}" cy="{}" r="{}" fill="rgba(214,39,40,0.25)" stroke="#d62728" stroke-width="{slim}"/>"##,
            c.x, c.y, c.r
        );
    }
    if let Some(c) = &scene.lrz {
        let _ = writeln!(
            svg,
            r##"<circle cx="{}" cy="{}" r="{}" stroke="#1f77b4" stroke-dasharray="{} {}" stroke-width="{slim}"/>"##,
            c.x,
            c.y,
            c.r,
            4.0 * slim,
            4.0 * slim
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(
        svg,
        r##"<g id="path" fill="none" stroke="#2ca02c" stroke-width="{}">"##,
        3.0 * slim
    );
    if scene.path.len() >= 2 {
        let mut points = String::new();
        for p in &scene.path {
            let _ = write!(points, "{},{} ", p.x, p.y);
        }
        let _ = writeln!(svg, r#"<polyline points="{}"/>"#, points.trim_end());
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g id="agents">"#);
    for (id, p) in &scene.obstacles {
        let r = scene.obstacle_radius.get(id).copied().unwrap_or(0.5);
        let _ = writeln!(
            svg,
            r##"<circle cx="{}" cy="{}" r="{r}" fill="#555555" stroke="#222222" stroke-width="{slim}"/>"##,
            p.x, p.y
        );
    }
    let _ = writeln!(
        svg,
        r##"<circle id="cobot" cx="{}" cy="{}" r="{}" fill="#1f77b4" stroke="#0b3d62" stroke-width="{slim}"/>"##,
        scene.cobot.x, scene.cobot.y, scene.r_robot
    );
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");
    svg
}

/// Union-find over edge endpoints; maps every endpoint to a component index
/// (numbered by first appearance for stable colors).
fn color_components(scene: &Scene) -> BTreeMap<(u64, u64), usize> {
    let mut parent: BTreeMap<(u64, u64), (u64, u64)> = BTreeMap::new();
    fn find(
        parent: &mut BTreeMap<(u64, u64), (u64, u64)>,
        x: (u64, u64),
    ) -> (u64, u64) {
        let p = *parent.entry(x).or_insert(x);
        if p == x {
            return x;
        }
        let root = find(parent, p);
        parent.insert(x, root);
        root
    }
    for (a, b) in &scene.edges {
        let ra = find(&mut parent, *a);
        let rb = find(&mut parent, *b);
        if ra != rb {
            parent.insert(ra, rb);
        }
    }
    let mut component = BTreeMap::new();
    let mut order: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for (a, b) in &scene.edges {
        for k in [*a, *b] {
            let root = find(&mut parent, k);
            let next = order.len();
            let idx = *order.entry(root).or_insert(next);
            component.insert(k, idx);
        }
    }
    component
}
