//! Ternary diagrams of aggregated posteriors.
//!
//! Two selected classes `a` and `b` keep their posteriors and all remaining
//! classes are pooled into a third part, giving a composition
//! `(p_a, p_b, p_rest)` on the 2-simplex. Knowing only `p_rest`, the largest
//! remaining class posterior can lie anywhere in `[p_rest / (G - 2), p_rest]`,
//! which splits the simplex into three regions with a certain winner and one
//! uncertain region.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const H: f64 = 0.866_025_403_784_438_6; // sqrt(3) / 2
/// Slack applied at region boundaries; certain regions are open.
const EDGE_TOL: f64 = 1e-12;

pub const WIDTH: f64 = 600.0;
pub const HEIGHT: f64 = 560.0;
const SIDE: f64 = 440.0;
const ORIGIN_X: f64 = 40.0;
const ORIGIN_Y: f64 = 470.0;

const PALETTE: [&str; 10] = [
    "#000000", "#e41a1c", "#4daf4a", "#377eb8", "#984ea3", "#ff7f00", "#a65628", "#f781bf", "#999999", "#17becf",
];

/// Barycentric `(p_a, p_b, p_rest)`.
pub type Composition = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct TernaryPoint {
    pub composition: Composition,
    /// Class code of the observation.
    pub true_class: usize,
    pub u: f64,
    pub v: f64,
}

/// Planar position with `a` at (0, 0), `b` at (1, 0) and the pooled rest at
/// the apex (1/2, sqrt(3)/2).
pub fn to_planar(c: Composition) -> (f64, f64) {
    (c[1] + 0.5 * c[2], H * c[2])
}

pub fn ternary_compose(posterior: &[f64], a: usize, b: usize, true_class: usize) -> Result<TernaryPoint> {
    let g = posterior.len();
    if a == b || a >= g || b >= g {
        return Err(Error::InvalidPair(a, b));
    }
    let total: f64 = posterior.iter().sum();
    if (total - 1.0).abs() > 1e-9 || posterior.iter().any(|&p| p.is_nan() || p < 0.0) {
        return Err(Error::InvalidPosterior(format!("entries sum to {total}")));
    }
    let rest: f64 = posterior
        .iter()
        .enumerate()
        .filter(|(g, _)| *g != a && *g != b)
        .map(|(_, p)| p)
        .sum();
    let composition = [posterior[a], posterior[b], rest];
    let (u, v) = to_planar(composition);
    Ok(TernaryPoint {
        composition,
        true_class,
        u,
        v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    CertainA,
    CertainB,
    CertainRest,
    Uncertain,
}

/// Region of a composition for `n_classes` classes in total.
pub fn region_of(c: Composition, n_classes: usize) -> Region {
    let [pa, pb, pr] = c;
    let others = n_classes.saturating_sub(2).max(1) as f64;
    if pa > pb + EDGE_TOL && pa > pr + EDGE_TOL {
        Region::CertainA
    } else if pb > pa + EDGE_TOL && pb > pr + EDGE_TOL {
        Region::CertainB
    } else if others * pa.max(pb) < pr - EDGE_TOL {
        Region::CertainRest
    } else {
        Region::Uncertain
    }
}

/// The four regions as simplex polygons (barycentric vertices).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPolygons {
    pub certain_a: Vec<Composition>,
    pub certain_b: Vec<Composition>,
    pub certain_rest: Vec<Composition>,
    /// Empty for three classes.
    pub uncertain: Vec<Composition>,
}

struct Corners {
    centroid: Composition,
    mid_ab: Composition,
    mid_a_rest: Composition,
    mid_b_rest: Composition,
    rest_a: Composition,
    rest_b: Composition,
    rest_inner: Composition,
}

fn corners(n_classes: usize) -> Corners {
    let m = (n_classes - 2) as f64;
    Corners {
        centroid: [1.0 / 3.0; 3],
        mid_ab: [0.5, 0.5, 0.0],
        mid_a_rest: [0.5, 0.0, 0.5],
        mid_b_rest: [0.0, 0.5, 0.5],
        rest_a: [1.0 / (m + 1.0), 0.0, m / (m + 1.0)],
        rest_b: [0.0, 1.0 / (m + 1.0), m / (m + 1.0)],
        rest_inner: [1.0 / (m + 2.0), 1.0 / (m + 2.0), m / (m + 2.0)],
    }
}

pub fn region_polygons(n_classes: usize) -> Result<RegionPolygons> {
    if n_classes < 3 {
        return Err(Error::TooFewClassesForPlot(n_classes));
    }
    let c = corners(n_classes);
    let uncertain = if n_classes == 3 {
        Vec::new()
    } else {
        vec![c.mid_a_rest, c.centroid, c.mid_b_rest, c.rest_b, c.rest_inner, c.rest_a]
    };
    Ok(RegionPolygons {
        certain_a: vec![[1.0, 0.0, 0.0], c.mid_ab, c.centroid, c.mid_a_rest],
        certain_b: vec![[0.0, 1.0, 0.0], c.mid_b_rest, c.centroid, c.mid_ab],
        certain_rest: vec![[0.0, 0.0, 1.0], c.rest_a, c.rest_inner, c.rest_b],
        uncertain,
    })
}

/// Compositions whose winner cannot be told from `(p_a, p_b, p_rest)`.
pub fn uncertainty_region(n_classes: usize) -> Result<Vec<Composition>> {
    Ok(region_polygons(n_classes)?.uncertain)
}

/// Planar area of a simple polygon; the full simplex has area sqrt(3)/4.
pub fn polygon_area(poly: &[Composition]) -> f64 {
    let pts: Vec<(f64, f64)> = poly.iter().map(|&c| to_planar(c)).collect();
    let n = pts.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum();
    twice.abs() / 2.0
}

pub fn simplex_area() -> f64 {
    H / 2.0
}

/// Dashed classification boundaries: the a/b split running up to the
/// certain-rest region, the edges of the certain-a/b regions and, for more
/// than three classes, the edge of the certain-rest region.
pub fn decision_segments(n_classes: usize) -> Vec<[Composition; 2]> {
    let c = corners(n_classes);
    let mut segs = vec![
        [c.mid_ab, c.rest_inner],
        [c.centroid, c.mid_a_rest],
        [c.centroid, c.mid_b_rest],
    ];
    if n_classes > 3 {
        segs.push([c.rest_a, c.rest_inner]);
        segs.push([c.rest_inner, c.rest_b]);
    }
    segs
}

#[derive(Debug, Clone, PartialEq)]
pub struct TernaryDiagram {
    pub a: usize,
    pub b: usize,
    pub n_classes: usize,
    /// Display names by class code.
    pub class_names: Vec<String>,
    pub points: Vec<TernaryPoint>,
    pub regions: RegionPolygons,
    pub segments: Vec<[Composition; 2]>,
}

impl TernaryDiagram {
    pub fn new(a: usize, b: usize, class_names: Vec<String>, points: Vec<TernaryPoint>) -> Result<Self> {
        let n_classes = class_names.len();
        if a == b || a >= n_classes || b >= n_classes {
            return Err(Error::InvalidPair(a, b));
        }
        Ok(Self {
            a,
            b,
            n_classes,
            regions: region_polygons(n_classes)?,
            segments: decision_segments(n_classes),
            class_names,
            points,
        })
    }

    /// Diagram of the rows of `dump` with the given roles.
    pub fn from_dump(dump: &PosteriorDump, a: usize, b: usize, class_names: Vec<String>, roles: &[Role]) -> Result<Self> {
        if class_names.len() != dump.n_classes {
            return Err(Error::DimensionMismatch {
                expected: dump.n_classes,
                found: class_names.len(),
            });
        }
        let points = dump
            .rows
            .iter()
            .filter(|r| roles.contains(&r.role))
            .map(|r| ternary_compose(&r.posterior, a, b, r.true_class))
            .collect::<Result<Vec<_>>>()?;
        Self::new(a, b, class_names, points)
    }
}

fn screen(c: Composition) -> (f64, f64) {
    let (u, v) = to_planar(c);
    (ORIGIN_X + SIDE * u, ORIGIN_Y - SIDE * v)
}

fn points_attr(poly: &[Composition]) -> String {
    poly.iter()
        .map(|&c| {
            let (x, y) = screen(c);
            format!("{x:.2},{y:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Screen corners of the simplex: a, b, rest.
pub fn triangle_corners() -> [(f64, f64); 3] {
    [screen([1.0, 0.0, 0.0]), screen([0.0, 1.0, 0.0]), screen([0.0, 0.0, 1.0])]
}

/// The diagram body in a 600 x 560 frame, without document wrapper or legend.
pub fn panel_svg(d: &TernaryDiagram) -> String {
    let mut s = String::new();
    s.push_str("<g class=\"ternary\">\n");
    let regions = [
        ("certain-a", &d.regions.certain_a),
        ("certain-b", &d.regions.certain_b),
        ("certain-rest", &d.regions.certain_rest),
    ];
    for (name, poly) in regions {
        let _ = writeln!(s, "<polygon class=\"region {name}\" points=\"{}\" fill=\"white\" stroke=\"none\"/>", points_attr(poly));
    }
    if !d.regions.uncertain.is_empty() {
        let _ = writeln!(
            s,
            "<polygon class=\"region uncertain\" points=\"{}\" fill=\"#d4d4d4\" stroke=\"none\"/>",
            points_attr(&d.regions.uncertain)
        );
    }
    for step in 1..5 {
        let t = step as f64 * 0.2;
        let (x0, y0) = screen([t, 1.0 - t, 0.0]);
        let (x1, y1) = screen([t, 0.0, 1.0 - t]);
        let _ = writeln!(
            s,
            "<line class=\"grid\" x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y1:.2}\" stroke=\"#9a9a9a\" stroke-width=\"0.8\" stroke-dasharray=\"3,3\"/>"
        );
        let _ = writeln!(
            s,
            "<text class=\"grid-label\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\" fill=\"#606060\">{t:.1}</text>",
            x1 - 6.0,
            y1 + 4.0
        );
    }
    for [p, q] in &d.segments {
        let (x0, y0) = screen(*p);
        let (x1, y1) = screen(*q);
        let _ = writeln!(
            s,
            "<line class=\"decision\" x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y1:.2}\" stroke=\"black\" stroke-width=\"1.2\" stroke-dasharray=\"6,4\"/>"
        );
    }
    let outline = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let _ = writeln!(
        s,
        "<polygon class=\"simplex\" points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>",
        points_attr(&outline)
    );
    let [ca, cb, cr] = triangle_corners();
    let _ = writeln!(
        s,
        "<text class=\"vertex\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        ca.0,
        ca.1 + 24.0,
        escape(&d.class_names[d.a])
    );
    let _ = writeln!(
        s,
        "<text class=\"vertex\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        cb.0,
        cb.1 + 24.0,
        escape(&d.class_names[d.b])
    );
    let _ = writeln!(
        s,
        "<text class=\"vertex\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"16\" text-anchor=\"middle\">rest</text>",
        cr.0,
        cr.1 - 10.0
    );
    for p in &d.points {
        let (x, y) = screen(p.composition);
        let _ = writeln!(
            s,
            "<circle class=\"point\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3.5\" fill=\"{}\" fill-opacity=\"0.8\"/>",
            PALETTE[p.true_class % PALETTE.len()]
        );
    }
    s.push_str("</g>\n");
    s
}

fn legend(names: &[String], x: f64, y: f64) -> String {
    let mut s = String::from("<g class=\"legend\">\n");
    for (g, name) in names.iter().enumerate() {
        let yy = y + 20.0 * g as f64;
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.2}\" cy=\"{yy:.2}\" r=\"5\" fill=\"{}\"/><text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\">{}</text>",
            PALETTE[g % PALETTE.len()],
            x + 10.0,
            yy + 4.5,
            escape(name)
        );
    }
    s.push_str("</g>\n");
    s
}

fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">\n\
         <rect class=\"background\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Standalone SVG document of one diagram.
pub fn ternary_svg(d: &TernaryDiagram) -> String {
    let body = format!("{}{}", panel_svg(d), legend(&d.class_names, 500.0, 30.0));
    document(WIDTH, HEIGHT, &body)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn render_ternary(d: &TernaryDiagram, out: impl AsRef<Path>) -> Result<()> {
    write_file(out.as_ref(), &ternary_svg(d))
}

const CELL_SCALE: f64 = 0.5;
const MARGIN: f64 = 40.0;

/// Lower-triangular grid of all class pairs: the diagram in row `r` and
/// column `c` (c <= r) shows class `c` at the lower left and class `r + 1`
/// at the lower right, so columns share `a` and rows share `b`.
pub fn matrix_svg(dump: &PosteriorDump, class_names: &[String], roles: &[Role]) -> Result<String> {
    let g = dump.n_classes;
    if g < 3 {
        return Err(Error::TooFewClassesForPlot(g));
    }
    let cw = WIDTH * CELL_SCALE;
    let ch = HEIGHT * CELL_SCALE;
    let cells = (g - 1) as f64;
    let width = MARGIN + cells * cw + 140.0;
    let height = cells * ch + MARGIN;
    let mut body = String::new();
    for r in 0..g - 1 {
        for c in 0..=r {
            let d = TernaryDiagram::from_dump(dump, c, r + 1, class_names.to_vec(), roles)?;
            let x = MARGIN + c as f64 * cw;
            let y = r as f64 * ch;
            let _ = write!(
                body,
                "<g class=\"cell\" data-pair=\"{},{}\" transform=\"translate({x:.2},{y:.2}) scale({CELL_SCALE})\">\n{}</g>\n",
                c + 1,
                r + 2,
                panel_svg(&d)
            );
        }
        let _ = writeln!(
            body,
            "<text class=\"row-label\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 {:.2} {:.2})\">{}</text>",
            MARGIN / 2.0,
            r as f64 * ch + ch / 2.0,
            MARGIN / 2.0,
            r as f64 * ch + ch / 2.0,
            escape(&class_names[r + 1])
        );
    }
    for (c, name) in class_names.iter().take(g - 1).enumerate() {
        let _ = writeln!(
            body,
            "<text class=\"column-label\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
            MARGIN + c as f64 * cw + cw / 2.0,
            cells * ch + MARGIN / 2.0 + 5.0,
            escape(name)
        );
    }
    body.push_str(&legend(class_names, MARGIN + cells * cw + 20.0, 30.0));
    Ok(document(width, height, &body))
}

pub fn render_matrix(dump: &PosteriorDump, class_names: &[String], roles: &[Role], out: impl AsRef<Path>) -> Result<()> {
    write_file(out.as_ref(), &matrix_svg(dump, class_names, roles)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpRow {
    pub row_index: usize,
    /// Class code (written 1-based).
    pub true_class: usize,
    pub posterior: Vec<f64>,
    pub role: Role,
}

/// Aggregated posteriors of one repetition: `row_index, true_class,
/// p_1..p_G, role`, with 1-based class codes.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDump {
    pub n_classes: usize,
    pub rows: Vec<DumpRow>,
}

impl PosteriorDump {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["row_index".to_string(), "true_class".to_string()];
        header.extend((1..=self.n_classes).map(|g| format!("p_{g}")));
        header.push("role".into());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.row_index.to_string(), (r.true_class + 1).to_string()];
            rec.extend(r.posterior.iter().map(|p| p.to_string()));
            rec.push(r.role.as_str().to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<posterior dump>", e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = rdr.headers()?.clone();
        let n_classes = header.iter().filter(|h| h.starts_with("p_")).count();
        let expected: Vec<String> = ["row_index".to_string(), "true_class".to_string()]
            .into_iter()
            .chain((1..=n_classes).map(|g| format!("p_{g}")))
            .chain(std::iter::once("role".to_string()))
            .collect();
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::InvalidPosterior(format!(
                "unexpected dump header `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let bad = |row: usize, what: &str| Error::InvalidPosterior(format!("data row {row}: bad {what}"));
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let row_index = rec[0].parse().map_err(|_| bad(row, "row_index"))?;
            let code: usize = rec[1].parse().map_err(|_| bad(row, "true_class"))?;
            if code == 0 || code > n_classes {
                return Err(bad(row, "true_class"));
            }
            let posterior = (0..n_classes)
                .map(|g| rec[2 + g].parse::<f64>().map_err(|_| bad(row, "probability")))
                .collect::<Result<Vec<_>>>()?;
            let role = match &rec[2 + n_classes] {
                "train" => Role::Train,
                "test" => Role::Test,
                _ => return Err(bad(row, "role")),
            };
            rows.push(DumpRow {
                row_index,
                true_class: code - 1,
                posterior,
                role,
            });
        }
        Ok(Self { n_classes, rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }
}
