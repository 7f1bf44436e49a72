//! ASCII XYZ / OFF / PLY readers and XYZ / PLY writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Point, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloudFormat {
    Xyz,
    Off,
    Ply,
}

impl CloudFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "xyz" | "txt" | "pts" => Some(Self::Xyz),
            "off" => Some(Self::Off),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

pub fn load_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let (points, attrs) = match format {
        CloudFormat::Xyz => (parse_xyz(&text).map_err(|(l, m)| parse_err(l, m))?, vec![]),
        CloudFormat::Off => (parse_off(&text).map_err(|(l, m)| parse_err(l, m))?, vec![]),
        CloudFormat::Ply => parse_ply(&text).map_err(|(l, m)| parse_err(l, m))?,
    };
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut cloud = PointCloud::new(points)?;
    for (name, vals) in attrs {
        cloud.set_attr(name, vals)?;
    }
    Ok(cloud)
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    match format {
        CloudFormat::Xyz => {
            for p in cloud.points() {
                let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
            }
        }
        CloudFormat::Ply => {
            let channels: Vec<(&String, &Vec<f64>)> = cloud.attrs().iter().collect();
            out.push_str("ply\nformat ascii 1.0\n");
            let _ = writeln!(out, "element vertex {}", cloud.len());
            out.push_str("property float x\nproperty float y\nproperty float z\n");
            for (name, _) in &channels {
                let _ = writeln!(out, "property float {name}");
            }
            out.push_str("end_header\n");
            for (i, p) in cloud.points().iter().enumerate() {
                let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
                for (_, vals) in &channels {
                    let _ = write!(out, " {}", vals[i]);
                }
                out.push('\n');
            }
        }
        CloudFormat::Off => {
            return Err(Error::Invalid("OFF output is not supported".into()));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

type ParseResult<T> = std::result::Result<T, (usize, String)>;

/// Non-empty, non-comment lines paired with their 1-based line number.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_point(line_no: usize, tokens: &[&str]) -> ParseResult<Point> {
    if tokens.len() < 3 {
        return Err((line_no, format!("expected 3 coordinates, found {}", tokens.len())));
    }
    let mut c = [0.0; 3];
    for (slot, tok) in c.iter_mut().zip(tokens) {
        *slot = tok
            .parse::<f64>()
            .map_err(|_| (line_no, format!("invalid number `{tok}`")))?;
    }
    Ok(Point::new(c[0], c[1], c[2]))
}

fn parse_xyz(text: &str) -> ParseResult<Vec<Point>> {
    content_lines(text)
        .map(|(n, line)| {
            let tokens: Vec<&str> = line.split_whitespace().take(3).collect();
            parse_point(n, &tokens)
        })
        .collect()
}

fn parse_off(text: &str) -> ParseResult<Vec<Point>> {
    let mut lines = content_lines(text);
    let (n, header) = lines.next().ok_or((1, "missing OFF header".to_string()))?;
    let mut head_tokens = header.split_whitespace();
    if head_tokens.next() != Some("OFF") {
        return Err((n, "expected `OFF` header".into()));
    }
    // Counts may share the header line ("OFF 4 0 0").
    let rest: Vec<&str> = head_tokens.collect();
    let (count_line, counts) = if rest.is_empty() {
        let (n, l) = lines.next().ok_or((n, "missing vertex count line".to_string()))?;
        (n, l.split_whitespace().collect::<Vec<_>>())
    } else {
        (n, rest)
    };
    let nv: usize = counts
        .first()
        .and_then(|t| t.parse().ok())
        .ok_or((count_line, "invalid vertex count".to_string()))?;
    let mut pts = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = lines
            .next()
            .ok_or((count_line, format!("expected {nv} vertices, file ended early")))?;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        pts.push(parse_point(n, &tokens)?);
    }
    Ok(pts)
}

struct PlyElement {
    name: String,
    count: usize,
    props: Vec<String>,
}

fn parse_ply(text: &str) -> ParseResult<(Vec<Point>, Vec<(String, Vec<f64>)>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err((1, "missing `ply` magic".into())),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut header_done = false;
    for (n, line) in lines.by_ref() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first().copied() {
            Some("format") => {
                if tokens.get(1) != Some(&"ascii") {
                    return Err((n, "only ASCII PLY is supported".into()));
                }
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tokens.get(1).ok_or((n, "element without name".to_string()))?;
                let count = tokens
                    .get(2)
                    .and_then(|t| t.parse().ok())
                    .ok_or((n, "invalid element count".to_string()))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    props: vec![],
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or((n, "property before any element".to_string()))?;
                let name = tokens.last().ok_or((n, "property without name".to_string()))?;
                el.props.push(name.to_string());
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            Some(other) => return Err((n, format!("unexpected header keyword `{other}`"))),
        }
    }
    if !header_done {
        return Err((text.lines().count().max(1), "missing end_header".into()));
    }
    let mut points = Vec::new();
    let mut attrs: Vec<(String, Vec<f64>)> = Vec::new();
    let mut body = lines.filter(|(_, l)| !l.is_empty());
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                body.next();
            }
            continue;
        }
        let col = |name: &str| el.props.iter().position(|p| p == name);
        let (xi, yi, zi) = match (col("x"), col("y"), col("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err((1, "vertex element lacks x/y/z".into())),
        };
        let extra: Vec<usize> = (0..el.props.len()).filter(|&i| i != xi && i != yi && i != zi).collect();
        attrs = extra.iter().map(|&i| (el.props[i].clone(), Vec::with_capacity(el.count))).collect();
        points.reserve(el.count);
        for _ in 0..el.count {
            let (n, l) = body
                .next()
                .ok_or((text.lines().count(), "vertex list ended early".to_string()))?;
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| (n, format!("invalid number `{t}`"))))
                .collect::<ParseResult<_>>()?;
            if vals.len() < el.props.len() {
                return Err((n, format!("expected {} values, found {}", el.props.len(), vals.len())));
            }
            points.push(Point::new(vals[xi], vals[yi], vals[zi]));
            for (slot, &i) in attrs.iter_mut().zip(&extra) {
                slot.1.push(vals[i]);
            }
        }
    }
    Ok((points, attrs))
}
