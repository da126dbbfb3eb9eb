//! Line-oriented case file parser.
//!
//! ```text
//! # comment
//! [case]
//! nharms = 7
//! npde = 4
//! iterations = 100
//! dtau = 0.002
//! omega = 1.0
//! nbody = 2
//!
//! [block 0]
//! ni = 32
//! nj = 32
//! origin = 0.0, 0.0
//! h = 0.03125
//! bodies = south:0
//!
//! [cut 0]
//! a = 0 east 1..32
//! b = 1 west 1..32
//! orientation = forward
//! ```
//!
//! Unknown sections or keys, duplicate keys, and malformed values are errors
//! that carry the 1-based line number.

use std::collections::BTreeMap;
use std::path::Path;

use super::{CutSide, Face, Orientation};
use crate::error::{Error, Result};

/// Global parameters from the `[case]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseParams {
    pub nharms: usize,
    pub npde: usize,
    pub iterations: usize,
    pub dtau: f64,
    pub omega: f64,
    pub nbody: usize,
}

impl Default for CaseParams {
    fn default() -> Self {
        CaseParams { nharms: 0, npde: 4, iterations: 1, dtau: 0.002, omega: 1.0, nbody: 0 }
    }
}

impl CaseParams {
    /// Number of harmonic planes, `2 * nharms + 1`.
    pub fn nplanes(&self) -> usize {
        2 * self.nharms + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSection {
    pub id: usize,
    pub ni: usize,
    pub nj: usize,
    pub origin: (f64, f64),
    pub h: f64,
    pub bodies: Vec<(Face, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutSection {
    pub id: usize,
    pub a: CutSide,
    pub b: CutSide,
    pub orientation: Orientation,
}

/// A parsed case file. Sections are sorted by id; ids are not yet checked
/// for contiguity (that is a topology concern).
#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub params: CaseParams,
    pub blocks: Vec<BlockSection>,
    pub cuts: Vec<CutSection>,
}

enum Section {
    None,
    Case,
    Block(usize),
    Cut(usize),
}

#[derive(Default)]
struct RawBlock {
    ni: Option<usize>,
    nj: Option<usize>,
    origin: Option<(f64, f64)>,
    h: Option<f64>,
    bodies: Option<Vec<(Face, usize)>>,
    line: usize,
}

#[derive(Default)]
struct RawCut {
    a: Option<CutSide>,
    b: Option<CutSide>,
    orientation: Option<Orientation>,
    line: usize,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

fn set_once<T>(slot: &mut Option<T>, value: T, key: &str, line: usize) -> Result<()> {
    if slot.is_some() {
        return Err(err(line, format!("duplicate key '{key}'")));
    }
    *slot = Some(value);
    Ok(())
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| err(line, format!("bad value '{value}' for '{key}'")))
}

fn parse_pair(value: &str, key: &str, line: usize) -> Result<(f64, f64)> {
    let mut parts = value.split(',').map(str::trim);
    match (parts.next(), parts.next(), parts.next()) {
        (Some(x), Some(y), None) => Ok((parse_num(x, key, line)?, parse_num(y, key, line)?)),
        _ => Err(err(line, format!("'{key}' expects 'x, y', got '{value}'"))),
    }
}

fn parse_bodies(value: &str, line: usize) -> Result<Vec<(Face, usize)>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (face, body) =
                item.split_once(':').ok_or_else(|| err(line, format!("body entry '{item}' is not face:id")))?;
            let face = face.trim().parse().map_err(|m: String| err(line, m))?;
            Ok((face, parse_num(body.trim(), "bodies", line)?))
        })
        .collect()
}

/// `<block> <face> <first>..<last>`
fn parse_side(value: &str, key: &str, line: usize) -> Result<CutSide> {
    let fields: Vec<&str> = value.split_whitespace().collect();
    let [block, face, range] = fields[..] else {
        return Err(err(line, format!("'{key}' expects '<block> <face> <first>..<last>', got '{value}'")));
    };
    let (first, last) = range.split_once("..").ok_or_else(|| err(line, format!("bad range '{range}'")))?;
    Ok(CutSide {
        block: parse_num(block, key, line)?,
        face: face.parse().map_err(|m: String| err(line, m))?,
        first: parse_num(first, key, line)?,
        last: parse_num(last, key, line)?,
    })
}

impl CaseConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, 0, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut section = Section::None;
        let mut params = CaseParams::default();
        let mut seen_case_keys: Vec<String> = Vec::new();
        let mut blocks: BTreeMap<usize, RawBlock> = BTreeMap::new();
        let mut cuts: BTreeMap<usize, RawCut> = BTreeMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }

            if let Some(header) = content.strip_prefix('[') {
                let header = header.strip_suffix(']').ok_or_else(|| err(line, "unterminated section header"))?.trim();
                let mut words = header.split_whitespace();
                section = match (words.next(), words.next(), words.next()) {
                    (Some("case"), None, _) => Section::Case,
                    (Some("block"), Some(id), None) => {
                        let id = parse_num(id, "block id", line)?;
                        if blocks.contains_key(&id) {
                            return Err(err(line, format!("duplicate block {id}")));
                        }
                        blocks.insert(id, RawBlock { line, ..Default::default() });
                        Section::Block(id)
                    }
                    (Some("cut"), Some(id), None) => {
                        let id = parse_num(id, "cut id", line)?;
                        if cuts.contains_key(&id) {
                            return Err(err(line, format!("duplicate cut {id}")));
                        }
                        cuts.insert(id, RawCut { line, ..Default::default() });
                        Section::Cut(id)
                    }
                    _ => return Err(err(line, format!("unknown section '[{header}]'"))),
                };
                continue;
            }

            let (key, value) =
                content.split_once('=').ok_or_else(|| err(line, format!("expected 'key = value', got '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());

            match &section {
                Section::None => return Err(err(line, "key outside of any section")),
                Section::Case => {
                    if seen_case_keys.iter().any(|k| k == key) {
                        return Err(err(line, format!("duplicate key '{key}'")));
                    }
                    match key {
                        "nharms" => params.nharms = parse_num(value, key, line)?,
                        "npde" => params.npde = parse_num(value, key, line)?,
                        "iterations" => params.iterations = parse_num(value, key, line)?,
                        "dtau" => params.dtau = parse_num(value, key, line)?,
                        "omega" => params.omega = parse_num(value, key, line)?,
                        "nbody" => params.nbody = parse_num(value, key, line)?,
                        _ => return Err(err(line, format!("unknown key '{key}' in [case]"))),
                    }
                    seen_case_keys.push(key.to_string());
                }
                Section::Block(id) => {
                    let b = blocks.get_mut(id).expect("section registered");
                    match key {
                        "ni" => set_once(&mut b.ni, parse_num(value, key, line)?, key, line)?,
                        "nj" => set_once(&mut b.nj, parse_num(value, key, line)?, key, line)?,
                        "h" => set_once(&mut b.h, parse_num(value, key, line)?, key, line)?,
                        "origin" => set_once(&mut b.origin, parse_pair(value, key, line)?, key, line)?,
                        "bodies" => set_once(&mut b.bodies, parse_bodies(value, line)?, key, line)?,
                        _ => return Err(err(line, format!("unknown key '{key}' in [block {id}]"))),
                    }
                }
                Section::Cut(id) => {
                    let c = cuts.get_mut(id).expect("section registered");
                    match key {
                        "a" => set_once(&mut c.a, parse_side(value, key, line)?, key, line)?,
                        "b" => set_once(&mut c.b, parse_side(value, key, line)?, key, line)?,
                        "orientation" => {
                            let o = match value {
                                "forward" => Orientation::Forward,
                                "reversed" => Orientation::Reversed,
                                _ => return Err(err(line, format!("bad orientation '{value}'"))),
                            };
                            set_once(&mut c.orientation, o, key, line)?
                        }
                        _ => return Err(err(line, format!("unknown key '{key}' in [cut {id}]"))),
                    }
                }
            }
        }

        if params.npde != 4 {
            return Err(err(0, format!("npde must be 4, got {}", params.npde)));
        }
        if !(params.dtau.is_finite() && params.dtau >= 0.0) {
            return Err(err(0, format!("dtau must be finite and non-negative, got {}", params.dtau)));
        }
        if !(params.omega.is_finite() && params.omega > 0.0) {
            return Err(err(0, format!("omega must be positive, got {}", params.omega)));
        }

        let blocks = blocks
            .into_iter()
            .map(|(id, b)| {
                let missing = |k: &str| err(b.line, format!("[block {id}] is missing '{k}'"));
                Ok(BlockSection {
                    id,
                    ni: b.ni.ok_or_else(|| missing("ni"))?,
                    nj: b.nj.ok_or_else(|| missing("nj"))?,
                    h: b.h.ok_or_else(|| missing("h"))?,
                    origin: b.origin.unwrap_or((0.0, 0.0)),
                    bodies: b.bodies.unwrap_or_default(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cuts = cuts
            .into_iter()
            .map(|(id, c)| {
                let missing = |k: &str| err(c.line, format!("[cut {id}] is missing '{k}'"));
                Ok(CutSection {
                    id,
                    a: c.a.ok_or_else(|| missing("a"))?,
                    b: c.b.ok_or_else(|| missing("b"))?,
                    orientation: c.orientation.unwrap_or(Orientation::Forward),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(CaseConfig { params, blocks, cuts })
    }

    /// Serialises back to the case file format; `parse(to_text())` is the identity.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let p = &self.params;
        let mut out = String::new();
        let _ = writeln!(out, "[case]");
        let _ = writeln!(out, "nharms = {}", p.nharms);
        let _ = writeln!(out, "npde = {}", p.npde);
        let _ = writeln!(out, "iterations = {}", p.iterations);
        let _ = writeln!(out, "dtau = {:?}", p.dtau);
        let _ = writeln!(out, "omega = {:?}", p.omega);
        let _ = writeln!(out, "nbody = {}", p.nbody);
        for b in &self.blocks {
            let _ = writeln!(out, "\n[block {}]", b.id);
            let _ = writeln!(out, "ni = {}", b.ni);
            let _ = writeln!(out, "nj = {}", b.nj);
            let _ = writeln!(out, "origin = {:?}, {:?}", b.origin.0, b.origin.1);
            let _ = writeln!(out, "h = {:?}", b.h);
            if !b.bodies.is_empty() {
                let list: Vec<String> = b.bodies.iter().map(|(f, id)| format!("{f}:{id}")).collect();
                let _ = writeln!(out, "bodies = {}", list.join(", "));
            }
        }
        for c in &self.cuts {
            let _ = writeln!(out, "\n[cut {}]", c.id);
            for (key, s) in [("a", &c.a), ("b", &c.b)] {
                let _ = writeln!(out, "{key} = {} {} {}..{}", s.block, s.face, s.first, s.last);
            }
            let o = match c.orientation {
                Orientation::Forward => "forward",
                Orientation::Reversed => "reversed",
            };
            let _ = writeln!(out, "orientation = {o}");
        }
        out
    }
}
