//! BVH motion capture files: parsing, forward kinematics and joint bending
//! angles.
//!
//! Rotation channels are applied as intrinsic rotations in the order they are
//! declared, angles in degrees. A joint's local transform is a translation by
//! its `OFFSET` (plus any position channels) followed by that rotation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    fn as_str(self) -> &'static str {
        match self {
            Channel::Xposition => "Xposition",
            Channel::Yposition => "Yposition",
            Channel::Zposition => "Zposition",
            Channel::Xrotation => "Xrotation",
            Channel::Yrotation => "Yrotation",
            Channel::Zrotation => "Zrotation",
        }
    }
}

impl FromStr for Channel {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Ok(match s {
            "Xposition" => Channel::Xposition,
            "Yposition" => Channel::Yposition,
            "Zposition" => Channel::Zposition,
            "Xrotation" => Channel::Xrotation,
            "Yrotation" => Channel::Yrotation,
            "Zrotation" => Channel::Zrotation,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: [f64; 3],
    pub channels: Vec<Channel>,
    /// Index of this joint's first channel within a motion row.
    pub first_channel: usize,
    pub end_site: Option<[f64; 3]>,
    pub children: Vec<usize>,
}

/// A parsed BVH file. Joints are stored in declaration (depth-first) order,
/// so every parent precedes its children.
#[derive(Debug, Clone, PartialEq)]
pub struct BvhDocument {
    pub joints: Vec<Joint>,
    pub num_channels: usize,
    pub frame_time: f64,
    motion: Vec<f64>,
}

/// Three joints whose two segments meet at `vertex`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointTriple {
    pub parent: String,
    pub vertex: String,
    pub child: String,
}

impl JointTriple {
    pub fn new(parent: &str, vertex: &str, child: &str) -> Self {
        Self {
            parent: parent.into(),
            vertex: vertex.into(),
            child: child.into(),
        }
    }
}

const END_SUFFIX: &str = "/End";

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Vec<Tok<'_>> {
    let mut toks = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let mut start = None;
        for (ci, ch) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    toks.push(Tok { text: &line[s..ci], line: li + 1, col: s + 1 });
                }
            } else if start.is_none() {
                start = Some(ci);
            }
        }
    }
    toks
}

struct Parser<'a> {
    toks: Vec<Tok<'a>>,
    pos: usize,
    last_line: usize,
}

impl<'a> Parser<'a> {
    fn err_at(&self, tok: Option<Tok<'a>>, msg: impl Into<String>) -> Error {
        let (line, col) = tok.map_or((self.last_line + 1, 1), |t| (t.line, t.col));
        Error::BvhSyntax { line, col, msg: msg.into() }
    }

    fn peek(&self) -> Option<Tok<'a>> {
        self.toks.get(self.pos).copied()
    }

    fn next(&mut self, what: &str) -> Result<Tok<'a>> {
        let t = self.peek().ok_or_else(|| self.err_at(None, format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, word: &str) -> Result<Tok<'a>> {
        let t = self.next(&format!("'{word}'"))?;
        if t.text != word {
            return Err(self.err_at(Some(t), format!("expected '{word}', found '{}'", t.text)));
        }
        Ok(t)
    }

    fn number<T: FromStr>(&mut self, what: &str) -> Result<T> {
        let t = self.next(what)?;
        t.text
            .parse()
            .map_err(|_| self.err_at(Some(t), format!("expected {what}, found '{}'", t.text)))
    }

    /// The rest of the current token's line, joined by single spaces.
    fn rest_of_line(&mut self, line: usize) -> Result<String> {
        let mut parts = Vec::new();
        while let Some(t) = self.peek() {
            if t.line != line {
                break;
            }
            parts.push(t.text);
            self.pos += 1;
        }
        if parts.is_empty() {
            return Err(self.err_at(None, "missing joint name"));
        }
        Ok(parts.join(" "))
    }

    fn offset(&mut self) -> Result<[f64; 3]> {
        self.expect("OFFSET")?;
        Ok([self.number("offset x")?, self.number("offset y")?, self.number("offset z")?])
    }
}

fn unique_name(name: String, taken: &BTreeMap<String, usize>) -> String {
    if !taken.contains_key(&name) {
        return name;
    }
    (1..)
        .map(|k| format!("{name}_{k}"))
        .find(|n| !taken.contains_key(n))
        .expect("unbounded suffix search")
}

fn parse_joint(p: &mut Parser<'_>, parent: Option<usize>, line: usize, joints: &mut Vec<Joint>, names: &mut BTreeMap<String, usize>, channel_cursor: &mut usize) -> Result<()> {
    let raw = p.rest_of_line(line)?;
    let name = unique_name(raw, names);
    p.expect("{")?;
    let offset = p.offset()?;
    let mut channels = Vec::new();
    if p.peek().map(|t| t.text) == Some("CHANNELS") {
        p.pos += 1;
        let n: usize = p.number("channel count")?;
        for _ in 0..n {
            let t = p.next("channel name")?;
            let ch = t.text.parse().map_err(|_| p.err_at(Some(t), format!("unknown channel '{}'", t.text)))?;
            channels.push(ch);
        }
    }
    let idx = joints.len();
    names.insert(name.clone(), idx);
    joints.push(Joint {
        name,
        parent,
        offset,
        first_channel: *channel_cursor,
        channels,
        end_site: None,
        children: Vec::new(),
    });
    *channel_cursor += joints[idx].channels.len();
    if let Some(pi) = parent {
        joints[pi].children.push(idx);
    }
    loop {
        let t = p.next("'JOINT', 'End' or '}'")?;
        match t.text {
            "}" => return Ok(()),
            "JOINT" => parse_joint(p, Some(idx), t.line, joints, names, channel_cursor)?,
            "End" => {
                p.expect("Site")?;
                p.expect("{")?;
                let off = p.offset()?;
                p.expect("}")?;
                if joints[idx].end_site.replace(off).is_some() {
                    return Err(p.err_at(Some(t), "joint declares more than one End Site"));
                }
            }
            other => return Err(p.err_at(Some(t), format!("unexpected '{other}' in joint body"))),
        }
    }
}

/// Parse a complete BVH document (hierarchy and motion).
pub fn parse_bvh(text: &str) -> Result<BvhDocument> {
    let toks = tokenize(text);
    let last_line = text.lines().count();
    let mut p = Parser { toks, pos: 0, last_line };
    p.expect("HIERARCHY")?;
    let root = p.expect("ROOT")?;
    let mut joints = Vec::new();
    let mut names = BTreeMap::new();
    let mut cursor = 0;
    parse_joint(&mut p, None, root.line, &mut joints, &mut names, &mut cursor)?;
    if let Some(t) = p.peek() {
        if t.text == "ROOT" {
            return Err(p.err_at(Some(t), "multiple ROOT joints are not supported"));
        }
    }
    p.expect("MOTION")?;
    p.expect("Frames:")?;
    let frames: usize = p.number("frame count")?;
    p.expect("Frame")?;
    p.expect("Time:")?;
    let frame_time: f64 = p.number("frame time")?;
    if !(frame_time > 0.0 && frame_time.is_finite()) {
        return Err(Error::BvhStructure(format!("frame time {frame_time} must be positive")));
    }
    if frames == 0 {
        return Err(Error::BvhStructure("file declares zero frames".into()));
    }
    let num_channels = cursor;
    let mut motion = Vec::with_capacity(frames * num_channels);
    let mut row = 0usize;
    while let Some(first) = p.peek() {
        let line = first.line;
        let mut count = 0;
        while let Some(t) = p.peek() {
            if t.line != line {
                break;
            }
            let v: f64 = p.number("motion value")?;
            motion.push(v);
            count += 1;
        }
        if count != num_channels {
            return Err(Error::BvhStructure(format!(
                "motion row {row} (line {line}) has {count} values, expected {num_channels}"
            )));
        }
        row += 1;
    }
    if row != frames {
        return Err(Error::BvhStructure(format!("header declares {frames} frames but {row} motion rows follow")));
    }
    Ok(BvhDocument { joints, num_channels, frame_time, motion })
}

pub fn load_bvh(path: impl AsRef<Path>) -> Result<BvhDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bvh(&text)
}

fn rot_x(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// World-space positions of every joint (and end site) in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub joints: Vec<[f64; 3]>,
    pub end_sites: Vec<Option<[f64; 3]>>,
}

impl BvhDocument {
    pub fn num_frames(&self) -> usize {
        if self.num_channels == 0 {
            self.motion.len()
        } else {
            self.motion.len() / self.num_channels
        }
    }

    pub fn frame(&self, i: usize) -> Result<&[f64]> {
        let n = self.num_frames();
        if i >= n {
            return Err(Error::Index { index: i, len: n });
        }
        Ok(&self.motion[i * self.num_channels..(i + 1) * self.num_channels])
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Replace the motion block. `values` must hold whole rows.
    pub fn set_motion(&mut self, values: Vec<f64>) -> Result<()> {
        if self.num_channels == 0 || values.is_empty() || values.len() % self.num_channels != 0 {
            return Err(Error::BvhStructure(format!(
                "{} motion values do not form rows of {} channels",
                values.len(),
                self.num_channels
            )));
        }
        self.motion = values;
        Ok(())
    }

    pub fn pose(&self, frame: usize) -> Result<Pose> {
        let row = self.frame(frame)?;
        let n = self.joints.len();
        let mut rot: Vec<Matrix3<f64>> = Vec::with_capacity(n);
        let mut pos: Vec<Vector3<f64>> = Vec::with_capacity(n);
        let mut end_sites = Vec::with_capacity(n);
        for j in &self.joints {
            let mut t = Vector3::from(j.offset);
            let mut r = Matrix3::identity();
            for (k, ch) in j.channels.iter().enumerate() {
                let v = row[j.first_channel + k];
                match ch {
                    Channel::Xposition => t.x += v,
                    Channel::Yposition => t.y += v,
                    Channel::Zposition => t.z += v,
                    Channel::Xrotation => r *= rot_x(v),
                    Channel::Yrotation => r *= rot_y(v),
                    Channel::Zrotation => r *= rot_z(v),
                }
            }
            let (world_r, world_p) = match j.parent {
                None => (r, t),
                Some(pi) => (rot[pi] * r, pos[pi] + rot[pi] * t),
            };
            end_sites.push(j.end_site.map(|e| {
                let p = world_p + world_r * Vector3::from(e);
                [p.x, p.y, p.z]
            }));
            rot.push(world_r);
            pos.push(world_p);
        }
        Ok(Pose {
            joints: pos.iter().map(|p| [p.x, p.y, p.z]).collect(),
            end_sites,
        })
    }

    /// Resolve a joint or end-site name (`<joint>/End`) to a world position.
    fn lookup(&self, pose: &Pose, name: &str) -> Option<[f64; 3]> {
        if let Some(i) = self.joint_index(name) {
            return Some(pose.joints[i]);
        }
        let base = name.strip_suffix(END_SUFFIX)?;
        pose.end_sites[self.joint_index(base)?]
    }

    fn is_descendant(&self, candidate: usize, ancestor: usize) -> bool {
        let mut cur = self.joints[candidate].parent;
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.joints[c].parent;
        }
        false
    }

    /// Check that `vertex` is a child of `parent` and `child` lies below `vertex`.
    pub fn validate_triple(&self, triple: &JointTriple) -> Result<()> {
        let find = |n: &str| {
            self.joint_index(n)
                .ok_or_else(|| Error::Argument(format!("unknown joint '{n}'")))
        };
        let p = find(&triple.parent)?;
        let v = find(&triple.vertex)?;
        if self.joints[v].parent != Some(p) {
            return Err(Error::Argument(format!("'{}' is not a child of '{}'", triple.vertex, triple.parent)));
        }
        let ok = match triple.child.strip_suffix(END_SUFFIX) {
            Some(base) if self.joint_index(&triple.child).is_none() => {
                let b = find(base)?;
                self.joints[b].end_site.is_some() && (b == v || self.is_descendant(b, v))
            }
            _ => self.is_descendant(find(&triple.child)?, v),
        };
        if !ok {
            return Err(Error::Argument(format!("'{}' is not below '{}'", triple.child, triple.vertex)));
        }
        Ok(())
    }

    /// Serialize back to BVH text.
    pub fn to_bvh_string(&self) -> String {
        fn write_joint(doc: &BvhDocument, idx: usize, depth: usize, out: &mut String) {
            let j = &doc.joints[idx];
            let ind = "\t".repeat(depth);
            let kw = if j.parent.is_none() { "ROOT" } else { "JOINT" };
            let _ = writeln!(out, "{ind}{kw} {}", j.name);
            let _ = writeln!(out, "{ind}{{");
            let _ = writeln!(out, "{ind}\tOFFSET {} {} {}", j.offset[0], j.offset[1], j.offset[2]);
            if !j.channels.is_empty() {
                let names: Vec<_> = j.channels.iter().map(|c| c.as_str()).collect();
                let _ = writeln!(out, "{ind}\tCHANNELS {} {}", names.len(), names.join(" "));
            }
            for &c in &j.children {
                write_joint(doc, c, depth + 1, out);
            }
            if let Some(e) = j.end_site {
                let _ = writeln!(out, "{ind}\tEnd Site");
                let _ = writeln!(out, "{ind}\t{{");
                let _ = writeln!(out, "{ind}\t\tOFFSET {} {} {}", e[0], e[1], e[2]);
                let _ = writeln!(out, "{ind}\t}}");
            }
            let _ = writeln!(out, "{ind}}}");
        }
        let mut out = String::from("HIERARCHY\n");
        write_joint(self, 0, 0, &mut out);
        let _ = writeln!(out, "MOTION\nFrames: {}\nFrame Time: {}", self.num_frames(), self.frame_time);
        for f in 0..self.num_frames() {
            let row: Vec<String> = self.frame(f).expect("in range").iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

/// World position of every joint, keyed by name. End sites appear as `<joint>/End`.
pub fn forward_kinematics(doc: &BvhDocument, frame: usize) -> Result<BTreeMap<String, [f64; 3]>> {
    let pose = doc.pose(frame)?;
    let mut map = BTreeMap::new();
    for (i, j) in doc.joints.iter().enumerate() {
        map.insert(j.name.clone(), pose.joints[i]);
        if let Some(e) = pose.end_sites[i] {
            map.insert(format!("{}{END_SUFFIX}", j.name), e);
        }
    }
    Ok(map)
}

/// Angle in degrees at `vertex` between the segments towards `parent` and `child`.
pub fn angle_from_positions(parent: [f64; 3], vertex: [f64; 3], child: [f64; 3]) -> Result<f64> {
    let v1 = Vector3::from(parent) - Vector3::from(vertex);
    let v2 = Vector3::from(child) - Vector3::from(vertex);
    let (n1, n2) = (v1.norm(), v2.norm());
    if n1 < 1e-12 || n2 < 1e-12 {
        return Err(Error::DegenerateSegment(format!("segment lengths {n1:e} and {n2:e}")));
    }
    let cos = (v1.dot(&v2) / (n1 * n2)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}

pub fn joint_angle(doc: &BvhDocument, triple: &JointTriple, frame: usize) -> Result<f64> {
    doc.validate_triple(triple)?;
    let pose = doc.pose(frame)?;
    let get = |n: &str| doc.lookup(&pose, n).ok_or_else(|| Error::Argument(format!("unknown joint '{n}'")));
    angle_from_positions(get(&triple.parent)?, get(&triple.vertex)?, get(&triple.child)?)
}

/// Bending angle for every frame.
pub fn angle_series(doc: &BvhDocument, triple: &JointTriple) -> Result<Vec<f64>> {
    doc.validate_triple(triple)?;
    (0..doc.num_frames()).map(|f| joint_angle(doc, triple, f)).collect()
}

pub fn write_angle_csv<W: std::io::Write>(angles: &[f64], mut out: W) -> std::io::Result<()> {
    writeln!(out, "frame,angle_deg")?;
    for (i, a) in angles.iter().enumerate() {
        writeln!(out, "{i},{a}")?;
    }
    Ok(())
}

/// Write `frame,angle_deg` for every frame of `doc`.
pub fn export_angles(doc: &BvhDocument, triple: &JointTriple, out: impl AsRef<Path>) -> Result<Vec<f64>> {
    let angles = angle_series(doc, triple)?;
    let path = out.as_ref();
    let mut buf = Vec::new();
    write_angle_csv(&angles, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    Ok(angles)
}

/// Read a `frame,angle_deg` file (as written by [`export_angles`]).
pub fn load_angle_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Schema(e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Schema(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header != ["frame", "angle_deg"] {
        return Err(Error::Schema(format!("expected header 'frame,angle_deg', got '{}'", header.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if rec.len() != 2 {
            return Err(Error::Schema(format!("row {row} has {} columns, expected 2", rec.len())));
        }
        let a: f64 = rec[1].trim().parse().map_err(|_| Error::Parse { row, msg: format!("bad angle '{}'", &rec[1]) })?;
        out.push(a);
    }
    Ok(out)
}
