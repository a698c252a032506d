//! Line-oriented text format shared by 2D pose sequences and 3D motion.
//!
//! ```text
//! MGVI-POSE v1 fps=60/1 J=19 frames=25
//! 8:1 1:0 1:2 ...
//! x y v x y v ...        (one line per frame, J triples)
//! ```
//!
//! 3D motion uses the `MGVI-POSE3D` magic and `x y z` triples in meters.
//! Floats are written in shortest round-trip form, so a write/read cycle is
//! bit-exact for finite values.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::{Fps, Pose2D, PoseSequence, SkeletonTopology};
use crate::mocap::MotionSample3D;
use crate::{Error, Result};

const MAGIC_2D: &str = "MGVI-POSE";
const MAGIC_3D: &str = "MGVI-POSE3D";
const VERSION: &str = "v1";

struct Header {
    fps: Fps,
    joints: usize,
    frames: usize,
}

fn parse_header(line: Option<&str>, magic: &str) -> Result<Header> {
    let line = line.ok_or_else(|| Error::MalformedHeader("empty file".into()))?;
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let bad = |msg: &str| Error::MalformedHeader(format!("{msg}: `{line}`"));
    if tokens.len() != 5 || tokens[0] != magic {
        return Err(bad(&format!("expected `{magic} {VERSION} fps=.. J=.. frames=..`")));
    }
    if tokens[1] != VERSION {
        return Err(bad("unsupported version"));
    }
    let field = |tok: &str, key: &str| -> Result<String> {
        tok.strip_prefix(key)
            .map(str::to_string)
            .ok_or_else(|| bad(&format!("missing `{key}`")))
    };
    let fps: Fps = field(tokens[2], "fps=")?.parse().map_err(|_| bad("bad fps"))?;
    let joints: usize = field(tokens[3], "J=")?.parse().map_err(|_| bad("bad J"))?;
    let frames: usize = field(tokens[4], "frames=")?.parse().map_err(|_| bad("bad frame count"))?;
    if joints == 0 || frames == 0 {
        return Err(bad("J and frames must be positive"));
    }
    Ok(Header { fps, joints, frames })
}

fn parse_edges(line: Option<&str>) -> Result<Vec<(usize, usize)>> {
    let line = line.ok_or_else(|| Error::MalformedHeader("missing edge line".into()))?;
    line.split_whitespace()
        .map(|tok| {
            let (p, c) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: 2,
                msg: format!("edge `{tok}` is not parent:child"),
            })?;
            let num = |s: &str| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line: 2,
                    msg: format!("edge `{tok}` has a non-integer index"),
                })
            };
            Ok((num(p)?, num(c)?))
        })
        .collect()
}

fn parse_triples(line: &str, line_no: usize, joints: usize) -> Result<Vec<[f64; 3]>> {
    let values = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("`{tok}` is not a number"),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() % 3 != 0 {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("{} values do not form triples", values.len()),
        });
    }
    if values.len() / 3 != joints {
        return Err(Error::JointCount {
            expected: joints,
            found: values.len() / 3,
        });
    }
    Ok(values.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
}

type Body = (Header, Arc<SkeletonTopology>, Vec<Vec<[f64; 3]>>);

fn parse_body(text: &str, magic: &str) -> Result<Body> {
    let mut lines = text.lines();
    let header = parse_header(lines.next(), magic)?;
    let topology = SkeletonTopology::from_edges(header.joints, parse_edges(lines.next())?)?;
    let mut frames = Vec::with_capacity(header.frames);
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        frames.push(parse_triples(line, i + 3, header.joints)?);
    }
    if frames.len() != header.frames {
        return Err(Error::MalformedHeader(format!(
            "header declares {} frames, file has {}",
            header.frames,
            frames.len()
        )));
    }
    Ok((header, topology, frames))
}

fn render_header(out: &mut String, magic: &str, fps: Fps, topology: &SkeletonTopology, frames: usize) {
    let _ = writeln!(
        out,
        "{magic} {VERSION} fps={fps} J={} frames={frames}",
        topology.joint_count()
    );
    let edges: Vec<String> = topology.edges().iter().map(|(p, c)| format!("{p}:{c}")).collect();
    out.push_str(&edges.join(" "));
    out.push('\n');
}

pub fn parse_sequence(text: &str) -> Result<PoseSequence> {
    let (header, topology, rows) = parse_body(text, MAGIC_2D)?;
    let frames = rows
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut coords = Vec::with_capacity(row.len());
            let mut visibility = Vec::with_capacity(row.len());
            for [x, y, v] in row {
                let vis = match v {
                    0.0 => false,
                    1.0 => true,
                    _ => {
                        return Err(Error::Parse {
                            line: i + 3,
                            msg: format!("visibility {v} is not 0 or 1"),
                        })
                    }
                };
                coords.push([x, y]);
                visibility.push(vis);
            }
            Ok(Pose2D { coords, visibility })
        })
        .collect::<Result<Vec<_>>>()?;
    PoseSequence::new(frames, header.fps, topology)
}

pub fn render_sequence(seq: &PoseSequence) -> String {
    let mut out = String::new();
    render_header(&mut out, MAGIC_2D, seq.fps, &seq.topology, seq.len());
    for frame in &seq.frames {
        let row: Vec<String> = frame
            .coords
            .iter()
            .zip(&frame.visibility)
            .map(|(c, &v)| format!("{} {} {}", c[0], c[1], u8::from(v)))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_sequence(path: impl AsRef<Path>) -> Result<PoseSequence> {
    parse_sequence(&std::fs::read_to_string(path)?)
}

/// Reads a sequence and checks it against an expected topology.
pub fn read_sequence_with(path: impl AsRef<Path>, topology: &SkeletonTopology) -> Result<PoseSequence> {
    let text = std::fs::read_to_string(path)?;
    let header = parse_header(text.lines().next(), MAGIC_2D)?;
    if header.joints != topology.joint_count() {
        return Err(Error::JointCount {
            expected: topology.joint_count(),
            found: header.joints,
        });
    }
    let seq = parse_sequence(&text)?;
    if seq.topology.edges() != topology.edges() {
        return Err(Error::TopologyMismatch);
    }
    Ok(seq)
}

pub fn write_sequence(seq: &PoseSequence, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render_sequence(seq))?;
    Ok(())
}

pub fn parse_motion3d(text: &str) -> Result<MotionSample3D> {
    let (header, topology, frames) = parse_body(text, MAGIC_3D)?;
    MotionSample3D::new(frames, header.fps, topology)
}

pub fn render_motion3d(motion: &MotionSample3D) -> String {
    let mut out = String::new();
    render_header(&mut out, MAGIC_3D, motion.fps, &motion.topology, motion.frames.len());
    for frame in &motion.frames {
        let row: Vec<String> = frame.iter().map(|p| format!("{} {} {}", p[0], p[1], p[2])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_motion3d(path: impl AsRef<Path>) -> Result<MotionSample3D> {
    parse_motion3d(&std::fs::read_to_string(path)?)
}

pub fn write_motion3d(motion: &MotionSample3D, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render_motion3d(motion))?;
    Ok(())
}
