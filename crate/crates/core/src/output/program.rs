use std::fmt;

use super::OutputError;
use crate::geom::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Instruction {
    Tool(usize),
    PenUp,
    PenDown,
    Move(f64, f64),
    Base(f64, f64),
}

/// Rounds to 3 decimals and folds -0 into 0.
fn mm(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0 + 0.0
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Instruction::Tool(n) => write!(f, "TOOL {n}"),
            Instruction::PenUp => f.write_str("PENUP"),
            Instruction::PenDown => f.write_str("PENDOWN"),
            Instruction::Move(x, y) => write!(f, "MOVE {:.3} {:.3}", mm(x), mm(y)),
            Instruction::Base(x, y) => write!(f, "BASE {:.3} {:.3}", mm(x), mm(y)),
        }
    }
}

/// Strokes of one pen inside one tile, in tile-local mm.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolPass {
    pub tool: usize,
    pub strokes: Vec<Vec<Point>>,
}

/// Everything drawn from one base position.
#[derive(Debug, Clone, PartialEq)]
pub struct TileDrawing {
    pub base_offset: Point,
    pub passes: Vec<ToolPass>,
}

/// Line-oriented pen program in millimeters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotterProgram {
    pub instructions: Vec<Instruction>,
}

impl PlotterProgram {
    /// Tiles are drawn in order with a relative `BASE` move between them.
    /// Within a tile every non-empty pass starts with `TOOL` and `PENUP`;
    /// each stroke travels to its start, lowers the pen, moves through its
    /// points and lifts again.
    pub fn build(tiles: &[TileDrawing]) -> Result<Self, OutputError> {
        let mut ins = Vec::new();
        let mut base = tiles.first().map(|t| t.base_offset).unwrap_or_default();
        for (i, tile) in tiles.iter().enumerate() {
            if i > 0 {
                let d = tile.base_offset - base;
                ins.push(Instruction::Base(d.x, d.y));
                base = tile.base_offset;
            }
            for pass in &tile.passes {
                let strokes: Vec<_> = pass.strokes.iter().filter(|s| !s.is_empty()).collect();
                if strokes.is_empty() {
                    continue;
                }
                ins.push(Instruction::Tool(pass.tool));
                ins.push(Instruction::PenUp);
                for stroke in strokes {
                    if let Some(p) = stroke.iter().find(|p| !p.is_finite()) {
                        return Err(OutputError::NonFinite(p.x, p.y));
                    }
                    ins.push(Instruction::Move(stroke[0].x, stroke[0].y));
                    ins.push(Instruction::PenDown);
                    ins.extend(stroke[1..].iter().map(|p| Instruction::Move(p.x, p.y)));
                    ins.push(Instruction::PenUp);
                }
            }
        }
        Ok(Self { instructions: ins })
    }

    pub fn to_text(&self) -> String {
        self.instructions.iter().map(|i| format!("{i}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self, OutputError> {
        let mut instructions = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let bad = |why: &str| OutputError::ProgramParse {
                line: n + 1,
                reason: why.to_string(),
            };
            let parts: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
            let ins = match parts.as_slice() {
                [] => continue,
                ["TOOL", n] => Instruction::Tool(n.parse().map_err(|_| bad("bad tool index"))?),
                ["PENUP"] => Instruction::PenUp,
                ["PENDOWN"] => Instruction::PenDown,
                ["MOVE", x, y] => Instruction::Move(
                    num(x).ok_or_else(|| bad("bad x"))?,
                    num(y).ok_or_else(|| bad("bad y"))?,
                ),
                ["BASE", x, y] => Instruction::Base(
                    num(x).ok_or_else(|| bad("bad dx"))?,
                    num(y).ok_or_else(|| bad("bad dy"))?,
                ),
                _ => return Err(bad(&format!("unknown instruction `{line}`"))),
            };
            instructions.push(ins);
        }
        Ok(Self { instructions })
    }

    pub fn count(&self, pred: impl Fn(&Instruction) -> bool) -> usize {
        self.instructions.iter().filter(|i| pred(i)).count()
    }

    /// Pen-down polylines in program order (pen-down MOVEs, each stroke
    /// starting at the MOVE before its PENDOWN).
    pub fn strokes(&self) -> Vec<Vec<Point>> {
        let mut out = Vec::new();
        let mut cur: Option<Vec<Point>> = None;
        let mut last = None;
        for ins in &self.instructions {
            match *ins {
                Instruction::Move(x, y) => {
                    let p = Point::new(x, y);
                    if let Some(s) = cur.as_mut() {
                        s.push(p);
                    }
                    last = Some(p);
                }
                Instruction::PenDown => cur = Some(last.into_iter().collect()),
                Instruction::PenUp => out.extend(cur.take()),
                _ => {}
            }
        }
        out.extend(cur);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pass(tool: usize, strokes: Vec<Vec<Point>>) -> ToolPass {
        ToolPass { tool, strokes }
    }

    #[test]
    fn minimal_program() {
        let tiles = [TileDrawing {
            base_offset: Point::default(),
            passes: vec![pass(0, vec![vec![Point::new(1.0, 2.0), Point::new(3.0, -0.0001)]])],
        }];
        let text = PlotterProgram::build(&tiles).unwrap().to_text();
        assert_eq!(text, "TOOL 0\nPENUP\nMOVE 1.000 2.000\nPENDOWN\nMOVE 3.000 0.000\nPENUP\n");
    }

    #[test]
    fn base_moves_between_tiles() {
        let tiles: Vec<_> = (0..3)
            .map(|i| TileDrawing {
                base_offset: Point::new(300.0 * (i as f64 - 1.0), 0.0),
                passes: vec![pass(0, vec![vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]])],
            })
            .collect();
        let prog = PlotterProgram::build(&tiles).unwrap();
        assert_eq!(prog.count(|i| matches!(i, Instruction::Base(..))), 2);
        assert!(prog.instructions.contains(&Instruction::Base(300.0, 0.0)));
    }

    #[test]
    fn one_tool_per_channel() {
        let passes = (0..4)
            .map(|t| pass(t, vec![vec![Point::new(0.0, t as f64), Point::new(1.0, 1.0)]]))
            .chain([pass(4, vec![])])
            .collect();
        let prog = PlotterProgram::build(&[TileDrawing {
            base_offset: Point::default(),
            passes,
        }])
        .unwrap();
        assert_eq!(prog.count(|i| matches!(i, Instruction::Tool(_))), 4);
        assert!(PlotterProgram::build(&[]).unwrap().instructions.is_empty());
    }

    #[test]
    fn parse_round_trip_and_strokes() {
        let strokes = vec![
            vec![Point::new(0.5, 0.25), Point::new(1.125, 2.0), Point::new(3.0, 3.0)],
            vec![Point::new(7.0, 7.0)],
        ];
        let prog = PlotterProgram::build(&[TileDrawing {
            base_offset: Point::default(),
            passes: vec![pass(1, strokes.clone())],
        }])
        .unwrap();
        let back = PlotterProgram::parse(&prog.to_text()).unwrap();
        assert_eq!(back, prog);
        assert_eq!(back.strokes(), strokes);
        assert!(matches!(
            PlotterProgram::parse("PENUP\nJUMP 1\n"),
            Err(OutputError::ProgramParse { line: 2, .. })
        ));
    }
}
