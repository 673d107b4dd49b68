use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::sim::LayerStack;

/// First line of every emitted file.
pub const GCODE_HEADER: &str = "; growform toolpath";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrinterProfile {
    pub nozzle_diameter: f64,
    pub layer_height: f64,
    pub filament_diameter: f64,
    pub extrusion_multiplier: f64,
    /// mm/min
    pub print_feed: f64,
    /// mm/min
    pub travel_feed: f64,
    pub bed_size: [f64; 2],
    /// Hotend temperature, °C.
    pub temperature: f64,
}

impl Default for PrinterProfile {
    fn default() -> Self {
        PrinterProfile {
            nozzle_diameter: 0.4,
            layer_height: 0.2,
            filament_diameter: 1.75,
            extrusion_multiplier: 1.0,
            print_feed: 1200.0,
            travel_feed: 3000.0,
            bed_size: [220.0, 220.0],
            temperature: 200.0,
        }
    }
}

impl PrinterProfile {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.nozzle_diameter,
            self.layer_height,
            self.filament_diameter,
            self.extrusion_multiplier,
            self.print_feed,
            self.travel_feed,
            self.bed_size[0],
            self.bed_size[1],
            self.temperature,
        ];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("printer profile values must be positive".into()));
        }
        if self.layer_height > self.nozzle_diameter {
            return Err(Error::Config("layer_height must not exceed nozzle_diameter".into()));
        }
        Ok(())
    }
}

/// Filament length fed per mm of extruded strand.
pub fn flow_per_mm(p: &PrinterProfile) -> f64 {
    let r = p.filament_diameter / 2.0;
    p.layer_height * p.nozzle_diameter / (PI * r * r) * p.extrusion_multiplier
}

/// Toolpath for a stack: one closed perimeter per organism per layer, seam at
/// the first vertex, relative extrusion. The stack is scaled to mm and its
/// bounding box centred on the bed. Layer `i` prints at `(i + 1) * layer_height`.
pub fn to_gcode(stack: &LayerStack, profile: &PrinterProfile) -> Result<String> {
    profile.validate()?;
    let scale = stack.config.unit_to_mm;
    let flow = flow_per_mm(profile);

    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in stack.layers.iter().flat_map(|l| l.vertices()) {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let bed = Point::new(profile.bed_size[0], profile.bed_size[1]);
    let shift = if lo.x.is_finite() { bed * 0.5 - (lo + hi) * (0.5 * scale) } else { Point::ZERO };
    let place = |p: Point| p * scale + shift;

    let tol = 1e-9;
    for (i, layer) in stack.layers.iter().enumerate() {
        if let Some(p) = layer.vertices().map(place).find(|p| p.x < -tol || p.y < -tol || p.x > bed.x + tol || p.y > bed.y + tol) {
            return Err(Error::Export(format!(
                "layer {i} does not fit the {}x{} mm bed (point at {:.3}, {:.3} mm)",
                bed.x, bed.y, p.x, p.y
            )));
        }
    }

    let mut out = String::new();
    let t = profile.temperature;
    writeln!(out, "{GCODE_HEADER}").unwrap();
    writeln!(out, "; layers {}", stack.layers.len()).unwrap();
    writeln!(out, "; flow {flow:.6} mm filament per mm").unwrap();
    out.push_str("G21\nG90\nM83\n");
    writeln!(out, "M104 S{t:.0}\nM109 S{t:.0}").unwrap();
    out.push_str("G28\nG92 E0\n");

    let mut z = 0.0;
    for (i, layer) in stack.layers.iter().enumerate() {
        z = (i + 1) as f64 * profile.layer_height;
        writeln!(out, "; layer {i}").unwrap();
        writeln!(out, "G0 Z{z:.3} F{:.0}", profile.travel_feed).unwrap();
        for ring in layer.polygons.iter().filter(|r| r.len() >= 2) {
            let start = place(ring[0]);
            writeln!(out, "G0 X{:.3} Y{:.3} F{:.0}", start.x, start.y, profile.travel_feed).unwrap();
            let mut first = true;
            let mut cur = start;
            for k in 1..=ring.len() {
                let next = place(ring[k % ring.len()]);
                let len = cur.dist(next);
                if len <= 0.0 {
                    continue;
                }
                write!(out, "G1 X{:.3} Y{:.3} E{:.5}", next.x, next.y, len * flow).unwrap();
                if first {
                    write!(out, " F{:.0}", profile.print_feed).unwrap();
                    first = false;
                }
                out.push('\n');
                cur = next;
            }
        }
    }
    out.push_str("; end\nG1 E-1.00000 F1800\n");
    writeln!(out, "G0 Z{:.3} F{:.0}", z + 10.0, profile.travel_feed).unwrap();
    out.push_str("M104 S0\nM84\n");
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcodeCommand {
    pub code: String,
    pub params: Vec<(char, f64)>,
}

impl GcodeCommand {
    pub fn get(&self, letter: char) -> Option<f64> {
        self.params.iter().find(|(l, _)| *l == letter).map(|&(_, v)| v)
    }
}

/// Commands accepted by [`parse_gcode`] and the parameters each may carry.
const SUBSET: [(&str, &str); 11] = [
    ("G0", "XYZF"),
    ("G1", "XYZEF"),
    ("G21", ""),
    ("G28", ""),
    ("G90", ""),
    ("G92", "E"),
    ("M83", ""),
    ("M84", ""),
    ("M104", "S"),
    ("M109", "S"),
    ("M107", ""),
];

/// Strict parser for the emitted subset: one command per line, full-line
/// comments only, decimal parameters, each parameter letter at most once.
pub fn parse_gcode(text: &str) -> Result<Vec<GcodeCommand>> {
    let mut cmds = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let bad = |m: &str| Error::Parse(format!("line {}: {m}: {line:?}", n + 1));
        if line.starts_with(';') {
            continue;
        }
        let mut words = line.split(' ');
        let code = words.next().unwrap_or_default();
        let Some(&(_, allowed)) = SUBSET.iter().find(|(c, _)| *c == code) else {
            return Err(bad("unsupported command"));
        };
        let mut params: Vec<(char, f64)> = Vec::new();
        for w in words {
            let mut chars = w.chars();
            let letter = chars.next().ok_or_else(|| bad("empty word"))?;
            let num = chars.as_str();
            if !allowed.contains(letter) {
                return Err(bad("parameter not allowed"));
            }
            if params.iter().any(|(l, _)| *l == letter) {
                return Err(bad("repeated parameter"));
            }
            let decimal = !num.is_empty()
                && num.trim_start_matches('-').chars().all(|c| c.is_ascii_digit() || c == '.')
                && num.matches('.').count() <= 1
                && num.trim_start_matches('-').starts_with(|c: char| c.is_ascii_digit());
            let value: f64 = num.parse().ok().filter(|_| decimal).ok_or_else(|| bad("malformed number"))?;
            params.push((letter, value));
        }
        cmds.push(GcodeCommand { code: code.to_string(), params });
    }
    Ok(cmds)
}

/// Aggregates over a parsed program.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GcodeSummary {
    /// Sum of positive E over moves that also move in XY.
    pub total_extrusion: f64,
    pub extrusion_moves: usize,
    pub z_values: Vec<f64>,
    /// Extrusion moves with E <= 0.
    pub non_positive_extrusions: usize,
}

impl GcodeSummary {
    pub fn of(cmds: &[GcodeCommand]) -> Self {
        let mut s = GcodeSummary::default();
        for c in cmds.iter().filter(|c| c.code == "G0" || c.code == "G1") {
            if let Some(z) = c.get('Z') {
                s.z_values.push(z);
            }
            let xy = c.get('X').is_some() || c.get('Y').is_some();
            if let (true, Some(e)) = (xy, c.get('E')) {
                s.extrusion_moves += 1;
                if e > 0.0 {
                    s.total_extrusion += e;
                } else {
                    s.non_positive_extrusions += 1;
                }
            }
        }
        s
    }
}
