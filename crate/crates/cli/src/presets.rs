//! Bundled demo configurations.

pub const TORUS: &str = include_str!("../presets/torus.json");
pub const LINE: &str = include_str!("../presets/line.json");
pub const PLASMA: &str = include_str!("../presets/plasma.json");

pub fn get(name: &str) -> Option<&'static str> {
    match name {
        "torus" => Some(TORUS),
        "line" => Some(LINE),
        "plasma" => Some(PLASMA),
        _ => None,
    }
}
