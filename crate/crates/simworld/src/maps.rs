//! Bundled map fixtures.

/// Closed loop corridor, two cells wide, with a U-shaped detour.
pub const CIRCUIT2: &str = include_str!("../maps/circuit2.map");
/// Branching corridors with dead ends.
pub const MAZE: &str = include_str!("../maps/maze.map");

pub fn by_name(name: &str) -> Option<&'static str> {
    match name {
        "circuit2" | "circuit2.map" => Some(CIRCUIT2),
        "maze" | "maze.map" => Some(MAZE),
        _ => None,
    }
}
