//! SVG rendering (to be filled).
