//! JSON file formats (to be filled).
