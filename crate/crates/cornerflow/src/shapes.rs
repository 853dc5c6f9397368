//! Shape catalog by name.

use std::path::Path;

use cornerflow_core::geometry::{GeometryError, ObstacleShape, Point};

/// Turning threshold for corners in `custom:` boundary files.
pub const CUSTOM_CORNER_TURN: f64 = 0.2;

#[derive(Debug, thiserror::Error)]
pub enum ShapeError {
    #[error("unknown shape {0:?}; expected disk, square, regular-polygon:N or custom:PATH")]
    Unknown(String),
    #[error("cannot read boundary file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("boundary file {path}, line {line}: expected `x y`")]
    BadLine { path: String, line: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub fn resolve_shape(name: &str) -> Result<ObstacleShape, ShapeError> {
    match name {
        "disk" => return Ok(ObstacleShape::disk()),
        "square" => return Ok(ObstacleShape::square()),
        _ => {}
    }
    if let Some(n) = name.strip_prefix("regular-polygon:") {
        let n: usize = n.trim().parse().map_err(|_| ShapeError::Unknown(name.into()))?;
        return Ok(ObstacleShape::regular_polygon(n)?);
    }
    if let Some(path) = name.strip_prefix("custom:") {
        let text = std::fs::read_to_string(path).map_err(|source| ShapeError::Io { path: path.into(), source })?;
        let points = parse_points(&text, path)?;
        let stem = Path::new(path).file_stem().and_then(|s| s.to_str()).unwrap_or("boundary");
        return Ok(ObstacleShape::custom(stem, points, CUSTOM_CORNER_TURN)?);
    }
    Err(ShapeError::Unknown(name.into()))
}

fn parse_points(text: &str, path: &str) -> Result<Vec<Point>, ShapeError> {
    let mut pts = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<f64>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) => pts.push(Point::new(x, y)),
            _ => return Err(ShapeError::BadLine { path: path.into(), line: n + 1 }),
        }
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names() {
        assert_eq!(resolve_shape("square").unwrap().corners.len(), 4);
        assert_eq!(resolve_shape("regular-polygon:6").unwrap().corners.len(), 6);
        assert!(resolve_shape("disk").unwrap().corners.is_empty());
        assert!(matches!(resolve_shape("blob"), Err(ShapeError::Unknown(_))));
    }

    #[test]
    fn custom_file() {
        let dir = std::env::temp_dir().join(format!("cf-shape-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("tri.txt");
        std::fs::write(&p, "1 0\n-0.5 0.8\n-0.5 -0.8\n").unwrap();
        let s = resolve_shape(&format!("custom:{}", p.display())).unwrap();
        assert_eq!(s.corners.len(), 3);
        std::fs::write(&p, "1 0\nfoo\n").unwrap();
        assert!(matches!(resolve_shape(&format!("custom:{}", p.display())), Err(ShapeError::BadLine { line: 2, .. })));
    }
}
