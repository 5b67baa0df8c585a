//! View manifest CSV: one row per view,
//! `azimuth_deg,elevation_deg,distance,image_path`, header line required.
//! Relative image paths resolve against the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::fit::ViewSet;
use crate::pgm::read_pgm;

pub const MANIFEST_HEADER: &str = "azimuth_deg,elevation_deg,distance,image_path";

#[derive(Debug, Clone, PartialEq)]
pub struct ViewRecord {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance: f64,
    pub image_path: String,
}

pub fn write_manifest(records: &[ViewRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.azimuth_deg, r.elevation_deg, r.distance, r.image_path
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ViewRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |line: usize, message: String| Error::ManifestParse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == MANIFEST_HEADER => {}
        Some((_, header)) => {
            return Err(malformed(
                1,
                format!("expected header '{MANIFEST_HEADER}', got '{header}'"),
            ))
        }
        None => return Err(malformed(1, "empty manifest".into())),
    }

    let mut records = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(malformed(
                lineno,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let number = |field: &str, name: &str| {
            field.trim().parse::<f64>().map_err(|_| {
                malformed(lineno, format!("{name} '{}' is not a number", field.trim()))
            })
        };
        let record = ViewRecord {
            azimuth_deg: number(fields[0], "azimuth")?,
            elevation_deg: number(fields[1], "elevation")?,
            distance: number(fields[2], "distance")?,
            image_path: fields[3].trim().to_string(),
        };
        if !(record.distance > 0.0) {
            return Err(malformed(lineno, "distance must be positive".into()));
        }
        records.push(record);
    }
    Ok(records)
}

/// Reads a manifest plus its referenced PGM masks into a [`ViewSet`]. Image
/// sizes set the camera resolution; the field of view is not stored in the
/// manifest and is supplied by the caller.
pub fn load_view_set(manifest_path: impl AsRef<Path>, fov_y_deg: f64) -> Result<ViewSet> {
    let manifest_path = manifest_path.as_ref();
    let records = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut views = Vec::with_capacity(records.len());
    for record in &records {
        let image_path = resolve(base, &record.image_path);
        let image = read_pgm(&image_path)?;
        let camera = Camera {
            azimuth_deg: record.azimuth_deg,
            elevation_deg: record.elevation_deg,
            distance: record.distance,
            fov_y_deg,
            width: image.width,
            height: image.height,
        };
        views.push((camera, image.to_mask()));
    }
    ViewSet::new(views)
}

fn resolve(base: &Path, image_path: &str) -> PathBuf {
    let p = Path::new(image_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgm::{write_pgm, GrayscaleImage};

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("views.csv");
        let records = vec![
            ViewRecord {
                azimuth_deg: 0.0,
                elevation_deg: 30.0,
                distance: 2.732,
                image_path: "view_000.pgm".into(),
            },
            ViewRecord {
                azimuth_deg: 15.0,
                elevation_deg: 30.0,
                distance: 2.732,
                image_path: "view_001.pgm".into(),
            },
        ];
        write_manifest(&records, &path).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), records);
    }

    #[test]
    fn missing_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("views.csv");
        std::fs::write(&path, "0,30,2.732,a.pgm\n").unwrap();
        match read_manifest(&path) {
            Err(Error::ManifestParse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected manifest error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("views.csv");
        std::fs::write(
            &path,
            format!("{MANIFEST_HEADER}\n0,30,2.732,a.pgm\n0,not-a-number,2.732,b.pgm\n"),
        )
        .unwrap();
        match read_manifest(&path) {
            Err(Error::ManifestParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected manifest error, got {other:?}"),
        }
    }

    #[test]
    fn load_view_set_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let image = GrayscaleImage::new(8, 8, vec![255; 64]).unwrap();
        write_pgm(&image, dir.path().join("v0.pgm")).unwrap();
        let manifest = dir.path().join("views.csv");
        std::fs::write(&manifest, format!("{MANIFEST_HEADER}\n10,30,2.5,v0.pgm\n")).unwrap();
        let views = load_view_set(&manifest, 30.0).unwrap();
        assert_eq!(views.len(), 1);
        let (camera, mask) = &views.views()[0];
        assert_eq!(camera.width, 8);
        assert_eq!(camera.azimuth_deg, 10.0);
        assert!(mask.values().iter().all(|&b| b));
    }
}
