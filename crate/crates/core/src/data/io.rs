use std::path::Path;

use crate::data::{Dataset, Image, Instance, LabelVector, SplitTag, CHANNELS};
use crate::error::{Error, Result};

/// Writes `manifest.csv` (header `id,<label>*`, rows of id + 0/1 flags) plus
/// `images/<id>.png` as 8-bit RGB.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    let images_dir = dir.join("images");
    std::fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;

    let manifest_path = dir.join("manifest.csv");
    let mut writer = csv::Writer::from_path(&manifest_path)?;
    let mut header = vec!["id".to_string()];
    header.extend(ds.label_names.iter().cloned());
    writer.write_record(&header)?;
    for inst in &ds.instances {
        let mut row = vec![inst.id.clone()];
        row.extend(inst.labels.bits().iter().map(|b| b.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| Error::io(&manifest_path, e))?;

    for inst in &ds.instances {
        let (h, w) = (inst.image.height(), inst.image.width());
        let bytes: Vec<u8> = inst
            .image
            .pixels()
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        let buf = image::RgbImage::from_raw(w as u32, h as u32, bytes)
            .expect("pixel buffer matches dimensions");
        let path = images_dir.join(format!("{}.png", inst.id));
        buf.save(&path).map_err(|e| Error::Image { path, source: e })?;
    }
    Ok(())
}

/// Loads a dataset saved by [`save_dataset`]. The split tag is taken from the
/// directory name when it is `train`/`valid`/`test`, defaulting to `train`.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.csv");
    if !manifest_path.exists() {
        return Err(Error::Malformed { path: manifest_path, reason: "manifest.csv missing".into() });
    }
    let mut reader = csv::Reader::from_path(&manifest_path)?;
    let header = reader.headers()?.clone();
    if header.is_empty() || &header[0] != "id" {
        return Err(Error::Malformed {
            path: manifest_path,
            reason: "manifest header must start with `id`".into(),
        });
    }
    let label_names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n_labels = label_names.len();

    let mut instances = Vec::new();
    for record in reader.records() {
        let record = record?;
        let id = record.get(0).unwrap_or_default().to_string();
        if record.len() != n_labels + 1 {
            return Err(Error::Instance {
                id,
                reason: format!("manifest row has {} label columns, expected {n_labels}", record.len() - 1),
            });
        }
        let mut bits = Vec::with_capacity(n_labels);
        for field in record.iter().skip(1) {
            match field {
                "0" => bits.push(0),
                "1" => bits.push(1),
                other => {
                    return Err(Error::Instance {
                        id,
                        reason: format!("label flag `{other}` is not 0/1"),
                    })
                }
            }
        }
        let path = dir.join("images").join(format!("{id}.png"));
        let decoded = image::open(&path).map_err(|e| Error::Instance {
            id: id.clone(),
            reason: format!("cannot read image {}: {e}", path.display()),
        })?;
        let rgb = decoded.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let pixels: Vec<f64> = rgb.into_raw().iter().map(|b| *b as f64 / 255.0).collect();
        debug_assert_eq!(pixels.len(), h * w * CHANNELS);
        let image = Image::new(h, w, pixels).map_err(|e| Error::Instance {
            id: id.clone(),
            reason: format!("bad image contents: {e}"),
        })?;
        instances.push(Instance { id, image, labels: LabelVector::new(bits)? });
    }

    let split_tag = match dir.file_name().and_then(|n| n.to_str()) {
        Some(name) if name.contains("valid") => SplitTag::Valid,
        Some(name) if name.contains("test") => SplitTag::Test,
        _ => SplitTag::Train,
    };
    Dataset::new(instances, label_names, split_tag)
}
