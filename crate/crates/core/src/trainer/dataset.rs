use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::{load_image, resize_bicubic, Image};

/// Unpaired training data, already resized to the network input size.
#[derive(Clone, Debug)]
pub struct Dataset {
    source: Vec<Image>,
    target: Vec<Image>,
    size: usize,
}

impl Dataset {
    /// Resize everything to `size x size` once, up front.
    pub fn from_images(source: Vec<Image>, target: Vec<Image>, size: usize) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::invalid("dataset needs at least one source and one target image"));
        }
        let fit = |v: Vec<Image>| -> Result<Vec<Image>> { v.iter().map(|im| resize_bicubic(im, size, size)).collect() };
        Ok(Dataset {
            source: fit(source)?,
            target: fit(target)?,
            size,
        })
    }

    pub fn from_dirs(source: impl AsRef<Path>, target: impl AsRef<Path>, size: usize) -> Result<Self> {
        let src = load_dir(source.as_ref())?;
        let tgt = load_dir(target.as_ref())?;
        Self::from_images(src, tgt, size)
    }

    pub fn source(&self) -> &[Image] {
        &self.source
    }

    pub fn target(&self) -> &[Image] {
        &self.target
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn sample_source<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<&Image> {
        sample(&self.source, count, rng)
    }

    pub fn sample_target<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<&Image> {
        sample(&self.target, count, rng)
    }
}

fn sample<'a, R: Rng + ?Sized>(pool: &'a [Image], count: usize, rng: &mut R) -> Vec<&'a Image> {
    (0..count).map(|_| &pool[rng.gen_range(0..pool.len())]).collect()
}

/// Regular files in `dir`, sorted by name so runs are reproducible.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Every decodable image in `dir`; undecodable files are skipped with a warning.
pub fn load_dir(dir: &Path) -> Result<Vec<Image>> {
    let mut out = Vec::new();
    for path in list_files(dir)? {
        match load_image(&path) {
            Ok(img) => out.push(img),
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("no decodable images in {}", dir.display())));
    }
    Ok(out)
}
