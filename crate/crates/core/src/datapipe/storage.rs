//! Episode directories on disk: one PNG per raster, newline-delimited frame
//! records, a meta file per episode, and a manifest tying episodes together.

use super::sample::{EpisodeMeta, FrameRecord, Sample};
use super::DataError;
use crate::simworld::CameraConfig;
use image::{ImageBuffer, Luma, Rgb};
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const META_FILE: &str = "meta.json";
pub const MANIFEST_FILE: &str = "manifest.json";

fn rgb_name(frame: usize) -> String {
    format!("rgb_{frame:06}.png")
}

fn depth_name(frame: usize) -> String {
    format!("depth_{frame:06}.png")
}

fn semantic_name(frame: usize) -> String {
    format!("sem_{frame:06}.png")
}

/// Streams samples of one episode into `dir`: rasters under `frames/`,
/// records appended to a JSONL file, meta written on `finish`.
pub struct EpisodeWriter {
    dir: PathBuf,
    records: BufWriter<File>,
    n_frames: usize,
}

impl EpisodeWriter {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self, DataError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join("frames"))?;
        let records = BufWriter::new(File::create(dir.join(RECORDS_FILE))?);
        Ok(Self {
            dir,
            records,
            n_frames: 0,
        })
    }

    pub fn append(&mut self, sample: &Sample) -> Result<(), DataError> {
        let frames = self.dir.join("frames");
        let id = sample.record.frame;
        save_rgb(frames.join(rgb_name(id)), &sample.rgb)?;
        save_depth(frames.join(depth_name(id)), &sample.depth)?;
        save_semantic(frames.join(semantic_name(id)), &sample.semantic)?;
        serde_json::to_writer(&mut self.records, &sample.record)?;
        self.records.write_all(b"\n")?;
        self.n_frames += 1;
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn finish(mut self, meta: &EpisodeMeta) -> Result<(), DataError> {
        self.records.flush()?;
        let file = File::create(self.dir.join(META_FILE))?;
        serde_json::to_writer_pretty(BufWriter::new(file), meta)?;
        Ok(())
    }
}

fn save_rgb(path: PathBuf, rgb: &Array3<u8>) -> Result<(), DataError> {
    let (h, w, _) = rgb.dim();
    let img = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        Rgb([rgb[[y, x, 0]], rgb[[y, x, 1]], rgb[[y, x, 2]]])
    });
    img.save(path)?;
    Ok(())
}

fn save_depth(path: PathBuf, depth: &Array2<u16>) -> Result<(), DataError> {
    let (h, w) = depth.dim();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
            Luma([depth[[y as usize, x as usize]]])
        });
    img.save(path)?;
    Ok(())
}

fn save_semantic(path: PathBuf, semantic: &Array2<u8>) -> Result<(), DataError> {
    let (h, w) = semantic.dim();
    let img: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        Luma([semantic[[y as usize, x as usize]]])
    });
    img.save(path)?;
    Ok(())
}

/// Read back one frame's rasters and pair them with its record.
pub fn load_sample(episode_dir: impl AsRef<Path>, record: &FrameRecord) -> Result<Sample, DataError> {
    let frames = episode_dir.as_ref().join("frames");
    let id = record.frame;
    let rgb_img = image::open(frames.join(rgb_name(id)))?.into_rgb8();
    let (w, h) = (rgb_img.width() as usize, rgb_img.height() as usize);
    let rgb = Array3::from_shape_fn((h, w, 3), |(y, x, c)| {
        rgb_img.get_pixel(x as u32, y as u32).0[c]
    });
    let depth_img = image::open(frames.join(depth_name(id)))?.into_luma16();
    let sem_img = image::open(frames.join(semantic_name(id)))?.into_luma8();
    if depth_img.dimensions() != rgb_img.dimensions()
        || sem_img.dimensions() != rgb_img.dimensions()
    {
        return Err(DataError::ShapeMismatch {
            context: format!(
                "frame {id}: rgb {:?}, depth {:?}, semantic {:?}",
                rgb_img.dimensions(),
                depth_img.dimensions(),
                sem_img.dimensions()
            ),
        });
    }
    let depth = Array2::from_shape_fn((h, w), |(y, x)| depth_img.get_pixel(x as u32, y as u32).0[0]);
    let semantic =
        Array2::from_shape_fn((h, w), |(y, x)| sem_img.get_pixel(x as u32, y as u32).0[0]);
    Ok(Sample {
        rgb,
        depth,
        semantic,
        record: record.clone(),
    })
}

pub fn read_records(episode_dir: impl AsRef<Path>) -> Result<Vec<FrameRecord>, DataError> {
    let path = episode_dir.as_ref().join(RECORDS_FILE);
    let reader = BufReader::new(File::open(&path)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

pub fn read_meta(episode_dir: impl AsRef<Path>) -> Result<EpisodeMeta, DataError> {
    let file = File::open(episode_dir.as_ref().join(META_FILE))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Read every frame of an episode in record order.
pub fn load_episode_samples(episode_dir: impl AsRef<Path>) -> Result<Vec<Sample>, DataError> {
    let dir = episode_dir.as_ref();
    read_records(dir)?
        .iter()
        .map(|r| load_sample(dir, r))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEntry {
    /// Episode directory, relative to the manifest's directory.
    pub dir: String,
    pub meta: EpisodeMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub camera: CameraConfig,
    pub episodes: Vec<EpisodeEntry>,
}

impl DatasetManifest {
    pub fn total_frames(&self) -> usize {
        self.episodes.iter().map(|e| e.meta.n_frames).sum()
    }
}

pub fn write_manifest(root: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<(), DataError> {
    let root = root.as_ref();
    fs::create_dir_all(root)?;
    let file = File::create(root.join(MANIFEST_FILE))?;
    serde_json::to_writer_pretty(BufWriter::new(file), manifest)?;
    Ok(())
}

pub fn read_manifest(root: impl AsRef<Path>) -> Result<DatasetManifest, DataError> {
    let path = root.as_ref().join(MANIFEST_FILE);
    if !path.exists() {
        return Err(DataError::MissingArtifact(format!(
            "dataset manifest {}",
            path.display()
        )));
    }
    let file = File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}
