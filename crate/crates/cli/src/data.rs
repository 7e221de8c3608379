//! Dataset generation, the on-disk manifest, and loading it back.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wfa::synthdata::{make_dataset, read_ply, read_xyz, DatasetTemplate, LabeledDataset, Sample, ShapeKind, Split};
use wfa::{PointCloud, Seed};

use crate::args::DataArgs;
use crate::{io_err, CliError};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the dataset directory.
    pub file: String,
    pub split: Split,
    pub label: usize,
    pub class: String,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub class_names: Vec<String>,
    pub n_points: usize,
    pub noise_sigma: f64,
    pub files: Vec<ManifestEntry>,
}

/// The manifest as it sits on disk: the report envelope around [`Manifest`].
#[derive(Deserialize)]
struct ManifestFile {
    result: Manifest,
}

pub fn template(classes: u64, points: u64, noise: f64, normals: bool) -> DatasetTemplate {
    DatasetTemplate {
        kinds: ShapeKind::ALL[..classes as usize].to_vec(),
        n_points: points as usize,
        noise_sigma: noise,
        with_normals: normals,
    }
}

pub fn generate(
    per_class: u64,
    template: &DatasetTemplate,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), CliError> {
    Ok(make_dataset(per_class as usize, template, train_fraction, Seed(seed))?)
}

pub fn file_name(split: Split, index: usize, class: &str) -> String {
    let dir = match split {
        Split::Train => "train",
        Split::Test => "test",
    };
    format!("{dir}/{index:04}_{class}.ply")
}

pub fn manifest_for(template: &DatasetTemplate, train: &LabeledDataset, test: &LabeledDataset) -> Manifest {
    let mut files = Vec::new();
    for set in [train, test] {
        for (i, s) in set.samples.iter().enumerate() {
            let class = set.class_names[s.label].clone();
            files.push(ManifestEntry {
                file: file_name(set.split, i, &class),
                split: set.split,
                label: s.label,
                class,
                seed: s.seed.0,
            });
        }
    }
    Manifest {
        class_names: train.class_names.clone(),
        n_points: template.n_points,
        noise_sigma: template.noise_sigma,
        files,
    }
}

/// Reads a dataset directory written by `gen-data`.
pub fn load_dir(dir: &Path) -> Result<(LabeledDataset, LabeledDataset), CliError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let manifest: ManifestFile = serde_json::from_str(&text).map_err(|e| io_err(&path, e))?;
    let m = manifest.result;
    let k = m.class_names.len();
    let mut sets = [Split::Train, Split::Test].map(|split| LabeledDataset {
        samples: Vec::new(),
        class_names: m.class_names.clone(),
        split,
        per_class_counts: vec![0; k],
    });
    for e in m.files {
        if e.label >= k {
            return Err(io_err(&path, format!("label {} of {} out of range", e.label, e.file)));
        }
        let cloud = read_cloud(&dir.join(&e.file))?;
        let set = &mut sets[usize::from(e.split == Split::Test)];
        set.per_class_counts[e.label] += 1;
        set.samples.push(Sample {
            cloud,
            label: e.label,
            seed: Seed(e.seed),
        });
    }
    let [train, test] = sets;
    Ok((train, test))
}

/// Either the `--data` directory or a freshly generated dataset.
pub fn load(args: &DataArgs) -> Result<(LabeledDataset, LabeledDataset), CliError> {
    match &args.data {
        Some(dir) => load_dir(dir),
        None => generate(
            args.per_class,
            &template(args.classes, args.points, args.noise, false),
            args.train_fraction,
            args.data_seed,
        ),
    }
}

/// PLY by extension, otherwise whitespace/comma separated columns.
pub fn read_cloud(path: &Path) -> Result<PointCloud, CliError> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let cloud = match ext.as_deref() {
        Some("ply") => read_ply(path),
        _ => read_xyz(path),
    };
    cloud.map_err(|e| match e {
        wfa::Error::Io(io) => io_err(path, io),
        other => io_err(path, other),
    })
}

pub fn ensure_dir(dir: &PathBuf) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}
