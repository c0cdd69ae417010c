//! Persistence and configuration: dataset directories, checkpoints, run manifests,
//! experiment configs and recorded-data ingestion.

mod checkpoint;
mod config;
mod dataset;
mod fsutil;
mod ingest;
mod manifest;

pub use checkpoint::{Architecture, Checkpoint, CheckpointHeader, CHECKPOINT_VERSION, MAGIC};
pub use config::{locate_field, ExperimentConfig};
pub use dataset::{
    decode_array, encode_array, load_dataset, load_metadata, metadata_path, save_dataset, DatasetMetadata, SplitInfo,
    DATASET_FORMAT, DATASET_VERSION,
};
pub use fsutil::{read, read_string, require, sha256_file, sha256_hex, write_atomic};
pub use ingest::{ingest_recordings, read_labels, read_recording, GyroUnits, IngestConfig, Recording, LABELS_FILE};
pub use manifest::{ProducedFile, RunManifest, MANIFEST_FILE};
