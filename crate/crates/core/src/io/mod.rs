//! Dataset ingestion, model files and sweep tables.

mod mnist;
mod model_file;
mod sweep;
mod wbc;

pub use mnist::{
    load_mnist, load_mnist_raw, rescale_pixel, MnistRaw, IMAGE_MAGIC, LABEL_MAGIC, SIDE,
};
pub use model_file::{
    load_model, read_model_file, save_model, ModelFile, MODEL_MAGIC, MODEL_VERSION,
};
pub use sweep::{read_sweep, write_sweep, SweepRow, SWEEP_HEADER};
pub use wbc::{load_wbc, WBC_FEATURES, WBC_TRAIN_ROWS};
