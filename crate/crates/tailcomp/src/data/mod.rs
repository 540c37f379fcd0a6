//! Binary embedding/classifier file formats and a synthetic long-tail
//! embedding generator.

mod format;
mod synth;

pub use format::{
    load_classifier, load_embd, load_head, load_prototypes, save_classifier, save_embd, save_head,
    save_prototypes, HeadFile, StoredKind, EMBD_MAGIC, FORMAT_VERSION, HEAD_MAGIC,
};
pub use synth::{class_counts, generate_synthetic, SynthConfig};
