use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use sparse_iqa::decoder::{export_filter_grid, train, write_filter_grid_png};
use sparse_iqa::model_io::{load_model, save_model, write_atomic};
use sparse_iqa::preprocess::{
    apply_normalization, fit_normalization, sample_random_patches_stream,
};
use sparse_iqa::{ChannelImage, Execution, PatchBatch};
use walkdir::WalkDir;

use crate::cli::{ExportArgs, TrainArgs};
use crate::config::RunConfig;
use crate::{CliError, Outcome};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

/// Image files under `root`, sorted by path relative to `root`.
pub fn list_images(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !root.is_dir() {
        return Err(CliError::usage(format!("{}: not a directory", root.display())));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(root).follow_links(true) {
        let entry = entry.map_err(|e| CliError::usage(e.to_string()))?;
        let is_image = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if entry.file_type().is_file() && is_image {
            files.push(entry.path().strip_prefix(root).unwrap().to_path_buf());
        }
    }
    files.sort();
    Ok(files)
}

/// Seeded subset of at most `budget` entries, in their original order.
pub fn select_subset<T: Clone>(items: &[T], budget: usize, seed: u64) -> Vec<T> {
    if items.len() <= budget {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, items.len(), budget).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i].clone()).collect()
}

struct Loaded {
    relative: PathBuf,
    file_hash: Vec<u8>,
    patches: Result<PatchBatch, String>,
}

fn load_patches(root: &Path, relative: &Path, count: usize, seed: u64, stream: u64) -> Loaded {
    let path = root.join(relative);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) => {
            return Loaded {
                relative: relative.to_path_buf(),
                file_hash: Vec::new(),
                patches: Err(e.to_string()),
            }
        }
    };
    let file_hash = Sha256::digest(&bytes).to_vec();
    let patches = image::load_from_memory(&bytes)
        .map_err(|e| e.to_string())
        .and_then(|img| ChannelImage::from_dynamic(&img).map_err(|e| e.to_string()))
        .and_then(|img| {
            sample_random_patches_stream(&img, count, seed, stream).map_err(|e| e.to_string())
        });
    Loaded { relative: relative.to_path_buf(), file_hash, patches }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn apply_flags(args: &TrainArgs, mut config: RunConfig) -> Result<RunConfig, CliError> {
    macro_rules! overlay {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = args.$flag.clone() { config.$($field).+ = v.into(); })*
        };
    }
    overlay!(
        seed => seed,
        patches_per_image => patches_per_image,
        max_images => max_images,
        epsilon => epsilon,
        hidden => decoder.n_hidden,
        rho => decoder.rho,
        beta => decoder.beta,
        lambda => decoder.lambda,
        max_iter => decoder.max_iterations,
        lbfgs_memory => decoder.lbfgs_memory,
        corpus => corpus,
        model => model,
        trace => trace,
        filters => filters,
    );
    if let Some(policy) = args.suppression.policy() {
        config.suppression = policy;
    }
    config.validate()?;
    Ok(config)
}

pub fn run(args: TrainArgs, config: RunConfig) -> Outcome {
    let config = apply_flags(&args, config)?;
    let corpus = config
        .corpus
        .clone()
        .ok_or_else(|| CliError::usage("--corpus is required"))?;
    let model_path = config
        .model
        .clone()
        .ok_or_else(|| CliError::usage("--model is required"))?;

    let all = list_images(&corpus)?;
    if all.is_empty() {
        return Err(CliError::usage(format!("{}: no images found", corpus.display())));
    }
    let selected = select_subset(&all, config.max_images, config.seed);
    if all.len() < config.max_images {
        eprintln!(
            "note: corpus has {} images, fewer than the budget of {}; using all of them",
            all.len(),
            config.max_images
        );
    }
    info!("sampling {} patches from each of {} images", config.patches_per_image, selected.len());

    let indexed: Vec<(u64, &PathBuf)> = (0u64..).zip(selected.iter()).collect();
    let loaded = Execution::Parallel.map(&indexed, |&(i, rel)| {
        load_patches(&corpus, rel, config.patches_per_image, config.seed, i)
    });

    let mut digest = Sha256::new();
    let mut batches = Vec::with_capacity(loaded.len());
    let mut skipped = 0usize;
    for item in &loaded {
        match &item.patches {
            Ok(batch) => {
                digest.update(item.relative.to_string_lossy().as_bytes());
                digest.update([0u8]);
                digest.update(&item.file_hash);
                batches.push(batch);
            }
            Err(e) => {
                warn!("skipping {}: {e}", item.relative.display());
                skipped += 1;
            }
        }
    }
    if batches.is_empty() {
        return Err(CliError::usage("no usable images in corpus"));
    }
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} of {} images", loaded.len());
    }
    let patches = PatchBatch::concat(batches);
    drop(loaded);

    let stats = fit_normalization(&patches, config.epsilon)?;
    let whitened = apply_normalization(&patches, &stats)?;
    drop(patches);
    info!("training on {} whitened patches", whitened.len());
    let (mut model, trace) = train(&whitened, &config.decoder, &stats, config.seed)?;
    for w in &trace.warnings {
        warn!("{w}");
    }

    let config_json = config.to_json();
    model.provenance.corpus_digest = hex(&digest.finalize());
    model.provenance.config = config_json.clone();
    model.suppression = config.suppression;
    save_model(&model, &model_path)?;

    if let Some(path) = &config.trace {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf, Some(&format!("config={config_json}")))?;
        write_atomic(path, &buf)?;
    }
    if let Some(path) = &config.filters {
        let grid = export_filter_grid(&model)?;
        write_filter_grid_png(&grid, path, Some(&config_json))?;
    }

    let (first, last) = (trace.initial(), trace.last());
    println!(
        "patches={} iterations={} evaluations={} termination={:?}",
        whitened.len(),
        last.iteration,
        trace.evaluations,
        trace.termination
    );
    println!(
        "J {:.6} -> {:.6} (recon {:.6} sparsity {:.6} decay {:.6}) mean_rho_hat {:.5} [{:.5}, {:.5}]",
        first.objective,
        last.objective,
        last.reconstruction,
        last.sparsity,
        last.decay,
        last.mean_rho_hat,
        last.min_rho_hat,
        last.max_rho_hat
    );
    Ok(skipped > 0)
}

pub fn export_filters(args: ExportArgs) -> Outcome {
    let model = load_model(&args.model)?;
    let grid = export_filter_grid(&model)?;
    let comment = format!("hidden={} source={}", model.n_hidden(), args.model.display());
    write_filter_grid_png(&grid, &args.out, Some(&comment))?;
    Ok(false)
}
