use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::recipe::DegradationRecipe;
use super::tiers::{degrade_tiers, RecipeDraws};
use crate::error::{Error, Result};
use crate::imaging::{derive_seed, ImageBuffer, SeededRng};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
const JOURNAL_FILE: &str = "manifest.jsonl.partial";
const RECIPE_FILE: &str = "recipe.json";
const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "tif", "tiff"];

/// One line of the manifest. Tier and mask paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub source: String,
    pub tier_g: String,
    pub tier_gb: String,
    pub tier_gbc: String,
    pub tier_gbcn: String,
    pub mask: String,
    pub seed: u64,
    pub draws: RecipeDraws,
}

impl ManifestRecord {
    /// Directory name of the record, used as its image id.
    pub fn id(&self) -> &str {
        Path::new(&self.tier_g)
            .parent()
            .and_then(|p| p.to_str())
            .unwrap_or(&self.tier_g)
    }

    fn tier_paths(&self) -> [&str; 5] {
        [&self.tier_g, &self.tier_gb, &self.tier_gbc, &self.tier_gbcn, &self.mask]
    }
}

#[derive(Clone, Debug, Default)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let records = parse_records(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Ok(Self {
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            records,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for r in &self.records {
            text.push_str(&serde_json::to_string(r).expect("record serializes"));
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }
}

fn parse_records(text: &str) -> std::result::Result<Vec<ManifestRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Candidate image files directly inside `dir`, sorted by file name.
pub fn list_source_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn record_dir_name(index: usize, source: &Path) -> String {
    let stem: String = source
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{index:05}_{stem}")
}

struct Job<'a> {
    out: &'a Path,
    recipe: &'a DegradationRecipe,
    done: &'a HashMap<String, ManifestRecord>,
    journal: &'a Mutex<fs::File>,
}

impl Job<'_> {
    fn process(&self, index: usize, source: &Path) -> Result<Option<ManifestRecord>> {
        let dir_name = record_dir_name(index, source);
        let seed = derive_seed(self.recipe.seed, index as u64);
        let source_str = source.display().to_string();

        if let Some(prev) = self.done.get(&dir_name) {
            let complete = prev.tier_paths().iter().all(|p| self.out.join(p).is_file());
            if prev.seed == seed && prev.source == source_str && complete {
                tracing::debug!(record = %dir_name, "reusing completed record");
                return Ok(Some(prev.clone()));
            }
        }

        let img = match ImageBuffer::load(source) {
            Ok(img) => img,
            Err(err) => {
                tracing::warn!(source = %source.display(), %err, "skipping unreadable image");
                return Ok(None);
            }
        };
        if img.width() < 8 || img.height() < 8 {
            tracing::warn!(source = %source.display(), "skipping image smaller than 8x8");
            return Ok(None);
        }
        let tiers = degrade_tiers(&img, self.recipe, &mut SeededRng::new(seed))?;

        let dir = self.out.join(&dir_name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let rel = |name: &str| format!("{dir_name}/{name}");
        tiers.g.save(dir.join("g.png"))?;
        tiers.gb.save(dir.join("gb.png"))?;
        tiers.gbc.save(dir.join("gbc.png"))?;
        tiers.gbcn.save(dir.join("gbcn.png"))?;
        tiers.crack_mask.save(dir.join("mask.png"))?;

        let record = ManifestRecord {
            source: source_str,
            tier_g: rel("g.png"),
            tier_gb: rel("gb.png"),
            tier_gbc: rel("gbc.png"),
            tier_gbcn: rel("gbcn.png"),
            mask: rel("mask.png"),
            seed,
            draws: tiers.draws,
        };
        let line = serde_json::to_string(&record).expect("record serializes");
        let mut journal = self.journal.lock().expect("journal lock poisoned");
        writeln!(journal, "{line}").map_err(|e| Error::io(self.out.join(JOURNAL_FILE), e))?;
        Ok(Some(record))
    }
}

fn previous_records(out: &Path, recipe_json: &str) -> HashMap<String, ManifestRecord> {
    let same_recipe = fs::read_to_string(out.join(RECIPE_FILE)).is_ok_and(|t| t == recipe_json);
    if !same_recipe {
        return HashMap::new();
    }
    [MANIFEST_FILE, JOURNAL_FILE]
        .iter()
        .filter_map(|f| fs::read_to_string(out.join(f)).ok())
        .flat_map(|text| {
            // A torn final line from an interrupted run is simply ignored.
            text.lines()
                .filter_map(|l| serde_json::from_str::<ManifestRecord>(l).ok())
                .collect::<Vec<_>>()
        })
        .map(|r| (r.id().to_string(), r))
        .collect()
}

/// Degrades the first `count` readable images of `source_dir` (in file-name
/// order) into `out_dir` and writes `out_dir/manifest.jsonl`.
///
/// Per-image seeds come from `(recipe.seed, source index)`, so the output is
/// identical regardless of thread count, and completed records are reused
/// when a run is resumed with the same recipe.
pub fn build_dataset(
    source_dir: &Path,
    out_dir: &Path,
    recipe: &DegradationRecipe,
    count: usize,
) -> Result<Manifest> {
    recipe.validate()?;
    let candidates = list_source_images(source_dir)?;
    if candidates.is_empty() {
        return Err(Error::Input(format!("no images found in {}", source_dir.display())));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let recipe_json = serde_json::to_string_pretty(recipe).expect("recipe serializes");
    let done = previous_records(out_dir, &recipe_json);
    let recipe_path = out_dir.join(RECIPE_FILE);
    fs::write(&recipe_path, &recipe_json).map_err(|e| Error::io(&recipe_path, e))?;

    let journal_path = out_dir.join(JOURNAL_FILE);
    let journal = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&journal_path)
        .map_err(|e| Error::io(&journal_path, e))?;
    let job = Job {
        out: out_dir,
        recipe,
        done: &done,
        journal: &Mutex::new(journal),
    };

    let mut records = Vec::with_capacity(count);
    let mut next = 0;
    while records.len() < count && next < candidates.len() {
        let end = (next + count - records.len()).min(candidates.len());
        let batch: Vec<Option<ManifestRecord>> = (next..end)
            .into_par_iter()
            .map(|i| job.process(i, &candidates[i]))
            .collect::<Result<_>>()?;
        records.extend(batch.into_iter().flatten());
        tracing::info!(done = records.len(), of = count, "degraded images");
        next = end;
    }
    if records.len() < count {
        tracing::warn!(
            wanted = count,
            produced = records.len(),
            "source directory has fewer readable images than requested"
        );
    }

    let manifest = Manifest {
        base_dir: out_dir.to_path_buf(),
        records,
    };
    manifest.write(out_dir.join(MANIFEST_FILE))?;
    fs::remove_file(&journal_path).map_err(|e| Error::io(&journal_path, e))?;
    Ok(manifest)
}
