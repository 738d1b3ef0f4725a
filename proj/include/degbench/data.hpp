#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "degbench/image.hpp"
#include "degbench/prng.hpp"

namespace degbench {

struct Sample {
    Image image;
    int label = 0;
};

struct ManifestEntry {
    std::string path;  // relative to the manifest root
    int label = 0;
    int fold = -1;
};

struct DatasetManifest {
    std::string root;
    std::vector<std::string> class_names;
    std::vector<ManifestEntry> entries;

    std::vector<int> per_class_counts() const;
};

// Tab-separated: a header line of class names, then path<TAB>label<TAB>fold.
void save_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::string& path);

struct SynthDigitConfig {
    int per_class = 1200;
    int canvas = 256;
    double rotation_min_deg = -30.0;
    double rotation_max_deg = 30.0;
    // scaled proportionally when the canvas is smaller than 256
    int font_size_min = 30;
    int font_size_max = 240;
    std::vector<std::string> fonts;        // empty -> all built-in faces
    std::vector<std::string> backgrounds;  // image paths; empty -> plain colors
    int folds = 6;
    uint64_t seed = 1;
};

// Names of the built-in stroke-rendered digit faces.
std::vector<std::string> builtin_font_names();

// Alpha mask for one digit at a given pixel size (height); width follows the
// glyph aspect. Row-major, values in [0,1].
struct GlyphMask {
    int height = 0, width = 0;
    std::vector<double> alpha;
};
GlyphMask render_digit(int digit, const std::string& font, int size_px);

// Counterclockwise rotation (image coordinates) with bilinear resampling;
// the canvas expands to the rotated bounds.
GlyphMask rotate_mask(const GlyphMask& mask, double deg);

// Writes per_class images per digit class under root/<digit>/ and a
// manifest.tsv with stratified fold ids. Deterministic under cfg.seed.
DatasetManifest generate_synthetic_digits(const std::string& root, const SynthDigitConfig& cfg);

// root/<class>/<images>; classes ordered alphabetically. Non-decodable files
// are skipped and reported through `warnings`.
DatasetManifest load_image_folder(const std::string& root,
                                  std::vector<std::string>* warnings = nullptr);

// Stratified k-fold assignment, deterministic under seed; per-class fold
// sizes differ by at most one.
DatasetManifest kfold_split(const DatasetManifest& manifest, int k, uint64_t seed);

// (train, test) split for one fold id.
std::pair<DatasetManifest, DatasetManifest> train_test_for_fold(const DatasetManifest& manifest,
                                                                int fold);

// Loads all entries, resizing to side x side when needed (0 keeps native).
std::vector<Sample> load_samples(const DatasetManifest& manifest, int side = 0);

}  // namespace degbench
