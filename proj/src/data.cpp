#include "degbench/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "degbench/error.hpp"

namespace fs = std::filesystem;

namespace degbench {

std::vector<int> DatasetManifest::per_class_counts() const {
    std::vector<int> counts(class_names.size(), 0);
    for (const auto& e : entries) {
        if (e.label < 0 || e.label >= static_cast<int>(class_names.size()))
            throw DataError("manifest label out of range: " + std::to_string(e.label));
        ++counts[static_cast<size_t>(e.label)];
    }
    return counts;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (size_t i = 0; i < manifest.class_names.size(); ++i)
        out << (i ? "\t" : "") << manifest.class_names[i];
    out << "\n";
    for (const auto& e : manifest.entries)
        out << e.path << "\t" << e.label << "\t" << e.fold << "\n";
    if (!out) throw DataError("short write: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);
    DatasetManifest m;
    m.root = fs::path(path).parent_path().string();
    if (m.root.empty()) m.root = ".";
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty manifest: " + path);
    {
        std::istringstream header(line);
        std::string name;
        while (std::getline(header, name, '\t')) m.class_names.push_back(name);
    }
    if (m.class_names.empty()) throw DataError("manifest has no class names: " + path);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        ManifestEntry e;
        std::string label_str, fold_str;
        if (!std::getline(row, e.path, '\t') || !std::getline(row, label_str, '\t') ||
            !std::getline(row, fold_str, '\t'))
            throw DataError("malformed manifest row: " + line);
        e.label = std::stoi(label_str);
        e.fold = std::stoi(fold_str);
        if (e.label < 0 || e.label >= static_cast<int>(m.class_names.size()))
            throw DataError("manifest label out of range in row: " + line);
        m.entries.push_back(std::move(e));
    }
    return m;
}

GlyphMask rotate_mask(const GlyphMask& mask, double deg) {
    const double rad = deg * 3.14159265358979323846 / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const int out_w =
        static_cast<int>(std::ceil(std::abs(mask.width * c) + std::abs(mask.height * s))) + 1;
    const int out_h =
        static_cast<int>(std::ceil(std::abs(mask.width * s) + std::abs(mask.height * c))) + 1;
    GlyphMask out;
    out.width = out_w;
    out.height = out_h;
    out.alpha.assign(static_cast<size_t>(out_w) * out_h, 0.0);
    const double cx_in = mask.width * 0.5, cy_in = mask.height * 0.5;
    const double cx_out = out_w * 0.5, cy_out = out_h * 0.5;
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            // inverse rotation back into source space
            const double dx = (x + 0.5) - cx_out, dy = (y + 0.5) - cy_out;
            const double sx = c * dx + s * dy + cx_in - 0.5;
            const double sy = -s * dx + c * dy + cy_in - 0.5;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            if (x0 < -1 || y0 < -1 || x0 >= mask.width || y0 >= mask.height) continue;
            const double fx = sx - x0, fy = sy - y0;
            auto sample = [&mask](int yy, int xx) -> double {
                if (yy < 0 || xx < 0 || yy >= mask.height || xx >= mask.width) return 0.0;
                return mask.alpha[static_cast<size_t>(yy) * mask.width + xx];
            };
            const double top = sample(y0, x0) * (1 - fx) + sample(y0, x0 + 1) * fx;
            const double bot = sample(y0 + 1, x0) * (1 - fx) + sample(y0 + 1, x0 + 1) * fx;
            out.alpha[static_cast<size_t>(y) * out_w + x] = top * (1 - fy) + bot * fy;
        }
    return out;
}

namespace {

GlyphMask resize_mask(const GlyphMask& mask, int out_h, int out_w) {
    GlyphMask out;
    out.height = out_h;
    out.width = out_w;
    out.alpha.assign(static_cast<size_t>(out_h) * out_w, 0.0);
    const double sy = static_cast<double>(mask.height) / out_h;
    const double sx = static_cast<double>(mask.width) / out_w;
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, mask.height - 1.0);
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, mask.width - 1.0);
            const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
            const int y1 = std::min(y0 + 1, mask.height - 1);
            const int x1 = std::min(x0 + 1, mask.width - 1);
            const double wy = fy - y0, wx = fx - x0;
            const auto& a = mask.alpha;
            out.alpha[static_cast<size_t>(y) * out_w + x] =
                (a[static_cast<size_t>(y0) * mask.width + x0] * (1 - wx) +
                 a[static_cast<size_t>(y0) * mask.width + x1] * wx) *
                    (1 - wy) +
                (a[static_cast<size_t>(y1) * mask.width + x0] * (1 - wx) +
                 a[static_cast<size_t>(y1) * mask.width + x1] * wx) *
                    wy;
        }
    return out;
}

double luminance(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

}  // namespace

DatasetManifest generate_synthetic_digits(const std::string& root, const SynthDigitConfig& cfg) {
    if (cfg.per_class < 1) throw UsageError("generate: per_class must be >= 1");
    if (cfg.canvas < 16) throw UsageError("generate: canvas must be >= 16");
    if (cfg.folds < 2) throw UsageError("generate: folds must be >= 2");

    std::vector<std::string> fonts = cfg.fonts.empty() ? builtin_font_names() : cfg.fonts;
    // resolve font resources up front; report every offender at once
    {
        const auto builtin = builtin_font_names();
        std::string offenders;
        for (const auto& f : fonts)
            if (std::find(builtin.begin(), builtin.end(), f) == builtin.end())
                offenders += (offenders.empty() ? "" : ", ") + f;
        if (!offenders.empty())
            throw DataError("unreadable font resources: " + offenders);
    }
    std::vector<Image> backgrounds;
    {
        std::string offenders;
        for (const auto& path : cfg.backgrounds) {
            try {
                backgrounds.push_back(read_image(path));
            } catch (const DataError&) {
                offenders += (offenders.empty() ? "" : ", ") + path;
            }
        }
        if (!offenders.empty())
            throw DataError("unreadable background resources: " + offenders);
    }

    // font sizes scale with the canvas below the 256 reference
    const double size_scale = cfg.canvas < 256 ? cfg.canvas / 256.0 : 1.0;
    const int min_size = std::max(8, static_cast<int>(std::lround(cfg.font_size_min * size_scale)));
    const int max_size =
        std::max(min_size, static_cast<int>(std::lround(cfg.font_size_max * size_scale)));

    fs::create_directories(root);
    DatasetManifest manifest;
    manifest.root = root;
    for (int d = 0; d < 10; ++d) manifest.class_names.push_back(std::to_string(d));

    for (int digit = 0; digit < 10; ++digit) {
        const fs::path class_dir = fs::path(root) / std::to_string(digit);
        fs::create_directories(class_dir);
        for (int i = 0; i < cfg.per_class; ++i) {
            Prng rng(cfg.seed, static_cast<uint64_t>(digit) * 1000003ULL +
                                   static_cast<uint64_t>(i));
            // background
            Image canvas(cfg.canvas, cfg.canvas);
            double bg_lum;
            if (backgrounds.empty()) {
                const double r = rng.next_double(), g = rng.next_double(), b = rng.next_double();
                canvas = Image::filled(cfg.canvas, cfg.canvas, r, g, b);
                bg_lum = luminance(r, g, b);
            } else {
                const Image& src = backgrounds[rng.next_below(backgrounds.size())];
                Image base = src;
                if (base.height < cfg.canvas || base.width < cfg.canvas)
                    base = resize_bilinear(base, std::max(cfg.canvas, base.height),
                                           std::max(cfg.canvas, base.width));
                const int max_y = base.height - cfg.canvas;
                const int max_x = base.width - cfg.canvas;
                const int oy = max_y > 0 ? static_cast<int>(rng.next_below(max_y + 1)) : 0;
                const int ox = max_x > 0 ? static_cast<int>(rng.next_below(max_x + 1)) : 0;
                double lum = 0.0;
                for (int y = 0; y < cfg.canvas; ++y)
                    for (int x = 0; x < cfg.canvas; ++x) {
                        for (int ch = 0; ch < 3; ++ch)
                            canvas.at(y, x, ch) = base.at(oy + y, ox + x, ch);
                        lum += luminance(canvas.at(y, x, 0), canvas.at(y, x, 1),
                                         canvas.at(y, x, 2));
                    }
                bg_lum = lum / (static_cast<double>(cfg.canvas) * cfg.canvas);
            }

            // glyph color with enough contrast to stay learnable
            double r, g, b;
            int tries = 0;
            do {
                r = rng.next_double();
                g = rng.next_double();
                b = rng.next_double();
            } while (std::abs(luminance(r, g, b) - bg_lum) < 0.25 && ++tries < 24);
            if (std::abs(luminance(r, g, b) - bg_lum) < 0.25) {
                r = bg_lum > 0.5 ? 0.0 : 1.0;
                g = b = r;
            }

            const std::string& font = fonts[rng.next_below(fonts.size())];
            const int size = min_size + static_cast<int>(rng.next_below(
                                            static_cast<uint64_t>(max_size - min_size + 1)));
            const double angle = rng.next_uniform(cfg.rotation_min_deg, cfg.rotation_max_deg);

            GlyphMask mask = rotate_mask(render_digit(digit, font, size), angle);
            if (mask.height > cfg.canvas || mask.width > cfg.canvas) {
                const double shrink = std::min(static_cast<double>(cfg.canvas) / mask.height,
                                               static_cast<double>(cfg.canvas) / mask.width);
                mask = resize_mask(mask, std::max(1, static_cast<int>(mask.height * shrink)),
                                   std::max(1, static_cast<int>(mask.width * shrink)));
            }
            const int oy = static_cast<int>(rng.next_below(cfg.canvas - mask.height + 1));
            const int ox = static_cast<int>(rng.next_below(cfg.canvas - mask.width + 1));
            for (int y = 0; y < mask.height; ++y)
                for (int x = 0; x < mask.width; ++x) {
                    const double a = mask.alpha[static_cast<size_t>(y) * mask.width + x];
                    if (a <= 0.0) continue;
                    canvas.at(oy + y, ox + x, 0) = canvas.at(oy + y, ox + x, 0) * (1 - a) + r * a;
                    canvas.at(oy + y, ox + x, 1) = canvas.at(oy + y, ox + x, 1) * (1 - a) + g * a;
                    canvas.at(oy + y, ox + x, 2) = canvas.at(oy + y, ox + x, 2) * (1 - a) + b * a;
                }

            char name[64];
            std::snprintf(name, sizeof(name), "d%d_%05d.png", digit, i);
            write_png((class_dir / name).string(), canvas);
            manifest.entries.push_back(
                {(fs::path(std::to_string(digit)) / name).string(), digit, -1});
        }
    }

    DatasetManifest folded = kfold_split(manifest, cfg.folds, cfg.seed);
    save_manifest((fs::path(root) / "manifest.tsv").string(), folded);
    return folded;
}

DatasetManifest load_image_folder(const std::string& root, std::vector<std::string>* warnings) {
    if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root);
    std::vector<std::string> classes;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) classes.push_back(entry.path().filename().string());
    std::sort(classes.begin(), classes.end());
    if (classes.empty()) throw DataError("no class directories under " + root);

    DatasetManifest manifest;
    manifest.root = root;
    manifest.class_names = classes;
    for (size_t label = 0; label < classes.size(); ++label) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(root) / classes[label]))
            if (entry.is_regular_file()) files.push_back(entry.path().filename().string());
        std::sort(files.begin(), files.end());
        int decodable = 0;
        for (const auto& file : files) {
            const std::string rel = (fs::path(classes[label]) / file).string();
            try {
                (void)read_image((fs::path(root) / rel).string());
            } catch (const DataError& err) {
                if (warnings) warnings->push_back(rel + ": " + err.what());
                continue;
            }
            manifest.entries.push_back({rel, static_cast<int>(label), -1});
            ++decodable;
        }
        if (decodable == 0)
            throw DataError("class directory has no decodable images: " +
                            (fs::path(root) / classes[label]).string());
    }
    return manifest;
}

DatasetManifest kfold_split(const DatasetManifest& manifest, int k, uint64_t seed) {
    if (k < 2) throw UsageError("kfold_split: k must be >= 2");
    const auto counts = manifest.per_class_counts();
    for (size_t label = 0; label < counts.size(); ++label)
        if (counts[label] > 0 && counts[label] < k)
            throw DataError("kfold_split: class '" + manifest.class_names[label] + "' has " +
                            std::to_string(counts[label]) + " samples, fewer than k=" +
                            std::to_string(k));

    DatasetManifest out = manifest;
    for (size_t label = 0; label < manifest.class_names.size(); ++label) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < out.entries.size(); ++i)
            if (out.entries[i].label == static_cast<int>(label)) idx.push_back(i);
        Prng rng(seed, 9000 + label);
        for (size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.next_below(i)]);
        // round-robin, rotated per class so the remainder samples spread
        // across folds instead of piling onto fold 0
        for (size_t pos = 0; pos < idx.size(); ++pos)
            out.entries[idx[pos]].fold = static_cast<int>((pos + label) % static_cast<size_t>(k));
    }
    return out;
}

std::pair<DatasetManifest, DatasetManifest> train_test_for_fold(const DatasetManifest& manifest,
                                                                int fold) {
    DatasetManifest train, test;
    train.root = test.root = manifest.root;
    train.class_names = test.class_names = manifest.class_names;
    for (const auto& e : manifest.entries) {
        if (e.fold < 0) throw UsageError("train_test_for_fold: manifest has no fold ids");
        (e.fold == fold ? test : train).entries.push_back(e);
    }
    if (test.entries.empty())
        throw UsageError("train_test_for_fold: fold " + std::to_string(fold) + " is empty");
    return {std::move(train), std::move(test)};
}

std::vector<Sample> load_samples(const DatasetManifest& manifest, int side) {
    std::vector<Sample> samples;
    samples.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        Image img = read_image((fs::path(manifest.root) / e.path).string());
        if (side > 0 && (img.height != side || img.width != side))
            img = resize_bilinear(img, side, side);
        samples.push_back({std::move(img), e.label});
    }
    return samples;
}

}  // namespace degbench
