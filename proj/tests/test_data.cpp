#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "degbench/data.hpp"
#include "degbench/error.hpp"
#include "degbench/image.hpp"
#include "doctest.h"

using namespace degbench;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Second-moment principal-axis estimate of a glyph mask, in degrees,
// mapped so an unrotated vertical bar reads 0.
double estimate_rotation(const GlyphMask& mask) {
    double m00 = 0, mx = 0, my = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            const double a = mask.alpha[static_cast<size_t>(y) * mask.width + x];
            m00 += a;
            mx += a * x;
            my += a * y;
        }
    const double cx = mx / m00, cy = my / m00;
    double mu20 = 0, mu02 = 0, mu11 = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            const double a = mask.alpha[static_cast<size_t>(y) * mask.width + x];
            mu20 += a * (x - cx) * (x - cx);
            mu02 += a * (y - cy) * (y - cy);
            mu11 += a * (x - cx) * (y - cy);
        }
    const double phi = 0.5 * std::atan2(2.0 * mu11, mu20 - mu02) * 180.0 / 3.14159265358979;
    double rot = phi + 90.0;
    if (rot > 90.0) rot -= 180.0;
    return rot;
}

}  // namespace

TEST_CASE("png/ppm io: byte-exact round trip of quantized pixels") {
    const fs::path dir = fresh_dir("degbench_io_test");
    Image img(9, 13);
    Prng rng(5, 5);
    for (auto& v : img.pixels) v = rng.next_double();
    const std::string png = (dir / "x.png").string();
    const std::string ppm = (dir / "x.ppm").string();
    write_png(png, img);
    write_ppm(ppm, img);
    Image from_png = read_png(png);
    Image from_ppm = read_ppm(ppm);
    CHECK(from_png.height == 9);
    CHECK(from_png.width == 13);
    // both decoders see the same 8-bit quantization
    CHECK(from_png.pixels == from_ppm.pixels);
    for (size_t i = 0; i < img.pixels.size(); ++i)
        CHECK(std::abs(from_png.pixels[i] - img.pixels[i]) <= 0.5 / 255.0 + 1e-12);
    // writing an already-quantized image is lossless
    write_png(png, from_png);
    CHECK(read_png(png).pixels == from_png.pixels);

    CHECK(read_image(png).pixels == from_png.pixels);  // magic dispatch
    CHECK(read_image(ppm).pixels == from_ppm.pixels);
    CHECK_THROWS_AS(read_image((dir / "missing.png").string()), DataError);
    fs::remove_all(dir);
}

TEST_CASE("glyphs: builtin faces render plausible masks") {
    const auto fonts = builtin_font_names();
    CHECK(fonts.size() >= 4);
    for (const auto& font : fonts)
        for (int digit : {0, 1, 4, 7, 8}) {
            const GlyphMask mask = render_digit(digit, font, 32);
            CHECK(mask.height >= 32);
            double total = 0.0;
            for (double a : mask.alpha) {
                CHECK(a >= 0.0);
                CHECK(a <= 1.0);
                total += a;
            }
            CHECK(total > 20.0);  // some ink
        }
    CHECK_THROWS_AS(render_digit(3, "no_such_font", 32), DataError);
    CHECK_THROWS_AS(render_digit(11, "sans", 32), UsageError);
}

TEST_CASE("glyphs: measured rotation of a '1' stays in the configured window") {
    Prng rng(17, 0);
    const GlyphMask upright = render_digit(1, "sans", 48);
    CHECK(std::abs(estimate_rotation(upright)) < 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double angle = rng.next_uniform(-30.0, 30.0);
        const GlyphMask rotated = rotate_mask(upright, angle);
        const double est = estimate_rotation(rotated);
        CHECK(est >= -32.0);
        CHECK(est <= 32.0);
        CHECK(std::abs(est - angle) < 4.0);
    }
}

TEST_CASE("generator: counts, determinism, manifest") {
    const fs::path dir_a = fresh_dir("degbench_gen_a");
    const fs::path dir_b = fresh_dir("degbench_gen_b");
    SynthDigitConfig cfg;
    cfg.per_class = 3;
    cfg.canvas = 32;
    cfg.folds = 3;
    cfg.seed = 99;
    const DatasetManifest manifest = generate_synthetic_digits(dir_a.string(), cfg);
    CHECK(manifest.entries.size() == 30);
    CHECK(manifest.class_names.size() == 10);
    const auto counts = manifest.per_class_counts();
    for (int c : counts) CHECK(c == 3);

    // regeneration is byte-identical
    const DatasetManifest manifest_b = generate_synthetic_digits(dir_b.string(), cfg);
    REQUIRE(manifest_b.entries.size() == manifest.entries.size());
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        CHECK(manifest.entries[i].path == manifest_b.entries[i].path);
        CHECK(slurp((dir_a / manifest.entries[i].path).string()) ==
              slurp((dir_b / manifest_b.entries[i].path).string()));
    }

    // manifest round trip
    const DatasetManifest loaded = load_manifest((dir_a / "manifest.tsv").string());
    CHECK(loaded.class_names == manifest.class_names);
    REQUIRE(loaded.entries.size() == manifest.entries.size());
    for (size_t i = 0; i < loaded.entries.size(); ++i) {
        CHECK(loaded.entries[i].path == manifest.entries[i].path);
        CHECK(loaded.entries[i].label == manifest.entries[i].label);
        CHECK(loaded.entries[i].fold == manifest.entries[i].fold);
    }

    // samples load and honor resizing
    const auto samples = load_samples(loaded, 16);
    CHECK(samples.size() == 30);
    CHECK(samples.front().image.height == 16);

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("generator: bad font and background resources are reported") {
    const fs::path dir = fresh_dir("degbench_gen_bad");
    SynthDigitConfig cfg;
    cfg.per_class = 1;
    cfg.canvas = 32;
    cfg.fonts = {"sans", "missing_font_a", "missing_font_b"};
    try {
        generate_synthetic_digits(dir.string(), cfg);
        FAIL("expected DataError");
    } catch (const DataError& err) {
        const std::string msg = err.what();
        CHECK(msg.find("missing_font_a") != std::string::npos);
        CHECK(msg.find("missing_font_b") != std::string::npos);
    }
    SynthDigitConfig cfg2;
    cfg2.per_class = 1;
    cfg2.canvas = 32;
    cfg2.backgrounds = {(dir / "nope.png").string()};
    CHECK_THROWS_AS(generate_synthetic_digits(dir.string(), cfg2), DataError);
    fs::remove_all(dir);
}

TEST_CASE("generator: background pool is used") {
    const fs::path dir = fresh_dir("degbench_gen_bg");
    const fs::path bg_path = dir / "bg.png";
    Image bg(64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            bg.at(y, x, 0) = (x % 8) / 8.0;
            bg.at(y, x, 1) = (y % 8) / 8.0;
            bg.at(y, x, 2) = 0.25;
        }
    write_png(bg_path.string(), bg);
    SynthDigitConfig cfg;
    cfg.per_class = 2;
    cfg.canvas = 32;
    cfg.folds = 2;
    cfg.backgrounds = {bg_path.string()};
    const DatasetManifest manifest = generate_synthetic_digits((dir / "out").string(), cfg);
    CHECK(manifest.entries.size() == 20);
    fs::remove_all(dir);
}

TEST_CASE("folder ingestion: alphabetical classes, warnings, empty-class error") {
    const fs::path dir = fresh_dir("degbench_folder_test");
    for (const std::string cls : {"zebra", "apple", "mango"}) {
        fs::create_directories(dir / cls);
        for (int i = 0; i < 2 + (cls == "apple" ? 1 : 0); ++i) {
            Image img = Image::filled(12, 12, 0.2, 0.5, 0.8);
            img.at(0, 0, 0) = i / 4.0;
            write_png((dir / cls / ("img" + std::to_string(i) + ".png")).string(), img);
        }
    }
    std::ofstream(dir / "mango" / "junk.txt") << "not an image";

    std::vector<std::string> warnings;
    const DatasetManifest manifest = load_image_folder(dir.string(), &warnings);
    CHECK(manifest.class_names == std::vector<std::string>{"apple", "mango", "zebra"});
    CHECK(manifest.per_class_counts() == std::vector<int>{3, 2, 2});
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("junk.txt") != std::string::npos);

    // duplicate file names across classes stay distinct by path
    std::set<std::string> paths;
    for (const auto& e : manifest.entries) paths.insert(e.path);
    CHECK(paths.size() == manifest.entries.size());

    fs::create_directories(dir / "empty_class");
    CHECK_THROWS_AS(load_image_folder(dir.string()), DataError);
    fs::remove_all(dir);
}

TEST_CASE("kfold: paper-sized splits") {
    // ISISD shape: 10 classes x 1200 -> 6 folds of exactly 2000
    DatasetManifest isisd;
    isisd.root = ".";
    for (int c = 0; c < 10; ++c) isisd.class_names.push_back(std::to_string(c));
    for (int c = 0; c < 10; ++c)
        for (int i = 0; i < 1200; ++i)
            isisd.entries.push_back({"p" + std::to_string(c) + "_" + std::to_string(i), c, -1});
    const DatasetManifest folded = kfold_split(isisd, 6, 42);
    std::vector<int> fold_sizes(6, 0);
    for (const auto& e : folded.entries) {
        REQUIRE(e.fold >= 0);
        REQUIRE(e.fold < 6);
        ++fold_sizes[static_cast<size_t>(e.fold)];
    }
    for (int s : fold_sizes) CHECK(s == 2000);
    const auto [train, test] = train_test_for_fold(folded, 2);
    CHECK(train.entries.size() == 10000);
    CHECK(test.entries.size() == 2000);

    // disjoint and exhaustive
    std::set<std::string> train_paths, test_paths;
    for (const auto& e : train.entries) train_paths.insert(e.path);
    for (const auto& e : test.entries) test_paths.insert(e.path);
    CHECK(train_paths.size() + test_paths.size() == 12000);
    for (const auto& p : test_paths) CHECK(train_paths.count(p) == 0);

    // ISINI shape: 8 classes, 6899 total; clean stratified 5-fold puts each
    // test fold at 1379..1381 (the published 5724/1175 split is not an exact
    // 5-fold partition)
    DatasetManifest isini;
    isini.root = ".";
    const int counts[] = {727, 968, 885, 702, 843, 1000, 788, 986};
    const char* names[] = {"airplane", "car", "cat", "dog", "flower", "fruit", "motorbike",
                           "person"};
    for (int c = 0; c < 8; ++c) isini.class_names.push_back(names[c]);
    for (int c = 0; c < 8; ++c)
        for (int i = 0; i < counts[c]; ++i)
            isini.entries.push_back({std::string(names[c]) + std::to_string(i), c, -1});
    CHECK(isini.entries.size() == 6899);
    const DatasetManifest folded5 = kfold_split(isini, 5, 7);
    for (int f = 0; f < 5; ++f) {
        const auto [tr, te] = train_test_for_fold(folded5, f);
        CHECK(te.entries.size() >= 1379);
        CHECK(te.entries.size() <= 1381);
        CHECK(tr.entries.size() + te.entries.size() == 6899);
    }

    // stratification: per-class fold proportions within one sample
    const auto totals = folded5.per_class_counts();
    for (int f = 0; f < 5; ++f) {
        std::vector<int> per_class(8, 0);
        for (const auto& e : folded5.entries)
            if (e.fold == f) ++per_class[static_cast<size_t>(e.label)];
        for (int c = 0; c < 8; ++c) {
            const double expect = totals[static_cast<size_t>(c)] / 5.0;
            CHECK(std::abs(per_class[static_cast<size_t>(c)] - expect) <= 1.0);
        }
    }
}

TEST_CASE("kfold: determinism and error paths") {
    DatasetManifest m;
    m.root = ".";
    m.class_names = {"a", "b"};
    for (int i = 0; i < 9; ++i) m.entries.push_back({"a" + std::to_string(i), 0, -1});
    for (int i = 0; i < 7; ++i) m.entries.push_back({"b" + std::to_string(i), 1, -1});
    const auto f1 = kfold_split(m, 3, 5);
    const auto f2 = kfold_split(m, 3, 5);
    for (size_t i = 0; i < f1.entries.size(); ++i)
        CHECK(f1.entries[i].fold == f2.entries[i].fold);
    const auto f3 = kfold_split(m, 3, 6);
    bool any_diff = false;
    for (size_t i = 0; i < f1.entries.size(); ++i)
        if (f1.entries[i].fold != f3.entries[i].fold) any_diff = true;
    CHECK(any_diff);

    CHECK_THROWS_AS(kfold_split(m, 1, 5), UsageError);
    CHECK_THROWS_AS(kfold_split(m, 8, 5), DataError);  // k > smallest class
    CHECK_THROWS_AS(train_test_for_fold(m, 0), UsageError);  // no folds assigned
}
