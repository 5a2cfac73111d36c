#include "xfrl/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "xfrl/error.hpp"

namespace xfrl::data {

static constexpr double kPi = 3.14159265358979323846;

void SyntheticTaskSpec::validate() const {
    if (num_classes == 0) throw value_error("task spec '" + name + "': num_classes must be >= 1");
    if (image_size < 8) throw value_error("task spec '" + name + "': image_size must be >= 8");
    if (frequencies.size() != num_classes || orientations.size() != num_classes)
        throw value_error("task spec '" + name +
                          "': frequencies/orientations must list one entry per class");
    if (train_per_class.size() != num_classes || test_per_class.size() != num_classes)
        throw value_error("task spec '" + name + "': per-class sample counts must match classes");
    if (!(speckle_looks > 0.0))
        throw value_error("task spec '" + name + "': speckle_looks must be positive");
    if (!(contrast > 0.0)) throw value_error("task spec '" + name + "': contrast must be positive");
    if (!(background >= 0.0 && background <= 1.0))
        throw value_error("task spec '" + name + "': background must be in [0,1]");
}

double speckle_sample(Rng& rng, double looks) {
    if (!(looks > 0.0)) throw value_error("speckle_sample: looks must be positive");
    return rng.gamma(looks) / looks;
}

Tensor speckle(const Tensor& image, double looks, std::uint64_t seed) {
    if (!(looks > 0.0)) throw value_error("speckle: looks must be positive");
    Rng rng(mix_seed(seed, kStreamData, 0));
    Tensor out = image;
    for (double& v : out.v) v *= speckle_sample(rng, looks);
    return out;
}

static Tensor synth_image(const SyntheticTaskSpec& spec, int cls, std::uint64_t sample_index) {
    Rng rng(mix_seed(spec.gen_seed, kStreamData, sample_index));
    const std::size_t S = spec.image_size;
    const double Sd = static_cast<double>(S);

    // fixed draw order: texture jitter, ellipse geometry, amplitude, then
    // per-pixel speckle row-major
    const double theta = spec.orientations[cls] + rng.uniform(-0.15, 0.15);
    const double freq = spec.frequencies[cls] * rng.uniform(0.9, 1.1);
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    const double cx = Sd / 2.0 + rng.uniform(-Sd / 8.0, Sd / 8.0);
    const double cy = Sd / 2.0 + rng.uniform(-Sd / 8.0, Sd / 8.0);
    const double ax = rng.uniform(Sd / 5.0, Sd / 3.0);
    const double ay = rng.uniform(Sd / 5.0, Sd / 3.0);
    const double phi = rng.uniform(0.0, kPi);
    const double amp = rng.uniform(0.55, 0.75);

    const double ct = std::cos(theta), st = std::sin(theta);
    const double cp = std::cos(phi), sp = std::sin(phi);

    Tensor img({1, S, S});
    for (std::size_t y = 0; y < S; ++y) {
        for (std::size_t x = 0; x < S; ++x) {
            const double xd = static_cast<double>(x), yd = static_cast<double>(y);
            double v = spec.background;
            const double dx = xd - cx, dy = yd - cy;
            const double ex = cp * dx + sp * dy;
            const double ey = -sp * dx + cp * dy;
            if ((ex / ax) * (ex / ax) + (ey / ay) * (ey / ay) <= 1.0) {
                const double u = ct * xd + st * yd;
                v += amp * (0.5 + 0.5 * std::sin(2.0 * kPi * freq * u / Sd + phase));
            }
            v *= speckle_sample(rng, spec.speckle_looks);
            v *= spec.contrast;
            img.v[y * S + x] = std::clamp(v, 0.0, 1.0);
        }
    }
    return img;
}

TaskData gen_synthetic(const SyntheticTaskSpec& spec) {
    spec.validate();
    TaskData task;
    task.name = spec.name;
    task.num_classes = spec.num_classes;
    task.train.image_size = spec.image_size;
    task.test.image_size = spec.image_size;

    std::uint64_t index = 0;
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::size_t i = 0; i < spec.train_per_class[c]; ++i) {
            task.train.images.push_back(synth_image(spec, static_cast<int>(c), index++));
            task.train.labels.push_back(static_cast<int>(c));
        }
    }
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::size_t i = 0; i < spec.test_per_class[c]; ++i) {
            task.test.images.push_back(synth_image(spec, static_cast<int>(c), index++));
            task.test.labels.push_back(static_cast<int>(c));
        }
    }
    return task;
}

LabeledSet LabeledSet::subset_per_class(std::size_t quota) const {
    LabeledSet out;
    out.image_size = image_size;
    std::map<int, std::size_t> taken;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (taken[labels[i]] >= quota) continue;
        ++taken[labels[i]];
        out.images.push_back(images[i]);
        out.labels.push_back(labels[i]);
    }
    return out;
}

static std::vector<std::size_t> uniform_counts(std::size_t classes, std::size_t per_class) {
    return std::vector<std::size_t>(classes, per_class);
}

static double deg(double d) { return d * kPi / 180.0; }

const SyntheticTaskSpec& preset(const std::string& name) {
    static const std::map<std::string, SyntheticTaskSpec> presets = [] {
        std::map<std::string, SyntheticTaskSpec> m;

        SyntheticTaskSpec src5;
        src5.name = "src5";
        src5.num_classes = 5;
        src5.image_size = 56;
        src5.frequencies = {2.5, 4.0, 5.5, 7.0, 8.5};
        src5.orientations = {deg(0), deg(36), deg(72), deg(108), deg(144)};
        src5.speckle_looks = 4.0;
        src5.contrast = 1.0;
        src5.train_per_class = uniform_counts(5, 400);
        src5.test_per_class = uniform_counts(5, 50);
        src5.gen_seed = 101;
        m["src5"] = src5;

        SyntheticTaskSpec mid3;
        mid3.name = "mid3";
        mid3.num_classes = 3;
        mid3.image_size = 56;
        mid3.frequencies = {3.0, 5.0, 7.0};
        mid3.orientations = {deg(15), deg(75), deg(135)};
        mid3.speckle_looks = 2.5;
        mid3.contrast = 0.9;
        mid3.train_per_class = uniform_counts(3, 200);
        mid3.test_per_class = uniform_counts(3, 60);
        mid3.gen_seed = 102;
        m["mid3"] = mid3;

        SyntheticTaskSpec tgt3;
        tgt3.name = "tgt3";
        tgt3.num_classes = 3;
        tgt3.image_size = 56;
        tgt3.frequencies = {3.0, 5.0, 7.0};
        tgt3.orientations = {deg(20), deg(80), deg(140)};
        tgt3.speckle_looks = 1.3;
        tgt3.contrast = 0.75;
        tgt3.train_per_class = {100, 100, 100};
        tgt3.test_per_class = {79, 132, 135};
        tgt3.gen_seed = 103;
        m["tgt3"] = tgt3;

        SyntheticTaskSpec twin = tgt3;
        twin.name = "tgt3_twin";
        twin.train_per_class = uniform_counts(3, 100);
        twin.test_per_class = uniform_counts(3, 60);
        twin.gen_seed = 104;
        m["tgt3_twin"] = twin;

        SyntheticTaskSpec recon5;
        recon5.name = "recon5";
        recon5.num_classes = 5;
        recon5.image_size = 72;
        recon5.frequencies = {2.5, 4.0, 5.5, 7.0, 8.5};
        recon5.orientations = {deg(10), deg(46), deg(82), deg(118), deg(154)};
        recon5.speckle_looks = 3.0;
        recon5.contrast = 1.0;
        recon5.train_per_class = uniform_counts(5, 60);
        recon5.test_per_class = uniform_counts(5, 10);
        recon5.gen_seed = 105;
        m["recon5"] = recon5;

        return m;
    }();
    auto it = presets.find(name);
    if (it == presets.end()) throw value_error("unknown benchmark preset '" + name + "'");
    return it->second;
}

std::vector<std::string> preset_names() {
    return {"src5", "mid3", "tgt3", "tgt3_twin", "recon5"};
}

void standardize(LabeledSet& set) {
    for (Tensor& img : set.images) {
        const double n = static_cast<double>(img.size());
        double mean = 0.0;
        for (double v : img.v) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : img.v) var += (v - mean) * (v - mean);
        const double sd = std::max(std::sqrt(var / n), 1e-6);
        for (double& v : img.v) v = (v - mean) / sd;
    }
}

void standardize(TaskData& task) {
    standardize(task.train);
    standardize(task.test);
}

// ---- PGM + manifest ----

static void write_pgm(const Tensor& img, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write " + path.string());
    const std::size_t S1 = img.dim(1), S2 = img.dim(2);
    f << "P5\n" << S2 << " " << S1 << "\n255\n";
    std::vector<unsigned char> bytes(S1 * S2);
    for (std::size_t i = 0; i < S1 * S2; ++i) {
        const double v = std::clamp(img.v[i], 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw io_error("short write to " + path.string());
}

void write_pgm_set(const TaskData& task, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "images");
    std::ofstream manifest(dir / "manifest.csv");
    if (!manifest) throw io_error("cannot write " + (dir / "manifest.csv").string());
    manifest << "path,label,split\n";
    char buf[64];
    for (std::size_t i = 0; i < task.train.size(); ++i) {
        std::snprintf(buf, sizeof buf, "images/train_%05zu.pgm", i);
        write_pgm(task.train.images[i], dir / buf);
        manifest << buf << "," << task.train.labels[i] << ",train\n";
    }
    for (std::size_t i = 0; i < task.test.size(); ++i) {
        std::snprintf(buf, sizeof buf, "images/test_%05zu.pgm", i);
        write_pgm(task.test.images[i], dir / buf);
        manifest << buf << "," << task.test.labels[i] << ",test\n";
    }
    if (!manifest) throw io_error("short write to manifest.csv");
}

static int pgm_token(std::istream& in, const std::string& path) {
    // skips whitespace and # comments between header tokens
    for (;;) {
        int c = in.get();
        if (c == EOF) throw io_error("truncated PGM header in " + path);
        if (std::isspace(c)) continue;
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
            continue;
        }
        int value = 0;
        bool any = false;
        while (c != EOF && std::isdigit(c)) {
            value = value * 10 + (c - '0');
            any = true;
            c = in.get();
        }
        if (!any) throw io_error("malformed PGM header in " + path);
        return value;
    }
}

static Tensor read_pgm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open " + path.string());
    char magic[2] = {0, 0};
    f.read(magic, 2);
    if (magic[0] != 'P' || magic[1] != '5')
        throw io_error("not a binary PGM (P5): " + path.string());
    const std::string p = path.string();
    const int w = pgm_token(f, p);
    const int h = pgm_token(f, p);
    const int maxval = pgm_token(f, p);
    // the digit scan already consumed the single separator after maxval
    if (w <= 0 || h <= 0) throw io_error("bad PGM dimensions in " + p);
    if (maxval <= 0 || maxval > 255)
        throw io_error("unsupported PGM maxval " + std::to_string(maxval) + " in " + p);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (f.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw io_error("truncated PGM pixel data in " + p);
    Tensor img({1, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
    for (std::size_t i = 0; i < bytes.size(); ++i)
        img.v[i] = static_cast<double>(bytes[i]) / static_cast<double>(maxval);
    return img;
}

// Center crop or zero pad [1,h,w] to [1,S,S].
static Tensor fit_image(const Tensor& img, std::size_t S) {
    const std::size_t h = img.dim(1), w = img.dim(2);
    if (h == S && w == S) return img;
    Tensor out({1, S, S});
    for (std::size_t y = 0; y < S; ++y) {
        for (std::size_t x = 0; x < S; ++x) {
            // source coordinate once centers are aligned
            const long sy = static_cast<long>(y) - (static_cast<long>(S) - static_cast<long>(h)) / 2;
            const long sx = static_cast<long>(x) - (static_cast<long>(S) - static_cast<long>(w)) / 2;
            if (sy >= 0 && sy < static_cast<long>(h) && sx >= 0 && sx < static_cast<long>(w))
                out.v[y * S + x] = img.v[static_cast<std::size_t>(sy) * w + sx];
        }
    }
    return out;
}

TaskData load_manifest(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.csv";
    std::ifstream f(manifest_path);
    if (!f) throw io_error("cannot open " + manifest_path.string());

    TaskData task;
    task.name = dir.filename().string();
    std::map<std::string, int> label_map;  // dense ids in first-appearance order
    std::size_t canonical = 0;

    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != "path,label,split")
                throw io_error(manifest_path.string() + ":" + std::to_string(lineno) +
                               ": expected header 'path,label,split'");
            header_seen = true;
            continue;
        }
        std::string fields[3];
        std::size_t pos = 0;
        for (int k = 0; k < 3; ++k) {
            const std::size_t comma = line.find(',', pos);
            if (k < 2 && comma == std::string::npos)
                throw io_error(manifest_path.string() + ":" + std::to_string(lineno) +
                               ": expected 3 comma-separated fields");
            fields[k] = line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                    : comma - pos);
            pos = comma + 1;
        }
        if (fields[2].find(',') != std::string::npos)
            throw io_error(manifest_path.string() + ":" + std::to_string(lineno) +
                           ": expected exactly 3 fields");
        if (fields[2] != "train" && fields[2] != "test")
            throw io_error(manifest_path.string() + ":" + std::to_string(lineno) +
                           ": split must be 'train' or 'test', got '" + fields[2] + "'");
        auto [it, inserted] =
            label_map.try_emplace(fields[1], static_cast<int>(label_map.size()));
        Tensor img = read_pgm(dir / fields[0]);
        if (canonical == 0) canonical = std::max(img.dim(1), img.dim(2));
        img = fit_image(img, canonical);
        LabeledSet& split = (fields[2] == "train") ? task.train : task.test;
        split.image_size = canonical;
        split.images.push_back(std::move(img));
        split.labels.push_back(it->second);
        (void)inserted;
    }
    if (!header_seen) throw io_error(manifest_path.string() + ": empty manifest");
    if (task.train.images.empty() && task.test.images.empty())
        throw io_error(manifest_path.string() + ": no samples listed");
    task.num_classes = label_map.size();
    return task;
}

}  // namespace xfrl::data
