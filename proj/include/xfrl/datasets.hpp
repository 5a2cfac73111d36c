#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xfrl/rng.hpp"
#include "xfrl/tensor.hpp"

namespace xfrl::data {

// Generator parameters for one synthetic task: oriented sinusoidal textures
// inside a random ellipse on a dark background, multiplied by gamma speckle
// (mean 1, variance 1/looks), contrast-scaled and clamped to [0,1].
struct SyntheticTaskSpec {
    std::string name;
    std::size_t num_classes = 0;
    std::size_t image_size = 64;
    std::vector<double> frequencies;   // per class, texture cycles across the image
    std::vector<double> orientations;  // per class, radians
    double speckle_looks = 4.0;
    double contrast = 1.0;
    double background = 0.08;
    std::vector<std::size_t> train_per_class;
    std::vector<std::size_t> test_per_class;
    std::uint64_t gen_seed = 1;

    void validate() const;
};

struct LabeledSet {
    std::size_t image_size = 0;
    std::vector<Tensor> images;  // each [1,S,S]
    std::vector<int> labels;

    std::size_t size() const { return images.size(); }
    // Deterministic stratified prefix: first quota of every class in stored order.
    LabeledSet subset_per_class(std::size_t quota) const;
};

struct TaskData {
    std::string name;
    std::size_t num_classes = 0;
    LabeledSet train;
    LabeledSet test;
};

// Multiplicative speckle factor: gamma(looks) / looks, unit mean, variance
// 1/looks.
double speckle_sample(Rng& rng, double looks);

// Elementwise multiplication of an image by fresh unit-mean speckle draws;
// deterministic per seed.
Tensor speckle(const Tensor& image, double looks, std::uint64_t seed);

// Deterministic synthesis; sample i draws from a stream derived from
// (gen_seed, i), so regeneration and order never interact.
TaskData gen_synthetic(const SyntheticTaskSpec& spec);

// Pinned benchmark presets (generator parameters are part of the repository):
// src5, mid3, tgt3, tgt3_twin, recon5. Unknown names are rejected.
const SyntheticTaskSpec& preset(const std::string& name);
std::vector<std::string> preset_names();

// In-place per-image standardization: (x - mean) / max(std, 1e-6).
void standardize(LabeledSet& set);
void standardize(TaskData& task);

// dir/manifest.csv with header path,label,split; 8-bit binary PGM images.
// Loaded pixels are value/maxval; images are center-cropped or zero-padded to
// the first image's size. Labels map densely in order of first appearance.
TaskData load_manifest(const std::filesystem::path& dir);

// Writes images as PGM plus a manifest.csv compatible with load_manifest.
void write_pgm_set(const TaskData& task, const std::filesystem::path& dir);

}  // namespace xfrl::data
