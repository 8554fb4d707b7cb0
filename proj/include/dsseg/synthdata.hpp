#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsseg/datamodel.hpp"
#include "json.hpp"

namespace dsseg {

enum class ShapeFamily { ellipses, rectangles, mixed };

struct DatasetSpec {
    int num_samples = 100;
    Shape shape{64, 64};
    int num_classes = 3;  // including background
    ShapeFamily shape_family = ShapeFamily::mixed;
    double noise_sigma = 0.25;
    double intensity_overlap = 0.5;  // in [0, 1]
    double labeled_fraction = 0.1;
    // Extra held-out labeled samples for validation, listed under val_ids. Not counted in num_samples.
    int num_val = 0;
    std::uint64_t seed = 0;

    void validate() const;
    int labeled_count() const;
};

struct IntensityBand {
    double lo = 0.0;
    double hi = 0.0;
};

// Noise-free intensity range of every class. Bands are pairwise disjoint for intensity_overlap < 1.
std::vector<IntensityBand> intensity_bands(const DatasetSpec& spec);

struct DatasetManifest {
    int version = 1;
    std::vector<std::string> ids;
    std::vector<std::string> labeled_ids;
    std::vector<std::string> unlabeled_ids;
    std::vector<std::string> val_ids;
    DatasetSpec spec;
};

nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

// Deterministic synthetic sample; a pure function of (spec, index, is_val).
Sample synthesize_sample(const DatasetSpec& spec, int index, bool is_val);

// Writes every sample plus manifest.json. Output bytes depend only on the spec.
DatasetManifest generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

DatasetManifest load_manifest(const std::filesystem::path& dataset_dir);

void write_sample(const Sample& sample, const std::filesystem::path& sample_dir);

enum class LabelPolicy { load, skip };

// Reads header.json, image.bin and (unless skipped or absent) label.bin.
Sample load_sample(const std::filesystem::path& sample_dir, LabelPolicy policy = LabelPolicy::load);

Sample crop(const Sample& sample, const std::vector<std::size_t>& offset, const Shape& crop_shape);
Sample flip(const Sample& sample, std::size_t axis);

// Random crop at a seed-determined offset, then each axis in `flip_axes` is flipped with probability 1/2.
Sample augment(const Sample& sample, const Shape& crop_shape, std::uint64_t seed,
               const std::vector<std::size_t>& flip_axes);

}  // namespace dsseg
