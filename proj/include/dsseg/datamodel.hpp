#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsseg/ndarray.hpp"

namespace dsseg {

inline constexpr double kProbSumTolerance = 1e-5;

// Image of shape (C, D1, ..., Dk), k in {2, 3}, with physical voxel size per spatial axis.
class Volume {
public:
    Volume() = default;
    // Spacing defaults to 1 mm on every axis when empty.
    Volume(NdArray<double> data, std::vector<double> spacing = {});

    const NdArray<double>& data() const noexcept { return data_; }
    const std::vector<double>& spacing() const noexcept { return spacing_; }
    std::size_t channels() const { return data_.dim(0); }
    Shape spatial_shape() const { return drop_leading(data_.shape()); }
    std::size_t voxels() const { return data_.size() / channels(); }

    friend bool operator==(const Volume&, const Volume&) = default;

private:
    NdArray<double> data_;
    std::vector<double> spacing_;
};

class LabelMap {
public:
    LabelMap() = default;
    LabelMap(NdArray<std::int32_t> data, int num_classes);

    const NdArray<std::int32_t>& data() const noexcept { return data_; }
    int num_classes() const noexcept { return num_classes_; }
    const Shape& shape() const noexcept { return data_.shape(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::int32_t operator[](std::size_t i) const noexcept { return data_[i]; }

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
    NdArray<std::int32_t> data_;
    int num_classes_ = 2;
};

// Per-voxel categorical distribution, shape (num_classes, D1, ..., Dk).
class ProbMap {
public:
    ProbMap() = default;
    explicit ProbMap(NdArray<double> data);

    const NdArray<double>& data() const noexcept { return data_; }
    int num_classes() const { return static_cast<int>(data_.dim(0)); }
    Shape spatial_shape() const { return drop_leading(data_.shape()); }
    std::size_t voxels() const { return data_.size() / data_.dim(0); }
    double at(std::size_t cls, std::size_t voxel) const noexcept { return data_[cls * voxels() + voxel]; }

    // Per-voxel argmax; lowest class index wins ties.
    NdArray<std::int32_t> argmax() const;
    LabelMap argmax_labels() const;

private:
    NdArray<double> data_;
};

class BinaryMask {
public:
    BinaryMask() = default;
    explicit BinaryMask(NdArray<std::uint8_t> data);

    const NdArray<std::uint8_t>& data() const noexcept { return data_; }
    const Shape& shape() const noexcept { return data_.shape(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool operator[](std::size_t i) const noexcept { return data_[i] != 0; }
    std::size_t count() const noexcept;

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    NdArray<std::uint8_t> data_;
};

struct Sample {
    Volume image;
    std::optional<LabelMap> label;
    std::string id;

    // Throws ValidationError if the label's shape differs from the image's spatial shape.
    void validate() const;
};

// Named, ordered collection of real arrays (network weights).
class ParameterTree {
public:
    struct Entry {
        std::string name;
        NdArray<double> array;
        friend bool operator==(const Entry&, const Entry&) = default;
    };

    ParameterTree() = default;
    explicit ParameterTree(std::vector<Entry> entries);

    void add(std::string name, NdArray<double> array);

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::vector<Entry>& entries() noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const Entry& operator[](std::size_t i) const { return entries_.at(i); }
    Entry& operator[](std::size_t i) { return entries_.at(i); }
    const NdArray<double>& get(const std::string& name) const;
    NdArray<double>& get(const std::string& name);

    std::size_t parameter_count() const noexcept;
    // Tree with the same names/shapes filled with zeros.
    ParameterTree zeros_like() const;

    friend bool operator==(const ParameterTree&, const ParameterTree&) = default;

private:
    std::vector<Entry> entries_;
};

// Throws CongruenceError naming the first mismatching entry.
void require_congruent(const ParameterTree& a, const ParameterTree& b);
bool congruent(const ParameterTree& a, const ParameterTree& b) noexcept;

// Entrywise wa * a + wb * b.
ParameterTree tree_axpy(const ParameterTree& a, const ParameterTree& b, double wa, double wb);

// One-hot encoding of a label map as an (num_classes, spatial...) array.
NdArray<double> one_hot(const LabelMap& labels);

// Numerically stable softmax over the leading (class) axis.
ProbMap softmax(const NdArray<double>& logits);

}  // namespace dsseg
