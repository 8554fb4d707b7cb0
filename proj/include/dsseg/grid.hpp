#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "dsseg/ndarray.hpp"

namespace dsseg {

// Row-major strides of a shape.
inline std::vector<std::size_t> strides_of(const Shape& shape) {
    std::vector<std::size_t> s(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
    return s;
}

inline void unravel(std::size_t index, const Shape& shape, std::vector<std::size_t>& coord) {
    coord.resize(shape.size());
    for (std::size_t i = shape.size(); i-- > 0;) {
        coord[i] = index % shape[i];
        index /= shape[i];
    }
}

inline std::size_t ravel(const std::vector<std::size_t>& coord, const Shape& shape) {
    std::size_t index = 0;
    for (std::size_t i = 0; i < shape.size(); ++i) index = index * shape[i] + coord[i];
    return index;
}

enum class Adjacency { face, full };

// Offsets (per axis, in {-1, 0, 1}) of the neighbourhood of a voxel, excluding the voxel itself.
inline std::vector<std::vector<int>> neighbour_offsets(std::size_t rank, Adjacency adjacency) {
    std::vector<std::vector<int>> out;
    if (adjacency == Adjacency::face) {
        for (std::size_t axis = 0; axis < rank; ++axis) {
            for (int d : {-1, 1}) {
                std::vector<int> off(rank, 0);
                off[axis] = d;
                out.push_back(off);
            }
        }
        return out;
    }
    std::size_t total = 1;
    for (std::size_t i = 0; i < rank; ++i) total *= 3;
    for (std::size_t k = 0; k < total; ++k) {
        std::vector<int> off(rank);
        std::size_t r = k;
        bool zero = true;
        for (std::size_t i = rank; i-- > 0;) {
            off[i] = static_cast<int>(r % 3) - 1;
            r /= 3;
            zero = zero && off[i] == 0;
        }
        if (!zero) out.push_back(off);
    }
    return out;
}

// Neighbour index of `coord + off`, or false when it falls outside the grid.
inline bool neighbour_index(const std::vector<std::size_t>& coord, const std::vector<int>& off, const Shape& shape,
                            std::size_t& out) {
    std::size_t index = 0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        const long long c = static_cast<long long>(coord[i]) + off[i];
        if (c < 0 || c >= static_cast<long long>(shape[i])) return false;
        index = index * shape[i] + static_cast<std::size_t>(c);
    }
    out = index;
    return true;
}

}  // namespace dsseg
