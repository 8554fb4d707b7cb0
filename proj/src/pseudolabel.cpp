#include "dsseg/pseudolabel.hpp"

#include <vector>

namespace dsseg {

ProbMap predict(const ForwardFn& teacher_forward, const Volume& x) {
    NdArray<double> logits = teacher_forward(x);
    if (logits.ndim() != x.data().ndim() || drop_leading(logits.shape()) != x.spatial_shape()) {
        throw ValidationError("predict: logits " + shape_str(logits.shape()) + " do not cover input " +
                              shape_str(x.data().shape()));
    }
    return softmax(logits);
}

LabelMap largest_component_filter(const LabelMap& raw, Adjacency adjacency) {
    const Shape& shape = raw.shape();
    const std::size_t n = raw.size();
    const auto offsets = neighbour_offsets(shape.size(), adjacency);

    // Component id per voxel, assigned in scan order so ids increase with each component's minimum index.
    std::vector<int> component(n, -1);
    std::vector<std::size_t> sizes;
    std::vector<std::int32_t> component_class;
    std::vector<std::size_t> stack;
    std::vector<std::size_t> coord;
    for (std::size_t seed = 0; seed < n; ++seed) {
        const std::int32_t cls = raw[seed];
        if (cls == 0 || component[seed] >= 0) continue;
        const int id = static_cast<int>(sizes.size());
        sizes.push_back(0);
        component_class.push_back(cls);
        component[seed] = id;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t v = stack.back();
            stack.pop_back();
            ++sizes[id];
            unravel(v, shape, coord);
            for (const auto& off : offsets) {
                std::size_t u;
                if (neighbour_index(coord, off, shape, u) && component[u] < 0 && raw[u] == cls) {
                    component[u] = id;
                    stack.push_back(u);
                }
            }
        }
    }

    std::vector<int> keep(static_cast<std::size_t>(raw.num_classes()), -1);
    for (std::size_t id = 0; id < sizes.size(); ++id) {
        int& best = keep[static_cast<std::size_t>(component_class[id])];
        if (best < 0 || sizes[id] > sizes[static_cast<std::size_t>(best)]) best = static_cast<int>(id);
    }

    NdArray<std::int32_t> out(shape, 0);
    for (std::size_t v = 0; v < n; ++v) {
        const std::int32_t cls = raw[v];
        if (cls != 0 && component[v] == keep[static_cast<std::size_t>(cls)]) out[v] = cls;
    }
    return LabelMap(std::move(out), raw.num_classes());
}

}  // namespace dsseg
