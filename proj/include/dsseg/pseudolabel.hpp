#pragma once

#include <functional>

#include "dsseg/datamodel.hpp"
#include "dsseg/grid.hpp"

namespace dsseg {

// Maps a volume to class logits of shape (num_classes, spatial...).
using ForwardFn = std::function<NdArray<double>(const Volume&)>;

// Softmax of the teacher's logits; validates that the logits cover the volume's spatial grid.
ProbMap predict(const ForwardFn& teacher_forward, const Volume& x);

// Keeps, for every foreground class independently, only its largest connected component; the rest of that
// class becomes background (class 0). Equal-sized components are resolved toward the one containing the
// smallest linear index.
LabelMap largest_component_filter(const LabelMap& raw, Adjacency adjacency = Adjacency::face);

}  // namespace dsseg
