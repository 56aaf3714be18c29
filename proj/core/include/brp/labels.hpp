#pragma once

#include <vector>

#include "brp/grid.hpp"

namespace brp {

/// Renames labels to 1..N in row-major first-occurrence order. The pixel
/// partition is unchanged.
InstanceMap relabel_contiguous(const InstanceMap& m);

SemanticMask instance_to_semantic(const InstanceMap& m);

/// Marks every instance pixel that lies within Chebyshev distance `width` of
/// an in-image pixel carrying a different label. Evaluated per instance, so
/// both sides of a touching interface are boundary.
BoundaryMask instance_to_boundary(const InstanceMap& m, int width);

/// Largest label present (equals the instance count after relabeling).
int max_label(const InstanceMap& m);

/// Number of distinct non-zero labels.
int count_instances(const InstanceMap& m);

/// Pixel count per label; index 0 holds the background count.
std::vector<long> label_areas(const InstanceMap& m);

/// One Proposal per non-zero label, ordered by label id.
std::vector<Proposal> extract_proposals(const InstanceMap& m);

}  // namespace brp
