#pragma once

#include "brp/grid.hpp"

namespace brp {

struct PostprocParams {
  double seg_thresh = 0.5;
  double bnd_thresh = 0.5;
  int min_area = 20;
  int dilation_radius = 2;
  int connectivity = 4;

  void validate() const;
};

/// Pixels with probability >= threshold.
BinaryMask binarize(const ProbMap& prob, double threshold);

SemanticMask subtract_boundary(const SemanticMask& seg_bin, const BoundaryMask& bnd_bin);

/// Maximal 4- or 8-connected foreground components, labeled 1..N in
/// row-major first-occurrence order.
InstanceMap connected_components(const BinaryMask& mask, int connectivity);

/// Instances with fewer than `min_area` pixels become background; survivors
/// are relabeled contiguously.
InstanceMap remove_small(const InstanceMap& m, int min_area);

/// Grows every instance into background pixels within Chebyshev distance
/// `radius`, assigning each such pixel to its nearest instance (lower id on
/// ties). Instance pixels are never reassigned.
InstanceMap dilate_instances(const InstanceMap& m, int radius);

/// binarize -> subtract boundary -> connected components -> remove small ->
/// dilate instances.
InstanceMap propose(const ProbabilityPair& pp, const PostprocParams& params);

}  // namespace brp
