#pragma once

#include "deepam/image.hpp"
#include "deepam/model.hpp"

namespace deepam {

struct MosaicOptions {
  int zoom = 4;  // screen pixels per atom pixel
  int gap = 1;   // background pixels between atoms
};

/// Atoms of layer `layer` (1-based) as image patches. Layers 1..L show the rows
/// of Omega_i ... Omega_1 with the thresholds ignored; layer L+1 shows the
/// columns of D. Each patch is stretched to [0,255]. CAD atoms start on a new
/// row of the mosaic and are boxed in blue.
ByteImage render_dictionary(const DeepAMModel& model, int layer, const MosaicOptions& options = {});

/// Effective analysis operator of the first `layer` layers (thresholds ignored).
Matrix effective_dictionary(const DeepAMModel& model, int layer);

}  // namespace deepam
