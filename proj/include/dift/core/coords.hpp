#pragma once

#include "dift/core/types.hpp"

namespace dift {

/// Continuous coordinate on a feature grid; integer values are cell centers.
struct GridCoord {
    double u = 0.0;  // column
    double v = 0.0;  // row
};

// Pixel-center alignment: pixel centers and cell centers sit at +0.5 offsets
// of their respective lattices, so
//   u = (x + 0.5) * w / W - 0.5,   v = (y + 0.5) * h / H - 0.5.
GridCoord pixel_to_grid(Point2D p, Dims source, Dims grid);
Point2D grid_to_pixel(GridCoord g, Dims source, Dims grid);

/// Pixel location of the center of grid cell (row, col).
inline Point2D cell_center_pixel(int row, int col, Dims source, Dims grid) {
    return grid_to_pixel({static_cast<double>(col), static_cast<double>(row)}, source, grid);
}

}  // namespace dift
