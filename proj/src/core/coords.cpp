#include "dift/core/coords.hpp"

namespace dift {
namespace {

void require_positive(Dims d, const char* what) {
    if (d.height < 1 || d.width < 1) {
        throw ValidationError(std::string(what) + " dims must be positive");
    }
}

}  // namespace

GridCoord pixel_to_grid(Point2D p, Dims source, Dims grid) {
    require_positive(source, "source");
    require_positive(grid, "grid");
    return {(p.x + 0.5) * grid.width / source.width - 0.5,
            (p.y + 0.5) * grid.height / source.height - 0.5};
}

Point2D grid_to_pixel(GridCoord g, Dims source, Dims grid) {
    require_positive(source, "source");
    require_positive(grid, "grid");
    return {(g.u + 0.5) * source.width / grid.width - 0.5,
            (g.v + 0.5) * source.height / grid.height - 0.5};
}

}  // namespace dift
