#include "trijoin/bvh.hpp"
#include "trijoin/mesh.hpp"

namespace trijoin {

// Any point of a triangle has some barycentric coordinate >= 1/3, so it lies
// within (2/3) * longest_edge of that vertex; applied to one grid sub-cell
// (side lengths scaled by 1/grid_level) this bounds the distance from any
// surface point to its nearest sample. Holds for obtuse cells too, unlike the
// circumradius bound.
double hd_covering_radius(const Triangle& f_prime, int grid_level) {
    return (2.0 / 3.0) * f_prime.longest_edge() / static_cast<double>(grid_level);
}

double compute_facet_hd(const Triangle& f_prime, const TriBvh& original, int grid_level) {
    const Point3 e1 = f_prime.v1 - f_prime.v0;
    const Point3 e2 = f_prime.v2 - f_prime.v0;
    const double inv = 1.0 / static_cast<double>(grid_level);
    double worst = 0.0;
    for (int i = 0; i <= grid_level; ++i) {
        for (int j = 0; j + i <= grid_level; ++j) {
            const Point3 p = f_prime.v0 + e1 * (i * inv) + e2 * (j * inv);
            worst = std::max(worst, original.point_distance(p));
        }
    }
    return worst + hd_covering_radius(f_prime, grid_level);
}

double compute_facet_hd(const Triangle& f_prime, const Mesh& original, int grid_level) {
    return compute_facet_hd(f_prime, TriBvh(original), grid_level);
}

} // namespace trijoin
