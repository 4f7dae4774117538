#ifndef DEFRAD_PLY_HPP
#define DEFRAD_PLY_HPP

#include <filesystem>
#include <iosfwd>

#include "defrad/geometry.hpp"

namespace defrad {

/**
 * ASCII PLY I/O for point clouds.
 *
 * Only the `vertex` element is interpreted; properties x, y, z are required
 * and nx, ny, nz are optional (all three or none). Other vertex properties
 * are skipped. Binary formats are rejected. The frame timestamp travels in a
 * `comment timestamp <seconds>` header line. Values are written with 9
 * significant digits.
 */
PointCloudFrame load_ply(const std::filesystem::path& path);
PointCloudFrame read_ply(std::istream& in);

void save_ply(const PointCloudFrame& cloud, const std::filesystem::path& path);
void write_ply(const PointCloudFrame& cloud, std::ostream& out);

}  // namespace defrad

#endif  // DEFRAD_PLY_HPP
