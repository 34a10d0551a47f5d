#pragma once

#include <zerod/types.hpp>

#include <Eigen/Dense>

#include <filesystem>

namespace zerod {

struct CenterlinePoint {
  int id = -1;
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
  double misr = 0.0; // maximum inscribed sphere radius, cm
  Eigen::Vector3d tangent = Eigen::Vector3d::UnitX();
  double path_distance = 0.0; // cumulative from root, cm
  int branch_id = 0;
  bool in_junction = false;
};

// Labeled centerline polyline tree: the geometric source of truth.
// Points are stored by index; ids are the external identifiers used in files
// and as 0D node ids.
struct CenterlineTree {
  std::vector<CenterlinePoint> points;
  std::vector<int> parent;                // index -> parent index (-1 for root)
  std::vector<std::vector<int>> children; // index -> child indices
  int root = -1;                          // index

  int index_of(int point_id) const;
  const CenterlinePoint& by_id(int point_id) const { return points[index_of(point_id)]; }
  int max_point_id() const;

 private:
  mutable std::map<int, int> id_index_;
  void build_id_index() const;
};

// Parses and validates the centerline JSON schema:
// {"points":[{"id","xyz":[...],"misr","tangent":[...],"branch_id","in_junction"}],
//  "edges":[[parent,child]],"root":id}
// Cumulative path distances are computed from the root. Throws ValidationError
// on schema violations, non-tree connectivity or non-unit tangents.
CenterlineTree parse_centerline(const std::filesystem::path& file);
CenterlineTree parse_centerline_json(const std::string& text);

std::string centerline_to_json(const CenterlineTree& tree);
void write_centerline_json(const CenterlineTree& tree, const std::filesystem::path& file);

} // namespace zerod
