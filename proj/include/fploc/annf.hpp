#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fploc/floorplan.hpp"

namespace fploc {

/// Two nearest elements of a field, nearer first. Single-element plans store the
/// same id twice.
struct ElementPair {
  ElementId first = 0;
  ElementId second = 0;

  bool same_unordered(const ElementPair& o) const {
    return (first == o.first && second == o.second) || (first == o.second && second == o.first);
  }
  bool contains(ElementId id) const { return first == id || second == id; }
  friend bool operator==(const ElementPair&, const ElementPair&) = default;
};

/// A leaf reached by a descent, with its implicit geometry.
struct FieldInfo {
  Vec2 center = Vec2::Zero();
  double half_length = 0.0;
  int depth = 1;
  ElementPair nearest;
};

/// Approximate nearest neighbour field: a grid of square root fields, each an
/// adaptive quad-tree whose fields cache the two elements nearest their center.
/// Root fields are depth 1; a field at depth k has side root_length / 2^(k-1).
class Annf {
 public:
  static constexpr double kDefaultRootLength = 6.0;
  static constexpr int kDefaultMaxDepth = 7;
  static constexpr std::uint32_t kFormatVersion = 1;

  static Annf build(const FloorPlan& plan, double root_length = kDefaultRootLength,
                    int max_depth = kDefaultMaxDepth);

  /// Throws OutOfBounds when the query lies outside the root grid.
  ElementPair lookup(const Vec2& query) const;
  /// Non-throwing lookup for hot paths.
  std::optional<ElementPair> find(const Vec2& query) const noexcept;
  /// Leaf reached by the descent, with the number of descent steps in `depth - 1`.
  std::optional<FieldInfo> leaf(const Vec2& query) const;

  bool contains(const Vec2& query) const;

  const Vec2& origin() const { return origin_; }
  double root_length() const { return root_length_; }
  int max_depth() const { return max_depth_; }
  std::uint32_t nx() const { return nx_; }
  std::uint32_t ny() const { return ny_; }
  std::uint32_t element_count() const { return element_count_; }
  bool single_element() const { return element_count_ == 1; }
  double leaf_length(int depth) const;
  Bounds grid_extent() const;

  std::size_t node_count() const { return children_.size(); }
  std::size_t leaf_count() const;

  /// Preorder walk of every field; `parent` is null for roots.
  template <class Fn>
  void visit(Fn&& fn) const {
    for (std::uint32_t iy = 0; iy < ny_; ++iy) {
      for (std::uint32_t ix = 0; ix < nx_; ++ix) {
        FieldInfo root{root_center(ix, iy), root_length_ / 2.0, 1, pairs_[iy * nx_ + ix]};
        visit_node(iy * nx_ + ix, root, nullptr, fn);
      }
    }
  }

  std::string save() const;
  static Annf load(std::string_view bytes);

 private:
  Annf() = default;

  Vec2 root_center(std::uint32_t ix, std::uint32_t iy) const {
    return origin_ + root_length_ * Vec2(ix + 0.5, iy + 0.5);
  }

  template <class Fn>
  void visit_node(std::uint32_t node, const FieldInfo& info, const FieldInfo* parent, Fn& fn) const {
    fn(info, parent, children_[node] == 0);
    if (children_[node] == 0) return;
    const double h = info.half_length / 2.0;
    for (std::uint32_t k = 0; k < 4; ++k) {
      FieldInfo child{info.center + Vec2((k & 1) ? h : -h, (k & 2) ? h : -h), h, info.depth + 1,
                      pairs_[children_[node] + k]};
      visit_node(children_[node] + k, child, &info, fn);
    }
  }

  void expand(const FloorPlan& plan, std::uint32_t node, const Vec2& center, double half, int depth);

  Vec2 origin_ = Vec2::Zero();
  double root_length_ = kDefaultRootLength;
  double inv_root_length_ = 1.0 / kDefaultRootLength;
  int max_depth_ = kDefaultMaxDepth;
  std::uint32_t nx_ = 0;
  std::uint32_t ny_ = 0;
  std::uint32_t element_count_ = 0;
  // children_[n] == 0 marks a leaf; otherwise the index of four contiguous children.
  // Kept apart from pairs_ so descents only touch the child index array.
  std::vector<std::uint32_t> children_;
  std::vector<ElementPair> pairs_;
};

/// Exact two nearest elements to `point`, ties by smaller id.
ElementPair nearest_pair(const FloorPlan& plan, const Vec2& point);

struct ValidationReport {
  int depth = 0;
  double leaf_length_cm = 0.0;
  double hit_first = 0.0;
  double hit_first_or_second = 0.0;
  double mean_lookup_ns = 0.0;
  std::size_t sample_count = 0;
};

/// Uniform samples inside the plan bounds with their brute-force nearest element.
struct OracleSamples {
  std::vector<Vec2> points;
  std::vector<ElementId> nearest;
};

OracleSamples make_oracle_samples(const FloorPlan& plan, std::size_t n_samples, std::uint64_t seed);

ValidationReport validate_annf(const Annf& annf, const OracleSamples& samples);
ValidationReport validate_annf(const Annf& annf, const FloorPlan& plan, std::size_t n_samples,
                               std::uint64_t seed);

/// Mean wall time per lookup over `queries`, repeated until at least `min_seconds` elapsed.
double time_lookups_ns(const Annf& annf, const std::vector<Vec2>& queries, double min_seconds = 0.05);

std::string validation_csv_header();
std::string validation_csv_row(const ValidationReport& r);

}  // namespace fploc
